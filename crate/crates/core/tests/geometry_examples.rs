//! Ball-curvature examples that need refinement studies or dense oracles.

mod common;

use common::dense_lower;
use exflow::ball::{curve_field, touching_ball_check, verify_reflection_identity, Attained, TouchingKind};
use exflow::curve::{AnalyticCurve, DiscreteCurve};

/// Equal-arclength sampling shifted by 0.3 of a spacing, so no vertex is the
/// mirror image of another and discrete partners miss the exact ones.
fn offset_sampling(c: &AnalyticCurve, n: usize) -> DiscreteCurve {
    let dense = c.sample_arclength(10 * n);
    DiscreteCurve::new((0..n).map(|i| dense[3 + 10 * i]).collect()).unwrap()
}

fn max_reflection_residual(d: &DiscreteCurve) -> f64 {
    let f = curve_field(d).unwrap();
    (0..d.len()).filter_map(|i| verify_reflection_identity(d, &f, i).ok()).fold(0.0, f64::max)
}

#[test]
fn reflection_residual_is_first_order() {
    let e = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 };
    let coarse = max_reflection_residual(&offset_sampling(&e, 512));
    let fine = max_reflection_residual(&offset_sampling(&e, 1024));
    assert!(coarse > 1e-6, "offset sampling should leave a discretization residual");
    assert!(fine <= 0.5 * coarse * 1.01, "{coarse:e} -> {fine:e}");
}

#[test]
fn reflection_residual_on_convex_curves_at_1024() {
    for name in ["ellipse:a=2,b=1", "ellipse:a=1.5,b=1", "limacon:eps=0.2"] {
        let c = AnalyticCurve::parse(name).unwrap();
        for d in [c.discretize(1024).unwrap(), offset_sampling(&c, 1024)] {
            let r = max_reflection_residual(&d);
            assert!(r < 1e-2, "{name}: {r:e}");
        }
    }
}

#[test]
fn symmetric_sampling_hits_mirror_partners_exactly() {
    // the exscribed partner of an ellipse vertex is its mirror image
    let d = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 }.discretize(512).unwrap();
    assert!(max_reflection_residual(&d) < 1e-12);
}

#[test]
fn ball_curvatures_are_stable_under_refinement() {
    for name in ["ellipse:a=2,b=1", "limacon:eps=0.2", "limacon:eps=0.7"] {
        let c = AnalyticCurve::parse(name).unwrap();
        let diff = |n: usize| {
            let a = curve_field(&c.discretize(n).unwrap()).unwrap();
            let b = curve_field(&c.discretize(2 * n).unwrap()).unwrap();
            // vertex i at N coincides with vertex 2i at 2N
            let dl = (0..n).map(|i| (a.lower[i] - b.lower[2 * i]).abs()).fold(0.0, f64::max);
            let du = (0..n).map(|i| (a.upper[i] - b.upper[2 * i]).abs()).fold(0.0, f64::max);
            (dl, du)
        };
        let (l1, u1) = diff(256);
        let (l2, u2) = diff(512);
        assert!(l2 <= 0.55 * l1 && u2 <= 0.55 * u1, "{name}: lower {l1:e} -> {l2:e}, upper {u1:e} -> {u2:e}");
    }
}

#[test]
fn exscribed_converges_to_dense_resampling() {
    for name in ["ellipse:a=2,b=1", "limacon:eps=0.2"] {
        let seed = AnalyticCurve::parse(name).unwrap();
        let worst = |n: usize| {
            let d = seed.discretize(n).unwrap();
            let f = curve_field(&d).unwrap();
            (0..n)
                .step_by(n / 32)
                .map(|i| {
                    let lo = dense_lower(&d, &seed, i, 10);
                    (f.lower[i] - lo).abs() / lo.abs().max(1e-3)
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (worst(256), worst(512));
        assert!(fine <= 0.6 * coarse || fine <= 1e-6, "{name}: {coarse:e} -> {fine:e}");
        // the flat side of the ellipse, where the partner is the antipode
        let d = seed.discretize(256).unwrap();
        let lo = dense_lower(&d, &seed, 64, 10);
        assert!((curve_field(&d).unwrap().lower[64] - lo).abs() <= 1e-3 * lo);
    }
}

#[test]
fn convex_curves_have_nonnegative_exscribed_curvature() {
    for name in ["circle:r=0.5", "ellipse:a=3,b=1", "limacon:eps=0.2", "limacon:eps=0.24"] {
        let f = curve_field(&AnalyticCurve::parse(name).unwrap().discretize(256).unwrap()).unwrap();
        assert!(f.min_lower() >= 0.0, "{name}");
    }
}

#[test]
fn ellipse_tip_ball_contains_curve() {
    let d = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 }.discretize(1024).unwrap();
    let f = curve_field(&d).unwrap();
    assert_eq!(f.lower_attained[0], Attained::Interior);
    let t = touching_ball_check(0, &f, d.points(), d.normals());
    assert_eq!(t.kind, TouchingKind::Ball);
    assert!(t.relative_violation() <= 1e-8);
}

#[test]
fn concave_limacon_vertices_touch_ball_complements() {
    let d = AnalyticCurve::Limacon { eps: 0.7 }.discretize(512).unwrap();
    let f = curve_field(&d).unwrap();
    let concave: Vec<usize> = (0..d.len()).filter(|&i| f.lower[i] < 0.0).collect();
    assert!(!concave.is_empty());
    for i in concave {
        let t = touching_ball_check(i, &f, d.points(), d.normals());
        assert_ne!(t.kind, TouchingKind::Ball);
        assert!(t.relative_violation() <= 1e-8, "{i}: {t:?}");
    }
}
