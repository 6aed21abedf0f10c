//! Extrinsic ball curvature of point pairs, its extrema over a sampled
//! hypersurface, touching balls, and pointwise checks of the two-point
//! derivative identities on analytic curves.

use nalgebra::SVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::curve::{AnalyticCurve, DiscreteCurve, P2};
use crate::error::{Error, Result};

/// Partners within this many mesh neighbours count as boundary-attained.
pub const NEIGHBOR_THRESHOLD: usize = 3;

/// `2 <x - y, nu_x> / |x - y|^2`.
pub fn ball_curvature<const D: usize>(x: &SVector<f64, D>, nu: &SVector<f64, D>, y: &SVector<f64, D>) -> Result<f64> {
    let v = x - y;
    let d2 = v.norm_squared();
    if d2 == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(2.0 * v.dot(nu) / d2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Attained {
    /// A distant partner realizes the extremum.
    Interior,
    /// The diagonal limit (principal curvature) or a nearby partner wins.
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallCurvatureField {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Pair argmin / argmax over the other samples.
    pub lower_partner: Vec<Option<usize>>,
    pub upper_partner: Vec<Option<usize>>,
    pub lower_attained: Vec<Attained>,
    pub upper_attained: Vec<Attained>,
    pub kappa_min: Vec<f64>,
    pub kappa_max: Vec<f64>,
}

impl BallCurvatureField {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn min_lower(&self) -> f64 {
        self.lower.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_upper(&self) -> f64 {
        self.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest violation of `lower <= kappa_min <= kappa_max <= upper`.
    pub fn ordering_violation(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                (self.lower[i] - self.kappa_min[i])
                    .max(self.kappa_min[i] - self.kappa_max[i])
                    .max(self.kappa_max[i] - self.upper[i])
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Pair extrema of the ball curvature merged with the principal curvature
/// limits. `near(i, j)` marks partners treated as boundary-attained.
pub fn compute_field<const D: usize, N>(
    pos: &[SVector<f64, D>],
    nu: &[SVector<f64, D>],
    kappa_min: &[f64],
    kappa_max: &[f64],
    near: N,
) -> BallCurvatureField
where
    N: Fn(usize, usize) -> bool + Sync,
{
    let n = pos.len();
    let rows: Vec<(f64, Option<usize>, f64, Option<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = pos[i];
            let v = nu[i];
            let (mut lo, mut lo_j, mut hi, mut hi_j) = (f64::INFINITY, None, f64::NEG_INFINITY, None);
            for (j, y) in pos.iter().enumerate() {
                if j == i {
                    continue;
                }
                let w = x - y;
                let d2 = w.norm_squared();
                if d2 == 0.0 {
                    continue;
                }
                let k = 2.0 * w.dot(&v) / d2;
                if k < lo {
                    lo = k;
                    lo_j = Some(j);
                }
                if k > hi {
                    hi = k;
                    hi_j = Some(j);
                }
            }
            (lo, lo_j, hi, hi_j)
        })
        .collect();
    let mut f = BallCurvatureField {
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        lower_partner: Vec::with_capacity(n),
        upper_partner: Vec::with_capacity(n),
        lower_attained: Vec::with_capacity(n),
        upper_attained: Vec::with_capacity(n),
        kappa_min: kappa_min.to_vec(),
        kappa_max: kappa_max.to_vec(),
    };
    for (i, (lo, lo_j, hi, hi_j)) in rows.into_iter().enumerate() {
        let lower_interior = lo < kappa_min[i] && lo_j.is_some_and(|j| !near(i, j));
        f.lower.push(lo.min(kappa_min[i]));
        f.lower_partner.push(lo_j);
        f.lower_attained.push(if lower_interior { Attained::Interior } else { Attained::Boundary });
        let upper_interior = hi > kappa_max[i] && hi_j.is_some_and(|j| !near(i, j));
        f.upper.push(hi.max(kappa_max[i]));
        f.upper_partner.push(hi_j);
        f.upper_attained.push(if upper_interior { Attained::Interior } else { Attained::Boundary });
    }
    f
}

/// Exscribed and inscribed curvatures of an embedded closed curve.
pub fn curve_field(curve: &DiscreteCurve) -> Result<BallCurvatureField> {
    curve.check_embedded()?;
    Ok(curve_field_unchecked(curve))
}

pub fn curve_field_unchecked(curve: &DiscreteCurve) -> BallCurvatureField {
    let k = curve.curvatures();
    compute_field(curve.points(), curve.normals(), k, k, |i, j| curve.index_gap(i, j) <= NEIGHBOR_THRESHOLD)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TouchingKind {
    /// Positive curvature: the hypersurface lies inside the closed ball.
    Ball,
    /// Negative curvature: the hypersurface lies outside the open ball.
    ComplementOfBall,
    /// Curvature below the flatness threshold: a closed half-space.
    HalfSpace,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TouchingReport {
    pub index: usize,
    pub kind: TouchingKind,
    pub curvature: f64,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    /// Largest distance by which a sample sits on the wrong side.
    pub worst_violation: f64,
    pub worst_index: Option<usize>,
    pub diameter: f64,
}

impl TouchingReport {
    pub fn relative_violation(&self) -> f64 {
        self.worst_violation / self.diameter
    }
}

fn diameter<const D: usize>(pos: &[SVector<f64, D>]) -> f64 {
    (0..pos.len())
        .into_par_iter()
        .map(|i| pos[i + 1..].iter().map(|q| (pos[i] - q).norm_squared()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Builds the extrinsic ball of curvature `lower[i]` touching at sample `i`
/// and scans every sample for containment.
pub fn touching_ball_check<const D: usize>(
    i: usize,
    field: &BallCurvatureField,
    pos: &[SVector<f64, D>],
    nu: &[SVector<f64, D>],
) -> TouchingReport {
    let diam = diameter(pos);
    let k = field.lower[i];
    let x = pos[i];
    let v = nu[i];
    let eps0 = 1e-9 / diam;
    let (kind, center, radius) = if k.abs() <= eps0 {
        (TouchingKind::HalfSpace, None, None)
    } else {
        let c = x - v / k;
        let kind = if k > 0.0 { TouchingKind::Ball } else { TouchingKind::ComplementOfBall };
        (kind, Some(c), Some(1.0 / k.abs()))
    };
    let mut worst = 0.0_f64;
    let mut worst_index = None;
    for (j, y) in pos.iter().enumerate() {
        let w = x - y;
        let depth = match (center, radius) {
            (Some(c), Some(r)) => (k * w.norm_squared() - 2.0 * w.dot(&v)) / (k.abs() * ((y - c).norm() + r)),
            _ => -w.dot(&v),
        };
        if depth > worst {
            worst = depth;
            worst_index = Some(j);
        }
    }
    TouchingReport {
        index: i,
        kind,
        curvature: k,
        center: center.map(|c| c.iter().copied().collect()),
        radius,
        worst_violation: worst,
        worst_index,
        diameter: diam,
    }
}

/// `|nu_y - (nu_x - k d w)|` at the exscribed partner of vertex `i`.
pub fn verify_reflection_identity(curve: &DiscreteCurve, field: &BallCurvatureField, i: usize) -> Result<f64> {
    if field.lower_attained[i] != Attained::Interior {
        return Err(Error::NotApplicable(format!("vertex {i}: exscribed curvature is boundary-attained")));
    }
    let j = field.lower_partner[i].ok_or_else(|| Error::NotApplicable(format!("vertex {i} has no partner")))?;
    Ok(reflection_residual(curve.point(i), curve.normal(i), curve.point(j), curve.normal(j)))
}

/// `|nu_y - (nu_x - k d w)|` with `k = k(x, y)`, `d = |x - y|`, `w = (x - y)/d`.
pub fn reflection_residual(x: P2, nu_x: P2, y: P2, nu_y: P2) -> f64 {
    let v = x - y;
    let d2 = v.norm_squared();
    let k = 2.0 * v.dot(&nu_x) / d2;
    (nu_y - (nu_x - k * v)).norm()
}

// --------------------------------------------------- analytic identities

/// Ball curvature between parameters `tx`, `ty` of an analytic curve.
pub fn analytic_k(c: &AnalyticCurve, tx: f64, ty: f64) -> f64 {
    let x = c.position(tx);
    let v = x - c.position(ty);
    2.0 * v.dot(&c.normal(tx)) / v.norm_squared()
}

/// Closed-form arclength derivatives of `k(x, y)` in `x` and in `y`.
pub fn first_variation_formulas(c: &AnalyticCurve, tx: f64, ty: f64) -> (f64, f64) {
    let x = c.position(tx);
    let y = c.position(ty);
    let d = (x - y).norm();
    let w = (x - y) / d;
    let k = analytic_k(c, tx, ty);
    let nu_x = c.normal(tx);
    let dx = -(2.0 / d) * (k - c.curvature(tx)) * w.dot(&c.tangent(tx));
    let dy = -(2.0 / (d * d)) * c.tangent(ty).dot(&(nu_x - k * d * w));
    (dx, dy)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FirstVariation {
    pub formula_x: f64,
    pub fd_x: f64,
    pub formula_y: f64,
    pub fd_y: f64,
    pub residual_x: f64,
    pub residual_y: f64,
}

/// Compares the closed-form first variations with central differences of
/// `k` along the curve, converted from parameter to arclength.
pub fn verify_first_variation(c: &AnalyticCurve, tx: f64, ty: f64, step: f64) -> FirstVariation {
    let (formula_x, formula_y) = first_variation_formulas(c, tx, ty);
    let fd_x = (analytic_k(c, tx + step, ty) - analytic_k(c, tx - step, ty)) / (2.0 * step) / c.speed(tx);
    let fd_y = (analytic_k(c, tx, ty + step) - analytic_k(c, tx, ty - step)) / (2.0 * step) / c.speed(ty);
    FirstVariation {
        formula_x,
        fd_x,
        formula_y,
        fd_y,
        residual_x: (formula_x - fd_x).abs(),
        residual_y: (formula_y - fd_y).abs(),
    }
}

/// Parameter of the partner minimizing `k(tx, .)` away from `tx`: a dense
/// scan followed by golden-section refinement. The excluded window is
/// `|ty - tx| < 0.05` (mod `2 pi`).
pub fn critical_partner(c: &AnalyticCurve, tx: f64) -> (f64, f64) {
    use std::f64::consts::TAU;
    let m = 4096;
    let k_at = |t: f64| analytic_k(c, tx, t);
    let gap = |t: f64| {
        let d = (t - tx).rem_euclid(TAU);
        d.min(TAU - d)
    };
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..m {
        let t = TAU * i as f64 / m as f64;
        if gap(t) < 0.05 {
            continue;
        }
        let k = k_at(t);
        if k < best.0 {
            best = (k, t);
        }
    }
    let h = TAU / m as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c1 = b - g * (b - a);
    let mut c2 = a + g * (b - a);
    let (mut f1, mut f2) = (k_at(c1), k_at(c2));
    for _ in 0..200 {
        if f1 < f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - g * (b - a);
            f1 = k_at(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + g * (b - a);
            f2 = k_at(c2);
        }
        if b - a < 1e-15 {
            break;
        }
    }
    let t = 0.5 * (a + b);
    (t, k_at(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::AnalyticCurve;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn ball_curvature_examples() {
        let x = P2::new(1.0, 0.0);
        assert_eq!(ball_curvature(&x, &P2::new(1.0, 0.0), &P2::new(-1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(ball_curvature(&x, &P2::new(1.0, 0.0), &P2::new(1.0, 3.0)).unwrap(), 0.0);
        assert!(matches!(ball_curvature(&x, &x, &x), Err(Error::CoincidentPoints)));
        let c = AnalyticCurve::Circle { r: 2.0 };
        for (tx, ty) in [(0.0, 1.0), (0.3, 4.0), (2.0, 2.1)] {
            let k = ball_curvature(&c.position(tx), &c.normal(tx), &c.position(ty)).unwrap();
            assert!((k - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_field_is_constant() {
        let d = DiscreteCurve::new(AnalyticCurve::Circle { r: 2.0 }.sample_parameter(128)).unwrap();
        let f = curve_field(&d).unwrap();
        for i in 0..d.len() {
            assert!((f.lower[i] - 0.5).abs() < 1e-10 * 0.5);
            assert!((f.upper[i] - 0.5).abs() < 1e-10 * 0.5);
        }
        assert_eq!(f.ordering_violation(), 0.0);
        let t = touching_ball_check(5, &f, d.points(), d.normals());
        assert_eq!(t.kind, TouchingKind::Ball);
        assert!(t.worst_violation < 1e-12);
        for i in 0..d.len() {
            let r = reflection_residual(d.point(0), d.normal(0), d.point(i.max(1)), d.normal(i.max(1)));
            assert!(r < 1e-10);
        }
    }

    #[test]
    fn ellipse_field_matches_dense_resampling() {
        let e = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 };
        let n = 256;
        let d = e.discretize(n).unwrap();
        let f = curve_field(&d).unwrap();
        assert!(f.min_lower() >= 0.0);
        // brute-force oracle: the same vertex against a 10x denser sampling
        let dense = e.sample_arclength(10 * n);
        for i in [0, n / 8, n / 4, 3 * n / 8] {
            let x = d.point(i);
            let nu = d.normal(i);
            let lo = dense
                .iter()
                .filter(|y| (x - *y).norm() > 1e-9)
                .map(|y| ball_curvature(&x, &nu, y).unwrap())
                .fold(f64::INFINITY, f64::min)
                .min(d.kappa(i));
            assert!((f.lower[i] - lo).abs() <= 1e-3 * lo.abs(), "{i}: {} vs {lo}", f.lower[i]);
        }
        // tip of the major axis: antipodal partner, interior-attained
        assert_eq!(f.lower_attained[0], Attained::Interior);
        assert!((f.lower[0] - 0.5).abs() < 1e-3);
        let t = touching_ball_check(0, &f, d.points(), d.normals());
        assert!(t.relative_violation() <= 1e-8);
    }

    #[test]
    fn nonconvex_limacon_touching_complement() {
        let l = AnalyticCurve::Limacon { eps: 0.7 };
        let d = l.discretize(512).unwrap();
        let f = curve_field(&d).unwrap();
        let i = d.len() / 2;
        assert!(d.kappa(i) < 0.0 && f.lower[i] < 0.0);
        let t = touching_ball_check(i, &f, d.points(), d.normals());
        assert_eq!(t.kind, TouchingKind::ComplementOfBall);
        assert!(t.relative_violation() <= 1e-8);
        assert_eq!(f.ordering_violation(), 0.0);
    }

    #[test]
    fn first_variation_on_circle_and_ellipse() {
        let c = AnalyticCurve::Circle { r: 1.5 };
        let v = verify_first_variation(&c, 0.4, 2.9, 1e-5);
        assert!(v.formula_x.abs() < 1e-10 && v.formula_y.abs() < 1e-10);
        assert!(v.residual_x < 1e-10 && v.residual_y < 1e-10);
        let e = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 };
        for (tx, ty) in [(0.3, 2.5), (1.0, 4.0), (5.5, 2.2)] {
            let v = verify_first_variation(&e, tx, ty, 1e-5);
            assert!(v.residual_x <= 1e-5 * v.formula_x.abs(), "{v:?}");
            assert!(v.residual_y <= 1e-5 * v.formula_y.abs(), "{v:?}");
        }
    }

    #[test]
    fn critical_partner_kills_y_derivative() {
        let e = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 };
        for tx in [0.0, 0.2, 2.8] {
            let (ty, _) = critical_partner(&e, tx);
            let (_, dy) = first_variation_formulas(&e, tx, ty);
            assert!(dy.abs() < 1e-6, "{tx}: {dy}");
        }
        let (ty, k) = critical_partner(&e, 0.0);
        assert!(((ty - PI).abs() < 1e-6 || (ty - PI).abs() > TAU - 1e-6) && (k - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reflection_identity_at_continuum_critical_pair() {
        let e = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 };
        let (ty, _) = critical_partner(&e, 0.3);
        let r = reflection_residual(e.position(0.3), e.normal(0.3), e.position(ty), e.normal(ty));
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn boundary_attained_is_not_applicable() {
        let e = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 };
        let d = e.discretize(256).unwrap();
        let f = curve_field(&d).unwrap();
        let i = (0..d.len()).find(|&i| f.lower_attained[i] == Attained::Boundary).unwrap();
        assert!(matches!(verify_reflection_identity(&d, &f, i), Err(Error::NotApplicable(_))));
    }
}
