//! Residual refinement studies and round-surface runs against the radius ODE.

use exflow::ball::curve_field;
use exflow::curve::{AnalyticCurve, DiscreteCurve};
use exflow::flow::residual::max_norm;
use exflow::flow::{residual_evo_f, residual_evo_k, run_flow, symmetric_history, CurveLaw, FlowConfig};
use exflow::psi::{Modulator, Regime};
use exflow::rng::trial_rng;
use exflow::speed::SpeedFunction;
use rand::Rng;

const DT: f64 = 1e-5;
const MODULATORS: [&str; 3] = ["identity", "sqrt_shift", "neg_power:alpha=1"];

fn law(psi: &str) -> CurveLaw {
    CurveLaw::new(&SpeedFunction::power_mean(1.0, 1).unwrap(), Modulator::parse(psi).unwrap()).unwrap()
}

fn ellipse(n: usize) -> DiscreteCurve {
    AnalyticCurve::Ellipse { a: 2.0, b: 1.0 }.discretize(n).unwrap()
}

#[test]
fn speed_residual_drops_threefold_on_refinement() {
    for psi in MODULATORS {
        let l = law(psi);
        let r = |n: usize| max_norm(&residual_evo_f(&symmetric_history(&ellipse(n), &l, DT).unwrap(), DT, &l).unwrap());
        let (coarse, fine) = (r(256), r(512));
        assert!(coarse / fine >= 3.0, "{psi}: {coarse:e} -> {fine:e}");
    }
}

#[test]
fn pair_residual_on_random_pairs() {
    // spatial error is second order; neg_power needs 4096 vertices for 1e-3
    let n = 4096;
    let c = ellipse(n);
    let mut rng = trial_rng(21, 0);
    for psi in MODULATORS {
        let l = law(psi);
        let h = symmetric_history(&c, &l, DT).unwrap();
        for _ in 0..16 {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(n / 8..7 * n / 8)) % n;
            let r = residual_evo_k(&h, DT, i, j, &l).unwrap();
            assert!(r.relative() <= 1e-3, "{psi} ({i}, {j}): {}", r.relative());
        }
    }
}

#[test]
fn simplified_pair_equation_agrees_at_critical_partners() {
    // shifted sampling so discrete partners are not exact mirror images
    let sampled = |n: usize| {
        let dense = AnalyticCurve::Ellipse { a: 2.0, b: 1.0 }.sample_arclength(10 * n);
        DiscreteCurve::new((0..n).map(|i| dense[3 + 10 * i]).collect()).unwrap()
    };
    for psi in MODULATORS {
        let l = law(psi);
        let gap = |n: usize| {
            let c = sampled(n);
            let field = curve_field(&c).unwrap();
            let h = symmetric_history(&c, &l, DT).unwrap();
            [n / 16, n / 8 + 1, 3 * n / 16]
                .iter()
                .map(|&i| {
                    let r = residual_evo_k(&h, DT, i, field.lower_partner[i].unwrap(), &l).unwrap();
                    (r.rhs_full - r.rhs_simplified).abs() / r.rhs_full.abs()
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (gap(256), gap(512));
        assert!(coarse < 1e-4 && fine <= 0.5 * coarse, "{psi}: {coarse:e} -> {fine:e}");
    }
}

#[test]
fn shrinking_sphere_follows_radius_ode() {
    let cfg = FlowConfig::parse_str(
        "geometry = sphere:r=1\nspeed = power_mean:r=1\npsi = identity\nt_max = 0.2\nn_lat = 32\nn_lon = 64\noracle = true\nrecord_dt = 0.02",
    )
    .unwrap();
    let run = run_flow(&cfg).unwrap();
    assert!(run.error.is_none(), "{:?}", run.error);
    assert_eq!(run.regime, Regime::Both);
    let v = run.verdicts.oracle.unwrap();
    assert!(v.pass && v.worst <= 1e-3, "{v:?}");
    assert!((run.final_time() - 0.2).abs() < 1e-12);
}

#[test]
fn circle_ratio_stays_constant_for_every_modulator() {
    for psi in MODULATORS {
        let t_max = if psi == "neg_power:alpha=1" { 0.5 } else { 0.2 };
        let cfg = FlowConfig::parse_str(&format!("geometry = circle:r=1\npsi = {psi}\nt_max = {t_max}\nn = 256")).unwrap();
        let run = run_flow(&cfg).unwrap();
        let u0 = run.records[0].u;
        for r in &run.records {
            assert!((r.u - u0).abs() <= 1e-6, "{psi} at {}: {} vs {u0}", r.t, r.u);
        }
    }
}
