//! Time integration to the horizon with periodic diagnostics: speed and
//! curvature ranges, ball curvature extrema, the shifted lower ball
//! curvature `Z = k_lower + beta F`, the ratio `u = min k_lower / F`,
//! pinching, and the round-sphere oracle.

use std::fs::File;
use std::io::BufReader;

use serde::Serialize;

use crate::ball::{curve_field_unchecked, BallCurvatureField};
use crate::curve::{remesh, remesh_error, DiscreteCurve};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_curve_csv, read_surface_csv};
use crate::lab::{check_convexity, check_inverse_concave, Criterion, DEFAULT_TOL};
use crate::psi::{check_conditions, classify_regime, Grid, Modulator, Regime};
use crate::speed::SpeedFunction;
use crate::surface::SupportSurface;

use super::config::{FlowConfig, Geometry};
use super::curve_flow::{advance, CurveLaw};
use super::oracle::{sphere_oracle, RadiusTrajectory, ORACLE_DT};
use super::support_flow::{SupportStepper, SurfaceLaw};

/// Samples per structural check when classifying the regime.
pub const REGIME_TRIALS: usize = 2000;

/// Steps below this are treated as a stalled run.
const MIN_DT: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub enum FlowState {
    Curve(DiscreteCurve),
    Surface(SupportSurface),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Pass,
    Fail,
    NotTracked,
}

impl Flag {
    fn of(tracked: bool, ok: bool) -> Self {
        match (tracked, ok) {
            (false, _) => Flag::NotTracked,
            (true, true) => Flag::Pass,
            (true, false) => Flag::Fail,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Flag::Pass => "pass",
            Flag::Fail => "fail",
            Flag::NotTracked => "na",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: usize,
    pub dt: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub lower_min: f64,
    pub upper_max: f64,
    pub z_min: f64,
    pub u: f64,
    /// Largest pointwise ratio of extreme principal curvatures.
    pub pinching: f64,
    /// Relative radius error against the round-sphere ODE (NaN without it).
    pub oracle_rel_err: f64,
    pub ordering_violation: f64,
    /// Extra slack granted to the `u` comparison for remeshes since the
    /// previous record.
    pub remesh_allowance: f64,
    pub embedded: Flag,
    pub z_ok: Flag,
    pub u_ok: Flag,
    pub oracle_ok: Flag,
    pub pinching_ok: Flag,
}

pub const RECORD_COLUMNS: [&str; 20] = [
    "t",
    "step",
    "dt",
    "f_min",
    "f_max",
    "kappa_min",
    "kappa_max",
    "lower_min",
    "upper_max",
    "z_min",
    "u",
    "pinching",
    "oracle_rel_err",
    "ordering_violation",
    "remesh_allowance",
    "embedded",
    "z_ok",
    "u_ok",
    "oracle_ok",
    "pinching_ok",
];

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![fmt_f64(self.t), self.step.to_string()];
        row.extend(
            [
                self.dt,
                self.f_min,
                self.f_max,
                self.kappa_min,
                self.kappa_max,
                self.lower_min,
                self.upper_max,
                self.z_min,
                self.u,
                self.pinching,
                self.oracle_rel_err,
                self.ordering_violation,
                self.remesh_allowance,
            ]
            .iter()
            .map(|v| fmt_f64(*v)),
        );
        row.extend(
            [self.embedded, self.z_ok, self.u_ok, self.oracle_ok, self.pinching_ok].iter().map(|f| f.as_str().to_string()),
        );
        row
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    /// Worst monitored value over the run.
    pub worst: f64,
    /// Time at which the worst value occurred.
    pub at_t: f64,
}

impl Verdict {
    fn new(worst: f64) -> Self {
        Verdict { pass: true, worst, at_t: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdicts {
    pub embedded: Verdict,
    pub ordering: Verdict,
    pub z_nonnegative: Option<Verdict>,
    pub u_monotone: Option<Verdict>,
    pub oracle: Option<Verdict>,
    pub pinching: Option<Verdict>,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        self.embedded.pass
            && self.ordering.pass
            && [self.z_nonnegative, self.u_monotone, self.oracle, self.pinching].iter().flatten().all(|v| v.pass)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Horizon,
    CurvatureCap,
    Error,
}

#[derive(Clone, Debug)]
pub struct FlowRun {
    pub config: FlowConfig,
    pub regime: Regime,
    pub beta: f64,
    pub records: Vec<DiagnosticsRecord>,
    pub verdicts: Verdicts,
    /// Largest drop of `u` below its running maximum, per unit run time.
    pub u_drift: f64,
    pub steps: usize,
    pub stop: StopReason,
    pub error: Option<Error>,
    pub final_state: FlowState,
    pub snapshots: Vec<(usize, FlowState)>,
}

impl FlowRun {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.verdicts.all_pass()
    }

    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }
}

/// Regime from the modulator grid check and sampled structure of `f`.
pub fn classify(f: &SpeedFunction, m: &Modulator, seed: u64) -> Result<Regime> {
    let report = check_conditions(m, &Grid::default())?;
    let convex = check_convexity(f, REGIME_TRIALS, seed, DEFAULT_TOL).pass;
    let ic = check_inverse_concave(f, Criterion::General, REGIME_TRIALS, seed, DEFAULT_TOL).pass;
    Ok(classify_regime(&report, convex, ic))
}

/// Geometry of one state needed by the monitors.
struct Snapshot {
    field: BallCurvatureField,
    speed: Vec<f64>,
    radius_err: Option<f64>,
    pinching: f64,
    embedded: bool,
}

fn measure_curve(c: &DiscreteCurve, law: &CurveLaw, oracle_r: Option<f64>) -> Result<Snapshot> {
    let speed = law.values(c)?.iter().map(|q| q[0]).collect();
    Ok(Snapshot {
        field: curve_field_unchecked(c),
        speed,
        radius_err: oracle_r.map(|r| super::curve_flow::radius_error(c, r)),
        pinching: 1.0,
        embedded: c.check_embedded().is_ok(),
    })
}

fn measure_surface(s: &SupportSurface, law: &SurfaceLaw, oracle_r: Option<f64>) -> Result<Snapshot> {
    let rate = law.rate(s)?;
    let field = s.ball_field(&rate.nodes);
    let pinching = rate.nodes.iter().map(|g| g.radii[1] / g.radii[0]).fold(0.0, f64::max);
    Ok(Snapshot {
        field,
        speed: rate.speed,
        radius_err: oracle_r.map(|r| super::support_flow::radius_error(&rate.nodes, r)),
        pinching,
        embedded: true,
    })
}

struct Monitor {
    tracks_z: bool,
    tracks_u: bool,
    tol: f64,
    oracle_tol: f64,
    pinching_limit: Option<f64>,
    beta: f64,
    prev: Option<(f64, f64)>,
    u_max: f64,
    u_drop: f64,
    allowance: f64,
    verdicts: Verdicts,
}

impl Monitor {
    fn record(&mut self, t: f64, step: usize, dt: f64, s: &Snapshot) -> DiagnosticsRecord {
        let f = &s.field;
        let n = f.len();
        let min = |v: &mut dyn Iterator<Item = f64>| v.fold(f64::INFINITY, f64::min);
        let max = |v: &mut dyn Iterator<Item = f64>| v.fold(f64::NEG_INFINITY, f64::max);
        let z_min = min(&mut (0..n).map(|i| f.lower[i] + self.beta * s.speed[i]));
        let u = min(&mut (0..n).map(|i| f.lower[i] / s.speed[i]));
        let ordering = f.ordering_violation();

        let z_ok = z_min >= -self.tol * (1.0 + t);
        let allowance = self.allowance * u.abs().max(1.0);
        let u_ok = match self.prev {
            Some((t0, u0)) => u >= u0 - self.tol * (t - t0) - allowance,
            None => true,
        };
        self.allowance = 0.0;
        self.prev = Some((t, u));
        self.u_max = self.u_max.max(u);
        self.u_drop = self.u_drop.max(self.u_max - u);
        let oracle_ok = s.radius_err.is_none_or(|e| e <= self.oracle_tol);
        let pinching_ok = self.pinching_limit.is_none_or(|p| s.pinching <= p);
        let drop = self.u_max - u;

        let v = &mut self.verdicts;
        fold(&mut v.embedded, if s.embedded { 0.0 } else { 1.0 }, s.embedded, t, |a, b| a > b);
        fold(&mut v.ordering, ordering, ordering <= 0.0, t, |a, b| a > b);
        if let Some(z) = v.z_nonnegative.as_mut() {
            fold(z, z_min, z_ok, t, |a, b| a < b);
        }
        if let Some(w) = v.u_monotone.as_mut() {
            fold(w, drop, u_ok, t, |a, b| a > b);
        }
        if let (Some(o), Some(e)) = (v.oracle.as_mut(), s.radius_err) {
            fold(o, e, oracle_ok, t, |a, b| a > b);
        }
        if let Some(p) = v.pinching.as_mut() {
            fold(p, s.pinching, pinching_ok, t, |a, b| a > b);
        }

        DiagnosticsRecord {
            t,
            step,
            dt,
            f_min: min(&mut s.speed.iter().copied()),
            f_max: max(&mut s.speed.iter().copied()),
            kappa_min: min(&mut f.kappa_min.iter().copied()),
            kappa_max: max(&mut f.kappa_max.iter().copied()),
            lower_min: f.min_lower(),
            upper_max: f.max_upper(),
            z_min,
            u,
            pinching: s.pinching,
            oracle_rel_err: s.radius_err.unwrap_or(f64::NAN),
            ordering_violation: ordering,
            remesh_allowance: allowance,
            embedded: Flag::of(true, s.embedded),
            z_ok: Flag::of(self.tracks_z, z_ok),
            u_ok: Flag::of(self.tracks_u, u_ok),
            oracle_ok: Flag::of(s.radius_err.is_some(), oracle_ok),
            pinching_ok: Flag::of(self.pinching_limit.is_some(), pinching_ok),
        }
    }
}

fn fold(v: &mut Verdict, value: f64, ok: bool, t: f64, worse: impl Fn(f64, f64) -> bool) {
    if worse(value, v.worst) {
        v.worst = value;
        v.at_t = t;
    }
    v.pass &= ok;
}

enum Engine {
    Curve { law: CurveLaw, n: usize },
    Surface { stepper: SupportStepper },
}

fn initial_state(cfg: &FlowConfig, g: &Geometry) -> Result<FlowState> {
    Ok(match g {
        Geometry::Curve(c) => FlowState::Curve(c.discretize(cfg.n)?),
        Geometry::CurveFile { path } => FlowState::Curve(read_curve_csv(BufReader::new(File::open(path)?))?),
        Geometry::Surface { .. } => {
            FlowState::Surface(g.surface().expect("validated seed").discretize(cfg.n_lat, cfg.n_lon)?)
        }
        Geometry::SurfaceFile { path } => FlowState::Surface(read_surface_csv(BufReader::new(File::open(path)?))?),
    })
}

/// Integrates the configured flow. Configuration and initial-data problems
/// are returned as errors; failures after the first step are reported in
/// the run with the diagnostics gathered so far.
pub fn run_flow(cfg: &FlowConfig) -> Result<FlowRun> {
    cfg.validate()?;
    let g = cfg.geometry()?;
    let f = cfg.speed_function()?;
    let m = cfg.modulator()?;
    let regime = classify(&f, &m, cfg.seed)?;
    if let Some(expected) = cfg.regime {
        if expected != regime {
            return Err(Error::Precondition(format!("configured regime {expected:?} but the pair classifies as {regime:?}")));
        }
    }
    let mut state = initial_state(cfg, &g)?;
    let engine = match &state {
        FlowState::Curve(c) => {
            c.check_embedded()?;
            Engine::Curve { law: CurveLaw::new(&f, m)?, n: c.len() }
        }
        FlowState::Surface(s) => Engine::Surface { stepper: SupportStepper::new(SurfaceLaw::new(f, m)?, s) },
    };
    let oracle: Option<RadiusTrajectory> = match (cfg.oracle, g.round_radius()) {
        (true, Some(r0)) => {
            let c = f.eval(&vec![1.0; f.n])?;
            Some(sphere_oracle(c, &m, r0, cfg.t_max, ORACLE_DT)?)
        }
        _ => None,
    };
    let oracle_r = |t: f64| oracle.as_ref().and_then(|o| o.at(t).ok());
    let measure = |st: &FlowState, t: f64| -> Result<Snapshot> {
        match (st, &engine) {
            (FlowState::Curve(c), Engine::Curve { law, .. }) => measure_curve(c, law, oracle_r(t)),
            (FlowState::Surface(s), Engine::Surface { stepper }) => measure_surface(s, &stepper.law, oracle_r(t)),
            _ => unreachable!("state and engine kinds match"),
        }
    };

    let first = measure(&state, 0.0)?;
    let min_ratio = (0..first.field.len())
        .map(|i| first.field.lower[i] / first.speed[i])
        .fold(f64::INFINITY, f64::min);
    let beta = (-min_ratio).max(0.0) * (1.0 + 1e-6) + 1e-12;
    let mut mon = Monitor {
        tracks_z: regime.tracks_z(),
        tracks_u: regime.tracks_u(),
        tol: cfg.tol_flow,
        oracle_tol: cfg.oracle_tol,
        pinching_limit: cfg.pinching_factor.map(|p| p * first.pinching),
        beta,
        prev: None,
        u_max: f64::NEG_INFINITY,
        u_drop: 0.0,
        allowance: 0.0,
        verdicts: Verdicts {
            embedded: Verdict::new(0.0),
            ordering: Verdict::new(0.0),
            z_nonnegative: regime.tracks_z().then(|| Verdict::new(f64::INFINITY)),
            u_monotone: regime.tracks_u().then(|| Verdict::new(0.0)),
            oracle: oracle.as_ref().map(|_| Verdict::new(0.0)),
            pinching: cfg.pinching_factor.map(|_| Verdict::new(first.pinching)),
        },
    };
    let mut records = vec![mon.record(0.0, 0, 0.0, &first)];
    let mut snapshots = Vec::new();
    if cfg.snapshot_every > 0 {
        snapshots.push((0, state.clone()));
    }

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut next_k = 1usize;
    let mut stop = StopReason::Horizon;
    let mut error = None;
    let choose = |bound: f64, remaining: f64| -> Result<(f64, bool)> {
        let dt = match cfg.dt {
            Some(d) if d > bound => return Err(Error::Stability { dt: d, bound }),
            Some(d) => d,
            None => (cfg.c_cfl * bound).min(cfg.dt_max),
        };
        if dt < MIN_DT && remaining > MIN_DT {
            return Err(Error::Degenerate(format!("time step {dt:e} underflow")));
        }
        Ok(if dt >= remaining { (remaining, true) } else { (dt, false) })
    };

    while t < cfg.t_max {
        let target = (next_k as f64 * cfg.record_dt).min(cfg.t_max);
        let stepped: Result<(FlowState, f64, bool, f64)> = (|| match (&state, &engine) {
            (FlowState::Curve(c), Engine::Curve { law, n }) => {
                let (dt, hit) = choose(law.stability_bound(c)?, target - t)?;
                let mut next = advance(c, law, dt, cfg.integrator)?;
                let mut kmax = next.curvatures().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if (steps + 1) % cfg.remesh_interval == 0 {
                    let r = remesh(&next, *n)?;
                    mon.allowance += remesh_error(&next, &r);
                    r.check_embedded()?;
                    next = r;
                    kmax = next.curvatures().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                }
                Ok((FlowState::Curve(next), dt, hit, kmax))
            }
            (FlowState::Surface(s), Engine::Surface { stepper }) => {
                let rate = stepper.law.rate(s)?;
                let (dt, hit) = choose(stepper.stability_bound(&rate), target - t)?;
                let kmax = rate.nodes.iter().map(|g| 1.0 / g.radii[0]).fold(f64::NEG_INFINITY, f64::max);
                Ok((FlowState::Surface(stepper.advance(s, &rate, dt, cfg.integrator)?), dt, hit, kmax))
            }
            _ => unreachable!("state and engine kinds match"),
        })();
        let (next, dt, hit, kmax) = match stepped {
            Ok(v) => v,
            Err(e) => {
                stop = StopReason::Error;
                error = Some(e);
                break;
            }
        };
        state = next;
        steps += 1;
        t = if hit { target } else { t + dt };
        let capped = cfg.kappa_cap.is_some_and(|cap| kmax > cap);
        if hit || capped {
            match measure(&state, t) {
                Ok(s) => records.push(mon.record(t, steps, dt, &s)),
                Err(e) => {
                    stop = StopReason::Error;
                    error = Some(e);
                    break;
                }
            }
            if cfg.snapshot_every > 0 && (records.len() - 1) % cfg.snapshot_every == 0 {
                snapshots.push((steps, state.clone()));
            }
            if hit {
                next_k += 1;
            }
        }
        if capped {
            stop = StopReason::CurvatureCap;
            break;
        }
    }
    let span = records.last().map_or(0.0, |r| r.t);
    let u_drift = if span > 0.0 { mon.u_drop / span } else { 0.0 };
    if let Some(v) = mon.verdicts.u_monotone.as_mut() {
        v.worst = u_drift;
    }
    Ok(FlowRun {
        config: cfg.clone(),
        regime,
        beta,
        records,
        verdicts: mon.verdicts,
        u_drift,
        steps,
        stop,
        error,
        final_state: state,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> FlowConfig {
        FlowConfig::parse_str(text).unwrap()
    }

    #[test]
    fn circle_ratio_is_constant() {
        for psi in ["identity", "sqrt_shift", "neg_power:alpha=1"] {
            let c = cfg(&format!("geometry = circle:r=1\npsi = {psi}\nt_max = 0.05\nn = 128\noracle = true"));
            let run = run_flow(&c).unwrap();
            assert!(run.passed(), "{psi}: {:?}", run.verdicts);
            for r in &run.records {
                assert!((r.u - 1.0).abs() < 1e-6, "{psi}: {}", r.u);
            }
        }
    }

    #[test]
    fn forced_unstable_step_fails_with_partial_diagnostics() {
        let c = cfg("geometry = ellipse:a=2,b=1\npsi = neg_power:alpha=1\nt_max = 0.1\nn = 128\ndt = 0.05");
        let run = run_flow(&c).unwrap();
        assert!(matches!(run.error, Some(Error::Stability { .. })));
        assert_eq!(run.records.len(), 1);
        assert!(!run.passed());
    }

    #[test]
    fn regime_mismatch_is_a_precondition_error() {
        let c = cfg("geometry = circle\npsi = neg_power:alpha=1\nregime = convex");
        assert!(matches!(run_flow(&c), Err(Error::Precondition(_))));
    }

    #[test]
    fn curvature_cap_stops_gracefully() {
        let c = cfg("geometry = circle:r=1\npsi = identity\nt_max = 1\nn = 64\nkappa_cap = 2\nrecord_dt = 0.1");
        let run = run_flow(&c).unwrap();
        assert_eq!(run.stop, StopReason::CurvatureCap);
        assert!(run.error.is_none());
        let last = run.records.last().unwrap();
        assert!(last.kappa_max > 2.0 && last.t < 0.5);
    }
}
