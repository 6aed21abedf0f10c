//! Modulating functions of the speed and their structural sign conditions.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::names::ParsedName;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Modulator {
    Identity,
    /// `sqrt(s^2 + 1)`
    SqrtShift,
    /// `log(1 + e^s)`
    Softplus,
    /// `log(e^s + e^-s)`
    LogcoshShift,
    /// `-s^(-alpha)`
    NegPower { alpha: f64 },
    /// `-log(1 + 1/s)`
    NegLogRecip,
    /// `-log(1 + s)/s`
    NegLogRatio,
    /// `-arctan(1/s)`
    NegArctanRecip,
    /// `s - e^-s`
    ShiftedExp,
}

pub const ALL_NAMES: [&str; 9] = [
    "identity",
    "sqrt_shift",
    "softplus",
    "logcosh_shift",
    "neg_power:alpha=0.5",
    "neg_log_recip",
    "neg_log_ratio",
    "neg_arctan_recip",
    "shifted_exp",
];

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Below this argument `-log(1+s)/s` is summed as a power series.
const SERIES_CUTOFF: f64 = 0.1;
const SERIES_TERMS: i32 = 30;

impl Modulator {
    pub fn parse(name: &str) -> Result<Self> {
        let p = ParsedName::parse(name)?;
        let plain = |m: Modulator| -> Result<Modulator> {
            p.only(&[])?;
            Ok(m)
        };
        match p.family.as_str() {
            "identity" => plain(Modulator::Identity),
            "sqrt_shift" => plain(Modulator::SqrtShift),
            "softplus" => plain(Modulator::Softplus),
            "logcosh_shift" => plain(Modulator::LogcoshShift),
            "neg_power" => {
                p.only(&["alpha"])?;
                let alpha = p.f64("alpha")?;
                if alpha <= 0.0 {
                    return Err(Error::Parse(format!("neg_power requires alpha > 0, got {alpha}")));
                }
                Ok(Modulator::NegPower { alpha })
            }
            "neg_log_recip" => plain(Modulator::NegLogRecip),
            "neg_log_ratio" => plain(Modulator::NegLogRatio),
            "neg_arctan_recip" => plain(Modulator::NegArctanRecip),
            "shifted_exp" => plain(Modulator::ShiftedExp),
            other => Err(Error::Parse(format!("unknown modulator {other:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Modulator::Identity => "identity".into(),
            Modulator::SqrtShift => "sqrt_shift".into(),
            Modulator::Softplus => "softplus".into(),
            Modulator::LogcoshShift => "logcosh_shift".into(),
            Modulator::NegPower { alpha } => format!("neg_power:alpha={alpha}"),
            Modulator::NegLogRecip => "neg_log_recip".into(),
            Modulator::NegLogRatio => "neg_log_ratio".into(),
            Modulator::NegArctanRecip => "neg_arctan_recip".into(),
            Modulator::ShiftedExp => "shifted_exp".into(),
        }
    }

    fn domain(s: f64) -> Result<()> {
        if s > 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain { what: "modulator argument", value: s })
        }
    }

    pub fn psi(&self, s: f64) -> Result<f64> {
        Self::domain(s)?;
        Ok(self.values(s).0)
    }

    pub fn dpsi(&self, s: f64) -> Result<f64> {
        Self::domain(s)?;
        Ok(self.values(s).1)
    }

    pub fn ddpsi(&self, s: f64) -> Result<f64> {
        Self::domain(s)?;
        Ok(self.values(s).2)
    }

    /// `(psi, psi', psi'')` at `s > 0`; the argument is not checked.
    pub fn values(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            Modulator::Identity => (s, 1.0, 0.0),
            Modulator::SqrtShift => {
                let q = s.hypot(1.0);
                (q, s / q, 1.0 / (q * q * q))
            }
            Modulator::Softplus => {
                let sg = sigmoid(s);
                let v = s.max(0.0) + (-s.abs()).exp().ln_1p();
                (v, sg, sg * (1.0 - sg))
            }
            Modulator::LogcoshShift => {
                let v = s.abs() + (-2.0 * s.abs()).exp().ln_1p();
                let th = s.tanh();
                (v, th, 1.0 - th * th)
            }
            Modulator::NegPower { alpha } => {
                let p = s.powf(-alpha);
                (-p, alpha * p / s, -alpha * (alpha + 1.0) * p / (s * s))
            }
            Modulator::NegLogRecip => {
                let v = -(1.0 / s).ln_1p();
                (v, 1.0 / (s * (s + 1.0)), -1.0 / (s * s) + 1.0 / ((s + 1.0) * (s + 1.0)))
            }
            Modulator::NegLogRatio => {
                if s < SERIES_CUTOFF {
                    let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
                    for m in (0..SERIES_TERMS).rev() {
                        let c = if m % 2 == 0 { -1.0 } else { 1.0 } / (m as f64 + 1.0);
                        let mf = m as f64;
                        v += c * s.powi(m);
                        if m >= 1 {
                            d += c * mf * s.powi(m - 1);
                        }
                        if m >= 2 {
                            dd += c * mf * (mf - 1.0) * s.powi(m - 2);
                        }
                    }
                    (v, d, dd)
                } else {
                    let g = s.ln_1p();
                    let v = -g / s;
                    let d = g / (s * s) - 1.0 / (s * (1.0 + s));
                    let dd = -2.0 * g / (s * s * s) + 2.0 / (s * s * (1.0 + s)) + 1.0 / (s * (1.0 + s) * (1.0 + s));
                    (v, d, dd)
                }
            }
            Modulator::NegArctanRecip => {
                let q = 1.0 + s * s;
                (-(1.0 / s).atan(), 1.0 / q, -2.0 * s / (q * q))
            }
            Modulator::ShiftedExp => {
                let e = (-s).exp();
                (s - e, 1.0 + e, -e)
            }
        }
    }
}

impl fmt::Display for Modulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Log-spaced sample points of `(0, inf)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { lo: 1e-3, hi: 1e3, points: 200 }
    }
}

impl Grid {
    pub fn samples(&self) -> Result<Vec<f64>> {
        if self.points == 0 || self.lo <= 0.0 || self.hi < self.lo || !self.hi.is_finite() {
            return Err(Error::Precondition(format!(
                "grid must be nonempty inside (0, inf), got [{}, {}] x {}",
                self.lo, self.hi, self.points
            )));
        }
        if self.points == 1 {
            return Ok(vec![self.lo]);
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let m = (self.points - 1) as f64;
        let mut out: Vec<f64> = (0..self.points).map(|i| (a + (b - a) * i as f64 / m).exp()).collect();
        out[0] = self.lo;
        out[self.points - 1] = self.hi;
        Ok(out)
    }
}

/// Equality tolerance on the sign tests, absolute for terms of unit size and
/// relative to the largest term otherwise.
pub const CONDITION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Flag {
    HoldsOnGrid,
    Violated { s: f64, value: f64 },
}

impl Flag {
    pub fn holds(&self) -> bool {
        matches!(self, Flag::HoldsOnGrid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub modulator: String,
    pub grid: Grid,
    /// `psi' > 0`
    pub i: Flag,
    /// `psi' s - psi <= 0`
    pub iia: Flag,
    /// `psi' s - psi >= 0`
    pub iib: Flag,
    /// `psi'' >= 0`
    pub iiia: Flag,
    /// `psi'' <= 0`
    pub iiib: Flag,
    /// `psi'' s + 2 psi' >= 0`
    pub iv: Flag,
    pub positive_on_grid: bool,
    pub sign_changing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Convex speed with the (iia), (iiia) modulator conditions.
    ConvexTheoremApplies,
    /// Inverse-concave speed with the (iib), (iiib), (iv) modulator conditions.
    InverseConcaveTheoremApplies,
    Both,
    Neither,
}

impl Regime {
    pub fn tracks_z(&self) -> bool {
        matches!(self, Regime::ConvexTheoremApplies | Regime::Both)
    }

    pub fn tracks_u(&self) -> bool {
        matches!(self, Regime::InverseConcaveTheoremApplies | Regime::Both)
    }
}

/// The six sign tests at one point, each as `(value, scale)` with the test
/// reading `value >= -tol * max(1, scale)`.
fn tests_at(m: &Modulator, s: f64) -> [(f64, f64); 6] {
    let (p, d, dd) = m.values(s);
    let a = d * s - p;
    let a_scale = (d * s).abs().max(p.abs());
    let iv = dd * s + 2.0 * d;
    let iv_scale = (dd * s).abs().max(2.0 * d.abs());
    [
        (d, 0.0),
        (-a, a_scale),
        (a, a_scale),
        (dd, 0.0),
        (-dd, 0.0),
        (iv, iv_scale),
    ]
}

/// Grid check of the modulator sign conditions. The reported witness of a
/// violated condition is the smallest violating grid point.
pub fn check_conditions(m: &Modulator, grid: &Grid) -> Result<ConditionReport> {
    let samples = grid.samples()?;
    let per_point: Vec<([(f64, f64); 6], f64)> = samples
        .par_iter()
        .map(|&s| (tests_at(m, s), m.values(s).0))
        .collect();
    let mut flags = [Flag::HoldsOnGrid; 6];
    for (s, (tests, _)) in samples.iter().zip(&per_point) {
        for (c, &(value, scale)) in tests.iter().enumerate() {
            // (i) is strict, the rest allow equality within tolerance
            let ok = if c == 0 { value > 0.0 } else { value >= -CONDITION_TOL * scale.max(1.0) };
            if !ok && flags[c].holds() {
                flags[c] = Flag::Violated { s: *s, value };
            }
        }
    }
    let positive_on_grid = per_point.iter().all(|(_, p)| *p > 0.0);
    let any_pos = per_point.iter().any(|(_, p)| *p > 0.0);
    let any_neg = per_point.iter().any(|(_, p)| *p < 0.0);
    Ok(ConditionReport {
        modulator: m.name(),
        grid: grid.clone(),
        i: flags[0],
        iia: flags[1],
        iib: flags[2],
        iiia: flags[3],
        iiib: flags[4],
        iv: flags[5],
        positive_on_grid,
        sign_changing: any_pos && any_neg,
    })
}

pub fn classify_regime(report: &ConditionReport, f_is_convex: bool, f_is_inverse_concave: bool) -> Regime {
    let convex = f_is_convex && report.i.holds() && report.iia.holds() && report.iiia.holds();
    let inv = f_is_inverse_concave
        && report.i.holds()
        && report.iib.holds()
        && report.iiib.holds()
        && report.iv.holds();
    match (convex, inv) {
        (true, true) => Regime::Both,
        (true, false) => Regime::ConvexTheoremApplies,
        (false, true) => Regime::InverseConcaveTheoremApplies,
        (false, false) => Regime::Neither,
    }
}
