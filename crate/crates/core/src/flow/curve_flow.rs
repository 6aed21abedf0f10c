//! Explicit time stepping of closed curves moving with normal speed
//! `-psi(c kappa)` along the outward normal.

use serde::{Deserialize, Serialize};

use crate::curve::{DiscreteCurve, P2};
use crate::error::{Error, Result};
use crate::psi::Modulator;
use crate::speed::SpeedFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Euler,
    Rk2,
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk2" => Ok(Integrator::Rk2),
            other => Err(Error::Parse(format!("unknown integrator {other:?} (euler|rk2)"))),
        }
    }
}

/// One-dimensional reduction of a speed function: `F = c kappa`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveLaw {
    pub c: f64,
    pub modulator: Modulator,
}

impl CurveLaw {
    pub fn new(f: &SpeedFunction, modulator: Modulator) -> Result<Self> {
        if f.n != 1 {
            return Err(Error::Dimension { expected: 1, got: f.n });
        }
        Ok(CurveLaw { c: f.eval(&[1.0])?, modulator })
    }

    /// `(F, psi(F), psi'(F), psi''(F))` per vertex; errors where `F <= 0`.
    pub fn values(&self, curve: &DiscreteCurve) -> Result<Vec<[f64; 4]>> {
        curve
            .curvatures()
            .iter()
            .map(|&k| {
                let f = self.c * k;
                if !(f > 0.0) {
                    return Err(Error::ConeViolation { cone: "positive".into(), slack: f });
                }
                let (p, d, dd) = self.modulator.values(f);
                Ok([f, p, d, dd])
            })
            .collect()
    }

    pub fn velocity(&self, curve: &DiscreteCurve) -> Result<Vec<P2>> {
        let v = self.values(curve)?;
        Ok(curve.normals().iter().zip(&v).map(|(n, q)| -q[1] * n).collect())
    }

    /// Forward-Euler bound `ds_min^2 / (2 max psi' c)`.
    pub fn stability_bound(&self, curve: &DiscreteCurve) -> Result<f64> {
        let v = self.values(curve)?;
        let d = v.iter().map(|q| q[2] * self.c).fold(0.0, f64::max);
        let h = curve.min_edge();
        Ok(if d > 0.0 { h * h / (2.0 * d) } else { f64::INFINITY })
    }
}

fn displaced(curve: &DiscreteCurve, v: &[P2], dt: f64) -> Result<DiscreteCurve> {
    DiscreteCurve::new(curve.points().iter().zip(v).map(|(p, w)| p + dt * w).collect())
}

/// One step without the embeddedness scan.
pub(crate) fn advance(curve: &DiscreteCurve, law: &CurveLaw, dt: f64, scheme: Integrator) -> Result<DiscreteCurve> {
    let v = law.velocity(curve)?;
    match scheme {
        Integrator::Euler => displaced(curve, &v, dt),
        Integrator::Rk2 => {
            let mid = displaced(curve, &v, 0.5 * dt)?;
            let w = law.velocity(&mid)?;
            displaced(curve, &w, dt)
        }
    }
}

/// One explicit step; rejects steps above the stability bound and re-checks
/// embeddedness.
pub fn step_curve(curve: &DiscreteCurve, law: &CurveLaw, dt: f64, scheme: Integrator) -> Result<DiscreteCurve> {
    let bound = law.stability_bound(curve)?;
    if dt > bound {
        return Err(Error::Stability { dt, bound });
    }
    let next = advance(curve, law, dt, scheme)?;
    next.check_embedded()?;
    Ok(next)
}

/// Largest relative deviation of the vertex distances to the origin from `r`.
pub fn radius_error(curve: &DiscreteCurve, r: f64) -> f64 {
    curve.points().iter().map(|p| (p.norm() - r).abs() / r).fold(0.0, f64::max)
}
