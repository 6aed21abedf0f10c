//! Radius of a round sphere (or circle) moving under the flow, from a
//! fourth-order Runge-Kutta integration of the scalar ODE.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::psi::Modulator;

pub const ORACLE_DT: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusTrajectory {
    pub dt: f64,
    pub radii: Vec<f64>,
    pub rates: Vec<f64>,
    /// First time the curvature argument left `(0, inf)`, if before the horizon.
    pub halted_at: Option<f64>,
}

fn rate(m: &Modulator, c: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain { what: "sphere radius", value: r });
    }
    Ok(-m.psi(c / r)?)
}

/// Integrates `r' = -psi(c / r)` from `r0` to `t_end` where `c` is the speed
/// function at the all-ones tuple.
pub fn sphere_oracle(c: f64, m: &Modulator, r0: f64, t_end: f64, dt: f64) -> Result<RadiusTrajectory> {
    if !(r0 > 0.0) {
        return Err(Error::Domain { what: "initial radius", value: r0 });
    }
    let steps = (t_end / dt).ceil() as usize;
    let mut radii = vec![r0];
    let mut rates = vec![rate(m, c, r0)?];
    let mut r = r0;
    for k in 0..steps {
        let stage = || -> Result<f64> {
            let k1 = rate(m, c, r)?;
            let k2 = rate(m, c, r + 0.5 * dt * k1)?;
            let k3 = rate(m, c, r + 0.5 * dt * k2)?;
            let k4 = rate(m, c, r + dt * k3)?;
            Ok(r + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        };
        match stage().and_then(|next| rate(m, c, next).map(|v| (next, v))) {
            Ok((next, v)) => {
                r = next;
                radii.push(r);
                rates.push(v);
            }
            Err(_) => {
                return Ok(RadiusTrajectory { dt, radii, rates, halted_at: Some(k as f64 * dt) });
            }
        }
    }
    Ok(RadiusTrajectory { dt, radii, rates, halted_at: None })
}

impl RadiusTrajectory {
    pub fn horizon(&self) -> f64 {
        (self.radii.len() - 1) as f64 * self.dt
    }

    /// Cubic Hermite interpolation between stored steps.
    pub fn at(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t > self.horizon() + 1e-12 {
            return Err(Error::Domain { what: "oracle time", value: t });
        }
        let x = t / self.dt;
        let k = (x.floor() as usize).min(self.radii.len() - 2);
        let u = x - k as f64;
        let (p0, p1) = (self.radii[k], self.radii[k + 1]);
        let (m0, m1) = (self.rates[k] * self.dt, self.rates[k + 1] * self.dt);
        let u2 = u * u;
        let u3 = u2 * u;
        Ok((2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * m1)
    }
}
