//! Pointwise checks of the evolution equations of the speed and of the
//! ball curvature along a discrete curve flow, using a three-state history
//! of material vertices.

use serde::Serialize;

use crate::curve::DiscreteCurve;
use crate::error::{Error, Result};

use super::curve_flow::CurveLaw;

/// States at `t - dt`, `t`, `t + dt` built from the velocity at `t`.
pub fn symmetric_history(curve: &DiscreteCurve, law: &CurveLaw, dt: f64) -> Result<Vec<DiscreteCurve>> {
    let v = law.velocity(curve)?;
    let moved = |sign: f64| DiscreteCurve::new(curve.points().iter().zip(&v).map(|(p, w)| p + sign * dt * w).collect());
    Ok(vec![moved(-1.0)?, curve.clone(), moved(1.0)?])
}

fn check_history(hist: &[DiscreteCurve]) -> Result<()> {
    if hist.len() < 3 {
        return Err(Error::InsufficientHistory { need: 3, got: hist.len() });
    }
    let n = hist[1].len();
    if hist.iter().any(|c| c.len() != n) {
        return Err(Error::Precondition("history states differ in vertex count".into()));
    }
    Ok(())
}

/// `dF/dt - (c psi' F_ss + c psi'' F_s^2 + c kappa^2 psi)` per vertex, with
/// the time derivative centered on the middle state of the last three.
pub fn residual_evo_f(hist: &[DiscreteCurve], dt: f64, law: &CurveLaw) -> Result<Vec<f64>> {
    check_history(hist)?;
    let h = &hist[hist.len() - 3..];
    let mid = &h[1];
    let q = law.values(mid)?;
    let f: Vec<f64> = q.iter().map(|v| v[0]).collect();
    let (fs, fss) = mid.arclength_derivatives(&f);
    let c = law.c;
    Ok((0..mid.len())
        .map(|i| {
            let lhs = c * (h[2].kappa(i) - h[0].kappa(i)) / (2.0 * dt);
            let k = mid.kappa(i);
            let rhs = c * q[i][2] * fss[i] + c * q[i][3] * fs[i] * fs[i] + c * k * k * q[i][1];
            lhs - rhs
        })
        .collect())
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairResidual {
    pub lhs: f64,
    /// Right-hand side keeping the `<nu_x - k d w, nu_y>` factor.
    pub rhs_full: f64,
    /// Right-hand side with that factor set to one.
    pub rhs_simplified: f64,
    pub factor: f64,
}

impl PairResidual {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs_full).abs()
    }

    pub fn relative(&self) -> f64 {
        self.residual() / self.lhs.abs().max(self.rhs_full.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Time derivative of `k(x_i, x_j)` against its closed form.
pub fn residual_evo_k(hist: &[DiscreteCurve], dt: f64, i: usize, j: usize, law: &CurveLaw) -> Result<PairResidual> {
    check_history(hist)?;
    let h = &hist[hist.len() - 3..];
    let mid = &h[1];
    if i == j || i >= mid.len() || j >= mid.len() {
        return Err(Error::Precondition(format!("invalid vertex pair ({i}, {j})")));
    }
    let k_of = |c: &DiscreteCurve| {
        let v = c.point(i) - c.point(j);
        2.0 * v.dot(&c.normal(i)) / v.norm_squared()
    };
    let lhs = (k_of(&h[2]) - k_of(&h[0])) / (2.0 * dt);
    let q = law.values(mid)?;
    let f: Vec<f64> = q.iter().map(|v| v[0]).collect();
    let (fs, _) = mid.arclength_derivatives(&f);
    let v = mid.point(i) - mid.point(j);
    let d = v.norm();
    let w = v / d;
    let k = k_of(mid);
    let nu_x = mid.normal(i);
    let factor = (nu_x - k * d * w).dot(&mid.normal(j));
    let (psi_x, dpsi_x) = (q[i][1], q[i][2]);
    let psi_y = q[j][1];
    let grad = dpsi_x * fs[i] * w.dot(&mid.tangent(i));
    let common = psi_x * k * k - 2.0 / (d * d) * psi_x + 2.0 / d * grad;
    Ok(PairResidual {
        lhs,
        rhs_full: common + 2.0 / (d * d) * psi_y * factor,
        rhs_simplified: common + 2.0 / (d * d) * psi_y,
        factor,
    })
}
