//! Explicit time stepping of convex surfaces through their support
//! function: `d sigma / dt = -psi(f(kappa))`.

use crate::error::{Error, Result};
use crate::psi::Modulator;
use crate::speed::SpeedFunction;
use crate::surface::{NodeGeometry, PolarFilter, SupportSurface};

use super::curve_flow::Integrator;

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceLaw {
    pub f: SpeedFunction,
    pub modulator: Modulator,
}

/// Normal speed field and the data needed for the step bound.
#[derive(Clone, Debug)]
pub struct SupportRate {
    pub nodes: Vec<NodeGeometry>,
    pub speed: Vec<f64>,
    pub rate: Vec<f64>,
    /// Largest `psi' f'_i kappa_i^2` over nodes and directions.
    pub diffusion: f64,
}

impl SurfaceLaw {
    pub fn new(f: SpeedFunction, modulator: Modulator) -> Result<Self> {
        if f.n != 2 {
            return Err(Error::Dimension { expected: 2, got: f.n });
        }
        Ok(SurfaceLaw { f, modulator })
    }

    pub fn rate(&self, s: &SupportSurface) -> Result<SupportRate> {
        let nodes = s.check_convex()?;
        let mut speed = Vec::with_capacity(nodes.len());
        let mut rate = Vec::with_capacity(nodes.len());
        let mut diffusion = 0.0_f64;
        for g in &nodes {
            let k = g.curvatures();
            let (v, grad) = self.f.value_and_grad(&k)?;
            if !(v > 0.0) {
                return Err(Error::ConeViolation { cone: "positive speed".into(), slack: v });
            }
            let (p, d, _) = self.modulator.values(v);
            let coef = grad.iter().zip(&k).map(|(g, k)| d * g * k * k).fold(0.0, f64::max);
            diffusion = diffusion.max(coef);
            speed.push(v);
            rate.push(-p);
        }
        Ok(SupportRate { nodes, speed, rate, diffusion })
    }
}

/// Stepper owning the polar filter of one grid.
pub struct SupportStepper {
    pub law: SurfaceLaw,
    filter: PolarFilter,
}

impl SupportStepper {
    pub fn new(law: SurfaceLaw, s: &SupportSurface) -> Self {
        SupportStepper { law, filter: PolarFilter::new(s.grid()) }
    }

    pub fn stability_bound(&self, r: &SupportRate) -> f64 {
        if r.diffusion > 0.0 {
            2.0 / (r.diffusion * self.filter.stiffness())
        } else {
            f64::INFINITY
        }
    }

    fn displaced(&self, s: &SupportSurface, rate: &[f64], dt: f64) -> SupportSurface {
        let mut inc: Vec<f64> = rate.iter().map(|v| v * dt).collect();
        self.filter.apply(&mut inc);
        s.with_sigma(s.sigma().iter().zip(&inc).map(|(a, b)| a + b).collect())
    }

    /// One step from a precomputed rate; convexity is re-checked by the next
    /// rate evaluation.
    pub(crate) fn advance(&self, s: &SupportSurface, r: &SupportRate, dt: f64, scheme: Integrator) -> Result<SupportSurface> {
        match scheme {
            Integrator::Euler => Ok(self.displaced(s, &r.rate, dt)),
            Integrator::Rk2 => {
                let mid = self.displaced(s, &r.rate, 0.5 * dt);
                let rm = self.law.rate(&mid)?;
                Ok(self.displaced(s, &rm.rate, dt))
            }
        }
    }

    pub fn step(&self, s: &SupportSurface, dt: f64, scheme: Integrator) -> Result<SupportSurface> {
        let r = self.law.rate(s)?;
        let bound = self.stability_bound(&r);
        if dt > bound {
            return Err(Error::Stability { dt, bound });
        }
        let next = self.advance(s, &r, dt, scheme)?;
        next.check_convex()?;
        Ok(next)
    }
}

/// Single forward-Euler step of the support function.
pub fn step_support(s: &SupportSurface, f: &SpeedFunction, m: &Modulator, dt: f64) -> Result<SupportSurface> {
    SupportStepper::new(SurfaceLaw::new(f.clone(), m.clone())?, s).step(s, dt, Integrator::Euler)
}

/// Largest relative deviation of `|X|` from `r` over the nodes.
pub fn radius_error(nodes: &[NodeGeometry], r: f64) -> f64 {
    nodes.iter().map(|g| (g.position.norm() - r).abs() / r).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::AnalyticSurface;

    #[test]
    fn sphere_expands_exponentially() {
        let f = SpeedFunction::sigma_root(2, 2).unwrap();
        let m = Modulator::parse("neg_power:alpha=1").unwrap();
        let mut s = AnalyticSurface::Sphere { r: 1.0 }.discretize(16, 32).unwrap();
        let st = SupportStepper::new(SurfaceLaw::new(f, m).unwrap(), &s);
        let mut t = 0.0;
        while t < 0.2 - 1e-15 {
            let r = st.law.rate(&s).unwrap();
            let dt = (0.4 * st.stability_bound(&r)).min(0.2 - t);
            s = st.step(&s, dt, Integrator::Euler).unwrap();
            t += dt;
        }
        let nodes = s.check_convex().unwrap();
        assert!(radius_error(&nodes, 0.2f64.exp()) < 1e-3);
    }

    #[test]
    fn unstable_step_is_rejected() {
        let f = SpeedFunction::power_mean(1.0, 2).unwrap();
        let m = Modulator::parse("identity").unwrap();
        let s = AnalyticSurface::Sphere { r: 1.0 }.discretize(16, 32).unwrap();
        assert!(matches!(step_support(&s, &f, &m, 1.0), Err(Error::Stability { .. })));
        let s2 = step_support(&s, &f, &m, 1e-4).unwrap();
        assert!((s2.sigma()[0] - (1.0 - 1e-4)).abs() < 1e-12);
    }
}
