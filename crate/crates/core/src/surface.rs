//! Convex surfaces in R^3 stored by their support function on an offset
//! latitude-longitude grid of the unit sphere.
//!
//! Rows sit at `theta_i = (i + 1/2) pi / n_lat`, columns at
//! `phi_j = 2 pi j / n_lon`; no node lies on a pole. A stencil reaching past
//! a pole continues along the opposite meridian: row `-1`, column `j` is
//! row `0`, column `j + n_lon/2`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::Vector3;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::ball::{compute_field, BallCurvatureField};
use crate::error::{Error, Result};
use crate::names::ParsedName;

pub type P3 = Vector3<f64>;

/// Angular resolution factor of the polar filter.
pub const FILTER_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticSurface {
    Sphere { r: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
}

impl AnalyticSurface {
    pub fn parse(name: &str) -> Result<Self> {
        let p = ParsedName::parse(name)?;
        let s = match p.family.as_str() {
            "sphere" => {
                p.only(&["r"])?;
                AnalyticSurface::Sphere { r: p.f64_or("r", 1.0)? }
            }
            "ellipsoid" => {
                p.only(&["a", "b", "c"])?;
                AnalyticSurface::Ellipsoid { a: p.f64_or("a", 1.5)?, b: p.f64_or("b", 1.0)?, c: p.f64_or("c", 1.0)? }
            }
            other => return Err(Error::Parse(format!("unknown surface seed '{other}'"))),
        };
        let ok = match s {
            AnalyticSurface::Sphere { r } => r > 0.0,
            AnalyticSurface::Ellipsoid { a, b, c } => a > 0.0 && b > 0.0 && c > 0.0,
        };
        if !ok {
            return Err(Error::Parse(format!("non-positive axis in '{name}'")));
        }
        Ok(s)
    }

    pub fn name(&self) -> String {
        match *self {
            AnalyticSurface::Sphere { r } => format!("sphere:r={r}"),
            AnalyticSurface::Ellipsoid { a, b, c } => format!("ellipsoid:a={a},b={b},c={c}"),
        }
    }

    pub fn support(&self, z: &P3) -> f64 {
        match *self {
            AnalyticSurface::Sphere { r } => r,
            AnalyticSurface::Ellipsoid { a, b, c } => {
                ((a * z.x).powi(2) + (b * z.y).powi(2) + (c * z.z).powi(2)).sqrt()
            }
        }
    }

    pub fn discretize(&self, n_lat: usize, n_lon: usize) -> Result<SupportSurface> {
        let g = SphereGrid::new(n_lat, n_lon)?;
        let sigma = (0..n_lat * n_lon).map(|k| self.support(&g.unit(k / n_lon, k % n_lon))).collect();
        SupportSurface::new(g, sigma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphereGrid {
    pub n_lat: usize,
    pub n_lon: usize,
}

impl SphereGrid {
    pub fn new(n_lat: usize, n_lon: usize) -> Result<Self> {
        if n_lat < 4 || n_lon < 8 || n_lon % 2 != 0 {
            return Err(Error::Precondition(format!(
                "grid {n_lat}x{n_lon}: need n_lat >= 4 and even n_lon >= 8"
            )));
        }
        Ok(SphereGrid { n_lat, n_lon })
    }

    pub fn len(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h_theta(&self) -> f64 {
        PI / self.n_lat as f64
    }

    pub fn h_phi(&self) -> f64 {
        TAU / self.n_lon as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h_theta()
    }

    pub fn phi(&self, j: usize) -> f64 {
        j as f64 * self.h_phi()
    }

    pub fn unit(&self, i: usize, j: usize) -> P3 {
        let (st, ct) = self.theta(i).sin_cos();
        let (sp, cp) = self.phi(j).sin_cos();
        P3::new(st * cp, st * sp, ct)
    }

    /// Flat index of `(i, j)` where `i` may be `-1` or `n_lat` and `j` any
    /// integer.
    fn at(&self, i: isize, j: isize) -> usize {
        let n = self.n_lon as isize;
        let (i, j) = if i < 0 {
            (0, j + n / 2)
        } else if i >= self.n_lat as isize {
            (self.n_lat as isize - 1, j + n / 2)
        } else {
            (i, j)
        };
        i as usize * self.n_lon + j.rem_euclid(n) as usize
    }

    /// Angular mesh width used by the boundary-attained threshold.
    pub fn spacing(&self) -> f64 {
        self.h_theta().max(self.h_phi())
    }
}

/// Geometry at one node derived from the support function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeGeometry {
    pub position: P3,
    pub normal: P3,
    /// Principal radii, ascending.
    pub radii: [f64; 2],
}

impl NodeGeometry {
    /// Principal curvatures, ascending.
    pub fn curvatures(&self) -> [f64; 2] {
        [1.0 / self.radii[1], 1.0 / self.radii[0]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportSurface {
    grid: SphereGrid,
    sigma: Vec<f64>,
}

impl SupportSurface {
    pub fn new(grid: SphereGrid, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: sigma.len() });
        }
        Ok(SupportSurface { grid, sigma })
    }

    pub fn grid(&self) -> SphereGrid {
        self.grid
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Node geometry from centered differences.
    pub fn node(&self, i: usize, j: usize) -> NodeGeometry {
        let g = &self.grid;
        let s = |di: isize, dj: isize| self.sigma[g.at(i as isize + di, j as isize + dj)];
        let (ht, hp) = (g.h_theta(), g.h_phi());
        let c = s(0, 0);
        let st = (s(1, 0) - s(-1, 0)) / (2.0 * ht);
        let stt = (s(1, 0) - 2.0 * c + s(-1, 0)) / (ht * ht);
        let sp = (s(0, 1) - s(0, -1)) / (2.0 * hp);
        let spp = (s(0, 1) - 2.0 * c + s(0, -1)) / (hp * hp);
        let stp = (s(1, 1) - s(1, -1) - s(-1, 1) + s(-1, -1)) / (4.0 * ht * hp);
        let (sin_t, cos_t) = g.theta(i).sin_cos();
        let cot = cos_t / sin_t;
        let r11 = stt + c;
        let r12 = (stp - cot * sp) / sin_t;
        let r22 = spp / (sin_t * sin_t) + cot * st + c;
        let mean = 0.5 * (r11 + r22);
        let rad = (0.25 * (r11 - r22).powi(2) + r12 * r12).sqrt();
        let (sin_p, cos_p) = g.phi(j).sin_cos();
        let z = P3::new(sin_t * cos_p, sin_t * sin_p, cos_t);
        let e_t = P3::new(cos_t * cos_p, cos_t * sin_p, -sin_t);
        let e_p = P3::new(-sin_p, cos_p, 0.0);
        NodeGeometry {
            position: c * z + st * e_t + (sp / sin_t) * e_p,
            normal: z,
            radii: [mean - rad, mean + rad],
        }
    }

    pub fn nodes(&self) -> Vec<NodeGeometry> {
        let n_lon = self.grid.n_lon;
        (0..self.grid.len()).into_par_iter().map(|k| self.node(k / n_lon, k % n_lon)).collect()
    }

    /// Errors at the first node with a non-positive principal radius.
    pub fn check_convex(&self) -> Result<Vec<NodeGeometry>> {
        let nodes = self.nodes();
        let n_lon = self.grid.n_lon;
        if let Some((k, g)) = nodes.iter().enumerate().find(|(_, g)| !(g.radii[0] > 0.0)) {
            return Err(Error::ConvexityLoss(k / n_lon, k % n_lon, g.radii[0]));
        }
        Ok(nodes)
    }

    /// Ball curvature extrema over all node pairs. Partners whose normals are
    /// within three grid spacings count as boundary-attained.
    pub fn ball_field(&self, nodes: &[NodeGeometry]) -> BallCurvatureField {
        let pos: Vec<P3> = nodes.iter().map(|g| g.position).collect();
        let nu: Vec<P3> = nodes.iter().map(|g| g.normal).collect();
        let kmin: Vec<f64> = nodes.iter().map(|g| g.curvatures()[0]).collect();
        let kmax: Vec<f64> = nodes.iter().map(|g| g.curvatures()[1]).collect();
        let cos_lim = (3.0 * self.grid.spacing()).min(PI).cos();
        compute_field(&pos, &nu, &kmin, &kmax, |i, j| nu[i].dot(&nu[j]) >= cos_lim)
    }

    pub fn with_sigma(&self, sigma: Vec<f64>) -> SupportSurface {
        SupportSurface { grid: self.grid, sigma }
    }
}

/// Per-ring low-pass filter that removes longitudinal modes the rows near
/// the poles cannot resolve.
pub struct PolarFilter {
    grid: SphereGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    keep: Vec<usize>,
}

impl PolarFilter {
    pub fn new(grid: SphereGrid) -> Self {
        let mut planner = FftPlanner::new();
        let half = grid.n_lon / 2;
        let keep = (0..grid.n_lat)
            .map(|i| ((half as f64 * grid.theta(i).sin() / FILTER_SCALE).floor() as usize).min(half))
            .collect();
        PolarFilter {
            grid,
            forward: planner.plan_fft_forward(grid.n_lon),
            inverse: planner.plan_fft_inverse(grid.n_lon),
            keep,
        }
    }

    /// Highest retained mode of ring `i`.
    pub fn keep(&self, i: usize) -> usize {
        self.keep[i]
    }

    pub fn apply(&self, field: &mut [f64]) {
        let n = self.grid.n_lon;
        let half = n / 2;
        field.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let keep = self.keep[i];
            if keep >= half {
                return;
            }
            let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
            self.forward.process(&mut buf);
            for (m, c) in buf.iter_mut().enumerate() {
                if m.min(n - m) > keep {
                    *c = Complex::new(0.0, 0.0);
                }
            }
            self.inverse.process(&mut buf);
            for (v, c) in row.iter_mut().zip(&buf) {
                *v = c.re / n as f64;
            }
        });
    }

    /// Largest eigenvalue magnitude of the filtered discrete Laplacian part.
    pub fn stiffness(&self) -> f64 {
        let ht = self.grid.h_theta();
        let hp = self.grid.h_phi();
        4.0 / (ht * ht) + (PI / (hp * FILTER_SCALE)).powi(2)
    }
}
