//! Independent oracles shared by the integration tests: finite differences,
//! brute-force maximization of the interior and boundary quadratics, and
//! dense resampling for ball curvatures.

#![allow(dead_code)]

use exflow::ball::ball_curvature;
use exflow::curve::{AnalyticCurve, DiscreteCurve, P2};
use exflow::linalg::SymMatrix;
use exflow::psi::Modulator;
use exflow::speed::SpeedFunction;
use nalgebra::{DMatrix, Matrix2};

pub const FD_GRAD_STEP: f64 = 1e-6;

/// Every built-in speed family at dimension `n`.
pub fn speed_families(n: usize) -> Vec<SpeedFunction> {
    let mut v: Vec<SpeedFunction> = [-2.0, -1.0, 0.5, 1.0, 2.0, 3.0]
        .iter()
        .map(|&r| SpeedFunction::power_mean(r, n).unwrap())
        .collect();
    for k in 1..=n {
        v.push(SpeedFunction::sigma_root(k, n).unwrap());
    }
    for k in 2..=n {
        for l in 1..k {
            v.push(SpeedFunction::sigma_ratio_root(k, l, n).unwrap());
        }
    }
    v
}

pub fn inverse_concave_regime_modulators() -> Vec<Modulator> {
    [
        "identity",
        "neg_power:alpha=0.5",
        "neg_power:alpha=1",
        "neg_log_recip",
        "neg_log_ratio",
        "neg_arctan_recip",
        "shifted_exp",
    ]
    .iter()
    .map(|n| Modulator::parse(n).unwrap())
    .collect()
}

/// Speeds used by the lemma verifiers: inverse-concave families.
pub fn lemma_speeds(n: usize) -> Vec<SpeedFunction> {
    vec![
        SpeedFunction::power_mean(1.0, n).unwrap(),
        SpeedFunction::power_mean(-1.0, n).unwrap(),
        SpeedFunction::sigma_root(n, n).unwrap(),
    ]
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn fd_grad(f: &SpeedFunction, lam: &[f64]) -> Vec<f64> {
    let h = FD_GRAD_STEP * lam.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    (0..lam.len())
        .map(|i| {
            let mut p = lam.to_vec();
            let mut m = lam.to_vec();
            p[i] += h;
            m[i] -= h;
            (f.eval(&p).unwrap() - f.eval(&m).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Relative steps tried by the adaptive second-difference oracles.
const LADDER: [f64; 10] = [1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4, 5e-5, 2e-5, 1e-5];

/// Picks, among Richardson estimates on a ladder of steps, the middle of the
/// three consecutive estimates with the smallest spread. Steps whose stencil
/// leaves the domain give NaN and are passed over.
fn adaptive(estimate: impl Fn(f64) -> f64, scale: f64) -> f64 {
    let r: Vec<f64> = LADDER.iter().map(|&h| estimate(h * scale)).collect();
    let mut best = (f64::INFINITY, f64::NAN);
    for w in r.windows(3) {
        let d = (w[0] - w[1]).abs() + (w[1] - w[2]).abs();
        if d < best.0 {
            best = (d, w[1]);
        }
    }
    best.1
}

fn eval_or_nan(f: &SpeedFunction, lam: &[f64]) -> f64 {
    f.eval(lam).unwrap_or(f64::NAN)
}

/// Central second difference of entry `(i, j)` at step `h`.
fn second_difference(f: &SpeedFunction, lam: &[f64], i: usize, j: usize, h: f64) -> f64 {
    let at = |si: f64, sj: f64| {
        let mut p = lam.to_vec();
        p[i] += si * h;
        p[j] += sj * h;
        eval_or_nan(f, &p)
    };
    if i == j {
        let mut p = lam.to_vec();
        let mut m = lam.to_vec();
        p[i] += h;
        m[i] -= h;
        (eval_or_nan(f, &p) - 2.0 * eval_or_nan(f, lam) + eval_or_nan(f, &m)) / (h * h)
    } else {
        (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
    }
}

/// Hessian from second differences of the value alone, Richardson
/// extrapolated, with an adaptively chosen step.
pub fn fd_hess(f: &SpeedFunction, lam: &[f64]) -> Vec<Vec<f64>> {
    let n = lam.len();
    let top = lam.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = |h: f64| second_difference(f, lam, i, j, h);
                    adaptive(|h| (4.0 * d(0.5 * h) - d(h)) / 3.0, top)
                })
                .collect()
        })
        .collect()
}

/// `(F(A + sB) - F(A - sB)) / 2s`.
pub fn fd_directional(f: &SpeedFunction, a: &SymMatrix, b: &SymMatrix, s: f64) -> f64 {
    (f.matrix_eval(&a.add(&b.scale(s))).unwrap() - f.matrix_eval(&a.sub(&b.scale(s))).unwrap()) / (2.0 * s)
}

fn second_along(f: &SpeedFunction, a: &SymMatrix, b: &SymMatrix, s: f64) -> f64 {
    let at = |m: SymMatrix| f.matrix_eval(&m).unwrap_or(f64::NAN);
    (at(a.add(&b.scale(s))) - 2.0 * at(a.clone()) + at(a.sub(&b.scale(s)))) / (s * s)
}

/// Second derivative of `s -> F(A + sB)` at 0 for unit `B`, by the same
/// adaptive Richardson scheme; `scale` is the size of `A`.
pub fn fd_second(f: &SpeedFunction, a: &SymMatrix, b: &SymMatrix, scale: f64) -> f64 {
    adaptive(|s| (4.0 * second_along(f, a, b, 0.5 * s) - second_along(f, a, b, s)) / 3.0, scale)
}

// ------------------------------------------------------------ interior

/// `F'(A) : (-X + L X + X L^T - L Y L^T)` with `X = A - kI`, `Y = B - kI`.
pub fn interior_bracket(fdot: &Matrix2<f64>, x: &Matrix2<f64>, y: &Matrix2<f64>, l: &Matrix2<f64>) -> f64 {
    let g = -x + l * x + x * l.transpose() - l * y * l.transpose();
    fdot.component_mul(&g).sum()
}

pub struct BruteInterior {
    pub grid_max: f64,
    pub closed_form: f64,
    /// Largest possible shortfall of the grid maximum from the true one.
    pub resolution: f64,
}

fn to2(m: &SymMatrix) -> Matrix2<f64> {
    Matrix2::new(m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1))
}

/// Maximizes the interior bracket over a `points^4` grid of 2x2 matrices
/// with entries in `[-L, L]`, `L = |X| |Y^{-1}|` (spectral norms), which
/// bounds every entry of the maximizer.
pub fn brute_interior(f: &SpeedFunction, a: &SymMatrix, b: &SymMatrix, k: f64, points: usize) -> BruteInterior {
    assert_eq!(a.dim(), 2);
    let fdot = to2(&f.matrix_grad(a).unwrap());
    let x = to2(&a.shift(-k));
    let y = to2(&b.shift(-k));
    let yinv = y.try_inverse().unwrap();
    let norm = |m: &Matrix2<f64>| m.singular_values().max();
    let big = norm(&x) * norm(&yinv);
    let h = 2.0 * big / (points - 1) as f64;
    let coord = |i: usize| -big + h * i as f64;
    let mut best = f64::NEG_INFINITY;
    for i0 in 0..points {
        for i1 in 0..points {
            for i2 in 0..points {
                for i3 in 0..points {
                    let l = Matrix2::new(coord(i0), coord(i1), coord(i2), coord(i3));
                    best = best.max(interior_bracket(&fdot, &x, &y, &l));
                }
            }
        }
    }
    let closed = interior_bracket(&fdot, &x, &y, &(x * yinv));
    let lmax = |m: &Matrix2<f64>| m.symmetric_eigen().eigenvalues.max();
    BruteInterior { grid_max: best, closed_form: closed, resolution: lmax(&fdot) * lmax(&y) * h * h }
}

// ------------------------------------------------------------ boundary

/// `2 sum_i f'_i sum_{p>=2} (2 L_ip B_ip - L_ip^2 (lam_p - lam_1))`; the
/// multipliers in column 0 are ignored.
pub fn boundary_objective(fdot: &[f64], lam: &[f64], b: &SymMatrix, l: &DMatrix<f64>) -> f64 {
    let n = lam.len();
    let mut s = 0.0;
    for i in 0..n {
        for p in 1..n {
            s += fdot[i] * (2.0 * l[(i, p)] * b.get(i, p) - l[(i, p)] * l[(i, p)] * (lam[p] - lam[0]));
        }
    }
    2.0 * s
}

pub fn boundary_optimal_multiplier(lam: &[f64], b: &SymMatrix) -> DMatrix<f64> {
    let n = lam.len();
    DMatrix::from_fn(n, n, |i, p| if p == 0 { 0.0 } else { b.get(i, p) / (lam[p] - lam[0]) })
}

/// Term-by-term evaluation of the boundary quadratic form with the
/// multiplier term taken at `l`.
pub fn boundary_q(f: &SpeedFunction, m: &Modulator, lam: &[f64], b: &SymMatrix, l: &DMatrix<f64>) -> f64 {
    let n = lam.len();
    let fd = f.grad(lam).unwrap();
    let fdd = f.hess(lam).unwrap();
    let v = f.eval(lam).unwrap();
    let (_, dpsi, ddpsi) = m.values(v);
    let mut q = 0.0;
    for p in 0..n {
        for r in 0..n {
            q += fdd.get(p, r) * b.get(p, p) * b.get(r, r);
            if p != r {
                q += (fd[p] - fd[r]) / (lam[p] - lam[r]) * b.get(p, r).powi(2);
            }
        }
    }
    let trace: f64 = (0..n).map(|p| fd[p] * b.get(p, p)).sum();
    q + ddpsi / dpsi * trace * trace + boundary_objective(&fd, lam, b, l)
}

// ------------------------------------------------------------ geometry

/// `min_y k(x_i, y)` over a dense arclength resampling, merged with the
/// vertex curvature.
pub fn dense_lower(curve: &DiscreteCurve, seed: &AnalyticCurve, i: usize, factor: usize) -> f64 {
    let dense = seed.sample_arclength(factor * curve.len());
    let x = curve.point(i);
    let nu = curve.normal(i);
    dense
        .iter()
        .filter(|y: &&P2| (x - **y).norm() > 1e-9)
        .map(|y| ball_curvature(&x, &nu, y).unwrap())
        .fold(f64::INFINITY, f64::min)
        .min(curve.kappa(i))
}
