//! Randomized verifiers for the structural hypotheses on the speed and the
//! matrix inequalities behind the noncollapsing estimates.
//!
//! Every sampler draws trial `i` from its own counter-based stream, so a
//! report depends only on `(seed, trials)` and not on thread scheduling.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{random_rotation, random_symmetric, SymMatrix};
use crate::psi::Modulator;
use crate::rng::{log_uniform, trial_rng, TrialRng};
use crate::speed::{Cone, SpeedFunction};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const SCALAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Eigen { lambda: Vec<f64> },
    Direction { a: SymMatrix, b: SymMatrix },
    Scalar { a: f64, b: f64 },
    Interior { a: SymMatrix, b: SymMatrix, k: f64 },
    Boundary { lambda: Vec<f64>, b: SymMatrix },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub check: String,
    pub trials: usize,
    /// Samples rejected because they fell outside the cone.
    pub skipped: usize,
    pub min_slack: f64,
    pub witness: Option<Witness>,
    pub tol: f64,
    pub pass: bool,
    pub details: BTreeMap<String, f64>,
}

impl InequalityReport {
    fn build(check: &str, trials: usize, tol: f64, out: Outcome) -> Self {
        let (min_slack, witness) = match out.best {
            Some(b) => (b.slack, Some(b.witness)),
            None => (f64::INFINITY, None),
        };
        InequalityReport {
            check: check.to_string(),
            trials,
            skipped: out.skipped,
            min_slack,
            witness,
            tol,
            pass: min_slack >= -tol,
            details: out.details,
        }
    }
}

/// Slack with NaN mapped to `-inf`, so broken samples are never hidden.
fn sane(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x
    }
}

struct Best {
    slack: f64,
    index: usize,
    witness: Witness,
}

#[derive(Default)]
struct Outcome {
    skipped: usize,
    best: Option<Best>,
    /// Per-component minima, merged by `min`.
    details: BTreeMap<String, f64>,
}

/// One trial's result: slack plus named auxiliary minima, or `None` if skipped.
type Trial = Option<(f64, Witness, Vec<(&'static str, f64)>)>;

fn merge(mut a: Outcome, b: Outcome) -> Outcome {
    a.skipped += b.skipped;
    a.best = match (a.best, b.best) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if (y.slack, y.index) < (x.slack, x.index) {
                Some(y)
            } else {
                Some(x)
            }
        }
    };
    for (k, v) in b.details {
        let e = a.details.entry(k).or_insert(f64::INFINITY);
        *e = e.min(v);
    }
    a
}

fn run_trials<F>(trials: usize, seed: u64, trial: F) -> Outcome
where
    F: Fn(&mut TrialRng) -> Trial + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut out = Outcome::default();
            match trial(&mut rng) {
                None => out.skipped = 1,
                Some((slack, witness, extra)) => {
                    out.best = Some(Best { slack: sane(slack), index: i, witness });
                    for (k, v) in extra {
                        out.details.insert(k.to_string(), sane(v));
                    }
                }
            }
            out
        })
        .reduce(Outcome::default, merge)
}

// ---------------------------------------------------------------- sampling

/// Components log-uniform in `[0.1, 10]`.
pub fn sample_positive<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| log_uniform(rng, 0.1, 10.0)).collect()
}

/// A point of `cone` by rejection: magnitudes log-uniform in `[0.1, 10]`,
/// each sign flipped with probability 1/4 outside the positive cone.
pub fn sample_in_cone<R: Rng>(rng: &mut R, cone: Cone, n: usize) -> Option<Vec<f64>> {
    match cone {
        Cone::Positive => Some(sample_positive(rng, n)),
        Cone::Gamma(_) => {
            let lam: Vec<f64> = (0..n)
                .map(|_| {
                    let v = log_uniform(rng, 0.1, 10.0);
                    if rng.random::<f64>() < 0.25 {
                        -v
                    } else {
                        v
                    }
                })
                .collect();
            cone.contains(&lam).inside.then_some(lam)
        }
    }
}

/// Positive sample whose components differ pairwise by at least `gap`
/// relative to the largest, redrawn until that holds.
pub fn sample_distinct<R: Rng>(rng: &mut R, n: usize, gap: f64) -> Vec<f64> {
    loop {
        let mut lam = sample_positive(rng, n);
        lam.sort_by(f64::total_cmp);
        let top = lam[n - 1];
        if lam.windows(2).all(|w| w[1] - w[0] > gap * top) {
            return lam;
        }
    }
}

/// `R diag(lam) R^T` with a random rotation `R`.
pub fn sample_spd<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    let lam = sample_positive(rng, n);
    let r = random_rotation(rng, n);
    SymMatrix::diag(&lam).conjugate(&r)
}

fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    let b = random_symmetric(rng, n);
    let norm = b.frobenius();
    b.scale(1.0 / norm)
}

// ------------------------------------------------------- speed structure

/// Sampled symmetry, homogeneity, positivity, monotonicity and Euler checks.
/// Slack is the smallest of `f`, the smallest partial derivative, and the
/// negated relative residuals of the identities.
pub fn check_admissible(f: &SpeedFunction, trials: usize, seed: u64, tol: f64) -> InequalityReport {
    let n = f.n;
    let out = run_trials(trials, seed, |rng| {
        let lam = sample_in_cone(rng, f.cone, n)?;
        let v = f.eval(&lam).ok()?;
        let g = f.grad(&lam).ok()?;
        let c = log_uniform(rng, 0.1, 10.0);
        let scaled: Vec<f64> = lam.iter().map(|x| c * x).collect();
        let homog = (f.eval(&scaled).ok()? - c * v).abs() / (c * v);
        let mut rev = lam.clone();
        rev.reverse();
        let sym = (f.eval(&rev).ok()? - v).abs() / v;
        let euler = (g.iter().zip(&lam).map(|(a, b)| a * b).sum::<f64>() - v).abs() / v;
        let min_grad = g.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = v.min(min_grad).min(-homog).min(-sym).min(-euler);
        Some((
            slack,
            Witness::Eigen { lambda: lam },
            vec![
                ("min_value", v),
                ("min_grad", min_grad),
                ("neg_homogeneity_residual", -homog),
                ("neg_symmetry_residual", -sym),
                ("neg_euler_residual", -euler),
            ],
        ))
    });
    InequalityReport::build("admissible", trials, tol, out)
}

/// `f_*(mu) * f(1/mu) = 1` on positive samples; slack is `-|product - 1|`.
pub fn check_dual(f: &SpeedFunction, trials: usize, seed: u64, tol: f64) -> InequalityReport {
    let out = run_trials(trials, seed, |rng| {
        let mu = sample_positive(rng, f.n);
        let inv: Vec<f64> = mu.iter().map(|m| 1.0 / m).collect();
        let prod = f.dual_eval(&mu).ok()? * f.eval(&inv).ok()?;
        Some((-(prod - 1.0).abs(), Witness::Eigen { lambda: mu }, vec![]))
    });
    InequalityReport::build("dual", trials, tol, out)
}

/// Convexity through `F''(A)[B,B] >= 0` on unit directions, together with
/// the tangent-plane bound `F(C) >= F'(A):C` for pairs inside the cone.
pub fn check_convexity(f: &SpeedFunction, trials: usize, seed: u64, tol: f64) -> InequalityReport {
    let n = f.n;
    let out = run_trials(trials, seed, |rng| {
        let lam = sample_in_cone(rng, f.cone, n)?;
        let mu = sample_in_cone(rng, f.cone, n)?;
        let a = SymMatrix::diag(&lam).conjugate(&random_rotation(rng, n));
        let c = SymMatrix::diag(&mu).conjugate(&random_rotation(rng, n));
        let b = unit_direction(rng, n);
        let second = f.matrix_second_form(&a, &b).ok()?;
        let tangent = f.matrix_eval(&c).ok()? - f.matrix_grad(&a).ok()?.contract(&c);
        let witness = if second <= tangent {
            Witness::Direction { a, b }
        } else {
            Witness::Direction { a, b: c }
        };
        Some((second.min(tangent), witness, vec![("min_second_form", second), ("min_tangent_gap", tangent)]))
    });
    InequalityReport::build("convexity", trials, tol, out)
}

/// Matrix and pairwise quantities of the local inverse-concavity criteria.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InverseConcavityTerms {
    /// Smallest eigenvalue of `f'' - (2/f) f' f'^T + 2 diag(f'/lambda)`.
    pub general_min_eig: f64,
    /// Smallest eigenvalue of `f'' + 2 diag(f'/lambda)`.
    pub homog_min_eig: f64,
    /// `min_{i != j} (f'_i - f'_j)/(l_i - l_j) + f'_i/l_j + f'_j/l_i`.
    pub min_pairwise: f64,
}

pub fn inverse_concavity_terms(f: &SpeedFunction, lam: &[f64]) -> Result<InverseConcavityTerms> {
    if let Some(v) = lam.iter().find(|v| **v <= 0.0) {
        return Err(Error::ConeViolation { cone: Cone::Positive.to_string(), slack: *v });
    }
    let n = lam.len();
    let v = f.eval(lam)?;
    let g = f.grad(lam)?;
    let h = f.hess(lam)?;
    let hom = DMatrix::from_fn(n, n, |i, j| h.get(i, j) + if i == j { 2.0 * g[i] / lam[i] } else { 0.0 });
    let gen = DMatrix::from_fn(n, n, |i, j| hom[(i, j)] - 2.0 / v * g[i] * g[j]);
    let mut min_pairwise = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = lam[i] - lam[j];
                if d.abs() < 1e-10 {
                    return Err(Error::Degenerate(format!("components {i} and {j} coincide")));
                }
                min_pairwise = min_pairwise.min((g[i] - g[j]) / d + g[i] / lam[j] + g[j] / lam[i]);
            }
        }
    }
    Ok(InverseConcavityTerms {
        general_min_eig: SymMatrix::symmetrize(&gen).eigenvalues()[0],
        homog_min_eig: SymMatrix::symmetrize(&hom).eigenvalues()[0],
        min_pairwise,
    })
}

/// Positive sample with pairwise distinct components (redrawn on near ties).
fn sample_ic<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let lam = sample_positive(rng, n);
        let ok = (0..n).all(|i| (0..i).all(|j| (lam[i] - lam[j]).abs() >= 1e-10));
        if ok {
            return lam;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    General,
    Homogeneous,
}

/// Sampled local inverse-concavity criterion. Both criteria are evaluated on
/// every sample; `details.verdict_disagreements` counts samples on which
/// their per-sample verdicts differ.
pub fn check_inverse_concave(
    f: &SpeedFunction,
    criterion: Criterion,
    trials: usize,
    seed: u64,
    tol: f64,
) -> InequalityReport {
    let n = f.n;
    let out = run_trials(trials, seed, |rng| {
        let lam = sample_ic(rng, n);
        let t = inverse_concavity_terms(f, &lam).ok()?;
        let gen = t.general_min_eig.min(t.min_pairwise);
        let hom = t.homog_min_eig.min(t.min_pairwise);
        let disagree = if (gen >= -tol) != (hom >= -tol) { -1.0 } else { 0.0 };
        let slack = match criterion {
            Criterion::General => gen,
            Criterion::Homogeneous => hom,
        };
        let eig = match criterion {
            Criterion::General => t.general_min_eig,
            Criterion::Homogeneous => t.homog_min_eig,
        };
        Some((
            slack,
            Witness::Eigen { lambda: lam },
            vec![("min_matrix_eig", eig), ("min_pairwise", t.min_pairwise), ("neg_disagreement", disagree)],
        ))
    });
    // the disagreement flags were merged by `min`; count them separately
    let name = match criterion {
        Criterion::General => "inverse_concave_general",
        Criterion::Homogeneous => "inverse_concave_homogeneous",
    };
    let mut rep = InequalityReport::build(name, trials, tol, out);
    let count = count_disagreements(f, trials, seed, tol);
    rep.details.remove("neg_disagreement");
    rep.details.insert("verdict_disagreements".into(), count as f64);
    rep
}

fn count_disagreements(f: &SpeedFunction, trials: usize, seed: u64, tol: f64) -> usize {
    (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = trial_rng(seed, i as u64);
            let lam = sample_ic(&mut rng, f.n);
            match inverse_concavity_terms(f, &lam) {
                Ok(t) => (t.general_min_eig.min(t.min_pairwise) >= -tol) != (t.homog_min_eig.min(t.min_pairwise) >= -tol),
                Err(_) => false,
            }
        })
        .count()
}

// --------------------------------------------------------- scalar lemmas

fn positive_args(a: f64, b: f64) -> Result<()> {
    for v in [a, b] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain { what: "scalar lemma argument", value: v });
        }
    }
    Ok(())
}

/// `psi(b) - psi(a) + psi'(a)(a - b)`.
pub fn scalar_convex_slack(m: &Modulator, a: f64, b: f64) -> Result<f64> {
    positive_args(a, b)?;
    let (pa, da, _) = m.values(a);
    Ok(m.values(b).0 - pa + da * (a - b))
}

/// `psi(b) - psi(a) - psi'(a) a^2 (1/a - 1/b)`.
pub fn scalar_iv_slack(m: &Modulator, a: f64, b: f64) -> Result<f64> {
    positive_args(a, b)?;
    let (pa, da, _) = m.values(a);
    Ok(m.values(b).0 - pa - da * a * a * (1.0 / a - 1.0 / b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarLemma {
    Convex,
    Iv,
}

/// Random `(a, b)` log-uniform in `[1e-2, 1e2]`.
pub fn sample_scalar(m: &Modulator, lemma: ScalarLemma, trials: usize, seed: u64, tol: f64) -> InequalityReport {
    let out = run_trials(trials, seed, |rng| {
        let a = log_uniform(rng, 1e-2, 1e2);
        let b = log_uniform(rng, 1e-2, 1e2);
        let s = match lemma {
            ScalarLemma::Convex => scalar_convex_slack(m, a, b),
            ScalarLemma::Iv => scalar_iv_slack(m, a, b),
        }
        .ok()?;
        Some((s, Witness::Scalar { a, b }, vec![]))
    });
    let name = match lemma {
        ScalarLemma::Convex => "scalar_convex",
        ScalarLemma::Iv => "scalar_iv",
    };
    InequalityReport::build(name, trials, tol, out)
}

// ------------------------------------------------------ interior lemma

fn interior_preconditions(f: &SpeedFunction, a: &SymMatrix, b: &SymMatrix, z: f64) -> Result<()> {
    if a.dim() != f.n || b.dim() != f.n {
        return Err(Error::Dimension { expected: f.n, got: if a.dim() != f.n { a.dim() } else { b.dim() } });
    }
    if !(z >= 0.0) {
        return Err(Error::Precondition(format!("shift must be nonnegative, got {z}")));
    }
    let la = a.eigenvalues()[0];
    let lb = b.eigenvalues()[0];
    if la <= z {
        return Err(Error::Precondition(format!("lambda_min(A) = {la} must exceed k = {z}")));
    }
    if lb <= z {
        return Err(Error::Precondition(format!("lambda_min(B) = {lb} must exceed k = {z}")));
    }
    Ok(())
}

/// `psi(F(B)) - psi(F(A)) - psi'(F(A)) F'(A):[X - X Y^-1 X]` with
/// `X = A - zI`, `Y = B - zI`, evaluated in the eigenbasis of `A` where
/// `F'(A)` and `X` are diagonal.
fn interior_value(f: &SpeedFunction, m: &Modulator, a: &SymMatrix, b: &SymMatrix, z: f64) -> Result<f64> {
    let e = a.eigen();
    let fa = f.eval(&e.values)?;
    let g = f.grad(&e.values)?;
    let fb = f.matrix_eval(b)?;
    let yinv = b.in_basis(&e.vectors).shift(-z).spd_inverse()?;
    let mut contraction = 0.0;
    for (i, (&lam, &gi)) in e.values.iter().zip(&g).enumerate() {
        let x = lam - z;
        contraction += gi * (x - x * x * yinv.get(i, i));
    }
    let (pa, da, _) = m.values(fa);
    Ok(m.values(fb).0 - pa - da * contraction)
}

/// Slack of the interior inequality at the closed-form optimal multiplier
/// `(A - kI)(B - kI)^-1`. Requires `k > 0` and both spectra above `k`.
pub fn verify_interior_inequality(f: &SpeedFunction, m: &Modulator, a: &SymMatrix, b: &SymMatrix, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Precondition(format!("k must be positive, got {k}")));
    }
    interior_preconditions(f, a, b, k)?;
    interior_value(f, m, a, b, k)
}

/// The interior slack with `k` replaced by `z`, for `z` in `[0, k]`.
pub fn q_value(f: &SpeedFunction, m: &Modulator, a: &SymMatrix, b: &SymMatrix, z: f64) -> Result<f64> {
    interior_preconditions(f, a, b, z)?;
    interior_value(f, m, a, b, z)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QMonotone {
    pub monotone: bool,
    /// Most negative forward difference along the grid.
    pub worst_step: f64,
    pub q_first: f64,
    pub q_last: f64,
}

/// Checks that `q` is non-decreasing on `z_grid` (ascending, inside `[0, k]`).
pub fn verify_q_monotone(
    f: &SpeedFunction,
    m: &Modulator,
    a: &SymMatrix,
    b: &SymMatrix,
    k: f64,
    z_grid: &[f64],
    tol: f64,
) -> Result<QMonotone> {
    verify_interior_inequality(f, m, a, b, k)?;
    if z_grid.is_empty() || z_grid.windows(2).any(|w| w[1] < w[0]) || z_grid[0] < 0.0 || z_grid[z_grid.len() - 1] > k {
        return Err(Error::Precondition("z grid must be ascending inside [0, k]".into()));
    }
    let q: Vec<f64> = z_grid.iter().map(|&z| interior_value(f, m, a, b, z)).collect::<Result<_>>()?;
    let worst_step = q.windows(2).map(|w| w[1] - w[0]).fold(0.0_f64, f64::min);
    Ok(QMonotone { monotone: worst_step >= -tol, worst_step, q_first: q[0], q_last: q[q.len() - 1] })
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let mut g: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    g[points - 1] = hi;
    g
}

/// Random instance of the interior lemma: two SPD matrices and `k` uniform
/// in `(0, 0.9 min(lambda_min(A), lambda_min(B)))`.
pub fn sample_interior_instance<R: Rng>(rng: &mut R, n: usize) -> (SymMatrix, SymMatrix, f64) {
    let a = sample_spd(rng, n);
    let b = sample_spd(rng, n);
    let lo = a.eigenvalues()[0].min(b.eigenvalues()[0]);
    let mut k = 0.0;
    while k <= 0.0 {
        k = rng.random::<f64>() * 0.9 * lo;
    }
    (a, b, k)
}

pub fn sample_interior(f: &SpeedFunction, m: &Modulator, trials: usize, seed: u64, tol: f64) -> InequalityReport {
    let out = run_trials(trials, seed, |rng| {
        let (a, b, k) = sample_interior_instance(rng, f.n);
        let s = verify_interior_inequality(f, m, &a, &b, k).ok()?;
        Some((s, Witness::Interior { a, b, k }, vec![]))
    });
    InequalityReport::build("interior", trials, tol, out)
}

/// On each sampled instance, `q(k) - q(0)` and the worst step of `q` on a
/// 101-point grid; slack is the smaller of the two.
pub fn sample_q_monotone(f: &SpeedFunction, m: &Modulator, trials: usize, seed: u64, tol: f64) -> InequalityReport {
    let out = run_trials(trials, seed, |rng| {
        let (a, b, k) = sample_interior_instance(rng, f.n);
        let grid = uniform_grid(0.0, k, 101);
        let r = verify_q_monotone(f, m, &a, &b, k, &grid, tol).ok()?;
        let total = r.q_last - r.q_first;
        Some((r.worst_step.min(total), Witness::Interior { a, b, k }, vec![("min_total_increase", total)]))
    });
    InequalityReport::build("q_monotone", trials, tol, out)
}

// ------------------------------------------------------ boundary lemma

/// The boundary quadratic form at the optimal multiplier, for `A = diag(lam)`
/// with strictly increasing positive `lam` and symmetric `B` with `B_11 = 0`.
pub fn verify_boundary_form(f: &SpeedFunction, m: &Modulator, lam: &[f64], b: &SymMatrix) -> Result<f64> {
    let n = f.n;
    if lam.len() != n || b.dim() != n {
        return Err(Error::Dimension { expected: n, got: if lam.len() != n { lam.len() } else { b.dim() } });
    }
    if lam.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("eigenvalues must be strictly increasing".into()));
    }
    if b.get(0, 0) != 0.0 {
        return Err(Error::Precondition(format!("B_11 must vanish, got {}", b.get(0, 0))));
    }
    Cone::Positive.contains(lam).inside.then_some(()).ok_or_else(|| Error::ConeViolation {
        cone: Cone::Positive.to_string(),
        slack: lam[0],
    })?;
    let a = SymMatrix::diag(lam);
    let second = f.matrix_second_form(&a, b)?;
    let g = f.grad(lam)?;
    let (_, d, dd) = m.values(f.eval(lam)?);
    let trace: f64 = (0..n).map(|p| g[p] * b.get(p, p)).sum();
    let mut multiplier = 0.0;
    for (p, gp) in g.iter().enumerate() {
        for q in 1..n {
            multiplier += gp / (lam[q] - lam[0]) * b.get(p, q) * b.get(p, q);
        }
    }
    Ok(second + dd / d * trace * trace + 2.0 * multiplier)
}

/// Random boundary instance: increasing eigenvalues with relative gaps of at
/// least `1e-3` and a standard normal symmetric `B` with `B_11 = 0`.
pub fn sample_boundary_instance<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, SymMatrix) {
    let lam = sample_distinct(rng, n, 1e-3);
    let mut b = random_symmetric(rng, n).into_matrix();
    b[(0, 0)] = 0.0;
    (lam, SymMatrix::symmetrize(&b))
}

pub fn sample_boundary(f: &SpeedFunction, m: &Modulator, trials: usize, seed: u64, tol: f64) -> InequalityReport {
    let out = run_trials(trials, seed, |rng| {
        let (lam, b) = sample_boundary_instance(rng, f.n);
        let q = verify_boundary_form(f, m, &lam, &b).ok()?;
        Some((q, Witness::Boundary { lambda: lam, b }, vec![]))
    });
    InequalityReport::build("boundary", trials, tol, out)
}

// ------------------------------------------------------ pinching

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryDecay {
    pub eps: f64,
    pub min_dual: f64,
    pub max_dual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PinchingReport {
    pub c: f64,
    pub samples: usize,
    pub feasible: usize,
    /// Largest `tau_max / tau_min` among feasible samples (a lower bound for
    /// the true constant); `None` when no sample satisfies the constraint.
    pub estimate: Option<f64>,
    pub witness: Option<Vec<f64>>,
    /// Dual values on samples with smallest component `eps` and largest 1.
    pub boundary: Vec<BoundaryDecay>,
    /// True when the largest dual value drops by at least a factor of 10
    /// from the shallowest to the deepest boundary layer.
    pub boundary_decays: bool,
}

pub const BOUNDARY_EPS: [f64; 4] = [1e-3, 1e-6, 1e-9, 1e-12];

/// Random search for `sup tau_max / tau_min` over `tau` normalized to
/// `tau_max = 1` subject to `tau_max <= C f_*(tau)`. The center `(1,...,1)`
/// is always included.
pub fn estimate_pinching_constant(f: &SpeedFunction, c: f64, samples: usize, seed: u64) -> Result<PinchingReport> {
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("C must be positive, got {c}")));
    }
    let n = f.n;
    let draw = |i: usize| -> Vec<f64> {
        if i == 0 {
            return vec![1.0; n];
        }
        let mut rng = trial_rng(seed, i as u64);
        let floor = log_uniform(&mut rng, 1e-6, 1.0);
        let top = rng.random_range(0..n);
        (0..n).map(|j| if j == top { 1.0 } else { log_uniform(&mut rng, floor, 1.0) }).collect()
    };
    let best = (0..samples.max(1))
        .into_par_iter()
        .filter_map(|i| {
            let tau = draw(i);
            let dual = f.dual_eval(&tau).ok()?;
            if 1.0 > c * dual {
                return None;
            }
            let ratio = 1.0 / tau.iter().copied().fold(f64::INFINITY, f64::min);
            Some((ratio, i))
        })
        .fold(|| (0usize, None::<(f64, usize)>), |(cnt, b), x| (cnt + 1, better(b, Some(x))))
        .reduce(|| (0, None), |(c1, b1), (c2, b2)| (c1 + c2, better(b1, b2)));
    let (feasible, top) = best;

    let mut boundary = Vec::new();
    let layer: Vec<Vec<f64>> = (0..samples.clamp(1, 10_000))
        .map(|i| {
            let mut rng = trial_rng(seed ^ 0x5eed_b0d1, i as u64);
            (0..n).map(|_| rng.random::<f64>()).collect()
        })
        .collect();
    for eps in BOUNDARY_EPS {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        let mut push = |tau: &[f64]| {
            if let Ok(v) = f.dual_eval(tau) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        };
        let mut corner = vec![1.0; n];
        corner[0] = eps;
        push(&corner);
        for u in &layer {
            // first component pinned at eps, last at 1, the rest in [eps, 1]
            let tau: Vec<f64> = (0..n)
                .map(|j| match j {
                    0 => eps,
                    _ if j == n - 1 => 1.0,
                    _ => eps + (1.0 - eps) * u[j],
                })
                .collect();
            push(&tau);
        }
        boundary.push(BoundaryDecay { eps, min_dual: lo, max_dual: hi });
    }
    let boundary_decays = n > 1 && boundary[boundary.len() - 1].max_dual <= 0.1 * boundary[0].max_dual;
    Ok(PinchingReport {
        c,
        samples: samples.max(1),
        feasible,
        estimate: top.map(|t| t.0),
        witness: top.map(|t| draw(t.1)),
        boundary,
        boundary_decays,
    })
}

fn better(a: Option<(f64, usize)>, b: Option<(f64, usize)>) -> Option<(f64, usize)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(r: f64, n: usize) -> SpeedFunction {
        SpeedFunction::power_mean(r, n).unwrap()
    }

    #[test]
    fn convexity_verdicts() {
        let lin = check_convexity(&pm(1.0, 3), 2000, 1, DEFAULT_TOL);
        assert!(lin.pass, "{lin:?}");
        assert!(lin.details["min_second_form"].abs() < 1e-14);
        assert!(check_convexity(&pm(2.0, 3), 10_000, 2, DEFAULT_TOL).pass);
        let s2 = check_convexity(&SpeedFunction::sigma_root(2, 3).unwrap(), 2000, 3, DEFAULT_TOL);
        assert!(!s2.pass && s2.witness.is_some() && s2.min_slack < -1e-3);
    }

    #[test]
    fn inverse_concavity_verdicts() {
        for c in [Criterion::General, Criterion::Homogeneous] {
            assert!(check_inverse_concave(&pm(-1.0, 3), c, 10_000, 4, DEFAULT_TOL).pass);
            assert!(check_inverse_concave(&pm(1.0, 3), c, 2000, 5, DEFAULT_TOL).pass);
            let bad = check_inverse_concave(&pm(-2.0, 2), c, 10_000, 6, DEFAULT_TOL);
            assert!(!bad.pass && matches!(bad.witness, Some(Witness::Eigen { .. })));
            assert_eq!(bad.details["verdict_disagreements"], 0.0);
            let g = SpeedFunction::sigma_root(3, 3).unwrap();
            assert!(check_inverse_concave(&g, c, 2000, 7, DEFAULT_TOL).pass);
        }
    }

    #[test]
    fn scalar_examples() {
        let id = Modulator::Identity;
        for (a, b) in [(1.0, 2.0), (0.3, 7.0), (5.0, 0.1)] {
            assert_eq!(scalar_convex_slack(&id, a, b).unwrap(), 0.0);
        }
        let sq = scalar_convex_slack(&Modulator::SqrtShift, 1.0, 2.0).unwrap();
        let direct = 5f64.sqrt() - 2f64.sqrt() - 1.0 / 2f64.sqrt();
        assert!((sq - direct).abs() < 1e-15 && (sq - 0.114_747_6).abs() < 1e-7);
        assert!((scalar_iv_slack(&id, 1.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        let np = Modulator::NegPower { alpha: 1.0 };
        for (a, b) in [(1.0, 2.0), (0.3, 7.0), (5.0, 0.1)] {
            assert!(scalar_iv_slack(&np, a, b).unwrap().abs() < 1e-14);
        }
        assert!(scalar_iv_slack(&np, 0.0, 1.0).is_err());
        assert!(sample_scalar(&Modulator::NegArctanRecip, ScalarLemma::Iv, 10_000, 8, SCALAR_TOL).pass);
        let bad = sample_scalar(&Modulator::NegPower { alpha: 2.0 }, ScalarLemma::Iv, 10_000, 9, SCALAR_TOL);
        assert!(!bad.pass);
    }

    #[test]
    fn interior_equal_matrices_vanish() {
        let mut rng = trial_rng(10, 0);
        let a = sample_spd(&mut rng, 3);
        let k = 0.5 * a.eigenvalues()[0];
        let s = verify_interior_inequality(&pm(-1.0, 3), &Modulator::NegPower { alpha: 1.0 }, &a, &a, k).unwrap();
        assert!(s.abs() < 1e-12, "{s}");
        let q = verify_q_monotone(&pm(1.0, 3), &Modulator::Identity, &a, &a, k, &uniform_grid(0.0, k, 11), 1e-10).unwrap();
        assert!(q.monotone && q.worst_step.abs() < 1e-12);
    }

    #[test]
    fn interior_preconditions_are_hard_errors() {
        let a = SymMatrix::diag(&[1.0, 2.0]);
        let b = SymMatrix::diag(&[0.5, 3.0]);
        let f = pm(1.0, 2);
        let m = Modulator::Identity;
        assert!(verify_interior_inequality(&f, &m, &a, &b, 0.6).is_err());
        assert!(verify_interior_inequality(&f, &m, &a, &b, 0.5).is_err());
        assert!(verify_interior_inequality(&f, &m, &a, &b, 0.0).is_err());
        assert!(verify_interior_inequality(&f, &m, &a, &b, 0.4).is_ok());
        assert!(verify_interior_inequality(&f, &m, &SymMatrix::diag(&[1.0, 2.0, 3.0]), &b, 0.4).is_err());
    }

    #[test]
    fn boundary_examples_and_errors() {
        let f = pm(1.0, 2);
        let m = Modulator::Identity;
        let b = SymMatrix::diag(&[0.0, 1.0]);
        assert!((verify_boundary_form(&f, &m, &[1.0, 2.0], &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(verify_boundary_form(&f, &m, &[1.0, 2.0], &SymMatrix::zeros(2)).unwrap(), 0.0);
        assert!(verify_boundary_form(&f, &m, &[1.0, 1.0], &b).is_err());
        assert!(verify_boundary_form(&f, &m, &[1.0, 2.0], &SymMatrix::diag(&[0.1, 1.0])).is_err());
        assert!(verify_boundary_form(&f, &m, &[-1.0, 2.0], &b).is_err());
    }

    #[test]
    fn pinching_examples() {
        let n = 3;
        let r = estimate_pinching_constant(&pm(1.0, n), n as f64, 200_000, 11).unwrap();
        let bound = (n * n - n + 1) as f64;
        let est = r.estimate.unwrap();
        assert!(est <= bound * (1.0 + 1e-12) && est > 0.8 * bound, "{est}");
        assert!(r.boundary_decays);
        let arith_dual = estimate_pinching_constant(&pm(-1.0, n), n as f64, 10_000, 12).unwrap();
        assert!(!arith_dual.boundary_decays);
        let last = arith_dual.boundary.last().unwrap();
        assert!(last.min_dual >= 1.0 / n as f64 - 1e-9);
        let tight = estimate_pinching_constant(&pm(1.0, n), 1.0, 10_000, 13).unwrap();
        assert_eq!(tight.estimate, Some(1.0));
        assert_eq!(tight.feasible, 1);
        let none = estimate_pinching_constant(&pm(1.0, n), 0.5, 10_000, 13).unwrap();
        assert_eq!(none.estimate, None);
        let g = SpeedFunction::sigma_root(3, 3).unwrap();
        assert!(estimate_pinching_constant(&g, 3.0, 1000, 14).unwrap().boundary_decays);
    }

    #[test]
    fn reports_are_deterministic() {
        let f = pm(-2.0, 3);
        let a = check_inverse_concave(&f, Criterion::General, 3000, 21, DEFAULT_TOL);
        let b = check_inverse_concave(&f, Criterion::General, 3000, 21, DEFAULT_TOL);
        assert_eq!(a, b);
    }
}
