//! Admissible speed functions of the principal curvatures.
//!
//! Three families are built in: power means, roots of elementary symmetric
//! polynomials and roots of their ratios. Each is evaluated together with
//! closed-form first and second derivatives, its dual on the positive cone,
//! and its lift to symmetric matrices through the spectral decomposition.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, MAX_DIM};
use crate::names::ParsedName;

/// Eigenvalues (principal curvatures) stored in ascending order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenTuple(Vec<f64>);

impl EigenTuple {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::UnsupportedDimension(0));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain { what: "eigen tuple", value: *v });
        }
        values.sort_by(f64::total_cmp);
        Ok(EigenTuple(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

/// Elementary symmetric polynomials `sigma_0 ..= sigma_n` by the usual
/// one-variable-at-a-time recursion.
pub fn elementary_symmetric(lam: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; lam.len() + 1];
    e[0] = 1.0;
    for (m, &x) in lam.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// Stack version of [`elementary_symmetric`] for `lam.len() <= MAX_DIM`.
fn esym(lam: &[f64]) -> [f64; MAX_DIM + 1] {
    let mut e = [0.0; MAX_DIM + 1];
    e[0] = 1.0;
    for (m, &x) in lam.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// `sigma_k` of `lam` with the indices in `skip` removed. Negative `k` gives 0.
fn sigma_without(lam: &[f64], skip: &[usize], k: isize) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as usize;
    let mut e = [0.0; MAX_DIM + 1];
    e[0] = 1.0;
    let mut m = 0;
    for (i, &x) in lam.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        m += 1;
        for j in (1..=m.min(k)).rev() {
            e[j] += x * e[j - 1];
        }
    }
    if k > m {
        0.0
    } else {
        e[k]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Cone {
    /// All components strictly positive.
    Positive,
    /// `sigma_j > 0` for `1 <= j <= k`.
    Gamma(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeCheck {
    pub inside: bool,
    /// `min_j sigma_j` for `Gamma(k)`, `min_i lambda_i` for the positive cone.
    pub slack: f64,
}

impl Cone {
    pub fn contains(&self, lam: &[f64]) -> ConeCheck {
        let slack = match *self {
            Cone::Positive => lam.iter().copied().fold(f64::INFINITY, f64::min),
            Cone::Gamma(k) if lam.len() <= MAX_DIM => {
                let e = esym(lam);
                (1..=k.min(lam.len())).map(|j| e[j]).fold(f64::INFINITY, f64::min)
            }
            Cone::Gamma(k) => {
                let e = elementary_symmetric(lam);
                (1..=k.min(lam.len())).map(|j| e[j]).fold(f64::INFINITY, f64::min)
            }
        };
        ConeCheck { inside: slack > 0.0, slack }
    }

    fn check(&self, lam: &[f64]) -> Result<()> {
        let c = self.contains(lam);
        if c.inside {
            Ok(())
        } else {
            Err(Error::ConeViolation { cone: self.to_string(), slack: c.slack })
        }
    }
}

impl fmt::Display for Cone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cone::Positive => write!(f, "Gamma_+"),
            Cone::Gamma(k) => write!(f, "Gamma_{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SpeedFamily {
    /// `(mean(lambda^r))^(1/r)`, `r != 0`.
    PowerMean { r: f64 },
    /// `sigma_k^(1/k)`.
    SigmaRoot { k: usize },
    /// `(sigma_k / sigma_l)^(1/(k-l))`, `0 <= l < k`.
    SigmaRatioRoot { k: usize, l: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedFunction {
    pub family: SpeedFamily,
    pub n: usize,
    pub cone: Cone,
}

impl SpeedFunction {
    pub fn new(family: SpeedFamily, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        let cone = match family {
            SpeedFamily::PowerMean { r } => {
                if r == 0.0 || !r.is_finite() {
                    return Err(Error::Parse("power_mean requires a finite r != 0".into()));
                }
                Cone::Positive
            }
            SpeedFamily::SigmaRoot { k } => {
                if k == 0 || k > n {
                    return Err(Error::Parse(format!("sigma_root requires 1 <= k <= n (k={k}, n={n})")));
                }
                Cone::Gamma(k)
            }
            SpeedFamily::SigmaRatioRoot { k, l } => {
                if l >= k || k > n {
                    return Err(Error::Parse(format!(
                        "sigma_ratio_root requires 0 <= l < k <= n (k={k}, l={l}, n={n})"
                    )));
                }
                Cone::Gamma(k)
            }
        };
        Ok(SpeedFunction { family, n, cone })
    }

    pub fn power_mean(r: f64, n: usize) -> Result<Self> {
        Self::new(SpeedFamily::PowerMean { r }, n)
    }

    pub fn sigma_root(k: usize, n: usize) -> Result<Self> {
        Self::new(SpeedFamily::SigmaRoot { k }, n)
    }

    pub fn sigma_ratio_root(k: usize, l: usize, n: usize) -> Result<Self> {
        Self::new(SpeedFamily::SigmaRatioRoot { k, l }, n)
    }

    /// Parses `power_mean:r=1`, `sigma_root:k=2` or `sigma_ratio_root:k=2,l=1`.
    pub fn parse(name: &str, n: usize) -> Result<Self> {
        let p = ParsedName::parse(name)?;
        let family = match p.family.as_str() {
            "power_mean" => {
                p.only(&["r"])?;
                SpeedFamily::PowerMean { r: p.f64("r")? }
            }
            "sigma_root" => {
                p.only(&["k"])?;
                SpeedFamily::SigmaRoot { k: p.usize("k")? }
            }
            "sigma_ratio_root" => {
                p.only(&["k", "l"])?;
                SpeedFamily::SigmaRatioRoot { k: p.usize("k")?, l: p.usize("l")? }
            }
            other => return Err(Error::Parse(format!("unknown speed function {other:?}"))),
        };
        Self::new(family, n)
    }

    pub fn name(&self) -> String {
        match self.family {
            SpeedFamily::PowerMean { r } => format!("power_mean:r={r}"),
            SpeedFamily::SigmaRoot { k } => format!("sigma_root:k={k}"),
            SpeedFamily::SigmaRatioRoot { k, l } => format!("sigma_ratio_root:k={k},l={l}"),
        }
    }

    fn check(&self, lam: &[f64]) -> Result<()> {
        if lam.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: lam.len() });
        }
        self.cone.check(lam)
    }

    pub fn eval(&self, lam: &[f64]) -> Result<f64> {
        self.check(lam)?;
        Ok(self.eval_unchecked(lam))
    }

    fn eval_unchecked(&self, lam: &[f64]) -> f64 {
        match self.family {
            SpeedFamily::PowerMean { r } => {
                let top = lam.iter().copied().fold(0.0_f64, f64::max);
                let mean = lam.iter().map(|x| (x / top).powf(r)).sum::<f64>() / lam.len() as f64;
                top * mean.powf(1.0 / r)
            }
            SpeedFamily::SigmaRoot { k } => esym(lam)[k].powf(1.0 / k as f64),
            SpeedFamily::SigmaRatioRoot { k, l } => {
                let e = esym(lam);
                (e[k] / e[l]).powf(1.0 / (k - l) as f64)
            }
        }
    }

    /// Partial derivatives `df/dlambda_i`, in the order of `lam`.
    pub fn grad(&self, lam: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_grad(lam)?.1)
    }

    /// `f` and its gradient with a single cone check.
    pub fn value_and_grad(&self, lam: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(lam)?;
        let f = self.eval_unchecked(lam);
        let n = lam.len();
        let g = match self.family {
            SpeedFamily::PowerMean { r } => {
                let w = power_weights(lam, r);
                (0..n).map(|i| f * w[i] / lam[i]).collect()
            }
            SpeedFamily::SigmaRoot { k } => {
                let sk = esym(lam)[k];
                (0..n)
                    .map(|i| f / (k as f64 * sk) * sigma_without(lam, &[i], k as isize - 1))
                    .collect()
            }
            SpeedFamily::SigmaRatioRoot { k, l } => {
                let g = ratio_log_grad(lam, k, l);
                g.iter().map(|gi| f * gi).collect()
            }
        };
        Ok((f, g))
    }

    /// Second derivatives `d^2 f / dlambda_i dlambda_j`.
    pub fn hess(&self, lam: &[f64]) -> Result<SymMatrix> {
        self.check(lam)?;
        let f = self.eval_unchecked(lam);
        let n = lam.len();
        let m = match self.family {
            SpeedFamily::PowerMean { r } => {
                let w = power_weights(lam, r);
                DMatrix::from_fn(n, n, |i, j| {
                    let diag = if i == j { w[i] / (lam[i] * lam[i]) } else { 0.0 };
                    (r - 1.0) * f * (diag - w[i] * w[j] / (lam[i] * lam[j]))
                })
            }
            SpeedFamily::SigmaRoot { k } => {
                let sk = esym(lam)[k];
                let kf = k as f64;
                let d1: Vec<f64> = (0..n).map(|i| sigma_without(lam, &[i], k as isize - 1)).collect();
                DMatrix::from_fn(n, n, |i, j| {
                    let d2 = if i == j { 0.0 } else { sigma_without(lam, &[i, j], k as isize - 2) };
                    f / (kf * sk) * (d2 + (1.0 / kf - 1.0) * d1[i] * d1[j] / sk)
                })
            }
            SpeedFamily::SigmaRatioRoot { k, l } => {
                let g = ratio_log_grad(lam, k, l);
                let e = elementary_symmetric(lam);
                let (sk, sl) = (e[k], e[l]);
                let dk: Vec<f64> = (0..n).map(|i| sigma_without(lam, &[i], k as isize - 1)).collect();
                let dl: Vec<f64> = (0..n).map(|i| sigma_without(lam, &[i], l as isize - 1)).collect();
                let c = 1.0 / (k - l) as f64;
                DMatrix::from_fn(n, n, |i, j| {
                    let (dkk, dll) = if i == j {
                        (0.0, 0.0)
                    } else {
                        (
                            sigma_without(lam, &[i, j], k as isize - 2),
                            sigma_without(lam, &[i, j], l as isize - 2),
                        )
                    };
                    let dg = c * (dkk / sk - dk[i] * dk[j] / (sk * sk) - dll / sl + dl[i] * dl[j] / (sl * sl));
                    f * (g[i] * g[j] + dg)
                })
            }
        };
        Ok(SymMatrix::symmetrize(&m))
    }

    /// Dual function `f_*(mu) = 1 / f(1/mu)` on the positive cone.
    pub fn dual_eval(&self, mu: &[f64]) -> Result<f64> {
        if mu.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: mu.len() });
        }
        Cone::Positive.check(mu)?;
        let inv: Vec<f64> = mu.iter().map(|m| 1.0 / m).collect();
        Ok(1.0 / self.eval(&inv)?)
    }

    fn spectrum(&self, a: &SymMatrix) -> Result<crate::linalg::Eigen> {
        if a.dim() != self.n {
            return Err(Error::Dimension { expected: self.n, got: a.dim() });
        }
        let e = a.eigen();
        self.cone.check(&e.values)?;
        Ok(e)
    }

    /// `F(A) = f(spectrum(A))`.
    pub fn matrix_eval(&self, a: &SymMatrix) -> Result<f64> {
        let e = self.spectrum(a)?;
        Ok(self.eval_unchecked(&e.values))
    }

    /// `dF/dA_ij`: diagonal with entries `grad f` in the eigenbasis of `A`.
    pub fn matrix_grad(&self, a: &SymMatrix) -> Result<SymMatrix> {
        let e = self.spectrum(a)?;
        let g = self.grad(&e.values)?;
        Ok(SymMatrix::from_eigen(&g, &e.vectors))
    }

    /// Second directional derivative `d^2/ds^2 F(A + sB)` at `s = 0`.
    ///
    /// In the eigenbasis of `A` this is
    /// `sum f^{pq} B_pp B_qq + sum_{p != q} (f^p - f^q)/(l_p - l_q) B_pq^2`,
    /// where near-repeated eigenvalues (gap below `1e-8 * |A|`) use the
    /// limit `f^{pp} - f^{pq}` of the divided difference.
    pub fn matrix_second_form(&self, a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
        if b.dim() != self.n {
            return Err(Error::Dimension { expected: self.n, got: b.dim() });
        }
        let e = self.spectrum(a)?;
        let lam = &e.values;
        let g = self.grad(lam)?;
        let h = self.hess(lam)?;
        let bt = b.in_basis(&e.vectors);
        let norm = lam.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let eps = 1e-8 * norm;
        let n = self.n;
        let mut total = 0.0;
        for p in 0..n {
            for q in 0..n {
                total += h.get(p, q) * bt.get(p, p) * bt.get(q, q);
                if p != q {
                    let gap = lam[p] - lam[q];
                    let dd = if gap.abs() < eps {
                        h.get(p, p) - h.get(p, q)
                    } else {
                        (g[p] - g[q]) / gap
                    };
                    total += dd * bt.get(p, q) * bt.get(p, q);
                }
            }
        }
        Ok(total)
    }
}

impl fmt::Display for SpeedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// `lambda_i^r / sum_j lambda_j^r`, computed with the largest component scaled out.
fn power_weights(lam: &[f64], r: f64) -> Vec<f64> {
    let top = lam.iter().copied().fold(0.0_f64, f64::max);
    let p: Vec<f64> = lam.iter().map(|x| (x / top).powf(r)).collect();
    let s: f64 = p.iter().sum();
    p.iter().map(|x| x / s).collect()
}

/// Gradient of `log f` for the ratio family.
fn ratio_log_grad(lam: &[f64], k: usize, l: usize) -> Vec<f64> {
    let e = elementary_symmetric(lam);
    let c = 1.0 / (k - l) as f64;
    (0..lam.len())
        .map(|i| {
            let dk = sigma_without(lam, &[i], k as isize - 1);
            let dl = sigma_without(lam, &[i], l as isize - 1);
            c * (dk / e[k] - dl / e[l])
        })
        .collect()
}
