//! Uniform rational approximation of a positive spectrum by a ratio of
//! symmetric trigonometric polynomials, and canonical polynomial factors.
//!
//! For a fixed bound `eps` the set of pairs `(P, Q)` with
//! `|P/Q - N| <= eps` and `P, Q > 0` is described by linear inequalities in
//! the coefficients at sampled frequencies, so each feasibility test is a
//! small linear program. Bisection on `eps` gives the best bound for a degree.

pub mod roots;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::drro::{eval_nstar, GammaParameter};
use crate::error::{Error, Result};
use crate::linalg::{Mat, C64};
use crate::spectral::FrequencyGrid;
use crate::sysmodel::RiccatiData;

const MAX_PIVOTS: usize = 200_000;
/// Roots closer than this to the unit circle are rejected.
pub const CIRCLE_TOL: f64 = 1e-7;

/// `P(z) = p_0 + sum_k p_k (z^k + z^{-k})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    pub coeffs: Vec<f64>,
}

impl TrigPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("trigonometric polynomial needs finite coefficients".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval_omega(&self, omega: f64) -> f64 {
        self.coeffs[0]
            + self.coeffs[1..].iter().enumerate().map(|(k, c)| 2.0 * c * ((k + 1) as f64 * omega).cos()).sum::<f64>()
    }

    pub fn eval(&self, z: C64) -> f64 {
        self.eval_omega(z.arg())
    }

    /// Symmetric square `|sum_k l_k z^{-k}|^2` of a real polynomial.
    pub fn from_factor(l: &[f64]) -> Self {
        let m = l.len() - 1;
        let coeffs = (0..=m).map(|k| (0..=m - k).map(|i| l[i] * l[i + k]).sum()).collect();
        Self { coeffs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalSpectrum {
    pub degree: usize,
    pub epsilon: f64,
    pub p: TrigPolynomial,
    pub q: TrigPolynomial,
}

impl RationalSpectrum {
    pub fn eval(&self, z: C64) -> f64 {
        self.p.eval(z) / self.q.eval(z)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("rational spectra always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("rational spectrum: {}", e.message())))
    }
}

/// `L(z) = sum_k l_k z^{-k}` with every root strictly inside the unit disk.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialFactor {
    pub coeffs: Vec<f64>,
    pub roots: Vec<C64>,
}

impl PolynomialFactor {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        let zi = z.inv();
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * zi + c)
    }
}

/// Result of one feasibility test.
#[derive(Clone, Debug)]
pub struct Feasibility {
    /// Optimal slack `t`; the bound is met iff `t <= 0`.
    pub slack: f64,
    pub p: TrigPolynomial,
    pub q: TrigPolynomial,
}

impl Feasibility {
    pub fn feasible(&self) -> bool {
        self.slack <= 0.0
    }
}

fn positivity_margin(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    1e-6 * sorted[sorted.len() / 2]
}

/// Linear feasibility test for `|P/Q - N| <= eps` on the uniform grid that
/// `samples` lives on, with `q_0 = 1` and `P, Q >= delta`.
///
/// Minimizes a common slack `t >= -1` over the four families of
/// inequalities. Only the frequencies in `[0, pi]` are used since both sides
/// are even in the frequency.
pub fn feasibility_check(samples: &[f64], m: usize, eps: f64) -> Result<Feasibility> {
    feasibility_with_margin(samples, m, eps, positivity_margin(samples))
}

fn feasibility_with_margin(samples: &[f64], m: usize, eps: f64, delta: f64) -> Result<Feasibility> {
    let grid = FrequencyGrid::new(samples.len())?;
    if samples.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("samples must be strictly positive".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument("approximation bound must be nonnegative".into()));
    }
    let half = grid.len() / 2;
    let nvar = 2 * m + 2;
    let t = nvar - 1;
    let rows = 4 * (half + 1) + 1;
    let mut g = Mat::zeros(rows, nvar);
    let mut h = vec![0.0; rows];
    for k in 0..=half {
        let omega = grid.omega(k);
        let basis: Vec<f64> = (0..=m).map(|j| if j == 0 { 1.0 } else { 2.0 * (j as f64 * omega).cos() }).collect();
        let (hi, lo) = (samples[k] + eps, samples[k] - eps);
        let r = 4 * k;
        for j in 0..=m {
            g[(r, j)] = basis[j];
            g[(r + 1, j)] = -basis[j];
            g[(r + 2, j)] = -basis[j];
        }
        for j in 1..=m {
            g[(r, m + j)] = -hi * basis[j];
            g[(r + 1, m + j)] = lo * basis[j];
            g[(r + 3, m + j)] = -basis[j];
        }
        for i in 0..4 {
            g[(r + i, t)] = -1.0;
        }
        h[r] = hi;
        h[r + 1] = -lo;
        h[r + 2] = -delta;
        h[r + 3] = 1.0 - delta;
    }
    g[(rows - 1, t)] = -1.0;
    h[rows - 1] = 1.0;
    let mut c = vec![0.0; nvar];
    c[t] = 1.0;
    let sol = simplex::solve_inequality_lp(&c, &g, &h, MAX_PIVOTS)?;
    let p = TrigPolynomial::new(sol.x[..=m].to_vec())?;
    let mut qc = vec![1.0];
    qc.extend_from_slice(&sol.x[m + 1..=2 * m]);
    let q = TrigPolynomial::new(qc)?;
    Ok(Feasibility { slack: sol.x[t], p, q })
}

/// Smallest feasible `eps` for degree `m`, found by bisection over
/// `[0, max N - min N]` to `rel_tol` of that span.
pub fn best_epsilon(samples: &[f64], m: usize, rel_tol: f64) -> Result<RationalSpectrum> {
    let delta = positivity_margin(samples);
    let hi_n = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo_n = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = hi_n - lo_n;
    let (mut lo, mut hi) = (0.0, span);
    let first = feasibility_with_margin(samples, m, hi, delta)?;
    if !first.feasible() {
        return Err(Error::InvalidArgument("upper bisection bracket is infeasible".into()));
    }
    let mut best = first;
    // A zero-width span still gets one exact test at eps = 0.
    if span == 0.0 {
        return Ok(RationalSpectrum { degree: m, epsilon: 0.0, p: best.p, q: best.q });
    }
    while hi - lo > rel_tol * span {
        let mid = 0.5 * (lo + hi);
        let f = feasibility_with_margin(samples, m, mid, delta)?;
        if f.feasible() {
            hi = mid;
            best = f;
        } else {
            lo = mid;
        }
    }
    Ok(RationalSpectrum { degree: m, epsilon: hi, p: best.p, q: best.q })
}

/// Smallest degree up to `max_degree` whose best bound reaches `target`.
pub fn lowest_degree(samples: &[f64], target: f64, max_degree: usize) -> Result<Option<RationalSpectrum>> {
    let delta = positivity_margin(samples);
    for m in 0..=max_degree {
        let f = feasibility_with_margin(samples, m, target, delta)?;
        if f.feasible() {
            return Ok(Some(RationalSpectrum { degree: m, epsilon: target, p: f.p, q: f.q }));
        }
    }
    Ok(None)
}

/// `N*` sampled on the `n`-point grid.
pub fn sample_nstar(param: &GammaParameter, ricc: &RiccatiData, n: usize) -> Result<Vec<f64>> {
    FrequencyGrid::new(n)?.points().map(|z| eval_nstar(param, ricc, z)).collect()
}

/// Largest `|P/Q - N|` over a grid, with `N` evaluated by `target`.
pub fn certificate_error(spec: &RationalSpectrum, grid: FrequencyGrid, target: impl Fn(C64) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for z in grid.points() {
        worst = worst.max((spec.eval(z) - target(z)?).abs());
    }
    Ok(worst)
}

/// Canonical factor of a positive trigonometric polynomial: `|L|^2 = P` with
/// every root of `L` strictly inside the unit disk and `l_0 > 0`.
pub fn factor_polynomial(p: &TrigPolynomial) -> Result<PolynomialFactor> {
    let m = p.degree();
    if m == 0 || p.coeffs[1..].iter().all(|&c| c == 0.0) {
        if !(p.coeffs[0] > 0.0) {
            return Err(Error::NonPositiveSpectrum { index: 0, value: p.coeffs[0] });
        }
        let mut coeffs = vec![0.0; m + 1];
        coeffs[0] = p.coeffs[0].sqrt();
        return Ok(PolynomialFactor { coeffs, roots: Vec::new() });
    }
    // z^m P(z) = sum_{k=-m}^{m} p_|k| z^{k+m}; palindromic, ascending in z.
    let mut ascending = Vec::with_capacity(2 * m + 1);
    ascending.extend(p.coeffs.iter().rev());
    ascending.extend(p.coeffs[1..].iter());
    let all = roots::poly_roots(&ascending)?;
    for r in &all {
        if (r.norm() - 1.0).abs() < CIRCLE_TOL {
            return Err(Error::RootOnCircle { omega: r.arg(), modulus: r.norm() });
        }
    }
    let inside: Vec<C64> = all.iter().cloned().filter(|r| r.norm() < 1.0).collect();
    let monic = roots::expand_from_roots(&inside);
    // Parseval: mean |prod(1 - rho z^{-1})|^2 = sum of squared coefficients.
    let energy: f64 = monic.iter().map(|c| c * c).sum();
    if !(p.coeffs[0] > 0.0) {
        return Err(Error::NonPositiveSpectrum { index: 0, value: p.coeffs[0] });
    }
    let l0 = (p.coeffs[0] / energy).sqrt();
    let mut coeffs: Vec<f64> = monic.iter().map(|c| c * l0).collect();
    coeffs.resize(m + 1, 0.0);
    Ok(PolynomialFactor { coeffs, roots: inside })
}

/// Numerator and denominator factors of `P/Q`.
pub fn rational_factor(spec: &RationalSpectrum) -> Result<(PolynomialFactor, PolynomialFactor)> {
    Ok((factor_polynomial(&spec.p)?, factor_polynomial(&spec.q)?))
}

/// Searches for a positive semidefinite Gram matrix `X` of size `m + 1` whose
/// diagonal sums reproduce the coefficients of `P`, by alternating
/// projections between the affine coefficient constraints and the PSD cone.
///
/// A certificate exists iff `P` is nonnegative on the circle. Intended as an
/// independent check of small-degree results, not as a production path.
pub fn gram_certificate(p: &TrigPolynomial, max_iter: usize) -> Option<Mat> {
    let n = p.degree() + 1;
    if n > 3 {
        return None;
    }
    let mut x = Mat::identity(n, n) * (p.coeffs[0] / n as f64);
    for _ in 0..max_iter {
        // Affine projection, diagonal by diagonal.
        for k in 0..n {
            let sum: f64 = (0..n - k).map(|i| x[(i, i + k)]).sum();
            let shift = (p.coeffs[k] - sum) / (n - k) as f64;
            for i in 0..n - k {
                x[(i, i + k)] += shift;
                if k > 0 {
                    x[(i + k, i)] = x[(i, i + k)];
                }
            }
        }
        let eig = x.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        let scale = p.coeffs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if min >= -1e-10 * scale {
            return Some(x);
        }
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        x = &eig.eigenvectors * Mat::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    }
    None
}

/// Ratio-of-factors transfer `S_P(z) / S_Q(z)` at a point.
pub fn eval_rational_factor(num: &PolynomialFactor, den: &PolynomialFactor, z: C64) -> C64 {
    num.eval(z) / den.eval(z)
}

/// Relative error of `|L|^2 = P` on a grid.
pub fn factor_error(p: &TrigPolynomial, l: &PolynomialFactor, grid: FrequencyGrid) -> f64 {
    grid.points()
        .map(|z| (l.eval(z).norm_sqr() - p.eval(z)).abs() / p.eval(z).abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}
