//! Dense finite-horizon operators and oracles.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::drro::{bisect_gamma, dual_value};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::realize::RealizedController;
use crate::sysmodel::{riccati, StateSpaceModel};

/// Default bound on `T * max(d_x, d_s, d_u)`.
pub const DEFAULT_DENSE_CAP: usize = 8192;

/// Dense operators over a horizon `T`.
///
/// The open-loop blocks `f` and `g` grow like `A^T` for unstable plants, so
/// `I + F'F` is unusable numerically. Everything else is computed in the
/// prestabilized input `v = u + K_lqr x`, which maps causal controllers one
/// to one onto causal controllers and keeps all operators bounded:
///
/// ```text
/// s = F_k v + G_k w + O_k x_0,   u = L_v v + L_w w + M_x x_0
/// ```
#[derive(Clone, Debug)]
pub struct FiniteHorizonOperators {
    pub horizon: usize,
    pub d_u: usize,
    /// `T d_s x T d_u`, block `(i, j) = C A^{i-j-1} B_u` for `i > j`.
    pub f: Mat,
    /// `T d_s x T`, same structure with `B_w`.
    pub g: Mat,
    /// Non-causal optimum `-(I + F'F)^{-1} F'G`.
    pub k0: Mat,
    /// Lower-triangular `Delta` with `Delta' Delta = I + F'F`.
    pub delta: Mat,
    /// `[F_k; L_v]`, `[G_k; L_w]` and `[O_k; M_x]`.
    phi_v: Mat,
    phi_w: Mat,
    phi_x: Mat,
    /// `L_v`, unit lower triangular.
    l_v: Mat,
    l_w: Mat,
    /// Lower-triangular factor of `phi_v' phi_v`.
    delta_v: Mat,
    /// Non-causal optimum in the prestabilized input.
    v0: Mat,
}

pub fn build_finite_operators(model: &StateSpaceModel, horizon: usize) -> Result<FiniteHorizonOperators> {
    build_finite_operators_capped(model, horizon, DEFAULT_DENSE_CAP)
}

/// Stacks the Markov blocks `C A^k B` for `k < T` into a strictly
/// block-lower-triangular `T rows x T cols` operator.
fn toeplitz(blocks: &[Mat], diagonal: Option<&Mat>) -> Mat {
    let t = blocks.len();
    let (r, c) = blocks[0].shape();
    let mut out = Mat::zeros(t * r, t * c);
    for i in 0..t {
        if let Some(d) = diagonal {
            out.view_mut((i * r, i * c), (r, c)).copy_from(d);
        }
        for j in 0..i {
            out.view_mut((i * r, j * c), (r, c)).copy_from(&blocks[i - j - 1]);
        }
    }
    out
}

fn powers_times(a: &Mat, left: &Mat, right: &Mat, t: usize) -> Vec<Mat> {
    let mut la = left.clone();
    let mut out = Vec::with_capacity(t);
    for _ in 0..t {
        out.push(&la * right);
        la = &la * a;
    }
    out
}

fn stack(top: &Mat, bottom: &Mat) -> Mat {
    let mut out = Mat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

fn reverse_cholesky(x: &Mat) -> Result<Mat> {
    // With J the flip, J X J = L L' gives X = D' D for lower-triangular
    // D = J L' J.
    let chol = Cholesky::new(flip(x)).ok_or_else(|| Error::InvalidArgument("Gram operator is not positive".into()))?;
    Ok(flip(&chol.l().transpose()))
}

pub fn build_finite_operators_capped(
    model: &StateSpaceModel,
    horizon: usize,
    cap: usize,
) -> Result<FiniteHorizonOperators> {
    if horizon < 2 {
        return Err(Error::InvalidArgument(format!("horizon must be at least 2, got {horizon}")));
    }
    let (nx, nu, ns) = (model.d_x(), model.d_u(), model.d_s());
    if horizon.saturating_mul(nx.max(ns).max(nu)) > cap {
        return Err(Error::MemoryGuard { horizon, cap });
    }
    let t = horizon;
    let f = toeplitz(&powers_times(&model.a, &model.c, &model.b_u, t), None);
    let g = toeplitz(&powers_times(&model.a, &model.c, &model.b_w, t), None);

    let ricc = riccati(model)?;
    let (ak, neg_k) = (&ricc.a_k, -&ricc.k_lqr);
    let f_k = toeplitz(&powers_times(ak, &model.c, &model.b_u, t), None);
    let g_k = toeplitz(&powers_times(ak, &model.c, &model.b_w, t), None);
    let l_v = toeplitz(&powers_times(ak, &neg_k, &model.b_u, t), Some(&Mat::identity(nu, nu)));
    let l_w = toeplitz(&powers_times(ak, &neg_k, &model.b_w, t), None);
    let column = |blocks: Vec<Mat>| {
        let rows = blocks[0].nrows();
        let mut out = Mat::zeros(t * rows, nx);
        for (i, b) in blocks.iter().enumerate() {
            out.view_mut((i * rows, 0), (rows, nx)).copy_from(b);
        }
        out
    };
    let eye = Mat::identity(nx, nx);
    let phi_x = stack(&column(powers_times(ak, &model.c, &eye, t)), &column(powers_times(ak, &neg_k, &eye, t)));
    let phi_v = stack(&f_k, &l_v);
    let phi_w = stack(&g_k, &l_w);

    let x_v = phi_v.transpose() * &phi_v;
    let chol = Cholesky::new(x_v.clone()).ok_or_else(|| Error::InvalidArgument("Gram operator is not positive".into()))?;
    let v0 = -chol.solve(&(phi_v.transpose() * &phi_w));
    let delta_v = reverse_cholesky(&x_v)?;
    let k0 = &l_v * &v0 + &l_w;
    // Delta = Delta_v L_v^{-1}, from L_v' Delta' = Delta_v'.
    let delta = l_v
        .transpose()
        .solve_upper_triangular(&delta_v.transpose())
        .ok_or_else(|| Error::InvalidArgument("input map is singular".into()))?
        .transpose();
    Ok(FiniteHorizonOperators { horizon, d_u: nu, f, g, k0, delta, phi_v, phi_w, phi_x, l_v, l_w, delta_v, v0 })
}

fn flip(m: &Mat) -> Mat {
    let (r, c) = m.shape();
    Mat::from_fn(r, c, |i, j| m[(r - 1 - i, c - 1 - j)])
}

impl FiniteHorizonOperators {
    /// `I + F'F`.
    pub fn gram(&self) -> Mat {
        Mat::identity(self.f.ncols(), self.f.ncols()) + self.f.transpose() * &self.f
    }

    /// Prestabilized form `L_v^{-1}(K - L_w)` of a controller.
    fn to_v(&self, k: &Mat) -> Result<Mat> {
        self.l_v
            .solve_lower_triangular(&(k - &self.l_w))
            .ok_or_else(|| Error::InvalidArgument("input map is singular".into()))
    }

    fn from_v(&self, v: &Mat) -> Mat {
        &self.l_v * v + &self.l_w
    }

    /// `Delta_v^{-1} m`, by forward substitution.
    fn delta_v_solve(&self, m: &Mat) -> Result<Mat> {
        self.delta_v
            .solve_lower_triangular(m)
            .ok_or_else(|| Error::InvalidArgument("finite-horizon factor is singular".into()))
    }

    /// Gain mapping the state at a restart to the open-loop optimal input
    /// sequence over the next `T` steps.
    pub fn state_gain(&self) -> Result<Mat> {
        let x_v = self.phi_v.transpose() * &self.phi_v;
        let chol = Cholesky::new(x_v).ok_or_else(|| Error::InvalidArgument("Gram operator is not positive".into()))?;
        let v = -chol.solve(&(self.phi_v.transpose() * &self.phi_x));
        let nu = self.d_u;
        let m_x = self.phi_x.rows(self.phi_x.nrows() - self.horizon * nu, self.horizon * nu);
        Ok(&self.l_v * v + m_x)
    }

    /// Error operator `Delta (K - K0)`, computed in the prestabilized input.
    pub fn regret_error(&self, k: &Mat) -> Result<Mat> {
        self.check_controller(k)?;
        if k == &self.k0 {
            return Ok(Mat::zeros(k.nrows(), k.ncols()));
        }
        Ok(&self.delta_v * (self.to_v(k)? - &self.v0))
    }

    /// Dense regret operator `(K - K0)' Delta' Delta (K - K0)`.
    pub fn regret_operator(&self, k: &Mat) -> Result<Mat> {
        let e = self.regret_error(k)?;
        Ok(e.transpose() * e)
    }

    /// Nominal cost `||phi_v V + phi_w||_F^2` of a controller under white
    /// noise.
    pub fn nominal_cost(&self, k: &Mat) -> Result<f64> {
        Ok((&self.phi_v * self.to_v(k)? + &self.phi_w).norm_squared())
    }

    fn check_controller(&self, k: &Mat) -> Result<()> {
        if k.shape() != self.k0.shape() {
            return Err(Error::Dimension(format!("controller is {:?}, expected {:?}", k.shape(), self.k0.shape())));
        }
        Ok(())
    }
}

/// Keeps the block-lower-triangular part (diagonal blocks included) of a
/// `T d_u x T` operator.
pub fn causal_part(m: &Mat, d_u: usize) -> Mat {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        for i in 0..(j * d_u).min(m.nrows()) {
            out[(i, j)] = 0.0;
        }
    }
    out
}

/// Finite-horizon H2 controller `Delta^{-1} {Delta K0}_+`.
pub fn finite_h2(ops: &FiniteHorizonOperators) -> Result<Mat> {
    let v = ops.delta_v_solve(&causal_part(&(&ops.delta_v * &ops.v0), ops.d_u))?;
    Ok(ops.from_v(&v))
}

/// Dense `T d_u x T` matrix of a realized controller's impulse response.
pub fn dense_controller(ctrl: &RealizedController, horizon: usize) -> Mat {
    let nu = ctrl.h.nrows();
    let mut markov = Vec::with_capacity(horizon);
    markov.push(ctrl.j.clone());
    let mut fg = ctrl.g.clone();
    for _ in 1..horizon {
        markov.push(&ctrl.h * &fg);
        fg = &ctrl.f * fg;
    }
    let mut k = Mat::zeros(horizon * nu, horizon);
    for i in 0..horizon {
        for j in 0..=i {
            k.view_mut((i * nu, j), (nu, 1)).copy_from(&markov[i - j]);
        }
    }
    k
}

#[derive(Clone, Debug)]
pub struct FiniteRegret {
    /// Total worst-case expected regret over the horizon.
    pub regret: f64,
    /// `regret / T`.
    pub per_step: f64,
    /// Optimal dual level; `+inf` when the regret operator vanishes.
    pub gamma: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
}

impl FiniteRegret {
    /// `(I - R_K / gamma)^{-p}` through the eigendecomposition.
    fn power(&self, p: f64) -> Mat {
        let n = self.eigenvalues.len();
        if self.gamma.is_infinite() {
            return Mat::identity(n, n);
        }
        let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.eigenvalues.iter().map(|&l| (1.0 - l / self.gamma).powf(-p)),
        ));
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }

    /// Worst-case disturbance covariance `(I - R_K / gamma)^{-2}`.
    pub fn worst_case_covariance(&self) -> Mat {
        self.power(2.0)
    }

    /// Symmetric square root of the worst-case covariance.
    pub fn covariance_sqrt(&self) -> Mat {
        self.power(1.0)
    }
}

/// Worst-case expected regret of a dense controller over the Wasserstein
/// ball of radius `r sqrt(T)` around white noise.
pub fn finite_dual_regret(ops: &FiniteHorizonOperators, k: &Mat, radius: f64) -> Result<FiniteRegret> {
    let rk = ops.regret_operator(k)?;
    let t = ops.horizon;
    if rk.iter().all(|&v| v == 0.0) {
        bisect_gamma(&[0.0], radius)?;
        return Ok(FiniteRegret {
            regret: 0.0,
            per_step: 0.0,
            gamma: f64::INFINITY,
            eigenvalues: vec![0.0; t],
            eigenvectors: Mat::identity(t, t),
        });
    }
    let eig = SymmetricEigen::new(0.5 * (&rk + rk.transpose()));
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    // The trace form with r_T^2 = r^2 T is the mean form with r^2.
    let (per_step, gamma) = dual_value(&eigenvalues, radius)?;
    Ok(FiniteRegret { regret: per_step * t as f64, per_step, gamma, eigenvalues, eigenvectors: eig.eigenvectors })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500 }
    }
}

#[derive(Clone, Debug)]
pub struct FiniteOracle {
    /// Worst-case disturbance covariance.
    pub m: Mat,
    /// Optimal causal controller for `m`.
    pub controller: Mat,
    pub regret: FiniteRegret,
    /// `||{Delta K0 L}_-||_F^2 / T` at the final iterate.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Inner {
    l_inv: Mat,
    y: Mat,
    strict: Mat,
}

fn inner(ops: &FiniteHorizonOperators, m: &Mat) -> Result<Inner> {
    let l = Cholesky::new(m.clone()).ok_or_else(|| Error::NonPositiveSpectrum { index: 0, value: 0.0 })?.l();
    let t = l.nrows();
    let l_inv = l
        .solve_lower_triangular(&Mat::identity(t, t))
        .ok_or_else(|| Error::NonPositiveSpectrum { index: 0, value: 0.0 })?;
    let y = &ops.delta_v * &ops.v0 * &l;
    let strict = &y - causal_part(&y, ops.d_u);
    Ok(Inner { l_inv, y, strict })
}

/// Dense Frank-Wolfe on the finite-horizon saddle point. The inner minimizer
/// is the Wiener-Hopf controller `Delta^{-1} {Delta K0 L}_+ L^{-1}`.
pub fn finite_fw_oracle(ops: &FiniteHorizonOperators, radius: f64, cfg: &OracleConfig) -> Result<FiniteOracle> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let t = ops.horizon;
    let mut m = Mat::identity(t, t);
    let mut converged = false;
    let mut k = 0;
    while k < cfg.max_iter {
        let it = inner(ops, &m)?;
        let s_l = &it.strict * &it.l_inv;
        let grad = s_l.transpose() * &s_l;
        let eig = SymmetricEigen::new(0.5 * (&grad + grad.transpose()));
        let lam: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let level = bisect_gamma(&lam, radius)?;
        let target = if level.is_infinite() {
            Mat::identity(t, t)
        } else {
            let d = nalgebra::DVector::from_iterator(t, lam.iter().map(|&l| (1.0 - l / level).powi(-2)));
            &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose()
        };
        let eta = 2.0 / (k as f64 + 2.0);
        let next = (1.0 - eta) * &m + eta * target;
        let change = (&next - &m).norm() / m.norm();
        m = 0.5 * (&next + next.transpose());
        k += 1;
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }
    let it = inner(ops, &m)?;
    let controller = ops.from_v(&ops.delta_v_solve(&(causal_part(&it.y, ops.d_u) * &it.l_inv))?);
    let regret = finite_dual_regret(ops, &controller, radius)?;
    let objective = it.strict.norm_squared() / t as f64;
    Ok(FiniteOracle { m, controller, regret, objective, iterations: k, converged })
}

/// Compares sorted eigenvalues against the quantile function of a sample
/// set, read at the midpoints `(i + 1/2) / n`. Returns the mean and maximum
/// relative deviation.
pub fn quantile_deviation(eigenvalues: &[f64], samples: &[f64]) -> (f64, f64) {
    let mut ev = eigenvalues.to_vec();
    ev.sort_by(f64::total_cmp);
    let mut q = samples.to_vec();
    q.sort_by(f64::total_cmp);
    let (n, ns) = (ev.len(), q.len());
    let quantile = |p: f64| {
        let x = p * ns as f64 - 0.5;
        if x <= 0.0 {
            return q[0];
        }
        if x >= (ns - 1) as f64 {
            return q[ns - 1];
        }
        let i = x.floor() as usize;
        let f = x - i as f64;
        q[i] * (1.0 - f) + q[i + 1] * f
    };
    let devs: Vec<f64> = ev.iter().enumerate().map(|(i, &e)| (e / quantile((i as f64 + 0.5) / n as f64) - 1.0).abs()).collect();
    let mean = devs.iter().sum::<f64>() / n as f64;
    let max = devs.iter().cloned().fold(0.0, f64::max);
    (mean, max)
}
