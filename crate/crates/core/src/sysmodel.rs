//! Plant description, LQR Riccati data and pointwise transfer evaluations.
//!
//! Plant: `x+ = A x + B_u u + B_w w`, `s = C x`, with a scalar disturbance.
//! The control weight is the identity; a different weight is folded into
//! `B_u` by [`StateSpaceModel::with_control_weight`].

use crate::error::{Error, Result};
use crate::linalg::{self, to_complex, CMat, Mat, C64};

const PBH_TOL: f64 = 1e-8;
const DARE_TOL: f64 = 1e-12;
const DARE_CAP: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    pub a: Mat,
    pub b_u: Mat,
    pub b_w: Mat,
    pub c: Mat,
}

impl StateSpaceModel {
    /// Validates shapes, the scalar disturbance channel and the PBH rank
    /// conditions: `(A, B_u)` stabilizable, `(A, B_w)` controllable, `(A, C)`
    /// observable.
    pub fn new(a: Mat, b_u: Mat, b_w: Mat, c: Mat) -> Result<Self> {
        let m = Self::from_parts_unchecked(a, b_u, b_w, c)?;
        m.check_rank_conditions()?;
        Ok(m)
    }

    /// Shape checks only. Used by tests and degenerate examples (for
    /// instance `B_w = 0`) that deliberately violate the rank conditions.
    pub fn from_parts_unchecked(a: Mat, b_u: Mat, b_w: Mat, c: Mat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square, got {:?}", a.shape())));
        }
        if b_u.nrows() != n || b_u.ncols() == 0 {
            return Err(Error::Dimension(format!("B_u must be {n}xd_u, got {:?}", b_u.shape())));
        }
        if b_w.nrows() != n {
            return Err(Error::Dimension(format!("B_w must have {n} rows, got {:?}", b_w.shape())));
        }
        if b_w.ncols() != 1 {
            return Err(Error::Dimension(format!(
                "only a scalar disturbance is supported, B_w has {} columns",
                b_w.ncols()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::Dimension(format!("C must be d_sx{n}, got {:?}", c.shape())));
        }
        let all = a.iter().chain(b_u.iter()).chain(b_w.iter()).chain(c.iter());
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("model contains non-finite entries".into()));
        }
        Ok(Self { a, b_u, b_w, c })
    }

    /// Replaces `B_u` by `B_u R^{-1/2}` so that the cost weight becomes the
    /// identity. A controller designed for the returned model maps to the
    /// original input through `u = R^{-1/2} u'`.
    pub fn with_control_weight(&self, r: &Mat) -> Result<Self> {
        if r.shape() != (self.d_u(), self.d_u()) {
            return Err(Error::Dimension(format!("R must be {0}x{0}", self.d_u())));
        }
        let r_inv_half = linalg::sym_pow(r, -0.5)?;
        Self::new(self.a.clone(), &self.b_u * r_inv_half, self.b_w.clone(), self.c.clone())
    }

    pub fn d_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn d_u(&self) -> usize {
        self.b_u.ncols()
    }

    pub fn d_s(&self) -> usize {
        self.c.nrows()
    }

    fn check_rank_conditions(&self) -> Result<()> {
        let n = self.d_x();
        let eigs = self.a.clone().complex_eigenvalues();
        let a = to_complex(&self.a);
        let (bu, bw, c) = (to_complex(&self.b_u), to_complex(&self.b_w), to_complex(&self.c));
        for lam in eigs.iter() {
            let shifted = CMat::identity(n, n) * *lam - &a;
            if lam.norm() >= 1.0 && pbh_rank(&shifted, &bu, false) < n {
                return Err(Error::RankTest("(A, B_u) stabilizable"));
            }
            if pbh_rank(&shifted, &bw, false) < n {
                return Err(Error::RankTest("(A, B_w) controllable"));
            }
            if pbh_rank(&shifted, &c, true) < n {
                return Err(Error::RankTest("(A, C) observable"));
            }
        }
        Ok(())
    }
}

/// Rank of `[lam I - A, B]`, or of `[lam I - A; C]` when `stack_rows`.
fn pbh_rank(shifted: &CMat, other: &CMat, stack_rows: bool) -> usize {
    let n = shifted.nrows();
    let joined = if stack_rows {
        let mut m = CMat::zeros(n + other.nrows(), n);
        m.view_mut((0, 0), (n, n)).copy_from(shifted);
        m.view_mut((n, 0), other.shape()).copy_from(other);
        m
    } else {
        let mut m = CMat::zeros(n, n + other.ncols());
        m.view_mut((0, 0), (n, n)).copy_from(shifted);
        m.view_mut((0, n), other.shape()).copy_from(other);
        m
    };
    linalg::rank_complex(&joined, PBH_TOL)
}

/// Stabilizing DARE solution and every matrix derived from it.
#[derive(Clone, Debug)]
pub struct RiccatiData {
    pub model: StateSpaceModel,
    pub p: Mat,
    pub k_lqr: Mat,
    pub a_k: Mat,
    /// `(I + B_u' P B_u)^{-1/2}`.
    pub rbar: Mat,
    /// `(I + B_u' P B_u)^{1/2}`.
    pub s_half: Mat,
    pub abar: Mat,
    pub bbar: Mat,
    pub cbar: Mat,
    pub iterations: usize,
    pub residual: f64,
}

impl RiccatiData {
    pub fn d_x(&self) -> usize {
        self.model.d_x()
    }

    pub fn d_u(&self) -> usize {
        self.model.d_u()
    }
}

fn riccati_map(a: &Mat, b: &Mat, q: &Mat, p: &Mat) -> Result<Mat> {
    let m = b.ncols();
    let s = Mat::identity(m, m) + b.transpose() * p * b;
    let bpa = b.transpose() * p * a;
    let gain = s
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("I + B'PB lost positive definiteness".into()))?
        .solve(&bpa);
    let next = q + a.transpose() * p * a - bpa.transpose() * gain;
    Ok((&next + next.transpose()) * 0.5)
}

/// Solves the control DARE with `Q = C'C` by fixed-point iteration from `P = Q`.
/// Converged when the relative change between iterates drops below `tol`.
pub fn solve_dare(model: &StateSpaceModel, tol: f64) -> Result<RiccatiData> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("DARE tolerance must be positive".into()));
    }
    let (a, b) = (&model.a, &model.b_u);
    let q = model.c.transpose() * &model.c;
    let mut p = q.clone();
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < DARE_CAP {
        let next = riccati_map(a, b, &q, &p)?;
        change = (&next - &p).norm() / next.norm().max(f64::MIN_POSITIVE);
        p = next;
        iterations += 1;
        if change <= tol {
            break;
        }
    }
    let residual = (riccati_map(a, b, &q, &p)? - &p).norm() / p.norm().max(f64::MIN_POSITIVE);
    if change > tol || !(residual <= 1e-10) {
        return Err(Error::NonConvergent { iterations, change, residual });
    }
    let m = model.d_u();
    let s = Mat::identity(m, m) + b.transpose() * &p * b;
    let k_lqr = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("I + B'PB lost positive definiteness".into()))?
        .solve(&(b.transpose() * &p * a));
    let a_k = a - b * &k_lqr;
    let radius = linalg::spectral_radius(&a_k);
    if radius >= 1.0 {
        return Err(Error::NotStabilizing { radius });
    }
    let rbar = linalg::sym_pow(&s, -0.5)?;
    let s_half = linalg::sym_pow(&s, 0.5)?;
    let abar = a_k.transpose();
    let bbar = a_k.transpose() * &p * &model.b_w;
    let cbar = -(&rbar * b.transpose());
    Ok(RiccatiData {
        model: model.clone(),
        p,
        k_lqr,
        a_k,
        rbar,
        s_half,
        abar,
        bbar,
        cbar,
        iterations,
        residual,
    })
}

/// Solves the DARE with the default tolerance.
pub fn riccati(model: &StateSpaceModel) -> Result<RiccatiData> {
    solve_dare(model, DARE_TOL)
}

/// `F(z) = C (zI - A)^{-1} B_u` and `G(z) = C (zI - A)^{-1} B_w`, both strictly causal.
pub fn eval_f_g(model: &StateSpaceModel, z: C64) -> Result<(CMat, CMat)> {
    let n = model.d_x();
    let mut rhs = CMat::zeros(n, model.d_u() + 1);
    rhs.view_mut((0, 0), (n, model.d_u())).copy_from(&to_complex(&model.b_u));
    rhs.view_mut((0, model.d_u()), (n, 1)).copy_from(&to_complex(&model.b_w));
    let res = linalg::resolvent(&model.a, z, &rhs)?;
    let out = to_complex(&model.c) * res;
    let f = out.columns(0, model.d_u()).into_owned();
    let g = out.columns(model.d_u(), 1).into_owned();
    Ok((f, g))
}

/// Non-causal optimal controller `K0(z) = -(I + F*F)^{-1} F* G`.
pub fn eval_noncausal_k0(model: &StateSpaceModel, z: C64) -> Result<CMat> {
    let (f, g) = eval_f_g(model, z)?;
    let fh = f.adjoint();
    let lhs = CMat::identity(model.d_u(), model.d_u()) + &fh * &f;
    Ok(-linalg::solve_complex(lhs, &(fh * g), z)?)
}

/// Strictly anticausal and causal parts of `Delta K0`.
///
/// `T(z) = Cbar (z^{-1} I - Abar)^{-1} Bbar`,
/// `U(z) = Cbar P (A (zI - A)^{-1} + I) B_w`.
pub fn eval_split_t_u(ricc: &RiccatiData, z: C64) -> Result<(CMat, CMat)> {
    let cbar = to_complex(&ricc.cbar);
    let t = &cbar * linalg::resolvent(&ricc.abar, z.inv(), &to_complex(&ricc.bbar))?;
    let bw = to_complex(&ricc.model.b_w);
    let inner = to_complex(&ricc.model.a) * linalg::resolvent(&ricc.model.a, z, &bw)? + &bw;
    let u = cbar * to_complex(&ricc.p) * inner;
    Ok((t, u))
}

/// Canonical factor `Delta(z) = S^{1/2}(I + K_lqr (zI - A)^{-1} B_u)` with
/// `Delta* Delta = I + F* F`, and its inverse
/// `(I - K_lqr (zI - A_k)^{-1} B_u) S^{-1/2}`.
pub fn eval_delta(ricc: &RiccatiData, z: C64) -> Result<(CMat, CMat)> {
    let m = ricc.d_u();
    let bu = to_complex(&ricc.model.b_u);
    let k = to_complex(&ricc.k_lqr);
    let eye = CMat::identity(m, m);
    let delta =
        to_complex(&ricc.s_half) * (&eye + &k * linalg::resolvent(&ricc.model.a, z, &bu)?);
    let inv = (&eye - &k * linalg::resolvent(&ricc.a_k, z, &bu)?) * to_complex(&ricc.rbar);
    Ok((delta, inv))
}

/// H2-optimal disturbance feedback `K_H2(z) = Delta(z)^{-1} U(z)`.
pub fn eval_h2(ricc: &RiccatiData, z: C64) -> Result<CMat> {
    let (_, u) = eval_split_t_u(ricc, z)?;
    let (_, inv) = eval_delta(ricc, z)?;
    Ok(inv * u)
}
