//! State-space realization of the rational controller and closed-loop checks.
//!
//! The controller is a disturbance-feedback map `u = K(z) w`:
//!
//! ```text
//! xi+ = F xi + G w
//! u   = H xi + J w
//! ```
//!
//! Its state is `(xi_f, zeta)`: `xi_f` realizes the factor inverse and `zeta`
//! replicates the plant. Started from zero, `zeta_t = -x_t` along every
//! trajectory, so an implementation may read `-x` from the plant instead of
//! propagating `zeta`. Closed-loop analysis and simulation use that
//! substitution, which is what makes the loop internally stable for unstable
//! plants.

use crate::error::{Error, Result};
use crate::linalg::{self, to_complex, CMat, Mat, Vector, C64};
use crate::ratapprox::{PolynomialFactor, RationalSpectrum};
use crate::sysmodel::{RiccatiData, StateSpaceModel};

const MAX_CONDITION: f64 = 1e12;

/// `L(z) = (1 + C (zI - A)^{-1} B) d` with scalar gain `d = D^{1/2} > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorRealization {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d_half: f64,
}

impl FactorRealization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Constant factor `L = d`.
    pub fn constant(d_half: f64) -> Self {
        Self { a: Mat::zeros(0, 0), b: Mat::zeros(0, 1), c: Mat::zeros(1, 0), d_half }
    }

    /// State matrix of the inverse factor, `A - B C`.
    pub fn a_inverse(&self) -> Mat {
        &self.a - &self.b * &self.c
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        if self.order() == 0 {
            return Ok(C64::new(self.d_half, 0.0));
        }
        let v = to_complex(&self.c) * linalg::resolvent(&self.a, z, &to_complex(&self.b))?;
        Ok((v[(0, 0)] + 1.0) * self.d_half)
    }
}

/// Controllable canonical realization of `num(z) / den(z)`, both polynomials
/// in `z^{-1}`.
pub fn realize_factor(num: &PolynomialFactor, den: &PolynomialFactor) -> Result<FactorRealization> {
    let (a0, b0) = (num.coeffs[0], den.coeffs[0]);
    let scale = den.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(b0.abs() > 1e-12 * scale.max(1.0)) {
        return Err(Error::DegenerateDenominator(b0));
    }
    if !(a0.abs() > 0.0) {
        return Err(Error::DegenerateDenominator(a0));
    }
    let n = num.degree().max(den.degree());
    let coeff = |p: &PolynomialFactor, lead: f64, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0) / lead;
    let mut a = Mat::zeros(n, n);
    let mut c = Mat::zeros(1, n);
    for k in 1..=n {
        let (alpha, beta) = (coeff(num, a0, k), coeff(den, b0, k));
        a[(0, k - 1)] = -beta;
        c[(0, k - 1)] = alpha - beta;
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = Mat::zeros(n, 1);
    if n > 0 {
        b[(0, 0)] = 1.0;
    }
    let d_half = a0 / b0;
    let fac = FactorRealization { a, b, c, d_half };
    // Both the factor and its inverse must be stable.
    for m in [&fac.a, &fac.a_inverse()] {
        let radius = linalg::spectral_radius(m);
        if radius >= 1.0 {
            return Err(Error::NotStabilizing { radius });
        }
    }
    Ok(fac)
}

/// Solves `U = A_k' P B_w C~ + A_k' U A~`.
pub fn solve_lyapunov_u(ricc: &RiccatiData, fac: &FactorRealization) -> Result<Mat> {
    let left = ricc.a_k.transpose();
    let rhs = &left * &ricc.p * &ricc.model.b_w * &fac.c;
    let (u, cond) = linalg::solve_stein(&left, &fac.a, &rhs)?;
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    Ok(u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealizedController {
    pub f: Mat,
    pub g: Mat,
    pub h: Mat,
    pub j: Mat,
    /// Number of trailing states that replicate `-x`.
    pub replica_states: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedLoopReport {
    pub radius: f64,
    pub stable: bool,
}

impl RealizedController {
    pub fn new(f: Mat, g: Mat, h: Mat, j: Mat, replica_states: usize) -> Result<Self> {
        let n = f.nrows();
        let ok = f.ncols() == n
            && g.nrows() == n
            && h.ncols() == n
            && j.nrows() == h.nrows()
            && j.ncols() == g.ncols()
            && replica_states <= n;
        if !ok {
            return Err(Error::Dimension(format!(
                "controller blocks F {:?}, G {:?}, H {:?}, J {:?}, replica {replica_states}",
                f.shape(),
                g.shape(),
                h.shape(),
                j.shape()
            )));
        }
        Ok(Self { f, g, h, j, replica_states })
    }

    /// The zero controller.
    pub fn zero(d_u: usize) -> Self {
        Self { f: Mat::zeros(0, 0), g: Mat::zeros(0, 1), h: Mat::zeros(d_u, 0), j: Mat::zeros(d_u, 1), replica_states: 0 }
    }

    pub fn order(&self) -> usize {
        self.f.nrows()
    }

    /// Number of states that are not plant replicas.
    pub fn own_states(&self) -> usize {
        self.order() - self.replica_states
    }

    /// `K(z) = H (zI - F)^{-1} G + J`.
    pub fn transfer(&self, z: C64) -> Result<CMat> {
        if self.order() == 0 {
            return Ok(to_complex(&self.j));
        }
        Ok(to_complex(&self.h) * linalg::resolvent(&self.f, z, &to_complex(&self.g))? + to_complex(&self.j))
    }

    /// Autonomous matrix of the plant and controller over `(x, xi_own)` after
    /// replacing the replica block by `-x`.
    pub fn closed_loop_matrix(&self, model: &StateSpaceModel) -> Result<Mat> {
        let (nx, no, nr) = (model.d_x(), self.own_states(), self.replica_states);
        if nr != 0 && nr != nx {
            return Err(Error::Dimension(format!("replica block has {nr} states, plant has {nx}")));
        }
        if self.h.nrows() != model.d_u() || self.g.ncols() != 1 {
            return Err(Error::Dimension("controller does not match the plant channels".into()));
        }
        let h_own = self.h.columns(0, no);
        let f_oo = self.f.view((0, 0), (no, no));
        let mut m = Mat::zeros(nx + no, nx + no);
        let mut top_left = model.a.clone();
        if nr > 0 {
            let h_rep = self.h.columns(no, nr);
            top_left -= &model.b_u * h_rep;
            let f_or = self.f.view((0, no), (no, nr));
            m.view_mut((nx, 0), (no, nx)).copy_from(&(-f_or));
        }
        m.view_mut((0, 0), (nx, nx)).copy_from(&top_left);
        m.view_mut((0, nx), (nx, no)).copy_from(&(&model.b_u * h_own));
        m.view_mut((nx, nx), (no, no)).copy_from(&f_oo);
        Ok(m)
    }

    pub fn closed_loop_check(&self, model: &StateSpaceModel) -> Result<ClosedLoopReport> {
        let radius = linalg::spectral_radius(&self.closed_loop_matrix(model)?);
        Ok(ClosedLoopReport { radius, stable: radius < 1.0 - 1e-9 })
    }
}

/// Free-function form of [`RealizedController::closed_loop_check`].
pub fn closed_loop_check(model: &StateSpaceModel, ctrl: &RealizedController) -> Result<ClosedLoopReport> {
    ctrl.closed_loop_check(model)
}

/// Assembles the rational controller from the factor realization and `U`.
///
/// With `W = B_u Rbar^2 B_u'` and `v = P B_w + U B~`:
///
/// ```text
/// F = [A~ - B~C~, 0; W U, A_k]     G = [(A~ - B~C~) B~; -B_w + W v]
/// H = [-Rbar^2 B_u' U, K_lqr]      J = -Rbar^2 B_u' v
/// ```
pub fn assemble_controller(ricc: &RiccatiData, fac: &FactorRealization, u: &Mat) -> Result<RealizedController> {
    let (n, nx) = (fac.order(), ricc.d_x());
    if u.shape() != (nx, n) {
        return Err(Error::Dimension(format!("U is {:?}, expected ({nx}, {n})", u.shape())));
    }
    let bu = &ricc.model.b_u;
    let r2 = &ricc.rbar * &ricc.rbar;
    let w = bu * &r2 * bu.transpose();
    let v = &ricc.p * &ricc.model.b_w + u * &fac.b;
    let a_inv = fac.a_inverse();

    let mut f = Mat::zeros(n + nx, n + nx);
    f.view_mut((0, 0), (n, n)).copy_from(&a_inv);
    f.view_mut((n, 0), (nx, n)).copy_from(&(&w * u));
    f.view_mut((n, n), (nx, nx)).copy_from(&ricc.a_k);

    let mut g = Mat::zeros(n + nx, 1);
    g.view_mut((0, 0), (n, 1)).copy_from(&(&a_inv * &fac.b));
    g.view_mut((n, 0), (nx, 1)).copy_from(&(-&ricc.model.b_w + &w * &v));

    let mut h = Mat::zeros(ricc.d_u(), n + nx);
    h.view_mut((0, 0), (ricc.d_u(), n)).copy_from(&(-(&r2 * bu.transpose() * u)));
    h.view_mut((0, n), (ricc.d_u(), nx)).copy_from(&ricc.k_lqr);

    let j = -(&r2 * bu.transpose() * &v);
    RealizedController::new(f, g, h, j, nx)
}

/// The H2-optimal controller, i.e. the assembly with a constant factor.
pub fn h2_controller(ricc: &RiccatiData) -> Result<RealizedController> {
    let fac = FactorRealization::constant(1.0);
    assemble_controller(ricc, &fac, &Mat::zeros(ricc.d_x(), 0))
}

/// Factor, realize and assemble the controller for a rational spectrum.
pub fn realize_rational(ricc: &RiccatiData, spec: &RationalSpectrum) -> Result<(FactorRealization, RealizedController)> {
    let (num, den) = crate::ratapprox::rational_factor(spec)?;
    let fac = realize_factor(&num, &den)?;
    let u = solve_lyapunov_u(ricc, &fac)?;
    let ctrl = assemble_controller(ricc, &fac, &u)?;
    Ok((fac, ctrl))
}

/// Frequency-domain form of the controller for a given factor:
/// `Delta^{-1}(U + T - S / L)` with `S = Cbar (z^{-1} I - Abar)^{-1} gamma`
/// and `gamma` the finite parameter of the same factor.
pub fn eval_frequency_controller(ricc: &RiccatiData, gamma: &Vector, l: C64, z: C64) -> Result<CMat> {
    if l.norm() < 1e-10 {
        return Err(Error::DivisionNearZero(l.norm()));
    }
    let (t, u) = crate::sysmodel::eval_split_t_u(ricc, z)?;
    let (_, dinv) = crate::sysmodel::eval_delta(ricc, z)?;
    let s = crate::spectral::anticausal_part_tl(gamma, ricc, z)?;
    Ok(dinv * (u + t - s / l))
}
