//! Small dense linear-algebra helpers shared by the synthesis modules.
//!
//! Everything here works on `nalgebra` dynamic matrices. Dimensions in this
//! crate are tiny (state dimension of a handful, horizons of a few hundred),
//! so clarity wins over blocking or in-place tricks.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;
pub type Vector = DVector<f64>;

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Unit-circle point `e^{j omega}`.
pub fn unit(omega: f64) -> C64 {
    C64::new(omega.cos(), omega.sin())
}

/// Largest eigenvalue modulus. Zero for an empty matrix.
pub fn spectral_radius(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Real power of a symmetric positive-definite matrix through its eigendecomposition.
pub fn sym_pow(m: &Mat, p: f64) -> Result<Mat> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidArgument(
            "matrix power requires a positive-definite argument".into(),
        ));
    }
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|l| l.powf(p)));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Numerical rank from the singular values, relative tolerance `tol`.
pub fn rank(m: &Mat, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Complex rank, same convention as [`rank`].
pub fn rank_complex(m: &CMat, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Solves `lhs * X = rhs` for complex square `lhs`, failing when `lhs` is
/// numerically singular. `z` is only used to label the error.
pub fn solve_complex(lhs: CMat, rhs: &CMat, z: C64) -> Result<CMat> {
    let scale = lhs.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    let lu = lhs.lu();
    let u = lu.u();
    let min_pivot = u.diagonal().iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-13 * scale) {
        return Err(Error::SingularResolvent { re: z.re, im: z.im });
    }
    lu.solve(rhs)
        .ok_or(Error::SingularResolvent { re: z.re, im: z.im })
}

/// `(z I - a)^{-1} b`.
pub fn resolvent(a: &Mat, z: C64, b: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let lhs = CMat::identity(n, n) * z - to_complex(a);
    solve_complex(lhs, b, z)
}

/// Solves the Stein equation `X - left * X * right = rhs` through the
/// Kronecker unfolding `(I - right^T (x) left) vec(X) = vec(rhs)`.
///
/// Returns the solution and the 2-norm condition number of the unfolded system.
pub fn solve_stein(left: &Mat, right: &Mat, rhs: &Mat) -> Result<(Mat, f64)> {
    let (p, q) = rhs.shape();
    if left.shape() != (p, p) || right.shape() != (q, q) {
        return Err(Error::Dimension(format!(
            "Stein equation: left {:?}, right {:?}, rhs {:?}",
            left.shape(),
            right.shape(),
            rhs.shape()
        )));
    }
    if p == 0 || q == 0 {
        return Ok((Mat::zeros(p, q), 1.0));
    }
    let op = Mat::identity(p * q, p * q) - right.transpose().kronecker(left);
    let sv = op.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let vec_rhs = Vector::from_column_slice(rhs.as_slice());
    let sol = op
        .lu()
        .solve(&vec_rhs)
        .ok_or(Error::IllConditioned(cond))?;
    Ok((Mat::from_column_slice(p, q, sol.as_slice()), cond))
}

/// Solves `X = q + a^T X a` for stable `a`.
pub fn solve_discrete_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    let radius = spectral_radius(a);
    if radius >= 1.0 {
        return Err(Error::LyapunovFailure { radius });
    }
    let (x, _) = solve_stein(&a.transpose(), a, q)?;
    Ok((&x + x.transpose()) * 0.5)
}

/// Frobenius norm of a complex matrix.
pub fn cnorm(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stein_scalar_matches_geometric_series() {
        let a = Mat::from_element(1, 1, 0.4);
        let b = Mat::from_element(1, 1, -0.5);
        let rhs = Mat::from_element(1, 1, 2.0);
        let (x, cond) = solve_stein(&a, &b, &rhs).unwrap();
        assert!((x[(0, 0)] - 2.0 / 1.2).abs() < 1e-14);
        assert!(cond >= 1.0);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = Mat::from_element(1, 1, 1.2);
        let q = Mat::identity(1, 1);
        assert!(matches!(
            solve_discrete_lyapunov(&a, &q),
            Err(Error::LyapunovFailure { .. })
        ));
    }

    #[test]
    fn sym_pow_inverse_square_root() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sym_pow(&m, -0.5).unwrap();
        let back = &r * &m * &r;
        assert!((back - Mat::identity(2, 2)).norm() < 1e-13);
    }

    #[test]
    fn resolvent_detects_eigenvalue() {
        let a = Mat::from_element(1, 1, 0.5);
        let b = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        assert!(resolvent(&a, C64::new(0.5, 0.0), &b).is_err());
        let v = resolvent(&a, C64::new(1.0, 0.0), &b).unwrap();
        assert!((v[(0, 0)].re - 2.0).abs() < 1e-15);
    }
}
