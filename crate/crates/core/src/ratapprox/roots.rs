//! Polynomial roots from balanced companion matrices.

use crate::error::{Error, Result};
use crate::linalg::{Mat, C64};

/// Parlett-Reinsch balancing by powers of two; similarity-preserving.
fn balance(m: &mut Mat) {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut c, mut r) = (0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                c += m[(j, i)].abs();
                r += m[(i, j)].abs();
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / RADIX {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            while c > r * RADIX {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Roots of `sum_k a[k] x^k` (ascending coefficients). Leading zeros are
/// trimmed relative to the largest coefficient.
pub fn poly_roots(ascending: &[f64]) -> Result<Vec<C64>> {
    let scale = ascending.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if scale == 0.0 {
        return Err(Error::InvalidArgument("zero polynomial has no isolated roots".into()));
    }
    let mut deg = ascending.len() - 1;
    while deg > 0 && ascending[deg].abs() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = ascending[deg];
    let mut comp = Mat::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -ascending[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    balance(&mut comp);
    let mut roots: Vec<C64> = comp.complex_eigenvalues().iter().cloned().collect();
    // One Newton polish per root on the original polynomial.
    for r in roots.iter_mut() {
        let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for &a in ascending[..=deg].iter().rev() {
            dp = dp * *r + p;
            p = p * *r + a;
        }
        if dp.norm() > 0.0 {
            let step = p / dp;
            if step.norm() < 1e-6 * (1.0 + r.norm()) {
                *r -= step;
            }
        }
    }
    roots.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// Real coefficients of `prod_i (1 - rho_i w)` in ascending powers of `w`.
/// Complex roots must come in conjugate pairs.
pub fn expand_from_roots(roots: &[C64]) -> Vec<f64> {
    let mut c = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (k, &v) in c.iter().enumerate() {
            next[k] += v;
            next[k + 1] -= r * v;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}
