//! Dense revised simplex for small inequality-form linear programs.
//!
//! Solves `min c'x  s.t.  G x <= h` with `x` free by running a two-phase
//! simplex on the dual `min h'y  s.t.  G'y = -c, y >= 0`. The dual has as
//! many equality rows as the primal has variables, which is tiny here, so the
//! basis is refactorized from scratch at every pivot. The primal solution is
//! read off as the simplex multipliers of the optimal dual basis.

use nalgebra::{Dyn, LU};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Dual<'a> {
    g: &'a Mat,
    h: &'a [f64],
    b: Vector,
    /// Sign of each artificial column.
    art_sign: Vec<f64>,
}

impl Dual<'_> {
    fn rows(&self) -> usize {
        self.g.ncols()
    }

    fn cols(&self) -> usize {
        self.g.nrows()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.cols()
    }

    fn column(&self, j: usize) -> Vector {
        if self.is_artificial(j) {
            let i = j - self.cols();
            let mut e = Vector::zeros(self.rows());
            e[i] = self.art_sign[i];
            e
        } else {
            self.g.row(j).transpose()
        }
    }

    fn dot_column(&self, j: usize, v: &Vector) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows() {
            s += self.g[(j, i)] * v[i];
        }
        s
    }
}

struct Tableau {
    basis: Vec<usize>,
    lu: LU<f64, Dyn, Dyn>,
    lu_t: LU<f64, Dyn, Dyn>,
    beta: Vector,
}

fn factor(d: &Dual, basis: &[usize]) -> Result<Tableau> {
    let n = d.rows();
    let mut bm = Mat::zeros(n, n);
    for (k, &j) in basis.iter().enumerate() {
        bm.set_column(k, &d.column(j));
    }
    let lu_t = bm.transpose().lu();
    let lu = bm.lu();
    let beta = lu
        .solve(&d.b)
        .ok_or_else(|| Error::InvalidArgument("simplex basis became singular".into()))?
        .map(|v| if v < 0.0 && v > -1e-12 { 0.0 } else { v });
    Ok(Tableau { basis: basis.to_vec(), lu, lu_t, beta })
}

/// Runs simplex iterations with the given column costs. Artificial columns
/// may leave the basis but never re-enter.
fn run_phase(d: &Dual, cost: &dyn Fn(usize) -> f64, basis: &mut Vec<usize>, pivots: &mut usize, cap: usize) -> Result<()> {
    let n = d.rows();
    let mut stalled = 0usize;
    loop {
        let tab = factor(d, basis)?;
        let cb = Vector::from_iterator(n, tab.basis.iter().map(|&j| cost(j)));
        let pi = tab
            .lu_t
            .solve(&cb)
            .ok_or_else(|| Error::InvalidArgument("simplex basis became singular".into()))?;
        let scale = 1.0 + pi.amax();
        let tol = 1e-11 * scale;
        let bland = stalled > 50;
        let mut entering = None;
        let mut best = -tol;
        for j in 0..d.cols() {
            if basis.contains(&j) {
                continue;
            }
            let rc = cost(j) - d.dot_column(j, &pi);
            if rc < best {
                entering = Some(j);
                best = rc;
                if bland {
                    break;
                }
            }
        }
        let Some(e) = entering else { return Ok(()) };
        if *pivots >= cap {
            return Err(Error::SolverStall(*pivots));
        }
        let u = tab
            .lu
            .solve(&d.column(e))
            .ok_or_else(|| Error::InvalidArgument("simplex basis became singular".into()))?;
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..n {
            if u[i] > 1e-12 {
                let ratio = tab.beta[i] / u[i];
                let better = match leave {
                    None => true,
                    Some((r, best)) => {
                        ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[r])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, theta)) = leave else {
            return Err(Error::InvalidArgument("linear program is infeasible".into()));
        };
        stalled = if theta <= 1e-14 { stalled + 1 } else { 0 };
        basis[r] = e;
        *pivots += 1;
    }
}

/// Minimizes `c'x` subject to `G x <= h`. The problem must be feasible and
/// bounded.
pub fn solve_inequality_lp(c: &[f64], g: &Mat, h: &[f64], max_pivots: usize) -> Result<LpSolution> {
    let n = g.ncols();
    if c.len() != n || h.len() != g.nrows() {
        return Err(Error::Dimension(format!(
            "LP with {} variables, {} objective entries, {} rows and {} bounds",
            n,
            c.len(),
            g.nrows(),
            h.len()
        )));
    }
    let b = Vector::from_iterator(n, c.iter().map(|v| -v));
    let art_sign: Vec<f64> = b.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
    let d = Dual { g, h, b, art_sign };
    let m = d.cols();
    let mut basis: Vec<usize> = (m..m + n).collect();
    let mut pivots = 0;

    run_phase(&d, &|j| if j >= m { 1.0 } else { 0.0 }, &mut basis, &mut pivots, max_pivots)?;
    let tab = factor(&d, &basis)?;
    let infeasibility: f64 =
        tab.basis.iter().zip(tab.beta.iter()).filter(|(&j, _)| j >= m).map(|(_, &v)| v).sum();
    if infeasibility > 1e-9 * (1.0 + d.b.amax()) {
        return Err(Error::InvalidArgument("linear program is unbounded".into()));
    }
    // Pivot remaining zero-level artificials out of the basis.
    for r in 0..n {
        if basis[r] < m {
            continue;
        }
        let tab = factor(&d, &basis)?;
        let mut er = Vector::zeros(n);
        er[r] = 1.0;
        let row = tab
            .lu_t
            .solve(&er)
            .ok_or_else(|| Error::InvalidArgument("simplex basis became singular".into()))?;
        let replacement = (0..m)
            .filter(|j| !basis.contains(j))
            .max_by(|&a, &b| d.dot_column(a, &row).abs().total_cmp(&d.dot_column(b, &row).abs()))
            .filter(|&j| d.dot_column(j, &row).abs() > 1e-9);
        match replacement {
            Some(j) => basis[r] = j,
            None => return Err(Error::InvalidArgument("constraint matrix lacks full column rank".into())),
        }
        pivots += 1;
    }

    let cost = |j: usize| if j >= m { 0.0 } else { d.h[j] };
    run_phase(&d, &cost, &mut basis, &mut pivots, max_pivots)?;
    let tab = factor(&d, &basis)?;
    let hb = Vector::from_iterator(n, basis.iter().map(|&j| d.h[j]));
    let x = tab
        .lu_t
        .solve(&hb)
        .ok_or_else(|| Error::InvalidArgument("simplex basis became singular".into()))?;
    let objective = x.iter().zip(c).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x: x.iter().cloned().collect(), objective, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn box_constrained_minimum() {
        // min x + y s.t. x >= 1, y >= 2, x + y <= 10.
        let g = Mat::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]);
        let sol = solve_inequality_lp(&[1.0, 1.0], &g, &[-1.0, -2.0, 10.0], 100).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 2.0).abs() < 1e-12);
        assert!((sol.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_fit_of_three_points() {
        // min t s.t. |a - v_i| <= t for v = (0, 1, 5): a = 2.5, t = 2.5.
        let v = [0.0, 1.0, 5.0];
        let mut g = Mat::zeros(6, 2);
        let mut h = vec![0.0; 6];
        for (i, &vi) in v.iter().enumerate() {
            g[(2 * i, 0)] = 1.0;
            g[(2 * i, 1)] = -1.0;
            h[2 * i] = vi;
            g[(2 * i + 1, 0)] = -1.0;
            g[(2 * i + 1, 1)] = -1.0;
            h[2 * i + 1] = -vi;
        }
        let sol = solve_inequality_lp(&[0.0, 1.0], &g, &h, 100).unwrap();
        assert!((sol.x[0] - 2.5).abs() < 1e-12 && (sol.x[1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn unbounded_problem_is_reported() {
        let g = Mat::from_row_slice(1, 1, &[1.0]);
        assert!(solve_inequality_lp(&[1.0], &g, &[0.0], 100).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Random Chebyshev line fits, checked against brute force over the
        // slope on a fine grid.
        #[test]
        fn chebyshev_line_fit(ys in proptest::collection::vec(-3.0f64..3.0, 3..12)) {
            let n = ys.len();
            let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
            let mut g = Mat::zeros(2 * n, 3);
            let mut h = vec![0.0; 2 * n];
            for i in 0..n {
                g[(2 * i, 0)] = 1.0; g[(2 * i, 1)] = xs[i]; g[(2 * i, 2)] = -1.0; h[2 * i] = ys[i];
                g[(2 * i + 1, 0)] = -1.0; g[(2 * i + 1, 1)] = -xs[i]; g[(2 * i + 1, 2)] = -1.0; h[2 * i + 1] = -ys[i];
            }
            let sol = solve_inequality_lp(&[0.0, 0.0, 1.0], &g, &h, 1000).unwrap();
            let t = sol.x[2];
            for i in 0..n {
                prop_assert!((sol.x[0] + sol.x[1] * xs[i] - ys[i]).abs() <= t + 1e-9);
            }
            let mut best = f64::INFINITY;
            for s in 0..4001 {
                let slope = -40.0 + s as f64 * 0.02;
                let r: Vec<f64> = (0..n).map(|i| ys[i] - slope * xs[i]).collect();
                let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
                best = best.min(0.5 * (hi - lo));
            }
            prop_assert!(t <= best + 1e-9);
            prop_assert!(t >= best - 0.02);
        }
    }
}
