//! Frank-Wolfe saddle-point solver for the worst-case disturbance spectrum.
//!
//! The iterate is a scalar density `M_k` on the unit circle. Each step
//! factorizes it, forms the finite parameter `Gamma`, evaluates the scalar
//! gradient `R_k = ||S||^2 / |L|^2`, solves the one-dimensional dual for the
//! level `gamma` and moves toward `(1 - R_k / gamma)^{-2}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat, Vector, C64};
use crate::spectral::{
    self, anticausal_part_tl, FactorSamples, FrequencyGrid, ResolventTable, SpectrumSamples,
};
use crate::sysmodel::{self, RiccatiData, StateSpaceModel};

const BRACKET_DOUBLINGS: usize = 200;

/// Finite parameter and dual level of a solver iterate.
///
/// `level` is `+inf` when the gradient vanishes identically; the worst case
/// is then the nominal spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaParameter {
    pub vector: Vector,
    pub level: f64,
}

impl GammaParameter {
    pub fn zero(d_x: usize) -> Self {
        Self { vector: Vector::zeros(d_x), level: f64::INFINITY }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self { grid: 4096, tol: 1e-6, max_iter: 2000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub objective: f64,
    pub gap: f64,
    pub gamma: f64,
    pub step: f64,
    pub change: f64,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub k: usize,
    pub m: SpectrumSamples,
    pub l: FactorSamples,
    pub param: GammaParameter,
    pub objective: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub radius: f64,
    pub param: GammaParameter,
    pub m: SpectrumSamples,
    pub factor: FactorSamples,
    /// `Gamma' X Gamma` with `X` from the Lyapunov equation.
    pub regret: f64,
    /// Grid average of `||S||^2`; agrees with `regret` for converged runs.
    pub regret_grid: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max_z |N*(z) - |L(z)|^2| / N*(z)` on the solver grid.
    pub residual: f64,
    /// `mean((sqrt(M) - 1)^2)`, the squared transport distance to the nominal.
    pub transport: f64,
    pub trace: Vec<TraceRecord>,
}

/// `||Cbar (I - z Abar)^{-1} Gamma||^2 / |L(z)|^2` at any unit-circle point.
pub fn gradient_rk(state: &SolverState, ricc: &RiccatiData, z: C64) -> Result<f64> {
    let l = state.l.eval(z);
    if l.norm() < 1e-10 {
        return Err(Error::DivisionNearZero(l.norm()));
    }
    let s = anticausal_part_tl(&state.param.vector, ricc, z)?;
    Ok(linalg::cnorm(&s).powi(2) / l.norm_sqr())
}

fn gradient_on_grid(table: &ResolventTable, gamma: &Vector, l: &FactorSamples) -> Result<Vec<f64>> {
    let energy = table.anticausal_energy(gamma);
    let raw: Vec<f64> = energy
        .iter()
        .zip(l.values())
        .map(|(&e, lz)| {
            let a = lz.norm();
            if a < 1e-10 {
                Err(Error::DivisionNearZero(a))
            } else {
                Ok(e / (a * a))
            }
        })
        .collect::<Result<_>>()?;
    // The gradient is even in frequency; averaging mirror pairs removes
    // rounding asymmetry that the best response would amplify near gamma.
    let grid = table.grid();
    Ok((0..raw.len()).map(|k| 0.5 * (raw[k] + raw[grid.mirror(k)])).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn dual_constraint(r: &[f64], level: f64) -> f64 {
    r.iter().map(|&x| (x / (level - x)).powi(2)).sum::<f64>() / r.len() as f64
}

/// Solves `mean(((1 - R / gamma)^{-1} - 1)^2) = radius^2` for `gamma > max R`.
///
/// Returns `+inf` when `R` vanishes identically.
pub fn bisect_gamma(r: &[f64], radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if r.is_empty() || r.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument("gradient samples must be nonnegative".into()));
    }
    let peak = r.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(f64::INFINITY);
    }
    let target = radius * radius;
    let mut lo = peak * (1.0 + 1e-8);
    if dual_constraint(r, lo) <= target {
        return Err(Error::BracketFailure(0));
    }
    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    while dual_constraint(r, hi) > target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings >= BRACKET_DOUBLINGS {
            return Err(Error::BracketFailure(doublings));
        }
    }
    // The constraint is strictly decreasing in the level; plain bisection to
    // floating-point resolution.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dual_constraint(r, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Dual value `gamma mean(R / (gamma - R)) + gamma r^2` at the optimal level.
/// This is the worst-case expected regret of a controller whose regret
/// density is `r`.
pub fn dual_value(r: &[f64], radius: f64) -> Result<(f64, f64)> {
    let level = bisect_gamma(r, radius)?;
    if level.is_infinite() {
        return Ok((0.0, level));
    }
    let avg = r.iter().map(|&x| x / (level - x)).sum::<f64>() / r.len() as f64;
    Ok((level * avg + level * radius * radius, level))
}

/// Solution of `X = Cbar' Cbar + Abar' X Abar`.
pub fn regret_gramian(ricc: &RiccatiData) -> Result<Mat> {
    linalg::solve_discrete_lyapunov(&ricc.abar, &(ricc.cbar.transpose() * &ricc.cbar))
}

/// Objective `Phi = Gamma' X Gamma` for a finite parameter.
pub fn worst_case_regret(param: &GammaParameter, ricc: &RiccatiData) -> Result<f64> {
    let x = regret_gramian(ricc)?;
    Ok(param.vector.dot(&(&x * &param.vector)))
}

/// `N*(z) = (1 + sqrt(1 + 4 ||S(z)||^2 / gamma))^2 / 4` at any unit-circle point.
pub fn eval_nstar(param: &GammaParameter, ricc: &RiccatiData, z: C64) -> Result<f64> {
    if param.level.is_infinite() {
        return Ok(1.0);
    }
    let s = anticausal_part_tl(&param.vector, ricc, z)?;
    let q = linalg::cnorm(&s).powi(2);
    Ok(0.25 * (1.0 + (1.0 + 4.0 * q / param.level).sqrt()).powi(2))
}

/// Everything the solver derives from one density iterate.
struct Linearization {
    l: FactorSamples,
    gamma: Vector,
    gradient: Vec<f64>,
    level: f64,
}

fn linearize(m: &SpectrumSamples, table: &ResolventTable, radius: f64) -> Result<Linearization> {
    let l = spectral::spectral_factor_dft(m)?;
    let gamma = table.gamma(&l)?;
    let gradient = gradient_on_grid(table, &gamma, &l)?;
    let level = bisect_gamma(&gradient, radius)?;
    Ok(Linearization { l, gamma, gradient, level })
}

fn best_response(gradient: &[f64], level: f64) -> Vec<f64> {
    if level.is_infinite() {
        return vec![1.0; gradient.len()];
    }
    gradient.iter().map(|&x| (1.0 - x / level).powi(-2)).collect()
}

/// Initial iterate `M_0 = 1` (the nominal, white spectrum).
pub fn initial_state(table: &ResolventTable, x: &Mat, radius: f64) -> Result<SolverState> {
    let m = SpectrumSamples::constant(table.grid(), 1.0)?;
    let lin = linearize(&m, table, radius)?;
    Ok(SolverState {
        k: 0,
        objective: lin.gamma.dot(&(x * &lin.gamma)),
        param: GammaParameter { vector: lin.gamma, level: lin.level },
        l: lin.l,
        m,
        step: 1.0,
    })
}

/// One conditional-gradient step `M_{k+1} = (1 - eta) M_k + eta M~_k` with
/// `eta = 2 / (k + 2)`. Returns the new state and the record for step `k`.
pub fn frank_wolfe_step(
    state: &SolverState,
    table: &ResolventTable,
    x: &Mat,
    radius: f64,
) -> Result<(SolverState, TraceRecord)> {
    let lin = Linearization {
        l: state.l.clone(),
        gamma: state.param.vector.clone(),
        gradient: gradient_on_grid(table, &state.param.vector, &state.l)?,
        level: state.param.level,
    };
    let target = best_response(&lin.gradient, lin.level);
    let eta = 2.0 / (state.k as f64 + 2.0);
    let current = state.m.values();
    let gap = lin
        .gradient
        .iter()
        .zip(&target)
        .zip(current)
        .map(|((g, t), m)| g * (t - m))
        .sum::<f64>()
        / current.len() as f64;
    let next: Vec<f64> = current.iter().zip(&target).map(|(m, t)| (1.0 - eta) * m + eta * t).collect();
    let diff = current.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = current.iter().map(|a| a * a).sum::<f64>().sqrt();
    let change = diff / norm;

    let record = TraceRecord {
        k: state.k,
        objective: state.objective,
        gap,
        gamma: lin.level,
        step: eta,
        change,
    };
    let m = SpectrumSamples::new(table.grid(), next)?;
    let lin = linearize(&m, table, radius)?;
    let next_state = SolverState {
        k: state.k + 1,
        objective: lin.gamma.dot(&(x * &lin.gamma)),
        param: GammaParameter { vector: lin.gamma, level: lin.level },
        l: lin.l,
        m,
        step: eta,
    };
    Ok((next_state, record))
}

/// Runs the solver on a plant.
pub fn synthesize(model: &StateSpaceModel, radius: f64, config: &SynthesisConfig) -> Result<SynthesisResult> {
    synthesize_with(&sysmodel::riccati(model)?, radius, config)
}

/// Runs the solver from precomputed Riccati data.
///
/// Stops when the relative grid change of the iterate drops to `config.tol`
/// or after `config.max_iter` steps; the latter is reported through
/// `converged = false` rather than an error so callers keep the iterate.
pub fn synthesize_with(ricc: &RiccatiData, radius: f64, config: &SynthesisConfig) -> Result<SynthesisResult> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if !(config.tol >= 0.0) || config.max_iter == 0 {
        return Err(Error::InvalidArgument("tolerance must be nonnegative and max_iter positive".into()));
    }
    let grid = FrequencyGrid::new(config.grid)?;
    let table = ResolventTable::new(ricc, grid)?;
    let x = regret_gramian(ricc)?;
    let mut state = initial_state(&table, &x, radius)?;
    let mut trace = Vec::new();
    let mut converged = false;
    while state.k < config.max_iter {
        let (next, record) = frank_wolfe_step(&state, &table, &x, radius)?;
        trace.push(record);
        state = next;
        if record.change <= config.tol {
            converged = true;
            break;
        }
    }
    finish(ricc, &table, radius, state, trace, converged)
}

fn finish(
    ricc: &RiccatiData,
    table: &ResolventTable,
    radius: f64,
    state: SolverState,
    trace: Vec<TraceRecord>,
    converged: bool,
) -> Result<SynthesisResult> {
    let energy = table.anticausal_energy(&state.param.vector);
    let regret_grid = mean(&energy);
    let regret = worst_case_regret(&state.param, ricc)?;
    let residual = fixed_point_residual_on(&state.param, &state.l, ricc, table.grid())?;
    let transport = mean(&state.m.values().iter().map(|m| (m.sqrt() - 1.0).powi(2)).collect::<Vec<_>>());
    Ok(SynthesisResult {
        radius,
        param: state.param,
        m: state.m,
        factor: state.l,
        regret,
        regret_grid,
        iterations: state.k,
        converged,
        residual,
        transport,
        trace,
    })
}

/// `max_z |N*(z) - |L(z)|^2| / N*(z)` over an arbitrary grid, with `L`
/// evaluated off the solver grid through its cepstrum.
pub fn fixed_point_residual_on(
    param: &GammaParameter,
    factor: &FactorSamples,
    ricc: &RiccatiData,
    grid: FrequencyGrid,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for z in grid.points() {
        let n = eval_nstar(param, ricc, z)?;
        worst = worst.max((n - factor.eval(z).norm_sqr()).abs() / n);
    }
    Ok(worst)
}

impl SynthesisResult {
    /// Fixed-point residual on a grid `factor` times finer than the solver grid.
    pub fn residual_refined(&self, ricc: &RiccatiData, factor: usize) -> Result<f64> {
        let grid = FrequencyGrid::new(self.m.grid().len() * factor)?;
        fixed_point_residual_on(&self.param, &self.factor, ricc, grid)
    }

    pub fn summary(&self) -> SynthesisSummary {
        SynthesisSummary {
            radius: self.radius,
            grid: self.m.grid().len(),
            gamma_star: self.param.level,
            gamma_vector: self.param.vector.iter().cloned().collect(),
            regret: self.regret,
            regret_grid: self.regret_grid,
            residual: self.residual,
            transport: self.transport,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// Serializable digest of a solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSummary {
    pub radius: f64,
    pub grid: usize,
    pub gamma_star: f64,
    pub gamma_vector: Vec<f64>,
    pub regret: f64,
    pub regret_grid: f64,
    pub residual: f64,
    pub transport: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SynthesisSummary {
    pub fn param(&self) -> GammaParameter {
        GammaParameter { vector: Vector::from_vec(self.gamma_vector.clone()), level: self.gamma_star }
    }
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    for rec in trace {
        w.serialize(rec).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Regret density `||Delta(z)(K(z) - K0(z))||^2` of a controller on a grid.
pub fn regret_density(
    ricc: &RiccatiData,
    grid: FrequencyGrid,
    controller: impl Fn(C64) -> Result<CMat>,
) -> Result<Vec<f64>> {
    grid.points()
        .map(|z| {
            let (delta, _) = sysmodel::eval_delta(ricc, z)?;
            let k0 = sysmodel::eval_noncausal_k0(&ricc.model, z)?;
            let e = delta * (controller(z)? - k0);
            Ok(linalg::cnorm(&e).powi(2))
        })
        .collect()
}

/// Worst-case expected regret of an arbitrary causal controller, through the
/// one-dimensional dual on a frequency grid. Returns the value and its level.
pub fn controller_regret(
    ricc: &RiccatiData,
    grid: FrequencyGrid,
    radius: f64,
    controller: impl Fn(C64) -> Result<CMat>,
) -> Result<(f64, f64)> {
    dual_value(&regret_density(ricc, grid, controller)?, radius)
}

/// Non-rational optimal controller `Delta^{-1}(U + T - S / L)` at any point,
/// where `S` is the anticausal part built from the converged parameter.
pub fn eval_kstar(ricc: &RiccatiData, param: &GammaParameter, factor: &FactorSamples, z: C64) -> Result<CMat> {
    let (t, u) = sysmodel::eval_split_t_u(ricc, z)?;
    let (_, dinv) = sysmodel::eval_delta(ricc, z)?;
    let l = factor.eval(z);
    if l.norm() < 1e-10 {
        return Err(Error::DivisionNearZero(l.norm()));
    }
    let s = anticausal_part_tl(&param.vector, ricc, z)?;
    Ok(dinv * (u + t - s / l))
}

/// Evaluates the objective for an arbitrary density (used to probe
/// homogeneity and concavity).
pub fn objective(m: &SpectrumSamples, table: &ResolventTable, x: &Mat) -> Result<f64> {
    let l = spectral::spectral_factor_dft(m)?;
    let g = table.gamma(&l)?;
    Ok(g.dot(&(x * g.clone())))
}

/// Convenience: `K_H2` as a closure-friendly evaluator.
pub fn h2_controller(ricc: &RiccatiData) -> impl Fn(C64) -> Result<CMat> + '_ {
    move |z| sysmodel::eval_h2(ricc, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::sysmodel::riccati;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_gives_sentinel() {
        assert_eq!(bisect_gamma(&[0.0; 8], 1.0).unwrap(), f64::INFINITY);
        assert_eq!(dual_value(&[0.0; 8], 2.0).unwrap().0, 0.0);
    }

    #[test]
    fn constant_gradient_closed_form() {
        for &(c, r) in &[(1.0, 1.0), (3.5, 0.2), (0.01, 4.0)] {
            let level = bisect_gamma(&[c; 32], r).unwrap();
            let expected = c * (1.0 + 1.0 / r);
            assert!((level - expected).abs() <= 1e-12 * expected, "{c} {r}");
            let m = best_response(&[c; 4], level);
            assert!((m[0] - (1.0 + r).powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn bisection_meets_tolerance() {
        let r: Vec<f64> = (0..64).map(|k| 1.0 + (k as f64 * 0.3).sin().powi(2)).collect();
        for radius in [0.01, 1.0, 3.0] {
            let level = bisect_gamma(&r, radius).unwrap();
            let g = dual_constraint(&r, level);
            assert!((g - radius * radius).abs() <= 1e-10 * (radius * radius).max(1.0));
        }
    }

    #[test]
    fn dual_value_matches_level_grid_search() {
        let r: Vec<f64> = (0..128).map(|k| 2.0 + (k as f64 * 0.1).cos()).collect();
        let radius = 0.7;
        let (value, level) = dual_value(&r, radius).unwrap();
        let peak = r.iter().cloned().fold(0.0, f64::max);
        let f = |g: f64| g * mean(&r.iter().map(|x| x / (g - x)).collect::<Vec<_>>()) + g * radius * radius;
        let mut best = f64::INFINITY;
        for i in 1..200_000 {
            best = best.min(f(peak * (1.0 + i as f64 * 2e-5)));
        }
        assert!((value - best).abs() <= 1e-6 * value);
        assert!(level > peak);
    }

    fn scalar_setup() -> (RiccatiData, ResolventTable, Mat) {
        let r = riccati(&benchmarks::scalar()).unwrap();
        let t = ResolventTable::new(&r, FrequencyGrid::new(1024).unwrap()).unwrap();
        let x = regret_gramian(&r).unwrap();
        (r, t, x)
    }

    #[test]
    fn scalar_first_gradient_and_regret() {
        let (r, table, x) = scalar_setup();
        let state = initial_state(&table, &x, 1.0).unwrap();
        let (cb, bb, ab) = (r.cbar[(0, 0)], r.bbar[(0, 0)], r.abar[(0, 0)]);
        for k in 0..12 {
            let z = linalg::unit(0.5 * k as f64 + 0.1);
            let expected = (cb * bb).powi(2) / (1.0 - z * ab).norm_sqr();
            assert!((gradient_rk(&state, &r, z).unwrap() - expected).abs() < 1e-12);
        }
        let expected = (cb * bb).powi(2) / (1.0 - ab * ab);
        assert!((state.objective - expected).abs() < 1e-13);
        assert!((worst_case_regret(&state.param, &r).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn zero_parameter_edge_cases() {
        let (r, _, _) = scalar_setup();
        let p = GammaParameter::zero(1);
        assert_eq!(worst_case_regret(&p, &r).unwrap(), 0.0);
        assert_eq!(eval_nstar(&p, &r, linalg::unit(0.3)).unwrap(), 1.0);
        let finite = GammaParameter { vector: Vector::zeros(1), level: 2.0 };
        assert_eq!(eval_nstar(&finite, &r, linalg::unit(0.3)).unwrap(), 1.0);
        let huge = GammaParameter { vector: Vector::from_element(1, 1.0), level: 1e300 };
        assert!((eval_nstar(&huge, &r, linalg::unit(0.3)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_disturbance_is_an_immediate_fixed_point() {
        let one = Mat::from_element(1, 1, 1.0);
        let m = StateSpaceModel::from_parts_unchecked(
            Mat::from_element(1, 1, 0.5),
            one.clone(),
            Mat::zeros(1, 1),
            one,
        )
        .unwrap();
        let res = synthesize(&m, 1.0, &SynthesisConfig { grid: 64, ..Default::default() }).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert!(res.m.values().iter().all(|&v| v == 1.0));
        assert_eq!(res.regret, 0.0);
    }

    #[test]
    fn scalar_synthesis_is_consistent() {
        let (r, table, _) = scalar_setup();
        let res = synthesize_with(&r, 1.0, &SynthesisConfig { grid: 1024, tol: 1e-8, max_iter: 5000 }).unwrap();
        assert!(res.converged);
        assert!((res.regret - res.regret_grid).abs() <= 1e-6 * res.regret);
        assert!(res.residual < 1e-4);
        assert!(res.residual_refined(&r, 2).unwrap() < 1e-4);
        // The dual of the non-rational controller reproduces the objective.
        let (value, _) =
            controller_regret(&r, table.grid(), 1.0, |z| eval_kstar(&r, &res.param, &res.factor, z)).unwrap();
        assert!((value - res.regret).abs() <= 1e-3 * res.regret, "{value} {}", res.regret);
        assert!(res.trace.iter().all(|t| t.gap >= -1e-12));
        assert!((res.transport - 1.0).abs() < 1e-2);
    }

    #[test]
    fn tiny_radius_recovers_h2() {
        let r = riccati(&benchmarks::ac15()).unwrap();
        let res = synthesize_with(&r, 1e-4, &SynthesisConfig { grid: 1024, ..Default::default() }).unwrap();
        assert!(res.m.values().iter().all(|&v| (v - 1.0).abs() <= 1e-2));
        let grid = res.m.grid();
        let mut peak: f64 = 0.0;
        let mut err: f64 = 0.0;
        for z in grid.points() {
            let h2 = sysmodel::eval_h2(&r, z).unwrap();
            let ks = eval_kstar(&r, &res.param, &res.factor, z).unwrap();
            peak = peak.max(linalg::cnorm(&h2));
            err = err.max(linalg::cnorm(&(ks - h2)));
        }
        assert!(err <= 1e-2 * peak, "{err} {peak}");
    }

    #[test]
    fn h2_controller_has_positive_regret_and_kstar_beats_it() {
        let (r, table, _) = scalar_setup();
        let res = synthesize_with(&r, 1.0, &SynthesisConfig { grid: 1024, ..Default::default() }).unwrap();
        let (h2, _) = controller_regret(&r, table.grid(), 1.0, h2_controller(&r)).unwrap();
        assert!(h2 >= res.regret * (1.0 - 1e-6));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn objective_is_positively_homogeneous(scale in 0.1f64..10.0, bump in 0.0f64..0.9) {
            let (_, table, x) = scalar_setup();
            let m = SpectrumSamples::from_fn(table.grid(), |z| 1.0 + bump * z.re).unwrap();
            let scaled = SpectrumSamples::new(table.grid(), m.values().iter().map(|v| v * scale).collect()).unwrap();
            let a = objective(&m, &table, &x).unwrap();
            let b = objective(&scaled, &table, &x).unwrap();
            prop_assert!((b - scale * a).abs() <= 1e-10 * b.abs().max(1.0));
        }

        #[test]
        fn iterates_stay_positive_and_symmetric(radius in 0.05f64..3.0) {
            let (_, table, x) = scalar_setup();
            let mut state = initial_state(&table, &x, radius).unwrap();
            for _ in 0..5 {
                let floor = state.m.values().iter().cloned().fold(f64::INFINITY, f64::min);
                let eta = 2.0 / (state.k as f64 + 2.0);
                let (next, rec) = frank_wolfe_step(&state, &table, &x, radius).unwrap();
                prop_assert!(rec.gap >= -1e-12);
                let new_floor = next.m.values().iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert!(new_floor >= (1.0 - eta) * floor);
                let g = table.grid();
                for k in 0..g.len() {
                    prop_assert!((next.m.values()[k] - next.m.values()[g.mirror(k)]).abs() <= 1e-12 * next.m.values()[k]);
                }
                state = next;
            }
        }

        #[test]
        fn dual_constraint_is_decreasing(vals in proptest::collection::vec(0.0f64..5.0, 4..32), radius in 0.01f64..5.0) {
            prop_assume!(vals.iter().any(|&v| v > 0.0));
            let level = bisect_gamma(&vals, radius).unwrap();
            let peak = vals.iter().cloned().fold(0.0, f64::max);
            prop_assert!(level > peak);
            prop_assert!(dual_constraint(&vals, level * 0.999 + peak * 0.001) >= dual_constraint(&vals, level));
            prop_assert!(dual_constraint(&vals, level * 1.01) <= dual_constraint(&vals, level));
        }
    }
}
