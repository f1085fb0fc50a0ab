//! Ground-truth oracles and experiments.
//!
//! Dense finite-horizon operators give an independent route to the regret of
//! any controller and to the finite-horizon saddle point; the simulator runs
//! realized controllers against sampled disturbances.

mod finite;
mod sim;

pub use finite::{
    build_finite_operators, build_finite_operators_capped, causal_part, dense_controller, finite_dual_regret,
    finite_fw_oracle, finite_h2, quantile_deviation, FiniteHorizonOperators, FiniteOracle, FiniteRegret,
    OracleConfig, DEFAULT_DENSE_CAP,
};
pub use sim::{
    simulate, worst_case_filter, ControllerStats, DisturbanceSpec, NamedController, RegretReport, SimController,
    WorstCaseFilter,
};

use serde::{Deserialize, Serialize};

use crate::drro::{self, SynthesisConfig, SynthesisResult};
use crate::error::Result;
use crate::ratapprox::{self, RationalSpectrum};
use crate::realize::{self, ClosedLoopReport, FactorRealization, RealizedController};
use crate::spectral::FrequencyGrid;
use crate::sysmodel::RiccatiData;

/// Settings for the rational approximation stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproximationConfig {
    pub degree: usize,
    /// Grid on which `N*` is sampled for the linear programs.
    pub lp_grid: usize,
    /// Bisection stops when the bracket is below this fraction of the span.
    pub rel_tol: f64,
}

impl Default for ApproximationConfig {
    fn default() -> Self {
        Self { degree: 3, lp_grid: 16384, rel_tol: 1e-3 }
    }
}

/// A realized rational controller together with its certificates.
#[derive(Clone, Debug)]
pub struct RationalController {
    pub spectrum: RationalSpectrum,
    pub factor: FactorRealization,
    pub controller: RealizedController,
    pub closed_loop: ClosedLoopReport,
    /// Worst-case expected regret at the synthesis radius.
    pub regret: f64,
    pub gamma: f64,
}

/// Fits, factors and realizes a rational controller from a converged run,
/// then evaluates its worst-case regret on the solver grid.
pub fn approximate_and_realize(
    ricc: &RiccatiData,
    result: &SynthesisResult,
    cfg: &ApproximationConfig,
) -> Result<RationalController> {
    let samples = ratapprox::sample_nstar(&result.param, ricc, cfg.lp_grid)?;
    let spectrum = ratapprox::best_epsilon(&samples, cfg.degree, cfg.rel_tol)?;
    let (factor, controller) = realize::realize_rational(ricc, &spectrum)?;
    let closed_loop = controller.closed_loop_check(&ricc.model)?;
    let grid = result.m.grid();
    let (regret, gamma) = drro::controller_regret(ricc, grid, result.radius, |z| controller.transfer(z))?;
    Ok(RationalController { spectrum, factor, controller, closed_loop, regret, gamma })
}

/// Worst-case expected regret of the non-rational optimum, evaluated through
/// the dual on the solver grid (an independent check of `result.regret`).
pub fn nonrational_regret(ricc: &RiccatiData, result: &SynthesisResult) -> Result<(f64, f64)> {
    drro::controller_regret(ricc, result.m.grid(), result.radius, |z| {
        drro::eval_kstar(ricc, &result.param, &result.factor, z)
    })
}

#[derive(Clone, Debug)]
pub struct Baselines {
    pub h2: RealizedController,
    pub ro_proxy: RationalController,
    pub ro_synthesis: SynthesisResult,
}

/// H2 and a large-radius proxy for the regret-optimal controller.
pub fn baseline_controllers(
    ricc: &RiccatiData,
    r_proxy: f64,
    synth: &SynthesisConfig,
    approx: &ApproximationConfig,
) -> Result<Baselines> {
    let h2 = realize::h2_controller(ricc)?;
    let ro_synthesis = drro::synthesize_with(ricc, r_proxy, synth)?;
    let ro_proxy = approximate_and_realize(ricc, &ro_synthesis, approx)?;
    Ok(Baselines { h2, ro_proxy, ro_synthesis })
}

/// Worst-case regret of the H2 controller at a radius.
pub fn h2_regret(ricc: &RiccatiData, grid: FrequencyGrid, radius: f64) -> Result<(f64, f64)> {
    drro::controller_regret(ricc, grid, radius, drro::h2_controller(ricc))
}
