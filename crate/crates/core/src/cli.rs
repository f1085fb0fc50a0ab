//! Batch front end: synthesize, approximate, realize, evaluate and simulate.
//!
//! Each subcommand reads one TOML run configuration, applies flag overrides
//! (flags beat the file, the file beats defaults), copies the configuration
//! verbatim into the output directory next to the resolved values, and writes
//! its artifacts under `<out>/r_<radius>/`. Later stages reload what earlier
//! stages wrote, so they can be run separately.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::drro::{self, GammaParameter, SynthesisConfig, SynthesisSummary};
use crate::error::{Error, ErrorClass, Result};
use crate::eval::{
    self, build_finite_operators, dense_controller, finite_dual_regret, finite_fw_oracle, simulate,
    worst_case_filter, ApproximationConfig, DisturbanceSpec, NamedController, OracleConfig, RegretReport,
    SimController,
};
use crate::io;
use crate::ratapprox::{self, RationalSpectrum};
use crate::realize::{self, ClosedLoopReport, RealizedController};
use crate::spectral::{spectral_factor_dft, FactorSamples, FrequencyGrid, SpectrumSamples};
use crate::sysmodel::{riccati, RiccatiData, StateSpaceModel};
use crate::{benchmarks, linalg};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DRRO_OUT";
const DEFAULT_OUT: &str = "drro-out";
const BUILTIN_PREFIX: &str = "builtin:";

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_NON_CONVERGENCE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "drro", version, about = "Distributionally robust regret-optimal controller synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve for the worst-case disturbance spectrum.
    Synthesize,
    /// Fit a rational spectrum to a finished synthesis.
    Approximate,
    /// Factor the rational fit and realize the controller.
    Realize,
    /// Evaluate worst-case regret of the realized controller and baselines.
    Evaluate,
    /// Monte-Carlo simulation of the realized controller and baselines.
    Simulate,
    /// Run every stage for every configured radius.
    Pipeline,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run a single radius instead of the configured list.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Degree of the rational approximation.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Frequency grid size of the solver.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Master seed for simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the configured one, then $DRRO_OUT.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Horizon of the dense finite-horizon regret evaluation.
    pub horizon: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { horizon: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// Any of white, uniform, sinusoid, worst_case_infinite, worst_case_finite.
    pub disturbances: Vec<String>,
    /// FIR length of the worst-case coloring filter.
    pub taps: usize,
    /// Block length of the replayed finite-horizon controller; 0 disables it.
    pub replay_block: usize,
    pub amplitude: f64,
    pub frequency: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon: 210,
            trials: 1000,
            seed: 0,
            disturbances: vec!["white".into(), "worst_case_infinite".into()],
            taps: 512,
            replay_block: 30,
            amplitude: 1.0,
            frequency: 0.5,
        }
    }
}

const DISTURBANCES: [&str; 5] = ["white", "uniform", "sinusoid", "worst_case_infinite", "worst_case_finite"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Plant document path, relative to the configuration file, or
    /// `builtin:<name>` for a bundled benchmark.
    pub model: String,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub approximation: ApproximationConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_radii() -> Vec<f64> {
    vec![1.0]
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {}", origin.display(), e.message())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(r) = o.radius {
            self.radii = vec![r];
        }
        if let Some(m) = o.degree {
            self.approximation.degree = m;
        }
        if let Some(n) = o.grid {
            self.synthesis.grid = n;
        }
        if let Some(s) = o.seed {
            self.simulation.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.radii.is_empty() {
            return bad("at least one radius is required".into());
        }
        if let Some(r) = self.radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return bad(format!("radius must be positive and finite, got {r}"));
        }
        let pow2 = |n: usize| n >= 8 && n.is_power_of_two();
        if !pow2(self.synthesis.grid) {
            return bad(format!("synthesis.grid must be a power of two >= 8, got {}", self.synthesis.grid));
        }
        if !(self.synthesis.tol > 0.0) || self.synthesis.max_iter == 0 {
            return bad("synthesis.tol and synthesis.max_iter must be positive".into());
        }
        if !pow2(self.approximation.lp_grid) {
            return bad(format!("approximation.lp_grid must be a power of two >= 8, got {}", self.approximation.lp_grid));
        }
        if !(self.approximation.rel_tol > 0.0 && self.approximation.rel_tol < 1.0) {
            return bad("approximation.rel_tol must lie in (0, 1)".into());
        }
        if self.evaluation.horizon < 2 {
            return bad("evaluation.horizon must be at least 2".into());
        }
        let s = &self.simulation;
        if s.horizon == 0 || s.trials == 0 || s.taps == 0 {
            return bad("simulation horizon, trials and taps must be positive".into());
        }
        if s.replay_block == 1 {
            return bad("simulation.replay_block must be 0 or at least 2".into());
        }
        if !(s.amplitude > 0.0) || !(s.frequency > 0.0 && s.frequency <= std::f64::consts::PI) {
            return bad("simulation.amplitude must be positive and frequency in (0, pi]".into());
        }
        if let Some(d) = s.disturbances.iter().find(|d| !DISTURBANCES.contains(&d.as_str())) {
            return bad(format!("unknown disturbance kind {d}"));
        }
        Ok(())
    }

    fn load_model(&self, base: &Path) -> Result<StateSpaceModel> {
        match self.model.strip_prefix(BUILTIN_PREFIX) {
            Some(name) => benchmarks::by_name(name).map_err(|e| Error::Config(e.to_string())),
            None => io::read_model(&base.join(&self.model)),
        }
    }
}

/// Everything a stage needs.
pub struct Run {
    pub config: RunConfig,
    pub model: StateSpaceModel,
    pub ricc: RiccatiData,
    pub out: PathBuf,
}

impl Run {
    /// Resolves the output directory (flag, file, environment, default),
    /// loads the model and solves the Riccati equation.
    pub fn new(config: RunConfig, base: &Path) -> Result<Self> {
        config.validate()?;
        let out = config
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let model = config.load_model(base)?;
        let ricc = riccati(&model)?;
        Ok(Self { config, model, ricc, out })
    }

    pub fn radius_dir(&self, radius: f64) -> Result<PathBuf> {
        let dir = self.out.join(format!("r_{radius}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    io::write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// The parts of a synthesis later stages need.
pub struct SynthArtifacts {
    pub summary: SynthesisSummary,
    pub m: SpectrumSamples,
    pub factor: FactorSamples,
}

impl SynthArtifacts {
    fn param(&self) -> GammaParameter {
        self.summary.param()
    }

    fn grid(&self) -> FrequencyGrid {
        self.m.grid()
    }
}

pub fn stage_synthesize(run: &Run, radius: f64) -> Result<SynthArtifacts> {
    let dir = run.radius_dir(radius)?;
    let res = drro::synthesize_with(&run.ricc, radius, &run.config.synthesis)?;
    let summary = res.summary();
    write_json(&dir.join("synthesis.json"), &summary)?;
    drro::write_trace_csv(&dir.join("trace.csv"), &res.trace)?;
    res.m.write_csv(&dir.join("m_star.csv"))?;
    let grid = res.m.grid();
    let nstar: Vec<f64> = grid.points().map(|z| drro::eval_nstar(&res.param, &run.ricc, z)).collect::<Result<_>>()?;
    SpectrumSamples::new(grid, nstar)?.write_csv(&dir.join("n_star.csv"))?;
    if !res.converged {
        return Err(Error::SolverNonConvergent { stage: "Frank-Wolfe", iterations: res.iterations });
    }
    Ok(SynthArtifacts { summary, m: res.m, factor: res.factor })
}

pub fn load_synthesis(run: &Run, radius: f64) -> Result<SynthArtifacts> {
    let dir = run.radius_dir(radius)?;
    let summary: SynthesisSummary = read_json(&dir.join("synthesis.json"))?;
    let m = SpectrumSamples::read_csv(&dir.join("m_star.csv"))?;
    let factor = spectral_factor_dft(&m)?;
    Ok(SynthArtifacts { summary, m, factor })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub degree: usize,
    pub epsilon: f64,
    /// Largest `|P/Q - N*| / N*` on the fitting grid.
    pub relative_error: f64,
}

pub fn stage_approximate(run: &Run, radius: f64, synth: &SynthArtifacts) -> Result<RationalSpectrum> {
    let dir = run.radius_dir(radius)?;
    let cfg = &run.config.approximation;
    let samples = ratapprox::sample_nstar(&synth.param(), &run.ricc, cfg.lp_grid)?;
    let spectrum = ratapprox::best_epsilon(&samples, cfg.degree, cfg.rel_tol)?;
    let grid = FrequencyGrid::new(cfg.lp_grid)?;
    let relative_error = grid
        .points()
        .zip(&samples)
        .map(|(z, n)| (spectrum.eval(z) - n).abs() / n)
        .fold(0.0, f64::max);
    io::write_text(&dir.join("rational.toml"), &spectrum.to_toml())?;
    write_json(
        &dir.join("approximation.json"),
        &ApproximationReport { degree: spectrum.degree, epsilon: spectrum.epsilon, relative_error },
    )?;
    Ok(spectrum)
}

pub fn load_rational(run: &Run, radius: f64) -> Result<RationalSpectrum> {
    let path = run.radius_dir(radius)?.join("rational.toml");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    RationalSpectrum::from_toml(&text).map_err(|e| Error::parse(&path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopDocument {
    pub spectral_radius: f64,
    pub stable: bool,
    pub controller_order: usize,
    pub replica_states: usize,
}

pub fn stage_realize(run: &Run, radius: f64, spectrum: &RationalSpectrum) -> Result<RealizedController> {
    let dir = run.radius_dir(radius)?;
    let (_, ctrl) = realize::realize_rational(&run.ricc, spectrum)?;
    let ClosedLoopReport { radius: rho, stable } = ctrl.closed_loop_check(&run.model)?;
    io::controller_document(&ctrl, &format!("drro r={radius} m={}", spectrum.degree))
        .write(&dir.join("controller.toml"))?;
    write_json(
        &dir.join("closed_loop.json"),
        &ClosedLoopDocument {
            spectral_radius: rho,
            stable,
            controller_order: ctrl.order(),
            replica_states: ctrl.replica_states,
        },
    )?;
    if !stable {
        return Err(Error::NotStabilizing { radius: rho });
    }
    Ok(ctrl)
}

pub fn load_controller(run: &Run, radius: f64) -> Result<RealizedController> {
    io::read_controller(&run.radius_dir(radius)?.join("controller.toml"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub radius: f64,
    /// Worst-case expected regret of the non-rational optimum.
    pub drro_regret: f64,
    /// The same, recomputed through the dual from the controller itself.
    pub drro_regret_dual: f64,
    pub rational_regret: f64,
    pub rational_gamma: f64,
    pub h2_regret: f64,
    pub finite_horizon: usize,
    /// Per-step finite-horizon worst-case regret of the truncated rational
    /// controller.
    pub finite_per_step_regret: f64,
}

pub fn stage_evaluate(run: &Run, radius: f64, synth: &SynthArtifacts, ctrl: &RealizedController) -> Result<Evaluation> {
    let dir = run.radius_dir(radius)?;
    let ricc = &run.ricc;
    let grid = synth.grid();
    let param = synth.param();
    let (drro_regret_dual, _) =
        drro::controller_regret(ricc, grid, radius, |z| drro::eval_kstar(ricc, &param, &synth.factor, z))?;
    let (rational_regret, rational_gamma) = drro::controller_regret(ricc, grid, radius, |z| ctrl.transfer(z))?;
    let (h2_regret, _) = eval::h2_regret(ricc, grid, radius)?;
    let horizon = run.config.evaluation.horizon;
    let ops = build_finite_operators(&run.model, horizon)?;
    let finite = finite_dual_regret(&ops, &dense_controller(ctrl, horizon), radius)?;
    let ev = Evaluation {
        radius,
        drro_regret: synth.summary.regret,
        drro_regret_dual,
        rational_regret,
        rational_gamma,
        h2_regret,
        finite_horizon: horizon,
        finite_per_step_regret: finite.per_step,
    };
    write_json(&dir.join("evaluation.json"), &ev)?;
    Ok(ev)
}

pub fn stage_simulate(
    run: &Run,
    radius: f64,
    synth: &SynthArtifacts,
    ctrl: &RealizedController,
) -> Result<Vec<RegretReport>> {
    let dir = run.radius_dir(radius)?;
    let s = &run.config.simulation;
    let ricc = &run.ricc;
    let grid = synth.grid();
    let h2 = realize::h2_controller(ricc)?;
    let mut controllers = vec![
        NamedController::new("drro", SimController::Realized(ctrl.clone())),
        NamedController::new("h2", SimController::Realized(h2.clone())),
    ];
    let mut regrets = vec![
        Some(drro::controller_regret(ricc, grid, radius, |z| ctrl.transfer(z))?.0),
        Some(eval::h2_regret(ricc, grid, radius)?.0),
    ];
    if s.replay_block >= 2 {
        let ops = build_finite_operators(&run.model, s.replay_block)?;
        let oracle = finite_fw_oracle(&ops, radius, &OracleConfig::default())?;
        regrets.push(Some(oracle.regret.per_step));
        controllers.push(NamedController::new(
            format!("drro_finite_{}", s.replay_block),
            SimController::replayed(&ops, oracle.controller)?,
        ));
    }
    let mut reports = Vec::new();
    for kind in &s.disturbances {
        let dist = match kind.as_str() {
            "white" => DisturbanceSpec::White { amplitude: s.amplitude },
            "uniform" => DisturbanceSpec::Uniform { amplitude: s.amplitude },
            "sinusoid" => DisturbanceSpec::Sinusoid { amplitude: s.amplitude, frequency: s.frequency, phase: None },
            "worst_case_infinite" => {
                DisturbanceSpec::WorstCaseInfinite { radius, filter: worst_case_filter(&synth.factor, s.taps) }
            }
            "worst_case_finite" => {
                let horizon = run.config.evaluation.horizon;
                let ops = build_finite_operators(&run.model, horizon)?;
                let fr = finite_dual_regret(&ops, &dense_controller(ctrl, horizon), radius)?;
                DisturbanceSpec::WorstCaseFinite { radius, cov_sqrt: fr.covariance_sqrt() }
            }
            other => return Err(Error::Config(format!("unknown disturbance kind {other}"))),
        };
        let mut report = simulate(&run.model, &controllers, &dist, s.horizon, s.trials, s.seed)?;
        for (stats, regret) in report.controllers.iter_mut().zip(&regrets) {
            stats.regret = *regret;
        }
        report.write_csv(&dir.join(format!("simulation_{kind}.csv")))?;
        write_json(&dir.join(format!("simulation_{kind}.json")), &report)?;
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub disturbance: String,
    pub controller: String,
    pub mean_cost: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub radius: f64,
    pub drro_regret: f64,
    pub rational_regret: f64,
    pub h2_regret: f64,
    pub gamma_star: f64,
    pub epsilon: f64,
    pub closed_loop_radius: f64,
    pub finite_per_step_regret: f64,
    pub iterations: usize,
    pub simulation: Vec<SimulationRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub model: String,
    pub degree: usize,
    pub grid: usize,
    pub seed: u64,
    pub rows: Vec<SummaryRow>,
}

impl PipelineSummary {
    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        w.write_record(["radius", "drro", "rational", "h2", "gamma_star", "closed_loop_radius"])
            .map_err(|e| Error::parse(path, e))?;
        for r in &self.rows {
            w.write_record([
                r.radius.to_string(),
                r.drro_regret.to_string(),
                r.rational_regret.to_string(),
                r.h2_regret.to_string(),
                r.gamma_star.to_string(),
                r.closed_loop_radius.to_string(),
            ])
            .map_err(|e| Error::parse(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// All stages for every radius; stops at the first failure, leaving the
/// artifacts of completed stages on disk.
pub fn run_pipeline(run: &Run) -> Result<PipelineSummary> {
    let mut rows = Vec::new();
    for &radius in &run.config.radii {
        let synth = stage_synthesize(run, radius)?;
        let spectrum = stage_approximate(run, radius, &synth)?;
        let ctrl = stage_realize(run, radius, &spectrum)?;
        let ev = stage_evaluate(run, radius, &synth, &ctrl)?;
        let reports = stage_simulate(run, radius, &synth, &ctrl)?;
        let simulation = reports
            .iter()
            .flat_map(|r| {
                r.controllers.iter().map(move |c| SimulationRow {
                    disturbance: r.disturbance.clone(),
                    controller: c.name.clone(),
                    mean_cost: c.mean_cost,
                    half_width: c.half_width,
                })
            })
            .collect();
        rows.push(SummaryRow {
            radius,
            drro_regret: ev.drro_regret,
            rational_regret: ev.rational_regret,
            h2_regret: ev.h2_regret,
            gamma_star: synth.summary.gamma_star,
            epsilon: spectrum.epsilon,
            closed_loop_radius: ctrl.closed_loop_check(&run.model)?.radius,
            finite_per_step_regret: ev.finite_per_step_regret,
            iterations: synth.summary.iterations,
            simulation,
        });
    }
    let summary = PipelineSummary {
        model: run.config.model.clone(),
        degree: run.config.approximation.degree,
        grid: run.config.synthesis.grid,
        seed: run.config.simulation.seed,
        rows,
    };
    write_json(&run.out.join("summary.json"), &summary)?;
    summary.write_csv(&run.out.join("summary.csv"))?;
    Ok(summary)
}

/// Loads and resolves the configuration, then writes the verbatim copy and
/// the resolved values into the output directory.
pub fn prepare(overrides: &Overrides) -> Result<Run> {
    let path = overrides.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = RunConfig::parse(&text, path)?;
    config.apply(overrides);
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let run = Run::new(config, &base)?;
    fs::create_dir_all(&run.out).map_err(|e| Error::io(&run.out, e))?;
    io::write_text(&run.out.join("config.toml"), &text)?;
    write_json(&run.out.join("resolved.json"), &run.config)?;
    Ok(run)
}

fn dispatch(command: Command, run: &Run) -> Result<()> {
    if command == Command::Pipeline {
        let summary = run_pipeline(run)?;
        for r in &summary.rows {
            println!(
                "r={} drro={:.4} rational={:.4} h2={:.4} closed-loop radius={:.4}",
                r.radius, r.drro_regret, r.rational_regret, r.h2_regret, r.closed_loop_radius
            );
        }
        return Ok(());
    }
    for &radius in &run.config.radii {
        match command {
            Command::Synthesize => {
                let s = stage_synthesize(run, radius)?;
                println!(
                    "r={radius} regret={:.6} gamma*={:.6} iterations={}",
                    s.summary.regret, s.summary.gamma_star, s.summary.iterations
                );
            }
            Command::Approximate => {
                let spec = stage_approximate(run, radius, &load_synthesis(run, radius)?)?;
                println!("r={radius} degree={} epsilon={:.6e}", spec.degree, spec.epsilon);
            }
            Command::Realize => {
                let ctrl = stage_realize(run, radius, &load_rational(run, radius)?)?;
                let rho = linalg::spectral_radius(&ctrl.closed_loop_matrix(&run.model)?);
                println!("r={radius} order={} closed-loop radius={rho:.6}", ctrl.order());
            }
            Command::Evaluate => {
                let ev = stage_evaluate(run, radius, &load_synthesis(run, radius)?, &load_controller(run, radius)?)?;
                println!(
                    "r={radius} drro={:.4} rational={:.4} h2={:.4} finite/step={:.4}",
                    ev.drro_regret, ev.rational_regret, ev.h2_regret, ev.finite_per_step_regret
                );
            }
            Command::Simulate => {
                let reports =
                    stage_simulate(run, radius, &load_synthesis(run, radius)?, &load_controller(run, radius)?)?;
                for rep in reports {
                    for c in &rep.controllers {
                        println!(
                            "r={radius} {} {}: {:.4} +- {:.4}",
                            rep.disturbance, c.name, c.mean_cost, c.half_width
                        );
                    }
                }
            }
            Command::Pipeline => unreachable!(),
        }
    }
    Ok(())
}

pub fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::NonConvergence => EXIT_NON_CONVERGENCE,
    }
}

/// Machine-readable error record written to stderr.
#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: u8,
}

/// Parses arguments and runs a command, returning the process exit status.
pub fn execute<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match prepare(&cli.overrides).and_then(|run| dispatch(cli.command, &run)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let record = ErrorRecord { error: e.kind(), message: e.to_string(), exit_code: code };
            eprintln!("{}", serde_json::to_string(&record).expect("error records serialize"));
            code
        }
    }
}
