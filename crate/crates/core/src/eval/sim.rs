//! Monte-Carlo simulation of closed loops under sampled disturbances.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::finite::FiniteHorizonOperators;
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::realize::RealizedController;
use crate::spectral::FactorSamples;
use crate::sysmodel::StateSpaceModel;

/// FIR coloring filter for the stationary worst-case disturbance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseFilter {
    pub taps: Vec<f64>,
    /// Fraction of the spectrum's energy missing from the truncated filter.
    pub truncation: f64,
}

/// Truncates the impulse response of a spectral factor to `taps` terms.
pub fn worst_case_filter(factor: &FactorSamples, taps: usize) -> WorstCaseFilter {
    let taps = factor.impulse_response(taps);
    let total = factor.values().iter().map(|l| l.norm_sqr()).sum::<f64>() / factor.values().len() as f64;
    let kept: f64 = taps.iter().map(|h| h * h).sum();
    WorstCaseFilter { taps, truncation: ((total - kept) / total).max(0.0) }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DisturbanceSpec {
    /// Gaussian, zero mean, variance `amplitude^2`.
    White { amplitude: f64 },
    /// Uniform on `[-amplitude, amplitude]`.
    Uniform { amplitude: f64 },
    /// `amplitude sin(frequency t + phase)`; the phase is drawn per trial
    /// when not given.
    Sinusoid { amplitude: f64, frequency: f64, phase: Option<f64> },
    /// White noise colored by the infinite-horizon worst-case factor.
    WorstCaseInfinite { radius: f64, filter: WorstCaseFilter },
    /// White noise shaped by the finite-horizon worst-case covariance root,
    /// restarted every `cov_sqrt.nrows()` steps.
    WorstCaseFinite { radius: f64, cov_sqrt: Mat },
}

impl DisturbanceSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::White { .. } => "white",
            Self::Uniform { .. } => "uniform",
            Self::Sinusoid { .. } => "sinusoid",
            Self::WorstCaseInfinite { .. } => "worst_case_infinite",
            Self::WorstCaseFinite { .. } => "worst_case_finite",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            Self::White { amplitude } | Self::Uniform { amplitude } if !(*amplitude > 0.0) => {
                bad(format!("amplitude must be positive, got {amplitude}"))
            }
            Self::Sinusoid { amplitude, frequency, .. } => {
                if !(*amplitude > 0.0) {
                    bad(format!("amplitude must be positive, got {amplitude}"))
                } else if !(*frequency > 0.0 && *frequency <= std::f64::consts::PI) {
                    bad(format!("frequency must lie in (0, pi], got {frequency}"))
                } else {
                    Ok(())
                }
            }
            Self::WorstCaseInfinite { filter, .. } if filter.taps.is_empty() => bad("empty coloring filter".into()),
            Self::WorstCaseFinite { cov_sqrt, .. } if cov_sqrt.nrows() == 0 || !cov_sqrt.is_square() => {
                bad("covariance root must be square and nonempty".into())
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, horizon: usize) -> Vec<f64> {
        let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
        match self {
            Self::White { amplitude } => normal(horizon).into_iter().map(|v| v * amplitude).collect(),
            Self::Uniform { amplitude } => (0..horizon).map(|_| rng.gen_range(-*amplitude..=*amplitude)).collect(),
            Self::Sinusoid { amplitude, frequency, phase } => {
                let phi = phase.unwrap_or_else(|| rng.gen_range(0.0..std::f64::consts::TAU));
                (0..horizon).map(|t| amplitude * (frequency * t as f64 + phi).sin()).collect()
            }
            Self::WorstCaseInfinite { filter, .. } => {
                // Pre-roll the filter so the output is stationary from t = 0.
                let n = filter.taps.len();
                let e = normal(horizon + n - 1);
                (0..horizon)
                    .map(|t| filter.taps.iter().enumerate().map(|(k, h)| h * e[t + n - 1 - k]).sum())
                    .collect()
            }
            Self::WorstCaseFinite { cov_sqrt, .. } => {
                let b = cov_sqrt.nrows();
                let mut out = Vec::with_capacity(horizon);
                while out.len() < horizon {
                    let e = Vector::from_vec(normal(b));
                    out.extend((cov_sqrt * e).iter().take(horizon - out.len()));
                }
                out
            }
        }
    }
}

/// Controllers the simulator can run.
#[derive(Clone, Debug)]
pub enum SimController {
    /// State-space disturbance feedback; replica states read `-x`.
    Realized(RealizedController),
    /// Dense finite-horizon controller replayed every `block` steps. At each
    /// restart the state carried over from the previous block is handled by
    /// the open-loop optimal response `state_gain x`.
    Replayed { k: Mat, state_gain: Mat, block: usize, d_u: usize },
}

impl SimController {
    pub fn replayed(ops: &FiniteHorizonOperators, k: Mat) -> Result<Self> {
        if k.shape() != ops.k0.shape() {
            return Err(Error::Dimension(format!("controller is {:?}, expected {:?}", k.shape(), ops.k0.shape())));
        }
        Ok(Self::Replayed { k, state_gain: ops.state_gain()?, block: ops.horizon, d_u: ops.d_u })
    }

    fn check(&self, model: &StateSpaceModel) -> Result<()> {
        match self {
            Self::Realized(c) => c.closed_loop_matrix(model).map(|_| ()),
            Self::Replayed { state_gain, d_u, .. } => {
                if *d_u != model.d_u() || state_gain.ncols() != model.d_x() {
                    Err(Error::Dimension("replayed controller does not match the plant".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Stage costs `|C x_t|^2 + |u_t|^2` from a zero initial state.
    fn run(&self, model: &StateSpaceModel, w: &[f64]) -> Vec<f64> {
        let mut x = Vector::zeros(model.d_x());
        let mut costs = Vec::with_capacity(w.len());
        let mut step = |x: &mut Vector, u: &Vector, wt: f64| {
            let s = &model.c * &*x;
            costs.push(s.norm_squared() + u.norm_squared());
            *x = &model.a * &*x + &model.b_u * u + model.b_w.column(0) * wt;
        };
        match self {
            Self::Realized(c) => {
                let (no, nr) = (c.own_states(), c.replica_states);
                let f_oo = c.f.view((0, 0), (no, no));
                let g_o = c.g.view((0, 0), (no, 1));
                let h_o = c.h.columns(0, no);
                let mut xi = Vector::zeros(no);
                for &wt in w {
                    let mut u = &h_o * &xi + c.j.column(0) * wt;
                    let mut xi_next = &f_oo * &xi + g_o.column(0) * wt;
                    if nr > 0 {
                        u -= c.h.columns(no, nr) * &x;
                        xi_next -= c.f.view((0, no), (no, nr)) * &x;
                    }
                    step(&mut x, &u, wt);
                    xi = xi_next;
                }
            }
            Self::Replayed { k, state_gain, block, d_u } => {
                for chunk in w.chunks(*block) {
                    let mut wb = Vector::zeros(*block);
                    wb.rows_mut(0, chunk.len()).copy_from_slice(chunk);
                    let ub = k * wb + state_gain * &x;
                    for (i, &wt) in chunk.iter().enumerate() {
                        let u = ub.rows(i * d_u, *d_u).into_owned();
                        step(&mut x, &u, wt);
                    }
                }
            }
        }
        costs
    }
}

#[derive(Clone, Debug)]
pub struct NamedController {
    pub name: String,
    pub controller: SimController,
}

impl NamedController {
    pub fn new(name: impl Into<String>, controller: SimController) -> Self {
        Self { name: name.into(), controller }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerStats {
    pub name: String,
    /// Time-averaged cost over the horizon, averaged over trials.
    pub mean_cost: f64,
    pub std_error: f64,
    /// 95% confidence half-width.
    pub half_width: f64,
    /// Running time-averaged cost at each step.
    pub trajectory: Vec<f64>,
    pub trajectory_half_width: Vec<f64>,
    /// Worst-case expected regret, when the caller supplies it.
    pub regret: Option<f64>,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub disturbance: String,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub truncation: Option<f64>,
    pub controllers: Vec<ControllerStats>,
}

impl RegretReport {
    pub fn get(&self, name: &str) -> Option<&ControllerStats> {
        self.controllers.iter().find(|c| c.name == name)
    }

    /// Mean and standard error of the per-trial cost difference `a - b`.
    /// Both controllers saw the same disturbance in every trial.
    pub fn paired_difference(&self, a: &str, b: &str) -> Option<(f64, f64)> {
        let (a, b) = (self.get(a)?, self.get(b)?);
        let d: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect();
        Some(mean_and_error(&d))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        w.write_record(["time", "controller", "mean_cost", "ci"]).map_err(|e| Error::parse(path, e))?;
        for c in &self.controllers {
            for (t, (m, h)) in c.trajectory.iter().zip(&c.trajectory_half_width).enumerate() {
                w.write_record([t.to_string(), c.name.clone(), format!("{m:e}"), format!("{h:e}")])
                    .map_err(|e| Error::parse(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mean_and_error(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every controller against the same sampled disturbances.
///
/// Trial `i` draws from stream `i` of a generator seeded with `seed`, and
/// results are reduced in trial order, so reports are reproducible
/// regardless of thread count.
pub fn simulate(
    model: &StateSpaceModel,
    controllers: &[NamedController],
    dist: &DisturbanceSpec,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<RegretReport> {
    if horizon == 0 || trials == 0 {
        return Err(Error::InvalidArgument("horizon and trial count must be positive".into()));
    }
    dist.validate()?;
    if model.b_w.ncols() != 1 {
        return Err(Error::Dimension("simulation expects a scalar disturbance".into()));
    }
    for c in controllers {
        c.controller.check(model)?;
    }
    let runs: Vec<Vec<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let w = dist.sample(&mut rng, horizon);
            controllers
                .iter()
                .map(|c| {
                    let mut acc = 0.0;
                    c.controller
                        .run(model, &w)
                        .into_iter()
                        .enumerate()
                        .map(|(t, s)| {
                            acc += s;
                            acc / (t + 1) as f64
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let stats = controllers
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let mut sum = vec![0.0; horizon];
            let mut sq = vec![0.0; horizon];
            for run in &runs {
                for (t, v) in run[ci].iter().enumerate() {
                    sum[t] += v;
                    sq[t] += v * v;
                }
            }
            let n = trials as f64;
            let trajectory: Vec<f64> = sum.iter().map(|s| s / n).collect();
            let trajectory_half_width = sum
                .iter()
                .zip(&sq)
                .map(|(s, q)| {
                    let m = s / n;
                    let var = if trials > 1 { ((q - n * m * m) / (n - 1.0)).max(0.0) } else { 0.0 };
                    1.96 * (var / n).sqrt()
                })
                .collect();
            let samples: Vec<f64> = runs.iter().map(|r| r[ci][horizon - 1]).collect();
            let (mean_cost, std_error) = mean_and_error(&samples);
            ControllerStats {
                name: c.name.clone(),
                mean_cost,
                std_error,
                half_width: 1.96 * std_error,
                trajectory,
                trajectory_half_width,
                regret: None,
                samples,
            }
        })
        .collect();

    let truncation = match dist {
        DisturbanceSpec::WorstCaseInfinite { filter, .. } => Some(filter.truncation),
        _ => None,
    };
    Ok(RegretReport { disturbance: dist.kind().to_string(), horizon, trials, seed, truncation, controllers: stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::eval::finite::build_finite_operators;
    use crate::realize::h2_controller;
    use crate::sysmodel::riccati;

    fn h2(model: &StateSpaceModel) -> NamedController {
        NamedController::new("h2", SimController::Realized(h2_controller(&riccati(model).unwrap()).unwrap()))
    }

    #[test]
    fn zero_disturbance_costs_nothing() {
        let m = benchmarks::ac15();
        let dist = DisturbanceSpec::Sinusoid { amplitude: 1e-300, frequency: 1.0, phase: Some(0.0) };
        let rep = simulate(&m, &[h2(&m)], &dist, 50, 4, 0).unwrap();
        assert!(rep.controllers[0].mean_cost < 1e-200);
    }

    #[test]
    fn reports_are_reproducible() {
        let m = benchmarks::ac15();
        let dist = DisturbanceSpec::White { amplitude: 1.0 };
        let a = simulate(&m, &[h2(&m)], &dist, 60, 50, 7).unwrap();
        let b = simulate(&m, &[h2(&m)], &dist, 60, 50, 7).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = simulate(&m, &[h2(&m)], &dist, 60, 50, 8).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn replica_substitution_matches_full_controller_state() {
        // With the replica propagated explicitly the cost is identical on a
        // stable plant.
        let m = benchmarks::rea4();
        let k = h2_controller(&riccati(&m).unwrap()).unwrap();
        let explicit = RealizedController { replica_states: 0, ..k.clone() };
        let dist = DisturbanceSpec::White { amplitude: 1.0 };
        let ctrls = [
            NamedController::new("sub", SimController::Realized(k)),
            NamedController::new("full", SimController::Realized(explicit)),
        ];
        let rep = simulate(&m, &ctrls, &dist, 100, 3, 1).unwrap();
        let (a, b) = (rep.controllers[0].mean_cost, rep.controllers[1].mean_cost);
        assert!((a - b).abs() <= 1e-9 * a, "{a} {b}");
    }

    #[test]
    fn replayed_dense_h2_matches_realized_on_one_block() {
        let m = benchmarks::ac15();
        let ops = build_finite_operators(&m, 40).unwrap();
        let dense = crate::eval::finite::dense_controller(&h2_controller(&riccati(&m).unwrap()).unwrap(), 40);
        let ctrls = [h2(&m), NamedController::new("dense", SimController::replayed(&ops, dense).unwrap())];
        let rep = simulate(&m, &ctrls, &DisturbanceSpec::White { amplitude: 1.0 }, 40, 5, 3).unwrap();
        let (a, b) = (rep.controllers[0].mean_cost, rep.controllers[1].mean_cost);
        assert!((a - b).abs() <= 1e-9 * a, "{a} {b}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(DisturbanceSpec::White { amplitude: 0.0 }.validate().is_err());
        assert!(DisturbanceSpec::Sinusoid { amplitude: 1.0, frequency: 4.0, phase: None }.validate().is_err());
        assert!(DisturbanceSpec::Uniform { amplitude: 2.0 }.validate().is_ok());
    }

    #[test]
    fn uniform_noise_has_its_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = DisturbanceSpec::Uniform { amplitude: 3.0 }.sample(&mut rng, 200_000);
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 3.0).abs() < 0.05, "{var}");
    }
}
