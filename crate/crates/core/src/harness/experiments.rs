//! Built-in experiments: two tracked parameters trained from a fixed start
//! with everything else frozen.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::FractionalOrder;
use crate::harness::builtin::{
    build_ex5_network, build_fig2_network, build_fig3_dataset, ex5_tracked, fig2_tracked,
    table1_dataset,
};
use crate::harness::io::{write_json, write_trace_csv};
use crate::network::{mean_squared_error, Dataset, Mlp, ParamId};
use crate::trainer::{
    train, BatchMode, BoundScope, OrderPolicy, ResidualSign, RunStatus, TrainMode, TrainOutcome,
    TrainTrace, Trainable, TrainerConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5a,
    Ex5b,
    Ex5c,
    Ex5d,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Ex1,
        ExperimentId::Ex2,
        ExperimentId::Ex3,
        ExperimentId::Ex4,
        ExperimentId::Ex5a,
        ExperimentId::Ex5b,
        ExperimentId::Ex5c,
        ExperimentId::Ex5d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Ex1 => "ex1",
            ExperimentId::Ex2 => "ex2",
            ExperimentId::Ex3 => "ex3",
            ExperimentId::Ex4 => "ex4",
            ExperimentId::Ex5a => "ex5a",
            ExperimentId::Ex5b => "ex5b",
            ExperimentId::Ex5c => "ex5c",
            ExperimentId::Ex5d => "ex5d",
        }
    }

    pub fn is_filter(self) -> bool {
        matches!(
            self,
            ExperimentId::Ex5a | ExperimentId::Ex5b | ExperimentId::Ex5c | ExperimentId::Ex5d
        )
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment {s:?}; expected one of ex1..ex4, ex5a..ex5d"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunModes {
    Classic,
    Fsdm,
    Both,
}

impl RunModes {
    pub fn modes(self) -> &'static [TrainMode] {
        match self {
            RunModes::Classic => &[TrainMode::Classic],
            RunModes::Fsdm => &[TrainMode::Fsdm],
            RunModes::Both => &[TrainMode::Classic, TrainMode::Fsdm],
        }
    }
}

impl FromStr for RunModes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(RunModes::Classic),
            "fsdm" => Ok(RunModes::Fsdm),
            "both" => Ok(RunModes::Both),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?}; expected classic, fsdm or both"
            ))),
        }
    }
}

/// The built-in experiments place the lower bound of weights and biases this
/// many times the smallest tracked magnitude below the smallest tracked
/// initial value.
pub const EXPERIMENT_BOUND_RATIO: f64 = 1.3;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub tracked: [ParamId; 2],
    pub init: [f64; 2],
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub modes: RunModes,
}

impl ExperimentSpec {
    pub fn builtin(id: ExperimentId) -> Self {
        let (init, mu, iters) = match id {
            ExperimentId::Ex1 => ([-4.0, -4.0], 5.5, 2000),
            ExperimentId::Ex2 => ([5.0, 30.0], 5.5, 9000),
            ExperimentId::Ex3 => ([-8.0, 9.0], 5.5, 6000),
            ExperimentId::Ex4 => ([0.7003, 35.2626], 5.5, 9000),
            ExperimentId::Ex5a => ([108.0, 116.0], 3.5, 3000),
            ExperimentId::Ex5b => ([-110.0, -106.0], 3.5, 3000),
            ExperimentId::Ex5c => ([-95.0, 100.0], 3.5, 3000),
            ExperimentId::Ex5d => ([-9.00, 8.2676], 3.5, 3000),
        };
        let tracked = if id.is_filter() {
            ex5_tracked()
        } else {
            fig2_tracked()
        };
        ExperimentSpec {
            id,
            tracked,
            init,
            learning_rate: mu,
            max_iterations: iters,
            modes: RunModes::Both,
        }
    }

    /// Network with the tracked pair set to the initial condition.
    pub fn network(&self) -> Mlp {
        let mut mlp = if self.id.is_filter() {
            build_ex5_network()
        } else {
            build_fig2_network(false)
        };
        for (id, v) in self.tracked.iter().zip(self.init) {
            mlp.set(*id, v)
                .expect("tracked ids exist in the built-in networks");
        }
        mlp
    }

    pub fn dataset(&self) -> Dataset {
        if self.id.is_filter() {
            table1_dataset()
        } else {
            build_fig3_dataset()
        }
    }

    /// Distance from the smallest tracked initial value to the lower bound.
    pub fn bound_gap(&self) -> f64 {
        let smallest = self.init.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        EXPERIMENT_BOUND_RATIO * smallest.max(1e-3)
    }

    /// Trainer settings for one mode before overrides.
    pub fn trainer_config(&self, mode: TrainMode) -> TrainerConfig {
        TrainerConfig {
            mode,
            learning_rate: self.learning_rate,
            max_iterations: self.max_iterations,
            w_inf: None,
            b_inf: None,
            bound_gap: self.bound_gap(),
            bound_scope: BoundScope::Global,
            n_max: 1,
            order_policy: OrderPolicy::AdaptiveKernel { epsilon_phi: 1e-12 },
            residual_sign: ResidualSign::TargetMinusOutput,
            trainable: Trainable::Only(self.tracked.to_vec()),
            tracked: self.tracked.to_vec(),
            stop_tolerance: 1e-12,
            saddle_epsilon: 1e-12,
            perturbation_scale: 1e-3,
            rng_seed: 0,
            batch: BatchMode::PerSample,
        }
    }
}

/// Command-line style adjustments to a built-in experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub learning_rate: Option<f64>,
    pub max_iterations: Option<usize>,
    pub modes: Option<RunModes>,
    pub w_inf: Option<f64>,
    pub b_inf: Option<f64>,
    pub bound_gap: Option<f64>,
    pub bound_scope: Option<BoundScope>,
    pub n_max: Option<usize>,
    pub fixed_order: Option<f64>,
    pub rng_seed: Option<u64>,
    pub batch: Option<BatchMode>,
    pub residual_sign: Option<ResidualSign>,
    pub epsilon_phi: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, spec: &ExperimentSpec, mode: TrainMode) -> Result<TrainerConfig> {
        let mut cfg = spec.trainer_config(mode);
        if let Some(mu) = self.learning_rate {
            cfg.learning_rate = mu;
        }
        if let Some(n) = self.max_iterations {
            cfg.max_iterations = n;
        }
        cfg.w_inf = self.w_inf.or(cfg.w_inf);
        cfg.b_inf = self.b_inf.or(cfg.b_inf);
        if let Some(g) = self.bound_gap {
            cfg.bound_gap = g;
        }
        if let Some(b) = self.bound_scope {
            cfg.bound_scope = b;
        }
        if let Some(n) = self.n_max {
            cfg.n_max = n;
        }
        if let Some(s) = self.rng_seed {
            cfg.rng_seed = s;
        }
        if let Some(b) = self.batch {
            cfg.batch = b;
        }
        if let Some(s) = self.residual_sign {
            cfg.residual_sign = s;
        }
        if let Some(e) = self.epsilon_phi {
            cfg.order_policy = OrderPolicy::AdaptiveKernel { epsilon_phi: e };
        }
        if let Some(v) = self.fixed_order {
            cfg.order_policy = OrderPolicy::Fixed {
                order: FractionalOrder::new(v)?,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub mode: TrainMode,
    /// Mean squared error of the returned network.
    pub final_f_hat: f64,
    pub initial_f_hat: f64,
    pub tracked: Vec<ParamId>,
    pub final_params: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub status: RunStatus,
    /// Resolved (w_inf, b_inf) per layer; empty for classic runs.
    pub lower_bounds: Vec<(f64, f64)>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub trace: TrainTrace,
    pub mlp: Mlp,
}

/// Trains `mlp` on `data` and summarises the outcome.
pub fn execute(label: &str, mlp: &Mlp, data: &Dataset, cfg: &TrainerConfig) -> Result<RunResult> {
    let start = Instant::now();
    let trainer = crate::trainer::Trainer::new(cfg.clone(), mlp)?;
    let bounds = trainer.lower_bounds().to_vec();
    let initial_f_hat = mean_squared_error(mlp, data)?;
    let TrainOutcome {
        mlp: fin,
        trace,
        status,
    } = train(mlp, data, cfg)?;
    let final_f_hat = mean_squared_error(&fin, data)?;
    let fsdm = cfg.mode == TrainMode::Fsdm;
    let summary = RunSummary {
        label: label.to_string(),
        mode: cfg.mode,
        final_f_hat,
        initial_f_hat,
        tracked: cfg.tracked.clone(),
        final_params: cfg
            .tracked
            .iter()
            .map(|&id| fin.get(id))
            .collect::<Result<_>>()?,
        iterations: trace.rows.len(),
        converged: status == RunStatus::Converged,
        status,
        lower_bounds: if fsdm { bounds } else { Vec::new() },
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunResult {
        summary,
        trace,
        mlp: fin,
    })
}

pub fn mode_name(mode: TrainMode) -> &'static str {
    match mode {
        TrainMode::Classic => "classic",
        TrainMode::Fsdm => "fsdm",
    }
}

/// Runs every selected mode of `spec`. With `out_dir`, writes
/// `<id>_<mode>.csv` (trace) and `<id>_<mode>.json` (summary) per run.
pub fn run_experiment(
    spec: &ExperimentSpec,
    overrides: &Overrides,
    out_dir: Option<&Path>,
) -> Result<Vec<RunResult>> {
    let mlp = spec.network();
    let data = spec.dataset();
    let modes = overrides.modes.unwrap_or(spec.modes);
    let mut results = Vec::new();
    for &mode in modes.modes() {
        let cfg = overrides.apply(spec, mode)?;
        let label = format!("{}_{}", spec.id, mode_name(mode));
        let res = execute(&label, &mlp, &data, &cfg)?;
        if let Some(dir) = out_dir {
            write_run(dir, &res)?;
        }
        results.push(res);
    }
    Ok(results)
}

/// Writes a run's trace CSV and summary JSON into `dir`.
pub fn write_run(dir: &Path, res: &RunResult) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv = dir.join(format!("{}.csv", res.summary.label));
    let json = dir.join(format!("{}.json", res.summary.label));
    write_trace_csv(&csv, &res.trace)?;
    write_json(&json, &res.summary)?;
    Ok((csv, json))
}
