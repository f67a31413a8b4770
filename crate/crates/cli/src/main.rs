//! `fbpnn` command-line driver.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fbpnn::harness::experiments::{
    execute, write_run, ExperimentId, ExperimentSpec, Overrides, RunModes, RunSummary,
};
use fbpnn::harness::io::{write_surface, write_surface_csv};
use fbpnn::harness::{
    build_ex5_network, build_fig2_network, sample_error_surface, sizing_estimate, AxisRange,
    RunConfig, SurfaceGrid,
};
use fbpnn::{ParamId, RunStatus};

#[derive(Parser)]
#[command(
    name = "fbpnn",
    version,
    about = "Fractional-order backpropagation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in experiment (ex1..ex4, ex5a..ex5d).
    Run {
        experiment: ExperimentId,
        /// Learning rate.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, value_parser = parse_modes)]
        mode: Option<RunModes>,
        /// Lower bound of all weights.
        #[arg(long, allow_hyphen_values = true)]
        w_inf: Option<f64>,
        /// Lower bound of all biases.
        #[arg(long, allow_hyphen_values = true)]
        b_inf: Option<f64>,
        /// Series terms in the fractional partial (1 or 3).
        #[arg(long)]
        n_max: Option<usize>,
        /// Use this order every iteration instead of the adaptive kernel.
        #[arg(long)]
        fixed_order: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `<id>_<mode>.csv` traces and `.json` summaries.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the mean squared error over a grid of two parameters.
    Surface {
        #[arg(long)]
        experiment: ExperimentId,
        #[arg(long)]
        param_a: ParamId,
        /// `lo:hi:steps`
        #[arg(long, allow_hyphen_values = true)]
        range_a: AxisRange,
        #[arg(long)]
        param_b: ParamId,
        #[arg(long, allow_hyphen_values = true)]
        range_b: AxisRange,
        /// CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hidden-layer width estimate.
    Sizing {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        samples: f64,
        #[arg(long)]
        inputs: usize,
    },
    /// Train a network described by a JSON run file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_modes(s: &str) -> Result<RunModes, String> {
    s.parse().map_err(|e: fbpnn::Error| e.to_string())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            experiment,
            mu,
            iters,
            mode,
            w_inf,
            b_inf,
            n_max,
            fixed_order,
            seed,
            out,
        } => {
            let spec = ExperimentSpec::builtin(experiment);
            let overrides = Overrides {
                learning_rate: mu,
                max_iterations: iters,
                modes: mode,
                w_inf,
                b_inf,
                n_max,
                fixed_order,
                rng_seed: seed,
                ..Overrides::default()
            };
            let results = fbpnn::harness::run_experiment(&spec, &overrides, out.as_deref())
                .with_context(|| format!("running {experiment}"))?;
            for r in &results {
                print_summary(&r.summary);
            }
            if let Some(dir) = out {
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Surface {
            experiment,
            param_a,
            range_a,
            param_b,
            range_b,
            out,
        } => {
            let spec = ExperimentSpec::builtin(experiment);
            // everything off the grid axes stays at the experiment's reference values
            let template = if experiment.is_filter() {
                build_ex5_network()
            } else {
                build_fig2_network(true)
            };
            let grid = SurfaceGrid {
                param_a,
                range_a,
                param_b,
                range_b,
            };
            let surface = sample_error_surface(&template, &spec.dataset(), &grid)?;
            let (i, j) = surface.argmin();
            match out {
                Some(path) => {
                    write_surface_csv(&path, &surface)?;
                    println!(
                        "min {:.6e} at {param_a}={}, {param_b}={}; wrote {}",
                        surface.at(i, j),
                        surface.a[i],
                        surface.b[j],
                        path.display()
                    );
                }
                None => {
                    let mut buf = Vec::new();
                    write_surface(&mut buf, &surface, std::path::Path::new("<stdout>"))?;
                    let mut out = std::io::stdout().lock();
                    // a reader such as `head` may close the pipe early
                    match out.write_all(&buf).and_then(|()| out.flush()) {
                        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                        r => r?,
                    }
                }
            }
            Ok(())
        }
        Command::Sizing { c, samples, inputs } => {
            println!("{}", sizing_estimate(c, samples, inputs)?);
            Ok(())
        }
        Command::Train { config, out } => {
            let run = RunConfig::load(&config)?;
            let (mlp, data, cfg) = run
                .materialize()
                .with_context(|| format!("invalid run file {}", config.display()))?;
            let label = config
                .file_stem()
                .map_or_else(|| "train".to_string(), |s| s.to_string_lossy().into_owned());
            let res = execute(&label, &mlp, &data, &cfg)?;
            print_summary(&res.summary);
            if let Some(dir) = out {
                write_run(&dir, &res)?;
                let net = dir.join(format!("{label}_network.json"));
                fbpnn::harness::io::write_json(&net, &res.mlp)?;
                println!("wrote {}", dir.display());
            }
            if let RunStatus::Aborted(why) = &res.summary.status {
                bail!("training aborted: {why}");
            }
            Ok(())
        }
    }
}

fn print_summary(s: &RunSummary) {
    let params: Vec<String> = s
        .tracked
        .iter()
        .zip(&s.final_params)
        .map(|(id, v)| format!("{id}={v:.6}"))
        .collect();
    let status = match &s.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::Converged => "converged".to_string(),
        RunStatus::Aborted(why) => format!("aborted ({why})"),
    };
    println!(
        "{:<14} iters={:<6} mse {:.6e} -> {:.6e}  {}  {status}",
        s.label,
        s.iterations,
        s.initial_f_hat,
        s.final_f_hat,
        params.join(" ")
    );
}
