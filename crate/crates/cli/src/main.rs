//! `bitpin`: generate one-bit compressive-sensing problems, solve single
//! instances, and run seeded Monte-Carlo experiment sweeps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use bitpin_core::harness::emit::{emit_results, emit_trials, OutputFormat};
use bitpin_core::harness::presets::{preset, PRESET_NAMES};
use bitpin_core::harness::{
    load_config, run_experiment, run_experiment_sequential, OneOrMany, SolverKind,
};
use bitpin_core::{
    aop_solve, default_mu_coef, dump_problem, epsvm_solve, generate_problem, load_problem,
    passive_closed_form, piht_solve, recovery_error, AopConfig, EpsvmConfig, EpsvmStatus,
    GeneratedProblem, PihtConfig, PihtStatus, PinballParams, ProblemData, ProblemMeta,
};

#[derive(Parser)]
#[command(
    name = "bitpin",
    version,
    about = "One-bit compressive sensing: sparse recovery from sign measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random problem instance and write it as text.
    Gen {
        /// Signal dimension.
        #[arg(long)]
        n: usize,
        /// Number of one-bit measurements.
        #[arg(long)]
        m: usize,
        /// True sparsity of the generated signal.
        #[arg(long)]
        k: usize,
        /// Fraction of measurement signs flipped after quantization.
        #[arg(long, default_value_t = 0.0)]
        rf: f64,
        /// Signal-to-noise ratio of the analog measurements ("inf" = none).
        #[arg(long, default_value = "inf", value_parser = parse_snr)]
        rn: f64,
        /// RNG seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one problem file and write the recovered signal.
    Solve {
        /// Problem file produced by `bitpin gen`.
        #[arg(long)]
        input: PathBuf,
        /// One of: biht, piht, aop_biht, aop_piht, epsvm, passive.
        #[arg(long)]
        solver: SolverKind,
        /// Pinball slope in [-1, 0] (solver-specific default).
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<f64>,
        /// Margin bias c >= 0 (solver-specific default).
        #[arg(long)]
        c: Option<f64>,
        /// Regularization weight (epsvm/passive).
        #[arg(long)]
        mu: Option<f64>,
        /// Coefficient for mu = C sqrt(ln n / m) when --mu is unset.
        #[arg(long)]
        mu_coef: Option<f64>,
        /// Sparsity estimate for thresholding solvers (default: true K).
        #[arg(long)]
        k: Option<usize>,
        /// Sign-flip budget for AOP solvers (default: round(rf * m)).
        #[arg(long)]
        l_flips: Option<usize>,
        /// Gradient step size (default 1/m).
        #[arg(long)]
        alpha: Option<f64>,
        /// Iteration cap (500 for thresholding, 100 sweeps for epsvm).
        #[arg(long)]
        iterations: Option<usize>,
        /// Output file: the recovered signal, one value per line.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a preset or configured experiment sweep.
    Run {
        /// Named preset; see --list.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// JSON experiment configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// List preset names and exit.
        #[arg(long, exclusive = true)]
        list: bool,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the sign-flip ratio.
        #[arg(long)]
        rf: Option<f64>,
        /// Output file for the aggregate table.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Output format; default: by extension (.dat/.plot => plotdata).
        #[arg(long)]
        format: Option<String>,
        /// Also write the per-trial table to this CSV file.
        #[arg(long)]
        trials_out: Option<PathBuf>,
        /// Run trials on a single thread.
        #[arg(long)]
        sequential: bool,
        /// Omit wall-time columns from the output.
        #[arg(long)]
        no_times: bool,
    },
}

fn parse_snr(text: &str) -> Result<f64, String> {
    if text.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    match text.parse::<f64>() {
        Ok(v) if v > 0.0 => Ok(v),
        Ok(v) => Err(format!("snr must be positive or inf, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Gen {
            n,
            m,
            k,
            rf,
            rn,
            seed,
            out,
        } => gen(n, m, k, rf, rn, seed, &out),
        Command::Solve {
            input,
            solver,
            tau,
            c,
            mu,
            mu_coef,
            k,
            l_flips,
            alpha,
            iterations,
            out,
        } => solve(
            &input, solver, tau, c, mu, mu_coef, k, l_flips, alpha, iterations, &out,
        ),
        Command::Run {
            preset: preset_name,
            config,
            list,
            trials,
            seed,
            rf,
            out,
            format,
            trials_out,
            sequential,
            no_times,
        } => run(
            preset_name,
            config,
            list,
            trials,
            seed,
            rf,
            &out,
            format,
            trials_out,
            sequential,
            no_times,
        ),
    }
}

fn gen(n: usize, m: usize, k: usize, rf: f64, rn: f64, seed: u64, out: &Path) -> anyhow::Result<()> {
    let meta = ProblemMeta {
        n,
        m,
        k,
        snr: rn,
        flip_ratio: rf,
        seed,
    };
    let problem = generate_problem(meta)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut writer = BufWriter::new(file);
    dump_problem(&mut writer, &problem)?;
    writer.flush()?;
    eprintln!(
        "wrote {}: n={n} m={m} k={k} rf={rf} rn={} seed={seed}",
        out.display(),
        if rn.is_infinite() { "inf".into() } else { rn.to_string() },
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve(
    input: &Path,
    solver: SolverKind,
    tau: Option<f64>,
    c: Option<f64>,
    mu: Option<f64>,
    mu_coef: Option<f64>,
    k: Option<usize>,
    l_flips: Option<usize>,
    alpha: Option<f64>,
    iterations: Option<usize>,
    out: &Path,
) -> anyhow::Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let problem: GeneratedProblem = load_problem(&mut BufReader::new(file))?;
    let meta = problem.meta;
    let signal = problem.signal;
    let data = ProblemData::new(problem.matrix, problem.y)?;

    let (default_tau, default_c) = match solver {
        SolverKind::Biht | SolverKind::AopBiht => (0.0, 0.0),
        SolverKind::Piht | SolverKind::AopPiht => (-0.2, 1.0),
        SolverKind::Epsvm => (-0.5, 1.0),
        SolverKind::Passive => (-1.0, 1.0),
    };
    let tau = tau.unwrap_or(default_tau);
    let c = c.unwrap_or(default_c);
    let resolve_mu = |tau: f64| -> f64 {
        mu.unwrap_or_else(|| {
            mu_coef.unwrap_or_else(|| default_mu_coef(tau))
                * ((meta.n as f64).ln() / meta.m as f64).sqrt()
        })
    };

    let (x, status) = match solver {
        SolverKind::Biht | SolverKind::Piht => {
            let params = PinballParams::new(tau, c)?;
            let config = PihtConfig {
                k: k.unwrap_or(meta.k),
                alpha,
                l_max: iterations.unwrap_or(500),
                x0: None,
            };
            let result = piht_solve(&data, &params, &config)?;
            let status = match result.status {
                PihtStatus::Completed => "ok",
                PihtStatus::Degenerate => "degenerate",
            };
            (result.x, status.to_string())
        }
        SolverKind::AopBiht | SolverKind::AopPiht => {
            let inner = PihtConfig {
                k: k.unwrap_or(meta.k),
                alpha,
                l_max: iterations.unwrap_or(500),
                x0: None,
            };
            let budget = l_flips
                .unwrap_or_else(|| (meta.flip_ratio * meta.m as f64).round() as usize);
            let config = AopConfig {
                l_flips: budget,
                tau0: tau,
                decay: 0.95,
                outer_max: 20,
                c,
                inner,
            };
            let result = aop_solve(&data, &config)?;
            let status = format!(
                "{} after {} outer rounds ({} flips assumed)",
                if result.stabilized { "stabilized" } else { "round limit" },
                result.outer_iterations,
                budget,
            );
            (result.inner.x, status)
        }
        SolverKind::Epsvm => {
            let params = PinballParams::new(tau, c)?;
            let config = EpsvmConfig {
                mu,
                mu_coef,
                l_max: iterations.unwrap_or(100),
                delta: None,
            };
            let result = epsvm_solve(&data, &params, &config)?;
            let status = format!(
                "{:?} after {} sweeps (converged: {})",
                result.status, result.sweeps, result.converged
            );
            (result.x, status)
        }
        SolverKind::Passive => {
            let result = passive_closed_form(&data, resolve_mu(-1.0))?;
            let status = match result.status {
                EpsvmStatus::OnSphere => "ok",
                EpsvmStatus::ZeroOptimal => "zero optimal",
                EpsvmStatus::Degenerate => "degenerate",
            };
            (result.x, status.to_string())
        }
    };

    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut writer = BufWriter::new(file);
    for v in &x {
        writeln!(writer, "{v}")?;
    }
    writer.flush()?;

    let error = recovery_error(&x, &signal)?;
    eprintln!("solver={solver} status={status}");
    eprintln!("recovery error vs true signal: {error:.6}");
    eprintln!("wrote {} values to {}", x.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    preset_name: Option<String>,
    config_path: Option<PathBuf>,
    list: bool,
    trials: Option<usize>,
    seed: Option<u64>,
    rf: Option<f64>,
    out: &Path,
    format: Option<String>,
    trials_out: Option<PathBuf>,
    sequential: bool,
    no_times: bool,
) -> anyhow::Result<()> {
    if list {
        for name in PRESET_NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    let mut config = match (&preset_name, &config_path) {
        (Some(name), None) => preset(name).with_context(|| {
            format!(
                "unknown preset {name:?}; available: {}",
                PRESET_NAMES.join(", ")
            )
        })?,
        (None, Some(path)) => load_config(path)?,
        _ => bail!("pass exactly one of --preset or --config (or --list)"),
    };
    if let Some(t) = trials {
        config.trials = t;
    }
    if let Some(s) = seed {
        config.base_seed = s;
    }
    if let Some(r) = rf {
        config.r_f = OneOrMany::one(r);
    }

    let format = match format {
        Some(text) => text.parse::<OutputFormat>()?,
        None => match out.extension().and_then(|e| e.to_str()) {
            Some("dat") | Some("plot") | Some("plotdata") => OutputFormat::Plotdata,
            _ => OutputFormat::Csv,
        },
    };

    let results = if sequential {
        run_experiment_sequential(&config)?
    } else {
        run_experiment(&config)?
    };
    emit_results(&results, out, format, !no_times)?;
    eprintln!(
        "{}: {} aggregate rows over {} trials each -> {}",
        if config.name.is_empty() { "experiment" } else { &config.name },
        results.aggregates.len(),
        config.trials,
        out.display(),
    );
    if let Some(path) = trials_out {
        emit_trials(&results, &path, !no_times)?;
        eprintln!("trial table -> {}", path.display());
    }
    Ok(())
}
