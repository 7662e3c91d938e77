use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lp_recovery::bounds::{bound_set, PExponent, Regime, Ric};
use lp_recovery::harness::{
    emit_report_to_path, run_lemma_suite, run_montecarlo, total_violations, ConfigOverrides,
    LemmaSuiteConfig, ReportFormat,
};
use lp_recovery::io::{read_matrix, read_vector, write_matrix, write_vector};
use lp_recovery::ric::{
    exact_ric_with_cap, optimal_scaling, sampled_ric_lower_bound, SensingMatrix,
    DEFAULT_ENUMERATION_CAP,
};
use lp_recovery::solver::{irls_recover, make_instance, Ensemble, IrlsOptions, SensingProblem};
use lp_recovery::{Error, Result};

/// Sparse recovery by lp minimization, with numeric checks of its error bounds.
#[derive(Parser)]
#[command(name = "lprec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every bound constant for one (p, delta) pair.
    Bounds {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        delta: f64,
        /// general or special (n <= 4k)
        #[arg(long, default_value = "general")]
        regime: Regime,
        /// Print a key/value table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Restricted isometry constant of a matrix file.
    Ric {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: usize,
        /// Random-subset lower bound with this many samples instead of
        /// exact enumeration.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report the global rescaling that minimizes the constant, with the
        /// constant of the rescaled matrix.
        #[arg(long)]
        optimal_scaling: bool,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
        cap: u64,
    },
    /// Solve min ||x||_p subject to ||y - Ax||_2 <= epsilon.
    Recover {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Known signal; fills in the objective-dominance flag.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Write the JSON outcome here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded instance: A, x, e and y files in a directory.
    Gen {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "gaussian")]
        ensemble: Ensemble,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Randomized checks of every inequality in the proof chain.
    VerifyLemmas {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated exponents.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        p_grid: Vec<f64>,
        /// Comma-separated shapes `MxNxK` for the matrix inequalities.
        #[arg(long, value_delimiter = ',', default_value = "8x12x2,6x8x2,10x16x2")]
        sizes: Vec<String>,
    },
    /// Monte-Carlo check of the final error bounds.
    Montecarlo(MonteCarloArgs),
}

#[derive(Args)]
struct MonteCarloArgs {
    /// TOML file with experiment keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// fixed, pbar_fraction or special_fraction
    #[arg(long)]
    p_rule: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    ensemble: Option<Ensemble>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// exact, user or sampled
    #[arg(long)]
    delta_source: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    delta_samples: Option<usize>,
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    fresh_matrix: bool,
    #[arg(long)]
    no_rescale: bool,
    #[arg(long)]
    compressible_tail: Option<f64>,
    /// Per-trial records go here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

impl MonteCarloArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            m: self.m,
            n: self.n,
            k: self.k,
            p_rule: self.p_rule.clone(),
            p: self.p,
            alpha: self.alpha,
            epsilon: self.epsilon,
            ensemble: self.ensemble,
            trials: self.trials,
            seed: self.seed,
            delta_source: self.delta_source.clone(),
            delta: self.delta,
            delta_samples: self.delta_samples,
            regime: self.regime.clone(),
            fresh_matrix: self.fresh_matrix.then_some(true),
            rescale: self.no_rescale.then_some(false),
            compressible_tail: self.compressible_tail,
            enumeration_cap: None,
        }
    }
}

enum Outcome {
    Ok,
    Violation,
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn parse_size(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split('x').collect();
    let nums = parts
        .iter()
        .map(|v| v.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Parse(format!("bad size `{s}`, expected MxNxK")))?;
    match nums[..] {
        [m, n, k] => Ok((m, n, k)),
        _ => Err(Error::Parse(format!("bad size `{s}`, expected MxNxK"))),
    }
}

fn load_matrix(path: &Path) -> Result<SensingMatrix> {
    SensingMatrix::new(read_matrix(path)?)
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Bounds {
            p,
            delta,
            regime,
            table,
        } => {
            let set = bound_set(PExponent::new(p)?, Ric::new(delta)?, regime);
            if table {
                emit(&set.to_table())?;
            } else {
                print_json(&set)?;
            }
        }
        Command::Ric {
            matrix,
            k,
            samples,
            seed,
            optimal_scaling: scaled,
            cap,
        } => {
            let a = load_matrix(&matrix)?;
            match (samples, scaled) {
                (Some(s), _) => print_json(&sampled_ric_lower_bound(&a, k, s, seed)?)?,
                (None, true) => print_json(&optimal_scaling(&a, k, cap.into())?)?,
                (None, false) => print_json(&exact_ric_with_cap(&a, k, cap.into())?)?,
            }
        }
        Command::Recover {
            matrix,
            y,
            p,
            epsilon,
            k,
            reference,
            out,
        } => {
            let prob = SensingProblem::new(load_matrix(&matrix)?, read_vector(&y)?, epsilon, k)?;
            let reference = reference.map(|r| read_vector(&r)).transpose()?;
            let outcome = irls_recover(
                &prob,
                PExponent::new(p)?,
                &IrlsOptions::default(),
                reference.as_ref(),
            )?;
            if !outcome.converged {
                eprintln!("warning: iteration cap reached; returning the best iterate");
            }
            match out {
                Some(path) => std::fs::write(path, serde_json::to_string_pretty(&outcome)?)?,
                None => print_json(&outcome)?,
            }
        }
        Command::Gen {
            m,
            n,
            k,
            epsilon,
            seed,
            ensemble,
            out_dir,
        } => {
            let inst = make_instance(m, n, k, epsilon, seed, ensemble)?;
            std::fs::create_dir_all(&out_dir)?;
            write_matrix(&out_dir.join("A.csv"), inst.problem.a.matrix())?;
            write_vector(&out_dir.join("y.csv"), &inst.problem.y)?;
            write_vector(&out_dir.join("x.csv"), &inst.x_ref)?;
            write_vector(&out_dir.join("e.csv"), &inst.noise)?;
        }
        Command::VerifyLemmas {
            trials,
            seed,
            p_grid,
            sizes,
        } => {
            let cfg = LemmaSuiteConfig {
                trials,
                seed,
                p_grid,
                sizes: sizes.iter().map(|s| parse_size(s)).collect::<Result<_>>()?,
                ..LemmaSuiteConfig::default()
            };
            let summary = run_lemma_suite(&cfg)?;
            print_json(&summary)?;
            if total_violations(&summary) > 0 {
                return Ok(Outcome::Violation);
            }
        }
        Command::Montecarlo(args) => {
            let base = match &args.config {
                Some(path) => ConfigOverrides::from_toml(&std::fs::read_to_string(path)?)?,
                None => ConfigOverrides::default(),
            };
            let cfg = base.merged_with(args.overrides()).resolve()?;
            let run = run_montecarlo(&cfg)?;
            if let Some(path) = &args.report {
                emit_report_to_path(&run.records, args.format, path)?;
            }
            print_json(&serde_json::json!({ "config": run.config, "summary": run.summary }))?;
            if run.summary.violations > 0 {
                return Ok(Outcome::Violation);
            }
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
