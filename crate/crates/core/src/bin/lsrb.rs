use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsrb_core::cli::{self, fmt_f64, RunConfig, MODEL_FILE};
use lsrb_core::error::{Error, Result};

#[derive(Parser)]
#[command(name = "lsrb", version, about = "Certified least-squares reduced basis solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Plain-text `key = value` run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for this command's sampling: training set for `offline`, test set otherwise.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Greedy training; writes the model, its basis and training_log.csv.
    Offline(Common),
    /// Certified reduced solve for one parameter.
    Online {
        #[arg(long)]
        model: PathBuf,
        /// Parameter values.
        #[arg(required = true, allow_negative_numbers = true)]
        mu: Vec<f64>,
    },
    /// Bound versus reference error on the test set; writes results.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Offline, full-order and online timings; writes runtime.csv.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// SCM lower bounds against direct eigensolves; writes scm.csv.
    Scm(Common),
    #[command(subcommand)]
    Demo(Demo),
}

#[derive(Subcommand)]
enum Demo {
    /// Convergence of the 1D discrete coercivity constant.
    Coercivity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Residual bound versus true error for tridiag(-1,2,-1).
    Tridiag {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
}

enum SeedTarget {
    Train,
    Test,
}

fn load_config(c: &Common, seed: SeedTarget) -> Result<RunConfig> {
    let mut pairs = Vec::new();
    if let Some(path) = &c.config {
        let base = RunConfig::load(path)?;
        pairs.extend(base.to_pairs().into_iter().filter(|(k, _)| !k.ends_with("_sampling")).map(|(k, v)| (k.to_string(), v)));
    }
    for o in &c.overrides {
        let Some((k, v)) = o.split_once('=') else {
            return Err(Error::InvalidArgument(format!("override {o:?} is not key=value")));
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(out) = &c.out {
        pairs.push(("out_dir".into(), out.display().to_string()));
    }
    if let Some(s) = c.seed {
        let key = match seed {
            SeedTarget::Train => "train_seed",
            SeedTarget::Test => "test_seed",
        };
        pairs.push((key.into(), s.to_string()));
    }
    RunConfig::from_pairs(&pairs)
}

fn model_path(cfg: &RunConfig, model: Option<PathBuf>) -> PathBuf {
    model.unwrap_or_else(|| cfg.out_dir.join(MODEL_FILE))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Offline(c) => {
            let cfg = load_config(&c, SeedTarget::Train)?;
            match cli::cmd_offline(&cfg) {
                Ok(s) => {
                    println!("model {} (N = {}, error basis {}, delta_final = {}) in {:.2} s", s.model_path.display(), s.n, s.n_error, fmt_f64(s.delta_final), s.seconds);
                    Ok(())
                }
                Err(e @ Error::Uncertified { .. }) => {
                    eprintln!("model written to {} but it is not certified", cfg.out_dir.join(MODEL_FILE).display());
                    Err(e)
                }
                Err(e) => Err(e),
            }
        }
        Command::Online { model, mu } => {
            print!("{}", cli::cmd_online(&model, &mu)?.render());
            Ok(())
        }
        Command::Sweep { common, model } => {
            let cfg = load_config(&common, SeedTarget::Test)?;
            let s = cli::cmd_sweep(&cfg, &model_path(&cfg, model))?;
            println!(
                "{} rows, bound >= reference error on {}, no certificate on {}, max effectivity {} (ceiling {}), reference depth {} ({} dofs)",
                s.rows.len(),
                s.n_rigorous(),
                s.n_unavailable(),
                fmt_f64(s.max_effectivity()),
                fmt_f64(s.ceiling),
                s.ref_depth,
                s.ref_dim
            );
            Ok(())
        }
        Command::Bench { common, model } => {
            let cfg = load_config(&common, SeedTarget::Test)?;
            let s = cli::cmd_bench(&cfg, &model_path(&cfg, model))?;
            let be = s.breakeven.map_or("none".to_string(), |k| k.to_string());
            println!(
                "offline {:.3} s, full-order {:.3e} s/query, RB {:.3e} s/query, speedup {:.1}, breakeven {be} queries",
                s.offline_seconds,
                s.full_per_query,
                s.rb_per_query,
                s.speedup()
            );
            if s.speedup() < cfg.bench_min_speedup {
                eprintln!("speedup below the configured minimum {}", cfg.bench_min_speedup);
            }
            Ok(())
        }
        Command::Scm(c) => {
            let cfg = load_config(&c, SeedTarget::Test)?;
            let s = cli::cmd_scm(&cfg)?;
            println!(
                "{} anchors, candidate gap {}, max alpha_lb - alpha_h over {} validation points {}",
                s.anchors,
                fmt_f64(s.epsilon_achieved),
                s.rows.len(),
                fmt_f64(s.max_violation())
            );
            Ok(())
        }
        Command::Demo(Demo::Coercivity { common, levels }) => {
            let mut cfg = load_config(&common, SeedTarget::Test)?;
            if let Some(l) = levels {
                cfg.coercivity_levels = l;
            }
            for r in cli::cmd_demo_coercivity(&cfg)? {
                println!("h = {:<12} alpha_h = {} error = {:.3e} order = {}", fmt_f64(r.h), fmt_f64(r.alpha_h), r.error, r.observed_order.map_or("-".to_string(), |o| format!("{o:.3}")));
            }
            Ok(())
        }
        Command::Demo(Demo::Tridiag { common, sizes }) => {
            let mut cfg = load_config(&common, SeedTarget::Test)?;
            if let Some(s) = sizes {
                cfg.tridiag_sizes = s;
            }
            cfg.validate()?;
            for r in cli::cmd_demo_tridiag(&cfg)? {
                println!("n = {:<6} error = {:.6e} residual = {:.6e} lambda_1 = {:.6e} ratio = {:.4} (lower bound {:.4})", r.n, r.error, r.residual, r.lambda_min, r.ratio, r.lower_bound);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
