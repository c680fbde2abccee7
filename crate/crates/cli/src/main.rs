use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apex::{CriticMode, Variant};
use apex_cli::commands::{
    cmd_compare, cmd_eval, cmd_gait_diagram, cmd_gradcheck, cmd_sweep, cmd_train, degradation, GaitChoice, GradcheckOptions,
};
use apex_cli::config::{DEFAULT_OUT_DIR, OUT_DIR_ENV};
use apex_cli::{parse_seeds, parse_selector, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "apex", version, about = "Decaying action priors and multi-critic PPO on a planar chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Variant to run when no config is given (APEX, APEX_Full, DM_Full, DM_NIA).
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated seeds, overriding the config.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory; overrides the config and APEX_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads across seeds and grid cells.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy per seed.
    Train(Common),
    /// Print the resolved run configuration as JSON.
    Config(Common),
    /// Evaluate a checkpoint with the prior off.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Gait by name.
        #[arg(long, conflicts_with = "selector")]
        gait: Option<String>,
        /// Gait as M/N.
        #[arg(long)]
        selector: Option<String>,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train several variants on shared seeds.
    Compare {
        /// Run configurations; may be repeated.
        #[arg(long)]
        config: Vec<PathBuf>,
        /// Comma-separated variants with default settings.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Train a grid of reward-scaled configurations.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Style sensitivity multipliers.
        #[arg(long, default_value = "1,10")]
        sigma: String,
        /// Task weight multipliers.
        #[arg(long, default_value = "1,30")]
        weight: String,
        /// Critic modes: multi, single or both.
        #[arg(long, default_value = "multi,single")]
        critic: String,
    },
    /// Check policy-gradient unbiasedness and variance on a scalar toy.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover per-group phase offsets of a multi-gait checkpoint.
    GaitDiagram {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Selectors M/N; all library gaits when omitted.
        #[arg(long)]
        selector: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn env_out() -> Option<String> {
    std::env::var(OUT_DIR_ENV).ok()
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    let mut rc = RunConfig::defaults(Variant::Apex);
    rc.out_dir = PathBuf::from(DEFAULT_OUT_DIR);
    rc.resolve_out_dir(flag.as_deref(), env_out().as_deref());
    rc.out_dir
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    s.split(',').map(|p| f(p.trim())).collect()
}

fn parse_variant(s: &str) -> Result<Variant, CliError> {
    Variant::parse(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn run_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut rc = match (&c.config, &c.variant) {
        (Some(path), v) => {
            let rc = RunConfig::load(path)?;
            if let Some(v) = v {
                let v = parse_variant(v)?;
                if v != rc.train.variant.name {
                    return Err(CliError::Usage(format!("--variant {v} contradicts the config's {}", rc.train.variant.name)));
                }
            }
            rc
        }
        (None, Some(v)) => RunConfig::defaults(parse_variant(v)?),
        (None, None) => RunConfig::defaults(Variant::Apex),
    };
    if let Some(s) = &c.seed {
        rc.seeds = parse_seeds(s)?;
    }
    rc.resolve_out_dir(c.out.as_deref(), env_out().as_deref());
    Ok(rc)
}

fn print_table(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => {
            let rc = run_config(&c)?;
            for t in cmd_train(&rc, c.threads)? {
                let last = t.outcome.metrics.last();
                println!(
                    "seed {}: {} iterations, final q RMSE {:.4}",
                    t.seed,
                    t.outcome.metrics.len(),
                    last.map_or(f64::NAN, |r| r.eval.q_rmse)
                );
                print_table(&t.metrics_path);
                print_table(&t.checkpoint_path);
            }
        }
        Command::Config(c) => println!("{}", run_config(&c)?.to_json()),
        Command::Eval {
            checkpoint,
            gait,
            selector,
            episodes,
            out,
        } => {
            let choice = match (gait, selector) {
                (Some(g), None) => GaitChoice::Name(g),
                (None, Some(s)) => {
                    let (m, n) = parse_selector(&s)?;
                    GaitChoice::Selector(m, n)
                }
                (None, None) => return Err(CliError::Usage("eval needs --gait or --selector".into())),
                (Some(_), Some(_)) => unreachable!("clap rejects both"),
            };
            let out = out_dir(out);
            let r = cmd_eval(&checkpoint, &choice, episodes, &out)?;
            println!(
                "q {:.4} rad, h {:.4} m, x_ee {:.4} m, v {:.4} m/s, R {:.4} over {} steps",
                r.q_rmse, r.h_rmse, r.x_ee_rmse, r.v_rmse, r.mean_reward, r.steps
            );
            print_table(&out.join("eval.csv"));
        }
        Command::Compare {
            config,
            variant,
            seed,
            out,
            threads,
        } => {
            let mut runs = config.iter().map(|p| RunConfig::load(p)).collect::<Result<Vec<_>, _>>()?;
            if let Some(v) = variant {
                for name in v.split(',') {
                    runs.push(RunConfig::defaults(parse_variant(name.trim())?));
                }
            }
            let seeds = match seed {
                Some(s) => parse_seeds(&s)?,
                None => runs.first().map_or_else(|| vec![0], |r| r.seeds.clone()),
            };
            let out = out_dir(out);
            let configs: Vec<_> = runs.into_iter().map(|r| r.train).collect();
            let rows = cmd_compare(&configs, &seeds, threads, &out)?;
            println!("{} rows", rows.len());
            print_table(&out.join("compare.csv"));
        }
        Command::Sweep {
            common,
            sigma,
            weight,
            critic,
        } => {
            let rc = run_config(&common)?;
            let number = |p: &str| p.parse::<f64>().map_err(|_| CliError::Usage(format!("bad multiplier {p:?}")));
            let sigmas = parse_list(&sigma, number)?;
            let weights = parse_list(&weight, number)?;
            let modes = parse_list(&critic, |p| match p {
                "multi" => Ok(CriticMode::Multi),
                "single" => Ok(CriticMode::Single),
                _ => Err(CliError::Usage(format!("critic mode {p:?} is neither multi nor single"))),
            })?;
            let cells = cmd_sweep(&rc.train, &sigmas, &weights, &modes, &rc.seeds, common.threads, &rc.out_dir)?;
            for &m in &modes {
                for &s in &sigmas {
                    for &w in &weights {
                        if let Some(d) = degradation(&cells, m, s, w) {
                            println!("{m:?} sigma x{s} weight x{w}: median degradation {:+.1}%", 100.0 * d);
                        }
                    }
                }
            }
            print_table(&rc.out_dir.join("sweep.csv"));
        }
        Command::Gradcheck { seed, out } => {
            let out = out_dir(out);
            let report = cmd_gradcheck(&GradcheckOptions { seed, ..Default::default() }, &out)?;
            println!("{}/{} grid cells within 4 standard errors", report.cells_within(4.0), report.grid.len());
            for r in &report.variance {
                println!("c = {}: per-sample variance {:.4}", r.prior_coeff, r.variance);
            }
            print_table(&out.join("gradcheck_grid.csv"));
            print_table(&out.join("gradcheck_variance.csv"));
        }
        Command::GaitDiagram { checkpoint, selector, out } => {
            let selectors = if selector.is_empty() {
                let n = apex::Checkpoint::load(&checkpoint)?.config.gaits.len();
                (0..n).map(|m| (m, n)).collect()
            } else {
                selector.iter().map(|s| parse_selector(s)).collect::<Result<Vec<_>, _>>()?
            };
            let out = out_dir(out);
            let d = cmd_gait_diagram(&checkpoint, &selectors, &out)?;
            println!("{}/{} selectors classified as commanded", d.correct(), d.rows.len());
            print_table(&out.join("gait_diagram.csv"));
        }
    }
    Ok(())
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
