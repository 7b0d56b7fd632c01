use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hydragan::commands;
use hydragan::{CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "hydragan", version, about = "Multi-head GAN for privacy-aware synthetic tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set epochs=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self, extra: &[(&str, Option<String>)]) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for pair in &self.overrides {
            cfg.set_pair(pair)?;
        }
        if let Some(s) = self.seed {
            cfg.set("seed", &s.to_string())?;
        }
        for (k, v) in extra {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the data, train the agents and write a checkpoint directory.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Name of the sensitive column.
        #[arg(long)]
        sensitive: Option<String>,
        /// Checkpoint directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Fixed head count instead of elbow selection.
        #[arg(long)]
        heads: Option<usize>,
    },
    /// Sample synthetic rows from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        rows: usize,
        /// Defaults to the training seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a synthetic table against the real one.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        sensitive: Option<String>,
        /// Directory for report.json and radar.csv.
        #[arg(long)]
        output: PathBuf,
    },
    /// Check that no agent can improve its cost by a small unilateral change.
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the full report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic fixture dataset (blobs3, copycol or heartlike).
    MakeToy {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train {
            cfg,
            dataset,
            sensitive,
            output,
            epochs,
            heads,
        } => {
            let cfg = cfg.resolve(&[
                ("dataset", path_str(&dataset)),
                ("sensitive", sensitive),
                ("output", path_str(&output)),
                ("epochs", epochs.map(|e| e.to_string())),
                ("n_heads", heads.map(|h| h.to_string())),
            ])?;
            let out = commands::cmd_train(&cfg)?;
            println!(
                "trained {} epochs, {} heads (cluster sizes {:?}), reid active {:?}",
                out.epochs, out.n_heads, out.cluster_sizes, out.reid_active
            );
            println!("checkpoint {} config_hash {}", out.checkpoint.display(), out.config_hash);
        }
        Command::Generate {
            checkpoint,
            rows,
            seed,
            output,
        } => {
            commands::cmd_generate(&checkpoint, rows, seed, &output)?;
            println!("wrote {rows} rows to {}", output.display());
        }
        Command::Evaluate {
            cfg,
            real,
            synth,
            sensitive,
            output,
        } => {
            let cfg = cfg.resolve(&[("sensitive", sensitive)])?;
            let r = commands::cmd_evaluate(&real, &synth, &cfg, &output)?;
            println!("inverse_em {:.4}", r.inverse_em);
            println!("inverse_model_mae {:.4}", r.inverse_model_mae);
            println!("reid_mae {:.4}", r.reid_mae);
        }
        Command::Probe {
            checkpoint,
            gamma,
            epsilon,
            trials,
            seed,
            output,
        } => {
            let overrides: Vec<String> = [
                ("probe.gamma", gamma.map(|v| v.to_string())),
                ("probe.epsilon", epsilon.map(|v| v.to_string())),
                ("probe.trials", trials.map(|v| v.to_string())),
                ("seed", seed.map(|v| v.to_string())),
            ]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| format!("{k}={v}")))
            .collect();
            let out = commands::cmd_probe(&checkpoint, &overrides, output.as_deref())?;
            for a in &out.report.agents {
                println!("{} pass_fraction {:.3}", a.name, a.pass_fraction);
            }
        }
        Command::MakeToy {
            kind,
            rows,
            seed,
            output,
        } => {
            let data = commands::cmd_make_toy(&kind, rows, seed, &output)?;
            println!(
                "wrote {} rows x {} columns to {} (suggested sensitive column: {})",
                data.rows.rows(),
                data.rows.cols(),
                output.display(),
                data.sensitive
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

