use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use acuity::cli::{
    cmd_rf, cmd_sweep, cmd_synth_data, cmd_train, cmd_transfer, init_threads, parse_config_text, RunConfig,
};
use acuity::Error;

#[derive(Parser)]
#[command(name = "acur", version, about = "Acuity-curriculum training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train under a protocol schedule; writes checkpoints, log.csv, run.json.
    Train(Common),
    /// Accuracy sweep over blur sigma or shrink factor; writes sweep CSV.
    Sweep(Common),
    /// Linear-SVM transfer from hidden layers onto a target corpus.
    Transfer(Common),
    /// First-layer receptive-field report as JSON.
    Rf(Common),
    /// Write a seeded synthetic face corpus as PGM files.
    SynthData(Common),
}

#[derive(Args)]
struct Common {
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<String>,
    /// full | desk
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    epochs_scale: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// Comma-separated shrink factors for coin-shrink training phases.
    #[arg(long)]
    factors: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// Corpus root (per-identity folders of PGM files); synthetic if omitted.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Checkpoint file(s) or run directory, comma-separated.
    #[arg(long)]
    checkpoint: Option<String>,
    /// Comma-separated layer indices for transfer.
    #[arg(long)]
    layers: Option<String>,
    /// blur | shrink
    #[arg(long)]
    axis: Option<String>,
    /// Extra key=value settings, e.g. `--set lr=0.005`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

impl Common {
    fn settings(&self) -> acuity::Result<Vec<(String, String)>> {
        let mut out = match &self.config {
            Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
            None => Vec::new(),
        };
        let flags = [
            ("protocol", &self.protocol),
            ("scale", &self.scale),
            ("epochs_scale", &self.epochs_scale),
            ("sigma", &self.sigma),
            ("factors", &self.factors),
            ("seed", &self.seed),
            ("reps", &self.reps),
            ("data", &self.data),
            ("out", &self.out),
            ("checkpoint", &self.checkpoint),
            ("layers", &self.layers),
            ("axis", &self.axis),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        for kv in &self.extra {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Param(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            out.push((k.to_string(), v.to_string()));
        }
        Ok(out)
    }
}

fn run(cli: Cli) -> acuity::Result<()> {
    init_threads()?;
    let (Command::Train(c)
    | Command::Sweep(c)
    | Command::Transfer(c)
    | Command::Rf(c)
    | Command::SynthData(c)) = &cli.command;
    let cfg = RunConfig::resolve(&c.settings()?)?;
    match cli.command {
        Command::Train(_) => {
            let outcome = cmd_train(&cfg)?;
            for path in outcome.checkpoints {
                println!("{}", path.display());
            }
        }
        Command::Sweep(_) => {
            let result = cmd_sweep(&cfg)?;
            println!("{}\tmean\tste\tn_reps", cfg.axis.as_str());
            for p in &result.points {
                println!("{}\t{:.4}\t{:.4}\t{}", p.param, p.mean, p.ste, p.n_reps);
            }
            println!("auc\t{:.4}", result.auc);
        }
        Command::Transfer(_) => {
            let points = cmd_transfer(&cfg)?;
            println!("layer\tdim\ttrain_acc\ttest_acc");
            for p in points {
                println!("{}\t{}\t{:.4}\t{:.4}", p.layer, p.dim, p.train_acc, p.test_acc);
            }
        }
        Command::Rf(_) => {
            let report = cmd_rf(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::SynthData(_) => {
            let n = cmd_synth_data(&cfg)?;
            println!("wrote {n} images under {}", cfg.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("acur: {e}");
            match e {
                Error::Param(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
