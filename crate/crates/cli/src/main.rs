use std::path::PathBuf;
use std::process::ExitCode;

use artist_embed::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod report;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "artist-embed", version, about = "Artist embeddings from audio: train, embed, evaluate, cluster")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice. Required here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (a directory for `synth`, a file otherwise; stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a config key, e.g. `--set train.tag_bias=0.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic dataset (WAV files, manifest, group map).
    Synth,
    /// Train an embedding network on the train/val splits of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// History CSV (defaults to `<out>.history.csv`).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Embed the tracks of a manifest with a trained checkpoint.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Only embed tracks of this split.
        #[arg(long)]
        split: Option<String>,
    },
    /// Nearest-neighbour artist classification accuracy.
    EvalClassify {
        #[arg(long)]
        embeddings: PathBuf,
    },
    /// Verification equal error rate, with the FPR/FNR curve.
    EvalVerify {
        #[arg(long)]
        embeddings: PathBuf,
        /// Where to write the threshold,fpr,fnr curve.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Homonym clustering with cross-validated thresholds.
    Cluster {
        #[arg(long)]
        embeddings: PathBuf,
        /// JSON map of group id to artist ids.
        #[arg(long)]
        groups: PathBuf,
        /// Value of the `task` column.
        #[arg(long, default_value = "cluster")]
        task_label: String,
        /// Append rows to an existing CSV instead of overwriting it.
        #[arg(long)]
        append: bool,
    },
}

fn load_config(common: &Common) -> artist_embed::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        cfg.apply(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    cfg.finish()
}

fn run(cli: Cli) -> artist_embed::Result<()> {
    let cfg = load_config(&cli.common)?;
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let out = cli.common.out.as_deref();
    match cli.command {
        Command::Synth => commands::synth(&cfg, out),
        Command::Train { manifest, history } => commands::train(&cfg, &manifest, out, history.as_deref()),
        Command::Embed { checkpoint, manifest, split } => {
            commands::embed(&checkpoint, &manifest, split.as_deref(), out)
        }
        Command::EvalClassify { embeddings } => commands::eval_classify(&cfg, &embeddings, out),
        Command::EvalVerify { embeddings, curve } => commands::eval_verify(&cfg, &embeddings, out, curve.as_deref()),
        Command::Cluster {
            embeddings,
            groups,
            task_label,
            append,
        } => commands::cluster(&cfg, &embeddings, &groups, &task_label, append, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
