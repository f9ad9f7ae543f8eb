mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use gestnet_core::imgproc::Threshold;

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "gestnet", version, about = "Static hand-gesture recognition with a CNN ensemble")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset root directory or manifest file
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long = "lr", global = true)]
    learning_rate: Option<f64>,
    /// Comma-separated member architectures
    #[arg(long, global = true, value_delimiter = ',')]
    members: Option<Vec<String>>,
    #[arg(long, global = true)]
    expand_ratio: Option<f64>,
    /// "auto" for Otsu, or a fixed level 0-255
    #[arg(long, global = true)]
    threshold: Option<Threshold>,
    /// Number of disjoint test parts for the t-test
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Hypothesized mean accuracy in percent
    #[arg(long, global = true)]
    mu: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Ensemble manifest, training output directory, or single member directory
    #[arg(long)]
    model: PathBuf,
    /// Split file selecting the test indices; defaults to the one next to the model
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a class-per-folder dataset and write its manifest
    Ingest,
    /// Segment and crop every image of a dataset
    Preprocess,
    /// Train the ensemble members and write the ensemble manifest
    Train,
    /// Accuracy and confusion matrices on the test split
    Eval(ModelArgs),
    /// One-sample t-test over k disjoint test parts
    Ttest(ModelArgs),
    /// Classify frames from a camera index or a directory of frames
    Live {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        source: String,
        /// Do not write annotated frames
        #[arg(long)]
        no_display: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    let c = cli.common;
    let overrides = Overrides {
        data: c.data,
        out: c.out,
        seed: c.seed,
        epochs: c.epochs,
        batch_size: c.batch_size,
        learning_rate: c.learning_rate,
        members: c.members,
        expand_ratio: c.expand_ratio,
        threshold: c.threshold,
        k: c.k,
        mu: c.mu,
    };
    let cfg = RunConfig::resolve(c.config.as_deref(), overrides)?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Preprocess => commands::preprocess(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval(m) => commands::eval(&cfg, &m.model, m.split.as_deref()),
        Command::Ttest(m) => commands::ttest(&cfg, &m.model, m.split.as_deref()),
        Command::Live { model, source, no_display } => commands::live(&cfg, &model, &source, !no_display),
    }
}

/// 3 for a missing artifact, 4 for divergence, 2 for any other input error.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<gestnet_core::Error>() {
            return match e {
                gestnet_core::Error::MissingArtifact(_) => 3,
                gestnet_core::Error::Divergence { .. } => 4,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let missing = anyhow::Error::new(gestnet_core::Error::MissingArtifact(PathBuf::from("m"))).context("loading");
        assert_eq!(exit_code(&missing), 3);
        let diverged = anyhow::Error::new(gestnet_core::Error::Divergence { epoch: 2, detail: "nan".into() });
        assert_eq!(exit_code(&diverged), 4);
        assert_eq!(exit_code(&anyhow::Error::new(gestnet_core::Error::Parameter("x".into()))), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("bad flag")), 2);
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from(["gestnet", "train", "--members", "basic_cnn,alexnet_like", "--lr", "0.01"]).unwrap();
        assert_eq!(cli.common.members.unwrap(), vec!["basic_cnn", "alexnet_like"]);
        assert_eq!(cli.common.learning_rate, Some(0.01));
        assert!(matches!(cli.command, Command::Train));
    }
}
