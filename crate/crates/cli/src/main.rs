//! Command-line entry point wiring corpus handling, pseudonymization,
//! synthetic generation, experiments, and agreement scoring into
//! reproducible batch commands.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error,
//! 3 internal error.

mod commands;
mod config;
mod error;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::Overrides;
use gavel::learners::Algorithm;
use gavel::sampling::RebalanceTargets;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gavel",
    version,
    about = "Per-judge outcome modelling over structured court rulings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and print its composition.
    Ingest {
        /// JSON-lines corpus of rulings.
        #[arg(long)]
        corpus: PathBuf,
        /// Feature schema JSON; the built-in custody schema otherwise.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Rulings a judge needs (strictly more) for an own bucket.
        #[arg(long, default_value_t = 300)]
        threshold: usize,
    },
    /// Replace known names with dictionary pseudonyms in a document set.
    Pseudonymize {
        /// Directory of plain-text documents.
        #[arg(long)]
        docs: PathBuf,
        /// Original names, one per line.
        #[arg(long)]
        names: PathBuf,
        /// Pseudonym dictionary, one seven-letter word per line.
        #[arg(long)]
        dictionary: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for redacted documents and the sealed table.
        #[arg(long)]
        out: PathBuf,
        /// Match names only with their exact accents.
        #[arg(long)]
        exact_accents: bool,
        /// Record wall-clock time in the manifest.
        #[arg(long)]
        stamp: bool,
    },
    /// Train per-judge and pooled models and write the report bundle.
    Run(RunArgs),
    /// Retrain with feature clusters removed and report the F1 deltas.
    Ablate(AblateArgs),
    /// Generate a synthetic corpus plus a sealed labeling oracle.
    Synth {
        /// Generator spec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Record wall-clock time in the manifest.
        #[arg(long)]
        stamp: bool,
    },
    /// Score predicted labels against gold annotations.
    ExtractEval {
        /// Predicted labels CSV (case_id,child_id,stage,label).
        #[arg(long)]
        predictions: PathBuf,
        /// Gold labels CSV in the same format and row order.
        #[arg(long)]
        gold: PathBuf,
        /// Optional directory for the agreement report and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores otherwise.
    #[arg(long)]
    jobs: Option<usize>,
    /// Learner subset, comma-separated.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<AlgorithmArg>>,
    /// Published rebalance mix.
    #[arg(long, value_enum)]
    run_preset: Option<PresetArg>,
    /// Record wall-clock time in the manifest.
    #[arg(long)]
    stamp: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Feature clusters to remove, comma-separated ids in 1..=3.
    #[arg(long, value_delimiter = ',', required = true)]
    clusters: Vec<u8>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Rf,
    Gbt,
    Svc,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Algorithm {
        match a {
            AlgorithmArg::Rf => Algorithm::Rf,
            AlgorithmArg::Gbt => Algorithm::Gbt,
            AlgorithmArg::Svc => Algorithm::Svc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Rebalance classes to 34/33/33.
    Run1,
    /// Rebalance classes to 40/30/30.
    Run2,
}

impl From<PresetArg> for RebalanceTargets {
    fn from(p: PresetArg) -> RebalanceTargets {
        match p {
            PresetArg::Run1 => RebalanceTargets::run1(),
            PresetArg::Run2 => RebalanceTargets::run2(),
        }
    }
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            config: self.config.clone(),
            corpus: self.corpus.clone(),
            out: self.out.clone(),
            seed: self.seed,
            jobs: self.jobs,
            algorithms: self
                .algorithms
                .as_ref()
                .map(|list| list.iter().map(|&a| a.into()).collect()),
            run_preset: self.run_preset.map(Into::into),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), error::CliError> {
    match cli.command {
        Command::Ingest { corpus, schema, threshold } => {
            commands::cmd_ingest(&corpus, schema.as_deref(), threshold)
        }
        Command::Pseudonymize { docs, names, dictionary, seed, out, exact_accents, stamp } => {
            commands::cmd_pseudonymize(commands::PseudonymizeArgs {
                docs: &docs,
                names: &names,
                dictionary: &dictionary,
                seed,
                out: &out,
                exact_accents,
                stamp,
            })
        }
        Command::Run(args) => commands::cmd_run(args.overrides(), args.stamp),
        Command::Ablate(args) => {
            commands::cmd_ablate(args.run.overrides(), &args.clusters, args.run.stamp)
        }
        Command::Synth { spec, out, stamp } => commands::cmd_synth(&spec, &out, stamp),
        Command::ExtractEval { predictions, gold, out } => {
            commands::cmd_extract_eval(&predictions, &gold, out.as_deref())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
