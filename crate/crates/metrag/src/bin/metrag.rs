//! Thin command-line front end; all logic lives in the library's `cli`
//! module.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use metrag::cli::{self, CliError, EvalFlags, RunConfig};
use metrag::evalgen::KnowledgeKind;

#[derive(Parser)]
#[command(name = "metrag", version, about = "Retrieval-augmented QA engine")]
struct Args {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "metrag.toml")]
    config: PathBuf,
    /// Override the corpus path from the config.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Override the dataset path from the config.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Override the output directory from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Override the run seed from the config.
    #[arg(long, global = true)]
    seed: Option<i64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and persist the retrieval index.
    Ingest,
    /// Train the utility encoder against the configured oracle.
    TrainUtility {
        /// Override the number of training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Override the training window size.
        #[arg(long)]
        window_size: Option<usize>,
    },
    /// Rank the corpus against a query by similarity.
    Retrieve {
        query: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Show similarity and utility rankings and the fused admitted set.
    Fuse {
        query: String,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        k_sim: Option<usize>,
        #[arg(long)]
        k_util: Option<usize>,
    },
    /// Extractively summarize the admitted documents for a query.
    Summarize { query: String },
    /// Build the instruction-summary and alignment corpora.
    BuildCorpora,
    /// Answer a single query with the full pipeline.
    Answer { query: String },
    /// Evaluate the dataset and write report.csv and aggregate.json.
    Eval {
        /// Knowledge handed to the generator: raw, summary, or none.
        #[arg(long)]
        knowledge: Option<String>,
        /// Skip fusion: similarity-only retrieval.
        #[arg(long)]
        no_fusion: bool,
        /// Skip summarization: raw admitted documents.
        #[arg(long)]
        no_summary: bool,
    },
    /// Re-check the provenance of artifacts under the output directory.
    Verify,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(corpus) = args.corpus {
        config.corpus = corpus;
    }
    if let Some(dataset) = args.dataset {
        config.dataset = dataset;
    }
    if let Some(output_dir) = args.output_dir {
        config.output_dir = output_dir;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    match args.command {
        Command::Ingest => {
            cli::cmd_ingest(&config)?;
        }
        Command::TrainUtility { epochs, window_size } => {
            if let Some(epochs) = epochs {
                config.utility.epochs = epochs;
            }
            if let Some(window) = window_size {
                config.utility.window_size = window;
            }
            cli::cmd_train_utility(&config)?;
        }
        Command::Retrieve { query, k } => {
            cli::cmd_retrieve(&config, &query, k)?;
        }
        Command::Fuse {
            query,
            top_k,
            k_sim,
            k_util,
        } => {
            if let Some(top_k) = top_k {
                config.fusion.top_k = top_k;
            }
            if let Some(k_sim) = k_sim {
                config.fusion.k_sim = Some(k_sim);
            }
            if let Some(k_util) = k_util {
                config.fusion.k_util = Some(k_util);
            }
            config.validate()?;
            cli::cmd_fuse(&config, &query)?;
        }
        Command::Summarize { query } => {
            cli::cmd_summarize(&config, &query)?;
        }
        Command::BuildCorpora => {
            cli::cmd_build_corpora(&config)?;
        }
        Command::Answer { query } => {
            cli::cmd_answer(&config, &query)?;
        }
        Command::Eval {
            knowledge,
            no_fusion,
            no_summary,
        } => {
            let kind = match knowledge.as_deref() {
                Some("raw") => Some(KnowledgeKind::RawDocs),
                Some("summary") => Some(KnowledgeKind::Summary),
                Some("none") => Some(KnowledgeKind::None),
                Some(other) => {
                    return Err(CliError::Input(format!("unknown knowledge kind {other:?}")))
                }
                None => None,
            };
            cli::cmd_eval(
                &config,
                &EvalFlags {
                    no_fusion,
                    no_summary,
                    knowledge: kind,
                },
            )?;
        }
        Command::Verify => {
            cli::cmd_verify(&config)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
