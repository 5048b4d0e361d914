//! `taxoenrich`: one subcommand per pipeline step.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taxoenrich::graph::Method;
use taxoenrich::meta::MetaMode;

#[derive(Debug, Parser)]
#[command(name = "taxoenrich", version, about = "Attach new words to a hypernymy taxonomy")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diff two taxonomy releases into a query/gold TSV.
    BuildDataset(BuildDataset),
    /// Train synset embeddings of the taxonomy graph.
    EmbedGraph(EmbedGraph),
    /// Fit a meta-embedding over word vectors and graph embeddings.
    FitMeta(FitMeta),
    /// Train the candidate ranker on pseudo-queries from the taxonomy.
    TrainRanker(TrainRanker),
    /// Rank candidate hypernyms for query words.
    Predict(Predict),
    /// Score predictions against gold hypernyms.
    Evaluate(Evaluate),
    /// Run the annotation HTTP service.
    Serve(Serve),
}

#[derive(Debug, Args)]
pub struct BuildDataset {
    /// Older taxonomy release (JSON Lines).
    #[arg(long)]
    pub old: PathBuf,
    /// Newer taxonomy release (JSON Lines).
    #[arg(long)]
    pub new: PathBuf,
    /// Output TSV: word, comma-separated gold synset ids.
    #[arg(long)]
    pub out: PathBuf,
    /// Drop words shorter than this many characters.
    #[arg(long)]
    pub min_length: Option<usize>,
    /// Drop words that contain a lemma of one of their gold synsets.
    #[arg(long)]
    pub drop_substring: bool,
    /// Drop multiword expressions.
    #[arg(long)]
    pub drop_multiword: bool,
    /// TSV of old_id, new_id pairs for releases whose ids differ.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedGraph {
    /// node2vec, poincare, tadw, hope or gcn.
    #[arg(long)]
    pub method: Method,
    /// Taxonomy (JSON Lines).
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Word vectors (word2vec text); required by tadw and gcn.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Output embeddings (word2vec text, with a .meta sidecar; gcn also
    /// writes <out>.gcn.json).
    #[arg(long)]
    pub out: PathBuf,
    /// Embedding dimension (for hope, the maximum rank).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Epochs (node2vec, poincare), iterations (tadw) or steps (gcn).
    #[arg(long)]
    pub epochs: Option<usize>,
}

/// The files that define the similarity space candidates come from.
#[derive(Debug, Args, Clone)]
pub struct SpaceArgs {
    /// Word vectors (word2vec text).
    #[arg(long)]
    pub vectors: PathBuf,
    /// Graph embeddings to use instead of word vectors.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Meta-embedding (JSON from fit-meta); its sources are reloaded from
    /// the paths it records.
    #[arg(long, conflicts_with = "graph")]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitMeta {
    /// Taxonomy (JSON Lines); its lemmas form the training vocabulary.
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Word vectors (word2vec text), always the first source.
    #[arg(long)]
    pub vectors: PathBuf,
    /// Graph embeddings to add as sources (repeatable).
    #[arg(long, required = true)]
    pub graph: Vec<PathBuf>,
    /// Extra vocabulary: query TSV or one word per line.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// concat, svd, caeme or aaeme.
    #[arg(long, default_value = "aaeme")]
    pub mode: MetaMode,
    /// Target dimension (svd) or shared encoding width (aaeme).
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub step_size: f64,
    /// Add the triplet term that pulls related lemmas together.
    #[arg(long)]
    pub triplet: bool,
    /// Output meta-embedding (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainRanker {
    /// Taxonomy (JSON Lines).
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Wiktionary records (TSV: word, hypernyms, synonyms, definition).
    #[arg(long)]
    pub wiktionary: Option<PathBuf>,
    /// Number of pseudo-queries drawn from leaf lemmas.
    #[arg(long, default_value_t = 1000)]
    pub n_pseudo: usize,
    /// Associates retrieved per query.
    #[arg(long, default_value_t = 10)]
    pub k_assoc: usize,
    /// Output ranker (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Predict {
    /// Taxonomy (JSON Lines).
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Ranker (JSON from train-ranker).
    #[arg(long)]
    pub ranker: PathBuf,
    /// Query words: query TSV or one word per line.
    #[arg(long)]
    pub words: PathBuf,
    /// Wiktionary records (TSV: word, hypernyms, synonyms, definition).
    #[arg(long)]
    pub wiktionary: Option<PathBuf>,
    /// Candidates kept per word.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Associates retrieved per query.
    #[arg(long, default_value_t = 10)]
    pub k_assoc: usize,
    /// Output TSV: word, rank, synset_id, score.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    /// Predictions TSV from predict.
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold query TSV from build-dataset.
    #[arg(long)]
    pub gold: PathBuf,
    /// Taxonomy the gold ids refer to (JSON Lines).
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Predictions considered per word.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-query AP as TSV.
    #[arg(long)]
    pub per_query: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Serve {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Session directory; created and seeded on first use.
    #[arg(long)]
    pub state_dir: PathBuf,
    /// Initial taxonomy (needed only for a new state directory).
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Words to annotate (needed only for a new state directory).
    #[arg(long)]
    pub queue: Option<PathBuf>,
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Ranker (JSON from train-ranker).
    #[arg(long)]
    pub ranker: PathBuf,
    /// Wiktionary records (TSV: word, hypernyms, synonyms, definition).
    #[arg(long)]
    pub wiktionary: Option<PathBuf>,
    /// Associates retrieved per query.
    #[arg(long, default_value_t = 10)]
    pub k_assoc: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
