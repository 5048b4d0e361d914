use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use taxoenrich::dataset::{self, DatasetError, FilterConfig, IdMapping};
use taxoenrich::evaluation::{self, EvalError};
use taxoenrich::graph::{
    self, GcnConfig, GraphError, HopeConfig, Method, Node2VecConfig, PoincareConfig, TadwConfig,
};
use taxoenrich::loader::{gcn_sidecar, LoadError, SpaceFiles};
use taxoenrich::meta::{fit_meta, MetaConfig, MetaError, SourceSet, TripletConfig};
use taxoenrich::ranker::{
    self, build_training_set, train_ranker, Pipeline, Ranker, RankerConfig, RankerError, ScoredCandidate,
    TrainingConfig, WiktionaryTable,
};
use taxoenrich::space::Mask;
use taxoenrich::taxonomy::{Taxonomy, TaxonomyError};
use taxoenrich::vectors::{SynsetIndex, VectorError, VectorStore};
use taxoenrich_service::session::read_queue;
use taxoenrich_service::{Engine, Seed, ServiceError, Session};
use thiserror::Error;

use crate::{BuildDataset, Cli, Command, EmbedGraph, Evaluate, FitMeta, Predict, Serve, SpaceArgs, TrainRanker};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input file not found: {0}")]
    MissingInput(PathBuf),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::BuildDataset(a) => build_dataset(a),
        Command::EmbedGraph(a) => embed_graph(a, seed),
        Command::FitMeta(a) => fit_meta_cmd(a, seed),
        Command::TrainRanker(a) => train_ranker_cmd(a, seed),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a, seed),
        Command::Serve(a) => serve(a),
    }
}

fn require<'a, I: IntoIterator<Item = &'a PathBuf>>(paths: I) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::MissingInput(p.clone()));
        }
    }
    Ok(())
}

fn space_inputs(s: &SpaceArgs) -> Vec<&PathBuf> {
    std::iter::once(&s.vectors).chain(&s.graph).chain(&s.meta).collect()
}

fn space_files(s: &SpaceArgs) -> SpaceFiles {
    SpaceFiles {
        vectors: s.vectors.clone(),
        graph: s.graph.iter().cloned().collect(),
        meta: s.meta.clone(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_words(path: &Path) -> Result<Vec<String>> {
    Ok(read_queue(BufReader::new(File::open(path)?))?)
}

fn load_wiktionary(path: Option<&PathBuf>) -> Result<Option<WiktionaryTable>> {
    Ok(path.map(|p| WiktionaryTable::load(p)).transpose()?)
}

fn build_dataset(a: BuildDataset) -> Result<()> {
    require([&a.old, &a.new].into_iter().chain(&a.mapping))?;
    let old = Taxonomy::load(&a.old)?;
    let new = Taxonomy::load(&a.new)?;
    let mapping = a.mapping.as_ref().map(IdMapping::load).transpose()?;
    let filters = FilterConfig {
        min_length: a.min_length,
        substring_of_hypernym: a.drop_substring,
        multiword: a.drop_multiword,
    };
    let ds = dataset::diff_versions(&old, &new, &filters, mapping.as_ref())?;
    let mut out = create(&a.out)?;
    dataset::write_tsv(&ds.entries, &mut out)?;
    out.flush()?;
    println!("{} entries", ds.entries.len());
    Ok(())
}

fn text_features(vectors: Option<&PathBuf>, taxonomy: &Taxonomy, method: Method) -> Result<SynsetIndex> {
    let path = vectors.ok_or_else(|| CliError::Invalid(format!("--vectors is required for {method}")))?;
    let store = VectorStore::load(path)?;
    Ok(SynsetIndex::from_text(&store, taxonomy))
}

fn embed_graph(a: EmbedGraph, seed: u64) -> Result<()> {
    require(std::iter::once(&a.taxonomy).chain(&a.vectors))?;
    let t = Taxonomy::load(&a.taxonomy)?;
    let emb = match a.method {
        Method::Node2vec => {
            let mut cfg = Node2VecConfig { seed, ..Default::default() };
            cfg.dim = a.dim.unwrap_or(cfg.dim);
            cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
            graph::train_node2vec(&t, &cfg)?
        }
        Method::Poincare => {
            let mut cfg = PoincareConfig { seed, ..Default::default() };
            cfg.dim = a.dim.unwrap_or(cfg.dim);
            cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
            graph::train_poincare(&t, &cfg)?
        }
        Method::Tadw => {
            let features = text_features(a.vectors.as_ref(), &t, a.method)?;
            let mut cfg = TadwConfig { seed, ..Default::default() };
            cfg.dim = a.dim.unwrap_or(cfg.dim);
            cfg.iterations = a.epochs.unwrap_or(cfg.iterations);
            graph::train_tadw(&t, &features, &cfg)?
        }
        Method::Hope => {
            let mut cfg = HopeConfig::default();
            cfg.max_rank = a.dim.unwrap_or(cfg.max_rank);
            graph::train_hope(&t, &cfg)?
        }
        Method::Gcn => {
            let features = text_features(a.vectors.as_ref(), &t, a.method)?;
            let mut cfg = GcnConfig { seed, ..Default::default() };
            cfg.dim = a.dim.unwrap_or(cfg.dim);
            cfg.steps = a.epochs.unwrap_or(cfg.steps);
            let (emb, model) = graph::train_gcn(&t, &features, &cfg)?;
            model.save(&gcn_sidecar(&a.out))?;
            emb
        }
    };
    emb.save(&a.out)?;
    println!("{} synsets, dim {}", emb.len(), emb.dim());
    Ok(())
}

fn fit_meta_cmd(a: FitMeta, seed: u64) -> Result<()> {
    require([&a.taxonomy, &a.vectors].into_iter().chain(&a.graph).chain(&a.queries))?;
    let t = Taxonomy::load(&a.taxonomy)?;
    let files = SpaceFiles {
        vectors: a.vectors.clone(),
        graph: a.graph.clone(),
        meta: None,
    };
    let loaded = files.sources(&t)?;
    let (manifests, spaces): (Vec<_>, Vec<_>) = loaded.into_iter().unzip();
    let named = manifests
        .iter()
        .zip(&spaces)
        .map(|(m, s)| (m.name.clone(), s.as_ref()))
        .collect();
    let set = SourceSet::new(named)?;
    let extra = match &a.queries {
        Some(p) => load_words(p)?,
        None => Vec::new(),
    };
    let vocab = t.lemmas().chain(extra.iter().map(String::as_str));
    let table = set.shared_vocabulary(&t, vocab)?;
    let cfg = MetaConfig {
        mode: a.mode,
        dim: a.dim,
        epochs: a.epochs,
        batch_size: a.batch_size,
        step_size: a.step_size,
        triplet: a.triplet.then(TripletConfig::default),
        seed,
    };
    let meta = fit_meta(&table, manifests, &cfg, Some(&t))?;
    meta.save(&a.out)?;
    println!("{} tokens, meta dim {}", table.len(), meta.meta_dim);
    Ok(())
}

fn train_ranker_cmd(a: TrainRanker, seed: u64) -> Result<()> {
    require(space_inputs(&a.space).into_iter().chain([&a.taxonomy]).chain(&a.wiktionary))?;
    let t = Taxonomy::load(&a.taxonomy)?;
    let space = space_files(&a.space).build(&t)?;
    let wikt = load_wiktionary(a.wiktionary.as_ref())?;
    let tcfg = TrainingConfig {
        n_pseudo: a.n_pseudo,
        k_assoc: a.k_assoc,
        seed,
    };
    let (data, kept) = build_training_set(&t, space.as_ref(), wikt.as_ref(), &tcfg)?;
    let model = train_ranker(&ranker::schema(), &data, &RankerConfig { seed, ..Default::default() })?;
    model.save(&a.out)?;
    println!("{} pseudo-queries, {} rows, l2 {}", kept.len(), data.len(), model.l2);
    Ok(())
}

fn predict(a: Predict) -> Result<()> {
    require(
        space_inputs(&a.space)
            .into_iter()
            .chain([&a.taxonomy, &a.ranker, &a.words])
            .chain(&a.wiktionary),
    )?;
    if a.k == 0 {
        return Err(CliError::Invalid("--k must be at least 1".into()));
    }
    let t = Taxonomy::load(&a.taxonomy)?;
    let space = space_files(&a.space).build(&t)?;
    let model = Ranker::load(&a.ranker)?;
    let wikt = load_wiktionary(a.wiktionary.as_ref())?;
    let words = load_words(&a.words)?;
    let pipeline = Pipeline {
        space: space.as_ref(),
        taxonomy: &t,
        ranker: &model,
        wiktionary: wikt.as_ref(),
        k_assoc: a.k_assoc,
    };
    let mask = Mask::new();
    let results: Vec<(String, std::result::Result<Vec<ScoredCandidate>, RankerError>)> = words
        .par_iter()
        .map(|w| (w.clone(), pipeline.predict(w, a.k, &mask)))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut missed = 0usize;
    for (w, r) in results {
        match r {
            Ok(preds) => ok.push((w, preds)),
            Err(RankerError::ZeroQuery(_)) => {
                log::warn!("no vector for {w:?}; skipped");
                missed += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut out = create(&a.out)?;
    ranker::write_predictions(&mut out, &ok)?;
    out.flush()?;
    println!("{} words ranked, {missed} without a vector", ok.len());
    Ok(())
}

fn evaluate(a: Evaluate, seed: u64) -> Result<()> {
    require([&a.pred, &a.gold, &a.taxonomy])?;
    if a.k == 0 {
        return Err(CliError::Invalid("--k must be at least 1".into()));
    }
    let t = Taxonomy::load(&a.taxonomy)?;
    let gold = dataset::load_tsv(&a.gold)?;
    let preds: BTreeMap<String, Vec<String>> = ranker::load_predictions(&a.pred)?;
    let report = evaluation::evaluate(&preds, &gold, &t, a.k, seed)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, &json)?,
        None => print!("{json}"),
    }
    if let Some(p) = &a.per_query {
        std::fs::write(p, report.per_query_tsv())?;
    }
    Ok(())
}

fn serve(a: Serve) -> Result<()> {
    require(
        space_inputs(&a.space)
            .into_iter()
            .chain([&a.ranker])
            .chain(&a.taxonomy)
            .chain(&a.queue)
            .chain(&a.wiktionary),
    )?;
    let seed = Seed {
        taxonomy: a.taxonomy.as_ref().map(Taxonomy::load).transpose()?,
        queue: a.queue.as_deref().map(load_words).transpose()?,
    };
    let engine = Engine {
        ranker: Ranker::load(&a.ranker)?,
        wiktionary: load_wiktionary(a.wiktionary.as_ref())?,
        k_assoc: a.k_assoc,
    };
    let files = space_files(&a.space);
    let session = Session::open(&a.state_dir, seed, engine, |t| files.build(t).map_err(|e| e.to_string()))?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::Invalid(format!("bad address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(taxoenrich_service::serve(Arc::new(RwLock::new(session)), addr))?;
    Ok(())
}
