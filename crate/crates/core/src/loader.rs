//! Rebuilding a similarity space from the files the pipeline writes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{GcnModel, GraphError, GraphSpace, NodeEmbeddings};
use crate::meta::{MetaError, MetaSpace, MetaView, SourceManifest};
use crate::space::{SimilaritySpace, WordSpace};
use crate::taxonomy::Taxonomy;
use crate::vectors::{VectorError, VectorStore};

/// Source name of the plain word-vector space inside a meta-embedding.
pub const WORDS_SOURCE: &str = "words";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Meta(#[from] MetaError),
}

/// A source's manifest and its space.
pub type LoadedSource = (SourceManifest, Box<dyn SimilaritySpace>);

/// Where a GCN embedding file keeps its encoder weights.
pub fn gcn_sidecar(embeddings: &Path) -> PathBuf {
    let mut s = embeddings.as_os_str().to_owned();
    s.push(".gcn.json");
    PathBuf::from(s)
}

/// One source: word vectors when `graph` is `None`, otherwise the node
/// embeddings at that path (with a GCN encoder if one sits beside them).
pub fn load_source(
    store: &Arc<VectorStore>,
    taxonomy: &Taxonomy,
    graph: Option<&Path>,
) -> Result<(SourceManifest, Box<dyn SimilaritySpace>), LoadError> {
    let Some(path) = graph else {
        let space = WordSpace::new(store.clone(), taxonomy);
        let manifest = SourceManifest {
            name: WORDS_SOURCE.to_string(),
            dim: store.dim(),
            path: None,
        };
        return Ok((manifest, Box::new(space)));
    };
    let emb = NodeEmbeddings::load(path)?;
    let sidecar = gcn_sidecar(path);
    let gcn = if sidecar.exists() {
        Some(GcnModel::load(&sidecar)?)
    } else {
        None
    };
    let manifest = SourceManifest {
        name: emb.method().to_string(),
        dim: emb.dim(),
        path: Some(path.to_string_lossy().into_owned()),
    };
    Ok((manifest, Box::new(GraphSpace::new(store.clone(), taxonomy, emb, gcn))))
}

/// The files that determine a space. With `meta` set the sources come from
/// its manifest; otherwise at most one graph embedding may be given.
#[derive(Debug, Clone, Default)]
pub struct SpaceFiles {
    pub vectors: PathBuf,
    pub graph: Vec<PathBuf>,
    pub meta: Option<PathBuf>,
}

impl SpaceFiles {
    pub fn load_store(&self) -> Result<Arc<VectorStore>, LoadError> {
        Ok(Arc::new(VectorStore::load(&self.vectors)?))
    }

    pub fn build(&self, taxonomy: &Taxonomy) -> Result<Box<dyn SimilaritySpace>, LoadError> {
        let store = self.load_store()?;
        if let Some(meta_path) = &self.meta {
            if !self.graph.is_empty() {
                return Err(LoadError::Conflict(
                    "graph embeddings are taken from the meta-embedding manifest; drop --graph".into(),
                ));
            }
            let meta = MetaSpace::load(meta_path)?;
            let sources = meta
                .sources
                .iter()
                .map(|s| load_source(&store, taxonomy, s.path.as_deref().map(Path::new)).map(|(_, sp)| sp))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Box::new(MetaView::new(meta, sources, taxonomy)?));
        }
        match self.graph.as_slice() {
            [] => Ok(load_source(&store, taxonomy, None)?.1),
            [one] => Ok(load_source(&store, taxonomy, Some(one))?.1),
            _ => Err(LoadError::Conflict(
                "several graph embeddings need a meta-embedding (--meta)".into(),
            )),
        }
    }

    /// Word vectors followed by every graph embedding, for fitting a
    /// meta-embedding.
    pub fn sources(&self, taxonomy: &Taxonomy) -> Result<Vec<LoadedSource>, LoadError> {
        let store = self.load_store()?;
        std::iter::once(None)
            .chain(self.graph.iter().map(|p| Some(p.as_path())))
            .map(|g| load_source(&store, taxonomy, g))
            .collect()
    }
}
