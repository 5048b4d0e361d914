//! Taxonomy enrichment: attach new words to an existing hypernymy taxonomy
//! by ranking candidate parents drawn from text and graph vector spaces.

pub mod dataset;
pub mod evaluation;
pub mod geometry;
pub mod graph;
pub mod linalg;
pub mod loader;
pub mod meta;
pub mod ranker;
pub mod space;
pub mod taxonomy;
pub mod vectors;
