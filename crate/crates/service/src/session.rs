//! Annotation session state and its on-disk journal.
//!
//! A state directory holds:
//!
//! * `initial.jsonl`: the taxonomy the session started from,
//! * `queue.txt`: the words to annotate, one per line,
//! * `decisions.jsonl`: append-only log of decision and commit events,
//! * `taxonomy.jsonl`: snapshot of the working taxonomy after the last commit.
//!
//! Opening a directory replays the log over `initial.jsonl`, so the working
//! taxonomy survives restarts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use taxoenrich::ranker::{Pipeline, Ranker, RankerError, WiktionaryTable};
use taxoenrich::space::{Mask, SimilaritySpace, SpaceError};
use taxoenrich::taxonomy::{Taxonomy, TaxonomyError};
use thiserror::Error;

pub const INITIAL_FILE: &str = "initial.jsonl";
pub const QUEUE_FILE: &str = "queue.txt";
pub const LOG_FILE: &str = "decisions.jsonl";
pub const SNAPSHOT_FILE: &str = "taxonomy.jsonl";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("queue is empty")]
    EmptyQueue,
    #[error("k must be at least 1")]
    BadK,
    #[error("no vector for {0:?}")]
    Oov(String),
    #[error("unknown synset {0}")]
    UnknownSynset(String),
    #[error("{0:?} is not in the annotation queue")]
    UnknownWord(String),
    #[error("{0:?} was already committed")]
    AlreadyCommitted(String),
    #[error("{0:?} is not pending")]
    NotPending(String),
    #[error("{0:?} has no accepted hypernyms")]
    NoAccepts(String),
    #[error("state directory: {0}")]
    State(String),
    #[error("decision log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub word: String,
    pub synset_id: String,
    pub verdict: Verdict,
    pub annotator: String,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    Decision(Decision),
    Commit {
        word: String,
        new_synset_id: String,
        parents: Vec<String>,
        #[serde(default)]
        timestamp: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateView {
    pub synset_id: String,
    pub words: Vec<String>,
    pub score: f64,
    pub rank: usize,
}

/// Immutable ranking model shared by all requests.
pub struct Engine {
    pub ranker: Ranker,
    pub wiktionary: Option<WiktionaryTable>,
    pub k_assoc: usize,
}

/// What to seed a fresh state directory with. Ignored for files the
/// directory already has.
#[derive(Default)]
pub struct Seed {
    pub taxonomy: Option<Taxonomy>,
    pub queue: Option<Vec<String>>,
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

type DecisionKey = (String, String, String);

pub struct Session {
    dir: PathBuf,
    taxonomy: Taxonomy,
    space: Box<dyn SimilaritySpace>,
    engine: Engine,
    queue: Vec<String>,
    committed: BTreeMap<String, String>,
    decisions: BTreeMap<DecisionKey, Verdict>,
    log: File,
    log_len: usize,
}

impl Session {
    /// Open (or create) a state directory. `build_space` receives the
    /// initial taxonomy; committed synsets are inserted into it during
    /// replay.
    pub fn open<F>(dir: &Path, seed: Seed, engine: Engine, build_space: F) -> Result<Self, ServiceError>
    where
        F: FnOnce(&Taxonomy) -> Result<Box<dyn SimilaritySpace>, String>,
    {
        fs::create_dir_all(dir)?;
        let initial_path = dir.join(INITIAL_FILE);
        let initial = if initial_path.exists() {
            Taxonomy::load(&initial_path)?
        } else {
            let t = seed
                .taxonomy
                .ok_or_else(|| ServiceError::State(format!("{} has no {INITIAL_FILE}; pass a taxonomy", dir.display())))?;
            t.save(&initial_path)?;
            t
        };
        let queue_path = dir.join(QUEUE_FILE);
        let queue = if queue_path.exists() {
            read_queue(BufReader::new(File::open(&queue_path)?))?
        } else {
            let q = seed.queue.unwrap_or_default();
            write_atomic(&queue_path, q.iter().map(|w| format!("{w}\n")).collect::<String>().as_bytes())?;
            q
        };
        let space = build_space(&initial).map_err(ServiceError::State)?;
        let log_path = dir.join(LOG_FILE);
        let events = if log_path.exists() {
            read_log(BufReader::new(File::open(&log_path)?))?
        } else {
            Vec::new()
        };
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        let mut session = Session {
            dir: dir.to_path_buf(),
            taxonomy: initial,
            space,
            engine,
            queue,
            committed: BTreeMap::new(),
            decisions: BTreeMap::new(),
            log,
            log_len: 0,
        };
        for (i, event) in events.into_iter().enumerate() {
            let bad = |message: String| ServiceError::Log { line: i + 1, message };
            match event {
                Event::Decision(d) => {
                    session.record(d);
                }
                Event::Commit {
                    word,
                    new_synset_id,
                    parents,
                    ..
                } => {
                    let (t, id) = session.stage_commit(&word, &parents).map_err(|e| bad(e.to_string()))?;
                    if id != new_synset_id {
                        return Err(bad(format!("replay produced {id}, log says {new_synset_id}")));
                    }
                    session.finish_commit(word, t, id);
                }
            }
            session.log_len += 1;
        }
        session.write_snapshot()?;
        Ok(session)
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn queue(&self) -> &[String] {
        &self.queue
    }

    /// Number of events in the log, replayed ones included.
    pub fn log_len(&self) -> usize {
        self.log_len
    }

    /// The latest verdict per (word, synset, annotator).
    pub fn decisions(&self) -> &BTreeMap<DecisionKey, Verdict> {
        &self.decisions
    }

    pub fn next_word(&self) -> Result<(String, usize), ServiceError> {
        self.queue
            .first()
            .map(|w| (w.clone(), self.queue.len()))
            .ok_or(ServiceError::EmptyQueue)
    }

    pub fn candidates(&self, word: &str, k: usize) -> Result<Vec<CandidateView>, ServiceError> {
        if k == 0 {
            return Err(ServiceError::BadK);
        }
        let pipeline = Pipeline {
            space: self.space.as_ref(),
            taxonomy: &self.taxonomy,
            ranker: &self.engine.ranker,
            wiktionary: self.engine.wiktionary.as_ref(),
            k_assoc: self.engine.k_assoc,
        };
        let scored = pipeline.predict(word, k, &Mask::new()).map_err(|e| match e {
            RankerError::ZeroQuery(w) => ServiceError::Oov(w),
            other => other.into(),
        })?;
        Ok(scored
            .into_iter()
            .map(|c| CandidateView {
                words: self
                    .taxonomy
                    .synset(&c.synset_id)
                    .map(|s| s.words.clone())
                    .unwrap_or_default(),
                synset_id: c.synset_id,
                score: c.score,
                rank: c.rank,
            })
            .collect())
    }

    pub fn decide(&mut self, mut decision: Decision) -> Result<(), ServiceError> {
        if self.committed.contains_key(&decision.word) {
            return Err(ServiceError::AlreadyCommitted(decision.word));
        }
        if !self.queue.contains(&decision.word) {
            return Err(ServiceError::UnknownWord(decision.word));
        }
        if !self.taxonomy.contains(&decision.synset_id) {
            return Err(ServiceError::UnknownSynset(decision.synset_id));
        }
        if decision.timestamp == 0 {
            decision.timestamp = now_millis();
        }
        self.append(&Event::Decision(decision.clone()))?;
        self.record(decision);
        Ok(())
    }

    /// Attach `word` under every synset some annotator accepted for it.
    pub fn commit(&mut self, word: &str) -> Result<String, ServiceError> {
        if !self.queue.iter().any(|w| w == word) {
            return Err(ServiceError::NotPending(word.to_string()));
        }
        let parents = self.accepted(word);
        if parents.is_empty() {
            return Err(ServiceError::NoAccepts(word.to_string()));
        }
        let (t, id) = self.stage_commit(word, &parents)?;
        self.append(&Event::Commit {
            word: word.to_string(),
            new_synset_id: id.clone(),
            parents,
            timestamp: now_millis(),
        })?;
        self.finish_commit(word.to_string(), t, id.clone());
        self.write_snapshot()?;
        Ok(id)
    }

    pub fn export(&self) -> String {
        self.taxonomy.to_jsonl_string()
    }

    fn accepted(&self, word: &str) -> Vec<String> {
        let ids: BTreeSet<&String> = self
            .decisions
            .iter()
            .filter(|((w, _, _), v)| w == word && **v == Verdict::Accept)
            .map(|((_, id, _), _)| id)
            .collect();
        ids.into_iter().cloned().collect()
    }

    fn record(&mut self, d: Decision) {
        self.decisions.insert((d.word, d.synset_id, d.annotator), d.verdict);
    }

    /// New taxonomy with the word attached; the space already knows the new
    /// synset when this returns.
    fn stage_commit(&mut self, word: &str, parents: &[String]) -> Result<(Taxonomy, String), ServiceError> {
        let (t, id) = self.taxonomy.attach(word, parents)?;
        self.space.insert_synset(&t, &id)?;
        Ok((t, id))
    }

    fn finish_commit(&mut self, word: String, taxonomy: Taxonomy, id: String) {
        self.taxonomy = taxonomy;
        self.queue.retain(|w| *w != word);
        self.committed.insert(word, id);
    }

    fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        self.log.write_all(line.as_bytes())?;
        self.log.flush()?;
        self.log.sync_data()?;
        self.log_len += 1;
        Ok(())
    }

    fn write_snapshot(&self) -> Result<(), ServiceError> {
        write_atomic(&self.dir.join(SNAPSHOT_FILE), self.export().as_bytes())?;
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

/// Words to annotate: the first tab-separated field of each non-empty line,
/// so a query dataset TSV works as a queue file. Duplicates are dropped.
pub fn read_queue<R: BufRead>(reader: R) -> std::io::Result<Vec<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.split('\t').next().unwrap_or("").trim();
        if !word.is_empty() && seen.insert(word.to_string()) {
            out.push(word.to_string());
        }
    }
    Ok(out)
}

pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<Event>, ServiceError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| ServiceError::Log {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(event);
    }
    Ok(out)
}
