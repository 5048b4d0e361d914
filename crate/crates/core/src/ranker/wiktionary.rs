//! Dictionary evidence read from a four-column TSV:
//! `word TAB hyp1|hyp2 TAB syn1|syn2 TAB definition`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::RankerError;
use crate::taxonomy::normalize_lemma;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WiktionaryRecord {
    pub word: String,
    pub hypernyms: Vec<String>,
    pub synonyms: Vec<String>,
    /// Lowercased whitespace tokens of the definition.
    pub definition: Vec<String>,
}

impl WiktionaryRecord {
    /// Whether `lemma` occurs in the definition as a contiguous token run.
    pub fn defines_with(&self, lemma: &str) -> bool {
        let parts: Vec<&str> = lemma.split_whitespace().collect();
        if parts.is_empty() || parts.len() > self.definition.len() {
            return false;
        }
        self.definition
            .windows(parts.len())
            .any(|w| w.iter().zip(&parts).all(|(a, b)| a == b))
    }
}

fn split_list(field: Option<&str>) -> Vec<String> {
    field
        .unwrap_or("")
        .split('|')
        .map(normalize_lemma)
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct WiktionaryTable {
    records: HashMap<String, WiktionaryRecord>,
}

impl WiktionaryTable {
    /// Missing trailing columns read as empty; a repeated word keeps its
    /// first line.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, RankerError> {
        let mut records = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let word = normalize_lemma(cols.next().unwrap_or(""));
            if word.is_empty() {
                return Err(RankerError::Parse {
                    line: i + 1,
                    message: "empty word column".into(),
                });
            }
            let hypernyms = split_list(cols.next());
            let synonyms = split_list(cols.next());
            let definition = cols
                .next()
                .unwrap_or("")
                .split_whitespace()
                .map(str::to_lowercase)
                .collect();
            if cols.next().is_some() {
                return Err(RankerError::Parse {
                    line: i + 1,
                    message: "more than four columns".into(),
                });
            }
            records.entry(word.clone()).or_insert(WiktionaryRecord {
                word,
                hypernyms,
                synonyms,
                definition,
            });
        }
        Ok(WiktionaryTable { records })
    }

    pub fn load(path: &Path) -> Result<Self, RankerError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn get(&self, word: &str) -> Option<&WiktionaryRecord> {
        self.records.get(word)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, record: WiktionaryRecord) {
        self.records.insert(record.word.clone(), record);
    }
}
