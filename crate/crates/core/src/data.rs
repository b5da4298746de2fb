//! Synthetic parallel corpora and their on-disk format.
//!
//! A dataset directory holds `train.jsonl`, `valid.jsonl` and `test.jsonl`,
//! one `{"src": [ids], "tgt": [ids]}` object per line, plus `vocab.txt` whose
//! line `i` is the surface form of id `i`, and `spec.json` recording how the
//! corpus was generated.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::vocab::{surface, Token, NUM_RESERVED};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub src: Vec<Token>,
    pub tgt: Vec<Token>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Copy,
    Reverse,
    Sort,
    /// Token-substitution translation with local reordering.
    Lexmap,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copy" => Ok(Task::Copy),
            "reverse" => Ok(Task::Reverse),
            "sort" => Ok(Task::Sort),
            "lexmap" => Ok(Task::Lexmap),
            _ => Err(Error::InvalidArgument(format!(
                "unknown task `{s}` (expected copy, reverse, sort or lexmap)"
            ))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Copy => "copy",
            Task::Reverse => "reverse",
            Task::Sort => "sort",
            Task::Lexmap => "lexmap",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub task: Task,
    /// Total vocabulary size including the reserved ids.
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            task: Task::Lexmap,
            vocab_size: 32,
            min_len: 4,
            max_len: 12,
            n_train: 10_000,
            n_valid: 200,
            n_test: 200,
            seed: 1,
        }
    }
}

impl DatasetSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.vocab_size <= NUM_RESERVED as usize + 1 {
            v.push(format!(
                "data.vocab_size {} leaves fewer than two content tokens",
                self.vocab_size
            ));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            v.push(format!(
                "data length range {}..={} must be non-empty and start at 1 or more",
                self.min_len, self.max_len
            ));
        }
        if self.n_train == 0 {
            v.push("data.n_train must be positive".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    fn content_tokens(&self) -> usize {
        self.vocab_size - NUM_RESERVED as usize
    }
}

/// Fixed token bijection plus an optional swap of each adjacent position
/// pair `(0,1), (2,3), ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexMap {
    map: Vec<Token>,
    swap_pairs: bool,
}

impl LexMap {
    pub fn random(vocab_size: usize, seed: u64) -> Self {
        let mut map: Vec<Token> = (NUM_RESERVED..vocab_size as Token).collect();
        map.shuffle(&mut substream(seed, "lexmap", &[]));
        LexMap {
            map,
            swap_pairs: true,
        }
    }

    pub fn identity(vocab_size: usize) -> Self {
        LexMap {
            map: (NUM_RESERVED..vocab_size as Token).collect(),
            swap_pairs: false,
        }
    }

    pub fn apply(&self, src: &[Token]) -> Vec<Token> {
        let lookup = |t: Token| self.map[(t - NUM_RESERVED) as usize];
        (0..src.len())
            .map(|j| {
                let from = if self.swap_pairs && (j ^ 1) < src.len() { j ^ 1 } else { j };
                lookup(src[from])
            })
            .collect()
    }
}

fn target(task: Task, lex: &LexMap, src: &[Token]) -> Vec<Token> {
    match task {
        Task::Copy => src.to_vec(),
        Task::Reverse => src.iter().rev().copied().collect(),
        Task::Sort => {
            let mut t = src.to_vec();
            t.sort_unstable();
            t
        }
        Task::Lexmap => lex.apply(src),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: Vec<Pair>,
    pub valid: Vec<Pair>,
    pub test: Vec<Pair>,
}

/// Generates all three splits. Sources are drawn without repetition across
/// splits, so the splits are disjoint.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let lex = LexMap::random(spec.vocab_size, spec.seed);
    let mut rng = substream(spec.seed, "data", &[]);
    let mut seen = HashSet::new();
    let wanted = spec.n_train + spec.n_valid + spec.n_test;
    let mut pairs = Vec::with_capacity(wanted);
    let mut attempts = 0usize;
    while pairs.len() < wanted {
        attempts += 1;
        if attempts > 20 * wanted + 1000 {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {wanted} distinct sources from this vocabulary and length range"
            )));
        }
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let src: Vec<Token> = (0..len)
            .map(|_| NUM_RESERVED + rng.gen_range(0..spec.content_tokens()) as Token)
            .collect();
        if seen.insert(src.clone()) {
            let tgt = target(spec.task, &lex, &src);
            pairs.push(Pair { src, tgt });
        }
    }
    let test = pairs.split_off(spec.n_train + spec.n_valid);
    let valid = pairs.split_off(spec.n_train);
    Ok(Dataset {
        spec: spec.clone(),
        train: pairs,
        valid,
        test,
    })
}

impl Dataset {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, pairs) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            write_pairs(dir.join(format!("{name}.jsonl")), pairs)?;
        }
        let vocab: String = (0..self.spec.vocab_size as Token)
            .map(|t| surface(t) + "\n")
            .collect();
        let path = dir.join("vocab.txt");
        fs::write(&path, vocab).map_err(|e| Error::io(&path, e))?;
        let path = dir.join("spec.json");
        let spec = serde_json::to_string_pretty(&self.spec).expect("spec serializes");
        fs::write(&path, spec + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("spec.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let spec = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(Dataset {
            spec,
            train: read_pairs(dir.join("train.jsonl"))?,
            valid: read_pairs(dir.join("valid.jsonl"))?,
            test: read_pairs(dir.join("test.jsonl"))?,
        })
    }
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[Pair]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for p in pairs {
        serde_json::to_writer(&mut w, p).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads line-delimited pairs; blank lines are skipped.
pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<Pair>> {
    read_jsonl(path)
}

/// Reads one JSON value per non-blank line; parse errors carry the line number.
pub fn read_jsonl<V: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<V>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
