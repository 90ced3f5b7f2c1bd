//! Phoneme sequences, evaluation items and the line-delimited corpus format.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id": "img_001", "hyp": "AH0 B IY1", "refs": ["AH0 B IY1", "AH B"]}
//! ```
//!
//! Blank lines are ignored. Line numbers in errors are 1-based and count
//! blank lines.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered list of opaque phoneme tokens belonging to one item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhonemeSeq {
    id: String,
    tokens: Vec<String>,
}

impl PhonemeSeq {
    /// Builds a sequence, rejecting empty tokens and tokens containing whitespace.
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Result<Self> {
        let id = id.into();
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::Validation(format!(
                "item {id}: invalid phoneme token {bad:?}"
            )));
        }
        Ok(Self { id, tokens })
    }

    /// Tokenizes a whitespace-separated phoneme string.
    pub fn parse(id: impl Into<String>, line: &str, strip_stress: bool) -> Self {
        Self {
            id: id.into(),
            tokens: tokenize(line, strip_stress),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Renders the tokens back to a single-space separated line.
    pub fn to_line(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Splits on whitespace, optionally removing trailing ARPABET stress digits.
///
/// A token made only of digits is kept unchanged rather than stripped to
/// nothing.
pub fn tokenize(line: &str, strip_stress: bool) -> Vec<String> {
    line.split_whitespace()
        .map(|tok| {
            if strip_stress {
                let stripped = tok.trim_end_matches(|c: char| c.is_ascii_digit());
                if stripped.is_empty() {
                    tok.to_string()
                } else {
                    stripped.to_string()
                }
            } else {
                tok.to_string()
            }
        })
        .collect()
}

/// One hypothesis with its references, all sharing the item id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalItem {
    id: String,
    hypothesis: PhonemeSeq,
    references: Vec<PhonemeSeq>,
}

impl EvalItem {
    pub fn new(
        id: impl Into<String>,
        hypothesis: Vec<String>,
        references: Vec<Vec<String>>,
    ) -> Result<Self> {
        let id = id.into();
        if references.is_empty() {
            return Err(Error::Validation(format!("item {id}: no references")));
        }
        if let Some(pos) = references.iter().position(Vec::is_empty) {
            return Err(Error::Validation(format!(
                "item {id}: reference {pos} is empty"
            )));
        }
        let hypothesis = PhonemeSeq::new(id.clone(), hypothesis)?;
        let references = references
            .into_iter()
            .map(|r| PhonemeSeq::new(id.clone(), r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            id,
            hypothesis,
            references,
        })
    }

    /// Convenience constructor from whitespace-separated strings, without stress stripping.
    pub fn from_strs(id: &str, hyp: &str, refs: &[&str]) -> Result<Self> {
        Self::new(
            id,
            tokenize(hyp, false),
            refs.iter().map(|r| tokenize(r, false)).collect(),
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn hypothesis(&self) -> &PhonemeSeq {
        &self.hypothesis
    }

    pub fn references(&self) -> &[PhonemeSeq] {
        &self.references
    }

    /// Same references, different hypothesis.
    pub fn with_hypothesis(&self, tokens: Vec<String>) -> Result<Self> {
        Ok(Self {
            id: self.id.clone(),
            hypothesis: PhonemeSeq::new(self.id.clone(), tokens)?,
            references: self.references.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub strip_stress: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { strip_stress: true }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    hyp: String,
    refs: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct HypRecord {
    id: String,
    hyp: String,
}

#[derive(Debug, Deserialize)]
struct RefsRecord {
    id: String,
    refs: Vec<String>,
}

/// Deserializes each non-blank line as `T`, returning `(line_number, record)` pairs.
fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead, source_name: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str::<T>(&line).map_err(|e| {
            let msg = e.to_string();
            // serde_json appends its own position, which is always line 1 here.
            let msg = match msg.rfind(" at line ") {
                Some(cut) => msg[..cut].to_string(),
                None => msg,
            };
            Error::parse(source_name, lineno, msg)
        })?;
        out.push((lineno, record));
    }
    Ok(out)
}

fn check_unique<'a>(ids: impl Iterator<Item = (usize, &'a str)>, source_name: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for (lineno, id) in ids {
        if !seen.insert(id) {
            return Err(Error::Validation(format!(
                "{source_name}: line {lineno}: duplicate id {id:?}"
            )));
        }
    }
    Ok(())
}

fn located(err: Error, source_name: &str, lineno: usize) -> Error {
    match err {
        Error::Validation(msg) => Error::Validation(format!("{source_name}: line {lineno}: {msg}")),
        other => other,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Parses corpus records from any reader; `source_name` labels errors.
pub fn parse_corpus(reader: impl BufRead, source_name: &str, opts: LoadOptions) -> Result<Vec<EvalItem>> {
    let records: Vec<(usize, CorpusRecord)> = read_jsonl(reader, source_name)?;
    check_unique(records.iter().map(|(l, r)| (*l, r.id.as_str())), source_name)?;
    records
        .into_iter()
        .map(|(lineno, rec)| {
            EvalItem::new(
                rec.id,
                tokenize(&rec.hyp, opts.strip_stress),
                rec.refs
                    .iter()
                    .map(|r| tokenize(r, opts.strip_stress))
                    .collect(),
            )
            .map_err(|e| located(e, source_name, lineno))
        })
        .collect()
}

/// Loads a corpus file with default options (stress stripping on).
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<EvalItem>> {
    load_corpus_with(path, LoadOptions::default())
}

pub fn load_corpus_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Vec<EvalItem>> {
    let path = path.as_ref();
    parse_corpus(open(path)?, &path.display().to_string(), opts)
}

/// Writes items in corpus format, one record per line.
pub fn write_corpus(mut writer: impl Write, items: &[EvalItem]) -> std::io::Result<()> {
    for item in items {
        let rec = CorpusRecord {
            id: item.id.clone(),
            hyp: item.hypothesis.to_line(),
            refs: item.references.iter().map(PhonemeSeq::to_line).collect(),
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Parses `{"id", "hyp"}` records. Other fields on the line are ignored.
pub fn parse_hypotheses(reader: impl BufRead, source_name: &str, opts: LoadOptions) -> Result<Vec<PhonemeSeq>> {
    let records: Vec<(usize, HypRecord)> = read_jsonl(reader, source_name)?;
    check_unique(records.iter().map(|(l, r)| (*l, r.id.as_str())), source_name)?;
    records
        .into_iter()
        .map(|(lineno, rec)| {
            PhonemeSeq::new(rec.id, tokenize(&rec.hyp, opts.strip_stress))
                .map_err(|e| located(e, source_name, lineno))
        })
        .collect()
}

pub fn load_hypotheses(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Vec<PhonemeSeq>> {
    let path = path.as_ref();
    parse_hypotheses(open(path)?, &path.display().to_string(), opts)
}

/// Parses `{"id", "refs"}` records; a full corpus file is also accepted.
pub fn parse_references(
    reader: impl BufRead,
    source_name: &str,
    opts: LoadOptions,
) -> Result<Vec<(String, Vec<Vec<String>>)>> {
    let records: Vec<(usize, RefsRecord)> = read_jsonl(reader, source_name)?;
    check_unique(records.iter().map(|(l, r)| (*l, r.id.as_str())), source_name)?;
    records
        .into_iter()
        .map(|(lineno, rec)| {
            let refs: Vec<Vec<String>> = rec
                .refs
                .iter()
                .map(|r| tokenize(r, opts.strip_stress))
                .collect();
            // Validate through the item constructor so errors match corpus loading.
            EvalItem::new(rec.id.clone(), Vec::new(), refs.clone())
                .map_err(|e| located(e, source_name, lineno))?;
            Ok((rec.id, refs))
        })
        .collect()
}

pub fn load_references(
    path: impl AsRef<Path>,
    opts: LoadOptions,
) -> Result<Vec<(String, Vec<Vec<String>>)>> {
    let path = path.as_ref();
    parse_references(open(path)?, &path.display().to_string(), opts)
}

/// Pairs hypotheses with references by id, in hypothesis order.
///
/// Fails listing every id present on one side but not the other.
pub fn join(hyps: Vec<PhonemeSeq>, refs: Vec<(String, Vec<Vec<String>>)>) -> Result<Vec<EvalItem>> {
    let mut by_id: std::collections::HashMap<String, Vec<Vec<String>>> = refs.into_iter().collect();
    let hyp_ids: HashSet<&str> = hyps.iter().map(PhonemeSeq::id).collect();
    let missing_refs: Vec<&str> = hyps
        .iter()
        .map(PhonemeSeq::id)
        .filter(|id| !by_id.contains_key(*id))
        .collect();
    let mut missing_hyps: Vec<&str> = by_id
        .keys()
        .map(String::as_str)
        .filter(|id| !hyp_ids.contains(id))
        .collect();
    missing_hyps.sort_unstable();
    if !missing_refs.is_empty() || !missing_hyps.is_empty() {
        let mut parts = Vec::new();
        if !missing_refs.is_empty() {
            parts.push(format!("no references for ids: {}", missing_refs.join(", ")));
        }
        if !missing_hyps.is_empty() {
            parts.push(format!("no hypothesis for ids: {}", missing_hyps.join(", ")));
        }
        return Err(Error::Validation(parts.join("; ")));
    }
    hyps.into_iter()
        .map(|h| {
            let refs = by_id.remove(h.id()).expect("checked above");
            EvalItem::new(h.id.clone(), h.tokens, refs)
        })
        .collect()
}
