//! Line-delimited score records.
//!
//! ```text
//! {"id":"img_001","scores":{"bleu1":82.6,"bleu4":36.1,"cider_d":0.424,"per":71.4}}
//! {"id":"__corpus__","scores":{...}}
//! ```
//!
//! Percent metrics (BLEU, METEOR, ROUGE-L and PER, which is scaled from its
//! ratio) carry one decimal place; CIDEr-D keeps three on its native scale.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ItemScores, Metric, ScoreVector, Scores};
use crate::error::{Error, Result};

/// Id of the trailing corpus-summary record.
pub const CORPUS_ID: &str = "__corpus__";

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    scores: Map<String, Value>,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (v * scale).round() / scale
}

/// The value as written to a record.
pub fn display_value(metric: Metric, v: f64) -> f64 {
    match metric {
        Metric::CiderD => round_to(v, 3),
        Metric::Per => round_to(100.0 * v, 1),
        _ => round_to(v, 1),
    }
}

fn to_record(id: &str, sv: &ScoreVector) -> Record {
    let scores = sv
        .iter()
        .map(|(m, v)| (m.key(), Value::from(display_value(m, v))))
        .collect();
    Record {
        id: id.to_string(),
        scores,
    }
}

pub fn write_score_records(mut w: impl Write, scores: &Scores) -> std::io::Result<()> {
    let rows = scores
        .items
        .iter()
        .map(|it| to_record(&it.id, &it.scores))
        .chain([to_record(CORPUS_ID, &scores.corpus)]);
    for rec in rows {
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Reads per-item score records, skipping the corpus summary.
///
/// PER is converted back from percent to a ratio.
pub fn parse_score_records(reader: impl BufRead, source_name: &str) -> Result<Vec<ItemScores>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        if rec.id == CORPUS_ID {
            continue;
        }
        let mut sv = ScoreVector::default();
        for (key, value) in &rec.scores {
            let metric: Metric = key
                .parse()
                .map_err(|_| Error::parse(source_name, lineno, format!("unknown metric {key:?}")))?;
            let v = value
                .as_f64()
                .ok_or_else(|| Error::parse(source_name, lineno, format!("{key} is not a number")))?;
            sv.set(metric, if metric == Metric::Per { v / 100.0 } else { v });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::Validation(format!(
                "{source_name}: line {lineno}: duplicate id {:?}",
                rec.id
            )));
        }
        out.push(ItemScores { id: rec.id, scores: sv });
    }
    Ok(out)
}

pub fn read_score_records(path: impl AsRef<Path>) -> Result<Vec<ItemScores>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_score_records(BufReader::new(f), &path.display().to_string())
}
