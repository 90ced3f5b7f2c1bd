//! Sentence- and corpus-level metrics over phoneme sequences.

mod bleu;
mod cider;
mod meteor;
mod per;
mod record;
mod rouge;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use bleu::{bleu_corpus, bleu_from_stats, bleu_sentence, bleu_stats, closest_ref_len, BleuStats};
pub use cider::{cider_d, CiderIdf};
pub use meteor::{align as meteor_align, meteor, Alignment};
pub use per::{edit_distance, per, per_corpus, per_counts};
pub use record::{display_value, parse_score_records, read_score_records, write_score_records, CORPUS_ID};
pub use rouge::{lcs_len, rouge_l};

use crate::corpus::EvalItem;
use crate::error::{Error, Result};

pub const MAX_BLEU_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    None,
    /// (matches + 1) / (candidates + 1) for orders two and up.
    AddOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    pub max_bleu_order: usize,
    pub sentence_smoothing: Smoothing,
    pub corpus_smoothing: Smoothing,
    /// Gaussian length-penalty width for CIDEr-D.
    pub cider_sigma: f64,
    pub cider_max_n: usize,
    /// ROUGE-L recall weight.
    pub rouge_beta: f64,
    pub meteor_alpha: f64,
    pub meteor_beta: f64,
    pub meteor_gamma: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            max_bleu_order: MAX_BLEU_ORDER,
            sentence_smoothing: Smoothing::AddOne,
            corpus_smoothing: Smoothing::None,
            cider_sigma: 6.0,
            cider_max_n: 4,
            rouge_beta: 1.2,
            meteor_alpha: 0.9,
            meteor_beta: 3.0,
            meteor_gamma: 0.5,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BLEU_ORDER).contains(&self.max_bleu_order) {
            return Err(Error::Argument(format!(
                "max_bleu_order must be in 1..={MAX_BLEU_ORDER}"
            )));
        }
        if self.cider_max_n == 0 {
            return Err(Error::Argument("cider_max_n must be positive".into()));
        }
        let positive = [
            ("cider_sigma", self.cider_sigma),
            ("rouge_beta", self.rouge_beta),
            ("meteor_alpha", self.meteor_alpha),
            ("meteor_beta", self.meteor_beta),
            ("meteor_gamma", self.meteor_gamma),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("{name} must be positive and finite")));
            }
        }
        // keeps the METEOR harmonic mean and penalty inside [0, 1]
        if self.meteor_alpha > 1.0 || self.meteor_gamma > 1.0 {
            return Err(Error::Argument("meteor_alpha and meteor_gamma must be <= 1".into()));
        }
        Ok(())
    }
}

/// One metric column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    /// BLEU of the given order, 1..=8.
    Bleu(u8),
    Meteor,
    RougeL,
    CiderD,
    Per,
}

impl Metric {
    /// Every column in table order.
    pub fn all() -> Vec<Metric> {
        let mut v: Vec<Metric> = (1..=MAX_BLEU_ORDER as u8).map(Metric::Bleu).collect();
        v.extend([Metric::Meteor, Metric::RougeL, Metric::CiderD, Metric::Per]);
        v
    }

    /// Machine-readable key used in score records.
    pub fn key(&self) -> String {
        match self {
            Metric::Bleu(n) => format!("bleu{n}"),
            Metric::Meteor => "meteor".into(),
            Metric::RougeL => "rouge_l".into(),
            Metric::CiderD => "cider_d".into(),
            Metric::Per => "per".into(),
        }
    }

    /// Column header for summary tables.
    pub fn header(&self) -> String {
        match self {
            Metric::Bleu(n) => format!("BLEU{n}"),
            Metric::Meteor => "METEOR".into(),
            Metric::RougeL => "ROUGE-L".into(),
            Metric::CiderD => "CIDEr".into(),
            Metric::Per => "PER".into(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let m = match lower.as_str() {
            "meteor" => Metric::Meteor,
            "rouge_l" | "rouge-l" | "rougel" => Metric::RougeL,
            "cider_d" | "cider-d" | "cider" | "ciderd" => Metric::CiderD,
            "per" => Metric::Per,
            other => match other.strip_prefix("bleu").and_then(|n| n.parse::<u8>().ok()) {
                Some(n) if (1..=MAX_BLEU_ORDER as u8).contains(&n) => Metric::Bleu(n),
                _ => return Err(Error::Argument(format!("unknown metric {s:?}"))),
            },
        };
        Ok(m)
    }
}

/// Parses a comma-separated metric list into table order, dropping duplicates.
pub fn parse_metric_list(list: &str) -> Result<Vec<Metric>> {
    let mut out: Vec<Metric> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Argument("empty metric list".into()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Values for each metric column; absent when not computed.
///
/// BLEU, METEOR and ROUGE-L are percents, CIDEr-D is on its native `[0, 10]`
/// scale and PER is a ratio.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreVector {
    pub bleu: [Option<f64>; MAX_BLEU_ORDER],
    pub meteor: Option<f64>,
    pub rouge_l: Option<f64>,
    pub cider_d: Option<f64>,
    pub per: Option<f64>,
}

impl ScoreVector {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Bleu(n) => self.bleu.get(usize::from(n).wrapping_sub(1)).copied().flatten(),
            Metric::Meteor => self.meteor,
            Metric::RougeL => self.rouge_l,
            Metric::CiderD => self.cider_d,
            Metric::Per => self.per,
        }
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        match metric {
            Metric::Bleu(n) => self.bleu[usize::from(n) - 1] = Some(value),
            Metric::Meteor => self.meteor = Some(value),
            Metric::RougeL => self.rouge_l = Some(value),
            Metric::CiderD => self.cider_d = Some(value),
            Metric::Per => self.per = Some(value),
        }
    }

    /// Present values in table order.
    pub fn iter(&self) -> impl Iterator<Item = (Metric, f64)> + '_ {
        Metric::all()
            .into_iter()
            .filter_map(move |m| self.get(m).map(|v| (m, v)))
    }

    /// Checks the documented value ranges.
    pub fn check_bounds(&self) -> Result<()> {
        for (m, v) in self.iter() {
            let ok = match m {
                Metric::Bleu(_) | Metric::Meteor | Metric::RougeL => (0.0..=100.0).contains(&v),
                Metric::CiderD => (0.0..=10.0).contains(&v),
                Metric::Per => v >= 0.0,
            };
            if !ok {
                return Err(Error::Validation(format!("{m} = {v} out of range")));
            }
        }
        Ok(())
    }
}

/// How the corpus row aggregates BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Level {
    /// Mean of per-item sentence BLEU.
    Sentence,
    /// BLEU from pooled n-gram statistics.
    #[default]
    Corpus,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence" => Ok(Level::Sentence),
            "corpus" => Ok(Level::Corpus),
            other => Err(Error::Argument(format!("unknown level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemScores {
    pub id: String,
    pub scores: ScoreVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub items: Vec<ItemScores>,
    pub corpus: ScoreVector,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Scores every item on the selected metrics and builds the corpus row.
///
/// Per-item BLEU is always sentence-level; `level` only affects the corpus
/// BLEU values. METEOR, ROUGE-L and CIDEr-D corpus values are item means and
/// corpus PER pools edit distances. Items are scored in parallel; output
/// order follows input order.
pub fn score_all(items: &[EvalItem], cfg: &MetricConfig, level: Level, metrics: &[Metric]) -> Result<Scores> {
    if items.is_empty() {
        return Err(Error::Argument("no items to score".into()));
    }
    cfg.validate()?;
    let max_selected_bleu = metrics
        .iter()
        .filter_map(|m| match m {
            Metric::Bleu(n) => Some(usize::from(*n)),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    if max_selected_bleu > cfg.max_bleu_order {
        return Err(Error::Argument(format!(
            "bleu{max_selected_bleu} requested but max_bleu_order is {}",
            cfg.max_bleu_order
        )));
    }
    let want = |m: Metric| metrics.contains(&m);
    let idf = if want(Metric::CiderD) {
        Some(CiderIdf::from_items(items, cfg)?)
    } else {
        None
    };

    let per_item: Vec<(ItemScores, BleuStats)> = items
        .par_iter()
        .map(|item| -> Result<(ItemScores, BleuStats)> {
            let mut sv = ScoreVector::default();
            let stats = bleu_stats(item, max_selected_bleu);
            for &m in metrics {
                let v = match m {
                    Metric::Bleu(n) => bleu_from_stats(&stats, usize::from(n), cfg.sentence_smoothing),
                    Metric::Meteor => meteor(item, cfg),
                    Metric::RougeL => rouge_l(item, cfg),
                    Metric::CiderD => idf
                        .as_ref()
                        .expect("built when selected")
                        .score(item.hypothesis().tokens(), item.references()),
                    Metric::Per => per(item)?,
                };
                sv.set(m, v);
            }
            Ok((
                ItemScores {
                    id: item.id().to_string(),
                    scores: sv,
                },
                stats,
            ))
        })
        .collect::<Result<_>>()?;

    let mut corpus = ScoreVector::default();
    let mut pooled = BleuStats::default();
    for (_, s) in &per_item {
        pooled += *s;
    }
    for &m in metrics {
        let item_mean = || mean(per_item.iter().map(|(s, _)| s.scores.get(m).unwrap_or(0.0)));
        let v = match m {
            Metric::Bleu(n) => match level {
                Level::Corpus => bleu_from_stats(&pooled, usize::from(n), cfg.corpus_smoothing),
                Level::Sentence => item_mean(),
            },
            Metric::Per => per_corpus(items)?,
            Metric::Meteor | Metric::RougeL | Metric::CiderD => item_mean(),
        };
        corpus.set(m, v);
    }

    Ok(Scores {
        items: per_item.into_iter().map(|(s, _)| s).collect(),
        corpus,
    })
}
