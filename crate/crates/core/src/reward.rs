//! Self-critical sequence rewards.
//!
//! The reward of a sequence is a sentence-level metric against its
//! references; the advantage subtracts the reward of a baseline sequence
//! (usually the greedy decode) for the same item.

use std::fmt;
use std::str::FromStr;

use crate::corpus::{EvalItem, PhonemeSeq};
use crate::error::{Error, Result};
use crate::metrics::{bleu_sentence, CiderIdf, MetricConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMetric {
    CiderD,
    Bleu4,
}

impl FromStr for RewardMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cider_d" | "cider-d" | "cider" => Ok(Self::CiderD),
            "bleu4" => Ok(Self::Bleu4),
            other => Err(Error::Argument(format!("unknown reward metric {other:?}"))),
        }
    }
}

impl fmt::Display for RewardMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CiderD => "cider_d",
            Self::Bleu4 => "bleu4",
        })
    }
}

/// Which metric to reward with, plus the frozen IDF table CIDEr-D needs.
#[derive(Debug, Clone)]
pub struct RewardSpec {
    metric: RewardMetric,
    cfg: MetricConfig,
    idf: Option<CiderIdf>,
}

impl RewardSpec {
    pub fn bleu4(cfg: MetricConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            metric: RewardMetric::Bleu4,
            cfg,
            idf: None,
        })
    }

    /// CIDEr-D reward with IDF frozen over `context`'s references.
    pub fn cider_d(context: &[EvalItem], cfg: MetricConfig) -> Result<Self> {
        if context.is_empty() {
            return Err(Error::Argument("CIDEr-D reward needs a non-empty IDF context".into()));
        }
        let idf = CiderIdf::from_items(context, &cfg)?;
        Ok(Self {
            metric: RewardMetric::CiderD,
            cfg,
            idf: Some(idf),
        })
    }

    pub fn new(metric: RewardMetric, context: &[EvalItem], cfg: MetricConfig) -> Result<Self> {
        match metric {
            RewardMetric::Bleu4 => Self::bleu4(cfg),
            RewardMetric::CiderD => Self::cider_d(context, cfg),
        }
    }

    pub fn metric(&self) -> RewardMetric {
        self.metric
    }

    /// Sentence BLEU4 (percent) or CIDEr-D (`[0, 10]`) of `tokens`.
    pub fn reward(&self, tokens: &[String], refs: &[PhonemeSeq]) -> Result<f64> {
        if refs.is_empty() {
            return Err(Error::Argument("reward needs at least one reference".into()));
        }
        match self.metric {
            RewardMetric::Bleu4 => {
                let item = EvalItem::new(
                    refs[0].id(),
                    tokens.to_vec(),
                    refs.iter().map(|r| r.tokens().to_vec()).collect(),
                )?;
                bleu_sentence(&item, 4, &self.cfg)
            }
            RewardMetric::CiderD => Ok(self.idf.as_ref().expect("set by constructor").score(tokens, refs)),
        }
    }
}

pub fn sequence_reward(seq: &PhonemeSeq, refs: &[PhonemeSeq], spec: &RewardSpec) -> Result<f64> {
    spec.reward(seq.tokens(), refs)
}

/// `reward(sampled) - reward(baseline)`.
pub fn scst_advantage(
    sampled: &PhonemeSeq,
    baseline: &PhonemeSeq,
    refs: &[PhonemeSeq],
    spec: &RewardSpec,
) -> Result<f64> {
    Ok(sequence_reward(sampled, refs, spec)? - sequence_reward(baseline, refs, spec)?)
}
