//! Evaluation and decoding toolkit for phoneme-sequence captions.
//!
//! The crate scores hypotheses against multi-reference corpora (BLEU-1..8,
//! METEOR, ROUGE-L, CIDEr-D, PER), decodes sequences from an abstract
//! autoregressive scorer (greedy, beam search, sampling), computes
//! self-critical rewards from sentence-level metrics, and correlates metric
//! scores with human ratings.

pub mod cli;
pub mod corpus;
pub mod decode;
mod error;
pub mod metrics;
pub mod ngram;
pub mod reward;
pub mod stats;

pub use corpus::{load_corpus, tokenize, EvalItem, PhonemeSeq};
pub use error::{Error, Result};
pub use ngram::{ngram_counts, NGramCounts};
