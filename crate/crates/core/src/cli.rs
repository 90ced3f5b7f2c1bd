//! The `phoneval` command line: `score`, `correlate`, `decode`, `reward`.
//!
//! Exit codes: 0 on success, 1 for validation or domain errors (including
//! bad arguments), 2 for I/O failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, EvalItem, LoadOptions, PhonemeSeq};
use crate::decode::{self, BeamConfig, BeamHypothesis, SequenceScorer, ToyModel, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::metrics::{self, Level, Metric, MetricConfig, Scores};
use crate::reward::{RewardMetric, RewardSpec};
use crate::stats::{self, Method};

#[derive(Debug, Parser)]
#[command(name = "phoneval", version, about = "Evaluate, decode and meta-evaluate phoneme captions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score hypotheses against references.
    Score(ScoreArgs),
    /// Correlate per-item scores with human ratings.
    Correlate(CorrelateArgs),
    /// Decode sequences from a toy model file.
    Decode(DecodeArgs),
    /// Self-critical advantages of sampled over baseline sequences.
    Reward(RewardArgs),
}

#[derive(Debug, Args)]
struct StressArgs {
    /// Keep trailing stress digits on phonemes (stripped by default).
    #[arg(long)]
    keep_stress: bool,
}

impl StressArgs {
    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            strip_stress: !self.keep_stress,
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Corpus file with id, hyp and refs on every line.
    #[arg(long, conflicts_with_all = ["hyp", "refs"], required_unless_present_all = ["hyp", "refs"])]
    corpus: Option<PathBuf>,
    /// Hypothesis file ({"id", "hyp"} lines); requires --refs.
    #[arg(long, requires = "refs")]
    hyp: Option<PathBuf>,
    /// Reference file ({"id", "refs"} lines); requires --hyp.
    #[arg(long, requires = "hyp")]
    refs: Option<PathBuf>,
    /// Comma-separated metrics, e.g. bleu4,per. Defaults to all columns.
    #[arg(long)]
    metrics: Option<String>,
    /// Aggregation of the corpus BLEU row.
    #[arg(long, default_value = "corpus")]
    level: String,
    #[command(flatten)]
    stress: StressArgs,
    /// Output path for score records (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// Score records written by `score`.
    #[arg(long)]
    scores: PathBuf,
    /// Ratings CSV: item_id,rater_id,action,object[,overall].
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long, default_value = "pearson")]
    method: String,
    /// Output path for the JSON report (stdout after the table if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Toy model file (TOML).
    #[arg(long)]
    model: PathBuf,
    /// Optional prompts, {"id", "context"} per line. One empty prompt otherwise.
    #[arg(long)]
    contexts: Option<PathBuf>,
    /// Greedy decoding instead of beam search.
    #[arg(long, conflicts_with = "sample")]
    greedy: bool,
    /// Ancestral sampling instead of beam search.
    #[arg(long)]
    sample: bool,
    /// Beam width.
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Number of beam results to write per context.
    #[arg(long, default_value_t = 1)]
    nbest: usize,
    #[arg(long, default_value_t = 50)]
    max_len: usize,
    /// Length-penalty exponent; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RewardArgs {
    /// Sampled sequences ({"id", "hyp"} lines).
    #[arg(long)]
    hyp: PathBuf,
    /// Baseline sequences, usually greedy decodes.
    #[arg(long)]
    baseline: PathBuf,
    /// References ({"id", "refs"} lines or a full corpus file).
    #[arg(long)]
    refs: PathBuf,
    /// cider_d or bleu4.
    #[arg(long, default_value = "cider_d")]
    metric: String,
    #[command(flatten)]
    stress: StressArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses arguments, runs a subcommand and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Score(a) => cmd_score(a, stdout, stderr),
        Command::Correlate(a) => cmd_correlate(a, stdout),
        Command::Decode(a) => cmd_decode(a, stdout),
        Command::Reward(a) => cmd_reward(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

/// Writes to `--out` when given, else to stdout.
fn with_output(out: Option<&Path>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        }
        None => f(stdout).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
    }
}

fn summary_table(scores: &Scores) -> String {
    let cols: Vec<(String, String)> = scores
        .corpus
        .iter()
        .map(|(m, v)| {
            let shown = metrics::display_value(m, v);
            let text = match m {
                Metric::CiderD => format!("{shown:.3}"),
                _ => format!("{shown:.1}"),
            };
            (m.header(), text)
        })
        .collect();
    let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
    let mut header = format!("{:<8}", "system");
    let mut row = format!("{:<8}", "corpus");
    for ((h, v), w) in cols.iter().zip(&widths) {
        header.push_str(&format!(" {h:>w$}"));
        row.push_str(&format!(" {v:>w$}"));
    }
    format!("{header}\n{row}\n")
}

fn cmd_score(args: ScoreArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let opts = args.stress.load_options();
    let level: Level = args.level.parse()?;
    let selected = match &args.metrics {
        Some(list) => metrics::parse_metric_list(list)?,
        None => Metric::all(),
    };
    let items = match (&args.corpus, &args.hyp, &args.refs) {
        (Some(c), _, _) => corpus::load_corpus_with(c, opts)?,
        (None, Some(h), Some(r)) => corpus::join(
            corpus::load_hypotheses(h, opts)?,
            corpus::load_references(r, opts)?,
        )?,
        _ => return Err(Error::Argument("give --corpus or both --hyp and --refs".into())),
    };
    let scores = metrics::score_all(&items, &MetricConfig::default(), level, &selected)?;
    let table = summary_table(&scores);
    let to_file = args.out.is_some();
    with_output(args.out.as_deref(), stdout, |w| {
        metrics::write_score_records(w, &scores)
    })?;
    let _ = if to_file {
        write!(stdout, "{table}")
    } else {
        write!(stderr, "{table}")
    };
    Ok(())
}

fn cmd_correlate(args: CorrelateArgs, stdout: &mut dyn Write) -> Result<()> {
    let method: Method = args.method.parse()?;
    let scores = metrics::read_score_records(&args.scores)?;
    let ratings = stats::load_ratings(&args.ratings)?;
    let report = stats::correlate_metrics(&scores, &ratings, method)?;
    let table = report.to_table();
    let json = report.to_json();
    let io_err = |e| Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    write!(stdout, "{table}").map_err(io_err)?;
    match &args.out {
        Some(_) => with_output(args.out.as_deref(), stdout, |w| writeln!(w, "{json}")),
        None => writeln!(stdout, "\n{json}").map_err(io_err),
    }
}

#[derive(Deserialize)]
struct ContextRecord {
    id: String,
    context: String,
}

#[derive(Serialize)]
struct DecodeRecord<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    hyp: String,
    logprob: f64,
}

fn load_contexts(path: &Path, model: &ToyModel) -> Result<Vec<(String, Vec<usize>)>> {
    let f = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ContextRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            source_name: name.clone(),
            line: lineno,
            message: e.to_string(),
        })?;
        let ids = rec
            .context
            .split_whitespace()
            .map(|t| {
                model.token_id(t).filter(|&id| id != model.eos()).ok_or_else(|| {
                    Error::Validation(format!("{name}: line {lineno}: token {t:?} not in model vocabulary"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((rec.id, ids));
    }
    Ok(out)
}

fn cmd_decode(args: DecodeArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = ToyModel::load(&args.model)?;
    let contexts = match &args.contexts {
        Some(p) => load_contexts(p, &model)?,
        None => vec![("0".to_string(), Vec::new())],
    };
    let cfg = BeamConfig {
        width: if args.greedy || args.sample { 1 } else { args.beam },
        max_len: args.max_len,
        length_penalty_alpha: args.alpha,
        seed: args.seed,
    };
    cfg.validate()?;
    if args.nbest == 0 || args.nbest > cfg.width {
        return Err(Error::Argument(format!("--nbest must be in 1..={}", cfg.width)));
    }
    let decoded: Vec<Vec<BeamHypothesis>> = contexts
        .par_iter()
        .enumerate()
        .map(|(idx, (_, ctx))| -> Result<Vec<BeamHypothesis>> {
            if args.greedy {
                Ok(vec![decode::greedy_decode(&model, ctx, &cfg)?])
            } else if args.sample {
                // one stream per context keeps output independent of scheduling
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(idx as u64);
                Ok(vec![decode::sample_decode_with(&model, ctx, &cfg, &mut rng)?])
            } else {
                let mut beams = decode::beam_search(&model, ctx, &cfg)?;
                beams.truncate(args.nbest);
                Ok(beams)
            }
        })
        .collect::<Result<_>>()?;

    with_output(args.out.as_deref(), stdout, |w| {
        for ((id, _), hyps) in contexts.iter().zip(&decoded) {
            for (rank, h) in hyps.iter().enumerate() {
                let rec = DecodeRecord {
                    id,
                    rank: (args.nbest > 1).then_some(rank + 1),
                    hyp: model.render(&h.tokens).join(" "),
                    logprob: h.logprob,
                };
                serde_json::to_writer(&mut *w, &rec)?;
                writeln!(w)?;
            }
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct RewardRecord<'a> {
    id: &'a str,
    sampled: f64,
    baseline: f64,
    advantage: f64,
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn cmd_reward(args: RewardArgs, stdout: &mut dyn Write) -> Result<()> {
    let opts = args.stress.load_options();
    let metric: RewardMetric = args.metric.parse()?;
    let sampled = corpus::load_hypotheses(&args.hyp, opts)?;
    let baseline = corpus::load_hypotheses(&args.baseline, opts)?;
    let refs = corpus::load_references(&args.refs, opts)?;

    let items: Vec<EvalItem> = corpus::join(sampled, refs)?;
    let by_id: std::collections::HashMap<String, PhonemeSeq> =
        baseline.into_iter().map(|b| (b.id().to_string(), b)).collect();
    let missing: Vec<&str> = items
        .iter()
        .map(EvalItem::id)
        .filter(|id| !by_id.contains_key(*id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!("baseline has no sequence for ids: {}", missing.join(", "))));
    }
    let mut extra: Vec<&String> = by_id
        .keys()
        .filter(|id| !items.iter().any(|it| it.id() == id.as_str()))
        .collect();
    extra.sort();
    if !extra.is_empty() {
        let extra: Vec<&str> = extra.iter().map(|s| s.as_str()).collect();
        return Err(Error::Validation(format!("baseline ids without a sampled sequence: {}", extra.join(", "))));
    }

    let spec = RewardSpec::new(metric, &items, MetricConfig::default())?;
    let rows: Vec<(f64, f64)> = items
        .par_iter()
        .map(|it| -> Result<(f64, f64)> {
            let base = &by_id[it.id()];
            Ok((
                spec.reward(it.hypothesis().tokens(), it.references())?,
                spec.reward(base.tokens(), it.references())?,
            ))
        })
        .collect::<Result<_>>()?;

    let mean = rows.iter().map(|(s, b)| s - b).sum::<f64>() / rows.len() as f64;
    with_output(args.out.as_deref(), stdout, |w| {
        for (it, (s, b)) in items.iter().zip(&rows) {
            let rec = RewardRecord {
                id: it.id(),
                sampled: round6(*s),
                baseline: round6(*b),
                advantage: round6(s - b),
            };
            serde_json::to_writer(&mut *w, &rec)?;
            writeln!(w)?;
        }
        let summary = serde_json::json!({
            "id": "__mean__",
            "metric": metric.to_string(),
            "items": rows.len(),
            "advantage": round6(mean),
        });
        serde_json::to_writer(&mut *w, &summary)?;
        writeln!(w)
    })
}
