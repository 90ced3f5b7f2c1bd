//! Meta-evaluation: how well metric scores track human ratings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{ItemScores, Metric};

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Argument("correlation needs at least 2 points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a constant series".into()));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Pearson,
    Spearman,
}

impl Method {
    pub fn correlate(self, xs: &[f64], ys: &[f64]) -> Result<f64> {
        match self {
            Method::Pearson => pearson(xs, ys),
            Method::Spearman => spearman(xs, ys),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(Method::Pearson),
            "spearman" => Ok(Method::Spearman),
            other => Err(Error::Argument(format!("unknown correlation method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pearson => "pearson",
            Method::Spearman => "spearman",
        })
    }
}

/// One rater's judgement of one item.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct HumanRating {
    pub item_id: String,
    pub rater_id: String,
    pub action: f64,
    pub object: f64,
    #[serde(default)]
    pub overall: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Overall,
    Action,
    Object,
}

impl Dimension {
    const ALL: [Dimension; 3] = [Dimension::Overall, Dimension::Action, Dimension::Object];

    fn of(self, r: &HumanRating) -> Option<f64> {
        match self {
            Dimension::Overall => r.overall,
            Dimension::Action => Some(r.action),
            Dimension::Object => Some(r.object),
        }
    }
}

fn validate_ratings(ratings: &[HumanRating]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in ratings {
        let finite = r.action.is_finite() && r.object.is_finite() && r.overall.is_none_or(f64::is_finite);
        if !finite {
            return Err(Error::Validation(format!(
                "rating for item {} by {} is not finite",
                r.item_id, r.rater_id
            )));
        }
        if !seen.insert((r.item_id.as_str(), r.rater_id.as_str())) {
            return Err(Error::Validation(format!(
                "duplicate rating for item {} by {}",
                r.item_id, r.rater_id
            )));
        }
    }
    Ok(())
}

/// Parses `item_id,rater_id,action,object[,overall]` with a header row.
pub fn parse_ratings(reader: impl Read, source_name: &str) -> Result<Vec<HumanRating>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(source_name, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let expected = ["item_id", "rater_id", "action", "object"];
    if names.len() < 4 || names[..4] != expected || (names.len() == 5 && names[4] != "overall") || names.len() > 5 {
        return Err(Error::parse(
            source_name,
            1,
            format!("expected header item_id,rater_id,action,object[,overall], got {}", names.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<HumanRating>() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(source_name, line, e.to_string())
        })?;
        out.push(rec);
    }
    validate_ratings(&out)?;
    Ok(out)
}

pub fn load_ratings(path: impl AsRef<Path>) -> Result<Vec<HumanRating>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(f, &path.display().to_string())
}

/// Per-item mean rating per dimension; `None` where no rater gave a value.
fn aggregate(ratings: &[HumanRating]) -> BTreeMap<&str, [Option<f64>; 3]> {
    let mut sums: BTreeMap<&str, [(f64, usize); 3]> = BTreeMap::new();
    for r in ratings {
        let slot = sums.entry(r.item_id.as_str()).or_default();
        for (d, dim) in Dimension::ALL.iter().enumerate() {
            if let Some(v) = dim.of(r) {
                slot[d].0 += v;
                slot[d].1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|(id, s)| (id, s.map(|(sum, n)| (n > 0).then(|| sum / n as f64))))
        .collect()
}

/// Inter-rater agreement per dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub r: Option<f64>,
    pub r_action: f64,
    pub r_object: f64,
    /// Raters that contributed to the action/object means.
    pub raters: usize,
}

fn leave_one_out(ratings: &[HumanRating], dim: Dimension, method: Method) -> Option<(f64, usize)> {
    // item -> [(rater, value)]
    let mut by_item: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for r in ratings {
        if let Some(v) = dim.of(r) {
            by_item.entry(&r.item_id).or_default().push((&r.rater_id, v));
        }
    }
    let mut raters: Vec<&str> = ratings.iter().map(|r| r.rater_id.as_str()).collect();
    raters.sort_unstable();
    raters.dedup();

    let mut corrs = Vec::new();
    for rater in raters {
        let (mut own, mut others) = (Vec::new(), Vec::new());
        for entries in by_item.values() {
            let Some(&(_, mine)) = entries.iter().find(|(who, _)| *who == rater) else {
                continue;
            };
            let rest: Vec<f64> = entries
                .iter()
                .filter(|(who, _)| *who != rater)
                .map(|(_, v)| *v)
                .collect();
            if rest.is_empty() {
                continue;
            }
            own.push(mine);
            others.push(rest.iter().sum::<f64>() / rest.len() as f64);
        }
        // raters with too little overlap or no variance do not contribute
        if let Ok(r) = method.correlate(&own, &others) {
            corrs.push(r);
        }
    }
    if corrs.is_empty() {
        return None;
    }
    Some((corrs.iter().sum::<f64>() / corrs.len() as f64, corrs.len()))
}

/// Mean over raters of the correlation between each rater and the mean of the others.
pub fn inter_rater(ratings: &[HumanRating], method: Method) -> Result<Agreement> {
    validate_ratings(ratings)?;
    let insufficient = || {
        Error::Validation("inter-rater agreement needs 2 raters sharing at least 2 items".into())
    };
    let (r_action, raters) = leave_one_out(ratings, Dimension::Action, method).ok_or_else(insufficient)?;
    let (r_object, _) = leave_one_out(ratings, Dimension::Object, method).ok_or_else(insufficient)?;
    let r = leave_one_out(ratings, Dimension::Overall, method).map(|(r, _)| r);
    Ok(Agreement {
        r,
        r_action,
        r_object,
        raters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub metric: String,
    /// Against the overall rating; absent when overall ratings are missing.
    pub r: Option<f64>,
    pub r_action: f64,
    pub r_object: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub method: Method,
    pub agreement_method: &'static str,
    pub items: usize,
    /// Scored items without any rating.
    pub dropped_scored: usize,
    /// Rated items without scores.
    pub dropped_rated: usize,
    /// `None` when fewer than two raters overlap.
    pub mturk: Option<Agreement>,
    pub rows: Vec<MetricRow>,
}

/// Correlates each metric column with the per-item mean human ratings.
pub fn correlate_metrics(scores: &[ItemScores], ratings: &[HumanRating], method: Method) -> Result<CorrelationReport> {
    validate_ratings(ratings)?;
    let agg = aggregate(ratings);
    let joined: Vec<(&ItemScores, &[Option<f64>; 3])> = scores
        .iter()
        .filter_map(|s| agg.get(s.id.as_str()).map(|a| (s, a)))
        .collect();
    let scored_ids: HashSet<&str> = scores.iter().map(|s| s.id.as_str()).collect();
    let dropped_scored = scores.len() - joined.len();
    let dropped_rated = agg.keys().filter(|id| !scored_ids.contains(*id)).count();
    if joined.len() < 2 {
        return Err(Error::Validation(format!(
            "insufficient overlap: {} joined items ({} scored, {} rated)",
            joined.len(),
            scores.len(),
            agg.len()
        )));
    }

    let metrics: Vec<Metric> = joined[0].0.scores.iter().map(|(m, _)| m).collect();
    let column = |d: usize| -> Option<Vec<f64>> { joined.iter().map(|(_, a)| a[d]).collect() };
    let overall = column(0);
    let action = column(1).expect("action always present");
    let object = column(2).expect("object always present");

    let mut rows = Vec::with_capacity(metrics.len());
    for m in metrics {
        let xs: Vec<f64> = joined
            .iter()
            .map(|(s, _)| {
                s.scores
                    .get(m)
                    .ok_or_else(|| Error::Validation(format!("item {} has no {m} score", s.id)))
            })
            .collect::<Result<_>>()?;
        let cell = |ys: &[f64], dim: &str| {
            method
                .correlate(&xs, ys)
                .map_err(|e| Error::Undefined(format!("{m} vs {dim}: {e}")))
        };
        rows.push(MetricRow {
            metric: m.header(),
            r: overall.as_deref().map(|ys| cell(ys, "overall")).transpose()?,
            r_action: cell(&action, "action")?,
            r_object: cell(&object, "object")?,
        });
    }

    let joined_ids: HashSet<&str> = joined.iter().map(|(s, _)| s.id.as_str()).collect();
    let joined_ratings: Vec<HumanRating> = ratings
        .iter()
        .filter(|r| joined_ids.contains(r.item_id.as_str()))
        .cloned()
        .collect();
    let mturk = inter_rater(&joined_ratings, method).ok();

    Ok(CorrelationReport {
        method,
        agreement_method: "leave-one-out vs mean of other raters",
        items: joined.len(),
        dropped_scored,
        dropped_rated,
        mturk,
        rows,
    })
}

/// Runs [`correlate_metrics`] separately for each group of items.
///
/// `group_of` maps item ids to a grouping key such as a system id; items
/// without a key are ignored.
pub fn correlate_by_group(
    scores: &[ItemScores],
    ratings: &[HumanRating],
    method: Method,
    group_of: &HashMap<String, String>,
) -> Result<BTreeMap<String, CorrelationReport>> {
    let mut groups: BTreeMap<&str, Vec<ItemScores>> = BTreeMap::new();
    for s in scores {
        if let Some(g) = group_of.get(&s.id) {
            groups.entry(g).or_default().push(s.clone());
        }
    }
    groups
        .into_iter()
        .map(|(g, items)| {
            let ids: HashSet<&str> = items.iter().map(|s| s.id.as_str()).collect();
            let rs: Vec<HumanRating> = ratings
                .iter()
                .filter(|r| ids.contains(r.item_id.as_str()))
                .cloned()
                .collect();
            correlate_metrics(&items, &rs, method).map(|rep| (g.to_string(), rep))
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "----".to_string(), |x| format!("{x:.3}"))
}

impl CorrelationReport {
    /// Plain-text table with one row per metric plus the MTurk agreement row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "method: {}; agreement: {}; items: {} (dropped {} scored-only, {} rated-only)",
            self.method, self.agreement_method, self.items, self.dropped_scored, self.dropped_rated
        );
        let _ = writeln!(out, "{:<8} {:>7} {:>9} {:>9}", "", "r", "r_action", "r_object");
        let (r, ra, ro) = match &self.mturk {
            Some(a) => (a.r, Some(a.r_action), Some(a.r_object)),
            None => (None, None, None),
        };
        let _ = writeln!(out, "{:<8} {:>7} {:>9} {:>9}", "MTurk", cell(r), cell(ra), cell(ro));
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:>7} {:>9} {:>9}",
                row.metric,
                cell(row.r),
                cell(Some(row.r_action)),
                cell(Some(row.r_object))
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
