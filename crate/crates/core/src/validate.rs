//! Label-based validation of calibrated positions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{DimensionSpec, PositionTable};
use crate::error::{Error, Result};
use crate::stats::{
    balanced_logistic_fit, classification_metrics, clopper_pearson, pearson, BinaryMetrics,
    LogisticFit,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Annotator {
    Human,
    Llm,
}

impl fmt::Display for Annotator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Annotator::Human => "human",
            Annotator::Llm => "LLM",
        })
    }
}

impl FromStr for Annotator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "human" => Ok(Annotator::Human),
            "llm" => Ok(Annotator::Llm),
            _ => Err(Error::InvalidArgument(format!("unknown annotator {s:?}"))),
        }
    }
}

/// Labels held by the human annotation table.
pub const HUMAN_LABELS: [&str; 8] = [
    "left",
    "right",
    "populist",
    "elite",
    "eurosceptic",
    "pro_european",
    "liberal_immigration",
    "restrictive_immigration",
];

/// Labels held by the LLM annotation table.
pub const LLM_LABELS: [&str; 15] = [
    "left",
    "right",
    "populist",
    "elite",
    "eurosceptic",
    "pro_european",
    "liberal_immigration",
    "restrictive_immigration",
    "cosmopolitan",
    "nationalist",
    "pro_environment",
    "climate_denialist",
    "economic_focus",
    "liberal",
    "conservative",
];

/// Label pairs that cannot both hold for one user.
pub const OPPOSITE_PAIRS: [(&str, &str); 8] = [
    ("left", "right"),
    ("populist", "elite"),
    ("eurosceptic", "pro_european"),
    ("liberal_immigration", "restrictive_immigration"),
    ("cosmopolitan", "nationalist"),
    ("pro_environment", "climate_denialist"),
    ("economic_focus", "pro_environment"),
    ("liberal", "conservative"),
];

/// Per-user annotations: `Some(true)` identified as the label, `Some(false)`
/// identified as not the label, `None` unknown. Human tables never hold
/// `Some(false)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    source: Annotator,
    labels: Vec<String>,
    ids: Vec<String>,
    values: Vec<Option<bool>>,
    index: HashMap<String, usize>,
}

impl LabelTable {
    pub fn new(source: Annotator, labels: Vec<String>) -> Self {
        Self {
            source,
            labels,
            ids: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, id: String, row: &[Option<bool>]) -> Result<()> {
        if row.len() != self.labels.len() {
            return Err(Error::InvalidArgument(format!(
                "label row for {id} has {} values, table has {} labels",
                row.len(),
                self.labels.len()
            )));
        }
        if self.source == Annotator::Human && row.contains(&Some(false)) {
            return Err(Error::InvalidArgument(format!(
                "human annotations hold only present or unknown, got an explicit absence for {id}"
            )));
        }
        if self.index.insert(id.clone(), self.ids.len()).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate labeled user {id}")));
        }
        self.ids.push(id);
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn source(&self) -> Annotator {
        self.source
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<bool> {
        self.values[row * self.labels.len() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<bool>] {
        let w = self.labels.len();
        &self.values[row * w..(row + 1) * w]
    }

    fn require(&self, label: &str) -> Result<usize> {
        self.label_index(label)
            .ok_or_else(|| Error::MissingColumn(format!("label {label} in {} annotations", self.source)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscardCount {
    pub label_a: String,
    pub label_b: String,
    /// Users holding both labels.
    pub count: usize,
    /// `count` as a percentage of users holding at least one of the two.
    pub percent: f64,
}

/// Resets both labels of every contradictory pair to unknown. Contradictions
/// are detected on the raw table for all pairs before any reset, so
/// overlapping pairs do not mask each other. Pairs naming a label the table
/// lacks are skipped.
pub fn sanitize_labels(
    raw: &LabelTable,
    pairs: &[(&str, &str)],
) -> (LabelTable, Vec<DiscardCount>) {
    let mut out = raw.clone();
    let mut counts = Vec::new();
    let w = raw.labels.len();
    for &(a, b) in pairs {
        let (Some(ia), Some(ib)) = (raw.label_index(a), raw.label_index(b)) else {
            continue;
        };
        let (mut both, mut either) = (0, 0);
        for r in 0..raw.len() {
            let (va, vb) = (raw.get(r, ia) == Some(true), raw.get(r, ib) == Some(true));
            either += usize::from(va || vb);
            if va && vb {
                both += 1;
                out.values[r * w + ia] = None;
                out.values[r * w + ib] = None;
            }
        }
        counts.push(DiscardCount {
            label_a: a.to_string(),
            label_b: b.to_string(),
            count: both,
            percent: if either == 0 { 0.0 } else { 100.0 * both as f64 / either as f64 },
        });
    }
    (out, counts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lo: f64,
    pub hi: f64,
    /// Positioned users in the bin.
    pub n_total: u64,
    /// Users in the bin holding the label.
    pub n_labeled: u64,
    /// `None` for an empty bin.
    pub fraction: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

/// Bin of a position on the unit grid over `[0, 10]`, the last bin closed.
fn unit_bin(v: f64) -> Option<usize> {
    if (0.0..=10.0).contains(&v) {
        Some((v.floor() as usize).min(9))
    } else {
        None
    }
}

/// Fraction of users holding `label` per unit bin of `column`, with
/// Clopper–Pearson intervals at level `alpha`. Every positioned user counts
/// in the bin total; users absent from the label table count as unlabeled.
pub fn bin_concentration(
    positions: &PositionTable,
    column: &str,
    labels: &LabelTable,
    label: &str,
    alpha: f64,
) -> Result<Vec<BinRow>> {
    let values = positions.column_by_name(column)?;
    let li = labels.require(label)?;
    let mut total = [0u64; 10];
    let mut hits = [0u64; 10];
    for (id, v) in positions.ids().iter().zip(&values) {
        let Some(b) = unit_bin(*v) else { continue };
        total[b] += 1;
        if labels.row_of(id).is_some_and(|r| labels.get(r, li) == Some(true)) {
            hits[b] += 1;
        }
    }
    (0..10)
        .map(|b| {
            let (fraction, ci) = if total[b] == 0 {
                (None, None)
            } else {
                (
                    Some(hits[b] as f64 / total[b] as f64),
                    Some(clopper_pearson(hits[b], total[b], alpha)?),
                )
            };
            Ok(BinRow {
                lo: b as f64,
                hi: (b + 1) as f64,
                n_total: total[b],
                n_labeled: hits[b],
                fraction,
                ci_lo: ci.map(|c| c.0),
                ci_hi: ci.map(|c| c.1),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRow {
    pub dimension: String,
    pub wave: String,
    pub annotator: Annotator,
    pub label_a: String,
    pub label_b: String,
}

impl PlanRow {
    pub fn column(&self) -> String {
        DimensionSpec::new(&self.dimension, &self.wave).column()
    }
}

/// The twenty-eight dimension/label-pair checks shipped by default.
pub fn default_plan() -> Vec<PlanRow> {
    use Annotator::{Human, Llm};
    [
        ("lrgen", "2019", Human, "left", "right"),
        ("lrecon", "2019", Human, "left", "right"),
        ("lrecon", "2023", Human, "left", "right"),
        ("immigrate_policy", "2019", Human, "liberal_immigration", "restrictive_immigration"),
        ("eu_position", "2023", Human, "eurosceptic", "pro_european"),
        ("eu_position", "2019", Human, "eurosceptic", "pro_european"),
        ("refugees", "2023", Human, "liberal_immigration", "restrictive_immigration"),
        ("galtan", "2023", Llm, "conservative", "liberal"),
        ("galtan", "2019", Llm, "conservative", "liberal"),
        ("sociallifestyle", "2019", Llm, "conservative", "liberal"),
        ("lrgen", "2019", Llm, "left", "right"),
        ("lrecon", "2019", Llm, "left", "right"),
        ("eu_position", "2023", Llm, "eurosceptic", "pro_european"),
        ("immigrate_policy", "2019", Llm, "liberal_immigration", "restrictive_immigration"),
        ("eu_position", "2019", Llm, "eurosceptic", "pro_european"),
        ("nationalism", "2019", Llm, "cosmopolitan", "nationalist"),
        ("antielite_salience", "2023", Llm, "elite", "populist"),
        ("refugees", "2023", Llm, "liberal_immigration", "restrictive_immigration"),
        ("antielite_salience", "2023", Human, "elite", "populist"),
        ("lrecon", "2023", Llm, "left", "right"),
        ("antielite_salience", "2019", Llm, "elite", "populist"),
        ("antielite_salience", "2019", Human, "elite", "populist"),
        ("corrupt_salience", "2019", Llm, "elite", "populist"),
        ("people_vs_elite", "2019", Llm, "elite", "populist"),
        ("corrupt_salience", "2019", Human, "elite", "populist"),
        ("people_vs_elite", "2019", Human, "elite", "populist"),
        ("environment", "2019", Llm, "climate_denialist", "pro_environment"),
        ("environment", "2019", Llm, "economic_focus", "pro_environment"),
    ]
    .into_iter()
    .map(|(d, w, a, la, lb)| PlanRow {
        dimension: d.into(),
        wave: w.into(),
        annotator: a,
        label_a: la.into(),
        label_b: lb.into(),
    })
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub plan: PlanRow,
    pub fit: LogisticFit,
    pub metrics: BinaryMetrics,
}

/// Positions on `column` of users in class A (label A present, label B not)
/// and class B (the reverse). Returned labels are true for class B.
pub fn labeled_positions(
    positions: &PositionTable,
    column: &str,
    labels: &LabelTable,
    label_a: &str,
    label_b: &str,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if label_a == label_b {
        return Err(Error::InvalidArgument(format!("label pair {label_a}/{label_b} is not a pair")));
    }
    let col = positions
        .column_index(column)
        .ok_or_else(|| Error::MissingColumn(column.to_string()))?;
    let (ia, ib) = (labels.require(label_a)?, labels.require(label_b)?);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (r, id) in labels.ids().iter().enumerate() {
        let (a, b) = (labels.get(r, ia) == Some(true), labels.get(r, ib) == Some(true));
        if a == b {
            continue;
        }
        let Some(p) = positions.row_of(id) else { continue };
        let v = positions.value(p, col);
        if v.is_finite() {
            x.push(v);
            y.push(b);
        }
    }
    Ok((x, y))
}

/// Logistic separation metrics for each plan row, sorted by decreasing AUC.
/// Rows whose annotation table is missing or whose classes are empty are
/// skipped with a warning. Metrics are computed on the fitting data.
pub fn separation_report(
    plan: &[PlanRow],
    positions: &PositionTable,
    tables: &[&LabelTable],
) -> Result<Vec<SeparationRow>> {
    let rows: Vec<Option<SeparationRow>> = plan
        .par_iter()
        .map(|row| {
            let Some(labels) = tables.iter().find(|t| t.source() == row.annotator) else {
                log::warn!("{} {}: no {} annotations, skipped", row.column(), row.label_a, row.annotator);
                return Ok(None);
            };
            let (x, y) = labeled_positions(positions, &row.column(), labels, &row.label_a, &row.label_b)?;
            let n_b = y.iter().filter(|&&b| b).count();
            if n_b == 0 || n_b == y.len() {
                log::warn!(
                    "{} {} {}/{}: empty class ({} vs {}), skipped",
                    row.column(),
                    row.annotator,
                    row.label_a,
                    row.label_b,
                    y.len() - n_b,
                    n_b
                );
                return Ok(None);
            }
            let fit = balanced_logistic_fit(&x, &y)?;
            let metrics = classification_metrics(&fit, &x, &y)?;
            Ok(Some(SeparationRow {
                plan: row.clone(),
                fit,
                metrics,
            }))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<SeparationRow> = rows.into_iter().flatten().collect();
    rows.sort_by(|a, b| b.metrics.roc_auc.total_cmp(&a.metrics.roc_auc));
    Ok(rows)
}

/// Dimensions scored in both survey waves.
pub const SHARED_DIMENSIONS: [&str; 4] = ["lrecon", "eu_position", "galtan", "antielite_salience"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossWaveRow {
    pub dimension: String,
    pub followers: f64,
    pub elites: f64,
    pub parties: f64,
    /// Party centroid positions as (party, older wave, newer wave).
    pub party_points: Vec<(String, f64, f64)>,
}

/// Pearson correlation between the two waves of each shared dimension for
/// followers, elites and party centroids of elites.
pub fn cross_wave_report(
    followers: &PositionTable,
    elites: &PositionTable,
    elite_party: &HashMap<String, String>,
    waves: (&str, &str),
) -> Result<Vec<CrossWaveRow>> {
    SHARED_DIMENSIONS
        .iter()
        .map(|&dim| {
            let c_old = DimensionSpec::new(dim, waves.0).column();
            let c_new = DimensionSpec::new(dim, waves.1).column();
            let f = pearson(&followers.column_by_name(&c_old)?, &followers.column_by_name(&c_new)?)?;
            let e_old = elites.column_by_name(&c_old)?;
            let e_new = elites.column_by_name(&c_new)?;
            let e = pearson(&e_old, &e_new)?;
            let mut sums: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
            for (i, id) in elites.ids().iter().enumerate() {
                if let Some(p) = elite_party.get(id) {
                    let s = sums.entry(p.as_str()).or_default();
                    s.0 += e_old[i];
                    s.1 += e_new[i];
                    s.2 += 1;
                }
            }
            let party_points: Vec<(String, f64, f64)> = sums
                .into_iter()
                .map(|(p, (a, b, n))| (p.to_string(), a / n as f64, b / n as f64))
                .collect();
            let xs: Vec<f64> = party_points.iter().map(|p| p.1).collect();
            let ys: Vec<f64> = party_points.iter().map(|p| p.2).collect();
            Ok(CrossWaveRow {
                dimension: dim.to_string(),
                followers: f,
                elites: e,
                parties: pearson(&xs, &ys).unwrap_or(f64::NAN),
                party_points,
            })
        })
        .collect()
}
