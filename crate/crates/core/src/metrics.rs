//! Consistency and diversity measures per cell.
//!
//! * Consistency is the mean Jaccard similarity `|A ∩ B| / |A ∪ B|` over all
//!   unordered pairs of a cell's selection sets.
//! * Diversity pools every selection of the cell into counts `c_k` with
//!   total `T = runs × budget`. With `p_k = c_k / T` the Gini–Simpson index
//!   is `1 − Σ p_k²` and the effective number is `1 / Σ p_k²`.
//!
//! `Σ p_k²` is evaluated as the exact integer ratio `Σ c_k² / T²`, so the
//! degenerate cases (identical runs, disjoint runs) come out exact and
//! `GS = 1 − 1/EN` holds to rounding.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{CellKey, RunRecord, RunStatus};
use crate::pool::ConstraintId;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("Jaccard similarity of two empty sets is undefined")]
    EmptySets,
    #[error("need at least 2 runs, got {0}")]
    InsufficientRuns(usize),
    #[error("empty frequency distribution")]
    EmptyDistribution,
    #[error("records mix cells {0} and {1}")]
    MixedCells(CellKey, CellKey),
    #[error("failed to parse report: {0}")]
    Parse(String),
}

/// `|a ∩ b| / |a ∪ b|`.
pub fn jaccard(
    a: &BTreeSet<ConstraintId>,
    b: &BTreeSet<ConstraintId>,
) -> Result<f64, MetricsError> {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return Err(MetricsError::EmptySets);
    }
    Ok(inter as f64 / union as f64)
}

// Both slices sorted and deduplicated.
fn jaccard_sorted(a: &[ConstraintId], b: &[ConstraintId]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Mean of [`jaccard`] over all `n(n−1)/2` unordered pairs.
pub fn mean_pairwise_jaccard(runs: &[BTreeSet<ConstraintId>]) -> Result<f64, MetricsError> {
    if runs.len() < 2 {
        return Err(MetricsError::InsufficientRuns(runs.len()));
    }
    if runs.iter().any(BTreeSet::is_empty) {
        // Two empty sets would make a pair undefined; one empty set is
        // simply disjoint from the rest.
        if runs.iter().filter(|r| r.is_empty()).count() >= 2 {
            return Err(MetricsError::EmptySets);
        }
    }
    let sorted: Vec<Vec<ConstraintId>> = runs.iter().map(|r| r.iter().copied().collect()).collect();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            sum += jaccard_sorted(&sorted[i], &sorted[j]);
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Selection counts pooled over a cell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrequencyDistribution {
    counts: BTreeMap<ConstraintId, u64>,
    total: u64,
}

impl FrequencyDistribution {
    pub fn from_counts(counts: impl IntoIterator<Item = (ConstraintId, u64)>) -> Self {
        let mut dist = Self::default();
        for (id, c) in counts {
            if c > 0 {
                *dist.counts.entry(id).or_default() += c;
                dist.total += c;
            }
        }
        dist
    }

    pub fn from_selections<'a>(runs: impl IntoIterator<Item = &'a [ConstraintId]>) -> Self {
        let mut dist = Self::default();
        for run in runs {
            for &id in run {
                *dist.counts.entry(id).or_default() += 1;
                dist.total += 1;
            }
        }
        dist
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, id: ConstraintId) -> u64 {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<ConstraintId, u64> {
        &self.counts
    }

    /// Number of ids with a positive count.
    pub fn support(&self) -> usize {
        self.counts.len()
    }

    pub fn proportion(&self, id: ConstraintId) -> f64 {
        self.count(id) as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diversity {
    pub gini_simpson: f64,
    pub effective_number: f64,
}

pub fn diversity(dist: &FrequencyDistribution) -> Result<Diversity, MetricsError> {
    if dist.total == 0 {
        return Err(MetricsError::EmptyDistribution);
    }
    let sum_sq: u128 = dist
        .counts
        .values()
        .map(|&c| (c as u128) * (c as u128))
        .sum();
    let total_sq = (dist.total as u128) * (dist.total as u128);
    Ok(Diversity {
        gini_simpson: (total_sq - sum_sq) as f64 / total_sq as f64,
        effective_number: total_sq as f64 / sum_sq as f64,
    })
}

/// One row of the consistency/diversity report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    #[serde(flatten)]
    pub cell: CellKey,
    pub jaccard: f64,
    pub gini_simpson: f64,
    pub effective_number: f64,
    pub unique_constraints: usize,
    pub runs: usize,
    pub excluded: usize,
}

/// Metrics over a cell's records. Invalid records are counted in
/// `excluded` and otherwise ignored.
pub fn cell_metrics(records: &[RunRecord]) -> Result<CellMetrics, MetricsError> {
    let Some(first) = records.first() else {
        return Err(MetricsError::InsufficientRuns(0));
    };
    if let Some(other) = records.iter().find(|r| r.cell != first.cell) {
        return Err(MetricsError::MixedCells(
            first.cell.clone(),
            other.cell.clone(),
        ));
    }
    let valid: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.status == RunStatus::Valid)
        .collect();
    let excluded = records.len() - valid.len();
    if valid.len() < 2 {
        return Err(MetricsError::InsufficientRuns(valid.len()));
    }
    let sets: Vec<BTreeSet<ConstraintId>> = valid
        .iter()
        .map(|r| r.selected.iter().copied().collect())
        .collect();
    let dist = FrequencyDistribution::from_selections(valid.iter().map(|r| r.selected.as_slice()));
    let div = diversity(&dist)?;
    Ok(CellMetrics {
        cell: first.cell.clone(),
        jaccard: mean_pairwise_jaccard(&sets)?,
        gini_simpson: div.gini_simpson,
        effective_number: div.effective_number,
        unique_constraints: dist.support(),
        runs: valid.len(),
        excluded,
    })
}

/// Difference in mean Jaccard between two cells sharing a model or an
/// instruction type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardDelta {
    pub a: CellKey,
    pub b: CellKey,
    /// `J(a) − J(b)`, with `a` the more consistent cell.
    pub delta: f64,
}

/// The per-cell table, sorted by Jaccard descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<CellMetrics>,
}

pub const REPORT_COLUMNS: [&str; 8] = [
    "model",
    "instruction_type",
    "jaccard",
    "gini_simpson",
    "effective_number",
    "unique_constraints",
    "runs",
    "excluded",
];

impl MetricsReport {
    pub fn new(mut rows: Vec<CellMetrics>) -> Self {
        rows.sort_by(|a, b| {
            b.jaccard
                .total_cmp(&a.jaccard)
                .then_with(|| a.cell.cmp(&b.cell))
        });
        Self { rows }
    }

    pub fn get(&self, cell: &CellKey) -> Option<&CellMetrics> {
        self.rows.iter().find(|r| &r.cell == cell)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = REPORT_COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
                r.cell.model,
                r.cell.instruction_type,
                r.jaccard,
                r.gini_simpson,
                r.effective_number,
                r.unique_constraints,
                r.runs,
                r.excluded
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.rows).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> Result<Self, MetricsError> {
        let rows: Vec<CellMetrics> =
            serde_json::from_str(json).map_err(|e| MetricsError::Parse(e.to_string()))?;
        Ok(Self::new(rows))
    }

    /// Pairwise Jaccard differences within each model and within each
    /// instruction type.
    pub fn jaccard_deltas(&self) -> Vec<JaccardDelta> {
        let mut out = Vec::new();
        for (i, x) in self.rows.iter().enumerate() {
            for y in &self.rows[i + 1..] {
                let related = x.cell.model == y.cell.model
                    || x.cell.instruction_type == y.cell.instruction_type;
                if related {
                    // rows are sorted, so x is at least as consistent as y
                    out.push(JaccardDelta {
                        a: x.cell.clone(),
                        b: y.cell.clone(),
                        delta: x.jaccard - y.jaccard,
                    });
                }
            }
        }
        out
    }

    pub fn deltas_to_tsv(&self) -> String {
        let mut out = String::from("cell_a\tcell_b\tdelta_jaccard\n");
        for d in self.jaccard_deltas() {
            let _ = writeln!(out, "{}\t{}\t{:.4}", d.a, d.b, d.delta);
        }
        out
    }
}
