#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use disposition::harness::{CellKey, ProviderMeta, RunRecord, RunStatus};
use disposition::pool::ConstraintId;
use disposition::seed::{stream, uniform_below};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::RngCore;

pub fn meta(model: &str) -> ProviderMeta {
    ProviderMeta {
        model: model.into(),
        kind: "synthetic".into(),
        temperature: 1.0,
        top_p: 1.0,
        reasoning_effort: None,
        verbosity: None,
    }
}

pub fn record(cell: &CellKey, replication: u32, selected: Vec<ConstraintId>) -> RunRecord {
    RunRecord {
        run_id: uuid::Uuid::from_u128(replication as u128 + 1),
        cell: cell.clone(),
        replication,
        permutation_seed: replication as u64,
        attempts: 1,
        status: RunStatus::Valid,
        selected,
        justifications: Vec::new(),
        compatibility: String::new(),
        raw_payload: None,
        error: None,
        provider: meta(&cell.model),
        started_unix_ms: None,
        finished_unix_ms: None,
    }
}

/// `runs` random budget-sized subsets of `1..=pool`, skewed so cells differ.
pub fn random_runs(seed: u64, pool: u32, budget: usize, runs: usize) -> Vec<Vec<ConstraintId>> {
    let mut rng = stream(seed);
    let favourites = 1 + uniform_below(&mut rng, pool as u64 / 2) as u32;
    (0..runs)
        .map(|_| {
            let mut picked = Vec::new();
            while picked.len() < budget {
                let id = if rng.next_u64().is_multiple_of(3) {
                    1 + uniform_below(&mut rng, favourites as u64) as u32
                } else {
                    1 + uniform_below(&mut rng, pool as u64) as u32
                };
                if !picked.contains(&id) {
                    picked.push(id);
                }
            }
            picked
        })
        .collect()
}

/// Double-loop Jaccard over every ordered-pair-free combination.
pub fn naive_mean_jaccard(runs: &[Vec<ConstraintId>]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let a: BTreeSet<_> = runs[i].iter().collect();
            let b: BTreeSet<_> = runs[j].iter().collect();
            let inter = a.iter().filter(|x| b.contains(*x)).count();
            let union = a.len() + b.len() - inter;
            total += inter as f64 / union as f64;
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// `(GS, EN, unique)` straight from proportions.
pub fn naive_diversity(runs: &[Vec<ConstraintId>]) -> (f64, f64, usize) {
    let mut counts: BTreeMap<ConstraintId, f64> = BTreeMap::new();
    for r in runs {
        for id in r {
            *counts.entry(*id).or_default() += 1.0;
        }
    }
    let total: f64 = counts.values().sum();
    let sum_p2: f64 = counts.values().map(|c| (c / total) * (c / total)).sum();
    (1.0 - sum_p2, 1.0 / sum_p2, counts.len())
}

/// Eigen-decomposition of the sample covariance of a row-major table:
/// eigenvalues descending with matching unit eigenvectors.
pub fn covariance_oracle(data: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = DMatrix::from_row_slice(rows, cols, data);
    let means = m.row_mean();
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let cov = centered.transpose() * &centered / (rows as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    (
        order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect(),
    )
}

pub fn centered(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let means: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| data[i * cols + j]).sum::<f64>() / rows as f64)
        .collect();
    data.iter()
        .enumerate()
        .map(|(k, x)| x - means[k % cols])
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn random_matrix(seed: u64, rows: usize, cols: usize) -> Vec<f64> {
    let mut rng = stream(seed);
    (0..rows * cols)
        .map(|_| disposition::seed::unit_f64(&mut rng) * 2.0 - 1.0)
        .collect()
}
