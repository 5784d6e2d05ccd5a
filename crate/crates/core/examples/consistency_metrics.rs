//! Jaccard consistency and Gini-Simpson / effective-number diversity on
//! hand-made selections.
//!
//!     cargo run --example consistency_metrics

use std::collections::BTreeSet;

use disposition::metrics::{diversity, jaccard, mean_pairwise_jaccard, FrequencyDistribution};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs: Vec<Vec<u32>> = vec![
        vec![1, 2, 3, 4, 5],
        vec![1, 2, 3, 6, 7],
        vec![1, 2, 8, 9, 10],
        vec![1, 2, 3, 4, 11],
    ];
    let sets: Vec<BTreeSet<u32>> = runs.iter().map(|r| r.iter().copied().collect()).collect();

    println!("J(run0, run1) = {:.4}", jaccard(&sets[0], &sets[1])?);
    println!("mean pairwise J = {:.4}", mean_pairwise_jaccard(&sets)?);

    let dist = FrequencyDistribution::from_selections(runs.iter().map(Vec::as_slice));
    let d = diversity(&dist)?;
    println!("unique constraints = {}", dist.support());
    println!("GS = {:.4}, EN = {:.4}", d.gini_simpson, d.effective_number);
    // GS and EN carry the same information: GS = 1 - 1/EN.
    println!("1 - 1/EN = {:.4}", 1.0 - 1.0 / d.effective_number);
    Ok(())
}
