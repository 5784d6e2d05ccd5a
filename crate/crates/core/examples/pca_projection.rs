//! Fit the two-component PCA behind the landscape on a small table.
//!
//!     cargo run --example pca_projection

use disposition::landscape::fit_pca;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 6 constraints (rows) by 3 cells (columns).
    let data = [
        0.30, 0.05, 0.10, //
        0.25, 0.10, 0.10, //
        0.20, 0.15, 0.20, //
        0.15, 0.20, 0.20, //
        0.05, 0.25, 0.20, //
        0.05, 0.25, 0.20,
    ];
    let pca = fit_pca(&data, 6, 3, 2)?;
    for (k, (comp, ratio)) in pca
        .components
        .iter()
        .zip(pca.explained_variance_ratio())
        .enumerate()
    {
        println!("PC{} {:>5.1}%  loadings {:?}", k + 1, ratio * 100.0, comp);
    }
    for (i, row) in data.chunks(3).enumerate() {
        let s = pca.transform_row(row);
        println!("constraint {} -> ({:+.4}, {:+.4})", i + 1, s[0], s[1]);
    }
    Ok(())
}
