//! Write the placeholder pool to disk, reload it and replay seeded
//! orderings.
//!
//!     cargo run --example pool_permutation

use disposition::pool::{load_pool, permute, write_pool, ConstraintPool, Element};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pool = ConstraintPool::placeholder();
    let dir = std::env::temp_dir().join("disposition-pool-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("pool.json");
    write_pool(&pool, &path)?;
    let reloaded = load_pool(&path)?;
    assert_eq!(reloaded, pool);
    println!("{} constraints written to {}", pool.len(), path.display());

    for element in Element::ALL {
        let n = pool
            .constraints()
            .iter()
            .filter(|c| c.element == element)
            .count();
        println!("  {:<10} {n}", element.as_str());
    }

    let first = permute(&pool, 2024);
    let again = permute(&reloaded, 2024);
    assert_eq!(first, again);
    println!("seed 2024 opens with {:?}", &first.order[..8]);
    println!(
        "seed 2025 opens with {:?}",
        &permute(&pool, 2025).order[..8]
    );
    Ok(())
}
