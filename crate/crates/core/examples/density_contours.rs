//! Weighted kernel density on a lattice and its highest-density contours.
//!
//!     cargo run --example density_contours

use disposition::landscape::{density::density_on_grid, isolines, GridSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let points = [[-1.0, 0.0], [1.0, 0.5], [0.2, -1.2]];
    let weights = [0.5, 0.3, 0.2];
    let n = 129;
    let grid = GridSpec {
        x0: -4.0,
        y0: -4.0,
        dx: 8.0 / (n - 1) as f64,
        dy: 8.0 / (n - 1) as f64,
        nx: n,
        ny: n,
    };
    let values = density_on_grid(&points, &weights, &grid, (0.6, 0.6))?;
    let mass: f64 = values.iter().sum::<f64>() * grid.dx * grid.dy;
    println!("discrete mass on the grid: {mass:.6}");

    let peak = values.iter().copied().fold(0.0, f64::max);
    for frac in [0.2, 0.5, 0.8] {
        let level = peak * frac;
        let lines = isolines(&values, &grid, level);
        let area: f64 = lines
            .iter()
            .filter(|l| l.closed)
            .map(|l| l.signed_area())
            .sum();
        println!(
            "level {level:.4}: {} line(s), {} vertices, enclosed area {area:.3}",
            lines.len(),
            lines.iter().map(|l| l.points.len()).sum::<usize>()
        );
    }
    Ok(())
}
