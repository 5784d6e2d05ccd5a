//! Principal component analysis through a one-sided Jacobi SVD.
//!
//! Rows are samples (constraints), columns are features (cells). Columns
//! are centered but not scaled. The centered matrix `X` is orthogonalized by
//! Hestenes rotations applied to its columns until every column pair is
//! orthogonal; the accumulated rotations form `V`, the column norms are the
//! singular values. Components are the leading columns of `V`, each flipped
//! so that its largest-magnitude loading is positive.

use super::LandscapeError;

const MAX_SWEEPS: usize = 100;

/// Right singular vectors and singular values of a row-major `rows × cols`
/// matrix, sorted by decreasing singular value. `v[k]` is the k-th vector.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_svd(data: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    // Column-major working copy.
    let mut u: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| data[i * cols + j]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    alpha += u[p][i] * u[p][i];
                    beta += u[q][i] * u[q][i];
                    gamma += u[p][i] * u[q][i];
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (a, b) = (u[p][i], u[q][i]);
                    u[p][i] = c * a - s * b;
                    u[q][i] = s * a + c * b;
                }
                for i in 0..cols {
                    let (a, b) = (v[p][i], v[q][i]);
                    v[p][i] = c * a - s * b;
                    v[q][i] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = u
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    (
        order.iter().map(|&k| norms[k]).collect(),
        order.into_iter().map(|k| v[k].clone()).collect(),
    )
}

/// A fitted two-or-more component PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Per-column means removed before projection.
    pub means: Vec<f64>,
    /// `components[k]` is a unit vector over columns.
    pub components: Vec<Vec<f64>>,
    /// Variance of the scores along each component (`s² / (rows − 1)`).
    pub explained_variance: Vec<f64>,
    pub singular_values: Vec<f64>,
    /// Sum of all column variances.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|comp| {
                comp.iter()
                    .zip(row.iter().zip(&self.means))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect()
    }

    /// Scores of every row of a row-major `rows × cols` table.
    pub fn transform(&self, data: &[f64], cols: usize) -> Vec<Vec<f64>> {
        data.chunks(cols)
            .map(|row| self.transform_row(row))
            .collect()
    }

    /// Maps scores back to the original column space.
    pub fn inverse_transform_row(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.means.clone();
        for (s, comp) in scores.iter().zip(&self.components) {
            for (o, c) in out.iter_mut().zip(comp) {
                *o += s * c;
            }
        }
        out
    }
}

/// Fits `components` principal axes to a row-major `rows × cols` table.
pub fn fit_pca(
    data: &[f64],
    rows: usize,
    cols: usize,
    components: usize,
) -> Result<PcaModel, LandscapeError> {
    assert_eq!(data.len(), rows * cols, "table shape");
    if cols < 2 {
        return Err(LandscapeError::Pca(format!(
            "need at least 2 columns, got {cols}"
        )));
    }
    if rows < 2 {
        return Err(LandscapeError::Pca(format!(
            "need at least 2 rows, got {rows}"
        )));
    }
    if components == 0 || components > rows.min(cols) {
        return Err(LandscapeError::Pca(format!(
            "components must be in 1..={}, got {components}",
            rows.min(cols)
        )));
    }
    let means: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| data[i * cols + j]).sum::<f64>() / rows as f64)
        .collect();
    let centered: Vec<f64> = data
        .iter()
        .enumerate()
        .map(|(k, x)| x - means[k % cols])
        .collect();
    let scale = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let spread = centered.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || spread <= 1e-12 * scale {
        return Err(LandscapeError::Pca(
            "zero variance: all rows are identical".into(),
        ));
    }

    let (singular, vectors) = jacobi_svd(&centered, rows, cols);
    let dof = (rows - 1) as f64;
    let total_variance = singular.iter().map(|s| s * s).sum::<f64>() / dof;
    let mut comps: Vec<Vec<f64>> = vectors.into_iter().take(components).collect();
    for comp in &mut comps {
        let lead =
            comp.iter().enumerate().fold(
                0,
                |best, (i, x)| if x.abs() > comp[best].abs() { i } else { best },
            );
        if comp[lead] < 0.0 {
            comp.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(PcaModel {
        means,
        components: comps,
        explained_variance: singular[..components].iter().map(|s| s * s / dof).collect(),
        singular_values: singular[..components].to_vec(),
        total_variance,
    })
}
