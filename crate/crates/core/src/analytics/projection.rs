//! 2D projections of the embedding matrix.
//!
//! `Pca` is deterministic: the top two eigenvectors of the sample covariance,
//! each signed so its largest-magnitude loading is positive. `NeighborEmbed`
//! is an exact t-SNE layout (O(n^2) per iteration) started from the PCA
//! coordinates; it is reproducible for a given seed with this implementation.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::table::EmbeddingMatrix;

pub const NEIGHBOR_EMBED_ITERATIONS: usize = 500;
const PERPLEXITY: f64 = 30.0;
const EARLY_EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    #[default]
    Pca,
    NeighborEmbed,
}

impl std::str::FromStr for ProjectionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pca" => Ok(Self::Pca),
            "neighbor_embed" | "neighbor-embed" | "tsne" => Ok(Self::NeighborEmbed),
            other => Err(format!("unknown projection method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub coords: Vec<[f64; 2]>,
    pub method: ProjectionMethod,
    pub seed: u64,
    /// Covariance eigenvalues of the two PCA axes (the variances of the two
    /// PCA output columns).
    pub explained_variance: [f64; 2],
}

pub fn project_2d(emb: &EmbeddingMatrix, method: ProjectionMethod, seed: u64) -> Result<Projection2D, AnalyticsError> {
    let (n, d) = (emb.n(), emb.d());
    if n < 3 {
        return Err(AnalyticsError::DegenerateInput(format!(
            "projection needs at least 3 rows, got {n}"
        )));
    }
    if d < 2 {
        return Err(AnalyticsError::DegenerateInput(format!(
            "projection needs at least 2 dimensions, got {d}"
        )));
    }
    let (coords, explained_variance) = pca(emb);
    let coords = match method {
        ProjectionMethod::Pca => coords,
        ProjectionMethod::NeighborEmbed => neighbor_embed(emb, &coords, seed),
    };
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AnalyticsError::DegenerateInput("projection produced non-finite coordinates".into()));
    }
    Ok(Projection2D {
        coords,
        method,
        seed,
        explained_variance,
    })
}

fn centered(emb: &EmbeddingMatrix) -> DMatrix<f64> {
    let (n, d) = (emb.n(), emb.d());
    let mut mean = vec![0.0; d];
    for r in emb.rows() {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    DMatrix::from_fn(n, d, |i, j| f64::from(emb.row(i)[j]) - mean[j])
}

fn pca(emb: &EmbeddingMatrix) -> (Vec<[f64; 2]>, [f64; 2]) {
    let n = emb.n();
    let x = centered(emb);
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = DMatrix::zeros(x.ncols(), 2);
    let mut explained = [0.0; 2];
    for (slot, &col) in order.iter().take(2).enumerate() {
        let mut v = eig.eigenvectors.column(col).into_owned();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        axes.set_column(slot, &v);
        explained[slot] = eig.eigenvalues[col].max(0.0);
    }
    let proj = x * axes;
    let coords = (0..n).map(|i| [proj[(i, 0)], proj[(i, 1)]]).collect();
    (coords, explained)
}

fn squared_distances_to(data: &[f64], d: usize, i: usize) -> Vec<f64> {
    let a = &data[i * d..(i + 1) * d];
    data.chunks_exact(d)
        .map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
        .collect()
}

/// Conditional affinities of row `i` over its nearest neighbours, with the
/// Gaussian bandwidth bisected to hit the target perplexity.
fn row_affinities(dist: &[f64], i: usize, neighbours: usize, perplexity: f64) -> Vec<(usize, f64)> {
    let mut cand: Vec<(f64, usize)> = dist
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, &dd)| (dd, j))
        .collect();
    cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(neighbours);
    let target = perplexity.ln();
    let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
    let mut p = vec![0.0; cand.len()];
    let d0 = cand.first().map_or(0.0, |c| c.0);
    for _ in 0..64 {
        let mut sum = 0.0;
        for (slot, (dd, _)) in p.iter_mut().zip(&cand) {
            *slot = (-(dd - d0) * beta).exp();
            sum += *slot;
        }
        let mut entropy = 0.0;
        for (slot, (dd, _)) in p.iter_mut().zip(&cand) {
            *slot /= sum;
            entropy += beta * (dd - d0) * *slot;
        }
        entropy += sum.ln();
        let diff = entropy - target;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    cand.into_iter().zip(p).map(|((_, j), pj)| (j, pj)).collect()
}

fn neighbor_embed(emb: &EmbeddingMatrix, init: &[[f64; 2]], seed: u64) -> Vec<[f64; 2]> {
    let (n, d) = (emb.n(), emb.d());
    let data: Vec<f64> = emb.values().iter().map(|&v| f64::from(v)).collect();
    let perplexity = PERPLEXITY.min((n as f64 - 1.0) / 3.0).max(1.0);
    let neighbours = ((3.0 * perplexity) as usize).clamp(1, n - 1);

    let conditional: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| row_affinities(&squared_distances_to(&data, d, i), i, neighbours, perplexity))
        .collect();
    // symmetrize: p_ij = (p_j|i + p_i|j) / 2n
    let mut joint: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
    for (i, row) in conditional.iter().enumerate() {
        for &(j, p) in row {
            *joint[i].entry(j).or_default() += p;
            *joint[j].entry(i).or_default() += p;
        }
    }
    let p_rows: Vec<Vec<(usize, f64)>> = joint
        .into_iter()
        .map(|m| m.into_iter().map(|(j, p)| (j, p / (2.0 * n as f64))).collect())
        .collect();

    // PCA start, scaled to a small spread, with a seeded jitter to split ties
    let std0 = (init.iter().map(|c| c[0] * c[0]).sum::<f64>() / n as f64).sqrt();
    let scale = if std0 > 0.0 { 1e-4 / std0 } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<[f64; 2]> = init
        .iter()
        .map(|c| {
            [
                c[0] * scale + rng.random_range(-1e-6..1e-6),
                c[1] * scale + rng.random_range(-1e-6..1e-6),
            ]
        })
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let learning_rate = (n as f64 / EARLY_EXAGGERATION / 4.0).max(50.0);

    for iter in 0..NEIGHBOR_EMBED_ITERATIONS {
        let exaggeration = if iter < EXAGGERATION_ITERS { EARLY_EXAGGERATION } else { 1.0 };
        let momentum = if iter < EXAGGERATION_ITERS { 0.5 } else { 0.8 };
        // per row: attraction, unnormalized repulsion, partial Z
        let parts: Vec<([f64; 2], [f64; 2], f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let yi = y[i];
                let mut rep = [0.0; 2];
                let mut z = 0.0;
                for (j, yj) in y.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let (dx, dy) = (yi[0] - yj[0], yi[1] - yj[1]);
                    let q = 1.0 / (1.0 + dx * dx + dy * dy);
                    z += q;
                    rep[0] += q * q * dx;
                    rep[1] += q * q * dy;
                }
                let mut attr = [0.0; 2];
                for &(j, p) in &p_rows[i] {
                    let (dx, dy) = (yi[0] - y[j][0], yi[1] - y[j][1]);
                    let q = 1.0 / (1.0 + dx * dx + dy * dy);
                    attr[0] += exaggeration * p * q * dx;
                    attr[1] += exaggeration * p * q * dy;
                }
                (attr, rep, z)
            })
            .collect();
        let z: f64 = parts.iter().map(|p| p.2).sum::<f64>().max(f64::MIN_POSITIVE);
        for (i, (attr, rep, _)) in parts.iter().enumerate() {
            for a in 0..2 {
                let grad = 4.0 * (attr[a] - rep[a] / z);
                let same_sign = (grad > 0.0) == (velocity[i][a] > 0.0);
                gains[i][a] = if same_sign { (gains[i][a] * 0.8).max(0.01) } else { gains[i][a] + 0.2 };
                velocity[i][a] = momentum * velocity[i][a] - learning_rate * gains[i][a] * grad;
                y[i][a] += velocity[i][a];
            }
        }
        let mut mean = [0.0; 2];
        for p in &y {
            mean[0] += p[0];
            mean[1] += p[1];
        }
        for p in y.iter_mut() {
            p[0] -= mean[0] / n as f64;
            p[1] -= mean[1] / n as f64;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn random_emb(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..d).map(|j| (noise.sample(&mut rng) * (1.0 + j as f64)) as f32).collect())
            .collect();
        EmbeddingMatrix::from_rows(&rows).unwrap()
    }

    fn column_variance(coords: &[[f64; 2]], c: usize) -> f64 {
        let n = coords.len() as f64;
        let mean = coords.iter().map(|p| p[c]).sum::<f64>() / n;
        coords.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn collinear_points_have_flat_second_axis() {
        let emb = EmbeddingMatrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![-1.0, -2.0, -3.0],
            vec![0.5, 1.0, 1.5],
        ])
        .unwrap();
        let p = project_2d(&emb, ProjectionMethod::Pca, 0).unwrap();
        assert!(p.coords.iter().all(|c| c[1].abs() <= 1e-9), "{:?}", p.coords);
    }

    #[test]
    fn planar_data_distances_preserved() {
        let pts = [[0.0f32, 0.0], [3.0, 1.0], [-1.0, 2.0], [2.0, -2.5], [-4.0, -0.5]];
        let rows: Vec<Vec<f32>> = pts.iter().map(|p| p.to_vec()).collect();
        let emb = EmbeddingMatrix::from_rows(&rows).unwrap();
        let p = project_2d(&emb, ProjectionMethod::Pca, 0).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let orig = ((pts[i][0] - pts[j][0]) as f64).hypot((pts[i][1] - pts[j][1]) as f64);
                let proj = (p.coords[i][0] - p.coords[j][0]).hypot(p.coords[i][1] - p.coords[j][1]);
                assert!((orig - proj).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn output_columns_uncorrelated() {
        let emb = random_emb(200, 6, 3);
        let p = project_2d(&emb, ProjectionMethod::Pca, 0).unwrap();
        let n = p.coords.len() as f64;
        let m0 = p.coords.iter().map(|c| c[0]).sum::<f64>() / n;
        let m1 = p.coords.iter().map(|c| c[1]).sum::<f64>() / n;
        let cov = p.coords.iter().map(|c| (c[0] - m0) * (c[1] - m1)).sum::<f64>() / (n - 1.0);
        let s0 = column_variance(&p.coords, 0).sqrt();
        let s1 = column_variance(&p.coords, 1).sqrt();
        assert!(cov.abs() <= 1e-6 * s0 * s1);
        assert!((column_variance(&p.coords, 0) - p.explained_variance[0]).abs() < 1e-9 * p.explained_variance[0]);
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let emb = random_emb(50, 4, 8);
        let a = project_2d(&emb, ProjectionMethod::Pca, 0).unwrap();
        let b = project_2d(&emb, ProjectionMethod::Pca, 99).unwrap();
        assert_eq!(a.coords, b.coords);
        // negate the data: loadings flip but the convention flips them back,
        // so coordinates change sign
        let neg: Vec<Vec<f32>> = emb.rows().map(|r| r.iter().map(|v| -v).collect()).collect();
        let c = project_2d(&EmbeddingMatrix::from_rows(&neg).unwrap(), ProjectionMethod::Pca, 0).unwrap();
        for (x, y) in a.coords.iter().zip(&c.coords) {
            assert!((x[0] + y[0]).abs() < 1e-9 && (x[1] + y[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn too_small_inputs() {
        let two = EmbeddingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(matches!(project_2d(&two, ProjectionMethod::Pca, 0), Err(AnalyticsError::DegenerateInput(_))));
        let flat = EmbeddingMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert!(matches!(project_2d(&flat, ProjectionMethod::Pca, 0), Err(AnalyticsError::DegenerateInput(_))));
    }

    #[test]
    fn neighbor_embed_separates_clusters_and_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut rows = Vec::new();
        for c in [-5.0, 5.0] {
            for _ in 0..40 {
                rows.push((0..5).map(|_| (c + noise.sample(&mut rng)) as f32).collect::<Vec<f32>>());
            }
        }
        let emb = EmbeddingMatrix::from_rows(&rows).unwrap();
        let a = project_2d(&emb, ProjectionMethod::NeighborEmbed, 1).unwrap();
        let b = project_2d(&emb, ProjectionMethod::NeighborEmbed, 1).unwrap();
        assert_eq!(a, b);
        let c = project_2d(&emb, ProjectionMethod::NeighborEmbed, 2).unwrap();
        assert_ne!(a.coords, c.coords);
        let centroid = |range: std::ops::Range<usize>| {
            let m = range.len() as f64;
            let s = range.fold([0.0, 0.0], |acc, i| [acc[0] + a.coords[i][0], acc[1] + a.coords[i][1]]);
            [s[0] / m, s[1] / m]
        };
        let (c0, c1) = (centroid(0..40), centroid(40..80));
        let between = (c0[0] - c1[0]).hypot(c0[1] - c1[1]);
        let spread = (0..40)
            .map(|i| (a.coords[i][0] - c0[0]).hypot(a.coords[i][1] - c0[1]))
            .fold(0.0, f64::max);
        assert!(between > 2.0 * spread, "between {between} spread {spread}");
    }
}
