//! Diagonal-covariance Gaussian mixture fitted by EM, and familiarity scores
//! (per-row log-density under the fitted mixture).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::table::EmbeddingMatrix;

/// Lower bound applied to every per-dimension variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub components: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            components: 8,
            seed: 0,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// `min(8, max(1, n / 10))`: eight components unless the data is tiny.
pub fn default_components(n: usize) -> usize {
    (n / 10).clamp(1, 8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub converged: bool,
    /// Mean per-row log-likelihood of the returned parameters.
    pub final_log_likelihood: f64,
    /// Mean per-row log-likelihood before the first M-step and after each one.
    pub log_likelihood_history: Vec<f64>,
}

impl GmmModel {
    /// Builds a model from explicit parameters. Weights are renormalized and
    /// variances floored.
    pub fn from_parameters(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
    ) -> Result<Self, AnalyticsError> {
        let k = weights.len();
        if k == 0 || means.len() != k || variances.len() != k {
            return Err(AnalyticsError::InvalidParameter(
                "weights, means and variances must have the same non-zero length".into(),
            ));
        }
        let d = means[0].len();
        if d == 0 || means.iter().chain(&variances).any(|v| v.len() != d) {
            return Err(AnalyticsError::InvalidParameter(
                "every mean and variance vector must have the same non-zero length".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
            return Err(AnalyticsError::InvalidParameter(
                "weights must be non-negative with a positive sum".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        let variances = variances
            .into_iter()
            .map(|v| v.into_iter().map(|x| x.max(VARIANCE_FLOOR)).collect())
            .collect();
        Ok(Self {
            weights,
            means,
            variances,
            converged: true,
            final_log_likelihood: f64::NAN,
            log_likelihood_history: Vec::new(),
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// `ln w_k + ln N(x | mu_k, diag var_k)` for every component.
    fn component_log_densities(&self, x: &[f64], consts: &[f64], out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            let mu = &self.means[k];
            let var = &self.variances[k];
            let mut q = 0.0;
            for j in 0..x.len() {
                let diff = x[j] - mu[j];
                q += diff * diff / var[j];
            }
            *slot = consts[k] - 0.5 * q;
        }
    }

    /// Per-component `ln w_k - 0.5 * sum_j ln(2 pi var_kj)`.
    fn log_consts(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.variances)
            .map(|(w, var)| {
                let log_det: f64 = var.iter().map(|v| LN_2PI + v.ln()).sum();
                w.ln() - 0.5 * log_det
            })
            .collect()
    }

    /// Log-density of one point under the mixture.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let consts = self.log_consts();
        let mut buf = vec![0.0; self.components()];
        self.component_log_densities(x, &consts, &mut buf);
        log_sum_exp(&buf)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn to_f64_rows(emb: &EmbeddingMatrix) -> Vec<f64> {
    emb.values().iter().map(|&x| f64::from(x)).collect()
}

/// Fits a `config.components`-component diagonal Gaussian mixture.
///
/// Centres are seeded with k-means++ from a ChaCha8 stream seeded by
/// `config.seed`; the initial parameters are the M-step of the hard
/// assignment to those centres. EM then runs until the mean log-likelihood
/// improves by less than `tol` or `max_iter` M-steps have run.
pub fn fit_gmm(emb: &EmbeddingMatrix, config: GmmConfig) -> Result<GmmModel, AnalyticsError> {
    let (n, d, k) = (emb.n(), emb.d(), config.components);
    if k == 0 {
        return Err(AnalyticsError::InvalidParameter("component count must be at least 1".into()));
    }
    if n < k {
        return Err(AnalyticsError::DegenerateInput(format!(
            "{n} rows cannot support {k} components"
        )));
    }
    let data = to_f64_rows(emb);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let centres = kmeans_pp(&data, n, d, k, &mut rng);
    let (centres, labels) = refine_centres(&data, n, d, centres, &mut rng);
    let mut resp = vec![0.0; n * k];
    for (i, &c) in labels.iter().enumerate() {
        resp[i * k + c] = 1.0;
    }
    let global_var = global_variance(&data, n, d);
    let fallback = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means: centres,
        variances: vec![global_var; k],
        converged: false,
        final_log_likelihood: f64::NAN,
        log_likelihood_history: Vec::new(),
    };
    let mut model = m_step(&data, n, d, &resp, &fallback);
    let mut ll = e_step(&model, &data, n, d, &mut resp);
    let mut history = vec![ll];
    let mut converged = false;
    for _ in 0..config.max_iter {
        model = m_step(&data, n, d, &resp, &model);
        let next = e_step(&model, &data, n, d, &mut resp);
        history.push(next);
        let improvement = next - ll;
        ll = next;
        if improvement < config.tol {
            converged = true;
            break;
        }
    }
    model.converged = converged;
    model.final_log_likelihood = ll;
    model.log_likelihood_history = history;
    Ok(model)
}

fn global_variance(data: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for x in data.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for x in data.chunks_exact(d) {
        for j in 0..d {
            var[j] += (x[j] - mean[j]).powi(2);
        }
    }
    var.into_iter()
        .map(|v| (v / n as f64).max(VARIANCE_FLOOR))
        .collect()
}

fn kmeans_pp(data: &[f64], n: usize, d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let first = rng.random_range(0..n);
    let mut centres = vec![row(first).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq(row(i), row(first))).collect();
    while centres.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && *w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(sq(row(i), &c));
        }
        centres.push(c);
    }
    centres
}

fn nearest_centre(x: &[f64], centres: &[Vec<f64>]) -> usize {
    centres
        .iter()
        .enumerate()
        .map(|(c, mu)| (x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), c))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one centre")
        .1
}

/// A few Lloyd passes over the seeded centres. A cluster left with fewer than
/// `max(2, n / 20k)` members is re-seeded from a point of the largest
/// cluster, so no component starts out sitting on a lone far point.
fn refine_centres(
    data: &[f64],
    n: usize,
    d: usize,
    mut centres: Vec<Vec<f64>>,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    const PASSES: usize = 10;
    let k = centres.len();
    let min_members = (n / (20 * k)).max(2).min(n / k);
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let assign = |centres: &[Vec<f64>]| -> Vec<usize> {
        (0..n).map(|i| nearest_centre(row(i), centres)).collect()
    };
    let mut labels = assign(&centres);
    for _ in 0..PASSES {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        for (c, m) in members.iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            let mut mu = vec![0.0; d];
            for &i in m {
                for (acc, v) in mu.iter_mut().zip(row(i)) {
                    *acc += v;
                }
            }
            mu.iter_mut().for_each(|acc| *acc /= m.len() as f64);
            centres[c] = mu;
        }
        let small: Vec<usize> = (0..k).filter(|&c| members[c].len() < min_members).collect();
        for &c in &small {
            let largest = (0..k)
                .max_by(|&a, &b| members[a].len().cmp(&members[b].len()).then(b.cmp(&a)))
                .expect("k >= 1");
            let pool = &members[largest];
            centres[c] = row(pool[rng.random_range(0..pool.len())]).to_vec();
        }
        let next = assign(&centres);
        let stable = next == labels;
        labels = next;
        if small.is_empty() && stable {
            break;
        }
    }
    (centres, labels)
}

/// Fills `resp` with responsibilities and returns the mean log-likelihood.
fn e_step(model: &GmmModel, data: &[f64], n: usize, d: usize, resp: &mut [f64]) -> f64 {
    let k = model.components();
    let consts = model.log_consts();
    let lls: Vec<f64> = resp
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, r)| {
            model.component_log_densities(&data[i * d..(i + 1) * d], &consts, r);
            let lse = log_sum_exp(r);
            for v in r.iter_mut() {
                *v = (*v - lse).exp();
            }
            lse
        })
        .collect();
    // sequential sum keeps the result independent of thread scheduling
    lls.iter().sum::<f64>() / n as f64
}

fn m_step(data: &[f64], n: usize, d: usize, resp: &[f64], prev: &GmmModel) -> GmmModel {
    let k = prev.components();
    let mut mass = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    for i in 0..n {
        let x = &data[i * d..(i + 1) * d];
        for c in 0..k {
            let r = resp[i * k + c];
            if r == 0.0 {
                continue;
            }
            mass[c] += r;
            for (m, v) in means[c].iter_mut().zip(x) {
                *m += r * v;
            }
        }
    }
    let mut variances = vec![vec![0.0; d]; k];
    for c in 0..k {
        if mass[c] > 0.0 {
            means[c].iter_mut().for_each(|m| *m /= mass[c]);
        }
    }
    for i in 0..n {
        let x = &data[i * d..(i + 1) * d];
        for c in 0..k {
            let r = resp[i * k + c];
            if r == 0.0 {
                continue;
            }
            for j in 0..d {
                let diff = x[j] - means[c][j];
                variances[c][j] += r * diff * diff;
            }
        }
    }
    for c in 0..k {
        if mass[c] > 0.0 {
            variances[c]
                .iter_mut()
                .for_each(|v| *v = (*v / mass[c]).max(VARIANCE_FLOOR));
        } else {
            // an empty component keeps its old shape; its weight is zero
            means[c] = prev.means[c].clone();
            variances[c] = prev.variances[c].clone();
        }
    }
    let total: f64 = mass.iter().sum();
    GmmModel {
        weights: mass.iter().map(|m| m / total).collect(),
        means,
        variances,
        converged: false,
        final_log_likelihood: f64::NAN,
        log_likelihood_history: Vec::new(),
    }
}

/// Per-row familiarity (log-density), aligned to table rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamiliarityScores {
    pub scores: Vec<f64>,
}

impl FamiliarityScores {
    /// Row indices from least to most familiar; ties keep row order.
    pub fn ascending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(a.cmp(&b)));
        idx
    }
}

pub fn familiarity_scores(model: &GmmModel, emb: &EmbeddingMatrix) -> Result<FamiliarityScores, AnalyticsError> {
    if model.dim() != emb.d() {
        return Err(AnalyticsError::DimensionMismatch {
            model: model.dim(),
            data: emb.d(),
        });
    }
    let consts = model.log_consts();
    let k = model.components();
    let scores = emb
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map_init(
            || (vec![0.0; k], Vec::with_capacity(emb.d())),
            |(buf, x), row| {
                x.clear();
                x.extend(row.iter().map(|&v| f64::from(v)));
                model.component_log_densities(x, &consts, buf);
                log_sum_exp(buf)
            },
        )
        .collect();
    Ok(FamiliarityScores { scores })
}
