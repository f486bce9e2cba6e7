//! Duplicate groups: connected components of the graph linking each row to
//! those of its `k` nearest neighbours (cosine distance, ties by row index)
//! that lie within `tau`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cosine::{unit_distance, unit_rows};
use super::AnalyticsError;
use crate::table::EmbeddingMatrix;

/// Above this many rows [`SearchStrategy::Auto`] switches to the pivot table.
pub const EXACT_SEARCH_LIMIT: usize = 50_000;
const PIVOTS: usize = 8;
// Slack on triangle-inequality bounds so rounding never prunes a true neighbour.
const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    #[default]
    Auto,
    Exact,
    PivotTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicateParams {
    pub k: usize,
    pub tau: f64,
}

impl Default for DuplicateParams {
    fn default() -> Self {
        Self { k: 5, tau: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateGroups {
    /// Each group sorted by id; groups by descending size, then first id.
    pub groups: Vec<Vec<String>>,
    pub params: DuplicateParams,
}

impl DuplicateGroups {
    pub fn duplicate_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

pub fn find_duplicates<S: AsRef<str>>(
    emb: &EmbeddingMatrix,
    ids: &[S],
    k: usize,
    tau: f64,
) -> Result<DuplicateGroups, AnalyticsError> {
    find_duplicates_with(emb, ids, DuplicateParams { k, tau }, SearchStrategy::Auto)
}

pub fn find_duplicates_with<S: AsRef<str>>(
    emb: &EmbeddingMatrix,
    ids: &[S],
    params: DuplicateParams,
    strategy: SearchStrategy,
) -> Result<DuplicateGroups, AnalyticsError> {
    let n = emb.n();
    if ids.len() != n {
        return Err(AnalyticsError::InvalidParameter(format!(
            "{} ids for {n} embedding rows",
            ids.len()
        )));
    }
    let edges = knn_edges(emb, params, strategy)?;
    let mut uf = UnionFind::new(n);
    for (i, neighbours) in edges.iter().enumerate() {
        for &j in neighbours {
            uf.union(i, j);
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        members[uf.find(i)].push(i);
    }
    let mut groups: Vec<Vec<String>> = members
        .into_iter()
        .filter(|m| m.len() >= 2)
        .map(|m| {
            let mut g: Vec<String> = m.into_iter().map(|i| ids[i].as_ref().to_string()).collect();
            g.sort();
            g
        })
        .collect();
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    Ok(DuplicateGroups { groups, params })
}

/// For every row, the neighbours among its `k` nearest that are within `tau`,
/// nearest first. This is the edge set the groups are built from.
pub fn knn_edges(
    emb: &EmbeddingMatrix,
    params: DuplicateParams,
    strategy: SearchStrategy,
) -> Result<Vec<Vec<usize>>, AnalyticsError> {
    let DuplicateParams { k, tau } = params;
    if k == 0 {
        return Err(AnalyticsError::InvalidParameter("k must be at least 1".into()));
    }
    if !(0.0..=2.0).contains(&tau) {
        return Err(AnalyticsError::InvalidParameter(format!(
            "tau must be in [0, 2], got {tau}"
        )));
    }
    let n = emb.n();
    if n < 2 {
        return Err(AnalyticsError::DegenerateInput(format!(
            "duplicate search needs at least 2 rows, got {n}"
        )));
    }
    let unit = unit_rows(emb)?;
    let d = emb.d();
    let row = |i: usize| &unit[i * d..(i + 1) * d];
    let use_pivots = match strategy {
        SearchStrategy::Auto => n > EXACT_SEARCH_LIMIT,
        SearchStrategy::Exact => false,
        SearchStrategy::PivotTable => true,
    };

    let nearest = |mut cands: Vec<(f64, usize)>| -> Vec<usize> {
        cands.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(k);
        cands.into_iter().map(|(_, j)| j).collect()
    };

    if !use_pivots {
        return Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let a = row(i);
                let cands = (0..n)
                    .filter(|&j| j != i)
                    .filter_map(|j| {
                        let dist = unit_distance(a, row(j));
                        (dist <= tau).then_some((dist, j))
                    })
                    .collect();
                nearest(cands)
            })
            .collect());
    }

    let table = PivotTable::build(&unit, n, d);
    // Euclidean distance between unit vectors is sqrt(2 * cosine distance).
    let radius = (2.0 * tau).sqrt() + BOUND_SLACK;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let a = row(i);
            let cands = table
                .candidates(i, radius)
                .filter_map(|j| {
                    let dist = unit_distance(a, row(j));
                    (dist <= tau).then_some((dist, j))
                })
                .collect();
            nearest(cands)
        })
        .collect())
}

/// Fraction of exact neighbour edges the pivot-table search also returns,
/// measured over the first `sample` rows. Used to check the index.
pub fn knn_recall(emb: &EmbeddingMatrix, params: DuplicateParams, sample: usize) -> Result<f64, AnalyticsError> {
    let exact = knn_edges(emb, params, SearchStrategy::Exact)?;
    let pivot = knn_edges(emb, params, SearchStrategy::PivotTable)?;
    let (mut hit, mut total) = (0usize, 0usize);
    for (e, p) in exact.iter().zip(&pivot).take(sample.max(1)) {
        total += e.len();
        hit += e.iter().filter(|j| p.contains(j)).count();
    }
    Ok(if total == 0 { 1.0 } else { hit as f64 / total as f64 })
}

/// Distances from every row to a few far-apart pivot rows. Rows are also kept
/// sorted by distance to the first pivot so a range query is a binary search
/// plus a scan over a window.
struct PivotTable {
    pivots: usize,
    /// `dist[i * pivots + p]` = euclidean distance from row `i` to pivot `p`.
    dist: Vec<f64>,
    order: Vec<usize>,
    first: Vec<f64>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl PivotTable {
    fn build(unit: &[f64], n: usize, d: usize) -> Self {
        let row = |i: usize| &unit[i * d..(i + 1) * d];
        let pivots = PIVOTS.min(n);
        // farthest-first traversal from row 0
        let mut chosen = vec![0usize];
        let mut nearest: Vec<f64> = (0..n).map(|j| euclid(row(0), row(j))).collect();
        while chosen.len() < pivots {
            let (far, _) = nearest
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &dj)| if dj > best.1 { (j, dj) } else { best });
            chosen.push(far);
            for (j, nj) in nearest.iter_mut().enumerate() {
                *nj = nj.min(euclid(row(far), row(j)));
            }
        }
        let dist: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| chosen.iter().map(move |&p| euclid(row(i), row(p))))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| dist[a * pivots].total_cmp(&dist[b * pivots]).then(a.cmp(&b)));
        let first = order.iter().map(|&i| dist[i * pivots]).collect();
        Self {
            pivots,
            dist,
            order,
            first,
        }
    }

    /// Rows `j != i` that may lie within `radius` of row `i`.
    fn candidates(&self, i: usize, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let p = self.pivots;
        let di = &self.dist[i * p..(i + 1) * p];
        let lo = self.first.partition_point(|&x| x < di[0] - radius);
        let hi = self.first.partition_point(|&x| x <= di[0] + radius);
        self.order[lo..hi].iter().copied().filter(move |&j| {
            j != i
                && self.dist[j * p..(j + 1) * p]
                    .iter()
                    .zip(di)
                    .all(|(dj, dii)| (dj - dii).abs() <= radius)
        })
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{i:04}")).collect()
    }

    fn basis(n: usize) -> Vec<Vec<f32>> {
        (0..n)
            .map(|i| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                v
            })
            .collect()
    }

    #[test]
    fn identical_pair_among_orthogonal() {
        let mut rows = basis(6);
        rows.push(rows[2].clone());
        let emb = EmbeddingMatrix::from_rows(&rows).unwrap();
        let g = find_duplicates(&emb, &ids(7), 5, 1e-6).unwrap();
        assert_eq!(g.groups, vec![vec!["0002".to_string(), "0006".to_string()]]);
    }

    #[test]
    fn orthogonal_rows_have_no_groups() {
        let emb = EmbeddingMatrix::from_rows(&basis(5)).unwrap();
        assert!(find_duplicates(&emb, &ids(5), 5, 0.1).unwrap().groups.is_empty());
    }

    #[test]
    fn zero_row_reported() {
        let emb = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(
            find_duplicates(&emb, &ids(3), 2, 0.1).unwrap_err(),
            AnalyticsError::ZeroVector(1)
        );
    }

    #[test]
    fn parameter_checks() {
        let emb = EmbeddingMatrix::from_rows(&basis(3)).unwrap();
        assert!(find_duplicates(&emb, &ids(3), 0, 0.1).is_err());
        assert!(find_duplicates(&emb, &ids(3), 1, 2.5).is_err());
        let one = EmbeddingMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            find_duplicates(&one, &ids(1), 1, 0.1),
            Err(AnalyticsError::DegenerateInput(_))
        ));
    }

    #[test]
    fn chain_forms_one_component() {
        // a-b and b-c close, a-c farther but still linked through b
        let emb = EmbeddingMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 0.1],
            vec![1.0, 0.2],
            vec![-1.0, 0.0],
        ])
        .unwrap();
        let g = find_duplicates(&emb, &ids(4), 1, 0.006).unwrap();
        assert_eq!(g.groups, vec![vec!["0000".to_string(), "0001".into(), "0002".into()]]);
    }

    #[test]
    fn groups_sorted_by_size_then_first_id() {
        let mut rows = basis(8);
        rows.push(rows[5].clone());
        rows.push(rows[1].clone());
        rows.push(rows[1].clone());
        let emb = EmbeddingMatrix::from_rows(&rows).unwrap();
        let g = find_duplicates(&emb, &ids(11), 5, 1e-9).unwrap();
        assert_eq!(g.groups.len(), 2);
        assert_eq!(g.groups[0], ["0001", "0009", "0010"]);
        assert_eq!(g.groups[1], ["0005", "0008"]);
    }

    #[test]
    fn pivot_table_matches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 6;
        let mut rows: Vec<Vec<f32>> = (0..400)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect();
        for p in 0..20 {
            let mut v = rows[p * 3].clone();
            v[0] += 0.01;
            rows.push(v);
        }
        let emb = EmbeddingMatrix::from_rows(&rows).unwrap();
        for tau in [0.0, 1e-4, 0.01, 0.1, 0.5] {
            let params = DuplicateParams { k: 4, tau };
            let exact = knn_edges(&emb, params, SearchStrategy::Exact).unwrap();
            let pivot = knn_edges(&emb, params, SearchStrategy::PivotTable).unwrap();
            assert_eq!(exact, pivot, "tau={tau}");
            assert_eq!(knn_recall(&emb, params, 50).unwrap(), 1.0);
        }
    }
}
