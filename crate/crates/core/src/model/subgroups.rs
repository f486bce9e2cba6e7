use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::confusion::{code_to_class, observed_classes};
use super::{categorical, subset_rows, ModelError};
use crate::table::{CategoricalColumn, MetadataTable, NULL_CODE};

/// Upper bound on the number of feature-value combinations.
pub const MAX_SUBGROUPS: u128 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupParams {
    pub features: Vec<String>,
    pub label_col: String,
    pub pred_col: String,
    #[serde(default)]
    pub positive_class: Option<String>,
    #[serde(default)]
    pub min_size: usize,
}

/// Tallies for one subgroup, handed to each metric.
#[derive(Debug, Clone)]
pub struct SubgroupCounts<'a> {
    pub classes: &'a [String],
    pub size: u64,
    pub correct: u64,
    /// Square over `classes`, only rows with both values present.
    pub confusion: Vec<Vec<u64>>,
    /// Rows with a label but no prediction, per label class.
    pub missing_pred: Vec<u64>,
}

impl SubgroupCounts<'_> {
    fn positives(&self, c: usize) -> u64 {
        self.confusion[c].iter().sum::<u64>() + self.missing_pred[c]
    }

    fn labelled(&self) -> u64 {
        self.confusion.iter().flatten().sum::<u64>() + self.missing_pred.iter().sum::<u64>()
    }

    fn predicted_as(&self, c: usize) -> u64 {
        self.confusion.iter().map(|r| r[c]).sum()
    }

    /// One-vs-rest (fpr, fnr) for class index `c`.
    fn one_vs_rest(&self, c: usize) -> (Option<f64>, Option<f64>) {
        let pos = self.positives(c);
        let tp = self.confusion[c][c];
        let neg = self.labelled() - pos;
        let fp = self.predicted_as(c) - tp;
        let fpr = (neg > 0).then(|| fp as f64 / neg as f64);
        let fnr = (pos > 0).then(|| (pos - tp) as f64 / pos as f64);
        (fpr, fnr)
    }
}

pub trait SubgroupMetric: Send + Sync {
    fn name(&self) -> &str;
    fn compute(&self, counts: &SubgroupCounts<'_>, positive: Option<usize>) -> Option<f64>;
}

struct Accuracy;
struct FalsePositiveRate;
struct FalseNegativeRate;

impl SubgroupMetric for Accuracy {
    fn name(&self) -> &str {
        "accuracy"
    }

    fn compute(&self, c: &SubgroupCounts<'_>, _: Option<usize>) -> Option<f64> {
        (c.size > 0).then(|| c.correct as f64 / c.size as f64)
    }
}

/// (false positive rate, false negative rate) for one class against the rest.
type RatePair = (Option<f64>, Option<f64>);

fn rate(c: &SubgroupCounts<'_>, positive: Option<usize>, pick: fn(RatePair) -> Option<f64>) -> Option<f64> {
    match positive {
        Some(p) => pick(c.one_vs_rest(p)),
        None => {
            let vals: Vec<f64> = (0..c.classes.len()).filter_map(|k| pick(c.one_vs_rest(k))).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

impl SubgroupMetric for FalsePositiveRate {
    fn name(&self) -> &str {
        "false_positive_rate"
    }

    fn compute(&self, c: &SubgroupCounts<'_>, positive: Option<usize>) -> Option<f64> {
        rate(c, positive, |r| r.0)
    }
}

impl SubgroupMetric for FalseNegativeRate {
    fn name(&self) -> &str {
        "false_negative_rate"
    }

    fn compute(&self, c: &SubgroupCounts<'_>, positive: Option<usize>) -> Option<f64> {
        rate(c, positive, |r| r.1)
    }
}

/// Extra metrics computed for every subgroup in addition to accuracy and the
/// error rates.
#[derive(Clone, Default)]
pub struct MetricRegistry {
    extra: Vec<Arc<dyn SubgroupMetric>>,
}

impl MetricRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, metric: Arc<dyn SubgroupMetric>) -> &mut Self {
        self.extra.retain(|m| m.name() != metric.name());
        self.extra.push(metric);
        self
    }

    pub fn names(&self) -> Vec<&str> {
        self.extra.iter().map(|m| m.name()).collect()
    }
}

impl std::fmt::Debug for MetricRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    /// Feature name to value, null when the row's value is missing.
    pub values: BTreeMap<String, Option<String>>,
    pub size: u64,
    pub accuracy: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub false_negative_rate: Option<f64>,
    pub low_support: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub features: Vec<String>,
    pub positive_class: Option<String>,
    pub min_size: usize,
    pub rows: Vec<SubgroupRow>,
}

fn distinct_with_null(col: &CategoricalColumn) -> u128 {
    let mut used = vec![false; col.dictionary().len()];
    let mut null = false;
    for &c in col.codes() {
        if c == NULL_CODE {
            null = true;
        } else {
            used[c as usize] = true;
        }
    }
    used.iter().filter(|u| **u).count() as u128 + null as u128
}

fn cmp_values(a: &[Option<&str>], b: &[Option<&str>]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = match (x, y) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Per-subgroup model metrics over the cross product of the feature columns.
/// Only combinations that occur among the selected rows produce a row; null
/// is treated as its own value. Rows come out sorted by their value tuple
/// with nulls last.
pub fn subgroup_metrics<S: AsRef<str>>(
    table: &MetadataTable,
    params: &SubgroupParams,
    registry: &MetricRegistry,
    id_subset: Option<&[S]>,
) -> Result<SubgroupReport, ModelError> {
    let labels = categorical(table, &params.label_col)?;
    let preds = categorical(table, &params.pred_col)?;
    let features: Vec<&CategoricalColumn> = params
        .features
        .iter()
        .map(|f| categorical(table, f))
        .collect::<Result<_, _>>()?;
    let product = features
        .iter()
        .fold(1u128, |acc, f| acc.saturating_mul(distinct_with_null(f)));
    if product > MAX_SUBGROUPS {
        return Err(ModelError::CardinalityExplosion(product));
    }
    let rows = subset_rows(table, id_subset)?;

    let classes = observed_classes(labels, preds);
    let positive = match &params.positive_class {
        Some(p) => Some(
            classes
                .binary_search(p)
                .map_err(|_| ModelError::UnknownClass(p.clone()))?,
        ),
        None => None,
    };
    let lmap = code_to_class(labels, &classes);
    let pmap = code_to_class(preds, &classes);
    let nc = classes.len();

    struct Tally {
        size: u64,
        correct: u64,
        confusion: Vec<Vec<u64>>,
        missing_pred: Vec<u64>,
    }
    let mut groups: HashMap<Vec<u32>, Tally> = HashMap::new();
    for r in rows {
        let key: Vec<u32> = features.iter().map(|f| f.codes()[r]).collect();
        let t = groups.entry(key).or_insert_with(|| Tally {
            size: 0,
            correct: 0,
            confusion: vec![vec![0; nc]; nc],
            missing_pred: vec![0; nc],
        });
        t.size += 1;
        let (l, p) = (labels.codes()[r], preds.codes()[r]);
        match (l != NULL_CODE, p != NULL_CODE) {
            (true, true) => {
                let (li, pi) = (lmap[l as usize], pmap[p as usize]);
                t.confusion[li][pi] += 1;
                if li == pi {
                    t.correct += 1;
                }
            }
            (true, false) => t.missing_pred[lmap[l as usize]] += 1,
            _ => {}
        }
    }

    let builtins: [&dyn SubgroupMetric; 3] = [&Accuracy, &FalsePositiveRate, &FalseNegativeRate];
    let mut out: Vec<(Vec<Option<&str>>, SubgroupRow)> = groups
        .into_iter()
        .map(|(key, t)| {
            let vals: Vec<Option<&str>> = key
                .iter()
                .zip(&features)
                .map(|(&c, f)| (c != NULL_CODE).then(|| f.dictionary()[c as usize].as_str()))
                .collect();
            let counts = SubgroupCounts {
                classes: &classes,
                size: t.size,
                correct: t.correct,
                confusion: t.confusion,
                missing_pred: t.missing_pred,
            };
            let [acc, fpr, fnr] = builtins.map(|m| m.compute(&counts, positive));
            let extra = registry
                .extra
                .iter()
                .map(|m| (m.name().to_string(), m.compute(&counts, positive)))
                .collect();
            let row = SubgroupRow {
                values: params
                    .features
                    .iter()
                    .zip(&vals)
                    .map(|(f, v)| (f.clone(), v.map(str::to_string)))
                    .collect(),
                size: t.size,
                accuracy: acc,
                false_positive_rate: fpr,
                false_negative_rate: fnr,
                low_support: (t.size as usize) < params.min_size,
                extra,
            };
            (vals, row)
        })
        .collect();
    out.sort_by(|a, b| cmp_values(&a.0, &b.0));

    Ok(SubgroupReport {
        features: params.features.clone(),
        positive_class: params.positive_class.clone(),
        min_size: params.min_size,
        rows: out.into_iter().map(|(_, r)| r).collect(),
    })
}
