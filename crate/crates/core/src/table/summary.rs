use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ColumnData, MetadataTable, TableError, NULL_CODE};

/// Bucket of a distribution summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BinKey {
    Category { value: String },
    /// `[lo, hi)`, or `[lo, hi]` when `closed` (the last interval).
    Interval { lo: f64, hi: f64, closed: bool },
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub key: BinKey,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub column: String,
    pub bins: Vec<Bin>,
    pub total: usize,
    pub null_count: usize,
}

/// Counts values of one column.
///
/// String-valued columns get one bin per distinct value, largest first (ties
/// by value); values beyond the first `max_bins` are folded into a trailing
/// `Other` bin. Numeric columns get `max_bins` equal-width intervals over
/// `[min, max]`, or a single closed interval when the column is constant.
pub fn column_summary(
    table: &MetadataTable,
    column: &str,
    max_bins: usize,
) -> Result<DistributionSummary, TableError> {
    let max_bins = max_bins.max(1);
    let (spec, data) = table.column(column)?;
    let total = table.row_count();
    let (bins, null_count) = match data {
        ColumnData::Numeric(values) => numeric_bins(values, max_bins),
        ColumnData::Categorical(cat) => {
            let mut counts = vec![0usize; cat.values.len()];
            let mut nulls = 0;
            for &c in &cat.codes {
                if c == NULL_CODE {
                    nulls += 1;
                } else {
                    counts[c as usize] += 1;
                }
            }
            let pairs = cat
                .values
                .iter()
                .zip(counts)
                .filter(|(_, n)| *n > 0)
                .map(|(v, n)| (v.as_str(), n))
                .collect();
            (category_bins(pairs, max_bins), nulls)
        }
        ColumnData::Id(ids) => {
            let pairs = ids.iter().map(|v| (v.as_str(), 1)).collect();
            (category_bins(pairs, max_bins), 0)
        }
        ColumnData::Text(values) => {
            let mut counts: HashMap<&str, usize> = HashMap::new();
            let mut nulls = 0;
            for v in values {
                match v {
                    Some(s) => *counts.entry(s.as_str()).or_default() += 1,
                    None => nulls += 1,
                }
            }
            (category_bins(counts.into_iter().collect(), max_bins), nulls)
        }
    };
    Ok(DistributionSummary {
        column: spec.name.clone(),
        bins,
        total,
        null_count,
    })
}

fn category_bins(mut pairs: Vec<(&str, usize)>, max_bins: usize) -> Vec<Bin> {
    pairs.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let overflow: usize = pairs.iter().skip(max_bins).map(|p| p.1).sum();
    let mut bins: Vec<Bin> = pairs
        .into_iter()
        .take(max_bins)
        .map(|(v, count)| Bin {
            key: BinKey::Category {
                value: v.to_string(),
            },
            count,
        })
        .collect();
    if overflow > 0 {
        bins.push(Bin {
            key: BinKey::Other,
            count: overflow,
        });
    }
    bins
}

/// Interval edges for `bins` equal-width buckets over `[min, max]`; the last
/// edge is exactly `max`.
pub(crate) fn interval_edges(min: f64, max: f64, bins: usize) -> Vec<f64> {
    let width = (max - min) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| min + width * i as f64).collect();
    edges.push(max);
    edges
}

fn numeric_bins(values: &[Option<f64>], max_bins: usize) -> (Vec<Bin>, usize) {
    let mut nulls = 0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        match v {
            Some(x) => {
                min = min.min(*x);
                max = max.max(*x);
            }
            None => nulls += 1,
        }
    }
    let present = values.len() - nulls;
    if present == 0 {
        return (Vec::new(), nulls);
    }
    if min == max {
        let bin = Bin {
            key: BinKey::Interval {
                lo: min,
                hi: max,
                closed: true,
            },
            count: present,
        };
        return (vec![bin], nulls);
    }
    let edges = interval_edges(min, max, max_bins);
    let interior = &edges[1..max_bins];
    let mut counts = vec![0usize; max_bins];
    for x in values.iter().flatten() {
        counts[interior.partition_point(|e| *e <= *x)] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin {
            key: BinKey::Interval {
                lo: edges[i],
                hi: edges[i + 1],
                closed: i + 1 == max_bins,
            },
            count,
        })
        .collect();
    (bins, nulls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ingest_table, KindHints};
    use proptest::prelude::*;

    fn table(text: &str) -> MetadataTable {
        ingest_table(text.as_bytes(), &KindHints::new()).unwrap()
    }

    fn bin_total(s: &DistributionSummary) -> usize {
        s.bins.iter().map(|b| b.count).sum::<usize>() + s.null_count
    }

    #[test]
    fn categorical_counts_descending() {
        let t = table("id,split\n1,train\n2,train\n3,test\n4,train\n5,test\n6,test\n7,test\n");
        let s = column_summary(&t, "split", 10).unwrap();
        let got: Vec<_> = s.bins.iter().map(|b| (b.key.clone(), b.count)).collect();
        assert_eq!(
            got,
            vec![
                (BinKey::Category { value: "test".into() }, 4),
                (BinKey::Category { value: "train".into() }, 3),
            ]
        );
    }

    #[test]
    fn train_train_test_manual_count() {
        let mut hints = KindHints::new();
        hints.insert("split".into(), crate::table::ColumnKind::Categorical);
        let t = ingest_table("id,split\na,train\nb,train\nc,test\n".as_bytes(), &hints).unwrap();
        let s = column_summary(&t, "split", 5).unwrap();
        let got: Vec<_> = s.bins.iter().map(|b| (b.key.clone(), b.count)).collect();
        assert_eq!(
            got,
            vec![
                (BinKey::Category { value: "train".into() }, 2),
                (BinKey::Category { value: "test".into() }, 1),
            ]
        );
    }

    #[test]
    fn overflow_goes_to_other() {
        let t = table("id,c\n1,a\n2,a\n3,a\n4,b\n5,b\n6,c\n7,a\n8,b\n9,a\n10,a\n");
        let s = column_summary(&t, "c", 1).unwrap();
        assert_eq!(s.bins.len(), 2);
        assert_eq!(s.bins[0].count, 6);
        assert_eq!(s.bins[1], Bin { key: BinKey::Other, count: 4 });
    }

    #[test]
    fn constant_numeric_single_interval() {
        let t = table("id,x\n1,3.5\n2,3.5\n3,\n");
        let s = column_summary(&t, "x", 10).unwrap();
        assert_eq!(s.bins.len(), 1);
        assert_eq!(s.bins[0].count, 2);
        assert_eq!(s.null_count, 1);
        assert_eq!(
            s.bins[0].key,
            BinKey::Interval { lo: 3.5, hi: 3.5, closed: true }
        );
    }

    #[test]
    fn uniform_hundred_rows_ten_bins() {
        let mut csv = String::from("id,score\n");
        for i in 0..100 {
            csv.push_str(&format!("r{i},{}\n", i as f64 / 99.0));
        }
        let t = table(&csv);
        let s = column_summary(&t, "score", 10).unwrap();
        assert_eq!(s.bins.len(), 10);
        // naive scan: bucket = floor(x / 0.1), clamped, using the same edges
        let edges = interval_edges(0.0, 1.0, 10);
        let mut oracle = [0usize; 10];
        for i in 0..100 {
            let x = i as f64 / 99.0;
            let b = (0..10)
                .find(|&b| x >= edges[b] && (x < edges[b + 1] || (b == 9 && x <= edges[10])))
                .unwrap();
            oracle[b] += 1;
        }
        let got: Vec<usize> = s.bins.iter().map(|b| b.count).collect();
        assert_eq!(got, oracle);
        assert_eq!(got.iter().sum::<usize>(), 100);
        assert!(got.iter().all(|&c| c == 10));
    }

    #[test]
    fn unknown_column() {
        let t = table("id\n1\n");
        assert!(matches!(
            column_summary(&t, "nope", 3),
            Err(TableError::UnknownColumn(_))
        ));
    }

    proptest! {
        #[test]
        fn counts_add_up_and_intervals_partition(
            xs in proptest::collection::vec(proptest::option::of(-1e6f64..1e6), 1..200),
            max_bins in 1usize..20,
        ) {
            let mut csv = String::from("id,x\n");
            for (i, x) in xs.iter().enumerate() {
                match x {
                    Some(v) => csv.push_str(&format!("r{i},{v}\n")),
                    None => csv.push_str(&format!("r{i},\n")),
                }
            }
            let mut hints = KindHints::new();
            hints.insert("x".into(), crate::table::ColumnKind::Numeric);
            let t = ingest_table(csv.as_bytes(), &hints).unwrap();
            let s = column_summary(&t, "x", max_bins).unwrap();
            prop_assert_eq!(bin_total(&s), t.row_count());
            let present: Vec<f64> = xs.iter().flatten().copied().collect();
            if let (Some(first), Some(last)) = (s.bins.first(), s.bins.last()) {
                let min = present.iter().copied().fold(f64::INFINITY, f64::min);
                let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                match (&first.key, &last.key) {
                    (BinKey::Interval { lo, .. }, BinKey::Interval { hi, closed, .. }) => {
                        prop_assert_eq!(*lo, min);
                        prop_assert_eq!(*hi, max);
                        prop_assert!(*closed);
                    }
                    _ => prop_assert!(false, "expected intervals"),
                }
                for w in s.bins.windows(2) {
                    match (&w[0].key, &w[1].key) {
                        (BinKey::Interval { hi, closed, .. }, BinKey::Interval { lo, .. }) => {
                            prop_assert_eq!(hi, lo);
                            prop_assert!(!closed);
                        }
                        _ => prop_assert!(false),
                    }
                }
                // every value lies in the interval it was counted in
                for x in &present {
                    let hits = s.bins.iter().filter(|b| match b.key {
                        BinKey::Interval { lo, hi, closed } => *x >= lo && (*x < hi || (closed && *x <= hi)),
                        _ => false,
                    }).count();
                    prop_assert_eq!(hits, 1);
                }
            }
        }

        #[test]
        fn categorical_counts_add_up(
            vals in proptest::collection::vec(proptest::option::of("[a-d]"), 1..100),
            max_bins in 1usize..6,
        ) {
            let mut csv = String::from("id,c\n");
            for (i, v) in vals.iter().enumerate() {
                csv.push_str(&format!("r{i},{}\n", v.clone().unwrap_or_default()));
            }
            let mut hints = KindHints::new();
            hints.insert("c".into(), crate::table::ColumnKind::Categorical);
            let t = ingest_table(csv.as_bytes(), &hints).unwrap();
            let s = column_summary(&t, "c", max_bins).unwrap();
            prop_assert_eq!(bin_total(&s), t.row_count());
        }
    }
}
