//! Random data generators and brute-force reference implementations.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use mlscope::analytics::DuplicateGroups;
use mlscope::model::{HierarchyNode, LabelHierarchy, SubgroupRow};
use mlscope::state::{AnalysisState, CmpOp, DerivedView, Expr, Filter, Group, Literal};
use mlscope::table::{ingest_table, ColumnKind, EmbeddingMatrix, KindHints, MetadataTable, Value};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const SPLITS: [&str; 3] = ["train", "val", "test"];
pub const COLORS: [&str; 5] = ["red", "green", "blue", "black", "white"];
pub const CLASSES: [&str; 6] = ["cat", "dog", "fox", "car", "bus", "van"];
pub const HIERARCHY: &str = "animal\n  pet\n    cat\n    dog\n  fox\nvehicle\n  car\n  large\n    bus\n    van\n";

pub fn hints() -> KindHints {
    let mut h = KindHints::new();
    h.insert("split".into(), ColumnKind::Categorical);
    h.insert("color".into(), ColumnKind::Categorical);
    h.insert("label".into(), ColumnKind::Label);
    h.insert("pred".into(), ColumnKind::Prediction);
    h.insert("note".into(), ColumnKind::Text);
    h
}

/// CSV with id, split, color, score, note, label, pred; a few nulls in every
/// non-id column.
pub fn random_csv<R: Rng>(rng: &mut R, n: usize) -> String {
    let mut s = String::from("id,split,color,score,note,label,pred\n");
    let nullish = |rng: &mut R, v: String| if rng.random_bool(0.05) { String::new() } else { v };
    // Only a subset of classes is used so some tables miss some.
    let k = rng.random_range(2..=CLASSES.len());
    for i in 0..n {
        let split = SPLITS.choose(rng).unwrap().to_string();
        let split = nullish(rng, split);
        let color = COLORS.choose(rng).unwrap().to_string();
        let color = nullish(rng, color);
        let score = format!("{}", (rng.random_range(0..1000) as f64) / 100.0);
        let score = nullish(rng, score);
        let note = format!("n{}", rng.random_range(0..3 * n + 1));
        let note = nullish(rng, note);
        let label = CLASSES[rng.random_range(0..k)];
        let pred = if rng.random_bool(0.7) { label } else { CLASSES[rng.random_range(0..k)] };
        let label = nullish(rng, label.to_string());
        let pred = nullish(rng, pred.to_string());
        s.push_str(&format!("r{i},{split},{color},{score},{note},{label},{pred}\n"));
    }
    s
}

pub fn random_table<R: Rng>(rng: &mut R, n: usize) -> MetadataTable {
    ingest_table(random_csv(rng, n).as_bytes(), &hints()).unwrap()
}

fn str_values(table: &MetadataTable, col: &str) -> Vec<String> {
    let (_, data) = table.column(col).unwrap();
    let mut set = BTreeSet::new();
    for r in 0..table.row_count() {
        if let Some(v) = data.str_at(r) {
            set.insert(v.to_string());
        }
    }
    set.into_iter().collect()
}

fn random_leaf<R: Rng>(rng: &mut R, table: &MetadataTable) -> Expr {
    let pick_str = |rng: &mut R, col: &str| -> String {
        let vals = str_values(table, col);
        if vals.is_empty() || rng.random_bool(0.1) {
            "absent".to_string()
        } else {
            vals.choose(rng).unwrap().clone()
        }
    };
    let ops = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
    match rng.random_range(0..6) {
        0 => Expr::Cmp {
            column: "score".into(),
            op: *ops.choose(rng).unwrap(),
            value: Literal::Num((rng.random_range(0..1000) as f64) / 100.0),
        },
        1 => {
            let col = ["split", "color", "label", "pred", "note", "id"].choose(rng).unwrap();
            Expr::Cmp {
                column: col.to_string(),
                op: if rng.random_bool(0.5) { CmpOp::Eq } else { CmpOp::Ne },
                value: Literal::Str(pick_str(rng, col)),
            }
        }
        2 => {
            let col = ["split", "color", "label", "note"].choose(rng).unwrap();
            let m = rng.random_range(1..4);
            Expr::In {
                column: col.to_string(),
                values: (0..m).map(|_| Literal::Str(pick_str(rng, col))).collect(),
            }
        }
        3 => Expr::In {
            column: "score".into(),
            values: (0..rng.random_range(1..4))
                .map(|_| Literal::Num((rng.random_range(0..1000) as f64) / 100.0))
                .collect(),
        },
        4 => {
            let col = ["note", "color", "id"].choose(rng).unwrap();
            let needle = ["e", "1", "re", "n2", "zz", ""].choose(rng).unwrap();
            Expr::Contains {
                column: col.to_string(),
                needle: needle.to_string(),
            }
        }
        _ => Expr::Cmp {
            column: "label".into(),
            op: CmpOp::Eq,
            value: Literal::Str(pick_str(rng, "pred")),
        },
    }
}

pub fn random_expr<R: Rng>(rng: &mut R, table: &MetadataTable, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.35) {
        return random_leaf(rng, table);
    }
    match rng.random_range(0..3) {
        0 => Expr::And(
            Box::new(random_expr(rng, table, depth - 1)),
            Box::new(random_expr(rng, table, depth - 1)),
        ),
        1 => Expr::Or(
            Box::new(random_expr(rng, table, depth - 1)),
            Box::new(random_expr(rng, table, depth - 1)),
        ),
        _ => Expr::Not(Box::new(random_expr(rng, table, depth - 1))),
    }
}

pub fn random_state<R: Rng>(rng: &mut R, table: &MetadataTable) -> AnalysisState {
    let filter = if rng.random_bool(0.15) {
        Filter::match_all()
    } else {
        let e = random_expr(rng, table, 3);
        Filter::from_expr(e, table.schema()).unwrap()
    };
    let group_by = [None, Some("split"), Some("color"), Some("label"), Some("pred")]
        .choose(rng)
        .unwrap()
        .map(str::to_string);
    let n = table.row_count();
    let mut selected = BTreeSet::new();
    for _ in 0..rng.random_range(0..6) {
        if n > 0 {
            selected.insert(table.id(rng.random_range(0..n)).to_string());
        }
    }
    if rng.random_bool(0.2) {
        selected.insert("not-a-row".to_string());
    }
    let page_size = *[1usize, 7, 20, 50, 1000].choose(rng).unwrap();
    let page = rng.random_range(0..(n / page_size + 3));
    AnalysisState {
        filter,
        group_by,
        selected,
        page,
        page_size,
    }
}

// ---- reference implementations ------------------------------------------

fn cell<'a>(table: &'a MetadataTable, col: &str, row: usize) -> Value<'a> {
    table.column(col).unwrap().1.value(row)
}

fn lit_eq(v: &Value<'_>, lit: &Literal) -> bool {
    match (v, lit) {
        (Value::Num(x), Literal::Num(y)) => x == y,
        (Value::Str(s), Literal::Str(t)) => s == t,
        _ => false,
    }
}

pub fn eval_row(e: &Expr, table: &MetadataTable, row: usize) -> bool {
    match e {
        Expr::And(a, b) => eval_row(a, table, row) && eval_row(b, table, row),
        Expr::Or(a, b) => eval_row(a, table, row) || eval_row(b, table, row),
        Expr::Not(a) => !eval_row(a, table, row),
        Expr::Cmp { column, op, value } => {
            let v = cell(table, column, row);
            if matches!(v, Value::Null) {
                return false;
            }
            match op {
                CmpOp::Eq => lit_eq(&v, value),
                CmpOp::Ne => !lit_eq(&v, value),
                _ => {
                    let (Value::Num(x), Literal::Num(y)) = (v, value) else {
                        panic!("ordering on non-numeric")
                    };
                    match op {
                        CmpOp::Lt => x < *y,
                        CmpOp::Le => x <= *y,
                        CmpOp::Gt => x > *y,
                        _ => x >= *y,
                    }
                }
            }
        }
        Expr::In { column, values } => {
            let v = cell(table, column, row);
            !matches!(v, Value::Null) && values.iter().any(|l| lit_eq(&v, l))
        }
        Expr::Contains { column, needle } => match cell(table, column, row) {
            Value::Str(s) => s.contains(needle.as_str()),
            _ => false,
        },
    }
}

pub fn view_oracle(table: &MetadataTable, state: &AnalysisState) -> DerivedView {
    let rows: Vec<usize> = (0..table.row_count())
        .filter(|&r| state.filter.expr().map_or(true, |e| eval_row(e, table, r)))
        .collect();
    let ids: Vec<String> = rows.iter().map(|&r| table.id(r).to_string()).collect();
    let groups = state.group_by.as_ref().map(|g| {
        let mut by: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut nulls = Vec::new();
        for &r in &rows {
            match cell(table, g, r) {
                Value::Str(s) => by.entry(s.to_string()).or_default().push(table.id(r).to_string()),
                _ => nulls.push(table.id(r).to_string()),
            }
        }
        let mut out: Vec<Group> = by
            .into_iter()
            .map(|(v, ids)| Group { value: Some(v), ids })
            .collect();
        if !nulls.is_empty() {
            out.push(Group { value: None, ids: nulls });
        }
        out
    });
    let selected_visible = ids.iter().filter(|i| state.selected.contains(*i)).cloned().collect();
    let start = (state.page * state.page_size).min(ids.len());
    let end = (start + state.page_size).min(ids.len());
    DerivedView {
        page_ids: ids[start..end].to_vec(),
        total_pages: ids.len().div_ceil(state.page_size),
        page: state.page,
        page_size: state.page_size,
        filtered_ids: ids,
        groups,
        selected_visible,
        filtered_rows: rows,
    }
}

fn str_cell(table: &MetadataTable, col: &str, row: usize) -> Option<String> {
    match cell(table, col, row) {
        Value::Str(s) => Some(s.to_string()),
        _ => None,
    }
}

/// (classes, counts) by direct counting.
pub fn confusion_oracle(table: &MetadataTable, rows: &[usize]) -> (Vec<String>, Vec<Vec<u64>>) {
    let mut classes = BTreeSet::new();
    for r in 0..table.row_count() {
        classes.extend(str_cell(table, "label", r));
        classes.extend(str_cell(table, "pred", r));
    }
    let classes: Vec<String> = classes.into_iter().collect();
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for &r in rows {
        if let (Some(l), Some(p)) = (str_cell(table, "label", r), str_cell(table, "pred", r)) {
            let i = classes.iter().position(|c| *c == l).unwrap();
            let j = classes.iter().position(|c| *c == p).unwrap();
            counts[i][j] += 1;
        }
    }
    (classes, counts)
}

fn subtree_contains(node: &HierarchyNode, leaf: &str) -> bool {
    node.name == leaf || node.children.iter().any(|c| subtree_contains(c, leaf))
}

/// node name -> square matrix over children + outside, by walking the tree
/// for every row.
pub fn hierarchy_oracle(table: &MetadataTable, h: &LabelHierarchy, rows: &[usize]) -> BTreeMap<String, Vec<Vec<u64>>> {
    fn internal<'a>(n: &'a HierarchyNode, out: &mut Vec<&'a HierarchyNode>) {
        if !n.children.is_empty() {
            out.push(n);
            for c in &n.children {
                internal(c, out);
            }
        }
    }
    let mut nodes = Vec::new();
    internal(h.root(), &mut nodes);
    let mut result = BTreeMap::new();
    for node in nodes {
        let m = node.children.len();
        let mut counts = vec![vec![0u64; m + 1]; m + 1];
        let slot = |leaf: &str| {
            node.children
                .iter()
                .position(|c| subtree_contains(c, leaf))
                .unwrap_or(m)
        };
        for &r in rows {
            if let (Some(l), Some(p)) = (str_cell(table, "label", r), str_cell(table, "pred", r)) {
                let (i, j) = (slot(&l), slot(&p));
                if i == m && j == m {
                    continue;
                }
                counts[i][j] += 1;
            }
        }
        result.insert(node.name.clone(), counts);
    }
    result
}

/// Rows of a subgroup report computed from first principles.
pub fn subgroup_oracle(
    table: &MetadataTable,
    features: &[&str],
    positive: Option<&str>,
    min_size: usize,
    rows: &[usize],
) -> Vec<SubgroupRow> {
    let (classes, _) = confusion_oracle(table, &[]);
    let mut groups: BTreeMap<Vec<(u8, String)>, Vec<usize>> = BTreeMap::new();
    for &r in rows {
        // nulls sort after values
        let key = features
            .iter()
            .map(|f| match str_cell(table, f, r) {
                Some(v) => (0u8, v),
                None => (1u8, String::new()),
            })
            .collect();
        groups.entry(key).or_default().push(r);
    }
    let ovr = |members: &[usize], c: &str| -> (Option<f64>, Option<f64>) {
        let (mut pos, mut neg, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for &r in members {
            let Some(l) = str_cell(table, "label", r) else { continue };
            let p = str_cell(table, "pred", r);
            if l == c {
                pos += 1;
                if p.as_deref() != Some(c) {
                    fn_ += 1;
                }
            } else {
                neg += 1;
                if p.as_deref() == Some(c) {
                    fp += 1;
                }
            }
        }
        (
            (neg > 0).then(|| fp as f64 / neg as f64),
            (pos > 0).then(|| fn_ as f64 / pos as f64),
        )
    };
    groups
        .into_iter()
        .map(|(key, members)| {
            let size = members.len() as u64;
            let correct = members
                .iter()
                .filter(|&&r| {
                    let l = str_cell(table, "label", r);
                    l.is_some() && l == str_cell(table, "pred", r)
                })
                .count() as u64;
            let (fpr, fnr) = match positive {
                Some(p) => ovr(&members, p),
                None => {
                    let per: Vec<_> = classes.iter().map(|c| ovr(&members, c)).collect();
                    let avg = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
                    (
                        avg(per.iter().filter_map(|x| x.0).collect()),
                        avg(per.iter().filter_map(|x| x.1).collect()),
                    )
                }
            };
            SubgroupRow {
                values: features
                    .iter()
                    .zip(key)
                    .map(|(f, (null, v))| (f.to_string(), (null == 0).then_some(v)))
                    .collect(),
                size,
                accuracy: Some(correct as f64 / size as f64),
                false_positive_rate: fpr,
                false_negative_rate: fnr,
                low_support: (size as usize) < min_size,
                extra: BTreeMap::new(),
            }
        })
        .collect()
}

pub fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    }
}

/// Duplicate groups from the full O(n^2) distance matrix restricted to each
/// row's k nearest.
pub fn duplicates_oracle(emb: &EmbeddingMatrix, ids: &[String], k: usize, tau: f64) -> Vec<Vec<String>> {
    let n = emb.n();
    let rows: Vec<Vec<f64>> = emb.rows().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                ((1.0 - dot / (norms[i] * norms[j])).clamp(0.0, 2.0), j)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(dist, j) in d.iter().take(k) {
            if dist <= tau {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut comps: HashMap<usize, Vec<String>> = HashMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        comps.entry(root).or_default().push(ids[i].clone());
    }
    let mut groups: Vec<Vec<String>> = comps
        .into_values()
        .filter(|g| g.len() >= 2)
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    groups
}

pub fn group_sets(g: &DuplicateGroups) -> Vec<Vec<String>> {
    g.groups.clone()
}

/// `n` random vectors in `d` dims plus `pairs` planted near-copies.
pub fn embeddings_with_pairs<R: Rng>(rng: &mut R, n: usize, d: usize, pairs: usize, eps: f32) -> EmbeddingMatrix {
    let mut rows: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect();
    for _ in 0..pairs.min(n / 2) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            rows[b] = rows[a].iter().map(|x| x + rng.random_range(-eps..eps)).collect();
        }
    }
    EmbeddingMatrix::from_rows(&rows).unwrap()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Sample covariance (n-1) of row-major data.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in c.iter_mut() {
        for x in row.iter_mut() {
            *x /= (n - 1) as f64;
        }
    }
    c
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

pub fn hierarchy() -> LabelHierarchy {
    LabelHierarchy::parse(HIERARCHY).unwrap()
}
