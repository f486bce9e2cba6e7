use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{confusion_matrix, ModelError};
use crate::table::MetadataTable;

/// Label used for the extra "outside this subtree" row and column.
pub const OUTSIDE: &str = "<outside>";

/// Name given to the synthetic root when the input has several top-level nodes.
const IMPLICIT_ROOT: &str = "root";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<HierarchyNode>,
}

impl HierarchyNode {
    pub fn leaf(name: impl Into<String>) -> Self {
        HierarchyNode {
            name: name.into(),
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn visit<'a>(&'a self, depth: usize, f: &mut impl FnMut(&'a HierarchyNode, usize)) {
        f(self, depth);
        for c in &self.children {
            c.visit(depth + 1, f);
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(&self.name);
        }
        for c in &self.children {
            c.leaves(out);
        }
    }
}

/// A tree over class names. Leaves are classes, internal nodes are groupings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "HierarchyNode", into = "HierarchyNode")]
pub struct LabelHierarchy {
    root: HierarchyNode,
}

impl TryFrom<HierarchyNode> for LabelHierarchy {
    type Error = ModelError;

    fn try_from(root: HierarchyNode) -> Result<Self, ModelError> {
        LabelHierarchy::new(root)
    }
}

impl From<LabelHierarchy> for HierarchyNode {
    fn from(h: LabelHierarchy) -> Self {
        h.root
    }
}

impl LabelHierarchy {
    pub fn new(root: HierarchyNode) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        let mut dup = None;
        let mut empty = false;
        root.visit(0, &mut |n, _| {
            if n.name.is_empty() {
                empty = true;
            }
            if !seen.insert(n.name.as_str()) && dup.is_none() {
                dup = Some(n.name.clone());
            }
        });
        if empty {
            return Err(ModelError::InvalidHierarchy("empty node name".into()));
        }
        if let Some(d) = dup {
            return Err(ModelError::InvalidHierarchy(format!("duplicate node '{d}'")));
        }
        if root.is_leaf() {
            return Err(ModelError::InvalidHierarchy("root has no children".into()));
        }
        Ok(LabelHierarchy { root })
    }

    /// Accepts nested JSON (`{"name", "children"}` or an array of such) or
    /// an indented outline, one node per line. Lines starting with `#` are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') || trimmed.starts_with('[') {
            Self::from_json(trimmed)
        } else {
            Self::from_outline(text)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            One(HierarchyNode),
            Many(Vec<HierarchyNode>),
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| ModelError::InvalidHierarchy(e.to_string()))?;
        match doc {
            Doc::One(root) => Self::new(root),
            Doc::Many(nodes) => Self::new(implicit_root(nodes)),
        }
    }

    pub fn from_outline(text: &str) -> Result<Self, ModelError> {
        // arena of (name, children)
        let mut names: Vec<String> = Vec::new();
        let mut children: Vec<Vec<usize>> = Vec::new();
        let mut tops = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new(); // (indent, node)
        for (lineno, line) in text.lines().enumerate() {
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let indent: usize = line
                .chars()
                .take_while(|c| c.is_whitespace())
                .map(|c| if c == '\t' { 4 } else { 1 })
                .sum();
            while stack.last().is_some_and(|&(i, _)| i >= indent) {
                stack.pop();
            }
            let id = names.len();
            names.push(body.to_string());
            children.push(Vec::new());
            match stack.last() {
                Some(&(_, parent)) => children[parent].push(id),
                None => {
                    if !tops.is_empty() && indent > 0 {
                        return Err(ModelError::InvalidHierarchy(format!(
                            "line {}: inconsistent indentation",
                            lineno + 1
                        )));
                    }
                    tops.push(id)
                }
            }
            stack.push((indent, id));
        }
        fn build(id: usize, names: &[String], children: &[Vec<usize>]) -> HierarchyNode {
            HierarchyNode {
                name: names[id].clone(),
                children: children[id].iter().map(|&c| build(c, names, children)).collect(),
            }
        }
        let mut nodes: Vec<HierarchyNode> = tops.iter().map(|&t| build(t, &names, &children)).collect();
        match nodes.len() {
            0 => Err(ModelError::InvalidHierarchy("empty hierarchy".into())),
            1 => Self::new(nodes.pop().unwrap()),
            _ => Self::new(implicit_root(nodes)),
        }
    }

    pub fn root(&self) -> &HierarchyNode {
        &self.root
    }

    /// Leaf names in depth-first order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.leaves(&mut out);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.root).expect("hierarchy serializes")
    }
}

fn implicit_root(children: Vec<HierarchyNode>) -> HierarchyNode {
    HierarchyNode {
        name: IMPLICIT_ROOT.to_string(),
        children,
    }
}

/// Confusion among the children of one internal node. `labels` holds the
/// child names followed by [`OUTSIDE`]; `counts` is square over `labels`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeConfusion {
    pub node: String,
    pub depth: usize,
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl NodeConfusion {
    pub fn outside_index(&self) -> usize {
        self.labels.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalConfusion {
    pub hierarchy: LabelHierarchy,
    /// Internal nodes in pre-order.
    pub nodes: Vec<NodeConfusion>,
}

impl HierarchicalConfusion {
    pub fn node(&self, name: &str) -> Option<&NodeConfusion> {
        self.nodes.iter().find(|n| n.node == name)
    }
}

/// For each internal node, counts rows by which child subtree holds the true
/// label and which holds the prediction. Rows whose label and prediction both
/// fall outside the node are not counted there.
pub fn hierarchical_confusion<S: AsRef<str>>(
    table: &MetadataTable,
    label_col: &str,
    pred_col: &str,
    hierarchy: &LabelHierarchy,
    id_subset: Option<&[S]>,
) -> Result<HierarchicalConfusion, ModelError> {
    let flat = confusion_matrix(table, label_col, pred_col, id_subset)?;

    let mut internal: Vec<(&HierarchyNode, usize)> = Vec::new();
    hierarchy.root.visit(0, &mut |n, depth| {
        if !n.is_leaf() {
            internal.push((n, depth));
        }
    });
    let internal_index: HashMap<&str, usize> = internal
        .iter()
        .enumerate()
        .map(|(i, (n, _))| (n.name.as_str(), i))
        .collect();

    // leaf name -> slot within each ancestor (None when not an ancestor)
    let mut paths: HashMap<&str, Vec<Option<usize>>> = HashMap::new();
    fn walk<'a>(
        node: &'a HierarchyNode,
        trail: &mut Vec<(usize, usize)>,
        index: &HashMap<&str, usize>,
        n_internal: usize,
        out: &mut HashMap<&'a str, Vec<Option<usize>>>,
    ) {
        if node.is_leaf() {
            let mut slots = vec![None; n_internal];
            for &(a, s) in trail.iter() {
                slots[a] = Some(s);
            }
            out.insert(&node.name, slots);
            return;
        }
        let me = index[node.name.as_str()];
        for (slot, c) in node.children.iter().enumerate() {
            trail.push((me, slot));
            walk(c, trail, index, n_internal, out);
            trail.pop();
        }
    }
    walk(&hierarchy.root, &mut Vec::new(), &internal_index, internal.len(), &mut paths);

    for class in &flat.classes {
        if !paths.contains_key(class.as_str()) {
            return Err(ModelError::UnknownClass(class.clone()));
        }
    }

    let mut nodes: Vec<NodeConfusion> = internal
        .iter()
        .map(|(n, depth)| {
            let mut labels: Vec<String> = n.children.iter().map(|c| c.name.clone()).collect();
            labels.push(OUTSIDE.to_string());
            let size = labels.len();
            NodeConfusion {
                node: n.name.clone(),
                depth: *depth,
                labels,
                counts: vec![vec![0; size]; size],
                total: 0,
            }
        })
        .collect();

    for (i, ti) in flat.classes.iter().enumerate() {
        let tp = &paths[ti.as_str()];
        for (j, pj) in flat.classes.iter().enumerate() {
            let c = flat.counts[i][j];
            if c == 0 {
                continue;
            }
            let pp = &paths[pj.as_str()];
            for (a, node) in nodes.iter_mut().enumerate() {
                if tp[a].is_none() && pp[a].is_none() {
                    continue;
                }
                let out = node.labels.len() - 1;
                node.counts[tp[a].unwrap_or(out)][pp[a].unwrap_or(out)] += c;
                node.total += c;
            }
        }
    }

    Ok(HierarchicalConfusion {
        hierarchy: hierarchy.clone(),
        nodes,
    })
}
