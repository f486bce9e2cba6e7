use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::artifact::ArtifactKind;
use crate::state::{AnalysisState, StateDoc};
use crate::table::{ColumnKind, Schema};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthHint {
    Half,
    #[default]
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentConfig {
    Markdown {
        source: String,
    },
    List {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        columns: Vec<String>,
    },
    Summary {
        columns: Vec<String>,
    },
    Duplicates {},
    Familiarity {},
    Projection {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        color_by: Option<String>,
    },
    Confusion {
        label: String,
        pred: String,
    },
    HierarchicalConfusion {
        label: String,
        pred: String,
    },
    Subgroups {
        features: Vec<String>,
        label: String,
        pred: String,
    },
}

impl ComponentConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ComponentConfig::Markdown { .. } => "markdown",
            ComponentConfig::List { .. } => "list",
            ComponentConfig::Summary { .. } => "summary",
            ComponentConfig::Duplicates {} => "duplicates",
            ComponentConfig::Familiarity {} => "familiarity",
            ComponentConfig::Projection { .. } => "projection",
            ComponentConfig::Confusion { .. } => "confusion",
            ComponentConfig::HierarchicalConfusion { .. } => "hierarchical_confusion",
            ComponentConfig::Subgroups { .. } => "subgroups",
        }
    }

    /// The precomputed analysis this component displays.
    pub fn artifact(&self) -> Option<ArtifactKind> {
        match self {
            ComponentConfig::Markdown { .. } | ComponentConfig::List { .. } => None,
            ComponentConfig::Summary { .. } => Some(ArtifactKind::Summary),
            ComponentConfig::Duplicates {} => Some(ArtifactKind::Duplicates),
            ComponentConfig::Familiarity {} => Some(ArtifactKind::Familiarity),
            ComponentConfig::Projection { .. } => Some(ArtifactKind::Projection),
            ComponentConfig::Confusion { .. } => Some(ArtifactKind::Confusion),
            ComponentConfig::HierarchicalConfusion { .. } => Some(ArtifactKind::Hierarchy),
            ComponentConfig::Subgroups { .. } => Some(ArtifactKind::Subgroups),
        }
    }

    fn check(&self, schema: &Schema, out: &mut Vec<String>) {
        fn exists(schema: &Schema, col: &str, out: &mut Vec<String>) -> bool {
            let found = schema.get(col).is_some();
            if !found {
                out.push(format!("unknown column '{col}'"));
            }
            found
        }
        let mut categorical = Vec::new();
        match self {
            ComponentConfig::Markdown { .. } => {}
            ComponentConfig::List { columns } | ComponentConfig::Summary { columns } => {
                for c in columns {
                    exists(schema, c, out);
                }
            }
            ComponentConfig::Duplicates {} | ComponentConfig::Familiarity {} => {}
            ComponentConfig::Projection { color_by } => {
                if let Some(c) = color_by {
                    exists(schema, c, out);
                }
            }
            ComponentConfig::Confusion { label, pred } | ComponentConfig::HierarchicalConfusion { label, pred } => {
                categorical.extend([label, pred]);
            }
            ComponentConfig::Subgroups { features, label, pred } => {
                categorical.extend([label, pred]);
                categorical.extend(features);
            }
        }
        for c in categorical {
            if exists(schema, c, out) && !schema.get(c).is_some_and(|s| s.kind.is_categorical()) {
                out.push(format!("column '{c}' is not categorical"));
            }
        }
        if let ComponentConfig::Summary { columns } = self {
            if columns.is_empty() {
                out.push("summary needs at least one column".into());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentInstance {
    #[serde(flatten)]
    pub config: ComponentConfig,
    #[serde(default)]
    pub width_hint: WidthHint,
}

impl ComponentInstance {
    pub fn new(config: ComponentConfig) -> Self {
        Self {
            config,
            width_hint: WidthHint::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub name: String,
    pub components: Vec<ComponentInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageAssignment {
    pub name: String,
    /// Indices into the declared component list, in display order.
    pub components: Vec<usize>,
}

/// Authoring form of a dashboard: components declared once, then placed on
/// pages by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecInput {
    pub title: String,
    pub components: Vec<ComponentInstance>,
    pub pages: Vec<PageAssignment>,
    #[serde(default)]
    pub initial_state: StateDoc,
    #[serde(default)]
    pub instance_base_uri: Option<String>,
    #[serde(default)]
    pub instance_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardSpec {
    pub version: u32,
    pub title: String,
    pub pages: Vec<Page>,
    pub initial_state: StateDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_base_uri: Option<String>,
    /// Column holding each row's sample path; the id is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_column: Option<String>,
    pub schema: Schema,
}

impl DashboardSpec {
    pub fn components(&self) -> impl Iterator<Item = &ComponentInstance> {
        self.pages.iter().flat_map(|p| &p.components)
    }

    /// Artifact kinds the components need, without repeats.
    pub fn required_artifacts(&self) -> BTreeSet<ArtifactKind> {
        self.components().filter_map(|c| c.config.artifact()).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("spec serializes");
        out.push(b'\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    /// Index into the declared component list.
    pub component: Option<usize>,
    pub page: Option<String>,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.component, &self.page) {
            (Some(i), _) => write!(f, "component {i}: {}", self.message),
            (None, Some(p)) => write!(f, "page '{p}': {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "invalid dashboard spec: {}", parts.join("; "))
    }
}

impl std::error::Error for ValidationErrors {}

/// Validates `input` against `schema` and lays the components out on pages.
/// All problems are reported together.
pub fn build_spec(input: &SpecInput, schema: &Schema) -> Result<DashboardSpec, ValidationErrors> {
    let mut errors = Vec::new();
    let general = |message: String| ValidationError {
        component: None,
        page: None,
        message,
    };

    for (i, c) in input.components.iter().enumerate() {
        let mut msgs = Vec::new();
        c.config.check(schema, &mut msgs);
        errors.extend(msgs.into_iter().map(|message| ValidationError {
            component: Some(i),
            page: None,
            message: format!("{}: {message}", c.config.kind_name()),
        }));
    }

    if input.pages.is_empty() {
        errors.push(general("at least one page is required".into()));
    }
    let mut names = BTreeSet::new();
    for p in &input.pages {
        let page_err = |message: String| ValidationError {
            component: None,
            page: Some(p.name.clone()),
            message,
        };
        if p.name.trim().is_empty() {
            errors.push(page_err("page name is empty".into()));
        }
        if !names.insert(p.name.as_str()) {
            errors.push(page_err("duplicate page name".into()));
        }
        for &i in &p.components {
            if i >= input.components.len() {
                errors.push(page_err(format!(
                    "component index {i} out of range ({} declared)",
                    input.components.len()
                )));
            }
        }
    }

    if let Err(e) = AnalysisState::from_doc(&input.initial_state, schema) {
        errors.push(general(format!("initial state: {e}")));
    }
    if let Some(col) = &input.instance_column {
        match schema.get(col) {
            None => errors.push(general(format!("instance column '{col}' does not exist"))),
            Some(s) if s.kind == ColumnKind::Numeric => {
                errors.push(general(format!("instance column '{col}' is numeric")))
            }
            _ => {}
        }
    }

    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }
    Ok(DashboardSpec {
        version: SPEC_VERSION,
        title: input.title.clone(),
        pages: input
            .pages
            .iter()
            .map(|p| Page {
                name: p.name.clone(),
                components: p.components.iter().map(|&i| input.components[i].clone()).collect(),
            })
            .collect(),
        initial_state: input.initial_state.clone(),
        instance_base_uri: input.instance_base_uri.clone(),
        instance_column: input.instance_column.clone(),
        schema: schema.clone(),
    })
}
