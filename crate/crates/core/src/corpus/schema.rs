//! Feature schema: the closed list of categorical case facts, their
//! ontologies, and their cluster membership.
//!
//! Feature indices are labels carried over from the annotation layer, not
//! positions; the sequence has gaps and must never be renumbered. Cluster 1
//! holds the parties' petitions, cluster 2 behavioral risk factors,
//! cluster 3 practical living constraints.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema io: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate feature name {0:?}")]
    DuplicateName(String),
    #[error("duplicate feature index {0}")]
    DuplicateIndex(u32),
    #[error("feature {0:?}: cluster must be 1, 2, or 3, got {1}")]
    BadCluster(String, u8),
    #[error("feature {0:?}: categorical features need at least two distinct levels")]
    BadLevels(String),
    #[error("schema has no features")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Boolean,
}

/// One case-fact feature. Boolean features carry the implicit levels
/// `false`, `true`; categorical features list their closed ontology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureDef {
    pub index: u32,
    pub name: String,
    pub cluster: u8,
    pub kind: FeatureKind,
    levels: Vec<String>,
}

impl FeatureDef {
    pub fn categorical(index: u32, name: &str, cluster: u8, levels: &[&str]) -> Self {
        FeatureDef {
            index,
            name: name.to_string(),
            cluster,
            kind: FeatureKind::Categorical,
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn boolean(index: u32, name: &str, cluster: u8) -> Self {
        FeatureDef {
            index,
            name: name.to_string(),
            cluster,
            kind: FeatureKind::Boolean,
            levels: vec!["false".into(), "true".into()],
        }
    }

    /// Ontology levels, excluding the missing slot.
    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn level_of(&self, value: &str) -> Option<u8> {
        self.levels.iter().position(|l| l == value).map(|p| p as u8)
    }
}

/// Ordered, validated feature list. Column order everywhere derives from
/// this order: features as listed, levels in ontology order, missing last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
    by_name: BTreeMap<String, usize>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self, SchemaError> {
        if features.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut by_name = BTreeMap::new();
        let mut seen_idx = std::collections::BTreeSet::new();
        for (pos, f) in features.iter().enumerate() {
            if by_name.insert(f.name.clone(), pos).is_some() {
                return Err(SchemaError::DuplicateName(f.name.clone()));
            }
            if !seen_idx.insert(f.index) {
                return Err(SchemaError::DuplicateIndex(f.index));
            }
            if !(1..=3).contains(&f.cluster) {
                return Err(SchemaError::BadCluster(f.name.clone(), f.cluster));
            }
            let mut uniq = f.levels.clone();
            uniq.sort();
            uniq.dedup();
            if f.levels.len() < 2 || uniq.len() != f.levels.len() {
                return Err(SchemaError::BadLevels(f.name.clone()));
            }
        }
        Ok(FeatureSchema { features, by_name })
    }

    /// The built-in custody schema: 4 categorical petition features and 27
    /// boolean behavioral/practical features, 31 in total.
    pub fn custody() -> Self {
        let req = &["none", "sole", "shared"];
        let features = vec![
            FeatureDef::categorical(12, "child_expressed_conflict", 1, &["mother", "father", "both", "none"]),
            FeatureDef::categorical(13, "child_expressed_living_arrangement_preference", 1, &["mother", "father", "shared", "none"]),
            FeatureDef::categorical(14, "father_request_regarding_living_arrangements", 1, req),
            FeatureDef::categorical(16, "mother_request_regarding_living_arrangements", 1, req),
            FeatureDef::boolean(18, "father_parental_fitness", 2),
            FeatureDef::boolean(19, "mother_parental_fitness", 2),
            FeatureDef::boolean(20, "father_has_history_of_abuse_against_child", 2),
            FeatureDef::boolean(21, "mother_has_history_of_abuse_against_child", 2),
            FeatureDef::boolean(22, "father_has_history_of_abuse_against_mother", 2),
            FeatureDef::boolean(23, "mother_has_history_of_abuse_against_father", 2),
            FeatureDef::boolean(24, "father_has_history_of_neglect", 2),
            FeatureDef::boolean(25, "mother_has_history_of_neglect", 2),
            FeatureDef::boolean(26, "father_has_psych_issues", 2),
            FeatureDef::boolean(27, "mother_has_psych_issues", 2),
            FeatureDef::boolean(28, "father_has_addiction_issues", 2),
            FeatureDef::boolean(29, "mother_has_addiction_issues", 2),
            FeatureDef::boolean(30, "father_is_invested_with_child", 2),
            FeatureDef::boolean(31, "mother_is_invested_with_child", 2),
            FeatureDef::boolean(32, "father_employment_status", 3),
            FeatureDef::boolean(34, "mother_employment_status", 3),
            FeatureDef::boolean(36, "father_work_availability", 3),
            FeatureDef::boolean(37, "mother_work_availability", 3),
            FeatureDef::boolean(38, "father_housing_status", 3),
            FeatureDef::boolean(39, "mother_housing_status", 3),
            FeatureDef::boolean(40, "parent_proximity", 3),
            FeatureDef::boolean(41, "father_lives_near_school", 3),
            FeatureDef::boolean(42, "mother_lives_near_school", 3),
            FeatureDef::boolean(43, "father_receives_social_aid", 3),
            FeatureDef::boolean(44, "mother_receives_social_aid", 3),
            FeatureDef::boolean(56, "mother_benefited_legal_aid", 3),
            FeatureDef::boolean(57, "father_benefited_legal_aid", 3),
        ];
        FeatureSchema::new(features).expect("built-in schema is valid")
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn feature(&self, pos: usize) -> &FeatureDef {
        &self.features[pos]
    }

    /// Positions of all features in the given cluster, in schema order.
    pub fn cluster_positions(&self, cluster: u8) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.cluster == cluster)
            .map(|(p, _)| p)
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let repr: SchemaRepr = serde_json::from_str(text)?;
        repr.try_into()
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let repr = SchemaRepr {
            features: self
                .features
                .iter()
                .map(|f| FeatureRepr {
                    index: f.index,
                    name: f.name.clone(),
                    cluster: f.cluster,
                    kind: f.kind,
                    values: match f.kind {
                        FeatureKind::Categorical => Some(f.levels.clone()),
                        FeatureKind::Boolean => None,
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&repr).expect("schema serializes")
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} features", self.features.len())
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    features: Vec<FeatureRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureRepr {
    index: u32,
    name: String,
    cluster: u8,
    kind: FeatureKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
}

impl TryFrom<SchemaRepr> for FeatureSchema {
    type Error = SchemaError;

    fn try_from(repr: SchemaRepr) -> Result<Self, SchemaError> {
        let features = repr
            .features
            .into_iter()
            .map(|f| {
                let levels = match f.kind {
                    FeatureKind::Boolean => vec!["false".to_string(), "true".to_string()],
                    FeatureKind::Categorical => f.values.unwrap_or_default(),
                };
                FeatureDef { index: f.index, name: f.name, cluster: f.cluster, kind: f.kind, levels }
            })
            .collect();
        FeatureSchema::new(features)
    }
}
