//! One-hot encoding with an explicit missing level per feature.
//!
//! Column order is canonical: features in schema order, each feature's
//! ontology levels in ontology order, the missing column last. Every row
//! therefore activates exactly one column per feature, so row sums always
//! equal the feature count.

use serde::{Deserialize, Serialize};

use super::schema::FeatureSchema;
use super::{FeatureVector, RulingRecord};
use crate::dataset::BinMatrix;

/// Column span of one feature inside the encoded matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub feature_pos: usize,
    pub feature_index: u32,
    pub cluster: u8,
    pub start: usize,
    /// Ontology levels plus the missing slot.
    pub width: usize,
}

impl ColumnGroup {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

/// Canonical column map for a schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnLayout {
    pub groups: Vec<ColumnGroup>,
    pub column_names: Vec<String>,
    pub n_cols: usize,
}

impl ColumnLayout {
    pub fn new(schema: &FeatureSchema) -> Self {
        let mut groups = Vec::with_capacity(schema.len());
        let mut column_names = Vec::new();
        let mut start = 0;
        for (pos, f) in schema.features().iter().enumerate() {
            let width = f.levels().len() + 1;
            for level in f.levels() {
                column_names.push(format!("{}={}", f.name, level));
            }
            column_names.push(format!("{}=<missing>", f.name));
            groups.push(ColumnGroup {
                feature_pos: pos,
                feature_index: f.index,
                cluster: f.cluster,
                start,
                width,
            });
            start += width;
        }
        ColumnLayout { groups, column_names, n_cols: start }
    }

    /// Active column for one feature value: level slot, or the trailing
    /// missing slot when the value is absent.
    pub fn active_column(&self, feature_pos: usize, value: Option<u8>) -> usize {
        let g = &self.groups[feature_pos];
        match value {
            Some(level) => g.start + level as usize,
            None => g.start + g.width - 1,
        }
    }

    pub fn encode_into(&self, values: &FeatureVector, out: &mut [u8]) {
        debug_assert_eq!(out.len(), self.n_cols);
        for (pos, &v) in values.slots().iter().enumerate() {
            out[self.active_column(pos, v)] = 1;
        }
    }

    /// Columns belonging to features outside the given cluster.
    pub fn columns_excluding_cluster(&self, cluster: u8) -> Vec<usize> {
        self.groups
            .iter()
            .filter(|g| g.cluster != cluster)
            .flat_map(|g| g.columns())
            .collect()
    }
}

/// Encoded corpus slice: the binary design matrix, the outcome labels, and
/// the column map that ties columns back to features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub x: BinMatrix,
    pub labels: Vec<u8>,
    pub layout: ColumnLayout,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.n_cols()
    }

    pub fn column_names(&self) -> &[String] {
        &self.layout.column_names
    }

    /// Ablated copy: drops every column of the given cluster's features.
    /// The result has strictly fewer columns; the dropped data is not
    /// reachable from it.
    pub fn without_cluster(&self, cluster: u8) -> EncodedMatrix {
        let keep = self.layout.columns_excluding_cluster(cluster);
        let x = self.x.select_cols(&keep);
        let mut groups = Vec::new();
        let mut column_names = Vec::new();
        let mut start = 0;
        for g in self.layout.groups.iter().filter(|g| g.cluster != cluster) {
            column_names.extend(g.columns().map(|c| self.layout.column_names[c].clone()));
            groups.push(ColumnGroup { start, ..g.clone() });
            start += g.width;
        }
        EncodedMatrix {
            x,
            labels: self.labels.clone(),
            layout: ColumnLayout { groups, column_names, n_cols: start },
        }
    }
}

/// One-hot encodes the whole corpus in record order.
pub fn one_hot_encode(records: &[RulingRecord], schema: &FeatureSchema) -> EncodedMatrix {
    let layout = ColumnLayout::new(schema);
    let mut x = BinMatrix::zeros(records.len(), layout.n_cols);
    let mut labels = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        layout.encode_into(&r.features, x.row_mut(i));
        labels.push(r.outcome.code());
    }
    EncodedMatrix { x, labels, layout }
}
