use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::frame::{FeatureFrame, IndexColumn, RawTable};
use crate::error::{Error, Result};

pub const DEFAULT_CARDINALITY_THRESHOLD: usize = 16;

/// How one categorical column is encoded.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FieldEncoding {
    /// One column per category, lexicographic order.
    OneHot { name: String, categories: Vec<String> },
    /// Single integer column; category `categories[i]` maps to `i + 1`,
    /// anything unseen to 0.
    Index { name: String, categories: Vec<String> },
}

impl FieldEncoding {
    pub fn name(&self) -> &str {
        match self {
            FieldEncoding::OneHot { name, .. } | FieldEncoding::Index { name, .. } => name,
        }
    }
}

/// Fitted encodings for every categorical column of a [`RawTable`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CategoricalEncoding {
    pub fields: Vec<FieldEncoding>,
}

/// Learn categories from `fit_rows`. Columns with at most `threshold`
/// distinct values become one-hot, the rest integer indices.
pub fn fit_categorical(table: &RawTable, fit_rows: &[usize], threshold: usize) -> Result<CategoricalEncoding> {
    if fit_rows.is_empty() {
        return Err(Error::Empty("fit rows"));
    }
    let mut fields = Vec::with_capacity(table.categorical_names.len());
    for (name, values) in table.categorical_names.iter().zip(&table.categorical) {
        let mut categories: Vec<String> = fit_rows.iter().map(|&r| values[r].clone()).collect();
        categories.sort();
        categories.dedup();
        let name = name.clone();
        fields.push(if categories.len() <= threshold {
            FieldEncoding::OneHot { name, categories }
        } else {
            FieldEncoding::Index { name, categories }
        });
    }
    Ok(CategoricalEncoding { fields })
}

impl CategoricalEncoding {
    /// Names of the dense columns this encoding contributes.
    pub fn dense_columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.fields {
            if let FieldEncoding::OneHot { name, categories } = f {
                out.extend(categories.iter().map(|c| format!("{name}={c}")));
            }
        }
        out
    }
}

/// Apply an encoding: numeric columns first, then one-hot blocks. Unseen
/// categories give an all-zero one-hot row or index 0.
pub fn encode_categorical(table: &RawTable, encoding: &CategoricalEncoding) -> Result<FeatureFrame> {
    if encoding.fields.len() != table.categorical.len() {
        return Err(Error::WidthMismatch { expected: table.categorical.len(), got: encoding.fields.len() });
    }
    for (f, name) in encoding.fields.iter().zip(&table.categorical_names) {
        if f.name() != name {
            return Err(Error::invalid(format!("encoding for `{}` applied to `{name}`", f.name())));
        }
    }
    let rows = table.rows();
    let nw = table.numeric_width();
    let mut columns = table.numeric_names.clone();
    columns.extend(encoding.dense_columns());
    let width = columns.len();

    let mut data = alloc::vec![0.0; rows * width];
    for r in 0..rows {
        data[r * width..r * width + nw].copy_from_slice(&table.numeric[r * nw..(r + 1) * nw]);
    }
    let mut index_columns = Vec::new();
    let mut offset = nw;
    for (f, values) in encoding.fields.iter().zip(&table.categorical) {
        match f {
            FieldEncoding::OneHot { categories, .. } => {
                let lookup: BTreeMap<&str, usize> =
                    categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
                for (r, v) in values.iter().enumerate() {
                    if let Some(&j) = lookup.get(v.as_str()) {
                        data[r * width + offset + j] = 1.0;
                    }
                }
                offset += categories.len();
            }
            FieldEncoding::Index { name, categories } => {
                let lookup: BTreeMap<&str, u32> =
                    categories.iter().enumerate().map(|(i, c)| (c.as_str(), i as u32 + 1)).collect();
                index_columns.push(IndexColumn {
                    name: format!("{name}_index"),
                    values: values.iter().map(|v| lookup.get(v.as_str()).copied().unwrap_or(0)).collect(),
                });
            }
        }
    }
    let mut frame = FeatureFrame::new(columns, data, table.meta.clone())?;
    frame.index_columns = index_columns;
    Ok(frame)
}
