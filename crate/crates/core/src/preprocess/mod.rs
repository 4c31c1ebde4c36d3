//! Feature pipeline: record-level feature derivation, categorical encoding,
//! min-max scaling, SMOTE, class weights, grouped stratified folds and
//! per-card sequence windows.

mod encode;
mod folds;
mod frame;
mod scaler;
mod smote;
mod weights;
mod windows;

pub use encode::{encode_categorical, fit_categorical, CategoricalEncoding, FieldEncoding, DEFAULT_CARDINALITY_THRESHOLD};
pub use folds::{fold_split, stratified_group_kfold, stratified_kfold};
pub use frame::{derive_table, FeatureFrame, IndexColumn, RawTable, RowMeta, CATEGORICAL_COLUMNS, NUMERIC_COLUMNS};
pub use scaler::{minmax_apply, minmax_fit, ScalerStats};
pub use smote::{nearest_neighbors, smote_deficit, smote_oversample, SmoteOrigin, SmoteSamples, DEFAULT_SMOTE_K};
pub use weights::class_weights;
pub use windows::{build_sequences, SequenceWindow, DEFAULT_LOOKBACK_DAYS, DEFAULT_WINDOW};
