//! Flow-record preprocessing: CSV loading, normal-traffic removal,
//! categorical encoding, standardization and stratified splitting.
//!
//! The full pipeline ([`preprocess`]) removes normal traffic and id columns,
//! splits the remaining rows by class, then fits the encoder and scaler on
//! the training side only.

mod dataset;
mod encode;
mod schema;
mod split;
mod synthetic;
mod table;

pub use dataset::{Dataset, DATASET_MAGIC, DATASET_VERSION};
pub use encode::{
    class_ids, class_names, encode_and_scale, CategoricalMap, LabelEncoder, StandardScaler,
};
pub use schema::{ColumnKind, ColumnSpec, Schema};
pub use split::{
    round_half_down, stratified_indices, stratified_split, test_count, DEFAULT_TEST_FRACTION,
};
pub use synthetic::{
    flow_csv_schema, generate_synthetic, write_flow_csv, SyntheticClass, SyntheticSpec,
    NORMAL_LABEL, TON_IOT_CLASSES,
};
pub use table::{filter_and_drop, load_csv, read_csv, RawTable};

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub train: Dataset,
    pub test: Dataset,
    pub encoder: LabelEncoder,
    pub scaler: StandardScaler,
}

pub fn preprocess(table: &RawTable, test_fraction: f64, seed: u64) -> Result<Preprocessed> {
    let attacks = filter_and_drop(table)?;
    let classes = class_names(&attacks)?;
    let labels = class_ids(&attacks, &classes)?;
    let (train_idx, test_idx) = stratified_indices(&labels, &classes, test_fraction, seed)?;
    let (train, test, encoder, scaler) =
        encode_and_scale(&attacks.select_rows(&train_idx), &attacks.select_rows(&test_idx))?;
    Ok(Preprocessed {
        train,
        test,
        encoder,
        scaler,
    })
}
