//! Seeded stratified train/test split.

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_TEST_FRACTION: f64 = 0.35;

/// Nearest integer to `x`, with exact halves rounded down.
pub fn round_half_down(x: f64) -> usize {
    let floor = x.floor();
    if x - floor > 0.5 + 1e-9 {
        floor as usize + 1
    } else {
        floor as usize
    }
}

/// Number of test rows drawn from a class with `n` rows.
pub fn test_count(n: usize, test_fraction: f64) -> usize {
    round_half_down(test_fraction * n as f64)
}

/// Split row indices by class. Classes are visited in ascending id order;
/// within each class the rows are shuffled with one shared generator and the
/// first `test_count` go to the test side. Both index lists come back sorted.
pub fn stratified_indices(
    labels: &[usize],
    class_names: &[String],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class = vec![Vec::new(); class_names.len()];
    for (i, &l) in labels.iter().enumerate() {
        let bucket = by_class
            .get_mut(l)
            .ok_or_else(|| Error::Data(format!("label {l} out of range")))?;
        bucket.push(i);
    }
    let mut rng = SeededRng::new(seed);
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for (c, mut rows) in by_class.into_iter().enumerate() {
        match rows.len() {
            0 => continue,
            1 => {
                return Err(Error::Split(format!(
                    "class {:?} has a single instance; stratified split needs at least 2",
                    class_names[c]
                )))
            }
            _ => {}
        }
        let k = test_count(rows.len(), test_fraction);
        rng.shuffle(&mut rows);
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    if test.is_empty() {
        return Err(Error::Config(format!(
            "test fraction {test_fraction} leaves the test set empty"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_indices(ds.labels(), ds.class_names(), test_fraction, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}
