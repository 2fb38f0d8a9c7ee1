use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Indices of a class-balanced resample: every original index once, followed
/// by minority indices drawn uniformly with replacement until both classes
/// have the majority count.
pub fn oversample_indices(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let (buy, wait): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == 1);
    if buy.is_empty() || wait.is_empty() {
        return Err(Error::SingleClassDataset);
    }
    let (minority, deficit) = if buy.len() < wait.len() {
        (&buy, wait.len() - buy.len())
    } else {
        (&wait, buy.len() - wait.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<usize> = (0..labels.len()).collect();
    out.extend((0..deficit).map(|_| minority[rng.random_range(0..minority.len())]));
    Ok(out)
}

/// Random oversampling of the minority class up to the majority count.
pub fn oversample(train: &Dataset, seed: u64) -> Result<Dataset> {
    let labels: Vec<u8> = train.rows.iter().map(|r| r.label_class).collect();
    let idx = oversample_indices(&labels, seed)?;
    Ok(Dataset::new(
        idx.into_iter().map(|i| train.rows[i].clone()).collect(),
        train.role,
    ))
}
