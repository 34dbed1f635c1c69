use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Majority label among the `k_nn` nearest training features (Euclidean) of
/// each query. When several labels share the top count, the one whose
/// closest member ranks first wins. Distance ties rank by training order.
pub fn knn_pixel_classify(
    train: &[(Vec<f64>, u16)],
    queries: &[Vec<f64>],
    k_nn: usize,
) -> Result<Vec<u16>> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("k-NN needs training samples".into()));
    }
    if k_nn == 0 {
        return Err(Error::InvalidArgument("k_nn must be positive".into()));
    }
    let dim = train[0].0.len();
    for f in train.iter().map(|(f, _)| f).chain(queries) {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: f.len(),
            });
        }
    }
    let k_nn = k_nn.min(train.len());
    Ok(queries
        .par_iter()
        .map(|q| {
            let mut ranked: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, (f, _))| (f.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            // label -> (count, rank of its nearest member)
            let mut votes: BTreeMap<u16, (usize, usize)> = BTreeMap::new();
            for (rank, &(_, i)) in ranked[..k_nn].iter().enumerate() {
                votes.entry(train[i].1).or_insert((0, rank)).0 += 1;
            }
            votes
                .into_iter()
                .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
                .map(|(label, _)| label)
                .expect("k_nn >= 1")
        })
        .collect())
}
