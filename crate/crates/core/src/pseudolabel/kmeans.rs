//! Lloyd's k-means with k-means++ seeding.
//!
//! Assignment runs in parallel per point; every reduction (centroid sums,
//! inertia) is accumulated sequentially in point order, so results are
//! bit-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SegmentFeature;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansParams {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// `k` rows of `dim` values.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub seed: u64,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub model: ClusterModel,
    /// Zero-based cluster of every input point.
    pub labels: Vec<usize>,
    /// Inertia after seeding and after every iteration, ending with the final model.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lower index.
fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all(centroids: &[Vec<f64>], data: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let pairs: Vec<(usize, f64)> = data.par_iter().map(|p| nearest(centroids, p)).collect();
    let inertia = pairs.iter().map(|&(_, d)| d).sum();
    (pairs.into_iter().map(|(j, _)| j).collect(), inertia)
}

fn inertia_of(centroids: &[Vec<f64>], data: &[Vec<f64>], labels: &[usize]) -> f64 {
    data.iter()
        .zip(labels)
        .map(|(p, &j)| sq_dist(&centroids[j], p))
        .sum()
}

/// Mean of each cluster; empty clusters keep their previous centroid.
fn means(data: &[Vec<f64>], labels: &[usize], previous: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let (k, dim) = (previous.len(), data[0].len());
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &j) in data.iter().zip(labels) {
        counts[j] += 1;
        for (s, x) in sums[j].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (j, s) in sums.iter_mut().enumerate() {
        if counts[j] == 0 {
            s.clone_from(&previous[j]);
        } else {
            s.iter_mut().for_each(|x| *x /= counts[j] as f64);
        }
    }
    (sums, counts)
}

fn plus_plus_init(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids = vec![data[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data[pick].clone();
        for (d, p) in dist.iter_mut().zip(data) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

pub fn kmeans_fit(data: &[Vec<f64>], k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::TooFewSamples { n: data.len(), k });
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    if data.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("features must be finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let (mut labels, inertia) = assign_all(&centroids, data);
    let mut history = vec![inertia];
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        let (mut next, counts) = means(data, &labels, &centroids);

        // Re-seed empty clusters at the points farthest from their centroid.
        let mut taken = vec![false; data.len()];
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = (0..data.len())
                .filter(|&i| !taken[i])
                .map(|i| (i, sq_dist(&data[i], &next[labels[i]])))
                .fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            if let Some((i, d)) = far {
                if d > 0.0 {
                    taken[i] = true;
                    labels[i] = j;
                    next = means(data, &labels, &next).0;
                }
            }
        }

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let (new_labels, inertia) = assign_all(&centroids, data);
        history.push(inertia);
        let stable = new_labels == labels;
        labels = new_labels;
        if stable || shift < params.tol {
            break;
        }
    }

    // Leave the centroids at the means of the final assignment.
    centroids = means(data, &labels, &centroids).0;
    let inertia = inertia_of(&centroids, data, &labels);
    if inertia != *history.last().expect("non-empty") {
        history.push(inertia);
    }
    Ok(KMeansFit {
        model: ClusterModel {
            centroids,
            inertia,
            seed,
        },
        labels,
        inertia_history: history,
        iterations,
    })
}

/// One-based id of the nearest centroid (ties: smaller id).
pub fn kmeans_assign(model: &ClusterModel, f: &SegmentFeature) -> Result<u16> {
    if f.vector.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: f.vector.len(),
        });
    }
    let (j, _) = nearest(&model.centroids, &f.vector);
    u16::try_from(j + 1).map_err(|_| Error::InvalidArgument("too many clusters".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudolabel::SegmentSource;
    use proptest::prelude::*;

    fn feature(v: Vec<f64>) -> SegmentFeature {
        SegmentFeature {
            source: SegmentSource {
                frame_id: "f".into(),
                segment_id: 1,
            },
            vector: v,
        }
    }

    #[test]
    fn n_equals_k_has_zero_inertia() {
        let data = vec![vec![0.0, 1.0], vec![3.0, 2.0], vec![-1.0, 5.0]];
        let fit = kmeans_fit(&data, 3, 7, &KMeansParams::default()).unwrap();
        assert_eq!(fit.model.inertia, 0.0);
    }

    #[test]
    fn k1_centroid_is_mean() {
        let data = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![5.0, 6.0], vec![-1.0, 0.5]];
        let fit = kmeans_fit(&data, 1, 0, &KMeansParams::default()).unwrap();
        let c = &fit.model.centroids[0];
        assert!((c[0] - 2.0).abs() < 1e-9 && (c[1] - 1.625).abs() < 1e-9);
    }

    /// Best 2-partition by enumerating all 2^n label vectors.
    fn exhaustive_two_means(data: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let n = data.len();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << n) - 1 {
            let mut cents = vec![];
            let mut cost = 0.0;
            for side in [0, 1] {
                let members: Vec<&Vec<f64>> = (0..n)
                    .filter(|&i| (mask >> i) & 1 == side)
                    .map(|i| &data[i])
                    .collect();
                let m: Vec<f64> = (0..2)
                    .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                    .collect();
                cost += members.iter().map(|p| sq_dist(p, &m)).sum::<f64>();
                cents.push(m);
            }
            if cost < best.0 {
                best = (cost, cents);
            }
        }
        best
    }

    #[test]
    fn two_blobs_recover_blob_means() {
        let data = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]];
        let (cost, oracle) = exhaustive_two_means(&data);
        assert_eq!(cost, 1.0);
        for seed in 0..20 {
            let fit = kmeans_fit(&data, 2, seed, &KMeansParams::default()).unwrap();
            let mut got = fit.model.centroids.clone();
            got.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let mut want = oracle.clone();
            want.sort_by(|a, b| a[0].total_cmp(&b[0]));
            for (g, w) in got.iter().zip(&want) {
                assert!(sq_dist(g, w).sqrt() < 1e-9);
            }
            assert!((fit.model.inertia - cost).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples_is_error() {
        let data = vec![vec![0.0]];
        assert!(matches!(
            kmeans_fit(&data, 2, 0, &KMeansParams::default()),
            Err(Error::TooFewSamples { n: 1, k: 2 })
        ));
    }

    #[test]
    fn duplicate_points_do_not_hang() {
        let data = vec![vec![1.0, 1.0]; 5];
        let fit = kmeans_fit(&data, 3, 1, &KMeansParams::default()).unwrap();
        assert_eq!(fit.model.inertia, 0.0);
    }

    #[test]
    fn assign_examples() {
        let model = ClusterModel {
            centroids: vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![5.0, 5.0]],
            inertia: 0.0,
            seed: 0,
        };
        assert_eq!(kmeans_assign(&model, &feature(vec![5.0, 5.0])).unwrap(), 3);
        assert_eq!(kmeans_assign(&model, &feature(vec![1.0, 0.0])).unwrap(), 1);
        assert!(kmeans_assign(&model, &feature(vec![1.0])).is_err());
    }

    proptest! {
        #[test]
        fn assign_matches_linear_scan(
            cents in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 1..8),
            q in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let model = ClusterModel { centroids: cents.clone(), inertia: 0.0, seed: 0 };
            let dists: Vec<f64> = cents.iter().map(|c| sq_dist(c, &q)).collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let want = dists.iter().position(|&d| d == min).unwrap() + 1;
            prop_assert_eq!(kmeans_assign(&model, &feature(q)).unwrap() as usize, want);
        }

        #[test]
        fn lloyd_invariants(
            data in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 2), 3..40),
            k in 1usize..4,
            seed in any::<u64>(),
        ) {
            let fit = kmeans_fit(&data, k, seed, &KMeansParams::default()).unwrap();
            for w in fit.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0], "inertia rose: {:?}", fit.inertia_history);
            }
            for (j, c) in fit.model.centroids.iter().enumerate() {
                let members: Vec<&Vec<f64>> = data.iter().zip(&fit.labels).filter(|(_, &l)| l == j).map(|(p, _)| p).collect();
                if members.is_empty() { continue; }
                for d in 0..2 {
                    let m = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
                    prop_assert!((c[d] - m).abs() < 1e-9);
                }
            }
            let again = kmeans_fit(&data, k, seed, &KMeansParams::default()).unwrap();
            prop_assert_eq!(again, fit);
        }
    }
}
