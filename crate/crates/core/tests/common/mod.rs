//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::TAU;

use dseg_core::eval::ConfusionMatrix;
use dseg_core::rangeseg::{LidarSpec, RangeImage};
use dseg_core::synth::{generate_frame, SynthConfig, GROUND_CLASS};
use dseg_core::{Grid, LabelGrid, GROUND, IGNORE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-5;

/// Angle at the far return between the ray back to the sensor and the
/// segment joining both returns, from explicit 2-D coordinates.
pub fn triangle_angle(d1: f64, d2: f64, alpha: f64) -> f64 {
    let (far, near) = if d1 >= d2 { (d1, d2) } else { (d2, d1) };
    let p = [far, 0.0];
    let q = [near * alpha.cos(), near * alpha.sin()];
    let to_sensor = [-p[0], -p[1]];
    let to_q = [q[0] - p[0], q[1] - p[1]];
    let cross = to_sensor[0] * to_q[1] - to_sensor[1] * to_q[0];
    let dot = to_sensor[0] * to_q[0] + to_sensor[1] * to_q[1];
    cross.abs().atan2(dot)
}

pub struct RandomScan {
    pub spec: LidarSpec,
    pub image: RangeImage,
    pub ground: Grid<bool>,
}

/// A range image made of a few depth layers with jitter, holes and a random
/// ground mask, so that both links and breaks are common.
pub fn random_scan(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize) -> RandomScan {
    let rows = rng.random_range(2..=max_rows);
    let cols = rng.random_range(2..=max_cols);
    let spec = LidarSpec::uniform(rows, -0.4, 0.1, cols).unwrap();
    let layers: Vec<f64> = (0..rng.random_range(1..=4)).map(|_| rng.random_range(2.0..30.0)).collect();
    let jitter = rng.random_range(0.0..0.3);
    let hole_p = rng.random_range(0.0..0.3);
    let ground_p = rng.random_range(0.0..0.3);
    let mut image = RangeImage::empty(rows, cols);
    let mut ground = Grid::filled(rows, cols, false);
    let mut point = 0;
    for r in 0..rows {
        for c in 0..cols {
            if rng.random_bool(hole_p) {
                continue;
            }
            let base = layers[rng.random_range(0..layers.len())];
            image.set_valid(r, c, base + rng.random_range(-jitter..=jitter), point);
            point += 1;
            ground.set(r, c, rng.random_bool(ground_p));
        }
    }
    RandomScan { spec, image, ground }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components by union-find over every neighbouring cell pair.
pub fn brute_components(scan: &RandomScan, theta: f64, min_size: usize) -> LabelGrid {
    let (rows, cols) = (scan.image.rows(), scan.image.cols());
    let el = scan.spec.elevations();
    let eligible = |r: usize, c: usize| scan.image.is_valid(r, c) && !*scan.ground.get(r, c);
    let mut parent: Vec<usize> = (0..rows * cols).collect();
    let mut link = |a: (usize, usize), b: (usize, usize), alpha: f64| {
        if eligible(a.0, a.1)
            && eligible(b.0, b.1)
            && triangle_angle(scan.image.range(a.0, a.1), scan.image.range(b.0, b.1), alpha) > theta
        {
            let (x, y) = (find(&mut parent, a.0 * cols + a.1), find(&mut parent, b.0 * cols + b.1));
            parent[x] = y;
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            link((r, c), (r, (c + 1) % cols), TAU / cols as f64);
            if r + 1 < rows {
                link((r, c), (r + 1, c), (el[r] - el[r + 1]).abs());
            }
        }
    }
    let mut size = vec![0usize; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            if eligible(r, c) {
                let root = find(&mut parent, r * cols + c);
                size[root] += 1;
            }
        }
    }
    let mut ids = std::collections::HashMap::new();
    Grid::from_fn(rows, cols, |r, c| {
        if !scan.image.is_valid(r, c) {
            IGNORE
        } else if *scan.ground.get(r, c) {
            GROUND
        } else {
            let root = find(&mut parent, r * cols + c);
            if size[root] < min_size {
                IGNORE
            } else {
                let next = ids.len() as u16 + 1;
                *ids.entry(root).or_insert(next)
            }
        }
    })
}

/// True when the two label grids agree up to a bijective renaming of object ids.
pub fn same_partition(a: &LabelGrid, b: &LabelGrid) -> bool {
    use std::collections::HashMap;
    if !a.same_shape(b) {
        return false;
    }
    let special = |l: u16| l == IGNORE || l == GROUND;
    let (mut fwd, mut back) = (HashMap::new(), HashMap::new());
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        if special(x) || special(y) {
            if x != y {
                return false;
            }
            continue;
        }
        if *fwd.entry(x).or_insert(y) != y || *back.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// Every injective assignment in lexicographic order; keeps the first
/// strictly better one, i.e. the lexicographically smallest optimum.
pub fn brute_force_match(conf: &ConfusionMatrix) -> (u64, Vec<usize>) {
    fn go(conf: &ConfusionMatrix, c: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, acc: u64, best: &mut Option<(u64, Vec<usize>)>) {
        if c == conf.gt_classes() {
            if best.as_ref().is_none_or(|b| acc > b.0) {
                *best = Some((acc, cur.clone()));
            }
            return;
        }
        for j in 0..conf.pseudo_classes() {
            if used[j] {
                continue;
            }
            used[j] = true;
            cur.push(j);
            go(conf, c + 1, used, cur, acc + conf.get(c, j), best);
            cur.pop();
            used[j] = false;
        }
    }
    let mut best = None;
    go(conf, 0, &mut vec![false; conf.pseudo_classes()], &mut Vec::new(), 0, &mut best);
    best.expect("at least one assignment")
}

pub fn random_conf(rng: &mut ChaCha8Rng, max_c: usize, max_k: usize) -> ConfusionMatrix {
    let c = rng.random_range(1..=max_c);
    let k = rng.random_range(c..=max_k);
    // small values produce plenty of ties
    let hi = if rng.random_bool(0.5) { 4 } else { 1000 };
    let counts = (0..c * k).map(|_| rng.random_range(0..hi)).collect();
    ConfusionMatrix::from_counts(c, k, counts).unwrap()
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences of `f` around `x`, one coordinate at a time.
pub fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + FD_EPS;
            let up = f(&x);
            x[i] = orig - FD_EPS;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * FD_EPS)
        })
        .collect()
}

/// Mean cross-entropy of raw logits against 1-based labels, via log-sum-exp.
pub fn mean_cross_entropy(logits: &[f64], labels: &[u16], k: usize) -> f64 {
    let total: f64 = logits
        .chunks_exact(k)
        .zip(labels)
        .map(|(z, &l)| {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - z[l as usize - 1]
        })
        .sum();
    total / labels.len() as f64
}

/// Direct restatement of majority voting, one pixel at a time.
pub fn brute_refine(pred: &LabelGrid, seg: &LabelGrid, include_ground: bool, k: u16) -> LabelGrid {
    let n = pred.len();
    let mut out = pred.as_slice().to_vec();
    for i in 0..n {
        let s = seg.as_slice()[i];
        if s == IGNORE || (s == GROUND && !include_ground) {
            continue;
        }
        let mut best = (0u16, 0usize);
        for label in 1..=k {
            let count = (0..n)
                .filter(|&j| seg.as_slice()[j] == s && pred.as_slice()[j] == label)
                .count();
            if count > best.1 {
                best = (label, count);
            }
        }
        out[i] = best.0;
    }
    Grid::from_vec(pred.rows(), pred.cols(), out).unwrap()
}

/// Projected LiDAR returns whose pixel carries the ground-truth class of the
/// surface that was hit, away from class boundaries: `(agreeing, counted)`.
pub fn cross_modal_agreement(root: u64, frames: usize, config: &SynthConfig) -> (usize, usize) {
    let calib = config.rig.calibration().unwrap();
    let (mut agree, mut total) = (0, 0);
    for i in 0..frames {
        let frame = generate_frame(root, i, config).unwrap();
        let gt = &frame.rendered.gt_class;
        for (p, hit) in frame.scan.cloud.points.iter().zip(&frame.scan.hits) {
            let Some(hit) = *hit else { continue };
            let Some(proj) = calib.project_point(calib.transform_point(p.xyz())) else { continue };
            let (u, v) = proj.pixel(calib.width, calib.height);
            let here = *gt.get(v, u);
            let boundary = (v.saturating_sub(1)..=(v + 1).min(calib.height - 1))
                .any(|r| (u.saturating_sub(1)..=(u + 1).min(calib.width - 1)).any(|c| *gt.get(r, c) != here));
            if boundary {
                continue;
            }
            let class = match hit {
                0 => GROUND_CLASS,
                i => frame.scene.primitives[i as usize - 1].class,
            };
            total += 1;
            agree += usize::from(here == class);
        }
    }
    (agree, total)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
