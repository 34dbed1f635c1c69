use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImageSegmentMap, SparseEntry, SparseLabelImage};
use crate::grid::{Grid, IGNORE};

const BUCKET: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensifyParams {
    /// Pixels farther than this (pixels) from every entry stay IGNORE.
    /// `f64::INFINITY` propagates labels to the whole image.
    pub max_radius: f64,
    /// IGNORE entries take part in the nearest-entry search; otherwise they are dropped.
    pub ignore_competes: bool,
}

impl Default for DensifyParams {
    fn default() -> Self {
        Self {
            max_radius: 8.0,
            ignore_competes: true,
        }
    }
}

/// Nearest-entry label propagation.
///
/// Each pixel takes the label of its nearest entry within `max_radius`,
/// breaking distance ties by smaller depth and then smaller label.
pub fn densify(sparse: &SparseLabelImage, params: &DensifyParams) -> ImageSegmentMap {
    let (w, h) = (sparse.width, sparse.height);
    let entries: Vec<SparseEntry> = sparse
        .entries
        .iter()
        .copied()
        .filter(|e| params.ignore_competes || e.label != IGNORE)
        .collect();
    let (bw, bh) = (w.div_ceil(BUCKET).max(1), h.div_ceil(BUCKET).max(1));
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); bw * bh];
    for (i, e) in entries.iter().enumerate() {
        buckets[(e.v / BUCKET) * bw + e.u / BUCKET].push(i);
    }
    let max_d2 = params.max_radius * params.max_radius;

    let mut out = Grid::filled(h, w, IGNORE);
    if entries.is_empty() || w == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(v, row)| {
            for (u, px) in row.iter_mut().enumerate() {
                if let Some((d2, e)) = nearest(&entries, &buckets, bw, bh, u, v, max_d2) {
                    if (d2 as f64) <= max_d2 {
                        *px = e.label;
                    }
                }
            }
        });
    out
}

fn better(a: (i64, &SparseEntry), b: (i64, &SparseEntry)) -> bool {
    a.0.cmp(&b.0)
        .then_with(|| a.1.depth.total_cmp(&b.1.depth))
        .then_with(|| a.1.label.cmp(&b.1.label))
        == Ordering::Less
}

/// Ring search over buckets around `(u, v)`.
fn nearest<'a>(
    entries: &'a [SparseEntry],
    buckets: &[Vec<usize>],
    bw: usize,
    bh: usize,
    u: usize,
    v: usize,
    max_d2: f64,
) -> Option<(i64, &'a SparseEntry)> {
    let (bu, bv) = ((u / BUCKET) as i64, (v / BUCKET) as i64);
    let max_ring = bw.max(bh) as i64;
    let mut best: Option<(i64, &SparseEntry)> = None;
    for ring in 0..=max_ring {
        // Every entry in this ring is at least this far along one axis.
        if ring > 0 {
            let bound = ((ring - 1) * BUCKET as i64 + 1) as f64;
            let bound2 = bound * bound;
            if bound2 > max_d2 || best.is_some_and(|(d2, _)| bound2 > d2 as f64) {
                break;
            }
        }
        for by in (bv - ring)..=(bv + ring) {
            if by < 0 || by >= bh as i64 {
                continue;
            }
            let on_edge_row = by == bv - ring || by == bv + ring;
            let step = if on_edge_row { 1 } else { (2 * ring).max(1) };
            let mut bx = bu - ring;
            while bx <= bu + ring {
                if bx >= 0 && bx < bw as i64 {
                    for &i in &buckets[by as usize * bw + bx as usize] {
                        let e = &entries[i];
                        let du = e.u as i64 - u as i64;
                        let dv = e.v as i64 - v as i64;
                        let cand = (du * du + dv * dv, e);
                        if best.is_none_or(|b| better(cand, b)) {
                            best = Some(cand);
                        }
                    }
                }
                bx += step;
            }
        }
    }
    best
}
