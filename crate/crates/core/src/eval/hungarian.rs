use super::ConfusionMatrix;
use crate::error::{Error, Result};

/// Injective map from ground-truth class `c` to pseudo-class column
/// `assignment[c]` (pseudo-class label `assignment[c] + 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMapping {
    pub assignment: Vec<usize>,
}

impl ClassMapping {
    pub fn validate(&self, conf: &ConfusionMatrix) -> Result<()> {
        if self.assignment.len() != conf.gt_classes() {
            return Err(Error::InvalidArgument(format!(
                "mapping covers {} classes, matrix has {}",
                self.assignment.len(),
                conf.gt_classes()
            )));
        }
        let mut used = vec![false; conf.pseudo_classes()];
        for &j in &self.assignment {
            if j >= used.len() || std::mem::replace(&mut used[j], true) {
                return Err(Error::InvalidArgument(format!(
                    "pseudo-class column {j} is out of range or assigned twice"
                )));
            }
        }
        Ok(())
    }

    /// Ground-truth class matched to pseudo-class column `j`, if any.
    pub fn inverse(&self, pseudo_classes: usize) -> Vec<Option<usize>> {
        let mut inv = vec![None; pseudo_classes];
        for (c, &j) in self.assignment.iter().enumerate() {
            inv[j] = Some(c);
        }
        inv
    }

    /// Sum of the matched counts.
    pub fn objective(&self, conf: &ConfusionMatrix) -> u64 {
        self.assignment.iter().enumerate().map(|(c, &j)| conf.get(c, j)).sum()
    }
}

/// Minimum-cost assignment of every row to a distinct column, rows <= cols.
/// Shortest augmenting paths with potentials, O(rows^2 * cols).
/// Returns the column chosen for each row.
fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    debug_assert!(n <= m);
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            col_of[row_of[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Best matched mass over `rows` using only `cols`.
fn best_profit(conf: &ConfusionMatrix, rows: &[usize], cols: &[usize]) -> u64 {
    // Pad with zero-profit rows so the solver sees a square problem.
    let mut cost: Vec<Vec<i64>> = rows
        .iter()
        .map(|&c| cols.iter().map(|&j| -(conf.get(c, j) as i64)).collect())
        .collect();
    cost.resize(cols.len(), vec![0; cols.len()]);
    let assign = min_cost_assignment(&cost);
    rows.iter().zip(&assign).map(|(&c, &j)| conf.get(c, cols[j])).sum()
}

/// Maximum-weight injective assignment of ground-truth classes to
/// pseudo-classes. Among optimal assignments the lexicographically smallest
/// one (compared as the sequence of columns for classes 0, 1, ...) is chosen.
pub fn hungarian_match(conf: &ConfusionMatrix) -> Result<ClassMapping> {
    let (c_n, k) = (conf.gt_classes(), conf.pseudo_classes());
    if k < c_n {
        return Err(Error::InvalidArgument(format!(
            "{k} pseudo-classes cannot cover {c_n} ground-truth classes"
        )));
    }
    let mut free_cols: Vec<usize> = (0..k).collect();
    let mut remaining = best_profit(conf, &(0..c_n).collect::<Vec<_>>(), &free_cols);
    let mut assignment = Vec::with_capacity(c_n);
    // Fix classes one at a time to the smallest column that keeps the optimum.
    for c in 0..c_n {
        let rest: Vec<usize> = (c + 1..c_n).collect();
        let chosen = free_cols
            .iter()
            .position(|&j| {
                let cols: Vec<usize> = free_cols.iter().copied().filter(|&x| x != j).collect();
                let gain = conf.get(c, j);
                gain <= remaining && gain + best_profit(conf, &rest, &cols) == remaining
            })
            .expect("some column attains the optimum");
        let j = free_cols.remove(chosen);
        remaining -= conf.get(c, j);
        assignment.push(j);
    }
    Ok(ClassMapping { assignment })
}
