//! Rectangular linear assignment with a deterministic tie-break.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::MatchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Entries are costs; the assignment minimizes their sum.
    Minimize,
    /// Entries are scores; the assignment maximizes their sum.
    Maximize,
}

/// Rows index LiDAR persons, columns index camera persons.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: DMatrix<f64>,
    orientation: Orientation,
}

impl CostMatrix {
    pub fn new(values: DMatrix<f64>, orientation: Orientation) -> Result<Self, MatchError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MatchError::InvalidCost("cost matrix has non-finite entries".into()));
        }
        Ok(Self {
            values,
            orientation,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], orientation: Orientation) -> Result<Self, MatchError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(MatchError::InvalidCost("ragged cost matrix".into()));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]), orientation)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Sum of the entries selected by `matches`, in pair order.
    pub fn total(&self, matches: &MatchSet) -> f64 {
        matches.pairs.iter().map(|p| self.get(p.idx3d, p.idx2d)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub idx3d: usize,
    pub idx2d: usize,
    /// Mean reprojection error in pixels where one was computed; the raw
    /// matrix entry for pairs coming straight out of [`hungarian`].
    pub residual: f64,
}

/// Injective pairing between LiDAR and camera person indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    /// Sorted by `idx3d`.
    pub pairs: Vec<MatchPair>,
    pub unmatched3d: Vec<usize>,
    pub unmatched2d: Vec<usize>,
}

impl MatchSet {
    /// Builds a match over the index universes `domain3d` x `domain2d`;
    /// everything not paired is listed as unmatched.
    pub fn from_pairs(mut pairs: Vec<MatchPair>, domain3d: &[usize], domain2d: &[usize]) -> Self {
        pairs.sort_by_key(|p| (p.idx3d, p.idx2d));
        let unmatched3d = domain3d
            .iter()
            .copied()
            .filter(|i| !pairs.iter().any(|p| p.idx3d == *i))
            .collect();
        let unmatched2d = domain2d
            .iter()
            .copied()
            .filter(|j| !pairs.iter().any(|p| p.idx2d == *j))
            .collect();
        Self {
            pairs,
            unmatched3d,
            unmatched2d,
        }
    }

    pub fn contains(&self, idx3d: usize, idx2d: usize) -> bool {
        self.pairs.iter().any(|p| p.idx3d == idx3d && p.idx2d == idx2d)
    }

    pub fn partner_of_3d(&self, idx3d: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.idx3d == idx3d).map(|p| p.idx2d)
    }

    pub fn pair_indices(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.idx3d, p.idx2d)).collect()
    }

    /// No index is used twice on either side, and no paired index is also
    /// listed as unmatched.
    pub fn is_injective(&self) -> bool {
        let mut seen3 = std::collections::BTreeSet::new();
        let mut seen2 = std::collections::BTreeSet::new();
        self.pairs
            .iter()
            .all(|p| seen3.insert(p.idx3d) && seen2.insert(p.idx2d))
            && self.unmatched3d.iter().all(|i| !seen3.contains(i))
            && self.unmatched2d.iter().all(|j| !seen2.contains(j))
    }

    /// Moves pairs whose residual exceeds `threshold` to the unmatched lists.
    pub fn reject_above(&mut self, threshold: f64) -> usize {
        let before = self.pairs.len();
        let (keep, drop): (Vec<MatchPair>, Vec<MatchPair>) = self.pairs.iter().partition(|p| p.residual <= threshold);
        for p in &drop {
            self.unmatched3d.push(p.idx3d);
            self.unmatched2d.push(p.idx2d);
        }
        self.unmatched3d.sort_unstable();
        self.unmatched2d.sort_unstable();
        self.pairs = keep;
        before - self.pairs.len()
    }
}

/// Optimal assignment of `min(rows, cols)` pairs. Among optimal assignments
/// the one whose sorted `(idx3d, idx2d)` list is lexicographically smallest
/// is returned. An empty matrix yields an empty match.
pub fn hungarian(cost: &CostMatrix) -> MatchSet {
    let (rows, cols) = (cost.rows(), cost.cols());
    let domain3d: Vec<usize> = (0..rows).collect();
    let domain2d: Vec<usize> = (0..cols).collect();
    if rows == 0 || cols == 0 {
        return MatchSet::from_pairs(Vec::new(), &domain3d, &domain2d);
    }
    let n = rows.max(cols);
    let sign = match cost.orientation {
        Orientation::Minimize => 1.0,
        Orientation::Maximize => -1.0,
    };
    // square, minimizing; padding entries are zero so they shift every
    // complete assignment equally
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i < rows && j < cols {
            sign * cost.get(i, j)
        } else {
            0.0
        }
    });

    let (row_of_col, u, v) = shortest_augmenting_path(&a);
    let mut col_of_row = vec![0usize; n];
    for (j, &i) in row_of_col.iter().enumerate() {
        col_of_row[i] = j;
    }

    let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let tight = |i: usize, j: usize| a[(i, j)] - u[i] - v[j] <= tol;
    lexicographic_repair(n, rows, cols, &tight, &mut col_of_row);

    let pairs = (0..rows)
        .filter(|&i| col_of_row[i] < cols)
        .map(|i| MatchPair {
            idx3d: i,
            idx2d: col_of_row[i],
            residual: cost.get(i, col_of_row[i]),
        })
        .collect();
    MatchSet::from_pairs(pairs, &domain3d, &domain2d)
}

/// Jonker-Volgenant style O(n³) solver on a square minimization problem.
/// Returns the row assigned to each column plus optimal row/column duals.
fn shortest_augmenting_path(a: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    // 1-based with a virtual column 0, after the classic formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut min_reduced = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = a[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < min_reduced[j] {
                    min_reduced[j] = reduced;
                    way[j] = j0;
                }
                if min_reduced[j] < delta {
                    delta = min_reduced[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_reduced[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let row_of_col = (1..=n).map(|j| owner[j] - 1).collect();
    (row_of_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Walks real rows in order and moves each onto the smallest real column it
/// can take while the tight-edge graph still has a perfect matching. Every
/// perfect matching on tight edges is optimal, so optimality is preserved.
fn lexicographic_repair(
    n: usize,
    rows: usize,
    cols: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    col_of_row: &mut [usize],
) {
    let mut row_of_col = vec![0usize; n];
    for (i, &j) in col_of_row.iter().enumerate() {
        row_of_col[j] = i;
    }
    let mut fixed = vec![false; n];
    for i in 0..rows {
        for j in 0..cols {
            if col_of_row[i] == j {
                break;
            }
            let holder = row_of_col[j];
            if fixed[holder] || !tight(i, j) {
                continue;
            }
            // give j to i; the displaced holder must reach i's old column
            let freed = col_of_row[i];
            let saved_cols = col_of_row.to_vec();
            let saved_rows = row_of_col.clone();
            col_of_row[i] = j;
            row_of_col[j] = i;
            fixed[i] = true;
            let mut visited = vec![false; n];
            visited[j] = true;
            if reroute(holder, freed, tight, &fixed, &mut visited, col_of_row, &mut row_of_col) {
                break;
            }
            fixed[i] = false;
            col_of_row.copy_from_slice(&saved_cols);
            row_of_col = saved_rows;
        }
        fixed[i] = true;
    }
}

/// Depth-first alternating path from `row` to the free column `target`.
fn reroute(
    row: usize,
    target: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    fixed: &[bool],
    visited: &mut [bool],
    col_of_row: &mut [usize],
    row_of_col: &mut [usize],
) -> bool {
    let n = col_of_row.len();
    for j in 0..n {
        if visited[j] || !tight(row, j) {
            continue;
        }
        visited[j] = true;
        if j == target {
            col_of_row[row] = j;
            row_of_col[j] = row;
            return true;
        }
        let next = row_of_col[j];
        if fixed[next] {
            continue;
        }
        if reroute(next, target, tight, fixed, visited, col_of_row, row_of_col) {
            col_of_row[row] = j;
            row_of_col[j] = row;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every injection of size min(rows, cols), summed in row order.
    fn brute_force(c: &[Vec<f64>], maximize: bool) -> (f64, Vec<Vec<(usize, usize)>>) {
        let rows = c.len();
        let cols = c[0].len();
        let k = rows.min(cols);
        let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
        let mut argbest = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        fn rec(
            c: &[Vec<f64>],
            row: usize,
            k: usize,
            maximize: bool,
            stack: &mut Vec<(usize, usize)>,
            best: &mut f64,
            argbest: &mut Vec<Vec<(usize, usize)>>,
        ) {
            let (rows, cols) = (c.len(), c[0].len());
            if stack.len() == k {
                let total: f64 = stack.iter().map(|&(i, j)| c[i][j]).sum();
                let better = if maximize { total > *best } else { total < *best };
                if better {
                    *best = total;
                    argbest.clear();
                }
                if total == *best {
                    argbest.push(stack.clone());
                }
                return;
            }
            if row == rows || rows - row < k - stack.len() {
                return;
            }
            for j in 0..cols {
                if stack.iter().any(|&(_, jj)| jj == j) {
                    continue;
                }
                stack.push((row, j));
                rec(c, row + 1, k, maximize, stack, best, argbest);
                stack.pop();
            }
            rec(c, row + 1, k, maximize, stack, best, argbest);
        }
        rec(c, 0, k, maximize, &mut stack, &mut best, &mut argbest);
        (best, argbest)
    }

    #[test]
    fn diagonal_optimum() {
        let c = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], Orientation::Minimize).unwrap();
        let m = hungarian(&c);
        assert_eq!(m.pair_indices(), vec![(0, 0), (1, 1)]);
        assert_eq!(c.total(&m), 0.0);
    }

    #[test]
    fn singleton() {
        let c = CostMatrix::from_rows(&[vec![5.0]], Orientation::Minimize).unwrap();
        assert_eq!(hungarian(&c).pair_indices(), vec![(0, 0)]);
    }

    #[test]
    fn empty_input() {
        let c = CostMatrix::new(DMatrix::zeros(0, 3), Orientation::Minimize).unwrap();
        let m = hungarian(&c);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched2d, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(CostMatrix::from_rows(&[vec![f64::NAN]], Orientation::Minimize).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..400 {
            let rows = rng.random_range(1..=6);
            let cols = rng.random_range(1..=6);
            let c: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(-10.0..10.0)).collect())
                .collect();
            let maximize = trial % 2 == 1;
            let orientation = if maximize { Orientation::Maximize } else { Orientation::Minimize };
            let cm = CostMatrix::from_rows(&c, orientation).unwrap();
            let m = hungarian(&cm);
            assert_eq!(m.pairs.len(), rows.min(cols));
            assert!(m.is_injective());
            let (best, _) = brute_force(&c, maximize);
            assert_eq!(cm.total(&m), best, "trial {trial}");
        }
    }

    #[test]
    fn ties_resolve_to_lexicographically_smallest() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..400 {
            let rows = rng.random_range(1..=5);
            let cols = rng.random_range(1..=5);
            // small integers make exact ties common
            let c: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(0..3) as f64).collect())
                .collect();
            let cm = CostMatrix::from_rows(&c, Orientation::Minimize).unwrap();
            let m = hungarian(&cm);
            let (best, mut optima) = brute_force(&c, false);
            assert_eq!(cm.total(&m), best);
            optima.sort();
            assert_eq!(m.pair_indices(), optima[0], "matrix {c:?}");
        }
    }

    #[test]
    fn reject_moves_pairs_to_unmatched() {
        let mut m = MatchSet::from_pairs(
            vec![
                MatchPair { idx3d: 0, idx2d: 1, residual: 3.0 },
                MatchPair { idx3d: 2, idx2d: 0, residual: 30.0 },
            ],
            &[0, 1, 2],
            &[0, 1],
        );
        assert_eq!(m.reject_above(10.0), 1);
        assert_eq!(m.pair_indices(), vec![(0, 1)]);
        assert_eq!(m.unmatched3d, vec![1, 2]);
        assert_eq!(m.unmatched2d, vec![0]);
        assert!(m.is_injective());
    }

    proptest! {
        #[test]
        fn output_is_always_a_partition(rows in 0usize..7, cols in 0usize..7, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
            let m = hungarian(&CostMatrix::new(values, Orientation::Maximize).unwrap());
            prop_assert!(m.is_injective());
            prop_assert_eq!(m.pairs.len(), rows.min(cols));
            prop_assert_eq!(m.pairs.len() + m.unmatched3d.len(), rows);
            prop_assert_eq!(m.pairs.len() + m.unmatched2d.len(), cols);
        }
    }
}
