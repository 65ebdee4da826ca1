use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// A maximum-weight perfect matching of rows (networks) to columns
/// (clusters).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `permutation[n]` is the column assigned to row `n`.
    pub permutation: Vec<usize>,
    /// `Σ_n Z[n][permutation[n]]`, summed in row order.
    pub total: f64,
}

/// Solves the square linear sum assignment problem, maximizing the total.
///
/// Shortest augmenting paths with dual potentials, `O(n³)`. The matrix is
/// negated internally and solved as a minimization.
pub fn hungarian_assign(z: ArrayView2<f64>) -> Result<Assignment> {
    let (n, cols) = z.dim();
    if n != cols {
        return Err(Error::invalid(format!(
            "assignment matrix must be square, got {n}x{cols}"
        )));
    }
    if n == 0 {
        return Err(Error::Empty("assignment matrix".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assignment matrix".into()));
    }
    let cost = |i: usize, j: usize| -z[[i - 1, j - 1]];

    // 1-based arrays; index 0 is a virtual row/column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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

    let mut permutation = vec![0; n];
    for j in 1..=n {
        permutation[row_of[j] - 1] = j - 1;
    }
    let total = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| z[[i, j]])
        .sum();
    Ok(Assignment { permutation, total })
}
