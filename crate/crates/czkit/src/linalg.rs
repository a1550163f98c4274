//! Small dense helpers: spectral norms of interaction matrices and the unit-weight Schur test.

use crate::kernel::power_iteration;

/// Spectral norm of a dense row-major `rows x cols` matrix by power iteration on `M^T M`.
///
/// The start vector is strictly positive, which for entrywise nonnegative matrices always has
/// a component along the Perron vector.
pub fn spectral_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    let start: Vec<f64> = (0..cols).map(|j| 1.0 + 0.1 * ((j * 7919) % 13) as f64 / 13.0).collect();
    power_iteration(m, rows, cols, start, 1e-12, 200_000).value
}

/// `sqrt(max row sum * max column sum)` for nonnegative sparse entries `(row, col, value)`.
/// This bounds the `l^2` operator norm of the matrix.
pub fn schur_unit_bound(entries: &[(usize, usize, f64)]) -> f64 {
    use std::collections::HashMap;
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for &(i, j, v) in entries {
        *rows.entry(i).or_default() += v;
        *cols.entry(j).or_default() += v;
    }
    let r = rows.values().cloned().fold(0.0, f64::max);
    let c = cols.values().cloned().fold(0.0, f64::max);
    (r * c).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        assert!((spectral_norm(&m, 2, 3) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn unit_schur_dominates_norm() {
        let entries = vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 0.5)];
        let dense = vec![1.0, 2.0, 0.0, 0.5];
        assert!(schur_unit_bound(&entries) >= spectral_norm(&dense, 2, 2));
    }
}
