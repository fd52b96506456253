//! Small dense helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values in descending order. Empty matrices have none.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `#{σ_k > tol · σ_1}`; zero for an all-zero matrix.
pub fn rank_from_singular_values(s: &[f64], tol: f64) -> usize {
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&v| v > tol * s1).count(),
        _ => 0,
    }
}

/// `σ_max / σ_min` over all `min(rows, cols)` singular values.
pub fn condition_number(s: &[f64]) -> f64 {
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    pub rank: usize,
    pub condition: f64,
    /// Euclidean norm of `A x − b`.
    pub residual: f64,
}

/// Minimum-norm least-squares solution of `A x = b`, refusing systems whose
/// numerical rank (relative threshold `tol`) is below the column count.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<LeastSquares> {
    if a.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "{}x{} system with a right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::arg("least-squares data contains non-finite entries"));
    }
    let s = singular_values(a);
    let rank = rank_from_singular_values(&s, tol);
    if rank < a.ncols() {
        return Err(Error::SingularSystem {
            rank,
            required: a.ncols(),
            attempts: 1,
        });
    }
    let svd = a.clone().svd(true, true);
    let eps = tol * s[0];
    let solution = svd.solve(b, eps).map_err(|e| Error::Solver(e.to_string()))?;
    let residual = (a * &solution - b).norm();
    Ok(LeastSquares {
        solution,
        rank,
        condition: condition_number(&s),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_condition() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let s = singular_values(&m);
        assert_eq!(rank_from_singular_values(&s, 1e-8), 1);
        assert!(condition_number(&s) > 1e12);
        assert_eq!(rank_from_singular_values(&singular_values(&DMatrix::zeros(2, 2)), 1e-8), 0);
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(singular_values(&id), vec![1.0; 3]);
        assert_eq!(condition_number(&singular_values(&id)), 1.0);
    }

    #[test]
    fn overdetermined_solve() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let ls = least_squares(&a, &b, 1e-12).unwrap();
        assert!((ls.solution[0] - 1.0).abs() < 1e-14);
        assert!((ls.solution[1] - 2.0).abs() < 1e-14);
        assert!(ls.residual < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = least_squares(&singular, &DVector::from_vec(vec![1.0, 1.0]), 1e-10).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { rank: 1, required: 2, .. }));
    }
}
