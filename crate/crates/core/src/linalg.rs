//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Numeric rank with threshold `max(rows, cols) · σ_max · 1e-12`.
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    numeric_rank_with(m, 1e-12)
}

/// Numeric rank with threshold `max(rows, cols) · σ_max · rel_tol`.
pub fn numeric_rank_with(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * sigma_max * rel_tol;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Eigenvalues of a real square matrix, sorted by real part then imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let mut eig: Vec<Complex64> = m.clone().complex_eigenvalues().iter().cloned().collect();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    eig
}

/// 2-norm condition number via singular values; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Determinant of a complex square matrix by LU.
pub fn complex_det(m: DMatrix<Complex64>) -> Complex64 {
    m.lu().determinant()
}

/// Solve a complex system, reporting singularity when the smallest LU pivot
/// is negligible relative to the matrix scale.
pub fn complex_solve(a: DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let lu = a.lu();
    let u = lu.u();
    let min_pivot = (0..u.nrows())
        .map(|i| u[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-13 * scale) {
        return None;
    }
    lu.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn rank_of_simple_matrices() {
        assert_eq!(numeric_rank(&dmatrix![0.0, 1.0; 1.0, 0.0]), 2);
        assert_eq!(numeric_rank(&dmatrix![1.0, 2.0; 2.0, 4.0]), 1);
        assert_eq!(numeric_rank(&DMatrix::zeros(3, 2)), 0);
    }

    #[test]
    fn eigenvalues_sorted() {
        let e = eigenvalues(&dmatrix![-1.0, 0.0; 0.0, -3.0]);
        assert!((e[0].re + 3.0).abs() < 1e-12 && (e[1].re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn complex_solve_detects_singularity() {
        let a = to_complex(&dmatrix![1.0, 2.0; 2.0, 4.0]);
        assert!(complex_solve(a, &to_complex(&dmatrix![1.0; 0.0])).is_none());
    }
}
