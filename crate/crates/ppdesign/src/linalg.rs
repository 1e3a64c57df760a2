use nalgebra::{DMatrix, DVector};

/// Relative pivot tolerance for declaring an information matrix singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// log|M| of a symmetric PSD matrix via fully pivoted Cholesky.
/// Returns None when any pivot drops below PIVOT_TOL relative to the
/// largest initial diagonal entry.
pub fn logdet_psd(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    if n == 0 {
        return Some(0.0);
    }
    let mut a = m.clone();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) {
        return None;
    }
    let threshold = PIVOT_TOL * max_diag;
    let mut logdet = 0.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)])).unwrap();
        if p != k {
            a.swap_rows(k, p);
            a.swap_columns(k, p);
        }
        let d = a[(k, k)];
        if !(d > threshold) {
            return None;
        }
        let l = d.sqrt();
        logdet += 2.0 * l.ln();
        for i in k + 1..n {
            a[(i, k)] /= l;
        }
        for j in k + 1..n {
            let ljk = a[(j, k)];
            for i in j..n {
                let v = a[(i, k)] * ljk;
                a[(i, j)] -= v;
                if i != j {
                    a[(j, i)] -= v;
                }
            }
        }
    }
    Some(logdet)
}

/// Rank-revealing pivoted Cholesky factor of a PSD matrix in original
/// coordinates: returns L (n×r) with Σ ≈ L·Lᵀ. `neg_tol` bounds how negative
/// a residual diagonal may go before the matrix is rejected as non-PSD.
pub fn psd_factor(sigma: &DMatrix<f64>, neg_tol: f64) -> Option<DMatrix<f64>> {
    let n = sigma.nrows();
    let mut a = sigma.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let stop = (PIVOT_TOL * max_diag).max(0.0);
    let mut lp = DMatrix::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)])).unwrap();
        if p != k {
            a.swap_rows(k, p);
            a.swap_columns(k, p);
            lp.swap_rows(k, p);
            perm.swap(k, p);
        }
        let d = a[(k, k)];
        if d < -neg_tol {
            return None;
        }
        if d <= stop {
            break;
        }
        let l = d.sqrt();
        lp[(k, k)] = l;
        for i in k + 1..n {
            lp[(i, k)] = a[(i, k)] / l;
        }
        for j in k + 1..n {
            for i in j..n {
                let v = lp[(i, k)] * lp[(j, k)];
                a[(i, j)] -= v;
                a[(j, i)] = a[(i, j)];
            }
        }
        rank = k + 1;
    }
    // undo the row permutation
    let mut l = DMatrix::zeros(n, rank);
    for i in 0..n {
        for c in 0..rank {
            l[(perm[i], c)] = lp[(i, c)];
        }
    }
    Some(l)
}

/// Solves A x = b for symmetric positive definite A; None if singular.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logdet_identity_and_scaling() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_relative_eq!(logdet_psd(&id).unwrap(), 0.0);
        let m = &id * 2.0;
        assert_relative_eq!(logdet_psd(&m).unwrap(), 4.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn logdet_detects_singularity() {
        let mut m = DMatrix::<f64>::zeros(3, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        assert!(logdet_psd(&m).is_none());
    }

    #[test]
    fn logdet_matches_dense_determinant() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.3, 1.5, 0.2, 0.7, 0.1, 1.1]);
        let m = &a * a.transpose();
        assert_relative_eq!(
            logdet_psd(&m).unwrap(),
            m.determinant().ln(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn psd_factor_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, -0.4, 0.9, 0.3, 0.1, 0.0, 1.2]);
        let sigma = &a * a.transpose();
        let l = psd_factor(&sigma, 1e-10).unwrap();
        let back = &l * l.transpose();
        assert_relative_eq!(back, sigma, epsilon = 1e-10);
    }

    #[test]
    fn psd_factor_handles_rank_deficiency_and_zero() {
        let v = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        let sigma = &v * v.transpose();
        let l = psd_factor(&sigma, 1e-10).unwrap();
        assert_eq!(l.ncols(), 1);
        assert_relative_eq!(&l * l.transpose(), sigma, epsilon = 1e-12);

        let zero = DMatrix::<f64>::zeros(3, 3);
        let l = psd_factor(&zero, 1e-10).unwrap();
        assert_eq!(l.ncols(), 0);
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(1, 1)] = -0.5;
        assert!(psd_factor(&m, 1e-10).is_none());
    }
}
