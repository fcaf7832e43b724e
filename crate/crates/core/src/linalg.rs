use nalgebra::{DMatrix, SymmetricEigen};

/// Upper-triangular U with U'U = a and positive diagonal. Returns `None` when
/// a pivot drops below `rel_tol` times the largest diagonal entry of `a`.
pub(crate) fn cholesky_upper(a: &DMatrix<f64>, rel_tol: f64) -> Option<DMatrix<f64>> {
    let d = a.nrows();
    let max_diag = (0..d).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    if !(max_diag > 0.0) {
        return None;
    }
    let floor = rel_tol * max_diag;
    let mut u = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let mut s = a[(i, i)];
        for k in 0..i {
            s -= u[(k, i)] * u[(k, i)];
        }
        if !(s > floor) {
            return None;
        }
        let piv = s.sqrt();
        u[(i, i)] = piv;
        for j in (i + 1)..d {
            let mut t = a[(i, j)];
            for k in 0..i {
                t -= u[(k, i)] * u[(k, j)];
            }
            u[(i, j)] = t / piv;
        }
    }
    Some(u)
}

/// Solves U x = b for upper-triangular U.
pub(crate) fn solve_upper(u: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let d = u.nrows();
    let mut x = b.to_vec();
    for i in (0..d).rev() {
        let mut s = x[i];
        for k in (i + 1)..d {
            s -= u[(i, k)] * x[k];
        }
        x[i] = s / u[(i, i)];
    }
    x
}

/// Solves U'x = b for upper-triangular U.
pub(crate) fn solve_upper_transpose(u: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let d = u.nrows();
    let mut x = b.to_vec();
    for i in 0..d {
        let mut s = x[i];
        for k in 0..i {
            s -= u[(k, i)] * x[k];
        }
        x[i] = s / u[(i, i)];
    }
    x
}

/// Solves the SPD system a x = b by Cholesky, `None` if a is numerically singular.
pub(crate) fn spd_solve(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let u = cholesky_upper(a, 1e-12)?;
    let w = solve_upper_transpose(&u, b);
    Some(solve_upper(&u, &w))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn sym_eig_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(a.clone());
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Columns `cols` of `x`, in the given order.
pub(crate) fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

pub(crate) fn gram_over_n(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    (x.transpose() * x) / n
}
