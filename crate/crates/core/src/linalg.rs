//! Dense Gaussian elimination. Desk-scale systems only (a few thousand unknowns).

/// Pivots smaller than this fraction of the largest matrix entry count as zero.
const PIVOT_TOL: f64 = 1e-14;

/// Solves `a x = b` in place, `a` row-major `n x n`. On success `b` holds `x`.
///
/// Returns `None` when the matrix is singular to working precision.
pub(crate) fn solve_in_place(a: &mut [f64], n: usize, b: &mut [f64]) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(libm::fabs(*v)));
    if n == 0 {
        return Some(());
    }
    if scale == 0.0 {
        return None;
    }
    let tol = PIVOT_TOL * scale;

    for col in 0..n {
        let mut piv = col;
        let mut best = libm::fabs(a[col * n + col]);
        for row in col + 1..n {
            let v = libm::fabs(a[row * n + col]);
            if v > best {
                best = v;
                piv = row;
            }
        }
        if !(best > tol) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for k in col + 1..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }

    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
        if !b[row].is_finite() {
            return None;
        }
    }
    Some(())
}
