//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for every numeric rank in the crate.
pub const RANK_RTOL: f64 = 1e-8;

/// Numeric rank: singular values below `RANK_RTOL * sigma_max` count as zero.
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

/// Smallest nonzero-gap diagnostic: ratio of the last kept singular value to the
/// first dropped one. Large values mean the rank decision was unambiguous.
pub fn rank_gap(m: &DMatrix<f64>) -> f64 {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let r = numeric_rank(m);
    if r == 0 || r == sv.len() {
        return f64::INFINITY;
    }
    if sv[r] == 0.0 {
        f64::INFINITY
    } else {
        sv[r - 1] / sv[r]
    }
}

/// Orthonormal basis (columns) of the null space, via SVD of `m^T m`-free route.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // Pad to at least n rows so the thin SVD returns a full right basis.
    let mut padded = DMatrix::zeros(m.nrows().max(n), n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= RANK_RTOL * smax)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// 2-norm condition number.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Max-abs entry.
pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |a, &b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

pub fn max_abs_mat(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

/// Concatenate vectors.
pub fn concat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(n);
    let mut o = 0;
    for p in parts {
        out.rows_mut(o, p.len()).copy_from(*p);
        o += p.len();
    }
    out
}

/// Split a vector into consecutive pieces of the given lengths.
pub fn split(v: &DVector<f64>, lens: &[usize]) -> Vec<DVector<f64>> {
    let mut o = 0;
    lens.iter()
        .map(|&l| {
            let p = v.rows(o, l).into_owned();
            o += l;
            p
        })
        .collect()
}

/// Canonical Poisson matrix on `R^{2n}` with coordinates `(q, p)`: `{q_i, p_j} = delta_ij`.
pub fn canonical_tensor(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_projector() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(numeric_rank(&m), 2);
        let ns = null_space(&m);
        assert_eq!(ns.ncols(), 1);
        assert!((ns[(2, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_ignores_roundoff() {
        let mut m = DMatrix::identity(4, 4);
        m[(3, 3)] = 1e-14;
        assert_eq!(numeric_rank(&m), 3);
        assert_eq!(numeric_rank(&DMatrix::zeros(2, 5)), 0);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m);
        assert_eq!(ns.ncols(), 2);
        assert!(max_abs_mat(&(&m * &ns)) < 1e-14);
    }
}
