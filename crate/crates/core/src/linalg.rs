//! Dense linear-algebra helpers on top of nalgebra with the ordering and
//! sign conventions the rest of the crate relies on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin SVD with singular values sorted in decreasing order.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// Right singular vectors as columns.
    pub v: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V^T").transpose();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    SortedSvd {
        u: u.select_columns(&order),
        singular_values: DVector::from_iterator(order.len(), order.iter().map(|&i| s[i])),
        v: v.select_columns(&order),
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in increasing order.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    (
        DVector::from_iterator(order.len(), order.iter().map(|&i| vals[i])),
        eig.eigenvectors.select_columns(&order),
    )
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).0[0]
}

/// Principal square root of a symmetric PSD matrix. Negative eigenvalues,
/// and those within rounding of zero relative to the largest, are treated as
/// zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = top * f64::EPSILON * (vals.len().max(1) as f64);
    let roots = vals.map(|v| if v > floor { v.sqrt() } else { 0.0 });
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * roots[j]);
    let out = &scaled * vecs.transpose();
    symmetrize(&out)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solves `a * x = b` by LU with partial pivoting.
pub fn solve(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.lu();
    let x = lu.solve(b).ok_or(Error::Singular)?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular)
    }
}

/// Thin QR whose `R` has a non-negative diagonal, making `Q` unique for
/// full-column-rank input. An input with orthonormal columns comes back
/// unchanged up to rounding.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal basis of the orthogonal complement of the column span of a
/// `d x k` matrix with orthonormal columns. The result is `d x (d - k)` and
/// depends only on the input.
pub fn orthogonal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, k) = basis.shape();
    // Householder QR of the zero-padded square matrix yields a full
    // orthogonal Q whose leading k columns span the input.
    let mut padded = DMatrix::zeros(d, d);
    padded.columns_mut(0, k).copy_from(basis);
    let q = padded.qr().q();
    q.columns(k, d - k).into_owned()
}

/// `||m^T m - I||_F`.
pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    (g - DMatrix::identity(m.ncols(), m.ncols())).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        DMatrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let m = sample(7, 4, 1);
        let s = svd(&m);
        for w in s.singular_values.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        let rec = &s.u * DMatrix::from_diagonal(&s.singular_values) * s.v.transpose();
        assert!((rec - m).norm() < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal() {
        let p = orthonormalize(&sample(9, 3, 2));
        let r = orthogonal_complement(&p);
        assert_eq!(r.shape(), (9, 6));
        assert!(orthonormality_defect(&r) < 1e-12);
        assert!((p.transpose() * &r).norm() < 1e-12);
    }

    #[test]
    fn orthonormalize_keeps_orthonormal_input() {
        let p = orthonormalize(&sample(6, 3, 3));
        let again = orthonormalize(&p);
        assert!((again - &p).norm() < 1e-12);
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let a = sample(5, 5, 4);
        let spd = &a * a.transpose();
        let r = sym_sqrt(&spd);
        assert!((&r * &r - spd).norm() < 1e-10);
    }

    #[test]
    fn singular_solve_reports() {
        let a = DMatrix::zeros(2, 2);
        assert!(matches!(
            solve(a, &DMatrix::identity(2, 2)),
            Err(Error::Singular)
        ));
    }
}
