use nalgebra::DMatrix;

use crate::C64;

/// Lower Cholesky factor of a Hermitian positive definite matrix.
///
/// Returns `None` when a pivot is not strictly positive. Only the lower
/// triangle of `m` is read.
pub fn hermitian_cholesky(m: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let n = m.nrows();
    let mut l = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Inverse of `L Lᴴ` from its lower factor.
pub fn cholesky_inverse(l: &DMatrix<C64>) -> DMatrix<C64> {
    let n = l.nrows();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("factor has a positive diagonal");
    linv.adjoint() * linv
}
