//! Thin wrappers over nalgebra decompositions with the orderings and sign
//! conventions used across the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
/// Eigenvectors are columns; each is signed so its largest-magnitude entry
/// is positive.
pub fn sym_eigen_desc<T: Scalar>(m: DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        fix_sign(&mut col);
        vecs.set_column(c, &col);
    }
    (values, vecs)
}

/// Flips `v` so its largest-magnitude entry is positive.
pub fn fix_sign<T: Scalar>(v: &mut DVector<T>) {
    let mut best = T::zero();
    for x in v.iter() {
        if x.abs() > best.abs() {
            best = *x;
        }
    }
    if best < T::zero() {
        v.neg_mut();
    }
}

/// Thin SVD `a = u diag(s) v^T` with singular values in decreasing order.
pub struct ThinSvd<T: Scalar> {
    pub u: DMatrix<T>,
    pub s: Vec<T>,
    pub v: DMatrix<T>,
}

/// Always decomposes the tall orientation: the bidiagonalization of wide
/// rank-deficient inputs was observed to return inaccurate singular values.
pub fn thin_svd<T: Scalar>(a: DMatrix<T>) -> Result<ThinSvd<T>> {
    if a.nrows() < a.ncols() {
        let t = tall_svd(a.transpose())?;
        let mut out = ThinSvd { u: t.v, s: t.s, v: t.u };
        for c in 0..out.s.len() {
            let mut vc = out.v.column(c).into_owned();
            let before = vc.clone();
            fix_sign(&mut vc);
            if vc != before {
                out.v.set_column(c, &vc);
                out.u.column_mut(c).neg_mut();
            }
        }
        return Ok(out);
    }
    tall_svd(a)
}

fn tall_svd<T: Scalar>(a: DMatrix<T>) -> Result<ThinSvd<T>> {
    let out = tall_svd_direct(&a)?;
    if svd_residual(&a, &out) <= T::default_epsilon().sqrt() * T::lit(100.0) * out.s.first().copied().unwrap_or(T::zero()) {
        return Ok(out);
    }
    log::debug!("SVD residual too large; using the Gram eigendecomposition");
    Ok(gram_svd(&a))
}

/// Largest `|a v_i - s_i u_i|` over the columns.
fn svd_residual<T: Scalar>(a: &DMatrix<T>, svd: &ThinSvd<T>) -> T {
    let mut worst = T::zero();
    for i in 0..svd.s.len() {
        let r = a * svd.v.column(i) - svd.u.column(i) * svd.s[i];
        worst = worst.max(r.norm());
    }
    if worst.is_finite() {
        worst
    } else {
        T::max_value().unwrap_or(worst)
    }
}

/// Right vectors from the eigenvectors of `a^T a`, left vectors from a QR of
/// `a v`. Less accurate for tiny singular values but always consistent.
fn gram_svd<T: Scalar>(a: &DMatrix<T>) -> ThinSvd<T> {
    let mut g = a.transpose() * a;
    symmetrize(&mut g);
    let (_, v) = sym_eigen_desc(g);
    let qr = (a * &v).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q.columns(0, v.ncols()).into_owned();
    let mut s = Vec::with_capacity(v.ncols());
    for i in 0..v.ncols() {
        if r[(i, i)] < T::zero() {
            u.column_mut(i).neg_mut();
        }
        let si = r[(i, i)].abs();
        s.push(s.last().map_or(si, |p: &T| si.min(*p)));
    }
    ThinSvd { u, s, v }
}

fn tall_svd_direct<T: Scalar>(a: &DMatrix<T>) -> Result<ThinSvd<T>> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Data("SVD failed to produce U".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Data("SVD failed to produce V".into()))?;
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut uu = DMatrix::zeros(u.nrows(), r);
    let mut vv = DMatrix::zeros(vt.ncols(), r);
    let mut s = Vec::with_capacity(r);
    for (c, &i) in order.iter().enumerate() {
        let mut vc = vt.row(i).transpose();
        let mut uc = u.column(i).into_owned();
        // sign convention on the right singular vector, carried to the left one
        let before = vc.clone();
        fix_sign(&mut vc);
        if vc != before {
            uc.neg_mut();
        }
        uu.set_column(c, &uc);
        vv.set_column(c, &vc);
        s.push(svd.singular_values[i]);
    }
    Ok(ThinSvd { u: uu, s, v: vv })
}

/// `m^{-1/2}` for symmetric positive semidefinite `m`, flooring eigenvalues
/// at `floor` times the largest eigenvalue.
pub fn inv_sqrt_psd<T: Scalar>(m: DMatrix<T>, floor: T) -> DMatrix<T> {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let lo = (top * floor).max(T::lit(1e-30));
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..n {
        let s = T::one() / eig.eigenvalues[j].max(lo).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * eig.eigenvectors.transpose()
}

/// Symmetrizes in place to remove rounding asymmetry.
pub fn symmetrize<T: Scalar>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in i + 1..n {
            let v = half * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let (vals, vecs) = sym_eigen_desc(m.clone());
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        for j in 0..3 {
            let v = vecs.column(j);
            let r = &m * v - v * vals[j];
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn gram_fallback_is_consistent() {
        // rank 3 in a 40 x 7 matrix
        let b = DMatrix::from_fn(40, 3, |i, j| ((i * 3 + j) as f64 * 0.7).cos());
        let c = DMatrix::from_fn(3, 7, |i, j| ((i + 2 * j) as f64).sin());
        let a = b * c;
        let svd = gram_svd(&a);
        assert!(svd_residual(&a, &svd) < 1e-10 * svd.s[0]);
        let utu = svd.u.transpose() * &svd.u;
        assert!((utu - DMatrix::identity(7, 7)).amax() < 1e-12);
        assert!(svd.s[3] < 1e-7 * svd.s[0]);
    }

    #[test]
    fn svd_reconstructs() {
        let a = DMatrix::from_fn(4, 7, |i, j| ((i * 7 + j) as f64).sin());
        let svd = thin_svd(a.clone()).unwrap();
        let s = DMatrix::from_diagonal(&DVector::from_vec(svd.s.clone()));
        let back = &svd.u * s * svd.v.transpose();
        assert!((back - a).norm() < 1e-12);
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_of_rank_one_wide_matrix() {
        // the leading singular value must agree with the Gram eigenvalue
        let u = [-0.25, -0.15, -0.05, 0.05, 0.15, 0.25];
        let a = DMatrix::from_fn(6, 102, |i, j| {
            let t = (j % 51) as f64 / 50.0;
            if j < 51 {
                u[i] * (-(t - 0.5) * (t - 0.5) / 0.02).exp()
            } else {
                u[i] * 0.3 * (t - 0.5)
            }
        });
        let gram = (&a * a.transpose()).symmetric_eigen();
        let top = gram.eigenvalues.iter().copied().fold(0.0, f64::max).sqrt();
        for m in [a.clone(), a.transpose()] {
            let svd = thin_svd(m.clone()).unwrap();
            assert!((svd.s[0] - top).abs() < 1e-12 * top);
            let v0 = svd.v.column(0);
            assert!((&m - &m * v0 * v0.transpose()).norm() < 1e-12 * top);
        }
    }

    #[test]
    fn inverse_square_root() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = inv_sqrt_psd(m.clone(), 1e-12);
        let id = &r * &m * &r;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
