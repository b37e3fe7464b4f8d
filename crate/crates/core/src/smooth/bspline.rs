//! Clamped B-spline basis evaluation (Cox–de Boor with derivatives).

use nalgebra::{DMatrix, DVector};

use crate::scalar::Scalar;

/// Clamped knot vector on `breaks` with `degree + 1` repeated end knots.
pub fn clamped_knots<T: Scalar>(breaks: &[T], degree: usize) -> Vec<T> {
    let mut knots = Vec::with_capacity(breaks.len() + 2 * degree);
    let first = breaks[0];
    let last = *breaks.last().expect("nonempty breakpoints");
    knots.extend(std::iter::repeat(first).take(degree));
    knots.extend_from_slice(breaks);
    knots.extend(std::iter::repeat(last).take(degree));
    knots
}

/// Number of basis functions for a clamped knot vector.
#[inline]
pub fn basis_count(knots_len: usize, degree: usize) -> usize {
    knots_len - degree - 1
}

/// Knot span index `s` with `knots[s] <= x < knots[s+1]`, clamped to the
/// valid range.
pub fn find_span<T: Scalar>(knots: &[T], degree: usize, x: T) -> usize {
    let n = basis_count(knots.len(), degree);
    if x >= knots[n] {
        return n - 1;
    }
    if x <= knots[degree] {
        return degree;
    }
    let (mut lo, mut hi) = (degree, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Values and derivatives up to `nd` of the `degree + 1` nonzero basis
/// functions at `x`; `out[k][j]` is the k-th derivative of basis
/// `span - degree + j`.
pub fn basis_derivatives<T: Scalar>(knots: &[T], degree: usize, span: usize, x: T, nd: usize) -> Vec<Vec<T>> {
    let p = degree;
    let mut ndu = vec![vec![T::zero(); p + 1]; p + 1];
    let mut left = vec![T::zero(); p + 1];
    let mut right = vec![T::zero(); p + 1];
    ndu[0][0] = T::one();
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = T::zero();
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![T::zero(); p + 1]; nd + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = vec![vec![T::zero(); p + 1]; 2];
    let pi = p as isize;
    for r in 0..=pi {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = T::one();
        for k in 1..=(nd as isize) {
            let mut d = T::zero();
            let rk = r - k;
            let pk = pi - k;
            if pk < 0 {
                break;
            }
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk as usize];
            }
            let j1 = if rk >= -1 { 1 } else { -rk };
            let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
            for j in j1..=j2 {
                a[s2][j as usize] = (a[s1][j as usize] - a[s1][(j - 1) as usize])
                    / ndu[(pk + 1) as usize][(rk + j) as usize];
                d += a[s2][j as usize] * ndu[(rk + j) as usize][pk as usize];
            }
            if r <= pk {
                a[s2][k as usize] = -a[s1][(k - 1) as usize] / ndu[(pk + 1) as usize][r as usize];
                d += a[s2][k as usize] * ndu[r as usize][pk as usize];
            }
            ders[k as usize][r as usize] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = T::from_count(p);
    for k in 1..=nd.min(p) {
        for j in 0..=p {
            ders[k][j] *= fac;
        }
        fac *= T::from_count(p - k);
    }
    // derivatives above the degree vanish
    for row in ders.iter_mut().skip(p + 1) {
        row.iter_mut().for_each(|v| *v = T::zero());
    }
    ders
}

/// Collocation matrix of the `deriv`-th derivative at the points `xs`.
pub fn collocation<T: Scalar>(knots: &[T], degree: usize, xs: &[T], deriv: usize) -> DMatrix<T> {
    let n = basis_count(knots.len(), degree);
    let mut b = DMatrix::zeros(xs.len(), n);
    for (i, &x) in xs.iter().enumerate() {
        let span = find_span(knots, degree, x);
        let d = basis_derivatives(knots, degree, span, x, deriv);
        for j in 0..=degree {
            b[(i, span - degree + j)] = d[deriv][j];
        }
    }
    b
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    if n == 1 {
        return (vec![T::zero()], vec![T::lit(2.0)]);
    }
    let mut j = DMatrix::<T>::zeros(n, n);
    for k in 1..n {
        let kk = T::from_count(k);
        let b = kk / (T::lit(4.0) * kk * kk - T::one()).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(T, T)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], T::lit(2.0) * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    pairs.into_iter().unzip()
}

/// Gram matrix of the `order`-th derivatives, `P_ij = ∫ B_i^(r) B_j^(r)`,
/// exact by Gauss–Legendre quadrature on each knot interval.
pub fn derivative_gram<T: Scalar>(knots: &[T], degree: usize, order: usize) -> DMatrix<T> {
    let n = basis_count(knots.len(), degree);
    let mut p = DMatrix::zeros(n, n);
    if order > degree {
        return p;
    }
    let npts = degree - order + 1;
    let (nodes, weights) = gauss_legendre::<T>(npts);
    let half = T::lit(0.5);
    for s in degree..n {
        let (a, b) = (knots[s], knots[s + 1]);
        if b <= a {
            continue;
        }
        let mid = half * (a + b);
        let rad = half * (b - a);
        for (z, w) in nodes.iter().zip(&weights) {
            let x = mid + rad * *z;
            let d = basis_derivatives(knots, degree, s, x, order);
            let row = &d[order];
            for i in 0..=degree {
                for j in 0..=degree {
                    p[(s - degree + i, s - degree + j)] += *w * rad * row[i] * row[j];
                }
            }
        }
    }
    p
}

/// B-spline coefficients of the monomials `1, x, ..., x^(count-1)`
/// (columns), from the blossom of `x^m` at the interior knots of each basis.
pub fn monomial_coefficients<T: Scalar>(knots: &[T], degree: usize, count: usize) -> DMatrix<T> {
    let n = basis_count(knots.len(), degree);
    let mut out = DMatrix::zeros(n, count);
    for j in 0..n {
        // elementary symmetric polynomials of knots[j+1..=j+degree]
        let mut e = vec![T::zero(); degree + 1];
        e[0] = T::one();
        for &t in &knots[j + 1..=j + degree] {
            for m in (1..=degree).rev() {
                let prev = e[m - 1];
                e[m] += prev * t;
            }
        }
        for m in 0..count {
            out[(j, m)] = e[m] / binomial::<T>(degree, m);
        }
    }
    out
}

fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    let mut r = 1.0f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    T::lit(r)
}

/// Evaluates `Σ c_j B_j^(deriv)(x)`.
pub fn eval_spline<T: Scalar>(knots: &[T], degree: usize, coefs: &DVector<T>, x: T, deriv: usize) -> T {
    let span = find_span(knots, degree, x);
    let d = basis_derivatives(knots, degree, span, x, deriv);
    (0..=degree).fold(T::zero(), |acc, j| acc + d[deriv][j] * coefs[span - degree + j])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn breaks(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 / (n - 1) as f64).powf(1.3)).collect()
    }

    #[test]
    fn partition_of_unity_and_zero_derivative_sum() {
        let k = clamped_knots(&breaks(9), 4);
        for i in 0..50 {
            let x = i as f64 / 49.0;
            let s = find_span(&k, 4, x);
            let d = basis_derivatives(&k, 4, s, x, 3);
            assert!((d[0].iter().sum::<f64>() - 1.0).abs() < 1e-13);
            for order in 1..=3 {
                assert!(d[order].iter().sum::<f64>().abs() < 1e-8, "order {order}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = clamped_knots(&breaks(7), 4);
        let n = basis_count(k.len(), 4);
        let c = DVector::from_fn(n, |i, _| ((i * 3) as f64).sin());
        for &x in &[0.13, 0.4, 0.77] {
            let h = 1e-5;
            let fd = (eval_spline(&k, 4, &c, x + h, 0) - eval_spline(&k, 4, &c, x - h, 0)) / (2.0 * h);
            assert!((eval_spline(&k, 4, &c, x, 1) - fd).abs() < 1e-5);
            let fd2 = (eval_spline(&k, 4, &c, x + h, 1) - eval_spline(&k, 4, &c, x - h, 1)) / (2.0 * h);
            assert!((eval_spline(&k, 4, &c, x, 2) - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn monomials_are_reproduced() {
        let k = clamped_knots(&breaks(8), 4);
        let m = monomial_coefficients::<f64>(&k, 4, 5);
        for p in 0..5 {
            let c = m.column(p).into_owned();
            for i in 0..20 {
                let x = i as f64 / 19.0;
                assert!((eval_spline(&k, 4, &c, x, 0) - x.powi(p as i32)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<f64>(3);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((i - 2.0 / 5.0).abs() < 1e-14);
    }

    #[test]
    fn penalty_vanishes_on_linear_functions() {
        let k = clamped_knots(&breaks(10), 4);
        let p = derivative_gram::<f64>(&k, 4, 2);
        let m = monomial_coefficients::<f64>(&k, 4, 3);
        let lin = m.column(1).into_owned();
        assert!((&p * &lin).norm() < 1e-8 * p.norm());
        // ∫ (x^2)'' ^2 = 4
        let quad = m.column(2).into_owned();
        assert!(((quad.transpose() * &p * &quad)[0] - 4.0).abs() < 1e-9);
    }
}
