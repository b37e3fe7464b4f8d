//! Regularized functional canonical correlation between amplitude and phase.
//!
//! Weights are grid functions. Scores are quadrature inner products with the
//! centered samples, and each weight is normalized so that its score variance
//! plus `lambda` times its integrated squared second derivative equals one.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fungeom::{compose_amplitude_phase, SampledCurve, TangentFunction, TimeGrid};
use crate::linalg::{fix_sign, inv_sqrt_psd, symmetrize, thin_svd};
use crate::scalar::Scalar;

pub const CV_GRID_POINTS: usize = 17;
pub const CV_LOG10_RANGE: (f64, f64) = (-8.0, 0.0);
/// Relative floor on eigenvalues of the penalized covariances.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Candidate smoothing parameters for cross-validation, log-spaced.
pub fn cv_lambda_grid<T: Scalar>() -> Vec<T> {
    let (lo, hi) = CV_LOG10_RANGE;
    (0..CV_GRID_POINTS)
        .map(|j| T::lit(10f64.powf(lo + (hi - lo) * j as f64 / (CV_GRID_POINTS - 1) as f64)))
        .collect()
}

/// `P` with `psi^T P psi` the trapezoid integral of squared second divided
/// differences.
pub fn second_difference_penalty<T: Scalar>(grid: &TimeGrid<T>) -> DMatrix<T> {
    let t = grid.points();
    let k = t.len();
    let mut p = DMatrix::zeros(k, k);
    let two = T::lit(2.0);
    for i in 1..k - 1 {
        let h1 = t[i] - t[i - 1];
        let h2 = t[i + 1] - t[i];
        let s = two / (h1 + h2);
        let row = [(i - 1, s / h1), (i, -s * (T::one() / h1 + T::one() / h2)), (i + 1, s / h2)];
        let wt = (h1 + h2) / two;
        for &(a, ca) in &row {
            for &(b, cb) in &row {
                p[(a, b)] += wt * ca * cb;
            }
        }
    }
    p
}

#[derive(Clone, Debug)]
pub struct CcaModel<T: Scalar> {
    pub grid: TimeGrid<T>,
    /// Sample mean of the amplitudes.
    pub mean_amplitude: SampledCurve<T>,
    /// `(psi_y, psi_x)` ordered by decreasing correlation.
    pub weight_pairs: Vec<(SampledCurve<T>, SampledCurve<T>)>,
    pub correlations: Vec<T>,
    /// Slope of the phase score regressed on the amplitude score.
    pub slopes: Vec<T>,
    pub lambda: T,
    /// Set when fewer pairs than requested were available.
    pub truncated: bool,
    /// `(lambda, validated correlation)` when lambda was cross-validated.
    pub cv: Vec<(T, T)>,
}

impl<T: Scalar> CcaModel<T> {
    pub fn n_pairs(&self) -> usize {
        self.weight_pairs.len()
    }

    /// Amplitude and phase canonical scores of every sample for pair `i`.
    pub fn scores(&self, i: usize, ys: &[SampledCurve<T>], xs: &[TangentFunction<T>]) -> Result<(Vec<T>, Vec<T>)> {
        let (py, px) = self
            .weight_pairs
            .get(i)
            .ok_or_else(|| Error::InvalidParameter(format!("pair {i} out of range")))?;
        let data = Blocks::new(ys, xs)?;
        data.grid.check_same(&self.grid)?;
        let u = data.fy.clone() * to_vector(py.values());
        let v = data.fx.clone() * to_vector(px.values());
        Ok((u.iter().copied().collect(), v.iter().copied().collect()))
    }
}

fn to_vector<T: Scalar>(v: &[T]) -> nalgebra::DVector<T> {
    nalgebra::DVector::from_column_slice(v)
}

/// Raw weighted rows: `Y W` and `X W`, one sample per row.
struct Blocks<T: Scalar> {
    grid: TimeGrid<T>,
    raw_y: DMatrix<T>,
    raw_x: DMatrix<T>,
    fy: DMatrix<T>,
    fx: DMatrix<T>,
    mean_y: Vec<T>,
}

impl<T: Scalar> Blocks<T> {
    fn new(ys: &[SampledCurve<T>], xs: &[TangentFunction<T>]) -> Result<Self> {
        if ys.len() != xs.len() {
            return Err(Error::LengthMismatch {
                expected: ys.len(),
                got: xs.len(),
            });
        }
        if ys.len() < 3 {
            return Err(Error::TooFewSamples { need: 3, got: ys.len() });
        }
        let grid = ys[0].grid().clone();
        for y in ys {
            grid.check_same(y.grid())?;
        }
        for x in xs {
            grid.check_same(x.grid())?;
        }
        let w = grid.weights();
        let k = grid.len();
        let raw_y = DMatrix::from_fn(ys.len(), k, |i, j| ys[i].values()[j] * w[j]);
        let raw_x = DMatrix::from_fn(xs.len(), k, |i, j| xs[i].values()[j] * w[j]);
        let n = T::from_count(ys.len());
        let mean_y = (0..k)
            .map(|j| ys.iter().fold(T::zero(), |a, y| a + y.values()[j]) / n)
            .collect();
        let fy = centered(&raw_y);
        let fx = centered(&raw_x);
        Ok(Self {
            grid,
            raw_y,
            raw_x,
            fy,
            fx,
            mean_y,
        })
    }
}

fn centered<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = T::from_count(m.nrows());
    let mut c = m.clone();
    for mut col in c.column_iter_mut() {
        let mu = col.sum() / n;
        col.add_scalar_mut(-mu);
    }
    c
}

fn drop_row<T: Scalar>(m: &DMatrix<T>, i: usize) -> DMatrix<T> {
    m.clone().remove_row(i)
}

/// Canonical weights (columns) and singular values of the whitened
/// cross-covariance.
struct Solution<T: Scalar> {
    psi_y: DMatrix<T>,
    psi_x: DMatrix<T>,
    s: Vec<T>,
}

fn solve<T: Scalar>(fy: &DMatrix<T>, fx: &DMatrix<T>, p: &DMatrix<T>, lambda: T, pairs: usize) -> Result<Solution<T>> {
    let d = T::from_count(fy.nrows() - 1);
    let floor = T::lit(EIGEN_FLOOR);
    let mut a = fy.transpose() * fy / d + p * lambda;
    let mut b = fx.transpose() * fx / d + p * lambda;
    symmetrize(&mut a);
    symmetrize(&mut b);
    let ay = inv_sqrt_psd(a, floor);
    let bx = inv_sqrt_psd(b, floor);
    let m = fy.transpose() * fx / d;
    let svd = thin_svd(&ay * m * &bx)?;
    let top = svd.s.first().copied().unwrap_or(T::zero());
    let rank = svd
        .s
        .iter()
        .take_while(|s| **s > top * T::lit(1e-10) && **s > T::zero())
        .count()
        .min(fy.nrows() - 1);
    let r = pairs.min(rank);
    let mut psi_y = &ay * svd.u.columns(0, r);
    let mut psi_x = &bx * svd.v.columns(0, r);
    for c in 0..r {
        let mut col = psi_y.column(c).into_owned();
        let before = col.clone();
        fix_sign(&mut col);
        if col != before {
            psi_y.set_column(c, &col);
            psi_x.column_mut(c).neg_mut();
        }
    }
    Ok(Solution {
        psi_y,
        psi_x,
        s: svd.s[..r].to_vec(),
    })
}

fn correlation<T: Scalar>(u: &[T], v: &[T]) -> (T, T) {
    let n = T::from_count(u.len());
    let mu = u.iter().fold(T::zero(), |a, b| a + *b) / n;
    let mv = v.iter().fold(T::zero(), |a, b| a + *b) / n;
    let (mut suu, mut svv, mut suv) = (T::zero(), T::zero(), T::zero());
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (*a - mu, *b - mv);
        suu += da * da;
        svv += db * db;
        suv += da * db;
    }
    let rho = if suu > T::zero() && svv > T::zero() {
        suv / (suu * svv).sqrt()
    } else {
        T::zero()
    };
    let slope = if suu > T::zero() { suv / suu } else { T::zero() };
    (rho, slope)
}

/// Leave-one-out validated first canonical correlation at `lambda`.
pub fn validated_correlation<T: Scalar>(ys: &[SampledCurve<T>], xs: &[TangentFunction<T>], lambda: T) -> Result<T> {
    let data = Blocks::new(ys, xs)?;
    let p = second_difference_penalty(&data.grid);
    validated_from(&data, &p, lambda)
}

fn validated_from<T: Scalar>(data: &Blocks<T>, p: &DMatrix<T>, lambda: T) -> Result<T> {
    let full = solve(&data.fy, &data.fx, p, lambda, 1)?;
    if full.s.is_empty() {
        return Ok(T::zero());
    }
    let fast = FoldSolver::new(data, p, lambda, &full);
    let n = data.fy.nrows();
    let held: Vec<(T, T)> = (0..n)
        .into_par_iter()
        .map(|i| match fast.held_out(i) {
            Some(pair) => Ok(pair),
            None => held_out_direct(data, p, lambda, &full, i),
        })
        .collect::<Result<_>>()?;
    let (u, v): (Vec<T>, Vec<T>) = held.into_iter().unzip();
    Ok(correlation(&u, &v).0)
}

/// Held-out score pair of sample `i` from a refit on the other samples.
fn held_out_direct<T: Scalar>(data: &Blocks<T>, p: &DMatrix<T>, lambda: T, full: &Solution<T>, i: usize) -> Result<(T, T)> {
    let ry = drop_row(&data.raw_y, i);
    let rx = drop_row(&data.raw_x, i);
    let sol = solve(&centered(&ry), &centered(&rx), p, lambda, 1)?;
    if sol.s.is_empty() {
        return Ok((T::zero(), T::zero()));
    }
    let mut py = sol.psi_y.column(0).into_owned();
    let mut px = sol.psi_x.column(0).into_owned();
    if py.dot(&full.psi_y.column(0)) < T::zero() {
        py.neg_mut();
        px.neg_mut();
    }
    let m = T::from_count(ry.nrows());
    let u = (0..py.len()).fold(T::zero(), |acc, j| acc + (data.raw_y[(i, j)] - ry.column(j).sum() / m) * py[j]);
    let v = (0..px.len()).fold(T::zero(), |acc, j| acc + (data.raw_x[(i, j)] - rx.column(j).sum() / m) * px[j]);
    Ok((u, v))
}

const POWER_MAX_ITER: usize = 2000;
const POWER_TOL: f64 = 1e-11;

/// Leading canonical pair of each leave-one-out fold. The fold covariances
/// are rank-one downdates of the full ones; whitening uses Cholesky factors
/// and the leading singular pair comes from a power iteration started at the
/// full-data solution. The constant function, which carries no phase
/// variance and no roughness, is deflated from the phase block.
struct FoldSolver<'a, T: Scalar> {
    data: &'a Blocks<T>,
    p: &'a DMatrix<T>,
    lambda: T,
    gy: DMatrix<T>,
    gx: DMatrix<T>,
    gyx: DMatrix<T>,
    ref_y: nalgebra::DVector<T>,
    ref_x: nalgebra::DVector<T>,
}

impl<'a, T: Scalar> FoldSolver<'a, T> {
    fn new(data: &'a Blocks<T>, p: &'a DMatrix<T>, lambda: T, full: &Solution<T>) -> Self {
        Self {
            data,
            p,
            lambda,
            gy: data.fy.transpose() * &data.fy,
            gx: data.fx.transpose() * &data.fx,
            gyx: data.fy.transpose() * &data.fx,
            ref_y: full.psi_y.column(0).into_owned(),
            ref_x: full.psi_x.column(0).into_owned(),
        }
    }

    fn held_out(&self, i: usize) -> Option<(T, T)> {
        let n = self.data.fy.nrows();
        let k = self.gy.nrows();
        let c = T::from_count(n) / T::from_count(n - 1);
        let d = T::from_count(n - 2);
        let dy = self.data.fy.row(i).transpose();
        let dx = self.data.fx.row(i).transpose();
        let mut a = (&self.gy - &dy * dy.transpose() * c) / d + self.p * self.lambda;
        let mut b = (&self.gx - &dx * dx.transpose() * c) / d + self.p * self.lambda;
        let m = (&self.gyx - &dy * dx.transpose() * c) / d;
        symmetrize(&mut a);
        symmetrize(&mut b);
        let shift = b.trace() / T::from_count(k * k);
        b.add_scalar_mut(shift);
        let la = a.cholesky()?.l();
        let lb = b.cholesky()?.l();
        let t1 = la.solve_lower_triangular(&m)?;
        let kmat = lb.solve_lower_triangular(&t1.transpose())?.transpose();
        let mut v = lb.transpose() * &self.ref_x;
        let mut norm = v.norm();
        if !(norm > T::zero()) {
            return None;
        }
        v /= norm;
        let mut converged = false;
        for _ in 0..POWER_MAX_ITER {
            let w = kmat.transpose() * (&kmat * &v);
            norm = w.norm();
            if !(norm > T::zero()) {
                return None;
            }
            let next = w / norm;
            let change = (&next - &v).norm();
            v = next;
            if change < T::lit(POWER_TOL) {
                converged = true;
                break;
            }
        }
        if !converged {
            return None;
        }
        let sigma = norm.sqrt();
        let u = &kmat * &v / sigma;
        let mut py = la.transpose().solve_upper_triangular(&u)?;
        let mut px = lb.transpose().solve_upper_triangular(&v)?;
        if py.dot(&self.ref_y) < T::zero() {
            py.neg_mut();
            px.neg_mut();
        }
        Some((dy.dot(&py) * c, dx.dot(&px) * c))
    }
}

/// Regularized CCA. Without `lambda`, it is chosen on [`cv_lambda_grid`] by
/// leave-one-out cross-validation of the first canonical correlation.
pub fn fit_cca<T: Scalar>(
    ys: &[SampledCurve<T>],
    xs: &[TangentFunction<T>],
    lambda: Option<T>,
    n_pairs: usize,
) -> Result<CcaModel<T>> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("at least one canonical pair is required".into()));
    }
    if let Some(l) = lambda {
        if !(l >= T::zero()) {
            return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
        }
    }
    let data = Blocks::new(ys, xs)?;
    let p = second_difference_penalty(&data.grid);
    let (lambda, cv) = match lambda {
        Some(l) => (l, Vec::new()),
        None => {
            let mut cv = Vec::with_capacity(CV_GRID_POINTS);
            for l in cv_lambda_grid::<T>() {
                cv.push((l, validated_from(&data, &p, l)?));
            }
            let best = cv
                .iter()
                .fold(None, |best: Option<(T, T)>, &(l, r)| match best {
                    Some((_, br)) if br >= r => best,
                    _ => Some((l, r)),
                })
                .expect("nonempty grid");
            log::debug!("cross-validated lambda {} (validated correlation {})", best.0.as_f64(), best.1.as_f64());
            (best.0, cv)
        }
    };
    let sol = solve(&data.fy, &data.fx, &p, lambda, n_pairs)?;
    let r = sol.s.len();
    let truncated = r < n_pairs;
    if truncated {
        log::warn!("only {r} canonical pairs available; {n_pairs} requested");
    }
    let mut pairs: Vec<(T, T, usize)> = (0..r)
        .map(|c| {
            let u: Vec<T> = (&data.fy * sol.psi_y.column(c)).iter().copied().collect();
            let v: Vec<T> = (&data.fx * sol.psi_x.column(c)).iter().copied().collect();
            let (rho, slope) = correlation(&u, &v);
            (rho, slope, c)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let grid = data.grid.clone();
    let curve = |m: &DMatrix<T>, c: usize| SampledCurve::new(grid.clone(), m.column(c).iter().copied().collect());
    let mut weight_pairs = Vec::with_capacity(r);
    for &(_, _, c) in &pairs {
        weight_pairs.push((curve(&sol.psi_y, c)?, curve(&sol.psi_x, c)?));
    }
    Ok(CcaModel {
        mean_amplitude: SampledCurve::new(grid.clone(), data.mean_y.clone())?,
        grid,
        weight_pairs,
        correlations: pairs.iter().map(|p| p.0.max(T::zero()).min(T::one())).collect(),
        slopes: pairs.iter().map(|p| p.1).collect(),
        lambda,
        truncated,
        cv,
    })
}

/// `compose(mean + a psi_y, b psi_x)` for pair `i`; `b` defaults to `a / slope`.
pub fn canonical_mode<T: Scalar>(model: &CcaModel<T>, i: usize, a: T, b: Option<T>) -> Result<SampledCurve<T>> {
    let (py, px) = model
        .weight_pairs
        .get(i)
        .ok_or_else(|| Error::InvalidParameter(format!("pair {i} out of range")))?;
    let b = match b {
        Some(b) => b,
        None if a == T::zero() => T::zero(),
        None => {
            let beta = model.slopes[i];
            if beta == T::zero() {
                return Err(Error::InvalidParameter("zero slope: give b explicitly".into()));
            }
            a / beta
        }
    };
    let y = model.mean_amplitude.axpy(a, py)?;
    let x = TangentFunction::project(&px.scale(b));
    compose_amplitude_phase(&y, &x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{gen_cca_dataset_with, SimConfig, SimModel};

    fn small_set(n: usize, seed: u64, rho: f64) -> (Vec<SampledCurve<f64>>, Vec<TangentFunction<f64>>) {
        let mut cfg = SimConfig::new(SimModel::CcaModel, n, seed);
        cfg.k = 41;
        let ds = gen_cca_dataset_with::<f64>(&cfg, rho).unwrap();
        (ds.ys_true, ds.xs_true)
    }

    fn quad(m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
        let a = to_vector(a);
        let b = to_vector(b);
        a.dot(&(m * b))
    }

    fn penalized_covariances(ys: &[SampledCurve<f64>], xs: &[TangentFunction<f64>], lambda: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let data = Blocks::new(ys, xs).unwrap();
        let p = second_difference_penalty(&data.grid);
        let d = (ys.len() - 1) as f64;
        let a = data.fy.transpose() * &data.fy / d + &p * lambda;
        let b = data.fx.transpose() * &data.fx / d + &p * lambda;
        (a, b, p)
    }

    #[test]
    fn penalty_of_a_quadratic() {
        let g = TimeGrid::<f64>::uniform(21).unwrap();
        let p = second_difference_penalty(&g);
        let t = g.points();
        let line: Vec<f64> = t.iter().map(|s| 3.0 * s - 1.0).collect();
        assert!(quad(&p, &line, &line).abs() < 1e-9);
        // second derivative 2 on the interior nodes
        let sq: Vec<f64> = t.iter().map(|s| s * s).collect();
        assert!((quad(&p, &sq, &sq) - 4.0 * (1.0 - 0.05)).abs() < 1e-8);
    }

    #[test]
    fn lambda_grid() {
        let g = cv_lambda_grid::<f64>();
        assert_eq!(g.len(), 17);
        assert!((g[0] - 1e-8).abs() < 1e-20);
        assert!((g[16] - 1.0).abs() < 1e-12);
        assert!((g[2] - 1e-7).abs() < 1e-19);
    }

    #[test]
    fn fast_folds_match_refits() {
        let (ys, xs) = small_set(25, 3, 0.8);
        let data = Blocks::new(&ys, &xs).unwrap();
        let p = second_difference_penalty(&data.grid);
        for lambda in [1e-6, 1e-3, 1e-1] {
            let full = solve(&data.fy, &data.fx, &p, lambda, 1).unwrap();
            let fast = FoldSolver::new(&data, &p, lambda, &full);
            for i in 0..ys.len() {
                let (u, v) = fast.held_out(i).expect("fast fold");
                let (u0, v0) = held_out_direct(&data, &p, lambda, &full, i).unwrap();
                assert!((u - u0).abs() < 1e-6 * (1.0 + u0.abs()), "lambda {lambda} fold {i}: {u} vs {u0}");
                assert!((v - v0).abs() < 1e-6 * (1.0 + v0.abs()), "lambda {lambda} fold {i}: {v} vs {v0}");
            }
        }
    }

    #[test]
    fn normalization_and_orthogonality() {
        let (ys, xs) = small_set(30, 1, 0.8);
        let lambda = 1e-4;
        let model = fit_cca(&ys, &xs, Some(lambda), 3).unwrap();
        assert_eq!(model.n_pairs(), 3);
        let (a, b, _) = penalized_covariances(&ys, &xs, lambda);
        for i in 0..3 {
            let (pyi, pxi) = &model.weight_pairs[i];
            assert!((quad(&a, pyi.values(), pyi.values()) - 1.0).abs() < 1e-6);
            assert!((quad(&b, pxi.values(), pxi.values()) - 1.0).abs() < 1e-6);
            for j in 0..i {
                let (pyj, pxj) = &model.weight_pairs[j];
                assert!(quad(&a, pyi.values(), pyj.values()).abs() < 1e-6);
                assert!(quad(&b, pxi.values(), pxj.values()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn correlations_ordered_in_unit_interval() {
        let (ys, xs) = small_set(30, 2, 0.5);
        let model = fit_cca(&ys, &xs, Some(1e-3), 5).unwrap();
        for w in model.correlations.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(model.correlations.iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn roughness_decreases_with_lambda() {
        let (ys, xs) = small_set(30, 4, 0.8);
        let (_, _, p) = penalized_covariances(&ys, &xs, 0.0);
        let mut prev = f64::INFINITY;
        for lambda in cv_lambda_grid::<f64>() {
            let model = fit_cca(&ys, &xs, Some(lambda), 1).unwrap();
            let psi = model.weight_pairs[0].0.values();
            let rough = quad(&p, psi, psi);
            assert!(rough <= prev * (1.0 + 1e-8), "lambda {lambda}: {rough} > {prev}");
            prev = rough;
        }
    }

    #[test]
    fn sample_order_does_not_matter() {
        let (ys, xs) = small_set(20, 5, 0.8);
        let m1 = fit_cca(&ys, &xs, None, 2).unwrap();
        let perm: Vec<usize> = (0..ys.len()).map(|i| (i * 7) % ys.len()).collect();
        let ys2: Vec<_> = perm.iter().map(|&i| ys[i].clone()).collect();
        let xs2: Vec<_> = perm.iter().map(|&i| xs[i].clone()).collect();
        let m2 = fit_cca(&ys2, &xs2, None, 2).unwrap();
        assert_eq!(m1.lambda, m2.lambda);
        for i in 0..2 {
            assert!((m1.correlations[i] - m2.correlations[i]).abs() < 1e-9);
            assert!((m1.slopes[i] - m2.slopes[i]).abs() < 1e-9);
            let d = m1.weight_pairs[i].0.sub(&m2.weight_pairs[i].0).unwrap().norm();
            assert!(d < 1e-6 * m1.weight_pairs[i].0.norm());
        }
    }

    #[test]
    fn canonical_mode_examples() {
        let (ys, xs) = small_set(20, 6, 0.8);
        let model = fit_cca(&ys, &xs, Some(1e-3), 1).unwrap();
        let mean = canonical_mode(&model, 0, 0.0, Some(0.0)).unwrap();
        assert!(mean.sub(&model.mean_amplitude).unwrap().norm() < 1e-12);
        let a = 0.5;
        let pure = canonical_mode(&model, 0, a, Some(0.0)).unwrap();
        let expect = model.mean_amplitude.axpy(a, &model.weight_pairs[0].0).unwrap();
        assert!(pure.sub(&expect).unwrap().norm() < 1e-12);
        assert!(canonical_mode(&model, 3, 1.0, None).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let (ys, xs) = small_set(10, 7, 0.8);
        assert!(fit_cca(&ys[..2], &xs[..2], Some(1e-3), 1).is_err());
        assert!(fit_cca(&ys, &xs[..9], Some(1e-3), 1).is_err());
        assert!(fit_cca(&ys, &xs, Some(-1.0), 1).is_err());
        assert!(fit_cca(&ys, &xs, Some(1e-3), 0).is_err());
    }

    #[test]
    fn too_many_pairs_truncates() {
        let (ys, xs) = small_set(6, 8, 0.8);
        let model = fit_cca(&ys, &xs, Some(0.0), 20).unwrap();
        assert!(model.truncated);
        assert!(model.n_pairs() <= 5);
    }
}
