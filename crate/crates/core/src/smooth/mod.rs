//! Penalized B-spline smoothing of discretely observed curves.
//!
//! Knots sit at the observation times; the roughness penalty is the squared
//! L2 norm of a derivative of the spline. The smoothing parameter is chosen by
//! generalized cross-validation unless supplied.
//!
//! For a fixed set of observation times the fit is reduced once to a
//! diagonal form: the penalty null space (polynomials below the penalty
//! order) is handled by ordinary least squares and the penalized complement
//! by a generalized eigen-decomposition, so each candidate smoothing
//! parameter costs a couple of matrix-vector products.

pub mod bspline;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fungeom::{SampledCurve, TimeGrid};
use crate::linalg::{sym_eigen_desc, symmetrize};
use crate::optim::golden_section;
use crate::scalar::Scalar;

pub const DEFAULT_DEGREE: usize = 4;
pub const DEFAULT_PENALTY_ORDER: usize = 2;

/// Candidate grid for the GCV search: `10^-10 ..= 10^2`, 41 points.
pub const GCV_LOG10_RANGE: (f64, f64) = (-10.0, 2.0);
pub const GCV_GRID_POINTS: usize = 41;

/// Discrete observations of one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord<T: Scalar> {
    pub id: String,
    pub times: Vec<T>,
    pub observations: Vec<T>,
}

impl<T: Scalar> RawRecord<T> {
    pub fn new(id: impl Into<String>, times: Vec<T>, observations: Vec<T>) -> Result<Self> {
        if times.len() != observations.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                got: observations.len(),
            });
        }
        if let Some(t) = times.iter().find(|t| !(**t >= T::zero() && **t <= T::one())) {
            return Err(Error::Data(format!("observation time {} outside [0, 1]", t.as_f64())));
        }
        Ok(Self {
            id: id.into(),
            times,
            observations,
        })
    }

    /// Sorted distinct times with observations averaged over ties.
    pub fn deduplicated(&self) -> (Vec<T>, Vec<T>) {
        let mut pairs: Vec<(T, T)> = self.times.iter().copied().zip(self.observations.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut times: Vec<T> = Vec::with_capacity(pairs.len());
        let mut obs: Vec<T> = Vec::with_capacity(pairs.len());
        let mut counts: Vec<usize> = Vec::new();
        for (t, y) in pairs {
            if times.last() == Some(&t) {
                let i = times.len() - 1;
                obs[i] += y;
                counts[i] += 1;
            } else {
                times.push(t);
                obs.push(y);
                counts.push(1);
            }
        }
        for (o, c) in obs.iter_mut().zip(&counts) {
            *o /= T::from_count(*c);
        }
        (times, obs)
    }
}

/// Fitted spline: clamped knots, polynomial degree, coefficients and the
/// smoothing parameter used.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothCurve<T: Scalar> {
    pub knots: Vec<T>,
    pub degree: usize,
    pub coefficients: Vec<T>,
    pub selected_lambda: T,
    /// GCV score at `selected_lambda` (NaN when lambda was supplied).
    pub gcv: T,
}

impl<T: Scalar> SmoothCurve<T> {
    pub fn eval(&self, x: T, deriv_order: usize) -> Result<T> {
        if deriv_order >= self.degree {
            return Err(Error::DerivativeOrder {
                order: deriv_order,
                degree: self.degree,
            });
        }
        let c = DVector::from_column_slice(&self.coefficients);
        Ok(bspline::eval_spline(&self.knots, self.degree, &c, x, deriv_order))
    }
}

/// Evaluates a derivative of the fitted spline on a grid.
pub fn eval_curve<T: Scalar>(curve: &SmoothCurve<T>, grid: &TimeGrid<T>, deriv_order: usize) -> Result<SampledCurve<T>> {
    if deriv_order >= curve.degree {
        return Err(Error::DerivativeOrder {
            order: deriv_order,
            degree: curve.degree,
        });
    }
    let b = bspline::collocation(&curve.knots, curve.degree, grid.points(), deriv_order);
    let v = b * DVector::from_column_slice(&curve.coefficients);
    SampledCurve::new(grid.clone(), v.iter().copied().collect())
}

/// Penalized least squares with GCV selection (see the module docs).
pub fn fit_smooth<T: Scalar>(
    record: &RawRecord<T>,
    degree: usize,
    penalty_order: usize,
    lambda: Option<T>,
) -> Result<SmoothCurve<T>> {
    let (times, obs) = record.deduplicated();
    let smoother = Smoother::new(&times, degree, penalty_order)?;
    smoother.fit(&obs, lambda)
}

/// Precomputed smoother for one set of distinct observation times.
pub struct Smoother<T: Scalar> {
    times: Vec<T>,
    knots: Vec<T>,
    degree: usize,
    // orthonormal basis of the unpenalized fitted space and its coefficient map
    qx: DMatrix<T>,
    rx: DMatrix<T>,
    null_basis: DMatrix<T>,
    complement: DMatrix<T>,
    z: DMatrix<T>,
    // penalized part in diagonal form
    g: DMatrix<T>,
    e: Vec<T>,
    back: DMatrix<T>,
}

impl<T: Scalar> Smoother<T> {
    /// `times` must be sorted and distinct.
    pub fn new(times: &[T], degree: usize, penalty_order: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidParameter("spline degree must be at least 1".into()));
        }
        if penalty_order < 1 || penalty_order > degree {
            return Err(Error::InvalidParameter(format!(
                "penalty order {penalty_order} must lie in 1..={degree}"
            )));
        }
        let n = times.len();
        if n < degree + 2 {
            return Err(Error::TooFewPoints { need: degree + 2, got: n });
        }
        if let Some(i) = (1..n).find(|&i| times[i] <= times[i - 1]) {
            return Err(Error::Data(format!("observation times not strictly increasing at {i}")));
        }
        let mut breaks = Vec::with_capacity(n + 2);
        if times[0] > T::zero() {
            breaks.push(T::zero());
        }
        breaks.extend_from_slice(times);
        if times[n - 1] < T::one() {
            breaks.push(T::one());
        }
        let knots = bspline::clamped_knots(&breaks, degree);
        let p = bspline::basis_count(knots.len(), degree);
        let r = penalty_order;

        let b = bspline::collocation(&knots, degree, times, 0);
        let pen = bspline::derivative_gram(&knots, degree, penalty_order);

        // penalty null space and its orthogonal complement in coefficient space
        let null_raw = bspline::monomial_coefficients(&knots, degree, r);
        let null_basis = null_raw.clone().qr().q();
        let mut proj = DMatrix::<T>::identity(p, p) - &null_basis * null_basis.transpose();
        symmetrize(&mut proj);
        let (_, vecs) = sym_eigen_desc(proj);
        let complement = vecs.columns(0, p - r).into_owned();

        let x = &b * &null_basis;
        let qr = x.qr();
        let qx = qr.q();
        let rx = qr.r();
        if (0..r).any(|i| rx[(i, i)].abs() <= T::default_epsilon() * T::lit(1e3)) {
            return Err(Error::Singular("polynomial part not identifiable from the observation times".into()));
        }
        let z = &b * &complement;
        let z_tilde = &z - &qx * (qx.transpose() * &z);

        let mut s = complement.transpose() * &pen * &complement;
        symmetrize(&mut s);
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::Singular("penalty is not positive definite off its null space".into()))?;
        let l = chol.l();
        // K = L^{-1} Z~^T Z~ L^{-T}
        let zt_l = l
            .solve_lower_triangular(&z_tilde.transpose())
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let mut k = &zt_l * zt_l.transpose();
        symmetrize(&mut k);
        let (e, u) = sym_eigen_desc(k);
        let e: Vec<T> = e.into_iter().map(|v| v.max(T::zero())).collect();
        let g = zt_l.transpose() * &u;
        // L^{-T} U maps diagonal coordinates back to complement coefficients
        let back = l
            .transpose()
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;

        Ok(Self {
            times: times.to_vec(),
            knots,
            degree,
            qx,
            rx,
            null_basis,
            complement,
            z,
            g,
            e,
            back,
        })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Fits one curve; selects lambda by GCV when not given.
    pub fn fit(&self, obs: &[T], lambda: Option<T>) -> Result<SmoothCurve<T>> {
        if obs.len() != self.times.len() {
            return Err(Error::LengthMismatch {
                expected: self.times.len(),
                got: obs.len(),
            });
        }
        let y = DVector::from_column_slice(obs);
        let qty = self.qx.transpose() * &y;
        let fixed = &self.qx * &qty;
        let gty = self.g.transpose() * &y;
        let (lam, gcv) = match lambda {
            Some(l) if l > T::zero() => (l, T::lit(f64::NAN)),
            Some(_) => return Err(Error::InvalidParameter("smoothing parameter must be positive".into())),
            None => self.select_lambda(&y, &fixed, &gty),
        };
        let weights = DVector::from_iterator(gty.len(), gty.iter().zip(&self.e).map(|(a, e)| *a / (*e + lam)));
        let beta_c = &self.back * &weights;
        let resid = &y - &self.z * &beta_c;
        let alpha = self
            .rx
            .clone()
            .solve_upper_triangular(&(self.qx.transpose() * resid))
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let coefs = &self.null_basis * alpha + &self.complement * beta_c;
        Ok(SmoothCurve {
            knots: self.knots.clone(),
            degree: self.degree,
            coefficients: coefs.iter().copied().collect(),
            selected_lambda: lam,
            gcv,
        })
    }

    /// Craven–Wahba GCV score `n RSS / (n - tr H)^2`.
    pub fn gcv(&self, obs: &[T], lambda: T) -> T {
        let y = DVector::from_column_slice(obs);
        let fixed = &self.qx * (self.qx.transpose() * &y);
        let gty = self.g.transpose() * &y;
        self.gcv_score(&y, &fixed, &gty, lambda)
    }

    /// Trace of the hat matrix (effective degrees of freedom).
    pub fn effective_df(&self, lambda: T) -> T {
        let r = T::from_count(self.qx.ncols());
        self.e.iter().fold(r, |acc, e| acc + *e / (*e + lambda))
    }

    fn gcv_score(&self, y: &DVector<T>, fixed: &DVector<T>, gty: &DVector<T>, lambda: T) -> T {
        let n = T::from_count(y.len());
        let w = DVector::from_iterator(gty.len(), gty.iter().zip(&self.e).map(|(a, e)| *a / (*e + lambda)));
        let fitted = fixed + &self.g * w;
        let rss = (y - fitted).norm_squared();
        let denom = n - self.effective_df(lambda);
        if denom <= T::lit(1e-8) * n {
            return T::max_value().unwrap_or(T::one() / T::default_epsilon());
        }
        n * rss / (denom * denom)
    }

    fn select_lambda(&self, y: &DVector<T>, fixed: &DVector<T>, gty: &DVector<T>) -> (T, T) {
        let (lo, hi) = GCV_LOG10_RANGE;
        let step = (hi - lo) / (GCV_GRID_POINTS - 1) as f64;
        let ten = T::lit(10.0);
        let score = |log_l: f64| self.gcv_score(y, fixed, gty, ten.powf(T::lit(log_l)));
        let scan: Vec<(f64, T)> = (0..GCV_GRID_POINTS)
            .map(|i| {
                let l = lo + step * i as f64;
                (l, score(l))
            })
            .collect();
        let mut best = scan[0];
        let mut best_i = 0;
        for (i, s) in scan.iter().enumerate() {
            if s.1 < best.1 {
                best = *s;
                best_i = i;
            }
        }
        let a = scan[best_i.saturating_sub(1)].0;
        let b = scan[(best_i + 1).min(GCV_GRID_POINTS - 1)].0;
        let refined = golden_section(a, b, 1e-3, |l| score(l).as_f64());
        let s = score(refined);
        if s < best.1 {
            best = (refined, s);
        }
        (ten.powf(T::lit(best.0)), best.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn uniform_times(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn straight_line_is_reproduced_for_any_lambda() {
        let t = uniform_times(30);
        let y: Vec<f64> = t.iter().map(|t| 1.5 - 2.0 * t).collect();
        let s = Smoother::new(&t, 4, 2).unwrap();
        for lam in [1e-8, 1e-2, 1e3, 1e6] {
            let c = s.fit(&y, Some(lam)).unwrap();
            for (ti, yi) in t.iter().zip(&y) {
                assert!((c.eval(*ti, 0).unwrap() - yi).abs() < 1e-8, "lambda {lam}");
            }
        }
        let c = s.fit(&y, None).unwrap();
        let g = TimeGrid::uniform(11).unwrap();
        let d2 = eval_curve(&c, &g, 2).unwrap();
        assert!(d2.values().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn large_lambda_converges_to_least_squares_line() {
        let t = uniform_times(101);
        let y: Vec<f64> = t.iter().map(|t| (3.0 * t).sin() + t * t).collect();
        let s = Smoother::new(&t, 4, 2).unwrap();
        let c = s.fit(&y, Some(1e6)).unwrap();
        // least squares line through the data
        let n = t.len() as f64;
        let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - mt) * (b - my)).sum();
        let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
        let slope = sxy / sxx;
        let worst = t
            .iter()
            .map(|ti| (c.eval(*ti, 0).unwrap() - (my + slope * (ti - mt))).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "max deviation {worst}");
    }

    #[test]
    fn smoother_is_linear_in_observations() {
        let t = uniform_times(40);
        let y1: Vec<f64> = t.iter().map(|t| (5.0 * t).cos()).collect();
        let y2: Vec<f64> = t.iter().map(|t| t.powi(3) - t).collect();
        let s = Smoother::new(&t, 4, 2).unwrap();
        let (a, b) = (2.0, -0.7);
        let mix: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
        let c1 = s.fit(&y1, Some(1e-5)).unwrap().coefficients;
        let c2 = s.fit(&y2, Some(1e-5)).unwrap().coefficients;
        let cm = s.fit(&mix, Some(1e-5)).unwrap().coefficients;
        for i in 0..cm.len() {
            assert!((cm[i] - (a * c1[i] + b * c2[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn selected_lambda_minimizes_gcv_over_scan() {
        let t = uniform_times(101);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let y: Vec<f64> = t
            .iter()
            .map(|t| (2.0 * std::f64::consts::PI * t).sin() + noise.sample(&mut rng))
            .collect();
        let s = Smoother::new(&t, 4, 2).unwrap();
        let c = s.fit(&y, None).unwrap();
        for i in 0..GCV_GRID_POINTS {
            let l = 10f64.powf(-10.0 + 0.3 * i as f64);
            assert!(c.gcv <= s.gcv(&y, l) + 1e-12);
        }
        assert!((s.gcv(&y, c.selected_lambda) - c.gcv).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_dense_square() {
        let t = uniform_times(201);
        let y: Vec<f64> = t.iter().map(|t| t * t).collect();
        let rec = RawRecord::new("sq", t.clone(), y).unwrap();
        let c = fit_smooth(&rec, 4, 2, None).unwrap();
        let g = TimeGrid::uniform(101).unwrap();
        let d = eval_curve(&c, &g, 1).unwrap();
        for (ti, v) in g.points().iter().zip(d.values()) {
            if *ti >= 0.05 && *ti <= 0.95 {
                assert!((v - 2.0 * ti).abs() < 1e-3, "t={ti} got {v}");
            }
        }
    }

    #[test]
    fn errors() {
        let rec = RawRecord::new("a", vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(fit_smooth(&rec, 4, 2, None), Err(Error::TooFewPoints { .. })));
        assert!(RawRecord::new("b", vec![0.0, 1.5], vec![1.0, 2.0]).is_err());
        let t = uniform_times(20);
        let y = vec![0.0; 20];
        let c = Smoother::new(&t, 4, 2).unwrap().fit(&y, Some(1.0)).unwrap();
        let g = TimeGrid::uniform(11).unwrap();
        assert!(matches!(eval_curve(&c, &g, 4), Err(Error::DerivativeOrder { .. })));
    }

    #[test]
    fn duplicate_times_are_averaged() {
        let rec = RawRecord::new("d", vec![0.5, 0.0, 0.5, 1.0], vec![1.0, 0.0, 3.0, 4.0]).unwrap();
        let (t, y) = rec.deduplicated();
        assert_eq!(t, vec![0.0, 0.5, 1.0]);
        assert_eq!(y, vec![0.0, 2.0, 4.0]);
    }
}
