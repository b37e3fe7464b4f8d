//! Unit sphere of `L2[0,1]`: geodesic distance, log and exp maps, Karcher mean.

use super::grid::SampledCurve;
use super::warp::TangentFunction;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Below this the `d / sin d` and `sin r / r` factors are replaced by one.
pub const SINGULAR_CUTOFF: f64 = 1e-10;

pub const DEFAULT_KARCHER_TOL: f64 = 1e-9;
pub const DEFAULT_KARCHER_MAX_ITER: usize = 100;

fn unit_tol<T: Scalar>() -> T {
    T::lit(1e-6).max(T::default_epsilon().sqrt() * T::lit(10.0))
}

fn check_unit<T: Scalar>(f: &SampledCurve<T>) -> Result<()> {
    let n = f.norm();
    if (n - T::one()).abs() > unit_tol::<T>() {
        return Err(Error::NotUnitNorm { norm: n.as_f64() });
    }
    Ok(())
}

/// Arc length `acos <a, b>` between two unit-norm functions.
pub fn geodesic_distance<T: Scalar>(a: &SampledCurve<T>, b: &SampledCurve<T>) -> Result<T> {
    let ip = a.inner(b)?;
    Ok(ip.clamp(-T::one(), T::one()).acos())
}

/// Inverse exponential map at `mu`; requires `d(q, mu) < pi/2`.
pub fn log_map<T: Scalar>(q: &SampledCurve<T>, mu: &SampledCurve<T>) -> Result<TangentFunction<T>> {
    let d = geodesic_distance(q, mu)?;
    check_unit(q)?;
    check_unit(mu)?;
    if d >= T::frac_pi_2() - T::lit(1e-6) {
        return Err(Error::LogDomain { distance: d.as_f64() });
    }
    Ok(TangentFunction::unchecked(log_unchecked(q, mu, d)))
}

fn log_unchecked<T: Scalar>(q: &SampledCurve<T>, mu: &SampledCurve<T>, d: T) -> SampledCurve<T> {
    if d < T::lit(SINGULAR_CUTOFF) {
        return SampledCurve::zeros(q.grid());
    }
    let factor = d / d.sin();
    let c = d.cos();
    let values = q
        .values()
        .iter()
        .zip(mu.values())
        .map(|(&a, &m)| factor * (a - c * m))
        .collect();
    SampledCurve::from_parts(q.grid().clone(), values)
}

/// Exponential map at `mu` of a tangent vector orthogonal to `mu`.
pub fn exp_map<T: Scalar>(x: &TangentFunction<T>, mu: &SampledCurve<T>) -> Result<SampledCurve<T>> {
    let x = x.as_curve();
    x.grid().check_same(mu.grid())?;
    debug_assert!(
        x.inner(mu)?.abs() <= T::lit(1e-6).max(T::default_epsilon().sqrt()),
        "exp_map argument not tangent at the base point"
    );
    let r = x.norm();
    if r < T::lit(SINGULAR_CUTOFF) {
        return Ok(mu.clone());
    }
    let s = r.sin() / r;
    let c = r.cos();
    let values = x
        .values()
        .iter()
        .zip(mu.values())
        .map(|(&v, &m)| s * v + c * m)
        .collect();
    Ok(SampledCurve::from_parts(x.grid().clone(), values))
}

fn normalized<T: Scalar>(f: SampledCurve<T>) -> SampledCurve<T> {
    let n = f.norm();
    f.scale(T::one() / n)
}

/// Intrinsic (Karcher) mean on the unit sphere by fixed-point iteration in the
/// tangent space, started at the normalized extrinsic mean.
pub fn karcher_mean_sphere<T: Scalar>(
    points: &[SampledCurve<T>],
    tol: T,
    max_iter: usize,
) -> Result<SampledCurve<T>> {
    let extrinsic = SampledCurve::mean(points)?;
    if extrinsic.norm() <= T::default_epsilon() {
        return Err(Error::Data("points average to zero; mean undefined".into()));
    }
    let mut mu = normalized(extrinsic);
    let n = T::from_count(points.len());
    let mut norm = T::zero();
    for _ in 0..=max_iter {
        let mut acc = vec![T::zero(); mu.len()];
        for p in points {
            let v = log_map(p, &mu)?;
            for (a, x) in acc.iter_mut().zip(v.as_curve().values()) {
                *a += *x;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        let step = SampledCurve::from_parts(mu.grid().clone(), acc);
        norm = step.norm();
        if norm < tol {
            return Ok(mu);
        }
        mu = normalized(exp_map(&TangentFunction::unchecked(step), &mu)?);
    }
    Err(Error::KarcherNotConverged {
        norm: norm.as_f64(),
        iterations: max_iter,
    })
}
