//! Elastic alignment of curves under the Fisher–Rao metric.
//!
//! Curves are compared through their signed square-root slope transforms.
//! Pairwise warps come from dynamic programming over the grid lattice; the
//! set is aligned to an iterated template and the estimated phases are then
//! centered so they average to zero.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fungeom::{
    geodesic_distance, karcher_mean_sphere, phi, phi_inverse, srvf_of_warp, warp_curve,
    warp_of_srvf, SampledCurve, SrvfPoint, TangentFunction, TimeGrid, WarpingFunction,
    DEFAULT_KARCHER_MAX_ITER, DEFAULT_KARCHER_TOL,
};
use crate::scalar::Scalar;

pub const DEFAULT_ALIGN_TOL: f64 = 1e-4;
pub const DEFAULT_ALIGN_MAX_ITER: usize = 20;

/// Largest step along either lattice axis in the dynamic program.
pub const MAX_STEP: usize = 5;

#[derive(Clone, Debug)]
pub struct AlignmentResult<T: Scalar> {
    /// Amplitude curves `y_i`, with `f_i = y_i ∘ gamma_i`.
    pub aligned: Vec<SampledCurve<T>>,
    /// Phase warps `gamma_i`.
    pub warps: Vec<WarpingFunction<T>>,
    /// Phase functions `phi(gamma_i)`, summing to zero.
    pub phases: Vec<TangentFunction<T>>,
    /// Unit-norm template SRVF.
    pub template: SampledCurve<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// `sign(f') sqrt(|f'|)`.
pub fn curve_srvf<T: Scalar>(f: &SampledCurve<T>) -> SampledCurve<T> {
    f.derivative().map(|d| {
        let r = d.abs().sqrt();
        if d < T::zero() {
            -r
        } else {
            r
        }
    })
}

/// `(q ∘ gamma) sqrt(gamma')` with linear interpolation of `q`.
pub fn srvf_action<T: Scalar>(q: &SampledCurve<T>, gamma: &WarpingFunction<T>) -> Result<SampledCurve<T>> {
    q.grid().check_same(gamma.grid())?;
    let d = gamma.grid().derivative(gamma.values());
    let values = gamma
        .values()
        .iter()
        .zip(d)
        .map(|(&s, g)| q.eval_linear(s) * g.max(T::zero()).sqrt())
        .collect();
    SampledCurve::new(q.grid().clone(), values)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn edges() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 1..=MAX_STEP {
        for b in 1..=MAX_STEP {
            if gcd(a, b) == 1 {
                out.push((a, b));
            }
        }
    }
    out
}

/// Warp `gamma` minimizing `|| q_ref - (q_mov ∘ gamma) sqrt(gamma') ||`
/// over piecewise-linear paths through the grid lattice.
pub fn pairwise_optimal_warp<T: Scalar>(q_ref: &SampledCurve<T>, q_mov: &SampledCurve<T>) -> Result<WarpingFunction<T>> {
    dp_warp(q_ref, q_mov, T::zero()).map(|(w, _)| w)
}

/// As [`pairwise_optimal_warp`] with the added term
/// `penalty * ||q_ref||^2 * ∫ (sqrt(gamma') - 1)^2`.
pub fn pairwise_optimal_warp_penalized<T: Scalar>(
    q_ref: &SampledCurve<T>,
    q_mov: &SampledCurve<T>,
    penalty: T,
) -> Result<WarpingFunction<T>> {
    dp_warp(q_ref, q_mov, penalty).map(|(w, _)| w)
}

/// The optimal warp together with its discretized cost.
pub(crate) fn dp_warp<T: Scalar>(q_ref: &SampledCurve<T>, q_mov: &SampledCurve<T>, penalty: T) -> Result<(WarpingFunction<T>, T)> {
    dp_solve(q_ref, q_mov, penalty, true)
}

fn dp_solve<T: Scalar>(q_ref: &SampledCurve<T>, q_mov: &SampledCurve<T>, penalty: T, fast: bool) -> Result<(WarpingFunction<T>, T)> {
    q_ref.grid().check_same(q_mov.grid())?;
    let pen = penalty * q_ref.norm() * q_ref.norm();
    let grid = q_ref.grid();
    let t = grid.points();
    let k = t.len();
    let qr = q_ref.values();
    let qm = q_mov.values();
    let edges = edges();
    let inf = T::max_value().unwrap_or(T::one() / T::default_epsilon());
    let mut cost = vec![inf; k * k];
    let mut back = vec![u8::MAX; k * k];
    cost[0] = T::zero();
    let half = T::lit(0.5);
    let uniform = if fast { uniform_tables::<T>(t, &edges) } else { None };
    let last = k - 1;
    let mut err2 = [T::zero(); MAX_STEP + 1];
    for i in 1..k {
        // cells outside the slope cone through both corners are unreachable
        let lo = i.div_ceil(MAX_STEP).max(last.saturating_sub(MAX_STEP * (last - i))).max(1);
        let hi = (MAX_STEP * i).min(last - (last - i).div_ceil(MAX_STEP));
        for j in lo..=hi {
            let mut best = inf;
            let mut best_e = u8::MAX;
            for (ei, &(a, b)) in edges.iter().enumerate() {
                if a > i || b > j {
                    continue;
                }
                let (pi, pj) = (i - a, j - b);
                let start = cost[pi * k + pj];
                if start >= inf {
                    continue;
                }
                let c = match &uniform {
                    Some(tab) => {
                        let e = &tab[ei];
                        let mut c = start + pen * e.pen_weight;
                        let mut prev = T::zero();
                        for (l, &(off, w)) in e.points.iter().enumerate() {
                            let seg = pj + off;
                            let v = qm[seg] + w * (qm[seg + 1] - qm[seg]);
                            let d = qr[pi + l] - v * e.sqrt_slope;
                            let cur = d * d;
                            if l > 0 {
                                c += e.half_step * (prev + cur);
                            }
                            prev = cur;
                        }
                        c
                    }
                    None => {
                        let m = (t[j] - t[pj]) / (t[i] - t[pi]);
                        let sm = m.sqrt();
                        let mut seg = pj;
                        for l in 0..=a {
                            let tl = t[pi + l];
                            let s = if l == a { t[j] } else { t[pj] + m * (tl - t[pi]) };
                            while seg + 1 < j && t[seg + 1] <= s {
                                seg += 1;
                            }
                            let w = (s - t[seg]) / (t[seg + 1] - t[seg]);
                            let v = qm[seg] + w * (qm[seg + 1] - qm[seg]);
                            let e = qr[pi + l] - v * sm;
                            err2[l] = e * e;
                        }
                        let mut c = start + pen * (t[i] - t[pi]) * (sm - T::one()) * (sm - T::one());
                        for l in 0..a {
                            c += half * (t[pi + l + 1] - t[pi + l]) * (err2[l] + err2[l + 1]);
                        }
                        c
                    }
                };
                if c < best {
                    best = c;
                    best_e = ei as u8;
                }
            }
            cost[i * k + j] = best;
            back[i * k + j] = best_e;
        }
    }
    // trace the path back from the far corner
    let mut path = vec![(k - 1, k - 1)];
    let (mut i, mut j) = (k - 1, k - 1);
    while i > 0 || j > 0 {
        let e = back[i * k + j];
        if e == u8::MAX {
            return Err(Error::Data("dynamic program found no admissible path".into()));
        }
        let (a, b) = edges[e as usize];
        i -= a;
        j -= b;
        path.push((i, j));
    }
    path.reverse();
    let mut gamma = vec![T::zero(); k];
    for w in path.windows(2) {
        let ((pi, pj), (i, j)) = (w[0], w[1]);
        let m = (t[j] - t[pj]) / (t[i] - t[pi]);
        gamma[pi] = t[pj];
        for l in pi + 1..i {
            gamma[l] = t[pj] + m * (t[l] - t[pi]);
        }
    }
    gamma[k - 1] = T::one();
    let total = cost[k * k - 1];
    Ok((WarpingFunction::new(grid.clone(), gamma)?, total))
}

/// Interpolation positions along one edge of a uniform lattice.
struct EdgeTable<T> {
    sqrt_slope: T,
    half_step: T,
    pen_weight: T,
    /// `(segment offset from the edge start, weight)` for each reference node.
    points: Vec<(usize, T)>,
}

fn uniform_tables<T: Scalar>(t: &[T], edges: &[(usize, usize)]) -> Option<Vec<EdgeTable<T>>> {
    let k = t.len();
    let h = (t[k - 1] - t[0]) / T::from_count(k - 1);
    let tol = h * T::lit(1e-9);
    if t.windows(2).any(|p| (p[1] - p[0] - h).abs() > tol) {
        return None;
    }
    Some(
        edges
            .iter()
            .map(|&(a, b)| {
                let sm = (T::from_count(b) / T::from_count(a)).sqrt();
                let points = (0..=a)
                    .map(|l| {
                        let off = l * b / a;
                        if off == b {
                            (b - 1, T::one())
                        } else {
                            (off, T::from_count(l * b - off * a) / T::from_count(a))
                        }
                    })
                    .collect();
                EdgeTable {
                    sqrt_slope: sm,
                    half_step: T::lit(0.5) * h,
                    pen_weight: T::from_count(a) * h * (sm - T::one()) * (sm - T::one()),
                    points,
                }
            })
            .collect(),
    )
}

fn unit_or_none<T: Scalar>(q: &SampledCurve<T>) -> Option<SampledCurve<T>> {
    let n = q.norm();
    if n > T::default_epsilon().sqrt() {
        Some(q.scale(T::one() / n))
    } else {
        None
    }
}

fn spherical_mean<T: Scalar>(points: &[SampledCurve<T>]) -> Result<SampledCurve<T>> {
    match karcher_mean_sphere(points, T::lit(DEFAULT_KARCHER_TOL), DEFAULT_KARCHER_MAX_ITER) {
        Ok(m) => Ok(m),
        Err(e) => {
            log::warn!("template Karcher mean failed ({e}); using the normalized extrinsic mean");
            let m = SampledCurve::mean(points)?;
            unit_or_none(&m).ok_or_else(|| Error::Data("aligned SRVFs average to zero".into()))
        }
    }
}

/// Relative weight of the straight-path term in the dynamic program; see
/// [`pairwise_optimal_warp_penalized`].
pub const DEFAULT_WARP_PENALTY: f64 = 0.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignOptions<T: Scalar> {
    /// Stop when the template moves less than this geodesic distance.
    pub tol: T,
    pub max_iter: usize,
    pub penalty: T,
}

impl<T: Scalar> Default for AlignOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_ALIGN_TOL),
            max_iter: DEFAULT_ALIGN_MAX_ITER,
            penalty: T::lit(DEFAULT_WARP_PENALTY),
        }
    }
}

/// Aligns a set of curves sharing one grid.
pub fn align_set<T: Scalar>(curves: &[SampledCurve<T>], tol: T, max_iter: usize) -> Result<AlignmentResult<T>> {
    align_set_with(
        curves,
        &AlignOptions {
            tol,
            max_iter,
            ..AlignOptions::default()
        },
    )
}

pub fn align_set_with<T: Scalar>(curves: &[SampledCurve<T>], opts: &AlignOptions<T>) -> Result<AlignmentResult<T>> {
    let (tol, max_iter) = (opts.tol, opts.max_iter);
    if curves.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: curves.len() });
    }
    let grid = curves[0].grid().clone();
    for c in curves {
        grid.check_same(c.grid())?;
    }
    let srvfs: Vec<SampledCurve<T>> = curves.iter().map(curve_srvf).collect();
    let mut template = curve_srvf(&SampledCurve::mean(curves)?);
    let mut dp: Vec<WarpingFunction<T>> = vec![WarpingFunction::identity(&grid); curves.len()];
    let mut iterations = 0;
    let mut converged = false;
    if unit_or_none(&template).is_none() {
        // flat data: nothing to align against
        converged = true;
    }
    while !converged && iterations < max_iter {
        iterations += 1;
        let tref = &template;
        dp = srvfs
            .par_iter()
            .map(|q| dp_warp(tref, q, opts.penalty).map(|(w, _)| w))
            .collect::<Result<Vec<_>>>()?;
        // right-compose with the inverse mean warp so the template cannot drift
        if let Some(inv) = mean_warp(&dp).map(|m| m.inverse()) {
            dp = dp.iter().map(|g| g.compose(&inv).unwrap_or_else(|_| g.clone())).collect();
        }
        let moved: Vec<SampledCurve<T>> = srvfs
            .iter()
            .zip(&dp)
            .map(|(q, g)| srvf_action(q, g))
            .collect::<Result<_>>()?;
        let norms: Vec<T> = moved.iter().map(|q| q.norm()).collect();
        let units: Vec<SampledCurve<T>> = moved.iter().filter_map(unit_or_none).collect();
        if units.is_empty() {
            converged = true;
            break;
        }
        let mean_norm = norms.iter().fold(T::zero(), |a, b| a + *b) / T::from_count(norms.len());
        let next = spherical_mean(&units)?.scale(mean_norm);
        let movement: T = match (unit_or_none(&template), unit_or_none(&next)) {
            (Some(a), Some(b)) => geodesic_distance(&a, &b)?,
            _ => T::zero(),
        };
        template = next;
        log::debug!("alignment iteration {iterations}: template moved {}", movement.as_f64());
        if movement < tol {
            converged = true;
        }
    }
    if !converged {
        log::warn!("alignment did not converge in {max_iter} iterations");
    }
    let warps: Vec<WarpingFunction<T>> = dp.iter().map(|g| g.inverse()).collect();
    let warps = center_warps(warps);
    let (warps, phases) = center_phases(&warps)?;
    let aligned = curves
        .iter()
        .zip(&warps)
        .map(|(f, g)| warp_curve(f, &g.inverse()))
        .collect();
    let template = unit_or_none(&template).unwrap_or_else(|| SampledCurve::zeros(&grid));
    Ok(AlignmentResult {
        aligned,
        warps,
        phases,
        template,
        iterations,
        converged,
    })
}

/// First centering stage: composes each warp with the inverse of the Karcher
/// mean warp. Left unchanged if the mean is not a valid warp.
fn center_warps<T: Scalar>(warps: Vec<WarpingFunction<T>>) -> Vec<WarpingFunction<T>> {
    let Some(mean) = mean_warp(&warps) else {
        return warps;
    };
    let inv = mean.inverse();
    warps
        .iter()
        .map(|g| inv.compose(g).unwrap_or_else(|_| g.clone()))
        .collect()
}

/// Karcher mean of warps through their square-root derivatives.
fn mean_warp<T: Scalar>(warps: &[WarpingFunction<T>]) -> Option<WarpingFunction<T>> {
    let psi: Vec<SampledCurve<T>> = warps.iter().map(|g| srvf_of_warp(g).as_curve().clone()).collect();
    karcher_mean_sphere(&psi, T::lit(DEFAULT_KARCHER_TOL), DEFAULT_KARCHER_MAX_ITER)
        .and_then(SrvfPoint::new)
        .ok()
        .map(|m| warp_of_srvf(&m))
}

/// Second centering stage: exact zero mean in the tangent space.
fn center_phases<T: Scalar>(warps: &[WarpingFunction<T>]) -> Result<(Vec<WarpingFunction<T>>, Vec<TangentFunction<T>>)> {
    let raw: Vec<SampledCurve<T>> = warps.iter().map(|g| phi(g).map(TangentFunction::into_curve)).collect::<Result<_>>()?;
    let mean = SampledCurve::mean(&raw)?;
    let phases: Vec<TangentFunction<T>> = raw
        .iter()
        .map(|x| TangentFunction::project(&x.sub(&mean).expect("shared grid")))
        .collect();
    match phases.iter().map(phi_inverse).collect::<Result<Vec<_>>>() {
        Ok(centered) => Ok((centered, phases)),
        Err(e) => {
            log::warn!("tangent centering left the warp domain ({e}); keeping the first-stage warps");
            let phases = warps.iter().map(phi).collect::<Result<_>>()?;
            Ok((warps.to_vec(), phases))
        }
    }
}

/// Sum over the grid of the cross-sectional variance of a set of curves.
pub fn total_pointwise_variance<T: Scalar>(curves: &[SampledCurve<T>]) -> Result<T> {
    let mean = SampledCurve::mean(curves)?;
    let n = T::from_count(curves.len());
    let mut total = T::zero();
    for c in curves {
        for (a, m) in c.values().iter().zip(mean.values()) {
            total += (*a - *m) * (*a - *m);
        }
    }
    Ok(total / n)
}

/// Aligns on a fresh uniform grid; convenience for callers holding raw
/// value vectors.
pub fn align_values<T: Scalar>(values: &[Vec<T>], tol: T, max_iter: usize) -> Result<AlignmentResult<T>> {
    let k = values.first().map(Vec::len).ok_or(Error::TooFewSamples { need: 2, got: 0 })?;
    let grid = TimeGrid::uniform(k)?;
    let curves = values
        .iter()
        .map(|v| SampledCurve::new(grid.clone(), v.clone()))
        .collect::<Result<Vec<_>>>()?;
    align_set(&curves, tol, max_iter)
}
