//! Combined principal component analysis of amplitude and phase.
//!
//! Each sample is represented by its amplitude values followed by `C` times
//! its phase values (a vector of length `2k`). Principal components of these
//! glued vectors are computed with the plain Euclidean inner product of grid
//! values and a `1/(n-1)` covariance, so eigenvalues are score variances.
//! Reconstructions are mapped back to the original function space by
//! composing the amplitude part with the warp of the phase part.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fungeom::{compose_amplitude_phase, SampledCurve, TangentFunction, TimeGrid};
use crate::linalg::{sym_eigen_desc, thin_svd};
use crate::optim::golden_section;
use crate::scalar::Scalar;

/// Search range for `log10 C`.
pub const LOG10_C_RANGE: (f64, f64) = (-3.0, 3.0);
pub const C_SCAN_POINTS: usize = 25;
pub const DEFAULT_M: usize = 2;

/// Amplitude values followed by `C` times the phase values.
#[derive(Clone, Debug, PartialEq)]
pub struct GluedSample<T: Scalar> {
    pub values: Vec<T>,
    pub scale_c: T,
}

fn check_c<T: Scalar>(c: T) -> Result<()> {
    if c > T::zero() && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("scale C must be positive, got {}", c.as_f64())))
    }
}

pub fn glue<T: Scalar>(y: &SampledCurve<T>, x: &TangentFunction<T>, c: T) -> Result<GluedSample<T>> {
    check_c(c)?;
    y.grid().check_same(x.grid())?;
    let mut values = y.values().to_vec();
    values.extend(x.values().iter().map(|v| *v * c));
    Ok(GluedSample { values, scale_c: c })
}

/// Splits a glued vector into amplitude and phase (undoing the scale).
pub fn unglue<T: Scalar>(grid: &TimeGrid<T>, values: &[T], c: T) -> Result<(SampledCurve<T>, TangentFunction<T>)> {
    let k = grid.len();
    if values.len() != 2 * k {
        return Err(Error::LengthMismatch {
            expected: 2 * k,
            got: values.len(),
        });
    }
    let y = SampledCurve::new(grid.clone(), values[..k].to_vec())?;
    let x = SampledCurve::new(grid.clone(), values[k..].iter().map(|v| *v / c).collect())?;
    Ok((y, TangentFunction::project(&x)))
}

/// Eigen-decomposition of the glued sample covariance at a fixed `C`.
#[derive(Clone, Debug)]
pub struct CombinedEigenModel<T: Scalar> {
    pub grid: TimeGrid<T>,
    pub scale_c: T,
    /// Glued sample mean (length `2k`).
    pub mean: Vec<T>,
    /// Nonincreasing.
    pub eigenvalues: Vec<T>,
    /// Orthonormal columns of length `2k`.
    pub eigenfunctions: DMatrix<T>,
    /// `n x r` matrix of scores on the eigenfunctions.
    pub scores: DMatrix<T>,
}

impl<T: Scalar> CombinedEigenModel<T> {
    pub fn n_samples(&self) -> usize {
        self.scores.nrows()
    }

    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenfunction(&self, j: usize) -> Vec<T> {
        self.eigenfunctions.column(j).iter().copied().collect()
    }

    /// Glued reconstruction of sample `i` from its first `m` scores.
    pub fn reconstruct_glued(&self, i: usize, m: usize) -> Vec<T> {
        let mut g = self.mean.clone();
        for j in 0..m.min(self.n_components()) {
            let s = self.scores[(i, j)];
            for (v, e) in g.iter_mut().zip(self.eigenfunctions.column(j).iter()) {
                *v += s * *e;
            }
        }
        g
    }

    /// Amplitude and phase parts of the glued mean.
    pub fn mean_parts(&self) -> Result<(SampledCurve<T>, TangentFunction<T>)> {
        unglue(&self.grid, &self.mean, self.scale_c)
    }
}

fn check_inputs<T: Scalar>(ys: &[SampledCurve<T>], xs: &[TangentFunction<T>]) -> Result<TimeGrid<T>> {
    if ys.len() != xs.len() {
        return Err(Error::LengthMismatch {
            expected: ys.len(),
            got: xs.len(),
        });
    }
    if ys.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: ys.len() });
    }
    let grid = ys[0].grid().clone();
    for (y, x) in ys.iter().zip(xs) {
        grid.check_same(y.grid())?;
        grid.check_same(x.grid())?;
    }
    Ok(grid)
}

/// Rows are samples; columns are the `k` grid values of each curve.
pub(crate) fn row_matrix<T: Scalar>(curves: &[&[T]]) -> DMatrix<T> {
    let k = curves.first().map_or(0, |c| c.len());
    DMatrix::from_fn(curves.len(), k, |i, j| curves[i][j])
}

/// Column means and the centered matrix.
pub(crate) fn center_rows<T: Scalar>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let n = T::from_count(m.nrows());
    let mean: Vec<T> = m.column_iter().map(|c| c.sum() / n).collect();
    let mut c = m.clone();
    for (j, mu) in mean.iter().enumerate() {
        c.column_mut(j).add_scalar_mut(-*mu);
    }
    (mean, c)
}

/// Principal components of the glued samples at scale `c`.
pub fn fit_eigen<T: Scalar>(ys: &[SampledCurve<T>], xs: &[TangentFunction<T>], c: T) -> Result<CombinedEigenModel<T>> {
    check_c(c)?;
    let grid = check_inputs(ys, xs)?;
    let n = ys.len();
    let glued: Vec<Vec<T>> = ys
        .iter()
        .zip(xs)
        .map(|(y, x)| glue(y, x, c).map(|g| g.values))
        .collect::<Result<_>>()?;
    let rows: Vec<&[T]> = glued.iter().map(Vec::as_slice).collect();
    let (mean, centered) = center_rows(&row_matrix(&rows));
    let svd = thin_svd(centered.clone())?;
    let r = (n - 1).min(svd.s.len());
    let denom = T::from_count(n - 1);
    let eigenvalues = svd.s[..r].iter().map(|s| *s * *s / denom).collect();
    let eigenfunctions = svd.v.columns(0, r).into_owned();
    let scores = &centered * &eigenfunctions;
    Ok(CombinedEigenModel {
        grid,
        scale_c: c,
        mean,
        eigenvalues,
        eigenfunctions,
        scores,
    })
}

/// Reconstruction of sample `i` in the original function space from the first
/// `m` combined components.
pub fn project_am<T: Scalar>(model: &CombinedEigenModel<T>, i: usize, m: usize) -> Result<SampledCurve<T>> {
    if m == 0 || m > model.n_components() {
        return Err(Error::InvalidParameter(format!(
            "m = {m} outside 1..={}",
            model.n_components()
        )));
    }
    if i >= model.n_samples() {
        return Err(Error::InvalidParameter(format!("sample index {i} out of range")));
    }
    let g = model.reconstruct_glued(i, m);
    let (y, x) = unglue(&model.grid, &g, model.scale_c)?;
    compose_amplitude_phase(&y, &x).map_err(|e| Error::Projection {
        sample: i,
        m,
        source: Box::new(e),
    })
}

/// Curve obtained by moving `z` standard deviations along component `j`.
pub fn mode_of_variation<T: Scalar>(model: &CombinedEigenModel<T>, j: usize, z: T) -> Result<SampledCurve<T>> {
    if j >= model.n_components() {
        return Err(Error::InvalidParameter(format!("component {j} out of range")));
    }
    let s = z * model.eigenvalues[j].max(T::zero()).sqrt();
    let g: Vec<T> = model
        .mean
        .iter()
        .zip(model.eigenfunctions.column(j).iter())
        .map(|(mu, e)| *mu + s * *e)
        .collect();
    let (y, x) = unglue(&model.grid, &g, model.scale_c)?;
    compose_amplitude_phase(&y, &x).map_err(|e| Error::Mode {
        z: z.as_f64(),
        source: Box::new(e),
    })
}

/// Centered amplitude and phase blocks with their Gram matrices, for cheap
/// repeated evaluation of the reconstruction error over `C`.
///
/// The glued Gram matrix at scale `C` is `Gy + C^2 Gx`; its leading
/// eigenvectors span the same sample-space directions as the leading glued
/// scores, so m-term reconstructions follow without forming eigenfunctions.
pub struct CombinedData<'a, T: Scalar> {
    grid: TimeGrid<T>,
    fs: &'a [SampledCurve<T>],
    mean_y: Vec<T>,
    mean_x: Vec<T>,
    yc: DMatrix<T>,
    xc: DMatrix<T>,
    gy: DMatrix<T>,
    gx: DMatrix<T>,
}

impl<'a, T: Scalar> CombinedData<'a, T> {
    pub fn new(ys: &[SampledCurve<T>], xs: &[TangentFunction<T>], fs: &'a [SampledCurve<T>]) -> Result<Self> {
        let grid = check_inputs(ys, xs)?;
        if fs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: ys.len(),
                got: fs.len(),
            });
        }
        for f in fs {
            grid.check_same(f.grid())?;
        }
        let yr: Vec<&[T]> = ys.iter().map(|y| y.values()).collect();
        let xr: Vec<&[T]> = xs.iter().map(|x| x.values()).collect();
        let (mean_y, yc) = center_rows(&row_matrix(&yr));
        let (mean_x, xc) = center_rows(&row_matrix(&xr));
        let gy = &yc * yc.transpose();
        let gx = &xc * xc.transpose();
        Ok(Self {
            grid,
            fs,
            mean_y,
            mean_x,
            yc,
            xc,
            gy,
            gx,
        })
    }

    pub fn n(&self) -> usize {
        self.fs.len()
    }

    /// Mean squared L2 error of the m-term reconstructions at scale `c`.
    /// A reconstruction whose phase cannot be inverted costs `||f_i||^2`.
    pub fn mse(&self, c: T, m: usize) -> T {
        let n = self.n();
        let mut g = &self.gy + &self.gx * (c * c);
        crate::linalg::symmetrize(&mut g);
        let (_, u) = sym_eigen_desc(g);
        let m = m.min(n);
        let um = u.columns(0, m);
        let proj = &um * um.transpose();
        let yhat = &proj * &self.yc;
        let xhat = &proj * &self.xc;
        let total = (0..n).fold(T::zero(), |acc, i| {
            let f = &self.fs[i];
            let y = SampledCurve::new(
                self.grid.clone(),
                yhat.row(i).iter().zip(&self.mean_y).map(|(a, b)| *a + *b).collect(),
            )
            .expect("grid length");
            let x = SampledCurve::new(
                self.grid.clone(),
                xhat.row(i).iter().zip(&self.mean_x).map(|(a, b)| *a + *b).collect(),
            )
            .expect("grid length");
            let err = match compose_amplitude_phase(&y, &TangentFunction::project(&x)) {
                Ok(rec) => rec.distance(f).expect("shared grid"),
                Err(_) => f.norm(),
            };
            acc + err * err
        });
        total / T::from_count(n)
    }
}

/// `n^{-1} Σ ||A_m(f_i) - f_i||^2` at scale `c`.
pub fn reconstruction_mse<T: Scalar>(
    ys: &[SampledCurve<T>],
    xs: &[TangentFunction<T>],
    fs: &[SampledCurve<T>],
    c: T,
    m: usize,
) -> Result<T> {
    check_c(c)?;
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    Ok(CombinedData::new(ys, xs, fs)?.mse(c, m))
}

/// Selected scale and search diagnostics.
#[derive(Clone, Debug)]
pub struct CEstimate<T: Scalar> {
    pub c: T,
    pub mse: T,
    /// Set when the objective is flat over the scan; `c` is then one.
    pub degenerate: bool,
    /// `(C, MSE)` at the scan points.
    pub scan: Vec<(T, T)>,
}

/// Minimizes the m-term reconstruction error over `C`: a log-spaced scan on
/// `10^-3 ..= 10^3` followed by golden-section refinement around the best
/// scan point.
pub fn estimate_c<T: Scalar>(
    ys: &[SampledCurve<T>],
    xs: &[TangentFunction<T>],
    fs: &[SampledCurve<T>],
    m: usize,
) -> Result<CEstimate<T>> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    let data = CombinedData::new(ys, xs, fs)?;
    Ok(estimate_c_from(&data, m))
}

pub fn estimate_c_from<T: Scalar>(data: &CombinedData<'_, T>, m: usize) -> CEstimate<T> {
    let (lo, hi) = LOG10_C_RANGE;
    let step = (hi - lo) / (C_SCAN_POINTS - 1) as f64;
    let at = |l: f64| T::lit(10f64.powf(l));
    let scan: Vec<(f64, T)> = (0..C_SCAN_POINTS)
        .into_par_iter()
        .map(|i| {
            let l = lo + step * i as f64;
            (l, data.mse(at(l), m))
        })
        .collect();
    let scan_out: Vec<(T, T)> = scan.iter().map(|(l, v)| (at(*l), *v)).collect();
    let max = scan.iter().map(|s| s.1).fold(T::zero(), |a, b| a.max(b));
    let min = scan.iter().map(|s| s.1).fold(max, |a, b| a.min(b));
    if max - min <= T::lit(1e-10) * max || max <= T::zero() {
        return CEstimate {
            c: T::one(),
            mse: data.mse(T::one(), m),
            degenerate: true,
            scan: scan_out,
        };
    }
    let best_i = (0..scan.len()).fold(0, |b, i| if scan[i].1 < scan[b].1 { i } else { b });
    let a = scan[best_i.saturating_sub(1)].0;
    let b = scan[(best_i + 1).min(scan.len() - 1)].0;
    let refined = golden_section(a, b, 1e-4, |l| data.mse(at(l), m).as_f64());
    let v = data.mse(at(refined), m);
    let (l, v) = if v <= scan[best_i].1 { (refined, v) } else { scan[best_i] };
    CEstimate {
        c: at(l),
        mse: v,
        degenerate: false,
        scan: scan_out,
    }
}
