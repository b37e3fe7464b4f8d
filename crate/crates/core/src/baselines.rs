//! Comparators for the combined PCA: ordinary FPCA of the unaligned curves
//! and a composite FPCA that truncates amplitude and phase separately.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcpca::{center_rows, estimate_c_from, row_matrix, CombinedData};
use crate::fungeom::{compose_amplitude_phase, SampledCurve, TangentFunction, TimeGrid};
use crate::linalg::thin_svd;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fcpca,
    Fpca,
    Composite,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fcpca => "fcpca",
            Method::Fpca => "fpca",
            Method::Composite => "composite",
        }
    }
}

/// Reconstruction error as a function of the number of components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseCurve<T> {
    pub method: Method,
    pub m_values: Vec<usize>,
    pub mse: Vec<T>,
}

/// Linear principal components of one block of curves.
struct LinearPca<T: Scalar> {
    grid: TimeGrid<T>,
    mean: Vec<T>,
    /// `n x r` scores.
    scores: DMatrix<T>,
    /// `k x r` orthonormal directions.
    dirs: DMatrix<T>,
}

impl<T: Scalar> LinearPca<T> {
    fn new(grid: &TimeGrid<T>, rows: &[&[T]]) -> Result<Self> {
        let (mean, centered) = center_rows(&row_matrix(rows));
        let svd = thin_svd(centered.clone())?;
        let r = svd.s.len().min(rows.len() - 1);
        let dirs = svd.v.columns(0, r).into_owned();
        Ok(Self {
            grid: grid.clone(),
            scores: &centered * &dirs,
            dirs,
            mean,
        })
    }

    fn rank(&self) -> usize {
        self.dirs.ncols()
    }

    /// Mean plus the first `m` components; `m` beyond the rank adds nothing.
    fn reconstruct(&self, i: usize, m: usize) -> SampledCurve<T> {
        let mut v = self.mean.clone();
        for j in 0..m.min(self.rank()) {
            let s = self.scores[(i, j)];
            for (a, d) in v.iter_mut().zip(self.dirs.column(j).iter()) {
                *a += s * *d;
            }
        }
        SampledCurve::new(self.grid.clone(), v).expect("grid length")
    }
}

fn check_curves<T: Scalar>(fs: &[SampledCurve<T>]) -> Result<TimeGrid<T>> {
    if fs.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: fs.len() });
    }
    let grid = fs[0].grid().clone();
    for f in fs {
        grid.check_same(f.grid())?;
    }
    Ok(grid)
}

fn check_blocks<T: Scalar>(ys: &[SampledCurve<T>], xs: &[TangentFunction<T>], fs: &[SampledCurve<T>]) -> Result<TimeGrid<T>> {
    for len in [xs.len(), fs.len()] {
        if len != ys.len() {
            return Err(Error::LengthMismatch {
                expected: ys.len(),
                got: len,
            });
        }
    }
    let grid = check_curves(fs)?;
    for (y, x) in ys.iter().zip(xs) {
        grid.check_same(y.grid())?;
        grid.check_same(x.grid())?;
    }
    Ok(grid)
}

fn mean_sq<T: Scalar>(errs: impl Iterator<Item = T>, n: usize) -> T {
    errs.fold(T::zero(), |a, e| a + e * e) / T::from_count(n)
}

struct Fpca<'a, T: Scalar> {
    fs: &'a [SampledCurve<T>],
    pca: LinearPca<T>,
}

impl<'a, T: Scalar> Fpca<'a, T> {
    fn new(fs: &'a [SampledCurve<T>]) -> Result<Self> {
        let grid = check_curves(fs)?;
        let rows: Vec<&[T]> = fs.iter().map(|f| f.values()).collect();
        Ok(Self {
            fs,
            pca: LinearPca::new(&grid, &rows)?,
        })
    }

    fn mse(&self, m: usize) -> T {
        let errs = self
            .fs
            .iter()
            .enumerate()
            .map(|(i, f)| self.pca.reconstruct(i, m).distance(f).expect("shared grid"));
        mean_sq(errs, self.fs.len())
    }
}

/// Mean squared L2 error of m-term FPCA reconstructions of the unaligned
/// curves. `m = 0` reconstructs every curve by the sample mean.
pub fn fpca_mse<T: Scalar>(fs: &[SampledCurve<T>], m: usize) -> Result<T> {
    Ok(Fpca::new(fs)?.mse(m))
}

struct Composite<'a, T: Scalar> {
    fs: &'a [SampledCurve<T>],
    amp: LinearPca<T>,
    phase: LinearPca<T>,
}

impl<'a, T: Scalar> Composite<'a, T> {
    fn new(ys: &[SampledCurve<T>], xs: &[TangentFunction<T>], fs: &'a [SampledCurve<T>]) -> Result<Self> {
        let grid = check_blocks(ys, xs, fs)?;
        let yr: Vec<&[T]> = ys.iter().map(|y| y.values()).collect();
        let xr: Vec<&[T]> = xs.iter().map(|x| x.values()).collect();
        Ok(Self {
            fs,
            amp: LinearPca::new(&grid, &yr)?,
            phase: LinearPca::new(&grid, &xr)?,
        })
    }

    /// Number of scores of one sample used by an m-term reconstruction.
    fn scores_used(&self, m: usize) -> usize {
        m.min(self.amp.rank()) + m.min(self.phase.rank())
    }

    fn mse(&self, m: usize) -> T {
        let errs = self.fs.iter().enumerate().map(|(i, f)| {
            let y = self.amp.reconstruct(i, m);
            let x = TangentFunction::project(&self.phase.reconstruct(i, m));
            match compose_amplitude_phase(&y, &x) {
                Ok(rec) => rec.distance(f).expect("shared grid"),
                Err(_) => f.norm(),
            }
        });
        mean_sq(errs, self.fs.len())
    }
}

/// Mean squared L2 error of composite reconstructions: amplitudes and phases
/// are each truncated to their own first `m` components and then composed.
/// A reconstruction whose phase cannot be inverted costs `||f_i||^2`.
pub fn composite_mse<T: Scalar>(
    ys: &[SampledCurve<T>],
    xs: &[TangentFunction<T>],
    fs: &[SampledCurve<T>],
    m: usize,
) -> Result<T> {
    Ok(Composite::new(ys, xs, fs)?.mse(m))
}

/// Reconstruction errors of the three methods for `m = 1..=m_max`. The
/// combined method re-selects its scale `C` for every `m`.
pub fn mse_comparison<T: Scalar>(
    ys: &[SampledCurve<T>],
    xs: &[TangentFunction<T>],
    fs: &[SampledCurve<T>],
    m_max: usize,
) -> Result<[MseCurve<T>; 3]> {
    if m_max == 0 {
        return Err(Error::InvalidParameter("m_max must be at least 1".into()));
    }
    let m_values: Vec<usize> = (1..=m_max).collect();
    let combined = CombinedData::new(ys, xs, fs)?;
    let fpca = Fpca::new(fs)?;
    let composite = Composite::new(ys, xs, fs)?;
    let fc: Vec<T> = m_values.iter().map(|&m| estimate_c_from(&combined, m).mse).collect();
    let (fp, co): (Vec<T>, Vec<T>) = m_values
        .par_iter()
        .map(|&m| {
            debug_assert!(m > composite.amp.rank() || m > composite.phase.rank() || composite.scores_used(m) == 2 * m);
            (fpca.mse(m), composite.mse(m))
        })
        .unzip();
    let curve = |method, mse| MseCurve {
        method,
        m_values: m_values.clone(),
        mse,
    };
    Ok([curve(Method::Fcpca, fc), curve(Method::Fpca, fp), curve(Method::Composite, co)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcpca::reconstruction_mse;
    use crate::simgen::{gen_toy_dataset, SimConfig, SimModel};
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_curves(n: usize, k: usize, seed: u64) -> Vec<SampledCurve<f64>> {
        let g = TimeGrid::uniform(k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| SampledCurve::new(g.clone(), (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect()
    }

    #[test]
    fn fpca_matches_covariance_eigenvectors() {
        let fs = random_curves(5, 11, 1);
        let k = 11;
        let n = fs.len();
        let mean: Vec<f64> = (0..k).map(|j| fs.iter().map(|f| f.values()[j]).sum::<f64>() / n as f64).collect();
        let mut cov = DMatrix::<f64>::zeros(k, k);
        for f in &fs {
            let d = nalgebra::DVector::from_fn(k, |j, _| f.values()[j] - mean[j]);
            cov += &d * d.transpose() / (n - 1) as f64;
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|a, b| eig.eigenvalues[*b].partial_cmp(&eig.eigenvalues[*a]).unwrap());
        for m in 0..=4 {
            let mut total = 0.0;
            for f in &fs {
                let d = nalgebra::DVector::from_fn(k, |j, _| f.values()[j] - mean[j]);
                let mut rec = nalgebra::DVector::from_column_slice(&mean);
                for &j in &order[..m] {
                    let e = eig.eigenvectors.column(j);
                    rec += e * e.dot(&d);
                }
                let r = SampledCurve::new(f.grid().clone(), rec.iter().copied().collect()).unwrap();
                total += r.distance(f).unwrap().powi(2);
            }
            let brute = total / n as f64;
            let ours = fpca_mse(&fs, m).unwrap();
            assert!((ours - brute).abs() < 1e-8, "m {m}: {ours} vs {brute}");
        }
    }

    #[test]
    fn fpca_full_rank_is_exact_and_error_decreases() {
        let fs = random_curves(8, 21, 2);
        let total = fpca_mse(&fs, 0).unwrap();
        let mut prev = total;
        for m in 1..=7 {
            let v = fpca_mse(&fs, m).unwrap();
            assert!(v <= prev + 1e-8);
            prev = v;
        }
        assert!(prev <= 1e-10 * total);
    }

    fn toy(model: SimModel, seed: u64) -> (Vec<SampledCurve<f64>>, Vec<TangentFunction<f64>>, Vec<SampledCurve<f64>>) {
        let mut cfg = SimConfig::new(model, 30, seed);
        cfg.k = 51;
        let ds = gen_toy_dataset::<f64>(&cfg).unwrap();
        (ds.ys_true, ds.xs_true, ds.fs_true)
    }

    #[test]
    fn composite_full_rank_recovers_curves() {
        let (ys, xs, fs) = toy(SimModel::ToyLinear, 3);
        let c = Composite::new(&ys, &xs, &fs).unwrap();
        let m = c.amp.rank().max(c.phase.rank());
        assert!(c.mse(m) < 1e-20);
    }

    #[test]
    fn composite_uses_two_m_scores() {
        let (ys, xs, fs) = toy(SimModel::ToyLinear, 4);
        let c = Composite::new(&ys, &xs, &fs).unwrap();
        for m in 1..=3 {
            assert_eq!(c.scores_used(m), 2 * m);
        }
    }

    #[test]
    fn constant_amplitudes_leave_phase_error_only() {
        let (ys, xs, _) = toy(SimModel::ToyLinear, 5);
        let y0 = ys[0].clone();
        let same: Vec<_> = ys.iter().map(|_| y0.clone()).collect();
        let fs: Vec<_> = xs.iter().map(|x| compose_amplitude_phase(&y0, x).unwrap()).collect();
        let m = 1;
        let c = Composite::new(&same, &xs, &fs).unwrap();
        let phase_only: f64 = fs
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let x = TangentFunction::project(&c.phase.reconstruct(i, m));
                compose_amplitude_phase(&y0, &x).unwrap().distance(f).unwrap().powi(2)
            })
            .sum::<f64>()
            / fs.len() as f64;
        assert!((c.mse(m) - phase_only).abs() < 1e-14);
    }

    #[test]
    fn comparison_curves_are_consistent() {
        let (ys, xs, fs) = toy(SimModel::ToyLinear, 6);
        let curves = mse_comparison(&ys, &xs, &fs, 3).unwrap();
        assert_eq!(curves[0].method, Method::Fcpca);
        for c in &curves {
            assert_eq!(c.m_values, vec![1, 2, 3]);
            assert!(c.mse.iter().all(|v| *v >= 0.0));
        }
        for w in curves[1].mse.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        assert_eq!(curves[1].mse[0], fpca_mse(&fs, 1).unwrap());
        let best = estimate_c_from(&CombinedData::new(&ys, &xs, &fs).unwrap(), 2);
        assert_eq!(curves[0].mse[1], reconstruction_mse(&ys, &xs, &fs, best.c, 2).unwrap());
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let (ys, xs, fs) = toy(SimModel::ToyLinear, 7);
        assert!(composite_mse(&ys[..5], &xs, &fs, 1).is_err());
        assert!(fpca_mse(&fs[..1], 1).is_err());
        assert!(mse_comparison(&ys, &xs, &fs, 0).is_err());
    }
}
