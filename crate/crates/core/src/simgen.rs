//! Seeded generators for the simulation models.
//!
//! Every sample draws from its own ChaCha stream derived from the
//! configuration seed and the sample index, so results do not depend on
//! evaluation order or thread count.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fungeom::{phi_inverse, warp_curve, SampledCurve, TangentFunction, TimeGrid};
use crate::scalar::Scalar;

pub const DEFAULT_NOISE_SD: f64 = 0.316;
pub const DEFAULT_K: usize = 101;

/// Variances of the glued components of the PCA model.
pub const PCA_VARIANCES: [f64; 4] = [3.5, 2.6, 0.3, 0.1];
pub const CCA_AMPLITUDE_VARIANCES: [f64; 4] = [5.0, 3.5, 0.8, 0.7];
pub const CCA_PHASE_VARIANCES: [f64; 4] = [0.01, 0.007, 0.0016, 0.0014];
pub const CCA_CORRELATION: f64 = 0.8;
pub const TOY_AMPLITUDE_VARIANCE: f64 = 3.0;
pub const TOY_PHASE_VARIANCE: f64 = 0.01;

/// Give up after this many out-of-domain draws for one sample.
const MAX_RESAMPLE: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    PcaModel,
    CcaModel,
    ToyLinear,
    ToyQuadratic,
}

impl SimModel {
    pub fn name(self) -> &'static str {
        match self {
            SimModel::PcaModel => "pca_model",
            SimModel::CcaModel => "cca_model",
            SimModel::ToyLinear => "toy_linear",
            SimModel::ToyQuadratic => "toy_quadratic",
        }
    }
}

impl std::str::FromStr for SimModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca_model" => Ok(SimModel::PcaModel),
            "cca_model" => Ok(SimModel::CcaModel),
            "toy_linear" => Ok(SimModel::ToyLinear),
            "toy_quadratic" => Ok(SimModel::ToyQuadratic),
            other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub model: SimModel,
}

impl SimConfig {
    pub fn new(model: SimModel, n: usize, seed: u64) -> Self {
        Self {
            n,
            k: DEFAULT_K,
            seed,
            noise_sd: DEFAULT_NOISE_SD,
            model,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewSamples { need: 2, got: self.n });
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidParameter("noise_sd must be nonnegative".into()));
        }
        if self.k < 11 {
            return Err(Error::InvalidParameter("grid size must be at least 11".into()));
        }
        Ok(())
    }
}

/// Generating functions of a model, as grid vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth<T: Scalar> {
    pub mean: Vec<T>,
    pub amplitude_basis: Vec<Vec<T>>,
    pub phase_basis: Vec<Vec<T>>,
    /// Glued components (PCA model only), length `2k`.
    pub glued_components: Vec<Vec<T>>,
    pub variances: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SimDataset<T: Scalar> {
    pub config: SimConfig,
    pub grid: TimeGrid<T>,
    pub fs: Vec<SampledCurve<T>>,
    pub fs_true: Vec<SampledCurve<T>>,
    pub ys_true: Vec<SampledCurve<T>>,
    pub xs_true: Vec<TangentFunction<T>>,
    /// One row of generating scores per sample.
    pub scores_true: Vec<Vec<f64>>,
    /// Number of score draws rejected because the phase left the domain.
    pub resampled: usize,
    pub truth: Truth<T>,
}

fn npdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Two-bump mean amplitude.
pub fn mean_amplitude(t: f64) -> f64 {
    20.0 * (npdf((t - 0.35) / 0.05) + npdf((t - 0.65) / 0.05))
}

#[derive(Clone, Copy, PartialEq)]
enum Metric {
    Euclidean,
    Quadrature,
}

fn gram_schmidt<T: Scalar>(grid: &TimeGrid<T>, raw: Vec<Vec<T>>, metric: Metric) -> Vec<Vec<T>> {
    let ip = |a: &[T], b: &[T]| match metric {
        Metric::Euclidean => a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y),
        Metric::Quadrature => grid.dot(a, b),
    };
    let mut out: Vec<Vec<T>> = Vec::with_capacity(raw.len());
    for mut v in raw {
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for e in &out {
                let c = ip(&v, e);
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * *b);
            }
        }
        let n = ip(&v, &v).sqrt();
        v.iter_mut().for_each(|a| *a /= n);
        out.push(v);
    }
    out
}

/// Orthonormalized amplitude bump functions (unit grid vectors).
pub fn amplitude_basis<T: Scalar>(grid: &TimeGrid<T>) -> Vec<Vec<T>> {
    let fns: [fn(f64) -> f64; 4] = [
        |t| npdf((t - 0.35) / 0.05),
        |t| npdf((t - 0.65) / 0.05),
        |t| npdf((t - 0.5) / 0.1),
        |t| npdf((t - 0.3) / 0.1) + npdf((t - 0.7) / 0.1),
    ];
    let raw = fns
        .iter()
        .map(|f| grid.points().iter().map(|t| T::lit(f(t.as_f64()))).collect())
        .collect();
    gram_schmidt(grid, raw, Metric::Euclidean)
}

/// Orthonormalized, integral-free polynomials `(t - 1/2)^j`, `j = 1..=4`.
fn phase_basis<T: Scalar>(grid: &TimeGrid<T>, metric: Metric) -> Vec<Vec<T>> {
    let raw = (1..=4)
        .map(|j| {
            let v: Vec<T> = grid.points().iter().map(|t| (*t - T::lit(0.5)).powi(j)).collect();
            let m = grid.integrate(&v);
            v.into_iter().map(|a| a - m).collect()
        })
        .collect();
    gram_schmidt(grid, raw, metric)
}

/// Phase basis as unit grid vectors (PCA model).
pub fn phase_basis_euclidean<T: Scalar>(grid: &TimeGrid<T>) -> Vec<Vec<T>> {
    phase_basis(grid, Metric::Euclidean)
}

/// Phase basis with unit L2 norm (CCA and toy models).
pub fn phase_basis_l2<T: Scalar>(grid: &TimeGrid<T>) -> Vec<Vec<T>> {
    phase_basis(grid, Metric::Quadrature)
}

fn substream(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Sample<T: Scalar> {
    f: SampledCurve<T>,
    f_true: SampledCurve<T>,
    y: SampledCurve<T>,
    x: TangentFunction<T>,
    scores: Vec<f64>,
    rejected: usize,
}

fn combine<T: Scalar>(base: &[T], dirs: &[Vec<T>], coefs: &[f64]) -> Vec<T> {
    let mut out = base.to_vec();
    for (d, c) in dirs.iter().zip(coefs) {
        let c = T::lit(*c);
        out.iter_mut().zip(d).for_each(|(a, b)| *a += c * *b);
    }
    out
}

/// Draws scores until the phase is invertible, then composes and adds noise.
fn draw_sample<T: Scalar>(
    grid: &TimeGrid<T>,
    rng: &mut ChaCha8Rng,
    noise_sd: f64,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> (Vec<T>, Vec<T>, Vec<f64>),
) -> Result<Sample<T>> {
    let mut rejected = 0;
    loop {
        let (yv, xv, scores) = draw(rng);
        let y = SampledCurve::new(grid.clone(), yv)?;
        let x = TangentFunction::project(&SampledCurve::new(grid.clone(), xv)?);
        match phi_inverse(&x) {
            Ok(gamma) => {
                let f_true = warp_curve(&y, &gamma);
                let noisy: Vec<T> = f_true
                    .values()
                    .iter()
                    .map(|v| *v + T::lit(noise_sd * normal(rng)))
                    .collect();
                return Ok(Sample {
                    f: SampledCurve::new(grid.clone(), noisy)?,
                    f_true,
                    y,
                    x,
                    scores,
                    rejected,
                });
            }
            Err(e) => {
                rejected += 1;
                if rejected >= MAX_RESAMPLE {
                    return Err(Error::Data(format!("phase draws keep leaving the domain: {e}")));
                }
            }
        }
    }
}

fn assemble<T: Scalar>(config: &SimConfig, grid: TimeGrid<T>, truth: Truth<T>, samples: Vec<Sample<T>>) -> SimDataset<T> {
    let resampled = samples.iter().map(|s| s.rejected).sum();
    if resampled > 0 {
        log::info!("{resampled} out-of-domain phase draws were resampled");
    }
    let mut ds = SimDataset {
        config: config.clone(),
        grid,
        fs: Vec::with_capacity(samples.len()),
        fs_true: Vec::with_capacity(samples.len()),
        ys_true: Vec::with_capacity(samples.len()),
        xs_true: Vec::with_capacity(samples.len()),
        scores_true: Vec::with_capacity(samples.len()),
        resampled,
        truth,
    };
    for s in samples {
        ds.fs.push(s.f);
        ds.fs_true.push(s.f_true);
        ds.ys_true.push(s.y);
        ds.xs_true.push(s.x);
        ds.scores_true.push(s.scores);
    }
    ds
}

/// Generates a dataset for any model.
pub fn generate<T: Scalar>(config: &SimConfig) -> Result<SimDataset<T>> {
    match config.model {
        SimModel::PcaModel => gen_pca_dataset(config),
        SimModel::CcaModel => gen_cca_dataset(config),
        SimModel::ToyLinear | SimModel::ToyQuadratic => gen_toy_dataset(config),
    }
}

/// Four glued components, each half amplitude bump and half phase
/// polynomial, with `C = 1`.
pub fn gen_pca_dataset<T: Scalar>(config: &SimConfig) -> Result<SimDataset<T>> {
    config.validate()?;
    let grid = TimeGrid::<T>::uniform(config.k)?;
    let mean: Vec<T> = grid.points().iter().map(|t| T::lit(mean_amplitude(t.as_f64()))).collect();
    let amp = amplitude_basis(&grid);
    let pha = phase_basis_euclidean(&grid);
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let glued: Vec<Vec<T>> = amp
        .iter()
        .zip(&pha)
        .map(|(a, p)| a.iter().chain(p).map(|v| *v * h).collect())
        .collect();
    let half_amp: Vec<Vec<T>> = amp.iter().map(|a| a.iter().map(|v| *v * h).collect()).collect();
    let half_pha: Vec<Vec<T>> = pha.iter().map(|p| p.iter().map(|v| *v * h).collect()).collect();
    let zeros = vec![T::zero(); config.k];
    let samples = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, i);
            draw_sample(&grid, &mut rng, config.noise_sd, |rng| {
                let z: Vec<f64> = (0..4).map(|_| normal(rng)).collect();
                let c: Vec<f64> = z.iter().zip(PCA_VARIANCES).map(|(z, l)| z * l.sqrt()).collect();
                (combine(&mean, &half_amp, &c), combine(&zeros, &half_pha, &c), z)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = Truth {
        mean,
        amplitude_basis: amp,
        phase_basis: pha,
        glued_components: glued,
        variances: PCA_VARIANCES.to_vec(),
    };
    Ok(assemble(config, grid, truth, samples))
}

/// Four amplitude and four phase components with a single cross-correlation
/// between the first amplitude and the second phase score.
pub fn gen_cca_dataset<T: Scalar>(config: &SimConfig) -> Result<SimDataset<T>> {
    gen_cca_dataset_with(config, CCA_CORRELATION)
}

/// As [`gen_cca_dataset`] with a chosen cross-correlation; zero gives
/// independent amplitude and phase.
pub fn gen_cca_dataset_with<T: Scalar>(config: &SimConfig, rho: f64) -> Result<SimDataset<T>> {
    config.validate()?;
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter("correlation must lie in [-1, 1]".into()));
    }
    let grid = TimeGrid::<T>::uniform(config.k)?;
    let mean: Vec<T> = grid.points().iter().map(|t| T::lit(mean_amplitude(t.as_f64()))).collect();
    let amp = amplitude_basis(&grid);
    let pha = phase_basis_l2(&grid);
    let zeros = vec![T::zero(); config.k];
    let samples = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, i);
            draw_sample(&grid, &mut rng, config.noise_sd, |rng| {
                let u: Vec<f64> = (0..4).map(|_| normal(rng)).collect();
                let mut v: Vec<f64> = (0..4).map(|_| normal(rng)).collect();
                v[1] = rho * u[0] + (1.0 - rho * rho).sqrt() * v[1];
                let cu: Vec<f64> = u.iter().zip(CCA_AMPLITUDE_VARIANCES).map(|(s, l)| s * l.sqrt()).collect();
                let cv: Vec<f64> = v.iter().zip(CCA_PHASE_VARIANCES).map(|(s, l)| s * l.sqrt()).collect();
                let scores = u.iter().chain(&v).copied().collect();
                (combine(&mean, &amp, &cu), combine(&zeros, &pha, &cv), scores)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut variances = CCA_AMPLITUDE_VARIANCES.to_vec();
    variances.extend(CCA_PHASE_VARIANCES);
    let truth = Truth {
        mean,
        amplitude_basis: amp,
        phase_basis: pha,
        glued_components: Vec::new(),
        variances,
    };
    Ok(assemble(config, grid, truth, samples))
}

/// One amplitude and one phase component whose scores are linearly or
/// quadratically related.
pub fn gen_toy_dataset<T: Scalar>(config: &SimConfig) -> Result<SimDataset<T>> {
    config.validate()?;
    let quadratic = match config.model {
        SimModel::ToyLinear => false,
        SimModel::ToyQuadratic => true,
        other => {
            return Err(Error::InvalidParameter(format!(
                "{} is not a toy model",
                other.name()
            )))
        }
    };
    let grid = TimeGrid::<T>::uniform(config.k)?;
    let mean: Vec<T> = grid.points().iter().map(|t| T::lit(mean_amplitude(t.as_f64()))).collect();
    let amp = vec![amplitude_basis(&grid).swap_remove(0)];
    let pha = vec![phase_basis_l2(&grid).swap_remove(0)];
    let zeros = vec![T::zero(); config.k];
    let (sa, sp) = (TOY_AMPLITUDE_VARIANCE.sqrt(), TOY_PHASE_VARIANCE.sqrt());
    let samples = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, i);
            draw_sample(&grid, &mut rng, config.noise_sd, |rng| {
                let sy = normal(rng);
                let e = normal(rng);
                let sx = if quadratic {
                    (sy * sy - 1.0) / std::f64::consts::SQRT_2
                } else {
                    0.95 * sy + 0.31 * e
                };
                (combine(&mean, &amp, &[sa * sy]), combine(&zeros, &pha, &[sp * sx]), vec![sy, sx])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = Truth {
        mean,
        amplitude_basis: amp,
        phase_basis: pha,
        glued_components: Vec::new(),
        variances: vec![TOY_AMPLITUDE_VARIANCE, TOY_PHASE_VARIANCE],
    };
    Ok(assemble(config, grid, truth, samples))
}
