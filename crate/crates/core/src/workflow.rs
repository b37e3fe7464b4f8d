//! Smoothing followed by alignment, shared by the CLI and the simulations.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::align::{align_set, AlignmentResult, DEFAULT_ALIGN_MAX_ITER, DEFAULT_ALIGN_TOL};
use crate::error::Result;
use crate::fungeom::{SampledCurve, TimeGrid};
use crate::scalar::Scalar;
use crate::smooth::{eval_curve, RawRecord, Smoother, DEFAULT_DEGREE, DEFAULT_PENALTY_ORDER};

/// Smoothed curves and their alignment.
#[derive(Clone, Debug)]
pub struct Processed<T: Scalar> {
    pub grid: TimeGrid<T>,
    pub smoothed: Vec<SampledCurve<T>>,
    pub lambdas: Vec<T>,
    pub alignment: AlignmentResult<T>,
}

/// GCV-smooths each record and evaluates it on `grid`. Records sharing the
/// same observation times share one precomputed smoother.
pub fn smooth_records<T: Scalar>(records: &[RawRecord<T>], grid: &TimeGrid<T>) -> Result<(Vec<SampledCurve<T>>, Vec<T>)> {
    let dedup: Vec<(Vec<T>, Vec<T>)> = records.iter().map(RawRecord::deduplicated).collect();
    let mut smoothers: HashMap<Vec<u64>, Smoother<T>> = HashMap::new();
    let key = |t: &[T]| t.iter().map(|v| v.as_f64().to_bits()).collect::<Vec<u64>>();
    for (t, _) in &dedup {
        let k = key(t);
        if !smoothers.contains_key(&k) {
            smoothers.insert(k, Smoother::new(t, DEFAULT_DEGREE, DEFAULT_PENALTY_ORDER)?);
        }
    }
    let fits = dedup
        .par_iter()
        .map(|(t, y)| {
            let s = &smoothers[&key(t)];
            let fit = s.fit(y, None)?;
            Ok((eval_curve(&fit, grid, 0)?, fit.selected_lambda))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fits.into_iter().unzip())
}

/// Smooths curves observed on their own grid and re-evaluates them there.
pub fn smooth_curves<T: Scalar>(curves: &[SampledCurve<T>]) -> Result<(Vec<SampledCurve<T>>, Vec<T>)> {
    let Some(first) = curves.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let grid = first.grid().clone();
    let records = curves
        .iter()
        .enumerate()
        .map(|(i, c)| RawRecord::new(i.to_string(), c.grid().points().to_vec(), c.values().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    smooth_records(&records, &grid)
}

/// Smooths noisy curves and aligns the result with default settings.
pub fn preprocess<T: Scalar>(curves: &[SampledCurve<T>]) -> Result<Processed<T>> {
    let (smoothed, lambdas) = smooth_curves(curves)?;
    let alignment = align_set(&smoothed, T::lit(DEFAULT_ALIGN_TOL), DEFAULT_ALIGN_MAX_ITER)?;
    Ok(Processed {
        grid: curves[0].grid().clone(),
        smoothed,
        lambdas,
        alignment,
    })
}
