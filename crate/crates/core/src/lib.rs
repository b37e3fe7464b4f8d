//! Combined principal component and canonical correlation analysis of
//! amplitude and phase variation in functional data.

pub mod align;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod fccca;
pub mod fcpca;
pub mod fungeom;
pub mod linalg;
mod optim;
pub mod scalar;
pub mod simgen;
pub mod smooth;
pub mod workflow;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases of the generic types.
pub type TimeGrid = fungeom::TimeGrid<f64>;
pub type SampledCurve = fungeom::SampledCurve<f64>;
pub type WarpingFunction = fungeom::WarpingFunction<f64>;
pub type SrvfPoint = fungeom::SrvfPoint<f64>;
pub type TangentFunction = fungeom::TangentFunction<f64>;
pub type RawRecord = smooth::RawRecord<f64>;
pub type SmoothCurve = smooth::SmoothCurve<f64>;
pub type AlignmentResult = align::AlignmentResult<f64>;
pub type CombinedEigenModel = fcpca::CombinedEigenModel<f64>;
pub type CEstimate = fcpca::CEstimate<f64>;
pub type CcaModel = fccca::CcaModel<f64>;
pub type MseCurve = baselines::MseCurve<f64>;
pub type SimDataset = simgen::SimDataset<f64>;
