//! Geometry of warping functions.
//!
//! Warps are mapped to the positive orthant of the unit sphere in `L2[0,1]`
//! by their square-root derivative, and from there to the tangent space at
//! the constant function one by the log map. The image is a linear space of
//! zero-mean "phase functions"; the inverse path goes through the exponential
//! map and cumulative integration. Everything is represented by values on a
//! shared [`TimeGrid`] with trapezoid quadrature.

mod grid;
mod sphere;
mod warp;

pub use grid::{CubicSpline, SampledCurve, TimeGrid};
pub use sphere::{
    exp_map, geodesic_distance, karcher_mean_sphere, log_map, DEFAULT_KARCHER_MAX_ITER,
    DEFAULT_KARCHER_TOL, SINGULAR_CUTOFF,
};
pub use warp::{
    compose_amplitude_phase, phi, phi_inverse, srvf_of_warp, warp_curve, warp_of_srvf, SrvfPoint,
    TangentFunction, WarpingFunction,
};
