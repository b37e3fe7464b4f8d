use super::grid::{SampledCurve, TimeGrid};
use super::sphere::{exp_map, log_map};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Orientation-preserving diffeomorphism of `[0, 1]` sampled on a grid:
/// strictly increasing, `gamma(0) = 0`, `gamma(1) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpingFunction<T: Scalar> {
    curve: SampledCurve<T>,
}

impl<T: Scalar> WarpingFunction<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<T>) -> Result<Self> {
        Self::from_curve(SampledCurve::new(grid, values)?)
    }

    pub fn from_curve(curve: SampledCurve<T>) -> Result<Self> {
        let v = curve.values();
        let k = v.len();
        if let Some(i) = (1..k).find(|&i| v[i] <= v[i - 1]) {
            return Err(Error::NonMonotone { index: i });
        }
        if v[0] != T::zero() || v[k - 1] != T::one() {
            return Err(Error::Endpoints {
                first: v[0].as_f64(),
                last: v[k - 1].as_f64(),
            });
        }
        Ok(Self { curve })
    }

    pub fn identity(grid: &TimeGrid<T>) -> Self {
        Self {
            curve: SampledCurve::from_parts(grid.clone(), grid.points().to_vec()),
        }
    }

    /// Builds a warp from a nonnegative density by cumulative integration and
    /// exact endpoint renormalization.
    pub(crate) fn from_density(grid: &TimeGrid<T>, density: &[T]) -> Result<Self> {
        let mut g = grid.cumulative_integral(density);
        let total = *g.last().expect("nonempty grid");
        if !(total > T::zero()) {
            return Err(Error::Data("warp density integrates to zero".into()));
        }
        g.iter_mut().for_each(|v| *v /= total);
        let k = g.len();
        g[0] = T::zero();
        g[k - 1] = T::one();
        Self::from_curve(SampledCurve::from_parts(grid.clone(), g))
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        self.curve.grid()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        self.curve.values()
    }

    #[inline]
    pub fn as_curve(&self) -> &SampledCurve<T> {
        &self.curve
    }

    /// Piecewise-linear evaluation.
    pub fn eval(&self, t: T) -> T {
        self.curve.eval_linear(t)
    }

    /// `self ∘ inner`, i.e. `t -> self(inner(t))`.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        self.grid().check_same(inner.grid())?;
        let values = inner.values().iter().map(|&t| self.eval(t)).collect();
        Self::from_curve(SampledCurve::from_parts(self.grid().clone(), values))
    }

    /// Inverse warp by linear interpolation of the graph `(gamma(t), t)`.
    pub fn inverse(&self) -> Self {
        let t = self.grid().points();
        let g = self.values();
        let k = t.len();
        let mut out = Vec::with_capacity(k);
        let mut j = 0;
        for &s in t {
            while j + 2 < k && g[j + 1] <= s {
                j += 1;
            }
            let w = ((s - g[j]) / (g[j + 1] - g[j])).clamp(T::zero(), T::one());
            out.push(t[j] + w * (t[j + 1] - t[j]));
        }
        out[0] = T::zero();
        out[k - 1] = T::one();
        // enforce strictness against rounding in nearly flat stretches
        for i in 1..k {
            if out[i] <= out[i - 1] {
                out[i] = out[i - 1] + T::default_epsilon();
            }
        }
        out[k - 1] = T::one();
        Self {
            curve: SampledCurve::from_parts(self.grid().clone(), out),
        }
    }

    /// Sup-norm distance to the identity.
    pub fn max_displacement(&self) -> T {
        self.values()
            .iter()
            .zip(self.grid().points())
            .fold(T::zero(), |m, (g, t)| m.max((*g - *t).abs()))
    }
}

/// Point on the positive orthant of the unit sphere: the square root of a
/// warp derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct SrvfPoint<T: Scalar> {
    curve: SampledCurve<T>,
}

impl<T: Scalar> SrvfPoint<T> {
    pub fn new(curve: SampledCurve<T>) -> Result<Self> {
        let n = curve.norm();
        if (n - T::one()).abs() > T::lit(1e-8).max(T::default_epsilon().sqrt()) {
            return Err(Error::NotUnitNorm { norm: n.as_f64() });
        }
        let v = curve.values();
        if let Some(i) = (1..v.len() - 1).find(|&i| !(v[i] > T::zero())) {
            return Err(Error::Data(format!("square-root density not positive at index {i}")));
        }
        Ok(Self { curve })
    }

    #[inline]
    pub fn as_curve(&self) -> &SampledCurve<T> {
        &self.curve
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        self.curve.values()
    }
}

/// Element of the tangent space of the unit sphere. Phase functions are
/// tangent at the constant function one, i.e. integrate to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFunction<T: Scalar> {
    curve: SampledCurve<T>,
}

impl<T: Scalar> TangentFunction<T> {
    /// Validates orthogonality to the constant function (within `1e-8`).
    pub fn new(curve: SampledCurve<T>) -> Result<Self> {
        let m = curve.integral();
        if m.abs() > T::lit(1e-8).max(T::default_epsilon().sqrt()) {
            return Err(Error::Data(format!(
                "phase function not orthogonal to the constant (mean {})",
                m.as_f64()
            )));
        }
        Ok(Self { curve })
    }

    /// Removes the constant component so the result is a valid phase function.
    pub fn project(curve: &SampledCurve<T>) -> Self {
        let m = curve.integral();
        Self {
            curve: curve.map(|v| v - m),
        }
    }

    pub fn zeros(grid: &TimeGrid<T>) -> Self {
        Self {
            curve: SampledCurve::zeros(grid),
        }
    }

    pub(crate) fn unchecked(curve: SampledCurve<T>) -> Self {
        Self { curve }
    }

    #[inline]
    pub fn as_curve(&self) -> &SampledCurve<T> {
        &self.curve
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        self.curve.values()
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        self.curve.grid()
    }

    pub fn into_curve(self) -> SampledCurve<T> {
        self.curve
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            curve: self.curve.scale(c),
        }
    }
}

/// Square root of the warp derivative, renormalized to unit quadrature norm.
pub fn srvf_of_warp<T: Scalar>(gamma: &WarpingFunction<T>) -> SrvfPoint<T> {
    let d = gamma.grid().derivative(gamma.values());
    let q: Vec<T> = d.into_iter().map(|v| v.max(T::zero()).sqrt()).collect();
    let curve = SampledCurve::from_parts(gamma.grid().clone(), q);
    let n = curve.norm();
    SrvfPoint {
        curve: curve.scale(T::one() / n),
    }
}

/// `gamma(t) = ∫_0^t q^2`, renormalized so that `gamma(1) = 1`.
pub fn warp_of_srvf<T: Scalar>(q: &SrvfPoint<T>) -> WarpingFunction<T> {
    let sq: Vec<T> = q.values().iter().map(|v| *v * *v).collect();
    WarpingFunction::from_density(q.as_curve().grid(), &sq).expect("valid srvf integrates to a warp")
}

/// Phase function of a warp: log map of its square-root derivative at one.
pub fn phi<T: Scalar>(gamma: &WarpingFunction<T>) -> Result<TangentFunction<T>> {
    let q = srvf_of_warp(gamma);
    let one = SampledCurve::constant(gamma.grid(), T::one());
    log_map(q.as_curve(), &one)
}

/// Warp of a phase function. Fails when the exponential map leaves the
/// positive orthant on the interior of the grid.
pub fn phi_inverse<T: Scalar>(x: &TangentFunction<T>) -> Result<WarpingFunction<T>> {
    let one = SampledCurve::constant(x.grid(), T::one());
    let e = exp_map(x, &one)?;
    let v = e.values();
    let min = v[1..v.len() - 1].iter().copied().fold(T::max_value().unwrap_or(T::one()), |m, a| m.min(a));
    if !(min > T::zero()) {
        return Err(Error::PhaseDomain { min: min.as_f64() });
    }
    let sq: Vec<T> = v.iter().map(|a| *a * *a).collect();
    WarpingFunction::from_density(x.grid(), &sq)
}

/// `y ∘ phi^{-1}(x)` with cubic interpolation of `y` between grid nodes.
pub fn compose_amplitude_phase<T: Scalar>(
    y: &SampledCurve<T>,
    x: &TangentFunction<T>,
) -> Result<SampledCurve<T>> {
    y.grid().check_same(x.grid())?;
    let gamma = phi_inverse(x)?;
    Ok(warp_curve(y, &gamma))
}

/// `f ∘ gamma` with cubic interpolation of `f`.
pub fn warp_curve<T: Scalar>(f: &SampledCurve<T>, gamma: &WarpingFunction<T>) -> SampledCurve<T> {
    let spline = f.interpolant();
    let values = gamma.values().iter().map(|&s| spline.eval(s)).collect();
    SampledCurve::from_parts(f.grid().clone(), values)
}
