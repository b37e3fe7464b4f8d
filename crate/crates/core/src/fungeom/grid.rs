use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Strictly increasing evaluation points on `[0, 1]` with trapezoid weights.
///
/// Cloning is cheap; curves sampled on the same grid share the allocation.
#[derive(Clone)]
pub struct TimeGrid<T: Scalar> {
    points: Arc<[T]>,
    weights: Arc<[T]>,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        let k = points.len();
        if k < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {k}")));
        }
        if points[0] != T::zero() || points[k - 1] != T::one() {
            return Err(Error::InvalidGrid(format!(
                "endpoints must be exactly 0 and 1, got {} and {}",
                points[0].as_f64(),
                points[k - 1].as_f64()
            )));
        }
        if let Some(i) = (1..k).find(|&i| points[i] <= points[i - 1]) {
            return Err(Error::InvalidGrid(format!("not strictly increasing at index {i}")));
        }
        let half = T::lit(0.5);
        let mut weights = vec![T::zero(); k];
        for i in 0..k - 1 {
            let h = points[i + 1] - points[i];
            weights[i] += half * h;
            weights[i + 1] += half * h;
        }
        Ok(Self {
            points: points.into(),
            weights: weights.into(),
        })
    }

    /// `k` equally spaced points `0, 1/(k-1), ..., 1`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {k}")));
        }
        let denom = T::from_count(k - 1);
        let mut pts: Vec<T> = (0..k).map(|i| T::from_count(i) / denom).collect();
        pts[k - 1] = T::one();
        Self::new(pts)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Trapezoid quadrature weights; they sum to one.
    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn same_as(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points[..] == other.points[..]
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Quadrature inner product of two value slices sampled on this grid.
    #[inline]
    pub fn dot(&self, a: &[T], b: &[T]) -> T {
        let mut s = T::zero();
        for ((w, x), y) in self.weights.iter().zip(a).zip(b) {
            s += *w * *x * *y;
        }
        s
    }

    /// Quadrature integral of a value slice.
    #[inline]
    pub fn integrate(&self, a: &[T]) -> T {
        let mut s = T::zero();
        for (w, x) in self.weights.iter().zip(a) {
            s += *w * *x;
        }
        s
    }

    /// Running trapezoid integral starting at zero.
    pub fn cumulative_integral(&self, a: &[T]) -> Vec<T> {
        let half = T::lit(0.5);
        let mut out = Vec::with_capacity(a.len());
        let mut acc = T::zero();
        out.push(acc);
        for i in 1..a.len() {
            acc += half * (a[i] + a[i - 1]) * (self.points[i] - self.points[i - 1]);
            out.push(acc);
        }
        out
    }

    /// First derivative by centered differences, one-sided at the ends.
    pub fn derivative(&self, a: &[T]) -> Vec<T> {
        let t = &self.points;
        let k = a.len();
        let mut d = Vec::with_capacity(k);
        d.push((a[1] - a[0]) / (t[1] - t[0]));
        for i in 1..k - 1 {
            d.push((a[i + 1] - a[i - 1]) / (t[i + 1] - t[i - 1]));
        }
        d.push((a[k - 1] - a[k - 2]) / (t[k - 1] - t[k - 2]));
        d
    }

    /// Index `i` with `t[i] <= x <= t[i+1]`, clamped to the grid.
    #[inline]
    pub(crate) fn interval(&self, x: T) -> usize {
        let t = &self.points;
        let k = t.len();
        if x <= t[0] {
            return 0;
        }
        if x >= t[k - 1] {
            return k - 2;
        }
        let idx = t.partition_point(|p| *p <= x);
        (idx - 1).min(k - 2)
    }
}

impl<T: Scalar> PartialEq for TimeGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl<T: Scalar> fmt::Debug for TimeGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeGrid(k={})", self.len())
    }
}

/// A real function on `[0, 1]` represented by its values on a [`TimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurve<T: Scalar> {
    grid: TimeGrid<T>,
    values: Vec<T>,
}

impl<T: Scalar> SampledCurve<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: TimeGrid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: &TimeGrid<T>, f: impl Fn(T) -> T) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &TimeGrid<T>, c: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: &TimeGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn inner(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(self.grid.dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> T {
        self.grid.dot(&self.values, &self.values).sqrt()
    }

    /// Quadrature L2 distance.
    pub fn distance(&self, other: &Self) -> Result<T> {
        Ok(self.sub(other)?.norm())
    }

    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: T, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + c * b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn derivative(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.grid.derivative(&self.values),
        }
    }

    pub fn integral(&self) -> T {
        self.grid.integrate(&self.values)
    }

    /// Cubic spline interpolant through the grid values.
    pub fn interpolant(&self) -> CubicSpline<T> {
        CubicSpline::new(self.grid.points(), &self.values)
    }

    /// Piecewise-linear evaluation at an arbitrary point in `[0, 1]`.
    pub fn eval_linear(&self, x: T) -> T {
        let i = self.grid.interval(x);
        let t = self.grid.points();
        let s = (x - t[i]) / (t[i + 1] - t[i]);
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    /// Mean of several curves on one grid.
    pub fn mean(curves: &[Self]) -> Result<Self> {
        let first = curves.first().ok_or(Error::TooFewSamples { need: 1, got: 0 })?;
        let mut acc = vec![T::zero(); first.len()];
        for c in curves {
            first.grid.check_same(&c.grid)?;
            for (a, v) in acc.iter_mut().zip(&c.values) {
                *a += *v;
            }
        }
        let n = T::from_count(curves.len());
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(Self {
            grid: first.grid.clone(),
            values: acc,
        })
    }
}

/// Natural cubic spline through `(x_i, y_i)`.
#[derive(Clone, Debug)]
pub struct CubicSpline<T: Scalar> {
    x: Vec<T>,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Scalar> CubicSpline<T> {
    pub fn new(x: &[T], y: &[T]) -> Self {
        let n = x.len();
        let mut m = vec![T::zero(); n];
        if n >= 3 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let two = T::lit(2.0);
            let six = T::lit(6.0);
            let mut diag = vec![T::zero(); n];
            let mut rhs = vec![T::zero(); n];
            let mut upper = vec![T::zero(); n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i] = two * (h0 + h1);
                upper[i] = h1;
                rhs[i] = six * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let lower = x[i] - x[i - 1];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] = rhs[i] - w * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                let next = if i + 1 < n - 1 { upper[i] * m[i + 1] } else { T::zero() };
                m[i] = (rhs[i] - next) / diag[i];
            }
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    pub fn eval(&self, t: T) -> T {
        let n = self.x.len();
        let i = if t <= self.x[0] {
            0
        } else if t >= self.x[n - 1] {
            n - 2
        } else {
            (self.x.partition_point(|p| *p <= t) - 1).min(n - 2)
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let six = T::lit(6.0);
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / six
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::<f64>::new(vec![0.0, 0.5]).is_err());
        assert!(TimeGrid::<f64>::new(vec![0.0, 0.5, 0.9]).is_err());
        assert!(TimeGrid::<f64>::new(vec![0.0, 0.6, 0.5, 1.0]).is_err());
        let g = TimeGrid::<f64>::new(vec![0.0, 0.25, 1.0]).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let g = TimeGrid::<f64>::uniform(11).unwrap();
        let f = SampledCurve::from_fn(&g, |t| 3.0 * t + 1.0);
        assert!((f.integral() - 2.5).abs() < 1e-14);
        let c = g.cumulative_integral(f.values());
        assert!((c[10] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn spline_reproduces_nodes_and_smooth_functions() {
        let g = TimeGrid::<f64>::uniform(101).unwrap();
        let f = SampledCurve::from_fn(&g, |t| (2.0 * std::f64::consts::PI * t).sin());
        let s = f.interpolant();
        for (t, v) in g.points().iter().zip(f.values()) {
            assert!((s.eval(*t) - v).abs() < 1e-12);
        }
        for i in 0..1000 {
            let t = i as f64 / 999.0;
            assert!((s.eval(t) - (2.0 * std::f64::consts::PI * t).sin()).abs() < 1e-5);
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = SampledCurve::zeros(&TimeGrid::<f64>::uniform(5).unwrap());
        let b = SampledCurve::zeros(&TimeGrid::<f64>::uniform(6).unwrap());
        assert_eq!(a.inner(&b), Err(Error::GridMismatch));
    }
}
