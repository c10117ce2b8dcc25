//! Quaternion-valued fields on 4-D boxes and their 1-D slices.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::Box4;
use crate::quaternion::CQuaternion;

/// Multi-index of partial derivative orders.
pub type MultiIndex = [u8; 4];

/// A field `x ↦ F(x)` in ψ-coordinates.
pub trait Field: Send + Sync {
    fn eval(&self, x: &[f64; 4]) -> CQuaternion;

    /// `∂^ord F(x)` in closed form, if known.
    fn partial(&self, _ord: MultiIndex, _x: &[f64; 4]) -> Option<CQuaternion> {
        None
    }
}

impl<F> Field for F
where
    F: Fn(&[f64; 4]) -> CQuaternion + Send + Sync,
{
    fn eval(&self, x: &[f64; 4]) -> CQuaternion {
        self(x)
    }
}

/// A field bundled with its domain and a finite-difference fallback.
#[derive(Clone)]
pub struct QField {
    inner: Arc<dyn Field>,
    domain: Box4,
    label: String,
    fd_step: f64,
}

impl fmt::Debug for QField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QField").field("label", &self.label).field("domain", &self.domain).finish()
    }
}

impl QField {
    pub fn new(field: impl Field + 'static, domain: Box4, label: impl Into<String>) -> Self {
        QField { inner: Arc::new(field), domain, label: label.into(), fd_step: 1e-5 }
    }

    pub fn from_arc(field: Arc<dyn Field>, domain: Box4, label: impl Into<String>) -> Self {
        QField { inner: field, domain, label: label.into(), fd_step: 1e-5 }
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_domain(mut self, domain: Box4) -> Self {
        self.domain = domain;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &Box4 {
        &self.domain
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn inner(&self) -> &Arc<dyn Field> {
        &self.inner
    }

    /// `F(x)` without domain checks.
    pub fn value(&self, x: &[f64; 4]) -> CQuaternion {
        self.inner.eval(x)
    }

    /// `F(x)` for `x` in the closed domain.
    pub fn eval(&self, x: &[f64; 4]) -> Result<CQuaternion> {
        if !self.domain.contains_closed(x) {
            return Err(Error::OutsideDomain(*x));
        }
        let v = self.inner.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFinite(*x));
        }
        Ok(v)
    }

    pub fn analytic_partial(&self, ord: MultiIndex, x: &[f64; 4]) -> Option<CQuaternion> {
        if ord == [0; 4] {
            return Some(self.inner.eval(x));
        }
        self.inner.partial(ord, x)
    }

    /// `∂^ord F(x)`: closed form when available, central differences otherwise.
    pub fn partial(&self, ord: MultiIndex, x: &[f64; 4]) -> CQuaternion {
        self.analytic_partial(ord, x).unwrap_or_else(|| self.fd_partial(ord, x))
    }

    /// Central-difference partial with step `fd_step^{1/m}` × side length for total order `m`.
    pub fn fd_partial(&self, ord: MultiIndex, x: &[f64; 4]) -> CQuaternion {
        let m: u32 = ord.iter().map(|&o| o as u32).sum();
        if m == 0 {
            return self.inner.eval(x);
        }
        let base = self.fd_step.powf(1.0 / m as f64);
        let h: [f64; 4] = std::array::from_fn(|k| base * self.domain.len(k));
        fd_multi(&|y| self.inner.eval(y), ord, x, &h)
    }

    /// `t ↦ F(q₀,…,t,…,q₃)` along `axis`.
    pub fn slice(&self, q: [f64; 4], axis: usize) -> Slice<'_> {
        Slice { field: self, base: q, axis }
    }

    pub fn partial_fn(&self, ord: MultiIndex) -> impl Fn(&[f64; 4]) -> CQuaternion + Sync + '_ {
        move |x| self.partial(ord, x)
    }
}

fn fd_multi(f: &(dyn Fn(&[f64; 4]) -> CQuaternion + Sync), ord: MultiIndex, x: &[f64; 4], h: &[f64; 4]) -> CQuaternion {
    let Some(k) = (0..4).find(|&k| ord[k] > 0) else {
        return f(x);
    };
    let m = ord[k] as usize;
    let mut rest = ord;
    rest[k] = 0;
    let mut acc = CQuaternion::ZERO;
    for (i, c) in central_stencil(m).into_iter().enumerate() {
        let mut y = *x;
        y[k] += (m as f64 / 2.0 - i as f64) * h[k];
        acc += fd_multi(f, rest, &y, h) * c;
    }
    acc / h[k].powi(m as i32)
}

// (−1)^i C(m, i) at offsets (m/2 − i) h
fn central_stencil(m: usize) -> Vec<f64> {
    let mut c = vec![1.0; m + 1];
    for i in 1..=m {
        c[i] = c[i - 1] * (m + 1 - i) as f64 / i as f64;
    }
    c.iter().enumerate().map(|(i, v)| if i % 2 == 0 { *v } else { -*v }).collect()
}

/// A quaternion-valued function of one real variable.
pub trait Field1D: Sync {
    fn eval(&self, t: f64) -> CQuaternion;

    /// `f^{(m)}(t)` in closed form, if known.
    fn derivative(&self, _m: usize, _t: f64) -> Option<CQuaternion> {
        None
    }

    /// Whether `f^{(m)}` has an integrable singularity at the left end of
    /// its interval, which calls for a graded rule there.
    fn singular_at_left(&self, _m: usize) -> bool {
        false
    }

    /// `f^{(m)}(a + δ)` given the offset `δ` exactly; fields singular at `a`
    /// override this to avoid cancellation in `(a + δ) − a`.
    fn at_offset(&self, m: usize, a: f64, delta: f64) -> Option<CQuaternion> {
        if m == 0 {
            Some(self.eval(a + delta))
        } else {
            self.derivative(m, a + delta)
        }
    }
}

/// Closure-backed 1-D field with optional analytic derivatives `f', f'', …`.
pub struct FnField1D<'a> {
    pub f: Box<dyn Fn(f64) -> CQuaternion + Sync + 'a>,
    pub derivatives: Vec<Box<dyn Fn(f64) -> CQuaternion + Sync + 'a>>,
    pub left_singular: bool,
}

impl<'a> FnField1D<'a> {
    pub fn new(f: impl Fn(f64) -> CQuaternion + Sync + 'a) -> Self {
        FnField1D { f: Box::new(f), derivatives: Vec::new(), left_singular: false }
    }

    pub fn singular_at_left(mut self) -> Self {
        self.left_singular = true;
        self
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> CQuaternion + Sync + 'a) -> Self {
        self.derivatives.push(Box::new(d));
        self
    }
}

impl Field1D for FnField1D<'_> {
    fn eval(&self, t: f64) -> CQuaternion {
        (self.f)(t)
    }

    fn derivative(&self, m: usize, t: f64) -> Option<CQuaternion> {
        match m {
            0 => Some((self.f)(t)),
            _ => self.derivatives.get(m - 1).map(|d| d(t)),
        }
    }

    fn singular_at_left(&self, _m: usize) -> bool {
        self.left_singular
    }
}

/// `f^{(m)}(t)`, analytic if available, otherwise a central difference with
/// step `h^{1/m}`.
pub fn derivative_1d(f: &dyn Field1D, m: usize, t: f64, h: f64) -> CQuaternion {
    if m == 0 {
        return f.eval(t);
    }
    if let Some(v) = f.derivative(m, t) {
        return v;
    }
    fd_derivative(f, m, t, h)
}

/// As [`derivative_1d`] at `a + δ` with `δ` known exactly.
pub fn derivative_at_offset(f: &dyn Field1D, m: usize, a: f64, delta: f64, h: f64) -> CQuaternion {
    match f.at_offset(m, a, delta) {
        Some(v) => v,
        None => fd_derivative(f, m, a + delta, h),
    }
}

fn fd_derivative(f: &dyn Field1D, m: usize, t: f64, h: f64) -> CQuaternion {
    let step = h.powf(1.0 / m as f64);
    let mut acc = CQuaternion::ZERO;
    for (i, c) in central_stencil(m).into_iter().enumerate() {
        acc += f.eval(t + (m as f64 / 2.0 - i as f64) * step) * c;
    }
    acc / step.powi(m as i32)
}

/// Axis slice of a [`QField`].
#[derive(Clone, Copy)]
pub struct Slice<'a> {
    pub field: &'a QField,
    pub base: [f64; 4],
    pub axis: usize,
}

impl Slice<'_> {
    pub fn point(&self, t: f64) -> [f64; 4] {
        let mut y = self.base;
        y[self.axis] = t;
        y
    }

    pub fn fd_step(&self) -> f64 {
        self.field.fd_step * self.field.domain.len(self.axis)
    }
}

impl Field1D for Slice<'_> {
    fn eval(&self, t: f64) -> CQuaternion {
        self.field.value(&self.point(t))
    }

    fn derivative(&self, m: usize, t: f64) -> Option<CQuaternion> {
        let mut ord = [0u8; 4];
        ord[self.axis] = m as u8;
        Some(self.field.partial(ord, &self.point(t)))
    }
}

/// The constant field `c`.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub CQuaternion);

impl Field for Constant {
    fn eval(&self, _x: &[f64; 4]) -> CQuaternion {
        self.0
    }

    fn partial(&self, _ord: MultiIndex, _x: &[f64; 4]) -> Option<CQuaternion> {
        Some(CQuaternion::ZERO)
    }
}

/// Field given by closures for the value and its first partials; higher
/// partials fall back to differences.
pub struct WithGradient<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> Field for WithGradient<F, G>
where
    F: Fn(&[f64; 4]) -> CQuaternion + Send + Sync,
    G: Fn(usize, &[f64; 4]) -> CQuaternion + Send + Sync,
{
    fn eval(&self, x: &[f64; 4]) -> CQuaternion {
        (self.f)(x)
    }

    fn partial(&self, ord: MultiIndex, x: &[f64; 4]) -> Option<CQuaternion> {
        let m: u8 = ord.iter().sum();
        if m == 1 {
            let k = ord.iter().position(|&o| o == 1).unwrap();
            Some((self.grad)(k, x))
        } else {
            None
        }
    }
}
