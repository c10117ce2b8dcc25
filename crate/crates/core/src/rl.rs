//! Left-sided Riemann–Liouville fractional integrals and derivatives.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{derivative_1d, derivative_at_offset, Field1D, QField};
use crate::gamma::rgamma;
use crate::quadrature::{gauss_jacobi, gauss_legendre, graded_offsets, graded_rule, QuadratureSpec, QuatSum, Rule1D};
use crate::quaternion::CQuaternion;
use crate::residual::Residual;

/// Orders `α⃗ = (α₀,…,α₃)` sharing `n = ⌊Re α_ℓ⌋ + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlphaRepr", into = "AlphaRepr")]
pub struct AlphaVec {
    alpha: [Complex64; 4],
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AlphaRepr {
    Real([f64; 4]),
    Complex([[f64; 2]; 4]),
}

impl TryFrom<AlphaRepr> for AlphaVec {
    type Error = Error;

    fn try_from(r: AlphaRepr) -> Result<Self> {
        match r {
            AlphaRepr::Real(v) => AlphaVec::real(v),
            AlphaRepr::Complex(v) => AlphaVec::new(v.map(|c| Complex64::new(c[0], c[1]))),
        }
    }
}

impl From<AlphaVec> for AlphaRepr {
    fn from(a: AlphaVec) -> Self {
        if a.alpha.iter().all(|c| c.im == 0.0) {
            AlphaRepr::Real(a.alpha.map(|c| c.re))
        } else {
            AlphaRepr::Complex(a.alpha.map(|c| [c.re, c.im]))
        }
    }
}

impl AlphaVec {
    pub fn new(alpha: [Complex64; 4]) -> Result<Self> {
        let n = order_of(alpha[0])?;
        for a in &alpha[1..] {
            if order_of(*a)? != n {
                return Err(Error::InvalidOrder(format!("orders {alpha:?} do not share n = [Re α] + 1")));
            }
        }
        Ok(AlphaVec { alpha, n })
    }

    pub fn real(alpha: [f64; 4]) -> Result<Self> {
        AlphaVec::new(alpha.map(|a| Complex64::new(a, 0.0)))
    }

    pub fn uniform(a: f64) -> Result<Self> {
        AlphaVec::real([a; 4])
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.alpha[k]
    }

    pub fn values(&self) -> [Complex64; 4] {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `n·1⃗ − α⃗`, kept unvalidated since integer parts may differ from `α⃗`.
    pub fn complement(&self) -> [Complex64; 4] {
        self.alpha.map(|a| Complex64::new(self.n as f64, 0.0) - a)
    }

    pub fn is_real(&self) -> bool {
        self.alpha.iter().all(|a| a.im == 0.0)
    }
}

fn order_of(a: Complex64) -> Result<usize> {
    if !(a.re > 0.0) || !a.is_finite() || a.re.fract() == 0.0 {
        return Err(Error::InvalidOrder(format!("Re α = {} must be positive and non-integer", a.re)));
    }
    Ok(a.re.floor() as usize + 1)
}

fn check_interval(a: f64, x: f64) -> Result<()> {
    if !(x > a) {
        return Err(Error::DomainError { a, x });
    }
    Ok(())
}

fn cpow_pos(base: f64, p: Complex64) -> Complex64 {
    if p.im == 0.0 {
        Complex64::new(base.powf(p.re), 0.0)
    } else {
        (p * base.ln()).exp()
    }
}

/// How the integrand behaves at the left endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeftEnd {
    /// Smooth: Gauss–Jacobi toward `x` alone is exact on polynomials.
    #[default]
    Smooth,
    /// Weakly singular at `a`: split in half and grade the left half.
    Singular,
}

// Nodes as (offset from a, offset to x, weight including (x − τ)^{Re α − 1}).
fn weighted_rule(a: f64, x: f64, alpha: Complex64, n: usize, left: LeftEnd, power: f64) -> Result<Vec<(f64, f64, f64)>> {
    let mu = alpha.re - 1.0;
    let toward_x = |lo: f64| -> Vec<(f64, f64, f64)> {
        let (offs, ws) = graded_offsets(n, x - lo, power);
        offs.iter().zip(&ws).rev().map(|(d, w)| (x - d - a, *d, w * d.powf(mu))).collect()
    };
    let jacobi = |lo: f64| -> Result<Vec<(f64, f64, f64)>> {
        if alpha.im != 0.0 {
            // the phase (x − τ)^{i Im α} is not smooth at x; grade instead
            return Ok(toward_x(lo));
        }
        let r = gauss_jacobi(n, mu, lo, x)?;
        Ok(r.nodes.iter().zip(&r.weights).map(|(t, w)| (t - a, x - t, *w)).collect())
    };
    match left {
        LeftEnd::Smooth => jacobi(a),
        LeftEnd::Singular => {
            let mid = 0.5 * (a + x);
            let (offs, ws) = graded_offsets(n, mid - a, power);
            let mut out: Vec<(f64, f64, f64)> =
                offs.iter().zip(&ws).map(|(d, w)| (*d, x - a - d, w * (x - a - d).powf(mu))).collect();
            out.extend(jacobi(mid)?);
            Ok(out)
        }
    }
}

fn integrate_weighted(nodes: &[(f64, f64, f64)], alpha: Complex64, f: impl Fn(f64) -> CQuaternion) -> CQuaternion {
    let im = Complex64::new(0.0, alpha.im);
    let mut acc = QuatSum::default();
    for &(da, d, w) in nodes {
        let v = f(da);
        if alpha.im == 0.0 {
            acc.add(v, w);
        } else {
            acc.add(v.scale((im * d.ln()).exp()), w);
        }
    }
    acc.value().scale(rgamma(alpha))
}

fn left_end(f: &dyn Field1D, m: usize) -> LeftEnd {
    if f.singular_at_left(m) {
        LeftEnd::Singular
    } else {
        LeftEnd::Smooth
    }
}

/// `I^α_{a+} f(x) = 1/Γ(α) ∫_a^x f(τ)(x−τ)^{α−1} dτ` by Gauss–Jacobi with weight
/// exponent `Re α − 1` and `spec.order` nodes.
pub fn rl_integral(f: &dyn Field1D, a: f64, alpha: Complex64, x: f64, spec: &QuadratureSpec) -> Result<CQuaternion> {
    rl_integral_with(f, a, alpha, x, spec, left_end(f, 0))
}

pub fn rl_integral_with(f: &dyn Field1D, a: f64, alpha: Complex64, x: f64, spec: &QuadratureSpec, left: LeftEnd) -> Result<CQuaternion> {
    if !(alpha.re > 0.0) {
        return Err(Error::InvalidOrder(format!("Re α = {} must be positive", alpha.re)));
    }
    check_interval(a, x)?;
    let nodes = weighted_rule(a, x, alpha, spec.order, left, spec.grading_power)?;
    let h = spec.fd_step * (x - a);
    Ok(integrate_weighted(&nodes, alpha, |d| derivative_at_offset(f, 0, a, d, h)))
}

/// `d^m/dx^m I^γ_{a+} f(x) = Σ_{k<m} f^{(k)}(a)(x−a)^{γ+k−m}/Γ(γ+k−m+1) + I^γ f^{(m)}(x)`.
pub fn rl_diff_integral(f: &dyn Field1D, a: f64, gamma_: Complex64, m: usize, x: f64, spec: &QuadratureSpec) -> Result<CQuaternion> {
    if !(gamma_.re > 0.0) {
        return Err(Error::InvalidOrder(format!("Re γ = {} must be positive", gamma_.re)));
    }
    check_interval(a, x)?;
    let h = spec.fd_step * (x - a);
    let mut acc = CQuaternion::ZERO;
    for k in 0..m {
        let p = gamma_ + k as f64 - m as f64;
        acc += derivative_1d(f, k, a, h).scale(cpow_pos(x - a, p) * rgamma(p + 1.0));
    }
    let nodes = weighted_rule(a, x, gamma_, spec.order, left_end(f, m), spec.grading_power)?;
    Ok(acc + integrate_weighted(&nodes, gamma_, |d| derivative_at_offset(f, m, a, d, h)))
}

/// `D^α_{a+} f(x)` for `0 < Re α < 1` in the form `f(a)(x−a)^{−α}/Γ(1−α) + I^{1−α} f′(x)`.
pub fn rl_derivative(f: &dyn Field1D, a: f64, alpha: Complex64, x: f64, spec: &QuadratureSpec) -> Result<CQuaternion> {
    if !(alpha.re > 0.0 && alpha.re < 1.0) {
        return Err(Error::InvalidOrder(format!("Re α = {} must lie in (0, 1)", alpha.re)));
    }
    rl_diff_integral(f, a, 1.0 - alpha, 1, x, spec)
}

/// `D^α_{a+} f(x) = d/dx I^{1−α} f(x)` by a five-point central difference of
/// the integral, step `fd_step^{3/5}·(x − a)`. Needs no derivative of `f`, so
/// it also serves as an independent route for composed operators.
pub fn rl_derivative_fd(f: &dyn Field1D, a: f64, alpha: Complex64, x: f64, spec: &QuadratureSpec) -> Result<CQuaternion> {
    if !(alpha.re > 0.0 && alpha.re < 1.0) {
        return Err(Error::InvalidOrder(format!("Re α = {} must lie in (0, 1)", alpha.re)));
    }
    check_interval(a, x)?;
    let h = spec.fd_step.powf(0.6) * (x - a);
    let left = left_end(f, 0);
    let i = |t: f64| rl_integral_with(f, a, 1.0 - alpha, t, spec, left);
    let d = (i(x - 2.0 * h)? - i(x + 2.0 * h)?) + (i(x + h)? - i(x - h)?) * 8.0;
    Ok(d / (12.0 * h))
}

/// `D^α_{a+} f(x)` for `n − 1 < Re α < n` from the supplied derivatives
/// `f′, …, f^{(n)}`.
pub fn rl_derivative_n(
    f: &dyn Field1D,
    a: f64,
    alpha: Complex64,
    x: f64,
    n: usize,
    derivatives: &[&dyn Field1D],
    spec: &QuadratureSpec,
) -> Result<CQuaternion> {
    if n == 0 || !(alpha.re > (n - 1) as f64 && alpha.re < n as f64) {
        return Err(Error::InvalidOrder(format!("Re α = {} is not in ({}, {n})", alpha.re, n as f64 - 1.0)));
    }
    if derivatives.len() < n {
        return Err(Error::MissingDerivative { needed: n, given: derivatives.len() });
    }
    check_interval(a, x)?;
    let mut acc = CQuaternion::ZERO;
    for m in 0..n {
        let fm = if m == 0 { f.eval(a) } else { derivatives[m - 1].eval(a) };
        let p = Complex64::new(m as f64, 0.0) - alpha;
        acc += fm.scale(cpow_pos(x - a, p) * rgamma(p + 1.0));
    }
    Ok(acc + rl_integral(derivatives[n - 1], a, Complex64::new(n as f64, 0.0) - alpha, x, spec)?)
}

/// `I^{α_j}` along axis `j` of `t ↦ F(q₀,…,t,…,q₃)`, based at `a_j` of the field's domain.
pub fn partial_rl_integral(f: &QField, j: usize, alpha: Complex64, q: &[f64; 4], xj: f64, spec: &QuadratureSpec) -> Result<CQuaternion> {
    let a = f.domain().a[j];
    rl_integral(&f.slice(*q, j), a, alpha, xj, spec)
}

/// `D^{α_j}` along axis `j`, stabilized form.
pub fn partial_rl_derivative(f: &QField, j: usize, alpha: Complex64, q: &[f64; 4], xj: f64, spec: &QuadratureSpec) -> Result<CQuaternion> {
    let a = f.domain().a[j];
    let s = f.slice(*q, j);
    if !(alpha.re > 0.0 && alpha.re < 1.0) {
        return Err(Error::InvalidOrder(format!("Re α = {} must lie in (0, 1)", alpha.re)));
    }
    check_interval(a, xj)?;
    let spec = QuadratureSpec { fd_step: f.fd_step(), ..*spec };
    rl_diff_integral(&s, a, 1.0 - alpha, 1, xj, &spec)
}

/// `I^γ_{a+}` of a function with a sharp interior peak at `t_peak` of width
/// `width`: geometric panels around the peak, the last panel graded toward `x`.
#[allow(clippy::too_many_arguments)]
pub fn rl_integral_peaked(
    f: &(dyn Fn(f64) -> CQuaternion + Sync),
    a: f64,
    gamma_: Complex64,
    x: f64,
    t_peak: f64,
    width: f64,
    n: usize,
    power: f64,
) -> Result<CQuaternion> {
    if !(gamma_.re > 0.0) {
        return Err(Error::InvalidOrder(format!("Re γ = {} must be positive", gamma_.re)));
    }
    check_interval(a, x)?;
    let mut cuts = vec![a, x];
    let w = width.max(1e-12);
    let mut k = 0;
    loop {
        let d = w * 2f64.powi(k);
        let mut inside = false;
        for c in [t_peak - d, t_peak + d] {
            if c > a && c < x {
                cuts.push(c);
                inside = true;
            }
        }
        if (!inside && d > (x - a)) || k > 60 {
            break;
        }
        k += 1;
    }
    if t_peak > a && t_peak < x {
        cuts.push(t_peak);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mu = gamma_.re - 1.0;
    let mut nodes: Vec<(f64, f64, f64)> = Vec::new();
    let last = cuts.len() - 2;
    for (i, seg) in cuts.windows(2).enumerate() {
        let (lo, hi) = (seg[0], seg[1]);
        if i == last {
            let r = gauss_jacobi(n, mu, lo, hi)?;
            nodes.extend(r.nodes.iter().zip(&r.weights).map(|(t, w)| (t - a, x - t, *w)));
        } else {
            let r: Rule1D = if power > 1.0 && hi - lo > 4.0 * w { graded_rule(n, lo, hi, false, false, power) } else { gauss_legendre(n, lo, hi) };
            nodes.extend(r.nodes.iter().zip(&r.weights).map(|(t, wt)| (t - a, x - t, wt * (x - t).powf(mu))));
        }
    }
    Ok(integrate_weighted(&nodes, gamma_, |d| f(a + d)))
}

/// `t ↦ I^α_{a+} f(t)` with first derivative `f(a)(t−a)^{α−1}/Γ(α) + I^α f′(t)`,
/// both by quadrature.
struct IntegralOf<'a> {
    f: &'a dyn Field1D,
    a: f64,
    alpha: Complex64,
    spec: &'a QuadratureSpec,
}

struct DerivativeOf<'a>(&'a dyn Field1D);

impl Field1D for DerivativeOf<'_> {
    fn eval(&self, t: f64) -> CQuaternion {
        self.0.derivative(1, t).unwrap_or_else(|| CQuaternion::new([Complex64::new(f64::NAN, 0.0); 4]))
    }
}

impl Field1D for IntegralOf<'_> {
    fn eval(&self, t: f64) -> CQuaternion {
        if t <= self.a {
            return CQuaternion::ZERO;
        }
        rl_integral(self.f, self.a, self.alpha, t, self.spec).unwrap_or_else(|_| CQuaternion::new([Complex64::new(f64::NAN, 0.0); 4]))
    }

    fn derivative(&self, m: usize, t: f64) -> Option<CQuaternion> {
        self.at_offset(m, self.a, t - self.a)
    }

    fn singular_at_left(&self, _m: usize) -> bool {
        true
    }

    fn at_offset(&self, m: usize, a: f64, delta: f64) -> Option<CQuaternion> {
        match m {
            0 => Some(self.eval(a + delta)),
            1 => {
                let head = self.f.eval(a).scale(cpow_pos(delta, self.alpha - 1.0) * rgamma(self.alpha));
                let tail = rl_integral_with(&DerivativeOf(self.f), a, self.alpha, a + delta, self.spec, LeftEnd::Smooth).ok()?;
                Some(head + tail)
            }
            _ => None,
        }
    }
}

/// Residual of `D^α I^α f(x) = f(x)` for `0 < Re α < 1` with both operators
/// evaluated by quadrature; `f` must supply its first derivative.
pub fn fundamental_check(f: &dyn Field1D, a: f64, alpha: Complex64, x: f64, spec: &QuadratureSpec) -> Result<Residual> {
    check_interval(a, x)?;
    if f.derivative(1, x).is_none() {
        return Err(Error::MissingDerivative { needed: 1, given: 0 });
    }
    let g = IntegralOf { f, a, alpha, spec };
    let lhs = rl_derivative(&g, a, alpha, x, spec)?;
    Ok(Residual::single(lhs, f.eval(x)))
}
