//! Polynomial fields and power series in `(t − a)` with closed-form
//! Riemann–Liouville integrals and derivatives.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::field::{Field, Field1D, MultiIndex};
use crate::gamma::{gamma, rgamma};
use crate::quaternion::{CQuaternion, Quaternion};

/// `Σ c_e x^e` with quaternion coefficients and monomials in the four ψ-coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly4 {
    terms: BTreeMap<MultiIndex, Quaternion>,
}

impl Poly4 {
    pub fn zero() -> Self {
        Poly4::default()
    }

    pub fn constant(c: Quaternion) -> Self {
        Poly4::default().with_term([0; 4], c)
    }

    /// The coordinate monomial `x_k · c`.
    pub fn coordinate(k: usize, c: Quaternion) -> Self {
        let mut e = [0u8; 4];
        e[k] = 1;
        Poly4::default().with_term(e, c)
    }

    pub fn with_term(mut self, e: MultiIndex, c: Quaternion) -> Self {
        self.add_term(e, c);
        self
    }

    pub fn add_term(&mut self, e: MultiIndex, c: Quaternion) {
        let slot = self.terms.entry(e).or_insert(Quaternion::ZERO);
        *slot += c;
        if slot.max_abs() == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Quaternion)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.iter().map(|&v| v as usize).sum()).max().unwrap_or(0)
    }

    pub fn eval_q(&self, x: &[f64; 4]) -> Quaternion {
        let mut acc = Quaternion::ZERO;
        for (e, c) in &self.terms {
            acc += c.scale(monomial(e, x));
        }
        acc
    }

    /// `∂^ord p` as a polynomial.
    pub fn derivative(&self, ord: MultiIndex) -> Poly4 {
        let mut out = Poly4::zero();
        for (e, c) in &self.terms {
            if (0..4).any(|k| e[k] < ord[k]) {
                continue;
            }
            let mut factor = 1.0;
            let mut ne = *e;
            for k in 0..4 {
                for i in 0..ord[k] {
                    factor *= (e[k] - i) as f64;
                }
                ne[k] -= ord[k];
            }
            out.add_term(ne, c.scale(factor));
        }
        out
    }

    /// Univariate restriction `t ↦ p(q₀,…,t,…,q₃)` written in powers of `(t − a)`.
    pub fn slice_series(&self, q: &[f64; 4], axis: usize, a: f64) -> FracSeries {
        let deg = self.terms.keys().map(|e| e[axis] as usize).max().unwrap_or(0);
        let mut in_t = vec![Quaternion::ZERO; deg + 1];
        for (e, c) in &self.terms {
            let mut y = *q;
            y[axis] = 1.0;
            let mut rest = *e;
            rest[axis] = 0;
            in_t[e[axis] as usize] += c.scale(monomial(&rest, &y));
        }
        // t^m = Σ_l C(m,l) a^{m−l} (t−a)^l
        let mut shifted = vec![Quaternion::ZERO; deg + 1];
        for (m, c) in in_t.iter().enumerate() {
            let mut binom = 1.0;
            for l in 0..=m {
                if l > 0 {
                    binom = binom * (m + 1 - l) as f64 / l as f64;
                }
                shifted[l] += c.scale(binom * a.powi((m - l) as i32));
            }
        }
        let mut s = FracSeries::new(a);
        for (l, c) in shifted.into_iter().enumerate() {
            if c.max_abs() != 0.0 {
                s.push(Complex64::new(l as f64, 0.0), c.into());
            }
        }
        s
    }

    pub fn left_mul(&self, c: Quaternion) -> Poly4 {
        Poly4 { terms: self.terms.iter().map(|(e, v)| (*e, c * *v)).collect() }
    }

    pub fn add(&self, other: &Poly4) -> Poly4 {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, *c);
        }
        out
    }

    /// Pointwise product (coefficients multiply in order).
    pub fn mul(&self, other: &Poly4) -> Poly4 {
        let mut out = Poly4::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e = std::array::from_fn(|k| e1[k] + e2[k]);
                out.add_term(e, *c1 * *c2);
            }
        }
        out
    }
}

fn monomial(e: &MultiIndex, x: &[f64; 4]) -> f64 {
    (0..4).map(|k| x[k].powi(e[k] as i32)).product()
}

impl Field for Poly4 {
    fn eval(&self, x: &[f64; 4]) -> CQuaternion {
        self.eval_q(x).into()
    }

    fn partial(&self, ord: MultiIndex, x: &[f64; 4]) -> Option<CQuaternion> {
        let mut acc = Quaternion::ZERO;
        'terms: for (e, c) in &self.terms {
            let mut v = 1.0;
            for k in 0..4 {
                if e[k] < ord[k] {
                    continue 'terms;
                }
                for i in 0..ord[k] {
                    v *= (e[k] - i) as f64;
                }
                v *= x[k].powi((e[k] - ord[k]) as i32);
            }
            acc += c.scale(v);
        }
        Some(acc.into())
    }
}

/// `Σ c_k (t − a)^{p_k}` with complex exponents, valid for `t ≥ a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FracSeries {
    pub a: f64,
    pub terms: Vec<(Complex64, CQuaternion)>,
}

fn cpow(base: f64, p: Complex64) -> Complex64 {
    if base == 0.0 {
        if p == Complex64::new(0.0, 0.0) {
            Complex64::new(1.0, 0.0)
        } else if p.re > 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(f64::INFINITY, 0.0)
        }
    } else if p.im == 0.0 {
        Complex64::new(base.powf(p.re), 0.0)
    } else {
        (p * base.ln()).exp()
    }
}

impl FracSeries {
    pub fn new(a: f64) -> Self {
        FracSeries { a, terms: Vec::new() }
    }

    pub fn monomial(a: f64, p: Complex64, c: CQuaternion) -> Self {
        FracSeries { a, terms: vec![(p, c)] }
    }

    pub fn push(&mut self, p: Complex64, c: CQuaternion) {
        self.terms.push((p, c));
    }

    pub fn value(&self, t: f64) -> CQuaternion {
        let d = t - self.a;
        self.terms.iter().map(|(p, c)| c.scale(cpow(d, *p))).sum()
    }

    /// Closed-form `I^γ_{a+}`: `(t−a)^p ↦ Γ(p+1)/Γ(p+1+γ) (t−a)^{p+γ}`.
    pub fn rl_integral(&self, gamma_: Complex64) -> FracSeries {
        let one = Complex64::new(1.0, 0.0);
        FracSeries {
            a: self.a,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| (p + gamma_, c.scale(gamma(p + one) * rgamma(p + one + gamma_))))
                .collect(),
        }
    }

    /// Closed-form `D^α_{a+}`: `(t−a)^p ↦ Γ(p+1)/Γ(p+1−α) (t−a)^{p−α}` (zero at poles).
    pub fn rl_derivative(&self, alpha: Complex64) -> FracSeries {
        self.rl_integral(-alpha)
    }

    /// Ordinary derivative of order `m`.
    pub fn diff(&self, m: usize) -> FracSeries {
        FracSeries {
            a: self.a,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| {
                    let mut f = Complex64::new(1.0, 0.0);
                    for i in 0..m {
                        f *= p - i as f64;
                    }
                    (p - m as f64, c.scale(f))
                })
                .filter(|(_, c)| c.max_abs() != 0.0)
                .collect(),
        }
    }
}

impl Field1D for FracSeries {
    fn eval(&self, t: f64) -> CQuaternion {
        self.value(t)
    }

    fn derivative(&self, m: usize, t: f64) -> Option<CQuaternion> {
        Some(self.diff(m).value(t))
    }

    fn at_offset(&self, m: usize, a: f64, delta: f64) -> Option<CQuaternion> {
        let d = if a == self.a { delta } else { a + delta - self.a };
        let s = if m == 0 { None } else { Some(self.diff(m)) };
        let s = s.as_ref().unwrap_or(self);
        Some(s.terms.iter().map(|(p, c)| c.scale(cpow(d, *p))).sum())
    }

    fn singular_at_left(&self, m: usize) -> bool {
        self.diff(m).terms.iter().any(|(p, _)| p.im != 0.0 || p.re < 0.0 || p.re.fract() != 0.0)
    }
}
