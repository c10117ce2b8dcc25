//! Complex gamma function via the Lanczos approximation (g = 7, 9 terms).

use std::f64::consts::PI;

use num_complex::Complex64;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(z) for complex `z`. Poles at the non-positive integers return infinity.
pub fn gamma(z: Complex64) -> Complex64 {
    if let Some(n) = nonpositive_integer(z) {
        let _ = n;
        return Complex64::new(f64::INFINITY, 0.0);
    }
    if z.re < 0.5 {
        // reflection
        let s = (z * PI).sin();
        return Complex64::new(PI, 0.0) / (s * gamma(Complex64::new(1.0, 0.0) - z));
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// 1/Γ(z), entire; exactly zero at the poles of Γ.
pub fn rgamma(z: Complex64) -> Complex64 {
    if nonpositive_integer(z).is_some() {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(1.0, 0.0) / gamma(z)
}

pub fn gamma_real(x: f64) -> f64 {
    gamma(Complex64::new(x, 0.0)).re
}

/// ln Γ(x) for real `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs a positive argument");
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut s = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        s += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + s.ln()
}

fn nonpositive_integer(z: Complex64) -> Option<i64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        Some(z.re as i64)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        let sqrt_pi = PI.sqrt();
        assert_relative_eq!(gamma_real(0.5), sqrt_pi, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(1.5), sqrt_pi / 2.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(-0.5), -2.0 * sqrt_pi, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(5.0), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(0.3), 2.991_568_987_687_590_6, max_relative = 1e-13);
        assert_relative_eq!(1.0 / gamma_real(1.5), std::f64::consts::FRAC_2_SQRT_PI, max_relative = 1e-14);
        assert_relative_eq!(ln_gamma(10.0), 362_880f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(ln_gamma(0.25), gamma_real(0.25).ln(), max_relative = 1e-13);
    }

    #[test]
    fn poles() {
        assert_eq!(rgamma(Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
        assert_eq!(rgamma(Complex64::new(-3.0, 0.0)), Complex64::new(0.0, 0.0));
        assert!(gamma(Complex64::new(-2.0, 0.0)).re.is_infinite());
    }

    #[test]
    fn imaginary_axis_modulus() {
        // |Γ(i y)|² = π / (y sinh(π y))
        for y in [0.3, 1.0, 2.5] {
            let g = gamma(Complex64::new(0.0, y));
            let expected = PI / (y * (PI * y).sinh());
            assert_relative_eq!(g.norm_sqr(), expected, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn recurrence(re in -3.5f64..6.0, im in -4.0f64..4.0) {
            prop_assume!(im.abs() > 1e-3 || (re - re.round()).abs() > 1e-3);
            let z = Complex64::new(re, im);
            let lhs = gamma(z + 1.0);
            let rhs = z * gamma(z);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1e-300));
        }
    }
}
