//! Real and complex quaternions, structural sets and coordinate maps.
//!
//! Coordinates are always stored against the standard basis `{1, i, j, k}`.
//! A [`StructuralSet`] acts through [`StructuralSet::coords`] and
//! [`StructuralSet::from_coords`].

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality tolerance for structural sets.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A real quaternion `x0 + x1 i + x2 j + x3 k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion(pub [f64; 4]);

/// A complex quaternion `q1 + 𝗂 q2`, stored as four complex coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CQuaternion(pub [Complex64; 4]);

// Hamilton product on raw coordinates; shared by both scalar kinds.
macro_rules! hamilton {
    ($a:expr, $b:expr) => {{
        let a = $a;
        let b = $b;
        [
            a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
        ]
    }};
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion([0.0; 4]);
    pub const ONE: Quaternion = Quaternion([1.0, 0.0, 0.0, 0.0]);
    pub const I: Quaternion = Quaternion([0.0, 1.0, 0.0, 0.0]);
    pub const J: Quaternion = Quaternion([0.0, 0.0, 1.0, 0.0]);
    pub const K: Quaternion = Quaternion([0.0, 0.0, 0.0, 1.0]);

    pub const fn new(x0: f64, x1: f64, x2: f64, x3: f64) -> Self {
        Quaternion([x0, x1, x2, x3])
    }

    pub fn scalar(s: f64) -> Self {
        Quaternion([s, 0.0, 0.0, 0.0])
    }

    pub fn conj(&self) -> Self {
        let x = self.0;
        Quaternion([x[0], -x[1], -x[2], -x[3]])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Euclidean scalar product `<q, x> = Re(conj(q) x)`.
    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Quaternion(self.0.map(|c| c * s))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn to_complex(self) -> CQuaternion {
        CQuaternion::from(self)
    }
}

/// `<q, x> = ½(conj(q) x + conj(x) q)`; the result is real.
pub fn scalar_product(q: &Quaternion, x: &Quaternion) -> f64 {
    q.dot(x)
}

/// `<q, x>_ψ = Σ q_k x_k` with coordinates taken in the ψ basis.
pub fn psi_scalar_product(q: &Quaternion, x: &Quaternion, psi: &StructuralSet) -> f64 {
    let qc = psi.coords(q);
    let xc = psi.coords(x);
    qc.iter().zip(xc.iter()).map(|(a, b)| a * b).sum()
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion(self.0.map(|c| -c))
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        Quaternion(hamilton!(self.0, rhs.0))
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: f64) -> Quaternion {
        self.scale(rhs)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, rhs: Quaternion) {
        *self = *self + rhs;
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.0;
        write!(f, "{} {:+}i {:+}j {:+}k", x[0], x[1], x[2], x[3])
    }
}

impl CQuaternion {
    pub const ZERO: CQuaternion = CQuaternion([Complex64::new(0.0, 0.0); 4]);

    pub fn new(c: [Complex64; 4]) -> Self {
        CQuaternion(c)
    }

    /// `q1 + 𝗂 q2`.
    pub fn from_parts(re: Quaternion, im: Quaternion) -> Self {
        CQuaternion(std::array::from_fn(|k| Complex64::new(re.0[k], im.0[k])))
    }

    pub fn one() -> Self {
        Quaternion::ONE.into()
    }

    pub fn re(&self) -> Quaternion {
        Quaternion(self.0.map(|c| c.re))
    }

    pub fn im(&self) -> Quaternion {
        Quaternion(self.0.map(|c| c.im))
    }

    /// Quaternionic conjugation; the complex unit is left untouched.
    pub fn conj(&self) -> Self {
        let x = self.0;
        CQuaternion([x[0], -x[1], -x[2], -x[3]])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CQuaternion(self.0.map(|c| c * s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        CQuaternion(self.0.map(|c| c * s))
    }

    /// Largest modulus over the four complex coordinates.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Coordinate `k` against the standard basis.
    pub fn coord(&self, k: usize) -> Complex64 {
        self.0[k]
    }
}

impl From<Quaternion> for CQuaternion {
    fn from(q: Quaternion) -> Self {
        CQuaternion(q.0.map(|c| Complex64::new(c, 0.0)))
    }
}

impl Add for CQuaternion {
    type Output = CQuaternion;
    fn add(self, rhs: CQuaternion) -> CQuaternion {
        CQuaternion(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for CQuaternion {
    type Output = CQuaternion;
    fn sub(self, rhs: CQuaternion) -> CQuaternion {
        CQuaternion(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for CQuaternion {
    type Output = CQuaternion;
    fn neg(self) -> CQuaternion {
        CQuaternion(self.0.map(|c| -c))
    }
}

impl Mul for CQuaternion {
    type Output = CQuaternion;
    fn mul(self, rhs: CQuaternion) -> CQuaternion {
        CQuaternion(hamilton!(self.0, rhs.0))
    }
}

impl Mul<Quaternion> for CQuaternion {
    type Output = CQuaternion;
    fn mul(self, rhs: Quaternion) -> CQuaternion {
        let b = rhs.0;
        let a = self.0;
        CQuaternion([
            a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
        ])
    }
}

impl Mul<CQuaternion> for Quaternion {
    type Output = CQuaternion;
    fn mul(self, rhs: CQuaternion) -> CQuaternion {
        let a = self.0;
        let b = rhs.0;
        CQuaternion([
            b[0] * a[0] - b[1] * a[1] - b[2] * a[2] - b[3] * a[3],
            b[1] * a[0] + b[0] * a[1] + b[3] * a[2] - b[2] * a[3],
            b[2] * a[0] - b[3] * a[1] + b[0] * a[2] + b[1] * a[3],
            b[3] * a[0] + b[2] * a[1] - b[1] * a[2] + b[0] * a[3],
        ])
    }
}

impl Mul<Complex64> for CQuaternion {
    type Output = CQuaternion;
    fn mul(self, rhs: Complex64) -> CQuaternion {
        self.scale(rhs)
    }
}

impl Mul<f64> for CQuaternion {
    type Output = CQuaternion;
    fn mul(self, rhs: f64) -> CQuaternion {
        self.scale_re(rhs)
    }
}

impl Div<f64> for CQuaternion {
    type Output = CQuaternion;
    fn div(self, rhs: f64) -> CQuaternion {
        self.scale_re(1.0 / rhs)
    }
}

impl AddAssign for CQuaternion {
    fn add_assign(&mut self, rhs: CQuaternion) {
        for k in 0..4 {
            self.0[k] += rhs.0[k];
        }
    }
}

impl SubAssign for CQuaternion {
    fn sub_assign(&mut self, rhs: CQuaternion) {
        for k in 0..4 {
            self.0[k] -= rhs.0[k];
        }
    }
}

impl MulAssign<f64> for CQuaternion {
    fn mul_assign(&mut self, rhs: f64) {
        for k in 0..4 {
            self.0[k] *= rhs;
        }
    }
}

impl std::iter::Sum for CQuaternion {
    fn sum<I: Iterator<Item = CQuaternion>>(iter: I) -> Self {
        iter.fold(CQuaternion::ZERO, |acc, q| acc + q)
    }
}

impl fmt::Display for CQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.0;
        write!(f, "({}) + ({})i + ({})j + ({})k", x[0], x[1], x[2], x[3])
    }
}

/// An orthonormal quadruple `ψ = {ψ0, ψ1, ψ2, ψ3}` with its orientation sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralSet {
    psi: [Quaternion; 4],
    sgn: i8,
}

impl StructuralSet {
    /// `{1, i, j, k}`.
    pub fn standard() -> Self {
        StructuralSet {
            psi: [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K],
            sgn: 1,
        }
    }

    /// Validates orthonormality and derives the orientation sign from the
    /// determinant of the coordinate matrix.
    pub fn new(v: [Quaternion; 4]) -> Result<Self> {
        for k in 0..4 {
            for s in 0..4 {
                let target = if k == s { 1.0 } else { 0.0 };
                let deviation = (v[k].dot(&v[s]) - target).abs();
                if deviation > ORTHONORMAL_TOL {
                    return Err(Error::NotOrthonormal { k, s, deviation });
                }
            }
        }
        let m: [[f64; 4]; 4] = std::array::from_fn(|r| v[r].0);
        let sgn = if det4(&m) > 0.0 { 1 } else { -1 };
        Ok(StructuralSet { psi: v, sgn })
    }

    /// Same set with every element conjugated, `{ψ̄0, .., ψ̄3}`.
    pub fn conjugated(&self) -> Self {
        let v = self.psi.map(|q| q.conj());
        StructuralSet::new(v).expect("conjugation preserves orthonormality")
    }

    pub fn elements(&self) -> &[Quaternion; 4] {
        &self.psi
    }

    pub fn get(&self, k: usize) -> Quaternion {
        self.psi[k]
    }

    pub fn sgn(&self) -> i8 {
        self.sgn
    }

    /// Coordinates of `q` in the ψ basis, `coords(q)_k = <q, ψ_k>`.
    pub fn coords(&self, q: &Quaternion) -> [f64; 4] {
        std::array::from_fn(|k| q.dot(&self.psi[k]))
    }

    pub fn from_coords(&self, c: &[f64; 4]) -> Quaternion {
        let mut out = Quaternion::ZERO;
        for k in 0..4 {
            out += self.psi[k].scale(c[k]);
        }
        out
    }

    /// Complex-coordinate version of [`Self::from_coords`].
    pub fn from_complex_coords(&self, c: &[Complex64; 4]) -> CQuaternion {
        let mut out = CQuaternion::ZERO;
        for k in 0..4 {
            out += CQuaternion::from(self.psi[k]).scale(c[k]);
        }
        out
    }

    /// ψ-coordinates of a complex quaternion (real orthonormal change of basis).
    pub fn complex_coords(&self, q: &CQuaternion) -> [Complex64; 4] {
        std::array::from_fn(|k| {
            let p = self.psi[k].0;
            (0..4).map(|m| q.0[m] * p[m]).sum()
        })
    }
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut det = 0.0;
    for c in 0..4 {
        let minor: [[f64; 3]; 3] = std::array::from_fn(|r| {
            let mut row = [0.0; 3];
            let mut idx = 0;
            for cc in 0..4 {
                if cc != c {
                    row[idx] = m[r + 1][cc];
                    idx += 1;
                }
            }
            row
        });
        let d3 = minor[0][0] * (minor[1][1] * minor[2][2] - minor[1][2] * minor[2][1])
            - minor[0][1] * (minor[1][0] * minor[2][2] - minor[1][2] * minor[2][0])
            + minor[0][2] * (minor[1][0] * minor[2][1] - minor[1][1] * minor[2][0]);
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[0][c] * d3;
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quat() -> impl Strategy<Value = Quaternion> {
        prop::array::uniform4(-10.0f64..10.0).prop_map(Quaternion)
    }

    fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        (a - b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
    }

    // term-by-term expansion over the basis multiplication table
    fn table_product(a: Quaternion, b: Quaternion) -> Quaternion {
        let basis = [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K];
        // (sign, index) of e_r * e_s
        let table: [[(f64, usize); 4]; 4] = [
            [(1.0, 0), (1.0, 1), (1.0, 2), (1.0, 3)],
            [(1.0, 1), (-1.0, 0), (1.0, 3), (-1.0, 2)],
            [(1.0, 2), (-1.0, 3), (-1.0, 0), (1.0, 1)],
            [(1.0, 3), (1.0, 2), (-1.0, 1), (-1.0, 0)],
        ];
        let mut out = Quaternion::ZERO;
        for r in 0..4 {
            for s in 0..4 {
                let (sign, idx) = table[r][s];
                out += basis[idx].scale(sign * a.0[r] * b.0[s]);
            }
        }
        out
    }

    #[test]
    fn basis_rules() {
        assert_eq!(Quaternion::I * Quaternion::J, Quaternion::K);
        assert_eq!(Quaternion::J * Quaternion::I, -Quaternion::K);
        assert_eq!(Quaternion::J * Quaternion::K, Quaternion::I);
        assert_eq!(Quaternion::K * Quaternion::J, -Quaternion::I);
        assert_eq!(Quaternion::K * Quaternion::I, Quaternion::J);
        assert_eq!(Quaternion::I * Quaternion::I, -Quaternion::ONE);
        let q = Quaternion::new(1.5, -2.0, 0.25, 3.0);
        assert_eq!(Quaternion::ONE * q, q);
    }

    #[test]
    fn i_plus_j_times_i_minus_j() {
        let a = Quaternion::I + Quaternion::J;
        let b = Quaternion::I - Quaternion::J;
        // i·i − i·j + j·i − j·j = −1 − k − k + 1 = −2k
        assert_eq!(a * b, Quaternion::new(0.0, 0.0, 0.0, -2.0));
        assert_eq!(a * b, table_product(a, b));
    }

    #[test]
    fn conjugation_examples() {
        assert_eq!(Quaternion::I.conj(), -Quaternion::I);
        let q = Quaternion::new(1.0, 2.0, -3.0, 0.5);
        let n = 1.0 + 4.0 + 9.0 + 0.25;
        assert_eq!(q * q.conj(), Quaternion::scalar(n));
        assert_eq!(q.conj() * q, Quaternion::scalar(n));
    }

    #[test]
    fn scalar_products() {
        assert_eq!(scalar_product(&Quaternion::I, &Quaternion::I), 1.0);
        assert_eq!(scalar_product(&Quaternion::I, &Quaternion::J), 0.0);
    }

    #[test]
    fn structural_set_orientation() {
        let std = StructuralSet::new([Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K])
            .unwrap();
        assert_eq!(std.sgn(), 1);
        let swapped =
            StructuralSet::new([Quaternion::ONE, Quaternion::J, Quaternion::I, Quaternion::K])
                .unwrap();
        assert_eq!(swapped.sgn(), -1);
        let bad = StructuralSet::new([
            Quaternion::ONE,
            Quaternion::I,
            Quaternion::J,
            Quaternion::K.scale(2.0),
        ]);
        assert!(matches!(bad, Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn coordinate_maps() {
        let std = StructuralSet::standard();
        assert_eq!(std.coords(&Quaternion::K), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(std.coords(&Quaternion::new(1.0, 2.0, 0.0, 0.0)), [1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn complex_embedding_matches_real() {
        let a = Quaternion::new(0.3, -1.0, 2.0, 0.7);
        let b = Quaternion::new(-1.1, 0.4, 0.0, 2.5);
        let ca = CQuaternion::from(a);
        let cb = CQuaternion::from(b);
        assert_eq!((ca * cb).re(), a * b);
        assert_eq!((ca * cb).im(), Quaternion::ZERO);
        assert_eq!(ca.conj().re(), a.conj());
        assert_eq!((ca + cb).re(), a + b);
    }

    #[test]
    fn complex_unit_commutes_with_basis() {
        let unit = CQuaternion::from_parts(Quaternion::ZERO, Quaternion::ONE);
        for e in [Quaternion::I, Quaternion::J, Quaternion::K] {
            let e = CQuaternion::from(e);
            assert_eq!(unit * e, e * unit);
        }
    }

    fn rotated_set(angle: f64) -> StructuralSet {
        // left multiplication by a unit quaternion preserves orthonormality
        let u = Quaternion::new(angle.cos(), angle.sin() * 0.6, 0.0, angle.sin() * 0.8);
        let v = [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K].map(|e| u * e);
        StructuralSet::new(v).unwrap()
    }

    proptest! {
        #[test]
        fn product_is_associative(a in quat(), b in quat(), c in quat()) {
            prop_assert!(close((a * b) * c, a * (b * c), 1e-12));
        }

        #[test]
        fn product_distributes(a in quat(), b in quat(), c in quat()) {
            prop_assert!(close(a * (b + c), a * b + a * c, 1e-12));
        }

        #[test]
        fn product_matches_table(a in quat(), b in quat()) {
            prop_assert!(close(a * b, table_product(a, b), 1e-12));
        }

        #[test]
        fn conj_reverses_products(q in quat(), x in quat()) {
            prop_assert!(close((q * x).conj(), x.conj() * q.conj(), 1e-12));
        }

        #[test]
        fn scalar_product_matches_formula(q in quat(), x in quat()) {
            let formula = (q.conj() * x + x.conj() * q).scale(0.5);
            prop_assert!((formula.0[0] - scalar_product(&q, &x)).abs() <= 1e-12 * (1.0 + q.norm() * x.norm()));
            prop_assert!(formula.0[1..].iter().all(|c| c.abs() <= 1e-12 * (1.0 + q.norm() * x.norm())));
        }

        #[test]
        fn structural_set_completeness(q in quat(), angle in 0.0f64..std::f64::consts::TAU) {
            let psi = rotated_set(angle);
            let c = psi.coords(&q);
            prop_assert!(close(psi.from_coords(&c), q, 1e-12));
            prop_assert!((psi_scalar_product(&q, &q, &psi) - q.norm_sqr()).abs() < 1e-9);
        }

        #[test]
        fn complex_product_associative(a in quat(), b in quat(), c in quat(), d in quat()) {
            let x = CQuaternion::from_parts(a, b);
            let y = CQuaternion::from_parts(c, d);
            let z = CQuaternion::from_parts(b, a);
            let lhs = (x * y) * z;
            let rhs = x * (y * z);
            prop_assert!((lhs - rhs).max_abs() <= 1e-9 * (1.0 + lhs.max_abs()));
        }
    }
}
