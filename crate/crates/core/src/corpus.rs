//! Seeded test-field corpus and sample points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{Constant, QField};
use crate::poly::Poly4;
use crate::quadrature::Box4;
use crate::quaternion::Quaternion;

/// Number of random polynomials in [`corpus`].
pub const RANDOM_FIELDS: usize = 12;

fn random_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    Quaternion(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
}

/// A polynomial with every monomial of total degree `≤ degree` and
/// coefficients uniform in `[−1, 1]⁴`.
pub fn random_poly(rng: &mut ChaCha8Rng, degree: u8) -> Poly4 {
    let mut p = Poly4::zero();
    for e0 in 0..=degree {
        for e1 in 0..=degree - e0 {
            for e2 in 0..=degree - e0 - e1 {
                for e3 in 0..=degree - e0 - e1 - e2 {
                    p.add_term([e0, e1, e2, e3], random_quaternion(rng));
                }
            }
        }
    }
    p
}

/// `x₀ + x₁ i + x₂ j + x₃ k`.
pub fn identity_poly() -> Poly4 {
    Poly4::coordinate(0, Quaternion::ONE)
        .add(&Poly4::coordinate(1, Quaternion::I))
        .add(&Poly4::coordinate(2, Quaternion::J))
        .add(&Poly4::coordinate(3, Quaternion::K))
}

/// `x₁ − i x₀`, left and right regular for the standard structural set.
pub fn regular_poly() -> Poly4 {
    Poly4::coordinate(1, Quaternion::ONE).add(&Poly4::coordinate(0, -Quaternion::I))
}

/// The seeded polynomials `poly00…poly11` of degree ≤ 3.
pub fn random_fields(seed: u64, bx: &Box4) -> Vec<QField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..RANDOM_FIELDS).map(|i| QField::new(random_poly(&mut rng, 3), *bx, format!("poly{i:02}"))).collect()
}

/// The fixed fields: the constants `1` and `j`, the identity and `x₁ − i x₀`.
pub fn special_fields(bx: &Box4) -> Vec<QField> {
    vec![
        QField::new(Constant(Quaternion::ONE.into()), *bx, "one"),
        QField::new(Constant(Quaternion::J.into()), *bx, "const_j"),
        QField::new(identity_poly(), *bx, "identity"),
        QField::new(regular_poly(), *bx, "regular"),
    ]
}

/// Random fields followed by the special ones.
pub fn corpus(seed: u64, bx: &Box4) -> Vec<QField> {
    let mut v = random_fields(seed, bx);
    v.extend(special_fields(bx));
    v
}

/// `count` pairs `(q, x)` drawn uniformly from the middle 80% of each axis.
pub fn sample_pairs(seed: u64, bx: &Box4, count: usize) -> Vec<([f64; 4], [f64; 4])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let point = |rng: &mut ChaCha8Rng| -> [f64; 4] { std::array::from_fn(|k| bx.a[k] + bx.len(k) * rng.gen_range(0.1..0.9)) };
    (0..count)
        .map(|_| {
            let q = point(&mut rng);
            let x = point(&mut rng);
            (q, x)
        })
        .collect()
}
