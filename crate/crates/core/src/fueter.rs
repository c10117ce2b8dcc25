//! Classical ψ-Fueter operators, the Cauchy kernel, the Teodorescu transform
//! and the Stokes and Borel–Pompeiu identities on boxes.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::QField;
use crate::quadrature::{cube_moment, cube_rule, in_cube, integrate_around, integrate_faces, Box4, FormSide, Grading, QuadratureSpec, TensorRule};
use crate::quaternion::{CQuaternion, Quaternion, StructuralSet};
use crate::residual::{Residual, TracePoint};

pub(crate) const UNIT: [[u8; 4]; 4] = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]];

/// `Σ ψ_k ∂_k F(x)` without domain checks.
pub fn fueter_left_at(f: &QField, psi: &StructuralSet, x: &[f64; 4]) -> CQuaternion {
    (0..4).map(|k| psi.get(k) * f.partial(UNIT[k], x)).sum()
}

/// `Σ ∂_k F(x) ψ_k` without domain checks.
pub fn fueter_right_at(f: &QField, psi: &StructuralSet, x: &[f64; 4]) -> CQuaternion {
    (0..4).map(|k| f.partial(UNIT[k], x) * psi.get(k)).sum()
}

fn check_domain(f: &QField, x: &[f64; 4]) -> Result<()> {
    if !f.domain().contains_closed(x) {
        return Err(Error::OutsideDomain(*x));
    }
    Ok(())
}

/// Left ψ-Fueter operator `ψD[F](x) = Σ ψ_k ∂_k F(x)`.
pub fn psi_fueter_left(f: &QField, psi: &StructuralSet, x: &[f64; 4]) -> Result<CQuaternion> {
    check_domain(f, x)?;
    Ok(fueter_left_at(f, psi, x))
}

/// Right ψ-Fueter operator `ψD_r[F](x) = Σ ∂_k F(x) ψ_k`.
pub fn psi_fueter_right(f: &QField, psi: &StructuralSet, x: &[f64; 4]) -> Result<CQuaternion> {
    check_domain(f, x)?;
    Ok(fueter_right_at(f, psi, x))
}

/// `K_ψ(u) = conj(u_ψ) / (2π² |u|⁴)` with `u_ψ = Σ u_k ψ_k`.
pub fn kernel(psi: &StructuralSet, u: &[f64; 4]) -> Quaternion {
    let r2 = u.iter().map(|v| v * v).sum::<f64>();
    psi.from_coords(u).conj().scale(1.0 / (2.0 * PI * PI * r2 * r2))
}

/// `∂K_ψ/∂u_k = (conj(ψ_k) |u|² − 4 u_k conj(u_ψ)) / (2π² |u|⁶)`.
pub fn kernel_partial(psi: &StructuralSet, u: &[f64; 4], k: usize) -> Quaternion {
    let r2 = u.iter().map(|v| v * v).sum::<f64>();
    let num = psi.get(k).conj().scale(r2) - psi.from_coords(u).conj().scale(4.0 * u[k]);
    num.scale(1.0 / (2.0 * PI * PI * r2 * r2 * r2))
}

/// Cauchy kernel `K_ψ(τ − x)`.
pub fn cauchy_kernel(psi: &StructuralSet, tau: &[f64; 4], x: &[f64; 4]) -> Result<Quaternion> {
    let u: [f64; 4] = std::array::from_fn(|k| tau[k] - x[k]);
    if u.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-14 {
        return Err(Error::SingularPoint);
    }
    Ok(kernel(psi, &u))
}

/// Per-level values of a transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub value: CQuaternion,
    /// `(level, ε, value)` from coarse to fine.
    pub trace: Vec<(usize, f64, CQuaternion)>,
}

fn interior_radius(bx: &Box4, x: &[f64; 4], eps: f64) -> Result<f64> {
    if !bx.contains_open(x) {
        return Err(Error::OutsideDomain(*x));
    }
    let d = bx.distance_to_boundary(x);
    if d < eps {
        return Err(Error::OnBoundary(*x));
    }
    Ok(0.5 * d)
}

/// `∫_{box ∖ B(x, ε)} K_ψ(x − y) F(y) dy` at one level.
pub fn teodorescu_at(f: &QField, psi: &StructuralSet, bx: &Box4, x: &[f64; 4], spec: &QuadratureSpec) -> Result<CQuaternion> {
    let eps = spec.epsilon(bx);
    let radius = interior_radius(bx, x, eps)?;
    teodorescu_rigid(f, psi, bx, x, spec, radius)
}

fn teodorescu_rigid(f: &QField, psi: &StructuralSet, bx: &Box4, x: &[f64; 4], spec: &QuadratureSpec, radius: f64) -> Result<CQuaternion> {
    let eps = spec.epsilon(bx);
    // K(x − y) = −K(y − x): the orientation for which ψD ∘ ψT = I holds
    let r = integrate_around(bx, x, eps, spec.singular_order, spec.power(), Some(radius), |y, u| -(kernel(psi, u) * f.value(y)))?;
    Ok(r.value)
}

/// Teodorescu transform `ψT[F](x) = ∫ K_ψ(x − y) F(y) dy` over the refinement
/// schedule of `spec`; the value is the finest level's.
pub fn teodorescu(f: &QField, psi: &StructuralSet, bx: &Box4, x: &[f64; 4], spec: &QuadratureSpec) -> Result<Transform> {
    spec.validate()?;
    let mut trace = Vec::new();
    for lvl in spec.levels(bx) {
        let s = spec.at_level(&lvl);
        trace.push((lvl.level, lvl.epsilon, teodorescu_at(f, psi, bx, x, &s)?));
    }
    Ok(Transform { value: trace.last().map(|t| t.2).unwrap_or_default(), trace })
}

/// `∂_k ψT[F](x)` for each axis by central differences on a mesh whose
/// refinement around `x` moves rigidly with the stencil, so the excluded node
/// set is the same for every stencil point.
pub fn teodorescu_gradient(f: &QField, psi: &StructuralSet, bx: &Box4, x: &[f64; 4], spec: &QuadratureSpec) -> Result<[CQuaternion; 4]> {
    let eps = spec.epsilon(bx);
    let radius = interior_radius(bx, x, eps)?;
    let h = spec.fd_step.powf(2.0 / 3.0) * bx.diameter();
    if h >= 0.5 * radius {
        return Err(Error::OnBoundary(*x));
    }
    let mut out = [CQuaternion::ZERO; 4];
    for k in 0..4 {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += h;
        xm[k] -= h;
        let tp = teodorescu_rigid(f, psi, bx, &xp, spec, 0.5 * radius)?;
        let tm = teodorescu_rigid(f, psi, bx, &xm, spec, 0.5 * radius)?;
        out[k] = (tp - tm) / (2.0 * h);
    }
    Ok(out)
}

/// `ψD_x ψT[F](x)` from [`teodorescu_gradient`].
pub fn teodorescu_fueter(f: &QField, psi: &StructuralSet, bx: &Box4, x: &[f64; 4], spec: &QuadratureSpec) -> Result<CQuaternion> {
    let g = teodorescu_gradient(f, psi, bx, x, spec)?;
    Ok((0..4).map(|k| psi.get(k) * g[k]).sum())
}

/// Residual of `ψD ∘ ψT[F] = F` at `x` across the refinement schedule.
pub fn verify_teodorescu_inversion(f: &QField, psi: &StructuralSet, bx: &Box4, x: &[f64; 4], spec: &QuadratureSpec) -> Result<Residual> {
    spec.validate()?;
    let target = f.eval(x)?;
    let mut levels = Vec::new();
    for lvl in spec.levels(bx) {
        let s = spec.at_level(&lvl);
        let v = teodorescu_fueter(f, psi, bx, x, &s)?;
        levels.push((point(&lvl), v, target));
    }
    Ok(Residual::from_levels(levels))
}

fn point(lvl: &crate::quadrature::Level) -> TracePoint {
    TracePoint { level: lvl.level, residual: 0.0, order: lvl.order, epsilon: lvl.epsilon, skipped_fraction: 0.0 }
}

/// `Σ_faces ∫ σ F` or `∫ F σ`, for a closure over face points.
pub fn boundary_form<F>(bx: &Box4, psi: &StructuralSet, grading: &Grading, n: usize, power: f64, side: FormSide, f: F) -> Result<CQuaternion>
where
    F: Fn(&[f64; 4]) -> CQuaternion + Sync,
{
    integrate_faces(bx, grading, n, power, |face, y| {
        let s = face.sigma(psi);
        Ok(Some(match side {
            FormSide::Left => s * f(&y),
            FormSide::Right => f(&y) * s,
        }))
    })
    .map(|r| r.0)
}

/// Residual of `∫_∂ g σ f = ∫ (g ψD[f] + ψD_r[g] f)` over the schedule of
/// Gauss orders; boundary and volume sides use independent rules.
pub fn verify_stokes_classical(f: &QField, g: &QField, bx: &Box4, psi: &StructuralSet, spec: &QuadratureSpec) -> Result<Residual> {
    spec.validate()?;
    let mut levels = Vec::new();
    for lvl in spec.levels(bx) {
        let n = lvl.order;
        let lhs = integrate_faces(bx, &Grading::none(), n, 1.0, |face, y| Ok(Some(g.value(&y) * face.sigma(psi) * f.value(&y))))?.0;
        let rhs = TensorRule::gauss(bx, n)
            .integrate(|_, y| Ok(Some(g.value(&y) * fueter_left_at(f, psi, &y) + fueter_right_at(g, psi, &y) * f.value(&y))))?
            .0;
        levels.push((point(&lvl), lhs, rhs));
    }
    Ok(Residual::from_levels(levels))
}

/// Left side of the Borel–Pompeiu formula at one level:
/// `∫_∂ (K σ f + g σ K) − ∫_{box ∖ C_ε(x)} (K ψD[f] + ψD_r[g] K)` plus the
/// leading-order share of the cube `C_ε(x)` of half-width `ε` (see
/// [`excluded_share`]), and the excluded measure fraction.
pub fn borel_pompeiu_lhs(f: &QField, g: &QField, bx: &Box4, psi: &StructuralSet, x: &[f64; 4], spec: &QuadratureSpec) -> Result<(CQuaternion, f64)> {
    let eps = spec.epsilon(bx);
    if bx.distance_to_boundary(x) < eps {
        return Err(Error::OnBoundary(*x));
    }
    let grading = Grading::point(*x);
    let n = spec.order;
    let boundary = integrate_faces(bx, &grading, n, spec.power().min(2.0), |face, y| {
        let u: [f64; 4] = std::array::from_fn(|k| y[k] - x[k]);
        let k = kernel(psi, &u);
        let s = face.sigma(psi);
        Ok(Some(k * s * f.value(&y) + g.value(&y) * s * k))
    })?
    .0;
    let (vol, skipped) = cube_rule(bx, x, eps, spec.singular_order, spec.power(), false).integrate(|_, y| {
        let u: [f64; 4] = std::array::from_fn(|k| y[k] - x[k]);
        if in_cube(&u, eps) {
            return Ok(None);
        }
        let k = kernel(psi, &u);
        Ok(Some(k * fueter_left_at(f, psi, &y) + fueter_right_at(g, psi, &y) * k))
    })?;
    let ball = if bx.contains_open(x) {
        let grad = |h: &QField, right: bool| -> [CQuaternion; 4] {
            std::array::from_fn(|k| {
                (0..4)
                    .map(|j| {
                        let mut ord = UNIT[j];
                        ord[k] += 1;
                        let d = h.partial(ord, x);
                        if right { d * psi.get(j) } else { psi.get(j) * d }
                    })
                    .sum()
            })
        };
        excluded_share(psi, cube_moment(eps), &grad(f, false), &grad(g, true))
    } else {
        CQuaternion::ZERO
    };
    Ok((boundary - vol - ball, skipped / bx.measure()))
}

/// Leading term of an excluded neighbourhood's share of a Borel–Pompeiu volume
/// integral, `∫ (K(y−x) h_l(y) + h_r(y) K(y−x)) dy ≈ m Σ_k (conj(ψ_k) ∂_k h_l(x) + ∂_k h_r(x) conj(ψ_k))`
/// with `m = 1/(2π²) ∫ u_k²/|u|⁴ du` over the neighbourhood (`ε²/8` for a ball).
/// The odd part of `K` cancels the zeroth-order term; the next correction is `O(ε⁴)`.
pub fn excluded_share(psi: &StructuralSet, moment: f64, grad_left: &[CQuaternion; 4], grad_right: &[CQuaternion; 4]) -> CQuaternion {
    let s: CQuaternion = (0..4).map(|k| psi.get(k).conj() * grad_left[k] + grad_right[k] * psi.get(k).conj()).sum();
    s * moment
}

/// Residual of the Borel–Pompeiu formula against `f(x) + g(x)` inside the box
/// and `0` outside, across the refinement schedule.
pub fn verify_borel_pompeiu_classical(f: &QField, g: &QField, bx: &Box4, psi: &StructuralSet, x: &[f64; 4], spec: &QuadratureSpec) -> Result<Residual> {
    spec.validate()?;
    if bx.distance_to_boundary(x) < spec.epsilon(bx) {
        return Err(Error::OnBoundary(*x));
    }
    let target = if bx.contains_open(x) { f.value(x) + g.value(x) } else { CQuaternion::ZERO };
    let mut levels = Vec::new();
    for lvl in spec.levels(bx) {
        let s = spec.at_level(&lvl);
        let (lhs, skipped) = borel_pompeiu_lhs(f, g, bx, psi, x, &s)?;
        let mut p = point(&lvl);
        p.skipped_fraction = skipped;
        levels.push((p, lhs, target));
    }
    Ok(Residual::from_levels(levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Constant;
    use crate::poly::Poly4;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn identity() -> QField {
        let p = Poly4::coordinate(0, Quaternion::ONE)
            .add(&Poly4::coordinate(1, Quaternion::I))
            .add(&Poly4::coordinate(2, Quaternion::J))
            .add(&Poly4::coordinate(3, Quaternion::K));
        QField::new(p, Box4::unit(), "identity")
    }

    fn regular() -> QField {
        // x1 − i x0
        let p = Poly4::coordinate(1, Quaternion::ONE).add(&Poly4::coordinate(0, -Quaternion::I));
        QField::new(p, Box4::unit(), "regular")
    }

    fn one() -> QField {
        QField::new(Constant(Quaternion::ONE.into()), Box4::unit(), "one")
    }

    #[test]
    fn fueter_examples() {
        let psi = StructuralSet::standard();
        let x = [0.3, 0.4, 0.5, 0.6];
        assert_eq!(psi_fueter_left(&one(), &psi, &x).unwrap(), CQuaternion::ZERO);
        let d = psi_fueter_left(&identity(), &psi, &x).unwrap();
        assert!((d - Quaternion::scalar(-2.0).into()).max_abs() < 1e-15);
        assert!(psi_fueter_left(&regular(), &psi, &x).unwrap().max_abs() < 1e-15);
        assert!(matches!(psi_fueter_left(&one(), &psi, &[2.0, 0.0, 0.0, 0.0]), Err(Error::OutsideDomain(_))));
        // numeric partials agree with analytic ones
        let numeric = QField::new(move |y: &[f64; 4]| identity().value(y), Box4::unit(), "numeric");
        let dn = psi_fueter_right(&numeric, &psi, &x).unwrap();
        assert!((dn - Quaternion::scalar(-2.0).into()).max_abs() < 1e-5);
    }

    #[test]
    fn kernel_examples() {
        let psi = StructuralSet::standard();
        let c = 1.0 / (2.0 * PI * PI);
        let k = cauchy_kernel(&psi, &[1.0, 0.0, 0.0, 0.0], &[0.0; 4]).unwrap();
        assert_abs_diff_eq!(k.0[0], c, epsilon = 1e-15);
        let k = cauchy_kernel(&psi, &[0.5, 1.5, 0.5, 0.5], &[0.5; 4]).unwrap();
        assert_abs_diff_eq!(k.0[1], -c, epsilon = 1e-15);
        assert_eq!(cauchy_kernel(&psi, &[0.5; 4], &[0.5; 4]), Err(Error::SingularPoint));
    }

    #[test]
    fn kernel_partials_match_differences() {
        let psi = StructuralSet::new([Quaternion::J, Quaternion::ONE, Quaternion::K, Quaternion::I]).unwrap();
        let u = [0.3, -0.2, 0.5, 0.1];
        for k in 0..4 {
            let h = 1e-6;
            let mut up = u;
            let mut um = u;
            up[k] += h;
            um[k] -= h;
            let fd = (kernel(&psi, &up) - kernel(&psi, &um)).scale(0.5 / h);
            assert!((fd - kernel_partial(&psi, &u, k)).max_abs() < 1e-6 * kernel_partial(&psi, &u, k).max_abs().max(1.0));
        }
    }

    fn rotated_psi(angle: f64) -> StructuralSet {
        let u = Quaternion::new(angle.cos(), 0.0, 0.0, angle.sin());
        StructuralSet::new([Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K].map(|e| u * e)).unwrap()
    }

    proptest! {
        #[test]
        fn kernel_is_homogeneous(u in prop::array::uniform4(-2.0f64..2.0), lam in 0.1f64..5.0) {
            prop_assume!(u.iter().map(|v| v * v).sum::<f64>() > 1e-2);
            let psi = StructuralSet::standard();
            let lu = u.map(|v| lam * v);
            let lhs = kernel(&psi, &lu);
            let rhs = kernel(&psi, &u).scale(lam.powi(-3));
            prop_assert!((lhs - rhs).max_abs() <= 1e-12 * rhs.max_abs().max(1e-3));
        }

        #[test]
        fn kernel_is_two_sided_regular(u in prop::array::uniform4(-1.0f64..1.0), angle in 0.0f64..6.3) {
            let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(r >= 0.5);
            let psi = rotated_psi(angle);
            let mut left = Quaternion::ZERO;
            let mut right = Quaternion::ZERO;
            for k in 0..4 {
                let h = 1e-5;
                let mut up = u;
                let mut um = u;
                up[k] += h;
                um[k] -= h;
                let d = (kernel(&psi, &up) - kernel(&psi, &um)).scale(0.5 / h);
                left += psi.get(k) * d;
                right += d * psi.get(k);
            }
            prop_assert!(left.max_abs() < 1e-4 && right.max_abs() < 1e-4);
        }
    }

    #[test]
    fn stokes_on_constants_and_regular_fields() {
        let psi = StructuralSet::standard();
        let bx = Box4::unit();
        let spec = QuadratureSpec::default();
        let r = verify_stokes_classical(&one(), &one(), &bx, &psi, &spec).unwrap();
        assert!(r.value <= 1e-12);
        let r = verify_stokes_classical(&regular(), &one(), &bx, &psi, &spec).unwrap();
        assert!(r.value <= 1e-8 && r.lhs.max_abs() <= 1e-8);
    }

    #[test]
    fn borel_pompeiu_reproduces_constants() {
        let psi = StructuralSet::standard();
        let bx = Box4::unit();
        let zero = QField::new(Constant(CQuaternion::ZERO), bx, "zero");
        let spec = QuadratureSpec::default();
        let r = verify_borel_pompeiu_classical(&one(), &zero, &bx, &psi, &[0.4, 0.5, 0.6, 0.45], &spec).unwrap();
        assert!(r.value <= 5e-3 && r.strictly_decreasing(), "{r:?}");
        let r = verify_borel_pompeiu_classical(&one(), &zero, &bx, &psi, &[1.4, 0.5, 0.6, 0.45], &spec).unwrap();
        assert!(r.value <= 5e-3 && r.strictly_decreasing(), "{r:?}");
        let r = verify_borel_pompeiu_classical(&regular(), &zero, &bx, &psi, &[0.4, 0.5, 0.6, 0.45], &spec).unwrap();
        assert!(r.value <= 5e-3, "{r:?}");
        let err = verify_borel_pompeiu_classical(&one(), &zero, &bx, &psi, &[0.005, 0.5, 0.5, 0.5], &spec);
        assert!(matches!(err, Err(Error::OnBoundary(_))));
    }

    #[test]
    fn teodorescu_of_zero_and_inversion() {
        let psi = StructuralSet::standard();
        let bx = Box4::unit();
        let zero = QField::new(Constant(CQuaternion::ZERO), bx, "zero");
        let spec = QuadratureSpec::default();
        let x = [0.45, 0.5, 0.55, 0.5];
        assert_eq!(teodorescu(&zero, &psi, &bx, &x, &spec).unwrap().value, CQuaternion::ZERO);
        let r = verify_teodorescu_inversion(&identity(), &psi, &bx, &x, &spec).unwrap();
        assert!(r.value <= 1e-3, "{r:?}");
    }
}
