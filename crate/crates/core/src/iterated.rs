//! Iterated ψ-Fueter operators, the iterated fractional operator, and the
//! higher-order Borel–Pompeiu chain over nested boxes.
//!
//! The chain for `J₁ ⊃ J̄₂ ⊃ … ⊃ J̄ₙ` is evaluated from the outermost box in:
//! `Φ₁(τ) = B₁[ψD^{n−1}F](τ) − V₁[ψD^nF](τ)` is tabulated on a Chebyshev grid of
//! `J̄₂`, then `Φ_ℓ = B_ℓ[ψD^{n−ℓ}F] − V_ℓ[Φ_{ℓ−1}]` on a grid of `J̄_{ℓ+1}`, and
//! finally `B_n[F](x) − V_n[Φ_{n−1}](x)`. Here `B` is the Cauchy boundary
//! integral and `V` the Cauchy volume integral with an excluded cube and its
//! leading-order share restored. Each table keeps one component per term of
//! the chain, so the alternating terms are reported separately.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, MultiIndex, QField};
use crate::frac_fueter::{check_point, correction_n, frac_kernel, roundtrip_frak_i, slice_sum, sum_frac_deriv_check, with_coord, BpMode, FracBpReport, GammaConvention, MappedIntegral};
use crate::fueter::{excluded_share, fueter_left_at, kernel, teodorescu_gradient, UNIT};
use crate::quadrature::{cube_moment, cube_rule, in_cube, integrate_faces, Box4, Grading, Level, QuadratureSpec, TensorRule};
use crate::quaternion::{CQuaternion, StructuralSet};
use crate::residual::{Residual, TracePoint};
use crate::rl::AlphaVec;

/// Boxes `J₁ ⊃ J̄₂ ⊃ … ⊃ J̄ₙ`, outermost first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedBoxes {
    boxes: Vec<Box4>,
}

impl NestedBoxes {
    /// Fails with `NestingViolation(k)` when `J̄_{k+1}` is not strictly inside `J_k`.
    pub fn new(boxes: Vec<Box4>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidBox("no boxes given".into()));
        }
        for (k, w) in boxes.windows(2).enumerate() {
            let (outer, inner) = (&w[0], &w[1]);
            if (0..4).any(|m| !(inner.a[m] > outer.a[m] && inner.b[m] < outer.b[m])) {
                return Err(Error::NestingViolation(k + 1));
            }
        }
        Ok(NestedBoxes { boxes })
    }

    pub fn boxes(&self) -> &[Box4] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn innermost(&self) -> &Box4 {
        self.boxes.last().expect("nonempty")
    }

    pub fn outermost(&self) -> &Box4 {
        &self.boxes[0]
    }
}

/// `y ↦ ψD[F](y)` as a field; its partials come from those of `F`.
pub struct FueterOf {
    field: QField,
    psi: StructuralSet,
}

impl Field for FueterOf {
    fn eval(&self, x: &[f64; 4]) -> CQuaternion {
        fueter_left_at(&self.field, &self.psi, x)
    }

    fn partial(&self, ord: MultiIndex, x: &[f64; 4]) -> Option<CQuaternion> {
        Some(
            (0..4)
                .map(|k| {
                    let mut o = ord;
                    o[k] += 1;
                    self.psi.get(k) * self.field.partial(o, x)
                })
                .sum(),
        )
    }
}

/// `ψD^{(m)}[F]` as a field on the domain of `F`.
pub fn fueter_power(f: &QField, psi: &StructuralSet, m: usize) -> QField {
    let mut g = f.clone();
    for _ in 0..m {
        let label = format!("D({})", g.label());
        let h = g.fd_step();
        g = QField::new(FueterOf { field: g, psi: *psi }, *f.domain(), label).with_fd_step(h);
    }
    g
}

/// `ψ⁽¹⁾D ∘ ⋯ ∘ ψ⁽ᵐ⁾D [F](x)` (left) or the right-handed composition, with
/// `sets[0]` applied last. Expands to `Σ ψ⁽¹⁾_{k₁}⋯ψ⁽ᵐ⁾_{kₘ} ∂_{k₁}⋯∂_{kₘ}F`.
pub fn fueter_chain(f: &QField, sets: &[StructuralSet], x: &[f64; 4], right: bool) -> Result<CQuaternion> {
    if !f.domain().contains_closed(x) {
        return Err(Error::OutsideDomain(*x));
    }
    fn go(f: &QField, sets: &[StructuralSet], x: &[f64; 4], right: bool, ord: MultiIndex, depth: usize) -> CQuaternion {
        if depth == sets.len() {
            return f.partial(ord, x);
        }
        let mut acc = CQuaternion::ZERO;
        for k in 0..4 {
            let mut o = ord;
            o[k] += 1;
            let inner = go(f, sets, x, right, o, depth + 1);
            let p = sets[depth].get(k);
            acc += if right { inner * p } else { p * inner };
        }
        acc
    }
    Ok(go(f, sets, x, right, [0; 4], 0))
}

/// Left iterated operator `ΨD = ψD ∘ ⋯ ∘ ψD` (`n` times).
pub fn iterated_fueter_left(f: &QField, psi: &StructuralSet, n: usize, x: &[f64; 4]) -> Result<CQuaternion> {
    fueter_chain(f, &vec![*psi; n], x, false)
}

/// Right iterated operator `ΨD_r = ψD_r ∘ ⋯ ∘ ψD_r` (`n` times).
pub fn iterated_fueter_right(f: &QField, psi: &StructuralSet, n: usize, x: &[f64; 4]) -> Result<CQuaternion> {
    fueter_chain(f, &vec![*psi; n], x, true)
}

/// Iterated fractional operator `Ψ𝔇^α⃗[F](q, x) = ΨD_x 𝓘[F](q, x, n⃗ − α⃗)` with
/// `n = [Re α] + 1`; right-handed when `right` is set.
pub fn iterated_frac_fueter(f: &QField, psi: &StructuralSet, q: &[f64; 4], x: &[f64; 4], alpha: &AlphaVec, spec: &QuadratureSpec, right: bool) -> Result<CQuaternion> {
    check_point(f.domain(), q, x)?;
    let n = alpha.n();
    let m = MappedIntegral::new(f, *q, alpha.complement(), spec)?.into_field("mapped");
    let v = fueter_chain(&m, &vec![*psi; n], x, right)?;
    if !v.is_finite() {
        return Err(Error::NonFinite(*x));
    }
    Ok(v)
}

/// Outcome of the inversion identity for `Ψ𝔇 ∘ 𝕴 ∘ ψT^{(n−1)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub n: usize,
    pub residual: Residual,
    /// `n = 1`: magnitude of the terms the outer operator produces from the
    /// constant summands of `𝕴`.
    pub cross: Option<f64>,
}

fn bracket(psi: &StructuralSet, j: usize, v: CQuaternion) -> CQuaternion {
    let p = psi.get(j);
    (v + p * v.conj() * p) / 2.0
}

/// `Ψ𝔇^α⃗ ∘ 𝕴^{α⃗−(n−1)1⃗} ∘ ψT^{(n−1)}[F](q, x)` against
/// `½Σ_j [F(s_j) + ψ_j (ψD^{(n−1)} conj(ψT^{(n−1)}F))(s_j) ψ_j]`, `s_j = (q₀,…,x_j,…,q₃)`.
///
/// `n = 1` composes the operators numerically. For `n = 2` the map
/// `x ↦ 𝕴[h](q, x)` is a sum of one-variable terms, so the outer operator
/// reduces to `Σ_j ψ_j² ∂_j⟨h, ψ_j⟩(s_j)` with `h = ψT[F]`, whose gradient is
/// taken by rigid-mesh differences over the refinement schedule.
pub fn inversion_check_t(f: &QField, psi: &StructuralSet, q: &[f64; 4], x: &[f64; 4], alpha: &AlphaVec, spec: &QuadratureSpec) -> Result<InversionReport> {
    spec.validate()?;
    let bx = f.domain();
    check_point(bx, q, x)?;
    match alpha.n() {
        1 => {
            let r = roundtrip_frak_i(f, psi, q, x, alpha, spec)?;
            let mut rhs = CQuaternion::ZERO;
            for j in 0..4 {
                rhs += bracket(psi, j, f.eval(&with_coord(q, j, x[j]))?);
            }
            Ok(InversionReport { n: 1, residual: Residual::single(r.axiswise, rhs), cross: Some(r.cross) })
        }
        2 => {
            let mut levels = Vec::new();
            for lvl in spec.levels(bx) {
                let s = spec.at_level(&lvl);
                let (mut lhs, mut rhs) = (CQuaternion::ZERO, CQuaternion::ZERO);
                for j in 0..4 {
                    let sj = with_coord(q, j, x[j]);
                    let g = teodorescu_gradient(f, psi, bx, &sj, &s)?;
                    let p = psi.get(j);
                    lhs += p * p * component(psi, &g[j], j);
                    let dbar: CQuaternion = (0..4).map(|k| psi.get(k) * g[k].conj()).sum();
                    rhs += (f.eval(&sj)? + p * dbar * p) / 2.0;
                }
                levels.push((point(&lvl, 0.0), lhs, rhs));
            }
            Ok(InversionReport { n: 2, residual: Residual::from_levels(levels), cross: None })
        }
        n => Err(Error::InvalidOrder(format!("inversion check supports n ∈ {{1, 2}}, got {n}"))),
    }
}

fn component(psi: &StructuralSet, v: &CQuaternion, j: usize) -> CQuaternion {
    CQuaternion::one().scale(psi.complex_coords(v)[j])
}

fn point(lvl: &Level, skipped: f64) -> TracePoint {
    TracePoint { level: lvl.level, residual: 0.0, order: lvl.order, epsilon: lvl.epsilon, skipped_fraction: skipped }
}

/// Tensor Chebyshev grid on a box.
#[derive(Debug, Clone)]
struct Grid {
    nodes: [Vec<f64>; 4],
}

impl Grid {
    fn new(bx: &Box4, p: usize) -> Self {
        Grid {
            nodes: std::array::from_fn(|k| {
                let (mid, half) = (0.5 * (bx.a[k] + bx.b[k]), 0.5 * bx.len(k));
                (0..p).map(|i| mid - half * ((2 * i + 1) as f64 * PI / (2 * p) as f64).cos()).collect()
            }),
        }
    }

    fn p(&self) -> usize {
        self.nodes[0].len()
    }

    fn points(&self) -> Vec<[f64; 4]> {
        let p = self.p();
        (0..p.pow(4)).map(|i| std::array::from_fn(|k| self.nodes[k][(i / p.pow(3 - k as u32)) % p])).collect()
    }

    /// Lagrange basis values along axis `k` at `t`.
    fn basis(&self, k: usize, t: f64) -> Vec<f64> {
        let n = &self.nodes[k];
        (0..n.len()).map(|i| (0..n.len()).filter(|&m| m != i).map(|m| (t - n[m]) / (n[i] - n[m])).product()).collect()
    }

    /// Derivatives of the Lagrange basis along axis `k` at `t`.
    fn dbasis(&self, k: usize, t: f64) -> Vec<f64> {
        let n = &self.nodes[k];
        (0..n.len())
            .map(|i| {
                (0..n.len())
                    .filter(|&m| m != i)
                    .map(|m| (0..n.len()).filter(|&l| l != i && l != m).map(|l| (t - n[l]) / (n[i] - n[l])).product::<f64>() / (n[i] - n[m]))
                    .sum()
            })
            .collect()
    }
}

/// Values on a [`Grid`], one component per chain term.
#[derive(Debug, Clone)]
struct Table {
    grid: Grid,
    comps: Vec<Vec<CQuaternion>>,
}

impl Table {
    fn sum(&self) -> Table {
        let n = self.comps[0].len();
        let total = (0..n).map(|i| self.comps.iter().map(|c| c[i]).sum()).collect();
        Table { grid: self.grid.clone(), comps: vec![total] }
    }

    fn contract(&self, c: &[CQuaternion], b: [&[f64]; 4]) -> CQuaternion {
        let p = self.grid.p();
        let mut acc = CQuaternion::ZERO;
        for i0 in 0..p {
            for i1 in 0..p {
                let w01 = b[0][i0] * b[1][i1];
                for i2 in 0..p {
                    let w012 = w01 * b[2][i2];
                    let base = ((i0 * p + i1) * p + i2) * p;
                    for i3 in 0..p {
                        acc += c[base + i3] * (w012 * b[3][i3]);
                    }
                }
            }
        }
        acc
    }

    fn gradient(&self, comp: usize, x: &[f64; 4]) -> [CQuaternion; 4] {
        let b: [Vec<f64>; 4] = std::array::from_fn(|k| self.grid.basis(k, x[k]));
        let d: [Vec<f64>; 4] = std::array::from_fn(|k| self.grid.dbasis(k, x[k]));
        std::array::from_fn(|k| {
            let rows: [&[f64]; 4] = std::array::from_fn(|m| if m == k { d[m].as_slice() } else { b[m].as_slice() });
            self.contract(&self.comps[comp], rows)
        })
    }

    /// Each component evaluated on the nodes of `rule`, contracted over the
    /// first two axes up front.
    fn on_rule(&self, rule: &TensorRule) -> RuleValues {
        let p = self.grid.p();
        let basis: [Vec<Vec<f64>>; 4] = std::array::from_fn(|k| rule.axes[k].nodes.iter().map(|&t| self.grid.basis(k, t)).collect());
        let (n0, n1) = (rule.axes[0].len(), rule.axes[1].len());
        let partial = self
            .comps
            .iter()
            .map(|c| {
                let mut out = vec![CQuaternion::ZERO; n0 * n1 * p * p];
                for a in 0..n0 {
                    for b in 0..n1 {
                        let slot = &mut out[(a * n1 + b) * p * p..][..p * p];
                        for i0 in 0..p {
                            for i1 in 0..p {
                                let w = basis[0][a][i0] * basis[1][b][i1];
                                for r in 0..p * p {
                                    slot[r] += c[(i0 * p + i1) * p * p + r] * w;
                                }
                            }
                        }
                    }
                }
                out
            })
            .collect();
        RuleValues { p, n1, basis2: basis[2].clone(), basis3: basis[3].clone(), partial }
    }
}

struct RuleValues {
    p: usize,
    n1: usize,
    basis2: Vec<Vec<f64>>,
    basis3: Vec<Vec<f64>>,
    partial: Vec<Vec<CQuaternion>>,
}

impl RuleValues {
    fn at(&self, comp: usize, idx: [usize; 4]) -> CQuaternion {
        let p = self.p;
        let slot = &self.partial[comp][(idx[0] * self.n1 + idx[1]) * p * p..][..p * p];
        let (b2, b3) = (&self.basis2[idx[2]], &self.basis3[idx[3]]);
        let mut acc = CQuaternion::ZERO;
        for i2 in 0..p {
            let mut row = CQuaternion::ZERO;
            for i3 in 0..p {
                row += slot[i2 * p + i3] * b3[i3];
            }
            acc += row * b2[i2];
        }
        acc
    }
}

/// Integrand factor of a chain volume term.
enum Source<'a> {
    /// `ψD[G]` of a field.
    Fueter(&'a QField),
    /// Components of a tabulated `Φ`.
    Table(&'a Table),
}

impl Source<'_> {
    fn count(&self) -> usize {
        match self {
            Source::Fueter(_) => 1,
            Source::Table(t) => t.comps.len(),
        }
    }

    /// `∂_k` of component `comp` at `x`.
    fn gradient(&self, psi: &StructuralSet, comp: usize, x: &[f64; 4]) -> [CQuaternion; 4] {
        match self {
            Source::Fueter(g) => std::array::from_fn(|k| {
                (0..4)
                    .map(|j| {
                        let mut o = UNIT[j];
                        o[k] += 1;
                        psi.get(j) * g.partial(o, x)
                    })
                    .sum()
            }),
            Source::Table(t) => t.gradient(comp, x),
        }
    }
}

/// Rule parameters of one chain step.
#[derive(Debug, Clone, Copy)]
struct StepRule {
    boundary_order: usize,
    volume_order: usize,
    eps: f64,
    power: f64,
}

/// `K(y − x)`, or `𝔎^α⃗(y, x)` with nodes near its singular segments skipped.
#[derive(Clone, Copy)]
enum Kern<'a> {
    Cauchy,
    Fractional { bx: &'a Box4, alpha: &'a AlphaVec, spec: &'a QuadratureSpec },
}

impl Kern<'_> {
    fn at(&self, psi: &StructuralSet, y: &[f64; 4], x: &[f64; 4]) -> Result<Option<CQuaternion>> {
        match self {
            Kern::Cauchy => Ok(Some(kernel(psi, &std::array::from_fn(|k| y[k] - x[k])).into())),
            Kern::Fractional { bx, alpha, spec } => match frac_kernel(psi, bx, y, x, alpha, spec) {
                Ok(v) => Ok(Some(v)),
                Err(Error::SegmentHitsSingularity { .. }) => Ok(None),
                Err(e) => Err(e),
            },
        }
    }
}

/// One step at `x` over `bx`: `[B[g](x), −V[c](x) for each component c of
/// the source]`, and the skipped volume fraction.
fn step(bx: &Box4, psi: &StructuralSet, g: &QField, src: &Source, x: &[f64; 4], r: StepRule, kern: Kern) -> Result<(Vec<CQuaternion>, f64)> {
    let grading = Grading::point(*x);
    let boundary = integrate_faces(bx, &grading, r.boundary_order, r.power.min(2.0), |face, y| {
        let s = face.sigma(psi);
        Ok(kern.at(psi, &y, x)?.map(|k| k * s * g.value(&y)))
    })?
    .0;
    let mut out = vec![boundary];
    let (rule, cut) = match kern {
        Kern::Cauchy => (cube_rule(bx, x, r.eps, r.volume_order, r.power, false), true),
        Kern::Fractional { .. } => (TensorRule::graded(bx, &grading, r.volume_order, r.power), false),
    };
    let values = match src {
        Source::Table(t) => Some(t.on_rule(&rule)),
        Source::Fueter(_) => None,
    };
    let mut skipped = 0.0;
    for comp in 0..src.count() {
        let (vol, skip) = rule.integrate(|idx, y| {
            let u: [f64; 4] = std::array::from_fn(|k| y[k] - x[k]);
            if cut && in_cube(&u, r.eps) {
                return Ok(None);
            }
            let Some(k) = kern.at(psi, &y, x)? else { return Ok(None) };
            let h = match (src, &values) {
                (Source::Fueter(f), _) => fueter_left_at(f, psi, &y),
                (Source::Table(_), Some(v)) => v.at(comp, idx),
                _ => unreachable!(),
            };
            Ok(Some(k * h))
        })?;
        skipped = skip / bx.measure();
        let share = if cut && bx.contains_open(x) {
            excluded_share(psi, cube_moment(r.eps), &src.gradient(psi, comp, x), &[CQuaternion::ZERO; 4])
        } else {
            CQuaternion::ZERO
        };
        out.push(-(vol + share));
    }
    Ok((out, skipped))
}

/// Per-level settings of the inner (mixed-domain) steps: reduced Gauss
/// orders and a grid of `mixed_order/2 + 1` points per axis.
fn inner_rule(lvl: &Level, power: f64) -> (StepRule, usize) {
    let m = lvl.mixed_order;
    (StepRule { boundary_order: m, volume_order: (m / 2).max(2), eps: lvl.epsilon, power }, m / 2 + 1)
}

/// Tables `Φ_1 … Φ_{n−1}` for the chain of `f` at one level; `Φ_ℓ` lives on
/// a grid of `J̄_{ℓ+1}`.
fn inner_tables(f: &QField, psi: &StructuralSet, nested: &NestedBoxes, lvl: &Level, power: f64) -> Result<Option<Table>> {
    let n = nested.len();
    let (r, p) = inner_rule(lvl, power);
    let mut prev: Option<Table> = None;
    for l in 1..n {
        let (bx, next) = (&nested.boxes()[l - 1], &nested.boxes()[l]);
        if (0..4).any(|k| next.a[k] - bx.a[k] <= r.eps || bx.b[k] - next.b[k] <= r.eps) {
            return Err(Error::NestingViolation(l));
        }
        let g = fueter_power(f, psi, n - l);
        let grid = Grid::new(next, p);
        let src = match &prev {
            None => Source::Fueter(&g),
            Some(t) => Source::Table(t),
        };
        let mut comps: Vec<Vec<CQuaternion>> = vec![Vec::new(); 1 + src.count()];
        for tau in grid.points() {
            let (terms, _) = step(bx, psi, &g, &src, &tau, r, Kern::Cauchy)?;
            for (c, v) in comps.iter_mut().zip(terms) {
                c.push(v);
            }
        }
        prev = Some(Table { grid, comps });
    }
    Ok(prev)
}

/// The chain's terms at `x` for one level, in the order of the formula:
/// `∫_{∂J_n}`, `−∫_{J_n×∂J_{n−1}}`, `+∫_{J_n×J_{n−1}×∂J_{n−2}}`, …, and the full
/// volume term last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTerms {
    #[serde(skip)]
    pub terms: Vec<CQuaternion>,
    /// Value assembled from one summed table per level, for the telescoping check.
    #[serde(skip)]
    pub telescoped: CQuaternion,
    pub skipped_fraction: f64,
}

impl ChainTerms {
    pub fn total(&self) -> CQuaternion {
        self.terms.iter().copied().sum()
    }
}

fn chain_at(f: &QField, psi: &StructuralSet, nested: &NestedBoxes, x: &[f64; 4], lvl: &Level, power: f64, kern: Kern) -> Result<ChainTerms> {
    let bx = nested.innermost();
    let outer = match kern {
        Kern::Cauchy => StepRule { boundary_order: lvl.order, volume_order: lvl.singular_order, eps: lvl.epsilon, power },
        Kern::Fractional { .. } => StepRule { boundary_order: lvl.mixed_order, volume_order: lvl.mixed_order, eps: lvl.epsilon, power },
    };
    let table = inner_tables(f, psi, nested, lvl, power)?;
    let (terms, skipped, telescoped) = match &table {
        None => {
            let (t, s) = step(bx, psi, f, &Source::Fueter(f), x, outer, kern)?;
            let sum = t.iter().copied().sum();
            (t, s, sum)
        }
        Some(t) => {
            let (terms, s) = step(bx, psi, f, &Source::Table(t), x, outer, kern)?;
            let (tel, _) = step(bx, psi, f, &Source::Table(&t.sum()), x, outer, kern)?;
            (terms, s, tel.iter().copied().sum())
        }
    };
    Ok(ChainTerms { terms, telescoped, skipped_fraction: skipped })
}

fn check_chain_point(nested: &NestedBoxes, x: &[f64; 4], spec: &QuadratureSpec) -> Result<()> {
    let bx = nested.innermost();
    if bx.distance_to_boundary(x) < spec.epsilon(bx) {
        return Err(Error::OnBoundary(*x));
    }
    Ok(())
}

/// Residual of the higher-order Borel–Pompeiu formula at `x` against `F(x)`
/// inside `J_n` and `0` outside, over the refinement schedule. The outer step
/// uses the full orders of `spec`; inner steps use `mixed_order`.
pub fn verify_bp_higher_order(f: &QField, psi: &StructuralSet, nested: &NestedBoxes, x: &[f64; 4], spec: &QuadratureSpec) -> Result<Residual> {
    Ok(bp_higher_order_terms(f, psi, nested, x, spec)?.0)
}

/// [`verify_bp_higher_order`] together with the finest level's chain terms.
pub fn bp_higher_order_terms(f: &QField, psi: &StructuralSet, nested: &NestedBoxes, x: &[f64; 4], spec: &QuadratureSpec) -> Result<(Residual, ChainTerms)> {
    spec.validate()?;
    check_chain_point(nested, x, spec)?;
    let inner = nested.innermost();
    let target = if inner.contains_open(x) { f.eval(x)? } else { CQuaternion::ZERO };
    let mut levels = Vec::new();
    let mut last = None;
    for lvl in spec.levels(inner) {
        let c = chain_at(f, psi, nested, x, &lvl, spec.power(), Kern::Cauchy)?;
        levels.push((point(&lvl, c.skipped_fraction), c.total(), target));
        last = Some(c);
    }
    Ok((Residual::from_levels(levels), last.expect("at least one level")))
}

/// Fractional higher-order Borel–Pompeiu formula for `x ↦ 𝓘[F](q, x, α⃗)`
/// over nested boxes, with base point `a` the lower corner of the domain of
/// `F`, which must lie strictly below `J₁` so that the mapped integral is
/// smooth on `J̄₁`.
///
/// Decomposed: the chain for the mapped integral against `𝓘[F](q, x, α⃗)`,
/// then `Σ_i D^{α_i}𝓘 = Σ_i F(slices) + N[F]` (trivially zero outside `J_n`).
/// Direct: the chain with `𝔎^α⃗` in the outer kernel against
/// `Σ_i F(slices) + N[F]` inside and `0` outside; nodes near the kernel's
/// singular segments are skipped and reported.
#[allow(clippy::too_many_arguments)]
pub fn verify_frac_bp_higher(
    f: &QField,
    psi: &StructuralSet,
    nested: &NestedBoxes,
    q: &[f64; 4],
    x: &[f64; 4],
    alpha: &AlphaVec,
    spec: &QuadratureSpec,
    mode: BpMode,
) -> Result<FracBpReport> {
    spec.validate()?;
    if alpha.n() != 1 {
        return Err(Error::InvalidOrder(format!("need 0 < Re α < 1, got n = {}", alpha.n())));
    }
    let dom = f.domain();
    let j1 = nested.outermost();
    if (0..4).any(|k| !(dom.a[k] < j1.a[k] && j1.b[k] <= dom.b[k])) {
        return Err(Error::InvalidBox("the outermost box must lie in the field domain, strictly above its lower corner".into()));
    }
    if !dom.contains_closed(q) {
        return Err(Error::OutsideDomain(*q));
    }
    check_chain_point(nested, x, spec)?;
    let inner = nested.innermost();
    let inside = inner.contains_open(x);
    let m = MappedIntegral::new(f, *q, alpha.values(), spec)?;
    let target_mapped = if inside { m.value(x)? } else { CQuaternion::ZERO };
    let g = m.into_field("mapped");
    let conv = GammaConvention::FromEq5;
    let mut levels = Vec::new();
    match mode {
        BpMode::Decomposed => {
            for lvl in spec.levels(inner) {
                let c = chain_at(&g, psi, nested, x, &lvl, spec.power(), Kern::Cauchy)?;
                levels.push((point(&lvl, c.skipped_fraction), c.total(), target_mapped));
            }
            let identity = if inside { sum_frac_deriv_check(f, q, x, alpha, conv, spec)? } else { Residual::single(CQuaternion::ZERO, CQuaternion::ZERO) };
            Ok(FracBpReport { primary: Residual::from_levels(levels), identity: Some(identity) })
        }
        BpMode::Direct => {
            let target = if inside { slice_sum(f, q, x)? + correction_n(f, q, x, alpha, conv, spec)? } else { CQuaternion::ZERO };
            for lvl in spec.levels(inner) {
                let s = spec.at_level(&lvl);
                let kern = Kern::Fractional { bx: dom, alpha, spec: &s };
                let c = chain_at(&g, psi, nested, x, &lvl, spec.power(), kern)?;
                levels.push((point(&lvl, c.skipped_fraction), c.total(), target));
            }
            Ok(FracBpReport { primary: Residual::from_levels(levels), identity: None })
        }
    }
}
