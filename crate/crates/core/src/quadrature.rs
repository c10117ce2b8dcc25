//! Gauss rules, graded composite rules and tensor-product integration over
//! 4-D boxes, their boundaries, and boxes with an excluded ball.
//!
//! Every reduction runs in a fixed node order with compensated summation, so
//! results do not depend on the number of worker threads.

use std::f64::consts::PI;

use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::ln_gamma;
use crate::quaternion::{CQuaternion, Quaternion, StructuralSet};

/// The open rectangle `J_a^b = (a0,b0) × … × (a3,b3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box4 {
    pub a: [f64; 4],
    pub b: [f64; 4],
}

impl Box4 {
    pub fn new(a: [f64; 4], b: [f64; 4]) -> Result<Self> {
        for k in 0..4 {
            if !(a[k] < b[k]) || !a[k].is_finite() || !b[k].is_finite() {
                return Err(Error::InvalidBox(format!("a[{k}] = {} must be < b[{k}] = {}", a[k], b[k])));
            }
        }
        Ok(Box4 { a, b })
    }

    pub fn unit() -> Self {
        Box4 { a: [0.0; 4], b: [1.0; 4] }
    }

    /// `m(J_a^b) = Π (b_k − a_k)`.
    pub fn measure(&self) -> f64 {
        (0..4).map(|k| self.b[k] - self.a[k]).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..4).map(|k| (self.b[k] - self.a[k]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn len(&self, k: usize) -> f64 {
        self.b[k] - self.a[k]
    }

    pub fn contains_open(&self, x: &[f64; 4]) -> bool {
        (0..4).all(|k| self.a[k] < x[k] && x[k] < self.b[k])
    }

    pub fn contains_closed(&self, x: &[f64; 4]) -> bool {
        (0..4).all(|k| self.a[k] <= x[k] && x[k] <= self.b[k])
    }

    /// Euclidean distance from `x` to the boundary (inside or outside).
    pub fn distance_to_boundary(&self, x: &[f64; 4]) -> f64 {
        if self.contains_closed(x) {
            (0..4)
                .map(|k| (x[k] - self.a[k]).min(self.b[k] - x[k]))
                .fold(f64::INFINITY, f64::min)
        } else {
            (0..4)
                .map(|k| {
                    let d = (self.a[k] - x[k]).max(x[k] - self.b[k]).max(0.0);
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        }
    }

    pub fn center(&self) -> [f64; 4] {
        std::array::from_fn(|k| 0.5 * (self.a[k] + self.b[k]))
    }

    /// The 8 faces, ordered by axis then low/high.
    pub fn faces(&self) -> [Face; 8] {
        std::array::from_fn(|i| Face { axis: i / 2, side: if i % 2 == 0 { Side::Low } else { Side::High } })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Low,
    High,
}

/// Face `x_axis = a_axis` (low) or `x_axis = b_axis` (high) of a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    /// Outward normal sign along `axis`.
    pub fn outward(&self) -> f64 {
        match self.side {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }

    pub fn coordinate(&self, bx: &Box4) -> f64 {
        match self.side {
            Side::Low => bx.a[self.axis],
            Side::High => bx.b[self.axis],
        }
    }

    /// Quaternionic surface weight of the ψ-form on this face, taken against the
    /// outward-oriented surface measure in ψ-coordinates: `±ψ_axis`.
    pub fn sigma(&self, psi: &StructuralSet) -> Quaternion {
        psi.get(self.axis).scale(self.outward())
    }
}

/// Which side of the integrand the surface form multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormSide {
    /// `∫ σ F`
    Left,
    /// `∫ F σ`
    Right,
}

/// Quadrature parameters shared by all integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Gauss points per axis for smooth integrands.
    pub order: usize,
    /// Gauss points per graded segment for singular integrands.
    pub singular_order: usize,
    /// Reduced points per segment for nested (mixed-domain) integrals.
    pub mixed_order: usize,
    /// Number of levels in refinement studies.
    pub refine_levels: usize,
    /// Exclusion radius at the finest level; `None` means 1e-2 × box diameter.
    pub exclusion_radius: Option<f64>,
    /// Finite-difference step, scaled by the relevant length.
    pub fd_step: f64,
    /// Grade meshes toward known singular points and faces.
    pub graded: bool,
    /// Exponent `r` of the grading map `t = c + L s^r`.
    pub grading_power: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            order: 24,
            singular_order: 12,
            mixed_order: 8,
            refine_levels: 3,
            exclusion_radius: None,
            fd_step: 1e-5,
            graded: true,
            grading_power: 10.0,
        }
    }
}

/// One level of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub level: usize,
    pub order: usize,
    pub singular_order: usize,
    pub mixed_order: usize,
    pub epsilon: f64,
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || self.singular_order < 2 || self.mixed_order < 2 {
            return Err(Error::InvalidSpec("orders must be at least 2".into()));
        }
        if self.refine_levels == 0 {
            return Err(Error::InvalidSpec("refine_levels must be positive".into()));
        }
        if let Some(eps) = self.exclusion_radius {
            if !(eps > 0.0) {
                return Err(Error::InvalidSpec(format!("exclusion radius {eps} must be positive")));
            }
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidSpec("fd_step must be positive".into()));
        }
        if !(self.grading_power >= 1.0) {
            return Err(Error::InvalidSpec("grading_power must be >= 1".into()));
        }
        Ok(())
    }

    pub fn epsilon(&self, bx: &Box4) -> f64 {
        self.exclusion_radius.unwrap_or(1e-2 * bx.diameter())
    }

    /// Grading exponent in effect (1 when grading is off).
    pub fn power(&self) -> f64 {
        if self.graded {
            self.grading_power
        } else {
            1.0
        }
    }

    /// Refinement schedule: orders grow linearly to the configured values and
    /// the exclusion radius halves per level, ending at `epsilon(bx)`.
    pub fn levels(&self, bx: &Box4) -> Vec<Level> {
        let n = self.refine_levels.max(1);
        let eps = self.epsilon(bx);
        (0..n)
            .map(|l| {
                let scale = (l + 1) as f64 / n as f64;
                let sc = |o: usize| ((o as f64 * scale).round() as usize).max(2);
                Level {
                    level: l,
                    order: sc(self.order),
                    singular_order: sc(self.singular_order),
                    mixed_order: sc(self.mixed_order),
                    epsilon: eps * 2f64.powi((n - 1 - l) as i32),
                }
            })
            .collect()
    }

    /// Spec pinned to one level of the study.
    pub fn at_level(&self, lvl: &Level) -> QuadratureSpec {
        QuadratureSpec {
            order: lvl.order,
            singular_order: lvl.singular_order,
            mixed_order: lvl.mixed_order,
            exclusion_radius: Some(lvl.epsilon),
            ..*self
        }
    }
}

/// Nodes and weights of a 1-D rule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = Neumaier::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(*x));
        }
        acc.value()
    }

    fn extend(&mut self, other: Rule1D) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }
}

type RuleCache = DashMap<(usize, u64), Arc<Rule1D>>;

fn rule_cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(DashMap::new)
}

fn cached(n: usize, mu: f64, build: impl FnOnce() -> Rule1D) -> Arc<Rule1D> {
    let key = (n, mu.to_bits());
    if let Some(r) = rule_cache().get(&key) {
        return r.clone();
    }
    let r = Arc::new(build());
    rule_cache().insert(key, r.clone());
    r
}

/// Gauss–Legendre rule with `n` points on `[lo, hi]`.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Rule1D {
    assert!(n >= 1, "gauss_legendre needs n >= 1");
    let unit = cached(n, 0.0, || legendre_reference(n));
    let len = hi - lo;
    Rule1D {
        nodes: unit.nodes.iter().map(|s| lo + len * s).collect(),
        weights: unit.weights.iter().map(|w| w * len).collect(),
    }
}

// Gauss–Legendre on [0, 1].
fn legendre_reference(n: usize) -> Rule1D {
    let (lo, hi) = (0.0, 1.0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p1, p2) = legendre_pair(n, z);
            let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (p1, p2) = legendre_pair(n, z);
        let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        nodes[i] = mid - half * z;
        nodes[n - 1 - i] = mid + half * z;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    Rule1D { nodes, weights }
}

// (P_n(z), P_{n-1}(z))
fn legendre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
    }
    (p1, p2)
}

/// Gauss–Jacobi rule for `∫_lo^hi (hi − t)^μ p(t) dt`, exact for polynomials of
/// degree `≤ 2n − 1`. Nodes ascend.
pub fn gauss_jacobi(n: usize, mu: f64, lo: f64, hi: f64) -> Result<Rule1D> {
    if !(mu > -1.0) {
        return Err(Error::InvalidExponent(mu));
    }
    assert!(n >= 1, "gauss_jacobi needs n >= 1");
    if mu == 0.0 {
        return Ok(gauss_legendre(n, lo, hi));
    }
    let unit = cached(n, mu, || {
        let (x, w) = jacobi_reference(n, mu, 0.0);
        // weight (1 − x)^μ on [−1, 1] becomes (1 − s)^μ on [0, 1]
        let scale = 0.5f64.powf(mu + 1.0);
        let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (0.5 * (x[i] + 1.0), w[i] * scale)).collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        Rule1D { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
    });
    let len = hi - lo;
    let scale = len.powf(mu + 1.0);
    Ok(Rule1D {
        nodes: unit.nodes.iter().map(|s| lo + len * s).collect(),
        weights: unit.weights.iter().map(|w| w * scale).collect(),
    })
}

// Newton iteration on the Jacobi three-term recurrence for weight
// (1 − x)^alf (1 + x)^bet on [−1, 1], with the classical asymptotic starts.
#[allow(clippy::approx_constant)]
fn jacobi_reference(n: usize, alf: f64, bet: f64) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let alfbet = alf + bet;
    let mut z = 0.0f64;
    for i in 0..n {
        let ii = i + 1;
        if ii == 1 {
            let an = alf / nf;
            let bn = bet / nf;
            let r1 = (1.0 + alf) * (2.78 / (4.0 + nf * nf) + 0.768 * an / nf);
            let r2 = 1.0 + 1.48 * an + 0.96 * bn + 0.452 * an * an + 0.83 * an * bn;
            z = 1.0 - r1 / r2;
        } else if ii == 2 {
            let r1 = (4.1 + alf) / ((1.0 + alf) * (1.0 + 0.156 * alf));
            let r2 = 1.0 + 0.06 * (nf - 8.0) * (1.0 + 0.12 * alf) / nf;
            let r3 = 1.0 + 0.012 * bet * (1.0 + 0.25 * alf.abs()) / nf;
            z -= (1.0 - z) * r1 * r2 * r3;
        } else if ii == 3 {
            let r1 = (1.67 + 0.28 * alf) / (1.0 + 0.37 * alf);
            let r2 = 1.0 + 0.22 * (nf - 8.0) / nf;
            let r3 = 1.0 + 8.0 * bet / ((6.28 + bet) * nf * nf);
            z -= (x[0] - z) * r1 * r2 * r3;
        } else if ii == n - 1 {
            let r1 = (1.0 + 0.235 * bet) / (0.766 + 0.119 * bet);
            let r2 = 1.0 / (1.0 + 0.639 * (nf - 4.0) / (1.0 + 0.71 * (nf - 4.0)));
            let r3 = 1.0 / (1.0 + 20.0 * alf / ((7.5 + alf) * nf * nf));
            z += (z - x[n - 4]) * r1 * r2 * r3;
        } else if ii == n {
            let r1 = (1.0 + 0.37 * bet) / (1.67 + 0.28 * bet);
            let r2 = 1.0 / (1.0 + 0.22 * (nf - 8.0) / nf);
            let r3 = 1.0 / (1.0 + 8.0 * alf / ((6.28 + alf) * nf * nf));
            z += (z - x[n - 3]) * r1 * r2 * r3;
        } else {
            z = 3.0 * x[i - 1] - 3.0 * x[i - 2] + x[i - 3];
        }
        let mut pp = 1.0;
        let mut p2 = 1.0;
        let mut temp = 2.0 + alfbet;
        for _ in 0..100 {
            temp = 2.0 + alfbet;
            let mut p1 = (alf - bet + temp * z) / 2.0;
            p2 = 1.0;
            for j in 2..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                temp = 2.0 * jf + alfbet;
                let a = 2.0 * jf * (jf + alfbet) * (temp - 2.0);
                let b = (temp - 1.0) * (alf * alf - bet * bet + temp * (temp - 2.0) * z);
                let c = 2.0 * (jf - 1.0 + alf) * (jf - 1.0 + bet) * temp;
                p1 = (b * p2 - c * p3) / a;
            }
            pp = (nf * (alf - bet - temp * z) * p1 + 2.0 * (nf + alf) * (nf + bet) * p2)
                / (temp * (1.0 - z * z));
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 3e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = (ln_gamma(alf + nf) + ln_gamma(bet + nf) - ln_gamma(nf + 1.0) - ln_gamma(nf + alfbet + 1.0))
            .exp()
            * temp
            * 2f64.powf(alfbet)
            / (pp * p2);
    }
    (x, w)
}

/// Gauss–Legendre in the variable `s` of the grading map `t = lo + L s^r`
/// (toward `lo`) or `t = hi − L s^r` (toward `hi`). Both ends graded splits at
/// the midpoint.
pub fn graded_rule(n: usize, lo: f64, hi: f64, toward_lo: bool, toward_hi: bool, power: f64) -> Rule1D {
    if power == 1.0 || (!toward_lo && !toward_hi) {
        return gauss_legendre(n, lo, hi);
    }
    if toward_lo && toward_hi {
        let mid = 0.5 * (lo + hi);
        let mut r = graded_rule(n, lo, mid, true, false, power);
        r.extend(graded_rule(n, mid, hi, false, true, power));
        return r;
    }
    let (offsets, weights) = graded_offsets(n, hi - lo, power);
    let mut weights = weights;
    let mut nodes = Vec::with_capacity(n);
    for off in offsets {
        // keep nodes strictly inside so endpoint singularities stay finite
        let t = if toward_lo { (lo + off).max(lo.next_up()) } else { (hi - off).min(hi.next_down()) };
        nodes.push(t);
    }
    if !toward_lo {
        nodes.reverse();
        weights.reverse();
    }
    Rule1D { nodes, weights }
}

/// Offsets `L s^r` from the graded endpoint and the matching weights, for
/// Gauss–Legendre nodes `s` on `[0, 1]`.
pub fn graded_offsets(n: usize, len: f64, power: f64) -> (Vec<f64>, Vec<f64>) {
    let base = gauss_legendre(n, 0.0, 1.0);
    base.nodes
        .iter()
        .zip(&base.weights)
        .map(|(s, w)| (len * s.powf(power), w * len * power * s.powf(power - 1.0)))
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    lo: f64,
    hi: f64,
    grade_lo: bool,
    grade_hi: bool,
}

/// Points and faces toward which a tensor mesh is graded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grading {
    /// Interior points; each axis gets a mirror-symmetric split at the point's coordinate.
    pub points: Vec<[f64; 4]>,
    /// Grade toward `a_k` on axis k.
    pub lo_faces: [bool; 4],
    /// Grade toward `b_k` on axis k.
    pub hi_faces: [bool; 4],
    /// Upper bound on the half-width of the symmetric split around each point.
    /// Fixing it keeps the near-point nodes rigid when the point moves.
    pub radius: Option<f64>,
    /// When set, a graded face segment is cut at this fraction of its length
    /// and only the part at the face is graded, so the smooth remainder is not
    /// stretched by the grading map.
    pub face_split: Option<f64>,
}

impl Grading {
    pub fn none() -> Self {
        Grading::default()
    }

    pub fn point(x: [f64; 4]) -> Self {
        Grading { points: vec![x], ..Default::default() }
    }

    pub fn low_faces() -> Self {
        Grading { lo_faces: [true; 4], ..Default::default() }
    }

    pub fn with_point(mut self, x: [f64; 4]) -> Self {
        self.points.push(x);
        self
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = Some(r);
        self
    }

    pub fn with_low_faces(mut self) -> Self {
        self.lo_faces = [true; 4];
        self
    }

    pub fn with_face_split(mut self, fraction: f64) -> Self {
        self.face_split = Some(fraction);
        self
    }

    fn axis_centers(&self, k: usize) -> Vec<f64> {
        let mut c: Vec<f64> = self.points.iter().map(|p| p[k]).collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }
}

fn axis_segments(lo: f64, hi: f64, centers: &[f64], grade_lo: bool, grade_hi: bool, radius: Option<f64>) -> Vec<Segment> {
    let tol = 1e-14 * (hi - lo).abs().max(1.0);
    let mut end_lo = grade_lo;
    let mut end_hi = grade_hi;
    let inner: Vec<f64> = centers
        .iter()
        .copied()
        .filter(|&c| {
            if (c - lo).abs() <= tol {
                end_lo = true;
                false
            } else if (c - hi).abs() <= tol {
                end_hi = true;
                false
            } else {
                c > lo && c < hi
            }
        })
        .collect();
    // breakpoints with grading flags: (position, graded)
    let mut cuts: Vec<(f64, bool)> = vec![(lo, end_lo)];
    for (i, &c) in inner.iter().enumerate() {
        let left_gap = if i == 0 { (c - lo) * if end_lo { 0.5 } else { 1.0 } } else { 0.5 * (c - inner[i - 1]) };
        let right_gap = if i + 1 == inner.len() {
            (hi - c) * if end_hi { 0.5 } else { 1.0 }
        } else {
            0.5 * (inner[i + 1] - c)
        };
        let delta = left_gap.min(right_gap).min(radius.unwrap_or(f64::INFINITY));
        cuts.push((c - delta, false));
        cuts.push((c, true));
        cuts.push((c + delta, false));
    }
    cuts.push((hi, end_hi));
    let mut segs = Vec::new();
    for w in cuts.windows(2) {
        let (l, gl) = w[0];
        let (h, gh) = w[1];
        if h - l > tol {
            segs.push(Segment { lo: l, hi: h, grade_lo: gl, grade_hi: gh });
        }
    }
    segs
}

fn split_face_segments(segs: Vec<Segment>, lo_face: bool, hi_face: bool, frac: f64) -> Vec<Segment> {
    let last = segs.len().saturating_sub(1);
    let mut out = Vec::with_capacity(segs.len() + 2);
    for (i, s) in segs.into_iter().enumerate() {
        let len = s.hi - s.lo;
        if i == 0 && lo_face && s.grade_lo {
            let cut = s.lo + frac * len;
            out.push(Segment { lo: s.lo, hi: cut, grade_lo: true, grade_hi: false });
            out.push(Segment { lo: cut, hi: s.hi, grade_lo: false, grade_hi: s.grade_hi && !(i == last && hi_face) });
            if i == last && hi_face && s.grade_hi {
                let top = out.pop().unwrap();
                let cut2 = top.hi - frac * len;
                out.push(Segment { lo: top.lo, hi: cut2, grade_lo: false, grade_hi: false });
                out.push(Segment { lo: cut2, hi: top.hi, grade_lo: false, grade_hi: true });
            }
        } else if i == last && hi_face && s.grade_hi {
            let cut = s.hi - frac * len;
            out.push(Segment { lo: s.lo, hi: cut, grade_lo: s.grade_lo, grade_hi: false });
            out.push(Segment { lo: cut, hi: s.hi, grade_lo: false, grade_hi: true });
        } else {
            out.push(s);
        }
    }
    out
}

fn composite_rule(segs: &[Segment], n: usize, power: f64) -> Rule1D {
    let mut r = Rule1D::default();
    for s in segs {
        r.extend(graded_rule(n, s.lo, s.hi, s.grade_lo, s.grade_hi, power));
    }
    r
}

/// Composite graded rule on `[lo, hi]` that is symmetric about each center.
pub fn axis_rule(lo: f64, hi: f64, centers: &[f64], grade_lo: bool, grade_hi: bool, n: usize, power: f64) -> Rule1D {
    composite_rule(&axis_segments(lo, hi, centers, grade_lo, grade_hi, None), n, power)
}

impl Grading {
    /// The composite rule this grading induces on axis `k` of `bx`.
    pub fn axis(&self, bx: &Box4, k: usize, n: usize, power: f64) -> Rule1D {
        let mut segs = axis_segments(bx.a[k], bx.b[k], &self.axis_centers(k), self.lo_faces[k], self.hi_faces[k], self.radius);
        if let Some(frac) = self.face_split {
            segs = split_face_segments(segs, self.lo_faces[k], self.hi_faces[k], frac);
        }
        composite_rule(&segs, n, power)
    }
}

/// Tensor product of four 1-D rules.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule {
    pub axes: [Rule1D; 4],
}

impl TensorRule {
    pub fn gauss(bx: &Box4, n: usize) -> Self {
        TensorRule { axes: std::array::from_fn(|k| gauss_legendre(n, bx.a[k], bx.b[k])) }
    }

    /// Plain Gauss per axis when `grading` is empty, otherwise graded segments
    /// of `n` points each.
    pub fn graded(bx: &Box4, grading: &Grading, n: usize, power: f64) -> Self {
        TensorRule {
            axes: std::array::from_fn(|k| grading.axis(bx, k, n, power)),
        }
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Rule1D::len).product()
    }

    /// Integrates `f`; nodes where `f` returns `Ok(None)` are skipped and their
    /// weight reported as the second component.
    pub fn integrate<F>(&self, f: F) -> Result<(CQuaternion, f64)>
    where
        F: Fn([usize; 4], [f64; 4]) -> Result<Option<CQuaternion>> + Sync,
    {
        let [r0, r1, r2, r3] = &self.axes;
        let partials: Vec<Result<(CQuaternion, f64)>> = (0..r0.len())
            .into_par_iter()
            .map(|i0| {
                let mut acc = QuatSum::default();
                let mut skipped = Neumaier::default();
                for i1 in 0..r1.len() {
                    for i2 in 0..r2.len() {
                        for i3 in 0..r3.len() {
                            let x = [r0.nodes[i0], r1.nodes[i1], r2.nodes[i2], r3.nodes[i3]];
                            let w = r0.weights[i0] * r1.weights[i1] * r2.weights[i2] * r3.weights[i3];
                            match f([i0, i1, i2, i3], x)? {
                                Some(v) => {
                                    if !v.is_finite() {
                                        return Err(Error::NonFinite(x));
                                    }
                                    acc.add(v, w)
                                }
                                None => skipped.add(w),
                            }
                        }
                    }
                }
                Ok((acc.value(), skipped.value()))
            })
            .collect();
        let mut total = QuatSum::default();
        let mut skipped = Neumaier::default();
        for p in partials {
            let (v, s) = p?;
            total.add(v, 1.0);
            skipped.add(s);
        }
        Ok((total.value(), skipped.value()))
    }
}

/// Tensor rule over one face: the three remaining axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceRule {
    pub face: Face,
    pub coordinate: f64,
    pub axes: [usize; 3],
    pub rules: [Rule1D; 3],
}

impl FaceRule {
    pub fn new(bx: &Box4, face: Face, grading: &Grading, n: usize, power: f64) -> Self {
        let axes: [usize; 3] = {
            let v: Vec<usize> = (0..4).filter(|&k| k != face.axis).collect();
            [v[0], v[1], v[2]]
        };
        let rules = axes.map(|k| grading.axis(bx, k, n, power));
        FaceRule { face, coordinate: face.coordinate(bx), axes, rules }
    }

    pub fn integrate<F>(&self, f: &F) -> Result<(CQuaternion, f64)>
    where
        F: Fn(Face, [f64; 4]) -> Result<Option<CQuaternion>> + Sync,
    {
        let [r0, r1, r2] = &self.rules;
        let partials: Vec<Result<(CQuaternion, f64)>> = (0..r0.len())
            .into_par_iter()
            .map(|i0| {
                let mut acc = QuatSum::default();
                let mut skipped = Neumaier::default();
                for i1 in 0..r1.len() {
                    for i2 in 0..r2.len() {
                        let mut x = [0.0; 4];
                        x[self.face.axis] = self.coordinate;
                        x[self.axes[0]] = r0.nodes[i0];
                        x[self.axes[1]] = r1.nodes[i1];
                        x[self.axes[2]] = r2.nodes[i2];
                        let w = r0.weights[i0] * r1.weights[i1] * r2.weights[i2];
                        match f(self.face, x)? {
                            Some(v) => {
                                if !v.is_finite() {
                                    return Err(Error::NonFinite(x));
                                }
                                acc.add(v, w)
                            }
                            None => skipped.add(w),
                        }
                    }
                }
                Ok((acc.value(), skipped.value()))
            })
            .collect();
        let mut total = QuatSum::default();
        let mut skipped = Neumaier::default();
        for p in partials {
            let (v, s) = p?;
            total.add(v, 1.0);
            skipped.add(s);
        }
        Ok((total.value(), skipped.value()))
    }
}

/// Sums an integrand over all 8 faces (fixed face order). Returns the value and
/// the skipped surface measure.
pub fn integrate_faces<F>(bx: &Box4, grading: &Grading, n: usize, power: f64, f: F) -> Result<(CQuaternion, f64)>
where
    F: Fn(Face, [f64; 4]) -> Result<Option<CQuaternion>> + Sync,
{
    let mut total = QuatSum::default();
    let mut skipped = Neumaier::default();
    for face in bx.faces() {
        let (v, s) = FaceRule::new(bx, face, grading, n, power).integrate(&f)?;
        total.add(v, 1.0);
        skipped.add(s);
    }
    Ok((total.value(), skipped.value()))
}

/// Tensor-product Gauss–Legendre of `spec.order` points per axis.
pub fn integrate_box4<F>(f: F, bx: &Box4, spec: &QuadratureSpec) -> Result<CQuaternion>
where
    F: Fn([f64; 4]) -> CQuaternion + Sync,
{
    spec.validate()?;
    TensorRule::gauss(bx, spec.order).integrate(|_, x| Ok(Some(f(x)))).map(|r| r.0)
}

/// `Σ_faces ∫ σ F` (left) or `∫ F σ` (right) with plain Gauss rules on faces.
pub fn integrate_boundary<F>(f: F, bx: &Box4, psi: &StructuralSet, spec: &QuadratureSpec, side: FormSide) -> Result<CQuaternion>
where
    F: Fn([f64; 4]) -> CQuaternion + Sync,
{
    spec.validate()?;
    integrate_faces(bx, &Grading::none(), spec.order, 1.0, |face, x| {
        let s = face.sigma(psi);
        Ok(Some(match side {
            FormSide::Left => s * f(x),
            FormSide::Right => f(x) * s,
        }))
    })
    .map(|r| r.0)
}

/// Integral over the box minus a ball, with the value's exclusion radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcludedIntegral {
    pub value: CQuaternion,
    pub epsilon: f64,
    /// Quadrature weight of the zeroed nodes.
    pub excluded_weight: f64,
}

/// Integrates over `box ∖ B(center, ε)`: the mesh is graded toward `center`
/// (segments of `spec.singular_order` points) and nodes inside the ball are zeroed.
pub fn integrate_excluding_ball<F>(f: F, bx: &Box4, center: &[f64; 4], epsilon: f64, spec: &QuadratureSpec) -> Result<ExcludedIntegral>
where
    F: Fn([f64; 4]) -> CQuaternion + Sync,
{
    spec.validate()?;
    integrate_around(bx, center, epsilon, spec.singular_order, spec.power(), None, |y, _| f(*y))
}

/// As [`integrate_excluding_ball`] with an explicit rule: `n` points per graded
/// segment, grading exponent `power` and an optional cap on the symmetric
/// split half-width. The integrand receives `y` and `u = y − center`.
pub fn integrate_around<F>(
    bx: &Box4,
    center: &[f64; 4],
    epsilon: f64,
    n: usize,
    power: f64,
    radius: Option<f64>,
    f: F,
) -> Result<ExcludedIntegral>
where
    F: Fn(&[f64; 4], &[f64; 4]) -> CQuaternion + Sync,
{
    if !(epsilon > 0.0) {
        return Err(Error::InvalidSpec(format!("exclusion radius {epsilon} must be positive")));
    }
    let mut grading = Grading::point(*center);
    grading.radius = radius;
    let rule = TensorRule::graded(bx, &grading, n, power);
    let (value, excluded_weight) = rule.integrate(|_, y| {
        let u: [f64; 4] = std::array::from_fn(|k| y[k] - center[k]);
        let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3]).sqrt();
        Ok(if r < epsilon { None } else { Some(f(&y, &u)) })
    })?;
    Ok(ExcludedIntegral { value, epsilon, excluded_weight })
}

/// Tensor rule for integrating around `center` with the cube
/// `|y_k − center_k| < ε` cut out along mesh lines, so the excluded set is
/// exact. Per axis: `[c−ε, c]` and `[c, c+ε]` graded toward `c` with `power`,
/// the outer pieces graded mildly toward the cube faces, and, where
/// `low_faces` is set, a graded segment over the first quarter next to `a_k`.
/// A center outside the open box only contributes the face grading.
pub fn cube_rule(bx: &Box4, center: &[f64; 4], eps: f64, n: usize, power: f64, low_faces: bool) -> TensorRule {
    const FACE_POWER: f64 = 2.0;
    let inside = bx.contains_open(center);
    TensorRule {
        axes: std::array::from_fn(|k| {
            let (lo, hi) = (bx.a[k], bx.b[k]);
            let c = center[k];
            let mut r = Rule1D::default();
            let outer = |r: &mut Rule1D, l: f64, h: f64, to_cube_lo: bool, to_cube_hi: bool, face: bool| {
                if h - l <= 0.0 {
                    return;
                }
                let mut l = l;
                if face {
                    let cut = l + 0.25 * (h - l);
                    r.extend(graded_rule(n, l, cut, true, false, power));
                    l = cut;
                }
                r.extend(graded_rule(n, l, h, to_cube_lo, to_cube_hi, FACE_POWER));
            };
            if inside && c - eps > lo && c + eps < hi {
                outer(&mut r, lo, c - eps, false, true, low_faces);
                r.extend(graded_rule(n, c - eps, c, false, true, power));
                r.extend(graded_rule(n, c, c + eps, true, false, power));
                outer(&mut r, c + eps, hi, true, false, false);
            } else {
                outer(&mut r, lo, hi, false, false, low_faces);
            }
            r
        }),
    }
}

/// Whether `u = y − center` lies in the open cube of half-width `ε`.
pub fn in_cube(u: &[f64; 4], eps: f64) -> bool {
    u.iter().all(|v| v.abs() < eps)
}

/// `1/(2π²) ∫_{|u_m| < ε} u_k²/|u|⁴ du`, the same for every `k`; the cube's share
/// of `∫ K(u)(u·∇)h` is this times `Σ_k conj(ψ_k) ∂_k h`.
pub fn cube_moment(eps: f64) -> f64 {
    static UNIT: OnceLock<f64> = OnceLock::new();
    // ∫_{[−1,1]⁴} |u|^{−2} du = 32 ∫_{[0,1]³} dw / (1 + |w|²), splitting by the largest coordinate
    let c4 = *UNIT.get_or_init(|| {
        let r = gauss_legendre(40, 0.0, 1.0);
        let mut acc = Neumaier::default();
        for (a, wa) in r.nodes.iter().zip(&r.weights) {
            for (b, wb) in r.nodes.iter().zip(&r.weights) {
                for (c, wc) in r.nodes.iter().zip(&r.weights) {
                    acc.add(wa * wb * wc / (1.0 + a * a + b * b + c * c));
                }
            }
        }
        32.0 * acc.value()
    });
    eps * eps * c4 / (8.0 * PI * PI)
}

pub fn dist(x: &[f64; 4], y: &[f64; 4]) -> f64 {
    (0..4).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>().sqrt()
}

/// Neumaier-compensated scalar sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of weighted complex quaternions.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuatSum {
    parts: [Neumaier; 8],
}

impl QuatSum {
    pub fn add(&mut self, v: CQuaternion, w: f64) {
        for k in 0..4 {
            self.parts[2 * k].add(v.0[k].re * w);
            self.parts[2 * k + 1].add(v.0[k].im * w);
        }
    }

    pub fn value(&self) -> CQuaternion {
        CQuaternion(std::array::from_fn(|k| {
            num_complex::Complex64::new(self.parts[2 * k].value(), self.parts[2 * k + 1].value())
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn q(x: f64) -> CQuaternion {
        Quaternion::scalar(x).into()
    }

    #[test]
    fn legendre_two_point() {
        let r = gauss_legendre(2, -1.0, 1.0);
        assert_abs_diff_eq!(r.nodes[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gauss_legendre(2, 0.0, 1.0).integrate(|x| x.powi(3)), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(gauss_legendre(1, 0.0, 2.0).integrate(|x| x), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn legendre_exponential() {
        let v = gauss_legendre(24, 0.0, 1.0).integrate(f64::exp);
        assert_abs_diff_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-13);
    }

    #[test]
    fn jacobi_examples() {
        let r = gauss_jacobi(8, -0.5, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.integrate(|_| 1.0), 2.0, epsilon = 1e-12);
        // B(2, 1/2) = 4/3
        assert_abs_diff_eq!(r.integrate(|t| t), 4.0 / 3.0, epsilon = 1e-12);
        let r0 = gauss_jacobi(5, 0.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(r0.integrate(|_| 1.0), 1.0, epsilon = 1e-14);
        assert!(matches!(gauss_jacobi(4, -1.0, 0.0, 1.0), Err(Error::InvalidExponent(_))));
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    // ∫_0^1 (1−t)^μ t^m dt = B(m+1, μ+1)
    fn beta_moment(m: i32, mu: f64) -> f64 {
        (ln_gamma(m as f64 + 1.0) + ln_gamma(mu + 1.0) - ln_gamma(m as f64 + mu + 2.0)).exp()
    }

    #[test]
    fn jacobi_exact_to_degree() {
        for &mu in &[-0.7, -0.5, -0.3, 0.4, 1.5] {
            for n in [1usize, 2, 3, 5, 12, 24, 40] {
                let r = gauss_jacobi(n, mu, 0.0, 1.0).unwrap();
                for m in 0..(2 * n as i32) {
                    let v = r.integrate(|t| t.powi(m));
                    let exact = beta_moment(m, mu);
                    assert!((v - exact).abs() <= 1e-12 * exact.max(1.0), "n={n} mu={mu} m={m}: {v} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn legendre_exact_to_degree() {
        for n in [1usize, 2, 7, 24, 48] {
            let r = gauss_legendre(n, -0.5, 2.0);
            for m in 0..(2 * n as i32) {
                let exact = (2f64.powi(m + 1) - (-0.5f64).powi(m + 1)) / (m + 1) as f64;
                let v = r.integrate(|t| t.powi(m));
                assert!((v - exact).abs() <= 1e-12 * exact.abs().max(1.0), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn graded_handles_endpoint_singularity() {
        // ∫_0^1 t^{-0.7} dt = 1/0.3
        let r = graded_rule(24, 0.0, 1.0, true, false, 10.0);
        assert_abs_diff_eq!(r.integrate(|t| t.powf(-0.7)), 1.0 / 0.3, epsilon = 1e-12);
        let r = graded_rule(24, 0.0, 2.0, false, true, 4.0);
        assert_abs_diff_eq!(r.integrate(|t| (2.0 - t).powf(-0.5)), 2.0 * 2f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn segments_are_symmetric_about_centers() {
        let segs = axis_segments(0.0, 1.0, &[0.3], false, false, None);
        assert_eq!(segs.len(), 3);
        assert_abs_diff_eq!(segs[0].hi, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(segs[1].hi, 0.6, epsilon = 1e-15);
        let segs = axis_segments(0.0, 1.0, &[0.5], true, false, None);
        assert_eq!(segs.len(), 4);
        assert!(segs[0].grade_lo);
        let segs = axis_segments(0.0, 1.0, &[0.5], false, false, Some(0.1));
        assert_eq!(segs.len(), 4);
        assert_abs_diff_eq!(segs[1].lo, 0.4, epsilon = 1e-15);
        let r = axis_rule(0.0, 1.0, &[0.3], true, true, 6, 4.0);
        assert_abs_diff_eq!(r.integrate(|t| t * t), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn box_integrals() {
        let bx = Box4::unit();
        let spec = QuadratureSpec::default();
        assert_abs_diff_eq!(integrate_box4(|_| q(1.0), &bx, &spec).unwrap().re().0[0], 1.0, epsilon = 1e-13);
        let v = integrate_box4(|x| q(x[0] * x[1] * x[2] * x[3]), &bx, &spec).unwrap();
        assert_abs_diff_eq!(v.re().0[0], 1.0 / 16.0, epsilon = 1e-13);
        let err = integrate_box4(|_| q(f64::NAN), &bx, &spec);
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn boundary_of_identity_coordinate() {
        let bx = Box4::unit();
        let psi = StructuralSet::standard();
        let spec = QuadratureSpec::default();
        let v = integrate_boundary(|x| q(x[0]), &bx, &psi, &spec, FormSide::Left).unwrap();
        assert_abs_diff_eq!(v.re().0[0], 1.0, epsilon = 1e-13);
        assert!(v.re().0[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn excluded_ball_volume() {
        let bx = Box4::unit();
        let spec = QuadratureSpec { singular_order: 24, ..Default::default() };
        let r = integrate_excluding_ball(|_| q(1.0), &bx, &bx.center(), 0.1, &spec).unwrap();
        let expected = 1.0 - PI * PI * 1e-4 / 2.0;
        assert_abs_diff_eq!(r.value.re().0[0], expected, epsilon = 1e-3);
        assert_eq!(r.epsilon, 0.1);
        // center outside: plain box integral
        let out = integrate_excluding_ball(|x| q(x[0] * x[0]), &bx, &[3.0, 0.5, 0.5, 0.5], 0.1, &spec).unwrap();
        let plain = integrate_box4(|x| q(x[0] * x[0]), &bx, &spec).unwrap();
        assert!((out.value - plain).max_abs() < 1e-14);
    }

    #[test]
    fn excluded_ball_odd_and_weak_singularities() {
        let bx = Box4::unit();
        let c = bx.center();
        let spec = QuadratureSpec { singular_order: 12, ..Default::default() };
        let odd = integrate_excluding_ball(|x| q((x[0] - c[0]) / dist(&x, &c).powi(4)), &bx, &c, 0.02, &spec).unwrap();
        assert!(odd.value.max_abs() < 1e-10);
        // ∫ |x − c|^{-2}: the missing ball carries π² ε², so the excluded values converge
        let vals: Vec<f64> = [(6, 0.04), (9, 0.02), (12, 0.01)]
            .iter()
            .map(|&(n, eps)| {
                let spec = QuadratureSpec { singular_order: n, ..Default::default() };
                integrate_excluding_ball(|x| q(dist(&x, &c).powi(-2)), &bx, &c, eps, &spec).unwrap().value.re().0[0]
            })
            .collect();
        assert!((vals[2] - vals[1]).abs() < (vals[1] - vals[0]).abs());
    }

    #[test]
    fn deterministic_across_thread_pools() {
        let bx = Box4::new([0.0, -1.0, 0.5, 0.0], [1.0, 1.0, 2.0, 0.3]).unwrap();
        let f = |x: [f64; 4]| q((x[0] * 3.1).sin() * x[1].exp() + x[2] * x[3]);
        let r1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let r4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let spec = QuadratureSpec::default();
        let a = r1.install(|| integrate_box4(f, &bx, &spec).unwrap());
        let b = r4.install(|| integrate_box4(f, &bx, &spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn refinement_schedule() {
        let spec = QuadratureSpec::default();
        let lv = spec.levels(&Box4::unit());
        assert_eq!(lv.len(), 3);
        assert_eq!(lv[2].order, 24);
        assert_abs_diff_eq!(lv[2].epsilon, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(lv[0].epsilon, 0.08, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn constant_has_zero_boundary_integral(c in prop::array::uniform4(-3.0f64..3.0), angle in 0.0f64..6.3) {
            let u = Quaternion::new(angle.cos(), 0.0, angle.sin(), 0.0);
            let psi = StructuralSet::new([Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K].map(|e| e * u)).unwrap();
            let bx = Box4::new([0.0, 0.1, -0.2, 0.0], [1.0, 0.7, 0.4, 2.0]).unwrap();
            let spec = QuadratureSpec { order: 4, ..Default::default() };
            let v = integrate_boundary(|_| Quaternion(c).into(), &bx, &psi, &spec, FormSide::Right).unwrap();
            prop_assert!(v.max_abs() < 1e-12);
        }

        #[test]
        fn cubic_polynomials_exact(coef in prop::array::uniform8(-2.0f64..2.0)) {
            // p(x) = Σ c_m x_{m%4}^{1 + m/4 .. } mixed cubic
            let p = |x: [f64; 4]| coef[0] + coef[1] * x[0] * x[1] * x[2] + coef[2] * x[3].powi(3)
                + coef[3] * x[0] * x[0] * x[1] + coef[4] * x[2] + coef[5] * x[1] * x[3] * x[3]
                + coef[6] * x[0] * x[3] + coef[7] * x[2] * x[2];
            let bx = Box4::new([0.0, -1.0, 0.5, 0.0], [1.0, 1.0, 2.0, 0.3]).unwrap();
            let l = |k: usize| bx.b[k] - bx.a[k];
            let m1 = |k: usize| (bx.b[k].powi(2) - bx.a[k].powi(2)) / 2.0;
            let m2 = |k: usize| (bx.b[k].powi(3) - bx.a[k].powi(3)) / 3.0;
            let m3 = |k: usize| (bx.b[k].powi(4) - bx.a[k].powi(4)) / 4.0;
            let vol = bx.measure();
            let exact = coef[0] * vol
                + coef[1] * m1(0) * m1(1) * m1(2) * l(3)
                + coef[2] * l(0) * l(1) * l(2) * m3(3)
                + coef[3] * m2(0) * m1(1) * l(2) * l(3)
                + coef[4] * l(0) * l(1) * m1(2) * l(3)
                + coef[5] * l(0) * m1(1) * l(2) * m2(3)
                + coef[6] * m1(0) * l(1) * l(2) * m1(3)
                + coef[7] * l(0) * l(1) * m2(2) * l(3);
            for order in [2usize, 4] {
                let spec = QuadratureSpec { order, ..Default::default() };
                let v = integrate_box4(|x| q(p(x)), &bx, &spec).unwrap().re().0[0];
                prop_assert!((v - exact).abs() < 1e-10);
            }
        }
    }
}
