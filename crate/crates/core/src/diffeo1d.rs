//! Increasing diffeomorphisms of the line.
//!
//! Three representations: exact affine maps `x ↦ αx − μ`, polynomials
//! certified increasing on a validity interval, and monotone Hermite tables.
//! Anything that leaves the affine family (inverses of polynomials,
//! compositions, combinations of inverses) is materialized as a table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monotone::{invert_increasing, uniform_nodes, MonotoneTable};

/// Node count of every materialized table.
pub const TABLE_NODES: usize = 4096;
/// Points used to certify `h' > 0` on a polynomial's interval.
pub const MONOTONICITY_SCAN: usize = 4096;
/// Points used by interval-wide membership predicates.
pub const MEMBERSHIP_SCAN: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonePolynomial {
    coeffs: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl MonotonePolynomial {
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    fn value(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn slope(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }

    fn solve(&self, y: f64) -> f64 {
        invert_increasing(|x| self.value(x), |x| self.slope(x), y, self.lo, self.hi)
    }
}

/// Serialized as `{variant, params, domain}`; `domain` is `null` for affine maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiffeoRecord", into = "DiffeoRecord")]
pub enum Diffeo1D {
    /// `x ↦ alpha·x − mu` on the whole line.
    Affine { alpha: f64, mu: f64 },
    Polynomial(MonotonePolynomial),
    Sampled(MonotoneTable),
}

impl Diffeo1D {
    pub fn affine(alpha: f64, mu: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidDiffeo(format!("affine map needs alpha > 0, got {alpha}")));
        }
        Ok(Self::Affine { alpha, mu })
    }

    pub fn identity() -> Self {
        Self::Affine { alpha: 1.0, mu: 0.0 }
    }

    /// `x ↦ x − mu`, which moves a signal right by `mu`.
    pub fn translation(mu: f64) -> Self {
        Self::Affine { alpha: 1.0, mu }
    }

    /// Polynomial `Σ c_k x^k` on `[lo, hi]`, certified increasing by a scan of `h'`.
    pub fn polynomial(coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if coeffs.len() < 2 || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDiffeo("polynomial needs finite coefficients, degree >= 1".into()));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidDiffeo(format!("bad validity interval [{lo}, {hi}]")));
        }
        let poly = MonotonePolynomial { coeffs, lo, hi };
        let min_slope = uniform_nodes(lo, hi, MONOTONICITY_SCAN)
            .into_iter()
            .map(|x| poly.slope(x))
            .fold(f64::INFINITY, f64::min);
        if min_slope <= 0.0 {
            return Err(Error::NotInvertible(format!("h' reaches {min_slope} on [{lo}, {hi}]")));
        }
        Ok(Self::Polynomial(poly))
    }

    pub fn sampled(table: MonotoneTable) -> Self {
        Self::Sampled(table)
    }

    /// Tabulates `f` (with derivative `df`) on `[lo, hi]`.
    pub fn from_fn(
        lo: f64,
        hi: f64,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        Ok(Self::Sampled(MonotoneTable::from_fn(lo, hi, TABLE_NODES, f, df)?))
    }

    /// Validity interval, `None` for affine maps.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            Self::Affine { .. } => None,
            Self::Polynomial(p) => Some((p.lo, p.hi)),
            Self::Sampled(t) => Some(t.domain()),
        }
    }

    /// Image of the validity interval, `None` for affine maps.
    pub fn range(&self) -> Option<(f64, f64)> {
        match self {
            Self::Affine { .. } => None,
            Self::Polynomial(p) => Some((p.value(p.lo), p.value(p.hi))),
            Self::Sampled(t) => Some(t.range()),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Affine { alpha, mu } if *alpha == 1.0 && *mu == 0.0)
    }

    fn check(&self, x: f64) -> Result<()> {
        match self.domain() {
            Some((lo, hi)) => {
                let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
                if x >= lo - slack && x <= hi + slack {
                    Ok(())
                } else {
                    Err(Error::OutOfDomain { x, lo, hi })
                }
            }
            None if x.is_finite() => Ok(()),
            None => Err(Error::OutOfDomain { x, lo: f64::NEG_INFINITY, hi: f64::INFINITY }),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            Self::Affine { alpha, mu } => alpha * x - mu,
            Self::Polynomial(p) => p.value(x.clamp(p.lo, p.hi)),
            Self::Sampled(t) => t.eval(x)?,
        })
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            Self::Affine { alpha, .. } => *alpha,
            Self::Polynomial(p) => p.slope(x.clamp(p.lo, p.hi)),
            Self::Sampled(t) => t.derivative(x)?,
        })
    }

    /// Evaluates `h⁻¹(y)` and `(h⁻¹)'(y)` without building a table.
    fn inverse_point(&self, y: f64) -> Result<(f64, f64)> {
        match self {
            Self::Affine { alpha, mu } => Ok(((y + mu) / alpha, 1.0 / alpha)),
            Self::Polynomial(p) => {
                let (lo, hi) = (p.value(p.lo), p.value(p.hi));
                let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
                if !(y >= lo - slack && y <= hi + slack) {
                    return Err(Error::OutOfDomain { x: y, lo, hi });
                }
                let x = p.solve(y.clamp(lo, hi));
                Ok((x, 1.0 / p.slope(x)))
            }
            Self::Sampled(_) => {
                let inv = self.inverse()?;
                Ok((inv.eval(y)?, inv.derivative(y)?))
            }
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        match self {
            Self::Affine { alpha, mu } => Self::affine(1.0 / alpha, -mu / alpha),
            Self::Polynomial(p) => {
                let (lo, hi) = (p.value(p.lo), p.value(p.hi));
                let xs = uniform_nodes(lo, hi, TABLE_NODES);
                let mut ys = Vec::with_capacity(xs.len());
                let mut ds = Vec::with_capacity(xs.len());
                for (k, &y) in xs.iter().enumerate() {
                    let x = if k == 0 {
                        p.lo
                    } else if k + 1 == xs.len() {
                        p.hi
                    } else {
                        p.solve(y)
                    };
                    let slope = p.slope(x);
                    if slope <= 0.0 {
                        return Err(Error::NotInvertible(format!("h'({x}) = {slope}")));
                    }
                    ys.push(x);
                    ds.push(1.0 / slope);
                }
                Ok(Self::Sampled(MonotoneTable::new(xs, ys, ds)?))
            }
            Self::Sampled(t) => Ok(Self::Sampled(t.inverse()?)),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Diffeo1D) -> Result<Self> {
        if inner.is_identity() {
            return Ok(self.clone());
        }
        if self.is_identity() {
            return Ok(inner.clone());
        }
        if let (Self::Affine { alpha: a1, mu: m1 }, Self::Affine { alpha: a2, mu: m2 }) = (self, inner) {
            return Self::affine(a1 * a2, a1 * m2 + m1);
        }
        let (lo, hi) = match (inner.domain(), self.domain()) {
            (Some((lo, hi)), outer) => {
                if let Some((olo, ohi)) = outer {
                    let (rlo, rhi) = (inner.eval(lo)?, inner.eval(hi)?);
                    let slack = 1e-9 * (1.0 + olo.abs().max(ohi.abs()));
                    if rlo < olo - slack || rhi > ohi + slack {
                        return Err(Error::DomainMismatch(format!(
                            "inner range [{rlo}, {rhi}] leaves outer domain [{olo}, {ohi}]"
                        )));
                    }
                }
                (lo, hi)
            }
            (None, Some((olo, ohi))) => {
                let inv = inner.inverse()?;
                (inv.eval(olo)?, inv.eval(ohi)?)
            }
            (None, None) => unreachable!("affine pair handled above"),
        };
        let clamp = |y: f64| match self.domain() {
            Some((a, b)) => y.clamp(a, b),
            None => y,
        };
        let table = MonotoneTable::from_fn(
            lo,
            hi,
            TABLE_NODES,
            |x| self.eval(clamp(inner.eval(x).unwrap_or(f64::NAN))).unwrap_or(f64::NAN),
            |x| {
                let y = clamp(inner.eval(x).unwrap_or(f64::NAN));
                self.derivative(y).unwrap_or(f64::NAN) * inner.derivative(x).unwrap_or(f64::NAN)
            },
        )?;
        Ok(Self::Sampled(table))
    }

    /// Returns `g` whose inverse is `α·h₁⁻¹ + (1−α)·h₂⁻¹` on the overlap of
    /// the two inverse domains.
    pub fn convex_combo_of_inverses(h1: &Diffeo1D, h2: &Diffeo1D, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OutOfRange(alpha));
        }
        if let (Self::Affine { alpha: a1, mu: m1 }, Self::Affine { alpha: a2, mu: m2 }) = (h1, h2) {
            // h⁻¹(y) = (y + μ)/a, so the combination is affine with these terms
            let slope = alpha / a1 + (1.0 - alpha) / a2;
            let offset = alpha * m1 / a1 + (1.0 - alpha) * m2 / a2;
            return Self::affine(slope, -offset)?.inverse();
        }
        let (lo, hi) = match (h1.range(), h2.range()) {
            (Some(a), Some(b)) => (a.0.max(b.0), a.1.min(b.1)),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => unreachable!("affine pair handled above"),
        };
        if lo >= hi {
            return Err(Error::DomainMismatch(format!("inverse domains do not overlap ({lo} >= {hi})")));
        }
        let inv1 = Inverter::new(h1)?;
        let inv2 = Inverter::new(h2)?;
        let xs = uniform_nodes(lo, hi, TABLE_NODES);
        let mut ws = Vec::with_capacity(xs.len());
        let mut ds = Vec::with_capacity(xs.len());
        for &y in &xs {
            let (x1, d1) = inv1.at(y.clamp(lo, hi))?;
            let (x2, d2) = inv2.at(y.clamp(lo, hi))?;
            ws.push(alpha * x1 + (1.0 - alpha) * x2);
            ds.push(alpha * d1 + (1.0 - alpha) * d2);
        }
        let combo = MonotoneTable::new(xs, ws, ds)?;
        Ok(Self::Sampled(combo.inverse()?))
    }

    /// Sup of `|self − other|` over `n` points of `[lo, hi]`.
    pub fn sup_distance(&self, other: &Diffeo1D, lo: f64, hi: f64, n: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in uniform_nodes(lo, hi, n) {
            worst = worst.max((self.eval(x)? - other.eval(x)?).abs());
        }
        Ok(worst)
    }
}

/// Point evaluator for `h⁻¹` that builds a table once for sampled maps.
enum Inverter<'a> {
    Direct(&'a Diffeo1D),
    Table(Diffeo1D),
}

impl<'a> Inverter<'a> {
    fn new(h: &'a Diffeo1D) -> Result<Self> {
        Ok(match h {
            Diffeo1D::Sampled(_) => Self::Table(h.inverse()?),
            _ => Self::Direct(h),
        })
    }

    fn at(&self, y: f64) -> Result<(f64, f64)> {
        match self {
            Self::Direct(h) => h.inverse_point(y),
            Self::Table(t) => Ok((t.eval(y)?, t.derivative(y)?)),
        }
    }
}

/// Convex subgroups of the increasing diffeomorphisms of the line, plus the
/// (non-convex) integer translations used as a negative control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    Identity,
    IsotropicScaling,
    Translations,
    IntegerTranslations,
    IncreasingAffine,
    FixedPoints { points: Vec<f64> },
    FixedInterval { lo: f64, hi: f64 },
}

impl GroupKind {
    pub fn is_convex(&self) -> bool {
        !matches!(self, Self::IntegerTranslations)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
enum DiffeoParams {
    Affine { alpha: f64, mu: f64 },
    Polynomial { coeffs: Vec<f64> },
    Sampled(MonotoneTable),
}

#[derive(Serialize, Deserialize)]
struct DiffeoRecord {
    #[serde(flatten)]
    params: DiffeoParams,
    domain: Option<(f64, f64)>,
}

impl TryFrom<DiffeoRecord> for Diffeo1D {
    type Error = Error;

    fn try_from(r: DiffeoRecord) -> Result<Self> {
        let h = match (r.params, r.domain) {
            (DiffeoParams::Affine { alpha, mu }, None) => Self::affine(alpha, mu)?,
            (DiffeoParams::Polynomial { coeffs }, Some((lo, hi))) => Self::polynomial(coeffs, lo, hi)?,
            (DiffeoParams::Sampled(t), _) => Self::Sampled(t),
            _ => return Err(Error::InvalidDiffeo("domain does not fit the variant".into())),
        };
        if let (Some(d), Some(given)) = (h.domain(), r.domain) {
            if d != given {
                return Err(Error::InvalidDiffeo(format!("domain {given:?} differs from table nodes {d:?}")));
            }
        }
        Ok(h)
    }
}

impl From<Diffeo1D> for DiffeoRecord {
    fn from(h: Diffeo1D) -> Self {
        let domain = h.domain();
        let params = match h {
            Diffeo1D::Affine { alpha, mu } => DiffeoParams::Affine { alpha, mu },
            Diffeo1D::Polynomial(p) => DiffeoParams::Polynomial { coeffs: p.coeffs },
            Diffeo1D::Sampled(t) => DiffeoParams::Sampled(t),
        };
        Self { params, domain }
    }
}

/// A group together with the parameter boxes used to draw random members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec1D {
    #[serde(flatten)]
    pub kind: GroupKind,
    /// Parameter boxes; their meaning depends on `kind` (see [`GroupSpec1D::sample`]).
    pub bounds: Vec<(f64, f64)>,
    /// Interval on which non-affine members are built; defaults to `[0, 1]`.
    #[serde(default = "unit_domain")]
    pub domain: (f64, f64),
}

fn unit_domain() -> (f64, f64) {
    (0.0, 1.0)
}

impl GroupSpec1D {
    pub fn new(kind: GroupKind) -> Result<Self> {
        let bounds = match &kind {
            GroupKind::Identity => vec![],
            GroupKind::IsotropicScaling => vec![(0.8, 1.25)],
            GroupKind::Translations => vec![(-0.2, 0.2)],
            GroupKind::IntegerTranslations => vec![(-2.0, 2.0)],
            GroupKind::IncreasingAffine => vec![(0.8, 1.25), (-0.1, 0.1)],
            GroupKind::FixedPoints { points } => {
                if points.is_empty() {
                    return Err(Error::Config("fixed-point group needs at least one point".into()));
                }
                vec![(-1.0, 1.0)]
            }
            GroupKind::FixedInterval { lo, hi } => {
                if lo >= hi {
                    return Err(Error::Config(format!("fixed interval [{lo}, {hi}] is empty")));
                }
                vec![(0.0, 2.0)]
            }
        };
        Ok(Self { kind, bounds, domain: unit_domain() })
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    /// Decides whether `h` satisfies the group's defining predicate within `tol`.
    pub fn contains(&self, h: &Diffeo1D, tol: f64) -> bool {
        group_membership(self, h, tol)
    }

    fn bound(&self, i: usize) -> Result<(f64, f64)> {
        self.bounds
            .get(i)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing parameter box {i} for {:?}", self.kind)))
    }

    /// Draws `count` random members, deterministically in `seed`.
    ///
    /// Boxes: scaling `[α]`; translations `[μ]`; integer translations `[k range]`;
    /// affine `[α, μ]`; fixed points `[c]` for `x + c·Π(x − xᵢ)`; fixed interval
    /// `[c]` for the two cubic tails `x + c₁(x−b)₊³ − c₂(a−x)₊³`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Diffeo1D>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |(lo, hi): (f64, f64)| if lo < hi { rng.gen_range(lo..hi) } else { lo };
        let (dlo, dhi) = self.domain;
        if !(dlo < dhi && dlo.is_finite() && dhi.is_finite()) {
            return Err(Error::Config(format!("bad group domain [{dlo}, {dhi}]")));
        }
        if self.bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite())) {
            return Err(Error::Config("parameter boxes must be finite".into()));
        }
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count {
            attempts += 1;
            if attempts > 10_000 * count.max(1) {
                return Err(Error::SamplingExhausted { attempts, accepted: out.len() });
            }
            let h = match &self.kind {
                GroupKind::Identity => Ok(Diffeo1D::identity()),
                GroupKind::IsotropicScaling => Diffeo1D::affine(draw(self.bound(0)?), 0.0),
                GroupKind::Translations => Ok(Diffeo1D::translation(draw(self.bound(0)?))),
                GroupKind::IntegerTranslations => Ok(Diffeo1D::translation(draw(self.bound(0)?).round())),
                GroupKind::IncreasingAffine => {
                    let a = draw(self.bound(0)?);
                    Diffeo1D::affine(a, draw(self.bound(1)?))
                }
                GroupKind::FixedPoints { points } => {
                    // coefficients of x + c·Π(x − xᵢ)
                    let c = draw(self.bound(0)?);
                    let mut prod = vec![1.0];
                    for &p in points {
                        let mut next = vec![0.0; prod.len() + 1];
                        for (k, a) in prod.iter().enumerate() {
                            next[k + 1] += a;
                            next[k] -= p * a;
                        }
                        prod = next;
                    }
                    let mut coeffs: Vec<f64> = prod.iter().map(|a| c * a).collect();
                    if coeffs.len() < 2 {
                        coeffs.resize(2, 0.0);
                    }
                    coeffs[1] += 1.0;
                    Diffeo1D::polynomial(coeffs, dlo, dhi)
                }
                GroupKind::FixedInterval { lo, hi } => {
                    let (c1, c2) = (draw(self.bound(0)?), draw(self.bound(0)?));
                    let (a, b) = (*lo, *hi);
                    Diffeo1D::from_fn(
                        dlo,
                        dhi,
                        move |x| x + c1 * (x - b).max(0.0).powi(3) - c2 * (a - x).max(0.0).powi(3),
                        move |x| 1.0 + 3.0 * c1 * (x - b).max(0.0).powi(2) + 3.0 * c2 * (a - x).max(0.0).powi(2),
                    )
                }
            };
            match h {
                Ok(h) => out.push(h),
                Err(Error::NotInvertible(_)) | Err(Error::InvalidDiffeo(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

fn scan_sup(h: &Diffeo1D, lo: f64, hi: f64, target: impl Fn(f64) -> f64) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for x in uniform_nodes(lo, hi, MEMBERSHIP_SCAN) {
        worst = worst.max((h.eval(x).ok()? - target(x)).abs());
    }
    Some(worst)
}

/// True iff `h` satisfies the defining predicate of `spec.kind` within `tol`.
pub fn group_membership(spec: &GroupSpec1D, h: &Diffeo1D, tol: f64) -> bool {
    if let Diffeo1D::Affine { alpha, mu } = h {
        return match &spec.kind {
            GroupKind::Identity => (alpha - 1.0).abs() <= tol && mu.abs() <= tol,
            GroupKind::IsotropicScaling => mu.abs() <= tol,
            GroupKind::Translations => (alpha - 1.0).abs() <= tol,
            GroupKind::IntegerTranslations => (alpha - 1.0).abs() <= tol && (mu - mu.round()).abs() <= tol,
            GroupKind::IncreasingAffine => true,
            GroupKind::FixedPoints { points } => points.iter().all(|&x| (alpha * x - mu - x).abs() <= tol),
            GroupKind::FixedInterval { lo, hi } => {
                [*lo, *hi].iter().all(|&x| (alpha * x - mu - x).abs() <= tol)
            }
        };
    }
    let (lo, hi) = h.domain().expect("non-affine maps are bounded");
    let at = |x: f64| h.eval(x).ok();
    let within = |v: Option<f64>| v.is_some_and(|v| v <= tol);
    match &spec.kind {
        GroupKind::Identity => within(scan_sup(h, lo, hi, |x| x)),
        GroupKind::IsotropicScaling => {
            let Some(slope) = at(hi).zip(at(lo)).map(|(b, a)| (b - a) / (hi - lo)) else {
                return false;
            };
            within(scan_sup(h, lo, hi, |x| slope * x))
        }
        GroupKind::Translations | GroupKind::IntegerTranslations => {
            let Some(shift) = at(lo).map(|v| v - lo) else { return false };
            let integral = matches!(spec.kind, GroupKind::Translations) || (shift - shift.round()).abs() <= tol;
            integral && within(scan_sup(h, lo, hi, |x| x + shift))
        }
        GroupKind::IncreasingAffine => {
            let (Some(a), Some(b)) = (at(lo), at(hi)) else { return false };
            let slope = (b - a) / (hi - lo);
            within(scan_sup(h, lo, hi, |x| a + slope * (x - lo)))
        }
        GroupKind::FixedPoints { points } => {
            points.iter().all(|&x| at(x).is_some_and(|v| (v - x).abs() <= tol))
        }
        GroupKind::FixedInterval { lo: a, hi: b } => within(scan_sup(h, *a, *b, |x| x)),
    }
}

/// Rejection sampler for random increasing polynomials on an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSampler {
    /// One `(lo, hi)` box per coefficient `c₀..c_k`.
    pub boxes: Vec<(f64, f64)>,
    pub domain: (f64, f64),
    /// Template support that every generated signal must keep inside `domain`.
    pub support: (f64, f64),
}

impl PolynomialSampler {
    /// Boxes centred on the identity: `c₀ ∈ ±0.05`, `c₁ ∈ [0.8, 1.2]`, higher
    /// coefficients in `±0.1`.
    pub fn near_identity(degree: usize, support: (f64, f64)) -> Self {
        let mut boxes = vec![(-0.05, 0.05), (0.8, 1.2)];
        boxes.extend(std::iter::repeat_n((-0.1, 0.1), degree.saturating_sub(1)));
        Self { boxes, domain: (0.0, 1.0), support }
    }

    pub fn degree(&self) -> usize {
        self.boxes.len().saturating_sub(1)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Diffeo1D>> {
        if self.boxes.len() < 2 || count == 0 {
            return Err(Error::Config("need degree >= 1 and count >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = self.domain;
        let (s0, s1) = self.support;
        let max_attempts = 10_000 * count;
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count {
            if attempts >= max_attempts {
                return Err(Error::SamplingExhausted { attempts, accepted: out.len() });
            }
            attempts += 1;
            let coeffs: Vec<f64> = self
                .boxes
                .iter()
                .map(|&(a, b)| if a < b { rng.gen_range(a..b) } else { a })
                .collect();
            let Ok(h) = Diffeo1D::polynomial(coeffs, lo, hi) else { continue };
            // h⁻¹([s0, s1]) ⊆ [lo, hi]  ⇔  h(lo) <= s0 and h(hi) >= s1
            let (a, b) = h.range().expect("polynomials are bounded");
            if a <= s0 && b >= s1 {
                out.push(h);
            }
        }
        Ok(out)
    }
}

/// `count` increasing polynomials of `degree` on `[0, 1]` drawn from the
/// near-identity boxes, each keeping `support` inside `[0, 1]`.
pub fn sample_polynomial_diffeos(
    degree: usize,
    count: usize,
    seed: u64,
    support: (f64, f64),
) -> Result<Vec<Diffeo1D>> {
    if degree == 0 {
        return Err(Error::Config("degree must be at least 1".into()));
    }
    PolynomialSampler::near_identity(degree, support).sample(count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad() -> Diffeo1D {
        Diffeo1D::polynomial(vec![0.0, 1.0, 0.1], 0.0, 1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Diffeo1D::affine(2.0, 1.0).unwrap().eval(3.0).unwrap(), 5.0);
        assert_eq!(Diffeo1D::identity().eval(0.7).unwrap(), 0.7);
        assert_abs_diff_eq!(quad().eval(1.0).unwrap(), 1.1, epsilon = 1e-15);
        assert!(matches!(quad().eval(1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(Diffeo1D::affine(2.0, 1.0).unwrap().derivative(-8.0).unwrap(), 2.0);
        assert_abs_diff_eq!(quad().derivative(1.0).unwrap(), 1.2, epsilon = 1e-15);
        let sq = Diffeo1D::sampled(
            MonotoneTable::from_values(uniform_nodes(1.0, 2.0, 4096), uniform_nodes(1.0, 2.0, 4096).iter().map(|x| x * x).collect())
                .unwrap(),
        );
        assert!((sq.derivative(1.5).unwrap() - 3.0).abs() < 1e-4);
    }

    #[test]
    fn inverse_examples() {
        let inv = Diffeo1D::affine(2.0, 1.0).unwrap().inverse().unwrap();
        assert_eq!(inv, Diffeo1D::Affine { alpha: 0.5, mu: -0.5 });
        assert_eq!(Diffeo1D::identity().inverse().unwrap(), Diffeo1D::identity());
        // 0.1x² + x = 1.1 has the root x = 1
        let qinv = quad().inverse().unwrap();
        assert!((qinv.eval(1.1).unwrap() - 1.0).abs() < 1e-10);
        // interior point: root of 0.1x² + x − 0.5 by the quadratic formula
        let root = (-1.0 + (1.0f64 + 0.2).sqrt()) / 0.2;
        assert!((qinv.eval(0.5).unwrap() - root).abs() < 1e-10);
    }

    #[test]
    fn compose_examples() {
        let c = Diffeo1D::affine(2.0, 0.0).unwrap().compose(&Diffeo1D::affine(3.0, 0.0).unwrap()).unwrap();
        assert_eq!(c, Diffeo1D::Affine { alpha: 6.0, mu: 0.0 });
        assert_eq!(quad().compose(&Diffeo1D::identity()).unwrap(), quad());
        let c = quad().compose(&Diffeo1D::affine(2.0, 0.0).unwrap()).unwrap();
        assert_eq!(c.domain(), Some((0.0, 0.5)));
        assert!((c.eval(0.5).unwrap() - 1.1).abs() < 1e-12);
        assert!((c.eval(0.2).unwrap() - (0.4 + 0.1 * 0.16)).abs() < 1e-12);
        let wide = Diffeo1D::polynomial(vec![0.0, 2.0], 0.0, 1.0).unwrap();
        assert!(matches!(quad().compose(&wide), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn convex_combo_examples() {
        let h1 = Diffeo1D::affine(2.0, 0.0).unwrap();
        let h2 = Diffeo1D::affine(4.0, 0.0).unwrap();
        let g = Diffeo1D::convex_combo_of_inverses(&h1, &h2, 0.5).unwrap();
        match g {
            Diffeo1D::Affine { alpha, mu } => {
                assert_abs_diff_eq!(alpha, 8.0 / 3.0, epsilon = 1e-14);
                assert_abs_diff_eq!(mu, 0.0, epsilon = 1e-14);
            }
            other => panic!("expected affine, got {other:?}"),
        }
        let p = quad();
        let s = Diffeo1D::polynomial(vec![0.02, 0.9, 0.0, 0.1], 0.0, 1.0).unwrap();
        let one = Diffeo1D::convex_combo_of_inverses(&p, &s, 1.0).unwrap();
        let zero = Diffeo1D::convex_combo_of_inverses(&p, &s, 0.0).unwrap();
        let (lo, hi) = one.domain().unwrap();
        assert!(one.sup_distance(&p, lo, hi, 500).unwrap() < 1e-10);
        let (lo, hi) = zero.domain().unwrap();
        assert!(zero.sup_distance(&s, lo, hi, 500).unwrap() < 1e-10);
        assert!(Diffeo1D::convex_combo_of_inverses(&p, &s, 1.5).is_err());
    }

    #[test]
    fn membership_examples() {
        let tr = GroupSpec1D::new(GroupKind::Translations).unwrap();
        assert!(group_membership(&tr, &Diffeo1D::affine(1.0, 0.3).unwrap(), 1e-12));
        assert!(!group_membership(&tr, &Diffeo1D::affine(2.0, 0.0).unwrap(), 1e-12));
        // 0.5 + (x − 0.5) + 0.2(x − 0.5)³ expanded
        let h = Diffeo1D::polynomial(vec![-0.025, 1.15, -0.3, 0.2], 0.0, 1.0).unwrap();
        let fixed = GroupSpec1D::new(GroupKind::FixedPoints { points: vec![0.5] }).unwrap();
        assert!(group_membership(&fixed, &h, 1e-12));
        let other = GroupSpec1D::new(GroupKind::FixedPoints { points: vec![0.25] }).unwrap();
        assert!(!group_membership(&other, &h, 1e-6));
        assert!(GroupSpec1D::new(GroupKind::FixedPoints { points: vec![] }).is_err());
    }

    #[test]
    fn fixed_interval_members_fix_the_interval() {
        let spec = GroupSpec1D::new(GroupKind::FixedInterval { lo: 0.4, hi: 0.6 }).unwrap();
        for h in spec.sample(5, 3).unwrap() {
            assert!(group_membership(&spec, &h, 1e-12));
            let idspec = GroupSpec1D::new(GroupKind::Identity).unwrap();
            assert!(!group_membership(&idspec, &h, 1e-6) || h.eval(0.0).unwrap() == 0.0);
        }
    }

    #[test]
    fn sampler_is_deterministic_and_constrained() {
        let sampler = PolynomialSampler {
            boxes: vec![(-0.05, 0.05), (0.9, 1.1)],
            domain: (0.0, 1.0),
            support: (0.2, 0.7),
        };
        let a = sampler.sample(50, 11).unwrap();
        let b = sampler.sample(50, 11).unwrap();
        assert_eq!(a, b);
        for h in &a {
            let (lo, hi) = h.range().unwrap();
            assert!(lo <= 0.2 && hi >= 0.7);
        }
        let impossible = PolynomialSampler { support: (-1.0, 2.0), ..sampler };
        assert!(matches!(impossible.sample(1, 0), Err(Error::SamplingExhausted { .. })));
    }

    #[test]
    fn degree_five_sampler_produces_increasing_maps() {
        let hs = sample_polynomial_diffeos(5, 500, 2024, (0.3, 0.7)).unwrap();
        assert_eq!(hs.len(), 500);
        for h in &hs {
            let min = uniform_nodes(0.0, 1.0, 4096)
                .into_iter()
                .map(|x| h.derivative(x).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(min > 0.0);
        }
    }
}
