//! Planar diffeomorphism families.
//!
//! `Ha` holds translations with isotropic scaling, `Hs` the symmetric affine
//! maps sharing the eigenvectors `(1, 1)` and `(1, −1)`, and `Hr` the maps
//!
//! ```text
//! h(x, y) = ½ [f'(x+y) + g'(x−y), f'(x+y) − g'(x−y)]
//! ```
//!
//! built from two strictly increasing profiles `f'` and `g'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monotone::MonotoneTable;

pub type Mat2 = [[f64; 2]; 2];

/// A strictly increasing profile `t ↦ f'(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `t ↦ a·t + b` on the whole line.
    AffinePlus { a: f64, b: f64 },
    /// `t ↦ b·t + a·t²` on `[lo, hi]`, right of the vertex.
    QuadraticMonotone { a: f64, b: f64, lo: f64, hi: f64 },
    /// Inverse of `QuadraticMonotone { a, b }`; `lo, hi` bound its own argument.
    QuadraticRoot { a: f64, b: f64, lo: f64, hi: f64 },
    Sampled { table: MonotoneTable },
    /// `outer ∘ inner` on `[lo, hi]`.
    Composite { outer: Box<Profile>, inner: Box<Profile>, lo: f64, hi: f64 },
}

fn quadratic_root(a: f64, b: f64, y: f64) -> f64 {
    // 2y / (b + √(b² + 4ay)) avoids cancellation near a = 0
    2.0 * y / (b + (b * b + 4.0 * a * y).sqrt())
}

impl Profile {
    pub fn identity() -> Self {
        Self::AffinePlus { a: 1.0, b: 0.0 }
    }

    pub fn affine(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidDiffeo(format!("affine profile needs a > 0, got {a}")));
        }
        Ok(Self::AffinePlus { a, b })
    }

    pub fn quadratic(a: f64, b: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(a >= 0.0 && b > 0.0 && [a, b, lo, hi].iter().all(|v| v.is_finite()) && lo < hi) {
            return Err(Error::InvalidDiffeo(format!("bad quadratic profile a={a}, b={b} on [{lo}, {hi}]")));
        }
        if b + 2.0 * a * lo <= 0.0 {
            return Err(Error::InvalidDiffeo(format!(
                "interval [{lo}, {hi}] reaches the vertex {} of the quadratic",
                -b / (2.0 * a)
            )));
        }
        Ok(Self::QuadraticMonotone { a, b, lo, hi })
    }

    pub fn sampled(table: MonotoneTable) -> Self {
        Self::Sampled { table }
    }

    /// Validates a profile built directly from its fields (for example by deserialization).
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::AffinePlus { a, b } => Self::affine(*a, *b).map(|_| ()),
            Self::QuadraticMonotone { a, b, lo, hi } => Self::quadratic(*a, *b, *lo, *hi).map(|_| ()),
            Self::QuadraticRoot { a, b, lo, hi } => {
                let fwd = Self::quadratic(*a, *b, quadratic_root(*a, *b, *lo), quadratic_root(*a, *b, *hi));
                if !(lo < hi) || fwd.is_err() || b * b + 4.0 * a * lo <= 0.0 {
                    return Err(Error::InvalidDiffeo(format!("bad root profile on [{lo}, {hi}]")));
                }
                Ok(())
            }
            Self::Sampled { .. } => Ok(()),
            Self::Composite { outer, inner, lo, hi } => {
                outer.validate()?;
                inner.validate()?;
                if !(lo < hi) {
                    return Err(Error::InvalidDiffeo(format!("empty composite interval [{lo}, {hi}]")));
                }
                let (ylo, yhi) = (inner.eval(*lo)?, inner.eval(*hi)?);
                outer.clamp(ylo)?;
                outer.clamp(yhi)?;
                Ok(())
            }
        }
    }

    /// Validity interval, `None` when the profile is defined on the whole line.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            Self::AffinePlus { .. } => None,
            Self::QuadraticMonotone { lo, hi, .. }
            | Self::QuadraticRoot { lo, hi, .. }
            | Self::Composite { lo, hi, .. } => Some((*lo, *hi)),
            Self::Sampled { table } => Some(table.domain()),
        }
    }

    pub fn range(&self) -> Result<Option<(f64, f64)>> {
        match self.domain() {
            None => Ok(None),
            Some((lo, hi)) => Ok(Some((self.eval(lo)?, self.eval(hi)?))),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::AffinePlus { a, b } if *a == 1.0 && *b == 0.0)
    }

    fn clamp(&self, t: f64) -> Result<f64> {
        match self.domain() {
            None if t.is_finite() => Ok(t),
            None => Err(Error::OutOfDomain { x: t, lo: f64::NEG_INFINITY, hi: f64::INFINITY }),
            Some((lo, hi)) => {
                let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
                if t >= lo - slack && t <= hi + slack {
                    Ok(t.clamp(lo, hi))
                } else {
                    Err(Error::OutOfDomain { x: t, lo, hi })
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let t = self.clamp(t)?;
        Ok(match self {
            Self::AffinePlus { a, b } => a * t + b,
            Self::QuadraticMonotone { a, b, .. } => b * t + a * t * t,
            Self::QuadraticRoot { a, b, .. } => quadratic_root(*a, *b, t),
            Self::Sampled { table } => table.eval(t)?,
            Self::Composite { outer, inner, .. } => outer.eval(inner.eval(t)?)?,
        })
    }

    /// Derivative of the profile, i.e. `f''`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        let t = self.clamp(t)?;
        Ok(match self {
            Self::AffinePlus { a, .. } => *a,
            Self::QuadraticMonotone { a, b, .. } => b + 2.0 * a * t,
            Self::QuadraticRoot { a, b, .. } => 1.0 / (b * b + 4.0 * a * t).sqrt(),
            Self::Sampled { table } => table.derivative(t)?,
            Self::Composite { outer, inner, .. } => outer.derivative(inner.eval(t)?)? * inner.derivative(t)?,
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(match self {
            Self::AffinePlus { a, b } => Self::affine(1.0 / a, -b / a)?,
            Self::QuadraticMonotone { a, b, lo, hi } => {
                let (flo, fhi) = (self.eval(*lo)?, self.eval(*hi)?);
                Self::QuadraticRoot { a: *a, b: *b, lo: flo, hi: fhi }
            }
            Self::QuadraticRoot { a, b, lo, hi } => Self::QuadraticMonotone {
                a: *a,
                b: *b,
                lo: quadratic_root(*a, *b, *lo),
                hi: quadratic_root(*a, *b, *hi),
            },
            Self::Sampled { table } => Self::Sampled { table: table.inverse()? },
            Self::Composite { outer, inner, lo, hi } => {
                let (ylo, yhi) = (self.eval(*lo)?, self.eval(*hi)?);
                Self::Composite { outer: Box::new(inner.inverse()?), inner: Box::new(outer.inverse()?), lo: ylo, hi: yhi }
            }
        })
    }

    /// `self ∘ inner`, exact for affine pairs and symbolic otherwise.
    pub fn compose(&self, inner: &Profile) -> Result<Self> {
        if inner.is_identity() {
            return Ok(self.clone());
        }
        if self.is_identity() {
            return Ok(inner.clone());
        }
        if let (Self::AffinePlus { a: a1, b: b1 }, Self::AffinePlus { a: a2, b: b2 }) = (self, inner) {
            return Self::affine(a1 * a2, a1 * b2 + b1);
        }
        let (lo, hi) = match (inner.domain(), self.domain()) {
            (Some((lo, hi)), outer) => {
                if let Some((olo, ohi)) = outer {
                    let (rlo, rhi) = (inner.eval(lo)?, inner.eval(hi)?);
                    let slack = 1e-9 * (1.0 + olo.abs().max(ohi.abs()));
                    if rlo < olo - slack || rhi > ohi + slack {
                        return Err(Error::DomainMismatch(format!(
                            "inner profile range [{rlo}, {rhi}] leaves [{olo}, {ohi}]"
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
        Ok(Self::Composite { outer: Box::new(self.clone()), inner: Box::new(inner.clone()), lo, hi })
    }

    /// Antiderivative `f(t)` normalized by `f(0) = 0`.
    pub fn antiderivative(&self, t: f64) -> Result<f64> {
        let t = self.clamp(t)?;
        Ok(match self {
            Self::AffinePlus { a, b } => 0.5 * a * t * t + b * t,
            Self::QuadraticMonotone { a, b, .. } => 0.5 * b * t * t + a * t * t * t / 3.0,
            Self::QuadraticRoot { a, b, .. } => {
                // ∫₀ʸ q = y·q(y) − Q(q(y)) with Q the antiderivative of the forward quadratic
                let x = quadratic_root(*a, *b, t);
                t * x - (0.5 * b * x * x + a * x * x * x / 3.0)
            }
            Self::Sampled { table } => {
                self.clamp(0.0)?;
                table.integral_to(t)? - table.integral_to(0.0)?
            }
            Self::Composite { .. } => {
                self.clamp(0.0)?;
                gauss_legendre(|s| self.eval(s), 0.0, t)?
            }
        })
    }
}

/// Composite 5-point Gauss–Legendre rule on 256 panels.
fn gauss_legendre(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    const X: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let panels = 256;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            total += w * f(mid + 0.5 * h * x)?;
        }
    }
    Ok(0.5 * h * total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum Diffeo2D {
    /// `x ↦ a·x + u`.
    Ha { a: f64, u: [f64; 2] },
    /// `x ↦ A·x + u` with `A = [[a₁+a₂, a₁−a₂], [a₁−a₂, a₁+a₂]]` and
    /// `u = ((b₁+b₂)/2, (b₁−b₂)/2)`, the gradient of `½(f(x+y) + g(x−y))` for
    /// `f = a₁t² + b₁t`, `g = a₂t² + b₂t`.
    Hs { a1: f64, a2: f64, b1: f64, b2: f64 },
    Hr { f: Profile, g: Profile },
}

impl Diffeo2D {
    pub fn identity() -> Self {
        Self::Ha { a: 1.0, u: [0.0, 0.0] }
    }

    pub fn ha(a: f64, u: [f64; 2]) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && u.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidDiffeo(format!("Ha needs a > 0, got {a}")));
        }
        Ok(Self::Ha { a, u })
    }

    pub fn hs(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && [a1, a2, b1, b2].iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidDiffeo(format!("Hs needs a1, a2 > 0, got {a1}, {a2}")));
        }
        Ok(Self::Hs { a1, a2, b1, b2 })
    }

    pub fn hr(f: Profile, g: Profile) -> Result<Self> {
        f.validate()?;
        g.validate()?;
        Ok(Self::Hr { f, g })
    }

    /// Checks parameters of a value built directly from its fields.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Ha { a, u } => Self::ha(*a, *u).map(|_| ()),
            Self::Hs { a1, a2, b1, b2 } => Self::hs(*a1, *a2, *b1, *b2).map(|_| ()),
            Self::Hr { f, g } => {
                f.validate()?;
                g.validate()
            }
        }
    }

    /// Linear part and shift of the affine variants.
    pub fn affine_parts(&self) -> Option<(Mat2, [f64; 2])> {
        match self {
            Self::Ha { a, u } => Some(([[*a, 0.0], [0.0, *a]], *u)),
            Self::Hs { a1, a2, b1, b2 } => Some((
                [[a1 + a2, a1 - a2], [a1 - a2, a1 + a2]],
                [0.5 * (b1 + b2), 0.5 * (b1 - b2)],
            )),
            Self::Hr { .. } => None,
        }
    }

    /// The same map written with `Hr` profiles.
    pub fn to_hr(&self) -> Result<Self> {
        Ok(match self {
            Self::Ha { a, u } => Self::Hr { f: Profile::affine(*a, u[0] + u[1])?, g: Profile::affine(*a, u[0] - u[1])? },
            Self::Hs { a1, a2, b1, b2 } => {
                Self::Hr { f: Profile::affine(2.0 * a1, *b1)?, g: Profile::affine(2.0 * a2, *b2)? }
            }
            Self::Hr { .. } => self.clone(),
        })
    }

    /// `Ha` viewed as `Hs` (`a₁ = a₂ = a/2`).
    pub fn ha_to_hs(&self) -> Option<Self> {
        match self {
            Self::Ha { a, u } => Some(Self::Hs { a1: 0.5 * a, a2: 0.5 * a, b1: u[0] + u[1], b2: u[0] - u[1] }),
            _ => None,
        }
    }

    pub fn eval2(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        match self {
            Self::Hr { f, g } => {
                let (s, d) = (f.eval(x + y)?, g.eval(x - y)?);
                Ok([0.5 * (s + d), 0.5 * (s - d)])
            }
            _ => {
                if !(x.is_finite() && y.is_finite()) {
                    return Err(Error::OutOfDomain { x, lo: f64::NEG_INFINITY, hi: f64::INFINITY });
                }
                let (m, u) = self.affine_parts().expect("affine variant");
                Ok([m[0][0] * x + m[0][1] * y + u[0], m[1][0] * x + m[1][1] * y + u[1]])
            }
        }
    }

    pub fn jacobian(&self, x: f64, y: f64) -> Result<Mat2> {
        match self {
            Self::Hr { f, g } => {
                let (fs, gd) = (f.derivative(x + y)?, g.derivative(x - y)?);
                Ok([[0.5 * (fs + gd), 0.5 * (fs - gd)], [0.5 * (fs - gd), 0.5 * (fs + gd)]])
            }
            _ => Ok(self.affine_parts().expect("affine variant").0),
        }
    }

    pub fn det_jacobian(&self, x: f64, y: f64) -> Result<f64> {
        let j = self.jacobian(x, y)?;
        Ok(j[0][0] * j[1][1] - j[0][1] * j[1][0])
    }

    pub fn inverse(&self) -> Result<Self> {
        match self {
            Self::Ha { a, u } => Self::ha(1.0 / a, [-u[0] / a, -u[1] / a]),
            Self::Hs { a1, a2, .. } => {
                // A⁻¹ has eigenvalues 1/(2a₁), 1/(2a₂) on the same eigenvectors
                let (m, u) = self.affine_parts().expect("affine variant");
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                let v = [
                    -(m[1][1] * u[0] - m[0][1] * u[1]) / det,
                    -(-m[1][0] * u[0] + m[0][0] * u[1]) / det,
                ];
                Self::hs(0.25 / a1, 0.25 / a2, v[0] + v[1], v[0] - v[1])
            }
            Self::Hr { .. } => hr_inverse(self),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Diffeo2D) -> Result<Self> {
        match (self, inner) {
            (Self::Ha { a: a1, u: u1 }, Self::Ha { a: a2, u: u2 }) => {
                Self::ha(a1 * a2, [a1 * u2[0] + u1[0], a1 * u2[1] + u1[1]])
            }
            (Self::Hs { a1, a2, b1, b2 }, Self::Hs { a1: c1, a2: c2, b1: d1, b2: d2 }) => {
                // eigenvalues multiply; shifts follow f₁'∘f₂' and g₁'∘g₂'
                Self::hs(2.0 * a1 * c1, 2.0 * a2 * c2, 2.0 * a1 * d1 + b1, 2.0 * a2 * d2 + b2)
            }
            _ => hr_compose(self, inner),
        }
    }

    /// Convex potential whose gradient is the map, normalized to vanish at the origin.
    pub fn potential_value(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            Self::Hr { f, g } => Ok(0.5 * (f.antiderivative(x + y)? + g.antiderivative(x - y)?)),
            _ => {
                let (m, u) = self.affine_parts().expect("affine variant");
                let quad = m[0][0] * x * x + 2.0 * m[0][1] * x * y + m[1][1] * y * y;
                Ok(0.5 * quad + u[0] * x + u[1] * y)
            }
        }
    }
}

/// Inverse with profiles `(f')⁻¹` and `(g')⁻¹`.
pub fn hr_inverse(h: &Diffeo2D) -> Result<Diffeo2D> {
    match h.to_hr()? {
        Diffeo2D::Hr { f, g } => Ok(Diffeo2D::Hr { f: f.inverse()?, g: g.inverse()? }),
        _ => unreachable!("to_hr returns Hr"),
    }
}

/// `h₁ ∘ h₂` with profiles `f₁'∘f₂'` and `g₁'∘g₂'`.
pub fn hr_compose(h1: &Diffeo2D, h2: &Diffeo2D) -> Result<Diffeo2D> {
    match (h1.to_hr()?, h2.to_hr()?) {
        (Diffeo2D::Hr { f: f1, g: g1 }, Diffeo2D::Hr { f: f2, g: g2 }) => {
            Ok(Diffeo2D::Hr { f: f1.compose(&f2)?, g: g1.compose(&g2)? })
        }
        _ => unreachable!("to_hr returns Hr"),
    }
}

/// Largest `|∂v₁/∂y − ∂v₂/∂x|` over an `n × n` grid of the box, by central
/// differences. Points where the field is undefined are skipped.
pub fn max_curl(field: impl Fn(f64, f64) -> Option<[f64; 2]>, lo: [f64; 2], hi: [f64; 2], n: usize) -> f64 {
    let n = n.max(2);
    let scale = 1.0 + lo.iter().chain(&hi).fold(0.0f64, |m, v| m.max(v.abs()));
    let step = 1e-5 * scale;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64;
            let probes = (field(x, y + step), field(x, y - step), field(x + step, y), field(x - step, y));
            if let (Some(up), Some(down), Some(right), Some(left)) = probes {
                let curl = (up[0] - down[0]) / (2.0 * step) - (right[1] - left[1]) / (2.0 * step);
                worst = worst.max(curl.abs());
            }
        }
    }
    worst
}

pub const CURL_TOL: f64 = 1e-4;

pub fn is_curl_free(h: &Diffeo2D, lo: [f64; 2], hi: [f64; 2], n: usize) -> bool {
    max_curl(|x, y| h.eval2(x, y).ok(), lo, hi, n) < CURL_TOL
}

/// Whether `(A, u)` has the `Hs` form; `u` is unconstrained.
pub fn hs_membership(a: Mat2, _u: [f64; 2], tol: f64) -> bool {
    let symmetric = (a[0][1] - a[1][0]).abs() <= tol;
    let balanced = (a[0][0] - a[1][1]).abs() <= tol;
    let a1 = 0.5 * (a[0][0] + a[0][1]);
    let a2 = 0.5 * (a[0][0] - a[0][1]);
    symmetric && balanced && a1 > 0.0 && a2 > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn narrow() -> Diffeo2D {
        Diffeo2D::hr(Profile::quadratic(0.1, 1.0, -2.0, 3.0).unwrap(), Profile::identity()).unwrap()
    }

    fn caption() -> Diffeo2D {
        Diffeo2D::hr(Profile::quadratic(0.1, 1.0, -4.9, 10.0).unwrap(), Profile::identity()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let id = Diffeo2D::hr(Profile::identity(), Profile::identity()).unwrap();
        assert_eq!(id.eval2(0.3, -0.2).unwrap(), [0.3, -0.2]);
        let h = caption().eval2(1.0, 1.0).unwrap();
        assert!((h[0] - 1.2).abs() < 1e-14 && (h[1] - 1.2).abs() < 1e-14);
        assert_eq!(Diffeo2D::ha(2.0, [1.0, 0.0]).unwrap().eval2(1.0, 1.0).unwrap(), [3.0, 2.0]);
    }

    #[test]
    fn jacobian_examples() {
        let j = caption().jacobian(1.0, 1.0).unwrap();
        assert!((j[0][0] - 1.2).abs() < 1e-14 && (j[0][1] - 0.2).abs() < 1e-14);
        assert!((caption().det_jacobian(1.0, 1.0).unwrap() - 1.4).abs() < 1e-14);
        assert_eq!(Diffeo2D::ha(3.0, [0.0, 1.0]).unwrap().det_jacobian(5.0, 5.0).unwrap(), 9.0);
    }

    #[test]
    fn inverse_examples() {
        let inv = hr_inverse(&caption()).unwrap();
        let p = inv.eval2(1.2, 1.2).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        let ha = Diffeo2D::ha(2.0, [0.5, -1.0]).unwrap();
        let via_hr = hr_inverse(&ha).unwrap();
        let exact = ha.inverse().unwrap();
        for (x, y) in [(0.0, 0.0), (1.3, -0.7), (-2.0, 2.0)] {
            let (a, b) = (via_hr.eval2(x, y).unwrap(), exact.eval2(x, y).unwrap());
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
        let hs = Diffeo2D::hs(1.0, 0.5, 0.3, -0.2).unwrap();
        let round = hs.compose(&hs.inverse().unwrap()).unwrap();
        let q = round.eval2(0.7, -1.1).unwrap();
        assert!((q[0] - 0.7).abs() < 1e-12 && (q[1] + 1.1).abs() < 1e-12);
    }

    #[test]
    fn compose_examples() {
        let h = caption();
        assert_eq!(hr_compose(&h, &Diffeo2D::identity()).unwrap(), h);
        let a = Diffeo2D::ha(2.0, [1.0, 0.0]).unwrap();
        let b = Diffeo2D::ha(0.5, [0.0, 3.0]).unwrap();
        let via_hr = hr_compose(&a, &b).unwrap();
        let exact = a.compose(&b).unwrap();
        assert_eq!(exact, Diffeo2D::Ha { a: 1.0, u: [1.0, 6.0] });
        let p = via_hr.eval2(0.4, 0.9).unwrap();
        let q = exact.eval2(0.4, 0.9).unwrap();
        assert!((p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14);
        let two = hr_compose(&h, &narrow()).unwrap();
        let direct = narrow().eval2(0.5, 0.25).unwrap();
        let direct = h.eval2(direct[0], direct[1]).unwrap();
        let c = two.eval2(0.5, 0.25).unwrap();
        assert!((c[0] - direct[0]).abs() < 1e-12 && (c[1] - direct[1]).abs() < 1e-12);
    }

    #[test]
    fn hs_composition_matches_matrix_product() {
        let a = Diffeo2D::hs(1.0, 0.5, 0.3, -0.2).unwrap();
        let b = Diffeo2D::hs(0.7, 1.2, -0.1, 0.4).unwrap();
        let ab = a.compose(&b).unwrap();
        let generic = hr_compose(&a, &b).unwrap();
        for (x, y) in [(0.1, 0.2), (-1.0, 0.5)] {
            let inner = b.eval2(x, y).unwrap();
            let want = a.eval2(inner[0], inner[1]).unwrap();
            for got in [ab.eval2(x, y).unwrap(), generic.eval2(x, y).unwrap()] {
                assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn potential_gradient_matches_map() {
        let id = Diffeo2D::hr(Profile::identity(), Profile::identity()).unwrap();
        assert!((id.potential_value(0.6, -0.8).unwrap() - 0.5).abs() < 1e-14);
        let h = caption();
        assert_eq!(h.potential_value(0.0, 0.0).unwrap(), 0.0);
        let step = 1e-4;
        for (x, y) in [(0.3, 0.4), (-1.0, 1.5), (1.7, 0.2)] {
            let gx = (h.potential_value(x + step, y).unwrap() - h.potential_value(x - step, y).unwrap()) / (2.0 * step);
            let gy = (h.potential_value(x, y + step).unwrap() - h.potential_value(x, y - step).unwrap()) / (2.0 * step);
            let v = h.eval2(x, y).unwrap();
            assert!((gx - v[0]).abs() < 1e-5 && (gy - v[1]).abs() < 1e-5);
        }
        // potentials of inverse (root) and composite profiles
        for g in [hr_inverse(&h).unwrap(), hr_compose(&h, &narrow()).unwrap()] {
            let (x, y) = (0.5, 0.3);
            let gx = (g.potential_value(x + step, y).unwrap() - g.potential_value(x - step, y).unwrap()) / (2.0 * step);
            assert!((gx - g.eval2(x, y).unwrap()[0]).abs() < 1e-5);
        }
    }

    #[test]
    fn curl_checks() {
        assert!(is_curl_free(&caption(), [-2.0, -2.0], [2.0, 2.0], 128));
        assert!(is_curl_free(&Diffeo2D::ha(1.5, [0.2, 0.1]).unwrap(), [-2.0, -2.0], [2.0, 2.0], 16));
        let rotation = max_curl(|x, y| Some([-y, x]), [-1.0, -1.0], [1.0, 1.0], 8);
        assert!((rotation - 2.0).abs() < 1e-6);
    }

    #[test]
    fn hs_membership_examples() {
        assert!(hs_membership([[2.0, 0.0], [0.0, 2.0]], [5.0, 1.0], 1e-12));
        assert!(hs_membership([[3.0, 1.0], [1.0, 3.0]], [0.0, 0.0], 1e-12));
        assert!(!hs_membership([[2.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 1e-12));
    }

    #[test]
    fn quadratic_rejects_vertex() {
        assert!(Profile::quadratic(0.1, 1.0, -6.0, 1.0).is_err());
        assert!(Profile::quadratic(0.0, 1.0, -6.0, 1.0).is_ok());
    }

    #[test]
    fn embeddings_preserve_values() {
        let ha = Diffeo2D::ha(1.7, [0.3, -0.4]).unwrap();
        let hs = ha.ha_to_hs().unwrap();
        let hr = hs.to_hr().unwrap();
        for (x, y) in [(0.1, 0.9), (-1.5, 0.4)] {
            let (a, b, c) = (ha.eval2(x, y).unwrap(), hs.eval2(x, y).unwrap(), hr.eval2(x, y).unwrap());
            for k in 0..2 {
                assert!((a[k] - b[k]).abs() < 1e-12 && (a[k] - c[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let h = hr_compose(&caption(), &Diffeo2D::ha(0.5, [0.1, 0.0]).unwrap()).unwrap();
        let text = serde_json::to_string(&h).unwrap();
        let back: Diffeo2D = serde_json::from_str(&text).unwrap();
        assert_eq!(back, h);
    }
}
