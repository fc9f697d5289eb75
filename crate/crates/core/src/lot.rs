//! Linear optimal transport on the class reachable from the reference through
//! `Hr`, where the transport map is the generating diffeomorphism itself.

use crate::diffeo2d::{Diffeo2D, Mat2};
use crate::error::{Error, Result};
use crate::image::{Grid2D, Image2D};
use crate::oracle::{kantorovich_lp_2d, MAX_LP_POINTS};

/// Largest tolerated finite-difference curl of a map claimed to be a gradient.
pub const BRENIER_CURL_TOL: f64 = 1e-3;
/// Pushforward residual allowed for a certified member.
pub const RESIDUAL_TOL: f64 = 5e-2;

/// A planar map sampled on a grid; cells without a value are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap2D {
    grid: Grid2D,
    values: Vec<Option<[f64; 2]>>,
    brenier: bool,
}

impl TransportMap2D {
    pub fn new(grid: Grid2D, values: Vec<Option<[f64; 2]>>, brenier: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| v.is_some_and(|p| !(p[0].is_finite() && p[1].is_finite()))) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values, brenier })
    }

    pub fn from_fn(grid: Grid2D, brenier: bool, f: impl Fn([f64; 2]) -> Option<[f64; 2]>) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect(), brenier)
    }

    /// Samples `h` on `grid`, failing if any node leaves its domain.
    pub fn sample(grid: Grid2D, h: &Diffeo2D) -> Result<Self> {
        let values = grid
            .points()
            .map(|[x, y]| h.eval2(x, y).map(Some))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values, true)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[Option<[f64; 2]>] {
        &self.values
    }

    /// Whether the map is claimed to be the gradient of a convex function.
    pub fn is_brenier(&self) -> bool {
        self.brenier
    }

    /// Weighted mean of `|T₁ − T₂|` over cells where both maps are defined.
    pub fn mean_distance(&self, other: &TransportMap2D, weights: &[f64]) -> Result<f64> {
        if self.grid != other.grid || weights.len() != self.grid.len() {
            return Err(Error::DomainMismatch("maps and weights must share one grid".into()));
        }
        let (mut total, mut mass) = (0.0, 0.0);
        for ((a, b), &w) in self.values.iter().zip(&other.values).zip(weights) {
            if let (Some(a), Some(b), true) = (a, b, w > 0.0) {
                total += w * (a[0] - b[0]).hypot(a[1] - b[1]);
                mass += w;
            }
        }
        if mass == 0.0 {
            return Err(Error::EmptySupport);
        }
        Ok(total / mass)
    }

    /// Largest `|T₁ − T₂|` over cells where both maps are defined.
    pub fn sup_distance(&self, other: &TransportMap2D) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::DomainMismatch("maps live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| Some((a.as_ref()?, b.as_ref()?)))
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max))
    }

    /// Applies `f` to every defined value.
    pub fn map_values(&self, brenier: bool, f: impl Fn([f64; 2]) -> Result<[f64; 2]>) -> Result<Self> {
        let values = self.values.iter().map(|v| v.map(&f).transpose()).collect::<Result<Vec<_>>>()?;
        Self::new(self.grid, values, brenier)
    }

    /// Pointwise `α·self + (1−α)·other`.
    pub fn combine(&self, other: &TransportMap2D, alpha: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DomainMismatch("maps live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some([alpha * a[0] + (1.0 - alpha) * b[0], alpha * a[1] + (1.0 - alpha) * b[1]]),
                _ => None,
            })
            .collect();
        Self::new(self.grid, values, self.brenier && other.brenier)
    }

    /// Largest central-difference curl over interior nodes with defined neighbours.
    pub fn max_curl(&self) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (dx, dy) = (self.grid.x_axis().dx(), self.grid.y_axis().dx());
        let at = |i: usize, j: usize| self.values[self.grid.index(i, j)];
        let mut worst: f64 = 0.0;
        for i in 1..nx.saturating_sub(1) {
            for j in 1..ny.saturating_sub(1) {
                if let (Some(up), Some(down), Some(right), Some(left)) =
                    (at(i, j + 1), at(i, j - 1), at(i + 1, j), at(i - 1, j))
                {
                    let curl = (up[0] - down[0]) / (2.0 * dy) - (right[1] - left[1]) / (2.0 * dx);
                    worst = worst.max(curl.abs());
                }
            }
        }
        worst
    }
}

/// Resamples `p ∘ h` weighted by `|det J_h|` onto `out`, renormalized.
pub fn apply_diffeo_2d_on(p: &Image2D, h: &Diffeo2D, out: Grid2D) -> Result<Image2D> {
    let mut defined = false;
    let raw: Vec<f64> = out
        .points()
        .map(|[x, y]| match (h.eval2(x, y), h.det_jacobian(x, y)) {
            (Ok(v), Ok(det)) => {
                defined = true;
                det.abs() * p.eval(v)
            }
            _ => 0.0,
        })
        .collect();
    if !defined {
        return Err(Error::DomainMismatch("h is undefined on the whole output grid".into()));
    }
    let kept = out.integrate(&raw);
    if kept < 0.95 {
        return Err(Error::MassLoss(kept));
    }
    Image2D::normalize(out, raw)
}

/// `p_h = |det J_h|·(p ∘ h)` on the grid of `p`.
pub fn apply_diffeo_2d(p: &Image2D, h: &Diffeo2D) -> Result<Image2D> {
    apply_diffeo_2d_on(p, h, *p.grid())
}

/// A density reachable from the reference, with the map that reaches it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrMember {
    pub density: Image2D,
    pub certificate: Diffeo2D,
    pub reference: Image2D,
}

impl PrMember {
    /// `‖|det J_h|·(p∘h) − r‖₁` on the reference grid.
    pub fn residual(&self) -> Result<f64> {
        let grid = *self.reference.grid();
        let diff = grid
            .points()
            .zip(self.reference.values())
            .map(|([x, y], r)| {
                let v = self.certificate.eval2(x, y)?;
                Ok((self.certificate.det_jacobian(x, y)?.abs() * self.density.eval(v) - r).abs())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(grid.integrate(&diff))
    }
}

/// Bounding box of `h` applied to the boundary of the box `[lo, hi]`.
pub fn image_box(h: &Diffeo2D, lo: [f64; 2], hi: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
    let mut out_lo = [f64::INFINITY; 2];
    let mut out_hi = [f64::NEG_INFINITY; 2];
    let steps = 256;
    for k in 0..=steps {
        let s = k as f64 / steps as f64;
        let x = lo[0] + s * (hi[0] - lo[0]);
        let y = lo[1] + s * (hi[1] - lo[1]);
        for p in [[x, lo[1]], [x, hi[1]], [lo[0], y], [hi[0], y]] {
            let v = h.eval2(p[0], p[1])?;
            for d in 0..2 {
                out_lo[d] = out_lo[d].min(v[d]);
                out_hi[d] = out_hi[d].max(v[d]);
            }
        }
    }
    Ok((out_lo, out_hi))
}

/// Grid with the resolution of `r` covering `h` applied to the support of `r`, padded by 5%.
pub fn default_member_grid(r: &Image2D, h: &Diffeo2D) -> Result<Grid2D> {
    if *h == Diffeo2D::identity() {
        return Ok(*r.grid());
    }
    let (lo, hi) = r.support_box(0.0)?;
    let (lo, hi) = image_box(h, lo, hi)?;
    let pad = [0.05 * (hi[0] - lo[0]), 0.05 * (hi[1] - lo[1])];
    Grid2D::with_box([lo[0] - pad[0], lo[1] - pad[1]], [hi[0] + pad[0], hi[1] + pad[1]], r.grid().nx(), r.grid().ny())
}

/// Density on `out` of the pushforward of `r` through a map given by its
/// inverse: `inverse(y)` returns `(h⁻¹(y), |det J_{h⁻¹}(y)|)`.
pub fn pushforward_by_inverse(
    r: &Image2D,
    out: Grid2D,
    inverse: impl Fn([f64; 2]) -> Option<([f64; 2], f64)>,
) -> Result<Image2D> {
    let raw: Vec<f64> = out
        .points()
        .map(|y| match inverse(y) {
            Some((x, det)) => r.eval(x) * det,
            None => 0.0,
        })
        .collect();
    let kept = out.integrate(&raw);
    if kept < 0.95 {
        return Err(Error::MassLoss(kept));
    }
    Image2D::normalize(out, raw)
}

/// The member `h#r` sampled on `out`.
pub fn generate_pr_member_on(r: &Image2D, h: &Diffeo2D, out: Grid2D) -> Result<PrMember> {
    let inv = h.inverse().map_err(|e| Error::NotInvertible(e.to_string()))?;
    let density = pushforward_by_inverse(r, out, |[x, y]| {
        let p = inv.eval2(x, y).ok()?;
        Some((p, inv.det_jacobian(x, y).ok()?.abs()))
    })?;
    let member = PrMember { density, certificate: h.clone(), reference: r.clone() };
    let residual = member.residual()?;
    if residual > RESIDUAL_TOL {
        return Err(Error::Precondition(format!("pushforward residual {residual} exceeds {RESIDUAL_TOL}")));
    }
    Ok(member)
}

/// The member `h#r` on a grid covering `h(supp r)`.
pub fn generate_pr_member(r: &Image2D, h: &Diffeo2D) -> Result<PrMember> {
    generate_pr_member_on(r, h, default_member_grid(r, h)?)
}

/// Transform of a member: its certificate sampled on the reference grid.
pub fn lot_forward_pr(m: &PrMember) -> Result<TransportMap2D> {
    TransportMap2D::sample(*m.reference.grid(), &m.certificate)
}

/// Transform of `p_g` for a member `p`, namely `g⁻¹ ∘ h`.
pub fn lot_compose_pr(m: &PrMember, g: &Diffeo2D) -> Result<TransportMap2D> {
    let ginv = g.inverse()?;
    let composed = ginv.compose(&m.certificate).map_err(|e| Error::DomainMismatch(e.to_string()))?;
    TransportMap2D::sample(*m.reference.grid(), &composed)
        .map_err(|e| Error::DomainMismatch(format!("g⁻¹ undefined on the member's transform: {e}")))
}

/// Mass-conservative restriction of `p` to a coarser grid: each node of `p`
/// hands its mass to the surrounding nodes of `coarse` by bilinear weights.
pub fn restrict(p: &Image2D, coarse: Grid2D) -> Result<Image2D> {
    let fine = p.grid();
    let mut mass = vec![0.0; coarse.len()];
    for (k, &v) in p.values().iter().enumerate() {
        let m = v * fine.weight(k);
        if m == 0.0 {
            continue;
        }
        let [x, y] = fine.point(k);
        let (Some((i, s)), Some((j, t))) = (coarse.x_axis().locate(x), coarse.y_axis().locate(y)) else {
            continue;
        };
        mass[coarse.index(i, j)] += m * (1.0 - s) * (1.0 - t);
        mass[coarse.index(i, j + 1)] += m * (1.0 - s) * t;
        mass[coarse.index(i + 1, j)] += m * s * (1.0 - t);
        mass[coarse.index(i + 1, j + 1)] += m * s * t;
    }
    let raw = mass.iter().enumerate().map(|(k, m)| m / coarse.weight(k)).collect();
    Image2D::normalize(coarse, raw)
}

/// Grid sizes for the composition-violation demo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    /// Nodes per axis of every grid handed to the oracle.
    pub n: usize,
    /// Nodes per axis used to sample targets before restriction.
    pub fine: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self { n: 12, fine: 96 }
    }
}

/// Outcome of comparing `p̂_h` with `h⁻¹ ∘ p̂` through the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    /// Mass-weighted mean gap between the two paths for the tested map.
    pub gap: f64,
    /// The same gap for the isotropic control `x ↦ 2x`.
    pub control_gap: f64,
    /// Gap floor standing in for a vanishing control (a twentieth of a cell).
    pub noise_floor: f64,
    pub cell: f64,
    pub ratio: f64,
    pub violated: bool,
}

fn is_spd(m: &Mat2, tol: f64) -> bool {
    (m[0][1] - m[1][0]).abs() <= tol && m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0
}

fn mat_inverse(m: &Mat2) -> Mat2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn apply(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Two-path gap `mean |T_{L#p} − A⁻¹·T_p|` for `p = M#r`, where both
/// transforms come from the Kantorovich oracle and `L = A⁻¹`.
fn two_path_gap(a: &Mat2, m: &Mat2, config: DemoConfig) -> Result<(f64, f64)> {
    let n = config.n;
    let r = Image2D::uniform_box(Grid2D::square(-0.5, 0.5, n)?, [-0.5, -0.5], [0.5, 0.5])?;
    let target = |lin: Mat2| -> Result<Image2D> {
        let inv = mat_inverse(&lin);
        let det = (inv[0][0] * inv[1][1] - inv[0][1] * inv[1][0]).abs();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in [[-0.5, -0.5], [-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]] {
            let v = apply(&lin, c);
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let fine = Grid2D::with_box(lo, hi, config.fine, config.fine)?;
        let dense = pushforward_by_inverse(&r, fine, |y| Some((apply(&inv, y), det)))?;
        restrict(&dense, Grid2D::with_box(lo, hi, n, n)?)
    };
    let ainv = mat_inverse(a);
    let direct_lin = [
        [ainv[0][0] * m[0][0] + ainv[0][1] * m[1][0], ainv[0][0] * m[0][1] + ainv[0][1] * m[1][1]],
        [ainv[1][0] * m[0][0] + ainv[1][1] * m[1][0], ainv[1][0] * m[0][1] + ainv[1][1] * m[1][1]],
    ];
    let p = target(*m)?;
    let ph = target(direct_lin)?;
    let t_p = kantorovich_lp_2d(&r, &p, MAX_LP_POINTS)?.barycentric_map()?;
    let t_ph = kantorovich_lp_2d(&r, &ph, MAX_LP_POINTS)?.barycentric_map()?;
    let pushed = t_p.map_values(false, |v| Ok(apply(&ainv, v)))?;
    let weights: Vec<f64> = (0..r.grid().len()).map(|k| r.values()[k] * r.grid().weight(k)).collect();
    let cell = r.grid().cell().max(p.grid().cell()).max(ph.grid().cell());
    Ok((t_ph.mean_distance(&pushed, &weights)?, cell))
}

/// Shows that `p̂_h = h⁻¹ ∘ p̂` fails for the linear map `h(x) = A·x` when `A`
/// is symmetric positive definite but not a multiple of the identity, using
/// `p = M#r` for the uniform reference on `[−0.5, 0.5]²`.
pub fn composition_violation_demo(a: Mat2, m: Mat2, config: DemoConfig) -> Result<ViolationReport> {
    let tol = 1e-12;
    if !is_spd(&a, tol) {
        return Err(Error::Precondition("A must be symmetric positive definite (a gradient map)".into()));
    }
    if a[0][1].abs() <= tol && (a[0][0] - a[1][1]).abs() <= tol {
        return Err(Error::Precondition("A is a multiple of the identity".into()));
    }
    if !is_spd(&m, tol) {
        return Err(Error::Precondition("M must be symmetric positive definite".into()));
    }
    if m[0][1].abs() <= tol {
        // diagonal M has coordinate eigenvectors or a repeated eigenvalue
        return Err(Error::Precondition("M needs distinct eigenvalues and eigenvectors with nonzero entries".into()));
    }
    if config.n * config.n > MAX_LP_POINTS {
        return Err(Error::TooLarge { points: config.n * config.n, cap: MAX_LP_POINTS });
    }
    let (gap, cell) = two_path_gap(&a, &m, config)?;
    let (control_gap, _) = two_path_gap(&[[2.0, 0.0], [0.0, 2.0]], &m, config)?;
    let noise_floor = 0.05 * cell;
    let ratio = gap / control_gap.max(noise_floor);
    Ok(ViolationReport { gap, control_gap, noise_floor, cell, ratio, violated: ratio > 5.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo2d::Profile;

    fn reference(n: usize) -> Image2D {
        Image2D::uniform_box(Grid2D::square(-0.5, 0.5, n).unwrap(), [-0.5, -0.5], [0.5, 0.5]).unwrap()
    }

    fn caption() -> Diffeo2D {
        Diffeo2D::hr(Profile::quadratic(0.1, 1.0, -4.9, 10.0).unwrap(), Profile::identity()).unwrap()
    }

    #[test]
    fn pushforward_cases() {
        let g = Grid2D::square(-1.0, 1.0, 81).unwrap();
        let p = Image2D::uniform_box(g, [-0.5, -0.5], [0.5, 0.5]).unwrap();
        let same = apply_diffeo_2d(&p, &Diffeo2D::identity()).unwrap();
        assert!(same.values().iter().zip(p.values()).all(|(a, b)| (a - b).abs() < 1e-12));
        let shifted = apply_diffeo_2d(&p, &Diffeo2D::ha(1.0, [-0.25, 0.0]).unwrap()).unwrap();
        let want = Image2D::uniform_box(g, [-0.25, -0.5], [0.75, 0.5]).unwrap();
        let l1: f64 = g.integrate(&shifted.values().iter().zip(want.values()).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>());
        assert!(l1 < 5e-2, "{l1}");
        let shrunk = apply_diffeo_2d(&p, &Diffeo2D::ha(2.0, [0.0, 0.0]).unwrap()).unwrap();
        assert!((shrunk.mass() - 1.0).abs() < 1e-2);
        let (lo, hi) = shrunk.support_box(1e-12).unwrap();
        assert!(hi[0] - lo[0] < 0.55);
        assert!(matches!(apply_diffeo_2d(&p, &Diffeo2D::ha(0.2, [0.0, 0.0]).unwrap()), Err(Error::MassLoss(_))));
    }

    #[test]
    fn members_satisfy_their_certificates() {
        let r = reference(64);
        let id = generate_pr_member(&r, &Diffeo2D::identity()).unwrap();
        assert_eq!(id.density, r);
        assert!(id.residual().unwrap() < 1e-12);
        let moved = generate_pr_member(&r, &Diffeo2D::ha(1.0, [0.3, -0.1]).unwrap()).unwrap();
        let (lo, _) = moved.density.support_box(1e-9).unwrap();
        assert!((lo[0] + 0.2).abs() < 0.05 && (lo[1] + 0.6).abs() < 0.05);
        let m = generate_pr_member(&r, &caption()).unwrap();
        assert!(m.residual().unwrap() <= RESIDUAL_TOL);
        assert!((m.density.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn forward_and_compose() {
        let r = reference(64);
        let id = generate_pr_member(&r, &Diffeo2D::identity()).unwrap();
        let t = lot_forward_pr(&id).unwrap();
        assert!(t.values().iter().zip(r.grid().points()).all(|(v, p)| v.unwrap() == p));
        assert_eq!(lot_compose_pr(&id, &Diffeo2D::identity()).unwrap(), t);
        let g = Diffeo2D::ha(2.0, [0.4, -0.2]).unwrap();
        let c = lot_compose_pr(&id, &g).unwrap();
        for (v, [x, y]) in c.values().iter().zip(r.grid().points()) {
            let v = v.unwrap();
            assert!((v[0] - (x - 0.4) / 2.0).abs() < 1e-14 && (v[1] - (y + 0.2) / 2.0).abs() < 1e-14);
        }
        assert!(lot_forward_pr(&generate_pr_member(&r, &caption()).unwrap()).unwrap().max_curl() < BRENIER_CURL_TOL);
    }

    #[test]
    fn restriction_keeps_mass_and_mean() {
        let fine = Grid2D::square(-1.0, 1.0, 97).unwrap();
        let p = Image2D::from_fn(fine, |x, y| (-(x - 0.2).powi(2) * 8.0 - (y + 0.1).powi(2) * 8.0).exp()).unwrap();
        let q = restrict(&p, Grid2D::square(-1.0, 1.0, 12).unwrap()).unwrap();
        let mean = |img: &Image2D| {
            let g = img.grid();
            (0..g.len()).map(|k| img.values()[k] * g.weight(k) * g.point(k)[0]).sum::<f64>()
        };
        assert!((mean(&p) - mean(&q)).abs() < 1e-12);
    }

    #[test]
    fn demo_preconditions() {
        let m = [[2.0, 1.0], [1.0, 2.0]];
        let shear = [[1.0, 1.0], [0.0, 1.0]];
        let cfg = DemoConfig::default();
        assert!(matches!(composition_violation_demo(shear, m, cfg), Err(Error::Precondition(_))));
        assert!(matches!(composition_violation_demo([[2.0, 0.0], [0.0, 2.0]], m, cfg), Err(Error::Precondition(_))));
        assert!(matches!(composition_violation_demo([[2.0, 0.0], [0.0, 1.0]], [[2.0, 0.0], [0.0, 1.0]], cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn diagonal_scaling_breaks_composition() {
        let rep = composition_violation_demo([[2.0, 0.0], [0.0, 1.0]], [[2.0, 1.0], [1.0, 2.0]], DemoConfig::default()).unwrap();
        assert!(rep.control_gap < 1e-9, "{rep:?}");
        assert!(rep.violated && rep.gap > 5.0 * rep.control_gap, "{rep:?}");
    }
}
