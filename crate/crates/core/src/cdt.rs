//! The cumulative distribution transform and its inverse.

use crate::diffeo1d::Diffeo1D;
use crate::error::{Error, Result};
use crate::signal::{cdf, normalize, quantile, support_indices, Grid1D, Signal1D};

/// Nondecreasing map sampled on the reference support.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap1D {
    grid: Grid1D,
    values: Vec<f64>,
}

/// Largest downward step tolerated between neighbouring map samples.
pub const MONOTONE_SLACK: f64 = 1e-10;

impl TransportMap1D {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0] - MONOTONE_SLACK) {
            return Err(Error::Precondition(format!("map decreases after node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; `None` off the reference support.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (k, t) = self.grid.locate(x)?;
        Some(self.values[k] * (1.0 - t) + self.values[k + 1] * t)
    }

    /// Sup-norm distance to another map on the same grid.
    pub fn sup_distance(&self, other: &TransportMap1D) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::DomainMismatch("maps live on different reference grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Sup-norm distance to a function evaluated at the grid nodes.
    pub fn sup_distance_to(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid.nodes().zip(&self.values).map(|(x, v)| (v - f(x)).abs()).fold(0.0, f64::max)
    }

    /// Pointwise convex combination `α·self + (1−α)·other`.
    pub fn combine(&self, other: &TransportMap1D, alpha: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DomainMismatch("maps live on different reference grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        Self::new(self.grid, values)
    }
}

/// Node range of the reference support, rejecting interior zeros.
fn reference_support(r: &Signal1D) -> Result<(usize, usize)> {
    let (first, last) = support_indices(r.values(), 0.0).ok_or(Error::BadReference)?;
    if first == last || r.values()[first..=last].iter().any(|&v| v <= 0.0) {
        return Err(Error::BadReference);
    }
    Ok((first, last))
}

/// Reference sub-grid on which every transform against `r` is sampled.
pub fn reference_grid(r: &Signal1D) -> Result<Grid1D> {
    let (first, last) = reference_support(r)?;
    r.grid().slice(first, last)
}

/// `p̂(x) = F_p⁻¹(F_r(x))` at each node of the reference support.
pub fn cdt_forward(p: &Signal1D, r: &Signal1D) -> Result<TransportMap1D> {
    let (first, last) = reference_support(r)?;
    let fr = cdf(r);
    let fp = cdf(p);
    let values = fr.values()[first..=last]
        .iter()
        .map(|&u| quantile(&fp, u.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    TransportMap1D::new(r.grid().slice(first, last)?, values)
}

/// Pushes `r` forward through `t` by depositing reference mass at `T(x)` with
/// linear binning on `out`, then normalizes.
pub fn cdt_inverse(t: &TransportMap1D, r: &Signal1D, out: Grid1D) -> Result<Signal1D> {
    let vals = t.values();
    if vals[vals.len() - 1] - vals[0] <= 0.0 {
        return Err(Error::DegenerateMap);
    }
    let grid = t.grid();
    let dx = grid.dx();
    let half_bin = 0.5 * out.dx();
    let mut mass = vec![0.0; out.len()];
    for k in 0..grid.len() - 1 {
        let (x0, x1) = (grid.node(k), grid.node(k + 1));
        let (t0, t1) = (vals[k], vals[k + 1]);
        let (r0, r1) = (r.eval(x0), r.eval(x1));
        let pieces = (((t1 - t0).abs() / half_bin).ceil() as usize).max(1);
        let step = dx / pieces as f64;
        for j in 0..pieces {
            let (s0, s1) = (j as f64 / pieces as f64, (j + 1) as f64 / pieces as f64);
            let m = (r0 + 0.5 * (s0 + s1) * (r1 - r0)) * step;
            deposit(&out, &mut mass, t0 + s0 * (t1 - t0), t0 + s1 * (t1 - t0), m);
        }
    }
    let density: Vec<f64> = mass.iter().enumerate().map(|(i, m)| m / out.weight(i)).collect();
    normalize(&density, out).map_err(|e| match e {
        Error::AllZero => Error::DegenerateMap,
        other => other,
    })
}

/// Spreads mass `m`, uniform on `[a, b]`, onto the hat functions of `out`.
fn deposit(out: &Grid1D, mass: &mut [f64], a: f64, b: f64, m: f64) {
    let h = out.dx();
    if b - a <= 1e-14 * h {
        if let Some((cell, frac)) = out.locate(a) {
            mass[cell] += m * (1.0 - frac);
            mass[cell + 1] += m * frac;
        }
        return;
    }
    let density = m / (b - a);
    let (lo, hi) = (a.max(out.xmin()), b.min(out.xmax()));
    if lo >= hi {
        return;
    }
    let first = out.locate(lo).map_or(0, |(c, _)| c);
    let last = out.locate(hi).map_or(out.len() - 2, |(c, _)| c);
    for cell in first..=last {
        let c0 = out.node(cell);
        let sa = ((lo - c0) / h).clamp(0.0, 1.0);
        let sb = ((hi - c0) / h).clamp(0.0, 1.0);
        if sb <= sa {
            continue;
        }
        // ∫ (1 − s) and ∫ s over [sa, sb], in units of h
        let right = 0.5 * (sb * sb - sa * sa);
        let left = (sb - sa) - right;
        mass[cell] += density * h * left;
        mass[cell + 1] += density * h * right;
    }
}

/// Sampled pushforward `p_h(x) = h'(x)·p(h(x))` on the grid of `p`.
pub fn apply_diffeo_1d(p: &Signal1D, h: &Diffeo1D) -> Result<Signal1D> {
    let grid = *p.grid();
    let (first, last) = support_indices(p.values(), 0.0).ok_or(Error::EmptySupport)?;
    let (s0, s1) = (grid.node(first), grid.node(last));
    if let Some((a, b)) = h.domain() {
        let slack = grid.dx();
        let (ha, hb) = (h.eval(a)?, h.eval(b)?);
        if ha > s0 + slack || hb < s1 - slack {
            return Err(Error::DomainMismatch(format!(
                "h maps its interval [{a}, {b}] onto [{ha}, {hb}], which misses supp p = [{s0}, {s1}]"
            )));
        }
    }
    let raw: Vec<f64> = grid
        .nodes()
        .map(|x| match (h.eval(x), h.derivative(x)) {
            (Ok(y), Ok(d)) => d * p.eval(y),
            _ => 0.0,
        })
        .collect();
    let kept = grid.integrate(&raw);
    if kept < 0.95 {
        return Err(Error::DomainMismatch(format!("pushforward keeps only {kept:.4} of the mass on the grid")));
    }
    normalize(&raw, grid)
}

/// Shifts `p` right by `mu`.
pub fn translate(p: &Signal1D, mu: f64) -> Result<Signal1D> {
    apply_diffeo_1d(p, &Diffeo1D::translation(mu))
}

/// `h⁻¹ ∘ T`, the transform of `p_h` predicted from the transform of `p`.
pub fn composition_push(h: &Diffeo1D, t: &TransportMap1D) -> Result<TransportMap1D> {
    let inv = h.inverse()?;
    let values = t
        .values()
        .iter()
        .map(|&y| {
            inv.eval(y).map_err(|_| Error::DomainMismatch(format!("map value {y} outside the domain of h⁻¹")))
        })
        .collect::<Result<Vec<_>>>()?;
    TransportMap1D::new(*t.grid(), values)
}

/// `W₂` between `p` and `q` through the embedding `‖(p̂ − q̂)√r‖`.
pub fn w2_distance(p: &Signal1D, q: &Signal1D, r: &Signal1D) -> Result<f64> {
    let ph = cdt_forward(p, r)?;
    let qh = cdt_forward(q, r)?;
    Ok(embedding_distance(&ph, &qh, r)?.sqrt())
}

/// `∫ (a − b)² r` over the reference support.
pub fn embedding_distance(a: &TransportMap1D, b: &TransportMap1D, r: &Signal1D) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::DomainMismatch("maps live on different reference grids".into()));
    }
    let grid = a.grid();
    let integrand: Vec<f64> = grid
        .nodes()
        .zip(a.values().iter().zip(b.values()))
        .map(|(x, (u, v))| (u - v).powi(2) * r.eval(x))
        .collect();
    Ok(grid.integrate(&integrand))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid1D {
        Grid1D::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn forward_analytic_cases() {
        let r = Signal1D::uniform(unit(1025));
        let dx = r.grid().dx();
        let id = cdt_forward(&r, &r).unwrap();
        assert!(id.sup_distance_to(|x| x) < 1e-12);

        let wide = Grid1D::new(-0.5, 2.0, 2561).unwrap();
        let shifted = Signal1D::boxes(wide, &[(0.25, 1.25, 1.0)]).unwrap();
        let t = cdt_forward(&shifted, &r).unwrap();
        assert!(t.sup_distance_to(|x| x + 0.25) < 2.0 * dx);

        let half = Signal1D::boxes(unit(1025), &[(0.0, 0.5, 2.0)]).unwrap();
        let t = cdt_forward(&half, &r).unwrap();
        assert!(t.sup_distance_to(|x| x / 2.0) < 2.0 * dx);
    }

    #[test]
    fn reference_with_gap_is_rejected() {
        let r = Signal1D::boxes(unit(101), &[(0.0, 0.3, 1.0), (0.6, 1.0, 1.0)]).unwrap();
        let p = Signal1D::uniform(unit(101));
        assert_eq!(cdt_forward(&p, &r), Err(Error::BadReference));
    }

    #[test]
    fn inverse_analytic_cases() {
        let g = unit(1024);
        let r = Signal1D::uniform(g);
        let id = TransportMap1D::from_fn(g, |x| x).unwrap();
        assert!(cdt_inverse(&id, &r, g).unwrap().l1_distance(&r).unwrap() < 1e-3);

        let half = TransportMap1D::from_fn(g, |x| x / 2.0).unwrap();
        let want = Signal1D::boxes(g, &[(0.0, 0.5, 2.0)]).unwrap();
        assert!(cdt_inverse(&half, &r, g).unwrap().l1_distance(&want).unwrap() < 1e-2);

        let wide = Grid1D::new(-0.5, 2.0, 2500).unwrap();
        let shift = TransportMap1D::from_fn(g, |x| x + 0.25).unwrap();
        let want = Signal1D::boxes(wide, &[(0.25, 1.25, 1.0)]).unwrap();
        assert!(cdt_inverse(&shift, &r, wide).unwrap().l1_distance(&want).unwrap() < 1e-2);

        let flat = TransportMap1D::from_fn(g, |_| 0.3).unwrap();
        assert_eq!(cdt_inverse(&flat, &r, g), Err(Error::DegenerateMap));
    }

    #[test]
    fn inverse_agrees_with_division_formula() {
        // T(x) = x², so p(y) = r(√y)/(2√y) = 1/(2√y) on (0, 1]
        let g = unit(2048);
        let r = Signal1D::uniform(g);
        let t = TransportMap1D::from_fn(g, |x| x * x).unwrap();
        let p = cdt_inverse(&t, &r, g).unwrap();
        for y in [0.2, 0.5, 0.8] {
            let want = 0.5 / f64::sqrt(y);
            assert!((p.eval(y) - want).abs() < 1e-2 * want, "{y}: {} vs {want}", p.eval(y));
        }
    }

    #[test]
    fn pushforward_cases() {
        let g = unit(1001);
        let p = Signal1D::boxes(g, &[(0.2, 0.5, 1.0)]).unwrap();
        assert_eq!(apply_diffeo_1d(&p, &Diffeo1D::identity()).unwrap(), p);
        let moved = translate(&p, 0.25).unwrap();
        let want = Signal1D::boxes(g, &[(0.45, 0.75, 1.0)]).unwrap();
        assert!(moved.l1_distance(&want).unwrap() < 1e-2);
        let squeezed = apply_diffeo_1d(&p, &Diffeo1D::affine(2.0, 0.0).unwrap()).unwrap();
        let want = Signal1D::boxes(g, &[(0.1, 0.25, 1.0)]).unwrap();
        assert!(squeezed.l1_distance(&want).unwrap() < 2e-2);
        let short = Diffeo1D::polynomial(vec![0.3, 1.0], 0.0, 1.0).unwrap();
        assert!(matches!(apply_diffeo_1d(&p, &short), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn composition_push_cases() {
        let g = unit(101);
        let t = TransportMap1D::from_fn(g, |x| x).unwrap();
        let moved = composition_push(&Diffeo1D::translation(0.3), &t).unwrap();
        assert!(moved.sup_distance_to(|x| x + 0.3) < 1e-14);
        let halved = composition_push(&Diffeo1D::affine(2.0, 0.0).unwrap(), &t).unwrap();
        assert!(halved.sup_distance_to(|x| x / 2.0) < 1e-14);
    }

    #[test]
    fn w2_of_translates_is_the_shift() {
        let r = Signal1D::uniform(unit(1001));
        let wide = Grid1D::new(0.0, 1.5, 1501).unwrap();
        let p = Signal1D::boxes(wide, &[(0.0, 1.0, 1.0)]).unwrap();
        let q = Signal1D::boxes(wide, &[(0.4, 1.4, 1.0)]).unwrap();
        assert!((w2_distance(&p, &q, &r).unwrap() - 0.4).abs() < 2e-3);
        assert_eq!(w2_distance(&p, &p, &r).unwrap(), 0.0);
    }
}
