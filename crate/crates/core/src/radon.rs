//! Radon projections of images and the per-angle CDT built on them.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cdt::{cdt_forward, TransportMap1D};
use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::signal::{normalize, Grid1D, Signal1D};

pub const DEFAULT_ANGLES: usize = 32;

/// `k` angles spread uniformly over `[0, π)`.
pub fn uniform_angles(k: usize) -> Vec<f64> {
    (0..k).map(|i| PI * i as f64 / k as f64).collect()
}

/// Uniform reference on the whole offset grid.
pub fn offset_reference(offsets: Grid1D) -> Signal1D {
    Signal1D::uniform(offsets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    angles: Vec<f64>,
    projections: Vec<Signal1D>,
}

impl Sinogram {
    pub fn new(angles: Vec<f64>, projections: Vec<Signal1D>) -> Result<Self> {
        if angles.is_empty() || angles.len() != projections.len() {
            return Err(Error::LengthMismatch { expected: angles.len(), got: projections.len() });
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::OutOfRange(f64::NAN));
        }
        let grid = *projections[0].grid();
        if projections.iter().any(|p| *p.grid() != grid) {
            return Err(Error::DomainMismatch("projections must share one offset grid".into()));
        }
        Ok(Self { angles, projections })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn projections(&self) -> &[Signal1D] {
        &self.projections
    }

    pub fn offsets(&self) -> &Grid1D {
        self.projections[0].grid()
    }
}

/// Per-angle CDTs of a sinogram against one shared reference.
#[derive(Debug, Clone, PartialEq)]
pub struct RcdtStack {
    angles: Vec<f64>,
    maps: Vec<TransportMap1D>,
}

impl RcdtStack {
    pub fn new(angles: Vec<f64>, maps: Vec<TransportMap1D>) -> Result<Self> {
        if angles.is_empty() || angles.len() != maps.len() {
            return Err(Error::LengthMismatch { expected: angles.len(), got: maps.len() });
        }
        let grid = *maps[0].grid();
        if maps.iter().any(|m| *m.grid() != grid) {
            return Err(Error::DomainMismatch("maps must share one reference grid".into()));
        }
        Ok(Self { angles, maps })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn maps(&self) -> &[TransportMap1D] {
        &self.maps
    }
}

/// Projects `p` onto each direction `(cos θ, sin θ)`: the value at offset `t`
/// integrates `p(t·e + s·e⊥)` over `s` with bilinear samples.
pub fn radon(p: &Image2D, angles: &[f64], offsets: Grid1D) -> Result<Sinogram> {
    if angles.is_empty() {
        return Err(Error::Precondition("need at least one angle".into()));
    }
    let grid = p.grid();
    let (dx, dy) = (grid.x_axis().dx(), grid.y_axis().dx());
    let (lo, hi) = p.support_box(0.0)?;
    let tight = [lo, [lo[0], hi[1]], [hi[0], lo[1]], hi];
    // the bilinear interpolant reaches one cell past the last positive node
    let (lo, hi) = ([lo[0] - dx, lo[1] - dy], [hi[0] + dx, hi[1] + dy]);
    let corners = [lo, [lo[0], hi[1]], [hi[0], lo[1]], hi];
    let ds = 0.5 * dx.min(dy);
    let slack = 1e-9 * offsets.dx();
    let projections = angles
        .par_iter()
        .map(|&theta| {
            if !theta.is_finite() {
                return Err(Error::OutOfRange(theta));
            }
            let (c, s) = (theta.cos(), theta.sin());
            let (tmin, tmax) = extent(tight.iter().map(|q| q[0] * c + q[1] * s));
            if tmin < offsets.xmin() - slack || tmax > offsets.xmax() + slack {
                return Err(Error::SupportEscape(theta));
            }
            let (smin, smax) = extent(corners.iter().map(|q| -q[0] * s + q[1] * c));
            let steps = ((smax - smin) / ds).ceil().max(1.0) as usize;
            let h = (smax - smin) / steps as f64;
            let raw: Vec<f64> = offsets
                .nodes()
                .map(|t| {
                    let mut acc = 0.0;
                    for k in 0..=steps {
                        let u = smin + h * k as f64;
                        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                        acc += w * p.eval([t * c - u * s, t * s + u * c]);
                    }
                    acc * h
                })
                .collect();
            normalize(&raw, offsets)
        })
        .collect::<Result<Vec<_>>>()?;
    Sinogram::new(angles.to_vec(), projections)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)))
}

/// R-CDT: per-angle [`cdt_forward`] of the projections of `p` against `r1`,
/// whose grid doubles as the offset grid.
pub fn rcdt(p: &Image2D, r1: &Signal1D, angles: &[f64]) -> Result<RcdtStack> {
    let sino = radon(p, angles, *r1.grid())?;
    rcdt_of_sinogram(&sino, r1)
}

pub fn rcdt_of_sinogram(sino: &Sinogram, r1: &Signal1D) -> Result<RcdtStack> {
    let maps = sino.projections().par_iter().map(|q| cdt_forward(q, r1)).collect::<Result<Vec<_>>>()?;
    RcdtStack::new(sino.angles().to_vec(), maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Grid2D;

    fn bump(n: usize, center: [f64; 2]) -> Image2D {
        let g = Grid2D::square(-1.0, 1.0, n).unwrap();
        Image2D::from_fn(g, |x, y| {
            let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
            (-r2 / 0.02).exp() * f64::from(r2 < 0.2)
        })
        .unwrap()
    }

    #[test]
    fn symmetric_bump_has_equal_projections() {
        let p = bump(128, [0.0, 0.0]);
        let offsets = Grid1D::new(-1.5, 1.5, 128).unwrap();
        let sino = radon(&p, &uniform_angles(8), offsets).unwrap();
        let first = &sino.projections()[0];
        for q in sino.projections() {
            assert!(first.l1_distance(q).unwrap() < 1e-2);
        }
    }

    #[test]
    fn box_shadow() {
        let g = Grid2D::square(-1.0, 1.0, 161).unwrap();
        let p = Image2D::uniform_box(g, [-0.3, -0.5], [0.3, 0.5]).unwrap();
        let offsets = Grid1D::new(-1.5, 1.5, 301).unwrap();
        let sino = radon(&p, &[0.0], offsets).unwrap();
        let q = &sino.projections()[0];
        // the interpolated box has ramps one cell wide on each side
        let width = 0.6 + g.x_axis().dx();
        assert!((q.eval(0.0) - 1.0 / width).abs() < 1e-2, "{}", q.eval(0.0));
        assert!(q.eval(0.5) < 1e-12 && q.eval(-0.5) < 1e-12, "{} {}", q.eval(0.5), q.eval(-0.5));
    }

    #[test]
    fn escape_is_reported() {
        let p = bump(64, [0.0, 0.0]);
        let offsets = Grid1D::new(-0.1, 0.1, 64).unwrap();
        assert!(matches!(radon(&p, &[0.3], offsets), Err(Error::SupportEscape(_))));
    }
}
