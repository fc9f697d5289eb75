//! Text formats: CSV bodies under a `# <kind> <params>` header line, numbers
//! written with 17 significant digits so they read back bit for bit.
//!
//! Readers never trust header sizes for allocation and reject non-finite
//! numbers, except `nan` pairs marking undefined cells of a planar map.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cdt::TransportMap1D;
use crate::diffeo1d::Diffeo1D;
use crate::diffeo2d::Diffeo2D;
use crate::error::{Error, Result};
use crate::image::{Grid2D, Image2D};
use crate::lot::TransportMap2D;
use crate::oracle::CouplingPlan;
use crate::radon::{RcdtStack, Sinogram};
use crate::signal::{normalize, Grid1D, Signal1D};

/// Largest node count accepted by any reader.
pub const MAX_NODES: usize = 1 << 22;

/// 17 significant digits; negative zero prints as zero.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == 0.0 {
        "0.0000000000000000e0".into()
    } else {
        format!("{x:.16e}")
    }
}

fn grid1d_params(g: &Grid1D) -> String {
    format!("{} {} {}", num(g.xmin()), num(g.xmax()), g.len())
}

fn grid2d_params(g: &Grid2D) -> String {
    format!("{} {}", grid1d_params(g.x_axis()), grid1d_params(g.y_axis()))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next non-blank line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let line = line.trim();
            if !line.is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| Error::format(self.last + 1, format!("unexpected end of input, expected {what}")))
    }

    fn finish(&mut self) -> Result<()> {
        match self.next() {
            Some((line, _)) => Err(Error::format(line, "trailing content")),
            None => Ok(()),
        }
    }
}

fn parse_f64(line: usize, tok: &str, allow_nan: bool) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| Error::format(line, format!("bad number {tok:?}")))?;
    if v.is_finite() || (allow_nan && v.is_nan()) {
        Ok(v)
    } else {
        Err(Error::format(line, format!("non-finite number {tok:?}")))
    }
}

fn parse_usize(line: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| Error::format(line, format!("bad count {tok:?}")))
}

fn fields<const N: usize>(line: usize, text: &str, allow_nan: bool) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    let mut parts = text.split(',');
    for slot in out.iter_mut() {
        let tok = parts.next().ok_or_else(|| Error::format(line, format!("expected {N} fields")))?;
        *slot = parse_f64(line, tok, allow_nan)?;
    }
    if parts.next().is_some() {
        return Err(Error::format(line, format!("expected {N} fields")));
    }
    Ok(out)
}

/// Splits `# <kind> rest...` and checks the kind.
fn header<'a>(lines: &mut Lines<'a>, kind: &str) -> Result<(usize, Vec<&'a str>)> {
    let (line, text) = lines.expect("header")?;
    let mut toks = text.split_whitespace();
    if toks.next() != Some("#") || toks.next() != Some(kind) {
        return Err(Error::format(line, format!("expected header `# {kind} ...`")));
    }
    Ok((line, toks.collect()))
}

fn grid1d_from(line: usize, toks: &[&str]) -> Result<Grid1D> {
    let n = parse_usize(line, toks[2])?;
    if n > MAX_NODES {
        return Err(Error::format(line, format!("{n} nodes exceeds the limit {MAX_NODES}")));
    }
    Grid1D::new(parse_f64(line, toks[0], false)?, parse_f64(line, toks[1], false)?, n)
        .map_err(|e| Error::format(line, e.to_string()))
}

fn grid2d_from(line: usize, toks: &[&str]) -> Result<Grid2D> {
    let x = grid1d_from(line, &toks[..3])?;
    let y = grid1d_from(line, &toks[3..6])?;
    if x.len().saturating_mul(y.len()) > MAX_NODES {
        return Err(Error::format(line, format!("grid exceeds the limit {MAX_NODES}")));
    }
    Ok(Grid2D::from_axes(x, y))
}

fn arity(line: usize, toks: &[&str], n: usize) -> Result<()> {
    if toks.len() == n {
        Ok(())
    } else {
        Err(Error::format(line, format!("header needs {n} parameters, got {}", toks.len())))
    }
}

fn check_node(line: usize, got: f64, want: f64, spacing: f64) -> Result<()> {
    if (got - want).abs() <= 1e-6 * spacing {
        Ok(())
    } else {
        Err(Error::format(line, format!("coordinate {got} does not match grid node {want}")))
    }
}

/// Reads `n` lines `x,value` on `grid`.
fn read_pairs(lines: &mut Lines, grid: &Grid1D) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..grid.len() {
        let (line, text) = lines.expect("sample line")?;
        let [x, v] = fields::<2>(line, text, false)?;
        check_node(line, x, grid.node(i), grid.dx())?;
        out.push(v);
    }
    Ok(out)
}

fn write_pairs(out: &mut String, grid: &Grid1D, values: &[f64]) {
    for (x, v) in grid.nodes().zip(values) {
        let _ = writeln!(out, "{},{}", num(x), num(*v));
    }
}

pub fn write_signal(p: &Signal1D) -> String {
    let mut out = format!("# grid1d {}\n", grid1d_params(p.grid()));
    write_pairs(&mut out, p.grid(), p.values());
    out
}

/// Reads a signal file and scales it to unit mass.
pub fn read_signal(text: &str) -> Result<Signal1D> {
    let mut lines = Lines::new(text);
    let (line, toks) = header(&mut lines, "grid1d")?;
    arity(line, &toks, 3)?;
    let grid = grid1d_from(line, &toks)?;
    let values = read_pairs(&mut lines, &grid)?;
    lines.finish()?;
    normalize(&values, grid)
}

pub fn write_image(p: &Image2D) -> String {
    let g = p.grid();
    let mut out = format!("# grid2d {}\n", grid2d_params(g));
    for (k, v) in p.values().iter().enumerate() {
        let [x, y] = g.point(k);
        let _ = writeln!(out, "{},{},{}", num(x), num(y), num(*v));
    }
    out
}

fn read_grid2d_body<T>(
    lines: &mut Lines,
    g: &Grid2D,
    mut row: impl FnMut(usize, &str) -> Result<([f64; 2], T)>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for k in 0..g.len() {
        let (line, text) = lines.expect("sample line")?;
        let ([x, y], v) = row(line, text)?;
        let [px, py] = g.point(k);
        check_node(line, x, px, g.x_axis().dx())?;
        check_node(line, y, py, g.y_axis().dx())?;
        out.push(v);
    }
    Ok(out)
}

/// Reads an image file and scales it to unit mass.
pub fn read_image(text: &str) -> Result<Image2D> {
    let mut lines = Lines::new(text);
    let (line, toks) = header(&mut lines, "grid2d")?;
    arity(line, &toks, 6)?;
    let g = grid2d_from(line, &toks)?;
    let values = read_grid2d_body(&mut lines, &g, |line, text| {
        let [x, y, v] = fields::<3>(line, text, false)?;
        Ok(([x, y], v))
    })?;
    lines.finish()?;
    Image2D::normalize(g, values)
}

pub fn write_tmap1d(t: &TransportMap1D) -> String {
    let mut out = format!("# tmap1d {}\n", grid1d_params(t.grid()));
    write_pairs(&mut out, t.grid(), t.values());
    out
}

pub fn read_tmap1d(text: &str) -> Result<TransportMap1D> {
    let mut lines = Lines::new(text);
    let (line, toks) = header(&mut lines, "tmap1d")?;
    arity(line, &toks, 3)?;
    let grid = grid1d_from(line, &toks)?;
    let values = read_pairs(&mut lines, &grid)?;
    lines.finish()?;
    TransportMap1D::new(grid, values)
}

pub fn write_tmap2d(t: &TransportMap2D) -> String {
    let g = t.grid();
    let mut out = format!("# tmap2d {}\n", grid2d_params(g));
    for (k, v) in t.values().iter().enumerate() {
        let [x, y] = g.point(k);
        let [tx, ty] = v.unwrap_or([f64::NAN; 2]);
        let _ = writeln!(out, "{},{},{},{}", num(x), num(y), num(tx), num(ty));
    }
    out
}

/// Reads a planar map; `nan,nan` marks an undefined cell. Maps read back are
/// not claimed to be gradients.
pub fn read_tmap2d(text: &str) -> Result<TransportMap2D> {
    let mut lines = Lines::new(text);
    let (line, toks) = header(&mut lines, "tmap2d")?;
    arity(line, &toks, 6)?;
    let g = grid2d_from(line, &toks)?;
    let values = read_grid2d_body(&mut lines, &g, |line, text| {
        let [x, y, tx, ty] = fields::<4>(line, text, true)?;
        if x.is_nan() || y.is_nan() {
            return Err(Error::format(line, "coordinates must be finite"));
        }
        match (tx.is_nan(), ty.is_nan()) {
            (false, false) => Ok(([x, y], Some([tx, ty]))),
            (true, true) => Ok(([x, y], None)),
            _ => Err(Error::format(line, "undefined cells need nan in both components")),
        }
    })?;
    lines.finish()?;
    TransportMap2D::new(g, values, false)
}

fn write_blocks(kind: &str, grid: &Grid1D, angles: &[f64], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = format!("# {kind} {} {}\n", grid1d_params(grid), angles.len());
    for (theta, values) in angles.iter().zip(rows) {
        let _ = writeln!(out, "# angle {}", num(*theta));
        write_pairs(&mut out, grid, &values);
    }
    out
}

fn read_blocks(text: &str, kind: &str) -> Result<(Grid1D, Vec<f64>, Vec<Vec<f64>>)> {
    let mut lines = Lines::new(text);
    let (line, toks) = header(&mut lines, kind)?;
    arity(line, &toks, 4)?;
    let grid = grid1d_from(line, &toks[..3])?;
    let k = parse_usize(line, toks[3])?;
    if k == 0 || k.saturating_mul(grid.len()) > MAX_NODES {
        return Err(Error::format(line, format!("{k} angles out of range")));
    }
    let (mut angles, mut blocks) = (Vec::new(), Vec::new());
    for _ in 0..k {
        let (line, toks) = header(&mut lines, "angle")?;
        arity(line, &toks, 1)?;
        angles.push(parse_f64(line, toks[0], false)?);
        blocks.push(read_pairs(&mut lines, &grid)?);
    }
    lines.finish()?;
    Ok((grid, angles, blocks))
}

pub fn write_sinogram(s: &Sinogram) -> String {
    write_blocks("sinogram", s.offsets(), s.angles(), s.projections().iter().map(|p| p.values().to_vec()))
}

/// Reads a sinogram, scaling each projection to unit mass.
pub fn read_sinogram(text: &str) -> Result<Sinogram> {
    let (grid, angles, blocks) = read_blocks(text, "sinogram")?;
    let projections = blocks.iter().map(|b| normalize(b, grid)).collect::<Result<Vec<_>>>()?;
    Sinogram::new(angles, projections)
}

pub fn write_rcdt(s: &RcdtStack) -> String {
    let grid = *s.maps()[0].grid();
    write_blocks("rcdt", &grid, s.angles(), s.maps().iter().map(|m| m.values().to_vec()))
}

pub fn read_rcdt(text: &str) -> Result<RcdtStack> {
    let (grid, angles, blocks) = read_blocks(text, "rcdt")?;
    let maps = blocks.into_iter().map(|b| TransportMap1D::new(grid, b)).collect::<Result<Vec<_>>>()?;
    RcdtStack::new(angles, maps)
}

#[derive(Serialize, Deserialize)]
struct CouplingHeader {
    source_grid: Grid2D,
    source_index: Vec<usize>,
    source_points: Vec<([f64; 2], f64)>,
    target_points: Vec<([f64; 2], f64)>,
    cost: f64,
    dual_residual: f64,
}

/// `# coupling <json header>` followed by `i,j,mass` lines.
pub fn write_coupling(plan: &CouplingPlan) -> Result<String> {
    let head = CouplingHeader {
        source_grid: plan.source_grid,
        source_index: plan.source_index.clone(),
        source_points: plan.source_points.clone(),
        target_points: plan.target_points.clone(),
        cost: plan.cost,
        dual_residual: plan.dual_residual,
    };
    let json = serde_json::to_string(&head).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = format!("# coupling {json}\ni,j,mass\n");
    for &(i, j, m) in &plan.entries {
        let _ = writeln!(out, "{i},{j},{}", num(m));
    }
    Ok(out)
}

pub fn read_coupling(text: &str) -> Result<CouplingPlan> {
    let mut lines = Lines::new(text);
    let (line, first) = lines.expect("header")?;
    let json = first
        .strip_prefix("# coupling ")
        .ok_or_else(|| Error::format(line, "expected header `# coupling {...}`"))?;
    let head: CouplingHeader = serde_json::from_str(json).map_err(|e| Error::format(line, e.to_string()))?;
    let (line, cols) = lines.expect("column header")?;
    if cols != "i,j,mass" {
        return Err(Error::format(line, "expected column header `i,j,mass`"));
    }
    let mut entries = Vec::new();
    while let Some((line, text)) = lines.next() {
        if entries.len() >= MAX_NODES {
            return Err(Error::format(line, "too many entries"));
        }
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::format(line, "expected 3 fields"));
        }
        let (i, j) = (parse_usize(line, parts[0].trim())?, parse_usize(line, parts[1].trim())?);
        entries.push((i, j, parse_f64(line, parts[2], false)?));
    }
    let plan = CouplingPlan {
        source_grid: head.source_grid,
        source_index: head.source_index,
        source_points: head.source_points,
        target_points: head.target_points,
        entries,
        cost: head.cost,
        dual_residual: head.dual_residual,
    };
    plan.validate()?;
    Ok(plan)
}

fn json_error(e: serde_json::Error) -> Error {
    Error::format(e.line(), e.to_string())
}

pub fn read_diffeo1d(text: &str) -> Result<Diffeo1D> {
    serde_json::from_str(text).map_err(json_error)
}

pub fn read_diffeo2d(text: &str) -> Result<Diffeo2D> {
    let h: Diffeo2D = serde_json::from_str(text).map_err(json_error)?;
    h.validate()?;
    Ok(h)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(json_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_round_trip_is_exact() {
        let g = Grid1D::new(-0.3, 1.7, 101).unwrap();
        let p = Signal1D::from_fn(g, |x| (x * 3.1).sin().abs() + 0.1).unwrap();
        assert_eq!(read_signal(&write_signal(&p)).unwrap(), p);
    }

    #[test]
    fn header_errors_carry_line() {
        assert!(matches!(read_signal("# grid2d 0 1 3\n"), Err(Error::Format { line: 1, .. })));
        assert!(matches!(read_signal("# grid1d 0 1 2\n0,1\n1,inf\n"), Err(Error::Format { line: 3, .. })));
        assert!(matches!(read_signal("# grid1d 0 1 99999999999\n"), Err(Error::Format { line: 1, .. })));
    }
}
