//! Named property suites: each runs a batch of seeded checks and reports one
//! row per measured quantity.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cdt::{apply_diffeo_1d, cdt_forward, cdt_inverse, composition_push, w2_distance};
use crate::diffeo1d::{sample_polynomial_diffeos, GroupKind, GroupSpec1D};
use crate::diffeo2d::{hr_compose, hr_inverse, is_curl_free, max_curl, Diffeo2D, Profile};
use crate::error::{Error, Result};
use crate::image::{Grid2D, Image2D};
use crate::io::num;
use crate::lab::{convexity_witness, derive_seed, generate_class, generate_group_class, integer_translation_control};
use crate::lot::{apply_diffeo_2d_on, PrMember, composition_violation_demo, generate_pr_member_on, image_box, lot_compose_pr, restrict, DemoConfig};
use crate::oracle::{kantorovich_lp_2d, w2_quantile_oracle, MAX_LP_POINTS};
use crate::radon::{offset_reference, rcdt, uniform_angles, DEFAULT_ANGLES};
use crate::signal::{normalize, support_interval, Grid1D, Signal1D};

pub const SUITES: [&str; 8] =
    ["cdt-roundtrip", "composition-1d", "convexity-1d", "hr-group", "pr-closed-form", "ha-violation", "rcdt-shift", "w2-embedding"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub case: String,
    pub measured: f64,
    pub tolerance: f64,
    /// `true` when `measured` must exceed `tolerance` rather than stay below it.
    pub lower_bound: bool,
    pub passed: bool,
}

impl CheckRow {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(case: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { case: case.into(), measured, tolerance, lower_bound: false, passed: measured <= tolerance }
    }

    /// Passes when `measured > tolerance`.
    pub fn above(case: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { case: case.into(), measured, tolerance, lower_bound: true, passed: measured > tolerance }
    }

    pub fn flag(case: impl Into<String>, ok: bool) -> Self {
        Self { case: case.into(), measured: f64::from(u8::from(ok)), tolerance: 0.0, lower_bound: true, passed: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| !r.passed).collect()
    }

    /// Upper-bounded row closest to (or furthest past) its tolerance.
    pub fn worst(&self) -> Option<&CheckRow> {
        self.rows
            .iter()
            .filter(|r| !r.lower_bound && r.tolerance > 0.0)
            .max_by(|a, b| (a.measured / a.tolerance).total_cmp(&(b.measured / b.tolerance)))
    }

    /// Columns `case,measured,bound,tolerance,passed`, where `bound` is
    /// `max` or `min`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("case,measured,bound,tolerance,passed\n");
        for r in &self.rows {
            let bound = if r.lower_bound { "min" } else { "max" };
            let _ = writeln!(out, "{},{},{bound},{},{}", r.case, num(r.measured), num(r.tolerance), r.passed);
        }
        out
    }
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let rows = match name {
        "cdt-roundtrip" => cdt_roundtrip(seed)?,
        "composition-1d" => composition_1d(seed)?,
        "convexity-1d" => convexity_1d(seed)?,
        "hr-group" => hr_group(seed)?,
        "pr-closed-form" => closed_form_vs_oracle(seed)?,
        "ha-violation" => violation(),
        "rcdt-shift" => rcdt_shift(seed)?,
        "w2-embedding" => w2_embedding(seed)?,
        other => return Err(Error::Config(format!("unknown suite {other:?}; known: {}", SUITES.join(", ")))),
    };
    Ok(SuiteReport { suite: name.into(), seed, rows })
}

/// Box of random height over `[a, b]` plus up to three boxes and cosine
/// bumps inside it, so the support is one interval.
pub fn random_mixture(rng: &mut impl Rng, grid: Grid1D, span: (f64, f64)) -> Result<Signal1D> {
    let width = span.1 - span.0;
    let a = span.0 + width * rng.gen_range(0.0..0.3);
    let b = span.1 - width * rng.gen_range(0.0..0.3);
    let base = rng.gen_range(0.2..1.0);
    let parts: Vec<(bool, f64, f64, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let w = (b - a) * rng.gen_range(0.05..0.25);
            let c = rng.gen_range(a + w..b - w);
            (rng.gen_bool(0.5), c, w, rng.gen_range(0.2..2.0))
        })
        .collect();
    Signal1D::from_fn(grid, |x| {
        if x < a || x > b {
            return 0.0;
        }
        let mut v = base;
        for &(is_box, c, w, h) in &parts {
            let d = (x - c).abs();
            if d < w {
                v += if is_box { h } else { h * (0.5 * PI * d / w).cos().powi(2) };
            }
        }
        v
    })
}

fn unit_reference(n: usize) -> Result<Signal1D> {
    Ok(Signal1D::uniform(Grid1D::new(0.0, 1.0, n)?))
}

fn cdt_roundtrip(seed: u64) -> Result<Vec<CheckRow>> {
    let n = 1024;
    let r = unit_reference(n)?;
    (0..20u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
            let p = random_mixture(&mut rng, *r.grid(), (0.05, 0.95))?;
            let back = cdt_inverse(&cdt_forward(&p, &r)?, &r, *p.grid())?;
            Ok(CheckRow::at_most(format!("mixture-{k}"), back.l1_distance(&p)?, 1e-2))
        })
        .collect()
}

fn composition_1d(seed: u64) -> Result<Vec<CheckRow>> {
    let n = 2048;
    let r = unit_reference(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let p = random_mixture(&mut rng, *r.grid(), (0.25, 0.75))?;
    let support = support_interval(&p, 0.0)?;
    let diffeos = sample_polynomial_diffeos(5, 100, derive_seed(seed, 1), support)?;
    let base = cdt_forward(&p, &r)?;
    let tol = 3.0 * r.grid().dx();
    diffeos
        .par_iter()
        .enumerate()
        .map(|(k, h)| {
            let direct = cdt_forward(&apply_diffeo_1d(&p, h)?, &r)?;
            let pushed = composition_push(h, &base)?;
            Ok(CheckRow::at_most(format!("degree5-{k}"), direct.sup_distance(&pushed)?, tol))
        })
        .collect()
}

/// Members per class in the witness checks.
const WITNESS_CLASS_SIZE: usize = 100;

fn convexity_1d(seed: u64) -> Result<Vec<CheckRow>> {
    let n = 2048;
    let r = unit_reference(n)?;
    let grid = *r.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let template = random_mixture(&mut rng, grid, (0.3, 0.7))?;
    let support = support_interval(&template, 0.0)?;
    let families = [
        ("translations", GroupSpec1D::new(GroupKind::Translations)?),
        ("increasing-affine", GroupSpec1D::new(GroupKind::IncreasingAffine)?),
        ("fixed-points", GroupSpec1D::new(GroupKind::FixedPoints { points: vec![0.2, 0.8] })?),
    ];
    let mut rows = Vec::new();
    for (k, (name, spec)) in families.into_iter().enumerate() {
        let class = generate_group_class(&template, spec, WITNESS_CLASS_SIZE, derive_seed(seed, 10 + k as u64))?;
        rows.extend(witness_rows(name, &convexity_witness(&class, &r, 200, derive_seed(seed, 20 + k as u64))?));
    }
    // degree-5 family: every combination is realized by its own diffeo g
    let diffeos = sample_polynomial_diffeos(5, WITNESS_CLASS_SIZE, derive_seed(seed, 30), support)?;
    let class = generate_class(&template, diffeos)?;
    rows.extend(witness_rows("degree5-convexified", &convexity_witness(&class, &r, 200, derive_seed(seed, 31))?));
    let wide = Grid1D::new(-0.5, 3.5, 4 * (n - 1) + 1)?;
    let shifted = normalize(&wide.nodes().map(|x| template.eval(x)).collect::<Vec<_>>(), wide)?;
    let control = integer_translation_control(&shifted, &r)?;
    rows.push(CheckRow::flag("integer-translations-midpoint-escape", control.escapes()));
    Ok(rows)
}

fn witness_rows(name: &str, report: &crate::lab::WitnessReport) -> Vec<CheckRow> {
    vec![
        CheckRow::at_most(format!("{name}-map-gap"), report.max_map_gap, report.map_tol),
        CheckRow::at_most(format!("{name}-l1-gap"), report.max_l1_gap, report.l1_tol),
        CheckRow::at_most(format!("{name}-failed-trials"), (report.trials.len() - report.passed()) as f64, 0.0),
    ]
}

/// Profile `a t² + b t` on `[lo, hi]` or affine `a t + b`, drawn at random.
pub fn random_profile(rng: &mut impl Rng, lo: f64, hi: f64) -> Result<Profile> {
    if rng.gen_bool(0.5) {
        let b = rng.gen_range(0.8..1.2);
        // keeps the vertex -b/2a well outside [lo, hi]
        let top = 0.1f64.min(0.4 * b / lo.abs().max(hi.abs()));
        Profile::quadratic(rng.gen_range(0.0..top), b, lo, hi)
    } else {
        Profile::affine(rng.gen_range(0.7..1.4), rng.gen_range(-0.2..0.2))
    }
}

pub fn random_hr(rng: &mut impl Rng, lo: f64, hi: f64) -> Result<Diffeo2D> {
    let f = random_profile(rng, lo, hi)?;
    let g = random_profile(rng, lo, hi)?;
    Diffeo2D::hr(f, g)
}

/// The vector-field figure instance: `f'(t) = t + 0.1t²`, `g'(t) = t`.
pub fn caption_instance() -> Result<Diffeo2D> {
    Diffeo2D::hr(Profile::quadratic(0.1, 1.0, -4.9, 10.0)?, Profile::identity())
}

/// Draws pairs until `accept` succeeds; pairs with incompatible domains are
/// outside the group laws being checked.
fn draw_pair<T>(
    rng: &mut impl Rng,
    domains: [(f64, f64); 2],
    accept: impl Fn(&Diffeo2D, &Diffeo2D) -> Result<T>,
) -> Result<(Diffeo2D, Diffeo2D, T)> {
    for _ in 0..100 {
        let a = random_hr(rng, domains[0].0, domains[0].1)?;
        let b = random_hr(rng, domains[1].0, domains[1].1)?;
        match accept(&a, &b) {
            Ok(v) => return Ok((a, b, v)),
            Err(Error::DomainMismatch(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SamplingExhausted { attempts: 100, accepted: 0 })
}

fn hr_group(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let probe = |i: usize, j: usize, n: usize| [-1.0 + 2.0 * i as f64 / (n - 1) as f64, -1.0 + 2.0 * j as f64 / (n - 1) as f64];
    let n = 21;
    let (mut compose_err, mut inverse_err, mut evaluated): (f64, f64, usize) = (0.0, 0.0, 0);
    for k in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
        let (h1, h2, composed) = draw_pair(&mut rng, [(-6.0, 6.0), (-2.0, 2.0)], hr_compose)?;
        let round = hr_compose(&h1, &hr_inverse(&h1)?)?;
        for i in 0..n {
            for j in 0..n {
                let [x, y] = probe(i, j, n);
                if let Ok(direct) = h2.eval2(x, y).and_then(|v| h1.eval2(v[0], v[1])) {
                    let v = composed.eval2(x, y)?;
                    compose_err = compose_err.max((v[0] - direct[0]).abs().max((v[1] - direct[1]).abs()));
                    evaluated += 1;
                }
                if let Ok(v) = round.eval2(x, y) {
                    inverse_err = inverse_err.max((v[0] - x).abs().max((v[1] - y).abs()));
                }
            }
        }
    }
    rows.push(CheckRow::at_most("compose-vs-direct", compose_err, 1e-9));
    rows.push(CheckRow::above("compose-points-evaluated", evaluated as f64, 0.0));
    rows.push(CheckRow::at_most("compose-with-inverse", inverse_err, 1e-8));
    let h = caption_instance()?;
    let curl = max_curl(|x, y| h.eval2(x, y).ok(), [-2.0, -2.0], [2.0, 2.0], 41);
    rows.push(CheckRow::at_most("caption-curl", curl, 1e-4));
    rows.push(CheckRow::flag("caption-is-curl-free", is_curl_free(&h, [-2.0, -2.0], [2.0, 2.0], 41)));
    let v = h.eval2(1.0, 1.0)?;
    rows.push(CheckRow::at_most("caption-h(1,1)", (v[0] - 1.2).abs().max((v[1] - 1.2).abs()), 1e-10));
    let w = h.inverse()?.eval2(1.2, 1.2)?;
    rows.push(CheckRow::at_most("caption-inverse(1.2,1.2)", (w[0] - 1.0).abs().max((w[1] - 1.0).abs()), 1e-10));
    Ok(rows)
}

/// Grid resolution used to build densities before restriction.
const FINE: usize = 64;
/// Oracle grid resolution.
const COARSE: usize = 12;

fn padded(lo: [f64; 2], hi: [f64; 2], n: usize) -> Result<Grid2D> {
    let pad = [0.05 * (hi[0] - lo[0]), 0.05 * (hi[1] - lo[1])];
    Grid2D::with_box([lo[0] - pad[0], lo[1] - pad[1]], [hi[0] + pad[0], hi[1] + pad[1]], n, n)
}

/// Mean displacement, in cells, between the closed-form transform `g⁻¹∘h`
/// of `p_g` and the oracle's barycentric map, where `p_g` is built by
/// pushing the member `h#r` through `g` (no certificate involved).
pub fn closed_form_gap(h: &Diffeo2D, g: &Diffeo2D) -> Result<f64> {
    let (lo, hi) = ([-0.5, -0.5], [0.5, 0.5]);
    let r = Image2D::uniform_box(Grid2D::square(-0.5, 0.5, COARSE)?, lo, hi)?;
    let r_fine = Image2D::uniform_box(Grid2D::square(-0.5, 0.5, FINE)?, lo, hi)?;
    let (mlo, mhi) = image_box(h, lo, hi)?;
    let member = generate_pr_member_on(&r_fine, h, padded(mlo, mhi, FINE)?)?;
    // the closed form is sampled on the oracle's grid
    let closed = lot_compose_pr(&PrMember { reference: r.clone(), ..member.clone() }, g)?;
    let composed = hr_compose(&hr_inverse(g)?, h)?;
    let (tlo, thi) = image_box(&composed, lo, hi)?;
    let fine = apply_diffeo_2d_on(&member.density, g, padded(tlo, thi, FINE)?)?;
    let target = restrict(&fine, padded(tlo, thi, COARSE)?)?;
    let plan = kantorovich_lp_2d(&r, &target, MAX_LP_POINTS)?;
    let oracle = plan.barycentric_map()?;
    let grid = r.grid();
    let weights: Vec<f64> = (0..grid.len()).map(|k| r.values()[k] * grid.weight(k)).collect();
    let cell = grid.cell().max(target.grid().cell());
    Ok(closed.mean_distance(&oracle, &weights)? / cell)
}

fn closed_form_vs_oracle(seed: u64) -> Result<Vec<CheckRow>> {
    (0..20u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
            let (_, _, gap) = draw_pair(&mut rng, [(-1.0, 1.0), (-3.0, 3.0)], closed_form_gap)?;
            Ok(CheckRow::at_most(format!("pair-{k}-cells"), gap, 1.5))
        })
        .collect()
}

fn violation() -> Vec<CheckRow> {
    match composition_violation_demo([[2.0, 0.0], [0.0, 1.0]], [[2.0, 1.0], [1.0, 2.0]], DemoConfig::default()) {
        Ok(rep) => vec![
            CheckRow::above("gap-over-control", rep.ratio, 5.0),
            CheckRow::at_most("control-gap", rep.control_gap, rep.noise_floor),
        ],
        Err(e) => vec![CheckRow::flag(format!("demo-error: {e}"), false)],
    }
}

/// Two off-center Gaussians, translated by `t`.
fn rcdt_image(grid: Grid2D, t: [f64; 2]) -> Result<Image2D> {
    Image2D::from_fn(grid, |x, y| {
        let (x, y) = (x - t[0], y - t[1]);
        (-((x - 0.1).powi(2) + (y + 0.05).powi(2)) / 0.02).exp() + 0.5 * (-((x + 0.15).powi(2) + (y - 0.15).powi(2)) / 0.01).exp()
    })
}

fn rcdt_shift(seed: u64) -> Result<Vec<CheckRow>> {
    let grid = Grid2D::square(-1.0, 1.0, 128)?;
    let r1 = offset_reference(Grid1D::new(-1.5, 1.5, 128)?);
    let angles = uniform_angles(DEFAULT_ANGLES);
    let base = rcdt(&rcdt_image(grid, [0.0, 0.0])?, &r1, &angles)?;
    let cell = r1.grid().dx();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let shifts: Vec<[f64; 2]> = (0..10).map(|_| [rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25)]).collect();
    shifts
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            let moved = rcdt(&rcdt_image(grid, *t)?, &r1, &angles)?;
            let mut worst: f64 = 0.0;
            for (i, theta) in angles.iter().enumerate() {
                let offset = t[0] * theta.cos() + t[1] * theta.sin();
                let reference = &base.maps()[i];
                worst = worst.max(moved.maps()[i].sup_distance_to(|x| reference.eval(x).unwrap_or(f64::NAN) + offset));
            }
            Ok(CheckRow::at_most(format!("shift-{k}-cells"), worst / cell, 3.0))
        })
        .collect()
}

fn w2_embedding(seed: u64) -> Result<Vec<CheckRow>> {
    let r = unit_reference(1024)?;
    let mut rows = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
            let p = random_mixture(&mut rng, *r.grid(), (0.0, 0.6))?;
            let q = random_mixture(&mut rng, *r.grid(), (0.4, 1.0))?;
            let embedded = w2_distance(&p, &q, &r)?;
            let exact = w2_quantile_oracle(&p, &q, 20_000)?;
            Ok(CheckRow::at_most(format!("pair-{k}-relative"), (embedded - exact).abs() / exact, 1e-3))
        })
        .collect::<Result<Vec<_>>>()?;
    let fine = Grid1D::new(0.0, 1.0, 8001)?;
    let full = Signal1D::boxes(fine, &[(0.0, 1.0, 1.0)])?;
    let half = Signal1D::boxes(fine, &[(0.0, 0.5, 2.0)])?;
    let w = w2_distance(&full, &half, &Signal1D::uniform(fine))?;
    rows.push(CheckRow::at_most("box-vs-halfbox", (w - 1.0 / (2.0 * 3f64.sqrt())).abs(), 1e-4));
    Ok(rows)
}

/// Sup gap, in reference cells, between the CDT of the uniform box pushed by
/// `x ↦ αx − μ` and the exact transform `(x + μ)/α`.
pub fn affine_case(alpha: f64, mu: f64, n: usize) -> Result<f64> {
    let r = unit_reference(n)?;
    let dx = r.grid().dx();
    let wide = Grid1D::new(-1.0, 2.0, 3 * (n - 1) + 1)?;
    let (a, b) = (mu / alpha, (1.0 + mu) / alpha);
    if !(alpha > 0.0 && a >= wide.xmin() && b <= wide.xmax()) {
        return Err(Error::Precondition(format!("support [{a}, {b}] leaves [-1, 2]")));
    }
    // p_h = α·χ[0,1](αx − μ), sampled directly
    let p = Signal1D::boxes(wide, &[(a, b, alpha)])?;
    let t = cdt_forward(&p, &r)?;
    Ok(t.sup_distance_to(|x| (x + mu) / alpha) / dx)
}
