//! Plot-ready CSV renderings of the separability and vector-field experiments.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::num;
use crate::lab::{separability_experiment, ExperimentConfig, SeparabilityReport};
use crate::verify::caption_instance;

/// Member columns written per class to `samples.csv`.
pub const SAMPLE_COLUMNS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    OneTwoBump,
    LdaDegree5,
    VectorField,
}

impl ExperimentKind {
    pub const ALL: [Self; 3] = [Self::OneTwoBump, Self::LdaDegree5, Self::VectorField];

    pub fn name(self) -> &'static str {
        match self {
            Self::OneTwoBump => "one-two-bump",
            Self::LdaDegree5 => "lda-degree5",
            Self::VectorField => "vector-field",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Sampling box for the vector-field experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFieldConfig {
    pub experiment: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for VectorFieldConfig {
    fn default() -> Self {
        Self { experiment: ExperimentKind::VectorField.name().into(), lo: -2.0, hi: 2.0, n: 21 }
    }
}

/// Largest vector-field grid side accepted from a config.
pub const MAX_FIELD_SIDE: usize = 4096;

impl VectorFieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::Config(format!("bad box [{}, {}]", self.lo, self.hi)));
        }
        if self.n < 2 || self.n > MAX_FIELD_SIDE {
            return Err(Error::Config(format!("grid side {} out of range", self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSpec {
    Separability(ExperimentConfig),
    VectorField(VectorFieldConfig),
}

impl ExperimentSpec {
    /// Defaults: 500 members per class at `n = 512`, or the 21×21 field.
    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::OneTwoBump => Self::Separability(ExperimentConfig::one_two_bump(0, 512)),
            ExperimentKind::LdaDegree5 => Self::Separability(ExperimentConfig::lda_degree5(0, 512)),
            ExperimentKind::VectorField => Self::VectorField(VectorFieldConfig::default()),
        }
    }

    /// Parses a config for `kind`; its `experiment` field must name `kind`.
    pub fn from_json(kind: ExperimentKind, text: &str) -> Result<Self> {
        let spec = match kind {
            ExperimentKind::VectorField => Self::VectorField(crate::io::from_json(text)?),
            _ => Self::Separability(crate::io::from_json(text)?),
        };
        if spec.experiment() != kind.name() {
            return Err(Error::Config(format!("config is for {:?}, not {}", spec.experiment(), kind.name())));
        }
        Ok(spec)
    }

    pub fn experiment(&self) -> &str {
        match self {
            Self::Separability(c) => &c.experiment,
            Self::VectorField(c) => &c.experiment,
        }
    }

    /// The vector field has no randomness and ignores the seed.
    pub fn set_seed(&mut self, seed: u64) {
        if let Self::Separability(c) = self {
            c.seed = seed;
        }
    }

    pub fn set_grid_n(&mut self, n: usize) {
        match self {
            Self::Separability(c) => c.grid.n = n,
            Self::VectorField(c) => c.n = n,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Separability(c) => Some(c.seed),
            Self::VectorField(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Separability(c) => c.validate(),
            Self::VectorField(c) => c.validate(),
        }
    }

    /// Canonical JSON of the resolved config.
    pub fn to_json(&self) -> Result<String> {
        match self {
            Self::Separability(c) => crate::io::to_json(c),
            Self::VectorField(c) => crate::io::to_json(c),
        }
    }
}

/// Named CSV files, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub files: Vec<(String, String)>,
    /// Present for separability runs.
    pub transform_accuracy: Option<f64>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    match spec {
        ExperimentSpec::Separability(c) => {
            let report = separability_experiment(c)?;
            Ok(ExperimentOutput {
                transform_accuracy: Some(report.transform.accuracy),
                files: vec![
                    ("projections.csv".into(), projections_csv(&report)),
                    ("summary.csv".into(), summary_csv(&report)),
                    ("samples.csv".into(), samples_csv(&report)),
                ],
            })
        }
        ExperimentSpec::VectorField(c) => {
            Ok(ExperimentOutput { transform_accuracy: None, files: vec![("vector_field.csv".into(), vector_field_csv(c)?)] })
        }
    }
}

/// Columns `class,label,index,raw_projection,transform_projection`.
pub fn projections_csv(report: &SeparabilityReport) -> String {
    let mut out = String::from("class,label,index,raw_projection,transform_projection\n");
    for row in &report.projections {
        let label = &report.config.classes[row.class].label;
        let _ = writeln!(out, "{},{label},{},{},{}", row.class, row.index, num(row.raw), num(row.transform));
    }
    out
}

/// One row per domain plus the transform-domain hull margin and distance.
pub fn summary_csv(report: &SeparabilityReport) -> String {
    let mut out = String::from("domain,accuracy,threshold,projection_gap,degenerate,hull_margin,hull_min_distance,hull_separated\n");
    let p = &report.partition;
    for s in [&report.raw, &report.transform] {
        let hull = if s.domain == "transform" {
            format!("{},{},{}", num(p.margin), num(p.min_distance), p.separated)
        } else {
            "nan,nan,".into()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{hull}",
            s.domain,
            num(s.accuracy),
            num(s.threshold),
            num(s.projection_gap),
            s.degenerate
        );
    }
    out
}

/// Grid nodes with each class template and its first members.
pub fn samples_csv(report: &SeparabilityReport) -> String {
    let mut out = String::from("x");
    let mut columns = Vec::new();
    for (c, cfg) in report.classes.iter().zip(&report.config.classes) {
        let _ = write!(out, ",{}_template", cfg.label);
        columns.push(c.template.values());
        for (k, m) in c.members.iter().take(SAMPLE_COLUMNS).enumerate() {
            let _ = write!(out, ",{}_sample_{k}", cfg.label);
            columns.push(m.values());
        }
    }
    out.push('\n');
    let grid = report.classes[0].template.grid();
    for (i, x) in grid.nodes().enumerate() {
        out.push_str(&num(x));
        for col in &columns {
            out.push(',');
            out.push_str(&num(col[i]));
        }
        out.push('\n');
    }
    out
}

/// Columns `x,y,hx,hy` for the caption instance on an `n × n` lattice.
pub fn vector_field_csv(c: &VectorFieldConfig) -> Result<String> {
    c.validate()?;
    let h = caption_instance()?;
    let step = (c.hi - c.lo) / (c.n - 1) as f64;
    let mut out = String::from("x,y,hx,hy\n");
    for j in 0..c.n {
        let y = c.lo + step * j as f64;
        for i in 0..c.n {
            let x = c.lo + step * i as f64;
            let v = h.eval2(x, y)?;
            let _ = writeln!(out, "{},{},{},{}", num(x), num(y), num(v[0]), num(v[1]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_matches_caption_profiles() {
        let csv = vector_field_csv(&VectorFieldConfig::default()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 21 * 21);
        for line in &lines[1..] {
            let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
            let f = |t: f64| t + 0.1 * t * t;
            let (x, y) = (v[0], v[1]);
            let sum = f(x + y) + (x - y);
            let diff = f(x + y) - (x - y);
            assert!((v[2] - 0.5 * sum).abs() < 1e-12 && (v[3] - 0.5 * diff).abs() < 1e-12, "{line}");
        }
    }

    #[test]
    fn config_kind_must_match() {
        let json = ExperimentSpec::default_for(ExperimentKind::OneTwoBump).to_json().unwrap();
        assert!(ExperimentSpec::from_json(ExperimentKind::LdaDegree5, &json).is_err());
        assert!(ExperimentSpec::from_json(ExperimentKind::OneTwoBump, &json).is_ok());
        assert!("bogus".parse::<ExperimentKind>().is_err());
    }
}
