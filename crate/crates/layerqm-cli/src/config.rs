//! Job documents. TOML, one `[[perturbations]]` table per point interaction:
//!
//! ```toml
//! mode = "xi-scan"
//! [layer]
//! d = 3.141592653589793   # optional, defaults to π
//! field = 1.0             # optional magnetic field B
//! [[perturbations]]
//! a = [0.0, 0.0]
//! b = 0.5
//! alpha = -1.0
//! [scan]
//! start = -50.0
//! stop = 0.9
//! count = 200
//! ```

use crate::CliError;
use layerqm::layer_green::{LayerConfig, Perturbation};
use layerqm::magnetic::MagneticConfig;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    XiScan,
    BoundStates,
    Smatrix,
    MagneticGaps,
    EigenfunctionGrid,
}

impl Mode {
    pub const ALL: [Mode; 5] =
        [Mode::XiScan, Mode::BoundStates, Mode::Smatrix, Mode::MagneticGaps, Mode::EigenfunctionGrid];

    pub fn name(self) -> &'static str {
        match self {
            Mode::XiScan => "xi-scan",
            Mode::BoundStates => "bound-states",
            Mode::Smatrix => "smatrix",
            Mode::MagneticGaps => "magnetic-gaps",
            Mode::EigenfunctionGrid => "eigenfunction-grid",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown mode '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}', expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<f64>,
}

fn default_d() -> f64 {
    PI
}

impl Default for LayerSpec {
    fn default() -> Self {
        Self { d: PI, field: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub a: [f64; 2],
    pub b: f64,
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.stop } else { self.start + h * i as f64 }).collect()
    }

    fn validate(&self, field: &str) -> Result<(), CliError> {
        if self.count < 2 {
            return Err(CliError::Config(format!("{field}.count must be at least 2, got {}", self.count)));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Config(format!("{field}: start and stop must be finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticSpec {
    /// Number of gaps, counted from the lowest.
    #[serde(default = "default_gaps")]
    pub gaps: usize,
    /// Trace the eigenvalues of Λ_B over this gap instead of solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_gap: Option<usize>,
    #[serde(default = "default_trace_points")]
    pub points: usize,
}

fn default_gaps() -> usize {
    4
}

fn default_trace_points() -> usize {
    layerqm::magnetic::GAP_SCAN_POINTS
}

impl Default for MagneticSpec {
    fn default() -> Self {
        Self { gaps: default_gaps(), trace_gap: None, points: default_trace_points() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenGridSpec {
    /// First horizontal coordinate.
    pub x: Grid,
    /// Transverse coordinate.
    pub y: Grid,
    /// Second horizontal coordinate, fixed.
    #[serde(default)]
    pub plane: f64,
    /// Which eigenvalue, counted from the lowest.
    #[serde(default)]
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub mode: Mode,
    #[serde(default)]
    pub layer: LayerSpec,
    #[serde(default)]
    pub perturbations: Vec<PerturbationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<Grid>,
    /// Solve bound states of all centres together instead of one by one.
    #[serde(default)]
    pub coupled: bool,
    #[serde(default)]
    pub magnetic: MagneticSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<EigenGridSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl JobConfig {
    pub fn layer_config(&self) -> Result<LayerConfig, CliError> {
        LayerConfig::new(self.layer.d).map_err(|e| CliError::Config(format!("layer.d: {e}")))
    }

    pub fn magnetic_config(&self) -> Result<Option<MagneticConfig>, CliError> {
        self.layer
            .field
            .map(|b| MagneticConfig::new(b, self.layer.d).map_err(|e| CliError::Config(format!("layer.field: {e}"))))
            .transpose()
    }

    pub fn perturbations(&self) -> Vec<Perturbation> {
        self.perturbations.iter().map(|p| Perturbation::new(p.a, p.b, p.alpha)).collect()
    }

    pub fn scan(&self) -> Result<Grid, CliError> {
        self.scan.ok_or_else(|| CliError::Config(format!("mode {} needs a [scan] table", self.mode)))
    }

    fn validate(&self) -> Result<(), CliError> {
        let cfg = self.layer_config()?;
        self.magnetic_config()?;
        if self.perturbations.is_empty() {
            return Err(CliError::Config("at least one [[perturbations]] entry is required".into()));
        }
        for (i, p) in self.perturbations.iter().enumerate() {
            Perturbation::new(p.a, p.b, p.alpha)
                .validate(&cfg)
                .map_err(|e| CliError::Config(format!("perturbations[{i}]: {e}")))?;
        }
        if let Some(g) = &self.scan {
            g.validate("scan")?;
        }
        if let Some(g) = &self.grid {
            g.x.validate("grid.x")?;
            g.y.validate("grid.y")?;
        }
        match self.mode {
            Mode::XiScan | Mode::BoundStates | Mode::Smatrix => {
                self.scan()?;
            }
            Mode::MagneticGaps => {
                if self.layer.field.is_none() {
                    return Err(CliError::Config("magnetic-gaps needs layer.field".into()));
                }
                if self.magnetic.gaps == 0 {
                    return Err(CliError::Config("magnetic.gaps must be at least 1".into()));
                }
                if self.magnetic.points < 2 {
                    return Err(CliError::Config("magnetic.points must be at least 2".into()));
                }
            }
            Mode::EigenfunctionGrid => {
                if self.grid.is_none() {
                    return Err(CliError::Config("eigenfunction-grid needs a [grid] table".into()));
                }
            }
        }
        if matches!(self.mode, Mode::BoundStates | Mode::Smatrix) && self.layer.field.is_some() {
            return Err(CliError::Config(format!("mode {} is field-free; drop layer.field", self.mode)));
        }
        Ok(())
    }
}

/// Parses and validates a job document.
pub fn parse_config(text: &str) -> Result<JobConfig, CliError> {
    let cfg: JobConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Like [`parse_config`], with the mode given on the command line. A
/// document without `mode` takes it; one with a different mode is rejected.
pub fn parse_config_for(text: &str, mode: Mode) -> Result<JobConfig, CliError> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    match doc.get("mode") {
        None => {
            doc.insert("mode".into(), toml::Value::String(mode.name().into()));
        }
        Some(toml::Value::String(m)) if m == mode.name() => {}
        Some(other) => {
            return Err(CliError::Config(format!("document mode {other} differs from command-line mode {mode}")));
        }
    }
    let cfg: JobConfig = doc.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let c =
            parse_config("mode = \"xi-scan\"\n[[perturbations]]\nb = 1.0\n[scan]\nstart = -1\nstop = 0.5\ncount = 3\n")
                .unwrap();
        assert_eq!(c.layer.d, PI);
        assert_eq!(c.output.format, Format::Csv);
        assert_eq!(c.perturbations[0].a, [0.0, 0.0]);
        assert_eq!(c.scan.unwrap().points(), vec![-1.0, -0.25, 0.5]);
    }

    #[test]
    fn b_on_the_wall_names_the_field() {
        let doc = format!("mode = \"xi-scan\"\n[[perturbations]]\nb = {PI}\n[scan]\nstart = -1\nstop = 0\ncount = 3\n");
        match parse_config(&doc) {
            Err(CliError::Config(m)) => assert!(m.contains("perturbations[0]"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_mode_reports_line() {
        let doc = "\n\nmode = \"spectra\"\n[[perturbations]]\nb = 1.0\n";
        match parse_config(doc) {
            Err(CliError::Config(m)) => assert!(m.contains("line 3"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn command_line_mode_fills_in_and_must_agree() {
        let doc = "[layer]\nfield = 1.0\n[[perturbations]]\nb = 1.0\n";
        assert_eq!(parse_config_for(doc, Mode::MagneticGaps).unwrap().mode, Mode::MagneticGaps);
        let doc = "mode = \"smatrix\"\n[[perturbations]]\nb = 1.0\n[scan]\nstart = 2\nstop = 3\ncount = 2\n";
        assert!(matches!(parse_config_for(doc, Mode::XiScan), Err(CliError::Config(_))));
    }

    #[test]
    fn grid_count_at_least_two() {
        let doc = "mode = \"xi-scan\"\n[[perturbations]]\nb = 1.0\n[scan]\nstart = -1\nstop = 0\ncount = 1\n";
        assert!(matches!(parse_config(doc), Err(CliError::Config(_))));
    }
}
