//! Scenario files: TOML with fixed sections, presets and dot-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::Vector3;
use crate::beam::{optimal_feedback, BeamMatrices, BeamParams};
use crate::certificate::CouplingBound;
use crate::model::{curved_reference, straight_reference, PrecurvedReference};
use crate::presets;
use crate::solver::norms::Terms;
use crate::solver::{Scheme, SimConfig};

use super::HarnessError;

pub const PRESETS: [&str; 3] = ["straight-toy", "straight-steel", "helical"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub params: BeamParams,
    pub reference: ReferenceSpec,
    pub sim: SimSpec,
    #[serde(default)]
    pub certificate: CertificateSpec,
    pub datum: DatumSpec,
    #[serde(default)]
    pub feedback: FeedbackSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Straight,
    /// Constant curvature and twist `Υ_c`.
    Constant { curvature: [f64; 3] },
    /// Table written by `dump-matrices` (`x, R11..R33, U1..U3`); its node
    /// count must match `sim.cells`.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub cells: usize,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_order")]
    pub lyapunov_order: u8,
    #[serde(default = "default_true")]
    pub lower_order: bool,
    #[serde(default = "default_true")]
    pub nonlinearity: bool,
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Write `snapshot_XXXXX.csv` for every record.
    #[serde(default)]
    pub write_snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    /// 1: row-sum bound, 2: eigenvalue bound.
    #[serde(default = "default_order")]
    pub m: u8,
    #[serde(default = "default_phi0")]
    pub phi0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_l: Option<f64>,
    /// Use the certificate weights in the recorded functional instead of `Q^𝒟`.
    #[serde(default = "default_true")]
    pub in_functional: bool,
}

impl Default for CertificateSpec {
    fn default() -> Self {
        Self { m: 1, phi0: 1.0, phi_l: None, in_functional: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_order")]
    pub order: u8,
}

/// Which gains close the loop at `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeedbackSpec {
    /// `params.mu1`, `params.mu2`.
    #[default]
    Gains,
    /// Gains minimising `C_κ`; `params.mu1/mu2` are ignored.
    Optimal,
    /// `μ = scale · diag(𝐌D)`; `scale = 1` is the transparent boundary.
    Impedance { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Mu1,
    Mu2,
    Amplitude,
    Cells,
}

impl std::str::FromStr for SweepAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mu1" => Ok(Self::Mu1),
            "mu2" => Ok(Self::Mu2),
            "amplitude" => Ok(Self::Amplitude),
            "cells" | "N" => Ok(Self::Cells),
            _ => Err(HarnessError::Validation(format!(
                "sweep axis '{s}' is not one of mu1, mu2, amplitude, cells"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Also simulate each row and fit the decay of the functional.
    #[serde(default = "default_true")]
    pub simulate: bool,
}

fn default_cfl() -> f64 {
    0.9
}
fn default_stride() -> usize {
    1
}
fn default_order() -> u8 {
    1
}
fn default_true() -> bool {
    true
}
fn default_blowup() -> f64 {
    1e6
}
fn default_max_steps() -> u64 {
    10_000_000
}
fn default_phi0() -> f64 {
    1.0
}

impl Scenario {
    pub fn preset(name: &str) -> Option<Self> {
        let (params, reference) = match name {
            "straight-toy" => (presets::toy_params(), ReferenceSpec::Straight),
            "straight-steel" => (presets::steel_params(), ReferenceSpec::Straight),
            "helical" => {
                let k = presets::helical_curvature();
                (presets::toy_params(), ReferenceSpec::Constant { curvature: [k[0], k[1], k[2]] })
            }
            _ => return None,
        };
        let fastest = params.wave_speeds().iter().cloned().fold(0.0, f64::max);
        let round_trip = 2.0 * params.length / fastest;
        Some(Self {
            name: name.to_string(),
            params,
            reference,
            sim: SimSpec {
                cells: 128,
                t_end: 10.0 * round_trip,
                cfl: default_cfl(),
                output_stride: 4,
                scheme: Scheme::Upwind1,
                lyapunov_order: 1,
                lower_order: true,
                nonlinearity: true,
                blowup_threshold: default_blowup(),
                max_steps: default_max_steps(),
                write_snapshots: false,
            },
            certificate: CertificateSpec::default(),
            datum: DatumSpec { amplitude: 1e-2, seed: 1, order: 1 },
            feedback: FeedbackSpec::Gains,
            sweep: None,
        })
    }

    /// A preset name, or a path to a scenario file.
    pub fn load(source: &str) -> Result<Self, HarnessError> {
        let path = Path::new(source);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            return Self::from_toml(&text);
        }
        Self::preset(source).ok_or_else(|| {
            HarnessError::Validation(format!(
                "'{source}' is neither a file nor a preset ({})",
                PRESETS.join(", ")
            ))
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Validation(format!("scenario: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// Applies `key=value` with a dot-separated key. The value is read as a
    /// TOML value, or as a string when that fails.
    pub fn with_override(&self, assignment: &str) -> Result<Self, HarnessError> {
        self.with_overrides([assignment])
    }

    /// Applies all assignments to the document, then deserialises once, so a
    /// new section can be built one key at a time.
    pub fn with_overrides<I, S>(&self, assignments: I) -> Result<Self, HarnessError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut root = toml::Value::try_from(self).expect("scenario serialises");
        let mut keys = Vec::new();
        for a in assignments {
            keys.push(assign(&mut root, a.as_ref())?);
        }
        root.try_into().map_err(|e: toml::de::Error| {
            HarnessError::Validation(format!("override {}: {e}", keys.join(", ")))
        })
    }
    /// Checks every section; reports all problems at once.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut bad = Vec::new();
        let mut params = self.params;
        if self.feedback != FeedbackSpec::Gains {
            params.mu1 = 1.0;
            params.mu2 = 1.0;
        }
        if let Err(e) = params.validate() {
            bad.push(e.to_string());
        }
        if let FeedbackSpec::Impedance { scale } = self.feedback {
            if !(scale > 0.0 && scale.is_finite()) {
                bad.push(format!("feedback.scale = {scale} must be positive"));
            }
        }
        if let ReferenceSpec::Constant { curvature } = &self.reference {
            if curvature.iter().any(|v| !v.is_finite()) {
                bad.push("reference.curvature must be finite".into());
            }
        }
        if let Err(e) = self.sim_config(false).validate() {
            bad.push(e.to_string());
        }
        if CouplingBound::from_index(self.certificate.m).is_none() {
            bad.push(format!("certificate.m = {} must be 1 or 2", self.certificate.m));
        }
        if !(self.certificate.phi0 > 0.0 && self.certificate.phi0.is_finite()) {
            bad.push(format!("certificate.phi0 = {} must be positive", self.certificate.phi0));
        }
        if !(self.datum.amplitude >= 0.0 && self.datum.amplitude.is_finite()) {
            bad.push(format!("datum.amplitude = {} must be nonnegative", self.datum.amplitude));
        }
        if self.datum.order > 1 {
            bad.push(format!("datum.order = {} must be 0 or 1", self.datum.order));
        }
        if self.datum.order < self.sim.lyapunov_order.saturating_sub(1) {
            bad.push("datum.order must be at least sim.lyapunov_order - 1".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                bad.push("sweep.values is empty".into());
            }
            for v in &s.values {
                let ok = match s.axis {
                    SweepAxis::Amplitude => *v >= 0.0 && v.is_finite(),
                    SweepAxis::Cells => *v >= 1.0 && v.fract() == 0.0,
                    _ => *v > 0.0 && v.is_finite(),
                };
                if !ok {
                    bad.push(format!("sweep value {v} is not admissible for {:?}", s.axis));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(bad.join("; ")))
        }
    }

    /// Matrices with the gains selected by `[feedback]`.
    pub fn matrices(&self) -> Result<BeamMatrices, HarnessError> {
        let invalid = |e: crate::beam::ParamError| HarnessError::Validation(e.to_string());
        match self.feedback {
            FeedbackSpec::Gains => BeamMatrices::new(&self.params).map_err(invalid),
            FeedbackSpec::Optimal => {
                let (mu1, mu2) = optimal_feedback(&self.params).map_err(invalid)?;
                let mut p = self.params;
                p.mu1 = mu1;
                p.mu2 = mu2;
                BeamMatrices::new(&p).map_err(invalid)
            }
            FeedbackSpec::Impedance { scale } => {
                let b = self.params.impedances();
                BeamMatrices::with_feedback(&self.params, b.map(|v| scale * v)).map_err(invalid)
            }
        }
    }

    pub fn reference(&self, m: &BeamMatrices) -> Result<PrecurvedReference, HarnessError> {
        let cells = self.sim.cells;
        let r = match &self.reference {
            ReferenceSpec::Straight => straight_reference(m, cells),
            ReferenceSpec::Constant { curvature } => {
                let k = Vector3::from(*curvature);
                curved_reference(m, cells, |_| k)
            }
            ReferenceSpec::Table { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
                let r = PrecurvedReference::from_csv(m, &text)
                    .map_err(|e| HarnessError::Validation(e.to_string()))?;
                if r.grid.cells != cells {
                    return Err(HarnessError::Validation(format!(
                        "reference table has {} cells, sim.cells = {cells}",
                        r.grid.cells
                    )));
                }
                Ok(r)
            }
        };
        r.map_err(|e| HarnessError::Validation(e.to_string()))
    }

    pub fn sim_config(&self, store_snapshots: bool) -> SimConfig {
        let s = &self.sim;
        let mut c = SimConfig::new(s.cells, s.t_end);
        c.cfl = s.cfl;
        c.output_stride = s.output_stride;
        c.scheme = s.scheme;
        c.lyapunov_order = s.lyapunov_order;
        c.terms = Terms { lower_order: s.lower_order, nonlinearity: s.nonlinearity };
        c.store_snapshots = store_snapshots || s.write_snapshots;
        c.blowup_threshold = s.blowup_threshold;
        c.max_steps = s.max_steps;
        c
    }

    pub fn bound(&self) -> CouplingBound {
        CouplingBound::from_index(self.certificate.m).unwrap_or(CouplingBound::Dominance)
    }

    /// `2ℓ/λ₇`.
    pub fn round_trip(&self) -> f64 {
        let fastest = self.params.wave_speeds().iter().cloned().fold(0.0, f64::max);
        2.0 * self.params.length / fastest
    }
}

fn assign(root: &mut toml::Value, assignment: &str) -> Result<String, HarnessError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Validation(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Validation(format!("override key '{key}' is malformed")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| HarnessError::Validation(format!("override '{key}': '{part}' is not a section")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| HarnessError::Validation(format!("override '{key}' does not name a field")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(format!("'{key}'"))
}
