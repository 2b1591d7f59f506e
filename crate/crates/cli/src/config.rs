//! JSON run configurations. Each command starts from its defaults, merges
//! the config file on top, then applies `key=value` overrides from the
//! command line. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use circrad::geometry::Curve;
use circrad::Vec2;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle { center: [f64; 2], radius: f64 },
    /// Curve CSV with header `s,x,y,tx,ty`.
    File { path: PathBuf },
}

impl Default for CurveSpec {
    fn default() -> Self {
        CurveSpec::Circle {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }
}

impl CurveSpec {
    pub fn build(&self) -> CliResult<Curve> {
        match self {
            CurveSpec::Circle { center, radius } => Ok(Curve::circle(Vec2::new(center[0], center[1]), *radius)?),
            CurveSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Ok(Curve::from_csv_str(&text)?)
            }
        }
    }

    pub fn input_path(&self) -> Option<&Path> {
        match self {
            CurveSpec::File { path } => Some(path),
            CurveSpec::Circle { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomSpec {
    Zero,
    Disc { center: [f64; 2], radius: f64, smooth: bool },
    Gaussian { center: [f64; 2], width: f64, amplitude: f64 },
    /// GridField binary.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    pub curve: CurveSpec,
    pub phantom: PhantomSpec,
    /// Spacing of the sampled phantom.
    pub h: f64,
    pub grid_half: f64,
    pub r_start: f64,
    pub r_step: f64,
    pub nr: usize,
    pub ns: usize,
    pub n_theta: usize,
    /// `raw` or `radial`.
    pub convention: String,
    /// When set, also writes the boundary trace on `[0, T]` (step `r_step`).
    pub trace_t_final: Option<f64>,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            curve: CurveSpec::default(),
            phantom: PhantomSpec::Disc {
                center: [0.0, 0.0],
                radius: 0.5,
                smooth: false,
            },
            h: 0.01,
            grid_half: 1.0,
            r_start: 0.005,
            r_step: 0.005,
            nr: 400,
            ns: 256,
            n_theta: 1024,
            convention: "raw".into(),
            trace_t_final: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub curve: CurveSpec,
    /// Sinogram CSV (raw or radial-normalized).
    pub sinogram: Option<PathBuf>,
    /// Ground-truth GridField for the error report.
    pub truth: Option<PathBuf>,
    pub h: f64,
    pub t_final: f64,
    pub t0: f64,
    /// Disc containing the phantom; enables the travel-time check.
    pub support: Option<SupportSpec>,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            curve: CurveSpec::default(),
            sinogram: None,
            truth: None,
            h: 0.01,
            t_final: 6.0,
            t0: 2.0,
            support: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactsConfig {
    pub curve: CurveSpec,
    /// Rows `[x, y, xi_x, xi_y]`.
    pub covectors: Vec<[f64; 4]>,
    /// Extra covectors drawn uniformly inside the curve's bounding box.
    pub random_covectors: usize,
    pub t_max: f64,
    pub seed: u64,
}

impl Default for ArtifactsConfig {
    fn default() -> Self {
        Self {
            curve: CurveSpec::default(),
            covectors: vec![[0.0, 0.0, 1.0, 0.0]],
            random_covectors: 0,
            t_max: 4.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CancelConfig {
    pub n_terms: usize,
    pub h_max: f64,
    /// Samples of the residual curves on `(0, 2]`.
    pub n_r: usize,
    /// Side of the square figure in pixels.
    pub image_size: usize,
}

impl Default for CancelConfig {
    fn default() -> Self {
        Self {
            n_terms: 3,
            h_max: 1e-2,
            n_r: 400,
            image_size: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhostConfig {
    pub curve: CurveSpec,
    pub h: f64,
    pub x0: [f64; 2],
    pub angle_deg: f64,
    pub cells_per_wavelength: f64,
    pub sigma_cells: f64,
    pub t_final: f64,
    pub t0: f64,
}

impl Default for GhostConfig {
    fn default() -> Self {
        Self {
            curve: CurveSpec::default(),
            h: 0.005,
            x0: [0.7, 0.0],
            angle_deg: 20.0,
            cells_per_wavelength: 20.0,
            sigma_cells: 12.0,
            t_final: 1.0,
            t0: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfcheckConfig {
    pub seed: u64,
}

impl Default for SelfcheckConfig {
    fn default() -> Self {
        Self { seed: 7 }
    }
}

/// Merges `patch` into `base`. Tagged objects whose `type` changes are
/// replaced whole so the old variant's fields do not leak through.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let retagged = matches!((b.get("type"), p.get("type")), (Some(x), Some(y)) if x != y);
            if retagged {
                *b = p;
                return;
            }
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// `a.b.c=value`; the value is parsed as JSON and taken as a string when
/// that fails.
fn parse_override(s: &str) -> CliResult<Value> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{s}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut out = value;
    for part in key.split('.').rev() {
        if part.is_empty() {
            return Err(CliError::Config(format!("empty key in override `{s}`")));
        }
        let mut m = Map::new();
        m.insert(part.to_string(), out);
        out = Value::Object(m);
    }
    Ok(out)
}

/// Defaults, then the file, then the overrides.
pub fn resolve<T>(file: Option<&Path>, overrides: &[String]) -> CliResult<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default()).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !doc.is_object() {
            return Err(CliError::Config(format!("{}: top level must be an object", path.display())));
        }
        merge(&mut value, doc);
    }
    for s in overrides {
        merge(&mut value, parse_override(s)?);
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}
