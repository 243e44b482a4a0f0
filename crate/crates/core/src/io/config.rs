//! Run configuration read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::darcy::DarcyParams;
use crate::elasticity::MaterialParams;
use crate::error::{Error, Result};
use crate::linalg::SolverKind;
use crate::mesh::{apply_preset, Mesh, PresetKind, PresetSpec, Problem};
use crate::nlfea::NewtonSettings;
use crate::optimizer::OptimizerSettings;
use crate::sensitivity::AnalysisParams;

/// A length given in metres or as a multiple of the element size `h`.
///
/// Written as a number (`0.0054`) or a string (`"0.0054"`, `"5.4h"`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Length {
    Metres(f64),
    ElementSizes(f64),
}

impl Length {
    pub fn resolve(&self, h: f64) -> f64 {
        match *self {
            Length::Metres(v) => v,
            Length::ElementSizes(k) => k * h,
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Length::Metres(v) | Length::ElementSizes(v) => v,
        }
    }
}

impl std::str::FromStr for Length {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::config(format!("invalid length '{s}' (expected metres or a multiple like 5.4h)"));
        match t.strip_suffix('h') {
            Some(k) => k.trim().parse().map(Length::ElementSizes).map_err(|_| bad()),
            None => t.parse().map(Length::Metres).map_err(|_| bad()),
        }
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Length::Metres(v) => write!(f, "{v}"),
            Length::ElementSizes(k) => write!(f, "{k}h"),
        }
    }
}

impl Serialize for Length {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Length::Metres(v) => s.serialize_f64(*v),
            Length::ElementSizes(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct LengthVisitor;
        impl Visitor<'_> for LengthVisitor {
            type Value = Length;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a length in metres or a string like \"5.4h\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Length, E> {
                Ok(Length::Metres(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Length, E> {
                Ok(Length::Metres(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Length, E> {
                Ok(Length::Metres(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Length, E> {
                v.parse().map_err(|e: Error| E::custom(e.to_string()))
            }
        }
        d.deserialize_any(LengthVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub preset: PresetKind,
    /// Preset file replacing the built-in preset geometry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset_file: Option<PathBuf>,
    pub nex: usize,
    pub ney: usize,
    pub lx: f64,
    pub ly: f64,
    pub thickness: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            preset: PresetKind::Inverter,
            preset_file: None,
            nex: 200,
            ney: 100,
            lx: 0.2,
            ly: 0.1,
            thickness: 0.001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub e_solid: f64,
    pub e_void: f64,
    pub poisson: f64,
    pub penalty: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let m = MaterialParams::default();
        MaterialConfig {
            e_solid: m.e_solid,
            e_void: m.e_void,
            poisson: m.poisson,
            penalty: m.penalty,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DarcyConfig {
    pub input_pressure: f64,
    pub k_void: f64,
    pub flow_contrast: f64,
    pub eta_k: f64,
    pub beta_k: f64,
    pub eta_d: f64,
    pub beta_d: f64,
    pub remainder: f64,
    pub penetration_depth: Length,
}

impl Default for DarcyConfig {
    fn default() -> Self {
        let d = DarcyParams::with_element_size(1.0);
        DarcyConfig {
            input_pressure: 1e5,
            k_void: d.k_void,
            flow_contrast: d.flow_contrast,
            eta_k: d.eta_k,
            beta_k: d.beta_k,
            eta_d: d.eta_d,
            beta_d: d.beta_d,
            remainder: d.remainder,
            penetration_depth: Length::ElementSizes(2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub filter_radius: Length,
    pub objective_scale: f64,
    pub solver: SolverKind,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            filter_radius: Length::ElementSizes(5.4),
            objective_scale: 1000.0,
            solver: SolverKind::Direct,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub vtk: bool,
    pub csv: bool,
    pub contour: bool,
    pub dxf: bool,
    /// Iterations between design checkpoints; 0 disables them.
    pub checkpoint_interval: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            vtk: true,
            csv: true,
            contour: true,
            dxf: false,
            checkpoint_interval: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Pressures for the nonlinear sweep (N/m²).
    pub pressures: Vec<f64>,
    /// Density threshold for keeping an element.
    pub threshold: f64,
    /// Loaded edges as pairs of grid node ids, replacing the detected cavity
    /// boundary. Each pair is ordered so the solid lies on its left.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pressure_edges: Option<Vec<[usize; 2]>>,
    pub newton: NewtonSettings,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            pressures: vec![10e5, 25e5, 50e5],
            threshold: 0.85,
            pressure_edges: None,
            newton: NewtonSettings::default(),
        }
    }
}

/// Everything needed to run an optimization and its post-processing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub material: MaterialConfig,
    pub darcy: DarcyConfig,
    pub analysis: AnalysisConfig,
    pub optimizer: OptimizerSettings,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Element size `h = min(Lx/Nex, Ly/Ney)`.
    pub fn h(&self) -> f64 {
        (self.mesh.lx / self.mesh.nex as f64).min(self.mesh.ly / self.mesh.ney as f64)
    }

    pub fn filter_radius(&self) -> f64 {
        self.analysis.filter_radius.resolve(self.h())
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.mesh;
        if m.nex == 0 || m.ney == 0 {
            return Err(Error::config("mesh.nex and mesh.ney must be positive"));
        }
        for (key, v) in [("mesh.lx", m.lx), ("mesh.ly", m.ly), ("mesh.thickness", m.thickness)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{key} must be positive, got {v}")));
            }
        }
        if !(self.analysis.filter_radius.value() > 0.0) {
            return Err(Error::config("analysis.filter_radius must be positive"));
        }
        if !(self.darcy.penetration_depth.value() > 0.0) {
            return Err(Error::config("darcy.penetration_depth must be positive"));
        }
        if !(self.darcy.input_pressure > 0.0) {
            return Err(Error::config("darcy.input_pressure must be positive"));
        }
        if !(self.analysis.objective_scale > 0.0) {
            return Err(Error::config("analysis.objective_scale must be positive"));
        }
        if !(self.verify.threshold > 0.0 && self.verify.threshold < 1.0) {
            return Err(Error::config("verify.threshold must lie in (0, 1)"));
        }
        if self.verify.pressures.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::config("verify.pressures must be non-negative"));
        }
        self.optimizer
            .validate()
            .map_err(|e| Error::config(format!("optimizer: {}", strip_prefix(e))))?;
        self.material_params()
            .validate()
            .map_err(|e| Error::config(format!("material: {}", strip_prefix(e))))?;
        self.darcy_params()
            .validate()
            .map_err(|e| Error::config(format!("darcy: {}", strip_prefix(e))))?;
        self.verify
            .newton
            .validate()
            .map_err(|e| Error::config(format!("verify.newton: {}", strip_prefix(e))))?;
        Ok(())
    }

    pub fn material_params(&self) -> MaterialParams {
        let m = &self.material;
        MaterialParams {
            e_solid: m.e_solid,
            e_void: m.e_void,
            poisson: m.poisson,
            penalty: m.penalty,
        }
    }

    pub fn darcy_params(&self) -> DarcyParams {
        let d = &self.darcy;
        DarcyParams {
            k_void: d.k_void,
            flow_contrast: d.flow_contrast,
            eta_k: d.eta_k,
            beta_k: d.beta_k,
            eta_d: d.eta_d,
            beta_d: d.beta_d,
            remainder: d.remainder,
            penetration_depth: d.penetration_depth.resolve(self.h()),
        }
    }

    pub fn analysis_params(&self) -> AnalysisParams {
        AnalysisParams {
            material: self.material_params(),
            darcy: self.darcy_params(),
            objective_scale: self.analysis.objective_scale,
            solver: self.analysis.solver,
        }
    }

    pub fn preset_spec(&self) -> Result<PresetSpec> {
        let m = &self.mesh;
        match &m.preset_file {
            Some(path) => PresetSpec::load(path),
            None => Ok(PresetSpec::builtin(m.preset, m.lx, m.ly, m.thickness)),
        }
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let m = &self.mesh;
        let mesh = Mesh::build_grid(m.nex, m.ney, m.lx, m.ly, m.thickness)?;
        let preset = self.preset_spec()?.resolve(&mesh, self.darcy.input_pressure)?;
        apply_preset(mesh, preset)
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) | Error::Domain(m) => m,
        other => other.to_string(),
    }
}
