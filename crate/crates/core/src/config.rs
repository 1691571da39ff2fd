//! Run configuration: a JSON file with SI quantities whose unit is spelled
//! out in each key, plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{IonSpecies, RfDrive};
use crate::circuits::ResonatorModel;
use crate::constants::{angular, ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};
use crate::geometry::{build_paper_layout, ElectrodeLayout};
use crate::solver::SolveSpec;
use crate::voltages::VoltageSet;

/// Where the electrode layout comes from: `{"builtin": "paper"}` or
/// `{"file": "layout.json"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSourceSpec {
    pub builtin: Option<String>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LayoutSource {
    Builtin(String),
    File(PathBuf),
}

impl LayoutSource {
    pub fn load(&self) -> Result<ElectrodeLayout> {
        match self {
            Self::Builtin(name) if name == "paper" => Ok(build_paper_layout()),
            Self::Builtin(name) => Err(Error::InvalidParameter(format!(
                "unknown builtin layout {name:?} (expected \"paper\")"
            ))),
            Self::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidParameter(format!("cannot read layout file {}: {e}", path.display()))
                })?;
                ElectrodeLayout::from_json(&text)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    pub amplitude_v: f64,
    pub frequency_hz: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            amplitude_v: 140.0,
            frequency_hz: 20.6e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IonConfig {
    pub mass_u: f64,
    pub charge_e: f64,
    pub wavelength_m: f64,
    pub beam_angle_deg: f64,
}

impl Default for IonConfig {
    fn default() -> Self {
        let ca = IonSpecies::ca40();
        Self {
            mass_u: ca.mass / ATOMIC_MASS_UNIT,
            charge_e: ca.charge / ELEMENTARY_CHARGE,
            wavelength_m: ca.wavelength,
            beam_angle_deg: ca.beam_angle.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub target_axial_hz: f64,
    pub target_position_m: Option<[f64; 3]>,
    pub allowed: Vec<String>,
    pub bound_v: f64,
    pub regularization: f64,
    pub pair_mirror: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolveSpec::paper(true);
        Self {
            target_axial_hz: 1.069e6,
            target_position_m: None,
            allowed: s.allowed,
            bound_v: s.bound,
            regularization: s.regularization,
            pair_mirror: s.pair_mirror,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShuttleConfig {
    pub from_z_m: f64,
    pub to_z_m: f64,
    pub steps: usize,
    /// Electrodes the waveform may use; every DC electrode when absent.
    pub allowed: Option<Vec<String>>,
}

impl Default for ShuttleConfig {
    fn default() -> Self {
        Self {
            from_z_m: 0.0,
            to_z_m: 360e-6,
            steps: 11,
            allowed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitConfig {
    /// `paper-silicon` or `fused-silica`; ignored when `model` is given.
    pub preset: String,
    pub model: Option<ResonatorModel>,
    pub temperatures_k: Vec<f64>,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            preset: "paper-silicon".into(),
            model: None,
            temperatures_k: vec![
                4.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0, 125.0, 150.0, 200.0, 250.0, 295.0,
            ],
        }
    }
}

impl CircuitConfig {
    pub fn resonator(&self) -> Result<ResonatorModel> {
        let m = match &self.model {
            Some(m) => m.clone(),
            None => ResonatorModel::preset(&self.preset)?,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermometryConfig {
    pub nbar: f64,
    pub axial_hz: f64,
    pub carrier_rabi_hz: f64,
    pub probe_max_s: f64,
    pub points: usize,
    /// Projection-noise shots per point; 0 for noiseless output.
    pub shots: u64,
}

impl Default for ThermometryConfig {
    fn default() -> Self {
        Self {
            nbar: 0.5,
            axial_hz: 1.069e6,
            carrier_rabi_hz: 100e3,
            probe_max_s: 400e-6,
            points: 41,
            shots: 100,
        }
    }
}

/// Everything a run needs. Keys not listed here are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub layout: LayoutSourceSpec,
    pub drive: DriveConfig,
    pub ion: IonConfig,
    pub dc_volts: VoltageSet,
    pub stray_field_v_per_m: [f64; 3],
    pub seed_position_m: Option<[f64; 3]>,
    pub solver: SolverConfig,
    pub shuttle: ShuttleConfig,
    pub circuit: CircuitConfig,
    pub thermometry: ThermometryConfig,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            layout: LayoutSourceSpec {
                builtin: None,
                file: None,
            },
            drive: DriveConfig::default(),
            ion: IonConfig::default(),
            dc_volts: VoltageSet::new(),
            stray_field_v_per_m: [0.0; 3],
            seed_position_m: None,
            solver: SolverConfig::default(),
            shuttle: ShuttleConfig::default(),
            circuit: CircuitConfig::default(),
            thermometry: ThermometryConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub layout_file: Option<PathBuf>,
    pub builtin_layout: Option<String>,
    pub amplitude_v: Option<f64>,
    pub frequency_hz: Option<f64>,
    pub target_axial_hz: Option<f64>,
    pub bound_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub layout: LayoutSource,
    pub drive: RfDrive,
    pub ion: IonSpecies,
    pub dc_volts: VoltageSet,
    pub stray_field: [f64; 3],
    pub seed_position: Option<[f64; 3]>,
    pub solver: SolveSpec,
    pub shuttle: ShuttleConfig,
    pub circuit: CircuitConfig,
    pub thermometry: ThermometryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        resolve(ConfigFile::default(), &Overrides::default()).expect("defaults are valid")
    }
}

/// Reads `path` (if any), applies `overrides` and validates the result.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let file = match path {
        None => ConfigFile::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidParameter(format!("cannot read config file {}: {e}", p.display())))?;
            parse_config_str(&text)?
        }
    };
    resolve(file, overrides)
}

/// Parses config text; an empty or whitespace-only document means defaults.
pub fn parse_config_str(text: &str) -> Result<ConfigFile> {
    if text.trim().is_empty() {
        return Ok(ConfigFile::default());
    }
    Ok(serde_json::from_str(text)?)
}

fn resolve(file: ConfigFile, o: &Overrides) -> Result<RunConfig> {
    if file.layout.builtin.is_some() && file.layout.file.is_some() {
        return Err(Error::InvalidParameter(
            "conflicting layout sources: give either layout.builtin or layout.file".into(),
        ));
    }
    if o.layout_file.is_some() && o.builtin_layout.is_some() {
        return Err(Error::InvalidParameter(
            "conflicting layout sources: give either --layout-file or --builtin-layout".into(),
        ));
    }
    let layout = if let Some(p) = &o.layout_file {
        LayoutSource::File(p.clone())
    } else if let Some(b) = &o.builtin_layout {
        LayoutSource::Builtin(b.clone())
    } else if let Some(p) = file.layout.file {
        LayoutSource::File(p)
    } else {
        LayoutSource::Builtin(file.layout.builtin.unwrap_or_else(|| "paper".into()))
    };
    if let LayoutSource::File(p) = &layout {
        if !p.exists() {
            return Err(Error::InvalidParameter(format!("layout file {} does not exist", p.display())));
        }
    }

    let amplitude = o.amplitude_v.unwrap_or(file.drive.amplitude_v);
    let frequency = o.frequency_hz.unwrap_or(file.drive.frequency_hz);
    let drive = RfDrive::new(amplitude, angular(frequency))?;
    let ion = IonSpecies::new(
        file.ion.mass_u * ATOMIC_MASS_UNIT,
        file.ion.charge_e * ELEMENTARY_CHARGE,
        file.ion.wavelength_m,
        file.ion.beam_angle_deg.to_radians(),
    )?;

    let s = file.solver;
    let solver = SolveSpec {
        target_axial_omega: angular(o.target_axial_hz.unwrap_or(s.target_axial_hz)),
        target_position: s.target_position_m,
        stray_field: file.stray_field_v_per_m,
        allowed: s.allowed,
        bound: o.bound_v.unwrap_or(s.bound_v),
        regularization: s.regularization,
        pair_mirror: s.pair_mirror,
    };
    if !(solver.bound > 0.0) || !(solver.target_axial_omega >= 0.0) {
        return Err(Error::InvalidParameter("solver bound must be positive and target frequency ≥ 0".into()));
    }
    if file.shuttle.steps < 2 {
        return Err(Error::InvalidParameter("shuttle.steps must be at least 2".into()));
    }
    file.circuit.resonator()?;

    Ok(RunConfig {
        layout,
        drive,
        ion,
        dc_volts: file.dc_volts,
        stray_field: file.stray_field_v_per_m,
        seed_position: file.seed_position_m,
        solver,
        shuttle: file.shuttle,
        circuit: file.circuit,
        thermometry: file.thermometry,
    })
}
