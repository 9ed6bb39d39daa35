//! Run configuration.
//!
//! Configs are TOML documents; lengths are in nanometres and converted to
//! metres when the grid is built. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundaries::CpmlParams;
use crate::geometry::UnitCellParams;
use crate::materials::DrudeParams;
use crate::monitors::{FluxMode, FrequencyList};
use crate::sources::{Polarization, PulseSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Isolated lower pair in open space, TFSF excitation along the strips,
    /// E_y probe near a strip end.
    NearFieldPair,
    /// Periodic three-strip cell at normal incidence; transmission against
    /// an empty-cell reference run.
    PeriodicTransmission,
    /// Periodic cell run recording E_y maps on the lower-pair plane.
    FieldMap,
    /// Empty periodic cell only.
    Reference,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::NearFieldPair => "near_field_pair",
            ScenarioKind::PeriodicTransmission => "periodic_transmission",
            ScenarioKind::FieldMap => "field_map",
            ScenarioKind::Reference => "reference",
        }
    }

    pub fn is_periodic(self) -> bool {
        !matches!(self, ScenarioKind::NearFieldPair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SilverConfig {
    pub omega_p_rad_s: f64,
    pub gamma_rad_s: f64,
    pub eps_inf: f64,
}

impl Default for SilverConfig {
    fn default() -> Self {
        let p = DrudeParams::SILVER;
        Self {
            omega_p_rad_s: p.omega_p,
            gamma_rad_s: p.gamma,
            eps_inf: p.eps_inf,
        }
    }
}

impl SilverConfig {
    pub fn drude(&self) -> DrudeParams {
        DrudeParams {
            eps_inf: self.eps_inf,
            omega_p: self.omega_p_rad_s,
            gamma: self.gamma_rad_s,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub silver: SilverConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub pml_cells: usize,
    pub grading_order: f64,
    /// Multiplier on the optimal `0.8 (m + 1) / (eta0 dx)` conductivity.
    pub sigma_scale: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        let p = CpmlParams::default();
        Self {
            pml_cells: p.thickness,
            grading_order: p.grading_order,
            sigma_scale: p.sigma_scale,
        }
    }
}

impl BoundaryConfig {
    pub fn cpml(&self, enabled: [bool; 3]) -> CpmlParams {
        CpmlParams {
            thickness: self.pml_cells,
            grading_order: self.grading_order,
            sigma_scale: self.sigma_scale,
            enabled,
            ..CpmlParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub polarization: Polarization,
    pub lambda0_nm: f64,
    pub band_nm: [f64; 2],
    pub amplitude: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            polarization: Polarization::S,
            lambda0_nm: 700.0,
            band_nm: [600.0, 800.0],
            amplitude: 1.0,
        }
    }
}

impl SourceConfig {
    pub fn pulse(&self) -> Result<PulseSpec> {
        PulseSpec::for_band(self.lambda0_nm, self.band_nm, self.amplitude)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution_nm: f64,
    pub courant_factor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution_nm: 5.0,
            courant_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Spectrum range, nm.
    pub range_nm: [f64; 2],
    pub points: usize,
    /// Extra wavelengths whose field maps are always plotted and scored.
    pub map_wavelengths_nm: Vec<f64>,
    /// Distance of the near-field probe beyond the strip end facet, nm.
    pub probe_offset_nm: f64,
    pub flux_mode: FluxMode,
    /// Absolute prominence threshold; defaults to 5% of the spectrum range.
    pub prominence: Option<f64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            range_nm: [600.0, 800.0],
            points: 201,
            map_wavelengths_nm: vec![687.2],
            probe_offset_nm: 10.0,
            flux_mode: FluxMode::PlaneAverage,
            prominence: None,
        }
    }
}

impl MonitorConfig {
    pub fn frequencies(&self) -> Result<FrequencyList> {
        FrequencyList::uniform(self.range_nm[0], self.range_nm[1], self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Stop once total field energy falls below this fraction of its peak.
    pub decay_threshold: f64,
    pub max_steps: u64,
    pub decay_check_interval: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` defers to the environment/CLI default.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            decay_threshold: 1e-5,
            max_steps: 200_000,
            decay_check_interval: 500,
            output_dir: PathBuf::from("out"),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub geometry: UnitCellParams,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub boundaries: BoundaryConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl SimulationConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            geometry: UnitCellParams::default(),
            material: MaterialConfig::default(),
            boundaries: BoundaryConfig::default(),
            source: SourceConfig::default(),
            grid: GridConfig::default(),
            monitors: MonitorConfig::default(),
            run: RunConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.resolution_nm > 0.0 && g.resolution_nm.is_finite()) {
            return Err(Error::Configuration(format!("resolution {} nm must be positive", g.resolution_nm)));
        }
        if !(g.courant_factor > 0.0 && g.courant_factor <= 1.0) {
            return Err(Error::Configuration(format!(
                "courant factor {} must lie in (0, 1]",
                g.courant_factor
            )));
        }
        self.geometry.validate()?;
        self.material.silver.drude().validate()?;
        let enabled = if self.scenario.is_periodic() {
            [false, false, true]
        } else {
            [true; 3]
        };
        let periodic = if self.scenario.is_periodic() {
            crate::boundaries::PeriodicSpec::transverse()
        } else {
            crate::boundaries::PeriodicSpec::none()
        };
        self.boundaries.cpml(enabled).validate(&periodic)?;
        let pulse = self.source.pulse()?;
        let freqs = self.monitors.frequencies()?;
        freqs.check_band(&pulse)?;
        if self.monitors.points < 5 {
            return Err(Error::Configuration("at least 5 spectrum points are required".into()));
        }
        if !(self.monitors.probe_offset_nm > 0.0) {
            return Err(Error::Configuration("probe offset must be positive".into()));
        }
        let r = &self.run;
        if !(r.decay_threshold > 0.0 && r.decay_threshold < 1.0) {
            return Err(Error::Configuration(format!(
                "decay threshold {} must lie in (0, 1)",
                r.decay_threshold
            )));
        }
        if r.max_steps == 0 || r.decay_check_interval == 0 {
            return Err(Error::Configuration("max_steps and decay_check_interval must be positive".into()));
        }
        if r.workers == Some(0) {
            return Err(Error::Configuration("workers must be at least 1".into()));
        }
        if self.scenario.is_periodic() {
            let d = g.resolution_nm;
            for (name, period) in [("period_x", self.geometry.period_x), ("period_y", self.geometry.period_y)] {
                let cells = period / d;
                if (cells - cells.round()).abs() > 1e-9 || (cells.round() as i64) % 2 != 0 {
                    return Err(Error::Configuration(format!(
                        "{name} = {period} nm must be an even number of {d} nm cells"
                    )));
                }
            }
            self.geometry.check_fits(2.0 * d, self.scenario != ScenarioKind::Reference)?;
        }
        Ok(())
    }

    /// SHA-256 of the physics-relevant settings (output path and worker
    /// count excluded), hex encoded.
    pub fn config_hash(&self) -> String {
        let mut physics = self.clone();
        physics.run.output_dir = PathBuf::new();
        physics.run.workers = None;
        let value = serde_json::to_value(&physics).expect("config serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
