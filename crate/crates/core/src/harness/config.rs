use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::catalog::{select_designs, FACILITY_H, FACILITY_TEMPERATURE};
use super::sensor::SensorModel;
use crate::error::{Error, Result};
use crate::material::{MaterialModel, SorptionCurve, TransportCoefficients, GAS_CONSTANT_VAPOR};
use crate::oed::SearchOptions;
use crate::sensitivity::DEFAULT_SIGMA_U;
use crate::solver::{BoundaryDesign, Grid1D, HumidityStep, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    /// Ascending coefficients of the sorption curve, kg/m³.
    pub sorption: Vec<f64>,
    pub d0: f64,
    pub d1: f64,
    pub a: f64,
    pub temperature: f64,
    pub gas_constant_rv: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        let m = MaterialModel::wood_fibre();
        MaterialSection {
            sorption: m.sorption.coefficients().to_vec(),
            d0: m.transport.d0,
            d1: m.transport.d1,
            a: m.transport.a,
            temperature: m.temperature,
            gas_constant_rv: GAS_CONSTANT_VAPOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub n_cells: usize,
    pub length: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Output times per scenario.
    pub n_times: usize,
    pub position_step: f64,
    /// Measurement standard deviation for sensitivities, relative humidity.
    pub sigma_u: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let g = Grid1D::facility();
        let t = Tolerances::default();
        NumericsSection {
            n_cells: g.n_cells,
            length: g.length,
            rel_tol: t.rel,
            abs_tol: t.abs,
            n_times: 2001,
            position_step: 0.01,
            sigma_u: DEFAULT_SIGMA_U,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineDesign {
    pub id: String,
    pub initial_phi: f64,
    pub schedule: Vec<HumidityStep>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_temperature")]
    pub ambient_temperature: f64,
}

fn default_h() -> f64 {
    FACILITY_H
}

fn default_temperature() -> f64 {
    FACILITY_TEMPERATURE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    /// Catalog filter, e.g. `"single"`, `"S2,M16"`, `"all"`.
    pub select: String,
    pub inline: Vec<InlineDesign>,
}

impl Default for DesignSection {
    fn default() -> Self {
        DesignSection { select: "all".into(), inline: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    /// Sensor position, m.
    pub x: f64,
    pub noise_sigma: f64,
    pub response_time: f64,
    pub sampling_interval: f64,
    pub seed: u64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let m = SensorModel::default();
        SensorSection {
            x: 0.05,
            noise_sigma: m.noise_sigma,
            response_time: m.response_time,
            sampling_interval: m.sampling_interval,
            seed: m.seed,
        }
    }
}

impl SensorSection {
    pub fn model(&self) -> SensorModel {
        SensorModel {
            noise_sigma: self.noise_sigma,
            response_time: self.response_time,
            sampling_interval: self.sampling_interval,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from(".") }
    }
}

/// Scenario file (TOML). Every section and key is optional; omitted values take
/// the facility defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub material: MaterialSection,
    pub numerics: NumericsSection,
    pub design: DesignSection,
    pub sensor: SensorSection,
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.material_model()?;
        self.grid()?;
        self.inline_designs()?;
        self.designs(None)?;
        self.sensor.model().validate()?;
        Ok(())
    }

    pub fn material_model(&self) -> Result<MaterialModel> {
        let m = &self.material;
        let mut model = MaterialModel::new(
            SorptionCurve::new(m.sorption.clone())?,
            TransportCoefficients::new(m.d0, m.d1, m.a)?,
            m.temperature,
        )?;
        model.gas_constant_rv = m.gas_constant_rv;
        model.validate()?;
        Ok(model)
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.numerics.n_cells, self.numerics.length)
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rel: self.numerics.rel_tol, abs: self.numerics.abs_tol }
    }

    pub fn search_options(&self) -> Result<SearchOptions> {
        Ok(SearchOptions {
            grid: self.grid()?,
            tolerances: self.tolerances(),
            n_times: self.numerics.n_times,
            position_step: self.numerics.position_step,
            sigma_u: self.numerics.sigma_u,
        })
    }

    fn inline_designs(&self) -> Result<Vec<BoundaryDesign>> {
        self.design
            .inline
            .iter()
            .map(|d| {
                let design = BoundaryDesign {
                    id: d.id.clone(),
                    initial_phi: d.initial_phi,
                    schedule: d.schedule.clone(),
                    h: d.h,
                    ambient_temperature: d.ambient_temperature,
                };
                design.validate()?;
                Ok(design)
            })
            .collect()
    }

    /// Inline designs matching `id` first, then the catalog.
    pub fn find_design(&self, id: &str) -> Result<BoundaryDesign> {
        if let Some(d) = self.inline_designs()?.into_iter().find(|d| d.id == id) {
            return Ok(d);
        }
        super::catalog::find_design(id)
    }

    /// Designs selected by `filter` (or the config's own selection when `None`).
    /// Inline designs are referenced by id or included with `inline`.
    pub fn designs(&self, filter: Option<&str>) -> Result<Vec<BoundaryDesign>> {
        let filter = filter.unwrap_or(&self.design.select);
        let inline = self.inline_designs()?;
        let mut out: Vec<BoundaryDesign> = Vec::new();
        for token in filter.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let found: Vec<BoundaryDesign> = if token == "inline" {
                inline.clone()
            } else if let Some(d) = inline.iter().find(|d| d.id == token) {
                vec![d.clone()]
            } else {
                select_designs(token)?
            };
            for d in found {
                if !out.iter().any(|o| o.id == d.id) {
                    out.push(d);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::domain("empty design selection"));
        }
        Ok(out)
    }
}
