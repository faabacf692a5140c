//! TOML run configuration.
//!
//! Every key is optional; omitted keys take the reference scenario values.
//! Powers are given in dBm here and converted to watts when building
//! [`SystemParams`]; nothing past this module sees dBm.
//!
//! ```toml
//! n_irs = 6
//! power_dbm = 30.0
//! schemes = ["proposed", "random_location"]
//! n_seeds = 20
//! eve_area = [50.0, 98.0, 5.0, 13.0]   # x_min, x_max, y_min, y_max
//!
//! [sweep]
//! axis = "n_irs"
//! values = [4, 6, 8]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use irs_secrecy::outage::QuantileMethod;
use irs_secrecy::pipeline::{PipelineSettings, SchemeTag};
use irs_secrecy::{Rect, SystemParams, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
    Invalid { field: &'static str, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Invalid { field, reason } => write!(f, "invalid {field}: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    PowerDbm,
    NIrs,
    EveAreaIndex,
    RicianK,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "none" => Ok(SweepAxis::None),
            "power_dbm" => Ok(SweepAxis::PowerDbm),
            "n_irs" => Ok(SweepAxis::NIrs),
            "eve_area_index" => Ok(SweepAxis::EveAreaIndex),
            "rician_k" => Ok(SweepAxis::RicianK),
            _ => Err(invalid("sweep.axis", format!("unknown axis {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileChoice {
    #[default]
    Analytic,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n_tx: usize,
    pub n_irs: usize,
    pub rician_k: f64,
    pub rho_ai: f64,
    pub rho_iu: f64,
    pub noise_dbm: f64,
    pub power_dbm: f64,
    pub p_out: f64,
    pub carrier_hz: f64,
    pub element_spacing_fraction: f64,
    pub bob: [f64; 2],
    pub eve: [f64; 2],
    /// `[x_min, x_max, y_min, y_max]`.
    pub irs_area: [f64; 4],
    /// Suspicious Eve area; when set, runs are max-min over it.
    pub eve_area: Option<[f64; 4]>,
    /// Areas addressed by the `eve_area_index` sweep axis.
    pub eve_areas: Vec<[f64; 4]>,
    pub seed: u64,
    pub n_seeds: usize,
    pub schemes: Vec<String>,
    pub quantile_method: QuantileChoice,
    pub mc_samples: usize,
    /// Grid step in meters for the global search and max-min placements.
    pub grid_step: f64,
    pub verify_draws: usize,
    /// Record wall time per row; with `false` the `wall_ms` column is 0 and
    /// the CSV is byte-identical across runs.
    pub timing: bool,
    pub output: Option<PathBuf>,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_tx: 4,
            n_irs: 5,
            rician_k: 2.0,
            rho_ai: 2.2,
            rho_iu: 3.0,
            noise_dbm: -95.0,
            power_dbm: 30.0,
            p_out: 0.05,
            carrier_hz: 2.4e9,
            element_spacing_fraction: 0.5,
            bob: [100.0, 15.0],
            eve: [95.0, 13.0],
            irs_area: [0.0, 105.0, 20.0, 30.0],
            eve_area: None,
            eve_areas: [-40.0, -20.0, 0.0, 20.0]
                .iter()
                .map(|dx| [50.0 + dx, 98.0 + dx, 5.0, 13.0])
                .collect(),
            seed: 0,
            n_seeds: 20,
            schemes: SchemeTag::ALL.iter().map(|s| s.as_str().to_string()).collect(),
            quantile_method: QuantileChoice::Analytic,
            mc_samples: 1_000_000,
            grid_step: 0.5,
            verify_draws: 10_000,
            timing: true,
            output: None,
            sweep: SweepConfig::default(),
        }
    }
}

fn rect(a: &[f64; 4]) -> Rect {
    Rect::new(a[0], a[1], a[2], a[3])
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scheme_tags(&self) -> Result<Vec<SchemeTag>, ConfigError> {
        self.schemes
            .iter()
            .map(|s| s.parse().map_err(|_| invalid("schemes", format!("unknown scheme {s:?}"))))
            .collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|i| self.seed + i).collect()
    }

    /// Library parameters; `eve_area` is carried over as-is.
    pub fn params(&self) -> SystemParams {
        SystemParams {
            n_tx: self.n_tx,
            n_irs: self.n_irs,
            rician_k: self.rician_k,
            rho_ai: self.rho_ai,
            rho_iu: self.rho_iu,
            noise_power: dbm_to_watts(self.noise_dbm),
            tx_power: dbm_to_watts(self.power_dbm),
            p_out: self.p_out,
            carrier_hz: self.carrier_hz,
            irs_area: rect(&self.irs_area),
            bob_loc: Vec2::new(self.bob[0], self.bob[1]),
            eve_loc: Vec2::new(self.eve[0], self.eve[1]),
            eve_area: self.eve_area.as_ref().map(rect),
            element_spacing_fraction: self.element_spacing_fraction,
        }
    }

    pub fn settings(&self) -> PipelineSettings {
        PipelineSettings {
            quantile_method: match self.quantile_method {
                QuantileChoice::Analytic => QuantileMethod::Analytic,
                QuantileChoice::Mc => QuantileMethod::MonteCarlo {
                    samples: self.mc_samples,
                    seed: self.seed,
                },
            },
            grid_step: self.grid_step,
            verify_draws: self.verify_draws,
            ..PipelineSettings::default()
        }
    }

    /// Parameters for one sweep value.
    pub fn params_at(&self, value: f64) -> Result<SystemParams, ConfigError> {
        let mut c = self.clone();
        match self.sweep.axis {
            SweepAxis::None => {}
            SweepAxis::PowerDbm => c.power_dbm = value,
            SweepAxis::RicianK => c.rician_k = value,
            SweepAxis::NIrs => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(invalid("sweep.values", format!("n_irs value {value} is not a positive integer")));
                }
                c.n_irs = value as usize;
            }
            SweepAxis::EveAreaIndex => {
                let i = value as usize;
                if value < 0.0 || value.fract() != 0.0 || i >= self.eve_areas.len() {
                    return Err(invalid("sweep.values", format!("no eve_areas entry {value}")));
                }
                c.eve_area = Some(self.eve_areas[i]);
            }
        }
        let p = c.params();
        p.validate().map_err(|e| invalid("params", e.to_string()))?;
        Ok(p)
    }

    /// Sweep values, or a single `0` when there is no sweep axis.
    pub fn sweep_values(&self) -> Vec<f64> {
        match self.sweep.axis {
            SweepAxis::None => vec![0.0],
            _ => self.sweep.values.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sweep.axis != SweepAxis::None && self.sweep.values.is_empty() {
            return Err(invalid("sweep.values", "must be nonempty when an axis is set"));
        }
        if self.n_seeds == 0 {
            return Err(invalid("n_seeds", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "must list at least one scheme"));
        }
        self.scheme_tags()?;
        if !(self.grid_step > 0.0) {
            return Err(invalid("grid_step", "must be positive"));
        }
        if self.verify_draws == 0 {
            return Err(invalid("verify_draws", "must be positive"));
        }
        if self.quantile_method == QuantileChoice::Mc && self.mc_samples == 0 {
            return Err(invalid("mc_samples", "must be positive"));
        }
        for a in self.eve_areas.iter().chain(self.eve_area.iter()) {
            if !rect(a).is_valid() {
                return Err(invalid("eve_area", format!("{a:?} needs min <= max on both axes")));
            }
        }
        self.params().validate().map_err(|e| match e {
            irs_secrecy::Error::InvalidParam { field, reason } => ConfigError::Invalid { field, reason },
            other => invalid("params", other.to_string()),
        })?;
        for v in self.sweep_values() {
            self.params_at(v)?;
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    RunConfig::from_toml(&text)
}
