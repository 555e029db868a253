//! Scenario configuration: JSON schema, embedded defaults, validation with
//! field-level error reporting, and the two bundled scenario builders.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::{Activity, ResourceModel};
use crate::error::{Result, SimError};
use crate::learner::{TileGenConfig, TrainerConfig, DEFAULT_WIRE_SIZE_BYTES};
use crate::orbit::GroundStation;
use crate::protocol::{DEFAULT_MIN_EXCHANGE_INTERVAL_S, DEFAULT_MIXING_ALPHA, DEFAULT_RATE_BITS_PER_S};

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// 1 = three ground stations, 2 = geostationary relay.
    pub scenario_id: u8,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_duration_s")]
    pub duration_s: f64,
    #[serde(default = "default_dt_s")]
    pub dt_s: f64,
    #[serde(default = "default_satellite_count")]
    pub satellite_count: u32,
    pub orbit: OrbitConfig,
    /// Fixed inertial sun direction for the whole run.
    #[serde(default = "default_sun_direction")]
    pub sun_direction: [f64; 3],
    #[serde(default = "default_ground_stations")]
    pub ground_stations: Vec<GroundStation>,
    #[serde(default)]
    pub relay: RelayConfig,
    #[serde(default)]
    pub exchange: ExchangeConfig,
    #[serde(default = "default_disaster_site")]
    pub disaster_site: Option<SiteConfig>,
    #[serde(default)]
    pub resources: ResourcesConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub tiles: TilesConfig,
    /// Wall time one training batch occupies on the flight hardware.
    #[serde(default = "default_batch_time_s")]
    pub batch_time_s: f64,
    /// Sampling step used when extracting contact windows.
    #[serde(default = "default_window_sample_dt_s")]
    pub window_sample_dt_s: f64,
}

fn default_seed() -> u64 {
    42
}
fn default_duration_s() -> f64 {
    86_400.0
}
fn default_dt_s() -> f64 {
    10.0
}
fn default_satellite_count() -> u32 {
    8
}
fn default_sun_direction() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}
fn default_batch_time_s() -> f64 {
    2.01
}
fn default_window_sample_dt_s() -> f64 {
    10.0
}

fn default_ground_stations() -> Vec<GroundStation> {
    vec![
        GroundStation {
            name: "matera".to_string(),
            latitude_deg: 40.65,
            longitude_deg: 16.70,
            min_elevation_deg: 5.0,
        },
        GroundStation {
            name: "svalbard".to_string(),
            latitude_deg: 78.23,
            longitude_deg: 15.41,
            min_elevation_deg: 5.0,
        },
        GroundStation {
            name: "maspalomas".to_string(),
            latitude_deg: 27.76,
            longitude_deg: -15.63,
            min_elevation_deg: 5.0,
        },
    ]
}

fn default_disaster_site() -> Option<SiteConfig> {
    Some(SiteConfig::default())
}

/// Shared orbit shape; satellites are phased along one plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    #[serde(default)]
    pub raan_deg: f64,
    /// Per-satellite phase angles; evenly spaced when omitted.
    #[serde(default)]
    pub phases_deg: Option<Vec<f64>>,
}

/// Geostationary relay slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelayConfig {
    pub longitude_deg: f64,
}

impl Default for RelayConfig {
    fn default() -> Self {
        RelayConfig { longitude_deg: 9.0 }
    }
}

/// Model-exchange behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExchangeConfig {
    pub enabled: bool,
    pub rate_bits_per_s: f64,
    pub wire_size_bytes: u64,
    pub mixing_alpha: f64,
    /// Minimum spacing between completed exchanges of one satellite.
    pub min_exchange_interval_s: f64,
    /// Branch priority when a contact window and a site overpass coincide.
    pub exchange_before_inference: bool,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        ExchangeConfig {
            enabled: true,
            rate_bits_per_s: DEFAULT_RATE_BITS_PER_S,
            wire_size_bytes: DEFAULT_WIRE_SIZE_BYTES,
            mixing_alpha: DEFAULT_MIXING_ALPHA,
            min_exchange_interval_s: DEFAULT_MIN_EXCHANGE_INTERVAL_S,
            exchange_before_inference: true,
        }
    }
}

/// Evaluation overpass target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SiteConfig {
    pub name: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub min_elevation_deg: f64,
}

impl Default for SiteConfig {
    fn default() -> Self {
        SiteConfig {
            name: "ylitornio".to_string(),
            latitude_deg: 66.3,
            longitude_deg: 23.7,
            min_elevation_deg: 10.0,
        }
    }
}

/// Battery/thermal coefficients plus the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResourcesConfig {
    pub battery_capacity_j: f64,
    pub charge_rate_w: f64,
    pub activity_power_w: BTreeMap<Activity, f64>,
    pub activity_heat_c_per_s: BTreeMap<Activity, f64>,
    pub cooling_coeff_per_s: f64,
    pub ambient_c: f64,
    pub initial_soc: f64,
    pub initial_temperature_c: f64,
}

impl Default for ResourcesConfig {
    fn default() -> Self {
        let model = ResourceModel::default();
        ResourcesConfig {
            battery_capacity_j: model.battery_capacity_j,
            charge_rate_w: model.charge_rate_w,
            activity_power_w: model.activity_power_w,
            activity_heat_c_per_s: model.activity_heat_c_per_s,
            cooling_coeff_per_s: model.cooling_coeff_per_s,
            ambient_c: model.ambient_c,
            initial_soc: 1.0,
            initial_temperature_c: 0.0,
        }
    }
}

impl ResourcesConfig {
    pub fn model(&self) -> ResourceModel {
        ResourceModel {
            battery_capacity_j: self.battery_capacity_j,
            charge_rate_w: self.charge_rate_w,
            activity_power_w: self.activity_power_w.clone(),
            activity_heat_c_per_s: self.activity_heat_c_per_s.clone(),
            cooling_coeff_per_s: self.cooling_coeff_per_s,
            ambient_c: self.ambient_c,
        }
    }
}

/// Synthetic data shape and shard sizing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TilesConfig {
    pub tile_size: usize,
    pub tiles_per_shard: usize,
    /// Size of the shared held-out evaluation set (a reserved shard).
    pub eval_tiles: usize,
    pub band_background: f64,
    pub water_green_boost: f64,
    pub water_nir_drop: f64,
    pub noise_std: f64,
    pub water_fraction_min: f64,
    pub water_fraction_max: f64,
    /// Magnitude of the per-shard red-band water response. Even shards get
    /// `+s`, odd shards `-s`, and the evaluation shard mixes both, so the
    /// shards are genuinely non-iid and the shared model has something to
    /// gain from parameter exchange.
    pub shard_turbidity: f64,
}

impl Default for TilesConfig {
    fn default() -> Self {
        let gen = TileGenConfig::default();
        TilesConfig {
            // The simulation default trades tile area for run speed; the
            // standalone generator default stays at 256.
            tile_size: 32,
            tiles_per_shard: 230,
            eval_tiles: 64,
            band_background: gen.band_background,
            water_green_boost: gen.water_green_boost,
            water_nir_drop: gen.water_nir_drop,
            noise_std: gen.noise_std,
            water_fraction_min: gen.water_fraction_min,
            water_fraction_max: gen.water_fraction_max,
            shard_turbidity: 0.15,
        }
    }
}

impl TilesConfig {
    pub fn gen_config(&self) -> TileGenConfig {
        TileGenConfig {
            tile_size: self.tile_size,
            band_background: self.band_background,
            water_green_boost: self.water_green_boost,
            water_nir_drop: self.water_nir_drop,
            noise_std: self.noise_std,
            water_fraction_min: self.water_fraction_min,
            water_fraction_max: self.water_fraction_max,
            water_red_response_choices: vec![0.0],
        }
    }

    /// Generator config for one training shard: a fixed signed turbidity
    /// response, alternating across shards.
    pub fn shard_gen_config(&self, shard_id: u64) -> TileGenConfig {
        let sign = if shard_id.is_multiple_of(2) { 1.0 } else { -1.0 };
        TileGenConfig {
            water_red_response_choices: vec![sign * self.shard_turbidity],
            ..self.gen_config()
        }
    }

    /// Generator config for the shared evaluation shard: per-tile mixture
    /// of both turbidity polarities.
    pub fn eval_gen_config(&self) -> TileGenConfig {
        TileGenConfig {
            water_red_response_choices: vec![-self.shard_turbidity, self.shard_turbidity],
            ..self.gen_config()
        }
    }
}

impl ScenarioConfig {
    /// Table-driven scenario builder: 1 = ground stations at 786 km / 98.6°,
    /// 2 = relay at 450 km / 97.4°.
    pub fn scenario(id: u8) -> Result<Self> {
        let orbit = match id {
            1 => OrbitConfig {
                altitude_km: 786.0,
                inclination_deg: 98.6,
                raan_deg: 0.0,
                phases_deg: None,
            },
            2 => OrbitConfig {
                altitude_km: 450.0,
                inclination_deg: 97.4,
                raan_deg: 0.0,
                phases_deg: None,
            },
            other => return Err(SimError::UnknownScenario(other)),
        };
        Ok(ScenarioConfig {
            scenario_id: id,
            seed: default_seed(),
            duration_s: default_duration_s(),
            dt_s: default_dt_s(),
            satellite_count: default_satellite_count(),
            orbit,
            sun_direction: default_sun_direction(),
            ground_stations: default_ground_stations(),
            relay: RelayConfig::default(),
            exchange: ExchangeConfig::default(),
            disaster_site: default_disaster_site(),
            resources: ResourcesConfig::default(),
            trainer: TrainerConfig::default(),
            tiles: TilesConfig::default(),
            batch_time_s: default_batch_time_s(),
            window_sample_dt_s: default_window_sample_dt_s(),
        })
    }

    pub fn scenario1() -> Self {
        Self::scenario(1).expect("scenario 1 is defined")
    }

    pub fn scenario2() -> Self {
        Self::scenario(2).expect("scenario 2 is defined")
    }

    /// Load, fill defaults, and validate a config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::config(&path.display().to_string(), e.to_string()))?;
        let config: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| SimError::config(&path.display().to_string(), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// The normalized config with every default filled, as pretty JSON.
    pub fn effective_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn semi_major_axis_km(&self) -> f64 {
        crate::orbit::EARTH_RADIUS_KM + self.orbit.altitude_km
    }

    /// Phase angle of each satellite, evenly spaced unless configured.
    pub fn phases_deg(&self) -> Vec<f64> {
        match &self.orbit.phases_deg {
            Some(p) => p.clone(),
            None => (0..self.satellite_count)
                .map(|i| 360.0 * i as f64 / self.satellite_count as f64)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scenario_id == 1 || self.scenario_id == 2) {
            return Err(SimError::UnknownScenario(self.scenario_id));
        }
        if !(self.duration_s >= 0.0) {
            return Err(SimError::config("duration_s", "must be non-negative"));
        }
        if !(self.dt_s > 0.0) {
            return Err(SimError::config("dt_s", "must be positive"));
        }
        if self.satellite_count < 1 {
            return Err(SimError::config("satellite_count", "must be at least 1"));
        }
        if !(self.orbit.altitude_km > 0.0) {
            return Err(SimError::config(
                "orbit.altitude_km",
                format!("altitude {} km must be positive", self.orbit.altitude_km),
            ));
        }
        if !(0.0..=180.0).contains(&self.orbit.inclination_deg) {
            return Err(SimError::config(
                "orbit.inclination_deg",
                "must lie in [0, 180]",
            ));
        }
        if let Some(phases) = &self.orbit.phases_deg {
            if phases.len() != self.satellite_count as usize {
                return Err(SimError::config(
                    "orbit.phases_deg",
                    format!(
                        "got {} phases for {} satellites",
                        phases.len(),
                        self.satellite_count
                    ),
                ));
            }
        }
        let sun = self.sun_direction;
        let sun_norm = (sun[0] * sun[0] + sun[1] * sun[1] + sun[2] * sun[2]).sqrt();
        if !sun_norm.is_finite() || sun_norm < 1e-9 {
            return Err(SimError::config("sun_direction", "must be a non-zero vector"));
        }
        if self.scenario_id == 1 && self.ground_stations.is_empty() {
            return Err(SimError::config(
                "ground_stations",
                "scenario 1 needs at least one ground station",
            ));
        }
        for (i, station) in self.ground_stations.iter().enumerate() {
            station
                .validate()
                .map_err(|e| SimError::config(&format!("ground_stations[{i}]"), e.to_string()))?;
        }
        if !self.relay.longitude_deg.is_finite() {
            return Err(SimError::config("relay.longitude_deg", "must be finite"));
        }
        if !(self.exchange.rate_bits_per_s > 0.0) {
            return Err(SimError::config("exchange.rate_bits_per_s", "must be positive"));
        }
        if self.exchange.wire_size_bytes == 0 {
            return Err(SimError::config("exchange.wire_size_bytes", "must be positive"));
        }
        if !(self.exchange.mixing_alpha > 0.0 && self.exchange.mixing_alpha <= 1.0) {
            return Err(SimError::config("exchange.mixing_alpha", "must lie in (0, 1]"));
        }
        if !(self.exchange.min_exchange_interval_s >= 0.0) {
            return Err(SimError::config(
                "exchange.min_exchange_interval_s",
                "must be non-negative",
            ));
        }
        if let Some(site) = &self.disaster_site {
            if site.latitude_deg.abs() > 90.0 {
                return Err(SimError::config(
                    "disaster_site.latitude_deg",
                    "must lie in [-90, 90]",
                ));
            }
            if !(0.0..=90.0).contains(&site.min_elevation_deg) {
                return Err(SimError::config(
                    "disaster_site.min_elevation_deg",
                    "must lie in [0, 90]",
                ));
            }
        }
        self.resources
            .model()
            .validate()
            .map_err(|e| SimError::config("resources", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.resources.initial_soc) {
            return Err(SimError::config("resources.initial_soc", "must lie in [0, 1]"));
        }
        if !self.resources.initial_temperature_c.is_finite() {
            return Err(SimError::config(
                "resources.initial_temperature_c",
                "must be finite",
            ));
        }
        self.trainer
            .validate()
            .map_err(|e| SimError::config("trainer", e.to_string()))?;
        self.tiles
            .gen_config()
            .validate()
            .map_err(|e| SimError::config("tiles", e.to_string()))?;
        if !(self.tiles.shard_turbidity >= 0.0) || !self.tiles.shard_turbidity.is_finite() {
            return Err(SimError::config(
                "tiles.shard_turbidity",
                "must be a non-negative finite offset",
            ));
        }
        if self.tiles.tiles_per_shard < 1 {
            return Err(SimError::config("tiles.tiles_per_shard", "must be at least 1"));
        }
        if self.tiles.eval_tiles < 1 {
            return Err(SimError::config("tiles.eval_tiles", "must be at least 1"));
        }
        if !(self.batch_time_s > 0.0) {
            return Err(SimError::config("batch_time_s", "must be positive"));
        }
        if !(self.window_sample_dt_s > 0.0) {
            return Err(SimError::config("window_sample_dt_s", "must be positive"));
        }
        Ok(())
    }
}
