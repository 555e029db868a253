//! Per-activity battery and thermal bookkeeping, and the standby decision
//! thresholds.
//!
//! The battery is a linear charge/discharge integrator clamped to [0, 1];
//! the thermal model is a single node with activity heating and Newtonian
//! cooling toward ambient, which gives the exact steady state
//! `ambient + heat/cooling` used as a test oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// What a satellite spends a step doing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Training,
    Inference,
    Exchanging,
    Standby,
}

impl Activity {
    pub const ALL: [Activity; 4] = [
        Activity::Training,
        Activity::Inference,
        Activity::Exchanging,
        Activity::Standby,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activity::Training => "training",
            Activity::Inference => "inference",
            Activity::Exchanging => "exchanging",
            Activity::Standby => "standby",
        }
    }
}

/// Battery fraction below which a satellite stands by.
pub const SOC_STANDBY_THRESHOLD: f64 = 0.2;
/// Temperature above which a satellite stands by, °C.
pub const TEMPERATURE_STANDBY_THRESHOLD_C: f64 = 40.0;

/// Battery state of charge and the one-node temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceState {
    pub soc: f64,
    pub temperature_c: f64,
}

/// Power and thermal coefficients for one satellite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceModel {
    pub battery_capacity_j: f64,
    /// Panel input while sunlit, watts.
    pub charge_rate_w: f64,
    pub activity_power_w: BTreeMap<Activity, f64>,
    pub activity_heat_c_per_s: BTreeMap<Activity, f64>,
    pub cooling_coeff_per_s: f64,
    pub ambient_c: f64,
}

impl Default for ResourceModel {
    fn default() -> Self {
        // Exchanging draws the same as standby so that communication costs
        // link time rather than training energy.
        let power = [
            (Activity::Training, 30.0),
            (Activity::Exchanging, 2.0),
            (Activity::Inference, 15.0),
            (Activity::Standby, 2.0),
        ];
        let heat = [
            (Activity::Training, 0.02),
            (Activity::Exchanging, 0.005),
            (Activity::Inference, 0.005),
            (Activity::Standby, 0.005),
        ];
        ResourceModel {
            battery_capacity_j: 162_000.0,
            charge_rate_w: 10.0,
            activity_power_w: power.into_iter().collect(),
            activity_heat_c_per_s: heat.into_iter().collect(),
            cooling_coeff_per_s: 5e-4,
            ambient_c: 0.0,
        }
    }
}

impl ResourceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.battery_capacity_j > 0.0) {
            return Err(SimError::InvalidInput(
                "battery capacity must be positive".to_string(),
            ));
        }
        if self.charge_rate_w < 0.0 || self.cooling_coeff_per_s < 0.0 {
            return Err(SimError::InvalidInput(
                "rates must be non-negative".to_string(),
            ));
        }
        for activity in Activity::ALL {
            let p = self.power_w(activity)?;
            let h = self.heat_c_per_s(activity)?;
            if p < 0.0 || h < 0.0 {
                return Err(SimError::InvalidInput(format!(
                    "negative rate for activity {}",
                    activity.name()
                )));
            }
        }
        Ok(())
    }

    pub fn power_w(&self, activity: Activity) -> Result<f64> {
        self.activity_power_w
            .get(&activity)
            .copied()
            .ok_or(SimError::MissingActivityRate(activity.name()))
    }

    pub fn heat_c_per_s(&self, activity: Activity) -> Result<f64> {
        self.activity_heat_c_per_s
            .get(&activity)
            .copied()
            .ok_or(SimError::MissingActivityRate(activity.name()))
    }
}

/// Advance the battery over `dt` seconds of the given activity.
pub fn update_power(
    state: ResourceState,
    model: &ResourceModel,
    activity: Activity,
    in_eclipse: bool,
    dt: f64,
) -> Result<ResourceState> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidInput(format!("dt {dt} must be positive")));
    }
    let charge = if in_eclipse { 0.0 } else { model.charge_rate_w };
    let drain = model.power_w(activity)?;
    let soc = (state.soc + (charge - drain) * dt / model.battery_capacity_j).clamp(0.0, 1.0);
    Ok(ResourceState { soc, ..state })
}

/// Advance the one-node temperature over `dt` seconds of the given activity.
pub fn update_temperature(
    state: ResourceState,
    model: &ResourceModel,
    activity: Activity,
    dt: f64,
) -> Result<ResourceState> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidInput(format!("dt {dt} must be positive")));
    }
    let heat = model.heat_c_per_s(activity)?;
    let temperature_c = state.temperature_c
        + (heat - model.cooling_coeff_per_s * (state.temperature_c - model.ambient_c)) * dt;
    Ok(ResourceState {
        temperature_c,
        ..state
    })
}

/// Standby decision: activities other than standby are permitted only while
/// the battery holds at least 0.2 and the node stays at or below 40 °C.
/// Equality permits activity; the thresholds themselves are safe.
pub fn permits_activity(state: ResourceState) -> bool {
    state.soc >= SOC_STANDBY_THRESHOLD && state.temperature_c <= TEMPERATURE_STANDBY_THRESHOLD_C
}
