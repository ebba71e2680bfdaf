//! Log-distance path-loss RSSI synthesis.
//!
//! Received power falls off with log-distance, loses a fixed amount per
//! attenuating wall crossed on the same floor, loses a slab penalty per floor
//! of separation, and carries Gaussian noise. No multipath or fading beyond
//! that: the model only has to make fingerprints look like fingerprints.

use atlas_core::geom::segments_intersect;
use atlas_core::{BeaconId, Environment, Position, RSSI_MAX_DBM, RSSI_MIN_DBM};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::SimError;

/// A beacon whose noiseless RSSI falls below this is not discovered at all.
pub const IN_RANGE_FLOOR_DBM: f64 = -100.0;

/// Distances below this clamp to it, keeping the log term finite at d = 0.
pub const MIN_PATH_DISTANCE_M: f64 = 0.1;

/// Tunables of the propagation model. Defaults are calibrated so that two
/// beacons cover a 40-50 m² room with clear weight margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossParams {
    /// Received power one meter from a beacon, in dBm.
    pub rssi_at_1m: f64,
    /// Log-distance falloff exponent; 2.0 is free space, indoor is higher.
    pub path_loss_exponent: f64,
    /// Standard deviation of the Gaussian measurement noise, in dB.
    pub noise_sigma: f64,
    /// Vertical distance between adjacent floors, in meters.
    pub floor_height_m: f64,
    /// Slab penalty per floor of separation, in dB.
    pub floor_attenuation_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            rssi_at_1m: -45.0,
            path_loss_exponent: 2.5,
            noise_sigma: 2.0,
            floor_height_m: 3.0,
            floor_attenuation_db: 30.0,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let checks: [(&'static str, f64, bool); 5] = [
            (
                "rssi_at_1m",
                self.rssi_at_1m,
                (-70.0..=-30.0).contains(&self.rssi_at_1m),
            ),
            (
                "path_loss_exponent",
                self.path_loss_exponent,
                (1.5..=4.5).contains(&self.path_loss_exponent),
            ),
            ("noise_sigma", self.noise_sigma, self.noise_sigma >= 0.0),
            (
                "floor_height_m",
                self.floor_height_m,
                self.floor_height_m > 0.0,
            ),
            (
                "floor_attenuation_db",
                self.floor_attenuation_db,
                self.floor_attenuation_db >= 0.0,
            ),
        ];
        for (field, value, ok) in checks {
            if !value.is_finite() || !ok {
                return Err(SimError::PathLossOutOfRange { field, value });
            }
        }
        Ok(())
    }
}

/// Straight-line distance including the vertical gap between floors.
fn propagation_distance(a: &Position, b: &Position, params: &PathLossParams) -> f64 {
    let planar = a.planar_distance(b);
    let vertical = (a.floor - b.floor).abs() as f64 * params.floor_height_m;
    (planar * planar + vertical * vertical).sqrt()
}

/// Total wall attenuation along the beacon-device sightline. Walls only block
/// same-floor paths; cross-floor paths pay the slab penalty instead.
fn obstruction_db(
    env: &Environment,
    params: &PathLossParams,
    from: &Position,
    to: &Position,
) -> f64 {
    if from.floor != to.floor {
        return (from.floor - to.floor).abs() as f64 * params.floor_attenuation_db;
    }
    env.walls_on_floor(from.floor)
        .filter(|w| {
            segments_intersect(
                (from.x, from.y),
                (to.x, to.y),
                (w.x1, w.y1),
                (w.x2, w.y2),
            )
        })
        .map(|w| w.attenuation_db)
        .sum()
}

fn beacon_position<'e>(env: &'e Environment, beacon: &BeaconId) -> Result<&'e Position, SimError> {
    env.beacon_position(beacon)
        .ok_or_else(|| SimError::UnknownBeacon(beacon.to_string()))
}

/// Noise-free expected RSSI at `position`, clamped to the representable
/// range. This is the quantity the discovery threshold is checked against.
pub fn mean_rssi(
    env: &Environment,
    params: &PathLossParams,
    beacon: &BeaconId,
    position: &Position,
) -> Result<f64, SimError> {
    let placed = beacon_position(env, beacon)?;
    let d = propagation_distance(placed, position, params).max(MIN_PATH_DISTANCE_M);
    let level = params.rssi_at_1m
        - 10.0 * params.path_loss_exponent * d.log10()
        - obstruction_db(env, params, placed, position);
    Ok(level.clamp(RSSI_MIN_DBM, RSSI_MAX_DBM))
}

/// True when the beacon is discoverable from `position` at all.
pub fn in_range(
    env: &Environment,
    params: &PathLossParams,
    beacon: &BeaconId,
    position: &Position,
) -> Result<bool, SimError> {
    Ok(mean_rssi(env, params, beacon, position)? >= IN_RANGE_FLOOR_DBM)
}

/// One noisy RSSI measurement.
pub fn rssi_at(
    env: &Environment,
    params: &PathLossParams,
    beacon: &BeaconId,
    position: &Position,
    rng: &mut impl Rng,
) -> Result<f64, SimError> {
    let mean = mean_rssi(env, params, beacon, position)?;
    let noise = if params.noise_sigma > 0.0 {
        Normal::new(0.0, params.noise_sigma)
            .expect("validated sigma is finite and non-negative")
            .sample(rng)
    } else {
        0.0
    };
    Ok((mean + noise).clamp(RSSI_MIN_DBM, RSSI_MAX_DBM))
}
