//! Scenario files: the single configuration surface for simulation runs.
//!
//! A scenario bundles the floor plan, propagation tunables, cycle timing,
//! simulated devices, and the run seed. Unknown keys are rejected so typos
//! fail loudly instead of silently falling back to defaults.

use atlas_core::codec;
use atlas_core::{hash_user_id, CycleConfig, Environment, Position};
use serde::{Deserialize, Serialize};

use crate::radio::PathLossParams;
use crate::SimError;

/// Salt material mixed in when a scenario does not pin `salt_hex`.
const DEFAULT_SALT_CONTEXT: &[u8] = b"atlas-default-env-salt";

/// A timestamped stop on a device's scripted path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub time_ms: u64,
    pub x: f64,
    pub y: f64,
    pub floor: i32,
}

impl Waypoint {
    pub fn position(&self) -> Position {
        Position::new(self.x, self.y, self.floor)
    }
}

/// Motion spec for a device that holds a fresh uniformly random in-area
/// position each cycle, at least `margin_m` from every area edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomHold {
    pub margin_m: f64,
}

/// One simulated device: a raw identity plus exactly one motion spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<Waypoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_hold: Option<RandomHold>,
}

/// A full simulation configuration, parsed from a TOML scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub duration_ms: u64,
    /// Per-environment identity salt, hex. Defaults to a digest of the
    /// environment id, so unrelated environments never share hashed ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salt_hex: Option<String>,
    pub environment: Environment,
    #[serde(default)]
    pub path_loss: PathLossParams,
    #[serde(default)]
    pub cycle: CycleConfig,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario = codec::from_toml(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> Result<String, SimError> {
        self.validate()?;
        Ok(codec::to_toml(self)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.environment.validate()?;
        self.path_loss.validate()?;
        self.cycle.validate()?;

        if let Some(hex_text) = &self.salt_hex {
            let bytes = hex::decode(hex_text)
                .map_err(|e| SimError::Scenario(format!("salt_hex is not valid hex: {e}")))?;
            if bytes.len() < atlas_core::MIN_SALT_LEN {
                return Err(SimError::Scenario(format!(
                    "salt must be at least {} bytes, got {}",
                    atlas_core::MIN_SALT_LEN,
                    bytes.len()
                )));
            }
        }

        let mut seen = std::collections::BTreeSet::new();
        for device in &self.devices {
            if device.user_id.is_empty() {
                return Err(SimError::Scenario("device user_id is empty".into()));
            }
            if !seen.insert(&device.user_id) {
                return Err(SimError::Scenario(format!(
                    "duplicate device user_id {:?}",
                    device.user_id
                )));
            }
            self.validate_motion(device)?;
        }
        Ok(())
    }

    fn validate_motion(&self, device: &DeviceSpec) -> Result<(), SimError> {
        match (&device.waypoints, &device.random_hold) {
            (Some(_), Some(_)) | (None, None) => Err(SimError::Scenario(format!(
                "device {:?} must have exactly one of waypoints or random_hold",
                device.user_id
            ))),
            (Some(waypoints), None) => {
                if waypoints.is_empty() {
                    return Err(SimError::Scenario(format!(
                        "device {:?} has an empty waypoint list",
                        device.user_id
                    )));
                }
                for pair in waypoints.windows(2) {
                    if pair[1].time_ms <= pair[0].time_ms {
                        return Err(SimError::Scenario(format!(
                            "device {:?} waypoint times must strictly increase ({} then {})",
                            device.user_id, pair[0].time_ms, pair[1].time_ms
                        )));
                    }
                }
                for wp in waypoints {
                    if !self.environment.bounds.contains(wp.x, wp.y) {
                        return Err(SimError::Scenario(format!(
                            "device {:?} waypoint ({}, {}) is outside the environment bounds",
                            device.user_id, wp.x, wp.y
                        )));
                    }
                }
                Ok(())
            }
            (None, Some(hold)) => {
                if !hold.margin_m.is_finite() || hold.margin_m < 0.0 {
                    return Err(SimError::Scenario(format!(
                        "device {:?} random_hold margin must be finite and non-negative",
                        device.user_id
                    )));
                }
                let roomy = self.environment.areas.iter().any(|area| {
                    area.rect.width() > 2.0 * hold.margin_m
                        && area.rect.height() > 2.0 * hold.margin_m
                });
                if !roomy {
                    return Err(SimError::Scenario(format!(
                        "no area is large enough for device {:?} with margin {} m",
                        device.user_id, hold.margin_m
                    )));
                }
                Ok(())
            }
        }
    }

    /// The environment identity salt: explicit bytes, or a digest of the
    /// environment id when the scenario does not pin one.
    pub fn salt(&self) -> Vec<u8> {
        match &self.salt_hex {
            Some(text) => hex::decode(text).expect("validated hex"),
            None => hash_user_id(self.environment.id.as_bytes(), DEFAULT_SALT_CONTEXT)
                .expect("environment id is non-empty and context salt is long enough")
                .as_bytes()
                .to_vec(),
        }
    }
}

/// Position on a waypoint path at time `t`: clamped before the first and
/// after the last stop, linearly interpolated between stops. The floor of the
/// earlier stop holds until the later stop's time arrives.
pub(crate) fn waypoint_position(waypoints: &[Waypoint], t: u64) -> Position {
    let first = waypoints.first().expect("validated non-empty");
    if t <= first.time_ms {
        return first.position();
    }
    for pair in waypoints.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if t < b.time_ms {
            let span = (b.time_ms - a.time_ms) as f64;
            let frac = (t - a.time_ms) as f64 / span;
            return Position::new(
                a.x + (b.x - a.x) * frac,
                a.y + (b.y - a.y) * frac,
                a.floor,
            );
        }
    }
    waypoints.last().expect("validated non-empty").position()
}
