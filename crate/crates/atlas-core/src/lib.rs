//! Shared vocabulary of the atlas localization stack: domain types, floor
//! plan geometry, canonical TOML serialization, the RSSI signal pipeline,
//! and the fingerprint matcher.

pub mod codec;
pub mod geom;
pub mod localizer;
pub mod pipeline;
pub mod types;

pub use geom::{Position, Rect};
pub use types::{
    hash_user_id, Area, BeaconId, BeaconPlacement, CoreError, CycleConfig, Environment,
    Fingerprint, FingerprintMap, HashedUserId, LocationRecord, Owner, ReferencePoint,
    ReferencePointId, RssiSample, Wall, MIN_SALT_LEN, RSSI_MAX_DBM, RSSI_MIN_DBM,
};
