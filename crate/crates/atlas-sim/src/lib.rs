//! Deterministic discrete-event simulation of the radio world: device motion
//! along waypoints, RSSI synthesis from a log-distance path-loss model, and
//! beacon service scheduling under the live-cycle timing constants.
//!
//! A fixed (scenario, seed) pair fully determines every emitted sample and
//! every byte on the simulated air. The world advances only through
//! [`World::step`]; callers interact between steps.

use atlas_core::codec::CodecError;
use atlas_core::pipeline::PipelineError;
use atlas_core::CoreError;
use atlas_wire::WireError;
use thiserror::Error;

pub mod radio;
pub mod scenario;
pub mod walk;
pub mod world;

pub use radio::{in_range, mean_rssi, rssi_at, PathLossParams, IN_RANGE_FLOOR_DBM};
pub use scenario::{DeviceSpec, RandomHold, Scenario, Waypoint};
pub use walk::generate_reference_walk;
pub use world::{LinkDir, SimEvent, SimEventKind, TapEntry, WireTap, World};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario invalid: {0}")]
    Scenario(String),
    #[error("path-loss parameter out of range: {field} = {value}")]
    PathLossOutOfRange { field: &'static str, value: f64 },
    #[error("beacon {0} is not placed in the environment")]
    UnknownBeacon(String),
    #[error("grid spacing must be positive and finite, got {0}")]
    BadGridSpacing(f64),
    #[error("dwell must be at least one second")]
    ZeroDwell,
    #[error("survey grid produced no reference points")]
    NoGridPoints,
    #[error("hub replies do not match the pending handshakes: {0}")]
    HandshakeMismatch(&'static str),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}
