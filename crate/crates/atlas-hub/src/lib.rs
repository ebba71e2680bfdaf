//! The per-environment hub: authenticates beacon uplinks, turns each cycle's
//! sample batches into location records through the fingerprint pipeline, and
//! keeps those records in a retention-bounded store that is encrypted at
//! rest. Queries (trajectories, contact traces) are answered from the store,
//! over sealed frames when they arrive from a paired console.

use atlas_core::codec::CodecError;
use atlas_core::localizer::LocalizerError;
use atlas_core::pipeline::PipelineError;
use atlas_core::CoreError;
use atlas_wire::WireError;
use thiserror::Error;

pub mod api;
pub mod hub;
pub mod store;

pub use api::{open_response, seal_request, ApiRequest, ApiResponse};
pub use hub::{CycleReport, Hub, HubConfig};
pub use store::{Contact, LocationStore, DEFAULT_RETENTION_DAYS};

#[derive(Debug, Error)]
pub enum HubError {
    #[error("no fingerprint map has been ingested; the hub is still in setup")]
    NotLive,
    #[error("frame from unknown peer {0}")]
    UnknownPeer(String),
    #[error("request is not valid: {0}")]
    BadRequest(&'static str),
    #[error("store file is not readable: {0}")]
    CorruptStore(&'static str),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Localizer(#[from] LocalizerError),
    #[error("store io: {0}")]
    Io(#[from] std::io::Error),
}
