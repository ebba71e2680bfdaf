//! Canonical structured-text serialization for the shared types.
//!
//! Every persisted artifact (environments, fingerprint maps, location logs,
//! sample logs) is TOML with the field names of the Rust types. Timestamps
//! are integer milliseconds; RSSI values are written with one decimal place,
//! which is the precision the rest of the system rounds to at serialization
//! boundaries. Parsers reject unknown keys so typos in hand-edited files fail
//! loudly, with line numbers in the diagnostic.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CoreError, Environment, FingerprintMap, LocationRecord, RssiSample};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("serialize failed: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("parse failed: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("parsed value violates an invariant: {0}")]
    Invalid(#[from] CoreError),
}

/// Rounds an RSSI value to the single decimal written on the wire and in
/// files.
pub fn quantize_rssi(rssi: f64) -> f64 {
    (rssi * 10.0).round() / 10.0
}

/// Serde adapter writing an RSSI field with one decimal place.
pub mod rssi_1dp {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rssi: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(super::quantize_rssi(*rssi))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        f64::deserialize(deserializer)
    }
}

/// Serde adapter writing a beacon→RSSI table with one decimal place per
/// value.
pub mod rssi_map_1dp {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::types::BeaconId;

    pub fn serialize<S: Serializer>(
        entries: &BTreeMap<BeaconId, f64>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(entries.len()))?;
        for (beacon, rssi) in entries {
            map.serialize_entry(beacon, &super::quantize_rssi(*rssi))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<BeaconId, f64>, D::Error> {
        BTreeMap::deserialize(deserializer)
    }
}

/// A location log: the list form LocationRecords are persisted in.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLog {
    #[serde(default)]
    pub records: Vec<LocationRecord>,
}

/// A raw sample log, the input format of the signal pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleLog {
    #[serde(default)]
    pub samples: Vec<RssiSample>,
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String, CodecError> {
    Ok(toml::to_string(value)?)
}

pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T, CodecError> {
    Ok(toml::from_str(text)?)
}

pub fn environment_to_toml(env: &Environment) -> Result<String, CodecError> {
    env.validate()?;
    to_toml(env)
}

pub fn environment_from_toml(text: &str) -> Result<Environment, CodecError> {
    let env: Environment = from_toml(text)?;
    env.validate()?;
    Ok(env)
}

pub fn map_to_toml(map: &FingerprintMap) -> Result<String, CodecError> {
    map.validate()?;
    to_toml(map)
}

pub fn map_from_toml(text: &str) -> Result<FingerprintMap, CodecError> {
    let map: FingerprintMap = from_toml(text)?;
    map.validate()?;
    Ok(map)
}

pub fn records_to_toml(records: &[LocationRecord]) -> Result<String, CodecError> {
    for record in records {
        record.validate()?;
    }
    to_toml(&RecordLog {
        records: records.to_vec(),
    })
}

pub fn records_from_toml(text: &str) -> Result<Vec<LocationRecord>, CodecError> {
    let log: RecordLog = from_toml(text)?;
    for record in &log.records {
        record.validate()?;
    }
    Ok(log.records)
}

pub fn samples_to_toml(samples: &[RssiSample]) -> Result<String, CodecError> {
    for sample in samples {
        sample.validate()?;
    }
    to_toml(&SampleLog {
        samples: samples.to_vec(),
    })
}

pub fn samples_from_toml(text: &str) -> Result<Vec<RssiSample>, CodecError> {
    let log: SampleLog = from_toml(text)?;
    for sample in &log.samples {
        sample.validate()?;
    }
    Ok(log.samples)
}
