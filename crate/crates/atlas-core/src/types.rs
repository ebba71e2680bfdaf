//! Core domain vocabulary: identifiers, RSSI samples, fingerprints, floor
//! plans, and stored location records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

use crate::geom::{Position, Rect};

/// Weakest RSSI a receiver reports, in dBm.
pub const RSSI_MIN_DBM: f64 = -110.0;
/// Strongest representable RSSI, in dBm.
pub const RSSI_MAX_DBM: f64 = 0.0;
/// Minimum salt length accepted by [`hash_user_id`].
pub const MIN_SALT_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("rssi {0} dBm is outside [{RSSI_MIN_DBM}, {RSSI_MAX_DBM}]")]
    RssiOutOfRange(f64),
    #[error("timestamp must be a positive millisecond count")]
    ZeroTimestamp,
    #[error("fingerprint needs at least one beacon entry")]
    EmptyFingerprint,
    #[error("raw device id must not be empty")]
    EmptyRawId,
    #[error("salt is {0} bytes, need at least {MIN_SALT_LEN}")]
    SaltTooShort(usize),
    #[error("confidence {0} is outside (0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("beacon id {0:?} is not a 36-character hyphenated uuid")]
    BadBeaconId(String),
    #[error("user id {0:?} is not a 64-character lowercase hex digest")]
    BadUserId(String),
    #[error("fingerprint map has no reference points")]
    EmptyMap,
    #[error("duplicate reference point id {0}")]
    DuplicatePointId(String),
    #[error("environment bounds are inverted")]
    InvalidBounds,
    #[error("duplicate area name {0}")]
    DuplicateArea(String),
    #[error("area {0} extends outside the environment bounds")]
    AreaOutOfBounds(String),
    #[error("duplicate beacon id {0}")]
    DuplicateBeacon(String),
    #[error("beacon {id} at ({x}, {y}) is outside the environment bounds")]
    BeaconOutOfBounds { id: String, x: f64, y: f64 },
    #[error("wall attenuation must be >= 0 dB, got {0}")]
    NegativeAttenuation(f64),
    #[error("cycle period {period_ms} ms is shorter than the round trip {round_trip_ms} ms")]
    CycleShorterThanRoundTrip { period_ms: u64, round_trip_ms: u64 },
    #[error("cycle timing values must be positive")]
    ZeroCycleField,
}

/// Beacon identity: the 128-bit advertisement UUID, rendered in the canonical
/// 36-character hyphenated form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BeaconId(Uuid);

impl BeaconId {
    pub fn new(uuid: Uuid) -> Self {
        Self(uuid)
    }

    /// Parses the canonical hyphenated lowercase form, rejecting the
    /// compact, braced, and uppercase variants so that serialized ids are
    /// byte-stable.
    pub fn parse(s: &str) -> Result<Self, CoreError> {
        let uuid = Uuid::try_parse(s).map_err(|_| CoreError::BadBeaconId(s.to_string()))?;
        if uuid.as_hyphenated().to_string() != s {
            return Err(CoreError::BadBeaconId(s.to_string()));
        }
        Ok(Self(uuid))
    }

    pub fn as_uuid(&self) -> Uuid {
        self.0
    }

    /// The raw 16 bytes, used as a wire address.
    pub fn as_bytes(&self) -> &[u8; 16] {
        self.0.as_bytes()
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Self(Uuid::from_bytes(bytes))
    }
}

impl fmt::Display for BeaconId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.as_hyphenated())
    }
}

impl FromStr for BeaconId {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for BeaconId {
    type Error = CoreError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<BeaconId> for String {
    fn from(id: BeaconId) -> String {
        id.to_string()
    }
}

/// Salted digest standing in for a device identity. Raw identifiers never
/// appear in stored records; this is the only user handle the rest of the
/// system sees.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HashedUserId([u8; 32]);

impl HashedUserId {
    pub fn from_hex(s: &str) -> Result<Self, CoreError> {
        if s.len() != 64 || s.bytes().any(|b| !matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(CoreError::BadUserId(s.to_string()));
        }
        let mut digest = [0u8; 32];
        hex::decode_to_slice(s, &mut digest).map_err(|_| CoreError::BadUserId(s.to_string()))?;
        Ok(Self(digest))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// First 16 digest bytes, used as a wire address for the device.
    pub fn wire_id(&self) -> [u8; 16] {
        let mut id = [0u8; 16];
        id.copy_from_slice(&self.0[..16]);
        id
    }
}

impl fmt::Display for HashedUserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for HashedUserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashedUserId({})", self.to_hex())
    }
}

impl FromStr for HashedUserId {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

impl TryFrom<String> for HashedUserId {
    type Error = CoreError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::from_hex(&s)
    }
}

impl From<HashedUserId> for String {
    fn from(id: HashedUserId) -> String {
        id.to_hex()
    }
}

/// Hashes a raw device identifier under a per-environment salt.
///
/// The salt keeps identical devices unlinkable across environments; it is
/// fixed at setup and must be at least [`MIN_SALT_LEN`] bytes.
pub fn hash_user_id(raw_id: &[u8], salt: &[u8]) -> Result<HashedUserId, CoreError> {
    if raw_id.is_empty() {
        return Err(CoreError::EmptyRawId);
    }
    if salt.len() < MIN_SALT_LEN {
        return Err(CoreError::SaltTooShort(salt.len()));
    }
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(raw_id);
    Ok(HashedUserId(hasher.finalize().into()))
}

/// Identifier of a surveyed reference point. Ordering is lexicographic and is
/// the deterministic tie-breaker during matching.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferencePointId(pub String);

impl ReferencePointId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ReferencePointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ReferencePointId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// One RSSI measurement: a beacon heard a device at a point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RssiSample {
    pub beacon: BeaconId,
    pub device: HashedUserId,
    #[serde(with = "crate::codec::rssi_1dp")]
    pub rssi: f64,
    pub timestamp: u64,
}

impl RssiSample {
    pub fn new(
        beacon: BeaconId,
        device: HashedUserId,
        rssi: f64,
        timestamp: u64,
    ) -> Result<Self, CoreError> {
        check_rssi(rssi)?;
        if timestamp == 0 {
            return Err(CoreError::ZeroTimestamp);
        }
        Ok(Self {
            beacon,
            device,
            rssi,
            timestamp,
        })
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        check_rssi(self.rssi)?;
        if self.timestamp == 0 {
            return Err(CoreError::ZeroTimestamp);
        }
        Ok(())
    }
}

fn check_rssi(rssi: f64) -> Result<(), CoreError> {
    if !rssi.is_finite() || !(RSSI_MIN_DBM..=RSSI_MAX_DBM).contains(&rssi) {
        return Err(CoreError::RssiOutOfRange(rssi));
    }
    Ok(())
}

/// Who a fingerprint characterizes: a live device or a surveyed reference
/// point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    User(HashedUserId),
    Point(ReferencePointId),
}

/// Per-beacon RSSI vector characterizing one owner at one instant; the unit
/// of matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fingerprint {
    #[serde(with = "crate::codec::rssi_map_1dp")]
    pub entries: BTreeMap<BeaconId, f64>,
    pub timestamp: u64,
    pub owner: Owner,
}

impl Fingerprint {
    pub fn new(
        entries: BTreeMap<BeaconId, f64>,
        timestamp: u64,
        owner: Owner,
    ) -> Result<Self, CoreError> {
        let fp = Self {
            entries,
            timestamp,
            owner,
        };
        fp.validate()?;
        Ok(fp)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.entries.is_empty() {
            return Err(CoreError::EmptyFingerprint);
        }
        if self.timestamp == 0 {
            return Err(CoreError::ZeroTimestamp);
        }
        for rssi in self.entries.values() {
            check_rssi(*rssi)?;
        }
        Ok(())
    }

    pub fn rssi(&self, beacon: &BeaconId) -> Option<f64> {
        self.entries.get(beacon).copied()
    }

    pub fn beacon_set(&self) -> BTreeSet<BeaconId> {
        self.entries.keys().copied().collect()
    }
}

/// A surveyed position with its fingerprint and area label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePoint {
    pub id: ReferencePointId,
    pub position: Position,
    pub area: String,
    pub fingerprint: Fingerprint,
}

/// The localization database: reference fingerprints bound to coordinates and
/// areas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintMap {
    pub points: Vec<ReferencePoint>,
    pub environment_id: String,
    pub created_at: u64,
}

impl FingerprintMap {
    pub fn new(
        points: Vec<ReferencePoint>,
        environment_id: impl Into<String>,
        created_at: u64,
    ) -> Result<Self, CoreError> {
        let map = Self {
            points,
            environment_id: environment_id.into(),
            created_at,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.points.is_empty() {
            return Err(CoreError::EmptyMap);
        }
        let mut seen = BTreeSet::new();
        for point in &self.points {
            if !seen.insert(&point.id) {
                return Err(CoreError::DuplicatePointId(point.id.to_string()));
            }
            point.fingerprint.validate()?;
        }
        Ok(())
    }

    pub fn get(&self, id: &ReferencePointId) -> Option<&ReferencePoint> {
        self.points.iter().find(|p| &p.id == id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Named rectangular region of one floor; the granularity of reported
/// locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub name: String,
    pub floor: i32,
    pub rect: Rect,
}

impl Area {
    pub fn contains(&self, position: &Position) -> bool {
        position.floor == self.floor && self.rect.contains(position.x, position.y)
    }
}

/// A wall segment on one floor with its RF attenuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall {
    pub floor: i32,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub attenuation_db: f64,
}

/// A fixed beacon and where it is mounted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconPlacement {
    pub id: BeaconId,
    pub position: Position,
}

/// Floor plan driving RSSI synthesis: bounds, labeled areas, attenuating
/// walls, and beacon placements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub id: String,
    pub bounds: Rect,
    pub areas: Vec<Area>,
    pub walls: Vec<Wall>,
    pub beacons: Vec<BeaconPlacement>,
}

impl Environment {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.bounds.is_valid() {
            return Err(CoreError::InvalidBounds);
        }
        let mut names = BTreeSet::new();
        for area in &self.areas {
            if !names.insert(&area.name) {
                return Err(CoreError::DuplicateArea(area.name.clone()));
            }
            if !area.rect.is_valid() || !self.bounds.contains_rect(&area.rect) {
                return Err(CoreError::AreaOutOfBounds(area.name.clone()));
            }
        }
        for wall in &self.walls {
            if wall.attenuation_db < 0.0 {
                return Err(CoreError::NegativeAttenuation(wall.attenuation_db));
            }
        }
        let mut ids = BTreeSet::new();
        for placement in &self.beacons {
            if !ids.insert(placement.id) {
                return Err(CoreError::DuplicateBeacon(placement.id.to_string()));
            }
            if !self.bounds.contains(placement.position.x, placement.position.y) {
                return Err(CoreError::BeaconOutOfBounds {
                    id: placement.id.to_string(),
                    x: placement.position.x,
                    y: placement.position.y,
                });
            }
        }
        Ok(())
    }

    /// The first declared area containing `position`, if any. Declaration
    /// order settles points on shared edges.
    pub fn area_of(&self, position: &Position) -> Option<&Area> {
        self.areas.iter().find(|a| a.contains(position))
    }

    pub fn beacon_position(&self, id: &BeaconId) -> Option<&Position> {
        self.beacons
            .iter()
            .find(|p| &p.id == id)
            .map(|p| &p.position)
    }

    /// Walls on `floor` only; cross-floor paths are attenuated by the slab
    /// model in the radio simulator, not by wall segments.
    pub fn walls_on_floor(&self, floor: i32) -> impl Iterator<Item = &Wall> {
        self.walls.iter().filter(move |w| w.floor == floor)
    }
}

/// Where a user was placed: the retained, privacy-reduced output of one live
/// cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationRecord {
    pub user: HashedUserId,
    pub area: String,
    pub reference_point: ReferencePointId,
    pub confidence: f64,
    pub timestamp: u64,
}

impl LocationRecord {
    pub fn new(
        user: HashedUserId,
        area: impl Into<String>,
        reference_point: ReferencePointId,
        confidence: f64,
        timestamp: u64,
    ) -> Result<Self, CoreError> {
        if !confidence.is_finite() || confidence <= 0.0 || confidence > 1.0 {
            return Err(CoreError::ConfidenceOutOfRange(confidence));
        }
        if timestamp == 0 {
            return Err(CoreError::ZeroTimestamp);
        }
        Ok(Self {
            user,
            area: area.into(),
            reference_point,
            confidence,
            timestamp,
        })
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.confidence.is_finite() || self.confidence <= 0.0 || self.confidence > 1.0 {
            return Err(CoreError::ConfidenceOutOfRange(self.confidence));
        }
        if self.timestamp == 0 {
            return Err(CoreError::ZeroTimestamp);
        }
        Ok(())
    }
}

/// Timing constants of the live measurement cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleConfig {
    pub cycle_period_ms: u64,
    pub round_trip_ms: u64,
    pub max_parallel_per_beacon: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            cycle_period_ms: 15_000,
            round_trip_ms: 3_000,
            max_parallel_per_beacon: 8,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.cycle_period_ms == 0 || self.round_trip_ms == 0 || self.max_parallel_per_beacon == 0
        {
            return Err(CoreError::ZeroCycleField);
        }
        if self.cycle_period_ms < self.round_trip_ms {
            return Err(CoreError::CycleShorterThanRoundTrip {
                period_ms: self.cycle_period_ms,
                round_trip_ms: self.round_trip_ms,
            });
        }
        Ok(())
    }

    /// Round trips that fit in one cycle.
    pub fn batches_per_cycle(&self) -> u64 {
        self.cycle_period_ms / self.round_trip_ms
    }

    /// Devices one beacon can serve per cycle.
    pub fn capacity_per_cycle(&self) -> usize {
        self.batches_per_cycle() as usize * self.max_parallel_per_beacon
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bid(n: u128) -> BeaconId {
        BeaconId::new(Uuid::from_u128(n))
    }

    fn uid(n: u8) -> HashedUserId {
        hash_user_id(&[n], &[0u8; 16]).unwrap()
    }

    #[test]
    fn beacon_id_round_trips_canonical_form() {
        let id = bid(0xdead_beef_0000_0001);
        let text = id.to_string();
        assert_eq!(text.len(), 36);
        assert_eq!(BeaconId::parse(&text).unwrap(), id);
    }

    #[test]
    fn beacon_id_rejects_non_canonical_forms() {
        assert!(BeaconId::parse("67e5504410b1426f9247bb680e5fe0c8").is_err());
        assert!(BeaconId::parse("67E55044-10B1-426F-9247-BB680E5FE0C8").is_err());
        assert!(BeaconId::parse("{67e55044-10b1-426f-9247-bb680e5fe0c8}").is_err());
        assert!(BeaconId::parse("not-a-uuid").is_err());
    }

    #[test]
    fn hash_user_id_matches_reference_digest() {
        // sha256(16 zero bytes || "device-A"), computed with an unrelated
        // implementation.
        let id = hash_user_id(b"device-A", &[0u8; 16]).unwrap();
        assert_eq!(
            id.to_hex(),
            "8c0560475e2205dafa78c49863eaf74dfab6ddd03c1738066a9631d68961e86b"
        );
    }

    #[test]
    fn hash_user_id_is_deterministic() {
        let salt = [7u8; 16];
        assert_eq!(
            hash_user_id(b"device-A", &salt).unwrap(),
            hash_user_id(b"device-A", &salt).unwrap()
        );
    }

    #[test]
    fn hash_user_id_rejects_empty_raw_id() {
        assert_eq!(
            hash_user_id(b"", &[0u8; 16]).unwrap_err(),
            CoreError::EmptyRawId
        );
    }

    #[test]
    fn hash_user_id_rejects_short_salt() {
        assert_eq!(
            hash_user_id(b"device-A", &[0u8; 15]).unwrap_err(),
            CoreError::SaltTooShort(15)
        );
    }

    #[test]
    fn hashed_user_id_hex_round_trip() {
        let id = uid(3);
        assert_eq!(HashedUserId::from_hex(&id.to_hex()).unwrap(), id);
        assert!(HashedUserId::from_hex("XYZ").is_err());
        let upper = id.to_hex().to_uppercase();
        assert!(HashedUserId::from_hex(&upper).is_err());
    }

    #[test]
    fn rssi_sample_rejects_out_of_range_values() {
        let b = bid(1);
        let u = uid(1);
        assert!(RssiSample::new(b, u, -110.0, 1).is_ok());
        assert!(RssiSample::new(b, u, 0.0, 1).is_ok());
        assert!(RssiSample::new(b, u, -110.1, 1).is_err());
        assert!(RssiSample::new(b, u, 0.1, 1).is_err());
        assert!(RssiSample::new(b, u, f64::NAN, 1).is_err());
        assert!(RssiSample::new(b, u, -60.0, 0).is_err());
    }

    #[test]
    fn fingerprint_requires_entries_and_valid_rssi() {
        let owner = Owner::User(uid(1));
        assert_eq!(
            Fingerprint::new(BTreeMap::new(), 1, owner.clone()).unwrap_err(),
            CoreError::EmptyFingerprint
        );
        let mut entries = BTreeMap::new();
        entries.insert(bid(1), -30.0);
        assert!(Fingerprint::new(entries.clone(), 1, owner.clone()).is_ok());
        entries.insert(bid(2), 5.0);
        assert!(Fingerprint::new(entries, 1, owner).is_err());
    }

    #[test]
    fn location_record_confidence_bounds() {
        let u = uid(1);
        let rp = ReferencePointId::from("rp-000");
        assert!(LocationRecord::new(u, "lab", rp.clone(), 1.0, 1).is_ok());
        assert!(LocationRecord::new(u, "lab", rp.clone(), 0.0, 1).is_err());
        assert!(LocationRecord::new(u, "lab", rp, 1.01, 1).is_err());
    }

    #[test]
    fn environment_validation_catches_misplacements() {
        let mut env = Environment {
            id: "e".into(),
            bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
            areas: vec![Area {
                name: "a".into(),
                floor: 0,
                rect: Rect::new(0.0, 0.0, 5.0, 5.0),
            }],
            walls: vec![],
            beacons: vec![BeaconPlacement {
                id: bid(1),
                position: Position::new(1.0, 1.0, 0),
            }],
        };
        assert!(env.validate().is_ok());

        env.beacons.push(BeaconPlacement {
            id: bid(2),
            position: Position::new(11.0, 1.0, 0),
        });
        assert!(matches!(
            env.validate(),
            Err(CoreError::BeaconOutOfBounds { .. })
        ));
        env.beacons.pop();

        env.walls.push(Wall {
            floor: 0,
            x1: 0.0,
            y1: 0.0,
            x2: 1.0,
            y2: 0.0,
            attenuation_db: -1.0,
        });
        assert!(matches!(
            env.validate(),
            Err(CoreError::NegativeAttenuation(_))
        ));
    }

    #[test]
    fn area_lookup_uses_declaration_order_on_shared_edges() {
        let env = Environment {
            id: "e".into(),
            bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
            areas: vec![
                Area {
                    name: "left".into(),
                    floor: 0,
                    rect: Rect::new(0.0, 0.0, 5.0, 10.0),
                },
                Area {
                    name: "right".into(),
                    floor: 0,
                    rect: Rect::new(5.0, 0.0, 10.0, 10.0),
                },
            ],
            walls: vec![],
            beacons: vec![],
        };
        let on_edge = Position::new(5.0, 5.0, 0);
        assert_eq!(env.area_of(&on_edge).unwrap().name, "left");
        let off_floor = Position::new(5.0, 5.0, 1);
        assert!(env.area_of(&off_floor).is_none());
    }

    #[test]
    fn cycle_config_capacity_arithmetic() {
        let config = CycleConfig::default();
        assert_eq!(config.batches_per_cycle(), 5);
        assert_eq!(config.capacity_per_cycle(), 40);
        let bad = CycleConfig {
            cycle_period_ms: 1000,
            round_trip_ms: 3000,
            max_parallel_per_beacon: 8,
        };
        assert!(bad.validate().is_err());
    }
}
