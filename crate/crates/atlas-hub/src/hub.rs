//! Cycle orchestration: beacon handshakes, authenticated sample intake,
//! fingerprint matching, and the record store behind it all.

use std::collections::{BTreeMap, BTreeSet};

use atlas_core::codec;
use atlas_core::localizer::localize_batch;
use atlas_core::pipeline::{
    build_fingerprint, build_fingerprint_map, KalmanParams, ReferenceWalkPoint, SampleWindow,
    Weighting,
};
use atlas_core::{
    hash_user_id, BeaconId, Environment, FingerprintMap, HashedUserId, LocationRecord, Owner,
    RssiSample,
};
use atlas_wire::{
    derive_beacon_psk, derive_store_key, BeaconPairing, HandshakeInit, HandshakeResponder,
    MsgType, PairingRequest, PairingSecret, SecureFrame, SessionKeys, REHANDSHAKE_INTERVAL_MS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::store::LocationStore;
use crate::{HubError, DEFAULT_RETENTION_DAYS};

/// Tunables of the hub's pipeline and retention policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HubConfig {
    pub kalman: KalmanParams,
    pub weighting: Weighting,
    pub retention_days: u32,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self {
            kalman: KalmanParams::default(),
            weighting: Weighting::default(),
            retention_days: DEFAULT_RETENTION_DAYS,
        }
    }
}

/// What one live cycle produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    /// Fresh location records, ordered by user.
    pub records: Vec<LocationRecord>,
    /// Users whose fingerprint shared too few beacons with every map point.
    pub unlocatable: Vec<HashedUserId>,
    /// Uplink frames rejected during authentication or parsing.
    pub dropped_batches: usize,
    /// Samples accepted into the cycle window.
    pub sample_count: usize,
}

pub struct Hub {
    env: Environment,
    salt: Vec<u8>,
    config: HubConfig,
    wire_id: [u8; 16],
    /// Beacon wire id → placement id, for reporting.
    beacon_names: BTreeMap<[u8; 16], BeaconId>,
    responders: BTreeMap<[u8; 16], HandshakeResponder>,
    sessions: BTreeMap<[u8; 16], SessionKeys>,
    operator_pairing: BeaconPairing,
    pub(crate) operators: BTreeMap<[u8; 16], SessionKeys>,
    map: Option<FingerprintMap>,
    store: LocationStore,
    rng: ChaCha12Rng,
}

impl Hub {
    pub fn new(
        env: Environment,
        salt: Vec<u8>,
        config: HubConfig,
        seed: u64,
    ) -> Result<Self, HubError> {
        env.validate()?;
        config.kalman.validate()?;
        let wire_id = hash_user_id(b"atlas-hub", &salt)?.wire_id();

        let mut beacon_names = BTreeMap::new();
        let mut responders = BTreeMap::new();
        for placement in &env.beacons {
            let beacon_wire_id = *placement.id.as_bytes();
            let psk = derive_beacon_psk(&salt, &beacon_wire_id)?;
            beacon_names.insert(beacon_wire_id, placement.id);
            responders.insert(beacon_wire_id, HandshakeResponder::new(psk, wire_id));
        }
        let operator_pairing =
            BeaconPairing::new(PairingSecret::derive(&salt, &env.id, 0)?, wire_id);
        let store = LocationStore::new(config.retention_days);

        Ok(Self {
            env,
            salt,
            config,
            wire_id,
            beacon_names,
            responders,
            sessions: BTreeMap::new(),
            operator_pairing,
            operators: BTreeMap::new(),
            map: None,
            store,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }

    pub fn wire_id(&self) -> [u8; 16] {
        self.wire_id
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    /// True once a fingerprint map is installed and cycles can run.
    pub fn is_live(&self) -> bool {
        self.map.is_some()
    }

    pub fn map(&self) -> Option<&FingerprintMap> {
        self.map.as_ref()
    }

    pub fn store(&self) -> &LocationStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut LocationStore {
        &mut self.store
    }

    /// The key protecting this environment's store files at rest.
    pub fn store_key(&self) -> Result<[u8; 32], HubError> {
        Ok(derive_store_key(&self.salt)?)
    }

    /// Answers a beacon's handshake, establishing (or rotating) its uplink
    /// session.
    pub fn handshake(&mut self, init_bytes: &[u8], now_ms: u64) -> Result<Vec<u8>, HubError> {
        let init = HandshakeInit::decode(init_bytes)?;
        let nonce: [u8; 16] = self.rng.random();
        let responder = self
            .responders
            .get_mut(&init.client_id)
            .ok_or_else(|| HubError::UnknownPeer(hex::encode(init.client_id)))?;
        let (reply, session) = responder.respond(&init, nonce, now_ms)?;
        self.sessions.insert(init.client_id, session);
        Ok(reply.encode())
    }

    /// Beacons whose session has aged past the daily rotation interval.
    pub fn rehandshake_due(&self, now_ms: u64) -> Vec<BeaconId> {
        self.sessions
            .iter()
            .filter(|(_, s)| s.needs_rehandshake(now_ms, REHANDSHAKE_INTERVAL_MS))
            .filter_map(|(wire_id, _)| self.beacon_names.get(wire_id).copied())
            .collect()
    }

    /// Pairs an operator console (the QR-code flow) so it can query the hub
    /// over sealed frames.
    pub fn pair_operator(&mut self, request_bytes: &[u8], now_ms: u64) -> Result<Vec<u8>, HubError> {
        let request = PairingRequest::decode(request_bytes)?;
        let nonce: [u8; 16] = self.rng.random();
        let (response, session) = self.operator_pairing.respond(&request, nonce, now_ms)?;
        self.operators.insert(request.device_id, session);
        Ok(response.encode())
    }

    /// The QR-code string an operator console scans to pair.
    pub fn pairing_qr(&self) -> String {
        self.operator_pairing.secret().to_qr_string()
    }

    /// Builds the fingerprint map from a setup-stage reference walk and goes
    /// live. The previous map, if any, stays in place when the build fails.
    pub fn ingest_setup(&mut self, walks: &[ReferenceWalkPoint]) -> Result<usize, HubError> {
        let map = build_fingerprint_map(walks, &self.env, &self.config.kalman, self.config.weighting)?;
        let points = map.points.len();
        self.map = Some(map);
        Ok(points)
    }

    /// Installs a prebuilt fingerprint map (for example one loaded from
    /// disk).
    pub fn install_map(&mut self, map: FingerprintMap) -> Result<usize, HubError> {
        if map.environment_id != self.env.id {
            return Err(HubError::BadRequest("map belongs to a different environment"));
        }
        if map.points.is_empty() {
            return Err(HubError::BadRequest("map has no reference points"));
        }
        let points = map.points.len();
        self.map = Some(map);
        Ok(points)
    }

    /// Processes one cycle's uplink frames over the half-open window
    /// [start_ms, end_ms).
    ///
    /// Frames that fail authentication, parsing, or the window check are
    /// dropped individually; one bad batch never poisons the cycle. Located
    /// users append to the store, and retention pruning runs at the window
    /// end.
    pub fn run_cycle(
        &mut self,
        frames: &[Vec<u8>],
        start_ms: u64,
        end_ms: u64,
    ) -> Result<CycleReport, HubError> {
        if self.map.is_none() {
            return Err(HubError::NotLive);
        }

        let mut samples: Vec<RssiSample> = Vec::new();
        let mut dropped_batches = 0usize;
        for bytes in frames {
            match self.open_batch(bytes, start_ms, end_ms) {
                Ok(batch) => samples.extend(batch),
                Err(_) => dropped_batches += 1,
            }
        }
        let sample_count = samples.len();

        let window = SampleWindow::new(samples, start_ms, end_ms)?;
        let users: BTreeSet<HashedUserId> = window.samples.iter().map(|s| s.device).collect();
        let mut fingerprints = Vec::with_capacity(users.len());
        for user in users {
            fingerprints.push(build_fingerprint(
                &window,
                &Owner::User(user),
                &self.config.kalman,
                self.config.weighting,
            )?);
        }

        let map = self.map.as_ref().expect("checked live above");
        let outcome = localize_batch(&fingerprints, map)?;
        let records: Vec<LocationRecord> = outcome.located.values().cloned().collect();
        self.store.append(records.iter().cloned());
        self.store.prune(end_ms);

        Ok(CycleReport {
            records,
            unlocatable: outcome.unlocatable,
            dropped_batches,
            sample_count,
        })
    }

    fn open_batch(
        &mut self,
        bytes: &[u8],
        start_ms: u64,
        end_ms: u64,
    ) -> Result<Vec<RssiSample>, HubError> {
        let frame = SecureFrame::decode(bytes)?;
        let session = self
            .sessions
            .get_mut(&frame.sender_id)
            .ok_or_else(|| HubError::UnknownPeer(hex::encode(frame.sender_id)))?;
        let (msg_type, payload) = session.open(&frame)?;
        if msg_type != MsgType::SampleBatch {
            return Err(HubError::BadRequest("uplink frame is not a sample batch"));
        }
        let text = String::from_utf8(payload)
            .map_err(|_| HubError::BadRequest("sample batch is not utf-8"))?;
        let samples = codec::samples_from_toml(&text)?;
        if samples
            .iter()
            .any(|s| s.timestamp < start_ms || s.timestamp >= end_ms)
        {
            return Err(HubError::BadRequest("sample outside the cycle window"));
        }
        Ok(samples)
    }
}
