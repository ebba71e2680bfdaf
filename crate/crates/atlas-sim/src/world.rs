//! The simulated radio world: paired devices, advertising beacons, batch
//! service under the cycle timing constants, and sealed traffic on every
//! link. A wire tap records each byte crossing the simulated air so tests
//! can check what an eavesdropper would see.
//!
//! Time advances only through [`World::step`], which processes queued events
//! in (time, sequence) order. All randomness flows from one seeded generator,
//! so a (scenario, seed) pair reproduces every event and every frame exactly.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::mem;

use atlas_core::codec;
use atlas_core::{
    hash_user_id, BeaconId, CycleConfig, Environment, HashedUserId, Position, RssiSample,
};
use atlas_wire::{
    complete_pairing, pairing_request, BeaconPairing, HandshakeInitiator, HandshakeReply, MsgType,
    PairingSecret, SessionKeys, DEFAULT_HANDSHAKE_TIMEOUT_MS, REHANDSHAKE_INTERVAL_MS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::radio::{in_range, rssi_at, PathLossParams};
use crate::scenario::{waypoint_position, Scenario, Waypoint};
use crate::SimError;

/// Which simulated link a tapped frame crossed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkDir {
    DeviceToBeacon,
    BeaconToDevice,
    BeaconToHub,
    HubToBeacon,
}

/// One captured transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct TapEntry {
    pub time_ms: u64,
    pub link: LinkDir,
    pub bytes: Vec<u8>,
}

/// Everything an eavesdropper in the environment would capture.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct WireTap {
    entries: Vec<TapEntry>,
}

impl WireTap {
    fn record(&mut self, time_ms: u64, link: LinkDir, bytes: Vec<u8>) {
        self.entries.push(TapEntry {
            time_ms,
            link,
            bytes,
        });
    }

    pub fn entries(&self) -> &[TapEntry] {
        &self.entries
    }

    pub fn total_bytes(&self) -> usize {
        self.entries.iter().map(|e| e.bytes.len()).sum()
    }

    /// True when any captured transmission contains `needle` as a contiguous
    /// byte run. The confidentiality checks scan for plaintext leaks with
    /// this.
    pub fn contains(&self, needle: &[u8]) -> bool {
        if needle.is_empty() {
            return true;
        }
        self.entries
            .iter()
            .any(|e| e.bytes.windows(needle.len()).any(|w| w == needle))
    }
}

/// An observable simulation event, in trace order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time_ms: u64,
    pub seq: u64,
    pub kind: SimEventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEventKind {
    /// A beacon opened its cycle and refreshed its service queue.
    Advertisement { beacon: BeaconId },
    /// A device joined one of the beacon's parallel service slots.
    Connection {
        beacon: BeaconId,
        device: HashedUserId,
        batch: u32,
    },
    /// A queued device was not discoverable when its slot came up.
    OutOfRange {
        beacon: BeaconId,
        device: HashedUserId,
    },
    /// A round trip completed and produced a measurement.
    Sample { sample: RssiSample },
    /// A device stayed queued past the cycle's capacity.
    Deferral {
        beacon: BeaconId,
        device: HashedUserId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Action {
    CycleStart,
    BatchStart(u32),
    BatchEnd(u32),
    CycleEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Queued {
    time_ms: u64,
    seq: u64,
    cycle: u64,
    action: Action,
}

enum Motion {
    Waypoints(Vec<Waypoint>),
    /// Holds a fresh random position each cycle; history remembers every held
    /// position so ground truth stays queryable after the run.
    RandomHold {
        margin_m: f64,
        history: Vec<(u64, Position)>,
    },
}

struct DeviceState {
    raw_id: String,
    user: HashedUserId,
    motion: Motion,
    /// Session with each beacon, indexed by beacon declaration order.
    sessions: Vec<SessionKeys>,
}

struct BeaconState {
    id: BeaconId,
    wire_id: [u8; 16],
    psk: [u8; 32],
    /// Session with each paired device, indexed by device declaration order.
    device_sessions: Vec<SessionKeys>,
    backlog: VecDeque<usize>,
    queued: BTreeSet<usize>,
    outbox: Vec<RssiSample>,
    hub: Option<SessionKeys>,
    pending_handshake: Option<HandshakeInitiator>,
}

pub struct World {
    env: Environment,
    params: PathLossParams,
    cycle_cfg: CycleConfig,
    salt: Vec<u8>,
    rng: ChaCha12Rng,
    now_ms: u64,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Queued>>,
    devices: Vec<DeviceState>,
    beacons: Vec<BeaconState>,
    /// Devices mid-round-trip per beacon, with the sealed challenge each sent.
    in_flight: Vec<Vec<(usize, [u8; 8])>>,
    uplinks: Vec<Vec<u8>>,
    tap: WireTap,
}

impl World {
    /// Builds the world and performs the out-of-band pairing of every device
    /// with every beacon. Pairing traffic is captured on the tap like
    /// everything else.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let env = scenario.environment.clone();
        let salt = scenario.salt();
        let secret = PairingSecret::derive(&salt, &env.id, 0)?;
        let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed);
        let mut tap = WireTap::default();

        let mut devices = Vec::with_capacity(scenario.devices.len());
        for spec in &scenario.devices {
            let motion = match (&spec.waypoints, &spec.random_hold) {
                (Some(waypoints), None) => Motion::Waypoints(waypoints.clone()),
                (None, Some(hold)) => Motion::RandomHold {
                    margin_m: hold.margin_m,
                    history: Vec::new(),
                },
                _ => unreachable!("scenario validation enforces exactly one motion spec"),
            };
            devices.push(DeviceState {
                raw_id: spec.user_id.clone(),
                user: hash_user_id(spec.user_id.as_bytes(), &salt)?,
                motion,
                sessions: Vec::with_capacity(env.beacons.len()),
            });
        }

        let mut beacons = Vec::with_capacity(env.beacons.len());
        for placement in &env.beacons {
            let wire_id = *placement.id.as_bytes();
            let mut pairing = BeaconPairing::new(secret.clone(), wire_id);
            let mut device_sessions = Vec::with_capacity(devices.len());
            for device in &mut devices {
                let device_nonce: [u8; 16] = rng.random();
                let request = pairing_request(&secret, device.user.wire_id(), device_nonce);
                tap.record(0, LinkDir::DeviceToBeacon, request.encode());
                let beacon_nonce: [u8; 16] = rng.random();
                let (response, beacon_session) = pairing.respond(&request, beacon_nonce, 0)?;
                tap.record(0, LinkDir::BeaconToDevice, response.encode());
                device
                    .sessions
                    .push(complete_pairing(&secret, &request, &response, 0)?);
                device_sessions.push(beacon_session);
            }
            beacons.push(BeaconState {
                id: placement.id,
                wire_id,
                psk: atlas_wire::derive_beacon_psk(&salt, &wire_id)?,
                device_sessions,
                backlog: VecDeque::new(),
                queued: BTreeSet::new(),
                outbox: Vec::new(),
                hub: None,
                pending_handshake: None,
            });
        }

        let in_flight = beacons.iter().map(|_| Vec::new()).collect();
        let mut world = Self {
            env,
            params: scenario.path_loss,
            cycle_cfg: scenario.cycle,
            salt,
            rng,
            now_ms: 0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            devices,
            beacons,
            in_flight,
            uplinks: Vec::new(),
            tap,
        };
        world.push_action(0, 0, Action::CycleStart);
        Ok(world)
    }

    fn push_action(&mut self, time_ms: u64, cycle: u64, action: Action) {
        self.queue.push(Reverse(Queued {
            time_ms,
            seq: self.next_seq,
            cycle,
            action,
        }));
        self.next_seq += 1;
    }

    fn emit(&mut self, trace: &mut Vec<SimEvent>, time_ms: u64, kind: SimEventKind) {
        trace.push(SimEvent {
            time_ms,
            seq: self.next_seq,
            kind,
        });
        self.next_seq += 1;
    }

    /// Starts the beacon-to-hub handshakes and returns the init frames to
    /// carry to the hub. Call [`World::accept_hub_replies`] with its answers.
    pub fn hub_handshake_inits(&mut self) -> Vec<(BeaconId, Vec<u8>)> {
        let mut inits = Vec::with_capacity(self.beacons.len());
        for b in 0..self.beacons.len() {
            let nonce: [u8; 16] = self.rng.random();
            let beacon = &mut self.beacons[b];
            let (initiator, init) =
                HandshakeInitiator::start(beacon.psk, beacon.wire_id, nonce, self.now_ms);
            beacon.pending_handshake = Some(initiator);
            let bytes = init.encode();
            self.tap.record(self.now_ms, LinkDir::BeaconToHub, bytes.clone());
            inits.push((beacon.id, bytes));
        }
        inits
    }

    /// Completes the beacon-to-hub handshakes from the hub's replies.
    pub fn accept_hub_replies(&mut self, replies: &[(BeaconId, Vec<u8>)]) -> Result<(), SimError> {
        for (beacon_id, bytes) in replies {
            let beacon = self
                .beacons
                .iter_mut()
                .find(|b| &b.id == beacon_id)
                .ok_or(SimError::HandshakeMismatch("reply for an unknown beacon"))?;
            let initiator = beacon
                .pending_handshake
                .take()
                .ok_or(SimError::HandshakeMismatch("no handshake in flight"))?;
            let reply = HandshakeReply::decode(bytes)?;
            let session = initiator.complete(&reply, self.now_ms, DEFAULT_HANDSHAKE_TIMEOUT_MS)?;
            self.tap
                .record(self.now_ms, LinkDir::HubToBeacon, bytes.clone());
            beacon.hub = Some(session);
        }
        Ok(())
    }

    /// Beacons whose hub session has aged past the rotation interval.
    pub fn sessions_needing_rehandshake(&self) -> Vec<BeaconId> {
        self.beacons
            .iter()
            .filter(|b| {
                b.hub
                    .as_ref()
                    .is_some_and(|s| s.needs_rehandshake(self.now_ms, REHANDSHAKE_INTERVAL_MS))
            })
            .map(|b| b.id)
            .collect()
    }

    /// Advances the world, processing every event strictly before `until_ms`,
    /// and returns the observable trace.
    pub fn step(&mut self, until_ms: u64) -> Result<Vec<SimEvent>, SimError> {
        let mut trace = Vec::new();
        while let Some(Reverse(next)) = self.queue.peek().copied() {
            if next.time_ms >= until_ms {
                break;
            }
            self.queue.pop();
            self.now_ms = next.time_ms;
            match next.action {
                Action::CycleStart => self.cycle_start(next.time_ms, next.cycle, &mut trace),
                Action::BatchStart(k) => self.batch_start(next.time_ms, k, &mut trace)?,
                Action::BatchEnd(k) => self.batch_end(next.time_ms, k, &mut trace)?,
                Action::CycleEnd => self.cycle_end(next.time_ms, &mut trace)?,
            }
        }
        self.now_ms = self.now_ms.max(until_ms);
        Ok(trace)
    }

    fn cycle_start(&mut self, t: u64, cycle: u64, trace: &mut Vec<SimEvent>) {
        for d in 0..self.devices.len() {
            if let Motion::RandomHold { margin_m, .. } = self.devices[d].motion {
                let position = self.sample_hold_position(margin_m);
                if let Motion::RandomHold { history, .. } = &mut self.devices[d].motion {
                    history.push((t, position));
                }
            }
        }

        for b in 0..self.beacons.len() {
            let beacon_id = self.beacons[b].id;
            self.emit(trace, t, SimEventKind::Advertisement { beacon: beacon_id });
            for d in 0..self.devices.len() {
                let beacon = &mut self.beacons[b];
                if beacon.queued.insert(d) {
                    beacon.backlog.push_back(d);
                }
            }
        }

        let rt = self.cycle_cfg.round_trip_ms;
        let batches = self.cycle_cfg.batches_per_cycle() as u32;
        for k in 0..batches {
            self.push_action(t + u64::from(k) * rt, cycle, Action::BatchStart(k));
            self.push_action(t + u64::from(k + 1) * rt, cycle, Action::BatchEnd(k));
        }
        self.push_action(t + self.cycle_cfg.cycle_period_ms, cycle, Action::CycleEnd);
        self.push_action(
            t + self.cycle_cfg.cycle_period_ms,
            cycle + 1,
            Action::CycleStart,
        );
    }

    /// Uniform position over the areas shrunk by the hold margin, weighted by
    /// remaining floor space.
    fn sample_hold_position(&mut self, margin_m: f64) -> Position {
        let insets: Vec<_> = self
            .env
            .areas
            .iter()
            .filter_map(|area| {
                let w = area.rect.width() - 2.0 * margin_m;
                let h = area.rect.height() - 2.0 * margin_m;
                (w > 0.0 && h > 0.0).then_some((area, w, h))
            })
            .collect();
        let total: f64 = insets.iter().map(|(_, w, h)| w * h).sum();
        let mut pick = self.rng.random_range(0.0..total);
        let mut chosen = insets.last().expect("scenario validated a roomy area");
        for inset in &insets {
            let (_, w, h) = inset;
            if pick < w * h {
                chosen = inset;
                break;
            }
            pick -= w * h;
        }
        let (area, w, h) = chosen;
        let x = area.rect.min_x + margin_m + self.rng.random_range(0.0..=*w);
        let y = area.rect.min_y + margin_m + self.rng.random_range(0.0..=*h);
        Position::new(x, y, area.floor)
    }

    fn position_at_index(&self, d: usize, t: u64) -> Position {
        match &self.devices[d].motion {
            Motion::Waypoints(waypoints) => waypoint_position(waypoints, t),
            Motion::RandomHold { history, .. } => history
                .iter()
                .rev()
                .find(|(start, _)| *start <= t)
                .map(|(_, p)| *p)
                .expect("positions are sampled at cycle start, before any service"),
        }
    }

    fn batch_start(&mut self, t: u64, batch: u32, trace: &mut Vec<SimEvent>) -> Result<(), SimError> {
        for b in 0..self.beacons.len() {
            let beacon_id = self.beacons[b].id;
            for _slot in 0..self.cycle_cfg.max_parallel_per_beacon {
                let Some(d) = self.beacons[b].backlog.pop_front() else {
                    break;
                };
                self.beacons[b].queued.remove(&d);
                let device = self.devices[d].user;
                let position = self.position_at_index(d, t);
                if in_range(&self.env, &self.params, &beacon_id, &position)? {
                    let challenge: [u8; 8] = self.rng.random();
                    let frame = self.devices[d].sessions[b].seal(MsgType::Control, &challenge)?;
                    self.tap
                        .record(t, LinkDir::DeviceToBeacon, frame.encode());
                    self.beacons[b].device_sessions[d].open(&frame)?;
                    self.in_flight[b].push((d, challenge));
                    self.emit(
                        trace,
                        t,
                        SimEventKind::Connection {
                            beacon: beacon_id,
                            device,
                            batch,
                        },
                    );
                } else {
                    self.emit(
                        trace,
                        t,
                        SimEventKind::OutOfRange {
                            beacon: beacon_id,
                            device,
                        },
                    );
                }
            }
        }
        Ok(())
    }

    fn batch_end(&mut self, t: u64, _batch: u32, trace: &mut Vec<SimEvent>) -> Result<(), SimError> {
        for b in 0..self.beacons.len() {
            let beacon_id = self.beacons[b].id;
            let flights = mem::take(&mut self.in_flight[b]);
            for (d, challenge) in flights {
                // The measurement lands just inside the slot so every sample
                // of a cycle stays within that cycle's half-open window.
                let timestamp = t - 1;
                let position = self.position_at_index(d, timestamp);
                let rssi = rssi_at(&self.env, &self.params, &beacon_id, &position, &mut self.rng)?;
                let sample =
                    RssiSample::new(beacon_id, self.devices[d].user, rssi, timestamp)?;

                let echo = self.beacons[b].device_sessions[d].seal(MsgType::Control, &challenge)?;
                self.tap.record(t, LinkDir::BeaconToDevice, echo.encode());
                self.devices[d].sessions[b].open(&echo)?;

                self.beacons[b].outbox.push(sample.clone());
                self.emit(trace, t, SimEventKind::Sample { sample });
            }
        }
        Ok(())
    }

    fn cycle_end(&mut self, t: u64, trace: &mut Vec<SimEvent>) -> Result<(), SimError> {
        for b in 0..self.beacons.len() {
            let beacon_id = self.beacons[b].id;
            let samples = mem::take(&mut self.beacons[b].outbox);
            if !samples.is_empty() && self.beacons[b].hub.is_some() {
                let payload = codec::samples_to_toml(&samples)?;
                let session = self.beacons[b].hub.as_mut().expect("checked above");
                let frame = session.seal(MsgType::SampleBatch, payload.as_bytes())?;
                let bytes = frame.encode();
                self.tap.record(t, LinkDir::BeaconToHub, bytes.clone());
                self.uplinks.push(bytes);
            }

            let deferred: Vec<usize> = self.beacons[b].backlog.iter().copied().collect();
            for d in deferred {
                let device = self.devices[d].user;
                self.emit(
                    trace,
                    t,
                    SimEventKind::Deferral {
                        beacon: beacon_id,
                        device,
                    },
                );
            }
        }
        Ok(())
    }

    /// Sealed sample batches produced since the last call, in send order.
    pub fn take_uplinks(&mut self) -> Vec<Vec<u8>> {
        mem::take(&mut self.uplinks)
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn cycle_config(&self) -> &CycleConfig {
        &self.cycle_cfg
    }

    pub fn path_loss(&self) -> &PathLossParams {
        &self.params
    }

    pub fn salt(&self) -> &[u8] {
        &self.salt
    }

    pub fn wiretap(&self) -> &WireTap {
        &self.tap
    }

    /// Raw scenario identity and hashed identity of every device, in
    /// declaration order.
    pub fn users(&self) -> Vec<(String, HashedUserId)> {
        self.devices
            .iter()
            .map(|d| (d.raw_id.clone(), d.user))
            .collect()
    }

    /// Ground-truth position of a device at `t`, if the user exists.
    pub fn position_of(&self, user: &HashedUserId, t: u64) -> Option<Position> {
        let d = self.devices.iter().position(|dev| &dev.user == user)?;
        Some(self.position_at_index(d, t))
    }

    /// Ground-truth area name of a device at `t`, if any area contains it.
    pub fn ground_truth_area(&self, user: &HashedUserId, t: u64) -> Option<String> {
        let position = self.position_of(user, t)?;
        self.env.area_of(&position).map(|a| a.name.clone())
    }
}
