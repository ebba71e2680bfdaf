//! Command implementations behind the `atlas` binary.
//!
//! Each command is a plain function that loads its inputs, does the work,
//! and returns the report text the binary prints. Keeping them callable as
//! library functions lets tests drive complete command flows without
//! spawning processes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::time::Instant;

use atlas_core::codec;
use atlas_core::localizer::{fingerprint_distance, localize, localize_batch};
use atlas_core::pipeline::{build_fingerprint, build_fingerprint_map, SampleWindow};
use atlas_core::{
    hash_user_id, Fingerprint, FingerprintMap, HashedUserId, LocationRecord, Owner, Position,
    RssiSample,
};
use atlas_hub::{Hub, HubConfig, LocationStore};
use atlas_sim::{generate_reference_walk, in_range, mean_rssi, rssi_at, Scenario, World};
use atlas_wire::{
    complete_pairing, derive_store_key, pairing_request, BeaconPairing, MsgType, PairingSecret,
    PlainSession, SecureFrame, SessionKeys,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Command failures, grouped by exit code: bad invocations exit 1, inputs
/// that fail content checks exit 2, failures while executing exit 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn validation(stage: &str, err: impl fmt::Display) -> CliError {
    CliError::Validation(format!("{stage}: {err}"))
}

fn runtime(stage: &str, err: impl fmt::Display) -> CliError {
    CliError::Runtime(format!("{stage}: {err}"))
}

fn load_scenario(path: &Path, seed_override: Option<u64>) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| validation(&format!("cannot read scenario {}", path.display()), e))?;
    let mut scenario = Scenario::from_toml_str(&text)
        .map_err(|e| validation(&format!("scenario {} is invalid", path.display()), e))?;
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn load_map(path: &Path) -> Result<FingerprintMap, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| validation(&format!("cannot read map {}", path.display()), e))?;
    codec::map_from_toml(&text)
        .map_err(|e| validation(&format!("map {} is invalid", path.display()), e))
}

/// Surveys the scenario's floor plan on an even grid, builds the fingerprint
/// map, and writes it to `out_path`. The report lists the point count and,
/// per area, how many distinct beacons its reference points hear.
pub fn cmd_setup(
    scenario_path: &Path,
    out_path: &Path,
    grid_spacing_m: f64,
    dwell_s: u32,
    seed_override: Option<u64>,
) -> Result<String, CliError> {
    let scenario = load_scenario(scenario_path, seed_override)?;
    let walk = generate_reference_walk(
        &scenario.environment,
        &scenario.path_loss,
        grid_spacing_m,
        dwell_s,
        &scenario.salt(),
        scenario.seed,
    )
    .map_err(|e| validation("reference walk failed", e))?;

    let config = HubConfig::default();
    let map = build_fingerprint_map(&walk, &scenario.environment, &config.kalman, config.weighting)
        .map_err(|e| validation("fingerprint map build failed", e))?;
    let text = codec::map_to_toml(&map).map_err(|e| runtime("map serialization failed", e))?;
    std::fs::write(out_path, &text)
        .map_err(|e| runtime(&format!("cannot write map {}", out_path.display()), e))?;

    let mut by_area: BTreeMap<&str, (usize, BTreeSet<String>)> = BTreeMap::new();
    for point in &map.points {
        let slot = by_area.entry(point.area.as_str()).or_default();
        slot.0 += 1;
        slot.1
            .extend(point.fingerprint.entries.keys().map(|b| b.to_string()));
    }

    let mut report = format!(
        "wrote {} reference points to {}\n",
        map.points.len(),
        out_path.display()
    );
    for (area, (points, beacons)) in &by_area {
        report.push_str(&format!(
            "  area {area}: {points} points, {} beacons heard\n",
            beacons.len()
        ));
    }
    Ok(report)
}

/// Everything a finished simulation run produced, before any files are
/// written. Kept separate from [`cmd_run`] so tests can inspect outcomes
/// without going through the filesystem.
pub struct RunOutcome {
    pub records: Vec<LocationRecord>,
    pub store: LocationStore,
    pub store_key: [u8; 32],
    pub cycles: u64,
    pub dropped_batches: u64,
    /// Per user, in scenario order: raw id and one slot per cycle holding
    /// the reported area (if located) and the ground-truth area (if the
    /// device stood inside a named area at cycle start).
    pub trajectories: Vec<(String, Vec<CycleOutcome>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleOutcome {
    pub reported_area: Option<String>,
    pub truth_area: Option<String>,
}

impl RunOutcome {
    /// Correct and comparable user-cycle counts. A cycle is comparable when
    /// ground truth exists; it is correct when the reported area equals it.
    pub fn accuracy_counts(&self) -> (u64, u64) {
        let mut correct = 0;
        let mut comparable = 0;
        for (_, cycles) in &self.trajectories {
            for outcome in cycles {
                let Some(truth) = &outcome.truth_area else {
                    continue;
                };
                comparable += 1;
                if outcome.reported_area.as_ref() == Some(truth) {
                    correct += 1;
                }
            }
        }
        (correct, comparable)
    }
}

/// Drives the simulated world and the hub through every complete cycle that
/// fits in the scenario duration.
pub fn run_deployment(scenario: &Scenario, map: FingerprintMap) -> Result<RunOutcome, CliError> {
    let mut world =
        World::from_scenario(scenario).map_err(|e| validation("simulation setup failed", e))?;
    let mut hub = Hub::new(
        scenario.environment.clone(),
        world.salt().to_vec(),
        HubConfig::default(),
        scenario.seed,
    )
    .map_err(|e| validation("hub setup failed", e))?;
    hub.install_map(map)
        .map_err(|e| validation("map install failed", e))?;

    let inits = world.hub_handshake_inits();
    let mut replies = Vec::with_capacity(inits.len());
    for (beacon, init) in &inits {
        let reply = hub
            .handshake(init, world.now_ms())
            .map_err(|e| runtime("beacon handshake failed", e))?;
        replies.push((beacon.clone(), reply));
    }
    world
        .accept_hub_replies(&replies)
        .map_err(|e| runtime("beacon handshake failed", e))?;

    let period = scenario.cycle.cycle_period_ms;
    let cycles = scenario.duration_ms / period;
    let users = world.users();
    let mut records = Vec::new();
    let mut dropped_batches = 0u64;
    let mut trajectories: Vec<(String, Vec<CycleOutcome>)> = users
        .iter()
        .map(|(raw, _)| (raw.clone(), Vec::with_capacity(cycles as usize)))
        .collect();

    for cycle in 0..cycles {
        let start_ms = cycle * period;
        let end_ms = start_ms + period;
        world
            .step(end_ms + 1)
            .map_err(|e| runtime("simulation step failed", e))?;
        let uplinks = world.take_uplinks();
        let report = hub
            .run_cycle(&uplinks, start_ms, end_ms)
            .map_err(|e| runtime("cycle processing failed", e))?;
        dropped_batches += report.dropped_batches as u64;

        let located: BTreeMap<HashedUserId, &str> = report
            .records
            .iter()
            .map(|r| (r.user, r.area.as_str()))
            .collect();
        for ((_, hashed), (_, slots)) in users.iter().zip(trajectories.iter_mut()) {
            slots.push(CycleOutcome {
                reported_area: located.get(hashed).map(|a| a.to_string()),
                truth_area: world.ground_truth_area(hashed, start_ms),
            });
        }
        records.extend(report.records);
    }

    let store_key = hub
        .store_key()
        .map_err(|e| runtime("store key derivation failed", e))?;
    Ok(RunOutcome {
        records,
        store: hub.store().clone(),
        store_key,
        cycles,
        dropped_batches,
        trajectories,
    })
}

/// How many per-cycle area labels a trajectory line shows before eliding.
const TRAJECTORY_PREVIEW: usize = 16;

fn trajectory_line(raw_id: &str, cycles: &[CycleOutcome]) -> String {
    let mut correct = 0;
    let mut comparable = 0;
    for outcome in cycles {
        if let Some(truth) = &outcome.truth_area {
            comparable += 1;
            if outcome.reported_area.as_ref() == Some(truth) {
                correct += 1;
            }
        }
    }
    let mut areas: Vec<&str> = cycles
        .iter()
        .take(TRAJECTORY_PREVIEW)
        .map(|o| o.reported_area.as_deref().unwrap_or("-"))
        .collect();
    if cycles.len() > TRAJECTORY_PREVIEW {
        areas.push("...");
    }
    format!(
        "  {raw_id}: {correct}/{comparable} cycles correct, areas {}\n",
        areas.join(" ")
    )
}

/// Replays a scenario against a previously surveyed map, writes every
/// location record to `out_path`, and optionally saves the sealed store.
pub fn cmd_run(
    scenario_path: &Path,
    map_path: &Path,
    out_path: &Path,
    store_path: Option<&Path>,
    duration_override_ms: Option<u64>,
    seed_override: Option<u64>,
) -> Result<String, CliError> {
    let mut scenario = load_scenario(scenario_path, seed_override)?;
    if let Some(ms) = duration_override_ms {
        scenario.duration_ms = ms;
    }
    let map = load_map(map_path)?;
    let outcome = run_deployment(&scenario, map)?;

    let text = codec::records_to_toml(&outcome.records)
        .map_err(|e| runtime("record serialization failed", e))?;
    std::fs::write(out_path, &text)
        .map_err(|e| runtime(&format!("cannot write records {}", out_path.display()), e))?;
    if let Some(path) = store_path {
        outcome
            .store
            .save(path, &outcome.store_key)
            .map_err(|e| runtime(&format!("cannot write store {}", path.display()), e))?;
    }

    let mut report = format!(
        "{} cycles, {} location records written to {}\n",
        outcome.cycles,
        outcome.records.len(),
        out_path.display()
    );
    if outcome.dropped_batches > 0 {
        report.push_str(&format!(
            "  {} sample batches dropped\n",
            outcome.dropped_batches
        ));
    }
    for (raw_id, cycles) in &outcome.trajectories {
        report.push_str(&trajectory_line(raw_id, cycles));
    }
    let (correct, comparable) = outcome.accuracy_counts();
    if comparable > 0 {
        report.push_str(&format!(
            "accuracy: {correct}/{comparable} user-cycles ({:.3})\n",
            correct as f64 / comparable as f64
        ));
    }
    Ok(report)
}

/// Opens a sealed store and prints the contact history of one user: every
/// other user seen in the same area at the same cycle timestamp.
pub fn cmd_trace(scenario_path: &Path, store_path: &Path, user: &str) -> Result<String, CliError> {
    let scenario = load_scenario(scenario_path, None)?;
    let salt = scenario.salt();
    let store_key =
        derive_store_key(&salt).map_err(|e| runtime("store key derivation failed", e))?;
    let store = LocationStore::load(store_path, &store_key)
        .map_err(|e| runtime(&format!("cannot open store {}", store_path.display()), e))?;

    let target =
        hash_user_id(user.as_bytes(), &salt).map_err(|e| validation("bad user id", e))?;
    // The store only knows hashed ids; the scenario's device roster lets the
    // report show raw names where they are known.
    let mut roster: BTreeMap<HashedUserId, String> = BTreeMap::new();
    for device in &scenario.devices {
        let hashed = hash_user_id(device.user_id.as_bytes(), &salt)
            .map_err(|e| validation("bad device roster", e))?;
        roster.insert(hashed, device.user_id.clone());
    }

    let contacts = store.contact_trace(&target);
    let mut report = format!("{} contacts for {user}\n", contacts.len());
    for contact in &contacts {
        let other = roster
            .get(&contact.other)
            .cloned()
            .unwrap_or_else(|| hex::encode(contact.other.as_bytes()));
        report.push_str(&format!(
            "  t={:<8} area={:<12} other={other}\n",
            contact.timestamp, contact.area
        ));
    }
    Ok(report)
}

fn parse_position(text: &str) -> Result<Position, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    let [x, y, floor] = parts.as_slice() else {
        return Err(CliError::Usage(format!(
            "position {text:?} must be x,y,floor"
        )));
    };
    let parse = |part: &str, what: &str| {
        part.trim().parse::<f64>().map_err(|_| {
            CliError::Usage(format!("position {text:?} has a bad {what} coordinate"))
        })
    };
    let floor = floor
        .trim()
        .parse::<i32>()
        .map_err(|_| CliError::Usage(format!("position {text:?} has a bad floor")))?;
    Ok(Position::new(parse(x, "x")?, parse(y, "y")?, floor))
}

/// The fingerprint a stationary device at `position` would report: the
/// quantized expected RSSI of every in-range beacon.
fn expected_fingerprint(
    scenario: &Scenario,
    position: &Position,
    owner: HashedUserId,
) -> Result<Option<Fingerprint>, CliError> {
    let env = &scenario.environment;
    let mut entries = BTreeMap::new();
    for placement in &env.beacons {
        let audible = in_range(env, &scenario.path_loss, &placement.id, position)
            .map_err(|e| runtime("signal model failed", e))?;
        if audible {
            let mean = mean_rssi(env, &scenario.path_loss, &placement.id, position)
                .map_err(|e| runtime("signal model failed", e))?;
            entries.insert(placement.id, codec::quantize_rssi(mean));
        }
    }
    if entries.is_empty() {
        return Ok(None);
    }
    let fp = Fingerprint::new(entries, 1_000, Owner::User(owner))
        .map_err(|e| runtime("fingerprint synthesis failed", e))?;
    Ok(Some(fp))
}

/// For each listed position, matches the expected fingerprint there against
/// the map and prints every area's best similarity weight plus the margin
/// separating the winning reference point from the runner-up.
pub fn cmd_weights(
    scenario_path: &Path,
    map_path: &Path,
    positions: &[String],
) -> Result<String, CliError> {
    if positions.is_empty() {
        return Err(CliError::Usage(
            "weights needs at least one position as x,y,floor".into(),
        ));
    }
    let scenario = load_scenario(scenario_path, None)?;
    let map = load_map(map_path)?;
    if map.environment_id != scenario.environment.id {
        return Err(CliError::Validation(format!(
            "map belongs to environment {:?}, scenario is {:?}",
            map.environment_id, scenario.environment.id
        )));
    }
    let probe = hash_user_id(b"weights-probe", &scenario.salt())
        .map_err(|e| runtime("probe identity failed", e))?;

    let mut report = String::new();
    for text in positions {
        let position = parse_position(text)?;
        let env = &scenario.environment;
        if env.area_of(&position).is_none() {
            return Err(CliError::Validation(format!(
                "position {text} is outside every mapped area"
            )));
        }
        let Some(fp) = expected_fingerprint(&scenario, &position, probe)? else {
            report.push_str(&format!("position {text}: no beacon in range\n"));
            continue;
        };

        report.push_str(&format!("position {text}:\n"));
        let mut best_by_area: BTreeMap<&str, f64> = BTreeMap::new();
        for point in &map.points {
            if let Some(distance) = fingerprint_distance(&fp, &point.fingerprint) {
                let weight = 1.0 / (1.0 + distance);
                let slot = best_by_area.entry(point.area.as_str()).or_insert(0.0);
                if weight > *slot {
                    *slot = weight;
                }
            }
        }
        for (area, weight) in &best_by_area {
            report.push_str(&format!("  area {area}: best weight {weight:.4}\n"));
        }
        match localize(&fp, &map).map_err(|e| runtime("matching failed", e))? {
            Some(result) => {
                let point = map
                    .get(&result.best.reference_point)
                    .expect("winner comes from this map");
                report.push_str(&format!(
                    "  best match {} in {} (weight {:.4}), margin over runner-up {:.4}\n",
                    result.best.reference_point, point.area, result.best.weight, result.margin
                ));
            }
            None => {
                report.push_str(
                    "  unlocatable: fewer than 2 beacons shared with every reference point\n",
                );
            }
        }
    }
    Ok(report)
}

/// One benchmark table row: mean milliseconds per operation in both modes.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub label: &'static str,
    pub plaintext_ms: f64,
    pub encrypted_ms: f64,
    pub iterations: u32,
}

/// The full benchmark table plus the cycle budget both modes must fit in.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub cycle_budget_ms: u64,
}

impl BenchReport {
    /// True when the localization row fits the cycle budget in both modes.
    pub fn within_budget(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.label == "User Localization")
            .all(|r| r.plaintext_ms < self.cycle_budget_ms as f64
                && r.encrypted_ms < self.cycle_budget_ms as f64)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mean milliseconds per operation")?;
        writeln!(f, "  {:<20} {:>16} {:>14}", "layer", "w/o encryption", "w/ encryption")?;
        for row in &self.rows {
            writeln!(
                f,
                "  {:<20} {:>16.3} {:>14.3}",
                row.label, row.plaintext_ms, row.encrypted_ms
            )?;
        }
        if self.within_budget() {
            writeln!(
                f,
                "localization fits the {} ms cycle budget in both modes",
                self.cycle_budget_ms
            )?;
        } else {
            writeln!(
                f,
                "localization exceeds the {} ms cycle budget",
                self.cycle_budget_ms
            )?;
        }
        Ok(())
    }
}

fn mean_ms(iterations: u32, mut op: impl FnMut()) -> f64 {
    let started = Instant::now();
    for _ in 0..iterations {
        op();
    }
    started.elapsed().as_secs_f64() * 1_000.0 / f64::from(iterations)
}

fn id_from(tag: u8, n: u32) -> [u8; 16] {
    let mut id = [tag; 16];
    id[12..].copy_from_slice(&n.to_be_bytes());
    id
}

/// Builds the per-beacon sample payloads one cycle of `user_count` probe
/// users would produce, plus the fingerprint map to match them against.
struct LocalizationFixture {
    map: FingerprintMap,
    payloads: Vec<Vec<u8>>,
    users: Vec<HashedUserId>,
    window_end_ms: u64,
}

fn localization_fixture(scenario: &Scenario, user_count: u32) -> Result<LocalizationFixture, CliError> {
    let env = &scenario.environment;
    let salt = scenario.salt();
    let walk = generate_reference_walk(env, &scenario.path_loss, 3.0, 2, &salt, scenario.seed)
        .map_err(|e| validation("reference walk failed", e))?;
    let config = HubConfig::default();
    let map = build_fingerprint_map(&walk, env, &config.kalman, config.weighting)
        .map_err(|e| validation("fingerprint map build failed", e))?;

    let area = &env.areas[0];
    let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed);
    let mut users = Vec::new();
    let mut per_beacon: BTreeMap<_, Vec<RssiSample>> = BTreeMap::new();
    let window_end_ms = scenario.cycle.cycle_period_ms;
    for n in 0..user_count {
        let user = hash_user_id(format!("bench-user-{n}").as_bytes(), &salt)
            .map_err(|e| runtime("probe identity failed", e))?;
        users.push(user);
        let frac = f64::from(n + 1) / f64::from(user_count + 1);
        let position = Position::new(
            area.rect.min_x + frac * area.rect.width(),
            area.rect.min_y + frac * area.rect.height(),
            area.floor,
        );
        for placement in &env.beacons {
            let audible = in_range(env, &scenario.path_loss, &placement.id, &position)
                .map_err(|e| runtime("signal model failed", e))?;
            if !audible {
                continue;
            }
            let rssi = rssi_at(env, &scenario.path_loss, &placement.id, &position, &mut rng)
                .map_err(|e| runtime("signal model failed", e))?;
            let sample = RssiSample::new(placement.id, user, rssi, window_end_ms - 1)
                .map_err(|e| runtime("sample synthesis failed", e))?;
            per_beacon.entry(placement.id).or_default().push(sample);
        }
    }

    let mut payloads = Vec::new();
    for samples in per_beacon.values() {
        let toml = codec::samples_to_toml(samples)
            .map_err(|e| runtime("sample serialization failed", e))?;
        payloads.push(toml.into_bytes());
    }
    Ok(LocalizationFixture {
        map,
        payloads,
        users,
        window_end_ms,
    })
}

/// One localization pass over already-opened payloads: parse, window,
/// fingerprint, match. Shared verbatim by both modes so the only difference
/// the timer sees is the framing.
fn localization_tail(fixture: &LocalizationFixture, opened: &[Vec<u8>], config: &HubConfig) {
    let mut samples = Vec::new();
    for payload in opened {
        let text = std::str::from_utf8(payload).expect("payload was toml");
        samples.extend(codec::samples_from_toml(text).expect("payload round trips"));
    }
    let window =
        SampleWindow::new(samples, 0, fixture.window_end_ms).expect("fixture window is valid");
    let fps: Vec<Fingerprint> = fixture
        .users
        .iter()
        .filter_map(|u| {
            build_fingerprint(&window, &Owner::User(*u), &config.kalman, config.weighting).ok()
        })
        .collect();
    localize_batch(&fps, &fixture.map).expect("fixture map is nonempty");
}

fn bench_localization(scenario: &Scenario, iterations: u32) -> Result<BenchRow, CliError> {
    let fixture = localization_fixture(scenario, 8)?;
    let config = HubConfig::default();

    let mut plain_tx: Vec<PlainSession> = (0..fixture.payloads.len() as u32)
        .map(|n| PlainSession::new(id_from(0xB0, n), id_from(0xA0, 0)))
        .collect();
    let mut plain_rx: Vec<PlainSession> = (0..fixture.payloads.len() as u32)
        .map(|n| PlainSession::new(id_from(0xA0, 0), id_from(0xB0, n)))
        .collect();
    let plaintext_ms = mean_ms(iterations, || {
        let mut opened = Vec::with_capacity(fixture.payloads.len());
        for ((payload, tx), rx) in fixture
            .payloads
            .iter()
            .zip(plain_tx.iter_mut())
            .zip(plain_rx.iter_mut())
        {
            let frame = tx.seal(MsgType::SampleBatch, payload).expect("counter headroom");
            let bytes = frame.encode();
            let decoded = SecureFrame::decode(&bytes).expect("own encoding decodes");
            let (_, plaintext) = rx.open(&decoded).expect("own frame opens");
            opened.push(plaintext);
        }
        localization_tail(&fixture, &opened, &config);
    });

    let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed ^ 0x5EA1);
    let mut sealed_tx = Vec::new();
    let mut sealed_rx = Vec::new();
    for n in 0..fixture.payloads.len() as u32 {
        let (tx, rx) = session_pair(&mut rng, id_from(0xB0, n), id_from(0xA0, 0))?;
        sealed_tx.push(tx);
        sealed_rx.push(rx);
    }
    let encrypted_ms = mean_ms(iterations, || {
        let mut opened = Vec::with_capacity(fixture.payloads.len());
        for ((payload, tx), rx) in fixture
            .payloads
            .iter()
            .zip(sealed_tx.iter_mut())
            .zip(sealed_rx.iter_mut())
        {
            let frame = tx.seal(MsgType::SampleBatch, payload).expect("counter headroom");
            let bytes = frame.encode();
            let decoded = SecureFrame::decode(&bytes).expect("own encoding decodes");
            let (_, plaintext) = rx.open(&decoded).expect("own frame opens");
            opened.push(plaintext);
        }
        localization_tail(&fixture, &opened, &config);
    });

    Ok(BenchRow {
        label: "User Localization",
        plaintext_ms,
        encrypted_ms,
        iterations,
    })
}

/// A connected session pair, built through the pairing flow so both halves
/// carry real derived material.
fn session_pair(
    rng: &mut ChaCha12Rng,
    device_id: [u8; 16],
    beacon_id: [u8; 16],
) -> Result<(SessionKeys, SessionKeys), CliError> {
    let pair_salt: [u8; 16] = rng.random();
    let secret = PairingSecret::derive(&pair_salt, "bench", 0)
        .map_err(|e| runtime("pairing failed", e))?;
    let beacon_secret = PairingSecret::derive(&pair_salt, "bench", 0)
        .map_err(|e| runtime("pairing failed", e))?;
    let request = pairing_request(&secret, device_id, rng.random());
    let mut beacon = BeaconPairing::new(beacon_secret, beacon_id);
    let (response, beacon_session) = beacon
        .respond(&request, rng.random(), 0)
        .map_err(|e| runtime("pairing failed", e))?;
    let device_session = complete_pairing(&secret, &request, &response, 0)
        .map_err(|e| runtime("pairing failed", e))?;
    Ok((device_session, beacon_session))
}

fn bench_store(scenario: &Scenario, iterations: u32) -> Result<BenchRow, CliError> {
    let salt = scenario.salt();
    let store_key = derive_store_key(&salt).map_err(|e| runtime("store key derivation", e))?;
    let mut store = LocationStore::new(28);
    let mut records = Vec::new();
    for n in 0..1_200u32 {
        let user = hash_user_id(format!("store-user-{}", n % 40).as_bytes(), &salt)
            .map_err(|e| runtime("probe identity failed", e))?;
        let area = &scenario.environment.areas[n as usize % scenario.environment.areas.len()];
        let record = LocationRecord::new(
            user,
            area.name.clone(),
            atlas_core::ReferencePointId::new(format!("rp-{:03}", n % 24)),
            0.5,
            u64::from(n / 40 + 1) * scenario.cycle.cycle_period_ms,
        )
        .map_err(|e| runtime("record synthesis failed", e))?;
        records.push(record);
    }
    store.append(records.clone());

    let dir = tempfile::tempdir().map_err(|e| runtime("cannot create scratch directory", e))?;
    let plain_path = dir.path().join("records.toml");
    let plaintext_ms = mean_ms(iterations, || {
        let text = codec::records_to_toml(&records).expect("records serialize");
        std::fs::write(&plain_path, &text).expect("scratch file writes");
        let read = std::fs::read_to_string(&plain_path).expect("scratch file reads");
        let parsed = codec::records_from_toml(&read).expect("own serialization parses");
        assert_eq!(parsed.len(), records.len());
    });

    let sealed_path = dir.path().join("records.store");
    let encrypted_ms = mean_ms(iterations, || {
        store.save(&sealed_path, &store_key).expect("scratch store saves");
        let loaded = LocationStore::load(&sealed_path, &store_key).expect("own store loads");
        assert_eq!(loaded.len(), store.len());
    });

    Ok(BenchRow {
        label: "Database Store",
        plaintext_ms,
        encrypted_ms,
        iterations,
    })
}

fn bench_first_connection(scenario: &Scenario, iterations: u32) -> Result<BenchRow, CliError> {
    let salt = scenario.salt();
    let secret = PairingSecret::derive(&salt, &scenario.environment.id, 0)
        .map_err(|e| runtime("pairing failed", e))?;
    let beacon_secret = PairingSecret::derive(&salt, &scenario.environment.id, 0)
        .map_err(|e| runtime("pairing failed", e))?;
    let mut beacon = BeaconPairing::new(beacon_secret, id_from(0xA0, 0));
    let ping = b"first-contact";

    let mut n = 0u32;
    let plaintext_ms = mean_ms(iterations, || {
        let device_id = id_from(0xB0, n);
        n += 1;
        let mut device = PlainSession::new(device_id, beacon.beacon_id());
        let mut listener = PlainSession::new(beacon.beacon_id(), device_id);
        let frame = device.seal(MsgType::Control, ping).expect("counter headroom");
        let bytes = frame.encode();
        let decoded = SecureFrame::decode(&bytes).expect("own encoding decodes");
        let (_, payload) = listener.open(&decoded).expect("own frame opens");
        assert_eq!(payload, ping);
    });

    let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed ^ 0xF157);
    let encrypted_ms = mean_ms(iterations, || {
        let device_id = id_from(0xB1, n);
        n += 1;
        let request = pairing_request(&secret, device_id, rng.random());
        let (response, mut beacon_session) = beacon
            .respond(&request, rng.random(), 0)
            .expect("bench pairing request is valid");
        let mut device_session =
            complete_pairing(&secret, &request, &response, 0).expect("bench response is valid");
        let frame = device_session
            .seal(MsgType::Control, ping)
            .expect("counter headroom");
        let bytes = frame.encode();
        let decoded = SecureFrame::decode(&bytes).expect("own encoding decodes");
        let (_, payload) = beacon_session.open(&decoded).expect("own frame opens");
        assert_eq!(payload, ping);
    });

    Ok(BenchRow {
        label: "First Connection",
        plaintext_ms,
        encrypted_ms,
        iterations,
    })
}

/// Times the three communication layers with and without the protection
/// layer. The unprotected mode frames payloads verbatim and only runs when
/// the caller explicitly enables it.
pub fn cmd_bench(
    scenario_path: &Path,
    seed_override: Option<u64>,
    plaintext_enabled: bool,
) -> Result<BenchReport, CliError> {
    if !plaintext_enabled {
        return Err(CliError::Usage(
            "bench compares sealed frames against unprotected framing; \
             pass --plaintext to allow the unprotected mode"
            .into(),
        ));
    }
    let scenario = load_scenario(scenario_path, seed_override)?;
    let rows = vec![
        bench_localization(&scenario, 60)?,
        bench_store(&scenario, 20)?,
        bench_first_connection(&scenario, 400)?,
    ];
    Ok(BenchReport {
        rows,
        cycle_budget_ms: scenario.cycle.cycle_period_ms,
    })
}
