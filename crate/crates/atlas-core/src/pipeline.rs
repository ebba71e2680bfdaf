//! Signal pipeline: sort raw samples, smooth per-beacon RSSI streams with a
//! scalar Kalman filter, and aggregate them into fingerprints and the
//! fingerprint map.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Position;
use crate::types::{
    BeaconId, CoreError, Environment, Fingerprint, FingerprintMap, HashedUserId, Owner,
    ReferencePoint, ReferencePointId, RssiSample,
};

/// Default process variance, in dB². Small, because a device is close to
/// static over one measurement burst.
pub const DEFAULT_PROCESS_VARIANCE: f64 = 0.008;
/// Default measurement variance, in dB². Matches the noise of typical indoor
/// RSSI readings (about 2 dB standard deviation).
pub const DEFAULT_MEASUREMENT_VARIANCE: f64 = 4.0;
/// Default variance assigned to the first estimate, in dB².
pub const DEFAULT_INITIAL_ESTIMATE_VARIANCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("kalman filter parameters must be positive: {0} = {1}")]
    NonPositiveVariance(&'static str, f64),
    #[error("cannot filter an empty sample stream")]
    EmptyStream,
    #[error("sample window contains no samples for the requested owner")]
    EmptyWindow,
    #[error("sample at {timestamp} ms is outside the window [{start_ms}, {end_ms})")]
    SampleOutsideWindow {
        timestamp: u64,
        start_ms: u64,
        end_ms: u64,
    },
    #[error("window bounds are inverted: [{start_ms}, {end_ms})")]
    InvalidWindow { start_ms: u64, end_ms: u64 },
    #[error("no reference walks supplied")]
    NoWalks,
    #[error("reference walk at ({x}, {y}) floor {floor} has an empty sample window")]
    EmptyWalkWindow { x: f64, y: f64, floor: i32 },
    #[error("reference walk at ({x}, {y}) floor {floor} is outside the environment bounds")]
    WalkOutOfBounds { x: f64, y: f64, floor: i32 },
    #[error("reference walk at ({x}, {y}) floor {floor} labeled {label:?} but the position lies in {actual:?}")]
    WalkAreaMismatch {
        x: f64,
        y: f64,
        floor: i32,
        label: String,
        actual: Option<String>,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Parameters of the 1-D Kalman filter applied to each beacon's RSSI stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanParams {
    pub process_variance: f64,
    pub measurement_variance: f64,
    pub initial_estimate_variance: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            process_variance: DEFAULT_PROCESS_VARIANCE,
            measurement_variance: DEFAULT_MEASUREMENT_VARIANCE,
            initial_estimate_variance: DEFAULT_INITIAL_ESTIMATE_VARIANCE,
        }
    }
}

impl KalmanParams {
    pub fn new(
        process_variance: f64,
        measurement_variance: f64,
        initial_estimate_variance: f64,
    ) -> Result<Self, PipelineError> {
        let params = Self {
            process_variance,
            measurement_variance,
            initial_estimate_variance,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, value) in [
            ("process_variance", self.process_variance),
            ("measurement_variance", self.measurement_variance),
            ("initial_estimate_variance", self.initial_estimate_variance),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(PipelineError::NonPositiveVariance(name, value));
            }
        }
        Ok(())
    }
}

/// How filtered values are averaged into a fingerprint entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Linear recency weights: the i-th of n values weighs i/Σj. The newest
    /// signal state dominates, which is what a live position estimate wants.
    #[default]
    Recency,
    /// Plain arithmetic mean, kept for comparison runs.
    Equal,
}

/// A batch of samples together with the half-open time window they were
/// collected in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleWindow {
    pub samples: Vec<RssiSample>,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl SampleWindow {
    pub fn new(samples: Vec<RssiSample>, start_ms: u64, end_ms: u64) -> Result<Self, PipelineError> {
        if start_ms >= end_ms {
            return Err(PipelineError::InvalidWindow { start_ms, end_ms });
        }
        for sample in &samples {
            if sample.timestamp < start_ms || sample.timestamp >= end_ms {
                return Err(PipelineError::SampleOutsideWindow {
                    timestamp: sample.timestamp,
                    start_ms,
                    end_ms,
                });
            }
        }
        Ok(Self {
            samples,
            start_ms,
            end_ms,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Sorts samples by timestamp and groups them into per-(device, beacon)
/// streams.
///
/// The sort is stable: samples sharing a timestamp keep their input order.
/// The union of all streams is exactly the input multiset.
pub fn sort_and_group(
    samples: &[RssiSample],
) -> BTreeMap<(HashedUserId, BeaconId), Vec<RssiSample>> {
    let mut streams: BTreeMap<(HashedUserId, BeaconId), Vec<RssiSample>> = BTreeMap::new();
    for sample in samples {
        streams
            .entry((sample.device, sample.beacon))
            .or_default()
            .push(sample.clone());
    }
    for stream in streams.values_mut() {
        stream.sort_by_key(|s| s.timestamp);
    }
    streams
}

/// Smooths a time-ordered RSSI stream with a 1-D Kalman filter.
///
/// The state is initialized to the first measurement with variance P₀; each
/// later measurement z updates it via
///   P ← P + Q,  K ← P/(P+R),  x̂ ← x̂ + K·(z − x̂),  P ← (1−K)·P.
/// Returns the estimate after every step, so the output has the input's
/// length.
pub fn kalman_filter(stream: &[f64], params: &KalmanParams) -> Result<Vec<f64>, PipelineError> {
    params.validate()?;
    let Some((&first, rest)) = stream.split_first() else {
        return Err(PipelineError::EmptyStream);
    };
    let mut estimate = first;
    let mut variance = params.initial_estimate_variance;
    let mut output = Vec::with_capacity(stream.len());
    output.push(estimate);
    for &measurement in rest {
        variance += params.process_variance;
        let gain = variance / (variance + params.measurement_variance);
        estimate += gain * (measurement - estimate);
        variance *= 1.0 - gain;
        output.push(estimate);
    }
    Ok(output)
}

/// Builds one fingerprint from a sample window.
///
/// For a user owner, only that user's samples count; for a reference point
/// owner the whole window belongs to the survey and every sample counts.
/// Per beacon, the entry is the average of the Kalman-filtered stream under
/// the chosen [`Weighting`]; the fingerprint carries the window's end
/// timestamp.
pub fn build_fingerprint(
    window: &SampleWindow,
    owner: &Owner,
    params: &KalmanParams,
    weighting: Weighting,
) -> Result<Fingerprint, PipelineError> {
    let selected: Vec<&RssiSample> = match owner {
        Owner::User(user) => window
            .samples
            .iter()
            .filter(|s| &s.device == user)
            .collect(),
        Owner::Point(_) => window.samples.iter().collect(),
    };
    if selected.is_empty() {
        return Err(PipelineError::EmptyWindow);
    }

    let mut per_beacon: BTreeMap<BeaconId, Vec<&RssiSample>> = BTreeMap::new();
    for sample in selected {
        per_beacon.entry(sample.beacon).or_default().push(sample);
    }

    let mut entries = BTreeMap::new();
    for (beacon, mut stream) in per_beacon {
        stream.sort_by_key(|s| s.timestamp);
        let values: Vec<f64> = stream.iter().map(|s| s.rssi).collect();
        let filtered = kalman_filter(&values, params)?;
        entries.insert(beacon, average(&filtered, weighting));
    }

    Ok(Fingerprint::new(entries, window.end_ms, owner.clone())?)
}

fn average(values: &[f64], weighting: Weighting) -> f64 {
    match weighting {
        Weighting::Recency => {
            let n = values.len();
            let total_weight = (n * (n + 1)) as f64 / 2.0;
            values
                .iter()
                .enumerate()
                .map(|(idx, value)| (idx + 1) as f64 * value)
                .sum::<f64>()
                / total_weight
        }
        Weighting::Equal => values.iter().sum::<f64>() / values.len() as f64,
    }
}

/// One stop of a setup-stage survey: where the surveyor stood, the area label
/// claimed for that spot, and the samples collected while dwelling there.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceWalkPoint {
    pub position: Position,
    pub area: String,
    pub window: SampleWindow,
}

/// Builds the fingerprint map from a setup-stage reference walk.
///
/// Each walk point becomes one reference point named `rp-NNN` in walk order;
/// ids are zero-padded so lexicographic tie-breaking matches walk order.
pub fn build_fingerprint_map(
    walks: &[ReferenceWalkPoint],
    env: &Environment,
    params: &KalmanParams,
    weighting: Weighting,
) -> Result<FingerprintMap, PipelineError> {
    if walks.is_empty() {
        return Err(PipelineError::NoWalks);
    }
    env.validate()?;

    let mut points = Vec::with_capacity(walks.len());
    let mut created_at = 0;
    for (idx, walk) in walks.iter().enumerate() {
        let Position { x, y, floor } = walk.position;
        if !env.bounds.contains(x, y) {
            return Err(PipelineError::WalkOutOfBounds { x, y, floor });
        }
        let actual = env.area_of(&walk.position).map(|a| a.name.clone());
        if actual.as_deref() != Some(walk.area.as_str()) {
            return Err(PipelineError::WalkAreaMismatch {
                x,
                y,
                floor,
                label: walk.area.clone(),
                actual,
            });
        }
        if walk.window.is_empty() {
            return Err(PipelineError::EmptyWalkWindow { x, y, floor });
        }
        let id = ReferencePointId::new(format!("rp-{idx:03}"));
        let fingerprint =
            build_fingerprint(&walk.window, &Owner::Point(id.clone()), params, weighting)?;
        created_at = created_at.max(walk.window.end_ms);
        points.push(ReferencePoint {
            id,
            position: walk.position,
            area: walk.area.clone(),
            fingerprint,
        });
    }

    Ok(FingerprintMap::new(points, env.id.clone(), created_at)?)
}
