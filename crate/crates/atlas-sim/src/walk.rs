//! Setup-stage survey synthesis: walk an even grid over the floor plan,
//! dwell at each point, and collect per-beacon samples for the fingerprint
//! map builder.

use atlas_core::geom::{point_on_segment, GEOM_EPS};
use atlas_core::pipeline::{ReferenceWalkPoint, SampleWindow};
use atlas_core::{hash_user_id, Environment, Position, RssiSample};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::radio::{in_range, rssi_at, PathLossParams};
use crate::SimError;

/// The surveyor's synthetic identity. Setup samples need a device id like any
/// other sample, but the surveyor is not a tracked user.
const SURVEYOR_RAW_ID: &[u8] = b"reference-surveyor";

/// Grid timestamps start here; zero is not a valid sample time.
const WALK_EPOCH_MS: u64 = 1_000;

fn grid_values(min: f64, max: f64, spacing: f64) -> Vec<f64> {
    let mut values = Vec::new();
    let mut i = 0u32;
    loop {
        let v = min + f64::from(i) * spacing;
        if v > max + GEOM_EPS {
            break;
        }
        values.push(v);
        i += 1;
    }
    values
}

/// Walks an even `grid_spacing_m` grid over every floor that has areas,
/// dwelling `dwell_s` seconds per point and collecting one sample per
/// in-range beacon per second. Grid points on a wall segment, or outside
/// every named area, are skipped: they are not surveyable standing spots.
pub fn generate_reference_walk(
    env: &Environment,
    params: &PathLossParams,
    grid_spacing_m: f64,
    dwell_s: u32,
    salt: &[u8],
    seed: u64,
) -> Result<Vec<ReferenceWalkPoint>, SimError> {
    env.validate()?;
    params.validate()?;
    if !grid_spacing_m.is_finite() || grid_spacing_m <= 0.0 {
        return Err(SimError::BadGridSpacing(grid_spacing_m));
    }
    if dwell_s == 0 {
        return Err(SimError::ZeroDwell);
    }

    let surveyor = hash_user_id(SURVEYOR_RAW_ID, salt)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dwell_ms = u64::from(dwell_s) * 1_000;

    let floors: std::collections::BTreeSet<i32> = env.areas.iter().map(|a| a.floor).collect();
    let xs = grid_values(env.bounds.min_x, env.bounds.max_x, grid_spacing_m);
    let ys = grid_values(env.bounds.min_y, env.bounds.max_y, grid_spacing_m);

    let mut walk = Vec::new();
    let mut start_ms = WALK_EPOCH_MS;
    for floor in floors {
        for &y in &ys {
            for &x in &xs {
                let position = Position::new(x, y, floor);
                let Some(area) = env.area_of(&position) else {
                    continue;
                };
                let on_wall = env
                    .walls_on_floor(floor)
                    .any(|w| point_on_segment((x, y), (w.x1, w.y1), (w.x2, w.y2)));
                if on_wall {
                    continue;
                }

                let audible: Vec<_> = env
                    .beacons
                    .iter()
                    .filter(|p| in_range(env, params, &p.id, &position).unwrap_or(false))
                    .collect();
                let mut samples = Vec::with_capacity(audible.len() * dwell_s as usize);
                for second in 0..u64::from(dwell_s) {
                    let timestamp = start_ms + second * 1_000;
                    for placement in &audible {
                        let rssi = rssi_at(env, params, &placement.id, &position, &mut rng)?;
                        samples.push(RssiSample::new(placement.id, surveyor, rssi, timestamp)?);
                    }
                }

                walk.push(ReferenceWalkPoint {
                    position,
                    area: area.name.clone(),
                    window: SampleWindow::new(samples, start_ms, start_ms + dwell_ms)?,
                });
                start_ms += dwell_ms;
            }
        }
    }

    if walk.is_empty() {
        return Err(SimError::NoGridPoints);
    }
    Ok(walk)
}
