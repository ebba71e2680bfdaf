//! Fingerprint matching: compare a live fingerprint against the reference
//! map and pick the proximal reference point.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::types::{
    BeaconId, CoreError, Fingerprint, FingerprintMap, HashedUserId, LocationRecord, Owner,
    ReferencePointId,
};

/// Candidates sharing fewer beacons than this with the user are discarded
/// before matching; a single shared beacon cannot distinguish positions.
pub const MIN_COMMON_BEACONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocalizerError {
    #[error("cannot localize against an empty fingerprint map")]
    EmptyMap,
    #[error("expected a user-owned fingerprint, got a reference-point fingerprint")]
    NotAUserFingerprint,
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// How a matched reference point scored.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchWeight {
    pub reference_point: ReferencePointId,
    /// RMS RSSI distance over the common beacons, in dB.
    pub distance: f64,
    /// Similarity 1/(1+distance), in (0, 1].
    pub weight: f64,
}

/// Outcome of matching one user fingerprint against the map.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub user: HashedUserId,
    pub best: MatchWeight,
    pub runner_up: Option<MatchWeight>,
    /// best.weight − runner_up.weight; 0 when there is no runner-up.
    pub margin: f64,
    pub timestamp: u64,
}

/// Which candidate the matcher selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionRule {
    /// Highest similarity weight, i.e. smallest RMS distance. The default:
    /// the nearest signal neighbor wins.
    #[default]
    HighestSimilarity,
    /// Highest raw RMS distance. A deliberately naive reading that picks the
    /// farthest candidate; kept selectable for comparison, never used by the
    /// hub.
    HighestRawDistance,
}

/// Key-set intersection of two fingerprints.
pub fn common_beacons(a: &Fingerprint, b: &Fingerprint) -> BTreeSet<BeaconId> {
    a.entries
        .keys()
        .filter(|beacon| b.entries.contains_key(*beacon))
        .copied()
        .collect()
}

/// RMS RSSI distance over the common beacons, or `None` when fewer than
/// [`MIN_COMMON_BEACONS`] beacons are shared and the pair is not comparable.
pub fn fingerprint_distance(user: &Fingerprint, reference: &Fingerprint) -> Option<f64> {
    let common = common_beacons(user, reference);
    if common.len() < MIN_COMMON_BEACONS {
        return None;
    }
    let sum_sq: f64 = common
        .iter()
        .map(|beacon| {
            let diff = user.entries[beacon] - reference.entries[beacon];
            diff * diff
        })
        .sum();
    Some((sum_sq / common.len() as f64).sqrt())
}

fn weight_from_distance(distance: f64) -> f64 {
    1.0 / (1.0 + distance)
}

/// Matches one user fingerprint against the map.
///
/// Candidates sharing fewer than [`MIN_COMMON_BEACONS`] beacons are
/// discarded; among the rest the [`SelectionRule`] picks the winner, with
/// ties broken toward the lexicographically smallest reference point id.
/// Returns `Ok(None)` when every map point was discarded (the user is
/// unlocatable).
pub fn localize(
    user_fp: &Fingerprint,
    map: &FingerprintMap,
) -> Result<Option<LocalizationResult>, LocalizerError> {
    localize_with_rule(user_fp, map, SelectionRule::HighestSimilarity)
}

pub fn localize_with_rule(
    user_fp: &Fingerprint,
    map: &FingerprintMap,
    rule: SelectionRule,
) -> Result<Option<LocalizationResult>, LocalizerError> {
    if map.points.is_empty() {
        return Err(LocalizerError::EmptyMap);
    }
    let Owner::User(user) = &user_fp.owner else {
        return Err(LocalizerError::NotAUserFingerprint);
    };

    let mut candidates: Vec<MatchWeight> = map
        .points
        .iter()
        .filter_map(|point| {
            fingerprint_distance(user_fp, &point.fingerprint).map(|distance| MatchWeight {
                reference_point: point.id.clone(),
                distance,
                weight: weight_from_distance(distance),
            })
        })
        .collect();
    if candidates.is_empty() {
        return Ok(None);
    }

    // Rank best-first; ties fall back to the id so the result never depends
    // on map order.
    candidates.sort_by(|a, b| {
        let primary = match rule {
            SelectionRule::HighestSimilarity => b.weight.total_cmp(&a.weight),
            SelectionRule::HighestRawDistance => b.distance.total_cmp(&a.distance),
        };
        primary.then_with(|| a.reference_point.cmp(&b.reference_point))
    });

    let mut ranked = candidates.into_iter();
    let best = ranked.next().expect("nonempty candidate list");
    let runner_up = ranked.next();
    let margin = runner_up.as_ref().map_or(0.0, |r| best.weight - r.weight);
    Ok(Some(LocalizationResult {
        user: *user,
        best,
        runner_up,
        margin,
        timestamp: user_fp.timestamp,
    }))
}

/// Batch localization outcome: located users with their records, plus the
/// users no map point could be compared against.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchResult {
    pub located: BTreeMap<HashedUserId, LocationRecord>,
    pub unlocatable: Vec<HashedUserId>,
}

/// Localizes each user fingerprint and materializes location records.
///
/// The record's area comes from the winning reference point, its confidence
/// is the winning weight, and its timestamp is the fingerprint's.
pub fn localize_batch(
    user_fps: &[Fingerprint],
    map: &FingerprintMap,
) -> Result<BatchResult, LocalizerError> {
    let mut outcome = BatchResult::default();
    for fp in user_fps {
        match localize(fp, map)? {
            Some(result) => {
                let point = map
                    .get(&result.best.reference_point)
                    .expect("winner comes from this map");
                let record = LocationRecord::new(
                    result.user,
                    point.area.clone(),
                    result.best.reference_point.clone(),
                    result.best.weight,
                    result.timestamp,
                )?;
                outcome.located.insert(result.user, record);
            }
            None => {
                let Owner::User(user) = &fp.owner else {
                    unreachable!("localize rejects non-user fingerprints");
                };
                outcome.unlocatable.push(*user);
            }
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    

    use uuid::Uuid;

    use super::*;
    use crate::geom::Position;
    use crate::types::{hash_user_id, ReferencePoint};

    fn bid(n: u128) -> BeaconId {
        BeaconId::new(Uuid::from_u128(n))
    }

    fn uid(n: u8) -> HashedUserId {
        hash_user_id(&[n], &[0u8; 16]).unwrap()
    }

    fn fp(owner: Owner, entries: &[(BeaconId, f64)]) -> Fingerprint {
        Fingerprint::new(entries.iter().copied().collect(), 1000, owner).unwrap()
    }

    fn map_of(points: Vec<(&str, &str, Fingerprint)>) -> FingerprintMap {
        let points = points
            .into_iter()
            .map(|(id, area, fingerprint)| ReferencePoint {
                id: id.into(),
                position: Position::new(0.0, 0.0, 0),
                area: area.into(),
                fingerprint,
            })
            .collect();
        FingerprintMap::new(points, "env", 1).unwrap()
    }

    #[test]
    fn common_beacons_is_exact_intersection() {
        let a = fp(
            Owner::User(uid(1)),
            &[(bid(1), -60.0), (bid(2), -70.0), (bid(3), -80.0)],
        );
        let b = fp(
            Owner::Point("rp-000".into()),
            &[(bid(2), -65.0), (bid(3), -75.0), (bid(4), -85.0)],
        );
        let common = common_beacons(&a, &b);
        assert_eq!(common, [bid(2), bid(3)].into_iter().collect());

        let disjoint = fp(Owner::Point("rp-001".into()), &[(bid(9), -50.0)]);
        assert!(common_beacons(&a, &disjoint).is_empty());
    }

    #[test]
    fn distance_matches_rms_formula() {
        let user = fp(Owner::User(uid(1)), &[(bid(1), -60.0), (bid(2), -70.0)]);
        let reference = fp(
            Owner::Point("rp-000".into()),
            &[(bid(1), -63.0), (bid(2), -74.0)],
        );
        // Diffs of 3 and 4 dB: sqrt((9+16)/2).
        let d = fingerprint_distance(&user, &reference).unwrap();
        assert!((d - 3.5355339059327378).abs() < 1e-12);
    }

    #[test]
    fn identical_fingerprints_have_zero_distance_and_weight_one() {
        let entries = [(bid(1), -60.0), (bid(2), -70.0), (bid(3), -80.0)];
        let user = fp(Owner::User(uid(1)), &entries);
        let reference = fp(Owner::Point("rp-000".into()), &entries);
        assert_eq!(fingerprint_distance(&user, &reference), Some(0.0));

        let map = map_of(vec![("rp-000", "lab", reference)]);
        let result = localize(&user, &map).unwrap().unwrap();
        assert_eq!(result.best.weight, 1.0);
        assert_eq!(result.best.distance, 0.0);
        assert_eq!(result.margin, 0.0);
        assert!(result.runner_up.is_none());
    }

    #[test]
    fn single_common_beacon_is_inapplicable() {
        let user = fp(Owner::User(uid(1)), &[(bid(1), -60.0), (bid(2), -70.0)]);
        let reference = fp(
            Owner::Point("rp-000".into()),
            &[(bid(2), -70.0), (bid(3), -80.0)],
        );
        assert_eq!(fingerprint_distance(&user, &reference), None);
    }

    #[test]
    fn user_sharing_too_few_beacons_with_every_point_is_unlocatable() {
        let user = fp(Owner::User(uid(1)), &[(bid(1), -60.0), (bid(2), -70.0)]);
        let map = map_of(vec![
            (
                "rp-000",
                "lab",
                fp(
                    Owner::Point("rp-000".into()),
                    &[(bid(2), -70.0), (bid(3), -80.0)],
                ),
            ),
            (
                "rp-001",
                "hall",
                fp(
                    Owner::Point("rp-001".into()),
                    &[(bid(4), -70.0), (bid(5), -80.0)],
                ),
            ),
        ]);
        assert_eq!(localize(&user, &map).unwrap(), None);
    }

    #[test]
    fn ties_break_toward_smallest_id() {
        let entries = [(bid(1), -60.0), (bid(2), -70.0)];
        let user = fp(Owner::User(uid(1)), &entries);
        let same_a = fp(Owner::Point("rp-b".into()), &entries);
        let same_b = fp(Owner::Point("rp-a".into()), &entries);
        let map = map_of(vec![("rp-b", "lab", same_a), ("rp-a", "hall", same_b)]);
        let result = localize(&user, &map).unwrap().unwrap();
        assert_eq!(result.best.reference_point, "rp-a".into());
        // Both candidates tie at weight 1.0, so the margin collapses.
        assert_eq!(result.margin, 0.0);
    }

    #[test]
    fn margin_is_weight_gap_between_top_two() {
        let user = fp(Owner::User(uid(1)), &[(bid(1), -60.0), (bid(2), -70.0)]);
        let near = fp(
            Owner::Point("rp-000".into()),
            &[(bid(1), -61.0), (bid(2), -71.0)],
        );
        let far = fp(
            Owner::Point("rp-001".into()),
            &[(bid(1), -80.0), (bid(2), -90.0)],
        );
        let map = map_of(vec![("rp-000", "lab", near), ("rp-001", "hall", far)]);
        let result = localize(&user, &map).unwrap().unwrap();
        assert_eq!(result.best.reference_point, "rp-000".into());
        let runner = result.runner_up.unwrap();
        assert!((result.margin - (result.best.weight - runner.weight)).abs() < 1e-15);
        assert!(result.margin > 0.0);
    }

    #[test]
    fn raw_distance_rule_picks_the_farthest_candidate() {
        let user = fp(Owner::User(uid(1)), &[(bid(1), -60.0), (bid(2), -70.0)]);
        let near = fp(
            Owner::Point("rp-000".into()),
            &[(bid(1), -61.0), (bid(2), -71.0)],
        );
        let far = fp(
            Owner::Point("rp-001".into()),
            &[(bid(1), -80.0), (bid(2), -90.0)],
        );
        let map = map_of(vec![("rp-000", "lab", near), ("rp-001", "hall", far)]);
        let result = localize_with_rule(&user, &map, SelectionRule::HighestRawDistance)
            .unwrap()
            .unwrap();
        assert_eq!(result.best.reference_point, "rp-001".into());
    }

    #[test]
    fn batch_localization_builds_records_and_reports_unlocatable() {
        let entries = [(bid(1), -60.0), (bid(2), -70.0)];
        let locatable = fp(Owner::User(uid(1)), &entries);
        let stranded = fp(Owner::User(uid(2)), &[(bid(8), -60.0), (bid(9), -70.0)]);
        let map = map_of(vec![(
            "rp-000",
            "lab",
            fp(Owner::Point("rp-000".into()), &entries),
        )]);
        let outcome = localize_batch(&[locatable, stranded], &map).unwrap();
        assert_eq!(outcome.located.len(), 1);
        let record = &outcome.located[&uid(1)];
        assert_eq!(record.area, "lab");
        assert_eq!(record.confidence, 1.0);
        assert_eq!(record.timestamp, 1000);
        assert_eq!(outcome.unlocatable, vec![uid(2)]);
    }

    #[test]
    fn empty_map_is_an_error() {
        let user = fp(Owner::User(uid(1)), &[(bid(1), -60.0), (bid(2), -70.0)]);
        let map = FingerprintMap {
            points: vec![],
            environment_id: "env".into(),
            created_at: 1,
        };
        assert_eq!(localize(&user, &map).unwrap_err(), LocalizerError::EmptyMap);
    }
}
