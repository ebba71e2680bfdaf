//! Property tests for the matcher: equivalence with a brute-force oracle,
//! rank monotonicity, and order independence.

use std::collections::BTreeMap;

use atlas_core::localizer::{fingerprint_distance, localize, MIN_COMMON_BEACONS};
use atlas_core::types::{
    hash_user_id, BeaconId, Fingerprint, FingerprintMap, HashedUserId, Owner, ReferencePoint,
    ReferencePointId,
};
use atlas_core::Position;
use proptest::prelude::*;
use uuid::Uuid;

fn bid(n: u128) -> BeaconId {
    BeaconId::new(Uuid::from_u128(n))
}

fn uid(n: u8) -> HashedUserId {
    hash_user_id(&[n], &[0u8; 16]).unwrap()
}

fn user_fp(entries: BTreeMap<BeaconId, f64>) -> Fingerprint {
    Fingerprint::new(entries, 1000, Owner::User(uid(1))).unwrap()
}

fn map_from_entry_sets(sets: Vec<BTreeMap<BeaconId, f64>>) -> FingerprintMap {
    let points = sets
        .into_iter()
        .enumerate()
        .map(|(idx, entries)| {
            let id = ReferencePointId::new(format!("rp-{idx:03}"));
            ReferencePoint {
                id: id.clone(),
                position: Position::new(0.0, 0.0, 0),
                area: format!("area-{idx}"),
                fingerprint: Fingerprint::new(entries, 1000, Owner::Point(id)).unwrap(),
            }
        })
        .collect();
    FingerprintMap::new(points, "env", 1).unwrap()
}

/// Brute-force reference: RMS distance over the common beacons computed with
/// plain loops, minimum distance wins, lexicographic id breaks ties.
fn oracle_best(user: &Fingerprint, map: &FingerprintMap) -> Option<(ReferencePointId, f64)> {
    let mut best: Option<(ReferencePointId, f64)> = None;
    for point in &map.points {
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for (beacon, rssi) in &user.entries {
            if let Some(other) = point.fingerprint.entries.get(beacon) {
                sum_sq += (rssi - other) * (rssi - other);
                count += 1;
            }
        }
        if count < MIN_COMMON_BEACONS {
            continue;
        }
        let distance = (sum_sq / count as f64).sqrt();
        best = match best {
            None => Some((point.id.clone(), distance)),
            Some((bid, bdist)) => {
                if distance < bdist || (distance == bdist && point.id < bid) {
                    Some((point.id.clone(), distance))
                } else {
                    Some((bid, bdist))
                }
            }
        };
    }
    best
}

fn entries_strategy() -> impl Strategy<Value = BTreeMap<BeaconId, f64>> {
    prop::collection::btree_map(
        (1u128..10).prop_map(bid),
        (-1000i64..=-300).prop_map(|v| v as f64 / 10.0),
        1..8,
    )
}

proptest! {
    #[test]
    fn localize_agrees_with_brute_force_oracle(
        user_entries in entries_strategy(),
        map_sets in prop::collection::vec(entries_strategy(), 1..20),
    ) {
        let user = user_fp(user_entries);
        let map = map_from_entry_sets(map_sets);
        let expected = oracle_best(&user, &map);
        let got = localize(&user, &map).unwrap();
        match (expected, got) {
            (None, None) => {}
            (Some((id, distance)), Some(result)) => {
                prop_assert_eq!(&result.best.reference_point, &id);
                prop_assert!((result.best.distance - distance).abs() < 1e-12);
                prop_assert!(
                    (result.best.weight - 1.0 / (1.0 + distance)).abs() < 1e-12
                );
            }
            (expected, got) => {
                return Err(TestCaseError::fail(format!(
                    "oracle {expected:?} vs localize {got:?}"
                )));
            }
        }
    }

    #[test]
    fn map_order_never_changes_the_winner(
        user_entries in entries_strategy(),
        map_sets in prop::collection::vec(entries_strategy(), 2..15),
        rotation in 1usize..15,
    ) {
        let user = user_fp(user_entries);
        let map = map_from_entry_sets(map_sets);
        let baseline = localize(&user, &map).unwrap();

        let mut shuffled = map.clone();
        let mid = rotation % shuffled.points.len();
        shuffled.points.rotate_left(mid);
        let rotated = localize(&user, &shuffled).unwrap();

        match (baseline, rotated) {
            (None, None) => {}
            (Some(a), Some(b)) => prop_assert_eq!(a.best.reference_point, b.best.reference_point),
            (a, b) => return Err(TestCaseError::fail(format!("{a:?} vs {b:?}"))),
        }
    }

    #[test]
    fn worsening_one_candidate_never_improves_its_rank(
        user_entries in entries_strategy(),
        map_sets in prop::collection::vec(entries_strategy(), 1..12),
        victim in 0usize..12,
        extra in 0.5f64..20.0,
    ) {
        let user = user_fp(user_entries);
        let map = map_from_entry_sets(map_sets);
        let victim = victim % map.points.len();
        let victim_id = map.points[victim].id.clone();

        // Pick a common beacon of the victim and push its reference value
        // further away from the user's reading.
        let common: Vec<BeaconId> = user
            .entries
            .keys()
            .filter(|b| map.points[victim].fingerprint.entries.contains_key(*b))
            .copied()
            .collect();
        prop_assume!(!common.is_empty());
        let beacon = common[0];

        let rank = |m: &FingerprintMap| -> Option<usize> {
            let victim_distance = fingerprint_distance(
                &user,
                &m.points.iter().find(|p| p.id == victim_id).unwrap().fingerprint,
            )?;
            let mut better = 0;
            for point in &m.points {
                if point.id == victim_id {
                    continue;
                }
                if let Some(d) = fingerprint_distance(&user, &point.fingerprint) {
                    if d < victim_distance || (d == victim_distance && point.id < victim_id) {
                        better += 1;
                    }
                }
            }
            Some(better)
        };

        let before = rank(&map);
        prop_assume!(before.is_some());

        let mut worsened = map.clone();
        let entry = worsened.points[victim]
            .fingerprint
            .entries
            .get_mut(&beacon)
            .unwrap();
        let user_value = user.entries[&beacon];
        // Move away from the user's value, clamped to the representable range.
        let direction = if *entry >= user_value { 1.0 } else { -1.0 };
        *entry = (*entry + direction * extra).clamp(-110.0, 0.0);
        prop_assume!((*entry - user_value).abs() >= (map.points[victim].fingerprint.entries[&beacon] - user_value).abs());

        let after = rank(&worsened);
        prop_assert!(after.unwrap() >= before.unwrap());
    }

    #[test]
    fn added_point_only_wins_when_strictly_better_or_tying_with_smaller_id(
        user_entries in entries_strategy(),
        map_sets in prop::collection::vec(entries_strategy(), 1..12),
        new_entries in entries_strategy(),
    ) {
        let user = user_fp(user_entries);
        let map = map_from_entry_sets(map_sets);
        let before = localize(&user, &map).unwrap();

        let mut extended = map.clone();
        let new_id = ReferencePointId::new("rp-999");
        extended.points.push(ReferencePoint {
            id: new_id.clone(),
            position: Position::new(0.0, 0.0, 0),
            area: "area-new".into(),
            fingerprint: Fingerprint::new(new_entries, 1000, Owner::Point(new_id.clone()))
                .unwrap(),
        });
        let after = localize(&user, &extended).unwrap();

        match (before, after) {
            (None, None) => {}
            // The old winner must persist unless the new point strictly beats
            // it ("rp-999" sorts after every "rp-NNN", so it cannot win a tie).
            (Some(a), Some(b)) => {
                if b.best.reference_point == new_id {
                    prop_assert!(b.best.weight > a.best.weight);
                } else {
                    prop_assert_eq!(a.best.reference_point, b.best.reference_point);
                }
            }
            (None, Some(b)) => prop_assert_eq!(b.best.reference_point, new_id),
            (a, b) => return Err(TestCaseError::fail(format!("{a:?} vs {b:?}"))),
        }
    }

    #[test]
    fn confidence_is_in_unit_interval_and_one_only_at_zero_distance(
        user_entries in entries_strategy(),
        map_sets in prop::collection::vec(entries_strategy(), 1..15),
    ) {
        let user = user_fp(user_entries);
        let map = map_from_entry_sets(map_sets);
        if let Some(result) = localize(&user, &map).unwrap() {
            prop_assert!(result.best.weight > 0.0 && result.best.weight <= 1.0);
            prop_assert_eq!(result.best.weight == 1.0, result.best.distance == 0.0);
            prop_assert!(result.margin >= 0.0);
            if let Some(runner) = &result.runner_up {
                prop_assert!(result.best.weight >= runner.weight);
            }
        }
    }
}
