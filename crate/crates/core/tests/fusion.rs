use std::collections::BTreeMap;

use proptest::prelude::*;
use tagsync::fusion::{
    assign_identities, greedy_pairs, identify, sequence_distance, synchronize_drop, BinObservations, DistanceMatrix,
    EventKind, FusionEngine, IdentityStatus, REVOKE_THRESHOLD_CMS, VALIDATION_BINS, WINDOW_BINS,
};
use tagsync::ids::{SkeletonId, TagId};

const P1: SkeletonId = SkeletonId(101);
const P2: SkeletonId = SkeletonId(102);
const P3: SkeletonId = SkeletonId(103);

fn obs(bin: u64, persons: &[(SkeletonId, Option<f64>)], tags: &[(TagId, Option<f64>)]) -> BinObservations {
    BinObservations {
        bin,
        persons: persons.iter().map(|&(s, v)| (s, v.map(|v| vec![v]))).collect(),
        tags: tags.iter().map(|&(t, v)| (t, v.map(|v| vec![v]))).collect(),
    }
}

/// Distinct smooth velocity profiles per entity.
fn wave(k: u64, phase: f64) -> f64 {
    0.8 * ((k as f64) * 0.45 + phase).sin()
}

#[test]
fn two_failing_tags_drop_bins_three_and_six() {
    let (t1, t2) = (TagId(1), TagId(2));
    let stream: Vec<BinObservations> = (1..=10)
        .map(|b| {
            obs(
                b,
                &[(P1, Some(0.1)), (P2, Some(0.2)), (P3, Some(0.3))],
                &[(t1, (b != 3).then_some(0.1)), (t2, (b != 6).then_some(0.2))],
            )
        })
        .collect();
    let sync = synchronize_drop(&[t1, t2], &stream);
    assert_eq!(sync.dropped, vec![3, 6]);
    assert_eq!(sync.retained.len(), 8);
    for seq in sync.persons.values().chain(sync.tags.values()) {
        let bins: Vec<u64> = seq.iter().map(|e| e.0).collect();
        assert_eq!(bins, sync.retained);
    }
    assert_eq!(sync.persons.len() + sync.tags.len(), 5);
}

#[test]
fn no_failures_retains_everything() {
    let stream: Vec<_> = (0..30).map(|b| obs(b, &[(P1, Some(0.0))], &[(TagId(1), Some(0.0))])).collect();
    let sync = synchronize_drop(&[TagId(1)], &stream);
    assert!(sync.dropped.is_empty());
    assert_eq!(sync.retained.len(), 30);
}

#[test]
fn three_contiguous_failures_depart_the_tag() {
    let (t1, t2) = (TagId(1), TagId(2));
    let stream: Vec<_> = (0..12)
        .map(|b| obs(b, &[(P1, Some(0.0))], &[(t1, Some(0.0)), (t2, (!(4..).contains(&b)).then_some(0.0))]))
        .collect();
    let sync = synchronize_drop(&[t1, t2], &stream);
    assert_eq!(sync.dropped, vec![4, 5, 6]);
    assert_eq!(sync.retained, vec![0, 1, 2, 3, 7, 8, 9, 10, 11]);
    let t2_bins: Vec<u64> = sync.tags[&t2].iter().map(|e| e.0).collect();
    assert_eq!(t2_bins, vec![0, 1, 2, 3]);
}

#[test]
fn two_failures_do_not_depart() {
    let t1 = TagId(1);
    let fails = [3u64, 4, 6, 7];
    let stream: Vec<_> = (0..10)
        .map(|b| obs(b, &[(P1, Some(0.0))], &[(t1, (!fails.contains(&b)).then_some(0.0))]))
        .collect();
    assert_eq!(synchronize_drop(&[t1], &stream).dropped, fails.to_vec());
}

#[test]
fn incomplete_person_drops_the_bin() {
    let stream = vec![
        obs(0, &[(P1, Some(0.0))], &[(TagId(1), Some(0.0))]),
        obs(1, &[(P1, Some(0.0)), (P2, None)], &[(TagId(1), Some(0.0))]),
    ];
    assert_eq!(synchronize_drop(&[TagId(1)], &stream).dropped, vec![1]);
}

proptest! {
    #[test]
    fn retained_sequences_share_bins(
        fails in prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.3), 3), 10..80),
        person_gaps in prop::collection::vec(prop::bool::weighted(0.05), 10..80),
    ) {
        let tags = [TagId(1), TagId(2), TagId(3)];
        let stream: Vec<BinObservations> = fails
            .iter()
            .zip(person_gaps.iter().chain(std::iter::repeat(&false)))
            .enumerate()
            .map(|(b, (f, &gap))| {
                let t: Vec<(TagId, Option<f64>)> = tags.iter().zip(f).map(|(&t, &x)| (t, (!x).then_some(0.1))).collect();
                obs(b as u64, &[(P1, (!gap).then_some(0.2)), (P2, Some(0.3))], &t)
            })
            .collect();
        let sync = synchronize_drop(&tags, &stream);
        prop_assert_eq!(sync.retained.len() + sync.dropped.len(), stream.len());
        for seq in sync.persons.values() {
            let bins: Vec<u64> = seq.iter().map(|e| e.0).collect();
            prop_assert_eq!(&bins, &sync.retained);
        }
        // a tag that never departs is present in every retained bin
        for (t, seq) in &sync.tags {
            let i = tags.iter().position(|x| x == t).unwrap();
            let mut run = 0;
            let departs = fails.iter().any(|f| {
                run = if f[i] { run + 1 } else { 0 };
                run >= 3
            });
            if !departs {
                let bins: Vec<u64> = seq.iter().map(|e| e.0).collect();
                prop_assert_eq!(&bins, &sync.retained);
            }
        }
        // in every retained bin, every tag present at the bin's start succeeded
        for b in &sync.retained {
            let o = &stream[*b as usize];
            prop_assert!(o.persons.values().all(Option::is_some));
        }
    }
}

#[test]
fn single_pair_matches_after_one_window() {
    let t = TagId(7);
    let stream: Vec<_> = (0..40).map(|b| obs(b, &[(P1, Some(wave(b, 0.0)))], &[(t, Some(wave(b, 0.0) + 0.05))])).collect();
    let mut engine = FusionEngine::new(&[t]);
    for o in &stream[..WINDOW_BINS - 1] {
        engine.step(o).unwrap();
    }
    assert_eq!(engine.match_of_tag(t), None);
    engine.step(&stream[WINDOW_BINS - 1]).unwrap();
    assert_eq!(engine.match_of_tag(t), Some(P1));
    let assign = &engine.events()[0];
    assert_eq!(assign.kind, EventKind::Assign);
    assert!((assign.distance_cms.unwrap() - 5.0).abs() < 1e-9);
}

#[test]
fn crossed_labels_resolve_by_velocity() {
    let (t1, t2) = (TagId(1), TagId(2));
    let stream: Vec<_> = (0..20)
        .map(|b| {
            obs(
                b,
                &[(P1, Some(wave(b, 0.0))), (P2, Some(wave(b, 2.0)))],
                &[(t1, Some(wave(b, 2.0))), (t2, Some(wave(b, 0.0)))],
            )
        })
        .collect();
    let out = identify(&[t1, t2], &stream, 8).unwrap();
    let last: BTreeMap<SkeletonId, Option<TagId>> =
        out.identity.iter().filter(|r| r.t_s == 8).map(|r| (r.skeleton, r.tag)).collect();
    assert_eq!(last[&P1], Some(t2));
    assert_eq!(last[&P2], Some(t1));
}

#[test]
fn newcomer_waits_for_the_next_window() {
    let (t1, t2) = (TagId(1), TagId(2));
    let mut engine = FusionEngine::new(&[t1, t2]);
    for b in 0..60u64 {
        let mut persons = vec![(P1, Some(wave(b, 0.0)))];
        if b >= 5 {
            persons.push((P2, Some(wave(b, 2.5))));
        }
        engine
            .step(&obs(b, &persons, &[(t1, Some(wave(b, 0.0))), (t2, Some(wave(b, 2.5)))]))
            .unwrap();
        match b {
            19 => {
                assert_eq!(engine.match_of_tag(t1), Some(P1));
                assert_eq!(engine.match_of_tag(t2), None);
            }
            38 => assert_eq!(engine.match_of_tag(t2), None),
            39 => assert_eq!(engine.match_of_tag(t2), Some(P2)),
            _ => {}
        }
    }
}

#[test]
fn swapped_match_is_revoked_after_one_validation_window() {
    let (t1, t2) = (TagId(1), TagId(2));
    let mut engine = FusionEngine::new(&[t1, t2]);
    engine.force_match(t1, P2);
    engine.force_match(t2, P1);
    let mut revoked_at = None;
    for b in 0..60u64 {
        engine
            .step(&obs(
                b,
                &[(P1, Some(wave(b, 0.0))), (P2, Some(-wave(b, 0.0)))],
                &[(t1, Some(wave(b, 0.0))), (t2, Some(-wave(b, 0.0)))],
            ))
            .unwrap();
        if revoked_at.is_none() && engine.events().iter().any(|e| e.kind == EventKind::Revoke) {
            revoked_at = Some(b);
        }
    }
    assert_eq!(revoked_at, Some(VALIDATION_BINS as u64 - 1));
    let revokes: Vec<_> = engine.events().iter().filter(|e| e.kind == EventKind::Revoke).collect();
    assert_eq!(revokes.len(), 2);
    assert!(revokes.iter().all(|e| e.distance_cms.unwrap() > REVOKE_THRESHOLD_CMS));
    // re-identified correctly after a fresh window
    assert_eq!(engine.match_of_tag(t1), Some(P1));
    assert_eq!(engine.match_of_tag(t2), Some(P2));
}

#[test]
fn validation_waits_for_a_full_window() {
    let t = TagId(1);
    let mut engine = FusionEngine::new(&[t]);
    engine.force_match(t, P1);
    for b in 0..(VALIDATION_BINS as u64 - 1) {
        engine.step(&obs(b, &[(P1, Some(1.0))], &[(t, Some(-1.0))])).unwrap();
    }
    assert_eq!(engine.match_of_tag(t), Some(P1));
    engine.step(&obs(39, &[(P1, Some(1.0))], &[(t, Some(-1.0))])).unwrap();
    assert_eq!(engine.match_of_tag(t), None);
}

#[test]
fn departed_tag_keeps_match_and_gone_skeleton_releases() {
    let t = TagId(1);
    let mut stream: Vec<_> = (0..20).map(|b| obs(b, &[(P1, Some(wave(b, 0.0)))], &[(t, Some(wave(b, 0.0)))])).collect();
    stream.extend((20..24).map(|b| obs(b, &[(P1, Some(wave(b, 0.0)))], &[(t, None)])));
    stream.push(obs(24, &[(P1, Some(wave(24, 0.0)))], &[(t, Some(wave(24, 0.0)))]));
    stream.push(obs(25, &[(P2, Some(wave(25, 1.0)))], &[(t, Some(wave(25, 1.0)))]));
    let mut engine = FusionEngine::new(&[t]);
    for o in &stream[..24] {
        engine.step(o).unwrap();
    }
    assert!(engine.is_departed(t));
    assert_eq!(engine.match_of_tag(t), Some(P1));
    engine.step(&stream[24]).unwrap();
    assert!(!engine.is_departed(t));
    engine.step(&stream[25]).unwrap();
    assert_eq!(engine.match_of_tag(t), None);
    let kinds: Vec<EventKind> = engine.events().iter().map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EventKind::Assign, EventKind::Depart, EventKind::Reappear, EventKind::Release]);
}

#[test]
fn identity_log_statuses() {
    let (t1, t2) = (TagId(1), TagId(2));
    let mut engine = FusionEngine::new(&[t1, t2]);
    engine.force_match(t1, P2);
    for b in 0..40u64 {
        engine
            .step(&obs(b, &[(P1, Some(0.0)), (P2, Some(wave(b, 0.0)))], &[(t1, Some(-wave(b, 0.0))), (t2, Some(0.0))]))
            .unwrap();
    }
    engine.snapshot(16);
    let out = engine.into_output();
    let status: BTreeMap<SkeletonId, (Option<TagId>, IdentityStatus)> =
        out.identity.iter().map(|r| (r.skeleton, (r.tag, r.status))).collect();
    assert_eq!(status[&P1], (Some(t2), IdentityStatus::Matched));
    assert_eq!(status[&P2], (None, IdentityStatus::Revoked));
}

#[test]
fn identity_snapshots_cover_each_second() {
    let t = TagId(1);
    let stream: Vec<_> = (0..25).map(|b| obs(b, &[(P1, Some(0.1))], &[(t, Some(0.1))])).collect();
    let out = identify(&[t], &stream, 10).unwrap();
    let seconds: Vec<u64> = out.identity.iter().map(|r| r.t_s).collect();
    assert_eq!(seconds, (1..=10).collect::<Vec<_>>());
    // bins 0..=19 end by 8 s
    assert_eq!(out.identity[6].status, IdentityStatus::Accumulating);
    assert_eq!(out.identity[7].tag, Some(t));
}

#[test]
fn out_of_order_bins_are_rejected() {
    let mut engine = FusionEngine::new(&[TagId(1)]);
    engine.step(&obs(5, &[], &[(TagId(1), Some(0.0))])).unwrap();
    assert!(engine.step(&obs(5, &[], &[(TagId(1), Some(0.0))])).is_err());
}

fn brute_force_optimum(d: &[Vec<f64>]) -> f64 {
    fn go(d: &[Vec<f64>], row: usize, used: &mut Vec<bool>, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        if d.len() - row < k {
            return f64::INFINITY;
        }
        // row may stay unmatched only when rows outnumber the matches still needed
        let mut best = go(d, row + 1, used, k);
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.min(d[row][c] + go(d, row + 1, used, k - 1));
                used[c] = false;
            }
        }
        best
    }
    let cols = d[0].len();
    go(d, 0, &mut vec![false; cols], d.len().min(cols))
}

fn noisy_copy_matrix(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};
    let unit = Normal::new(0.0, 0.5).unwrap();
    let people: Vec<Vec<f64>> = (0..n).map(|_| (0..20).map(|_| unit.sample(rng)).collect()).collect();
    let mut owner: Vec<usize> = (0..n).collect();
    owner.shuffle(rng);
    let noise = Normal::new(0.0, 0.5 * rng.random_range(0.0..2.0)).unwrap();
    owner
        .iter()
        .map(|&o| {
            let tag: Vec<f64> = people[o].iter().map(|v| v + noise.sample(rng)).collect();
            people
                .iter()
                .map(|p| (p.iter().zip(&tag).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 20.0).sqrt())
                .collect()
        })
        .collect()
}

#[test]
fn greedy_is_a_valid_assignment_never_below_optimum() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for n in 2..=6 {
        for _ in 0..100 {
            let d: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..100.0)).collect()).collect();
            let pairs = greedy_pairs(&d);
            assert_eq!(pairs.len(), n);
            let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            rows.sort();
            cols.sort();
            assert_eq!(rows, (0..n).collect::<Vec<_>>());
            assert_eq!(cols, rows);
            let greedy: f64 = pairs.iter().map(|&(r, c)| d[r][c]).sum();
            assert!(greedy >= brute_force_optimum(&d) - 1e-9);
        }
    }
}

#[test]
fn greedy_is_optimal_on_sequence_matching_instances() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let trials = 1000;
    let optimal = (0..trials)
        .filter(|_| {
            let d = noisy_copy_matrix(&mut rng, 3);
            let greedy: f64 = greedy_pairs(&d).iter().map(|&(r, c)| d[r][c]).sum();
            (greedy - brute_force_optimum(&d)).abs() < 1e-9
        })
        .count();
    assert!(optimal * 10 >= trials * 9, "greedy optimal on {optimal}/{trials}");
}

#[test]
fn matrix_lookup_and_assignment() {
    let tags: BTreeMap<TagId, Vec<Vec<f64>>> =
        [(TagId(1), vec![vec![0.0]; 20]), (TagId(2), vec![vec![1.0]; 20])].into_iter().collect();
    let people: BTreeMap<SkeletonId, Vec<Vec<f64>>> =
        [(P1, vec![vec![0.9]; 20]), (P2, vec![vec![0.1]; 20])].into_iter().collect();
    let m = DistanceMatrix::build(&tags, &people).unwrap();
    assert!((m.get(TagId(1), P2).unwrap() - 10.0).abs() < 1e-9);
    let a = assign_identities(&m);
    assert_eq!(a.matches.len(), 2);
    assert!(a.matches.iter().any(|x| x.tag == TagId(1) && x.skeleton == P2));
}

/// Dynamic time warping with absolute-difference cost.
fn dtw(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut cost = vec![vec![f64::INFINITY; m + 1]; n + 1];
    cost[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let step = (a[i - 1] - b[j - 1]).abs();
            cost[i][j] = step + cost[i - 1][j].min(cost[i][j - 1]).min(cost[i - 1][j - 1]);
        }
    }
    cost[n][m]
}

#[test]
fn warping_favours_wrong_moving_pairs_over_still_ones() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.15).unwrap();
    let n = 20;
    let still_person = vec![0.0; n];
    let still_tag: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    // a walker and somebody else's tag whose profile lags by two bins
    let walker: Vec<f64> = (0..n as u64).map(|k| wave(k, 0.0)).collect();
    let other_tag: Vec<f64> = (0..n as u64).map(|k| wave(k, -0.9) + noise.sample(&mut rng)).collect();

    let euclid = |a: &[f64], b: &[f64]| {
        let wrap = |x: &[f64]| x.iter().map(|&v| vec![v]).collect::<Vec<_>>();
        sequence_distance(&wrap(a), &wrap(b)).unwrap()
    };
    let still_e = euclid(&still_person, &still_tag);
    let wrong_e = euclid(&walker, &other_tag);
    assert!(still_e < REVOKE_THRESHOLD_CMS, "{still_e}");
    assert!(still_e < wrong_e);

    let still_d = dtw(&still_person, &still_tag);
    let wrong_d = dtw(&walker, &other_tag);
    let l1: f64 = still_tag.iter().map(|v| v.abs()).sum();
    // every tag sample must be visited, so no alignment lowers the still pair's cost
    assert!(still_d >= l1 - 1e-12);
    let wrong_l1: f64 = walker.iter().zip(&other_tag).map(|(a, b)| (a - b).abs()).sum();
    // warping hides most of the wrong pair's mismatch
    assert!(wrong_d < 0.5 * wrong_l1, "dtw {wrong_d} vs unwarped {wrong_l1}");
}
