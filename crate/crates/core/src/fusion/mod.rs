//! Identity fusion: drop-based synchronization, distance-matrix assignment, tag lifecycle
//! and validation of standing matches.

mod engine;

use std::collections::BTreeMap;

use crate::doppler::TagVelocitySample;
use crate::error::{Error, Result};
use crate::ids::{AntennaId, SkeletonId, TagId};
use crate::kinect::PersonBin;

pub use engine::{
    synchronize_drop, LifecycleUpdate, Synchronized, TagLifecycles,
    identify, Event, EventKind, FusionEngine, FusionOutput, IdentityRecord, IdentityStatus, SyncRecord,
};

/// Bins per identification window.
pub const WINDOW_BINS: usize = 20;
/// Bins per validation window.
pub const VALIDATION_BINS: usize = 40;
/// Validation threshold on the per-sample distance, cm/s.
pub const REVOKE_THRESHOLD_CMS: f64 = 30.0;
/// Consecutive failed bins after which a tag counts as gone.
pub const DEPART_AFTER: u32 = 3;

/// One velocity per antenna, antenna order.
pub type Velocities = Vec<f64>;

/// Everything fusion sees for one 400 ms bin.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BinObservations {
    pub bin: u64,
    /// Skeletons present in the bin; `None` when the bin lacks a velocity for some antenna.
    pub persons: BTreeMap<SkeletonId, Option<Velocities>>,
    /// Every enrolled tag; `None` when some antenna failed.
    pub tags: BTreeMap<TagId, Option<Velocities>>,
}

/// Merges both sensor pipelines onto the shared bin grid. `person_bins` may be sparse;
/// missing bins have no skeletons.
pub fn merge_observations(
    person_bins: &[PersonBin],
    tag_samples: &[TagVelocitySample],
    registry: &[TagId],
    antennas: &[AntennaId],
    bins: u64,
) -> Vec<BinObservations> {
    let mut out: Vec<BinObservations> = (0..bins)
        .map(|bin| BinObservations {
            bin,
            persons: BTreeMap::new(),
            tags: registry.iter().map(|&t| (t, Some(Vec::with_capacity(antennas.len())))).collect(),
        })
        .collect();
    for pb in person_bins.iter().filter(|pb| pb.bin < bins) {
        let slot = &mut out[pb.bin as usize].persons;
        for &skeleton in pb.seen.keys() {
            let v = pb.velocities(skeleton).filter(|v| v.len() == antennas.len());
            slot.insert(skeleton, v);
        }
    }
    let mut ordered: Vec<&TagVelocitySample> = tag_samples.iter().filter(|s| s.bin < bins).collect();
    let rank = |a: AntennaId| antennas.iter().position(|&x| x == a);
    ordered.sort_by_key(|s| (s.bin, s.tag, rank(s.antenna)));
    for s in ordered {
        let Some(entry) = out[s.bin as usize].tags.get_mut(&s.tag) else {
            continue;
        };
        match (entry.as_mut(), s.v()) {
            (Some(vs), Some(v)) => vs.push(v),
            _ => *entry = None,
        }
    }
    for obs in &mut out {
        for v in obs.tags.values_mut() {
            if v.as_ref().is_some_and(|vs| vs.len() != antennas.len()) {
                *v = None;
            }
        }
    }
    out
}

/// Per-sample RMS difference of two sequences of per-antenna velocity vectors, in cm/s
/// (inputs in m/s).
pub fn sequence_distance(a: &[Velocities], b: &[Velocities]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, y) in a.iter().zip(b) {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        sum += x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        count += x.len();
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok((sum / count as f64).sqrt() * 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub tags: Vec<TagId>,
    pub people: Vec<SkeletonId>,
    /// Row per tag, column per person, cm/s.
    pub d: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn build(
        tags: &BTreeMap<TagId, Vec<Velocities>>,
        people: &BTreeMap<SkeletonId, Vec<Velocities>>,
    ) -> Result<Self> {
        let d = tags
            .values()
            .map(|ts| people.values().map(|ps| sequence_distance(ps, ts)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tags: tags.keys().copied().collect(),
            people: people.keys().copied().collect(),
            d,
        })
    }

    pub fn get(&self, tag: TagId, person: SkeletonId) -> Option<f64> {
        let r = self.tags.iter().position(|&t| t == tag)?;
        let c = self.people.iter().position(|&p| p == person)?;
        Some(self.d[r][c])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub tag: TagId,
    pub skeleton: SkeletonId,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub matches: Vec<Match>,
    pub unmatched_tags: Vec<TagId>,
    pub unmatched_people: Vec<SkeletonId>,
}

/// Greedy one-to-one assignment over a row-major matrix: repeatedly take the smallest
/// remaining entry, ties to the lower row then lower column.
pub fn greedy_pairs(d: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let cols = d.first().map_or(0, Vec::len);
    let mut cells: Vec<(usize, usize)> = (0..d.len()).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
    cells.sort_by(|&(r1, c1), &(r2, c2)| d[r1][c1].total_cmp(&d[r2][c2]).then(r1.cmp(&r2)).then(c1.cmp(&c2)));
    let mut row_used = vec![false; d.len()];
    let mut col_used = vec![false; cols];
    let mut out = Vec::new();
    for (r, c) in cells {
        if !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            out.push((r, c));
        }
    }
    out
}

pub fn assign_identities(matrix: &DistanceMatrix) -> Assignment {
    let pairs = greedy_pairs(&matrix.d);
    let matches: Vec<Match> = pairs
        .iter()
        .map(|&(r, c)| Match {
            tag: matrix.tags[r],
            skeleton: matrix.people[c],
            distance: matrix.d[r][c],
        })
        .collect();
    Assignment {
        unmatched_tags: matrix.tags.iter().filter(|t| !matches.iter().any(|m| m.tag == **t)).copied().collect(),
        unmatched_people: matrix
            .people
            .iter()
            .filter(|p| !matches.iter().any(|m| m.skeleton == **p))
            .copied()
            .collect(),
        matches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn seq(values: &[f64]) -> Vec<Velocities> {
        values.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn distance_examples() {
        let a = seq(&[0.3; 20]);
        assert_eq!(sequence_distance(&a, &a).unwrap(), 0.0);
        let shifted = seq(&[0.4; 20]);
        assert_abs_diff_eq!(sequence_distance(&a, &shifted).unwrap(), 10.0, epsilon = 1e-9);
        let mut one = a.clone();
        one[7][0] += 0.2;
        assert_abs_diff_eq!(sequence_distance(&a, &one).unwrap(), 4.47214, epsilon = 1e-5);
        assert!(matches!(
            sequence_distance(&a, &a[..19]),
            Err(Error::LengthMismatch { left: 20, right: 19 })
        ));
    }

    #[test]
    fn two_antenna_normalization() {
        let a: Vec<Velocities> = vec![vec![0.0, 0.0]; 20];
        let mut b = a.clone();
        b[0][1] = 0.2;
        assert_abs_diff_eq!(sequence_distance(&a, &b).unwrap(), 20.0 / 40f64.sqrt(), epsilon = 1e-9);
    }

    fn matrix(d: Vec<Vec<f64>>) -> DistanceMatrix {
        DistanceMatrix {
            tags: (1..=d.len() as u32).map(TagId).collect(),
            people: (1..=d[0].len() as u64).map(SkeletonId).collect(),
            d,
        }
    }

    #[test]
    fn greedy_takes_global_minimum_first() {
        let a = assign_identities(&matrix(vec![vec![5.0, 1.0], vec![2.0, 6.0]]));
        let pairs: Vec<(u32, u64)> = a.matches.iter().map(|m| (m.tag.0, m.skeleton.0)).collect();
        assert_eq!(pairs, vec![(1, 2), (2, 1)]);
    }

    #[test]
    fn single_tag_takes_argmin() {
        let a = assign_identities(&matrix(vec![vec![9.0, 3.0, 4.0]]));
        assert_eq!(a.matches.len(), 1);
        assert_eq!(a.matches[0].skeleton, SkeletonId(2));
        assert_eq!(a.unmatched_people, vec![SkeletonId(1), SkeletonId(3)]);
        assert!(a.unmatched_tags.is_empty());
    }

    #[test]
    fn ties_go_to_lower_ids() {
        let a = assign_identities(&matrix(vec![vec![1.0, 1.0], vec![1.0, 1.0]]));
        let pairs: Vec<(u32, u64)> = a.matches.iter().map(|m| (m.tag.0, m.skeleton.0)).collect();
        assert_eq!(pairs, vec![(1, 1), (2, 2)]);
    }

    #[test]
    fn more_tags_than_people() {
        let a = assign_identities(&matrix(vec![vec![4.0], vec![2.0], vec![3.0]]));
        assert_eq!(a.matches.len(), 1);
        assert_eq!(a.matches[0].tag, TagId(2));
        assert_eq!(a.unmatched_tags, vec![TagId(1), TagId(3)]);
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=6, 1usize..=6)
            .prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0.0f64..100.0, c), r))
    }

    fn permute(d: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
        rows.iter().map(|&r| cols.iter().map(|&c| d[r][c]).collect()).collect()
    }

    proptest! {
        #[test]
        fn one_to_one_and_maximal(d in arb_matrix()) {
            let pairs = greedy_pairs(&d);
            prop_assert_eq!(pairs.len(), d.len().min(d[0].len()));
            let mut rows: Vec<_> = pairs.iter().map(|p| p.0).collect();
            let mut cols: Vec<_> = pairs.iter().map(|p| p.1).collect();
            rows.sort();
            rows.dedup();
            cols.sort();
            cols.dedup();
            prop_assert_eq!(rows.len(), pairs.len());
            prop_assert_eq!(cols.len(), pairs.len());
        }

        #[test]
        fn invariant_under_monotone_transforms(d in arb_matrix(), k in 0.1f64..50.0) {
            let base = greedy_pairs(&d);
            let shifted: Vec<Vec<f64>> = d.iter().map(|r| r.iter().map(|x| x + k).collect()).collect();
            let squashed: Vec<Vec<f64>> = d.iter().map(|r| r.iter().map(|x| (x / 10.0).exp()).collect()).collect();
            prop_assert_eq!(&greedy_pairs(&shifted), &base);
            prop_assert_eq!(&greedy_pairs(&squashed), &base);
        }

        #[test]
        fn equivariant_under_relabeling(
            d in arb_matrix(),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut rows: Vec<usize> = (0..d.len()).collect();
            let mut cols: Vec<usize> = (0..d[0].len()).collect();
            rows.shuffle(&mut rng);
            cols.shuffle(&mut rng);
            // distinct entries so the outcome does not depend on index tie-breaks
            let mut flat: Vec<f64> = d.iter().flatten().copied().collect();
            flat.sort_by(f64::total_cmp);
            prop_assume!(flat.windows(2).all(|w| w[0] != w[1]));
            let permuted = permute(&d, &rows, &cols);
            let mut expect: Vec<(usize, usize)> = greedy_pairs(&d);
            expect.sort();
            let mut got: Vec<(usize, usize)> = greedy_pairs(&permuted)
                .into_iter()
                .map(|(r, c)| (rows[r], cols[c]))
                .collect();
            got.sort();
            prop_assert_eq!(got, expect);
        }
    }

    #[test]
    fn merge_marks_partial_tags_failed() {
        use crate::doppler::BinVelocity;
        let est = |v| Some(BinVelocity { v, doppler_hz: 0.0, pairs: 1 });
        let samples = vec![
            TagVelocitySample { tag: TagId(1), bin: 0, antenna: AntennaId(2), estimate: est(0.2) },
            TagVelocitySample { tag: TagId(1), bin: 0, antenna: AntennaId(1), estimate: est(0.1) },
            TagVelocitySample { tag: TagId(2), bin: 0, antenna: AntennaId(1), estimate: est(0.1) },
            TagVelocitySample { tag: TagId(2), bin: 0, antenna: AntennaId(2), estimate: None },
            TagVelocitySample { tag: TagId(9), bin: 0, antenna: AntennaId(1), estimate: est(0.1) },
        ];
        let obs = merge_observations(&[], &samples, &[TagId(1), TagId(2), TagId(3)], &[AntennaId(1), AntennaId(2)], 1);
        assert_eq!(obs[0].tags[&TagId(1)], Some(vec![0.1, 0.2]));
        assert_eq!(obs[0].tags[&TagId(2)], None);
        assert_eq!(obs[0].tags[&TagId(3)], None);
        assert!(!obs[0].tags.contains_key(&TagId(9)));
    }
}
