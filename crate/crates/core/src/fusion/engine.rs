use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use super::{
    assign_identities, sequence_distance, BinObservations, DistanceMatrix, Velocities, DEPART_AFTER,
    REVOKE_THRESHOLD_CMS, VALIDATION_BINS, WINDOW_BINS,
};
use crate::error::{Error, Result};
use crate::ids::{SkeletonId, TagId};
use crate::timebase::{bin_end, bins_ended_by};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IdentityStatus {
    Accumulating,
    Matched,
    Revoked,
}

impl IdentityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Accumulating => "accumulating",
            Self::Matched => "matched",
            Self::Revoked => "revoked",
        }
    }
}

impl fmt::Display for IdentityStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IdentityStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accumulating" => Ok(Self::Accumulating),
            "matched" => Ok(Self::Matched),
            "revoked" => Ok(Self::Revoked),
            other => Err(Error::Parse(format!("unknown identity status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityRecord {
    pub t_s: u64,
    pub skeleton: SkeletonId,
    pub tag: Option<TagId>,
    pub status: IdentityStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Assign,
    Revoke,
    Release,
    Depart,
    Reappear,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Assign => "assign",
            Self::Revoke => "revoke",
            Self::Release => "release",
            Self::Depart => "depart",
            Self::Reappear => "reappear",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Self::Assign, Self::Revoke, Self::Release, Self::Depart, Self::Reappear]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown event kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// End of the bin that triggered the event.
    pub t: f64,
    pub bin: u64,
    pub kind: EventKind,
    pub tag: Option<TagId>,
    pub skeleton: Option<SkeletonId>,
    pub distance_cms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncRecord {
    pub bin: u64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusionOutput {
    pub identity: Vec<IdentityRecord>,
    pub events: Vec<Event>,
    pub sync: Vec<SyncRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Lifecycle {
    failures: u32,
    departed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LifecycleUpdate {
    pub retained: bool,
    pub departed: Vec<TagId>,
    pub reappeared: Vec<TagId>,
}

/// Drop rule and tag presence bookkeeping. A bin is kept only when every tag that was
/// present at its start has a full velocity vector and every skeleton in view has one too.
#[derive(Debug, Clone)]
pub struct TagLifecycles {
    tags: BTreeMap<TagId, Lifecycle>,
}

impl TagLifecycles {
    pub fn new(registry: impl IntoIterator<Item = TagId>) -> Self {
        Self {
            tags: registry.into_iter().map(|t| (t, Lifecycle::default())).collect(),
        }
    }

    pub fn is_departed(&self, tag: TagId) -> bool {
        self.tags.get(&tag).is_some_and(|l| l.departed)
    }

    pub fn observe(&mut self, obs: &BinObservations) -> LifecycleUpdate {
        let ok = |t: &TagId| obs.tags.get(t).is_some_and(Option::is_some);
        let retained = self.tags.iter().all(|(t, l)| l.departed || ok(t)) && obs.persons.values().all(Option::is_some);
        let mut update = LifecycleUpdate {
            retained,
            ..Default::default()
        };
        for (t, l) in &mut self.tags {
            if ok(t) {
                l.failures = 0;
                if l.departed {
                    l.departed = false;
                    update.reappeared.push(*t);
                }
            } else {
                l.failures += 1;
                if l.failures >= DEPART_AFTER && !l.departed {
                    l.departed = true;
                    update.departed.push(*t);
                }
            }
        }
        update
    }
}

/// Sequences after the drop rule: each entry carries the retained bin it came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Synchronized {
    pub retained: Vec<u64>,
    pub dropped: Vec<u64>,
    pub persons: BTreeMap<SkeletonId, Vec<(u64, Velocities)>>,
    pub tags: BTreeMap<TagId, Vec<(u64, Velocities)>>,
}

/// Applies the drop rule to a bin stream over the given tag registry.
pub fn synchronize_drop(registry: &[TagId], observations: &[BinObservations]) -> Synchronized {
    let mut life = TagLifecycles::new(registry.iter().copied());
    let mut out = Synchronized::default();
    for obs in observations {
        let update = life.observe(obs);
        if !update.retained {
            out.dropped.push(obs.bin);
            continue;
        }
        out.retained.push(obs.bin);
        for (s, v) in &obs.persons {
            if let Some(v) = v {
                out.persons.entry(*s).or_default().push((obs.bin, v.clone()));
            }
        }
        for (t, v) in &obs.tags {
            if let (Some(v), false) = (v, life.is_departed(*t)) {
                out.tags.entry(*t).or_default().push((obs.bin, v.clone()));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Standing {
    skeleton: SkeletonId,
    history: VecDeque<(Velocities, Velocities)>,
}

/// Sequential identification engine fed one bin at a time.
#[derive(Debug, Clone)]
pub struct FusionEngine {
    life: TagLifecycles,
    matches: BTreeMap<TagId, Standing>,
    revoked: BTreeSet<SkeletonId>,
    known: BTreeSet<SkeletonId>,
    present: BTreeSet<SkeletonId>,
    window_bins: usize,
    member_tags: BTreeMap<TagId, Vec<Velocities>>,
    member_people: BTreeMap<SkeletonId, Vec<Velocities>>,
    pending_tags: BTreeSet<TagId>,
    pending_people: BTreeSet<SkeletonId>,
    last_bin: Option<u64>,
    out: FusionOutput,
}

impl FusionEngine {
    pub fn new(registry: &[TagId]) -> Self {
        Self {
            life: TagLifecycles::new(registry.iter().copied()),
            matches: BTreeMap::new(),
            revoked: BTreeSet::new(),
            known: BTreeSet::new(),
            present: BTreeSet::new(),
            window_bins: 0,
            member_tags: BTreeMap::new(),
            member_people: BTreeMap::new(),
            pending_tags: registry.iter().copied().collect(),
            pending_people: BTreeSet::new(),
            last_bin: None,
            out: FusionOutput::default(),
        }
    }

    pub fn match_of_tag(&self, tag: TagId) -> Option<SkeletonId> {
        self.matches.get(&tag).map(|m| m.skeleton)
    }

    pub fn match_of_skeleton(&self, skeleton: SkeletonId) -> Option<TagId> {
        self.matches.iter().find(|(_, m)| m.skeleton == skeleton).map(|(t, _)| *t)
    }

    pub fn is_departed(&self, tag: TagId) -> bool {
        self.life.is_departed(tag)
    }

    /// Retained bins collected so far in the open identification window.
    pub fn window_len(&self) -> usize {
        self.window_bins
    }

    pub fn events(&self) -> &[Event] {
        &self.out.events
    }

    /// Installs a match by hand, bypassing the identification window.
    pub fn force_match(&mut self, tag: TagId, skeleton: SkeletonId) {
        self.matches.retain(|t, m| *t != tag && m.skeleton != skeleton);
        self.member_tags.remove(&tag);
        self.pending_tags.remove(&tag);
        self.member_people.remove(&skeleton);
        self.pending_people.remove(&skeleton);
        self.known.insert(skeleton);
        self.matches.insert(
            tag,
            Standing {
                skeleton,
                history: VecDeque::new(),
            },
        );
    }

    fn event(&mut self, bin: u64, kind: EventKind, tag: Option<TagId>, skeleton: Option<SkeletonId>, d: Option<f64>) {
        self.out.events.push(Event {
            t: bin_end(bin),
            bin,
            kind,
            tag,
            skeleton,
            distance_cms: d,
        });
    }

    fn unmatch_tag(&mut self, tag: TagId) {
        if !self.life.is_departed(tag) {
            self.pending_tags.insert(tag);
        }
    }

    pub fn step(&mut self, obs: &BinObservations) -> Result<()> {
        if self.last_bin.is_some_and(|b| obs.bin <= b) {
            return Err(Error::validation("bins", "observations must arrive in increasing bin order"));
        }
        self.last_bin = Some(obs.bin);
        let bin = obs.bin;

        let gone: Vec<SkeletonId> = self.present.iter().filter(|s| !obs.persons.contains_key(s)).copied().collect();
        for s in gone {
            if let Some(tag) = self.match_of_skeleton(s) {
                self.matches.remove(&tag);
                self.event(bin, EventKind::Release, Some(tag), Some(s), None);
                self.unmatch_tag(tag);
            }
            self.member_people.remove(&s);
            self.pending_people.remove(&s);
            self.revoked.remove(&s);
        }
        for &s in obs.persons.keys() {
            if self.known.insert(s) {
                self.pending_people.insert(s);
            }
        }
        self.present = obs.persons.keys().copied().collect();

        let update = self.life.observe(obs);
        for &t in &update.departed {
            self.event(bin, EventKind::Depart, Some(t), self.match_of_tag(t), None);
            self.member_tags.remove(&t);
            self.pending_tags.remove(&t);
        }
        for &t in &update.reappeared {
            self.event(bin, EventKind::Reappear, Some(t), self.match_of_tag(t), None);
            if !self.matches.contains_key(&t) {
                self.pending_tags.insert(t);
            }
        }

        self.validate(obs)?;
        self.out.sync.push(SyncRecord {
            bin,
            retained: update.retained,
        });
        if update.retained {
            self.accumulate(obs)?;
        }
        Ok(())
    }

    fn validate(&mut self, obs: &BinObservations) -> Result<()> {
        let mut revoke = Vec::new();
        for (tag, standing) in &mut self.matches {
            let person = obs.persons.get(&standing.skeleton).and_then(Option::as_ref);
            let tagv = obs.tags.get(tag).and_then(Option::as_ref);
            let (Some(p), Some(t)) = (person, tagv) else {
                continue;
            };
            standing.history.push_back((p.clone(), t.clone()));
            if standing.history.len() > VALIDATION_BINS {
                standing.history.pop_front();
            }
            if standing.history.len() == VALIDATION_BINS {
                let (ps, ts): (Vec<Velocities>, Vec<Velocities>) = standing.history.iter().cloned().unzip();
                let d = sequence_distance(&ps, &ts)?;
                if d > REVOKE_THRESHOLD_CMS {
                    revoke.push((*tag, standing.skeleton, d));
                }
            }
        }
        for (tag, skeleton, d) in revoke {
            self.matches.remove(&tag);
            self.event(obs.bin, EventKind::Revoke, Some(tag), Some(skeleton), Some(d));
            self.revoked.insert(skeleton);
            self.pending_people.insert(skeleton);
            self.unmatch_tag(tag);
        }
        Ok(())
    }

    fn accumulate(&mut self, obs: &BinObservations) -> Result<()> {
        if self.member_tags.is_empty() || self.member_people.is_empty() {
            self.window_bins = 0;
        }
        if self.window_bins == 0 {
            self.member_tags.extend(std::mem::take(&mut self.pending_tags).into_iter().map(|t| (t, Vec::new())));
            self.member_people
                .extend(std::mem::take(&mut self.pending_people).into_iter().map(|s| (s, Vec::new())));
            self.member_tags.values_mut().for_each(Vec::clear);
            self.member_people.values_mut().for_each(Vec::clear);
        }
        if self.member_tags.is_empty() || self.member_people.is_empty() {
            return Ok(());
        }
        for (t, seq) in &mut self.member_tags {
            let v = obs.tags.get(t).cloned().flatten().ok_or(Error::UnknownTag(t.0))?;
            seq.push(v);
        }
        for (s, seq) in &mut self.member_people {
            let v = obs
                .persons
                .get(s)
                .cloned()
                .flatten()
                .ok_or_else(|| Error::validation("persons", format!("skeleton {s} missing from a retained bin")))?;
            seq.push(v);
        }
        self.window_bins += 1;
        if self.window_bins < WINDOW_BINS {
            return Ok(());
        }
        let matrix = DistanceMatrix::build(&self.member_tags, &self.member_people)?;
        let assignment = assign_identities(&matrix);
        for m in &assignment.matches {
            self.member_tags.remove(&m.tag);
            self.member_people.remove(&m.skeleton);
            self.revoked.remove(&m.skeleton);
            self.matches.insert(
                m.tag,
                Standing {
                    skeleton: m.skeleton,
                    history: VecDeque::new(),
                },
            );
            self.event(obs.bin, EventKind::Assign, Some(m.tag), Some(m.skeleton), Some(m.distance));
        }
        self.window_bins = 0;
        Ok(())
    }

    /// Identity of every skeleton in view after the last processed bin.
    pub fn snapshot(&mut self, t_s: u64) {
        let records: Vec<IdentityRecord> = self
            .present
            .iter()
            .map(|&s| {
                let tag = self.match_of_skeleton(s);
                let status = match (tag, self.revoked.contains(&s)) {
                    (Some(_), _) => IdentityStatus::Matched,
                    (None, true) => IdentityStatus::Revoked,
                    (None, false) => IdentityStatus::Accumulating,
                };
                IdentityRecord {
                    t_s,
                    skeleton: s,
                    tag,
                    status,
                }
            })
            .collect();
        self.out.identity.extend(records);
    }

    pub fn into_output(self) -> FusionOutput {
        self.out
    }
}

/// Runs the engine over a bin stream, snapshotting identities at every whole second.
pub fn identify(registry: &[TagId], observations: &[BinObservations], duration_s: u64) -> Result<FusionOutput> {
    let mut engine = FusionEngine::new(registry);
    let mut next = 0usize;
    for s in 1..=duration_s {
        let upto = bins_ended_by(s);
        while next < observations.len() && observations[next].bin < upto {
            engine.step(&observations[next])?;
            next += 1;
        }
        engine.snapshot(s);
    }
    Ok(engine.into_output())
}
