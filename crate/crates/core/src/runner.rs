//! End-to-end pipeline: world, both sensor models, both trackers, fusion and metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{NoiseProfile, ReadModel};
use crate::depth::{DepthSensor, SkeletonFrame};
use crate::doppler::{estimate_tag_velocities, TagVelocitySample};
use crate::error::{Error, Result};
use crate::fusion::{identify, merge_observations, BinObservations, FusionOutput};
use crate::ids::{AntennaId, TagId};
use crate::kinect::{FloorPosition, KinectTracker, PersonBin};
use crate::metrics::{self, SkeletonRecord, Summary};
use crate::rfid::{make_carrier_plan, CarrierPlan, PhaseReading, ReaderDopplerReading, ReaderSim};
use crate::scenario::Scenario;
use crate::timebase::{complete_bins, frame_time, BIN_S};
use crate::world::world_state_at;

pub const TOOL: &str = concat!("tagsync ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub noise: NoiseProfile,
    pub read_model: ReadModel,
    /// Seconds excluded from the accuracy metrics.
    pub skip_convergence_s: f64,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            noise: NoiseProfile::standard(),
            read_model: ReadModel::default(),
            skip_convergence_s: 0.0,
        }
    }

    pub fn with_noise(mut self, noise: NoiseProfile) -> Self {
        self.noise = noise;
        self
    }

    pub fn skipping(mut self, seconds: f64) -> Self {
        self.skip_convergence_s = seconds;
        self
    }
}

/// Raw sensor output of one run.
#[derive(Debug, Clone)]
pub struct SensorData {
    pub frames: Vec<SkeletonFrame>,
    pub skeletons: Vec<SkeletonRecord>,
    pub plan: CarrierPlan,
    pub readings: Vec<PhaseReading>,
    pub api: Vec<ReaderDopplerReading>,
}

pub fn simulate_sensors(scenario: &Scenario, cfg: &RunConfig) -> Result<SensorData> {
    scenario.validate()?;
    let bins = complete_bins(scenario.duration_s);
    let horizon = bins as f64 * BIN_S;
    let mut depth = DepthSensor::new(scenario, cfg.noise.head_sigma_m, cfg.seed);
    let mut frames = Vec::new();
    let mut k = 0u64;
    while frame_time(k) < horizon - 1e-9 {
        let world = world_state_at(scenario, frame_time(k))?;
        frames.push(depth.sample_frame(k, &world));
        k += 1;
    }
    let owners = depth.into_skeleton_owners();
    let mut spans: BTreeMap<_, (f64, f64)> = BTreeMap::new();
    for f in &frames {
        for b in &f.bodies {
            spans.entry(b.skeleton).and_modify(|s| s.1 = f.t).or_insert((f.t, f.t));
        }
    }
    let skeletons = spans
        .into_iter()
        .map(|(skeleton_id, (first_t, last_t))| SkeletonRecord {
            skeleton_id,
            person_id: owners[&skeleton_id],
            first_t,
            last_t,
        })
        .collect();
    let plan = make_carrier_plan(cfg.seed, scenario.duration_s)?;
    let out = ReaderSim::new(scenario, &plan, cfg.read_model.clone(), cfg.noise.clone(), cfg.seed).run();
    Ok(SensorData {
        frames,
        skeletons,
        plan,
        readings: out.readings,
        api: out.api,
    })
}

/// Everything derived from the sensor data.
#[derive(Debug, Clone)]
pub struct Processed {
    pub tracks: Vec<FloorPosition>,
    pub person_bins: Vec<PersonBin>,
    pub tag_samples: Vec<TagVelocitySample>,
    pub observations: Vec<BinObservations>,
    pub fusion: FusionOutput,
}

pub fn registry(scenario: &Scenario) -> Vec<TagId> {
    let mut tags: Vec<TagId> = scenario.tags.iter().map(|t| t.id).collect();
    tags.sort();
    tags
}

pub fn antenna_ids(scenario: &Scenario) -> Vec<AntennaId> {
    scenario.antennas.iter().map(|a| a.id).collect()
}

pub fn process(scenario: &Scenario, sensors: &SensorData) -> Result<Processed> {
    let bins = complete_bins(scenario.duration_s);
    let mut tracker = KinectTracker::new(scenario);
    let mut tracks = Vec::new();
    let mut person_bins = Vec::new();
    for frame in &sensors.frames {
        let (positions, closed) = tracker.push(frame)?;
        tracks.extend(positions);
        person_bins.extend(closed);
    }
    person_bins.extend(tracker.finish()?);
    let registry = registry(scenario);
    let antennas = antenna_ids(scenario);
    let tag_samples = estimate_tag_velocities(&sensors.readings, &registry, &antennas, bins);
    let observations = merge_observations(&person_bins, &tag_samples, &registry, &antennas, bins);
    let fusion = identify(&registry, &observations, scenario.duration_s.floor() as u64)?;
    Ok(Processed {
        tracks,
        person_bins,
        tag_samples,
        observations,
        fusion,
    })
}

/// Run settings echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub seed: u64,
    pub duration_s: f64,
    pub antennas: usize,
    pub total_tags: usize,
    pub noise: NoiseProfile,
    pub read_model: ReadModel,
    pub skip_convergence_s: f64,
}

impl RunMeta {
    pub fn new(scenario: &Scenario, cfg: &RunConfig) -> Self {
        Self {
            tool: TOOL.to_string(),
            seed: cfg.seed,
            duration_s: scenario.duration_s,
            antennas: scenario.antennas.len(),
            total_tags: scenario.total_tags(),
            noise: cfg.noise.clone(),
            read_model: cfg.read_model.clone(),
            skip_convergence_s: cfg.skip_convergence_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerStd {
    pub estimator_hz: Option<f64>,
    pub api_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunMeta,
    pub rmse_cm: Option<f64>,
    pub identification_accuracy: Option<Summary>,
    pub target_tag: Option<TagId>,
    pub target_tracking_accuracy: Option<f64>,
    pub drop_rate: Option<f64>,
    pub velocity_error_cms: Option<f64>,
    pub doppler_std_stationary: DopplerStd,
    pub median_identification_time_s: Option<f64>,
    pub assignments: usize,
    pub revocations: usize,
}

/// The log tables metrics are computed from.
#[derive(Debug, Clone)]
pub struct MetricInputs<'a> {
    pub scenario: &'a Scenario,
    pub tracks: &'a [FloorPosition],
    pub skeletons: &'a [SkeletonRecord],
    pub tag_samples: &'a [TagVelocitySample],
    pub api: &'a [ReaderDopplerReading],
    pub fusion: &'a FusionOutput,
}

pub fn compute_report(inputs: &MetricInputs<'_>, meta: RunMeta) -> Result<RunReport> {
    use crate::fusion::EventKind;
    let s = inputs.scenario;
    let owners = metrics::owners(inputs.skeletons);
    let skip = meta.skip_convergence_s;
    let rmse_cm = match metrics::tracking_rmse(inputs.tracks, &owners, s) {
        Ok(v) => Some(v),
        Err(Error::EmptyLog(_)) => None,
        Err(e) => return Err(e),
    };
    let target_tag = s.target();
    let target_tracking_accuracy = target_tag
        .map(|t| metrics::target_tracking_accuracy(&inputs.fusion.identity, &owners, s, t, skip))
        .transpose()?;
    let times = metrics::identification_times(&inputs.fusion.events, inputs.skeletons, s);
    let count = |k: EventKind| inputs.fusion.events.iter().filter(|e| e.kind == k).count();
    Ok(RunReport {
        rmse_cm,
        identification_accuracy: metrics::identification_accuracy(&inputs.fusion.identity, &owners, s, skip),
        target_tag,
        target_tracking_accuracy,
        drop_rate: metrics::drop_rate(&inputs.fusion.sync),
        velocity_error_cms: metrics::velocity_error(inputs.tag_samples, s),
        doppler_std_stationary: DopplerStd {
            estimator_hz: metrics::estimator_doppler_std(inputs.tag_samples, s),
            api_hz: metrics::api_doppler_std(inputs.api, s),
        },
        median_identification_time_s: metrics::median(&times),
        assignments: count(EventKind::Assign),
        revocations: count(EventKind::Revoke),
        config: meta,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub sensors: SensorData,
    pub processed: Processed,
    pub report: RunReport,
}

impl RunOutput {
    pub fn identification_times(&self) -> Vec<f64> {
        metrics::identification_times(&self.processed.fusion.events, &self.sensors.skeletons, &self.scenario)
    }
}

/// Fusion and metrics over already simulated sensor data.
pub fn run_from_sensors(scenario: &Scenario, cfg: &RunConfig, sensors: SensorData) -> Result<RunOutput> {
    let processed = process(scenario, &sensors)?;
    let report = compute_report(
        &MetricInputs {
            scenario,
            tracks: &processed.tracks,
            skeletons: &sensors.skeletons,
            tag_samples: &processed.tag_samples,
            api: &sensors.api,
            fusion: &processed.fusion,
        },
        RunMeta::new(scenario, cfg),
    )?;
    Ok(RunOutput {
        scenario: scenario.clone(),
        config: cfg.clone(),
        sensors,
        processed,
        report,
    })
}

pub fn run(scenario: &Scenario, cfg: &RunConfig) -> Result<RunOutput> {
    let sensors = simulate_sensors(scenario, cfg)?;
    run_from_sensors(scenario, cfg, sensors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tags: u32,
    pub antennas: usize,
    pub runs: usize,
    /// Mean over seeds with at least one completed window.
    pub drop_rate: Option<f64>,
    /// Median over every tagged skeleton of every seed.
    pub median_identification_time_s: Option<f64>,
}

/// Runs `base` for every (tag count, antenna count, seed) in parallel.
pub fn sweep(
    base: &Scenario,
    tags: &[u32],
    antennas: &[usize],
    seeds: &[u64],
    template: &RunConfig,
) -> Result<Vec<SweepPoint>> {
    let grid: Vec<(u32, usize)> = tags.iter().flat_map(|&t| antennas.iter().map(move |&a| (t, a))).collect();
    let mut scenarios = Vec::with_capacity(grid.len());
    for &(t, a) in &grid {
        scenarios.push(base.clone().with_antenna_count(a)?.with_total_tags(t)?);
    }
    let jobs: Vec<(usize, u64)> = (0..grid.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let results: Vec<(usize, Option<f64>, Vec<f64>)> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let cfg = RunConfig {
                seed,
                ..template.clone()
            };
            let out = run(&scenarios[i], &cfg)?;
            Ok((i, out.report.drop_rate, out.identification_times()))
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &(tags, antennas))| {
            let mine: Vec<_> = results.iter().filter(|r| r.0 == i).collect();
            let drops: Vec<f64> = mine.iter().filter_map(|r| r.1).collect();
            let times: Vec<f64> = mine.iter().flat_map(|r| r.2.iter().copied()).collect();
            SweepPoint {
                tags,
                antennas,
                runs: mine.len(),
                drop_rate: (!drops.is_empty()).then(|| drops.iter().sum::<f64>() / drops.len() as f64),
                median_identification_time_s: metrics::median(&times),
            }
        })
        .collect())
}
