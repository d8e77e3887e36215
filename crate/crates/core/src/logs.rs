//! Run artifacts on disk: one header line `# tagsync <version> seed=<n>` on every file,
//! CSV for every series, TOML for the scenario, JSON and text for the report.
//!
//! Floats are written in shortest round-trip form (frames excepted), so metrics recomputed
//! from the files equal the in-run values exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::doppler::{BinVelocity, TagVelocitySample};
use crate::error::{Error, Result};
use crate::fusion::{Event, EventKind, FusionOutput, IdentityRecord, IdentityStatus, SyncRecord};
use crate::geometry::Floor;
use crate::ids::{AntennaId, SkeletonId, TagId};
use crate::kinect::FloorPosition;
use crate::metrics::SkeletonRecord;
use crate::rfid::{PhaseReading, ReaderDopplerReading};
use crate::runner::{RunOutput, RunReport, TOOL};
use crate::scenario::Scenario;
use crate::timebase::bin_start;

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const FRAMES_FILE: &str = "frames.csv";
pub const TRACKS_FILE: &str = "tracks.csv";
pub const SKELETONS_FILE: &str = "skeletons.csv";
pub const READINGS_FILE: &str = "readings.csv";
pub const API_FILE: &str = "api_doppler.csv";
pub const PERSON_VELOCITIES_FILE: &str = "person_velocities.csv";
pub const TAG_VELOCITIES_FILE: &str = "tag_velocities.csv";
pub const SYNC_FILE: &str = "sync.csv";
pub const IDENTITY_FILE: &str = "identity.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

pub fn header_line(seed: u64) -> String {
    format!("# {TOOL} seed={seed}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn log_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Log {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn create(path: &Path, seed: u64) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(w, "{}", header_line(seed)).map_err(io_err(path))?;
    Ok(w)
}

fn write_rows<T: Serialize>(path: &Path, seed: u64, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let w = create(path, seed)?;
    let mut csv = csv::Writer::from_writer(w);
    for row in rows {
        csv.serialize(row).map_err(|e| log_err(path, e))?;
    }
    csv.flush().map_err(io_err(path))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| log_err(path, e)))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackRow {
    t: f64,
    skeleton_id: SkeletonId,
    x_prime: f64,
    z_prime: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReadingRow {
    t: f64,
    tag_id: TagId,
    antenna_id: AntennaId,
    channel_freq_hz: f64,
    phi_rad: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ApiRow {
    t: f64,
    tag_id: TagId,
    antenna_id: AntennaId,
    f_d_api_hz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersonVelocityRow {
    bin: u64,
    t_bin: f64,
    skeleton_id: SkeletonId,
    antenna_id: AntennaId,
    v_mps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TagVelocityRow {
    bin: u64,
    t_bin: f64,
    tag_id: TagId,
    antenna_id: AntennaId,
    v_mps: Option<f64>,
    failed_flag: u8,
    doppler_hz: Option<f64>,
    pairs: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SyncRow {
    bin: u64,
    t_bin: f64,
    retained: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct IdentityRow {
    t_s: u64,
    skeleton_id: SkeletonId,
    tag_id_or_none: String,
    status: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    t: f64,
    bin: u64,
    kind: String,
    tag_id: Option<TagId>,
    skeleton_id: Option<SkeletonId>,
    distance_cms: Option<f64>,
}

pub fn write_frames(path: &Path, seed: u64, frames: &[crate::depth::SkeletonFrame]) -> Result<()> {
    let mut w = create(path, seed)?;
    writeln!(w, "t,skeleton_id,x,y,z").map_err(io_err(path))?;
    for f in frames {
        for b in &f.bodies {
            let [x, y, z] = b.head;
            writeln!(w, "{:.6},{},{x:.6},{y:.6},{z:.6}", f.t, b.skeleton).map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn write_readings(path: &Path, seed: u64, readings: &[PhaseReading]) -> Result<()> {
    write_rows(
        path,
        seed,
        readings.iter().map(|r| ReadingRow {
            t: r.t,
            tag_id: r.tag,
            antenna_id: r.antenna,
            channel_freq_hz: r.channel_hz,
            phi_rad: r.phi,
        }),
    )
}

pub fn read_readings(path: &Path) -> Result<Vec<PhaseReading>> {
    Ok(read_rows::<ReadingRow>(path)?
        .into_iter()
        .map(|r| PhaseReading {
            tag: r.tag_id,
            antenna: r.antenna_id,
            t: r.t,
            channel_hz: r.channel_freq_hz,
            phi: r.phi_rad,
        })
        .collect())
}

pub fn write_tracks(path: &Path, seed: u64, tracks: &[FloorPosition]) -> Result<()> {
    write_rows(
        path,
        seed,
        tracks.iter().map(|p| TrackRow {
            t: p.t,
            skeleton_id: p.skeleton,
            x_prime: p.position.x,
            z_prime: p.position.z,
        }),
    )
}

pub fn read_tracks(path: &Path) -> Result<Vec<FloorPosition>> {
    Ok(read_rows::<TrackRow>(path)?
        .into_iter()
        .map(|r| FloorPosition {
            skeleton: r.skeleton_id,
            t: r.t,
            position: Floor::new(r.x_prime, r.z_prime),
        })
        .collect())
}

pub fn write_api(path: &Path, seed: u64, api: &[ReaderDopplerReading]) -> Result<()> {
    write_rows(
        path,
        seed,
        api.iter().map(|r| ApiRow {
            t: r.t,
            tag_id: r.tag,
            antenna_id: r.antenna,
            f_d_api_hz: r.doppler_hz,
        }),
    )
}

pub fn read_api(path: &Path) -> Result<Vec<ReaderDopplerReading>> {
    Ok(read_rows::<ApiRow>(path)?
        .into_iter()
        .map(|r| ReaderDopplerReading {
            tag: r.tag_id,
            antenna: r.antenna_id,
            t: r.t,
            doppler_hz: r.f_d_api_hz,
        })
        .collect())
}

pub fn write_tag_velocities(path: &Path, seed: u64, samples: &[TagVelocitySample]) -> Result<()> {
    write_rows(
        path,
        seed,
        samples.iter().map(|s| TagVelocityRow {
            bin: s.bin,
            t_bin: bin_start(s.bin),
            tag_id: s.tag,
            antenna_id: s.antenna,
            v_mps: s.estimate.map(|e| e.v),
            failed_flag: u8::from(s.estimate.is_none()),
            doppler_hz: s.estimate.map(|e| e.doppler_hz),
            pairs: s.estimate.map_or(0, |e| e.pairs),
        }),
    )
}

pub fn read_tag_velocities(path: &Path) -> Result<Vec<TagVelocitySample>> {
    read_rows::<TagVelocityRow>(path)?
        .into_iter()
        .map(|r| {
            let estimate = match (r.failed_flag, r.v_mps, r.doppler_hz) {
                (1, None, None) => None,
                (0, Some(v), Some(doppler_hz)) => Some(BinVelocity {
                    v,
                    doppler_hz,
                    pairs: r.pairs,
                }),
                _ => return Err(log_err(path, format!("inconsistent failed_flag in bin {}", r.bin))),
            };
            Ok(TagVelocitySample {
                tag: r.tag_id,
                bin: r.bin,
                antenna: r.antenna_id,
                estimate,
            })
        })
        .collect()
}

pub fn write_skeletons(path: &Path, seed: u64, skeletons: &[SkeletonRecord]) -> Result<()> {
    write_rows(path, seed, skeletons)
}

pub fn read_skeletons(path: &Path) -> Result<Vec<SkeletonRecord>> {
    read_rows(path)
}

pub fn write_sync(path: &Path, seed: u64, sync: &[SyncRecord]) -> Result<()> {
    write_rows(
        path,
        seed,
        sync.iter().map(|s| SyncRow {
            bin: s.bin,
            t_bin: bin_start(s.bin),
            retained: u8::from(s.retained),
        }),
    )
}

pub fn read_sync(path: &Path) -> Result<Vec<SyncRecord>> {
    Ok(read_rows::<SyncRow>(path)?
        .into_iter()
        .map(|r| SyncRecord {
            bin: r.bin,
            retained: r.retained != 0,
        })
        .collect())
}

pub fn write_identity(path: &Path, seed: u64, identity: &[IdentityRecord]) -> Result<()> {
    write_rows(
        path,
        seed,
        identity.iter().map(|r| IdentityRow {
            t_s: r.t_s,
            skeleton_id: r.skeleton,
            tag_id_or_none: r.tag.map_or_else(|| "none".to_string(), |t| t.to_string()),
            status: r.status.to_string(),
        }),
    )
}

pub fn read_identity(path: &Path) -> Result<Vec<IdentityRecord>> {
    read_rows::<IdentityRow>(path)?
        .into_iter()
        .map(|r| {
            let tag = match r.tag_id_or_none.as_str() {
                "none" => None,
                s => Some(s.parse::<TagId>().map_err(|e| log_err(path, e))?),
            };
            Ok(IdentityRecord {
                t_s: r.t_s,
                skeleton: r.skeleton_id,
                tag,
                status: r.status.parse::<IdentityStatus>().map_err(|e| log_err(path, e))?,
            })
        })
        .collect()
}

pub fn write_events(path: &Path, seed: u64, events: &[Event]) -> Result<()> {
    write_rows(
        path,
        seed,
        events.iter().map(|e| EventRow {
            t: e.t,
            bin: e.bin,
            kind: e.kind.to_string(),
            tag_id: e.tag,
            skeleton_id: e.skeleton,
            distance_cms: e.distance_cms,
        }),
    )
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    read_rows::<EventRow>(path)?
        .into_iter()
        .map(|r| {
            Ok(Event {
                t: r.t,
                bin: r.bin,
                kind: r.kind.parse::<EventKind>().map_err(|e| log_err(path, e))?,
                tag: r.tag_id,
                skeleton: r.skeleton_id,
                distance_cms: r.distance_cms,
            })
        })
        .collect()
}

fn write_text(path: &Path, seed: u64, body: &str) -> Result<()> {
    let mut w = create(path, seed)?;
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    tool: String,
    seed: u64,
    report: RunReport,
}

pub fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    let seed = report.config.seed;
    let doc = ReportDoc {
        tool: TOOL.to_string(),
        seed,
        report: report.clone(),
    };
    let json = serde_json::to_string_pretty(&doc).map_err(|e| log_err(&dir.join(REPORT_JSON), e))?;
    // JSON has no comments, so the tool and seed live in the document itself
    let path = dir.join(REPORT_JSON);
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    write_text(&dir.join(REPORT_TXT), seed, &render_report(report))
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join(REPORT_JSON);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let doc: ReportDoc = serde_json::from_str(&text).map_err(|e| log_err(&path, e))?;
    Ok(doc.report)
}

fn opt(v: Option<f64>, unit: &str) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}{unit}"))
}

pub fn render_report(r: &RunReport) -> String {
    let c = &r.config;
    let mut s = String::new();
    s += &format!(
        "run: seed {} | {} s | {} antenna(s) | {} tags | noise {}\n",
        c.seed, c.duration_s, c.antennas, c.total_tags, c.noise.name
    );
    s += &format!("tracking rmse: {}\n", opt(r.rmse_cm, " cm"));
    match &r.identification_accuracy {
        Some(a) => {
            s += &format!(
                "identification accuracy: mean {:.4} std {:.4} min {:.4} max {:.4} over {} s\n",
                a.mean, a.std, a.min, a.max, a.count
            )
        }
        None => s += "identification accuracy: n/a\n",
    }
    s += &format!(
        "target tracking accuracy (tag {}): {}\n",
        r.target_tag.map_or_else(|| "-".to_string(), |t| t.to_string()),
        opt(r.target_tracking_accuracy, "")
    );
    s += &format!("drop rate: {}\n", opt(r.drop_rate, ""));
    s += &format!("tag velocity error: {}\n", opt(r.velocity_error_cms, " cm/s"));
    s += &format!(
        "stationary doppler std: estimator {} | reader api {}\n",
        opt(r.doppler_std_stationary.estimator_hz, " Hz"),
        opt(r.doppler_std_stationary.api_hz, " Hz")
    );
    s += &format!("median time to identification: {}\n", opt(r.median_identification_time_s, " s"));
    s += &format!("assignments: {} | revocations: {}\n", r.assignments, r.revocations);
    s
}

/// Writes every artifact of a run into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let seed = out.config.seed;
    let p = |name: &str| -> PathBuf { dir.join(name) };
    write_text(&p(SCENARIO_FILE), seed, &out.scenario.to_toml_string())?;
    write_frames(&p(FRAMES_FILE), seed, &out.sensors.frames)?;
    write_tracks(&p(TRACKS_FILE), seed, &out.processed.tracks)?;
    write_skeletons(&p(SKELETONS_FILE), seed, &out.sensors.skeletons)?;
    write_readings(&p(READINGS_FILE), seed, &out.sensors.readings)?;
    write_api(&p(API_FILE), seed, &out.sensors.api)?;
    write_rows(
        &p(PERSON_VELOCITIES_FILE),
        seed,
        out.processed.person_bins.iter().flat_map(|b| &b.samples).map(|s| PersonVelocityRow {
            bin: s.bin,
            t_bin: bin_start(s.bin),
            skeleton_id: s.skeleton,
            antenna_id: s.antenna,
            v_mps: s.v,
        }),
    )?;
    write_tag_velocities(&p(TAG_VELOCITIES_FILE), seed, &out.processed.tag_samples)?;
    write_sync(&p(SYNC_FILE), seed, &out.processed.fusion.sync)?;
    write_identity(&p(IDENTITY_FILE), seed, &out.processed.fusion.identity)?;
    write_events(&p(EVENTS_FILE), seed, &out.processed.fusion.events)?;
    write_report(dir, &out.report)
}

/// Logs needed to recompute the report.
#[derive(Debug, Clone)]
pub struct PersistedRun {
    pub scenario: Scenario,
    pub tracks: Vec<FloorPosition>,
    pub skeletons: Vec<SkeletonRecord>,
    pub tag_samples: Vec<TagVelocitySample>,
    pub api: Vec<ReaderDopplerReading>,
    pub fusion: FusionOutput,
    pub report: RunReport,
}

pub fn load_run(dir: &Path) -> Result<PersistedRun> {
    let p = |name: &str| dir.join(name);
    let scenario_path = p(SCENARIO_FILE);
    let text = fs::read_to_string(&scenario_path).map_err(io_err(&scenario_path))?;
    Ok(PersistedRun {
        scenario: Scenario::from_toml_str(&text)?,
        tracks: read_tracks(&p(TRACKS_FILE))?,
        skeletons: read_skeletons(&p(SKELETONS_FILE))?,
        tag_samples: read_tag_velocities(&p(TAG_VELOCITIES_FILE))?,
        api: read_api(&p(API_FILE))?,
        fusion: FusionOutput {
            identity: read_identity(&p(IDENTITY_FILE))?,
            events: read_events(&p(EVENTS_FILE))?,
            sync: read_sync(&p(SYNC_FILE))?,
        },
        report: read_report(dir)?,
    })
}

/// Recomputes the report from the logs in `dir`.
pub fn replay(dir: &Path) -> Result<(RunReport, RunReport)> {
    let run = load_run(dir)?;
    let recomputed = crate::runner::compute_report(
        &crate::runner::MetricInputs {
            scenario: &run.scenario,
            tracks: &run.tracks,
            skeletons: &run.skeletons,
            tag_samples: &run.tag_samples,
            api: &run.api,
            fusion: &run.fusion,
        },
        run.report.config.clone(),
    )?;
    Ok((run.report, recomputed))
}
