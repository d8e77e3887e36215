//! `tagsync` command-line runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tagsync::config::NoiseProfile;
use tagsync::error::{Error, Result};
use tagsync::logs;
use tagsync::runner::{self, RunConfig};
use tagsync::scenario::{load_scenario, presets, Scenario};

#[derive(Parser)]
#[command(name = "tagsync", version, about = "Depth-camera and RFID identity fusion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario, write all logs and the report.
    Run(RunArgs),
    /// Sweep tag and antenna counts; prints a CSV table of drop rate and identification time.
    Sweep(SweepArgs),
    /// Recompute the report from the logs of an earlier run.
    Replay {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Parse and validate a scenario file.
    ValidateScenario {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Defaults to the scenario's rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Keep only the first N antennas of the scenario.
    #[arg(long)]
    antennas: Option<usize>,
    /// Total tags in the room; extra tags are unenrolled background tags.
    #[arg(long)]
    tags: Option<u32>,
    #[arg(long, default_value = "default")]
    noise_profile: String,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Leave the first S seconds out of the accuracy metrics.
    #[arg(long, default_value_t = 0.0)]
    skip_convergence: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Tag counts: `a..b` (step 10), `a..b:step`, or a comma list.
    #[arg(long, default_value = "10,25,50,75,100")]
    tags: String,
    /// Antenna counts, comma separated.
    #[arg(long, default_value = "1,2", value_delimiter = ',')]
    antennas: Vec<usize>,
    /// Base scenario; a single in-view walker when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Keep only the first person of the scenario and their tag.
    #[arg(long)]
    single_person: bool,
    /// Number of seeds per grid point (seeds 1..=N).
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value = "default")]
    noise_profile: String,
}

fn parse_tags(spec: &str) -> Result<Vec<u32>> {
    let bad = || Error::Validation {
        field: "tags".into(),
        message: format!("cannot parse `{spec}`; use `a..b`, `a..b:step` or `a,b,c`"),
    };
    if let Some((lo, rest)) = spec.split_once("..") {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "10"));
        let (lo, hi, step): (u32, u32, usize) = (
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            step.trim().parse().map_err(|_| bad())?,
        );
        if step == 0 || lo > hi || lo == 0 {
            return Err(bad());
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    let tags: Vec<u32> = spec
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if tags.is_empty() || tags.contains(&0) {
        return Err(bad());
    }
    Ok(tags)
}

fn single_person(mut s: Scenario) -> Result<Scenario> {
    let first = s.persons.first().map(|p| p.id).ok_or_else(|| Error::Validation {
        field: "persons".into(),
        message: "scenario has no person".into(),
    })?;
    s.persons.truncate(1);
    s.tags.retain(|t| t.person == Some(first));
    s.target_tag = None;
    s.validate()?;
    Ok(s)
}

fn run(args: RunArgs) -> Result<()> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(d) = args.duration {
        scenario.duration_s = d;
    }
    if let Some(n) = args.antennas {
        scenario = scenario.with_antenna_count(n)?;
    }
    if let Some(n) = args.tags {
        scenario = scenario.with_total_tags(n)?;
    }
    scenario.validate()?;
    let cfg = RunConfig {
        seed: args.seed.unwrap_or(scenario.rng_seed),
        noise: NoiseProfile::by_name(&args.noise_profile)?,
        read_model: Default::default(),
        skip_convergence_s: args.skip_convergence,
    };
    scenario.rng_seed = cfg.seed;
    let out = runner::run(&scenario, &cfg)?;
    logs::write_artifacts(&args.out_dir, &out)?;
    print!("{}", logs::render_report(&out.report));
    println!("logs written to {}", args.out_dir.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let tags = parse_tags(&args.tags)?;
    let mut base = match &args.scenario {
        Some(p) => load_scenario(p)?,
        None => presets::single_walker(args.duration, 1),
    };
    base.duration_s = args.duration;
    if args.single_person {
        base = single_person(base)?;
    }
    base.validate()?;
    let template = RunConfig::new(0).with_noise(NoiseProfile::by_name(&args.noise_profile)?);
    let seeds: Vec<u64> = (1..=args.seeds).collect();
    let points = runner::sweep(&base, &tags, &args.antennas, &seeds, &template)?;
    println!("{}", logs::header_line(0));
    println!("tags,antennas,runs,drop_rate,median_identification_time_s");
    for p in points {
        let f = |v: Option<f64>| v.map_or_else(|| "inf".to_string(), |x| x.to_string());
        println!(
            "{},{},{},{},{}",
            p.tags,
            p.antennas,
            p.runs,
            p.drop_rate.map_or_else(|| "n/a".to_string(), |x| x.to_string()),
            f(p.median_identification_time_s)
        );
    }
    Ok(())
}

fn replay(out_dir: PathBuf) -> Result<()> {
    let (stored, recomputed) = logs::replay(&out_dir)?;
    print!("{}", logs::render_report(&recomputed));
    if stored != recomputed {
        return Err(Error::Log {
            path: out_dir.join(logs::REPORT_JSON),
            message: "report differs from the metrics recomputed from the logs".into(),
        });
    }
    println!("report matches the logs");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Replay { out_dir } => replay(out_dir),
        Command::ValidateScenario { scenario } => load_scenario(&scenario).map(|s| {
            println!(
                "ok: {} person(s), {} tag(s), {} antenna(s), {} s",
                s.persons.len(),
                s.tags.len(),
                s.antennas.len(),
                s.duration_s
            );
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
