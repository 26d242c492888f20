use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use referee::descriptor::{self, DescriptorError};
use referee::evaluation::{
    self, bench::ReferenceFigure, FileBench, OperatingPoint, ScanStamp, SessionMode,
    REFERENCE_FIGURES,
};
use referee::feature::FeatureError;
use referee::pipeline::{self, PipelineError};
use referee::radar_io::{self, ScanFormat, Trajectory};
use referee::retrieval::store::{self, ManifestRow};
use referee::retrieval::{PlaceEntry, PlaceIndex};
use referee::synthetic::{self, Bounds, SensorModel};

use crate::config::Config;

#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Runtime(Vec<String>),
}

impl CliError {
    fn runtime(msg: impl ToString) -> Self {
        Self::Runtime(vec![msg.to_string()])
    }

    pub fn report(self) -> ExitCode {
        let (lines, code) = match self {
            Self::Config(lines) => (lines, 2),
            Self::Runtime(lines) => (lines, 1),
        };
        for line in lines {
            eprintln!("error: {line}");
        }
        ExitCode::from(code)
    }
}

type Result<T = ()> = std::result::Result<T, CliError>;

const SEC: i64 = 1_000_000_000;

/// Scan files of a directory (or of its `scans/` subdirectory), sorted by name.
fn scan_files(input: &Path) -> Result<Vec<PathBuf>> {
    let dir = if input.join(synthetic::SCAN_DIR).is_dir() {
        input.join(synthetic::SCAN_DIR)
    } else {
        input.to_owned()
    };
    let read = fs::read_dir(&dir)
        .map_err(|e| CliError::runtime(format!("cannot list {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && ScanFormat::from_path(p).is_some())
        .collect();
    files.sort();
    Ok(files)
}

fn load_trajectory(path: &Path) -> Result<Trajectory> {
    radar_io::load_trajectory(path).map_err(CliError::runtime)
}

fn is_config_error(e: &PipelineError) -> bool {
    matches!(
        e,
        PipelineError::Feature(FeatureError::InvalidParams(_))
            | PipelineError::Descriptor(
                DescriptorError::IndivisibleAlpha { .. } | DescriptorError::ZeroAlpha
            )
    )
}

enum ScanFailure {
    Config(String),
    Runtime(String),
}

pub fn describe(
    cfg: &Config,
    input: &Path,
    output: &Path,
    gt: Option<&Path>,
    masks: bool,
) -> Result {
    let files = scan_files(input)?;
    let trajectory = gt.map(load_trajectory).transpose()?;
    store::ensure_dir(output).map_err(CliError::runtime)?;
    if files.is_empty() {
        eprintln!("warning: no scans found in {}", input.display());
        return store::write_manifest(output, &[]).map_err(CliError::runtime);
    }

    let describe_one = |(i, path): (usize, &PathBuf)| -> std::result::Result<ManifestRow, ScanFailure> {
        let fail = |e: &dyn std::fmt::Display| ScanFailure::Runtime(format!("{}: {e}", path.display()));
        let format = ScanFormat::from_path(path).expect("filtered by extension");
        let mut scan = radar_io::load_polar_scan::<f64>(path, format, &cfg.load).map_err(|e| fail(&e))?;
        scan.scan_id = i as u64;
        let (mask, desc) = pipeline::describe_scan_with_mask(&scan, &cfg.describe).map_err(|e| {
            if is_config_error(&e) {
                ScanFailure::Config(format!("{}: {e}", path.display()))
            } else {
                fail(&e)
            }
        })?;
        let file = format!("{i:06}.rfrd");
        descriptor::save_descriptor(&desc, &output.join(&file)).map_err(|e| fail(&e))?;
        if masks {
            fs::write(output.join(format!("{i:06}.pgm")), mask.to_pgm()).map_err(|e| fail(&e))?;
        }
        let position = trajectory.as_ref().map(|t| t.pose_at(scan.timestamp).position());
        Ok(ManifestRow {
            scan_id: desc.source_scan_id,
            timestamp: desc.timestamp,
            x: position.map(|p| p.0),
            y: position.map(|p| p.1),
            file,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(CliError::runtime)?;
    let results: Vec<_> =
        pool.install(|| files.par_iter().enumerate().map(describe_one).collect());

    let mut rows = Vec::with_capacity(results.len());
    let (mut config_errors, mut runtime_errors) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(ScanFailure::Config(m)) => config_errors.push(m),
            Err(ScanFailure::Runtime(m)) => runtime_errors.push(m),
        }
    }
    store::write_manifest(output, &rows).map_err(CliError::runtime)?;
    eprintln!("described {} of {} scans into {}", rows.len(), files.len(), output.display());
    if !config_errors.is_empty() {
        config_errors.extend(runtime_errors);
        return Err(CliError::Config(config_errors));
    }
    if !runtime_errors.is_empty() {
        return Err(CliError::Runtime(runtime_errors));
    }
    Ok(())
}

fn with_positions(entries: &mut [PlaceEntry<f64>], trajectory: Option<&Trajectory>) {
    if let Some(t) = trajectory {
        for e in entries {
            e.position = Some(t.pose_at(e.timestamp).position());
        }
    }
}

fn manifest_rows(entries: &[PlaceEntry<f64>], files: &[ManifestRow]) -> Vec<ManifestRow> {
    entries
        .iter()
        .zip(files)
        .map(|(e, row)| ManifestRow {
            scan_id: e.scan_id,
            timestamp: e.timestamp,
            x: e.position.map(|p| p.0),
            y: e.position.map(|p| p.1),
            file: row.file.clone(),
        })
        .collect()
}

pub fn index(db: &Path, gt: Option<&Path>) -> Result {
    let rows = store::read_manifest(db).map_err(CliError::runtime)?;
    let mut entries = store::load_entries::<f64>(db).map_err(CliError::runtime)?;
    let trajectory = gt.map(load_trajectory).transpose()?;
    with_positions(&mut entries, trajectory.as_ref());
    let index = PlaceIndex::build(entries).map_err(CliError::runtime)?;
    store::write_manifest(db, &manifest_rows(index.entries(), &rows)).map_err(CliError::runtime)?;
    match index.alpha() {
        Some(alpha) => println!("indexed {} descriptors (alpha {alpha})", index.len()),
        None => println!("indexed 0 descriptors"),
    }
    Ok(())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

struct Sessions {
    index: PlaceIndex<f64>,
    queries: Vec<PlaceEntry<f64>>,
    mode: SessionMode,
    db_trajectory: Option<Trajectory>,
    query_trajectory: Option<Trajectory>,
}

fn open_sessions(
    cfg: &Config,
    db: &Path,
    queries: &Path,
    gt: Option<&Path>,
    query_gt: Option<&Path>,
) -> Result<Sessions> {
    let db_trajectory = gt.map(load_trajectory).transpose()?;
    let query_trajectory = match query_gt {
        Some(p) => Some(load_trajectory(p)?),
        None => db_trajectory.clone(),
    };
    let mut db_entries = store::load_entries::<f64>(db).map_err(CliError::runtime)?;
    with_positions(&mut db_entries, db_trajectory.as_ref());
    let mode = if same_dir(db, queries) {
        SessionMode::Sequential {
            exclusion_window: cfg.retrieval.exclusion_window,
        }
    } else {
        SessionMode::MultiSession
    };
    let query_entries = if matches!(mode, SessionMode::Sequential { .. }) {
        db_entries.clone()
    } else {
        let mut q = store::load_entries::<f64>(queries).map_err(CliError::runtime)?;
        with_positions(&mut q, query_trajectory.as_ref());
        q
    };
    let index = PlaceIndex::build(db_entries).map_err(CliError::runtime)?;
    Ok(Sessions {
        index,
        queries: query_entries,
        mode,
        db_trajectory,
        query_trajectory,
    })
}

pub fn query(
    cfg: &Config,
    db: &Path,
    queries: &Path,
    gt: Option<&Path>,
    query_gt: Option<&Path>,
    output: Option<&Path>,
) -> Result {
    let s = open_sessions(cfg, db, queries, gt, query_gt)?;
    let results = evaluation::match_stream(&s.index, &s.queries, s.mode, &cfg.retrieval)
        .map_err(CliError::runtime)?;
    let written = match output {
        Some(path) => fs::File::create(path).and_then(|f| store::write_match_results(f, &results)),
        None => store::write_match_results(io::stdout().lock(), &results),
    };
    written.map_err(CliError::runtime)
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    mode: &'static str,
    queries: usize,
    positives: usize,
    negatives: usize,
    auc_pr: f64,
    auc_roc: f64,
    max_f1: f64,
    recall_at_precision_1: f64,
    operating_tau_s: f64,
    loop_radius: f64,
    exclusion_s: f64,
    alpha: usize,
    descriptor_bytes: usize,
    search_time_s: f64,
    reference: Vec<ReferenceFigure>,
}

fn stamps(entries: &[PlaceEntry<f64>]) -> Vec<ScanStamp> {
    entries
        .iter()
        .map(|e| ScanStamp {
            scan_id: e.scan_id,
            timestamp: e.timestamp,
        })
        .collect()
}

fn write_file(path: &Path, write: impl FnOnce(fs::File) -> io::Result<()>) -> Result {
    fs::File::create(path)
        .and_then(write)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

pub fn eval(
    cfg: &Config,
    db: &Path,
    queries: &Path,
    gt: &Path,
    query_gt: Option<&Path>,
    out: &Path,
) -> Result {
    let s = open_sessions(cfg, db, queries, Some(gt), query_gt)?;
    let db_traj = s.db_trajectory.as_ref().expect("gt is required");
    let q_traj = s.query_trajectory.as_ref().expect("gt is required");

    let started = Instant::now();
    let results = evaluation::match_stream(&s.index, &s.queries, s.mode, &cfg.retrieval)
        .map_err(CliError::runtime)?;
    let search_time_s = started.elapsed().as_secs_f64() / s.queries.len().max(1) as f64;

    let truth = evaluation::label_for_mode(
        s.mode,
        db_traj,
        &stamps(s.index.entries()),
        q_traj,
        &stamps(&s.queries),
        cfg.loop_radius,
    );
    let records = evaluation::to_records(&results);
    let curve = evaluation::pr_curve(&records, &truth).map_err(|e| {
        CliError::runtime(format!(
            "{e} (no query has a database scan within {} m{})",
            cfg.loop_radius,
            match s.mode {
                SessionMode::Sequential { .. } => " outside the exclusion window",
                SessionMode::MultiSession => "",
            }
        ))
    })?;
    let graph = evaluation::export_matching_graph(&records, &truth, &curve, OperatingPoint::MaxPrecision);

    store::ensure_dir(out).map_err(CliError::runtime)?;
    write_file(&out.join("pr.csv"), |f| curve.write_csv(f))?;
    write_file(&out.join("matches.csv"), |f| evaluation::write_matching_graph(f, &graph))?;

    let alpha = s.index.alpha().unwrap_or(0);
    let summary = EvalSummary {
        mode: match s.mode {
            SessionMode::Sequential { .. } => "single-session",
            SessionMode::MultiSession => "multi-session",
        },
        queries: s.queries.len(),
        positives: curve.positives,
        negatives: curve.negatives,
        auc_pr: curve.auc_pr,
        auc_roc: curve.auc_roc,
        max_f1: curve.max_f1,
        recall_at_precision_1: curve.recall_at_precision(1.0),
        operating_tau_s: curve.max_precision_point().tau_s,
        loop_radius: cfg.loop_radius,
        exclusion_s: cfg.retrieval.exclusion_window as f64 / SEC as f64,
        alpha,
        descriptor_bytes: 8 * alpha,
        search_time_s,
        reference: REFERENCE_FIGURES.to_vec(),
    };
    write_file(&out.join("summary.json"), |mut f| {
        serde_json::to_writer_pretty(&mut f, &summary)?;
        writeln!(f)
    })?;
    println!(
        "{}: {} queries, {} with true loops; auc_pr {:.4}, auc_roc {:.4}, max_f1 {:.4}, recall@P=1 {:.4}",
        summary.mode,
        summary.queries,
        summary.positives,
        summary.auc_pr,
        summary.auc_roc,
        summary.max_f1,
        summary.recall_at_precision_1
    );
    Ok(())
}

pub fn bench(cfg: &Config, input: &Path, output: Option<&Path>) -> Result {
    let files = scan_files(input)?;
    let mut pipeline = FileBench::<f64>::new(cfg.describe, cfg.retrieval, cfg.load);
    let report = evaluation::bench(&mut pipeline, &files).map_err(CliError::runtime)?;
    let json = serde_json::to_string_pretty(&report).map_err(CliError::runtime)?;
    match output {
        Some(path) => write_file(path, |mut f| writeln!(f, "{json}"))?,
        None => println!("{json}"),
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SynthGenArgs {
    /// World and noise seed
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Noise seed when it should differ from the world seed
    #[arg(long = "noise-seed")]
    pub noise_seed: Option<u64>,
    /// Number of point landmarks
    #[arg(long, default_value_t = 4000)]
    pub landmarks: usize,
    /// Number of poses (scans)
    #[arg(long, default_value_t = 200)]
    pub poses: usize,
    /// Drive out and back so the second half revisits the first
    #[arg(long)]
    pub revisit: bool,
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
    /// Half-width of the square world, meters
    #[arg(long = "world-size", default_value_t = 300.0)]
    pub world_size: f64,
    #[arg(long = "start-x", default_value_t = -200.0)]
    pub start_x: f64,
    #[arg(long = "start-y", default_value_t = 0.0)]
    pub start_y: f64,
    /// Heading of the path, radians
    #[arg(long, default_value_t = 0.0)]
    pub heading: f64,
    /// Meters between poses
    #[arg(long, default_value_t = 2.0)]
    pub step: f64,
    /// Seconds between poses
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
    /// First timestamp, seconds
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 400)]
    pub azimuths: usize,
    #[arg(long = "range-bins", default_value_t = 512)]
    pub range_bins: usize,
    /// Meters
    #[arg(long = "max-range", default_value_t = 100.0)]
    pub max_range: f64,
    #[arg(long = "noise-std", default_value_t = 4.0)]
    pub noise_std: f64,
}

pub fn synth_gen(args: &SynthGenArgs) -> Result {
    if args.poses == 0 || !(args.period > 0.0) || !(args.world_size > 0.0) {
        return Err(CliError::Config(vec![
            "poses, period and world-size must be positive".into(),
        ]));
    }
    let sensor = SensorModel {
        max_range: args.max_range,
        range_bins: args.range_bins,
        azimuths: args.azimuths,
        beam_width: 2.0 * std::f64::consts::TAU / args.azimuths.max(1) as f64,
        noise_floor_std: args.noise_std,
        ..Default::default()
    };
    sensor
        .validate()
        .map_err(|e| CliError::Config(vec![e.to_string()]))?;

    let world = synthetic::generate_world(args.seed, args.landmarks, Bounds::square(args.world_size));
    let t0 = (args.t0 * SEC as f64).round() as i64;
    let dt = (args.period * SEC as f64).round() as i64;
    let start = (args.start_x, args.start_y);
    let poses = if args.revisit {
        synthetic::out_and_back(args.poses, start, args.heading, args.step, t0, dt)
    } else {
        synthetic::line_path(args.poses, start, args.heading, args.step, t0, dt)
    };
    let trajectory = Trajectory::new(poses).map_err(CliError::runtime)?;
    let paths = synthetic::generate_session(
        &world,
        &trajectory,
        &sensor,
        args.noise_seed.unwrap_or(args.seed),
        &args.out,
    )
    .map_err(CliError::runtime)?;
    println!(
        "wrote {} scans ({}x{}) and {} to {}",
        paths.len(),
        sensor.azimuths,
        sensor.range_bins,
        synthetic::TRAJECTORY_FILE,
        args.out.display()
    );
    Ok(())
}
