//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use referee::evaluation::{self, LoopGroundTruth, PrCurve, QueryRecord, ScanStamp, SessionMode};
use referee::pipeline::{describe_scan, DescribeParams};
use referee::retrieval::{PlaceEntry, PlaceIndex, QueryMeta, RetrievalParams};
use referee::synthetic::{self, Bounds, SensorModel};
use referee::{FeatureMask, Trajectory};

pub const SEC: i64 = 1_000_000_000;

/// Landmarks in the 600 m × 600 m synthetic world.
pub const SESSION_LANDMARKS: usize = 4000;
pub const SESSION_POSES: usize = 200;
pub const SESSION_RADIUS: f64 = 20.0;
pub const SESSION_EXCLUSION: i64 = 30 * SEC;

pub fn random_mask(rng: &mut impl Rng, rows: usize, cols: usize) -> FeatureMask {
    let density: f64 = rng.random_range(0.0..0.3);
    let cells = (0..rows * cols).map(|_| rng.random_bool(density)).collect();
    FeatureMask::new(rows, cols, cells).unwrap()
}

/// Descriptor values computed as an explicit double sum of free-cell
/// indicators up to an independently found farthest feature.
pub fn brute_force_referee(mask: &FeatureMask, alpha: usize) -> Vec<f64> {
    let (h, w) = (mask.rows(), mask.cols());
    let hb = h / alpha;
    (0..alpha)
        .map(|i| {
            let mut free = 0usize;
            for j in i * hb..(i + 1) * hb {
                let mut r = 0;
                for k in 0..w {
                    if mask.get(j, k) {
                        r = k + 1;
                    }
                }
                for k in 1..=r {
                    if !mask.get(j, k - 1) {
                        free += 1;
                    }
                }
            }
            free as f64 / (hb * w) as f64
        })
        .collect()
}

/// Nearest eligible entry by exhaustive search with ties to the smaller
/// scan id: `(scan_id, d_s, accepted)`.
pub fn brute_force_nearest(
    entries: &[PlaceEntry<f64>],
    query: &[f64],
    meta: &QueryMeta,
    params: &RetrievalParams,
) -> Option<(u64, f64, bool)> {
    let mut best: Option<(u64, f64, &PlaceEntry<f64>)> = None;
    for e in entries {
        if (e.timestamp - meta.timestamp).abs() < params.exclusion_window {
            continue;
        }
        let d2: f64 = e
            .descriptor
            .values()
            .iter()
            .zip(query)
            .map(|(a, b)| (a - b) * (a - b))
            .fold(0.0, |acc, d| acc + d);
        let better = match best {
            None => true,
            Some((id, bd2, _)) => d2 < bd2 || (d2 == bd2 && e.scan_id < id),
        };
        if better {
            best = Some((e.scan_id, d2, e));
        }
    }
    best.map(|(id, d2, e)| {
        let d_s = d2.sqrt();
        let d_t = match (e.position, meta.position) {
            (Some(a), Some(b)) => Some((a.0 - b.0).hypot(a.1 - b.1)),
            _ => None,
        };
        (id, d_s, d_s < params.tau_s && d_t.is_none_or(|d| d < params.tau_t))
    })
}

/// `(tp, fp, fn)` at threshold `tau` by direct counting.
pub fn recount(records: &[QueryRecord], gt: &LoopGroundTruth, tau: f64) -> (usize, usize, usize) {
    let (mut tp, mut fp) = (0, 0);
    for r in records {
        let Some(c) = r.candidate else { continue };
        if !(c.d_s < tau) {
            continue;
        }
        let true_loop = gt.has_true_loop(r.query_id) && c.d_t.is_some_and(|d| d <= gt.loop_radius);
        if true_loop {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let positives = records.iter().filter(|r| gt.has_true_loop(r.query_id)).count();
    (tp, fp, positives - tp)
}

/// Single-session labels from all pairs: candidates are earlier scans
/// outside the window and within the radius.
pub fn all_pairs_labels(
    trajectory: &Trajectory,
    scans: &[ScanStamp],
    radius: f64,
    window: i64,
) -> BTreeMap<u64, BTreeSet<u64>> {
    let pos: Vec<_> = scans.iter().map(|s| trajectory.pose_at(s.timestamp)).collect();
    (0..scans.len())
        .map(|q| {
            let set = (0..q)
                .filter(|&c| {
                    scans[q].timestamp.abs_diff(scans[c].timestamp) >= window as u64
                        && pos[q].distance_to(&pos[c]) <= radius
                })
                .map(|c| scans[c].scan_id)
                .collect();
            (scans[q].scan_id, set)
        })
        .collect()
}

pub struct SessionRun {
    pub curve: PrCurve,
    pub records: Vec<QueryRecord>,
    pub truth: LoopGroundTruth,
}

/// Renders, describes, matches and scores a 200-pose out-and-back session.
pub fn run_synthetic_session(seed: u64) -> SessionRun {
    let world = synthetic::generate_world(seed, SESSION_LANDMARKS, Bounds::square(300.0));
    let poses = synthetic::out_and_back(SESSION_POSES, (-200.0, 0.0), 0.0, 2.0, 0, SEC);
    let trajectory = Trajectory::new(poses).unwrap();
    let sensor = SensorModel::default();
    let params = DescribeParams::default();
    let entries: Vec<PlaceEntry<f64>> = trajectory
        .poses()
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let scan = synthetic::render_scan(&world, pose, &sensor, seed, i as u64);
            PlaceEntry::new(describe_scan(&scan, &params).unwrap(), Some(pose.position()))
        })
        .collect();
    let stamps: Vec<ScanStamp> = entries
        .iter()
        .map(|e| ScanStamp {
            scan_id: e.scan_id,
            timestamp: e.timestamp,
        })
        .collect();
    let truth = evaluation::label_true_loops(&trajectory, &stamps, SESSION_RADIUS, SESSION_EXCLUSION);
    let index = PlaceIndex::build(entries.clone()).unwrap();
    let mode = SessionMode::Sequential {
        exclusion_window: SESSION_EXCLUSION,
    };
    let results =
        evaluation::match_stream(&index, &entries, mode, &RetrievalParams::default()).unwrap();
    let records = evaluation::to_records(&results);
    let curve = evaluation::pr_curve(&records, &truth).unwrap();
    SessionRun {
        curve,
        records,
        truth,
    }
}
