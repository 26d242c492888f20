//! Renders an out-and-back synthetic session in memory and prints its
//! precision/recall summary.
//!
//! cargo run --release -p referee-core --example synthetic_session -- [seed] [landmarks]

use referee::evaluation::{self, ScanStamp, SessionMode};
use referee::pipeline::{describe_scan, DescribeParams};
use referee::retrieval::{PlaceEntry, PlaceIndex, RetrievalParams};
use referee::synthetic::{self, Bounds, SensorModel};
use referee::Trajectory;

const SEC: i64 = 1_000_000_000;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let landmarks: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4000);

    let world = synthetic::generate_world(seed, landmarks, Bounds::square(300.0));
    let poses = synthetic::out_and_back(200, (-200.0, 0.0), 0.0, 2.0, 0, SEC);
    let trajectory = Trajectory::new(poses).expect("valid path");
    let sensor = SensorModel::default();
    let params = DescribeParams::default();

    let entries: Vec<PlaceEntry<f64>> = trajectory
        .poses()
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let scan = synthetic::render_scan(&world, pose, &sensor, seed, i as u64);
            let desc = describe_scan(&scan, &params).expect("describable scan");
            PlaceEntry::new(desc, Some(pose.position()))
        })
        .collect();

    let stamps: Vec<ScanStamp> = entries
        .iter()
        .map(|e| ScanStamp {
            scan_id: e.scan_id,
            timestamp: e.timestamp,
        })
        .collect();
    let exclusion = 30 * SEC;
    let gt = evaluation::label_true_loops(&trajectory, &stamps, 20.0, exclusion);
    let index = PlaceIndex::build(entries.clone()).expect("uniform alpha");
    let results = evaluation::match_stream(
        &index,
        &entries,
        SessionMode::Sequential {
            exclusion_window: exclusion,
        },
        &RetrievalParams::default(),
    )
    .expect("matching alpha");
    let curve = evaluation::pr_curve(&evaluation::to_records(&results), &gt).expect("positives");
    println!(
        "seed {seed}: positives {} recall@P=1 {:.3} auc_pr {:.3} auc_roc {:.3} max_f1 {:.3}",
        curve.positives,
        curve.recall_at_precision(1.0),
        curve.auc_pr,
        curve.auc_roc,
        curve.max_f1
    );
}
