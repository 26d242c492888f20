use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::radar_io::Trajectory;

pub const DEFAULT_LOOP_RADIUS: f64 = 20.0;

/// A scan to be labelled: id and acquisition time (ns).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanStamp {
    pub scan_id: u64,
    pub timestamp: i64,
}

/// How candidates relate to queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionMode {
    /// Queries and database are one traversal: candidates are scans listed
    /// before the query and at least `exclusion_window` ns away in time.
    Sequential { exclusion_window: i64 },
    /// Database is a separate traversal: every database scan is a candidate.
    MultiSession,
}

/// True-loop labels for every query scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoopGroundTruth {
    pub loop_radius: f64,
    queries: BTreeMap<u64, BTreeSet<u64>>,
}

impl LoopGroundTruth {
    pub fn from_sets(loop_radius: f64, queries: BTreeMap<u64, BTreeSet<u64>>) -> Self {
        Self {
            loop_radius,
            queries,
        }
    }

    pub fn has_true_loop(&self, query_id: u64) -> bool {
        self.queries.get(&query_id).is_some_and(|s| !s.is_empty())
    }

    pub fn true_candidates(&self, query_id: u64) -> Option<&BTreeSet<u64>> {
        self.queries.get(&query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.queries.keys().copied()
    }

    pub fn positives(&self) -> usize {
        self.queries.values().filter(|s| !s.is_empty()).count()
    }

    pub fn negatives(&self) -> usize {
        self.queries.len() - self.positives()
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

struct Located {
    scan_id: u64,
    timestamp: i64,
    order: usize,
    x: f64,
    y: f64,
}

fn locate(trajectory: &Trajectory, scans: &[ScanStamp]) -> Vec<Located> {
    scans
        .iter()
        .enumerate()
        .map(|(order, s)| {
            let p = trajectory.pose_at(s.timestamp);
            Located {
                scan_id: s.scan_id,
                timestamp: s.timestamp,
                order,
                x: p.x,
                y: p.y,
            }
        })
        .collect()
}

/// Uniform grid with cell size equal to the loop radius; a radius query
/// only needs the 3×3 block around the query's cell.
struct Grid<'a> {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<&'a Located>>,
}

impl<'a> Grid<'a> {
    fn new(cell: f64, items: &'a [Located]) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<&Located>> = HashMap::new();
        for item in items {
            buckets.entry(Self::key(cell, item.x, item.y)).or_default().push(item);
        }
        Self { cell, buckets }
    }

    fn key(cell: f64, x: f64, y: f64) -> (i64, i64) {
        ((x / cell).floor() as i64, (y / cell).floor() as i64)
    }

    fn within(&self, x: f64, y: f64, radius: f64) -> impl Iterator<Item = &'a Located> + '_ {
        let (cx, cy) = Self::key(self.cell, x, y);
        (-1..=1)
            .flat_map(move |dx| (-1..=1).map(move |dy| (cx + dx, cy + dy)))
            .filter_map(|k| self.buckets.get(&k))
            .flatten()
            .copied()
            .filter(move |c| (c.x - x).hypot(c.y - y) <= radius)
    }
}

/// Labels single-session queries: every scan is a query, candidates come
/// from earlier scans of the same list.
pub fn label_true_loops(
    trajectory: &Trajectory,
    scans: &[ScanStamp],
    loop_radius: f64,
    exclusion_window: i64,
) -> LoopGroundTruth {
    let located = locate(trajectory, scans);
    let grid = Grid::new(loop_radius.max(f64::MIN_POSITIVE), &located);
    let window = exclusion_window.max(0) as u64;
    let queries = located
        .iter()
        .map(|q| {
            let set = grid
                .within(q.x, q.y, loop_radius)
                .filter(|c| c.order < q.order && c.timestamp.abs_diff(q.timestamp) >= window)
                .map(|c| c.scan_id)
                .collect();
            (q.scan_id, set)
        })
        .collect();
    LoopGroundTruth {
        loop_radius,
        queries,
    }
}

/// Labels queries of one traversal against a database from another.
pub fn label_true_loops_multi(
    db_trajectory: &Trajectory,
    db_scans: &[ScanStamp],
    query_trajectory: &Trajectory,
    query_scans: &[ScanStamp],
    loop_radius: f64,
) -> LoopGroundTruth {
    let db = locate(db_trajectory, db_scans);
    let grid = Grid::new(loop_radius.max(f64::MIN_POSITIVE), &db);
    let queries = locate(query_trajectory, query_scans)
        .iter()
        .map(|q| {
            let set = grid
                .within(q.x, q.y, loop_radius)
                .map(|c| c.scan_id)
                .collect();
            (q.scan_id, set)
        })
        .collect();
    LoopGroundTruth {
        loop_radius,
        queries,
    }
}

/// Dispatches on `mode`. In multi-session mode `db` is used for both sides
/// when no separate query trajectory is given.
pub fn label_for_mode(
    mode: SessionMode,
    db_trajectory: &Trajectory,
    db_scans: &[ScanStamp],
    query_trajectory: &Trajectory,
    query_scans: &[ScanStamp],
    loop_radius: f64,
) -> LoopGroundTruth {
    match mode {
        SessionMode::Sequential { exclusion_window } => {
            label_true_loops(query_trajectory, query_scans, loop_radius, exclusion_window)
        }
        SessionMode::MultiSession => label_true_loops_multi(
            db_trajectory,
            db_scans,
            query_trajectory,
            query_scans,
            loop_radius,
        ),
    }
}
