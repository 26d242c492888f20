//! Place database and loop acceptance.
//!
//! The nearest stored descriptor (L2) among eligible entries is the loop
//! candidate. It is accepted only when its descriptor distance `d_s` is below
//! `tau_s` and, when both positions are known, the distance `d_t` between the
//! two positions is below `tau_t`. Without positions (online use with no pose
//! source) the translational test is skipped.
//!
//! Entries closer in time to the query than `exclusion_window` are never
//! candidates. Distance ties go to the smaller scan id.

mod kdtree;
pub mod store;

use thiserror::Error;

pub use kdtree::{KdTree, Nearest};

use crate::descriptor::{squared_distance, Descriptor};
use crate::scalar::Scalar;

pub const DEFAULT_TAU_S: f64 = 0.1;
pub const DEFAULT_TAU_T: f64 = 20.0;
pub const DEFAULT_EXCLUSION_NS: i64 = 30_000_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("mixed descriptor lengths: index uses alpha {expected}, entry {scan_id} has {found}")]
    MixedAlpha {
        expected: usize,
        found: usize,
        scan_id: u64,
    },
    #[error("query alpha {found} does not match index alpha {expected}")]
    AlphaMismatch { expected: usize, found: usize },
    #[error("invalid retrieval parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T, E = RetrievalError> = std::result::Result<T, E>;

/// A stored place.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaceEntry<T> {
    pub descriptor: Descriptor<T>,
    pub scan_id: u64,
    pub timestamp: i64,
    pub position: Option<(f64, f64)>,
}

impl<T: Scalar> PlaceEntry<T> {
    /// Entry taking id and timestamp from the descriptor.
    pub fn new(descriptor: Descriptor<T>, position: Option<(f64, f64)>) -> Self {
        Self {
            scan_id: descriptor.source_scan_id,
            timestamp: descriptor.timestamp,
            descriptor,
            position,
        }
    }

    pub fn meta(&self) -> QueryMeta {
        QueryMeta {
            scan_id: self.scan_id,
            timestamp: self.timestamp,
            position: self.position,
        }
    }
}

/// What the database needs to know about a query besides its descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryMeta {
    pub scan_id: u64,
    pub timestamp: i64,
    pub position: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams {
    /// Descriptor-distance threshold.
    pub tau_s: f64,
    /// Position-distance threshold, meters.
    pub tau_t: f64,
    /// Minimum |Δt| between query and candidate, nanoseconds.
    pub exclusion_window: i64,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            tau_s: DEFAULT_TAU_S,
            tau_t: DEFAULT_TAU_T,
            exclusion_window: DEFAULT_EXCLUSION_NS,
        }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s.is_finite() && self.tau_s > 0.0) {
            return Err(RetrievalError::InvalidParams(format!(
                "tau_s must be positive, got {}",
                self.tau_s
            )));
        }
        if !(self.tau_t.is_finite() && self.tau_t > 0.0) {
            return Err(RetrievalError::InvalidParams(format!(
                "tau_t must be positive, got {}",
                self.tau_t
            )));
        }
        if self.exclusion_window < 0 {
            return Err(RetrievalError::InvalidParams(
                "exclusion window must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn eligible_time(&self, candidate: i64, query: i64) -> bool {
        candidate.abs_diff(query) >= self.exclusion_window.max(0) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult<T> {
    pub query_scan_id: u64,
    pub matched_scan_id: u64,
    /// Descriptor distance.
    pub d_s: T,
    /// Position distance, when both positions are known.
    pub d_t: Option<f64>,
    pub accepted: bool,
}

fn translational_distance(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some((a.0 - b.0).hypot(a.1 - b.1)),
        _ => None,
    }
}

fn make_result<T: Scalar>(
    entry: &PlaceEntry<T>,
    squared: T,
    meta: &QueryMeta,
    params: &RetrievalParams,
) -> MatchResult<T> {
    let d_s = squared.sqrt();
    let d_t = translational_distance(meta.position, entry.position);
    let accepted = d_s.as_f64() < params.tau_s && d_t.is_none_or(|d| d < params.tau_t);
    MatchResult {
        query_scan_id: meta.scan_id,
        matched_scan_id: entry.scan_id,
        d_s,
        d_t,
        accepted,
    }
}

/// Immutable KD-tree backed place database.
#[derive(Debug, Clone)]
pub struct PlaceIndex<T> {
    entries: Vec<PlaceEntry<T>>,
    alpha: Option<usize>,
    tree: KdTree<T>,
}

impl<T: Scalar> PlaceIndex<T> {
    /// Builds the index. All descriptors must have the same length.
    pub fn build(entries: Vec<PlaceEntry<T>>) -> Result<Self> {
        let alpha = entries.first().map(|e| e.descriptor.alpha());
        if let Some(expected) = alpha {
            if let Some(bad) = entries.iter().find(|e| e.descriptor.alpha() != expected) {
                return Err(RetrievalError::MixedAlpha {
                    expected,
                    found: bad.descriptor.alpha(),
                    scan_id: bad.scan_id,
                });
            }
        }
        let points = entries
            .iter()
            .flat_map(|e| e.descriptor.values().iter().copied())
            .collect();
        let keys = entries.iter().map(|e| e.scan_id).collect();
        let tree = KdTree::build(alpha.unwrap_or(0), points, keys);
        Ok(Self {
            entries,
            alpha,
            tree,
        })
    }

    pub fn entries(&self) -> &[PlaceEntry<T>] {
        &self.entries
    }

    pub fn alpha(&self) -> Option<usize> {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Best candidate for `query`, or `None` when nothing is eligible.
    pub fn query(
        &self,
        query: &Descriptor<T>,
        meta: &QueryMeta,
        params: &RetrievalParams,
    ) -> Result<Option<MatchResult<T>>> {
        self.query_where(query, meta, params, |_| true)
    }

    /// [`query`](Self::query) restricted further to entries accepted by `filter`.
    pub fn query_where(
        &self,
        query: &Descriptor<T>,
        meta: &QueryMeta,
        params: &RetrievalParams,
        filter: impl Fn(&PlaceEntry<T>) -> bool,
    ) -> Result<Option<MatchResult<T>>> {
        let Some(alpha) = self.alpha else {
            return Ok(None);
        };
        if query.alpha() != alpha {
            return Err(RetrievalError::AlphaMismatch {
                expected: alpha,
                found: query.alpha(),
            });
        }
        let found = self.tree.nearest_where(query.values(), |i| {
            let e = &self.entries[i];
            params.eligible_time(e.timestamp, meta.timestamp) && filter(e)
        });
        Ok(found.map(|n| make_result(&self.entries[n.index], n.squared_distance, meta, params)))
    }
}

/// Exhaustive-scan reference for [`PlaceIndex::query`].
pub fn linear_scan_query<T: Scalar>(
    entries: &[PlaceEntry<T>],
    query: &Descriptor<T>,
    meta: &QueryMeta,
    params: &RetrievalParams,
) -> Result<Option<MatchResult<T>>> {
    linear_scan_query_where(entries, query, meta, params, |_| true)
}

pub fn linear_scan_query_where<T: Scalar>(
    entries: &[PlaceEntry<T>],
    query: &Descriptor<T>,
    meta: &QueryMeta,
    params: &RetrievalParams,
    filter: impl Fn(&PlaceEntry<T>) -> bool,
) -> Result<Option<MatchResult<T>>> {
    let mut best: Option<(&PlaceEntry<T>, T)> = None;
    for e in entries {
        if e.descriptor.alpha() != query.alpha() {
            return Err(RetrievalError::AlphaMismatch {
                expected: e.descriptor.alpha(),
                found: query.alpha(),
            });
        }
        if !params.eligible_time(e.timestamp, meta.timestamp) || !filter(e) {
            continue;
        }
        let d2 = squared_distance(query.values(), e.descriptor.values());
        let replace = match best {
            None => true,
            Some((b, bd)) => d2 < bd || (d2 == bd && e.scan_id < b.scan_id),
        };
        if replace {
            best = Some((e, d2));
        }
    }
    Ok(best.map(|(e, d2)| make_result(e, d2, meta, params)))
}
