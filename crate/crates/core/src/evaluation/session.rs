//! Runs a database against a query set and collects one record per query.

use super::ground_truth::SessionMode;
use super::pr::{Candidate, QueryRecord};
use crate::retrieval::{MatchResult, PlaceEntry, PlaceIndex, RetrievalError, RetrievalParams};
use crate::scalar::Scalar;

/// Query scan id and its best candidate, if any.
pub type QueryMatch<T> = (u64, Option<MatchResult<T>>);

/// Nearest candidate of every query.
///
/// In sequential mode the exclusion window applies and only entries older
/// than the query are eligible; in multi-session mode every database entry
/// is eligible regardless of time.
pub fn match_stream<T: Scalar>(
    index: &PlaceIndex<T>,
    queries: &[PlaceEntry<T>],
    mode: SessionMode,
    params: &RetrievalParams,
) -> Result<Vec<QueryMatch<T>>, RetrievalError> {
    let params = match mode {
        SessionMode::Sequential { exclusion_window } => RetrievalParams {
            exclusion_window,
            ..*params
        },
        SessionMode::MultiSession => RetrievalParams {
            exclusion_window: 0,
            ..*params
        },
    };
    queries
        .iter()
        .map(|q| {
            let meta = q.meta();
            let found = match mode {
                SessionMode::Sequential { .. } => {
                    index.query_where(&q.descriptor, &meta, &params, |e| e.timestamp < q.timestamp)?
                }
                SessionMode::MultiSession => index.query(&q.descriptor, &meta, &params)?,
            };
            Ok((q.scan_id, found))
        })
        .collect()
}

/// Converts retrieval results into PR-sweep records.
pub fn to_records<T: Scalar>(results: &[QueryMatch<T>]) -> Vec<QueryRecord> {
    results
        .iter()
        .map(|(query_id, m)| QueryRecord {
            query_id: *query_id,
            candidate: m.as_ref().map(|m| Candidate {
                match_id: m.matched_scan_id,
                d_s: m.d_s.as_f64(),
                d_t: m.d_t,
            }),
        })
        .collect()
}
