//! Precision/recall sweep over the descriptor-distance threshold.
//!
//! Each query contributes its single nearest candidate (or nothing). For a
//! threshold `tau`, the query is a detection when `d_s < tau`. A detection is
//! a true positive when the query has a true loop and the matched scan lies
//! within the loop radius, otherwise a false positive. Every positive query
//! that is not a true positive is a false negative, so `TP + FN` always
//! equals the number of positive queries.

use std::io;

use thiserror::Error;

use super::ground_truth::LoopGroundTruth;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("ground truth contains no true loops; precision/recall is undefined")]
    NoPositives,
}

/// Nearest candidate of one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub match_id: u64,
    pub d_s: f64,
    /// Distance between query and match positions, meters. Unknown positions
    /// never count as true loops.
    pub d_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRecord {
    pub query_id: u64,
    pub candidate: Option<Candidate>,
}

impl QueryRecord {
    fn is_true_loop(&self, gt: &LoopGroundTruth) -> bool {
        self.candidate.is_some_and(|c| {
            gt.has_true_loop(self.query_id) && c.d_t.is_some_and(|d| d <= gt.loop_radius)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub tau_s: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// False positives on queries without any true loop.
    pub fp_negatives: usize,
}

impl PrPoint {
    pub fn f1(&self) -> f64 {
        let s = self.precision + self.recall;
        if s > 0.0 {
            2.0 * self.precision * self.recall / s
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// Ordered by increasing `tau_s`, starting at `-inf` and ending at `+inf`.
    pub points: Vec<PrPoint>,
    pub auc_pr: f64,
    pub auc_roc: f64,
    pub max_f1: f64,
    pub positives: usize,
    pub negatives: usize,
}

impl PrCurve {
    /// Highest recall reached with precision at least `precision`.
    pub fn recall_at_precision(&self, precision: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.precision >= precision)
            .map(|p| p.recall)
            .fold(0.0, f64::max)
    }

    /// Point with the highest precision, ties resolved toward higher recall.
    pub fn max_precision_point(&self) -> &PrPoint {
        self.points
            .iter()
            .reduce(|best, p| {
                if (p.precision, p.recall) > (best.precision, best.recall) {
                    p
                } else {
                    best
                }
            })
            .expect("curve always has the two infinite endpoints")
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau_s", "precision", "recall", "tp", "fp", "fn"])?;
        for p in &self.points {
            w.write_record([
                p.tau_s.to_string(),
                p.precision.to_string(),
                p.recall.to_string(),
                p.tp.to_string(),
                p.fp.to_string(),
                p.fn_.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Sweeps `tau_s` over every observed distance plus both infinities.
pub fn pr_curve(records: &[QueryRecord], gt: &LoopGroundTruth) -> Result<PrCurve, EvalError> {
    let positives = records.iter().filter(|r| gt.has_true_loop(r.query_id)).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let negatives = records.len() - positives;

    // (d_s, is_tp, on_negative_query)
    let mut detections: Vec<(f64, bool, bool)> = records
        .iter()
        .filter_map(|r| {
            r.candidate
                .map(|c| (c.d_s, r.is_true_loop(gt), !gt.has_true_loop(r.query_id)))
        })
        .collect();
    detections.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(detections.iter().map(|d| d.0));
    thresholds.dedup();
    thresholds.push(f64::INFINITY);

    let mut points = Vec::with_capacity(thresholds.len());
    let (mut tp, mut fp, mut fp_neg, mut next) = (0usize, 0usize, 0usize, 0usize);
    for tau in thresholds {
        while next < detections.len() && detections[next].0 < tau {
            let (_, is_tp, on_negative) = detections[next];
            if is_tp {
                tp += 1;
            } else {
                fp += 1;
                if on_negative {
                    fp_neg += 1;
                }
            }
            next += 1;
        }
        points.push(PrPoint {
            tau_s: tau,
            precision: if tp + fp == 0 {
                1.0
            } else {
                tp as f64 / (tp + fp) as f64
            },
            recall: tp as f64 / positives as f64,
            tp,
            fp,
            fn_: positives - tp,
            fp_negatives: fp_neg,
        });
    }

    let auc_pr = area_under_pr(&points, positives);
    let auc_roc = area_under_roc(&points, negatives);
    let max_f1 = points.iter().map(PrPoint::f1).fold(0.0, f64::max);
    Ok(PrCurve {
        points,
        auc_pr,
        auc_roc,
        max_f1,
        positives,
        negatives,
    })
}

/// Trapezoids over recall. The zero-detection anchor `(0, 1)` is replaced by
/// a flat start at the precision of the first point with positive recall.
/// Recall steps are accumulated in TP counts, so a flat precision of 1
/// integrates to exactly 1.
fn area_under_pr(points: &[PrPoint], positives: usize) -> f64 {
    let mut area = 0.0;
    let mut prev: Option<&PrPoint> = None;
    for p in points.iter().filter(|p| p.tp > 0) {
        area += match prev {
            None => p.tp as f64 * p.precision,
            Some(q) => (p.tp - q.tp) as f64 * (p.precision + q.precision) / 2.0,
        };
        prev = Some(p);
    }
    area / positives as f64
}

/// Trapezoids over false-positive rate on negative queries, closed by a
/// horizontal segment to FPR = 1. With no negatives the curve is that
/// segment alone.
fn area_under_roc(points: &[PrPoint], negatives: usize) -> f64 {
    let fpr = |p: &PrPoint| {
        if negatives == 0 {
            0.0
        } else {
            p.fp_negatives as f64 / negatives as f64
        }
    };
    let mut area = 0.0;
    let (mut x0, mut y0) = (0.0, 0.0);
    for p in points {
        let (x1, y1) = (fpr(p), p.recall);
        area += (x1 - x0) * (y0 + y1) / 2.0;
        (x0, y0) = (x1, y1);
    }
    (area + (1.0 - x0) * y0).clamp(0.0, 1.0)
}

/// Which threshold the matching graph is drawn at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatingPoint {
    MaxPrecision,
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRow {
    pub query_id: u64,
    pub match_id: u64,
    pub d_s: f64,
    pub d_t: Option<f64>,
    pub is_true: bool,
}

/// Detections at the chosen operating point, in record order.
pub fn export_matching_graph(
    records: &[QueryRecord],
    gt: &LoopGroundTruth,
    curve: &PrCurve,
    at: OperatingPoint,
) -> Vec<MatchRow> {
    let tau = match at {
        OperatingPoint::MaxPrecision => curve.max_precision_point().tau_s,
        OperatingPoint::Threshold(t) => t,
    };
    records
        .iter()
        .filter_map(|r| {
            let c = r.candidate?;
            (c.d_s < tau).then(|| MatchRow {
                query_id: r.query_id,
                match_id: c.match_id,
                d_s: c.d_s,
                d_t: c.d_t,
                is_true: r.is_true_loop(gt),
            })
        })
        .collect()
}

pub fn write_matching_graph<W: io::Write>(out: W, rows: &[MatchRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query_id", "match_id", "d_s", "d_t", "is_true"])?;
    for r in rows {
        w.write_record([
            r.query_id.to_string(),
            r.match_id.to_string(),
            r.d_s.to_string(),
            r.d_t.map(|d| d.to_string()).unwrap_or_default(),
            u8::from(r.is_true).to_string(),
        ])?;
    }
    w.flush()
}
