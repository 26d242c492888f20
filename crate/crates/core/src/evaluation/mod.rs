//! Loop labelling, precision/recall evaluation and benchmarking.

pub mod bench;
pub mod ground_truth;
pub mod pr;
pub mod session;

pub use bench::{bench, BenchError, BenchPipeline, BenchReport, FileBench, REFERENCE_FIGURES};
pub use ground_truth::{
    label_for_mode, label_true_loops, label_true_loops_multi, LoopGroundTruth, ScanStamp,
    SessionMode, DEFAULT_LOOP_RADIUS,
};
pub use pr::{
    export_matching_graph, pr_curve, write_matching_graph, Candidate, EvalError, MatchRow,
    OperatingPoint, PrCurve, PrPoint, QueryRecord,
};
pub use session::{match_stream, to_records, QueryMatch};
