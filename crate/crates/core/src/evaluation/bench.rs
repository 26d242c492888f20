//! Descriptor size and processing-time measurement.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::descriptor::{self, Descriptor};
use crate::pipeline::DescribeParams;
use crate::radar_io::{self, LoadOptions, ScanFormat};
use crate::retrieval::{PlaceEntry, PlaceIndex, QueryMeta, RetrievalParams};
use crate::scalar::Scalar;

pub const MIN_BENCH_SAMPLES: usize = 10;
pub const WARMUP_SAMPLES: usize = 3;

/// Published size/time figures carried for side-by-side reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceFigure {
    pub method: &'static str,
    pub descriptor_bytes: usize,
    pub processing_time_s: f64,
}

pub const REFERENCE_FIGURES: [ReferenceFigure; 4] = [
    ReferenceFigure {
        method: "ReFeree",
        descriptor_bytes: 448,
        processing_time_s: 0.106,
    },
    ReferenceFigure {
        method: "Raplace",
        descriptor_bytes: 3008,
        processing_time_s: 0.605,
    },
    ReferenceFigure {
        method: "Radar Scan Context",
        descriptor_bytes: 4928,
        processing_time_s: 0.159,
    },
    ReferenceFigure {
        method: "Sonar Context",
        descriptor_bytes: 33728,
        processing_time_s: 0.125,
    },
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("benchmark needs at least {min} samples, got {got}")]
    InsufficientSamples { got: usize, min: usize },
    #[error("pipeline failed: {0}")]
    Pipeline(String),
}

/// The two timed stages of place recognition on one sample.
pub trait BenchPipeline {
    type Sample;
    type Output;

    /// Turns a sample into a descriptor (timed as generation).
    fn generate(&mut self, sample: &Self::Sample) -> Result<Self::Output, BenchError>;

    /// Called once with every generated output before searching (untimed).
    fn prepare_search(&mut self, _outputs: &[Self::Output]) -> Result<(), BenchError> {
        Ok(())
    }

    /// Loop search for one output (timed as search).
    fn search(&mut self, output: &Self::Output) -> Result<(), BenchError>;

    /// Serialized payload size of one output.
    fn descriptor_bytes(&self, output: &Self::Output) -> usize;

    /// Size of the sample as stored on disk.
    fn input_bytes(&self, sample: &Self::Sample) -> u64;

    /// Mean seconds per sample of named sub-stages since the last reset.
    fn stage_means(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn reset_stages(&mut self) {}
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub samples: usize,
    pub descriptor_bytes: usize,
    pub gen_time_s: f64,
    pub search_time_s: f64,
    pub processing_time_s: f64,
    pub input_bytes: f64,
    pub compression_ratio: f64,
    pub stages: BTreeMap<String, f64>,
    pub reference: Vec<ReferenceFigure>,
}

fn mean_secs(durations: &[Duration]) -> f64 {
    durations.iter().map(Duration::as_secs_f64).sum::<f64>() / durations.len() as f64
}

/// Runs every sample through both stages sequentially. The first
/// [`WARMUP_SAMPLES`] of each stage are run but not timed.
pub fn bench<P: BenchPipeline>(
    pipeline: &mut P,
    samples: &[P::Sample],
) -> Result<BenchReport, BenchError> {
    if samples.len() < MIN_BENCH_SAMPLES {
        return Err(BenchError::InsufficientSamples {
            got: samples.len(),
            min: MIN_BENCH_SAMPLES,
        });
    }

    let mut outputs = Vec::with_capacity(samples.len());
    let mut gen_times = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if i == WARMUP_SAMPLES {
            pipeline.reset_stages();
        }
        let start = Instant::now();
        let out = pipeline.generate(s)?;
        if i >= WARMUP_SAMPLES {
            gen_times.push(start.elapsed());
        }
        outputs.push(out);
    }
    let stages = pipeline.stage_means();

    pipeline.prepare_search(&outputs)?;
    let mut search_times = Vec::with_capacity(outputs.len());
    for (i, out) in outputs.iter().enumerate() {
        let start = Instant::now();
        pipeline.search(out)?;
        if i >= WARMUP_SAMPLES {
            search_times.push(start.elapsed());
        }
    }

    let gen_time_s = mean_secs(&gen_times);
    let search_time_s = mean_secs(&search_times);
    let descriptor_bytes = pipeline.descriptor_bytes(&outputs[0]);
    let input_bytes =
        samples.iter().map(|s| pipeline.input_bytes(s) as f64).sum::<f64>() / samples.len() as f64;
    Ok(BenchReport {
        samples: samples.len(),
        descriptor_bytes,
        gen_time_s,
        search_time_s,
        processing_time_s: gen_time_s + search_time_s,
        input_bytes,
        compression_ratio: if descriptor_bytes > 0 {
            input_bytes / descriptor_bytes as f64
        } else {
            0.0
        },
        stages,
        reference: REFERENCE_FIGURES.to_vec(),
    })
}

/// Scan files on disk through load, feature extraction and free-space
/// counting, then KD-tree search against all generated descriptors.
pub struct FileBench<T> {
    pub describe: DescribeParams,
    pub retrieval: RetrievalParams,
    pub load: LoadOptions,
    index: Option<PlaceIndex<T>>,
    stage_totals: [Duration; 3],
    stage_count: usize,
    next_id: u64,
}

impl<T: Scalar> FileBench<T> {
    pub fn new(describe: DescribeParams, retrieval: RetrievalParams, load: LoadOptions) -> Self {
        Self {
            describe,
            retrieval,
            load,
            index: None,
            stage_totals: [Duration::ZERO; 3],
            stage_count: 0,
            next_id: 0,
        }
    }
}

impl<T: Scalar> BenchPipeline for FileBench<T> {
    type Sample = PathBuf;
    type Output = Descriptor<T>;

    fn generate(&mut self, path: &PathBuf) -> Result<Descriptor<T>, BenchError> {
        let err = |e: &dyn std::fmt::Display| BenchError::Pipeline(format!("{}: {e}", path.display()));
        let format = ScanFormat::from_path(path)
            .ok_or_else(|| err(&"unrecognised scan extension"))?;

        let t0 = Instant::now();
        let mut scan = radar_io::load_polar_scan::<T>(path, format, &self.load).map_err(|e| err(&e))?;
        scan.scan_id = self.next_id;
        self.next_id += 1;
        let t1 = Instant::now();
        let mask = crate::feature::extract_features(&scan, &self.describe.feature).map_err(|e| err(&e))?;
        let t2 = Instant::now();
        let alpha = self.describe.alpha_for(scan.azimuths(), scan.range_bins());
        let mut desc = descriptor::make_referee_along(&mask, alpha, self.describe.partition_axis)
            .map_err(|e| err(&e))?;
        desc.source_scan_id = scan.scan_id;
        desc.timestamp = scan.timestamp;
        let t3 = Instant::now();

        self.stage_totals[0] += t1 - t0;
        self.stage_totals[1] += t2 - t1;
        self.stage_totals[2] += t3 - t2;
        self.stage_count += 1;
        Ok(desc)
    }

    fn prepare_search(&mut self, outputs: &[Descriptor<T>]) -> Result<(), BenchError> {
        let entries = outputs
            .iter()
            .map(|d| PlaceEntry::new(d.clone(), None))
            .collect();
        self.index =
            Some(PlaceIndex::build(entries).map_err(|e| BenchError::Pipeline(e.to_string()))?);
        Ok(())
    }

    fn search(&mut self, desc: &Descriptor<T>) -> Result<(), BenchError> {
        let index = self
            .index
            .as_ref()
            .ok_or_else(|| BenchError::Pipeline("search before prepare_search".into()))?;
        let meta = QueryMeta {
            scan_id: desc.source_scan_id,
            timestamp: desc.timestamp,
            position: None,
        };
        index
            .query(desc, &meta, &self.retrieval)
            .map_err(|e| BenchError::Pipeline(e.to_string()))?;
        Ok(())
    }

    fn descriptor_bytes(&self, desc: &Descriptor<T>) -> usize {
        descriptor::serialize(desc).len() - descriptor::RFRD_HEADER_LEN
    }

    fn input_bytes(&self, path: &PathBuf) -> u64 {
        fs::metadata(path).map(|m| m.len()).unwrap_or(0)
    }

    fn stage_means(&self) -> BTreeMap<String, f64> {
        let n = self.stage_count.max(1) as f64;
        ["load_s", "extract_s", "count_s"]
            .iter()
            .zip(self.stage_totals)
            .map(|(name, d)| (name.to_string(), d.as_secs_f64() / n))
            .collect()
    }

    fn reset_stages(&mut self) {
        self.stage_totals = [Duration::ZERO; 3];
        self.stage_count = 0;
    }
}

/// Sanity figure from the published sizes: input kilobytes per descriptor
/// byte. Reported, never asserted, since the input encoding differs.
pub fn published_compression_ratio() -> f64 {
    361.5 * 1024.0 / 448.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread::sleep;

    struct Sleepy;

    impl BenchPipeline for Sleepy {
        type Sample = u64;
        type Output = u64;

        fn generate(&mut self, s: &u64) -> Result<u64, BenchError> {
            sleep(Duration::from_millis(10));
            Ok(*s)
        }

        fn search(&mut self, _: &u64) -> Result<(), BenchError> {
            sleep(Duration::from_millis(10));
            Ok(())
        }

        fn descriptor_bytes(&self, _: &u64) -> usize {
            448
        }

        fn input_bytes(&self, _: &u64) -> u64 {
            448 * 10
        }
    }

    #[test]
    fn sleep_stub_timing() {
        let samples: Vec<u64> = (0..12).collect();
        let r = bench(&mut Sleepy, &samples).unwrap();
        assert!(r.processing_time_s >= 0.020, "{}", r.processing_time_s);
        assert!(r.processing_time_s < 0.040, "{}", r.processing_time_s);
        assert_eq!(r.processing_time_s, r.gen_time_s + r.search_time_s);
        assert_eq!(r.descriptor_bytes, 448);
        assert_eq!(r.compression_ratio, 10.0);
        assert_eq!(r.reference.len(), 4);
    }

    #[test]
    fn too_few_samples() {
        let samples: Vec<u64> = (0..3).collect();
        assert!(matches!(
            bench(&mut Sleepy, &samples),
            Err(BenchError::InsufficientSamples { got: 3, min: 10 })
        ));
    }

    #[test]
    fn published_ratio_is_about_826() {
        assert!((published_compression_ratio() - 826.3).abs() < 0.1);
    }
}
