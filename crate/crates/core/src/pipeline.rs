//! Scan-to-descriptor pipeline: feature extraction followed by free-space
//! counting.

use thiserror::Error;

use crate::descriptor::{self, Descriptor, DescriptorError, PartitionAxis};
use crate::feature::{self, FeatureError, FeatureMask, FeatureParams};
use crate::radar_io::PolarScan;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DescribeParams {
    pub feature: FeatureParams,
    /// Sector count; `None` derives it from the mask as `rows / 8`.
    pub alpha: Option<usize>,
    pub partition_axis: PartitionAxis,
}

impl DescribeParams {
    /// Sector count for a scan of the given shape.
    pub fn alpha_for(&self, azimuths: usize, range_bins: usize) -> usize {
        self.alpha.unwrap_or_else(|| match self.partition_axis {
            PartitionAxis::Azimuth => descriptor::default_alpha(azimuths),
            PartitionAxis::Range => descriptor::default_alpha(range_bins),
        })
    }
}

/// Mask and descriptor of one scan. The descriptor carries the scan's id and
/// timestamp.
pub fn describe_scan_with_mask<T: Scalar>(
    scan: &PolarScan<T>,
    params: &DescribeParams,
) -> Result<(FeatureMask, Descriptor<T>), PipelineError> {
    let mask = feature::extract_features(scan, &params.feature)?;
    let alpha = params.alpha_for(scan.azimuths(), scan.range_bins());
    let mut desc = descriptor::make_referee_along(&mask, alpha, params.partition_axis)?;
    desc.source_scan_id = scan.scan_id;
    desc.timestamp = scan.timestamp;
    Ok((mask, desc))
}

pub fn describe_scan<T: Scalar>(
    scan: &PolarScan<T>,
    params: &DescribeParams,
) -> Result<Descriptor<T>, PipelineError> {
    describe_scan_with_mask(scan, params).map(|(_, d)| d)
}
