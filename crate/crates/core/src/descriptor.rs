//! Free-space descriptor.
//!
//! The mask is cut into `alpha` sectors of `H / alpha` consecutive azimuth
//! rows. In every row, the cells up to and including the farthest feature
//! are inspected and the free (non-feature) ones counted. A sector's value is
//! its total free count divided by `rows_per_sector · W`, so every element
//! lies in `[0, 1)`.
//!
//! Descriptors are stored in RFRD files:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "RFRD"
//!      4     2  version (u16, = 1)
//!      6     2  reserved (0)
//!      8     4  alpha (u32)
//!     12     8  scan id (u64)
//!     20     8  timestamp, ns (i64)
//!     28     4  zero padding
//!     32  8·α  values (f64)
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::feature::FeatureMask;
use crate::scalar::Scalar;
use crate::RFRD_VERSION;

pub const RFRD_MAGIC: &[u8; 4] = b"RFRD";
pub const RFRD_HEADER_LEN: usize = 32;
/// Rows per sector used to derive the default `alpha`.
pub const DEFAULT_ROWS_PER_SECTOR: usize = 8;

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("alpha {alpha} does not divide {rows} rows")]
    IndivisibleAlpha { alpha: usize, rows: usize },
    #[error("alpha must be at least 1")]
    ZeroAlpha,
    #[error("descriptor value {value} at index {index} is outside [0, 1)")]
    InvalidValue { index: usize, value: f64 },
    #[error("bad magic, expected RFRD")]
    BadMagic,
    #[error("unsupported RFRD version {0}")]
    VersionUnsupported(u16),
    #[error("truncated RFRD data: expected {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("RFRD data has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = DescriptorError> = std::result::Result<T, E>;

/// Global place descriptor: one free-space density per sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor<T> {
    pub source_scan_id: u64,
    /// Nanoseconds since epoch.
    pub timestamp: i64,
    values: Vec<T>,
}

impl<T: Scalar> Descriptor<T> {
    pub fn new(source_scan_id: u64, timestamp: i64, values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(DescriptorError::ZeroAlpha);
        }
        if let Some((index, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= T::zero() && **v < T::one()))
        {
            return Err(DescriptorError::InvalidValue {
                index,
                value: v.as_f64(),
            });
        }
        Ok(Self {
            source_scan_id,
            timestamp,
            values,
        })
    }

    pub fn alpha(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Size of the serialized value block in bytes.
    pub fn payload_bytes(&self) -> usize {
        8 * self.values.len()
    }

    /// Euclidean distance between two descriptors of equal length.
    pub fn distance(&self, other: &Self) -> T {
        squared_distance(&self.values, &other.values).sqrt()
    }

    /// Cyclic shift: element `i` of the result is element `(i - m) mod alpha`.
    pub fn cyclic_shift(&self, m: usize) -> Self {
        let mut values = self.values.clone();
        let n = values.len();
        values.rotate_right(m % n);
        Self { values, ..self.clone() }
    }
}

pub(crate) fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, d| acc + d)
}

/// Which mask axis is cut into sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionAxis {
    /// Sectors of consecutive azimuth rows; free space counted along range.
    #[default]
    Azimuth,
    /// Same counting on the transposed mask: sectors of consecutive range
    /// bins, free space counted along azimuth.
    Range,
}

impl std::str::FromStr for PartitionAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "azimuth" => Ok(Self::Azimuth),
            "range" => Ok(Self::Range),
            other => Err(format!("unknown partition axis {other:?} (azimuth|range)")),
        }
    }
}

impl std::fmt::Display for PartitionAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Azimuth => "azimuth",
            Self::Range => "range",
        })
    }
}

/// `H / 8` rows per sector, or 1 for masks shorter than 8 rows.
pub fn default_alpha(rows: usize) -> usize {
    (rows / DEFAULT_ROWS_PER_SECTOR).max(1)
}

/// Block of consecutive mask rows forming one sector.
#[derive(Debug, Clone, Copy)]
pub struct SectorView<'a> {
    mask: &'a FeatureMask,
    first_row: usize,
    height: usize,
    /// 1-based sector number.
    pub sector_index: usize,
}

impl<'a> SectorView<'a> {
    pub fn rows(&self) -> impl Iterator<Item = &'a [bool]> + '_ {
        (self.first_row..self.first_row + self.height).map(|j| self.mask.row(j))
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Splits a mask into `alpha` sectors in row order.
pub fn sectors(mask: &FeatureMask, alpha: usize) -> Result<Vec<SectorView<'_>>> {
    if alpha == 0 {
        return Err(DescriptorError::ZeroAlpha);
    }
    if !mask.rows().is_multiple_of(alpha) {
        return Err(DescriptorError::IndivisibleAlpha {
            alpha,
            rows: mask.rows(),
        });
    }
    let height = mask.rows() / alpha;
    Ok((0..alpha)
        .map(|i| SectorView {
            mask,
            first_row: i * height,
            height,
            sector_index: i + 1,
        })
        .collect())
}

/// 1-based index of the last feature in `row`, or 0 for a featureless row.
pub fn farthest_feature_index(row: &[bool]) -> usize {
    row.iter().rposition(|&c| c).map_or(0, |k| k + 1)
}

/// Farthest feature index of every row in a sector.
pub fn farthest_feature_indices(sector: &SectorView<'_>) -> Vec<usize> {
    sector.rows().map(farthest_feature_index).collect()
}

/// Free cells among the first `farthest` cells of a row.
///
/// Since no feature lies past `farthest`, this equals `farthest` minus the
/// number of features in the row.
pub fn free_space_count(row: &[bool], farthest: usize) -> usize {
    row[..farthest].iter().filter(|&&c| !c).count()
}

/// Free-space descriptor of a mask with sectors along azimuth.
pub fn make_referee<T: Scalar>(mask: &FeatureMask, alpha: usize) -> Result<Descriptor<T>> {
    let width = mask.cols();
    let values = sectors(mask, alpha)?
        .iter()
        .map(|sector| {
            let free: usize = sector
                .rows()
                .map(|row| free_space_count(row, farthest_feature_index(row)))
                .sum();
            T::from_count(free) / T::from_count(sector.height() * width)
        })
        .collect();
    Ok(Descriptor {
        source_scan_id: mask.source_scan_id,
        timestamp: 0,
        values,
    })
}

/// [`make_referee`] with a selectable partition axis.
pub fn make_referee_along<T: Scalar>(
    mask: &FeatureMask,
    alpha: usize,
    axis: PartitionAxis,
) -> Result<Descriptor<T>> {
    match axis {
        PartitionAxis::Azimuth => make_referee(mask, alpha),
        PartitionAxis::Range => make_referee(&mask.transpose(), alpha),
    }
}

/// Encodes a descriptor as RFRD. Values are widened to f64.
pub fn serialize<T: Scalar>(desc: &Descriptor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(RFRD_HEADER_LEN + desc.payload_bytes());
    out.extend_from_slice(RFRD_MAGIC);
    out.extend_from_slice(&RFRD_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(desc.alpha() as u32).to_le_bytes());
    out.extend_from_slice(&desc.source_scan_id.to_le_bytes());
    out.extend_from_slice(&desc.timestamp.to_le_bytes());
    out.resize(RFRD_HEADER_LEN, 0);
    for v in &desc.values {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn deserialize<T: Scalar>(bytes: &[u8]) -> Result<Descriptor<T>> {
    if bytes.len() < 4 || &bytes[..4] != RFRD_MAGIC {
        return Err(DescriptorError::BadMagic);
    }
    if bytes.len() < RFRD_HEADER_LEN {
        return Err(DescriptorError::TruncatedPayload {
            expected: RFRD_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != RFRD_VERSION {
        return Err(DescriptorError::VersionUnsupported(version));
    }
    let alpha = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let scan_id = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let timestamp = i64::from_le_bytes(bytes[20..28].try_into().unwrap());

    let expected = RFRD_HEADER_LEN + 8 * alpha;
    if bytes.len() < expected {
        return Err(DescriptorError::TruncatedPayload {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DescriptorError::TrailingBytes(bytes.len() - expected));
    }
    let values = bytes[RFRD_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Descriptor::new(scan_id, timestamp, values)
}

pub fn save_descriptor<T: Scalar>(desc: &Descriptor<T>, path: &Path) -> Result<()> {
    fs::write(path, serialize(desc)).map_err(|source| DescriptorError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_descriptor<T: Scalar>(path: &Path) -> Result<Descriptor<T>> {
    let bytes = fs::read(path).map_err(|source| DescriptorError::Io {
        path: path.to_owned(),
        source,
    })?;
    deserialize(&bytes)
}
