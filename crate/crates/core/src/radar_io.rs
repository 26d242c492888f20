//! Polar scan and trajectory loading.
//!
//! Two scan encodings are supported: 8-bit (or 16-bit) grayscale PNG with one
//! row per azimuth and a block of leading metadata columns, and the RFMX raw
//! matrix format:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "RFMX"
//!      4     2  version (u16, = 1)
//!      6     4  H, azimuth count (u32)
//!     10     4  W, range bins (u32)
//!     14     8  timestamp, ns (i64)
//!     22     8  range resolution, m/bin (f64)
//!     30  4·H·W intensities (f32, row-major)
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::scalar::Scalar;
use crate::RFMX_VERSION;

pub const RFMX_MAGIC: &[u8; 4] = b"RFMX";
pub const RFMX_HEADER_LEN: usize = 30;

/// Leading per-azimuth metadata columns in common polar PNG encodings
/// (8-byte timestamp, 2-byte azimuth, 1-byte valid flag).
pub const DEFAULT_META_COLS: usize = 11;
pub const DEFAULT_RANGE_RESOLUTION: f64 = 0.0438;

#[derive(Debug, Error)]
pub enum RadarIoError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot write {path}: {source}")]
    WriteFailed {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("image is not single-channel grayscale: {0}")]
    NonGrayscaleImage(String),
    #[error("cannot decode image: {0}")]
    ImageDecode(String),
    #[error("intensity at row {row}, bin {bin} is negative or not finite")]
    InvalidIntensity { row: usize, bin: usize },
    #[error("scan dimensions must be at least 1x1 (got {azimuths}x{range_bins})")]
    EmptyScan { azimuths: usize, range_bins: usize },
    #[error("trajectory line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate trajectory timestamp {0}")]
    DuplicateTimestamp(i64),
    #[error("trajectory is empty")]
    EmptyTrajectory,
}

pub type Result<T, E = RadarIoError> = std::result::Result<T, E>;

/// Polar radar image: `azimuths` rows by `range_bins` columns.
///
/// Row `j` looks along azimuth `2π·j/H`, measured from the sensor heading.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarScan<T> {
    pub scan_id: u64,
    /// Nanoseconds since epoch.
    pub timestamp: i64,
    pub range_resolution: f64,
    azimuths: usize,
    range_bins: usize,
    intensities: Vec<T>,
}

impl<T: Scalar> PolarScan<T> {
    /// Builds a scan from row-major intensities, checking dimensions and that
    /// every cell is finite and non-negative.
    pub fn new(
        scan_id: u64,
        timestamp: i64,
        range_resolution: f64,
        azimuths: usize,
        range_bins: usize,
        intensities: Vec<T>,
    ) -> Result<Self> {
        if azimuths == 0 || range_bins == 0 {
            return Err(RadarIoError::EmptyScan { azimuths, range_bins });
        }
        if intensities.len() != azimuths * range_bins {
            return Err(RadarIoError::MalformedHeader(format!(
                "{azimuths}x{range_bins} scan needs {} cells, got {}",
                azimuths * range_bins,
                intensities.len()
            )));
        }
        if let Some(i) = intensities.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(RadarIoError::InvalidIntensity {
                row: i / range_bins,
                bin: i % range_bins,
            });
        }
        Ok(Self {
            scan_id,
            timestamp,
            range_resolution,
            azimuths,
            range_bins,
            intensities,
        })
    }

    pub fn zeros(azimuths: usize, range_bins: usize) -> Self {
        Self {
            scan_id: 0,
            timestamp: 0,
            range_resolution: DEFAULT_RANGE_RESOLUTION,
            azimuths: azimuths.max(1),
            range_bins: range_bins.max(1),
            intensities: vec![T::zero(); azimuths.max(1) * range_bins.max(1)],
        }
    }

    /// H.
    pub fn azimuths(&self) -> usize {
        self.azimuths
    }

    /// W.
    pub fn range_bins(&self) -> usize {
        self.range_bins
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.intensities[j * self.range_bins..(j + 1) * self.range_bins]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.intensities.chunks_exact(self.range_bins)
    }

    pub fn intensities(&self) -> &[T] {
        &self.intensities
    }

    /// Applies `f` to every cell. The result must stay finite and non-negative.
    pub fn map_intensities(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.scan_id,
            self.timestamp,
            self.range_resolution,
            self.azimuths,
            self.range_bins,
            self.intensities.iter().map(|&v| f(v)).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanFormat {
    PolarPng,
    RawMatrix,
}

impl ScanFormat {
    /// Guesses the format from the file extension (`png` or `rfmx`).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(Self::PolarPng),
            "rfmx" => Some(Self::RawMatrix),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Leading PNG columns dropped before use.
    pub meta_cols: usize,
    /// Meters per range bin for PNG scans (RFMX carries its own).
    pub range_resolution: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            meta_cols: DEFAULT_META_COLS,
            range_resolution: DEFAULT_RANGE_RESOLUTION,
        }
    }
}

/// Loads a scan from disk. The scan id is left at 0 for the caller to assign.
///
/// PNG intensities are mapped onto [0, 255] (16-bit images are divided by
/// 257) and the timestamp is taken from a numeric file stem when present.
/// RFMX intensities are kept as stored.
pub fn load_polar_scan<T: Scalar>(
    path: &Path,
    format: ScanFormat,
    opts: &LoadOptions,
) -> Result<PolarScan<T>> {
    let bytes = fs::read(path).map_err(|source| RadarIoError::UnreadableFile {
        path: path.to_owned(),
        source,
    })?;
    match format {
        ScanFormat::RawMatrix => read_raw_matrix(&bytes),
        ScanFormat::PolarPng => {
            let timestamp = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<i64>().ok())
                .unwrap_or(0);
            let mut scan = decode_polar_png(&bytes, opts)?;
            scan.timestamp = timestamp;
            Ok(scan)
        }
    }
}

fn decode_polar_png<T: Scalar>(bytes: &[u8], opts: &LoadOptions) -> Result<PolarScan<T>> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| RadarIoError::ImageDecode(e.to_string()))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    if opts.meta_cols >= width {
        return Err(RadarIoError::MalformedHeader(format!(
            "image is {width} columns wide, cannot strip {} metadata columns",
            opts.meta_cols
        )));
    }
    let cells: Vec<T> = match img {
        image::DynamicImage::ImageLuma8(buf) => buf
            .rows()
            .flat_map(|row| row.skip(opts.meta_cols).map(|p| T::from_f64_lossy(p.0[0] as f64)))
            .collect(),
        image::DynamicImage::ImageLuma16(buf) => buf
            .rows()
            .flat_map(|row| {
                row.skip(opts.meta_cols)
                    .map(|p| T::from_f64_lossy(p.0[0] as f64 / 257.0))
            })
            .collect(),
        other => return Err(RadarIoError::NonGrayscaleImage(format!("{:?}", other.color()))),
    };
    PolarScan::new(0, 0, opts.range_resolution, height, width - opts.meta_cols, cells)
}

/// Decodes an RFMX byte buffer.
pub fn read_raw_matrix<T: Scalar>(bytes: &[u8]) -> Result<PolarScan<T>> {
    if bytes.len() < RFMX_HEADER_LEN {
        return Err(RadarIoError::MalformedHeader(format!(
            "{} bytes is shorter than the {RFMX_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != RFMX_MAGIC {
        return Err(RadarIoError::MalformedHeader("bad magic, expected RFMX".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != RFMX_VERSION {
        return Err(RadarIoError::MalformedHeader(format!("unsupported version {version}")));
    }
    let le_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let azimuths = le_u32(6);
    let range_bins = le_u32(10);
    let timestamp = i64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let range_resolution = f64::from_le_bytes(bytes[22..30].try_into().unwrap());

    let payload = &bytes[RFMX_HEADER_LEN..];
    let expected = azimuths
        .checked_mul(range_bins)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| RadarIoError::MalformedHeader("dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(RadarIoError::MalformedHeader(format!(
            "header declares {azimuths}x{range_bins} cells ({expected} bytes), payload has {} bytes",
            payload.len()
        )));
    }
    let cells = payload
        .chunks_exact(4)
        .map(|c| T::from_f64_lossy(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    PolarScan::new(0, timestamp, range_resolution, azimuths, range_bins, cells)
}

/// Encodes a scan as RFMX. Intensities are narrowed to f32.
pub fn write_raw_matrix<T: Scalar>(scan: &PolarScan<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(RFMX_HEADER_LEN + 4 * scan.intensities.len());
    out.extend_from_slice(RFMX_MAGIC);
    out.extend_from_slice(&RFMX_VERSION.to_le_bytes());
    out.extend_from_slice(&(scan.azimuths as u32).to_le_bytes());
    out.extend_from_slice(&(scan.range_bins as u32).to_le_bytes());
    out.extend_from_slice(&scan.timestamp.to_le_bytes());
    out.extend_from_slice(&scan.range_resolution.to_le_bytes());
    for v in &scan.intensities {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn save_raw_matrix<T: Scalar>(scan: &PolarScan<T>, path: &Path) -> Result<()> {
    fs::write(path, write_raw_matrix(scan)).map_err(|source| RadarIoError::WriteFailed {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// Nanoseconds since epoch.
    pub timestamp: i64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(timestamp: i64, x: f64, y: f64, yaw: f64) -> Self {
        Self { timestamp, x, y, yaw }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Non-empty list of poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    /// Sorts by timestamp; rejects empty input, duplicate timestamps and
    /// non-finite positions.
    pub fn new(mut poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(RadarIoError::EmptyTrajectory);
        }
        poses.sort_by_key(|p| p.timestamp);
        if let Some(w) = poses.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
            return Err(RadarIoError::DuplicateTimestamp(w[0].timestamp));
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Pose at time `t`: linear in position, shortest arc in yaw, clamped to
    /// the first/last pose outside the covered interval.
    pub fn pose_at(&self, t: i64) -> Pose {
        let poses = &self.poses;
        let first = poses[0];
        let last = poses[poses.len() - 1];
        if t <= first.timestamp {
            return Pose { timestamp: t, ..first };
        }
        if t >= last.timestamp {
            return Pose { timestamp: t, ..last };
        }
        // first.timestamp < t < last.timestamp, so 1 <= idx < len
        let idx = poses.partition_point(|p| p.timestamp <= t);
        let (a, b) = (poses[idx - 1], poses[idx]);
        if a.timestamp == t {
            return a;
        }
        let f = (t - a.timestamp) as f64 / (b.timestamp - a.timestamp) as f64;
        let dyaw = wrap_angle(b.yaw - a.yaw);
        Pose {
            timestamp: t,
            x: a.x + f * (b.x - a.x),
            y: a.y + f * (b.y - a.y),
            yaw: wrap_angle(a.yaw + f * dyaw),
        }
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Reads a `timestamp,x,y,yaw` CSV (timestamps in integer nanoseconds).
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|source| RadarIoError::UnreadableFile {
        path: path.to_owned(),
        source,
    })?;
    parse_trajectory(&text)
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| RadarIoError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let names: Vec<&str> = headers.iter().collect();
    if names != ["timestamp", "x", "y", "yaw"] {
        return Err(RadarIoError::Parse {
            line: 1,
            message: format!("expected header timestamp,x,y,yaw, got {}", names.join(",")),
        });
    }

    let mut poses = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| RadarIoError::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |k: usize| record.get(k).unwrap_or("");
        let bad = |what: &str, v: &str| RadarIoError::Parse {
            line,
            message: format!("invalid {what} {v:?}"),
        };
        let timestamp: i64 = field(0).parse().map_err(|_| bad("timestamp", field(0)))?;
        let real = |k: usize, what: &str| -> Result<f64> {
            field(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(what, field(k)))
        };
        let x = real(1, "x")?;
        let y = real(2, "y")?;
        let yaw = real(3, "yaw")?;
        poses.push(Pose { timestamp, x, y, yaw });
    }
    Trajectory::new(poses)
}

pub fn write_trajectory(trajectory: &Trajectory, path: &Path) -> Result<()> {
    let mut out = String::from("timestamp,x,y,yaw\n");
    for p in trajectory.poses() {
        out.push_str(&format!("{},{},{},{}\n", p.timestamp, p.x, p.y, p.yaw));
    }
    fs::write(path, out).map_err(|source| RadarIoError::WriteFailed {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rfmx(h: u32, w: u32, cells: usize) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"RFMX");
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&h.to_le_bytes());
        b.extend_from_slice(&w.to_le_bytes());
        b.extend_from_slice(&42i64.to_le_bytes());
        b.extend_from_slice(&0.5f64.to_le_bytes());
        b.extend(std::iter::repeat_n(0u8, 4 * cells));
        b
    }

    #[test]
    fn zero_matrix_loads() {
        let scan: PolarScan<f64> = read_raw_matrix(&rfmx(4, 8, 32)).unwrap();
        assert_eq!((scan.azimuths(), scan.range_bins()), (4, 8));
        assert_eq!(scan.timestamp, 42);
        assert!(scan.intensities().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_payload_is_malformed() {
        // 99 cells per row instead of 100
        let err = read_raw_matrix::<f64>(&rfmx(3, 100, 3 * 99)).unwrap_err();
        assert!(matches!(err, RadarIoError::MalformedHeader(_)), "{err}");
    }

    #[test]
    fn bad_magic_is_malformed() {
        let mut b = rfmx(1, 1, 1);
        b[0] = b'X';
        assert!(matches!(read_raw_matrix::<f32>(&b), Err(RadarIoError::MalformedHeader(_))));
    }

    #[test]
    fn negative_intensity_rejected() {
        let mut b = rfmx(1, 2, 2);
        b[34..38].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(
            read_raw_matrix::<f64>(&b),
            Err(RadarIoError::InvalidIntensity { row: 0, bin: 1 })
        ));
    }

    #[test]
    fn nan_intensity_rejected() {
        let mut b = rfmx(1, 1, 1);
        b[30..34].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(read_raw_matrix::<f64>(&b).is_err());
    }

    #[test]
    fn raw_matrix_round_trip() {
        let bytes = {
            let mut b = rfmx(2, 3, 0);
            for v in [0.0f32, 1.5, 255.0, 3.25, 1e-20, 7.0] {
                b.extend_from_slice(&v.to_le_bytes());
            }
            b
        };
        let scan: PolarScan<f32> = read_raw_matrix(&bytes).unwrap();
        assert_eq!(write_raw_matrix(&scan), bytes);
    }

    #[test]
    fn colour_png_rejected() {
        let img = image::RgbImage::new(20, 4);
        let mut buf = Vec::new();
        img.write_to(&mut io::Cursor::new(&mut buf), image::ImageFormat::Png)
            .unwrap();
        let err = decode_polar_png::<f64>(&buf, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, RadarIoError::NonGrayscaleImage(_)));
    }

    #[test]
    fn png_narrower_than_metadata_rejected() {
        let img = image::GrayImage::new(11, 4);
        let mut buf = Vec::new();
        img.write_to(&mut io::Cursor::new(&mut buf), image::ImageFormat::Png)
            .unwrap();
        assert!(matches!(
            decode_polar_png::<f64>(&buf, &LoadOptions::default()),
            Err(RadarIoError::MalformedHeader(_))
        ));
    }

    #[test]
    fn png_strips_metadata_columns() {
        let mut img = image::GrayImage::new(14, 2);
        for (x, _, p) in img.enumerate_pixels_mut() {
            p.0[0] = x as u8 * 10;
        }
        let mut buf = Vec::new();
        img.write_to(&mut io::Cursor::new(&mut buf), image::ImageFormat::Png)
            .unwrap();
        let scan: PolarScan<f64> = decode_polar_png(&buf, &LoadOptions::default()).unwrap();
        assert_eq!(scan.range_bins(), 3);
        assert_eq!(scan.row(1), &[110.0, 120.0, 130.0]);
    }

    #[test]
    fn single_row_trajectory() {
        let t = parse_trajectory("timestamp,x,y,yaw\n0,0,0,0\n").unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn shuffled_trajectory_is_sorted() {
        let mut rows: Vec<i64> = (0..100).map(|i| i * 1_000).collect();
        // deterministic shuffle
        for i in 0..rows.len() {
            let j = (i * 37 + 11) % rows.len();
            rows.swap(i, j);
        }
        let mut text = String::from("timestamp,x,y,yaw\n");
        for t in &rows {
            text.push_str(&format!("{t},{},0,0\n", *t as f64));
        }
        let traj = parse_trajectory(&text).unwrap();
        assert_eq!(traj.len(), 100);
        assert!(traj.poses().windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let err = parse_trajectory("timestamp,x,y,yaw\n5,0,0,0\n5,1,1,0\n").unwrap_err();
        assert!(matches!(err, RadarIoError::DuplicateTimestamp(5)));
    }

    #[test]
    fn parse_error_reports_line() {
        let err = parse_trajectory("timestamp,x,y,yaw\n0,0,0,0\n1,abc,0,0\n").unwrap_err();
        assert!(matches!(err, RadarIoError::Parse { line: 3, .. }), "{err}");
        let err = parse_trajectory("t,x,y,yaw\n0,0,0,0\n").unwrap_err();
        assert!(matches!(err, RadarIoError::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_trajectory_rejected() {
        assert!(matches!(
            parse_trajectory("timestamp,x,y,yaw\n"),
            Err(RadarIoError::EmptyTrajectory)
        ));
    }

    #[test]
    fn pose_at_exact_midpoint_and_clamp() {
        let traj = Trajectory::new(vec![
            Pose::new(0, 0.0, 0.0, 0.0),
            Pose::new(10, 2.0, 4.0, 0.5),
        ])
        .unwrap();
        assert_eq!(traj.pose_at(10), Pose::new(10, 2.0, 4.0, 0.5));
        let mid = traj.pose_at(5);
        assert_eq!((mid.x, mid.y, mid.yaw), (1.0, 2.0, 0.25));
        assert_eq!(traj.pose_at(-100).position(), (0.0, 0.0));
        assert_eq!(traj.pose_at(1_000).position(), (2.0, 4.0));
    }

    #[test]
    fn yaw_interpolates_along_shortest_arc() {
        use std::f64::consts::PI;
        let traj = Trajectory::new(vec![
            Pose::new(0, 0.0, 0.0, PI - 0.1),
            Pose::new(2, 0.0, 0.0, -PI + 0.1),
        ])
        .unwrap();
        let mid = traj.pose_at(1);
        assert!((mid.yaw.abs() - PI).abs() < 1e-12, "{}", mid.yaw);
    }
}
