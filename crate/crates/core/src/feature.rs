//! Per-azimuth feature extraction.
//!
//! Each azimuth row is split into a low-frequency part (Gaussian low-pass
//! along range) and the high-frequency residual. The residual is
//! standardized, and a cell is kept as a feature when its standardized
//! residual exceeds `z_threshold` and its raw intensity is above the row
//! mean. Standardization makes the result invariant to positive affine
//! rescaling of the intensities.

use thiserror::Error;

use crate::radar_io::PolarScan;
use crate::scalar::Scalar;

pub const DEFAULT_SIGMA: f64 = 17.0;
pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("invalid feature parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    /// Low-pass Gaussian width in range bins.
    pub sigma_gauss: f64,
    /// Cutoff on the standardized high-frequency residual.
    pub z_threshold: f64,
    /// Range bins below this index are never features.
    pub min_range_bin: usize,
    /// Run extraction on `ln(1 + intensity)` instead of raw intensity.
    pub log_intensity: bool,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            sigma_gauss: DEFAULT_SIGMA,
            z_threshold: DEFAULT_Z_THRESHOLD,
            min_range_bin: 0,
            log_intensity: false,
        }
    }
}

impl FeatureParams {
    /// Checks the parameters against a scan with `range_bins` columns.
    pub fn validate(&self, range_bins: usize) -> Result<(), FeatureError> {
        if !(self.sigma_gauss.is_finite() && self.sigma_gauss > 0.0) {
            return Err(FeatureError::InvalidParams(format!(
                "sigma must be positive and finite, got {}",
                self.sigma_gauss
            )));
        }
        if !self.z_threshold.is_finite() {
            return Err(FeatureError::InvalidParams("z threshold must be finite".into()));
        }
        if self.min_range_bin >= range_bins {
            return Err(FeatureError::InvalidParams(format!(
                "min_range_bin {} must be below the {} range bins",
                self.min_range_bin, range_bins
            )));
        }
        Ok(())
    }
}

/// Binary H×W feature image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureMask {
    pub source_scan_id: u64,
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl FeatureMask {
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self, FeatureError> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(FeatureError::DimensionMismatch(format!(
                "{rows}x{cols} mask with {} cells",
                cells.len()
            )));
        }
        Ok(Self {
            source_scan_id: 0,
            rows,
            cols,
            cells,
        })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            source_scan_id: 0,
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    /// Builds a mask from nested rows of 0/1 values (any non-zero is a feature).
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, FeatureError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(FeatureError::DimensionMismatch("ragged rows".into()));
        }
        let cells = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().map(|&v| v != 0))
            .collect();
        Self::new(rows.len(), cols, cells)
    }

    /// H.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// W.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[bool]> {
        self.cells.chunks_exact(self.cols)
    }

    pub fn count_features(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Cyclic row rotation: row `j` of the result is row `(j - shift) mod H`.
    pub fn rotate_rows(&self, shift: usize) -> Self {
        let mut cells = self.cells.clone();
        cells.rotate_right((shift % self.rows) * self.cols);
        Self { cells, ..self.clone() }
    }

    pub fn transpose(&self) -> Self {
        let mut cells = vec![false; self.cells.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                cells[c * self.rows + r] = self.get(r, c);
            }
        }
        Self {
            source_scan_id: self.source_scan_id,
            rows: self.cols,
            cols: self.rows,
            cells,
        }
    }

    /// Binary PGM (P5), features white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend(self.cells.iter().map(|&c| if c { 255u8 } else { 0 }));
        out
    }
}

/// Unnormalized Gaussian taps `exp(-k²/2σ²)` for `k = -r..=r`, `r = ⌈3σ⌉`.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Vec<T> {
    let radius = (sigma * T::from_f64_lossy(3.0)).ceil().to_usize().unwrap_or(0);
    let two_var = T::from_f64_lossy(2.0) * sigma * sigma;
    (0..=2 * radius)
        .map(|i| {
            let k = T::from_count(i) - T::from_count(radius);
            (-(k * k) / two_var).exp()
        })
        .collect()
}

/// Gaussian low-pass of a 1D signal.
///
/// The kernel is truncated at ±⌈3σ⌉ bins. Near the ends only the taps that
/// overlap the signal are used and they are renormalized to sum to one, so
/// no padding values enter the output.
pub fn gaussian_smooth_row<T: Scalar>(signal: &[T], sigma: T) -> Vec<T> {
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let n = signal.len();
    let total: T = kernel.iter().copied().sum();

    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let taps = &kernel[lo + radius - i..=hi + radius - i];
            let acc: T = signal[lo..=hi]
                .iter()
                .zip(taps)
                .map(|(&s, &w)| s * w)
                .sum();
            let norm = if hi - lo + 1 == kernel.len() {
                total
            } else {
                taps.iter().copied().sum()
            };
            acc / norm
        })
        .collect()
}

/// Feature cells of one row, written into `out` (same length as `signal`).
fn row_features<T: Scalar>(signal: &[T], params: &FeatureParams, out: &mut [bool]) {
    let n = T::from_count(signal.len());
    let low = gaussian_smooth_row(signal, T::from_f64_lossy(params.sigma_gauss));
    let high: Vec<T> = signal.iter().zip(&low).map(|(&s, &g)| s - g).collect();

    let mean_s = signal.iter().copied().sum::<T>() / n;
    let mean_h = high.iter().copied().sum::<T>() / n;
    let var_h = high.iter().map(|&h| (h - mean_h) * (h - mean_h)).sum::<T>() / n;
    let std_h = var_h.sqrt();

    // A constant row leaves only rounding noise in the residual; such rows are featureless.
    let scale = signal.iter().fold(T::zero(), |m, &s| m.max(s.abs()));
    let floor = T::epsilon() * T::from_f64_lossy(1024.0) * scale;
    if !(std_h > floor) {
        return;
    }

    let z_threshold = T::from_f64_lossy(params.z_threshold);
    for ((o, &s), &h) in out.iter_mut().zip(signal).zip(&high) {
        *o = (h - mean_h) / std_h > z_threshold && s > mean_s;
    }
}

/// Extracts the binary feature mask of a scan.
pub fn extract_features<T: Scalar>(
    scan: &PolarScan<T>,
    params: &FeatureParams,
) -> Result<FeatureMask, FeatureError> {
    let width = scan.range_bins();
    params.validate(width)?;
    let mut mask = FeatureMask::empty(scan.azimuths(), width);
    mask.source_scan_id = scan.scan_id;

    let mut buf: Vec<T> = Vec::with_capacity(width);
    for (j, row) in scan.rows().enumerate() {
        let signal = &row[params.min_range_bin..];
        let signal = if params.log_intensity {
            buf.clear();
            buf.extend(signal.iter().map(|v| v.ln_1p()));
            &buf[..]
        } else {
            signal
        };
        let start = j * width + params.min_range_bin;
        row_features(signal, params, &mut mask.cells[start..(j + 1) * width]);
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan_from_rows(rows: &[Vec<f64>]) -> PolarScan<f64> {
        let w = rows[0].len();
        PolarScan::new(7, 0, 1.0, rows.len(), w, rows.concat()).unwrap()
    }

    #[test]
    fn kernel_radius_is_ceil_three_sigma() {
        assert_eq!(gaussian_kernel(1.0f64).len(), 7);
        assert_eq!(gaussian_kernel(17.0f64).len(), 103);
        assert_eq!(gaussian_kernel(0.4f64).len(), 5);
    }

    #[test]
    fn constant_signal_is_preserved() {
        let s = vec![42.0f64; 50];
        for v in gaussian_smooth_row(&s, 4.0) {
            assert!((v - 42.0).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_response_interior() {
        // Weights for σ=1 at offsets 0..=3, computed to 30 digits with mpmath.
        const W: [f64; 4] = [
            1.0,
            0.606530659712633423603799534991,
            0.135335283236612691893999494972,
            0.0111089965382423233992958542838,
        ];
        let sum = W[0] + 2.0 * (W[1] + W[2] + W[3]);
        let mut s = vec![0.0f64; 11];
        s[5] = 1.0;
        let out = gaussian_smooth_row(&s, 1.0);
        assert!((out[5] - 1.0 / sum).abs() < 1e-15);
        assert!((out[6] - W[1] / sum).abs() < 1e-15);
        assert!((out[7] - W[2] / sum).abs() < 1e-15);
        // window of bin 8 is clipped at the end, so its taps are renormalized
        let clipped = sum - W[3];
        assert!((out[8] - W[3] / clipped).abs() < 1e-15);
        assert_eq!(out[9], 0.0);
    }

    #[test]
    fn boundary_taps_are_renormalized() {
        let mut s = vec![0.0f64; 11];
        s[0] = 1.0;
        let out = gaussian_smooth_row(&s, 1.0);
        let k = gaussian_kernel(1.0f64);
        let partial: f64 = k[3..].iter().sum();
        assert!((out[0] - 1.0 / partial).abs() < 1e-15);
    }

    #[test]
    fn shift_equivariance() {
        let s: Vec<f64> = (0..40).map(|i| ((i * 7) % 13) as f64).collect();
        let shifted: Vec<f64> = s.iter().map(|v| v + 9.5).collect();
        let a = gaussian_smooth_row(&s, 2.5);
        let b = gaussian_smooth_row(&shifted, 2.5);
        for (x, y) in a.iter().zip(&b) {
            assert!((x + 9.5 - y).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_scan_gives_empty_mask() {
        let scan = PolarScan::<f64>::zeros(6, 64);
        let mask = extract_features(&scan, &FeatureParams::default()).unwrap();
        assert_eq!(mask.count_features(), 0);
    }

    #[test]
    fn constant_rows_are_featureless() {
        let scan = scan_from_rows(&[vec![13.7; 200], vec![0.3; 200]]);
        let scaled = scan.map_intensities(|v| 3.3 * v + 41.0).unwrap();
        for s in [scan, scaled] {
            let mask = extract_features(&s, &FeatureParams::default()).unwrap();
            assert_eq!(mask.count_features(), 0);
        }
    }

    #[test]
    fn near_field_bins_are_ignored() {
        let mut row = vec![10.0; 120];
        for v in &mut row[2..6] {
            *v = 200.0;
        }
        for v in &mut row[60..64] {
            *v = 200.0;
        }
        let params = FeatureParams {
            sigma_gauss: 3.0,
            z_threshold: 2.0,
            min_range_bin: 20,
            log_intensity: false,
        };
        let mask = extract_features(&scan_from_rows(&[row]), &params).unwrap();
        assert!(mask.row(0)[..20].iter().all(|&c| !c));
        assert!(mask.row(0)[60..64].iter().any(|&c| c));
    }

    #[test]
    fn invalid_params_rejected() {
        let scan = PolarScan::<f64>::zeros(2, 10);
        let bad_sigma = FeatureParams {
            sigma_gauss: 0.0,
            ..Default::default()
        };
        assert!(extract_features(&scan, &bad_sigma).is_err());
        let bad_min = FeatureParams {
            min_range_bin: 10,
            ..Default::default()
        };
        assert!(extract_features(&scan, &bad_min).is_err());
    }

    #[test]
    fn log_intensity_mode_runs() {
        let mut row = vec![5.0; 100];
        row[50] = 250.0;
        let params = FeatureParams {
            sigma_gauss: 3.0,
            log_intensity: true,
            ..Default::default()
        };
        let mask = extract_features(&scan_from_rows(&[row]), &params).unwrap();
        assert!(mask.get(0, 50));
    }

    #[test]
    fn f32_and_f64_agree_on_clear_pulse() {
        let mut row = vec![10.0f64; 80];
        for v in &mut row[30..36] {
            *v = 200.0;
        }
        let p = FeatureParams {
            sigma_gauss: 3.0,
            z_threshold: 2.0,
            ..Default::default()
        };
        let m64 = extract_features(&scan_from_rows(&[row.clone()]), &p).unwrap();
        let s32 = PolarScan::<f32>::new(0, 0, 1.0, 1, 80, row.iter().map(|&v| v as f32).collect())
            .unwrap();
        let mut m32 = extract_features(&s32, &p).unwrap();
        m32.source_scan_id = m64.source_scan_id;
        assert_eq!(m32, m64);
    }

    #[test]
    fn rotate_and_transpose() {
        let m = FeatureMask::from_rows(&[[1u8, 0, 0], [0, 1, 0]]).unwrap();
        let r = m.rotate_rows(1);
        assert_eq!(r.row(0), &[false, true, false]);
        let t = m.transpose();
        assert_eq!((t.rows(), t.cols()), (3, 2));
        assert!(t.get(1, 1) && t.get(0, 0) && !t.get(0, 1));
    }

    #[test]
    fn pgm_export() {
        let m = FeatureMask::from_rows(&[[1u8, 0]]).unwrap();
        assert_eq!(m.to_pgm(), b"P5\n2 1\n255\n\xff\x00".to_vec());
    }
}
