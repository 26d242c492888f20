//! Synthetic radar sessions with complete ground truth.
//!
//! A world is a set of point reflectors. A scan is rendered by adding, for
//! every reflector inside the beam of an azimuth row, a Gaussian bump along
//! range centred at the reflector's range bin, on top of Gaussian noise.
//! Everything is a pure function of its seed; per-scan noise streams are
//! keyed by scan id so scans can be rendered in any order or in parallel.

use std::f64::consts::TAU;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::radar_io::{self, Pose, PolarScan, RadarIoError, Trajectory};
use crate::scalar::Scalar;

pub const SCAN_DIR: &str = "scans";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cannot write session: {0}")]
    DiskWriteFailure(#[from] RadarIoError),
    #[error("cannot create {path}: {source}")]
    CreateDir {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid sensor model: {0}")]
    InvalidSensor(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    /// In (0, 1].
    pub reflectivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn square(half: f64) -> Self {
        Self {
            min_x: -half,
            max_x: half,
            min_y: -half,
            max_y: half,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.min_x..=self.max_x).contains(&x) && (self.min_y..=self.max_y).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub landmarks: Vec<Landmark>,
    pub bounds: Bounds,
    pub seed: u64,
}

/// Uniformly scattered landmarks with reflectivity in [0.25, 1].
pub fn generate_world(seed: u64, n_landmarks: usize, bounds: Bounds) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let landmarks = (0..n_landmarks)
        .map(|_| Landmark {
            x: rng.random_range(bounds.min_x..=bounds.max_x),
            y: rng.random_range(bounds.min_y..=bounds.max_y),
            reflectivity: 1.0 - 0.75 * rng.random::<f64>(),
        })
        .collect();
    World {
        landmarks,
        bounds,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    /// Meters covered by the last range bin.
    pub max_range: f64,
    pub range_bins: usize,
    pub azimuths: usize,
    /// Full angular width of a beam, radians.
    pub beam_width: f64,
    pub noise_floor_mean: f64,
    pub noise_floor_std: f64,
    /// Gaussian spread of a return along range, in bins.
    pub return_sigma: f64,
    /// Bump height for a reflectivity-1 landmark.
    pub peak_intensity: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            max_range: 100.0,
            range_bins: 512,
            azimuths: 400,
            beam_width: 2.0 * TAU / 400.0,
            noise_floor_mean: 20.0,
            noise_floor_std: 4.0,
            return_sigma: 1.5,
            peak_intensity: 180.0,
        }
    }
}

impl SensorModel {
    pub fn range_resolution(&self) -> f64 {
        self.max_range / self.range_bins as f64
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSensor(m.into()));
        if !(self.max_range > 0.0) {
            return bad("max_range must be positive");
        }
        if self.azimuths == 0 || self.range_bins == 0 {
            return bad("azimuths and range_bins must be at least 1");
        }
        if !(self.beam_width >= 0.0) || !(self.return_sigma > 0.0) {
            return bad("beam_width must be non-negative and return_sigma positive");
        }
        if !(self.noise_floor_std >= 0.0) {
            return bad("noise_floor_std must be non-negative");
        }
        Ok(())
    }
}

/// Noise generator for one scan of a session.
fn scan_rng(session_seed: u64, scan_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(session_seed);
    rng.set_stream(scan_id);
    rng
}

/// Renders the scan seen from `pose`. Row `j` looks along `yaw + 2πj/H`
/// (counter-clockwise), and bin `k` is centred at range `k · resolution`.
pub fn render_scan<T: Scalar>(
    world: &World,
    pose: &Pose,
    sensor: &SensorModel,
    noise_seed: u64,
    scan_id: u64,
) -> PolarScan<T> {
    let (h, w) = (sensor.azimuths, sensor.range_bins);
    let res = sensor.range_resolution();
    let mut cells = vec![sensor.noise_floor_mean; h * w];

    if sensor.noise_floor_std > 0.0 {
        let mut rng = scan_rng(noise_seed, scan_id);
        let noise = Normal::new(0.0, sensor.noise_floor_std).expect("validated std");
        for c in &mut cells {
            *c += noise.sample(&mut rng);
        }
    }

    let step = TAU / h as f64;
    let half_beam = sensor.beam_width / 2.0;
    let reach = (4.0 * sensor.return_sigma).ceil() as isize;
    let two_var = 2.0 * sensor.return_sigma * sensor.return_sigma;
    for lm in &world.landmarks {
        let (dx, dy) = (lm.x - pose.x, lm.y - pose.y);
        let range = dx.hypot(dy);
        if range > sensor.max_range || range == 0.0 {
            continue;
        }
        let bearing = (dy.atan2(dx) - pose.yaw).rem_euclid(TAU);
        let centre = (range / res).round() as isize;
        let peak = sensor.peak_intensity * lm.reflectivity;

        // rows whose ray is within half a beam of the bearing
        let lo = ((bearing - half_beam) / step).ceil() as isize;
        let hi = ((bearing + half_beam) / step).floor() as isize;
        let (lo, hi) = if hi < lo {
            let nearest = (bearing / step).round() as isize;
            (nearest, nearest)
        } else {
            (lo, hi)
        };
        for r in lo..=hi {
            let row = r.rem_euclid(h as isize) as usize;
            for k in (centre - reach).max(0)..=(centre + reach).min(w as isize - 1) {
                let d = (k - centre) as f64;
                cells[row * w + k as usize] += peak * (-(d * d) / two_var).exp();
            }
        }
    }

    let cells = cells
        .into_iter()
        .map(|v| T::from_f64_lossy(v.clamp(0.0, 255.0)))
        .collect();
    PolarScan::new(scan_id, pose.timestamp, res, h, w, cells)
        .expect("rendered cells are finite and clipped")
}

/// Straight path of `n` poses from `start`, `step` meters apart along
/// `heading`, `dt` ns apart starting at `t0`.
pub fn line_path(n: usize, start: (f64, f64), heading: f64, step: f64, t0: i64, dt: i64) -> Vec<Pose> {
    (0..n)
        .map(|i| {
            let s = i as f64 * step;
            Pose::new(
                t0 + i as i64 * dt,
                start.0 + s * heading.cos(),
                start.1 + s * heading.sin(),
                heading,
            )
        })
        .collect()
}

/// `n` poses driving out along a line for the first `⌈n/2⌉` and retracing
/// the same poses in reverse order for the rest. Returning poses keep the
/// outbound heading so a revisit differs from its first visit only by noise.
pub fn out_and_back(n: usize, start: (f64, f64), heading: f64, step: f64, t0: i64, dt: i64) -> Vec<Pose> {
    let out = n.div_ceil(2);
    let outbound = line_path(out, start, heading, step, t0, dt);
    let back = outbound.iter().rev().take(n - out).enumerate().map(|(i, p)| Pose {
        timestamp: t0 + (out + i) as i64 * dt,
        ..*p
    });
    outbound.iter().copied().chain(back).collect()
}

/// Renders one scan per pose into `dir/scans/NNNNNN.rfmx` and writes
/// `dir/trajectory.csv`. Returns the scan paths in scan-id order.
pub fn generate_session(
    world: &World,
    trajectory: &Trajectory,
    sensor: &SensorModel,
    seed: u64,
    dir: &Path,
) -> Result<Vec<PathBuf>, SynthError> {
    sensor.validate()?;
    let scan_dir = dir.join(SCAN_DIR);
    fs::create_dir_all(&scan_dir).map_err(|source| SynthError::CreateDir {
        path: scan_dir.clone(),
        source,
    })?;
    let mut paths = Vec::with_capacity(trajectory.len());
    for (i, pose) in trajectory.poses().iter().enumerate() {
        let scan: PolarScan<f32> = render_scan(world, pose, sensor, seed, i as u64);
        let path = scan_dir.join(format!("{i:06}.rfmx"));
        radar_io::save_raw_matrix(&scan, &path)?;
        paths.push(path);
    }
    radar_io::write_trajectory(trajectory, &dir.join(TRAJECTORY_FILE))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn quiet() -> SensorModel {
        SensorModel {
            noise_floor_std: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn empty_world() {
        let w = generate_world(1, 0, Bounds::square(10.0));
        assert!(w.landmarks.is_empty());
        let scan: PolarScan<f64> = render_scan(&w, &Pose::new(0, 0.0, 0.0, 0.0), &quiet(), 3, 0);
        assert!(scan.intensities().iter().all(|&v| v == 20.0));
    }

    #[test]
    fn worlds_are_deterministic_and_bounded() {
        let b = Bounds::square(50.0);
        let a = generate_world(1, 100, b);
        assert_eq!(a, generate_world(1, 100, b));
        assert_ne!(a, generate_world(2, 100, b));
        assert!(a.landmarks.iter().all(|l| b.contains(l.x, l.y)));
        assert!(a.landmarks.iter().all(|l| l.reflectivity > 0.0 && l.reflectivity <= 1.0));
    }

    #[test]
    fn landmark_straight_ahead_lands_in_row_zero() {
        let world = World {
            landmarks: vec![Landmark {
                x: 0.0,
                y: 37.3,
                reflectivity: 1.0,
            }],
            bounds: Bounds::square(100.0),
            seed: 0,
        };
        let sensor = quiet();
        // heading north
        let scan: PolarScan<f64> =
            render_scan(&world, &Pose::new(0, 0.0, 0.0, FRAC_PI_2), &sensor, 0, 0);
        let (idx, _) = scan
            .intensities()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let (row, bin) = (idx / scan.range_bins(), idx % scan.range_bins());
        assert_eq!(row, 0);
        assert_eq!(bin, (37.3 / sensor.range_resolution()).round() as usize);
    }

    #[test]
    fn renders_are_deterministic_and_clipped() {
        let world = generate_world(5, 300, Bounds::square(120.0));
        let sensor = SensorModel {
            noise_floor_std: 30.0,
            ..Default::default()
        };
        let pose = Pose::new(0, 3.0, -2.0, 0.4);
        let a: PolarScan<f64> = render_scan(&world, &pose, &sensor, 9, 4);
        let b: PolarScan<f64> = render_scan(&world, &pose, &sensor, 9, 4);
        assert_eq!(a, b);
        assert!(a.intensities().iter().all(|&v| (0.0..=255.0).contains(&v)));
        let c: PolarScan<f64> = render_scan(&world, &pose, &sensor, 9, 5);
        assert_ne!(a, c);
    }

    #[test]
    fn out_and_back_revisits_every_pose() {
        let poses = out_and_back(10, (0.0, 0.0), 0.0, 2.0, 0, 1_000);
        assert_eq!(poses.len(), 10);
        for i in 0..5 {
            let (a, b) = (poses[i], poses[9 - i]);
            assert_eq!((a.x, a.y, a.yaw), (b.x, b.y, b.yaw));
        }
        assert!(poses.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn session_layout() {
        let dir = tempfile::tempdir().unwrap();
        let world = generate_world(1, 50, Bounds::square(60.0));
        let traj = Trajectory::new(line_path(3, (0.0, 0.0), 0.0, 1.0, 0, 1_000_000_000)).unwrap();
        let sensor = SensorModel {
            azimuths: 16,
            range_bins: 32,
            ..Default::default()
        };
        let paths = generate_session(&world, &traj, &sensor, 7, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths[2].ends_with("scans/000002.rfmx"));
        let back = radar_io::load_trajectory(&dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert_eq!(back, traj);
        let scan: PolarScan<f64> = radar_io::load_polar_scan(
            &paths[1],
            radar_io::ScanFormat::RawMatrix,
            &Default::default(),
        )
        .unwrap();
        assert_eq!((scan.azimuths(), scan.range_bins(), scan.timestamp), (16, 32, 1_000_000_000));
    }
}
