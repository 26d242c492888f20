//! Flat `key = value` configuration with command-line overrides.

use std::fs;

use clap::Args;
use referee::descriptor::PartitionAxis;
use referee::evaluation::DEFAULT_LOOP_RADIUS;
use referee::feature::FeatureParams;
use referee::pipeline::DescribeParams;
use referee::radar_io::LoadOptions;
use referee::retrieval::RetrievalParams;

/// Every tunable, shared by all subcommands. Unset flags fall back to the
/// config file, then to the built-in default shown in the help text.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// INI-style file of `key = value` lines using the flag names below
    /// (with `-` or `_`)
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,

    /// Gaussian low-pass width in range bins [default: 17]
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Threshold on the standardized high-frequency residual [default: 3.0]
    #[arg(long = "z-thresh", global = true)]
    pub z_thresh: Option<f64>,
    /// Range bins ignored at the near end [default: 0]
    #[arg(long = "min-range-bin", global = true)]
    pub min_range_bin: Option<usize>,
    /// Extract features from ln(1 + intensity) [default: false]
    #[arg(long = "log-intensity", global = true)]
    pub log_intensity: Option<bool>,
    /// Descriptor length; must divide the partitioned axis [default: rows / 8]
    #[arg(long, global = true)]
    pub alpha: Option<usize>,
    /// Axis cut into sectors: azimuth or range [default: azimuth]
    #[arg(long = "partition-axis", global = true)]
    pub partition_axis: Option<String>,
    /// Descriptor-distance acceptance threshold [default: 0.1]
    #[arg(long = "tau-s", global = true)]
    pub tau_s: Option<f64>,
    /// Position-distance acceptance threshold, meters [default: 20]
    #[arg(long = "tau-t", global = true)]
    pub tau_t: Option<f64>,
    /// Temporal exclusion window, e.g. 30s, 500ms, 2min [default: 30s]
    #[arg(long, global = true)]
    pub exclusion: Option<String>,
    /// Radius for ground-truth loops, meters [default: 20]
    #[arg(long = "loop-radius", global = true)]
    pub loop_radius: Option<f64>,
    /// Leading metadata columns stripped from PNG scans [default: 11]
    #[arg(long = "meta-cols", global = true)]
    pub meta_cols: Option<usize>,
    /// Meters per range bin for PNG scans [default: 0.0438]
    #[arg(long = "range-resolution", global = true)]
    pub range_resolution: Option<f64>,
    /// Worker threads for per-scan work [default: available cores]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

/// Keys accepted in config files.
#[cfg(test)]
pub const CONFIG_KEYS: [&str; 13] = [
    "sigma",
    "z_thresh",
    "min_range_bin",
    "log_intensity",
    "alpha",
    "partition_axis",
    "tau_s",
    "tau_t",
    "exclusion",
    "loop_radius",
    "meta_cols",
    "range_resolution",
    "jobs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub describe: DescribeParams,
    pub retrieval: RetrievalParams,
    pub loop_radius: f64,
    pub load: LoadOptions,
    pub jobs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            describe: DescribeParams::default(),
            retrieval: RetrievalParams::default(),
            loop_radius: DEFAULT_LOOP_RADIUS,
            load: LoadOptions::default(),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Parses `30s`, `500ms`, `2min`, `100ns` or a bare number of seconds into
/// nanoseconds.
pub fn parse_duration_ns(text: &str) -> Result<i64, String> {
    let t = text.trim();
    let split = t
        .find(|c: char| c.is_ascii_alphabetic())
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("invalid duration {text:?}"))?;
    let scale = match unit.trim() {
        "" | "s" => 1e9,
        "ms" => 1e6,
        "us" => 1e3,
        "ns" => 1.0,
        "min" => 60e9,
        other => return Err(format!("unknown duration unit {other:?} in {text:?}")),
    };
    let ns = value * scale;
    if !ns.is_finite() || ns < 0.0 || ns > i64::MAX as f64 {
        return Err(format!("duration {text:?} out of range"));
    }
    Ok(ns.round() as i64)
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(format!("invalid boolean {v:?}")),
    }
}

/// Reads `key = value` pairs. Blank lines, `#`/`;` comments and `[section]`
/// headers are skipped; keys may use `-` or `_`.
pub fn parse_ini(text: &str) -> (Vec<(String, String)>, Vec<String>) {
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().replace('-', "_"), v.trim().to_string())),
            None => errors.push(format!("config line {}: expected `key = value`", i + 1)),
        }
    }
    (pairs, errors)
}

impl Config {
    /// Builds the effective configuration: defaults, then the config file,
    /// then command-line flags. All problems are reported together.
    pub fn resolve(args: &ConfigArgs) -> Result<Self, Vec<String>> {
        let mut cfg = Config::default();
        let mut errors = Vec::new();

        if let Some(path) = &args.config {
            match fs::read_to_string(path) {
                Ok(text) => {
                    let (pairs, errs) = parse_ini(&text);
                    errors.extend(errs);
                    for (k, v) in pairs {
                        if let Err(e) = cfg.set(&k, &v) {
                            errors.push(format!("{}: {e}", path.display()));
                        }
                    }
                }
                Err(e) => errors.push(format!("cannot read config {}: {e}", path.display())),
            }
        }

        let overrides: [(&str, Option<String>); 13] = [
            ("sigma", args.sigma.map(|v| v.to_string())),
            ("z_thresh", args.z_thresh.map(|v| v.to_string())),
            ("min_range_bin", args.min_range_bin.map(|v| v.to_string())),
            ("log_intensity", args.log_intensity.map(|v| v.to_string())),
            ("alpha", args.alpha.map(|v| v.to_string())),
            ("partition_axis", args.partition_axis.clone()),
            ("tau_s", args.tau_s.map(|v| v.to_string())),
            ("tau_t", args.tau_t.map(|v| v.to_string())),
            ("exclusion", args.exclusion.clone()),
            ("loop_radius", args.loop_radius.map(|v| v.to_string())),
            ("meta_cols", args.meta_cols.map(|v| v.to_string())),
            ("range_resolution", args.range_resolution.map(|v| v.to_string())),
            ("jobs", args.jobs.map(|v| v.to_string())),
        ];
        for (k, v) in overrides {
            if let Some(v) = v {
                if let Err(e) = cfg.set(k, &v) {
                    errors.push(format!("--{}: {e}", k.replace('_', "-")));
                }
            }
        }

        errors.extend(cfg.validate());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        let feature: &mut FeatureParams = &mut self.describe.feature;
        match key {
            "sigma" => feature.sigma_gauss = num(key, value)?,
            "z_thresh" => feature.z_threshold = num(key, value)?,
            "min_range_bin" => feature.min_range_bin = num(key, value)?,
            "log_intensity" => feature.log_intensity = parse_bool(value)?,
            "alpha" => self.describe.alpha = Some(num(key, value)?),
            "partition_axis" => self.describe.partition_axis = value.parse::<PartitionAxis>()?,
            "tau_s" => self.retrieval.tau_s = num(key, value)?,
            "tau_t" => self.retrieval.tau_t = num(key, value)?,
            "exclusion" => self.retrieval.exclusion_window = parse_duration_ns(value)?,
            "loop_radius" => self.loop_radius = num(key, value)?,
            "meta_cols" => self.load.meta_cols = num(key, value)?,
            "range_resolution" => self.load.range_resolution = num(key, value)?,
            "jobs" => self.jobs = num(key, value)?,
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let f = &self.describe.feature;
        if !(f.sigma_gauss.is_finite() && f.sigma_gauss > 0.0) {
            errors.push(format!("sigma must be positive, got {}", f.sigma_gauss));
        }
        if !f.z_threshold.is_finite() {
            errors.push("z_thresh must be finite".into());
        }
        if self.describe.alpha == Some(0) {
            errors.push("alpha must be at least 1".into());
        }
        if let Err(e) = self.retrieval.validate() {
            errors.push(e.to_string());
        }
        if !(self.loop_radius.is_finite() && self.loop_radius > 0.0) {
            errors.push(format!("loop_radius must be positive, got {}", self.loop_radius));
        }
        if !(self.load.range_resolution.is_finite() && self.load.range_resolution > 0.0) {
            errors.push("range_resolution must be positive".into());
        }
        if self.jobs == 0 {
            errors.push("jobs must be at least 1".into());
        }
        errors
    }
}
