//! Flat `key = value` pipeline configuration.
//!
//! ```text
//! # bevgrid pipeline config
//! g_scale = 0.05
//! g_size = 25
//! probe_scales = 0.01,0.02,0.03,0.04
//! jobs = 8
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Optional keys that
//! are absent stay unset. Floats are written in shortest round-trip form, so
//! `parse(serialize(cfg)) == cfg`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{Denominator, DEFAULT_ANALYSIS_CELL, DEFAULT_CURVE_BINS, DEFAULT_PROBE_SCALES};
use crate::completion::LabelStrategy;
use crate::metrics::DEFAULT_WEIGHT_OFFSET;
use crate::projection::ProjectionConfig;
use crate::{Error, Result};

pub const DEFAULT_CHUNK_SIZE: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub projection: ProjectionConfig,
    pub label_strategy: LabelStrategy,
    pub probe_scales: Vec<f64>,
    pub analysis_cell: f64,
    pub curve_bins: usize,
    pub denominator: Denominator,
    pub weight_offset: f64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub rng_seed: u64,
    pub jobs: Option<usize>,
    pub max_window_pixels: Option<u64>,
    pub chunk_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            projection: ProjectionConfig::default(),
            label_strategy: LabelStrategy::default(),
            probe_scales: DEFAULT_PROBE_SCALES.to_vec(),
            analysis_cell: DEFAULT_ANALYSIS_CELL,
            curve_bins: DEFAULT_CURVE_BINS,
            denominator: Denominator::default(),
            weight_offset: DEFAULT_WEIGHT_OFFSET,
            input: None,
            output: None,
            rng_seed: 0,
            jobs: None,
            max_window_pixels: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.projection.validate()?;
        if self.probe_scales.is_empty() || self.probe_scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("probe_scales must be a non-empty list of positive values".into()));
        }
        if !(self.analysis_cell.is_finite() && self.analysis_cell > 0.0) {
            return Err(Error::Config(format!("analysis_cell must be positive, got {}", self.analysis_cell)));
        }
        if self.curve_bins == 0 {
            return Err(Error::Config("curve_bins must be positive".into()));
        }
        if !(self.weight_offset.is_finite() && self.weight_offset > 1.0) {
            return Err(Error::Config(format!("weight_offset must exceed 1, got {}", self.weight_offset)));
        }
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let p = &self.projection;
        let mut s = String::from("# bevgrid pipeline config\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("g_scale", p.g_scale.to_string());
        kv("g_size", p.g_size.to_string());
        kv("g_step", p.g_step.to_string());
        kv("cell_side", p.cell_side.to_string());
        kv("completion_iterations", p.completion_iterations.to_string());
        kv("kernel", p.kernel.to_string());
        kv("label_strategy", self.label_strategy.to_string());
        kv(
            "probe_scales",
            self.probe_scales.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        kv("analysis_cell", self.analysis_cell.to_string());
        kv("curve_bins", self.curve_bins.to_string());
        kv("denominator", self.denominator.to_string());
        kv("weight_offset", self.weight_offset.to_string());
        if let Some(v) = &self.input {
            kv("input", v.display().to_string());
        }
        if let Some(v) = &self.output {
            kv("output", v.display().to_string());
        }
        kv("rng_seed", self.rng_seed.to_string());
        if let Some(v) = self.jobs {
            kv("jobs", v.to_string());
        }
        if let Some(v) = self.max_window_pixels {
            kv("max_window_pixels", v.to_string());
        }
        kv("chunk_size", self.chunk_size.to_string());
        s
    }

    /// Parses a config file body. Keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", n + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        let p = &mut self.projection;
        match key {
            "g_scale" => p.g_scale = num(key, value)?,
            "g_size" => p.g_size = num(key, value)?,
            "g_step" => p.g_step = num(key, value)?,
            "cell_side" => p.cell_side = num(key, value)?,
            "completion_iterations" => p.completion_iterations = num(key, value)?,
            "kernel" => p.kernel = num(key, value)?,
            "label_strategy" => self.label_strategy = value.parse().map_err(|e: Error| e.to_string())?,
            "probe_scales" => {
                self.probe_scales = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "analysis_cell" => self.analysis_cell = num(key, value)?,
            "curve_bins" => self.curve_bins = num(key, value)?,
            "denominator" => self.denominator = value.parse().map_err(|e: Error| e.to_string())?,
            "weight_offset" => self.weight_offset = num(key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "rng_seed" => self.rng_seed = num(key, value)?,
            "jobs" => self.jobs = Some(num(key, value)?),
            "max_window_pixels" => self.max_window_pixels = Some(num(key, value)?),
            "chunk_size" => self.chunk_size = num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.serialize()).map_err(|e| Error::io(path, e))
    }
}
