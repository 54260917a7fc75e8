//! Stage parameters and their flat `key = value` file format.
//!
//! Blank lines and `#` comments are ignored. Every key has a default; an unknown
//! key or a repeated key is an error.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    /// Fixed TC4 cloud threshold.
    pub tc4_threshold: f64,
    /// Re-estimate the TC4 threshold per scene with Otsu's method.
    pub per_scene_otsu: bool,
    pub slope_threshold_deg: f64,
    /// Max visible reflectance at or above which a water pixel is ice/snow.
    pub maxvis_threshold: f64,
    /// Scenes with a larger cloud share of the region of interest are skipped.
    pub cloud_skip_fraction: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tc4_threshold: -0.046,
            per_scene_otsu: false,
            slope_threshold_deg: 4.0,
            maxvis_threshold: 0.15,
            cloud_skip_fraction: 0.8,
        }
    }
}

impl ClassifyConfig {
    pub const KEYS: [&'static str; 5] = [
        "tc4_threshold",
        "per_scene_otsu",
        "slope_threshold_deg",
        "maxvis_threshold",
        "cloud_skip_fraction",
    ];

    pub fn validate(&self) -> Result<()> {
        if !self.tc4_threshold.is_finite() {
            return Err(Error::Config("tc4_threshold must be finite".into()));
        }
        if !(self.slope_threshold_deg >= 0.0) {
            return Err(Error::Config("slope_threshold_deg must be >= 0".into()));
        }
        if !(self.maxvis_threshold > 0.0) {
            return Err(Error::Config("maxvis_threshold must be > 0".into()));
        }
        if !(self.cloud_skip_fraction > 0.0 && self.cloud_skip_fraction <= 1.0) {
            return Err(Error::Config("cloud_skip_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "tc4_threshold" => self.tc4_threshold = parse(key, value)?,
            "per_scene_otsu" => self.per_scene_otsu = parse_bool(key, value)?,
            "slope_threshold_deg" => self.slope_threshold_deg = parse(key, value)?,
            "maxvis_threshold" => self.maxvis_threshold = parse(key, value)?,
            "cloud_skip_fraction" => self.cloud_skip_fraction = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

impl FromStr for ClassifyConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_pairs(text)? {
            if !cfg.apply(&key, &value)? {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnmixConfig {
    /// Odd edge length of the endmember search window.
    pub window: usize,
    /// Mixed pixels with water abundance at or above this become Water.
    pub abundance_threshold: f64,
}

impl Default for UnmixConfig {
    fn default() -> Self {
        Self {
            window: 5,
            abundance_threshold: 0.5,
        }
    }
}

impl UnmixConfig {
    pub const KEYS: [&'static str; 2] = ["window", "abundance_threshold"];

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.abundance_threshold > 0.0 && self.abundance_threshold < 1.0) {
            return Err(Error::Config("abundance_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "window" => self.window = parse(key, value)?,
            "abundance_threshold" => self.abundance_threshold = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

impl FromStr for UnmixConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_pairs(text)? {
            if !cfg.apply(&key, &value)? {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Union of the classification and unmixing keys, as read by the CLI.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub classify: ClassifyConfig,
    pub unmix: UnmixConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse().map_err(|e| match e {
            Error::Config(m) => Error::format(path, m),
            other => other,
        })
    }
}

impl FromStr for PipelineConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_pairs(text)? {
            if !cfg.classify.apply(&key, &value)? && !cfg.unmix.apply(&key, &value)? {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
        }
        cfg.classify.validate()?;
        cfg.unmix.validate()?;
        Ok(cfg)
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let key = key.trim().to_string();
        if seen.insert(key.clone(), n + 1).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for {key}"))),
    }
}
