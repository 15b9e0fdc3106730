//! Pipeline parameters. The defaults are 1024-sample frames with 50%
//! overlap at 44.1 kHz (about 23 ms) and kernel `l = 0.707`, `sigma = 1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, KernelParams, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Hz.
    pub sample_rate: u32,
    /// STFT frame length, a power of two.
    pub frame_size: usize,
    pub hop: usize,
    /// Largest lag (samples) kept from each correlation frame.
    pub tau_max: usize,
    /// A bin is active when its channel-averaged power exceeds
    /// `mask_threshold` times the noise floor.
    pub mask_threshold: f64,
    /// Frames whose active-bin fraction is below this are unreliable.
    pub min_mask_density: f64,
    /// Use every frame when none is reliable instead of failing.
    pub allow_unreliable_fallback: bool,
    /// Aggregate only the most recent frames; `None` uses the whole clip.
    pub buffer_frames: Option<usize>,
    pub kernel: KernelConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub sigma: f64,
    /// Samples.
    pub length_scale: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sample_rate: 44_100,
            frame_size: 1024,
            hop: 512,
            tau_max: 64,
            mask_threshold: 2.0,
            min_mask_density: 0.05,
            allow_unreliable_fallback: false,
            buffer_frames: None,
            kernel: KernelConfig::default(),
        }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            sigma: 1.0,
            length_scale: 0.707,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if !self.frame_size.is_power_of_two() || self.frame_size < 4 {
            return Err(Error::Config(format!(
                "frame_size {} must be a power of two >= 4",
                self.frame_size
            )));
        }
        if self.hop == 0 || self.hop > self.frame_size {
            return Err(Error::Config(format!(
                "hop {} must lie in 1..={}",
                self.hop, self.frame_size
            )));
        }
        if self.tau_max == 0 || self.tau_max >= self.frame_size / 2 {
            return Err(Error::Config(format!(
                "tau_max {} must lie in 1..{}",
                self.tau_max,
                self.frame_size / 2
            )));
        }
        if !(self.mask_threshold > 0.0) {
            return Err(Error::Config("mask_threshold must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_mask_density) {
            return Err(Error::Config("min_mask_density must lie in [0, 1]".into()));
        }
        if !(self.kernel.sigma > 0.0 && self.kernel.length_scale > 0.0) {
            return Err(Error::Config("kernel sigma and length_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn kernel_params<T: Real>(&self) -> KernelParams<T> {
        KernelParams {
            sigma: T::of(self.kernel.sigma),
            length_scale: T::of(self.kernel.length_scale),
        }
    }
}
