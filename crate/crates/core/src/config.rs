//! Pipeline configuration file.
//!
//! Every key is optional; an empty file yields the default analysis setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::doamap::{GridSpec, PeakParams};
use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_GATE_DEG;
use crate::geometry::{load_geometry, ArrayGeometry};
use crate::harmonics::ShOrder;
use crate::sspiv::{SmoothingParams, VoteWeighting};
use crate::stft::{StftParams, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub frame_ms: f64,
    pub overlap_pct: f64,
    pub window: Window,
    pub sh_order: usize,
    pub cov_time_ms: f64,
    pub cov_freq_hz: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub az_bin_deg: f64,
    pub incl_bin_deg: f64,
    pub kernel_sigma_deg: f64,
    pub beta: f64,
    pub max_peaks: usize,
    /// Array description; the bundled 32-sensor array when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PathBuf>,
    pub gain_cap_db: f64,
    pub speed_of_sound: f64,
    pub single_source_mode: bool,
    pub eigen_weighting: bool,
    pub association_gate_deg: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frame_ms: 4.0,
            overlap_pct: 75.0,
            window: Window::Hann,
            sh_order: 3,
            cov_time_ms: 16.0,
            cov_freq_hz: 350.0,
            f_min_hz: 800.0,
            f_max_hz: 3500.0,
            az_bin_deg: 2.0,
            incl_bin_deg: 2.0,
            kernel_sigma_deg: 4.0,
            beta: 2.0,
            max_peaks: 10,
            geometry: None,
            gain_cap_db: 20.0,
            speed_of_sound: 343.0,
            single_source_mode: false,
            eigen_weighting: false,
            association_gate_deg: DEFAULT_GATE_DEG,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "config",
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn order(&self) -> ShOrder {
        ShOrder::new(self.sh_order)
    }

    pub fn stft_params(&self) -> StftParams {
        StftParams {
            frame_ms: self.frame_ms,
            overlap_pct: self.overlap_pct,
            window: self.window,
        }
    }

    pub fn smoothing(&self) -> SmoothingParams {
        SmoothingParams {
            time_span_ms: self.cov_time_ms,
            freq_span_hz: self.cov_freq_hz,
            f_min_hz: self.f_min_hz,
            f_max_hz: self.f_max_hz,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            az_bin_deg: self.az_bin_deg,
            incl_bin_deg: self.incl_bin_deg,
        }
    }

    pub fn peak_params(&self) -> PeakParams {
        PeakParams {
            max_peaks: self.max_peaks,
            beta: self.beta,
            kernel_sigma_deg: self.kernel_sigma_deg,
            single_source_mode: self.single_source_mode,
        }
    }

    pub fn weighting(&self) -> VoteWeighting {
        if self.eigen_weighting {
            VoteWeighting::EigenRatio
        } else {
            VoteWeighting::Uniform
        }
    }

    /// Loads the configured geometry, or the bundled one.
    pub fn load_geometry(&self) -> Result<ArrayGeometry> {
        match &self.geometry {
            Some(path) => load_geometry(path, self.order()),
            None => ArrayGeometry::reference(self.order()),
        }
    }

    /// Checks every value that does not depend on the sample rate.
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms > 0.0) || !self.frame_ms.is_finite() {
            return Err(Error::param("frame_ms must be positive"));
        }
        if ![0.0, 50.0, 75.0].contains(&self.overlap_pct) {
            return Err(Error::param(format!(
                "overlap_pct must be 0, 50 or 75, got {}",
                self.overlap_pct
            )));
        }
        if self.sh_order == 0 {
            return Err(Error::param("sh_order must be at least 1"));
        }
        self.smoothing().validate()?;
        self.grid().validate()?;
        self.peak_params().validate()?;
        if !self.gain_cap_db.is_finite() || self.gain_cap_db < 0.0 {
            return Err(Error::param("gain_cap_db must be finite and non-negative"));
        }
        if !(self.speed_of_sound > 0.0) || !self.speed_of_sound.is_finite() {
            return Err(Error::param("speed_of_sound must be positive"));
        }
        if !(self.association_gate_deg > 0.0) {
            return Err(Error::param("association_gate_deg must be positive"));
        }
        Ok(())
    }
}
