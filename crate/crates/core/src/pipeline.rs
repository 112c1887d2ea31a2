//! End-to-end estimation: STFT, SH encoding, mode-strength compensation,
//! subspace pseudointensity votes, histogram smoothing and peak picking.

use crate::config::PipelineConfig;
use crate::doamap::{build_histogram, pick_peaks, DoaEstimate, SmoothingKernel, SphericalHistogram};
use crate::error::{Error, Result};
use crate::evaluation::{ElevationConvention, EstimateRecord};
use crate::geometry::ArrayGeometry;
use crate::shdomain::{compensate, ModeStrengthProfile, ShEncoder};
use crate::signal::MultichannelSignal;
use crate::sspiv::{compute_sspiv_field, PivField, RegionLayout};
use crate::stft::stft_bins;

/// Everything a run produces, including intermediates for inspection.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub estimates: Vec<DoaEstimate>,
    pub field: PivField,
    pub histogram: SphericalHistogram,
    pub smoothed: SphericalHistogram,
}

impl PipelineOutput {
    pub fn records(&self, convention: ElevationConvention) -> Vec<EstimateRecord> {
        estimate_records(&self.estimates, convention)
    }
}

pub fn estimate_records(estimates: &[DoaEstimate], convention: ElevationConvention) -> Vec<EstimateRecord> {
    estimates
        .iter()
        .map(|e| EstimateRecord {
            rank: e.rank,
            az_deg: e.direction.azimuth(),
            el_deg: convention.to_column(&e.direction),
            peak_height: e.peak_height,
        })
        .collect()
}

/// A configured estimator. Building one precomputes the encoder and the
/// smoothing kernel so repeated runs only pay for the signal-dependent work.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    geometry: ArrayGeometry,
    encoder: ShEncoder,
    kernel: SmoothingKernel,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, geometry: ArrayGeometry) -> Result<Self> {
        config.validate()?;
        let encoder = ShEncoder::new(&geometry, config.order())?;
        let kernel = SmoothingKernel::new(config.grid(), config.kernel_sigma_deg)?;
        Ok(Self {
            config,
            geometry,
            encoder,
            kernel,
        })
    }

    /// Pipeline on the configured (or bundled) geometry.
    pub fn from_config(config: PipelineConfig) -> Result<Self> {
        let geometry = config.load_geometry()?;
        Self::new(config, geometry)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    /// Vote field only, without histogram or peaks.
    pub fn field(&self, signal: &MultichannelSignal) -> Result<PivField> {
        if signal.num_channels() != self.geometry.len() {
            return Err(Error::ChannelMismatch {
                signal: signal.num_channels(),
                sensors: self.geometry.len(),
            });
        }
        let cfg = &self.config;
        let params = cfg.stft_params();
        let layout = params.layout(signal.sample_rate())?;
        let regions = RegionLayout::new(&cfg.smoothing(), &layout)?;
        let tf = stft_bins(signal, &params, regions.bin_span())?;
        let sh = self.encoder.encode(&tf)?;
        let profile = ModeStrengthProfile::new(
            cfg.order(),
            &sh.bin_freqs(),
            self.geometry.radius,
            self.geometry.baffle,
            cfg.speed_of_sound,
            cfg.gain_cap_db,
        )?;
        let compensated = compensate(&sh, &profile)?;
        compute_sspiv_field(&compensated, &regions, cfg.weighting())
    }

    pub fn run(&self, signal: &MultichannelSignal) -> Result<PipelineOutput> {
        let field = self.field(signal)?;
        let histogram = build_histogram(&field, self.config.grid());
        let smoothed = self.kernel.apply(&histogram)?;
        let estimates = pick_peaks(&smoothed, &self.config.peak_params());
        Ok(PipelineOutput {
            estimates,
            field,
            histogram,
            smoothed,
        })
    }
}
