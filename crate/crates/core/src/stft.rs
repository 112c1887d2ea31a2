//! Analysis-only short-time Fourier transform.
//!
//! Frames are taken without edge padding; a trailing partial frame is
//! dropped. Each frame is windowed and zero-padded to the next power of two
//! before the FFT.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2πn/N)`.
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftParams {
    pub frame_ms: f64,
    pub overlap_pct: f64,
    pub window: Window,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            frame_ms: 4.0,
            overlap_pct: 75.0,
            window: Window::Hann,
        }
    }
}

impl StftParams {
    /// Resolves frame, hop and FFT sizes at `sample_rate`.
    pub fn layout(&self, sample_rate: f64) -> Result<FrameLayout> {
        let overlap_ok = [0.0, 50.0, 75.0].contains(&self.overlap_pct);
        if !overlap_ok {
            return Err(Error::param(format!(
                "overlap must be 0, 50 or 75 percent, got {}",
                self.overlap_pct
            )));
        }
        let raw = self.frame_ms * sample_rate / 1000.0;
        if !(raw >= 8.0) {
            return Err(Error::param(format!(
                "frame of {} ms at {sample_rate} Hz is shorter than 8 samples",
                self.frame_ms
            )));
        }
        let frame_len = 2 * (raw / 2.0).round() as usize;
        let hop = ((frame_len as f64) * (1.0 - self.overlap_pct / 100.0)).round() as usize;
        Ok(FrameLayout {
            frame_len,
            hop,
            fft_len: frame_len.next_power_of_two(),
            sample_rate,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLayout {
    pub frame_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub sample_rate: f64,
}

impl FrameLayout {
    /// Number of one-sided bins, `fft_len / 2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate / self.fft_len as f64
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate
    }

    pub fn num_frames(&self, samples: usize) -> usize {
        if samples < self.frame_len {
            0
        } else {
            (samples - self.frame_len) / self.hop + 1
        }
    }

    /// Centre time of frame `t`, in seconds.
    pub fn frame_time(&self, t: usize) -> f64 {
        (t * self.hop) as f64 / self.sample_rate + 0.5 * self.frame_len as f64 / self.sample_rate
    }
}

/// Complex STFT coefficients for a contiguous range of one-sided bins.
///
/// Storage is frame-major then bin then channel, so the microphone vector of
/// one time-frequency bin is contiguous.
#[derive(Debug, Clone)]
pub struct TfTensor {
    layout: FrameLayout,
    channels: usize,
    frames: usize,
    bins: Range<usize>,
    coeffs: Vec<Complex64>,
}

impl TfTensor {
    pub fn layout(&self) -> &FrameLayout {
        &self.layout
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    /// Absolute one-sided bin indices held by this tensor.
    pub fn bins(&self) -> Range<usize> {
        self.bins.clone()
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.frames).map(|t| self.layout.frame_time(t)).collect()
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        self.bins.clone().map(|k| k as f64 * self.layout.bin_hz()).collect()
    }

    /// Channel vector at `frame` and local bin offset `bin`.
    pub fn vector(&self, frame: usize, bin: usize) -> &[Complex64] {
        assert!(bin < self.bins.len(), "bin offset {bin} outside {:?}", self.bins);
        let start = (frame * self.bins.len() + bin) * self.channels;
        &self.coeffs[start..start + self.channels]
    }

    pub fn get(&self, channel: usize, frame: usize, bin: usize) -> Complex64 {
        self.vector(frame, bin)[channel]
    }
}

/// Full one-sided STFT of every channel.
pub fn stft(signal: &MultichannelSignal, params: &StftParams) -> Result<TfTensor> {
    let layout = params.layout(signal.sample_rate())?;
    stft_bins(signal, params, 0..layout.num_bins())
}

/// STFT restricted to the one-sided bins in `bins`.
pub fn stft_bins(
    signal: &MultichannelSignal,
    params: &StftParams,
    bins: Range<usize>,
) -> Result<TfTensor> {
    let layout = params.layout(signal.sample_rate())?;
    if bins.end > layout.num_bins() || bins.start > bins.end {
        return Err(Error::param(format!(
            "bin range {bins:?} outside 0..{}",
            layout.num_bins()
        )));
    }
    let frames = layout.num_frames(signal.len());
    if frames == 0 {
        return Err(Error::SignalTooShort {
            samples: signal.len(),
            frame_len: layout.frame_len,
        });
    }
    let channels = signal.num_channels();
    let window = params.window.coefficients(layout.frame_len);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(layout.fft_len);
    let block = bins.len() * channels;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); frames * block];

    if block > 0 {
        coeffs.par_chunks_mut(block).enumerate().for_each_init(
            || {
                (
                    vec![Complex64::new(0.0, 0.0); layout.fft_len],
                    vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
                )
            },
            |(buf, scratch), (t, out)| {
                let start = t * layout.hop;
                for ch in 0..channels {
                    let x = &signal.channel(ch)[start..start + layout.frame_len];
                    for (b, (s, w)) in buf.iter_mut().zip(x.iter().zip(&window)) {
                        *b = Complex64::new(s * w, 0.0);
                    }
                    buf[layout.frame_len..].fill(Complex64::new(0.0, 0.0));
                    fft.process_with_scratch(buf, scratch);
                    for (i, k) in bins.clone().enumerate() {
                        out[i * channels + ch] = buf[k];
                    }
                }
            },
        );
    }

    Ok(TfTensor {
        layout,
        channels,
        frames,
        bins,
        coeffs,
    })
}
