//! Anechoic plane-wave simulation of spherical-array recordings.
//!
//! Each source is a plane wave whose sensor spectra follow the truncated
//! spherical-harmonic expansion
//! `X_q(f) = S(f) Σ_{n≤N} b_n(kr) Σ_m conj(Y_n^m(Ω_src)) Y_n^m(Ω_q)`,
//! synthesized over the whole signal with one FFT. Reverberation is only
//! approximated, by an optional diffuse field of many random plane waves.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{write_truth_csv, ElevationConvention, TruthSource};
use crate::geometry::{ArrayGeometry, Direction};
use crate::harmonics::{sh_values, ShOrder};
use crate::shdomain::mode_strength;
use crate::signal::MultichannelSignal;

/// Highest synthesis order supported.
pub const MAX_ORDER: usize = 20;

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

const BURST_MIN_S: f64 = 0.05;
const BURST_MAX_S: f64 = 0.4;
const BURST_RAMP_S: f64 = 0.005;
const SPEECH_BAND_HZ: (f64, f64) = (300.0, 3400.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSignal {
    /// Equal-amplitude cosines with seeded random phases.
    ToneSet { freqs_hz: Vec<f64> },
    BandlimitedNoise {
        #[serde(default = "default_low")]
        low_hz: f64,
        #[serde(default = "default_high")]
        high_hz: f64,
    },
    SpeechLikeBursts,
}

fn default_low() -> f64 {
    SPEECH_BAND_HZ.0
}

fn default_high() -> f64 {
    SPEECH_BAND_HZ.1
}

fn default_level() -> f64 {
    -20.0
}

fn default_sample_rate() -> f64 {
    48000.0
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

fn default_waves() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub az_deg: f64,
    /// Exactly one of `incl_deg` and `el_deg` must be given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incl_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub el_deg: Option<f64>,
    pub signal: SourceSignal,
    /// RMS level of the active part, dB re 1.
    #[serde(default = "default_level")]
    pub level_db: f64,
    #[serde(default)]
    pub onset_s: f64,
    /// Defaults to the end of the scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_s: Option<f64>,
}

impl SourceSpec {
    pub fn new(direction: Direction, signal: SourceSignal) -> Self {
        Self {
            az_deg: direction.azimuth(),
            incl_deg: Some(direction.inclination()),
            el_deg: None,
            signal,
            level_db: default_level(),
            onset_s: 0.0,
            offset_s: None,
        }
    }

    pub fn direction(&self) -> Result<Direction> {
        match (self.incl_deg, self.el_deg) {
            (Some(i), None) => Direction::new(self.az_deg, i),
            (None, Some(e)) => Direction::from_elevation(self.az_deg, e),
            _ => Err(Error::param("source needs exactly one of incl_deg and el_deg")),
        }
    }
}

/// Spatially diffuse noise: independent white noise plane waves from
/// uniformly random directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseSpec {
    /// Source mixture power over diffuse power.
    pub snr_db: f64,
    #[serde(default = "default_waves")]
    pub waves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub duration_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sensor-noise SNR relative to the source mixture; absent means none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffuse: Option<DiffuseSpec>,
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
}

impl SceneSpec {
    pub fn new(duration_s: f64, sample_rate: f64, seed: u64) -> Self {
        Self {
            duration_s,
            sample_rate,
            seed,
            snr_db: None,
            diffuse: None,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            sources: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let scene: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "scene",
            message: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::param(msg));
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration_s));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate));
        }
        if self.num_samples() < 2 {
            return bad("scene shorter than two samples".into());
        }
        if !(self.speed_of_sound > 0.0) {
            return bad("speed of sound must be positive".into());
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return bad("snr_db must be finite; omit it for a noiseless scene".into());
        }
        if let Some(d) = &self.diffuse {
            if !d.snr_db.is_finite() || d.waves == 0 {
                return bad("diffuse noise needs a finite snr_db and at least one wave".into());
            }
        }
        let nyquist = self.sample_rate / 2.0;
        for (i, s) in self.sources.iter().enumerate() {
            s.direction()?;
            if !s.level_db.is_finite() {
                return bad(format!("source {}: level must be finite", i + 1));
            }
            let offset = s.offset_s.unwrap_or(self.duration_s);
            if !(s.onset_s >= 0.0 && s.onset_s < offset && offset <= self.duration_s) {
                return bad(format!("source {}: need 0 <= onset < offset <= duration", i + 1));
            }
            match &s.signal {
                SourceSignal::ToneSet { freqs_hz } => {
                    if freqs_hz.is_empty() || freqs_hz.iter().any(|&f| !(f > 0.0 && f < nyquist)) {
                        return bad(format!("source {}: tone frequencies must lie in (0, fs/2)", i + 1));
                    }
                }
                SourceSignal::BandlimitedNoise { low_hz, high_hz } => {
                    if !(*low_hz >= 0.0 && low_hz < high_hz && *high_hz <= nyquist) {
                        return bad(format!("source {}: need 0 <= low < high <= fs/2", i + 1));
                    }
                }
                SourceSignal::SpeechLikeBursts => {}
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<Vec<TruthSource>> {
        self.sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(TruthSource {
                    source_id: i + 1,
                    direction: s.direction()?,
                    onset_s: Some(s.onset_s),
                    offset_s: Some(s.offset_s.unwrap_or(self.duration_s)),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub signal: MultichannelSignal,
    pub truth: Vec<TruthSource>,
}

impl Simulation {
    pub fn write_truth<W: Write>(&self, out: W, convention: ElevationConvention) -> Result<()> {
        write_truth_csv(out, &self.truth, convention)
    }
}

/// Mono signal plus the on/off gain envelope that shaped it.
#[derive(Debug, Clone, PartialEq)]
pub struct Bursts {
    pub samples: Vec<f64>,
    pub envelope: Vec<f64>,
}

/// Gaussian noise gated by alternating on/off segments of uniformly random
/// length in 50–400 ms (5 ms raised-cosine edges), then band-limited to
/// 300–3400 Hz and scaled to unit RMS.
pub fn speech_like_bursts(seed: u64, duration_s: f64, sample_rate: f64) -> Bursts {
    let n = (duration_s * sample_rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut envelope = vec![0.0; n];
    let ramp = ((BURST_RAMP_S * sample_rate).round() as usize).max(1);
    let mut on = rng.random_bool(0.5);
    let mut pos = 0;
    while pos < n {
        let len = (rng.random_range(BURST_MIN_S..=BURST_MAX_S) * sample_rate).round() as usize;
        let end = (pos + len.max(1)).min(n);
        if on {
            let seg = end - pos;
            let r = ramp.min(seg / 2);
            for (i, e) in envelope[pos..end].iter_mut().enumerate() {
                let edge = i.min(seg - 1 - i);
                *e = if edge < r {
                    0.5 - 0.5 * (PI * (edge as f64 + 0.5) / r as f64).cos()
                } else {
                    1.0
                };
            }
        }
        pos = end;
        on = !on;
    }
    let noise: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let gated: Vec<f64> = noise.iter().zip(&envelope).map(|(x, e)| x * e).collect();
    let mut samples = band_limit(&gated, sample_rate, SPEECH_BAND_HZ.0, SPEECH_BAND_HZ.1);
    normalize_rms(&mut samples, 1.0);
    Bursts { samples, envelope }
}

/// Brick-wall FFT filter keeping `[low, high]` Hz.
fn band_limit(x: &[f64], sample_rate: f64, low: f64, high: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * sample_rate / n as f64;
        if f < low || f > high {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = target / rms;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Per-source RNG seed, distinct for every source index.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn source_waveform(spec: &SourceSpec, scene: &SceneSpec, seed: u64) -> Vec<f64> {
    let fs = scene.sample_rate;
    let total = scene.num_samples();
    let start = ((spec.onset_s * fs).round() as usize).min(total);
    let end = ((spec.offset_s.unwrap_or(scene.duration_s) * fs).round() as usize).min(total);
    let len = end.saturating_sub(start);
    let duration = len as f64 / fs;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active = match &spec.signal {
        SourceSignal::ToneSet { freqs_hz } => {
            let phases: Vec<f64> = freqs_hz.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            (0..len)
                .map(|i| {
                    let t = (start + i) as f64 / fs;
                    freqs_hz
                        .iter()
                        .zip(&phases)
                        .map(|(f, p)| (2.0 * PI * f * t + p).cos())
                        .sum()
                })
                .collect()
        }
        SourceSignal::BandlimitedNoise { low_hz, high_hz } => {
            let noise: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            band_limit(&noise, fs, *low_hz, *high_hz)
        }
        SourceSignal::SpeechLikeBursts => speech_like_bursts(rng.random(), duration, fs).samples,
    };
    active.resize(len, 0.0);
    normalize_rms(&mut active, 10f64.powf(spec.level_db / 20.0));
    let mut out = vec![0.0; total];
    out[start..end].copy_from_slice(&active);
    out
}

/// `Σ_m conj(Y_n^m(src)) Y_n^m(sensor)` for every sensor and degree,
/// stored `[sensor][degree]`.
fn degree_kernel(geometry: &ArrayGeometry, order: ShOrder, source: &Direction) -> Vec<Vec<Complex64>> {
    let ys = sh_values(source, order);
    geometry
        .sensors
        .iter()
        .map(|q| {
            let yq = sh_values(q, order);
            let mut g = vec![Complex64::new(0.0, 0.0); order.get() + 1];
            for (idx, (n, _)) in order.iter().enumerate() {
                g[n] += ys[idx].conj() * yq[idx];
            }
            g
        })
        .collect()
}

/// SH coefficients of the pressure on the sphere for a unit plane wave from
/// `direction`: `b_n(kr) conj(Y_n^m(Ω))`.
pub fn field_coefficients(
    direction: &Direction,
    order: ShOrder,
    freq_hz: f64,
    geometry: &ArrayGeometry,
    speed_of_sound: f64,
) -> Vec<Complex64> {
    let k = 2.0 * PI * freq_hz / speed_of_sound;
    let b: Vec<Complex64> = (0..=order.get())
        .map(|n| mode_strength(n, k, geometry.radius, geometry.baffle))
        .collect();
    sh_values(direction, order)
        .into_iter()
        .zip(order.iter())
        .map(|(y, (n, _))| b[n] * y.conj())
        .collect()
}

/// Complex gain from a unit plane wave at `freq_hz` to every sensor.
pub fn sensor_transfer(
    geometry: &ArrayGeometry,
    order: ShOrder,
    direction: &Direction,
    freq_hz: f64,
    speed_of_sound: f64,
) -> Vec<Complex64> {
    let k = 2.0 * PI * freq_hz / speed_of_sound;
    let b: Vec<Complex64> = (0..=order.get())
        .map(|n| mode_strength(n, k, geometry.radius, geometry.baffle))
        .collect();
    degree_kernel(geometry, order, direction)
        .iter()
        .map(|g| g.iter().zip(&b).map(|(g, b)| g * b).sum())
        .collect()
}

/// Sensor signals for a set of plane waves with given waveforms.
fn synthesize(
    waves: &[(Direction, Vec<f64>)],
    geometry: &ArrayGeometry,
    order: ShOrder,
    sample_rate: f64,
    speed_of_sound: f64,
    len: usize,
) -> Vec<Vec<f64>> {
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let half = len / 2 + 1;
    let spectra: Vec<Vec<Complex64>> = waves
        .par_iter()
        .map(|(_, s)| {
            let mut buf: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            forward.process(&mut buf);
            buf.truncate(half);
            buf
        })
        .collect();
    let degrees = order.get() + 1;
    let modes: Vec<Complex64> = (0..half)
        .flat_map(|k| {
            let wavenumber = 2.0 * PI * k as f64 * sample_rate / len as f64 / speed_of_sound;
            (0..degrees).map(move |n| mode_strength(n, wavenumber, geometry.radius, geometry.baffle))
        })
        .collect();
    let kernels: Vec<Vec<Vec<Complex64>>> = waves
        .iter()
        .map(|(d, _)| degree_kernel(geometry, order, d))
        .collect();
    (0..geometry.len())
        .into_par_iter()
        .map(|q| {
            let mut spec = vec![Complex64::new(0.0, 0.0); len];
            for (k, out) in spec.iter_mut().take(half).enumerate() {
                let b = &modes[k * degrees..(k + 1) * degrees];
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, kernel) in spectra.iter().zip(&kernels) {
                    let h: Complex64 = kernel[q].iter().zip(b).map(|(g, b)| g * b).sum();
                    acc += s[k] * h;
                }
                *out = acc;
            }
            for k in half..len {
                spec[k] = spec[len - k].conj();
            }
            inverse.process(&mut spec);
            spec.iter().map(|c| c.re / len as f64).collect()
        })
        .collect()
}

fn mean_power(channels: &[Vec<f64>]) -> f64 {
    let n: usize = channels.iter().map(Vec::len).sum();
    channels.iter().flatten().map(|v| v * v).sum::<f64>() / n.max(1) as f64
}

fn random_direction(rng: &mut ChaCha8Rng) -> Direction {
    let z: f64 = rng.random_range(-1.0..=1.0);
    Direction::new(rng.random_range(0.0..360.0), z.clamp(-1.0, 1.0).acos().to_degrees())
        .expect("valid random direction")
}

/// Renders `scene` for the array `geometry`, truncating the sound field at
/// SH order `order`.
pub fn simulate(scene: &SceneSpec, geometry: &ArrayGeometry, order: ShOrder) -> Result<Simulation> {
    scene.validate()?;
    if order.get() > MAX_ORDER {
        return Err(Error::param(format!(
            "order {} exceeds the simulator's truncation support ({MAX_ORDER})",
            order.get()
        )));
    }
    let len = scene.num_samples();
    let fs = scene.sample_rate;
    let c = scene.speed_of_sound;
    let waves: Vec<(Direction, Vec<f64>)> = scene
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| Ok((s.direction()?, source_waveform(s, scene, stream_seed(scene.seed, i as u64)))))
        .collect::<Result<_>>()?;
    let mut channels = synthesize(&waves, geometry, order, fs, c, len);
    let power = mean_power(&channels);
    if let Some(diffuse) = &scene.diffuse {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(scene.seed, u64::MAX - 1));
        let field: Vec<(Direction, Vec<f64>)> = (0..diffuse.waves)
            .map(|_| {
                let d = random_direction(&mut rng);
                let s = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                (d, s)
            })
            .collect();
        let diffuse_channels = synthesize(&field, geometry, order, fs, c, len);
        let dp = mean_power(&diffuse_channels);
        if dp > 0.0 {
            let g = (power / 10f64.powf(diffuse.snr_db / 10.0) / dp).sqrt();
            for (ch, d) in channels.iter_mut().zip(&diffuse_channels) {
                ch.iter_mut().zip(d).for_each(|(x, n)| *x += g * n);
            }
        }
    }
    if let Some(snr) = scene.snr_db {
        let sigma = (power / 10f64.powf(snr / 10.0)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(scene.seed, u64::MAX));
        for ch in &mut channels {
            for x in ch.iter_mut() {
                *x += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(Simulation {
        signal: MultichannelSignal::new(channels, fs)?,
        truth: scene.truth()?,
    })
}
