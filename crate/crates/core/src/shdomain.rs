//! Spherical Fourier transform of microphone STFT coefficients and
//! rigid/open-sphere mode-strength compensation.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Baffle};
use crate::harmonics::{evaluate_sh_basis, ShOrder};
use crate::special::{spherical_jn, spherical_yn};
use crate::stft::{FrameLayout, TfTensor};

/// Encoding matrices whose condition number exceeds this are rejected.
pub const MAX_CONDITION_NUMBER: f64 = 1e6;

/// Below this `kr` the rigid-sphere mode strength uses its leading-order
/// small-argument form.
const SMALL_KR: f64 = 1e-6;

/// SH-domain coefficients, `(N+1)²` channels per time-frequency bin.
#[derive(Debug, Clone)]
pub struct ShCoefficients {
    order: ShOrder,
    layout: FrameLayout,
    frames: usize,
    bins: Range<usize>,
    coeffs: Vec<Complex64>,
}

impl ShCoefficients {
    /// Builds from raw storage laid out frame-major, then bin, then SH channel.
    pub fn from_raw(
        order: ShOrder,
        layout: FrameLayout,
        frames: usize,
        bins: Range<usize>,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if coeffs.len() != frames * bins.len() * order.channels() {
            return Err(Error::param("coefficient storage does not match shape"));
        }
        Ok(Self {
            order,
            layout,
            frames,
            bins,
            coeffs,
        })
    }

    pub fn order(&self) -> ShOrder {
        self.order
    }

    pub fn layout(&self) -> &FrameLayout {
        &self.layout
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> Range<usize> {
        self.bins.clone()
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        self.bins.clone().map(|k| k as f64 * self.layout.bin_hz()).collect()
    }

    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.frames).map(|t| self.layout.frame_time(t)).collect()
    }

    /// SH vector at `frame` and local bin offset `bin`.
    pub fn vector(&self, frame: usize, bin: usize) -> &[Complex64] {
        let n = self.order.channels();
        let start = (frame * self.bins.len() + bin) * n;
        &self.coeffs[start..start + n]
    }
}

/// Pseudo-inverse encoder for one array geometry and SH order.
#[derive(Debug, Clone)]
pub struct ShEncoder {
    order: ShOrder,
    sensors: usize,
    pinv: DMatrix<Complex64>,
    condition: f64,
}

impl ShEncoder {
    pub fn new(geometry: &ArrayGeometry, order: ShOrder) -> Result<Self> {
        if geometry.len() < order.channels() {
            return Err(Error::InsufficientSensors {
                sensors: geometry.len(),
                order: order.get(),
                needed: order.channels(),
            });
        }
        let y = evaluate_sh_basis(&geometry.sensors, order);
        let svd = y.svd(true, true);
        let (max, min) = (svd.singular_values.max(), svd.singular_values.min());
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION_NUMBER) {
            return Err(Error::RankDeficient(condition));
        }
        let pinv = svd
            .pseudo_inverse(0.0)
            .map_err(|e| Error::InvalidGeometry(e.to_string()))?;
        Ok(Self {
            order,
            sensors: geometry.len(),
            pinv,
            condition,
        })
    }

    pub fn order(&self) -> ShOrder {
        self.order
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// `(N+1)² × sensors` pseudo-inverse of the encoding matrix.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.pinv
    }

    /// Applies the pseudo-inverse to one microphone vector.
    pub fn encode_vector(&self, mic: &[Complex64], out: &mut [Complex64]) {
        for (row, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (col, m) in mic.iter().enumerate() {
                acc += self.pinv[(row, col)] * m;
            }
            *o = acc;
        }
    }

    /// Uncompensated SH coefficients of every time-frequency bin.
    pub fn encode(&self, tf: &TfTensor) -> Result<ShCoefficients> {
        if tf.num_channels() != self.sensors {
            return Err(Error::ChannelMismatch {
                signal: tf.num_channels(),
                sensors: self.sensors,
            });
        }
        let n_sh = self.order.channels();
        let bins = tf.num_bins();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); tf.num_frames() * bins * n_sh];
        if !coeffs.is_empty() {
            coeffs
                .par_chunks_mut(bins * n_sh)
                .enumerate()
                .for_each(|(t, out)| {
                    for (b, o) in out.chunks_exact_mut(n_sh).enumerate() {
                        self.encode_vector(tf.vector(t, b), o);
                    }
                });
        }
        ShCoefficients::from_raw(self.order, *tf.layout(), tf.num_frames(), tf.bins(), coeffs)
    }
}

/// Mode strength `b_n(kr)` relating a unit plane wave's SH coefficients to
/// the pressure on a sphere of radius `r`.
///
/// Open sphere: `4π iⁿ j_n(kr)`. Rigid sphere (sensors on the scatterer):
/// `4π iⁿ [j_n − (j_n′ / h_n′) h_n]` with `h_n = h_n^(2)`, evaluated through
/// the Wronskian as `4π i^(n−1) / ((kr)² h_n′(kr))`.
pub fn mode_strength(n: usize, k: f64, r: f64, baffle: Baffle) -> Complex64 {
    let x = k * r;
    let i_pow_n = i_pow(n as i64);
    if x == 0.0 {
        return if n == 0 {
            Complex64::new(4.0 * PI, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    match baffle {
        Baffle::OpenSphere => i_pow_n * (4.0 * PI * spherical_jn(n, x).value[n]),
        Baffle::RigidSphere if x < SMALL_KR => {
            // leading order: 4π iⁿ xⁿ / ((n+1)(2n−1)!!)
            let df = crate::special::double_factorial_odd(n);
            i_pow_n * (4.0 * PI * x.powi(n as i32) / ((n + 1) as f64 * df))
        }
        Baffle::RigidSphere => {
            let jd = spherical_jn(n, x).derivative[n];
            let yd = spherical_yn(n, x).derivative[n];
            let h_prime = Complex64::new(jd, -yd);
            i_pow(n as i64 - 1) * (4.0 * PI) / (h_prime * (x * x))
        }
    }
}

fn i_pow(p: i64) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Regularized per-degree compensation multipliers over a set of bins.
#[derive(Debug, Clone)]
pub struct ModeStrengthProfile {
    order: ShOrder,
    bin_freqs: Vec<f64>,
    /// `b_n` at `[n * bins + bin]`.
    values: Vec<Complex64>,
    /// `1 / divisor`, with `|divisor| ≥ 1 / cap`.
    multipliers: Vec<Complex64>,
    pub radius: f64,
    pub speed_of_sound: f64,
    pub gain_cap_db: f64,
}

impl ModeStrengthProfile {
    pub fn new(
        order: ShOrder,
        bin_freqs: &[f64],
        radius: f64,
        baffle: Baffle,
        speed_of_sound: f64,
        gain_cap_db: f64,
    ) -> Result<Self> {
        if !(speed_of_sound > 0.0) {
            return Err(Error::param("speed of sound must be positive"));
        }
        if !gain_cap_db.is_finite() {
            return Err(Error::param("gain cap must be finite"));
        }
        let cap = 10f64.powf(gain_cap_db / 20.0);
        let floor = 1.0 / cap;
        let bins = bin_freqs.len();
        let mut values = Vec::with_capacity((order.get() + 1) * bins);
        let mut multipliers = Vec::with_capacity(values.capacity());
        for n in 0..=order.get() {
            for &f in bin_freqs {
                let k = 2.0 * PI * f / speed_of_sound;
                let b = mode_strength(n, k, radius, baffle);
                let mag = b.norm();
                let phase = if mag > 0.0 { b / mag } else { i_pow(n as i64) };
                let divisor = phase * mag.max(floor);
                values.push(b);
                multipliers.push(divisor.inv());
            }
        }
        Ok(Self {
            order,
            bin_freqs: bin_freqs.to_vec(),
            values,
            multipliers,
            radius,
            speed_of_sound,
            gain_cap_db,
        })
    }

    /// Profile whose multipliers are all exactly one.
    pub fn unity(order: ShOrder, bin_freqs: &[f64]) -> Self {
        let len = (order.get() + 1) * bin_freqs.len();
        Self {
            order,
            bin_freqs: bin_freqs.to_vec(),
            values: vec![Complex64::new(1.0, 0.0); len],
            multipliers: vec![Complex64::new(1.0, 0.0); len],
            radius: f64::NAN,
            speed_of_sound: f64::NAN,
            gain_cap_db: f64::INFINITY,
        }
    }

    pub fn bin_freqs(&self) -> &[f64] {
        &self.bin_freqs
    }

    /// Unregularized `b_n` at local bin `bin`.
    pub fn value(&self, n: usize, bin: usize) -> Complex64 {
        self.values[n * self.bin_freqs.len() + bin]
    }

    /// Multiplier applied to every degree-`n` coefficient at local bin `bin`.
    pub fn multiplier(&self, n: usize, bin: usize) -> Complex64 {
        self.multipliers[n * self.bin_freqs.len() + bin]
    }
}

/// Divides each degree-`n` coefficient by its regularized mode strength.
pub fn compensate(sh: &ShCoefficients, profile: &ModeStrengthProfile) -> Result<ShCoefficients> {
    if profile.order != sh.order {
        return Err(Error::param("profile order differs from coefficient order"));
    }
    let freqs = sh.bin_freqs();
    if freqs.len() != profile.bin_freqs.len()
        || freqs
            .iter()
            .zip(&profile.bin_freqs)
            .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(Error::param("profile bins do not align with coefficient bins"));
    }
    let n_sh = sh.order.channels();
    let degree: Vec<usize> = sh.order.iter().map(|(n, _)| n).collect();
    let bins = sh.num_bins();
    let mut coeffs = sh.coeffs.clone();
    if !coeffs.is_empty() {
        coeffs.par_chunks_mut(bins * n_sh).for_each(|frame| {
            for (b, v) in frame.chunks_exact_mut(n_sh).enumerate() {
                for (c, d) in v.iter_mut().zip(&degree) {
                    *c *= profile.multiplier(*d, b);
                }
            }
        });
    }
    ShCoefficients::from_raw(sh.order, sh.layout, sh.frames, sh.bins.clone(), coeffs)
}
