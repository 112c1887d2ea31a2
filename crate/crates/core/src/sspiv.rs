//! Subspace pseudointensity vectors.
//!
//! For each time-frequency region the compensated SH vectors are averaged
//! into a covariance matrix over `L` consecutive frames and a band of `K`
//! adjacent bins. The principal eigenvector of that matrix stands in for the
//! SH coefficients of the dominant plane wave, and its zeroth- and
//! first-degree components give a pseudointensity vector pointing at the
//! source.
//!
//! Regions slide one frame at a time and bands tile `[f_min, f_max]`
//! without overlap. Every region with signal energy contributes a vote; no
//! single-source validity test is applied.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shdomain::ShCoefficients;
use crate::stft::FrameLayout;

/// Pseudointensity vectors shorter than this carry no direction.
pub const MIN_INTENSITY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub time_span_ms: f64,
    pub freq_span_hz: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            time_span_ms: 16.0,
            freq_span_hz: 350.0,
            f_min_hz: 800.0,
            f_max_hz: 3500.0,
        }
    }
}

impl SmoothingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_span_ms > 0.0) || !(self.freq_span_hz > 0.0) {
            return Err(Error::param("smoothing spans must be positive"));
        }
        if !(self.f_min_hz >= 0.0) || !(self.f_min_hz < self.f_max_hz) {
            return Err(Error::param(format!(
                "need 0 <= f_min < f_max, got {} and {}",
                self.f_min_hz, self.f_max_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    /// Absolute one-sided STFT bins.
    pub bins: Range<usize>,
    pub center_hz: f64,
}

/// How regions tile the time-frequency plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionLayout {
    pub frames_per_region: usize,
    pub bins_per_band: usize,
    pub bands: Vec<Band>,
}

impl RegionLayout {
    /// `L = round(time_span / hop)`, `K = max(2, round(freq_span / bin_hz))`;
    /// bands are consecutive `K`-bin groups starting at the first bin at or
    /// above `f_min`, keeping only groups that end at or below `f_max`.
    pub fn new(params: &SmoothingParams, layout: &FrameLayout) -> Result<Self> {
        params.validate()?;
        let hop_ms = layout.hop_seconds() * 1000.0;
        let frames_per_region = ((params.time_span_ms / hop_ms).round() as usize).max(1);
        let bin_hz = layout.bin_hz();
        let bins_per_band = ((params.freq_span_hz / bin_hz).round() as usize).max(2);
        let first = (params.f_min_hz / bin_hz).ceil() as usize;
        let last = ((params.f_max_hz / bin_hz).floor() as usize).min(layout.num_bins() - 1);
        let mut bands = Vec::new();
        let mut start = first;
        while start + bins_per_band <= last + 1 {
            let bins = start..start + bins_per_band;
            let center_hz = (bins.start + bins.end - 1) as f64 * 0.5 * bin_hz;
            bands.push(Band { bins, center_hz });
            start += bins_per_band;
        }
        if bands.is_empty() {
            return Err(Error::param(format!(
                "no {bins_per_band}-bin band fits in [{}, {}] Hz at {bin_hz} Hz per bin",
                params.f_min_hz, params.f_max_hz
            )));
        }
        Ok(Self {
            frames_per_region,
            bins_per_band,
            bands,
        })
    }

    /// Layout with explicit sizes, for degenerate or custom tilings.
    pub fn with_sizes(frames_per_region: usize, bands: Vec<Band>) -> Result<Self> {
        let bins_per_band = bands.first().map(|b| b.bins.len()).unwrap_or(0);
        if frames_per_region == 0 || bins_per_band == 0 {
            return Err(Error::param("regions need at least one frame and one bin"));
        }
        Ok(Self {
            frames_per_region,
            bins_per_band,
            bands,
        })
    }

    /// Smallest bin range covering every band.
    pub fn bin_span(&self) -> Range<usize> {
        let start = self.bands.iter().map(|b| b.bins.start).min().unwrap_or(0);
        let end = self.bands.iter().map(|b| b.bins.end).max().unwrap_or(0);
        start..end
    }

    /// Frames averaged for the region centred on `center`, if all exist.
    pub fn window(&self, center: usize, num_frames: usize) -> Option<Range<usize>> {
        let start = center.checked_sub(self.frames_per_region / 2)?;
        let end = start + self.frames_per_region;
        (end <= num_frames).then_some(start..end)
    }

    /// Centre frames whose whole window lies inside the signal.
    pub fn centers(&self, num_frames: usize) -> Range<usize> {
        let half = self.frames_per_region / 2;
        if num_frames < self.frames_per_region {
            return half..half;
        }
        half..(num_frames - self.frames_per_region + half + 1)
    }
}

#[derive(Debug, Clone)]
pub struct ShCovariance {
    pub matrix: DMatrix<Complex64>,
    pub frame: usize,
    pub band: usize,
}

impl ShCovariance {
    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|c| c.re).sum()
    }
}

/// Time/frequency-smoothed covariance `(1/LK) Σ a aᴴ` of region
/// (`frame`, `band`). Returns `None` when the time window runs past the
/// signal edges.
pub fn covariance(
    sh: &ShCoefficients,
    frame: usize,
    band: usize,
    layout: &RegionLayout,
) -> Result<Option<ShCovariance>> {
    let band_def = layout
        .bands
        .get(band)
        .ok_or_else(|| Error::param(format!("band {band} out of range")))?;
    let span = sh.bins();
    if band_def.bins.start < span.start || band_def.bins.end > span.end {
        return Err(Error::param(format!(
            "band bins {:?} not covered by coefficients {:?}",
            band_def.bins, span
        )));
    }
    let Some(window) = layout.window(frame, sh.num_frames()) else {
        return Ok(None);
    };
    let n = sh.order().channels();
    let local = (band_def.bins.start - span.start)..(band_def.bins.end - span.start);
    let cols = window.len() * local.len();
    let mut a = DMatrix::<Complex64>::zeros(n, cols);
    let mut col = 0;
    for t in window {
        for b in local.clone() {
            a.column_mut(col).copy_from_slice(sh.vector(t, b));
            col += 1;
        }
    }
    let mut matrix = &a * a.adjoint();
    matrix /= Complex64::new(cols as f64, 0.0);
    Ok(Some(ShCovariance {
        matrix,
        frame,
        band,
    }))
}

#[derive(Debug, Clone)]
pub struct PrincipalSubspace {
    /// Unit eigenvector of the largest eigenvalue, phase-normalized so the
    /// zeroth-order component is real and non-negative.
    pub vector: Vec<Complex64>,
    pub eigenvalue: f64,
    /// `λ₁ / trace`; `1/(N+1)²` for a white spectrum, 1 for rank one.
    pub ratio: f64,
}

pub fn principal_subspace(cov: &ShCovariance) -> Result<PrincipalSubspace> {
    if cov.matrix.iter().any(|c| !c.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let eig = SymmetricEigen::try_new(cov.matrix.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let (idx, &eigenvalue) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::EigenFailure)?;
    let mut vector: Vec<Complex64> = eig.eigenvectors.column(idx).iter().copied().collect();
    let norm = vector.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::EigenFailure);
    }
    let lead = vector[0];
    let phase = if lead.norm() > 0.0 {
        lead.conj() / lead.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    for v in &mut vector {
        *v = *v * phase / norm;
    }
    let trace = cov.trace();
    let ratio = if trace > 0.0 { eigenvalue / trace } else { 0.0 };
    Ok(PrincipalSubspace {
        vector,
        eigenvalue,
        ratio,
    })
}

/// Pseudointensity `Re{ conj(u₀₀) · T u₁ }` of a compensated SH vector,
/// normalized to unit length.
///
/// `T` maps the degree-1 coefficients `(m = -1, 0, 1)` of a field whose
/// coefficients are proportional to `conj(Y_n^m(Ω))` onto Cartesian dipole
/// components, so a single plane wave from `Ω` yields `unit_vector(Ω)`.
/// Returns `None` when the vector has no dipole energy.
pub fn piv_from_vector(u: &[Complex64]) -> Option<Vector3<f64>> {
    if u.len() < 4 {
        return None;
    }
    let (m_neg, m_zero, m_pos) = (u[1], u[2], u[3]);
    let dipole = [
        (m_neg - m_pos) * FRAC_1_SQRT_2,
        (m_neg + m_pos) * Complex64::new(0.0, -FRAC_1_SQRT_2),
        m_zero,
    ];
    let w = u[0].conj();
    let i = Vector3::new((w * dipole[0]).re, (w * dipole[1]).re, (w * dipole[2]).re);
    let norm = i.norm();
    (norm >= MIN_INTENSITY && norm.is_finite()).then(|| i / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteWeighting {
    #[default]
    Uniform,
    /// Weight each vote by `λ₁ / trace` of its region.
    EigenRatio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub frame: usize,
    pub band: usize,
    pub time_s: f64,
    pub band_center_hz: f64,
    pub direction: Vector3<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PivField {
    pub votes: Vec<Vote>,
}

impl PivField {
    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    /// CSV with columns `frame_time_s,band_center_hz,x,y,z,weight`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame_time_s", "band_center_hz", "x", "y", "z", "weight"])?;
        for v in &self.votes {
            w.write_record(&[
                format!("{:.6}", v.time_s),
                format!("{:.3}", v.band_center_hz),
                format!("{:.9}", v.direction.x),
                format!("{:.9}", v.direction.y),
                format!("{:.9}", v.direction.z),
                format!("{}", v.weight),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn region_vote(
    sh: &ShCoefficients,
    frame: usize,
    band: usize,
    layout: &RegionLayout,
    weighting: VoteWeighting,
) -> Result<Option<Vote>> {
    let Some(cov) = covariance(sh, frame, band, layout)? else {
        return Ok(None);
    };
    let trace = cov.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Ok(None);
    }
    let sub = principal_subspace(&cov)?;
    let Some(direction) = piv_from_vector(&sub.vector) else {
        return Ok(None);
    };
    let weight = match weighting {
        VoteWeighting::Uniform => 1.0,
        VoteWeighting::EigenRatio => sub.ratio,
    };
    Ok(Some(Vote {
        frame,
        band,
        time_s: sh.layout().frame_time(frame),
        band_center_hz: layout.bands[band].center_hz,
        direction,
        weight,
    }))
}

/// One vote per (centre frame, band) region that carries energy, ordered by
/// frame then band regardless of thread count.
pub fn compute_sspiv_field(
    sh: &ShCoefficients,
    layout: &RegionLayout,
    weighting: VoteWeighting,
) -> Result<PivField> {
    let per_frame: Vec<Vec<Vote>> = layout
        .centers(sh.num_frames())
        .into_par_iter()
        .map(|t| {
            let mut out = Vec::with_capacity(layout.bands.len());
            for b in 0..layout.bands.len() {
                if let Some(v) = region_vote(sh, t, b, layout, weighting)? {
                    out.push(v);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(PivField {
        votes: per_frame.into_iter().flatten().collect(),
    })
}
