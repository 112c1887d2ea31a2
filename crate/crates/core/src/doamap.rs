//! Direction histogram, solid-angle smoothing and peak picking.
//!
//! Votes are binned on a regular azimuth × inclination grid. Cells near the
//! poles cover far less solid angle than equatorial ones, so smoothing works
//! on vote *density*: each output cell is a Gaussian-weighted (great-circle
//! distance) average of neighbouring counts divided by the matching
//! weighted average of cell areas,
//!
//! `out(c) = Σ w(Δ(c,c')) n(c') / Σ w(Δ(c,c')) a(c')`,
//!
//! with `a` the cell solid angle relative to the mean cell. A uniform vote
//! density maps to a constant output, and a lone vote keeps its maximum in
//! its own cell even next to a pole.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Direction;
use crate::sspiv::PivField;

/// Kernel support in standard deviations.
const KERNEL_TRUNCATION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub az_bin_deg: f64,
    pub incl_bin_deg: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            az_bin_deg: 2.0,
            incl_bin_deg: 2.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, w, span) in [("azimuth", self.az_bin_deg, 360.0), ("inclination", self.incl_bin_deg, 180.0)] {
            let cells = span / w;
            if !(w > 0.0) || (cells - cells.round()).abs() > 1e-9 {
                return Err(Error::param(format!("{name} bin width {w} must divide {span}")));
            }
        }
        Ok(())
    }

    pub fn n_az(&self) -> usize {
        (360.0 / self.az_bin_deg).round() as usize
    }

    pub fn n_incl(&self) -> usize {
        (180.0 / self.incl_bin_deg).round() as usize
    }

    pub fn az_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.az_bin_deg
    }

    pub fn incl_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.incl_bin_deg
    }

    pub fn center(&self, j: usize, i: usize) -> Direction {
        Direction::new(self.az_center(i), self.incl_center(j)).expect("cell centres are valid")
    }

    /// `(inclination row, azimuth column)` of the cell holding `d`.
    pub fn cell_of(&self, d: &Direction) -> (usize, usize) {
        let i = (d.azimuth() / self.az_bin_deg).floor() as usize;
        let j = (d.inclination() / self.incl_bin_deg).floor() as usize;
        (j.min(self.n_incl() - 1), if i >= self.n_az() { 0 } else { i })
    }

    /// Solid angle of a cell in row `j`, in steradians.
    pub fn cell_solid_angle(&self, j: usize) -> f64 {
        let lo = (j as f64 * self.incl_bin_deg).to_radians();
        let hi = ((j + 1) as f64 * self.incl_bin_deg).to_radians();
        self.az_bin_deg.to_radians() * (lo.cos() - hi.cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalHistogram {
    grid: GridSpec,
    /// Row-major `[inclination][azimuth]`.
    values: Vec<f64>,
    total_votes: usize,
}

impl SphericalHistogram {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.n_az() * grid.n_incl()],
            grid,
            total_votes: 0,
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_az() * grid.n_incl() {
            return Err(Error::param("histogram storage does not match grid"));
        }
        Ok(Self {
            grid,
            values,
            total_votes: 0,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.grid.n_az() + i]
    }

    pub fn get_mut(&mut self, j: usize, i: usize) -> &mut f64 {
        let n = self.grid.n_az();
        &mut self.values[j * n + i]
    }

    /// Number of votes binned; zero for derived histograms.
    pub fn total_votes(&self) -> usize {
        self.total_votes
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Adds `weight` to the cell containing `d`.
    pub fn add(&mut self, d: &Direction, weight: f64) {
        let (j, i) = self.grid.cell_of(d);
        *self.get_mut(j, i) += weight;
        self.total_votes += 1;
    }
}

pub fn build_histogram(field: &PivField, grid: GridSpec) -> SphericalHistogram {
    let mut h = SphericalHistogram::zeros(grid);
    for v in &field.votes {
        if let Some(d) = Direction::from_vector(&v.direction) {
            h.add(&d, v.weight);
        }
    }
    h
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    row: usize,
    az_offset: usize,
    weight: f64,
}

/// Precomputed truncated Gaussian kernel for one grid and width.
#[derive(Debug, Clone)]
pub struct SmoothingKernel {
    grid: GridSpec,
    sigma_deg: f64,
    taps: Vec<Vec<Tap>>,
    /// `Σ w · a` per output row.
    denominators: Vec<f64>,
}

impl SmoothingKernel {
    pub fn new(grid: GridSpec, sigma_deg: f64) -> Result<Self> {
        grid.validate()?;
        if !(sigma_deg > 0.0) || !sigma_deg.is_finite() {
            return Err(Error::param(format!("kernel sigma must be positive, got {sigma_deg}")));
        }
        let (n_az, n_incl) = (grid.n_az(), grid.n_incl());
        let mean_area = 4.0 * std::f64::consts::PI / (n_az * n_incl) as f64;
        let area: Vec<f64> = (0..n_incl).map(|j| grid.cell_solid_angle(j) / mean_area).collect();
        let support = KERNEL_TRUNCATION * sigma_deg;
        let two_var = 2.0 * sigma_deg * sigma_deg;
        let unit = |j: usize, i: usize| grid.center(j, i).unit_vector();
        let mut taps = Vec::with_capacity(n_incl);
        let mut denominators = Vec::with_capacity(n_incl);
        for j in 0..n_incl {
            let here = unit(j, 0);
            let mut row_taps = Vec::new();
            let mut den = 0.0;
            for (jj, a) in area.iter().enumerate() {
                if (grid.incl_center(jj) - grid.incl_center(j)).abs() > support {
                    continue;
                }
                for off in 0..n_az {
                    let there = unit(jj, off);
                    let delta = here.cross(&there).norm().atan2(here.dot(&there)).to_degrees();
                    if delta <= support {
                        let weight = (-delta * delta / two_var).exp();
                        row_taps.push(Tap {
                            row: jj,
                            az_offset: off,
                            weight,
                        });
                        den += weight * a;
                    }
                }
            }
            taps.push(row_taps);
            denominators.push(den);
        }
        Ok(Self {
            grid,
            sigma_deg,
            taps,
            denominators,
        })
    }

    pub fn sigma_deg(&self) -> f64 {
        self.sigma_deg
    }

    /// Cell area relative to the mean cell, for row `j`.
    pub fn relative_area(&self, j: usize) -> f64 {
        let n = (self.grid.n_az() * self.grid.n_incl()) as f64;
        self.grid.cell_solid_angle(j) * n / (4.0 * std::f64::consts::PI)
    }

    pub fn apply(&self, h: &SphericalHistogram) -> Result<SphericalHistogram> {
        use rayon::prelude::*;
        if h.grid != self.grid {
            return Err(Error::param("histogram grid differs from kernel grid"));
        }
        let n_az = self.grid.n_az();
        let mut values = vec![0.0; h.values.len()];
        values.par_chunks_mut(n_az).enumerate().for_each(|(j, row)| {
            let den = self.denominators[j];
            for (i, out) in row.iter_mut().enumerate() {
                let mut num = 0.0;
                for t in &self.taps[j] {
                    num += t.weight * h.get(t.row, (i + t.az_offset) % n_az);
                }
                *out = num / den;
            }
        });
        Ok(SphericalHistogram {
            grid: self.grid,
            values,
            total_votes: h.total_votes,
        })
    }
}

pub fn smooth(h: &SphericalHistogram, sigma_deg: f64) -> Result<SphericalHistogram> {
    SmoothingKernel::new(h.grid, sigma_deg)?.apply(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub max_peaks: usize,
    pub beta: f64,
    pub kernel_sigma_deg: f64,
    pub single_source_mode: bool,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            max_peaks: 10,
            beta: 2.0,
            kernel_sigma_deg: 4.0,
            single_source_mode: false,
        }
    }
}

impl PeakParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_peaks == 0 {
            return Err(Error::param("max_peaks must be at least 1"));
        }
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(Error::param(format!("beta must exceed 1, got {}", self.beta)));
        }
        if !(self.kernel_sigma_deg > 0.0) || !self.kernel_sigma_deg.is_finite() {
            return Err(Error::param("kernel sigma must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaEstimate {
    /// Centre of the peak cell.
    pub direction: Direction,
    pub peak_height: f64,
    /// 1-based, by decreasing height.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Peak {
    j: usize,
    i: usize,
    height: f64,
}

/// Positive cells that beat all 8 neighbours; equal neighbours are beaten
/// by the cell with the smaller `(row, column)`.
fn local_maxima(h: &SphericalHistogram) -> Vec<Peak> {
    let (n_az, n_incl) = (h.grid.n_az(), h.grid.n_incl());
    let mut peaks = Vec::new();
    for j in 0..n_incl {
        for i in 0..n_az {
            let v = h.get(j, i);
            if !(v > 0.0) {
                continue;
            }
            let mut is_max = true;
            'scan: for dj in -1i64..=1 {
                let jj = j as i64 + dj;
                if jj < 0 || jj >= n_incl as i64 {
                    continue;
                }
                for di in -1i64..=1 {
                    if dj == 0 && di == 0 {
                        continue;
                    }
                    let ii = (i as i64 + di).rem_euclid(n_az as i64) as usize;
                    let jj = jj as usize;
                    let nv = h.get(jj, ii);
                    if nv > v || (nv == v && (jj, ii) < (j, i)) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                peaks.push(Peak { j, i, height: v });
            }
        }
    }
    peaks
}

/// Picks up to `max_peaks` local maxima and keeps those higher than
/// `beta` times the lowest of them. When none clears that bar every
/// candidate is returned.
pub fn pick_peaks(h: &SphericalHistogram, params: &PeakParams) -> Vec<DoaEstimate> {
    let mut peaks = local_maxima(h);
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height).then((a.j, a.i).cmp(&(b.j, b.i))));
    peaks.truncate(params.max_peaks.max(1));
    if params.single_source_mode {
        peaks.truncate(1);
    }
    if peaks.len() >= 2 {
        let floor = params.beta * peaks[peaks.len() - 1].height;
        let kept: Vec<Peak> = peaks.iter().copied().filter(|p| p.height > floor).collect();
        if !kept.is_empty() {
            peaks = kept;
        }
    }
    peaks
        .into_iter()
        .enumerate()
        .map(|(r, p)| DoaEstimate {
            direction: h.grid.center(p.j, p.i),
            peak_height: p.height,
            rank: r + 1,
        })
        .collect()
}

/// CSV with columns `az_center,incl_center,raw,smoothed`, one row per cell.
pub fn write_histogram_csv<W: Write>(out: W, raw: &SphericalHistogram, smoothed: &SphericalHistogram) -> Result<()> {
    if raw.grid != smoothed.grid {
        return Err(Error::param("histogram grids differ"));
    }
    let g = raw.grid;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["az_center", "incl_center", "raw", "smoothed"])?;
    for j in 0..g.n_incl() {
        for i in 0..g.n_az() {
            w.write_record(&[
                format!("{}", g.az_center(i)),
                format!("{}", g.incl_center(j)),
                format!("{}", raw.get(j, i)),
                format!("{:.6e}", smoothed.get(j, i)),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Binary 8-bit PGM, azimuth across and inclination down, scaled to the
/// maximum cell.
pub fn write_pgm<W: Write>(mut out: W, h: &SphericalHistogram) -> Result<()> {
    let g = h.grid;
    let max = h.max();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let io = |e| Error::io("<pgm>", e);
    write!(out, "P5\n{} {}\n255\n", g.n_az(), g.n_incl()).map_err(io)?;
    let bytes: Vec<u8> = h.values.iter().map(|v| (v * scale).round().clamp(0.0, 255.0) as u8).collect();
    out.write_all(&bytes).map_err(io)?;
    Ok(())
}
