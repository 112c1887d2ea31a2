//! Scenarios and fixtures for the acceptance suite.
//!
//! Kept out of the core crate so the acceptance binary builds and runs after
//! every other test target in the workspace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sspiv::geometry::Direction;
use sspiv::simulator::{SceneSpec, SourceSignal, SourceSpec};

/// Rejection-samples `count` directions uniform in solid angle within the
/// inclination band `incl_deg`, pairwise at least `min_sep_deg` apart.
pub fn separated_directions(seed: u64, count: usize, incl_deg: (f64, f64), min_sep_deg: f64) -> Vec<Direction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (z_lo, z_hi) = (incl_deg.1.to_radians().cos(), incl_deg.0.to_radians().cos());
    let mut out: Vec<Direction> = Vec::with_capacity(count);
    while out.len() < count {
        let z: f64 = rng.random_range(z_lo..=z_hi);
        let d = Direction::new(rng.random_range(0.0..360.0), z.clamp(-1.0, 1.0).acos().to_degrees())
            .expect("sampled inclination is in range");
        if out.iter().all(|o| o.angle_to(&d) >= min_sep_deg) {
            out.push(d);
        }
    }
    out
}

/// Simultaneous speech-like talkers around a desk-height array: directions
/// within 30° of the horizontal plane, at least 45° apart.
pub fn desk_scene(seed: u64, talkers: usize, snr_db: f64, duration_s: f64) -> SceneSpec {
    let mut scene = SceneSpec::new(duration_s, 48000.0, seed);
    scene.snr_db = Some(snr_db);
    for d in separated_directions(1000 + seed, talkers, (60.0, 120.0), 45.0) {
        scene.sources.push(SourceSpec::new(d, SourceSignal::SpeechLikeBursts));
    }
    scene
}

/// Talkers speaking in turn, `turn_s` each, cycling through `dirs`.
pub fn turn_taking_scene(dirs: &[Direction], duration_s: f64, turn_s: f64, seed: u64, snr_db: f64) -> SceneSpec {
    let mut scene = SceneSpec::new(duration_s, 48000.0, seed);
    scene.snr_db = Some(snr_db);
    let turns = (duration_s / turn_s).round() as usize;
    for t in 0..turns {
        let mut s = SourceSpec::new(
            dirs[t % dirs.len()],
            SourceSignal::BandlimitedNoise {
                low_hz: 300.0,
                high_hz: 3400.0,
            },
        );
        s.onset_s = t as f64 * turn_s;
        s.offset_s = Some(((t + 1) as f64 * turn_s).min(duration_s));
        scene.sources.push(s);
    }
    scene
}

/// One row of a published error table: average azimuth, elevation and
/// combined errors in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub azimuth: f64,
    pub elevation: f64,
    pub combined: f64,
}

impl ErrorRow {
    pub const fn new(azimuth: f64, elevation: f64, combined: f64) -> Self {
        Self {
            azimuth,
            elevation,
            combined,
        }
    }
}

/// A (truth, estimate) pair for one analysis frame.
pub type Frame = (Direction, Direction);

fn frame_pair(az_err: f64, el_err: f64, truth_el: f64) -> Frame {
    let truth = Direction::from_elevation(0.0, truth_el).expect("valid truth");
    let est = Direction::from_elevation(az_err, truth_el + el_err).expect("valid estimate");
    (truth, est)
}

fn mean_combined(frames: &[Frame]) -> f64 {
    frames.iter().map(|(t, e)| t.angle_to(e)).sum::<f64>() / frames.len() as f64
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two frames whose mean azimuth and elevation errors equal the row's and
/// whose mean great-circle error equals `row.combined`.
///
/// A single pair cannot always do it: near the horizontal plane its
/// great-circle error is at most about `hypot(az, el)`, and published rows
/// average over many frames. Below that bound the truth is raised off the
/// plane, which shrinks the azimuth contribution. Above it the truth stays on
/// the plane and the two frames split the errors unevenly, which raises the
/// mean great-circle error towards `az + el`.
pub fn reconstruct_row(row: ErrorRow) -> Option<[Frame; 2]> {
    let (a, e, c) = (row.azimuth, row.elevation, row.combined);
    let on_plane = |lambda: f64| {
        [
            frame_pair(a * (1.0 + lambda), e * (1.0 - lambda), 0.0),
            frame_pair(a * (1.0 - lambda), e * (1.0 + lambda), 0.0),
        ]
    };
    let raised = |el: f64| [frame_pair(a, e, el), frame_pair(a, e, el)];
    let c0 = mean_combined(&on_plane(0.0));
    let frames = if c <= c0 {
        let top = 89.0 - e;
        if mean_combined(&raised(top)) > c {
            return None;
        }
        raised(bisect(0.0, top, |el| mean_combined(&raised(el)) - c))
    } else {
        if mean_combined(&on_plane(1.0)) < c {
            return None;
        }
        on_plane(bisect(0.0, 1.0, |l| mean_combined(&on_plane(l)) - c))
    };
    Some(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_respect_band_and_separation() {
        let d = separated_directions(3, 4, (60.0, 120.0), 45.0);
        assert_eq!(d.len(), 4);
        for (i, a) in d.iter().enumerate() {
            assert!((60.0..=120.0).contains(&a.inclination()));
            for b in &d[i + 1..] {
                assert!(a.angle_to(b) >= 45.0);
            }
        }
    }

    #[test]
    fn reconstruction_hits_all_three_means() {
        for row in [
            ErrorRow::new(19.2, 0.9, 19.2),
            ErrorRow::new(7.1, 3.5, 8.5),
            ErrorRow::new(6.0, 2.2, 6.4),
        ] {
            let frames = reconstruct_row(row).unwrap();
            let az = frames.iter().map(|(t, e)| (e.azimuth() - t.azimuth()).abs()).sum::<f64>() / 2.0;
            let el = frames.iter().map(|(t, e)| (e.elevation() - t.elevation()).abs()).sum::<f64>() / 2.0;
            assert!((az - row.azimuth).abs() < 1e-9);
            assert!((el - row.elevation).abs() < 1e-9);
            assert!((mean_combined(&frames) - row.combined).abs() < 1e-9);
        }
    }

    #[test]
    fn impossible_rows_are_reported() {
        // great-circle error can never exceed azimuth plus elevation error
        assert!(reconstruct_row(ErrorRow::new(2.0, 1.0, 5.0)).is_none());
        // nor fall below the elevation error
        assert!(reconstruct_row(ErrorRow::new(2.0, 3.0, 1.0)).is_none());
    }

    #[test]
    fn turn_taking_covers_duration() {
        let dirs = separated_directions(1, 3, (0.0, 180.0), 45.0);
        let s = turn_taking_scene(&dirs, 1.2, 0.1, 1, 20.0);
        assert_eq!(s.sources.len(), 12);
        assert!(s.validate().is_ok());
    }
}
