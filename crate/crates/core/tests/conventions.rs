//! Simulate, transform, encode and compensate: a plane wave must come back
//! as coefficients proportional to `conj(Y_n^m(Ω))`. This pins the FFT sign,
//! the SH phase convention and the mode-strength convention together.

use num_complex::Complex64;
use sspiv::geometry::{ArrayGeometry, Direction};
use sspiv::harmonics::{sh_values, ShOrder};
use sspiv::shdomain::{compensate, ModeStrengthProfile, ShEncoder};
use sspiv::simulator::{simulate, SceneSpec, SourceSignal, SourceSpec};
use sspiv::stft::{stft_bins, StftParams};

const GAIN_CAP_DB: f64 = 20.0;

#[test]
fn plane_wave_round_trip() {
    let order = ShOrder::new(3);
    let geometry = ArrayGeometry::reference(order).unwrap();
    // 256-sample frames make every 187.5 Hz bin frequency periodic within a
    // frame, so tones two or more bins apart do not leak into each other.
    let params = StftParams {
        frame_ms: 16.0 / 3.0,
        ..StftParams::default()
    };
    let layout = params.layout(48000.0).unwrap();
    assert_eq!(layout.frame_len, 256);
    let tone_bins = [6usize, 10, 14, 18];

    let encoder = ShEncoder::new(&geometry, order).unwrap();
    for (az, incl) in [(0.0, 90.0), (75.0, 20.0), (210.0, 125.0), (333.0, 170.0)] {
        let d = Direction::new(az, incl).unwrap();
        let mut scene = SceneSpec::new(256.0 * 40.0 / 48000.0, 48000.0, 1);
        scene.sources.push(SourceSpec::new(
            d,
            SourceSignal::ToneSet {
                freqs_hz: tone_bins.iter().map(|&k| k as f64 * layout.bin_hz()).collect(),
            },
        ));
        let sim = simulate(&scene, &geometry, order).unwrap();
        let tf = stft_bins(&sim.signal, &params, 6..19).unwrap();
        let sh = encoder.encode(&tf).unwrap();
        let profile = ModeStrengthProfile::new(order, &sh.bin_freqs(), geometry.radius, geometry.baffle, 343.0, GAIN_CAP_DB).unwrap();
        let comp = compensate(&sh, &profile).unwrap();

        let y: Vec<Complex64> = sh_values(&d, order).into_iter().map(|v| v.conj()).collect();
        let y_norm2: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        let cap = 10f64.powf(GAIN_CAP_DB / 20.0);
        for &k in &tone_bins {
            let local = k - 6;
            for n in 0..=3 {
                assert!(profile.multiplier(n, local).norm() < cap, "bin {k} degree {n} is capped");
            }
            for t in 0..comp.num_frames() {
                let a = comp.vector(t, local);
                let c: Complex64 = a.iter().zip(&y).map(|(a, y)| a * y.conj()).sum::<Complex64>() / y_norm2;
                let resid: f64 = a.iter().zip(&y).map(|(a, y)| (a - c * y).norm_sqr()).sum::<f64>().sqrt();
                let norm: f64 = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                assert!(norm > 0.0);
                assert!(resid < 1e-3 * norm, "dir ({az},{incl}) bin {k} frame {t}: {}", resid / norm);
            }
        }
    }
}
