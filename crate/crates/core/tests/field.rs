use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use sspiv::geometry::{ArrayGeometry, Direction};
use sspiv::harmonics::ShOrder;
use sspiv::shdomain::{compensate, ModeStrengthProfile, ShEncoder};
use sspiv::signal::MultichannelSignal;
use sspiv::simulator::{simulate, SceneSpec, SourceSignal, SourceSpec};
use sspiv::sspiv::{compute_sspiv_field, covariance, Band, RegionLayout, SmoothingParams, VoteWeighting};
use sspiv::stft::{stft_bins, StftParams};
use sspiv::{Pipeline, PipelineConfig};

fn pipeline() -> Pipeline {
    Pipeline::from_config(PipelineConfig::default()).unwrap()
}

fn angle(v: &nalgebra::Vector3<f64>, d: &Direction) -> f64 {
    let u = d.unit_vector();
    v.cross(&u).norm().atan2(v.dot(&u)).to_degrees()
}

fn scene(duration: f64, dir: Direction, signal: SourceSignal) -> SceneSpec {
    let mut s = SceneSpec::new(duration, 48000.0, 17);
    s.sources.push(SourceSpec::new(dir, signal));
    s
}

fn noise() -> SourceSignal {
    SourceSignal::BandlimitedNoise {
        low_hz: 300.0,
        high_hz: 3400.0,
    }
}

#[test]
fn single_source_votes_cluster_on_the_source() {
    let p = pipeline();
    let truth = Direction::new(60.0, 70.0).unwrap();
    let sim = simulate(&scene(1.0, truth, SourceSignal::SpeechLikeBursts), p.geometry(), p.config().order()).unwrap();
    let field = p.field(&sim.signal).unwrap();
    let near = field.votes.iter().filter(|v| angle(&v.direction, &truth) < 10.0).count();
    assert!(near as f64 >= 0.9 * field.len() as f64, "{near} of {}", field.len());
}

#[test]
fn noiseless_plane_wave_is_recovered_in_every_band() {
    let p = pipeline();
    for (az, incl) in [(10.0, 90.0), (135.0, 30.0), (250.0, 160.0)] {
        let truth = Direction::new(az, incl).unwrap();
        let sim = simulate(&scene(0.3, truth, noise()), p.geometry(), p.config().order()).unwrap();
        let field = p.field(&sim.signal).unwrap();
        for band in 0..7 {
            let votes: Vec<_> = field.votes.iter().filter(|v| v.band == band).collect();
            assert!(!votes.is_empty(), "band {band}");
            for v in votes {
                assert!(angle(&v.direction, &truth) < 0.5, "band {band}");
                assert!((v.direction.norm() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn vote_count_is_regions_times_bands() {
    let p = pipeline();
    let sim = simulate(&scene(0.3, Direction::new(0.0, 45.0).unwrap(), noise()), p.geometry(), p.config().order()).unwrap();
    let field = p.field(&sim.signal).unwrap();
    // 14400 samples -> 297 frames of 192 at hop 48; 16-frame windows -> 282
    assert_eq!(field.len(), 282 * 7);
    for pair in field.votes.windows(2) {
        assert!((pair[0].frame, pair[0].band) < (pair[1].frame, pair[1].band));
    }
}

#[test]
fn vote_directions_are_scale_invariant() {
    let p = pipeline();
    let mut sc = scene(0.3, Direction::new(200.0, 100.0).unwrap(), SourceSignal::SpeechLikeBursts);
    sc.snr_db = Some(10.0);
    let sim = simulate(&sc, p.geometry(), p.config().order()).unwrap();
    let a = p.field(&sim.signal).unwrap();
    let b = p.field(&sim.signal.scaled(3.7)).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.votes.iter().zip(&b.votes) {
        assert!((x.direction - y.direction).norm() < 1e-9);
    }
}

#[test]
fn field_is_independent_of_thread_count() {
    let p = pipeline();
    let mut sc = scene(0.3, Direction::new(20.0, 80.0).unwrap(), SourceSignal::SpeechLikeBursts);
    sc.snr_db = Some(5.0);
    let sim = simulate(&sc, p.geometry(), p.config().order()).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| p.run(&sim.signal).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.field, four.field);
    assert_eq!(one.smoothed, four.smoothed);
    assert_eq!(one.estimates, four.estimates);
}

#[test]
fn alternating_sources_give_two_peaks() {
    let p = pipeline();
    let truths = [Direction::new(30.0, 90.0).unwrap(), Direction::new(120.0, 90.0).unwrap()];
    let mut sc = SceneSpec::new(1.0, 48000.0, 4);
    for slot in 0..10 {
        let mut s = SourceSpec::new(truths[slot % 2], noise());
        s.onset_s = slot as f64 * 0.1;
        s.offset_s = Some((slot + 1) as f64 * 0.1);
        sc.sources.push(s);
    }
    let sim = simulate(&sc, p.geometry(), p.config().order()).unwrap();
    let out = p.run(&sim.signal).unwrap();
    assert!(out.estimates.len() >= 2);
    let top: Vec<Direction> = out.estimates[..2].iter().map(|e| e.direction).collect();
    for t in &truths {
        let best = top.iter().map(|d| d.angle_to(t)).fold(f64::INFINITY, f64::min);
        assert!(best < 5.0, "{best}");
    }
    // most votes belong to one of the two modes
    let near = out
        .field
        .votes
        .iter()
        .filter(|v| truths.iter().any(|t| angle(&v.direction, t) < 10.0))
        .count();
    assert!(near as f64 > 0.8 * out.field.len() as f64);
}

/// Spatially white sensor noise: the long-run covariance of the compensated
/// SH vectors is `σ_w² · mean_b(D_b P Pᴴ D_bᴴ)`, with `P` the encoder, `D_b`
/// the per-bin compensation and `σ_w²` the per-bin noise variance.
#[test]
fn white_noise_covariance_matches_monte_carlo_expectation() {
    let order = ShOrder::new(3);
    let geometry = ArrayGeometry::reference(order).unwrap();
    let fs = 48000.0;
    let n = (20.0 * fs) as usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let channels: Vec<Vec<f64>> = (0..32)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let signal = MultichannelSignal::new(channels, fs).unwrap();
    let params = StftParams::default();
    let layout = params.layout(fs).unwrap();
    let tf = stft_bins(&signal, &params, 10..12).unwrap();
    let enc = ShEncoder::new(&geometry, order).unwrap();
    let sh = enc.encode(&tf).unwrap();
    let profile = ModeStrengthProfile::new(order, &sh.bin_freqs(), geometry.radius, geometry.baffle, 343.0, 20.0).unwrap();
    let comp = compensate(&sh, &profile).unwrap();

    let frames = comp.num_frames();
    let regions = RegionLayout::with_sizes(
        frames,
        vec![Band {
            bins: 10..12,
            center_hz: 10.5 * layout.bin_hz(),
        }],
    )
    .unwrap();
    let r = covariance(&comp, frames / 2, 0, &regions).unwrap().unwrap();

    let window_energy: f64 = params.window.coefficients(layout.frame_len).iter().map(|w| w * w).sum();
    let p = enc.matrix();
    let degree: Vec<usize> = order.iter().map(|(n, _)| n).collect();
    let mut expected = DMatrix::<Complex64>::zeros(16, 16);
    for b in 0..2 {
        let d = DMatrix::from_fn(16, 16, |i, j| {
            if i == j {
                profile.multiplier(degree[i], b)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        expected += &d * p * p.adjoint() * d.adjoint() * Complex64::new(window_energy / 2.0, 0.0);
    }
    for i in 0..16 {
        let e = expected[(i, i)].re;
        assert!((r.matrix[(i, i)].re / e - 1.0).abs() < 0.05, "diag {i}");
        for j in 0..16 {
            let scale = (expected[(i, i)].re * expected[(j, j)].re).sqrt();
            assert!((r.matrix[(i, j)] - expected[(i, j)]).norm() < 0.05 * scale, "({i},{j})");
        }
    }
}

#[test]
fn silence_gives_no_votes() {
    let p = pipeline();
    let signal = MultichannelSignal::new(vec![vec![0.0; 9600]; 32], 48000.0).unwrap();
    assert!(p.field(&signal).unwrap().is_empty());
    let out = p.run(&signal).unwrap();
    assert!(out.estimates.is_empty());
}

#[test]
fn defaults_tile_seven_bands() {
    let layout = StftParams::default().layout(48000.0).unwrap();
    let regions = RegionLayout::new(&SmoothingParams::default(), &layout).unwrap();
    assert_eq!((regions.frames_per_region, regions.bins_per_band, regions.bands.len()), (16, 2, 7));
    let sig = MultichannelSignal::new(vec![vec![0.0; 4800]; 32], 48000.0).unwrap();
    let tf = stft_bins(&sig, &StftParams::default(), regions.bin_span()).unwrap();
    let enc = ShEncoder::new(&ArrayGeometry::reference(ShOrder::new(3)).unwrap(), ShOrder::new(3)).unwrap();
    let field = compute_sspiv_field(&enc.encode(&tf).unwrap(), &regions, VoteWeighting::Uniform).unwrap();
    assert!(field.is_empty());
}
