use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use lowlat::enhance::{predict_wrapper, repeat_last, DeepFilterApply, DeepFilterCoeffs, Identity, OracleLookahead};
use lowlat::fbe::{run_fbe, FixedFilter, FrameFilter};
use lowlat::transforms::{analyze_signal, dft_stacked_basis, load_basis, stream_ola, write_matrix, Role, Transform};
use lowlat::windows::{pr_error, WindowPair};
use lowlat::{Mode, Signal, StreamConfig, TransformBasis};

const RATE: u32 = 16_000;

fn noise(seed: u64, len: usize) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Signal::new((0..len).map(|_| StandardNormal.sample(&mut rng)).collect(), RATE).unwrap()
}

fn canonical() -> Arc<TransformBasis> {
    Arc::new(TransformBasis::Canonical)
}

fn identity_ola(x: &Signal, cfg: &StreamConfig) -> Signal {
    let pair = WindowPair::for_config(cfg).unwrap();
    stream_ola(x, cfg, &pair, canonical(), Identity).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `(L_a, L_s, N)` with `L_s` even and `L_a >= L_s`.
fn geometry() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..=64, 0usize..=64, 0usize..=32).prop_map(|(half, extra, pad)| {
        let ls = 2 * half;
        let la = ls + 2 * extra;
        (la, ls, la + 2 * pad)
    })
}

fn config_for(la: usize, ls: usize, n: usize) -> StreamConfig {
    if la == ls {
        StreamConfig::symmetric(RATE, la, n)
    } else {
        StreamConfig::asymmetric(RATE, la, ls, n)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_pairs_overlap_add_to_one((la, ls, _n) in geometry()) {
        let pair = WindowPair::for_config(&config_for(la, ls, la)).unwrap();
        prop_assert!(pr_error(&pair) <= 1e-9);
    }

    #[test]
    fn identity_reconstructs_in_steady_state((la, ls, n) in geometry(), seed in any::<u64>()) {
        let cfg = config_for(la, ls, n);
        let x = noise(seed, la * 6 + 500);
        let y = identity_ola(&x, &cfg);
        let trim = la + cfg.hop;
        prop_assert!(max_diff(&x.samples[trim..x.len() - trim], &y.samples[trim..x.len() - trim]) <= 1e-9);
    }

    #[test]
    fn identity_is_idempotent((la, ls, n) in geometry(), seed in any::<u64>()) {
        let cfg = config_for(la, ls, n);
        let x = noise(seed, la * 6 + 300);
        let once = identity_ola(&x, &cfg);
        let twice = identity_ola(&once, &cfg);
        let trim = 2 * (la + cfg.hop);
        prop_assert!(max_diff(&once.samples[trim..x.len() - trim], &twice.samples[trim..x.len() - trim]) <= 1e-9);
    }

    #[test]
    fn fixed_deep_filter_pipeline_is_linear(
        (la, ls, n) in geometry(),
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let cfg = config_for(la, ls, n);
        let pair = WindowPair::for_config(&cfg).unwrap();
        let len = la * 5 + 200;
        let bins = n / 2 + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = DeepFilterCoeffs::zeros(bins);
        for t in &mut coeffs.taps {
            for row in t.iter_mut() {
                for z in row.iter_mut() {
                    *z = Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                }
            }
        }
        let frames = cfg.frame_count(len) + 4;
        let run = |x: &Signal| {
            stream_ola(x, &cfg, &pair, canonical(), DeepFilterApply::new(vec![coeffs.clone(); frames])).unwrap()
        };
        let x1 = noise(seed ^ 1, len);
        let x2 = noise(seed ^ 2, len);
        let mixed = Signal::new(x1.samples.iter().zip(&x2.samples).map(|(p, q)| a * p + b * q).collect(), RATE).unwrap();
        let (y1, y2, ym) = (run(&x1), run(&x2), run(&mixed));
        let expected: Vec<f64> = y1.samples.iter().zip(&y2.samples).map(|(p, q)| a * p + b * q).collect();
        prop_assert!(max_diff(&ym.samples, &expected) <= 1e-9);
    }

    #[test]
    fn exact_fbe_matches_direct_convolution(hop in 2usize..=96, taps_len in 1usize..=97, seed in any::<u64>()) {
        let taps_len = taps_len.min(hop + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let taps: Vec<f64> = (0..taps_len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let cfg = StreamConfig::fbe(RATE, hop, 2 * hop);
        let x = noise(seed ^ 3, 9 * hop + 5);
        let filter = FrameFilter::from_time_taps(&taps, 2 * hop).unwrap();
        let y = run_fbe(&x, &cfg, FixedFilter(filter)).unwrap();
        for n in 0..x.len() {
            let direct: f64 = taps.iter().enumerate().filter(|(j, _)| *j <= n).map(|(j, h)| h * x.samples[n - j]).sum();
            prop_assert!((y.samples[n] - direct).abs() <= 1e-9, "sample {}", n);
        }
    }

    #[test]
    fn perturbing_the_future_keeps_the_committed_past(
        (la, ls, n) in geometry(),
        seed in any::<u64>(),
        cut in 0.2f64..0.9,
    ) {
        let cfg = config_for(la, ls, n);
        let total = lowlat::derive_latency(&cfg).unwrap().total;
        let x = noise(seed, la * 6 + 400);
        let t = total + 1 + ((x.len() - total - 1) as f64 * cut) as usize;
        let mut perturbed = x.clone();
        for v in &mut perturbed.samples[t..] {
            *v = -*v * 2.0 + 1.0;
        }
        let pair = WindowPair::for_config(&cfg).unwrap();
        let coeffs = vec![DeepFilterCoeffs::identity(n / 2 + 1); cfg.frame_count(x.len()) + 4];
        let a = stream_ola(&x, &cfg, &pair, canonical(), DeepFilterApply::new(coeffs.clone())).unwrap();
        let b = stream_ola(&perturbed, &cfg, &pair, canonical(), DeepFilterApply::new(coeffs)).unwrap();
        let horizon = t - total + 1;
        prop_assert_eq!(&a.samples[..horizon], &b.samples[..horizon]);
    }

    #[test]
    fn lookahead_oracle_with_true_next_frame_matches_identity(half in 4usize..=64, seed in any::<u64>(), frames in 1usize..=2) {
        let w = 2 * half;
        let cfg = StreamConfig::symmetric(RATE, w, w);
        let pred = cfg.with_mode(Mode::PredictAhead { frames });
        let x = noise(seed, w * 12 + 37);
        let pair = WindowPair::for_config(&cfg).unwrap();
        let transform = Transform::for_config(&cfg, canonical()).unwrap();
        let future = analyze_signal(&x.samples, &transform, &pair).unwrap();
        let oracle = predict_wrapper(OracleLookahead::new(future), frames).unwrap();
        let y = stream_ola(&x, &pred, &pair, canonical(), oracle).unwrap();
        let reference = identity_ola(&x, &cfg);
        let steady = w * (frames + 1)..x.len() - 2 * w;
        prop_assert_eq!(&y.samples[steady.clone()], &reference.samples[steady]);
    }

    #[test]
    fn repeat_last_on_hop_periodic_signal_matches_identity(half in 4usize..=64, seed in any::<u64>()) {
        let w = 2 * half;
        let hop = half;
        let period = noise(seed, hop).samples;
        let x = Signal::new(period.iter().copied().cycle().take(hop * 40).collect(), RATE).unwrap();
        let cfg = StreamConfig::symmetric(RATE, w, w);
        let pred = cfg.with_mode(Mode::PredictAhead { frames: 1 });
        let pair = WindowPair::for_config(&cfg).unwrap();
        let y = stream_ola(&x, &pred, &pair, canonical(), predict_wrapper(repeat_last(), 1).unwrap()).unwrap();
        let reference = identity_ola(&x, &cfg);
        let steady = 2 * w..x.len() - 2 * w;
        prop_assert_eq!(&y.samples[steady.clone()], &reference.samples[steady]);
    }
}

#[test]
fn stacked_dft_basis_files_match_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let x = noise(21, 6_000);
    for cfg in [
        StreamConfig::symmetric(RATE, 320, 320),
        StreamConfig::asymmetric(RATE, 320, 48, 320),
        StreamConfig::symmetric(RATE, 80, 320),
    ] {
        let (a, s) = dft_stacked_basis(cfg.transform_size, cfg.analysis_len, cfg.synthesis_len);
        let ap = dir.path().join("analysis.bin");
        let sp = dir.path().join("synthesis.bin");
        write_matrix(&ap, &a, Role::Analysis, None).unwrap();
        write_matrix(&sp, &s, Role::Synthesis, None).unwrap();
        let learned = Arc::new(load_basis(&ap, &sp, &cfg, false).unwrap());
        let pair = WindowPair::for_config(&cfg).unwrap();
        let y = stream_ola(&x, &cfg, &pair, learned, Identity).unwrap();
        let reference = identity_ola(&x, &cfg);
        let peak = x.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // the file stores f32, so agreement is bounded by single precision
        let err = max_diff(&y.samples, &reference.samples) / peak;
        assert!(err < 1e-7, "{cfg}: {err:e}");
    }
}
