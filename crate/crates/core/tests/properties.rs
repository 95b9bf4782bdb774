//! Cross-module invariants as property tests.

use proptest::prelude::*;

use hsi_diffusion::denoise::band_groups;
use hsi_diffusion::diffusion::{noisy_at, posterior_mean, predict_x0, reverse_step};
use hsi_diffusion::metrics;
use hsi_diffusion::noise_sim::{apply_noise, AwgnLevel, BandRule, NoiseSpec};
use hsi_diffusion::par::Execution;
use hsi_diffusion::rng;
use hsi_diffusion::schedule::NoiseSchedule;
use hsi_diffusion::HsiCube;

fn unit_cube(h: usize, w: usize, b: usize, seed: u64) -> HsiCube {
    use rand::Rng;
    let mut r = rng::seeded(seed);
    HsiCube::from_fn(h, w, b, |_, _, _| r.random::<f32>()).unwrap()
}

fn normal(h: usize, w: usize, b: usize, seed: u64) -> HsiCube {
    HsiCube::standard_normal(h, w, b, &mut rng::seeded(seed)).unwrap()
}

fn max_abs_diff(a: &HsiCube, b: &HsiCube) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (f64::from(*x) - f64::from(*y)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_tables_are_ordered(steps in 2usize..400, lo in 1e-5f64..0.01, span in 0.0f64..0.05) {
        let s = NoiseSchedule::linear(steps, lo, lo + span).unwrap();
        prop_assert_eq!(s.posterior_sigma(1).unwrap(), 0.0);
        let mut prev = 1.0;
        for t in 1..=steps {
            let ab = s.alpha_bar(t).unwrap();
            prop_assert!(ab > 0.0 && ab < prev);
            prop_assert!((ab + s.one_minus_alpha_bar(t).unwrap() - 1.0).abs() < 1e-12);
            if t >= 2 {
                let sigma = s.posterior_sigma(t).unwrap();
                prop_assert!(sigma > 0.0 && sigma < s.beta(t).unwrap().sqrt());
            }
            prev = ab;
        }
        prop_assert!(s.alpha_bar(0).unwrap() == 1.0);
        prop_assert!(s.alpha_bar(steps + 1).is_err());
    }

    #[test]
    fn predict_x0_undoes_noisy_at(t in 1usize..=1000, seed in any::<u64>()) {
        let s = NoiseSchedule::default();
        let x0 = unit_cube(4, 4, 3, seed);
        let eps = normal(4, 4, 3, seed ^ 1);
        let back = predict_x0(&noisy_at(&x0, &eps, t, &s).unwrap(), &eps, t, &s).unwrap();
        // f32 storage error is amplified by 1 / sqrt(alpha_bar)
        let tol = 1e-5 / s.alpha_bar(t).unwrap().sqrt();
        prop_assert!(max_abs_diff(&back, &x0) < tol);
    }

    #[test]
    fn both_posterior_mean_forms_agree(t in 1usize..=1000, seed in any::<u64>()) {
        let s = NoiseSchedule::default();
        let x_t = normal(4, 4, 2, seed);
        let eps = normal(4, 4, 2, seed ^ 2);
        let a = reverse_step(&x_t, &eps, t, &s, None).unwrap();
        let b = posterior_mean(&x_t, &predict_x0(&x_t, &eps, t, &s).unwrap(), t, &s).unwrap();
        let scale = a.data().iter().map(|v| f64::from(v.abs())).fold(1.0, f64::max);
        prop_assert!(max_abs_diff(&a, &b) <= 1e-6 * scale);
    }

    #[test]
    fn metrics_are_symmetric_and_bounded(seed in any::<u64>(), k in 0.01f32..1.0) {
        let a = unit_cube(12, 12, 3, seed);
        let b = HsiCube::from_fn(12, 12, 3, |band, r, c| {
            (a.get(band, r, c) + k * (((r * 7 + c * 3 + band) % 5) as f32 - 2.0) / 10.0).clamp(0.0, 1.0)
        }).unwrap();
        let ab = metrics::evaluate(&a, &b).unwrap();
        let ba = metrics::evaluate(&b, &a).unwrap();
        prop_assert!((ab.cc - ba.cc).abs() < 1e-12);
        prop_assert!((ab.mpsnr - ba.mpsnr).abs() < 1e-12);
        prop_assert!((ab.mssim - ba.mssim).abs() < 1e-12);
        prop_assert!((ab.sam - ba.sam).abs() < 1e-9);
        prop_assert!(ab.cc <= 1.0 && ab.cc >= -1.0);
        prop_assert!(ab.mpsnr <= metrics::PSNR_CAP_DB);
        prop_assert!(ab.mssim <= 1.0 + 1e-12);
        prop_assert!((0.0..=180.0).contains(&ab.sam));
    }

    #[test]
    fn sam_ignores_spectral_scale(seed in any::<u64>(), k in 0.1f32..10.0) {
        let a = unit_cube(6, 6, 5, seed);
        let b = unit_cube(6, 6, 5, seed ^ 3);
        let scaled = HsiCube::from_fn(6, 6, 5, |band, r, c| b.get(band, r, c) * k).unwrap();
        let x = metrics::sam(&a, &b).unwrap();
        let y = metrics::sam(&a, &scaled).unwrap();
        prop_assert!((x - y).abs() < 1e-4, "{} vs {}", x, y);
    }

    #[test]
    fn simulated_noise_stays_in_range_and_replays(seed in any::<u64>(), sigma in 0.0f64..100.0) {
        let clean = unit_cube(8, 8, 6, seed);
        let mut spec = NoiseSpec::hybrid(seed);
        spec.awgn = Some(AwgnLevel::PerBandUniform { lo: 0.0, hi: sigma });
        let a = apply_noise(&clean, &spec).unwrap();
        prop_assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(&a, &apply_noise(&clean, &spec).unwrap());
        let replayed = NoiseSpec::from_text(&spec.to_text()).unwrap();
        prop_assert_eq!(a, apply_noise(&clean, &replayed).unwrap());
    }

    #[test]
    fn band_rules_pick_sorted_distinct_bands(bands in 1usize..64, f in 0.0f64..=1.0, seed in any::<u64>()) {
        let picked = BandRule::RandomFraction(f).resolve(bands, seed).unwrap();
        prop_assert!(!picked.is_empty() && picked.len() <= bands);
        prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(picked.iter().all(|&b| b < bands));
        prop_assert_eq!(picked, BandRule::RandomFraction(f).resolve(bands, seed).unwrap());
    }

    #[test]
    fn awgn_levels_round_trip_as_text(lo in 0.0f64..50.0, span in 0.0f64..50.0) {
        for level in [AwgnLevel::Fixed(lo), AwgnLevel::PerBandUniform { lo, hi: lo + span }] {
            let back: AwgnLevel = level.to_string().parse().unwrap();
            prop_assert_eq!(back, level);
        }
    }

    #[test]
    fn band_groups_cover_every_band(total in 1usize..200, group in 1usize..32) {
        prop_assume!(group <= total);
        let starts = band_groups(total, group).unwrap();
        let mut covered = vec![false; total];
        for &s in &starts {
            prop_assert!(s + group <= total);
            covered[s..s + group].iter_mut().for_each(|c| *c = true);
        }
        prop_assert!(covered.iter().all(|&c| c));
        prop_assert_eq!(*starts.last().unwrap(), total - group);
    }

    #[test]
    fn execution_modes_agree(n in 0usize..500) {
        let f = |i: usize| (i as f64).sin() * 1e3;
        prop_assert_eq!(Execution::Sequential.map(n, f), Execution::Parallel.map(n, f));
    }
}
