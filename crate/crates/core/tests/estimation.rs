use gridfree_core::baseline::{edc_model_order, periodogram_peak_search, PeriodogramConfig};
use gridfree_core::dataset::circular_distance;
use gridfree_core::estimate::{EstimationResult, Method};
use gridfree_core::refine::{crb_tau_alpha, gauss_newton_refine, RefineConfig};
use gridfree_core::signal::{add_noise, synthesize, ChannelSnapshot, PathSet, SamplingGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn observe(paths: &PathSet, grid: &SamplingGrid, snr_db: f64, seed: u64) -> (ChannelSnapshot, f64) {
    let s = synthesize(paths, grid).unwrap();
    let power = s.norm_squared() / s.len() as f64;
    let sigma2 = power / 10f64.powf(snr_db / 10.0);
    let y = add_noise(&s, sigma2, seed).unwrap();
    (ChannelSnapshot::new(y, *grid).unwrap(), sigma2)
}

#[test]
fn ml_refinement_is_efficient_for_one_path() {
    let grid = SamplingGrid::normalized(16, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let truth = PathSet::new(vec![Complex64::from_polar(1.0, 0.7)], vec![0.313], vec![0.641]).unwrap();
    let trials = 300;
    let (mut se_t, mut se_a, mut bound) = (0.0, 0.0, (0.0, 0.0));
    for i in 0..trials {
        let (obs, sigma2) = observe(&truth, &grid, 20.0, i);
        bound = crb_tau_alpha(&truth, &grid, sigma2).unwrap()[0];
        let mut init = truth.clone();
        init.taus[0] += rng.random_range(-0.2..0.2) / 16.0;
        init.alphas[0] += rng.random_range(-0.2..0.2) / 16.0;
        let out = gauss_newton_refine(
            &EstimationResult::new(init, Method::GnOracleInit),
            &obs,
            Some(sigma2),
            &RefineConfig::default(),
        )
        .unwrap();
        se_t += circular_distance(out.paths.taus[0], truth.taus[0]).powi(2);
        se_a += circular_distance(out.paths.alphas[0], truth.alphas[0]).powi(2);
    }
    let (mt, ma) = (se_t / trials as f64, se_a / trials as f64);
    assert!(mt / bound.0 > 0.5 && mt / bound.0 < 2.0, "tau ratio {}", mt / bound.0);
    assert!(ma / bound.1 > 0.5 && ma / bound.1 < 2.0, "alpha ratio {}", ma / bound.1);
}

#[test]
fn basin_of_attraction_from_fractional_bin_offset() {
    let grid = SamplingGrid::normalized(16, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = RefineConfig {
        max_iters: 20,
        ..Default::default()
    };
    for _ in 0..50 {
        let truth = PathSet::new(
            vec![Complex64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..std::f64::consts::TAU))],
            vec![rng.random()],
            vec![rng.random()],
        )
        .unwrap();
        let obs = ChannelSnapshot::new(synthesize(&truth, &grid).unwrap(), grid).unwrap();
        let mut init = truth.clone();
        init.taus[0] += 0.4 / 16.0;
        init.alphas[0] += 0.4 / 16.0;
        init.gammas.clear();
        let out = gauss_newton_refine(&EstimationResult::new(init, Method::GnOracleInit), &obs, None, &cfg).unwrap();
        assert!(circular_distance(out.paths.taus[0], truth.taus[0]) < 1e-8);
        assert!(circular_distance(out.paths.alphas[0], truth.alphas[0]) < 1e-8);
    }
}

#[test]
fn periodogram_hits_quantization_floor() {
    let grid = SamplingGrid::normalized(16, 16).unwrap();
    let cfg = PeriodogramConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let trials = 600;
    let mut se = 0.0;
    for i in 0..trials {
        let truth = PathSet::new(vec![Complex64::new(1.0, 0.0)], vec![rng.random()], vec![rng.random()]).unwrap();
        let (obs, _) = observe(&truth, &grid, 50.0, i);
        let est = periodogram_peak_search(&obs, 1, &cfg).unwrap();
        se += circular_distance(est.paths.taus[0], truth.taus[0]).powi(2);
    }
    let floor = (1.0 / 64.0f64).powi(2) / 12.0;
    let ratio = se / trials as f64 / floor;
    assert!((ratio - 1.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn edc_finds_separated_paths_at_high_snr() {
    let grid = SamplingGrid::normalized(16, 16).unwrap();
    let cfg = PeriodogramConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut hits = 0;
    for i in 0..60 {
        let truth = PathSet::new(
            (0..3).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))).collect(),
            (0..3).map(|p| (p as f64 + rng.random_range(0.3..0.7)) / 3.0).collect(),
            (0..3).map(|p| ((p * 2) as f64 + rng.random_range(0.3..0.7)) / 6.0).collect(),
        )
        .unwrap();
        let (obs, _) = observe(&truth, &grid, 30.0, i);
        hits += (edc_model_order(&obs, 8, &cfg).unwrap() == 3) as usize;
    }
    assert!(hits >= 57, "{hits}/60");
}
