//! Statistical examples checked against their generating distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dtecm_core::characterization::fit_ci;
use dtecm_core::foliage::{
    fit_foliage_loss, rotate_zyz, solve_pose, FoliageLossModel, FoliageTwin, PoseReference, PoseRotation,
};
use dtecm_core::geometry::wrap_deg;
use dtecm_core::link::{sample_rx_positions, LinkConfig};
use dtecm_core::raytrace::fspl;
use dtecm_core::scene::Building;
use dtecm_core::seed::derive_seed;
use dtecm_core::stochastic::draw_lsp;
use dtecm_core::synthesis::{assemble, pdp, SynthesisConfig};
use dtecm_core::{Direction, Scene, StateParamSet, Vec3};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn los_draw_means_match_configuration() {
    let p = StateParamSet::campaign().los;
    let n = 10_000;
    let draws: Vec<_> = (0..n).map(|i| draw_lsp(&p, derive_seed(11, i))).collect();
    let kf = draws.iter().map(|d| d.kf_db).sum::<f64>() / n as f64;
    let clusters = draws.iter().map(|d| d.n_clusters as f64).sum::<f64>() / n as f64;
    assert!((kf - 13.09).abs() <= 0.5, "mean KF {kf}");
    assert!((clusters - 2.12).abs() <= 0.1, "mean cluster count {clusters}");
}

/// Moves `d` by `sigma` degrees in a uniformly random direction.
fn perturb(d: Direction, sigma: f64, r: &mut ChaCha8Rng) -> Direction {
    let u = d.unit_vector();
    let helper = if u.z.abs() < 0.9 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(1.0, 0.0, 0.0) };
    let e1 = u.cross(helper).normalized();
    let e2 = u.cross(e1);
    let psi: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let t = sigma.to_radians();
    let v = u * t.cos() + (e1 * psi.cos() + e2 * psi.sin()) * t.sin();
    v.direction()
}

#[test]
fn noisy_references_still_recover_pose() {
    let truth = PoseRotation::new(30.0, 50.0, -70.0);
    let mut r = rng(12);
    let refs: Vec<PoseReference> = (0..12)
        .map(|_| {
            let camera = Direction::new(r.random_range(-180.0..180.0), r.random_range(-60.0..60.0));
            PoseReference { camera, world: perturb(rotate_zyz(truth, camera), 0.5, &mut r) }
        })
        .collect();
    let sol = solve_pose(&refs).unwrap();
    assert!(sol.residual_rms_deg > 0.0);
    for (got, want) in
        [(sol.pose.alpha_z1, truth.alpha_z1), (sol.pose.alpha_y, truth.alpha_y), (sol.pose.alpha_z2, truth.alpha_z2)]
    {
        assert!(wrap_deg(got - want).abs() < 1.0, "{:?}", sol.pose);
    }
}

#[test]
fn noisy_ci_data_recovers_exponent_and_shadowing() {
    let f0 = 220e9;
    let anchor = -fspl(f0, 1.0).unwrap();
    let sf = Normal::new(0.0, 1.22).unwrap();
    for trial in 0..20 {
        let mut r = rng(derive_seed(13, trial));
        let data: Vec<(f64, f64)> = (0..1000)
            .map(|_| {
                let d: f64 = r.random_range(34.0..410.0);
                (d, anchor + 19.3 * d.log10() + sf.sample(&mut r))
            })
            .collect();
        let fit = fit_ci(&data, f0).unwrap();
        assert!((1.88..=1.98).contains(&fit.n), "n = {}", fit.n);
        assert!((1.1..=1.35).contains(&fit.sf_sigma_db), "sigma = {}", fit.sf_sigma_db);
    }
}

#[test]
fn noisy_foliage_fit_recovers_slope_and_spread() {
    let m = FoliageLossModel::default();
    let noise = Normal::new(m.mu_chi_db, m.sigma_chi_db).unwrap();
    let mut passed = 0;
    for trial in 0..30 {
        let mut r = rng(derive_seed(14, trial));
        let samples: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let f = i as f64 / 199.0;
                (f, m.deterministic(f) + noise.sample(&mut r))
            })
            .collect();
        let fit = fit_foliage_loss(&samples).unwrap();
        let slope_ok = ((fit.slope_db - m.slope_db) / m.slope_db).abs() <= 0.15;
        passed += (slope_ok && (3.5..=5.2).contains(&fit.sigma_chi_db)) as usize;
    }
    assert!(passed >= 27, "{passed}/30 trials within tolerance");
}

#[test]
fn pdp_conserves_power_on_random_realizations() {
    let mut scene = Scene::free_space(Vec3::new(0.0, 0.0, 16.6), 220e9);
    scene.buildings = vec![Building::rectangle([20.0, 10.0], [70.0, 40.0], 20.0)];
    let twin = FoliageTwin::clear(1.0).unwrap();
    let params = StateParamSet::campaign();
    let mut r = rng(15);
    for i in 0..100 {
        let rx = Vec3::new(r.random_range(-200.0..200.0), r.random_range(-200.0..0.0), 1.6);
        let real = assemble(&scene, &twin, &params, rx, i, &SynthesisConfig::default()).unwrap();
        let profile = pdp(&real).unwrap();
        assert!(profile.windows(2).all(|w| w[0].0 <= w[1].0));
        let sum: f64 = profile.iter().map(|p| 10f64.powf(p.1 / 10.0)).sum();
        assert!((sum - real.total_power()).abs() <= 1e-9 * real.total_power());
    }
}

#[test]
fn drops_are_uniform_over_area() {
    let cfg = LinkConfig { cell_radius_m: 300.0, n_drops: 100_000, sector: (0.0, 360.0), ..LinkConfig::default() };
    let tx = Vec3::new(0.0, 0.0, 16.6);
    let drops = sample_rx_positions(tx, &cfg, 1.6, 16);
    let mean = drops.iter().map(|p| p.x.hypot(p.y)).sum::<f64>() / drops.len() as f64;
    let expected = 2.0 / 3.0 * cfg.cell_radius_m;
    assert!((mean - expected).abs() <= 0.02 * expected, "mean radius {mean}");
}

#[test]
fn doubling_distance_costs_six_db() {
    for f in [0.1e12, 0.22e12, 1e12] {
        for d in [1.0, 7.5, 120.0] {
            let step = fspl(f, 2.0 * d).unwrap() - fspl(f, d).unwrap();
            assert!((step + 6.0206).abs() < 1e-4, "{step}");
        }
    }
}
