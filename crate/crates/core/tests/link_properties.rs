use proptest::prelude::*;

use dtecm_core::link::{sample_rx_positions, snr, summarize, LinkConfig};
use dtecm_core::Vec3;

fn path_losses() -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(prop::option::weighted(0.9, 60.0..160.0f64), 1..200)
}

proptest! {
    #[test]
    fn summary_is_bounded_and_monotone_in_gain(
        pls in path_losses(),
        g in 0.0..80.0f64,
        dg in 0.0..30.0f64,
        threshold in -10.0..20.0f64,
    ) {
        let low = LinkConfig { total_gain_db: g, snr_threshold_db: threshold, ..LinkConfig::default() };
        let high = LinkConfig { total_gain_db: g + dg, ..low };
        let a = summarize(&pls, &low).unwrap();
        let b = summarize(&pls, &high).unwrap();
        for s in [a, b] {
            prop_assert!((0.0..=1.0).contains(&s.coverage_ratio));
            prop_assert!(s.mean_se_bps_hz >= 0.0);
        }
        prop_assert!(b.mean_se_bps_hz >= a.mean_se_bps_hz);
        prop_assert!(b.coverage_ratio >= a.coverage_ratio);
    }

    #[test]
    fn outage_drops_add_nothing(pls in path_losses()) {
        let cfg = LinkConfig::default();
        let served: Vec<Option<f64>> = pls.iter().copied().filter(Option::is_some).collect();
        prop_assume!(!served.is_empty());
        let all = summarize(&pls, &cfg).unwrap();
        let only = summarize(&served, &cfg).unwrap();
        let sum_all = all.mean_se_bps_hz * pls.len() as f64;
        let sum_served = only.mean_se_bps_hz * served.len() as f64;
        prop_assert!((sum_all - sum_served).abs() <= 1e-9 * sum_served.max(1.0));
        prop_assert_eq!(all.n_outage, pls.len() - served.len());
    }

    #[test]
    fn antenna_gain_shifts_snr_one_to_one(pl in 40.0..200.0f64, g in 0.0..80.0f64) {
        let a = LinkConfig { total_gain_db: g, ..LinkConfig::default() };
        let b = LinkConfig { total_gain_db: g + 10.0, ..a };
        prop_assert!((snr(pl, &b) - snr(pl, &a) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn drops_stay_inside_the_sector(radius in 1.0..500.0f64, start in -180.0..180.0f64, extent in 1.0..360.0f64, seed in any::<u64>()) {
        let cfg = LinkConfig { cell_radius_m: radius, sector: (start, extent), n_drops: 200, ..LinkConfig::default() };
        let tx = Vec3::new(5.0, -7.0, 16.6);
        for p in sample_rx_positions(tx, &cfg, 1.6, seed) {
            let (dx, dy) = (p.x - tx.x, p.y - tx.y);
            prop_assert!(dx.hypot(dy) <= radius * (1.0 + 1e-12));
            let rel = (dy.atan2(dx).to_degrees() - start).rem_euclid(360.0);
            prop_assert!(rel <= extent + 1e-9 || rel >= 360.0 - 1e-9);
        }
    }
}
