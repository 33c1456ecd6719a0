use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dtecm_core::foliage::{
    color_difference, compute_fcr, foliage_loss, knn_classify, rotate_zyz, AngularMask, FoliageLossModel, FoliageTwin,
    LabeledPixel, LabeledPixels, PixelClass, PoseRotation, Rgb,
};
use dtecm_core::Direction;

fn direction() -> impl Strategy<Value = Direction> {
    (-180.0..180.0f64, -1.0..1.0f64).prop_map(|(az, z)| Direction::new(az, z.asin().to_degrees()))
}

fn pose() -> impl Strategy<Value = PoseRotation> {
    (-180.0..180.0f64, -180.0..180.0f64, -180.0..180.0f64).prop_map(|(a, b, c)| PoseRotation::new(a, b, c))
}

fn rgb() -> impl Strategy<Value = Rgb> {
    prop::array::uniform3(any::<u8>())
}

fn matrix_rotate(p: PoseRotation, d: Direction) -> Direction {
    let m = p.matrix();
    let u = d.unit_vector();
    let v = m * nalgebra::Vector3::new(u.x, u.y, u.z);
    Direction::new(v.y.atan2(v.x).to_degrees(), v.z.atan2(v.x.hypot(v.y)).to_degrees())
}

fn training_set() -> impl Strategy<Value = Vec<LabeledPixel>> {
    prop::collection::vec((rgb(), any::<bool>()), 30..120).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (rgb, f))| LabeledPixel {
                x: i as u32,
                y: 0,
                rgb,
                class: if f { PixelClass::Foliage } else { PixelClass::NonFoliage },
            })
            .collect()
    })
}

/// Exhaustive sort on (distance, class, color); ties in the vote go to
/// non-foliage.
fn knn_oracle(query: Rgb, training: &[LabeledPixel], k: usize) -> PixelClass {
    let mut all: Vec<_> = training.iter().map(|s| (color_difference(query, s.rgb), s.class, s.rgb)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let votes = all[..k].iter().filter(|s| s.1 == PixelClass::Foliage).count();
    if 2 * votes > k {
        PixelClass::Foliage
    } else {
        PixelClass::NonFoliage
    }
}

proptest! {
    #[test]
    fn rotation_is_an_isometry(p in pose(), a in direction(), b in direction()) {
        let before = a.angular_distance(b);
        let after = rotate_zyz(p, a).angular_distance(rotate_zyz(p, b));
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn rotation_matches_matrix_product(p in pose(), d in direction()) {
        prop_assert!(rotate_zyz(p, d).angular_distance(matrix_rotate(p, d)) < 1e-9);
    }

    #[test]
    fn inverse_pose_undoes_rotation(p in pose(), d in direction()) {
        let back = rotate_zyz(p.inverse(), rotate_zyz(p, d));
        prop_assert!(back.angular_distance(d) < 1e-9);
    }

    #[test]
    fn color_difference_is_a_proper_distance(a in rgb(), b in rgb()) {
        prop_assert_eq!(color_difference(a, a), 0.0);
        prop_assert_eq!(color_difference(a, b), color_difference(b, a));
        if a != b {
            prop_assert!(color_difference(a, b) > 0.0);
        }
    }

    #[test]
    fn knn_matches_exhaustive_oracle(samples in training_set(), q in rgb(), k in 1usize..30) {
        let k = k.min(samples.len());
        let training = LabeledPixels::new(samples.clone());
        prop_assert_eq!(knn_classify(q, &training, k).unwrap(), knn_oracle(q, &samples, k));
    }

    #[test]
    fn knn_ignores_training_order(samples in training_set(), q in rgb(), seed in any::<u64>()) {
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let k = 22.min(samples.len());
        prop_assert_eq!(
            knn_classify(q, &LabeledPixels::new(samples), k).unwrap(),
            knn_classify(q, &LabeledPixels::new(shuffled), k).unwrap()
        );
    }

    #[test]
    fn deterministic_loss_is_zero_below_onset_and_continuous(
        slope in -60.0..0.0f64,
        r_th in 0.05..0.95f64,
        f in 0.0..1.0f64,
    ) {
        let m = FoliageLossModel { slope_db: slope, r_th, ..FoliageLossModel::default() };
        let loss = foliage_loss(f, &m, None).unwrap();
        if f < r_th {
            prop_assert_eq!(loss, 0.0);
        }
        prop_assert_eq!(m.deterministic(r_th), 0.0);
        let h = 1e-9;
        let step = (m.deterministic((f + h).min(1.0)) - m.deterministic(f)).abs();
        prop_assert!(step <= slope.abs() * h * 1.000001);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fcr_never_decreases_when_foliage_is_added(
        first in prop::collection::vec((-10i64..=10, -10i64..=10), 0..200),
        extra in prop::collection::vec((-10i64..=10, -10i64..=10), 1..200),
        center in direction(),
        phi_th in 2.0..10.0f64,
    ) {
        let mut mask = AngularMask::new(1.0).unwrap();
        let (n_az, n_el) = mask.dims();
        let (ci, cj) = mask.cell_of(center);
        let place = |mask: &mut AngularMask, offsets: &[(i64, i64)]| {
            for &(di, dj) in offsets {
                let i = (ci as i64 + di).rem_euclid(n_az as i64) as usize;
                let j = (cj as i64 + dj).clamp(0, n_el as i64 - 1) as usize;
                mask.set(i, j, true);
            }
        };
        place(&mut mask, &first);
        let before = compute_fcr(&FoliageTwin::from_mask(mask.clone()), center, phi_th).unwrap();
        place(&mut mask, &extra);
        let after = compute_fcr(&FoliageTwin::from_mask(mask), center, phi_th).unwrap();
        prop_assert!(after >= before);
        prop_assert!((0.0..=1.0).contains(&after));
    }
}
