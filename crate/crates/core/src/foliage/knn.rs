//! Foliage / non-foliage pixel classification by k nearest neighbours in
//! color space.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::color::{color_difference, Rgb};
use crate::error::{Error, Result};

pub const DEFAULT_NEIGHBORS: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelClass {
    // declaration order doubles as the neighbour tie-break: non-foliage first
    NonFoliage,
    Foliage,
}

impl PixelClass {
    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            0 => Ok(PixelClass::NonFoliage),
            1 => Ok(PixelClass::Foliage),
            other => Err(Error::Parse(format!("pixel class must be 0 or 1, got {other}"))),
        }
    }

    pub fn label(self) -> u8 {
        match self {
            PixelClass::NonFoliage => 0,
            PixelClass::Foliage => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledPixel {
    pub x: u32,
    pub y: u32,
    pub rgb: Rgb,
    pub class: PixelClass,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPixels {
    pub samples: Vec<LabeledPixel>,
}

impl LabeledPixels {
    pub fn new(samples: Vec<LabeledPixel>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        let foliage = self.samples.iter().any(|s| s.class == PixelClass::Foliage);
        let other = self.samples.iter().any(|s| s.class == PixelClass::NonFoliage);
        foliage && other
    }

    /// Seeded shuffle, then the first `fraction` of samples train and the
    /// rest test.
    pub fn split(&self, fraction: f64, seed: u64) -> (LabeledPixels, LabeledPixels) {
        let mut shuffled = self.samples.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((shuffled.len() as f64) * fraction).round() as usize;
        let test = shuffled.split_off(n_train.min(shuffled.len()));
        (LabeledPixels::new(shuffled), LabeledPixels::new(test))
    }
}

/// Total order on neighbours: distance, then class (non-foliage first), then
/// color. Depends only on sample values, so shuffling the training set never
/// changes the selected neighbours' labels.
fn neighbor_order(a: &(f64, PixelClass, Rgb), b: &(f64, PixelClass, Rgb)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Majority vote among the `n_neighbors` nearest training samples; equal
/// votes resolve to non-foliage.
pub fn knn_classify(query: Rgb, training: &LabeledPixels, n_neighbors: usize) -> Result<PixelClass> {
    if training.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if n_neighbors == 0 || n_neighbors > training.len() {
        return Err(Error::invalid(format!("n_neighbors must be in 1..={}, got {n_neighbors}", training.len())));
    }
    let mut scored: Vec<(f64, PixelClass, Rgb)> =
        training.samples.iter().map(|s| (color_difference(query, s.rgb), s.class, s.rgb)).collect();
    if n_neighbors < scored.len() {
        scored.select_nth_unstable_by(n_neighbors - 1, neighbor_order);
    }
    let foliage_votes = scored[..n_neighbors].iter().filter(|s| s.1 == PixelClass::Foliage).count();
    Ok(if 2 * foliage_votes > n_neighbors { PixelClass::Foliage } else { PixelClass::NonFoliage })
}

/// Classification accuracy on `test` for each neighbour count.
pub fn accuracy_sweep(
    train: &LabeledPixels,
    test: &LabeledPixels,
    neighbor_counts: impl IntoIterator<Item = usize>,
) -> Result<Vec<(usize, f64)>> {
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    if test.is_empty() {
        return Err(Error::EmptyInput("knn test set"));
    }
    neighbor_counts
        .into_iter()
        .map(|n| {
            let mut correct = 0usize;
            for s in &test.samples {
                if knn_classify(s.rgb, train, n)? == s.class {
                    correct += 1;
                }
            }
            Ok((n, correct as f64 / test.len() as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rgb: Rgb, class: PixelClass) -> LabeledPixel {
        LabeledPixel { x: 0, y: 0, rgb, class }
    }

    #[test]
    fn exact_match_with_one_neighbor() {
        let t = LabeledPixels::new(vec![
            sample([60, 90, 180], PixelClass::Foliage),
            sample([80, 70, 220], PixelClass::NonFoliage),
        ]);
        assert_eq!(knn_classify([60, 90, 180], &t, 1).unwrap(), PixelClass::Foliage);
        assert_eq!(knn_classify([80, 70, 220], &t, 1).unwrap(), PixelClass::NonFoliage);
    }

    #[test]
    fn even_tie_goes_to_non_foliage() {
        let t = LabeledPixels::new(vec![
            sample([60, 90, 180], PixelClass::Foliage),
            sample([80, 70, 220], PixelClass::NonFoliage),
        ]);
        assert_eq!(knn_classify([60, 90, 180], &t, 2).unwrap(), PixelClass::NonFoliage);
    }

    #[test]
    fn errors() {
        assert!(matches!(knn_classify([0, 0, 0], &LabeledPixels::default(), 1), Err(Error::EmptyTraining)));
        let t = LabeledPixels::new(vec![sample([1, 2, 3], PixelClass::Foliage)]);
        assert!(knn_classify([0, 0, 0], &t, 2).is_err());
        assert!(matches!(accuracy_sweep(&t, &t, [1]), Err(Error::SingleClass)));
    }

    #[test]
    fn split_is_seeded_and_sized() {
        let t = LabeledPixels::new((0..10u8).map(|i| sample([i, 0, 0], PixelClass::Foliage)).collect());
        let (a, b) = t.split(0.6, 3);
        assert_eq!((a.len(), b.len()), (6, 4));
        assert_eq!(t.split(0.6, 3), (a, b));
    }
}
