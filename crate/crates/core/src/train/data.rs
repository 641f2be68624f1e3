use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::numeric::SeqTensor;
use crate::real::Real;

/// Standard deviation of the distractor noise in the delayed-recall task.
pub const DELAYED_RECALL_NOISE: f64 = 0.3;

/// Grayscale or multi-channel images with values in `[0, 1]`, stored
/// `[image][row][col][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub pixels: Vec<f32>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn new(rows: usize, cols: usize, channels: usize, pixels: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        let per = rows * cols * channels;
        if per == 0 || pixels.len() != per * labels.len() {
            return Err(invalid("pixel buffer does not match the image shape and label count"));
        }
        Ok(ImageSet {
            rows,
            cols,
            channels,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let per = self.rows * self.cols * self.channels;
        &self.pixels[i * per..(i + 1) * per]
    }

    /// Keeps only images whose label is in `keep`, relabelled by position in `keep`.
    pub fn filter_labels(&self, keep: &[u8]) -> ImageSet {
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.len() {
            if let Some(pos) = keep.iter().position(|&k| k == self.labels[i]) {
                pixels.extend_from_slice(self.image(i));
                labels.push(pos as u8);
            }
        }
        ImageSet {
            rows: self.rows,
            cols: self.cols,
            channels: self.channels,
            pixels,
            labels,
        }
    }

    /// The first `n` images (or all of them).
    pub fn take(&self, n: usize) -> ImageSet {
        let n = n.min(self.len());
        let per = self.rows * self.cols * self.channels;
        ImageSet {
            rows: self.rows,
            cols: self.cols,
            channels: self.channels,
            pixels: self.pixels[..n * per].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

/// How an image is turned into a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceTransform {
    /// One pixel per step in row-major order (all channels as features).
    Raster,
    /// Raster order under a fixed random permutation drawn from `seed`.
    Permuted { seed: u64 },
    /// One column per step; features are the column's pixels and channels.
    ColumnScan,
}

impl SequenceTransform {
    /// Pixel permutation used by [`SequenceTransform::Permuted`]: step `t`
    /// reads pixel `perm[t]`.
    pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        perm
    }
}

/// Converts images to a `(B, T, F)` sequence tensor.
pub fn make_sequence<T: Real>(images: &ImageSet, transform: SequenceTransform) -> Result<SeqTensor<T>> {
    let (h, w, c) = (images.rows, images.cols, images.channels);
    let n = images.len();
    match transform {
        SequenceTransform::Raster | SequenceTransform::Permuted { .. } => {
            let perm = match transform {
                SequenceTransform::Permuted { seed } => Some(SequenceTransform::permutation(h * w, seed)),
                _ => None,
            };
            let mut out = SeqTensor::zeros(n, h * w, c);
            for i in 0..n {
                let img = images.image(i);
                for t in 0..h * w {
                    let px = perm.as_ref().map_or(t, |p| p[t]);
                    for (d, &v) in out.row_mut(i, t).iter_mut().zip(&img[px * c..(px + 1) * c]) {
                        *d = T::lit(v as f64);
                    }
                }
            }
            Ok(out)
        }
        SequenceTransform::ColumnScan => {
            let mut out = SeqTensor::zeros(n, w, h * c);
            for i in 0..n {
                let img = images.image(i);
                for col in 0..w {
                    let row = out.row_mut(i, col);
                    for r in 0..h {
                        for ch in 0..c {
                            row[r * c + ch] = T::lit(img[(r * w + col) * c + ch] as f64);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Labelled sequences ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: SeqTensor<T>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl<T: Real> Dataset<T> {
    pub fn new(x: SeqTensor<T>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if x.batch() != labels.len() {
            return Err(invalid("sample count does not match label count"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(invalid(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Dataset { x, labels, classes })
    }

    pub fn from_images(images: &ImageSet, transform: SequenceTransform, classes: usize) -> Result<Self> {
        let x = make_sequence(images, transform)?;
        Dataset::new(x, images.labels.iter().map(|&l| l as usize).collect(), classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Samples `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Dataset<T> {
        Dataset {
            x: self.x.slice_batch(start, end),
            labels: self.labels[start..end].to_vec(),
            classes: self.classes,
        }
    }

    /// Gathers the given samples into a batch.
    pub fn gather(&self, idx: &[usize]) -> (SeqTensor<T>, Vec<usize>) {
        let (_, tn, fn_) = self.x.shape();
        let mut x = SeqTensor::zeros(idx.len(), tn, fn_);
        for (k, &i) in idx.iter().enumerate() {
            for t in 0..tn {
                x.row_mut(k, t).copy_from_slice(self.x.row(i, t));
            }
        }
        (x, idx.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Delayed-recall task: the label's channel is held at 1 for the first
/// `cue_window` steps (other channels 0); afterwards every channel carries
/// independent zero-mean Gaussian noise. Input width equals `n_classes`.
pub fn gen_delayed_recall<T: Real>(
    n_samples: usize,
    time: usize,
    n_classes: usize,
    cue_window: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    if n_classes < 2 {
        return Err(invalid("delayed recall needs at least two classes"));
    }
    if cue_window == 0 || cue_window >= time {
        return Err(invalid("cue window must be positive and shorter than the sequence"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, DELAYED_RECALL_NOISE).map_err(|_| invalid("bad noise scale"))?;
    let mut x = SeqTensor::zeros(n_samples, time, n_classes);
    let mut labels = vec![0usize; n_samples];
    for (i, label) in labels.iter_mut().enumerate() {
        *label = rng.random_range(0..n_classes);
        for t in 0..cue_window {
            x.set(i, t, *label, T::one());
        }
        for t in cue_window..time {
            for v in x.row_mut(i, t) {
                *v = T::lit(noise.sample(&mut rng));
            }
        }
    }
    Dataset::new(x, labels, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digits(n: usize, seed: u64) -> ImageSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pixels = (0..n * 28 * 28)
            .map(|_| rng.random_range(0u8..=255) as f32 / 255.0)
            .collect();
        let labels = (0..n).map(|i| (i % 10) as u8).collect();
        ImageSet::new(28, 28, 1, pixels, labels).unwrap()
    }

    #[test]
    fn raster_is_row_major() {
        let imgs = digits(2, 1);
        let s = make_sequence::<f64>(&imgs, SequenceTransform::Raster).unwrap();
        assert_eq!(s.shape(), (2, 784, 1));
        for b in 0..2 {
            for t in 0..784 {
                let expect = imgs.image(b)[(t / 28) * 28 + t % 28];
                assert_eq!(s.get(b, t, 0), expect as f64);
            }
        }
    }

    #[test]
    fn permutation_is_a_bijection_and_inverts() {
        let imgs = digits(3, 2);
        let perm = SequenceTransform::permutation(784, 9);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..784).collect::<Vec<_>>());
        let s = make_sequence::<f64>(&imgs, SequenceTransform::Permuted { seed: 9 }).unwrap();
        for b in 0..3 {
            let mut back = vec![0.0; 784];
            for t in 0..784 {
                back[perm[t]] = s.get(b, t, 0);
            }
            let orig: Vec<f64> = imgs.image(b).iter().map(|&v| v as f64).collect();
            assert_eq!(back, orig);
        }
        assert_eq!(perm, SequenceTransform::permutation(784, 9));
    }

    #[test]
    fn column_scan_shape_and_values() {
        let pixels: Vec<f32> = (0..2 * 3 * 2).map(|v| v as f32).collect();
        let imgs = ImageSet::new(2, 3, 2, pixels, vec![0]).unwrap();
        let s = make_sequence::<f64>(&imgs, SequenceTransform::ColumnScan).unwrap();
        assert_eq!(s.shape(), (1, 3, 4));
        // Column 1: pixel (0,1) channels 2,3 then pixel (1,1) channels 8,9.
        assert_eq!(s.row(0, 1), &[2.0, 3.0, 8.0, 9.0]);
    }

    #[test]
    fn delayed_recall_layout() {
        let d = gen_delayed_recall::<f64>(50, 10, 2, 2, 3).unwrap();
        assert_eq!(d.x.shape(), (50, 10, 2));
        for i in 0..50 {
            let y = d.labels[i];
            for t in 0..2 {
                assert_eq!(d.x.get(i, t, y), 1.0);
                assert_eq!(d.x.get(i, t, 1 - y), 0.0);
            }
        }
        let mut sum = 0.0;
        let mut count = 0.0;
        for i in 0..50 {
            for t in 2..10 {
                for c in 0..2 {
                    sum += d.x.get(i, t, c);
                    count += 1.0;
                }
            }
        }
        assert!((sum / count).abs() < 0.05);
        assert_eq!(d, gen_delayed_recall::<f64>(50, 10, 2, 2, 3).unwrap());
        assert_ne!(d, gen_delayed_recall::<f64>(50, 10, 2, 2, 4).unwrap());
    }

    /// Last `k` steps of every channel, flattened, plus a bias entry.
    fn tail_features(d: &Dataset<f64>, k: usize) -> Vec<Vec<f64>> {
        let (b, t, c) = d.x.shape();
        (0..b)
            .map(|i| {
                let mut f: Vec<f64> = (t - k..t)
                    .flat_map(|s| (0..c).map(move |ch| (s, ch)))
                    .map(|(s, ch)| d.x.get(i, s, ch))
                    .collect();
                f.push(1.0);
                f
            })
            .collect()
    }

    #[test]
    fn tail_alone_does_not_reveal_the_class() {
        let train = gen_delayed_recall::<f64>(1000, 200, 2, 10, 21).unwrap();
        let test = gen_delayed_recall::<f64>(1000, 200, 2, 10, 22).unwrap();
        let (xs, ys) = (tail_features(&train, 10), &train.labels);
        let mut w = vec![0.0; xs[0].len()];
        for _ in 0..300 {
            let mut g = vec![0.0; w.len()];
            for (x, &y) in xs.iter().zip(ys) {
                let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                let err = 1.0 / (1.0 + libm::exp(-z)) - y as f64;
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += err * xi / xs.len() as f64;
                }
            }
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= 0.5 * gi;
            }
        }
        let correct = tail_features(&test, 10)
            .iter()
            .zip(&test.labels)
            .filter(|(x, &y)| {
                let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                (z > 0.0) == (y == 1)
            })
            .count();
        let acc = correct as f64 / 1000.0;
        assert!(acc <= 0.55, "tail-only logistic accuracy {acc}");
    }

    #[test]
    fn filter_and_relabel() {
        let imgs = digits(20, 4).filter_labels(&[3, 7]);
        assert_eq!(imgs.len(), 4);
        assert!(imgs.labels.iter().all(|&l| l < 2));
    }
}
