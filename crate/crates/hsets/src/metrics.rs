//! Evaluation suite: Gini sparsity index, ROAD faithfulness with noisy
//! linear imputation (MoRF ordering), the AOPC summary, and faithfulness
//! correlation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{self, Tape};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-pixel importance over an H x W grid. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: vec![height, width],
                got: vec![values.len()],
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("saliency map contains non-finite values".into()));
        }
        Ok(SaliencyMap { height, width, values })
    }

    /// Pixel indices in MoRF order: descending value, ties by ascending index.
    pub fn morf_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| {
            self.values[b]
                .partial_cmp(&self.values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
    }
}

/// Gini sparsity index of |phi| in [0, 1]: 0 for a uniform map, 1 - 1/d
/// for a one-hot map. Errors on an all-zero map.
pub fn gini(map: &SaliencyMap) -> Result<f64> {
    let mut v: Vec<f64> = map.values.iter().map(|x| x.abs()).collect();
    let l1: f64 = v.iter().sum();
    if l1 <= 0.0 {
        return Err(Error::ZeroSaliency);
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = v.len() as f64;
    let mut acc = 0.0;
    for (k, x) in v.iter().enumerate() {
        let k = (k + 1) as f64; // 1-based rank in non-decreasing order
        acc += (x / l1) * ((d - k + 0.5) / d);
    }
    Ok(1.0 - 2.0 * acc)
}

/// Replace the removed pixels by the harmonic interpolant of the kept
/// ones (each removed pixel equals the mean of its in-image 4-neighbors),
/// then add N(0, sigma^2) noise to the removed pixels. Gauss-Seidel to
/// residual < 1e-7.
pub fn noisy_linear_impute(
    image: &Tensor,
    removed: &[usize],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor> {
    let shape = image.shape().to_vec();
    if shape.len() != 3 {
        return Err(Error::ShapeMismatch { expected: vec![0, 0, 0], got: shape });
    }
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let spatial = h * w;
    if sigma < 0.0 {
        return Err(Error::InvalidParam("sigma must be >= 0".into()));
    }
    let mut is_removed = vec![false; spatial];
    for &p in removed {
        if p >= spatial {
            return Err(Error::PixelIndex { index: p, dim: spatial });
        }
        is_removed[p] = true;
    }
    if removed.is_empty() {
        return Ok(image.clone());
    }
    if is_removed.iter().all(|&r| r) {
        return Err(Error::NoBoundary);
    }
    let mut out = image.clone();
    let targets: Vec<usize> = (0..spatial).filter(|&p| is_removed[p]).collect();
    let neighbors = |p: usize| {
        let (r, cc) = (p / w, p % w);
        [
            (r > 0).then(|| p - w),
            (r + 1 < h).then(|| p + w),
            (cc > 0).then(|| p - 1),
            (cc + 1 < w).then(|| p + 1),
        ]
    };
    for ch in 0..c {
        let data = out.data_mut();
        // start removed pixels from zero
        for &p in &targets {
            data[p * c + ch] = 0.0;
        }
        let mut residual = f64::INFINITY;
        let mut iters = 0usize;
        while residual > 1e-7 && iters < 100_000 {
            residual = 0.0;
            for &p in &targets {
                let mut sum = 0.0;
                let mut n = 0.0;
                for q in neighbors(p).into_iter().flatten() {
                    sum += data[q * c + ch];
                    n += 1.0;
                }
                let mean = sum / n;
                residual = residual.max((data[p * c + ch] - mean).abs());
                data[p * c + ch] = mean;
            }
            iters += 1;
        }
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma)
            .map_err(|_| Error::InvalidParam("bad sigma".into()))?;
        let data = out.data_mut();
        for &p in &targets {
            for ch in 0..c {
                data[p * c + ch] += normal.sample(rng);
            }
        }
    }
    Ok(out)
}

/// Accuracy (and mean predicted-class logit drop) after removing growing
/// MoRF prefixes of each image's saliency ordering.
#[derive(Debug, Clone)]
pub struct RoadCurve {
    /// Removal fractions, strictly increasing, starting at 0.
    pub fractions: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub logit_drop: Vec<f64>,
    /// (1/(L+1)) * sum over the nonzero steps of the mean logit drop.
    pub aopc: f64,
}

pub fn road_curve(
    tape: &Tape,
    dataset: &Dataset,
    maps: &[SaliencyMap],
    fractions: &[f64],
    sigma: f64,
    seed: u64,
) -> Result<RoadCurve> {
    if maps.len() != dataset.len() {
        return Err(Error::InvalidParam(format!(
            "{} maps for {} images",
            maps.len(),
            dataset.len()
        )));
    }
    if fractions.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParam("fractions must be strictly increasing".into()));
    }
    let spatial = dataset.height * dataset.width;
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::InvalidParam("fractions must lie in [0, 1]".into()));
    }
    let n = dataset.len();
    let mut accuracy = vec![0.0; fractions.len()];
    let mut drops = vec![0.0; fractions.len()];
    for i in 0..n {
        let image = dataset.image(i);
        let clean = autodiff::forward(tape, &image)?;
        let pred = clean.argmax();
        let order = maps[i].morf_order();
        // per-image RNG stream derived from the master seed
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for (s, &frac) in fractions.iter().enumerate() {
            let count = ((frac * spatial as f64).round() as usize).min(spatial);
            let perturbed = if count == 0 {
                image.clone()
            } else if count == spatial {
                return Err(Error::NoBoundary);
            } else {
                noisy_linear_impute(&image, &order[..count], sigma, &mut rng)?
            };
            let logits = autodiff::forward(tape, &perturbed)?;
            if logits.argmax() == dataset.labels[i] {
                accuracy[s] += 1.0;
            }
            drops[s] += clean.get(pred) - logits.get(pred);
        }
    }
    for v in accuracy.iter_mut() {
        *v /= n as f64;
    }
    for v in drops.iter_mut() {
        *v /= n as f64;
    }
    let steps_nonzero: Vec<f64> = fractions
        .iter()
        .zip(&drops)
        .filter(|(&f, _)| f > 0.0)
        .map(|(_, &d)| d)
        .collect();
    let l = steps_nonzero.len();
    let aopc = steps_nonzero.iter().sum::<f64>() / (l + 1) as f64;
    Ok(RoadCurve { fractions: fractions.to_vec(), accuracy, logit_drop: drops, aopc })
}

/// AOPC = (1/(L+1)) sum_{k=1..L} (f(x^(0)) - f(x^(k))) for one image,
/// where step k removes the top k*k_per_step MoRF pixels and f is the
/// originally predicted class logit.
pub fn road_aopc(
    tape: &Tape,
    image: &Tensor,
    map: &SaliencyMap,
    l_steps: usize,
    k_per_step: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let spatial = map.values.len();
    if l_steps * k_per_step > spatial {
        return Err(Error::InvalidParam(format!(
            "{l_steps} steps x {k_per_step} pixels exceed image size {spatial}"
        )));
    }
    let clean = autodiff::forward(tape, image)?;
    let pred = clean.argmax();
    let order = map.morf_order();
    let mut total = 0.0;
    for k in 1..=l_steps {
        let count = k * k_per_step;
        let perturbed = noisy_linear_impute(image, &order[..count], sigma, rng)?;
        let logits = autodiff::forward(tape, &perturbed)?;
        total += clean.get(pred) - logits.get(pred);
    }
    Ok(total / (l_steps + 1) as f64)
}

#[derive(Debug, Clone)]
pub struct FaithfulnessConfig {
    pub subset_fraction: f64,
    pub runs: usize,
    /// Replacement values for sampled pixels; shape must match the image.
    pub baseline: Tensor,
    pub seed: u64,
}

/// Pearson correlation between the mean attribution of a random pixel
/// subset and the logit drop caused by replacing it with the baseline.
pub fn faithfulness_correlation(
    tape: &Tape,
    image: &Tensor,
    map: &SaliencyMap,
    config: &FaithfulnessConfig,
) -> Result<f64> {
    if config.runs < 2 {
        return Err(Error::InvalidParam("faithfulness needs at least 2 runs".into()));
    }
    if !(0.0 < config.subset_fraction && config.subset_fraction <= 1.0) {
        return Err(Error::InvalidParam("subset_fraction must lie in (0, 1]".into()));
    }
    let shape = image.shape().to_vec();
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    if config.baseline.len() != image.len() {
        return Err(Error::ShapeMismatch {
            expected: shape,
            got: config.baseline.shape().to_vec(),
        });
    }
    let spatial = h * w;
    let count = ((config.subset_fraction * spatial as f64).round() as usize).clamp(1, spatial);
    let clean = autodiff::forward(tape, image)?;
    let pred = clean.argmax();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut attr = Vec::with_capacity(config.runs);
    let mut drop = Vec::with_capacity(config.runs);
    for _ in 0..config.runs {
        // sample `count` distinct pixels
        let mut pool: Vec<usize> = (0..spatial).collect();
        for i in 0..count {
            let j = rng.gen_range(i..spatial);
            pool.swap(i, j);
        }
        let subset = &pool[..count];
        let mut perturbed = image.clone();
        for &p in subset {
            for ch in 0..c {
                perturbed.data_mut()[p * c + ch] = config.baseline.get(p * c + ch);
            }
        }
        let logits = autodiff::forward(tape, &perturbed)?;
        attr.push(subset.iter().map(|&p| map.values[p]).sum::<f64>() / count as f64);
        drop.push(clean.get(pred) - logits.get(pred));
    }
    pearson(&attr, &drop)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(cov / (va.sqrt() * vb.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(values: Vec<f64>) -> SaliencyMap {
        let n = values.len();
        SaliencyMap::new(1, n, values).unwrap()
    }

    #[test]
    fn gini_analytic_values() {
        assert!(gini(&map(vec![0.7; 16])).unwrap().abs() < 1e-12);
        let mut onehot = vec![0.0; 10];
        onehot[3] = 2.0;
        assert!((gini(&map(onehot)).unwrap() - 0.9).abs() < 1e-12);
        assert!((gini(&map(vec![1.0, 3.0])).unwrap() - 0.25).abs() < 1e-12);
        assert!(matches!(gini(&map(vec![0.0; 4])), Err(Error::ZeroSaliency)));
    }

    proptest! {
        #[test]
        fn gini_scale_and_permutation_invariant(
            vals in proptest::collection::vec(0.0f64..10.0, 4..32),
            c in 0.01f64..100.0,
            shift in 0usize..31,
        ) {
            prop_assume!(vals.iter().sum::<f64>() > 1e-9);
            let g = gini(&map(vals.clone())).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * c).collect();
            prop_assert!((gini(&map(scaled)).unwrap() - g).abs() < 1e-9);
            let mut rotated = vals.clone();
            rotated.rotate_left(shift % vals.len());
            prop_assert!((gini(&map(rotated)).unwrap() - g).abs() < 1e-12);
        }
    }

    #[test]
    fn impute_interior_pixel_mean_of_constant_neighbors() {
        let mut data = vec![0.5; 9];
        data[4] = 0.9;
        let img = Tensor::new(vec![3, 3, 1], data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = noisy_linear_impute(&img, &[4], 0.0, &mut rng).unwrap();
        assert!((out.get(4) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn impute_empty_set_is_identity() {
        let img = Tensor::new(vec![2, 2, 1], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = noisy_linear_impute(&img, &[], 0.5, &mut rng).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn impute_restores_linear_ramp() {
        // harmonic interpolation reproduces linear ramps exactly
        let (h, w) = (6, 6);
        let data: Vec<f64> = (0..h * w)
            .map(|p| (p / w) as f64 * 0.1 + (p % w) as f64 * 0.05)
            .collect();
        let img = Tensor::new(vec![h, w, 1], data.clone()).unwrap();
        let removed = [2 * w + 3, 3 * w + 3]; // a 2x1 interior block
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = noisy_linear_impute(&img, &removed, 0.0, &mut rng).unwrap();
        for &p in &removed {
            assert!((out.get(p) - data[p]).abs() < 1e-6, "ramp not restored at {p}");
        }
    }

    #[test]
    fn impute_all_removed_errors() {
        let img = Tensor::new(vec![2, 2, 1], vec![0.5; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            noisy_linear_impute(&img, &[0, 1, 2, 3], 0.0, &mut rng),
            Err(Error::NoBoundary)
        ));
    }

    #[test]
    fn impute_sigma_zero_idempotent() {
        let data: Vec<f64> = (0..16).map(|p| (p as f64 * 0.7).sin().abs()).collect();
        let img = Tensor::new(vec![4, 4, 1], data).unwrap();
        let removed = [5, 6];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let once = noisy_linear_impute(&img, &removed, 0.0, &mut rng).unwrap();
        let twice = noisy_linear_impute(&once, &removed, 0.0, &mut rng).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn morf_ties_break_by_index() {
        let m = map(vec![0.5, 0.9, 0.5, 0.1]);
        assert_eq!(m.morf_order(), vec![1, 0, 2, 3]);
    }

    #[test]
    fn pearson_extremes() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[-2.0, -4.0, -6.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
    }
}
