//! IDG-Vis set attribution: direction vectors, path-integrated directional
//! gradients, Monte-Carlo Harsanyi aggregation, saliency assembly, and the
//! Integrated Gradients baseline.
//!
//! The gradients along the straight path from the baseline to the input do
//! not depend on which subset is being scored, so they are computed once per
//! (input, baseline, class) in [`PathGradients`] and shared by every subset
//! of every set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{self, Tape};
use crate::detection::SetCollection;
use crate::error::{Error, Result};
use crate::metrics::SaliencyMap;
use crate::tensor::Tensor;

/// Unit direction restricted to a feature subset.
#[derive(Debug, Clone)]
pub struct DirectionVector {
    pub values: Vec<f64>,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct IDGConfig {
    /// Riemann steps along the path.
    pub m: usize,
    /// Monte-Carlo subset samples per set.
    pub t: usize,
    pub baseline: Tensor,
    pub rng_seed: u64,
}

impl IDGConfig {
    pub fn new(m: usize, t: usize, baseline: Tensor, rng_seed: u64) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParam("m must be >= 1".into()));
        }
        if t < 1 {
            return Err(Error::InvalidParam("t must be >= 1".into()));
        }
        Ok(IDGConfig { m, t, baseline, rng_seed })
    }

    pub fn default_for(input_len: usize) -> Self {
        IDGConfig {
            m: 50,
            t: 50,
            baseline: Tensor::zeros(vec![input_len]),
            rng_seed: 0,
        }
    }
}

/// â = a / ‖a‖ with aᵢ = xᵢ − x′ᵢ on T and 0 elsewhere; the zero vector
/// when x and x′ agree on all of T.
pub fn direction_vector(x: &Tensor, baseline: &Tensor, subset: &[usize]) -> Result<DirectionVector> {
    if x.len() != baseline.len() {
        return Err(Error::ShapeMismatch {
            expected: x.shape().to_vec(),
            got: baseline.shape().to_vec(),
        });
    }
    let d = x.len();
    let mut values = vec![0.0; d];
    for &i in subset {
        if i >= d {
            return Err(Error::PixelIndex { index: i, dim: d });
        }
        values[i] = x.get(i) - baseline.get(i);
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in values.iter_mut() {
            *v /= norm;
        }
    }
    let mut support = subset.to_vec();
    support.sort_unstable();
    support.dedup();
    Ok(DirectionVector { values, support })
}

/// |∇f_c(point) · â|.
pub fn directional_gradient(tape: &Tape, point: &Tensor, dir: &DirectionVector, class: usize) -> Result<f64> {
    let grad = autodiff::gradient(tape, point, class)?;
    Ok(grad.data().iter().zip(&dir.values).map(|(g, a)| g * a).sum::<f64>().abs())
}

/// Gradients at the m+1 evenly spaced points of the straight path from the
/// baseline to the input, for one class. Subset-independent, so computed
/// once and reused across all subsets and sets.
pub struct PathGradients {
    grads: Vec<Vec<f64>>,
    pub m: usize,
}

impl PathGradients {
    pub fn compute(tape: &Tape, x: &Tensor, baseline: &Tensor, class: usize, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParam("m must be >= 1".into()));
        }
        if x.len() != tape.input_len() || baseline.len() != x.len() {
            return Err(Error::ShapeMismatch {
                expected: tape.input_shape().to_vec(),
                got: x.shape().to_vec(),
            });
        }
        let mut grads = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let alpha = k as f64 / m as f64;
            let point: Vec<f64> = baseline
                .data()
                .iter()
                .zip(x.data())
                .map(|(b, xi)| b + alpha * (xi - b))
                .collect();
            let point = Tensor::new(x.shape().to_vec(), point)?;
            grads.push(autodiff::gradient(tape, &point, class)?.into_data());
        }
        Ok(PathGradients { grads, m })
    }

    /// IDG-Vis of one subset using the cached path gradients:
    /// (1/(m+1)) Σ_k |g_k · â_T|. The dot product only touches the support.
    pub fn idg(&self, dir: &DirectionVector) -> f64 {
        let mut total = 0.0;
        for g in &self.grads {
            let dot: f64 = dir.support.iter().map(|&i| g[i] * dir.values[i]).sum();
            total += dot.abs();
        }
        total / (self.m + 1) as f64
    }

    /// Signed variant (no absolute value). Not part of the method; kept so
    /// the axiom suite can show that dropping the absolute value breaks
    /// non-negativity.
    pub fn idg_signed(&self, dir: &DirectionVector) -> f64 {
        let mut total = 0.0;
        for g in &self.grads {
            total += dir.support.iter().map(|&i| g[i] * dir.values[i]).sum::<f64>();
        }
        total / (self.m + 1) as f64
    }
}

/// IDG-Vis of a single subset, computing path gradients from scratch.
pub fn idg_vis(
    tape: &Tape,
    x: &Tensor,
    baseline: &Tensor,
    subset: &[usize],
    class: usize,
    m: usize,
) -> Result<f64> {
    if subset.is_empty() {
        return Ok(0.0);
    }
    let dir = direction_vector(x, baseline, subset)?;
    let path = PathGradients::compute(tape, x, baseline, class, m)?;
    Ok(path.idg(&dir))
}

fn subset_from_mask(set: &[usize], mask: u64) -> Vec<usize> {
    set.iter()
        .enumerate()
        .filter(|(b, _)| mask >> b & 1 == 1)
        .map(|(_, &i)| i)
        .collect()
}

/// Monte-Carlo Harsanyi score: sample t nonempty subsets of `set`
/// uniformly, sum their IDG-Vis values, and rescale by (2^{|set|}-1)/t so
/// the estimate is unbiased for the full-enumeration sum.
pub fn attribute_set(
    tape: &Tape,
    x: &Tensor,
    set: &[usize],
    class: usize,
    config: &IDGConfig,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidParam("interaction set is empty".into()));
    }
    let path = PathGradients::compute(tape, x, &config.baseline, class, config.m)?;
    attribute_set_cached(&path, x, set, config)
}

/// Same as [`attribute_set`] but reusing precomputed path gradients.
pub fn attribute_set_cached(
    path: &PathGradients,
    x: &Tensor,
    set: &[usize],
    config: &IDGConfig,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidParam("interaction set is empty".into()));
    }
    let n = set.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut total = 0.0;
    for _ in 0..config.t {
        // uniform nonempty subset via rejection
        let subset = loop {
            let mut s = Vec::new();
            for &i in set {
                if rng.gen_bool(0.5) {
                    s.push(i);
                }
            }
            if !s.is_empty() {
                break s;
            }
        };
        let dir = direction_vector(x, &config.baseline, &subset)?;
        total += path.idg(&dir);
    }
    let scale = (2f64.powi(n as i32) - 1.0) / config.t as f64;
    Ok(total * scale)
}

/// Exact target of the MC estimator: Σ over every nonempty T ⊆ set of
/// IDG-Vis(T). Enumerates 2^{|set|} subsets, so |set| is capped at 20.
pub fn attribute_set_exact(
    tape: &Tape,
    x: &Tensor,
    baseline: &Tensor,
    set: &[usize],
    class: usize,
    m: usize,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidParam("interaction set is empty".into()));
    }
    if set.len() > 20 {
        return Err(Error::SetTooLarge(set.len()));
    }
    let path = PathGradients::compute(tape, x, baseline, class, m)?;
    attribute_set_exact_cached(&path, x, baseline, set)
}

/// Exact enumeration reusing precomputed path gradients.
pub fn attribute_set_exact_cached(
    path: &PathGradients,
    x: &Tensor,
    baseline: &Tensor,
    set: &[usize],
) -> Result<f64> {
    if set.len() > 20 {
        return Err(Error::SetTooLarge(set.len()));
    }
    let n = set.len();
    let mut total = 0.0;
    for mask in 1u64..(1u64 << n) {
        let subset = subset_from_mask(set, mask);
        let dir = direction_vector(x, baseline, &subset)?;
        total += path.idg(&dir);
    }
    Ok(total)
}

/// Combine per-set scores into one saliency map. Each pixel takes the
/// maximum score over the sets containing it (or the sum when
/// `sum_overlaps` is on); pixels outside every set stay 0.
pub fn aggregate_saliency(
    sets: &SetCollection,
    scores: &[f64],
    height: usize,
    width: usize,
    sum_overlaps: bool,
) -> Result<SaliencyMap> {
    if scores.len() != sets.sets.len() {
        return Err(Error::InvalidParam(format!(
            "{} scores for {} sets",
            scores.len(),
            sets.sets.len()
        )));
    }
    let mut values = vec![0.0; height * width];
    for (set, &score) in sets.sets.iter().zip(scores) {
        for &p in &set.pixels {
            if p >= values.len() {
                return Err(Error::PixelIndex { index: p, dim: values.len() });
            }
            if sum_overlaps {
                values[p] += score;
            } else {
                values[p] = values[p].max(score);
            }
        }
    }
    SaliencyMap::new(height, width, values)
}

/// Integrated Gradients baseline: right-endpoint Riemann sum with m steps,
/// channel attributions summed per pixel.
pub fn integrated_gradients(
    tape: &Tape,
    x: &Tensor,
    baseline: &Tensor,
    class: usize,
    m: usize,
) -> Result<SaliencyMap> {
    if m < 1 {
        return Err(Error::InvalidParam("m must be >= 1".into()));
    }
    let shape = tape.input_shape().to_vec();
    if shape.len() != 3 {
        return Err(Error::ShapeMismatch { expected: vec![0, 0, 0], got: shape });
    }
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    if x.len() != h * w * c || baseline.len() != x.len() {
        return Err(Error::ShapeMismatch {
            expected: shape,
            got: x.shape().to_vec(),
        });
    }
    let d = x.len();
    let mut grad_sum = vec![0.0; d];
    for k in 1..=m {
        let alpha = k as f64 / m as f64;
        let point: Vec<f64> = baseline
            .data()
            .iter()
            .zip(x.data())
            .map(|(b, xi)| b + alpha * (xi - b))
            .collect();
        let point = Tensor::new(x.shape().to_vec(), point)?;
        let g = autodiff::gradient(tape, &point, class)?;
        for (acc, gi) in grad_sum.iter_mut().zip(g.data()) {
            *acc += gi;
        }
    }
    let mut values = vec![0.0; h * w];
    for p in 0..h * w {
        for ch in 0..c {
            let i = p * c + ch;
            values[p] += (x.get(i) - baseline.get(i)) * grad_sum[i] / m as f64;
        }
    }
    SaliencyMap::new(h, w, values)
}

/// Per-set scores for one image together with the assembled map.
#[derive(Debug, Clone)]
pub struct AttributionResult {
    pub image_id: String,
    pub scores: Vec<f64>,
    pub pixels: Vec<Vec<usize>>,
    pub map: SaliencyMap,
    pub m: usize,
    pub t: usize,
    pub rng_seed: u64,
}

impl AttributionResult {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# hsets attribution").unwrap();
        writeln!(out, "image {}", self.image_id).unwrap();
        writeln!(out, "config m={} t={} seed={}", self.m, self.t, self.rng_seed).unwrap();
        for (pixels, score) in self.pixels.iter().zip(&self.scores) {
            let joined: Vec<String> = pixels.iter().map(|p| p.to_string()).collect();
            writeln!(out, "set score={:.12e} pixels={}", score, joined.join(",")).unwrap();
        }
        writeln!(out, "map {} {}", self.map.height, self.map.width).unwrap();
        for r in 0..self.map.height {
            let row: Vec<String> = (0..self.map.width)
                .map(|c| format!("{:.12e}", self.map.values[r * self.map.width + c]))
                .collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("# hsets attribution") => {}
            _ => return Err(Error::Config("missing attribution header".into())),
        }
        let image_id = lines
            .next()
            .and_then(|l| l.strip_prefix("image "))
            .ok_or_else(|| Error::Config("missing image line".into()))?
            .to_string();
        let config_line = lines
            .next()
            .and_then(|l| l.strip_prefix("config "))
            .ok_or_else(|| Error::Config("missing config line".into()))?;
        let mut kv = BTreeMap::new();
        for part in config_line.split_whitespace() {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad config entry {part}")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let parse = |key: &str| -> Result<u64> {
            kv.get(key)
                .ok_or_else(|| Error::Config(format!("missing config key {key}")))?
                .parse()
                .map_err(|_| Error::Config(format!("bad value for {key}")))
        };
        let (m, t, rng_seed) = (parse("m")? as usize, parse("t")? as usize, parse("seed")?);
        let mut scores = Vec::new();
        let mut pixels = Vec::new();
        let mut map = None;
        while let Some(line) = lines.next() {
            if let Some(rest) = line.strip_prefix("set ") {
                let mut score = None;
                let mut px = None;
                for part in rest.split_whitespace() {
                    if let Some(v) = part.strip_prefix("score=") {
                        score = Some(v.parse::<f64>().map_err(|_| Error::Config("bad score".into()))?);
                    } else if let Some(v) = part.strip_prefix("pixels=") {
                        px = Some(
                            v.split(',')
                                .map(|s| s.parse::<usize>().map_err(|_| Error::Config("bad pixel".into())))
                                .collect::<Result<Vec<_>>>()?,
                        );
                    }
                }
                scores.push(score.ok_or_else(|| Error::Config("set line without score".into()))?);
                pixels.push(px.ok_or_else(|| Error::Config("set line without pixels".into()))?);
            } else if let Some(rest) = line.strip_prefix("map ") {
                let dims: Vec<usize> = rest
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| Error::Config("bad map dims".into())))
                    .collect::<Result<Vec<_>>>()?;
                if dims.len() != 2 {
                    return Err(Error::Config("map line needs height and width".into()));
                }
                let (h, w) = (dims[0], dims[1]);
                let mut values = Vec::with_capacity(h * w);
                for _ in 0..h {
                    let row = lines.next().ok_or_else(|| Error::Config("truncated map".into()))?;
                    for cell in row.split_whitespace() {
                        values.push(cell.parse().map_err(|_| Error::Config("bad map value".into()))?);
                    }
                }
                map = Some(SaliencyMap::new(h, w, values)?);
            }
        }
        let map = map.ok_or_else(|| Error::Config("missing map block".into()))?;
        if scores.len() != pixels.len() {
            return Err(Error::Config("score/pixel count mismatch".into()));
        }
        Ok(AttributionResult { image_id, scores, pixels, map, m, t, rng_seed })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{DetectionConfig, InteractionSet};

    /// f(x) = w . x on a 1 x d x 1 image.
    fn linear_tape(w: &[f64]) -> Tape {
        let d = w.len();
        let mut tape = Tape::new(vec![1, d, 1]);
        let weight = Tensor::new(vec![1, d], w.to_vec()).unwrap();
        let bias = Tensor::zeros(vec![1]);
        let flat = tape.flatten(tape.input_id());
        let out = tape.affine(flat, weight, bias).unwrap();
        tape.set_output(out);
        tape
    }

    fn img(v: &[f64]) -> Tensor {
        Tensor::new(vec![1, v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn direction_vector_345() {
        let x = img(&[3.0, 4.0, 5.0]);
        let b = Tensor::zeros(vec![1, 3, 1]);
        let d = direction_vector(&x, &b, &[0, 1]).unwrap();
        assert!((d.values[0] - 0.6).abs() < 1e-12);
        assert!((d.values[1] - 0.8).abs() < 1e-12);
        assert_eq!(d.values[2], 0.0);
        let norm: f64 = d.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direction_vector_degenerate_cases() {
        let x = img(&[3.0, 4.0, 5.0]);
        let b = Tensor::zeros(vec![1, 3, 1]);
        assert!(direction_vector(&x, &b, &[]).unwrap().values.iter().all(|&v| v == 0.0));
        let same = direction_vector(&x, &x, &[0, 1, 2]).unwrap();
        assert!(same.values.iter().all(|&v| v == 0.0));
        assert!(direction_vector(&x, &b, &[7]).is_err());
    }

    #[test]
    fn directional_gradient_linear() {
        let tape = linear_tape(&[1.0, 2.0, 0.0]);
        let x = img(&[3.0, 4.0, 5.0]);
        let dir = DirectionVector { values: vec![0.6, 0.8, 0.0], support: vec![0, 1] };
        let g = directional_gradient(&tape, &x, &dir, 0).unwrap();
        assert!((g - 2.2).abs() < 1e-12);
        let flipped = DirectionVector { values: vec![-0.6, -0.8, 0.0], support: vec![0, 1] };
        assert!((directional_gradient(&tape, &x, &flipped, 0).unwrap() - 2.2).abs() < 1e-12);
        let perp = DirectionVector { values: vec![0.0, 0.0, 1.0], support: vec![2] };
        assert!(directional_gradient(&linear_tape(&[1.0, 2.0, 0.0]), &x, &perp, 0).unwrap() < 1e-12);
    }

    #[test]
    fn idg_linear_closed_form_any_m() {
        // constant integrand: |sum_{i in T} w_i x_i| / ||x_T|| at every m
        let tape = linear_tape(&[2.0, -1.0, 0.5]);
        let x = img(&[1.0, 2.0, 3.0]);
        let b = Tensor::zeros(vec![1, 3, 1]);
        let expected = (2.0 * 1.0 - 1.0 * 2.0 + 0.5 * 3.0f64).abs()
            / (1.0f64 + 4.0 + 9.0).sqrt();
        for m in [1, 7, 50] {
            let got = idg_vis(&tape, &x, &b, &[0, 1, 2], 0, m).unwrap();
            assert!((got - expected).abs() < 1e-12, "m={m}");
        }
        assert_eq!(idg_vis(&tape, &x, &b, &[], 0, 5).unwrap(), 0.0);
    }

    #[test]
    fn idg_quadratic_converges_to_analytic() {
        // f(x) = x1 * x2; path from (-1, 0) to (1, 2); T = {0, 1}.
        // Along x(a) = (2a-1, 2a) the integrand is |4a-1|/sqrt2, which has
        // a kink at a = 1/4; the analytic integral is 1.25/sqrt2.
        let mut tape = Tape::new(vec![1, 2, 1]);
        let flat = tape.flatten(tape.input_id());
        let x1 = tape
            .affine(flat, Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap(), Tensor::zeros(vec![1]))
            .unwrap();
        let x2 = tape
            .affine(flat, Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap(), Tensor::zeros(vec![1]))
            .unwrap();
        let prod = tape.mul(x1, x2).unwrap();
        tape.set_output(prod);
        let x = img(&[1.0, 2.0]);
        let b = img(&[-1.0, 0.0]);
        let analytic = 1.25 / 2f64.sqrt();
        let coarse = (idg_vis(&tape, &x, &b, &[0, 1], 0, 10).unwrap() - analytic).abs();
        let fine = (idg_vis(&tape, &x, &b, &[0, 1], 0, 1000).unwrap() - analytic).abs();
        assert!(fine < coarse);
        assert!(fine < 5e-3, "fine error {fine}");
    }

    #[test]
    fn attribute_singleton_is_exact() {
        let tape = linear_tape(&[3.0, 1.0, 1.0]);
        let x = img(&[2.0, 1.0, 1.0]);
        let config = IDGConfig::default_for(3);
        let a = attribute_set(&tape, &x, &[0], 0, &config).unwrap();
        // |w0 x0| / |x0| = |w0|
        assert!((a - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_enumeration_matches_manual_sum() {
        let tape = linear_tape(&[1.0, 2.0, 0.0]);
        let x = img(&[1.0, 1.0, 0.0]);
        let b = Tensor::zeros(vec![1, 3, 1]);
        let v1 = idg_vis(&tape, &x, &b, &[0], 0, 4).unwrap();
        let v2 = idg_vis(&tape, &x, &b, &[1], 0, 4).unwrap();
        let v12 = idg_vis(&tape, &x, &b, &[0, 1], 0, 4).unwrap();
        let a = attribute_set_exact(&tape, &x, &b, &[0, 1], 0, 4).unwrap();
        assert!((a - (v1 + v2 + v12)).abs() < 1e-12);
        // monotonicity: every added subset term is nonnegative
        let a1 = attribute_set_exact(&tape, &x, &b, &[0], 0, 4).unwrap();
        assert!(a1 <= a + 1e-12);
    }

    #[test]
    fn exact_rejects_large_sets() {
        let tape = linear_tape(&[1.0; 3]);
        let x = img(&[1.0; 3]);
        let b = Tensor::zeros(vec![1, 3, 1]);
        let set: Vec<usize> = (0..21).collect();
        assert!(matches!(
            attribute_set_exact(&tape, &x, &b, &set, 0, 2),
            Err(Error::SetTooLarge(21))
        ));
    }

    #[test]
    fn mc_estimator_tracks_exact() {
        let tape = linear_tape(&[1.0, -2.0, 3.0]);
        let x = img(&[0.5, 1.0, 0.25]);
        let b = Tensor::zeros(vec![1, 3, 1]);
        let exact = attribute_set_exact(&tape, &x, &b, &[0, 1, 2], 0, 8).unwrap();
        let mut config = IDGConfig::new(8, 4000, b.clone(), 0).unwrap();
        config.rng_seed = 17;
        let mc = attribute_set(&tape, &x, &[0, 1, 2], 0, &config).unwrap();
        assert!((mc - exact).abs() / exact < 0.1, "mc={mc} exact={exact}");
    }

    fn collection(pixels: Vec<Vec<usize>>) -> SetCollection {
        SetCollection {
            sets: pixels
                .into_iter()
                .map(|p| InteractionSet { seed: p[0], mask_id: 0, pixels: p })
                .collect(),
            image_id: "test".into(),
            config: DetectionConfig::default(),
        }
    }

    #[test]
    fn aggregate_max_and_sum_rules() {
        let sets = collection(vec![vec![0, 1, 2], vec![2, 3]]);
        let max = aggregate_saliency(&sets, &[0.3, 0.9], 1, 5, false).unwrap();
        assert_eq!(max.values, vec![0.3, 0.3, 0.9, 0.9, 0.0]);
        let sum = aggregate_saliency(&sets, &[0.3, 0.9], 1, 5, true).unwrap();
        assert!((sum.values[2] - 1.2).abs() < 1e-12);
        assert!(aggregate_saliency(&sets, &[0.3], 1, 5, false).is_err());
    }

    #[test]
    fn ig_linear_exact_and_zero_path() {
        let tape = linear_tape(&[1.5, -0.5, 2.0]);
        let x = img(&[1.0, 2.0, 3.0]);
        let b = Tensor::zeros(vec![1, 3, 1]);
        let map = integrated_gradients(&tape, &x, &b, 0, 3).unwrap();
        assert!((map.values[0] - 1.5).abs() < 1e-12);
        assert!((map.values[1] + 1.0).abs() < 1e-12);
        assert!((map.values[2] - 6.0).abs() < 1e-12);
        let zero = integrated_gradients(&tape, &b, &b, 0, 3).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn result_text_roundtrip() {
        let map = SaliencyMap::new(2, 2, vec![0.0, 0.5, 0.25, 0.0]).unwrap();
        let result = AttributionResult {
            image_id: "img-7".into(),
            scores: vec![0.5, 0.25],
            pixels: vec![vec![1], vec![2]],
            map,
            m: 50,
            t: 50,
            rng_seed: 9,
        };
        let back = AttributionResult::from_text(&result.to_text()).unwrap();
        assert_eq!(back.image_id, result.image_id);
        assert_eq!(back.pixels, result.pixels);
        assert_eq!(back.scores, result.scores);
        assert_eq!(back.map, result.map);
        assert_eq!((back.m, back.t, back.rng_seed), (50, 50, 9));
        assert!(AttributionResult::from_text("garbage").is_err());
    }
}
