//! Small feed-forward classifiers: layer specs, weight init, a minimal
//! SGD trainer, and the `.hsm` weight file format (text header + f32 blob).

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{self, Tape};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense { input: usize, output: usize },
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize },
    SmoothRelu { tau: f64 },
    Flatten,
    AvgPool { kernel: usize },
    /// Eval-time only; never recorded on the attribution tape.
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// (H, W, C)
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub classes: usize,
}

impl NetworkSpec {
    /// Reference desk MLP: 784 -> 128 -> 10 with smooth ReLU.
    pub fn mlp(tau: f64) -> Self {
        NetworkSpec {
            input_shape: (28, 28, 1),
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { input: 784, output: 128 },
                LayerSpec::SmoothRelu { tau },
                LayerSpec::Dense { input: 128, output: 10 },
            ],
            classes: 10,
        }
    }

    /// Small MLP variant for fast desk experiments: 784 -> 32 -> 10.
    pub fn mlp_small(tau: f64) -> Self {
        NetworkSpec {
            input_shape: (28, 28, 1),
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { input: 784, output: 32 },
                LayerSpec::SmoothRelu { tau },
                LayerSpec::Dense { input: 32, output: 10 },
            ],
            classes: 10,
        }
    }

    /// Reference desk CNN: conv(1->8,5) -> pool2 -> conv(8->16,5) -> pool2 -> dense -> 10.
    pub fn cnn(tau: f64) -> Self {
        NetworkSpec {
            input_shape: (28, 28, 1),
            layers: vec![
                LayerSpec::Conv2d { in_ch: 1, out_ch: 8, kernel: 5, stride: 1, pad: 0 },
                LayerSpec::SmoothRelu { tau },
                LayerSpec::AvgPool { kernel: 2 },
                LayerSpec::Conv2d { in_ch: 8, out_ch: 16, kernel: 5, stride: 1, pad: 0 },
                LayerSpec::SmoothRelu { tau },
                LayerSpec::AvgPool { kernel: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { input: 256, output: 10 },
            ],
            classes: 10,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.0 * self.input_shape.1 * self.input_shape.2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// One entry per layer: `Some((kernel, bias))` for Dense/Conv2d, `None` otherwise.
    pub layers: Vec<Option<(Tensor, Tensor)>>,
}

/// Seeded uniform Glorot-style initialization.
pub fn init_weights(spec: &NetworkSpec, seed: u64) -> Weights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layers
        .iter()
        .map(|l| match l {
            LayerSpec::Dense { input, output } => {
                let bound = (6.0 / (input + output) as f64).sqrt();
                let w: Vec<f64> =
                    (0..input * output).map(|_| rng.gen_range(-bound..bound)).collect();
                Some((
                    Tensor::new(vec![*output, *input], w).unwrap(),
                    Tensor::zeros(vec![*output]),
                ))
            }
            LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => {
                let fan_in = in_ch * kernel * kernel;
                let fan_out = out_ch * kernel * kernel;
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let n = out_ch * kernel * kernel * in_ch;
                let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
                Some((
                    Tensor::new(vec![*out_ch, *kernel, *kernel, *in_ch], w).unwrap(),
                    Tensor::zeros(vec![*out_ch]),
                ))
            }
            _ => None,
        })
        .collect();
    Weights { layers }
}

/// Record the classifier on a fresh tape. Softmax (eval-only) is skipped:
/// attributions always operate on logits.
pub fn build_tape(spec: &NetworkSpec, weights: &Weights) -> Result<Tape> {
    if weights.layers.len() != spec.layers.len() {
        return Err(Error::ModelFormat(format!(
            "weights cover {} layers, spec has {}",
            weights.layers.len(),
            spec.layers.len()
        )));
    }
    let (h, w, c) = spec.input_shape;
    let mut tape = Tape::new(vec![h, w, c]);
    let mut cur = tape.input_id();
    for (i, layer) in spec.layers.iter().enumerate() {
        match layer {
            LayerSpec::Dense { .. } => {
                let (wt, b) = weights.layers[i]
                    .as_ref()
                    .ok_or_else(|| Error::ModelFormat(format!("missing weights for layer {i}")))?;
                cur = tape.affine(cur, wt.clone(), b.clone())?;
            }
            LayerSpec::Conv2d { stride, pad, .. } => {
                let (wt, b) = weights.layers[i]
                    .as_ref()
                    .ok_or_else(|| Error::ModelFormat(format!("missing weights for layer {i}")))?;
                cur = tape.conv2d(cur, wt.clone(), b.clone(), *stride, *pad)?;
            }
            LayerSpec::SmoothRelu { tau } => cur = tape.smooth_relu(cur, *tau)?,
            LayerSpec::Flatten => cur = tape.flatten(cur),
            LayerSpec::AvgPool { kernel } => cur = tape.avg_pool2d(cur, *kernel)?,
            LayerSpec::Softmax => {
                if i + 1 != spec.layers.len() {
                    return Err(Error::ModelFormat("softmax must be the final layer".into()));
                }
            }
        }
    }
    tape.set_output(tape.nodes().len() - 1);
    if tape.output_len() != spec.classes {
        return Err(Error::ModelFormat(format!(
            "final layer emits {} values, spec declares {} classes",
            tape.output_len(),
            spec.classes
        )));
    }
    Ok(tape)
}

/// Deterministic class logits for one image.
pub fn predict(spec: &NetworkSpec, weights: &Weights, image: &Tensor) -> Result<Tensor> {
    let tape = build_tape(spec, weights)?;
    autodiff::forward(&tape, image)
}

/// Numerically stable softmax, for eval-time probabilities only.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.1, epochs: 5, batch: 32, seed: 0 }
    }
}

/// Mini-batch SGD on softmax cross-entropy over logits. Deterministic for
/// a fixed seed; zero epochs returns the initialization unchanged.
pub fn train_sgd(spec: &NetworkSpec, dataset: &Dataset, config: &TrainConfig) -> Result<Weights> {
    if dataset.len() == 0 {
        return Err(Error::InvalidParam("dataset is empty".into()));
    }
    if !(config.lr > 0.0) {
        return Err(Error::InvalidParam(format!("lr must be positive, got {}", config.lr)));
    }
    let mut weights = init_weights(spec, config.seed);
    let n = dataset.len();
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1 + epoch as u64));
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(config.batch) {
            let tape = build_tape(spec, &weights)?;
            let mut acc: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; tape.nodes().len()];
            let mut loss = 0.0;
            for &idx in batch {
                let img = dataset.image(idx);
                let values = tape.eval::<f64>(img.data())?;
                let logits = values.last().unwrap();
                let probs = softmax(logits);
                let label = dataset.labels[idx];
                loss -= probs[label].max(1e-300).ln();
                let mut seed: Vec<f64> = probs;
                seed[label] -= 1.0;
                let (_, pgrads) = tape.backward(&values, &seed, true);
                for (slot, g) in acc.iter_mut().zip(pgrads) {
                    if let Some((dw, db)) = g {
                        match slot {
                            Some((aw, ab)) => {
                                for (a, d) in aw.iter_mut().zip(&dw) {
                                    *a += d;
                                }
                                for (a, d) in ab.iter_mut().zip(&db) {
                                    *a += d;
                                }
                            }
                            None => *slot = Some((dw, db)),
                        }
                    }
                }
            }
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            let scale = config.lr / batch.len() as f64;
            // tape node order: parameterized nodes appear in layer order
            let mut param_nodes = acc.into_iter().flatten();
            for lw in weights.layers.iter_mut() {
                if let Some((w, b)) = lw {
                    let (dw, db) = param_nodes.next().expect("param grad per layer");
                    for (wv, g) in w.data_mut().iter_mut().zip(&dw) {
                        *wv -= scale * g;
                    }
                    for (bv, g) in b.data_mut().iter_mut().zip(&db) {
                        *bv -= scale * g;
                    }
                }
            }
        }
    }
    Ok(weights)
}

/// Fraction of the dataset classified correctly.
pub fn accuracy(spec: &NetworkSpec, weights: &Weights, dataset: &Dataset) -> Result<f64> {
    let tape = build_tape(spec, weights)?;
    let mut hits = 0usize;
    for i in 0..dataset.len() {
        let logits = autodiff::forward(&tape, &dataset.image(i))?;
        if logits.argmax() == dataset.labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len() as f64)
}

// ---- .hsm file format -----------------------------------------------------
//
// Self-describing text header, then a little-endian f32 blob holding each
// parameterized layer's kernel followed by its bias, in layer order.

pub fn save_model(spec: &NetworkSpec, weights: &Weights, path: &Path) -> Result<()> {
    let mut header = String::new();
    header.push_str("HSM 1\n");
    header.push_str(&format!(
        "input {} {} {}\n",
        spec.input_shape.0, spec.input_shape.1, spec.input_shape.2
    ));
    header.push_str(&format!("classes {}\n", spec.classes));
    for layer in &spec.layers {
        match layer {
            LayerSpec::Dense { input, output } => {
                header.push_str(&format!("layer dense {input} {output}\n"))
            }
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, pad } => header.push_str(
                &format!("layer conv2d {in_ch} {out_ch} {kernel} {stride} {pad}\n"),
            ),
            LayerSpec::SmoothRelu { tau } => {
                header.push_str(&format!("layer smooth_relu {tau}\n"))
            }
            LayerSpec::Flatten => header.push_str("layer flatten\n"),
            LayerSpec::AvgPool { kernel } => header.push_str(&format!("layer avgpool {kernel}\n")),
            LayerSpec::Softmax => header.push_str("layer softmax\n"),
        }
    }
    let mut blob: Vec<u8> = Vec::new();
    for lw in weights.layers.iter().flatten() {
        for t in [&lw.0, &lw.1] {
            for &v in t.data() {
                blob.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    header.push_str("dtype f32 le\n");
    header.push_str(&format!("blob {}\n", blob.len()));
    let mut f = std::fs::File::create(path)?;
    f.write_all(header.as_bytes())?;
    f.write_all(&blob)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(NetworkSpec, Weights)> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    // header is everything up to and including the "blob N\n" line
    let mut pos = 0usize;
    let mut lines: Vec<String> = Vec::new();
    loop {
        let nl = raw[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::ModelFormat("unterminated header".into()))?;
        let line = std::str::from_utf8(&raw[pos..pos + nl])
            .map_err(|_| Error::ModelFormat("non-utf8 header".into()))?
            .to_string();
        pos += nl + 1;
        let is_blob = line.starts_with("blob ");
        lines.push(line);
        if is_blob {
            break;
        }
        if pos >= raw.len() {
            return Err(Error::ModelFormat("missing blob line".into()));
        }
    }
    let mut it = lines.iter();
    let magic = it.next().ok_or_else(|| Error::ModelFormat("empty file".into()))?;
    if magic != "HSM 1" {
        return Err(Error::ModelFormat(format!("bad magic line {magic:?}")));
    }
    let mut input_shape = None;
    let mut classes = None;
    let mut layers = Vec::new();
    let mut blob_len = None;
    for line in it {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["input", h, w, c] => {
                input_shape = Some((parse(h)?, parse(w)?, parse(c)?));
            }
            ["classes", c] => classes = Some(parse(c)?),
            ["layer", "dense", i, o] => {
                layers.push(LayerSpec::Dense { input: parse(i)?, output: parse(o)? })
            }
            ["layer", "conv2d", ic, oc, k, s, p] => layers.push(LayerSpec::Conv2d {
                in_ch: parse(ic)?,
                out_ch: parse(oc)?,
                kernel: parse(k)?,
                stride: parse(s)?,
                pad: parse(p)?,
            }),
            ["layer", "smooth_relu", tau] => layers.push(LayerSpec::SmoothRelu {
                tau: tau.parse().map_err(|_| Error::ModelFormat(format!("bad tau {tau}")))?,
            }),
            ["layer", "flatten"] => layers.push(LayerSpec::Flatten),
            ["layer", "avgpool", k] => layers.push(LayerSpec::AvgPool { kernel: parse(k)? }),
            ["layer", "softmax"] => layers.push(LayerSpec::Softmax),
            ["layer", kind, ..] => {
                return Err(Error::ModelFormat(format!("unsupported layer kind {kind:?}")))
            }
            ["dtype", "f32", "le"] => {}
            ["dtype", ..] => return Err(Error::ModelFormat(format!("unsupported dtype: {line}"))),
            ["blob", n] => blob_len = Some(parse(n)?),
            _ => return Err(Error::ModelFormat(format!("unrecognized header line {line:?}"))),
        }
    }
    let input_shape = input_shape.ok_or_else(|| Error::ModelFormat("missing input line".into()))?;
    let classes = classes.ok_or_else(|| Error::ModelFormat("missing classes line".into()))?;
    let blob_len: usize = blob_len.ok_or_else(|| Error::ModelFormat("missing blob line".into()))?;
    let blob = &raw[pos..];
    if blob.len() != blob_len {
        return Err(Error::BlobLength { expected: blob_len, got: blob.len() });
    }
    let spec = NetworkSpec { input_shape, layers, classes };

    // expected tensor shapes from the spec
    let mut offset = 0usize;
    let mut read_tensor = |shape: Vec<usize>| -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let bytes = n * 4;
        if offset + bytes > blob.len() {
            return Err(Error::BlobLength { expected: offset + bytes, got: blob.len() });
        }
        let mut data = Vec::with_capacity(n);
        for k in 0..n {
            let b = &blob[offset + 4 * k..offset + 4 * k + 4];
            data.push(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
        }
        offset += bytes;
        Tensor::new(shape, data)
    };
    let mut lw = Vec::new();
    for layer in &spec.layers {
        lw.push(match layer {
            LayerSpec::Dense { input, output } => Some((
                read_tensor(vec![*output, *input])?,
                read_tensor(vec![*output])?,
            )),
            LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => Some((
                read_tensor(vec![*out_ch, *kernel, *kernel, *in_ch])?,
                read_tensor(vec![*out_ch])?,
            )),
            _ => None,
        });
    }
    if offset != blob.len() {
        return Err(Error::BlobLength { expected: offset, got: blob.len() });
    }
    let weights = Weights { layers: lw };
    build_tape(&spec, &weights)?; // validates shape composition
    Ok((spec, weights))
}

fn parse(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::ModelFormat(format!("bad integer {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    #[test]
    fn identity_dense_predicts_identity() {
        let spec = NetworkSpec {
            input_shape: (1, 4, 1),
            layers: vec![LayerSpec::Flatten, LayerSpec::Dense { input: 4, output: 4 }],
            classes: 4,
        };
        let mut w = vec![0.0; 16];
        for i in 0..4 {
            w[i * 4 + i] = 1.0;
        }
        let weights = Weights {
            layers: vec![
                None,
                Some((Tensor::new(vec![4, 4], w).unwrap(), Tensor::zeros(vec![4]))),
            ],
        };
        let onehot = Tensor::new(vec![1, 4, 1], vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let logits = predict(&spec, &weights, &onehot).unwrap();
        assert_eq!(logits.data(), &[0.0, 0.0, 1.0, 0.0]);

        // zero weights -> all-zero logits
        let weights0 = Weights {
            layers: vec![None, Some((Tensor::zeros(vec![4, 4]), Tensor::zeros(vec![4])))],
        };
        let logits = predict(&spec, &weights0, &onehot).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn train_separable_toy() {
        // 2-pixel, 2-class linearly separable set
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let v = i as f64 / 19.0;
            images.extend_from_slice(&[v, 1.0 - v]);
            labels.push(if v > 0.5 { 1 } else { 0 });
        }
        let ds = Dataset::new(images, labels, 1, 2, 1, 2).unwrap();
        let spec = NetworkSpec {
            input_shape: (1, 2, 1),
            layers: vec![LayerSpec::Flatten, LayerSpec::Dense { input: 2, output: 2 }],
            classes: 2,
        };
        let cfg = TrainConfig { lr: 0.5, epochs: 50, batch: 4, seed: 1 };
        let w = train_sgd(&spec, &ds, &cfg).unwrap();
        assert_eq!(accuracy(&spec, &w, &ds).unwrap(), 1.0);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let ds = data::synthetic_digits(8, 3);
        let spec = NetworkSpec::mlp_small(1e-3);
        let cfg = TrainConfig { lr: 0.1, epochs: 0, batch: 4, seed: 7 };
        let w = train_sgd(&spec, &ds, &cfg).unwrap();
        assert_eq!(w, init_weights(&spec, 7));
    }

    #[test]
    fn train_same_seed_identical() {
        let ds = data::synthetic_digits(32, 5);
        let spec = NetworkSpec::mlp_small(1e-3);
        let cfg = TrainConfig { lr: 0.1, epochs: 1, batch: 8, seed: 11 };
        let a = train_sgd(&spec, &ds, &cfg).unwrap();
        let b = train_sgd(&spec, &ds, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_roundtrip_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NetworkSpec::cnn(1e-3);
        let w = init_weights(&spec, 42);
        let p1 = dir.path().join("a.hsm");
        let p2 = dir.path().join("b.hsm");
        save_model(&spec, &w, &p1).unwrap();
        let (spec2, w2) = load_model(&p1).unwrap();
        assert_eq!(spec, spec2);
        save_model(&spec2, &w2, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        // predictions preserved exactly across the roundtrip
        let img = Tensor::new(vec![28, 28, 1], (0..784).map(|i| (i % 9) as f64 / 8.0).collect())
            .unwrap();
        let a = predict(&spec, &{
            // widen the f32-stored weights the same way load does
            let (s, ww) = load_model(&p1).unwrap();
            assert_eq!(s, spec);
            ww
        }, &img)
        .unwrap();
        let b = predict(&spec2, &w2, &img).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn truncated_blob_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NetworkSpec::mlp_small(1e-3);
        let w = init_weights(&spec, 0);
        let p = dir.path().join("m.hsm");
        save_model(&spec, &w, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&p, bytes).unwrap();
        match load_model(&p) {
            Err(Error::BlobLength { expected, got }) => assert!(expected > got),
            other => panic!("expected blob-length error, got {other:?}"),
        }
    }

    #[test]
    fn cross_writer_load() {
        // file assembled by an independent writer following the format
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.hsm");
        let w: Vec<f32> = vec![1.0, 0.0, 0.0, 1.0];
        let b: Vec<f32> = vec![0.5, -0.5];
        let mut blob = Vec::new();
        for v in w.iter().chain(&b) {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        let header = format!(
            "HSM 1\ninput 1 2 1\nclasses 2\nlayer flatten\nlayer dense 2 2\ndtype f32 le\nblob {}\n",
            blob.len()
        );
        let mut bytes = header.into_bytes();
        bytes.extend_from_slice(&blob);
        std::fs::write(&p, bytes).unwrap();
        let (spec, weights) = load_model(&p).unwrap();
        let logits =
            predict(&spec, &weights, &Tensor::new(vec![1, 2, 1], vec![2.0, 3.0]).unwrap())
                .unwrap();
        assert_eq!(logits.data(), &[2.5, 2.5]);
    }
}
