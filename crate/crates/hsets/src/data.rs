//! Datasets: in-memory image/label store, a procedurally generated digit
//! set (the desk-scale MNIST stand-in), the decoy variant with a
//! label-correlated corner patch, and IDX / PGM file I/O.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N * H * W * C pixel values in [0, 1], row-major.
    pub images: Vec<f64>,
    pub labels: Vec<usize>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn new(
        images: Vec<f64>,
        labels: Vec<usize>,
        height: usize,
        width: usize,
        channels: usize,
        classes: usize,
    ) -> Result<Self> {
        let per = height * width * channels;
        if per == 0 || images.len() != labels.len() * per {
            return Err(Error::InvalidParam(format!(
                "image buffer {} does not match {} labels x {} pixels",
                images.len(),
                labels.len(),
                per
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidParam(format!("label {bad} >= classes {classes}")));
        }
        if images.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParam("pixel values must lie in [0, 1]".into()));
        }
        Ok(Dataset { images, labels, height, width, channels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> Tensor {
        let per = self.pixels_per_image();
        Tensor::new(
            vec![self.height, self.width, self.channels],
            self.images[i * per..(i + 1) * per].to_vec(),
        )
        .unwrap()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let per = self.pixels_per_image();
        let mut images = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(&self.images[i * per..(i + 1) * per]);
            labels.push(self.labels[i]);
        }
        Dataset { images, labels, ..*self }
    }
}

const GLYPHS: [[&str; 7]; 10] = [
    [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    [".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."],
    ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    [".###.", "#....", "####.", "#...#", "#...#", "#...#", ".###."],
    ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    [".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."],
];

/// Procedurally rendered 28x28 grayscale digits: a 5x7 glyph scaled 3x,
/// placed at a random offset with random contrast over background noise.
/// Deterministic for a fixed seed; labels cycle 0..9.
pub fn synthetic_digits(n: usize, seed: u64) -> Dataset {
    synthetic_digits_with(n, seed, 0.55, 1.0, 0.20)
}

/// Low-contrast variant: digit strokes sit inside the background-noise
/// band, so digit identity is effectively unlearnable while an
/// exact-valued decoy patch stays trivially learnable. Used for the
/// shortcut-reliance experiments.
pub fn synthetic_digits_hard(n: usize, seed: u64) -> Dataset {
    synthetic_digits_with(n, seed, 0.02, 0.12, 0.05)
}

/// Digits with configurable contrast range and background-noise amplitude.
pub fn synthetic_digits_with(
    n: usize,
    seed: u64,
    contrast_lo: f64,
    contrast_hi: f64,
    noise: f64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (28usize, 28usize);
    let mut images = Vec::with_capacity(n * h * w);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 10;
        labels.push(label);
        let ox = rng.gen_range(0..=w - 15);
        let oy = rng.gen_range(0..=h - 21);
        let contrast = rng.gen_range(contrast_lo..contrast_hi);
        let mut img = vec![0.0f64; h * w];
        for v in img.iter_mut() {
            *v = rng.gen_range(0.0..noise);
        }
        for (gr, row) in GLYPHS[label].iter().enumerate() {
            for (gc, ch) in row.bytes().enumerate() {
                if ch == b'#' {
                    for dr in 0..3 {
                        for dc in 0..3 {
                            let r = oy + gr * 3 + dr;
                            let c = ox + gc * 3 + dc;
                            img[r * w + c] =
                                (contrast + rng.gen_range(-0.08f64..0.08)).clamp(0.0, 1.0);
                        }
                    }
                }
            }
        }
        images.extend_from_slice(&img);
    }
    Dataset::new(images, labels, h, w, 1, 10).unwrap()
}

/// Top-left corner pixel block used as the decoy.
pub fn decoy_patch_pixels(patch_size: usize, width: usize) -> Vec<usize> {
    let mut px = Vec::with_capacity(patch_size * patch_size);
    for r in 0..patch_size {
        for c in 0..patch_size {
            px.push(r * width + c);
        }
    }
    px
}

/// Stamp a corner patch whose intensity linearly encodes the label
/// (label 0 -> 0.0, label C-1 -> 1.0). Only the patch pixels change.
pub fn make_decoy_mnist(base: &Dataset, patch_size: usize) -> Result<Dataset> {
    stamp_patches(base, patch_size, |label, _| label as f64 / (10 - 1) as f64)
}

/// Test variant: patch intensities drawn uniformly at random, breaking the
/// label correlation.
pub fn make_decoy_mnist_random(base: &Dataset, patch_size: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..base.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    stamp_patches(base, patch_size, |_, i| draws[i])
}

/// Zero out the corner patch (the "decoys removed" condition).
pub fn remove_decoy(ds: &Dataset, patch_size: usize) -> Result<Dataset> {
    stamp_patches(ds, patch_size, |_, _| 0.0)
}

fn stamp_patches(
    base: &Dataset,
    patch_size: usize,
    intensity: impl Fn(usize, usize) -> f64,
) -> Result<Dataset> {
    if patch_size > base.height || patch_size > base.width {
        return Err(Error::InvalidParam(format!(
            "patch {patch_size} does not fit a {}x{} image",
            base.height, base.width
        )));
    }
    let mut out = base.clone();
    let per = base.pixels_per_image();
    let patch = decoy_patch_pixels(patch_size, base.width);
    for i in 0..base.len() {
        let v = intensity(base.labels[i], i);
        for &p in &patch {
            for c in 0..base.channels {
                out.images[i * per + p * base.channels + c] = v;
            }
        }
    }
    Ok(out)
}

// ---- IDX-style raw tensors --------------------------------------------------

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Write images as an IDX u8 tensor (values quantized to 0..=255) plus a
/// companion IDX label file.
pub fn save_idx(ds: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    if ds.channels != 1 {
        return Err(Error::InvalidParam("IDX export supports single-channel images".into()));
    }
    let mut f = std::fs::File::create(images_path)?;
    f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    f.write_all(&(ds.len() as u32).to_be_bytes())?;
    f.write_all(&(ds.height as u32).to_be_bytes())?;
    f.write_all(&(ds.width as u32).to_be_bytes())?;
    let bytes: Vec<u8> = ds.images.iter().map(|&v| (v * 255.0).round() as u8).collect();
    f.write_all(&bytes)?;

    let mut f = std::fs::File::create(labels_path)?;
    f.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    f.write_all(&(ds.len() as u32).to_be_bytes())?;
    let lbl: Vec<u8> = ds.labels.iter().map(|&l| l as u8).collect();
    f.write_all(&lbl)?;
    Ok(())
}

pub fn load_idx(images_path: &Path, labels_path: &Path, classes: usize) -> Result<Dataset> {
    let mut raw = Vec::new();
    std::fs::File::open(images_path)?.read_to_end(&mut raw)?;
    if raw.len() < 16 || u32::from_be_bytes([raw[0], raw[1], raw[2], raw[3]]) != IDX_IMAGES_MAGIC {
        return Err(Error::InvalidParam("bad IDX image magic".into()));
    }
    let n = u32::from_be_bytes([raw[4], raw[5], raw[6], raw[7]]) as usize;
    let h = u32::from_be_bytes([raw[8], raw[9], raw[10], raw[11]]) as usize;
    let w = u32::from_be_bytes([raw[12], raw[13], raw[14], raw[15]]) as usize;
    if raw.len() != 16 + n * h * w {
        return Err(Error::InvalidParam("IDX image payload length mismatch".into()));
    }
    let images: Vec<f64> = raw[16..].iter().map(|&b| b as f64 / 255.0).collect();

    let mut raw = Vec::new();
    std::fs::File::open(labels_path)?.read_to_end(&mut raw)?;
    if raw.len() < 8 || u32::from_be_bytes([raw[0], raw[1], raw[2], raw[3]]) != IDX_LABELS_MAGIC {
        return Err(Error::InvalidParam("bad IDX label magic".into()));
    }
    let ln = u32::from_be_bytes([raw[4], raw[5], raw[6], raw[7]]) as usize;
    if ln != n || raw.len() != 8 + ln {
        return Err(Error::InvalidParam("IDX label payload length mismatch".into()));
    }
    let labels: Vec<usize> = raw[8..].iter().map(|&b| b as usize).collect();
    Dataset::new(images, labels, h, w, 1, classes)
}

// ---- PGM (P5) ---------------------------------------------------------------

/// 8-bit binary PGM after per-image min-max normalization.
pub fn save_pgm(values: &[f64], height: usize, width: usize, path: &Path) -> Result<()> {
    assert_eq!(values.len(), height * width);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> =
        values.iter().map(|&v| (((v - lo) / span) * 255.0).round() as u8).collect();
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_pgm(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    let mut fields = Vec::new();
    let mut pos = 0usize;
    while fields.len() < 4 && pos < raw.len() {
        while pos < raw.len() && raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < raw.len() && raw[pos] == b'#' {
            while pos < raw.len() && raw[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&raw[start..pos]).unwrap_or("").to_string());
    }
    if fields.len() != 4 || fields[0] != "P5" {
        return Err(Error::InvalidParam("not a binary PGM (P5)".into()));
    }
    pos += 1; // single whitespace after maxval
    let w: usize = fields[1].parse().map_err(|_| Error::InvalidParam("bad PGM width".into()))?;
    let h: usize = fields[2].parse().map_err(|_| Error::InvalidParam("bad PGM height".into()))?;
    let maxval: f64 =
        fields[3].parse().map_err(|_| Error::InvalidParam("bad PGM maxval".into()))?;
    if raw.len() < pos + w * h {
        return Err(Error::InvalidParam("PGM payload too short".into()));
    }
    let values = raw[pos..pos + w * h].iter().map(|&b| b as f64 / maxval).collect();
    Ok((values, h, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoy_intensity_encodes_label() {
        let base = synthetic_digits(20, 1);
        let decoy = make_decoy_mnist(&base, 4).unwrap();
        let per = base.pixels_per_image();
        for i in 0..base.len() {
            let want = base.labels[i] as f64 / 9.0;
            for &p in &decoy_patch_pixels(4, base.width) {
                assert_eq!(decoy.images[i * per + p], want);
            }
        }
        // label 0 -> 0.0, label 9 -> 1.0
        let i0 = base.labels.iter().position(|&l| l == 0).unwrap();
        let i9 = base.labels.iter().position(|&l| l == 9).unwrap();
        assert_eq!(decoy.images[i0 * per], 0.0);
        assert_eq!(decoy.images[i9 * per], 1.0);
    }

    #[test]
    fn decoy_leaves_other_pixels_unchanged() {
        let base = synthetic_digits(10, 2);
        let decoy = make_decoy_mnist(&base, 4).unwrap();
        let per = base.pixels_per_image();
        let patch: std::collections::HashSet<usize> =
            decoy_patch_pixels(4, base.width).into_iter().collect();
        for i in 0..base.len() {
            for p in 0..per {
                if !patch.contains(&p) {
                    assert_eq!(decoy.images[i * per + p], base.images[i * per + p]);
                }
            }
        }
    }

    #[test]
    fn decoy_patch_must_fit() {
        let base = synthetic_digits(2, 0);
        assert!(make_decoy_mnist(&base, 29).is_err());
    }

    #[test]
    fn patch_label_mutual_information_is_log2_ten() {
        // intensity is a deterministic bijection of the label, so the
        // plug-in MI estimate over the train split is H(label) = log2(10)
        let base = synthetic_digits(500, 3);
        let decoy = make_decoy_mnist(&base, 4).unwrap();
        let per = base.pixels_per_image();
        // joint histogram over (quantized intensity, label)
        let mut joint = std::collections::HashMap::new();
        let mut py = [0usize; 10];
        for i in 0..decoy.len() {
            let q = (decoy.images[i * per] * 9.0).round() as usize;
            *joint.entry((q, decoy.labels[i])).or_insert(0usize) += 1;
            py[decoy.labels[i]] += 1;
        }
        let n = decoy.len() as f64;
        let mut px = std::collections::HashMap::new();
        for (&(q, _), &c) in &joint {
            *px.entry(q).or_insert(0usize) += c;
        }
        let mut mi = 0.0;
        for (&(q, y), &c) in &joint {
            let pxy = c as f64 / n;
            mi += pxy * (pxy / (px[&q] as f64 / n * py[y] as f64 / n)).log2();
        }
        assert!((mi - 10f64.log2()).abs() < 1e-9, "mi = {mi}");
    }

    #[test]
    fn idx_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synthetic_digits(12, 7);
        let ip = dir.path().join("img.idx");
        let lp = dir.path().join("lbl.idx");
        save_idx(&ds, &ip, &lp).unwrap();
        let back = load_idx(&ip, &lp, 10).unwrap();
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.len(), ds.len());
        // 8-bit quantization error only
        for (a, b) in back.images.iter().zip(&ds.images) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn pgm_roundtrip_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let vals: Vec<f64> = (0..12).map(|i| i as f64).collect();
        save_pgm(&vals, 3, 4, &p).unwrap();
        let (back, h, w) = load_pgm(&p).unwrap();
        assert_eq!((h, w), (3, 4));
        assert_eq!(back.len(), 12);
        assert_eq!(back[0], 0.0);
        assert_eq!(back[11], 1.0);
    }
}
