//! Interaction-set detection: seed selection inside spatial-prior masks,
//! Hessian-row thresholding at mu, and breadth-first expansion into sets
//! of at most nu features, producing up to k sets per image.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{self, Tape};
use crate::error::{Error, Result};
use crate::metrics::SaliencyMap;
use crate::segmentation::MaskSet;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStrategy {
    TopIg,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMode {
    /// Candidates require row[j] > mu (the printed Def. uses the signed value).
    Signed,
    /// Candidates require |row[j]| > mu; negative curvature is still interaction.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowNormalization {
    None,
    /// Divide each row by its largest off-diagonal |entry| before thresholding.
    MaxAbs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    pub mu: f64,
    pub nu: usize,
    pub k: usize,
    pub seed_strategy: SeedStrategy,
    pub hessian_mode: HessianMode,
    pub row_normalization: RowNormalization,
    /// RNG seed for the random seed strategy.
    pub rng_seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            mu: 0.5,
            nu: 50,
            k: 5,
            seed_strategy: SeedStrategy::TopIg,
            hessian_mode: HessianMode::Absolute,
            row_normalization: RowNormalization::MaxAbs,
            rng_seed: 0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu < 1 {
            return Err(Error::InvalidParam("nu must be >= 1".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        if self.row_normalization == RowNormalization::MaxAbs
            && !(0.0..=1.0).contains(&self.mu)
        {
            return Err(Error::InvalidParam(format!(
                "mu must lie in [0, 1] under max-abs normalization, got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

/// Pixel indices discovered by Hessian-guided expansion from a seed,
/// in insertion order. The seed is always a member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSet {
    pub pixels: Vec<usize>,
    pub seed: usize,
    pub mask_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetCollection {
    pub sets: Vec<InteractionSet>,
    pub image_id: String,
    pub config: DetectionConfig,
}

/// One Hessian row of logit `class`, reduced to per-pixel values.
/// For multi-channel inputs the probe covers all channels of the pixel
/// and output entries are combined per pixel (absolute sum in absolute
/// mode, plain sum in signed mode).
pub fn hessian_pixel_row(
    tape: &Tape,
    x: &Tensor,
    class: usize,
    pixel: usize,
    mode: HessianMode,
) -> Result<Vec<f64>> {
    let shape = tape.input_shape();
    let channels = if shape.len() == 3 { shape[2] } else { 1 };
    let d = tape.input_len();
    let spatial = d / channels;
    if pixel >= spatial {
        return Err(Error::PixelIndex { index: pixel, dim: spatial });
    }
    let mut v = Tensor::zeros(vec![d]);
    for c in 0..channels {
        v.data_mut()[pixel * channels + c] = 1.0;
    }
    let row = autodiff::hvp(tape, x, class, &v)?;
    let mut out = vec![0.0; spatial];
    for p in 0..spatial {
        let mut s = 0.0;
        for c in 0..channels {
            let e = row.get(p * channels + c);
            s += match mode {
                HessianMode::Absolute => e.abs(),
                HessianMode::Signed => e,
            };
        }
        out[p] = s;
    }
    Ok(out)
}

/// Pick the next seed: the globally highest-IG pixel lying inside any
/// unused mask (masks tried in descending size order), or a uniform pixel
/// of a uniformly chosen unused mask under the random strategy. Returns
/// `None` when every mask has been used.
pub fn select_seed(
    ig_map: &SaliencyMap,
    masks: &MaskSet,
    used: &[bool],
    strategy: SeedStrategy,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, usize)> {
    let unused: Vec<usize> =
        masks.ids_by_size().into_iter().filter(|&id| !used[id]).collect();
    if unused.is_empty() {
        return None;
    }
    match strategy {
        SeedStrategy::TopIg => {
            let mut order: Vec<usize> = (0..ig_map.values.len()).collect();
            order.sort_by(|&a, &b| {
                ig_map.values[b]
                    .partial_cmp(&ig_map.values[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut member = vec![Vec::new(); ig_map.values.len()];
            for &id in &unused {
                for &p in masks.mask(id) {
                    member[p].push(id);
                }
            }
            for p in order {
                if let Some(&id) = member[p].first() {
                    return Some((p, id));
                }
            }
            None
        }
        SeedStrategy::Random => {
            let id = unused[rng.gen_range(0..unused.len())];
            let m = masks.mask(id);
            Some((m[rng.gen_range(0..m.len())], id))
        }
    }
}

/// Breadth-first Hessian expansion from a seed pixel (Algorithm 1 GetSet).
/// Each feature is queued for recursion exactly once, so the set takes at
/// most nu Hessian-row evaluations.
pub fn get_set(
    tape: &Tape,
    x: &Tensor,
    class: usize,
    seed: usize,
    mask_id: usize,
    config: &DetectionConfig,
) -> Result<InteractionSet> {
    config.validate()?;
    let shape = tape.input_shape();
    let channels = if shape.len() == 3 { shape[2] } else { 1 };
    let spatial = tape.input_len() / channels;
    if seed >= spatial {
        return Err(Error::PixelIndex { index: seed, dim: spatial });
    }
    let mut pixels = vec![seed];
    let mut member = vec![false; spatial];
    member[seed] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(i) = queue.pop_front() {
        if pixels.len() >= config.nu {
            break;
        }
        let row = hessian_pixel_row(tape, x, class, i, config.hessian_mode)?;
        let scale = match config.row_normalization {
            RowNormalization::None => 1.0,
            RowNormalization::MaxAbs => {
                let m = row
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v.abs())
                    .fold(0.0f64, f64::max);
                if m > 0.0 {
                    1.0 / m
                } else {
                    continue; // flat row: no interactions from this feature
                }
            }
        };
        let mut candidates: Vec<usize> = (0..spatial)
            .filter(|&j| j != i && !member[j])
            .filter(|&j| {
                let v = row[j] * scale;
                match config.hessian_mode {
                    HessianMode::Signed => v > config.mu,
                    HessianMode::Absolute => v.abs() > config.mu,
                }
            })
            .collect();
        candidates.sort_by(|&a, &b| {
            row[b]
                .abs()
                .partial_cmp(&row[a].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for j in candidates {
            if pixels.len() >= config.nu {
                break;
            }
            member[j] = true;
            pixels.push(j);
            queue.push_back(j);
        }
    }
    Ok(InteractionSet { pixels, seed, mask_id })
}

/// Algorithm 1 GenerateSets: repeat seed selection and expansion; after
/// each set every mask containing the chosen seed is retired. Stops at k
/// sets or mask exhaustion (then |S| < k).
pub fn generate_sets(
    tape: &Tape,
    x: &Tensor,
    class: usize,
    masks: &MaskSet,
    ig_map: &SaliencyMap,
    config: &DetectionConfig,
    image_id: &str,
) -> Result<SetCollection> {
    config.validate()?;
    if masks.is_empty() {
        return Err(Error::Mask("mask set is empty".into()));
    }
    let mut rng = rand::SeedableRng::seed_from_u64(config.rng_seed);
    let mut used = vec![false; masks.len()];
    let mut sets = Vec::new();
    while sets.len() < config.k {
        let Some((seed, mask_id)) =
            select_seed(ig_map, masks, &used, config.seed_strategy, &mut rng)
        else {
            break; // exhaustion: fewer than k sets
        };
        let set = get_set(tape, x, class, seed, mask_id, config)?;
        // masks <- {m in masks | seed not in m}
        for (id, m) in masks.masks().iter().enumerate() {
            if m.contains(&set.seed) {
                used[id] = true;
            }
        }
        sets.push(set);
    }
    Ok(SetCollection { sets, image_id: image_id.to_string(), config: config.clone() })
}

// ---- structured-text serialization -------------------------------------------

fn strategy_str(s: SeedStrategy) -> &'static str {
    match s {
        SeedStrategy::TopIg => "top-ig",
        SeedStrategy::Random => "random",
    }
}

fn mode_str(m: HessianMode) -> &'static str {
    match m {
        HessianMode::Signed => "signed",
        HessianMode::Absolute => "absolute",
    }
}

fn norm_str(n: RowNormalization) -> &'static str {
    match n {
        RowNormalization::None => "none",
        RowNormalization::MaxAbs => "max-abs",
    }
}

impl SetCollection {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        out.push_str("# hsets set collection\n");
        out.push_str(&format!("image {}\n", self.image_id));
        out.push_str(&format!(
            "config mu={} nu={} k={} seed_strategy={} hessian_mode={} row_normalization={} rng_seed={}\n",
            c.mu,
            c.nu,
            c.k,
            strategy_str(c.seed_strategy),
            mode_str(c.hessian_mode),
            norm_str(c.row_normalization),
            c.rng_seed,
        ));
        for s in &self.sets {
            let px: Vec<String> = s.pixels.iter().map(|p| p.to_string()).collect();
            out.push_str(&format!(
                "set seed={} mask={} pixels={}\n",
                s.seed,
                s.mask_id,
                px.join(",")
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SetCollection> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<SetCollection> {
        let mut image_id = String::new();
        let mut config = DetectionConfig::default();
        let mut sets = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("image ") {
                image_id = rest.to_string();
            } else if let Some(rest) = line.strip_prefix("config ") {
                for kv in rest.split_whitespace() {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("bad config token {kv:?}")))?;
                    match k {
                        "mu" => config.mu = parse_f64(v)?,
                        "nu" => config.nu = parse_usize(v)?,
                        "k" => config.k = parse_usize(v)?,
                        "rng_seed" => config.rng_seed = parse_usize(v)? as u64,
                        "seed_strategy" => {
                            config.seed_strategy = match v {
                                "top-ig" => SeedStrategy::TopIg,
                                "random" => SeedStrategy::Random,
                                _ => return Err(Error::Config(format!("bad strategy {v:?}"))),
                            }
                        }
                        "hessian_mode" => {
                            config.hessian_mode = match v {
                                "signed" => HessianMode::Signed,
                                "absolute" => HessianMode::Absolute,
                                _ => return Err(Error::Config(format!("bad mode {v:?}"))),
                            }
                        }
                        "row_normalization" => {
                            config.row_normalization = match v {
                                "none" => RowNormalization::None,
                                "max-abs" => RowNormalization::MaxAbs,
                                _ => return Err(Error::Config(format!("bad norm {v:?}"))),
                            }
                        }
                        _ => return Err(Error::Config(format!("unknown config key {k:?}"))),
                    }
                }
            } else if let Some(rest) = line.strip_prefix("set ") {
                let mut seed = None;
                let mut mask = None;
                let mut pixels = Vec::new();
                for kv in rest.split_whitespace() {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("bad set token {kv:?}")))?;
                    match k {
                        "seed" => seed = Some(parse_usize(v)?),
                        "mask" => mask = Some(parse_usize(v)?),
                        "pixels" => {
                            pixels = v
                                .split(',')
                                .map(parse_usize)
                                .collect::<Result<Vec<usize>>>()?
                        }
                        _ => return Err(Error::Config(format!("unknown set key {k:?}"))),
                    }
                }
                sets.push(InteractionSet {
                    pixels,
                    seed: seed.ok_or_else(|| Error::Config("set missing seed".into()))?,
                    mask_id: mask.ok_or_else(|| Error::Config("set missing mask".into()))?,
                });
            } else {
                return Err(Error::Config(format!("unrecognized line {line:?}")));
            }
        }
        Ok(SetCollection { sets, image_id, config })
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Config(format!("bad float {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Config(format!("bad integer {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{grid_segment, no_segmentation};
    use rand::SeedableRng;

    /// f(x) = x1*x2 + x3 on a 1x3 image.
    fn bilinear_tape() -> Tape {
        let mut t = Tape::new(vec![1, 3, 1]);
        let f = t.flatten(0);
        let p1 = t
            .affine(
                f,
                Tensor::new(vec![1, 3], vec![1.0, 0.0, 0.0]).unwrap(),
                Tensor::zeros(vec![1]),
            )
            .unwrap();
        let p2 = t
            .affine(
                f,
                Tensor::new(vec![1, 3], vec![0.0, 1.0, 0.0]).unwrap(),
                Tensor::zeros(vec![1]),
            )
            .unwrap();
        let prod = t.mul(p1, p2).unwrap();
        let p3 = t
            .affine(
                f,
                Tensor::new(vec![1, 3], vec![0.0, 0.0, 1.0]).unwrap(),
                Tensor::zeros(vec![1]),
            )
            .unwrap();
        let out = t.add(prod, p3).unwrap();
        t.set_output(out);
        t
    }

    /// f(x) = x1*x2 + x2*x3 + x3*x4 on a 1x4 image (chained interactions).
    fn chain_tape() -> Tape {
        let mut t = Tape::new(vec![1, 4, 1]);
        let f = t.flatten(0);
        let pick = |t: &mut Tape, f: usize, i: usize| {
            let mut w = vec![0.0; 4];
            w[i] = 1.0;
            t.affine(f, Tensor::new(vec![1, 4], w).unwrap(), Tensor::zeros(vec![1])).unwrap()
        };
        let x1 = pick(&mut t, f, 0);
        let x2 = pick(&mut t, f, 1);
        let x3 = pick(&mut t, f, 2);
        let x4 = pick(&mut t, f, 3);
        let p12 = t.mul(x1, x2).unwrap();
        let p23 = t.mul(x2, x3).unwrap();
        let p34 = t.mul(x3, x4).unwrap();
        let s = t.add(p12, p23).unwrap();
        let out = t.add(s, p34).unwrap();
        t.set_output(out);
        t
    }

    fn cfg(mu: f64, nu: usize, k: usize) -> DetectionConfig {
        DetectionConfig { mu, nu, k, ..Default::default() }
    }

    #[test]
    fn get_set_bilinear() {
        let t = bilinear_tape();
        let x = Tensor::new(vec![1, 3, 1], vec![1.0, 1.0, 1.0]).unwrap();
        let s = get_set(&t, &x, 0, 0, 0, &cfg(0.5, 10, 1)).unwrap();
        assert_eq!(s.pixels, vec![0, 1], "H(1,2)=1 passes, H(1,3)=0 does not");
    }

    #[test]
    fn nu_one_is_singleton() {
        let t = chain_tape();
        let x = Tensor::new(vec![1, 4, 1], vec![1.0; 4]).unwrap();
        let s = get_set(&t, &x, 0, 2, 0, &cfg(0.5, 1, 1)).unwrap();
        assert_eq!(s.pixels, vec![2]);
    }

    #[test]
    fn additive_model_collapses_to_singletons() {
        // f = sum w_i x_i + sum smooth_relu(x_i): zero cross-partials
        let mut t = Tape::new(vec![1, 4, 1]);
        let f = t.flatten(0);
        let lin = t
            .affine(
                f,
                Tensor::new(vec![1, 4], vec![0.3, -0.7, 1.1, 0.5]).unwrap(),
                Tensor::zeros(vec![1]),
            )
            .unwrap();
        let act = t.smooth_relu(f, 1e-3).unwrap();
        let summed = t
            .affine(act, Tensor::new(vec![1, 4], vec![1.0; 4]).unwrap(), Tensor::zeros(vec![1]))
            .unwrap();
        let out = t.add(lin, summed).unwrap();
        t.set_output(out);
        let x = Tensor::new(vec![1, 4, 1], vec![0.4, 0.9, 0.1, 0.7]).unwrap();
        for seed in 0..4 {
            let s = get_set(&t, &x, 0, seed, 0, &cfg(0.1, 10, 1)).unwrap();
            assert_eq!(s.pixels, vec![seed]);
        }
    }

    #[test]
    fn transitive_expansion_reaches_chain() {
        let t = chain_tape();
        let x = Tensor::new(vec![1, 4, 1], vec![1.0; 4]).unwrap();
        let s = get_set(&t, &x, 0, 0, 0, &cfg(0.1, 4, 1)).unwrap();
        let mut px = s.pixels.clone();
        px.sort_unstable();
        assert_eq!(px, vec![0, 1, 2, 3]);
        assert_eq!(s.pixels[0], 0, "seed first");
    }

    #[test]
    fn select_seed_skips_used_masks() {
        let masks = grid_segment(1, 4, 2).unwrap(); // masks {0,1}, {2,3}
        let ig = SaliencyMap::new(1, 4, vec![0.9, 0.1, 0.5, 0.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (p, m) = select_seed(&ig, &masks, &[false, false], SeedStrategy::TopIg, &mut rng)
            .unwrap();
        assert_eq!((p, m), (0, 0));
        // top pixel's mask used: next highest in an unused mask wins
        let (p, m) =
            select_seed(&ig, &masks, &[true, false], SeedStrategy::TopIg, &mut rng).unwrap();
        assert_eq!((p, m), (2, 1));
        // all used -> exhaustion
        assert!(
            select_seed(&ig, &masks, &[true, true], SeedStrategy::TopIg, &mut rng).is_none()
        );
    }

    #[test]
    fn generate_sets_k1_seeds_at_top_ig() {
        let t = bilinear_tape();
        let x = Tensor::new(vec![1, 3, 1], vec![1.0, 1.0, 1.0]).unwrap();
        let masks = no_segmentation(1, 3).unwrap();
        let ig = SaliencyMap::new(1, 3, vec![0.2, 0.9, 0.4]).unwrap();
        let sc = generate_sets(&t, &x, 0, &masks, &ig, &cfg(0.5, 10, 1), "img0").unwrap();
        assert_eq!(sc.sets.len(), 1);
        assert_eq!(sc.sets[0].seed, 1);
    }

    #[test]
    fn generate_sets_two_disjoint_masks() {
        let t = chain_tape();
        let x = Tensor::new(vec![1, 4, 1], vec![1.0; 4]).unwrap();
        let masks = grid_segment(1, 4, 2).unwrap();
        let ig = SaliencyMap::new(1, 4, vec![0.9, 0.1, 0.8, 0.2]).unwrap();
        let sc = generate_sets(&t, &x, 0, &masks, &ig, &cfg(0.9, 1, 2), "img0").unwrap();
        assert_eq!(sc.sets.len(), 2);
        assert_eq!(sc.sets[0].mask_id, 0);
        assert_eq!(sc.sets[1].mask_id, 1);
        assert_ne!(sc.sets[0].seed, sc.sets[1].seed);
    }

    #[test]
    fn exhaustion_emits_fewer_sets() {
        let t = bilinear_tape();
        let x = Tensor::new(vec![1, 3, 1], vec![1.0; 3]).unwrap();
        let masks = no_segmentation(1, 3).unwrap();
        let ig = SaliencyMap::new(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let sc = generate_sets(&t, &x, 0, &masks, &ig, &cfg(0.5, 10, 5), "img0").unwrap();
        assert_eq!(sc.sets.len(), 1, "single mask exhausts after one set");
    }

    #[test]
    fn determinism_top_ig() {
        let t = chain_tape();
        let x = Tensor::new(vec![1, 4, 1], vec![1.0; 4]).unwrap();
        let masks = grid_segment(1, 4, 2).unwrap();
        let ig = SaliencyMap::new(1, 4, vec![0.9, 0.1, 0.8, 0.2]).unwrap();
        let a = generate_sets(&t, &x, 0, &masks, &ig, &cfg(0.1, 4, 2), "i").unwrap();
        let b = generate_sets(&t, &x, 0, &masks, &ig, &cfg(0.1, 4, 2), "i").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn collection_text_roundtrip() {
        let sc = SetCollection {
            sets: vec![InteractionSet { pixels: vec![5, 2, 9], seed: 5, mask_id: 1 }],
            image_id: "img7".into(),
            config: DetectionConfig::default(),
        };
        let back = SetCollection::from_text(&sc.to_text()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1.5, 10, 1).validate().is_err(), "mu > 1 under max-abs");
        assert!(cfg(0.5, 0, 1).validate().is_err());
        assert!(cfg(0.5, 1, 0).validate().is_err());
        let signed = DetectionConfig {
            mu: 3.0,
            row_normalization: RowNormalization::None,
            ..Default::default()
        };
        assert!(signed.validate().is_ok(), "unnormalized mu unconstrained");
    }
}
