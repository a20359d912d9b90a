//! Flat key=value run configuration with `[section]` headers, plus the
//! FNV-1a hash embedded in every output artifact.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::detection::{DetectionConfig, HessianMode, RowNormalization, SeedStrategy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    /// "synthetic" or a path prefix P loading P-images.idx / P-labels.idx.
    pub source: String,
    pub n_images: usize,
    pub data_seed: u64,
    pub decoy: bool,
    pub patch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// mlp | mlp_small | cnn
    pub arch: String,
    pub tau: f64,
    pub path: PathBuf,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    /// grid | quickshift | none | file
    pub mode: String,
    pub cell: usize,
    pub kernel_size: f64,
    pub max_dist: f64,
    pub ratio: f64,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionConfig {
    pub m: usize,
    pub t: usize,
    /// zero | mean
    pub baseline: String,
    pub sum_overlaps: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub sigma: f64,
    pub road_l: usize,
    pub road_k: usize,
    pub ig_m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    /// 0 means use all available cores.
    pub workers: usize,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub segmentation: SegmentationConfig,
    pub detection: DetectionConfig,
    pub attribution: AttributionConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("out"),
            seed: 0,
            workers: 0,
            data: DataConfig {
                source: "synthetic".into(),
                n_images: 100,
                data_seed: 7,
                decoy: false,
                patch_size: 4,
            },
            model: ModelConfig {
                arch: "mlp_small".into(),
                tau: 1e-3,
                path: PathBuf::from("model.hsm"),
                lr: 0.1,
                epochs: 5,
                batch: 32,
            },
            segmentation: SegmentationConfig {
                mode: "grid".into(),
                cell: 7,
                kernel_size: 2.0,
                max_dist: 6.0,
                ratio: 8.0,
                path: PathBuf::from("masks.txt"),
            },
            detection: DetectionConfig::default(),
            attribution: AttributionConfig {
                m: 50,
                t: 50,
                baseline: "zero".into(),
                sum_overlaps: false,
            },
            metrics: MetricsConfig { sigma: 0.01, road_l: 15, road_k: 5, ig_m: 50 },
        }
    }
}

fn fmt_strategy(s: SeedStrategy) -> &'static str {
    match s {
        SeedStrategy::TopIg => "top_ig",
        SeedStrategy::Random => "random",
    }
}

fn fmt_mode(m: HessianMode) -> &'static str {
    match m {
        HessianMode::Signed => "signed",
        HessianMode::Absolute => "absolute",
    }
}

fn fmt_norm(n: RowNormalization) -> &'static str {
    match n {
        RowNormalization::None => "none",
        RowNormalization::MaxAbs => "max_abs",
    }
}

impl RunConfig {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "[run]").unwrap();
        writeln!(s, "output_dir={}", self.output_dir.display()).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        writeln!(s, "workers={}", self.workers).unwrap();
        writeln!(s, "\n[data]").unwrap();
        writeln!(s, "source={}", self.data.source).unwrap();
        writeln!(s, "n_images={}", self.data.n_images).unwrap();
        writeln!(s, "data_seed={}", self.data.data_seed).unwrap();
        writeln!(s, "decoy={}", self.data.decoy).unwrap();
        writeln!(s, "patch_size={}", self.data.patch_size).unwrap();
        writeln!(s, "\n[model]").unwrap();
        writeln!(s, "arch={}", self.model.arch).unwrap();
        writeln!(s, "tau={}", self.model.tau).unwrap();
        writeln!(s, "path={}", self.model.path.display()).unwrap();
        writeln!(s, "lr={}", self.model.lr).unwrap();
        writeln!(s, "epochs={}", self.model.epochs).unwrap();
        writeln!(s, "batch={}", self.model.batch).unwrap();
        writeln!(s, "\n[segmentation]").unwrap();
        writeln!(s, "mode={}", self.segmentation.mode).unwrap();
        writeln!(s, "cell={}", self.segmentation.cell).unwrap();
        writeln!(s, "kernel_size={}", self.segmentation.kernel_size).unwrap();
        writeln!(s, "max_dist={}", self.segmentation.max_dist).unwrap();
        writeln!(s, "ratio={}", self.segmentation.ratio).unwrap();
        writeln!(s, "path={}", self.segmentation.path.display()).unwrap();
        writeln!(s, "\n[detection]").unwrap();
        writeln!(s, "mu={}", self.detection.mu).unwrap();
        writeln!(s, "nu={}", self.detection.nu).unwrap();
        writeln!(s, "k={}", self.detection.k).unwrap();
        writeln!(s, "seed_strategy={}", fmt_strategy(self.detection.seed_strategy)).unwrap();
        writeln!(s, "hessian_mode={}", fmt_mode(self.detection.hessian_mode)).unwrap();
        writeln!(s, "row_normalization={}", fmt_norm(self.detection.row_normalization)).unwrap();
        writeln!(s, "\n[attribution]").unwrap();
        writeln!(s, "m={}", self.attribution.m).unwrap();
        writeln!(s, "t={}", self.attribution.t).unwrap();
        writeln!(s, "baseline={}", self.attribution.baseline).unwrap();
        writeln!(s, "sum_overlaps={}", self.attribution.sum_overlaps).unwrap();
        writeln!(s, "\n[metrics]").unwrap();
        writeln!(s, "sigma={}", self.metrics.sigma).unwrap();
        writeln!(s, "road_l={}", self.metrics.road_l).unwrap();
        writeln!(s, "road_k={}", self.metrics.road_k).unwrap();
        writeln!(s, "ig_m={}", self.metrics.ig_m).unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            cfg.apply(&section, key, value).map_err(|e| {
                Error::Config(format!("line {}: {e}", lineno + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
        }
        match (section, key) {
            ("run", "output_dir") => self.output_dir = value.into(),
            ("run", "seed") => self.seed = num(key, value)?,
            ("run", "workers") => self.workers = num(key, value)?,
            ("data", "source") => self.data.source = value.into(),
            ("data", "n_images") => self.data.n_images = num(key, value)?,
            ("data", "data_seed") => self.data.data_seed = num(key, value)?,
            ("data", "decoy") => self.data.decoy = num(key, value)?,
            ("data", "patch_size") => self.data.patch_size = num(key, value)?,
            ("model", "arch") => self.model.arch = value.into(),
            ("model", "tau") => self.model.tau = num(key, value)?,
            ("model", "path") => self.model.path = value.into(),
            ("model", "lr") => self.model.lr = num(key, value)?,
            ("model", "epochs") => self.model.epochs = num(key, value)?,
            ("model", "batch") => self.model.batch = num(key, value)?,
            ("segmentation", "mode") => self.segmentation.mode = value.into(),
            ("segmentation", "cell") => self.segmentation.cell = num(key, value)?,
            ("segmentation", "kernel_size") => self.segmentation.kernel_size = num(key, value)?,
            ("segmentation", "max_dist") => self.segmentation.max_dist = num(key, value)?,
            ("segmentation", "ratio") => self.segmentation.ratio = num(key, value)?,
            ("segmentation", "path") => self.segmentation.path = value.into(),
            ("detection", "mu") => self.detection.mu = num(key, value)?,
            ("detection", "nu") => self.detection.nu = num(key, value)?,
            ("detection", "k") => self.detection.k = num(key, value)?,
            ("detection", "seed_strategy") => {
                self.detection.seed_strategy = match value {
                    "top_ig" => SeedStrategy::TopIg,
                    "random" => SeedStrategy::Random,
                    _ => return Err(Error::Config(format!("unknown seed_strategy '{value}'"))),
                }
            }
            ("detection", "hessian_mode") => {
                self.detection.hessian_mode = match value {
                    "signed" => HessianMode::Signed,
                    "absolute" => HessianMode::Absolute,
                    _ => return Err(Error::Config(format!("unknown hessian_mode '{value}'"))),
                }
            }
            ("detection", "row_normalization") => {
                self.detection.row_normalization = match value {
                    "none" => RowNormalization::None,
                    "max_abs" => RowNormalization::MaxAbs,
                    _ => return Err(Error::Config(format!("unknown row_normalization '{value}'"))),
                }
            }
            ("attribution", "m") => self.attribution.m = num(key, value)?,
            ("attribution", "t") => self.attribution.t = num(key, value)?,
            ("attribution", "baseline") => self.attribution.baseline = value.into(),
            ("attribution", "sum_overlaps") => self.attribution.sum_overlaps = num(key, value)?,
            ("metrics", "sigma") => self.metrics.sigma = num(key, value)?,
            ("metrics", "road_l") => self.metrics.road_l = num(key, value)?,
            ("metrics", "road_k") => self.metrics.road_k = num(key, value)?,
            ("metrics", "ig_m") => self.metrics.ig_m = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key [{section}] {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        if !["mlp", "mlp_small", "cnn"].contains(&self.model.arch.as_str()) {
            return Err(Error::Config(format!("unknown arch '{}'", self.model.arch)));
        }
        if !["grid", "quickshift", "none", "file"].contains(&self.segmentation.mode.as_str()) {
            return Err(Error::Config(format!(
                "unknown segmentation mode '{}'",
                self.segmentation.mode
            )));
        }
        if !["zero", "mean"].contains(&self.attribution.baseline.as_str()) {
            return Err(Error::Config(format!(
                "unknown baseline '{}'",
                self.attribution.baseline
            )));
        }
        if self.attribution.m < 1 || self.attribution.t < 1 {
            return Err(Error::Config("attribution m and t must be >= 1".into()));
        }
        if self.data.n_images == 0 {
            return Err(Error::Config("n_images must be >= 1".into()));
        }
        if !(self.model.tau > 0.0) {
            return Err(Error::Config("tau must be > 0".into()));
        }
        if self.metrics.sigma < 0.0 {
            return Err(Error::Config("sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// FNV-1a over the canonical text form; identical configs share a hash.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_through_text() {
        let cfg = RunConfig::default();
        let parsed = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.hash(), cfg.hash());
    }

    #[test]
    fn parse_overrides_and_comments() {
        let text = "# comment\n[detection]\nmu=0.3\nnu=20\n[run]\nseed=42\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.detection.mu, 0.3);
        assert_eq!(cfg.detection.nu, 20);
        assert_eq!(cfg.seed, 42);
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(matches!(RunConfig::parse("[run]\nbogus=1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[run]\nno equals sign\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[detection]\nmu=2.0\n"), Err(_)));
        assert!(matches!(
            RunConfig::parse("[model]\narch=resnet\n"),
            Err(Error::Config(_))
        ));
    }
}
