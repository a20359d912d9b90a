//! Spatial grouping priors: grid cells, quickshift-style superpixels,
//! a whole-image fallback, and ingestion of externally computed masks.
//!
//! Masks only constrain where interaction-set seeds may be placed; they
//! never touch gradients or attribution values.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Binary pixel masks over an H x W grid, stored as sorted index lists.
/// Built-in segmenters emit disjoint masks; externally loaded masks may
/// overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub height: usize,
    pub width: usize,
    masks: Vec<Vec<usize>>,
}

impl MaskSet {
    pub fn new(height: usize, width: usize, masks: Vec<Vec<usize>>) -> Result<Self> {
        let d = height * width;
        for (id, m) in masks.iter().enumerate() {
            if m.is_empty() {
                return Err(Error::Mask(format!("mask {id} is empty")));
            }
            let mut seen = vec![false; d];
            for &p in m {
                if p >= d {
                    return Err(Error::Mask(format!("mask {id} pixel {p} out of range {d}")));
                }
                if seen[p] {
                    return Err(Error::Mask(format!("mask {id} repeats pixel {p}")));
                }
                seen[p] = true;
            }
        }
        Ok(MaskSet { height, width, masks })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn mask(&self, id: usize) -> &[usize] {
        &self.masks[id]
    }

    pub fn masks(&self) -> &[Vec<usize>] {
        &self.masks
    }

    /// Mask ids sorted by descending pixel count (ties by ascending id):
    /// the deterministic iteration order used during seed selection.
    pub fn ids_by_size(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.masks.len()).collect();
        ids.sort_by_key(|&i| (std::cmp::Reverse(self.masks[i].len()), i));
        ids
    }
}

/// Disjoint rectangular cells covering the image.
pub fn grid_segment(height: usize, width: usize, cell: usize) -> Result<MaskSet> {
    if cell == 0 {
        return Err(Error::InvalidParam("grid cell must be >= 1".into()));
    }
    let rows = height.div_ceil(cell);
    let cols = width.div_ceil(cell);
    let mut masks = Vec::with_capacity(rows * cols);
    for gr in 0..rows {
        for gc in 0..cols {
            let mut m = Vec::new();
            for r in gr * cell..((gr + 1) * cell).min(height) {
                for c in gc * cell..((gc + 1) * cell).min(width) {
                    m.push(r * width + c);
                }
            }
            masks.push(m);
        }
    }
    MaskSet::new(height, width, masks)
}

/// A single whole-image mask: seed selection degenerates to the global
/// top-IG pixel.
pub fn no_segmentation(height: usize, width: usize) -> Result<MaskSet> {
    MaskSet::new(height, width, vec![(0..height * width).collect()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuickshiftParams {
    /// Bandwidth of the Gaussian density estimate (pixels).
    pub kernel_size: f64,
    /// Maximum link length in joint (space, intensity*ratio) coordinates.
    pub max_dist: f64,
    /// Weight of the intensity axis relative to the spatial axes.
    pub ratio: f64,
}

impl Default for QuickshiftParams {
    fn default() -> Self {
        QuickshiftParams { kernel_size: 2.0, max_dist: 6.0, ratio: 8.0 }
    }
}

/// Mode-seeking superpixels: estimate a kernel density in joint
/// (row, col, intensity*ratio) space, link each pixel to its nearest
/// higher-density neighbor within `max_dist`, and emit the 4-connected
/// components of the resulting link forest. Deterministic.
pub fn quickshift_segment(image: &Tensor, params: QuickshiftParams) -> Result<MaskSet> {
    if !(params.max_dist > 0.0) {
        return Err(Error::InvalidParam(format!(
            "quickshift max_dist must be positive, got {}",
            params.max_dist
        )));
    }
    if !(params.kernel_size > 0.0) {
        return Err(Error::InvalidParam("quickshift kernel_size must be positive".into()));
    }
    let shape = image.shape();
    if shape.len() != 3 {
        return Err(Error::ShapeMismatch { expected: vec![0, 0, 0], got: shape.to_vec() });
    }
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let d = h * w;
    // channel-mean intensity, scaled by ratio
    let feat: Vec<f64> = (0..d)
        .map(|p| {
            let mut s = 0.0;
            for ch in 0..c {
                s += image.get(p * c + ch);
            }
            params.ratio * s / c as f64
        })
        .collect();

    let joint_dist2 = |a: usize, b: usize| -> f64 {
        let (ar, ac) = ((a / w) as f64, (a % w) as f64);
        let (br, bc) = ((b / w) as f64, (b % w) as f64);
        let di = feat[a] - feat[b];
        (ar - br).powi(2) + (ac - bc).powi(2) + di * di
    };

    // Gaussian kernel density over a window of 3 bandwidths
    let win = (3.0 * params.kernel_size).ceil() as isize;
    let inv2h2 = 1.0 / (2.0 * params.kernel_size * params.kernel_size);
    let mut density = vec![0.0f64; d];
    for p in 0..d {
        let (pr, pc) = ((p / w) as isize, (p % w) as isize);
        let mut acc = 0.0;
        for dr in -win..=win {
            let r = pr + dr;
            if r < 0 || r as usize >= h {
                continue;
            }
            for dc in -win..=win {
                let cc = pc + dc;
                if cc < 0 || cc as usize >= w {
                    continue;
                }
                let q = r as usize * w + cc as usize;
                acc += (-joint_dist2(p, q) * inv2h2).exp();
            }
        }
        density[p] = acc;
    }

    // link each pixel to the nearest strictly-higher-density pixel within
    // max_dist (ties in distance broken by ascending index)
    let reach = params.max_dist.ceil() as isize;
    let maxd2 = params.max_dist * params.max_dist;
    let mut parent: Vec<usize> = (0..d).collect();
    for p in 0..d {
        let (pr, pc) = ((p / w) as isize, (p % w) as isize);
        let mut best = p;
        let mut best_d2 = f64::INFINITY;
        for dr in -reach..=reach {
            let r = pr + dr;
            if r < 0 || r as usize >= h {
                continue;
            }
            for dc in -reach..=reach {
                let cc = pc + dc;
                if cc < 0 || cc as usize >= w {
                    continue;
                }
                let q = r as usize * w + cc as usize;
                // density plateaus drain toward the lowest index; the
                // (density, -index) order is strict, so links cannot cycle
                let higher = density[q] > density[p]
                    || (density[q] == density[p] && q < p);
                if q == p || !higher {
                    continue;
                }
                let d2 = joint_dist2(p, q);
                if d2 <= maxd2 && (d2 < best_d2 || (d2 == best_d2 && q < best)) {
                    best_d2 = d2;
                    best = q;
                }
            }
        }
        parent[p] = best;
    }

    // forest roots -> cluster labels
    let mut root = vec![usize::MAX; d];
    for p in 0..d {
        if root[p] != usize::MAX {
            continue;
        }
        let mut chain = vec![p];
        let mut cur = p;
        while parent[cur] != cur && root[cur] == usize::MAX {
            cur = parent[cur];
            chain.push(cur);
        }
        let r = if root[cur] != usize::MAX { root[cur] } else { cur };
        for q in chain {
            root[q] = r;
        }
    }

    // split clusters into 4-connected components
    let mut label = vec![usize::MAX; d];
    let mut masks: Vec<Vec<usize>> = Vec::new();
    for p in 0..d {
        if label[p] != usize::MAX {
            continue;
        }
        let id = masks.len();
        let mut mask = Vec::new();
        let mut queue = VecDeque::from([p]);
        label[p] = id;
        while let Some(q) = queue.pop_front() {
            mask.push(q);
            let (r, cc) = (q / w, q % w);
            let mut push = |n: usize| {
                if label[n] == usize::MAX && root[n] == root[p] {
                    label[n] = id;
                    queue.push_back(n);
                }
            };
            if r > 0 {
                push(q - w);
            }
            if r + 1 < h {
                push(q + w);
            }
            if cc > 0 {
                push(q - 1);
            }
            if cc + 1 < w {
                push(q + 1);
            }
        }
        mask.sort_unstable();
        masks.push(mask);
    }
    MaskSet::new(h, w, masks)
}

// ---- external mask files ----------------------------------------------------
//
// Label-map format:   "H W\n" then H*W integers (whitespace separated);
//                     label 0 is background and emits no mask.
// Run-length format:  first line "rle H W", then one mask per line as
//                     "start:len,start:len,...".

pub fn save_label_map(masks: &MaskSet, path: &Path) -> Result<()> {
    let d = masks.height * masks.width;
    let mut labels = vec![0usize; d];
    for (id, m) in masks.masks().iter().enumerate() {
        for &p in m {
            labels[p] = id + 1;
        }
    }
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{} {}", masks.height, masks.width)?;
    for r in 0..masks.height {
        let row: Vec<String> =
            (0..masks.width).map(|c| labels[r * masks.width + c].to_string()).collect();
        writeln!(f, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Read a label map or run-length mask list. One mask per distinct
/// non-zero label; masks from run-length files may overlap.
pub fn load_masks(path: &Path, height: usize, width: usize) -> Result<MaskSet> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    if first.trim_start().starts_with("rle") {
        return load_rle(&text, height, width);
    }
    let mut toks = text.split_whitespace();
    let h: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Mask("label map missing height".into()))?;
    let w: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Mask("label map missing width".into()))?;
    if (h, w) != (height, width) {
        return Err(Error::Mask(format!(
            "label map is {h}x{w}, expected {height}x{width}"
        )));
    }
    let labels: Vec<usize> = toks
        .map(|t| t.parse().map_err(|_| Error::Mask(format!("bad label {t:?}"))))
        .collect::<Result<_>>()?;
    if labels.len() != h * w {
        return Err(Error::Mask(format!(
            "label map holds {} entries, expected {}",
            labels.len(),
            h * w
        )));
    }
    let mut by_label: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (p, &l) in labels.iter().enumerate() {
        if l != 0 {
            by_label.entry(l).or_default().push(p);
        }
    }
    if by_label.is_empty() {
        return Err(Error::Mask("label map contains no foreground labels".into()));
    }
    MaskSet::new(height, width, by_label.into_values().collect())
}

fn load_rle(text: &str, height: usize, width: usize) -> Result<MaskSet> {
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if head.len() != 3 || head[0] != "rle" {
        return Err(Error::Mask("bad rle header".into()));
    }
    let h: usize = head[1].parse().map_err(|_| Error::Mask("bad rle height".into()))?;
    let w: usize = head[2].parse().map_err(|_| Error::Mask("bad rle width".into()))?;
    if (h, w) != (height, width) {
        return Err(Error::Mask(format!("rle map is {h}x{w}, expected {height}x{width}")));
    }
    let mut masks = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut m = Vec::new();
        for run in line.split(',') {
            let (start, len) = run
                .split_once(':')
                .ok_or_else(|| Error::Mask(format!("bad run {run:?}")))?;
            let start: usize =
                start.parse().map_err(|_| Error::Mask(format!("bad run start {start:?}")))?;
            let len: usize =
                len.parse().map_err(|_| Error::Mask(format!("bad run length {len:?}")))?;
            m.extend(start..start + len);
        }
        masks.push(m);
    }
    if masks.is_empty() {
        return Err(Error::Mask("rle file contains no masks".into()));
    }
    MaskSet::new(height, width, masks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_partitions_exactly_once() {
        let ms = grid_segment(4, 4, 2).unwrap();
        assert_eq!(ms.len(), 4);
        let mut count = vec![0usize; 16];
        for m in ms.masks() {
            assert_eq!(m.len(), 4);
            for &p in m {
                count[p] += 1;
            }
        }
        assert!(count.iter().all(|&c| c == 1));
    }

    #[test]
    fn grid_single_cell_is_whole_image() {
        let ms = grid_segment(5, 3, 7).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms.mask(0).len(), 15);
        assert_eq!(ms, no_segmentation(5, 3).unwrap());
    }

    #[test]
    fn no_segmentation_28x28() {
        let ms = no_segmentation(28, 28).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms.mask(0).len(), 784);
    }

    #[test]
    fn quickshift_constant_image_single_mask() {
        let img = Tensor::new(vec![8, 8, 1], vec![0.5; 64]).unwrap();
        let ms = quickshift_segment(&img, QuickshiftParams::default()).unwrap();
        assert_eq!(ms.len(), 1, "constant image is a single density mode");
    }

    #[test]
    fn quickshift_two_halves() {
        // left half 0.0, right half 1.0: exactly two masks at the boundary
        let w = 12;
        let data: Vec<f64> =
            (0..8 * w).map(|p| if p % w < w / 2 { 0.0 } else { 1.0 }).collect();
        let img = Tensor::new(vec![8, w, 1], data).unwrap();
        let params = QuickshiftParams { kernel_size: 1.5, max_dist: 5.0, ratio: 20.0 };
        let ms = quickshift_segment(&img, params).unwrap();
        assert_eq!(ms.len(), 2, "expected a split at the intensity boundary");
        let left: Vec<usize> = (0..8 * w).filter(|p| p % w < w / 2).collect();
        let mut got: Vec<Vec<usize>> = ms.masks().to_vec();
        got.sort_by_key(|m| m[0]);
        assert_eq!(got[0], left);
    }

    #[test]
    fn quickshift_masks_are_4_connected() {
        // random-ish smooth image
        let data: Vec<f64> = (0..16 * 16)
            .map(|p| {
                let (r, c) = (p / 16, p % 16);
                0.5 + 0.5 * ((r as f64 * 0.7).sin() * (c as f64 * 0.5).cos())
            })
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        let img = Tensor::new(vec![16, 16, 1], data).unwrap();
        let ms = quickshift_segment(&img, QuickshiftParams::default()).unwrap();
        for m in ms.masks() {
            // BFS over 4-neighbors within the mask must reach every pixel
            let set: std::collections::HashSet<usize> = m.iter().cloned().collect();
            let mut seen = std::collections::HashSet::from([m[0]]);
            let mut queue = VecDeque::from([m[0]]);
            while let Some(q) = queue.pop_front() {
                let (r, c) = (q / 16, q % 16);
                for n in [
                    (r > 0).then(|| q - 16),
                    (r + 1 < 16).then(|| q + 16),
                    (c > 0).then(|| q - 1),
                    (c + 1 < 16).then(|| q + 1),
                ]
                .into_iter()
                .flatten()
                {
                    if set.contains(&n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
            assert_eq!(seen.len(), m.len(), "mask not 4-connected");
        }
    }

    #[test]
    fn quickshift_rejects_degenerate_params() {
        let img = Tensor::new(vec![2, 2, 1], vec![0.0; 4]).unwrap();
        let bad = QuickshiftParams { max_dist: 0.0, ..Default::default() };
        assert!(quickshift_segment(&img, bad).is_err());
    }

    #[test]
    fn label_map_roundtrip_and_background() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.seg");
        let ms = grid_segment(4, 4, 2).unwrap();
        save_label_map(&ms, &p).unwrap();
        let back = load_masks(&p, 4, 4).unwrap();
        assert_eq!(back, ms);

        // all-1 label map -> one full-image mask
        std::fs::write(&p, "2 2\n1 1\n1 1\n").unwrap();
        let ms = load_masks(&p, 2, 2).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms.mask(0), &[0, 1, 2, 3]);

        // background label 0 excluded
        std::fs::write(&p, "2 2\n0 0\n1 2\n").unwrap();
        let ms = load_masks(&p, 2, 2).unwrap();
        assert_eq!(ms.len(), 2);

        // dimension mismatch
        assert!(load_masks(&p, 3, 3).is_err());
    }

    #[test]
    fn rle_masks_may_overlap() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.rle");
        std::fs::write(&p, "rle 2 3\n0:3\n2:2\n").unwrap();
        let ms = load_masks(&p, 2, 3).unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(ms.mask(0), &[0, 1, 2]);
        assert_eq!(ms.mask(1), &[2, 3]);
    }
}
