//! Synthetic tiny-blob benchmark: grayscale frames of smooth lattice noise
//! and broad smudges, where positive frames additionally carry a few small
//! bright Gaussian blobs. Blob area is bounded to a tiny fraction of the
//! frame, so bag-level labels are weak supervision for a small region.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mildata::Label;
use crate::raster::{save_image, ImageTensor};
use crate::seeds::derive_seed_str;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Lattice cell size of the background value noise, in pixels.
const NOISE_CELL: usize = 16;
/// Box-blur window applied to the background.
const BLUR_SIDE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_images: usize,
    pub image_side: usize,
    /// Inclusive blob radius range, in pixels.
    pub blob_radius: (usize, usize),
    /// Inclusive range of blob count per positive frame.
    pub blobs_per_positive: (usize, usize),
    pub positive_ratio: f64,
    /// Peak brightness a blob adds above the background.
    pub blob_contrast: f64,
    /// Peak amplitude of the background value noise.
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_images: 600,
            image_side: 256,
            blob_radius: (3, 5),
            blobs_per_positive: (1, 3),
            positive_ratio: 0.5,
            blob_contrast: 0.45,
            noise_amplitude: 0.18,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_images < 2 {
            return Err(Error::invalid("need at least 2 images (one per class)"));
        }
        if self.image_side < 32 {
            return Err(Error::invalid("image side must be at least 32"));
        }
        let (r_lo, r_hi) = self.blob_radius;
        if r_lo == 0 || r_lo > r_hi {
            return Err(Error::invalid(format!("bad blob radius range [{r_lo}, {r_hi}]")));
        }
        // Blobs must stay tiny relative to the frame.
        if r_hi > self.image_side / 16 {
            return Err(Error::invalid(format!(
                "blob radius {r_hi} exceeds image_side/16 = {}",
                self.image_side / 16
            )));
        }
        let (b_lo, b_hi) = self.blobs_per_positive;
        if b_lo == 0 || b_lo > b_hi {
            return Err(Error::invalid(format!("bad blob count range [{b_lo}, {b_hi}]")));
        }
        if !(self.positive_ratio > 0.0 && self.positive_ratio < 1.0) {
            return Err(Error::invalid(format!(
                "positive ratio {} outside (0, 1)",
                self.positive_ratio
            )));
        }
        if !(self.blob_contrast > 0.0 && self.blob_contrast <= 1.0) {
            return Err(Error::invalid("blob contrast must be in (0, 1]"));
        }
        if !(0.0..0.5).contains(&self.noise_amplitude) {
            return Err(Error::invalid("noise amplitude must be in [0, 0.5)"));
        }
        Ok(())
    }

    /// Positive count: rounded share, but at least one of each class.
    pub fn n_positive(&self) -> usize {
        let raw = (self.n_images as f64 * self.positive_ratio).round() as usize;
        raw.clamp(1, self.n_images - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub center_row: usize,
    pub center_col: usize,
    pub radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthItem {
    pub image_id: String,
    pub label: Label,
    pub blobs: Vec<BlobSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub image_side: usize,
    pub items: Vec<GroundTruthItem>,
}

impl GroundTruth {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(path, format!("serializing ground truth: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GroundTruth> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn item(&self, image_id: &str) -> Option<&GroundTruthItem> {
        self.items.iter().find(|i| i.image_id == image_id)
    }
}

/// Renders one frame. Every draw comes from a stream seeded by
/// (config.seed, image_id), so a frame depends only on its id.
pub fn generate_image(
    config: &SynthConfig,
    image_id: &str,
    label: Label,
) -> Result<(ImageTensor<f32>, Vec<BlobSpec>)> {
    config.validate()?;
    let side = config.image_side;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_str(config.seed, image_id));

    let mut buf = value_noise(&mut rng, side, NOISE_CELL, config.noise_amplitude);
    for v in &mut buf {
        *v += 0.5;
    }
    add_smudges(&mut rng, &mut buf, side, config.noise_amplitude);
    box_blur(&mut buf, side, BLUR_SIDE);

    let blobs = if label == Label::Positive {
        let (b_lo, b_hi) = config.blobs_per_positive;
        let count = rng.gen_range(b_lo as u64..=b_hi as u64) as usize;
        let (r_lo, r_hi) = config.blob_radius;
        (0..count)
            .map(|_| {
                let radius = rng.gen_range(r_lo as u64..=r_hi as u64) as usize;
                let lo = radius as u64;
                let hi = (side - 1 - radius) as u64;
                BlobSpec {
                    center_row: rng.gen_range(lo..=hi) as usize,
                    center_col: rng.gen_range(lo..=hi) as usize,
                    radius,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    for blob in &blobs {
        add_gaussian_bump(&mut buf, side, blob, config.blob_contrast);
    }

    let img = ImageTensor::from_fn(side, side, 1, |r, c, _| buf[r * side + c].clamp(0.0, 1.0) as f32);
    Ok((img, blobs))
}

/// Writes `n_images` frames under `root/positive` and `root/negative` plus a
/// ground-truth file at the root, and returns the ground truth.
pub fn generate_dataset(config: &SynthConfig, root: impl AsRef<Path>) -> Result<GroundTruth> {
    config.validate()?;
    let root = root.as_ref();
    let n_pos = config.n_positive();
    for sub in ["positive", "negative"] {
        fs::create_dir_all(root.join(sub)).map_err(|e| Error::io(root.join(sub), e))?;
    }
    let mut items = Vec::with_capacity(config.n_images);
    for i in 0..config.n_images {
        let (label, image_id) = if i < n_pos {
            (Label::Positive, format!("pos_{i:04}"))
        } else {
            (Label::Negative, format!("neg_{:04}", i - n_pos))
        };
        let (img, blobs) = generate_image(config, &image_id, label)?;
        let path = root.join(label.name()).join(format!("{image_id}.png"));
        save_image(&img, &path)?;
        items.push(GroundTruthItem { image_id, label, blobs });
    }
    items.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    let truth = GroundTruth { seed: config.seed, image_side: config.image_side, items };
    truth.save(root.join(GROUND_TRUTH_FILE))?;
    Ok(truth)
}

/// Bilinearly interpolated lattice noise in [-amplitude, amplitude].
fn value_noise(rng: &mut ChaCha8Rng, side: usize, cell: usize, amplitude: f64) -> Vec<f64> {
    let g = side / cell + 2;
    let lattice: Vec<f64> = (0..g * g).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mut out = vec![0.0; side * side];
    for r in 0..side {
        let fr = r as f64 / cell as f64;
        let gr = fr as usize;
        let tr = fr - gr as f64;
        for c in 0..side {
            let fc = c as f64 / cell as f64;
            let gc = fc as usize;
            let tc = fc - gc as f64;
            let v00 = lattice[gr * g + gc];
            let v01 = lattice[gr * g + gc + 1];
            let v10 = lattice[(gr + 1) * g + gc];
            let v11 = lattice[(gr + 1) * g + gc + 1];
            let top = v00 + tc * (v01 - v00);
            let bot = v10 + tc * (v11 - v10);
            out[r * side + c] = amplitude * (top + tr * (bot - top));
        }
    }
    out
}

/// One to three broad, faint Gaussian patches per frame — low-frequency
/// clutter that both classes share.
fn add_smudges(rng: &mut ChaCha8Rng, buf: &mut [f64], side: usize, noise_amplitude: f64) {
    let count = rng.gen_range(1u64..=3) as usize;
    for _ in 0..count {
        let cr = rng.gen_range(0.0..side as f64);
        let cc = rng.gen_range(0.0..side as f64);
        let sigma = rng.gen_range(side as f64 / 8.0..=side as f64 / 4.0);
        let amp = rng.gen_range(-0.66 * noise_amplitude..=0.66 * noise_amplitude);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for r in 0..side {
            let dr = r as f64 - cr;
            for c in 0..side {
                let dc = c as f64 - cc;
                buf[r * side + c] += amp * (-(dr * dr + dc * dc) * inv).exp();
            }
        }
    }
}

fn add_gaussian_bump(buf: &mut [f64], side: usize, blob: &BlobSpec, contrast: f64) {
    let sigma = blob.radius as f64 / 2.0;
    let inv = 1.0 / (2.0 * sigma * sigma);
    // 4 sigma covers everything visible.
    let reach = (4.0 * sigma).ceil() as isize;
    let (cr, cc) = (blob.center_row as isize, blob.center_col as isize);
    for r in (cr - reach).max(0)..=(cr + reach).min(side as isize - 1) {
        let dr = (r - cr) as f64;
        for c in (cc - reach).max(0)..=(cc + reach).min(side as isize - 1) {
            let dc = (c - cc) as f64;
            buf[r as usize * side + c as usize] += contrast * (-(dr * dr + dc * dc) * inv).exp();
        }
    }
}

/// Separable box blur with replicated edges; `window` must be odd.
fn box_blur(buf: &mut Vec<f64>, side: usize, window: usize) {
    let half = (window / 2) as isize;
    let norm = 1.0 / window as f64;
    let clamp = |i: isize| i.clamp(0, side as isize - 1) as usize;
    let mut tmp = vec![0.0; buf.len()];
    for r in 0..side {
        for c in 0..side {
            let mut acc = 0.0;
            for d in -half..=half {
                acc += buf[r * side + clamp(c as isize + d)];
            }
            tmp[r * side + c] = acc * norm;
        }
    }
    for r in 0..side {
        for c in 0..side {
            let mut acc = 0.0;
            for d in -half..=half {
                acc += tmp[clamp(r as isize + d) * side + c];
            }
            buf[r * side + c] = acc * norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::load_image;

    fn small_config() -> SynthConfig {
        SynthConfig { n_images: 10, image_side: 64, blob_radius: (3, 4), seed: 42, ..SynthConfig::default() }
    }

    #[test]
    fn dataset_counts_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let truth = generate_dataset(&small_config(), dir.path()).unwrap();
        assert_eq!(truth.items.len(), 10);
        let pos = fs::read_dir(dir.path().join("positive")).unwrap().count();
        let neg = fs::read_dir(dir.path().join("negative")).unwrap().count();
        assert_eq!(pos, 5);
        assert_eq!(neg, 5);
        assert!(dir.path().join(GROUND_TRUTH_FILE).exists());
        for item in &truth.items {
            match item.label {
                Label::Positive => assert!((1..=3).contains(&item.blobs.len())),
                Label::Negative => assert!(item.blobs.is_empty()),
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ta = generate_dataset(&small_config(), a.path()).unwrap();
        let tb = generate_dataset(&small_config(), b.path()).unwrap();
        assert_eq!(ta, tb);
        for rel in ["positive/pos_0000.png", "negative/neg_0003.png"] {
            let ba = fs::read(a.path().join(rel)).unwrap();
            let bb = fs::read(b.path().join(rel)).unwrap();
            assert_eq!(ba, bb, "{rel} differs between runs");
        }
        let ga = fs::read(a.path().join(GROUND_TRUTH_FILE)).unwrap();
        let gb = fs::read(b.path().join(GROUND_TRUTH_FILE)).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn blob_geometry_respects_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config();
        let truth = generate_dataset(&config, dir.path()).unwrap();
        let side = config.image_side;
        for item in &truth.items {
            for b in &item.blobs {
                assert!((config.blob_radius.0..=config.blob_radius.1).contains(&b.radius));
                assert!(b.center_row >= b.radius && b.center_row + b.radius <= side - 1);
                assert!(b.center_col >= b.radius && b.center_col + b.radius <= side - 1);
                // Tiny-region bound: each blob covers under 1.25% of the frame.
                let frac = std::f64::consts::PI * (b.radius * b.radius) as f64
                    / (side * side) as f64;
                assert!(frac <= 0.0123, "blob fraction {frac}");
            }
        }
    }

    #[test]
    fn blob_centers_are_bright() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config();
        let truth = generate_dataset(&config, dir.path()).unwrap();
        for item in truth.items.iter().filter(|i| i.label == Label::Positive) {
            let img: ImageTensor<f32> =
                load_image(dir.path().join("positive").join(format!("{}.png", item.image_id)))
                    .unwrap();
            let mean: f32 =
                img.as_slice().iter().sum::<f32>() / img.as_slice().len() as f32;
            for b in &item.blobs {
                let v = img.get(b.center_row, b.center_col, 0);
                assert!(
                    v > mean + 0.15,
                    "{}: center {v} vs mean {mean}",
                    item.image_id
                );
            }
        }
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let ok = small_config();
        assert!(ok.validate().is_ok());
        assert!(SynthConfig { n_images: 1, ..ok.clone() }.validate().is_err());
        assert!(SynthConfig { positive_ratio: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SynthConfig { positive_ratio: 1.0, ..ok.clone() }.validate().is_err());
        assert!(SynthConfig { blob_radius: (5, 3), ..ok.clone() }.validate().is_err());
        // radius above side/16
        assert!(SynthConfig { blob_radius: (3, 5), image_side: 64, ..ok.clone() }.validate().is_err());
        assert!(SynthConfig { blob_contrast: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SynthConfig { noise_amplitude: 0.5, ..ok }.validate().is_err());
    }

    #[test]
    fn frames_have_texture() {
        let config = small_config();
        let (img, _) = generate_image(&config, "neg_0000", Label::Negative).unwrap();
        let lo = img.as_slice().iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = img.as_slice().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        assert!(hi - lo > 0.05, "background is nearly constant: [{lo}, {hi}]");
        assert!(lo >= 0.0 && hi <= 1.0);
    }
}
