//! Patch extraction: saliency-guided selection with occlusion, seeded random
//! patching for negative bags, and the non-overlapping grid baseline.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::ImageTensor;
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;

/// One extracted patch with its provenance.
///
/// `center_row`/`center_col` are the border-clamped crop center;
/// `selection_saliency` is the working map's value at the argmax that chose
/// the patch (recorded before border clamping), so it is exactly the map
/// maximum at selection time.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord<S> {
    pub bag_id: String,
    /// 1-based selection order.
    pub rank_j: usize,
    pub center_row: usize,
    pub center_col: usize,
    pub side_l: usize,
    pub patch: ImageTensor<S>,
    /// Zero for random and grid patches, which no saliency value selected.
    pub selection_saliency: S,
    /// True when the selection value already equals the map minimum, i.e.
    /// everything informative was occluded by earlier picks (or the map was
    /// constant to begin with).
    pub degenerate_flag: bool,
}

impl<S: Scalar> PatchRecord<S> {
    /// The manifest line for this record, given where its pixels were saved.
    pub fn manifest_row(&self, patch_path: impl Into<String>) -> PatchManifestRow {
        PatchManifestRow {
            bag_id: self.bag_id.clone(),
            rank_j: self.rank_j,
            a: self.center_row,
            b: self.center_col,
            side_l: self.side_l,
            selection_saliency: self.selection_saliency.to_f64(),
            degenerate_flag: self.degenerate_flag,
            patch_path: patch_path.into(),
        }
    }
}

/// JSON-lines row describing an extracted patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchManifestRow {
    pub bag_id: String,
    pub rank_j: usize,
    pub a: usize,
    pub b: usize,
    pub side_l: usize,
    pub selection_saliency: f64,
    pub degenerate_flag: bool,
    pub patch_path: String,
}

/// How patches are produced for a bag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchMode {
    Salimap,
    Random,
    Grid,
}

/// Patching parameters shared across a dataset build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchPolicy {
    /// Patches per bag for saliency-guided selection.
    pub k: usize,
    /// Patch side in pixels; must be even.
    pub l: usize,
    pub mode: PatchMode,
    /// Base seed for random-mode draws.
    pub seed: u64,
}

impl Default for PatchPolicy {
    fn default() -> Self {
        PatchPolicy { k: 5, l: 64, mode: PatchMode::Salimap, seed: 0 }
    }
}

impl PatchPolicy {
    pub fn validate(&self, image_h: usize, image_w: usize) -> Result<()> {
        check_patch_side(self.l, image_h, image_w)?;
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(())
    }
}

fn check_patch_side(l: usize, h: usize, w: usize) -> Result<()> {
    if l == 0 || l % 2 != 0 {
        return Err(Error::invalid(format!("patch side {l} must be positive and even")));
    }
    if l > h.min(w) {
        return Err(Error::invalid(format!(
            "patch side {l} exceeds image dimensions {h}x{w}"
        )));
    }
    Ok(())
}

/// Saliency-guided patch extraction.
///
/// Each iteration takes the argmax of a working copy of the saliency map
/// (first occurrence in row-major order on ties), clamps the center into
/// `[l/2, h - l/2] x [l/2, w - l/2]` so the crop fits the frame, crops the
/// l×l patch, and occludes the clamped region to the working map's global
/// minimum before the next pick. The input map is never modified; the first
/// patch always covers the global argmax of the original map. Bag identity
/// is taken from `sal.image_id`.
pub fn patch_salimap<S: Scalar>(
    img: &ImageTensor<S>,
    sal: &SaliencyMap<S>,
    k: usize,
    l: usize,
) -> Result<Vec<PatchRecord<S>>> {
    let (h, w) = (img.height(), img.width());
    if sal.dims() != (h, w) {
        return Err(Error::invalid(format!(
            "saliency dimensions {:?} do not match image {h}x{w}",
            sal.dims()
        )));
    }
    check_patch_side(l, h, w)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let half = l / 2;
    let mut working = sal.map.clone();
    let mut records = Vec::with_capacity(k);
    for j in 1..=k {
        let (ar, ac) = working.argmax_row_major();
        let selection = working.get(ar, ac);
        let a = ar.clamp(half, h - half);
        let b = ac.clamp(half, w - half);
        let patch = img.crop_centered(a, b, half)?;
        // Recomputing the minimum every round is deliberate: occlusion writes
        // the minimum itself, so the value is stable, and recomputing keeps
        // the loop body an exact transcription of the procedure.
        let floor = working.min_value();
        working.fill_region(a - half..a + half, b - half..b + half, floor);
        records.push(PatchRecord {
            bag_id: sal.image_id.clone(),
            rank_j: j,
            center_row: a,
            center_col: b,
            side_l: l,
            patch,
            selection_saliency: selection,
            degenerate_flag: selection == floor,
        });
    }
    Ok(records)
}

/// Draws `k` patch centers independently and uniformly from the valid
/// clamped range, deterministically for a given seed. Row coordinate first,
/// then column, per patch.
pub fn random_patches<S: Scalar>(
    img: &ImageTensor<S>,
    bag_id: &str,
    k: usize,
    l: usize,
    seed: u64,
) -> Result<Vec<PatchRecord<S>>> {
    let (h, w) = (img.height(), img.width());
    check_patch_side(l, h, w)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let half = l / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(k);
    for j in 1..=k {
        let a = rng.gen_range(half as u64..=(h - half) as u64) as usize;
        let b = rng.gen_range(half as u64..=(w - half) as u64) as usize;
        records.push(PatchRecord {
            bag_id: bag_id.to_string(),
            rank_j: j,
            center_row: a,
            center_col: b,
            side_l: l,
            patch: img.crop_centered(a, b, half)?,
            selection_saliency: S::zero(),
            degenerate_flag: false,
        });
    }
    Ok(records)
}

/// Tiles the image into non-overlapping l×l patches in row-major order.
/// Requires both image sides to be divisible by `l`.
pub fn grid_patches<S: Scalar>(
    img: &ImageTensor<S>,
    bag_id: &str,
    l: usize,
) -> Result<Vec<PatchRecord<S>>> {
    let (h, w) = (img.height(), img.width());
    check_patch_side(l, h, w)?;
    if h % l != 0 || w % l != 0 {
        return Err(Error::invalid(format!(
            "image {h}x{w} is not divisible by patch side {l}; resize the image first"
        )));
    }
    let half = l / 2;
    let mut records = Vec::with_capacity((h / l) * (w / l));
    let mut j = 1;
    for ti in 0..h / l {
        for tj in 0..w / l {
            let (a, b) = (ti * l + half, tj * l + half);
            records.push(PatchRecord {
                bag_id: bag_id.to_string(),
                rank_j: j,
                center_row: a,
                center_col: b,
                side_l: l,
                patch: img.crop_centered(a, b, half)?,
                selection_saliency: S::zero(),
                degenerate_flag: false,
            });
            j += 1;
        }
    }
    Ok(records)
}

/// Writes patch manifest rows as JSON lines, one row per line.
pub fn write_patch_manifest(rows: &[PatchManifestRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row)
            .map_err(|e| Error::format(path, format!("serializing manifest row: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSON-lines patch manifest, skipping blank lines.
pub fn read_patch_manifest(path: impl AsRef<Path>) -> Result<Vec<PatchManifestRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}
