//! Bag/instance dataset management: stratified splits, patch extraction per
//! the training balancing policy, pseudo-label propagation, and manifest
//! serialization.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patcher::{
    grid_patches, patch_salimap, random_patches, PatchManifestRow, PatchMode, PatchPolicy,
    PatchRecord,
};
use crate::raster::{load_image, save_image};
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;
use crate::seeds::derive_seed_str;

/// Instances a positive training bag contributes: its top-ranked
/// saliency-guided patches, where the object most likely sits.
pub const POS_TRAIN_INSTANCES: usize = 2;
/// Instances a negative training bag contributes: random patches, all of
/// which are guaranteed object-free by the bag label.
pub const NEG_TRAIN_INSTANCES: usize = 5;

/// Subdirectory (next to the manifest) where extracted patches are written;
/// `patch_path` fields are relative to the manifest's directory.
pub const PATCHES_SUBDIR: &str = "patches";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// The regression target: 1 for positive, 0 for negative.
    pub fn y<S: Scalar>(self) -> S {
        match self {
            Label::Positive => S::one(),
            Label::Negative => S::zero(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// A whole labeled image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub bag_id: String,
    pub image_path: PathBuf,
    pub label: Label,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceOrigin {
    Salimap,
    Random,
    Grid,
}

/// A patch carrying its bag's label as a pseudo-label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub bag_id: String,
    pub rank_j: usize,
    pub label: Label,
    /// Relative to the directory holding the dataset manifest.
    pub patch_path: String,
    pub origin: InstanceOrigin,
}

/// The dataset's full description: bags with split assignments, extracted
/// instances, and the parameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub k: usize,
    pub l: usize,
    pub ratios: (f64, f64, f64),
    pub bags: Vec<Bag>,
    pub instances: Vec<Instance>,
}

impl DatasetManifest {
    pub fn bags_in(&self, split: Split) -> impl Iterator<Item = &Bag> {
        self.bags.iter().filter(move |b| b.split == split)
    }

    pub fn bag(&self, bag_id: &str) -> Option<&Bag> {
        self.bags.iter().find(|b| b.bag_id == bag_id)
    }

    pub fn instances_in(&self, split: Split) -> Result<Vec<&Instance>> {
        let by_id: HashMap<&str, Split> =
            self.bags.iter().map(|b| (b.bag_id.as_str(), b.split)).collect();
        self.instances
            .iter()
            .filter_map(|inst| match by_id.get(inst.bag_id.as_str()) {
                Some(&s) if s == split => Some(Ok(inst)),
                Some(_) => None,
                None => Some(Err(Error::invalid(format!(
                    "instance references unknown bag '{}'",
                    inst.bag_id
                )))),
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(path, format!("serializing manifest: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// An unsplit labeled image found on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct BagSource {
    pub bag_id: String,
    pub image_path: PathBuf,
    pub label: Label,
}

/// Scans `root/positive/*.png` and `root/negative/*.png`; the file stem
/// becomes the bag id. Results are sorted by bag id for a canonical order.
pub fn load_bag_directory(root: impl AsRef<Path>) -> Result<Vec<BagSource>> {
    let root = root.as_ref();
    let mut sources = Vec::new();
    for (label, sub) in [(Label::Positive, "positive"), (Label::Negative, "negative")] {
        let dir = root.join(sub);
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("png") {
                continue;
            }
            let bag_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            sources.push(BagSource { bag_id, image_path: path, label });
        }
    }
    if sources.is_empty() {
        return Err(Error::invalid(format!("no PNG bags found under {}", root.display())));
    }
    sources.sort_by(|a, b| a.bag_id.cmp(&b.bag_id));
    Ok(sources)
}

/// Assigns splits stratified per class: within each label the bags are
/// shuffled by a seed derived from `seed` and the class name, then the first
/// floor(n·train) go to train, the next floor(n·val) to val, the next
/// floor(n·test) to test, and any remainder returns to train. The returned
/// manifest has no instances yet; `k` and `l` are recorded for provenance.
pub fn split_bags(
    sources: &[BagSource],
    ratios: (f64, f64, f64),
    seed: u64,
    k: usize,
    l: usize,
) -> Result<DatasetManifest> {
    let (rt, rv, rs) = ratios;
    if rt < 0.0 || rv < 0.0 || rs < 0.0 || (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios ({rt}, {rv}, {rs}) must be non-negative and sum to 1"
        )));
    }
    let mut seen = HashMap::new();
    for s in sources {
        if seen.insert(s.bag_id.as_str(), ()).is_some() {
            return Err(Error::invalid(format!("duplicate bag id '{}'", s.bag_id)));
        }
    }
    let mut bags = Vec::with_capacity(sources.len());
    for label in [Label::Positive, Label::Negative] {
        let mut class: Vec<&BagSource> = sources.iter().filter(|s| s.label == label).collect();
        if class.is_empty() {
            return Err(Error::invalid(format!("no {} bags in dataset", label.name())));
        }
        class.sort_by(|a, b| a.bag_id.cmp(&b.bag_id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_str(seed, label.name()));
        class.shuffle(&mut rng);

        let n = class.len();
        // The epsilon keeps exact products like 10 * 0.6 from flooring down
        // due to binary representation of the ratios.
        let take = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
        let (nt, nv, ns) = (take(rt), take(rv), take(rs));
        let nt = nt + (n - (nt + nv + ns));
        for (i, src) in class.into_iter().enumerate() {
            let split = if i < nt {
                Split::Train
            } else if i < nt + nv {
                Split::Val
            } else {
                Split::Test
            };
            bags.push(Bag {
                bag_id: src.bag_id.clone(),
                image_path: src.image_path.clone(),
                label: src.label,
                split,
            });
        }
    }
    bags.sort_by(|a, b| a.bag_id.cmp(&b.bag_id));
    Ok(DatasetManifest { seed, k, l, ratios, bags, instances: Vec::new() })
}

/// Extracts and saves every patch the dataset needs, returning the manifest
/// rows. Patches are written under `out_dir/patches/`.
///
/// In `Salimap` mode the training balancing policy applies: positive train
/// bags contribute their top-2 saliency-guided patches, negative train bags
/// contribute 5 random patches (seeded per bag), and every val/test bag
/// contributes its full `k` saliency-guided patches for rank-weighted
/// evaluation. `Grid` mode tiles every bag (resizing to the nearest
/// multiple of `l` per side first when needed); `Random` mode draws `k`
/// random patches for every bag.
///
/// `saliency_for` supplies the saliency map for each bag that needs one;
/// its errors propagate unchanged, so loaders should name the bag.
pub fn extract_patches<S: Scalar>(
    manifest: &DatasetManifest,
    policy: &PatchPolicy,
    mut saliency_for: impl FnMut(&Bag) -> Result<SaliencyMap<S>>,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PatchManifestRow>> {
    let out_dir = out_dir.as_ref();
    let patches_dir = out_dir.join(PATCHES_SUBDIR);
    fs::create_dir_all(&patches_dir).map_err(|e| Error::io(&patches_dir, e))?;

    let mut rows = Vec::new();
    for bag in &manifest.bags {
        let img = load_image::<S>(&bag.image_path)?;
        policy.validate(img.height(), img.width())?;
        let records: Vec<PatchRecord<S>> = match policy.mode {
            PatchMode::Salimap => match (bag.split, bag.label) {
                (Split::Train, Label::Positive) => {
                    let sal = checked_saliency(&mut saliency_for, bag, &img)?;
                    patch_salimap(&img, &sal, POS_TRAIN_INSTANCES, policy.l)?
                }
                (Split::Train, Label::Negative) => {
                    let seed = derive_seed_str(policy.seed, &bag.bag_id);
                    random_patches(&img, &bag.bag_id, NEG_TRAIN_INSTANCES, policy.l, seed)?
                }
                _ => {
                    let sal = checked_saliency(&mut saliency_for, bag, &img)?;
                    patch_salimap(&img, &sal, policy.k, policy.l)?
                }
            },
            PatchMode::Grid => {
                let (h, w) = (img.height(), img.width());
                let (gh, gw) = ((h / policy.l) * policy.l, (w / policy.l) * policy.l);
                let img = if (gh, gw) == (h, w) { img } else { img.resize_bilinear(gh, gw)? };
                grid_patches(&img, &bag.bag_id, policy.l)?
            }
            PatchMode::Random => {
                let seed = derive_seed_str(policy.seed, &bag.bag_id);
                random_patches(&img, &bag.bag_id, policy.k, policy.l, seed)?
            }
        };
        for rec in &records {
            let name = format!("{}_r{}.png", bag.bag_id, rec.rank_j);
            save_image(&rec.patch, patches_dir.join(&name))?;
            rows.push(rec.manifest_row(format!("{PATCHES_SUBDIR}/{name}")));
        }
    }
    Ok(rows)
}

fn checked_saliency<S: Scalar>(
    saliency_for: &mut impl FnMut(&Bag) -> Result<SaliencyMap<S>>,
    bag: &Bag,
    img: &crate::raster::ImageTensor<S>,
) -> Result<SaliencyMap<S>> {
    let sal = saliency_for(bag)?;
    if sal.dims() != (img.height(), img.width()) {
        return Err(Error::invalid(format!(
            "saliency for bag '{}' is {:?} but the image is {}x{}",
            bag.bag_id,
            sal.dims(),
            img.height(),
            img.width()
        )));
    }
    Ok(sal)
}

/// Populates `manifest.instances` from extracted patch rows. Labels are
/// inherited from the owning bag; origin follows the extraction mode (in
/// `Salimap` mode, negative train bags' patches are the random ones). In
/// `Salimap` mode the training balance is audited: exactly 2 instances per
/// positive and 5 per negative train bag, all of the latter random-origin.
pub fn build_instances(
    manifest: &mut DatasetManifest,
    rows: &[PatchManifestRow],
    mode: PatchMode,
) -> Result<()> {
    let by_id: HashMap<&str, &Bag> =
        manifest.bags.iter().map(|b| (b.bag_id.as_str(), b)).collect();
    let mut instances = Vec::with_capacity(rows.len());
    for row in rows {
        let bag = by_id.get(row.bag_id.as_str()).ok_or_else(|| {
            Error::invalid(format!("patch row references unknown bag '{}'", row.bag_id))
        })?;
        let origin = match mode {
            PatchMode::Grid => InstanceOrigin::Grid,
            PatchMode::Random => InstanceOrigin::Random,
            PatchMode::Salimap => {
                if bag.split == Split::Train && bag.label == Label::Negative {
                    InstanceOrigin::Random
                } else {
                    InstanceOrigin::Salimap
                }
            }
        };
        instances.push(Instance {
            bag_id: bag.bag_id.clone(),
            rank_j: row.rank_j,
            label: bag.label,
            patch_path: row.patch_path.clone(),
            origin,
        });
    }

    if mode == PatchMode::Salimap {
        let mut per_bag: HashMap<&str, usize> = HashMap::new();
        for inst in &instances {
            let bag = by_id[inst.bag_id.as_str()];
            if bag.split != Split::Train {
                continue;
            }
            *per_bag.entry(inst.bag_id.as_str()).or_default() += 1;
            if bag.label == Label::Negative && inst.origin != InstanceOrigin::Random {
                return Err(Error::invalid(format!(
                    "negative train bag '{}' has a non-random instance",
                    inst.bag_id
                )));
            }
        }
        for bag in manifest.bags_in(Split::Train) {
            let want = match bag.label {
                Label::Positive => POS_TRAIN_INSTANCES,
                Label::Negative => NEG_TRAIN_INSTANCES,
            };
            let got = per_bag.get(bag.bag_id.as_str()).copied().unwrap_or(0);
            if got != want {
                return Err(Error::invalid(format!(
                    "train bag '{}' has {got} instances, expected {want}",
                    bag.bag_id
                )));
            }
        }
    }

    manifest.instances = instances;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ImageTensor;
    use crate::saliency::SaliencySource;
    use crate::Raster32;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn sources(n_pos: usize, n_neg: usize) -> Vec<BagSource> {
        let mut v = Vec::new();
        for i in 0..n_pos {
            v.push(BagSource {
                bag_id: format!("pos_{i:03}"),
                image_path: PathBuf::from(format!("/data/positive/pos_{i:03}.png")),
                label: Label::Positive,
            });
        }
        for i in 0..n_neg {
            v.push(BagSource {
                bag_id: format!("neg_{i:03}"),
                image_path: PathBuf::from(format!("/data/negative/neg_{i:03}.png")),
                label: Label::Negative,
            });
        }
        v
    }

    fn split_counts(m: &DatasetManifest, label: Label) -> (usize, usize, usize) {
        let count = |s: Split| m.bags.iter().filter(|b| b.label == label && b.split == s).count();
        (count(Split::Train), count(Split::Val), count(Split::Test))
    }

    #[test]
    fn even_split_is_exact() {
        let m = split_bags(&sources(10, 10), (0.6, 0.2, 0.2), 7, 5, 64).unwrap();
        assert_eq!(split_counts(&m, Label::Positive), (6, 2, 2));
        assert_eq!(split_counts(&m, Label::Negative), (6, 2, 2));
    }

    #[test]
    fn all_train_ratio() {
        let m = split_bags(&sources(4, 3), (1.0, 0.0, 0.0), 7, 5, 64).unwrap();
        assert!(m.bags.iter().all(|b| b.split == Split::Train));
    }

    #[test]
    fn remainder_goes_to_train() {
        let m = split_bags(&sources(7, 1), (0.6, 0.2, 0.2), 3, 5, 64).unwrap();
        assert_eq!(split_counts(&m, Label::Positive), (5, 1, 1));
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let src = sources(9, 9);
        let a = split_bags(&src, (0.6, 0.2, 0.2), 42, 5, 64).unwrap();
        let b = split_bags(&src, (0.6, 0.2, 0.2), 42, 5, 64).unwrap();
        assert_eq!(a, b);
        let c = split_bags(&src, (0.6, 0.2, 0.2), 43, 5, 64).unwrap();
        assert_ne!(
            a.bags.iter().map(|x| x.split).collect::<Vec<_>>(),
            c.bags.iter().map(|x| x.split).collect::<Vec<_>>()
        );
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(split_bags(&sources(3, 0), (0.6, 0.2, 0.2), 1, 5, 64).is_err());
        assert!(split_bags(&sources(3, 3), (0.5, 0.2, 0.2), 1, 5, 64).is_err());
        let mut dup = sources(2, 2);
        dup[1].bag_id = dup[0].bag_id.clone();
        assert!(split_bags(&dup, (0.6, 0.2, 0.2), 1, 5, 64).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_bags(n_pos in 1usize..25, n_neg in 1usize..25, seed in 0u64..1000) {
            let src = sources(n_pos, n_neg);
            let m = split_bags(&src, (0.6, 0.2, 0.2), seed, 5, 64).unwrap();
            prop_assert_eq!(m.bags.len(), n_pos + n_neg);
            let ids: HashSet<_> = m.bags.iter().map(|b| b.bag_id.clone()).collect();
            prop_assert_eq!(ids.len(), n_pos + n_neg);
            for label in [Label::Positive, Label::Negative] {
                let n = if label == Label::Positive { n_pos } else { n_neg };
                let (t, v, s) = split_counts(&m, label);
                prop_assert_eq!(t + v + s, n);
                // floor rule: val and test get exactly floor(n / 5).
                prop_assert_eq!(v, n / 5);
                prop_assert_eq!(s, n / 5);
            }
        }
    }

    /// Writes a tiny dataset to disk: 16x16 grayscale images, positives with
    /// a bright corner-adjacent pixel so saliency maps have structure.
    fn write_dataset(root: &Path, n_pos: usize, n_neg: usize) {
        for sub in ["positive", "negative"] {
            fs::create_dir_all(root.join(sub)).unwrap();
        }
        for src in sources(n_pos, n_neg) {
            let bright = src.label == Label::Positive;
            let img = ImageTensor::<f32>::from_fn(16, 16, 1, |r, c, _| {
                if bright && (r, c) == (10, 11) {
                    1.0
                } else {
                    0.2
                }
            });
            let sub = src.label.name();
            save_image(&img, root.join(sub).join(format!("{}.png", src.bag_id))).unwrap();
        }
    }

    fn peak_saliency(bag: &Bag) -> Result<SaliencyMap<f32>> {
        let map = Raster32::from_fn(16, 16, |r, c| if (r, c) == (10, 11) { 5.0 } else { 1.0 });
        Ok(SaliencyMap { map, source: SaliencySource::ComputedCam, image_id: bag.bag_id.clone() })
    }

    #[test]
    fn train_balancing_counts_and_origins() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), 3, 2);
        let src = load_bag_directory(dir.path()).unwrap();
        assert_eq!(src.len(), 5);
        let mut manifest = split_bags(&src, (1.0, 0.0, 0.0), 5, 5, 6).unwrap();
        let policy = PatchPolicy { k: 5, l: 6, mode: PatchMode::Salimap, seed: 11 };
        let out = tempfile::tempdir().unwrap();
        let rows = extract_patches(&manifest, &policy, peak_saliency, out.path()).unwrap();
        assert_eq!(rows.len(), 3 * POS_TRAIN_INSTANCES + 2 * NEG_TRAIN_INSTANCES);
        build_instances(&mut manifest, &rows, PatchMode::Salimap).unwrap();
        assert_eq!(manifest.instances.len(), 16);
        for inst in &manifest.instances {
            let bag = manifest.bag(&inst.bag_id).unwrap();
            assert_eq!(inst.label, bag.label);
            match bag.label {
                Label::Positive => assert_eq!(inst.origin, InstanceOrigin::Salimap),
                Label::Negative => assert_eq!(inst.origin, InstanceOrigin::Random),
            }
            assert!(out.path().join(&inst.patch_path).exists());
        }
    }

    #[test]
    fn val_bags_get_full_k() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), 2, 2);
        let src = load_bag_directory(dir.path()).unwrap();
        let mut manifest = split_bags(&src, (0.0, 1.0, 0.0), 5, 5, 6).unwrap();
        let policy = PatchPolicy { k: 5, l: 6, mode: PatchMode::Salimap, seed: 11 };
        let out = tempfile::tempdir().unwrap();
        let rows = extract_patches(&manifest, &policy, peak_saliency, out.path()).unwrap();
        build_instances(&mut manifest, &rows, PatchMode::Salimap).unwrap();
        assert_eq!(manifest.instances.len(), 20);
        for bag in &manifest.bags {
            let ranks: Vec<usize> = manifest
                .instances
                .iter()
                .filter(|i| i.bag_id == bag.bag_id)
                .map(|i| i.rank_j)
                .collect();
            assert_eq!(ranks, vec![1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn missing_saliency_propagates_bag_name() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), 1, 1);
        let src = load_bag_directory(dir.path()).unwrap();
        let manifest = split_bags(&src, (1.0, 0.0, 0.0), 5, 5, 6).unwrap();
        let policy = PatchPolicy { k: 5, l: 6, mode: PatchMode::Salimap, seed: 11 };
        let out = tempfile::tempdir().unwrap();
        let err = extract_patches::<f32>(
            &manifest,
            &policy,
            |bag| Err(Error::MissingSaliency { bag_id: bag.bag_id.clone() }),
            out.path(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("pos_000"));
    }

    #[test]
    fn grid_mode_resizes_non_divisible_frames() {
        let dir = tempfile::tempdir().unwrap();
        for sub in ["positive", "negative"] {
            fs::create_dir_all(dir.path().join(sub)).unwrap();
        }
        // 18x16 frame with l = 4 resizes down to 16x16 and tiles into 16.
        let img = ImageTensor::<f32>::filled(18, 16, 1, 0.4);
        save_image(&img, dir.path().join("positive/p0.png")).unwrap();
        save_image(&img, dir.path().join("negative/n0.png")).unwrap();
        let src = load_bag_directory(dir.path()).unwrap();
        let mut manifest = split_bags(&src, (1.0, 0.0, 0.0), 5, 5, 4).unwrap();
        let policy = PatchPolicy { k: 5, l: 4, mode: PatchMode::Grid, seed: 0 };
        let out = tempfile::tempdir().unwrap();
        let rows = extract_patches::<f32>(
            &manifest,
            &policy,
            |bag| Err(Error::MissingSaliency { bag_id: bag.bag_id.clone() }),
            out.path(),
        )
        .unwrap();
        assert_eq!(rows.len(), 32);
        build_instances(&mut manifest, &rows, PatchMode::Grid).unwrap();
        assert!(manifest.instances.iter().all(|i| i.origin == InstanceOrigin::Grid));
    }

    #[test]
    fn manifest_rebuild_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), 3, 3);
        let src = load_bag_directory(dir.path()).unwrap();
        let build = || {
            let mut m = split_bags(&src, (0.6, 0.2, 0.2), 21, 5, 6).unwrap();
            let policy = PatchPolicy { k: 5, l: 6, mode: PatchMode::Salimap, seed: 21 };
            let out = tempfile::tempdir().unwrap();
            let rows = extract_patches(&m, &policy, peak_saliency, out.path()).unwrap();
            build_instances(&mut m, &rows, PatchMode::Salimap).unwrap();
            serde_json::to_string_pretty(&m).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn manifest_save_load_round_trip() {
        let src = sources(3, 2);
        let manifest = split_bags(&src, (0.6, 0.2, 0.2), 9, 5, 64).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset_manifest.json");
        manifest.save(&path).unwrap();
        assert_eq!(DatasetManifest::load(&path).unwrap(), manifest);
    }
}
