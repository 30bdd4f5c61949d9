//! Saliency maps: class-activation maps computed from a pooled linear head,
//! bilinear upsampling to image resolution, and saliency file I/O.
//!
//! Maps are kept unnormalized in memory and in the raw file format; the
//! patch extractor depends only on value ordering, which normalization would
//! not change. Min–max normalization to [0, 1] happens only on PNG export.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{load_image, save_image, ImageTensor, Raster};
use crate::scalar::Scalar;

/// Where a saliency map came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaliencySource {
    ComputedCam,
    ExternalFile,
}

/// Scalar evidence field over an image, tagged with its origin and the bag
/// it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap<S> {
    pub map: Raster<S>,
    pub source: SaliencySource,
    pub image_id: String,
}

impl<S: Scalar> SaliencyMap<S> {
    pub fn dims(&self) -> (usize, usize) {
        self.map.dims()
    }
}

/// Pre-pooling convolution activations: fheight × fwidth × channels,
/// row-major, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack<S> {
    fheight: usize,
    fwidth: usize,
    channels: usize,
    data: Vec<S>,
}

impl<S: Scalar> FeatureStack<S> {
    pub fn new(fheight: usize, fwidth: usize, channels: usize, data: Vec<S>) -> Result<Self> {
        if fheight == 0 || fwidth == 0 || channels == 0 {
            return Err(Error::invalid("feature stack dimensions must be positive"));
        }
        if data.len() != fheight * fwidth * channels {
            return Err(Error::invalid(format!(
                "feature data length {} does not match {}x{}x{}",
                data.len(),
                fheight,
                fwidth,
                channels
            )));
        }
        Ok(FeatureStack { fheight, fwidth, channels, data })
    }

    pub fn from_fn(
        fheight: usize,
        fwidth: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Self {
        assert!(fheight > 0 && fwidth > 0 && channels > 0);
        let mut data = Vec::with_capacity(fheight * fwidth * channels);
        for i in 0..fheight {
            for j in 0..fwidth {
                for ch in 0..channels {
                    data.push(f(i, j, ch));
                }
            }
        }
        FeatureStack { fheight, fwidth, channels, data }
    }

    pub fn fheight(&self) -> usize {
        self.fheight
    }

    pub fn fwidth(&self) -> usize {
        self.fwidth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, ch: usize) -> S {
        debug_assert!(i < self.fheight && j < self.fwidth && ch < self.channels);
        self.data[(i * self.fwidth + j) * self.channels + ch]
    }

    /// Per-channel spatial means — the global-average-pooling output.
    pub fn pooled(&self) -> Vec<S> {
        let mut sums = vec![S::zero(); self.channels];
        for cell in self.data.chunks_exact(self.channels) {
            for (s, &v) in sums.iter_mut().zip(cell) {
                *s += v;
            }
        }
        let n = S::from_usize(self.fheight * self.fwidth);
        sums.iter().map(|&s| s / n).collect()
    }
}

/// Class-activation map at feature resolution: the class-weighted channel
/// sum, rectified at zero. The caller stamps `image_id` afterwards.
pub fn compute_cam<S: Scalar>(
    features: &FeatureStack<S>,
    class_weights: &[S],
) -> Result<SaliencyMap<S>> {
    let raw = compute_cam_pre_relu(features, class_weights)?;
    let map = Raster::from_fn(raw.height(), raw.width(), |r, c| raw.get(r, c).max(S::zero()));
    Ok(SaliencyMap { map, source: SaliencySource::ComputedCam, image_id: String::new() })
}

/// The weighted channel sum before rectification. Linear in the feature
/// stack, which is what the gradient-equivalence checks rely on.
pub fn compute_cam_pre_relu<S: Scalar>(
    features: &FeatureStack<S>,
    class_weights: &[S],
) -> Result<Raster<S>> {
    if class_weights.len() != features.channels() {
        return Err(Error::invalid(format!(
            "{} class weights for {} feature channels",
            class_weights.len(),
            features.channels()
        )));
    }
    Ok(Raster::from_fn(features.fheight(), features.fwidth(), |i, j| {
        class_weights
            .iter()
            .enumerate()
            .map(|(ch, &w)| w * features.get(i, j, ch))
            .sum()
    }))
}

/// Bilinear align-corners upsample to image resolution; rejects any request
/// smaller than the current map.
pub fn upsample_to_image<S: Scalar>(sal: &SaliencyMap<S>, h: usize, w: usize) -> Result<SaliencyMap<S>> {
    let (mh, mw) = sal.dims();
    if h < mh || w < mw {
        return Err(Error::invalid(format!(
            "upsample target {h}x{w} is smaller than map {mh}x{mw}"
        )));
    }
    Ok(SaliencyMap {
        map: sal.map.resize_bilinear(h, w)?,
        source: sal.source,
        image_id: sal.image_id.clone(),
    })
}

const RAW_MAGIC: &[u8; 4] = b"SALM";

/// Writes the raw saliency format: magic `SALM`, two little-endian u32
/// dimensions (height, width), then height·width little-endian f32 values in
/// row-major order. Values are stored verbatim (no normalization).
pub fn save_saliency<S: Scalar>(sal: &SaliencyMap<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    out.write_all(RAW_MAGIC).map_err(io_err)?;
    let (h, w) = sal.dims();
    out.write_all(&(h as u32).to_le_bytes()).map_err(io_err)?;
    out.write_all(&(w as u32).to_le_bytes()).map_err(io_err)?;
    for &v in sal.map.as_slice() {
        out.write_all(&(v.to_f64() as f32).to_le_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Loads a saliency map, dispatching on content: the raw `SALM` format is
/// read verbatim; grayscale PNGs are mapped to [0, 1]. The file stem becomes
/// the `image_id`.
pub fn load_saliency<S: Scalar>(path: impl AsRef<Path>) -> Result<SaliencyMap<S>> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    let is_raw = match file.read_exact(&mut magic) {
        Ok(()) => &magic == RAW_MAGIC,
        Err(_) => false,
    };
    let image_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let map = if is_raw {
        drop(file);
        load_raw(path)?
    } else {
        let img: ImageTensor<S> = load_image(path)?;
        if img.channels() != 1 {
            return Err(Error::format(path, "saliency PNG must be grayscale"));
        }
        Raster::from_fn(img.height(), img.width(), |r, c| img.get(r, c, 0))
    };
    Ok(SaliencyMap { map, source: SaliencySource::ExternalFile, image_id })
}

fn load_raw<S: Scalar>(path: &Path) -> Result<Raster<S>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 {
        return Err(Error::format(path, "truncated raw saliency header"));
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if h == 0 || w == 0 {
        return Err(Error::format(path, "raw saliency dimensions must be positive"));
    }
    let expect = 12 + 4 * h * w;
    if bytes.len() != expect {
        return Err(Error::format(
            path,
            format!("raw saliency declares {h}x{w} ({expect} bytes) but file has {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(h * w);
    for chunk in bytes[12..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(path, "raw saliency contains non-finite values"));
        }
        data.push(S::from_f64(v as f64));
    }
    Raster::new(h, w, data).map_err(|e| Error::format(path, e.to_string()))
}

/// Exports a min–max-normalized 16-bit grayscale PNG for inspection. A
/// constant map exports as all zeros.
pub fn save_saliency_png<S: Scalar>(sal: &SaliencyMap<S>, path: impl AsRef<Path>) -> Result<()> {
    let (lo, hi) = (sal.map.min_value(), sal.map.max_value());
    let span = hi - lo;
    let img = ImageTensor::from_fn(sal.map.height(), sal.map.width(), 1, |r, c, _| {
        if span > S::zero() {
            (sal.map.get(r, c) - lo) / span
        } else {
            S::zero()
        }
    });
    save_image(&img, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_channel_stack() -> FeatureStack<f32> {
        let ch0 = [[1.0, 0.0], [0.0, 0.0]];
        let ch1 = [[0.0, 0.0], [0.0, 2.0]];
        FeatureStack::from_fn(2, 2, 2, |i, j, ch| if ch == 0 { ch0[i][j] } else { ch1[i][j] })
    }

    #[test]
    fn cam_weighted_channel_sum() {
        let sal = compute_cam(&two_channel_stack(), &[1.0, 0.5]).unwrap();
        assert_eq!(sal.map.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(sal.source, SaliencySource::ComputedCam);
    }

    #[test]
    fn cam_zero_weights_zero_map() {
        let sal = compute_cam(&two_channel_stack(), &[0.0, 0.0]).unwrap();
        assert!(sal.map.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cam_positive_scaling_preserves_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let stack = FeatureStack::from_fn(5, 4, 3, |_, _, _| rng.gen_range(-1.0f32..1.0));
        let weights = [0.3f32, -0.8, 0.5];
        let doubled: Vec<f32> = weights.iter().map(|w| w * 2.0).collect();
        let a = compute_cam(&stack, &weights).unwrap();
        let b = compute_cam(&stack, &doubled).unwrap();
        assert_eq!(a.map.argmax_row_major(), b.map.argmax_row_major());
        for (x, y) in a.map.as_slice().iter().zip(b.map.as_slice()) {
            assert_abs_diff_eq!(y, &(2.0 * x), epsilon = 1e-6);
        }
    }

    #[test]
    fn cam_rejects_weight_length_mismatch() {
        assert!(compute_cam(&two_channel_stack(), &[1.0]).is_err());
    }

    #[test]
    fn pre_relu_cam_is_linear_in_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draw = |seed_shift: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(11 + seed_shift);
            FeatureStack::from_fn(3, 3, 2, move |_, _, _| r.gen_range(-1.0f32..1.0))
        };
        let f1 = draw(1);
        let f2 = draw(2);
        let sum = FeatureStack::from_fn(3, 3, 2, |i, j, ch| f1.get(i, j, ch) + f2.get(i, j, ch));
        let w = [rng.gen_range(-1.0f32..1.0), rng.gen_range(-1.0f32..1.0)];
        let lhs = compute_cam_pre_relu(&sum, &w).unwrap();
        let m1 = compute_cam_pre_relu(&f1, &w).unwrap();
        let m2 = compute_cam_pre_relu(&f2, &w).unwrap();
        for ((a, b), c) in lhs.as_slice().iter().zip(m1.as_slice()).zip(m2.as_slice()) {
            assert_abs_diff_eq!(a, &(b + c), epsilon = 1e-5);
        }
    }

    #[test]
    fn pooled_means_each_channel() {
        let stack = two_channel_stack();
        let pooled = stack.pooled();
        assert_abs_diff_eq!(pooled[0], 0.25, epsilon = 1e-7);
        assert_abs_diff_eq!(pooled[1], 0.5, epsilon = 1e-7);
    }

    #[test]
    fn upsample_identity_and_constant() {
        let sal = SaliencyMap {
            map: Raster::filled(3, 3, 0.4f32),
            source: SaliencySource::ComputedCam,
            image_id: "b1".into(),
        };
        let same = upsample_to_image(&sal, 3, 3).unwrap();
        assert_eq!(same, sal);
        let big = upsample_to_image(&sal, 12, 12).unwrap();
        assert!(big.map.as_slice().iter().all(|&v| v == 0.4));
        assert_eq!(big.image_id, "b1");
    }

    #[test]
    fn upsample_align_corners_values() {
        let sal = SaliencyMap {
            map: Raster::new(1, 2, vec![0.0f32, 1.0]).unwrap(),
            source: SaliencySource::ComputedCam,
            image_id: String::new(),
        };
        let up = upsample_to_image(&sal, 1, 5).unwrap();
        assert_eq!(up.map.as_slice(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn upsample_rejects_downsampling() {
        let sal = SaliencyMap {
            map: Raster::filled(4, 4, 0.0f32),
            source: SaliencySource::ComputedCam,
            image_id: String::new(),
        };
        assert!(upsample_to_image(&sal, 2, 4).is_err());
    }

    #[test]
    fn raw_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let map = Raster::from_fn(10, 10, |_, _| rng.gen_range(-5.0f32..5.0));
        let sal = SaliencyMap { map, source: SaliencySource::ComputedCam, image_id: "x".into() };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.salm");
        save_saliency(&sal, &path).unwrap();
        let back: SaliencyMap<f32> = load_saliency(&path).unwrap();
        assert_eq!(back.map, sal.map);
        assert_eq!(back.source, SaliencySource::ExternalFile);
        assert_eq!(back.image_id, "x");
    }

    #[test]
    fn raw_length_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.salm");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"SALM");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        for i in 0..15 {
            bytes.extend_from_slice(&(i as f32).to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        match load_saliency::<f32>(&path) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn png_constant_white_loads_as_ones() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("white.png");
        let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_pixel(3, 3, image::Luma([65535]));
        buf.save(&path).unwrap();
        let sal: SaliencyMap<f32> = load_saliency(&path).unwrap();
        assert!(sal.map.as_slice().iter().all(|&v| v == 1.0));
        assert_eq!(sal.image_id, "white");
    }

    #[test]
    fn png_export_normalizes_range() {
        let sal = SaliencyMap {
            map: Raster::new(1, 3, vec![-2.0f32, 0.0, 2.0]).unwrap(),
            source: SaliencySource::ComputedCam,
            image_id: String::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norm.png");
        save_saliency_png(&sal, &path).unwrap();
        let back: SaliencyMap<f32> = load_saliency(&path).unwrap();
        let vals = back.map.as_slice();
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-4);
        assert_abs_diff_eq!(vals[1], 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(vals[2], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn load_missing_file_names_path() {
        let err = load_saliency::<f32>("/nonexistent/nope.salm").unwrap_err();
        assert!(err.to_string().contains("nope.salm"));
    }
}
