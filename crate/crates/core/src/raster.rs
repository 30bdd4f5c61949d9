//! 2-D grids, multi-channel images, PNG I/O, resizing, cropping, and the
//! training-time augmentation transforms.
//!
//! Conventions, fixed here once for the whole crate:
//! - all grids are row-major; `ImageTensor` is channel-last;
//! - bilinear resampling uses the align-corners mapping
//!   `src = dst * (in - 1) / (out - 1)` (corner pixels map exactly; an output
//!   dimension of 1 samples coordinate 0);
//! - positive rotation angles turn the image content clockwise;
//! - augmentation samples that fall outside the source frame take the `fill`
//!   value, with no partial blending at the border.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};

use crate::error::{Error, Result};
use crate::scalar::{lerp, Scalar};

/// Single-channel 2-D grid of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<S> {
    height: usize,
    width: usize,
    data: Vec<S>,
}

impl<S: Scalar> Raster<S> {
    /// Builds a raster from row-major data, validating shape and finiteness.
    pub fn new(height: usize, width: usize, data: Vec<S>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("raster dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "raster data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("raster values must be finite"));
        }
        Ok(Raster { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: S) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be positive");
        Raster { height, width, data: vec![value; height * width] }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, S::zero())
    }

    /// Builds a raster by evaluating `f(row, col)` at every cell.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Raster { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> S {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: S) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[S] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn min_value(&self) -> S {
        self.data.iter().copied().fold(S::infinity(), S::min)
    }

    pub fn max_value(&self) -> S {
        self.data.iter().copied().fold(S::neg_infinity(), S::max)
    }

    /// Location of the maximum; the first occurrence in row-major order wins
    /// ties.
    pub fn argmax_row_major(&self) -> (usize, usize) {
        let mut best = self.data[0];
        let mut at = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > best {
                best = v;
                at = i;
            }
        }
        (at / self.width, at % self.width)
    }

    /// Overwrites the half-open region `rows x cols` with `value`.
    pub fn fill_region(
        &mut self,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
        value: S,
    ) {
        assert!(rows.end <= self.height && cols.end <= self.width, "region out of bounds");
        for r in rows {
            let base = r * self.width;
            self.data[base + cols.start..base + cols.end].fill(value);
        }
    }

    /// Bilinear resize with the align-corners convention.
    pub fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Result<Self> {
        if new_h == 0 || new_w == 0 {
            return Err(Error::invalid("resize target dimensions must be positive"));
        }
        if (new_h, new_w) == (self.height, self.width) {
            return Ok(self.clone());
        }
        let mut out = Vec::with_capacity(new_h * new_w);
        for i in 0..new_h {
            let (r0, r1, tr) = src_span(i, new_h, self.height);
            for j in 0..new_w {
                let (c0, c1, tc) = src_span(j, new_w, self.width);
                out.push(bilerp4(
                    self.get(r0, c0),
                    self.get(r0, c1),
                    self.get(r1, c0),
                    self.get(r1, c1),
                    S::from_f64(tr),
                    S::from_f64(tc),
                ));
            }
        }
        Ok(Raster { height: new_h, width: new_w, data: out })
    }
}

/// Align-corners source span for output index `i`: the two bracketing source
/// indices and the interpolation weight toward the second.
fn src_span(i: usize, out_dim: usize, in_dim: usize) -> (usize, usize, f64) {
    let src = if out_dim == 1 {
        0.0
    } else {
        i as f64 * (in_dim - 1) as f64 / (out_dim - 1) as f64
    };
    let lo = src.floor() as usize;
    let lo = lo.min(in_dim - 1);
    let hi = (lo + 1).min(in_dim - 1);
    (lo, hi, src - lo as f64)
}

/// Bilinear blend of four corner values, clamped to their range so rounding
/// can never push the result outside [min, max] of the inputs.
#[inline]
fn bilerp4<S: Scalar>(v00: S, v01: S, v10: S, v11: S, tr: S, tc: S) -> S {
    let v = lerp(lerp(v00, v01, tc), lerp(v10, v11, tc), tr);
    let lo = v00.min(v01).min(v10).min(v11);
    let hi = v00.max(v01).max(v10).max(v11);
    v.max(lo).min(hi)
}

/// Multi-channel image, channel-last, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<S> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<S>,
}

impl<S: Scalar> ImageTensor<S> {
    /// Builds an image from row-major channel-last data, validating shape,
    /// channel count (1 or 3), and the [0, 1] value range.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<S>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "image data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        if data.iter().any(|v| !(*v >= S::zero() && *v <= S::one())) {
            return Err(Error::invalid("image values must lie in [0, 1]"));
        }
        Ok(ImageTensor { height, width, channels, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: S) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        ImageTensor { height, width, channels, data: vec![value; height * width * channels] }
    }

    /// Builds an image by evaluating `f(row, col, ch)` at every sample. The
    /// caller is responsible for keeping values in [0, 1].
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        ImageTensor { height, width, channels, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> S {
        debug_assert!(row < self.height && col < self.width && ch < self.channels);
        self.data[(row * self.width + col) * self.channels + ch]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    /// Collapses to a single luminance channel (0.299 R + 0.587 G + 0.114 B;
    /// grayscale images pass through unchanged).
    pub fn luminance(&self) -> Raster<S> {
        if self.channels == 1 {
            return Raster { height: self.height, width: self.width, data: self.data.clone() };
        }
        let (wr, wg, wb) = (S::from_f64(0.299), S::from_f64(0.587), S::from_f64(0.114));
        Raster::from_fn(self.height, self.width, |r, c| {
            wr * self.get(r, c, 0) + wg * self.get(r, c, 1) + wb * self.get(r, c, 2)
        })
    }

    pub fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Result<Self> {
        if new_h == 0 || new_w == 0 {
            return Err(Error::invalid("resize target dimensions must be positive"));
        }
        if (new_h, new_w) == (self.height, self.width) {
            return Ok(self.clone());
        }
        let mut out = Vec::with_capacity(new_h * new_w * self.channels);
        for i in 0..new_h {
            let (r0, r1, tr) = src_span(i, new_h, self.height);
            for j in 0..new_w {
                let (c0, c1, tc) = src_span(j, new_w, self.width);
                for ch in 0..self.channels {
                    out.push(bilerp4(
                        self.get(r0, c0, ch),
                        self.get(r0, c1, ch),
                        self.get(r1, c0, ch),
                        self.get(r1, c1, ch),
                        S::from_f64(tr),
                        S::from_f64(tc),
                    ));
                }
            }
        }
        Ok(ImageTensor { height: new_h, width: new_w, channels: self.channels, data: out })
    }

    /// Extracts the (2·half)×(2·half) patch whose rows span
    /// `[center_row - half, center_row + half)` and likewise for columns.
    /// The center must already be clamped so the patch fits in the frame.
    pub fn crop_centered(&self, center_row: usize, center_col: usize, half: usize) -> Result<Self> {
        if half == 0 {
            return Err(Error::invalid("crop half-extent must be positive"));
        }
        if center_row < half
            || center_row + half > self.height
            || center_col < half
            || center_col + half > self.width
        {
            return Err(Error::out_of_bounds(format!(
                "crop center ({center_row}, {center_col}) with half-extent {half} \
                 exceeds {}x{} frame",
                self.height, self.width
            )));
        }
        let (r0, c0) = (center_row - half, center_col - half);
        Ok(Self::from_fn(2 * half, 2 * half, self.channels, |r, c, ch| {
            self.get(r0 + r, c0 + c, ch)
        }))
    }

    /// Applies the augmentation pipeline: zoom, then rotation, then flips,
    /// then translation. Zoom and rotation resample bilinearly around the
    /// image center; samples from outside the frame take `fill`.
    pub fn augment(&self, spec: &AugmentSpec, fill: S) -> Result<Self> {
        spec.validate()?;
        if !(fill >= S::zero() && fill <= S::one()) {
            return Err(Error::invalid("fill value must lie in [0, 1]"));
        }
        let mut img = self.clone();
        if spec.zoom != 1.0 {
            let z = spec.zoom;
            img = img.resample(|y, x, cy, cx| (cy + (y - cy) / z, cx + (x - cx) / z), fill);
        }
        img = match spec.rotation_deg {
            0 => img,
            180 => Self::from_fn(img.height, img.width, img.channels, |r, c, ch| {
                img.get(img.height - 1 - r, img.width - 1 - c, ch)
            }),
            90 if img.height == img.width => {
                Self::from_fn(img.height, img.width, img.channels, |r, c, ch| {
                    img.get(img.height - 1 - c, r, ch)
                })
            }
            270 if img.height == img.width => {
                Self::from_fn(img.height, img.width, img.channels, |r, c, ch| {
                    img.get(c, img.width - 1 - r, ch)
                })
            }
            deg => {
                let rad = (deg as f64).to_radians();
                let (sin, cos) = (rad.sin(), rad.cos());
                img.resample(
                    |y, x, cy, cx| {
                        let (dy, dx) = (y - cy, x - cx);
                        (cy + cos * dy + sin * dx, cx + cos * dx - sin * dy)
                    },
                    fill,
                )
            }
        };
        if spec.flip_h {
            img = Self::from_fn(img.height, img.width, img.channels, |r, c, ch| {
                img.get(r, img.width - 1 - c, ch)
            });
        }
        if spec.flip_v {
            img = Self::from_fn(img.height, img.width, img.channels, |r, c, ch| {
                img.get(img.height - 1 - r, c, ch)
            });
        }
        let (ty, tx) = spec.translate_px;
        if (ty, tx) != (0, 0) {
            let (h, w) = (img.height as i64, img.width as i64);
            let moved = Self::from_fn(img.height, img.width, img.channels, |r, c, ch| {
                let (sr, sc) = (r as i64 - ty as i64, c as i64 - tx as i64);
                if sr >= 0 && sr < h && sc >= 0 && sc < w {
                    img.get(sr as usize, sc as usize, ch)
                } else {
                    fill
                }
            });
            img = moved;
        }
        Ok(img)
    }

    /// Inverse-mapped bilinear resample: `map(dst_y, dst_x, cy, cx)` returns
    /// the source coordinate to sample for each destination pixel.
    fn resample(&self, map: impl Fn(f64, f64, f64, f64) -> (f64, f64), fill: S) -> Self {
        let cy = (self.height - 1) as f64 / 2.0;
        let cx = (self.width - 1) as f64 / 2.0;
        let (maxy, maxx) = ((self.height - 1) as f64, (self.width - 1) as f64);
        Self::from_fn(self.height, self.width, self.channels, |r, c, ch| {
            let (sy, sx) = map(r as f64, c as f64, cy, cx);
            if sy < 0.0 || sy > maxy || sx < 0.0 || sx > maxx {
                return fill;
            }
            let (r0, c0) = (sy.floor() as usize, sx.floor() as usize);
            let r1 = (r0 + 1).min(self.height - 1);
            let c1 = (c0 + 1).min(self.width - 1);
            bilerp4(
                self.get(r0, c0, ch),
                self.get(r0, c1, ch),
                self.get(r1, c0, ch),
                self.get(r1, c1, ch),
                S::from_f64(sy - r0 as f64),
                S::from_f64(sx - c0 as f64),
            )
        })
    }
}

/// One augmentation draw: zoom factor, rotation angle, reflections, and a
/// small translation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    /// Magnification in [0.6, 1.4]; 1.0 leaves scale unchanged.
    pub zoom: f64,
    /// Clockwise rotation, a multiple of 15 in [0, 360).
    pub rotation_deg: u32,
    pub flip_h: bool,
    pub flip_v: bool,
    /// (rows, cols) shift, each component in [-4, 4].
    pub translate_px: (i32, i32),
}

impl AugmentSpec {
    pub fn identity() -> Self {
        AugmentSpec { zoom: 1.0, rotation_deg: 0, flip_h: false, flip_v: false, translate_px: (0, 0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.6..=1.4).contains(&self.zoom) {
            return Err(Error::invalid(format!("zoom {} outside [0.6, 1.4]", self.zoom)));
        }
        if self.rotation_deg % 15 != 0 || self.rotation_deg >= 360 {
            return Err(Error::invalid(format!(
                "rotation {} is not a multiple of 15 in [0, 360)",
                self.rotation_deg
            )));
        }
        let (ty, tx) = self.translate_px;
        if !(-4..=4).contains(&ty) || !(-4..=4).contains(&tx) {
            return Err(Error::invalid(format!("translation ({ty}, {tx}) outside [-4, 4]")));
        }
        Ok(())
    }
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self::identity()
    }
}

/// Loads an 8- or 16-bit grayscale or RGB PNG into [0, 1] samples.
pub fn load_image<S: Scalar>(path: impl AsRef<Path>) -> Result<ImageTensor<S>> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    })?;
    let (h, w) = (decoded.height() as usize, decoded.width() as usize);
    if h == 0 || w == 0 {
        return Err(Error::format(path, "empty image"));
    }
    let tensor = match decoded {
        DynamicImage::ImageLuma8(buf) => {
            from_samples(h, w, 1, buf.as_raw(), |v: &u8| *v as f64 / 255.0)
        }
        DynamicImage::ImageLuma16(buf) => {
            from_samples(h, w, 1, buf.as_raw(), |v: &u16| *v as f64 / 65535.0)
        }
        DynamicImage::ImageRgb8(buf) => {
            from_samples(h, w, 3, buf.as_raw(), |v: &u8| *v as f64 / 255.0)
        }
        DynamicImage::ImageRgb16(buf) => {
            from_samples(h, w, 3, buf.as_raw(), |v: &u16| *v as f64 / 65535.0)
        }
        other => {
            return Err(Error::format(
                path,
                format!("unsupported pixel layout {:?}; expected 8/16-bit gray or RGB", other.color()),
            ))
        }
    };
    Ok(tensor)
}

fn from_samples<S: Scalar, T>(
    h: usize,
    w: usize,
    channels: usize,
    raw: &[T],
    to_unit: impl Fn(&T) -> f64,
) -> ImageTensor<S> {
    let data = raw.iter().map(|v| S::from_f64(to_unit(v))).collect();
    ImageTensor { height: h, width: w, channels, data }
}

/// Saves as 16-bit PNG (grayscale or RGB to match the tensor), so a
/// save/load round trip is exact to within one 16-bit quantization step.
pub fn save_image<S: Scalar>(img: &ImageTensor<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let quantize = |v: S| (v.to_f64().clamp(0.0, 1.0) * 65535.0).round() as u16;
    let raw: Vec<u16> = img.as_slice().iter().map(|&v| quantize(v)).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = if img.channels() == 1 {
        let buf: ImageBuffer<Luma<u16>, _> =
            ImageBuffer::from_raw(w, h, raw).expect("raw buffer matches dimensions");
        buf.save_with_format(path, ImageFormat::Png)
    } else {
        let buf: ImageBuffer<Rgb<u16>, _> =
            ImageBuffer::from_raw(w, h, raw).expect("raw buffer matches dimensions");
        buf.save_with_format(path, ImageFormat::Png)
    };
    result.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    })
}
