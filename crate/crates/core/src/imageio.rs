//! Raster file I/O (8/16-bit PNG, lossless decimal text) with JSON sidecars,
//! and figure-style rendering of images and kernels.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb, RgbImage};

/// 8-bit RGB raster returned by the renderers, and its pixel type.
pub use image::{Rgb as RgbPixel, RgbImage as RgbRaster};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ColorImage, Image, Kernel, Shape2};
use crate::metrics::kernel_centroid;
use crate::regularizers::grayscale;

/// On-disk encoding of a scalar raster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RasterFormat {
    Png8,
    Png16,
    MatrixText,
}

impl RasterFormat {
    /// `.png` defaults to 16 bit; `.txt` and `.mat` are matrix text.
    pub fn from_path(path: &Path) -> Result<Self> {
        match extension(path).as_deref() {
            Some("png") => Ok(RasterFormat::Png16),
            Some("txt") | Some("mat") => Ok(RasterFormat::MatrixText),
            other => Err(Error::UnsupportedFormat(format!(
                "{}: unknown extension {:?}",
                path.display(),
                other.unwrap_or("")
            ))),
        }
    }
}

/// Linear map between stored codes `[0, 2^b - 1]` and floats `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueScale {
    pub min: f64,
    pub max: f64,
}

impl ValueScale {
    pub const UNIT: ValueScale = ValueScale { min: 0.0, max: 1.0 };

    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::BadParams(format!("invalid value scale [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    /// Tight scale of `u`; constant images get a unit-width interval.
    pub fn fit(u: &Image) -> Self {
        let (min, max) = (u.min(), u.max());
        if max > min {
            Self { min, max }
        } else {
            Self { min, max: min + 1.0 }
        }
    }

    fn encode(&self, v: f64, max_code: f64) -> f64 {
        ((v - self.min) / (self.max - self.min) * max_code)
            .round()
            .clamp(0.0, max_code)
    }

    fn decode(&self, code: f64, max_code: f64) -> f64 {
        self.min + code / max_code * (self.max - self.min)
    }
}

/// Contents of the `<name>.meta` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RasterMeta {
    pub shape: Shape2,
    pub format: RasterFormat,
    pub value_scale: ValueScale,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn corrupt(path: &Path, reason: impl ToString) -> Error {
    Error::CorruptFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

/// Sidecar path: the raster path with its extension replaced by `meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

pub fn read_meta(path: &Path) -> Result<Option<RasterMeta>> {
    let meta = meta_path(path);
    if !meta.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&meta)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| corrupt(&meta, e))
}

/// Writes `u` plus its sidecar. PNG values outside `scale` are clamped.
pub fn write_image(path: &Path, u: &Image, format: RasterFormat, scale: ValueScale) -> Result<()> {
    write_image_with_provenance(path, u, format, scale, serde_json::Value::Null)
}

pub fn write_image_with_provenance(
    path: &Path,
    u: &Image,
    format: RasterFormat,
    scale: ValueScale,
    provenance: serde_json::Value,
) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::NonFinite("image to write"));
    }
    ValueScale::new(scale.min, scale.max)?;
    let (w, h) = (u.cols() as u32, u.rows() as u32);
    let image_err = |e: image::ImageError| corrupt(path, e);
    match format {
        RasterFormat::MatrixText => fs::write(path, matrix_text(u))?,
        RasterFormat::Png8 => {
            let codes = u.as_slice().iter().map(|&v| scale.encode(v, 255.0) as u8).collect();
            ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(w, h, codes)
                .expect("buffer length matches shape")
                .save_with_format(path, image::ImageFormat::Png)
                .map_err(image_err)?;
        }
        RasterFormat::Png16 => {
            let codes = u.as_slice().iter().map(|&v| scale.encode(v, 65535.0) as u16).collect();
            ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w, h, codes)
                .expect("buffer length matches shape")
                .save_with_format(path, image::ImageFormat::Png)
                .map_err(image_err)?;
        }
    }
    let meta = RasterMeta {
        shape: u.shape(),
        format,
        value_scale: scale,
        provenance,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| corrupt(path, e))?;
    fs::write(meta_path(path), json)?;
    Ok(())
}

/// One row per line, values separated by single spaces, shortest
/// representation that parses back to the same `f64`.
pub fn matrix_text(u: &Image) -> String {
    let mut out = String::new();
    for r in 0..u.rows() {
        let row = &u.as_slice()[r * u.cols()..(r + 1) * u.cols()];
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_text(text: &str, path: &Path) -> Result<Image> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| corrupt(path, format!("line {}: {e}", i + 1)))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(corrupt(
                    path,
                    format!("line {} has {} values, expected {c}", i + 1, row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| corrupt(path, "no values"))?;
    Image::new(Shape2::new(rows, cols), values)
}

fn decode_png(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| corrupt(path, e))
}

/// Reads a scalar raster. PNG codes map through the sidecar scale, or
/// `[0, 1]` without one; color PNGs are reduced to luminance first.
pub fn read_image(path: &Path) -> Result<Image> {
    let format = RasterFormat::from_path(path)?;
    let meta = read_meta(path)?;
    let image = match format {
        RasterFormat::MatrixText => parse_matrix_text(&fs::read_to_string(path)?, path)?,
        _ => {
            let scale = meta.as_ref().map_or(ValueScale::UNIT, |m| m.value_scale);
            let decoded = decode_png(path)?;
            let shape = Shape2::new(decoded.height() as usize, decoded.width() as usize);
            let unit = if decoded.color().has_color() {
                grayscale(&color_from_dynamic(&decoded))
            } else {
                let gray = decoded.into_luma16();
                Image::new(shape, gray.into_raw().into_iter().map(|c| c as f64 / 65535.0).collect())?
            };
            unit.map(|v| scale.decode(v, 1.0))
        }
    };
    if let Some(meta) = meta {
        if meta.shape != image.shape() {
            return Err(corrupt(
                path,
                format!("sidecar shape {} differs from raster {}", meta.shape, image.shape()),
            ));
        }
    }
    Ok(image)
}

fn color_from_dynamic(decoded: &DynamicImage) -> ColorImage {
    let shape = Shape2::new(decoded.height() as usize, decoded.width() as usize);
    let rgb = decoded.to_rgb16();
    let channel = |c: usize| {
        Image::from_fn(shape, |r, col| rgb.get_pixel(col as u32, r as u32)[c] as f64 / 65535.0)
    };
    ColorImage {
        red: channel(0),
        green: channel(1),
        blue: channel(2),
    }
}

/// Reads a PNG as three channels in `[0, 1]`; gray files repeat one channel.
pub fn read_color_image(path: &Path) -> Result<ColorImage> {
    match extension(path).as_deref() {
        Some("png") => Ok(color_from_dynamic(&decode_png(path)?)),
        _ => Err(Error::UnsupportedFormat(format!(
            "{}: color input must be PNG",
            path.display()
        ))),
    }
}

/// Writes an 8-bit RGB PNG.
pub fn save_rgb(path: &Path, raster: &RgbImage) -> Result<()> {
    raster
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| corrupt(path, e))
}

/// Color lookup for [`render_image`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    Parula,
    Gray,
}

/// Blue-to-yellow anchors, evenly spaced over `[0, 1]`.
const PARULA_ANCHORS: [[f64; 3]; 9] = [
    [0.2422, 0.1504, 0.6603],
    [0.2810, 0.3228, 0.9579],
    [0.1786, 0.5289, 0.9682],
    [0.0689, 0.6279, 0.8878],
    [0.0920, 0.7113, 0.6808],
    [0.3296, 0.7802, 0.4845],
    [0.6473, 0.7506, 0.2429],
    [0.9361, 0.7290, 0.2051],
    [0.9769, 0.9839, 0.0805],
];

/// 256-entry table, linearly interpolated between the anchors.
pub fn parula_lut() -> [[u8; 3]; 256] {
    let mut lut = [[0u8; 3]; 256];
    let segments = (PARULA_ANCHORS.len() - 1) as f64;
    for (i, entry) in lut.iter_mut().enumerate() {
        let t = i as f64 / 255.0 * segments;
        let j = (t.floor() as usize).min(PARULA_ANCHORS.len() - 2);
        let frac = t - j as f64;
        for c in 0..3 {
            let v = PARULA_ANCHORS[j][c] * (1.0 - frac) + PARULA_ANCHORS[j + 1][c] * frac;
            entry[c] = (v * 255.0).round() as u8;
        }
    }
    lut
}

/// LUT index of a value: clamp to `[0, 1]`, then round onto 256 levels.
pub fn lut_index(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn render_image(u: &Image, colormap: Colormap) -> Result<RgbImage> {
    if !u.is_finite() {
        return Err(Error::NonFinite("image to render"));
    }
    let lut = match colormap {
        Colormap::Parula => parula_lut(),
        Colormap::Gray => std::array::from_fn(|i| [i as u8; 3]),
    };
    Ok(RgbImage::from_fn(u.cols() as u32, u.rows() as u32, |x, y| {
        Rgb(lut[lut_index(u.get(y as usize, x as usize)) as usize])
    }))
}

pub const CENTER_COLOR: [u8; 3] = [255, 0, 0];
pub const CENTROID_COLOR: [u8; 3] = [0, 255, 0];

/// Center tap and rounded centroid, both `(row, col)`.
pub fn kernel_crosses(k: &Kernel) -> Result<((usize, usize), (usize, usize))> {
    let (cr, cc) = kernel_centroid(k)?;
    let m = k.margin();
    let round = |v: f64, n: usize| (v.round().max(0.0) as usize).min(n - 1);
    Ok(((m.rows, m.cols), (round(cr, k.rows()), round(cc, k.cols()))))
}

/// Gray kernel (min black, max white, flat kernels mid-gray) with a green
/// cross through the centroid and a red cross through the center on top.
pub fn render_kernel(k: &Kernel) -> Result<RgbImage> {
    let (center, centroid) = kernel_crosses(k)?;
    let (lo, hi) = (k.min(), k.max());
    let mut raster = RgbImage::from_fn(k.cols() as u32, k.rows() as u32, |x, y| {
        let v = k.get(y as usize, x as usize);
        let level = if hi > lo {
            ((v - lo) / (hi - lo) * 255.0).round() as u8
        } else {
            128
        };
        Rgb([level; 3])
    });
    for ((row, col), color) in [(centroid, CENTROID_COLOR), (center, CENTER_COLOR)] {
        for x in 0..raster.width() {
            raster.put_pixel(x, row as u32, Rgb(color));
        }
        for y in 0..raster.height() {
            raster.put_pixel(col as u32, y, Rgb(color));
        }
    }
    Ok(raster)
}
