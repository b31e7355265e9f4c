//! Synthetic test problems: ground-truth kernels, a replicated-boundary
//! forward model, Gaussian noise, a procedural RGB scene and shifted side
//! information.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::forward::sample;
use crate::imageio::{self, Colormap, RasterFormat, ValueScale};
use crate::grid::{ColorImage, Image, Kernel, ProblemGeometry, Shape2};
use crate::regularizers::grayscale;

fn check_odd(shape: Shape2) -> Result<()> {
    if shape.is_odd() {
        Ok(())
    } else {
        Err(Error::EvenKernel(shape))
    }
}

/// Normalized indicator of `{‖i - c‖ ≤ radius}`.
pub fn make_disk_kernel(shape: Shape2, radius: f64) -> Result<Kernel> {
    check_odd(shape)?;
    let margin = Shape2::new(shape.rows / 2, shape.cols / 2);
    if !(radius > 0.0) || radius > margin.rows.min(margin.cols) as f64 {
        return Err(Error::RadiusTooLarge { radius, margin });
    }
    let (cr, cc) = (margin.rows as f64, margin.cols as f64);
    let raw = Image::from_fn(shape, |r, c| {
        let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
        if d2 <= radius * radius {
            1.0
        } else {
            0.0
        }
    });
    let total = raw.sum();
    Kernel::new(raw.scale(1.0 / total))
}

/// Gaussian centered at `center + offset`, truncated to the window and normalized.
pub fn make_off_center_gaussian(shape: Shape2, sigma: f64, offset: (f64, f64)) -> Result<Kernel> {
    check_odd(shape)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::BadParams(format!("sigma must be positive, got {sigma}")));
    }
    let margin = Shape2::new(shape.rows / 2, shape.cols / 2);
    if !(offset.0.abs() <= margin.rows as f64 && offset.1.abs() <= margin.cols as f64) {
        return Err(Error::OffsetOutOfWindow(offset.0, offset.1));
    }
    let (cr, cc) = (margin.rows as f64 + offset.0, margin.cols as f64 + offset.1);
    let raw = Image::from_fn(shape, |r, c| {
        let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp()
    });
    let total = raw.sum();
    Kernel::new(raw.scale(1.0 / total))
}

/// Blur-and-sample with edge-replicated boundaries: the meaningful part
/// `B u` is extended by replicating its edge pixels, convolved, and averaged
/// over `s×s` blocks.
///
/// The true margin content never enters, so the result matches the periodic
/// operator `A_k u` only for samples whose kernel footprint stays inside the
/// meaningful part.
pub fn forward_replicated(u: &Image, k: &Kernel, sampling: usize) -> Result<Image> {
    let g = ProblemGeometry::from_image(u.shape(), k.shape(), sampling)?;
    let l = g.margin;
    let inner = g.clipped();
    let clamp = |v: isize, lo: usize, len: usize| (v.clamp(0, len as isize - 1) as usize) + lo;
    let blurred = Image::from_fn(inner, |i, j| {
        let mut acc = 0.0;
        for a in 0..k.rows() {
            let r = clamp(i as isize + l.rows as isize - a as isize, l.rows, inner.rows);
            for b in 0..k.cols() {
                let c = clamp(j as isize + l.cols as isize - b as isize, l.cols, inner.cols);
                acc += k.get(a, b) * u.get(r, c);
            }
        }
        acc
    });
    sample(&blurred, sampling)
}

/// Adds i.i.d. `N(0, variance)` samples drawn from a seeded ChaCha8 stream.
pub fn add_gaussian_noise(f: &Image, variance: f64, seed: u64) -> Result<Image> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::BadParams(format!("noise variance must be nonnegative, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(f.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt())
        .map_err(|e| Error::BadParams(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = f.as_slice().iter().map(|v| v + normal.sample(&mut rng)).collect();
    Ok(Image::from_raw(f.shape(), noisy))
}

/// Translates `v` so that `out[i] = v[clamp(i + shift)]`.
pub fn shift_replicated(v: &Image, shift: (i64, i64)) -> Image {
    let (rows, cols) = (v.rows() as i64, v.cols() as i64);
    Image::from_fn(v.shape(), |r, c| {
        let rr = (r as i64 + shift.0).clamp(0, rows - 1) as usize;
        let cc = (c as i64 + shift.1).clamp(0, cols - 1) as usize;
        v.get(rr, cc)
    })
}

/// Deterministic textured RGB scene of a cluttered desk: wood grain, sheets
/// with lines of "text", books, mugs and pens. Values lie in `[0, 1]`.
pub fn desk_scene(shape: Shape2, seed: u64) -> ColorImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (shape.rows as f64, shape.cols as f64);
    let scale = h.min(w);
    let n = shape.len();
    let mut px = vec![[0.0f64; 3]; n];

    let grain_period = 0.045 * scale + 2.0;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    for r in 0..shape.rows {
        for c in 0..shape.cols {
            let (y, x) = (r as f64, c as f64);
            let warp = 0.6 * (y / (0.23 * scale + 1.0) + phase).sin();
            let g = 0.5 + 0.5 * ((x / grain_period + warp) * std::f64::consts::TAU).sin();
            let t = 0.75 + 0.25 * g;
            px[r * shape.cols + c] = [0.58 * t, 0.40 * t, 0.22 * t];
        }
    }

    let fill = |px: &mut Vec<[f64; 3]>, inside: &dyn Fn(f64, f64) -> bool, color: [f64; 3]| {
        for r in 0..shape.rows {
            for c in 0..shape.cols {
                if inside(r as f64, c as f64) {
                    px[r * shape.cols + c] = color;
                }
            }
        }
    };

    let palette = [
        [0.80, 0.15, 0.12],
        [0.15, 0.35, 0.70],
        [0.20, 0.55, 0.25],
        [0.90, 0.75, 0.20],
        [0.35, 0.20, 0.45],
        [0.10, 0.10, 0.12],
    ];

    // Books and sheets: axis-aligned and rotated rectangles.
    let rects = 5 + shape.rows.min(shape.cols) / 30;
    for i in 0..rects {
        let (cy, cx) = (rng.random_range(0.0..h), rng.random_range(0.0..w));
        let (hh, hw) = (
            rng.random_range(0.08..0.22) * scale,
            rng.random_range(0.06..0.18) * scale,
        );
        let angle: f64 = rng.random_range(-0.6..0.6);
        let (sa, ca) = angle.sin_cos();
        let sheet = i % 2 == 0;
        let base = if sheet {
            let tint = rng.random_range(0.88..0.98);
            [tint, tint, tint * 0.97]
        } else {
            palette[rng.random_range(0..palette.len())]
        };
        let local = move |y: f64, x: f64| {
            let (dy, dx) = (y - cy, x - cx);
            (ca * dy - sa * dx, sa * dy + ca * dx)
        };
        fill(&mut px, &|y, x| {
            let (a, b) = local(y, x);
            a.abs() <= hh && b.abs() <= hw
        }, base);
        // Dark outline.
        let edge = [base[0] * 0.45, base[1] * 0.45, base[2] * 0.45];
        fill(&mut px, &|y, x| {
            let (a, b) = local(y, x);
            a.abs() <= hh && b.abs() <= hw && (hh - a.abs() < 1.0 || hw - b.abs() < 1.0)
        }, edge);
        if sheet {
            // Lines of text as short dark dashes.
            let spacing = (0.03 * scale).max(3.0);
            let ink = [0.12, 0.12, 0.18];
            let dash = rng.random_range(2.0..5.0);
            fill(&mut px, &|y, x| {
                let (a, b) = local(y, x);
                if a.abs() > hh - 2.0 || b.abs() > hw - 2.0 {
                    return false;
                }
                let row = (a + hh) / spacing;
                let on_line = row.fract() < 0.3 && row >= 1.0;
                let word = ((b + hw) / dash + row.floor() * 1.7).sin() > -0.2;
                on_line && word
            }, ink);
        }
    }

    // Mugs: rings with a darker inside.
    for _ in 0..3 {
        let (cy, cx) = (rng.random_range(0.0..h), rng.random_range(0.0..w));
        let outer = rng.random_range(0.05..0.09) * scale + 1.5;
        let inner = outer * 0.72;
        let color = palette[rng.random_range(0..palette.len())];
        fill(&mut px, &|y, x| (y - cy).hypot(x - cx) <= outer, color);
        fill(&mut px, &|y, x| (y - cy).hypot(x - cx) <= inner, [0.18, 0.10, 0.06]);
    }

    // Pens: thick segments.
    for _ in 0..4 {
        let (y0, x0) = (rng.random_range(0.0..h), rng.random_range(0.0..w));
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let len = rng.random_range(0.2..0.4) * scale;
        let (dy, dx) = (angle.sin(), angle.cos());
        let half_width = (0.012 * scale).max(1.0);
        let color = palette[rng.random_range(0..palette.len())];
        fill(&mut px, &|y, x| {
            let (py, qx) = (y - y0, x - x0);
            let along = py * dy + qx * dx;
            let across = (py * dx - qx * dy).abs();
            (0.0..=len).contains(&along) && across <= half_width
        }, color);
    }

    let channel = |i: usize| Image::from_raw(shape, px.iter().map(|p| p[i].clamp(0.0, 1.0)).collect());
    ColorImage {
        red: channel(0),
        green: channel(1),
        blue: channel(2),
    }
}

/// Ground-truth kernel family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Disk { radius: f64 },
    OffCenterGaussian { sigma: f64, offset: (f64, f64) },
    Dirac,
    Custom { values: Vec<f64> },
}

impl KernelKind {
    /// Disk with radius `min(r) / 6`.
    pub fn default_disk(shape: Shape2) -> Self {
        KernelKind::Disk {
            radius: shape.rows.min(shape.cols) as f64 / 6.0,
        }
    }

    /// Gaussian with `σ = min(r) / 8` shifted by `offset`.
    pub fn default_gaussian(shape: Shape2, offset: (f64, f64)) -> Self {
        KernelKind::OffCenterGaussian {
            sigma: shape.rows.min(shape.cols) as f64 / 8.0,
            offset,
        }
    }

    pub fn build(&self, shape: Shape2) -> Result<Kernel> {
        match self {
            KernelKind::Disk { radius } => make_disk_kernel(shape, *radius),
            KernelKind::OffCenterGaussian { sigma, offset } => {
                make_off_center_gaussian(shape, *sigma, *offset)
            }
            KernelKind::Dirac => Kernel::dirac(shape),
            KernelKind::Custom { values } => {
                let k = Kernel::from_values(shape, values.clone())?;
                if !k.is_in_simplex() {
                    return Err(Error::NotNormalized(k.sum()));
                }
                Ok(k)
            }
        }
    }
}

/// Recipe for a synthetic fusion problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kernel: KernelKind,
    pub kernel_shape: Shape2,
    pub data_shape: Shape2,
    pub sampling: usize,
    pub noise_variance: f64,
    /// Translation of the side information in high-resolution pixels.
    pub side_info_shift: (i64, i64),
    pub seed: u64,
}

impl SynthSpec {
    pub fn geometry(&self) -> Result<ProblemGeometry> {
        ProblemGeometry::from_data(self.data_shape, self.kernel_shape, self.sampling)
    }
}

/// Affine map `scaled = (raw - min) / (max - min)` applied to the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataScale {
    pub min: f64,
    pub max: f64,
}

impl DataScale {
    fn span(&self) -> f64 {
        if self.max > self.min {
            self.max - self.min
        } else {
            1.0
        }
    }

    pub fn forward(&self, raw: &Image) -> Image {
        let (lo, span) = (self.min, self.span());
        raw.map(|v| (v - lo) / span)
    }

    pub fn inverse(&self, scaled: &Image) -> Image {
        let (lo, span) = (self.min, self.span());
        scaled.map(|v| v * span + lo)
    }
}

/// Output of [`make_problem`].
#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    /// Data scaled to `[0, 1]`.
    pub data: Image,
    pub side_info: Image,
    /// Red-channel crop of the full reconstruction size, in source units.
    pub true_image: Image,
    pub true_kernel: Kernel,
    pub scale: DataScale,
}

impl SyntheticProblem {
    /// The ground truth expressed in the units of the scaled data.
    pub fn truth_in_data_units(&self) -> Image {
        self.scale.forward(&self.true_image)
    }
}

fn crop_center(img: &Image, shape: Shape2) -> Image {
    let r0 = (img.rows() - shape.rows) / 2;
    let c0 = (img.cols() - shape.cols) / 2;
    Image::from_fn(shape, |r, c| img.get(r0 + r, c0 + c))
}

/// Builds data, shifted side information and ground truth from an RGB image.
pub fn make_problem(rgb: &ColorImage, spec: &SynthSpec) -> Result<SyntheticProblem> {
    let g = spec.geometry()?;
    let found = rgb.shape();
    if found.rows < g.image.rows || found.cols < g.image.cols {
        return Err(Error::ImageTooSmall {
            needed: g.image,
            found,
        });
    }
    let true_kernel = spec.kernel.build(spec.kernel_shape)?;
    let crop = ColorImage {
        red: crop_center(&rgb.red, g.image),
        green: crop_center(&rgb.green, g.image),
        blue: crop_center(&rgb.blue, g.image),
    };
    let true_image = crop.red.clone();
    let blurred = forward_replicated(&true_image, &true_kernel, spec.sampling)?;
    let noisy = add_gaussian_noise(&blurred, spec.noise_variance, spec.seed)?;
    let scale = DataScale {
        min: noisy.min(),
        max: noisy.max(),
    };
    let side_info = shift_replicated(&grayscale(&crop), spec.side_info_shift);
    Ok(SyntheticProblem {
        data: scale.forward(&noisy),
        side_info,
        true_image,
        true_kernel,
        scale,
    })
}

/// Names of the rasters in a problem bundle.
pub const BUNDLE_DATA: &str = "f.txt";
pub const BUNDLE_SIDE_INFO: &str = "v.txt";
pub const BUNDLE_TRUTH_IMAGE: &str = "truth_image.txt";
pub const BUNDLE_TRUTH_KERNEL: &str = "truth_kernel.txt";
pub const BUNDLE_META: &str = "bundle.json";

/// Recipe and data scaling stored next to a bundle's rasters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub spec: SynthSpec,
    pub scale: DataScale,
}

/// Writes a problem as lossless matrix text plus PNG previews.
/// Returns every file written, in a fixed order.
pub fn write_bundle(dir: &Path, problem: &SyntheticProblem, spec: &SynthSpec) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let provenance = |role: &str| {
        serde_json::json!({ "role": role, "generator": "synthetic", "seed": spec.seed })
    };
    let mut written = Vec::new();
    let rasters: [(&str, &Image); 4] = [
        (BUNDLE_DATA, &problem.data),
        (BUNDLE_SIDE_INFO, &problem.side_info),
        (BUNDLE_TRUTH_IMAGE, &problem.true_image),
        (BUNDLE_TRUTH_KERNEL, problem.true_kernel.image()),
    ];
    for (name, image) in rasters {
        let path = dir.join(name);
        let role = name.trim_end_matches(".txt");
        imageio::write_image_with_provenance(
            &path,
            image,
            RasterFormat::MatrixText,
            ValueScale::fit(image),
            provenance(role),
        )?;
        written.push(path.clone());
        written.push(imageio::meta_path(&path));
        let preview = path.with_extension("png");
        let render = if name == BUNDLE_TRUTH_KERNEL {
            imageio::render_kernel(&problem.true_kernel)?
        } else {
            imageio::render_image(image, Colormap::Parula)?
        };
        imageio::save_rgb(&preview, &render)?;
        written.push(preview);
    }
    let meta = BundleMeta {
        spec: spec.clone(),
        scale: problem.scale,
    };
    let path = dir.join(BUNDLE_META);
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::CorruptFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    fs::write(&path, json)?;
    written.push(path);
    Ok(written)
}

/// Reads a bundle written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<(SyntheticProblem, SynthSpec)> {
    let path = dir.join(BUNDLE_META);
    let meta: BundleMeta =
        serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| Error::CorruptFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    let read = |name: &str| imageio::read_image(&dir.join(name));
    let true_kernel = Kernel::new(read(BUNDLE_TRUTH_KERNEL)?)?;
    true_kernel.ensure_shape(meta.spec.kernel_shape)?;
    let problem = SyntheticProblem {
        data: read(BUNDLE_DATA)?,
        side_info: read(BUNDLE_SIDE_INFO)?,
        true_image: read(BUNDLE_TRUTH_IMAGE)?,
        true_kernel,
        scale: meta.scale,
    };
    Ok((problem, meta.spec))
}
