//! The sampled-blur forward operator `A_k = S ∘ B ∘ C_k` and its adjoints.
//!
//! `C_k` is cyclic convolution with the zero-padded kernel `Jk`, `B` deletes
//! a margin of width `l` and `S` averages `s×s` blocks. Because convolution
//! commutes, the same plan evaluates the operator as a map of the kernel for
//! a fixed image (`A_u J`), which is what the kernel update needs.
//!
//! Kernel embedding convention: tap `(a, b)` of an `r`-sized kernel lands at
//! lattice position `((a - l1) mod m1, (b - l2) mod m2)`. The center tap
//! therefore sits at the origin and a Dirac kernel is the identity. A kernel
//! whose mass sits `d` taps below/right of the center translates the image by
//! `+d`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::{Image, Kernel, ProblemGeometry, Shape2};

/// Frequency-domain representation of an image-sized array.
#[derive(Clone, Debug)]
pub struct Spectrum {
    shape: Shape2,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn shape(&self) -> Shape2 {
        self.shape
    }
}

/// Precomputed transforms for one problem geometry. Immutable and `Sync`.
#[derive(Clone, Debug)]
pub struct ForwardPlan {
    geometry: ProblemGeometry,
    fft: Fft2,
}

impl ForwardPlan {
    pub fn new(geometry: ProblemGeometry) -> Self {
        Self {
            fft: Fft2::new(geometry.image),
            geometry,
        }
    }

    pub fn geometry(&self) -> &ProblemGeometry {
        &self.geometry
    }

    pub(crate) fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// `J k`: the kernel zero-padded to image size, center tap at the origin.
    pub fn embed_kernel(&self, k: &Kernel) -> Result<Image> {
        k.ensure_shape(self.geometry.kernel)?;
        let m = self.geometry.image;
        let l = self.geometry.margin;
        let mut out = vec![0.0; m.len()];
        for a in 0..k.rows() {
            let r = (a + m.rows - l.rows) % m.rows;
            for b in 0..k.cols() {
                let c = (b + m.cols - l.cols) % m.cols;
                out[m.index(r, c)] = k.get(a, b);
            }
        }
        Ok(Image::from_raw(m, out))
    }

    /// `J*`: reads the kernel window back out of an image-sized array.
    pub fn restrict_kernel(&self, w: &Image) -> Result<Kernel> {
        w.ensure_shape(self.geometry.image)?;
        let m = self.geometry.image;
        let l = self.geometry.margin;
        let r = self.geometry.kernel;
        let k = Image::from_fn(r, |a, b| {
            w.get((a + m.rows - l.rows) % m.rows, (b + m.cols - l.cols) % m.cols)
        });
        Ok(Kernel::from_raw(k))
    }

    pub fn transform(&self, u: &Image) -> Result<Spectrum> {
        u.ensure_shape(self.geometry.image)?;
        Ok(Spectrum {
            shape: u.shape(),
            values: self.fft.forward_real(u.as_slice()),
        })
    }

    /// Transform of `J k`.
    pub fn kernel_transform(&self, k: &Kernel) -> Result<Spectrum> {
        self.transform(&self.embed_kernel(k)?)
    }

    fn check_spectrum(&self, s: &Spectrum) -> Result<()> {
        if s.shape == self.geometry.image {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.geometry.image,
                found: s.shape,
            })
        }
    }

    /// Cyclic convolution `F⁻¹(a ⊙ b)`.
    pub fn convolve_spectra(&self, a: &Spectrum, b: &Spectrum) -> Result<Image> {
        self.check_spectrum(a)?;
        self.check_spectrum(b)?;
        let prod = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
        Ok(Image::from_raw(self.geometry.image, self.fft.inverse_real(prod)))
    }

    /// `C_k u`.
    pub fn convolve(&self, u: &Image, k: &Kernel) -> Result<Image> {
        self.convolve_spectra(&self.kernel_transform(k)?, &self.transform(u)?)
    }

    /// `S B F⁻¹(a ⊙ b)`; with `a = F Jk` and `b = F u` this is `A_k u`.
    pub fn apply_spectra(&self, a: &Spectrum, b: &Spectrum) -> Result<Image> {
        let blurred = self.convolve_spectra(a, b)?;
        sample(&clip_boundary(&blurred, &self.geometry)?, self.geometry.sampling)
    }

    /// `A_k u`.
    pub fn apply(&self, u: &Image, k: &Kernel) -> Result<Image> {
        self.apply_spectra(&self.kernel_transform(k)?, &self.transform(u)?)
    }

    /// `A_u J k`, the same quantity evaluated as a linear map of the kernel.
    pub fn apply_on_kernel(&self, k: &Kernel, u: &Image) -> Result<Image> {
        self.apply_spectra(&self.transform(u)?, &self.kernel_transform(k)?)
    }

    /// `C_h* B* S* y` where `h` is the image-sized array whose transform is given.
    pub fn adjoint_spectrum(&self, y: &Image, h: &Spectrum) -> Result<Image> {
        self.check_spectrum(h)?;
        y.ensure_shape(self.geometry.data)?;
        let spread = pad_boundary(&sample_adjoint(y, self.geometry.sampling), &self.geometry)?;
        let mut buf: Vec<Complex64> = spread
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.fft.forward(&mut buf);
        for (b, hv) in buf.iter_mut().zip(&h.values) {
            *b *= hv.conj();
        }
        Ok(Image::from_raw(self.geometry.image, self.fft.inverse_real(buf)))
    }

    /// `A_k* y`.
    pub fn adjoint_image(&self, y: &Image, k: &Kernel) -> Result<Image> {
        self.adjoint_spectrum(y, &self.kernel_transform(k)?)
    }

    /// `J* A_u* y`.
    pub fn adjoint_kernel(&self, y: &Image, u: &Image) -> Result<Kernel> {
        self.restrict_kernel(&self.adjoint_spectrum(y, &self.transform(u)?)?)
    }
}

/// `B`: keeps the meaningful part `(Bu)_i = u_{i+l}`.
pub fn clip_boundary(u: &Image, geometry: &ProblemGeometry) -> Result<Image> {
    u.ensure_shape(geometry.image)?;
    let l = geometry.margin;
    Ok(Image::from_fn(geometry.clipped(), |r, c| {
        u.get(r + l.rows, c + l.cols)
    }))
}

/// `B*`: zero-pads a meaningful-part image back to full size.
pub fn pad_boundary(v: &Image, geometry: &ProblemGeometry) -> Result<Image> {
    v.ensure_shape(geometry.clipped())?;
    let l = geometry.margin;
    let inner = geometry.clipped();
    Ok(Image::from_fn(geometry.image, |r, c| {
        if r >= l.rows && r < l.rows + inner.rows && c >= l.cols && c < l.cols + inner.cols {
            v.get(r - l.rows, c - l.cols)
        } else {
            0.0
        }
    }))
}

/// `S`: mean over `s×s` blocks.
///
/// The block mean is accumulated relative to the block's first pixel, which
/// returns constant blocks exactly.
pub fn sample(u: &Image, factor: usize) -> Result<Image> {
    if factor < 1 {
        return Err(Error::BadFactor(factor));
    }
    let shape = u.shape();
    if shape.rows % factor != 0 || shape.cols % factor != 0 {
        return Err(Error::NotDivisible { shape, factor });
    }
    if factor == 1 {
        return Ok(u.clone());
    }
    let weight = 1.0 / (factor * factor) as f64;
    let out = Shape2::new(shape.rows / factor, shape.cols / factor);
    Ok(Image::from_fn(out, |i, j| {
        let base = u.get(i * factor, j * factor);
        let mut acc = 0.0;
        for r in i * factor..(i + 1) * factor {
            for c in j * factor..(j + 1) * factor {
                acc += u.get(r, c) - base;
            }
        }
        base + acc * weight
    }))
}

/// `S*`: spreads each data value, divided by `s²`, over its block.
pub fn sample_adjoint(y: &Image, factor: usize) -> Image {
    let weight = 1.0 / (factor * factor) as f64;
    let out = Shape2::new(y.rows() * factor, y.cols() * factor);
    Image::from_fn(out, |r, c| y.get(r / factor, c / factor) * weight)
}

/// Right inverse `H` of `S ∘ B`: block replication followed by edge
/// replication into the margin.
pub fn upsample_init(f: &Image, geometry: &ProblemGeometry) -> Result<Image> {
    f.ensure_shape(geometry.data)?;
    let s = geometry.sampling;
    let l = geometry.margin;
    let inner = geometry.clipped();
    Ok(Image::from_fn(geometry.image, |r, c| {
        let ir = r.saturating_sub(l.rows).min(inner.rows - 1);
        let ic = c.saturating_sub(l.cols).min(inner.cols - 1);
        f.get(ir / s, ic / s)
    }))
}
