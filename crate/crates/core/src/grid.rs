//! Shapes, images, kernels and the periodic difference operators shared by
//! every other module.
//!
//! All grids are stored row-major and indexed as `(row, col)`. Multi-index
//! comparisons between shapes are componentwise.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size of a 2-D grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape2 {
    pub rows: usize,
    pub cols: usize,
}

impl Shape2 {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub const fn square(side: usize) -> Self {
        Self::new(side, side)
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub const fn is_odd(&self) -> bool {
        self.rows % 2 == 1 && self.cols % 2 == 1
    }

    #[inline]
    pub const fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }
}

impl fmt::Display for Shape2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Dense real-valued image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    shape: Shape2,
    data: Vec<f64>,
}

impl Image {
    /// Wraps row-major values, rejecting wrong lengths and non-finite entries.
    pub fn new(shape: Shape2, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || data.len() != shape.len() {
            return Err(Error::BadLength {
                shape,
                expected: shape.len(),
                found: data.len(),
            });
        }
        check_finite(&data, "image")?;
        Ok(Self { shape, data })
    }

    /// Crate-internal constructor for values produced by trusted arithmetic.
    pub(crate) fn from_raw(shape: Shape2, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Shape2) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape2, value: f64) -> Self {
        assert!(!shape.is_empty(), "empty image shape");
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape2, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(!shape.is_empty(), "empty image shape");
        let mut data = Vec::with_capacity(shape.len());
        for r in 0..shape.rows {
            for c in 0..shape.cols {
                data.push(f(r, c));
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape2 {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.shape.index(row, col)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Euclidean inner product. Panics on shape mismatch.
    pub fn dot(&self, other: &Image) -> f64 {
        assert_eq!(self.shape, other.shape, "dot: shape mismatch");
        dot(&self.data, &other.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_raw(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &Image) -> Image {
        assert_eq!(self.shape, other.shape, "add_scaled: shape mismatch");
        Image::from_raw(
            self.shape,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Image) -> Image {
        assert_eq!(self.shape, other.shape, "sub: shape mismatch");
        Image::from_raw(
            self.shape,
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Image {
        self.map(|v| v * factor)
    }

    pub fn transpose(&self) -> Image {
        Image::from_fn(Shape2::new(self.cols(), self.rows()), |r, c| self.get(c, r))
    }

    pub fn ensure_shape(&self, expected: Shape2) -> Result<()> {
        if self.shape == expected {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected,
                found: self.shape,
            })
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Blur kernel with odd side lengths. The center tap sits at `margin()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel(Image);

/// Tolerance on the tap sum accepted as "normalized" by the simplex indicator.
pub const SIMPLEX_SUM_TOLERANCE: f64 = 1e-9;

impl Kernel {
    pub fn new(image: Image) -> Result<Self> {
        if !image.shape().is_odd() {
            return Err(Error::EvenKernel(image.shape()));
        }
        Ok(Self(image))
    }

    pub fn from_values(shape: Shape2, values: Vec<f64>) -> Result<Self> {
        Self::new(Image::new(shape, values)?)
    }

    /// Single unit tap in the center.
    pub fn dirac(shape: Shape2) -> Result<Self> {
        if !shape.is_odd() {
            return Err(Error::EvenKernel(shape));
        }
        let mut image = Image::zeros(shape);
        let center = shape.index(shape.rows / 2, shape.cols / 2);
        image.as_mut_slice()[center] = 1.0;
        Ok(Self(image))
    }

    /// All taps equal to `1 / (rows * cols)`.
    pub fn uniform(shape: Shape2) -> Result<Self> {
        Self::new(Image::filled(shape, 1.0 / shape.len() as f64))
    }

    pub(crate) fn from_raw(image: Image) -> Self {
        debug_assert!(image.shape().is_odd());
        Self(image)
    }

    /// `l = (r - 1) / 2`, which is also the 0-based index of the center tap.
    pub fn margin(&self) -> Shape2 {
        Shape2::new(self.0.rows() / 2, self.0.cols() / 2)
    }

    pub fn image(&self) -> &Image {
        &self.0
    }

    pub fn into_image(self) -> Image {
        self.0
    }

    /// Nonnegative taps summing to one (within [`SIMPLEX_SUM_TOLERANCE`]).
    pub fn is_in_simplex(&self) -> bool {
        self.0.as_slice().iter().all(|&v| v >= 0.0)
            && (self.0.sum() - 1.0).abs() <= SIMPLEX_SUM_TOLERANCE
    }
}

impl Deref for Kernel {
    type Target = Image;

    fn deref(&self) -> &Image {
        &self.0
    }
}

/// Three equally sized channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    pub red: Image,
    pub green: Image,
    pub blue: Image,
}

impl ColorImage {
    pub fn new(red: Image, green: Image, blue: Image) -> Result<Self> {
        green.ensure_shape(red.shape())?;
        blue.ensure_shape(red.shape())?;
        Ok(Self { red, green, blue })
    }

    pub fn shape(&self) -> Shape2 {
        self.red.shape()
    }

    pub fn channels(&self) -> [&Image; 3] {
        [&self.red, &self.green, &self.blue]
    }
}

/// Forward-difference gradient `∇u`, one 2-vector per pixel.
///
/// `d_row` holds differences along the row index (`u[i+1, j] - u[i, j]`),
/// `d_col` along the column index.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    shape: Shape2,
    pub(crate) d_row: Vec<f64>,
    pub(crate) d_col: Vec<f64>,
}

impl GradientField {
    pub fn zeros(shape: Shape2) -> Self {
        Self {
            shape,
            d_row: vec![0.0; shape.len()],
            d_col: vec![0.0; shape.len()],
        }
    }

    pub fn new(shape: Shape2, d_row: Vec<f64>, d_col: Vec<f64>) -> Result<Self> {
        for comp in [&d_row, &d_col] {
            if comp.len() != shape.len() {
                return Err(Error::BadLength {
                    shape,
                    expected: shape.len(),
                    found: comp.len(),
                });
            }
            check_finite(comp, "gradient field")?;
        }
        Ok(Self { shape, d_row, d_col })
    }

    pub(crate) fn from_raw(shape: Shape2, d_row: Vec<f64>, d_col: Vec<f64>) -> Self {
        Self { shape, d_row, d_col }
    }

    pub fn shape(&self) -> Shape2 {
        self.shape
    }

    pub fn d_row(&self) -> &[f64] {
        &self.d_row
    }

    pub fn d_col(&self) -> &[f64] {
        &self.d_col
    }

    pub fn at(&self, row: usize, col: usize) -> [f64; 2] {
        let i = self.shape.index(row, col);
        [self.d_row[i], self.d_col[i]]
    }

    pub fn dot(&self, other: &GradientField) -> f64 {
        assert_eq!(self.shape, other.shape, "dot: shape mismatch");
        dot(&self.d_row, &other.d_row) + dot(&self.d_col, &other.d_col)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Per-pixel direction field `ξ` with `‖ξ_i‖ ≤ γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    shape: Shape2,
    gamma: f64,
    pub(crate) xi_row: Vec<f64>,
    pub(crate) xi_col: Vec<f64>,
}

impl VectorField {
    /// Zero field: dTV reduces to TV.
    pub fn zeros(shape: Shape2) -> Self {
        Self {
            shape,
            gamma: 0.0,
            xi_row: vec![0.0; shape.len()],
            xi_col: vec![0.0; shape.len()],
        }
    }

    /// Validates `0 ≤ γ ≤ 1` and the per-pixel bound `‖ξ_i‖ ≤ γ`.
    pub fn new(shape: Shape2, gamma: f64, xi_row: Vec<f64>, xi_col: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::BadParams(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        let field = GradientField::new(shape, xi_row, xi_col)?;
        let tol = 1e-12;
        if field
            .d_row
            .iter()
            .zip(&field.d_col)
            .any(|(a, b)| (a * a + b * b).sqrt() > gamma + tol)
        {
            return Err(Error::BadParams(format!(
                "vector field exceeds the norm bound {gamma}"
            )));
        }
        Ok(Self {
            shape,
            gamma,
            xi_row: field.d_row,
            xi_col: field.d_col,
        })
    }

    pub(crate) fn from_raw(shape: Shape2, gamma: f64, xi_row: Vec<f64>, xi_col: Vec<f64>) -> Self {
        Self {
            shape,
            gamma,
            xi_row,
            xi_col,
        }
    }

    pub fn shape(&self) -> Shape2 {
        self.shape
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn at(&self, row: usize, col: usize) -> [f64; 2] {
        let i = self.shape.index(row, col);
        [self.xi_row[i], self.xi_col[i]]
    }

    pub fn max_norm(&self) -> f64 {
        self.xi_row
            .iter()
            .zip(&self.xi_col)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.xi_row.iter().chain(&self.xi_col).all(|&v| v == 0.0)
    }
}

/// Periodic forward differences of a row-major buffer.
pub(crate) fn gradient_into(shape: Shape2, u: &[f64], d_row: &mut [f64], d_col: &mut [f64]) {
    let (rows, cols) = (shape.rows, shape.cols);
    for r in 0..rows {
        let below = if r + 1 == rows { 0 } else { r + 1 };
        let row = &u[r * cols..(r + 1) * cols];
        let next = &u[below * cols..(below + 1) * cols];
        let dr = &mut d_row[r * cols..(r + 1) * cols];
        let dc = &mut d_col[r * cols..(r + 1) * cols];
        for c in 0..cols {
            dr[c] = next[c] - row[c];
        }
        for c in 0..cols - 1 {
            dc[c] = row[c + 1] - row[c];
        }
        dc[cols - 1] = row[0] - row[cols - 1];
    }
}

/// Negative adjoint of [`gradient_into`].
pub(crate) fn divergence_into(shape: Shape2, d_row: &[f64], d_col: &[f64], out: &mut [f64]) {
    let (rows, cols) = (shape.rows, shape.cols);
    for r in 0..rows {
        let above = if r == 0 { rows - 1 } else { r - 1 };
        for c in 0..cols {
            let left = if c == 0 { cols - 1 } else { c - 1 };
            let i = r * cols + c;
            out[i] = d_row[i] - d_row[above * cols + c] + d_col[i] - d_col[r * cols + left];
        }
    }
}

/// Periodic forward-difference gradient.
pub fn gradient(u: &Image) -> GradientField {
    let shape = u.shape();
    let mut field = GradientField::zeros(shape);
    gradient_into(shape, u.as_slice(), &mut field.d_row, &mut field.d_col);
    field
}

/// `div = -∇ᵀ`, so that `⟨∇u, g⟩ = -⟨u, div g⟩`.
pub fn divergence(g: &GradientField) -> Image {
    let shape = g.shape();
    let mut out = vec![0.0; shape.len()];
    divergence_into(shape, &g.d_row, &g.d_col, &mut out);
    Image::from_raw(shape, out)
}

/// Sizes of image `m`, kernel `r`, data `n`, margin `l` and sampling factor
/// `s`, tied together by `m - 2l = s·n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemGeometry {
    pub image: Shape2,
    pub kernel: Shape2,
    pub data: Shape2,
    pub margin: Shape2,
    pub sampling: usize,
}

impl ProblemGeometry {
    pub fn from_data(data: Shape2, kernel: Shape2, sampling: usize) -> Result<Self> {
        if !kernel.is_odd() {
            return Err(Error::EvenKernel(kernel));
        }
        if sampling < 1 {
            return Err(Error::BadFactor(sampling));
        }
        if data.is_empty() {
            return Err(Error::BadParams(format!("empty data shape {data}")));
        }
        let margin = Shape2::new(kernel.rows / 2, kernel.cols / 2);
        let image = Shape2::new(
            sampling * data.rows + 2 * margin.rows,
            sampling * data.cols + 2 * margin.cols,
        );
        Ok(Self {
            image,
            kernel,
            data,
            margin,
            sampling,
        })
    }

    /// Inverse of [`ProblemGeometry::from_data`]: recovers `n` from `(m, r, s)`.
    pub fn from_image(image: Shape2, kernel: Shape2, sampling: usize) -> Result<Self> {
        if !kernel.is_odd() {
            return Err(Error::EvenKernel(kernel));
        }
        if sampling < 1 {
            return Err(Error::BadFactor(sampling));
        }
        let margin = Shape2::new(kernel.rows / 2, kernel.cols / 2);
        let inner_rows = image.rows.checked_sub(2 * margin.rows);
        let inner_cols = image.cols.checked_sub(2 * margin.cols);
        let (Some(ir), Some(ic)) = (inner_rows, inner_cols) else {
            return Err(Error::ImageTooSmall {
                needed: kernel,
                found: image,
            });
        };
        let inner = Shape2::new(ir, ic);
        if ir == 0 || ic == 0 || ir % sampling != 0 || ic % sampling != 0 {
            return Err(Error::NotDivisible {
                shape: inner,
                factor: sampling,
            });
        }
        Self::from_data(Shape2::new(ir / sampling, ic / sampling), kernel, sampling)
    }

    /// Shape of the meaningful part `m - 2l`.
    pub fn clipped(&self) -> Shape2 {
        Shape2::new(
            self.image.rows - 2 * self.margin.rows,
            self.image.cols - 2 * self.margin.cols,
        )
    }
}

/// Geometry with `m = s·n + 2l`.
pub fn geometry_from(data: Shape2, kernel: Shape2, sampling: usize) -> Result<ProblemGeometry> {
    ProblemGeometry::from_data(data, kernel, sampling)
}
