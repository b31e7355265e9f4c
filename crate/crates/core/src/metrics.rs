//! Image similarity (SSIM, MSE, PSNR) and kernel centroids.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Image, Kernel, SIMPLEX_SUM_TOLERANCE};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Normalized 1-D Gaussian of odd length.
fn gaussian_taps(len: usize, sigma: f64) -> Vec<f64> {
    let c = (len / 2) as f64;
    let taps: Vec<f64> = (0..len)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable "valid" filtering with the same taps along rows and columns.
fn filter_valid(x: &[f64], rows: usize, cols: usize, taps: &[f64]) -> Vec<f64> {
    let w = taps.len();
    let out_cols = cols - w + 1;
    let out_rows = rows - w + 1;
    let mut horiz = vec![0.0; rows * out_cols];
    for r in 0..rows {
        for c in 0..out_cols {
            horiz[r * out_cols + c] = taps.iter().enumerate().map(|(t, g)| g * x[r * cols + c + t]).sum();
        }
    }
    let mut out = vec![0.0; out_rows * out_cols];
    for r in 0..out_rows {
        for c in 0..out_cols {
            out[r * out_cols + c] = taps
                .iter()
                .enumerate()
                .map(|(t, g)| g * horiz[(r + t) * out_cols + c])
                .sum();
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (`σ = 1.5`),
/// `C1 = (0.01 R)²`, `C2 = (0.03 R)²`, averaged over the window positions
/// that fit inside the image. Smaller images use the largest odd window that fits.
pub fn ssim(x: &Image, y: &Image, dynamic_range: f64) -> Result<f64> {
    x.ensure_shape(y.shape())?;
    if !(dynamic_range > 0.0 && dynamic_range.is_finite()) {
        return Err(Error::BadParams(format!(
            "dynamic range must be positive, got {dynamic_range}"
        )));
    }
    let (rows, cols) = (x.rows(), x.cols());
    let mut w = SSIM_WINDOW.min(rows).min(cols);
    if w % 2 == 0 {
        w -= 1;
    }
    let taps = gaussian_taps(w, SSIM_SIGMA);
    let (a, b) = (x.as_slice(), y.as_slice());
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(u, v)| u * v).collect() };
    let mu_x = filter_valid(a, rows, cols, &taps);
    let mu_y = filter_valid(b, rows, cols, &taps);
    let xx = filter_valid(&prod(a, a), rows, cols, &taps);
    let yy = filter_valid(&prod(b, b), rows, cols, &taps);
    let xy = filter_valid(&prod(a, b), rows, cols, &taps);
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

pub fn mse(x: &Image, y: &Image) -> Result<f64> {
    x.ensure_shape(y.shape())?;
    Ok(x.sub(y).norm_sq() / x.shape().len() as f64)
}

/// `10 log10(R² / MSE)`; infinite for identical images.
pub fn psnr(x: &Image, y: &Image, dynamic_range: f64) -> Result<f64> {
    let e = mse(x, y)?;
    Ok(10.0 * (dynamic_range * dynamic_range / e).log10())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub ssim: f64,
    pub mean_squared_error: f64,
    pub psnr: f64,
}

pub fn compare(x: &Image, y: &Image, dynamic_range: f64) -> Result<SimilarityReport> {
    Ok(SimilarityReport {
        ssim: ssim(x, y, dynamic_range)?,
        mean_squared_error: mse(x, y)?,
        psnr: psnr(x, y, dynamic_range)?,
    })
}

/// `Σ_i i·k_i` in 0-based tap coordinates (row, col).
pub fn kernel_centroid(k: &Kernel) -> Result<(f64, f64)> {
    let sum = k.sum();
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOLERANCE {
        return Err(Error::NotNormalized(sum));
    }
    let (mut r, mut c) = (0.0, 0.0);
    for a in 0..k.rows() {
        for b in 0..k.cols() {
            let v = k.get(a, b);
            r += a as f64 * v;
            c += b as f64 * v;
        }
    }
    Ok((r, c))
}

/// Centroid minus the center tap.
pub fn centroid_offset(k: &Kernel) -> Result<(f64, f64)> {
    let (r, c) = kernel_centroid(k)?;
    let m = k.margin();
    Ok((r - m.rows as f64, c - m.cols as f64))
}

pub const SWEEP_CSV_HEADER: &str = "lambda_u,lambda_k,gamma,ssim,mse,psnr,final_objective";

/// One cell of a parameter sweep. Failed cells carry `None` metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_u: f64,
    pub lambda_k: f64,
    pub gamma: f64,
    pub report: Option<SimilarityReport>,
    pub final_objective: Option<f64>,
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    let opt = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |v| v.to_string());
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.lambda_u,
            row.lambda_k,
            row.gamma,
            opt(row.report.map(|r| r.ssim)),
            opt(row.report.map(|r| r.mean_squared_error)),
            opt(row.report.map(|r| r.psnr)),
            opt(row.final_objective),
        )?;
    }
    Ok(())
}
