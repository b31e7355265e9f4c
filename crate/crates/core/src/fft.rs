//! Row/column 2-D FFT on row-major complex buffers.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Shape2;

#[derive(Clone)]
pub(crate) struct Fft2 {
    shape: Shape2,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2").field("shape", &self.shape).finish()
    }
}

impl Fft2 {
    pub(crate) fn new(shape: Shape2) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape,
            row_fwd: planner.plan_fft_forward(shape.cols),
            row_inv: planner.plan_fft_inverse(shape.cols),
            col_fwd: planner.plan_fft_forward(shape.rows),
            col_inv: planner.plan_fft_inverse(shape.rows),
        }
    }

    pub(crate) fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.row_fwd, &self.col_fwd);
    }

    /// Normalized inverse; returns the real part.
    pub(crate) fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut buf, &self.row_inv, &self.col_inv);
        let norm = 1.0 / self.shape.len() as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }

    fn transform(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let Shape2 { rows: nr, cols: nc } = self.shape;
        debug_assert_eq!(buf.len(), nr * nc);
        if nc > 1 {
            rows.process(buf);
        }
        if nr > 1 {
            let mut t = vec![Complex64::new(0.0, 0.0); nr * nc];
            for r in 0..nr {
                for c in 0..nc {
                    t[c * nr + r] = buf[r * nc + c];
                }
            }
            cols.process(&mut t);
            for r in 0..nr {
                for c in 0..nc {
                    buf[r * nc + c] = t[c * nr + r];
                }
            }
        }
    }
}
