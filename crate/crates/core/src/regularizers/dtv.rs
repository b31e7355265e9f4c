use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, ColorImage, Image, VectorField};

/// Luminance weights applied to (R, G, B).
pub const LUMA_WEIGHTS: [f64; 3] = [0.2989, 0.5870, 0.1140];

/// Parameters of the direction field: scaling `γ ∈ [0, 1]` and smoothing `ε > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtvParams {
    pub gamma: f64,
    pub epsilon: f64,
}

impl DtvParams {
    pub fn new(gamma: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::BadParams(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::BadParams(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { gamma, epsilon })
    }
}

impl Default for DtvParams {
    fn default() -> Self {
        Self {
            gamma: 0.9995,
            epsilon: 0.003,
        }
    }
}

/// `ξ_i = γ ∇v_i / sqrt(‖∇v_i‖² + ε²)`.
pub fn build_vector_field(v: &Image, params: &DtvParams) -> VectorField {
    let g = gradient(v);
    let eps2 = params.epsilon * params.epsilon;
    let n = v.shape().len();
    let mut xi_row = Vec::with_capacity(n);
    let mut xi_col = Vec::with_capacity(n);
    for (&a, &b) in g.d_row().iter().zip(g.d_col()) {
        let w = params.gamma / (a * a + b * b + eps2).sqrt();
        xi_row.push(w * a);
        xi_col.push(w * b);
    }
    VectorField::from_raw(v.shape(), params.gamma, xi_row, xi_col)
}

/// Luminance of an RGB image, clipped to `[0, 1]`.
pub fn grayscale(rgb: &ColorImage) -> Image {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let (r, g, b) = (rgb.red.as_slice(), rgb.green.as_slice(), rgb.blue.as_slice());
    Image::from_raw(
        rgb.shape(),
        (0..r.len())
            .map(|i| (wr * r[i] + wg * g[i] + wb * b[i]).clamp(0.0, 1.0))
            .collect(),
    )
}

/// Isotropic total variation `Σ_i ‖∇u_i‖` with periodic forward differences.
pub fn tv(u: &Image) -> f64 {
    let g = gradient(u);
    g.d_row()
        .iter()
        .zip(g.d_col())
        .map(|(a, b)| a.hypot(*b))
        .sum()
}

/// Directional total variation `Σ_i ‖∇u_i - ⟨ξ_i, ∇u_i⟩ ξ_i‖`.
pub fn dtv(u: &Image, xi: &VectorField) -> Result<f64> {
    u.ensure_shape(xi.shape())?;
    let g = gradient(u);
    Ok(g.d_row()
        .iter()
        .zip(g.d_col())
        .zip(xi.xi_row.iter().zip(&xi.xi_col))
        .map(|((&a, &b), (&p, &q))| {
            let inner = p * a + q * b;
            (a - inner * p).hypot(b - inner * q)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(shape: Shape2, rng: &mut impl Rng) -> Image {
        Image::from_fn(shape, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn constant_side_information_gives_zero_field() {
        let xi = build_vector_field(&Image::filled(Shape2::square(5), 0.4), &DtvParams::default());
        assert!(xi.is_zero());
    }

    #[test]
    fn zero_gamma_gives_zero_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_image(Shape2::square(6), &mut rng);
        let xi = build_vector_field(&v, &DtvParams::new(0.0, 0.003).unwrap());
        assert!(xi.is_zero());
    }

    #[test]
    fn field_at_a_known_gradient() {
        // v = [[0, 4], [3, 7]] on a 2x2 periodic grid: ∇v at (0,0) is (3, 4).
        let v = Image::new(Shape2::square(2), vec![0.0, 4.0, 3.0, 7.0]).unwrap();
        let params = DtvParams::new(0.9995, 0.003).unwrap();
        let xi = build_vector_field(&v, &params);
        let denom = (25.0f64 + 9e-6).sqrt();
        let [a, b] = xi.at(0, 0);
        assert!((a - 0.9995 * 3.0 / denom).abs() < 1e-15);
        assert!((b - 0.9995 * 4.0 / denom).abs() < 1e-15);
        assert!(xi.max_norm() < 0.9995);
    }

    #[test]
    fn grayscale_weights() {
        let s = Shape2::new(1, 1);
        let px = |r: f64, g: f64, b: f64| {
            ColorImage::new(Image::filled(s, r), Image::filled(s, g), Image::filled(s, b)).unwrap()
        };
        // The standard weights sum to 0.9999, so white maps just below one.
        assert!((grayscale(&px(1.0, 1.0, 1.0)).get(0, 0) - 0.9999).abs() <= 1e-12);
        assert_eq!(grayscale(&px(0.0, 0.0, 0.0)).get(0, 0), 0.0);
        assert_eq!(grayscale(&px(1.0, 0.0, 0.0)).get(0, 0), 0.2989);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv(&Image::filled(Shape2::new(3, 3), 2.0)), 0.0);
        let u = Image::new(Shape2::new(1, 2), vec![0.0, 1.0]).unwrap();
        assert_eq!(tv(&u), 2.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_image(Shape2::new(5, 7), &mut rng);
        let zero = VectorField::zeros(u.shape());
        assert_eq!(dtv(&u, &zero).unwrap(), tv(&u));
    }

    #[test]
    fn aligned_and_orthogonal_contributions() {
        // Single row: only the column component of ∇u is nonzero.
        let u = Image::new(Shape2::new(1, 2), vec![0.0, 1.0]).unwrap();
        let gamma = 0.8;
        let aligned =
            VectorField::new(u.shape(), gamma, vec![0.0, 0.0], vec![gamma, -gamma]).unwrap();
        let expected = (1.0 - gamma * gamma) * tv(&u);
        assert!((dtv(&u, &aligned).unwrap() - expected).abs() < 1e-15);

        let orthogonal =
            VectorField::new(u.shape(), gamma, vec![gamma, gamma], vec![0.0, 0.0]).unwrap();
        assert!((dtv(&u, &orthogonal).unwrap() - tv(&u)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let u = Image::zeros(Shape2::square(3));
        assert!(dtv(&u, &VectorField::zeros(Shape2::square(4))).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(DtvParams::new(1.2, 0.1).is_err());
        assert!(DtvParams::new(0.5, 0.0).is_err());
        assert!(DtvParams::new(1.0, 0.1).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn sandwich_and_convexity(seed in any::<u64>(), gamma in 0.0f64..=1.0, t in 0.0f64..=1.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let shape = Shape2::new(rng.random_range(1..9), rng.random_range(1..9));
                let v = random_image(shape, &mut rng);
                let xi = build_vector_field(&v, &DtvParams::new(gamma, 0.01).unwrap());
                let u = random_image(shape, &mut rng);
                let w = random_image(shape, &mut rng);
                let d = dtv(&u, &xi).unwrap();
                prop_assert!((1.0 - gamma * gamma) * tv(&u) <= d + 1e-10);
                prop_assert!(d <= tv(&u) + 1e-10);

                let mix = u.scale(t).add_scaled(1.0 - t, &w);
                let lhs = dtv(&mix, &xi).unwrap();
                let rhs = t * d + (1.0 - t) * dtv(&w, &xi).unwrap();
                prop_assert!(lhs <= rhs + 1e-10);
            }
        }
    }
}
