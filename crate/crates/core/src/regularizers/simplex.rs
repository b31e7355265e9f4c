use crate::grid::{Image, Kernel};

/// Componentwise `max(0, u)`.
pub fn project_nonnegative(u: &Image) -> Image {
    u.map(positive_part)
}

/// `max(0, v)` that never yields `-0.0`.
#[inline]
pub(crate) fn positive_part(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Euclidean projection onto `{k ≥ 0, Σk = 1}`.
pub fn project_simplex(k: &Kernel) -> Kernel {
    let mut values = k.as_slice().to_vec();
    let mut scratch = Vec::with_capacity(values.len());
    project_simplex_in_place(&mut values, &mut scratch);
    Kernel::from_raw(Image::from_raw(k.shape(), values))
}

/// Euclidean projection of an arbitrary-length vector onto the simplex.
pub fn project_simplex_vec(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    project_simplex_in_place(&mut out, &mut Vec::with_capacity(values.len()));
    out
}

/// Sort-based exact projection (Duchi et al.): find the largest `ρ` with
/// `v_(ρ) > (Σ_{j≤ρ} v_(j) - 1) / ρ` on the descending order statistics and
/// shift by that threshold.
///
/// The result is rescaled by its own sum, which keeps the sum within a few
/// ulps of one even when the threshold cancels most of the input's magnitude.
pub(crate) fn project_simplex_in_place(values: &mut [f64], scratch: &mut Vec<f64>) {
    if values.is_empty() {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(values);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumulative = 0.0;
    let mut threshold = scratch[0] - 1.0;
    for (j, &v) in scratch.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if v - candidate > 0.0 {
            threshold = candidate;
        } else {
            break;
        }
    }

    let total: f64 = values.iter().map(|v| positive_part(v - threshold)).sum();
    if total > 0.0 {
        for v in values.iter_mut() {
            *v = positive_part(*v - threshold) / total;
        }
    } else {
        // The threshold cancelled every entry: spread the mass over the maxima.
        let top = scratch[0];
        let ties = values.iter().filter(|&&v| v == top).count() as f64;
        for v in values.iter_mut() {
            *v = if *v == top { 1.0 / ties } else { 0.0 };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive active-set search: for every support, the KKT candidate is
    /// `v_S - θ` with `θ = (Σ v_S - 1) / |S|`; keep the closest feasible one.
    fn kkt_oracle(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
            let mut x = vec![0.0; n];
            let mut feasible = true;
            for &i in &support {
                x[i] = v[i] - theta;
                feasible &= x[i] >= 0.0;
            }
            if !feasible {
                continue;
            }
            let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, x));
            }
        }
        best.unwrap().1
    }

    fn kernel(values: Vec<f64>) -> Kernel {
        Kernel::from_values(Shape2::new(1, values.len()), values).unwrap()
    }

    #[test]
    fn nonnegative_projection() {
        let u = Image::new(Shape2::new(1, 2), vec![-1.0, 0.5]).unwrap();
        assert_eq!(project_nonnegative(&u).as_slice(), &[0.0, 0.5]);
        let p = Image::new(Shape2::new(1, 3), vec![0.1, 2.0, 3.0]).unwrap();
        assert_eq!(project_nonnegative(&p), p);
    }

    #[test]
    fn feasible_kernel_is_unchanged() {
        let k = kernel(vec![0.2, 0.5, 0.3]);
        let p = project_simplex(&k);
        for (a, b) in p.as_slice().iter().zip(k.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_kernel_becomes_uniform() {
        let k = Kernel::new(Image::filled(Shape2::square(5), 3.7)).unwrap();
        let p = project_simplex(&k);
        assert!(p.as_slice().iter().all(|v| (v - 1.0 / 25.0).abs() < 1e-15));
    }

    #[test]
    fn matches_kkt_oracle_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = project_simplex(&kernel(v.clone()));
            let oracle = kkt_oracle(&v);
            for (a, b) in p.as_slice().iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-10, "{v:?}");
            }
        }
    }

    #[test]
    fn even_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for len in [2, 4, 6, 8] {
            let v: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
            for (a, b) in project_simplex_vec(&v).iter().zip(kkt_oracle(&v)) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn huge_inputs_stay_feasible() {
        let k = kernel(vec![1e18, 1e18 + 4096.0, -3e17, 2.0, 0.0]);
        let p = project_simplex(&k);
        assert!(p.as_slice().iter().all(|&v| v >= 0.0));
        assert!((p.sum() - 1.0).abs() <= 1e-12);
    }
}
