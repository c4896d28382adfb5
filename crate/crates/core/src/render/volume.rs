//! Stratified sampling and the emission-absorption quadrature
//! `C = sum_i T_i (1 - exp(-sigma_i delta_i)) c_i`, forward and adjoint.

use rand::Rng;

use super::camera::Ray;
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RaySamples {
    pub t: Vec<f64>,
    pub positions: Vec<[f64; 3]>,
    pub deltas: Vec<f64>,
}

impl RaySamples {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// `n` stratified samples on `[near, far]`: bin centers, or one uniform draw
/// per bin when `jitter` is set.
///
/// Sample `i` stands for the interval between the midpoints to its
/// neighbours (the ray ends for the first and last sample), so
/// `sum(deltas) == far - near` and centered samples all get the bin width.
pub fn sample_ray<R: Rng + ?Sized>(
    ray: &Ray,
    n: usize,
    jitter: bool,
    rng: &mut R,
) -> Result<RaySamples> {
    ensure!(n >= 1, Domain, "need at least one sample per ray");
    ensure!(
        ray.far.is_finite(),
        Domain,
        "ray must be clipped to a finite interval before sampling"
    );
    let width = (ray.far - ray.near) / n as f64;
    let t: Vec<f64> = (0..n)
        .map(|i| {
            let u = if jitter { rng.gen::<f64>() } else { 0.5 };
            ray.near + (i as f64 + u) * width
        })
        .collect();
    let mut deltas = Vec::with_capacity(n);
    let mut prev = ray.near;
    for i in 0..n {
        let next = if i + 1 < n {
            0.5 * (t[i] + t[i + 1])
        } else {
            ray.far
        };
        deltas.push(next - prev);
        prev = next;
    }
    let positions = t.iter().map(|&ti| ray.at(ti)).collect();
    Ok(RaySamples {
        t,
        positions,
        deltas,
    })
}

/// Result of compositing one ray (background excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct RayRender {
    pub rgb: [f64; 3],
    pub weights: Vec<f64>,
    /// `T_i` for every sample.
    pub transmittance: Vec<f64>,
    /// Transmittance left after the last sample.
    pub residual_transmittance: f64,
}

impl RayRender {
    pub fn with_background(&self, bg: [f64; 3]) -> [f64; 3] {
        let t = self.residual_transmittance;
        [
            self.rgb[0] + t * bg[0],
            self.rgb[1] + t * bg[1],
            self.rgb[2] + t * bg[2],
        ]
    }
}

/// Alpha-composites the samples front to back with
/// `T_i = exp(-sum_{j<i} sigma_j delta_j)`.
pub fn render_ray(deltas: &[f64], rgb: &[[f64; 3]], sigma: &[f64]) -> Result<RayRender> {
    ensure!(
        deltas.len() == rgb.len() && rgb.len() == sigma.len(),
        Structure,
        "sample arrays differ in length"
    );
    let n = deltas.len();
    let mut weights = Vec::with_capacity(n);
    let mut trans = Vec::with_capacity(n);
    let mut out = [0.0; 3];
    let mut optical = 0.0f64;
    for i in 0..n {
        if !(sigma[i] >= 0.0) {
            return Err(Error::Domain(format!(
                "density must be nonnegative (sample {i}: {})",
                sigma[i]
            )));
        }
        let t = (-optical).exp();
        let tau = sigma[i] * deltas[i];
        let w = t * -(-tau).exp_m1();
        for ch in 0..3 {
            out[ch] += w * rgb[i][ch];
        }
        trans.push(t);
        weights.push(w);
        optical += tau;
    }
    Ok(RayRender {
        rgb: out,
        weights,
        transmittance: trans,
        residual_transmittance: (-optical).exp(),
    })
}

/// Adjoint of [`render_ray`] plus background: given `d_color = dL/dC`,
/// returns `dL/dc_i` and `dL/dsigma_i`.
pub fn render_ray_backward(
    deltas: &[f64],
    rgb: &[[f64; 3]],
    sigma: &[f64],
    fwd: &RayRender,
    background: [f64; 3],
    d_color: [f64; 3],
    d_rgb: &mut Vec<[f64; 3]>,
    d_sigma: &mut Vec<f64>,
) {
    let n = deltas.len();
    d_rgb.clear();
    d_sigma.clear();
    d_rgb.resize(n, [0.0; 3]);
    d_sigma.resize(n, 0.0);
    let dot = |c: &[f64; 3]| c[0] * d_color[0] + c[1] * d_color[1] + c[2] * d_color[2];
    // Suffix sum of everything composited behind sample k.
    let mut behind = fwd.residual_transmittance * dot(&background);
    for k in (0..n).rev() {
        let w = fwd.weights[k];
        d_rgb[k] = [w * d_color[0], w * d_color[1], w * d_color[2]];
        let ck = dot(&rgb[k]);
        let t_next = fwd.transmittance[k] * (-sigma[k] * deltas[k]).exp();
        d_sigma[k] = deltas[k] * (t_next * ck - behind);
        behind += w * ck;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ray(near: f64, far: f64) -> Ray {
        Ray::new([0.0; 3], [0.0, 0.0, 1.0], near, far).unwrap()
    }

    #[test]
    fn single_centered_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_ray(&ray(0.5, 2.5), 1, false, &mut rng).unwrap();
        assert_eq!(s.t, vec![1.5]);
        assert_eq!(s.deltas, vec![2.0]);
    }

    #[test]
    fn four_bin_centers() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_ray(&ray(0.0, 1.0), 4, false, &mut rng).unwrap();
        assert_eq!(s.t, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(s.deltas.iter().all(|&d| (d - 0.25).abs() < 1e-15));
    }

    #[test]
    fn jitter_is_reproducible_and_stratified() {
        let r = ray(1.0, 3.0);
        let a = sample_ray(&r, 16, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_ray(&r, 16, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        for (i, &t) in a.t.iter().enumerate() {
            assert!(t >= 1.0 + i as f64 * 0.125 && t <= 1.0 + (i + 1) as f64 * 0.125);
        }
        assert!((a.deltas.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(a.deltas.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn vacuum_renders_black() {
        let r = render_ray(&[0.1; 8], &[[0.3, 0.6, 0.9]; 8], &[0.0; 8]).unwrap();
        assert_eq!(r.rgb, [0.0; 3]);
        assert!(r.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn opaque_first_sample_saturates() {
        let mut rgb = vec![[0.1, 0.2, 0.3]; 5];
        rgb[0] = [0.9, 0.5, 0.25];
        let r = render_ray(&[1.0; 5], &rgb, &[50.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        for ch in 0..3 {
            assert!((r.rgb[ch] - rgb[0][ch]).abs() < 1e-20);
        }
        assert!(r.weights[1..].iter().all(|&w| w < 1e-21));
    }

    #[test]
    fn homogeneous_medium_matches_closed_form() {
        let (sigma, len, c) = (1.7, 1.3, [0.2, 0.5, 0.8]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_ray(&ray(0.0, len), 256, false, &mut rng).unwrap();
        let r = render_ray(&s.deltas, &vec![c; 256], &vec![sigma; 256]).unwrap();
        for ch in 0..3 {
            let want = c[ch] * (1.0 - (-sigma * len).exp());
            assert!((r.rgb[ch] - want).abs() < 1e-3);
        }
    }

    #[test]
    fn negative_density_is_rejected() {
        assert!(matches!(
            render_ray(&[0.1, 0.1], &[[0.0; 3]; 2], &[0.5, -0.1]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 7;
        let deltas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.4)).collect();
        let rgb: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let sigma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
        let bg = [0.3, 0.1, 0.7];
        let dc = [0.4, -1.1, 0.9];
        let loss = |rgb: &[[f64; 3]], sigma: &[f64]| {
            let c = render_ray(&deltas, rgb, sigma).unwrap().with_background(bg);
            c[0] * dc[0] + c[1] * dc[1] + c[2] * dc[2]
        };
        let fwd = render_ray(&deltas, &rgb, &sigma).unwrap();
        let (mut gr, mut gs) = (Vec::new(), Vec::new());
        render_ray_backward(&deltas, &rgb, &sigma, &fwd, bg, dc, &mut gr, &mut gs);
        let h = 1e-6;
        for k in 0..n {
            let mut sp = sigma.clone();
            sp[k] += h;
            let mut sm = sigma.clone();
            sm[k] -= h;
            let fd = (loss(&rgb, &sp) - loss(&rgb, &sm)) / (2.0 * h);
            assert!((fd - gs[k]).abs() < 1e-8, "{fd} vs {}", gs[k]);
            for ch in 0..3 {
                let mut rp = rgb.clone();
                rp[k][ch] += h;
                let mut rm = rgb.clone();
                rm[k][ch] -= h;
                let fd = (loss(&rp, &sigma) - loss(&rm, &sigma)) / (2.0 * h);
                assert!((fd - gr[k][ch]).abs() < 1e-8);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn weights_are_a_sub_partition_of_unity(
            sig in proptest::collection::vec(0.0f64..20.0, 1..40),
            seed in 0u64..100,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = sig.len();
            let deltas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.001..0.5)).collect();
            let r = render_ray(&deltas, &vec![[0.5; 3]; n], &sig).unwrap();
            let sum: f64 = r.weights.iter().sum();
            proptest::prop_assert!(sum <= 1.0 + 1e-12);
            proptest::prop_assert!(r.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
            for w in r.transmittance.windows(2) {
                proptest::prop_assert!(w[1] <= w[0]);
            }
        }

        #[test]
        fn splitting_a_sample_changes_nothing(
            sig in proptest::collection::vec(0.0f64..10.0, 2..20),
            split in 0usize..20,
        ) {
            let n = sig.len();
            let k = split % n;
            let deltas = vec![0.1; n];
            let rgb: Vec<[f64; 3]> = (0..n).map(|i| [i as f64 / n as f64, 0.5, 1.0 - i as f64 / n as f64]).collect();
            let a = render_ray(&deltas, &rgb, &sig).unwrap();
            let mut d2 = deltas.clone();
            let mut r2 = rgb.clone();
            let mut s2 = sig.clone();
            d2[k] = 0.05;
            d2.insert(k, 0.05);
            r2.insert(k, rgb[k]);
            s2.insert(k, sig[k]);
            let b = render_ray(&d2, &r2, &s2).unwrap();
            for ch in 0..3 {
                proptest::prop_assert!((a.rgb[ch] - b.rgb[ch]).abs() < 1e-6);
            }
        }
    }
}
