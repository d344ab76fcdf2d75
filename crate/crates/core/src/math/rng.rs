use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::math::Vector;

/// Seeded random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha12 with the stream id mapped onto the cipher's stream
/// counter, so distinct streams of one seed never overlap. [`RngHandle::split`]
/// derives children from the identity of the handle, not from its position,
/// which keeps parallel sweeps reproducible regardless of scheduling.
#[derive(Clone, Debug)]
pub struct RngHandle {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Child handle for sub-task `child`.
    pub fn split(&self, child: u64) -> RngHandle {
        RngHandle::new(
            self.seed,
            splitmix64(self.stream ^ splitmix64(child.wrapping_add(0x5851_f42d_4c95_7f2d))),
        )
    }

    /// Child handle keyed by a label, for readability at call sites.
    pub fn split_named(&self, label: &str) -> RngHandle {
        // FNV-1a over the label bytes.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.split(h)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `d` i.i.d. `N(0, sigma2)` entries.
pub fn sample_gaussian_vector(rng: &mut RngHandle, d: usize, sigma2: f64) -> Result<Vector> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(invalid(
            "sigma2",
            format!("must be finite and >= 0, got {sigma2}"),
        ));
    }
    if sigma2 == 0.0 {
        return Ok(Vector::zeros(d));
    }
    let sd = sigma2.sqrt();
    Ok(Vector::from_finite(
        (0..d).map(|_| sd * rng.standard_normal()).collect(),
    ))
}

/// Laplace(0, scale) by inversion.
pub fn sample_laplace(rng: &mut RngHandle, scale: f64) -> Result<f64> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(invalid(
            "scale",
            format!("must be finite and >= 0, got {scale}"),
        ));
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    // u in (-1/2, 1/2]; 1 - 2|u| in [0, 1) is mapped away from 0 to keep ln finite.
    let u = rng.uniform() - 0.5;
    let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    Ok(-scale * u.signum() * tail.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn same_identity_same_sequence() {
        let a = sample_gaussian_vector(&mut RngHandle::new(7, 3), 2, 1.0).unwrap();
        let b = sample_gaussian_vector(&mut RngHandle::new(7, 3), 2, 1.0).unwrap();
        assert_eq!(a, b);
        let c = sample_gaussian_vector(&mut RngHandle::new(7, 4), 2, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_ignores_consumption() {
        let parent = RngHandle::new(1, 0);
        let mut used = parent.clone();
        used.uniform();
        let mut a = parent.split(5);
        let mut b = used.split(5);
        assert_eq!(a.uniform(), b.uniform());
        assert_ne!(parent.split(5).stream(), parent.split(6).stream());
    }

    #[test]
    fn degenerate_noise() {
        let mut rng = RngHandle::new(0, 0);
        assert_eq!(
            sample_gaussian_vector(&mut rng, 3, 0.0).unwrap().as_slice(),
            &[0.0; 3]
        );
        assert_eq!(sample_laplace(&mut rng, 0.0).unwrap(), 0.0);
        assert!(sample_gaussian_vector(&mut rng, 3, -1.0).is_err());
        assert!(sample_laplace(&mut rng, -0.5).is_err());
    }

    #[test]
    fn gaussian_variance_monte_carlo() {
        let mut rng = RngHandle::new(11, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_gaussian_vector(&mut rng, 1, 1.0).unwrap().as_slice()[0])
            .collect();
        let (_, var) = moments(&xs);
        assert!((0.99..=1.01).contains(&var), "variance {var}");
    }

    #[test]
    fn laplace_moments_monte_carlo() {
        let mut rng = RngHandle::new(12, 0);
        let unit: Vec<f64> = (0..1_000_000)
            .map(|_| sample_laplace(&mut rng, 1.0).unwrap())
            .collect();
        let (mean, _) = moments(&unit);
        assert!((-0.01..=0.01).contains(&mean), "mean {mean}");

        let wide: Vec<f64> = (0..1_000_000)
            .map(|_| sample_laplace(&mut rng, 2.0).unwrap())
            .collect();
        let (_, var) = moments(&wide);
        assert!((7.8..=8.2).contains(&var), "variance {var}");
    }
}
