use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Scalar;

/// Weight initialization schemes, all scaled by the receiving fan so early
/// activations keep unit-order variance regardless of layer width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform on `[-limit, limit]` with `limit = sqrt(3 * scale / fan_out)`,
    /// giving element variance `scale / fan_out`.
    UniformFanOut { scale: f64 },
    /// Zero-mean normal with variance `scale / fan_out`.
    NormalFanOut { scale: f64 },
    Zeros,
    Ones,
}

impl Init {
    /// Dense kernels: uniform with variance `1/(3 * fan_out)`.
    pub fn dense_default() -> Self {
        Init::UniformFanOut { scale: 1.0 / 3.0 }
    }

    /// Convolution kernels: normal with variance `2 / fan_out`.
    pub fn conv_default() -> Self {
        Init::NormalFanOut { scale: 2.0 }
    }

    pub fn draw<S: Scalar, R: Rng>(&self, n: usize, fan_out: usize, rng: &mut R) -> Vec<S> {
        match *self {
            Init::UniformFanOut { scale } => {
                let limit = (3.0 * scale / fan_out.max(1) as f64).sqrt();
                (0..n)
                    .map(|_| S::from_f64(limit * (2.0 * rng.random::<f64>() - 1.0)))
                    .collect()
            }
            Init::NormalFanOut { scale } => {
                let sigma = (scale / fan_out.max(1) as f64).sqrt();
                let dist = Normal::new(0.0, sigma).expect("sigma is finite");
                (0..n).map(|_| S::from_f64(dist.sample(rng))).collect()
            }
            Init::Zeros => vec![S::zero(); n],
            Init::Ones => vec![S::one(); n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn variance(v: &[f64]) -> f64 {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn uniform_variance_matches_scale_over_fan_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fan_out = 64;
        let v: Vec<f64> = Init::dense_default().draw(100_000, fan_out, &mut rng);
        let target = (1.0 / 3.0) / fan_out as f64;
        let got = variance(&v);
        assert!((got - target).abs() / target < 0.05, "{got} vs {target}");
        let limit = (1.0_f64 / fan_out as f64).sqrt();
        assert!(v.iter().all(|x| x.abs() <= limit));
    }

    #[test]
    fn normal_variance_matches_scale_over_fan_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fan_out = 9 * 16;
        let v: Vec<f64> = Init::conv_default().draw(100_000, fan_out, &mut rng);
        let target = 2.0 / fan_out as f64;
        let got = variance(&v);
        assert!((got - target).abs() / target < 0.05, "{got} vs {target}");
    }

    #[test]
    fn draws_are_deterministic_per_seed() {
        let a: Vec<f32> =
            Init::conv_default().draw(32, 9, &mut ChaCha8Rng::seed_from_u64(7));
        let b: Vec<f32> =
            Init::conv_default().draw(32, 9, &mut ChaCha8Rng::seed_from_u64(7));
        let c: Vec<f32> =
            Init::conv_default().draw(32, 9, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn constant_inits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(Init::Zeros.draw::<f64, _>(3, 1, &mut rng), vec![0.0; 3]);
        assert_eq!(Init::Ones.draw::<f64, _>(3, 1, &mut rng), vec![1.0; 3]);
    }
}
