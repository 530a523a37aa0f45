use rand::Rng;

use super::tensor::{Scalar, Tensor2};

/// Inverted dropout: kept activations are scaled by `1/(1 − rate)` during
/// training; inference is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
        Self { rate }
    }

    /// Returns the output and, in training mode, the per-entry scale mask.
    pub fn forward<T: Scalar, R: Rng>(
        &self,
        mut x: Tensor2<T>,
        rng: Option<&mut R>,
    ) -> (Tensor2<T>, Option<Vec<T>>) {
        let Some(rng) = rng else {
            return (x, None);
        };
        if self.rate == 0.0 {
            return (x, None);
        }
        let keep = T::of(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.data.len())
            .map(|_| {
                if rng.gen::<f64>() < self.rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        x.data.iter_mut().zip(&mask).for_each(|(v, &m)| *v *= m);
        (x, Some(mask))
    }

    pub fn backward<T: Scalar>(mask: Option<&[T]>, mut dy: Tensor2<T>) -> Tensor2<T> {
        if let Some(m) = mask {
            dy.data.iter_mut().zip(m).for_each(|(d, &k)| *d *= k);
        }
        dy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let x = Tensor2::from_vec(1, 4, vec![1.0f64, -2.0, 3.0, 4.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(Dropout::new(0.0).forward(x.clone(), Some(&mut rng)).0, x);
        assert_eq!(Dropout::new(0.9).forward(x.clone(), None::<&mut ChaCha8Rng>).0, x);
    }

    #[test]
    fn expectation_is_preserved() {
        let x = Tensor2::from_vec(1, 100_000, vec![1.0f64; 100_000]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (y, _) = Dropout::new(0.33).forward(x, Some(&mut rng));
        let mean = y.data.iter().sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
