//! Seeded random streams labelled by purpose.
//!
//! A run has one 64-bit seed. Each consumer (weight init, data generation,
//! shuffling, reinforcement coins, subsampling) draws from its own ChaCha
//! stream selected by [`StreamId`], so changing how many draws one consumer
//! makes never shifts another consumer's sequence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    WeightInit,
    DataGen,
    Shuffle,
    Reinforcement,
    Subsample,
    Custom(u64),
}

impl StreamId {
    fn word(self) -> u64 {
        match self {
            StreamId::WeightInit => 1,
            StreamId::DataGen => 2,
            StreamId::Shuffle => 3,
            StreamId::Reinforcement => 4,
            StreamId::Subsample => 5,
            StreamId::Custom(n) => 0x1000 + n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: StreamId,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream.word());
        Self {
            seed,
            stream,
            rng,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Returns `true` with probability `p`.
    ///
    /// Panics if `p` is outside `[0, 1]`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        assert!(
            (0.0..=1.0).contains(&p),
            "bernoulli probability {p} outside [0, 1]"
        );
        // uniform() < 1 always, so p = 1 is always true and p = 0 always false.
        self.uniform() < p
    }

    /// Standard normal draw via the Box–Muller transform.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping ln finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

/// Matrix of i.i.d. normal entries, filled in row-major order.
///
/// Panics if `std` is negative.
pub fn gaussian_matrix(
    rows: usize,
    cols: usize,
    mean: f64,
    std: f64,
    rng: &mut RngStream,
) -> Matrix {
    assert!(std >= 0.0, "negative standard deviation {std}");
    let data = (0..rows * cols).map(|_| rng.normal(mean, std)).collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_gives_constant() {
        let mut rng = RngStream::new(1, StreamId::WeightInit);
        let m = gaussian_matrix(3, 4, 2.5, 0.0, &mut rng);
        assert!(m.as_slice().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn same_seed_and_stream_repeat() {
        let a = gaussian_matrix(5, 7, 0.0, 1.0, &mut RngStream::new(9, StreamId::DataGen));
        let b = gaussian_matrix(5, 7, 0.0, 1.0, &mut RngStream::new(9, StreamId::DataGen));
        assert_eq!(a, b);
        let c = gaussian_matrix(5, 7, 0.0, 1.0, &mut RngStream::new(9, StreamId::Shuffle));
        assert_ne!(a, c);
    }

    #[test]
    fn normal_moments() {
        let n = 1_000_000;
        let mut rng = RngStream::new(2018, StreamId::Custom(0));
        let m = gaussian_matrix(1000, 1000, 0.0, 1.0, &mut rng);
        let mean = m.as_slice().iter().sum::<f64>() / n as f64;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 0.01, "var {var}");
    }

    #[test]
    fn bernoulli_extremes() {
        let mut rng = RngStream::new(3, StreamId::Reinforcement);
        assert!((0..10_000).all(|_| !rng.bernoulli(0.0)));
        assert!((0..10_000).all(|_| rng.bernoulli(1.0)));
    }

    #[test]
    fn bernoulli_rate() {
        let n = 100_000;
        let p = 0.3;
        let mut rng = RngStream::new(4, StreamId::Reinforcement);
        let hits = (0..n).filter(|_| rng.bernoulli(p)).count();
        let rate = hits as f64 / n as f64;
        assert!(
            (rate - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt(),
            "rate {rate}"
        );
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn bernoulli_rejects_bad_probability() {
        RngStream::new(0, StreamId::Reinforcement).bernoulli(1.5);
    }

    #[test]
    fn streams_are_uncorrelated() {
        let n = 50_000;
        let mut a = RngStream::new(11, StreamId::WeightInit);
        let mut b = RngStream::new(11, StreamId::Shuffle);
        let xs: Vec<f64> = (0..n).map(|_| a.uniform() - 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform() - 0.5).collect();
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        let corr = cov / (1.0 / 12.0);
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
    }
}
