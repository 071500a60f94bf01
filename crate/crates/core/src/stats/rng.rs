use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto the cipher's stream
/// counter, so distinct ids give non-overlapping sequences for the same seed.
/// A stream is single-owner: move it between threads, never share it.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RandomStream { seed, stream_id, rng }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derives `n` child streams. The children depend only on the parent's
    /// `(seed, stream_id)`, not on how far the parent has been advanced.
    pub fn split(&self, n: usize) -> Result<Vec<RandomStream>> {
        if n == 0 {
            return Err(Error::domain("split requires n >= 1"));
        }
        let child_seed = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(1)));
        Ok((0..n as u64).map(|i| RandomStream::new(child_seed, i)).collect())
    }

    /// Child stream `index` of [`split`](Self::split), without materializing the others.
    pub fn child(&self, index: u64) -> RandomStream {
        let child_seed = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(1)));
        RandomStream::new(child_seed, index)
    }

    /// Uniform variate on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_are_bit_identical() {
        let mut a = RandomStream::new(7, 3);
        let mut b = RandomStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_is_deterministic() {
        let parent = RandomStream::from_seed(11);
        let one = parent.split(1).unwrap();
        assert_eq!(one.len(), 1);

        let mut p1 = parent.split(2).unwrap();
        let mut p2 = parent.split(2).unwrap();
        for (a, b) in p1.iter_mut().zip(p2.iter_mut()) {
            assert_eq!(a.stream_id(), b.stream_id());
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(p1[0].stream_id(), p1[1].stream_id());

        let mut c = parent.child(1);
        let mut fresh = parent.split(2).unwrap();
        assert_eq!(c.next_u64(), fresh[1].next_u64());
    }

    #[test]
    fn split_zero_is_an_error() {
        assert!(RandomStream::from_seed(1).split(0).is_err());
    }

    #[test]
    fn split_streams_are_uncorrelated() {
        let mut kids = RandomStream::from_seed(2024).split(2).unwrap();
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| kids[0].uniform()).collect();
        let ys: Vec<f64> = (0..n).map(|_| kids[1].uniform()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!(rho.abs() < 0.03, "rho = {rho}");
    }

    #[test]
    fn uniform_is_open_interval() {
        let mut s = RandomStream::from_seed(5);
        for _ in 0..100_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
