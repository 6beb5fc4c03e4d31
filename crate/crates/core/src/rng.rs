//! Reproducible random streams and uniform sampling on the simplex.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// A ChaCha8 stream selected by `(seed, stream_id)`.
///
/// Streams with different ids share the key but never overlap, so trial `t`
/// sees the same numbers whatever order or thread it runs on.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
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

/// Lebesgue-uniform point of the `(m-1)`-simplex (flat Dirichlet): `m`
/// unit exponentials normalized by their sum.
pub fn sample_simplex_uniform<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<SimplexPoint> {
    if m < 2 {
        return Err(Error::InvalidArgument("simplex sampling needs m >= 2"));
    }
    let draws: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = draws.iter().sum();
    Ok(SimplexPoint::projected(draws.into_iter().map(|x| x / sum).collect()))
}
