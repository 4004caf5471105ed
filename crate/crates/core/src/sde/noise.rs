//! Per-input Gaussian noise streams.
//!
//! Each `(master seed, trajectory)` pair seeds its own ChaCha generator and
//! every input draws from a separate stream of it, so results do not depend
//! on the number of worker threads or on the order trajectories run in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::C64;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 256-bit generator seed for one trajectory.
pub fn trajectory_seed(master: u64, trajectory: u64) -> [u8; 32] {
    let mut t = trajectory.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut state = master ^ splitmix(&mut t);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    seed
}

/// White noise with standard deviation `sigma` per quadrature for each input.
pub struct NoiseSource {
    streams: Vec<ChaCha8Rng>,
    sigma: f64,
}

impl NoiseSource {
    pub fn new(master: u64, trajectory: u64, n_inputs: usize, sigma: f64) -> Self {
        let seed = trajectory_seed(master, trajectory);
        let streams = (0..n_inputs)
            .map(|k| {
                let mut rng = ChaCha8Rng::from_seed(seed);
                rng.set_stream(k as u64);
                rng
            })
            .collect();
        NoiseSource { streams, sigma }
    }

    /// Adds one fresh sample to every entry of `out`.
    pub fn add_to(&mut self, out: &mut [C64]) {
        for (z, rng) in out.iter_mut().zip(self.streams.iter_mut()) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += C64::new(re * self.sigma, im * self.sigma);
        }
    }
}
