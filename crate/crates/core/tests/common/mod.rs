#![allow(dead_code)]

pub mod dd;
pub mod fd_oracle;
pub mod knn_ref;

use coherence_lab::dataset::ParameterRanges;
use coherence_lab::engine::EngineParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` parameter draws from the default ranges.
pub fn draws(n: usize, seed: u64) -> Vec<EngineParams> {
    let ranges = ParameterRanges::default();
    let fixed = EngineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| ranges.draw(&fixed, &mut rng)).collect()
}

/// `n` draws with both coherences switched off.
pub fn classical_draws(n: usize, seed: u64) -> Vec<EngineParams> {
    draws(n, seed).into_iter().map(|p| p.classical()).collect()
}
