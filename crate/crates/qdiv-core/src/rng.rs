//! Seeded RNG streams.
//!
//! Every stochastic choice in a run draws from a ChaCha stream addressed by
//! (seed, purpose). Keeping purposes on separate streams means, e.g., that the
//! assigner's initialization does not perturb the predictor's, which is what
//! makes the exact trainer reductions (CVaR(1) = ERM, and so on) hold
//! trajectory-for-trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    PredictorInit = 1,
    Shuffle = 2,
    AssignerInit = 3,
    Mixing = 4,
    IdPhaseInit = 5,
    IdPhaseShuffle = 6,
}

/// ChaCha stream for one purpose under one seed.
pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}
