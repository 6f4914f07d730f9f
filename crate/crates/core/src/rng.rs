//! Reproducible random-number streams.
//!
//! Every realization draws from its own stream of a counter-based ChaCha
//! generator, derived as `(master_seed, realization_index)`. Streams are
//! statistically independent, so ensembles are reproducible regardless of
//! how realizations are scheduled across workers, and the "same seed"
//! pairing of a microscopic run with its coarse-grained partner is simply
//! a matter of reusing the realization index.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for one realization: stream `realization` of `master_seed`.
pub fn realization_rng(master_seed: u64, realization: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(realization);
    rng
}
