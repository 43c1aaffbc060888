//! Reproducible random streams for noise injection.
//!
//! Every scan draws from ChaCha20 keyed by the master seed and addressed by
//! the scan index as the stream number, so scan `k` sees the same numbers no
//! matter which thread synthesizes it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn scan_rng(master_seed: u64, scan_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(scan_index);
    rng
}
