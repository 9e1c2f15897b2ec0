//! Seeded random streams.
//!
//! Every random draw in a run comes from one ChaCha8 keystream keyed by the
//! run seed. Independent consumers read disjoint stream ids so that, for
//! example, adding a policy coin flip never perturbs the generated workload.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const STREAM_SCENARIO: u64 = 0;
pub const STREAM_WORKLOAD: u64 = 1;
pub const STREAM_POLICY: u64 = 2;

pub fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
