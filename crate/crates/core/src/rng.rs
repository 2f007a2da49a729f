//! Seeded random streams.
//!
//! Every simulation owns one or more ChaCha streams keyed by the session
//! seed. Distinct logical actors (Alice's source, the channel, Bob's
//! receiver, an eavesdropper) draw from distinct stream ids of the same
//! key, so adding an actor never perturbs the draws of another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for Alice's bit and photon-number draws.
pub const STREAM_SOURCE: u64 = 0;
/// Stream id for channel loss draws.
pub const STREAM_CHANNEL: u64 = 1;
/// Stream id for Bob's receiver (analyzer routing, detection, noise).
pub const STREAM_RECEIVER: u64 = 2;
/// Stream id for an eavesdropper's apparatus.
pub const STREAM_EVE: u64 = 3;

/// One ChaCha stream of the keyed generator identified by `seed`.
///
/// Streams with different `stream` ids are statistically independent.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
