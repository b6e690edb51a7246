//! Expansion of one master seed into independent per-component streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WIRETAP_CODE_STREAM: u64 = 1;
pub const COMPONENT_ERRORS_STREAM: u64 = 2;
pub const BOOTSTRAP_STREAM: u64 = 3;
/// Keyed channel code for a `w`-bit key uses stream `KEYED_CODE_BASE + w`.
pub const KEYED_CODE_BASE: u64 = 0x100;
/// Monte-Carlo trial `i` uses stream `TRIAL_BASE + i`.
pub const TRIAL_BASE: u64 = 1 << 32;

/// Random stream `stream` of the ChaCha generator keyed by `master`.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

pub fn derive_seed(master: u64, stream: u64) -> u64 {
    stream_rng(master, stream).next_u64()
}
