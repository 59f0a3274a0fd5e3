//! Counter-based pseudo-randomness shared by environments and walkers.
//!
//! Everything downstream of a seed must be a pure function of that seed, so
//! random quantities are drawn from the SplitMix64 output function rather
//! than from a mutable generator wherever random access is needed:
//!
//! * `counter_word(seed, i)` is the `i`-th word of the canonical SplitMix64
//!   stream seeded at `seed`, i.e. `finalize(seed + (i+1)·GAMMA)`.
//! * An edge `(x, x+1)` of Z is addressed by its zig-zag code
//!   `code(x) = 2x` for `x ≥ 0` and `-2x - 1` for `x < 0`, so conductances
//!   can be queried in any order, from any thread, with identical results.
//! * `uniform_open(word)` maps a word to `(k + 0.5) · 2⁻⁵²` with
//!   `k = word >> 12`, which lies in `[2⁻⁵³, 1 - 2⁻⁵³]` exactly (both ends
//!   are representable), so logarithms of it are always finite.
//!
//! Sequential consumers (walkers) use [`SplitMix64`] directly, one stream per
//! walker, keyed by hashing the master seed with the walker id.

/// Weyl increment of the SplitMix64 sequence.
pub const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function (Stafford's Mix13 finalizer).
#[inline]
pub fn finalize(state: u64) -> u64 {
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The `i`-th output word of the SplitMix64 stream seeded at `seed`.
#[inline]
pub fn counter_word(seed: u64, i: u64) -> u64 {
    finalize(seed.wrapping_add(i.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Derives an independent stream seed from `seed` and a fixed salt.
#[inline]
pub fn salted_seed(seed: u64, salt: u64) -> u64 {
    finalize(seed ^ salt)
}

/// Zig-zag code of the edge `(x, x+1)`: non-negative `x` maps to `2x`,
/// negative `x` to `-2x - 1`.
#[inline]
pub fn edge_code(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}

/// Uniform in the open interval `(0, 1)` from the top 52 bits of a word.
/// The midpoint offset keeps both extremes representable: the value lies
/// in `[2⁻⁵³, 1 - 2⁻⁵³]`.
#[inline]
pub fn uniform_open(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
}

/// Uniform on `(0, 1)` keyed by `(seed, edge x)`.
#[inline]
pub fn edge_uniform(seed: u64, x: i64) -> f64 {
    uniform_open(counter_word(seed, edge_code(x)))
}

/// Sequential SplitMix64 generator, used one instance per walker.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Stream for walker `id` under `master_seed`: the walker's initial
    /// state is the `id`-th word of the master stream.
    pub fn for_walker(master_seed: u64, id: u64) -> Self {
        SplitMix64::new(counter_word(master_seed, id))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        finalize(self.state)
    }

    /// Uniform in `[0, 1)` (closed at zero: suitable for threshold tests).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}
