//! Compensated arithmetic and deterministic reductions.
//!
//! Energy differences such as ‖hₙ‖² − ‖hₙ₊₁‖² shrink like ‖hₙ‖²/n, so a
//! sum accurate to f64 roundoff loses up to three digits after the
//! subtraction at n ≈ 10³. All inner products and Dirichlet sums therefore
//! accumulate in double-double precision (~106 significand bits): each term
//! is formed with exact product splitting and added with error-free
//! transformations. The result is rounded back to f64 only at the end.
//!
//! Reductions must also be bit-identical between the sequential and the
//! parallel code paths and independent of the thread count. [`reduce_dd`]
//! fixes a chunk size, sums each chunk left to right, and folds the chunk
//! sums in index order; only the chunk-level work is handed to rayon.

/// Unevaluated sum of two f64, |lo| ≤ ½ulp(hi).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Veltkamp splitting constant, 2²⁷ + 1.
const SPLIT: f64 = 134_217_729.0;

/// Dekker's exact product: a·b = p + e. Plain multiplies and adds so it
/// never lowers to a library fma call; the fused form is kept only as a
/// fallback for operands so large that splitting overflows.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let t = SPLIT * a;
    let ah = t - (t - a);
    let al = a - ah;
    let t = SPLIT * b;
    let bh = t - (t - b);
    let bl = b - bh;
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    if e.is_finite() {
        (p, e)
    } else {
        (p, f64::mul_add(a, b, -p))
    }
}

// Inherent add/sub/mul/div instead of the operator traits: the names keep
// call sites explicit about which operand widths mix (Dd·Dd vs Dd·f64),
// where operator sugar would silently promote.
#[allow(clippy::should_implement_trait)]
impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two f64.
    #[inline]
    pub fn prod(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    /// Exact sum of two f64.
    #[inline]
    pub fn sum2(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_sum(a, b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let (hi, lo) = quick_two_sum(s, e + self.lo + other.lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd { hi: -other.hi, lo: -other.lo })
    }

    /// self · x, with the O(lo·x) cross term retained.
    #[inline]
    pub fn mul_f64(self, x: f64) -> Dd {
        let (p, e) = two_prod(self.hi, x);
        let (hi, lo) = quick_two_sum(p, e + self.lo * x);
        Dd { hi, lo }
    }

    /// a · b · c where a·b is split exactly first.
    #[inline]
    pub fn triple_prod(a: f64, b: f64, c: f64) -> Dd {
        Dd::prod(a, b).mul_f64(c)
    }

    /// Full double-double product.
    #[inline]
    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p, e + self.hi * o.lo + self.lo * o.hi);
        Dd { hi, lo }
    }

    /// self², keeping the 2·hi·lo cross term.
    #[inline]
    pub fn sqr(self) -> Dd {
        let (p, e) = two_prod(self.hi, self.hi);
        let (hi, lo) = quick_two_sum(p, e + 2.0 * self.hi * self.lo + self.lo * self.lo);
        Dd { hi, lo }
    }

    /// self / x with one Newton correction (error ~2⁻¹⁰⁴ relative).
    #[inline]
    pub fn div_f64(self, x: f64) -> Dd {
        let q0 = self.hi / x;
        let r = self.sub(Dd::prod(q0, x));
        let (hi, lo) = quick_two_sum(q0, (r.hi + r.lo) / x);
        Dd { hi, lo }
    }

    /// self / o, both double-double.
    #[inline]
    pub fn div(self, o: Dd) -> Dd {
        let q0 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q0));
        let (hi, lo) = quick_two_sum(q0, (r.hi + r.lo) / o.hi);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Chunk length for deterministic reductions. Fixed so that results do not
/// depend on the thread count or on whether rayon is compiled in.
pub const REDUCE_CHUNK: usize = 2048;

#[inline]
fn reduce_chunk_dd<F: Fn(usize) -> Dd>(lo: usize, hi: usize, term: &F) -> Dd {
    let mut acc = Dd::ZERO;
    for i in lo..hi {
        acc = acc.add(term(i));
    }
    acc
}

/// Deterministic double-double sum of `term(0..n)`.
///
/// `parallel` requests chunk-level rayon dispatch; it changes scheduling
/// only, never the value.
pub fn reduce_dd<F>(n: usize, parallel: bool, term: F) -> Dd
where
    F: Fn(usize) -> Dd + Sync,
{
    if n == 0 {
        return Dd::ZERO;
    }
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let sums: Vec<Dd>;
    #[cfg(feature = "parallel")]
    {
        if parallel && chunks > 1 {
            use rayon::prelude::*;
            sums = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let lo = c * REDUCE_CHUNK;
                    reduce_chunk_dd(lo, usize::min(lo + REDUCE_CHUNK, n), &term)
                })
                .collect();
        } else {
            sums = (0..chunks)
                .map(|c| {
                    let lo = c * REDUCE_CHUNK;
                    reduce_chunk_dd(lo, usize::min(lo + REDUCE_CHUNK, n), &term)
                })
                .collect();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = parallel;
        sums = (0..chunks)
            .map(|c| {
                let lo = c * REDUCE_CHUNK;
                reduce_chunk_dd(lo, usize::min(lo + REDUCE_CHUNK, n), &term)
            })
            .collect();
    }
    let mut acc = Dd::ZERO;
    for s in sums {
        acc = acc.add(s);
    }
    acc
}

/// Φ(z / σ): cumulative normal with variance `sigma2` at `z`.
pub fn normal_cdf(z: f64, sigma2: f64) -> f64 {
    0.5 * libm::erfc(-z / (2.0 * sigma2).sqrt())
}

/// nⁿ / (n+1)ⁿ⁺¹ with the convention 0⁰ = 1, computed in log space so it
/// stays finite for large n.
pub fn nash_ratio(n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let x = n as f64;
    (x * x.ln() - (x + 1.0) * (x + 1.0).ln()).exp()
}

/// ln Γ(x), exposed for closed-form binomial references in tests.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}
