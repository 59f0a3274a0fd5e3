//! Monte Carlo ensembles of nearest-neighbour walks among conductances.
//!
//! A walker at x steps to x±1 with probability c(x,x±1)/c̄(x). This module
//! runs ensembles of independent walkers started at the origin and reduces
//! them to distributional statistics:
//!
//! * the occupation histogram of Sₙ ([`simulate`]), comparable in total
//!   variation against the exact law carried by a kernel state
//!   ([`tv_distance_to_kernel`]);
//! * escape probabilities through ±K before returning to 0 — in closed form
//!   via the effective conductance ([`escape_probability_exact`]) and by
//!   simulation ([`escape_probability_mc`]);
//! * the Kolmogorov–Smirnov distance between the law of Sₙ/√n and a centred
//!   normal ([`ks_distance`]), evaluated at the lattice jump points.
//!
//! Everything is a pure function of `(environment, n_steps, n_walkers,
//! master_seed)`: walker w draws from its own counter-derived stream keyed by
//! `(master_seed, w)`, and histograms merge by integer addition, so the
//! result is independent of thread count and of whether the `parallel`
//! feature is compiled in at all.

use crate::environment::Environment;
use crate::heat_kernel::{occupation, KernelState};
use crate::numeric::normal_cdf;
use crate::rng::SplitMix64;
use serde::Serialize;

/// Escape trials are capped at `ESCAPE_STEP_CAP_PER_K2 · K²` steps. Null
/// recurrence makes every excursion finite almost surely, but its expected
/// length can be infinite, so an uncapped trial has no runtime guarantee.
/// A capped walker is counted as having returned to the origin, and the
/// fraction of capped trials is reported rather than hidden.
pub const ESCAPE_STEP_CAP_PER_K2: u64 = 1_000_000;

/// The empirical law of Sₙ over an ensemble of independent walkers.
///
/// `counts[i]` is the number of walkers that finished at site `−n + 2i`;
/// the support of Sₙ is exactly the sites of parity n in [−n, n], so the
/// histogram is dense over those n+1 slots. Counts always sum to
/// `n_walkers`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkEnsemble {
    env_id: String,
    n_steps: u64,
    n_walkers: u64,
    master_seed: u64,
    counts: Vec<u64>,
}

impl WalkEnsemble {
    /// Wraps a raw histogram; `counts.len()` must be `n_steps + 1` and the
    /// walker total is taken as the sum of the counts.
    pub fn from_counts(
        env_id: impl Into<String>,
        n_steps: u64,
        master_seed: u64,
        counts: Vec<u64>,
    ) -> WalkEnsemble {
        assert_eq!(counts.len() as u64, n_steps + 1, "one slot per reachable site");
        let n_walkers = counts.iter().sum();
        assert!(n_walkers >= 1, "ensemble must hold at least one walker");
        WalkEnsemble { env_id: env_id.into(), n_steps, n_walkers, master_seed, counts }
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }

    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    pub fn n_walkers(&self) -> u64 {
        self.n_walkers
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Number of walkers that finished at x; zero off the reachable set.
    pub fn count_at(&self, x: i64) -> u64 {
        let n = self.n_steps as i64;
        if x < -n || x > n || (x + n) % 2 != 0 {
            return 0;
        }
        self.counts[((x + n) / 2) as usize]
    }

    /// Empirical probability of finishing at x.
    pub fn frequency(&self, x: i64) -> f64 {
        self.count_at(x) as f64 / self.n_walkers as f64
    }

    /// The occupied sites as (site, count) pairs, left to right.
    pub fn atoms(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        let n = self.n_steps as i64;
        self.counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(move |(i, &c)| (-n + 2 * i as i64, c))
    }
}

/// Transition table over the sites a walk of `n_steps` steps can occupy
/// *before* its final step, i.e. |x| ≤ n−1. `p_right[x + n]` is the
/// probability of stepping right from x. Built once, sequentially, so the
/// hot loop never touches the environment (or its interior locks).
fn right_probabilities(env: &Environment, reach: i64) -> Vec<f64> {
    (-reach..=reach).map(|x| env.transition(x).1).collect()
}

#[inline]
fn final_slot(table: &[f64], reach: i64, n_steps: u64, rng: &mut SplitMix64) -> usize {
    let mut x: i64 = 0;
    for _ in 0..n_steps {
        let pr = table[(x + reach) as usize];
        // Branchless update: a mispredicted 50/50 branch dominates the step
        // cost otherwise.
        x += ((rng.next_f64() < pr) as i64) * 2 - 1;
    }
    ((x + n_steps as i64) / 2) as usize
}

#[cfg(feature = "parallel")]
fn merge_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Runs `n_walkers` independent walks of `n_steps` steps from the origin.
///
/// Uses data parallelism when the `parallel` feature is enabled; see
/// [`simulate_opts`] to force the sequential path. Both produce the same
/// histogram bit for bit.
pub fn simulate(env: &Environment, n_steps: u64, n_walkers: u64, master_seed: u64) -> WalkEnsemble {
    simulate_opts(env, n_steps, n_walkers, master_seed, cfg!(feature = "parallel"))
}

/// [`simulate`] with explicit control over parallel dispatch.
pub fn simulate_opts(
    env: &Environment,
    n_steps: u64,
    n_walkers: u64,
    master_seed: u64,
    parallel: bool,
) -> WalkEnsemble {
    assert!(n_steps >= 1, "a walk has at least one step");
    assert!(n_walkers >= 1, "an ensemble has at least one walker");
    let reach = n_steps as i64 - 1;
    let table = right_probabilities(env, reach);
    let slots = n_steps as usize + 1;
    let walk = |w: u64| {
        let mut rng = SplitMix64::for_walker(master_seed, w);
        final_slot(&table, reach, n_steps, &mut rng)
    };

    let counts: Vec<u64>;
    #[cfg(feature = "parallel")]
    {
        if parallel {
            use rayon::prelude::*;
            counts = (0..n_walkers as usize)
                .into_par_iter()
                .with_min_len(4096)
                .fold(
                    || vec![0u64; slots],
                    |mut h, w| {
                        h[walk(w as u64)] += 1;
                        h
                    },
                )
                .reduce(|| vec![0u64; slots], merge_counts);
        } else {
            counts = sequential_counts(slots, n_walkers, &walk);
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = parallel;
        counts = sequential_counts(slots, n_walkers, &walk);
    }

    WalkEnsemble {
        env_id: env.spec().to_string(),
        n_steps,
        n_walkers,
        master_seed,
        counts,
    }
}

fn sequential_counts(slots: usize, n_walkers: u64, walk: &dyn Fn(u64) -> usize) -> Vec<u64> {
    let mut h = vec![0u64; slots];
    for w in 0..n_walkers {
        h[walk(w)] += 1;
    }
    h
}

/// ℙ₀[hit ±K before returning to 0], in closed form.
///
/// The walk leaves 0 through one of two series resistor chains, so the
/// probability is the effective conductance from 0 to {−K, K} divided by
/// c̄(0):
///
/// ```text
/// (1/c̄(0)) · ( 1/Σ_{x=−K}^{−1} 1/c(x,x+1)  +  1/Σ_{x=0}^{K−1} 1/c(x,x+1) )
/// ```
pub fn escape_probability_exact(env: &Environment, k: u64) -> f64 {
    assert!(k >= 1, "escape level must be at least 1");
    let k = k as i64;
    let mut left = 0.0;
    for x in -k..0 {
        left += 1.0 / env.conductance(x);
    }
    let mut right = 0.0;
    for x in 0..k {
        right += 1.0 / env.conductance(x);
    }
    (1.0 / env.cbar(0)) * (1.0 / left + 1.0 / right)
}

/// One escape measurement: the fraction of walkers that reached ±K before
/// returning to 0, its binomial standard error, and the fraction of trials
/// that hit the step cap (counted as returned).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EscapeSample {
    pub probability: f64,
    pub std_error: f64,
    pub capped_fraction: f64,
}

/// Estimates the escape probability by simulation, with the step-cap policy
/// of [`ESCAPE_STEP_CAP_PER_K2`]. The first step counts as leaving the
/// origin, so K = 1 escapes deterministically.
pub fn escape_probability_mc(
    env: &Environment,
    k: u64,
    n_walkers: u64,
    master_seed: u64,
) -> EscapeSample {
    let cap = ESCAPE_STEP_CAP_PER_K2.saturating_mul(k.saturating_mul(k));
    escape_probability_mc_opts(env, k, n_walkers, master_seed, cap, cfg!(feature = "parallel"))
}

/// [`escape_probability_mc`] with explicit step cap and dispatch, for tests
/// and diagnostics.
pub fn escape_probability_mc_opts(
    env: &Environment,
    k: u64,
    n_walkers: u64,
    master_seed: u64,
    step_cap: u64,
    parallel: bool,
) -> EscapeSample {
    assert!(k >= 1, "escape level must be at least 1");
    assert!(n_walkers >= 1, "an ensemble has at least one walker");
    let k = k as i64;
    let reach = k - 1;
    let table = right_probabilities(env, reach);
    // (escaped, capped) per trial; merged by integer addition.
    let trial = |w: u64| -> (u64, u64) {
        let mut rng = SplitMix64::for_walker(master_seed, w);
        let mut x: i64 = 0;
        let mut steps: u64 = 0;
        loop {
            if steps == step_cap {
                return (0, 1);
            }
            let pr = table[(x + reach) as usize];
            x += ((rng.next_f64() < pr) as i64) * 2 - 1;
            steps += 1;
            if x == k || x == -k {
                return (1, 0);
            }
            if x == 0 {
                return (0, 0);
            }
        }
    };

    let (escaped, capped): (u64, u64);
    #[cfg(feature = "parallel")]
    {
        if parallel {
            use rayon::prelude::*;
            let (e, c) = (0..n_walkers as usize)
                .into_par_iter()
                .with_min_len(4096)
                .map(|w| trial(w as u64))
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            escaped = e;
            capped = c;
        } else {
            let (e, c) = sequential_trials(n_walkers, &trial);
            escaped = e;
            capped = c;
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = parallel;
        let (e, c) = sequential_trials(n_walkers, &trial);
        escaped = e;
        capped = c;
    }

    let n = n_walkers as f64;
    let p = escaped as f64 / n;
    EscapeSample {
        probability: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        capped_fraction: capped as f64 / n,
    }
}

fn sequential_trials(n_walkers: u64, trial: &dyn Fn(u64) -> (u64, u64)) -> (u64, u64) {
    let mut acc = (0u64, 0u64);
    for w in 0..n_walkers {
        let t = trial(w);
        acc.0 += t.0;
        acc.1 += t.1;
    }
    acc
}

/// Kolmogorov–Smirnov distance between the empirical law of Sₙ/√n and the
/// centred normal with variance `sigma2`.
///
/// The empirical CDF is a step function jumping at the lattice points
/// x/√n, so the supremum over ℝ is attained one-sidedly at a jump: at each
/// atom both |F(z⁻) − Φ(z)| and |F(z) − Φ(z)| are examined. Even a perfect
/// lattice discretization of the target therefore keeps a distance of about
/// half its largest cell mass — the resolution floor of the statistic.
pub fn ks_distance(ens: &WalkEnsemble, sigma2: f64) -> f64 {
    assert!(sigma2 > 0.0, "target variance must be positive");
    let scale = (ens.n_steps as f64).sqrt();
    let total = ens.n_walkers as f64;
    let mut cum: u64 = 0;
    let mut d = 0.0f64;
    for (x, c) in ens.atoms() {
        let phi = normal_cdf(x as f64 / scale, sigma2);
        let below = cum as f64 / total;
        cum += c;
        let at = cum as f64 / total;
        d = d.max((phi - below).abs()).max((at - phi).abs());
    }
    d
}

/// Total-variation distance ½ Σₓ |frequency(x) − ℙ[Sₙ = x]| between an
/// ensemble and the exact law carried by a kernel state at the same time,
/// based at the ensemble's origin.
pub fn tv_distance_to_kernel(ens: &WalkEnsemble, state: &KernelState, env: &Environment) -> f64 {
    assert_eq!(state.time, ens.n_steps, "ensemble and kernel must share a time");
    assert_eq!(state.base, 0, "ensembles start at the origin");
    let mut acc = 0.0;
    for (x, _) in state.support() {
        acc += (occupation(state, env, x) - ens.frequency(x)).abs();
    }
    0.5 * acc
}
