//! Finite-scale verification of the walk's limit behaviour.
//!
//! For a stationary conductance environment with μ-means C̄ = ∫c̄ dμ and
//! I = ∫(1/c) dμ, the laws under test are:
//!
//! * **local limit**: √(2n)·ℙ₀[S₂ₙ = x₀] → c̄(x₀)/√π · √(I/C̄), with the
//!   degenerate branches → 0 (C̄ = ∞) and → ∞ (I = ∞);
//! * **CLT**: Sₙ/√n ⇒ N(0, σ²) with σ² = 2/(C̄·I), collapsing to the point
//!   mass at 0 when a mean diverges;
//! * **energy scaling**: √n·‖hₙ‖² is eventually bounded below by
//!   (1/13)·√(I/C̄) and compared against the (1/3)·√(I/C̄) band from above;
//! * **uniform bound**: √(2n)·max h₂ₙ over the diffusive ball stays
//!   bounded, and vanishes when C̄ = ∞;
//! * **regularity**: max_{|x−x₀| ≤ δ√(2n)} |h₂ₙ(x) − h₂ₙ(x₀)| ≤ Ĉ·√δ/√n
//!   with Ĉ stable in n.
//!
//! Each verifier turns kernel or ensemble quantities into
//! [`VerificationRecord`]s (observed vs target per scale n);
//! [`verify_environment`] assembles the full battery for one environment —
//! identity checks, monotonicity, decay, escape, and the limit laws gated
//! by the integrability class — into a [`VerifyReport`] whose asserted
//! outcomes decide pass/fail.
//!
//! Asymptotic statements carry no rate, so every finite-n assertion here
//! uses an explicit tolerance or the dyadic trend test of [`trend_holds`];
//! the tolerances live in [`VerifyConfig`] and are echoed in each outcome.

use std::f64::consts::PI;

use crate::environment::{integrability_class, EnvKind, Environment, Observable};
use crate::heat_kernel::{
    check_complete_monotonicity, check_nash, delta_direct_table, finite_differences,
    max_duality_gap, max_green_gap, occupation, run_with, KernelState, RunOptions,
};
use crate::numeric::{ln_gamma, normal_cdf};
use crate::rng::salted_seed;
use crate::walker::{
    escape_probability_exact, escape_probability_mc, ks_distance, simulate, tv_distance_to_kernel,
};
use serde::Serialize;

/// μ-means of the environment, the diffusivity they induce, and the
/// local-limit constant at one site.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LimitTargets {
    /// ∫ c̄ dμ; +∞ when not integrable.
    pub mean_cbar: f64,
    /// ∫ (1/c) dμ; +∞ when not integrable.
    pub mean_inv_c: f64,
    /// σ² = 2/(mean_cbar·mean_inv_c); 0 in the degenerate classes.
    pub sigma2: f64,
    /// c̄(x₀)/√π · √(mean_inv_c/mean_cbar); 0 or +∞ in the degenerate
    /// classes, depending on which mean diverges.
    pub llt_constant: f64,
    pub degenerate: bool,
    pub x0: i64,
}

/// One μ-mean: closed form where the kind admits one (constant, periodic,
/// markov via its stationary law), a length-`l` window average of the
/// realized environment for the i.i.d. kinds, +∞ when non-integrable.
fn observable_mean(env: &Environment, obs: Observable, integrable: bool, l: u64) -> f64 {
    if !integrable {
        return f64::INFINITY;
    }
    match &env.spec().kind {
        EnvKind::Constant { kappa } => match obs {
            Observable::Cbar => 2.0 * kappa,
            Observable::InvC => 1.0 / kappa,
        },
        EnvKind::Periodic { cycle, .. } => {
            let len = cycle.len() as f64;
            match obs {
                Observable::Cbar => 2.0 * cycle.iter().sum::<f64>() / len,
                Observable::InvC => cycle.iter().map(|c| 1.0 / c).sum::<f64>() / len,
            }
        }
        EnvKind::Markov { states, .. } => {
            let pi = env.stationary().expect("markov environments carry a stationary law");
            match obs {
                Observable::Cbar => 2.0 * states.iter().zip(pi).map(|(s, p)| s * p).sum::<f64>(),
                Observable::InvC => states.iter().zip(pi).map(|(s, p)| p / s).sum::<f64>(),
            }
        }
        _ => env.birkhoff_mean(obs, l),
    }
}

/// Computes [`LimitTargets`] at `x0`, using window length `l` where a mean
/// has to be estimated from the realization.
pub fn targets(env: &Environment, x0: i64, l: u64) -> LimitTargets {
    assert!(l >= 1, "window length must be positive");
    let class = integrability_class(env.spec());
    let mean_cbar = observable_mean(env, Observable::Cbar, class.cbar_integrable, l);
    let mean_inv_c = observable_mean(env, Observable::InvC, class.inv_c_integrable, l);
    let degenerate = !class.non_degenerate();
    let sigma2 = if degenerate { 0.0 } else { 2.0 / (mean_cbar * mean_inv_c) };
    let llt_constant = if mean_cbar.is_infinite() {
        0.0
    } else if mean_inv_c.is_infinite() {
        f64::INFINITY
    } else {
        env.cbar(x0) / PI.sqrt() * (mean_inv_c / mean_cbar).sqrt()
    };
    LimitTargets { mean_cbar, mean_inv_c, sigma2, llt_constant, degenerate, x0 }
}

/// One measured point of a limit law: what was observed at scale `n`, the
/// finite target when the law names one (NaN for boundedness or divergence
/// claims), and their gap.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationRecord {
    pub check: String,
    pub n: u64,
    pub observed: f64,
    /// NaN when the law asserts a trend or bound without a limit value.
    pub target: f64,
    /// observed − target when the target is finite, NaN otherwise.
    pub gap: f64,
    pub x0: i64,
    /// Ball-radius fraction δ for regularity records, tail threshold ε for
    /// concentration records, NaN elsewhere.
    pub delta: f64,
    /// Window length used for estimated targets; 0 when closed-form.
    pub window: u64,
}

impl VerificationRecord {
    fn new(check: &str, n: u64, observed: f64, target: f64, x0: i64) -> VerificationRecord {
        let gap = if target.is_finite() { observed - target } else { f64::NAN };
        VerificationRecord {
            check: check.to_owned(),
            n,
            observed,
            target,
            gap,
            x0,
            delta: f64::NAN,
            window: 0,
        }
    }

    fn with_delta(mut self, delta: f64) -> VerificationRecord {
        self.delta = delta;
        self
    }

    fn with_window(mut self, window: u64) -> VerificationRecord {
        self.window = window;
        self
    }
}

/// ℙ[S₂ₙ = x] for the homogeneous ±1 walk: C(2n, n+x/2)·4⁻ⁿ via lgamma.
/// The reference the constant-environment checks are calibrated against.
pub fn binomial_return(n: u64, x: i64) -> f64 {
    if x % 2 != 0 || x.unsigned_abs() > 2 * n {
        return 0.0;
    }
    let nf = n as f64;
    let k = nf + x as f64 / 2.0;
    (ln_gamma(2.0 * nf + 1.0) - ln_gamma(k + 1.0) - ln_gamma(2.0 * nf - k + 1.0)
        - nf * 4.0f64.ln())
    .exp()
}

fn assert_schedule(schedule: &[u64]) {
    assert!(!schedule.is_empty(), "schedule must not be empty");
    assert!(
        schedule.windows(2).all(|w| w[0] < w[1]) && schedule[0] >= 1,
        "schedule must be strictly increasing and start at n ≥ 1"
    );
}

/// n = 2^j for j in jmin..=jmax, the default verification schedule.
pub fn dyadic_schedule(jmin: u32, jmax: u32) -> Vec<u64> {
    assert!(jmin <= jmax && jmax < 63);
    (jmin..=jmax).map(|j| 1u64 << j).collect()
}

/// Runs the kernel from the origin and snapshots it at time 2n for every
/// scheduled n.
fn snapshots_at_doubled_times(env: &Environment, schedule: &[u64]) -> Vec<KernelState> {
    let times: Vec<u64> = schedule.iter().map(|&n| 2 * n).collect();
    let run = run_with(
        env,
        0,
        *times.last().expect("schedule checked non-empty"),
        &RunOptions { snapshot_times: times, compute_energies: false, ..RunOptions::default() },
    )
    .expect("scheduled horizon exceeds the support cap");
    run.snapshots
}

/// √(2n)·ℙ₀[S₂ₙ = x₀] along the schedule, against the local-limit constant
/// (NaN target when the constant is infinite). `x0` must be even so the
/// site is alive at even times.
pub fn verify_llt(env: &Environment, x0: i64, schedule: &[u64], l: u64) -> Vec<VerificationRecord> {
    assert!(x0 % 2 == 0, "endpoint must have even parity");
    assert_schedule(schedule);
    let t = targets(env, x0, l);
    let target = if t.llt_constant.is_finite() { t.llt_constant } else { f64::NAN };
    snapshots_at_doubled_times(env, schedule)
        .iter()
        .zip(schedule)
        .map(|(snap, &n)| {
            let observed = (2.0 * n as f64).sqrt() * occupation(snap, env, x0);
            VerificationRecord::new("local_limit", n, observed, target, x0).with_window(l)
        })
        .collect()
}

fn isqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    while r * r > v {
        r -= 1;
    }
    r
}

/// max h₂ₙ(x) over the even sites of the closed diffusive ball x² ≤ 2n.
fn ball_max(state: &KernelState) -> f64 {
    let r = isqrt(state.time) as i64;
    let r = r - (r & 1);
    let mut best = 0.0f64;
    let mut x = -r;
    while x <= r {
        best = best.max(state.value_at(x));
        x += 2;
    }
    best
}

/// √(2n)·max h₂ₙ over the diffusive ball along the schedule. A boundedness
/// claim: every target is NaN and callers judge the recorded series
/// (plateau when both means are finite, decay toward 0 when c̄ is
/// non-integrable). Requires an integrable 1/c.
pub fn verify_sup_bound(env: &Environment, schedule: &[u64]) -> Vec<VerificationRecord> {
    assert!(
        integrability_class(env.spec()).inv_c_integrable,
        "the uniform bound needs an integrable 1/c"
    );
    assert_schedule(schedule);
    snapshots_at_doubled_times(env, schedule)
        .iter()
        .zip(schedule)
        .map(|(snap, &n)| {
            let observed = (2.0 * n as f64).sqrt() * ball_max(snap);
            VerificationRecord::new("sup_bound", n, observed, f64::NAN, 0)
        })
        .collect()
}

/// √n·‖hₙ‖² along the schedule. On non-degenerate environments the series
/// is recorded twice, against the asserted lower band (1/13)·√(I/C̄) and
/// the report-only upper band (1/3)·√(I/C̄); on degenerate ones a single
/// `energy_scaling` series with no target carries the trend.
pub fn verify_energy_bands(env: &Environment, schedule: &[u64], l: u64) -> Vec<VerificationRecord> {
    assert_schedule(schedule);
    let t = targets(env, 0, l);
    let n_max = *schedule.last().expect("schedule checked non-empty");
    let run = run_with(env, 0, n_max, &RunOptions::default())
        .expect("scheduled horizon exceeds the support cap");
    let mut records = Vec::new();
    for &n in schedule {
        let observed = (n as f64).sqrt() * run.energies.get(n as usize);
        if t.degenerate {
            records.push(
                VerificationRecord::new("energy_scaling", n, observed, f64::NAN, 0).with_window(l),
            );
        } else {
            let root = (t.mean_inv_c / t.mean_cbar).sqrt();
            records.push(
                VerificationRecord::new("energy_lower", n, observed, root / 13.0, 0)
                    .with_window(l),
            );
            records.push(
                VerificationRecord::new("energy_upper", n, observed, root / 3.0, 0).with_window(l),
            );
        }
    }
    records
}

/// Largest even offset d ≥ 0 with d ≤ δ·√(2n).
fn ball_reach(n: u64, delta: f64) -> i64 {
    let r = (delta * (2.0 * n as f64).sqrt()).floor() as i64;
    (r - (r & 1)).max(0)
}

/// max |h₂ₙ(x) − h₂ₙ(x₀)| over even x with |x − x₀| ≤ δ·√(2n), for the
/// kernel started at the origin.
pub fn regularity_modulus(env: &Environment, x0: i64, n: u64, delta: f64) -> f64 {
    assert!(x0 % 2 == 0, "observation centre must have even parity");
    assert!(delta > 0.0, "ball fraction must be positive");
    let snaps = snapshots_at_doubled_times(env, &[n]);
    modulus_on(&snaps[0], x0, delta)
}

fn modulus_on(state: &KernelState, x0: i64, delta: f64) -> f64 {
    let reach = ball_reach(state.time / 2, delta);
    let centre = state.value_at(x0);
    let mut worst = 0.0f64;
    let mut x = x0 - reach;
    while x <= x0 + reach {
        worst = worst.max((state.value_at(x) - centre).abs());
        x += 2;
    }
    worst
}

/// Regularity series for each δ along one shared kernel run. Non-degenerate
/// records carry observed = modulus·√n/√δ (the empirical constant Ĉ must
/// stay stable); when c̄ is non-integrable the records instead carry
/// observed = √(2n)·modulus, which must vanish. Requires integrable 1/c.
pub fn verify_regularity(
    env: &Environment,
    x0: i64,
    schedule: &[u64],
    deltas: &[f64],
) -> Vec<VerificationRecord> {
    assert!(
        integrability_class(env.spec()).inv_c_integrable,
        "the regularity bound needs an integrable 1/c"
    );
    assert!(x0 % 2 == 0, "observation centre must have even parity");
    assert_schedule(schedule);
    let degenerate_cbar = !integrability_class(env.spec()).cbar_integrable;
    let snaps = snapshots_at_doubled_times(env, schedule);
    let mut records = Vec::new();
    for &delta in deltas {
        assert!(delta > 0.0, "ball fraction must be positive");
        for (snap, &n) in snaps.iter().zip(schedule) {
            let modulus = modulus_on(snap, x0, delta);
            let (check, observed) = if degenerate_cbar {
                ("regularity_trend", (2.0 * n as f64).sqrt() * modulus)
            } else {
                ("regularity", modulus * (n as f64).sqrt() / delta.sqrt())
            };
            records
                .push(VerificationRecord::new(check, n, observed, f64::NAN, x0).with_delta(delta));
        }
    }
    records
}

/// How a distributional check obtains the law of Sₙ.
#[derive(Clone, Copy, Debug)]
pub enum CltMode {
    /// Exact law from a kernel run.
    ExactKernel,
    /// Empirical law from an ensemble.
    MonteCarlo { walkers: u64, master_seed: u64 },
}

/// Kolmogorov–Smirnov distance between the exact law of Sₙ/√n carried by a
/// kernel state and the centred normal with variance `sigma2`, evaluated at
/// the lattice jump points.
pub fn kernel_ks_distance(state: &KernelState, env: &Environment, sigma2: f64) -> f64 {
    assert!(sigma2 > 0.0, "target variance must be positive");
    let scale = (state.time as f64).sqrt();
    let mut cum = 0.0f64;
    let mut d = 0.0f64;
    for (x, _) in state.support() {
        let phi = normal_cdf(x as f64 / scale, sigma2);
        d = d.max((phi - cum).abs());
        cum += occupation(state, env, x);
        d = d.max((cum - phi).abs());
    }
    d
}

/// Mass of the law of Sₙ at |x| > eps·√n, from a kernel state.
fn kernel_tail_mass(state: &KernelState, env: &Environment, eps: f64) -> f64 {
    let cut = eps * (state.time as f64).sqrt();
    let mut tail = 0.0;
    for (x, _) in state.support() {
        if (x as f64).abs() > cut {
            tail += occupation(state, env, x);
        }
    }
    tail
}

/// Thresholds used by the degenerate concentration report.
pub const CONCENTRATION_EPS: [f64; 3] = [0.1, 0.5, 1.0];

/// Distributional check at one scale n. Non-degenerate environments yield a
/// single `clt_ks` record (KS distance to N(0, σ²), no finite target);
/// degenerate ones yield one `concentration` record per ε in
/// [`CONCENTRATION_EPS`], observed = ℙ[|Sₙ/√n| > ε], target 0.
pub fn clt_check(env: &Environment, n: u64, mode: CltMode, l: u64) -> Vec<VerificationRecord> {
    assert!(n >= 1, "scale must be positive");
    let t = targets(env, 0, l);
    match mode {
        CltMode::ExactKernel => {
            let run = run_with(
                env,
                0,
                n,
                &RunOptions {
                    snapshot_times: vec![n],
                    compute_energies: false,
                    ..RunOptions::default()
                },
            )
            .expect("scale exceeds the support cap");
            let state = &run.snapshots[0];
            if t.degenerate {
                CONCENTRATION_EPS
                    .iter()
                    .map(|&eps| {
                        let observed = kernel_tail_mass(state, env, eps);
                        VerificationRecord::new("concentration", n, observed, 0.0, 0)
                            .with_delta(eps)
                    })
                    .collect()
            } else {
                let observed = kernel_ks_distance(state, env, t.sigma2);
                vec![VerificationRecord::new("clt_ks", n, observed, f64::NAN, 0).with_window(l)]
            }
        }
        CltMode::MonteCarlo { walkers, master_seed } => {
            let ens = simulate(env, n, walkers, master_seed);
            if t.degenerate {
                CONCENTRATION_EPS
                    .iter()
                    .map(|&eps| {
                        let cut = eps * (n as f64).sqrt();
                        let observed: f64 = ens
                            .atoms()
                            .filter(|&(x, _)| (x as f64).abs() > cut)
                            .map(|(_, c)| c as f64 / ens.n_walkers() as f64)
                            .sum();
                        VerificationRecord::new("concentration", n, observed, 0.0, 0)
                            .with_delta(eps)
                    })
                    .collect()
            } else {
                let observed = ks_distance(&ens, t.sigma2);
                vec![VerificationRecord::new("clt_ks_mc", n, observed, f64::NAN, 0).with_window(l)]
            }
        }
    }
}

/// Direction asserted by a trend test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
}

/// Dyadic trend test: the last four points are strictly monotone in the
/// asserted direction and the series moves end-to-end by at least a factor
/// of 2 (divergence) or down to at most 1/2 (vanishing).
pub fn trend_holds(series: &[f64], trend: Trend) -> bool {
    if series.len() < 4 {
        return false;
    }
    let tail = &series[series.len() - 4..];
    let monotone = tail.windows(2).all(|w| match trend {
        Trend::Increasing => w[1] > w[0],
        Trend::Decreasing => w[1] < w[0],
    });
    let (first, last) = (series[0], *series.last().expect("nonempty"));
    let moved = match trend {
        Trend::Increasing => last >= 2.0 * first,
        Trend::Decreasing => last <= 0.5 * first,
    };
    monotone && moved
}

/// Coarse movement test: a vanishing series must end at or below half its
/// maximum, a diverging one at or above twice its minimum. Quenched series
/// in degenerate media are not monotone at any fixed scale — records in the
/// conductance field enter the diffusive window at realization-dependent
/// times and bend the series back for a few dyadic points — so this is the
/// realization-robust core of [`trend_holds`]: it asks that the series has
/// moved decisively toward its limit without demanding that the final
/// rebound has already passed.
pub fn movement_holds(series: &[f64], trend: Trend) -> bool {
    let Some(&last) = series.last() else {
        return false;
    };
    match trend {
        Trend::Increasing => {
            let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
            last >= 2.0 * min
        }
        Trend::Decreasing => {
            let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            last <= 0.5 * max
        }
    }
}

/// Largest |table − direct| over the triangular region n ≤ N−k, k ≤ K,
/// relative to Δ₀⁽⁰⁾ = ‖h₀‖²: the finite-difference route and the operator
/// route to Δₙ⁽ᵏ⁾ must land on the same numbers.
pub fn max_delta_cross_gap(env: &Environment, x0: i64, n_max: u64, k_max: usize) -> f64 {
    let run = run_with(env, x0, n_max + k_max as u64, &RunOptions::default())
        .expect("depth exceeds the support cap");
    let table = finite_differences(&run.energies, k_max);
    let direct = delta_direct_table(env, x0, n_max, k_max);
    let scale = run.energies.get(0);
    let mut worst = 0.0f64;
    for (k, row) in direct.iter().enumerate() {
        for (n, &d) in row.iter().enumerate() {
            worst = worst.max((table.delta(n, k) - d).abs());
        }
    }
    worst / scale
}

/// Everything one full verification sweep needs to know. Defaults match
/// the documented acceptance scales; tests shrink them for speed.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    /// Observation site for local-limit and regularity checks (even).
    pub x0: i64,
    /// Scales n for the limit-law series; strictly increasing, ideally
    /// dyadic so the trend test applies.
    pub schedule: Vec<u64>,
    /// Largest n of the ‖hₙ‖² = h₂ₙ(x₀) identity sweep.
    pub duality_horizon: u64,
    /// Largest n of the energy-drop (Dirichlet form) identity sweep.
    pub green_horizon: u64,
    /// (N, K): difference-table extent for complete monotonicity.
    pub cm_depth: (u64, usize),
    /// Largest n of the one-step decay inequality sweep.
    pub nash_horizon: u64,
    /// Ensemble size for every Monte Carlo element.
    pub walkers: u64,
    /// Escape levels K.
    pub escape_levels: Vec<u64>,
    /// Ball-radius fractions δ for the regularity series.
    pub deltas: Vec<f64>,
    /// Window length for estimated μ-means.
    pub window: u64,
    /// Slack on the asserted lower energy band: observed ≥ (1−margin)·band.
    pub band_margin: f64,
    /// Scale for the distributional (KS / concentration) check.
    pub clt_n: u64,
    /// Steps for the ensemble-vs-kernel total-variation check.
    pub tv_steps: u64,
    /// Master seed for all Monte Carlo; per-use streams are salted from it.
    pub master_seed: u64,
    /// Local-limit relative tolerance at the largest scale, for
    /// deterministic media (constant, periodic) where the only error is the
    /// n → ∞ truncation.
    pub llt_tol_deterministic: f64,
    /// Same, for random media (i.i.d. and markov realizations), whose
    /// finite-n series carry quenched fluctuations of the realization on
    /// top of the truncation error; the quenched rate is unknown, so this
    /// stays generous.
    pub llt_tol_random: f64,
    /// KS tolerance for deterministic media.
    pub ks_tol_deterministic: f64,
    /// KS tolerance for random media. The lattice CDF of one realization
    /// carries c̄-weighted partial-sum fluctuations of order n^(−1/4)
    /// (≈ 0.14 observed for heavy-tailed marginals at n = 10⁴), which the
    /// limit removes only as n → ∞; this is a sanity ceiling, not a rate
    /// claim.
    pub ks_tol_random: f64,
    /// Ensemble-vs-kernel total-variation tolerance.
    pub tv_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            x0: 0,
            schedule: dyadic_schedule(6, 14),
            duality_horizon: 2000,
            green_horizon: 1000,
            cm_depth: (200, 12),
            nash_horizon: 500,
            walkers: 1_000_000,
            escape_levels: vec![1, 2, 5, 10],
            deltas: vec![0.25, 1.0],
            window: 1_000_000,
            band_margin: 0.10,
            clt_n: 10_000,
            tv_steps: 1000,
            master_seed: 1,
            llt_tol_deterministic: 0.02,
            llt_tol_random: 0.25,
            ks_tol_deterministic: 0.02,
            ks_tol_random: 0.3,
            tv_tol: 5e-3,
        }
    }
}

/// Verdict of one named check: `asserted` outcomes decide the exit status,
/// report-only ones merely document margins.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub passed: bool,
    pub asserted: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn asserted(check: &str, passed: bool, detail: String) -> CheckOutcome {
        CheckOutcome { check: check.to_owned(), passed, asserted: true, detail }
    }

    fn report_only(check: &str, detail: String) -> CheckOutcome {
        CheckOutcome { check: check.to_owned(), passed: true, asserted: false, detail }
    }

    /// A non-asserted outcome that still records a pass/fail observation,
    /// for properties that are informative but realization-dependent at
    /// reachable scales.
    fn report(check: &str, passed: bool, detail: String) -> CheckOutcome {
        CheckOutcome { check: check.to_owned(), passed, asserted: false, detail }
    }
}

/// Full verification result for one environment.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub env_id: String,
    pub records: Vec<VerificationRecord>,
    pub outcomes: Vec<CheckOutcome>,
}

impl VerifyReport {
    /// True when every asserted outcome passed.
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed || !o.asserted)
    }
}

/// True when the conductance field itself is deterministic (constant,
/// periodic), so finite-scale series deviate from their limits only by the
/// n → ∞ truncation. Random realizations — the i.i.d. kinds *and* markov,
/// whose means are closed-form but whose field is still one random draw —
/// additionally carry quenched fluctuations of that draw, and the asserted
/// distributional tolerances must leave room for them.
fn deterministic_medium(env: &Environment) -> bool {
    matches!(env.spec().kind, EnvKind::Constant { .. } | EnvKind::Periodic { .. })
}

const IDENTITY_TOL: f64 = 1e-12;
const CM_TOL: f64 = 1e-10;

/// Runs the whole battery on one environment: exact identities (duality,
/// energy drop), complete monotonicity with its cross-check, the decay
/// inequality, escape probabilities, and the limit laws gated by the
/// integrability class. Everything is deterministic given the environment
/// and the config.
pub fn verify_environment(env: &Environment, cfg: &VerifyConfig) -> VerifyReport {
    assert_schedule(&cfg.schedule);
    let class = integrability_class(env.spec());
    let t = targets(env, cfg.x0, cfg.window);
    let seed_base = salted_seed(cfg.master_seed, env.seed());
    let mut records: Vec<VerificationRecord> = Vec::new();
    let mut outcomes: Vec<CheckOutcome> = Vec::new();

    // ‖hₙ‖² = h₂ₙ(0): one run to 2·horizon with the base trace.
    {
        let run = run_with(
            env,
            0,
            2 * cfg.duality_horizon,
            &RunOptions { record_base_trace: true, ..RunOptions::default() },
        )
        .expect("duality horizon exceeds the support cap");
        let gap = max_duality_gap(&run);
        records.push(VerificationRecord::new("duality", cfg.duality_horizon, gap, 0.0, 0));
        outcomes.push(CheckOutcome::asserted(
            "duality",
            gap < IDENTITY_TOL,
            format!("max relative gap {gap:.3e} over n ≤ {} (tol {IDENTITY_TOL:.0e})", cfg.duality_horizon),
        ));
    }

    // ℰ(hₙ,hₙ) = ‖hₙ‖² − ‖P hₙ‖².
    {
        let gap = max_green_gap(env, 0, cfg.green_horizon);
        records.push(VerificationRecord::new("energy_drop", cfg.green_horizon, gap, 0.0, 0));
        outcomes.push(CheckOutcome::asserted(
            "energy_drop",
            gap < IDENTITY_TOL,
            format!("max relative gap {gap:.3e} over n ≤ {} (tol {IDENTITY_TOL:.0e})", cfg.green_horizon),
        ));
    }

    // Complete monotonicity of the difference table, plus the operator
    // cross-check of the same numbers.
    {
        let (n_cm, k_cm) = cfg.cm_depth;
        let run = run_with(env, 0, n_cm + k_cm as u64, &RunOptions::default())
            .expect("difference depth exceeds the support cap");
        let table = finite_differences(&run.energies, k_cm);
        let report = check_complete_monotonicity(&table, CM_TOL);
        records.push(VerificationRecord::new(
            "complete_monotonicity",
            n_cm,
            report.violations.len() as f64,
            0.0,
            0,
        ));
        outcomes.push(CheckOutcome::asserted(
            "complete_monotonicity",
            report.is_clean(),
            format!(
                "{} entries below −{CM_TOL:.0e}·Δ₀⁽⁰⁾ for N={n_cm}, K={k_cm}",
                report.violations.len()
            ),
        ));

        let cross = max_delta_cross_gap(env, 0, n_cm, k_cm);
        records.push(VerificationRecord::new("difference_cross_check", n_cm, cross, 0.0, 0));
        outcomes.push(CheckOutcome::asserted(
            "difference_cross_check",
            cross < CM_TOL,
            format!("max |table − direct|/Δ₀⁽⁰⁾ = {cross:.3e} (tol {CM_TOL:.0e})"),
        ));
    }

    // One-step decay inequality over n ≤ nash_horizon.
    {
        let run = run_with(env, 0, 2 * cfg.nash_horizon + 1, &RunOptions::default())
            .expect("decay horizon exceeds the support cap");
        let e0 = run.energies.get(0);
        let mut worst = f64::INFINITY;
        for n in 0..=cfg.nash_horizon {
            worst = worst.min(check_nash(&run.energies, n));
        }
        records.push(VerificationRecord::new("nash_decay", cfg.nash_horizon, worst, 0.0, 0));
        outcomes.push(CheckOutcome::asserted(
            "nash_decay",
            worst >= -IDENTITY_TOL * e0,
            format!("min slack {worst:.3e} over n ≤ {} (floor −{IDENTITY_TOL:.0e}·‖h₀‖²)", cfg.nash_horizon),
        ));
    }

    // Escape probabilities: exact always; Monte Carlo only when both means
    // are finite, since degenerate excursions have no useful step budget.
    {
        let mut mc_ok = true;
        let mut details = Vec::new();
        for &k in &cfg.escape_levels {
            let exact = escape_probability_exact(env, k);
            records.push(VerificationRecord::new("escape_exact", k, exact, f64::NAN, 0));
            if !t.degenerate {
                let sample =
                    escape_probability_mc(env, k, cfg.walkers, salted_seed(seed_base, 0xe5c0 + k));
                // When escape is certain the sample is exactly 1 with zero
                // standard error while the exact formula returns 1 only up
                // to roundoff (1/(1/c) ≠ c in floats), so the statistical
                // slack needs an absolute floor.
                let slack = 5.0 * sample.std_error + 1e-9;
                let ok = (sample.probability - exact).abs() <= slack
                    && sample.capped_fraction == 0.0;
                mc_ok &= ok;
                let mut rec =
                    VerificationRecord::new("escape_mc", k, sample.probability, exact, 0);
                rec.delta = sample.std_error;
                records.push(rec);
                details.push(format!(
                    "K={k}: exact {exact:.6}, mc {:.6} ± {:.1e}{}",
                    sample.probability,
                    sample.std_error,
                    if sample.capped_fraction > 0.0 {
                        format!(", capped {:.2e}", sample.capped_fraction)
                    } else {
                        String::new()
                    }
                ));
            }
        }
        if t.degenerate {
            outcomes.push(CheckOutcome::report_only(
                "escape_mc",
                "skipped: degenerate class has excursions with infinite expected length".to_owned(),
            ));
        } else {
            outcomes.push(CheckOutcome::asserted(
                "escape_mc",
                mc_ok,
                format!("within 5 s.e. of exact, no capped trials: {}", details.join("; ")),
            ));
        }
    }

    // Local limit series and its class-gated verdict.
    {
        let recs = verify_llt(env, cfg.x0, &cfg.schedule, cfg.window);
        let series: Vec<f64> = recs.iter().map(|r| r.observed).collect();
        let last = *series.last().expect("schedule checked non-empty");
        if t.llt_constant.is_finite() && t.llt_constant > 0.0 {
            let rel = (last - t.llt_constant).abs() / t.llt_constant;
            let tol = if deterministic_medium(env) {
                cfg.llt_tol_deterministic
            } else {
                cfg.llt_tol_random
            };
            outcomes.push(CheckOutcome::asserted(
                "local_limit",
                rel <= tol,
                format!(
                    "√(2n)·ℙ[S₂ₙ=x₀] = {last:.6} vs {:.6} at n={}, rel gap {rel:.2e} (tol {tol})",
                    t.llt_constant,
                    cfg.schedule.last().expect("nonempty")
                ),
            ));
        } else {
            // Degenerate class: the asserted check is decisive movement
            // toward the limit; the strict dyadic trend additionally wants
            // the final rebound of this realization already past, which is
            // a property of the seed, not of the law — reported alongside.
            let trend =
                if t.llt_constant == 0.0 { Trend::Decreasing } else { Trend::Increasing };
            let verb = if trend == Trend::Decreasing { "vanish" } else { "diverge" };
            outcomes.push(CheckOutcome::asserted(
                "local_limit",
                movement_holds(&series, trend),
                format!("series must {verb}: first {:.4e}, last {last:.4e}", series[0]),
            ));
            outcomes.push(CheckOutcome::report(
                "local_limit_trend",
                trend_holds(&series, trend),
                format!("strict dyadic trend ({trend:?}) for this realization"),
            ));
        }
        records.extend(recs);
    }

    // Uniform sup bound over the diffusive ball (needs integrable 1/c).
    if class.inv_c_integrable {
        let recs = verify_sup_bound(env, &cfg.schedule);
        let series: Vec<f64> = recs.iter().map(|r| r.observed).collect();
        let all_finite = series.iter().all(|v| v.is_finite());
        let running_max = series.iter().cloned().fold(f64::MIN, f64::max);
        if class.cbar_integrable {
            let tail = &series[series.len().saturating_sub(4)..];
            let (lo, hi) =
                tail.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
            let variation = (hi - lo) / hi;
            // Deterministic media settle onto the limiting constant fast
            // enough to pin the tail; random realizations still drift at
            // these scales, so only finiteness is asserted for them.
            let plateau = !deterministic_medium(env) || variation < 0.05;
            outcomes.push(CheckOutcome::asserted(
                "sup_bound",
                all_finite && plateau,
                format!(
                    "running max {running_max:.6}, last {:.6}, last-4 variation {:.2}%",
                    series.last().expect("nonempty"),
                    100.0 * variation
                ),
            ));
        } else {
            outcomes.push(CheckOutcome::report(
                "sup_bound",
                all_finite && movement_holds(&series, Trend::Decreasing),
                format!(
                    "series must stay bounded and vanish: max {running_max:.4e}, last {:.4e}, strict dyadic trend {}",
                    series.last().expect("nonempty"),
                    trend_holds(&series, Trend::Decreasing)
                ),
            ));
        }
        records.extend(recs);
    }

    // Energy scaling against the bands, or its degenerate trends.
    {
        let recs = verify_energy_bands(env, &cfg.schedule, cfg.window);
        if t.degenerate {
            let series: Vec<f64> = recs.iter().map(|r| r.observed).collect();
            let trend = if class.cbar_integrable {
                // 1/c non-integrable: √n·‖hₙ‖² grows beyond any bound.
                Trend::Increasing
            } else {
                Trend::Decreasing
            };
            outcomes.push(CheckOutcome::report(
                "energy_scaling",
                movement_holds(&series, trend),
                format!(
                    "{trend:?} for this realization: first {:.4e}, last {:.4e}, strict dyadic trend {}",
                    series[0],
                    series.last().expect("nonempty"),
                    trend_holds(&series, trend)
                ),
            ));
        } else {
            let lower = recs
                .iter()
                .rev()
                .find(|r| r.check == "energy_lower")
                .expect("non-degenerate bands emitted");
            let upper = recs
                .iter()
                .rev()
                .find(|r| r.check == "energy_upper")
                .expect("non-degenerate bands emitted");
            outcomes.push(CheckOutcome::asserted(
                "energy_lower",
                lower.observed >= (1.0 - cfg.band_margin) * lower.target,
                format!(
                    "√n·‖hₙ‖² = {:.6} vs lower band {:.6} at n={} (margin {})",
                    lower.observed, lower.target, lower.n, cfg.band_margin
                ),
            ));
            outcomes.push(CheckOutcome::report_only(
                "energy_upper",
                format!(
                    "observed/upper = {:.3} at n={}; the homogeneous-limit value 1/√(2π)·√(I/C̄) already exceeds the 1/3 band",
                    upper.observed / upper.target,
                    upper.n
                ),
            ));
        }
        records.extend(recs);
    }

    // Regularity of h₂ₙ over shrinking balls (needs integrable 1/c).
    if class.inv_c_integrable {
        let recs = verify_regularity(env, cfg.x0, &cfg.schedule, &cfg.deltas);
        for &delta in &cfg.deltas {
            let series: Vec<f64> = recs
                .iter()
                .filter(|r| r.delta == delta)
                .map(|r| r.observed)
                .collect();
            if class.cbar_integrable {
                // Running max of Ĉ must stabilize: < 50% variation across
                // the last 3 points.
                let mut running = Vec::with_capacity(series.len());
                let mut m = f64::MIN;
                for &v in &series {
                    m = m.max(v);
                    running.push(m);
                }
                let tail = &running[running.len().saturating_sub(3)..];
                let (lo, hi) =
                    tail.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
                let stable = hi.is_finite() && lo > 0.0 && (hi - lo) / lo < 0.5;
                outcomes.push(CheckOutcome::asserted(
                    &format!("regularity_delta_{delta}"),
                    stable,
                    format!("running max Ĉ = {hi:.6}, last-3 variation {:.2}%", 100.0 * (hi - lo) / lo),
                ));
            } else {
                outcomes.push(CheckOutcome::report(
                    &format!("regularity_delta_{delta}"),
                    movement_holds(&series, Trend::Decreasing),
                    format!(
                        "√(2n)·modulus must vanish: first {:.4e}, last {:.4e}, strict dyadic trend {}",
                        series[0],
                        series.last().expect("nonempty"),
                        trend_holds(&series, Trend::Decreasing)
                    ),
                ));
            }
        }
        records.extend(recs);
    }

    // Distribution of Sₙ/√n: KS distance or concentration trend.
    if t.degenerate {
        let times = &cfg.schedule;
        let run = run_with(
            env,
            0,
            *times.last().expect("nonempty"),
            &RunOptions {
                snapshot_times: times.clone(),
                compute_energies: false,
                ..RunOptions::default()
            },
        )
        .expect("schedule exceeds the support cap");
        let mut per_eps: Vec<Vec<f64>> = vec![Vec::new(); CONCENTRATION_EPS.len()];
        for (snap, &n) in run.snapshots.iter().zip(times) {
            for (i, &eps) in CONCENTRATION_EPS.iter().enumerate() {
                let observed = kernel_tail_mass(snap, env, eps);
                per_eps[i].push(observed);
                records.push(
                    VerificationRecord::new("concentration", n, observed, 0.0, 0).with_delta(eps),
                );
            }
        }
        // The mid threshold carries the asserted trend; the outer ones are
        // reported (ε=0.1 tails can saturate near 1 at reachable scales and
        // the claim fixes no rate).
        let series = &per_eps[1];
        outcomes.push(CheckOutcome::asserted(
            "concentration",
            movement_holds(series, Trend::Decreasing),
            format!(
                "ℙ[|Sₙ/√n| > {}] must vanish: first {:.4}, last {:.4}, strict dyadic trend {}",
                CONCENTRATION_EPS[1],
                series[0],
                series.last().expect("nonempty"),
                trend_holds(series, Trend::Decreasing)
            ),
        ));
    } else {
        let recs = clt_check(env, cfg.clt_n, CltMode::ExactKernel, cfg.window);
        let ks = recs[0].observed;
        let tol = if deterministic_medium(env) {
            cfg.ks_tol_deterministic
        } else {
            cfg.ks_tol_random
        };
        outcomes.push(CheckOutcome::asserted(
            "clt_ks",
            ks < tol,
            format!("KS = {ks:.4} vs N(0, {:.6}) at n = {} (tol {tol})", t.sigma2, cfg.clt_n),
        ));
        records.extend(recs);
    }

    // Ensemble vs exact kernel in total variation.
    {
        let run = run_with(
            env,
            0,
            cfg.tv_steps,
            &RunOptions {
                snapshot_times: vec![cfg.tv_steps],
                compute_energies: false,
                ..RunOptions::default()
            },
        )
        .expect("tv scale exceeds the support cap");
        let ens = simulate(env, cfg.tv_steps, cfg.walkers, salted_seed(seed_base, 0x71));
        let tv = tv_distance_to_kernel(&ens, &run.snapshots[0], env);
        records.push(VerificationRecord::new("mc_vs_kernel_tv", cfg.tv_steps, tv, 0.0, 0));
        outcomes.push(CheckOutcome::asserted(
            "mc_vs_kernel_tv",
            tv < cfg.tv_tol,
            format!("TV = {tv:.2e} with {} walkers at n = {} (tol {:.0e})", cfg.walkers, cfg.tv_steps, cfg.tv_tol),
        ));
    }

    VerifyReport { env_id: env.spec().to_string(), records, outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_env, EnvSpec};

    fn env(kind: EnvKind, seed: u64) -> Environment {
        build_env(EnvSpec { kind, seed }).unwrap()
    }

    fn constant1() -> Environment {
        env(EnvKind::Constant { kappa: 1.0 }, 0)
    }

    fn periodic12() -> Environment {
        env(EnvKind::Periodic { cycle: vec![1.0, 2.0], phase: 0 }, 0)
    }

    #[test]
    fn targets_closed_forms() {
        let t = targets(&constant1(), 0, 100);
        assert_eq!(t.mean_cbar, 2.0);
        assert_eq!(t.mean_inv_c, 1.0);
        assert_eq!(t.sigma2, 1.0);
        assert!((t.llt_constant - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!(!t.degenerate);

        let t = targets(&periodic12(), 0, 100);
        assert_eq!(t.mean_cbar, 3.0);
        assert_eq!(t.mean_inv_c, 0.75);
        assert!((t.sigma2 - 8.0 / 9.0).abs() < 1e-15);
        assert!((t.llt_constant - 1.5 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn targets_degenerate_branches() {
        let heavy = env(EnvKind::IidPareto { alpha: 0.5, xm: 1.0 }, 3);
        let t = targets(&heavy, 0, 100);
        assert!(t.degenerate);
        assert!(t.mean_cbar.is_infinite());
        assert!(t.mean_inv_c.is_finite());
        assert_eq!(t.llt_constant, 0.0);
        assert_eq!(t.sigma2, 0.0);

        let trapped = env(EnvKind::IidPower { beta: 0.5 }, 3);
        let t = targets(&trapped, 0, 100);
        assert!(t.degenerate);
        assert!(t.mean_cbar.is_finite());
        assert!(t.mean_inv_c.is_infinite());
        assert!(t.llt_constant.is_infinite());
        assert_eq!(t.sigma2, 0.0);
    }

    #[test]
    fn markov_targets_use_the_stationary_law() {
        // π = (1/3, 2/3) for this transition matrix; conductances (1, 3).
        let e = env(
            EnvKind::Markov {
                states: vec![1.0, 3.0],
                transition_matrix: vec![vec![0.5, 0.5], vec![0.25, 0.75]],
            },
            5,
        );
        let t = targets(&e, 0, 100);
        let mean_c = 1.0 / 3.0 + 3.0 * 2.0 / 3.0;
        assert!((t.mean_cbar - 2.0 * mean_c).abs() < 1e-14);
        let mean_inv = (1.0 / 3.0) / 1.0 + (2.0 / 3.0) / 3.0;
        assert!((t.mean_inv_c - mean_inv).abs() < 1e-14);
    }

    #[test]
    fn binomial_oracle_basics() {
        assert_eq!(binomial_return(0, 0), 1.0);
        assert!((binomial_return(1, 0) - 0.5).abs() < 1e-15);
        assert!((binomial_return(1, 2) - 0.25).abs() < 1e-15);
        assert_eq!(binomial_return(1, 1), 0.0);
        assert_eq!(binomial_return(1, 4), 0.0);
        // C(8,4)/256 = 70/256.
        assert!((binomial_return(4, 0) - 70.0 / 256.0).abs() < 1e-14);
    }

    #[test]
    fn llt_matches_binomial_oracle_on_homogeneous_medium() {
        let e = constant1();
        let recs = verify_llt(&e, 0, &[50, 100], 10);
        for r in &recs {
            let oracle = (2.0 * r.n as f64).sqrt() * binomial_return(r.n, 0);
            assert!((r.observed - oracle).abs() < 1e-12, "n={} obs={} oracle={oracle}", r.n, r.observed);
        }
        // √(2n)·ℙ[S₂ₙ=0] ≈ √(2/π)·(1 − 1/(8n)): already within 1e-3 at n=100.
        let last = recs.last().unwrap();
        assert!((last.observed - last.target).abs() < 2e-3);
    }

    #[test]
    fn llt_convergence_at_moderate_scale() {
        let recs = verify_llt(&constant1(), 0, &[2500], 10);
        let r = &recs[0];
        assert!((r.observed - (2.0 / PI).sqrt()).abs() < 1e-3, "observed {}", r.observed);

        let recs = verify_llt(&periodic12(), 0, &[1250], 10);
        let r = &recs[0];
        assert!((r.observed - r.target).abs() / r.target < 0.02, "rel {}", (r.observed - r.target).abs() / r.target);

        // Off-origin endpoint: same constant, c̄(2) = 3 again.
        let recs = verify_llt(&periodic12(), 2, &[1250], 10);
        let r = &recs[0];
        assert!((r.target - 1.5 / PI.sqrt()).abs() < 1e-15);
        assert!((r.observed - r.target).abs() / r.target < 0.02);
    }

    #[test]
    fn sup_bound_ball_of_radius_sqrt2_is_the_origin() {
        let e = constant1();
        let recs = verify_sup_bound(&e, &[1, 2]);
        // At n=1 the ball {x² ≤ 2} ∩ 2ℤ = {0}: observed = √2·h₂(0) = √2·(1/4)/2·2 …
        // h₂(0) = ℙ[S₂=0]/c̄ = (1/2)/2 = 1/4, so √2·(1/4).
        assert!((recs[0].observed - std::f64::consts::SQRT_2 * 0.25).abs() < 1e-15);
        // At n=2 the ball {x² ≤ 4} includes ±2; the centre still dominates.
        let h4 = binomial_return(2, 0) / 2.0;
        assert!((recs[1].observed - 2.0 * h4).abs() < 1e-14);
    }

    #[test]
    fn sup_bound_series_levels_off_for_homogeneous_medium() {
        let recs = verify_sup_bound(&constant1(), &dyadic_schedule(4, 9));
        let series: Vec<f64> = recs.iter().map(|r| r.observed).collect();
        let last = *series.last().unwrap();
        // √(2n)·max h₂ₙ → √(2/π)/2 ≈ 0.39894.
        assert!((last - (2.0 / PI).sqrt() / 2.0).abs() < 0.01, "last {last}");
        assert!(series.iter().all(|&v| v < 1.0));
    }

    #[test]
    fn energy_band_observed_constant_sits_above_lower_and_over_upper() {
        let recs = verify_energy_bands(&constant1(), &dyadic_schedule(6, 12), 10);
        let lower = recs.iter().rev().find(|r| r.check == "energy_lower").unwrap();
        let upper = recs.iter().rev().find(|r| r.check == "energy_upper").unwrap();
        // √n·‖hₙ‖² → 1/(2√π) ≈ 0.28209.
        assert!((lower.observed - 0.5 / PI.sqrt()).abs() < 0.01);
        assert!(lower.observed > 0.9 * lower.target);
        assert!(upper.observed > upper.target, "the 1/3 band is known to be exceeded");
    }

    #[test]
    fn regularity_modulus_trivial_and_oracle() {
        let e = constant1();
        // Ball shorter than one lattice step: modulus 0.
        assert_eq!(regularity_modulus(&e, 0, 1, 0.1), 0.0);
        // Against the binomial profile at n=1000, δ=1.
        let n = 1000u64;
        let m = regularity_modulus(&e, 0, n, 1.0);
        let reach = ball_reach(n, 1.0);
        let mut oracle = 0.0f64;
        let centre = binomial_return(n, 0) / 2.0;
        let mut x = -reach;
        while x <= reach {
            oracle = oracle.max((binomial_return(n, x) / 2.0 - centre).abs());
            x += 2;
        }
        assert!((m - oracle).abs() < 1e-12, "modulus {m} oracle {oracle}");
    }

    #[test]
    fn clt_ks_exact_kernel_small_scales() {
        let recs = clt_check(&constant1(), 2500, CltMode::ExactKernel, 10);
        assert_eq!(recs[0].check, "clt_ks");
        assert!(recs[0].observed < 0.02, "ks {}", recs[0].observed);
        let recs = clt_check(&periodic12(), 2500, CltMode::ExactKernel, 10);
        assert!(recs[0].observed < 0.03, "ks {}", recs[0].observed);
    }

    #[test]
    fn concentration_masses_shrink_for_trapped_medium() {
        let e = env(EnvKind::IidPower { beta: 0.5 }, 1);
        let early = clt_check(&e, 64, CltMode::ExactKernel, 10);
        let late = clt_check(&e, 4096, CltMode::ExactKernel, 10);
        assert_eq!(early.len(), CONCENTRATION_EPS.len());
        for (a, b) in early.iter().zip(&late) {
            assert_eq!(a.check, "concentration");
            assert!(b.observed < a.observed, "ε={}: {} !< {}", a.delta, b.observed, a.observed);
        }
    }

    #[test]
    fn trend_test_on_synthetic_series() {
        let doubling: Vec<f64> = (0..8).map(|j| 2.0f64.powi(j)).collect();
        assert!(trend_holds(&doubling, Trend::Increasing));
        assert!(!trend_holds(&doubling, Trend::Decreasing));
        let halving: Vec<f64> = (0..8).map(|j| 2.0f64.powi(-j)).collect();
        assert!(trend_holds(&halving, Trend::Decreasing));
        // Monotone tail but no overall factor-2 movement.
        let flat = [1.0, 1.01, 1.02, 1.03, 1.04];
        assert!(!trend_holds(&flat, Trend::Increasing));
        // Factor-2 movement but a non-monotone tail.
        let bumpy = [1.0, 4.0, 3.0, 5.0, 4.5];
        assert!(!trend_holds(&bumpy, Trend::Increasing));
        assert!(!trend_holds(&[1.0, 2.0], Trend::Increasing));
    }

    #[test]
    fn movement_ignores_rebound_phase() {
        // Fell by far more than half from the peak, then rebounded a bit:
        // the strict trend fails but the movement test accepts it.
        let rebound = [0.58, 0.45, 0.31, 0.13, 0.03, 0.02, 0.03, 0.04, 0.05];
        assert!(movement_holds(&rebound, Trend::Decreasing));
        assert!(!trend_holds(&rebound, Trend::Decreasing));

        // Ends above twice the minimum even though it dipped first.
        let dip = [2.9, 2.0, 1.4, 1.3, 1.3, 1.5, 2.0, 2.7, 3.4];
        assert!(movement_holds(&dip, Trend::Increasing));
        assert!(!trend_holds(&dip, Trend::Increasing));

        // Ending at the running maximum is not vanishing.
        let rising = [0.007, 0.002, 0.001, 0.007, 0.015, 0.021];
        assert!(!movement_holds(&rising, Trend::Decreasing));
        assert!(!movement_holds(&[], Trend::Decreasing));
    }

    #[test]
    fn difference_cross_check_is_tight() {
        let gap = max_delta_cross_gap(&periodic12(), 0, 40, 6);
        assert!(gap < 1e-12, "cross gap {gap}");
    }

    #[test]
    fn record_gap_follows_target_finiteness() {
        let r = VerificationRecord::new("x", 1, 2.0, 0.5, 0);
        assert_eq!(r.gap, 1.5);
        let r = VerificationRecord::new("x", 1, 2.0, f64::NAN, 0);
        assert!(r.gap.is_nan());
    }
}
