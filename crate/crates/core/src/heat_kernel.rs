//! Exact evolution of the heat kernel of the walk, with energies, Dirichlet
//! forms, and complete-monotonicity machinery.
//!
//! For a walk started at x₀ the kernel is hₙ(x) = ℙ_{x₀}[Sₙ = x] / c̄(x).
//! It satisfies h₀ = 𝟙_{x₀}/c̄(x₀) and evolves by the transition operator
//!
//!   P f(x) = f(x−1) p(x,x−1) + f(x+1) p(x,x+1),      hₙ₊₁ = P hₙ,
//!
//! i.e. the update reads the neighbour values of hₙ weighted by the
//! probabilities at x. P is self-adjoint for the inner product
//! (f,g) = Σₓ f(x) g(x) c̄(x), which is what every identity below exploits:
//!
//! * energy: ‖hₙ‖² = (hₙ,hₙ), non-increasing in n, and equal to h₂ₙ(x₀)
//!   (expand ℙ[S₂ₙ = x₀] over the midpoint and use reversibility);
//! * Dirichlet form: ℰ(f,f) = Σₓ (f(x−1) − f(x+1))² c(x−1,x)c(x,x+1)/c̄(x)
//!   = ‖f‖² − ‖Pf‖², the one-dimensional series form;
//! * finite differences Δₙ⁽⁰⁾ = ‖Pⁿf‖², Δₙ⁽ᵏ⁺¹⁾ = Δₙ⁽ᵏ⁾ − Δₙ₊₁⁽ᵏ⁾ are all
//!   nonnegative (complete monotonicity), each equal to the direct inner
//!   product (Pⁿf, (I−P²)ᵏ Pⁿf);
//! * Nash-type decay: ‖P²ⁿf‖² − ‖P²ⁿ⁺¹f‖² ≤ (nⁿ/(n+1)ⁿ⁺¹)·‖Pⁿf‖², with
//!   0⁰ = 1 at n = 0.
//!
//! The support at time n is {x : |x − x₀| ≤ n, x ≡ x₀ + n (mod 2)}; only
//! that live parity class is stored, n+1 contiguous values. Energies and
//! Dirichlet sums accumulate in double-double precision: the difference
//! ‖hₙ‖² − ‖hₙ₊₁‖² shrinks like ‖hₙ‖²/n and would otherwise drown in
//! roundoff by n ≈ 10³.

use crate::environment::Environment;
use crate::numeric::{nash_ratio, reduce_dd, Dd};

/// Sites per step below which the parallel dispatch is not worth it.
const PAR_MIN: usize = 8192;

/// Default cap on the kernel support (and so on the number of steps).
pub const DEFAULT_SUPPORT_CAP: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("run to n = {n} exceeds the support cap {cap}")]
    SupportCapExceeded { n: u64, cap: u64 },
    #[error("snapshot time {t} beyond run horizon {n}")]
    SnapshotBeyondHorizon { t: u64, n: u64 },
}

/// The kernel hₙ restricted to its live parity class: `values[i]` is the
/// value at `offset + 2i`, with `offset = base − time`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelState {
    pub base: i64,
    pub time: u64,
    pub offset: i64,
    pub values: Vec<f64>,
}

impl KernelState {
    /// Wraps raw values as a state at the given base and time.
    /// `values.len()` must equal `time + 1`.
    pub fn from_raw(base: i64, time: u64, values: Vec<f64>) -> KernelState {
        assert_eq!(values.len() as u64, time + 1, "support of hₙ has n+1 sites");
        KernelState { base, time, offset: base - time as i64, values }
    }

    /// hₙ(x); zero off the support, including the dead parity class.
    #[inline]
    pub fn value_at(&self, x: i64) -> f64 {
        let d = x - self.offset;
        if d < 0 || d % 2 != 0 {
            return 0.0;
        }
        let i = (d / 2) as usize;
        if i < self.values.len() {
            self.values[i]
        } else {
            0.0
        }
    }

    /// The support as (site, value) pairs, left to right.
    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.offset + 2 * i as i64, v))
    }
}

/// ‖h_m‖² for m = 0..=N of one run.
#[derive(Clone, Debug)]
pub struct EnergySeq {
    pub env_id: String,
    pub base: i64,
    pub energies: Vec<f64>,
}

impl EnergySeq {
    pub fn from_values(env_id: impl Into<String>, base: i64, energies: Vec<f64>) -> EnergySeq {
        EnergySeq { env_id: env_id.into(), base, energies }
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn get(&self, n: usize) -> f64 {
        self.energies[n]
    }
}

/// h₀ = 𝟙_{x₀} / c̄(x₀).
pub fn init_kernel(env: &Environment, x0: i64) -> KernelState {
    KernelState { base: x0, time: 0, offset: x0, values: vec![1.0 / env.cbar(x0)] }
}

/// One application of P, querying the environment per site. Uses the same
/// conductance-form arithmetic as [`run_with`], so the two paths produce
/// bit-identical states. For long runs prefer `run_with`, which builds the
/// conductance table once.
pub fn step(state: &KernelState, env: &Environment) -> KernelState {
    let m1 = state.values.len();
    let offset = state.offset - 1;
    let mut next = vec![0.0; m1 + 1];
    for (j, slot) in next.iter_mut().enumerate() {
        let x = offset + 2 * j as i64;
        let cl = env.conductance(x - 1);
        let cr = env.conductance(x);
        let left = if j >= 1 { state.values[j - 1] } else { 0.0 };
        let right = if j < m1 { state.values[j] } else { 0.0 };
        *slot = (cl * left + cr * right) / (cl + cr);
    }
    KernelState { base: state.base, time: state.time + 1, offset, values: next }
}

/// ℙ_{x₀}[Sₙ = x] = hₙ(x) · c̄(x).
pub fn occupation(state: &KernelState, env: &Environment, x: i64) -> f64 {
    let v = state.value_at(x);
    if v == 0.0 {
        0.0
    } else {
        v * env.cbar(x)
    }
}

/// Σₓ occupation(x); 1 up to accumulated roundoff.
pub fn mass(state: &KernelState, env: &Environment) -> f64 {
    let off = state.offset;
    let vals = &state.values;
    reduce_dd(vals.len(), vals.len() >= PAR_MIN, |i| {
        Dd::prod(vals[i], env.cbar(off + 2 * i as i64))
    })
    .to_f64()
}

/// c̄(x) as an exact double-double (a sum of two f64 is one Dd with no
/// error). The energy, Dirichlet, and inner-product functionals all use
/// this exact c̄; mixing the rounded f64 sum into some of them would break
/// their mutual identities at order n·ε of the energy scale.
#[inline]
fn cbar_dd(env: &Environment, x: i64) -> Dd {
    Dd::sum2(env.conductance(x - 1), env.conductance(x))
}

fn energy_dd(state: &KernelState, env: &Environment) -> Dd {
    let off = state.offset;
    let vals = &state.values;
    reduce_dd(vals.len(), vals.len() >= PAR_MIN, |i| {
        Dd::prod(vals[i], vals[i]).mul(cbar_dd(env, off + 2 * i as i64))
    })
}

/// ‖hₙ‖² = Σₓ hₙ(x)² c̄(x).
pub fn energy(state: &KernelState, env: &Environment) -> f64 {
    energy_dd(state, env).to_f64()
}

/// A finitely supported function on ℤ, dense on [offset, offset + len).
#[derive(Clone, Debug, PartialEq)]
pub struct SiteFn {
    pub offset: i64,
    pub values: Vec<f64>,
}

impl SiteFn {
    #[inline]
    pub fn value_at(&self, x: i64) -> f64 {
        let d = x - self.offset;
        if d < 0 || d as usize >= self.values.len() {
            0.0
        } else {
            self.values[d as usize]
        }
    }
}

impl From<&KernelState> for SiteFn {
    fn from(state: &KernelState) -> SiteFn {
        let mut values = vec![0.0; 2 * state.values.len() - 1];
        for (i, &v) in state.values.iter().enumerate() {
            values[2 * i] = v;
        }
        SiteFn { offset: state.offset, values }
    }
}

fn dirichlet_dd(env: &Environment, f: &SiteFn, lo: i64, hi: i64) -> Dd {
    if f.values.is_empty() || hi < lo {
        return Dd::ZERO;
    }
    let count = (hi - lo + 1) as usize;
    reduce_dd(count, count >= PAR_MIN, |i| {
        let x = lo + i as i64;
        let d = f.value_at(x - 1) - f.value_at(x + 1);
        if d == 0.0 {
            return Dd::ZERO;
        }
        let cl = env.conductance(x - 1);
        let cr = env.conductance(x);
        Dd::prod(d, d).mul_f64(cl).mul_f64(cr).div(Dd::sum2(cl, cr))
    })
}

/// Dirichlet energy of the series form,
/// ℰ(f,f) = Σₓ (f(x−1) − f(x+1))² · c(x−1,x)c(x,x+1)/c̄(x),
/// summed over every site where a difference can be nonzero.
/// Equals ‖f‖² − ‖Pf‖².
pub fn dirichlet(env: &Environment, f: &SiteFn) -> f64 {
    let lo = f.offset - 1;
    let hi = f.offset + f.values.len() as i64;
    dirichlet_dd(env, f, lo, hi).to_f64()
}

/// The same sum restricted to centre sites x ∈ [lo, hi].
pub fn dirichlet_window(env: &Environment, f: &SiteFn, lo: i64, hi: i64) -> f64 {
    dirichlet_dd(env, f, lo, hi).to_f64()
}

/// Knobs for [`run_with`]. `parallel` requests chunked rayon dispatch when
/// the `parallel` feature is compiled; it never changes any value.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub snapshot_times: Vec<u64>,
    pub record_base_trace: bool,
    pub compute_energies: bool,
    pub support_cap: u64,
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            snapshot_times: Vec::new(),
            record_base_trace: false,
            compute_energies: true,
            support_cap: DEFAULT_SUPPORT_CAP,
            parallel: true,
        }
    }
}

/// Everything a run produces. `base_trace[m] = h_m(x₀)` when recorded
/// (zero at odd m by parity); energies are empty if not requested.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub energies: EnergySeq,
    pub snapshots: Vec<KernelState>,
    pub base_trace: Vec<f64>,
}

/// Precomputed conductances and c̄ around x₀: `conds[i] = c(elo+i, elo+i+1)`
/// with elo = x₀−n−1, and `cbars[i] = c̄(x₀−n+i) = conds[i] + conds[i+1]`.
/// Same additions as `Environment::cbar`, so table and direct queries
/// agree bitwise.
struct SiteTables {
    conds: Vec<f64>,
    cbars: Vec<f64>,
}

impl SiteTables {
    fn build(env: &Environment, x0: i64, n: u64) -> SiteTables {
        let n = n as i64;
        let elo = x0 - n - 1;
        let edges = (2 * n + 2) as usize;
        let mut conds = Vec::with_capacity(edges);
        for i in 0..edges {
            conds.push(env.conductance(elo + i as i64));
        }
        let cbars = conds.windows(2).map(|w| w[0] + w[1]).collect();
        SiteTables { conds, cbars }
    }
}

/// One kernel step in conductance form,
///
///   next[j] = (c_left·cur[j−1] + c_right·cur[j]) / c̄,
///
/// the same value as p(x,x−1)·h(x−1) + p(x,x+1)·h(x+1) but with unbiased
/// roundoff: splitting c̄ into two rounded probabilities first would leave
/// a correlated error that grows linearly in n relative to the energy
/// differences the Dirichlet checks compare against. Output j reads
/// conds[base + 2j], conds[base+1 + 2j], cbars[base + 2j]; out-of-range
/// cur values are zero.
fn step_range(cur: &[f64], next: &mut [f64], conds: &[f64], cbars: &[f64], base: usize, parallel: bool) {
    let last = next.len() - 1;
    debug_assert_eq!(cur.len(), last);
    next[0] = conds[base + 1] * cur[0] / cbars[base];
    next[last] = conds[base + 2 * last] * cur[last - 1] / cbars[base + 2 * last];
    let interior = &mut next[1..last];
    #[cfg(feature = "parallel")]
    if parallel && interior.len() >= PAR_MIN {
        use rayon::prelude::*;
        interior.par_chunks_mut(crate::numeric::REDUCE_CHUNK).enumerate().for_each(|(ci, chunk)| {
            let t0 = ci * crate::numeric::REDUCE_CHUNK;
            for (dt, out) in chunk.iter_mut().enumerate() {
                let j = 2 * (t0 + dt + 1);
                *out = (conds[base + j] * cur[t0 + dt] + conds[base + 1 + j] * cur[t0 + dt + 1]) / cbars[base + j];
            }
        });
        return;
    }
    let _ = parallel;
    for (t, out) in interior.iter_mut().enumerate() {
        let j = 2 * (t + 1);
        *out = (conds[base + j] * cur[t] + conds[base + 1 + j] * cur[t + 1]) / cbars[base + j];
    }
}

/// Streams the kernel from h₀ at x₀ up to time `n`, recording energies,
/// the requested snapshots, and optionally the trace h_m(x₀). Only two
/// value buffers are live at any time.
pub fn run_with(env: &Environment, x0: i64, n: u64, opts: &RunOptions) -> Result<RunOutput, KernelError> {
    if n > opts.support_cap {
        return Err(KernelError::SupportCapExceeded { n, cap: opts.support_cap });
    }
    let mut times = opts.snapshot_times.clone();
    times.sort_unstable();
    times.dedup();
    if let Some(&t) = times.last() {
        if t > n {
            return Err(KernelError::SnapshotBeyondHorizon { t, n });
        }
    }
    let tables = SiteTables::build(env, x0, n);
    let nn = n as usize;
    let mut cur = Vec::with_capacity(nn + 1);
    let mut next = vec![0.0f64; nn + 1];
    cur.push(1.0 / tables.cbars[nn]);

    let mut energies = Vec::with_capacity(if opts.compute_energies { nn + 1 } else { 0 });
    let mut base_trace = Vec::with_capacity(if opts.record_base_trace { nn + 1 } else { 0 });
    let mut snapshots = Vec::with_capacity(times.len());
    let mut next_snap = times.iter().copied().peekable();

    for m in 0..=n {
        let mu = m as usize;
        if opts.compute_energies {
            let vals = &cur;
            let conds = &tables.conds;
            let e = reduce_dd(mu + 1, opts.parallel && mu + 1 >= PAR_MIN, |i| {
                let b = nn - mu + 2 * i;
                Dd::prod(vals[i], vals[i]).mul(Dd::sum2(conds[b], conds[b + 1]))
            });
            energies.push(e.to_f64());
        }
        if opts.record_base_trace {
            base_trace.push(if mu.is_multiple_of(2) { cur[mu / 2] } else { 0.0 });
        }
        if next_snap.peek() == Some(&m) {
            next_snap.next();
            snapshots.push(KernelState { base: x0, time: m, offset: x0 - m as i64, values: cur.clone() });
        }
        if m == n {
            break;
        }
        next.resize(mu + 2, 0.0);
        step_range(&cur, &mut next, &tables.conds, &tables.cbars, nn - mu - 1, opts.parallel);
        std::mem::swap(&mut cur, &mut next);
    }

    Ok(RunOutput {
        energies: EnergySeq { env_id: env.spec().to_string(), base: x0, energies },
        snapshots,
        base_trace,
    })
}

/// Energies up to time `n` plus snapshots at the given times.
pub fn run_to(
    env: &Environment,
    x0: i64,
    n: u64,
    snapshot_times: &[u64],
) -> Result<(EnergySeq, Vec<KernelState>), KernelError> {
    let out = run_with(
        env,
        x0,
        n,
        &RunOptions { snapshot_times: snapshot_times.to_vec(), ..RunOptions::default() },
    )?;
    Ok((out.energies, out.snapshots))
}

/// Largest relative gap |‖hₙ‖² − h₂ₙ(x₀)| / ‖hₙ‖² over all n with
/// 2n ≤ trace length. The run must have recorded energies and the base
/// trace.
pub fn max_duality_gap(run: &RunOutput) -> f64 {
    let e = &run.energies.energies;
    let t = &run.base_trace;
    assert!(!e.is_empty() && !t.is_empty(), "needs energies and a base trace");
    let mut worst = 0.0f64;
    for n in 0..e.len() {
        if 2 * n >= t.len() {
            break;
        }
        let gap = (e[n] - t[2 * n]).abs() / e[n];
        worst = worst.max(gap);
    }
    worst
}

/// ‖P f‖² with P applied to the stored values in double-double, so the
/// result is the energy of the exact image of f, not of its rounded
/// f64 evolution.
fn energy_of_p_image(state: &KernelState, env: &Environment) -> Dd {
    let off = state.offset - 1;
    let m1 = state.values.len();
    let mut acc = Dd::ZERO;
    for j in 0..=m1 {
        let x = off + 2 * j as i64;
        let cl = env.conductance(x - 1);
        let cr = env.conductance(x);
        let left = if j >= 1 { state.values[j - 1] } else { 0.0 };
        let right = if j < m1 { state.values[j] } else { 0.0 };
        // (Pf)²·c̄ = (cl·left + cr·right)² / c̄.
        let num = Dd::prod(cl, left).add(Dd::prod(cr, right));
        acc = acc.add(num.sqr().div(Dd::sum2(cl, cr)));
    }
    acc
}

/// Largest relative gap |ℰ(hₙ,hₙ) − (‖hₙ‖² − ‖P hₙ‖²)| over n < n_max.
///
/// The states hₙ follow the production f64 evolution; each comparison then
/// evaluates both sides of the identity in double-double, with P applied
/// exactly to the stored hₙ. Comparing against ‖hₙ₊₁‖² of the rounded
/// next state instead would measure that state's one-step roundoff
/// (≈ n·ε relative to the energy drop), not the identity.
pub fn max_green_gap(env: &Environment, x0: i64, n_max: u64) -> f64 {
    let mut state = init_kernel(env, x0);
    let mut worst = 0.0f64;
    for _ in 0..n_max {
        let f = SiteFn::from(&state);
        let form = dirichlet_dd(env, &f, f.offset - 1, f.offset + f.values.len() as i64).to_f64();
        let diff = energy_dd(&state, env).sub(energy_of_p_image(&state, env)).to_f64();
        let scale = form.abs().max(diff.abs());
        if scale > 0.0 {
            worst = worst.max((form - diff).abs() / scale);
        }
        state = step(&state, env);
    }
    worst
}

/// Triangular table of finite differences of an energy sequence:
/// `delta(n,k)` = Δₙ⁽ᵏ⁾, built by the defining recurrence
/// Δₙ⁽ᵏ⁺¹⁾ = Δₙ⁽ᵏ⁾ − Δₙ₊₁⁽ᵏ⁾ in double-double precision (the recurrence
/// loses about k digits to cancellation in plain f64).
#[derive(Clone, Debug)]
pub struct DifferenceTable {
    pub source: EnergySeq,
    pub max_order: usize,
    rows: Vec<Vec<f64>>,
}

impl DifferenceTable {
    /// Δₙ⁽ᵏ⁾ for 0 ≤ k ≤ max_order, 0 ≤ n ≤ N − k.
    pub fn delta(&self, n: usize, k: usize) -> f64 {
        self.rows[k][n]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }
}

/// Builds the difference table of order ≤ k_max from an energy sequence.
pub fn finite_differences(e: &EnergySeq, k_max: usize) -> DifferenceTable {
    assert!(k_max < e.len(), "order {k_max} needs at least {} energies", k_max + 1);
    let mut dd_rows: Vec<Vec<Dd>> = Vec::with_capacity(k_max + 1);
    dd_rows.push(e.energies.iter().map(|&v| Dd::from_f64(v)).collect());
    for k in 0..k_max {
        let prev = &dd_rows[k];
        let row: Vec<Dd> = (0..prev.len() - 1).map(|n| prev[n].sub(prev[n + 1])).collect();
        dd_rows.push(row);
    }
    DifferenceTable {
        source: e.clone(),
        max_order: k_max,
        rows: dd_rows.iter().map(|row| row.iter().map(|d| d.to_f64()).collect()).collect(),
    }
}

/// Sparse vector on one parity class of ℤ: vals[i] sits at off + 2i.
#[derive(Clone)]
struct ParityVec {
    off: i64,
    vals: Vec<f64>,
}

impl ParityVec {
    fn apply_p(&self, env: &Environment) -> ParityVec {
        let off = self.off - 1;
        let m1 = self.vals.len();
        let mut vals = vec![0.0; m1 + 1];
        for (j, slot) in vals.iter_mut().enumerate() {
            let x = off + 2 * j as i64;
            let cl = env.conductance(x - 1);
            let cr = env.conductance(x);
            let left = if j >= 1 { self.vals[j - 1] } else { 0.0 };
            let right = if j < m1 { self.vals[j] } else { 0.0 };
            *slot = (cl * left + cr * right) / (cl + cr);
        }
        ParityVec { off, vals }
    }

    /// self − other; supports must live on the same parity class.
    fn sub(&self, other: &ParityVec) -> ParityVec {
        debug_assert_eq!((self.off - other.off).rem_euclid(2), 0);
        let off = self.off.min(other.off);
        let end = (self.off + 2 * self.vals.len() as i64).max(other.off + 2 * other.vals.len() as i64);
        let len = ((end - off) / 2) as usize;
        let mut vals = vec![0.0; len];
        for (i, slot) in vals.iter_mut().enumerate() {
            let x = off + 2 * i as i64;
            *slot = value_on(self, x) - value_on(other, x);
        }
        ParityVec { off, vals }
    }

    fn inner(&self, other: &ParityVec, env: &Environment) -> f64 {
        let lo = self.off.max(other.off);
        let hi = (self.off + 2 * (self.vals.len() as i64 - 1)).min(other.off + 2 * (other.vals.len() as i64 - 1));
        if hi < lo {
            return 0.0;
        }
        let count = ((hi - lo) / 2 + 1) as usize;
        reduce_dd(count, false, |i| {
            let x = lo + 2 * i as i64;
            Dd::prod(value_on(self, x), value_on(other, x)).mul(cbar_dd(env, x))
        })
        .to_f64()
    }
}

fn value_on(v: &ParityVec, x: i64) -> f64 {
    let d = x - v.off;
    if d < 0 || d % 2 != 0 {
        return 0.0;
    }
    let i = (d / 2) as usize;
    if i < v.vals.len() {
        v.vals[i]
    } else {
        0.0
    }
}

fn kernel_parity_vec(env: &Environment, x0: i64, n: u64) -> ParityVec {
    let mut v = ParityVec { off: x0, vals: vec![1.0 / env.cbar(x0)] };
    for _ in 0..n {
        v = v.apply_p(env);
    }
    v
}

/// Δₙ⁽ᵏ⁾ computed directly as (Pⁿh₀, (I−P²)ᵏ Pⁿh₀), independent of the
/// finite-difference recurrence; the two must agree.
pub fn delta_direct(env: &Environment, x0: i64, n: u64, k: usize) -> f64 {
    let h = kernel_parity_vec(env, x0, n);
    let mut d = h.clone();
    for _ in 0..k {
        d = d.sub(&d.apply_p(env).apply_p(env));
    }
    h.inner(&d, env)
}

/// The direct values across the same triangular region as a difference
/// table of order ≤ k_max: `out[k][n]` for n ≤ n_max − k.
#[allow(clippy::needless_range_loop)] // (k, n) indexing mirrors the table layout
pub fn delta_direct_table(env: &Environment, x0: i64, n_max: u64, k_max: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..=k_max).map(|k| vec![0.0; n_max as usize + 1 - k]).collect();
    let mut h = ParityVec { off: x0, vals: vec![1.0 / env.cbar(x0)] };
    for n in 0..=n_max as usize {
        if n > 0 {
            h = h.apply_p(env);
        }
        let top = k_max.min(n_max as usize - n);
        let mut d = h.clone();
        for k in 0..=top {
            out[k][n] = h.inner(&d, env);
            if k < top {
                d = d.sub(&d.apply_p(env).apply_p(env));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct MonotonicityViolation {
    pub n: usize,
    pub k: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct MonotonicityReport {
    /// Δ₀⁽⁰⁾ = ‖h₀‖², the natural scale of every table entry.
    pub scale: f64,
    pub violations: Vec<MonotonicityViolation>,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flags every table entry below −tol·Δ₀⁽⁰⁾. Complete monotonicity says
/// the list is empty for any energy sequence of a kernel run.
pub fn check_complete_monotonicity(t: &DifferenceTable, tol: f64) -> MonotonicityReport {
    let scale = t.rows[0][0];
    let mut violations = Vec::new();
    for (k, row) in t.rows.iter().enumerate() {
        for (n, &v) in row.iter().enumerate() {
            if v < -tol * scale {
                violations.push(MonotonicityViolation { n, k, value: v });
            }
        }
    }
    MonotonicityReport { scale, violations }
}

/// Slack in the decay inequality at n:
/// (nⁿ/(n+1)ⁿ⁺¹)·‖hₙ‖² − (‖h₂ₙ‖² − ‖h₂ₙ₊₁‖²), which must be ≥ 0 up to
/// roundoff. Requires energies up to 2n+1.
pub fn check_nash(e: &EnergySeq, n: u64) -> f64 {
    let nu = n as usize;
    assert!(2 * nu + 1 < e.len(), "needs energies up to 2n+1 = {}", 2 * nu + 1);
    let rhs = nash_ratio(n) * e.energies[nu];
    let lhs = e.energies[2 * nu] - e.energies[2 * nu + 1];
    rhs - lhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_env, EnvKind, EnvSpec};

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
    fn init_values() {
        assert_eq!(init_kernel(&constant1(), 0).values, vec![0.5]);
        assert_eq!(init_kernel(&periodic12(), 0).values, vec![1.0 / 3.0]);
        assert_eq!(init_kernel(&env(EnvKind::Constant { kappa: 5.0 }, 0), 7).values, vec![0.1]);
    }

    #[test]
    fn step_homogeneous_small_times() {
        let e = constant1();
        let h1 = step(&init_kernel(&e, 0), &e);
        assert_eq!(h1.values, vec![0.25, 0.25]);
        assert_eq!((h1.offset, h1.time), (-1, 1));
        let h2 = step(&h1, &e);
        assert_eq!(h2.values, vec![0.125, 0.25, 0.125]);
    }

    #[test]
    fn step_zero_function_stays_zero() {
        let e = periodic12();
        let z = KernelState::from_raw(0, 3, vec![0.0; 4]);
        let sz = step(&z, &e);
        assert!(sz.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn occupation_examples() {
        let e = constant1();
        let h2 = step(&step(&init_kernel(&e, 0), &e), &e);
        assert_eq!(occupation(&h2, &e, 0), 0.5);
        assert_eq!(occupation(&h2, &e, 1), 0.0);
        let p = periodic12();
        let g2 = step(&step(&init_kernel(&p, 0), &p), &p);
        assert!((occupation(&g2, &p, 0) - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn energy_small_times() {
        let e = constant1();
        let mut state = init_kernel(&e, 0);
        assert_eq!(energy(&state, &e), 0.5);
        state = step(&state, &e);
        assert_eq!(energy(&state, &e), 0.25);
        state = step(&state, &e);
        assert_eq!(energy(&state, &e), 0.1875);
    }

    #[test]
    fn dirichlet_examples() {
        let e = constant1();
        let h0 = init_kernel(&e, 0);
        assert_eq!(dirichlet(&e, &SiteFn::from(&h0)), 0.25);
        // Constant plateau: interior differences vanish.
        let plateau = SiteFn { offset: -5, values: vec![3.0; 11] };
        assert_eq!(dirichlet_window(&e, &plateau, -3, 3), 0.0);
        // Zero function.
        let zero = SiteFn { offset: 0, values: vec![0.0; 4] };
        assert_eq!(dirichlet(&e, &zero), 0.0);
    }

    #[test]
    fn dirichlet_equals_energy_drop() {
        for environment in [constant1(), periodic12(), env(EnvKind::IidLognormal { m: 0.0, s: 1.0 }, 4)] {
            let mut state = init_kernel(&environment, 0);
            for _ in 0..30 {
                let form = dirichlet(&environment, &SiteFn::from(&state));
                let next = step(&state, &environment);
                let drop = energy(&state, &environment) - energy(&next, &environment);
                assert!((form - drop).abs() <= 1e-13 * form.abs().max(drop.abs()));
                state = next;
            }
        }
    }

    #[test]
    fn run_to_matches_examples() {
        let e = constant1();
        let (es, snaps) = run_to(&e, 0, 2, &[2]).unwrap();
        assert_eq!(es.energies, vec![0.5, 0.25, 0.1875]);
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].values, vec![0.125, 0.25, 0.125]);

        let (es0, snaps0) = run_to(&e, 0, 0, &[0]).unwrap();
        assert_eq!(es0.energies, vec![0.5]);
        assert_eq!(snaps0[0].values, vec![0.5]);

        let p = periodic12();
        let (ep, _) = run_to(&p, 0, 1, &[]).unwrap();
        assert!((ep.energies[1] - 5.0 / 27.0).abs() < 1e-16);
    }

    #[test]
    fn run_guards() {
        let e = constant1();
        let err = run_with(&e, 0, 10, &RunOptions { support_cap: 5, ..RunOptions::default() });
        assert!(matches!(err, Err(KernelError::SupportCapExceeded { n: 10, cap: 5 })));
        let err = run_to(&e, 0, 5, &[7]);
        assert!(matches!(err, Err(KernelError::SnapshotBeyondHorizon { t: 7, n: 5 })));
    }

    #[test]
    fn duality_on_homogeneous_run_is_exact_at_small_n() {
        let e = constant1();
        let out = run_with(&e, 0, 8, &RunOptions { record_base_trace: true, ..RunOptions::default() })
            .unwrap();
        // ‖h₁‖² = h₂(0) = 1/4 and ‖h₂‖² = h₄(0) = 3/16, exactly in dyadics.
        assert_eq!(out.energies.energies[1], out.base_trace[2]);
        assert_eq!(out.energies.energies[2], out.base_trace[4]);
        assert!(max_duality_gap(&out) < 1e-15);
    }

    #[test]
    fn green_gap_small_horizon() {
        assert!(max_green_gap(&periodic12(), 0, 50) < 1e-14);
    }

    #[test]
    fn finite_difference_examples() {
        let e = EnergySeq::from_values("test", 0, vec![0.5, 0.25, 0.1875]);
        let t = finite_differences(&e, 2);
        assert_eq!(t.delta(0, 1), 0.25);
        assert_eq!(t.delta(1, 1), 0.0625);
        assert_eq!(t.delta(0, 2), 0.1875);
        // K=0 table is the sequence itself.
        let t0 = finite_differences(&e, 0);
        assert_eq!(t0.row(0), &[0.5, 0.25, 0.1875]);
        // Constant sequence: all higher differences vanish.
        let c = EnergySeq::from_values("test", 0, vec![0.7; 6]);
        let tc = finite_differences(&c, 3);
        for k in 1..=3 {
            assert!(tc.row(k).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn delta_direct_examples() {
        let e = constant1();
        assert_eq!(delta_direct(&e, 0, 0, 1), 0.25);
        assert_eq!(delta_direct(&e, 0, 0, 2), 0.1875);
        for n in 0..4 {
            let (es, snaps) = run_to(&e, 0, n, &[n]).unwrap();
            let direct = delta_direct(&e, 0, n, 0);
            assert_eq!(direct, energy(&snaps[0], &e));
            assert_eq!(direct, es.energies[n as usize]);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn delta_direct_table_matches_single_calls() {
        let p = periodic12();
        let table = delta_direct_table(&p, 0, 8, 3);
        for k in 0..=3usize {
            for n in 0..=(8 - k) {
                let single = delta_direct(&p, 0, n as u64, k);
                let batched = table[k][n];
                assert!((single - batched).abs() <= 1e-15 * single.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn monotonicity_clean_and_perturbed() {
        let e = constant1();
        let (es, _) = run_to(&e, 0, 60, &[]).unwrap();
        let t = finite_differences(&es, 10);
        assert!(check_complete_monotonicity(&t, 1e-12).is_clean());

        let ln = env(EnvKind::IidLognormal { m: 0.0, s: 1.0 }, 1);
        let (es, _) = run_to(&ln, 0, 60, &[]).unwrap();
        let t = finite_differences(&es, 10);
        assert!(check_complete_monotonicity(&t, 1e-12).is_clean());

        // A 10% bump at index 3 must break monotonicity.
        let mut bad = es.clone();
        bad.energies[3] *= 1.1;
        let tb = finite_differences(&bad, 10);
        let report = check_complete_monotonicity(&tb, 1e-12);
        assert!(!report.is_clean());
    }

    #[test]
    fn nash_examples() {
        let e = constant1();
        let (es, _) = run_to(&e, 0, 3, &[]).unwrap();
        assert_eq!(check_nash(&es, 0), 0.25);
        assert_eq!(check_nash(&es, 1), 1.0 / 32.0);
        let zero = EnergySeq::from_values("zero", 0, vec![0.0; 4]);
        assert_eq!(check_nash(&zero, 1), 0.0);
    }

    #[test]
    fn parity_and_value_lookup() {
        let e = periodic12();
        let (_, snaps) = run_to(&e, 0, 5, &[5]).unwrap();
        let s = &snaps[0];
        for x in -7..=7 {
            let v = s.value_at(x);
            if (x - s.offset) % 2 != 0 || x.abs() > 5 {
                assert_eq!(v, 0.0);
            }
        }
        assert_eq!(s.support().count(), 6);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_run_is_bit_identical() {
        let e = env(EnvKind::IidPareto { alpha: 0.5, xm: 1.0 }, 3);
        let seq = run_with(
            &e,
            0,
            3000,
            &RunOptions { parallel: false, record_base_trace: true, snapshot_times: vec![3000], ..RunOptions::default() },
        )
        .unwrap();
        let par = run_with(
            &e,
            0,
            3000,
            &RunOptions { parallel: true, record_base_trace: true, snapshot_times: vec![3000], ..RunOptions::default() },
        )
        .unwrap();
        for (a, b) in seq.energies.energies.iter().zip(&par.energies.energies) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in seq.snapshots[0].values.iter().zip(&par.snapshots[0].values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
