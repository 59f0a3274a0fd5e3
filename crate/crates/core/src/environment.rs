//! Stationary random conductance environments on the edges of ℤ.
//!
//! An environment assigns to every edge (x, x+1) a conductance
//! c(x,x+1) ∈ (0,∞). Derived quantities:
//!
//! * c̄(x) = c(x−1,x) + c(x,x+1), the total conductance at the site x,
//! * p(x,x±1) = c(x,x±1)/c̄(x), the transition probabilities of the
//!   nearest-neighbour walk among those conductances.
//!
//! The abstract ergodic system behind the model is realized directly as the
//! shift on the edge sequence: a kind plus a seed determines the whole
//! two-sided sequence. I.i.d. kinds draw each edge from a counter-based
//! uniform keyed by (seed, edge), so queries are order-independent and
//! thread-safe; the markov kind grows left and right half-sequences from a
//! stationary draw at edge 0 behind a lock.
//!
//! Whether ∫c̄ dμ and ∫(1/c) dμ are finite decides which limit statements
//! apply downstream. That classification is analytic in the parameters
//! ([`integrability_class`]), never estimated.

use std::fmt;
use std::sync::Mutex;

use crate::numeric::{reduce_dd, Dd};
use crate::rng::{edge_uniform, salted_seed};

/// Queries are answered for |x| ≤ 2³¹; beyond that the f64 x-grid and the
/// zig-zag edge coding would both need revisiting.
pub const RANGE_MAX: i64 = 1 << 31;

/// Conductances must stay inside [1e−300, 1e300] so that no transition
/// probability silently under- or overflows.
pub const CONDUCTANCE_MIN: f64 = 1e-300;
pub const CONDUCTANCE_MAX: f64 = 1e300;

/// Smallest transition probability the walk distinguishes; pairs clamp to
/// [2⁻⁵³, 1 − 2⁻⁵³] so both members stay strictly inside (0,1).
const MIN_P: f64 = 1.0 / 9_007_199_254_740_992.0;

const SALT_GAUSS_ANGLE: u64 = 0x5bf0_3635_16f5_cc83;
const SALT_MARKOV_ROOT: u64 = 0xa0761d6478bd642f;

/// Extreme |u^(1/β)| style draws use uniforms in [2⁻⁵³, 1 − 2⁻⁵³]; the
/// parameter validation below propagates that range through each closed
/// form and rejects specs that could leave [1e−300, 1e300].
const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Clone, Debug, PartialEq)]
pub enum EnvKind {
    /// c ≡ κ.
    Constant { kappa: f64 },
    /// c(x,x+1) = cycle[(x + phase) mod cycle.len()].
    Periodic { cycle: Vec<f64>, phase: i64 },
    /// ln c ~ N(m, s²), i.i.d. over edges.
    IidLognormal { m: f64, s: f64 },
    /// P(c > t) = (xm/t)^α for t ≥ xm, i.i.d. over edges.
    IidPareto { alpha: f64, xm: f64 },
    /// c = U^(1/β) with U uniform on (0,1), i.i.d. over edges.
    IidPower { beta: f64 },
    /// c(x,x+1) = states[ξ(x)] for a stationary irreducible finite-state
    /// chain ξ indexed by the edges.
    Markov { states: Vec<f64>, transition_matrix: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct IntegrabilityClass {
    pub cbar_integrable: bool,
    pub inv_c_integrable: bool,
}

impl IntegrabilityClass {
    pub fn non_degenerate(self) -> bool {
        self.cbar_integrable && self.inv_c_integrable
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid environment spec ({field}): {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("edge index {x} outside supported range |x| <= 2^31")]
    RangeOverflow { x: i64 },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> EnvError {
    EnvError::InvalidSpec { field, reason: reason.into() }
}

fn check_positive_value(field: &'static str, v: f64) -> Result<(), EnvError> {
    if !v.is_finite() || !(CONDUCTANCE_MIN..=CONDUCTANCE_MAX).contains(&v) {
        return Err(invalid(field, format!("{v} outside [{CONDUCTANCE_MIN:e}, {CONDUCTANCE_MAX:e}]")));
    }
    Ok(())
}

impl EnvSpec {
    /// Checks parameter ranges, including that the extreme reachable draws
    /// (uniforms down to 2⁻⁵³) keep conductances inside [1e−300, 1e300].
    pub fn validate(&self) -> Result<(), EnvError> {
        let ln_max = CONDUCTANCE_MAX.ln();
        match &self.kind {
            EnvKind::Constant { kappa } => check_positive_value("constant.kappa", *kappa),
            EnvKind::Periodic { cycle, phase } => {
                if cycle.is_empty() {
                    return Err(invalid("periodic.cycle", "empty cycle"));
                }
                for &v in cycle {
                    check_positive_value("periodic.cycle", v)?;
                }
                if phase.unsigned_abs() > RANGE_MAX as u64 {
                    return Err(invalid("periodic.phase", format!("|{phase}| > 2^31")));
                }
                Ok(())
            }
            EnvKind::IidLognormal { m, s } => {
                if !m.is_finite() {
                    return Err(invalid("iid_lognormal.m", "not finite"));
                }
                if !s.is_finite() || *s <= 0.0 {
                    return Err(invalid("iid_lognormal.s", "must be finite and > 0"));
                }
                // |z| ≤ √(−2 ln 2⁻⁵³) < 8.58 under the Box-Muller map below.
                if m.abs() + 8.6 * s > ln_max {
                    return Err(invalid("iid_lognormal", format!("|m| + 8.6 s = {} may overflow conductances", m.abs() + 8.6 * s)));
                }
                Ok(())
            }
            EnvKind::IidPareto { alpha, xm } => {
                if !alpha.is_finite() || *alpha <= 0.0 {
                    return Err(invalid("iid_pareto.alpha", "must be finite and > 0"));
                }
                check_positive_value("iid_pareto.xm", *xm)?;
                if xm.ln() + 53.0 * LN_2 / alpha > ln_max {
                    return Err(invalid("iid_pareto", format!("xm * 2^(53/alpha) exceeds {CONDUCTANCE_MAX:e}")));
                }
                Ok(())
            }
            EnvKind::IidPower { beta } => {
                if !beta.is_finite() || *beta <= 0.0 {
                    return Err(invalid("iid_power.beta", "must be finite and > 0"));
                }
                if 53.0 * LN_2 / beta > -CONDUCTANCE_MIN.ln() {
                    return Err(invalid("iid_power", format!("2^(-53/beta) underflows below {CONDUCTANCE_MIN:e}")));
                }
                Ok(())
            }
            EnvKind::Markov { states, transition_matrix } => {
                if states.is_empty() {
                    return Err(invalid("markov.states", "empty state list"));
                }
                for &v in states {
                    check_positive_value("markov.states", v)?;
                }
                let n = states.len();
                if transition_matrix.len() != n {
                    return Err(invalid("markov.transition_matrix", format!("{} rows for {n} states", transition_matrix.len())));
                }
                for (i, row) in transition_matrix.iter().enumerate() {
                    if row.len() != n {
                        return Err(invalid("markov.transition_matrix", format!("row {i} has {} entries", row.len())));
                    }
                    let mut sum = 0.0;
                    for &p in row {
                        if !p.is_finite() || p < 0.0 {
                            return Err(invalid("markov.transition_matrix", format!("row {i} has a negative or non-finite entry")));
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > 1e-12 {
                        return Err(invalid("markov.transition_matrix", format!("row {i} sums to {sum}, not 1")));
                    }
                }
                if !strongly_connected(transition_matrix) {
                    return Err(invalid("markov.transition_matrix", "chain is not irreducible"));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            EnvKind::Constant { kappa } => write!(f, "constant(kappa={kappa})")?,
            EnvKind::Periodic { cycle, phase } => {
                write!(f, "periodic(cycle=[")?;
                for (i, v) in cycle.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "],phase={phase})")?;
            }
            EnvKind::IidLognormal { m, s } => write!(f, "iid_lognormal(m={m},s={s})")?,
            EnvKind::IidPareto { alpha, xm } => write!(f, "iid_pareto(alpha={alpha},xm={xm})")?,
            EnvKind::IidPower { beta } => write!(f, "iid_power(beta={beta})")?,
            EnvKind::Markov { states, .. } => write!(f, "markov(states={})", states.len())?,
        }
        write!(f, "#{}", self.seed)
    }
}

fn strongly_connected(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    let reach = |transpose: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if transpose { p[j][i] } else { p[i][j] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    };
    reach(false) == n && reach(true) == n
}

/// Stationary distribution of an irreducible row-stochastic matrix, by
/// direct elimination on (Pᵀ − I) with the last equation replaced by Σπ = 1.
#[allow(clippy::needless_range_loop)] // indexed elimination reads clearer
fn stationary_distribution(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 0.0, "singular stationary system for an irreducible chain");
        for j in col..=n {
            a[col][j] /= d;
        }
        for r in 0..n {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for j in col..=n {
                    a[r][j] -= f * a[col][j];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n].max(0.0)).collect()
}

struct MarkovChain {
    states: Vec<f64>,
    forward: Vec<Vec<f64>>,
    backward: Vec<Vec<f64>>,
    pi: Vec<f64>,
    root_seed: u64,
    /// memo.0[k] = state of edge k, memo.1[k] = state of edge −(k+1).
    memo: Mutex<(Vec<u32>, Vec<u32>)>,
}

impl MarkovChain {
    fn new(states: Vec<f64>, forward: Vec<Vec<f64>>, seed: u64) -> Self {
        let pi = stationary_distribution(&forward);
        let n = states.len();
        let mut backward = vec![vec![0.0; n]; n];
        for j in 0..n {
            for i in 0..n {
                if pi[j] > 0.0 {
                    backward[j][i] = pi[i] * forward[i][j] / pi[j];
                }
            }
        }
        MarkovChain {
            states,
            forward,
            backward,
            pi,
            root_seed: salted_seed(seed, SALT_MARKOV_ROOT),
            memo: Mutex::new((Vec::new(), Vec::new())),
        }
    }

    fn sample_index(weights: &[f64], u: f64) -> usize {
        let mut cum = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            cum += w;
            if u < cum {
                return i;
            }
        }
        weights.len() - 1
    }

    fn state_at(&self, x: i64, seed: u64) -> usize {
        let mut memo = self.memo.lock().unwrap();
        let (right, left) = &mut *memo;
        if right.is_empty() {
            let u = edge_uniform(self.root_seed, 0);
            right.push(Self::sample_index(&self.pi, u) as u32);
        }
        if x >= 0 {
            let need = x as usize;
            while right.len() <= need {
                let prev = right[right.len() - 1] as usize;
                let u = edge_uniform(seed, right.len() as i64);
                right.push(Self::sample_index(&self.forward[prev], u) as u32);
            }
            right[need] as usize
        } else {
            let need = (-x - 1) as usize;
            while left.len() <= need {
                let prev = if left.is_empty() { right[0] as usize } else { left[left.len() - 1] as usize };
                let u = edge_uniform(seed, -(left.len() as i64) - 1);
                left.push(Self::sample_index(&self.backward[prev], u) as u32);
            }
            left[need] as usize
        }
    }
}

enum KindImpl {
    Constant { kappa: f64 },
    Periodic { cycle: Vec<f64>, phase: i64 },
    Lognormal { m: f64, s: f64, angle_seed: u64 },
    Pareto { neg_inv_alpha: f64, xm: f64 },
    Power { inv_beta: f64 },
    Markov(MarkovChain),
}

/// An immutable view of one realized conductance sequence.
pub struct Environment {
    spec: EnvSpec,
    imp: KindImpl,
}

/// Validates `spec` and realizes it as a queryable edge sequence.
pub fn build_env(spec: EnvSpec) -> Result<Environment, EnvError> {
    spec.validate()?;
    let seed = spec.seed;
    let imp = match &spec.kind {
        EnvKind::Constant { kappa } => KindImpl::Constant { kappa: *kappa },
        EnvKind::Periodic { cycle, phase } => KindImpl::Periodic { cycle: cycle.clone(), phase: *phase },
        EnvKind::IidLognormal { m, s } => KindImpl::Lognormal { m: *m, s: *s, angle_seed: salted_seed(seed, SALT_GAUSS_ANGLE) },
        EnvKind::IidPareto { alpha, xm } => KindImpl::Pareto { neg_inv_alpha: -1.0 / alpha, xm: *xm },
        EnvKind::IidPower { beta } => KindImpl::Power { inv_beta: 1.0 / beta },
        EnvKind::Markov { states, transition_matrix } => {
            KindImpl::Markov(MarkovChain::new(states.clone(), transition_matrix.clone(), seed))
        }
    };
    Ok(Environment { spec, imp })
}

impl Environment {
    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    /// Stationary distribution of the edge chain (markov kind only).
    pub fn stationary(&self) -> Option<&[f64]> {
        match &self.imp {
            KindImpl::Markov(chain) => Some(&chain.pi),
            _ => None,
        }
    }

    /// c(x, x+1). Panics outside |x| ≤ 2³¹; see [`Environment::try_conductance`]
    /// for the checked form.
    #[inline]
    pub fn conductance(&self, x: i64) -> f64 {
        assert!(x.unsigned_abs() <= RANGE_MAX as u64, "edge index {x} outside supported range");
        match &self.imp {
            KindImpl::Constant { kappa } => *kappa,
            KindImpl::Periodic { cycle, phase } => {
                let l = cycle.len() as i64;
                cycle[(x + phase).rem_euclid(l) as usize]
            }
            KindImpl::Lognormal { m, s, angle_seed } => {
                let u1 = edge_uniform(self.spec.seed, x);
                let u2 = edge_uniform(*angle_seed, x);
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                (m + s * z).exp()
            }
            KindImpl::Pareto { neg_inv_alpha, xm } => xm * edge_uniform(self.spec.seed, x).powf(*neg_inv_alpha),
            KindImpl::Power { inv_beta } => edge_uniform(self.spec.seed, x).powf(*inv_beta),
            KindImpl::Markov(chain) => chain.states[chain.state_at(x, self.spec.seed)],
        }
    }

    pub fn try_conductance(&self, x: i64) -> Result<f64, EnvError> {
        if x.unsigned_abs() > RANGE_MAX as u64 {
            return Err(EnvError::RangeOverflow { x });
        }
        Ok(self.conductance(x))
    }

    /// c̄(x) = c(x−1,x) + c(x,x+1).
    #[inline]
    pub fn cbar(&self, x: i64) -> f64 {
        self.conductance(x - 1) + self.conductance(x)
    }

    /// (p(x,x−1), p(x,x+1)). The pair sums to 1 within one ulp: the right
    /// member is computed as 1 − p_left, and p_left is clamped to
    /// [2⁻⁵³, 1 − 2⁻⁵³] so both stay strictly inside (0,1).
    #[inline]
    pub fn transition(&self, x: i64) -> (f64, f64) {
        let cl = self.conductance(x - 1);
        let cr = self.conductance(x);
        let p_left = (cl / (cl + cr)).clamp(MIN_P, 1.0 - MIN_P);
        (p_left, 1.0 - p_left)
    }

    /// Birkhoff window average (1/2L) Σ_{x=−L}^{L−1} of c̄(x) or 1/c(x,x+1).
    pub fn birkhoff_mean(&self, observable: Observable, l: u64) -> f64 {
        assert!(l >= 1, "window length must be >= 1");
        assert!(l < RANGE_MAX as u64, "window exceeds supported range");
        let l = l as i64;
        let n = (2 * l) as usize;
        let sum = match observable {
            Observable::Cbar => reduce_dd(n, n > 1 << 14, |i| Dd::from_f64(self.cbar(i as i64 - l))),
            Observable::InvC => reduce_dd(n, n > 1 << 14, |i| Dd::from_f64(1.0 / self.conductance(i as i64 - l))),
        };
        sum.to_f64() / (2 * l) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    Cbar,
    InvC,
}

/// Which μ-integrals are finite, read off the parameters.
pub fn integrability_class(spec: &EnvSpec) -> IntegrabilityClass {
    match &spec.kind {
        EnvKind::Constant { .. } | EnvKind::Periodic { .. } | EnvKind::Markov { .. } => {
            IntegrabilityClass { cbar_integrable: true, inv_c_integrable: true }
        }
        // E[c] = e^{m+s²/2} and E[1/c] = e^{−m+s²/2}, both finite.
        EnvKind::IidLognormal { .. } => IntegrabilityClass { cbar_integrable: true, inv_c_integrable: true },
        // E[c] = α·xm/(α−1) finite iff α > 1; E[1/c] = α/((α+1)·xm) always.
        EnvKind::IidPareto { alpha, .. } => {
            IntegrabilityClass { cbar_integrable: *alpha > 1.0, inv_c_integrable: true }
        }
        // c ≤ 1 so E[c] ≤ 1; E[1/c] = β/(β−1) finite iff β > 1.
        EnvKind::IidPower { beta } => {
            IntegrabilityClass { cbar_integrable: true, inv_c_integrable: *beta > 1.0 }
        }
    }
}
