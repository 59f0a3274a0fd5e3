//! Run configuration: a TOML document with a `command`, an `[env]` section
//! describing the conductance field, optional run-scale keys, and an
//! optional `[tolerances]` section overriding the asserted margins.
//!
//! ```text
//! command = "verify"        # env-sample | kernel | walk | verify | all
//! n_max   = 16384           # largest kernel time any run may use
//! # schedule = [64, 128, ...]   defaults to powers of two 2^6..2^14 ≤ n_max
//! # x0 = 0                      observation site (even)
//! # deltas = [0.25, 1.0]        ball-radius fractions for regularity
//! # walkers = 1000000           Monte Carlo ensemble size
//! # escape_levels = [1, 2, 5, 10]
//! # out = "out"                 output directory
//!
//! [env]
//! kind = "periodic"         # constant | periodic | iid_lognormal |
//!                           # iid_pareto | iid_power | markov
//! seed = 1
//! cycle = [1.0, 2.0]        # parameters of the chosen kind only
//! phase = 0
//!
//! [tolerances]              # optional; every entry must be positive
//! band_margin = 0.10
//! ```
//!
//! Unknown keys anywhere are rejected with the parser's line/column
//! diagnostics; semantic violations name the offending key path
//! (`env.kappa`, `schedule`, ...).

use std::path::PathBuf;

use cwlab_core::{EnvKind, EnvSpec};
use serde::Deserialize;

/// What a run does; `all` chains the other four over one environment.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    EnvSample,
    Kernel,
    Walk,
    Verify,
    All,
}

/// Overrides for the asserted margins of the verification battery. Every
/// value must be positive; `band_margin` must also stay below 1.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub band_margin: Option<f64>,
    pub llt_deterministic: Option<f64>,
    pub llt_random: Option<f64>,
    pub ks_deterministic: Option<f64>,
    pub ks_random: Option<f64>,
    pub tv: Option<f64>,
}

/// A validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub spec: EnvSpec,
    pub n_max: u64,
    pub schedule: Vec<u64>,
    pub x0: i64,
    pub deltas: Vec<f64>,
    pub walkers: u64,
    pub escape_levels: Vec<u64>,
    pub out: PathBuf,
    pub tolerances: Tolerances,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// Syntax or unknown-key error, with the parser's line/column context.
    #[error("{0}")]
    Parse(String),
    /// A well-formed document that violates a semantic rule.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_owned(), message: message.into() }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Command,
    env: EnvSection,
    n_max: Option<u64>,
    schedule: Option<Vec<u64>>,
    x0: Option<i64>,
    deltas: Option<Vec<f64>>,
    walkers: Option<u64>,
    escape_levels: Option<Vec<u64>>,
    out: Option<PathBuf>,
    #[serde(default)]
    tolerances: Tolerances,
}

/// The `[env]` section carries `kind`, `seed`, and exactly the parameters
/// of that kind; any other parameter key is a semantic error naming the
/// key path.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvSection {
    kind: String,
    #[serde(default)]
    seed: u64,
    kappa: Option<f64>,
    cycle: Option<Vec<f64>>,
    phase: Option<i64>,
    m: Option<f64>,
    s: Option<f64>,
    alpha: Option<f64>,
    xm: Option<f64>,
    beta: Option<f64>,
    states: Option<Vec<f64>>,
    transition_matrix: Option<Vec<Vec<f64>>>,
}

impl EnvSection {
    /// Which parameter keys each kind consumes.
    fn parameter_names(kind: &str) -> &'static [&'static str] {
        match kind {
            "constant" => &["kappa"],
            "periodic" => &["cycle", "phase"],
            "iid_lognormal" => &["m", "s"],
            "iid_pareto" => &["alpha", "xm"],
            "iid_power" => &["beta"],
            "markov" => &["states", "transition_matrix"],
            _ => &[],
        }
    }

    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        if self.kappa.is_some() {
            keys.push("kappa");
        }
        if self.cycle.is_some() {
            keys.push("cycle");
        }
        if self.phase.is_some() {
            keys.push("phase");
        }
        if self.m.is_some() {
            keys.push("m");
        }
        if self.s.is_some() {
            keys.push("s");
        }
        if self.alpha.is_some() {
            keys.push("alpha");
        }
        if self.xm.is_some() {
            keys.push("xm");
        }
        if self.beta.is_some() {
            keys.push("beta");
        }
        if self.states.is_some() {
            keys.push("states");
        }
        if self.transition_matrix.is_some() {
            keys.push("transition_matrix");
        }
        keys
    }

    fn require<T: Copy>(&self, field: Option<T>, key: &str) -> Result<T, ConfigError> {
        field.ok_or_else(|| {
            invalid(&format!("env.{key}"), format!("required for kind \"{}\"", self.kind))
        })
    }

    fn to_spec(&self) -> Result<EnvSpec, ConfigError> {
        let allowed = Self::parameter_names(&self.kind);
        if allowed.is_empty() {
            return Err(invalid(
                "env.kind",
                format!(
                    "unknown kind \"{}\" (expected constant, periodic, iid_lognormal, iid_pareto, iid_power, or markov)",
                    self.kind
                ),
            ));
        }
        for key in self.present() {
            if !allowed.contains(&key) {
                return Err(invalid(
                    &format!("env.{key}"),
                    format!("not a parameter of kind \"{}\"", self.kind),
                ));
            }
        }
        let kind = match self.kind.as_str() {
            "constant" => EnvKind::Constant { kappa: self.require(self.kappa, "kappa")? },
            "periodic" => EnvKind::Periodic {
                cycle: self
                    .cycle
                    .clone()
                    .ok_or_else(|| invalid("env.cycle", "required for kind \"periodic\""))?,
                phase: self.phase.unwrap_or(0),
            },
            "iid_lognormal" => EnvKind::IidLognormal {
                m: self.require(self.m, "m")?,
                s: self.require(self.s, "s")?,
            },
            "iid_pareto" => EnvKind::IidPareto {
                alpha: self.require(self.alpha, "alpha")?,
                xm: self.require(self.xm, "xm")?,
            },
            "iid_power" => EnvKind::IidPower { beta: self.require(self.beta, "beta")? },
            "markov" => EnvKind::Markov {
                states: self
                    .states
                    .clone()
                    .ok_or_else(|| invalid("env.states", "required for kind \"markov\""))?,
                transition_matrix: self.transition_matrix.clone().ok_or_else(|| {
                    invalid("env.transition_matrix", "required for kind \"markov\"")
                })?,
            },
            _ => unreachable!("kind screened above"),
        };
        let spec = EnvSpec { kind, seed: self.seed };
        // Field-level screening first, so rejections name the key path.
        match &spec.kind {
            EnvKind::Constant { kappa } => positive("env.kappa", *kappa)?,
            EnvKind::Periodic { cycle, .. } => {
                if cycle.is_empty() {
                    return Err(invalid("env.cycle", "must not be empty"));
                }
                for &v in cycle {
                    positive("env.cycle", v)?;
                }
            }
            EnvKind::IidLognormal { s, .. } => positive("env.s", *s)?,
            EnvKind::IidPareto { alpha, xm } => {
                positive("env.alpha", *alpha)?;
                positive("env.xm", *xm)?;
            }
            EnvKind::IidPower { beta } => positive("env.beta", *beta)?,
            EnvKind::Markov { states, .. } => {
                for &v in states {
                    positive("env.states", v)?;
                }
            }
        }
        // Full structural validation (matrix stochasticity, irreducibility,
        // overflow guards) with the library's diagnostics.
        spec.validate().map_err(|e| invalid("env", e.to_string()))?;
        Ok(spec)
    }
}

fn positive(path: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive (got {value})")))
    }
}

/// Default schedule: powers of two from 2⁶ up to 2¹⁴, truncated to n_max;
/// if n_max is below 2⁶ the schedule degenerates to the single scale n_max.
fn default_schedule(n_max: u64) -> Vec<u64> {
    let dyadic: Vec<u64> = (6u32..=14).map(|j| 1u64 << j).filter(|&n| n <= n_max).collect();
    if dyadic.is_empty() {
        vec![n_max]
    } else {
        dyadic
    }
}

const DEFAULT_N_MAX: u64 = 1 << 14;

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let spec = raw.env.to_spec()?;

    let n_max = raw.n_max.unwrap_or(DEFAULT_N_MAX);
    if n_max == 0 {
        return Err(invalid("n_max", "must be at least 1"));
    }

    let schedule = raw.schedule.unwrap_or_else(|| default_schedule(n_max));
    if schedule.is_empty() {
        return Err(invalid("schedule", "must not be empty"));
    }
    for pair in schedule.windows(2) {
        if pair[1] <= pair[0] {
            return Err(invalid(
                "schedule",
                format!("must be strictly increasing ({} follows {})", pair[1], pair[0]),
            ));
        }
    }
    if schedule[0] == 0 {
        return Err(invalid("schedule", "scales start at 1"));
    }
    let top = *schedule.last().expect("checked non-empty");
    if top > n_max {
        return Err(invalid("schedule", format!("entry {top} exceeds n_max = {n_max}")));
    }

    let x0 = raw.x0.unwrap_or(0);
    if x0 % 2 != 0 {
        return Err(invalid("x0", "must be even (the walk sits on one parity class)"));
    }

    let deltas = raw.deltas.unwrap_or_else(|| vec![0.25, 1.0]);
    if deltas.is_empty() {
        return Err(invalid("deltas", "must not be empty"));
    }
    for &d in &deltas {
        if !(d.is_finite() && d > 0.0) {
            return Err(invalid("deltas", format!("every entry must be positive (got {d})")));
        }
    }

    let walkers = raw.walkers.unwrap_or(1_000_000);
    if walkers == 0 {
        return Err(invalid("walkers", "must be at least 1"));
    }

    let escape_levels = raw.escape_levels.unwrap_or_else(|| vec![1, 2, 5, 10]);
    for &k in &escape_levels {
        if k == 0 {
            return Err(invalid("escape_levels", "levels start at K = 1"));
        }
    }

    for (key, value) in [
        ("band_margin", raw.tolerances.band_margin),
        ("llt_deterministic", raw.tolerances.llt_deterministic),
        ("llt_random", raw.tolerances.llt_random),
        ("ks_deterministic", raw.tolerances.ks_deterministic),
        ("ks_random", raw.tolerances.ks_random),
        ("tv", raw.tolerances.tv),
    ] {
        if let Some(v) = value {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    &format!("tolerances.{key}"),
                    format!("must be positive (got {v})"),
                ));
            }
        }
    }
    if let Some(m) = raw.tolerances.band_margin {
        if m >= 1.0 {
            return Err(invalid("tolerances.band_margin", "must stay below 1"));
        }
    }

    Ok(RunConfig {
        command: raw.command,
        spec,
        n_max,
        schedule,
        x0,
        deltas,
        walkers,
        escape_levels,
        out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
        tolerances: raw.tolerances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
command = \"kernel\"
n_max = 100

[env]
kind = \"constant\"
kappa = 1.0
";

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.command, Command::Kernel);
        assert_eq!(cfg.n_max, 100);
        assert_eq!(cfg.schedule, vec![64]);
        assert_eq!(cfg.spec.to_string(), "constant(kappa=1)#0");
        assert_eq!(cfg.walkers, 1_000_000);
        assert_eq!(cfg.out, PathBuf::from("out"));
    }

    #[test]
    fn negative_kappa_is_rejected_by_key_path() {
        let text = MINIMAL.replace("kappa = 1.0", "kappa = -1.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().starts_with("env.kappa:"), "{err}");
    }

    #[test]
    fn schedule_beyond_n_max_is_rejected() {
        let text = format!("schedule = [50, 200]\n{MINIMAL}");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("exceeds n_max"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = format!("frobnicate = 3\n{MINIMAL}");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("frobnicate") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn foreign_parameters_are_rejected_by_key_path() {
        let text = format!("{MINIMAL}\n[env.extra]\n");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL.replace("kappa = 1.0", "kappa = 1.0\nalpha = 0.5");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().starts_with("env.alpha:"), "{err}");
    }

    #[test]
    fn zero_walkers_is_rejected() {
        let text = format!("walkers = 0\n{}", MINIMAL.replace("kernel", "walk"));
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().starts_with("walkers:"), "{err}");
    }

    #[test]
    fn odd_observation_site_is_rejected() {
        let text = format!("x0 = 3\n{MINIMAL}");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().starts_with("x0:"), "{err}");
    }

    #[test]
    fn tolerances_must_be_positive() {
        let text = format!("{MINIMAL}[tolerances]\ntv = 0.0\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().starts_with("tolerances.tv:"), "{err}");
    }

    #[test]
    fn markov_section_round_trips() {
        let text = "\
command = \"verify\"

[env]
kind = \"markov\"
seed = 3
states = [1.0, 3.0]
transition_matrix = [[0.5, 0.5], [0.25, 0.75]]
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.spec.to_string(), "markov(states=2)#3");
        assert_eq!(cfg.schedule.len(), 9);
    }

    #[test]
    fn default_schedule_is_dyadic_within_n_max() {
        assert_eq!(default_schedule(1 << 14).len(), 9);
        assert_eq!(default_schedule(300), vec![64, 128, 256]);
        assert_eq!(default_schedule(10), vec![10]);
    }
}
