//! Shared fixtures: one representative environment per kind, at the
//! parameters the verification battery targets.

use cwlab_core::{build_env, EnvKind, EnvSpec, Environment};

/// The six standard kinds: two deterministic media, two non-degenerate
/// random ones, and the two degenerate tails.
pub fn kind_menu() -> Vec<(&'static str, EnvKind)> {
    vec![
        ("constant", EnvKind::Constant { kappa: 1.0 }),
        ("periodic", EnvKind::Periodic { cycle: vec![1.0, 2.0], phase: 0 }),
        ("lognormal", EnvKind::IidLognormal { m: 0.0, s: 1.0 }),
        ("pareto", EnvKind::IidPareto { alpha: 0.5, xm: 1.0 }),
        ("power", EnvKind::IidPower { beta: 0.5 }),
        (
            "markov",
            EnvKind::Markov {
                states: vec![1.0, 3.0],
                transition_matrix: vec![vec![0.5, 0.5], vec![0.25, 0.75]],
            },
        ),
    ]
}

pub fn env(kind: EnvKind, seed: u64) -> Environment {
    build_env(EnvSpec { kind, seed }).expect("menu specs are valid")
}
