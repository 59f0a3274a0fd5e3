//! Ensemble-level guarantees: sampled walks agree with the exact kernel in
//! total variation, escape frequencies agree with the closed form, and the
//! histogram invariants (conservation, parity, ordering) hold for any
//! admissible input.

mod common;

use common::{env, kind_menu};
use cwlab_core::heat_kernel::{run_with, RunOptions};
use cwlab_core::walker::{
    escape_probability_exact, escape_probability_mc, ks_distance, simulate,
    tv_distance_to_kernel,
};
use cwlab_core::{build_env, EnvKind, EnvSpec};
use proptest::prelude::*;

#[test]
fn ensembles_match_the_kernel_in_total_variation() {
    let steps = 100u64;
    let walkers = 1_000_000u64;
    for (label, kind) in kind_menu() {
        let e = env(kind, 1);
        let run = run_with(
            &e,
            0,
            steps,
            &RunOptions {
                snapshot_times: vec![steps],
                compute_energies: false,
                ..RunOptions::default()
            },
        )
        .unwrap();
        let ens = simulate(&e, steps, walkers, 0xacce5);
        let tv = tv_distance_to_kernel(&ens, &run.snapshots[0], &e);
        assert!(tv < 5e-3, "{label}: TV = {tv:.2e} with {walkers} walkers at n = {steps}");
    }
}

#[test]
fn escape_frequencies_match_the_conductance_formula() {
    let non_degenerate = [
        ("constant", EnvKind::Constant { kappa: 1.0 }),
        ("periodic", EnvKind::Periodic { cycle: vec![1.0, 2.0], phase: 0 }),
        ("lognormal", EnvKind::IidLognormal { m: 0.0, s: 1.0 }),
        (
            "markov",
            EnvKind::Markov {
                states: vec![1.0, 3.0],
                transition_matrix: vec![vec![0.5, 0.5], vec![0.25, 0.75]],
            },
        ),
    ];
    for (label, kind) in non_degenerate {
        let e = env(kind, 1);
        for k in [2u64, 5] {
            let exact = escape_probability_exact(&e, k);
            let sample = escape_probability_mc(&e, k, 100_000, 0xe5c + k);
            assert_eq!(sample.capped_fraction, 0.0, "{label}: capped trials at K = {k}");
            assert!(
                (sample.probability - exact).abs() <= 5.0 * sample.std_error + 1e-9,
                "{label}: K = {k}: mc {:.5} vs exact {exact:.5} (se {:.1e})",
                sample.probability,
                sample.std_error,
            );
        }
    }
}

fn cheap_kind() -> impl Strategy<Value = EnvKind> {
    prop_oneof![
        Just(EnvKind::Constant { kappa: 1.0 }),
        Just(EnvKind::Periodic { cycle: vec![1.0, 3.0, 0.5], phase: 1 }),
        Just(EnvKind::IidLognormal { m: 0.0, s: 1.0 }),
        Just(EnvKind::IidPareto { alpha: 0.5, xm: 1.0 }),
        Just(EnvKind::IidPower { beta: 0.5 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn histograms_conserve_walkers_and_parity(
        kind in cheap_kind(),
        seed in 0u64..50,
        master in 0u64..50,
        steps in 1u64..=12,
        walkers in 1u64..=300,
    ) {
        let e = build_env(EnvSpec { kind, seed }).unwrap();
        let ens = simulate(&e, steps, walkers, master);
        let n = steps as i64;

        let mut total = 0u64;
        for x in -n..=n {
            let count = ens.count_at(x);
            if (x + n) % 2 != 0 {
                prop_assert_eq!(count, 0, "off-parity site {} holds walkers", x);
            }
            total += count;
        }
        prop_assert_eq!(total, walkers);
        prop_assert_eq!(ens.count_at(n + 1), 0);
        prop_assert_eq!(ens.count_at(-n - 2), 0);

        let freq_sum: f64 = (-n..=n).map(|x| ens.frequency(x)).sum();
        prop_assert!((freq_sum - 1.0).abs() <= 1e-12);

        let atoms: Vec<(i64, u64)> = ens.atoms().collect();
        prop_assert!(atoms.windows(2).all(|w| w[0].0 < w[1].0), "atoms out of order");
        prop_assert!(atoms.iter().all(|&(_, c)| c > 0));
    }

    #[test]
    fn distribution_distances_stay_in_range(
        seed in 0u64..20,
        master in 0u64..20,
        steps in 2u64..=16,
        walkers in 10u64..=500,
        sigma2 in prop_oneof![Just(0.5f64), Just(1.0), Just(8.0 / 9.0)],
    ) {
        let e = build_env(EnvSpec { kind: EnvKind::IidLognormal { m: 0.0, s: 1.0 }, seed }).unwrap();
        let ens = simulate(&e, steps, walkers, master);
        let d = ks_distance(&ens, sigma2);
        prop_assert!((0.0..=1.0).contains(&d), "KS distance {} out of range", d);
    }
}
