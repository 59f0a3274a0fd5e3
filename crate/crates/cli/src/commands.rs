//! The five run modes: sample an environment window, iterate the heat
//! kernel, release a walker ensemble, run the verification battery, or all
//! four in sequence over the same environment.
//!
//! All Monte Carlo work derives from master seed 1 salted with the
//! environment seed, matching the verification battery, so the `walk`
//! outputs are cross-checkable against `verify` records.

use std::io;
use std::path::{Path, PathBuf};

use cwlab_core::heat_kernel::{run_with, KernelError, RunOptions};
use cwlab_core::limits::{verify_environment, VerifyConfig, VerifyReport};
use cwlab_core::rng::salted_seed;
use cwlab_core::walker::{escape_probability_mc, escape_probability_exact, simulate};
use cwlab_core::{integrability_class, Environment};

use crate::config::{Command, RunConfig};
use crate::outputs;

pub const MASTER_SEED: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_owned(), source }
}

/// What a run leaves behind: the files written and, when the command runs
/// the verification battery, its report.
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub report: Option<VerifyReport>,
}

impl RunOutcome {
    /// False only when a verification ran and an asserted check failed.
    pub fn all_passed(&self) -> bool {
        self.report.as_ref().is_none_or(VerifyReport::all_passed)
    }
}

/// Runs the configured command; `out` must already exist.
pub fn run(cfg: &RunConfig, env: &Environment, out: &Path) -> Result<RunOutcome, RunError> {
    let mut outcome = RunOutcome { files: Vec::new(), report: None };
    match cfg.command {
        Command::EnvSample => env_sample(cfg, env, out, &mut outcome)?,
        Command::Kernel => kernel(cfg, env, out, &mut outcome)?,
        Command::Walk => walk(cfg, env, out, &mut outcome)?,
        Command::Verify => verify(cfg, env, out, &mut outcome)?,
        Command::All => {
            env_sample(cfg, env, out, &mut outcome)?;
            kernel(cfg, env, out, &mut outcome)?;
            walk(cfg, env, out, &mut outcome)?;
            verify(cfg, env, out, &mut outcome)?;
        }
    }
    Ok(outcome)
}

fn push(outcome: &mut RunOutcome, path: PathBuf) {
    outcome.files.push(path);
}

/// `environment.csv`: the conductance field over [−n_max, n_max], the
/// window a length-n_max run can reach.
fn env_sample(
    cfg: &RunConfig,
    env: &Environment,
    out: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunError> {
    let path = out.join("environment.csv");
    outputs::write_environment_csv(&path, env, cfg.n_max).map_err(io_at(&path))?;
    push(outcome, path);
    Ok(())
}

/// `energies.csv` for every step up to n_max plus `snapshot_<t>.csv` at
/// each schedule time.
fn kernel(
    cfg: &RunConfig,
    env: &Environment,
    out: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunError> {
    let opts = RunOptions { snapshot_times: cfg.schedule.clone(), ..RunOptions::default() };
    let run = run_with(env, cfg.x0, cfg.n_max, &opts)?;
    let path = out.join("energies.csv");
    outputs::write_energies_csv(&path, &run.energies).map_err(io_at(&path))?;
    push(outcome, path);
    for state in &run.snapshots {
        let path = out.join(format!("snapshot_{}.csv", state.time));
        outputs::write_snapshot_csv(&path, state, env).map_err(io_at(&path))?;
        push(outcome, path);
    }
    Ok(())
}

/// `occupancy.csv` for an n_max-step ensemble and `escape.json` over the
/// configured levels. Monte Carlo escape is skipped (null in the JSON) when
/// a mean in the null-recurrence criterion diverges, because excursions
/// then have no useful step budget; the closed-form value is always
/// reported.
fn walk(
    cfg: &RunConfig,
    env: &Environment,
    out: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunError> {
    let seed_base = salted_seed(MASTER_SEED, env.seed());
    let ens = simulate(env, cfg.n_max, cfg.walkers, salted_seed(seed_base, 0x71));
    let path = out.join("occupancy.csv");
    outputs::write_occupancy_csv(&path, &ens).map_err(io_at(&path))?;
    push(outcome, path);

    let class = integrability_class(env.spec());
    let sample_mc = class.cbar_integrable && class.inv_c_integrable;
    let rows: Vec<outputs::EscapeRow> = cfg
        .escape_levels
        .iter()
        .map(|&k| {
            let exact = escape_probability_exact(env, k);
            let sample = sample_mc.then(|| {
                escape_probability_mc(env, k, cfg.walkers, salted_seed(seed_base, 0xe5c0 + k))
            });
            outputs::EscapeRow::new(k, exact, sample)
        })
        .collect();
    let path = out.join("escape.json");
    outputs::write_escape_json(&path, &rows).map_err(io_at(&path))?;
    push(outcome, path);
    Ok(())
}

/// Builds the battery configuration for this run: user scales and
/// tolerance overrides, identity-sweep horizons capped at n_max.
pub fn verify_config(cfg: &RunConfig) -> VerifyConfig {
    let d = VerifyConfig::default();
    VerifyConfig {
        x0: cfg.x0,
        schedule: cfg.schedule.clone(),
        duality_horizon: d.duality_horizon.min(cfg.n_max),
        green_horizon: d.green_horizon.min(cfg.n_max),
        cm_depth: (d.cm_depth.0.min(cfg.n_max), d.cm_depth.1),
        nash_horizon: d.nash_horizon.min(cfg.n_max),
        walkers: cfg.walkers,
        escape_levels: cfg.escape_levels.clone(),
        deltas: cfg.deltas.clone(),
        clt_n: d.clt_n.min(cfg.n_max),
        tv_steps: d.tv_steps.min(cfg.n_max),
        master_seed: MASTER_SEED,
        band_margin: cfg.tolerances.band_margin.unwrap_or(d.band_margin),
        llt_tol_deterministic: cfg.tolerances.llt_deterministic.unwrap_or(d.llt_tol_deterministic),
        llt_tol_random: cfg.tolerances.llt_random.unwrap_or(d.llt_tol_random),
        ks_tol_deterministic: cfg.tolerances.ks_deterministic.unwrap_or(d.ks_tol_deterministic),
        ks_tol_random: cfg.tolerances.ks_random.unwrap_or(d.ks_tol_random),
        tv_tol: cfg.tolerances.tv.unwrap_or(d.tv_tol),
        ..d
    }
}

/// `report.json`, `report.csv`, and one SVG per verification series. The
/// report files are written even when asserted checks fail — the JSON is
/// the machine-readable failure list.
fn verify(
    cfg: &RunConfig,
    env: &Environment,
    out: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunError> {
    let report = verify_environment(env, &verify_config(cfg));

    let path = out.join("report.json");
    outputs::write_report_json(&path, &report).map_err(io_at(&path))?;
    push(outcome, path);

    let path = out.join("report.csv");
    outputs::write_report_csv(&path, &report.records).map_err(io_at(&path))?;
    push(outcome, path);

    for name in outputs::write_series_svgs(out, &report.records).map_err(io_at(out))? {
        push(outcome, out.join(name));
    }

    outcome.report = Some(report);
    Ok(())
}
