//! Deterministic output writers: CSV tables, the JSON verification report,
//! and standalone SVG plots of every verification series.
//!
//! Every writer formats floats with Rust's shortest-roundtrip `{:?}`
//! notation and iterates in a fixed order, so rerunning a command with the
//! same configuration reproduces every output byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use cwlab_core::heat_kernel::{occupation, EnergySeq, KernelState};
use cwlab_core::limits::{VerificationRecord, VerifyReport};
use cwlab_core::walker::{EscapeSample, WalkEnsemble};
use cwlab_core::Environment;
use serde::Serialize;

/// `{:?}` for floats: shortest digits that round-trip, `NaN` spelled out,
/// exponents only where Rust's Debug uses them. One format everywhere keeps
/// reruns byte-identical.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `x,conductance,cbar` over the window [−radius, radius].
pub fn write_environment_csv(path: &Path, env: &Environment, radius: u64) -> io::Result<()> {
    let radius = radius.min(i64::MAX as u64) as i64;
    let mut text = String::from("x,conductance,cbar\n");
    for x in -radius..=radius {
        let _ = writeln!(text, "{x},{},{}", num(env.conductance(x)), num(env.cbar(x)));
    }
    fs::write(path, text)
}

/// `n,energy` with energy eₙ = ‖hₙ‖² in ℓ²(c̄), one row per computed step.
pub fn write_energies_csv(path: &Path, energies: &EnergySeq) -> io::Result<()> {
    let mut text = String::from("n,energy\n");
    for n in 0..energies.len() {
        let _ = writeln!(text, "{n},{}", num(energies.get(n)));
    }
    fs::write(path, text)
}

/// `x,h_value,occupation` over the parity-respecting support of a snapshot;
/// h_value is the c̄-density hₙ(x) and occupation the probability mass
/// hₙ(x)·c̄(x).
pub fn write_snapshot_csv(path: &Path, state: &KernelState, env: &Environment) -> io::Result<()> {
    let mut text = String::from("x,h_value,occupation\n");
    for (x, h) in state.support() {
        let _ = writeln!(text, "{x},{},{}", num(h), num(occupation(state, env, x)));
    }
    fs::write(path, text)
}

/// `x,count,frequency` over the nonzero atoms of an ensemble histogram,
/// positions ascending.
pub fn write_occupancy_csv(path: &Path, ens: &WalkEnsemble) -> io::Result<()> {
    let mut text = String::from("x,count,frequency\n");
    for (x, count) in ens.atoms() {
        let _ = writeln!(text, "{x},{count},{}", num(ens.frequency(x)));
    }
    fs::write(path, text)
}

/// One row of `escape.json`: closed-form and sampled escape probabilities
/// at level K.
#[derive(Serialize)]
pub struct EscapeRow {
    pub k: u64,
    pub exact: f64,
    pub mc: Option<f64>,
    pub stderr: Option<f64>,
    pub capped_fraction: Option<f64>,
}

impl EscapeRow {
    pub fn new(k: u64, exact: f64, sample: Option<EscapeSample>) -> EscapeRow {
        EscapeRow {
            k,
            exact,
            mc: sample.map(|s| s.probability),
            stderr: sample.map(|s| s.std_error),
            capped_fraction: sample.map(|s| s.capped_fraction),
        }
    }
}

pub fn write_escape_json(path: &Path, rows: &[EscapeRow]) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(rows).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text)
}

#[derive(Serialize)]
struct SummaryEntry {
    passed: bool,
    asserted: bool,
    detail: String,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    env: &'a str,
    all_passed: bool,
    summary: BTreeMap<String, SummaryEntry>,
    records: &'a [VerificationRecord],
}

/// The machine-readable verification report. Non-finite numbers serialize
/// as `null`; the summary maps each named check to its verdict.
pub fn write_report_json(path: &Path, report: &VerifyReport) -> io::Result<()> {
    let mut summary = BTreeMap::new();
    for outcome in &report.outcomes {
        let mut key = outcome.check.clone();
        let mut tag = 2u32;
        while summary.contains_key(&key) {
            key = format!("{}#{tag}", outcome.check);
            tag += 1;
        }
        summary.insert(
            key,
            SummaryEntry {
                passed: outcome.passed,
                asserted: outcome.asserted,
                detail: outcome.detail.clone(),
            },
        );
    }
    let doc = JsonReport {
        env: &report.env_id,
        all_passed: report.all_passed(),
        summary,
        records: &report.records,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text)
}

/// `check,n,observed,target,gap` in record order.
pub fn write_report_csv(path: &Path, records: &[VerificationRecord]) -> io::Result<()> {
    let mut text = String::from("check,n,observed,target,gap\n");
    for r in records {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.check,
            r.n,
            num(r.observed),
            num(r.target),
            num(r.gap)
        );
    }
    fs::write(path, text)
}

/// One plottable series: records sharing a check name and a δ/ε tag, in
/// emission order.
struct Series<'a> {
    check: &'a str,
    delta: f64,
    points: Vec<&'a VerificationRecord>,
}

/// Groups records into series by (check, δ-bits), preserving first
/// appearance order; series with fewer than two points are dropped since a
/// single measurement has nothing to plot.
fn group_series(records: &[VerificationRecord]) -> Vec<Series<'_>> {
    let mut series: Vec<Series<'_>> = Vec::new();
    for r in records {
        let key = (r.check.as_str(), r.delta.to_bits());
        match series.iter_mut().find(|s| (s.check, s.delta.to_bits()) == key) {
            Some(s) => s.points.push(r),
            None => series.push(Series { check: &r.check, delta: r.delta, points: vec![r] }),
        }
    }
    series.retain(|s| s.points.len() >= 2);
    series
}

fn series_file_name(s: &Series<'_>) -> String {
    if s.delta.is_finite() {
        let tag = if s.check.starts_with("concentration") {
            "eps"
        } else if s.check.starts_with("escape") {
            "se"
        } else {
            "delta"
        };
        // escape_mc smuggles the standard error through the δ slot; it
        // varies per point, so it names no file.
        if tag == "se" {
            s.check.to_owned() + ".svg"
        } else {
            format!("{}_{}_{:?}.svg", s.check, tag, s.delta)
        }
    } else {
        format!("{}.svg", s.check)
    }
}

/// Writes one SVG per series; returns the file names written. Escape-level
/// series reuse the δ slot for their standard error, so those group by
/// check name alone.
pub fn write_series_svgs(dir: &Path, records: &[VerificationRecord]) -> io::Result<Vec<String>> {
    // Regroup escape rows, whose δ is a per-point standard error rather
    // than a series tag.
    let mut names = Vec::new();
    let mut done: Vec<String> = Vec::new();
    let escape_series: Vec<Series<'_>> = ["escape_exact", "escape_mc"]
        .iter()
        .filter_map(|check| {
            let points: Vec<&VerificationRecord> =
                records.iter().filter(|r| r.check == *check).collect();
            (points.len() >= 2).then_some(Series { check, delta: f64::NAN, points })
        })
        .collect();
    let ordinary = group_series(records);
    for s in escape_series.iter().chain(ordinary.iter()) {
        if s.check.starts_with("escape") && s.delta.is_finite() {
            continue; // handled by the regrouped escape series
        }
        let name = series_file_name(s);
        if done.contains(&name) {
            continue;
        }
        let svg = render_series_svg(s);
        fs::write(dir.join(&name), svg)?;
        done.push(name.clone());
        names.push(name);
    }
    Ok(names)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const ML: f64 = 72.0; // left margin, room for y tick labels
const MR: f64 = 20.0;
const MT: f64 = 28.0;
const MB: f64 = 48.0;

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_owned()
    } else if v.abs() >= 0.01 && v.abs() < 10_000.0 {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_owned()
    } else {
        format!("{v:.1e}")
    }
}

/// A fixed-size log-x / linear-y plot: observed polyline with point
/// markers, dashed target line when the series has finite targets, axis
/// ticks at every scale. Pure geometry — no timestamps, no external
/// resources — so output is reproducible.
fn render_series_svg(s: &Series<'_>) -> String {
    let pts: Vec<(f64, f64)> = s
        .points
        .iter()
        .filter(|r| r.observed.is_finite())
        .map(|r| ((r.n.max(1) as f64).ln(), r.observed))
        .collect();
    let targets: Vec<(f64, f64)> = s
        .points
        .iter()
        .filter(|r| r.target.is_finite())
        .map(|r| ((r.n.max(1) as f64).ln(), r.target))
        .collect();

    let xs: Vec<f64> = s.points.iter().map(|r| (r.n.max(1) as f64).ln()).collect();
    let mut x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(x_min.is_finite() && x_max.is_finite()) {
        x_min = 0.0;
        x_max = 1.0;
    }
    if x_max - x_min < 1e-12 {
        x_min -= 1.0;
        x_max += 1.0;
    }

    let ys: Vec<f64> = pts.iter().map(|&(_, y)| y).chain(targets.iter().map(|&(_, y)| y)).collect();
    let mut y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(y_min.is_finite() && y_max.is_finite()) {
        y_min = 0.0;
        y_max = 1.0;
    }
    if y_max - y_min < 1e-300 {
        let pad = if y_max == 0.0 { 1.0 } else { y_max.abs() * 0.5 };
        y_min -= pad;
        y_max += pad;
    }
    let pad = (y_max - y_min) * 0.06;
    y_min -= pad;
    y_max += pad;

    let snap = |v: f64| (v * 100.0).round() / 100.0;
    let px = move |x: f64| snap(ML + (x - x_min) / (x_max - x_min) * (W - ML - MR));
    let py = move |y: f64| snap(H - MB - (y - y_min) / (y_max - y_min) * (H - MT - MB));

    let title = if s.delta.is_finite() && !s.check.starts_with("escape") {
        format!("{} ({:?})", s.check, s.delta)
    } else {
        s.check.to_owned()
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        ML + (W - ML - MR) / 2.0
    );

    // Axes.
    let _ = writeln!(
        svg,
        "<path d=\"M {ML} {MT} L {ML} {y0} L {x1} {y0}\" fill=\"none\" stroke=\"black\"/>",
        y0 = H - MB,
        x1 = W - MR
    );

    // X ticks: one per distinct scale, thinned to at most 12.
    let mut scales: Vec<u64> = s.points.iter().map(|r| r.n).collect();
    scales.dedup();
    let stride = scales.len().div_ceil(12).max(1);
    for (i, &n) in scales.iter().enumerate() {
        if i % stride != 0 && i + 1 != scales.len() {
            continue;
        }
        let x = px((n.max(1) as f64).ln());
        let _ = writeln!(
            svg,
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"black\"/>",
            y0 = H - MB,
            y1 = H - MB + 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{n}</text>",
            H - MB + 18.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">n</text>",
        ML + (W - ML - MR) / 2.0,
        H - 10.0
    );

    // Y ticks: five evenly spaced values.
    for i in 0..=4 {
        let v = y_min + (y_max - y_min) * (i as f64) / 4.0;
        let y = py(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{ML}\" y2=\"{y}\" stroke=\"black\"/>",
            ML - 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            ML - 8.0,
            y + 4.0,
            fmt_tick(v)
        );
    }

    // Target line (dashed) when the law names finite values.
    if targets.len() >= 2 {
        let path: Vec<String> =
            targets.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#888\" stroke-dasharray=\"6 4\"/>",
            path.join(" ")
        );
    }

    // Observed series.
    if pts.len() >= 2 {
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"1.5\"/>",
            path.join(" ")
        );
    }
    for &(x, y) in &pts {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#1f5fbf\"/>",
            px(x),
            py(y)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(check: &str, n: u64, observed: f64, target: f64, delta: f64) -> VerificationRecord {
        // Mirrors the library constructor, which is crate-private.
        let gap = if target.is_finite() { observed - target } else { f64::NAN };
        VerificationRecord { check: check.to_owned(), n, observed, target, gap, x0: 0, delta, window: 0 }
    }

    #[test]
    fn csv_floats_round_trip() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(1.0), "1.0");
        assert_eq!(num(2.5e-13), "2.5e-13");
    }

    #[test]
    fn series_grouping_respects_delta_and_order() {
        let records = vec![
            record("regularity", 64, 1.0, f64::NAN, 0.25),
            record("regularity", 64, 1.1, f64::NAN, 1.0),
            record("local_limit", 64, 0.8, 0.79, f64::NAN),
            record("regularity", 128, 0.9, f64::NAN, 0.25),
            record("regularity", 128, 1.0, f64::NAN, 1.0),
            record("local_limit", 128, 0.79, 0.79, f64::NAN),
            record("duality", 2000, 1e-15, 0.0, f64::NAN),
        ];
        let series = group_series(&records);
        let names: Vec<String> = series.iter().map(series_file_name).collect();
        assert_eq!(
            names,
            vec!["regularity_delta_0.25.svg", "regularity_delta_1.0.svg", "local_limit.svg"]
        );
        assert!(series.iter().all(|s| s.points.len() == 2));
    }

    #[test]
    fn svg_is_self_contained_markup() {
        let records = vec![
            record("local_limit", 64, 0.8, 0.79, f64::NAN),
            record("local_limit", 128, 0.79, 0.79, f64::NAN),
        ];
        let series = group_series(&records);
        let svg = render_series_svg(&series[0]);
        assert!(svg.starts_with("<svg "), "{svg}");
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
        assert!(!svg.contains("http://") || svg.contains("http://www.w3.org/2000/svg"));
    }
}
