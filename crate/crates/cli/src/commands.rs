use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use smflow::diagnostics::{run_compare, DiagnosticsReport, Escape};
use smflow::fields::io::encode_binary;
use smflow::flow::{evolve, Observation};
use smflow::verify::{run_verify, VerifyOptions};

use crate::config::{echo_text, RunConfig};
use crate::error::CliError;
use crate::manifest::OutputDir;

/// Contents of `report.json` written by `compare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareFile {
    /// `complete` or `escaped`.
    pub status: String,
    pub escape: Option<Escape>,
    /// `fitted`, or `not_applicable` when `Q₁ + Q₂` vanishes or too few samples remain.
    pub gronwall: String,
    pub report: DiagnosticsReport,
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.integrator.validate(&cfg.grid)?;
    let u0 = cfg.initial.build(cfg.grid);
    let mut csv = format!("{}\n", Observation::CSV_HEADER);
    let mut first: Option<Observation> = None;
    let mut last: Option<Observation> = None;
    let mut max_norm_drift: f64 = 0.0;
    let final_state = evolve(&u0, cfg.t_final, &cfg.integrator, cfg.stride, |s| {
        let o = Observation::of(s);
        csv.push_str(&o.csv_row());
        csv.push('\n');
        max_norm_drift = max_norm_drift.max(o.norm_drift);
        first.get_or_insert(o);
        last = Some(o);
    })?;
    let (first, last) = (
        first.expect("initial state observed"),
        last.expect("final state observed"),
    );
    let energy_drift = if first.energy > 0.0 {
        (last.energy - first.energy).abs() / first.energy
    } else {
        (last.energy - first.energy).abs()
    };
    let spin_drift = (0..3)
        .map(|i| (last.spin[i] - first.spin[i]).abs())
        .fold(0.0, f64::max);

    let mut out = OutputDir::create(&cfg.out)?;
    let echo = cfg.echo();
    out.write("config.txt", echo_text(&echo).as_bytes())?;
    out.write("observations.csv", csv.as_bytes())?;
    out.write("final.smap", &encode_binary(&final_state.u))?;
    let summary = json!({
        "t_final": final_state.time,
        "energy_initial": first.energy,
        "energy_final": last.energy,
        "energy_relative_drift": energy_drift,
        "max_norm_drift": max_norm_drift,
        "spin_drift": spin_drift,
    });
    let manifest = out.finish("simulate", echo, summary)?;
    println!("simulate: t = {} energy drift {energy_drift:.3e} |u|-1 {max_norm_drift:.3e} spin drift {spin_drift:.3e}", final_state.time);
    println!("wrote {}", manifest.display());
    Ok(())
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let outcome = run_compare(&cfg.compare_config())?;
    let report = outcome.report;
    let file = CompareFile {
        status: if outcome.escape.is_some() {
            "escaped"
        } else {
            "complete"
        }
        .to_string(),
        escape: outcome.escape,
        gronwall: if report.gronwall_c.is_some() {
            "fitted"
        } else {
            "not_applicable"
        }
        .to_string(),
        report,
    };
    let mut out = OutputDir::create(&cfg.out)?;
    let echo = cfg.echo();
    out.write("config.txt", echo_text(&echo).as_bytes())?;
    let json = serde_json::to_string_pretty(&file).expect("report serializes") + "\n";
    out.write("report.json", json.as_bytes())?;
    out.write("series.csv", file.report.series_csv().as_bytes())?;
    let r = &file.report;
    let summary = json!({
        "status": file.status,
        "samples": r.series.len(),
        "gronwall_c": r.gronwall_c,
        "gronwall_envelope_violations": r.gronwall_envelope_violations,
        "q1_inequality_violations": r.q1_inequality_violations,
        "max_consistency": r.max_consistency,
    });
    let manifest = out.finish("compare", echo, summary)?;
    match r.gronwall_c {
        Some(c) => println!(
            "compare: {} samples, C_fit = {c:.4}, envelope violations {}, Q1 inequality violations {}",
            r.series.len(),
            r.gronwall_envelope_violations.unwrap_or(0),
            r.q1_inequality_violations
        ),
        None if r.q_total().iter().all(|&q| q == 0.0) => println!(
            "compare: {} samples, Q1 + Q2 = 0 throughout, Gronwall fit not applicable",
            r.series.len()
        ),
        None => println!("compare: {} samples, too few to fit a Gronwall rate", r.series.len()),
    }
    println!("wrote {}", manifest.display());
    match file.escape {
        Some(e) => Err(CliError::Escape {
            t: e.t,
            distance: e.distance,
        }),
        None => Ok(()),
    }
}

pub fn verify(opts: &VerifyOptions, out_dir: &Path) -> Result<(), CliError> {
    let report = run_verify(opts)?;
    for c in &report.checks {
        println!("{}", c.line());
    }
    let mut out = OutputDir::create(out_dir)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    out.write("verify.json", json.as_bytes())?;
    let failed = report.failures().count();
    let config = [
        ("verify.seed", opts.seed.to_string()),
        ("verify.samples", opts.samples.to_string()),
        ("verify.flip_curvature", opts.flip_curvature.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    out.finish(
        "verify",
        config,
        json!({ "checks": report.checks.len(), "failed": failed }),
    )?;
    println!("{} checks, {} failed", report.checks.len(), failed);
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

/// Header of the plot data file. Rows are `t Q1 Q2 log(Q1+Q2) bound` with
/// `bound = Q(0)·exp(2·C·t)`; the log column reads `-inf` where `Q1 + Q2 = 0`
/// and `C` is taken as 0 when no fit applies.
pub const PLOT_HEADER: &str = "# t Q1 Q2 log(Q1+Q2) bound\n";

pub fn plot_data(file: &CompareFile) -> String {
    let r = &file.report;
    let c = r.gronwall_c.unwrap_or(0.0);
    let q0 = r.series.first().map(|s| s.q1 + s.q2).unwrap_or(0.0);
    let mut text = String::from(PLOT_HEADER);
    for s in &r.series {
        let q = s.q1 + s.q2;
        let log = if q > 0.0 {
            format!("{:.12e}", q.ln())
        } else {
            "-inf".to_string()
        };
        let bound = q0 * (2.0 * c * s.t).exp();
        text.push_str(&format!(
            "{:.12e} {:.12e} {:.12e} {} {:.12e}\n",
            s.t, s.q1, s.q2, log, bound
        ));
    }
    text
}

pub fn emit_plotdata(report: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(report)
        .map_err(|e| CliError::Config(format!("cannot read report {}: {e}", report.display())))?;
    let file: CompareFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("corrupt report {}: {e}", report.display())))?;
    let target = match out {
        Some(p) => p.to_path_buf(),
        None => report.with_file_name("plotdata.txt"),
    };
    std::fs::write(&target, plot_data(&file)).map_err(|e| CliError::io(&target, e))?;
    println!(
        "wrote {} ({} rows)",
        target.display(),
        file.report.series.len()
    );
    Ok(target)
}
