use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::engine::{run_scenario, Counts, LinkRecord, RunOptions, RunOutput, SUMMARY_METRICS};
use super::setup::Scenario;
use super::ScenarioError;

/// Metrics with a histogram file, taken as absolute values.
pub const HISTOGRAM_METRICS: [&str; 7] = ["d_total", "d_i1_los", "d_i2", "d_i3", "d_len", "d_i1_bend", "uere"];

/// Histogram bins per decade and the decade span, m.
const HIST_PER_DECADE: i32 = 10;
const HIST_MIN_EXP: i32 = -4;
const HIST_MAX_EXP: i32 = 3;

fn io_err(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Io(format!("{}: {e}", path.display()))
}

/// Creates `outdir` and proves it writable.
pub fn preflight(outdir: &Path) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(outdir).map_err(|e| io_err(outdir, e))?;
    let probe = outdir.join(".write_probe");
    File::create(&probe)
        .and_then(|mut f| f.write_all(b"ok"))
        .map_err(|e| io_err(outdir, e))?;
    std::fs::remove_file(&probe).map_err(|e| io_err(&probe, e))
}

pub fn summary_file_name(kp: f64, r12: f64, label: &str) -> String {
    format!("summary_{kp}_{r12}_{label}.csv")
}

#[derive(Serialize)]
struct RecordRow<'a> {
    epoch_s: f64,
    epoch_utc: String,
    kp: f64,
    r12: f64,
    frequency: &'a str,
    frequency_hz: f64,
    tx: &'a str,
    rx: &'a str,
    tangential_altitude_km: f64,
    bin_lo_km: Option<f64>,
    d_total_m: f64,
    d_i1_los_m: f64,
    d_i2_m: f64,
    d_i3_m: f64,
    d_len_m: f64,
    d_i1_bend_m: f64,
    tec_los: f64,
    tec_bend: f64,
    eirp_dbw: f64,
    tx_gain_dbi: f64,
    rx_gain_dbi: f64,
    tx_off_boresight_deg: f64,
    rx_off_boresight_deg: f64,
    fspl_db: f64,
    c_n0_dbhz: f64,
    dll_sigma_m: f64,
    uere_mean_m: f64,
    uere_p95_m: f64,
    uere_p99_m: f64,
    outer_iterations: usize,
    miss_m: f64,
    stop_reason: String,
}

fn record_row<'a>(r: &'a LinkRecord, edges: &[f64]) -> RecordRow<'a> {
    let d = &r.delays;
    let b = &r.budget;
    RecordRow {
        epoch_s: r.epoch.seconds(),
        epoch_utc: r.epoch.to_calendar(),
        kp: r.kp,
        r12: r.r12,
        frequency: &r.frequency,
        frequency_hz: r.frequency_hz,
        tx: &r.tx,
        rx: &r.rx,
        tangential_altitude_km: r.tangential_altitude_km,
        bin_lo_km: r.bin.map(|i| edges[i]),
        d_total_m: d.d_total,
        d_i1_los_m: d.d_i1_los,
        d_i2_m: d.d_i2,
        d_i3_m: d.d_i3,
        d_len_m: d.d_len,
        d_i1_bend_m: d.d_i1_bend,
        tec_los: d.tec_los,
        tec_bend: d.tec_bend,
        eirp_dbw: b.eirp_dbw,
        tx_gain_dbi: b.tx_gain_dbi,
        rx_gain_dbi: b.rx_gain_dbi,
        tx_off_boresight_deg: b.tx_off_boresight_deg,
        rx_off_boresight_deg: b.rx_off_boresight_deg,
        fspl_db: b.fspl_db,
        c_n0_dbhz: b.c_n0_dbhz,
        dll_sigma_m: r.dll_sigma_m,
        uere_mean_m: r.uere.mean,
        uere_p95_m: r.uere.p95,
        uere_p99_m: r.uere.p99,
        outer_iterations: r.outer_iterations,
        miss_m: r.miss_m,
        stop_reason: serde_json::to_value(r.stop_reason)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
    }
}

/// Shortest round-trip rendering, exponent form for very small or large
/// magnitudes.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, ScenarioError> {
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

fn histogram_edges() -> Vec<f64> {
    let mut edges = vec![0.0];
    for k in 0..=(HIST_MAX_EXP - HIST_MIN_EXP) * HIST_PER_DECADE {
        edges.push(10f64.powf(HIST_MIN_EXP as f64 + k as f64 / HIST_PER_DECADE as f64));
    }
    edges.push(f64::INFINITY);
    edges
}

fn histogram_value(r: &LinkRecord, name: &str) -> f64 {
    let d = &r.delays;
    match name {
        "d_total" => d.d_total,
        "d_i1_los" => d.d_i1_los,
        "d_i2" => d.d_i2,
        "d_i3" => d.d_i3,
        "d_len" => d.d_len,
        "d_i1_bend" => d.d_i1_bend,
        "uere" => r.uere.mean,
        _ => unreachable!("unknown histogram metric {name}"),
    }
    .abs()
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    workers: usize,
    wall_time_s: f64,
    counts: &'a Counts,
    conserved: bool,
    convergence: &'a super::engine::ConvergenceStats,
    outputs: Vec<String>,
    config: &'a super::config::ScenarioConfig,
}

/// Writes records, diagnostics, per-group summaries, histograms and the run
/// manifest into `outdir`. Returns the files written.
pub fn emit_outputs(
    sc: &Scenario,
    out: &RunOutput,
    outdir: &Path,
    wall_time_s: f64,
) -> Result<Vec<PathBuf>, ScenarioError> {
    let edges = &sc.config.bin_edges_km;
    let mut written = Vec::new();

    let path = outdir.join("records.csv");
    let mut w = csv_writer(&path)?;
    if out.records.is_empty() {
        // Header only, so consumers always see the column layout.
        w.write_record(RECORD_COLUMNS).map_err(|e| io_err(&path, e))?;
    }
    for r in &out.records {
        w.serialize(record_row(r, edges)).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    written.push(path);

    let path = outdir.join("diagnostics.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "epoch_s", "kp", "r12", "frequency", "tx", "rx", "tangential_altitude_km", "status",
        "outer_iterations", "miss_m", "detail",
    ])
    .map_err(|e| io_err(&path, e))?;
    for d in &out.diagnostics {
        w.write_record([
            num(d.epoch.seconds()),
            num(d.kp),
            num(d.r12),
            d.frequency.clone(),
            d.tx.clone(),
            d.rx.clone(),
            num(d.tangential_altitude_km),
            d.status.to_string(),
            d.outer_iterations.map(|v| v.to_string()).unwrap_or_default(),
            d.miss_m.map(num).unwrap_or_default(),
            d.detail.clone(),
        ])
        .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    written.push(path);

    for s in &out.summaries {
        let path = outdir.join(summary_file_name(s.kp, s.r12, &s.frequency));
        let mut w = csv_writer(&path)?;
        let mut header = vec!["bin_lo_km".to_string(), "bin_hi_km".into(), "count".into()];
        for m in SUMMARY_METRICS {
            for stat in ["mean", "p95", "p99"] {
                header.push(format!("{m}_{stat}"));
            }
        }
        w.write_record(&header).map_err(|e| io_err(&path, e))?;
        for row in &s.rows {
            let mut fields = vec![num(row.lo_km), num(row.hi_km), row.count.to_string()];
            for m in &row.metrics {
                fields.extend([num(m.mean), num(m.p95), num(m.p99)]);
            }
            w.write_record(&fields).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        written.push(path);
    }

    if !out.records.is_empty() {
        let hist = histogram_edges();
        for name in HISTOGRAM_METRICS {
            let path = outdir.join(format!("histogram_{name}.csv"));
            let mut w = csv_writer(&path)?;
            w.write_record(["kp", "r12", "frequency", "lo_m", "hi_m", "count"])
                .map_err(|e| io_err(&path, e))?;
            for s in &out.summaries {
                let mut counts = vec![0usize; hist.len() - 1];
                for r in out
                    .records
                    .iter()
                    .filter(|r| r.kp == s.kp && r.r12 == s.r12 && r.frequency == s.frequency)
                {
                    let v = histogram_value(r, name);
                    let k = hist.partition_point(|&e| e <= v).clamp(1, hist.len() - 1) - 1;
                    counts[k] += 1;
                }
                for (k, c) in counts.iter().enumerate() {
                    w.write_record([
                        num(s.kp),
                        num(s.r12),
                        s.frequency.clone(),
                        num(hist[k]),
                        num(hist[k + 1]),
                        c.to_string(),
                    ])
                    .map_err(|e| io_err(&path, e))?;
                }
            }
            w.flush().map_err(|e| io_err(&path, e))?;
            written.push(path);
        }
    }

    let path = outdir.join("run_manifest.json");
    let mut outputs: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    outputs.push("run_manifest.json".into());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: sc.config.seed,
        workers: out.workers,
        wall_time_s,
        counts: &out.counts,
        conserved: out.counts.is_conserved(),
        convergence: &out.convergence,
        outputs,
        config: &sc.config,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Column order of `records.csv`.
pub const RECORD_COLUMNS: [&str; 32] = [
    "epoch_s",
    "epoch_utc",
    "kp",
    "r12",
    "frequency",
    "frequency_hz",
    "tx",
    "rx",
    "tangential_altitude_km",
    "bin_lo_km",
    "d_total_m",
    "d_i1_los_m",
    "d_i2_m",
    "d_i3_m",
    "d_len_m",
    "d_i1_bend_m",
    "tec_los",
    "tec_bend",
    "eirp_dbw",
    "tx_gain_dbi",
    "rx_gain_dbi",
    "tx_off_boresight_deg",
    "rx_off_boresight_deg",
    "fspl_db",
    "c_n0_dbhz",
    "dll_sigma_m",
    "uere_mean_m",
    "uere_p95_m",
    "uere_p99_m",
    "outer_iterations",
    "miss_m",
    "stop_reason",
];

#[derive(Debug)]
pub struct RunReport {
    pub output: RunOutput,
    pub files: Vec<PathBuf>,
    pub wall_time_s: f64,
}

/// Preflights `outdir`, runs the scenario and writes every output. A run in
/// which solves were attempted but none produced a record still writes its
/// outputs and then returns [`ScenarioError::AllLinksFailed`].
pub fn execute(sc: &Scenario, outdir: &Path, opts: &RunOptions) -> Result<RunReport, ScenarioError> {
    preflight(outdir)?;
    let t0 = Instant::now();
    let output = run_scenario(sc, opts)?;
    let wall_time_s = t0.elapsed().as_secs_f64();
    let files = emit_outputs(sc, &output, outdir, wall_time_s)?;
    let c = output.counts;
    if c.emitted == 0 && c.non_converged + c.failed > 0 {
        return Err(ScenarioError::AllLinksFailed {
            attempted: c.non_converged + c.failed,
            non_converged: c.non_converged,
            failed: c.failed,
        });
    }
    Ok(RunReport {
        output,
        files,
        wall_time_s,
    })
}
