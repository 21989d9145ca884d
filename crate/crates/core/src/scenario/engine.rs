use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::links::{link_geometry, LinkGeometry, Visibility};
use super::setup::Scenario;
use super::ScenarioError;
use crate::delays::{breakdown, DelayBreakdown};
use crate::frames::Epoch;
use crate::link::{compute_cn0, dll_sigma, nearest_rank, total_uere, LinkBudget, UereStats};
use crate::raytrace::{solve_initial_direction, RaytraceError, StopReason};

/// Canonical ordering of scenario tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TaskKey {
    pub epoch: usize,
    pub weather: usize,
    pub frequency: usize,
    pub tx: usize,
    pub rx: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkRecord {
    #[serde(skip)]
    pub key: TaskKey,
    pub epoch: Epoch,
    pub kp: f64,
    pub r12: f64,
    pub frequency: String,
    pub frequency_hz: f64,
    pub tx: String,
    pub rx: String,
    pub tangential_altitude_km: f64,
    /// Index into the bin edges, `None` outside the binned range.
    pub bin: Option<usize>,
    pub delays: DelayBreakdown,
    pub budget: LinkBudget,
    pub dll_sigma_m: f64,
    pub uere: UereStats,
    pub outer_iterations: usize,
    pub miss_m: f64,
    pub stop_reason: StopReason,
}

impl LinkRecord {
    /// Re-checks the breakdown, budget and finiteness invariants.
    pub fn validate(&self, threshold_dbhz: f64) -> Result<(), String> {
        self.delays.validate()?;
        if !self.budget.trackable || self.budget.c_n0_dbhz < threshold_dbhz {
            return Err(format!("C/N0 {} below threshold", self.budget.c_n0_dbhz));
        }
        let b = &self.budget;
        let nums = [
            self.tangential_altitude_km,
            b.eirp_dbw,
            b.tx_gain_dbi,
            b.rx_gain_dbi,
            b.tx_off_boresight_deg,
            b.rx_off_boresight_deg,
            b.fspl_db,
            b.c_n0_dbhz,
            self.dll_sigma_m,
            self.uere.mean,
            self.uere.p95,
            self.uere.p99,
            self.miss_m,
        ];
        if nums.iter().any(|v| !v.is_finite()) {
            return Err("non-finite record field".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    EarthOcculted,
    MoonOcculted,
    BelowMask,
    Untrackable,
    NonConverged,
    Failed,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::EarthOcculted => "earth_occulted",
            Category::MoonOcculted => "moon_occulted",
            Category::BelowMask => "below_mask",
            Category::Untrackable => "untrackable",
            Category::NonConverged => "non_converged",
            Category::Failed => "failed",
        }
    }
}

/// A task that reached the solver, or failed before it, without producing a
/// record.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    #[serde(skip)]
    pub key: TaskKey,
    pub epoch: Epoch,
    pub kp: f64,
    pub r12: f64,
    pub frequency: String,
    pub tx: String,
    pub rx: String,
    pub tangential_altitude_km: f64,
    pub status: &'static str,
    pub outer_iterations: Option<usize>,
    pub miss_m: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub candidates: usize,
    pub emitted: usize,
    pub earth_occulted: usize,
    pub moon_occulted: usize,
    pub below_mask: usize,
    pub untrackable: usize,
    pub non_converged: usize,
    pub failed: usize,
}

impl Counts {
    fn add(&mut self, c: Category, n: usize) {
        match c {
            Category::EarthOcculted => self.earth_occulted += n,
            Category::MoonOcculted => self.moon_occulted += n,
            Category::BelowMask => self.below_mask += n,
            Category::Untrackable => self.untrackable += n,
            Category::NonConverged => self.non_converged += n,
            Category::Failed => self.failed += n,
        }
    }

    pub fn occulted(&self) -> usize {
        self.earth_occulted + self.moon_occulted + self.below_mask
    }

    pub fn filtered(&self) -> usize {
        self.occulted() + self.untrackable + self.non_converged + self.failed
    }

    pub fn is_conserved(&self) -> bool {
        self.candidates == self.emitted + self.filtered()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceStats {
    /// Shooting solves that returned a result.
    pub solves: usize,
    pub converged: usize,
    pub mean_outer_iterations: f64,
    pub max_outer_iterations: usize,
    pub max_miss_m: f64,
    pub stop_reasons: BTreeMap<String, usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MetricStats {
    pub mean: f64,
    pub p95: f64,
    pub p99: f64,
}

impl MetricStats {
    fn of(values: &mut [f64]) -> Self {
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self {
            mean,
            p95: nearest_rank(values, 95.0).unwrap_or(f64::NAN),
            p99: nearest_rank(values, 99.0).unwrap_or(f64::NAN),
        }
    }
}

/// Metrics summarised per bin, in column order.
pub const SUMMARY_METRICS: [&str; 9] = [
    "d_total", "d_i1_los", "d_i2", "d_i3", "d_len", "d_i1_bend", "c_n0", "noise", "uere",
];

fn metric(r: &LinkRecord, name: &str) -> f64 {
    match name {
        "d_total" => r.delays.d_total,
        "d_i1_los" => r.delays.d_i1_los,
        "d_i2" => r.delays.d_i2,
        "d_i3" => r.delays.d_i3,
        "d_len" => r.delays.d_len,
        "d_i1_bend" => r.delays.d_i1_bend,
        "c_n0" => r.budget.c_n0_dbhz,
        "noise" => r.dll_sigma_m,
        "uere" => r.uere.mean,
        _ => unreachable!("unknown metric {name}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinRow {
    pub lo_km: f64,
    pub hi_km: f64,
    pub count: usize,
    /// One entry per name in [`SUMMARY_METRICS`].
    pub metrics: Vec<MetricStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinSummary {
    pub kp: f64,
    pub r12: f64,
    pub frequency: String,
    pub rows: Vec<BinRow>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub quiet: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<LinkRecord>,
    pub summaries: Vec<BinSummary>,
    pub diagnostics: Vec<Diagnostic>,
    pub counts: Counts,
    pub convergence: ConvergenceStats,
    pub workers: usize,
}

/// Index of the half-open bin `[edges[i], edges[i + 1])` holding `h`.
pub fn bin_index(edges: &[f64], h: f64) -> Option<usize> {
    if edges.len() < 2 || !(h >= edges[0]) || h >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= h) - 1)
}

/// Per-link noise seed: the first eight bytes (little-endian) of
/// SHA-256 over `"{seed}|{epoch_s}|{tx}|{rx}|{label}"`, where `epoch_s` is the
/// receive epoch in seconds past J2000 printed in shortest round-trip form.
pub fn link_seed(seed: u64, epoch: Epoch, tx: &str, rx: &str, label: &str) -> u64 {
    let text = format!("{seed}|{}|{tx}|{rx}|{label}", epoch.seconds());
    let digest = Sha256::digest(text.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

enum Outcome {
    Emitted(Box<LinkRecord>),
    Dropped(Category, Option<Diagnostic>),
}

struct Solved {
    outcome: Outcome,
    /// `(outer_iterations, converged, stop_reason)` when a solve ran.
    solve: Option<(usize, bool, StopReason)>,
}

fn diagnostic(
    sc: &Scenario,
    geo: &LinkGeometry,
    key: TaskKey,
    category: Category,
    solve: Option<(usize, f64)>,
    detail: String,
) -> Diagnostic {
    let (kp, r12) = sc.weather_points()[key.weather];
    Diagnostic {
        key,
        epoch: sc.epochs[key.epoch],
        kp,
        r12,
        frequency: sc.frequencies[key.frequency].label.clone(),
        tx: sc.transmitters[key.tx].id.clone(),
        rx: sc.receivers[key.rx].id.clone(),
        tangential_altitude_km: geo.tangential_altitude_km,
        status: category.as_str(),
        outer_iterations: solve.map(|s| s.0),
        miss_m: solve.map(|s| s.1),
        detail,
    }
}

fn solve_task(sc: &Scenario, geo: &LinkGeometry, key: TaskKey, weather: (f64, f64)) -> Solved {
    let tx = &sc.transmitters[key.tx];
    let rx = &sc.receivers[key.rx];
    let freq = &sc.frequencies[key.frequency];
    let cfg = &sc.config;
    let drop = |c: Category, solve: Option<(usize, f64)>, detail: String, s| Solved {
        outcome: Outcome::Dropped(c, Some(diagnostic(sc, geo, key, c, solve, detail))),
        solve: s,
    };

    let budget = match compute_cn0(&geo.tx, &geo.rx, &tx.pattern, &rx.pattern, tx.eirp_dbw, freq.hz, &cfg.link) {
        Ok(b) => b,
        Err(e) => return drop(Category::Failed, None, format!("link budget: {e}"), None),
    };
    if !budget.trackable {
        return Solved {
            outcome: Outcome::Dropped(Category::Untrackable, None),
            solve: None,
        };
    }
    let wx = sc.weather_at(key.epoch, weather.0, weather.1);
    let (tp, rp) = (geo.tx.position, geo.rx.position);
    let result = match solve_initial_direction(&tp, &rp, freq.hz, sc.medium.as_ref(), &wx, &cfg.solver) {
        Ok(r) => r,
        Err(e @ RaytraceError::Occultation { .. }) => {
            return drop(Category::EarthOcculted, None, format!("ray: {e}"), None)
        }
        Err(e) => return drop(Category::Failed, None, format!("ray: {e}"), None),
    };
    let solve = Some((result.outer_iterations, result.converged, result.stop_reason));
    let diag_solve = Some((result.outer_iterations, result.miss_distance_m));
    if !result.converged {
        let detail = format!("stopped: {:?}", result.stop_reason);
        return drop(Category::NonConverged, diag_solve, detail, solve);
    }
    let delays = match breakdown(&result, &tp, &rp, sc.medium.as_ref(), &wx, &cfg.solver.steps) {
        Ok(d) => d,
        Err(e) => return drop(Category::Failed, diag_solve, format!("delays: {e}"), solve),
    };
    let sigma = dll_sigma(budget.c_n0_dbhz, &freq.dll);
    let epoch = sc.epochs[key.epoch];
    let seed = link_seed(cfg.seed, epoch, &tx.id, &rx.id, &freq.label);
    let record = LinkRecord {
        key,
        epoch,
        kp: weather.0,
        r12: weather.1,
        frequency: freq.label.clone(),
        frequency_hz: freq.hz,
        tx: tx.id.clone(),
        rx: rx.id.clone(),
        tangential_altitude_km: geo.tangential_altitude_km,
        bin: bin_index(&cfg.bin_edges_km, geo.tangential_altitude_km),
        delays,
        budget,
        dll_sigma_m: sigma,
        uere: total_uere(delays.d_total, sigma, cfg.uere_samples, seed),
        outer_iterations: result.outer_iterations,
        miss_m: result.miss_distance_m,
        stop_reason: result.stop_reason,
    };
    if let Err(e) = record.validate(cfg.link.threshold_dbhz) {
        return drop(Category::Failed, diag_solve, format!("record check: {e}"), solve);
    }
    Solved {
        outcome: Outcome::Emitted(Box::new(record)),
        solve,
    }
}

fn summarise(sc: &Scenario, records: &[LinkRecord]) -> Vec<BinSummary> {
    let edges = &sc.config.bin_edges_km;
    let weather = sc.weather_points();
    let mut groups: BTreeMap<(usize, usize), Vec<&LinkRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.key.weather, r.key.frequency)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((w, f), recs)| {
            let rows = (0..edges.len() - 1)
                .filter_map(|b| {
                    let in_bin: Vec<&&LinkRecord> = recs.iter().filter(|r| r.bin == Some(b)).collect();
                    if in_bin.is_empty() {
                        return None;
                    }
                    let metrics = SUMMARY_METRICS
                        .iter()
                        .map(|m| {
                            let mut v: Vec<f64> = in_bin.iter().map(|r| metric(r, m)).collect();
                            MetricStats::of(&mut v)
                        })
                        .collect();
                    Some(BinRow {
                        lo_km: edges[b],
                        hi_km: edges[b + 1],
                        count: in_bin.len(),
                        metrics,
                    })
                })
                .collect();
            BinSummary {
                kp: weather[w].0,
                r12: weather[w].1,
                frequency: sc.frequencies[f].label.clone(),
                rows,
            }
        })
        .collect()
}

fn geometry_category(v: Visibility) -> Option<Category> {
    match v {
        Visibility::Visible => None,
        Visibility::EarthOcculted => Some(Category::EarthOcculted),
        Visibility::MoonOcculted => Some(Category::MoonOcculted),
        Visibility::BelowMask => Some(Category::BelowMask),
        Visibility::Unavailable => Some(Category::Failed),
    }
}

/// Runs every (epoch, weather, frequency, transmitter, receiver) task.
/// Results are ordered by [`TaskKey`] regardless of worker count.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<RunOutput, ScenarioError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if sc.config.workers > 0 {
        builder = builder.num_threads(sc.config.workers);
    }
    let pool = builder
        .build()
        .map_err(|e| ScenarioError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(sc, opts, pool.current_num_threads()))
}

fn run_in_pool(sc: &Scenario, opts: &RunOptions, workers: usize) -> Result<RunOutput, ScenarioError> {
    let (n_tx, n_rx) = (sc.transmitters.len(), sc.receivers.len());
    let weather = sc.weather_points();
    let (n_w, n_f) = (weather.len(), sc.frequencies.len());

    let geometries: Vec<LinkGeometry> = (0..sc.epochs.len() * n_tx * n_rx)
        .into_par_iter()
        .map(|i| link_geometry(sc, i / (n_tx * n_rx), (i / n_rx) % n_tx, i % n_rx))
        .collect();

    let mut counts = Counts {
        candidates: sc.candidate_count(),
        ..Counts::default()
    };
    let mut diagnostics = Vec::new();
    let mut tasks = Vec::new();
    for (g, geo) in geometries.iter().enumerate() {
        for w in 0..n_w {
            for f in 0..n_f {
                let key = TaskKey {
                    epoch: geo.epoch_index,
                    weather: w,
                    frequency: f,
                    tx: geo.tx_index,
                    rx: geo.rx_index,
                };
                match geometry_category(geo.visibility) {
                    None => tasks.push((g, key)),
                    Some(c) => {
                        counts.add(c, 1);
                        if c == Category::Failed {
                            diagnostics.push(diagnostic(sc, geo, key, c, None, geo.detail.clone()));
                        }
                    }
                }
            }
        }
    }

    let done = AtomicUsize::new(0);
    let total = tasks.len();
    let report_every = (total / 20).max(1);
    let solved: Vec<Solved> = tasks
        .par_iter()
        .map(|&(g, key)| {
            let s = solve_task(sc, &geometries[g], key, weather[key.weather]);
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if !opts.quiet && (n.is_multiple_of(report_every) || n == total) {
                eprintln!("solved {n}/{total} links");
            }
            s
        })
        .collect();

    let mut records = Vec::new();
    let mut conv = ConvergenceStats::default();
    let mut iter_sum = 0usize;
    for s in solved {
        if let Some((iters, converged, reason)) = s.solve {
            conv.solves += 1;
            conv.converged += usize::from(converged);
            iter_sum += iters;
            conv.max_outer_iterations = conv.max_outer_iterations.max(iters);
            let name = serde_json::to_value(reason)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            *conv.stop_reasons.entry(name).or_default() += 1;
        }
        match s.outcome {
            Outcome::Emitted(r) => {
                counts.emitted += 1;
                conv.max_miss_m = conv.max_miss_m.max(r.miss_m);
                records.push(*r);
            }
            Outcome::Dropped(c, d) => {
                counts.add(c, 1);
                diagnostics.extend(d);
            }
        }
    }
    if conv.solves > 0 {
        conv.mean_outer_iterations = iter_sum as f64 / conv.solves as f64;
    }
    records.sort_by_key(|r| r.key);
    diagnostics.sort_by_key(|d| d.key);
    debug_assert!(counts.is_conserved());

    Ok(RunOutput {
        summaries: summarise(sc, &records),
        records,
        diagnostics,
        counts,
        convergence: conv,
        workers,
    })
}
