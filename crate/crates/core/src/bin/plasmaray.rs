use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use plasmaray::constants::EARTH_RADIUS_KM;
use plasmaray::delays::breakdown;
use plasmaray::frames::{from_sm_frame, tangential_altitude, Epoch, SmPosition};
use plasmaray::media::{reference_medium, MediumModel, ReferenceParams, SpaceWeather, VacuumMedium};
use plasmaray::raytrace::{solve_initial_direction, SolverOptions};
use plasmaray::scenario::{execute, FrequencyConfig, MediumKind, RunOptions, Scenario, ScenarioConfig, ScenarioError};
use plasmaray::Vec3;

#[derive(Parser)]
#[command(name = "plasmaray", version, about = "GNSS ray tracing to lunar receivers")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full scenario.
    Run { config: PathBuf },
    /// Check a config and report its size.
    Validate { config: PathBuf },
    /// Solve a single link and print its delay breakdown.
    Trace {
        /// Transmitter position, km, Earth-centred: `x,y,z`.
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        tx: Vec3,
        /// Receiver position, km, Earth-centred: `x,y,z`.
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        rx: Vec3,
        /// Frequency label (L1, L5, E1) or value in Hz.
        #[arg(long, default_value = "L1")]
        freq: String,
        #[arg(long, default_value_t = 3.0)]
        kp: f64,
        #[arg(long, default_value_t = 167.24)]
        r12: f64,
        #[arg(long, default_value = "2025-01-01T12:00:00")]
        epoch: String,
        /// Take medium and solver settings from a scenario config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Electron density on a solar-magnetic plane, CSV.
    Medium {
        #[arg(long, value_enum)]
        slice: Slice,
        #[arg(long, default_value_t = 3.0)]
        kp: f64,
        #[arg(long, default_value_t = 167.24)]
        r12: f64,
        #[arg(long, default_value = "2025-01-01T12:00:00")]
        epoch: String,
        /// Half-width of the grid, Earth radii.
        #[arg(long, default_value_t = 6.0)]
        extent: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 121)]
        points: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Slice {
    Xy,
    Xz,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn config_failure(msg: impl ToString) -> Failure {
    Failure {
        code: 1,
        message: msg.to_string(),
    }
}

fn runtime_failure(msg: impl ToString) -> Failure {
    Failure {
        code: 2,
        message: msg.to_string(),
    }
}

fn load(cli: &Cli, path: &Path) -> Result<Scenario, Failure> {
    let mut cfg = ScenarioConfig::load(path).map_err(|e| Failure::from(ScenarioError::from(e)))?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.outdir {
        cfg.output_dir = o.clone();
    }
    Scenario::prepare(cfg).map_err(|e| Failure::from(ScenarioError::from(e)))
}

fn run(cli: &Cli, config: &Path) -> Result<(), Failure> {
    let sc = load(cli, config)?;
    let outdir = match &cli.outdir {
        Some(o) => o.clone(),
        None => sc.config.resolve_path(&sc.config.output_dir),
    };
    let result = execute(&sc, &outdir, &RunOptions { quiet: cli.quiet });
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            return Err(Failure::from(e));
        }
    };
    let c = report.output.counts;
    if !cli.quiet {
        eprintln!(
            "{} candidates: {} emitted, {} occulted, {} untrackable, {} non-converged, {} failed ({:.1} s)",
            c.candidates,
            c.emitted,
            c.occulted(),
            c.untrackable,
            c.non_converged,
            c.failed,
            report.wall_time_s
        );
        eprintln!("outputs in {}", outdir.display());
    }
    Ok(())
}

fn validate(cli: &Cli, config: &Path) -> Result<(), Failure> {
    let sc = load(cli, config)?;
    println!("config ok: {}", config.display());
    println!("epochs: {}", sc.epochs.len());
    println!("weather points: {}", sc.weather_points().len());
    println!("frequencies: {}", sc.frequencies.len());
    println!("transmitters: {}", sc.transmitters.len());
    println!("receivers: {}", sc.receivers.len());
    println!("candidate links: {}", sc.candidate_count());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn trace(
    tx: &Vec3,
    rx: &Vec3,
    freq: &str,
    kp: f64,
    r12: f64,
    epoch: &str,
    config: Option<&PathBuf>,
) -> Result<(), Failure> {
    let (medium, solver): (Arc<dyn MediumModel>, SolverOptions) = match config {
        Some(path) => {
            let cfg = ScenarioConfig::load(path).map_err(config_failure)?;
            let medium: Arc<dyn MediumModel> = match cfg.medium.model {
                MediumKind::Vacuum => Arc::new(VacuumMedium),
                MediumKind::Reference => Arc::new(reference_medium(cfg.medium.reference).map_err(config_failure)?),
            };
            (medium, cfg.solver)
        }
        None => (
            Arc::new(reference_medium(ReferenceParams::default()).map_err(config_failure)?),
            SolverOptions::default(),
        ),
    };
    let hz = match freq.parse::<f64>() {
        Ok(v) => v,
        Err(_) => {
            FrequencyConfig {
                label: freq.to_string(),
                hz: None,
                dll: None,
            }
            .resolve()
            .map_err(config_failure)?
            .0
        }
    };
    let t = Epoch::from_calendar(epoch).map_err(config_failure)?;
    let weather = SpaceWeather::new(kp, r12, t).map_err(config_failure)?;
    let h_t = tangential_altitude(tx, rx).map_err(config_failure)?;
    let result = solve_initial_direction(tx, rx, hz, medium.as_ref(), &weather, &solver).map_err(runtime_failure)?;
    println!("tangential altitude: {h_t:.3} km");
    println!("iteration,miss_m,delay_m,delay_change_m");
    for (k, h) in result.history.iter().enumerate() {
        let change = h.delay_change_m.map(|c| format!("{c:.6}")).unwrap_or_default();
        println!("{},{:.6},{:.6},{}", k + 1, h.miss_m, h.delay_m, change);
    }
    println!(
        "converged: {} ({:?}) after {} outer iterations, miss {:.6} m",
        result.converged, result.stop_reason, result.outer_iterations, result.miss_distance_m
    );
    let b = breakdown(&result, tx, rx, medium.as_ref(), &weather, &solver.steps).map_err(runtime_failure)?;
    println!("d_i1_los_m: {:.6}", b.d_i1_los);
    println!("d_i2_m: {:.6e}", b.d_i2);
    println!("d_i3_m: {:.6e}", b.d_i3);
    println!("d_i1_bend_m: {:.6e}", b.d_i1_bend);
    println!("d_len_m: {:.6e}", b.d_len);
    println!("d_total_m: {:.6}", b.d_total);
    println!("tec_los: {:.6e}", b.tec_los);
    println!("tec_bend: {:.6e}", b.tec_bend);
    Ok(())
}

fn medium_slice(slice: Slice, kp: f64, r12: f64, epoch: &str, extent: f64, points: usize, out: Option<&PathBuf>) -> Result<(), Failure> {
    if points < 2 || !(extent > 0.0) {
        return Err(config_failure("need points >= 2 and extent > 0"));
    }
    let t = Epoch::from_calendar(epoch).map_err(config_failure)?;
    let weather = SpaceWeather::new(kp, r12, t).map_err(config_failure)?;
    let params = ReferenceParams::default();
    let medium = reference_medium(params).map_err(config_failure)?;
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| runtime_failure(format!("{}: {e}", p.display())))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let second = match slice {
        Slice::Xy => "y_re",
        Slice::Xz => "z_re",
    };
    w.write_record(["x_re", second, "n_e"]).map_err(runtime_failure)?;
    for i in 0..points {
        for j in 0..points {
            let a = -extent + 2.0 * extent * i as f64 / (points - 1) as f64;
            let b = -extent + 2.0 * extent * j as f64 / (points - 1) as f64;
            let sm = match slice {
                Slice::Xy => SmPosition { x: a * EARTH_RADIUS_KM, y: b * EARTH_RADIUS_KM, z: 0.0 },
                Slice::Xz => SmPosition { x: a * EARTH_RADIUS_KM, y: 0.0, z: b * EARTH_RADIUS_KM },
            };
            let n_e = if sm.norm() < EARTH_RADIUS_KM {
                0.0
            } else {
                let pos = from_sm_frame(&sm, t, &params.dipole).map_err(runtime_failure)?;
                medium.sample(&pos, &weather).n_e
            };
            w.write_record([a.to_string(), b.to_string(), n_e.to_string()]).map_err(runtime_failure)?;
        }
    }
    w.flush().map_err(runtime_failure)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Validate { config } => validate(&cli, config),
        Command::Trace { tx, rx, freq, kp, r12, epoch, config } => {
            trace(tx, rx, freq, *kp, *r12, epoch, config.as_ref())
        }
        Command::Medium { slice, kp, r12, epoch, extent, points, out } => {
            medium_slice(*slice, *kp, *r12, epoch, *extent, *points, out.as_ref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
