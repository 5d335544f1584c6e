use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use jamiton_core::fdgen::{self, FdMode};
use jamiton_core::jamiton::{self, FamilySummary, JamitonFamily};
use jamiton_core::render;
use jamiton_core::sensordata::{self, ColumnMap, FdPoint};
use jamiton_core::simulator::{self, Scenario};
use jamiton_core::stability;
use jamiton_core::units::{self, fmt17};
use jamiton_core::ModelSpec;
use serde_json::json;

use crate::config::Config;
use crate::output::Artifacts;
use crate::CliError;

/// Jamiton fundamental diagrams for second order traffic models.
///
/// Densities on the command line and in every table are in veh/km and flow
/// rates in veh/h. Speeds are m/s except in segment tables, where the slope
/// column is km/h so that Q = m + s rho holds in table units. Each command
/// writes a `<prefix>_manifest.json` listing its artifacts with SHA-256
/// hashes.
///
/// Environment: JAMITON_THREADS caps the worker threads.
#[derive(Debug, Parser)]
#[command(name = "jamiton", version, about, long_about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model and its monotonicity and convexity assumptions.
    Validate(ValidateArgs),
    /// Unstable density bands from the sub-characteristic condition.
    Stability(StabilityArgs),
    /// Profile and summary of one jamiton.
    Jamiton(JamitonArgs),
    /// Maximal, aggregated or effective fundamental diagram.
    Fd(FdArgs),
    /// Ring-road simulation with virtual sensor output.
    Simulate(SimulateArgs),
    /// Convert loop-detector CSV records to (rho, Q) points.
    Ingest(IngestArgs),
    /// Plot measured points over a computed diagram and report coverage.
    Overlay(OverlayArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model JSON file.
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    /// Bundled model: pw1, pw2, arz1 or arz2 (default pw1).
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with default values for any flag (keys use underscores).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path prefix (default out/<command>).
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    /// Seed recorded in the manifest; every command is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

struct Ctx {
    cfg: Config,
    spec: ModelSpec,
    model: String,
    artifacts: Artifacts,
    params: serde_json::Map<String, serde_json::Value>,
}

impl Common {
    fn open(self, command: &str) -> Result<Ctx, CliError> {
        let cfg = Config::load(self.config.as_deref())?;
        let (spec, model) = cfg.model(self.model, self.preset)?;
        let prefix = cfg
            .path(self.out_prefix, "out_prefix")?
            .unwrap_or_else(|| PathBuf::from("out").join(command));
        let seed = cfg.usize(self.seed.map(|s| s as usize), "seed", 0)?;
        let mut params = serde_json::Map::new();
        params.insert("model".into(), json!(model));
        params.insert("seed".into(), json!(seed));
        Ok(Ctx {
            cfg,
            spec,
            model,
            artifacts: Artifacts::new(&prefix),
            params,
        })
    }
}

impl Ctx {
    fn param(&mut self, key: &str, value: impl serde::Serialize) {
        self.params.insert(key.into(), json!(value));
    }

    fn finish(self, command: &str) -> Result<(), CliError> {
        for p in self.artifacts.commit(command, serde_json::Value::Object(self.params))? {
            println!("wrote {}", p.display());
        }
        Ok(())
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn runtime(e: jamiton_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(invalid(msg()))
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::Stability(a) => stability(a),
        Command::Jamiton(a) => jamiton(a),
        Command::Fd(a) => fd(a),
        Command::Simulate(a) => simulate(a),
        Command::Ingest(a) => ingest(a),
        Command::Overlay(a) => overlay(a),
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Samples per assumption check.
    #[arg(long)]
    grid: Option<usize>,
}

fn validate(a: ValidateArgs) -> Result<(), CliError> {
    let mut ctx = a.common.open("validate")?;
    let grid = ctx.cfg.usize(a.grid, "grid", 2048)?;
    require(grid >= 16, || format!("--grid must be >= 16, got {grid}"))?;
    ctx.param("grid", grid);
    let report = ctx.spec.validate_assumptions(grid);
    for c in &report.checks {
        println!("({}) {}: {}", c.label, c.description, if c.passed { "ok" } else { "VIOLATED" });
        if let Some(d) = &c.detail {
            println!("    {d}");
        }
    }
    let doc = json!({ "model": ctx.spec, "source": ctx.model, "assumptions": report });
    ctx.artifacts.add("_validation.json", pretty(&doc))?;
    ctx.finish("validate")?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(invalid("model assumptions violated"))
    }
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    common: Common,
    /// Density samples for the sign scan.
    #[arg(long)]
    scan_points: Option<usize>,
    /// Endpoint tolerance as a fraction of rho_max.
    #[arg(long)]
    tol: Option<f64>,
    /// Also write (rho, margin) samples to this CSV file.
    #[arg(long)]
    margin_csv: Option<PathBuf>,
}

fn stability(a: StabilityArgs) -> Result<(), CliError> {
    let mut ctx = a.common.open("stability")?;
    let points = ctx.cfg.usize(a.scan_points, "scan_points", stability::DEFAULT_SCAN_POINTS)?;
    let tol = ctx.cfg.f64(a.tol, "tol", 1e-12)?;
    let margin_csv = ctx.cfg.path(a.margin_csv, "margin_csv")?;
    require(points >= 16, || format!("--scan-points must be >= 16, got {points}"))?;
    require(tol > 0.0 && tol < 1e-2, || format!("--tol must lie in (0, 0.01), got {tol}"))?;
    ctx.param("scan_points", points);
    ctx.param("tol", tol);
    let scan = stability::unstable_bands(&ctx.spec, points, tol * ctx.spec.rho_max).map_err(runtime)?;

    let mut csv = String::from("rho_lo,rho_hi,stable\n");
    for b in &scan.bands {
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt17(units::density_to_veh_per_km(b.rho_lo)),
            fmt17(units::density_to_veh_per_km(b.rho_hi)),
            b.stable
        );
        println!(
            "{:>8} [{:.6}, {:.6}] rho_max",
            if b.stable { "stable" } else { "unstable" },
            b.rho_lo / ctx.spec.rho_max,
            b.rho_hi / ctx.spec.rho_max
        );
    }
    for w in &scan.warnings {
        eprintln!("warning: {w}");
    }
    let doc = json!({
        "units": { "rho": "veh/km" },
        "rho_max": units::density_to_veh_per_km(ctx.spec.rho_max),
        "bands": scan.bands.iter().map(|b| json!({
            "rho_lo": units::density_to_veh_per_km(b.rho_lo),
            "rho_hi": units::density_to_veh_per_km(b.rho_hi),
            "stable": b.stable,
        })).collect::<Vec<_>>(),
        "warnings": scan.warnings,
    });
    ctx.artifacts.add("_bands.csv", csv)?;
    ctx.artifacts.add("_bands.json", pretty(&doc))?;
    if let Some(path) = margin_csv {
        let samples = stability::margin_samples(&ctx.spec, points).map_err(runtime)?;
        let mut out = String::from("rho,margin\n");
        for (r, m) in samples {
            let _ = writeln!(out, "{},{}", fmt17(units::density_to_veh_per_km(r)), fmt17(m));
        }
        ctx.param("margin_csv", path.display().to_string());
        ctx.artifacts.add_path(path, out)?;
    }
    ctx.finish("stability")
}

#[derive(Debug, Args)]
pub struct JamitonArgs {
    #[command(flatten)]
    common: Common,
    /// Sonic density, veh/km (default: middle of the first unstable band).
    #[arg(long)]
    rho_s: Option<f64>,
    /// Shock level as a fraction of (r_min, r_max); 1 gives the maximal jamiton.
    #[arg(long)]
    r_frac: Option<f64>,
    /// Profile samples.
    #[arg(long)]
    samples: Option<usize>,
}

fn first_band(spec: &ModelSpec) -> Result<stability::StabilityBand, CliError> {
    stability::unstable_bands_default(spec)
        .map_err(runtime)?
        .into_iter()
        .next()
        .ok_or_else(|| invalid("model has no unstable band, so no jamitons exist"))
}

fn jamiton(a: JamitonArgs) -> Result<(), CliError> {
    let mut ctx = a.common.open("jamiton")?;
    let spec = ctx.spec.clone();
    let rho_s = match ctx.cfg.opt_f64(a.rho_s, "rho_s")? {
        Some(r) => units::density_from_veh_per_km(r),
        None => {
            let b = first_band(&spec)?;
            0.5 * (b.rho_lo + b.rho_hi)
        }
    };
    let frac = ctx.cfg.f64(a.r_frac, "r_frac", 0.5)?;
    let samples = ctx.cfg.usize(a.samples, "samples", 512)?;
    require(frac > 0.0 && frac <= 1.0, || format!("--r-frac must lie in (0, 1], got {frac}"))?;
    require(samples >= 16, || format!("--samples must be >= 16, got {samples}"))?;
    ctx.param("rho_s", units::density_to_veh_per_km(rho_s));
    ctx.param("r_frac", frac);
    ctx.param("samples", samples);

    let fam = JamitonFamily::new(&spec, rho_s).map_err(|e| match e {
        jamiton_core::Error::NoJamiton { .. } | jamiton_core::Error::Domain { .. } => invalid(e.to_string()),
        e => runtime(e),
    })?;
    let (vp, vm) = if frac >= 1.0 {
        (fam.v_r, fam.v_m)
    } else {
        jamiton::shock_pair_frac(&spec, &fam, frac).map_err(runtime)?
    };
    let profile = jamiton::integrate_profile(&spec, &fam, vp, vm, samples).map_err(runtime)?;
    let mut csv = String::from("chi,eta,v,rho,u\n");
    for p in &profile.samples {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt17(p.chi),
            fmt17(p.eta),
            fmt17(p.v),
            fmt17(units::density_to_veh_per_km(p.rho)),
            fmt17(p.u)
        );
    }
    let summary = FamilySummary::new(&fam, &profile);
    println!(
        "rho_S = {:.4} veh/km: m = {:.6} veh/s, s = {:.6} m/s, v_M = {:.6} m/veh, v_R = {:.6} m/veh, L = {:.6}{}, N = {:.6}",
        units::density_to_veh_per_km(fam.rho_s),
        fam.m,
        fam.s,
        fam.v_m,
        fam.v_r,
        profile.length.value(),
        if profile.length.is_infinite() { " (truncated, infinite)" } else { "" },
        profile.count.value()
    );
    let doc = json!({
        "units": {
            "v": "m/veh", "rho_S": "veh/m", "m": "veh/s", "s": "m/s", "r": "m^2/s^2 per veh (PW) or m/s * veh/s (ARZ)",
            "L": "tau units: metres / tau", "N": "tau units: vehicles / tau",
            "csv": "chi and eta in tau units, v m/veh, rho veh/km, u m/s",
        },
        "tau": spec.tau,
        "family": summary,
    });
    ctx.artifacts.add("_profile.csv", csv)?;
    ctx.artifacts.add("_summary.json", pretty(&doc))?;
    ctx.finish("jamiton")
}

#[derive(Debug, Args)]
pub struct FdArgs {
    #[command(flatten)]
    common: Common,
    /// maximal, aggregate or effective.
    #[arg(long)]
    mode: Option<FdMode>,
    /// Aggregation window in units of tau (aggregate mode).
    #[arg(long)]
    alpha: Option<f64>,
    /// Jamiton families per unstable band.
    #[arg(long)]
    families: Option<usize>,
    /// Shock levels per family (aggregate and effective modes).
    #[arg(long)]
    lengths: Option<usize>,
    /// Window positions per jamiton (aggregate mode).
    #[arg(long)]
    phases: Option<usize>,
    /// Density samples (maximal mode).
    #[arg(long)]
    rho_points: Option<usize>,
}

fn fd(a: FdArgs) -> Result<(), CliError> {
    let mut ctx = a.common.open("fd")?;
    let spec = ctx.spec.clone();
    let mode = match ctx.cfg.string(None, "mode")? {
        _ if a.mode.is_some() => a.mode.unwrap(),
        Some(m) => m.parse().map_err(|e: jamiton_core::Error| invalid(e.to_string()))?,
        None => FdMode::Maximal,
    };
    let alpha = ctx.cfg.f64(a.alpha, "alpha", 1.0)?;
    let families = ctx.cfg.usize(a.families, "families", fdgen::DEFAULT_N_FAMILIES)?;
    let lengths = ctx.cfg.usize(a.lengths, "lengths", fdgen::DEFAULT_N_LENGTHS)?;
    let phases = ctx.cfg.usize(a.phases, "phases", fdgen::DEFAULT_N_PHASES)?;
    let rho_points = ctx.cfg.usize(a.rho_points, "rho_points", fdgen::DEFAULT_N_RHO)?;
    require(alpha >= 0.0 && alpha.is_finite(), || format!("--alpha must be >= 0, got {alpha}"))?;
    require(families >= 1 && lengths >= 1 && phases >= 1, || "counts must be positive".into())?;
    require(rho_points >= 32, || format!("--rho-points must be >= 32, got {rho_points}"))?;
    ctx.param("mode", mode);
    match mode {
        FdMode::Maximal => ctx.param("rho_points", rho_points),
        FdMode::Aggregate => {
            ctx.param("alpha", alpha);
            ctx.param("families", families);
            ctx.param("lengths", lengths);
            ctx.param("phases", phases);
        }
        FdMode::Effective => {
            ctx.param("families", families);
            ctx.param("lengths", lengths);
        }
    }
    let fd = match mode {
        FdMode::Maximal => fdgen::maximal_fd(&spec, rho_points),
        FdMode::Aggregate => fdgen::aggregate_fd(&spec, alpha, families, lengths, phases),
        FdMode::Effective => fdgen::effective_fd(&spec, families, lengths),
    }
    .map_err(runtime)?;
    for b in fd.bands.iter() {
        println!(
            "unstable band [{:.4}, {:.4}] veh/km",
            units::density_to_veh_per_km(b.rho_lo),
            units::density_to_veh_per_km(b.rho_hi)
        );
    }
    println!("{} segments, {} cloud points", fd.segments.len(), fd.cloud.len());
    for d in &fd.diagnostics {
        eprintln!("note: {d}");
    }
    for (suffix, text) in render::fd_tables(&fd) {
        ctx.artifacts.add(suffix, text)?;
    }
    ctx.artifacts.add(".svg", render::fd_svg(&fd, spec.rho_max, None))?;
    ctx.finish("fd")
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Mean density, veh/km (default rho_max / 2).
    #[arg(long)]
    rho_bar: Option<f64>,
    /// Relative amplitude of the initial sinusoid, in [0, 0.1].
    #[arg(long)]
    amplitude: Option<f64>,
    /// Wavenumber of the initial sinusoid on the ring.
    #[arg(long)]
    modes: Option<usize>,
    /// Final time in seconds (default 500 tau).
    #[arg(long)]
    t_end: Option<f64>,
    /// Sensor window in units of tau.
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of evenly spaced snapshots to write.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Grid cells.
    #[arg(long)]
    cells: Option<usize>,
    /// Ring length in metres.
    #[arg(long)]
    ring_length: Option<f64>,
    /// CFL number in (0, 0.5].
    #[arg(long)]
    cfl: Option<f64>,
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut ctx = a.common.open("simulate")?;
    let spec = ctx.spec.clone();
    let mut sc = Scenario::new(&spec, 0.5 * spec.rho_max);
    let c = &ctx.cfg;
    sc.rho_bar = units::density_from_veh_per_km(c.f64(a.rho_bar, "rho_bar", units::density_to_veh_per_km(sc.rho_bar))?);
    sc.amplitude = c.f64(a.amplitude, "amplitude", sc.amplitude)?;
    sc.modes = c.usize(a.modes, "modes", sc.modes as usize)? as u32;
    sc.t_end = c.f64(a.t_end, "t_end", sc.t_end)?;
    sc.alpha = c.f64(a.alpha, "alpha", sc.alpha)?;
    sc.snapshots = c.usize(a.snapshots, "snapshots", 0)?;
    sc.n_cells = c.usize(a.cells, "cells", sc.n_cells)?;
    sc.ring_length = c.f64(a.ring_length, "ring_length", sc.ring_length)?;
    sc.cfl = c.f64(a.cfl, "cfl", sc.cfl)?;
    require(sc.amplitude >= 0.0 && sc.amplitude <= 0.1, || format!("--amplitude must lie in [0, 0.1], got {}", sc.amplitude))?;
    require(sc.rho_bar > 0.0 && sc.rho_bar * (1.0 + sc.amplitude) < spec.rho_max, || {
        "--rho-bar with its perturbation must stay inside (0, rho_max)".into()
    })?;
    require(sc.modes >= 1, || "--modes must be >= 1".into())?;
    require(sc.t_end > 0.0 && sc.alpha > 0.0, || "--t-end and --alpha must be positive".into())?;
    require(sc.cfl > 0.0 && sc.cfl <= 0.5, || format!("--cfl must lie in (0, 0.5], got {}", sc.cfl))?;
    require(sc.n_cells >= 8 && sc.ring_length > 0.0, || "need at least 8 cells and a positive ring length".into())?;
    require(sc.snapshots <= 10_000, || "--snapshots must be <= 10000".into())?;
    ctx.param("rho_bar", units::density_to_veh_per_km(sc.rho_bar));
    ctx.param("amplitude", sc.amplitude);
    ctx.param("modes", sc.modes);
    ctx.param("t_end", sc.t_end);
    ctx.param("alpha", sc.alpha);
    ctx.param("snapshots", sc.snapshots);
    ctx.param("cells", sc.n_cells);
    ctx.param("ring_length", sc.ring_length);
    ctx.param("cfl", sc.cfl);

    let d = simulator::run_and_diagnose(&spec, &sc).map_err(runtime)?;
    for (k, snap) in d.snapshots.iter().enumerate() {
        let mut csv = String::from("x,rho,u\n");
        for i in 0..snap.x.len() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                fmt17(snap.x[i]),
                fmt17(units::density_to_veh_per_km(snap.rho[i])),
                fmt17(snap.u[i])
            );
        }
        ctx.artifacts.add(&format!("_snapshot_{:04}.csv", k + 1), csv)?;
    }
    let mut sensor = String::from("t,rho_bar,Q_bar\n");
    for w in &d.sensor {
        let _ = writeln!(
            sensor,
            "{},{},{}",
            fmt17(w.t),
            fmt17(units::density_to_veh_per_km(w.rho_bar)),
            fmt17(units::flow_to_veh_per_hour(w.q_bar))
        );
    }
    ctx.artifacts.add("_sensor.csv", sensor)?;
    let doc = json!({
        "units": { "t": "s", "amplitude": "veh/km", "growth_rate": "1/s", "wave_speed": "m/s" },
        "t_final": d.t_final,
        "snapshot_times": d.snapshots.iter().map(|s| s.t).collect::<Vec<_>>(),
        "amplitude": d.amplitude.iter().map(|&(t, a)| [t, units::density_to_veh_per_km(a)]).collect::<Vec<_>>(),
        "growth_rate": d.growth_rate,
        "saturated": d.saturated,
        "wave_speed": d.wave_speed,
        "wave_speed_defined": d.wave_speed.is_some(),
        "wave_count": d.wave_count,
        "steps": d.steps,
        "rusanov_faces": d.rusanov_faces,
        "clamped_cells": d.clamped_cells,
        "max_count_drift": d.max_count_drift,
    });
    ctx.artifacts.add("_diagnostics.json", pretty(&doc))?;
    let a_last = d.amplitude.last().map_or(0.0, |p| p.1);
    println!(
        "t = {:.1} s, amplitude {:.4} veh/km, growth rate {:+.3e} 1/s, {} waves, {}",
        d.t_final,
        units::density_to_veh_per_km(a_last),
        d.growth_rate,
        d.wave_count,
        match d.wave_speed {
            Some(v) => format!("wave speed {v:.4} m/s"),
            None => "not saturated, wave speed undefined".into(),
        }
    );
    ctx.finish("simulate")
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Loop-detector CSV with a header row.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Effective vehicle length in metres.
    #[arg(long)]
    veh_length: Option<f64>,
    /// Interval in seconds for rows without an interval column.
    #[arg(long)]
    interval: Option<f64>,
    /// Output CSV of (rho, Q) points (default out/ingest_points.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Column with the interval start time.
    #[arg(long)]
    t_col: Option<String>,
    /// Column with the vehicle count.
    #[arg(long)]
    count_col: Option<String>,
    /// Column with the occupancy fraction.
    #[arg(long)]
    occupancy_col: Option<String>,
    /// Column with the interval length, seconds.
    #[arg(long)]
    interval_col: Option<String>,
    /// JSON file with default values for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let cfg = Config::load(a.config.as_deref())?;
    let input = cfg.path(a.csv, "csv")?.ok_or_else(|| invalid("--csv is required"))?;
    let veh_length = cfg.f64(a.veh_length, "veh_length", sensordata::DEFAULT_VEHICLE_LENGTH)?;
    let interval = cfg.opt_f64(a.interval, "interval")?;
    let out = cfg.path(a.out, "out")?.unwrap_or_else(|| PathBuf::from("out/ingest_points.csv"));
    let defaults = ColumnMap::default();
    let map = ColumnMap {
        t: cfg.string(a.t_col, "t_col")?.unwrap_or(defaults.t),
        count: cfg.string(a.count_col, "count_col")?.unwrap_or(defaults.count),
        occupancy: cfg.string(a.occupancy_col, "occupancy_col")?.unwrap_or(defaults.occupancy),
        interval: cfg.string(a.interval_col, "interval_col")?,
    };
    require(veh_length > 0.0 && veh_length.is_finite(), || format!("--veh-length must be positive, got {veh_length}"))?;

    let report = sensordata::load_csv(&input, &map, interval).map_err(|e| match e {
        jamiton_core::Error::Config(_) | jamiton_core::Error::Io { .. } => invalid(e.to_string()),
        e => runtime(e),
    })?;
    let points = sensordata::to_fd_points(&report.records, veh_length).map_err(runtime)?;

    let mut points_csv = Vec::new();
    sensordata::write_points(&mut points_csv, &points).map_err(runtime)?;
    let mut rejects_csv = Vec::new();
    sensordata::write_rejects(&mut rejects_csv, &report.rejects).map_err(runtime)?;
    let stem = out.with_extension("");
    let mut artifacts = Artifacts::new(&stem);
    artifacts.add_path(out.clone(), points_csv)?;
    artifacts.add("_rejects.csv", rejects_csv)?;
    println!("{} rows: {} points, {} rejected", report.rows, points.len(), report.rejects.len());
    let params = json!({
        "csv": input.display().to_string(),
        "veh_length": veh_length,
        "interval": interval,
        "columns": { "t": map.t, "count": map.count, "occupancy": map.occupancy, "interval": map.interval },
        "rows": report.rows,
        "records": report.records.len(),
        "rejects": report.rejects.len(),
    });
    for p in artifacts.commit("ingest", params)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    #[command(flatten)]
    common: Common,
    /// Prefix of an `fd` run whose tables to plot.
    #[arg(long)]
    fd_prefix: Option<PathBuf>,
    /// Points CSV written by `ingest` (rho in veh/km, Q in veh/h).
    #[arg(long)]
    points: Option<PathBuf>,
    /// Relative slack for the coverage test.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn overlay(a: OverlayArgs) -> Result<(), CliError> {
    let mut ctx = a.common.open("overlay")?;
    let spec = ctx.spec.clone();
    let fd_prefix = ctx.cfg.path(a.fd_prefix, "fd_prefix")?.ok_or_else(|| invalid("--fd-prefix is required"))?;
    let points_path = ctx.cfg.path(a.points, "points")?.ok_or_else(|| invalid("--points is required"))?;
    let tol = ctx.cfg.f64(a.tolerance, "tolerance", 0.05)?;
    require(tol >= 0.0 && tol < 1.0, || format!("--tolerance must lie in [0, 1), got {tol}"))?;

    let source = Artifacts::new(&fd_prefix);
    let mut tables = Vec::new();
    for suffix in ["_equilibrium.csv", "_segments.csv", "_cloud.csv", "_envelopes.csv"] {
        let path = source.path(suffix);
        let text = std::fs::read_to_string(&path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        tables.push((suffix, text));
    }
    let mut fd = render::fd_from_tables(&tables).map_err(|e| invalid(e.to_string()))?;
    fd.reference = (0..=256)
        .filter_map(|i| {
            let rho = spec.rho_max * i as f64 / 256.0;
            spec.equilibrium_flux(rho, 0).ok().map(|q| (rho, q))
        })
        .collect();
    let file = std::fs::File::open(&points_path).map_err(|e| invalid(format!("{}: {e}", points_path.display())))?;
    let points: Vec<FdPoint> = sensordata::read_points(file).map_err(|e| invalid(e.to_string()))?;
    require(!points.is_empty(), || "no points to overlay".into())?;
    let cov = sensordata::coverage_report(&spec, &points, &fd, tol).map_err(runtime)?;
    let inside = cov.inside.iter().filter(|&&b| b).count();
    println!("{inside}/{} points inside ({:.1}%)", points.len(), 100.0 * cov.fraction);

    ctx.param("fd_prefix", fd_prefix.display().to_string());
    ctx.param("points", points_path.display().to_string());
    ctx.param("tolerance", tol);
    let doc = json!({ "fraction": cov.fraction, "inside": inside, "total": points.len(), "tolerance": tol });
    ctx.artifacts.add("_overlay.svg", render::fd_svg(&fd, spec.rho_max, Some(&points)))?;
    ctx.artifacts.add("_coverage.json", pretty(&doc))?;
    ctx.finish("overlay")
}
