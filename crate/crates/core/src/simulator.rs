//! Finite-volume ring-road solver for the conservative PW and ARZ systems.
//!
//! First order HLL fluxes with wave-speed bounds from the characteristic
//! speeds, Strang-split with the exact solution of the relaxation step.
//!
//! Conserved variables are `ρ` and
//! * PW: `q = ρ u`, flux `(q, q²/ρ + p)`,
//! * ARZ: `q = ρ (u + h)`, flux `(q - ρ h, q u)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};

pub const DEFAULT_RING_LENGTH: f64 = 512.0 * 7.5;
pub const DEFAULT_N_CELLS: usize = 2048;
pub const DEFAULT_CFL: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimGrid {
    pub family: Family,
    pub n_cells: usize,
    pub dx: f64,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub t: f64,
    pub cfl: f64,
    pub steps: u64,
    /// Faces where the Rusanov flux replaced HLL to keep densities positive.
    pub rusanov_faces: u64,
    /// ARZ cells whose velocity was clamped to zero.
    pub clamped_cells: u64,
}

impl SimGrid {
    pub fn ring_length(&self) -> f64 {
        self.dx * self.n_cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    /// Vehicles on the ring, `Σ ρ dx`.
    pub fn total_count(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.dx
    }

    pub fn mean_density(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.n_cells as f64
    }

    /// `max |ρ - ρ̄|`.
    pub fn amplitude(&self) -> f64 {
        let mean = self.mean_density();
        self.rho.iter().fold(0.0, |a, &r| f64::max(a, (r - mean).abs()))
    }

    /// Velocity in cell `i`.
    pub fn velocity(&self, spec: &ModelSpec, i: usize) -> Result<f64> {
        velocity_of(spec, self.rho[i], self.q[i])
    }

    pub fn velocities(&self, spec: &ModelSpec) -> Result<Vec<f64>> {
        (0..self.n_cells).map(|i| self.velocity(spec, i)).collect()
    }
}

fn velocity_of(spec: &ModelSpec, rho: f64, q: f64) -> Result<f64> {
    Ok(match spec.family {
        Family::PW => q / rho,
        Family::ARZ => q / rho - spec.eval_pressure_or_hesitation(rho, 0)?,
    })
}

/// Conserved momentum for state `(rho, u)`.
pub fn momentum(spec: &ModelSpec, rho: f64, u: f64) -> Result<f64> {
    Ok(match spec.family {
        Family::PW => rho * u,
        Family::ARZ => rho * (u + spec.eval_pressure_or_hesitation(rho, 0)?),
    })
}

/// Momentum of the equilibrium state at density `rho`.
fn equilibrium_momentum(spec: &ModelSpec, rho: f64) -> Result<f64> {
    momentum(spec, rho, spec.eval_velocity(rho, 0)?)
}

/// `ρ_i = ρ̄ (1 + amplitude sin(2π modes x_i / ring_length))` at cell centres,
/// in equilibrium `u_i = U(ρ_i)`.
pub fn init_perturbed(
    spec: &ModelSpec,
    rho_bar: f64,
    amplitude: f64,
    modes: u32,
    n_cells: usize,
    ring_length: f64,
) -> Result<SimGrid> {
    if !(0.0..=0.1).contains(&amplitude) {
        return Err(Error::Invalid(format!("amplitude must lie in [0, 0.1], got {amplitude}")));
    }
    if !(rho_bar > 0.0 && rho_bar * (1.0 + amplitude) < spec.rho_max) {
        return Err(Error::Invalid(format!(
            "rho_bar = {rho_bar} with amplitude {amplitude} leaves (0, rho_max)"
        )));
    }
    if n_cells < 8 || !(ring_length > 0.0) {
        return Err(Error::Invalid("need at least 8 cells and a positive ring length".into()));
    }
    let dx = ring_length / n_cells as f64;
    let mut rho = Vec::with_capacity(n_cells);
    let mut q = Vec::with_capacity(n_cells);
    for i in 0..n_cells {
        let x = (i as f64 + 0.5) * dx;
        let r = rho_bar * (1.0 + amplitude * (2.0 * std::f64::consts::PI * modes as f64 * x / ring_length).sin());
        rho.push(r);
        q.push(equilibrium_momentum(spec, r)?);
    }
    Ok(SimGrid {
        family: spec.family,
        n_cells,
        dx,
        rho,
        q,
        t: 0.0,
        cfl: DEFAULT_CFL,
        steps: 0,
        rusanov_faces: 0,
        clamped_cells: 0,
    })
}

/// Per-cell data needed by the face fluxes.
#[derive(Debug, Clone, Copy)]
struct CellState {
    rho: f64,
    q: f64,
    f1: f64,
    f2: f64,
    l1: f64,
    l2: f64,
}

fn cell_state(spec: &ModelSpec, rho: f64, q: f64) -> Result<CellState> {
    if !(rho > 0.0) {
        return Err(Error::Invalid(format!("non-positive density {rho}")));
    }
    let a = spec.anticipation_jet(rho)?;
    Ok(match spec.family {
        Family::PW => {
            let u = q / rho;
            let c = a.d1.max(0.0).sqrt();
            CellState {
                rho,
                q,
                f1: q,
                f2: q * u + a.value,
                l1: u - c,
                l2: u + c,
            }
        }
        Family::ARZ => {
            let u = q / rho - a.value;
            CellState {
                rho,
                q,
                f1: rho * u,
                f2: q * u,
                l1: u - rho * a.d1,
                l2: u,
            }
        }
    })
}

fn hll(l: &CellState, r: &CellState) -> (f64, f64) {
    let sl = l.l1.min(r.l1);
    let sr = l.l2.max(r.l2);
    if sl >= 0.0 {
        (l.f1, l.f2)
    } else if sr <= 0.0 {
        (r.f1, r.f2)
    } else {
        let k = 1.0 / (sr - sl);
        (
            (sr * l.f1 - sl * r.f1 + sl * sr * (r.rho - l.rho)) * k,
            (sr * l.f2 - sl * r.f2 + sl * sr * (r.q - l.q)) * k,
        )
    }
}

fn rusanov(l: &CellState, r: &CellState) -> (f64, f64) {
    let a = [l.l1, l.l2, r.l1, r.l2].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (
        0.5 * (l.f1 + r.f1) - 0.5 * a * (r.rho - l.rho),
        0.5 * (l.f2 + r.f2) - 0.5 * a * (r.q - l.q),
    )
}

fn relax(spec: &ModelSpec, grid: &mut SimGrid, dt: f64) -> Result<()> {
    let decay = (-dt / spec.tau).exp();
    for i in 0..grid.n_cells {
        let q_eq = equilibrium_momentum(spec, grid.rho[i])?;
        grid.q[i] = q_eq + (grid.q[i] - q_eq) * decay;
    }
    Ok(())
}

/// Largest stable step for the current state.
pub fn stable_dt(spec: &ModelSpec, grid: &SimGrid) -> Result<f64> {
    let mut smax = 0.0f64;
    for i in 0..grid.n_cells {
        let c = cell_state(spec, grid.rho[i], grid.q[i])?;
        smax = smax.max(c.l1.abs()).max(c.l2.abs());
    }
    Ok(grid.cfl * grid.dx / smax.max(1e-12))
}

/// Advances by one step: half relaxation, HLL transport, half relaxation.
/// `dt = None` takes the CFL step; an explicit `dt` above it is an error.
pub fn step(grid: &mut SimGrid, spec: &ModelSpec, dt: Option<f64>) -> Result<f64> {
    let limit = stable_dt(spec, grid)?;
    let dt = match dt {
        Some(dt) if dt > limit * (1.0 + 1e-12) => return Err(Error::Cfl { dt, limit }),
        Some(dt) => dt,
        None => limit,
    };
    relax(spec, grid, 0.5 * dt)?;

    let n = grid.n_cells;
    let cells: Vec<CellState> = (0..n)
        .map(|i| cell_state(spec, grid.rho[i], grid.q[i]))
        .collect::<Result<_>>()?;
    // face i sits between cells i and i+1 (periodic)
    let mut flux: Vec<(f64, f64)> = (0..n).map(|i| hll(&cells[i], &cells[(i + 1) % n])).collect();
    let k = dt / grid.dx;
    let update = |flux: &[(f64, f64)], i: usize| {
        let (fl, fr) = (flux[(i + n - 1) % n], flux[i]);
        (cells[i].rho - k * (fr.0 - fl.0), cells[i].q - k * (fr.1 - fl.1))
    };
    let bad: Vec<usize> = (0..n).filter(|&i| !(update(&flux, i).0 > 0.0)).collect();
    if !bad.is_empty() {
        for &i in &bad {
            for f in [(i + n - 1) % n, i] {
                flux[f] = rusanov(&cells[f], &cells[(f + 1) % n]);
                grid.rusanov_faces += 1;
            }
        }
    }
    for i in 0..n {
        let (r, q) = update(&flux, i);
        if !(r > 0.0) {
            return Err(Error::Invalid(format!("density {r} in cell {i} at t = {}", grid.t)));
        }
        grid.rho[i] = r;
        grid.q[i] = q;
    }
    if spec.family == Family::ARZ {
        for i in 0..n {
            let h = spec.eval_pressure_or_hesitation(grid.rho[i], 0)?;
            if grid.q[i] / grid.rho[i] - h < 0.0 {
                grid.q[i] = grid.rho[i] * h;
                grid.clamped_cells += 1;
            }
        }
    }

    relax(spec, grid, 0.5 * dt)?;
    grid.t += dt;
    grid.steps += 1;
    Ok(dt)
}

/// Inputs of one ring-road run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub rho_bar: f64,
    pub amplitude: f64,
    pub modes: u32,
    pub n_cells: usize,
    pub ring_length: f64,
    pub cfl: f64,
    /// Final time, s.
    pub t_end: f64,
    /// Sensor window `Δt = α τ`.
    pub alpha: f64,
    /// Number of evenly spaced snapshots to keep (the last one at `t_end`).
    pub snapshots: usize,
    /// Amplitude samples per `τ`.
    pub samples_per_tau: usize,
    /// Stop once the amplitude exceeds this multiple of its initial value.
    pub stop_growth: Option<f64>,
}

impl Scenario {
    /// Default grid and a run of `500 τ`.
    pub fn new(spec: &ModelSpec, rho_bar: f64) -> Self {
        Self {
            rho_bar,
            amplitude: 0.01,
            modes: 1,
            n_cells: DEFAULT_N_CELLS,
            ring_length: DEFAULT_RING_LENGTH,
            cfl: DEFAULT_CFL,
            t_end: 500.0 * spec.tau,
            alpha: 1.0,
            snapshots: 0,
            samples_per_tau: 4,
            stop_growth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorWindow {
    pub t: f64,
    pub rho_bar: f64,
    pub q_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimDiagnostics {
    /// Time reached; below `t_end` only when `stop_growth` fired.
    pub t_final: f64,
    /// `(t, max |ρ - ρ̄|)`.
    pub amplitude: Vec<(f64, f64)>,
    /// Exponential rate of the amplitude over the second half of the run, 1/s.
    pub growth_rate: f64,
    /// Amplitude changed by less than 5% over the last `20 τ` and grew
    /// above its initial value.
    pub saturated: bool,
    /// Speed of the wave train, m/s; `None` unless saturated.
    pub wave_speed: Option<f64>,
    /// Upward crossings of the mean density at `t_end`.
    pub wave_count: usize,
    /// Virtual sensor at `x = 0`, windows of `α τ` ending at `t`.
    pub sensor: Vec<SensorWindow>,
    pub snapshots: Vec<Snapshot>,
    pub steps: u64,
    pub rusanov_faces: u64,
    pub clamped_cells: u64,
    /// Largest relative change of the vehicle count in a single step.
    pub max_count_drift: f64,
}

/// Runs a scenario and collects amplitude, wave and sensor diagnostics.
pub fn run_and_diagnose(spec: &ModelSpec, sc: &Scenario) -> Result<SimDiagnostics> {
    if !(sc.cfl > 0.0 && sc.cfl <= 0.5) {
        return Err(Error::Invalid(format!("cfl must lie in (0, 0.5], got {}", sc.cfl)));
    }
    if !(sc.t_end > 0.0 && sc.alpha > 0.0) {
        return Err(Error::Invalid("t_end and alpha must be positive".into()));
    }
    let mut grid = init_perturbed(spec, sc.rho_bar, sc.amplitude, sc.modes, sc.n_cells, sc.ring_length)?;
    grid.cfl = sc.cfl;
    let tau = spec.tau;

    let sample_dt = tau / sc.samples_per_tau.max(1) as f64;
    let window = sc.alpha * tau;
    let corr_start = (sc.t_end - 20.0 * tau).max(0.5 * sc.t_end);
    let mut events: Vec<f64> = Vec::new();
    let mut push_grid = |dt: f64, from: f64| {
        let mut t = from;
        while t < sc.t_end - 1e-9 * dt {
            events.push(t);
            t += dt;
        }
    };
    push_grid(sample_dt, sample_dt);
    push_grid(window, window);
    push_grid(tau, corr_start);
    let snap_times: Vec<f64> = (1..=sc.snapshots)
        .map(|k| sc.t_end * k as f64 / sc.snapshots as f64)
        .collect();
    events.extend(snap_times.iter().copied());
    events.push(sc.t_end);
    events.sort_by(f64::total_cmp);
    events.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * tau);

    let is_on = |t: f64, dt: f64, from: f64| {
        if t < from - 1e-9 * tau {
            return false;
        }
        let k = ((t - from) / dt).round();
        (from + k * dt - t).abs() < 1e-9 * tau
    };

    let mut amp = vec![(0.0, grid.amplitude())];
    let mut sensor = Vec::new();
    let mut corr_frames: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut snapshots = Vec::new();
    let mut acc_rho = 0.0;
    let mut acc_q = 0.0;
    let mut acc_t = 0.0;
    let mut max_drift = 0.0f64;

    let a0 = grid.amplitude();
    'run: for &target in &events {
        while grid.t < target - 1e-12 * tau {
            let limit = stable_dt(spec, &grid)?;
            let dt = limit.min(target - grid.t);
            let before = grid.total_count();
            // sensor at x = 0 integrates the cell straddling it over the step
            let (r0, q0) = sensor_state(spec, &grid)?;
            step(&mut grid, spec, Some(dt))?;
            let (r1, q1) = sensor_state(spec, &grid)?;
            acc_rho += 0.5 * (r0 + r1) * dt;
            acc_q += 0.5 * (q0 + q1) * dt;
            acc_t += dt;
            let after = grid.total_count();
            max_drift = max_drift.max(((after - before) / before).abs());
        }
        let t = grid.t;
        if is_on(t, sample_dt, sample_dt) || (t - sc.t_end).abs() < 1e-9 * tau {
            let a = grid.amplitude();
            amp.push((t, a));
            if sc.stop_growth.is_some_and(|k| a > k * a0) {
                break 'run;
            }
        }
        if is_on(t, window, window) && acc_t > 0.0 {
            sensor.push(SensorWindow {
                t,
                rho_bar: acc_rho / acc_t,
                q_bar: acc_q / acc_t,
            });
            acc_rho = 0.0;
            acc_q = 0.0;
            acc_t = 0.0;
        }
        if is_on(t, tau, corr_start) || (t - sc.t_end).abs() < 1e-9 * tau {
            if corr_frames.last().map_or(true, |f| (f.0 - t).abs() > 1e-9 * tau) {
                corr_frames.push((t, grid.rho.clone()));
            }
        }
        if snap_times.iter().any(|&s| (s - t).abs() < 1e-9 * tau) {
            snapshots.push(Snapshot {
                t,
                x: (0..grid.n_cells).map(|i| grid.x(i)).collect(),
                rho: grid.rho.clone(),
                u: grid.velocities(spec)?,
            });
        }
    }

    let growth_rate = growth_rate(&amp, 0.5);
    let a_end = amp.last().unwrap().1;
    let a_ref = amp
        .iter()
        .rev()
        .find(|(t, _)| *t <= grid.t - 20.0 * tau + 1e-9 * tau)
        .map(|p| p.1);
    let grew = a_end > 2.0 * amp[0].1.max(1e-300);
    let saturated = grew && a_ref.is_some_and(|a| ((a_end - a) / a_end).abs() < 0.05);
    let wave_count = upward_crossings(&grid.rho);
    let wave_speed = if saturated && wave_count > 0 {
        wave_speed(&corr_frames, grid.dx, wave_count)
    } else {
        None
    };
    Ok(SimDiagnostics {
        t_final: grid.t,
        amplitude: amp,
        growth_rate,
        saturated,
        wave_speed,
        wave_count,
        sensor,
        snapshots,
        steps: grid.steps,
        rusanov_faces: grid.rusanov_faces,
        clamped_cells: grid.clamped_cells,
        max_count_drift: max_drift,
    })
}

/// Density and flow at `x = 0`, averaged over the two cells around it.
fn sensor_state(spec: &ModelSpec, grid: &SimGrid) -> Result<(f64, f64)> {
    let n = grid.n_cells;
    let mut r = 0.0;
    let mut f = 0.0;
    for i in [n - 1, 0] {
        let rho = grid.rho[i];
        r += 0.5 * rho;
        f += 0.5 * rho * grid.velocity(spec, i)?;
    }
    Ok((r, f))
}

/// Least-squares slope of `ln(amplitude)` against time over the trailing
/// `fraction` of the samples.
pub fn growth_rate(series: &[(f64, f64)], fraction: f64) -> f64 {
    let start = ((1.0 - fraction) * series.len() as f64) as usize;
    let pts: Vec<(f64, f64)> = series[start..]
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, a)| (t, a.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ma = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ma)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    sxy / sxx
}

/// Upward crossings of the mean, counted around the ring.
pub fn upward_crossings(rho: &[f64]) -> usize {
    let n = rho.len();
    let mean = rho.iter().sum::<f64>() / n as f64;
    (0..n)
        .filter(|&i| rho[i] < mean && rho[(i + 1) % n] >= mean)
        .count()
}

/// Mean shift per frame interval from periodic cross-correlation of
/// consecutive frames, refined by a parabola through the peak.
pub fn wave_speed(frames: &[(f64, Vec<f64>)], dx: f64, wave_count: usize) -> Option<f64> {
    if frames.len() < 2 {
        return None;
    }
    let n = frames[0].1.len();
    let spacing = n / wave_count.max(1);
    let kmax = (n / 8).min(spacing / 2).max(1) as i64;
    let mut speeds = Vec::new();
    for pair in frames.windows(2) {
        let (t0, a) = (&pair[0].0, &pair[0].1);
        let (t1, b) = (&pair[1].0, &pair[1].1);
        let dt = t1 - t0;
        if dt <= 0.0 {
            continue;
        }
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let corr = |k: i64| -> f64 {
            (0..n)
                .map(|i| {
                    let j = (i as i64 + k).rem_euclid(n as i64) as usize;
                    (a[i] - ma) * (b[j] - mb)
                })
                .sum()
        };
        let (mut best_k, mut best) = (0i64, f64::NEG_INFINITY);
        for k in -kmax..=kmax {
            let c = corr(k);
            if c > best {
                best = c;
                best_k = k;
            }
        }
        let (cm, cp) = (corr(best_k - 1), corr(best_k + 1));
        let denom = cm - 2.0 * best + cp;
        let frac = if denom < 0.0 { 0.5 * (cm - cp) / denom } else { 0.0 };
        speeds.push((best_k as f64 + frac) * dx / dt);
    }
    if speeds.is_empty() {
        None
    } else {
        Some(speeds.iter().sum::<f64>() / speeds.len() as f64)
    }
}
