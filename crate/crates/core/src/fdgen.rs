//! Fundamental diagrams built from jamiton families.
//!
//! * [`maximal_fd`]: equilibrium on stable densities, one maximal jamiton
//!   segment per unstable density.
//! * [`aggregate_fd`]: window averages of periodic jamiton chains seen by a
//!   fixed sensor over `Δt = α τ`.
//! * [`effective_fd`]: averages over whole jamiton periods.
//! * [`envelopes`]: the upper envelope `(ρ_R, m + s ρ_R)` and the lower
//!   envelope formed by intersections of neighbouring jamiton lines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jamiton::{
    integrate_piece, length_and_count, maximal_truncation, shock_pair_frac, Integrand, JamitonFamily,
};
use crate::models::{Family, ModelSpec};
use crate::numeric::quad::GaussLegendre;
use crate::stability::{scc_holds, unstable_bands_default, SccStatus, StabilityBand};

pub const DEFAULT_N_RHO: usize = 256;
pub const DEFAULT_N_FAMILIES: usize = 200;
pub const DEFAULT_N_LENGTHS: usize = 24;
pub const DEFAULT_N_PHASES: usize = 64;
/// Nodes of the per-family cumulative table.
pub const TABLE_NODES: usize = 1 << 14;
/// The maximal chain switches to its limit density once `ρ - ρ_M` drops
/// below this fraction of `ρ_max`.
pub const TAIL_CUTOFF: f64 = 1e-6;
/// Families with `|s|` below this fraction of `u_max` are treated as stationary.
pub const STATIONARY_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdMode {
    Maximal,
    Aggregate,
    Effective,
}

impl std::str::FromStr for FdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximal" => Ok(FdMode::Maximal),
            "aggregate" => Ok(FdMode::Aggregate),
            "effective" => Ok(FdMode::Effective),
            _ => Err(Error::Invalid(format!("unknown fd mode '{s}'"))),
        }
    }
}

/// Piece of a jamiton line `Q = m + s ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdSegment {
    pub rho_s: f64,
    pub m: f64,
    pub s: f64,
    pub rho_a: f64,
    pub q_a: f64,
    pub rho_b: f64,
    pub q_b: f64,
}

impl FdSegment {
    /// Maximal segment from `(ρ_M, ·)` to `(ρ_R, ·)`.
    pub fn maximal(fam: &JamitonFamily) -> Self {
        Self::on_line(fam, fam.rho_m(), fam.rho_r())
    }

    pub fn on_line(fam: &JamitonFamily, rho_a: f64, rho_b: f64) -> Self {
        Self {
            rho_s: fam.rho_s,
            m: fam.m,
            s: fam.s,
            rho_a,
            q_a: fam.line(rho_a),
            rho_b,
            q_b: fam.line(rho_b),
        }
    }

    pub fn line(&self, rho: f64) -> f64 {
        self.m + self.s * rho
    }
}

/// One aggregated or effective sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloudPoint {
    pub rho_bar: f64,
    pub q_bar: f64,
    pub rho_s: f64,
    /// Shock level as a fraction of `(r_min, r_max)`; 1 for the maximal jamiton.
    pub r_frac: f64,
    /// Window start as a fraction of the jamiton length; 1 marks the limit
    /// point of the maximal jamiton's tail.
    pub phase: f64,
    pub m: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundamentalDiagram {
    pub mode: FdMode,
    /// `Δt / τ`; zero for maximal and effective diagrams.
    pub alpha: f64,
    /// `(ρ, Q_eq)` on stable densities.
    pub equilibrium: Vec<(f64, f64)>,
    /// `(ρ, Q_eq)` over the whole density range, for reference.
    pub reference: Vec<(f64, f64)>,
    pub segments: Vec<FdSegment>,
    pub cloud: Vec<CloudPoint>,
    pub upper_envelope: Vec<(f64, f64)>,
    pub lower_envelope: Vec<(f64, f64)>,
    pub bands: Vec<StabilityBand>,
    /// Per-density or per-family problems met during the sweep.
    pub diagnostics: Vec<String>,
}

impl FundamentalDiagram {
    fn empty(mode: FdMode, alpha: f64) -> Self {
        Self {
            mode,
            alpha,
            equilibrium: Vec::new(),
            reference: Vec::new(),
            segments: Vec::new(),
            cloud: Vec::new(),
            upper_envelope: Vec::new(),
            lower_envelope: Vec::new(),
            bands: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    /// Line pieces covered by the diagram: segments for maximal diagrams,
    /// per-family cloud extents otherwise.
    pub fn pieces(&self) -> Vec<FdSegment> {
        if self.mode == FdMode::Maximal || self.cloud.is_empty() {
            return self.segments.clone();
        }
        let mut out: Vec<FdSegment> = Vec::new();
        for p in &self.cloud {
            match out.last_mut() {
                Some(seg) if seg.rho_s == p.rho_s => {
                    if p.rho_bar < seg.rho_a {
                        seg.rho_a = p.rho_bar;
                        seg.q_a = p.q_bar;
                    }
                    if p.rho_bar > seg.rho_b {
                        seg.rho_b = p.rho_bar;
                        seg.q_b = p.q_bar;
                    }
                }
                _ => out.push(FdSegment {
                    rho_s: p.rho_s,
                    m: p.m,
                    s: p.s,
                    rho_a: p.rho_bar,
                    q_a: p.q_bar,
                    rho_b: p.rho_bar,
                    q_b: p.q_bar,
                }),
            }
        }
        out
    }
}

fn reference_curve(spec: &ModelSpec, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .filter_map(|i| {
            let rho = spec.rho_max * i as f64 / (n - 1) as f64;
            spec.equilibrium_flux(rho, 0).ok().map(|q| (rho, q))
        })
        .collect()
}

/// `n` sonic densities per band at cell centres.
pub fn family_grid(band: &StabilityBand, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| band.rho_lo + band.width() * (i as f64 + 0.5) / n as f64)
        .collect()
}

/// Shock-level fractions `j / (n + 1)`, `j = 1..=n`.
pub fn length_fracs(n: usize) -> Vec<f64> {
    (1..=n).map(|j| j as f64 / (n + 1) as f64).collect()
}

/// Equilibrium points on stable densities and maximal segments elsewhere,
/// on a uniform grid of `n_rho` densities in `[0, ρ_max]`.
pub fn maximal_fd(spec: &ModelSpec, n_rho: usize) -> Result<FundamentalDiagram> {
    if n_rho < 32 {
        return Err(Error::Invalid(format!("n_rho must be >= 32, got {n_rho}")));
    }
    let mut fd = FundamentalDiagram::empty(FdMode::Maximal, 0.0);
    fd.bands = unstable_bands_default(spec)?;
    fd.reference = reference_curve(spec, n_rho);
    let grid: Vec<f64> = (0..n_rho).map(|i| spec.rho_max * i as f64 / (n_rho - 1) as f64).collect();

    enum Item {
        Eq(f64, f64),
        Seg(FdSegment),
        Diag(String),
    }
    let items = crate::par_map(&grid, |&rho| -> Item {
        let interior = rho > 0.0 && rho < spec.rho_max;
        let status = if interior {
            match scc_holds(spec, rho) {
                Ok(scc) => scc.status,
                Err(e) => return Item::Diag(format!("rho = {rho}: {e}")),
            }
        } else {
            SccStatus::Holds
        };
        match status {
            SccStatus::Holds => match spec.equilibrium_flux(rho, 0) {
                Ok(q) => Item::Eq(rho, q),
                Err(e) => Item::Diag(format!("rho = {rho}: {e}")),
            },
            SccStatus::Degenerate => Item::Diag(format!("rho = {rho}: degenerate SCC, skipped")),
            SccStatus::Violated => match JamitonFamily::new(spec, rho) {
                Ok(fam) => Item::Seg(FdSegment::maximal(&fam)),
                Err(e) => Item::Diag(format!("rho = {rho}: {e}")),
            },
        }
    });
    for item in items {
        match item {
            Item::Eq(r, q) => fd.equilibrium.push((r, q)),
            Item::Seg(s) => fd.segments.push(s),
            Item::Diag(d) => fd.diagnostics.push(d),
        }
    }
    if !fd.bands.is_empty() {
        let (upper, lower) = envelopes(spec, DEFAULT_N_FAMILIES)?;
        fd.upper_envelope = upper;
        fd.lower_envelope = lower;
    }
    Ok(fd)
}

/// `dm/dρ_S` and `ds/dρ_S` from the closed forms of `m(ρ)` and `s(ρ)`.
pub fn family_slopes(spec: &ModelSpec, rho: f64) -> Result<(f64, f64, f64, f64)> {
    let u = spec.velocity_jet(rho)?;
    let a = spec.anticipation_jet(rho)?;
    let (m, dm) = match spec.family {
        Family::PW => {
            let c = a.d1.sqrt();
            (rho * c, c + rho * a.d2 / (2.0 * c))
        }
        Family::ARZ => (rho * rho * a.d1, 2.0 * rho * a.d1 + rho * rho * a.d2),
    };
    let s = u.value - m / rho;
    let ds = u.d1 - dm / rho + m / (rho * rho);
    Ok((m, s, dm, ds))
}

/// Intersection `(ρ*, Q*)` of the jamiton lines of neighbouring families,
/// `ρ* = -m'(ρ_S) / s'(ρ_S)`.
pub fn lower_envelope_point(spec: &ModelSpec, rho_s: f64) -> Result<(f64, f64)> {
    let (m, s, dm, ds) = family_slopes(spec, rho_s)?;
    let rho = -dm / ds;
    Ok((rho, m + s * rho))
}

/// Upper and lower envelopes over every unstable band.
pub fn envelopes(spec: &ModelSpec, n_families: usize) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let bands = unstable_bands_default(spec)?;
    if bands.is_empty() {
        return Err(Error::Invalid("model has no unstable band; envelopes are empty".into()));
    }
    let rhos: Vec<f64> = bands.iter().flat_map(|b| family_grid(b, n_families.max(1))).collect();
    let rows = crate::par_map(&rhos, |&rho_s| {
        let upper = JamitonFamily::new(spec, rho_s).map(|f| (f.rho_r(), f.line(f.rho_r()))).ok();
        let lower = lower_envelope_point(spec, rho_s).ok().filter(|&(r, q)| {
            r > 0.0
                && r < spec.rho_max
                && spec
                    .equilibrium_flux(r, 0)
                    .map(|qe| q <= qe + 1e-12 * spec.u_max * spec.rho_max)
                    .unwrap_or(false)
        });
        (upper, lower)
    });
    let upper = rows.iter().filter_map(|r| r.0).collect();
    let lower = rows.iter().filter_map(|r| r.1).collect();
    Ok((upper, lower))
}

/// Cumulative `χ`, `η` and flux of one family along `v`, from `v_R` to the
/// truncation point of the maximal profile. Uniform in `v` left of `v_S`,
/// geometric in the distance to `v_M` right of it.
pub struct FamilyTable<'a> {
    pub fam: JamitonFamily,
    g: Integrand<'a>,
    v: Vec<f64>,
    chi: Vec<f64>,
    eta: Vec<f64>,
    flux: Vec<f64>,
}

/// `(v, χ, η, flux)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    v: f64,
    chi: f64,
    eta: f64,
    flux: f64,
}

impl<'a> FamilyTable<'a> {
    pub fn new(spec: &'a ModelSpec, fam: &JamitonFamily, nodes: usize) -> Result<Self> {
        let nodes = nodes.max(16);
        let g = Integrand::new(spec, fam)?;
        let v_end = maximal_truncation(spec, fam)?;
        let n_left = nodes / 2;
        let n_right = nodes - n_left;
        let mut v = Vec::with_capacity(nodes + 1);
        for i in 0..n_left {
            v.push(fam.v_r + (fam.v_s - fam.v_r) * i as f64 / n_left as f64);
        }
        let d0 = fam.v_m - fam.v_s;
        let ratio = (fam.v_m - v_end) / d0;
        for i in 0..=n_right {
            v.push(fam.v_m - d0 * ratio.powf(i as f64 / n_right as f64));
        }
        v[n_left] = fam.v_s;
        *v.last_mut().unwrap() = v_end;

        let rule = GaussLegendre::gl4();
        let mut chi = vec![0.0; v.len()];
        let mut eta = vec![0.0; v.len()];
        let mut flux = vec![0.0; v.len()];
        for i in 1..v.len() {
            let p = integrate_piece(&g, rule, v[i - 1], v[i], fam.v_m, 1)?;
            chi[i] = chi[i - 1] + p[0];
            eta[i] = eta[i - 1] + p[1];
            flux[i] = flux[i - 1] + p[2];
        }
        Ok(Self {
            fam: *fam,
            g,
            v,
            chi,
            eta,
            flux,
        })
    }

    pub fn v_end(&self) -> f64 {
        *self.v.last().unwrap()
    }

    fn node(&self, i: usize) -> Node {
        Node {
            v: self.v[i],
            chi: self.chi[i],
            eta: self.eta[i],
            flux: self.flux[i],
        }
    }

    /// Exact cumulative values at `v`, integrating from the nearest node below.
    fn at(&self, v: f64) -> Result<(usize, Node)> {
        let k = self.v.partition_point(|&x| x <= v).saturating_sub(1);
        let base = self.node(k);
        if v == base.v {
            return Ok((k, base));
        }
        let p = integrate_piece(&self.g, GaussLegendre::gl8(), base.v, v, self.fam.v_m, 1)?;
        Ok((
            k,
            Node {
                v,
                chi: base.chi + p[0],
                eta: base.eta + p[1],
                flux: base.flux + p[2],
            },
        ))
    }

    /// Periodic chain of jamitons with shock states `(v⁺, v⁻)`.
    pub fn chain(&self, v_plus: f64, v_minus: f64) -> Result<Chain<'_>> {
        if !(v_plus >= self.fam.v_r && v_plus < v_minus && v_minus <= self.v_end()) {
            return Err(Error::Invalid(format!(
                "shock pair ({v_plus}, {v_minus}) outside the tabulated range [{}, {}]",
                self.fam.v_r,
                self.v_end()
            )));
        }
        let (k0, start) = self.at(v_plus)?;
        let (k1, end) = self.at(v_minus)?;
        Ok(Chain::new(self, k0 + 1, k1, start, end, None))
    }

    /// The maximal jamiton: density `ρ_M` ahead of the shock, the profile from
    /// `v_R`, and `ρ_M` again once `ρ - ρ_M < 1e-6 ρ_max`.
    pub fn maximal_chain(&self, spec: &ModelSpec) -> Result<Chain<'_>> {
        let v_cut = (1.0 / (self.fam.rho_m() + TAIL_CUTOFF * spec.rho_max)).min(self.v_end());
        let (k0, start) = self.at(self.fam.v_r)?;
        let (k1, end) = self.at(v_cut)?;
        Ok(Chain::new(self, k0 + 1, k1, start, end, Some(self.fam.rho_m())))
    }
}

/// A jamiton viewed through a [`FamilyTable`]: the start node, table nodes
/// `lo..=hi`, and the end node. Positions are `η` measured from the shock.
pub struct Chain<'t> {
    table: &'t FamilyTable<'t>,
    /// First interior table node.
    lo: usize,
    /// Number of interior table nodes.
    inner: usize,
    start: Node,
    end: Node,
    /// Limit density outside the profile, for the maximal jamiton.
    tail: Option<f64>,
    pub length: f64,
    pub count: f64,
}

impl<'t> Chain<'t> {
    /// Interior nodes are `lo..=hi`; empty when `hi < lo`.
    fn new(table: &'t FamilyTable<'t>, lo: usize, hi: usize, start: Node, end: Node, tail: Option<f64>) -> Self {
        Self {
            table,
            lo,
            inner: (hi + 1).saturating_sub(lo),
            start,
            end,
            tail,
            length: end.eta - start.eta,
            count: end.chi - start.chi,
        }
    }

    pub fn is_maximal(&self) -> bool {
        self.tail.is_some()
    }

    fn n_points(&self) -> usize {
        2 + self.inner
    }

    fn point(&self, i: usize) -> Node {
        let n = self.n_points();
        if i == 0 {
            self.start
        } else if i == n - 1 {
            self.end
        } else {
            self.table.node(self.lo + i - 1)
        }
    }

    /// Linear interpolation of `(χ, v, flux)` at `η`-offset `x ∈ [0, L]`.
    fn interp(&self, x: f64) -> (f64, f64, f64) {
        let target = self.start.eta + x;
        let n = self.n_points();
        let (mut a, mut b) = (0usize, n - 1);
        if target <= self.start.eta {
            return (self.start.chi, self.start.v, self.start.flux);
        }
        if target >= self.end.eta {
            return (self.end.chi, self.end.v, self.end.flux);
        }
        while b - a > 1 {
            let mid = (a + b) / 2;
            if self.point(mid).eta <= target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let (p, q) = (self.point(a), self.point(b));
        let t = if q.eta > p.eta { (target - p.eta) / (q.eta - p.eta) } else { 0.0 };
        (
            p.chi + t * (q.chi - p.chi),
            p.v + t * (q.v - p.v),
            p.flux + t * (q.flux - p.flux),
        )
    }

    /// Vehicles and flux integral between the shock at `η = 0` and `x`.
    /// Periodic for ordinary jamitons; the maximal one continues at `ρ_M`
    /// on both sides.
    pub fn cumulative(&self, x: f64) -> (f64, f64) {
        let fam = &self.table.fam;
        match self.tail {
            Some(rho_m) => {
                let q_m = fam.line(rho_m);
                if x < 0.0 {
                    (x * rho_m, x * q_m)
                } else if x > self.length {
                    let total_flux = self.end.flux - self.start.flux;
                    let extra = x - self.length;
                    (self.count + extra * rho_m, total_flux + extra * q_m)
                } else {
                    let (c, _, f) = self.interp(x);
                    (c - self.start.chi, f - self.start.flux)
                }
            }
            None => {
                let k = (x / self.length).floor();
                let rem = (x - k * self.length).clamp(0.0, self.length);
                let (c, _, f) = self.interp(rem);
                let total_flux = self.end.flux - self.start.flux;
                (k * self.count + c - self.start.chi, k * total_flux + f - self.start.flux)
            }
        }
    }

    /// Density at `η`-offset `x`.
    pub fn density_at(&self, x: f64) -> f64 {
        if let Some(rho_m) = self.tail {
            if x < 0.0 || x > self.length {
                return rho_m;
            }
            return 1.0 / self.interp(x).1;
        }
        let k = (x / self.length).floor();
        let rem = (x - k * self.length).clamp(0.0, self.length);
        1.0 / self.interp(rem).1
    }

    /// Window average over `[a, a + len]`: `(ρ̄, Q̄)` with `Q̄` taken from the
    /// flux column. Zero `len` gives the point value.
    pub fn window(&self, a: f64, len: f64) -> (f64, f64) {
        let fam = &self.table.fam;
        if len <= 0.0 {
            let rho = self.density_at(a);
            return (rho, fam.line(rho));
        }
        let (c0, f0) = self.cumulative(a);
        let (c1, f1) = self.cumulative(a + len);
        ((c1 - c0) / len, (f1 - f0) / len)
    }
}

/// Cloud points of one family: `n_lengths` periodic chains plus the maximal
/// jamiton, each sampled at `n_phases` window positions.
pub fn aggregate_family(
    spec: &ModelSpec,
    fam: &JamitonFamily,
    alpha: f64,
    n_lengths: usize,
    n_phases: usize,
    table_nodes: usize,
) -> Result<Vec<CloudPoint>> {
    let table = FamilyTable::new(spec, fam, table_nodes)?;
    let window = fam.s.abs() * alpha;
    let stationary = fam.s.abs() < STATIONARY_S * spec.u_max;
    let n_phases = n_phases.max(1);
    let mut out = Vec::with_capacity((n_lengths + 1) * n_phases + 1);
    let mut emit = |rho_bar: f64, r_frac: f64, phase: f64| {
        out.push(CloudPoint {
            rho_bar,
            q_bar: fam.line(rho_bar),
            rho_s: fam.rho_s,
            r_frac,
            phase,
            m: fam.m,
            s: fam.s,
        });
    };
    for frac in length_fracs(n_lengths) {
        let (vp, vm) = shock_pair_frac(spec, fam, frac)?;
        let chain = table.chain(vp, vm)?;
        let pointwise = stationary || window < 1e-9 * chain.length;
        for j in 0..n_phases {
            let phase = j as f64 / n_phases as f64;
            let a = phase * chain.length;
            let len = if pointwise { 0.0 } else { window };
            emit(chain.window(a, len).0, frac, phase);
        }
    }
    let chain = table.maximal_chain(spec)?;
    let pointwise = stationary || window < 1e-9 * chain.length;
    for j in 0..n_phases {
        let phase = j as f64 / n_phases as f64;
        let a = phase * chain.length;
        let len = if pointwise { 0.0 } else { window };
        emit(chain.window(a, len).0, 1.0, phase);
    }
    emit(fam.rho_m(), 1.0, 1.0);
    Ok(out)
}

/// Temporally aggregated diagram with `α = Δt / τ`.
pub fn aggregate_fd(
    spec: &ModelSpec,
    alpha: f64,
    n_families: usize,
    n_lengths: usize,
    n_phases: usize,
) -> Result<FundamentalDiagram> {
    aggregate_fd_with(spec, alpha, n_families, n_lengths, n_phases, TABLE_NODES)
}

/// [`aggregate_fd`] with an explicit table resolution.
pub fn aggregate_fd_with(
    spec: &ModelSpec,
    alpha: f64,
    n_families: usize,
    n_lengths: usize,
    n_phases: usize,
    table_nodes: usize,
) -> Result<FundamentalDiagram> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let mut fd = family_sweep(spec, FdMode::Aggregate, alpha, n_families)?;
    let fams: Vec<JamitonFamily> = fd_families(spec, &fd, n_families, &mut Vec::new());
    let results = crate::par_map(&fams, |fam| aggregate_family(spec, fam, alpha, n_lengths, n_phases, table_nodes));
    for (fam, r) in fams.iter().zip(results) {
        match r {
            Ok(points) => fd.cloud.extend(points),
            Err(e) => fd.diagnostics.push(format!("rho_S = {}: {e}", fam.rho_s)),
        }
    }
    Ok(fd)
}

/// Effective points of one family: `(N/L, m + s N/L)` per shock level.
pub fn effective_family(spec: &ModelSpec, fam: &JamitonFamily, fracs: &[f64]) -> Result<Vec<CloudPoint>> {
    fracs
        .iter()
        .map(|&frac| {
            let (vp, vm) = shock_pair_frac(spec, fam, frac)?;
            let lc = length_and_count(spec, fam, vp, vm)?;
            let rho_bar = lc.mean_density();
            Ok(CloudPoint {
                rho_bar,
                q_bar: fam.line(rho_bar),
                rho_s: fam.rho_s,
                r_frac: frac,
                phase: 0.0,
                m: fam.m,
                s: fam.s,
            })
        })
        .collect()
}

/// Averages over complete jamiton periods.
pub fn effective_fd(spec: &ModelSpec, n_families: usize, n_lengths: usize) -> Result<FundamentalDiagram> {
    let mut fd = family_sweep(spec, FdMode::Effective, 0.0, n_families)?;
    let mut diags = Vec::new();
    let fams: Vec<JamitonFamily> = fd_families(spec, &fd, n_families, &mut diags)
        .into_iter()
        .filter(|f| {
            let keep = f.s.abs() >= STATIONARY_S * spec.u_max;
            if !keep {
                diags.push(format!("rho_S = {}: stationary family (s = 0) skipped", f.rho_s));
            }
            keep
        })
        .collect();
    fd.diagnostics.extend(diags);
    let fracs = length_fracs(n_lengths);
    let results = crate::par_map(&fams, |fam| effective_family(spec, fam, &fracs));
    for (fam, r) in fams.iter().zip(results) {
        match r {
            Ok(points) => {
                for p in &points {
                    if p.rho_bar > fam.rho_s * (1.0 + 1e-12) {
                        fd.diagnostics.push(format!(
                            "rho_S = {}: mean density {} exceeds the sonic density",
                            fam.rho_s, p.rho_bar
                        ));
                    }
                }
                fd.cloud.extend(points)
            }
            Err(e) => fd.diagnostics.push(format!("rho_S = {}: {e}", fam.rho_s)),
        }
    }
    Ok(fd)
}

/// Equilibrium, bands, envelopes and maximal segments on the family grid.
fn family_sweep(spec: &ModelSpec, mode: FdMode, alpha: f64, n_families: usize) -> Result<FundamentalDiagram> {
    let mut fd = maximal_fd(spec, DEFAULT_N_RHO)?;
    fd.mode = mode;
    fd.alpha = alpha;
    fd.segments.clear();
    let mut diags = Vec::new();
    for fam in fd_families(spec, &fd, n_families, &mut diags) {
        fd.segments.push(FdSegment::maximal(&fam));
    }
    fd.diagnostics.extend(diags);
    Ok(fd)
}

fn fd_families(spec: &ModelSpec, fd: &FundamentalDiagram, n_families: usize, diags: &mut Vec<String>) -> Vec<JamitonFamily> {
    let rhos: Vec<f64> = fd.bands.iter().flat_map(|b| family_grid(b, n_families.max(1))).collect();
    let built = crate::par_map(&rhos, |&r| JamitonFamily::new(spec, r));
    let mut out = Vec::with_capacity(built.len());
    for (r, b) in rhos.iter().zip(built) {
        match b {
            Ok(f) => out.push(f),
            Err(e) => diags.push(format!("rho_S = {r}: {e}")),
        }
    }
    out
}

/// Binned region covered by a diagram: per density bin, the lowest and
/// highest flow over the equilibrium curve and every line piece.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdRegion {
    pub rho_max: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl FdRegion {
    pub const BINS: usize = 512;

    pub fn new(spec: &ModelSpec, fd: &FundamentalDiagram) -> Self {
        let n = Self::BINS;
        let width = spec.rho_max / n as f64;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let mut add = |i: usize, q: f64| {
            lo[i] = lo[i].min(q);
            hi[i] = hi[i].max(q);
        };
        // equilibrium at every bin edge
        for i in 0..n {
            for rho in [i as f64 * width, (i + 1) as f64 * width] {
                if let Ok(q) = spec.equilibrium_flux(rho.min(spec.rho_max), 0) {
                    add(i, q);
                }
            }
        }
        for seg in fd.pieces() {
            let (a, b) = if seg.rho_a <= seg.rho_b { (seg.rho_a, seg.rho_b) } else { (seg.rho_b, seg.rho_a) };
            let ia = ((a / width) as usize).min(n - 1);
            let ib = ((b / width) as usize).min(n - 1);
            for i in ia..=ib {
                let x0 = (i as f64 * width).max(a);
                let x1 = ((i + 1) as f64 * width).min(b);
                add(i, seg.line(x0));
                add(i, seg.line(x1));
            }
        }
        Self { rho_max: spec.rho_max, lo, hi }
    }

    /// Membership with relative slack `tol` in both density and flow.
    pub fn contains(&self, rho: f64, q: f64, tol: f64) -> bool {
        let n = self.lo.len();
        let width = self.rho_max / n as f64;
        if !(rho >= 0.0) || rho > self.rho_max * (1.0 + tol) {
            return false;
        }
        let r0 = (rho * (1.0 - tol)).max(0.0);
        let r1 = (rho * (1.0 + tol)).min(self.rho_max);
        let i0 = ((r0 / width) as usize).min(n - 1);
        let i1 = ((r1 / width) as usize).min(n - 1);
        (i0..=i1).any(|i| {
            let (l, h) = (self.lo[i], self.hi[i]);
            l.is_finite() && q >= l - tol * l.abs() && q <= h + tol * h.abs()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pw1() -> ModelSpec {
        ModelSpec::preset("pw1").unwrap()
    }

    #[test]
    fn pw1_half_segment() {
        let s = pw1();
        let fam = JamitonFamily::new(&s, 0.5 * s.rho_max).unwrap();
        let seg = FdSegment::maximal(&fam);
        assert_relative_eq!(seg.rho_a, 0.04, max_relative = 1e-11);
        assert_relative_eq!(seg.q_a, 0.56, max_relative = 1e-11);
        assert!((seg.rho_b - 0.09533).abs() < 1e-4);
        assert!((seg.q_b - 0.78134).abs() < 1e-4);
    }

    #[test]
    fn maximal_fd_splits_by_stability() {
        let s = pw1();
        let fd = maximal_fd(&s, 100).unwrap();
        assert!(fd.diagnostics.is_empty(), "{:?}", fd.diagnostics);
        for &(r, _) in &fd.equilibrium {
            let y = r / s.rho_max;
            assert!(y <= 0.1 + 1e-9 || y >= 0.9 - 1e-9);
        }
        for seg in &fd.segments {
            let y = seg.rho_s / s.rho_max;
            assert!(y > 0.1 && y < 0.9);
            let q = s.equilibrium_flux(seg.rho_s, 0).unwrap();
            assert!((seg.line(seg.rho_s) - q).abs() < 1e-12);
        }
        assert_eq!(fd.equilibrium.len() + fd.segments.len(), 100);
        assert!(maximal_fd(&s, 8).is_err());
    }

    #[test]
    fn analytic_slopes_match_differences() {
        for name in crate::models::PRESET_NAMES {
            let s = ModelSpec::preset(name).unwrap();
            let h = 1e-5 * s.rho_max;
            for y in [0.3, 0.5, 0.6] {
                let rho = y * s.rho_max;
                let (_, _, dm, ds) = family_slopes(&s, rho).unwrap();
                let f = |r: f64| family_slopes(&s, r).unwrap();
                let (mp, sp, _, _) = f(rho + h);
                let (mm, sm, _, _) = f(rho - h);
                assert_relative_eq!(dm, (mp - mm) / (2.0 * h), max_relative = 1e-6);
                assert_relative_eq!(ds, (sp - sm) / (2.0 * h), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn lower_envelope_below_and_tangent() {
        let s = pw1();
        let (upper, lower) = envelopes(&s, 50).unwrap();
        assert_eq!(upper.len(), 50);
        assert!(!lower.is_empty());
        for &(r, q) in &upper {
            assert!(q >= s.equilibrium_flux(r, 0).unwrap());
        }
        // at the band edge the intersection point approaches (ρ_S, Q_eq(ρ_S))
        for off in [1e-3, 1e-4, 1e-5] {
            let rho_s = (0.1 + off) * s.rho_max;
            let (r, q) = lower_envelope_point(&s, rho_s).unwrap();
            assert!((r - rho_s).abs() < 50.0 * off * s.rho_max, "{off}: {r} vs {rho_s}");
            assert!((q - s.equilibrium_flux(rho_s, 0).unwrap()).abs() < 50.0 * off);
        }
    }

    #[test]
    fn chain_totals_match_quadrature() {
        let s = pw1();
        let fam = JamitonFamily::new(&s, 0.45 * s.rho_max).unwrap();
        let table = FamilyTable::new(&s, &fam, 4096).unwrap();
        let (vp, vm) = shock_pair_frac(&s, &fam, 0.4).unwrap();
        let chain = table.chain(vp, vm).unwrap();
        let lc = length_and_count(&s, &fam, vp, vm).unwrap();
        assert_relative_eq!(chain.length, lc.length, max_relative = 1e-10);
        assert_relative_eq!(chain.count, lc.count, max_relative = 1e-10);
        // one full period averages to N/L
        for a in [0.0, 0.3 * lc.length, 0.99 * lc.length] {
            let (rho, q) = chain.window(a, lc.length);
            assert_relative_eq!(rho, lc.mean_density(), max_relative = 1e-12);
            assert_relative_eq!(q, fam.line(rho), max_relative = 1e-10);
        }
        // two periods as well
        let (rho, _) = chain.window(0.2 * lc.length, 2.0 * lc.length);
        assert_relative_eq!(rho, lc.mean_density(), max_relative = 1e-12);
        assert_relative_eq!(chain.density_at(0.0), 1.0 / vp, max_relative = 1e-14);
    }

    #[test]
    fn alpha_zero_reaches_segment_ends() {
        let s = pw1();
        let fam = JamitonFamily::new(&s, 0.5 * s.rho_max).unwrap();
        let pts = aggregate_family(&s, &fam, 0.0, 6, 16, 4096).unwrap();
        let max = pts.iter().map(|p| p.rho_bar).fold(f64::MIN, f64::max);
        let min = pts.iter().map(|p| p.rho_bar).fold(f64::MAX, f64::min);
        assert!((max - fam.rho_r()).abs() < 1e-8);
        assert!((min - fam.rho_m()).abs() < 1e-8);
    }

    #[test]
    fn region_membership() {
        let s = pw1();
        let fd = maximal_fd(&s, 64).unwrap();
        let region = FdRegion::new(&s, &fd);
        for seg in &fd.segments {
            let mid = 0.5 * (seg.rho_a + seg.rho_b);
            assert!(region.contains(mid, seg.line(mid), 0.0));
        }
        assert!(!region.contains(0.5 * s.rho_max, 2.0, 0.05));
        assert!(region.contains(0.01, s.equilibrium_flux(0.01, 0).unwrap(), 0.0));
    }
}
