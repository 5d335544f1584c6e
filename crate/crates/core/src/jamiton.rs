//! Jamiton traveling waves.
//!
//! A family is fixed by its sonic specific volume `v_S`. Along the smooth part
//! of a jamiton the velocity satisfies `u = m v + s`, and the profile solves
//! `dv/dχ = w(v) / r'(v)` with
//!
//! * `w(v) = Û(v) - (m v + s)`,
//! * `r(v) = p̂(v) + m² v` (PW) or `r(v) = m ĥ(v) + m² v` (ARZ).
//!
//! `χ` counts vehicles and `η` is the Eulerian self-similar coordinate, both
//! in units of `τ`: `dη = v dχ`.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::models::{Curve, Family, Jet, ModelSpec};
use crate::numeric::quad::{graded_cells, GaussLegendre};
use crate::numeric::roots::{bisect, REL_TOL};

/// Relative half-width around `v_S` inside which the integrand is replaced
/// by its limit `r''(v_S) / w'(v_S)`.
pub const SONIC_SPLICE: f64 = 1e-7;
/// The maximal profile is cut where `w(v)` drops to this fraction of `u_max`.
pub const MAXIMAL_TRUNCATION: f64 = 1e-8;
/// `length_and_count` refuses pairs with `v_M - v⁻` below this fraction of `v_S`.
pub const NEAR_MAXIMAL_GAP: f64 = 1e-9;
/// `find_v_m` gives up beyond this multiple of `v_S`.
pub const V_M_SEARCH_LIMIT: f64 = 1e6;

/// Sonic parameters `(m, s)` at specific volume `v_s`.
pub fn sonic_params(spec: &ModelSpec, v_s: f64) -> Result<(f64, f64)> {
    let u = spec.lagrangian_jet(Curve::U, v_s)?;
    let m = match spec.family {
        Family::PW => {
            let p = spec.lagrangian_jet(Curve::P, v_s)?;
            if p.d1 > 0.0 {
                return Err(domain("v_S", v_s, "volumes with dp/dv <= 0"));
            }
            (-p.d1).sqrt()
        }
        Family::ARZ => -spec.lagrangian_jet(Curve::H, v_s)?.d1,
    };
    if !m.is_finite() {
        return Err(domain("v_S", v_s, "volumes with a finite mass flux"));
    }
    Ok((m, u.value - m * v_s))
}

/// `Û'(v_S) > m(v_S)`.
pub fn jamiton_exists(spec: &ModelSpec, v_s: f64) -> bool {
    let Ok((m, _)) = sonic_params(spec, v_s) else {
        return false;
    };
    match spec.lagrangian_jet(Curve::U, v_s) {
        Ok(u) => u.d1 > m,
        Err(_) => false,
    }
}

/// Wave functions of one family, without the root-dependent data.
#[derive(Debug, Clone, Copy)]
pub struct WaveFns<'a> {
    pub spec: &'a ModelSpec,
    pub m: f64,
    pub s: f64,
}

impl<'a> WaveFns<'a> {
    pub fn new(spec: &'a ModelSpec, m: f64, s: f64) -> Self {
        Self { spec, m, s }
    }

    pub fn w(&self, v: f64) -> Result<Jet> {
        let u = self.spec.lagrangian_jet(Curve::U, v)?;
        Ok(Jet::new(u.value - (self.m * v + self.s), u.d1 - self.m, u.d2))
    }

    pub fn r(&self, v: f64) -> Result<Jet> {
        let m2 = self.m * self.m;
        Ok(match self.spec.family {
            Family::PW => {
                let p = self.spec.lagrangian_jet(Curve::P, v)?;
                Jet::new(p.value + m2 * v, p.d1 + m2, p.d2)
            }
            Family::ARZ => {
                let h = self.spec.lagrangian_jet(Curve::H, v)?;
                Jet::new(self.m * h.value + m2 * v, self.m * h.d1 + m2, self.m * h.d2)
            }
        })
    }
}

/// All quantities attached to one sonic value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JamitonFamily {
    pub v_s: f64,
    pub rho_s: f64,
    pub m: f64,
    pub s: f64,
    pub v_m: f64,
    pub v_r: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl JamitonFamily {
    /// Builds the family with sonic density `rho_s`.
    pub fn new(spec: &ModelSpec, rho_s: f64) -> Result<Self> {
        if !(rho_s > 0.0 && rho_s < spec.rho_max) {
            return Err(domain("rho_S", rho_s, format!("(0, {})", spec.rho_max)));
        }
        Self::from_v_s(spec, 1.0 / rho_s)
    }

    pub fn from_v_s(spec: &ModelSpec, v_s: f64) -> Result<Self> {
        let (m, s) = sonic_params(spec, v_s)?;
        if !jamiton_exists(spec, v_s) {
            return Err(Error::NoJamiton { rho_s: 1.0 / v_s });
        }
        let f = WaveFns::new(spec, m, s);
        let v_m = find_v_m(&f, v_s)?;
        let r_min = f.r(v_s)?.value;
        let r_max = f.r(v_m)?.value;
        let v_r = find_v_r(&f, v_s, r_max)?;
        Ok(Self {
            v_s,
            rho_s: 1.0 / v_s,
            m,
            s,
            v_m,
            v_r,
            r_min,
            r_max,
        })
    }

    pub fn fns<'a>(&self, spec: &'a ModelSpec) -> WaveFns<'a> {
        WaveFns::new(spec, self.m, self.s)
    }

    pub fn rho_m(&self) -> f64 {
        1.0 / self.v_m
    }

    pub fn rho_r(&self) -> f64 {
        1.0 / self.v_r
    }

    /// Flow on the jamiton line, `m + s ρ`.
    pub fn line(&self, rho: f64) -> f64 {
        self.m + self.s * rho
    }

    /// Shock level at fraction `frac` of `(r_min, r_max)`.
    pub fn r_level(&self, frac: f64) -> f64 {
        self.r_min + frac * (self.r_max - self.r_min)
    }

    pub fn w(&self, spec: &ModelSpec, v: f64) -> Result<Jet> {
        self.fns(spec).w(v)
    }

    pub fn r(&self, spec: &ModelSpec, v: f64) -> Result<Jet> {
        self.fns(spec).r(v)
    }
}

/// Far root `v_M > v_S` of `w`.
///
/// `w(v) / (v - v_S)` equals `w'(v_S) > 0` at `v_S` and has the same root, so
/// it is bracketed from `v_S` itself, doubling the right end.
pub fn find_v_m(f: &WaveFns, v_s: f64) -> Result<f64> {
    let w1 = f.w(v_s)?.d1;
    let g = |v: f64| -> Result<f64> {
        if v == v_s {
            Ok(w1)
        } else {
            Ok(f.w(v)?.value / (v - v_s))
        }
    };
    let mut lo = v_s;
    let mut hi = 2.0 * v_s;
    while g(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > V_M_SEARCH_LIMIT * v_s {
            return Err(Error::UnboundedRoot {
                what: "w(v) right of v_S",
                limit: V_M_SEARCH_LIMIT * v_s,
            });
        }
    }
    bisect("w", g, lo, hi, REL_TOL)
}

/// Left state `v_R < v_S` with `r(v_R) = r_max`.
pub fn find_v_r(f: &WaveFns, v_s: f64, r_max: f64) -> Result<f64> {
    let v_min = f.spec.v_min();
    let gap = v_s - v_min;
    let h = |v: f64| Ok(f.r(v)?.value - r_max);
    let mut hi = v_s;
    for k in 1..=64 {
        let v = v_min + gap * 0.5f64.powi(k);
        if v <= v_min {
            break;
        }
        match f.r(v) {
            Ok(r) if r.value >= r_max => return bisect("r - r_max", h, v, hi, REL_TOL),
            Ok(_) => hi = v,
            Err(_) => break,
        }
    }
    Err(Error::NoLeftState { r_max })
}

/// Shock states `(v⁺, v⁻)` with `r(v⁺) = r(v⁻) = r_ring`.
pub fn shock_pair(spec: &ModelSpec, fam: &JamitonFamily, r_ring: f64) -> Result<(f64, f64)> {
    if !(r_ring > fam.r_min && r_ring < fam.r_max) {
        return Err(Error::ShockLevel {
            value: r_ring,
            r_min: fam.r_min,
            r_max: fam.r_max,
        });
    }
    let f = fam.fns(spec);
    let h = |v: f64| Ok(f.r(v)?.value - r_ring);
    let v_plus = bisect("r - r_ring (left)", h, fam.v_r, fam.v_s, REL_TOL)?;
    let v_minus = bisect("r - r_ring (right)", h, fam.v_s, fam.v_m, REL_TOL)?;
    Ok((v_plus, v_minus))
}

/// Shock pair at fraction `frac ∈ (0, 1)` of `(r_min, r_max)`.
pub fn shock_pair_frac(spec: &ModelSpec, fam: &JamitonFamily, frac: f64) -> Result<(f64, f64)> {
    shock_pair(spec, fam, fam.r_level(frac))
}

/// Integrand `r'/w` of `dχ/dv` with the sonic splice.
pub(crate) struct Integrand<'a> {
    f: WaveFns<'a>,
    v_s: f64,
    sonic_value: f64,
}

impl<'a> Integrand<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, fam: &JamitonFamily) -> Result<Self> {
        let f = fam.fns(spec);
        let sonic_value = f.r(fam.v_s)?.d2 / f.w(fam.v_s)?.d1;
        Ok(Self {
            f,
            v_s: fam.v_s,
            sonic_value,
        })
    }

    /// `dχ/dv`.
    pub(crate) fn eval(&self, v: f64) -> Result<f64> {
        if (v - self.v_s).abs() < SONIC_SPLICE * self.v_s {
            return Ok(self.sonic_value);
        }
        let value = self.f.r(v)?.d1 / self.f.w(v)?.value;
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonMonotone { v, value });
        }
        Ok(value)
    }

    /// `[dχ/dv, dη/dv, d(flux)/dv]` where the flux column integrates `u = m v + s`.
    pub(crate) fn eval3(&self, v: f64) -> Result<[f64; 3]> {
        let c = self.eval(v)?;
        Ok([c, v * c, (self.f.m * v + self.f.s) * c])
    }
}

/// `∫_a^b [r'/w, v r'/w, (m v + s) r'/w] dv` on cells graded toward `v_M`.
/// `[a, b]` must not straddle `v_S`.
pub(crate) fn integrate_piece(
    g: &Integrand,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    v_m: f64,
    min_cells: usize,
) -> Result<[f64; 3]> {
    let mut acc = [0.0; 3];
    if b <= a {
        return Ok(acc);
    }
    for c in graded_cells(a, b, v_m, min_cells).windows(2) {
        let part = rule.try_integrate_n(|v| g.eval3(v), c[0], c[1])?;
        for k in 0..3 {
            acc[k] += part[k];
        }
    }
    Ok(acc)
}

/// Length `L = Δη` and vehicle count `N = Δχ` of one jamiton, in units of `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthCount {
    pub length: f64,
    pub count: f64,
}

impl LengthCount {
    /// Mean density `N / L`.
    pub fn mean_density(&self) -> f64 {
        self.count / self.length
    }
}

/// `L = ∫ v r'/w dv`, `N = ∫ r'/w dv` over `(v⁺, v⁻)`, composite 32-point
/// Gauss-Legendre split at `v_S` and graded toward `v_M`.
pub fn length_and_count(spec: &ModelSpec, fam: &JamitonFamily, v_plus: f64, v_minus: f64) -> Result<LengthCount> {
    check_pair(fam, v_plus, v_minus)?;
    if fam.v_m - v_minus < NEAR_MAXIMAL_GAP * fam.v_s {
        return Err(Error::NearMaximal {
            v_minus,
            v_m: fam.v_m,
            gap: fam.v_m - v_minus,
        });
    }
    let [n, l, _] = integrate_pair(spec, fam, v_plus, v_minus)?;
    Ok(LengthCount { length: l, count: n })
}

fn integrate_pair(spec: &ModelSpec, fam: &JamitonFamily, v_plus: f64, v_minus: f64) -> Result<[f64; 3]> {
    let g = Integrand::new(spec, fam)?;
    let rule = GaussLegendre::gl32();
    let left = integrate_piece(&g, rule, v_plus, fam.v_s, fam.v_m, 4)?;
    let right = integrate_piece(&g, rule, fam.v_s, v_minus, fam.v_m, 4)?;
    Ok([left[0] + right[0], left[1] + right[1], left[2] + right[2]])
}

fn check_pair(fam: &JamitonFamily, v_plus: f64, v_minus: f64) -> Result<()> {
    if !(v_plus >= fam.v_r && v_plus <= fam.v_s) {
        return Err(domain("v_plus", v_plus, format!("[{}, {}]", fam.v_r, fam.v_s)));
    }
    if !(v_minus >= fam.v_s && v_minus <= fam.v_m) {
        return Err(domain("v_minus", v_minus, format!("[{}, {}]", fam.v_s, fam.v_m)));
    }
    Ok(())
}

/// Truncation point `v_T < v_M` of the maximal profile, where
/// `w(v_T) = 1e-8 u_max`.
pub fn maximal_truncation(spec: &ModelSpec, fam: &JamitonFamily) -> Result<f64> {
    let f = fam.fns(spec);
    let thr = MAXIMAL_TRUNCATION * spec.u_max;
    // w is concave with its peak where w' = 0
    let v_peak = bisect("w'", |v| Ok(f.w(v)?.d1), fam.v_s, fam.v_m, REL_TOL)?;
    if f.w(v_peak)?.value <= thr {
        return Ok(v_peak);
    }
    bisect("w - threshold", |v| Ok(f.w(v)?.value - thr), v_peak, fam.v_m, REL_TOL)
}

/// Length or count of a profile; the maximal jamiton is infinitely long and
/// carries the value at its truncation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Extent {
    Finite { value: f64 },
    Infinite { truncated: f64 },
}

impl Extent {
    pub fn value(&self) -> f64 {
        match *self {
            Extent::Finite { value } => value,
            Extent::Infinite { truncated } => truncated,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Extent::Infinite { .. })
    }
}

/// One sample of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub chi: f64,
    pub eta: f64,
    pub v: f64,
    pub rho: f64,
    pub u: f64,
}

/// A jamiton sampled between its shock states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JamitonProfile {
    pub v_plus: f64,
    pub v_minus: f64,
    pub samples: Vec<ProfileSample>,
    /// Length in `η`; physical length is `τ L`.
    pub length: Extent,
    /// Vehicle count in `χ`; physical count is `τ N`.
    pub count: Extent,
}

/// Samples the profile from `v⁺` to `v⁻`.
///
/// Pass `v_minus = fam.v_m` for the maximal jamiton; its profile ends at
/// [`maximal_truncation`] and its extents are flagged infinite.
///
/// Samples are uniform in `v` on `[v⁺, v_S]` and uniform in
/// `ln((v_M - v_S) / (v_M - v))` on `[v_S, v⁻]`, with counts proportional to
/// the vehicles in each part.
pub fn integrate_profile(
    spec: &ModelSpec,
    fam: &JamitonFamily,
    v_plus: f64,
    v_minus: f64,
    n_samples: usize,
) -> Result<JamitonProfile> {
    if n_samples < 16 {
        return Err(Error::Invalid(format!("n_samples must be >= 16, got {n_samples}")));
    }
    check_pair(fam, v_plus, v_minus)?;
    let maximal = fam.v_m - v_minus < NEAR_MAXIMAL_GAP * fam.v_s;
    let v_end = if maximal { maximal_truncation(spec, fam)? } else { v_minus };

    let g = Integrand::new(spec, fam)?;
    let rule = GaussLegendre::gl32();
    let left = integrate_piece(&g, rule, v_plus, fam.v_s, fam.v_m, 4)?;
    let right = integrate_piece(&g, rule, fam.v_s, v_end, fam.v_m, 4)?;
    let total_n = left[0] + right[0];
    let total_l = left[1] + right[1];

    let mut n_left = if total_n > 0.0 {
        ((n_samples - 1) as f64 * left[0] / total_n).round() as usize
    } else {
        (n_samples - 1) / 2
    };
    n_left = n_left.clamp(1, n_samples - 2);
    let n_right = n_samples - 1 - n_left;

    let mut vs = Vec::with_capacity(n_samples);
    for i in 0..n_left {
        vs.push(v_plus + (fam.v_s - v_plus) * i as f64 / n_left as f64);
    }
    let d0 = fam.v_m - fam.v_s;
    let xi_end = (d0 / (fam.v_m - v_end)).ln();
    for i in 0..=n_right {
        let xi = xi_end * i as f64 / n_right as f64;
        vs.push(fam.v_m - d0 * (-xi).exp());
    }
    *vs.last_mut().unwrap() = v_end;
    vs[n_left] = fam.v_s;

    let fine = GaussLegendre::gl8();
    let mut samples = Vec::with_capacity(n_samples);
    let (mut chi, mut eta) = (0.0, 0.0);
    for (i, &v) in vs.iter().enumerate() {
        if i > 0 {
            let part = integrate_piece(&g, fine, vs[i - 1], v, fam.v_m, 1)?;
            chi += part[0];
            eta += part[1];
        }
        samples.push(ProfileSample {
            chi,
            eta,
            v,
            rho: 1.0 / v,
            u: fam.m * v + fam.s,
        });
    }
    for w in samples.windows(2) {
        if !(w[1].v > w[0].v) {
            return Err(Error::NonMonotone { v: w[1].v, value: w[1].v - w[0].v });
        }
    }

    let (length, count) = if maximal {
        (Extent::Infinite { truncated: total_l }, Extent::Infinite { truncated: total_n })
    } else {
        (Extent::Finite { value: total_l }, Extent::Finite { value: total_n })
    };
    Ok(JamitonProfile {
        v_plus,
        v_minus: if maximal { fam.v_m } else { v_minus },
        samples,
        length,
        count,
    })
}

/// Family summary as written next to a sampled profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilySummary {
    #[serde(rename = "v_S")]
    pub v_s: f64,
    #[serde(rename = "rho_S")]
    pub rho_s: f64,
    pub m: f64,
    pub s: f64,
    #[serde(rename = "v_M")]
    pub v_m: f64,
    #[serde(rename = "v_R")]
    pub v_r: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    #[serde(rename = "L")]
    pub length: Extent,
    #[serde(rename = "N")]
    pub count: Extent,
}

impl FamilySummary {
    pub fn new(fam: &JamitonFamily, profile: &JamitonProfile) -> Self {
        Self {
            v_s: fam.v_s,
            rho_s: fam.rho_s,
            m: fam.m,
            s: fam.s,
            v_m: fam.v_m,
            v_r: fam.v_r,
            r_min: fam.r_min,
            r_max: fam.r_max,
            v_plus: profile.v_plus,
            v_minus: profile.v_minus,
            length: profile.length,
            count: profile.count,
        }
    }
}

/// Finds the jamiton in the unstable band `(rho_lo, rho_hi)` whose periodic
/// chain has mean density `rho_bar` and physical wavelength `wavelength`
/// (metres). Returns the family and the shock-level fraction.
///
/// For fixed `ρ_S` the mean density `N/L` falls from `ρ_S` toward `ρ_M` as the
/// shock level rises, so the level is found by bisection on the density; the
/// outer bisection on `ρ_S` then matches the length.
pub fn match_chain(
    spec: &ModelSpec,
    band: (f64, f64),
    rho_bar: f64,
    wavelength: f64,
) -> Result<(JamitonFamily, f64, LengthCount)> {
    let target_l = wavelength / spec.tau;
    let frac_lo = 1e-9;
    let frac_hi = 1.0 - 1e-6;
    let solve_frac = |fam: &JamitonFamily| -> Result<Option<(f64, LengthCount)>> {
        let lc = |frac: f64| -> Result<LengthCount> {
            let (vp, vm) = shock_pair_frac(spec, fam, frac)?;
            length_and_count(spec, fam, vp, vm)
        };
        let top = lc(frac_lo)?;
        let bottom = lc(frac_hi)?;
        if !(rho_bar < top.mean_density() && rho_bar > bottom.mean_density()) {
            return Ok(None);
        }
        let frac = bisect("N/L - rho_bar", |f| Ok(lc(f)?.mean_density() - rho_bar), frac_lo, frac_hi, 1e-10)?;
        Ok(Some((frac, lc(frac)?)))
    };
    // Excess of the matched length over the target, as a function of ρ_S.
    // ρ_S must exceed ρ̄ for a match to exist.
    let excess = |rho_s: f64| -> Result<Option<f64>> {
        let fam = JamitonFamily::new(spec, rho_s)?;
        Ok(solve_frac(&fam)?.map(|(_, lc)| lc.length - target_l))
    };
    let (lo, hi) = band;
    let n = 64;
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..n {
        let rho_s = lo + (hi - lo) * i as f64 / n as f64;
        if rho_s <= rho_bar {
            continue;
        }
        let Some(e) = excess(rho_s).ok().flatten() else {
            prev = None;
            continue;
        };
        if let Some((r0, e0)) = prev {
            if e0.signum() != e.signum() {
                let root = bisect(
                    "matched length",
                    |r| excess(r)?.ok_or(Error::Invalid("chain match left admissible range".into())),
                    r0,
                    rho_s,
                    1e-10,
                )?;
                let fam = JamitonFamily::new(spec, root)?;
                let (frac, lc) = solve_frac(&fam)?.ok_or(Error::Invalid("chain match failed".into()))?;
                return Ok((fam, frac, lc));
            }
        }
        prev = Some((rho_s, e));
    }
    Err(Error::Invalid(format!(
        "no jamiton chain with mean density {rho_bar} and wavelength {wavelength} m"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pw1() -> ModelSpec {
        ModelSpec::preset("pw1").unwrap()
    }

    fn pw1_half() -> (ModelSpec, JamitonFamily) {
        let s = pw1();
        let f = JamitonFamily::new(&s, 0.5 * s.rho_max).unwrap();
        (s, f)
    }

    #[test]
    fn pw1_sonic_parameters() {
        let s = pw1();
        let (m, c) = sonic_params(&s, 15.0).unwrap();
        assert_relative_eq!(m, 0.4, max_relative = 1e-13);
        assert_relative_eq!(c, 4.0, max_relative = 1e-13);
        assert_relative_eq!(m + c / 15.0, s.equilibrium_flux(1.0 / 15.0, 0).unwrap(), max_relative = 1e-13);
    }

    #[test]
    fn pw1_family_roots() {
        let (s, f) = pw1_half();
        assert_relative_eq!(f.v_m, 25.0, max_relative = 1e-11);
        assert!(f.v_r > 10.48 && f.v_r < 10.50, "v_R = {}", f.v_r);
        assert_relative_eq!(f.r_min, 3.327106, max_relative = 1e-6);
        assert_relative_eq!(f.r_max, 4.272043, max_relative = 1e-6);
        let rr = f.r(&s, f.v_r).unwrap().value;
        assert!((rr - f.r_max).abs() < 1e-10 * f.r_max);
        assert!(f.w(&s, f.v_s).unwrap().value.abs() < 1e-14);
        assert!(f.r(&s, f.v_s).unwrap().d1.abs() < 1e-14);
        // w(v) = 16 - 150/v - 0.4 v
        for v in [12.0, 20.0, 30.0] {
            assert_relative_eq!(f.w(&s, v).unwrap().value, 16.0 - 150.0 / v - 0.4 * v, epsilon = 1e-12);
        }
    }

    #[test]
    fn stable_density_has_no_jamiton() {
        let s = pw1();
        assert!(!jamiton_exists(&s, 1.0 / (0.95 * s.rho_max)));
        assert!(matches!(
            JamitonFamily::new(&s, 0.95 * s.rho_max),
            Err(Error::NoJamiton { .. })
        ));
        assert!(jamiton_exists(&s, 15.0));
    }

    #[test]
    fn shock_pair_mid_level() {
        let (s, f) = pw1_half();
        let level = 0.5 * (f.r_min + f.r_max);
        assert_relative_eq!(level, 3.799575, max_relative = 1e-6);
        let (vp, vm) = shock_pair(&s, &f, level).unwrap();
        assert!(vp > f.v_r && vp < f.v_s && vm > f.v_s && vm < f.v_m);
        assert!((f.r(&s, vp).unwrap().value - level).abs() < 1e-10 * level);
        assert!((f.r(&s, vm).unwrap().value - level).abs() < 1e-10 * level);
        assert!(shock_pair(&s, &f, f.r_max).is_err());
        assert!(shock_pair(&s, &f, f.r_min).is_err());
    }

    #[test]
    fn extreme_levels() {
        let (s, f) = pw1_half();
        let (vp, vm) = shock_pair_frac(&s, &f, 1e-10).unwrap();
        assert!((vp - f.v_s).abs() < 1e-3 && (vm - f.v_s).abs() < 1e-3);
        let lc = length_and_count(&s, &f, vp, vm).unwrap();
        assert!(lc.length < 1e-3);
        assert_relative_eq!(lc.mean_density(), f.rho_s, max_relative = 1e-4);
        let (vp, vm) = shock_pair_frac(&s, &f, 1.0 - 1e-12).unwrap();
        assert!((vp - f.v_r).abs() < 1e-4 && (vm - f.v_m).abs() < 1e-4);
    }

    #[test]
    fn length_grows_logarithmically_near_v_m() {
        let (s, f) = pw1_half();
        let g = f.fns(&s);
        // L ≈ const + C ln(1/d), C = v_M r'(v_M) / |w'(v_M)|
        let c = f.v_m * g.r(f.v_m).unwrap().d1 / g.w(f.v_m).unwrap().d1.abs();
        let at = |d: f64| {
            let vm = f.v_m - d;
            let level = g.r(vm).unwrap().value;
            let vp = bisect("oracle", |v| Ok(g.r(v)?.value - level), f.v_r, f.v_s, 1e-15).unwrap();
            length_and_count(&s, &f, vp, vm).unwrap().length
        };
        let (l1, l2) = (at(1e-6), at(5e-7));
        assert_relative_eq!(l2 - l1, c * 2f64.ln(), max_relative = 1e-3);
        assert!(matches!(
            length_and_count(&s, &f, f.v_r, f.v_m),
            Err(Error::NearMaximal { .. })
        ));
    }

    #[test]
    fn profile_identities() {
        let (s, f) = pw1_half();
        let (vp, vm) = shock_pair_frac(&s, &f, 0.5).unwrap();
        let p = integrate_profile(&s, &f, vp, vm, 256).unwrap();
        assert_eq!(p.samples.len(), 256);
        assert_eq!(p.samples.first().unwrap().v, vp);
        assert_eq!(p.samples.last().unwrap().v, vm);
        for w in p.samples.windows(2) {
            assert!(w[1].v > w[0].v && w[1].chi > w[0].chi && w[1].eta > w[0].eta);
        }
        for q in &p.samples {
            assert!((q.u - (f.m * q.v + f.s)).abs() <= 1e-12 * q.u.abs());
            assert!((q.rho * (q.u - f.s) - f.m).abs() <= 1e-12 * f.m);
            assert!(f.s < q.u);
        }
        let lc = length_and_count(&s, &f, vp, vm).unwrap();
        assert_relative_eq!(p.length.value(), lc.length, max_relative = 1e-12);
        assert_relative_eq!(p.samples.last().unwrap().eta, lc.length, max_relative = 1e-9);
        assert_relative_eq!(p.samples.last().unwrap().chi, lc.count, max_relative = 1e-9);
        assert!(!p.length.is_infinite());
    }

    #[test]
    fn maximal_profile_is_flagged() {
        let (s, f) = pw1_half();
        let p = integrate_profile(&s, &f, f.v_r, f.v_m, 64).unwrap();
        assert!(p.length.is_infinite() && p.count.is_infinite());
        let last = p.samples.last().unwrap().v;
        assert!(last < f.v_m);
        assert_relative_eq!(f.w(&s, last).unwrap().value, 1e-8 * s.u_max, max_relative = 1e-4);
    }

    #[test]
    fn physical_length_scales_with_tau() {
        let s1 = pw1();
        let s2 = ModelSpec { tau: 2.0 * s1.tau, ..s1.clone() };
        let f1 = JamitonFamily::new(&s1, 0.5 * s1.rho_max).unwrap();
        let f2 = JamitonFamily::new(&s2, 0.5 * s2.rho_max).unwrap();
        let (a, b) = shock_pair_frac(&s1, &f1, 0.3).unwrap();
        let l1 = length_and_count(&s1, &f1, a, b).unwrap();
        let l2 = length_and_count(&s2, &f2, a, b).unwrap();
        assert_relative_eq!(s2.tau * l2.length, 2.0 * s1.tau * l1.length, max_relative = 1e-14);
        assert_relative_eq!(s2.tau * l2.count, 2.0 * s1.tau * l1.count, max_relative = 1e-14);
    }

    #[test]
    fn chain_matching_round_trips() {
        let (s, f) = pw1_half();
        let (a, b) = shock_pair_frac(&s, &f, 0.6).unwrap();
        let lc = length_and_count(&s, &f, a, b).unwrap();
        let band = (0.1 * s.rho_max, 0.9 * s.rho_max);
        let (g, frac, got) = match_chain(&s, band, lc.mean_density(), s.tau * lc.length).unwrap();
        assert_relative_eq!(g.rho_s, f.rho_s, max_relative = 1e-6);
        assert_relative_eq!(frac, 0.6, max_relative = 1e-5);
        assert_relative_eq!(got.length, lc.length, max_relative = 1e-6);
    }
}
