//! Characteristic speeds, the sub-characteristic condition (SCC) and the
//! unstable density bands.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::models::{Family, ModelSpec};
use crate::numeric::roots::bisect_abs;

/// Margins with absolute value below this are reported as degenerate.
pub const DEGENERATE_MARGIN: f64 = 1e-14;
/// Default number of scan points for [`unstable_bands`].
pub const DEFAULT_SCAN_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharSpeeds {
    pub lambda1: f64,
    pub lambda2: f64,
    /// LWR speed `Q'_eq(ρ)`.
    pub mu: f64,
}

/// Characteristic speeds at `(rho, u)`; `u` defaults to `U(rho)`.
pub fn characteristic_speeds(spec: &ModelSpec, rho: f64, u: Option<f64>) -> Result<CharSpeeds> {
    let uj = spec.velocity_jet(rho)?;
    let a = spec.anticipation_jet(rho)?;
    let u = u.unwrap_or(uj.value);
    let mu = uj.value + rho * uj.d1;
    let (lambda1, lambda2) = match spec.family {
        Family::PW => {
            if a.d1 < 0.0 {
                return Err(domain("rho", rho, "densities with p'(rho) >= 0"));
            }
            let c = a.d1.sqrt();
            (u - c, u + c)
        }
        Family::ARZ => (u - rho * a.d1, u),
    };
    Ok(CharSpeeds { lambda1, lambda2, mu })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SccStatus {
    /// Margin positive: the base state is linearly stable.
    Holds,
    /// Margin negative: jamitons exist.
    Violated,
    /// `|margin| <` [`DEGENERATE_MARGIN`]; not classified.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scc {
    pub status: SccStatus,
    pub margin: f64,
}

impl Scc {
    pub fn holds(&self) -> bool {
        self.status == SccStatus::Holds
    }

    pub fn violated(&self) -> bool {
        self.status == SccStatus::Violated
    }
}

/// PW: `p'/ρ² - U'²`; ARZ: `h' + U'`.
pub fn scc_margin(spec: &ModelSpec, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < spec.rho_max) {
        return Err(domain("rho", rho, format!("(0, {})", spec.rho_max)));
    }
    let u = spec.velocity_jet(rho)?;
    let a = spec.anticipation_jet(rho)?;
    Ok(match spec.family {
        Family::PW => a.d1 / (rho * rho) - u.d1 * u.d1,
        Family::ARZ => a.d1 + u.d1,
    })
}

pub fn scc_holds(spec: &ModelSpec, rho: f64) -> Result<Scc> {
    let margin = scc_margin(spec, rho)?;
    let status = if margin.abs() < DEGENERATE_MARGIN {
        SccStatus::Degenerate
    } else if margin > 0.0 {
        SccStatus::Holds
    } else {
        SccStatus::Violated
    };
    Ok(Scc { status, margin })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBand {
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub stable: bool,
}

impl StabilityBand {
    pub fn contains(&self, rho: f64) -> bool {
        rho > self.rho_lo && rho < self.rho_hi
    }

    pub fn width(&self) -> f64 {
        self.rho_hi - self.rho_lo
    }
}

/// Bands tiling `(0, ρ_max)` plus any warnings raised by the scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandScan {
    pub bands: Vec<StabilityBand>,
    pub warnings: Vec<String>,
}

impl BandScan {
    pub fn unstable(&self) -> impl Iterator<Item = &StabilityBand> {
        self.bands.iter().filter(|b| !b.stable)
    }

    pub fn unstable_vec(&self) -> Vec<StabilityBand> {
        self.unstable().copied().collect()
    }
}

/// Uniform scan grid over `(ε, ρ_max - ε)`, `ε = 1e-9 ρ_max`.
pub fn scan_grid(spec: &ModelSpec, scan_points: usize) -> Vec<f64> {
    let eps = 1e-9 * spec.rho_max;
    let n = scan_points.max(2);
    let span = spec.rho_max - 2.0 * eps;
    (0..n).map(|i| eps + span * i as f64 / (n - 1) as f64).collect()
}

/// `(ρ, margin)` samples on the scan grid.
pub fn margin_samples(spec: &ModelSpec, scan_points: usize) -> Result<Vec<(f64, f64)>> {
    let grid = scan_grid(spec, scan_points);
    crate::par_map(&grid, |&rho| scc_margin(spec, rho).map(|m| (rho, m)))
        .into_iter()
        .collect()
}

/// Sign scan of the SCC margin followed by bisection of every sign change to
/// absolute tolerance `tol`. Returns alternating stable and unstable bands.
pub fn unstable_bands(spec: &ModelSpec, scan_points: usize, tol: f64) -> Result<BandScan> {
    if scan_points < 16 {
        return Err(crate::Error::Invalid(format!("scan_points must be >= 16, got {scan_points}")));
    }
    if !(tol > 0.0) {
        return Err(crate::Error::Invalid(format!("tol must be positive, got {tol}")));
    }
    let samples = margin_samples(spec, scan_points)?;
    let mut warnings = Vec::new();
    let n_degenerate = samples.iter().filter(|(_, m)| m.abs() < DEGENERATE_MARGIN).count();
    if n_degenerate == samples.len() {
        warnings.push("SCC margin is identically zero on the scan grid (degenerate case); no classification".into());
        return Ok(BandScan { bands: Vec::new(), warnings });
    }
    if n_degenerate > 0 {
        warnings.push(format!("{n_degenerate} scan points have a degenerate SCC margin"));
    }

    let sign = |m: f64| if m.abs() < DEGENERATE_MARGIN { 0 } else if m > 0.0 { 1 } else { -1 };
    let classified: Vec<(f64, f64, i32)> = samples
        .iter()
        .map(|&(r, m)| (r, m, sign(m)))
        .filter(|s| s.2 != 0)
        .collect();

    let mut bands = Vec::new();
    let mut lo = 0.0;
    let mut stable = classified[0].2 > 0;
    for pair in classified.windows(2) {
        let (r0, _, s0) = pair[0];
        let (r1, _, s1) = pair[1];
        if s0 == s1 {
            continue;
        }
        let root = bisect_abs("SCC margin", |r| scc_margin(spec, r), r0, r1, tol)?;
        bands.push(StabilityBand { rho_lo: lo, rho_hi: root, stable });
        lo = root;
        stable = s1 > 0;
    }
    bands.push(StabilityBand { rho_lo: lo, rho_hi: spec.rho_max, stable });
    Ok(BandScan { bands, warnings })
}

/// [`unstable_bands`] with the default resolution and a tolerance of
/// `1e-12 ρ_max`, keeping only the unstable bands.
pub fn unstable_bands_default(spec: &ModelSpec) -> Result<Vec<StabilityBand>> {
    Ok(unstable_bands(spec, DEFAULT_SCAN_POINTS, 1e-12 * spec.rho_max)?.unstable_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HesitationCurve, PressureCurve, VelocityCurve, PRESET_NAMES};
    use approx::assert_relative_eq;

    fn pw1() -> ModelSpec {
        ModelSpec::preset("pw1").unwrap()
    }

    #[test]
    fn pw1_speeds_at_half() {
        let s = pw1();
        let c = characteristic_speeds(&s, 0.5 * s.rho_max, None).unwrap();
        assert_relative_eq!(c.lambda1, 4.0, max_relative = 1e-13);
        assert_relative_eq!(c.lambda2, 16.0, max_relative = 1e-13);
        assert_relative_eq!(c.mu, 0.0, epsilon = 1e-13);
        let c0 = characteristic_speeds(&s, 0.0, None).unwrap();
        assert_eq!(c0.mu, s.u_max);
    }

    #[test]
    fn arz_second_speed_is_u() {
        let s = ModelSpec::preset("arz2").unwrap();
        for k in 1..20 {
            let rho = s.rho_max * k as f64 / 20.0;
            let c = characteristic_speeds(&s, rho, Some(3.7 * k as f64)).unwrap();
            assert_eq!(c.lambda2, 3.7 * k as f64);
            assert!(c.lambda1 <= c.lambda2);
        }
    }

    #[test]
    fn pw1_margin_examples() {
        let s = pw1();
        let m = scc_holds(&s, 0.5 * s.rho_max).unwrap();
        assert_relative_eq!(m.margin, 8100.0 - 22500.0, max_relative = 1e-12);
        assert!(m.violated());
        assert!(scc_holds(&s, 0.05 * s.rho_max).unwrap().holds());
        assert!(scc_margin(&s, 0.0).is_err());
        assert!(scc_margin(&s, s.rho_max).is_err());
    }

    #[test]
    fn pw1_band_is_tenth_to_nine_tenths() {
        let s = pw1();
        let scan = unstable_bands(&s, 4096, 1e-9).unwrap();
        let u = scan.unstable_vec();
        assert_eq!(u.len(), 1);
        // y(1-y) = β/(ρ_max u_max²) = 0.09
        let k = 4.8 / (s.rho_max * 400.0);
        assert_relative_eq!(k, 0.09, max_relative = 1e-12);
        let disc = (1.0 - 4.0 * k).sqrt();
        assert!((u[0].rho_lo - 0.5 * (1.0 - disc) * s.rho_max).abs() < 1e-9);
        assert!((u[0].rho_hi - 0.5 * (1.0 + disc) * s.rho_max).abs() < 1e-9);
        // tiling
        assert_eq!(scan.bands.first().unwrap().rho_lo, 0.0);
        assert_eq!(scan.bands.last().unwrap().rho_hi, s.rho_max);
        for w in scan.bands.windows(2) {
            assert_eq!(w[0].rho_hi, w[1].rho_lo);
            assert_ne!(w[0].stable, w[1].stable);
        }
    }

    #[test]
    fn power_pressure_critical_density() {
        // γ < 3: single transition at (βγρ_max²/u_max²)^(1/(3-γ))
        let s = ModelSpec {
            pressure: Some(PressureCurve::Power { beta: 300.0, gamma: 2.0 }),
            ..pw1()
        };
        let scan = unstable_bands(&s, 4096, 1e-14).unwrap();
        assert_eq!(scan.bands.len(), 2);
        assert!(scan.bands[0].stable && !scan.bands[1].stable);
        let crit = (300.0 * 2.0 * s.rho_max * s.rho_max / 400.0f64).powf(1.0 / (3.0 - 2.0));
        assert_relative_eq!(scan.bands[0].rho_hi, crit, max_relative = 1e-10);
        // γ = 3: constant sign
        let s3 = ModelSpec {
            pressure: Some(PressureCurve::Power { beta: 5.0, gamma: 3.0 }),
            ..pw1()
        };
        let scan = unstable_bands(&s3, 4096, 1e-14).unwrap();
        assert_eq!(scan.bands.len(), 1);
    }

    #[test]
    fn bddr_with_linear_velocity_band() {
        // h' + U' = 0 ⇔ y^(1/2) (1-y)^(3/2) = β/(2 u_max) = 0.2
        let s = ModelSpec {
            family: Family::ARZ,
            velocity: VelocityCurve::Linear,
            pressure: None,
            hesitation: Some(HesitationCurve::Bddr { beta: 8.0, gamma: 0.5 }),
            ..pw1()
        };
        let f = |y: f64| y.sqrt() * (1.0 - y).powf(1.5) - 0.2;
        let root = |a: f64, b: f64| crate::numeric::bisect("oracle", |y| Ok(f(y)), a, b, 1e-15).unwrap();
        // f peaks at y = 1/4
        let (y1, y2) = (root(1e-6, 0.25), root(0.25, 1.0 - 1e-9));
        let u = unstable_bands(&s, 4096, 1e-14).unwrap().unstable_vec();
        assert_eq!(u.len(), 1);
        assert_relative_eq!(u[0].rho_lo / s.rho_max, y1, max_relative = 1e-9);
        assert_relative_eq!(u[0].rho_hi / s.rho_max, y2, max_relative = 1e-9);
    }

    #[test]
    fn every_preset_has_one_band() {
        for name in PRESET_NAMES {
            let s = ModelSpec::preset(name).unwrap();
            let u = unstable_bands_default(&s).unwrap();
            assert_eq!(u.len(), 1, "{name}");
            for r in [u[0].rho_lo, u[0].rho_hi] {
                assert!(scc_margin(&s, r).unwrap().abs() < 1e-6, "{name}");
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = pw1();
        assert!(unstable_bands(&s, 8, 1e-9).is_err());
        assert!(unstable_bands(&s, 100, 0.0).is_err());
    }
}
