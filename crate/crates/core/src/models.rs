//! Desired velocity, pressure and hesitation curves.
//!
//! Every curve is evaluated as a [`Jet`] (value plus first and second
//! derivative) in density. The Lagrangian view `f̂(v) = f(1/v)` is obtained by
//! the exact chain rule in [`Jet::to_lagrangian`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    PW,
    ARZ,
}

/// Desired velocity `U(ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum VelocityCurve {
    /// `U = u_max (1 - ρ/ρ_max)`.
    Linear,
    /// Smoothed Newell-Daganzo flux
    /// `Q = c (g(0) + (g(1) - g(0)) y - g(y))`, `g(y) = sqrt(1 + ((y-b)/λ)²)`.
    Snd { c: f64, b: f64, lambda: f64 },
}

/// PW traffic pressure `p(ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PressureCurve {
    /// `p = β ρ^γ`.
    Power { beta: f64, gamma: f64 },
    /// `p = -β (y + ln(1 - y))`, `y = ρ/ρ_max`.
    Log { beta: f64 },
}

/// ARZ hesitation `h(ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HesitationCurve {
    /// `h = β ρ^γ`.
    Power { beta: f64, gamma: f64 },
    /// `h = β (y / (1 - y))^γ`.
    Bddr { beta: f64, gamma: f64 },
    /// `h = β y^γ1 / (1 - y)^γ2`.
    Gbddr { beta: f64, gamma1: f64, gamma2: f64 },
}

/// Complete description of one second order model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    /// m/s
    pub u_max: f64,
    /// veh/m
    pub rho_max: f64,
    /// Relaxation time, s.
    pub tau: f64,
    pub velocity: VelocityCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<PressureCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hesitation: Option<HesitationCurve>,
}

/// Which curve to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    /// Desired velocity.
    U,
    /// Pressure (PW).
    P,
    /// Hesitation (ARZ).
    H,
}

/// Value and first two derivatives of a scalar function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }

    pub fn order(&self, order: u8) -> f64 {
        match order {
            0 => self.value,
            1 => self.d1,
            _ => self.d2,
        }
    }

    /// Converts a density jet at `rho` into the specific-volume jet at `v = 1/rho`.
    pub fn to_lagrangian(self, rho: f64) -> Jet {
        let r2 = rho * rho;
        Jet {
            value: self.value,
            d1: -self.d1 * r2,
            d2: self.d2 * r2 * r2 + 2.0 * self.d1 * r2 * rho,
        }
    }

    fn finite(self, what: &'static str, at: f64) -> Result<Jet> {
        if self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite() {
            Ok(self)
        } else {
            Err(domain(what, at, "a point where the curve and its derivatives are finite"))
        }
    }
}

pub const PRESET_NAMES: [&str; 4] = ["pw1", "pw2", "arz1", "arz2"];

const PRESET_PW1: &str = include_str!("../presets/pw1.json");
const PRESET_PW2: &str = include_str!("../presets/pw2.json");
const PRESET_ARZ1: &str = include_str!("../presets/arz1.json");
const PRESET_ARZ2: &str = include_str!("../presets/arz2.json");

/// Raw JSON text of a bundled preset.
pub fn preset_json(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "pw1" => Some(PRESET_PW1),
        "pw2" => Some(PRESET_PW2),
        "arz1" => Some(PRESET_ARZ1),
        "arz2" => Some(PRESET_ARZ2),
        _ => None,
    }
}

impl ModelSpec {
    /// One of the bundled presets `pw1`, `pw2`, `arz1`, `arz2`.
    pub fn preset(name: &str) -> Result<ModelSpec> {
        let text = preset_json(name).ok_or_else(|| {
            Error::Config(format!("unknown preset '{name}', expected one of {PRESET_NAMES:?}"))
        })?;
        Self::from_json_str(text)
    }

    pub fn from_json_str(text: &str) -> Result<ModelSpec> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<ModelSpec> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ModelSpec serializes")
    }

    /// Structural checks: positive scales and the curve matching the family.
    /// Sign conditions on the curves are left to [`ModelSpec::validate_assumptions`].
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
            }
        };
        pos("u_max", self.u_max)?;
        pos("rho_max", self.rho_max)?;
        pos("tau", self.tau)?;
        if let VelocityCurve::Snd { c, b, lambda } = self.velocity {
            pos("velocity.c", c)?;
            pos("velocity.lambda", lambda)?;
            if !b.is_finite() {
                return Err(Error::Config(format!("velocity.b must be finite, got {b}")));
            }
        }
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite, got {x}")))
            }
        };
        match (self.family, &self.pressure, &self.hesitation) {
            (Family::PW, Some(p), None) => match *p {
                PressureCurve::Power { beta, gamma } => {
                    finite("pressure.beta", beta)?;
                    pos("pressure.gamma", gamma)
                }
                PressureCurve::Log { beta } => finite("pressure.beta", beta),
            },
            (Family::ARZ, None, Some(h)) => match *h {
                HesitationCurve::Power { beta, gamma } | HesitationCurve::Bddr { beta, gamma } => {
                    finite("hesitation.beta", beta)?;
                    pos("hesitation.gamma", gamma)
                }
                HesitationCurve::Gbddr { beta, gamma1, gamma2 } => {
                    finite("hesitation.beta", beta)?;
                    pos("hesitation.gamma1", gamma1)?;
                    pos("hesitation.gamma2", gamma2)
                }
            },
            (Family::PW, _, _) => Err(Error::Config(
                "a PW model needs exactly a 'pressure' curve and no 'hesitation'".into(),
            )),
            (Family::ARZ, _, _) => Err(Error::Config(
                "an ARZ model needs exactly a 'hesitation' curve and no 'pressure'".into(),
            )),
        }
    }

    /// True when the pressure or hesitation has a pole at `ρ_max`.
    pub fn is_singular(&self) -> bool {
        matches!(
            (self.pressure, self.hesitation),
            (Some(PressureCurve::Log { .. }), _)
                | (_, Some(HesitationCurve::Bddr { .. }))
                | (_, Some(HesitationCurve::Gbddr { .. }))
        )
    }

    /// Smallest admissible specific volume.
    pub fn v_min(&self) -> f64 {
        1.0 / self.rho_max
    }

    /// `U`, `U'`, `U''` at density `rho`.
    pub fn velocity_jet(&self, rho: f64) -> Result<Jet> {
        let rm = self.rho_max;
        match self.velocity {
            VelocityCurve::Linear => {
                if !(0.0..=rm).contains(&rho) {
                    return Err(domain("rho", rho, format!("[0, {rm}]")));
                }
                Ok(Jet::new(self.u_max * (1.0 - rho / rm), -self.u_max / rm, 0.0))
            }
            VelocityCurve::Snd { c, b, lambda } => {
                if !(0.0..=rm).contains(&rho) {
                    return Err(domain("rho", rho, format!("[0, {rm}]")));
                }
                let y = rho / rm;
                let l2 = lambda * lambda;
                let g = snd_g(y, b, lambda);
                let g0 = snd_g(0.0, b, lambda);
                let g1 = snd_g(1.0, b, lambda);
                let gp = (y - b) / (l2 * g);
                let gpp = 1.0 / (l2 * g * g * g);
                // (g(y) - g(0)) / y = (y - 2b) / (λ² (g + g0)), finite at y = 0
                let n = y - 2.0 * b;
                let d = l2 * (g + g0);
                let dp = l2 * gp;
                let dpp = l2 * gpp;
                let phi = n / d;
                let phi1 = 1.0 / d - n * dp / (d * d);
                let phi2 = -2.0 * dp / (d * d) - n * dpp / (d * d) + 2.0 * n * dp * dp / (d * d * d);
                let k = c / rm;
                Jet::new(k * (g1 - g0 - phi), -k * phi1 / rm, -k * phi2 / (rm * rm)).finite("rho", rho)
            }
        }
    }

    pub fn eval_velocity(&self, rho: f64, order: u8) -> Result<f64> {
        self.velocity_jet(rho).map(|j| j.order(order))
    }

    /// Pressure (PW) or hesitation (ARZ) jet at density `rho`.
    pub fn anticipation_jet(&self, rho: f64) -> Result<Jet> {
        self.anticipation_raw(rho)?.finite("rho", rho)
    }

    fn anticipation_raw(&self, rho: f64) -> Result<Jet> {
        let rm = self.rho_max;
        if let Some(p) = self.pressure {
            return match p {
                PressureCurve::Power { beta, gamma } => power_jet(beta, gamma, rho),
                PressureCurve::Log { beta } => {
                    if !(0.0..rm).contains(&rho) {
                        return Err(domain("rho", rho, format!("[0, {rm})")));
                    }
                    let y = rho / rm;
                    let om = 1.0 - y;
                    let value = if y < 1e-2 {
                        // -y - ln(1-y) = Σ_{k≥2} y^k / k
                        let mut acc = 0.0;
                        let mut yk = y;
                        for k in 2..=14 {
                            yk *= y;
                            acc += yk / k as f64;
                        }
                        beta * acc
                    } else {
                        beta * (-y - (-y).ln_1p())
                    };
                    Ok(Jet::new(value, beta / rm * y / om, beta / (rm * rm) / (om * om)))
                }
            };
        }
        match self.hesitation {
            Some(HesitationCurve::Power { beta, gamma }) => power_jet(beta, gamma, rho),
            Some(HesitationCurve::Bddr { beta, gamma }) => pole_jet(beta, gamma, gamma, rho, rm),
            Some(HesitationCurve::Gbddr { beta, gamma1, gamma2 }) => pole_jet(beta, gamma1, gamma2, rho, rm),
            None => Err(Error::Config("model has neither pressure nor hesitation".into())),
        }
    }

    /// Only the requested order has to be finite, so `p(0) = 0` evaluates
    /// even where `p'(0)` blows up.
    pub fn eval_pressure_or_hesitation(&self, rho: f64, order: u8) -> Result<f64> {
        let x = self.anticipation_raw(rho)?.order(order);
        if x.is_finite() {
            Ok(x)
        } else {
            Err(domain("rho", rho, "a point where the requested derivative is finite"))
        }
    }

    /// Density jet of one curve.
    pub fn jet(&self, which: Curve, rho: f64) -> Result<Jet> {
        match which {
            Curve::U => self.velocity_jet(rho),
            Curve::P if self.pressure.is_none() => Err(Error::Config("model has no pressure curve".into())),
            Curve::H if self.hesitation.is_none() => Err(Error::Config("model has no hesitation curve".into())),
            Curve::P | Curve::H => self.anticipation_jet(rho),
        }
    }

    /// `f̂(v) = f(1/v)` and its derivatives in `v`.
    pub fn lagrangian_jet(&self, which: Curve, v: f64) -> Result<Jet> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(domain("v", v, "(0, inf)"));
        }
        let rho = 1.0 / v;
        Ok(self.jet(which, rho)?.to_lagrangian(rho))
    }

    pub fn lagrangian_view(&self, v: f64, which: Curve, order: u8) -> Result<f64> {
        Ok(self.lagrangian_jet(which, v)?.order(order))
    }

    /// `Q = ρ U(ρ)` and its first two derivatives.
    pub fn flux_jet(&self, rho: f64) -> Result<Jet> {
        let u = self.velocity_jet(rho)?;
        Ok(Jet::new(rho * u.value, u.value + rho * u.d1, 2.0 * u.d1 + rho * u.d2))
    }

    /// `Q_eq(ρ)` for order 0, `Q'_eq(ρ) = U + ρU'` for order 1.
    pub fn equilibrium_flux(&self, rho: f64, order: u8) -> Result<f64> {
        Ok(self.flux_jet(rho)?.order(order))
    }

    /// Samples the sign conditions on the curves.
    ///
    /// (a) `Û' > 0`, `Û'' < 0` on a log-spaced `v` grid in `(1/ρ_max, 100/ρ_max)`
    /// together with `Q'' < 0` on a uniform `ρ` grid in `(0, ρ_max)`;
    /// (b) `p̂' < 0`, `p̂'' > 0` for PW; (c) `ĥ' < 0`, `ĥ'' > 0` for ARZ.
    pub fn validate_assumptions(&self, grid_size: usize) -> AssumptionReport {
        let n = grid_size.max(2);
        let v_lo = self.v_min();
        let vs: Vec<f64> = (0..n)
            .map(|i| v_lo * (100f64.ln() * (i + 1) as f64 / (n + 1) as f64).exp())
            .collect();
        let mut checks = Vec::new();

        let mut a = AssumptionCheck::new("a", "U increasing and concave in v, Q concave in rho");
        for &v in &vs {
            match self.lagrangian_jet(Curve::U, v) {
                Ok(j) if j.d1 > 0.0 && j.d2 < 0.0 => {}
                Ok(j) => {
                    a.fail(v, format!("dU/dv = {:e}, d2U/dv2 = {:e}", j.d1, j.d2));
                    break;
                }
                Err(e) => {
                    a.fail(v, e.to_string());
                    break;
                }
            }
        }
        if a.passed {
            for i in 0..n {
                let rho = self.rho_max * (i + 1) as f64 / (n + 1) as f64;
                match self.flux_jet(rho) {
                    Ok(q) if q.d2 < 0.0 => {}
                    Ok(q) => {
                        a.fail(1.0 / rho, format!("Q'' = {:e} at rho = {rho:e}", q.d2));
                        break;
                    }
                    Err(e) => {
                        a.fail(1.0 / rho, e.to_string());
                        break;
                    }
                }
            }
        }
        checks.push(a);

        let (label, text, which) = match self.family {
            Family::PW => ("b", "p decreasing and convex in v", Curve::P),
            Family::ARZ => ("c", "h decreasing and convex in v", Curve::H),
        };
        let mut bc = AssumptionCheck::new(label, text);
        for &v in &vs {
            match self.lagrangian_jet(which, v) {
                Ok(j) if j.d1 < 0.0 && j.d2 > 0.0 => {}
                Ok(j) => {
                    bc.fail(v, format!("first derivative {:e}, second derivative {:e}", j.d1, j.d2));
                    break;
                }
                Err(e) => {
                    bc.fail(v, e.to_string());
                    break;
                }
            }
        }
        checks.push(bc);
        AssumptionReport { checks }
    }
}

fn snd_g(y: f64, b: f64, lambda: f64) -> f64 {
    ((y - b) / lambda).hypot(1.0)
}

fn power_jet(beta: f64, gamma: f64, rho: f64) -> Result<Jet> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(domain("rho", rho, "[0, inf)"));
    }
    let value = beta * rho.powf(gamma);
    let d1 = if gamma == 1.0 { beta } else { beta * gamma * rho.powf(gamma - 1.0) };
    let d2 = if gamma == 1.0 {
        0.0
    } else if gamma == 2.0 {
        2.0 * beta
    } else {
        beta * gamma * (gamma - 1.0) * rho.powf(gamma - 2.0)
    };
    Ok(Jet::new(value, d1, d2))
}

/// `β y^a (1-y)^(-b)` with `y = ρ/ρ_max`.
fn pole_jet(beta: f64, a: f64, b: f64, rho: f64, rho_max: f64) -> Result<Jet> {
    if !(0.0..rho_max).contains(&rho) {
        return Err(domain("rho", rho, format!("[0, {rho_max})")));
    }
    let y = rho / rho_max;
    let om = 1.0 - y;
    let h = beta * y.powf(a) * om.powf(-b);
    let l1 = a / y + b / om;
    let d1 = h * l1;
    let d2 = h * (l1 * l1 - a / (y * y) + b / (om * om));
    Ok(Jet::new(h, d1 / rho_max, d2 / (rho_max * rho_max)))
}

/// Result of one sampled sign condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub label: &'static str,
    pub description: &'static str,
    pub passed: bool,
    /// Specific volume of the first violating sample.
    pub first_violation_v: Option<f64>,
    pub detail: Option<String>,
}

impl AssumptionCheck {
    fn new(label: &'static str, description: &'static str) -> Self {
        Self {
            label,
            description,
            passed: true,
            first_violation_v: None,
            detail: None,
        }
    }

    fn fail(&mut self, v: f64, detail: String) {
        self.passed = false;
        self.first_violation_v = Some(v);
        self.detail = Some(detail);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, label: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.label == label)
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
    fn presets_load_and_validate() {
        for name in PRESET_NAMES {
            let spec = ModelSpec::preset(name).unwrap();
            assert!(spec.validate_assumptions(1000).all_passed(), "{name}");
        }
        assert!(ModelSpec::preset("nope").is_err());
    }

    #[test]
    fn snd_flow_scale_matches_dimensionless_form() {
        let spec = ModelSpec::preset("pw2").unwrap();
        let VelocityCurve::Snd { c, .. } = spec.velocity else { panic!() };
        assert_relative_eq!(c, 0.078 * spec.rho_max * spec.u_max, max_relative = 1e-12);
    }

    #[test]
    fn linear_endpoints() {
        let s = pw1();
        assert_eq!(s.eval_velocity(0.0, 0).unwrap(), 20.0);
        assert_eq!(s.eval_velocity(s.rho_max, 0).unwrap(), 0.0);
        assert!(s.eval_velocity(1.01 * s.rho_max, 0).is_err());
        assert!(s.eval_velocity(-1e-3, 0).is_err());
    }

    #[test]
    fn snd_flux_vanishes_at_zero() {
        let s = ModelSpec::preset("pw2").unwrap();
        assert_eq!(s.equilibrium_flux(0.0, 0).unwrap(), 0.0);
        // U(0) is the limit Q'(0); compare with the closed-form flux derivative
        let VelocityCurve::Snd { c, b, lambda } = s.velocity else { panic!() };
        let g = |y: f64| (1.0 + ((y - b) / lambda).powi(2)).sqrt();
        let gp0 = (0.0 - b) / (lambda * lambda * g(0.0));
        let q0 = c / s.rho_max * (g(1.0) - g(0.0) - gp0);
        assert_relative_eq!(s.eval_velocity(0.0, 0).unwrap(), q0, max_relative = 1e-13);
        assert!(s.eval_velocity(s.rho_max, 0).unwrap().abs() < 1e-12);
        assert!(s.eval_velocity(1.001 * s.rho_max, 0).is_err());
    }

    #[test]
    fn snd_matches_direct_flux_formula() {
        let s = ModelSpec::preset("arz1").unwrap();
        let VelocityCurve::Snd { c, b, lambda } = s.velocity else { panic!() };
        let g = |y: f64| (1.0 + ((y - b) / lambda).powi(2)).sqrt();
        for k in 1..50 {
            let y = k as f64 / 50.0;
            let q = c * (g(0.0) + (g(1.0) - g(0.0)) * y - g(y));
            assert_relative_eq!(s.equilibrium_flux(y * s.rho_max, 0).unwrap(), q, max_relative = 1e-12);
        }
    }

    #[test]
    fn log_pressure_closed_form() {
        let s = pw1();
        let rho = 0.5 * s.rho_max;
        assert_relative_eq!(s.eval_pressure_or_hesitation(rho, 1).unwrap(), 36.0, max_relative = 1e-13);
        assert_relative_eq!(s.lagrangian_view(15.0, Curve::P, 1).unwrap(), -0.16, max_relative = 1e-13);
        assert!(s.eval_pressure_or_hesitation(s.rho_max, 0).is_err());
        // series branch agrees with the direct formula at the switch point
        let y = 1e-2;
        let direct = 4.8 * (-y - (-y as f64).ln_1p());
        let series = s.eval_pressure_or_hesitation(y * s.rho_max * (1.0 - 1e-15), 0).unwrap();
        assert_relative_eq!(direct, series, max_relative = 1e-10);
    }

    #[test]
    fn lagrangian_linear_velocity() {
        let s = pw1();
        assert_relative_eq!(s.lagrangian_view(15.0, Curve::U, 1).unwrap(), 2.0 / 3.0, max_relative = 1e-14);
        assert!(s.lagrangian_view(0.0, Curve::U, 0).is_err());
        assert!(s.lagrangian_view(-1.0, Curve::U, 0).is_err());
    }

    #[test]
    fn flux_examples() {
        let s = pw1();
        assert_relative_eq!(s.equilibrium_flux(1.0 / 15.0, 0).unwrap(), 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(s.equilibrium_flux(0.04, 0).unwrap(), 0.56, max_relative = 1e-14);
        assert_eq!(s.equilibrium_flux(s.rho_max, 0).unwrap(), 0.0);
        assert_eq!(s.equilibrium_flux(0.0, 1).unwrap(), s.u_max);
    }

    #[test]
    fn hesitation_vanishes_at_zero() {
        let s = ModelSpec::preset("arz1").unwrap();
        assert_eq!(s.eval_pressure_or_hesitation(0.0, 0).unwrap(), 0.0);
        let h = s.eval_pressure_or_hesitation(1e-12, 0).unwrap();
        assert!(h > 0.0 && h < 1e-3);
        assert!(s.anticipation_jet(0.0).is_err());
        let p = ModelSpec {
            pressure: Some(PressureCurve::Power { beta: 3.0, gamma: 1.7 }),
            ..pw1()
        };
        assert_eq!(p.eval_pressure_or_hesitation(0.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn assumption_failures() {
        let bad_u = ModelSpec { u_max: -20.0, ..pw1() };
        let r = bad_u.validate_assumptions(100);
        assert!(!r.get("a").unwrap().passed);
        let bad_p = ModelSpec {
            pressure: Some(PressureCurve::Power { beta: -1.0, gamma: 2.0 }),
            ..pw1()
        };
        let r = bad_p.validate_assumptions(100);
        assert!(r.get("a").unwrap().passed);
        assert!(!r.get("b").unwrap().passed);
        assert!(r.get("b").unwrap().first_violation_v.is_some());
    }

    #[test]
    fn structural_validation() {
        let mut s = pw1();
        s.hesitation = Some(HesitationCurve::Bddr { beta: 8.0, gamma: 0.5 });
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let s = ModelSpec { tau: 0.0, ..pw1() };
        assert!(s.validate().is_err());
        let missing = r#"{"family":"PW","u_max":20,"rho_max":0.1,"tau":5,
            "velocity":{"type":"snd","c":0.2},"pressure":{"type":"log","beta":1}}"#;
        assert!(ModelSpec::from_json_str(missing).is_err());
    }

    #[test]
    fn json_round_trip() {
        for name in PRESET_NAMES {
            let s = ModelSpec::preset(name).unwrap();
            let back = ModelSpec::from_json_str(&s.to_json()).unwrap();
            assert_eq!(s, back);
        }
    }
}
