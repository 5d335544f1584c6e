//! wasm-bindgen exports for `www/index.html`. Every function takes a model as
//! JSON (or a preset name) and returns JSON or SVG text.

use jamiton_core::fdgen::{self, FdMode};
use jamiton_core::jamiton::{self, JamitonFamily};
use jamiton_core::models::PRESET_NAMES;
use jamiton_core::{render, stability, units, ModelSpec};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Preset name or a full model document.
pub fn parse_model(model: &str) -> Result<ModelSpec, String> {
    let m = model.trim();
    let spec = if m.starts_with('{') {
        ModelSpec::from_json_str(m)
    } else {
        ModelSpec::preset(m)
    };
    spec.map_err(|e| e.to_string())
}

pub fn presets_json() -> String {
    let docs: serde_json::Map<_, _> = PRESET_NAMES
        .iter()
        .map(|n| (n.to_string(), serde_json::from_str(&ModelSpec::preset(n).unwrap().to_json()).unwrap()))
        .collect();
    serde_json::Value::Object(docs).to_string()
}

/// Bands in veh/km plus the SCC margin on a coarse grid for plotting.
pub fn stability_json(model: &str) -> Result<String, String> {
    let spec = parse_model(model)?;
    let scan = stability::unstable_bands(&spec, stability::DEFAULT_SCAN_POINTS, 1e-12 * spec.rho_max)
        .map_err(|e| e.to_string())?;
    let margin = stability::margin_samples(&spec, 400).map_err(|e| e.to_string())?;
    Ok(json!({
        "rho_max": units::density_to_veh_per_km(spec.rho_max),
        "bands": scan.bands.iter().map(|b| json!({
            "rho_lo": units::density_to_veh_per_km(b.rho_lo),
            "rho_hi": units::density_to_veh_per_km(b.rho_hi),
            "stable": b.stable,
        })).collect::<Vec<_>>(),
        "margin": margin.iter().map(|&(r, m)| [units::density_to_veh_per_km(r), m]).collect::<Vec<_>>(),
    })
    .to_string())
}

/// SVG of a coarse diagram; sampling is kept small for interactive use.
pub fn fd_svg_text(model: &str, mode: &str, alpha: f64) -> Result<String, String> {
    let spec = parse_model(model)?;
    let mode: FdMode = mode.parse().map_err(|e: jamiton_core::Error| e.to_string())?;
    let fd = match mode {
        FdMode::Maximal => fdgen::maximal_fd(&spec, 200),
        FdMode::Aggregate => fdgen::aggregate_fd(&spec, alpha, 40, 8, 16),
        FdMode::Effective => fdgen::effective_fd(&spec, 60, 12),
    }
    .map_err(|e| e.to_string())?;
    Ok(render::fd_svg(&fd, spec.rho_max, None))
}

/// Jamiton at `band_frac` across the first unstable band, shock level
/// `r_frac`. Profile in (η, ρ veh/km, u m/s).
pub fn profile_json(model: &str, band_frac: f64, r_frac: f64, samples: usize) -> Result<String, String> {
    let spec = parse_model(model)?;
    let band = stability::unstable_bands_default(&spec)
        .map_err(|e| e.to_string())?
        .into_iter()
        .next()
        .ok_or("this model has no unstable band")?;
    let f = band_frac.clamp(0.01, 0.99);
    let fam = JamitonFamily::new(&spec, band.rho_lo + f * band.width()).map_err(|e| e.to_string())?;
    let (vp, vm) = if r_frac >= 1.0 {
        (fam.v_r, fam.v_m)
    } else {
        jamiton::shock_pair_frac(&spec, &fam, r_frac.max(1e-3)).map_err(|e| e.to_string())?
    };
    let p = jamiton::integrate_profile(&spec, &fam, vp, vm, samples.max(16)).map_err(|e| e.to_string())?;
    Ok(json!({
        "rho_s": units::density_to_veh_per_km(fam.rho_s),
        "s": fam.s,
        "m": units::flow_to_veh_per_hour(fam.m),
        "tau": spec.tau,
        "length": p.length.value(),
        "count": p.count.value(),
        "infinite": p.length.is_infinite(),
        "eta": p.samples.iter().map(|x| x.eta).collect::<Vec<_>>(),
        "rho": p.samples.iter().map(|x| units::density_to_veh_per_km(x.rho)).collect::<Vec<_>>(),
        "u": p.samples.iter().map(|x| x.u).collect::<Vec<_>>(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn presets() -> String {
    presets_json()
}

#[wasm_bindgen]
pub fn bands(model: &str) -> Result<String, JsError> {
    stability_json(model).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn diagram(model: &str, mode: &str, alpha: f64) -> Result<String, JsError> {
    fd_svg_text(model, mode, alpha).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn profile(model: &str, band_frac: f64, r_frac: f64, samples: usize) -> Result<String, JsError> {
    profile_json(model, band_frac, r_frac, samples).map_err(|e| JsError::new(&e))
}
