use jamiton_wasm::{fd_svg_text, parse_model, presets_json, profile_json, stability_json};

#[test]
fn presets_parse_back() {
    let v: serde_json::Value = serde_json::from_str(&presets_json()).unwrap();
    for name in ["pw1", "pw2", "arz1", "arz2"] {
        let doc = v[name].to_string();
        assert_eq!(parse_model(&doc).unwrap(), parse_model(name).unwrap());
    }
}

#[test]
fn pw1_band_in_table_units() {
    let v: serde_json::Value = serde_json::from_str(&stability_json("pw1").unwrap()).unwrap();
    let unstable = v["bands"].as_array().unwrap().iter().find(|b| b["stable"] == false).unwrap();
    assert!((unstable["rho_lo"].as_f64().unwrap() - 13.333333333).abs() < 1e-6);
    assert!((unstable["rho_hi"].as_f64().unwrap() - 120.0).abs() < 1e-6);
}

#[test]
fn diagram_modes_render() {
    for mode in ["maximal", "aggregate", "effective"] {
        assert!(fd_svg_text("arz1", mode, 2.0).unwrap().starts_with("<svg"));
    }
    assert!(fd_svg_text("arz1", "bogus", 1.0).is_err());
}

#[test]
fn profile_and_errors() {
    let v: serde_json::Value = serde_json::from_str(&profile_json("pw2", 0.5, 0.5, 64).unwrap()).unwrap();
    assert_eq!(v["rho"].as_array().unwrap().len(), 64);
    assert_eq!(v["infinite"], false);
    let v: serde_json::Value = serde_json::from_str(&profile_json("pw2", 0.5, 1.0, 64).unwrap()).unwrap();
    assert_eq!(v["infinite"], true);
    assert!(profile_json("{\"family\":\"PW\"}", 0.5, 0.5, 64).is_err());
}
