//! CSV tables and SVG plots of fundamental diagrams.
//!
//! Every table is in road units: densities in veh/km, flows in veh/h and
//! speeds in km/h. Output is a pure function of the input, no timestamps.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::fdgen::{CloudPoint, FdMode, FdSegment, FundamentalDiagram};
use crate::sensordata::FdPoint;
use crate::units::{self, fmt17};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

fn km(rho: f64) -> f64 {
    units::density_to_veh_per_km(rho)
}

fn vh(q: f64) -> f64 {
    units::flow_to_veh_per_hour(q)
}

fn kmh(u: f64) -> f64 {
    units::speed_to_km_per_hour(u)
}

fn table(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt17).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `(suffix, contents)` of the per-layer tables, e.g. `("_segments.csv", ..)`.
pub fn fd_tables(fd: &FundamentalDiagram) -> Vec<(&'static str, String)> {
    let equilibrium = table("rho,Q", fd.equilibrium.iter().map(|&(r, q)| vec![km(r), vh(q)]));
    let segments = table(
        "rho_S,m,s,rho_a,Q_a,rho_b,Q_b",
        fd.segments
            .iter()
            .map(|s| vec![km(s.rho_s), vh(s.m), kmh(s.s), km(s.rho_a), vh(s.q_a), km(s.rho_b), vh(s.q_b)]),
    );
    let cloud = table(
        "rho_bar,Q_bar,rho_S,r_frac,phase",
        fd.cloud
            .iter()
            .map(|p| vec![km(p.rho_bar), vh(p.q_bar), km(p.rho_s), p.r_frac, p.phase]),
    );
    let envelopes = {
        let mut out = String::from("envelope,rho,Q\n");
        for (name, pts) in [("upper", &fd.upper_envelope), ("lower", &fd.lower_envelope)] {
            for &(r, q) in pts.iter() {
                let _ = writeln!(out, "{name},{},{}", fmt17(km(r)), fmt17(vh(q)));
            }
        }
        out
    };
    vec![
        ("_equilibrium.csv", equilibrium),
        ("_segments.csv", segments),
        ("_cloud.csv", cloud),
        ("_envelopes.csv", envelopes),
    ]
}

fn parse_table(name: &str, text: &str, header: &str) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::Invalid(format!("{name}: expected header '{header}'")));
    }
    let width = header.split(',').count();
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let cells: Vec<String> = l.split(',').map(|c| c.trim().to_string()).collect();
            if cells.len() == width {
                Ok(cells)
            } else {
                Err(Error::Invalid(format!("{name}: row {} has {} fields", i + 2, cells.len())))
            }
        })
        .collect()
}

fn num(name: &str, cell: &str) -> Result<f64> {
    cell.parse()
        .map_err(|_| Error::Invalid(format!("{name}: '{cell}' is not a number")))
}

/// Inverse of [`fd_tables`]. Takes `(suffix, contents)` pairs; the mode is
/// maximal when the cloud is empty and aggregate otherwise.
pub fn fd_from_tables(tables: &[(&str, String)]) -> Result<FundamentalDiagram> {
    let get = |suffix: &str| {
        tables
            .iter()
            .find(|t| t.0 == suffix)
            .map(|t| t.1.as_str())
            .ok_or_else(|| Error::Invalid(format!("missing table {suffix}")))
    };
    let pairs = |name: &str, rows: Vec<Vec<String>>| -> Result<Vec<(f64, f64)>> {
        rows.iter()
            .map(|r| Ok((units::density_from_veh_per_km(num(name, &r[0])?), units::flow_from_veh_per_hour(num(name, &r[1])?))))
            .collect()
    };
    let equilibrium = pairs("equilibrium", parse_table("equilibrium", get("_equilibrium.csv")?, "rho,Q")?)?;
    let mut segments = Vec::new();
    for r in parse_table("segments", get("_segments.csv")?, "rho_S,m,s,rho_a,Q_a,rho_b,Q_b")? {
        let x: Vec<f64> = r.iter().map(|c| num("segments", c)).collect::<Result<_>>()?;
        segments.push(FdSegment {
            rho_s: units::density_from_veh_per_km(x[0]),
            m: units::flow_from_veh_per_hour(x[1]),
            s: x[2] / 3.6,
            rho_a: units::density_from_veh_per_km(x[3]),
            q_a: units::flow_from_veh_per_hour(x[4]),
            rho_b: units::density_from_veh_per_km(x[5]),
            q_b: units::flow_from_veh_per_hour(x[6]),
        });
    }
    let mut cloud = Vec::new();
    for r in parse_table("cloud", get("_cloud.csv")?, "rho_bar,Q_bar,rho_S,r_frac,phase")? {
        let x: Vec<f64> = r.iter().map(|c| num("cloud", c)).collect::<Result<_>>()?;
        let rho_s = units::density_from_veh_per_km(x[2]);
        let seg = segments
            .iter()
            .min_by(|a, b| (a.rho_s - rho_s).abs().total_cmp(&(b.rho_s - rho_s).abs()))
            .ok_or_else(|| Error::Invalid("cloud points without segments".into()))?;
        cloud.push(CloudPoint {
            rho_bar: units::density_from_veh_per_km(x[0]),
            q_bar: units::flow_from_veh_per_hour(x[1]),
            rho_s: seg.rho_s,
            r_frac: x[3],
            phase: x[4],
            m: seg.m,
            s: seg.s,
        });
    }
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for r in parse_table("envelopes", get("_envelopes.csv")?, "envelope,rho,Q")? {
        let pt = (
            units::density_from_veh_per_km(num("envelopes", &r[1])?),
            units::flow_from_veh_per_hour(num("envelopes", &r[2])?),
        );
        match r[0].as_str() {
            "upper" => upper.push(pt),
            "lower" => lower.push(pt),
            other => return Err(Error::Invalid(format!("envelopes: unknown envelope '{other}'"))),
        }
    }
    Ok(FundamentalDiagram {
        mode: if cloud.is_empty() { FdMode::Maximal } else { FdMode::Aggregate },
        alpha: 0.0,
        reference: Vec::new(),
        equilibrium,
        segments,
        cloud,
        upper_envelope: upper,
        lower_envelope: lower,
        bands: Vec::new(),
        diagnostics: Vec::new(),
    })
}

struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, rho_km: f64) -> f64 {
        MARGIN_L + rho_km / self.x_max * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, q_h: f64) -> f64 {
        HEIGHT - MARGIN_B - q_h / self.y_max * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn pt(&self, rho: f64, q: f64) -> String {
        format!("{:.2},{:.2}", self.x(km(rho)), self.y(vh(q)))
    }
}

/// Smallest of 1, 2, 5 times a power of ten that splits `max` into at most
/// eight ticks.
fn tick_step(max: f64) -> f64 {
    let raw = max / 8.0;
    let p = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * p).find(|&s| s >= raw).unwrap_or(10.0 * p)
}

fn axes(svg: &mut String, f: &Frame) {
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let sx = tick_step(f.x_max);
    let mut v = 0.0;
    while v <= f.x_max + 1e-9 * sx {
        let x = f.x(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            v
        );
        v += sx;
    }
    let sy = tick_step(f.y_max);
    let mut v = 0.0;
    while v <= f.y_max + 1e-9 * sy {
        let y = f.y(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            v
        );
        v += sy;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">density (veh/km)</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">flow rate (veh/h)</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1)
    );
}

fn polyline(svg: &mut String, f: &Frame, pts: &[(f64, f64)], style: &str) {
    if pts.len() < 2 {
        return;
    }
    let p: Vec<String> = pts.iter().map(|&(r, q)| f.pt(r, q)).collect();
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" {style}/>"#, p.join(" "));
}

/// 800x600 plot: reference curve grey, stable equilibrium black, jamiton
/// segments blue, cloud translucent blue, envelopes magenta and optional
/// data points orange.
pub fn fd_svg(fd: &FundamentalDiagram, rho_max: f64, data: Option<&[FdPoint]>) -> String {
    let mut q_top = fd.reference.iter().map(|p| p.1).fold(0.0, f64::max);
    for s in &fd.segments {
        q_top = q_top.max(s.q_a).max(s.q_b);
    }
    for p in data.unwrap_or(&[]) {
        if p.rho <= rho_max {
            q_top = q_top.max(p.q);
        }
    }
    let f = Frame {
        x_max: km(rho_max),
        y_max: vh(q_top.max(1e-12)) * 1.05,
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    axes(&mut svg, &f);

    if let Some(points) = data {
        let _ = writeln!(svg, r#"<g fill="rgb(230,120,20)" fill-opacity="0.5">"#);
        for p in points.iter().filter(|p| p.rho <= rho_max) {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, f.x(km(p.rho)), f.y(vh(p.q)));
        }
        let _ = writeln!(svg, "</g>");
    }
    polyline(&mut svg, &f, &fd.reference, r#"stroke="grey" stroke-width="1" stroke-dasharray="4 3""#);
    if !fd.cloud.is_empty() {
        let _ = writeln!(svg, r#"<g fill="rgb(30,80,220)" fill-opacity="0.25">"#);
        for p in &fd.cloud {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.2"/>"#,
                f.x(km(p.rho_bar)),
                f.y(vh(p.q_bar))
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    if !fd.segments.is_empty() {
        let _ = writeln!(svg, r#"<g stroke="rgb(30,80,220)" stroke-width="0.6" stroke-opacity="0.7">"#);
        for s in &fd.segments {
            let (a, b) = (f.pt(s.rho_a, s.q_a), f.pt(s.rho_b, s.q_b));
            let (a, b) = (a.split_once(',').unwrap(), b.split_once(',').unwrap());
            let _ = writeln!(svg, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, a.0, a.1, b.0, b.1);
        }
        let _ = writeln!(svg, "</g>");
    }
    polyline(&mut svg, &f, &fd.upper_envelope, r#"stroke="magenta" stroke-width="1.5""#);
    polyline(&mut svg, &f, &fd.lower_envelope, r#"stroke="magenta" stroke-width="1.5""#);
    // stable equilibrium branches drawn separately so the band stays open
    let mut branch: Vec<(f64, f64)> = Vec::new();
    let mut last_rho = f64::NEG_INFINITY;
    let gap = 2.0 * rho_max / fd.equilibrium.len().max(1) as f64;
    for &(r, q) in &fd.equilibrium {
        if r - last_rho > gap && !branch.is_empty() {
            polyline(&mut svg, &f, &branch, r#"stroke="black" stroke-width="2""#);
            branch.clear();
        }
        branch.push((r, q));
        last_rho = r;
    }
    polyline(&mut svg, &f, &branch, r#"stroke="black" stroke-width="2""#);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdgen;
    use crate::models::ModelSpec;

    #[test]
    fn deterministic_and_well_formed() {
        let s = ModelSpec::preset("pw1").unwrap();
        let fd = fdgen::maximal_fd(&s, 40).unwrap();
        let a = fd_svg(&fd, s.rho_max, None);
        assert_eq!(a, fd_svg(&fd, s.rho_max, None));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains(r#"width="800" height="600""#));
    }

    #[test]
    fn tables_have_headers_and_rows() {
        let s = ModelSpec::preset("pw1").unwrap();
        let fd = fdgen::maximal_fd(&s, 40).unwrap();
        let t = fd_tables(&fd);
        let seg = &t.iter().find(|x| x.0 == "_segments.csv").unwrap().1;
        assert!(seg.starts_with("rho_S,m,s,rho_a,Q_a,rho_b,Q_b\n"));
        assert_eq!(seg.lines().count(), fd.segments.len() + 1);
    }

    #[test]
    fn tables_round_trip() {
        let s = ModelSpec::preset("arz1").unwrap();
        let fd = fdgen::aggregate_fd_with(&s, 2.0, 6, 3, 4, 1024).unwrap();
        let t = fd_tables(&fd);
        let back = fd_from_tables(&t).unwrap();
        assert_eq!(back.cloud.len(), fd.cloud.len());
        assert_eq!(back.segments.len(), fd.segments.len());
        for (a, b) in fd.cloud.iter().zip(&back.cloud) {
            assert!((a.rho_bar - b.rho_bar).abs() <= 1e-15 * a.rho_bar.abs());
            assert!((a.q_bar - b.q_bar).abs() <= 1e-15 * a.q_bar.abs());
            assert!((a.s - b.s).abs() <= 1e-14 * a.s.abs().max(1e-12));
        }
        assert_eq!(fd_tables(&back)[2], t[2]);
    }

    #[test]
    fn ticks() {
        assert_eq!(tick_step(133.3), 20.0);
        assert_eq!(tick_step(2400.0), 500.0);
    }
}
