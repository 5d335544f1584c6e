//! Loop-detector records: CSV ingestion, conversion to `(ρ, Q)` points and
//! coverage against a computed fundamental diagram.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fdgen::{FdRegion, FundamentalDiagram};
use crate::models::ModelSpec;
use crate::units::{self, fmt17};

pub const DEFAULT_VEHICLE_LENGTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensorRecord {
    pub t_start: f64,
    pub interval: f64,
    pub count: u64,
    pub occupancy: f64,
}

/// Header names to read from. `interval` is optional; rows fall back to the
/// default interval when the column is absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub t: String,
    pub count: String,
    pub occupancy: String,
    pub interval: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            t: "t".into(),
            count: "count".into(),
            occupancy: "occupancy".into(),
            interval: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    /// 1-based line number in the file, header is line 1.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LoadReport {
    pub rows: usize,
    pub records: Vec<SensorRecord>,
    pub rejects: Vec<Reject>,
}

pub fn load_csv(path: &Path, map: &ColumnMap, interval_default: Option<f64>) -> Result<LoadReport> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    load_reader(file, map, interval_default).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv { path: path.to_path_buf(), source },
        other => other,
    })
}

pub fn load_reader<R: Read>(reader: R, map: &ColumnMap, interval_default: Option<f64>) -> Result<LoadReport> {
    let csv_err = |source| Error::Csv { path: "<reader>".into(), source };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("missing column '{name}'")))
    };
    let it = col(&map.t)?;
    let ic = col(&map.count)?;
    let io = col(&map.occupancy)?;
    let ii = match &map.interval {
        Some(name) => Some(col(name)?),
        None => headers.iter().position(|h| h == "interval"),
    };
    if ii.is_none() && interval_default.is_none() {
        return Err(Error::Config("no interval column and no default interval".into()));
    }
    if let Some(d) = interval_default {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!("default interval must be positive, got {d}")));
        }
    }

    let mut report = LoadReport::default();
    for row in rdr.records() {
        report.rows += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.rejects.push(Reject { line, reason: e.to_string() });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, it, ic, io, ii, interval_default) {
            Ok(r) => report.records.push(r),
            Err(reason) => report.rejects.push(Reject { line, reason }),
        }
    }
    Ok(report)
}

fn parse_row(
    row: &csv::StringRecord,
    it: usize,
    ic: usize,
    io: usize,
    ii: Option<usize>,
    interval_default: Option<f64>,
) -> std::result::Result<SensorRecord, String> {
    let field = |i: usize, name: &str| row.get(i).filter(|s| !s.is_empty()).ok_or(format!("empty {name}"));
    let num = |i: usize, name: &str| -> std::result::Result<f64, String> {
        let s = field(i, name)?;
        let x: f64 = s.parse().map_err(|_| format!("{name} '{s}' is not a number"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("{name} is not finite"))
        }
    };
    let t_start = num(it, "t")?;
    let count_s = field(ic, "count")?;
    let count: u64 = count_s
        .parse()
        .map_err(|_| format!("count '{count_s}' is not a non-negative integer"))?;
    let occupancy = num(io, "occupancy")?;
    if !(0.0..=1.0).contains(&occupancy) {
        return Err(format!("occupancy {occupancy} outside [0, 1]"));
    }
    let interval = match ii.and_then(|i| row.get(i)).filter(|s| !s.is_empty()) {
        Some(_) => num(ii.unwrap(), "interval")?,
        None => interval_default.ok_or("missing interval")?,
    };
    if !(interval > 0.0) {
        return Err(format!("interval {interval} is not positive"));
    }
    Ok(SensorRecord { t_start, interval, count, occupancy })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdPoint {
    pub rho: f64,
    pub q: f64,
}

/// `ρ = occupancy / vehicle_length`, `Q = count / interval`.
pub fn to_fd_points(records: &[SensorRecord], vehicle_length: f64) -> Result<Vec<FdPoint>> {
    if !(vehicle_length > 0.0 && vehicle_length.is_finite()) {
        return Err(Error::Config(format!("vehicle length must be positive, got {vehicle_length}")));
    }
    Ok(records
        .iter()
        .map(|r| FdPoint {
            rho: r.occupancy / vehicle_length,
            q: r.count as f64 / r.interval,
        })
        .collect())
}

/// Writes `rho,Q` in veh/km and veh/h.
pub fn write_points<W: Write>(w: W, points: &[FdPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |source| Error::Csv { path: "<writer>".into(), source };
    wtr.write_record(["rho", "Q"]).map_err(err)?;
    for p in points {
        wtr.write_record([
            fmt17(units::density_to_veh_per_km(p.rho)),
            fmt17(units::flow_to_veh_per_hour(p.q)),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(())
}

/// Reads what [`write_points`] wrote, back to SI.
pub fn read_points<R: Read>(r: R) -> Result<Vec<FdPoint>> {
    let err = |source| Error::Csv { path: "<reader>".into(), source };
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(err)?;
        let get = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Invalid(format!("bad point row {:?}", row)))
        };
        out.push(FdPoint {
            rho: units::density_from_veh_per_km(get(0)?),
            q: units::flow_from_veh_per_hour(get(1)?),
        });
    }
    Ok(out)
}

/// Writes `line,reason`.
pub fn write_rejects<W: Write>(w: W, rejects: &[Reject]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |source| Error::Csv { path: "<writer>".into(), source };
    wtr.write_record(["line", "reason"]).map_err(err)?;
    for r in rejects {
        wtr.write_record([r.line.to_string(), r.reason.clone()]).map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub fraction: f64,
    pub inside: Vec<bool>,
}

/// Fraction of points inside the diagram's region (jamiton pieces and the
/// equilibrium curve) with relative slack `tolerance`.
pub fn coverage_report(spec: &ModelSpec, points: &[FdPoint], fd: &FundamentalDiagram, tolerance: f64) -> Result<Coverage> {
    if points.is_empty() {
        return Err(Error::Invalid("no points to cover".into()));
    }
    let region = FdRegion::new(spec, fd);
    let inside: Vec<bool> = points.iter().map(|p| region.contains(p.rho, p.q, tolerance)).collect();
    let fraction = inside.iter().filter(|&&b| b).count() as f64 / points.len() as f64;
    Ok(Coverage { fraction, inside })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> LoadReport {
        load_reader(text.as_bytes(), &ColumnMap::default(), Some(30.0)).unwrap()
    }

    #[test]
    fn empty_body() {
        let r = load("t,count,occupancy\n");
        assert!(r.records.is_empty());
        assert!(r.rejects.is_empty());
    }

    #[test]
    fn occupancy_above_one_rejected() {
        let r = load("t,count,occupancy\n0,12,0.1\n30,5,1.2\n");
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.rejects.len(), 1);
        assert_eq!(r.rejects[0].line, 3);
        assert!(r.rejects[0].reason.contains("occupancy"));
    }

    #[test]
    fn flow_from_count() {
        let r = load("t,count,occupancy\n0,12,0.5\n");
        let p = to_fd_points(&r.records, 5.0).unwrap();
        assert_eq!(p[0].q, 0.4);
        assert_eq!(units::flow_to_veh_per_hour(p[0].q), 1440.0);
        assert_eq!(p[0].rho, 0.1);
    }

    #[test]
    fn zero_occupancy() {
        let r = load("t,count,occupancy\n0,0,0\n");
        assert_eq!(to_fd_points(&r.records, 5.0).unwrap()[0].rho, 0.0);
    }

    #[test]
    fn rows_split_into_records_and_rejects() {
        let r = load("t,count,occupancy\n0,1,0.1\nx,1,0.1\n0,-1,0.1\n0,1.5,0.1\n0,1\n0,3,0.2,extra\n");
        assert_eq!(r.rows, 6);
        assert_eq!(r.records.len() + r.rejects.len(), r.rows);
        assert_eq!(r.records.len(), 2);
    }

    #[test]
    fn custom_columns_and_interval_column() {
        let map = ColumnMap {
            t: "time".into(),
            count: "vehicles".into(),
            occupancy: "occ".into(),
            interval: Some("dt".into()),
        };
        let r = load_reader("time,dt,vehicles,occ\n0,20,4,0.2\n".as_bytes(), &map, None).unwrap();
        assert_eq!(r.records[0].interval, 20.0);
        assert!(load_reader("a,b\n".as_bytes(), &map, None).is_err());
        assert!(load_reader("t,count,occupancy\n".as_bytes(), &ColumnMap::default(), None).is_err());
    }

    #[test]
    fn flows_on_count_lattice() {
        let r = load("t,count,occupancy\n0,7,0.1\n30,8,0.1\n60,9,0.2\n");
        for p in to_fd_points(&r.records, 5.0).unwrap() {
            let k = p.q * 30.0;
            assert!((k - k.round()).abs() < 1e-12);
        }
    }
}
