//! Conversions between SI and road units used in output files.

/// veh/m to veh/km.
pub const PER_KM: f64 = 1000.0;
/// veh/s to veh/h.
pub const PER_HOUR: f64 = 3600.0;

pub fn density_to_veh_per_km(rho: f64) -> f64 {
    rho * PER_KM
}

pub fn density_from_veh_per_km(rho: f64) -> f64 {
    rho / PER_KM
}

pub fn flow_to_veh_per_hour(q: f64) -> f64 {
    q * PER_HOUR
}

pub fn flow_from_veh_per_hour(q: f64) -> f64 {
    q / PER_HOUR
}

pub fn speed_to_km_per_hour(u: f64) -> f64 {
    u * 3.6
}

/// Float formatting used in every CSV file: 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else {
        format!("{}", x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_round_trips() {
        for x in [0.1, 1.0 / 7.5, 2.0 / 3.0, -1e-300, 12345.678901234567] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn unit_factors() {
        assert_eq!(density_to_veh_per_km(0.1), 100.0);
        assert_eq!(flow_to_veh_per_hour(0.4), 1440.0);
    }
}
