//! CSV logs and the JSON metrics sidecar.
//!
//! Floats are written with 9 significant digits; `inf` and `nan` appear
//! verbatim (no movers, governor holding).

use std::io::{self, Write};

use super::engine::{Metrics, MoverRecord, Record};

pub const LOG_COLUMNS: [&str; 20] = [
    "t",
    "px",
    "py",
    "theta",
    "v",
    "omega",
    "gx",
    "gy",
    "ugx",
    "ugy",
    "ubx",
    "uby",
    "sigma",
    "R",
    "d_M",
    "d_p",
    "k_v",
    "h_star",
    "status",
    "replanned",
];

pub const MOVER_COLUMNS: [&str; 6] = ["t", "id", "x", "y", "vx", "vy"];

pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.8e}")
    }
}

pub fn write_log<W: Write>(mut out: W, log: &[Record]) -> io::Result<()> {
    writeln!(out, "{}", LOG_COLUMNS.join(","))?;
    for r in log {
        let floats = [
            r.t,
            r.x.p.x,
            r.x.p.y,
            r.x.theta,
            r.u.v,
            r.u.omega,
            r.g.x,
            r.g.y,
            r.u_g.x,
            r.u_g.y,
            r.u_bar.x,
            r.u_bar.y,
            r.sigma,
            r.zone_radius,
            r.d_cone,
            r.d_robot,
            r.k_v,
            r.h_star,
        ];
        let cols: Vec<String> = floats.iter().map(|&v| fmt_float(v)).collect();
        writeln!(out, "{},{},{}", cols.join(","), r.status.as_str(), u8::from(r.replanned))?;
    }
    Ok(())
}

pub fn write_movers<W: Write>(mut out: W, records: &[MoverRecord]) -> io::Result<()> {
    writeln!(out, "{}", MOVER_COLUMNS.join(","))?;
    for m in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(m.t),
            m.id,
            fmt_float(m.p.x),
            fmt_float(m.p.y),
            fmt_float(m.v.x),
            fmt_float(m.v.y)
        )?;
    }
    Ok(())
}

pub fn metrics_json(m: &Metrics) -> String {
    serde_json::to_string_pretty(m).expect("metrics serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.1), "1.00000000e-1");
        assert_eq!(fmt_float(-12345.678901), "-1.23456789e4");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NAN), "nan");
        // 9 significant digits round-trip to within 5e-9 relative
        let v = 1.234567890123;
        let back: f64 = fmt_float(v).parse().unwrap();
        assert!((back - v).abs() <= 5e-9 * v);
    }
}
