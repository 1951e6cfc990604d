//! Parsing of scalar and grid arguments.
//!
//! A value is a number, optionally scaled by `pi`: `0.3`, `pi`, `pi/2`,
//! `0.5*pi`, `3*pi/4`. A grid is either a single value, a comma list
//! (`0.1,0.5,1`) or an inclusive range `start:stop:count`.

use std::f64::consts::PI;

use crate::ConfigError;

pub fn parse_value(s: &str) -> Result<f64, ConfigError> {
    let bad = || ConfigError(format!("cannot parse number '{s}'"));
    let t = s.trim();
    if t.is_empty() {
        return Err(bad());
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim().parse::<f64>().map_err(|_| bad())?)),
        None => (t, None),
    };
    let value = if let Some(coef) = num.strip_suffix("pi") {
        let coef = coef.trim().trim_end_matches('*').trim();
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| bad())?,
        };
        c * PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let value = match den {
        Some(d) if d != 0.0 => value / d,
        Some(_) => return Err(bad()),
        None => value,
    };
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(parse_value).collect(),
        [start, stop, count] => {
            let (a, b) = (parse_value(start)?, parse_value(stop)?);
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| ConfigError(format!("grid point count '{count}' is not a positive integer")))?;
            match n {
                0 => Err(ConfigError(format!("grid '{s}' is empty"))),
                1 => Ok(vec![a]),
                n => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        _ => Err(ConfigError(format!(
            "grid '{s}' must be a value, a comma list or start:stop:count"
        ))),
    }
}
