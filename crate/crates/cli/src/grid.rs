//! `q_w=a:b:step,q_c=a:b:step` grid specs.

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub q_wifi: Vec<f64>,
    pub q_cell: Vec<f64>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn number(s: &str, part: &str) -> Result<f64, CliError> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| usage(format!("grid: {part} is not a number: {s:?}")))?;
    if !x.is_finite() {
        return Err(usage(format!("grid: {part} must be finite")));
    }
    Ok(x)
}

/// Values of `start:end:step`, or the single value of `x`. Points are rounded
/// to 12 decimals so `0.1:0.9:0.1` yields exactly the printed values.
fn axis(range: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = range.split(':').collect();
    let values = match parts.as_slice() {
        [x] => vec![number(x, "value")?],
        [a, b, s] => {
            let (start, end, step) = (number(a, "start")?, number(b, "end")?, number(s, "step")?);
            if step <= 0.0 {
                return Err(usage("grid: step must be positive"));
            }
            if end < start {
                return Err(usage("grid: end is below start"));
            }
            let n = ((end - start) / step + 1e-9).floor() as usize + 1;
            (0..n)
                .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        _ => {
            return Err(usage(format!(
                "grid: expected start:end:step, got {range:?}"
            )))
        }
    };
    if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(usage(format!(
            "grid: traffic density {bad} is outside [0, 1]"
        )));
    }
    Ok(values)
}

impl GridSpec {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let mut q_wifi = None;
        let mut q_cell = None;
        for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, range) = item
                .split_once('=')
                .ok_or_else(|| usage(format!("grid: expected key=range, got {item:?}")))?;
            let slot = match key.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                "q_w" => &mut q_wifi,
                "q_c" => &mut q_cell,
                other => return Err(usage(format!("grid: unknown axis {other:?}"))),
            };
            if slot.is_some() {
                return Err(usage(format!("grid: axis {key} given twice")));
            }
            *slot = Some(axis(range)?);
        }
        match (q_wifi, q_cell) {
            (Some(q_wifi), Some(q_cell)) => Ok(GridSpec { q_wifi, q_cell }),
            _ => Err(usage("grid: both q_w and q_c axes are required")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_by_nine() {
        let g = GridSpec::parse("q_w=0.1:0.9:0.1,q_c=0.1:0.9:0.1").unwrap();
        assert_eq!(g.q_wifi, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        assert_eq!(g.q_cell, g.q_wifi);
    }

    #[test]
    fn single_points_and_errors() {
        let g = GridSpec::parse("q_c=0.5,q_w=0.5").unwrap();
        assert_eq!((g.q_wifi, g.q_cell), (vec![0.5], vec![0.5]));
        for bad in [
            "q_w=0.1:0.9:0,q_c=0.5",
            "q_w=0.5",
            "q_w=0.5,q_c=x",
            "q_w=0.5,q_c=1.5",
            "q_w=0.9:0.1:0.1,q_c=0.5",
            "q_w=0.5,q_c=0.5,q_c=0.4",
            "q_x=0.5,q_c=0.5",
        ] {
            assert!(GridSpec::parse(bad).is_err(), "{bad}");
        }
    }
}
