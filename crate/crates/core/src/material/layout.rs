use crate::error::{Error, Result};
use std::fmt;

/// Piecewise-constant periodic coefficient on the unit cell.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseLayout {
    Constant(f64),
    /// Two phases stacked along `axis` (0-based); `values[0]` occupies
    /// `y_axis mod 1 < fraction`.
    Laminate {
        axis: usize,
        fraction: f64,
        values: [f64; 2],
    },
    /// Two-phase checkerboard of side 1/2.
    Checkerboard {
        values: [f64; 2],
    },
}

impl PhaseLayout {
    pub fn laminate(axis: usize, fraction: f64, values: [f64; 2]) -> Result<Self> {
        if axis > 2 {
            return Err(Error::InvalidArgument(format!(
                "laminate axis {axis} out of range"
            )));
        }
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "volume fraction must lie in (0,1), got {fraction}"
            )));
        }
        Ok(Self::Laminate {
            axis,
            fraction,
            values,
        })
    }

    pub fn value(&self, y: [f64; 3]) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Laminate {
                axis,
                fraction,
                values,
            } => {
                if y[*axis].rem_euclid(1.0) < *fraction {
                    values[0]
                } else {
                    values[1]
                }
            }
            Self::Checkerboard { values } => {
                let parity: i64 = y
                    .iter()
                    .map(|c| (2.0 * c.rem_euclid(1.0)).floor() as i64)
                    .sum();
                values[(parity.rem_euclid(2)) as usize]
            }
        }
    }

    pub fn phase_values(&self) -> Vec<f64> {
        match self {
            Self::Constant(v) => vec![*v],
            Self::Laminate { values, .. } | Self::Checkerboard { values } => values.to_vec(),
        }
    }

    pub fn min(&self) -> f64 {
        self.phase_values()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.phase_values()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::Laminate { values, .. } | Self::Checkerboard { values } => values[0] == values[1],
        }
    }

    pub fn varies_along(&self, axis: usize) -> bool {
        match self {
            Self::Constant(_) => false,
            Self::Laminate {
                axis: a, values, ..
            } => *a == axis && values[0] != values[1],
            Self::Checkerboard { values } => values[0] != values[1],
        }
    }

    /// Mean over the cell.
    pub fn arithmetic_mean(&self) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Laminate {
                fraction, values, ..
            } => fraction * values[0] + (1.0 - fraction) * values[1],
            Self::Checkerboard { values } => 0.5 * (values[0] + values[1]),
        }
    }

    pub fn harmonic_mean(&self) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Laminate {
                fraction, values, ..
            } => 1.0 / (fraction / values[0] + (1.0 - fraction) / values[1]),
            Self::Checkerboard { values } => 2.0 / (1.0 / values[0] + 1.0 / values[1]),
        }
    }

    /// Parses `laminate(axis=1, fraction=0.5, values=[1.0, 10.0])`,
    /// `checkerboard(values=[1, 2])`, `constant(value=3)` or a bare number.
    /// The laminate axis is 1-based in this notation.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Ok(v) = text.parse::<f64>() {
            return Ok(Self::Constant(v));
        }
        let open = text
            .find('(')
            .ok_or_else(|| Error::Config(format!("malformed layout `{text}`")))?;
        if !text.ends_with(')') {
            return Err(Error::Config(format!("malformed layout `{text}`")));
        }
        let name = text[..open].trim();
        let args = parse_args(&text[open + 1..text.len() - 1])?;
        let get = |key: &str| {
            args.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Config(format!("layout `{name}` is missing `{key}`")))
        };
        let allowed: &[&str] = match name {
            "constant" => &["value"],
            "laminate" => &["axis", "fraction", "values"],
            "checkerboard" => &["values"],
            other => return Err(Error::Config(format!("unknown layout kind `{other}`"))),
        };
        if let Some((k, _)) = args.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown layout key `{k}` for `{name}`"
            )));
        }
        match name {
            "constant" => Ok(Self::Constant(parse_num(get("value")?)?)),
            "laminate" => {
                let axis: usize = get("axis")?
                    .parse()
                    .map_err(|_| Error::Config("laminate axis must be 1, 2 or 3".into()))?;
                if !(1..=3).contains(&axis) {
                    return Err(Error::Config("laminate axis must be 1, 2 or 3".into()));
                }
                let fraction = parse_num(get("fraction")?)?;
                let values = parse_pair(get("values")?)?;
                Self::laminate(axis - 1, fraction, values).map_err(|e| Error::Config(e.to_string()))
            }
            _ => Ok(Self::Checkerboard {
                values: parse_pair(get("values")?)?,
            }),
        }
    }
}

impl fmt::Display for PhaseLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "constant(value={v:?})"),
            Self::Laminate {
                axis,
                fraction,
                values,
            } => write!(
                f,
                "laminate(axis={}, fraction={fraction:?}, values=[{:?}, {:?}])",
                axis + 1,
                values[0],
                values[1]
            ),
            Self::Checkerboard { values } => {
                write!(f, "checkerboard(values=[{:?}, {:?}])", values[0], values[1])
            }
        }
    }
}

fn parse_args(body: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    let bytes: Vec<char> = body.chars().collect();
    let mut pieces = Vec::new();
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                pieces.push(bytes[start..i].iter().collect::<String>());
                start = i + 1;
            }
            _ => {}
        }
    }
    pieces.push(bytes[start..].iter().collect::<String>());
    for piece in pieces {
        if piece.trim().is_empty() {
            continue;
        }
        let (k, v) = piece
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{}`", piece.trim())))?;
        let key = k.trim().to_string();
        if out
            .iter()
            .any(|(existing, _): &(String, String)| *existing == key)
        {
            return Err(Error::Config(format!("duplicate layout key `{key}`")));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("`{s}` is not a number")))
}

fn parse_pair(s: &str) -> Result<[f64; 2]> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Config(format!("expected [a, b], got `{s}`")))?;
    let vals: Vec<f64> = inner.split(',').map(parse_num).collect::<Result<_>>()?;
    match vals.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::Config(format!(
            "expected two phase values, got `{s}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_structured_entries() {
        let l = PhaseLayout::parse("laminate(axis=1, fraction=0.5, values=[1.0, 10.0])").unwrap();
        assert_eq!(l, PhaseLayout::laminate(0, 0.5, [1.0, 10.0]).unwrap());
        assert_eq!(PhaseLayout::parse(&l.to_string()).unwrap(), l);
        assert_eq!(
            PhaseLayout::parse("2.5").unwrap(),
            PhaseLayout::Constant(2.5)
        );
        assert_eq!(
            PhaseLayout::parse("checkerboard(values=[1,2])").unwrap(),
            PhaseLayout::Checkerboard { values: [1.0, 2.0] }
        );
    }

    #[test]
    fn rejects_bad_entries() {
        for bad in [
            "laminate(axis=4, fraction=0.5, values=[1, 2])",
            "laminate(axis=1, fraction=1.5, values=[1, 2])",
            "laminate(axis=1, fraction=0.5, values=[1, 2], extra=3)",
            "laminate(axis=1, axis=1, fraction=0.5, values=[1, 2])",
            "spiral(values=[1, 2])",
            "laminate(axis=1, fraction=0.5)",
        ] {
            assert!(PhaseLayout::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn laminate_values_and_means() {
        let l = PhaseLayout::laminate(0, 0.5, [1.0, 4.0]).unwrap();
        assert_eq!(l.value([0.25, 0.9, 0.1]), 1.0);
        assert_eq!(l.value([1.75, 0.9, 0.1]), 4.0);
        assert!((l.harmonic_mean() - 1.6).abs() < 1e-15);
        assert!((l.arithmetic_mean() - 2.5).abs() < 1e-15);
        assert!(l.varies_along(0) && !l.varies_along(1));
    }
}
