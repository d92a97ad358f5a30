//! Named catalog of scalar transforms used for marginal maps and additive
//! components.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hermite::hermite_eval;

/// Piecewise-linear function through sorted knots, constant beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a piecewise table needs two knots".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidArgument("piecewise knots must be finite".into()));
        }
        let mut points = points;
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("piecewise knots must be distinct".into()));
        }
        let (xs, ys) = points.into_iter().unzip();
        Ok(PiecewiseLinear { xs, ys })
    }

    /// Two-column CSV `x,y`; a non-numeric first row is treated as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("table line {}: {e}", line + 1)))?;
            if record.len() != 2 {
                return Err(Error::Parse(format!("table line {} needs two columns", line + 1)));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(y)) => points.push((x, y)),
                _ if line == 0 => continue,
                _ => return Err(Error::Parse(format!("table line {} is not numeric", line + 1))),
            }
        }
        Self::new(points)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }
}

/// A catalog transform `T: R -> R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Zero,
    Identity,
    Square,
    Cube,
    Sign,
    /// `sin(scale * x)`.
    Sin { scale: f64 },
    /// `1{x > threshold}`.
    Indicator { threshold: f64 },
    /// Standard normal CDF, mapping `N(0, 1)` to `U(0, 1)`.
    ProbitUniform,
    Exp,
    /// Normalized Hermite polynomial `H_k`.
    Hermite { order: usize },
    Piecewise(PiecewiseLinear),
}

impl Transform {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Transform::Zero => 0.0,
            Transform::Identity => x,
            Transform::Square => x * x,
            Transform::Cube => x * x * x,
            Transform::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Transform::Sin { scale } => (scale * x).sin(),
            Transform::Indicator { threshold } => f64::from(u8::from(x > *threshold)),
            Transform::ProbitUniform => normal_cdf(x),
            Transform::Exp => x.exp(),
            Transform::Hermite { order } => hermite_eval(*order, x),
            Transform::Piecewise(t) => t.eval(x),
        }
    }

    /// Monotone nondecreasing maps preserve the Gaussian copula.
    pub fn is_monotone(&self) -> bool {
        match self {
            Transform::Identity
            | Transform::Cube
            | Transform::Sign
            | Transform::Indicator { .. }
            | Transform::ProbitUniform
            | Transform::Exp
            | Transform::Zero => true,
            Transform::Hermite { order } => *order <= 1,
            Transform::Piecewise(t) => t.ys.windows(2).all(|w| w[0] <= w[1]),
            Transform::Square | Transform::Sin { .. } => false,
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    /// Accepts `identity`, `square`, `cube`, `sign`, `sin[:scale]`,
    /// `indicator[:threshold]`, `probit_uniform`, `exp`, `hermite:k`
    /// (or `hermiteK`) and `zero`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |default: Option<f64>| -> Result<f64> {
            match arg {
                Some(a) => a
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad parameter in transform '{s}'"))),
                None => default.ok_or_else(|| Error::Parse(format!("transform '{s}' needs a parameter"))),
            }
        };
        let t = match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "zero" => Transform::Zero,
            "identity" | "id" => Transform::Identity,
            "square" => Transform::Square,
            "cube" => Transform::Cube,
            "sign" => Transform::Sign,
            "sin" | "sin_scaled" => Transform::Sin { scale: number(Some(1.0))? },
            "indicator" => Transform::Indicator { threshold: number(Some(0.0))? },
            "probit_uniform" | "uniform" => Transform::ProbitUniform,
            "exp" => Transform::Exp,
            "hermite" => {
                let k = number(None)?;
                if k < 0.0 || k.fract() != 0.0 {
                    return Err(Error::Parse(format!("hermite order must be a whole number in '{s}'")));
                }
                Transform::Hermite { order: k as usize }
            }
            other => match other.strip_prefix("hermite").and_then(|k| k.parse::<usize>().ok()) {
                Some(order) => Transform::Hermite { order },
                None => return Err(Error::Parse(format!("unknown transform '{s}'"))),
            },
        };
        Ok(t)
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Zero => write!(f, "zero"),
            Transform::Identity => write!(f, "identity"),
            Transform::Square => write!(f, "square"),
            Transform::Cube => write!(f, "cube"),
            Transform::Sign => write!(f, "sign"),
            Transform::Sin { scale } => write!(f, "sin:{scale}"),
            Transform::Indicator { threshold } => write!(f, "indicator:{threshold}"),
            Transform::ProbitUniform => write!(f, "probit_uniform"),
            Transform::Exp => write!(f, "exp"),
            Transform::Hermite { order } => write!(f, "hermite:{order}"),
            Transform::Piecewise(t) => write!(f, "piecewise[{} knots]", t.xs.len()),
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_catalog() {
        assert_eq!("identity".parse::<Transform>().unwrap(), Transform::Identity);
        assert_eq!("sin:2".parse::<Transform>().unwrap(), Transform::Sin { scale: 2.0 });
        assert_eq!("sin".parse::<Transform>().unwrap(), Transform::Sin { scale: 1.0 });
        assert_eq!(
            "indicator:0.5".parse::<Transform>().unwrap(),
            Transform::Indicator { threshold: 0.5 }
        );
        assert_eq!("hermite2".parse::<Transform>().unwrap(), Transform::Hermite { order: 2 });
        assert_eq!("hermite:3".parse::<Transform>().unwrap(), Transform::Hermite { order: 3 });
        assert_eq!("probit-uniform".parse::<Transform>().unwrap(), Transform::ProbitUniform);
        assert!("hermite".parse::<Transform>().is_err());
        assert!("bogus".parse::<Transform>().is_err());
        for t in ["square", "cube", "exp", "zero", "sign", "hermite:4", "sin:0.5"] {
            let parsed: Transform = t.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<Transform>().unwrap(), parsed);
        }
    }

    #[test]
    fn evaluation() {
        assert_eq!(Transform::Sign.eval(-3.0), -1.0);
        assert_eq!(Transform::Indicator { threshold: 1.0 }.eval(1.5), 1.0);
        assert_eq!(Transform::Indicator { threshold: 1.0 }.eval(0.5), 0.0);
        assert!((Transform::ProbitUniform.eval(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!(Transform::Hermite { order: 2 }.eval(1.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_table() {
        let t = PiecewiseLinear::from_csv("x,y\n0,0\n1,2\n2,2\n").unwrap();
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(1.5), 2.0);
        assert_eq!(t.eval(9.0), 2.0);
        assert!(Transform::Piecewise(t).is_monotone());
        assert!(PiecewiseLinear::from_csv("0,0\n").is_err());
        assert!(PiecewiseLinear::from_csv("0,0\n0,1\n").is_err());
        assert!(PiecewiseLinear::from_csv("0,0\na,1\n").is_err());
    }
}
