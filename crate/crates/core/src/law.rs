//! Registry of continuous input laws.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Uniform};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Exp as SExp, Gamma as SGamma, Normal as SNormal};

use crate::error::{Error, Result};

/// A named distribution with a density on `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum InputLaw {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl InputLaw {
    pub const STANDARD_GAUSSIAN: InputLaw = InputLaw::Gaussian { mean: 0.0, sd: 1.0 };
    pub const UNIT_UNIFORM: InputLaw = InputLaw::Uniform { low: 0.0, high: 1.0 };
    pub const UNIT_EXPONENTIAL: InputLaw = InputLaw::Exponential { rate: 1.0 };

    pub fn validate(self) -> Result<Self> {
        let ok = match self {
            InputLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            InputLaw::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            InputLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
            InputLaw::Gamma { shape, scale } => {
                shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::UnsupportedLaw(format!("invalid parameters: {self}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InputLaw::Uniform { low, high } => Uniform::new(low, high).unwrap().sample(rng),
            InputLaw::Gaussian { mean, sd } => Normal::new(mean, sd).unwrap().sample(rng),
            InputLaw::Exponential { rate } => Exp::new(rate).unwrap().sample(rng),
            InputLaw::Gamma { shape, scale } => Gamma::new(shape, scale).unwrap().sample(rng),
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InputLaw::Uniform { low, high } => 0.5 * (low + high),
            InputLaw::Gaussian { mean, .. } => mean,
            InputLaw::Exponential { rate } => 1.0 / rate,
            InputLaw::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            InputLaw::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            InputLaw::Gaussian { mean, sd } => SNormal::new(mean, sd).unwrap().cdf(x),
            InputLaw::Exponential { rate } => SExp::new(rate).unwrap().cdf(x),
            InputLaw::Gamma { shape, scale } => SGamma::new(shape, 1.0 / scale).unwrap().cdf(x),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, InputLaw::Uniform { .. })
    }
}

impl fmt::Display for InputLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InputLaw::Uniform { low, high } => write!(f, "uniform({low},{high})"),
            InputLaw::Gaussian { mean, sd } => write!(f, "gaussian({mean},{sd})"),
            InputLaw::Exponential { rate } => write!(f, "exponential({rate})"),
            InputLaw::Gamma { shape, scale } => write!(f, "gamma({shape},{scale})"),
        }
    }
}

impl FromStr for InputLaw {
    type Err = Error;

    /// Accepts `name` or `name(a,b)`, e.g. `gaussian`, `exp(2)`, `uniform(-1,1)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], &s[open + 1..s.len() - 1]),
            Some(_) => return Err(Error::UnsupportedLaw(s.to_string())),
            None => (s, ""),
        };
        let args: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::UnsupportedLaw(s.to_string()))?
        };
        let arg = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
        let law = match (name.trim().to_ascii_lowercase().as_str(), args.len()) {
            ("uniform", 0 | 2) => InputLaw::Uniform { low: arg(0, 0.0), high: arg(1, 1.0) },
            ("gaussian" | "normal", 0 | 2) => InputLaw::Gaussian { mean: arg(0, 0.0), sd: arg(1, 1.0) },
            ("exponential" | "exp", 0 | 1) => InputLaw::Exponential { rate: arg(0, 1.0) },
            ("gamma", 1 | 2) => InputLaw::Gamma { shape: arg(0, 1.0), scale: arg(1, 1.0) },
            _ => return Err(Error::UnsupportedLaw(s.to_string())),
        };
        law.validate()
    }
}
