//! Jump-size laws for the compound Poisson driver.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::quadrature::normal_nodes;

/// What the driver and the condition checker need from a jump-size law.
pub trait JumpLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
    fn mean(&self) -> f64;
    fn second_moment(&self) -> f64;
    /// `E[e^{iuZ}]`.
    fn char_function(&self, u: f64) -> Complex64;
    /// Probability-weighted nodes `(z_k, w_k)` with `Σ w_k = 1` for `E f(Z)`.
    fn quadrature_nodes(&self, n: usize) -> Vec<(f64, f64)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpDist {
    /// Normal with mean and variance (not standard deviation).
    Normal { mean: f64, var: f64 },
    /// Point mass.
    Degenerate(f64),
}

impl JumpDist {
    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() || !var.is_finite() || var < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "normal({mean}, {var}) needs finite mean and non-negative variance"
            )));
        }
        if var == 0.0 {
            return Ok(JumpDist::Degenerate(mean));
        }
        Ok(JumpDist::Normal { mean, var })
    }

    /// Same law with variance multiplied by `factor` (point masses unchanged).
    pub fn scale_variance(self, factor: f64) -> Self {
        match self {
            JumpDist::Normal { mean, var } => JumpDist::Normal {
                mean,
                var: var * factor,
            },
            d => d,
        }
    }
}

impl JumpLaw for JumpDist {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpDist::Normal { mean, var } => Normal::new(mean, var.sqrt())
                .expect("validated at construction")
                .sample(rng),
            JumpDist::Degenerate(c) => c,
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            JumpDist::Normal { mean, .. } => mean,
            JumpDist::Degenerate(c) => c,
        }
    }

    fn second_moment(&self) -> f64 {
        match *self {
            JumpDist::Normal { mean, var } => var + mean * mean,
            JumpDist::Degenerate(c) => c * c,
        }
    }

    fn char_function(&self, u: f64) -> Complex64 {
        match *self {
            JumpDist::Normal { mean, var } => Complex64::new(-0.5 * u * u * var, u * mean).exp(),
            JumpDist::Degenerate(c) => Complex64::new(0.0, u * c).exp(),
        }
    }

    fn quadrature_nodes(&self, n: usize) -> Vec<(f64, f64)> {
        match *self {
            JumpDist::Normal { mean, var } => normal_nodes(mean, var, n),
            JumpDist::Degenerate(c) => vec![(c, 1.0)],
        }
    }
}

impl fmt::Display for JumpDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpDist::Normal { mean, var } => write!(f, "normal({mean},{var})"),
            JumpDist::Degenerate(c) => write!(f, "point({c})"),
        }
    }
}

/// Parses `normal(mu, sigma2)` or `point(c)`.
impl FromStr for JumpDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse jump distribution {s:?}"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (name.as_str(), args.as_slice()) {
            ("normal", [mu, sigma2]) => JumpDist::normal(*mu, *sigma2),
            ("point", [c]) if c.is_finite() => Ok(JumpDist::Degenerate(*c)),
            _ => Err(bad()),
        }
    }
}
