//! Priors over agent types and their H-segment discretization.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::{rng, Error, Result};

/// An i.i.d. prior over agent types with support `[lo, hi]`, `lo >= 0`.
///
/// The string form follows the table notation: `U(0,1)` is uniform on
/// `[0,1]`; `N(0.5,0.2)` is a normal with mean 0.5 and standard deviation 0.2
/// conditioned on `[0,1]`. The four-argument form `N(mu,sigma,lo,hi)` sets
/// the truncation interval explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DistributionSpec {
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mu: f64, sigma: f64, lo: f64, hi: f64 },
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

impl DistributionSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::Uniform { lo, hi }.validated()
    }

    pub fn truncated_normal(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::TruncatedNormal { mu, sigma, lo, hi }.validated()
    }

    /// The three priors used in the comparison table.
    pub fn table_priors() -> [DistributionSpec; 3] {
        [
            Self::Uniform { lo: 0.0, hi: 1.0 },
            Self::TruncatedNormal { mu: 0.5, sigma: 0.2, lo: 0.0, hi: 1.0 },
            Self::TruncatedNormal { mu: 0.5, sigma: 0.4, lo: 0.0, hi: 1.0 },
        ]
    }

    fn validated(self) -> Result<Self> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(Error::InvalidDistribution(format!(
                "support [{lo}, {hi}] must satisfy 0 <= lo < hi"
            )));
        }
        if let Self::TruncatedNormal { mu, sigma, .. } = self {
            if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "normal parameters mu={mu}, sigma={sigma} need finite mu and sigma > 0"
                )));
            }
        }
        Ok(self)
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { lo, hi } | Self::TruncatedNormal { lo, hi, .. } => (lo, hi),
        }
    }

    /// Support upper bound `U`.
    pub fn upper(&self) -> f64 {
        self.support().1
    }

    /// CDF at `x`, rejecting points outside the support.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&x) {
            return Err(Error::OutOfSupport { x, lo, hi });
        }
        Ok(self.cdf_clamped(x))
    }

    /// CDF extended by 0 below and 1 above the support.
    pub(crate) fn cdf_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            Self::Uniform { lo, hi } => (x - lo) / (hi - lo),
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                let a = std_normal_cdf((lo - mu) / sigma);
                let b = std_normal_cdf((hi - mu) / sigma);
                ((std_normal_cdf((x - mu) / sigma) - a) / (b - a)).clamp(0.0, 1.0)
            }
        }
    }

    /// Inverse CDF for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        let x = match *self {
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                let a = std_normal_cdf((lo - mu) / sigma);
                let b = std_normal_cdf((hi - mu) / sigma);
                mu + sigma * std_normal_quantile(a + u * (b - a))
            }
        };
        if x.is_nan() {
            lo
        } else {
            x.clamp(lo, hi)
        }
    }

    /// One inverse-CDF draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `count` i.i.d. draws, reproducible per `(spec, count, seed)`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng::seeded(seed);
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }

    /// Splits `[0, U]` into `h` equal segments with their probability masses.
    pub fn discretize(&self, h: usize) -> Result<SegmentedDistribution> {
        if h == 0 {
            return Err(Error::InvalidArgument("H must be at least 1".into()));
        }
        let upper = self.upper();
        let delta = upper / h as f64;
        let edges: Vec<f64> = (0..=h)
            .map(|i| if i == h { 1.0 } else { self.cdf_clamped(i as f64 * delta) })
            .collect();
        let masses = edges.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
        Ok(SegmentedDistribution {
            h,
            upper,
            delta,
            masses,
        })
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Uniform { lo, hi } => write!(f, "U({lo},{hi})"),
            Self::TruncatedNormal { mu, sigma, lo, hi } if lo == 0.0 && hi == 1.0 => {
                write!(f, "N({mu},{sigma})")
            }
            Self::TruncatedNormal { mu, sigma, lo, hi } => write!(f, "N({mu},{sigma},{lo},{hi})"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || {
            Error::InvalidDistribution(format!(
                "{s:?}; expected U(lo,hi), N(mu,sigma) or N(mu,sigma,lo,hi)"
            ))
        };
        let (kind, rest) = compact.split_at(compact.find('(').ok_or_else(bad)?);
        let args = rest
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?
            .split(',')
            .map(|a| a.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        match (kind.to_ascii_uppercase().as_str(), args.as_slice()) {
            ("U", [lo, hi]) => Self::uniform(*lo, *hi),
            ("N", [mu, sigma]) => Self::truncated_normal(*mu, *sigma, 0.0, 1.0),
            ("N", [mu, sigma, lo, hi]) => Self::truncated_normal(*mu, *sigma, *lo, *hi),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for DistributionSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DistributionSpec> for String {
    fn from(spec: DistributionSpec) -> Self {
        spec.to_string()
    }
}

/// `[0, U]` cut into `h` segments of width `delta`; `masses[i - 1]` is the
/// probability of segment `i`, `[(i - 1) * delta, i * delta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedDistribution {
    pub h: usize,
    pub upper: f64,
    pub delta: f64,
    pub masses: Vec<f64>,
}

impl SegmentedDistribution {
    /// Mass of segment `i`, 1-based.
    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i - 1]
    }
}
