//! Likelihood heads for count demand: negative log-likelihoods with
//! analytic gradients, parameter links, means, equal-tailed intervals and
//! samplers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal as NormalSampler, Poisson as PoissonSampler};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
use statrs::function::erf::erfc;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Distribution parameters. Families of arity 1 ignore the second slot.
pub type Theta = [f64; 2];

/// Added to every softplus-linked parameter so a very negative raw output
/// never produces an exactly-zero scale or rate.
pub const POSITIVE_FLOOR: f64 = 1e-9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistFamily {
    /// `(mu, sigma)`.
    Normal,
    /// `(mu, sigma)` of the parent normal, truncated to `[0, inf)`.
    #[serde(rename = "tnormal")]
    TruncatedNormal,
    /// `(lambda)`.
    Poisson,
    /// `(pi, lambda)`: structural-zero probability and Poisson rate.
    #[serde(rename = "zpoisson")]
    ZeroInflatedPoisson,
    /// `(mean, size)`, variance `mean + mean^2 / size`.
    #[serde(rename = "nb")]
    NegativeBinomial,
}

pub const ALL_FAMILIES: [DistFamily; 5] = [
    DistFamily::Normal,
    DistFamily::TruncatedNormal,
    DistFamily::Poisson,
    DistFamily::ZeroInflatedPoisson,
    DistFamily::NegativeBinomial,
];

impl fmt::Display for DistFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistFamily::Normal => "normal",
            DistFamily::TruncatedNormal => "tnormal",
            DistFamily::Poisson => "poisson",
            DistFamily::ZeroInflatedPoisson => "zpoisson",
            DistFamily::NegativeBinomial => "nb",
        })
    }
}

impl FromStr for DistFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(DistFamily::Normal),
            "tnormal" | "truncatednormal" | "tnorm" => Ok(DistFamily::TruncatedNormal),
            "poisson" => Ok(DistFamily::Poisson),
            "zpoisson" | "zip" => Ok(DistFamily::ZeroInflatedPoisson),
            "nb" | "negbin" | "negativebinomial" => Ok(DistFamily::NegativeBinomial),
            other => Err(Error::Format(format!("unknown distribution family `{other}`"))),
        }
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln_phi(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// `ln Phi(z)`, accurate far into the lower tail.
fn ln_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic series of the Mills ratio.
        let z2 = z * z;
        ln_phi(z) - (-z).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// `phi(z) / Phi(z)`.
fn inverse_mills(z: f64) -> f64 {
    (ln_phi(z) - ln_norm_cdf(z)).exp()
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn norm_quantile(p: f64) -> f64 {
    StdNormal::standard().inverse_cdf(p)
}

fn is_count(y: f64) -> bool {
    y >= 0.0 && y.fract() == 0.0 && y.is_finite()
}

fn poisson_ln_pmf(k: f64, lambda: f64) -> f64 {
    k * lambda.ln() - lambda - ln_gamma(k + 1.0)
}

impl DistFamily {
    pub fn arity(self) -> usize {
        match self {
            DistFamily::Poisson => 1,
            _ => 2,
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, DistFamily::Poisson | DistFamily::ZeroInflatedPoisson | DistFamily::NegativeBinomial)
    }

    /// Maps unconstrained head outputs to in-domain parameters: identity for
    /// locations, softplus for positive parameters, sigmoid for `pi`.
    pub fn link(self, raw: &[f64]) -> Theta {
        let pos = |x: f64| softplus(x) + POSITIVE_FLOOR;
        match self {
            DistFamily::Normal | DistFamily::TruncatedNormal => [raw[0], pos(raw[1])],
            DistFamily::Poisson => [pos(raw[0]), 0.0],
            DistFamily::ZeroInflatedPoisson => [sigmoid(raw[0]), pos(raw[1])],
            DistFamily::NegativeBinomial => [pos(raw[0]), pos(raw[1])],
        }
    }

    /// Derivative of each linked parameter with respect to its raw output.
    pub fn link_derivative(self, raw: &[f64]) -> Theta {
        match self {
            DistFamily::Normal | DistFamily::TruncatedNormal => [1.0, sigmoid(raw[1])],
            DistFamily::Poisson => [sigmoid(raw[0]), 0.0],
            DistFamily::ZeroInflatedPoisson => {
                let s = sigmoid(raw[0]);
                [s * (1.0 - s), sigmoid(raw[1])]
            }
            DistFamily::NegativeBinomial => [sigmoid(raw[0]), sigmoid(raw[1])],
        }
    }

    /// Inverse of [`Self::link`], used to initialize biases.
    pub fn unlink(self, theta: Theta) -> [f64; 2] {
        let inv_pos = |v: f64| {
            let v = (v - POSITIVE_FLOOR).max(1e-12);
            if v > 30.0 { v } else { v.exp_m1().ln() }
        };
        match self {
            DistFamily::Normal | DistFamily::TruncatedNormal => [theta[0], inv_pos(theta[1])],
            DistFamily::Poisson => [inv_pos(theta[0]), 0.0],
            DistFamily::ZeroInflatedPoisson => {
                let p = theta[0].clamp(1e-12, 1.0 - 1e-12);
                [(p / (1.0 - p)).ln(), inv_pos(theta[1])]
            }
            DistFamily::NegativeBinomial => [inv_pos(theta[0]), inv_pos(theta[1])],
        }
    }

    pub fn validate(self, theta: &Theta) -> Result<()> {
        let ok = match self {
            DistFamily::Normal | DistFamily::TruncatedNormal => theta[0].is_finite() && theta[1] > 0.0 && theta[1].is_finite(),
            DistFamily::Poisson => theta[0] > 0.0 && theta[0].is_finite(),
            DistFamily::ZeroInflatedPoisson => (0.0..=1.0).contains(&theta[0]) && theta[1] > 0.0 && theta[1].is_finite(),
            DistFamily::NegativeBinomial => {
                theta[0] > 0.0 && theta[1] > 0.0 && theta[0].is_finite() && theta[1].is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("parameters {theta:?} outside the {self} domain")))
        }
    }

    fn check_support(self, y: f64) -> Result<()> {
        let ok = match self {
            DistFamily::Normal => y.is_finite(),
            DistFamily::TruncatedNormal => y.is_finite() && y >= 0.0,
            _ => is_count(y),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{y} is outside the {self} support")))
        }
    }

    /// Negative log density (continuous families) or mass (count families).
    pub fn nll(self, theta: &Theta, y: f64) -> Result<f64> {
        self.nll_with_grad(theta, y).map(|(v, _)| v)
    }

    /// NLL together with its gradient with respect to `theta`.
    pub fn nll_with_grad(self, theta: &Theta, y: f64) -> Result<(f64, Theta)> {
        self.validate(theta)?;
        self.check_support(y)?;
        Ok(match self {
            DistFamily::Normal => {
                let (mu, s) = (theta[0], theta[1]);
                let r = y - mu;
                let v = LN_SQRT_2PI + s.ln() + r * r / (2.0 * s * s);
                (v, [-r / (s * s), 1.0 / s - r * r / (s * s * s)])
            }
            DistFamily::TruncatedNormal => {
                let (mu, s) = (theta[0], theta[1]);
                let r = y - mu;
                let z0 = mu / s;
                let mills = inverse_mills(z0);
                let v = LN_SQRT_2PI + s.ln() + r * r / (2.0 * s * s) + ln_norm_cdf(z0);
                let dmu = -r / (s * s) + mills / s;
                let ds = 1.0 / s - r * r / (s * s * s) - mills * mu / (s * s);
                (v, [dmu, ds])
            }
            DistFamily::Poisson => {
                let lambda = theta[0];
                (-poisson_ln_pmf(y, lambda), [1.0 - y / lambda, 0.0])
            }
            DistFamily::ZeroInflatedPoisson => {
                let (p, lambda) = (theta[0], theta[1]);
                if y == 0.0 {
                    let e = (-lambda).exp();
                    let p0 = p + (1.0 - p) * e;
                    (-p0.ln(), [-(1.0 - e) / p0, (1.0 - p) * e / p0])
                } else {
                    let v = -(1.0 - p).ln() - poisson_ln_pmf(y, lambda);
                    (v, [1.0 / (1.0 - p), 1.0 - y / lambda])
                }
            }
            DistFamily::NegativeBinomial => {
                let (m, r) = (theta[0], theta[1]);
                let lp = ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) + r * (r / (r + m)).ln()
                    + if y > 0.0 { y * (m / (r + m)).ln() } else { 0.0 };
                let dm = (r + y) / (r + m) - y / m;
                let dr = -(digamma(y + r) - digamma(r) + r.ln() - (r + m).ln() + (m - y) / (r + m));
                (-lp, [dm, dr])
            }
        })
    }

    /// NLL and its gradient with respect to the raw (pre-link) outputs.
    pub fn nll_raw(self, raw: &[f64], y: f64) -> Result<(f64, [f64; 2])> {
        let theta = self.link(raw);
        let (v, g) = self.nll_with_grad(&theta, y)?;
        let d = self.link_derivative(raw);
        Ok((v, [g[0] * d[0], g[1] * d[1]]))
    }

    pub fn mean(self, theta: &Theta) -> f64 {
        match self {
            DistFamily::Normal => theta[0],
            DistFamily::TruncatedNormal => theta[0] + theta[1] * inverse_mills(theta[0] / theta[1]),
            DistFamily::Poisson => theta[0],
            DistFamily::ZeroInflatedPoisson => (1.0 - theta[0]) * theta[1],
            DistFamily::NegativeBinomial => theta[0],
        }
    }

    pub fn variance(self, theta: &Theta) -> f64 {
        match self {
            DistFamily::Normal => theta[1] * theta[1],
            DistFamily::TruncatedNormal => {
                let (mu, s) = (theta[0], theta[1]);
                let a = -mu / s;
                let l = inverse_mills(mu / s);
                s * s * (1.0 + a * l - l * l)
            }
            DistFamily::Poisson => theta[0],
            DistFamily::ZeroInflatedPoisson => {
                let (p, l) = (theta[0], theta[1]);
                (1.0 - p) * l * (1.0 + p * l)
            }
            DistFamily::NegativeBinomial => theta[0] + theta[0] * theta[0] / theta[1],
        }
    }

    /// Probability mass at `k` for count families.
    pub fn pmf(self, theta: &Theta, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            DistFamily::Poisson => poisson_ln_pmf(kf, theta[0]).exp(),
            DistFamily::ZeroInflatedPoisson => {
                let base = (1.0 - theta[0]) * poisson_ln_pmf(kf, theta[1]).exp();
                if k == 0 { theta[0] + base } else { base }
            }
            DistFamily::NegativeBinomial => {
                let (m, r) = (theta[0], theta[1]);
                (ln_gamma(kf + r) - ln_gamma(r) - ln_gamma(kf + 1.0) + r * (r / (r + m)).ln()
                    + kf * (m / (r + m)).ln())
                .exp()
            }
            _ => f64::NAN,
        }
    }

    /// CDF of continuous families.
    pub fn cdf(self, theta: &Theta, x: f64) -> f64 {
        match self {
            DistFamily::Normal => norm_cdf((x - theta[0]) / theta[1]),
            DistFamily::TruncatedNormal => {
                if x <= 0.0 {
                    return 0.0;
                }
                let (mu, s) = (theta[0], theta[1]);
                let lo = norm_cdf(-mu / s);
                (norm_cdf((x - mu) / s) - lo) / (1.0 - lo)
            }
            _ => {
                let mut acc = 0.0;
                for k in 0..=(x.max(0.0).floor() as u64) {
                    acc += self.pmf(theta, k);
                }
                acc
            }
        }
    }

    /// Smallest support point whose CDF reaches `p`.
    pub fn quantile(self, theta: &Theta, p: f64) -> f64 {
        match self {
            DistFamily::Normal => theta[0] + theta[1] * norm_quantile(p),
            DistFamily::TruncatedNormal => {
                let (mu, s) = (theta[0], theta[1]);
                let lo = norm_cdf(-mu / s);
                (mu + s * norm_quantile(lo + p * (1.0 - lo))).max(0.0)
            }
            _ => self.count_quantiles(theta, &[p])[0],
        }
    }

    /// One pass of CDF summation answering several ascending levels.
    fn count_quantiles(self, theta: &Theta, levels: &[f64]) -> Vec<f64> {
        let mean = self.mean(theta);
        let sd = self.variance(theta).sqrt();
        let cap = (mean + 60.0 * sd + 100.0).ceil() as u64;
        let mut out = Vec::with_capacity(levels.len());
        let mut acc = 0.0;
        let mut k = 0u64;
        let mut next = 0;
        while next < levels.len() {
            acc += self.pmf(theta, k);
            while next < levels.len() && acc >= levels[next] {
                out.push(k as f64);
                next += 1;
            }
            if k >= cap {
                // Remaining levels sit in floating-point residue of the tail.
                while out.len() < levels.len() {
                    out.push(k as f64);
                }
                break;
            }
            k += 1;
        }
        out
    }

    /// Equal-tailed `pi`-percent interval: the smallest support points whose
    /// CDF reaches `(1 - pi)/2` and `1 - (1 - pi)/2`.
    pub fn interval(self, theta: &Theta, pi_percent: f64) -> Result<(f64, f64)> {
        self.validate(theta)?;
        if !(pi_percent > 0.0 && pi_percent < 100.0) {
            return Err(Error::Domain(format!("interval percentage {pi_percent} outside (0, 100)")));
        }
        let tail = (1.0 - pi_percent / 100.0) / 2.0;
        let levels = [tail, 1.0 - tail];
        if self.is_discrete() {
            let q = self.count_quantiles(theta, &levels);
            Ok((q[0], q[1]))
        } else {
            Ok((self.quantile(theta, levels[0]), self.quantile(theta, levels[1])))
        }
    }

    /// Draws one observation. The truncated normal uses rejection from its
    /// parent, independent of [`Self::quantile`].
    pub fn sample<R: Rng + ?Sized>(self, theta: &Theta, rng: &mut R) -> f64 {
        match self {
            DistFamily::Normal => NormalSampler::new(theta[0], theta[1]).expect("valid sigma").sample(rng),
            DistFamily::TruncatedNormal => {
                let parent = NormalSampler::new(theta[0], theta[1]).expect("valid sigma");
                loop {
                    let x: f64 = parent.sample(rng);
                    if x >= 0.0 {
                        return x;
                    }
                }
            }
            DistFamily::Poisson => sample_poisson(theta[0], rng),
            DistFamily::ZeroInflatedPoisson => {
                if rng.random::<f64>() < theta[0] {
                    0.0
                } else {
                    sample_poisson(theta[1], rng)
                }
            }
            DistFamily::NegativeBinomial => {
                let (m, r) = (theta[0], theta[1]);
                let rate: f64 = Gamma::new(r, m / r).expect("valid gamma").sample(rng);
                sample_poisson(rate, rng)
            }
        }
    }
}

pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    PoissonSampler::new(lambda).expect("positive rate").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn poisson_examples() {
        assert_relative_eq!(DistFamily::Poisson.nll(&[1.0, 0.0], 0.0).unwrap(), 1.0, epsilon = 1e-14);
        // Direct pmf: P(2; 2) = e^-2 * 2^2 / 2! = 2 e^-2.
        let direct = -(2.0 * (-2.0f64).exp()).ln();
        let v = DistFamily::Poisson.nll(&[2.0, 0.0], 2.0).unwrap();
        assert_relative_eq!(v, direct, epsilon = 1e-12);
        assert_relative_eq!(v, 1.306_85, epsilon = 1e-5);
    }

    #[test]
    fn zip_with_no_inflation_is_poisson() {
        for (lambda, y) in [(0.3, 0.0), (2.5, 4.0), (7.0, 1.0)] {
            let a = DistFamily::ZeroInflatedPoisson.nll(&[0.0, lambda], y).unwrap();
            let b = DistFamily::Poisson.nll(&[lambda, 0.0], y).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(DistFamily::Poisson.nll(&[1.0, 0.0], -1.0), Err(Error::Domain(_))));
        assert!(matches!(DistFamily::Poisson.nll(&[1.0, 0.0], 1.5), Err(Error::Domain(_))));
        assert!(matches!(DistFamily::TruncatedNormal.nll(&[1.0, 1.0], -0.1), Err(Error::Domain(_))));
        assert!(matches!(DistFamily::Normal.nll(&[1.0, 0.0], 1.0), Err(Error::Domain(_))));
        assert!(DistFamily::ZeroInflatedPoisson.validate(&[1.2, 1.0]).is_err());
        assert!(DistFamily::Poisson.interval(&[1.0, 0.0], 100.0).is_err());
    }

    #[test]
    fn poisson_interval_example() {
        assert_eq!(DistFamily::Poisson.interval(&[4.0, 0.0], 95.0).unwrap(), (1.0, 8.0));
    }

    #[test]
    fn normal_interval_example() {
        let (lo, hi) = DistFamily::Normal.interval(&[0.0, 1.0], 95.0).unwrap();
        assert!((lo + 1.96).abs() < 1e-3 && (hi - 1.96).abs() < 1e-3, "{lo} {hi}");
    }

    #[test]
    fn vanishing_interval_collapses_to_median() {
        let (lo, hi) = DistFamily::Poisson.interval(&[4.0, 0.0], 1e-6).unwrap();
        assert_eq!((lo, hi), (4.0, 4.0));
        let (lo, hi) = DistFamily::Normal.interval(&[3.0, 2.0], 1e-6).unwrap();
        assert!((lo - 3.0).abs() < 1e-6 && (hi - 3.0).abs() < 1e-6);
    }

    #[test]
    fn truncated_normal_reduces_to_normal_far_from_zero() {
        let theta = [50.0, 2.0];
        let a = DistFamily::TruncatedNormal.nll(&theta, 49.0).unwrap();
        let b = DistFamily::Normal.nll(&theta, 49.0).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
        assert_relative_eq!(DistFamily::TruncatedNormal.mean(&theta), 50.0, epsilon = 1e-9);
    }

    #[test]
    fn truncated_normal_deep_tail_is_finite() {
        let (v, g) = DistFamily::TruncatedNormal.nll_with_grad(&[-40.0, 1.0], 0.5).unwrap();
        assert!(v.is_finite() && g[0].is_finite() && g[1].is_finite());
    }

    #[test]
    fn links_respect_domains() {
        for f in ALL_FAMILIES {
            for raw in [[-800.0, -800.0], [0.0, 0.0], [50.0, 50.0]] {
                f.validate(&f.link(&raw)).unwrap();
            }
        }
    }

    #[test]
    fn unlink_inverts_link() {
        for f in ALL_FAMILIES {
            let theta = f.link(&[0.7, -0.4]);
            let back = f.link(&f.unlink(theta));
            assert_relative_eq!(theta[0], back[0], epsilon = 1e-9);
            assert_relative_eq!(theta[1], back[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in ALL_FAMILIES {
            assert_eq!(f.to_string().parse::<DistFamily>().unwrap(), f);
        }
        assert!("gauss".parse::<DistFamily>().is_err());
    }
}
