//! Service-time laws with closed-form Laplace–Stieltjes transforms.
//!
//! Everything downstream depends on a service law only through its moments,
//! its transform `B(s) = E[exp(-sX)]`, and the mixed-Poisson weights
//! `r_j = P(j Poisson(λ) arrivals during one service)`. The supported
//! families all have these in closed form, so no quadrature is involved.
//!
//! Config text form is `family:param[,param...]`:
//!
//! ```text
//! exp:1.0            exponential, rate 1
//! erlang:3,2.0       Erlang, shape 3, rate 2
//! hyperexp:0.3|0.7;1.0|4.0
//! det:1.0            deterministic duration
//! ```

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset of the root brackets from the trivial root `z = 1` (and from 0).
pub const ROOT_BRACKET_EPS: f64 = 1e-9;
/// Upper end of the `τ` bracket when the transform is entire.
pub const ENTIRE_TAU_BRACKET: f64 = 64.0;
/// Residual `|z - B(λ - λz)|` accepted at a returned root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 200;
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    Deterministic { value: f64 },
}

/// A validated service-time law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DistributionSpec {
    family: Family,
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {x}")))
    }
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        let rate = positive("rate", rate)?;
        Ok(Self { family: Family::Exponential { rate } })
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        if shape == 0 {
            return Err(Error::domain("Erlang shape must be a positive integer"));
        }
        let rate = positive("rate", rate)?;
        Ok(Self { family: Family::Erlang { shape, rate } })
    }

    pub fn hyperexponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != rates.len() {
            return Err(Error::domain(
                "hyperexponential needs matching, nonempty weight and rate vectors",
            ));
        }
        for &w in &weights {
            if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
                return Err(Error::domain(format!("weight {w} is not a probability")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!("weights sum to {total}, not 1")));
        }
        for &r in &rates {
            positive("rate", r)?;
        }
        Ok(Self { family: Family::HyperExponential { weights, rates } })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        let value = positive("duration", value)?;
        Ok(Self { family: Family::Deterministic { value } })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Smallest rate parameter; the transform diverges at `s = -min_rate`.
    /// `None` when the transform is entire.
    pub fn min_rate(&self) -> Option<f64> {
        match &self.family {
            Family::Exponential { rate } | Family::Erlang { rate, .. } => Some(*rate),
            Family::HyperExponential { rates, .. } => {
                Some(rates.iter().copied().fold(f64::INFINITY, f64::min))
            }
            Family::Deterministic { .. } => None,
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Raw moment `E[X^l]`.
    pub fn moment(&self, l: u32) -> f64 {
        match &self.family {
            Family::Exponential { rate } => factorial(l) / rate.powi(l as i32),
            Family::Erlang { shape, rate } => {
                let rising: f64 = (0..l).map(|i| f64::from(shape + i)).product();
                rising / rate.powi(l as i32)
            }
            Family::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * factorial(l) / r.powi(l as i32))
                .sum(),
            Family::Deterministic { value } => value.powi(l as i32),
        }
    }

    /// `λ^l E[X^l]`; with `l = 1` this is the traffic intensity.
    pub fn scaled_moment(&self, lambda: f64, l: u32) -> Result<f64> {
        positive("arrival rate", lambda)?;
        if l == 0 {
            return Err(Error::domain("moment order must be at least 1"));
        }
        Ok(lambda.powi(l as i32) * self.moment(l))
    }

    pub fn traffic_intensity(&self, lambda: f64) -> Result<f64> {
        self.scaled_moment(lambda, 1)
    }

    /// `E[X^2] / E[X]^2`, i.e. the second scaled moment of this family once
    /// rescaled to unit traffic intensity.
    pub fn normalized_second_moment(&self) -> f64 {
        self.moment(2) / self.mean().powi(2)
    }

    /// The same family shape rescaled to the given mean.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        let mean = positive("mean", mean)?;
        let factor = self.mean() / mean;
        match &self.family {
            Family::Exponential { rate } => Self::exponential(rate * factor),
            Family::Erlang { shape, rate } => Self::erlang(*shape, rate * factor),
            Family::HyperExponential { weights, rates } => Self::hyperexponential(
                weights.clone(),
                rates.iter().map(|r| r * factor).collect(),
            ),
            Family::Deterministic { .. } => Self::deterministic(mean),
        }
    }

    fn check_transform_arg(&self, s: f64) -> Result<()> {
        if s.is_nan() {
            return Err(Error::domain("transform argument is NaN"));
        }
        if let Some(m) = self.min_rate() {
            if s <= -m {
                return Err(Error::domain(format!(
                    "transform argument {s} at or beyond the divergence boundary {}",
                    -m
                )));
            }
        }
        Ok(())
    }

    /// Laplace–Stieltjes transform `E[exp(-sX)]`.
    pub fn lst(&self, s: f64) -> Result<f64> {
        self.check_transform_arg(s)?;
        let v = match &self.family {
            Family::Exponential { rate } => rate / (rate + s),
            Family::Erlang { shape, rate } => (rate / (rate + s)).powi(*shape as i32),
            Family::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * r / (r + s)).sum()
            }
            Family::Deterministic { value } => (-s * value).exp(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!("transform overflows at s = {s}")))
        }
    }

    /// Derivative of the transform, `-E[X exp(-sX)]`.
    pub fn lst_derivative(&self, s: f64) -> Result<f64> {
        self.check_transform_arg(s)?;
        let v = match &self.family {
            Family::Exponential { rate } => -rate / (rate + s).powi(2),
            Family::Erlang { shape, rate } => {
                -(f64::from(*shape) / (rate + s)) * (rate / (rate + s)).powi(*shape as i32)
            }
            Family::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| -w * r / (r + s).powi(2))
                .sum(),
            Family::Deterministic { value } => -value * (-s * value).exp(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!("transform derivative overflows at s = {s}")))
        }
    }

    /// Mixed-Poisson weights `r_0..r_{n_max}` plus the remaining tail mass.
    pub fn poisson_weights(&self, lambda: f64, n_max: usize) -> Result<MixedPoissonWeights> {
        positive("arrival rate", lambda)?;
        if n_max < 1 {
            return Err(Error::domain("n_max must be at least 1"));
        }
        let (weights, tail_mass) = match &self.family {
            Family::Exponential { rate } => {
                let (head, tail) = geometric_weights(*rate, lambda, n_max);
                (head, tail)
            }
            Family::HyperExponential { weights: mix, rates } => {
                let mut head = vec![0.0; n_max + 1];
                let mut tail = 0.0;
                for (w, r) in mix.iter().zip(rates) {
                    let (h, t) = geometric_weights(*r, lambda, n_max);
                    for (acc, x) in head.iter_mut().zip(h) {
                        *acc += w * x;
                    }
                    tail += w * t;
                }
                (head, tail)
            }
            Family::Erlang { shape, rate } => {
                let p = rate / (rate + lambda);
                let q = lambda / (rate + lambda);
                let k = f64::from(*shape);
                series_weights(p.powi(*shape as i32), n_max, |j, prev| {
                    prev * (k + j as f64 - 1.0) / j as f64 * q
                })
            }
            Family::Deterministic { value } => {
                let a = lambda * value;
                // log space: exp(-a) underflows long before the pmf is negligible
                let ln_a = a.ln();
                let mut ln_r = -a;
                series_weights((-a).exp(), n_max, move |j, _| {
                    ln_r += ln_a - (j as f64).ln();
                    ln_r.exp()
                })
            }
        };
        MixedPoissonWeights::new(lambda, weights, tail_mass)
    }

    fn fixed_point_gap(&self, lambda: f64, z: f64) -> Result<f64> {
        Ok(self.lst(lambda - lambda * z)? - z)
    }

    /// Root `φ ∈ (0, 1)` of `z = B(λ - λz)`; exists only when `ρ > 1`.
    pub fn root_phi(&self, lambda: f64) -> Result<f64> {
        let rho = self.traffic_intensity(lambda)?;
        if rho <= 1.0 {
            return Err(Error::Regime(format!(
                "root in (0,1) requires traffic intensity > 1, got {rho}"
            )));
        }
        let (lo, hi) = (ROOT_BRACKET_EPS, 1.0 - ROOT_BRACKET_EPS);
        let (f_lo, f_hi) = (self.fixed_point_gap(lambda, lo)?, self.fixed_point_gap(lambda, hi)?);
        if !(f_lo > 0.0 && f_hi < 0.0) {
            return Err(Error::Convergence(format!(
                "no sign change on [{lo}, {hi}]: f = ({f_lo:e}, {f_hi:e})"
            )));
        }
        bisect(|z| self.fixed_point_gap(lambda, z), lo, hi)
    }

    /// Root `τ > 1` of `z = B(λ - λz)` for `ρ < 1`, when one exists inside
    /// the transform's domain.
    pub fn root_tau(&self, lambda: f64) -> Result<f64> {
        let rho = self.traffic_intensity(lambda)?;
        if rho >= 1.0 {
            return Err(Error::Regime(format!(
                "root above 1 requires traffic intensity < 1, got {rho}"
            )));
        }
        let lo = 1.0 + ROOT_BRACKET_EPS;
        let hi = match self.min_rate() {
            Some(m) => 1.0 + 0.999 * m / lambda,
            None => ENTIRE_TAU_BRACKET,
        };
        let f_lo = self.fixed_point_gap(lambda, lo)?;
        let f_hi = self.fixed_point_gap(lambda, hi)?;
        if !(f_lo < 0.0 && f_hi > 0.0) {
            return Err(Error::Existence(format!(
                "no root of z = B(λ-λz) on [{lo}, {hi}]: f = ({f_lo:e}, {f_hi:e})"
            )));
        }
        bisect(|z| self.fixed_point_gap(lambda, z), lo, hi)
    }

    /// Draws one service duration.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            Family::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            Family::Erlang { shape, rate } => {
                (0..*shape).map(|_| rng.sample::<f64, _>(Exp1)).sum::<f64>() / rate
            }
            Family::HyperExponential { weights, rates } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = rates.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                rng.sample::<f64, _>(Exp1) / rates[pick]
            }
            Family::Deterministic { value } => *value,
        }
    }
}

fn factorial(l: u32) -> f64 {
    (1..=l).map(f64::from).product()
}

fn geometric_weights(rate: f64, lambda: f64, n_max: usize) -> (Vec<f64>, f64) {
    let p = rate / (rate + lambda);
    let q = lambda / (rate + lambda);
    let mut head = Vec::with_capacity(n_max + 1);
    let mut qj = 1.0;
    for _ in 0..=n_max {
        head.push(p * qj);
        qj *= q;
    }
    (head, qj)
}

/// Head `r_0..r_{n_max}` from a term recurrence, plus the tail mass. When the
/// tail is small, `1 - Σ head` is pure rounding noise, so the tail is summed
/// explicitly from the continuation of the recurrence instead.
fn series_weights(
    r0: f64,
    n_max: usize,
    mut next: impl FnMut(usize, f64) -> f64,
) -> (Vec<f64>, f64) {
    let mut head = Vec::with_capacity(n_max + 1);
    head.push(r0);
    let mut prev = r0;
    for j in 1..=n_max {
        prev = next(j, prev);
        head.push(prev);
    }
    let remainder = 1.0 - head.iter().sum::<f64>();
    if remainder > 1e-6 {
        return (head, remainder);
    }
    let mut tail = 0.0;
    let mut last = prev;
    for j in n_max + 1..n_max + 1_000_000 {
        let term = next(j, prev);
        prev = term;
        tail += term;
        let shrinking = term <= last;
        last = term;
        if term == 0.0 || (shrinking && term < 1e-18 * tail) {
            return (head, tail);
        }
    }
    (head, remainder.max(0.0))
}

fn bisect(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let (z, residual) = if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    if residual.abs() < ROOT_RESIDUAL_TOL {
        Ok(z)
    } else {
        Err(Error::Convergence(format!(
            "bisection stalled on [{lo}, {hi}] with residual {residual:e}"
        )))
    }
}

/// Probabilities `r_j` of `j` Poisson arrivals during one service.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPoissonWeights {
    lambda: f64,
    weights: Vec<f64>,
    tail_mass: f64,
}

impl MixedPoissonWeights {
    pub fn new(lambda: f64, weights: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::domain("need at least r_0 and r_1"));
        }
        if weights.iter().any(|r| !(0.0..=1.0).contains(r)) || !(0.0..=1.0).contains(&tail_mass)
        {
            return Err(Error::domain("weights must be probabilities"));
        }
        let total: f64 = weights.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("weights and tail sum to {total}")));
        }
        // Tauberian condition: excludes a service law concentrated at 0.
        if weights[0] + weights[1] >= 1.0 {
            return Err(Error::domain(format!(
                "r_0 + r_1 = {} is not below 1",
                weights[0] + weights[1]
            )));
        }
        Ok(Self { lambda, weights, tail_mass })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn n_max(&self) -> usize {
        self.weights.len() - 1
    }

    /// Upper tail sums `Σ_{m ≥ k} r_m` for `k = 0..=n_max + 1`, accumulated
    /// from the far end so that small tails keep their relative accuracy.
    pub fn tail_sums(&self) -> Vec<f64> {
        let n = self.weights.len();
        let mut tails = vec![0.0; n + 1];
        tails[n] = self.tail_mass;
        for k in (0..n).rev() {
            tails[k] = tails[k + 1] + self.weights[k];
        }
        tails
    }

    /// `Σ n r_n` over the computed window.
    pub fn gamma1(&self) -> f64 {
        self.weights.iter().enumerate().map(|(n, r)| n as f64 * r).sum()
    }

    /// `Σ n (n-1) r_n` over the computed window.
    pub fn gamma2(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(n, r)| (n as f64) * (n as f64 - 1.0) * r)
            .sum()
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Exponential { rate } => write!(f, "exp:{rate}"),
            Family::Erlang { shape, rate } => write!(f, "erlang:{shape},{rate}"),
            Family::HyperExponential { weights, rates } => {
                let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join("|");
                write!(f, "hyperexp:{};{}", join(weights), join(rates))
            }
            Family::Deterministic { value } => write!(f, "det:{value}"),
        }
    }
}

fn parse_num(field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::config(format!("invalid number '{}'", field.trim())))
}

fn parse_list(field: &str) -> Result<Vec<f64>> {
    field.split('|').map(parse_num).collect()
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (family, params) = text
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::config(format!("expected family:params, got '{text}'")))?;
        let wrap = |e: Error| match e {
            Error::Domain(msg) => Error::config(format!("'{text}': {msg}")),
            other => other,
        };
        match family.trim().to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Self::exponential(parse_num(params)?).map_err(wrap),
            "erlang" => {
                let (k, rate) = params
                    .split_once(',')
                    .ok_or_else(|| Error::config(format!("erlang needs shape,rate: '{text}'")))?;
                let shape = k
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| Error::config(format!("invalid Erlang shape '{}'", k.trim())))?;
                Self::erlang(shape, parse_num(rate)?).map_err(wrap)
            }
            "hyperexp" | "hyperexponential" => {
                let (w, r) = params.split_once(';').ok_or_else(|| {
                    Error::config(format!("hyperexp needs weights;rates: '{text}'"))
                })?;
                Self::hyperexponential(parse_list(w)?, parse_list(r)?).map_err(wrap)
            }
            "det" | "deterministic" => Self::deterministic(parse_num(params)?).map_err(wrap),
            other => Err(Error::config(format!("unknown distribution family '{other}'"))),
        }
    }
}

impl TryFrom<String> for DistributionSpec {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<DistributionSpec> for String {
    fn from(spec: DistributionSpec) -> Self {
        spec.to_string()
    }
}
