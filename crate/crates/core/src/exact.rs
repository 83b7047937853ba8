//! Exact finite-`L` quantities of the two-threshold dam queue.
//!
//! The level is a single-server queue with Poisson(λ) inflow. A service that
//! starts while the level is at most `L` uses the normal law `b1`; above `L`
//! it uses `b2`. Everything here is driven by the expected number of `b1`
//! services in a busy period, `Eν_n` for `n = 0..=L`, which solves the
//! convolution recurrence
//!
//! ```text
//! Eν_n = Σ_{j=0}^{n} Eν_{n-j+1} r_j,    Eν_0 = 1.
//! ```
//!
//! The recurrence is implicit in its top term. Differencing it shows that the
//! increments `D_n = Eν_n - Eν_{n-1}` solve the embedded-chain balance
//! equations of an M/G/1 queue with `D_0 = 1`, and summing those over the
//! levels below a cut gives the subtraction-free form
//!
//! ```text
//! r_0 D_i = R_i + Σ_{j=1}^{i-1} D_j R_{i-j+1},    R_k = Σ_{m ≥ k} r_m,
//! ```
//!
//! which is what [`busy_counts`] evaluates. All terms are nonnegative, so the
//! forward pass is stable for every traffic intensity.

use serde::{Deserialize, Serialize};

use crate::costs::CostModel;
use crate::dists::DistributionSpec;
use crate::error::{Error, Result};

/// Largest `L` accepted for one evaluation; the recursion is `O(L²)`.
pub const MAX_LEVELS: usize = 100_000;

const RESCALE_EXP: i32 = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamModelParams {
    lambda: f64,
    b1: DistributionSpec,
    b2: DistributionSpec,
    levels: usize,
    j1: f64,
    j2: f64,
}

impl DamModelParams {
    pub fn new(
        lambda: f64,
        b1: DistributionSpec,
        b2: DistributionSpec,
        levels: usize,
        j1: f64,
        j2: f64,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::config(format!("arrival rate must be positive, got {lambda}")));
        }
        if levels == 0 || levels > MAX_LEVELS {
            return Err(Error::config(format!("L must lie in [1, {MAX_LEVELS}], got {levels}")));
        }
        for (name, j) in [("j1", j1), ("j2", j2)] {
            if !(j.is_finite() && j >= 0.0) {
                return Err(Error::config(format!("{name} must be a nonnegative number, got {j}")));
            }
        }
        let rho2 = lambda * b2.mean();
        if rho2 >= 1.0 {
            return Err(Error::config(format!(
                "overflow service must be faster than inflow: rho2 = {rho2} >= 1"
            )));
        }
        Ok(Self { lambda, b1, b2, levels, j1, j2 })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn b1(&self) -> &DistributionSpec {
        &self.b1
    }

    pub fn b2(&self) -> &DistributionSpec {
        &self.b2
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn j1(&self) -> f64 {
        self.j1
    }

    pub fn j2(&self) -> f64 {
        self.j2
    }

    pub fn rho1(&self) -> f64 {
        self.lambda * self.b1.mean()
    }

    pub fn rho2(&self) -> f64 {
        self.lambda * self.b2.mean()
    }

    /// Cost per unit time of sitting at the lower bound, `J₁ = j1·L`.
    pub fn lower_penalty(&self) -> f64 {
        self.j1 * self.levels as f64
    }

    /// Cost per unit time of overflow service, `J₂ = j2·L`.
    pub fn upper_penalty(&self) -> f64 {
        self.j2 * self.levels as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusyOptions {
    /// Rescale stored values by `2^-512` whenever they reach `2^512`.
    pub log_scaling: bool,
}

impl Default for BusyOptions {
    fn default() -> Self {
        Self { log_scaling: true }
    }
}

/// `Eν_0..Eν_L` stored as `value · exp(log_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BusyPeriodTable {
    counts: Vec<f64>,
    increments: Vec<f64>,
    log_scale: f64,
}

impl BusyPeriodTable {
    pub fn levels(&self) -> usize {
        self.counts.len() - 1
    }

    /// Scaled counts; multiply by `exp(log_scale)` for the true values.
    pub fn scaled_counts(&self) -> &[f64] {
        &self.counts
    }

    /// Scaled increments `D_n = Eν_n - Eν_{n-1}`, with `D_0 = 0`.
    pub fn scaled_increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `Eν_n`; infinite when it exceeds the `f64` range.
    pub fn count(&self, n: usize) -> f64 {
        self.counts[n] * self.log_scale.exp()
    }

    pub fn ln_count(&self, n: usize) -> f64 {
        self.counts[n].ln() + self.log_scale
    }

    pub fn increment(&self, n: usize) -> f64 {
        self.increments[n] * self.log_scale.exp()
    }

    /// Expected number of services of either kind in a busy period,
    /// `Eν_L = 1/(1-ρ₂) + (ρ₁-ρ₂)/(1-ρ₂) · Eν⁽¹⁾_L`.
    pub fn total_served(&self, rho1: f64, rho2: f64) -> f64 {
        (1.0 + (rho1 - rho2) * self.count(self.levels())) / (1.0 - rho2)
    }

    /// Expected number of overflow services in a busy period.
    pub fn served_by_upper(&self, rho1: f64, rho2: f64) -> f64 {
        (1.0 - (1.0 - rho1) * self.count(self.levels())) / (1.0 - rho2)
    }

    /// Expected time spent in normal service during a busy period of the
    /// system truncated at level `n` (Wald).
    pub fn normal_service_time(&self, n: usize, rho1: f64, lambda: f64) -> f64 {
        rho1 / lambda * self.count(n)
    }

    /// Expected busy period `E T_L`.
    pub fn busy_period(&self, rho1: f64, rho2: f64, lambda: f64) -> f64 {
        (self.total_served(rho1, rho2) - 1.0) / lambda
    }
}

/// Solves the busy-period recurrence for `n = 0..=levels`.
pub fn busy_counts(b1: &DistributionSpec, lambda: f64, levels: usize) -> Result<BusyPeriodTable> {
    busy_counts_with(b1, lambda, levels, BusyOptions::default())
}

pub fn busy_counts_with(
    b1: &DistributionSpec,
    lambda: f64,
    levels: usize,
    options: BusyOptions,
) -> Result<BusyPeriodTable> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(Error::domain(format!("L must lie in [1, {MAX_LEVELS}], got {levels}")));
    }
    let weights = b1.poisson_weights(lambda, levels + 1)?;
    let r0 = weights.weights()[0];
    if r0 <= 0.0 {
        return Err(Error::domain("r_0 underflows; arrivals per service too large"));
    }
    let tails = weights.tail_sums();
    let threshold = 2f64.powi(RESCALE_EXP);
    let shrink = 2f64.powi(-RESCALE_EXP);

    let mut counts = Vec::with_capacity(levels + 1);
    let mut increments = Vec::with_capacity(levels + 1);
    let mut unit = 1.0;
    let mut rescales = 0i64;
    counts.push(unit);
    increments.push(0.0);
    for i in 1..=levels {
        let mut acc = unit * tails[i];
        for j in 1..i {
            acc += increments[j] * tails[i - j + 1];
        }
        let d = acc / r0;
        let c = counts[i - 1] + d;
        increments.push(d);
        counts.push(c);
        if !c.is_finite() {
            return Err(Error::Overflow(format!("Eν_{i} exceeds the f64 range")));
        }
        if options.log_scaling && c >= threshold {
            for v in counts.iter_mut().chain(increments.iter_mut()) {
                *v *= shrink;
            }
            unit *= shrink;
            rescales += 1;
        }
    }
    Ok(BusyPeriodTable {
        counts,
        increments,
        log_scale: rescales as f64 * f64::from(RESCALE_EXP) * std::f64::consts::LN_2,
    })
}

/// `p1`, `p2` and `q_1..q_L` as given by the closed-form expressions, plus
/// the amount by which they fall short of total probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryResult {
    pub p1: f64,
    pub p2: f64,
    pub q: Vec<f64>,
    pub defect: f64,
}

impl StationaryResult {
    /// Divides `(p1, p2, q)` by their sum; the returned defect is zero.
    pub fn renormalized(&self) -> StationaryResult {
        let total = 1.0 - self.defect;
        StationaryResult {
            p1: self.p1 / total,
            p2: self.p2 / total,
            q: self.q.iter().map(|q| q / total).collect(),
            defect: 0.0,
        }
    }

    pub fn objective(&self, model: &DamModelParams, costs: &CostModel) -> Result<f64> {
        let levels = self.q.len();
        let mut water = 0.0;
        for (i, q) in self.q.iter().enumerate() {
            water += q * costs.cost_at(i + 1, levels)?;
        }
        Ok(self.p1 * model.lower_penalty() + self.p2 * model.upper_penalty() + water)
    }
}

pub fn stationary(model: &DamModelParams) -> Result<StationaryResult> {
    let table = busy_counts(model.b1(), model.lambda(), model.levels())?;
    Ok(stationary_from_table(model, &table))
}

/// Evaluates the stationary formulas in ratio form against the scaled table,
/// so the common factor `exp(log_scale)` cancels.
pub fn stationary_from_table(model: &DamModelParams, table: &BusyPeriodTable) -> StationaryResult {
    let rho1 = model.rho1();
    let rho2 = model.rho2();
    let unit = (-table.log_scale()).exp();
    let top = table.scaled_counts()[table.levels()];
    let denom = unit + (rho1 - rho2) * top;
    let p1 = (1.0 - rho2) * unit / denom;
    // exact value is nonnegative; the difference cancels when rho1 < 1 and L is large
    let p2 = (rho2 * (unit + (rho1 - 1.0) * top) / denom).max(0.0);
    let q: Vec<f64> = table.scaled_increments()[1..]
        .iter()
        .map(|d| rho1 * (1.0 - rho2) * d / denom)
        .collect();
    let defect = 1.0 - (p1 + p2 + q.iter().sum::<f64>());
    StationaryResult { p1, p2, q, defect }
}

/// `J = p1·J₁ + p2·J₂ + Σ q_i c_i` from the raw stationary formulas.
pub fn objective_exact(model: &DamModelParams, costs: &CostModel) -> Result<f64> {
    stationary(model)?.objective(model, costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp(rate: f64) -> DistributionSpec {
        DistributionSpec::exponential(rate).unwrap()
    }

    /// Direct solve of the implicit recurrence: rearranged for the top term
    /// with plain subtraction. Accurate for short tables only.
    fn naive_counts(b1: &DistributionSpec, lambda: f64, levels: usize) -> Vec<f64> {
        let w = b1.poisson_weights(lambda, levels + 1).unwrap();
        let r = w.weights();
        let mut q = vec![1.0];
        for n in 0..levels {
            let mut rhs = q[n];
            for j in 1..=n {
                rhs -= q[n - j + 1] * r[j];
            }
            q.push(rhs / r[0]);
        }
        q
    }

    fn model(b1: DistributionSpec, b2: DistributionSpec, levels: usize) -> DamModelParams {
        DamModelParams::new(1.0, b1, b2, levels, 1.0, 1.0).unwrap()
    }

    #[test]
    fn counts_for_unit_exponential() {
        let t = busy_counts(&exp(1.0), 1.0, 3).unwrap();
        for (got, want) in t.scaled_counts().iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
        assert_eq!(t.log_scale(), 0.0);
    }

    #[test]
    fn counts_match_naive_recurrence() {
        let specs = [
            exp(1.7),
            exp(0.6),
            DistributionSpec::erlang(3, 2.5).unwrap(),
            DistributionSpec::deterministic(0.9).unwrap(),
            DistributionSpec::hyperexponential(vec![0.2, 0.8], vec![0.5, 3.0]).unwrap(),
        ];
        for spec in specs {
            let t = busy_counts(&spec, 1.0, 12).unwrap();
            let naive = naive_counts(&spec, 1.0, 12);
            for n in 0..=12 {
                assert_relative_eq!(t.count(n), naive[n], max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn large_tables_are_rescaled() {
        // ρ₁ = 2: Eν grows like 2^n, far past f64 range at n = 2000.
        let t = busy_counts(&exp(0.5), 1.0, 2000).unwrap();
        assert!(t.log_scale() > 0.0);
        assert!(t.count(2000).is_infinite());
        // ln Eν_n ≈ n ln 2 + const
        let slope = t.ln_count(2000) - t.ln_count(1999);
        assert_relative_eq!(slope, std::f64::consts::LN_2, max_relative = 1e-9);
        let err = busy_counts_with(&exp(0.5), 1.0, 2000, BusyOptions { log_scaling: false });
        assert!(matches!(err, Err(Error::Overflow(_))));
    }

    #[test]
    fn counts_start_at_one_and_increase() {
        let t = busy_counts(&DistributionSpec::deterministic(1.2).unwrap(), 1.0, 50).unwrap();
        assert_eq!(t.count(0), 1.0);
        assert!(t.scaled_counts().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn balanced_counts_grow_linearly() {
        // ρ₁ = 1, ρ_{1,2} = 2: Eν_n = n + 1 exactly.
        let t = busy_counts(&exp(1.0), 1.0, 5000).unwrap();
        assert_relative_eq!(t.count(5000) / 5000.0, 1.0, max_relative = 1e-3);
        assert_relative_eq!(t.count(5000), 5001.0, max_relative = 1e-10);
    }

    #[test]
    fn stationary_hand_example() {
        let s = stationary(&model(exp(1.0), exp(2.0), 2)).unwrap();
        assert_relative_eq!(s.p1, 0.2, epsilon = 1e-14);
        assert_relative_eq!(s.p2, 0.2, epsilon = 1e-14);
        assert_relative_eq!(s.q[0], 0.2, epsilon = 1e-14);
        assert_relative_eq!(s.q[1], 0.2, epsilon = 1e-14);
        assert_relative_eq!(s.defect, 0.2, epsilon = 1e-14);
        let r = s.renormalized();
        assert_relative_eq!(r.p1 + r.p2 + r.q.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(r.p1, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn objective_examples() {
        let costs = CostModel::constant(1.0).unwrap();
        let j = objective_exact(&model(exp(1.0), exp(2.0), 2), &costs).unwrap();
        assert_relative_eq!(j, 1.2, epsilon = 1e-12);
        for levels in [2usize, 10, 100, 1000] {
            let j = objective_exact(&model(exp(1.0), exp(2.0), levels), &costs).unwrap();
            let l = levels as f64;
            assert_relative_eq!(j, 3.0 * l / (l + 3.0), epsilon = 1e-9);
        }
    }

    #[test]
    fn wald_accessors_are_consistent() {
        let m = model(DistributionSpec::erlang(2, 2.4).unwrap(), exp(3.0), 40);
        let t = busy_counts(m.b1(), m.lambda(), m.levels()).unwrap();
        let (r1, r2) = (m.rho1(), m.rho2());
        let total = t.total_served(r1, r2);
        assert_relative_eq!(total, t.count(40) + t.served_by_upper(r1, r2), max_relative = 1e-12);
        // λ(E T_L + E I_L) = Eν_L with E I_L = 1/λ
        let cycle = t.busy_period(r1, r2, m.lambda()) + 1.0 / m.lambda();
        assert_relative_eq!(m.lambda() * cycle, total, max_relative = 1e-12);
        // λ E T_L = ρ₁ Eν⁽¹⁾ + ρ₂ Eν⁽²⁾
        assert_relative_eq!(
            m.lambda() * t.busy_period(r1, r2, m.lambda()),
            m.lambda() * t.normal_service_time(40, r1, m.lambda()) + r2 * t.served_by_upper(r1, r2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn model_validation() {
        assert!(DamModelParams::new(1.0, exp(1.0), exp(0.9), 5, 1.0, 1.0).is_err());
        assert!(DamModelParams::new(1.0, exp(1.0), exp(2.0), 0, 1.0, 1.0).is_err());
        assert!(DamModelParams::new(1.0, exp(1.0), exp(2.0), 5, -1.0, 1.0).is_err());
        assert!(DamModelParams::new(0.0, exp(1.0), exp(2.0), 5, 1.0, 1.0).is_err());
        let m = DamModelParams::new(2.0, exp(1.0), exp(5.0), 7, 0.5, 3.0).unwrap();
        assert_relative_eq!(m.lower_penalty(), 3.5);
        assert_relative_eq!(m.upper_penalty(), 21.0);
        assert_relative_eq!(m.rho2(), 0.4);
    }

    proptest! {
        #[test]
        fn defect_and_renewal_identities(
            mean1 in 0.3f64..2.5,
            mean2 in 0.05f64..0.95,
            levels in 1usize..300,
            lambda in 0.5f64..2.0,
            family in 0usize..3,
        ) {
            let b1 = match family {
                0 => exp(1.0 / mean1),
                1 => DistributionSpec::erlang(2, 2.0 / mean1).unwrap(),
                _ => DistributionSpec::deterministic(mean1).unwrap(),
            }
            .with_mean(mean1 / lambda).unwrap();
            let b2 = exp(lambda / mean2);
            let m = DamModelParams::new(lambda, b1, b2, levels, 1.0, 1.0).unwrap();
            let t = busy_counts(m.b1(), m.lambda(), levels).unwrap();
            let s = stationary_from_table(&m, &t);
            prop_assert!((s.defect - m.rho1() * s.p1).abs() < 1e-10);
            prop_assert!(s.p1 >= 0.0 && s.p2 >= 0.0 && s.q.iter().all(|q| *q >= 0.0));
            let total = t.total_served(m.rho1(), m.rho2());
            if total.is_finite() {
                prop_assert!((s.p1 - 1.0 / total).abs() < 1e-10);
            }
        }
    }
}
