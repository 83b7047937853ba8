//! Event-driven simulation of the dam.
//!
//! Poisson inflow; each service draws from `B₂` when the level at its start
//! epoch exceeds `L` and from `B₁` otherwise. An empty dam freezes output
//! until the next arrival. Time is integrated exactly between events.
//!
//! Besides level occupancy the simulator records how time splits across
//! service types: idle, `B₂` service, `B₁` service by starting level, and
//! the first service of each busy period, kept as its own stratum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::CostModel;
use crate::error::{Error, Result};
use crate::exact::DamModelParams;

/// Which level is compared with `L` when a service starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountConvention {
    /// The customer entering service counts towards the level.
    #[default]
    Inclusive,
    /// Only the units waiting behind the one entering service count.
    Exclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: DamModelParams,
    pub costs: CostModel,
    /// Simulated time per replication, warmup included.
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub replications: usize,
    #[serde(default)]
    pub convention: CountConvention,
}

impl SimConfig {
    pub fn new(
        model: DamModelParams,
        costs: CostModel,
        horizon: f64,
        warmup: f64,
        seed: u64,
        replications: usize,
    ) -> Result<Self> {
        let cfg = Self {
            model,
            costs,
            horizon,
            warmup,
            seed,
            replications,
            convention: CountConvention::Inclusive,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_convention(mut self, convention: CountConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return Err(Error::config(format!("warmup must be nonnegative, got {}", self.warmup)));
        }
        if !(self.horizon.is_finite() && self.horizon > self.warmup) {
            return Err(Error::config(format!(
                "horizon {} must exceed warmup {}",
                self.horizon, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        Ok(())
    }
}

/// Replication mean with its standard error (NaN for one replication).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn from_samples(xs: impl ExactSizeIterator<Item = f64> + Clone) -> Self {
        let n = xs.len() as f64;
        let mean = xs.clone().sum::<f64>() / n;
        let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Estimate { mean, se: (var / n).sqrt() }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceStrata {
    pub idle: Estimate,
    pub upper: Estimate,
    /// `B₁` services started at level `i + 1`, first services excluded.
    /// Has `L + 1` entries under the exclusive convention.
    pub lower: Vec<Estimate>,
    pub first: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    /// Fraction of time the dam is empty.
    pub p1: Estimate,
    /// Fraction of time above `L`.
    pub p2: Estimate,
    /// Fraction of time at level `i + 1`.
    pub q: Vec<Estimate>,
    pub objective: Estimate,
    pub strata: ServiceStrata,
    pub replications: usize,
}

struct Replication {
    /// Occupancy: index 0 empty, `1..=L` levels, `L + 1` above.
    levels: Vec<f64>,
    /// Service strata: idle, upper, first, then `B₁` by start level.
    strata: Vec<f64>,
    objective: f64,
}

#[derive(Clone, Copy)]
enum Serving {
    Idle,
    Upper,
    First,
    Lower(usize),
}

impl Serving {
    fn slot(self) -> usize {
        match self {
            Serving::Idle => 0,
            Serving::Upper => 1,
            Serving::First => 2,
            Serving::Lower(level) => 2 + level,
        }
    }
}

fn run_replication(cfg: &SimConfig, index: usize) -> Replication {
    let model = &cfg.model;
    let big_l = model.levels();
    let lambda = model.lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);

    let threshold = match cfg.convention {
        CountConvention::Inclusive => big_l,
        CountConvention::Exclusive => big_l + 1,
    };
    let mut levels = vec![0.0; big_l + 2];
    let mut strata = vec![0.0; threshold + 3];
    let mut level = 0usize;
    let mut serving = Serving::Idle;
    let mut t = 0.0;
    let mut next_arrival = draw_exp(&mut rng) / lambda;
    let mut next_departure = f64::INFINITY;

    let start_service = |level: usize, first: bool, rng: &mut ChaCha8Rng| -> (Serving, f64) {
        if level > threshold {
            (Serving::Upper, model.b2().sample(rng))
        } else if first {
            (Serving::First, model.b1().sample(rng))
        } else {
            (Serving::Lower(level), model.b1().sample(rng))
        }
    };

    while t < cfg.horizon {
        let next = next_arrival.min(next_departure).min(cfg.horizon);
        let from = t.max(cfg.warmup);
        if next > from {
            let dt = next - from;
            levels[level.min(big_l + 1)] += dt;
            strata[serving.slot()] += dt;
        }
        t = next;
        if t >= cfg.horizon {
            break;
        }
        if next_arrival <= next_departure {
            level += 1;
            next_arrival = t + draw_exp(&mut rng) / lambda;
            if level == 1 {
                let (s, x) = start_service(level, true, &mut rng);
                serving = s;
                next_departure = t + x;
            }
        } else {
            level -= 1;
            if level == 0 {
                serving = Serving::Idle;
                next_departure = f64::INFINITY;
            } else {
                let (s, x) = start_service(level, false, &mut rng);
                serving = s;
                next_departure = t + x;
            }
        }
    }

    let span = cfg.horizon - cfg.warmup;
    levels.iter_mut().for_each(|x| *x /= span);
    strata.iter_mut().for_each(|x| *x /= span);
    let mut objective = levels[0] * model.lower_penalty() + levels[big_l + 1] * model.upper_penalty();
    for (i, share) in levels.iter().enumerate().take(big_l + 1).skip(1) {
        objective += share * cfg.costs.cost_at(i, big_l).unwrap_or(f64::NAN);
    }
    Replication { levels, strata, objective }
}

fn draw_exp(rng: &mut ChaCha8Rng) -> f64 {
    let x: f64 = Exp1.sample(rng);
    x
}

/// Runs the replications in parallel. Replication `k` uses stream `k` of a
/// ChaCha8 generator seeded with `cfg.seed`, so results do not depend on
/// scheduling.
pub fn simulate(cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    let reps: Vec<Replication> = (0..cfg.replications)
        .into_par_iter()
        .map(|k| run_replication(cfg, k))
        .collect();
    let column = |f: &dyn Fn(&Replication) -> f64| {
        Estimate::from_samples(reps.iter().map(f).collect::<Vec<_>>().into_iter())
    };
    let big_l = cfg.model.levels();
    let objective = column(&|r| r.objective);
    if !objective.mean.is_finite() {
        return Err(Error::Overflow("simulated objective is not finite".into()));
    }
    Ok(SimEstimate {
        p1: column(&|r| r.levels[0]),
        p2: column(&|r| r.levels[big_l + 1]),
        q: (1..=big_l).map(|i| column(&|r| r.levels[i])).collect(),
        objective,
        strata: ServiceStrata {
            idle: column(&|r| r.strata[0]),
            upper: column(&|r| r.strata[1]),
            first: column(&|r| r.strata[2]),
            lower: (1..reps[0].strata.len() - 2).map(|i| column(&|r| r.strata[2 + i])).collect(),
        },
        replications: cfg.replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::DistributionSpec;
    use crate::exact::{busy_counts, stationary};

    fn exp(rate: f64) -> DistributionSpec {
        DistributionSpec::exponential(rate).unwrap()
    }

    fn config(lambda: f64, levels: usize, horizon: f64, reps: usize) -> SimConfig {
        let model = DamModelParams::new(lambda, exp(1.0), exp(2.0), levels, 1.0, 1.0).unwrap();
        SimConfig::new(model, CostModel::constant(1.0).unwrap(), horizon, 100.0, 7, reps).unwrap()
    }

    #[test]
    fn fractions_partition_time() {
        let est = simulate(&config(1.0, 5, 20_000.0, 4)).unwrap();
        let total = est.p1.mean + est.p2.mean + est.q.iter().map(|q| q.mean).sum::<f64>();
        assert!((total - 1.0).abs() < 1e-9);
        let s = &est.strata;
        let strata = s.idle.mean + s.upper.mean + s.first.mean + s.lower.iter().map(|q| q.mean).sum::<f64>();
        assert!((strata - 1.0).abs() < 1e-9);
        assert_eq!(est.p1, s.idle);
    }

    #[test]
    fn seed_determinism() {
        let a = simulate(&config(1.0, 5, 5_000.0, 6)).unwrap();
        let b = simulate(&config(1.0, 5, 5_000.0, 6)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let mut other = config(1.0, 5, 5_000.0, 6);
        other.seed = 8;
        assert_ne!(simulate(&other).unwrap().p1, a.p1);
    }

    #[test]
    fn p1_matches_renewal_value() {
        let cfg = config(1.0, 5, 200_000.0, 16);
        let est = simulate(&cfg).unwrap();
        let table = busy_counts(cfg.model.b1(), 1.0, 5).unwrap();
        let p1 = 1.0 / table.total_served(1.0, 0.5);
        assert!(est.p1.covers(p1, 3.0), "{:?} vs {p1}", est.p1);
    }

    #[test]
    fn service_strata_match_raw_formulas() {
        let cfg = config(0.8, 4, 200_000.0, 16);
        let est = simulate(&cfg).unwrap();
        let s = stationary(&cfg.model).unwrap();
        assert!(est.strata.idle.covers(s.p1, 4.0));
        assert!(est.strata.upper.covers(s.p2, 4.0));
        assert!(est.strata.first.covers(s.defect, 4.0));
        for (e, q) in est.strata.lower.iter().zip(&s.q) {
            assert!(e.covers(*q, 4.0), "{e:?} vs {q}");
        }
    }

    #[test]
    fn light_inflow_keeps_dam_empty() {
        let est = simulate(&config(0.001, 5, 200_000.0, 2)).unwrap();
        assert!(est.p1.mean > 0.99);
    }

    #[test]
    fn single_replication_has_undefined_se() {
        let est = simulate(&config(1.0, 3, 1_000.0, 1)).unwrap();
        assert!(est.p1.se.is_nan());
    }

    #[test]
    fn exclusive_convention_uses_upper_law_less() {
        let inclusive = simulate(&config(1.0, 3, 50_000.0, 4)).unwrap();
        let exclusive = simulate(&config(1.0, 3, 50_000.0, 4).with_convention(CountConvention::Exclusive)).unwrap();
        assert!(exclusive.strata.upper.mean < inclusive.strata.upper.mean);
    }

    #[test]
    fn invalid_configs() {
        let model = DamModelParams::new(1.0, exp(1.0), exp(2.0), 5, 1.0, 1.0).unwrap();
        let costs = CostModel::constant(1.0).unwrap();
        assert!(matches!(SimConfig::new(model.clone(), costs.clone(), 10.0, 10.0, 1, 1), Err(Error::Config(_))));
        assert!(matches!(SimConfig::new(model.clone(), costs.clone(), 10.0, -1.0, 1, 1), Err(Error::Config(_))));
        assert!(matches!(SimConfig::new(model, costs, 10.0, 0.0, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn standard_errors_shrink_with_replications() {
        let se = |reps| simulate(&config(1.0, 5, 2_000.0, reps)).unwrap().p1.se;
        let (a, b, c) = (se(4), se(16), se(64));
        let slope = ((c / a).ln()) / (16f64.ln());
        assert!(a > b && b > c);
        assert!((-0.8..=-0.25).contains(&slope), "slope {slope}");
    }
}
