//! Choice of the optimal regime: minimize both heavy-traffic functionals over
//! `C ∈ [0, c_max]` and compare with the balanced value.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asympt::RegimeParams;
use crate::error::{Error, Result};

pub const DEFAULT_C_MAX: f64 = 50.0;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const GRID_POINTS: usize = 64;
pub const THRESHOLD_TOL: f64 = 1e-3;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub c: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "lowercase")]
pub enum Regime {
    Balanced,
    Upper(f64),
    Lower(f64),
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Balanced => "balanced",
            Regime::Upper(_) => "upper",
            Regime::Lower(_) => "lower",
        }
    }

    pub fn c(&self) -> f64 {
        match *self {
            Regime::Balanced => 0.0,
            Regime::Upper(c) | Regime::Lower(c) => c,
        }
    }

    /// `C` with the sign of the load offset: `ρ₁ = 1 + signed_c/L`.
    pub fn signed_c(&self) -> f64 {
        match *self {
            Regime::Balanced => 0.0,
            Regime::Upper(c) => c,
            Regime::Lower(c) => -c,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    pub regime: Regime,
    pub objective: f64,
    pub upper_min: Minimum,
    pub lower_min: Minimum,
    pub balanced_value: f64,
    /// Finite-difference derivative of each functional at its minimizer
    /// (one-sided at `C = 0`).
    pub upper_slope: f64,
    pub lower_slope: f64,
}

/// Coarse grid followed by golden-section refinement on the best bracket.
/// Returns `C = 0` when the refined minimizer lies below `tol`.
pub fn minimize_scalar<F>(f: F, c_max: f64, tol: f64) -> Result<Minimum>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(c_max.is_finite() && c_max > 0.0) || !(tol > 0.0 && tol < c_max) {
        return Err(Error::domain(format!("need 0 < tol < c_max, got tol = {tol}, c_max = {c_max}")));
    }
    let grid = search_grid(c_max);
    let mut values = Vec::with_capacity(grid.len());
    for &c in &grid {
        let v = f(c)?;
        if !v.is_finite() {
            return Err(Error::Convergence(format!("objective is not finite at C = {c}")));
        }
        values.push(v);
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > 0.25 * tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let mut min = if f1 <= f2 { Minimum { c: x1, value: f1 } } else { Minimum { c: x2, value: f2 } };
    if values[best] < min.value {
        min = Minimum { c: grid[best], value: values[best] };
    }
    if min.c < tol {
        min = Minimum { c: 0.0, value: f(0.0)? };
    }
    Ok(min)
}

/// `0`, 31 geometric points from `1e-6·c_max` and 32 evenly spaced points.
fn search_grid(c_max: f64) -> Vec<f64> {
    let geometric = GRID_POINTS / 2 - 1;
    let linear = GRID_POINTS / 2;
    let mut grid = Vec::with_capacity(GRID_POINTS);
    grid.push(0.0);
    for k in 0..geometric {
        let e = -6.0 + 6.0 * k as f64 / geometric as f64;
        grid.push(c_max * 10f64.powf(e));
    }
    for k in 1..=linear {
        grid.push(c_max * k as f64 / linear as f64);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn slope<F>(f: F, c: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = tol.max(1e-6);
    if c < h {
        Ok((f(c + h)? - f(c)?) / h)
    } else {
        Ok((f(c + h)? - f(c - h)?) / (2.0 * h))
    }
}

pub fn solve(p: &RegimeParams, c_max: f64, tol: f64) -> Result<ControlSolution> {
    let upper = |c| p.j_upper(c);
    let lower = |c| p.j_lower(c);
    let upper_min = minimize_scalar(upper, c_max, tol)?;
    let lower_min = minimize_scalar(lower, c_max, tol)?;
    let balanced_value = p.balanced_limit();
    let (regime, objective) = match (upper_min.c > 0.0, lower_min.c > 0.0) {
        (false, false) => (Regime::Balanced, balanced_value),
        (true, false) => (Regime::Upper(upper_min.c), upper_min.value),
        (false, true) => (Regime::Lower(lower_min.c), lower_min.value),
        (true, true) => {
            if (upper_min.value - lower_min.value).abs() < tol {
                return Err(Error::Ambiguity(format!(
                    "both regimes have interior minima: upper {} at C = {}, lower {} at C = {}",
                    upper_min.value, upper_min.c, lower_min.value, lower_min.c
                )));
            }
            if upper_min.value < lower_min.value {
                (Regime::Upper(upper_min.c), upper_min.value)
            } else {
                (Regime::Lower(lower_min.c), lower_min.value)
            }
        }
    };
    Ok(ControlSolution {
        regime,
        objective,
        upper_min,
        lower_min,
        balanced_value,
        upper_slope: slope(upper, upper_min.c, tol)?,
        lower_slope: slope(lower, lower_min.c, tol)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub j2: f64,
    pub regime: Regime,
    pub c: f64,
    pub objective: f64,
}

/// One solve per `j2`; rows come back in input order.
pub fn sweep_j2(template: &RegimeParams, j2_values: &[f64], c_max: f64, tol: f64) -> Result<Vec<SweepRow>> {
    if j2_values.is_empty() {
        return Err(Error::domain("empty j2 sweep"));
    }
    j2_values
        .par_iter()
        .map(|&j2| {
            let s = solve(&template.with_j2(j2)?, c_max, tol)?;
            Ok(SweepRow { j2, regime: s.regime, c: s.regime.c(), objective: s.objective })
        })
        .collect()
}

/// Smallest `j2` at which the upper regime stops being optimal, found by
/// bisection to `THRESHOLD_TOL`. The upper end of the scan starts at
/// `j1 + 10` and doubles until the regime changes.
pub fn threshold_j2(template: &RegimeParams, c_max: f64, tol: f64) -> Result<f64> {
    let not_upper = |j2: f64| -> Result<bool> {
        let s = solve(&template.with_j2(j2)?, c_max, tol)?;
        Ok(!matches!(s.regime, Regime::Upper(_)))
    };
    let mut lo = 0.0;
    if not_upper(lo)? {
        return Err(Error::Bracket("upper regime is not optimal even at j2 = 0".into()));
    }
    let mut hi = template.j1() + 10.0;
    while !not_upper(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Bracket(format!("upper regime still optimal at j2 = {lo}")));
        }
    }
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if not_upper(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference(j2: f64) -> RegimeParams {
        RegimeParams::new(1.0, j2, 0.5, 1.0, CostModel::linear(2.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn minimize_examples() {
        let m = minimize_scalar(|c| Ok((c - 0.3) * (c - 0.3)), 5.0, 1e-4).unwrap();
        assert!((m.c - 0.3).abs() < 1e-4);
        let m = minimize_scalar(|c| Ok(c + 1.0), 5.0, 1e-4).unwrap();
        assert_eq!(m, Minimum { c: 0.0, value: 1.0 });
        let m = minimize_scalar(|c| Ok(-c), 5.0, 1e-4).unwrap();
        assert!((m.c - 5.0).abs() < 1e-4);
        let m = minimize_scalar(|c| reference(1.06).j_upper(c), DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
        assert!((m.c - 0.200).abs() < 0.01);
        assert!(minimize_scalar(Ok, 0.0, 1e-4).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = search_grid(50.0);
        assert_eq!(g.len(), GRID_POINTS);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 50.0);
    }

    #[test]
    fn solve_examples() {
        let s = solve(&reference(1.06), DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
        assert!(matches!(s.regime, Regime::Upper(c) if (c - 0.2).abs() < 0.01));
        assert_relative_eq!(s.objective, 2.5164, epsilon = 1e-3);
        assert!(s.upper_slope.abs() < 1e-3);
        assert!(s.objective <= s.balanced_value);
    }

    #[test]
    fn constant_costs_balance_on_threshold_line() {
        // j1 = j2·ρ₂/(1-ρ₂) with ρ₂ = 0.25
        let p = RegimeParams::new(1.0, 3.0, 0.25, 1.4, CostModel::constant(2.0).unwrap()).unwrap();
        let s = solve(&p, DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
        assert_eq!(s.regime, Regime::Balanced);
        assert_eq!(s.objective, s.balanced_value);
    }

    #[test]
    fn linear_costs_never_balance_on_threshold_line() {
        let s = solve(&reference(1.0), DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
        assert!(matches!(s.regime, Regime::Upper(c) if c > 0.0));
    }

    #[test]
    fn threshold_for_constant_costs() {
        let p = RegimeParams::new(1.5, 1.0, 0.4, 0.8, CostModel::constant(1.0).unwrap()).unwrap();
        let t = threshold_j2(&p, DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
        assert!((t - 1.5 * 0.6 / 0.4).abs() < 0.01);
    }

    #[test]
    fn sweep_preserves_order_and_matches_solve() {
        let values = [1.3, 1.06, 1.2];
        let rows = sweep_j2(&reference(1.0), &values, DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
        for (row, &j2) in rows.iter().zip(&values) {
            let s = solve(&reference(j2), DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
            assert_eq!(row.j2, j2);
            assert_eq!(row.regime, s.regime);
            assert_eq!(row.objective, s.objective);
        }
        assert!(sweep_j2(&reference(1.0), &[], 50.0, 1e-4).is_err());
    }

    #[test]
    fn solve_is_deterministic() {
        let a = solve(&reference(1.17), DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
        let b = solve(&reference(1.17), DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn regime_serializes_with_kind_tag() {
        let text = serde_json::to_string(&Regime::Upper(0.5)).unwrap();
        assert_eq!(text, r#"{"kind":"upper","c":0.5}"#);
        assert_eq!(serde_json::to_string(&Regime::Balanced).unwrap(), r#"{"kind":"balanced"}"#);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn objective_is_min_of_candidates(
            j1 in 0.1f64..3.0,
            j2 in 0.1f64..3.0,
            rho2 in 0.1f64..0.9,
            rho12 in 0.3f64..3.0,
        ) {
            let p = RegimeParams::new(j1, j2, rho2, rho12, CostModel::linear(2.0, 1.0).unwrap()).unwrap();
            let s = solve(&p, DEFAULT_C_MAX, DEFAULT_TOL).unwrap();
            let best = s.upper_min.value.min(s.lower_min.value).min(s.balanced_value);
            prop_assert!(s.objective <= best + 1e-6);
            prop_assert!(!(s.upper_min.c > 0.0 && s.lower_min.c > 0.0) || s.regime != Regime::Balanced);
        }
    }
}
