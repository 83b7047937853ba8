//! Heavy-traffic cost functionals for the three control regimes and the
//! geometric approximations of the state probabilities near the top level.
//!
//! Along a design family with `ρ₁ = 1 ± C/L` the objective converges to
//! `J^upper(C)` or `J^lower(C)`; at `ρ₁ = 1` it converges to the balanced
//! limit, the common value of both functionals at `C = 0`.

use serde::{Deserialize, Serialize};

use crate::costs::{CostModel, SERIES_SWITCH};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegimeParamsRaw")]
pub struct RegimeParams {
    j1: f64,
    j2: f64,
    rho2: f64,
    rho12: f64,
    costs: CostModel,
    #[serde(skip_serializing)]
    c_star: f64,
}

#[derive(Deserialize)]
struct RegimeParamsRaw {
    j1: f64,
    j2: f64,
    rho2: f64,
    rho12: f64,
    costs: CostModel,
}

impl TryFrom<RegimeParamsRaw> for RegimeParams {
    type Error = Error;

    fn try_from(raw: RegimeParamsRaw) -> Result<Self> {
        RegimeParams::new(raw.j1, raw.j2, raw.rho2, raw.rho12, raw.costs)
    }
}

impl RegimeParams {
    /// `rho12` is the limit of `λ²E[X²]` for the `B₁` family at `ρ₁ = 1`.
    pub fn new(j1: f64, j2: f64, rho2: f64, rho12: f64, costs: CostModel) -> Result<Self> {
        for (name, j) in [("j1", j1), ("j2", j2)] {
            if !(j.is_finite() && j >= 0.0) {
                return Err(Error::domain(format!("{name} must be finite and nonnegative, got {j}")));
            }
        }
        if !(rho2 > 0.0 && rho2 < 1.0) {
            return Err(Error::domain(format!("rho2 must lie in (0, 1), got {rho2}")));
        }
        if !(rho12.is_finite() && rho12 > 0.0) {
            return Err(Error::domain(format!("rho12 must be positive, got {rho12}")));
        }
        let c_star = costs.c_star()?;
        Ok(Self { j1, j2, rho2, rho12, costs, c_star })
    }

    pub fn j1(&self) -> f64 {
        self.j1
    }

    pub fn j2(&self) -> f64 {
        self.j2
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    pub fn rho12(&self) -> f64 {
        self.rho12
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    pub fn c_star(&self) -> f64 {
        self.c_star
    }

    /// Same parameters with a different `j2`.
    pub fn with_j2(&self, j2: f64) -> Result<Self> {
        if !(j2.is_finite() && j2 >= 0.0) {
            return Err(Error::domain(format!("j2 must be finite and nonnegative, got {j2}")));
        }
        Ok(Self { j2, ..self.clone() })
    }

    fn upper_weight(&self) -> f64 {
        self.j2 * self.rho2 / (1.0 - self.rho2)
    }

    /// `(j1 + j2·ρ₂/(1-ρ₂))·ρ̃/2 + c*`.
    pub fn balanced_limit(&self) -> f64 {
        0.5 * self.rho12 * (self.j1 + self.upper_weight()) + self.c_star
    }

    /// `C·[j1/(e^x-1) + j2·ρ₂e^x/((1-ρ₂)(e^x-1))] + ψ(C)` with `x = 2C/ρ̃`.
    pub fn j_upper(&self, c: f64) -> Result<f64> {
        check_c(c)?;
        if c == 0.0 {
            return Ok(self.balanced_limit());
        }
        let x = 2.0 * c / self.rho12;
        let g = x_over_expm1(x);
        let penalty = 0.5 * self.rho12 * (self.j1 * g + self.upper_weight() * (x + g));
        Ok(penalty + self.costs.psi(c, self.rho12)?)
    }

    /// `C·[j1·e^x/(e^x-1) + j2·ρ₂/((1-ρ₂)(e^x-1))] + η(C)` with `x = 2C/ρ̃`.
    pub fn j_lower(&self, c: f64) -> Result<f64> {
        check_c(c)?;
        if c == 0.0 {
            return Ok(self.balanced_limit());
        }
        let x = 2.0 * c / self.rho12;
        let g = x_over_expm1(x);
        let penalty = 0.5 * self.rho12 * (self.j1 * (x + g) + self.upper_weight() * g);
        Ok(penalty + self.costs.eta(c, self.rho12)?)
    }

    /// The lower functional with the exponent `ρ̃/(2C)` in place of `2C/ρ̃`
    /// in its penalty part. Diverges as `C → 0`; kept for comparison.
    pub fn j_lower_paper_literal(&self, c: f64) -> Result<f64> {
        check_c(c)?;
        if c == 0.0 {
            return Ok(f64::INFINITY);
        }
        let e = (0.5 * self.rho12 / c).exp();
        Ok(c * (self.j1 * e + self.upper_weight() * (e - 1.0)) + self.costs.eta(c, self.rho12)?)
    }
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("C must be finite and nonnegative, got {c}")))
    }
}

/// `x/(e^x - 1)`, continuous at 0.
pub(crate) fn x_over_expm1(x: f64) -> f64 {
    if x.abs() < SERIES_SWITCH {
        1.0 - x / 2.0 + x * x / 12.0 - x.powi(4) / 720.0
    } else {
        x / x.exp_m1()
    }
}

/// `(e^x/(e^x-1))·(2δ/ρ̃)·(1-2δ/ρ̃)^j`, `x = 2C/ρ̃`: approximate probability
/// of level `L - j` in the upper regime.
pub fn q_upper_approx(delta: f64, c: f64, rho12: f64, j: usize) -> Result<f64> {
    let a = 2.0 * delta / rho12;
    if !(a > 0.0 && a < 1.0) || !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!(
            "need 0 < 2δ/ρ̃ < 1 and C > 0, got 2δ/ρ̃ = {a}, C = {c}"
        )));
    }
    let x = 2.0 * c / rho12;
    Ok(a / (-(-x).exp_m1()) * (j as f64 * (-a).ln_1p()).exp())
}

/// `(1/(e^x-1))·(2δ/ρ̃)·(1+2δ/ρ̃)^j`, `x = 2C/ρ̃`: approximate probability
/// of level `L - j` in the lower regime.
pub fn q_lower_approx(delta: f64, c: f64, rho12: f64, j: usize) -> Result<f64> {
    let a = 2.0 * delta / rho12;
    if !(a > 0.0 && a.is_finite()) || !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("need δ > 0, ρ̃ > 0 and C > 0, got δ = {delta}, C = {c}")));
    }
    let x = 2.0 * c / rho12;
    Ok(a / x.exp_m1() * (j as f64 * a.ln_1p()).exp())
}
