//! Water costs per level and the limiting weighted averages `ψ(C)`, `η(C)`.
//!
//! Costs are positive and nonincreasing in the level. Because the limits are
//! taken as `L → ∞` with the costs recomputed at each `L`, every model needs
//! a rule for what `c_i` is at an arbitrary `L`:
//!
//! * `constant:c` and `linear:c_top,c_bottom` are defined for every `L`;
//!   the linear model interpolates `c_1 = c_top` to `c_L = c_bottom`.
//! * `table:values,rule` uses the table verbatim while it is long enough and
//!   extends it with `repeat-last` or `stretch` (piecewise-linear rescaling
//!   of the table onto `L` levels) otherwise.
//!
//! `ψ(C)` weights the costs from the top level down with `(1 - 2C/(ρ̃L))^j`,
//! `η(C)` with `(1 + 2C/(ρ̃L))^j`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Level count at which table-model limits are evaluated.
pub const TABLE_EVAL_LEVELS: usize = 100_000;
/// Accepted disagreement between successive Richardson estimates.
pub const TABLE_LIMIT_TOL: f64 = 1e-6;
/// Below this value of `2C/ρ̃` the kernels switch to their series.
pub const SERIES_SWITCH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionRule {
    RepeatLast,
    Stretch,
}

impl fmt::Display for ExtensionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtensionRule::RepeatLast => "repeat-last",
            ExtensionRule::Stretch => "stretch",
        })
    }
}

impl FromStr for ExtensionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "repeat-last" => Ok(ExtensionRule::RepeatLast),
            "stretch" => Ok(ExtensionRule::Stretch),
            other => Err(Error::config(format!(
                "unknown extension rule '{other}' (expected repeat-last or stretch)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    Constant(f64),
    Linear { top: f64, bottom: f64 },
    Table { values: Vec<f64>, rule: ExtensionRule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CostModel {
    kind: CostKind,
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {x}")))
    }
}

impl CostModel {
    pub fn constant(c: f64) -> Result<Self> {
        Ok(Self { kind: CostKind::Constant(positive("cost", c)?) })
    }

    /// Linear costs from `top` at level 1 down to `bottom` at level `L`.
    pub fn linear(top: f64, bottom: f64) -> Result<Self> {
        positive("top cost", top)?;
        positive("bottom cost", bottom)?;
        if bottom >= top {
            return Err(Error::domain(format!(
                "linear costs must decrease: bottom {bottom} >= top {top}"
            )));
        }
        Ok(Self { kind: CostKind::Linear { top, bottom } })
    }

    pub fn table(values: Vec<f64>, rule: ExtensionRule) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("cost table is empty"));
        }
        for &v in &values {
            positive("cost", v)?;
        }
        if let Some(i) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::domain(format!(
                "cost table increases at line {}: {} -> {}",
                i + 2,
                values[i],
                values[i + 1]
            )));
        }
        Ok(Self { kind: CostKind::Table { values, rule } })
    }

    /// Reads a table with one positive value per line.
    pub fn table_from_csv(path: &Path, rule: ExtensionRule) -> Result<Self> {
        let io = |source| Error::Io { path: path.to_owned(), source };
        let file = std::fs::File::open(path).map_err(io)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut values = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
            let field = record.get(0).unwrap_or("");
            if field.is_empty() {
                continue;
            }
            let v = field.parse::<f64>().map_err(|_| {
                Error::config(format!("{} line {}: invalid cost '{field}'", path.display(), line + 1))
            })?;
            values.push(v);
        }
        Self::table(values, rule).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    pub fn is_constant(&self) -> bool {
        match &self.kind {
            CostKind::Constant(_) => true,
            CostKind::Linear { .. } => false,
            CostKind::Table { values, .. } => values.iter().all(|v| *v == values[0]),
        }
    }

    /// `c_i` for a dam with `levels` levels.
    pub fn cost_at(&self, i: usize, levels: usize) -> Result<f64> {
        if i == 0 || i > levels {
            return Err(Error::Index { index: i, levels });
        }
        Ok(self.cost_unchecked(i, levels))
    }

    fn cost_unchecked(&self, i: usize, levels: usize) -> f64 {
        match &self.kind {
            CostKind::Constant(c) => *c,
            CostKind::Linear { top, bottom } => {
                if levels == 1 {
                    *top
                } else {
                    top - (i - 1) as f64 / (levels - 1) as f64 * (top - bottom)
                }
            }
            CostKind::Table { values, rule } => {
                let n = values.len();
                if levels <= n {
                    return values[i - 1];
                }
                match rule {
                    ExtensionRule::RepeatLast => values[(i - 1).min(n - 1)],
                    ExtensionRule::Stretch => {
                        if n == 1 {
                            return values[0];
                        }
                        let u = (i - 1) as f64 / (levels - 1) as f64 * (n - 1) as f64;
                        let k = (u.floor() as usize).min(n - 2);
                        let frac = u - k as f64;
                        values[k] + frac * (values[k + 1] - values[k])
                    }
                }
            }
        }
    }

    fn top_down(&self, levels: usize) -> impl Iterator<Item = f64> + '_ {
        (0..levels).map(move |j| self.cost_unchecked(levels - j, levels))
    }

    /// Cesàro limit `c* = lim (1/L) Σ c_i`.
    pub fn c_star(&self) -> Result<f64> {
        match &self.kind {
            CostKind::Constant(c) => Ok(*c),
            CostKind::Linear { top, bottom } => Ok(0.5 * (top + bottom)),
            CostKind::Table { .. } => richardson_limit(TABLE_EVAL_LEVELS, |levels| {
                self.top_down(levels).sum::<f64>() / levels as f64
            }),
        }
    }

    /// Backward generating cost function `Σ_{j=0}^{L-1} c_{L-j} z^j`.
    pub fn backward_generating(&self, levels: usize, z: f64) -> Result<f64> {
        if levels == 0 {
            return Err(Error::domain("L must be at least 1"));
        }
        let mut zj = 1.0;
        let mut acc = 0.0;
        for c in self.top_down(levels) {
            acc += c * zj;
            zj *= z;
        }
        Ok(acc)
    }

    /// `ψ(C)`: limiting cost average under the upper-regime weighting.
    pub fn psi(&self, c: f64, rho12: f64) -> Result<f64> {
        check_args(c, rho12)?;
        if c == 0.0 {
            return self.c_star();
        }
        match &self.kind {
            CostKind::Constant(v) => Ok(*v),
            CostKind::Linear { top, bottom } => {
                Ok(bottom + (top - bottom) * upper_kernel(2.0 * c / rho12))
            }
            CostKind::Table { .. } => richardson_limit(TABLE_EVAL_LEVELS, |levels| {
                weighted_average(self, -2.0 * c / rho12, levels)
            }),
        }
    }

    /// `η(C)`: limiting cost average under the lower-regime weighting.
    pub fn eta(&self, c: f64, rho12: f64) -> Result<f64> {
        check_args(c, rho12)?;
        if c == 0.0 {
            return self.c_star();
        }
        match &self.kind {
            CostKind::Constant(v) => Ok(*v),
            CostKind::Linear { top, bottom } => {
                Ok(bottom + (top - bottom) * (1.0 - upper_kernel(2.0 * c / rho12)))
            }
            CostKind::Table { .. } => richardson_limit(TABLE_EVAL_LEVELS, |levels| {
                weighted_average(self, 2.0 * c / rho12, levels)
            }),
        }
    }

    /// Finite-`L` form of `ψ`: `Σ c_{L-j} w^j / Σ w^j` with `w = 1 - 2C/(ρ̃L)`.
    pub fn psi_proxy(&self, c: f64, rho12: f64, levels: usize) -> Result<f64> {
        check_args(c, rho12)?;
        let a = 2.0 * c / rho12;
        if levels == 0 || a >= levels as f64 {
            return Err(Error::domain(format!("ψ proxy needs 2C/ρ̃ < L, got {a} and L = {levels}")));
        }
        Ok(weighted_average(self, -a, levels))
    }

    /// Finite-`L` form of `η`: `Σ c_{L-j} w^j / Σ w^j` with `w = 1 + 2C/(ρ̃L)`.
    pub fn eta_proxy(&self, c: f64, rho12: f64, levels: usize) -> Result<f64> {
        check_args(c, rho12)?;
        if levels == 0 {
            return Err(Error::domain("L must be at least 1"));
        }
        Ok(weighted_average(self, 2.0 * c / rho12, levels))
    }

    /// Finite-`L` cost term of the upper functional written through the
    /// backward generating function; tends to `ψ(C)`.
    pub fn upper_cost_term(&self, c: f64, rho12: f64, levels: usize) -> Result<f64> {
        check_args(c, rho12)?;
        let x = 2.0 * c / rho12;
        if c == 0.0 {
            return Ok(self.backward_generating(levels, 1.0)? / levels as f64);
        }
        let gen = self.backward_generating(levels, 1.0 - x / levels as f64)?;
        Ok(x / (-(-x).exp_m1()) * gen / levels as f64)
    }

    /// Finite-`L` cost term of the lower functional; tends to `η(C)`.
    pub fn lower_cost_term(&self, c: f64, rho12: f64, levels: usize) -> Result<f64> {
        check_args(c, rho12)?;
        let x = 2.0 * c / rho12;
        if c == 0.0 {
            return Ok(self.backward_generating(levels, 1.0)? / levels as f64);
        }
        let gen = self.backward_generating(levels, 1.0 + x / levels as f64)?;
        Ok(x / x.exp_m1() * gen / levels as f64)
    }
}

fn check_args(c: f64, rho12: f64) -> Result<()> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::domain(format!("C must be finite and nonnegative, got {c}")));
    }
    positive("rho12", rho12)?;
    Ok(())
}

/// `1/x - 1/(e^x - 1)`, the weighted mean position (from the top) of the
/// upper-regime weights `e^{-xt}` on `[0, 1]`. The lower regime uses
/// `1 - upper_kernel(x)`.
pub fn upper_kernel(x: f64) -> f64 {
    if x.abs() < SERIES_SWITCH {
        0.5 - x / 12.0 + x.powi(3) / 720.0
    } else {
        1.0 / x - 1.0 / x.exp_m1()
    }
}

/// `Σ_{j<L} c_{L-j} w^j / Σ_{j<L} w^j` with `w = 1 + a/L`. For `a > 0` the
/// weights are generated from the far end so they stay bounded by 1.
fn weighted_average(costs: &CostModel, a: f64, levels: usize) -> f64 {
    let w = 1.0 + a / levels as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    if a <= 0.0 {
        let mut wj = 1.0;
        for c in costs.top_down(levels) {
            num += c * wj;
            den += wj;
            wj *= w;
        }
    } else {
        let inv = 1.0 / w;
        let mut wj = 1.0;
        for j in (0..levels).rev() {
            let c = costs.cost_unchecked(levels - j, levels);
            num += c * wj;
            den += wj;
            wj *= inv;
        }
    }
    num / den
}

/// Richardson-extrapolated limit of an `O(1/L)`-convergent sequence,
/// checked by comparing the extrapolants at `L` and `2L`.
fn richardson_limit(levels: usize, f: impl Fn(usize) -> f64) -> Result<f64> {
    let a = f(levels);
    let b = f(2 * levels);
    let c = f(4 * levels);
    let first = 2.0 * b - a;
    let second = 2.0 * c - b;
    if (first - second).abs() > TABLE_LIMIT_TOL {
        return Err(Error::Convergence(format!(
            "table limit not settled: {first} at L = {levels}, {second} at L = {}",
            2 * levels
        )));
    }
    Ok(second)
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CostKind::Constant(c) => write!(f, "constant:{c}"),
            CostKind::Linear { top, bottom } => write!(f, "linear:{top},{bottom}"),
            CostKind::Table { values, rule } => {
                let list: Vec<String> = values.iter().map(f64::to_string).collect();
                write!(f, "table:{},{rule}", list.join("|"))
            }
        }
    }
}

impl FromStr for CostModel {
    type Err = Error;

    /// Parses `constant:c`, `linear:top,bottom`, `table:file.csv,rule` or an
    /// inline table `table:v1|v2|...,rule`.
    fn from_str(text: &str) -> Result<Self> {
        let (kind, params) = text
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::config(format!("expected kind:params, got '{text}'")))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("invalid number '{}' in '{text}'", s.trim())))
        };
        let wrap = |e: Error| match e {
            Error::Domain(msg) => Error::config(format!("'{text}': {msg}")),
            other => other,
        };
        match kind.trim() {
            "constant" => Self::constant(num(params)?).map_err(wrap),
            "linear" => {
                let (top, bottom) = params
                    .split_once(',')
                    .ok_or_else(|| Error::config(format!("linear needs top,bottom: '{text}'")))?;
                Self::linear(num(top)?, num(bottom)?).map_err(wrap)
            }
            "table" => {
                let (source, rule) = params
                    .rsplit_once(',')
                    .ok_or_else(|| Error::config(format!("table needs source,rule: '{text}'")))?;
                let rule: ExtensionRule = rule.parse()?;
                let inline: Option<Vec<f64>> =
                    source.split('|').map(|s| s.trim().parse::<f64>().ok()).collect();
                match inline {
                    Some(values) => Self::table(values, rule).map_err(wrap),
                    None => Self::table_from_csv(Path::new(source.trim()), rule),
                }
            }
            other => Err(Error::config(format!("unknown cost model '{other}'"))),
        }
    }
}

impl TryFrom<String> for CostModel {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<CostModel> for String {
    fn from(costs: CostModel) -> Self {
        costs.to_string()
    }
}
