//! `damctl` command line: flag and config-file ingestion, subcommand
//! dispatch and CSV/JSON output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::asympt::RegimeParams;
use crate::control::{self, DEFAULT_C_MAX, DEFAULT_TOL};
use crate::costs::CostModel;
use crate::dists::DistributionSpec;
use crate::error::{Error, Result};
use crate::exact::{stationary, DamModelParams};
use crate::sim::{simulate, CountConvention, Estimate, SimConfig};
use crate::validate;

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "DAMCTL_THREADS";
/// Exit code when `validate` completes but a check fails.
pub const EXIT_CHECK_FAILED: i32 = 1;

/// Keys accepted in config files, identical to the long flag names.
pub const KEYS: [&str; 22] = [
    "lambda",
    "b1",
    "b2",
    "L",
    "j1",
    "j2",
    "cost",
    "rho12",
    "rho2",
    "c-max",
    "tol",
    "grid",
    "horizon",
    "warmup",
    "seed",
    "replications",
    "scenario",
    "format",
    "output",
    "renormalize",
    "paper-literal",
    "exclusive-count",
];

const FLAG_KEYS: [&str; 3] = ["renormalize", "paper-literal", "exclusive-count"];

#[derive(Parser, Debug)]
#[command(name = "damctl", version, about = "Optimal output-rate control of a large dam")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact stationary probabilities and objective at finite L
    Exact(Flags),
    /// Heavy-traffic functionals over a grid of C (plot data)
    Asympt(Flags),
    /// Optimal regime and C
    Solve(Flags),
    /// Optimal regime and C over a range of j2
    Sweep(Flags),
    /// Discrete-event simulation
    Simulate(Flags),
    /// Cross-engine consistency checks for a named scenario
    Validate(Flags),
}

#[derive(clap::Args, Debug, Default)]
struct Flags {
    /// key=value file with the same keys as the flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Arrival rate
    #[arg(long)]
    lambda: Option<String>,
    /// Normal service law, e.g. exp:1, erlang:2,2, hyperexp:0.5|0.5;1|3, det:1
    #[arg(long)]
    b1: Option<String>,
    /// Overflow service law
    #[arg(long)]
    b2: Option<String>,
    /// Upper threshold (number of levels)
    #[arg(long = "L")]
    levels: Option<String>,
    #[arg(long)]
    j1: Option<String>,
    /// Penalty coefficient; `sweep` takes start:stop:step or a comma list
    #[arg(long)]
    j2: Option<String>,
    /// constant:c | linear:top,bottom | table:file.csv,rule
    #[arg(long)]
    cost: Option<String>,
    /// Limit of λ²E[X²] for the normal service family
    #[arg(long)]
    rho12: Option<String>,
    /// Load of the overflow service
    #[arg(long)]
    rho2: Option<String>,
    #[arg(long = "c-max")]
    c_max: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// C grid for `asympt`: start:stop:step or a comma list
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    warmup: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Output file (stdout when absent)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Divide the exact probabilities by their sum
    #[arg(long)]
    renormalize: bool,
    /// Evaluate the lower functional in its literal printed form
    #[arg(long = "paper-literal")]
    paper_literal: bool,
    /// Compare the level without the unit entering service
    #[arg(long = "exclusive-count")]
    exclusive_count: bool,
}

impl Flags {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let text = [
            ("lambda", &self.lambda),
            ("b1", &self.b1),
            ("b2", &self.b2),
            ("L", &self.levels),
            ("j1", &self.j1),
            ("j2", &self.j2),
            ("cost", &self.cost),
            ("rho12", &self.rho12),
            ("rho2", &self.rho2),
            ("c-max", &self.c_max),
            ("tol", &self.tol),
            ("grid", &self.grid),
            ("horizon", &self.horizon),
            ("warmup", &self.warmup),
            ("seed", &self.seed),
            ("replications", &self.replications),
            ("scenario", &self.scenario),
            ("format", &self.format),
        ];
        for (key, value) in text {
            if let Some(v) = value {
                out.push((key, v.clone()));
            }
        }
        if let Some(path) = &self.output {
            out.push(("output", path.display().to_string()));
        }
        for (key, on) in [
            ("renormalize", self.renormalize),
            ("paper-literal", self.paper_literal),
            ("exclusive-count", self.exclusive_count),
        ] {
            if on {
                out.push((key, "true".into()));
            }
        }
        out
    }
}

/// Merged run settings: config file entries overridden by flags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("{origin}:{}: expected key=value, got '{line}'", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::config(format!("{origin}:{}: {}", n + 1, strip(e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::config(format!("unknown key '{key}'")));
        }
        if FLAG_KEYS.contains(&key) {
            parse_bool(key, value)?;
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::config(format!("missing required field '{key}'")))
    }

    fn number<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::config(format!("field '{key}': invalid value '{v}'"))))
            .transpose()
    }

    fn required_number<T: FromStr>(&self, key: &str) -> Result<T> {
        self.require(key)?;
        Ok(self.number(key)?.expect("checked above"))
    }

    fn parsed<T: FromStr<Err = Error>>(&self, key: &str) -> Result<T> {
        self.require(key)?
            .parse::<T>()
            .map_err(|e| Error::config(format!("field '{key}': {}", strip(e))))
    }

    fn flag(&self, key: &str) -> bool {
        self.get(key).map(|v| parse_bool(key, v).unwrap_or(false)).unwrap_or(false)
    }

    pub fn model(&self) -> Result<DamModelParams> {
        DamModelParams::new(
            self.required_number("lambda")?,
            self.parsed("b1")?,
            self.parsed("b2")?,
            self.required_number("L")?,
            self.required_number("j1")?,
            self.required_number("j2")?,
        )
    }

    pub fn costs(&self) -> Result<CostModel> {
        self.parsed("cost")
    }

    /// Regime parameters; `rho12` and `rho2` may be derived from the
    /// service laws (and `lambda` for `rho2`).
    pub fn regime_params(&self, j2: Option<f64>) -> Result<RegimeParams> {
        let rho12 = match self.number::<f64>("rho12")? {
            Some(v) => v,
            None => match self.get("b1") {
                Some(_) => self.parsed::<DistributionSpec>("b1")?.normalized_second_moment(),
                None => return Err(Error::config("missing required field 'rho12' (or 'b1')")),
            },
        };
        let rho2 = match self.number::<f64>("rho2")? {
            Some(v) => v,
            None => match (self.get("b2"), self.number::<f64>("lambda")?) {
                (Some(_), Some(lambda)) => self.parsed::<DistributionSpec>("b2")?.traffic_intensity(lambda)?,
                _ => return Err(Error::config("missing required field 'rho2' (or 'b2' with 'lambda')")),
            },
        };
        let j2 = match j2 {
            Some(v) => v,
            None => self.required_number("j2")?,
        };
        RegimeParams::new(self.required_number("j1")?, j2, rho2, rho12, self.costs()?).map_err(as_config)
    }

    fn c_max_tol(&self) -> Result<(f64, f64)> {
        Ok((
            self.number("c-max")?.unwrap_or(DEFAULT_C_MAX),
            self.number("tol")?.unwrap_or(DEFAULT_TOL),
        ))
    }

    fn format(&self, default: Format) -> Result<Format> {
        match self.get("format") {
            None => Ok(default),
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            Some(other) => Err(Error::config(format!("field 'format': expected csv or json, got '{other}'"))),
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, value) in &self.entries {
            writeln!(f, "{key}={value}")?;
        }
        Ok(())
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::config(format!("field '{key}': expected true or false, got '{other}'"))),
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(msg) | Error::Domain(msg) => msg,
        other => other.to_string(),
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(msg) => Error::Config(msg),
        other => other,
    }
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_values(key: &str, text: &str) -> Result<Vec<f64>> {
    let bad = || Error::config(format!("field '{key}': expected start:stop:step or a list, got '{text}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| round_grid(start + k as f64 * step)).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn round_grid(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Formats with 10 significant digits, `.` as decimal separator.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.9e}")
    }
}

/// Tabular CSV document with a fixed header.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Convergence(format!("csv encoding: {e}"));
        writer.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            writer.write_record(row).map_err(csv_err)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Convergence(format!("csv encoding: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn json_document(command: &str, body: serde_json::Value) -> String {
    let mut doc = json!({ "schema_version": SCHEMA_VERSION, "command": command });
    if let (Some(doc), serde_json::Value::Object(body)) = (doc.as_object_mut(), body) {
        doc.extend(body);
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    text.push('\n');
    text
}

fn to_value<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).expect("json values serialize")
}

fn cmd_exact(cfg: &RunConfig) -> Result<String> {
    let model = cfg.model()?;
    let costs = cfg.costs()?;
    let mut st = stationary(&model)?;
    let raw_defect = st.defect;
    if cfg.flag("renormalize") {
        st = st.renormalized();
    }
    let objective = st.objective(&model, &costs)?;
    match cfg.format(Format::Csv)? {
        Format::Json => Ok(json_document(
            "exact",
            json!({
                "renormalized": cfg.flag("renormalize"),
                "p1": st.p1,
                "p2": st.p2,
                "q": st.q,
                "defect": raw_defect,
                "objective": objective,
            }),
        )),
        Format::Csv => {
            let mut t = Table::new(&["name", "value"]);
            for (name, v) in [("p1", st.p1), ("p2", st.p2), ("defect", raw_defect), ("objective", objective)] {
                t.push(vec![name.into(), fmt_num(v)]);
            }
            for (i, q) in st.q.iter().enumerate() {
                t.push(vec![format!("q{}", i + 1), fmt_num(*q)]);
            }
            t.render()
        }
    }
}

fn cmd_asympt(cfg: &RunConfig) -> Result<String> {
    let p = cfg.regime_params(None)?;
    let grid = parse_values("grid", cfg.get("grid").unwrap_or("0:2:0.1"))?;
    let literal = cfg.flag("paper-literal");
    let mut points = Vec::with_capacity(grid.len());
    for &c in &grid {
        let lower = if literal { p.j_lower_paper_literal(c)? } else { p.j_lower(c)? };
        points.push((c, p.j_upper(c)?, lower));
    }
    match cfg.format(Format::Csv)? {
        Format::Json => Ok(json_document(
            "asympt",
            json!({
                "balanced_limit": p.balanced_limit(),
                "paper_literal": literal,
                "points": points.iter().map(|(c, u, l)| json!({"C": c, "j_upper": u, "j_lower": l})).collect::<Vec<_>>(),
            }),
        )),
        Format::Csv => {
            let mut t = Table::new(&["C", "j_upper", "j_lower"]);
            for (c, u, l) in points {
                t.push(vec![fmt_num(c), fmt_num(u), fmt_num(l)]);
            }
            t.render()
        }
    }
}

fn cmd_solve(cfg: &RunConfig) -> Result<String> {
    let p = cfg.regime_params(None)?;
    let (c_max, tol) = cfg.c_max_tol()?;
    let s = control::solve(&p, c_max, tol)?;
    match cfg.format(Format::Json)? {
        Format::Json => Ok(json_document(
            "solve",
            json!({
                "regime": s.regime.name(),
                "C": s.regime.c(),
                "objective": s.objective,
                "upper_min": to_value(&s.upper_min),
                "lower_min": to_value(&s.lower_min),
                "balanced_value": s.balanced_value,
                "upper_slope": s.upper_slope,
                "lower_slope": s.lower_slope,
            }),
        )),
        Format::Csv => {
            let mut t = Table::new(&[
                "regime",
                "C",
                "objective",
                "upper_C",
                "upper_value",
                "lower_C",
                "lower_value",
                "balanced_value",
            ]);
            t.push(vec![
                s.regime.name().into(),
                fmt_num(s.regime.c()),
                fmt_num(s.objective),
                fmt_num(s.upper_min.c),
                fmt_num(s.upper_min.value),
                fmt_num(s.lower_min.c),
                fmt_num(s.lower_min.value),
                fmt_num(s.balanced_value),
            ]);
            t.render()
        }
    }
}

fn cmd_sweep(cfg: &RunConfig) -> Result<String> {
    let values = parse_values("j2", cfg.require("j2")?)?;
    let template = cfg.regime_params(Some(values[0]))?;
    let (c_max, tol) = cfg.c_max_tol()?;
    let rows = control::sweep_j2(&template, &values, c_max, tol)?;
    match cfg.format(Format::Csv)? {
        Format::Json => Ok(json_document(
            "sweep",
            json!({
                "rows": rows
                    .iter()
                    .map(|r| json!({"j2": r.j2, "regime": r.regime.name(), "C": r.c, "objective": r.objective}))
                    .collect::<Vec<_>>(),
            }),
        )),
        Format::Csv => {
            let mut t = Table::new(&["j2", "regime", "C", "objective"]);
            for r in rows {
                t.push(vec![fmt_num(r.j2), r.regime.name().into(), fmt_num(r.c), fmt_num(r.objective)]);
            }
            t.render()
        }
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<String> {
    let model = cfg.model()?;
    let mut sim = SimConfig::new(
        model,
        cfg.costs()?,
        cfg.required_number("horizon")?,
        cfg.number("warmup")?.unwrap_or(0.0),
        cfg.number("seed")?.unwrap_or(1),
        cfg.number("replications")?.unwrap_or(8),
    )?;
    if cfg.flag("exclusive-count") {
        sim = sim.with_convention(CountConvention::Exclusive);
    }
    let est = simulate(&sim)?;
    match cfg.format(Format::Csv)? {
        Format::Json => Ok(json_document(
            "simulate",
            json!({
                "convention": to_value(&sim.convention),
                "seed": sim.seed,
                "estimate": to_value(&est),
            }),
        )),
        Format::Csv => {
            let mut t = Table::new(&["name", "mean", "se"]);
            let mut row = |name: String, e: &Estimate| t.push(vec![name, fmt_num(e.mean), fmt_num(e.se)]);
            row("p1".into(), &est.p1);
            row("p2".into(), &est.p2);
            row("objective".into(), &est.objective);
            for (i, q) in est.q.iter().enumerate() {
                row(format!("q{}", i + 1), q);
            }
            t.render()
        }
    }
}

fn cmd_validate(cfg: &RunConfig) -> Result<(String, bool)> {
    let checks = validate::run(cfg.get("scenario").unwrap_or("all"))?;
    let ok = checks.iter().all(|c| c.passed);
    let text = match cfg.format(Format::Csv)? {
        Format::Json => json_document("validate", json!({ "passed": ok, "checks": to_value(&checks) })),
        Format::Csv => {
            let mut t = Table::new(&["scenario", "check", "status", "detail"]);
            for c in &checks {
                let status = if c.passed { "pass" } else { "fail" };
                t.push(vec![c.scenario.clone(), c.name.clone(), status.into(), c.detail.clone()]);
            }
            t.render()?
        }
    };
    Ok((text, ok))
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::config(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    // a pool configured earlier in the same process is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: Command) -> Result<(Option<PathBuf>, String, bool)> {
    let (name, flags) = match command {
        Command::Exact(f) => ("exact", f),
        Command::Asympt(f) => ("asympt", f),
        Command::Solve(f) => ("solve", f),
        Command::Sweep(f) => ("sweep", f),
        Command::Simulate(f) => ("simulate", f),
        Command::Validate(f) => ("validate", f),
    };
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for (key, value) in flags.entries() {
        cfg.set(key, &value)?;
    }
    configure_threads()?;
    let (text, ok) = match name {
        "exact" => (cmd_exact(&cfg)?, true),
        "asympt" => (cmd_asympt(&cfg)?, true),
        "solve" => (cmd_solve(&cfg)?, true),
        "sweep" => (cmd_sweep(&cfg)?, true),
        "simulate" => (cmd_simulate(&cfg)?, true),
        _ => cmd_validate(&cfg)?,
    };
    Ok((cfg.get("output").map(PathBuf::from), text, ok))
}

/// Runs `damctl` with `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command) {
        Ok((path, text, ok)) => {
            let written = match &path {
                Some(path) => fs::write(path, &text).map_err(|source| Error::Io { path: path.clone(), source }),
                None => stdout.write_all(text.as_bytes()).map_err(|source| Error::Io { path: "<stdout>".into(), source }),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "damctl: {e}");
                return e.exit_code();
            }
            if ok {
                0
            } else {
                let _ = writeln!(stderr, "damctl: validation checks failed");
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "damctl: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.2), "0.2000000000");
        assert_eq!(fmt_num(2.516452), "2.516452000");
        assert_eq!(fmt_num(1234.5), "1234.500000");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.5e-7), "1.500000000e-7");
        assert_eq!(fmt_num(f64::NAN), "NaN");
    }

    #[test]
    fn value_lists() {
        let v = parse_values("j2", "1.06:1.34:0.01").unwrap();
        assert_eq!(v.len(), 29);
        assert_eq!(v[0], 1.06);
        assert_eq!(v[28], 1.34);
        assert_eq!(parse_values("j2", "1.1,1.2").unwrap(), vec![1.1, 1.2]);
        assert_eq!(parse_values("grid", "0:2:0.1").unwrap().len(), 21);
        assert!(parse_values("j2", "1:0:0.1").is_err());
        assert!(parse_values("j2", "a:b").is_err());
    }

    #[test]
    fn config_round_trip_is_idempotent() {
        let text = "# example run\nlambda = 1\nb1=exp:1\n\ncost=linear:2,1\nrenormalize=true\nL=5\n";
        let cfg = RunConfig::parse(text, "test").unwrap();
        let once = cfg.to_string();
        let twice = RunConfig::parse(&once, "test").unwrap().to_string();
        assert_eq!(once, twice);
        assert_eq!(cfg.get("L"), Some("5"));
    }

    #[test]
    fn config_errors_name_line_and_field() {
        let err = RunConfig::parse("lambda=1\nbogus=3\n", "run.cfg").unwrap_err();
        assert!(err.to_string().contains("run.cfg:2"), "{err}");
        let err = RunConfig::parse("lambda 1\n", "run.cfg").unwrap_err();
        assert!(err.to_string().contains("run.cfg:1"), "{err}");
        let cfg = RunConfig::parse("lambda=abc\nb1=exp:1\nb2=exp:2\nL=3\nj1=1\nj2=1\n", "x").unwrap();
        let err = cfg.model().unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("lambda")), "{err}");
    }

    #[test]
    fn derived_regime_parameters() {
        let cfg = RunConfig::parse("lambda=1\nb1=erlang:2,2\nb2=exp:4\nj1=1\nj2=1\ncost=constant:1\n", "x").unwrap();
        let p = cfg.regime_params(None).unwrap();
        assert!((p.rho12() - 1.5).abs() < 1e-12);
        assert!((p.rho2() - 0.25).abs() < 1e-12);
    }
}
