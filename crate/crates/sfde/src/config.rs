//! Run configuration.
//!
//! Configurations are TOML documents with the sections `market`,
//! `simulation`, `drift`, `vol`, `initial_path`, `pricing`, `hedge`,
//! `converge` and `check`. Parsing is total: every violation found is
//! reported, unknown keys are named, and nothing runs on an invalid
//! configuration. A `[manifest]` table is ignored so that manifests can be
//! fed back as configurations.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sfde_core::diagnostics::HolderInitialPath;
use sfde_core::functionals::FunctionalKind;
use sfde_core::path::steps_in;
use sfde_core::pricing::{OptionKind, PricingMethod};
use sfde_core::{
    FunctionalSpec, HistorySegment, InitialPath, MarketConfig, Measure, PathRecord,
    SimulationConfig,
};
use toml::{Table, Value};

use crate::io::{read_initial_path, read_path};
use crate::manifest::{sha256_hex, toml_float, toml_string, toml_u64};

pub const DEFAULT_REPLICATES: usize = 10_000;
/// Default `dt` is the gap divided by this.
pub const DEFAULT_STEPS_PER_GAP: usize = 16;
pub const DEFAULT_VOL_FLOOR: f64 = 0.01;
pub const DEFAULT_VOL_CAP: f64 = 10.0;
pub const DEFAULT_K_VALUES: [usize; 4] = [2, 4, 8, 16];
pub const DEFAULT_BETA: f64 = 0.4;
pub const DEFAULT_HOLDER_LOG_SCALE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Price,
    Converge,
    Hedge,
    Check,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Price => "price",
            Command::Converge => "converge",
            Command::Hedge => "hedge",
            Command::Check => "check",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "simulate" => Command::Simulate,
            "price" => Command::Price,
            "converge" => Command::Converge,
            "hedge" => Command::Hedge,
            "check" => Command::Check,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSource {
    Constant { level: f64 },
    /// Samples on a uniform grid over `[-L, 0]`, given inline or read from a
    /// CSV file.
    Values(Vec<f64>),
    Holder(HolderInitialPath),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Closed form when the volatility has no memory or `t >= T - l`,
    /// nested Monte Carlo otherwise.
    Auto,
    Fixed(PricingMethod),
}

impl MethodChoice {
    pub fn name(&self) -> &'static str {
        match self {
            MethodChoice::Auto => "auto",
            MethodChoice::Fixed(PricingMethod::NestedH) => "nested",
            MethodChoice::Fixed(m) => m.name(),
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "auto" => MethodChoice::Auto,
            "closed_form" => MethodChoice::Fixed(PricingMethod::ClosedForm),
            "nested" | "nested_h" => MethodChoice::Fixed(PricingMethod::NestedH),
            "full_memory_mc" => MethodChoice::Fixed(PricingMethod::FullMemoryMc),
            "gap_mc" => MethodChoice::Fixed(PricingMethod::GapMc),
            "black_scholes" => MethodChoice::Fixed(PricingMethod::BlackScholes),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingSection {
    pub t: f64,
    pub method: MethodChoice,
    /// Realized path up to `t`, as written by `simulate`.
    pub prefix_file: Option<String>,
    pub prefix: Option<PathRecord>,
    pub prefix_sha256: Option<String>,
    pub approx_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeSection {
    pub rebalance_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSection {
    pub k_values: Vec<usize>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSection {
    /// When set, `check` also runs the moment-bound comparison across `k`.
    pub k_values: Option<Vec<usize>>,
    pub gamma: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub market: MarketConfig,
    pub simulation: SimulationConfig,
    /// Brownian stream used by `simulate`.
    pub stream: u64,
    /// `simulate` draws the `k`-th gap-closing path instead of gap `l`.
    pub sequence_k: Option<usize>,
    pub drift: FunctionalSpec,
    pub vol: FunctionalSpec,
    pub initial_source: InitialSource,
    /// Initial path sampled at `dt`.
    pub initial: InitialPath,
    pub pricing: PricingSection,
    pub hedge: HedgeSection,
    pub converge: ConvergeSection,
    pub check: CheckSection,
    pub output: Option<PathBuf>,
}

/// Every violation found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub antithetic: bool,
    pub output: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, Path::new("."), &Overrides::default())
}

/// Parses `text`, resolving relative file references against `base_dir`.
pub fn parse_config_with(
    text: &str,
    base_dir: &Path,
    overrides: &Overrides,
) -> Result<RunConfig, ConfigError> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        violations: vec![format!("malformed configuration: {}", e.message())],
    })?;
    let mut cx = Cx {
        errors: Vec::new(),
        base_dir,
    };
    let cfg = cx.run_config(&doc, overrides);
    match cfg {
        Some(cfg) if cx.errors.is_empty() => Ok(cfg),
        _ => {
            if cx.errors.is_empty() {
                cx.errors.push("invalid configuration".into());
            }
            Err(ConfigError {
                violations: cx.errors,
            })
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

fn divides(span: f64, dt: f64) -> bool {
    matches!(steps_in(span, dt), Some(n) if n >= 1)
}

/// `1/k` is at least one step and a whole number of steps.
pub fn k_feasible(k: usize, dt: f64) -> bool {
    k >= 1 && divides(1.0 / k as f64, dt)
}

struct Cx<'a> {
    errors: Vec<String>,
    base_dir: &'a Path,
}

impl Cx<'_> {
    fn err(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn unknown(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(format!("unknown key `{}`", join(path, k)));
            }
        }
    }

    fn table<'t>(&mut self, t: &'t Table, path: &str, key: &str) -> Option<&'t Table> {
        match t.get(key) {
            None => None,
            Some(Value::Table(inner)) => Some(inner),
            Some(_) => {
                self.err(format!("`{}` must be a table", join(path, key)));
                None
            }
        }
    }

    fn num(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        match t.get(key) {
            None => None,
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.err(format!("{} must be a number", join(path, key)));
                None
            }
        }
    }

    fn req_num(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.err(format!("missing {}", join(path, key)));
            return None;
        }
        self.num(t, path, key)
    }

    fn uint(&mut self, t: &Table, path: &str, key: &str) -> Option<u64> {
        let bad = |cx: &mut Self| cx.err(format!("{} must be a non-negative integer", join(path, key)));
        match t.get(key) {
            None => None,
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(Value::String(s)) => match s.parse::<u64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    bad(self);
                    None
                }
            },
            Some(_) => {
                bad(self);
                None
            }
        }
    }

    fn boolean(&mut self, t: &Table, path: &str, key: &str) -> Option<bool> {
        match t.get(key) {
            None => None,
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.err(format!("{} must be true or false", join(path, key)));
                None
            }
        }
    }

    fn string<'t>(&mut self, t: &'t Table, path: &str, key: &str) -> Option<&'t str> {
        match t.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.err(format!("{} must be a string", join(path, key)));
                None
            }
        }
    }

    fn num_array(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<f64>> {
        let arr = match t.get(key) {
            None => return None,
            Some(Value::Array(a)) => a,
            Some(_) => {
                self.err(format!("{} must be an array of numbers", join(path, key)));
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    self.err(format!("{} must be an array of numbers", join(path, key)));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn uint_array(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<usize>> {
        let arr = match t.get(key) {
            None => return None,
            Some(Value::Array(a)) => a,
            Some(_) => {
                self.err(format!("{} must be an array of integers", join(path, key)));
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::Integer(i) if *i >= 1 => out.push(*i as usize),
                _ => {
                    self.err(format!("{} must hold positive integers", join(path, key)));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn positive(&mut self, value: Option<f64>, name: &str) -> Option<f64> {
        match value {
            Some(v) if v.is_finite() && v > 0.0 => Some(v),
            Some(_) => {
                self.err(format!("{name} must be positive"));
                None
            }
            None => None,
        }
    }

    fn run_config(&mut self, doc: &Table, ov: &Overrides) -> Option<RunConfig> {
        self.unknown(
            doc,
            "",
            &[
                "command",
                "output",
                "market",
                "simulation",
                "drift",
                "vol",
                "initial_path",
                "pricing",
                "hedge",
                "converge",
                "check",
                "manifest",
            ],
        );
        let command = match ov.command {
            Some(c) => Some(c),
            None => self.string(doc, "", "command").and_then(|name| {
                let c = Command::from_name(name);
                if c.is_none() {
                    self.err(format!("unknown command `{name}`"));
                }
                c
            }),
        };
        let output = ov
            .output
            .clone()
            .or_else(|| self.string(doc, "", "output").map(PathBuf::from));

        let empty = Table::new();
        let market_t = self.section(doc, "market", true).unwrap_or(&empty);
        let market = self.market(market_t);
        let sim_t = self.section(doc, "simulation", true).unwrap_or(&empty);
        let sim = self.simulation(sim_t, market.as_ref(), ov);
        let window = sim.as_ref().map(|s| s.0.window);
        let dt = sim.as_ref().map(|s| s.0.dt);

        let drift = self
            .section(doc, "drift", true)
            .and_then(|t| self.functional(t, "drift", window, dt));
        let vol = self
            .section(doc, "vol", true)
            .and_then(|t| self.functional(t, "vol", window, dt));
        if let Some(v) = &vol {
            if v.require_positive_vol().is_err() {
                self.err("vol must be bounded below by a positive constant");
            }
        }
        let initial = self
            .section(doc, "initial_path", true)
            .and_then(|t| self.initial_path(t, window, dt));

        let (pricing, hedge, converge, check) = match (&sim, &market) {
            (Some((s, _, _)), Some(m)) => {
                let pricing_t = self.section(doc, "pricing", false).unwrap_or(&empty);
                let hedge_t = self.section(doc, "hedge", false).unwrap_or(&empty);
                let converge_t = self.section(doc, "converge", false).unwrap_or(&empty);
                let check_t = self.section(doc, "check", false).unwrap_or(&empty);
                let holder_beta = match &initial {
                    Some((InitialSource::Holder(h), _)) => Some(h.beta),
                    _ => None,
                };
                (
                    self.pricing(pricing_t, s, m),
                    self.hedge(hedge_t, s),
                    self.converge(converge_t, holder_beta),
                    self.check(check_t),
                )
            }
            _ => (None, None, None, None),
        };

        let (simulation, stream, sequence_k) = sim?;
        let (initial_source, initial) = initial?;
        Some(RunConfig {
            command,
            market: market?,
            simulation,
            stream,
            sequence_k,
            drift: drift?,
            vol: vol?,
            initial_source,
            initial,
            pricing: pricing?,
            hedge: hedge?,
            converge: converge?,
            check: check?,
            output,
        })
    }

    fn section<'t>(&mut self, doc: &'t Table, key: &str, required: bool) -> Option<&'t Table> {
        if required && !doc.contains_key(key) {
            self.err(format!("missing section [{key}]"));
            return None;
        }
        self.table(doc, "", key)
    }

    fn market(&mut self, t: &Table) -> Option<MarketConfig> {
        let p = "market";
        self.unknown(t, p, &["rate", "strike", "maturity", "kind"]);
        let rate = self.req_num(t, p, "rate");
        if matches!(rate, Some(r) if !(r.is_finite() && r >= 0.0)) {
            self.err("market.rate must be non-negative");
        }
        let strike = self.req_num(t, p, "strike");
        let strike = self.positive(strike, "market.strike");
        let maturity = self.req_num(t, p, "maturity");
        let maturity = self.positive(maturity, "market.maturity");
        let kind = match self.string(t, p, "kind") {
            None | Some("call") => Some(OptionKind::Call),
            Some("put") => Some(OptionKind::Put),
            Some(other) => {
                self.err(format!("market.kind must be `call` or `put`, found `{other}`"));
                None
            }
        };
        let rate = rate.filter(|r| r.is_finite() && *r >= 0.0)?;
        Some(MarketConfig {
            rate,
            strike: strike?,
            maturity: maturity?,
            kind: kind?,
        })
    }

    fn simulation(
        &mut self,
        t: &Table,
        market: Option<&MarketConfig>,
        ov: &Overrides,
    ) -> Option<(SimulationConfig, u64, Option<usize>)> {
        let p = "simulation";
        let reported = self.errors.len();
        self.unknown(
            t,
            p,
            &[
                "horizon",
                "gap",
                "window",
                "dt",
                "measure",
                "seed",
                "stream",
                "replicates",
                "antithetic",
                "k",
            ],
        );
        let gap = self.req_num(t, p, "gap");
        let gap = self.positive(gap, "simulation.gap");
        let window = self.req_num(t, p, "window");
        let window = self.positive(window, "simulation.window");
        let horizon = match self.num(t, p, "horizon") {
            Some(h) => self.positive(Some(h), "simulation.horizon"),
            None => market.map(|m| m.maturity),
        };
        let dt = match self.num(t, p, "dt") {
            Some(d) => self.positive(Some(d), "simulation.dt"),
            None => gap.map(|g| g / DEFAULT_STEPS_PER_GAP as f64),
        };
        if let Some(dt) = dt {
            for (name, span) in [("gap", gap), ("window", window), ("horizon", horizon)] {
                if let Some(span) = span {
                    if !divides(span, dt) {
                        self.err(format!(
                            "simulation.dt = {dt} does not divide simulation.{name} = {span}"
                        ));
                    }
                }
            }
        }
        let measure = match self.string(t, p, "measure") {
            None | Some("P") | Some("p") => Some(Measure::Physical),
            Some("Q") | Some("q") => market.map(|m| Measure::RiskNeutral { rate: m.rate }),
            Some(other) => {
                self.err(format!("simulation.measure must be `P` or `Q`, found `{other}`"));
                None
            }
        };
        let seed = ov.seed.or_else(|| self.uint(t, p, "seed")).unwrap_or(0);
        let stream = self.uint(t, p, "stream").unwrap_or(0);
        let replicates = match ov.replicates {
            Some(r) => Some(r as u64),
            None => self.uint(t, p, "replicates"),
        }
        .unwrap_or(DEFAULT_REPLICATES as u64);
        if replicates == 0 {
            self.err("simulation.replicates must be at least 1");
        }
        let antithetic = ov.antithetic || self.boolean(t, p, "antithetic").unwrap_or(false);
        let k = self.uint(t, p, "k").map(|k| k as usize);
        if let (Some(k), Some(dt)) = (k, dt) {
            if !k_feasible(k, dt) {
                self.err(format!("simulation.k = {k}: 1/k must be a positive multiple of dt"));
            }
        }
        let cfg = SimulationConfig {
            horizon: horizon?,
            gap: gap?,
            window: window?,
            dt: dt?,
            measure: measure?,
            seed,
            replicates: replicates as usize,
            antithetic,
        };
        if let Err(e) = cfg.validate() {
            if self.errors.len() == reported {
                self.err(format!("simulation: {e}"));
            }
            return None;
        }
        Some((cfg, stream, k))
    }

    fn functional(
        &mut self,
        t: &Table,
        path: &str,
        window: Option<f64>,
        dt: Option<f64>,
    ) -> Option<FunctionalSpec> {
        let kind = match self.string(t, path, "kind") {
            Some(k) => k.to_owned(),
            None => {
                self.err(format!("missing {path}.kind"));
                return None;
            }
        };
        let meta = ["kind", "bounds", "lipschitz"];
        let spec = match kind.as_str() {
            "constant" => {
                self.unknown(t, path, &[&meta[..], &["value"]].concat());
                let v = self.req_num(t, path, "value")?;
                FunctionalSpec::constant(v).ok()
            }
            "moving_average" => {
                self.unknown(t, path, &[&meta[..], &["window"]].concat());
                let w = self.functional_window(t, path, window, dt)?;
                FunctionalSpec::moving_average(w).ok()
            }
            "realized_vol" => {
                self.unknown(t, path, &[&meta[..], &["window", "floor", "cap"]].concat());
                let w = self.functional_window(t, path, window, dt);
                let floor = self.num(t, path, "floor").unwrap_or(DEFAULT_VOL_FLOOR);
                let cap = self.num(t, path, "cap").unwrap_or(DEFAULT_VOL_CAP);
                if !(floor > 0.0 && floor < cap && cap.is_finite()) {
                    self.err(format!("{path} needs 0 < floor < cap"));
                    return None;
                }
                FunctionalSpec::realized_vol(w?, floor, cap).ok()
            }
            "affine" => {
                self.unknown(t, path, &[&meta[..], &["scale", "shift", "inner"]].concat());
                let scale = self.req_num(t, path, "scale");
                let shift = self.num(t, path, "shift").unwrap_or(0.0);
                let inner_path = join(path, "inner");
                let inner = match self.table(t, path, "inner") {
                    Some(inner) => self.functional(inner, &inner_path, window, dt),
                    None => {
                        self.err(format!("missing {inner_path}"));
                        None
                    }
                };
                FunctionalSpec::affine(inner?, scale?, shift).ok()
            }
            other => {
                self.err(format!(
                    "{path}.kind must be one of constant, moving_average, realized_vol, affine; found `{other}`"
                ));
                return None;
            }
        };
        let mut spec = match spec {
            Some(s) => s,
            None => {
                self.err(format!("{path}: parameters must be finite"));
                return None;
            }
        };
        if let Some(b) = self.num_array(t, path, "bounds") {
            match (b.len(), spec.clone().with_bounds(b[0], *b.get(1).unwrap_or(&f64::NAN))) {
                (2, Ok(s)) => spec = s,
                _ => self.err(format!("{path}.bounds must be [lower, upper] with lower <= upper")),
            }
        }
        if let Some(a) = self.num(t, path, "lipschitz") {
            match spec.clone().with_lipschitz(a) {
                Ok(s) => spec = s,
                Err(_) => self.err(format!("{path}.lipschitz must be non-negative")),
            }
        }
        Some(spec)
    }

    fn functional_window(
        &mut self,
        t: &Table,
        path: &str,
        window: Option<f64>,
        dt: Option<f64>,
    ) -> Option<f64> {
        let w = match self.num(t, path, "window") {
            Some(w) => self.positive(Some(w), &join(path, "window"))?,
            None => window?,
        };
        if let (Some(window), Some(dt)) = (window, dt) {
            if steps_in(w, dt) != steps_in(window, dt) || steps_in(w, dt).is_none() {
                self.err(format!("{path}.window must equal simulation.window"));
                return None;
            }
        }
        Some(w)
    }

    fn initial_path(
        &mut self,
        t: &Table,
        window: Option<f64>,
        dt: Option<f64>,
    ) -> Option<(InitialSource, InitialPath)> {
        let p = "initial_path";
        let kind = self.string(t, p, "kind").unwrap_or("constant").to_owned();
        let source = match kind.as_str() {
            "constant" => {
                self.unknown(t, p, &["kind", "level"]);
                let level = self.req_num(t, p, "level");
                InitialSource::Constant {
                    level: self.positive(level, "initial_path.level")?,
                }
            }
            "values" => {
                self.unknown(t, p, &["kind", "values"]);
                let values = match self.num_array(t, p, "values") {
                    Some(v) => v,
                    None => {
                        self.err("missing initial_path.values");
                        return None;
                    }
                };
                if values.len() < 2 {
                    self.err("initial_path.values needs at least two samples");
                    return None;
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    self.err("initial_path.values must be strictly positive");
                    return None;
                }
                InitialSource::Values(values)
            }
            "file" => {
                self.unknown(t, p, &["kind", "path"]);
                let file = match self.string(t, p, "path") {
                    Some(f) => self.base_dir.join(f),
                    None => {
                        self.err("missing initial_path.path");
                        return None;
                    }
                };
                let text = match fs::read(&file) {
                    Ok(t) => t,
                    Err(e) => {
                        self.err(format!("initial_path.path `{}`: {e}", file.display()));
                        return None;
                    }
                };
                InitialSource::Values(self.file_samples(&text, window?, &file)?)
            }
            "holder" => {
                self.unknown(t, p, &["kind", "beta", "seed", "level", "log_scale"]);
                let beta = self.req_num(t, p, "beta");
                let seed = self.uint(t, p, "seed").unwrap_or(0);
                let level = self.req_num(t, p, "level");
                let level = self.positive(level, "initial_path.level");
                let log_scale = self.num(t, p, "log_scale").unwrap_or(DEFAULT_HOLDER_LOG_SCALE);
                if matches!(beta, Some(b) if !(b > 0.0 && b < 0.5)) {
                    self.err("initial_path.beta must lie in (0, 1/2)");
                    return None;
                }
                let holder = HolderInitialPath::new(beta?, seed, window?, level?).ok()?;
                InitialSource::Holder(holder.with_log_scale(log_scale))
            }
            other => {
                self.err(format!(
                    "initial_path.kind must be one of constant, values, file, holder; found `{other}`"
                ));
                return None;
            }
        };
        let (window, dt) = (window?, dt?);
        match build_initial(&source, window, dt) {
            Ok(theta) => Some((source, theta)),
            Err(e) => {
                self.err(format!("initial_path: {e}"));
                None
            }
        }
    }

    fn file_samples(&mut self, text: &[u8], window: f64, file: &Path) -> Option<Vec<f64>> {
        match crate::io::read_columns(text, ["offset", "price"]) {
            Ok(rows) if rows.len() < 2 => {
                self.err(format!("initial_path.path `{}`: need at least two rows", file.display()));
                None
            }
            Ok(rows) => {
                let n = rows.len() - 1;
                match read_initial_path(text, window, window / n as f64) {
                    Ok(theta) => Some(theta.values().to_vec()),
                    Err(e) => {
                        self.err(format!("initial_path.path `{}`: {e}", file.display()));
                        None
                    }
                }
            }
            Err(e) => {
                self.err(format!("initial_path.path `{}`: {e}", file.display()));
                None
            }
        }
    }

    fn pricing(&mut self, t: &Table, sim: &SimulationConfig, mkt: &MarketConfig) -> Option<PricingSection> {
        let p = "pricing";
        self.unknown(t, p, &["t", "method", "prefix", "approx_k"]);
        let at = self.num(t, p, "t").unwrap_or(0.0);
        let mut ok = true;
        if !(at >= 0.0 && at <= mkt.maturity) {
            self.err("pricing.t must lie in [0, market.maturity]");
            ok = false;
        } else if at > 0.0 && !divides(at, sim.dt) {
            self.err(format!("pricing.t = {at} is not a multiple of simulation.dt"));
            ok = false;
        }
        let method = match self.string(t, p, "method") {
            None => MethodChoice::Auto,
            Some(name) => match MethodChoice::from_name(name) {
                Some(m) => m,
                None => {
                    self.err(format!(
                        "pricing.method must be one of auto, closed_form, nested, full_memory_mc, gap_mc, black_scholes; found `{name}`"
                    ));
                    ok = false;
                    MethodChoice::Auto
                }
            },
        };
        let approx_k = self.uint(t, p, "approx_k").map(|k| k as usize);
        if let Some(k) = approx_k {
            if !k_feasible(k, sim.dt) {
                self.err(format!("pricing.approx_k = {k}: 1/k must be a positive multiple of dt"));
                ok = false;
            }
        }
        let prefix_file = self.string(t, p, "prefix").map(str::to_owned);
        let (mut prefix, mut prefix_sha256) = (None, None);
        match &prefix_file {
            Some(f) => {
                let file = self.base_dir.join(f);
                match fs::read(&file) {
                    Ok(bytes) => match read_path(&bytes[..], sim.gap, sim.window, sim.dt) {
                        Ok(path) => {
                            if path.horizon() < at - 1e-9 * sim.dt {
                                self.err(format!("pricing.prefix `{f}` ends before pricing.t"));
                                ok = false;
                            }
                            prefix_sha256 = Some(sha256_hex(&bytes));
                            prefix = Some(path);
                        }
                        Err(e) => {
                            self.err(format!("pricing.prefix `{f}`: {e}"));
                            ok = false;
                        }
                    },
                    Err(e) => {
                        self.err(format!("pricing.prefix `{f}`: {e}"));
                        ok = false;
                    }
                }
            }
            None if at > 0.0 => {
                self.err("pricing.t > 0 needs pricing.prefix, a realized path up to t");
                ok = false;
            }
            None => {}
        }
        ok.then_some(PricingSection {
            t: at,
            method,
            prefix_file,
            prefix,
            prefix_sha256,
            approx_k,
        })
    }

    fn hedge(&mut self, t: &Table, sim: &SimulationConfig) -> Option<HedgeSection> {
        self.unknown(t, "hedge", &["rebalance_dt"]);
        let rebalance_dt = self.num(t, "hedge", "rebalance_dt").unwrap_or(sim.dt);
        if !divides(rebalance_dt, sim.dt) {
            self.err("hedge.rebalance_dt must be a positive multiple of simulation.dt");
            return None;
        }
        Some(HedgeSection { rebalance_dt })
    }

    fn converge(&mut self, t: &Table, holder_beta: Option<f64>) -> Option<ConvergeSection> {
        self.unknown(t, "converge", &["k_values", "beta"]);
        let k_values = self
            .uint_array(t, "converge", "k_values")
            .unwrap_or_else(|| DEFAULT_K_VALUES.to_vec());
        let beta = self
            .num(t, "converge", "beta")
            .or(holder_beta)
            .unwrap_or(DEFAULT_BETA);
        if !(beta > 0.0 && beta < 0.5) {
            self.err("converge.beta must lie in (0, 1/2)");
            return None;
        }
        Some(ConvergeSection { k_values, beta })
    }

    fn check(&mut self, t: &Table) -> Option<CheckSection> {
        self.unknown(t, "check", &["k_values", "gamma"]);
        let k_values = self.uint_array(t, "check", "k_values");
        let gamma = self.uint(t, "check", "gamma").unwrap_or(1);
        if !(gamma == 1 || gamma == 2) {
            self.err("check.gamma must be 1 or 2");
            return None;
        }
        Some(CheckSection {
            k_values,
            gamma: gamma as u32,
        })
    }
}

fn build_initial(source: &InitialSource, window: f64, dt: f64) -> sfde_core::Result<InitialPath> {
    match source {
        InitialSource::Constant { level } => InitialPath::constant(*level, window, dt),
        InitialSource::Values(values) => {
            let step = window / (values.len() - 1) as f64;
            let theta = InitialPath::new(window, step, values.clone())?;
            if steps_in(window, dt) == Some(values.len() - 1) {
                Ok(theta)
            } else {
                theta.resample(dt)
            }
        }
        InitialSource::Holder(h) => h.generate(dt),
    }
}

/// Value of a functional that ignores the path, if it is one.
pub fn memoryless_value(spec: &FunctionalSpec) -> Option<f64> {
    if !spec.is_history_free() {
        return None;
    }
    let probe = [1.0, 1.0];
    let seg = HistorySegment::new(0.0, 1.0, &probe).ok()?;
    spec.eval(0.0, &seg).ok()
}

impl RunConfig {
    /// Pricing method after resolving `auto`.
    pub fn resolved_method(&self) -> PricingMethod {
        match self.pricing.method {
            MethodChoice::Fixed(m) => m,
            MethodChoice::Auto => {
                if memoryless_value(&self.vol).is_some() || self.in_last_delay_period() {
                    PricingMethod::ClosedForm
                } else {
                    PricingMethod::NestedH
                }
            }
        }
    }

    /// `t >= T - l` for the pricing time.
    pub fn in_last_delay_period(&self) -> bool {
        let dt = self.simulation.dt;
        self.pricing.t >= self.market.maturity - self.simulation.gap - 1e-9 * dt
    }

    /// Checks the constraints specific to `command`, reporting all of them.
    pub fn validate_command(&self, command: Command) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let dt = self.simulation.dt;
        let bounded = self.drift.bounds().is_some() && self.vol.bounds().is_some();
        let feasible = |ks: &[usize], errors: &mut Vec<String>, what: &str| {
            for &k in ks {
                if !k_feasible(k, dt) {
                    errors.push(format!("{what}: k = {k} needs 1/k to be a positive multiple of dt"));
                }
            }
        };
        match command {
            Command::Simulate => {}
            Command::Price => self.validate_price(&mut errors),
            Command::Converge => {
                let ks = &self.converge.k_values;
                if ks.len() < 3 {
                    errors.push("converge.k_values needs at least three values".into());
                }
                if ks.windows(2).any(|w| w[1] <= w[0]) {
                    errors.push("converge.k_values must be strictly increasing".into());
                }
                let doubled: Vec<usize> = ks.iter().flat_map(|&k| [k, 2 * k]).collect();
                feasible(&doubled, &mut errors, "converge.k_values");
                if !bounded {
                    errors.push("converge needs drift and vol with bounds (declare `bounds`)".into());
                }
            }
            Command::Hedge => {
                let start = (self.market.maturity - self.simulation.gap).max(0.0);
                if !divides(self.market.maturity - start, self.hedge.rebalance_dt) {
                    errors.push("hedge.rebalance_dt must divide the last delay period".into());
                }
                if !divides(self.market.maturity, dt) {
                    errors.push("market.maturity must be a multiple of simulation.dt".into());
                }
                if self.market.kind != OptionKind::Call {
                    errors.push("hedge supports calls only".into());
                }
            }
            Command::Check => {
                if !divides(0.25 * self.market.maturity, dt) {
                    errors.push("check needs market.maturity / 4 to be a multiple of simulation.dt".into());
                }
                if let Some(ks) = &self.check.k_values {
                    if ks.windows(2).any(|w| w[1] <= w[0]) {
                        errors.push("check.k_values must be strictly increasing".into());
                    }
                    feasible(ks, &mut errors, "check.k_values");
                    if !bounded {
                        errors.push("the moment check needs drift and vol with bounds (declare `bounds`)".into());
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations: errors })
        }
    }

    fn validate_price(&self, errors: &mut Vec<String>) {
        let method = self.resolved_method();
        let mkt = &self.market;
        let t = self.pricing.t;
        let call_only = matches!(
            method,
            PricingMethod::ClosedForm | PricingMethod::NestedH | PricingMethod::BlackScholes
        );
        if call_only && mkt.kind != OptionKind::Call {
            errors.push(format!("pricing.method {} values calls only", method.name()));
        }
        if !divides(mkt.maturity, self.simulation.dt) {
            errors.push("market.maturity must be a multiple of simulation.dt".into());
        }
        let memoryless = memoryless_value(&self.vol).is_some();
        match method {
            PricingMethod::ClosedForm => {
                if !memoryless && !self.in_last_delay_period() {
                    errors.push(
                        "closed_form needs pricing.t >= maturity - gap unless vol is constant".into(),
                    );
                }
            }
            PricingMethod::BlackScholes => {
                if !memoryless {
                    errors.push("black_scholes needs a constant vol".into());
                }
                if t >= mkt.maturity {
                    errors.push("black_scholes needs pricing.t < maturity".into());
                }
            }
            PricingMethod::NestedH => {
                if mkt.maturity <= self.simulation.gap {
                    errors.push("nested needs maturity > gap; use closed_form".into());
                } else if self.in_last_delay_period() {
                    errors.push("nested needs pricing.t < maturity - gap; use closed_form".into());
                }
            }
            PricingMethod::FullMemoryMc | PricingMethod::GapMc => {
                if t != 0.0 {
                    errors.push(format!("{} prices at pricing.t = 0 only", method.name()));
                }
                if method == PricingMethod::FullMemoryMc && self.pricing.approx_k.is_none() {
                    errors.push("full_memory_mc needs pricing.approx_k".into());
                }
            }
        }
    }

    /// Flattened effective configuration as TOML `key = value` lines, in a
    /// fixed order. Inline initial samples replace file references so the
    /// text alone regenerates the run.
    pub fn to_toml(&self) -> String {
        let mut out = Vec::new();
        let mut put = |k: &str, v: String| out.push(format!("{k} = {v}"));
        let m = &self.market;
        put("market.rate", toml_float(m.rate));
        put("market.strike", toml_float(m.strike));
        put("market.maturity", toml_float(m.maturity));
        put(
            "market.kind",
            toml_string(match m.kind {
                OptionKind::Call => "call",
                OptionKind::Put => "put",
            }),
        );
        let s = &self.simulation;
        put("simulation.horizon", toml_float(s.horizon));
        put("simulation.gap", toml_float(s.gap));
        put("simulation.window", toml_float(s.window));
        put("simulation.dt", toml_float(s.dt));
        put("simulation.measure", toml_string(s.measure.tag()));
        put("simulation.seed", toml_u64(s.seed));
        put("simulation.stream", toml_u64(self.stream));
        put("simulation.replicates", s.replicates.to_string());
        put("simulation.antithetic", s.antithetic.to_string());
        if let Some(k) = self.sequence_k {
            put("simulation.k", k.to_string());
        }
        flatten_functional(&mut put, "drift", &self.drift);
        flatten_functional(&mut put, "vol", &self.vol);
        match &self.initial_source {
            InitialSource::Constant { level } => {
                put("initial_path.kind", toml_string("constant"));
                put("initial_path.level", toml_float(*level));
            }
            InitialSource::Values(values) => {
                put("initial_path.kind", toml_string("values"));
                let items: Vec<String> = values.iter().map(|v| toml_float(*v)).collect();
                put("initial_path.values", format!("[{}]", items.join(", ")));
            }
            InitialSource::Holder(h) => {
                put("initial_path.kind", toml_string("holder"));
                put("initial_path.beta", toml_float(h.beta));
                put("initial_path.seed", toml_u64(h.seed));
                put("initial_path.level", toml_float(h.level));
                put("initial_path.log_scale", toml_float(h.log_scale));
            }
        }
        let pr = &self.pricing;
        put("pricing.t", toml_float(pr.t));
        put("pricing.method", toml_string(pr.method.name()));
        if let Some(f) = &pr.prefix_file {
            put("pricing.prefix", toml_string(f));
        }
        if let Some(k) = pr.approx_k {
            put("pricing.approx_k", k.to_string());
        }
        put("hedge.rebalance_dt", toml_float(self.hedge.rebalance_dt));
        put("converge.k_values", int_list(&self.converge.k_values));
        put("converge.beta", toml_float(self.converge.beta));
        put("check.gamma", self.check.gamma.to_string());
        if let Some(ks) = &self.check.k_values {
            put("check.k_values", int_list(ks));
        }
        let mut text = out.join("\n");
        text.push('\n');
        text
    }
}

fn int_list(ks: &[usize]) -> String {
    let items: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn flatten_functional(put: &mut impl FnMut(&str, String), path: &str, spec: &FunctionalSpec) {
    let key = |k: &str| format!("{path}.{k}");
    match spec.kind() {
        FunctionalKind::Constant(v) => {
            put(&key("kind"), toml_string("constant"));
            put(&key("value"), toml_float(*v));
        }
        FunctionalKind::MovingAverage { window } => {
            put(&key("kind"), toml_string("moving_average"));
            put(&key("window"), toml_float(*window));
        }
        FunctionalKind::RealizedVol { window, floor, cap } => {
            put(&key("kind"), toml_string("realized_vol"));
            put(&key("window"), toml_float(*window));
            put(&key("floor"), toml_float(*floor));
            put(&key("cap"), toml_float(*cap));
        }
        FunctionalKind::Affine { inner, scale, shift } => {
            put(&key("kind"), toml_string("affine"));
            put(&key("scale"), toml_float(*scale));
            put(&key("shift"), toml_float(*shift));
            flatten_functional(put, &key("inner"), inner);
        }
    }
    if let Some((lo, hi)) = spec.bounds() {
        put(&key("bounds"), format!("[{}, {}]", toml_float(lo), toml_float(hi)));
    }
    if let Some(a) = spec.lipschitz() {
        put(&key("lipschitz"), toml_float(a));
    }
}
