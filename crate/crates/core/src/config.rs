//! Experiment configuration and its flat `key = value` text format.
//!
//! Every environment constant, learner hyperparameter, and run setting lives
//! in [`ExperimentConfig`]. The text format is one assignment per line, `#`
//! starts a comment, list values are comma separated, and seed sets accept
//! either a list (`0,3,7`) or an inclusive range (`0..9`).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::env::NUM_SUPPLIERS;
use crate::error::{Error, Result};

/// Training framework: independent learners alone, or mediated by a manager.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Naive,
    Managed,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Naive => "naive",
            Mode::Managed => "managed",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "naive" => Ok(Mode::Naive),
            "managed" => Ok(Mode::Managed),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Which modes a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    Naive,
    Managed,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::Naive => vec![Mode::Naive],
            ModeSelection::Managed => vec![Mode::Managed],
            ModeSelection::Both => vec![Mode::Naive, Mode::Managed],
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ModeSelection::Naive => "naive",
            ModeSelection::Managed => "managed",
            ModeSelection::Both => "both",
        }
    }
}

impl FromStr for ModeSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "naive" => Ok(ModeSelection::Naive),
            "managed" => Ok(ModeSelection::Managed),
            "both" => Ok(ModeSelection::Both),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Floating-point type used by the learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::config(
                "precision",
                format!("unknown precision `{other}`"),
            )),
        }
    }
}

/// Supply-chain constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Parts each supplier can produce per simulated day.
    pub supplier_capacity: [u64; NUM_SUPPLIERS],
    pub part_price: [f64; NUM_SUPPLIERS],
    pub item_price: f64,
    /// Charge per finished item held at step end.
    pub inventory_price: f64,
    pub t_max: usize,
    pub demand_mean: u64,
    /// Demand is uniform on `[mean - spread, mean + spread]`.
    pub demand_spread: u64,
    pub forecast_sigma: f64,
    /// Number of per-step forecasts in an agent observation.
    pub forecast_horizon: usize,
    pub profit_norm: f64,
    pub profit_offset: f64,
    pub ofr_target: f64,
    pub w_profit: f64,
    pub w_ofr: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            supplier_capacity: [100, 450],
            part_price: [2.0, 5.0],
            item_price: 10.0,
            inventory_price: 1.0,
            t_max: 52,
            demand_mean: 100,
            demand_spread: 50,
            forecast_sigma: 30.0,
            forecast_horizon: 25,
            profit_norm: 300.0,
            profit_offset: 400.0,
            ofr_target: 0.8,
            w_profit: 0.5,
            w_ofr: 0.5,
        }
    }
}

/// DDPG hyperparameters shared by every learner.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig {
    pub hidden_units: Vec<usize>,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Transitions collected before a learner starts updating.
    pub warmup: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Exploration noise standard deviation at the first episode.
    pub noise_start: f64,
    /// Exploration noise standard deviation at the last episode.
    pub noise_end: f64,
    pub updates_per_step: usize,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden_units: vec![128, 128],
            replay_capacity: 100_000,
            batch_size: 64,
            warmup: 1_000,
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_start: 0.1,
            noise_end: 0.02,
            updates_per_step: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub ddpg: DdpgConfig,
    /// Multiplier applied to the auxiliary-state/order inner product.
    pub incentive_scale: f64,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Trailing episodes pooled for evaluation.
    pub eval_window: usize,
    pub mode: ModeSelection,
    pub precision: Precision,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            ddpg: DdpgConfig::default(),
            incentive_scale: 1.0 / 300.0,
            episodes: 500,
            seeds: (0..10).collect(),
            eval_window: 25,
            mode: ModeSelection::Both,
            precision: Precision::F32,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::config(key, format!("cannot parse `{}`", value.trim())))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_pair<T: FromStr + Copy>(key: &str, value: &str) -> Result<[T; 2]> {
    let items: Vec<T> = parse_list(key, value)?;
    match items.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::config(
            key,
            "expected exactly two comma-separated values",
        )),
    }
}

/// Parses `a..b` (inclusive) or a comma-separated list of seeds.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let value = value.trim();
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = parse_num("seeds", lo)?;
        let hi: u64 = parse_num("seeds", hi.trim_start_matches('='))?;
        if hi < lo {
            return Err(Error::config("seeds", format!("empty range {value}")));
        }
        Ok((lo..=hi).collect())
    } else {
        parse_list("seeds", value)
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Reads and validates a `key = value` file, starting from the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    &format!("line {}", lineno + 1),
                    format!("expected `key = value`, found `{line}`"),
                )
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one field by its file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.env;
        let d = &mut self.ddpg;
        match key {
            "supplier_capacity" => e.supplier_capacity = parse_pair(key, value)?,
            "part_price" => e.part_price = parse_pair(key, value)?,
            "item_price" => e.item_price = parse_num(key, value)?,
            "inventory_price" => e.inventory_price = parse_num(key, value)?,
            "t_max" => e.t_max = parse_num(key, value)?,
            "demand_mean" => e.demand_mean = parse_num(key, value)?,
            "demand_spread" => e.demand_spread = parse_num(key, value)?,
            "forecast_sigma" => e.forecast_sigma = parse_num(key, value)?,
            "forecast_horizon" => e.forecast_horizon = parse_num(key, value)?,
            "profit_norm" => e.profit_norm = parse_num(key, value)?,
            "profit_offset" => e.profit_offset = parse_num(key, value)?,
            "ofr_target" => e.ofr_target = parse_num(key, value)?,
            "w_profit" => e.w_profit = parse_num(key, value)?,
            "w_ofr" => e.w_ofr = parse_num(key, value)?,
            "incentive_scale" => self.incentive_scale = parse_num(key, value)?,
            "hidden_units" => d.hidden_units = parse_list(key, value)?,
            "replay_capacity" => d.replay_capacity = parse_num(key, value)?,
            "batch_size" => d.batch_size = parse_num(key, value)?,
            "warmup" => d.warmup = parse_num(key, value)?,
            "gamma" => d.gamma = parse_num(key, value)?,
            "tau" => d.tau = parse_num(key, value)?,
            "actor_lr" => d.actor_lr = parse_num(key, value)?,
            "critic_lr" => d.critic_lr = parse_num(key, value)?,
            "noise_start" => d.noise_start = parse_num(key, value)?,
            "noise_end" => d.noise_end = parse_num(key, value)?,
            "updates_per_step" => d.updates_per_step = parse_num(key, value)?,
            "episodes" => self.episodes = parse_num(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "eval_window" => self.eval_window = parse_num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "precision" => self.precision = value.parse()?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Serializes every field; `from_kv_str(to_kv_string())` is the identity.
    pub fn to_kv_string(&self) -> String {
        let e = &self.env;
        let d = &self.ddpg;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("supplier_capacity", join(&e.supplier_capacity));
        put("part_price", join(&e.part_price));
        put("item_price", e.item_price.to_string());
        put("inventory_price", e.inventory_price.to_string());
        put("t_max", e.t_max.to_string());
        put("demand_mean", e.demand_mean.to_string());
        put("demand_spread", e.demand_spread.to_string());
        put("forecast_sigma", e.forecast_sigma.to_string());
        put("forecast_horizon", e.forecast_horizon.to_string());
        put("profit_norm", e.profit_norm.to_string());
        put("profit_offset", e.profit_offset.to_string());
        put("ofr_target", e.ofr_target.to_string());
        put("w_profit", e.w_profit.to_string());
        put("w_ofr", e.w_ofr.to_string());
        put("incentive_scale", self.incentive_scale.to_string());
        put("hidden_units", join(&d.hidden_units));
        put("replay_capacity", d.replay_capacity.to_string());
        put("batch_size", d.batch_size.to_string());
        put("warmup", d.warmup.to_string());
        put("gamma", d.gamma.to_string());
        put("tau", d.tau.to_string());
        put("actor_lr", d.actor_lr.to_string());
        put("critic_lr", d.critic_lr.to_string());
        put("noise_start", d.noise_start.to_string());
        put("noise_end", d.noise_end.to_string());
        put("updates_per_step", d.updates_per_step.to_string());
        put("episodes", self.episodes.to_string());
        put("seeds", join(&self.seeds));
        put("eval_window", self.eval_window.to_string());
        put("mode", self.mode.as_str().to_string());
        put("precision", self.precision.as_str().to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.ddpg.validate()?;
        non_negative("incentive_scale", self.incentive_scale)?;
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "seed list must be non-empty"));
        }
        if self.eval_window == 0 || self.eval_window > self.episodes {
            return Err(Error::config(
                "eval_window",
                format!("must lie in [1, episodes={}]", self.episodes),
            ));
        }
        Ok(())
    }

    /// A tiny configuration for smoke tests: short episodes, small networks.
    pub fn smoke() -> Self {
        let mut cfg = Self::default();
        cfg.ddpg.hidden_units = vec![16, 16];
        cfg.ddpg.warmup = 64;
        cfg.ddpg.batch_size = 16;
        cfg.ddpg.replay_capacity = 2_000;
        cfg.episodes = 4;
        cfg.seeds = vec![0];
        cfg.eval_window = 2;
        cfg
    }
}

fn non_negative(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be finite and non-negative, got {x}"),
        ))
    }
}

fn unit_interval(field: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::config(field, format!("must lie in [0, 1], got {x}")))
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        for p in self.part_price {
            non_negative("part_price", p)?;
        }
        non_negative("item_price", self.item_price)?;
        non_negative("inventory_price", self.inventory_price)?;
        non_negative("forecast_sigma", self.forecast_sigma)?;
        non_negative("profit_offset", self.profit_offset)?;
        non_negative("w_profit", self.w_profit)?;
        non_negative("w_ofr", self.w_ofr)?;
        unit_interval("ofr_target", self.ofr_target)?;
        if self.t_max == 0 {
            return Err(Error::config("t_max", "must be at least 1"));
        }
        if !(self.profit_norm.is_finite() && self.profit_norm > 0.0) {
            return Err(Error::config("profit_norm", "must be positive"));
        }
        if self.demand_spread > self.demand_mean {
            return Err(Error::config(
                "demand_spread",
                "must not exceed demand_mean",
            ));
        }
        if self.forecast_horizon == 0 {
            return Err(Error::config("forecast_horizon", "must be at least 1"));
        }
        Ok(())
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units.is_empty() || self.hidden_units.contains(&0) {
            return Err(Error::config(
                "hidden_units",
                "need at least one non-empty layer",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::config(
                "replay_capacity",
                "must be at least batch_size",
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", "must lie in [0, 1)"));
        }
        unit_interval("tau", self.tau)?;
        non_negative("actor_lr", self.actor_lr)?;
        non_negative("critic_lr", self.critic_lr)?;
        non_negative("noise_start", self.noise_start)?;
        non_negative("noise_end", self.noise_end)?;
        Ok(())
    }
}
