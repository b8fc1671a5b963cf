use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Mode};
use crate::ddpg::{quantize_order, ManagerPolicy, Trainer};
use crate::env::{
    agent_reward, ofr_reward, profit_reward, JointAction, SupplyChainEnv, MAX_ORDER, NUM_FACTORIES,
};
use crate::error::{Error, Result};
use crate::manager::{ManagerAction, MediatedGame};
use crate::neural::{finite_difference_check, Head, Mlp};

use super::evaluate::load_runs;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn violation(msg: String) -> Error {
    Error::Contract(msg)
}

pub fn random_joint_action<R: Rng + ?Sized>(rng: &mut R) -> JointAction {
    JointAction(std::array::from_fn(|_| {
        [
            rng.random_range(0..=MAX_ORDER),
            rng.random_range(0..=MAX_ORDER),
        ]
    }))
}

/// Random-action fuzzing of the simulator: conservation, capacity caps,
/// OFR range, on-time bound and seeded determinism.
pub fn env_fuzz(cfg: &ExperimentConfig, steps: usize, seed: u64) -> Result<String> {
    let env = SupplyChainEnv::new(cfg.env.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episode = 0u64;
    let mut state = env.reset(seed);
    let mut first: Vec<_> = Vec::new();
    for n in 0..steps {
        let action = random_joint_action(&mut rng);
        let out = env.step_in_place(&mut state, &action)?;
        state.audit()?;
        for (s, days) in out.daily_deliveries.iter().enumerate() {
            if let Some(d) = days.iter().find(|&&d| d > cfg.env.supplier_capacity[s]) {
                return Err(violation(format!(
                    "step {n}: supplier {s} delivered {d} in a day"
                )));
            }
        }
        if !(0.0..=1.0).contains(&out.ofr) {
            return Err(violation(format!(
                "step {n}: ofr {} outside [0, 1]",
                out.ofr
            )));
        }
        for (i, f) in out.factories.iter().enumerate() {
            if f.items_shipped_on_time > f.orders_received {
                return Err(violation(format!(
                    "step {n}: factory {i} on-time exceeds orders"
                )));
            }
        }
        if episode == 0 {
            first.push((action, out.clone()));
        }
        if out.terminal {
            episode += 1;
            state = env.reset(seed.wrapping_add(episode));
        }
    }
    let mut replay = env.reset(seed);
    for (action, expected) in &first {
        if env.step_in_place(&mut replay, action)? != *expected {
            return Err(violation("replaying the first episode diverged".into()));
        }
    }
    Ok(format!("{steps} steps over {} episodes", episode + 1))
}

/// Closed-form reward recomputation on random inputs.
pub fn reward_formulas(cfg: &ExperimentConfig, tuples: usize, seed: u64) -> Result<String> {
    let e = &cfg.env;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..tuples {
        let shipped = rng.random_range(0..=1000u64);
        let orders = [
            rng.random_range(0..=MAX_ORDER),
            rng.random_range(0..=MAX_ORDER),
        ];
        let stock = rng.random_range(0..=2000u64);
        let ofr = rng.random_range(0.0..=1.0);
        let expected_profit = (shipped as f64 * e.item_price
            - orders[0] as f64 * e.part_price[0]
            - orders[1] as f64 * e.part_price[1]
            - stock as f64 * e.inventory_price
            - e.profit_offset)
            / e.profit_norm;
        let profit = profit_reward(shipped, orders, stock, e);
        let bonus = if ofr >= e.ofr_target { 1.0 } else { 0.0 };
        worst = worst
            .max((profit - expected_profit).abs())
            .max((ofr_reward(ofr, e.ofr_target) - bonus).abs())
            .max((agent_reward(profit, bonus, e) - (e.w_profit * profit + e.w_ofr * bonus)).abs());
    }
    if worst > 1e-12 {
        return Err(violation(format!("max reward deviation {worst:e}")));
    }
    Ok(format!("{tuples} tuples, max deviation {worst:e}"))
}

/// Accounting identity and zero-manager reduction on random episodes.
pub fn manager_algebra(cfg: &ExperimentConfig, episodes: usize, seed: u64) -> Result<String> {
    let game = MediatedGame::new(cfg.env.clone(), cfg.incentive_scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for ep in 0..episodes {
        let env_seed = rng.random::<u64>();
        let mut mediated = game.reset(env_seed);
        let mut zero = game.reset(env_seed);
        let mut plain = game.game().reset(env_seed);
        loop {
            let action = random_joint_action(&mut rng);
            let aux = ManagerAction(std::array::from_fn(|_| [rng.random(), rng.random()]));
            let step = game.mediate_step(&mut mediated, &aux, &action)?;
            let raw: f64 = step.raw_rewards.iter().sum();
            let paid: f64 = step.incentives_paid.iter().sum();
            worst = worst.max((step.manager_reward + paid - raw).abs());

            let z = game.mediate_step(&mut zero, &ManagerAction::zero(), &action)?;
            let p = game.game().joint_step(&mut plain, &action)?;
            if z.shaped_rewards != p.rewards
                || z.raw_agent_obs != p.agent_obs
                || z.incentives_paid != [0.0; NUM_FACTORIES]
            {
                return Err(violation(format!(
                    "episode {ep}: zero manager differs from no manager"
                )));
            }
            if step.terminal {
                break;
            }
        }
    }
    if worst > 1e-9 {
        return Err(violation(format!("accounting identity off by {worst:e}")));
    }
    Ok(format!("{episodes} episodes, max identity error {worst:e}"))
}

/// Finite-difference gradient check on randomly shaped small networks.
pub fn gradients(nets: usize, seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..nets {
        let sizes = [
            rng.random_range(1..6),
            rng.random_range(2..9),
            rng.random_range(2..9),
            rng.random_range(1..4),
        ];
        let head = if rng.random::<bool>() {
            Head::Squash
        } else {
            Head::Identity
        };
        let net = Mlp::<f64>::new(&sizes, head, &mut rng);
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(finite_difference_check(&net, &input, 1e-6)?.max_rel_error);
    }
    if worst >= 1e-4 {
        return Err(violation(format!("max relative gradient error {worst:e}")));
    }
    Ok(format!("{nets} networks, max relative error {worst:e}"))
}

pub fn quantization_grid(points: usize) -> Result<String> {
    let last = (points - 1) as u64;
    for k in 0..=last {
        let x = k as f64 / last as f64;
        let expected = (100 * k / last).min(MAX_ORDER);
        if quantize_order(x) != expected {
            return Err(violation(format!("quantize({x}) = {}", quantize_order(x))));
        }
    }
    Ok(format!("{points} grid points"))
}

/// Frozen zero manager trains exactly like no manager.
pub fn naive_reduction(cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let mut small = ExperimentConfig::smoke();
    small.env = cfg.env.clone();
    small.episodes = 2;
    let a = Trainer::<f64>::new(&small, Mode::Naive, seed)?.train(2)?;
    let b = Trainer::<f64>::with_policy(&small, Mode::Managed, seed, ManagerPolicy::FrozenZero)?
        .train(2)?;
    if a != b {
        return Err(violation("frozen zero manager changed training".into()));
    }
    Ok("2 training episodes identical".into())
}

/// Row counts, step counts and score identities of stored metrics.
pub fn metrics_identities(cfg: &ExperimentConfig, dir: &Path) -> Result<String> {
    let runs = load_runs(dir)?;
    for run in &runs {
        let tag = format!("{}_seed{}", run.mode, run.seed);
        if run.metrics.len() != cfg.episodes {
            return Err(violation(format!(
                "{tag}: {} rows, expected {}",
                run.metrics.len(),
                cfg.episodes
            )));
        }
        for m in &run.metrics {
            if m.steps != cfg.env.t_max {
                return Err(violation(format!(
                    "{tag} episode {}: {} steps",
                    m.episode, m.steps
                )));
            }
            if (m.manager_score - (m.raw_score - m.incentive)).abs() > 1e-9
                || (m.factory_score - m.incentive - m.raw_score).abs() > 1e-9
            {
                return Err(violation(format!(
                    "{tag} episode {}: score identity broken",
                    m.episode
                )));
            }
            if run.mode == Mode::Naive && (m.incentive != 0.0 || m.factory_score != m.manager_score)
            {
                return Err(violation(format!(
                    "{tag} episode {}: naive scores differ",
                    m.episode
                )));
            }
        }
    }
    Ok(format!("{} metrics files", runs.len()))
}

/// Runs the invariant suite, plus the metrics checks when `metrics_dir` is
/// given.
pub fn run_checks(cfg: &ExperimentConfig, metrics_dir: Option<&Path>) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut record = |name, result: Result<String>| {
        out.push(match result {
            Ok(detail) => CheckOutcome {
                name,
                passed: true,
                detail,
            },
            Err(e) => CheckOutcome {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
    };
    record("env_fuzz", env_fuzz(cfg, 10_000, 0));
    record("reward_formulas", reward_formulas(cfg, 1_000, 0));
    record("manager_algebra", manager_algebra(cfg, 100, 0));
    record("gradients", gradients(20, 0));
    record("quantization", quantization_grid(1_001));
    record("naive_reduction", naive_reduction(cfg, 0));
    if let Some(dir) = metrics_dir {
        record("metrics", metrics_identities(cfg, dir));
    }
    out
}

pub fn format_checks(results: &[CheckOutcome]) -> String {
    let mut s = String::new();
    for r in results {
        let _ = writeln!(
            s,
            "[{}] {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    s
}
