//! The manager: a mediator that shows each factory an auxiliary state and
//! pays an incentive proportional to the orders that state points at.
//!
//! Timing: the auxiliary state `ŝ_t` shown at step `t` is appended to the
//! agents' observations for that step; the payment `ŝ_t · a_t` for the
//! orders placed at step `t` is booked in the rewards of step `t + 1`. The
//! manager's own reward for a step is the sum of the agents' raw rewards
//! minus the incentives paid in that step.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::EnvConfig;
use crate::env::{JointAction, StepOutcome, SupplyChainState, NUM_FACTORIES, NUM_SUPPLIERS};
use crate::error::{Error, Result};
use crate::game::MarkovGame;

/// One factory's auxiliary state: a weight in `[0, 1]` per supplier.
pub type AuxState = [f64; NUM_SUPPLIERS];

/// Width of the manager's action vector.
pub const MANAGER_ACTION_WIDTH: usize = NUM_FACTORIES * NUM_SUPPLIERS;

/// Auxiliary states for every factory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ManagerAction(pub [AuxState; NUM_FACTORIES]);

impl ManagerAction {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Reads the three auxiliary states from a flat 6-vector in factory order.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != MANAGER_ACTION_WIDTH {
            return Err(Error::Shape {
                context: "manager action",
                expected: MANAGER_ACTION_WIDTH,
                actual: values.len(),
            });
        }
        let a = Self(std::array::from_fn(|i| {
            std::array::from_fn(|s| values[i * NUM_SUPPLIERS + s])
        }));
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, aux) in self.0.iter().enumerate() {
            check_aux(aux).map_err(|_| {
                Error::Contract(format!(
                    "auxiliary state {aux:?} for factory {i} outside [0, 1]"
                ))
            })?;
        }
        Ok(())
    }
}

fn check_aux(aux: &AuxState) -> Result<()> {
    if aux.iter().all(|x| (0.0..=1.0).contains(x)) {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "auxiliary state {aux:?} outside [0, 1]"
        )))
    }
}

/// Appends the auxiliary state to a raw agent observation.
pub fn augment_observation(obs: &[f64], aux: &AuxState) -> Result<Vec<f64>> {
    check_aux(aux)?;
    let mut out = Vec::with_capacity(obs.len() + NUM_SUPPLIERS);
    out.extend_from_slice(obs);
    out.extend_from_slice(aux);
    Ok(out)
}

/// Incentive for the orders `action_prev` placed under `aux_prev`:
/// `scale * (aux_prev · action_prev)`. With no previous step it is zero.
pub fn auxiliary_reward(
    aux_prev: &AuxState,
    action_prev: Option<&[u64; NUM_SUPPLIERS]>,
    scale: f64,
) -> f64 {
    match action_prev {
        None => 0.0,
        Some(a) => {
            scale
                * aux_prev
                    .iter()
                    .zip(a)
                    .map(|(&w, &q)| w * q as f64)
                    .sum::<f64>()
        }
    }
}

pub fn manager_reward(raw: &[f64; NUM_FACTORIES], incentives: &[f64; NUM_FACTORIES]) -> f64 {
    raw.iter().zip(incentives).map(|(r, h)| r - h).sum()
}

/// Environment state plus what the manager needs to settle incentives.
#[derive(Debug, Clone, PartialEq)]
pub struct MediatedState {
    pub env: SupplyChainState,
    /// Auxiliary states shown at the previous step.
    pub last_aux: ManagerAction,
    pub last_action: Option<JointAction>,
}

impl MediatedState {
    pub fn t(&self) -> usize {
        self.env.t
    }
}

/// Result of one mediated step.
#[derive(Debug, Clone)]
pub struct MediatedStep {
    /// Next raw observations; see [`MediatedStep::augmented_obs`].
    pub raw_agent_obs: [Vec<f64>; NUM_FACTORIES],
    pub manager_obs: Vec<f64>,
    pub raw_rewards: [f64; NUM_FACTORIES],
    /// Incentives settled this step, for the previous step's orders.
    pub incentives_paid: [f64; NUM_FACTORIES],
    /// Incentives earned by this step's orders, payable next step.
    pub incentives_earned: [f64; NUM_FACTORIES],
    /// `raw + paid` per agent.
    pub shaped_rewards: [f64; NUM_FACTORIES],
    pub manager_reward: f64,
    pub terminal: bool,
    pub outcome: StepOutcome,
}

impl MediatedStep {
    /// Next observations with the auxiliary state the manager shows next.
    pub fn augmented_obs(&self, next_aux: &ManagerAction) -> Result<[Vec<f64>; NUM_FACTORIES]> {
        let mut out: [Vec<f64>; NUM_FACTORIES] = Default::default();
        for i in 0..NUM_FACTORIES {
            out[i] = augment_observation(&self.raw_agent_obs[i], &next_aux.0[i])?;
        }
        Ok(out)
    }
}

/// The Markov game wrapped with the manager's mechanism.
#[derive(Debug, Clone)]
pub struct MediatedGame {
    game: MarkovGame,
    incentive_scale: f64,
}

impl MediatedGame {
    pub fn new(cfg: EnvConfig, incentive_scale: f64) -> Result<Self> {
        if !(incentive_scale.is_finite() && incentive_scale >= 0.0) {
            return Err(Error::config(
                "incentive_scale",
                "must be finite and non-negative",
            ));
        }
        Ok(Self {
            game: MarkovGame::new(cfg)?,
            incentive_scale,
        })
    }

    pub fn game(&self) -> &MarkovGame {
        &self.game
    }

    pub fn incentive_scale(&self) -> f64 {
        self.incentive_scale
    }

    pub fn reset(&self, seed: u64) -> MediatedState {
        MediatedState {
            env: self.game.reset(seed),
            last_aux: ManagerAction::zero(),
            last_action: None,
        }
    }

    pub fn agent_observations(
        &self,
        state: &MediatedState,
        aux: &ManagerAction,
    ) -> Result<[Vec<f64>; NUM_FACTORIES]> {
        let mut out: [Vec<f64>; NUM_FACTORIES] = Default::default();
        for i in 0..NUM_FACTORIES {
            let raw = self.game.build_agent_observation(&state.env, i);
            out[i] = augment_observation(&raw, &aux.0[i])?;
        }
        Ok(out)
    }

    pub fn manager_observation(&self, state: &MediatedState) -> Vec<f64> {
        self.game
            .build_manager_observation(&state.env, state.last_action.as_ref())
    }

    pub fn mediate_step(
        &self,
        state: &mut MediatedState,
        manager_action: &ManagerAction,
        joint_action: &JointAction,
    ) -> Result<MediatedStep> {
        manager_action.validate()?;
        joint_action.validate()?;
        let paid: [f64; NUM_FACTORIES] = std::array::from_fn(|i| {
            auxiliary_reward(
                &state.last_aux.0[i],
                state.last_action.as_ref().map(|a| &a.0[i]),
                self.incentive_scale,
            )
        });
        let earned: [f64; NUM_FACTORIES] = std::array::from_fn(|i| {
            auxiliary_reward(
                &manager_action.0[i],
                Some(&joint_action.0[i]),
                self.incentive_scale,
            )
        });

        let step = self.game.joint_step(&mut state.env, joint_action)?;
        state.last_aux = *manager_action;
        state.last_action = Some(*joint_action);

        let raw = step.rewards;
        Ok(MediatedStep {
            raw_agent_obs: step.agent_obs,
            manager_obs: step.manager_obs,
            raw_rewards: raw,
            incentives_paid: paid,
            incentives_earned: earned,
            shaped_rewards: std::array::from_fn(|i| raw[i] + paid[i]),
            manager_reward: manager_reward(&raw, &paid),
            terminal: step.terminal,
            outcome: step.outcome,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub step: usize,
    pub factory: usize,
    /// Auxiliary state shown at this step.
    pub aux: AuxState,
    /// Incentive paid at this step.
    pub incentive: f64,
}

/// Per-episode record of auxiliary states and incentive payments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IncentiveLedger {
    pub entries: Vec<LedgerEntry>,
}

impl IncentiveLedger {
    pub fn record(&mut self, step: usize, action: &ManagerAction, paid: &[f64; NUM_FACTORIES]) {
        for i in 0..NUM_FACTORIES {
            self.entries.push(LedgerEntry {
                step,
                factory: i,
                aux: action.0[i],
                incentive: paid[i],
            });
        }
    }

    pub fn total_paid(&self) -> f64 {
        self.entries.iter().map(|e| e.incentive).sum()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("step,factory,aux_s0,aux_s1,incentive\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                e.step, e.factory, e.aux[0], e.aux[1], e.incentive
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}
