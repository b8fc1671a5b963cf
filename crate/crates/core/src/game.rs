//! Markov-game view of the supply chain: per-agent observation vectors, the
//! manager's observation, and the simultaneous joint step.
//!
//! Agent observation layout (all quantities divided by 100):
//!
//! * supplier block, per supplier then per factory: parts still owed (1) and
//!   projected deliveries for the next 7 days (7); then per supplier the
//!   queued load in weeks of capacity (1) and the total backlog (1);
//! * factory block: stock, back orders, parts in assembly, last-step
//!   shipped / on-time / received orders, and the number of items becoming
//!   shippable on each of the next 7 days;
//! * demand block: forecasts for the current step and the following ones;
//! * the timestep fraction `t / t_max`.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::EnvConfig;
use crate::env::{
    StepOutcome, SupplyChainEnv, SupplyChainState, ASSEMBLY_DAYS, DAYS_PER_STEP, NUM_FACTORIES,
    NUM_SUPPLIERS,
};
use crate::error::{Error, Result};

pub use crate::env::JointAction;

/// Divisor applied to every item/part count.
pub const QUANTITY_SCALE: f64 = 100.0;
/// Width of the joint-action block appended to the manager observation.
pub const JOINT_ACTION_WIDTH: usize = NUM_FACTORIES * NUM_SUPPLIERS;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub offset: usize,
    pub width: usize,
}

/// Named layout of an agent observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSchema {
    fields: Vec<FieldSpec>,
    supplier_block: usize,
    factory_block: usize,
    demand_block: usize,
}

impl ObservationSchema {
    pub fn new(cfg: &EnvConfig) -> Self {
        let mut fields = Vec::new();
        let mut offset = 0;
        let mut add = |name: String, width: usize| {
            fields.push(FieldSpec {
                name,
                offset,
                width,
            });
            offset += width;
        };
        for s in 0..NUM_SUPPLIERS {
            for i in 0..NUM_FACTORIES {
                add(format!("s{s}_f{i}_backlog"), 1);
                add(format!("s{s}_f{i}_deliveries"), DAYS_PER_STEP);
            }
            add(format!("s{s}_load"), 1);
            add(format!("s{s}_total_backlog"), 1);
        }
        let supplier_block = NUM_SUPPLIERS * (NUM_FACTORIES * (1 + DAYS_PER_STEP) + 2);
        for name in [
            "stock",
            "back_orders",
            "parts_in_assembly",
            "shipped_last_step",
            "on_time_last_step",
            "orders_last_step",
        ] {
            add(name.to_string(), 1);
        }
        add("shippable_pipeline".to_string(), DAYS_PER_STEP);
        let factory_block = 6 + DAYS_PER_STEP;
        add("demand_forecast".to_string(), cfg.forecast_horizon);
        add("timestep".to_string(), 1);
        Self {
            fields,
            supplier_block,
            factory_block,
            demand_block: cfg.forecast_horizon,
        }
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// `(supplier, factory, demand, timestep)` block widths.
    pub fn block_sizes(&self) -> (usize, usize, usize, usize) {
        (
            self.supplier_block,
            self.factory_block,
            self.demand_block,
            1,
        )
    }

    pub fn len(&self) -> usize {
        self.supplier_block + self.factory_block + self.demand_block + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn manager_len(&self) -> usize {
        NUM_FACTORIES * self.len() + JOINT_ACTION_WIDTH
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("name,offset,width\n");
        for f in &self.fields {
            let _ = writeln!(s, "{},{},{}", f.name, f.offset, f.width);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Result of one simultaneous move.
#[derive(Debug, Clone)]
pub struct JointStep {
    pub agent_obs: [Vec<f64>; NUM_FACTORIES],
    pub manager_obs: Vec<f64>,
    pub rewards: [f64; NUM_FACTORIES],
    pub terminal: bool,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone)]
pub struct MarkovGame {
    env: SupplyChainEnv,
    schema: ObservationSchema,
}

impl MarkovGame {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        let schema = ObservationSchema::new(&cfg);
        Ok(Self {
            env: SupplyChainEnv::new(cfg)?,
            schema,
        })
    }

    pub fn env(&self) -> &SupplyChainEnv {
        &self.env
    }

    pub fn schema(&self) -> &ObservationSchema {
        &self.schema
    }

    pub fn reset(&self, seed: u64) -> SupplyChainState {
        self.env.reset(seed)
    }

    pub fn build_agent_observation(&self, state: &SupplyChainState, factory: usize) -> Vec<f64> {
        assert!(
            factory < NUM_FACTORIES,
            "factory index {factory} out of range"
        );
        let cfg = self.env.config();
        let mut obs = Vec::with_capacity(self.schema.len());
        let q = |x: u64| x as f64 / QUANTITY_SCALE;

        let projections: Vec<Vec<[u64; NUM_FACTORIES]>> = state
            .suppliers
            .iter()
            .map(|s| s.projected_deliveries(DAYS_PER_STEP))
            .collect();

        for (s, sup) in state.suppliers.iter().enumerate() {
            for i in 0..NUM_FACTORIES {
                obs.push(q(sup.backlog[i]));
                obs.extend(projections[s].iter().map(|day| q(day[i])));
            }
            let weekly = (sup.capacity_per_day * DAYS_PER_STEP as u64) as f64;
            let load = if weekly > 0.0 {
                sup.total_backlog() as f64 / weekly
            } else {
                0.0
            };
            obs.push(load);
            obs.push(q(sup.total_backlog()));
        }

        let f = &state.factories[factory];
        obs.extend(
            [
                f.stock,
                f.back_orders,
                f.parts_awaiting_assembly(),
                f.shipped_last_step,
                f.shipped_on_time_last_step,
                f.orders_received_last_step,
            ]
            .map(q),
        );
        // day k of the next step: assembly queue first, then projected deliveries
        for day in 0..DAYS_PER_STEP {
            let ready = if day < ASSEMBLY_DAYS {
                f.assembling[day]
            } else {
                projections
                    .iter()
                    .map(|p| p[day - ASSEMBLY_DAYS][factory])
                    .sum()
            };
            obs.push(q(ready));
        }

        obs.extend(
            state.demand[factory]
                .forecasts()
                .iter()
                .map(|&x| x / QUANTITY_SCALE),
        );
        obs.push(state.t as f64 / cfg.t_max as f64);
        debug_assert_eq!(obs.len(), self.schema.len());
        obs
    }

    pub fn build_manager_observation(
        &self,
        state: &SupplyChainState,
        last_joint_action: Option<&JointAction>,
    ) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.schema.manager_len());
        for i in 0..NUM_FACTORIES {
            obs.extend(self.build_agent_observation(state, i));
        }
        match last_joint_action {
            Some(a) => obs.extend(a.0.iter().flatten().map(|&x| x as f64 / 100.0)),
            None => obs.extend([0.0; JOINT_ACTION_WIDTH]),
        }
        obs
    }

    /// Steps the environment and rebuilds every observation.
    pub fn joint_step(
        &self,
        state: &mut SupplyChainState,
        joint_action: &JointAction,
    ) -> Result<JointStep> {
        let outcome = self.env.step_in_place(state, joint_action)?;
        Ok(JointStep {
            agent_obs: std::array::from_fn(|i| self.build_agent_observation(state, i)),
            manager_obs: self.build_manager_observation(state, Some(joint_action)),
            rewards: outcome.rewards(),
            terminal: outcome.terminal,
            outcome,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::agent_reward;
    use crate::env::profit_reward;

    fn game() -> MarkovGame {
        MarkovGame::new(EnvConfig::default()).unwrap()
    }

    #[test]
    fn schema_sizes() {
        let g = game();
        let (sup, fac, dem, ts) = g.schema().block_sizes();
        assert_eq!((sup, fac, dem, ts), (52, 13, 25, 1));
        assert_eq!(g.schema().len(), 91);
        assert_eq!(g.schema().manager_len(), 3 * 91 + 6);
        let last = g.schema().fields().last().unwrap();
        assert_eq!(last.offset + last.width, g.schema().len());
    }

    #[test]
    fn initial_observation_blocks() {
        let g = game();
        let s = g.reset(0);
        let obs = g.build_agent_observation(&s, 1);
        let (sup, fac, dem, _) = g.schema().block_sizes();
        assert!(obs[..sup + fac].iter().all(|&x| x == 0.0));
        assert!(obs[sup + fac..sup + fac + dem].iter().all(|&x| x >= 0.0));
        assert_eq!(*obs.last().unwrap(), 0.0);
        assert_eq!(obs, g.build_agent_observation(&s, 1));
    }

    #[test]
    fn timestep_fraction() {
        let g = game();
        let mut s = g.reset(0);
        for _ in 0..26 {
            g.joint_step(&mut s, &JointAction([[30, 30]; 3])).unwrap();
        }
        assert_eq!(*g.build_agent_observation(&s, 0).last().unwrap(), 0.5);
    }

    #[test]
    fn manager_observation_layout() {
        let g = game();
        let s = g.reset(0);
        let m0 = g.build_manager_observation(&s, None);
        assert_eq!(m0.len(), g.schema().manager_len());
        assert!(m0[m0.len() - 6..].iter().all(|&x| x == 0.0));
        let prev = JointAction([[99, 0], [0, 0], [0, 0]]);
        let m1 = g.build_manager_observation(&s, Some(&prev));
        assert_eq!(&m1[m1.len() - 6..], &[0.99, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let l = g.schema().len();
        assert_eq!(&m1[l..2 * l], g.build_agent_observation(&s, 1).as_slice());
    }

    #[test]
    fn zero_action_rewards_match_closed_form() {
        let g = game();
        let mut s = g.reset(0);
        let step = g.joint_step(&mut s, &JointAction::default()).unwrap();
        let cfg = EnvConfig::default();
        let expected = agent_reward(profit_reward(0, [0, 0], 0, &cfg), 0.0, &cfg);
        assert_eq!(step.rewards, [expected; 3]);
        assert!(!step.terminal);
    }

    #[test]
    fn pipeline_reflects_projected_deliveries() {
        let g = game();
        let mut s = g.reset(0);
        // 297 parts to a 100/day supplier: deliveries spill into days 2-3
        g.joint_step(&mut s, &JointAction([[99, 0]; 3])).unwrap();
        g.joint_step(&mut s, &JointAction([[99, 0]; 3])).unwrap();
        let obs = g.build_agent_observation(&s, 0);
        let sched = g.schema().field("s0_f0_deliveries").unwrap();
        let days = &obs[sched.offset..sched.offset + sched.width];
        assert!(
            days.iter().all(|&d| d == 0.0),
            "backlog cleared within the week"
        );
        let pipe = g.schema().field("shippable_pipeline").unwrap();
        assert!(obs[pipe.offset..pipe.offset + pipe.width]
            .iter()
            .all(|&x| x >= 0.0));
    }
}
