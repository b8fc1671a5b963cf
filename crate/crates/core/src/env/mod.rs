//! Two-supplier, three-factory, three-retailer supply chain.
//!
//! One environment step covers seven simulated days:
//!
//! | day | event |
//! |-----|-------|
//! | 1   | factories place orders; they join the supplier backlogs |
//! | 2   | retailer orders arrive |
//! | 3–7 | factories ship from stock, back orders first |
//!
//! Every day each supplier produces up to its capacity and delivers the same
//! day. Parts delivered on day `d` finish assembly and are shippable on day
//! `d + 2`, so only day-1 deliveries (plus carried stock) can serve the
//! on-time shipment window on day 3. Supplier backlogs, assembly pipelines,
//! stock and back orders all persist across steps.

mod demand;
pub mod rewards;
mod supplier;
pub mod trace;

pub use demand::{DemandStream, STREAM_DEMAND, STREAM_FORECAST};
pub use rewards::{agent_reward, compute_ofr, ofr_reward, profit_reward};
pub use supplier::{apportion, SupplierState};
pub use trace::EpisodeTrace;

pub(crate) use demand::substream;

use crate::config::EnvConfig;
use crate::error::{Error, Result};

pub const NUM_SUPPLIERS: usize = 2;
pub const NUM_FACTORIES: usize = 3;
pub const DAYS_PER_STEP: usize = 7;
pub const ORDER_DAY: usize = 1;
pub const DEMAND_DAY: usize = 2;
/// First shipping day; the only day whose shipments count as on time.
pub const ON_TIME_DAY: usize = 3;
/// Days between part delivery and the item becoming shippable.
pub const ASSEMBLY_DAYS: usize = 2;
/// Largest order a factory may place with one supplier in one step.
pub const MAX_ORDER: u64 = 99;

/// Orders per factory, per supplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct JointAction(pub [[u64; NUM_SUPPLIERS]; NUM_FACTORIES]);

impl JointAction {
    pub fn validate(&self) -> Result<()> {
        for (i, orders) in self.0.iter().enumerate() {
            for (s, &q) in orders.iter().enumerate() {
                if q > MAX_ORDER {
                    return Err(Error::Contract(format!(
                        "factory {i} orders {q} parts from supplier {s}; allowed range is [0, {MAX_ORDER}]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn per_supplier(&self, s: usize) -> [u64; NUM_FACTORIES] {
        std::array::from_fn(|i| self.0[i][s])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FactoryState {
    /// Finished items on hand.
    pub stock: u64,
    /// Items in assembly: `[shippable tomorrow, shippable the day after]`.
    pub assembling: [u64; ASSEMBLY_DAYS],
    /// Retailer orders from earlier steps that are still unfilled.
    pub back_orders: u64,
    pub shipped_last_step: u64,
    pub shipped_on_time_last_step: u64,
    pub orders_received_last_step: u64,
}

impl FactoryState {
    pub fn parts_awaiting_assembly(&self) -> u64 {
        self.assembling.iter().sum()
    }

    fn assemble_overnight(&mut self) -> u64 {
        let ready = self.assembling[0];
        self.assembling.rotate_left(1);
        self.assembling[ASSEMBLY_DAYS - 1] = 0;
        self.stock += ready;
        ready
    }
}

/// Cumulative counters used to audit conservation laws.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Totals {
    pub ordered: [u64; NUM_SUPPLIERS],
    pub delivered: [u64; NUM_SUPPLIERS],
    pub assembled: [u64; NUM_FACTORIES],
    pub shipped: [u64; NUM_FACTORIES],
    pub demanded: [u64; NUM_FACTORIES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupplyChainState {
    pub t: usize,
    pub suppliers: [SupplierState; NUM_SUPPLIERS],
    pub factories: [FactoryState; NUM_FACTORIES],
    pub demand: [DemandStream; NUM_FACTORIES],
    pub totals: Totals,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactoryOutcome {
    pub orders: [u64; NUM_SUPPLIERS],
    /// Parts received this step from each supplier.
    pub delivered: [u64; NUM_SUPPLIERS],
    pub assembled: u64,
    pub items_shipped: u64,
    pub items_shipped_on_time: u64,
    pub orders_received: u64,
    pub inventory_at_step_end: u64,
    pub back_orders_at_step_end: u64,
    pub profit_reward: f64,
    pub total_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Index of the step that was simulated.
    pub t: usize,
    pub factories: [FactoryOutcome; NUM_FACTORIES],
    /// Parts shipped by each supplier on each day of the step.
    pub daily_deliveries: [[u64; DAYS_PER_STEP]; NUM_SUPPLIERS],
    pub ofr: f64,
    pub ofr_reward: f64,
    pub terminal: bool,
}

impl StepOutcome {
    pub fn rewards(&self) -> [f64; NUM_FACTORIES] {
        std::array::from_fn(|i| self.factories[i].total_reward)
    }
}

/// Simulator bound to one validated environment configuration.
#[derive(Debug, Clone)]
pub struct SupplyChainEnv {
    cfg: EnvConfig,
}

/// Validates `cfg` and returns the initial state for `seed`.
pub fn reset(cfg: &EnvConfig, seed: u64) -> Result<SupplyChainState> {
    Ok(SupplyChainEnv::new(cfg.clone())?.reset(seed))
}

impl SupplyChainEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn reset(&self, seed: u64) -> SupplyChainState {
        SupplyChainState {
            t: 0,
            suppliers: std::array::from_fn(|s| SupplierState::new(self.cfg.supplier_capacity[s])),
            factories: Default::default(),
            demand: std::array::from_fn(|i| DemandStream::new(&self.cfg, seed, i)),
            totals: Totals::default(),
        }
    }

    /// Pure variant of [`step_in_place`](Self::step_in_place).
    pub fn step(
        &self,
        state: &SupplyChainState,
        orders: &JointAction,
    ) -> Result<(SupplyChainState, StepOutcome)> {
        let mut next = state.clone();
        let outcome = self.step_in_place(&mut next, orders)?;
        Ok((next, outcome))
    }

    /// Simulates days 1–7 of the current step. On error the state is left
    /// untouched.
    pub fn step_in_place(
        &self,
        state: &mut SupplyChainState,
        orders: &JointAction,
    ) -> Result<StepOutcome> {
        orders.validate()?;
        if state.t >= self.cfg.t_max {
            return Err(Error::Contract(format!(
                "step called at t = {} with t_max = {}",
                state.t, self.cfg.t_max
            )));
        }

        let mut out: [FactoryOutcome; NUM_FACTORIES] = Default::default();
        let mut daily = [[0u64; DAYS_PER_STEP]; NUM_SUPPLIERS];
        let mut outstanding = [0u64; NUM_FACTORIES];

        for day in 1..=DAYS_PER_STEP {
            for (f, o) in state.factories.iter_mut().zip(out.iter_mut()) {
                o.assembled += f.assemble_overnight();
            }

            if day == ORDER_DAY {
                for (s, sup) in state.suppliers.iter_mut().enumerate() {
                    let q = orders.per_supplier(s);
                    sup.enqueue(q);
                    state.totals.ordered[s] += q.iter().sum::<u64>();
                }
            }

            if day == DEMAND_DAY {
                for i in 0..NUM_FACTORIES {
                    let d = state.demand[i].current_demand();
                    out[i].orders_received = d;
                    outstanding[i] = d;
                }
            }

            if day >= ON_TIME_DAY {
                for (i, f) in state.factories.iter_mut().enumerate() {
                    let late = f.stock.min(f.back_orders);
                    f.stock -= late;
                    f.back_orders -= late;
                    let fresh = f.stock.min(outstanding[i]);
                    f.stock -= fresh;
                    outstanding[i] -= fresh;
                    out[i].items_shipped += late + fresh;
                    if day == ON_TIME_DAY {
                        out[i].items_shipped_on_time += fresh;
                    }
                }
            }

            for (s, sup) in state.suppliers.iter_mut().enumerate() {
                let sent = sup.produce_day();
                for (i, &q) in sent.iter().enumerate() {
                    out[i].delivered[s] += q;
                    state.factories[i].assembling[ASSEMBLY_DAYS - 1] += q;
                }
                let total: u64 = sent.iter().sum();
                daily[s][day - 1] = total;
                state.totals.delivered[s] += total;
            }
        }

        let on_time: u64 = out.iter().map(|o| o.items_shipped_on_time).sum();
        let received: u64 = out.iter().map(|o| o.orders_received).sum();
        let ofr = compute_ofr(on_time, received)?;
        let ofr_r = ofr_reward(ofr, self.cfg.ofr_target);

        for (i, (f, o)) in state.factories.iter_mut().zip(out.iter_mut()).enumerate() {
            f.back_orders += outstanding[i];
            f.shipped_last_step = o.items_shipped;
            f.shipped_on_time_last_step = o.items_shipped_on_time;
            f.orders_received_last_step = o.orders_received;
            o.orders = orders.0[i];
            o.inventory_at_step_end = f.stock;
            o.back_orders_at_step_end = f.back_orders;
            o.profit_reward = profit_reward(o.items_shipped, o.orders, f.stock, &self.cfg);
            o.total_reward = agent_reward(o.profit_reward, ofr_r, &self.cfg);
            state.totals.assembled[i] += o.assembled;
            state.totals.shipped[i] += o.items_shipped;
            state.totals.demanded[i] += o.orders_received;
        }

        for d in state.demand.iter_mut() {
            d.advance();
        }
        let t = state.t;
        state.t += 1;

        Ok(StepOutcome {
            t,
            factories: out,
            daily_deliveries: daily,
            ofr,
            ofr_reward: ofr_r,
            terminal: state.t == self.cfg.t_max,
        })
    }
}

impl SupplyChainState {
    /// Checks the conservation laws that must hold after any number of steps.
    pub fn audit(&self) -> Result<()> {
        for (s, sup) in self.suppliers.iter().enumerate() {
            if self.totals.ordered[s] != self.totals.delivered[s] + sup.total_backlog() {
                return Err(Error::Contract(format!(
                    "supplier {s}: ordered {} != delivered {} + backlog {}",
                    self.totals.ordered[s],
                    self.totals.delivered[s],
                    sup.total_backlog()
                )));
            }
        }
        let delivered: u64 = self.totals.delivered.iter().sum();
        let assembled: u64 = self.totals.assembled.iter().sum();
        let in_assembly: u64 = self
            .factories
            .iter()
            .map(|f| f.parts_awaiting_assembly())
            .sum();
        if delivered != assembled + in_assembly {
            return Err(Error::Contract(format!(
                "delivered {delivered} != assembled {assembled} + in assembly {in_assembly}"
            )));
        }
        for (i, f) in self.factories.iter().enumerate() {
            if self.totals.assembled[i] != self.totals.shipped[i] + f.stock {
                return Err(Error::Contract(format!(
                    "factory {i}: assembled {} != shipped {} + stock {}",
                    self.totals.assembled[i], self.totals.shipped[i], f.stock
                )));
            }
            if self.totals.demanded[i] != self.totals.shipped[i] + f.back_orders {
                return Err(Error::Contract(format!(
                    "factory {i}: demanded {} != shipped {} + back orders {}",
                    self.totals.demanded[i], self.totals.shipped[i], f.back_orders
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env() -> SupplyChainEnv {
        SupplyChainEnv::new(EnvConfig::default()).unwrap()
    }

    #[test]
    fn reset_is_empty_and_deterministic() {
        let e = env();
        let a = e.reset(0);
        assert_eq!(a.t, 0);
        assert!(a.factories.iter().all(|f| *f == FactoryState::default()));
        assert!(a.suppliers.iter().all(|s| s.total_backlog() == 0));
        assert_eq!(a, e.reset(0));
        assert_ne!(a, e.reset(1));
    }

    #[test]
    fn reset_rejects_zero_horizon() {
        let mut cfg = EnvConfig::default();
        cfg.t_max = 0;
        let err = reset(&cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "t_max"));
    }

    #[test]
    fn idle_step_pays_only_the_offset() {
        let e = env();
        let (next, out) = e.step(&e.reset(0), &JointAction::default()).unwrap();
        assert_eq!(next.t, 1);
        for f in &out.factories {
            assert_eq!(f.delivered, [0, 0]);
            assert_eq!(f.items_shipped, 0);
            assert_abs_diff_eq!(f.profit_reward, -4.0 / 3.0, epsilon = 1e-12);
            assert!(f.back_orders_at_step_end >= 50);
        }
        assert_eq!(out.ofr, 0.0);
        assert_eq!(out.ofr_reward, 0.0);
    }

    #[test]
    fn cheap_supplier_saturates() {
        let e = env();
        let orders = JointAction([[99, 0]; 3]);
        let (next, out) = e.step(&e.reset(0), &orders).unwrap();
        assert_eq!(out.daily_deliveries[0][0], 100);
        assert!(out.daily_deliveries[0].iter().all(|&d| d <= 100));
        let on_time: u64 = out.factories.iter().map(|f| f.items_shipped_on_time).sum();
        assert!(on_time <= 100);
        assert_eq!(on_time, 100, "all day-1 deliveries are shippable on day 3");
        assert_eq!(next.suppliers[0].total_backlog(), 0);
        next.audit().unwrap();
    }

    #[test]
    fn expensive_supplier_serves_everything_on_time_when_orders_cover_demand() {
        let e = env();
        let s0 = e.reset(4);
        let demand: Vec<u64> = s0.demand.iter().map(|d| d.current_demand()).collect();
        let orders = JointAction(std::array::from_fn(|i| [0, demand[i].min(99)]));
        let (_, out) = e.step(&s0, &orders).unwrap();
        for (i, f) in out.factories.iter().enumerate() {
            assert_eq!(f.items_shipped_on_time, demand[i].min(99));
        }
    }

    #[test]
    fn terminal_at_horizon() {
        let e = env();
        let mut s = e.reset(0);
        for t in 0..52 {
            let out = e
                .step_in_place(&mut s, &JointAction([[10, 10]; 3]))
                .unwrap();
            assert_eq!(out.terminal, t == 51);
        }
        assert!(matches!(
            e.step_in_place(&mut s, &JointAction::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn out_of_range_orders_rejected_without_mutation() {
        let e = env();
        let mut s = e.reset(0);
        let before = s.clone();
        let bad = JointAction([[0, 0], [100, 0], [0, 0]]);
        assert!(matches!(
            e.step_in_place(&mut s, &bad),
            Err(Error::Contract(_))
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn back_orders_are_never_on_time() {
        let e = env();
        let mut s = e.reset(2);
        // starve one step, then flood: the backlog is served before fresh orders
        e.step_in_place(&mut s, &JointAction::default()).unwrap();
        let owed: Vec<u64> = s.factories.iter().map(|f| f.back_orders).collect();
        let out = e.step_in_place(&mut s, &JointAction([[0, 99]; 3])).unwrap();
        for (i, f) in out.factories.iter().enumerate() {
            assert!(f.items_shipped_on_time <= f.orders_received);
            assert!(f.items_shipped_on_time <= 99u64.saturating_sub(owed[i]));
        }
        s.audit().unwrap();
    }
}
