//! Per-step episode traces exported as CSV.

use std::fmt::Write as _;
use std::path::Path;

use super::{StepOutcome, NUM_FACTORIES, NUM_SUPPLIERS};
use crate::error::{Error, Result};

/// Ordered record of the outcomes of one episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<StepOutcome>,
}

impl EpisodeTrace {
    pub fn push(&mut self, outcome: StepOutcome) {
        self.steps.push(outcome);
    }

    pub fn header() -> String {
        let mut cols = vec!["t".to_string()];
        for i in 0..NUM_FACTORIES {
            for s in 0..NUM_SUPPLIERS {
                cols.push(format!("f{i}_order_s{s}"));
            }
            for s in 0..NUM_SUPPLIERS {
                cols.push(format!("f{i}_delivered_s{s}"));
            }
            for name in [
                "shipped",
                "on_time",
                "stock",
                "back_orders",
                "profit_reward",
                "reward",
            ] {
                cols.push(format!("f{i}_{name}"));
            }
        }
        cols.push("ofr".into());
        cols.push("ofr_reward".into());
        cols.join(",")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Self::header();
        out.push('\n');
        for step in &self.steps {
            let _ = write!(out, "{}", step.t);
            for f in &step.factories {
                for q in f.orders.iter().chain(&f.delivered) {
                    let _ = write!(out, ",{q}");
                }
                let _ = write!(
                    out,
                    ",{},{},{},{},{},{}",
                    f.items_shipped,
                    f.items_shipped_on_time,
                    f.inventory_at_step_end,
                    f.back_orders_at_step_end,
                    f.profit_reward,
                    f.total_reward
                );
            }
            let _ = writeln!(out, ",{},{}", step.ofr, step.ofr_reward);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EnvConfig;
    use crate::env::{JointAction, SupplyChainEnv};

    #[test]
    fn one_row_per_step_with_matching_width() {
        let env = SupplyChainEnv::new(EnvConfig::default()).unwrap();
        let mut s = env.reset(9);
        let mut trace = EpisodeTrace::default();
        for _ in 0..5 {
            trace.push(
                env.step_in_place(&mut s, &JointAction([[20, 30]; 3]))
                    .unwrap(),
            );
        }
        let csv = trace.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        let width = lines[0].split(',').count();
        assert_eq!(width, 1 + NUM_FACTORIES * 10 + 2);
        assert!(lines.iter().all(|l| l.split(',').count() == width));
        assert!(lines[1].starts_with("0,20,30,"));
    }
}
