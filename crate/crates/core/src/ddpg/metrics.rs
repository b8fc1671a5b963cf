use std::fmt::Write as _;

use crate::env::NUM_FACTORIES;
use crate::error::{Error, Result};

/// Per-episode summary. Every rate is a mean over steps (and factories,
/// where it applies).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub steps: usize,
    pub profit: [f64; NUM_FACTORIES],
    pub ofr_reward: f64,
    pub ofr: f64,
    /// Mean environment reward per factory-step.
    pub raw_score: f64,
    /// Mean reward including incentives paid, per factory-step.
    pub factory_score: f64,
    /// Mean incentive paid per factory-step.
    pub incentive: f64,
    /// Mean manager reward per factory-step.
    pub manager_score: f64,
    /// Mean order quantity per factory-step, by supplier.
    pub orders: [f64; 2],
    /// Mean auxiliary weight shown per factory-step, by supplier.
    pub aux: [f64; 2],
    /// Mean factory critic loss over the episode's updates.
    pub critic_loss: f64,
}

pub const METRICS_HEADER: &str = "episode,steps,profit_f0,profit_f1,profit_f2,ofr_reward,ofr,\
raw_score,factory_score,incentive,manager_score,order_s0,order_s1,aux_s0,aux_s1,critic_loss";

impl EpisodeMetrics {
    pub fn to_csv_row(&self) -> String {
        let mut s = format!("{},{}", self.episode, self.steps);
        for v in self
            .profit
            .iter()
            .chain([
                &self.ofr_reward,
                &self.ofr,
                &self.raw_score,
                &self.factory_score,
                &self.incentive,
                &self.manager_score,
            ])
            .chain(&self.orders)
            .chain(&self.aux)
            .chain([&self.critic_loss])
        {
            let _ = write!(s, ",{v}");
        }
        s
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let bad = |reason: String| Error::Metrics {
            path: Default::default(),
            reason,
        };
        let cols: Vec<&str> = line.trim().split(',').collect();
        let expected = METRICS_HEADER.split(',').count();
        if cols.len() != expected {
            return Err(bad(format!(
                "expected {expected} columns, found {}",
                cols.len()
            )));
        }
        let int = |k: usize| {
            cols[k]
                .parse::<usize>()
                .map_err(|_| bad(format!("column {k}: `{}` is not an integer", cols[k])))
        };
        let num = |k: usize| {
            cols[k]
                .parse::<f64>()
                .map_err(|_| bad(format!("column {k}: `{}` is not a number", cols[k])))
        };
        Ok(Self {
            episode: int(0)?,
            steps: int(1)?,
            profit: [num(2)?, num(3)?, num(4)?],
            ofr_reward: num(5)?,
            ofr: num(6)?,
            raw_score: num(7)?,
            factory_score: num(8)?,
            incentive: num(9)?,
            manager_score: num(10)?,
            orders: [num(11)?, num(12)?],
            aux: [num(13)?, num(14)?],
            critic_loss: num(15)?,
        })
    }
}

pub fn metrics_to_csv(rows: &[EpisodeMetrics]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

pub fn metrics_from_csv(text: &str) -> Result<Vec<EpisodeMetrics>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == METRICS_HEADER => {}
        _ => {
            return Err(Error::Metrics {
                path: Default::default(),
                reason: "missing or unexpected header".into(),
            })
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(EpisodeMetrics::from_csv_row)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let m = EpisodeMetrics {
            episode: 7,
            steps: 52,
            profit: [0.1, -0.25, 1.0 / 3.0],
            ofr_reward: 0.5,
            ofr: 0.81,
            raw_score: 0.4,
            factory_score: 0.41,
            incentive: 0.01,
            manager_score: 0.39,
            orders: [55.5, 12.25],
            aux: [0.0, 0.9],
            critic_loss: 1e-3,
        };
        let text = metrics_to_csv(&[m.clone(), EpisodeMetrics::default()]);
        let back = metrics_from_csv(&text).unwrap();
        assert_eq!(back[0], m);
        assert_eq!(back.len(), 2);
        assert!(metrics_from_csv("nope\n1,2").is_err());
        assert!(EpisodeMetrics::from_csv_row("1,2,3").is_err());
    }
}
