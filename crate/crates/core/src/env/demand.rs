//! Retailer demand and its noisy forecasts.

use std::collections::VecDeque;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::EnvConfig;

/// Sub-stream ids derived from the episode seed. Demand and forecast noise
/// draw from disjoint streams so either can be reseeded without disturbing
/// the other.
pub const STREAM_DEMAND: u64 = 0x100;
pub const STREAM_FORECAST: u64 = 0x200;

pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Demand seen by one factory from its retailer.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandStream {
    demand_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    lo: u64,
    hi: u64,
    sigma: f64,
    /// Realized demand for the current step and the following ones.
    upcoming: VecDeque<u64>,
    /// Noisy estimates aligned with `upcoming`.
    forecasts: Vec<f64>,
}

impl DemandStream {
    pub fn new(cfg: &EnvConfig, seed: u64, retailer: usize) -> Self {
        let mut s = Self {
            demand_rng: substream(seed, STREAM_DEMAND + retailer as u64),
            noise_rng: substream(seed, STREAM_FORECAST + retailer as u64),
            lo: cfg.demand_mean - cfg.demand_spread,
            hi: cfg.demand_mean + cfg.demand_spread,
            sigma: cfg.forecast_sigma,
            upcoming: VecDeque::with_capacity(cfg.forecast_horizon),
            forecasts: Vec::with_capacity(cfg.forecast_horizon),
        };
        for _ in 0..cfg.forecast_horizon {
            let d = s.draw();
            s.upcoming.push_back(d);
        }
        s.refresh_forecasts();
        s
    }

    fn draw(&mut self) -> u64 {
        self.demand_rng.random_range(self.lo..=self.hi)
    }

    fn refresh_forecasts(&mut self) {
        let noise = Normal::new(0.0, self.sigma).expect("finite non-negative sigma");
        self.forecasts.clear();
        for &d in &self.upcoming {
            let f = d as f64 + noise.sample(&mut self.noise_rng);
            self.forecasts.push(f.max(0.0));
        }
    }

    /// Orders this retailer places in the current step.
    pub fn current_demand(&self) -> u64 {
        self.upcoming[0]
    }

    /// Forecasts for the current step and the next `horizon - 1` steps.
    pub fn forecasts(&self) -> &[f64] {
        &self.forecasts
    }

    /// Moves to the next step: realized demand shifts forward and forecasts
    /// are regenerated.
    pub fn advance(&mut self) {
        self.upcoming.pop_front();
        let d = self.draw();
        self.upcoming.push_back(d);
        self.refresh_forecasts();
    }
}
