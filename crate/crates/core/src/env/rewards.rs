//! Closed-form reward terms: normalized profit, order-fulfillment ratio,
//! and their weighted combination.

use crate::config::EnvConfig;
use crate::error::{Error, Result};

use super::NUM_SUPPLIERS;

/// Fraction of this step's retailer orders shipped on time, chain-wide.
///
/// With no orders at all the ratio is defined as 1.
pub fn compute_ofr(on_time: u64, total_orders: u64) -> Result<f64> {
    if on_time > total_orders {
        return Err(Error::Contract(format!(
            "on-time shipments {on_time} exceed total orders {total_orders}"
        )));
    }
    if total_orders == 0 {
        return Ok(1.0);
    }
    Ok(on_time as f64 / total_orders as f64)
}

/// Normalized profit of one factory for one step.
pub fn profit_reward(
    shipped: u64,
    orders: [u64; NUM_SUPPLIERS],
    inventory: u64,
    cfg: &EnvConfig,
) -> f64 {
    let revenue = shipped as f64 * cfg.item_price;
    let parts: f64 = orders
        .iter()
        .zip(cfg.part_price)
        .map(|(&q, p)| q as f64 * p)
        .sum();
    let holding = inventory as f64 * cfg.inventory_price;
    (revenue - parts - holding - cfg.profit_offset) / cfg.profit_norm
}

/// Shared bonus: 1 when the chain meets its fulfillment target (inclusive).
pub fn ofr_reward(ofr: f64, target: f64) -> f64 {
    if ofr >= target {
        1.0
    } else {
        0.0
    }
}

pub fn agent_reward(profit: f64, ofr_r: f64, cfg: &EnvConfig) -> f64 {
    cfg.w_profit * profit + cfg.w_ofr * ofr_r
}
