//! Capacity-limited supplier queues.

use super::NUM_FACTORIES;

/// One supplier: a per-factory backlog drained at a fixed daily capacity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplierState {
    pub capacity_per_day: u64,
    /// Parts ordered by each factory but not yet produced.
    pub backlog: [u64; NUM_FACTORIES],
}

impl SupplierState {
    pub fn new(capacity_per_day: u64) -> Self {
        Self {
            capacity_per_day,
            backlog: [0; NUM_FACTORIES],
        }
    }

    pub fn total_backlog(&self) -> u64 {
        self.backlog.iter().sum()
    }

    pub fn enqueue(&mut self, orders: [u64; NUM_FACTORIES]) {
        for (b, o) in self.backlog.iter_mut().zip(orders) {
            *b += o;
        }
    }

    /// Produces one day's output and removes it from the backlog.
    ///
    /// When the backlog exceeds capacity, output is split in proportion to
    /// each factory's backlog (largest-remainder rounding, lowest index wins
    /// ties).
    pub fn produce_day(&mut self) -> [u64; NUM_FACTORIES] {
        let total = self.total_backlog().min(self.capacity_per_day);
        let delivered = apportion(total, &self.backlog);
        for (b, d) in self.backlog.iter_mut().zip(delivered) {
            *b -= d;
        }
        delivered
    }

    /// Deliveries over the next `days` days if no further orders arrive,
    /// as `[day][factory]`.
    pub fn projected_deliveries(&self, days: usize) -> Vec<[u64; NUM_FACTORIES]> {
        let mut probe = self.clone();
        (0..days).map(|_| probe.produce_day()).collect()
    }
}

/// Largest-remainder apportionment of `total` units over `weights`.
///
/// Requires `total <= sum(weights)`; every share is then bounded by its
/// weight.
pub fn apportion<const N: usize>(total: u64, weights: &[u64; N]) -> [u64; N] {
    let sum: u64 = weights.iter().sum();
    let mut shares = [0u64; N];
    if sum == 0 || total == 0 {
        return shares;
    }
    debug_assert!(total <= sum);
    let mut remainders = [0u128; N];
    let mut assigned = 0u64;
    for i in 0..N {
        let num = total as u128 * weights[i] as u128;
        shares[i] = (num / sum as u128) as u64;
        remainders[i] = num % sum as u128;
        assigned += shares[i];
    }
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    // stable sort keeps lower indices first among equal remainders
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]));
    for &i in order.iter().take((total - assigned) as usize) {
        shares[i] += 1;
    }
    shares
}
