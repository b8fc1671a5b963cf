use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// One replay record. `action` is the continuous actor output in `[0, 1]^d`,
/// never the quantized order.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub obs: Vec<T>,
    pub action: Vec<T>,
    pub reward: T,
    pub next_obs: Vec<T>,
    pub terminal: bool,
}

/// Column-stacked sample of transitions.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub obs: Array2<T>,
    pub actions: Array2<T>,
    pub rewards: Array1<T>,
    pub next_obs: Array2<T>,
    /// 1 for terminal transitions, 0 otherwise.
    pub terminal: Array1<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn from_transitions(items: &[&Transition<T>]) -> Self {
        assert!(!items.is_empty(), "batch must not be empty");
        let n = items.len();
        let od = items[0].obs.len();
        let ad = items[0].action.len();
        let mut obs = Array2::zeros((n, od));
        let mut next_obs = Array2::zeros((n, od));
        let mut actions = Array2::zeros((n, ad));
        for (r, t) in items.iter().enumerate() {
            obs.row_mut(r)
                .assign(&ndarray::ArrayView1::from(&t.obs[..]));
            next_obs
                .row_mut(r)
                .assign(&ndarray::ArrayView1::from(&t.next_obs[..]));
            actions
                .row_mut(r)
                .assign(&ndarray::ArrayView1::from(&t.action[..]));
        }
        Self {
            obs,
            actions,
            rewards: items.iter().map(|t| t.reward).collect(),
            next_obs,
            terminal: items
                .iter()
                .map(|t| if t.terminal { T::one() } else { T::zero() })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Bounded FIFO replay memory with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<Transition<T>>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, rng: ChaCha8Rng) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            rng,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition<T>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition<T>> {
        self.items.get(i)
    }

    pub fn sample_indices(&mut self, n: usize) -> Vec<usize> {
        let len = self.items.len();
        (0..n).map(|_| self.rng.random_range(0..len)).collect()
    }

    /// Uniform sample of `n` transitions; `None` when the buffer is empty.
    pub fn sample(&mut self, n: usize) -> Option<Batch<T>> {
        if self.items.is_empty() || n == 0 {
            return None;
        }
        let idx = self.sample_indices(n);
        let picked: Vec<&Transition<T>> = idx.iter().map(|&i| &self.items[i]).collect();
        Some(Batch::from_transitions(&picked))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn tr(r: f64) -> Transition<f64> {
        Transition {
            obs: vec![r, 0.0],
            action: vec![0.5],
            reward: r,
            next_obs: vec![r, 1.0],
            terminal: r < 0.0,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3, ChaCha8Rng::seed_from_u64(0));
        for k in 0..5 {
            b.push(tr(k as f64));
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.get(0).unwrap().reward, 2.0);
        assert_eq!(b.get(2).unwrap().reward, 4.0);
    }

    #[test]
    fn batch_layout() {
        let mut b = ReplayBuffer::new(10, ChaCha8Rng::seed_from_u64(0));
        b.push(tr(-1.0));
        let batch = b.sample(4).unwrap();
        assert_eq!(batch.obs.dim(), (4, 2));
        assert_eq!(batch.actions.dim(), (4, 1));
        assert!(batch.terminal.iter().all(|&d| d == 1.0));
        assert!(ReplayBuffer::<f64>::new(2, ChaCha8Rng::seed_from_u64(0))
            .sample(1)
            .is_none());
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut b = ReplayBuffer::new(8, ChaCha8Rng::seed_from_u64(4));
        for k in 0..8 {
            b.push(tr(k as f64));
        }
        let mut counts = [0usize; 8];
        for i in b.sample_indices(80_000) {
            counts[i] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn size_is_bounded(cap in 1usize..50, pushes in 0usize..200) {
            let mut b = ReplayBuffer::new(cap, ChaCha8Rng::seed_from_u64(1));
            for k in 0..pushes {
                b.push(tr(k as f64));
                prop_assert!(b.len() <= cap);
            }
            prop_assert_eq!(b.len(), pushes.min(cap));
        }
    }
}
