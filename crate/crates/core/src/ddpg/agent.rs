use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::DdpgConfig;
use crate::env::MAX_ORDER;
use crate::error::{Error, Result};
use crate::neural::{Adam, Head, Mlp};
use crate::scalar::Scalar;

use super::buffer::Batch;

/// Absorbs binary representation error so that decimal inputs such as
/// `0.29` map to the order one would write down (29, not 28).
const QUANTIZE_SLACK: f64 = 1e-9;

/// Maps a continuous action component in `[0, 1]` to an order quantity:
/// `floor(100 x)`, capped at the largest legal order.
pub fn quantize_order(x: f64) -> u64 {
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
    ((x * 100.0 + QUANTIZE_SLACK).floor() as u64).min(MAX_ORDER)
}

/// Network dimensions of one learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentDims {
    pub obs: usize,
    pub action: usize,
    /// Trailing observation inputs whose first-layer weights start at zero.
    pub passive_obs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean critic value of the actor's own actions, before the actor step.
    pub actor_value: f64,
}

/// Deterministic actor-critic learner with target networks.
///
/// The actor maps an observation to `[0, 1]^action`; the critic reads the
/// action followed by the observation and returns a scalar value.
#[derive(Debug, Clone)]
pub struct DdpgAgent<T: Scalar> {
    dims: AgentDims,
    actor: Mlp<T>,
    critic: Mlp<T>,
    actor_target: Mlp<T>,
    critic_target: Mlp<T>,
    actor_opt: Adam<T>,
    critic_opt: Adam<T>,
    gamma: T,
    tau: T,
    noise_std: f64,
    noise_rng: ChaCha8Rng,
}

impl<T: Scalar> DdpgAgent<T> {
    pub fn new<R: Rng + ?Sized>(
        dims: AgentDims,
        cfg: &DdpgConfig,
        init_rng: &mut R,
        noise_rng: ChaCha8Rng,
    ) -> Self {
        let mut actor_sizes = vec![dims.obs];
        actor_sizes.extend(&cfg.hidden_units);
        actor_sizes.push(dims.action);
        let mut critic_sizes = vec![dims.action + dims.obs];
        critic_sizes.extend(&cfg.hidden_units);
        critic_sizes.push(1);

        let actor =
            Mlp::with_passive_inputs(&actor_sizes, dims.passive_obs, Head::Squash, init_rng);
        let critic =
            Mlp::with_passive_inputs(&critic_sizes, dims.passive_obs, Head::Identity, init_rng);
        Self {
            dims,
            actor_opt: Adam::for_net(T::of(cfg.actor_lr), &actor),
            critic_opt: Adam::for_net(T::of(cfg.critic_lr), &critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            gamma: T::of(cfg.gamma),
            tau: T::of(cfg.tau),
            noise_std: cfg.noise_start,
            noise_rng,
        }
    }

    pub fn dims(&self) -> AgentDims {
        self.dims
    }

    pub fn actor(&self) -> &Mlp<T> {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp<T> {
        &self.critic
    }

    pub fn actor_target(&self) -> &Mlp<T> {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &Mlp<T> {
        &self.critic_target
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn set_noise_std(&mut self, std: f64) {
        self.noise_std = std.max(0.0);
    }

    /// Actor output, with clipped Gaussian exploration noise when `explore`.
    pub fn act(&mut self, obs: &[T], explore: bool) -> Result<Vec<T>> {
        let mut a = self.actor.forward(obs)?;
        if explore && self.noise_std > 0.0 {
            let normal = Normal::new(0.0, self.noise_std)
                .map_err(|e| Error::Contract(format!("noise distribution: {e}")))?;
            for x in a.iter_mut() {
                let noisy = x.as_f64() + normal.sample(&mut self.noise_rng);
                *x = T::of(noisy.clamp(0.0, 1.0));
            }
        }
        Ok(a)
    }

    /// Critic value of an action in a state.
    pub fn q_value(&self, obs: &[T], action: &[T]) -> Result<T> {
        let mut input = Vec::with_capacity(action.len() + obs.len());
        input.extend_from_slice(action);
        input.extend_from_slice(obs);
        Ok(self.critic.forward(&input)?[0])
    }

    fn check_batch(&self, batch: &Batch<T>) -> Result<()> {
        let n = batch.len();
        let shape_err = |context, expected, actual| {
            Err(Error::Shape {
                context,
                expected,
                actual,
            })
        };
        if batch.obs.ncols() != self.dims.obs {
            return shape_err("batch observations", self.dims.obs, batch.obs.ncols());
        }
        if batch.next_obs.ncols() != self.dims.obs {
            return shape_err(
                "batch next observations",
                self.dims.obs,
                batch.next_obs.ncols(),
            );
        }
        if batch.actions.ncols() != self.dims.action {
            return shape_err("batch actions", self.dims.action, batch.actions.ncols());
        }
        for (ctx, rows) in [
            ("batch observation rows", batch.obs.nrows()),
            ("batch next observation rows", batch.next_obs.nrows()),
            ("batch action rows", batch.actions.nrows()),
            ("batch terminal flags", batch.terminal.len()),
        ] {
            if rows != n {
                return shape_err(ctx, n, rows);
            }
        }
        Ok(())
    }

    fn critic_input(actions: ArrayView2<T>, obs: ArrayView2<T>) -> Array2<T> {
        concatenate(Axis(1), &[actions, obs]).expect("row counts checked")
    }

    /// Bootstrapped targets `r + γ (1 − done) Q'(s', μ'(s'))`.
    pub fn critic_targets(&self, batch: &Batch<T>) -> Result<Array1<T>> {
        self.check_batch(batch)?;
        let next_actions = self.actor_target.forward_batch(batch.next_obs.view())?;
        let next_q = self
            .critic_target
            .forward_batch(Self::critic_input(next_actions.view(), batch.next_obs.view()).view())?;
        let one = T::one();
        Ok(Array1::from_iter(
            batch
                .rewards
                .iter()
                .zip(&batch.terminal)
                .zip(next_q.column(0))
                .map(|((&r, &d), &q)| r + self.gamma * (one - d) * q),
        ))
    }

    /// Mean squared error of the online critic against `targets`.
    pub fn critic_loss(&self, batch: &Batch<T>, targets: ArrayView1<T>) -> Result<T> {
        let q = self
            .critic
            .forward_batch(Self::critic_input(batch.actions.view(), batch.obs.view()).view())?;
        let n = T::from_usize(batch.len()).expect("batch size fits scalar");
        Ok(q.column(0)
            .iter()
            .zip(targets)
            .fold(T::zero(), |acc, (&q, &y)| acc + (q - y) * (q - y))
            / n)
    }

    /// One critic step, one actor step and a soft update of both targets.
    pub fn update(&mut self, batch: &Batch<T>) -> Result<UpdateStats> {
        let targets = self.critic_targets(batch)?;
        let n = T::from_usize(batch.len()).expect("batch size fits scalar");
        let two = T::one() + T::one();

        let critic_in = Self::critic_input(batch.actions.view(), batch.obs.view());
        let tape = self.critic.forward_tape(critic_in.view())?;
        let diff = &tape.output().column(0) - &targets;
        let loss = diff.fold(T::zero(), |acc, &d| acc + d * d) / n;
        let upstream = diff.mapv(|d| two * d / n).insert_axis(Axis(1));
        let grads = self.critic.parameter_gradients(&tape, upstream.view())?;
        self.critic_opt.step(&mut self.critic, &grads)?;

        let actor_tape = self.actor.forward_tape(batch.obs.view())?;
        let q_in = Self::critic_input(actor_tape.output().view(), batch.obs.view());
        let q_tape = self.critic.forward_tape(q_in.view())?;
        let value = q_tape.output().sum() / n;
        // ascend Q: minimize -mean(Q)
        let dq = Array2::from_elem((batch.len(), 1), -T::one() / n);
        let dx = self.critic.input_gradient(&q_tape, dq.view())?;
        let da = dx.slice(s![.., ..self.dims.action]);
        let actor_grads = self.actor.parameter_gradients(&actor_tape, da)?;
        self.actor_opt.step(&mut self.actor, &actor_grads)?;

        self.soft_update()?;
        Ok(UpdateStats {
            critic_loss: loss.as_f64(),
            actor_value: value.as_f64(),
        })
    }

    /// Polyak-averages both target networks toward the online ones.
    pub fn soft_update(&mut self) -> Result<()> {
        self.actor_target.soft_update_from(&self.actor, self.tau)?;
        self.critic_target.soft_update_from(&self.critic, self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpg::Transition;
    use rand::SeedableRng;

    fn small_cfg() -> DdpgConfig {
        DdpgConfig {
            hidden_units: vec![16, 16],
            ..DdpgConfig::default()
        }
    }

    fn agent(cfg: &DdpgConfig) -> DdpgAgent<f64> {
        let dims = AgentDims {
            obs: 3,
            action: 2,
            passive_obs: 0,
        };
        DdpgAgent::new(
            dims,
            cfg,
            &mut ChaCha8Rng::seed_from_u64(3),
            ChaCha8Rng::seed_from_u64(4),
        )
    }

    fn transition(reward: f64, terminal: bool) -> Transition<f64> {
        Transition {
            obs: vec![0.2, -0.1, 0.5],
            action: vec![0.3, 0.7],
            reward,
            next_obs: vec![0.1, 0.4, -0.3],
            terminal,
        }
    }

    fn batch(items: &[Transition<f64>]) -> Batch<f64> {
        Batch::from_transitions(&items.iter().collect::<Vec<_>>())
    }

    #[test]
    fn quantization_grid() {
        for k in 0..=1000u64 {
            let x = k as f64 / 1000.0;
            assert_eq!(quantize_order(x), (k / 10).min(99), "x = {x}");
        }
        assert_eq!(quantize_order(0.29), 29);
        assert_eq!(quantize_order(0.2899), 28);
        assert_eq!(quantize_order(0.999), 99);
        assert_eq!(quantize_order(1.0), 99);
        assert_eq!(quantize_order(-0.5), 0);
        assert_eq!(quantize_order(f64::NAN), 0);
    }

    #[test]
    fn zero_actor_outputs_half() {
        let actor: Mlp<f64> = Mlp::zeros(&[4, 8, 2], Head::Squash);
        assert_eq!(
            actor.forward(&[0.3, 0.1, 0.0, 0.9]).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(quantize_order(0.5), 50);
    }

    #[test]
    fn zero_discount_target_is_reward() {
        let cfg = DdpgConfig {
            gamma: 0.0,
            ..small_cfg()
        };
        let a = agent(&cfg);
        let y = a
            .critic_targets(&batch(&[transition(0.37, false), transition(-0.2, false)]))
            .unwrap();
        assert_eq!(y.to_vec(), vec![0.37, -0.2]);
    }

    #[test]
    fn terminal_masks_bootstrap() {
        let a = agent(&small_cfg());
        let y = a
            .critic_targets(&batch(&[transition(0.5, true), transition(0.5, false)]))
            .unwrap();
        assert_eq!(y[0], 0.5);
        let t = transition(0.5, false);
        let next_a = a.actor_target().forward(&t.next_obs).unwrap();
        let mut input = next_a.clone();
        input.extend(&t.next_obs);
        let q = a.critic_target().forward(&input).unwrap()[0];
        approx::assert_abs_diff_eq!(y[1], 0.5 + 0.99 * q, epsilon = 1e-12);
    }

    #[test]
    fn critic_regresses_single_transition() {
        let cfg = DdpgConfig {
            tau: 0.0,
            ..small_cfg()
        };
        let mut a = agent(&cfg);
        let b = batch(&[transition(1.0, false)]);
        let y = a.critic_targets(&b).unwrap();
        let initial = a.critic_loss(&b, y.view()).unwrap();
        let mut last = initial;
        for k in 0..200 {
            a.update(&b).unwrap();
            let loss = a.critic_loss(&b, y.view()).unwrap();
            if k < 100 {
                assert!(loss <= last, "loss rose at update {k}: {last} -> {loss}");
            }
            last = loss;
        }
        assert_eq!(a.critic_targets(&b).unwrap(), y, "frozen targets");
        assert!(last <= 0.01 * initial, "{initial} -> {last}");
    }

    #[test]
    fn soft_update_is_convex_combination() {
        let cfg = DdpgConfig {
            tau: 0.25,
            ..small_cfg()
        };
        let mut a = agent(&cfg);
        let before = a.critic_target().params();
        let b = batch(&[transition(1.0, false)]);
        a.update(&b).unwrap();
        let online = a.critic().params();
        let after = a.critic_target().params();
        for ((o, t0), t1) in online.iter().zip(&before).zip(&after) {
            approx::assert_abs_diff_eq!(*t1, 0.25 * o + 0.75 * t0, epsilon = 1e-12);
        }
    }

    #[test]
    fn exploration_stays_in_unit_box() {
        let mut a = agent(&DdpgConfig {
            noise_start: 5.0,
            ..small_cfg()
        });
        let clean = a.act(&[0.2, 0.1, 0.0], false).unwrap();
        assert_eq!(clean, a.act(&[0.2, 0.1, 0.0], false).unwrap());
        let mut moved = false;
        for _ in 0..50 {
            let noisy = a.act(&[0.2, 0.1, 0.0], true).unwrap();
            assert!(noisy.iter().all(|x| (0.0..=1.0).contains(x)));
            moved |= noisy != clean;
        }
        assert!(moved);
    }

    #[test]
    fn rejects_mismatched_batches() {
        let mut a = agent(&small_cfg());
        let mut t = transition(0.0, false);
        t.obs.push(1.0);
        t.next_obs.push(1.0);
        assert!(matches!(a.update(&batch(&[t])), Err(Error::Shape { .. })));
    }
}
