use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Mode};
use crate::env::{substream, JointAction, NUM_FACTORIES, NUM_SUPPLIERS};
use crate::error::{Error, Result};
use crate::manager::{ManagerAction, MediatedGame, MANAGER_ACTION_WIDTH};
use crate::scalar::Scalar;

use super::agent::{quantize_order, AgentDims, DdpgAgent};
use super::buffer::{ReplayBuffer, Transition};
use super::metrics::EpisodeMetrics;

// Sub-streams derived from the run seed; learner `k` adds `k` to the base.
const STREAM_EPISODES: u64 = 0x300;
const STREAM_INIT: u64 = 0x400;
const STREAM_NOISE: u64 = 0x500;
const STREAM_REPLAY: u64 = 0x600;
const MANAGER_SLOT: u64 = NUM_FACTORIES as u64;

/// How the auxiliary states are chosen in managed mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManagerPolicy {
    Learning,
    /// Always shows all-zero auxiliary states and never trains.
    FrozenZero,
}

/// Exploration noise for `episode` out of `total`: linear from the start
/// to the end value.
pub fn noise_schedule(start: f64, end: f64, episode: usize, total: usize) -> f64 {
    if total <= 1 {
        return start;
    }
    let frac = (episode.min(total - 1)) as f64 / (total - 1) as f64;
    start + (end - start) * frac
}

/// A learner together with its replay memory.
#[derive(Debug, Clone)]
pub struct Learner<T: Scalar> {
    pub agent: DdpgAgent<T>,
    pub buffer: ReplayBuffer<T>,
}

impl<T: Scalar> Learner<T> {
    fn new(dims: AgentDims, cfg: &ExperimentConfig, seed: u64, slot: u64) -> Self {
        let mut init = substream(seed, STREAM_INIT + slot);
        Self {
            agent: DdpgAgent::new(
                dims,
                &cfg.ddpg,
                &mut init,
                substream(seed, STREAM_NOISE + slot),
            ),
            buffer: ReplayBuffer::new(
                cfg.ddpg.replay_capacity,
                substream(seed, STREAM_REPLAY + slot),
            ),
        }
    }

    /// Runs the configured number of updates once the warm-up is over.
    /// Returns the summed critic loss and the number of updates.
    fn train(&mut self, cfg: &ExperimentConfig) -> Result<(f64, usize)> {
        let ready = cfg.ddpg.warmup.max(cfg.ddpg.batch_size);
        if self.buffer.len() < ready {
            return Ok((0.0, 0));
        }
        let mut loss = 0.0;
        for _ in 0..cfg.ddpg.updates_per_step {
            let batch = self
                .buffer
                .sample(cfg.ddpg.batch_size)
                .expect("buffer is non-empty");
            loss += self.agent.update(&batch)?.critic_loss;
        }
        Ok((loss, cfg.ddpg.updates_per_step))
    }
}

fn to_scalar<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

/// Trains three factory learners, plus the manager in managed mode, on one
/// run seed.
#[derive(Debug, Clone)]
pub struct Trainer<T: Scalar> {
    cfg: ExperimentConfig,
    mode: Mode,
    policy: ManagerPolicy,
    game: MediatedGame,
    agents: Vec<Learner<T>>,
    manager: Option<Learner<T>>,
    episode_rng: ChaCha8Rng,
    episode: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(cfg: &ExperimentConfig, mode: Mode, seed: u64) -> Result<Self> {
        Self::with_policy(cfg, mode, seed, ManagerPolicy::Learning)
    }

    pub fn with_policy(
        cfg: &ExperimentConfig,
        mode: Mode,
        seed: u64,
        policy: ManagerPolicy,
    ) -> Result<Self> {
        cfg.validate()?;
        let game = MediatedGame::new(cfg.env.clone(), cfg.incentive_scale)?;
        let raw_len = game.game().schema().len();
        let agent_dims = match mode {
            Mode::Naive => AgentDims {
                obs: raw_len,
                action: NUM_SUPPLIERS,
                passive_obs: 0,
            },
            Mode::Managed => AgentDims {
                obs: raw_len + NUM_SUPPLIERS,
                action: NUM_SUPPLIERS,
                passive_obs: NUM_SUPPLIERS,
            },
        };
        let agents = (0..NUM_FACTORIES as u64)
            .map(|k| Learner::new(agent_dims, cfg, seed, k))
            .collect();
        let manager = (mode == Mode::Managed && policy == ManagerPolicy::Learning).then(|| {
            let dims = AgentDims {
                obs: game.game().schema().manager_len(),
                action: MANAGER_ACTION_WIDTH,
                passive_obs: 0,
            };
            Learner::new(dims, cfg, seed, MANAGER_SLOT)
        });
        Ok(Self {
            cfg: cfg.clone(),
            mode,
            policy,
            game,
            agents,
            manager,
            episode_rng: substream(seed, STREAM_EPISODES),
            episode: 0,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn policy(&self) -> ManagerPolicy {
        self.policy
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn agents(&self) -> &[Learner<T>] {
        &self.agents
    }

    pub fn manager(&self) -> Option<&Learner<T>> {
        self.manager.as_ref()
    }

    fn choose_aux(
        &mut self,
        manager_obs: &[f64],
        explore: bool,
    ) -> Result<(ManagerAction, Vec<T>)> {
        match self.manager.as_mut() {
            Some(m) => {
                let a = m.agent.act(&to_scalar(manager_obs), explore)?;
                let flat: Vec<f64> = a.iter().map(|x| x.as_f64()).collect();
                Ok((ManagerAction::from_flat(&flat)?, a))
            }
            None => Ok((ManagerAction::zero(), vec![T::zero(); MANAGER_ACTION_WIDTH])),
        }
    }

    fn agent_obs(
        &self,
        raw: &[Vec<f64>; NUM_FACTORIES],
        aux: &ManagerAction,
    ) -> [Vec<T>; NUM_FACTORIES] {
        std::array::from_fn(|i| {
            let mut v = to_scalar(&raw[i]);
            if self.mode == Mode::Managed {
                v.extend(aux.0[i].iter().map(|&x| T::of(x)));
            }
            v
        })
    }

    /// Plays and learns from one episode.
    pub fn train_episode(&mut self) -> Result<EpisodeMetrics> {
        self.run_episode(true)
    }

    /// Plays one episode with the current policies, without noise, storage
    /// or updates.
    pub fn evaluate_episode(&mut self) -> Result<EpisodeMetrics> {
        self.run_episode(false)
    }

    fn run_episode(&mut self, learn: bool) -> Result<EpisodeMetrics> {
        let env_seed = self.episode_rng.random::<u64>();
        let sigma = noise_schedule(
            self.cfg.ddpg.noise_start,
            self.cfg.ddpg.noise_end,
            self.episode,
            self.cfg.episodes,
        );
        for l in self.agents.iter_mut().chain(self.manager.as_mut()) {
            l.agent.set_noise_std(sigma);
        }

        let game = self.game.clone();
        let mut state = game.reset(env_seed);
        let mut manager_obs = game.manager_observation(&state);
        let (mut aux, mut aux_action) = self.choose_aux(&manager_obs, learn)?;
        let raw0: [Vec<f64>; NUM_FACTORIES] =
            std::array::from_fn(|i| game.game().build_agent_observation(&state.env, i));
        let mut obs = self.agent_obs(&raw0, &aux);

        let mut acc = Accumulator::default();
        loop {
            let mut actions: Vec<Vec<T>> = Vec::with_capacity(NUM_FACTORIES);
            let mut joint = JointAction::default();
            for (i, learner) in self.agents.iter_mut().enumerate() {
                let a = learner.agent.act(&obs[i], learn)?;
                for (s, x) in a.iter().enumerate() {
                    joint.0[i][s] = quantize_order(x.as_f64());
                }
                actions.push(a);
            }

            let step = game.mediate_step(&mut state, &aux, &joint)?;
            let (next_aux, next_aux_action) = if step.terminal {
                (ManagerAction::zero(), vec![T::zero(); MANAGER_ACTION_WIDTH])
            } else {
                self.choose_aux(&step.manager_obs, learn)?
            };
            let next_obs = self.agent_obs(&step.raw_agent_obs, &next_aux);
            acc.record(&step, &aux, &joint);

            if learn {
                for (i, learner) in self.agents.iter_mut().enumerate() {
                    // incentives are credited to the step whose orders earned them
                    let reward = step.raw_rewards[i] + step.incentives_earned[i];
                    learner.buffer.push(Transition {
                        obs: obs[i].clone(),
                        action: actions[i].clone(),
                        reward: T::of(reward),
                        next_obs: next_obs[i].clone(),
                        terminal: step.terminal,
                    });
                }
                if let Some(m) = self.manager.as_mut() {
                    let raw: f64 = step.raw_rewards.iter().sum();
                    let earned: f64 = step.incentives_earned.iter().sum();
                    m.buffer.push(Transition {
                        obs: to_scalar(&manager_obs),
                        action: aux_action.clone(),
                        reward: T::of(raw - earned),
                        next_obs: to_scalar(&step.manager_obs),
                        terminal: step.terminal,
                    });
                }
                for learner in self.agents.iter_mut() {
                    let (loss, n) = learner.train(&self.cfg)?;
                    acc.critic_loss += loss;
                    acc.updates += n;
                }
                if let Some(m) = self.manager.as_mut() {
                    m.train(&self.cfg)?;
                }
            }

            let terminal = step.terminal;
            obs = next_obs;
            manager_obs = step.manager_obs;
            aux = next_aux;
            aux_action = next_aux_action;
            if terminal {
                break;
            }
        }
        let metrics = acc.finish(self.episode);
        if learn {
            self.episode += 1;
        }
        Ok(metrics)
    }

    /// Trains `episodes` more episodes and returns their metrics.
    pub fn train(&mut self, episodes: usize) -> Result<Vec<EpisodeMetrics>> {
        if self.episode + episodes > self.cfg.episodes {
            return Err(Error::config(
                "episodes",
                format!(
                    "cannot train {episodes} more episodes after {} of {}",
                    self.episode, self.cfg.episodes
                ),
            ));
        }
        (0..episodes).map(|_| self.train_episode()).collect()
    }
}

#[derive(Debug, Default)]
struct Accumulator {
    steps: usize,
    profit: [f64; NUM_FACTORIES],
    ofr: f64,
    ofr_reward: f64,
    raw: f64,
    shaped: f64,
    incentive: f64,
    manager: f64,
    orders: [f64; NUM_SUPPLIERS],
    aux: [f64; NUM_SUPPLIERS],
    critic_loss: f64,
    updates: usize,
}

impl Accumulator {
    fn record(
        &mut self,
        step: &crate::manager::MediatedStep,
        aux: &ManagerAction,
        joint: &JointAction,
    ) {
        self.steps += 1;
        for i in 0..NUM_FACTORIES {
            self.profit[i] += step.outcome.factories[i].profit_reward;
            for s in 0..NUM_SUPPLIERS {
                self.orders[s] += joint.0[i][s] as f64;
                self.aux[s] += aux.0[i][s];
            }
        }
        self.ofr += step.outcome.ofr;
        self.ofr_reward += step.outcome.ofr_reward;
        self.raw += step.raw_rewards.iter().sum::<f64>();
        self.shaped += step.shaped_rewards.iter().sum::<f64>();
        self.incentive += step.incentives_paid.iter().sum::<f64>();
        self.manager += step.manager_reward;
    }

    fn finish(self, episode: usize) -> EpisodeMetrics {
        let t = self.steps.max(1) as f64;
        let ft = t * NUM_FACTORIES as f64;
        EpisodeMetrics {
            episode,
            steps: self.steps,
            profit: self.profit.map(|p| p / t),
            ofr_reward: self.ofr_reward / t,
            ofr: self.ofr / t,
            raw_score: self.raw / ft,
            factory_score: self.shaped / ft,
            incentive: self.incentive / ft,
            manager_score: self.manager / ft,
            orders: self.orders.map(|o| o / ft),
            aux: self.aux.map(|a| a / ft),
            critic_loss: if self.updates > 0 {
                self.critic_loss / self.updates as f64
            } else {
                0.0
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::smoke();
        c.episodes = 3;
        c
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(noise_schedule(0.1, 0.02, 0, 500), 0.1);
        approx::assert_abs_diff_eq!(noise_schedule(0.1, 0.02, 499, 500), 0.02, epsilon = 1e-15);
        assert_eq!(noise_schedule(0.1, 0.02, 0, 1), 0.1);
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut t = Trainer::<f64>::new(&cfg(), Mode::Managed, 5).unwrap();
            t.train(3).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn frozen_zero_manager_matches_naive() {
        let c = cfg();
        let mut naive = Trainer::<f64>::new(&c, Mode::Naive, 2).unwrap();
        let mut frozen =
            Trainer::<f64>::with_policy(&c, Mode::Managed, 2, ManagerPolicy::FrozenZero).unwrap();
        let a = naive.train(3).unwrap();
        let b = frozen.train(3).unwrap();
        assert_eq!(a, b);
        for (x, y) in naive.agents().iter().zip(frozen.agents()) {
            let (lx, ly) = (&x.agent.actor().layers()[0], &y.agent.actor().layers()[0]);
            let shared = lx.inputs();
            assert_eq!(ly.inputs(), shared + 2);
            assert_eq!(lx.weight, ly.weight.slice(ndarray::s![..shared, ..]));
            assert!(ly
                .weight
                .slice(ndarray::s![shared.., ..])
                .iter()
                .all(|&w| w == 0.0));
            assert_eq!(x.agent.actor().layers()[1..], y.agent.actor().layers()[1..]);
        }
    }

    #[test]
    fn metrics_respect_reward_bounds() {
        let mut t = Trainer::<f32>::new(&cfg(), Mode::Managed, 1).unwrap();
        for m in t.train(2).unwrap() {
            assert_eq!(m.steps, 52);
            assert!((-1.4..=1.1).contains(&m.raw_score), "{m:?}");
            assert!(m.incentive >= 0.0);
            approx::assert_abs_diff_eq!(m.manager_score, m.raw_score - m.incentive, epsilon = 1e-9);
            assert!(m.orders.iter().all(|o| (0.0..=99.0).contains(o)));
        }
    }

    #[test]
    fn refuses_to_overrun_the_schedule() {
        let mut t = Trainer::<f64>::new(&cfg(), Mode::Naive, 0).unwrap();
        assert!(t.train(4).is_err());
    }
}
