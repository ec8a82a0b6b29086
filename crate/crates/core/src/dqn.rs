//! DQN power controller with a factorized action space.
//!
//! The network emits one head of `n_power_levels` values per BS. The joint
//! value of an action is the sum of the selected entry of every head, so the
//! greedy joint action is the per-head argmax and the bootstrap maximum is
//! the sum of per-head maxima.

use std::collections::VecDeque;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Env, EnvState, StepOutcome};
use crate::error::{Error, Result};
use crate::nn::{Adam, Gradients, Mlp};
use crate::radio::PowerAction;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_init: f64,
    pub epsilon_floor: f64,
    /// Multiplicative decay applied once per episode.
    pub epsilon_decay: f64,
    pub batch_size: usize,
    /// Train when the global slot counter is a multiple of this.
    pub train_every: usize,
    /// Copy online weights to the target network on multiples of this.
    pub target_sync_every: usize,
    pub slots_per_episode: usize,
    pub episodes: usize,
    pub replay_capacity: usize,
    pub hidden_layers: Vec<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 0.001,
            epsilon_init: 1.0,
            epsilon_floor: 0.01,
            epsilon_decay: 0.995,
            batch_size: 256,
            train_every: 10,
            target_sync_every: 100,
            slots_per_episode: 50,
            episodes: 300,
            replay_capacity: 50_000,
            hidden_layers: vec![128, 64],
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor <= self.epsilon_init && self.epsilon_init <= 1.0) {
            return fail("need 0 < epsilon_floor <= epsilon_init <= 1");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return fail("epsilon_decay must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return fail("need 0 < batch_size <= replay_capacity");
        }
        if self.train_every == 0 || self.target_sync_every == 0 || self.slots_per_episode == 0 {
            return fail("train_every, target_sync_every and slots_per_episode must be positive");
        }
        if self.hidden_layers.contains(&0) {
            return fail("hidden layer widths must be positive");
        }
        Ok(())
    }

    pub fn layer_sizes(&self, state_dim: usize, output_dim: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_layers.len() + 2);
        sizes.push(state_dim);
        sizes.extend(&self.hidden_layers);
        sizes.push(output_dim);
        sizes
    }

    pub fn decay_epsilon(&self, epsilon: f64) -> f64 {
        (epsilon * self.epsilon_decay).max(self.epsilon_floor)
    }
}

/// `max(0.01, 0.995 * epsilon)`.
pub fn decay_epsilon(epsilon: f64) -> f64 {
    AgentConfig::default().decay_epsilon(epsilon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub action: PowerAction,
    pub reward: f64,
    pub next_state: EnvState,
}

/// Bounded FIFO; the oldest transition is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `batch` distinct transitions; `None` if too few stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        let picks = rand::seq::index::sample(rng, self.items.len(), batch);
        Some(picks.iter().map(|i| &self.items[i]).collect())
    }
}

/// Per-head argmax over a flat `n_heads * n_levels` output; ties go to the
/// lowest level.
pub fn greedy_action(q: &[f64], n_heads: usize, n_levels: usize) -> PowerAction {
    assert_eq!(q.len(), n_heads * n_levels, "Q output width");
    PowerAction(
        q.chunks_exact(n_levels)
            .map(|head| {
                head.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                    )
                    .0
            })
            .collect(),
    )
}

pub fn random_action<R: Rng + ?Sized>(n_heads: usize, n_levels: usize, rng: &mut R) -> PowerAction {
    PowerAction((0..n_heads).map(|_| rng.random_range(0..n_levels)).collect())
}

/// Epsilon-greedy over the joint action space.
pub fn select_action<R: Rng + ?Sized>(
    state: &EnvState,
    net: &Mlp,
    epsilon: f64,
    n_heads: usize,
    n_levels: usize,
    rng: &mut R,
) -> Result<PowerAction> {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(random_action(n_heads, n_levels, rng));
    }
    let q = net.predict(state.as_slice())?;
    Ok(greedy_action(&q, n_heads, n_levels))
}

/// Sum over heads of the entry picked by `action`.
pub fn joint_q(q_row: &[f64], action: &PowerAction, n_levels: usize) -> f64 {
    action
        .levels()
        .iter()
        .enumerate()
        .map(|(n, &m)| q_row[n * n_levels + m])
        .sum()
}

/// Sum over heads of the head maximum.
pub fn max_joint_q(q_row: &[f64], n_levels: usize) -> f64 {
    q_row
        .chunks_exact(n_levels)
        .map(|h| h.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum()
}

fn stack_states<'a>(states: impl ExactSizeIterator<Item = &'a EnvState>, dim: usize) -> Result<Array2<f64>> {
    let rows = states.len();
    let mut flat = Vec::with_capacity(rows * dim);
    for s in states {
        if s.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: s.len(),
            });
        }
        flat.extend_from_slice(s.as_slice());
    }
    Ok(Array2::from_shape_vec((rows, dim), flat).expect("rows * dim values"))
}

/// Bootstrapped targets `R + gamma * sum_n max_m Q_n(s', m)` under the target
/// network. Every transition is treated as non-terminal.
pub fn td_targets(batch: &[&Transition], target: &Mlp, gamma: f64, n_levels: usize) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let next = stack_states(batch.iter().map(|t| &t.next_state), target.input_dim())?;
    let q_next = target.forward(next.view())?.into_output();
    Ok(batch
        .iter()
        .zip(q_next.rows())
        .map(|(t, row)| t.reward + gamma * max_joint_q(row.as_slice().expect("contiguous"), n_levels))
        .collect())
}

/// Mean squared Bellman error of `net` on `batch` against fixed `targets`,
/// with its exact gradient.
pub fn bellman_loss(net: &Mlp, batch: &[&Transition], targets: &[f64], n_levels: usize) -> Result<(f64, Gradients)> {
    if batch.len() != targets.len() || batch.is_empty() {
        return Err(Error::Shape {
            expected: batch.len(),
            actual: targets.len(),
        });
    }
    let states = stack_states(batch.iter().map(|t| &t.state), net.input_dim())?;
    let pass = net.forward(states.view())?;
    let out = pass.output();
    let b = batch.len() as f64;
    let mut grad = Array2::zeros(out.raw_dim());
    let mut loss = 0.0;
    for (j, (t, &y)) in batch.iter().zip(targets).enumerate() {
        let q = joint_q(out.row(j).as_slice().expect("contiguous"), &t.action, n_levels);
        let err = y - q;
        loss += err * err;
        for (n, &m) in t.action.levels().iter().enumerate() {
            grad[[j, n * n_levels + m]] = -2.0 * err / b;
        }
    }
    let grads = net.backward(&pass, grad.view())?;
    Ok((loss / b, grads))
}

/// One minibatch update. Returns the pre-update loss, or `None` when the
/// buffer holds fewer than `batch_size` transitions.
pub fn train_step<R: Rng + ?Sized>(
    net: &mut Mlp,
    adam: &mut Adam,
    target: &Mlp,
    buffer: &ReplayBuffer,
    rng: &mut R,
    config: &AgentConfig,
    n_levels: usize,
) -> Result<Option<f64>> {
    let Some(batch) = buffer.sample(config.batch_size, rng) else {
        return Ok(None);
    };
    let targets = td_targets(&batch, target, config.gamma, n_levels)?;
    let (loss, grads) = bellman_loss(net, &batch, &targets, n_levels)?;
    adam.step(net, &grads)?;
    Ok(Some(loss))
}

/// Value copy of the online network.
pub fn sync_target(net: &Mlp) -> Mlp {
    net.clone()
}

/// Online/target networks, optimizer, replay memory and exploration state.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    n_heads: usize,
    n_levels: usize,
    pub online: Mlp,
    pub target: Mlp,
    adam: Adam,
    buffer: ReplayBuffer,
    epsilon: f64,
    rng: ChaCha8Rng,
    global_step: u64,
}

impl Agent {
    /// The agent draws from its own stream of `seed`, separate from the
    /// environment's, so exploration never perturbs channel draws.
    pub fn new(config: AgentConfig, state_dim: usize, n_heads: usize, n_levels: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let online = Mlp::init(&config.layer_sizes(state_dim, n_heads * n_levels), &mut rng)?;
        let target = sync_target(&online);
        let adam = Adam::new(&online, config.learning_rate);
        Ok(Self {
            buffer: ReplayBuffer::new(config.replay_capacity),
            epsilon: config.epsilon_init,
            config,
            n_heads,
            n_levels,
            online,
            target,
            adam,
            rng,
            global_step: 0,
        })
    }

    /// Agent sized for `env`'s state and action spaces.
    pub fn for_env(config: AgentConfig, env: &Env, seed: u64) -> Result<Self> {
        let c = env.config();
        Self::new(config, c.state_dim(), c.n_cells, c.n_power_levels, seed)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn act(&mut self, state: &EnvState) -> Result<PowerAction> {
        select_action(
            state,
            &self.online,
            self.epsilon,
            self.n_heads,
            self.n_levels,
            &mut self.rng,
        )
    }

    pub fn greedy(&self, state: &EnvState) -> Result<PowerAction> {
        let q = self.online.predict(state.as_slice())?;
        Ok(greedy_action(&q, self.n_heads, self.n_levels))
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn train(&mut self) -> Result<Option<f64>> {
        train_step(
            &mut self.online,
            &mut self.adam,
            &self.target,
            &self.buffer,
            &mut self.rng,
            &self.config,
            self.n_levels,
        )
    }

    pub fn sync_target(&mut self) {
        self.target = sync_target(&self.online);
    }

    pub fn end_episode(&mut self) {
        self.epsilon = self.config.decay_epsilon(self.epsilon);
    }
}

/// One logged slot, training or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub global_step: u64,
    pub episode: usize,
    pub slot: usize,
    pub action: PowerAction,
    /// Sum rate, bps/Hz.
    pub reward: f64,
    pub user_rates: Vec<f64>,
    pub is_ceu: Vec<bool>,
    pub rate_all: f64,
    pub rate_ccu: Option<f64>,
    pub rate_ceu: Option<f64>,
    pub epsilon: f64,
    pub loss: Option<f64>,
}

impl SlotRecord {
    #[allow(clippy::too_many_arguments)]
    fn from_outcome(
        global_step: u64,
        episode: usize,
        slot: usize,
        action: PowerAction,
        out: &StepOutcome,
        is_ceu: Vec<bool>,
        epsilon: f64,
        loss: Option<f64>,
    ) -> Self {
        Self {
            global_step,
            episode,
            slot,
            action,
            reward: out.reward,
            user_rates: out.user_rates.clone(),
            is_ceu,
            rate_all: out.mean_rate(),
            rate_ccu: out.ccu_mean,
            rate_ceu: out.ceu_mean,
            epsilon,
            loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub records: Vec<SlotRecord>,
    pub train_steps: usize,
    /// Slots on which the train gate fired, whether or not the buffer was full enough.
    pub train_opportunities: usize,
    pub target_syncs: usize,
}

/// Full episodic training loop.
///
/// Per slot: act, step, store, then train on global steps that are multiples
/// of `train_every` and sync on multiples of `target_sync_every`. Epsilon
/// decays once per episode. The global counter runs across episodes.
pub fn run_training(env: &mut Env, agent: &mut Agent) -> Result<TrainingLog> {
    let mut log = TrainingLog::default();
    let train_every = agent.config.train_every as u64;
    let sync_every = agent.config.target_sync_every as u64;
    for episode in 0..agent.config.episodes {
        let mut state = env.reset()?;
        let is_ceu = env.snapshot().expect("reset").is_ceu.clone();
        for slot in 0.. {
            let action = agent.act(&state)?;
            let out = env.step(&action)?;
            agent.remember(Transition {
                state: state.clone(),
                action: action.clone(),
                reward: out.reward,
                next_state: out.next_state.clone(),
            });
            let g = agent.global_step;
            let mut loss = None;
            if g.is_multiple_of(train_every) {
                log.train_opportunities += 1;
                loss = agent.train()?;
                if loss.is_some() {
                    log.train_steps += 1;
                }
            }
            if g.is_multiple_of(sync_every) {
                agent.sync_target();
                log.target_syncs += 1;
            }
            log.records.push(SlotRecord::from_outcome(
                g,
                episode,
                slot,
                action,
                &out,
                is_ceu.clone(),
                agent.epsilon,
                loss,
            ));
            agent.global_step += 1;
            state = out.next_state;
            if out.truncated {
                break;
            }
        }
        agent.end_episode();
    }
    Ok(log)
}

/// Rolls out `policy` on `episodes` fresh episodes and logs every slot.
pub fn run_policy<F>(env: &mut Env, episodes: usize, mut policy: F) -> Result<Vec<SlotRecord>>
where
    F: FnMut(&EnvState) -> Result<PowerAction>,
{
    let mut records = Vec::with_capacity(episodes * env.slots_per_episode());
    let mut g = 0u64;
    for episode in 0..episodes {
        let mut state = env.reset()?;
        let is_ceu = env.snapshot().expect("reset").is_ceu.clone();
        for slot in 0.. {
            let action = policy(&state)?;
            let out = env.step(&action)?;
            records.push(SlotRecord::from_outcome(
                g,
                episode,
                slot,
                action,
                &out,
                is_ceu.clone(),
                0.0,
                None,
            ));
            g += 1;
            state = out.next_state;
            if out.truncated {
                break;
            }
        }
    }
    Ok(records)
}

/// Greedy (epsilon = 0) rollouts of `net`.
pub fn run_greedy_eval(env: &mut Env, net: &Mlp, episodes: usize) -> Result<Vec<SlotRecord>> {
    let (heads, levels) = (env.config().n_cells, env.config().n_power_levels);
    if net.output_dim() != heads * levels || net.input_dim() != env.state_dim() {
        return Err(Error::Shape {
            expected: heads * levels,
            actual: net.output_dim(),
        });
    }
    run_policy(env, episodes, |s| {
        Ok(greedy_action(&net.predict(s.as_slice())?, heads, levels))
    })
}

/// Mean of `rate_all` over records.
pub fn mean_rate(records: &[SlotRecord]) -> f64 {
    records.iter().map(|r| r.rate_all).sum::<f64>() / records.len() as f64
}

/// Per-user mean rate of one group, pooled over all users in all records.
pub fn pooled_group_rate(records: &[SlotRecord], ceu: bool) -> Option<f64> {
    let (sum, n) = records
        .iter()
        .flat_map(|r| r.user_rates.iter().zip(&r.is_ceu))
        .filter(|(_, &c)| c == ceu)
        .fold((0.0, 0usize), |(s, n), (r, _)| (s + r, n + 1));
    (n > 0).then(|| sum / n as f64)
}
