//! Maximum causal entropy inverse reinforcement learning over user event logs.
//!
//! A user's state is their cumulative action count; every action advances it
//! by one, independent of which action was taken. Rewards are linear in a
//! feature map that one-hot encodes the action and the count bucket. Fitted
//! action weights are min–max normalized and averaged into the quality,
//! reputation and price coefficients of the buyer utility.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::GlobalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    DatasetCreate,
    KernelCreate,
    Submission,
    ForumPost,
    DatasetVote,
    ForumVote,
    KernelVote,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::DatasetCreate,
        Action::KernelCreate,
        Action::Submission,
        Action::ForumPost,
        Action::DatasetVote,
        Action::ForumVote,
        Action::KernelVote,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::DatasetCreate => "dataset_create",
            Action::KernelCreate => "kernel_create",
            Action::Submission => "submission",
            Action::ForumPost => "forum_post",
            Action::DatasetVote => "dataset_vote",
            Action::ForumVote => "forum_vote",
            Action::KernelVote => "kernel_vote",
        }
    }

    pub fn is_vote(self) -> bool {
        matches!(
            self,
            Action::DatasetVote | Action::ForumVote | Action::KernelVote
        )
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    /// Accepts `dataset_create`, `DatasetCreate`, `dataset-create` and so on.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Action::ALL
            .into_iter()
            .find(|a| a.name().replace('_', "") == key)
            .ok_or_else(|| Error::UnknownAction(s.to_string()))
    }
}

/// Count buckets: `0–4, 5–9, …, 40–44, ≥45`.
pub const STATE_BUCKETS: usize = 10;
pub const BUCKET_WIDTH: usize = 5;
/// Counts at or above this value share one absorbing state.
pub const MAX_COUNT: usize = BUCKET_WIDTH * (STATE_BUCKETS - 1);
pub const N_COUNT_STATES: usize = MAX_COUNT + 1;
pub const N_ACTIONS: usize = 7;
pub const N_FEATURES: usize = N_ACTIONS + STATE_BUCKETS;

pub fn count_state(count: usize) -> usize {
    count.min(MAX_COUNT)
}

pub fn bucket_of(count: usize) -> usize {
    (count / BUCKET_WIDTH).min(STATE_BUCKETS - 1)
}

/// One user's ordered actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub user_id: String,
    pub actions: Vec<Action>,
}

impl Trace {
    /// `(state, action index)` pairs, the state being the capped cumulative count
    /// before the action.
    pub fn episode(&self) -> Vec<(usize, usize)> {
        self.actions
            .iter()
            .enumerate()
            .map(|(t, a)| (count_state(t), a.index()))
            .collect()
    }

    pub fn count(&self, pred: impl Fn(Action) -> bool) -> usize {
        self.actions.iter().filter(|&&a| pred(a)).count()
    }
}

#[derive(Debug, Deserialize)]
struct EventRow {
    user_id: String,
    order: u64,
    action: String,
}

/// Parses `user_id,order,action` rows (with header) into per-user traces,
/// ordered by user id, each sorted by `order`.
pub fn parse_traces<R: Read>(input: R) -> Result<Vec<Trace>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut users: BTreeMap<String, Vec<(u64, Action)>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: EventRow = row?;
        let action = row.action.parse()?;
        users.entry(row.user_id).or_default().push((row.order, action));
    }
    Ok(users
        .into_iter()
        .map(|(user_id, mut events)| {
            events.sort_by_key(|e| e.0);
            Trace {
                user_id,
                actions: events.into_iter().map(|e| e.1).collect(),
            }
        })
        .collect())
}

pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<Trace>> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    parse_traces(std::io::BufReader::new(file))
}

/// Writes traces in the `user_id,order,action` format read by [`parse_traces`].
pub fn write_traces<W: std::io::Write>(traces: &[Trace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "order", "action"])?;
    for t in traces {
        for (i, a) in t.actions.iter().enumerate() {
            w.write_record([t.user_id.as_str(), &i.to_string(), a.name()])?;
        }
    }
    w.flush().map_err(|e| Error::io("traces", e))?;
    Ok(())
}

/// Keeps users who create few datasets but vote a lot: users whose dataset
/// creation count is at or below the `creation_percentile` (0–100) of all
/// users, then the `n` with the most votes (ties by user id).
pub fn select_buyer_like_users(traces: &[Trace], n: usize, creation_percentile: f64) -> Vec<Trace> {
    if traces.is_empty() {
        return Vec::new();
    }
    let mut creations: Vec<usize> = traces
        .iter()
        .map(|t| t.count(|a| a == Action::DatasetCreate))
        .collect();
    creations.sort_unstable();
    let rank = ((creation_percentile.clamp(0.0, 100.0) / 100.0) * (creations.len() - 1) as f64)
        .round() as usize;
    let cutoff = creations[rank];
    let mut kept: Vec<&Trace> = traces
        .iter()
        .filter(|t| t.count(|a| a == Action::DatasetCreate) <= cutoff)
        .collect();
    kept.sort_by(|a, b| {
        b.count(Action::is_vote)
            .cmp(&a.count(Action::is_vote))
            .then_with(|| a.user_id.cmp(&b.user_id))
    });
    kept.into_iter().take(n).cloned().collect()
}

/// Linear-reward soft-MDP used for fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlModel<T> {
    n_states: usize,
    n_actions: usize,
    /// Dense feature vector per `state * n_actions + action`.
    features: Vec<Vec<T>>,
    /// Sparse `(next state, probability)` lists per `state * n_actions + action`.
    transitions: Vec<Vec<(usize, T)>>,
    pub theta: Vec<T>,
    pub gamma: T,
    pub delta: T,
    pub epsilon: T,
    q: Vec<T>,
    v: Vec<T>,
}

/// Outcome of a soft value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftViReport<T> {
    pub sweeps: usize,
    pub converged: bool,
    /// `max |ΔV|` after each sweep.
    pub residuals: Vec<T>,
}

pub const SOFT_VI_TOLERANCE: f64 = 1e-6;
pub const SOFT_VI_MAX_SWEEPS: usize = 1000;
pub const OCCUPANCY_CUTOFF: f64 = 1e-8;

fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

impl<T: Scalar> IrlModel<T> {
    /// Generic model. `features[s * n_actions + a]` must all share one length;
    /// `transitions` rows must each sum to one.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        features: Vec<Vec<T>>,
        transitions: Vec<Vec<(usize, T)>>,
        gamma: T,
        delta: T,
        epsilon: T,
    ) -> Result<Self> {
        let pairs = n_states * n_actions;
        if pairs == 0 || features.len() != pairs || transitions.len() != pairs {
            return Err(Error::Config("feature/transition tables do not match the state-action space".into()));
        }
        let dim = features[0].len();
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::Config("ragged feature map".into()));
        }
        for row in &transitions {
            let total: T = row.iter().map(|e| e.1).sum();
            if (total - T::one()).abs() > T::lit(1e-9) || row.iter().any(|e| e.0 >= n_states) {
                return Err(Error::Config("transition rows must be stochastic".into()));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            features,
            transitions,
            theta: vec![T::zero(); dim],
            gamma,
            delta,
            epsilon,
            q: vec![T::zero(); pairs],
            v: vec![T::zero(); n_states],
        })
    }

    /// The event-log model: capped cumulative-count states, deterministic
    /// increment on every action, action ⊕ count-bucket one-hot features.
    pub fn event_log(params: &GlobalParams<T>) -> Self {
        let mut features = Vec::with_capacity(N_COUNT_STATES * N_ACTIONS);
        let mut transitions = Vec::with_capacity(N_COUNT_STATES * N_ACTIONS);
        for s in 0..N_COUNT_STATES {
            for a in 0..N_ACTIONS {
                let mut phi = vec![T::zero(); N_FEATURES];
                phi[a] = T::one();
                phi[N_ACTIONS + bucket_of(s)] = T::one();
                features.push(phi);
                transitions.push(vec![(count_state(s + 1), T::one())]);
            }
        }
        Self::new(
            N_COUNT_STATES,
            N_ACTIONS,
            features,
            transitions,
            params.irl_discount,
            params.irl_trace_discount,
            params.irl_regularizer,
        )
        .expect("event-log model is well formed")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_features(&self) -> usize {
        self.theta.len()
    }

    pub fn feature(&self, state: usize, action: usize) -> &[T] {
        &self.features[state * self.n_actions + action]
    }

    pub fn transitions(&self, state: usize, action: usize) -> &[(usize, T)] {
        &self.transitions[state * self.n_actions + action]
    }

    pub fn reward(&self, state: usize, action: usize) -> T {
        self.feature(state, action)
            .iter()
            .zip(&self.theta)
            .map(|(&f, &w)| f * w)
            .sum()
    }

    pub fn q(&self, state: usize, action: usize) -> T {
        self.q[state * self.n_actions + action]
    }

    pub fn v(&self, state: usize) -> T {
        self.v[state]
    }

    /// Soft policy `exp(Q(s, a) - V(s))` from the current tables.
    pub fn policy(&self, state: usize) -> Vec<T> {
        (0..self.n_actions)
            .map(|a| (self.q(state, a) - self.v[state]).exp())
            .collect()
    }

    /// Soft Bellman backups until `max |ΔV| < tol` or `max_sweeps`.
    /// Starts from the current value table.
    pub fn soft_value_iteration(&mut self, tol: T, max_sweeps: usize) -> SoftViReport<T> {
        let rewards: Vec<T> = (0..self.n_states * self.n_actions)
            .map(|i| self.reward(i / self.n_actions, i % self.n_actions))
            .collect();
        let mut residuals = Vec::new();
        let mut next_v = vec![T::zero(); self.n_states];
        for sweep in 1..=max_sweeps {
            for (i, q) in self.q.iter_mut().enumerate() {
                let expected: T = self.transitions[i]
                    .iter()
                    .map(|&(s2, p)| p * self.v[s2])
                    .sum();
                *q = rewards[i] + self.gamma * expected;
            }
            for (s, v) in next_v.iter_mut().enumerate() {
                *v = log_sum_exp(&self.q[s * self.n_actions..(s + 1) * self.n_actions]);
            }
            let residual = self
                .v
                .iter()
                .zip(&next_v)
                .map(|(a, b)| (*a - *b).abs())
                .fold(T::zero(), T::max);
            std::mem::swap(&mut self.v, &mut next_v);
            residuals.push(residual);
            if residual < tol {
                // refresh Q against the final V so V = logsumexp Q holds exactly
                self.refresh_q(&rewards);
                return SoftViReport {
                    sweeps: sweep,
                    converged: true,
                    residuals,
                };
            }
        }
        self.refresh_q(&rewards);
        SoftViReport {
            sweeps: max_sweeps,
            converged: false,
            residuals,
        }
    }

    fn refresh_q(&mut self, rewards: &[T]) {
        for (i, q) in self.q.iter_mut().enumerate() {
            let expected: T = self.transitions[i]
                .iter()
                .map(|&(s2, p)| p * self.v[s2])
                .sum();
            *q = rewards[i] + self.gamma * expected;
        }
        for s in 0..self.n_states {
            self.v[s] = log_sum_exp(&self.q[s * self.n_actions..(s + 1) * self.n_actions]);
        }
    }

    /// Empirical discounted feature expectations `mean over episodes of
    /// Σ_t δ^t φ(s_t, a_t)`.
    pub fn empirical_feature_expectations(&self, episodes: &[Vec<(usize, usize)>]) -> Vec<T> {
        let dim = self.n_features();
        let mut mu = vec![T::zero(); dim];
        if episodes.is_empty() {
            return mu;
        }
        for ep in episodes {
            let mut discount = T::one();
            for &(s, a) in ep {
                for (m, &f) in mu.iter_mut().zip(self.feature(s, a)) {
                    *m += discount * f;
                }
                discount *= self.delta;
            }
        }
        let n = T::from_usize_lossy(episodes.len());
        mu.iter_mut().for_each(|m| *m /= n);
        mu
    }

    /// Model-side feature expectations under the current soft policy.
    ///
    /// State occupancy is propagated from `start` (a distribution over states).
    /// `survival[t]` is the fraction of episodes still running at time `t`;
    /// beyond its end nothing survives. `None` means episodes never end.
    /// Propagation stops once the discounted surviving mass falls below 1e-8.
    pub fn model_feature_expectations(&self, start: &[T], survival: Option<&[T]>) -> Vec<T> {
        let dim = self.n_features();
        let mut mu = vec![T::zero(); dim];
        let policies: Vec<Vec<T>> = (0..self.n_states).map(|s| self.policy(s)).collect();
        let mut occupancy = start.to_vec();
        let mut discount = T::one();
        let cutoff = T::lit(OCCUPANCY_CUTOFF);
        for t in 0.. {
            let alive = match survival {
                Some(sv) => match sv.get(t) {
                    Some(&a) => a,
                    None => break,
                },
                None => T::one(),
            };
            let mass = discount * alive;
            if mass < cutoff {
                break;
            }
            let mut next = vec![T::zero(); self.n_states];
            for s in 0..self.n_states {
                let d = occupancy[s];
                if d == T::zero() {
                    continue;
                }
                for a in 0..self.n_actions {
                    let w = d * policies[s][a];
                    for (m, &f) in mu.iter_mut().zip(self.feature(s, a)) {
                        *m += mass * w * f;
                    }
                    for &(s2, p) in self.transitions(s, a) {
                        next[s2] += w * p;
                    }
                }
            }
            occupancy = next;
            discount *= self.delta;
        }
        mu
    }

    /// Samples one episode of `len` steps from the current soft policy.
    pub fn sample_episode<R: Rng + ?Sized>(
        &self,
        start: usize,
        len: usize,
        rng: &mut R,
    ) -> Vec<(usize, usize)> {
        let mut s = start;
        let mut ep = Vec::with_capacity(len);
        for _ in 0..len {
            let pi = self.policy(s);
            let a = sample_index(&pi, rng);
            ep.push((s, a));
            s = sample_next(self.transitions(s, a), rng);
        }
        ep
    }
}

fn sample_index<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let total: f64 = weights.iter().map(|w| w.as_f64()).sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w.as_f64() / total;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn sample_next<T: Scalar, R: Rng + ?Sized>(row: &[(usize, T)], rng: &mut R) -> usize {
    let probs: Vec<T> = row.iter().map(|e| e.1).collect();
    row[sample_index(&probs, rng)].0
}

/// Start-state distribution and survival profile of a set of episodes.
pub fn episode_statistics<T: Scalar>(episodes: &[Vec<(usize, usize)>], n_states: usize) -> (Vec<T>, Vec<T>) {
    let mut start = vec![T::zero(); n_states];
    let nonempty: Vec<_> = episodes.iter().filter(|e| !e.is_empty()).collect();
    let n = T::from_usize_lossy(episodes.len().max(1));
    for ep in &nonempty {
        start[ep[0].0] += T::one() / T::from_usize_lossy(nonempty.len());
    }
    let max_len = episodes.iter().map(Vec::len).max().unwrap_or(0);
    let survival = (0..max_len)
        .map(|t| T::from_usize_lossy(episodes.iter().filter(|e| e.len() > t).count()) / n)
        .collect();
    (start, survival)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig<T> {
    pub learning_rate: T,
    /// Step size at iteration `i` is `learning_rate / (1 + lr_decay * i)`.
    pub lr_decay: T,
    pub tolerance: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::lit(0.1),
            lr_decay: T::lit(1e-3),
            tolerance: T::lit(1e-4),
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<T> {
    pub theta: Vec<T>,
    pub iterations: usize,
    pub gradient_norm: T,
    pub converged: bool,
    /// True if any inner soft value iteration hit its sweep cap.
    pub value_iteration_capped: bool,
}

impl<T: Scalar> FitReport<T> {
    /// The action block of `theta` (first `n_actions` components).
    pub fn action_weights(&self, n_actions: usize) -> Vec<T> {
        self.theta[..n_actions].to_vec()
    }
}

/// Gradient ascent on the regularized causal log-likelihood, starting at θ = 0:
/// `θ ← θ + η (μ_E − μ_θ − ε θ)`.
pub fn irl_fit_episodes<T: Scalar>(
    model: &mut IrlModel<T>,
    episodes: &[Vec<(usize, usize)>],
    config: &FitConfig<T>,
) -> Result<FitReport<T>> {
    if episodes.iter().all(Vec::is_empty) {
        return Err(Error::EmptyInput("traces"));
    }
    let mu_e = model.empirical_feature_expectations(episodes);
    let (start, survival) = episode_statistics::<T>(episodes, model.n_states());
    model.theta.iter_mut().for_each(|t| *t = T::zero());
    let mut capped = false;
    let mut grad_norm = T::infinity();
    let mut iterations = 0;
    let mut converged = false;
    for i in 0..config.max_iter {
        iterations = i + 1;
        let vi = model.soft_value_iteration(T::lit(SOFT_VI_TOLERANCE), SOFT_VI_MAX_SWEEPS);
        capped |= !vi.converged;
        let mu = model.model_feature_expectations(&start, Some(&survival));
        let grad: Vec<T> = mu_e
            .iter()
            .zip(&mu)
            .zip(&model.theta)
            .map(|((&e, &m), &th)| e - m - model.epsilon * th)
            .collect();
        grad_norm = grad.iter().map(|g| *g * *g).sum::<T>().sqrt();
        if grad_norm < config.tolerance {
            converged = true;
            break;
        }
        let eta = config.learning_rate / (T::one() + config.lr_decay * T::from_usize_lossy(i));
        for (th, g) in model.theta.iter_mut().zip(&grad) {
            *th += eta * *g;
        }
    }
    Ok(FitReport {
        theta: model.theta.clone(),
        iterations,
        gradient_norm: grad_norm,
        converged,
        value_iteration_capped: capped,
    })
}

/// Fits the event-log model to user traces.
pub fn irl_fit<T: Scalar>(
    traces: &[Trace],
    params: &GlobalParams<T>,
    config: &FitConfig<T>,
) -> Result<(IrlModel<T>, FitReport<T>)> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("traces"));
    }
    let episodes: Vec<_> = traces.iter().map(Trace::episode).collect();
    let mut model = IrlModel::event_log(params);
    let report = irl_fit_episodes(&mut model, &episodes, config)?;
    Ok((model, report))
}

/// Min–max normalization to `[0, 1]`.
pub fn normalize_weights<T: Scalar>(raw: &[T]) -> Result<Vec<T>> {
    let lo = raw.iter().copied().fold(T::infinity(), T::min);
    let hi = raw.iter().copied().fold(T::neg_infinity(), T::max);
    if raw.len() < 2 || !(hi > lo) {
        return Err(Error::DegenerateNormalization);
    }
    Ok(raw.iter().map(|&x| (x - lo) / (hi - lo)).collect())
}

/// Quality, reputation and price coefficients from normalized per-action
/// weights (indexed by [`Action::index`]): quality averages kernel creation and
/// forum posts, reputation averages the three votes, price is the dataset vote.
pub fn derive_lou<T: Scalar>(normalized: &[T]) -> Result<(T, T, T)> {
    if normalized.len() != N_ACTIONS {
        return Err(Error::EmptyInput("normalized weights must cover all seven actions"));
    }
    let w = |a: Action| normalized[a.index()];
    let quality = (w(Action::KernelCreate) + w(Action::ForumPost)) / T::lit(2.0);
    let reputation =
        (w(Action::DatasetVote) + w(Action::ForumVote) + w(Action::KernelVote)) / T::lit(3.0);
    let price = w(Action::DatasetVote);
    Ok((quality, reputation, price))
}
