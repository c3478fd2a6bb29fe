//! Provider and buyer decision making: tabular ε-greedy Q-learning over
//! strategy choices, provider rewards and buyer utilities.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::{BuyerStrategy, GlobalParams, Offer, Transaction};

/// Dense state × action value table with an ε-greedy exploration schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    values: Vec<T>,
    n_states: usize,
    n_actions: usize,
    learning_rate: T,
    discount: T,
    exploration: T,
    exploration_decay: T,
    exploration_min: T,
}

impl<T: Scalar> QTable<T> {
    pub fn new(n_states: usize, n_actions: usize, params: &GlobalParams<T>) -> Self {
        assert!(n_states > 0 && n_actions > 0, "empty Q-table");
        Self {
            values: vec![T::zero(); n_states * n_actions],
            n_states,
            n_actions,
            learning_rate: params.learning_rate,
            discount: params.discount,
            exploration: params.exploration_start,
            exploration_decay: params.exploration_decay,
            exploration_min: params.exploration_min,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn exploration(&self) -> T {
        self.exploration
    }

    pub fn set_exploration(&mut self, eps: T) {
        self.exploration = eps.max(self.exploration_min).min(T::one());
    }

    pub fn get(&self, state: usize, action: usize) -> T {
        self.values[state * self.n_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: T) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[T] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    /// Argmax over the state's row; ties go to the lowest action index.
    pub fn greedy(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// One Bellman backup of `(state, action)` towards `reward + discount * max Q(next, ·)`.
    pub fn update(&mut self, state: usize, action: usize, reward: T, next_state: usize) {
        let next_max = self
            .row(next_state)
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        let q = self.get(state, action);
        let updated = q + self.learning_rate * (reward + self.discount * next_max - q);
        self.set(state, action, updated);
    }

    /// ε-greedy choice. Always consumes exactly one uniform draw, plus one more
    /// when exploring.
    pub fn select_action<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        if u < self.exploration.as_f64() {
            rng.random_range(0..self.n_actions)
        } else {
            self.greedy(state)
        }
    }

    pub fn decay_exploration(&mut self) {
        self.exploration = (self.exploration * self.exploration_decay).max(self.exploration_min);
    }
}

/// Index of `x ∈ [0, 1]` among `n` equal-width buckets. Out-of-range input is clamped.
pub fn uniform_bucket<T: Scalar>(x: T, n: usize) -> usize {
    let x = x.unit_clamp().as_f64();
    ((x * n as f64).floor() as usize).min(n - 1)
}

/// Bucket of `x` among `n` logarithmically spaced buckets over `[0, max]`.
pub fn log_bucket<T: Scalar>(x: T, max: T, n: usize) -> usize {
    if !(max > T::zero()) || !(x > T::zero()) {
        return 0;
    }
    let frac = (x.min(max).ln_1p() / max.ln_1p()).unit_clamp();
    uniform_bucket(frac, n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProviderState<T> {
    pub cumulative_profit: T,
    pub recent_reputation: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuyerState<T> {
    pub recent_success_rate: T,
    pub recent_avg_utility: T,
}

/// Upper clamp applied to mean utility before bucketing.
pub const UTILITY_STATE_CAP: f64 = 1.5;

/// `profit_bucket * buckets + reputation_bucket`. `running_max` is the largest
/// cumulative profit observed across the provider population.
pub fn discretize_provider_state<T: Scalar>(
    state: &ProviderState<T>,
    running_max: T,
    buckets: usize,
) -> usize {
    let profit = log_bucket(state.cumulative_profit, running_max, buckets);
    let rep = uniform_bucket(state.recent_reputation, buckets);
    profit * buckets + rep
}

/// `success_bucket * buckets + utility_bucket`.
pub fn discretize_buyer_state<T: Scalar>(state: &BuyerState<T>, buckets: usize) -> usize {
    let success = uniform_bucket(state.recent_success_rate, buckets);
    let cap = T::lit(UTILITY_STATE_CAP);
    let utility = state.recent_avg_utility.max(T::zero()).min(cap) / cap;
    success * buckets + uniform_bucket(utility, buckets)
}

/// Buyer utility of `offer` given the provider's previous-step reputation.
///
/// The quality construct is the strategy-weighted mean of the four attributes
/// (weights renormalized to one). The reputation and price terms are scaled by
/// the strategy's own reputation and price weights. Price enters as
/// `1 - p / reference_price`, so cheaper data scores higher, unless
/// `literal_price_term` is set, in which case the raw price is used. With
/// `blind` the reputation term is dropped.
pub fn buyer_utility<T: Scalar>(
    offer: &Offer<T>,
    rep_before: T,
    strategy: &BuyerStrategy<T>,
    params: &GlobalParams<T>,
    blind: bool,
) -> Result<T> {
    if !(rep_before >= T::zero() && rep_before <= T::one()) {
        return Err(Error::ReputationOutOfRange(rep_before.as_f64()));
    }
    let w = strategy.quality_weights();
    let q = offer.quality.to_array();
    let quality: T = (0..4).map(|i| w[i] * q[i]).sum();
    let price_term = if params.literal_price_term {
        offer.price
    } else {
        T::one() - offer.price / params.reference_price
    };
    let mut u = params.utility_quality * quality
        + params.utility_price * strategy.price_weight() * price_term;
    if !blind {
        u += params.utility_reputation * strategy.reputation_weight() * rep_before;
    }
    Ok(u)
}

/// Provider reward for one settled trade.
pub fn provider_reward<T: Scalar>(tx: &Transaction<T>, rep_before: T, params: &GlobalParams<T>) -> T {
    let refund = if tx.refund_applied {
        params.rebate_rate
    } else {
        T::zero()
    };
    let profit = (tx.price - tx.cost - tx.fee).max(T::zero());
    profit * (T::one() + refund)
        + params.reward_utility * tx.utility
        + params.reward_utility_gain * (tx.utility - rep_before).max(T::zero())
}

/// Fixed-length trailing window.
#[derive(Debug, Clone, PartialEq)]
pub struct RecentWindow<T> {
    values: VecDeque<T>,
    capacity: usize,
}

impl<T: Scalar> RecentWindow<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            values: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, v: T) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(v);
    }

    /// Mean of the window, or `empty` if nothing has been recorded yet.
    pub fn mean_or(&self, empty: T) -> T {
        if self.values.is_empty() {
            empty
        } else {
            self.values.iter().copied().sum::<T>() / T::from_usize_lossy(self.values.len())
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProviderAgent<T> {
    pub qtable: QTable<T>,
    pub cumulative_profit: T,
    pub recent_reputation: RecentWindow<T>,
}

impl<T: Scalar> ProviderAgent<T> {
    pub fn new(params: &GlobalParams<T>, initial_reputation: T) -> Self {
        let b = params.state_buckets;
        let mut recent_reputation = RecentWindow::new(params.recent_window);
        recent_reputation.push(initial_reputation);
        Self {
            qtable: QTable::new(b * b, 4, params),
            cumulative_profit: T::zero(),
            recent_reputation,
        }
    }

    pub fn observe(&self) -> ProviderState<T> {
        ProviderState {
            cumulative_profit: self.cumulative_profit,
            recent_reputation: self.recent_reputation.mean_or(T::lit(0.5)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuyerAgent<T> {
    pub qtable: QTable<T>,
    pub recent_success: RecentWindow<T>,
    pub recent_utility: RecentWindow<T>,
}

impl<T: Scalar> BuyerAgent<T> {
    pub fn new(params: &GlobalParams<T>) -> Self {
        let b = params.state_buckets;
        Self {
            qtable: QTable::new(b * b, 3, params),
            recent_success: RecentWindow::new(params.recent_window),
            recent_utility: RecentWindow::new(params.recent_window),
        }
    }

    pub fn observe(&self) -> BuyerState<T> {
        BuyerState {
            recent_success_rate: self.recent_success.mean_or(T::zero()),
            recent_avg_utility: self.recent_utility.mean_or(T::zero()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BuyerStrategyKind, QualityVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> GlobalParams<f64> {
        GlobalParams::default()
    }

    fn offer(q: f64, price: f64) -> Offer<f64> {
        Offer {
            provider_id: 0,
            quality: QualityVector::splat(q),
            price,
            cost: 0.0,
            step: 1,
        }
    }

    #[test]
    fn bellman_update_examples() {
        let p = params();
        let mut t = QTable::new(2, 2, &p);
        t.update(0, 0, 1.0, 1);
        assert!((t.get(0, 0) - 0.15).abs() < 1e-12);

        let mut t = QTable::new(2, 2, &p);
        t.update(0, 1, 0.0, 1);
        assert_eq!(t.get(0, 1), 0.0);

        let mut t = QTable::new(2, 2, &p);
        t.set(0, 0, 1.0);
        t.set(1, 0, 1.0);
        t.update(0, 0, 1.0, 1);
        assert!((t.get(0, 0) - 1.138).abs() < 1e-12);
        // nothing else touched
        assert_eq!((t.get(0, 1), t.get(1, 0), t.get(1, 1)), (0.0, 1.0, 0.0));
    }

    #[test]
    fn greedy_and_tie_break() {
        let p = params();
        let mut t = QTable::new(1, 3, &p);
        t.set_exploration(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(t.select_action(0, &mut rng), 0);
        t.set(0, 0, 0.1);
        t.set(0, 1, 0.9);
        t.set(0, 2, 0.3);
        // exploration floor is 0.05, so compare against greedy directly too
        assert_eq!(t.greedy(0), 1);
    }

    #[test]
    fn pure_greedy_with_zero_floor() {
        let mut p = params();
        p.exploration_min = 0.0;
        p.exploration_start = 0.0;
        let mut t = QTable::new(1, 3, &p);
        t.set(0, 0, 0.1);
        t.set(0, 1, 0.9);
        t.set(0, 2, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(t.select_action(0, &mut rng), 1);
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let p = params();
        let t = QTable::<f64>::new(1, 3, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[t.select_action(0, &mut rng)] += 1;
        }
        let expected = n as f64 / 3.0;
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
        }
        // 2 degrees of freedom, 99.9% quantile
        assert!(chi2 < 13.82, "chi2 = {chi2}");
    }

    #[test]
    fn exploration_decay_schedule() {
        let p = params();
        let mut t = QTable::<f64>::new(1, 2, &p);
        for n in 1..=1000 {
            t.decay_exploration();
            let want = 0.995f64.powi(n).max(0.05);
            assert!((t.exploration() - want).abs() < 1e-12, "n={n}");
        }
        assert_eq!(t.exploration(), 0.05);
    }

    #[test]
    fn bandit_converges_to_rewarding_arm() {
        let p = params();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = QTable::<f64>::new(1, 2, &p);
            for _ in 0..500 {
                let a = t.select_action(0, &mut rng);
                let r = if a == 0 { 1.0 } else { 0.0 };
                t.update(0, a, r, 0);
                t.decay_exploration();
            }
            assert_eq!(t.greedy(0), 0, "seed {seed}");
        }
    }

    #[test]
    fn bucket_endpoints_and_midpoint() {
        assert_eq!(uniform_bucket(0.0, 5), 0);
        assert_eq!(uniform_bucket(1.0, 5), 4);
        assert_eq!(uniform_bucket(0.5, 5), 2);
        assert_eq!(log_bucket(0.0, 100.0, 5), 0);
        assert_eq!(log_bucket(100.0, 100.0, 5), 4);
        assert_eq!(log_bucket(-3.0, 100.0, 5), 0);
        assert_eq!(log_bucket(5.0, 0.0, 5), 0);
    }

    #[test]
    fn buckets_monotone_on_grid() {
        let mut prev = (0, 0, 0);
        for i in 0..=1000 {
            let x = i as f64 * 0.001;
            let cur = (
                uniform_bucket(x, 5),
                log_bucket(x * 500.0, 500.0, 5),
                discretize_buyer_state(
                    &BuyerState {
                        recent_success_rate: 0.0,
                        recent_avg_utility: x * 1.5,
                    },
                    5,
                ),
            );
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.2 >= prev.2, "x={x}");
            prev = cur;
        }
        assert_eq!(prev, (4, 4, 4));
    }

    #[test]
    fn state_indices_in_range() {
        let s = ProviderState {
            cumulative_profit: 1e9,
            recent_reputation: 2.0,
        };
        assert_eq!(discretize_provider_state(&s, 10.0, 5), 24);
        let b = BuyerState {
            recent_success_rate: 1.0,
            recent_avg_utility: 9.0,
        };
        assert_eq!(discretize_buyer_state(&b, 5), 24);
    }

    #[test]
    fn utility_examples() {
        let p = params();
        let s = BuyerStrategy::table(BuyerStrategyKind::Price);
        let u = buyer_utility(&offer(0.0, 120.0), 0.0, &s, &p, false).unwrap();
        assert!(u.abs() < 1e-12);
        let unit = BuyerStrategy {
            kind: BuyerStrategyKind::Trust,
            weights: [0.25, 0.25, 0.25, 0.25, 1.0, 1.0],
        };
        let u = buyer_utility(&offer(1.0, 0.0), 1.0, &unit, &p, false).unwrap();
        assert!((u - 1.44).abs() < 1e-12);
        // Trust strategy: 0.31 + 0.68 * 0.45 + 0.45 * 0.20
        let s = BuyerStrategy::table(BuyerStrategyKind::Trust);
        let u = buyer_utility(&offer(1.0, 0.0), 1.0, &s, &p, false).unwrap();
        assert!((u - 0.706).abs() < 1e-12);
    }

    #[test]
    fn blind_utility_drops_reputation_term() {
        let p = params();
        let s = BuyerStrategy::table(BuyerStrategyKind::Trust);
        let o = offer(0.7, 80.0);
        let full = buyer_utility(&o, 0.8, &s, &p, false).unwrap();
        let blind = buyer_utility(&o, 0.8, &s, &p, true).unwrap();
        assert!((full - blind - 0.68 * 0.45 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn utility_rejects_bad_reputation() {
        let p = params();
        let s = BuyerStrategy::table(BuyerStrategyKind::Trust);
        assert!(buyer_utility(&offer(0.5, 50.0), 1.2, &s, &p, false).is_err());
        assert!(buyer_utility(&offer(0.5, 50.0), f64::NAN, &s, &p, false).is_err());
    }

    #[test]
    fn literal_price_term_rewards_price() {
        let mut p = params();
        p.literal_price_term = true;
        let s = BuyerStrategy::table(BuyerStrategyKind::Trust);
        let cheap = buyer_utility(&offer(0.5, 20.0), 0.5, &s, &p, false).unwrap();
        let dear = buyer_utility(&offer(0.5, 90.0), 0.5, &s, &p, false).unwrap();
        assert!(dear > cheap);
    }

    fn tx(price: f64, cost: f64, refund: bool, utility: f64) -> Transaction<f64> {
        Transaction {
            step: 1,
            provider_id: 0,
            buyer_id: 0,
            price,
            cost,
            fee: 0.1 * price,
            refund_applied: refund,
            utility,
            review: 0.5,
            quality: QualityVector::splat(0.5),
            rep_before: 0.0,
        }
    }

    #[test]
    fn reward_examples() {
        let p = params();
        assert!((provider_reward(&tx(100.0, 50.0, false, 0.0), 0.0, &p) - 40.0).abs() < 1e-12);
        assert_eq!(provider_reward(&tx(50.0, 50.0, false, 0.0), 0.0, &p), 0.0);
        let r = provider_reward(&tx(100.0, 50.0, true, 0.5), 0.2, &p);
        assert!((r - 50.5).abs() < 1e-12, "{r}");
    }

    #[test]
    fn window_keeps_trailing_values() {
        let mut w = RecentWindow::<f64>::new(3);
        assert_eq!(w.mean_or(7.0), 7.0);
        for v in [1.0, 2.0, 3.0, 4.0] {
            w.push(v);
        }
        assert_eq!(w.mean_or(0.0), 3.0);
    }
}
