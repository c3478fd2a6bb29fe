//! Domain vocabulary: quality vectors, strategies, offers, transactions and
//! the global parameter set.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::num::Scalar;

pub type ProviderId = usize;
pub type BuyerId = usize;
/// Simulation time index, one step per month. Steps are numbered from 1.
pub type Step = u32;

/// Four quality attributes of a dataset offer, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityVector<T> {
    pub accuracy: T,
    pub freshness: T,
    pub coverage: T,
    pub compliance: T,
}

impl<T: Scalar> QualityVector<T> {
    /// Builds a quality vector, clamping every component into `[0, 1]`.
    pub fn new(accuracy: T, freshness: T, coverage: T, compliance: T) -> Self {
        Self {
            accuracy: accuracy.unit_clamp(),
            freshness: freshness.unit_clamp(),
            coverage: coverage.unit_clamp(),
            compliance: compliance.unit_clamp(),
        }
    }

    pub fn splat(v: T) -> Self {
        Self::new(v, v, v, v)
    }

    /// Components in `(accuracy, freshness, coverage, compliance)` order.
    pub fn to_array(self) -> [T; 4] {
        [self.accuracy, self.freshness, self.coverage, self.compliance]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Unweighted mean of the four attributes.
    pub fn mean(&self) -> T {
        (self.accuracy + self.freshness + self.coverage + self.compliance) / T::lit(4.0)
    }

    /// Transaction-context quality: mean of accuracy and compliance.
    pub fn context_quality(&self) -> T {
        (self.accuracy + self.compliance) * T::lit(0.5)
    }

    pub fn clamped(self) -> Self {
        Self::from_array(self.to_array())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProviderStrategyKind {
    Trust,
    Price,
    Quality,
    Standard,
}

impl ProviderStrategyKind {
    pub const ALL: [ProviderStrategyKind; 4] = [
        ProviderStrategyKind::Trust,
        ProviderStrategyKind::Price,
        ProviderStrategyKind::Quality,
        ProviderStrategyKind::Standard,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Sampling distribution a provider uses when it posts an offer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProviderStrategy<T> {
    pub kind: ProviderStrategyKind,
    pub quality_means: QualityVector<T>,
    /// Standard deviations in `(accuracy, freshness, coverage, compliance)` order.
    pub quality_stds: [T; 4],
    pub price_mean: T,
    pub price_std: T,
}

impl<T: Scalar> ProviderStrategy<T> {
    pub fn table(kind: ProviderStrategyKind) -> Self {
        // (acc, fresh, cov, comp) means, stds, then price mean/std
        let (means, stds, price, price_std) = match kind {
            ProviderStrategyKind::Trust => {
                ([0.50, 0.72, 0.70, 0.60], [0.10, 0.10, 0.10, 0.06], 72.0, 3.0)
            }
            ProviderStrategyKind::Price => {
                ([0.70, 0.70, 0.70, 0.65], [0.12, 0.12, 0.12, 0.10], 96.0, 4.0)
            }
            ProviderStrategyKind::Quality => {
                ([0.80, 0.78, 0.80, 0.78], [0.08, 0.08, 0.08, 0.08], 88.0, 4.0)
            }
            ProviderStrategyKind::Standard => {
                ([0.75, 0.75, 0.75, 0.75], [0.09, 0.09, 0.09, 0.09], 80.0, 3.0)
            }
        };
        Self {
            kind,
            quality_means: QualityVector::from_array(means.map(T::lit)),
            quality_stds: stds.map(T::lit),
            price_mean: T::lit(price),
            price_std: T::lit(price_std),
        }
    }

    /// Same strategy with every standard deviation forced to zero.
    pub fn deterministic(mut self) -> Self {
        self.quality_stds = [T::zero(); 4];
        self.price_std = T::zero();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BuyerStrategyKind {
    Price,
    Quality,
    Trust,
}

impl BuyerStrategyKind {
    pub const ALL: [BuyerStrategyKind; 3] = [
        BuyerStrategyKind::Price,
        BuyerStrategyKind::Quality,
        BuyerStrategyKind::Trust,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Buyer preference weights
/// `[accuracy, freshness, coverage, compliance, reputation, price]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuyerStrategy<T> {
    pub kind: BuyerStrategyKind,
    pub weights: [T; 6],
}

impl<T: Scalar> BuyerStrategy<T> {
    pub fn table(kind: BuyerStrategyKind) -> Self {
        let w = match kind {
            BuyerStrategyKind::Price => [0.35, 0.25, 0.25, 0.30, 0.30, 0.20],
            BuyerStrategyKind::Quality => [0.15, 0.15, 0.15, 0.20, 0.20, 0.45],
            BuyerStrategyKind::Trust => [0.25, 0.20, 0.20, 0.44, 0.45, 0.20],
        };
        Self {
            kind,
            weights: w.map(T::lit),
        }
    }

    /// Quality weights renormalized to sum to one.
    pub fn quality_weights(&self) -> [T; 4] {
        let sum = self.weights[..4].iter().copied().sum::<T>();
        [0, 1, 2, 3].map(|i| self.weights[i] / sum)
    }

    pub fn reputation_weight(&self) -> T {
        self.weights[4]
    }

    pub fn price_weight(&self) -> T {
        self.weights[5]
    }
}

/// A priced dataset listing posted for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offer<T> {
    pub provider_id: ProviderId,
    pub quality: QualityVector<T>,
    pub price: T,
    pub cost: T,
    pub step: Step,
}

/// A settled trade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transaction<T> {
    pub step: Step,
    pub provider_id: ProviderId,
    pub buyer_id: BuyerId,
    pub price: T,
    pub cost: T,
    /// Fee paid by each party.
    pub fee: T,
    pub refund_applied: bool,
    pub utility: T,
    pub review: T,
    pub quality: QualityVector<T>,
    /// Provider reputation at the end of the previous step.
    pub rep_before: T,
}

/// Every tunable of the market. Defaults reproduce the reference calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct GlobalParams<T> {
    pub n_providers: usize,
    pub n_buyers: usize,
    pub n_steps: u32,
    pub rng_seed: u64,

    // production cost C(q) = scale * (base + acc*acc^2 + comp*comp^2 + fresh*fresh^2 + cov*cov^2)
    #[serde(alias = "b")]
    pub cost_scale: T,
    #[serde(alias = "c")]
    pub cost_base: T,
    #[serde(alias = "d")]
    pub cost_accuracy: T,
    #[serde(alias = "e")]
    pub cost_compliance: T,
    #[serde(alias = "f")]
    pub cost_freshness: T,
    #[serde(alias = "g")]
    pub cost_coverage: T,

    #[serde(alias = "h")]
    pub reward_utility: T,
    #[serde(alias = "k")]
    pub reward_utility_gain: T,

    #[serde(alias = "l")]
    pub utility_quality: T,
    #[serde(alias = "o")]
    pub utility_reputation: T,
    #[serde(alias = "u")]
    pub utility_price: T,

    #[serde(alias = "v")]
    pub review_base: T,
    #[serde(alias = "y")]
    pub review_slope: T,

    #[serde(alias = "alpha")]
    pub learning_rate: T,
    #[serde(alias = "beta")]
    pub discount: T,
    #[serde(alias = "gamma")]
    pub irl_discount: T,
    #[serde(alias = "delta")]
    pub irl_trace_discount: T,
    #[serde(alias = "epsilon")]
    pub irl_regularizer: T,
    #[serde(alias = "zeta")]
    pub damping: T,
    pub half_life: T,
    #[serde(alias = "z")]
    pub beta_pt_z: T,

    pub fee_rate: T,
    pub rebate_rate: T,
    pub operator_transfer_rate: T,
    pub rebate_compliance_threshold: T,
    pub price_floor: T,
    pub reference_price: T,

    pub k_candidates: usize,
    pub purchase_threshold: T,
    pub blind_threshold_offset: T,

    pub exploration_start: T,
    pub exploration_decay: T,
    pub exploration_min: T,
    pub state_buckets: usize,
    pub recent_window: usize,

    pub initial_reputation_mean: T,
    pub initial_reputation_std: T,

    pub literal_price_term: bool,
    /// Divide the anti-monopoly cap by the review weight instead of the
    /// reviewer's review count.
    pub anti_monopoly_by_weight: bool,
    pub power_nodes_only: bool,
    pub cost_on_post: bool,
    pub quality_over_posted: bool,
    pub revenue_gross: bool,
}

impl<T: Scalar> Default for GlobalParams<T> {
    fn default() -> Self {
        Self {
            n_providers: 2000,
            n_buyers: 2000,
            n_steps: 120,
            rng_seed: 0,
            cost_scale: T::lit(40.0),
            cost_base: T::lit(0.2),
            cost_accuracy: T::lit(0.6),
            cost_compliance: T::lit(0.6),
            cost_freshness: T::lit(0.2),
            cost_coverage: T::lit(0.2),
            reward_utility: T::lit(10.0),
            reward_utility_gain: T::lit(5.0),
            utility_quality: T::lit(0.31),
            utility_reputation: T::lit(0.68),
            utility_price: T::lit(0.45),
            review_base: T::lit(0.5),
            review_slope: T::lit(0.8),
            learning_rate: T::lit(0.15),
            discount: T::lit(0.92),
            irl_discount: T::lit(0.9),
            irl_trace_discount: T::lit(0.9),
            irl_regularizer: T::lit(1e-3),
            damping: T::lit(0.85),
            half_life: T::lit(25.0),
            beta_pt_z: T::lit(0.35),
            fee_rate: T::lit(0.10),
            rebate_rate: T::lit(0.10),
            operator_transfer_rate: T::lit(0.10),
            rebate_compliance_threshold: T::lit(0.75),
            price_floor: T::lit(10.01),
            reference_price: T::lit(120.0),
            k_candidates: 10,
            purchase_threshold: T::lit(0.25),
            blind_threshold_offset: T::lit(0.10),
            exploration_start: T::one(),
            exploration_decay: T::lit(0.995),
            exploration_min: T::lit(0.05),
            state_buckets: 5,
            recent_window: 5,
            initial_reputation_mean: T::lit(0.5),
            initial_reputation_std: T::lit(0.1),
            literal_price_term: false,
            anti_monopoly_by_weight: false,
            power_nodes_only: false,
            cost_on_post: false,
            quality_over_posted: false,
            revenue_gross: false,
        }
    }
}

/// Quadratic production cost of a dataset with quality `q`.
pub fn compute_cost<T: Scalar>(q: &QualityVector<T>, params: &GlobalParams<T>) -> T {
    params.cost_scale
        * (params.cost_base
            + params.cost_accuracy * q.accuracy * q.accuracy
            + params.cost_compliance * q.compliance * q.compliance
            + params.cost_freshness * q.freshness * q.freshness
            + params.cost_coverage * q.coverage * q.coverage)
}

fn normal_draw<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64) -> f64 {
    Normal::new(mean, std)
        .expect("finite mean and non-negative std")
        .sample(rng)
}

/// Draws one offer from `strategy`. Out-of-range draws are clamped, so each
/// call consumes exactly five normal variates (accuracy, freshness, coverage,
/// compliance, price).
pub fn sample_offer<T: Scalar, R: Rng + ?Sized>(
    provider_id: ProviderId,
    step: Step,
    strategy: &ProviderStrategy<T>,
    params: &GlobalParams<T>,
    rng: &mut R,
) -> Offer<T> {
    let means = strategy.quality_means.to_array();
    let mut q = [T::zero(); 4];
    for i in 0..4 {
        q[i] = T::lit(normal_draw(
            rng,
            means[i].as_f64(),
            strategy.quality_stds[i].as_f64(),
        ));
    }
    let quality = QualityVector::from_array(q);
    let raw_price = T::lit(normal_draw(
        rng,
        strategy.price_mean.as_f64(),
        strategy.price_std.as_f64(),
    ));
    let price = raw_price.max(params.price_floor);
    Offer {
        provider_id,
        quality,
        price,
        cost: compute_cost(&quality, params),
        step,
    }
}
