//! PeerTrust and Beta-PT: time-decayed, context-weighted review means.

use std::collections::HashMap;

use crate::num::Scalar;
use crate::types::{BuyerId, GlobalParams, Step};

use super::beta::{beta_confidence, BetaCounters};
use super::timedecay::decay_weight;
use super::{Review, NEUTRAL_SCORE};

/// Weighted mean of review values, where `weight(review, decay)` receives the
/// review's time-decay weight. Falls back to the plain mean when every weight
/// vanishes and to the neutral score when there are no reviews.
pub fn contextual_score<T, F>(reviews: &[Review<T>], now: Step, half_life: T, mut weight: F) -> T
where
    T: Scalar,
    F: FnMut(&Review<T>, T) -> T,
{
    if reviews.is_empty() {
        return T::lit(NEUTRAL_SCORE);
    }
    let (num, den) = reviews.iter().fold((T::zero(), T::zero()), |(n, d), r| {
        let w = weight(r, decay_weight(now, r.step, half_life));
        (n + w * r.value, d + w)
    });
    let score = if den > T::zero() {
        num / den
    } else {
        reviews.iter().map(|r| r.value).sum::<T>() / T::from_usize_lossy(reviews.len())
    };
    score.unit_clamp()
}

fn trust_of<T: Scalar>(trust: &[T], buyer: BuyerId) -> T {
    trust.get(buyer).copied().unwrap_or(T::zero())
}

/// PeerTrust: decay weight times the cube root of review × reviewer trust ×
/// transaction quality.
pub fn peertrust_score<T: Scalar>(reviews: &[Review<T>], trust: &[T], now: Step, half_life: T) -> T {
    contextual_score(reviews, now, half_life, |r, decay| {
        let interaction = (r.value * trust_of(trust, r.buyer_id) * r.context_quality()).cbrt();
        decay * interaction
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPtOptions<T> {
    /// Damping coefficient of the anti-monopoly cap.
    pub z: T,
    /// Divide by the review weight instead of the reviewer's review count.
    pub anti_monopoly_by_weight: bool,
    /// Replace the evidence confidence with a fixed value.
    pub conf_override: Option<T>,
    pub anti_monopoly: bool,
}

impl<T: Scalar> BetaPtOptions<T> {
    pub fn from_params(params: &GlobalParams<T>) -> Self {
        Self {
            z: params.beta_pt_z,
            anti_monopoly_by_weight: params.anti_monopoly_by_weight,
            conf_override: None,
            anti_monopoly: true,
        }
    }
}

/// `(A + D) / (A + D + 4)` over counters without prior mass; zero when empty.
pub fn betapt_confidence<T: Scalar>(counters: &BetaCounters<T>) -> T {
    let n = counters.a + counters.d;
    if n > T::zero() {
        beta_confidence(counters, T::lit(4.0))
    } else {
        T::zero()
    }
}

/// `min(1, z * total / denom)`, or one when `total` or `denom` is zero.
pub fn anti_monopoly_factor<T: Scalar>(z: T, total: T, denom: T) -> T {
    if total == T::zero() || denom == T::zero() {
        T::one()
    } else {
        (z * total / denom).min(T::one())
    }
}

/// Beta-PT score of one provider.
///
/// Each review is weighted by decay × reviewer trust × transaction quality ×
/// the provider's evidence confidence, then by the anti-monopoly factor that
/// caps reviewers holding a large share of the provider's reviews.
pub fn betapt_score<T: Scalar>(
    reviews: &[Review<T>],
    trust: &[T],
    now: Step,
    half_life: T,
    opts: &BetaPtOptions<T>,
) -> T {
    let conf = opts.conf_override.unwrap_or_else(|| {
        let mut c = BetaCounters::empty();
        reviews.iter().for_each(|r| c.observe(r.value));
        betapt_confidence(&c)
    });
    let mut per_buyer: HashMap<BuyerId, usize> = HashMap::new();
    if opts.anti_monopoly && !opts.anti_monopoly_by_weight {
        for r in reviews {
            *per_buyer.entry(r.buyer_id).or_insert(0) += 1;
        }
    }
    let total = T::from_usize_lossy(reviews.len());
    contextual_score(reviews, now, half_life, |r, decay| {
        let w6 = decay * trust_of(trust, r.buyer_id) * r.context_quality() * conf;
        if !opts.anti_monopoly {
            return w6;
        }
        let denom = if opts.anti_monopoly_by_weight {
            w6
        } else {
            T::from_usize_lossy(per_buyer[&r.buyer_id])
        };
        w6 * anti_monopoly_factor(opts.z, total, denom)
    })
}
