use crate::num::Scalar;

use super::{Review, NEUTRAL_SCORE};

/// Purchase history of one buyer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BuyerStats<T> {
    pub transactions: usize,
    /// Sum of `(accuracy + compliance) / 2` over purchases.
    pub quality_sum: T,
    /// Sum of issued review values.
    pub review_sum: T,
}

impl<T: Scalar> BuyerStats<T> {
    pub fn record(&mut self, review: &Review<T>) {
        self.transactions += 1;
        self.quality_sum += review.context_quality();
        self.review_sum += review.value;
    }

    pub fn mean_quality(&self) -> T {
        self.quality_sum / T::from_usize_lossy(self.transactions.max(1))
    }

    pub fn mean_review(&self) -> T {
        self.review_sum / T::from_usize_lossy(self.transactions.max(1))
    }
}

/// Buyer trust in `[0, 1]`, indexed like `stats`.
///
/// The raw score averages the transaction count (scaled by the population
/// maximum), the mean purchased quality and the mean issued review; raw scores
/// are then min–max normalized over active buyers. Buyers without purchases
/// get zero; if all active buyers tie, they all get one.
pub fn buyer_trust<T: Scalar>(stats: &[BuyerStats<T>]) -> Vec<T> {
    let max_tx = stats.iter().map(|s| s.transactions).max().unwrap_or(0);
    if max_tx == 0 {
        return vec![T::zero(); stats.len()];
    }
    let max_tx = T::from_usize_lossy(max_tx);
    let third = T::one() / T::lit(3.0);
    let raw: Vec<Option<T>> = stats
        .iter()
        .map(|s| {
            (s.transactions > 0).then(|| {
                (T::from_usize_lossy(s.transactions) / max_tx + s.mean_quality() + s.mean_review())
                    * third
            })
        })
        .collect();
    let (lo, hi) = raw
        .iter()
        .flatten()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    raw.into_iter()
        .map(|r| match r {
            None => T::zero(),
            Some(_) if hi <= lo => T::one(),
            Some(v) => ((v - lo) / (hi - lo)).unit_clamp(),
        })
        .collect()
}

/// Marks the top 1% of active buyers by trust (at least one). Ties are broken
/// by lower buyer id.
pub fn power_node_mask<T: Scalar>(trust: &[T], stats: &[BuyerStats<T>]) -> Vec<bool> {
    let mut active: Vec<usize> = (0..trust.len())
        .filter(|&b| stats.get(b).is_some_and(|s| s.transactions > 0))
        .collect();
    let mut mask = vec![false; trust.len()];
    if active.is_empty() {
        return mask;
    }
    let k = active.len().div_ceil(100);
    active.sort_by(|&a, &b| trust[b].partial_cmp(&trust[a]).unwrap().then(a.cmp(&b)));
    for &b in &active[..k] {
        mask[b] = true;
    }
    mask
}

/// Trust-weighted mean of a provider's reviews with weight `0.5 + 0.5 T`.
///
/// Power nodes count as fully trusted. With `power_nodes_only` only their
/// reviews are aggregated, falling back to all reviews when none of them
/// reviewed this provider.
pub fn powertrust_score<T: Scalar>(
    reviews: &[Review<T>],
    trust: &[T],
    power: &[bool],
    power_nodes_only: bool,
) -> T {
    if reviews.is_empty() {
        return T::lit(NEUTRAL_SCORE);
    }
    let half = T::lit(0.5);
    let is_power = |r: &Review<T>| power.get(r.buyer_id).copied().unwrap_or(false);
    let only_power = power_nodes_only && reviews.iter().any(is_power);
    let (num, den) = reviews
        .iter()
        .filter(|r| !only_power || is_power(r))
        .fold((T::zero(), T::zero()), |(n, d), r| {
            let t = if is_power(r) {
                T::one()
            } else {
                trust.get(r.buyer_id).copied().unwrap_or(T::zero())
            };
            let w = half + half * t;
            (n + w * r.value, d + w)
        });
    (num / den).unit_clamp()
}
