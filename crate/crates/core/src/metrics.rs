//! Market indicators computed from a finished run.

use serde::{Deserialize, Serialize};

use crate::market::{Ledger, StepReport};
use crate::num::Scalar;
use crate::types::{GlobalParams, Transaction};

/// Window length of the smoothed time series.
pub const SERIES_WINDOW: usize = 20;

/// Gini coefficient of non-negative values; zero when the total is zero.
///
/// Uses the sorted closed form `Σ (2i - n - 1) x_(i) / (n Σ x)`, which equals
/// the mean absolute difference `Σ_i Σ_j |x_i - x_j| / (2 n Σ x)`.
pub fn gini<T: Scalar>(values: &[T]) -> T {
    let n = values.len();
    let total: T = values.iter().copied().sum();
    if n == 0 || !(total > T::zero()) {
        return T::zero();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite revenues"));
    let nf = T::from_usize_lossy(n);
    let weighted: T = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (T::from_usize_lossy(2 * i + 1) - nf) * x)
        .sum();
    (weighted / (nf * total)).unit_clamp()
}

/// Completed transactions over `n_steps * n_buyers` buyer rounds.
pub fn success_rate<T: Scalar>(n_transactions: usize, n_buyers: usize, n_steps: usize) -> T {
    let rounds = n_buyers * n_steps;
    if rounds == 0 {
        T::zero()
    } else {
        T::from_usize_lossy(n_transactions) / T::from_usize_lossy(rounds)
    }
}

/// Ordinary least squares fit `y = slope * x + intercept`.
///
/// Returns `None` with fewer than two points or when every `x` is equal.
pub fn ols<T: Scalar>(points: &[(T, T)]) -> Option<(T, T)> {
    if points.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(points.len());
    let mean_x = points.iter().map(|p| p.0).sum::<T>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<T>() / n;
    let (sxy, sxx) = points.iter().fold((T::zero(), T::zero()), |(sxy, sxx), &(x, y)| {
        let dx = x - mean_x;
        (sxy + dx * (y - mean_y), sxx + dx * dx)
    });
    if !(sxx > T::zero()) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, mean_y - slope * mean_x))
}

/// Regresses price on the unweighted mean of the four quality attributes.
pub fn pq_regression<T: Scalar>(transactions: &[Transaction<T>]) -> Option<(T, T)> {
    let points: Vec<(T, T)> = transactions
        .iter()
        .map(|tx| (tx.quality.mean(), tx.price))
        .collect();
    ols(&points)
}

/// Non-overlapping window means; a trailing partial window is averaged over
/// its own length.
pub fn window_means<T: Scalar>(values: &[T], window: usize) -> Vec<T> {
    assert!(window > 0, "window must be positive");
    values
        .chunks(window)
        .map(|c| c.iter().copied().sum::<T>() / T::from_usize_lossy(c.len()))
        .collect()
}

pub fn series_20<T: Scalar>(values: &[T]) -> Vec<T> {
    window_means(values, SERIES_WINDOW)
}

/// Headline indicators and smoothed series of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport<T> {
    pub welfare: T,
    pub avg_quality: T,
    pub success_rate: T,
    pub mean_price: T,
    pub platform_revenue: T,
    pub gini: T,
    pub pq_slope: Option<T>,
    pub pq_intercept: Option<T>,
    pub n_transactions: usize,
    /// 20-step means of the per-step quality of circulating data.
    pub quality_series: Vec<T>,
    /// 20-step means of the per-step provider revenue, per provider.
    pub revenue_series: Vec<T>,
}

impl<T: Scalar> ScenarioReport<T> {
    pub fn from_run(
        ledger: &Ledger<T>,
        steps: &[StepReport<T>],
        params: &GlobalParams<T>,
    ) -> Self {
        let txs = &ledger.transactions;
        let n_tx = txs.len();
        let mean_of = |f: &dyn Fn(&Transaction<T>) -> T| {
            if n_tx == 0 {
                T::zero()
            } else {
                txs.iter().map(f).sum::<T>() / T::from_usize_lossy(n_tx)
            }
        };
        let avg_quality = if params.quality_over_posted {
            if steps.is_empty() {
                T::zero()
            } else {
                steps.iter().map(|s| s.posted_quality_mean).sum::<T>()
                    / T::from_usize_lossy(steps.len())
            }
        } else {
            mean_of(&|tx| tx.quality.mean())
        };
        let per_step_quality: Vec<T> = steps
            .iter()
            .map(|s| {
                if params.quality_over_posted {
                    s.posted_quality_mean
                } else {
                    s.traded_quality_mean.unwrap_or(s.posted_quality_mean)
                }
            })
            .collect();
        let n_providers = T::from_usize_lossy(params.n_providers.max(1));
        let per_step_revenue: Vec<T> = steps
            .iter()
            .map(|s| {
                let total = if params.revenue_gross {
                    s.provider_gross_revenue
                } else {
                    s.provider_net_revenue
                };
                total / n_providers
            })
            .collect();
        let fit = pq_regression(txs);
        Self {
            welfare: ledger.welfare(),
            avg_quality,
            success_rate: success_rate(n_tx, params.n_buyers, steps.len()),
            mean_price: mean_of(&|tx| tx.price),
            platform_revenue: ledger.fees_collected,
            gini: gini(&ledger.provider_sales),
            pq_slope: fit.map(|f| f.0),
            pq_intercept: fit.map(|f| f.1),
            n_transactions: n_tx,
            quality_series: series_20(&per_step_quality),
            revenue_series: series_20(&per_step_revenue),
        }
    }
}
