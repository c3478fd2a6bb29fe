use crate::num::Scalar;
use crate::types::Step;

use super::{Review, NEUTRAL_SCORE};

/// Weight of a review of age `now - at`: halves every `half_life` steps.
///
/// Written as `2^(-age / half_life)`, which equals `exp(-ln2 / half_life * age)`
/// and is exactly one half at `age == half_life`.
pub fn decay_weight<T: Scalar>(now: Step, at: Step, half_life: T) -> T {
    let age = T::from_u32(now.saturating_sub(at)).expect("step fits scalar");
    (-(age / half_life)).exp2()
}

/// Exponentially time-weighted mean of the reviews.
pub fn time_decay_score<T: Scalar>(reviews: &[Review<T>], now: Step, half_life: T) -> T {
    if reviews.is_empty() {
        return T::lit(NEUTRAL_SCORE);
    }
    let (num, den) = reviews.iter().fold((T::zero(), T::zero()), |(n, d), r| {
        let w = decay_weight(now, r.step, half_life);
        (n + w * r.value, d + w)
    });
    (num / den).unit_clamp()
}
