use crate::num::Scalar;

/// Accumulated positive (`a`) and negative (`d`) review mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCounters<T> {
    pub a: T,
    pub d: T,
}

impl<T: Scalar> BetaCounters<T> {
    /// Uniform prior `a = d = 1`.
    pub fn uniform() -> Self {
        Self {
            a: T::one(),
            d: T::one(),
        }
    }

    pub fn empty() -> Self {
        Self {
            a: T::zero(),
            d: T::zero(),
        }
    }

    /// Adds `value` to the positive mass and `1 - value` to the negative mass.
    pub fn observe(&mut self, value: T) {
        self.a += value;
        self.d += T::one() - value;
    }

    pub fn mean(&self) -> T {
        self.a / (self.a + self.d)
    }
}

/// Evidence confidence `n / (n + pseudo)` with `n = a + d`.
pub fn beta_confidence<T: Scalar>(counters: &BetaCounters<T>, pseudo: T) -> T {
    let n = counters.a + counters.d;
    n / (n + pseudo)
}

/// Beta reputation: the mean shrunk towards one half by the confidence.
pub fn beta_score<T: Scalar>(counters: &BetaCounters<T>) -> T {
    let mean = counters.mean();
    let conf = beta_confidence(counters, T::lit(2.0));
    let half = T::lit(0.5);
    (half * (mean + conf * mean + half * (T::one() - conf))).unit_clamp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_only() {
        assert!((beta_score(&BetaCounters::<f64>::uniform()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_positive_review() {
        let mut c = BetaCounters::<f64>::uniform();
        c.observe(1.0);
        assert_eq!((c.a, c.d), (2.0, 1.0));
        let want = 0.5 * (2.0 / 3.0 + 0.6 * 2.0 / 3.0 + 0.5 * 0.4);
        assert!((beta_score(&c) - want).abs() < 1e-12);
        assert!((beta_score(&c) - 0.633_333_333_333).abs() < 1e-9);
    }

    #[test]
    fn many_positive_reviews_approach_one() {
        let mut c = BetaCounters::<f64>::uniform();
        for _ in 0..1_000_000 {
            c.observe(1.0);
        }
        assert!(beta_score(&c) > 0.999);
    }
}
