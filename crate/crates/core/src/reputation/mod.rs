//! Reputation engines that fold per-transaction reviews into a per-provider
//! score in `[0, 1]`.
//!
//! Each engine is a set of pure scoring functions over review histories;
//! [`ReputationSystem`] keeps the shared state and dispatches on [`Engine`].

mod beta;
mod contextual;
mod pagerank;
mod system;
mod timedecay;
mod trust;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::num::Scalar;
use crate::types::{BuyerId, GlobalParams, ProviderId, Step};

pub use beta::{beta_confidence, beta_score, BetaCounters};
pub use contextual::{
    anti_monopoly_factor, betapt_confidence, betapt_score, contextual_score, peertrust_score,
    BetaPtOptions,
};
pub use pagerank::{pagerank, provider_scores, PageRankResult, TxGraph};
pub use system::ReputationSystem;
pub use timedecay::{decay_weight, time_decay_score};
pub use trust::{buyer_trust, power_node_mask, powertrust_score, BuyerStats};

/// Score of a provider that has not been reviewed yet.
pub const NEUTRAL_SCORE: f64 = 0.5;

/// One buyer's review of one purchase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Review<T> {
    pub provider_id: ProviderId,
    pub buyer_id: BuyerId,
    pub step: Step,
    pub value: T,
    pub accuracy: T,
    pub compliance: T,
}

impl<T: Scalar> Review<T> {
    /// Transaction-context quality `(accuracy + compliance) / 2`.
    pub fn context_quality(&self) -> T {
        (self.accuracy + self.compliance) * T::lit(0.5)
    }
}

/// Review emitted after a purchase with utility `utility`.
pub fn make_review<T: Scalar>(utility: T, params: &GlobalParams<T>) -> T {
    (params.review_base + params.review_slope * utility).unit_clamp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Engine {
    Blind,
    TimeDecay,
    BayesBeta,
    PageRank,
    PowerTrust,
    PeerTrust,
    BetaPt,
}

impl Engine {
    pub const ALL: [Engine; 7] = [
        Engine::Blind,
        Engine::TimeDecay,
        Engine::BayesBeta,
        Engine::PageRank,
        Engine::PowerTrust,
        Engine::PeerTrust,
        Engine::BetaPt,
    ];

    /// The six engines that actually publish a reputation signal.
    pub const REPUTATION: [Engine; 6] = [
        Engine::TimeDecay,
        Engine::BayesBeta,
        Engine::PageRank,
        Engine::PowerTrust,
        Engine::PeerTrust,
        Engine::BetaPt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Blind => "blind",
            Engine::TimeDecay => "timedecay",
            Engine::BayesBeta => "bayesbeta",
            Engine::PageRank => "pagerank",
            Engine::PowerTrust => "powertrust",
            Engine::PeerTrust => "peertrust",
            Engine::BetaPt => "betapt",
        }
    }

    pub fn is_blind(self) -> bool {
        self == Engine::Blind
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| Error::UnknownEngine(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn review_examples() {
        let p = GlobalParams::<f64>::default();
        assert!((make_review(0.0, &p) - 0.5).abs() < 1e-12);
        assert_eq!(make_review(1.0, &p), 1.0);
        assert_eq!(make_review(-1.0, &p), 0.0);
    }

    #[test]
    fn engine_names_round_trip() {
        for e in Engine::ALL {
            assert_eq!(e.name().parse::<Engine>().unwrap(), e);
        }
        assert!("eigentrust".parse::<Engine>().is_err());
        assert_eq!("BetaPT".parse::<Engine>().unwrap(), Engine::BetaPt);
    }
}
