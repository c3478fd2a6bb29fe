//! Agent-based simulator of a manufacturing data-trading market.
//!
//! Providers and buyers learn strategies with tabular Q-learning while one of
//! seven reputation engines (including a no-reputation baseline) publishes
//! provider scores. Buyer utility coefficients can be calibrated with maximum
//! causal entropy inverse reinforcement learning over event logs.
//!
//! All numerics are generic over [`num::Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod agents;
pub mod config;
pub mod error;
pub mod irl;
pub mod market;
pub mod metrics;
pub mod num;
pub mod reputation;
pub mod scenario;
pub mod types;

pub use config::UtilityWeights;
pub use error::{Error, Result};
pub use num::Scalar;
pub use reputation::Engine;
pub use types::{
    compute_cost, sample_offer, BuyerId, BuyerStrategyKind, ProviderId, ProviderStrategyKind, Step,
};

pub type QualityVector = types::QualityVector<f64>;
pub type ProviderStrategy = types::ProviderStrategy<f64>;
pub type BuyerStrategy = types::BuyerStrategy<f64>;
pub type Offer = types::Offer<f64>;
pub type Transaction = types::Transaction<f64>;
pub type GlobalParams = types::GlobalParams<f64>;
pub type QTable = agents::QTable<f64>;
pub type Review = reputation::Review<f64>;
pub type ReputationSystem = reputation::ReputationSystem<f64>;
pub type Ledger = market::Ledger<f64>;
pub type World = market::World<f64>;
pub type StepReport = market::StepReport<f64>;


pub type ScenarioReport = metrics::ScenarioReport<f64>;
pub type IrlModel = irl::IrlModel<f64>;
