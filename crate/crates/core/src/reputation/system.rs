use crate::num::Scalar;
use crate::types::{GlobalParams, ProviderId, Step};

use super::beta::{beta_score, BetaCounters};
use super::contextual::{betapt_score, peertrust_score, BetaPtOptions};
use super::pagerank::{pagerank, provider_scores, TxGraph};
use super::timedecay::time_decay_score;
use super::trust::{buyer_trust, power_node_mask, powertrust_score, BuyerStats};
use super::{Engine, Review};

pub const PAGERANK_TOLERANCE: f64 = 1e-8;
pub const PAGERANK_MAX_ITER: usize = 200;

/// Review store plus the published per-provider scores of one engine.
///
/// Reviews are ingested during settlement; [`recompute`](Self::recompute)
/// refreshes the scores once per step. Between recomputes the scores are
/// read-only.
#[derive(Debug, Clone)]
pub struct ReputationSystem<T> {
    engine: Engine,
    half_life: T,
    damping: T,
    betapt: BetaPtOptions<T>,
    power_nodes_only: bool,
    reviews: Vec<Vec<Review<T>>>,
    beta: Vec<BetaCounters<T>>,
    buyers: Vec<BuyerStats<T>>,
    graph: TxGraph,
    scores: Vec<T>,
    pagerank_nonconverged: usize,
}

impl<T: Scalar> ReputationSystem<T> {
    /// `initial` holds the scores published before the first recompute.
    /// The blind engine ignores it and always publishes zero.
    pub fn new(
        engine: Engine,
        params: &GlobalParams<T>,
        n_providers: usize,
        n_buyers: usize,
        initial: Vec<T>,
    ) -> Self {
        assert_eq!(initial.len(), n_providers, "one initial score per provider");
        let scores = if engine.is_blind() {
            vec![T::zero(); n_providers]
        } else {
            initial.into_iter().map(Scalar::unit_clamp).collect()
        };
        Self {
            engine,
            half_life: params.half_life,
            damping: params.damping,
            betapt: BetaPtOptions::from_params(params),
            power_nodes_only: params.power_nodes_only,
            reviews: vec![Vec::new(); n_providers],
            beta: vec![BetaCounters::uniform(); n_providers],
            buyers: vec![BuyerStats::default(); n_buyers],
            graph: TxGraph::new(n_providers),
            scores,
            pagerank_nonconverged: 0,
        }
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn score(&self, provider: ProviderId) -> T {
        self.scores[provider]
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn reviews(&self, provider: ProviderId) -> &[Review<T>] {
        &self.reviews[provider]
    }

    pub fn buyer_stats(&self) -> &[BuyerStats<T>] {
        &self.buyers
    }

    pub fn graph(&self) -> &TxGraph {
        &self.graph
    }

    /// Number of recomputes where PageRank hit the iteration cap.
    pub fn pagerank_nonconverged(&self) -> usize {
        self.pagerank_nonconverged
    }

    pub fn ingest(&mut self, review: Review<T>) {
        let p = review.provider_id;
        self.beta[p].observe(review.value);
        self.buyers[review.buyer_id].record(&review);
        self.graph.add_transaction(review.buyer_id, p);
        self.reviews[p].push(review);
    }

    /// Recomputes every provider's score as of step `now`.
    pub fn recompute(&mut self, now: Step) {
        let hl = self.half_life;
        match self.engine {
            Engine::Blind => {}
            Engine::TimeDecay => {
                for (s, r) in self.scores.iter_mut().zip(&self.reviews) {
                    *s = time_decay_score(r, now, hl);
                }
            }
            Engine::BayesBeta => {
                for (s, c) in self.scores.iter_mut().zip(&self.beta) {
                    *s = beta_score(c);
                }
            }
            Engine::PageRank => {
                let result = pagerank(
                    &self.graph,
                    self.damping,
                    T::lit(PAGERANK_TOLERANCE),
                    PAGERANK_MAX_ITER,
                );
                if !result.converged {
                    self.pagerank_nonconverged += 1;
                }
                self.scores = provider_scores(&result.scores, self.reviews.len());
            }
            Engine::PowerTrust => {
                let trust = buyer_trust(&self.buyers);
                let power = power_node_mask(&trust, &self.buyers);
                for (s, r) in self.scores.iter_mut().zip(&self.reviews) {
                    *s = powertrust_score(r, &trust, &power, self.power_nodes_only);
                }
            }
            Engine::PeerTrust => {
                let trust = buyer_trust(&self.buyers);
                for (s, r) in self.scores.iter_mut().zip(&self.reviews) {
                    *s = peertrust_score(r, &trust, now, hl);
                }
            }
            Engine::BetaPt => {
                let trust = buyer_trust(&self.buyers);
                for (s, r) in self.scores.iter_mut().zip(&self.reviews) {
                    *s = betapt_score(r, &trust, now, hl, &self.betapt);
                }
            }
        }
    }
}
