use std::collections::BTreeMap;

use crate::num::Scalar;
use crate::types::{BuyerId, ProviderId};

/// Directed buyer → provider transaction multigraph.
///
/// Nodes are all providers (indices `0..n_providers`) followed by every buyer
/// that has transacted at least once, ordered by buyer id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TxGraph {
    n_providers: usize,
    out: BTreeMap<BuyerId, BTreeMap<ProviderId, u32>>,
}

impl TxGraph {
    pub fn new(n_providers: usize) -> Self {
        Self {
            n_providers,
            out: BTreeMap::new(),
        }
    }

    pub fn add_transaction(&mut self, buyer: BuyerId, provider: ProviderId) {
        assert!(provider < self.n_providers, "provider {provider} out of range");
        *self.out.entry(buyer).or_default().entry(provider).or_insert(0) += 1;
    }

    pub fn n_providers(&self) -> usize {
        self.n_providers
    }

    pub fn n_active_buyers(&self) -> usize {
        self.out.len()
    }

    pub fn node_count(&self) -> usize {
        self.n_providers + self.out.len()
    }

    /// Edge count between `buyer` and `provider`.
    pub fn count(&self, buyer: BuyerId, provider: ProviderId) -> u32 {
        self.out
            .get(&buyer)
            .and_then(|m| m.get(&provider))
            .copied()
            .unwrap_or(0)
    }

    /// `(source node, target node, transaction count)` for every edge, in node order.
    pub fn edges(&self) -> Vec<(usize, usize, u32)> {
        self.out
            .values()
            .enumerate()
            .flat_map(|(rank, targets)| {
                let src = self.n_providers + rank;
                targets.iter().map(move |(&p, &c)| (src, p, c))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankResult<T> {
    /// Raw stationary scores over all nodes; they sum to one.
    pub scores: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped PageRank by power iteration from the uniform vector.
///
/// Each edge carries the source's outbound transaction share. Nodes without
/// outbound edges (every provider, in a buyer → provider graph) spread their
/// mass uniformly so the iteration stays a Markov chain. Stops when the largest
/// component change drops below `tol` or after `max_iter` sweeps.
pub fn pagerank<T: Scalar>(
    graph: &TxGraph,
    damping: T,
    tol: T,
    max_iter: usize,
) -> PageRankResult<T> {
    let n = graph.node_count();
    if n == 0 {
        return PageRankResult {
            scores: Vec::new(),
            iterations: 0,
            converged: true,
        };
    }
    let edges = graph.edges();
    let mut out_total = vec![0u64; n];
    for &(s, _, c) in &edges {
        out_total[s] += u64::from(c);
    }
    let weighted: Vec<(usize, usize, T)> = edges
        .iter()
        .map(|&(s, t, c)| {
            let share = T::from_u32(c).unwrap() / T::from_u64(out_total[s]).unwrap();
            (s, t, share)
        })
        .collect();
    let dangling: Vec<usize> = (0..n).filter(|&i| out_total[i] == 0).collect();

    let nf = T::from_usize_lossy(n);
    let teleport = (T::one() - damping) / nf;
    let mut rank = vec![T::one() / nf; n];
    let mut next = vec![T::zero(); n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let dangling_mass: T = dangling.iter().map(|&i| rank[i]).sum();
        let base = teleport + damping * dangling_mass / nf;
        next.iter_mut().for_each(|v| *v = base);
        for &(s, t, share) in &weighted {
            next[t] += damping * rank[s] * share;
        }
        let delta = rank
            .iter()
            .zip(&next)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        std::mem::swap(&mut rank, &mut next);
        if delta < tol {
            converged = true;
            break;
        }
    }
    PageRankResult {
        scores: rank,
        iterations,
        converged,
    }
}

/// Min–max normalizes the provider block of the raw scores into `[0, 1]`.
/// If every provider has the same raw score they all sit at the floor, zero.
pub fn provider_scores<T: Scalar>(raw: &[T], n_providers: usize) -> Vec<T> {
    let providers = &raw[..n_providers.min(raw.len())];
    let (lo, hi) = providers
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut out: Vec<T> = if hi > lo {
        providers.iter().map(|&v| ((v - lo) / (hi - lo)).unit_clamp()).collect()
    } else {
        vec![T::zero(); providers.len()]
    };
    out.resize(n_providers, T::zero());
    out
}
