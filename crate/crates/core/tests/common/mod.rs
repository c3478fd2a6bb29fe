#![allow(dead_code)]

use datamarket::irl::{self, Action, IrlModel, Trace};
use datamarket::GlobalParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Ranks with ties averaged, 1-based.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Random teacher weights over the event-log feature map.
pub fn teacher_theta(seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let action = Normal::new(0.0, 1.0).unwrap();
    let state = Normal::new(0.0, 0.5).unwrap();
    (0..irl::N_FEATURES)
        .map(|i| {
            if i < irl::N_ACTIONS {
                action.sample(&mut r)
            } else {
                state.sample(&mut r)
            }
        })
        .collect()
}

/// Traces of `n_users` users with lengths uniform in `len_range`, sampled
/// from the soft-optimal policy of `theta`.
pub fn teacher_traces(
    theta: &[f64],
    n_users: usize,
    len_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Vec<Trace> {
    let mut model = IrlModel::event_log(&GlobalParams::default());
    model.theta = theta.to_vec();
    model.soft_value_iteration(1e-10, 10_000);
    let mut r = rng(seed);
    (0..n_users)
        .map(|u| {
            let len = r.random_range(len_range.clone());
            let ep = model.sample_episode(0, len, &mut r);
            Trace {
                user_id: format!("user{u:04}"),
                actions: ep.iter().map(|&(_, a)| Action::ALL[a]).collect(),
            }
        })
        .collect()
}

use datamarket::reputation::TxGraph;
use nalgebra::{DMatrix, DVector};

/// Stationary vector of the damped chain `ζ M + (1 − ζ)/N` from a dense
/// linear solve of `(I − ζ M) x = (1 − ζ)/N · 1`, where `M` is the
/// column-stochastic matrix of outbound shares with uniform dangling columns.
pub fn dense_pagerank(graph: &TxGraph, damping: f64) -> Vec<f64> {
    let n = graph.node_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut out = vec![0.0; n];
    for (s, _, c) in graph.edges() {
        out[s] += c as f64;
    }
    for (s, t, c) in graph.edges() {
        m[(t, s)] += c as f64 / out[s];
    }
    for s in 0..n {
        if out[s] == 0.0 {
            for t in 0..n {
                m[(t, s)] = 1.0 / n as f64;
            }
        }
    }
    let a = DMatrix::<f64>::identity(n, n) - m * damping;
    let b = DVector::<f64>::from_element(n, (1.0 - damping) / n as f64);
    let x = a.lu().solve(&b).expect("damped chain is non-singular");
    x.iter().copied().collect()
}

/// Transaction graph with `n_providers` providers and `n_nodes - n_providers`
/// buyers, each buyer making 1 to 5 purchases.
pub fn random_graph(n_nodes: usize, n_providers: usize, seed: u64) -> TxGraph {
    let mut r = rng(seed);
    let mut g = TxGraph::new(n_providers);
    for b in 0..n_nodes - n_providers {
        for _ in 0..r.random_range(1..=5) {
            g.add_transaction(b, r.random_range(0..n_providers));
        }
    }
    g
}

/// Mean absolute difference form of the Gini coefficient.
pub fn brute_gini(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let total: f64 = xs.iter().sum();
    if xs.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let mut diff = 0.0;
    for a in xs {
        for b in xs {
            diff += (a - b).abs();
        }
    }
    diff / (2.0 * n * total)
}

/// Least squares slope and intercept from the normal equations.
pub fn normal_equations_ols(points: &[(f64, f64)]) -> (f64, f64) {
    let x = DMatrix::from_fn(points.len(), 2, |i, j| if j == 0 { 1.0 } else { points[i].0 });
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let xt = x.transpose();
    let beta = (&xt * &x).lu().solve(&(&xt * y)).unwrap();
    (beta[1], beta[0])
}

/// Means of consecutive slices, indexing element by element.
pub fn sliced_means(xs: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < xs.len() {
        let end = (start + window).min(xs.len());
        let mut sum = 0.0;
        for i in start..end {
            sum += xs[i];
        }
        out.push(sum / (end - start) as f64);
        start = end;
    }
    out
}
