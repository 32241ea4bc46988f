//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use metriclab::partition::Partition;
use metriclab::{default_labels, FiniteMetricSpace, ValidateOptions};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random points of `[0,1]^3` under the Euclidean norm, scaled to diameter 0.9.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    let mut m: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b| {
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
                })
                .collect()
        })
        .collect();
    let diam = m.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    if diam > 0.0 {
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v *= 0.9 / diam;
            }
        }
    }
    m
}

pub fn space(m: &[Vec<f64>]) -> FiniteMetricSpace {
    FiniteMetricSpace::validate(m, default_labels(m.len()), &ValidateOptions::default()).unwrap()
}

pub fn random_space(seed: u64, n: usize) -> (Vec<Vec<f64>>, FiniteMetricSpace) {
    let m = random_matrix(&mut rng(seed), n);
    let s = space(&m);
    (m, s)
}

/// Random ultrametric from a random merge order with increasing heights.
pub fn random_ultrametric(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut m = vec![vec![0.0; n]; n];
    let mut h = 0.0;
    for _ in 1..n {
        h += rng.random_range(0.01..0.1);
        let ids: Vec<usize> = {
            let mut v = cluster.clone();
            v.sort_unstable();
            v.dedup();
            v
        };
        let a = ids[rng.random_range(0..ids.len())];
        let mut b = a;
        while b == a {
            b = ids[rng.random_range(0..ids.len())];
        }
        for i in 0..n {
            for j in 0..n {
                if cluster[i] == a && cluster[j] == b || cluster[i] == b && cluster[j] == a {
                    m[i][j] = h;
                }
            }
        }
        for c in cluster.iter_mut() {
            if *c == b {
                *c = a;
            }
        }
    }
    m
}

/// Random partition with labels in `0..k`.
pub fn random_partition(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Partition {
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    Partition::from_labels(&labels)
}

/// `(δ, γ)` by direct double loops, `γ = diam` for at most one block.
pub fn naive_delta_gamma(m: &[Vec<f64>], block: &[usize]) -> (f64, f64) {
    let n = m.len();
    let mut delta = 0.0f64;
    let mut gamma = f64::INFINITY;
    let mut diam = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            diam = diam.max(m[i][j]);
            if block[i] == block[j] {
                delta = delta.max(m[i][j]);
            } else {
                gamma = gamma.min(m[i][j]);
            }
        }
    }
    if gamma.is_infinite() {
        gamma = diam;
    }
    (delta, gamma)
}

pub fn naive_ratio(delta: f64, gamma: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else if delta >= 1.0 || gamma >= 1.0 {
        f64::INFINITY
    } else {
        gamma.ln() / delta.ln()
    }
}

pub fn block_labels(p: &Partition) -> Vec<usize> {
    (0..p.len()).map(|i| p.block_of(i)).collect()
}

/// Components of the graph `d < t`, by flood fill.
pub fn naive_threshold(m: &[Vec<f64>], t: f64) -> Vec<usize> {
    let n = m.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        label[s] = next;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                if label[w] == usize::MAX && m[v][w] < t {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Every partition of `0..n` as restricted-growth label vectors.
pub fn naive_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=max + 1 {
            cur[i] = v;
            rec(i + 1, max.max(v), cur, out);
        }
    }
    if n == 0 {
        return out;
    }
    rec(1, 0, &mut cur, &mut out);
    out
}
