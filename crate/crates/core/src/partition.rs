//! Partitions of a finite space and their diameter, gap and log ratio.

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, Shape};

/// A partition of `{0, .., n-1}`.
///
/// Blocks are kept in canonical form: members ascending, blocks ordered by
/// their least member. Two partitions are equal iff they have the same blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    block_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds a partition from arbitrary block labels, one per point.
    pub fn from_labels<T: Eq + std::hash::Hash + Clone>(labels: &[T]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut block_of = Vec::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            let id = *ids.entry(l.clone()).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[id].push(i);
            block_of.push(id);
        }
        Self { block_of, blocks }
    }

    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut label = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {b} is empty")));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} out of range for {n} points"
                    )));
                }
                if label[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} appears in more than one block"
                    )));
                }
                label[i] = b;
            }
        }
        if let Some(i) = label.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidPartition(format!("index {i} is not covered")));
        }
        Ok(Self::from_labels(&label))
    }

    /// The one-block partition `{X}`.
    pub fn trivial(n: usize) -> Self {
        Self::from_labels(&vec![0u8; n])
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            block_of: (0..n).collect(),
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub(crate) fn from_union_find(uf: &mut UnionFind<usize>, n: usize) -> Self {
        let roots: Vec<usize> = (0..n).map(|i| uf.find_mut(i)).collect();
        Self::from_labels(&roots)
    }

    pub fn len(&self) -> usize {
        self.block_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_of.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    pub fn is_singletons(&self) -> bool {
        self.blocks.len() == self.block_of.len()
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.len() == coarser.len()
            && self.blocks.iter().all(|b| {
                let target = coarser.block_of[b[0]];
                b.iter().all(|&i| coarser.block_of[i] == target)
            })
    }

    /// The induced partition `{A ∩ Y}` on `subset`, indexed by position in `subset`.
    pub fn restrict(&self, subset: &[usize]) -> Self {
        let labels: Vec<usize> = subset.iter().map(|&i| self.block_of[i]).collect();
        Self::from_labels(&labels)
    }
}

/// Diameter, gap and log ratio of a partition.
///
/// `ln_delta` and `ln_gamma` are authoritative; `delta` and `gamma` may
/// underflow to 0 for spaces with extremely small scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub delta: f64,
    pub gamma: f64,
    pub ln_delta: f64,
    pub ln_gamma: f64,
    #[serde(rename = "R", with = "crate::io::inf_f64")]
    pub log_ratio: f64,
    pub cardinality: usize,
    /// A pair realizing `delta`, if some block has two points.
    pub delta_pair: Option<(usize, usize)>,
    /// A cross-block pair realizing `gamma`, if there are two blocks.
    pub gamma_pair: Option<(usize, usize)>,
}

/// `R = ln γ / ln δ`, with `R = 0` when `δ = 0` and `R = ∞` when `δ ≥ 1`
/// or `γ ≥ 1`.
pub fn log_ratio(ln_delta: f64, ln_gamma: f64) -> f64 {
    if ln_delta == f64::NEG_INFINITY {
        0.0
    } else if ln_delta >= 0.0 || ln_gamma >= 0.0 {
        f64::INFINITY
    } else {
        ln_gamma / ln_delta
    }
}

pub fn partition_stats(space: &FiniteMetricSpace, partition: &Partition) -> PartitionStats {
    assert_eq!(
        space.len(),
        partition.len(),
        "partition and space sizes differ"
    );
    let (delta_pair, gamma_pair) = match space.shape() {
        Shape::Line(order) => line_pairs(space, partition, order),
        Shape::MaxUltra(order) => max_ultra_pairs(partition, order),
        _ => generic_pairs(space, partition),
    };
    let (delta, ln_delta) = match delta_pair {
        Some((i, j)) => (space.dist(i, j), space.ln_dist(i, j)),
        None => (0.0, f64::NEG_INFINITY),
    };
    let (gamma, ln_gamma) = match gamma_pair {
        Some((i, j)) => (space.dist(i, j), space.ln_dist(i, j)),
        None => (space.diameter(), space.ln_diameter()),
    };
    PartitionStats {
        delta,
        gamma,
        ln_delta,
        ln_gamma,
        log_ratio: log_ratio(ln_delta, ln_gamma),
        cardinality: partition.num_blocks(),
        delta_pair,
        gamma_pair,
    }
}

type PairPair = (Option<(usize, usize)>, Option<(usize, usize)>);

fn generic_pairs(space: &FiniteMetricSpace, p: &Partition) -> PairPair {
    let n = space.len();
    let mut dmax = (f64::NEG_INFINITY, None);
    let mut gmin = (f64::INFINITY, None);
    for i in 0..n {
        for j in i + 1..n {
            let v = space.ln_dist(i, j);
            if p.block_of[i] == p.block_of[j] {
                if v > dmax.0 {
                    dmax = (v, Some((i, j)));
                }
            } else if v < gmin.0 {
                gmin = (v, Some((i, j)));
            }
        }
    }
    (dmax.1, gmin.1)
}

/// On the line a block's diameter is attained by its extreme points and the
/// closest cross-block pair is adjacent in sorted order.
fn line_pairs(space: &FiniteMetricSpace, p: &Partition, order: &[usize]) -> PairPair {
    let mut first = vec![usize::MAX; p.num_blocks()];
    let mut last = vec![usize::MAX; p.num_blocks()];
    let mut gmin = (f64::INFINITY, None);
    for (k, &i) in order.iter().enumerate() {
        let b = p.block_of[i];
        if first[b] == usize::MAX {
            first[b] = i;
        }
        last[b] = i;
        if k > 0 {
            let prev = order[k - 1];
            if p.block_of[prev] != b {
                let v = space.ln_dist(prev, i);
                if v < gmin.0 {
                    gmin = (v, Some(ordered(prev, i)));
                }
            }
        }
    }
    let mut dmax = (f64::NEG_INFINITY, None);
    for b in 0..p.num_blocks() {
        if first[b] != last[b] {
            let v = space.ln_dist(first[b], last[b]);
            if v > dmax.0 {
                dmax = (v, Some(ordered(first[b], last[b])));
            }
        }
    }
    (dmax.1, gmin.1)
}

/// For `d = max(c_i, c_j)`, `order` ascending by `c`.
fn max_ultra_pairs(p: &Partition, order: &[usize]) -> PairPair {
    let root = order[0];
    let gamma_pair = order
        .iter()
        .find(|&&j| p.block_of[j] != p.block_of[root])
        .map(|&j| ordered(root, j));
    // The block member with the largest c realizes the block diameter.
    let mut top = vec![usize::MAX; p.num_blocks()];
    let mut other = vec![usize::MAX; p.num_blocks()];
    for &i in order {
        let b = p.block_of[i];
        other[b] = top[b];
        top[b] = i;
    }
    let mut best: Option<(usize, usize)> = None;
    let mut best_rank = 0;
    let rank = {
        let mut r = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            r[i] = k;
        }
        r
    };
    for b in 0..p.num_blocks() {
        if other[b] != usize::MAX && (best.is_none() || rank[top[b]] > best_rank) {
            best_rank = rank[top[b]];
            best = Some(ordered(top[b], other[b]));
        }
    }
    (best, gamma_pair)
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

/// Components of the graph with edges `d(x, y) < t`.
pub fn threshold_partition(space: &FiniteMetricSpace, t: f64) -> Result<Partition> {
    crate::error::check_param(t > 0.0, "t", t, "t > 0")?;
    Ok(threshold_partition_ln(space, t.ln()))
}

/// Components of the graph with edges `ln d(x, y) < ln_t`.
pub fn threshold_partition_ln(space: &FiniteMetricSpace, ln_t: f64) -> Partition {
    let edges = minimum_spanning_tree(space);
    let n = space.len();
    let mut uf = UnionFind::new(n);
    for &(w, i, j) in &edges {
        if w < ln_t {
            uf.union(i, j);
        }
    }
    Partition::from_union_find(&mut uf, n)
}

/// Minimum spanning tree as `(ln weight, i, j)`, sorted by weight ascending.
///
/// Components of `{d < t}` (or `{d ≤ t}`) coincide with the components of
/// the tree edges below (or up to) `t`.
pub(crate) fn minimum_spanning_tree(space: &FiniteMetricSpace) -> Vec<(f64, usize, usize)> {
    let mut edges = match space.shape() {
        Shape::Line(order) => order
            .windows(2)
            .map(|w| (space.ln_dist(w[0], w[1]), w[0].min(w[1]), w[0].max(w[1])))
            .collect(),
        Shape::MaxUltra(order) => order[1..]
            .iter()
            .map(|&j| (space.ln_dist(order[0], j), order[0].min(j), order[0].max(j)))
            .collect(),
        _ => prim(space),
    };
    edges.sort_by(|a: &(f64, usize, usize), b| {
        a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2)))
    });
    edges
}

fn prim(space: &FiniteMetricSpace) -> Vec<(f64, usize, usize)> {
    let n = space.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    in_tree[0] = true;
    for j in 1..n {
        best[j] = space.ln_dist(0, j);
    }
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        let p = parent[next];
        edges.push((best[next], p.min(next), p.max(next)));
        for j in 0..n {
            if !in_tree[j] {
                let v = space.ln_dist(next, j);
                if v < best[j] {
                    best[j] = v;
                    parent[j] = next;
                }
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{default_labels, ValidateOptions};

    fn line(x: &[f64]) -> FiniteMetricSpace {
        FiniteMetricSpace::from_line(default_labels(x.len()), x.to_vec()).unwrap()
    }

    fn dense(x: &[f64]) -> FiniteMetricSpace {
        let m: Vec<Vec<f64>> = x
            .iter()
            .map(|a| x.iter().map(|b| (a - b).abs()).collect())
            .collect();
        FiniteMetricSpace::validate(&m, default_labels(x.len()), &ValidateOptions::default())
            .unwrap()
    }

    #[test]
    fn canonical_form() {
        let a = Partition::from_labels(&["b", "a", "b", "c"]);
        let b = Partition::from_blocks(4, vec![vec![3], vec![2, 0], vec![1]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.blocks(), &[vec![0, 2], vec![1], vec![3]]);
    }

    #[test]
    fn invalid_blocks() {
        assert!(Partition::from_blocks(3, vec![vec![0, 1]]).is_err());
        assert!(Partition::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::from_blocks(2, vec![vec![0, 1], vec![]]).is_err());
        assert!(Partition::from_blocks(2, vec![vec![0, 5]]).is_err());
    }

    #[test]
    fn refinement() {
        let fine = Partition::from_labels(&[0, 1, 2, 2]);
        let coarse = Partition::from_labels(&[0, 0, 1, 1]);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
        assert!(Partition::singletons(4).refines(&fine));
        assert!(fine.refines(&Partition::trivial(4)));
    }

    #[test]
    fn singletons_have_zero_ratio() {
        let s = line(&[0.0, 0.3, 0.8]);
        let st = partition_stats(&s, &Partition::singletons(3));
        assert_eq!(st.delta, 0.0);
        assert_eq!(st.log_ratio, 0.0);
        assert!((st.gamma - 0.3).abs() < 1e-15);
    }

    #[test]
    fn trivial_gap_is_diameter() {
        let s = line(&[0.0, 0.3, 0.8]);
        let st = partition_stats(&s, &Partition::trivial(3));
        assert_eq!(st.gamma, 0.8);
        assert_eq!(st.delta, 0.8);
        assert_eq!(st.cardinality, 1);
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(log_ratio(f64::NEG_INFINITY, -1.0), 0.0);
        assert_eq!(log_ratio(0.0, -1.0), f64::INFINITY);
        assert_eq!(log_ratio(-1.0, 0.0), f64::INFINITY);
        assert_eq!(log_ratio(-2.0, -1.0), 0.5);
    }

    #[test]
    fn threshold_examples() {
        let s = line(&[0.0, 0.5, 1.0]);
        let p = threshold_partition(&s, 0.4).unwrap();
        assert!(p.is_singletons());
        let st = partition_stats(&s, &p);
        assert_eq!((st.delta, st.gamma), (0.0, 0.5));
        assert_eq!(threshold_partition(&s, 0.6).unwrap().num_blocks(), 1);
        assert_eq!(threshold_partition(&s, 1.5).unwrap().num_blocks(), 1);
        assert!(threshold_partition(&s, 0.0).is_err());
    }

    #[test]
    fn fast_paths_match_generic() {
        let x = [0.0, 0.11, 0.13, 0.4, 0.42, 0.9, 0.97];
        let (a, b) = (line(&x), dense(&x));
        for labels in [
            vec![0, 0, 1, 1, 1, 2, 2],
            vec![0, 1, 0, 1, 0, 1, 0],
            vec![0, 0, 0, 0, 0, 0, 0],
            vec![0, 1, 2, 3, 4, 5, 6],
        ] {
            let p = Partition::from_labels(&labels);
            let (sa, sb) = (partition_stats(&a, &p), partition_stats(&b, &p));
            assert_eq!(sa.delta, sb.delta);
            assert_eq!(sa.gamma, sb.gamma);
        }
    }

    #[test]
    fn max_ultra_fast_path_matches_generic() {
        let c = [0.0f64, 0.5, 0.25, 0.2, 0.9];
        let u = FiniteMetricSpace::max_ultrametric(
            default_labels(5),
            c.iter().map(|v| v.ln()).collect(),
        )
        .unwrap();
        let m = u.to_matrix();
        let g = FiniteMetricSpace::validate(&m, default_labels(5), &ValidateOptions::default())
            .unwrap();
        for labels in [
            vec![0, 0, 1, 1, 2],
            vec![0, 1, 0, 1, 0],
            vec![3, 1, 2, 3, 3],
        ] {
            let p = Partition::from_labels(&labels);
            let (sa, sb) = (partition_stats(&u, &p), partition_stats(&g, &p));
            assert_eq!(sa.delta, sb.delta);
            assert_eq!(sa.gamma, sb.gamma);
        }
    }

    #[test]
    fn restrict_to_subset() {
        let p = Partition::from_labels(&[0, 0, 1, 1, 2]);
        let r = p.restrict(&[1, 3, 4, 0]);
        assert_eq!(r.blocks(), &[vec![0, 3], vec![1], vec![2]]);
    }
}
