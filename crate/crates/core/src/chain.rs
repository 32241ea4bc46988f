//! Nested partition chains: single-linkage dendrograms, ball chains of
//! ultrametrics, classification by diameter decay, and transport of chain
//! parameters through bi-Hölder maps.

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::metric::{FiniteMetricSpace, Shape};
use crate::partition::{minimum_spanning_tree, partition_stats, Partition, PartitionStats};

/// Coarse-to-fine nested partitions with their statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionChain {
    levels: Vec<Partition>,
    stats: Vec<PartitionStats>,
    /// Merge radius of each level, `None` for a level not produced by a threshold.
    thresholds: Vec<Option<f64>>,
    /// Level numbers `n` of `α_n`; consecutive from 1 unless set explicitly.
    indices: Vec<usize>,
}

impl PartitionChain {
    /// Checks nesting and computes the statistics of every level.
    pub fn new(
        space: &FiniteMetricSpace,
        levels: Vec<Partition>,
        thresholds: Vec<Option<f64>>,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidPartition("chain has no levels".into()));
        }
        if thresholds.len() != levels.len() {
            return Err(Error::InvalidPartition(format!(
                "{} thresholds for {} levels",
                thresholds.len(),
                levels.len()
            )));
        }
        for (k, level) in levels.iter().enumerate() {
            if level.len() != space.len() {
                return Err(Error::InvalidPartition(format!(
                    "level {k} covers {} points, space has {}",
                    level.len(),
                    space.len()
                )));
            }
            if k > 0 && !level.refines(&levels[k - 1]) {
                return Err(Error::NotNested { level: k });
            }
        }
        let stats: Vec<PartitionStats> = levels
            .par_iter()
            .map(|p| partition_stats(space, p))
            .collect();
        let last = levels.len() - 1;
        if let Some(k) = (0..last).find(|&k| stats[k].ln_delta == f64::NEG_INFINITY) {
            return Err(Error::InvalidPartition(format!(
                "level {k} has zero diameter but is not the final level"
            )));
        }
        let indices = (1..=levels.len()).collect();
        Ok(Self {
            levels,
            stats,
            thresholds,
            indices,
        })
    }

    /// Assigns the level numbers `n` (strictly increasing).
    pub fn with_indices(mut self, indices: Vec<usize>) -> Result<Self> {
        if indices.len() != self.levels.len() || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition(
                "level indices must be strictly increasing, one per level".into(),
            ));
        }
        self.indices = indices;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn stats(&self) -> &[PartitionStats] {
        &self.stats
    }

    pub fn thresholds(&self) -> &[Option<f64>] {
        &self.thresholds
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Positions of the levels with positive diameter.
    pub fn positive_levels(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.stats[k].ln_delta > f64::NEG_INFINITY)
            .collect()
    }

    /// The chain with `{X}` prepended when its first level has several blocks.
    pub fn with_root(&self, space: &FiniteMetricSpace) -> Result<Self> {
        if self.levels[0].num_blocks() == 1 {
            return Ok(self.clone());
        }
        let mut levels = vec![Partition::trivial(space.len())];
        levels.extend(self.levels.iter().cloned());
        let mut thresholds = vec![None];
        thresholds.extend(self.thresholds.iter().copied());
        let first = self.indices[0];
        let mut indices = vec![first.saturating_sub(1)];
        if first == 0 {
            // No room below the first index: renumber from 0.
            indices = (0..levels.len()).collect();
        } else {
            indices.extend(self.indices.iter().copied());
        }
        Self::new(space, levels, thresholds)?.with_indices(indices)
    }

    /// The sub-chain at the given positions (ascending).
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        if positions.is_empty() || positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition(
                "selected positions must be nonempty and increasing".into(),
            ));
        }
        if positions.iter().any(|&k| k >= self.len()) {
            return Err(Error::InvalidPartition(
                "selected position out of range".into(),
            ));
        }
        if positions[..positions.len() - 1]
            .iter()
            .any(|&k| self.stats[k].ln_delta == f64::NEG_INFINITY)
        {
            return Err(Error::InvalidPartition(
                "zero-diameter level must be last".into(),
            ));
        }
        Ok(Self {
            levels: positions.iter().map(|&k| self.levels[k].clone()).collect(),
            stats: positions.iter().map(|&k| self.stats[k]).collect(),
            thresholds: positions.iter().map(|&k| self.thresholds[k]).collect(),
            indices: positions.iter().map(|&k| self.indices[k]).collect(),
        })
    }
}

/// Distinct tree weights, descending, each with a representative edge.
fn distinct_weights(edges: &[(f64, usize, usize)]) -> Vec<(f64, usize, usize)> {
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    for &e in edges.iter().rev() {
        if out.last().is_none_or(|l| l.0 != e.0) {
            out.push(e);
        }
    }
    out
}

/// The full single-linkage merge chain, coarse to fine.
///
/// Level 0 is `{X}`; each further level is the threshold partition at one of
/// the distinct spanning-tree weights, in decreasing order, ending with the
/// singletons.
pub fn dendrogram_chain(space: &FiniteMetricSpace) -> PartitionChain {
    let n = space.len();
    let edges = minimum_spanning_tree(space);
    let weights = distinct_weights(&edges);

    let mut uf = UnionFind::new(n);
    let mut next = 0;
    let mut fine_to_coarse = Vec::with_capacity(weights.len());
    for &(w, _, _) in weights.iter().rev() {
        while next < edges.len() && edges[next].0 < w {
            uf.union(edges[next].1, edges[next].2);
            next += 1;
        }
        fine_to_coarse.push(Partition::from_union_find(&mut uf, n));
    }
    let mut levels = vec![Partition::trivial(n)];
    levels.extend(fine_to_coarse.into_iter().rev());
    let mut thresholds = vec![None];
    thresholds.extend(weights.iter().map(|&(_, i, j)| Some(space.dist(i, j))));
    PartitionChain::new(space, levels, thresholds).expect("threshold partitions are nested")
}

/// Partitions of an ultrametric into closed balls of each distance value.
///
/// Level `n` uses the `n`-th largest distance `r_n`, so `δ(α_n) = r_n` and
/// `γ(α_n) = r_{n-1}`. The chain stops at the smallest positive distance.
pub fn ball_chain(space: &FiniteMetricSpace) -> Result<PartitionChain> {
    if matches!(space.shape(), Shape::General | Shape::Line(_)) {
        let check = space.is_ultrametric();
        if let Some(witness) = check.worst {
            return Err(Error::NotUltrametric {
                witness,
                excess: check.relative_excess,
            });
        }
    }
    let n = space.len();
    let edges = minimum_spanning_tree(space);
    let weights = distinct_weights(&edges);
    if weights.is_empty() {
        return PartitionChain::new(space, vec![Partition::trivial(n)], vec![None]);
    }
    let mut uf = UnionFind::new(n);
    let mut next = 0;
    let mut fine_to_coarse = Vec::with_capacity(weights.len());
    for &(w, _, _) in weights.iter().rev() {
        while next < edges.len() && edges[next].0 <= w {
            uf.union(edges[next].1, edges[next].2);
            next += 1;
        }
        fine_to_coarse.push(Partition::from_union_find(&mut uf, n));
    }
    let levels: Vec<Partition> = fine_to_coarse.into_iter().rev().collect();
    let thresholds = weights
        .iter()
        .map(|&(_, i, j)| Some(space.dist(i, j)))
        .collect();
    PartitionChain::new(space, levels, thresholds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dichotomy {
    /// `γ(α_n) > δ(α_n)`
    GapExceedsDiameter,
    /// `γ(α_n) ≤ δ(α_n)`
    GapAtMostDiameter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainClassReport {
    pub p: f64,
    pub is_refining: bool,
    pub delta_monotone: bool,
    /// `min_n δ(α_{n+1}) / δ(α_n)^p` over consecutive positive-diameter levels.
    pub p_witness: f64,
    pub ln_p_witness: f64,
    /// Level number `n` at which the minimum is attained.
    pub p_witness_level: usize,
    /// Level numbers of the positive-diameter levels.
    pub indices: Vec<usize>,
    #[serde(rename = "R_sequence")]
    pub r_sequence: Vec<f64>,
    /// `inf_{m ≥ n} R(α_m)` for each listed level.
    pub running_liminf: Vec<f64>,
    #[serde(rename = "R_liminf_estimate")]
    pub r_liminf_estimate: f64,
    pub dichotomy_flags: Vec<Dichotomy>,
}

/// Tail infima of a sequence.
pub(crate) fn tail_infima(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let mut acc = f64::INFINITY;
    for k in (0..values.len()).rev() {
        acc = acc.min(values[k]);
        out[k] = acc;
    }
    out
}

pub fn classify_chain(chain: &PartitionChain, p: f64) -> Result<ChainClassReport> {
    check_param(p > 1.0, "p", p, "p > 1")?;
    let pos = chain.positive_levels();
    if pos.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "chain",
            value: pos.len() as f64,
            expected: "at least two levels with positive diameter",
        });
    }
    let levels = chain.levels();
    let is_refining = (1..levels.len()).all(|k| levels[k].refines(&levels[k - 1]));
    if let Some(k) = (1..levels.len()).find(|&k| !levels[k].refines(&levels[k - 1])) {
        return Err(Error::NotNested { level: k });
    }
    let st = chain.stats();
    let delta_monotone = pos
        .windows(2)
        .all(|w| st[w[1]].ln_delta <= st[w[0]].ln_delta);
    let mut ln_a = f64::INFINITY;
    let mut at = chain.indices()[pos[0]];
    for w in pos.windows(2) {
        let v = st[w[1]].ln_delta - p * st[w[0]].ln_delta;
        if v < ln_a {
            ln_a = v;
            at = chain.indices()[w[0]];
        }
    }
    let r_sequence: Vec<f64> = pos.iter().map(|&k| st[k].log_ratio).collect();
    let running_liminf = tail_infima(&r_sequence);
    let dichotomy_flags = pos
        .iter()
        .map(|&k| {
            if st[k].ln_gamma > st[k].ln_delta {
                Dichotomy::GapExceedsDiameter
            } else {
                Dichotomy::GapAtMostDiameter
            }
        })
        .collect();
    Ok(ChainClassReport {
        p,
        is_refining,
        delta_monotone,
        p_witness: ln_a.exp(),
        ln_p_witness: ln_a,
        p_witness_level: at,
        indices: pos.iter().map(|&k| chain.indices()[k]).collect(),
        r_liminf_estimate: *running_liminf.last().unwrap_or(&f64::NAN),
        r_sequence,
        running_liminf,
        dichotomy_flags,
    })
}

/// Bounds `c1 d^t ≤ d' ≤ c2 d^s` of a map between two spaces on the same points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub s: f64,
    pub t: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Distortion {
    pub const IDENTITY: Distortion = Distortion {
        s: 1.0,
        t: 1.0,
        c1: 1.0,
        c2: 1.0,
    };

    fn check(&self) -> Result<()> {
        check_param(self.s > 0.0 && self.s.is_finite(), "s", self.s, "s > 0")?;
        check_param(
            self.t >= self.s && self.t.is_finite(),
            "t",
            self.t,
            "t >= s",
        )?;
        check_param(self.c1 > 0.0, "c1", self.c1, "c1 > 0")?;
        check_param(self.c2 > 0.0, "c2", self.c2, "c2 > 0")
    }

    /// Slack of both inequalities in log form; negative means violated.
    fn slacks(&self, ln_d: f64, ln_image: f64) -> (f64, f64) {
        (
            ln_image - (self.c1.ln() + self.t * ln_d),
            self.c2.ln() + self.s * ln_d - ln_image,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub distortion: Distortion,
    pub p: f64,
    pub p_witness: f64,
    pub p_image: f64,
    /// Guaranteed witness `a' = (c1 / c2^{p'}) a^t` for the image chain.
    pub a_image: f64,
    pub ln_a_image: f64,
    /// Witness actually measured on the image chain at `p'`.
    pub measured_ln_a_image: f64,
    pub image_stats: Vec<PartitionStats>,
    pub pairs_checked: usize,
}

/// Verifies the distortion bounds on every pair and transports the chain
/// parameters `(p, a)` to `(p', a')` on the image space.
pub fn pushforward_chain(
    domain: &FiniteMetricSpace,
    image: &FiniteMetricSpace,
    chain: &PartitionChain,
    distortion: Distortion,
    p: f64,
) -> Result<PushforwardReport> {
    distortion.check()?;
    if domain.len() != image.len() {
        return Err(Error::LabelMismatch {
            labels: image.len(),
            n: domain.len(),
        });
    }
    let tol = domain.tolerance().max(image.tolerance());
    let n = domain.len();
    for i in 0..n {
        for j in i + 1..n {
            let (lo, hi) = distortion.slacks(domain.ln_dist(i, j), image.ln_dist(i, j));
            if lo < -tol || hi < -tol {
                let which = if lo < -tol {
                    "c1 d^t <= d'"
                } else {
                    "d' <= c2 d^s"
                };
                return Err(Error::DistortionBoundsViolated {
                    pair: (i, j),
                    detail: format!("{which} fails with log slack {:e}", lo.min(hi)),
                });
            }
        }
    }
    let class = classify_chain(chain, p)?;
    let image_chain = PartitionChain::new(image, chain.levels().to_vec(), vec![None; chain.len()])?
        .with_indices(chain.indices().to_vec())?;
    for (k, (a, b)) in chain.stats().iter().zip(image_chain.stats()).enumerate() {
        if a.ln_gamma == f64::NEG_INFINITY {
            continue;
        }
        let (lo, hi) = distortion.slacks(a.ln_gamma, b.ln_gamma);
        if lo < -tol || hi < -tol {
            return Err(Error::DistortionBoundsViolated {
                pair: b.gamma_pair.unwrap_or((0, 0)),
                detail: format!("gap bound fails at level {k}"),
            });
        }
    }
    let p_image = distortion.t / distortion.s * p;
    let ln_a_image =
        distortion.c1.ln() - p_image * distortion.c2.ln() + distortion.t * class.ln_p_witness;
    let measured = classify_chain(&image_chain, p_image)?;
    Ok(PushforwardReport {
        distortion,
        p,
        p_witness: class.p_witness,
        p_image,
        a_image: ln_a_image.exp(),
        ln_a_image,
        measured_ln_a_image: measured.ln_p_witness,
        image_stats: image_chain.stats().to_vec(),
        pairs_checked: n * (n - 1) / 2,
    })
}
