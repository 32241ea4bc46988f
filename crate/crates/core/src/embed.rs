//! Box-norm embedding of a nested chain into `R^N` by recursive grid packing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{classify_chain, PartitionChain};
use crate::error::{check_param, Error, Result};
use crate::logratio::{profile, DEFAULT_EPSILON};
use crate::metric::FiniteMetricSpace;
use crate::ultrametric::{build_certificate, fit_holder_exponents, HolderFit};

/// Coordinate audits allow this many ulps of the largest coordinate.
pub const AUDIT_ULPS: f64 = 64.0;

fn coordinate_tolerance(coords: &[Vec<f64>]) -> f64 {
    let scale = coords.iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
    AUDIT_ULPS * f64::EPSILON * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDimension {
    /// `(D + R - 1)[(1 + s)(2R - 1) - 1] / s`
    pub bound: f64,
    /// Smallest integer strictly above `bound`.
    #[serde(rename = "N")]
    pub n: usize,
}

pub fn min_embedding_dimension(d: f64, r: f64, s: f64) -> Result<EmbeddingDimension> {
    check_param(d >= 0.0 && d.is_finite(), "D", d, "0 <= D < inf")?;
    check_param(r > 1.0 && r.is_finite(), "R", r, "1 < R < inf")?;
    check_param(s > 0.0 && s.is_finite(), "s", s, "s > 0")?;
    let bound = (d + r - 1.0) * ((1.0 + s) * (2.0 * r - 1.0) - 1.0) / s;
    let nearest = bound.round();
    let floor = if (bound - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        bound.floor()
    };
    Ok(EmbeddingDimension {
        bound,
        n: floor as usize + 1,
    })
}

/// Boxes of radius `child` with gap `gap` fitting along one axis of a box of
/// radius `parent`: `⌊(parent + gap/2) / (child + gap/2)⌋`.
pub fn capacity_per_axis(parent: f64, child: f64, gap: f64) -> u64 {
    let v = ((parent + gap / 2.0) / (child + gap / 2.0)).floor();
    if v.is_finite() && v >= 0.0 {
        v as u64
    } else {
        0
    }
}

/// `m^N`, saturating.
pub fn grid_capacity(m: u64, n_dim: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..n_dim {
        acc = acc.saturating_mul(m as u128);
    }
    acc
}

/// Largest number of children any block of `coarse` has in `fine`.
fn max_children(coarse: &crate::partition::Partition, fine: &crate::partition::Partition) -> usize {
    let mut counts = vec![0usize; coarse.num_blocks()];
    for b in fine.blocks() {
        counts[coarse.block_of(b[0])] += 1;
    }
    counts.into_iter().max().unwrap_or(0)
}

fn transition_feasible(chain: &PartitionChain, from: usize, to: usize, n_dim: usize) -> bool {
    let (a, b) = (&chain.stats()[from], &chain.stats()[to]);
    let m = capacity_per_axis(a.delta, b.delta, b.gamma);
    max_children(&chain.levels()[from], &chain.levels()[to]) as u128 <= grid_capacity(m, n_dim)
}

/// Longest sub-chain from the first to the last level whose every
/// transition passes the packing capacity check in dimension `n_dim`.
pub fn select_embedding_levels(chain: &PartitionChain, n_dim: usize) -> Result<Vec<usize>> {
    let l = chain.len();
    // best[j]: (levels kept, predecessor) on a feasible path 0 -> j.
    let mut best: Vec<Option<(usize, usize)>> = vec![None; l];
    best[0] = Some((1, 0));
    for j in 1..l {
        for i in 0..j {
            if let Some((len, _)) = best[i] {
                if best[j].is_none_or(|(b, _)| len + 1 > b)
                    && transition_feasible(chain, i, j, n_dim)
                {
                    best[j] = Some((len + 1, i));
                }
            }
        }
    }
    if best[l - 1].is_none() {
        let (required, capacity) = {
            let (a, b) = (&chain.stats()[0], &chain.stats()[l - 1]);
            let m = capacity_per_axis(a.delta, b.delta, b.gamma);
            (
                max_children(&chain.levels()[0], &chain.levels()[l - 1]),
                grid_capacity(m, n_dim),
            )
        };
        return Err(Error::PackingInfeasible {
            level: chain.indices()[0],
            required,
            capacity,
        });
    }
    let mut path = vec![l - 1];
    let mut cur = l - 1;
    while cur != 0 {
        cur = best[cur].expect("on path").1;
        path.push(cur);
    }
    path.reverse();
    Ok(path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelAudit {
    /// Level number `n` of the boxes placed at this step.
    pub level: usize,
    pub radius: f64,
    pub required_gap: f64,
    /// Most boxes placed inside one parent (or at top level).
    pub required: usize,
    pub capacity_per_axis: u64,
    pub capacity: u128,
    /// Smallest box-norm gap between sibling boxes; `None` without siblings.
    pub realized_gap: Option<f64>,
    /// Smallest margin between a box and its parent's boundary.
    pub containment_slack: f64,
    pub contained: bool,
    pub commutes: bool,
    /// Absolute tolerance of the gap and containment checks.
    pub tolerance: f64,
}

impl LevelAudit {
    pub fn passes(&self) -> bool {
        self.required as u128 <= self.capacity
            && self
                .realized_gap
                .is_none_or(|g| g >= self.required_gap - self.tolerance)
            && self.contained
            && self.commutes
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingResult {
    #[serde(rename = "N")]
    pub n_dim: usize,
    pub labels: Vec<String>,
    pub coords: Vec<Vec<f64>>,
    pub level_audit: Vec<LevelAudit>,
    /// Level numbers of the chain levels used, coarse to fine.
    pub levels_used: Vec<usize>,
    pub fitted: HolderFit,
    pub warnings: Vec<String>,
    /// Rounding allowance of the coordinates.
    pub tolerance: f64,
}

impl EmbeddingResult {
    pub fn audits_pass(&self) -> bool {
        self.level_audit.iter().all(LevelAudit::passes)
    }

    /// Box-norm distance between the images of two points.
    pub fn image_dist(&self, i: usize, j: usize) -> f64 {
        box_dist(&self.coords[i], &self.coords[j])
    }
}

fn box_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Offsets of `count` cells of an `m`-per-axis grid, in lexicographic order.
fn grid_cells(count: usize, m: u64, n_dim: usize) -> Vec<Vec<u64>> {
    (0..count as u128)
        .map(|mut k| {
            let mut cell = vec![0u64; n_dim];
            for c in cell.iter_mut().rev() {
                *c = (k % m as u128) as u64;
                k /= m as u128;
            }
            cell
        })
        .collect()
}

#[derive(Debug, Clone)]
struct PlacedBox {
    center: Vec<f64>,
    parent: Option<usize>,
}

/// Places one box per block of every chain level and maps each point to the
/// centre of its deepest box.
///
/// Top-level boxes sit on the smallest grid holding them, with pitch
/// `2δ_1 + γ_1`. Children of a box of radius `δ_n` sit on a grid of pitch
/// `2δ_{n+1} + γ_{n+1}` aligned with the parent's lower corner. Blocks are
/// taken in order of least point index and cells in lexicographic order.
pub fn embed_chain(
    space: &FiniteMetricSpace,
    chain: &PartitionChain,
    n_dim: usize,
    p: f64,
    epsilon: f64,
) -> Result<EmbeddingResult> {
    check_param(n_dim >= 1, "N", n_dim as f64, "N >= 1")?;
    check_param(epsilon > 0.0, "epsilon", epsilon, "epsilon > 0")?;
    let levels = chain.levels();
    let st = chain.stats();
    let last = &levels[levels.len() - 1];
    if let Some(b) = last.blocks().iter().find(|b| b.len() > 1) {
        return Err(Error::NotSeparating(b[0], b[1]));
    }
    let mut warnings = Vec::new();
    let r_est = profile(chain, DEFAULT_EPSILON).estimate;
    if r_est > 1.0 {
        let cap = (r_est - 1.0).min(1.0);
        if epsilon >= cap {
            warnings.push(format!(
                "epsilon = {epsilon} is outside (0, min(1, R - 1)) = (0, {cap}) for R = {r_est}"
            ));
        }
    } else {
        warnings.push(format!(
            "log ratio estimate {r_est} is at most 1; epsilon = {epsilon} taken as given"
        ));
    }
    if let Ok(class) = classify_chain(chain, p) {
        if class.p_witness <= 0.0 {
            warnings.push(format!("chain has no positive p-witness for p = {p}"));
        }
    }

    let mut audits = Vec::with_capacity(levels.len());
    let mut boxes: Vec<Vec<PlacedBox>> = Vec::with_capacity(levels.len());

    // Top level.
    let k = levels[0].num_blocks();
    let mut m = 1u64;
    while grid_capacity(m, n_dim) < k as u128 {
        m += 1;
    }
    let pitch = 2.0 * st[0].delta + st[0].gamma;
    let top: Vec<PlacedBox> = grid_cells(k, m, n_dim)
        .into_iter()
        .map(|cell| PlacedBox {
            center: cell.iter().map(|&c| c as f64 * pitch).collect(),
            parent: None,
        })
        .collect();
    audits.push(LevelAudit {
        level: chain.indices()[0],
        radius: st[0].delta,
        required_gap: st[0].gamma,
        required: k,
        capacity_per_axis: m,
        capacity: grid_capacity(m, n_dim),
        realized_gap: sibling_gap(&top, &(0..k).collect::<Vec<_>>(), st[0].delta),
        containment_slack: f64::INFINITY,
        contained: true,
        tolerance: 0.0,
        commutes: true,
    });
    boxes.push(top);

    for lvl in 1..levels.len() {
        let (parent_r, child_r, gap) = (st[lvl - 1].delta, st[lvl].delta, st[lvl].gamma);
        let m = capacity_per_axis(parent_r, child_r, gap);
        let capacity = grid_capacity(m, n_dim);
        let coarse = &levels[lvl - 1];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); coarse.num_blocks()];
        for (b, block) in levels[lvl].blocks().iter().enumerate() {
            children[coarse.block_of(block[0])].push(b);
        }
        let required = children.iter().map(Vec::len).max().unwrap_or(0);
        if required as u128 > capacity {
            return Err(Error::PackingInfeasible {
                level: chain.indices()[lvl - 1],
                required,
                capacity,
            });
        }
        let pitch = 2.0 * child_r + gap;
        let parents = &boxes[lvl - 1];
        let placed: Vec<(usize, PlacedBox)> = children
            .par_iter()
            .enumerate()
            .flat_map_iter(|(pb, kids)| {
                let origin: Vec<f64> = parents[pb]
                    .center
                    .iter()
                    .map(|c| c - parent_r + child_r)
                    .collect();
                grid_cells(kids.len(), m.max(1), n_dim)
                    .into_iter()
                    .zip(kids.clone())
                    .map(move |(cell, b)| {
                        let center = origin
                            .iter()
                            .zip(&cell)
                            .map(|(o, &c)| o + c as f64 * pitch)
                            .collect();
                        (
                            b,
                            PlacedBox {
                                center,
                                parent: Some(pb),
                            },
                        )
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut level_boxes: Vec<Option<PlacedBox>> = vec![None; levels[lvl].num_blocks()];
        for (b, pbox) in placed {
            level_boxes[b] = Some(pbox);
        }
        let level_boxes: Vec<PlacedBox> = level_boxes
            .into_iter()
            .map(|b| b.expect("every block placed"))
            .collect();

        let containment_slack = level_boxes
            .iter()
            .flat_map(|b| {
                let parent = &parents[b.parent.expect("child box")];
                b.center
                    .iter()
                    .zip(&parent.center)
                    .map(move |(c, pc)| parent_r - (c - pc).abs() - child_r)
            })
            .fold(f64::INFINITY, f64::min);
        // f_n ∘ g_n = h_n ∘ f_{n+1}: the box of a block sits in the box of its parent block.
        let commutes = levels[lvl]
            .blocks()
            .iter()
            .enumerate()
            .all(|(b, block)| level_boxes[b].parent == Some(coarse.block_of(block[0])));
        let realized_gap = children
            .iter()
            .filter_map(|kids| sibling_gap(&level_boxes, kids, child_r))
            .fold(None, |acc: Option<f64>, g| {
                Some(acc.map_or(g, |a| a.min(g)))
            });
        audits.push(LevelAudit {
            level: chain.indices()[lvl],
            radius: child_r,
            required_gap: gap,
            required,
            capacity_per_axis: m,
            capacity,
            realized_gap,
            containment_slack,
            contained: true,
            tolerance: 0.0,
            commutes,
        });
        boxes.push(level_boxes);
    }

    let deepest = boxes.last().expect("at least one level");
    let coords: Vec<Vec<f64>> = (0..space.len())
        .map(|i| deepest[last.block_of(i)].center.clone())
        .collect();
    let tolerance = coordinate_tolerance(&coords);
    for a in audits.iter_mut() {
        a.tolerance = tolerance;
        a.contained = a.containment_slack >= -tolerance;
    }
    if let Some(g) = audits
        .iter()
        .filter(|a| a.realized_gap.is_some())
        .map(|a| a.required_gap)
        .reduce(f64::min)
    {
        if g < 1e3 * tolerance {
            warnings.push(format!(
                "smallest required gap {g:e} is within 1e3 of the coordinate rounding {tolerance:e}"
            ));
        }
    }
    let n = space.len();
    let mut image = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            image[i * n + j] = box_dist(&coords[i], &coords[j]);
        }
    }
    let image_space = FiniteMetricSpace::from_dense_unchecked(space.labels().to_vec(), image);
    let fitted = fit_holder_exponents(space, &image_space)?;
    Ok(EmbeddingResult {
        n_dim,
        labels: space.labels().to_vec(),
        coords,
        level_audit: audits,
        levels_used: chain.indices().to_vec(),
        fitted,
        warnings,
        tolerance,
    })
}

fn sibling_gap(boxes: &[PlacedBox], ids: &[usize], radius: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (a, &i) in ids.iter().enumerate() {
        for &j in &ids[a + 1..] {
            let g = box_dist(&boxes[i].center, &boxes[j].center) - 2.0 * radius;
            best = Some(best.map_or(g, |b| b.min(g)));
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    pub p: f64,
    pub epsilon: f64,
    #[serde(rename = "R_est")]
    pub r_est: f64,
    pub a: f64,
    pub exponent: f64,
    pub target_holder_exponent: f64,
    pub burn_in: usize,
    /// Where `burn_in` came from: `"certificate"`, `"user"` or `"first-level"`.
    pub burn_in_source: String,
    pub pairs_checked: usize,
    pub pairs_asserted: usize,
    /// Smallest log slack of `a^{R+ε} d^{p(R+ε)} ≤ ‖Δf‖` over asserted pairs.
    pub lower_slack: f64,
    /// Smallest log slack of `‖Δf‖ ≤ 2 a^{-1/p} d^{1/p(R+ε)}` over asserted pairs.
    pub upper_slack: f64,
    /// Smallest absolute slack of `γ_{n+1} ≤ ‖Δf‖ ≤ 2 δ_n` over all pairs.
    pub sandwich_slack: f64,
    pub fitted: HolderFit,
}

/// Checks the distortion bounds on every pair split at or below `burn_in`
/// and the box sandwich on every pair.
pub fn verify_embedding_distortion(
    space: &FiniteMetricSpace,
    chain: &PartitionChain,
    result: &EmbeddingResult,
    p: f64,
    epsilon: f64,
    burn_in: Option<usize>,
) -> Result<DistortionReport> {
    let class = classify_chain(chain, p)?;
    let r_est = profile(chain, DEFAULT_EPSILON).estimate;
    let exponent = p * (r_est + epsilon);
    let (burn_in, source) = match burn_in {
        Some(b) => (b, "user"),
        None => match build_certificate(space, chain, p, epsilon) {
            Ok(c) => (c.m_index, "certificate"),
            Err(_) => (chain.indices()[0], "first-level"),
        },
    };
    let levels = chain.levels();
    let st = chain.stats();
    let idx = chain.indices();
    let n = space.len();
    let ln_a = class.ln_p_witness;
    let ln2 = std::f64::consts::LN_2;
    let tol = result.tolerance;

    let per_row: Vec<Result<(f64, f64, f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut lo, mut hi, mut sw, mut asserted) =
                (f64::INFINITY, f64::INFINITY, f64::INFINITY, 0);
            for j in i + 1..n {
                // Deepest level still joining i and j; they split at the next one.
                let k = (0..levels.len())
                    .rev()
                    .find(|&k| levels[k].block_of(i) == levels[k].block_of(j))
                    .expect("the first level joins every pair or the pair splits at the top");
                let img = result.image_dist(i, j);
                let s_low = img - st[k + 1].gamma;
                let s_high = 2.0 * st[k].delta - img;
                sw = sw.min(s_low).min(s_high);
                if s_low < -tol || s_high < -tol {
                    return Err(Error::BoundViolated {
                        pair: (i, j),
                        level: idx[k + 1],
                        which: if s_low < -tol {
                            "gamma <= |f(x)-f(y)|"
                        } else {
                            "|f(x)-f(y)| <= 2 delta"
                        },
                        slack: s_low.min(s_high),
                    });
                }
                if idx[k] >= burn_in {
                    let (ld, li) = (space.ln_dist(i, j), img.ln());
                    let l = li - ((r_est + epsilon) * ln_a + exponent * ld);
                    let h = (ln2 - ln_a / p + ld / exponent) - li;
                    if l < -space.tolerance() || h < -space.tolerance() {
                        return Err(Error::BoundViolated {
                            pair: (i, j),
                            level: idx[k + 1],
                            which: if l < -space.tolerance() {
                                "lower distortion"
                            } else {
                                "upper distortion"
                            },
                            slack: l.min(h),
                        });
                    }
                    lo = lo.min(l);
                    hi = hi.min(h);
                    asserted += 1;
                }
            }
            Ok((lo, hi, sw, asserted))
        })
        .collect();
    let (mut lo, mut hi, mut sw, mut asserted) = (f64::INFINITY, f64::INFINITY, f64::INFINITY, 0);
    for row in per_row {
        let (a, b, c, d) = row?;
        lo = lo.min(a);
        hi = hi.min(b);
        sw = sw.min(c);
        asserted += d;
    }
    Ok(DistortionReport {
        p,
        epsilon,
        r_est,
        a: class.p_witness,
        exponent,
        target_holder_exponent: 1.0 / exponent,
        burn_in,
        burn_in_source: source.to_string(),
        pairs_checked: n * n.saturating_sub(1) / 2,
        pairs_asserted: asserted,
        lower_slack: lo,
        upper_slack: hi,
        sandwich_slack: sw,
        fitted: result.fitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::dendrogram_chain;
    use crate::metric::default_labels;

    #[test]
    fn dimension_bound_examples() {
        let e = min_embedding_dimension(1.0, 2.0, 1.0).unwrap();
        assert_eq!((e.bound, e.n), (10.0, 11));
        assert_eq!(min_embedding_dimension(0.0, 2.0, 1.0).unwrap().n, 6);
        assert!(min_embedding_dimension(1.0, 1.0, 1.0).is_err());
        assert!(min_embedding_dimension(1.0, f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn capacity_example() {
        let m = capacity_per_axis(0.5, 0.1, 0.05);
        assert_eq!(m, 4);
        assert_eq!(grid_capacity(m, 2), 16);
    }

    #[test]
    fn two_point_embedding() {
        let s = FiniteMetricSpace::from_line(default_labels(2), vec![0.0, 0.3]).unwrap();
        let c = dendrogram_chain(&s);
        let e = embed_chain(&s, &c, 1, 2.0, 0.1).unwrap();
        assert!(e.audits_pass());
        assert!(e.image_dist(0, 1) >= c.stats()[1].gamma);
    }
}
