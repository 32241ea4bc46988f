//! Gap-bound functions `G`, `g`, the ratio bounds they induce, and the
//! brute-force oracle over all partitions of a small space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{dendrogram_chain, tail_infima};
use crate::enumerate::all_partitions;
use crate::error::{check_param, Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::partition::{
    log_ratio, partition_stats, threshold_partition_ln, Partition, PartitionStats,
};

/// Largest space handled by full partition enumeration (Bell(8) = 4140).
pub const EXACT_MAX_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapBoundsMode {
    /// Enumerate every partition; at most 8 points.
    Exact,
    /// `g` from the single-linkage chain, `G` from two-block cuts.
    Heuristic,
    /// Exact when small enough, heuristic otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBoundsRow {
    pub r: f64,
    pub ln_r: f64,
    /// `inf γ(α)` over partitions with `δ(α) ≥ r`; `+inf` when none qualifies.
    #[serde(rename = "G")]
    pub upper_gap: f64,
    pub ln_upper_gap: f64,
    /// `sup γ(α)` over partitions with `δ(α) ≤ r`.
    pub g: f64,
    pub ln_g: f64,
    /// `ln g(r) / ln r`
    pub lower_ratio: Option<f64>,
    /// `ln G(r) / ln r`
    pub upper_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapBounds {
    pub mode: GapBoundsMode,
    /// True when `G` comes from the heuristic and is only an upper bound.
    #[serde(rename = "G_upper_bound_only")]
    pub upper_gap_is_bound: bool,
    /// Rows ordered by decreasing radius.
    pub rows: Vec<GapBoundsRow>,
    /// Tail infimum of `ln g / ln r` at the smallest radius.
    pub lower_estimate: Option<f64>,
    /// Tail infimum of `ln G / ln r` at the smallest radius.
    pub upper_estimate: Option<f64>,
}

/// `(ln δ, ln γ)` of the partitions a mode ranges over.
fn candidates_for_g_upper(space: &FiniteMetricSpace, exact: bool) -> Vec<(f64, f64)> {
    let n = space.len();
    if exact {
        let parts: Vec<Partition> = all_partitions(n).collect();
        return parts
            .par_iter()
            .map(|p| {
                let st = partition_stats(space, p);
                (st.ln_delta, st.ln_gamma)
            })
            .collect();
    }
    let chain = dendrogram_chain(space);
    let mut clusters: Vec<Vec<usize>> = chain
        .levels()
        .iter()
        .flat_map(|l| l.blocks().iter().cloned())
        .filter(|b| b.len() < n)
        .collect();
    clusters.sort();
    clusters.dedup();
    let mut out: Vec<(f64, f64)> = clusters
        .par_iter()
        .map(|c| {
            let mut labels = vec![0u8; n];
            for &i in c {
                labels[i] = 1;
            }
            let st = partition_stats(space, &Partition::from_labels(&labels));
            (st.ln_delta, st.ln_gamma)
        })
        .collect();
    out.extend(chain.stats().iter().map(|s| (s.ln_delta, s.ln_gamma)));
    out
}

pub fn gap_bounds(
    space: &FiniteMetricSpace,
    radii: &[f64],
    mode: GapBoundsMode,
) -> Result<GapBounds> {
    for &r in radii {
        check_param(r > 0.0, "r", r, "r > 0")?;
    }
    let ln_radii: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    gap_bounds_ln(space, &ln_radii, mode, &[])
}

/// As [`gap_bounds`], with radii given by their logarithms and optional extra
/// partitions admitted as candidates for the heuristic `G`.
pub fn gap_bounds_ln(
    space: &FiniteMetricSpace,
    ln_radii: &[f64],
    mode: GapBoundsMode,
    extra: &[Partition],
) -> Result<GapBounds> {
    let n = space.len();
    let exact = match mode {
        GapBoundsMode::Exact if n > EXACT_MAX_POINTS => {
            return Err(Error::ExactModeSizeExceeded {
                n,
                max: EXACT_MAX_POINTS,
            })
        }
        GapBoundsMode::Exact => true,
        GapBoundsMode::Heuristic => false,
        GapBoundsMode::Auto => n <= EXACT_MAX_POINTS,
    };
    let mut upper_cands = candidates_for_g_upper(space, exact);
    upper_cands.extend(extra.iter().map(|p| {
        let st = partition_stats(space, p);
        (st.ln_delta, st.ln_gamma)
    }));
    // Threshold partitions dominate: g is attained on the single-linkage chain.
    let lower_cands: Vec<(f64, f64)> = dendrogram_chain(space)
        .stats()
        .iter()
        .map(|s| (s.ln_delta, s.ln_gamma))
        .collect();

    let mut sorted: Vec<f64> = ln_radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rows: Vec<GapBoundsRow> = sorted
        .iter()
        .map(|&ln_r| {
            let ln_upper = upper_cands
                .iter()
                .filter(|c| c.0 >= ln_r)
                .map(|c| c.1)
                .fold(f64::INFINITY, f64::min);
            let ln_g = lower_cands
                .iter()
                .filter(|c| c.0 <= ln_r)
                .map(|c| c.1)
                .fold(f64::NEG_INFINITY, f64::max);
            let ratio = |ln_v: f64| (ln_v.is_finite() && ln_r < 0.0).then(|| log_ratio(ln_r, ln_v));
            GapBoundsRow {
                r: ln_r.exp(),
                ln_r,
                upper_gap: ln_upper.exp(),
                ln_upper_gap: ln_upper,
                g: ln_g.exp(),
                ln_g,
                lower_ratio: ratio(ln_g),
                upper_ratio: ratio(ln_upper),
            }
        })
        .collect();
    let estimate = |pick: fn(&GapBoundsRow) -> Option<f64>| {
        let vals: Vec<f64> = rows.iter().filter_map(pick).collect();
        tail_infima(&vals).last().copied()
    };
    Ok(GapBounds {
        mode: if exact {
            GapBoundsMode::Exact
        } else {
            GapBoundsMode::Heuristic
        },
        upper_gap_is_bound: !exact,
        lower_estimate: estimate(|r| r.lower_ratio),
        upper_estimate: estimate(|r| r.upper_ratio),
        rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinRatio {
    #[serde(rename = "min_R")]
    pub min_ratio: f64,
    pub witness: Partition,
    pub stats: PartitionStats,
    pub partitions_examined: usize,
}

/// Minimum of `R(α)` over every partition with `δ(α) < r`.
#[allow(non_snake_case)]
pub fn brute_force_min_R(space: &FiniteMetricSpace, r: f64) -> Result<MinRatio> {
    check_param(r > 0.0, "r", r, "r > 0")?;
    let n = space.len();
    if n > EXACT_MAX_POINTS {
        return Err(Error::ExactModeSizeExceeded {
            n,
            max: EXACT_MAX_POINTS,
        });
    }
    let parts: Vec<Partition> = all_partitions(n).collect();
    let examined = parts.len();
    let ln_r = r.ln();
    let best = parts
        .into_par_iter()
        .enumerate()
        .map(|(k, p)| {
            let st = partition_stats(space, &p);
            (k, p, st)
        })
        .filter(|(_, _, st)| st.ln_delta < ln_r)
        .min_by(|a, b| a.2.log_ratio.total_cmp(&b.2.log_ratio).then(a.0.cmp(&b.0)))
        .expect("the singletons always qualify");
    Ok(MinRatio {
        min_ratio: best.2.log_ratio,
        witness: best.1,
        stats: best.2,
        partitions_examined: examined,
    })
}

/// Minimum of `R` over the single-linkage levels with `δ < r`.
#[allow(non_snake_case)]
pub fn threshold_chain_min_R(space: &FiniteMetricSpace, r: f64) -> Result<MinRatio> {
    check_param(r > 0.0, "r", r, "r > 0")?;
    let chain = dendrogram_chain(space);
    let ln_r = r.ln();
    let (k, st) = chain
        .stats()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.ln_delta < ln_r)
        .min_by(|a, b| a.1.log_ratio.total_cmp(&b.1.log_ratio))
        .expect("the singletons level always qualifies");
    Ok(MinRatio {
        min_ratio: st.log_ratio,
        witness: chain.levels()[k].clone(),
        stats: *st,
        partitions_examined: chain.len(),
    })
}

/// Minimum of `R(α)` over partitions with `0 < δ(α) < r` and `γ(α) < 1`.
#[allow(non_snake_case)]
pub fn brute_force_min_R_positive(space: &FiniteMetricSpace, r: f64) -> Result<Option<MinRatio>> {
    check_param(r > 0.0, "r", r, "r > 0")?;
    let n = space.len();
    if n > EXACT_MAX_POINTS {
        return Err(Error::ExactModeSizeExceeded {
            n,
            max: EXACT_MAX_POINTS,
        });
    }
    let parts: Vec<Partition> = all_partitions(n).collect();
    let examined = parts.len();
    let ln_r = r.ln();
    Ok(parts
        .into_par_iter()
        .enumerate()
        .map(|(k, p)| {
            let st = partition_stats(space, &p);
            (k, p, st)
        })
        .filter(|(_, _, st)| {
            st.ln_delta > f64::NEG_INFINITY && st.ln_delta < ln_r && st.ln_gamma < 0.0
        })
        .min_by(|a, b| a.2.log_ratio.total_cmp(&b.2.log_ratio).then(a.0.cmp(&b.0)))
        .map(|(_, witness, stats)| MinRatio {
            min_ratio: stats.log_ratio,
            witness,
            stats,
            partitions_examined: examined,
        }))
}

/// Minimum of `R` over the single-linkage levels with `0 < δ < r` and `γ < 1`.
#[allow(non_snake_case)]
pub fn threshold_chain_min_R_positive(
    space: &FiniteMetricSpace,
    r: f64,
) -> Result<Option<MinRatio>> {
    check_param(r > 0.0, "r", r, "r > 0")?;
    let chain = dendrogram_chain(space);
    let ln_r = r.ln();
    Ok(chain
        .stats()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.ln_delta > f64::NEG_INFINITY && s.ln_delta < ln_r && s.ln_gamma < 0.0)
        .min_by(|a, b| a.1.log_ratio.total_cmp(&b.1.log_ratio))
        .map(|(k, st)| MinRatio {
            min_ratio: st.log_ratio,
            witness: chain.levels()[k].clone(),
            stats: *st,
            partitions_examined: chain.len(),
        }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominanceReport {
    pub partitions_examined: usize,
    /// Partitions with `0 < δ < 1` and `0 < γ < 1`.
    pub partitions_tested: usize,
    /// Enumeration indices where the threshold partition at `γ(α)` fails
    /// `γ ≥ γ(α)`, `δ ≤ δ(α)` or `R ≤ R(α)`.
    pub failures: Vec<usize>,
}

impl DominanceReport {
    pub fn passes(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares every partition with the threshold partition (components of
/// `d < γ(α)`) at its gap.
pub fn threshold_dominance(space: &FiniteMetricSpace) -> Result<DominanceReport> {
    let n = space.len();
    if n > EXACT_MAX_POINTS {
        return Err(Error::ExactModeSizeExceeded {
            n,
            max: EXACT_MAX_POINTS,
        });
    }
    let parts: Vec<Partition> = all_partitions(n).collect();
    let tol = space.tolerance();
    let checked: Vec<(usize, bool)> = parts
        .par_iter()
        .enumerate()
        .filter_map(|(k, p)| {
            let st = partition_stats(space, p);
            let tested = st.ln_delta > f64::NEG_INFINITY && st.ln_delta < 0.0 && st.ln_gamma < 0.0;
            tested.then(|| {
                let t = partition_stats(space, &threshold_partition_ln(space, st.ln_gamma));
                let ok = t.ln_gamma >= st.ln_gamma - tol
                    && t.ln_delta <= st.ln_delta + tol
                    && t.log_ratio <= st.log_ratio + tol;
                (k, ok)
            })
        })
        .collect();
    Ok(DominanceReport {
        partitions_examined: parts.len(),
        partitions_tested: checked.len(),
        failures: checked.into_iter().filter(|c| !c.1).map(|c| c.0).collect(),
    })
}
