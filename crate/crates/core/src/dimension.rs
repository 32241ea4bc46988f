//! Metric (Assouad) dimension estimates from separated-set counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::metric::{FiniteMetricSpace, Shape};

/// Balls up to this size are solved exactly.
pub const EXACT_BALL_MAX: usize = 20;

/// Indices of the closed ball `d(center, x) ≤ r1`, given `ln r1`.
fn closed_ball(space: &FiniteMetricSpace, center: usize, ln_r1: f64) -> Vec<usize> {
    (0..space.len())
        .filter(|&j| space.ln_dist(center, j) <= ln_r1)
        .collect()
}

/// Greedy count on a line: walks the sorted ball, jumping by binary search to
/// the first point farther than `r2` from the last pick. Optimal on a line.
fn line_count(
    space: &FiniteMetricSpace,
    order: &[usize],
    pos: usize,
    ln_r1: f64,
    ln_r2: f64,
) -> usize {
    let c = order[pos];
    let lo = order[..pos].partition_point(|&i| space.ln_dist(c, i) > ln_r1);
    let hi = pos + order[pos..].partition_point(|&i| space.ln_dist(c, i) <= ln_r1);
    let mut q = lo;
    let mut count = 1;
    loop {
        let last = order[q];
        let next = q + 1 + order[q + 1..hi].partition_point(|&i| space.ln_dist(last, i) <= ln_r2);
        if next >= hi {
            return count;
        }
        count += 1;
        q = next;
    }
}

fn line_rank(order: &[usize]) -> Vec<usize> {
    let mut rank = vec![0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        rank[i] = k;
    }
    rank
}

/// Size of a maximal `r2`-separated subset (pairwise `d > r2`) of the closed
/// `r1`-ball around `center`, radii given by their logarithms.
///
/// On a line the sorted greedy pass is exact. Otherwise balls with at most
/// [`EXACT_BALL_MAX`] points are solved exactly and larger ones greedily in
/// index order.
pub fn separated_count_ln(
    space: &FiniteMetricSpace,
    center: usize,
    ln_r1: f64,
    ln_r2: f64,
) -> usize {
    if let Shape::Line(order) = space.shape() {
        let rank = line_rank(order);
        return line_count(space, order, rank[center], ln_r1, ln_r2);
    }
    general_count(space, center, ln_r1, ln_r2)
}

fn general_count(space: &FiniteMetricSpace, center: usize, ln_r1: f64, ln_r2: f64) -> usize {
    let ball = closed_ball(space, center, ln_r1);
    if ball.len() <= EXACT_BALL_MAX {
        return exact_max_separated(space, &ball, ln_r2);
    }
    let mut chosen: Vec<usize> = Vec::new();
    for &i in &ball {
        if chosen.iter().all(|&c| space.ln_dist(c, i) > ln_r2) {
            chosen.push(i);
        }
    }
    chosen.len()
}

pub fn separated_count(
    space: &FiniteMetricSpace,
    center: usize,
    r1: f64,
    r2: f64,
) -> Result<usize> {
    check_param(r2 > 0.0 && r2 < r1, "r2", r2, "0 < r2 < r1")?;
    Ok(separated_count_ln(space, center, r1.ln(), r2.ln()))
}

/// Maximum independent set of the conflict graph `d ≤ r2` by branch and bound.
fn exact_max_separated(space: &FiniteMetricSpace, ball: &[usize], ln_r2: f64) -> usize {
    let k = ball.len();
    let mut conflict = vec![0u32; k];
    for a in 0..k {
        for b in a + 1..k {
            if space.ln_dist(ball[a], ball[b]) <= ln_r2 {
                conflict[a] |= 1 << b;
                conflict[b] |= 1 << a;
            }
        }
    }
    fn search(candidates: u32, size: usize, best: &mut usize, conflict: &[u32]) {
        if candidates == 0 {
            *best = (*best).max(size);
            return;
        }
        if size + candidates.count_ones() as usize <= *best {
            return;
        }
        let v = candidates.trailing_zeros() as usize;
        let rest = candidates & !(1 << v);
        search(rest & !conflict[v], size + 1, best, conflict);
        search(rest, size, best, conflict);
    }
    let mut best = 0;
    let all = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    search(all, 0, &mut best, &conflict);
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// Upper bound on `r1`.
    pub r: f64,
    /// Lower bound (strict) on `r1 / r2`.
    pub t: f64,
}

impl Window {
    pub fn contains(&self, r1: f64, r2: f64) -> bool {
        0.0 < r2 && r2 < r1 && r1 < self.r && r1 / r2 > self.t
    }

    pub fn contains_ln(&self, ln_r1: f64, ln_r2: f64) -> bool {
        ln_r2 > f64::NEG_INFINITY
            && ln_r2 < ln_r1
            && ln_r1 < self.r.ln()
            && ln_r1 - ln_r2 > self.t.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centers {
    All,
    /// `k` centers spread evenly over the point indices.
    Sample(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionSample {
    pub r1: f64,
    pub r2: f64,
    #[serde(rename = "J")]
    pub count: usize,
    pub value: f64,
    pub center: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub window: Window,
    pub samples: Vec<DimensionSample>,
    pub estimate: f64,
    pub centers_used: usize,
}

/// Pairs `(2^-i, 2^-j)` for `i_min ≤ i < j ≤ j_max`.
pub fn dyadic_grid(i_min: u32, j_max: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in i_min..j_max {
        for j in i + 1..=j_max {
            out.push((0.5f64.powi(i as i32), 0.5f64.powi(j as i32)));
        }
    }
    out
}

fn center_indices(n: usize, centers: Centers) -> Vec<usize> {
    match centers {
        Centers::All => (0..n).collect(),
        Centers::Sample(k) if k >= n => (0..n).collect(),
        Centers::Sample(k) => {
            let mut v: Vec<usize> = (0..k).map(|c| c * n / k.max(1)).collect();
            v.dedup();
            v
        }
    }
}

/// `sup ln J(r1, r2) / ln(r1 / r2)` over the grid pairs in the window and
/// over the chosen centers.
pub fn estimate_metric_dimension(
    space: &FiniteMetricSpace,
    window: Window,
    grid: &[(f64, f64)],
    centers: Centers,
) -> Result<DimensionEstimate> {
    let pairs: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&(r1, r2)| window.contains(r1, r2))
        .map(|&(r1, r2)| (r1.ln(), r2.ln()))
        .collect();
    estimate_on_pairs(space, window, pairs, centers)
}

/// As [`estimate_metric_dimension`] with the grid given as `(ln r1, ln r2)`.
pub fn estimate_metric_dimension_ln(
    space: &FiniteMetricSpace,
    window: Window,
    ln_grid: &[(f64, f64)],
    centers: Centers,
) -> Result<DimensionEstimate> {
    let pairs: Vec<(f64, f64)> = ln_grid
        .iter()
        .copied()
        .filter(|&(l1, l2)| window.contains_ln(l1, l2))
        .collect();
    estimate_on_pairs(space, window, pairs, centers)
}

fn estimate_on_pairs(
    space: &FiniteMetricSpace,
    window: Window,
    pairs: Vec<(f64, f64)>,
    centers: Centers,
) -> Result<DimensionEstimate> {
    if pairs.is_empty() {
        return Err(Error::EmptyWindow {
            r: window.r,
            t: window.t,
        });
    }
    let cs = center_indices(space.len(), centers);
    let line = match space.shape() {
        Shape::Line(order) => Some((order, line_rank(order))),
        _ => None,
    };
    let count = |c: usize, l1: f64, l2: f64| match &line {
        Some((order, rank)) => line_count(space, order, rank[c], l1, l2),
        None => general_count(space, c, l1, l2),
    };
    let samples: Vec<DimensionSample> = pairs
        .par_iter()
        .map(|&(l1, l2)| {
            let (count, center) = cs
                .iter()
                .map(|&c| (count(c, l1, l2), c))
                .fold((0, 0), |best, cur| if cur.0 > best.0 { cur } else { best });
            DimensionSample {
                r1: l1.exp(),
                r2: l2.exp(),
                count,
                value: (count as f64).ln() / (l1 - l2),
                center,
            }
        })
        .collect();
    let estimate = samples.iter().map(|s| s.value).fold(0.0, f64::max);
    Ok(DimensionEstimate {
        window,
        samples,
        estimate,
        centers_used: cs.len(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowComparison {
    pub outer: DimensionEstimate,
    pub inner: DimensionEstimate,
    /// `inner.estimate ≥ outer.estimate`.
    pub nondecreasing: bool,
}

/// Estimates on two windows, the second nested in the first.
pub fn compare_windows(
    space: &FiniteMetricSpace,
    outer: (Window, &[(f64, f64)]),
    inner: (Window, &[(f64, f64)]),
    centers: Centers,
) -> Result<WindowComparison> {
    let o = estimate_metric_dimension(space, outer.0, outer.1, centers)?;
    let i = estimate_metric_dimension(space, inner.0, inner.1, centers)?;
    Ok(WindowComparison {
        nondecreasing: i.estimate >= o.estimate,
        outer: o,
        inner: i,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::default_labels;

    fn line(x: Vec<f64>) -> FiniteMetricSpace {
        FiniteMetricSpace::from_line(default_labels(x.len()), x).unwrap()
    }

    #[test]
    fn three_points_all_separated() {
        let s = line(vec![0.0, 0.5, 1.0]);
        assert_eq!(separated_count(&s, 0, 1.0, 0.4).unwrap(), 3);
    }

    #[test]
    fn one_point_ball() {
        let s = line(vec![0.0, 0.5]);
        assert_eq!(separated_count(&s, 0, 0.1, 0.05).unwrap(), 1);
    }

    #[test]
    fn geometric_ball_count() {
        let mut x: Vec<f64> = (1..=40).map(|k| 0.5f64.powi(k)).collect();
        x.push(0.0);
        let s = line(x);
        // 0, 2^-7, .., 2^-3: everything at most 2^-8 from 0 conflicts with it.
        assert_eq!(separated_count(&s, 40, 0.125, 0.5f64.powi(8)).unwrap(), 6);
        let ball = closed_ball(&s, 40, 0.125f64.ln());
        assert!(ball.len() > EXACT_BALL_MAX);
        let m = s.to_matrix();
        let dense =
            FiniteMetricSpace::validate(&m, default_labels(m.len()), &Default::default()).unwrap();
        assert_eq!(
            separated_count(&dense, 40, 0.125, 0.5f64.powi(8)).unwrap(),
            6
        );
    }

    #[test]
    fn exact_beats_index_order_greedy() {
        // Index-order greedy picks 0.5 first and then nothing else fits.
        let m = vec![
            vec![0.0, 0.3, 0.3],
            vec![0.3, 0.0, 0.6],
            vec![0.3, 0.6, 0.0],
        ];
        let s = FiniteMetricSpace::validate(&m, default_labels(3), &Default::default()).unwrap();
        assert_eq!(separated_count(&s, 0, 1.0, 0.4).unwrap(), 2);
    }

    #[test]
    fn single_point_dimension_zero() {
        let s = line(vec![0.0]);
        let e = estimate_metric_dimension(
            &s,
            Window { r: 1.0, t: 2.0 },
            &dyadic_grid(1, 8),
            Centers::All,
        )
        .unwrap();
        assert_eq!(e.estimate, 0.0);
    }

    #[test]
    fn empty_window() {
        let s = line(vec![0.0, 0.5]);
        assert!(matches!(
            estimate_metric_dimension(
                &s,
                Window { r: 1e-9, t: 2.0 },
                &dyadic_grid(1, 4),
                Centers::All
            ),
            Err(Error::EmptyWindow { .. })
        ));
    }
}
