//! Finite metric spaces and the constructions built directly on them:
//! snowflaking, sup-metric products, ultrametric checks and the Hausdorff
//! hyperspace.
//!
//! Distances are `f64`. Every space answers both `dist(i, j)` and
//! `ln_dist(i, j)`; all order comparisons in the crate go through the
//! logarithm so that closed-form spaces whose scales fall far below the
//! smallest normal `f64` (for instance `2^{-n!}`) remain exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_HYPERSPACE_CAP: usize = 5000;
pub const DEFAULT_PRODUCT_CAP: usize = 4096;

/// Violations beyond this many are counted but not recorded.
const MAX_RECORDED_VIOLATIONS: usize = 100;

#[derive(Debug, Clone)]
enum Store {
    /// Row-major linear distances.
    Dense(Vec<f64>),
    /// Row-major log distances; the diagonal holds `-inf`.
    LogDense(Vec<f64>),
    /// Points on the real line with `|x - y|`.
    Line {
        x: Vec<f64>,
        order: Vec<usize>,
    },
    /// Nonnegative points on the real line given by `ln x` (`-inf` for 0).
    LogLine {
        lx: Vec<f64>,
        order: Vec<usize>,
    },
    /// `d(i, j) = max(c_i, c_j)` for `i != j`, with `c` given by `ln c`.
    MaxUltra {
        lc: Vec<f64>,
        order: Vec<usize>,
    },
    /// Binary words of `width` bits; the distance is `exp(lv[k])` where `k` is
    /// the first position (from the most significant bit) where they differ.
    Prefix {
        codes: Vec<u64>,
        width: u32,
        lv: Vec<f64>,
    },
    Snowflake {
        base: Box<Store>,
        s: f64,
    },
}

impl Store {
    fn ln(&self, n: usize, i: usize, j: usize) -> f64 {
        if i == j {
            return f64::NEG_INFINITY;
        }
        match self {
            Store::Dense(d) => {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                d[a * n + b].ln()
            }
            Store::LogDense(l) => {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                l[a * n + b]
            }
            Store::Line { x, .. } => (x[i] - x[j]).abs().ln(),
            Store::LogLine { lx, .. } => ln_abs_diff(lx[i], lx[j]),
            Store::MaxUltra { lc, .. } => lc[i].max(lc[j]),
            Store::Prefix { codes, width, lv } => {
                let k = (codes[i] ^ codes[j]).leading_zeros() - (64 - width);
                lv[k as usize]
            }
            Store::Snowflake { base, s } => s * base.ln(n, i, j),
        }
    }

    fn lin(&self, n: usize, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match self {
            Store::Dense(d) => {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                d[a * n + b]
            }
            Store::Line { x, .. } => (x[i] - x[j]).abs(),
            Store::Snowflake { base, s } => {
                let b = base.lin(n, i, j);
                if b > 0.0 {
                    b.powf(*s)
                } else {
                    (s * base.ln(n, i, j)).exp()
                }
            }
            _ => self.ln(n, i, j).exp(),
        }
    }

    fn shape(&self) -> Shape<'_> {
        match self {
            Store::Line { order, .. } | Store::LogLine { order, .. } => Shape::Line(order),
            Store::MaxUltra { order, .. } => Shape::MaxUltra(order),
            Store::Prefix { .. } => Shape::Ultrametric,
            Store::Snowflake { base, .. } => base.shape(),
            Store::Dense(_) | Store::LogDense(_) => Shape::General,
        }
    }

    fn subset(&self, n: usize, idx: &[usize]) -> Store {
        let m = idx.len();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        match self {
            Store::Dense(d) => {
                let mut out = vec![0.0; m * m];
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        out[a * m + b] = d[i * n + j];
                    }
                }
                Store::Dense(out)
            }
            Store::LogDense(l) => {
                let mut out = vec![f64::NEG_INFINITY; m * m];
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        out[a * m + b] = l[i * n + j];
                    }
                }
                Store::LogDense(out)
            }
            Store::Line { x, .. } => {
                let x = pick(x);
                let order = sorted_order(&x);
                Store::Line { x, order }
            }
            Store::LogLine { lx, .. } => {
                let lx = pick(lx);
                let order = sorted_order(&lx);
                Store::LogLine { lx, order }
            }
            Store::MaxUltra { lc, .. } => {
                let lc = pick(lc);
                let order = sorted_order(&lc);
                Store::MaxUltra { lc, order }
            }
            Store::Prefix { codes, width, lv } => Store::Prefix {
                codes: idx.iter().map(|&i| codes[i]).collect(),
                width: *width,
                lv: lv.clone(),
            },
            Store::Snowflake { base, s } => Store::Snowflake {
                base: Box::new(base.subset(n, idx)),
                s: *s,
            },
        }
    }

    fn is_dense(&self) -> bool {
        matches!(self, Store::Dense(_))
    }
}

/// `ln |e^a - e^b|` without leaving log space.
fn ln_abs_diff(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (-(lo - hi).exp()).ln_1p()
}

fn sorted_order(key: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..key.len()).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    order
}

/// Structural hints used by fast paths elsewhere in the crate.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Shape<'a> {
    General,
    /// Distances are `|x - y|` up to a monotone transform; `order` sorts by `x`.
    Line(&'a [usize]),
    /// Distances are `max(c_i, c_j)` up to a monotone transform.
    MaxUltra(&'a [usize]),
    /// Known ultrametric without further structure.
    Ultrametric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub tolerance: f64,
    /// Divide all distances by the diameter instead of rejecting spaces whose
    /// diameter exceeds 1.
    pub rescale: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            rescale: false,
        }
    }
}

/// A finite metric space of diameter at most 1.
#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    store: Store,
    diameter: f64,
    ln_diameter: f64,
    tolerance: f64,
    rescaled: bool,
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl FiniteMetricSpace {
    /// Validates a full distance matrix.
    ///
    /// Every violated axiom is collected; the error carries the list.
    pub fn validate(
        matrix: &[Vec<f64>],
        labels: Vec<String>,
        opts: &ValidateOptions,
    ) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        for (row, r) in matrix.iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare {
                    row,
                    len: r.len(),
                    expected: n,
                });
            }
        }
        if labels.len() != n {
            return Err(Error::LabelMismatch {
                labels: labels.len(),
                n,
            });
        }
        let tol = opts.tolerance;
        let mut violations = Vec::new();
        let push = |violations: &mut Vec<Violation>, v: Violation| {
            if violations.len() < MAX_RECORDED_VIOLATIONS {
                violations.push(v);
            }
        };
        for i in 0..n {
            for j in 0..n {
                let v = matrix[i][j];
                if !v.is_finite() {
                    push(&mut violations, Violation::NonFinite { i, j });
                } else if v < 0.0 {
                    push(&mut violations, Violation::Negative { i, j, value: v });
                }
            }
            if matrix[i][i] != 0.0 && matrix[i][i].is_finite() {
                push(
                    &mut violations,
                    Violation::NonzeroDiagonal {
                        i,
                        value: matrix[i][i],
                    },
                );
            }
            for j in i + 1..n {
                let diff = (matrix[i][j] - matrix[j][i]).abs();
                if diff > tol {
                    push(&mut violations, Violation::Asymmetric { i, j, diff });
                }
                if matrix[i][j] == 0.0 || matrix[j][i] == 0.0 {
                    push(&mut violations, Violation::ZeroDistance { i, j });
                }
            }
        }
        let structural_ok = violations.is_empty();
        if structural_ok {
            for i in 0..n {
                for j in i + 1..n {
                    let dij = matrix[i][j];
                    for k in 0..n {
                        if k == i || k == j {
                            continue;
                        }
                        let excess = dij - (upper(matrix, i, k) + upper(matrix, k, j));
                        if excess > tol {
                            push(&mut violations, Violation::Triangle { i, j, k, excess });
                        }
                    }
                }
            }
        }
        if !violations.is_empty() {
            return Err(Error::MetricViolation(violations));
        }

        let mut dense = vec![0.0; n * n];
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = upper(matrix, i, j);
                dense[i * n + j] = v;
                diameter = diameter.max(v);
            }
        }
        let mut rescaled = false;
        if diameter > 1.0 {
            if !opts.rescale {
                return Err(Error::DiameterExceedsOne(diameter));
            }
            for v in &mut dense {
                *v /= diameter;
            }
            diameter = 1.0;
            rescaled = true;
        }
        Ok(Self {
            labels,
            store: Store::Dense(dense),
            diameter,
            ln_diameter: diameter.ln(),
            tolerance: tol,
            rescaled,
        }
        .with_cached_diameter())
    }

    /// Points on the real line with the absolute-value metric.
    pub fn from_line(labels: Vec<String>, x: Vec<f64>) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::MetricViolation(vec![Violation::NonFinite {
                i,
                j: i,
            }]));
        }
        let order = sorted_order(&x);
        Self::closed_form(labels, Store::Line { x, order })
    }

    /// Nonnegative points on the line given through `ln x` (`-inf` encodes 0).
    pub fn from_log_line(labels: Vec<String>, ln_x: Vec<f64>) -> Result<Self> {
        if ln_x.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::MetricViolation(vec![Violation::NonFinite {
                i: 0,
                j: 0,
            }]));
        }
        let order = sorted_order(&ln_x);
        Self::closed_form(labels, Store::LogLine { lx: ln_x, order })
    }

    /// The ultrametric `d(i, j) = max(c_i, c_j)` on distinct nonnegative
    /// values `c`, given through `ln c`.
    pub fn max_ultrametric(labels: Vec<String>, ln_c: Vec<f64>) -> Result<Self> {
        if ln_c.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::MetricViolation(vec![Violation::NonFinite {
                i: 0,
                j: 0,
            }]));
        }
        let order = sorted_order(&ln_c);
        Self::closed_form(labels, Store::MaxUltra { lc: ln_c, order })
    }

    /// Ultrametric on binary words: words first differing at bit position `k`
    /// (counted from the most significant of `width` bits) are at distance
    /// `exp(ln_values[k])`. `ln_values` must be nonincreasing.
    pub fn prefix_ultrametric(
        labels: Vec<String>,
        codes: Vec<u64>,
        width: u32,
        ln_values: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || width > 63 || ln_values.len() != width as usize {
            return Err(Error::InvalidParameter {
                name: "width",
                value: width as f64,
                expected: "1..=63 with one value per bit",
            });
        }
        if ln_values.windows(2).any(|w| w[1] > w[0]) || ln_values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter {
                name: "ln_values",
                value: f64::NAN,
                expected: "nonincreasing level values",
            });
        }
        if codes.iter().any(|&c| c >> width != 0) {
            return Err(Error::InvalidParameter {
                name: "codes",
                value: width as f64,
                expected: "codes fitting in `width` bits",
            });
        }
        Self::closed_form(
            labels,
            Store::Prefix {
                codes,
                width,
                lv: ln_values,
            },
        )
    }

    /// Spaces whose metric axioms hold by construction: only distinctness and
    /// the diameter bound are checked.
    fn closed_form(labels: Vec<String>, store: Store) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let len = match &store {
            Store::Line { x, .. } => x.len(),
            Store::LogLine { lx, .. } => lx.len(),
            Store::MaxUltra { lc, .. } => lc.len(),
            Store::Prefix { codes, .. } => codes.len(),
            _ => n,
        };
        if len != n {
            return Err(Error::LabelMismatch { labels: n, n: len });
        }
        if let Some((i, j)) = duplicate(&store) {
            return Err(Error::MetricViolation(vec![Violation::ZeroDistance {
                i,
                j,
            }]));
        }
        let space = Self {
            labels,
            store,
            diameter: 0.0,
            ln_diameter: f64::NEG_INFINITY,
            tolerance: DEFAULT_TOLERANCE,
            rescaled: false,
        }
        .with_cached_diameter();
        if space.ln_diameter > 0.0 {
            return Err(Error::DiameterExceedsOne(space.diameter));
        }
        Ok(space)
    }

    /// Builds a space from log distances the caller guarantees to be a metric.
    pub(crate) fn from_ln_matrix_unchecked(labels: Vec<String>, ln: Vec<f64>) -> Self {
        Self {
            labels,
            store: Store::LogDense(ln),
            diameter: 0.0,
            ln_diameter: f64::NEG_INFINITY,
            tolerance: DEFAULT_TOLERANCE,
            rescaled: false,
        }
        .with_cached_diameter()
    }

    pub(crate) fn from_dense_unchecked(labels: Vec<String>, d: Vec<f64>) -> Self {
        Self {
            labels,
            store: Store::Dense(d),
            diameter: 0.0,
            ln_diameter: f64::NEG_INFINITY,
            tolerance: DEFAULT_TOLERANCE,
            rescaled: false,
        }
        .with_cached_diameter()
    }

    fn with_cached_diameter(mut self) -> Self {
        let n = self.len();
        let pair = match self.store.shape() {
            _ if n < 2 => None,
            Shape::Line(order) => Some((order[0], order[n - 1])),
            Shape::MaxUltra(order) => Some((order[0], order[n - 1])),
            _ => {
                if let Store::Prefix { codes, .. } = &self.store {
                    let spread = codes.iter().fold(0u64, |acc, &c| acc | (c ^ codes[0]));
                    let top = 63 - spread.leading_zeros() as usize;
                    let other = codes.iter().position(|&c| (c ^ codes[0]) >> top & 1 == 1);
                    other.map(|j| (0, j))
                } else {
                    let mut best = (0, 1);
                    let mut best_ln = f64::NEG_INFINITY;
                    for i in 0..n {
                        for j in i + 1..n {
                            let v = self.ln_dist(i, j);
                            if v > best_ln {
                                best_ln = v;
                                best = (i, j);
                            }
                        }
                    }
                    Some(best)
                }
            }
        };
        match pair {
            Some((i, j)) => {
                self.diameter = self.dist(i, j);
                self.ln_diameter = self.ln_dist(i, j);
            }
            None => {
                self.diameter = 0.0;
                self.ln_diameter = f64::NEG_INFINITY;
            }
        }
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// True when the input was divided by its diameter during validation.
    pub fn is_rescaled(&self) -> bool {
        self.rescaled
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn ln_diameter(&self) -> f64 {
        self.ln_diameter
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.store.lin(self.len(), i, j)
    }

    #[inline]
    pub fn ln_dist(&self, i: usize, j: usize) -> f64 {
        self.store.ln(self.len(), i, j)
    }

    pub(crate) fn shape(&self) -> Shape<'_> {
        self.store.shape()
    }

    /// The full linear distance matrix.
    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.dist(i, j)).collect())
            .collect()
    }

    /// The subspace on `indices`, in the given order.
    pub fn subspace(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty);
        }
        let mut seen = vec![false; self.len()];
        for &i in indices {
            if i >= self.len() || seen[i] {
                return Err(Error::InvalidPartition(format!(
                    "subspace index {i} out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        Ok(Self {
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            store: self.store.subset(self.len(), indices),
            diameter: 0.0,
            ln_diameter: f64::NEG_INFINITY,
            tolerance: self.tolerance,
            rescaled: self.rescaled,
        }
        .with_cached_diameter())
    }

    /// Replaces every distance `d` by `d^s`.
    pub fn snowflake(&self, s: f64) -> Result<Self> {
        crate::error::check_param(s > 0.0 && s <= 1.0, "s", s, "0 < s <= 1")?;
        let store = match &self.store {
            Store::Dense(d) => Store::Dense(d.iter().map(|v| v.powf(s)).collect()),
            Store::LogDense(l) => Store::LogDense(l.iter().map(|v| v * s).collect()),
            Store::Snowflake { base, s: s0 } => Store::Snowflake {
                base: base.clone(),
                s: s0 * s,
            },
            other => Store::Snowflake {
                base: Box::new(other.clone()),
                s,
            },
        };
        Ok(Self {
            labels: self.labels.clone(),
            store,
            diameter: 0.0,
            ln_diameter: f64::NEG_INFINITY,
            tolerance: self.tolerance,
            rescaled: self.rescaled,
        }
        .with_cached_diameter())
    }

    /// Checks the strong triangle inequality on every triple.
    ///
    /// The comparison is relative: a triple violates it when
    /// `ln d(i,j) - max(ln d(i,k), ln d(j,k))` exceeds the tolerance.
    pub fn is_ultrametric(&self) -> UltrametricCheck {
        let n = self.len();
        let tol = self.tolerance;
        let mut worst: Option<(usize, usize, usize)> = None;
        let mut worst_excess = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dij = self.ln_dist(i, j);
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let excess = dij - self.ln_dist(i, k).max(self.ln_dist(j, k));
                    if excess > tol && excess > worst_excess {
                        worst_excess = excess;
                        worst = Some((i, j, k));
                    }
                }
            }
        }
        UltrametricCheck {
            holds: worst.is_none(),
            worst,
            relative_excess: worst_excess,
        }
    }

    /// Cartesian product with the sup metric. Points are ordered
    /// lexicographically with the first factor most significant.
    pub fn sup_product(spaces: &[FiniteMetricSpace], cap: usize) -> Result<Self> {
        if spaces.is_empty() {
            return Err(Error::Empty);
        }
        let mut total: usize = 1;
        for s in spaces {
            total = total.saturating_mul(s.len());
        }
        if total > cap {
            return Err(Error::CapExceeded {
                what: "product cardinality",
                requested: total,
                cap,
            });
        }
        let coords: Vec<Vec<usize>> = (0..total)
            .map(|mut idx| {
                let mut c = vec![0; spaces.len()];
                for (f, s) in spaces.iter().enumerate().rev() {
                    c[f] = idx % s.len();
                    idx /= s.len();
                }
                c
            })
            .collect();
        let labels = coords
            .iter()
            .map(|c| {
                let parts: Vec<&str> = c
                    .iter()
                    .zip(spaces)
                    .map(|(&i, s)| s.labels[i].as_str())
                    .collect();
                format!("({})", parts.join(","))
            })
            .collect();
        let all_dense = spaces.iter().all(|s| s.store.is_dense());
        let mut out = vec![if all_dense { 0.0 } else { f64::NEG_INFINITY }; total * total];
        for a in 0..total {
            for b in a + 1..total {
                let v = if all_dense {
                    spaces
                        .iter()
                        .enumerate()
                        .map(|(f, s)| s.dist(coords[a][f], coords[b][f]))
                        .fold(0.0, f64::max)
                } else {
                    spaces
                        .iter()
                        .enumerate()
                        .map(|(f, s)| s.ln_dist(coords[a][f], coords[b][f]))
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                out[a * total + b] = v;
                out[b * total + a] = v;
            }
        }
        Ok(if all_dense {
            Self::from_dense_unchecked(labels, out)
        } else {
            Self::from_ln_matrix_unchecked(labels, out)
        })
    }

    /// All nonempty subsets of size at most `max_subset_size`, ordered by size
    /// and then lexicographically, with the Hausdorff metric.
    pub fn hausdorff_hyperspace(&self, max_subset_size: usize, cap: usize) -> Result<Hyperspace> {
        let n = self.len();
        let k = max_subset_size.min(n);
        let mut count: usize = 0;
        let mut binom: usize = 1;
        for size in 1..=k {
            // C(n, size) from C(n, size - 1)
            binom = binom
                .checked_mul(n - size + 1)
                .map(|v| v / size)
                .unwrap_or(usize::MAX);
            count = count.saturating_add(binom);
            if count > cap {
                return Err(Error::CapExceeded {
                    what: "hyperspace subsets",
                    requested: count,
                    cap,
                });
            }
        }
        let mut points = Vec::with_capacity(count);
        for size in 1..=k {
            let mut comb: Vec<usize> = (0..size).collect();
            loop {
                points.push(HyperspacePoint {
                    members: comb.clone(),
                });
                let mut i = size;
                while i > 0 && comb[i - 1] == n - size + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                comb[i - 1] += 1;
                for t in i..size {
                    comb[t] = comb[t - 1] + 1;
                }
            }
        }
        let m = points.len();
        let dense = self.store.is_dense();
        let key = |i: usize, j: usize| {
            if dense {
                self.dist(i, j)
            } else {
                self.ln_dist(i, j)
            }
        };
        let directed = |a: &[usize], b: &[usize]| {
            a.iter()
                .map(|&x| b.iter().map(|&y| key(x, y)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut out = vec![if dense { 0.0 } else { f64::NEG_INFINITY }; m * m];
        for a in 0..m {
            for b in a + 1..m {
                let v = directed(&points[a].members, &points[b].members)
                    .max(directed(&points[b].members, &points[a].members));
                out[a * m + b] = v;
                out[b * m + a] = v;
            }
        }
        let labels = points
            .iter()
            .map(|p| {
                let parts: Vec<&str> = p.members.iter().map(|&i| self.labels[i].as_str()).collect();
                format!("{{{}}}", parts.join(","))
            })
            .collect();
        let space = if dense {
            Self::from_dense_unchecked(labels, out)
        } else {
            Self::from_ln_matrix_unchecked(labels, out)
        }
        .with_tolerance(self.tolerance);
        Ok(Hyperspace { space, points })
    }
}

fn upper(m: &[Vec<f64>], i: usize, j: usize) -> f64 {
    if i <= j {
        m[i][j]
    } else {
        m[j][i]
    }
}

fn duplicate(store: &Store) -> Option<(usize, usize)> {
    let key_dup = |key: &[f64], order: &[usize]| {
        order
            .windows(2)
            .find(|w| key[w[0]] == key[w[1]])
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    };
    match store {
        Store::Line { x, order } => key_dup(x, order),
        Store::LogLine { lx, order } => key_dup(lx, order),
        Store::MaxUltra { lc, order } => key_dup(lc, order),
        Store::Prefix { codes, .. } => {
            let mut sorted: Vec<(u64, usize)> = codes.iter().copied().zip(0..).collect();
            sorted.sort_unstable();
            sorted
                .windows(2)
                .find(|w| w[0].0 == w[1].0)
                .map(|w| (w[0].1.min(w[1].1), w[0].1.max(w[1].1)))
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UltrametricCheck {
    pub holds: bool,
    /// `(i, j, k)` with `d(i, j) > max(d(i, k), d(j, k))` by the largest margin.
    pub worst: Option<(usize, usize, usize)>,
    pub relative_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperspacePoint {
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Hyperspace {
    pub space: FiniteMetricSpace,
    pub points: Vec<HyperspacePoint>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(m: Vec<Vec<f64>>) -> Result<FiniteMetricSpace> {
        let n = m.len();
        FiniteMetricSpace::validate(&m, default_labels(n), &ValidateOptions::default())
    }

    #[test]
    fn two_point_space() {
        let s = space(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.diameter(), 1.0);
        assert!(s.is_ultrametric().holds);
    }

    #[test]
    fn duplicate_point_rejected() {
        let err = space(vec![
            vec![0.0, 0.5, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![0.0, 0.5, 0.0],
        ])
        .unwrap_err();
        match err {
            Error::MetricViolation(v) => {
                assert!(v.contains(&Violation::ZeroDistance { i: 0, j: 2 }))
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn triangle_violation_witness() {
        let err = space(vec![
            vec![0.0, 1.0, 0.4],
            vec![1.0, 0.0, 0.5],
            vec![0.4, 0.5, 0.0],
        ])
        .unwrap_err();
        match err {
            Error::MetricViolation(v) => {
                assert_eq!(v.len(), 1);
                match v[0] {
                    Violation::Triangle { i, j, k, excess } => {
                        assert_eq!((i, j, k), (0, 1, 2));
                        assert!((excess - 0.1).abs() < 1e-15);
                    }
                    ref other => panic!("unexpected {other}"),
                }
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn asymmetry_and_diagonal_reported() {
        let err = space(vec![vec![0.1, 0.5], vec![0.4, 0.0]]).unwrap_err();
        match err {
            Error::MetricViolation(v) => {
                assert!(v
                    .iter()
                    .any(|x| matches!(x, Violation::NonzeroDiagonal { i: 0, .. })));
                assert!(v
                    .iter()
                    .any(|x| matches!(x, Violation::Asymmetric { i: 0, j: 1, .. })));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn diameter_above_one_needs_rescale() {
        let m = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
        assert!(matches!(space(m.clone()), Err(Error::DiameterExceedsOne(d)) if d == 2.0));
        let s = FiniteMetricSpace::validate(
            &m,
            default_labels(2),
            &ValidateOptions {
                rescale: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.is_rescaled());
        assert_eq!(s.dist(0, 1), 1.0);
    }

    #[test]
    fn snowflake_values() {
        let s = space(vec![vec![0.0, 0.25], vec![0.25, 0.0]]).unwrap();
        assert_eq!(s.snowflake(1.0).unwrap().dist(0, 1), 0.25);
        assert_eq!(s.snowflake(0.5).unwrap().dist(0, 1), 0.5);
        assert!(s.snowflake(0.0).is_err());
        assert!(s.snowflake(1.5).is_err());
    }

    #[test]
    fn snowflake_of_closed_form_space() {
        let s = FiniteMetricSpace::from_line(default_labels(3), vec![0.0, 0.25, 0.5]).unwrap();
        let f = s.snowflake(0.5).unwrap();
        assert!((f.dist(0, 1) - 0.5).abs() < 1e-15);
        assert!((f.diameter() - 0.5f64.sqrt()).abs() < 1e-15);
        let ff = f.snowflake(0.5).unwrap();
        assert!((ff.ln_dist(0, 2) - 0.25 * 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn line_is_not_ultrametric() {
        let s = FiniteMetricSpace::from_line(default_labels(3), vec![0.0, 0.4, 1.0]).unwrap();
        let check = s.is_ultrametric();
        assert!(!check.holds);
        // d(0, 2) = 1 > max(0.4, 0.6)
        assert_eq!(check.worst, Some((0, 2, 1)));
    }

    #[test]
    fn log_line_matches_line() {
        let x = vec![0.5, 0.25, 0.125, 0.0];
        let a = FiniteMetricSpace::from_line(default_labels(4), x.clone()).unwrap();
        let b =
            FiniteMetricSpace::from_log_line(default_labels(4), x.iter().map(|v| v.ln()).collect())
                .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((a.dist(i, j) - b.dist(i, j)).abs() < 1e-15);
            }
        }
        assert_eq!(b.diameter(), 0.5);
    }

    #[test]
    fn product_with_point_is_isometric() {
        let x = space(vec![
            vec![0.0, 0.3, 0.7],
            vec![0.3, 0.0, 0.5],
            vec![0.7, 0.5, 0.0],
        ])
        .unwrap();
        let p = space(vec![vec![0.0]]).unwrap();
        let prod = FiniteMetricSpace::sup_product(&[p, x.clone()], DEFAULT_PRODUCT_CAP).unwrap();
        assert_eq!(prod.to_matrix(), x.to_matrix());
        assert_eq!(prod.labels()[1], "(0,1)");
    }

    #[test]
    fn product_cap() {
        let x = space(vec![vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let err = FiniteMetricSpace::sup_product(&[x.clone(), x.clone(), x], 7).unwrap_err();
        assert!(matches!(
            err,
            Error::CapExceeded {
                requested: 8,
                cap: 7,
                ..
            }
        ));
    }

    #[test]
    fn hyperspace_of_two_points() {
        let s = space(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let h = s.hausdorff_hyperspace(2, DEFAULT_HYPERSPACE_CAP).unwrap();
        assert_eq!(h.points.len(), 3);
        assert_eq!(h.points[2].members, vec![0, 1]);
        assert_eq!(h.space.dist(0, 2), 1.0);
        assert_eq!(h.space.dist(1, 2), 1.0);
        assert_eq!(h.space.dist(0, 1), 1.0);
    }

    #[test]
    fn hyperspace_singletons_copy_base() {
        let s = FiniteMetricSpace::from_line(default_labels(4), vec![0.0, 0.1, 0.35, 0.9]).unwrap();
        let h = s.hausdorff_hyperspace(1, DEFAULT_HYPERSPACE_CAP).unwrap();
        for i in 0..4 {
            for j in (0..4).filter(|&j| j != i) {
                assert!((h.space.ln_dist(i, j) - s.ln_dist(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hyperspace_cap() {
        let s = FiniteMetricSpace::from_line(
            default_labels(20),
            (0..20).map(|i| i as f64 / 20.0).collect(),
        )
        .unwrap();
        assert!(matches!(
            s.hausdorff_hyperspace(20, DEFAULT_HYPERSPACE_CAP),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn prefix_ultrametric_distances() {
        let lv = vec![0.5f64.ln(), 0.25f64.ln()];
        let s = FiniteMetricSpace::prefix_ultrametric(default_labels(4), vec![0, 1, 2, 3], 2, lv)
            .unwrap();
        assert!((s.dist(0, 1) - 0.25).abs() < 1e-15);
        assert!((s.dist(0, 2) - 0.5).abs() < 1e-15);
        assert!((s.diameter() - 0.5).abs() < 1e-15);
        assert!(s.is_ultrametric().holds);
    }

    #[test]
    fn subspace_keeps_distances() {
        let s = FiniteMetricSpace::from_line(default_labels(4), vec![0.0, 0.1, 0.35, 0.9]).unwrap();
        let sub = s.subspace(&[3, 1]).unwrap();
        assert!((sub.dist(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(sub.labels(), &["3".to_string(), "1".to_string()]);
        assert!(s.subspace(&[1, 1]).is_err());
    }
}
