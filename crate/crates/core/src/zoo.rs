//! Closed-form example spaces with exact per-level chain statistics.
//!
//! Sequence families live on `X = {0} ∪ {r_n}` with the chain
//! `α_n = {X ∖ {r_{n0}, …, r_{n-1}}, {r_{n0}}, …, {r_{n-1}}}`, so that
//! `δ_n = r_n` and `γ_n = r_{n-1} - r_n`. Everything is evaluated on `ln r_n`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::chain::PartitionChain;
use crate::error::{check_param, Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::partition::{log_ratio, Partition};

/// Sampled partitions hold at most this many point-level entries in total.
pub const MAX_CHAIN_ENTRIES: usize = 50_000_000;
/// Largest number of points in a sampled sequence or `sqrt_ultra` space.
pub const MAX_SEQUENCE_POINTS: usize = 2_000_000;
/// Largest number of coordinates of a sampled product or Cantor space.
pub const MAX_PRODUCT_BITS: usize = 12;
/// Largest level of the factorial families.
pub const MAX_FACTORIAL_DEPTH: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `r_n = 2^{-n!}`
    SeqFactorial,
    /// `r_n = r^{1/s^n}` with `r = 2^{-s²/(1-s)}`, `0 < s < 1`
    SeqPowerTower,
    /// `r_n = 2^{-n}`
    SeqGeometric,
    /// `r_n = n^{1/(1-s)}`, `s > 1`
    SeqPolynomial,
    /// `r_n = 1/ln n`, `n ≥ 3`
    SeqLog,
    /// `∏ r_n (Z/2Z)` with `r_1 = 1/2`, `r_{n+1} = r_n^{1/t}`, `0 < t < 1`
    ProductGeometric,
    /// `(Z/2Z)^N` with `d = r^{k!}` at first difference after `k` agreements
    CantorFactorial,
    /// `{0} ∪ {1/n}` with `d(x, y) = max(√x, √y)`
    SqrtUltra,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 8] = [
        FamilyKind::SeqFactorial,
        FamilyKind::SeqPowerTower,
        FamilyKind::SeqGeometric,
        FamilyKind::SeqPolynomial,
        FamilyKind::SeqLog,
        FamilyKind::ProductGeometric,
        FamilyKind::CantorFactorial,
        FamilyKind::SqrtUltra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::SeqFactorial => "seq_factorial",
            FamilyKind::SeqPowerTower => "seq_power_tower",
            FamilyKind::SeqGeometric => "seq_geometric",
            FamilyKind::SeqPolynomial => "seq_polynomial",
            FamilyKind::SeqLog => "seq_log",
            FamilyKind::ProductGeometric => "product_geometric",
            FamilyKind::CantorFactorial => "cantor_factorial",
            FamilyKind::SqrtUltra => "sqrt_ultra",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_sequence(self) -> bool {
        matches!(
            self,
            FamilyKind::SeqFactorial
                | FamilyKind::SeqPowerTower
                | FamilyKind::SeqGeometric
                | FamilyKind::SeqPolynomial
                | FamilyKind::SeqLog
        )
    }

    /// Name of the real parameter, if the family has one.
    pub fn parameter(self) -> Option<&'static str> {
        match self {
            FamilyKind::SeqPowerTower | FamilyKind::SeqPolynomial => Some("s"),
            FamilyKind::ProductGeometric => Some("t"),
            FamilyKind::CantorFactorial => Some("r"),
            _ => None,
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFamily {
    pub kind: FamilyKind,
    pub param: Option<f64>,
    /// Limit of `R(α_n)`; `+inf` for `seq_log`.
    #[serde(rename = "exact_R", with = "crate::io::inf_f64")]
    pub exact_r: f64,
    /// Index of the coarsest level `{X}`.
    pub first_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelFormula {
    pub n: usize,
    pub ln_r: f64,
    pub delta: f64,
    pub gamma: f64,
    pub ln_delta: f64,
    pub ln_gamma: f64,
    #[serde(rename = "R", with = "crate::io::inf_f64")]
    pub log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelSelection {
    All,
    /// Level numbers to keep; the final singleton level is always kept.
    Indices(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub family: AnalyticFamily,
    pub depth: usize,
    pub space: FiniteMetricSpace,
    pub chain: PartitionChain,
    /// Levels `n` where `r_{n-1} - r_n ≤ r_n + r_{n+1}` fails.
    pub hypothesis_violations: Vec<usize>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `ln(e^a - e^b)` for `a > b`.
fn ln_sub(a: f64, b: f64) -> f64 {
    a + (-(b - a).exp_m1()).ln()
}

/// `ln(e^a + e^b)` for `a ≥ b`.
fn ln_add(a: f64, b: f64) -> f64 {
    a + (b - a).exp().ln_1p()
}

impl AnalyticFamily {
    pub fn new(kind: FamilyKind, param: Option<f64>) -> Result<Self> {
        let need = |name: &'static str| {
            param.ok_or(Error::InvalidParameter {
                name,
                value: f64::NAN,
                expected: "a value for this family",
            })
        };
        let (param, exact_r, first_index) = match kind {
            FamilyKind::SeqFactorial => (None, 0.0, 1),
            FamilyKind::SeqGeometric => (None, 1.0, 1),
            FamilyKind::SeqLog => (None, f64::INFINITY, 3),
            FamilyKind::SqrtUltra => (None, 1.0, 1),
            FamilyKind::SeqPowerTower => {
                let s = need("s")?;
                check_param(s > 0.0 && s < 1.0, "s", s, "0 < s < 1")?;
                (Some(s), s, 1)
            }
            FamilyKind::SeqPolynomial => {
                let s = need("s")?;
                check_param(s > 1.0 && s.is_finite(), "s", s, "1 < s < inf")?;
                (Some(s), s, 1)
            }
            FamilyKind::ProductGeometric => {
                let t = need("t")?;
                check_param(t > 0.0 && t < 1.0, "t", t, "0 < t < 1")?;
                (Some(t), t, 1)
            }
            FamilyKind::CantorFactorial => {
                let r = need("r")?;
                check_param(r > 0.0 && r < 1.0, "r", r, "0 < r < 1")?;
                (Some(r), 0.0, 0)
            }
        };
        Ok(Self {
            kind,
            param,
            exact_r,
            first_index,
        })
    }

    fn p(&self) -> f64 {
        self.param.unwrap_or(f64::NAN)
    }

    /// Deepest level with finite closed forms.
    pub fn max_depth(&self) -> usize {
        match self.kind {
            FamilyKind::SeqFactorial | FamilyKind::CantorFactorial => MAX_FACTORIAL_DEPTH,
            FamilyKind::SeqPowerTower => {
                // |ln r_n| = |ln r| s^{-n} stays below 1e300.
                let s = self.p();
                let ln_r0 = (s * s / (1.0 - s) * LN_2).ln();
                ((300.0 * std::f64::consts::LN_10 - ln_r0) / -s.ln()).floor() as usize
            }
            FamilyKind::ProductGeometric => {
                let t = self.p();
                let ln_r1 = LN_2.ln();
                1 + ((300.0 * std::f64::consts::LN_10 - ln_r1) / -t.ln()).floor() as usize
            }
            _ => usize::MAX,
        }
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        let max = self.max_depth();
        if depth > max {
            return Err(Error::DepthOverflow {
                family: self.kind.name().into(),
                depth,
                max,
            });
        }
        check_param(
            depth >= self.first_index,
            "depth",
            depth as f64,
            "depth at least the first level index",
        )
    }

    /// `ln r_n`: the sequence point for sequence families, the level scale
    /// for product and Cantor families, and `ln(1/n)` for `sqrt_ultra`.
    pub fn ln_r(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.kind {
            FamilyKind::SeqFactorial => -factorial(n) * LN_2,
            FamilyKind::SeqPowerTower => {
                let s = self.p();
                -(s * s / (1.0 - s)) * LN_2 * s.powi(-(n as i32))
            }
            FamilyKind::SeqGeometric => -nf * LN_2,
            FamilyKind::SeqPolynomial => nf.ln() / (1.0 - self.p()),
            FamilyKind::SeqLog => -nf.ln().ln(),
            FamilyKind::ProductGeometric => -LN_2 * self.p().powi(-(n as i32 - 1)),
            FamilyKind::CantorFactorial => factorial(n) * self.p().ln(),
            FamilyKind::SqrtUltra => -nf.ln(),
        }
    }

    /// `r_n` computed directly where the closed form allows.
    fn r_linear(&self, n: usize) -> f64 {
        match self.kind {
            FamilyKind::SeqGeometric => 0.5f64.powi(n as i32),
            FamilyKind::SeqPolynomial => (n as f64).powf(1.0 / (1.0 - self.p())),
            FamilyKind::SeqLog => 1.0 / (n as f64).ln(),
            FamilyKind::SqrtUltra => 1.0 / n as f64,
            _ => self.ln_r(n).exp(),
        }
    }

    /// `(ln δ_n, ln γ_n)` of the family's own chain.
    fn ln_delta_gamma(&self, n: usize) -> (f64, f64) {
        let n0 = self.first_index;
        match self.kind {
            k if k.is_sequence() => {
                let ld = self.ln_r(n);
                let lg = if n == n0 {
                    ld
                } else {
                    ln_sub(self.ln_r(n - 1), ld)
                };
                (ld, lg)
            }
            FamilyKind::ProductGeometric | FamilyKind::CantorFactorial => {
                let ld = self.ln_r(n);
                let lg = if n == n0 { ld } else { self.ln_r(n - 1) };
                (ld, lg)
            }
            _ => {
                let ld = -0.5 * (n as f64).ln();
                let lg = if n == 1 {
                    0.0
                } else {
                    -0.5 * ((n - 1) as f64).ln()
                };
                (ld, lg)
            }
        }
    }

    /// Exact `δ_n`, `γ_n`, `R_n` of level `n`.
    pub fn formula(&self, n: usize) -> Result<LevelFormula> {
        self.check_depth(n)?;
        let (ln_delta, ln_gamma) = self.ln_delta_gamma(n);
        let ratio = match self.kind {
            // ((n-1)! ln r) / (n! ln r), without the rounding of either factorial.
            FamilyKind::CantorFactorial if n > self.first_index => 1.0 / n as f64,
            FamilyKind::ProductGeometric if n > self.first_index => self.p(),
            _ => log_ratio(ln_delta, ln_gamma),
        };
        Ok(LevelFormula {
            n,
            ln_r: self.ln_r(n),
            delta: ln_delta.exp(),
            gamma: ln_gamma.exp(),
            ln_delta,
            ln_gamma,
            log_ratio: ratio,
        })
    }

    /// Formulas for levels `first_index..=depth`.
    pub fn formulas(&self, depth: usize) -> Result<Vec<LevelFormula>> {
        (self.first_index..=depth)
            .map(|n| self.formula(n))
            .collect()
    }

    /// A constant `a` with `a δ_n^p ≤ δ_{n+1}` for every `n`, as stated for
    /// the family; `None` where no positive constant exists.
    pub fn p_witness_constant(&self, p: f64) -> Option<f64> {
        match self.kind {
            FamilyKind::SeqGeometric => Some(2f64.powf(p - 2.0)),
            FamilyKind::SeqPolynomial => Some(2f64.powf(1.0 / (1.0 - self.p()))),
            FamilyKind::SeqLog => Some(3f64.ln() / 4f64.ln()),
            FamilyKind::SeqPowerTower if p > 1.0 / self.p() => Some(1.0),
            FamilyKind::ProductGeometric if p >= 1.0 / self.p() => Some(1.0),
            FamilyKind::SqrtUltra => Some(0.5f64.sqrt()),
            _ => None,
        }
    }

    /// Levels `n` in `first_index+1..depth` breaking `r_{n-1} - r_n ≤ r_n + r_{n+1}`.
    pub fn hypothesis_violations(&self, depth: usize) -> Vec<usize> {
        if !self.kind.is_sequence() {
            return Vec::new();
        }
        (self.first_index + 1..depth)
            .filter(|&n| {
                let (a, b, c) = (self.ln_r(n - 1), self.ln_r(n), self.ln_r(n + 1));
                ln_sub(a, b) > ln_add(b, c) + 1e-12
            })
            .collect()
    }

    pub fn sample(&self, depth: usize) -> Result<Sample> {
        self.sample_levels(depth, &LevelSelection::All)
    }

    /// The space truncated at level `depth` with the selected levels of the
    /// family's chain, followed by the singletons.
    pub fn sample_levels(&self, depth: usize, selection: &LevelSelection) -> Result<Sample> {
        self.check_depth(depth)?;
        let wanted: Vec<usize> = match selection {
            LevelSelection::All => (self.first_index..=depth).collect(),
            LevelSelection::Indices(v) => {
                let mut v: Vec<usize> = v
                    .iter()
                    .copied()
                    .filter(|&n| n >= self.first_index && n <= depth)
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        let (space, level_of) = match self.kind {
            k if k.is_sequence() || k == FamilyKind::SqrtUltra => self.sequence_space(depth)?,
            _ => self.product_space(depth)?,
        };
        let n_points = space.len();
        let entries = (wanted.len() + 1).saturating_mul(n_points);
        if entries > MAX_CHAIN_ENTRIES {
            return Err(Error::CapExceeded {
                what: "chain entries (levels x points)",
                requested: entries,
                cap: MAX_CHAIN_ENTRIES,
            });
        }
        let mut levels: Vec<Partition> = wanted.iter().map(|&n| level_of(n)).collect();
        levels.push(Partition::singletons(n_points));
        let mut indices = wanted.clone();
        indices.push(depth + 1);
        let thresholds = vec![None; levels.len()];
        let chain = PartitionChain::new(&space, levels, thresholds)?.with_indices(indices)?;
        Ok(Sample {
            family: *self,
            depth,
            space,
            chain,
            hypothesis_violations: self.hypothesis_violations(depth),
        })
    }

    /// Points `first_index..=depth` in order, then the limit point 0.
    fn sequence_space(
        &self,
        depth: usize,
    ) -> Result<(FiniteMetricSpace, Box<dyn Fn(usize) -> Partition + '_>)> {
        let n0 = self.first_index;
        let count = depth - n0 + 2;
        if count > MAX_SEQUENCE_POINTS {
            return Err(Error::CapExceeded {
                what: "sequence points",
                requested: count,
                cap: MAX_SEQUENCE_POINTS,
            });
        }
        let mut labels: Vec<String> = (n0..=depth)
            .map(|n| match self.kind {
                FamilyKind::SqrtUltra => format!("1/{n}"),
                _ => format!("r{n}"),
            })
            .collect();
        labels.push("0".into());
        let mut ln_x: Vec<f64> = (n0..=depth).map(|n| self.ln_r(n)).collect();
        ln_x.push(f64::NEG_INFINITY);
        let space = match self.kind {
            FamilyKind::SqrtUltra => {
                let ln_c = ln_x.iter().map(|v| 0.5 * v).collect();
                FiniteMetricSpace::max_ultrametric(labels, ln_c)?
            }
            _ if ln_x[count - 2] >= -700.0 => {
                let mut x: Vec<f64> = (n0..=depth).map(|n| self.r_linear(n)).collect();
                x.push(0.0);
                FiniteMetricSpace::from_line(labels, x)?
            }
            _ => FiniteMetricSpace::from_log_line(labels, ln_x)?,
        };
        // α_n: points r_{n0}..r_{n-1} alone, the rest with 0.
        let level = move |n: usize| {
            let cut = n - n0;
            let labels: Vec<usize> = (0..count).map(|i| if i < cut { i } else { cut }).collect();
            Partition::from_labels(&labels)
        };
        Ok((space, Box::new(level)))
    }

    /// Binary codes of the truncated product; level `n` groups codes by their
    /// first `n - first_index` bits.
    fn product_space(
        &self,
        depth: usize,
    ) -> Result<(FiniteMetricSpace, Box<dyn Fn(usize) -> Partition + '_>)> {
        let n0 = self.first_index;
        let width = depth - n0 + 1;
        if width > MAX_PRODUCT_BITS {
            return Err(Error::DepthOverflow {
                family: self.kind.name().into(),
                depth,
                max: MAX_PRODUCT_BITS + n0 - 1,
            });
        }
        let codes: Vec<u64> = (0..1u64 << width).collect();
        let labels = codes
            .iter()
            .map(|c| format!("{:0w$b}", c, w = width))
            .collect();
        // First difference after k agreements: product r_{k+1}, Cantor r_k.
        let ln_values = (0..width).map(|k| self.ln_r(k + n0)).collect();
        let space =
            FiniteMetricSpace::prefix_ultrametric(labels, codes.clone(), width as u32, ln_values)?;
        let level = move |n: usize| {
            let keep = n - n0;
            let labels: Vec<u64> = codes
                .iter()
                .map(|c| if keep == 0 { 0 } else { c >> (width - keep) })
                .collect();
            Partition::from_labels(&labels)
        };
        Ok((space, Box::new(level)))
    }

    /// The ultrametric `ρ(x, y) = max(x, y)` on the sampled sequence points.
    pub fn comparison_ultrametric(&self, depth: usize) -> Result<FiniteMetricSpace> {
        check_param(
            self.kind.is_sequence(),
            "kind",
            f64::NAN,
            "a sequence family",
        )?;
        self.check_depth(depth)?;
        let sample_labels = self.sequence_space(depth)?.0.labels().to_vec();
        let mut ln_c: Vec<f64> = (self.first_index..=depth).map(|n| self.ln_r(n)).collect();
        ln_c.push(f64::NEG_INFINITY);
        FiniteMetricSpace::max_ultrametric(sample_labels, ln_c)
    }

    /// For `sqrt_ultra`: the same points with `|x - y|` and the same chain.
    pub fn line_companion(&self, depth: usize, selection: &LevelSelection) -> Result<Sample> {
        check_param(
            self.kind == FamilyKind::SqrtUltra,
            "kind",
            f64::NAN,
            "sqrt_ultra",
        )?;
        let s = self.sample_levels(depth, selection)?;
        let mut x: Vec<f64> = (1..=depth).map(|n| 1.0 / n as f64).collect();
        x.push(0.0);
        let line = FiniteMetricSpace::from_line(s.space.labels().to_vec(), x)?;
        let chain = PartitionChain::new(
            &line,
            s.chain.levels().to_vec(),
            s.chain.thresholds().to_vec(),
        )?
        .with_indices(s.chain.indices().to_vec())?;
        Ok(Sample {
            space: line,
            chain,
            ..s
        })
    }
}

/// A sequence family whose log ratio equals `s`, for any `s ∈ [0, ∞]`.
pub fn realize_ratio(s: f64) -> Result<AnalyticFamily> {
    check_param(s >= 0.0, "s", s, "s in [0, inf]")?;
    if s == 0.0 {
        AnalyticFamily::new(FamilyKind::SeqFactorial, None)
    } else if s < 1.0 {
        AnalyticFamily::new(FamilyKind::SeqPowerTower, Some(s))
    } else if s == 1.0 {
        AnalyticFamily::new(FamilyKind::SeqGeometric, None)
    } else if s.is_finite() {
        AnalyticFamily::new(FamilyKind::SeqPolynomial, Some(s))
    } else {
        AnalyticFamily::new(FamilyKind::SeqLog, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(kind: FamilyKind, p: Option<f64>) -> AnalyticFamily {
        AnalyticFamily::new(kind, p).unwrap()
    }

    #[test]
    fn geometric_ratio_one() {
        let f = fam(FamilyKind::SeqGeometric, None);
        for n in 2..=20 {
            assert!((f.formula(n).unwrap().log_ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cantor_ratio() {
        let f = fam(FamilyKind::CantorFactorial, Some(0.5));
        for n in 2..=8 {
            assert_eq!(f.formula(n).unwrap().log_ratio, 1.0 / n as f64);
        }
    }

    #[test]
    fn power_tower_values() {
        let f = fam(FamilyKind::SeqPowerTower, Some(0.5));
        assert!((f.ln_r(5) + 16.0 * LN_2).abs() < 1e-12);
        assert!((f.formula(5).unwrap().log_ratio - 0.50035).abs() < 1e-4);
    }

    #[test]
    fn polynomial_sample_matches_formula() {
        let f = fam(FamilyKind::SeqPolynomial, Some(2.0));
        let s = f.sample(10).unwrap();
        for (k, st) in s.chain.stats().iter().enumerate().take(10) {
            let e = f.formula(k + 1).unwrap();
            assert!((st.delta - e.delta).abs() < 1e-12);
            assert!((st.gamma - e.gamma).abs() < 1e-12);
        }
        assert!((s.chain.stats()[9].gamma - 1.0 / 90.0).abs() < 1e-12);
    }

    #[test]
    fn product_and_sqrt_samples() {
        let p = fam(FamilyKind::ProductGeometric, Some(0.5))
            .sample(6)
            .unwrap();
        assert_eq!(p.space.len(), 64);
        for st in &p.chain.stats()[1..6] {
            assert!((st.log_ratio - 0.5).abs() < 1e-12);
        }
        let q = fam(FamilyKind::SqrtUltra, None).sample(4).unwrap();
        assert!((q.space.dist(1, 2) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(q.space.is_ultrametric().holds);
    }

    #[test]
    fn factorial_depth_cap() {
        let f = fam(FamilyKind::SeqFactorial, None);
        assert!(matches!(f.sample(21), Err(Error::DepthOverflow { .. })));
        assert!(!f.hypothesis_violations(8).is_empty());
    }

    #[test]
    fn realization() {
        assert_eq!(realize_ratio(0.0).unwrap().kind, FamilyKind::SeqFactorial);
        assert_eq!(realize_ratio(0.3).unwrap().exact_r, 0.3);
        assert_eq!(
            realize_ratio(f64::INFINITY).unwrap().kind,
            FamilyKind::SeqLog
        );
    }
}
