//! The ultrametric induced by a nested chain, its bi-Hölder certificate, and
//! empirical Hölder exponents between two metrics on the same points.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{classify_chain, dendrogram_chain, PartitionChain};
use crate::error::{check_param, Error, Result};
use crate::logratio::{profile, DEFAULT_EPSILON};
use crate::metric::FiniteMetricSpace;

pub const DEFAULT_CERTIFICATE_EPSILON: f64 = 0.1;

/// `ρ(x, y) = δ(α_n)` for the deepest level `α_n` whose partition still
/// joins `x` and `y`. `{X}` is prepended when the chain lacks it.
pub fn ultrametric_from_chain(
    space: &FiniteMetricSpace,
    chain: &PartitionChain,
) -> Result<FiniteMetricSpace> {
    let rooted = chain.with_root(space)?;
    let n = space.len();
    let last = &rooted.levels()[rooted.len() - 1];
    if let Some(b) = last.blocks().iter().find(|b| b.len() > 1) {
        return Err(Error::NotSeparating(b[0], b[1]));
    }
    let mut ln_rho = vec![f64::NEG_INFINITY; n * n];
    for (level, st) in rooted.levels().iter().zip(rooted.stats()) {
        for block in level.blocks() {
            for (a, &i) in block.iter().enumerate() {
                for &j in &block[a + 1..] {
                    ln_rho[i * n + j] = st.ln_delta;
                    ln_rho[j * n + i] = st.ln_delta;
                }
            }
        }
    }
    Ok(
        FiniteMetricSpace::from_ln_matrix_unchecked(space.labels().to_vec(), ln_rho)
            .with_tolerance(space.tolerance()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairResidual {
    pub pair: (usize, usize),
    /// Natural log of the ratio.
    pub ln_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UltrametricCertificate {
    #[serde(skip)]
    pub rho: Option<FiniteMetricSpace>,
    pub p: f64,
    pub epsilon: f64,
    #[serde(rename = "R_est")]
    pub r_est: f64,
    /// Level number `m`: the ratio window holds on every computed level after it.
    pub m_index: usize,
    /// The ratio window was checked on the `γ > δ^{R+ε}` side only.
    pub lower_window_skipped: bool,
    pub a: f64,
    pub ln_a: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub ln_k: f64,
    pub exponent: f64,
    /// `min d / ρ^exponent` over pairs.
    pub min_lower_ratio: PairResidual,
    /// `max d / ρ` over pairs.
    pub max_upper_ratio: PairResidual,
    pub pairs_checked: usize,
    pub ultrametric: bool,
    pub holds: bool,
}

impl UltrametricCertificate {
    /// Fails with the worst pair when either inequality is violated.
    pub fn check(&self, tolerance: f64) -> Result<()> {
        if self.max_upper_ratio.ln_value > tolerance {
            return Err(Error::CertificateViolated {
                pair: self.max_upper_ratio.pair,
                inequality: "d <= rho",
                slack: -self.max_upper_ratio.ln_value,
            });
        }
        let lower = self.min_lower_ratio.ln_value - self.ln_k;
        if lower < -tolerance {
            return Err(Error::CertificateViolated {
                pair: self.min_lower_ratio.pair,
                inequality: "K rho^exponent <= d",
                slack: lower,
            });
        }
        Ok(())
    }
}

/// Builds `ρ`, the constants `a`, `m`, `K`, and checks
/// `K ρ^{p(R+ε)} ≤ d ≤ ρ` on every pair.
pub fn certificate(
    space: &FiniteMetricSpace,
    chain: &PartitionChain,
    p: f64,
    epsilon: f64,
) -> Result<UltrametricCertificate> {
    let cert = build_certificate(space, chain, p, epsilon)?;
    cert.check(space.tolerance())?;
    Ok(cert)
}

/// As [`certificate`] but returns the report even when an inequality fails.
pub fn build_certificate(
    space: &FiniteMetricSpace,
    chain: &PartitionChain,
    p: f64,
    epsilon: f64,
) -> Result<UltrametricCertificate> {
    check_param(epsilon > 0.0, "epsilon", epsilon, "epsilon > 0")?;
    let class = classify_chain(chain, p)?;
    if !class.ln_p_witness.is_finite() {
        return Err(Error::CertificateRefused("p-witness is zero".into()));
    }
    let r_est = profile(chain, DEFAULT_EPSILON).estimate;
    if !r_est.is_finite() {
        return Err(Error::CertificateRefused(format!(
            "log ratio estimate {r_est} is not finite"
        )));
    }
    let rho = ultrametric_from_chain(space, chain)?;
    let rooted = chain.with_root(space)?;
    let st = rooted.stats();

    // Positions of the rooted chain with positive diameter, excluding α_0.
    let pos: Vec<usize> = rooted
        .positive_levels()
        .into_iter()
        .filter(|&k| k > 0)
        .collect();
    let skip_lower = r_est <= epsilon;
    let in_window = |k: usize| {
        let (ld, lg) = (st[k].ln_delta, st[k].ln_gamma);
        let above = (r_est + epsilon) * ld < lg;
        let below = skip_lower || lg < (r_est - epsilon) * ld;
        above && below
    };
    let mut first_ok = None;
    for &k in pos.iter().rev() {
        if in_window(k) {
            first_ok = Some(k);
        } else {
            break;
        }
    }
    let Some(first_ok) = first_ok else {
        return Err(Error::CertificateRefused(format!(
            "no computed level satisfies δ^(R+ε) < γ < δ^(R-ε) with R = {r_est}, ε = {epsilon}"
        )));
    };
    let m_pos = first_ok.saturating_sub(1).max(1).min(rooted.len() - 1);
    let exponent = p * (r_est + epsilon);
    let ln_a = class.ln_p_witness;
    let ln_k = ((r_est + epsilon) * ln_a).min(st[m_pos].ln_gamma - exponent * space.ln_diameter());

    let n = space.len();
    let (min_lower, max_upper) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut lo = PairResidual {
                pair: (0, 0),
                ln_value: f64::INFINITY,
            };
            let mut hi = PairResidual {
                pair: (0, 0),
                ln_value: f64::NEG_INFINITY,
            };
            for j in i + 1..n {
                let (ld, lr) = (space.ln_dist(i, j), rho.ln_dist(i, j));
                let l = ld - exponent * lr;
                if l < lo.ln_value {
                    lo = PairResidual {
                        pair: (i, j),
                        ln_value: l,
                    };
                }
                let h = ld - lr;
                if h > hi.ln_value {
                    hi = PairResidual {
                        pair: (i, j),
                        ln_value: h,
                    };
                }
            }
            (lo, hi)
        })
        .reduce(
            || {
                (
                    PairResidual {
                        pair: (0, 0),
                        ln_value: f64::INFINITY,
                    },
                    PairResidual {
                        pair: (0, 0),
                        ln_value: f64::NEG_INFINITY,
                    },
                )
            },
            |a, b| {
                let lo = if b.0.ln_value < a.0.ln_value
                    || (b.0.ln_value == a.0.ln_value && b.0.pair < a.0.pair)
                {
                    b.0
                } else {
                    a.0
                };
                let hi = if b.1.ln_value > a.1.ln_value
                    || (b.1.ln_value == a.1.ln_value && b.1.pair < a.1.pair)
                {
                    b.1
                } else {
                    a.1
                };
                (lo, hi)
            },
        );
    let tol = space.tolerance();
    let holds = max_upper.ln_value <= tol && min_lower.ln_value - ln_k >= -tol;
    let ultrametric = rho.is_ultrametric().holds;
    Ok(UltrametricCertificate {
        p,
        epsilon,
        r_est,
        m_index: rooted.indices()[m_pos],
        lower_window_skipped: skip_lower,
        a: ln_a.exp(),
        ln_a,
        k: ln_k.exp(),
        ln_k,
        exponent,
        min_lower_ratio: min_lower,
        max_upper_ratio: max_upper,
        pairs_checked: n * (n.saturating_sub(1)) / 2,
        ultrametric,
        holds,
        rho: Some(rho),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub s: f64,
    pub t: f64,
    pub c1: f64,
    pub c2: f64,
    pub pairs: usize,
}

/// Extremal log-log slopes `s ≤ t` of `d2` against `d1` and the tightest
/// constants with `c1 d1^t ≤ d2 ≤ c2 d1^s`.
pub fn fit_holder_exponents(d1: &FiniteMetricSpace, d2: &FiniteMetricSpace) -> Result<HolderFit> {
    if d1.len() != d2.len() {
        return Err(Error::LabelMismatch {
            labels: d2.len(),
            n: d1.len(),
        });
    }
    let n = d1.len();
    let mut s = f64::INFINITY;
    let mut t = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let x = d1.ln_dist(i, j);
            if x < 0.0 {
                let slope = d2.ln_dist(i, j) / x;
                s = s.min(slope);
                t = t.max(slope);
            }
        }
    }
    if !s.is_finite() {
        // Every pair sits at distance 1: any exponent fits.
        s = 1.0;
        t = 1.0;
    }
    let mut ln_c1 = f64::INFINITY;
    let mut ln_c2 = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (d1.ln_dist(i, j), d2.ln_dist(i, j));
            ln_c2 = ln_c2.max(y - s * x);
            ln_c1 = ln_c1.min(y - t * x);
        }
    }
    if n < 2 {
        ln_c1 = 0.0;
        ln_c2 = 0.0;
    }
    Ok(HolderFit {
        s,
        t,
        c1: ln_c1.exp(),
        c2: ln_c2.exp(),
        pairs: n * n.saturating_sub(1) / 2,
    })
}

/// The set of clusters appearing anywhere in the single-linkage hierarchy.
pub fn hierarchy_clusters(space: &FiniteMetricSpace) -> BTreeSet<Vec<usize>> {
    dendrogram_chain(space)
        .levels()
        .iter()
        .flat_map(|l| l.blocks().iter().cloned())
        .collect()
}

/// True when both metrics produce the same merge tree, ignoring merge heights.
pub fn same_hierarchy(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> bool {
    a.len() == b.len() && hierarchy_clusters(a) == hierarchy_clusters(b)
}
