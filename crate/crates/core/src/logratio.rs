//! Log-ratio profiles of partition chains and the gap-condition check.

use serde::{Deserialize, Serialize};

use crate::chain::{tail_infima, PartitionChain};
use crate::error::Result;
use crate::gaps::largest_gap;
use crate::metric::FiniteMetricSpace;

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileLevel {
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
    pub ln_delta: f64,
    pub ln_gamma: f64,
    #[serde(rename = "R", with = "crate::io::inf_f64")]
    pub log_ratio: f64,
}

/// Hypotheses under which the log ratio of the space is the liminf of the
/// chain's ratios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapCondition {
    pub delta_strictly_decreasing: bool,
    /// Smallest `C` such that every level `n` has a block `A` with
    /// `diam A = δ(α_n)` and `Γ(A) ≤ C γ(α_{n+1})`.
    pub min_feasible_c: f64,
    pub ln_min_feasible_c: f64,
    /// Level at which the smallest `C` is forced.
    pub binding_level: Option<usize>,
    pub levels_checked: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRatioProfile {
    pub levels: Vec<ProfileLevel>,
    /// `running_liminf[k] = inf { R_m : m ≥ k }`.
    pub running_liminf: Vec<f64>,
    #[serde(with = "crate::io::inf_f64")]
    pub estimate: f64,
    pub epsilon: f64,
    /// First level number from which every computed `R_n` is within
    /// `epsilon` of the estimate.
    pub burn_in: Option<usize>,
    #[serde(with = "crate::io::option_inf_f64")]
    pub exact_limit: Option<f64>,
    #[serde(rename = "property6_hypotheses")]
    pub gap_condition: Option<GapCondition>,
}

impl LogRatioProfile {
    pub fn with_exact_limit(mut self, exact: f64) -> Self {
        self.exact_limit = Some(exact);
        self
    }

    pub fn level(&self, n: usize) -> Option<&ProfileLevel> {
        self.levels.iter().find(|l| l.n == n)
    }
}

/// Profile of the positive-diameter levels of a chain.
pub fn profile(chain: &PartitionChain, epsilon: f64) -> LogRatioProfile {
    let levels: Vec<ProfileLevel> = chain
        .positive_levels()
        .into_iter()
        .map(|k| {
            let st = &chain.stats()[k];
            ProfileLevel {
                n: chain.indices()[k],
                delta: st.delta,
                gamma: st.gamma,
                ln_delta: st.ln_delta,
                ln_gamma: st.ln_gamma,
                log_ratio: st.log_ratio,
            }
        })
        .collect();
    let ratios: Vec<f64> = levels.iter().map(|l| l.log_ratio).collect();
    let running_liminf = tail_infima(&ratios);
    let estimate = running_liminf.last().copied().unwrap_or(f64::NAN);
    let within = |r: f64| {
        if estimate.is_finite() {
            (r - estimate).abs() < epsilon
        } else {
            r == estimate
        }
    };
    let mut burn_in = None;
    for l in levels.iter().rev() {
        if within(l.log_ratio) {
            burn_in = Some(l.n);
        } else {
            break;
        }
    }
    LogRatioProfile {
        levels,
        running_liminf,
        estimate,
        epsilon,
        burn_in,
        exact_limit: None,
        gap_condition: None,
    }
}

/// Profile together with the gap-condition check, which needs the space.
pub fn profile_with_space(
    space: &FiniteMetricSpace,
    chain: &PartitionChain,
    epsilon: f64,
) -> Result<LogRatioProfile> {
    let mut p = profile(chain, epsilon);
    p.gap_condition = Some(gap_condition(space, chain)?);
    Ok(p)
}

pub fn gap_condition(space: &FiniteMetricSpace, chain: &PartitionChain) -> Result<GapCondition> {
    let pos = chain.positive_levels();
    let st = chain.stats();
    let delta_strictly_decreasing = pos
        .windows(2)
        .all(|w| st[w[1]].ln_delta < st[w[0]].ln_delta);
    let mut worst = f64::NEG_INFINITY;
    let mut binding = None;
    let mut checked = 0;
    for k in 0..chain.len().saturating_sub(1) {
        let (cur, next) = (&st[k], &st[k + 1]);
        if cur.ln_delta == f64::NEG_INFINITY {
            continue;
        }
        let mut best = f64::INFINITY;
        for block in chain.levels()[k].blocks() {
            if block.len() < 2 {
                continue;
            }
            let sub = space.subspace(block)?;
            if sub.ln_diameter() != cur.ln_delta {
                continue;
            }
            let g = largest_gap(space, block)?;
            best = best.min(g.ln_gap - next.ln_gamma);
        }
        checked += 1;
        if best > worst {
            worst = best;
            binding = Some(chain.indices()[k]);
        }
    }
    Ok(GapCondition {
        delta_strictly_decreasing,
        min_feasible_c: worst.exp(),
        ln_min_feasible_c: worst,
        binding_level: binding,
        levels_checked: checked,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondiscretenessReport {
    pub gamma_strictly_decreasing: bool,
    /// Level numbers `n` at which `γ(α_{n+1}) ≥ γ(α_n)`.
    pub violations: Vec<usize>,
    pub terminal_gamma: f64,
    pub ln_terminal_gamma: f64,
    /// The chain ends in singletons, so its gaps stop at the minimum distance.
    pub discrete_terminal: bool,
}

impl NondiscretenessReport {
    pub fn passes(&self) -> bool {
        self.gamma_strictly_decreasing && !self.discrete_terminal
    }
}

/// Checks that the gaps decrease along the chain, as they must toward 0 on a
/// nondiscrete space.
pub fn nondiscreteness_check(chain: &PartitionChain) -> NondiscretenessReport {
    let st = chain.stats();
    // {X} carries the diameter by convention, not a gap; skip it.
    let start = usize::from(chain.levels()[0].num_blocks() == 1);
    let mut violations = Vec::new();
    for k in start..chain.len().saturating_sub(1) {
        if st[k + 1].ln_gamma >= st[k].ln_gamma {
            violations.push(chain.indices()[k]);
        }
    }
    let last = st[chain.len() - 1];
    NondiscretenessReport {
        gamma_strictly_decreasing: violations.is_empty(),
        violations,
        terminal_gamma: last.gamma,
        ln_terminal_gamma: last.ln_gamma,
        discrete_terminal: chain.levels()[chain.len() - 1].is_singletons(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::dendrogram_chain;
    use crate::metric::default_labels;

    fn geometric(depth: usize) -> FiniteMetricSpace {
        let mut x: Vec<f64> = (1..=depth).map(|n| 0.5f64.powi(n as i32)).collect();
        x.push(0.0);
        FiniteMetricSpace::from_line(default_labels(x.len()), x).unwrap()
    }

    #[test]
    fn geometric_profile_is_one() {
        let s = geometric(20);
        let c = dendrogram_chain(&s);
        let p = profile_with_space(&s, &c, DEFAULT_EPSILON).unwrap();
        for l in &p.levels[1..] {
            assert_eq!(l.log_ratio, 1.0);
        }
        assert_eq!(p.estimate, 1.0);
        // {X} also has γ = diam X = δ, so R = 1 from the first level.
        assert_eq!(p.burn_in, Some(1));
        let gc = p.gap_condition.unwrap();
        assert!(gc.delta_strictly_decreasing);
        // Γ(A_n) = r_n - r_{n+1} = γ(α_{n+1})
        assert!((gc.min_feasible_c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn running_liminf_nondecreasing() {
        let s = FiniteMetricSpace::from_line(
            default_labels(7),
            vec![0.0, 0.01, 0.05, 0.06, 0.3, 0.32, 0.9],
        )
        .unwrap();
        let p = profile(&dendrogram_chain(&s), DEFAULT_EPSILON);
        assert!(p.running_liminf.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(p.estimate, *p.running_liminf.last().unwrap());
    }

    #[test]
    fn dendrogram_is_discrete() {
        let r = nondiscreteness_check(&dendrogram_chain(&geometric(6)));
        assert!(r.discrete_terminal);
        assert!(!r.passes());
        assert_eq!(r.terminal_gamma, 0.5f64.powi(6));
    }
}
