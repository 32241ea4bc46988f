mod common;

use common::*;
use metriclab::chain::{dendrogram_chain, PartitionChain};
use metriclab::partition::{partition_stats, threshold_partition, Partition};
use metriclab::ultrametric::ultrametric_from_chain;
use metriclab::FiniteMetricSpace;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_match_naive(seed in any::<u64>(), n in 2usize..10, k in 1usize..5) {
        let (m, s) = random_space(seed, n);
        let p = random_partition(&mut rng(seed ^ 1), n, k);
        let st = partition_stats(&s, &p);
        let (d, g) = naive_delta_gamma(&m, &block_labels(&p));
        prop_assert!((st.delta - d).abs() < 1e-15);
        prop_assert!((st.gamma - g).abs() < 1e-15);
        let r = naive_ratio(d, g);
        prop_assert!(st.log_ratio == r || (st.log_ratio - r).abs() < 1e-12);
    }

    #[test]
    fn line_fast_path_matches_dense(xs in proptest::collection::btree_set(0u32..1000, 2..12), k in 1usize..4, seed in any::<u64>()) {
        let x: Vec<f64> = xs.iter().map(|&v| v as f64 / 1000.0).collect();
        let m: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| (a - b).abs()).collect()).collect();
        let line = FiniteMetricSpace::from_line(metriclab::default_labels(x.len()), x.clone()).unwrap();
        let dense = space(&m);
        let p = random_partition(&mut rng(seed), x.len(), k);
        let (a, b) = (partition_stats(&line, &p), partition_stats(&dense, &p));
        prop_assert_eq!(a.delta, b.delta);
        prop_assert_eq!(a.gamma, b.gamma);
    }

    #[test]
    fn threshold_partition_matches_flood_fill(seed in any::<u64>(), n in 2usize..12, t in 0.01f64..1.0) {
        let (m, s) = random_space(seed, n);
        let p = threshold_partition(&s, t).unwrap();
        let q = Partition::from_labels(&naive_threshold(&m, t));
        prop_assert_eq!(p, q);
    }

    /// The threshold partition at γ(α) has γ ≥ γ(α), δ ≤ δ(α), R ≤ R(α).
    #[test]
    fn threshold_dominance(seed in any::<u64>(), n in 3usize..9, k in 2usize..5) {
        let (m, s) = random_space(seed, n);
        let p = random_partition(&mut rng(seed ^ 7), n, k);
        let (d, g) = naive_delta_gamma(&m, &block_labels(&p));
        prop_assume!(d > 0.0 && d < 1.0 && g < 1.0);
        let t = naive_threshold(&m, g);
        let (td, tg) = naive_delta_gamma(&m, &t);
        prop_assert!(tg >= g);
        prop_assert!(td <= d);
        prop_assert!(naive_ratio(td, tg) <= naive_ratio(d, g) + 1e-12);
        let lib = partition_stats(&s, &threshold_partition(&s, g).unwrap());
        prop_assert_eq!(lib.gamma, tg);
    }

    #[test]
    fn snowflake_preserves_ratio(seed in any::<u64>(), n in 3usize..10, k in 2usize..5, sf in 0.05f64..1.0) {
        let (_, s) = random_space(seed, n);
        let p = random_partition(&mut rng(seed ^ 3), n, k);
        let a = partition_stats(&s, &p);
        let b = partition_stats(&s.snowflake(sf).unwrap(), &p);
        prop_assume!(a.log_ratio.is_finite() && a.delta > 0.0);
        prop_assert!((a.log_ratio - b.log_ratio).abs() < 1e-12);
    }

    /// Restricting a chain to a subspace cannot raise `R` at any level.
    #[test]
    fn subspace_monotone(seed in any::<u64>(), n in 4usize..12, keep in 2usize..12) {
        let (_, s) = random_space(seed, n);
        let keep = keep.min(n);
        let mut r = rng(seed ^ 5);
        let mut idx: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        idx.shuffle(&mut r);
        let mut sub_idx = idx[..keep].to_vec();
        sub_idx.sort_unstable();
        let sub = s.subspace(&sub_idx).unwrap();
        let chain = dendrogram_chain(&s);
        for (p, st) in chain.levels().iter().zip(chain.stats()) {
            let q = partition_stats(&sub, &p.restrict(&sub_idx));
            if q.cardinality > 1 && st.log_ratio.is_finite() && q.log_ratio.is_finite() && q.delta > 0.0 {
                prop_assert!(q.log_ratio <= st.log_ratio + 1e-12);
            }
        }
    }

    #[test]
    fn dendrogram_nested_to_singletons(seed in any::<u64>(), n in 2usize..15) {
        let (_, s) = random_space(seed, n);
        let c = dendrogram_chain(&s);
        prop_assert_eq!(c.levels()[0].num_blocks(), 1);
        prop_assert!(c.levels().last().unwrap().is_singletons());
        for w in c.levels().windows(2) {
            prop_assert!(w[1].refines(&w[0]));
        }
    }

    #[test]
    fn chain_ultrametric_dominates(seed in any::<u64>(), n in 2usize..12) {
        let (_, s) = random_space(seed, n);
        let c = dendrogram_chain(&s);
        let rho = ultrametric_from_chain(&s, &c).unwrap();
        prop_assert!(rho.is_ultrametric().holds);
        for i in 0..n {
            for j in i + 1..n {
                prop_assert!(s.dist(i, j) <= rho.dist(i, j) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn product_delta_max_gamma_min(seed in any::<u64>(), k1 in 2usize..4, k2 in 2usize..4) {
        let (_, a) = random_space(seed, 4);
        let (_, b) = random_space(seed ^ 11, 4);
        let prod = FiniteMetricSpace::sup_product(&[a.clone(), b.clone()], 64).unwrap();
        let pa = random_partition(&mut rng(seed ^ 2), 4, k1);
        let pb = random_partition(&mut rng(seed ^ 4), 4, k2);
        let labels: Vec<(usize, usize)> = (0..16).map(|x| (pa.block_of(x / 4), pb.block_of(x % 4))).collect();
        let pp = Partition::from_labels(&labels);
        let (sa, sb, sp) = (partition_stats(&a, &pa), partition_stats(&b, &pb), partition_stats(&prod, &pp));
        prop_assert_eq!(sp.delta, sa.delta.max(sb.delta));
        if pa.num_blocks() > 1 && pb.num_blocks() > 1 {
            prop_assert_eq!(sp.gamma, sa.gamma.min(sb.gamma));
        }
    }

    #[test]
    fn hyperspace_of_ultrametric_is_ultrametric(seed in any::<u64>(), n in 2usize..6) {
        let m = random_ultrametric(&mut rng(seed), n);
        let s = space(&m);
        prop_assert!(s.is_ultrametric().holds);
        let h = s.hausdorff_hyperspace(n, 100).unwrap();
        prop_assert_eq!(h.space.len(), (1usize << n) - 1);
        prop_assert!(h.space.is_ultrametric().holds);
    }

    #[test]
    fn chain_json_round_trip(seed in any::<u64>(), n in 2usize..10) {
        let (_, s) = random_space(seed, n);
        let c = dendrogram_chain(&s);
        let json = serde_json::to_string(&metriclab::io::ChainJson::from_chain(&c)).unwrap();
        let back: metriclab::io::ChainJson = serde_json::from_str(&json).unwrap();
        let c2: PartitionChain = back.into_chain(&s).unwrap();
        prop_assert_eq!(c.levels(), c2.levels());
    }
}
