//! Relabeling and sign-flip behaviour of the compatibility classification.

use proptest::prelude::*;
use specrisk::payout::{classify_compatibility, mixed_partial_signs, Payout, Verdict};

/// `Σ a_i x_i + Σ c_ij x_i x_j` on the unit cube with `|a_i| > Σ_j |c_ij|`,
/// so every variable is strictly monotone and every interaction has a fixed sign.
#[derive(Debug, Clone)]
struct Quadratic {
    linear: Vec<f64>,
    cross: Vec<((usize, usize), f64)>,
}

impl Quadratic {
    fn expr(&self) -> String {
        let mut terms: Vec<String> = self
            .linear
            .iter()
            .enumerate()
            .map(|(i, a)| format!("({a})*x{}", i + 1))
            .collect();
        for ((i, j), c) in &self.cross {
            terms.push(format!("({c})*x{}*x{}", i + 1, j + 1));
        }
        terms.join(" + ")
    }

    fn payout(&self) -> Payout {
        Payout::parse(&self.expr(), vec![(0.0, 1.0); self.linear.len()]).unwrap()
    }
}

fn signed(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v })
}

fn quadratic() -> impl Strategy<Value = Quadratic> {
    (2usize..=4).prop_flat_map(|d| {
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        let np = pairs.len();
        (
            prop::collection::vec(signed(1.0, 3.0), d),
            prop::collection::vec(prop_oneof![Just(0.0), signed(0.05, 0.3)], np),
        )
            .prop_map(move |(linear, c)| Quadratic {
                linear,
                cross: pairs.iter().copied().zip(c).filter(|(_, c)| *c != 0.0).collect(),
            })
    })
}

fn permutation(d: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..d).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classification_commutes_with_relabeling(
        (q, perm) in quadratic().prop_flat_map(|q| { let d = q.linear.len(); (Just(q), permutation(d)) }),
        include_x0 in any::<bool>(),
    ) {
        let b = q.payout();
        let (part, verdict) = classify_compatibility(&mixed_partial_signs(&b, 3).unwrap(), include_x0);
        let moved = b.relabeled(&perm).unwrap();
        let (part2, verdict2) = classify_compatibility(&mixed_partial_signs(&moved, 3).unwrap(), include_x0);
        prop_assert_eq!(verdict.is_compatible(), verdict2.is_compatible());
        if let (Some(p), Some(p2)) = (part, part2) {
            if include_x0 {
                // monotone variables tie every node to x0, which pins the coloring
                for k in 0..perm.len() {
                    prop_assert_eq!(p2.side(perm[k] + 1), p.side(k + 1), "variable {} -> {}", k, perm[k]);
                }
            } else {
                // components are colored independently; only edge relations are determined
                for ((i, j), _) in &q.cross {
                    let same = p.side(i + 1) == p.side(j + 1);
                    prop_assert_eq!(p2.side(perm[*i] + 1) == p2.side(perm[*j] + 1), same);
                }
            }
        }
    }

    #[test]
    fn flipping_a_variable_moves_it_across_the_partition(q in quadratic(), pick in any::<prop::sample::Index>()) {
        let b = q.payout();
        let i = pick.index(q.linear.len());
        let s = mixed_partial_signs(&b, 3).unwrap();
        let flipped = b.with_flipped_variable(i).unwrap();
        let t = mixed_partial_signs(&flipped, 3).unwrap();
        let d = q.linear.len();
        for j in 0..d {
            let expect = if j == i { s.monotonicity[j].as_sign().negated() } else { s.monotonicity[j].as_sign() };
            prop_assert_eq!(t.monotonicity[j].as_sign(), expect);
            for k in 0..d {
                if j == k {
                    continue;
                }
                let expect = if (j == i) != (k == i) { s.sigma[j][k].negated() } else { s.sigma[j][k] };
                prop_assert_eq!(t.sigma[j][k], expect, "entry ({}, {})", j, k);
            }
        }
        let (p, v) = classify_compatibility(&s, true);
        let (p2, v2) = classify_compatibility(&t, true);
        prop_assert_eq!(v.is_compatible(), v2.is_compatible());
        if let (Some(p), Some(p2)) = (p, p2) {
            for j in 1..=d {
                prop_assert_eq!(p.side(j) == p2.side(j), j != i + 1);
            }
        }
    }

    #[test]
    fn strict_verdict_needs_strict_edges(q in quadratic()) {
        let s = mixed_partial_signs(&q.payout(), 3).unwrap();
        let (_, v) = classify_compatibility(&s, true);
        if let Verdict::StrictlyCompatible = v {
            let d = q.linear.len();
            prop_assert_eq!(q.cross.len(), d * (d - 1) / 2);
        }
    }
}
