//! Engine results against values frozen from an independent exact-fraction
//! implementation (Python `fractions`, same series, no shared code).

use levybound::moment::MomentSeries;
use levybound::rational::pow2;
use levybound::scenario::accumulation_scenario;
use levybound::tail::{optimize_k, significant_bits, TailBoundQuery};

fn series(count: u64, order: usize) -> MomentSeries {
    accumulation_scenario(count, 1, &pow2(-24)).unwrap().series(order).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

// (N, P, [(2k, eps, log2 eps)], best (2k, eps))
const FROZEN: [(u64, f64, [(usize, f64, f64); 4], (usize, f64)); 2] = [
    (
        2_000_000_000,
        1e-9,
        [
            (2, 68.82551541204755, 6.104871603625682),
            (4, 0.4283238791765199, -1.223225984762729),
            (6, 0.08578697424398812, -3.5430975819125865),
            (8, 0.04004164272769178, -4.642355027127304),
        ],
        (44, 0.010153194844590433),
    ),
    (
        10_000_000_000,
        1e-10,
        [
            (2, 486.6698866651807, 8.926799698513044),
            (4, 1.703167217773332, 0.7682200864605004),
            (6, 0.2815613372311361, -1.8284788518722628),
            (8, 0.11939795502665183, -3.0661499676495794),
        ],
        (48, 0.023873586565818113),
    ),
];

#[test]
fn fixed_orders_match_oracle() {
    for (count, p, rows, _) in FROZEN {
        let s = series(count, 4);
        for (two_k, eps, log2) in rows {
            let r = TailBoundQuery::epsilon_from_p(s.clone(), p, true).with_k(two_k / 2).evaluate().unwrap();
            assert!(rel(r.epsilon, eps) < 1e-10, "N={count} 2k={two_k}: {} vs {eps}", r.epsilon);
            assert!((significant_bits(r.epsilon) - log2).abs() < 1e-9);
        }
    }
}

#[test]
fn best_order_matches_oracle_for_both_truncations() {
    for order in [24, 32] {
        for (count, p, _, (two_k, eps)) in FROZEN {
            let r = optimize_k(&series(count, order), p, true, order).unwrap();
            assert_eq!(r.two_k(), two_k, "order {order}");
            assert!(rel(r.epsilon, eps) < 1e-10);
        }
    }
}

#[test]
fn markov_at_printed_threshold() {
    // the endpoint bound at eps = 68.825 is about half of P = 1e-9
    let s = series(2_000_000_000, 1);
    let r = TailBoundQuery::p_from_epsilon(s, 68.825, false).with_k(1).evaluate().unwrap();
    assert!(rel(r.probability, 5e-10) < 1e-3, "{}", r.probability);
}
