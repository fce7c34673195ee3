use std::sync::OnceLock;
use std::time::Instant;

use qswitch_core::procmat::{self, probability_table, random_separable, w_ordered, w_switch, w_switch_dephased, Order};
use qswitch_core::witness::{
    dual_cone_check, evaluate_witness, optimize_witness, restrict, ConeVerdict, WitnessSolution, WitnessSpan,
    IDEAL_TOLERANCE, IDEAL_VALUE,
};
use qswitch_core::qmath::linalg::min_eigenvalue;
use qswitch_core::ProbabilityTable;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ideal() -> &'static WitnessSolution {
    static SOL: OnceLock<WitnessSolution> = OnceLock::new();
    SOL.get_or_init(|| {
        let t = Instant::now();
        let sol = optimize_witness(&w_switch(), &WitnessSpan::full()).unwrap();
        eprintln!("value {} gap {:e} iters {} in {:?}", sol.value, sol.gap, sol.iterations, t.elapsed());
        sol
    })
}

#[test]
fn ideal_switch_value() {
    let sol = ideal();
    assert!((sol.value - IDEAL_VALUE).abs() < IDEAL_TOLERANCE, "{}", sol.value);
    assert!(sol.gap < 1e-6);
}

#[test]
fn value_matches_trace_and_probabilities() {
    let sol = ideal();
    let tr = sol.evaluate_on(&w_switch()).unwrap();
    let probs = restrict(&probability_table(&w_switch()).unwrap(), &sol.span);
    let from_probs = evaluate_witness(&sol.alpha, &probs).unwrap();
    assert!((tr - sol.value).abs() < 1e-8, "{tr} vs {}", sol.value);
    assert!((from_probs - tr).abs() < 1e-8, "{from_probs} vs {tr}");
}

#[test]
fn separable_processes_score_nonnegative() {
    let sol = ideal();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let w = random_separable(&mut rng);
        let v = sol.evaluate_on(&w).unwrap();
        assert!(v >= -1e-6, "{v}");
    }
    for order in [Order::AThenB, Order::BThenA] {
        assert!(sol.evaluate_on(&w_ordered(order)).unwrap() >= -1e-6);
    }
    assert!(sol.evaluate_on(&w_switch_dephased(1.0).unwrap()).unwrap() >= -1e-6);
}

#[test]
fn optimal_witness_lies_in_dual_cone() {
    let report = dual_cone_check(&ideal().s).unwrap();
    assert_eq!(report.verdict, ConeVerdict::Member, "margin {}", report.margin);
    let [t0, t1] = report.decomposition.unwrap();
    for t in [t0, t1] {
        let lmin = min_eigenvalue(t.matrix()).unwrap();
        assert!(lmin >= -1e-6, "{lmin}");
    }
}

#[test]
fn evaluation_is_linear_in_statistics() {
    let sol = ideal();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p1 = restrict(&probability_table(&random_separable(&mut rng)).unwrap(), &sol.span);
    let p2 = restrict(&probability_table(&w_switch()).unwrap(), &sol.span);
    let t = 0.37;
    let mix: ProbabilityTable = p1.iter().map(|(k, v)| (*k, t * v + (1.0 - t) * p2[k])).collect();
    let lhs = evaluate_witness(&sol.alpha, &mix).unwrap();
    let rhs = t * evaluate_witness(&sol.alpha, &p1).unwrap() + (1.0 - t) * evaluate_witness(&sol.alpha, &p2).unwrap();
    assert!((lhs - rhs).abs() < 1e-12);
}

#[test]
fn fully_dephased_switch_is_not_detected() {
    let sol = optimize_witness(&w_switch_dephased(1.0).unwrap(), &WitnessSpan::full()).unwrap();
    assert!(sol.value >= -1e-6, "{}", sol.value);
}

#[test]
fn smaller_span_gives_weaker_witness() {
    let sub = optimize_witness(&w_switch(), &WitnessSpan::with_alice(vec![1, 2, 3, 4])).unwrap();
    assert!(sub.value >= ideal().value - 1e-6, "{} vs {}", sub.value, ideal().value);
}

#[test]
fn json_round_trip_keeps_value_and_alpha() {
    let sol = ideal();
    let doc: serde_json::Value = serde_json::from_str(&sol.to_json()).unwrap();
    assert_eq!(doc["value"].as_f64().unwrap(), sol.value);
    let alpha = doc["alpha"].as_object().unwrap();
    assert_eq!(alpha.len(), sol.alpha.len());
    for (k, v) in &sol.alpha {
        assert_eq!(alpha[&k.to_string()].as_f64().unwrap(), *v);
    }
    let span: WitnessSpan = serde_json::from_value(doc["span"].clone()).unwrap();
    assert_eq!(span, sol.span);
}

#[test]
fn witness_is_a_process_operator() {
    let s = &ideal().s;
    assert_eq!(s.space(), &procmat::process_space());
    assert!(s.matrix().is_hermitian(1e-10));
}
