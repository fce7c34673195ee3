use qswitch_core::tomo::{
    exact_frequencies, pauli_pairs, reconstruct, reconstruct_frequencies, reference_targets, simulate_counts, Method,
};

#[test]
fn noiseless_reconstruction_both_methods() {
    for t in reference_targets() {
        let rho = t.to_density().into_matrix();
        for m in [Method::Linear, Method::Mle] {
            let res = reconstruct_frequencies(&exact_frequencies(&rho), m).unwrap().with_target(&t).unwrap();
            assert!(res.fidelity.unwrap() >= 0.999, "{m:?} {:?}", res.fidelity);
            assert!(res.purity >= 0.999);
        }
    }
}

#[test]
fn thirty_thousand_pairs_mle_fidelity() {
    for (i, t) in reference_targets().iter().enumerate() {
        let rho = t.to_density().into_matrix();
        let seeds = 0..100u64;
        let n = seeds.clone().count() as f64;
        let mean: f64 = seeds
            .map(|seed| {
                let recs = simulate_counts(&rho, &pauli_pairs(), 30_000, seed).unwrap();
                reconstruct(&recs, Method::Mle).unwrap().with_target(t).unwrap().fidelity.unwrap()
            })
            .sum::<f64>()
            / n;
        eprintln!("target {i}: mean MLE fidelity {mean:.5}");
        assert!(mean >= 0.98, "target {i}: {mean}");
    }
}
