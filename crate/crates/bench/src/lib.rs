//! Shared inputs for the pipeline benchmarks.

use qswitch_core::settings::{enumerate_settings, ExperimentSetting};
use qswitch_core::tomo::{self, pauli_pairs, reference_targets, CountRecord};
use qswitch_core::CMatrix;

/// The diagonal catalog setting (input H, first Alice and Bob choices).
pub fn first_setting() -> ExperimentSetting {
    enumerate_settings()[0]
}

/// Heralded pair state for input D.
pub fn diagonal_pair_state() -> CMatrix {
    let t = &reference_targets()[1];
    let a = t.amplitudes();
    tomo::heralded_pair_state([a[0], a[3]]).expect("gate state")
}

/// Simulated Pauli-pair counts at a fixed seed.
pub fn counts(pairs: u64) -> Vec<CountRecord> {
    tomo::simulate_counts(&diagonal_pair_state(), &pauli_pairs(), pairs, 1).expect("counts")
}
