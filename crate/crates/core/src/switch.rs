//! Qubit-level quantum switch with a time-delocalized von Neumann measurement.
//!
//! Labels: `c` control, `s` system, `a` ancilla. Control |0⟩ runs Alice before Bob.

use thiserror::Error;

use crate::qmath::linalg::{singular_values, trace_norm};
use crate::qmath::{cr, gates, CMatrix, LabeledOperator, LabeledVector, QmathError, C64};
use crate::settings::ExperimentSetting;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwitchError {
    #[error("{0} is not unitary")]
    NotUnitary(&'static str),
    #[error("distinguishability {0} outside [0, 1]")]
    BadDistinguishability(f64),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("label `{0}` missing from state")]
    MissingLabel(&'static str),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

const UNITARY_TOL: f64 = 1e-10;

/// Bob's measure-and-reprepare station: VN = (reprepare ⊗ I)·CNOT·(measure ⊗ I).
#[derive(Clone, Debug, PartialEq)]
pub struct BobStation {
    pub measure: CMatrix,
    pub reprepare: CMatrix,
}

impl BobStation {
    pub fn new(measure: CMatrix, reprepare: CMatrix) -> Result<Self, SwitchError> {
        if !measure.is_unitary(UNITARY_TOL) {
            return Err(SwitchError::NotUnitary("measurement basis"));
        }
        if !reprepare.is_unitary(UNITARY_TOL) {
            return Err(SwitchError::NotUnitary("repreparation basis"));
        }
        Ok(Self { measure, reprepare })
    }

    /// Measures in `basis` and returns the system to it: reprepare = basis†.
    pub fn projective(basis: &CMatrix) -> Result<Self, SwitchError> {
        Self::new(basis.clone(), basis.adjoint())
    }

    pub fn from_setting(setting: &ExperimentSetting) -> Self {
        Self { measure: setting.bob_measure_unitary(), reprepare: setting.bob_reprepare_unitary() }
    }

    /// Joint (s, a) interaction, s the most significant factor.
    pub fn interaction(&self) -> CMatrix {
        let pre = self.measure.kron(&gates::id2());
        let post = self.reprepare.kron(&gates::id2());
        &(&post * &gates::cnot()) * &pre
    }
}

fn qubit_amps(v: &LabeledVector, label: &'static str) -> Result<[C64; 2], SwitchError> {
    if v.space().labels() != [label.to_string()] || v.space().dims() != [2] {
        return Err(SwitchError::MissingLabel(label));
    }
    let a = v.amplitudes();
    Ok([a[0], a[1]])
}

fn sa_vector(amps: Vec<C64>) -> LabeledVector {
    LabeledVector::new(&["s", "a"], &[2, 2], amps).expect("two-qubit shape")
}

/// (basis† ⊗ I)·CNOT·(basis ⊗ I) on |ψ⟩_s|0⟩_a.
pub fn von_neumann(system: &LabeledVector, basis: &CMatrix) -> Result<LabeledVector, SwitchError> {
    von_neumann_with(system, &BobStation::projective(basis)?)
}

pub fn von_neumann_with(system: &LabeledVector, station: &BobStation) -> Result<LabeledVector, SwitchError> {
    let psi = qubit_amps(system, "s")?;
    let input = vec![psi[0], cr(0.0), psi[1], cr(0.0)];
    Ok(sa_vector(station.interaction().matvec(&input)))
}

/// Branch vectors on (s, a) for control 0 (Alice, then Bob) and control 1 (Bob, then Alice).
pub fn branch_vectors(u_a: &CMatrix, station: &BobStation, input: [C64; 2]) -> [Vec<C64>; 2] {
    let ua = u_a.kron(&gates::id2());
    let vn = station.interaction();
    let start = vec![input[0], cr(0.0), input[1], cr(0.0)];
    let first_a = vn.matvec(&ua.matvec(&start));
    let first_b = ua.matvec(&vn.matvec(&start));
    [first_a, first_b]
}

/// (|0⟩⟨0|_c ⊗ VN∘U_A + |1⟩⟨1|_c ⊗ U_A∘VN) on control ⊗ input ⊗ |0⟩_a.
pub fn switch_evolve(
    u_a: &CMatrix,
    station: &BobStation,
    input: &LabeledVector,
    control: &LabeledVector,
) -> Result<LabeledVector, SwitchError> {
    if !u_a.is_unitary(UNITARY_TOL) {
        return Err(SwitchError::NotUnitary("Alice's operation"));
    }
    let psi = qubit_amps(input, "s")?;
    let ctl = qubit_amps(control, "c")?;
    let n = ctl[0].norm_sqr() + ctl[1].norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(SwitchError::NotNormalized(n));
    }
    let [b0, b1] = branch_vectors(u_a, station, psi);
    let mut amps = Vec::with_capacity(8);
    for (k, br) in [b0, b1].iter().enumerate() {
        amps.extend(br.iter().map(|x| x * ctl[k]));
    }
    Ok(LabeledVector::new(&["c", "s", "a"], &[2, 2, 2], amps)?)
}

/// The all-labels state of one catalog setting with control |+⟩.
pub fn setting_state(setting: &ExperimentSetting) -> LabeledVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let input = LabeledVector::qubit("s", setting.input_state());
    let control = LabeledVector::qubit("c", [cr(h), cr(h)]);
    switch_evolve(&setting.alice_unitary(), &BobStation::from_setting(setting), &input, &control)
        .expect("catalog operations are unitary")
}

/// Multiplies the control off-diagonal blocks by √(1−D²).
pub fn dephase_control(state: &LabeledOperator, d: f64) -> Result<LabeledOperator, SwitchError> {
    if !(0.0..=1.0).contains(&d) || d.is_nan() {
        return Err(SwitchError::BadDistinguishability(d));
    }
    coherence_scale(state, (1.0 - d * d).sqrt())
}

/// Multiplies the control off-diagonal blocks by `lambda`.
pub fn coherence_scale(state: &LabeledOperator, lambda: f64) -> Result<LabeledOperator, SwitchError> {
    let space = state.space().clone();
    let pos = space.position("c").ok_or(SwitchError::MissingLabel("c"))?;
    let stride: usize = space.dims()[pos + 1..].iter().product();
    let m = state.matrix();
    let n = m.rows();
    let out = CMatrix::from_fn(n, n, |i, j| {
        if (i / stride) % 2 != (j / stride) % 2 {
            m[(i, j)] * lambda
        } else {
            m[(i, j)]
        }
    });
    Ok(LabeledOperator::from_space(space, out)?)
}

/// Marker-qubit purification of the dephasing channel: |c⟩ ↦ |c⟩|χ_c⟩ with ⟨χ_0|χ_1⟩ = √(1−D²).
pub fn purify_dephasing(state: &LabeledVector, d: f64) -> Result<LabeledVector, SwitchError> {
    if !(0.0..=1.0).contains(&d) || d.is_nan() {
        return Err(SwitchError::BadDistinguishability(d));
    }
    let lambda = (1.0 - d * d).sqrt();
    let labels: Vec<&str> = state.space().labels().iter().map(String::as_str).collect();
    if !labels.contains(&"c") {
        return Err(SwitchError::MissingLabel("c"));
    }
    let dims = state.space().dims().to_vec();
    let amps = state.amplitudes_in(&labels)?;
    let pos = labels.iter().position(|l| *l == "c").expect("checked");
    let stride: usize = dims[pos + 1..].iter().product();
    let chi = [[cr(1.0), cr(0.0)], [cr(lambda), cr(d)]];
    let mut out = Vec::with_capacity(amps.len() * 2);
    for (i, a) in amps.iter().enumerate() {
        let cbit = (i / stride) % 2;
        out.push(a * chi[cbit][0]);
        out.push(a * chi[cbit][1]);
    }
    let mut l2 = labels.clone();
    l2.push("marker");
    let mut d2 = dims;
    d2.push(2);
    Ok(LabeledVector::new(&l2, &d2, out)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityReport {
    /// 2|⟨0|ρ_c|1⟩|.
    pub visibility: f64,
    /// √(1−V²), the saturating value.
    pub distinguishability: f64,
    /// Bloch-vector length of ρ_c, an upper bound on V.
    pub purity_bound: f64,
    /// ‖ρ₀₀ − ρ₁₁‖₁ for the order-conditioned blocks of the remaining systems.
    pub branch_distinguishability: f64,
}

/// Visibility and distinguishability of the control of a density over `c` and other labels.
pub fn duality(state: &LabeledOperator) -> Result<DualityReport, SwitchError> {
    let space = state.space();
    let pos = space.position("c").ok_or(SwitchError::MissingLabel("c"))?;
    let rest: Vec<&str> = space.labels().iter().map(String::as_str).filter(|l| *l != "c").collect();
    let mut order = vec!["c"];
    order.extend(&rest);
    let m = state.matrix_in(&order)?;
    let dr = state.matrix().rows() / space.dims()[pos];
    let block = |a: usize, b: usize| CMatrix::from_fn(dr, dr, |i, j| m[(a * dr + i, b * dr + j)]);
    let (b00, b01, b11) = (block(0, 0), block(0, 1), block(1, 1));
    let coherence = b01.trace();
    let v = (2.0 * coherence.norm()).min(1.0);
    let (p0, p1) = (b00.trace().re, b11.trace().re);
    let bloch = (4.0 * coherence.norm_sqr() + (p0 - p1).powi(2)).sqrt().min(1.0);
    let bd = trace_norm(&(&b00 - &b11))?;
    Ok(DualityReport {
        visibility: v,
        distinguishability: (1.0 - v * v).max(0.0).sqrt(),
        purity_bound: bloch,
        branch_distinguishability: bd.min(1.0),
    })
}

/// Schmidt coefficients of the control versus all other labels.
pub fn control_schmidt(state: &LabeledVector) -> Result<Vec<f64>, SwitchError> {
    let rest: Vec<&str> = state.space().labels().iter().map(String::as_str).filter(|l| *l != "c").collect();
    if rest.len() == state.space().len() {
        return Err(SwitchError::MissingLabel("c"));
    }
    let mut order = vec!["c"];
    order.extend(&rest);
    let amps = state.amplitudes_in(&order)?;
    let dr = amps.len() / 2;
    let m = CMatrix::from_vec(2, dr, amps);
    Ok(singular_values(&m)?)
}

/// X-basis projector on the control for outcome d (0 ↔ |+⟩).
pub fn control_x_projector(d: usize) -> CMatrix {
    let s = if d == 0 { 1.0 } else { -1.0 };
    CMatrix::from_rows([[cr(0.5), cr(0.5 * s)], [cr(0.5 * s), cr(0.5)]])
}

/// p[b][d] from a density over (a, c, s): ancilla in Z, control in X.
pub fn outcome_distribution(rho: &LabeledOperator) -> Result<[[f64; 2]; 2], SwitchError> {
    let m = rho.matrix_in(&["c", "s", "a"])?;
    let mut p = [[0.0; 2]; 2];
    for (d, row) in [control_x_projector(0), control_x_projector(1)].iter().enumerate() {
        for b in 0..2 {
            let mut acc = cr(0.0);
            // Tr[(Π_d ⊗ I ⊗ |b⟩⟨b|) ρ]
            for c1 in 0..2 {
                for c2 in 0..2 {
                    let w = row[(c1, c2)];
                    for s in 0..2 {
                        acc += w * m[(c2 * 4 + s * 2 + b, c1 * 4 + s * 2 + b)];
                    }
                }
            }
            p[b][d] = acc.re.max(0.0);
        }
    }
    Ok(p)
}

/// p[b][d] for a catalog setting with control dephasing D.
pub fn switch_probabilities(setting: &ExperimentSetting, d: f64) -> Result<[[f64; 2]; 2], SwitchError> {
    let rho = dephase_control(&setting_state(setting).to_density(), d)?;
    outcome_distribution(&rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::c;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn ket(label: &str, a: C64, b: C64) -> LabeledVector {
        LabeledVector::qubit(label, [a, b])
    }

    fn ancilla_z(v: &LabeledVector) -> f64 {
        let z = LabeledOperator::single("a", gates::pauli_z()).unwrap();
        z.expectation(v).unwrap().re
    }

    #[test]
    fn identity_basis_copies_populations() {
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let out = von_neumann(&ket("s", a, b), &gates::id2()).unwrap();
        assert!((ancilla_z(&out) - (a.norm_sqr() - b.norm_sqr())).abs() < 1e-14);
        let zero = von_neumann(&ket("s", cr(1.0), cr(0.0)), &gates::id2()).unwrap();
        assert!((zero.amplitudes_in(&["s", "a"]).unwrap()[0] - cr(1.0)).norm() < 1e-15);
    }

    #[test]
    fn hadamard_on_diagonal_state() {
        let out = von_neumann(&ket("s", cr(S), cr(S)), &gates::hadamard()).unwrap();
        assert!((ancilla_z(&out) - 1.0).abs() < 1e-14);
        let sv = singular_values(&CMatrix::from_vec(2, 2, out.amplitudes_in(&["s", "a"]).unwrap())).unwrap();
        assert!(sv[1] < 1e-12);
    }

    #[test]
    fn non_unitary_basis_rejected() {
        let bad = CMatrix::diag(&[cr(1.0), cr(0.5)]);
        assert!(matches!(von_neumann(&ket("s", cr(1.0), cr(0.0)), &bad), Err(SwitchError::NotUnitary(_))));
    }

    #[test]
    fn identity_alice_erases_which_path() {
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let st = BobStation::projective(&gates::id2()).unwrap();
        let out = switch_evolve(&gates::id2(), &st, &ket("s", a, b), &ket("c", cr(S), cr(S))).unwrap();
        let rho_c = out.to_density().partial_trace(&["c"]).unwrap();
        assert!((rho_c.matrix()[(0, 1)].norm() - 0.5).abs() < 1e-14);
        let sch = control_schmidt(&out).unwrap();
        assert!(sch[1] < 1e-8);
        let want = [a, cr(0.0), cr(0.0), b];
        let plus = ket("c", cr(S), cr(S));
        let rest = out.project_onto(&plus).unwrap().amplitudes_in(&["s", "a"]).unwrap();
        for (x, w) in rest.iter().zip(want) {
            assert!((x - w).norm() < 1e-14);
        }
    }

    #[test]
    fn sigma_z_alice_relative_sign() {
        let st = BobStation::projective(&gates::id2()).unwrap();
        let out = switch_evolve(&gates::pauli_z(), &st, &ket("s", cr(S), cr(S)), &ket("c", cr(S), cr(S))).unwrap();
        let rho_c = out.to_density().partial_trace(&["c"]).unwrap();
        let direct = rho_c.matrix()[(0, 1)].norm();
        // commutator structure: Z commutes with Z-basis VN, so branches coincide
        let [b0, b1] = branch_vectors(&gates::pauli_z(), &st, [cr(S), cr(S)]);
        let overlap: C64 = b0.iter().zip(&b1).map(|(x, y)| x.conj() * y).sum();
        assert!((direct - 0.5 * overlap.norm()).abs() < 1e-14);
        assert!(control_schmidt(&out).unwrap()[1] < 1e-8);
    }

    #[test]
    fn control_zero_is_alice_then_bob() {
        let st = BobStation::projective(&gates::hadamard()).unwrap();
        let u = crate::settings::alice_unitary((45.0, 0.0, 90.0));
        let out = switch_evolve(&u, &st, &ket("s", cr(0.6), cr(0.8)), &ket("c", cr(1.0), cr(0.0))).unwrap();
        let seq = von_neumann_with(&LabeledVector::qubit("s", {
            let v = u.matvec(&[cr(0.6), cr(0.8)]);
            [v[0], v[1]]
        }), &st)
        .unwrap();
        let b0 = out.project_onto(&ket("c", cr(1.0), cr(0.0))).unwrap();
        assert!((b0.inner(&seq).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dephasing_limits() {
        let s = ExperimentSetting::new(2, 1, 1, 3).unwrap();
        let rho = setting_state(&s).to_density();
        assert_eq!(dephase_control(&rho, 0.0).unwrap(), rho);
        let full = dephase_control(&rho, 1.0).unwrap();
        assert!(duality(&full).unwrap().visibility < 1e-15);
        assert!(matches!(dephase_control(&rho, 1.5), Err(SwitchError::BadDistinguishability(_))));
    }

    #[test]
    fn fig4_visibility_and_distinguishability() {
        let s = ExperimentSetting::new(1, 1, 1, 1).unwrap();
        let rho = dephase_control(&setting_state(&s).to_density(), 0.29).unwrap();
        let rep = duality(&rho).unwrap();
        assert!((rep.visibility - 0.957).abs() < 5e-4, "{}", rep.visibility);
        assert!((rep.distinguishability - 0.29).abs() < 1e-3);
    }

    #[test]
    fn duality_trivial_cases() {
        let plus = ket("c", cr(S), cr(S));
        let rest = ket("s", cr(0.6), cr(0.8));
        let v = crate::qmath::tensor(&[&plus, &rest]).unwrap();
        let rep = duality(&v.to_density()).unwrap();
        assert!((rep.visibility - 1.0).abs() < 1e-14 && rep.distinguishability < 1e-6);
        let mixed = dephase_control(&v.to_density(), 1.0).unwrap();
        let rep = duality(&mixed).unwrap();
        assert!(rep.visibility < 1e-14 && (rep.distinguishability - 1.0).abs() < 1e-14);
    }
}
