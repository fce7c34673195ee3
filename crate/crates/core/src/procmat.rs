//! Process matrices on {P, A_I, A_O, B_I, B_O, F_t, F_c}, instruments and the Born rule.
//!
//! Choi operators follow Σ|i⟩⟨j| ⊗ M(|i⟩⟨j|) with the input factor first, and
//! p = Tr[(ρᵀ ⊗ Aᵀ ⊗ Bᵀ ⊗ D) W]. With link-vector construction Tr W_switch = 8.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qmath::random::isometry;
use crate::qmath::{cr, link_vector, tensor, CMatrix, LabeledOperator, LabeledVector, QmathError, Space, C64};
use crate::settings::{ExperimentSetting, OutcomeKey, ProbabilityTable};

pub const P: &str = "P";
pub const A_I: &str = "A_I";
pub const A_O: &str = "A_O";
pub const B_I: &str = "B_I";
pub const B_O: &str = "B_O";
pub const F_T: &str = "F_t";
pub const F_C: &str = "F_c";
pub const LABELS: [&str; 7] = [P, A_I, A_O, B_I, B_O, F_T, F_C];

/// Normalization of every ordered or switch process built here.
pub const TRACE_W: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcmatError {
    #[error("{party:?} has no setting {setting} / outcome {outcome}")]
    OutOfCatalog { party: Party, setting: usize, outcome: usize },
    #[error("instrument elements must cover each party exactly once (got {0:?})")]
    PartyCoverage(Vec<Party>),
    #[error("mixing weight {0} outside [0, 1]")]
    BadWeight(f64),
    #[error("process is not compatible with order {0:?} (deviation {1:e})")]
    NotOrdered(Order, f64),
    #[error("operator does not live on the process space: {0}")]
    WrongSpace(String),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Prep,
    Alice,
    Bob,
    Detect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    AThenB,
    BThenA,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcessKind {
    PureSwitch,
    Ordered(Order),
    Mixture,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    pub op: LabeledOperator,
    pub kind: ProcessKind,
}

pub fn process_space() -> Space {
    Space::qubits(&LABELS).expect("distinct labels")
}

impl ProcessMatrix {
    pub fn custom(op: LabeledOperator) -> Result<Self, ProcmatError> {
        if op.space() != &process_space() {
            return Err(ProcmatError::WrongSpace(op.space().to_string()));
        }
        Ok(Self { op, kind: ProcessKind::Custom })
    }
}

fn link(a: &str, b: &str) -> LabeledVector {
    link_vector(a, b, 2).expect("qubit link")
}

fn branch_vector(order: Order) -> LabeledVector {
    let (first_in, first_out, second_in, second_out, fc) = match order {
        Order::AThenB => (A_I, A_O, B_I, B_O, 0),
        Order::BThenA => (B_I, B_O, A_I, A_O, 1),
    };
    let f = LabeledVector::basis(F_C, 2, fc).expect("qubit basis");
    tensor(&[&link(P, first_in), &link(first_out, second_in), &link(second_out, F_T), &f]).expect("disjoint")
}

/// (|w_AB⟩ + |w_BA⟩)/√2.
pub fn switch_vector() -> LabeledVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    branch_vector(Order::AThenB).add(&branch_vector(Order::BThenA)).expect("same space").scale(cr(h))
}

pub fn w_switch() -> ProcessMatrix {
    ProcessMatrix { op: switch_vector().to_density(), kind: ProcessKind::PureSwitch }
}

/// Definite-order reduction of the switch.
pub fn w_ordered(order: Order) -> ProcessMatrix {
    ProcessMatrix { op: branch_vector(order).to_density(), kind: ProcessKind::Ordered(order) }
}

/// Switch with order coherence multiplied by √(1−D²).
pub fn w_switch_dephased(d: f64) -> Result<ProcessMatrix, ProcmatError> {
    if !(0.0..=1.0).contains(&d) || d.is_nan() {
        return Err(ProcmatError::BadWeight(d));
    }
    let lambda = (1.0 - d * d).sqrt();
    let w0 = branch_vector(Order::AThenB);
    let w1 = branch_vector(Order::BThenA);
    let (a, b) = (w0.amplitudes(), w1.amplitudes());
    let m = CMatrix::from_fn(a.len(), a.len(), |i, j| {
        (a[i] * a[j].conj() + b[i] * b[j].conj() + (a[i] * b[j].conj() + b[i] * a[j].conj()) * lambda) * 0.5
    });
    let kind = if d == 0.0 { ProcessKind::PureSwitch } else { ProcessKind::Custom };
    Ok(ProcessMatrix { op: LabeledOperator::from_space(w0.space().clone(), m)?, kind })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstrumentElement {
    pub party: Party,
    pub setting: usize,
    pub outcome: usize,
    pub choi: LabeledOperator,
}

/// |K⟩⟩ = Σ_i |i⟩_in ⊗ K|i⟩_out.
pub fn choi_vector(k: &CMatrix, input: &str, output: &str) -> LabeledVector {
    let (din, dout) = (k.cols(), k.rows());
    let mut amps = vec![cr(0.0); din * dout];
    for i in 0..din {
        for o in 0..dout {
            amps[i * dout + o] = k[(o, i)];
        }
    }
    LabeledVector::new(&[input, output], &[din, dout], amps).expect("distinct labels")
}

pub fn kraus_choi(k: &CMatrix, input: &str, output: &str) -> LabeledOperator {
    choi_vector(k, input, output).to_density()
}

/// Bob's setting index folds (y, r) as 3·(y−1) + r ∈ 1..=6.
pub fn bob_setting_index(y: usize, r: usize) -> usize {
    3 * (y - 1) + r
}

/// Catalog instrument element.
pub fn instrument(party: Party, setting: usize, outcome: usize) -> Result<InstrumentElement, ProcmatError> {
    let bad = || ProcmatError::OutOfCatalog { party, setting, outcome };
    let choi = match party {
        Party::Prep => {
            if !(1..=3).contains(&setting) || outcome != 0 {
                return Err(bad());
            }
            let psi = ExperimentSetting::new(setting, 1, 1, 1).map_err(|_| bad())?.input_state();
            LabeledOperator::single(P, CMatrix::outer(&psi, &psi))?
        }
        Party::Alice => {
            if !(1..=10).contains(&setting) || outcome != 0 {
                return Err(bad());
            }
            let u = ExperimentSetting::new(1, 1, 1, setting).map_err(|_| bad())?.alice_unitary();
            kraus_choi(&u, A_I, A_O)
        }
        Party::Bob => {
            if !(1..=6).contains(&setting) || outcome > 1 {
                return Err(bad());
            }
            let (y, r) = ((setting - 1) / 3 + 1, (setting - 1) % 3 + 1);
            let k = ExperimentSetting::new(1, y, r, 1).map_err(|_| bad())?.bob_kraus(outcome);
            kraus_choi(&k, B_I, B_O)
        }
        Party::Detect => {
            if setting != 1 || outcome > 1 {
                return Err(bad());
            }
            let s = if outcome == 0 { 0.5 } else { -0.5 };
            let pm = CMatrix::from_rows([[cr(0.5), cr(s)], [cr(s), cr(0.5)]]);
            let fc = LabeledOperator::single(F_C, pm)?;
            let ft = LabeledOperator::single(F_T, CMatrix::identity(2))?;
            tensor(&[&ft, &fc])?
        }
    };
    Ok(InstrumentElement { party, setting, outcome, choi })
}

/// The four elements for one outcome of a catalog setting, in party order.
pub fn setting_elements(setting: &ExperimentSetting, b: usize, d: usize) -> [InstrumentElement; 4] {
    let get = |p, s, o| instrument(p, s, o).expect("catalog element");
    [
        get(Party::Prep, setting.z, 0),
        get(Party::Alice, setting.x, 0),
        get(Party::Bob, bob_setting_index(setting.y, setting.r), b),
        get(Party::Detect, 1, d),
    ]
}

/// Process-side operator ρᵀ ⊗ Aᵀ ⊗ Bᵀ ⊗ D whose trace against W is the probability.
pub fn outcome_operator(elements: &[InstrumentElement]) -> Result<LabeledOperator, ProcmatError> {
    let mut parties: Vec<Party> = elements.iter().map(|e| e.party).collect();
    parties.sort();
    if parties != [Party::Prep, Party::Alice, Party::Bob, Party::Detect] {
        return Err(ProcmatError::PartyCoverage(elements.iter().map(|e| e.party).collect()));
    }
    let ts: Vec<LabeledOperator> = elements.iter().map(|e| e.choi.transpose()).collect();
    let refs: Vec<&LabeledOperator> = ts.iter().collect();
    let op = tensor(&refs)?;
    if op.space() != &process_space() {
        return Err(ProcmatError::WrongSpace(op.space().to_string()));
    }
    Ok(op)
}

pub fn probability(w: &ProcessMatrix, elements: &[InstrumentElement]) -> Result<f64, ProcmatError> {
    let e = outcome_operator(elements)?;
    let p = e.trace_product(&w.op)?.re;
    Ok(p.clamp(0.0, 1.0))
}

/// p[b][d] for one catalog setting.
pub fn setting_probabilities(w: &ProcessMatrix, setting: &ExperimentSetting) -> Result<[[f64; 2]; 2], ProcmatError> {
    let mut p = [[0.0; 2]; 2];
    for (b, row) in p.iter_mut().enumerate() {
        for (d, v) in row.iter_mut().enumerate() {
            *v = probability(w, &setting_elements(setting, b, d))?;
        }
    }
    Ok(p)
}

pub fn probability_table(w: &ProcessMatrix) -> Result<ProbabilityTable, ProcmatError> {
    let mut t = ProbabilityTable::new();
    for s in crate::settings::enumerate_settings() {
        let p = setting_probabilities(w, &s)?;
        for (b, row) in p.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                t.insert(OutcomeKey::new(&s, b, d), v);
            }
        }
    }
    Ok(t)
}

/// Tr_X(M) ⊗ 𝟙_X / d_X for a set of labels X.
pub fn trace_replace(m: &LabeledOperator, labels: &[&str]) -> Result<LabeledOperator, ProcmatError> {
    let keep: Vec<&str> =
        m.space().labels().iter().map(String::as_str).filter(|l| !labels.contains(l)).collect();
    let reduced = m.partial_trace(&keep)?;
    let d: usize = labels.iter().map(|l| m.space().dim_of(l).unwrap_or(1)).product();
    Ok(reduced.embed(m.space())?.scale_real(1.0 / d as f64))
}

/// Orthogonal projection onto the span of processes compatible with `order`.
pub fn project_ordered(m: &LabeledOperator, order: Order) -> Result<LabeledOperator, ProcmatError> {
    if m.space() != &process_space() {
        return Err(ProcmatError::WrongSpace(m.space().to_string()));
    }
    let (x_i, x_o, y_i, y_o) = match order {
        Order::AThenB => (A_I, A_O, B_I, B_O),
        Order::BThenA => (B_I, B_O, A_I, A_O),
    };
    let chain: [&[&str]; 6] = [
        &[F_T, F_C],
        &[y_o, F_T, F_C],
        &[y_i, y_o, F_T, F_C],
        &[x_o, y_i, y_o, F_T, F_C],
        &[x_i, x_o, y_i, y_o, F_T, F_C],
        &[P, x_i, x_o, y_i, y_o, F_T, F_C],
    ];
    let mut out = m.clone();
    for (k, labels) in chain.iter().enumerate() {
        let t = trace_replace(m, labels)?;
        out = if k % 2 == 0 { out.sub(&t)? } else { out.add(&t)? };
    }
    Ok(out)
}

/// p·W_AB + (1−p)·W_BA after checking both orders.
pub fn mix_orders(p: f64, w_ab: &ProcessMatrix, w_ba: &ProcessMatrix) -> Result<ProcessMatrix, ProcmatError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(ProcmatError::BadWeight(p));
    }
    for (w, order) in [(w_ab, Order::AThenB), (w_ba, Order::BThenA)] {
        let dev = project_ordered(&w.op, order)?.max_abs_diff(&w.op)?;
        if dev > 1e-9 {
            return Err(ProcmatError::NotOrdered(order, dev));
        }
    }
    let op = w_ab.op.scale_real(p).add(&w_ba.op.scale_real(1.0 - p))?;
    Ok(ProcessMatrix { op, kind: ProcessKind::Mixture })
}

/// Random ordered process: isometries P→(first_in, M1), (first_out, M1)→(second_in, M2),
/// (second_out, M2)→(F_t, F_c, E), with the environment E traced out.
pub fn random_ordered<R: Rng + ?Sized>(rng: &mut R, order: Order, env_dim: usize) -> ProcessMatrix {
    let (x_i, x_o, y_i, y_o) = match order {
        Order::AThenB => (A_I, A_O, B_I, B_O),
        Order::BThenA => (B_I, B_O, A_I, A_O),
    };
    let env_dim = env_dim.max(1);
    let v1 = isometry(rng, 4, 2);
    let v2 = isometry(rng, 4, 4);
    let v3 = isometry(rng, 4 * env_dim, 4);
    let vec1 = iso_vector(&v1, &[(P, 2)], &[(x_i, 2), ("M1o", 2)]);
    let vec2 = iso_vector(&v2, &[(x_o, 2), ("M1i", 2)], &[(y_i, 2), ("M2o", 2)]);
    let vec3 = iso_vector(&v3, &[(y_o, 2), ("M2i", 2)], &[(F_T, 2), (F_C, 2), ("E", env_dim)]);
    let joint = tensor(&[&vec1, &vec2, &vec3]).expect("disjoint labels");
    let contracted = joint
        .project_onto(&link("M1o", "M1i"))
        .and_then(|v| v.project_onto(&link("M2o", "M2i")))
        .expect("links present");
    let mut keep: Vec<&str> = LABELS.to_vec();
    keep.sort();
    let w = contracted.to_density().partial_trace(&keep).expect("labels present");
    ProcessMatrix { op: w, kind: ProcessKind::Ordered(order) }
}

/// Choi vector of an isometry with multi-label input and output.
fn iso_vector(v: &CMatrix, ins: &[(&str, usize)], outs: &[(&str, usize)]) -> LabeledVector {
    let din: usize = ins.iter().map(|x| x.1).product();
    let dout: usize = outs.iter().map(|x| x.1).product();
    assert_eq!((v.rows(), v.cols()), (dout, din));
    let mut amps = vec![C64::new(0.0, 0.0); din * dout];
    for i in 0..din {
        for o in 0..dout {
            amps[i * dout + o] = v[(o, i)];
        }
    }
    let labels: Vec<&str> = ins.iter().chain(outs).map(|x| x.0).collect();
    let dims: Vec<usize> = ins.iter().chain(outs).map(|x| x.1).collect();
    LabeledVector::new(&labels, &dims, amps).expect("distinct labels")
}

/// Random causally separable process p·W_AB + (1−p)·W_BA.
pub fn random_separable<R: Rng + ?Sized>(rng: &mut R) -> ProcessMatrix {
    let p: f64 = rng.random();
    let e1 = rng.random_range(1..=3);
    let e2 = rng.random_range(1..=3);
    let ab = random_ordered(rng, Order::AThenB, e1);
    let ba = random_ordered(rng, Order::BThenA, e2);
    mix_orders(p, &ab, &ba).expect("ordered by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::settings::enumerate_settings;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn switch_is_rank_one_with_trace_eight() {
        let w = w_switch();
        assert!((w.op.trace().re - TRACE_W).abs() < 1e-12);
        let ev = crate::qmath::linalg::eigvalsh(w.op.matrix()).unwrap();
        assert_eq!(ev.iter().filter(|v| v.abs() > 1e-9).count(), 1);
    }

    #[test]
    fn all_settings_normalized() {
        let w = w_switch();
        for s in enumerate_settings() {
            let p = setting_probabilities(&w, &s).unwrap();
            let total: f64 = p.iter().flatten().sum();
            assert!((total - 1.0).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn ordered_identity_z_measurement() {
        let w = w_ordered(Order::AThenB);
        let s = ExperimentSetting::new(1, 1, 1, 1).unwrap();
        let p = setting_probabilities(&w, &s).unwrap();
        assert!((p[0][0] + p[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn completeness_of_bob_and_detector() {
        for bs in 1..=6 {
            let sum = instrument(Party::Bob, bs, 0).unwrap().choi.add(&instrument(Party::Bob, bs, 1).unwrap().choi).unwrap();
            // trace preserving: Tr_out Choi = 𝟙_in
            let red = sum.partial_trace(&[B_I]).unwrap();
            assert!(red.matrix().max_abs_diff(&CMatrix::identity(2)) < 1e-12);
        }
        let d = instrument(Party::Detect, 1, 0).unwrap().choi.add(&instrument(Party::Detect, 1, 1).unwrap().choi).unwrap();
        assert!(d.matrix().max_abs_diff(&CMatrix::identity(4)) < 1e-15);
        assert!(instrument(Party::Alice, 11, 0).is_err());
        assert!(instrument(Party::Bob, 1, 2).is_err());
    }

    #[test]
    fn alice_row_one_is_identity_choi() {
        let a = instrument(Party::Alice, 1, 0).unwrap();
        let want = link(A_I, A_O).to_density();
        assert!(a.choi.max_abs_diff(&want).unwrap() < 1e-15);
    }

    #[test]
    fn projectors_fix_ordered_and_move_switch() {
        for order in [Order::AThenB, Order::BThenA] {
            let w = w_ordered(order);
            assert!(project_ordered(&w.op, order).unwrap().max_abs_diff(&w.op).unwrap() < 1e-12);
        }
        let w = w_switch().op;
        let diff = project_ordered(&w, Order::AThenB).unwrap().sub(&w).unwrap();
        assert!(diff.matrix().frobenius_norm() > 0.1);
    }

    #[test]
    fn random_ordered_are_fixed_points_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for order in [Order::AThenB, Order::BThenA] {
            let w = random_ordered(&mut rng, order, 2);
            assert!(project_ordered(&w.op, order).unwrap().max_abs_diff(&w.op).unwrap() < 1e-10);
            assert!((w.op.trace().re - TRACE_W).abs() < 1e-10);
            let s = ExperimentSetting::new(3, 2, 2, 7).unwrap();
            let total: f64 = setting_probabilities(&w, &s).unwrap().iter().flatten().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn full_dephasing_is_even_mixture() {
        let w1 = w_switch_dephased(1.0).unwrap();
        let mix = mix_orders(0.5, &w_ordered(Order::AThenB), &w_ordered(Order::BThenA)).unwrap();
        assert!(w1.op.max_abs_diff(&mix.op).unwrap() < 1e-15);
        assert!(mix_orders(1.2, &w_ordered(Order::AThenB), &w_ordered(Order::BThenA)).is_err());
        assert!(mix_orders(0.5, &w_switch(), &w_ordered(Order::BThenA)).is_err());
    }

    #[test]
    fn missing_party_rejected() {
        let s = ExperimentSetting::new(1, 1, 1, 1).unwrap();
        let e = setting_elements(&s, 0, 0);
        assert!(matches!(probability(&w_switch(), &e[..3]), Err(ProcmatError::PartyCoverage(_))));
    }
}
