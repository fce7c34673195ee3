//! Causal witnesses: optimization over the accessible operator span, dual-cone
//! membership and evaluation from probability tables.
//!
//! A witness S satisfies Tr(S W) ≥ 0 for every causally separable W. Here that is
//! enforced as S + N_i ⪰ 0 with N_i in the orthogonal complement of each ordered span,
//! normalized by Tr(S Ω) ≤ 1 for the white-noise process Ω = 𝟙/16 (so 𝒞_W is a
//! random-noise robustness). Every S in the outcome span is 𝟙 on F_t and diagonal in the
//! X basis of F_c, which splits each constraint into two 32-side blocks.

pub mod sdp;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sdp::{sdp_solve, Atoms, Certificate, Coupling, SdpBlock, SdpError, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

use crate::procmat::{self, kraus_choi, Order, ProcessMatrix, A_I, A_O, B_I, B_O, F_C, F_T, P};
use crate::qmath::linalg::eigh;
use crate::qmath::pauli::{from_pauli_coords, pauli_coords};
use crate::qmath::{cr, tensor, CMatrix, LabeledOperator, QmathError};
use crate::settings::{ExperimentSetting, OutcomeKey, ProbabilityTable};

/// Canonical order of the five local labels once F is split off.
pub const LOCAL_LABELS: [&str; 5] = [A_I, A_O, B_I, B_O, P];
const LOCAL_DIM: usize = 32;
const LOCAL_STRINGS: usize = 1024;
/// Tr Ω for Ω = 𝟙/16 reduces to Σ± Tr(S±)/8.
const NORMALIZATION_WEIGHT: f64 = 1.0 / 8.0;
pub const NORMALIZATION: &str = "random robustness: Tr(S·1/16) <= 1 on the 128-dimensional process space";
/// Reference optimum for the ideal switch over the full catalog.
pub const IDEAL_VALUE: f64 = -0.4248;
pub const IDEAL_TOLERANCE: f64 = 5e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WitnessError {
    #[error("span is empty or references settings outside the catalog: {0}")]
    BadSpan(String),
    #[error("operator is not a Hermitian operator on the process space")]
    NotProcessOperator,
    #[error("solver stopped with status {status:?} after {iterations} iterations")]
    Solver { status: SdpStatus, iterations: usize },
    #[error("index sets differ: missing {missing:?}, unexpected {extra:?}")]
    KeyMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Local {
    AI = 0,
    AO = 1,
    BI = 2,
    BO = 3,
}

fn has(idx: usize, q: Local) -> bool {
    (idx >> (2 * (4 - q as usize))) & 3 != 0
}

/// Local strings (F factor identity) in the complement of the `order` span.
pub fn ordered_complement(order: Order) -> Vec<usize> {
    let (xi, xo, yi, yo) = match order {
        Order::AThenB => (Local::AI, Local::AO, Local::BI, Local::BO),
        Order::BThenA => (Local::BI, Local::BO, Local::AI, Local::AO),
    };
    (1..LOCAL_STRINGS)
        .filter(|&s| {
            let second_input_only = has(s, yi) && !has(s, yo);
            let first_input_and_past = has(s, xi) && !has(s, xo) && !has(s, yi) && !has(s, yo);
            !(second_input_only || first_input_and_past)
        })
        .collect()
}

/// Local strings in the complement of the valid-process span.
pub fn valid_complement() -> Vec<usize> {
    (1..LOCAL_STRINGS)
        .filter(|&s| !((has(s, Local::AI) && !has(s, Local::AO)) || (has(s, Local::BI) && !has(s, Local::BO))))
        .collect()
}

/// Embeds a local string into the 7-qubit canonical order (A_I, A_O, B_I, B_O, F_c, F_t, P).
pub fn lift_string(s: usize) -> usize {
    let high = s >> 2;
    let p = s & 3;
    (high << 6) | p
}

/// Settings whose outcome operators form the witness span.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessSpan {
    pub inputs: Vec<usize>,
    pub alice: Vec<usize>,
    /// (y, r) pairs.
    pub bob: Vec<(usize, usize)>,
}

impl WitnessSpan {
    pub fn full() -> Self {
        Self {
            inputs: (1..=3).collect(),
            alice: (1..=10).collect(),
            bob: (1..=2).flat_map(|y| (1..=3).map(move |r| (y, r))).collect(),
        }
    }

    pub fn with_alice(alice: Vec<usize>) -> Self {
        Self { alice, ..Self::full() }
    }

    fn validate(&self) -> Result<(), WitnessError> {
        let ok = !self.inputs.is_empty()
            && !self.alice.is_empty()
            && !self.bob.is_empty()
            && self.inputs.iter().all(|z| (1..=3).contains(z))
            && self.alice.iter().all(|x| (1..=10).contains(x))
            && self.bob.iter().all(|(y, r)| (1..=2).contains(y) && (1..=3).contains(r));
        if ok {
            Ok(())
        } else {
            Err(WitnessError::BadSpan(format!("{self:?}")))
        }
    }

    pub fn keys(&self) -> Vec<OutcomeKey> {
        let mut v = Vec::new();
        for &z in &self.inputs {
            for &(y, r) in &self.bob {
                for &x in &self.alice {
                    let s = ExperimentSetting::new(z, y, r, x).expect("validated");
                    for b in 0..2 {
                        for d in 0..2 {
                            v.push(OutcomeKey::new(&s, b, d));
                        }
                    }
                }
            }
        }
        v.sort();
        v
    }
}

/// Span of one tensor factor: operator coordinates, orthonormal basis and pseudo-inverse.
struct Factor {
    coords_len: usize,
    /// Orthonormal basis in plain Pauli coordinates (rank × coords_len).
    basis: Vec<Vec<f64>>,
    /// Pseudo-inverse (n_ops × coords_len).
    pinv: Vec<Vec<f64>>,
}

impl Factor {
    fn new(ops: &[CMatrix]) -> Self {
        let coords: Vec<Vec<f64>> = ops.iter().map(pauli_coords).collect();
        let n = coords.len();
        let len = coords[0].len();
        let gram = CMatrix::from_fn(n, n, |k, l| cr(coords[k].iter().zip(&coords[l]).map(|(a, b)| a * b).sum()));
        let (vals, vecs) = eigh(&gram).expect("real symmetric Gram matrix");
        let top = vals.iter().cloned().fold(0.0, f64::max);
        let mut basis = Vec::new();
        let mut pinv = vec![vec![0.0; len]; n];
        for (j, &lam) in vals.iter().enumerate() {
            if lam <= 1e-10 * top {
                continue;
            }
            let s = lam.sqrt();
            let u: Vec<f64> = (0..len).map(|p| (0..n).map(|k| coords[k][p] * vecs[(k, j)].re).sum::<f64>() / s).collect();
            for (k, row) in pinv.iter_mut().enumerate() {
                let vk = vecs[(k, j)].re / s;
                for (r, up) in row.iter_mut().zip(&u) {
                    *r += vk * up;
                }
            }
            basis.push(u);
        }
        Self { coords_len: len, basis, pinv }
    }

    fn rank(&self) -> usize {
        self.basis.len()
    }
}

struct SpanBasis {
    alice: Factor,
    bob: Factor,
    prep: Factor,
    /// Plain Pauli coordinates (1024) of each HS-normalized product basis element.
    elements: Vec<Vec<f64>>,
}

fn kron3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len() * c.len());
    for x in a {
        for y in b {
            for z in c {
                out.push(x * y * z);
            }
        }
    }
    out
}

impl SpanBasis {
    fn new(span: &WitnessSpan) -> Self {
        let alice_ops: Vec<CMatrix> = span
            .alice
            .iter()
            .map(|&x| {
                let u = ExperimentSetting::new(1, 1, 1, x).expect("validated").alice_unitary();
                kraus_choi(&u, A_I, A_O).transpose().into_matrix()
            })
            .collect();
        let bob_ops: Vec<CMatrix> = span
            .bob
            .iter()
            .flat_map(|&(y, r)| {
                let s = ExperimentSetting::new(1, y, r, 1).expect("validated");
                (0..2).map(move |b| kraus_choi(&s.bob_kraus(b), B_I, B_O).transpose().into_matrix())
            })
            .collect();
        let prep_ops: Vec<CMatrix> = span
            .inputs
            .iter()
            .map(|&z| {
                let psi = ExperimentSetting::new(z, 1, 1, 1).expect("validated").input_state();
                CMatrix::outer(&psi, &psi).transpose()
            })
            .collect();
        let (alice, bob, prep) = (Factor::new(&alice_ops), Factor::new(&bob_ops), Factor::new(&prep_ops));
        // plain coordinates of an HS-unit element: u / √dim per factor
        let mut elements = Vec::with_capacity(alice.rank() * bob.rank() * prep.rank());
        for a in &alice.basis {
            for b in &bob.basis {
                for c in &prep.basis {
                    let mut e = kron3(a, b, c);
                    let norm = 1.0 / (LOCAL_DIM as f64).sqrt();
                    e.iter_mut().for_each(|v| *v *= norm);
                    elements.push(e);
                }
            }
        }
        Self { alice, bob, prep, elements }
    }

    fn rank(&self) -> usize {
        self.elements.len()
    }

    fn n_ops(&self) -> usize {
        self.alice.pinv.len() * self.bob.pinv.len() * self.prep.pinv.len()
    }

    /// Minimum-norm coefficients over (alice op, bob op, prep op) reproducing local coordinates.
    fn coefficients(&self, coords: &[f64]) -> Vec<f64> {
        let (la, lb, lp) = (self.alice.coords_len, self.bob.coords_len, self.prep.coords_len);
        let (na, nb, np) = (self.alice.pinv.len(), self.bob.pinv.len(), self.prep.pinv.len());
        // contract prep mode
        let mut t1 = vec![0.0; la * lb * np];
        for ab in 0..la * lb {
            for (k, row) in self.prep.pinv.iter().enumerate() {
                t1[ab * np + k] = (0..lp).map(|p| row[p] * coords[ab * lp + p]).sum();
            }
        }
        // contract bob mode
        let mut t2 = vec![0.0; la * nb * np];
        for a in 0..la {
            for (j, row) in self.bob.pinv.iter().enumerate() {
                for k in 0..np {
                    t2[(a * nb + j) * np + k] = (0..lb).map(|q| row[q] * t1[(a * lb + q) * np + k]).sum();
                }
            }
        }
        let mut out = vec![0.0; na * nb * np];
        for (i, row) in self.alice.pinv.iter().enumerate() {
            for jk in 0..nb * np {
                out[i * nb * np + jk] = (0..la).map(|a| row[a] * t2[a * nb * np + jk]).sum();
            }
        }
        out
    }
}

fn plus_minus(d: usize) -> CMatrix {
    let s = if d == 0 { 0.5 } else { -0.5 };
    CMatrix::from_rows([[cr(0.5), cr(s)], [cr(s), cr(0.5)]])
}

/// ⟨±|Tr_{F_t} W|±⟩ on the local labels.
pub fn reduced_blocks(w: &LabeledOperator) -> Result<[CMatrix; 2], WitnessError> {
    let mut keep: Vec<&str> = LOCAL_LABELS.to_vec();
    keep.push(F_C);
    let red = w.partial_trace(&keep)?;
    let mut out = [CMatrix::zeros(LOCAL_DIM, LOCAL_DIM), CMatrix::zeros(LOCAL_DIM, LOCAL_DIM)];
    for (d, block) in out.iter_mut().enumerate() {
        let proj = LabeledOperator::single(F_C, plus_minus(d))?;
        let r = red.compose(&proj)?.partial_trace(&LOCAL_LABELS)?;
        *block = r.matrix_in(&LOCAL_LABELS)?;
    }
    Ok(out)
}

/// Rebuilds the process-space operator S₊ ⊗ |+⟩⟨+| + S₋ ⊗ |−⟩⟨−| (⊗ 𝟙 on F_t).
pub fn assemble_blocks(blocks: &[CMatrix; 2]) -> Result<LabeledOperator, WitnessError> {
    let dims = [2usize; 5];
    let ft = LabeledOperator::single(F_T, CMatrix::identity(2))?;
    let mut total: Option<LabeledOperator> = None;
    for (d, block) in blocks.iter().enumerate() {
        let local = LabeledOperator::new(&LOCAL_LABELS, &dims, block.clone())?;
        let fc = LabeledOperator::single(F_C, plus_minus(d))?;
        let term = tensor(&[&local, &fc, &ft])?;
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term)?,
        });
    }
    Ok(total.expect("two blocks"))
}

fn check_process_operator(s: &LabeledOperator) -> Result<(), WitnessError> {
    if s.space() != &procmat::process_space() || !s.matrix().is_hermitian(1e-9) {
        return Err(WitnessError::NotProcessOperator);
    }
    Ok(())
}

/// α coefficients keyed by outcome.
/// Assumptions behind the reported witness value.
pub fn convention_report() -> String {
    let lines = [
        format!("normalization: {NORMALIZATION}"),
        "feasible set: S + N_i >= 0 with N_i supported on the Pauli strings killed by each ordered projector".into(),
        "parameterization: S restricted to the span of the 720 outcome operators of the 180 catalog settings".into(),
        "symmetry: S reduced to identity on F_t and the |+>,|-> sectors of F_c".into(),
        "born rule: p = Tr[(rho^T (x) A^T (x) B^T (x) D) W], Tr W = 8".into(),
        format!("expected ideal value {IDEAL_VALUE} within {IDEAL_TOLERANCE}"),
        "alternative normalization Tr(S Omega) <= 1 for every valid Omega gives about -0.198".into(),
    ];
    lines.join("\n")
}

pub type AlphaTable = BTreeMap<OutcomeKey, f64>;

#[derive(Clone, Debug)]
pub struct WitnessSolution {
    pub s: LabeledOperator,
    pub blocks: [CMatrix; 2],
    pub alpha: AlphaTable,
    /// 𝒞_W = Tr(S W).
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub span_rank: usize,
    pub span: WitnessSpan,
    pub status: SdpStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

#[derive(Serialize)]
struct SolverMeta<'a> {
    status: SdpStatus,
    iterations: usize,
    primal_objective: f64,
    dual_objective: f64,
    gap: f64,
    span_rank: usize,
    normalization: &'a str,
}

#[derive(Serialize)]
struct WitnessDocument<'a> {
    value: f64,
    gap: f64,
    solver: SolverMeta<'a>,
    span: &'a WitnessSpan,
    alpha: BTreeMap<String, f64>,
}

impl WitnessSolution {
    /// JSON document with α keyed by "b,d,x,y,r,z".
    pub fn to_json(&self) -> String {
        let doc = WitnessDocument {
            value: self.value,
            gap: self.gap,
            solver: SolverMeta {
                status: self.status,
                iterations: self.iterations,
                primal_objective: self.primal_objective,
                dual_objective: self.dual_objective,
                gap: self.gap,
                span_rank: self.span_rank,
                normalization: NORMALIZATION,
            },
            span: &self.span,
            alpha: alpha_by_string(&self.alpha),
        };
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }

    /// Tr(S W) for another process.
    pub fn evaluate_on(&self, w: &ProcessMatrix) -> Result<f64, WitnessError> {
        let [wp, wm] = reduced_blocks(&w.op)?;
        Ok(self.blocks[0].trace_product(&wp).re + self.blocks[1].trace_product(&wm).re)
    }
}

/// Table re-keyed so that serialization order follows the display strings.
pub fn alpha_by_string(alpha: &AlphaTable) -> BTreeMap<String, f64> {
    alpha.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

struct WitnessLayout {
    basis: SpanBasis,
    perp: [Vec<usize>; 2],
}

fn full_layout() -> &'static WitnessLayout {
    static LAYOUT: OnceLock<WitnessLayout> = OnceLock::new();
    LAYOUT.get_or_init(|| layout(&WitnessSpan::full()))
}

fn layout(span: &WitnessSpan) -> WitnessLayout {
    WitnessLayout {
        basis: SpanBasis::new(span),
        perp: [ordered_complement(Order::AThenB), ordered_complement(Order::BThenA)],
    }
}

/// Minimizes Tr(S W) over witnesses in the span of the chosen settings' outcome operators.
pub fn optimize_witness(w: &ProcessMatrix, span: &WitnessSpan) -> Result<WitnessSolution, WitnessError> {
    optimize_witness_with(w, span, &SdpOptions::default())
}

pub fn optimize_witness_with(w: &ProcessMatrix, span: &WitnessSpan, options: &SdpOptions) -> Result<WitnessSolution, WitnessError> {
    span.validate()?;
    check_process_operator(&w.op)?;
    let owned;
    let lay = if *span == WitnessSpan::full() {
        full_layout()
    } else {
        owned = layout(span);
        &owned
    };
    let basis = &lay.basis;
    let k = basis.rank();
    if basis.rank() < basis.n_ops() {
        log::info!("span rank {} of {} outcome operators per F_c outcome; alpha is the minimum-norm representative", k, basis.n_ops());
    }
    let wblocks = reduced_blocks(&w.op)?;
    let wcoords: Vec<Vec<f64>> = wblocks.iter().map(pauli_coords).collect();
    let n1 = lay.perp[0].len();
    let n2 = lay.perp[1].len();
    let m = 2 * k + n1 + n2;
    let mut b = vec![0.0; m];
    for (d, wc) in wcoords.iter().enumerate() {
        for (j, e) in basis.elements.iter().enumerate() {
            let tr: f64 = LOCAL_DIM as f64 * e.iter().zip(wc).map(|(x, y)| x * y).sum::<f64>();
            b[d * k + j] = -tr;
        }
    }
    let neg_elements = Mat::from_fn(LOCAL_STRINGS, k, |a, j| -basis.elements[j][a]);
    let atoms_all: Vec<usize> = (0..LOCAL_STRINGS).collect();
    let mut blocks = Vec::new();
    for (i, perp) in lay.perp.iter().enumerate() {
        let offset = 2 * k + if i == 0 { 0 } else { n1 };
        for d in 0..2 {
            blocks.push(SdpBlock {
                dim: LOCAL_DIM,
                atoms: Atoms::Pauli { qubits: 5, strings: atoms_all.clone() },
                c: CMatrix::zeros(LOCAL_DIM, LOCAL_DIM),
                couplings: vec![
                    Coupling::Dense { vars: (d * k..(d + 1) * k).collect(), coeffs: neg_elements.clone() },
                    Coupling::Unit { vars: (offset..offset + perp.len()).collect(), atoms: perp.clone(), scale: -1.0 },
                ],
            });
        }
    }
    let traces: Vec<f64> = basis.elements.iter().map(|e| LOCAL_DIM as f64 * e[0] * NORMALIZATION_WEIGHT).collect();
    let norm_coeffs = Mat::from_fn(1, 2 * k, |_, j| traces[j % k]);
    blocks.push(SdpBlock {
        dim: 1,
        atoms: Atoms::Dense(vec![CMatrix::identity(1)]),
        c: CMatrix::identity(1),
        couplings: vec![Coupling::Dense { vars: (0..2 * k).collect(), coeffs: norm_coeffs }],
    });
    let problem = SdpProblem { blocks, b };
    let sol = sdp_solve(&problem, options)?;
    if sol.status != SdpStatus::Optimal {
        return Err(WitnessError::Solver { status: sol.status, iterations: sol.iterations });
    }

    let mut sblocks = [CMatrix::zeros(LOCAL_DIM, LOCAL_DIM), CMatrix::zeros(LOCAL_DIM, LOCAL_DIM)];
    let mut alpha = AlphaTable::new();
    let mut value = 0.0;
    for d in 0..2 {
        let mut coords = vec![0.0; LOCAL_STRINGS];
        for (j, e) in basis.elements.iter().enumerate() {
            let a = sol.y[d * k + j];
            value -= a * problem.b[d * k + j];
            for (c, v) in coords.iter_mut().zip(e) {
                *c += a * v;
            }
        }
        sblocks[d] = from_pauli_coords(&coords, 5);
        let coeffs = basis.coefficients(&coords);
        let (nb, np) = (basis.bob.pinv.len(), basis.prep.pinv.len());
        for (i, &x) in span.alice.iter().enumerate() {
            for (jb, &(y, r)) in span.bob.iter().enumerate() {
                for bb in 0..2 {
                    let j = 2 * jb + bb;
                    for (l, &z) in span.inputs.iter().enumerate() {
                        let key = OutcomeKey { z: z as u8, y: y as u8, r: r as u8, x: x as u8, b: bb as u8, d: d as u8 };
                        alpha.insert(key, coeffs[(i * nb + j) * np + l]);
                    }
                }
            }
        }
    }
    let s = assemble_blocks(&sblocks)?;
    Ok(WitnessSolution {
        s,
        blocks: sblocks,
        alpha,
        value,
        gap: sol.gap,
        iterations: sol.iterations,
        span_rank: 2 * k,
        span: span.clone(),
        status: sol.status,
        primal_objective: sol.primal_objective,
        dual_objective: sol.dual_objective,
    })
}

/// 𝒞_W = Σ α p over identical key sets.
pub fn evaluate_witness(alpha: &AlphaTable, probs: &ProbabilityTable) -> Result<f64, WitnessError> {
    let missing: Vec<String> = alpha.keys().filter(|k| !probs.contains_key(k)).map(|k| k.to_string()).collect();
    let extra: Vec<String> = probs.keys().filter(|k| !alpha.contains_key(k)).map(|k| k.to_string()).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(WitnessError::KeyMismatch { missing, extra });
    }
    Ok(alpha.iter().map(|(k, a)| a * probs[k]).sum())
}

/// Restricts a probability table to the keys of a span.
pub fn restrict(probs: &ProbabilityTable, span: &WitnessSpan) -> ProbabilityTable {
    span.keys().into_iter().filter_map(|k| probs.get(&k).map(|p| (k, *p))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ConeVerdict {
    Member,
    NonMember,
    Indeterminate(SdpStatus),
}

#[derive(Clone, Debug)]
pub struct DualConeReport {
    pub verdict: ConeVerdict,
    /// Largest t with S + N_i − t𝟙 ⪰ 0 for both orders.
    pub margin: f64,
    /// T_i = S + N_i, positive semidefinite up to `margin` for members.
    pub decomposition: Option<[LabeledOperator; 2]>,
    pub iterations: usize,
}

pub const CONE_TOL: f64 = 1e-8;

/// Membership of S in the dual cone of causally separable processes.
pub fn dual_cone_check(s: &LabeledOperator) -> Result<DualConeReport, WitnessError> {
    check_process_operator(s)?;
    let [sp, sm] = reduced_blocks(s)?;
    let sp = sp.scale_real(0.5);
    let sm = sm.scale_real(0.5);
    let structured = assemble_blocks(&[sp.clone(), sm.clone()])?.max_abs_diff(s)? < 1e-10;
    let perp = [ordered_complement(Order::AThenB), ordered_complement(Order::BThenA)];
    let n1 = perp[0].len();
    let m = 1 + n1 + perp[1].len();
    let mut blocks = Vec::new();
    let mut atoms_of = Vec::new();
    for (i, p) in perp.iter().enumerate() {
        let offset = 1 + if i == 0 { 0 } else { n1 };
        let (qubits, cs, strings): (usize, Vec<CMatrix>, Vec<usize>) = if structured {
            (5, vec![sp.clone(), sm.clone()], p.clone())
        } else {
            (7, vec![s.matrix().clone()], p.iter().map(|&x| lift_string(x)).collect())
        };
        let mut atoms = vec![0];
        atoms.extend(&strings);
        for c in cs {
            blocks.push(SdpBlock {
                dim: c.rows(),
                atoms: Atoms::Pauli { qubits, strings: atoms.clone() },
                c,
                couplings: vec![
                    Coupling::Unit { vars: vec![0], atoms: vec![0], scale: 1.0 },
                    Coupling::Unit { vars: (offset..offset + p.len()).collect(), atoms: (1..=p.len()).collect(), scale: -1.0 },
                ],
            });
        }
        atoms_of.push((offset, strings, qubits));
    }
    let mut b = vec![0.0; m];
    b[0] = 1.0;
    let sol = sdp_solve(&SdpProblem { blocks, b }, &SdpOptions::default())?;
    if sol.status != SdpStatus::Optimal {
        return Ok(DualConeReport {
            verdict: ConeVerdict::Indeterminate(sol.status),
            margin: f64::NAN,
            decomposition: None,
            iterations: sol.iterations,
        });
    }
    let margin = sol.dual_objective;
    let verdict = if margin >= -CONE_TOL { ConeVerdict::Member } else { ConeVerdict::NonMember };
    let decomposition = if verdict == ConeVerdict::Member {
        let mut ts = Vec::new();
        for (i, p) in perp.iter().enumerate() {
            let offset = atoms_of[i].0;
            let mut coords = vec![0.0; LOCAL_STRINGS];
            for (j, &st) in p.iter().enumerate() {
                coords[st] = sol.y[offset + j];
            }
            let n_local = from_pauli_coords(&coords, 5);
            let n_full = tensor(&[
                &LabeledOperator::new(&LOCAL_LABELS, &[2; 5], n_local)?,
                &LabeledOperator::single(F_C, CMatrix::identity(2))?,
                &LabeledOperator::single(F_T, CMatrix::identity(2))?,
            ])?;
            ts.push(s.add(&n_full)?);
        }
        let t1 = ts.pop().expect("two orders");
        let t0 = ts.pop().expect("two orders");
        Some([t0, t1])
    } else {
        None
    };
    Ok(DualConeReport { verdict, margin, decomposition, iterations: sol.iterations })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub distinguishability: f64,
    pub visibility: f64,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Witness re-optimized at each D; independent solves run on scoped threads.
pub fn sweep(ds: &[f64], span: &WitnessSpan) -> Result<Vec<SweepPoint>, WitnessError> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(ds.len().max(1));
    let mut results: Vec<Option<Result<SweepPoint, WitnessError>>> = vec![None; ds.len()];
    let chunk = ds.len().div_ceil(threads.max(1)).max(1);
    std::thread::scope(|scope| {
        for (slots, dchunk) in results.chunks_mut(chunk).zip(ds.chunks(chunk)) {
            scope.spawn(move || {
                for (slot, &d) in slots.iter_mut().zip(dchunk) {
                    *slot = Some(sweep_point(d, span));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn sweep_point(d: f64, span: &WitnessSpan) -> Result<SweepPoint, WitnessError> {
    let w = procmat::w_switch_dephased(d).map_err(|e| WitnessError::BadSpan(e.to_string()))?;
    let sol = optimize_witness(&w, span)?;
    Ok(SweepPoint {
        distinguishability: d,
        visibility: (1.0 - d * d).max(0.0).sqrt(),
        value: sol.value,
        gap: sol.gap,
        iterations: sol.iterations,
    })
}

/// Evenly spaced grid on [0, 1].
pub fn unit_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
