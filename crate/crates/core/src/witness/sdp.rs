//! Primal-dual interior-point solver for block-diagonal Hermitian semidefinite programs.
//!
//! Primal: minimize Σ_b ⟨C_b, X_b⟩ subject to Σ_b ⟨A_{b,i}, X_b⟩ = b_i and X_b ⪰ 0.
//! Dual:   maximize bᵀy subject to Z_b = C_b − Σ_i y_i A_{b,i} ⪰ 0.
//!
//! Each A_{b,i} is a real combination of Hermitian atoms attached to block b, so the
//! Schur complement is assembled from one atom Gram matrix per block. Search directions
//! are HKM with a Mehrotra predictor-corrector step from an infeasible identity start.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::Serialize;

use crate::qmath::linalg::{eigh, min_eigenvalue};
use crate::qmath::pauli::PauliString;
use crate::qmath::{CMatrix, C64};

pub const MAX_SIDE: usize = 256;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("block {block}: {message}")]
    BadBlock { block: usize, message: String },
    #[error("variable index {index} out of range for {m} variables")]
    BadVariable { index: usize, m: usize },
}

/// Hermitian atoms spanning the constraint operators of one block.
#[derive(Clone, Debug)]
pub enum Atoms {
    /// Pauli strings (base-4 indices) on `qubits` qubits.
    Pauli { qubits: usize, strings: Vec<usize> },
    Dense(Vec<CMatrix>),
}

impl Atoms {
    pub fn len(&self) -> usize {
        match self {
            Atoms::Pauli { strings, .. } => strings.len(),
            Atoms::Dense(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How dual variables enter one block.
#[derive(Clone, Debug)]
pub enum Coupling {
    /// y[vars[k]] multiplies atom atoms[k] with weight `scale`.
    Unit { vars: Vec<usize>, atoms: Vec<usize>, scale: f64 },
    /// coeffs[(a, k)] is the weight of atom a in the operator of y[vars[k]].
    Dense { vars: Vec<usize>, coeffs: Mat<f64> },
}

impl Coupling {
    fn vars(&self) -> &[usize] {
        match self {
            Coupling::Unit { vars, .. } | Coupling::Dense { vars, .. } => vars,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpBlock {
    pub dim: usize,
    pub atoms: Atoms,
    pub c: CMatrix,
    pub couplings: Vec<Coupling>,
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub blocks: Vec<SdpBlock>,
    pub b: Vec<f64>,
}

impl SdpProblem {
    /// Plain form: `constraints[i]` lists (block, A) pairs, each A a Hermitian matrix.
    pub fn dense(c: Vec<CMatrix>, constraints: Vec<Vec<(usize, CMatrix)>>, b: Vec<f64>) -> Result<Self, SdpError> {
        let mut blocks: Vec<SdpBlock> = c
            .into_iter()
            .map(|c| SdpBlock { dim: c.rows(), atoms: Atoms::Dense(Vec::new()), c, couplings: Vec::new() })
            .collect();
        let mut entries: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); blocks.len()];
        for (i, parts) in constraints.into_iter().enumerate() {
            for (bi, a) in parts {
                let block = blocks.get_mut(bi).ok_or(SdpError::BadBlock { block: bi, message: "no such block".into() })?;
                if let Atoms::Dense(v) = &mut block.atoms {
                    entries[bi].0.push(i);
                    entries[bi].1.push(v.len());
                    v.push(a);
                }
            }
        }
        for (block, (vars, atoms)) in blocks.iter_mut().zip(entries) {
            if !vars.is_empty() {
                block.couplings.push(Coupling::Unit { vars, atoms, scale: 1.0 });
            }
        }
        let p = Self { blocks, b };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let m = self.b.len();
        for (bi, blk) in self.blocks.iter().enumerate() {
            let bad = |message: String| SdpError::BadBlock { block: bi, message };
            if blk.dim == 0 || blk.dim > MAX_SIDE {
                return Err(bad(format!("side {} outside 1..={MAX_SIDE}", blk.dim)));
            }
            if blk.c.rows() != blk.dim || blk.c.cols() != blk.dim {
                return Err(bad("objective block has the wrong shape".into()));
            }
            if !blk.c.is_hermitian(1e-10) {
                return Err(bad("objective block is not Hermitian".into()));
            }
            match &blk.atoms {
                Atoms::Pauli { qubits, strings } => {
                    if 1usize << qubits != blk.dim {
                        return Err(bad(format!("{qubits} qubits do not match side {}", blk.dim)));
                    }
                    if strings.iter().any(|&s| s >= 1 << (2 * qubits)) {
                        return Err(bad("Pauli index out of range".into()));
                    }
                }
                Atoms::Dense(v) => {
                    for a in v {
                        if a.rows() != blk.dim || a.cols() != blk.dim || !a.is_hermitian(1e-10) {
                            return Err(bad("atom is not a Hermitian matrix of the block side".into()));
                        }
                    }
                }
            }
            let na = blk.atoms.len();
            for cp in &blk.couplings {
                if let Some(&index) = cp.vars().iter().find(|&&v| v >= m) {
                    return Err(SdpError::BadVariable { index, m });
                }
                match cp {
                    Coupling::Unit { vars, atoms, .. } => {
                        if vars.len() != atoms.len() || atoms.iter().any(|&a| a >= na) {
                            return Err(bad("unit coupling references a missing atom".into()));
                        }
                    }
                    Coupling::Dense { vars, coeffs } => {
                        if coeffs.nrows() != na || coeffs.ncols() != vars.len() {
                            return Err(bad("dense coupling has the wrong shape".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    /// Relative duality gap at termination.
    pub gap_tol: f64,
    /// Relative primal and dual residuals at termination.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Accepted for the best iterate when progress stalls before the targets are met.
    pub fallback_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-9, feas_tol: 1e-8, max_iter: 100, fallback_tol: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SdpStatus {
    Optimal,
    /// No feasible X; `Certificate::Farkas` attached.
    PrimalInfeasible,
    /// No feasible (y, Z); `Certificate::Ray` attached.
    DualInfeasible,
    MaxIterations,
    NumericalError,
}

#[derive(Clone, Debug)]
pub enum Certificate {
    /// bᵀy > 0 with −Σ y_i A_i ⪰ 0.
    Farkas { y: Vec<f64> },
    /// X ⪰ 0 with A(X) = 0 and ⟨C, X⟩ < 0.
    Ray { x: Vec<CMatrix> },
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<CMatrix>,
    pub y: Vec<f64>,
    pub z: Vec<CMatrix>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub rel_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
}

struct PauliAtom {
    x: usize,
    z: usize,
    /// Column phases σ|c⟩ = phase[c]·|c ⊕ x⟩.
    phase: Vec<C64>,
    /// i^{|x∧z|}, the column-independent part of the phase.
    global: C64,
}

enum AtomOps {
    Pauli(Vec<PauliAtom>),
    Dense(Vec<CMatrix>),
}

struct Prepared<'a> {
    block: &'a SdpBlock,
    ops: AtomOps,
}

impl<'a> Prepared<'a> {
    fn new(block: &'a SdpBlock) -> Self {
        let ops = match &block.atoms {
            Atoms::Pauli { qubits, strings } => AtomOps::Pauli(
                strings
                    .iter()
                    .map(|&s| {
                        let p = PauliString::from_index(s, *qubits);
                        let phase: Vec<C64> = (0..block.dim).map(|c| p.column_entry(c).1).collect();
                        PauliAtom { x: p.x as usize, z: p.z as usize, global: phase[0], phase }
                    })
                    .collect(),
            ),
            Atoms::Dense(v) => AtomOps::Dense(v.clone()),
        };
        Self { block, ops }
    }

    fn n_atoms(&self) -> usize {
        self.block.atoms.len()
    }

    /// Atom weights of Σ_i y_i A_{b,i}.
    fn weights(&self, y: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n_atoms()];
        for cp in &self.block.couplings {
            match cp {
                Coupling::Unit { vars, atoms, scale } => {
                    for (&v, &a) in vars.iter().zip(atoms) {
                        w[a] += scale * y[v];
                    }
                }
                Coupling::Dense { vars, coeffs } => {
                    for (k, &v) in vars.iter().enumerate() {
                        let yv = y[v];
                        if yv != 0.0 {
                            for (a, wa) in w.iter_mut().enumerate() {
                                *wa += coeffs[(a, k)] * yv;
                            }
                        }
                    }
                }
            }
        }
        w
    }

    fn apply(&self, y: &[f64]) -> CMatrix {
        let w = self.weights(y);
        let n = self.block.dim;
        let mut m = CMatrix::zeros(n, n);
        match &self.ops {
            AtomOps::Pauli(atoms) => {
                for (atom, &wa) in atoms.iter().zip(&w) {
                    if wa != 0.0 {
                        for c in 0..n {
                            m[(c ^ atom.x, c)] += atom.phase[c] * wa;
                        }
                    }
                }
            }
            AtomOps::Dense(atoms) => {
                for (atom, &wa) in atoms.iter().zip(&w) {
                    if wa != 0.0 {
                        m += &atom.scale_real(wa);
                    }
                }
            }
        }
        m
    }

    /// Re Tr(atom_a M) for every atom.
    fn atom_traces(&self, m: &CMatrix) -> Vec<f64> {
        match &self.ops {
            AtomOps::Pauli(atoms) => atoms
                .iter()
                .map(|a| (0..self.block.dim).map(|k| (a.phase[k] * m[(k, k ^ a.x)]).re).sum())
                .collect(),
            AtomOps::Dense(atoms) => atoms.iter().map(|a| a.trace_product(m).re).collect(),
        }
    }

    /// Adds ⟨A_{b,i}, M⟩ into out[i].
    fn adjoint_into(&self, m: &CMatrix, out: &mut [f64]) {
        let t = self.atom_traces(m);
        for cp in &self.block.couplings {
            match cp {
                Coupling::Unit { vars, atoms, scale } => {
                    for (&v, &a) in vars.iter().zip(atoms) {
                        out[v] += scale * t[a];
                    }
                }
                Coupling::Dense { vars, coeffs } => {
                    for (k, &v) in vars.iter().enumerate() {
                        out[v] += (0..t.len()).map(|a| coeffs[(a, k)] * t[a]).sum::<f64>();
                    }
                }
            }
        }
    }

    fn frobenius_sq_per_var(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        let gram = match &self.ops {
            AtomOps::Pauli(_) => None,
            AtomOps::Dense(atoms) => Some(
                atoms.iter().map(|a| atoms.iter().map(|b| a.trace_product(b).re).collect::<Vec<_>>()).collect::<Vec<_>>(),
            ),
        };
        let dim = self.block.dim as f64;
        for cp in &self.block.couplings {
            let cols: Vec<(usize, Vec<(usize, f64)>)> = match cp {
                Coupling::Unit { vars, atoms, scale } => {
                    vars.iter().zip(atoms).map(|(&v, &a)| (v, vec![(a, *scale)])).collect()
                }
                Coupling::Dense { vars, coeffs } => vars
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| (v, (0..coeffs.nrows()).map(|a| (a, coeffs[(a, k)])).filter(|x| x.1 != 0.0).collect()))
                    .collect(),
            };
            for (v, col) in cols {
                out[v] += match &gram {
                    None => dim * col.iter().map(|x| x.1 * x.1).sum::<f64>(),
                    Some(g) => col.iter().flat_map(|&(a, fa)| col.iter().map(move |&(b, fb)| (a, b, fa * fb))).map(|(a, b, f)| f * g[a][b]).sum(),
                };
            }
        }
        out
    }

    /// G[a, a'] = Re Tr(atom_a X atom_a' Z⁻¹).
    fn atom_gram(&self, x: &CMatrix, zinv: &CMatrix) -> Mat<f64> {
        let n = self.block.dim;
        let na = self.n_atoms();
        let mut big = Mat::<C64>::zeros(na * n, n);
        match &self.ops {
            AtomOps::Pauli(atoms) => {
                for (a, atom) in atoms.iter().enumerate() {
                    for j in 0..n {
                        let src = j ^ atom.x;
                        let ph = atom.phase[j];
                        for i in 0..n {
                            big[(a * n + i, j)] = x[(i, src)] * ph;
                        }
                    }
                }
            }
            AtomOps::Dense(atoms) => {
                for (a, atom) in atoms.iter().enumerate() {
                    let xa = x.matmul(atom);
                    for i in 0..n {
                        for j in 0..n {
                            big[(a * n + i, j)] = xa[(i, j)];
                        }
                    }
                }
            }
        }
        let zf = crate::qmath::linalg::to_faer(zinv);
        let q = &big * &zf;
        let mut g = Mat::<f64>::zeros(na, na);
        match &self.ops {
            AtomOps::Pauli(atoms) => {
                // Tr(σ_{x,z} Q) = i^{|x∧z|} Σ_k (−1)^{|k∧z|} Q[k, k⊕x]: one Walsh-Hadamard transform per x
                let mut table = vec![C64::new(0.0, 0.0); n * n];
                for ap in 0..na {
                    let off = ap * n;
                    for mask in 0..n {
                        let row = &mut table[mask * n..(mask + 1) * n];
                        for (k, v) in row.iter_mut().enumerate() {
                            *v = q[(off + k, k ^ mask)];
                        }
                        walsh_hadamard(row);
                    }
                    let mut gcol = g.col_mut(ap);
                    for (a, atom) in atoms.iter().enumerate() {
                        let v = table[atom.x * n + atom.z];
                        gcol[a] = atom.global.re * v.re - atom.global.im * v.im;
                    }
                }
            }
            AtomOps::Dense(atoms) => {
                for ap in 0..na {
                    let off = ap * n;
                    for (a, atom) in atoms.iter().enumerate() {
                        let mut s = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                let v = atom[(i, j)] * q[(off + j, i)];
                                s += v.re;
                            }
                        }
                        g[(a, ap)] = s;
                    }
                }
            }
        }
        g
    }

    /// Adds this block's Schur contribution into `m`.
    fn schur_into(&self, x: &CMatrix, zinv: &CMatrix, m: &mut Mat<f64>) {
        if self.block.couplings.is_empty() {
            return;
        }
        let g = self.atom_gram(x, zinv);
        let cps = &self.block.couplings;
        // H_h = G F_h for every coupling
        let hs: Vec<Mat<f64>> = cps
            .iter()
            .map(|cp| match cp {
                Coupling::Unit { atoms, scale, .. } => {
                    Mat::from_fn(g.nrows(), atoms.len(), |a, k| g[(a, atoms[k])] * scale)
                }
                Coupling::Dense { coeffs, .. } => &g * coeffs,
            })
            .collect();
        for (gi, cg) in cps.iter().enumerate() {
            for (hi, ch) in cps.iter().enumerate().skip(gi) {
                let h = &hs[hi];
                let blk: Mat<f64> = match (cg, ch) {
                    (Coupling::Unit { atoms, scale, .. }, _) => {
                        Mat::from_fn(atoms.len(), h.ncols(), |k, l| h[(atoms[k], l)] * scale)
                    }
                    (Coupling::Dense { .. }, Coupling::Unit { atoms, scale, .. }) => {
                        // G symmetric: F_gᵀ G F_h = (F_hᵀ G F_g)ᵀ
                        let hg = &hs[gi];
                        Mat::from_fn(hg.ncols(), atoms.len(), |k, l| hg[(atoms[l], k)] * scale)
                    }
                    (Coupling::Dense { coeffs, .. }, Coupling::Dense { .. }) => coeffs.transpose() * h,
                };
                let (vg, vh) = (cg.vars(), ch.vars());
                for (l, &j) in vh.iter().enumerate() {
                    for (k, &i) in vg.iter().enumerate() {
                        m[(i, j)] += blk[(k, l)];
                    }
                }
                if hi != gi {
                    for (k, &i) in vg.iter().enumerate() {
                        for (l, &j) in vh.iter().enumerate() {
                            m[(j, i)] += blk[(k, l)];
                        }
                    }
                }
            }
        }
    }
}

fn walsh_hadamard(v: &mut [C64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*a + *b, *a - *b);
                *a = s;
                *b = d;
            }
        }
        h *= 2;
    }
}

fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn frob_sq(a: &CMatrix) -> f64 {
    a.as_slice().iter().map(|x| x.norm_sqr()).sum()
}

fn inverse_pd(m: &CMatrix) -> Option<CMatrix> {
    let (vals, vecs) = eigh(&m.hermitian_part()).ok()?;
    if vals.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let inv: Vec<f64> = vals.iter().map(|v| 1.0 / v).collect();
    Some(crate::qmath::linalg::from_spectrum(&inv, &vecs))
}

/// Largest α with M + α·D ⪰ 0 (M positive definite), capped at `cap`.
fn max_step(m: &CMatrix, d: &CMatrix, cap: f64) -> Option<f64> {
    let (vals, vecs) = eigh(&m.hermitian_part()).ok()?;
    if vals.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let s: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
    let half = crate::qmath::linalg::from_spectrum(&s, &vecs);
    let k = half.matmul(d).matmul(&half).hermitian_part();
    let lmin = min_eigenvalue(&k).ok()?;
    Some(if lmin >= 0.0 { cap } else { (-1.0 / lmin).min(cap) })
}

struct Iterate {
    x: Vec<CMatrix>,
    y: Vec<f64>,
    z: Vec<CMatrix>,
}

pub fn sdp_solve(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let m = problem.num_vars();
    let prep: Vec<Prepared> = problem.blocks.iter().map(Prepared::new).collect();
    let n_total: usize = problem.blocks.iter().map(|b| b.dim).sum();
    let b = &problem.b;
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c_norm = problem.blocks.iter().map(|blk| frob_sq(&blk.c)).sum::<f64>().sqrt();

    let mut it = {
        let mut x = Vec::new();
        let mut z = Vec::new();
        for p in &prep {
            let nb = p.block.dim as f64;
            let norms: Vec<f64> = p.frobenius_sq_per_var(m).into_iter().map(f64::sqrt).collect();
            let mut xi = 10f64.max(nb.sqrt());
            let mut eta = 10f64.max(nb.sqrt()).max(frob_sq(&p.block.c).sqrt());
            for cp in &p.block.couplings {
                for &v in cp.vars() {
                    xi = xi.max(nb * (1.0 + b[v].abs()) / (1.0 + norms[v]));
                    eta = eta.max(norms[v]);
                }
            }
            x.push(CMatrix::identity(p.block.dim).scale_real(xi));
            z.push(CMatrix::identity(p.block.dim).scale_real(eta));
        }
        Iterate { x, y: vec![0.0; m], z }
    };

    let apply_all = |y: &[f64]| -> Vec<CMatrix> { prep.iter().map(|p| p.apply(y)).collect() };
    let adjoint_all = |ms: &[CMatrix]| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (p, mm) in prep.iter().zip(ms) {
            p.adjoint_into(mm, &mut out);
        }
        out
    };

    let mut best: Option<(f64, usize, SdpSolution)> = None;
    for iter in 0..=options.max_iter {
        let aty = apply_all(&it.y);
        let rd: Vec<CMatrix> = prep.iter().enumerate().map(|(k, p)| &(&p.block.c - &it.z[k]) - &aty[k]).collect();
        let ax = adjoint_all(&it.x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let pobj: f64 = prep.iter().zip(&it.x).map(|(p, x)| inner(&p.block.c, x)).sum();
        let dobj: f64 = b.iter().zip(&it.y).map(|(bi, yi)| bi * yi).sum();
        let xz: f64 = it.x.iter().zip(&it.z).map(|(x, z)| inner(x, z)).sum();
        let mu = xz / n_total as f64;
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + b_norm);
        let dinf = rd.iter().map(frob_sq).sum::<f64>().sqrt() / (1.0 + c_norm);
        let summary = |status, it: &Iterate, certificate| SdpSolution {
            status,
            x: it.x.clone(),
            y: it.y.clone(),
            z: it.z.clone(),
            primal_objective: pobj,
            dual_objective: dobj,
            gap: (pobj - dobj).abs(),
            rel_gap,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            iterations: iter,
            certificate,
        };
        log::trace!("sdp iter {iter}: p {pobj:.10e} d {dobj:.10e} gap {rel_gap:.2e} pinf {pinf:.2e} dinf {dinf:.2e}");
        if rel_gap < options.gap_tol && pinf < options.feas_tol && dinf < options.feas_tol {
            return Ok(summary(SdpStatus::Optimal, &it, None));
        }
        let merit = rel_gap.max(pinf).max(dinf);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, iter, summary(SdpStatus::Optimal, &it, None)));
        }
        let stalled = |status: SdpStatus| -> SdpSolution {
            match &best {
                Some((bm, _, sol)) if *bm < options.fallback_tol => sol.clone(),
                _ => summary(status, &it, None),
            }
        };
        if let Some((bm, bi, _)) = &best {
            if *bm < options.fallback_tol && iter >= bi + 5 {
                return Ok(stalled(SdpStatus::Optimal));
            }
        }
        if dobj > 0.0 {
            let worst = aty.iter().map(|a| min_eigenvalue(&a.scale_real(-1.0)).unwrap_or(f64::NEG_INFINITY)).fold(f64::INFINITY, f64::min);
            if worst >= -1e-8 * dobj {
                let cert = Certificate::Farkas { y: it.y.iter().map(|v| v / dobj).collect() };
                return Ok(summary(SdpStatus::PrimalInfeasible, &it, Some(cert)));
            }
        }
        if pobj < 0.0 {
            let ax_norm = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ax_norm < 1e-8 * (-pobj) {
                let cert = Certificate::Ray { x: it.x.iter().map(|x| x.scale_real(-1.0 / pobj)).collect() };
                return Ok(summary(SdpStatus::DualInfeasible, &it, Some(cert)));
            }
        }
        if iter == options.max_iter {
            return Ok(stalled(SdpStatus::MaxIterations));
        }

        let zinv: Option<Vec<CMatrix>> = it.z.iter().map(inverse_pd).collect();
        let Some(zinv) = zinv else {
            return Ok(stalled(SdpStatus::NumericalError));
        };
        let mut schur = Mat::<f64>::zeros(m, m);
        for (k, p) in prep.iter().enumerate() {
            p.schur_into(&it.x[k], &zinv[k], &mut schur);
        }
        // Constraint operators may be linearly dependent (span elements inside both ordered
        // complements), so the Schur matrix is only semidefinite; a relative shift keeps LLᵀ defined.
        let scale = (0..m).map(|i| schur[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut shift = 1e-13 * scale;
        let llt = loop {
            let mut shifted = schur.clone();
            for i in 0..m {
                shifted[(i, i)] += shift;
            }
            match shifted.llt(Side::Lower) {
                Ok(l) => break l,
                Err(_) if shift < 1e-8 * scale => shift *= 100.0,
                Err(_) => return Ok(stalled(SdpStatus::NumericalError)),
            }
        };

        // Δ for a given target term T: M Δy = rp − A(T), ΔZ = Rd − AᵀΔy, ΔX = T + X AᵀΔy Z⁻¹.
        let direction = |t: &[CMatrix]| -> (Vec<f64>, Vec<CMatrix>, Vec<CMatrix>) {
            let at = adjoint_all(t);
            let rhs = Mat::<f64>::from_fn(m, 1, |i, _| rp[i] - at[i]);
            let mut sol = llt.solve(&rhs);
            // one step of iterative refinement
            let resid = &rhs - &schur * &sol;
            sol += llt.solve(&resid);
            let dy: Vec<f64> = (0..m).map(|i| sol[(i, 0)]).collect();
            let ady = apply_all(&dy);
            let mut dz = Vec::with_capacity(prep.len());
            let mut dx = Vec::with_capacity(prep.len());
            for k in 0..prep.len() {
                dz.push((&rd[k] - &ady[k]).hermitian_part());
                let corr = it.x[k].matmul(&ady[k]).matmul(&zinv[k]);
                dx.push((&t[k] + &corr).hermitian_part());
            }
            (dy, dx, dz)
        };
        let steps = |dx: &[CMatrix], dz: &[CMatrix]| -> Option<(f64, f64)> {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..prep.len() {
                ap = ap.min(max_step(&it.x[k], &dx[k], 1e30)?);
                ad = ad.min(max_step(&it.z[k], &dz[k], 1e30)?);
            }
            Some((ap, ad))
        };
        let xrdz: Vec<CMatrix> = (0..prep.len()).map(|k| it.x[k].matmul(&rd[k]).matmul(&zinv[k])).collect();
        let t_aff: Vec<CMatrix> = (0..prep.len()).map(|k| (&it.x[k].scale_real(-1.0)) - &xrdz[k]).collect();
        let (_, dx_a, dz_a) = direction(&t_aff);
        let Some((ap_max, ad_max)) = steps(&dx_a, &dz_a) else {
            return Ok(stalled(SdpStatus::NumericalError));
        };
        let (ap_a, ad_a) = (ap_max.min(1.0), ad_max.min(1.0));
        let mu_aff: f64 = (0..prep.len())
            .map(|k| inner(&(&it.x[k] + &dx_a[k].scale_real(ap_a)), &(&it.z[k] + &dz_a[k].scale_real(ad_a))))
            .sum::<f64>()
            / n_total as f64;
        let expon = (3.0 * ap_a.min(ad_a).powi(2)).max(1.0);
        let sigma = (mu_aff.max(0.0) / mu).powf(expon).clamp(0.0, 1.0);

        let t_cor: Vec<CMatrix> = (0..prep.len())
            .map(|k| {
                let target = zinv[k].scale_real(sigma * mu);
                let cross = dx_a[k].matmul(&dz_a[k]).matmul(&zinv[k]);
                &(&(&target - &it.x[k]) - &xrdz[k]) - &cross
            })
            .collect();
        let (dy, dx, dz) = direction(&t_cor);
        let Some((ap_max, ad_max)) = steps(&dx, &dz) else {
            return Ok(stalled(SdpStatus::NumericalError));
        };
        let gamma = (0.9 + 0.09 * ap_a.min(ad_a)).clamp(0.9, 0.99);
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            return Ok(stalled(SdpStatus::NumericalError));
        }
        for k in 0..prep.len() {
            it.x[k] = (&it.x[k] + &dx[k].scale_real(ap)).hermitian_part();
            it.z[k] = (&it.z[k] + &dz[k].scale_real(ad)).hermitian_part();
        }
        for (yi, d) in it.y.iter_mut().zip(&dy) {
            *yi += ad * d;
        }
    }
    unreachable!("loop returns at max_iter")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::cr;
    use crate::qmath::random::random_hermitian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, i: usize, j: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        m[(i, j)] += cr(0.5);
        m[(j, i)] += cr(0.5);
        m
    }

    #[test]
    fn trace_with_unit_corner() {
        let p = SdpProblem::dense(vec![CMatrix::identity(3)], vec![vec![(0, e(3, 0, 0))]], vec![1.0]).unwrap();
        let s = sdp_solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_objective - 1.0).abs() < 1e-7);
        assert!(s.rel_gap < 1e-7);
    }

    #[test]
    fn minimum_eigenvalue_matches_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let h = random_hermitian(&mut rng, 6);
            // maximize t s.t. H − t𝟙 ⪰ 0
            let p = SdpProblem::dense(vec![h.clone()], vec![vec![(0, CMatrix::identity(6))]], vec![1.0]).unwrap();
            let s = sdp_solve(&p, &SdpOptions::default()).unwrap();
            assert_eq!(s.status, SdpStatus::Optimal);
            let want = min_eigenvalue(&h).unwrap();
            assert!((s.dual_objective - want).abs() < 1e-7, "{} vs {want}", s.dual_objective);
        }
    }

    #[test]
    fn detects_primal_infeasibility() {
        // X ⪰ 0 with X₁₁ = −1
        let p = SdpProblem::dense(vec![CMatrix::identity(2)], vec![vec![(0, e(2, 0, 0))]], vec![-1.0]).unwrap();
        let s = sdp_solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::PrimalInfeasible);
        let Some(Certificate::Farkas { y }) = s.certificate else { panic!("no certificate") };
        assert!(-y[0] > 0.0);
    }

    #[test]
    fn detects_dual_infeasibility() {
        // minimize −Tr X with Re X₁₂ = 0: unbounded below
        let p = SdpProblem::dense(vec![CMatrix::identity(2).scale_real(-1.0)], vec![vec![(0, e(2, 0, 1))]], vec![0.0]).unwrap();
        let s = sdp_solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::DualInfeasible);
        assert!(matches!(s.certificate, Some(Certificate::Ray { .. })));
    }

    #[test]
    fn pauli_atoms_match_dense_atoms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 4);
        let strings = vec![0, 1, 5, 10, 15];
        let coeffs = Mat::from_fn(5, 2, |a, k| ((a + 2 * k) as f64 * 0.37).sin());
        let pauli = SdpBlock {
            dim: 4,
            atoms: Atoms::Pauli { qubits: 2, strings: strings.clone() },
            c: h.clone(),
            couplings: vec![Coupling::Dense { vars: vec![0, 1], coeffs: coeffs.clone() }],
        };
        let dense = SdpBlock {
            dim: 4,
            atoms: Atoms::Dense(strings.iter().map(|&s| PauliString::from_index(s, 2).matrix()).collect()),
            c: h,
            couplings: vec![Coupling::Dense { vars: vec![0, 1], coeffs }],
        };
        let b = vec![0.3, -0.2];
        let sp = sdp_solve(&SdpProblem { blocks: vec![pauli], b: b.clone() }, &SdpOptions::default()).unwrap();
        let sd = sdp_solve(&SdpProblem { blocks: vec![dense], b }, &SdpOptions::default()).unwrap();
        assert_eq!(sp.status, sd.status);
        if sp.status == SdpStatus::Optimal {
            assert!((sp.dual_objective - sd.dual_objective).abs() < 1e-7);
        }
    }

    /// max λ s.t. H0 + s H1 + t H2 − λ𝟙 ⪰ 0, |s|, |t| ≤ 1.
    fn slice_problem(h: &[CMatrix; 3]) -> SdpProblem {
        let n = h[0].rows();
        let one = |v: f64| CMatrix::from_rows([[cr(v)]]);
        let c = vec![h[0].clone(), one(1.0), one(1.0), one(1.0), one(1.0)];
        let cons = vec![
            vec![(0, h[1].scale_real(-1.0)), (1, one(1.0)), (2, one(-1.0))],
            vec![(0, h[2].scale_real(-1.0)), (3, one(1.0)), (4, one(-1.0))],
            vec![(0, CMatrix::identity(n))],
        ];
        SdpProblem::dense(c, cons, vec![0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn slice_feasibility_agrees_with_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        let mut tries = 0;
        while checked < 6 && tries < 60 {
            tries += 1;
            let shift = rng.random_range(-1.5..1.5);
            let h0 = &random_hermitian(&mut rng, 8).scale_real(0.3) + &CMatrix::identity(8).scale_real(shift);
            let h = [h0, random_hermitian(&mut rng, 8), random_hermitian(&mut rng, 8)];
            let s = sdp_solve(&slice_problem(&h), &SdpOptions::default()).unwrap();
            assert_eq!(s.status, SdpStatus::Optimal);
            let lam = s.dual_objective;
            let steps = 60;
            let mut best = f64::NEG_INFINITY;
            for i in 0..=steps {
                for j in 0..=steps {
                    let (a, b) = (-1.0 + 2.0 * i as f64 / steps as f64, -1.0 + 2.0 * j as f64 / steps as f64);
                    let m = &(&h[0] + &h[1].scale_real(a)) + &h[2].scale_real(b);
                    best = best.max(min_eigenvalue(&m).unwrap());
                }
            }
            assert!(best <= lam + 1e-7, "grid {best} beats sdp {lam}");
            if lam.abs() > 0.3 {
                assert_eq!(best > 0.0, lam > 0.0, "classification differs: grid {best}, sdp {lam}");
                checked += 1;
            }
        }
        assert!(checked >= 6);
    }
}
