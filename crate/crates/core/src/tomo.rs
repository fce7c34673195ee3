//! Two-photon polarization tomography: simulated counts, reconstruction and fringe fits.
//!
//! Outcome 0 of a basis is the +1 eigenvector of its Pauli operator (H for Z).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::CircuitSpec;
use crate::fock::{pbs_gate, switch_statistics, FockError};
use crate::qmath::linalg::{fidelity, min_eigenvalue, trace_norm};
use crate::qmath::{cr, gates, CMatrix, LabeledOperator, LabeledVector, QmathError, C64};
use crate::settings::ExperimentSetting;

/// System photon then ancilla photon; already in canonical label order.
pub const TOMO_LABELS: [&str; 2] = ["p1_sys", "p2_anc"];
pub const MLE_TOL: f64 = 1e-10;
pub const MLE_MAX_ITER: usize = 200_000;
/// Eigenvalue floor below which a linear estimate is flagged unphysical.
pub const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("empty basis set")]
    EmptyBasisSet,
    #[error("pairs_total must be positive")]
    NoPairs,
    #[error("incomplete setting set, missing {0:?}")]
    Incomplete(Vec<String>),
    #[error("setting {0} has no counts")]
    EmptySetting(String),
    #[error("density operator must be a 4x4 unit-trace PSD matrix: {0}")]
    BadState(String),
    #[error("unknown basis `{0}`")]
    BadBasis(String),
    #[error("outcome {0} is not 0 or 1")]
    BadOutcome(u8),
    #[error("phase grid must span at least one period, got {0} degrees")]
    ShortGrid(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn pauli(self) -> CMatrix {
        match self {
            Basis::X => gates::pauli_x(),
            Basis::Y => gates::pauli_y(),
            Basis::Z => gates::pauli_z(),
        }
    }

    /// (𝟙 ± σ)/2 for outcome 0 / 1.
    pub fn projector(self, outcome: u8) -> CMatrix {
        let sign = if outcome == 0 { 0.5 } else { -0.5 };
        let mut p = self.pauli().scale_real(sign);
        p[(0, 0)] += cr(0.5);
        p[(1, 1)] += cr(0.5);
        p
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::X => "X",
            Basis::Y => "Y",
            Basis::Z => "Z",
        };
        f.write_str(s)
    }
}

impl FromStr for Basis {
    type Err = TomoError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "X" | "x" => Ok(Basis::X),
            "Y" | "y" => Ok(Basis::Y),
            "Z" | "z" => Ok(Basis::Z),
            other => Err(TomoError::BadBasis(other.into())),
        }
    }
}

pub type BasisPair = (Basis, Basis);

/// The nine Pauli-pair settings.
pub fn pauli_pairs() -> Vec<BasisPair> {
    Basis::ALL.iter().flat_map(|&a| Basis::ALL.iter().map(move |&b| (a, b))).collect()
}

fn outcome_projector(setting: BasisPair, outcome: (u8, u8)) -> CMatrix {
    setting.0.projector(outcome.0).kron(&setting.1.projector(outcome.1))
}

const OUTCOMES: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_a: Basis,
    pub setting_b: Basis,
    pub outcome_a: u8,
    pub outcome_b: u8,
    pub counts: u64,
}

impl CountRecord {
    pub fn setting(&self) -> BasisPair {
        (self.setting_a, self.setting_b)
    }
}

fn check_state(rho: &CMatrix) -> Result<(), TomoError> {
    if rho.rows() != 4 || rho.cols() != 4 {
        return Err(TomoError::BadState(format!("{}x{}", rho.rows(), rho.cols())));
    }
    if !rho.is_hermitian(1e-10) || (rho.trace().re - 1.0).abs() > 1e-9 || min_eigenvalue(rho)? < -1e-10 {
        return Err(TomoError::BadState("not a density matrix".into()));
    }
    Ok(())
}

/// Born probability of each outcome of one setting, in `OUTCOMES` order.
pub fn setting_probabilities(rho: &CMatrix, setting: BasisPair) -> [f64; 4] {
    OUTCOMES.map(|o| outcome_projector(setting, o).trace_product(rho).re.max(0.0))
}

/// Poisson counts with mean pairs_total·p/|settings|.
pub fn simulate_counts(rho: &CMatrix, bases: &[BasisPair], pairs_total: u64, seed: u64) -> Result<Vec<CountRecord>, TomoError> {
    if bases.is_empty() {
        return Err(TomoError::EmptyBasisSet);
    }
    if pairs_total == 0 {
        return Err(TomoError::NoPairs);
    }
    check_state(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = pairs_total as f64 / bases.len() as f64;
    let mut out = Vec::with_capacity(bases.len() * 4);
    for &setting in bases {
        let probs = setting_probabilities(rho, setting);
        for (o, p) in OUTCOMES.iter().zip(probs) {
            let mean = per * p;
            let counts = if mean > 0.0 {
                Poisson::new(mean).expect("positive finite mean").sample(&mut rng) as u64
            } else {
                0
            };
            out.push(CountRecord { setting_a: setting.0, setting_b: setting.1, outcome_a: o.0, outcome_b: o.1, counts });
        }
    }
    Ok(out)
}

/// Frequencies per setting, in `OUTCOMES` order.
pub type Frequencies = BTreeMap<BasisPair, [f64; 4]>;

/// Exact outcome probabilities for every Pauli pair.
pub fn exact_frequencies(rho: &CMatrix) -> Frequencies {
    pauli_pairs().into_iter().map(|s| (s, setting_probabilities(rho, s))).collect()
}

pub fn frequencies(records: &[CountRecord]) -> Result<Frequencies, TomoError> {
    let mut raw: BTreeMap<BasisPair, [f64; 4]> = BTreeMap::new();
    for r in records {
        if r.outcome_a > 1 {
            return Err(TomoError::BadOutcome(r.outcome_a));
        }
        if r.outcome_b > 1 {
            return Err(TomoError::BadOutcome(r.outcome_b));
        }
        let slot = (r.outcome_a * 2 + r.outcome_b) as usize;
        raw.entry(r.setting()).or_insert([0.0; 4])[slot] += r.counts as f64;
    }
    Ok(raw)
}

fn check_complete(freqs: &Frequencies) -> Result<(), TomoError> {
    let missing: Vec<String> = pauli_pairs()
        .into_iter()
        .filter(|s| !freqs.contains_key(s))
        .map(|(a, b)| format!("{a}{b}"))
        .collect();
    if !missing.is_empty() {
        return Err(TomoError::Incomplete(missing));
    }
    for (s, f) in freqs {
        if f.iter().sum::<f64>() <= 0.0 {
            return Err(TomoError::EmptySetting(format!("{}{}", s.0, s.1)));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Mle,
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Method::Linear),
            "mle" => Ok(Method::Mle),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TomoResult {
    pub rho: LabeledOperator,
    pub method: Method,
    pub purity: f64,
    pub fidelity: Option<f64>,
    /// False when linear inversion left a negative eigenvalue.
    pub physical: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl TomoResult {
    pub fn with_target(mut self, target: &LabeledVector) -> Result<Self, TomoError> {
        self.fidelity = Some(state_fidelity(self.rho.matrix(), target)?);
        Ok(self)
    }
}

fn pauli_1q(k: usize) -> CMatrix {
    match k {
        0 => gates::id2(),
        1 => gates::pauli_x(),
        2 => gates::pauli_y(),
        _ => gates::pauli_z(),
    }
}

fn basis_index(b: Basis) -> usize {
    match b {
        Basis::X => 1,
        Basis::Y => 2,
        Basis::Z => 3,
    }
}

/// ρ = ¼ Σ ⟨P⊗Q⟩ P⊗Q, each expectation averaged over every compatible setting.
pub fn linear_inversion(freqs: &Frequencies) -> Result<CMatrix, TomoError> {
    check_complete(freqs)?;
    let mut rho = CMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (&(a, b), f) in freqs {
                if (i != 0 && basis_index(a) != i) || (j != 0 && basis_index(b) != j) {
                    continue;
                }
                let total: f64 = f.iter().sum();
                let e: f64 = OUTCOMES
                    .iter()
                    .zip(f)
                    .map(|(&(oa, ob), c)| {
                        let sa = if i != 0 && oa == 1 { -1.0 } else { 1.0 };
                        let sb = if j != 0 && ob == 1 { -1.0 } else { 1.0 };
                        sa * sb * c
                    })
                    .sum::<f64>()
                    / total;
                sum += e;
                n += 1;
            }
            let expectation = sum / n as f64;
            rho = &rho + &pauli_1q(i).kron(&pauli_1q(j)).scale_real(expectation / 4.0);
        }
    }
    Ok(rho.hermitian_part())
}

fn log_likelihood(rho: &CMatrix, data: &[(CMatrix, f64)]) -> f64 {
    data.iter().filter(|(_, f)| *f > 0.0).map(|(p, f)| f * p.trace_product(rho).re.max(1e-300).ln()).sum()
}

/// Fixed-point iteration ρ ← RρR / Tr(RρR), R = Σ f_k Π_k / p_k.
pub fn mle(freqs: &Frequencies) -> Result<(CMatrix, usize, f64), TomoError> {
    check_complete(freqs)?;
    let total: f64 = freqs.values().flat_map(|f| f.iter()).sum();
    let data: Vec<(CMatrix, f64)> = freqs
        .iter()
        .flat_map(|(&s, f)| OUTCOMES.iter().zip(f).map(move |(&o, c)| (outcome_projector(s, o), c / total)))
        .collect();
    let mut rho = CMatrix::identity(4).scale_real(0.25);
    let mut ll = log_likelihood(&rho, &data);
    for it in 1..=MLE_MAX_ITER {
        let mut r = CMatrix::zeros(4, 4);
        for (p, f) in &data {
            if *f > 0.0 {
                let pk = p.trace_product(&rho).re.max(1e-300);
                r = &r + &p.scale_real(f / pk);
            }
        }
        let next = (&(&r * &rho) * &r).hermitian_part();
        let tr = next.trace().re;
        rho = next.scale_real(1.0 / tr);
        let new_ll = log_likelihood(&rho, &data);
        let gain = new_ll - ll;
        ll = new_ll;
        if gain < MLE_TOL {
            return Ok((rho, it, ll));
        }
    }
    log::warn!("MLE stopped after {MLE_MAX_ITER} iterations without reaching the gain tolerance");
    Ok((rho, MLE_MAX_ITER, ll))
}

pub fn reconstruct(records: &[CountRecord], method: Method) -> Result<TomoResult, TomoError> {
    reconstruct_frequencies(&frequencies(records)?, method)
}

pub fn reconstruct_frequencies(freqs: &Frequencies, method: Method) -> Result<TomoResult, TomoError> {
    let (rho, iterations, ll) = match method {
        Method::Linear => {
            let rho = linear_inversion(freqs)?;
            (rho, 0, f64::NAN)
        }
        Method::Mle => mle(freqs)?,
    };
    let physical = min_eigenvalue(&rho)? >= -PSD_TOL;
    let purity = rho.trace_product(&rho).re;
    Ok(TomoResult {
        rho: LabeledOperator::new(&TOMO_LABELS, &[2, 2], rho)?,
        method,
        purity,
        fidelity: None,
        physical,
        iterations,
        log_likelihood: ll,
    })
}

pub fn state_fidelity(rho: &CMatrix, target: &LabeledVector) -> Result<f64, TomoError> {
    Ok(fidelity(rho, &target.to_density().into_matrix())?)
}

pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64, TomoError> {
    Ok(0.5 * trace_norm(&(a - b))?)
}

/// α|HH⟩ + β|VV⟩ for a system input α|H⟩ + β|V⟩.
pub fn entangled_target(input: [C64; 2]) -> LabeledVector {
    LabeledVector::new(&TOMO_LABELS, &[2, 2], vec![input[0], cr(0.0), cr(0.0), input[1]]).expect("4 amplitudes")
}

/// Targets for the three catalog inputs H, D, R.
pub fn reference_targets() -> [LabeledVector; 3] {
    [1, 2, 3].map(|z| entangled_target(ExperimentSetting::new(z, 1, 1, 1).expect("catalog index").input_state()))
}

/// Polarization state of the heralded pair behind the entangling PBS, from the Fock model.
pub fn heralded_pair_state(input: [C64; 2]) -> Result<CMatrix, TomoError> {
    let (out, _) = pbs_gate(input)?;
    let mut amps = vec![cr(0.0); 4];
    for (cfg, a) in out.terms() {
        let t = cfg.iter().find(|m| m.path == "t").expect("one photon per port");
        let r = cfg.iter().find(|m| m.path == "r").expect("one photon per port");
        amps[t.pol.index() * 2 + r.pol.index()] += *a;
    }
    Ok(CMatrix::outer(&amps, &amps))
}

pub fn write_counts_csv<W: Write>(records: &[CountRecord], w: W) -> Result<(), TomoError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_counts_csv<R: Read>(r: R) -> Result<Vec<CountRecord>, TomoError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        let rec: CountRecord = rec?;
        if rec.outcome_a > 1 || rec.outcome_b > 1 {
            return Err(TomoError::BadOutcome(rec.outcome_a.max(rec.outcome_b)));
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FringeScan {
    pub phases: Vec<f64>,
    pub rates: Vec<f64>,
    pub visibility: f64,
    /// Fitted mean, cosine and sine amplitudes.
    pub fit: [f64; 3],
    pub degenerate: bool,
}

/// Least-squares fit of a + b cos φ + c sin φ; V = √(b²+c²)/a.
pub fn fit_fringe(phases_deg: &[f64], rates: &[f64]) -> Result<FringeScan, TomoError> {
    let span = phases_deg.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - phases_deg.iter().cloned().fold(f64::INFINITY, f64::min);
    if phases_deg.len() < 3 || span < 360.0 - 1e-9 {
        return Err(TomoError::ShortGrid(span.max(0.0)));
    }
    let mut g = [[0.0; 3]; 3];
    let mut h = [0.0; 3];
    for (&ph, &y) in phases_deg.iter().zip(rates) {
        let t = ph.to_radians();
        let f = [1.0, t.cos(), t.sin()];
        for i in 0..3 {
            h[i] += f[i] * y;
            for j in 0..3 {
                g[i][j] += f[i] * f[j];
            }
        }
    }
    let fit = solve3(g, h);
    let amp = fit[1].hypot(fit[2]);
    let degenerate = !(fit[0] > 0.0) || amp <= 1e-12 * fit[0].abs().max(1e-300);
    let visibility = if degenerate { 0.0 } else { (amp / fit[0]).clamp(0.0, 1.0) };
    Ok(FringeScan { phases: phases_deg.to_vec(), rates: rates.to_vec(), visibility, fit, degenerate })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for k in 0..3 {
        let piv = (k..3).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).expect("rows");
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..3 {
            let f = a[i][k] / a[k][k];
            for j in k..3 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let s: f64 = (k + 1..3).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Coincidence rate of switch port 0 and ancilla port 0 while `switch.phase` is scanned.
pub fn fringe_scan(
    spec: &CircuitSpec,
    setting: &ExperimentSetting,
    overlap: f64,
    phases_deg: &[f64],
) -> Result<FringeScan, TomoError> {
    let mut rates = Vec::with_capacity(phases_deg.len());
    for &ph in phases_deg {
        let mut params = setting.circuit_params();
        params.push(("eraser.overlap".into(), overlap));
        params.push(("switch.phase".into(), ph));
        let program = spec.instantiate(&params)?;
        let stats = switch_statistics(&program)?;
        rates.push(stats.ports[0][0] * stats.success);
    }
    fit_fringe(phases_deg, &rates)
}

/// Evenly spaced phases over [0°, 360°].
pub fn phase_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| 360.0 * i as f64 / (points.max(2) - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::reference_switch_spec;
    use crate::qmath::c;

    fn bell() -> LabeledVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        entangled_target([cr(h), cr(h)])
    }

    #[test]
    fn projectors_resolve_identity() {
        for b in Basis::ALL {
            let sum = &b.projector(0) + &b.projector(1);
            assert!(sum.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        }
        let z0 = Basis::Z.projector(0);
        assert!((z0[(0, 0)].re - 1.0).abs() < 1e-15 && z0[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn hh_in_zz_lands_in_one_outcome() {
        let rho = entangled_target([cr(1.0), cr(0.0)]).to_density().into_matrix();
        let recs = simulate_counts(&rho, &[(Basis::Z, Basis::Z)], 3000, 1).unwrap();
        assert!(recs.iter().all(|r| (r.outcome_a, r.outcome_b) == (0, 0) || r.counts == 0));
        assert!(recs[0].counts > 2500);
    }

    #[test]
    fn per_setting_totals_near_a_third_of_ten_thousand() {
        let rho = bell().to_density().into_matrix();
        let recs = simulate_counts(&rho, &pauli_pairs(), 30_000, 3).unwrap();
        for (_, f) in frequencies(&recs).unwrap() {
            let t: f64 = f.iter().sum();
            assert!((t - 3333.3).abs() < 250.0, "{t}");
        }
    }

    #[test]
    fn same_seed_same_counts() {
        let rho = bell().to_density().into_matrix();
        let a = simulate_counts(&rho, &pauli_pairs(), 30_000, 9).unwrap();
        let b = simulate_counts(&rho, &pauli_pairs(), 30_000, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_counts(&rho, &pauli_pairs(), 30_000, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_empty_and_incomplete_inputs() {
        let rho = bell().to_density().into_matrix();
        assert!(matches!(simulate_counts(&rho, &[], 10, 0), Err(TomoError::EmptyBasisSet)));
        let recs = simulate_counts(&rho, &[(Basis::X, Basis::X)], 100, 0).unwrap();
        match reconstruct(&recs, Method::Linear) {
            Err(TomoError::Incomplete(m)) => {
                assert_eq!(m.len(), 8);
                assert!(m.contains(&"ZZ".to_string()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_inversion_is_exact_on_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for rank in 1..=4 {
            let rho = crate::qmath::random::random_density(&mut rng, 4, rank);
            let est = linear_inversion(&exact_frequencies(&rho)).unwrap();
            assert!(est.max_abs_diff(&rho) < 1e-10);
        }
    }

    #[test]
    fn noiseless_targets_are_recovered() {
        for t in reference_targets() {
            let rho = t.to_density().into_matrix();
            let res = reconstruct_frequencies(&exact_frequencies(&rho), Method::Mle).unwrap().with_target(&t).unwrap();
            assert!(res.fidelity.unwrap() >= 0.999, "{:?}", res.fidelity);
            assert!(res.purity >= 0.999);
            assert!((res.rho.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn r_input_gives_minus_i_target() {
        let t = &reference_targets()[2];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = [cr(h), cr(0.0), cr(0.0), c(0.0, -h)];
        let ov: C64 = t.amplitudes().iter().zip(want).map(|(a, b)| a.conj() * b).sum();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heralded_state_matches_targets() {
        for t in reference_targets() {
            let amps = t.amplitudes();
            let rho = heralded_pair_state([amps[0], amps[3]]).unwrap();
            assert!((state_fidelity(&rho, &t).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let rho = bell().to_density().into_matrix();
        let recs = simulate_counts(&rho, &pauli_pairs(), 900, 2).unwrap();
        let mut buf = Vec::new();
        write_counts_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("setting_a,setting_b,outcome_a,outcome_b,counts\n"));
        assert_eq!(read_counts_csv(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn fidelity_is_symmetric_and_unit_on_self() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let a = crate::qmath::random::random_density(&mut rng, 4, 2);
            let b = crate::qmath::random::random_density(&mut rng, 4, 3);
            assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
            assert!((fidelity(&a, &b).unwrap() - fidelity(&b, &a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_synthetic_fringe() {
        let ph = phase_grid(37);
        let rates: Vec<f64> = ph.iter().map(|p| 2.0 * (1.0 + 0.6 * (p.to_radians() - 0.3).cos())).collect();
        let fit = fit_fringe(&ph, &rates).unwrap();
        assert!((fit.visibility - 0.6).abs() < 1e-12);
        let flat = fit_fringe(&ph, &vec![1.0; ph.len()]).unwrap();
        assert!(flat.degenerate && flat.visibility == 0.0);
        assert!(matches!(fit_fringe(&ph[..10], &rates[..10]), Err(TomoError::ShortGrid(_))));
    }

    #[test]
    fn switch_fringe_visibility_tracks_overlap() {
        let spec = reference_switch_spec();
        let ph = phase_grid(25);
        for z in 1..=3 {
            let s = ExperimentSetting::new(z, 1, 1, 1).unwrap();
            let v1 = fringe_scan(&spec, &s, 1.0, &ph).unwrap();
            assert!((v1.visibility - 1.0).abs() < 1e-6, "{}", v1.visibility);
            let v98 = fringe_scan(&spec, &s, 0.98, &ph).unwrap();
            assert!((v98.visibility - 0.98).abs() < 1e-3, "{}", v98.visibility);
            let v0 = fringe_scan(&spec, &s, 0.0, &ph).unwrap();
            assert!(v0.visibility.abs() < 1e-6, "{}", v0.visibility);
        }
    }
}
