//! Two-photon linear optics: modes, elements, evolution and post-selection.
//!
//! Conventions: a 50:50 beamsplitter sends input `a` to `(c + i·d)/√2` and input `b`
//! to `(i·c + d)/√2`. A PBS transmits H (`a→c`, `b→d`) and reflects V (`a→d`,
//! `b→c`), all with unit amplitude.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{CircuitError, CircuitSpec, Program};
use crate::qmath::{c, cr, CMatrix, C64};
use crate::settings::{ExperimentSetting, SettingError};

pub const NULL_POSTSELECTION: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub fn index(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Pol::H
        } else {
            Pol::V
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub path: String,
    pub pol: Pol,
    pub tbin: u32,
}

impl Mode {
    pub fn new(path: &str, pol: Pol, tbin: u32) -> Self {
        Self { path: path.to_string(), pol, tbin }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:?}:{}", self.path, self.pol, self.tbin)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("unknown path `{0}`")]
    UnknownPath(String),
    #[error("temporal bin {bin} on path `{path}` outside 0..{bins}")]
    BinOutOfRange { path: String, bin: i64, bins: u32 },
    #[error("output path `{0}` is already occupied")]
    OccupiedOutput(String),
    #[error("null post-selection (probability {0:e})")]
    NullPostselection(f64),
    #[error("photon number mismatch: expected {expected}, got {got}")]
    PhotonNumber { expected: usize, got: usize },
    #[error("overlap {0} outside [0, 1]")]
    BadOverlap(f64),
    #[error(transparent)]
    Setting(#[from] SettingError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaveplateKind {
    Hwp,
    Qwp,
}

fn rotation(theta: f64) -> CMatrix {
    let (s, co) = theta.sin_cos();
    CMatrix::from_rows([[cr(co), cr(-s)], [cr(s), cr(co)]])
}

/// Jones matrix on (H, V) for a fast axis at `theta` radians.
pub fn jones(kind: WaveplateKind, theta: f64) -> CMatrix {
    match kind {
        WaveplateKind::Hwp => {
            let (s, co) = (2.0 * theta).sin_cos();
            CMatrix::from_rows([[cr(co), cr(s)], [cr(s), cr(-co)]])
        }
        WaveplateKind::Qwp => {
            let d = CMatrix::diag(&[cr(1.0), c(0.0, -1.0)]);
            &(&rotation(theta) * &d) * &rotation(-theta)
        }
    }
}

/// Optical element; angles and phases in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OpticalElement {
    Bs50 { inputs: [String; 2], outputs: [String; 2] },
    Pbs { inputs: [String; 2], outputs: [String; 2] },
    Hwp { path: String, theta: f64 },
    Qwp { path: String, theta: f64 },
    Phase { path: String, phi: f64 },
    Delay { path: String, bins: i32 },
    /// Two-bin mismatch: bin 0 → v·bin0 + √(1−v²)·bin1, bin 1 → −√(1−v²)·bin0 + v·bin1.
    Overlap { path: String, value: f64 },
    SwapPaths { a: String, b: String },
}

impl OpticalElement {
    pub fn input_paths(&self) -> Vec<&str> {
        match self {
            Self::Bs50 { inputs, .. } | Self::Pbs { inputs, .. } => inputs.iter().map(String::as_str).collect(),
            Self::Hwp { path, .. }
            | Self::Qwp { path, .. }
            | Self::Phase { path, .. }
            | Self::Delay { path, .. }
            | Self::Overlap { path, .. } => vec![path.as_str()],
            Self::SwapPaths { a, b } => vec![a.as_str(), b.as_str()],
        }
    }

    pub fn output_paths(&self) -> Vec<&str> {
        match self {
            Self::Bs50 { outputs, .. } | Self::Pbs { outputs, .. } => outputs.iter().map(String::as_str).collect(),
            _ => self.input_paths(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bs50 { .. } => "bs",
            Self::Pbs { .. } => "pbs",
            Self::Hwp { .. } => "hwp",
            Self::Qwp { .. } => "qwp",
            Self::Phase { .. } => "phase",
            Self::Delay { .. } => "delay",
            Self::Overlap { .. } => "overlap",
            Self::SwapPaths { .. } => "swap",
        }
    }

    /// Single-photon image of `mode`, or `None` if the element does not touch it.
    pub fn transfer(&self, mode: &Mode, bins: u32) -> Result<Option<Vec<(Mode, C64)>>, FockError> {
        let at = |path: &str, pol: Pol, tbin: u32| Mode { path: path.to_string(), pol, tbin };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let out = match self {
            Self::Bs50 { inputs, outputs } => {
                let which = inputs.iter().position(|p| *p == mode.path);
                match which {
                    None => return Ok(None),
                    Some(k) => {
                        let (t, r) = (cr(h), c(0.0, h));
                        let (ac, ad) = if k == 0 { (t, r) } else { (r, t) };
                        vec![(at(&outputs[0], mode.pol, mode.tbin), ac), (at(&outputs[1], mode.pol, mode.tbin), ad)]
                    }
                }
            }
            Self::Pbs { inputs, outputs } => match inputs.iter().position(|p| *p == mode.path) {
                None => return Ok(None),
                Some(k) => {
                    let port = match (k, mode.pol) {
                        (0, Pol::H) | (1, Pol::V) => 0,
                        _ => 1,
                    };
                    vec![(at(&outputs[port], mode.pol, mode.tbin), cr(1.0))]
                }
            },
            Self::Hwp { path, theta } | Self::Qwp { path, theta } => {
                if *path != mode.path {
                    return Ok(None);
                }
                let kind = if matches!(self, Self::Hwp { .. }) { WaveplateKind::Hwp } else { WaveplateKind::Qwp };
                let j = jones(kind, *theta);
                let col = mode.pol.index();
                vec![(at(path, Pol::H, mode.tbin), j[(0, col)]), (at(path, Pol::V, mode.tbin), j[(1, col)])]
            }
            Self::Phase { path, phi } => {
                if *path != mode.path {
                    return Ok(None);
                }
                vec![(mode.clone(), C64::from_polar(1.0, *phi))]
            }
            Self::Delay { path, bins: shift } => {
                if *path != mode.path {
                    return Ok(None);
                }
                let nb = mode.tbin as i64 + *shift as i64;
                if nb < 0 || nb >= bins as i64 {
                    return Err(FockError::BinOutOfRange { path: path.clone(), bin: nb, bins });
                }
                vec![(at(path, mode.pol, nb as u32), cr(1.0))]
            }
            Self::Overlap { path, value } => {
                if *path != mode.path {
                    return Ok(None);
                }
                if !(0.0..=1.0).contains(value) {
                    return Err(FockError::BadOverlap(*value));
                }
                if bins < 2 {
                    return Err(FockError::BinOutOfRange { path: path.clone(), bin: 1, bins });
                }
                let s = (1.0 - value * value).max(0.0).sqrt();
                match mode.tbin {
                    0 => vec![(at(path, mode.pol, 0), cr(*value)), (at(path, mode.pol, 1), cr(s))],
                    1 => vec![(at(path, mode.pol, 0), cr(-s)), (at(path, mode.pol, 1), cr(*value))],
                    _ => vec![(mode.clone(), cr(1.0))],
                }
            }
            Self::SwapPaths { a, b } => {
                if mode.path == *a {
                    vec![(at(b, mode.pol, mode.tbin), cr(1.0))]
                } else if mode.path == *b {
                    vec![(at(a, mode.pol, mode.tbin), cr(1.0))]
                } else {
                    return Ok(None);
                }
            }
        };
        Ok(Some(out.into_iter().filter(|(_, a)| a.norm() > 0.0).collect()))
    }

    /// Single-photon transfer matrix on the input modes (all pols, all bins),
    /// rows indexed by the matching output modes.
    pub fn transfer_matrix(&self, bins: u32) -> Result<(Vec<Mode>, Vec<Mode>, CMatrix), FockError> {
        let modes_on = |paths: &[&str]| -> Vec<Mode> {
            let mut v = Vec::new();
            for p in paths {
                for pol in [Pol::H, Pol::V] {
                    for t in 0..bins {
                        v.push(Mode::new(p, pol, t));
                    }
                }
            }
            v
        };
        let ins = modes_on(&self.input_paths());
        let outs = modes_on(&self.output_paths());
        let mut m = CMatrix::zeros(outs.len(), ins.len());
        for (j, mode) in ins.iter().enumerate() {
            for (target, amp) in self.transfer(mode, bins)?.unwrap_or_default() {
                let i = outs.iter().position(|o| *o == target).expect("output mode in range");
                m[(i, j)] += amp;
            }
        }
        Ok((ins, outs, m))
    }
}

/// Declared paths and temporal-bin range.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeUniverse {
    pub paths: BTreeSet<String>,
    pub bins: u32,
}

impl ModeUniverse {
    pub fn new<S: AsRef<str>>(paths: &[S], bins: u32) -> Self {
        Self { paths: paths.iter().map(|p| p.as_ref().to_string()).collect(), bins: bins.max(1) }
    }

    fn check(&self, path: &str) -> Result<(), FockError> {
        if self.paths.contains(path) {
            Ok(())
        } else {
            Err(FockError::UnknownPath(path.to_string()))
        }
    }
}

/// Occupation configuration: sorted multiset of modes.
pub type Config = Vec<Mode>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockState {
    universe: ModeUniverse,
    photons: usize,
    terms: BTreeMap<Config, C64>,
}

fn multiplicity_factorial(config: &[Mode]) -> f64 {
    let mut f = 1.0;
    let mut run = 1usize;
    for w in config.windows(2) {
        if w[0] == w[1] {
            run += 1;
            f *= run as f64;
        } else {
            run = 1;
        }
    }
    f
}

impl FockState {
    pub fn vacuum(universe: ModeUniverse) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), cr(1.0));
        Self { universe, photons: 0, terms }
    }

    /// Superposition Σ amp·|config⟩ over normalized occupation states.
    pub fn from_terms(universe: ModeUniverse, terms: Vec<(Config, C64)>) -> Result<Self, FockError> {
        let photons = terms.first().map(|(c, _)| c.len()).unwrap_or(0);
        let mut map = BTreeMap::new();
        for (mut config, amp) in terms {
            if config.len() != photons {
                return Err(FockError::PhotonNumber { expected: photons, got: config.len() });
            }
            for m in &config {
                universe.check(&m.path)?;
                if m.tbin >= universe.bins {
                    return Err(FockError::BinOutOfRange { path: m.path.clone(), bin: m.tbin as i64, bins: universe.bins });
                }
            }
            config.sort();
            *map.entry(config).or_insert(cr(0.0)) += amp;
        }
        Ok(Self { universe, photons, terms: map })
    }

    pub fn universe(&self) -> &ModeUniverse {
        &self.universe
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn terms(&self) -> &BTreeMap<Config, C64> {
        &self.terms
    }

    pub fn amplitude(&self, config: &[Mode]) -> C64 {
        let mut key = config.to_vec();
        key.sort();
        self.terms.get(&key).copied().unwrap_or(cr(0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> BTreeMap<Config, f64> {
        self.terms.iter().map(|(k, a)| (k.clone(), a.norm_sqr())).collect()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.terms.iter().map(|(k, a)| a.conj() * other.terms.get(k).copied().unwrap_or(cr(0.0))).sum()
    }
}

/// Applies one element by expanding every photon's creation operator.
pub fn evolve(state: &FockState, element: &OpticalElement) -> Result<FockState, FockError> {
    let uni = &state.universe;
    for p in element.input_paths().into_iter().chain(element.output_paths()) {
        uni.check(p)?;
    }
    let inputs: BTreeSet<&str> = element.input_paths().into_iter().collect();
    for out in element.output_paths() {
        if !inputs.contains(out) && state.terms.keys().any(|cfg| cfg.iter().any(|m| m.path == out)) {
            return Err(FockError::OccupiedOutput(out.to_string()));
        }
    }
    let mut images: BTreeMap<Mode, Vec<(Mode, C64)>> = BTreeMap::new();
    for cfg in state.terms.keys() {
        for m in cfg {
            if !images.contains_key(m) {
                let img = element.transfer(m, uni.bins)?.unwrap_or_else(|| vec![(m.clone(), cr(1.0))]);
                images.insert(m.clone(), img);
            }
        }
    }
    let mut out: BTreeMap<Config, C64> = BTreeMap::new();
    for (cfg, &amp) in &state.terms {
        let pre = amp / multiplicity_factorial(cfg).sqrt();
        let lists: Vec<&Vec<(Mode, C64)>> = cfg.iter().map(|m| &images[m]).collect();
        let mut idx = vec![0usize; lists.len()];
        loop {
            let mut coef = pre;
            let mut modes: Config = Vec::with_capacity(lists.len());
            for (l, &i) in lists.iter().zip(&idx) {
                coef *= l[i].1;
                modes.push(l[i].0.clone());
            }
            modes.sort();
            let f = multiplicity_factorial(&modes).sqrt();
            *out.entry(modes).or_insert(cr(0.0)) += coef * f;
            // odometer over photon choices
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < lists[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    out.retain(|_, a| a.norm_sqr() > 1e-32);
    Ok(FockState { universe: state.universe.clone(), photons: state.photons, terms: out })
}

pub fn evolve_all(state: &FockState, elements: &[OpticalElement]) -> Result<FockState, FockError> {
    let mut s = state.clone();
    for e in elements {
        s = evolve(&s, e)?;
    }
    Ok(s)
}

/// Keeps configurations accepted by `pattern`; returns the renormalized state and
/// the probability mass of the accepted part.
pub fn postselect(state: &FockState, pattern: impl Fn(&[Mode]) -> bool) -> Result<(FockState, f64), FockError> {
    let kept: BTreeMap<Config, C64> =
        state.terms.iter().filter(|(k, _)| pattern(k)).map(|(k, a)| (k.clone(), *a)).collect();
    let p: f64 = kept.values().map(|a| a.norm_sqr()).sum();
    if p < NULL_POSTSELECTION {
        return Err(FockError::NullPostselection(p));
    }
    let s = 1.0 / p.sqrt();
    let terms = kept.into_iter().map(|(k, a)| (k, a * s)).collect();
    Ok((FockState { universe: state.universe.clone(), photons: state.photons, terms }, p.min(1.0)))
}

/// Post-selected PBS entangling gate: system α|H⟩+β|V⟩ in `s`, ancilla |D⟩ in `a`,
/// one photon in each of the outputs `t` (system) and `r` (ancilla).
pub fn pbs_gate(input: [C64; 2]) -> Result<(FockState, f64), FockError> {
    let universe = ModeUniverse::new(&["s", "a", "t", "r"], 1);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut terms = Vec::new();
    for (sp, amp) in [(Pol::H, input[0]), (Pol::V, input[1])] {
        for ap in [Pol::H, Pol::V] {
            terms.push((vec![Mode::new("s", sp, 0), Mode::new("a", ap, 0)], amp * h));
        }
    }
    let state = FockState::from_terms(universe, terms)?;
    let pbs = OpticalElement::Pbs { inputs: ["s".into(), "a".into()], outputs: ["t".into(), "r".into()] };
    let out = evolve(&state, &pbs)?;
    let (t, r) = (vec!["t".to_string()], vec!["r".to_string()]);
    postselect(&out, |cfg| count_in(cfg, &t) == 1 && count_in(cfg, &r) == 1)
}

/// Coincidence probability behind a 50:50 beamsplitter for two H photons in bins `bins`.
pub fn hom_coincidence(bins: [u32; 2]) -> Result<f64, FockError> {
    let universe = ModeUniverse::new(&["a", "b", "c", "d"], bins[0].max(bins[1]) + 1);
    let s = FockState::from_terms(universe, vec![(vec![Mode::new("a", Pol::H, bins[0]), Mode::new("b", Pol::H, bins[1])], cr(1.0))])?;
    let bs = OpticalElement::Bs50 { inputs: ["a".into(), "b".into()], outputs: ["c".into(), "d".into()] };
    let out = evolve(&s, &bs)?;
    let (c_, d_) = (vec!["c".to_string()], vec!["d".to_string()]);
    Ok(out.probabilities().iter().filter(|(k, _)| count_in(k, &c_) == 1 && count_in(k, &d_) == 1).map(|(_, p)| p).sum())
}

/// Number of photons of `config` in the given paths.
pub fn count_in(config: &[Mode], paths: &[String]) -> usize {
    config.iter().filter(|m| paths.contains(&m.path)).count()
}

/// Outcome statistics of the switch table after coincidence post-selection.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchStatistics {
    /// p[b][d]: b = ancilla polarization, d = decoded control outcome.
    pub probs: [[f64; 2]; 2],
    /// Probability of one photon at the switch ports and one at the ancilla ports.
    pub success: f64,
    /// Joint probabilities of (switch port, ancilla port) irrespective of polarization.
    pub ports: [[f64; 2]; 2],
}

/// Runs an instantiated switch program and decodes (b, d).
pub fn switch_statistics(program: &Program) -> Result<SwitchStatistics, FockError> {
    let out = program.run()?;
    let sw = program.detector("switch").ok_or_else(|| FockError::UnknownPath("detector switch".into()))?;
    let an = program.detector("ancilla").ok_or_else(|| FockError::UnknownPath("detector ancilla".into()))?;
    let (post, success) = postselect(&out, |cfg| count_in(cfg, sw) == 1 && count_in(cfg, an) == 1)?;
    let mut probs = [[0.0; 2]; 2];
    let mut ports = [[0.0; 2]; 2];
    for (cfg, p) in post.probabilities() {
        let s = cfg.iter().find(|m| sw.contains(&m.path)).expect("one switch photon");
        let a = cfg.iter().find(|m| an.contains(&m.path)).expect("one ancilla photon");
        let sp = sw.iter().position(|x| *x == s.path).expect("switch port");
        let ap = an.iter().position(|x| *x == a.path).expect("ancilla port");
        probs[a.pol.index()][sp ^ ap] += p;
        ports[sp][ap] += p;
    }
    Ok(SwitchStatistics { probs, success, ports })
}

/// Reference switch table as shipped in `crates/core/circuits/switch.circ`.
pub const REFERENCE_SWITCH_CIRCUIT: &str = include_str!("../circuits/switch.circ");

/// The parsed reference switch table.
pub fn reference_switch_spec() -> CircuitSpec {
    crate::circuit::parse_circuit(REFERENCE_SWITCH_CIRCUIT).expect("reference circuit parses")
}

/// End-to-end program for one catalog setting with eraser overlap `overlap`.
pub fn build_switch_table(setting: &ExperimentSetting, overlap: f64) -> Result<Program, FockError> {
    build_switch_table_from(&reference_switch_spec(), setting, overlap)
}

pub fn build_switch_table_from(
    spec: &CircuitSpec,
    setting: &ExperimentSetting,
    overlap: f64,
) -> Result<Program, FockError> {
    setting.validate()?;
    if !(0.0..=1.0).contains(&overlap) {
        return Err(FockError::BadOverlap(overlap));
    }
    let mut params = setting.circuit_params();
    params.push(("eraser.overlap".into(), overlap));
    spec.instantiate(&params)
}

/// (b, d) distribution of one setting under the Fock model.
pub fn switch_probabilities(setting: &ExperimentSetting, overlap: f64) -> Result<[[f64; 2]; 2], FockError> {
    Ok(switch_statistics(&build_switch_table(setting, overlap)?)?.probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(paths: &[&str], bins: u32) -> ModeUniverse {
        ModeUniverse::new(paths, bins)
    }

    fn bs(a: &str, b: &str, c: &str, d: &str) -> OpticalElement {
        OpticalElement::Bs50 { inputs: [a.into(), b.into()], outputs: [c.into(), d.into()] }
    }

    #[test]
    fn hwp_rotates_h_to_d() {
        let j = jones(WaveplateKind::Hwp, 22.5f64.to_radians());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((j[(0, 0)] - cr(s)).norm() < 1e-15 && (j[(1, 0)] - cr(s)).norm() < 1e-15);
        let j0 = jones(WaveplateKind::Hwp, 0.0);
        assert!((j0[(0, 0)].norm() - 1.0).abs() < 1e-15 && j0[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn qwp_45_then_hwp_0_gives_r() {
        let q = jones(WaveplateKind::Qwp, 45f64.to_radians());
        let h = jones(WaveplateKind::Hwp, 0.0);
        let u = &h * &q;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = [cr(s), c(0.0, -s)];
        let ov = r[0].conj() * u[(0, 0)] + r[1].conj() * u[(1, 0)];
        assert!((ov.norm() - 1.0).abs() < 1e-12);
        // the opposite multiplication order yields the other circular state
        let u2 = &q * &h;
        let ov2 = r[0].conj() * u2[(0, 0)] + r[1].conj() * u2[(1, 0)];
        assert!(ov2.norm() < 1e-12);
        assert!(q.is_unitary(1e-14) && h.is_unitary(1e-14));
    }

    #[test]
    fn single_photon_beamsplitter() {
        let u = uni(&["a", "b", "c", "d"], 1);
        let s = FockState::from_terms(u, vec![(vec![Mode::new("a", Pol::H, 0)], cr(1.0))]).unwrap();
        let out = evolve(&s, &bs("a", "b", "c", "d")).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&[Mode::new("c", Pol::H, 0)]) - cr(h)).norm() < 1e-15);
        assert!((out.amplitude(&[Mode::new("d", Pol::H, 0)]) - c(0.0, h)).norm() < 1e-15);
    }

    #[test]
    fn hom_dip() {
        let u = uni(&["a", "b"], 2);
        let s = FockState::from_terms(u, vec![(vec![Mode::new("a", Pol::H, 0), Mode::new("b", Pol::H, 0)], cr(1.0))])
            .unwrap();
        let out = evolve(&s, &bs("a", "b", "a", "b")).unwrap();
        let coinc: f64 = out.probabilities().iter().filter(|(k, _)| k[0].path != k[1].path).map(|(_, p)| p).sum();
        assert!(coinc.abs() < 1e-15);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
        let bunched = out.amplitude(&[Mode::new("a", Pol::H, 0), Mode::new("a", Pol::H, 0)]);
        assert!((bunched.norm_sqr() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn pbs_routes_by_polarization() {
        let u = uni(&["p1", "p2", "t", "r"], 1);
        let pbs = OpticalElement::Pbs { inputs: ["p1".into(), "p2".into()], outputs: ["t".into(), "r".into()] };
        for (pol, port) in [(Pol::H, "t"), (Pol::V, "r")] {
            let s = FockState::from_terms(u.clone(), vec![(vec![Mode::new("p1", pol, 0)], cr(1.0))]).unwrap();
            let out = evolve(&s, &pbs).unwrap();
            assert!((out.amplitude(&[Mode::new(port, pol, 0)]).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn same_port_pair_fails_one_per_port() {
        let u = uni(&["a", "b"], 1);
        let pbs = OpticalElement::Pbs { inputs: ["a".into(), "b".into()], outputs: ["a".into(), "b".into()] };
        let s = FockState::from_terms(u, vec![(vec![Mode::new("a", Pol::H, 0), Mode::new("a", Pol::H, 0)], cr(1.0))])
            .unwrap();
        let out = evolve(&s, &pbs).unwrap();
        let paths = |p: &str| vec![p.to_string()];
        let res = postselect(&out, |cfg| count_in(cfg, &paths("a")) == 1 && count_in(cfg, &paths("b")) == 1);
        assert!(matches!(res, Err(FockError::NullPostselection(_))));
        let (same, p) = postselect(&out, |_| true).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!((same.inner(&out).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pbs_gate_output() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (out, p) = pbs_gate([cr(h), c(0.0, h)]).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let hh = out.amplitude(&[Mode::new("t", Pol::H, 0), Mode::new("r", Pol::H, 0)]);
        let vv = out.amplitude(&[Mode::new("t", Pol::V, 0), Mode::new("r", Pol::V, 0)]);
        assert!((hh - cr(h)).norm() < 1e-15 && (vv - c(0.0, h)).norm() < 1e-15);
    }

    #[test]
    fn hom_with_time_bins() {
        assert!(hom_coincidence([0, 0]).unwrap().abs() < 1e-15);
        assert!((hom_coincidence([0, 1]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_path_rejected() {
        let s = FockState::vacuum(uni(&["a"], 1));
        let e = OpticalElement::Hwp { path: "zz".into(), theta: 0.0 };
        assert_eq!(evolve(&s, &e).unwrap_err(), FockError::UnknownPath("zz".into()));
    }

    #[test]
    fn element_transfer_matrices_are_unitary() {
        let elems = vec![
            bs("a", "b", "c", "d"),
            OpticalElement::Pbs { inputs: ["a".into(), "b".into()], outputs: ["a".into(), "b".into()] },
            OpticalElement::Hwp { path: "a".into(), theta: 0.3 },
            OpticalElement::Qwp { path: "a".into(), theta: 1.1 },
            OpticalElement::Phase { path: "a".into(), phi: 0.7 },
            OpticalElement::Overlap { path: "a".into(), value: 0.37 },
            OpticalElement::SwapPaths { a: "a".into(), b: "b".into() },
        ];
        for e in elems {
            let (_, _, m) = e.transfer_matrix(2).unwrap();
            assert!(m.is_unitary(1e-12), "{}", e.name());
        }
    }
}
