use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qswitch_core::circuit::{parse_circuit, CircuitError, CircuitSpec};
use qswitch_core::fock::{self, reference_switch_spec};
use qswitch_core::procmat::{self, w_switch, w_switch_dephased};
use qswitch_core::settings::{enumerate_settings, ExperimentSetting};
use qswitch_core::tomo::{self, pauli_pairs, Method};
use qswitch_core::witness::{
    self, convention_report, evaluate_witness, optimize_witness, restrict, WitnessSpan, IDEAL_TOLERANCE, IDEAL_VALUE,
};
use qswitch_core::{switch, OutcomeKey, ProbabilityTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Model, RunConfig};
use crate::plots::{padded_range, Plot, Series};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn write_file(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn load_circuit(cfg: &RunConfig) -> Result<CircuitSpec, CliError> {
    match &cfg.circuit {
        None => Ok(reference_switch_spec()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_circuit(&text).map_err(|e| match e {
                CircuitError::Parse(diags) => CliError::Parse(
                    diags.iter().map(|d| format!("{}:{d}", path.display())).collect::<Vec<_>>().join("\n"),
                ),
                other => CliError::Parse(format!("{}: {other}", path.display())),
            })
        }
    }
}

fn table_from(
    mut f: impl FnMut(&ExperimentSetting) -> Result<[[f64; 2]; 2], String>,
) -> Result<ProbabilityTable, CliError> {
    let mut t = ProbabilityTable::new();
    for s in enumerate_settings() {
        let p = f(&s).map_err(CliError::Other)?;
        for (b, row) in p.iter().enumerate() {
            for (d, v) in row.iter().enumerate() {
                t.insert(OutcomeKey::new(&s, b, d), *v);
            }
        }
    }
    Ok(t)
}

/// p(b, d | x, y, r, z) for all 180 settings under the chosen model.
pub fn model_table(cfg: &RunConfig, model: Model) -> Result<ProbabilityTable, CliError> {
    let d = cfg.distinguishability;
    match model {
        Model::Fock => {
            let spec = load_circuit(cfg)?;
            let overlap = cfg.overlap();
            table_from(|s| {
                let program = fock::build_switch_table_from(&spec, s, overlap).map_err(|e| e.to_string())?;
                Ok(fock::switch_statistics(&program).map_err(|e| e.to_string())?.probs)
            })
        }
        Model::Qubit => table_from(|s| switch::switch_probabilities(s, d).map_err(|e| e.to_string())),
        Model::Procmat => {
            let w = w_switch_dephased(d).map_err(|e| CliError::Other(e.to_string()))?;
            table_from(|s| procmat::setting_probabilities(&w, s).map_err(|e| e.to_string()))
        }
    }
}

pub fn probabilities_csv(table: &ProbabilityTable) -> String {
    let mut s = String::from("x,y,r,z,b,d,p\n");
    for (k, p) in table {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", k.x, k.y, k.r, k.z, k.b, k.d, p);
    }
    s
}

pub fn parse_probabilities_csv(text: &str) -> Result<ProbabilityTable, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some("x,y,r,z,b,d,p") {
        return Err(CliError::Parse("probabilities.csv: unexpected header".into()));
    }
    let mut t = ProbabilityTable::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || CliError::Parse(format!("probabilities.csv line {}: `{line}`", i + 2));
        if f.len() != 7 {
            return Err(bad());
        }
        let key: OutcomeKey = format!("{},{},{},{},{},{}", f[4], f[5], f[0], f[1], f[2], f[3]).parse().map_err(|_| bad())?;
        t.insert(key, f[6].parse().map_err(|_| bad())?);
    }
    Ok(t)
}

/// Largest |Σ_{b,d} p − 1| over settings.
pub fn normalization_error(table: &ProbabilityTable) -> f64 {
    let mut sums: BTreeMap<(u8, u8, u8, u8), f64> = BTreeMap::new();
    for (k, p) in table {
        *sums.entry((k.z, k.y, k.r, k.x)).or_default() += p;
    }
    let missing = enumerate_settings().len() != sums.len();
    if missing {
        return f64::INFINITY;
    }
    sums.values().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

pub fn max_deviation(a: &ProbabilityTable, b: &ProbabilityTable) -> f64 {
    a.iter().map(|(k, p)| b.get(k).map_or(f64::INFINITY, |q| (p - q).abs())).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub model: Model,
    pub distinguishability: f64,
    pub settings: usize,
    pub max_normalization_error: f64,
    pub files: Vec<PathBuf>,
}

fn write_report<T: Serialize>(cfg: &RunConfig, command: &str, summary: &T) -> Result<PathBuf, CliError> {
    let doc = json!({
        "command": command,
        "version": VERSION,
        "config": cfg,
        "summary": summary,
    });
    write_file(&cfg.out.join(format!("report_{command}.json")), &to_json(&doc))
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulateReport, CliError> {
    let table = model_table(cfg, cfg.model)?;
    let err = normalization_error(&table);
    if err > cfg.tolerances.normalization {
        return Err(CliError::Disagreement(format!("per-setting probabilities deviate from 1 by {err:e}")));
    }
    let mut report = SimulateReport {
        model: cfg.model,
        distinguishability: cfg.distinguishability,
        settings: table.len() / 4,
        max_normalization_error: err,
        files: vec![write_file(&cfg.out.join("probabilities.csv"), &probabilities_csv(&table))?],
    };
    report.files.push(cfg.out.join("report_simulate.json"));
    write_report(cfg, "simulate", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub model: Model,
    pub distinguishability: f64,
    /// Σ α p over the model's probabilities.
    pub value: f64,
    /// Tr(S W) at the solver optimum.
    pub solver_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub recompute_error: f64,
    pub model_deviation: f64,
    pub files: Vec<PathBuf>,
}

pub fn witness(cfg: &RunConfig) -> Result<WitnessReport, CliError> {
    let table = model_table(cfg, cfg.model)?;
    let norm = normalization_error(&table);
    if norm > cfg.tolerances.normalization {
        return Err(CliError::Disagreement(format!("per-setting probabilities deviate from 1 by {norm:e}")));
    }
    let w = w_switch_dephased(cfg.distinguishability).map_err(|e| CliError::Other(e.to_string()))?;
    let reference = if cfg.model == Model::Procmat { table.clone() } else { model_table(cfg, Model::Procmat)? };
    let deviation = max_deviation(&table, &reference);
    if deviation > cfg.tolerances.model_agreement {
        return Err(CliError::Disagreement(format!("{} and procmat differ by {deviation:e}", cfg.model)));
    }
    let span = WitnessSpan::full();
    let sol = optimize_witness(&w, &span).map_err(|e| CliError::Solver(format!("{e}\n{}", convention_report())))?;
    let value = evaluate_witness(&sol.alpha, &restrict(&table, &span)).map_err(|e| CliError::Solver(e.to_string()))?;
    let recompute_error = (value - sol.value).abs();
    let mut doc: Value = serde_json::from_str(&sol.to_json()).expect("witness JSON");
    let obj = doc.as_object_mut().expect("object");
    obj.insert("model".into(), json!(cfg.model));
    obj.insert("distinguishability".into(), json!(cfg.distinguishability));
    obj.insert("solver_value".into(), json!(sol.value));
    obj.insert("value".into(), json!(value));
    let mut files = vec![
        write_file(&cfg.out.join("probabilities.csv"), &probabilities_csv(&table))?,
        write_file(&cfg.out.join("witness.json"), &to_json(&doc))?,
    ];
    files.push(cfg.out.join("report_witness.json"));
    let report = WitnessReport {
        model: cfg.model,
        distinguishability: cfg.distinguishability,
        value,
        solver_value: sol.value,
        gap: sol.gap,
        iterations: sol.iterations,
        recompute_error,
        model_deviation: deviation,
        files,
    };
    write_report(cfg, "witness", &report)?;
    if recompute_error > cfg.tolerances.witness_recompute {
        return Err(CliError::Solver(format!("Σαp differs from Tr(SW) by {recompute_error:e}")));
    }
    if cfg.distinguishability == 0.0 && (value - IDEAL_VALUE).abs() > IDEAL_TOLERANCE {
        return Err(CliError::Solver(format!(
            "ideal witness value {value:.6} is outside {IDEAL_VALUE} ± {IDEAL_TOLERANCE}\nconvention report:\n{}",
            convention_report()
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub distinguishability: f64,
    pub visibility: f64,
    /// Witness re-optimized at this D.
    pub witness_opt: f64,
    /// The D = 0 witness evaluated on this D's process.
    pub witness_fixed: f64,
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub probe: Option<SweepRow>,
    pub monotone: bool,
    /// Linear interpolation of the first crossing to ≥ −tolerance.
    pub sign_change: Option<f64>,
    pub files: Vec<PathBuf>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("distinguishability,visibility,witness_opt,witness_fixed,gap,iterations\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.distinguishability, r.visibility, r.witness_opt, r.witness_fixed, r.gap, r.iterations
        );
    }
    s
}

pub fn is_monotone(rows: &[SweepRow], tol: f64) -> bool {
    rows.windows(2).all(|w| w[1].witness_opt >= w[0].witness_opt - tol)
}

pub fn sign_change(rows: &[SweepRow], tol: f64) -> Option<f64> {
    rows.windows(2).find(|w| w[0].witness_opt < -tol && w[1].witness_opt >= -tol).map(|w| {
        let (d0, d1) = (w[0].distinguishability, w[1].distinguishability);
        let (v0, v1) = (w[0].witness_opt, w[1].witness_opt);
        d0 + (d1 - d0) * (-v0) / (v1 - v0)
    })
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepReport, CliError> {
    let span = WitnessSpan::full();
    let solver = |e: witness::WitnessError| CliError::Solver(e.to_string());
    let ideal = optimize_witness(&w_switch(), &span).map_err(solver)?;
    let mut ds = witness::unit_grid(cfg.sweep_points);
    let with_probe = !ds.iter().any(|&d| (d - cfg.sweep_probe).abs() < 1e-12);
    if with_probe {
        ds.push(cfg.sweep_probe);
    }
    let points = witness::sweep(&ds, &span).map_err(solver)?;
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let w = w_switch_dephased(p.distinguishability).map_err(|e| CliError::Other(e.to_string()))?;
        rows.push(SweepRow {
            distinguishability: p.distinguishability,
            visibility: p.visibility,
            witness_opt: p.value,
            witness_fixed: ideal.evaluate_on(&w).map_err(solver)?,
            gap: p.gap,
            iterations: p.iterations,
        });
    }
    let probe = if with_probe {
        rows.pop()
    } else {
        rows.iter().find(|r| (r.distinguishability - cfg.sweep_probe).abs() < 1e-12).cloned()
    };
    let tol = cfg.tolerances.monotonicity;
    let mut files = vec![write_file(&cfg.out.join("sweep.csv"), &sweep_csv(&rows))?];
    if cfg.plots {
        if let Some(p) = sweep_plot(&rows) {
            files.push(write_file(&cfg.out.join("witness_vs_D.svg"), &p.render())?);
        } else {
            log::warn!("empty sweep, witness_vs_D.svg not written");
        }
    }
    files.push(cfg.out.join("report_sweep.json"));
    let report = SweepReport { monotone: is_monotone(&rows, tol), sign_change: sign_change(&rows, tol), rows, probe, files };
    write_report(cfg, "sweep", &report)?;
    Ok(report)
}

pub fn sweep_plot(rows: &[SweepRow]) -> Option<Plot> {
    if rows.is_empty() {
        return None;
    }
    let opt: Vec<(f64, f64)> = rows.iter().map(|r| (r.distinguishability, r.witness_opt)).collect();
    let fixed: Vec<(f64, f64)> = rows.iter().map(|r| (r.distinguishability, r.witness_fixed)).collect();
    Some(Plot {
        title: "Causal witness versus distinguishability".into(),
        x_label: "D".into(),
        y_label: "C_W".into(),
        x_range: (0.0, 1.0),
        y_range: padded_range(opt.iter().chain(&fixed).map(|p| p.1).chain([0.0])),
        series: vec![
            Series { name: "re-optimized".into(), points: opt },
            Series { name: "ideal witness".into(), points: fixed },
        ],
        zero_line: true,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TomoRow {
    pub input: usize,
    pub method: Method,
    pub fidelity: f64,
    pub purity: f64,
    pub physical: bool,
    pub iterations: usize,
    /// Row-major [re, im] entries of ρ.
    pub rho: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FringeRow {
    pub input: usize,
    pub visibility: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TomoReport {
    pub pairs: u64,
    pub rows: Vec<TomoRow>,
    pub fringes: Vec<FringeRow>,
    pub files: Vec<PathBuf>,
}

fn tomo_row(input: usize, res: &tomo::TomoResult) -> TomoRow {
    TomoRow {
        input,
        method: res.method,
        fidelity: res.fidelity.unwrap_or(f64::NAN),
        purity: res.purity,
        physical: res.physical,
        iterations: res.iterations,
        rho: res.rho.matrix().as_slice().iter().map(|c| [c.re, c.im]).collect(),
    }
}

pub fn tomography(cfg: &RunConfig) -> Result<TomoReport, CliError> {
    let tomo_err = |e: tomo::TomoError| CliError::Other(e.to_string());
    let targets = tomo::reference_targets();
    let mut rows = Vec::new();
    let mut files = Vec::new();
    if let Some(path) = &cfg.tomo_counts {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let recs = tomo::read_counts_csv(file).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        for (i, t) in targets.iter().enumerate() {
            let res = tomo::reconstruct(&recs, cfg.tomo_method).map_err(tomo_err)?.with_target(t).map_err(tomo_err)?;
            rows.push(tomo_row(i + 1, &res));
        }
    } else {
        for (i, t) in targets.iter().enumerate() {
            let z = i + 1;
            let amps = t.amplitudes();
            let rho = tomo::heralded_pair_state([amps[0], amps[3]]).map_err(tomo_err)?;
            let seed = cfg.seed.wrapping_mul(4).wrapping_add(z as u64);
            let recs = tomo::simulate_counts(&rho, &pauli_pairs(), cfg.tomo_pairs, seed).map_err(tomo_err)?;
            let mut buf = Vec::new();
            tomo::write_counts_csv(&recs, &mut buf).map_err(tomo_err)?;
            let text = String::from_utf8(buf).expect("csv is utf-8");
            files.push(write_file(&cfg.out.join(format!("tomo_counts_z{z}.csv")), &text)?);
            for m in [Method::Linear, Method::Mle] {
                let res = tomo::reconstruct(&recs, m).map_err(tomo_err)?.with_target(t).map_err(tomo_err)?;
                rows.push(tomo_row(z, &res));
            }
        }
    }
    let spec = load_circuit(cfg)?;
    let phases = tomo::phase_grid(cfg.fringe_points);
    let mut fringes = Vec::new();
    let mut scans = Vec::new();
    for z in 1..=3 {
        let s = ExperimentSetting::new(z, 1, 1, 1).expect("catalog index");
        let scan = tomo::fringe_scan(&spec, &s, cfg.overlap(), &phases).map_err(tomo_err)?;
        fringes.push(FringeRow { input: z, visibility: scan.visibility, degenerate: scan.degenerate });
        scans.push(scan);
    }
    let mut csv = String::from("phase_deg,rate_z1,rate_z2,rate_z3\n");
    for (k, ph) in phases.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{}", ph, scans[0].rates[k], scans[1].rates[k], scans[2].rates[k]);
    }
    files.push(write_file(&cfg.out.join("fringe.csv"), &csv)?);
    if cfg.plots {
        files.push(write_file(&cfg.out.join("fringe.svg"), &fringe_plot(&scans).render())?);
    }
    files.push(cfg.out.join("report_tomo.json"));
    let report = TomoReport { pairs: cfg.tomo_pairs, rows, fringes, files };
    write_report(cfg, "tomo", &report)?;
    Ok(report)
}

pub fn fringe_plot(scans: &[tomo::FringeScan]) -> Plot {
    let names = ["input H", "input D", "input R"];
    let series: Vec<Series> = scans
        .iter()
        .enumerate()
        .map(|(i, s)| Series {
            name: names.get(i).map_or_else(|| format!("input {}", i + 1), |n| n.to_string()),
            points: s.phases.iter().cloned().zip(s.rates.iter().cloned()).collect(),
        })
        .collect();
    let top = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).fold(0.0, f64::max);
    Plot {
        title: "Switch interference fringes".into(),
        x_label: "phase (deg)".into(),
        y_label: "coincidence probability".into(),
        x_range: (0.0, 360.0),
        y_range: (0.0, if top > 0.0 { 1.1 * top } else { 1.0 }),
        series,
        zero_line: false,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
    pub files: Vec<PathBuf>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }
}

fn line(name: &str, value: f64, tolerance: f64) -> CheckLine {
    CheckLine { name: name.into(), value, tolerance, pass: value <= tolerance }
}

/// Oracle-equivalence suite: model agreement, normalization, heralded gate and HOM.
pub fn check(cfg: &RunConfig) -> Result<CheckReport, CliError> {
    let tol = cfg.tolerances.model_agreement;
    let f = model_table(cfg, Model::Fock)?;
    let q = model_table(cfg, Model::Qubit)?;
    let p = model_table(cfg, Model::Procmat)?;
    let mut lines = vec![
        line("fock_vs_qubit", max_deviation(&f, &q), tol),
        line("qubit_vs_procmat", max_deviation(&q, &p), tol),
        line("fock_vs_procmat", max_deviation(&f, &p), tol),
    ];
    let norm = [&f, &q, &p].iter().map(|t| normalization_error(t)).fold(0.0, f64::max);
    lines.push(line("normalization", norm, cfg.tolerances.normalization));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut gate_p, mut gate_f) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let v = qswitch_core::qmath::random::random_pure(&mut rng, 2);
        let target = tomo::entangled_target([v[0], v[1]]);
        let rho = tomo::heralded_pair_state([v[0], v[1]]).map_err(|e| CliError::Other(e.to_string()))?;
        let (_, prob) = fock::pbs_gate([v[0], v[1]]).map_err(|e| CliError::Other(e.to_string()))?;
        gate_p = gate_p.max((prob - 0.5).abs());
        gate_f = gate_f.max(1.0 - tomo::state_fidelity(&rho, &target).map_err(|e| CliError::Other(e.to_string()))?);
    }
    lines.push(line("pbs_gate_success", gate_p, 1e-12));
    lines.push(line("pbs_gate_infidelity", gate_f, 1e-12));
    let hom = |b| fock::hom_coincidence(b).map_err(|e| CliError::Other(e.to_string()));
    lines.push(line("hom_indistinguishable", hom([0, 0])?.abs(), 1e-12));
    lines.push(line("hom_orthogonal_bins", (hom([0, 1])? - 0.5).abs(), 1e-12));
    let files = vec![cfg.out.join("report_check.json")];
    let report = CheckReport { lines, files };
    write_report(cfg, "check", &report)?;
    if !report.passed() {
        let failed: Vec<&str> = report.lines.iter().filter(|l| !l.pass).map(|l| l.name.as_str()).collect();
        return Err(CliError::Disagreement(format!("failed checks: {}", failed.join(", "))));
    }
    Ok(report)
}
