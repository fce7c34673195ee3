//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use qswitch_core::fock;
use qswitch_core::procmat::{probability_table, random_separable, w_switch, w_switch_dephased, ProcessMatrix};
use qswitch_core::qmath::random::random_pure;
use qswitch_core::settings::{enumerate_settings, OutcomeKey};
use qswitch_core::switch::{self, duality, purify_dephasing, setting_state};
use qswitch_core::tomo::{self, exact_frequencies, pauli_pairs, reference_targets, Method};
use qswitch_cli::{model_table, normalization_error, max_deviation, Model, RunConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const IDEAL: f64 = -0.4248;
const IDEAL_TOL: f64 = 5e-3;
const IDEAL_RUNTIME: Duration = Duration::from_secs(300);
const SOUNDNESS_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-6;
const AGREEMENT_TOL: f64 = 1e-9;
const GATE_TOL: f64 = 1e-12;
const HOM_TOL: f64 = 1e-12;
const DUALITY_TOL: f64 = 1e-9;
const TOMO_MEAN_MIN: f64 = 0.98;
const TOMO_NOISELESS_MIN: f64 = 0.999;
const NORMALIZATION_TOL: f64 = 1e-9;
const LAB_PROBE: (f64, f64) = (0.29, -0.305);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn expcli(cwd: &Path, args: &[&str]) -> Result<std::process::Output, String> {
    std::fs::create_dir_all(cwd).map_err(|e| e.to_string())?;
    Command::new(env!("CARGO_BIN_EXE_expcli"))
        .args(args)
        .args(["--out", "out"])
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())
}

fn run_ok(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = expcli(cwd, args)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("expcli {} exited with {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn alpha_from(doc: &serde_json::Value) -> Result<BTreeMap<OutcomeKey, f64>, String> {
    let obj = doc["alpha"].as_object().ok_or("witness.json has no alpha table")?;
    obj.iter()
        .map(|(k, v)| {
            let key = k.parse::<OutcomeKey>().map_err(|e| format!("{k}: {e}"))?;
            Ok((key, v.as_f64().ok_or(format!("{k}: not a number"))?))
        })
        .collect()
}

fn score(alpha: &BTreeMap<OutcomeKey, f64>, w: &ProcessMatrix) -> Result<f64, String> {
    let p = probability_table(w).map_err(|e| e.to_string())?;
    Ok(alpha.iter().map(|(k, a)| a * p[k]).sum())
}

fn ideal_witness(dir: &Path) -> Result<Outcome, String> {
    let t = Instant::now();
    run_ok(dir, &["witness", "--model", "procmat", "--distinguishability", "0"])?;
    let elapsed = t.elapsed();
    let value = json(&dir.join("out/witness.json"))?["value"].as_f64().ok_or("no value")?;
    let pass = (value - IDEAL).abs() <= IDEAL_TOL && elapsed < IDEAL_RUNTIME;
    Ok(outcome(pass, format!("C_W = {value:.6} (target {IDEAL} ± {IDEAL_TOL}), {:.1} s", elapsed.as_secs_f64())))
}

fn soundness(dir: &Path) -> Result<Outcome, String> {
    let alpha = alpha_from(&json(&dir.join("out/witness.json"))?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        worst = worst.min(score(&alpha, &random_separable(&mut rng))?);
    }
    let deph_dir = dir.join("dephased");
    run_ok(&deph_dir, &["witness", "--model", "procmat", "--distinguishability", "1"])?;
    let dephased = json(&deph_dir.join("out/witness.json"))?["value"].as_f64().ok_or("no value")?;
    let fixed = score(&alpha, &w_switch_dephased(1.0).map_err(|e| e.to_string())?)?;
    let pass = worst >= -SOUNDNESS_TOL && dephased >= -SOUNDNESS_TOL && fixed >= -SOUNDNESS_TOL;
    Ok(outcome(pass, format!("min over 100 separable = {worst:.3e}, optimal C_W(D=1) = {dephased:.3e}, ideal witness on D=1 = {fixed:.3e}")))
}

fn transition(dir: &Path) -> Result<Outcome, String> {
    run_ok(dir, &["sweep", "--points", "21"])?;
    let text = std::fs::read_to_string(dir.join("out/sweep.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect();
            (f[0], f[2])
        })
        .collect();
    if rows.len() != 21 {
        return Ok(outcome(false, format!("{} grid points in sweep.csv", rows.len())));
    }
    let monotone = rows.windows(2).all(|w| w[1].1 >= w[0].1 - MONOTONE_TOL);
    let (first, last) = (rows[0].1, rows[20].1);
    let crossing = rows.windows(2).find(|w| w[0].1 < -MONOTONE_TOL && w[1].1 >= -MONOTONE_TOL).map(|w| {
        w[0].0 + (w[1].0 - w[0].0) * (-w[0].1) / (w[1].1 - w[0].1)
    });
    let probe = json(&dir.join("out/report_sweep.json"))?["summary"]["probe"]["witness_opt"].as_f64();
    let pass = monotone && first < 0.0 && last >= -SOUNDNESS_TOL && crossing.is_some_and(|d| d > 0.0 && d < 1.0);
    Ok(outcome(
        pass,
        format!(
            "monotone {monotone}, C_W(0) = {first:.4}, C_W(1) = {last:.2e}, sign change at D = {}; D = {}: model {} vs lab {}",
            crossing.map_or("none".into(), |d| format!("{d:.3}")),
            LAB_PROBE.0,
            probe.map_or("n/a".into(), |v| format!("{v:.4}")),
            LAB_PROBE.1
        ),
    ))
}

fn oracle_equivalence() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    for d in [0.0, 0.29, 0.6, 1.0] {
        let cfg = RunConfig { distinguishability: d, ..RunConfig::default() };
        let f = model_table(&cfg, Model::Fock).map_err(|e| e.to_string())?;
        let q = model_table(&cfg, Model::Qubit).map_err(|e| e.to_string())?;
        let p = model_table(&cfg, Model::Procmat).map_err(|e| e.to_string())?;
        if f.len() != 720 {
            return Ok(outcome(false, format!("{} entries instead of 720", f.len())));
        }
        worst = worst.max(max_deviation(&f, &q)).max(max_deviation(&q, &p)).max(max_deviation(&f, &p));
    }
    Ok(outcome(worst < AGREEMENT_TOL, format!("max deviation {worst:.2e} over 720 entries at D = 0, 0.29, 0.6, 1")))
}

fn postselected_gate() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut dp, mut infid) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let v = random_pure(&mut rng, 2);
        let (out, p) = fock::pbs_gate([v[0], v[1]]).map_err(|e| e.to_string())?;
        let hh = out.amplitude(&[fock::Mode::new("t", fock::Pol::H, 0), fock::Mode::new("r", fock::Pol::H, 0)]);
        let vv = out.amplitude(&[fock::Mode::new("t", fock::Pol::V, 0), fock::Mode::new("r", fock::Pol::V, 0)]);
        let f = (v[0].conj() * hh + v[1].conj() * vv).norm_sqr() / out.norm_sqr();
        dp = dp.max((p - 0.5).abs());
        infid = infid.max(1.0 - f);
    }
    Ok(outcome(dp <= GATE_TOL && infid <= GATE_TOL, format!("max |p - 1/2| = {dp:.2e}, max infidelity = {infid:.2e}")))
}

fn hom() -> Result<Outcome, String> {
    let same = fock::hom_coincidence([0, 0]).map_err(|e| e.to_string())?;
    let apart = fock::hom_coincidence([0, 1]).map_err(|e| e.to_string())?;
    Ok(outcome(
        same.abs() <= HOM_TOL && (apart - 0.5).abs() <= HOM_TOL,
        format!("P_c = {:.2e} (same bin), {apart:.12} (orthogonal bins)", same.abs()),
    ))
}

fn duality_check() -> Result<Outcome, String> {
    let settings = enumerate_settings();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let (mut pure_dev, mut mixed_max) = (0.0f64, f64::NEG_INFINITY);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (k, s) in settings.iter().enumerate() {
        for &d in &grid {
            let a = purify_dephasing(&setting_state(s), d).map_err(|e| e.to_string())?.to_density();
            let r = duality(&a).map_err(|e| e.to_string())?;
            pure_dev = pure_dev.max((r.branch_distinguishability.powi(2) + r.visibility.powi(2) - 1.0).abs());
            let other = &settings[(k * 7 + 3) % settings.len()];
            let b = purify_dephasing(&setting_state(other), d).map_err(|e| e.to_string())?.to_density();
            let t: f64 = rand::Rng::random(&mut rng);
            let mix = a.scale_real(t).add(&b.scale_real(1.0 - t)).map_err(|e| e.to_string())?;
            let m = duality(&mix).map_err(|e| e.to_string())?;
            mixed_max = mixed_max.max(m.branch_distinguishability.powi(2) + m.visibility.powi(2));
        }
    }
    Ok(outcome(
        pure_dev <= DUALITY_TOL && mixed_max <= 1.0 + DUALITY_TOL,
        format!("pure max |D²+V²-1| = {pure_dev:.2e}, mixed max D²+V² = {mixed_max:.9}"),
    ))
}

fn tomography() -> Result<Outcome, String> {
    let targets = reference_targets();
    let mut means = Vec::new();
    let mut noiseless = f64::INFINITY;
    for t in &targets {
        let amps = t.amplitudes();
        let rho = tomo::heralded_pair_state([amps[0], amps[3]]).map_err(|e| e.to_string())?;
        let exact = tomo::reconstruct_frequencies(&exact_frequencies(&rho), Method::Mle)
            .and_then(|r| r.with_target(t))
            .map_err(|e| e.to_string())?;
        noiseless = noiseless.min(exact.fidelity.unwrap_or(0.0));
        let mut sum = 0.0;
        for seed in 0..100u64 {
            let recs = tomo::simulate_counts(&rho, &pauli_pairs(), 30_000, seed).map_err(|e| e.to_string())?;
            let res = tomo::reconstruct(&recs, Method::Mle).and_then(|r| r.with_target(t)).map_err(|e| e.to_string())?;
            sum += res.fidelity.unwrap_or(0.0);
        }
        means.push(sum / 100.0);
    }
    let pass = means.iter().all(|&m| m >= TOMO_MEAN_MIN) && noiseless >= TOMO_NOISELESS_MIN;
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.5}")).collect();
    Ok(outcome(pass, format!("mean MLE fidelity (H, D, R) = {}, noiseless min = {noiseless:.6}", shown.join(", "))))
}

fn normalization() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    for d in [0.0, 0.5, 1.0] {
        let cfg = RunConfig { distinguishability: d, ..RunConfig::default() };
        for m in [Model::Fock, Model::Qubit, Model::Procmat] {
            worst = worst.max(normalization_error(&model_table(&cfg, m).map_err(|e| e.to_string())?));
        }
    }
    let mut direct = 0.0f64;
    for s in enumerate_settings() {
        let p = switch::switch_probabilities(&s, 0.3).map_err(|e| e.to_string())?;
        direct = direct.max((p.iter().flatten().sum::<f64>() - 1.0).abs());
    }
    let ideal = normalization_error(&probability_table(&w_switch()).map_err(|e| e.to_string())?);
    let worst = worst.max(direct).max(ideal);
    Ok(outcome(worst <= NORMALIZATION_TOL, format!("max |Σp - 1| = {worst:.2e} over 180 settings, three models")))
}

fn outputs(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = e.map_err(|e| e.to_string())?.path();
        if matches!(path.extension().and_then(|x| x.to_str()), Some("csv" | "json")) {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn determinism(first: &Path, second: &Path) -> Result<Outcome, String> {
    run_ok(second, &["witness", "--model", "procmat", "--distinguishability", "0"])?;
    for dir in [first, second] {
        run_ok(dir, &["simulate", "--model", "fock", "--distinguishability", "0.4"])?;
        run_ok(dir, &["tomo", "--seed", "11"])?;
    }
    let (a, b) = (outputs(&first.join("out"))?, outputs(&second.join("out"))?);
    let names: Vec<&String> = a.keys().collect();
    if a.keys().ne(b.keys()) {
        return Ok(outcome(false, format!("file sets differ: {:?} vs {:?}", names, b.keys().collect::<Vec<_>>())));
    }
    let differing: Vec<&String> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k).collect();
    Ok(outcome(
        differing.is_empty(),
        if differing.is_empty() { format!("{} CSV/JSON files identical", a.len()) } else { format!("differ: {differing:?}") },
    ))
}

fn main() -> ExitCode {
    let root: PathBuf = std::env::temp_dir().join(format!("qswitch-acceptance-{}", std::process::id()));
    let (run1, run2) = (root.join("run1"), root.join("run2"));
    type Check<'a> = (&'a str, Box<dyn Fn() -> Result<Outcome, String> + 'a>);
    let checks: Vec<Check> = vec![
        ("1 ideal causal witness", Box::new(|| ideal_witness(&run1))),
        ("2 witness soundness", Box::new(|| soundness(&run1))),
        ("3 transition curve", Box::new(|| transition(&root.join("sweep")))),
        ("4 oracle equivalence", Box::new(oracle_equivalence)),
        ("5 post-selected gate", Box::new(postselected_gate)),
        ("6 two-photon interference", Box::new(hom)),
        ("7 duality", Box::new(duality_check)),
        ("8 tomography", Box::new(tomography)),
        ("9 normalization", Box::new(normalization)),
        ("10 determinism", Box::new(|| determinism(&run1, &run2))),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let t = Instant::now();
        let (status, detail) = match check() {
            Ok(o) => (if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {name}: {detail} [{:.1} s]", t.elapsed().as_secs_f64());
    }
    let _ = std::fs::remove_dir_all(&root);
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
