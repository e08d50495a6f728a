//! Acceptance criteria 1 to 13, one line each. Runs the configs in
//! `configs/` at their default resolutions; expect roughly 15 minutes on one
//! core, most of it in the stationarity check of criterion 3.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use wavelab::experiments::{execute, run_experiment, Check, ExperimentConfig, Outcome};

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

struct Runs(HashMap<&'static str, Result<Outcome, String>>);

impl Runs {
    fn get(&mut self, name: &'static str) -> Result<&Outcome, String> {
        self.0
            .entry(name)
            .or_insert_with(|| execute(&config(name)).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn find<'a>(o: &'a Outcome, name: &str) -> Result<&'a Check, String> {
    o.check(name).ok_or_else(|| format!("missing check {name}"))
}

fn with_prefix<'a>(o: &'a Outcome, prefix: &str) -> Vec<&'a Check> {
    o.checks.iter().filter(|c| c.name.starts_with(prefix)).collect()
}

type Verdict = Result<(bool, String), String>;

fn c1(r: &mut Runs) -> Verdict {
    let v = r.get("energy-trace.toml")?.report["energy_kappa0"].as_f64().ok_or("no energy")?;
    Ok(((v - 4.0 / 3.0).abs() <= 1e-6, format!("E(κ₀, 0) = {v:.15}, expected 4/3")))
}

fn c2(r: &mut Runs) -> Verdict {
    let c = find(r.get("ode-check.toml")?, "blowup_time")?;
    Ok((c.passed && c.value <= 1e-3, format!("relative error {:.3e}; {}", c.value, c.detail)))
}

fn c3(r: &mut Runs) -> Verdict {
    let o = r.get("soliton-check.toml")?;
    let drift = with_prefix(o, "stationary_d");
    let expected = ["0", "0.3", "0.6", "0.9"];
    let complete = expected.iter().all(|d| o.check(&format!("stationary_d{d}")).is_some());
    let ok = complete && drift.iter().all(|c| c.passed) && drift.iter().filter(|c| !c.name.ends_with("_refines")).all(|c| c.value < 1e-4);
    let worst = drift.iter().filter(|c| !c.name.ends_with("_refines")).map(|c| c.value).fold(0.0, f64::max);
    Ok((ok, format!("largest finest-grid drift {worst:.3e}, {} checks", drift.len())))
}

fn c4(r: &mut Runs) -> Verdict {
    let c = find(r.get("soliton-check.toml")?, "kappa_star_order")?;
    Ok((c.value >= 1.9, format!("observed order {:.3}; {}", c.value, c.detail)))
}

fn c5(r: &mut Runs) -> Verdict {
    let o = r.get("energy-trace.toml")?;
    let e = o.report["energy_lambda"].as_f64().ok_or("no energy")?;
    let s = o.report["diverged_at"].as_f64();
    let ok = (e + 0.75).abs() <= 1e-6 && s.is_some_and(|s| s < 50.0);
    Ok((ok, format!("E(1.5κ₀, 0) = {e:.15}, diverged at s = {s:?}")))
}

fn c6(r: &mut Runs) -> Verdict {
    let o = r.get("energy-trace.toml")?;
    let runs = with_prefix(o, "monotone_seed_");
    let worst = runs.iter().map(|c| c.value - c.tolerance).fold(f64::NEG_INFINITY, f64::max);
    Ok((runs.len() == 20 && runs.iter().all(|c| c.passed), format!("{} seeded runs, worst margin {worst:.3e}", runs.len())))
}

fn c7(r: &mut Runs) -> Verdict {
    let o = r.get("modulation-decay.toml")?;
    let (mu, r2, drift) = (find(o, "decay_rate")?, find(o, "decay_fit_r2")?, find(o, "velocity_drift")?);
    let ok = mu.value > 0.0 && r2.value > 0.95 && drift.value <= drift.tolerance && find(o, "trapping")?.passed;
    Ok((ok, format!("mu = {:.4}, r² = {:.5}, drift {:.3e} ≤ K·ε = {:.3e}", mu.value, r2.value, drift.value, drift.tolerance)))
}

fn gradient_gaps(o: &Outcome) -> Vec<&Check> {
    with_prefix(o, "gradient_gap_")
}

fn c8(r: &mut Runs) -> Verdict {
    let o = r.get("surface-build.toml")?;
    let gaps = gradient_gaps(o);
    let last = gaps.last().ok_or("no gradient checks")?;
    let decreasing = find(o, "gap_decreasing")?.passed;
    let ok = last.passed && last.value <= 5e-2 && decreasing && o.passed();
    let values: Vec<String> = gaps.iter().map(|c| format!("{:.2e}", c.value)).collect();
    Ok((ok, format!("gaps {} (coarse to fine)", values.join(", "))))
}

fn c9(r: &mut Runs) -> Verdict {
    let o = r.get("soliton-check.toml")?;
    let (surf, lip, all) = (find(o, "planar_surface")?, find(o, "lipschitz_ratio")?, find(o, "planar_all_probes")?);
    let ok = all.passed && surf.value <= 2e-3 && lip.value <= 2e-3;
    Ok((ok, format!("surface error {:.3e}, |ratio - |d*|| {:.3e}", surf.value, lip.value)))
}

fn c10(r: &mut Runs) -> Verdict {
    let o = r.get("rigidity.toml")?;
    let dev = with_prefix(o, "seed_");
    let seeds = dev.iter().filter(|c| c.name.ends_with("_deviation")).count();
    let worst = dev.iter().filter(|c| c.name.ends_with("_deviation")).map(|c| c.value).fold(0.0, f64::max);
    let ok = seeds == 3 && worst < 1e-4 && dev.iter().all(|c| c.passed);
    let control = o.check("intrusion_flagged").map_or("no control".to_string(), |c| format!("intruding control flagged: {}", c.passed));
    Ok((ok, format!("{seeds} seeds, worst finest deviation {worst:.3e}; {control}")))
}

fn c11(r: &mut Runs) -> Verdict {
    let o = r.get("stability.toml")?;
    let cont = find(o, "continuity")?;
    let eps = with_prefix(o, "eps_");
    let ok = cont.passed && eps.len() == 4 && eps.iter().all(|c| c.passed);
    Ok((ok, cont.detail.clone()))
}

fn c12(r: &mut Runs) -> Verdict {
    let o = r.get("local-minimum.toml")?;
    let loc = with_prefix(o, "minimum_location_");
    let d = with_prefix(o, "fitted_d_at_minimum_");
    let strict = with_prefix(o, "strict_minimum_");
    let ok = !d.is_empty() && loc.iter().chain(&d).chain(&strict).all(|c| c.passed) && d.iter().all(|c| c.value <= 5e-2);
    let ds: Vec<String> = d.iter().map(|c| format!("{:.2e}", c.value)).collect();
    Ok((ok, format!("strict minimum at 0 on {} grids, |d(0)| = {}", strict.len(), ds.join(", "))))
}

fn c13(_: &mut Runs) -> Verdict {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = Vec::new();
    for name in ["ode-check.toml", "stability.toml", "energy-trace.toml", "rigidity.toml"] {
        let cfg = config(name);
        let (dir_a, a) = run_experiment(&cfg, root.path()).map_err(|e| e.to_string())?;
        let (dir_b, b) = run_experiment(&cfg, root.path()).map_err(|e| e.to_string())?;
        if dir_a == dir_b || a.artifacts.is_empty() {
            return Ok((false, format!("{name}: runs not separated or no artifacts")));
        }
        for art in &a.artifacts {
            let x = std::fs::read(dir_a.join(&art.path)).map_err(|e| e.to_string())?;
            let y = std::fs::read(dir_b.join(&art.path)).map_err(|e| e.to_string())?;
            if x != y {
                return Ok((false, format!("{name}: {} differs", art.path)));
            }
        }
        if a.artifacts != b.artifacts || a.config_sha256 != b.config_sha256 {
            return Ok((false, format!("{name}: manifest hashes differ")));
        }
        compared.push(format!("{name} ({} files)", a.artifacts.len()));
    }
    Ok((true, format!("byte-identical CSV for {}", compared.join(", "))))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn(&mut Runs) -> Verdict); 13] = [
        ("closed-form energy", c1),
        ("ODE blow-up time", c2),
        ("soliton stationarity", c3),
        ("κ* exactness", c4),
        ("blow-up criterion", c5),
        ("Lyapunov monotonicity", c6),
        ("trapping and decay", c7),
        ("∇T = d at the surface minimum", c8),
        ("planar surface", c9),
        ("rigidity consequence", c10),
        ("continuity of blow-up time", c11),
        ("local minimum", c12),
        ("determinism", c13),
    ];
    let mut runs = Runs(HashMap::new());
    let mut failed = 0;
    for (k, (title, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (ok, detail) = match check(&mut runs) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {}: {title}: {detail} [{:.1} s]",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 13 passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
