//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use serde::Deserialize;
use tebe::continuation::{continue_to_targets, solve_at, StepPolicy};
use tebe::fields::{error_form_check, pde_residual, square_grid, ERROR_FORM_TOL};
use tebe::linop::{assemble_phi, indicial_roots, psi_grid, DEFAULT_CLUSTER, DEFAULT_MARGIN};
use tebe::ode::{first_integral, witten_u0};
use tebe::solver::{Profile, SolverConfig};
use tebe::verify::{check_all, FrozenConstants};

const KS: [u32; 3] = [1, 2, 3];
const ZETAS: [f64; 5] = [0.0, 0.1, 0.25, 0.4, 0.45];

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Verdict {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn closed_form() -> Verdict {
    let mut worst = 0.0_f64;
    let mut slowest = Duration::ZERO;
    for k in KS {
        let t = Instant::now();
        let prof = solve_at(k, 0.0, &SolverConfig::default(), &StepPolicy::default()).map_err(err)?;
        slowest = slowest.max(t.elapsed());
        worst = worst.max(prof.sup_error_vs_untwisted(1e-2, 10.0));
        // off-grid as well
        for i in 0..=2000 {
            let tau = 1e-2 * 1000f64.powf(i as f64 / 2000.0);
            let s = prof.eval(tau).map_err(err)?;
            worst = worst.max((s.u - witten_u0(&prof.p, tau)).abs());
        }
    }
    ensure(
        worst < 1e-6 && slowest < Duration::from_secs(5),
        format!("sup |u - u0| = {worst:.2e} on [1e-2, 10], slowest case {slowest:.2?}"),
    )
}

fn sweep_matrix() -> Result<Vec<Profile>, String> {
    let mut out = Vec::new();
    for k in KS {
        let run = continue_to_targets(k, &ZETAS, &SolverConfig::default(), &StepPolicy::default()).map_err(err)?;
        out.extend(run.profiles);
    }
    Ok(out)
}

fn first_integral_drift(profiles: &[Profile]) -> Verdict {
    let mut worst = 0.0_f64;
    for prof in profiles {
        let b2 = prof.b() * prof.b();
        for s in &prof.states {
            worst = worst.max((first_integral(&prof.p, s) - b2).abs() / b2);
        }
    }
    ensure(worst < 1e-8, format!("max relative drift {worst:.2e} over {} profiles", profiles.len()))
}

fn continuation_reach() -> Verdict {
    let t = Instant::now();
    let mut worst = 0.0_f64;
    let mut steps = 0;
    for k in KS {
        let run = continue_to_targets(k, &[0.45], &SolverConfig::default(), &StepPolicy::default()).map_err(err)?;
        let last = run.profiles.last().ok_or("no profile")?;
        if last.p.zeta() != 0.45 || !run.all_converged() {
            return Err(format!("k = {k} stopped at zeta = {}", last.p.zeta()));
        }
        for s in run.step_history.iter().filter(|s| s.accepted) {
            worst = worst.max(s.matching_residual.unwrap_or(f64::INFINITY));
            steps += 1;
        }
    }
    let el = t.elapsed();
    ensure(
        worst < 1e-8 && el < Duration::from_secs(300),
        format!("zeta = 0.45 reached for k = 1..3 in {steps} accepted steps, max matching residual {worst:.2e}, {el:.2?}"),
    )
}

fn bound_suite(profiles: &[Profile]) -> Verdict {
    let frozen = FrozenConstants::shipped().map_err(err)?;
    let mut failures = Vec::new();
    let mut tightest = (f64::INFINITY, 0, 0, 0.0);
    for prof in profiles {
        let c = frozen.for_charge(prof.p.k()).ok_or("missing constants")?;
        let rep = check_all(prof, c).map_err(err)?;
        for chk in rep.checks.iter().filter(|c| c.id >= 2) {
            if !chk.passed {
                failures.push(format!("k={} zeta={} check {}", prof.p.k(), prof.p.zeta(), chk.id));
            }
            let rel = chk.margin / chk.tolerance;
            if rel < tightest.0 {
                tightest = (rel, chk.id, prof.p.k(), prof.p.zeta());
            }
        }
    }
    ensure(
        failures.is_empty(),
        format!(
            "checks 2-9 on {} profiles with zeta = 0 constants; failures {:?}; tightest relative margin {:.3} (check {}, k = {}, zeta = {})",
            profiles.len(),
            failures,
            tightest.0,
            tightest.1,
            tightest.2,
            tightest.3
        ),
    )
}

fn pde_certification() -> Verdict {
    let grid = square_grid(0.05, 2.0, 50, 0.7).map_err(err)?;
    let run = continue_to_targets(1, &[0.0, 0.25, 0.45], &SolverConfig::default(), &StepPolicy::default()).map_err(err)?;
    let mut worst = 0.0_f64;
    for prof in &run.profiles {
        for r in pde_residual(prof, &grid).map_err(err)? {
            worst = worst.max(r.sup);
        }
    }
    ensure(worst < 1e-6, format!("sup moment-map residual {worst:.2e} on 50x50 grid, k = 1, zeta in {{0, 0.25, 0.45}}"))
}

fn indicial() -> Verdict {
    for k in 1..=5u32 {
        let r = indicial_roots(k).map_err(err)?;
        let b = i64::from(k) + 1;
        if r.omega_end != [-1, 2] || r.psi_end != [-b, 0, 0, b] {
            return Err(format!("k = {k}: {r:?}"));
        }
    }
    Ok("omega end {-1, 2}, psi end {-(k+1), 0, 0, k+1} for k = 1..5".into())
}

#[derive(Deserialize)]
struct Baseline {
    sigma_min: Vec<BaselineEntry>,
}

#[derive(Deserialize)]
struct BaselineEntry {
    zeta: f64,
    value: f64,
}

fn kernel_triviality() -> Verdict {
    let base: Baseline = serde_json::from_str(include_str!("../data/spectrum_baseline.json")).map_err(err)?;
    let mut lines = Vec::new();
    let mut ok = true;
    for e in &base.sigma_min {
        let prof = solve_at(1, e.zeta, &SolverConfig::default(), &StepPolicy::default()).map_err(err)?;
        let s = |n| -> Result<f64, String> {
            assemble_phi(&prof, &psi_grid(n, DEFAULT_MARGIN, DEFAULT_CLUSTER).map_err(err)?)
                .map_err(err)?
                .smallest_singular_value()
                .map_err(err)
        };
        let (a, b) = (s(400)?, s(800)?);
        let change = (b - a).abs() / a;
        let op = assemble_phi(&prof, &psi_grid(400, DEFAULT_MARGIN, DEFAULT_CLUSTER).map_err(err)?).map_err(err)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let negative = (0..100).all(|_| {
            let x: Vec<f64> = (0..2 * op.n()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            op.quadratic_form(&x) < 0.0
        });
        let floor = 0.9 * e.value;
        ok &= change < 0.1 && a > floor && b > floor && negative;
        lines.push(format!(
            "zeta = {}: sigma_min {a:.6} (n=400) {b:.6} (n=800), change {:.2}%, baseline floor {floor:.4}, 100/100 negative forms: {negative}",
            e.zeta,
            100.0 * change
        ));
    }
    ensure(ok, lines.join("; "))
}

fn error_form() -> Verdict {
    let prof = solve_at(1, 0.0, &SolverConfig::default(), &StepPolicy::default()).map_err(err)?;
    let ef = error_form_check(&prof, 0.05).map_err(err)?;
    let dz = [0.0125, 0.025, 0.05, 0.1];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &z in &dz {
        let e = error_form_check(&prof, z).map_err(err)?;
        xs.push(z.ln());
        ys.push(e.magnitude.ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    ensure(
        ef.deviation < ERROR_FORM_TOL && (slope - 1.0).abs() <= 0.1,
        format!("deviation {:.2e} at (0, 0.05), log-log slope {slope:.4} in zeta1 - zeta0", ef.deviation),
    )
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_tebe");
    let dir = tempfile::tempdir().map_err(err)?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(bin)
            .args(["sweep", "--k", "1", "--zeta-max", "0.45", "--seed", "7", "--out"])
            .arg(&out)
            .env_remove("TEBE_CONFIG")
            .status()
            .map_err(err)?;
        if !status.success() {
            return Err(format!("sweep exited with {status}"));
        }
        let mut files: Vec<_> = std::fs::read_dir(&out).map_err(err)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>().map_err(err)?;
        files.sort();
        let bytes: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| Ok((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p)?)))
            .collect::<std::io::Result<_>>()
            .map_err(err)?;
        outputs.push(bytes);
    }
    ensure(outputs[0] == outputs[1], format!("two sweeps, {} files each, byte-identical: {}", outputs[0].len(), outputs[0] == outputs[1]))
}

fn main() {
    let profiles = sweep_matrix();
    let with = |f: fn(&[Profile]) -> Verdict| move || match &profiles {
        Ok(p) => f(p),
        Err(e) => Err(format!("sweep failed: {e}")),
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("closed-form oracle", Box::new(closed_form)),
        ("first integral", Box::new(with.clone()(first_integral_drift))),
        ("continuation reach", Box::new(continuation_reach)),
        ("bound suite", Box::new(with(bound_suite))),
        ("PDE reduction", Box::new(pde_certification)),
        ("indicial roots", Box::new(indicial)),
        ("kernel triviality", Box::new(kernel_triviality)),
        ("error form", Box::new(error_form)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, msg) = match f() {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("{tag} criterion {} ({name}): {msg} [{:.2?}]", i + 1, t.elapsed());
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
