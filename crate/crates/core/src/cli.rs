//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage/validation/I-O error, 2 converged but a
//! bound check failed, 3 no convergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{RngExt, SeedableRng};
use serde::Serialize;

use crate::continuation::{continue_to_targets, solve_at, StepPolicy};
use crate::error::TebeError;
use crate::fields::{pde_residual, square_grid, unitary_fields};
use crate::io::{csv_float, to_json, RunConfig, SolutionFile, SCHEMA_VERSION};
use crate::linop::{assemble_phi, coefficient_limits, indicial_roots, margin_sensitivity, psi_grid, LimitReport, MarginSensitivity, DEFAULT_CLUSTER, DEFAULT_MARGIN};
use crate::solver::Profile;
use crate::verify::{check_all, constants_for, fit_constants, DiagnosticsReport, SHIPPED_CHARGES};

pub const CONFIG_ENV: &str = "TEBE_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "tebe", version, about = "Model knot solutions of the twisted extended Bogomolny equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve at one twist (warm-started from zero twist) and write the solution.
    Solve {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        golden: Golden,
    },
    /// Continue from zero twist to --zeta-max; writes one solution per target and summary.csv.
    Sweep {
        #[command(flatten)]
        params: Params,
        /// Spacing of the targets.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Bound diagnostics for a solution file.
    Verify {
        file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Refit the frozen constants instead (written to --out or the shipped location).
        #[command(flatten)]
        golden: Golden,
    },
    /// Field samples and moment-map residuals on a square (r, y) grid, as CSV.
    Fields {
        file: PathBuf,
        /// Points per side.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Indicial roots of the linearized operator.
    Indicial {
        #[arg(long)]
        k: u32,
    },
    /// Smallest singular values and related checks of the linearized operator.
    Spectrum {
        file: PathBuf,
        /// Interior nodes.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Params {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub zeta_max: Option<f64>,
    #[arg(long)]
    pub tau_seed: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Stored profile points.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Golden {
    /// Regenerate the baseline file.
    #[arg(long)]
    pub golden: bool,
    /// Required together with --golden.
    #[arg(long, requires = "golden")]
    pub confirm: bool,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Bounds(String),
    Convergence(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Bounds(_) => 2,
            Failure::Convergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Bounds(m) | Failure::Convergence(m) => m,
        }
    }
}

impl From<TebeError> for Failure {
    fn from(e: TebeError) -> Self {
        match e {
            TebeError::ZetaOutOfRange(_) | TebeError::InvalidCharge(_) | TebeError::InvalidArgument(_) => Failure::Usage(e.to_string()),
            TebeError::FitFailure(_) | TebeError::StructureViolation { .. } => Failure::Bounds(e.to_string()),
            _ => Failure::Convergence(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Defaults, then the file named by `TEBE_CONFIG`, then flags.
pub fn load_config(params: Option<&Params>) -> std::result::Result<RunConfig, Failure> {
    let mut c = match std::env::var_os(CONFIG_ENV) {
        Some(p) => {
            let s = fs::read_to_string(&p).map_err(|e| usage(format!("{}: {e}", Path::new(&p).display())))?;
            RunConfig::from_json(&s)?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = params {
        macro_rules! over {
            ($($f:ident),*) => { $(if let Some(v) = p.$f { c.$f = v; })* };
        }
        over!(k, zeta, zeta_max, tau_seed, tau_max, tol, grid, seed);
    }
    c.validate()?;
    Ok(c)
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            }
            fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn golden_path(k: u32, zeta: f64) -> PathBuf {
    data_dir().join(format!("golden_k{k}_zeta{zeta}.json"))
}

fn guard_golden(g: &Golden) -> Outcome {
    if g.golden && !g.confirm {
        return Err(usage("--golden overwrites a baseline; repeat with --confirm"));
    }
    Ok(())
}

fn verdict(profile: &Profile, report: &DiagnosticsReport) -> Outcome {
    if !profile.converged {
        return Err(Failure::Convergence(format!(
            "no convergence at zeta = {} (residual {:e})",
            profile.p.zeta(),
            profile.matching_residual()
        )));
    }
    if !report.passed {
        let ids: Vec<String> = report.failed().iter().map(|c| c.id.to_string()).collect();
        return Err(Failure::Bounds(format!("bound checks failed: {}", ids.join(", "))));
    }
    Ok(())
}

fn cmd_solve(params: &Params, golden: &Golden) -> Outcome {
    guard_golden(golden)?;
    let cfg = load_config(Some(params))?;
    let profile = solve_at(cfg.k, cfg.zeta, &cfg.solver(), &StepPolicy::default())?;
    let report = check_all(&profile, &constants_for(cfg.k)?)?;
    let out = if golden.golden {
        Some(params.out.clone().unwrap_or_else(|| golden_path(cfg.k, cfg.zeta)))
    } else {
        params.out.clone()
    };
    let file = SolutionFile::new(cfg, profile, &report);
    write_out(out.as_deref(), &file.to_json())?;
    verdict(&file.profile, &report)
}

const SUMMARY_HEADER: &str = "zeta,a,c,matching_residual,first_integral_drift,min_relative_margin,tightest_check,bounds_passed,converged";

fn summary_row(p: &Profile, r: &DiagnosticsReport) -> String {
    let rel = |c: &crate::verify::CheckRecord| c.margin / c.tolerance;
    let worst = r.checks.iter().min_by(|a, b| rel(a).total_cmp(&rel(b))).expect("nine checks");
    [
        csv_float(p.p.zeta()),
        csv_float(p.params.a),
        csv_float(p.params.c),
        csv_float(p.matching_residual()),
        csv_float(p.first_integral_drift),
        csv_float(rel(worst)),
        worst.id.to_string(),
        r.passed.to_string(),
        p.converged.to_string(),
    ]
    .join(",")
}

fn cmd_sweep(params: &Params, step: Option<f64>) -> Outcome {
    let mut cfg = load_config(Some(params))?;
    if let Some(s) = step {
        cfg.zeta_step = s;
        cfg.validate()?;
    }
    let dir = params.out.clone().unwrap_or_else(|| PathBuf::from(format!("sweep_k{}", cfg.k)));
    let targets = cfg.sweep_targets();
    let run = continue_to_targets(cfg.k, &targets, &cfg.solver(), &StepPolicy::default())?;
    let constants = constants_for(cfg.k)?;
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    let mut outcome = Ok(());
    for p in &run.profiles {
        let r = check_all(p, &constants)?;
        csv.push_str(&summary_row(p, &r));
        csv.push('\n');
        let file = SolutionFile::new(RunConfig { zeta: p.p.zeta(), ..cfg.clone() }, p.clone(), &r);
        write_out(Some(&dir.join(format!("zeta_{:.4}.json", p.p.zeta()))), &file.to_json())?;
        if let (Ok(()), Err(e)) = (&outcome, verdict(p, &r)) {
            outcome = Err(e);
        }
    }
    write_out(Some(&dir.join("summary.csv")), &csv)?;
    outcome
}

#[derive(Serialize)]
struct VerifyDocument<'a> {
    schema_version: &'static str,
    report: &'a DiagnosticsReport,
}

fn cmd_verify(file: Option<&Path>, out: Option<&Path>, golden: &Golden) -> Outcome {
    guard_golden(golden)?;
    if golden.golden {
        let cfg = load_config(None)?;
        let c = fit_constants(&SHIPPED_CHARGES, &cfg.solver())?;
        let path = out.map(Path::to_path_buf).unwrap_or_else(|| data_dir().join("constants.json"));
        return write_out(Some(&path), &c.to_json());
    }
    let file = file.ok_or_else(|| usage("verify needs a solution file"))?;
    let sol = SolutionFile::read(file)?;
    let report = check_all(&sol.profile, &constants_for(sol.profile.p.k())?)?;
    write_out(out, &to_json(&VerifyDocument { schema_version: SCHEMA_VERSION, report: &report }))?;
    verdict(&sol.profile, &report)
}

pub const FIELDS_HEADER: &str = "r,y,theta,tau,Y,sigma_re,sigma_im,A_re,A_im,B_re,B_im,C_re,C_im,D_re,D_im,res1_abs,res2_abs,res_sup";
/// Side range of the field sample square in `r` and `y`.
pub const FIELD_RANGE: (f64, f64) = (0.1, 2.0);
pub const FIELD_THETA: f64 = 0.5;

pub fn fields_csv(profile: &Profile, n: usize) -> crate::Result<String> {
    let grid = square_grid(FIELD_RANGE.0, FIELD_RANGE.1, n, FIELD_THETA)?;
    let res = pde_residual(profile, &grid)?;
    let mut s = String::from(FIELDS_HEADER);
    s.push('\n');
    for r in &res {
        let f = unitary_fields(profile, r.pt)?;
        let a = crate::fields::ansatz_fields(profile, r.pt)?;
        let mut row = vec![r.pt.r, r.pt.y, r.pt.theta_ang, r.pt.tau(), a.y, a.sigma.re, a.sigma.im];
        for z in [f.a, f.b, f.c, f.d] {
            row.extend([z.re, z.im]);
        }
        row.extend([r.res1.norm(), r.res2.norm(), r.sup]);
        s.push_str(&row.iter().map(|x| csv_float(*x)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    Ok(s)
}

fn cmd_fields(file: &Path, grid: Option<usize>, out: Option<&Path>) -> Outcome {
    let cfg = load_config(None)?;
    let sol = SolutionFile::read(file)?;
    let n = grid.unwrap_or(cfg.field_points);
    if n < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    write_out(out, &fields_csv(&sol.profile, n)?)
}

#[derive(Serialize)]
struct IndicialDocument {
    schema_version: &'static str,
    omega_end: Vec<i64>,
    psi_end: Vec<i64>,
}

fn cmd_indicial(k: u32) -> Outcome {
    let r = indicial_roots(k)?;
    let doc = IndicialDocument {
        schema_version: SCHEMA_VERSION,
        omega_end: r.omega_end,
        psi_end: r.psi_end,
    };
    println!("{}", serde_json::to_string(&doc).expect("plain data serializes"));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticFormSample {
    pub samples: usize,
    pub seed: u64,
    /// Largest `<s, Phi s> / |s|^2` over the samples.
    pub max_rayleigh: f64,
    pub all_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumDocument {
    pub schema_version: &'static str,
    pub k: u32,
    pub zeta: f64,
    pub interior_nodes: usize,
    pub margin: f64,
    pub smallest_singular_values: Vec<f64>,
    /// Same at twice the nodes.
    pub sigma_min_refined: f64,
    pub refinement_change: f64,
    pub margin_sensitivity: MarginSensitivity,
    pub symmetry_defect: f64,
    pub symmetry_defect_without_radial1: f64,
    pub max_violation: f64,
    pub quadratic_form: QuadraticFormSample,
    pub limits: LimitReport,
}

pub fn spectrum(profile: &Profile, n: usize, seed: u64) -> crate::Result<SpectrumDocument> {
    let op = assemble_phi(profile, &psi_grid(n, DEFAULT_MARGIN, DEFAULT_CLUSTER)?)?;
    let sv = op.smallest_singular_values(3, seed)?;
    let fine = assemble_phi(profile, &psi_grid(2 * n, DEFAULT_MARGIN, DEFAULT_CLUSTER)?)?.smallest_singular_values(1, seed)?[0];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let samples = 100;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x: Vec<f64> = (0..2 * op.n()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let norm: f64 = (0..op.n()).map(|i| op.weights[i] * (x[2 * i].powi(2) + x[2 * i + 1].powi(2))).sum();
        worst = worst.max(op.quadratic_form(&x) / norm);
    }
    Ok(SpectrumDocument {
        schema_version: SCHEMA_VERSION,
        k: profile.p.k(),
        zeta: profile.p.zeta(),
        interior_nodes: n,
        margin: DEFAULT_MARGIN,
        smallest_singular_values: sv.clone(),
        sigma_min_refined: fine,
        refinement_change: (fine - sv[0]).abs() / sv[0],
        margin_sensitivity: margin_sensitivity(profile, n, DEFAULT_MARGIN)?,
        symmetry_defect: op.symmetry_defect(),
        symmetry_defect_without_radial1: op.symmetry_defect_without_radial1(profile)?,
        max_violation: op.max_violation,
        quadratic_form: QuadraticFormSample {
            samples,
            seed,
            max_rayleigh: worst,
            all_negative: worst < 0.0,
        },
        limits: coefficient_limits(profile)?,
    })
}

fn cmd_spectrum(file: &Path, grid: Option<usize>, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    let cfg = load_config(None)?;
    let sol = SolutionFile::read(file)?;
    let n = grid.unwrap_or(cfg.psi_nodes);
    if n < 10 {
        return Err(usage("--grid must be at least 10"));
    }
    let doc = spectrum(&sol.profile, n, seed.unwrap_or(cfg.seed))?;
    write_out(out, &to_json(&doc))
}

pub fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Solve { params, golden } => cmd_solve(params, golden),
        Command::Sweep { params, step } => cmd_sweep(params, *step),
        Command::Verify { file, out, golden } => cmd_verify(file.as_deref(), out.as_deref(), golden),
        Command::Fields { file, grid, out } => cmd_fields(file, *grid, out.as_deref()),
        Command::Indicial { k } => cmd_indicial(*k),
        Command::Spectrum { file, grid, seed, out } => cmd_spectrum(file, *grid, *seed, out.as_deref()),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("tebe: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
