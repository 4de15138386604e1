//! Two-sided shooting for the singular boundary value problem.
//!
//! The inner solution starts from the series at `tau_seed` (free `a`, `c`),
//! the outer one from the far-field model at `tau_max` (free `u_inf`,
//! `v_inf`). Both are integrated to `tau_match` and Newton closes the
//! four-component mismatch. Shooting all the way out is hopeless: `v'`
//! carries a mode growing like `e^{2 b tau}`.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TebeError};
use crate::integrator::{self, Options, Trajectory};
use crate::ode::{first_integral, rhs, rhs_shifted, witten_u0};
use crate::params::{ModelParams, State};
use crate::series::{derive_recurrence, FarFieldModel, NearZeroExpansion, DEFAULT_ORDER, DEFAULT_TAU_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tau_seed: f64,
    pub tau_max: f64,
    pub tau_match: f64,
    pub tol: f64,
    pub order: usize,
    pub max_iters: usize,
    /// Number of stored grid points.
    pub grid: usize,
    /// Newton stops once the mismatch sup-norm is below this.
    pub newton_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau_seed: DEFAULT_TAU_SEED,
            tau_max: 15.0,
            tau_match: 1.0,
            tol: 1e-12,
            order: DEFAULT_ORDER,
            max_iters: 30,
            grid: 2000,
            newton_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.tau_seed > 0.0 && self.tau_seed <= 0.1) {
            problems.push(format!("tau_seed {} outside (0, 0.1]", self.tau_seed));
        }
        if !(self.tau_max >= 5.0 && self.tau_max <= 40.0) {
            problems.push(format!("tau_max {} outside [5, 40]", self.tau_max));
        }
        if !(self.tau_match > self.tau_seed.max(0.1) && self.tau_match < self.tau_max - 1.0) {
            problems.push(format!("tau_match {} must lie inside (max(tau_seed, 0.1), tau_max - 1)", self.tau_match));
        }
        if !(1e-13..=1e-6).contains(&self.tol) {
            problems.push(format!("tol {} outside [1e-13, 1e-6]", self.tol));
        }
        if !(3..=crate::series::MAX_ORDER).contains(&self.order) {
            problems.push(format!("series order {} outside [3, 10]", self.order));
        }
        if self.grid < 50 {
            problems.push(format!("grid {} below 50", self.grid));
        }
        if self.max_iters == 0 {
            problems.push("max_iters must be positive".into());
        }
        if !(self.newton_tol > 0.0) {
            problems.push("newton_tol must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TebeError::InvalidArgument(problems.join("; ")))
        }
    }
}

/// The four unknowns of the matching problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootParams {
    pub a: f64,
    pub c: f64,
    pub u_inf: f64,
    pub v_inf: f64,
}

impl ShootParams {
    /// Closed-form values at zero twist (with `c` unknown, guessed 0).
    pub fn untwisted_guess(p: &ModelParams) -> Self {
        let b = p.b();
        let ff = FarFieldModel::untwisted(p);
        Self {
            a: b * b / 6.0,
            c: 0.0,
            u_inf: ff.u_inf,
            v_inf: ff.v_inf,
        }
    }

    fn to_vec(self) -> Vector4<f64> {
        Vector4::new(self.a, self.c, self.u_inf, self.v_inf)
    }

    fn from_vec(x: &Vector4<f64>) -> Self {
        Self {
            a: x[0],
            c: x[1],
            u_inf: x[2],
            v_inf: x[3],
        }
    }

    pub fn far_field(&self) -> FarFieldModel {
        FarFieldModel {
            u_inf: self.u_inf,
            v_inf: self.v_inf,
        }
    }
}

/// Grid clustered geometrically near `tau_seed` and uniform past `tau = 1`.
pub fn make_grid(tau_seed: f64, tau_max: f64, n: usize) -> Vec<f64> {
    let knee = 1.0_f64.max(tau_seed);
    let s1 = (knee / tau_seed).ln();
    let total = s1 + (tau_max - knee);
    let mut g: Vec<f64> = (0..n)
        .map(|i| {
            let s = total * i as f64 / (n - 1) as f64;
            if s <= s1 {
                tau_seed * s.exp()
            } else {
                knee + (s - s1)
            }
        })
        .collect();
    g[0] = tau_seed;
    g[n - 1] = tau_max;
    g
}

/// A solved (or best-effort) profile sampled on its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub p: ModelParams,
    pub config: SolverConfig,
    pub params: ShootParams,
    pub grid: Vec<f64>,
    pub states: Vec<State>,
    /// Sup-norm of the mismatch at `tau_match`.
    pub residual_norm: f64,
    pub r1: f64,
    pub r2: f64,
    pub first_integral_drift: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl Profile {
    pub fn expansion(&self) -> Result<NearZeroExpansion> {
        derive_recurrence(&self.p, self.params.a, self.params.c, self.config.order)
    }

    pub fn b(&self) -> f64 {
        self.p.b()
    }

    pub fn tau_seed(&self) -> f64 {
        self.grid[0]
    }

    pub fn tau_max(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    /// Largest deviation from the untwisted closed form on `[lo, hi]`.
    pub fn sup_error_vs_untwisted(&self, lo: f64, hi: f64) -> f64 {
        self.grid
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, s)| (s.u - witten_u0(&self.p, *t)).abs())
            .fold(0.0, f64::max)
    }

    /// Matching residual sup-norm including the outer conditions.
    pub fn matching_residual(&self) -> f64 {
        self.residual_norm.max(self.r1.abs()).max(self.r2.abs())
    }
}

pub fn first_integral_drift(p: &ModelParams, states: &[State]) -> f64 {
    let b2 = p.b() * p.b();
    states
        .iter()
        .map(|s| (first_integral(p, s) - b2).abs() / b2)
        .fold(0.0, f64::max)
}

/// Integrated solution; the inner half is carried in `w = u - log(2 tau)`.
#[derive(Debug, Clone)]
pub struct Path {
    pub traj: Trajectory<4>,
    shifted: bool,
}

impl Path {
    fn unshift(&self, t: f64, y: [f64; 4]) -> State {
        if self.shifted {
            State::new((2.0 * t).ln() + y[0], 1.0 / t + y[1], y[2], y[3])
        } else {
            State::from_array(y)
        }
    }

    pub fn eval(&self, t: f64) -> Option<State> {
        self.traj.eval(t).map(|y| self.unshift(t, y))
    }

    pub fn end(&self) -> State {
        self.unshift(self.traj.t_end, self.traj.y_end)
    }

    pub fn escaped_at(&self) -> Option<f64> {
        self.traj.escaped_at
    }

    pub fn completed(&self) -> bool {
        self.traj.completed()
    }
}

/// Forward trajectory from the series data, the plain initial value problem.
pub fn integrate(p: &ModelParams, a: f64, c: f64, tau_seed: f64, tau_end: f64, tol: f64, order: usize) -> Result<Path> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(TebeError::InvalidArgument(format!("tol {tol} outside [1e-13, 1e-6]")));
    }
    let exp = derive_recurrence(p, a, c, order)?;
    exp.series_state(tau_seed, tau_seed)?;
    let (w, dw, _) = exp.shifted_part(tau_seed);
    let s0 = exp.state_unchecked(tau_seed);
    let pp = *p;
    let traj = integrator::integrate(
        move |t, y| rhs_shifted(&pp, t, y),
        tau_seed,
        [w, dw, s0.v, s0.dv],
        tau_end,
        &Options::with_tol(tol),
    )?;
    Ok(Path { traj, shifted: true })
}

/// Backward trajectory from the far-field model.
pub fn integrate_outer(p: &ModelParams, far: &FarFieldModel, tau_max: f64, tau_end: f64, tol: f64) -> Result<Path> {
    let s = far.state(p, tau_max);
    let pp = *p;
    let traj = integrator::integrate(move |t, y| rhs(&pp, t, y), tau_max, s.to_array(), tau_end, &Options::with_tol(tol))?;
    Ok(Path { traj, shifted: false })
}

struct Halves {
    inner: Path,
    outer: Path,
}

fn run_halves(p: &ModelParams, cfg: &SolverConfig, x: &ShootParams) -> Result<Halves> {
    let inner = integrate(p, x.a, x.c, cfg.tau_seed, cfg.tau_match, cfg.tol, cfg.order)?;
    if let Some(t) = inner.escaped_at() {
        return Err(TebeError::Escape { tau: t });
    }
    let outer = integrate_outer(p, &x.far_field(), cfg.tau_max, cfg.tau_match, cfg.tol)?;
    if let Some(t) = outer.escaped_at() {
        return Err(TebeError::Escape { tau: t });
    }
    Ok(Halves { inner, outer })
}

fn mismatch(p: &ModelParams, cfg: &SolverConfig, x: &ShootParams) -> Result<Vector4<f64>> {
    let h = run_halves(p, cfg, x)?;
    let a = h.inner.end().to_array();
    let b = h.outer.end().to_array();
    Ok(Vector4::from(std::array::from_fn(|i| a[i] - b[i])))
}

fn jacobian(p: &ModelParams, cfg: &SolverConfig, x: &Vector4<f64>) -> Result<Matrix4<f64>> {
    let mut j = Matrix4::zeros();
    for col in 0..4 {
        let h = 1e-6 * x[col].abs().max(1.0);
        let mut xp = *x;
        let mut xm = *x;
        xp[col] += h;
        xm[col] -= h;
        let fp = mismatch(p, cfg, &ShootParams::from_vec(&xp))?;
        let fm = mismatch(p, cfg, &ShootParams::from_vec(&xm))?;
        j.set_column(col, &((fp - fm) / (2.0 * h)));
    }
    Ok(j)
}

/// Result of a Newton solve before the profile is sampled.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOutcome {
    pub params: ShootParams,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn newton(p: &ModelParams, cfg: &SolverConfig, guess: ShootParams) -> Result<NewtonOutcome> {
    cfg.validate()?;
    let mut x = guess.to_vec();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(TebeError::InvalidArgument("non-finite initial guess".into()));
    }
    let mut f = mismatch(p, cfg, &guess)?;
    let mut norm = f.amax();
    let mut iters = 0;
    while iters < cfg.max_iters && norm >= cfg.newton_tol {
        iters += 1;
        let j = jacobian(p, cfg, &x)?;
        let svd = j.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-14 * smax) {
            return Err(TebeError::SingularJacobian { cond: smax / smin.max(f64::MIN_POSITIVE) });
        }
        let dx = j.lu().solve(&(-f)).ok_or(TebeError::SingularJacobian { cond: f64::INFINITY })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1.0 / 1024.0 {
            let xt = x + dx * lambda;
            if let Ok(ft) = mismatch(p, cfg, &ShootParams::from_vec(&xt)) {
                let nt = ft.amax();
                if nt.is_finite() && nt < (1.0 - 1e-4 * lambda) * norm {
                    x = xt;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // noise floor of the integrator: no further descent is possible
            break;
        }
        if dx.amax() * lambda < 1e-15 * (1.0 + x.amax()) {
            break;
        }
    }
    Ok(NewtonOutcome {
        params: ShootParams::from_vec(&x),
        residual: norm,
        iterations: iters,
        converged: norm < cfg.newton_tol.max(1e-8),
    })
}

/// Samples the two halves on the configured grid.
pub fn build_profile(p: &ModelParams, cfg: &SolverConfig, out: &NewtonOutcome) -> Result<Profile> {
    let halves = run_halves(p, cfg, &out.params)?;
    let grid = make_grid(cfg.tau_seed, cfg.tau_max, cfg.grid);
    let states = grid
        .iter()
        .map(|&t| {
            let y = if t <= cfg.tau_match {
                halves.inner.eval(t)
            } else {
                halves.outer.eval(t)
            };
            y.ok_or(TebeError::Extrapolation { tau: t, tau_max: cfg.tau_max })
        })
        .collect::<Result<Vec<_>>>()?;
    let last = states[states.len() - 1];
    let (r1, r2) = crate::series::farfield_residuals(p, &last, cfg.tau_max);
    let drift = first_integral_drift(p, &states);
    Ok(Profile {
        p: *p,
        config: *cfg,
        params: out.params,
        grid,
        states,
        residual_norm: out.residual,
        r1,
        r2,
        first_integral_drift: drift,
        converged: out.converged && r1.abs() < 1e-8 && r2.abs() < 1e-8,
        iterations: out.iterations,
    })
}

/// Newton solve from `guess` followed by sampling.
///
/// A non-converged solve still returns its best iterate with
/// `converged == false`.
pub fn shoot(p: &ModelParams, cfg: &SolverConfig, guess: ShootParams) -> Result<Profile> {
    let out = newton(p, cfg, guess)?;
    build_profile(p, cfg, &out)
}

/// Norm of the `zeta1` equation residual along a profile solved at its own twist.
pub fn cross_residual(profile: &Profile, zeta1: f64) -> Result<f64> {
    let p0 = profile.p;
    let p1 = p0.with_zeta(zeta1)?;
    let mut worst = 0.0_f64;
    for (t, s) in profile.grid.iter().zip(&profile.states) {
        let (u0, v0) = crate::ode::second_derivs_tau(&p0, *t, s);
        let (u1, v1) = crate::ode::second_derivs_tau(&p1, *t, s);
        worst = worst.max((u1 - u0).abs()).max((v1 - v0).abs());
    }
    Ok(worst)
}
