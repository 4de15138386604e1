//! Warm-started continuation of the solution family in the twist.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TebeError};
use crate::params::ModelParams;
use crate::solver::{cross_residual, shoot, Profile, ShootParams, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub grow: f64,
    /// Steps whose cross residual exceeds `threshold * b^2` are shortened before solving.
    pub threshold: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            max_step: 0.05,
            min_step: 1e-5,
            grow: 1.5,
            threshold: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub from: f64,
    pub to: f64,
    pub accepted: bool,
    pub cross_residual: f64,
    pub iterations: usize,
    /// Matching residual of the attempt, when the shot returned a profile.
    pub matching_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRun {
    pub k: u32,
    pub zeta_targets: Vec<f64>,
    /// One converged profile per target, in target order.
    pub profiles: Vec<Profile>,
    pub step_history: Vec<StepRecord>,
}

impl ContinuationRun {
    pub fn all_converged(&self) -> bool {
        self.profiles.iter().all(|p| p.converged)
    }

    pub fn accepted_steps(&self) -> usize {
        self.step_history.iter().filter(|s| s.accepted).count()
    }
}

fn check_targets(targets: &[f64]) -> Result<Vec<f64>> {
    let mut t: Vec<f64> = targets.to_vec();
    for &z in &t {
        if !(0.0..0.5).contains(&z) {
            return Err(TebeError::ZetaOutOfRange(z));
        }
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

/// Sweeps from zero twist through every target (sorted, deduplicated).
pub fn continue_to_targets(k: u32, targets: &[f64], cfg: &SolverConfig, policy: &StepPolicy) -> Result<ContinuationRun> {
    cfg.validate()?;
    let targets = check_targets(targets)?;
    let p0 = ModelParams::new(k, 0.0)?;
    let b2 = p0.b() * p0.b();

    let first = shoot(&p0, cfg, ShootParams::untwisted_guess(&p0))?;
    if !first.converged {
        return Err(TebeError::Stall { last_good: 0.0, step: 0.0 });
    }
    let mut profiles = Vec::new();
    let mut history = Vec::new();
    let mut ti = 0;
    while ti < targets.len() && targets[ti] == 0.0 {
        profiles.push(first.clone());
        ti += 1;
    }

    let mut current = first;
    let mut previous: Option<(f64, ShootParams)> = None;
    let mut h = policy.initial_step.min(policy.max_step);
    let mut streak = 0;
    while ti < targets.len() {
        let z = current.p.zeta();
        let target = targets[ti];
        let mut zn = (z + h).min(target);
        let mut cr = cross_residual(&current, zn)?;
        while cr > policy.threshold * b2 && zn - z > policy.min_step {
            h *= 0.5;
            zn = (z + h).min(target);
            cr = cross_residual(&current, zn)?;
        }
        // secant predictor on the shooting parameters
        let guess = match previous {
            Some((zp, xp)) if z > zp => {
                let s = (zn - z) / (z - zp);
                let x = current.params;
                ShootParams {
                    a: x.a + s * (x.a - xp.a),
                    c: x.c + s * (x.c - xp.c),
                    u_inf: x.u_inf + s * (x.u_inf - xp.u_inf),
                    v_inf: x.v_inf + s * (x.v_inf - xp.v_inf),
                }
            }
            _ => current.params,
        };
        let p = ModelParams::new(k, zn)?;
        let attempt = shoot(&p, cfg, guess);
        let ok = matches!(&attempt, Ok(prof) if prof.converged);
        history.push(StepRecord {
            from: z,
            to: zn,
            accepted: ok,
            cross_residual: cr,
            iterations: attempt.as_ref().map(|p| p.iterations).unwrap_or(0),
            matching_residual: attempt.as_ref().ok().map(|p| p.matching_residual()),
        });
        if ok {
            let prof = attempt.expect("checked above");
            previous = Some((z, current.params));
            current = prof;
            if zn == target {
                profiles.push(current.clone());
                ti += 1;
            }
            streak += 1;
            if streak >= 2 {
                h = (h * policy.grow).min(policy.max_step);
                streak = 0;
            }
        } else {
            streak = 0;
            h *= 0.5;
            if h < policy.min_step {
                return Err(TebeError::Stall { last_good: z, step: h });
            }
        }
    }
    Ok(ContinuationRun {
        k,
        zeta_targets: targets,
        profiles,
        step_history: history,
    })
}

/// Continues up to `zeta_max`; the run contains the single final profile
/// (or just the untwisted one when `zeta_max == 0`).
pub fn continue_in_zeta(k: u32, zeta_max: f64, cfg: &SolverConfig, policy: &StepPolicy) -> Result<ContinuationRun> {
    continue_to_targets(k, &[zeta_max], cfg, policy)
}

/// Solves at one twist through an internal continuation from zero.
pub fn solve_at(k: u32, zeta: f64, cfg: &SolverConfig, policy: &StepPolicy) -> Result<Profile> {
    let mut run = continue_in_zeta(k, zeta, cfg, policy)?;
    Ok(run.profiles.pop().expect("one target"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_request_returns_untwisted() {
        let run = continue_in_zeta(1, 0.0, &SolverConfig::default(), &StepPolicy::default()).unwrap();
        assert_eq!(run.profiles.len(), 1);
        assert_eq!(run.profiles[0].p.zeta(), 0.0);
        assert!(run.step_history.is_empty());
    }

    #[test]
    fn reaches_targets_in_order() {
        let run = continue_to_targets(1, &[0.2, 0.1, 0.1], &SolverConfig::default(), &StepPolicy::default()).unwrap();
        let z: Vec<f64> = run.profiles.iter().map(|p| p.p.zeta()).collect();
        assert_eq!(z, vec![0.1, 0.2]);
        assert!(run.all_converged());
        assert!(run.step_history.windows(2).all(|w| w[1].from >= w[0].from));
    }

    #[test]
    fn rejects_out_of_range_targets() {
        assert!(continue_to_targets(1, &[0.5], &SolverConfig::default(), &StepPolicy::default()).is_err());
    }
}
