//! Off-grid evaluation of profiles.

use crate::error::{Result, TebeError};
use crate::ode::{second_derivs_tau, tau_to_sigma, untwisted_u};
use crate::params::{ModelParams, State};
use crate::solver::Profile;

/// Radial data `[u, u', u'', v, v', v'']` as functions of `tau`.
pub trait Radial {
    fn params(&self) -> ModelParams;
    fn jet_tau(&self, tau: f64) -> Result<[f64; 6]>;

    /// Same data with derivatives taken in `sigma = sinh(tau)`.
    fn jet_sigma(&self, sigma: f64) -> Result<[f64; 6]> {
        let tau = sigma.asinh();
        let j = self.jet_tau(tau)?;
        let (us, uss) = tau_to_sigma(tau, j[1], j[2]);
        let (vs, vss) = tau_to_sigma(tau, j[4], j[5]);
        Ok([j[0], us, uss, j[3], vs, vss])
    }
}

/// The untwisted closed form with `v = 0`. Only meaningful where `v`
/// enters multiplied by `sin(beta) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Untwisted {
    pub p: ModelParams,
}

impl Untwisted {
    pub fn new(k: u32) -> Self {
        Self {
            p: ModelParams::new(k, 0.0).expect("zero twist is valid"),
        }
    }
}

impl Radial for Untwisted {
    fn params(&self) -> ModelParams {
        self.p
    }

    fn jet_tau(&self, tau: f64) -> Result<[f64; 6]> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(TebeError::InvalidArgument(format!("tau {tau} must be positive")));
        }
        let (u, du, ddu) = untwisted_u(self.p.b(), tau);
        Ok([u, du, ddu, 0.0, 0.0, 0.0])
    }
}

// quintic Hermite basis on [0, 1], monomial coefficients
const BASIS: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
];

/// Quintic Hermite interpolant through `(f, f', f'')` at both ends of
/// `[t0, t0 + h]`; returns value and two derivatives at `t`.
pub fn quintic(t0: f64, h: f64, left: [f64; 3], right: [f64; 3], t: f64) -> [f64; 3] {
    let data = [left[0], h * left[1], h * h * left[2], right[0], h * right[1], h * h * right[2]];
    let mut c = [0.0; 6];
    for (d, b) in data.iter().zip(BASIS.iter()) {
        for i in 0..6 {
            c[i] += d * b[i];
        }
    }
    let s = (t - t0) / h;
    let (mut f, mut df, mut ddf) = (0.0, 0.0, 0.0);
    for i in (0..6).rev() {
        ddf = ddf * s + df * 2.0;
        df = df * s + f;
        f = f * s + c[i];
    }
    [f, df / h, ddf / (h * h)]
}

/// `u` carried as `w = u - log(2 tau)`, which is smooth down to the seed.
fn shifted_node(p: &ModelParams, tau: f64, s: &State) -> ([f64; 3], [f64; 3]) {
    let (upp, vpp) = second_derivs_tau(p, tau, s);
    (
        [s.u - (2.0 * tau).ln(), s.du - 1.0 / tau, upp + 1.0 / (tau * tau)],
        [s.v, s.dv, vpp],
    )
}

impl Profile {
    /// Locates `tau` on the grid; `None` below the seed.
    fn bracket(&self, tau: f64) -> Result<Option<usize>> {
        let hi = self.tau_max();
        if !(tau > 0.0) || tau > hi {
            return Err(TebeError::Extrapolation { tau, tau_max: hi });
        }
        if tau < self.tau_seed() {
            return Ok(None);
        }
        let i = self.grid.partition_point(|&g| g <= tau);
        Ok(Some(i.clamp(1, self.grid.len() - 1) - 1))
    }

    /// Interpolated state. Below the seed the series is used.
    pub fn eval(&self, tau: f64) -> Result<State> {
        let j = self.jet_tau(tau)?;
        Ok(State::new(j[0], j[1], j[3], j[4]))
    }
}

impl Radial for Profile {
    fn params(&self) -> ModelParams {
        self.p
    }

    fn jet_tau(&self, tau: f64) -> Result<[f64; 6]> {
        let Some(i) = self.bracket(tau)? else {
            return Ok(self.expansion()?.eval_full(tau));
        };
        let (t0, t1) = (self.grid[i], self.grid[i + 1]);
        let (w0, v0) = shifted_node(&self.p, t0, &self.states[i]);
        let (w1, v1) = shifted_node(&self.p, t1, &self.states[i + 1]);
        let w = quintic(t0, t1 - t0, w0, w1, tau);
        let v = quintic(t0, t1 - t0, v0, v1, tau);
        // second derivatives from the equation, not from the interpolant
        let s = State::new(w[0] + (2.0 * tau).ln(), w[1] + 1.0 / tau, v[0], v[1]);
        let (upp, vpp) = second_derivs_tau(&self.p, tau, &s);
        Ok([s.u, s.du, upp, s.v, s.dv, vpp])
    }
}
