//! Model parameters, the reduced ODE state and the coordinate changes
//! between the cylinder variable `sigma = y / r`, the ODE variable `tau`
//! and the polar angle `psi` on the half sphere.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TebeError};

/// Magnetic charge `k` and twist `zeta = sin(beta)`.
///
/// Only `k` and `zeta` are stored; every derived angle is recomputed on
/// demand so the parameter set can never become inconsistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    k: u32,
    zeta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    k: u32,
    zeta: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = TebeError;
    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.k, raw.zeta)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { k: p.k, zeta: p.zeta }
    }
}

impl ModelParams {
    pub fn new(k: u32, zeta: f64) -> Result<Self> {
        if k == 0 {
            return Err(TebeError::InvalidCharge(k));
        }
        check_zeta(zeta)?;
        Ok(Self { k, zeta })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// `b = k + 1`, the exponent of `r` in the ansatz and the far-field slope of `u`.
    pub fn b(&self) -> f64 {
        f64::from(self.k) + 1.0
    }

    pub fn beta(&self) -> f64 {
        self.zeta.asin()
    }

    pub fn cos_beta(&self) -> f64 {
        (1.0 - self.zeta * self.zeta).sqrt()
    }

    pub fn t(&self) -> f64 {
        param_conversions(self.zeta).expect("validated at construction").t
    }

    pub fn theta(&self) -> f64 {
        param_conversions(self.zeta).expect("validated at construction").theta
    }

    /// `d_zeta = 1 - 2 zeta`, the decay-rate margin of the far-field bounds.
    pub fn d_zeta(&self) -> f64 {
        1.0 - 2.0 * self.zeta
    }

    pub fn with_zeta(&self, zeta: f64) -> Result<Self> {
        Self::new(self.k, zeta)
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&zeta) {
        return Err(TebeError::ZetaOutOfRange(zeta));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angles {
    pub beta: f64,
    pub theta: f64,
    pub t: f64,
}

/// `beta = arcsin(zeta)`, `t = tan(pi/4 - 3 beta / 2)`, `theta = arctan(t)`.
pub fn param_conversions(zeta: f64) -> Result<Angles> {
    check_zeta(zeta)?;
    let beta = zeta.asin();
    let t = (FRAC_PI_4 - 1.5 * beta).tan();
    Ok(Angles {
        beta,
        theta: t.atan(),
        t,
    })
}

/// `(u, u', v, v')` with derivatives taken in `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub u: f64,
    pub du: f64,
    pub v: f64,
    pub dv: f64,
}

impl State {
    pub const fn new(u: f64, du: f64, v: f64, dv: f64) -> Self {
        Self { u, du, v, dv }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.u, self.du, self.v, self.dv]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// The three radial-type coordinates of the reduced problem plus `omega = pi/2 - psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coords {
    pub tau: f64,
    pub sigma: f64,
    pub psi: f64,
    pub omega: f64,
}

impl Coords {
    pub fn from_tau(tau: f64) -> Self {
        let sigma = tau.sinh();
        // sigma = cot(psi)  <=>  psi = atan2(1, sigma)
        let psi = 1.0_f64.atan2(sigma);
        Self {
            tau,
            sigma,
            psi,
            omega: FRAC_PI_2 - psi,
        }
    }

    pub fn from_sigma(sigma: f64) -> Self {
        let psi = 1.0_f64.atan2(sigma);
        Self {
            tau: sigma.asinh(),
            sigma,
            psi,
            omega: FRAC_PI_2 - psi,
        }
    }

    pub fn from_psi(psi: f64) -> Self {
        // cot(psi) = cos/sin keeps full precision near psi = pi/2.
        let sigma = psi.cos() / psi.sin();
        Self {
            tau: sigma.asinh(),
            sigma,
            psi,
            omega: FRAC_PI_2 - psi,
        }
    }
}
