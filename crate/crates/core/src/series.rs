//! Local data at both ends of the half line.
//!
//! Near `tau = 0` the solution is `u = log(2 tau) + w(tau)`, `v` with `w`, `v`
//! power series. The two free coefficients are `a` (of `tau^2` in `w`) and
//! `c` (of `tau^3` in `v`); everything else follows from a triangular
//! recurrence. At large `tau` a two-parameter exponential model `(u_inf, v_inf)`
//! captures the admissible decaying family.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TebeError};
use crate::params::{ModelParams, State};

pub const DEFAULT_ORDER: usize = 6;
pub const MAX_ORDER: usize = 10;
pub const DEFAULT_TAU_SEED: f64 = 1e-2;

/// Truncated power-series helpers. A series is its coefficient vector.
mod ps {
    pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..n - i {
                out[i + j] += a[i] * b[j];
            }
        }
        out
    }

    pub fn exp(a: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut e = vec![0.0; n];
        e[0] = a[0].exp();
        for m in 1..n {
            let s: f64 = (1..=m).map(|j| j as f64 * a[j] * e[m - j]).sum();
            e[m] = s / m as f64;
        }
        e
    }

    /// `tau d/dtau`
    pub fn euler(a: &[f64]) -> Vec<f64> {
        a.iter().enumerate().map(|(n, x)| n as f64 * x).collect()
    }

    /// Multiply by `tau`.
    pub fn shift_up(a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len()];
        out[1..].copy_from_slice(&a[..a.len() - 1]);
        out
    }

    /// Divide by `tau`; the constant term must vanish.
    pub fn shift_down(a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len()];
        out[..a.len() - 1].copy_from_slice(&a[1..]);
        out
    }

    pub fn axpy(alpha: f64, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| alpha * x + y).collect()
    }

    pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
        a.iter().map(|x| alpha * x).collect()
    }

    /// Taylor coefficients of `tanh`, from `T' = 1 - T^2`.
    pub fn tanh(n: usize) -> Vec<f64> {
        let mut t = vec![0.0; n];
        for m in 1..n {
            // m t_m = [1 - T^2]_{m-1}
            let sq: f64 = (0..m).map(|j| t[j] * t[m - 1 - j]).sum();
            let rhs = if m == 1 { 1.0 - sq } else { -sq };
            t[m] = rhs / m as f64;
        }
        t
    }
}

/// Residual series of the two equations after multiplying by `tau^2`.
fn residual_series(p: &ModelParams, w: &[f64], v: &[f64], tanh: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let z2 = p.zeta() * p.zeta();
    let b = p.b();
    let one = {
        let mut o = vec![0.0; n];
        o[0] = 1.0;
        o
    };
    let big_v = ps::axpy(-z2 * b, v, &one);
    let dw = ps::euler(w);
    let dv = ps::euler(v);
    let vp = ps::shift_down(&dv);
    let tau2_wpp: Vec<f64> = ps::euler(&dw).iter().zip(&dw).map(|(x, y)| x - y).collect();
    let tau2_vpp: Vec<f64> = ps::euler(&dv).iter().zip(&dv).map(|(x, y)| x - y).collect();

    // Q = 4 V^2 + zeta^2 v'^2 + 4 zeta^2 V v' T
    let vv = ps::mul(&big_v, &big_v);
    let vpvp = ps::mul(&vp, &vp);
    let vvpt = ps::mul(&ps::mul(&big_v, &vp), tanh);
    let q: Vec<f64> = (0..n).map(|i| 4.0 * vv[i] + z2 * vpvp[i] + 4.0 * z2 * vvpt[i]).collect();
    let e = ps::exp(&ps::scale(-2.0, w));
    let eq = ps::mul(&e, &q);
    let r_u: Vec<f64> = (0..n).map(|i| tau2_wpp[i] + 0.25 * eq[i] - one[i]).collect();

    // tau^2 v'' - (1 + tau w') (2 tau v' + 4 V tau T) + 4 b V tau^2
    let tau_t = ps::shift_up(tanh);
    let inner: Vec<f64> = ps::axpy(2.0, &dv, &ps::scale(4.0, &ps::mul(&big_v, &tau_t)));
    let outer = ps::mul(&ps::axpy(1.0, &dw, &one), &inner);
    let tau2_v = ps::shift_up(&ps::shift_up(&big_v));
    let r_v: Vec<f64> = (0..n).map(|i| tau2_vpp[i] - outer[i] + 4.0 * b * tau2_v[i]).collect();
    (r_u, r_v)
}

/// Truncated Frobenius data at `tau = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearZeroExpansion {
    pub p: ModelParams,
    pub a: f64,
    pub c: f64,
    pub order: usize,
    /// Coefficients of `w = u - log(2 tau)`, index = power.
    pub coeffs_u: Vec<f64>,
    pub coeffs_v: Vec<f64>,
}

/// Solves the recurrence through `tau^order` for given free data `(a, c)`.
pub fn derive_recurrence(p: &ModelParams, a: f64, c: f64, order: usize) -> Result<NearZeroExpansion> {
    if !(3..=MAX_ORDER).contains(&order) {
        return Err(TebeError::InvalidArgument(format!("series order {order} outside [3, {MAX_ORDER}]")));
    }
    if !a.is_finite() || !c.is_finite() {
        return Err(TebeError::InvalidArgument("non-finite free coefficients".into()));
    }
    let len = order + 1;
    let tanh = ps::tanh(len);
    let mut w = vec![0.0; len];
    let mut v = vec![0.0; len];
    let mut scale = 1.0_f64;
    for n in 1..=order {
        for (is_v, free) in [(true, (n == 3).then_some(c)), (false, (n == 2).then_some(a))] {
            let eval = |w: &[f64], v: &[f64]| {
                let (ru, rv) = residual_series(p, w, v, &tanh);
                if is_v {
                    rv[n]
                } else {
                    ru[n]
                }
            };
            let target = |w: &mut Vec<f64>, v: &mut Vec<f64>, x: f64| {
                if is_v {
                    v[n] = x;
                } else {
                    w[n] = x;
                }
            };
            target(&mut w, &mut v, 0.0);
            let r0 = eval(&w, &v);
            target(&mut w, &mut v, 1.0);
            let r1 = eval(&w, &v);
            let pivot = r1 - r0;
            scale = scale.max(r0.abs());
            if pivot.abs() < 1e-9 {
                // resonant power: the coefficient is free, but the equation must already hold
                if r0.abs() > 1e-9 * scale.max(1.0) {
                    return Err(TebeError::Resonance { power: n, residual: r0 });
                }
                let x = free.ok_or(TebeError::Resonance { power: n, residual: r0 })?;
                target(&mut w, &mut v, x);
            } else {
                target(&mut w, &mut v, -r0 / pivot);
            }
        }
    }
    Ok(NearZeroExpansion {
        p: *p,
        a,
        c,
        order,
        coeffs_u: w,
        coeffs_v: v,
    })
}

fn horner(coeffs: &[f64], x: f64) -> (f64, f64, f64) {
    let mut f = 0.0;
    let mut d = 0.0;
    let mut dd = 0.0;
    for &cf in coeffs.iter().rev() {
        dd = dd * x + 2.0 * d;
        d = d * x + f;
        f = f * x + cf;
    }
    (f, d, dd)
}

impl NearZeroExpansion {
    pub fn new(p: &ModelParams, a: f64, c: f64, order: usize) -> Result<Self> {
        derive_recurrence(p, a, c, order)
    }

    /// `(u, u', u'', v, v', v'')` from the truncated series, no range check.
    pub fn eval_full(&self, tau: f64) -> [f64; 6] {
        let (w, dw, ddw) = horner(&self.coeffs_u, tau);
        let (v, dv, ddv) = horner(&self.coeffs_v, tau);
        [
            (2.0 * tau).ln() + w,
            1.0 / tau + dw,
            -1.0 / (tau * tau) + ddw,
            v,
            dv,
            ddv,
        ]
    }

    /// `(w, w', w'')` with `w = u - log(2 tau)`.
    pub fn shifted_part(&self, tau: f64) -> (f64, f64, f64) {
        horner(&self.coeffs_u, tau)
    }

    pub fn state_unchecked(&self, tau: f64) -> State {
        let f = self.eval_full(tau);
        State::new(f[0], f[1], f[3], f[4])
    }

    pub fn series_state(&self, tau: f64, tau_seed: f64) -> Result<State> {
        if !(tau > 0.0 && tau <= tau_seed * (1.0 + 1e-12)) {
            return Err(TebeError::OutsideSeriesRange { tau, tau_seed });
        }
        Ok(self.state_unchecked(tau))
    }
}

/// Evaluates the expansion at `tau` in `(0, tau_seed]`.
pub fn series_state(exp: &NearZeroExpansion, tau: f64, tau_seed: f64) -> Result<State> {
    exp.series_state(tau, tau_seed)
}

/// Exponentially accurate large-`tau` family, error `O(e^{-4 tau})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldModel {
    pub u_inf: f64,
    pub v_inf: f64,
}

impl FarFieldModel {
    /// Asymptotic constants of the untwisted profile.
    pub fn untwisted(p: &ModelParams) -> Self {
        Self {
            u_inf: -p.b().ln(),
            v_inf: 0.0,
        }
    }

    pub fn coefficients(&self, p: &ModelParams) -> (f64, f64) {
        let b = p.b();
        let z2 = p.zeta() * p.zeta();
        let vinf = 1.0 - z2 * b * self.v_inf;
        let big_b = 2.0 * vinf * vinf * (-2.0 * self.u_inf).exp() / b;
        let big_a = 4.0 * b * vinf / (1.0 + b);
        (big_b, big_a)
    }

    pub fn state(&self, p: &ModelParams, tau: f64) -> State {
        let b = p.b();
        let (big_b, big_a) = self.coefficients(p);
        let eb = (-2.0 * b * tau).exp();
        let e2 = (-2.0 * tau).exp();
        State::new(
            b * tau + self.u_inf - big_b / (2.0 * b) * eb,
            b + big_b * eb,
            self.v_inf - 0.5 * big_a * e2,
            big_a * e2,
        )
    }
}

/// Matching report at the outer end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    pub tau_max: f64,
    /// `w = u - u0` at `tau_max`.
    pub w_value: f64,
    pub r1: f64,
    pub r2: f64,
}

/// `(u' - b, v')` at `tau_max`.
pub fn farfield_residuals(p: &ModelParams, s: &State, _tau_max: f64) -> (f64, f64) {
    (s.du - p.b(), s.dv)
}

pub fn farfield_report(p: &ModelParams, s: &State, tau_max: f64) -> FarField {
    let (r1, r2) = farfield_residuals(p, s, tau_max);
    FarField {
        tau_max,
        w_value: s.u - crate::ode::witten_u0(p, tau_max),
        r1,
        r2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{second_derivs_tau, untwisted_u};

    fn params(k: u32, z: f64) -> ModelParams {
        ModelParams::new(k, z).unwrap()
    }

    #[test]
    fn tanh_coefficients() {
        let t = ps::tanh(8);
        let want = [0.0, 1.0, 0.0, -1.0 / 3.0, 0.0, 2.0 / 15.0, 0.0, -17.0 / 315.0];
        for (a, b) in t.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn series_exp_matches_std() {
        let a = [0.3, -0.5, 0.25, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let e = ps::exp(&a);
        let x = 0.05_f64;
        let direct = a.iter().enumerate().map(|(n, c)| c * x.powi(n as i32)).sum::<f64>().exp();
        let approx: f64 = e.iter().enumerate().map(|(n, c)| c * x.powi(n as i32)).sum();
        assert!((direct - approx).abs() < 1e-14);
    }

    #[test]
    fn v_quadratic_coefficient_is_2k() {
        for k in 1..=5 {
            for &z in &[0.0, 0.2, 0.45] {
                let e = derive_recurrence(&params(k, z), 0.7, -0.3, 6).unwrap();
                assert!((e.coeffs_v[2] - 2.0 * k as f64).abs() < 1e-12);
                assert_eq!(e.coeffs_v[0], 0.0);
                assert!(e.coeffs_v[1].abs() < 1e-14);
                assert_eq!(e.coeffs_v[3], -0.3);
                assert_eq!(e.coeffs_u[2], 0.7);
            }
        }
    }

    #[test]
    fn untwisted_series_matches_closed_form() {
        for k in 1..=3 {
            let p = params(k, 0.0);
            let b = p.b();
            let e = derive_recurrence(&p, b * b / 6.0, 0.0, 10).unwrap();
            // log(sinh x / x) = x^2/6 - x^4/180 + x^6/2835 - ...
            assert!((e.coeffs_u[4] + b.powi(4) / 180.0).abs() < 1e-12);
            assert!((e.coeffs_u[6] - b.powi(6) / 2835.0).abs() < 1e-11);
            let tau = 0.01;
            let s = e.series_state(tau, 0.01).unwrap();
            let (u, du, _) = untwisted_u(b, tau);
            assert!((s.u - u).abs() < 1e-15 * 10.0);
            assert!((s.du - du).abs() < 1e-12);
        }
    }

    // ODE residual of the truncated series, arranged to avoid the
    // cancellation between u'' ~ -1/tau^2 and e^{-2u}.
    fn careful_residual(e: &NearZeroExpansion, tau: f64) -> f64 {
        let p = &e.p;
        let z2 = p.zeta() * p.zeta();
        let b = p.b();
        let (w, dw, ddw) = horner(&e.coeffs_u, tau);
        let (v, dv, ddv) = horner(&e.coeffs_v, tau);
        let t = tau.tanh();
        let big_v = 1.0 - z2 * b * v;
        let q4m1 = -z2 * b * v * (2.0 - z2 * b * v) + 0.25 * z2 * dv * dv + z2 * big_v * dv * t;
        let q4 = 1.0 + q4m1;
        let ru = ddw + ((-2.0 * w).exp_m1() * q4 + q4m1) / (tau * tau);
        let rv = ddv - (1.0 / tau + dw) * (2.0 * dv + 4.0 * big_v * t) + 4.0 * b * big_v;
        ru.abs().max(rv.abs())
    }

    #[test]
    fn residual_order_slope() {
        for &(k, z, order) in &[(2, 0.3, 6), (1, 0.45, 4), (3, 0.1, 5)] {
            let p = params(k, z);
            let e = derive_recurrence(&p, 1.1, 0.4, order).unwrap();
            let (t1, t2) = (1e-2, 4e-3);
            let slope = (careful_residual(&e, t1) / careful_residual(&e, t2)).ln() / (t1 / t2).ln();
            assert!(slope >= order as f64 - 1.0 - 0.2, "k={k} order={order} slope {slope}");
        }
    }

    #[test]
    fn homogeneous_v_modes() {
        // at zeta = 0 changing c only adds c tau^3 + higher
        let p = params(1, 0.0);
        let e0 = derive_recurrence(&p, 0.5, 0.0, 8).unwrap();
        let e1 = derive_recurrence(&p, 0.5, 1.0, 8).unwrap();
        assert!((e1.coeffs_v[3] - e0.coeffs_v[3] - 1.0).abs() < 1e-15);
        for n in 0..3 {
            assert_eq!(e1.coeffs_v[n], e0.coeffs_v[n]);
        }
        assert_eq!(e1.coeffs_u, e0.coeffs_u);
    }

    #[test]
    fn perturbing_a_moves_u_quadratically() {
        let p = params(1, 0.2);
        let ts = 1e-2;
        let d = 1e-3;
        let s0 = derive_recurrence(&p, 0.4, 0.1, 6).unwrap().series_state(ts, ts).unwrap();
        let s1 = derive_recurrence(&p, 0.4 + d, 0.1, 6).unwrap().series_state(ts, ts).unwrap();
        assert!(((s1.u - s0.u) - d * ts * ts).abs() < 10.0 * d * ts.powi(4));
    }

    #[test]
    fn series_rejects_outside_seed() {
        let e = derive_recurrence(&params(1, 0.0), 0.0, 0.0, 6).unwrap();
        assert!(matches!(e.series_state(0.02, 0.01), Err(TebeError::OutsideSeriesRange { .. })));
        assert!(e.series_state(0.0, 0.01).is_err());
        assert!(derive_recurrence(&params(1, 0.0), 0.0, 0.0, 11).is_err());
    }

    #[test]
    fn far_field_solves_ode_to_high_order() {
        for &(k, z) in &[(1, 0.0), (1, 0.3), (3, 0.45)] {
            let p = params(k, z);
            let m = FarFieldModel { u_inf: -0.4, v_inf: 0.7 };
            let tau = 6.0;
            let s = m.state(&p, tau);
            let h = 1e-3;
            let sp = m.state(&p, tau + h);
            let sm = m.state(&p, tau - h);
            let upp = (sp.du - sm.du) / (2.0 * h);
            let vpp = (sp.dv - sm.dv) / (2.0 * h);
            let (fu, fv) = second_derivs_tau(&p, tau, &s);
            let scale = (-4.0 * tau).exp() * 50.0;
            assert!((upp - fu).abs() < scale + 1e-9 * fu.abs(), "u k={k} z={z}");
            assert!((vpp - fv).abs() < scale + 1e-9 * fv.abs(), "v k={k} z={z}");
        }
    }

    #[test]
    fn far_field_untwisted_is_closed_form() {
        let p = params(2, 0.0);
        let s = FarFieldModel::untwisted(&p).state(&p, 8.0);
        let (u, du, _) = untwisted_u(3.0, 8.0);
        assert!((s.u - u).abs() < 1e-15 * 30.0);
        assert!((s.du - du).abs() < 1e-14);
    }

    #[test]
    fn farfield_residuals_trivial() {
        let p = params(2, 0.1);
        let (r1, r2) = farfield_residuals(&p, &State::new(1.0, 3.0, 0.2, 0.0), 15.0);
        assert_eq!((r1, r2), (0.0, 0.0));
    }
}
