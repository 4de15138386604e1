//! The reduced two-function ODE, in `tau` (integration variable) and in
//! `sigma = sinh(tau)` (the form the field equations are written in).

use crate::error::{Result, TebeError};
use crate::params::{ModelParams, State};

/// `(u'', v'')` in `tau`.
pub fn second_derivs_tau(p: &ModelParams, tau: f64, s: &State) -> (f64, f64) {
    let z2 = p.zeta() * p.zeta();
    let b = p.b();
    let tt = tau.tanh();
    let vv = 1.0 - z2 * b * s.v;
    let e = (-2.0 * s.u).exp();
    let upp = -e * (4.0 * vv * vv + z2 * s.dv * s.dv + 4.0 * z2 * vv * s.dv * tt);
    let vpp = s.du * (2.0 * s.dv + 4.0 * vv * tt) - 4.0 * b * vv;
    (upp, vpp)
}

/// Derivative of the state in `tau`, packed as `(u', u'', v', v'')`.
pub fn rhs_tau(p: &ModelParams, tau: f64, s: &State) -> Result<State> {
    let (upp, vpp) = second_derivs_tau(p, tau, s);
    let d = State::new(s.du, upp, s.dv, vpp);
    if !d.is_finite() {
        return Err(TebeError::NonFinite { context: "rhs_tau", tau });
    }
    Ok(d)
}

/// Derivative in `sigma` of a state whose derivative slots hold `u_s, v_s`.
pub fn rhs_sigma(p: &ModelParams, sigma: f64, s: &State) -> Result<State> {
    let (uss, vss) = second_derivs_sigma(p, sigma, s.u, s.du, s.v, s.dv);
    let d = State::new(s.du, uss, s.dv, vss);
    if !d.is_finite() {
        return Err(TebeError::NonFinite { context: "rhs_sigma", tau: sigma.asinh() });
    }
    Ok(d)
}

/// Unchecked first-order system for the integrator.
pub fn rhs(p: &ModelParams, tau: f64, y: &[f64; 4]) -> [f64; 4] {
    let s = State::from_array(*y);
    let (upp, vpp) = second_derivs_tau(p, tau, &s);
    [s.du, upp, s.dv, vpp]
}

/// System for `y = (w, w', v, v')` with `u = log(2 tau) + w`; keeps the
/// error control meaningful where `u'` is of size `1/tau`.
pub fn rhs_shifted(p: &ModelParams, tau: f64, y: &[f64; 4]) -> [f64; 4] {
    let z2 = p.zeta() * p.zeta();
    let b = p.b();
    let [w, dw, v, dv] = *y;
    let tt = tau.tanh();
    let vm1 = -z2 * b * v;
    let vv = 1.0 + vm1;
    // Q/4 - 1, Q = 4 V^2 + zeta^2 v'^2 + 4 zeta^2 V v' T
    let q4m1 = vm1 * (2.0 + vm1) + 0.25 * z2 * dv * dv + z2 * vv * dv * tt;
    let wpp = -((-2.0 * w).exp_m1() * (1.0 + q4m1) + q4m1) / (tau * tau);
    let du = 1.0 / tau + dw;
    let vpp = du * (2.0 * dv + 4.0 * vv * tt) - 4.0 * b * vv;
    [dw, wpp, dv, vpp]
}

/// `(u_ss, v_ss)` from `(u, u_s, v, v_s)` with `s = sigma`.
pub fn second_derivs_sigma(p: &ModelParams, sigma: f64, u: f64, us: f64, v: f64, vs: f64) -> (f64, f64) {
    let z2 = p.zeta() * p.zeta();
    let c2 = 1.0 - z2;
    let b = p.b();
    let q = sigma * sigma + 1.0;
    let vv = 1.0 - z2 * b * v;
    let e = (-2.0 * u).exp();
    let lin = z2 * (2.0 * b * v - sigma * vs) - 2.0;
    let uss = -(sigma * us + e * (lin * lin + z2 * (c2 * sigma * sigma + 1.0) * vs * vs)) / q;
    let vss = -(sigma * vs + 4.0 * b * vv - (4.0 * sigma * vv + 2.0 * q * vs) * us) / q;
    (uss, vss)
}

/// Converts a `tau` state to `(u_s, v_s)` and second `sigma` derivatives
/// from the `tau` second derivatives.
pub fn tau_to_sigma(tau: f64, d1: f64, d2: f64) -> (f64, f64) {
    let ch = tau.cosh();
    let tt = tau.tanh();
    (d1 / ch, (d2 - tt * d1) / (ch * ch))
}

/// `u'^2 - (4 V^2 - zeta^2 v'^2) e^{-2u}`, conserved along the flow.
pub fn first_integral(p: &ModelParams, s: &State) -> f64 {
    let z2 = p.zeta() * p.zeta();
    let vv = 1.0 - z2 * p.b() * s.v;
    s.du * s.du - (4.0 * vv * vv - z2 * s.dv * s.dv) * (-2.0 * s.u).exp()
}

/// `u0(tau) = log(2 sinh(b tau) / b)`.
pub fn witten_u0(p: &ModelParams, tau: f64) -> f64 {
    untwisted_u(p.b(), tau).0
}

/// Untwisted profile `e^{u} = (2/b) sinh(b tau)`: returns `(u, u', u'')`.
pub fn untwisted_u(b: f64, tau: f64) -> (f64, f64, f64) {
    let bt = b * tau;
    let sh = bt.sinh();
    // log(sinh x) without overflow for large x
    let log_sh = if bt > 20.0 {
        bt - std::f64::consts::LN_2 + (-(2.0 * bt)).exp().ln_1p()
    } else {
        sh.ln()
    };
    let u = (2.0 / b).ln() + log_sh;
    let du = b / bt.tanh();
    let ddu = -b * b / (sh * sh);
    (u, du, ddu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: u32, z: f64) -> ModelParams {
        ModelParams::new(k, z).unwrap()
    }

    #[test]
    fn untwisted_closed_form_solves_u_equation() {
        for k in 1..=4 {
            let p = params(k, 0.0);
            let b = p.b();
            for &tau in &[0.05, 0.4, 1.3, 3.0, 8.0] {
                let (u, du, ddu) = untwisted_u(b, tau);
                let s = State::new(u, du, 0.0, 0.0);
                let (upp, _) = second_derivs_tau(&p, tau, &s);
                assert!((upp - ddu).abs() < 1e-12 * ddu.abs().max(1e-300) + 1e-13, "k={k} tau={tau}");
                assert!((first_integral(&p, &s) - b * b).abs() < 1e-10 * b * b);
            }
        }
    }

    #[test]
    fn large_tau_log_is_continuous() {
        let b = 2.0;
        let (a, _, _) = untwisted_u(b, 10.0 - 1e-9);
        let (c, _, _) = untwisted_u(b, 10.0 + 1e-9);
        assert!((a - c).abs() < 1e-8);
    }

    #[test]
    fn tau_and_sigma_forms_agree() {
        let cases = [
            (1, 0.0, 0.7, State::new(0.3, 1.7, 0.2, -0.4)),
            (2, 0.31, 1.9, State::new(-0.2, 2.1, 0.8, 0.3)),
            (3, 0.49, 0.15, State::new(-1.1, 5.0, 0.05, 1.2)),
        ];
        for (k, z, tau, s) in cases {
            let p = params(k, z);
            let (upp, vpp) = second_derivs_tau(&p, tau, &s);
            let (us, uss) = tau_to_sigma(tau, s.du, upp);
            let (vs, vss) = tau_to_sigma(tau, s.dv, vpp);
            let (uss2, vss2) = second_derivs_sigma(&p, tau.sinh(), s.u, us, s.v, vs);
            assert!((uss - uss2).abs() < 1e-12 * (1.0 + uss.abs()), "u: {uss} vs {uss2}");
            assert!((vss - vss2).abs() < 1e-12 * (1.0 + vss.abs()), "v: {vss} vs {vss2}");
        }
    }

    #[test]
    fn shifted_system_matches() {
        let p = params(2, 0.35);
        let tau: f64 = 0.3;
        let y = [0.12, 0.5, 0.4, 1.3];
        let s = State::new((2.0 * tau).ln() + y[0], 1.0 / tau + y[1], y[2], y[3]);
        let (upp, vpp) = second_derivs_tau(&p, tau, &s);
        let f = rhs_shifted(&p, tau, &y);
        assert!((f[1] - (upp + 1.0 / (tau * tau))).abs() < 1e-12);
        assert!((f[3] - vpp).abs() < 1e-12);
    }

    #[test]
    fn untwisted_reference_point() {
        let p = params(1, 0.0);
        let s = State::new(2.0_f64.sinh().ln(), 2.0 / 2.0_f64.tanh(), 0.0, 0.0);
        let d = rhs_tau(&p, 1.0, &s).unwrap();
        let sh = 2.0_f64.sinh();
        assert!((d.du + 4.0 / (sh * sh)).abs() < 1e-13);
        assert!((d.dv - (8.0 / 2.0_f64.tanh() * 1.0_f64.tanh() - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn zero_v_gives_unit_v() {
        // with v = 0 the twist only enters through v'
        let p = params(1, 0.3);
        let s = State::new(0.4, 1.2, 0.0, 0.0);
        let (upp, vpp) = second_derivs_tau(&p, 0.8, &s);
        let e = (-0.8_f64).exp();
        assert!((upp + 4.0 * e).abs() < 1e-15);
        assert!((vpp - (1.2 * 4.0 * 0.8_f64.tanh() - 8.0)).abs() < 1e-14);
    }

    #[test]
    fn untwisted_v_equation_ignores_v() {
        let p = params(2, 0.0);
        let a = second_derivs_tau(&p, 0.5, &State::new(0.1, 2.0, 0.0, 0.3));
        let b = second_derivs_tau(&p, 0.5, &State::new(0.1, 2.0, 7.0, 0.3));
        assert_eq!(a, b);
    }

    #[test]
    fn overflow_reported() {
        let p = params(1, 0.2);
        let s = State::new(-400.0, 1.0, 0.0, 0.0);
        assert!(matches!(rhs_tau(&p, 1.0, &s), Err(TebeError::NonFinite { .. })));
    }

    #[test]
    fn rhs_layout() {
        let p = params(1, 0.2);
        let y = [0.1, 0.2, 0.3, 0.4];
        let f = rhs(&p, 0.5, &y);
        assert_eq!(f[0], 0.2);
        assert_eq!(f[2], 0.4);
    }
}
