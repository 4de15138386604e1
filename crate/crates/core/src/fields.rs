//! Geometric fields rebuilt from a radial profile: the ansatz metric, the
//! unitary-gauge connection and Higgs field, spherical components, the `N`
//! potential, and the moment-map residual.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TebeError};
use crate::interp::Radial;
use crate::jet::{jm1_map, jm1_mul, jm2_first, jm2_map, Jet1, Jet2, JM1, JM2};
use crate::params::ModelParams;

pub type M2 = Matrix2<C>;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Point in cylindrical coordinates: `r = |z|`, height `y`, phase of `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylPoint {
    pub r: f64,
    pub y: f64,
    pub theta_ang: f64,
}

impl CylPoint {
    pub fn new(r: f64, y: f64, theta_ang: f64) -> Result<Self> {
        if !(r > 0.0 && y > 0.0 && r.is_finite() && y.is_finite() && theta_ang.is_finite()) {
            return Err(TebeError::InvalidArgument(format!("point (r={r}, y={y}, theta={theta_ang}) off the open quadrant")));
        }
        Ok(Self {
            r,
            y,
            theta_ang: theta_ang.rem_euclid(TAU),
        })
    }

    /// `y = rho cos(psi)`, `r = rho sin(psi)`.
    pub fn from_spherical(rho: f64, psi: f64, theta_ang: f64) -> Result<Self> {
        if !(psi > 0.0 && psi < FRAC_PI_2) {
            return Err(TebeError::InvalidArgument(format!("psi {psi} outside (0, pi/2)")));
        }
        Self::new(rho * psi.sin(), rho * psi.cos(), theta_ang)
    }

    pub fn sigma(&self) -> f64 {
        self.y / self.r
    }

    pub fn rho(&self) -> f64 {
        self.r.hypot(self.y)
    }

    pub fn psi(&self) -> f64 {
        self.r.atan2(self.y)
    }

    pub fn z(&self) -> C {
        C::from_polar(self.r, self.theta_ang)
    }

    pub fn tau(&self) -> f64 {
        self.sigma().asinh()
    }
}

/// `Y`, `Sigma`, the metric `H` and its factor `g` with `H = g^dagger g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzFields {
    pub y: f64,
    pub sigma: C,
    pub h: M2,
    pub g: M2,
}

impl AnsatzFields {
    pub fn det_h(&self) -> C {
        self.h.determinant()
    }
}

/// Second-order jets of the ansatz at a point, in `(x1, x2, y)`.
#[derive(Debug, Clone, Copy)]
pub struct AnsatzJets {
    pub p: ModelParams,
    pub pt: CylPoint,
    pub y: Jet2,
    pub sigma: Jet2,
    pub z: Jet2,
}

pub fn ansatz_jets<R: Radial + ?Sized>(rad: &R, pt: CylPoint) -> Result<AnsatzJets> {
    let p = rad.params();
    let b = p.b();
    let (c, s) = (pt.theta_ang.cos(), pt.theta_ang.sin());
    let x1 = Jet2::variable(pt.r * c, 0);
    let x2 = Jet2::variable(pt.r * s, 1);
    let yv = Jet2::variable(pt.y, 2);
    let r = (x1 * x1 + x2 * x2).sqrt();
    let sig = yv * r.recip();
    let j = rad.jet_sigma(pt.sigma())?;
    if j.iter().any(|x| !x.is_finite()) {
        return Err(TebeError::NonFinite { context: "ansatz_jets", tau: pt.tau() });
    }
    let u = sig.compose(C::new(j[0], 0.0), C::new(j[1], 0.0), C::new(j[2], 0.0));
    let v = sig.compose(C::new(j[3], 0.0), C::new(j[4], 0.0), C::new(j[5], 0.0));
    let y = (r.ln().scale(C::new(b, 0.0)) + u).exp();
    let z = x1 + x2.scale(I);
    let sigma = (z.powi(p.k() + 1) * v).scale(C::new(p.beta().sin(), 0.0));
    Ok(AnsatzJets { p, pt, y, sigma, z })
}

impl AnsatzJets {
    /// `H = [[1/Y, -Sigma/Y], [-conj(Sigma)/Y, Y + |Sigma|^2/Y]]`.
    pub fn h(&self) -> JM2 {
        let yi = self.y.recip();
        let sb = self.sigma.conj();
        [[yi, -(self.sigma * yi)], [-(sb * yi), self.y + self.sigma * sb * yi]]
    }

    pub fn h_inv(&self) -> JM2 {
        let yi = self.y.recip();
        let sb = self.sigma.conj();
        [[self.y + self.sigma * sb * yi, self.sigma * yi], [sb * yi, yi]]
    }

    pub fn g(&self) -> JM2 {
        let s = self.y.sqrt().recip();
        [[s, -(s * self.sigma)], [Jet2::real(0.0), self.y.sqrt()]]
    }

    pub fn g_inv(&self) -> JM2 {
        let s = self.y.sqrt();
        [[s, self.sigma * s.recip()], [Jet2::real(0.0), s.recip()]]
    }

    pub fn fields(&self) -> AnsatzFields {
        AnsatzFields {
            y: self.y.v.re,
            sigma: self.sigma.v,
            h: value(&self.h()),
            g: value(&self.g()),
        }
    }

    fn zk(&self) -> Jet2 {
        self.z.powi(self.p.k())
    }

    /// Matrix moment map in holomorphic gauge at twist angle `beta`, with the
    /// metric held fixed. The twisted operator is `d_z - csc(beta) N_+`, the
    /// sign for which the entries reduce to the radial system.
    pub fn moment_map(&self, beta: f64) -> M2 {
        let (sb, cb) = beta.sin_cos();
        let h = self.h();
        let hi = jm2_first(&self.h_inv());
        let zk = self.zk();
        let nplus = m2_from([[ZERO, zk.v], [ZERO, ZERO]]);
        let nminus: JM1 = [[Jet1::constant(ZERO), Jet1::constant(ZERO)], [zk.conj().first(), Jet1::constant(ZERO)]];

        let hz = jm1_mul(&hi, &jm2_map(&h, |x| x.dz()));
        let hzb = jm1_mul(&hi, &jm2_map(&h, |x| x.dzbar()));
        let hy = jm1_mul(&hi, &jm2_map(&h, |x| x.d(2)));
        let conj_n = jm1_mul(&jm1_mul(&hi, &nminus), &jm2_first(&h));

        let t1 = m2_from(jm1_map(&hz, |x| x.dzbar()));
        let t2 = m2_from(jm1_map(&hzb, |x| x.dz()));
        let t3 = m2_from(jm1_map(&conj_n, |x| x.dz()));
        let hzb_v = m2_from(jm1_map(&hzb, |x| x.v));
        let conj_n_v = m2_from(jm1_map(&conj_n, |x| x.v));
        let t6 = m2_from(jm1_map(&hy, |x| x.d(2)));

        t1 * C::new(4.0 * cb * cb, 0.0) + t2 * C::new(4.0 * sb * sb, 0.0) + t3 * C::new(4.0 * sb, 0.0)
            - comm(&nplus, &hzb_v) * C::new(4.0 * sb, 0.0)
            - comm(&nplus, &conj_n_v) * C::new(4.0, 0.0)
            + t6
    }

    /// First derivatives `(d_z, d_zbar, d_y)` of `Y` and `Sigma`.
    fn first_derivs(&self) -> Derivs {
        Derivs {
            y: self.y.v.re,
            yz: self.y.dz().v,
            yy: self.y.d(2).v.re,
            sz: self.sigma.dz().v,
            szb: self.sigma.dzbar().v,
            sy: self.sigma.d(2).v,
            zk: self.zk().v,
        }
    }

    /// Unitary-gauge fields from `g` and its derivatives.
    pub fn unitary(&self) -> MatrixField {
        let p = self.p;
        let (sb, cb) = p.beta().sin_cos();
        let g = self.g();
        let gi = value(&self.g_inv());
        let dg = |f: &dyn Fn(&Jet2) -> C| m2_from(g.map(|r| r.map(|x| f(&x))));
        let gz = dg(&|x| x.dz().v);
        let gzb = dg(&|x| x.dzbar().v);
        let gy = dg(&|x| x.d(2).v);
        let nt = value(&g) * m2_from([[ZERO, self.zk().v], [ZERO, ZERO]]) * gi;

        let d1 = -(gzb * gi);
        let d2 = -(gz * gi);
        let d3 = -(gy * gi);
        let d1a = -d1.adjoint();
        let d2a = -d2.adjoint();
        let d3a = -d3.adjoint();
        let r = |x: f64| C::new(x, 0.0);

        let a_z = d1a * r(cb * cb) + d2 * r(sb * sb) - nt * r(sb);
        let a_zbar = d1 * r(cb * cb) + d2a * r(sb * sb) + nt.adjoint() * r(sb);
        let phi_z = (d2 - d1a) * r(sb * cb) - nt * r(cb);
        let phi_zbar = (d2a - d1) * r(sb * cb) + nt.adjoint() * r(cb);
        let a_y = (d3 + d3a) * r(0.5);
        let phi_1 = (d3 - d3a) * (I * r(0.5 * cb));
        MatrixField::assemble(p, self.pt, a_z, a_zbar, phi_z, phi_zbar, a_y, phi_1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Derivs {
    y: f64,
    yz: C,
    yy: f64,
    sz: C,
    szb: C,
    sy: C,
    zk: C,
}

/// Connection and Higgs components in unitary gauge at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixField {
    pub p: ModelParams,
    pub pt: CylPoint,
    pub a_z: M2,
    pub a_zbar: M2,
    pub phi_z: M2,
    pub phi_zbar: M2,
    pub a_y: M2,
    pub phi_1: M2,
    pub a_rho: M2,
    pub a_psi: M2,
    pub a_theta: M2,
    /// Scalar entries of the spherical components.
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl MatrixField {
    #[allow(clippy::too_many_arguments)]
    fn assemble(p: ModelParams, pt: CylPoint, a_z: M2, a_zbar: M2, phi_z: M2, phi_zbar: M2, a_y: M2, phi_1: M2) -> Self {
        let a1 = a_z + a_zbar;
        let a2 = (a_z - a_zbar) * I;
        let (st, ct) = pt.theta_ang.sin_cos();
        let psi = pt.psi();
        let (sp, cp) = psi.sin_cos();
        let rho = pt.rho();
        let r = |x: f64| C::new(x, 0.0);
        let a_rho = a1 * r(sp * ct) + a2 * r(sp * st) + a_y * r(cp);
        let a_psi = (a1 * r(cp * ct) + a2 * r(cp * st) - a_y * r(sp)) * r(rho);
        let a_theta = (a2 * r(ct) - a1 * r(st)) * r(pt.r);

        let a = a_rho[(0, 1)];
        let b = a_psi[(0, 1)] / r(rho);
        let c = a_theta[(0, 0)] / r(pt.r);
        let d = a_theta[(0, 1)] / r(pt.r);
        Self {
            p,
            pt,
            a_z,
            a_zbar,
            phi_z,
            phi_zbar,
            a_y,
            phi_1,
            a_rho,
            a_psi,
            a_theta,
            a,
            b,
            c,
            d,
        }
    }

    /// `rho A_rho`, independent of `rho`.
    pub fn a_rho_hat(&self) -> M2 {
        self.a_rho * C::new(self.pt.rho(), 0.0)
    }

    /// `diag(i b, -i b)/2 + A_theta`: the action of `D_theta` on symmetric sections.
    pub fn a_theta_hat(&self) -> M2 {
        let hb = 0.5 * self.p.b();
        self.a_theta + m2_from([[C::new(0.0, hb), ZERO], [ZERO, C::new(0.0, -hb)]])
    }

    pub fn phi_2(&self) -> M2 {
        self.phi_z + self.phi_zbar
    }

    pub fn phi_3(&self) -> M2 {
        (self.phi_z - self.phi_zbar) * I
    }

    /// `N s = rho^2 ( ad(phi_1)^2 / cos^2 beta - 2 (ad(phi_z) ad(phi_z^dagger) + ad(phi_z^dagger) ad(phi_z)) ) s`.
    pub fn n_apply(&self, s: &M2) -> M2 {
        let cb = self.p.cos_beta();
        let rho2 = self.pt.rho().powi(2);
        let pz = self.phi_z;
        let pza = pz.adjoint();
        let t1 = ad2(&self.phi_1, s) / C::new(cb * cb, 0.0);
        let t2 = comm(&pz, &comm(&pza, s)) + comm(&pza, &comm(&pz, s));
        (t1 - t2 * C::new(2.0, 0.0)) * C::new(rho2, 0.0)
    }

    /// Same operator from the Cartesian components `phi_2`, `phi_3`.
    pub fn n_apply_cartesian(&self, s: &M2) -> M2 {
        let cb = self.p.cos_beta();
        let rho2 = self.pt.rho().powi(2);
        (ad2(&self.phi_1, s) / C::new(cb * cb, 0.0) + ad2(&self.phi_2(), s) + ad2(&self.phi_3(), s)) * C::new(rho2, 0.0)
    }

    /// The displayed closed forms, for cross-checking the `g`-route.
    pub fn explicit(p: &ModelParams, jets: &AnsatzJets) -> (M2, M2, M2, M2) {
        let dv = jets.first_derivs();
        let (sb, cb) = p.beta().sin_cos();
        let yi = 1.0 / dv.y;
        let r = |x: f64| C::new(x, 0.0);
        let lz = dv.yz * r(yi);
        let sbz = dv.szb.conj(); // d_z conj(Sigma)
        // sin^2(beta) csc(beta) = sin(beta)
        let a_z = m2_from([[lz, dv.sz * r(2.0 * yi)], [ZERO, -lz]]) * r(0.5 * sb * sb)
            - m2_from([[ZERO, dv.zk * r(yi)], [ZERO, ZERO]]) * r(sb)
            - m2_from([[lz, ZERO], [sbz * r(2.0 * yi), -lz]]) * r(0.5 * cb * cb);
        let phi_z = m2_from([[lz, dv.sz * r(yi)], [sbz * r(yi), -lz]]) * r(sb * cb) - m2_from([[ZERO, dv.zk * r(yi)], [ZERO, ZERO]]) * r(cb);
        let ly = r(dv.yy * yi);
        let sby = dv.sy.conj();
        let a_y = m2_from([[ZERO, dv.sy * r(yi)], [-sby * r(yi), ZERO]]) * r(0.5);
        let phi_1 = m2_from([[ly, dv.sy * r(yi)], [sby * r(yi), -ly]]) * (I * r(0.5 * cb));
        (a_z, phi_z, a_y, phi_1)
    }
}

pub fn m2_from(a: [[C; 2]; 2]) -> M2 {
    M2::new(a[0][0], a[0][1], a[1][0], a[1][1])
}

fn value(a: &JM2) -> M2 {
    m2_from(a.map(|r| r.map(|x| x.v)))
}

pub fn comm(a: &M2, b: &M2) -> M2 {
    a * b - b * a
}

pub fn ad2(a: &M2, s: &M2) -> M2 {
    comm(a, &comm(a, s))
}

pub fn ansatz_fields<R: Radial + ?Sized>(rad: &R, pt: CylPoint) -> Result<AnsatzFields> {
    Ok(ansatz_jets(rad, pt)?.fields())
}

pub fn unitary_fields<R: Radial + ?Sized>(rad: &R, pt: CylPoint) -> Result<MatrixField> {
    let f = ansatz_jets(rad, pt)?.unitary();
    let finite = [f.a_z, f.phi_z, f.a_y, f.phi_1].iter().all(|m| m.iter().all(|x| x.re.is_finite() && x.im.is_finite()));
    if !finite {
        return Err(TebeError::NonFinite { context: "unitary_fields", tau: pt.tau() });
    }
    Ok(f)
}

/// Pointwise residual of the two scalar field equations: the `(1,1)` and
/// `(2,1)` entries of the moment map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    pub pt: CylPoint,
    pub res1: C,
    pub res2: C,
    /// Largest entry of the full matrix.
    pub sup: f64,
}

pub fn pde_residual<R: Radial + ?Sized>(rad: &R, grid: &[CylPoint]) -> Result<Vec<PdeResidual>> {
    let beta = rad.params().beta();
    grid.iter()
        .map(|&pt| {
            let m = ansatz_jets(rad, pt)?.moment_map(beta);
            Ok(PdeResidual {
                pt,
                res1: m[(0, 0)],
                res2: m[(1, 0)],
                sup: m.iter().fold(0.0_f64, |a, x| a.max(x.norm())),
            })
        })
        .collect()
}

/// Moment map with every derivative of `H` replaced by a central difference
/// of step `h`; an independent check of the jet route.
pub fn moment_map_fd<R: Radial + ?Sized>(rad: &R, pt: CylPoint, beta: f64, h: f64) -> Result<M2> {
    let (sb, cb) = beta.sin_cos();
    let k = rad.params().k();
    let x0 = [pt.r * pt.theta_ang.cos(), pt.r * pt.theta_ang.sin(), pt.y];
    let at = |x: [f64; 3]| -> Result<CylPoint> { CylPoint::new(x[0].hypot(x[1]), x[2], x[1].atan2(x[0])) };
    let hmat = |x: [f64; 3]| -> Result<M2> { Ok(ansatz_fields(rad, at(x)?)?.h) };
    let shift = |x: [f64; 3], i: usize, d: f64| {
        let mut y = x;
        y[i] += d;
        y
    };
    let partial = |f: &dyn Fn([f64; 3]) -> Result<M2>, x: [f64; 3], i: usize| -> Result<M2> {
        Ok((f(shift(x, i, h))? - f(shift(x, i, -h))?) / C::new(2.0 * h, 0.0))
    };
    let wz = |f: &dyn Fn([f64; 3]) -> Result<M2>, x: [f64; 3], s: f64| -> Result<M2> {
        Ok((partial(f, x, 0)? + partial(f, x, 1)? * C::new(0.0, s)) * C::new(0.5, 0.0))
    };
    let zk = |x: [f64; 3]| C::new(x[0], x[1]).powu(k);
    let nplus = |x: [f64; 3]| m2_from([[ZERO, zk(x)], [ZERO, ZERO]]);
    let nminus = |x: [f64; 3]| m2_from([[ZERO, ZERO], [zk(x).conj(), ZERO]]);
    let inv = |m: M2| m.try_inverse().ok_or(TebeError::SingularJacobian { cond: f64::INFINITY });
    let p_z = |x: [f64; 3]| -> Result<M2> { Ok(inv(hmat(x)?)? * wz(&hmat, x, -1.0)?) };
    let p_zb = |x: [f64; 3]| -> Result<M2> { Ok(inv(hmat(x)?)? * wz(&hmat, x, 1.0)?) };
    let p_y = |x: [f64; 3]| -> Result<M2> { Ok(inv(hmat(x)?)? * partial(&hmat, x, 2)?) };
    let q = |x: [f64; 3]| -> Result<M2> {
        let hx = hmat(x)?;
        Ok(inv(hx)? * nminus(x) * hx)
    };
    let r = |v: f64| C::new(v, 0.0);
    Ok(wz(&p_z, x0, 1.0)? * r(4.0 * cb * cb) + wz(&p_zb, x0, -1.0)? * r(4.0 * sb * sb) + wz(&q, x0, -1.0)? * r(4.0 * sb)
        - comm(&nplus(x0), &p_zb(x0)?) * r(4.0 * sb)
        - comm(&nplus(x0), &q(x0)?) * r(4.0)
        + partial(&p_y, x0, 2)?)
}

/// Tensor grid `n x n` over `[lo, hi]^2` in `(r, y)` at phase `theta`.
pub fn square_grid(lo: f64, hi: f64, n: usize, theta: f64) -> Result<Vec<CylPoint>> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(CylPoint::new(lo + step * i as f64, lo + step * j as f64, theta)?);
        }
    }
    Ok(out)
}

/// Outcome of checking the symmetric form of the cross-twist error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorForm {
    pub ok: bool,
    pub deviation: f64,
    /// Largest entry of the error at unit radius.
    pub magnitude: f64,
    pub psi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

pub const ERROR_FORM_TOL: f64 = 1e-8;

/// Unitary-gauge moment-map error at `beta(zeta1)` along `rad`, rescaled by
/// `rho^2`, split into `(gamma, delta)` at phase zero.
pub fn error_matrix<R: Radial + ?Sized>(rad: &R, beta1: f64, pt: CylPoint) -> Result<M2> {
    let jets = ansatz_jets(rad, pt)?;
    let m = jets.moment_map(beta1);
    let f = jets.fields();
    let gi = f.g.try_inverse().ok_or(TebeError::SingularJacobian { cond: f64::INFINITY })?;
    Ok(f.g * m * gi * C::new(pt.rho().powi(2), 0.0))
}

pub fn error_form_check<R: Radial + ?Sized>(rad: &R, zeta1: f64) -> Result<ErrorForm> {
    let p1 = rad.params().with_zeta(zeta1)?;
    let beta1 = p1.beta();
    let b = rad.params().b();
    let psis: Vec<f64> = (1..=12).map(|i| 0.1 + 1.3 * i as f64 / 13.0).collect();
    let thetas = [std::f64::consts::FRAC_PI_3, 1.0, 2.5, 4.0];
    let rhos = [0.5, 2.0];
    let mut dev = 0.0_f64;
    let mut mag = 0.0_f64;
    let (mut gamma, mut delta) = (Vec::new(), Vec::new());
    for &psi in &psis {
        let e0 = error_matrix(rad, beta1, CylPoint::from_spherical(1.0, psi, 0.0)?)?;
        mag = mag.max(e0.iter().fold(0.0, |a, x| a.max(x.norm())));
        // real symmetric traceless at zero phase
        dev = dev
            .max((e0[(0, 0)] + e0[(1, 1)]).norm())
            .max((e0[(0, 1)] - e0[(1, 0)]).norm())
            .max(e0[(0, 0)].im.abs())
            .max(e0[(0, 1)].im.abs());
        gamma.push(e0[(0, 0)].re);
        delta.push(e0[(0, 1)].re);
        for &th in &thetas {
            let et = error_matrix(rad, beta1, CylPoint::from_spherical(1.0, psi, th)?)?;
            let rot = phase(b, th);
            dev = dev.max((et - rot * e0 * rot.adjoint()).iter().fold(0.0, |a, x| a.max(x.norm())));
        }
        for &rho in &rhos {
            let er = error_matrix(rad, beta1, CylPoint::from_spherical(rho, psi, 0.0)?)?;
            dev = dev.max((er - e0).iter().fold(0.0, |a, x| a.max(x.norm())));
        }
    }
    Ok(ErrorForm {
        ok: dev < ERROR_FORM_TOL,
        deviation: dev,
        magnitude: mag,
        psi: psis,
        gamma,
        delta,
    })
}

/// `diag(e^{i b theta/2}, e^{-i b theta/2})`.
pub fn phase(b: f64, theta: f64) -> M2 {
    let e = C::from_polar(1.0, 0.5 * b * theta);
    m2_from([[e, ZERO], [ZERO, e.conj()]])
}

/// `s^U` at phase `theta` from `(gamma, delta)`.
pub fn section(b: f64, gamma: f64, delta: f64, theta: f64) -> M2 {
    let e = C::from_polar(1.0, b * theta);
    m2_from([[C::new(gamma, 0.0), e * delta], [e.conj() * delta, C::new(-gamma, 0.0)]])
}

pub fn max_abs(m: &M2) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}

pub fn identity() -> M2 {
    m2_from([[ONE, ZERO], [ZERO, ONE]])
}
