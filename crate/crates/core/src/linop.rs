//! The reduced linearized operator on symmetric sections `(gamma, delta)(psi)`.
//!
//! Sections are stacked as `[gamma_1, delta_1, gamma_2, delta_2, ...]` on the
//! interior nodes; both ends carry zero Dirichlet data.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TebeError};
use crate::fields::{ad2, comm, section, unitary_fields, CylPoint, MatrixField, M2};
use crate::interp::Radial;

pub type Block = Matrix2<f64>;

pub const DEFAULT_MARGIN: f64 = 1e-3;
pub const DEFAULT_CLUSTER: f64 = 2.0;
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Grid on `[margin, pi/2 - margin]`, endpoints included, clustered toward
/// both ends by `tanh` stretching (`cluster = 0` is uniform).
pub fn psi_grid(n_interior: usize, margin: f64, cluster: f64) -> Result<Vec<f64>> {
    if n_interior < 3 {
        return Err(TebeError::InvalidArgument(format!("need at least 3 interior nodes, got {n_interior}")));
    }
    if !(margin > 0.0 && margin < 0.25) {
        return Err(TebeError::InvalidArgument(format!("margin {margin} outside (0, 0.25)")));
    }
    let (lo, hi) = (margin, FRAC_PI_2 - margin);
    let m = n_interior + 1;
    Ok((0..=m)
        .map(|i| {
            let s = i as f64 / m as f64;
            let t = if cluster > 0.0 {
                0.5 * (1.0 + (cluster * (2.0 * s - 1.0)).tanh() / cluster.tanh())
            } else {
                s
            };
            lo + (hi - lo) * t
        })
        .collect())
}

/// Real 2x2 matrix of a linear map on symmetric sections at phase zero,
/// together with how far the image leaves the symmetric form (relative).
pub fn represent(b: f64, f: impl Fn(&M2) -> M2) -> (Block, f64) {
    let mut m = Block::zeros();
    let mut viol = 0.0_f64;
    for (j, s) in [section(b, 1.0, 0.0, 0.0), section(b, 0.0, 1.0, 0.0)].iter().enumerate() {
        let x = f(s);
        let scale = 1.0_f64.max(x.iter().fold(0.0, |a, z| a.max(z.norm())));
        let dev = (x[(0, 0)] + x[(1, 1)])
            .norm()
            .max((x[(0, 1)] - x[(1, 0)]).norm())
            .max(x[(0, 0)].im.abs())
            .max(x[(0, 1)].im.abs());
        viol = viol.max(dev / scale);
        m[(0, j)] = x[(0, 0)].re;
        m[(1, j)] = x[(0, 1)].re;
    }
    (m, viol)
}

/// Pointwise coefficients of the operator at `(rho, theta) = (1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub psi: f64,
    /// `ad(A_psi)`
    pub conn: Block,
    pub n: Block,
    /// `ad(rho A_rho)^2`
    pub radial2: Block,
    /// `ad(rho A_rho)`, antisymmetric
    pub radial1: Block,
    /// `ad(A_theta_hat)^2 / sin^2 psi`
    pub angular: Block,
    pub violation: f64,
}

impl Coefficients {
    pub fn potential(&self) -> Block {
        self.n + self.radial2 + self.radial1 + self.angular
    }
}

pub fn coefficients<R: Radial + ?Sized>(rad: &R, psi: f64) -> Result<(Coefficients, MatrixField)> {
    let f = unitary_fields(rad, CylPoint::from_spherical(1.0, psi, 0.0)?)?;
    let b = rad.params().b();
    let ar = f.a_rho_hat();
    let at = f.a_theta_hat();
    let s2 = psi.sin().powi(2);
    let (conn, v1) = represent(b, |s| comm(&f.a_psi, s));
    let (n, v2) = represent(b, |s| f.n_apply(s));
    let (radial2, v3) = represent(b, |s| ad2(&ar, s));
    let (radial1, v4) = represent(b, |s| comm(&ar, s));
    let (angular, v5) = represent(b, |s| ad2(&at, s) / num_complex::Complex64::new(s2, 0.0));
    let violation = v1.max(v2).max(v3).max(v4).max(v5);
    Ok((
        Coefficients {
            psi,
            conn,
            n,
            radial2,
            radial1,
            angular,
            violation,
        },
        f,
    ))
}

/// Block-tridiagonal discretization of the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    /// Full grid, both Dirichlet endpoints included.
    pub grid: Vec<f64>,
    /// `sin(psi_i)` times the dual cell width, per interior node.
    pub weights: Vec<f64>,
    pub diag: Vec<Block>,
    /// Coupling of node `i` to `i - 1` (first entry unused).
    pub lower: Vec<Block>,
    /// Coupling of node `i` to `i + 1` (last entry unused).
    pub upper: Vec<Block>,
    pub boundary: String,
    pub max_violation: f64,
    terms: Option<Terms>,
}

/// Per-node and per-edge data for the quadratic-form decomposition.
#[derive(Debug, Clone, PartialEq)]
struct Terms {
    edge_conn: Vec<Block>,
    edge_weight: Vec<f64>,
    b: f64,
    /// `phi_1 / cos(beta)`, `phi_2`, `phi_3`, `rho A_rho`, `A_theta_hat / sin(psi)`
    fields: Vec<[M2; 5]>,
}

fn ad_block(b: f64, a: &M2) -> (Block, f64) {
    represent(b, |s| comm(a, s))
}

/// Assembles the operator on `grid` (endpoints are the Dirichlet nodes).
pub fn assemble_phi<R: Radial + ?Sized>(rad: &R, grid: &[f64]) -> Result<DiscreteOperator> {
    let p = rad.params();
    let b = p.b();
    let cb = p.cos_beta();
    let m = grid.len();
    if m < 5 || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 || grid[m - 1] >= FRAC_PI_2 {
        return Err(TebeError::InvalidArgument("psi grid must be increasing inside (0, pi/2)".into()));
    }
    let n = m - 2;
    let mut viol = 0.0_f64;

    // edges j: between grid[j] and grid[j + 1]
    let mut edge_conn = Vec::with_capacity(m - 1);
    let mut edge_weight = Vec::with_capacity(m - 1);
    for j in 0..m - 1 {
        let h = grid[j + 1] - grid[j];
        let mid = 0.5 * (grid[j] + grid[j + 1]);
        let f = unitary_fields(rad, CylPoint::from_spherical(1.0, mid, 0.0)?)?;
        let (a, v) = ad_block(b, &f.a_psi);
        viol = viol.max(v);
        edge_conn.push(a);
        edge_weight.push(mid.sin() / h);
    }

    let mut weights = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    let mut fields = Vec::with_capacity(n);
    for i in 1..=n {
        let psi = grid[i];
        let (c, f) = coefficients(rad, psi)?;
        viol = viol.max(c.violation);
        weights.push(psi.sin() * 0.5 * (grid[i + 1] - grid[i - 1]));
        diag.push(c.potential());
        let c = |x: f64| num_complex::Complex64::new(x, 0.0);
        fields.push([f.phi_1 / c(cb), f.phi_2(), f.phi_3(), f.a_rho_hat(), f.a_theta_hat() / c(psi.sin())]);
    }
    if viol > STRUCTURE_TOL {
        return Err(TebeError::StructureViolation {
            psi: f64::NAN,
            deviation: viol,
        });
    }

    // -W^{-1} G^T S G with (G s)_e = (s_{j+1} - s_j) + (h/2) a_e (s_{j+1} + s_j),
    // S_e = sin(mid)/h folded so that G carries no 1/h.
    let id = Block::identity();
    let mut lower = vec![Block::zeros(); n];
    let mut upper = vec![Block::zeros(); n];
    for j in 0..m - 1 {
        let h = grid[j + 1] - grid[j];
        let kp = id + edge_conn[j] * (0.5 * h); // d(Gs)_e / d s_{j+1}
        let km = -id + edge_conn[j] * (0.5 * h); // d(Gs)_e / d s_j
        let w = edge_weight[j];
        // node j (interior index j - 1) and node j + 1 (interior index j)
        let left = j.checked_sub(1).filter(|&l| l < n);
        let right = if j < n { Some(j) } else { None };
        if let Some(l) = left {
            diag[l] -= km.transpose() * km * w / weights[l];
            if right.is_some() {
                upper[l] -= km.transpose() * kp * w / weights[l];
            }
        }
        if let Some(r) = right {
            diag[r] -= kp.transpose() * kp * w / weights[r];
            if left.is_some() {
                lower[r] -= kp.transpose() * km * w / weights[r];
            }
        }
    }
    Ok(DiscreteOperator {
        grid: grid.to_vec(),
        weights,
        diag,
        lower,
        upper,
        boundary: "dirichlet".into(),
        max_violation: viol,
        terms: Some(Terms {
            edge_conn,
            edge_weight,
            b,
            fields,
        }),
    })
}

/// Stacked section vector from per-node `(gamma, delta)`.
pub fn stack(gamma: &[f64], delta: &[f64]) -> Vec<f64> {
    gamma.iter().zip(delta).flat_map(|(g, d)| [*g, *d]).collect()
}

fn node(x: &[f64], i: usize) -> Vector2<f64> {
    Vector2::new(x[2 * i], x[2 * i + 1])
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn interior(&self) -> &[f64] {
        &self.grid[1..self.grid.len() - 1]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            let mut y = self.diag[i] * node(x, i);
            if i > 0 {
                y += self.lower[i] * node(x, i - 1);
            }
            if i + 1 < n {
                y += self.upper[i] * node(x, i + 1);
            }
            out[2 * i] = y[0];
            out[2 * i + 1] = y[1];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            m.fixed_view_mut::<2, 2>(2 * i, 2 * i).copy_from(&self.diag[i]);
            if i > 0 {
                m.fixed_view_mut::<2, 2>(2 * i, 2 * i - 2).copy_from(&self.lower[i]);
            }
            if i + 1 < n {
                m.fixed_view_mut::<2, 2>(2 * i, 2 * i + 2).copy_from(&self.upper[i]);
            }
        }
        m
    }

    /// `W Phi`, the matrix of the bilinear form.
    pub fn weighted_dense(&self) -> DMatrix<f64> {
        let mut m = self.to_dense();
        for (r, mut row) in m.row_iter_mut().enumerate() {
            row *= self.weights[r / 2];
        }
        m
    }

    /// `|W Phi - (W Phi)^T| / |W Phi|` in the Frobenius norm.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.weighted_dense();
        (&m - m.transpose()).norm() / m.norm()
    }

    /// Same, with the antisymmetric `ad(rho A_rho)` term removed.
    pub fn symmetry_defect_without_radial1<R: Radial + ?Sized>(&self, rad: &R) -> Result<f64> {
        let mut m = self.weighted_dense();
        for (i, &psi) in self.interior().iter().enumerate() {
            let (c, _) = coefficients(rad, psi)?;
            let mut blk = m.fixed_view_mut::<2, 2>(2 * i, 2 * i);
            blk -= c.radial1 * self.weights[i];
        }
        Ok((&m - m.transpose()).norm() / m.norm())
    }

    /// `<s, Phi s>` in the weighted inner product.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.apply(x);
        (0..self.n()).map(|i| self.weights[i] * node(x, i).dot(&node(&y, i))).sum()
    }

    /// The six nonnegative terms whose negated sum is the quadratic form:
    /// covariant gradient, three Higgs commutators, radial and angular.
    pub fn six_terms(&self, x: &[f64]) -> Result<[f64; 6]> {
        let t = self.terms.as_ref().ok_or_else(|| TebeError::InvalidArgument("operator without field data".into()))?;
        let n = self.n();
        let s = |i: isize| -> Vector2<f64> {
            if i < 0 || i as usize >= n {
                Vector2::zeros()
            } else {
                node(x, i as usize)
            }
        };
        let mut out = [0.0; 6];
        for j in 0..self.grid.len() - 1 {
            let h = self.grid[j + 1] - self.grid[j];
            let (a, b) = (s(j as isize - 1), s(j as isize));
            let g = (b - a) + t.edge_conn[j] * (a + b) * (0.5 * h);
            out[0] += t.edge_weight[j] * g.norm_squared();
        }
        for i in 0..n {
            let w = self.weights[i];
            let si = section(t.b, x[2 * i], x[2 * i + 1], 0.0);
            // commutators can leave the symmetric form, so take full norms
            for (k, a) in t.fields[i].iter().enumerate() {
                out[1 + k] += 0.5 * w * comm(a, &si).norm_squared();
            }
        }
        Ok(out)
    }

    fn solve_blocks(diag: &[Block], lower: &[Block], upper: &[Block], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = diag.len();
        let mut cp = vec![Block::zeros(); n];
        let mut dp = vec![Vector2::zeros(); n];
        let inv = |m: Block| m.try_inverse().ok_or(TebeError::SingularJacobian { cond: f64::INFINITY });
        for i in 0..n {
            let (m, d) = if i == 0 {
                (diag[0], node(rhs, 0))
            } else {
                (diag[i] - lower[i] * cp[i - 1], node(rhs, i) - lower[i] * dp[i - 1])
            };
            let mi = inv(m)?;
            if i + 1 < n {
                cp[i] = mi * upper[i];
            }
            dp[i] = mi * d;
        }
        let mut x = vec![0.0; 2 * n];
        let mut next = Vector2::zeros();
        for i in (0..n).rev() {
            let xi = if i + 1 < n { dp[i] - cp[i] * next } else { dp[i] };
            x[2 * i] = xi[0];
            x[2 * i + 1] = xi[1];
            next = xi;
        }
        Ok(x)
    }

    /// Solves `Phi x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Self::solve_blocks(&self.diag, &self.lower, &self.upper, rhs)
    }

    /// Solves `Phi^T x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let diag: Vec<Block> = self.diag.iter().map(|b| b.transpose()).collect();
        let mut lower = vec![Block::zeros(); n];
        let mut upper = vec![Block::zeros(); n];
        for i in 0..n {
            if i > 0 {
                lower[i] = self.upper[i - 1].transpose();
            }
            if i + 1 < n {
                upper[i] = self.lower[i + 1].transpose();
            }
        }
        Self::solve_blocks(&diag, &lower, &upper, rhs)
    }

    /// The `count` smallest singular values of `Phi` as an operator on the
    /// weighted space, by inverse subspace iteration.
    pub fn smallest_singular_values(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        use rand::{RngExt, SeedableRng};
        let dim = 2 * self.n();
        let count = count.clamp(1, dim);
        let sw: Vec<f64> = self.weights.iter().flat_map(|w| [w.sqrt(), w.sqrt()]).collect();
        // A = W^{1/2} Phi W^{-1/2}
        let a_inv = |x: &[f64]| -> Result<Vec<f64>> {
            let y: Vec<f64> = x.iter().zip(&sw).map(|(v, s)| v / s).collect();
            Ok(self.solve(&y)?.iter().zip(&sw).map(|(v, s)| v * s).collect())
        };
        let a_inv_t = |x: &[f64]| -> Result<Vec<f64>> {
            let y: Vec<f64> = x.iter().zip(&sw).map(|(v, s)| v * s).collect();
            Ok(self.solve_transpose(&y)?.iter().zip(&sw).map(|(v, s)| v / s).collect())
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::from_fn(dim, count, |_, _| rng.random::<f64>() - 0.5);
        let mut prev = vec![0.0; count];
        for _ in 0..500 {
            x = x.qr().q();
            let mut z = DMatrix::zeros(dim, count);
            for c in 0..count {
                let col: Vec<f64> = x.column(c).iter().copied().collect();
                z.set_column(c, &DVector::from_vec(a_inv(&col)?));
            }
            let sv = z.clone().svd(false, false).singular_values;
            let cur: Vec<f64> = sv.iter().map(|s| 1.0 / s).collect();
            let done = cur.iter().zip(&prev).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs());
            prev = cur;
            if done {
                break;
            }
            for c in 0..count {
                let col: Vec<f64> = z.column(c).iter().copied().collect();
                x.set_column(c, &DVector::from_vec(a_inv_t(&col)?));
            }
        }
        let mut out = prev;
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    pub fn smallest_singular_value(&self) -> Result<f64> {
        Ok(self.smallest_singular_values(1, 7)?[0])
    }
}

/// Smallest singular value at margin `eps` and at `eps / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSensitivity {
    pub margin: f64,
    pub sigma_min: f64,
    pub sigma_min_half: f64,
    pub relative_change: f64,
}

pub fn margin_sensitivity<R: Radial + ?Sized>(rad: &R, n: usize, margin: f64) -> Result<MarginSensitivity> {
    let a = assemble_phi(rad, &psi_grid(n, margin, DEFAULT_CLUSTER)?)?.smallest_singular_value()?;
    let b = assemble_phi(rad, &psi_grid(n, 0.5 * margin, DEFAULT_CLUSTER)?)?.smallest_singular_value()?;
    Ok(MarginSensitivity {
        margin,
        sigma_min: a,
        sigma_min_half: b,
        relative_change: (b - a).abs() / a,
    })
}

/// Indicial roots at both singular ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicialRoots {
    pub omega_end: Vec<i64>,
    pub psi_end: Vec<i64>,
}

/// Real roots of `x^2 + p x + q`, ascending.
fn monic_quadratic(p: f64, q: f64) -> [f64; 2] {
    let disc = (p * p - 4.0 * q).max(0.0).sqrt();
    // stable form
    let r1 = -0.5 * (p + p.signum() * disc);
    let r2 = if r1 != 0.0 { q / r1 } else { -p - r1 };
    let (a, b) = if r1 == 0.0 && p == 0.0 { (0.0, 0.0) } else { (r1, r2) };
    if a <= b { [a, b] } else { [b, a] }
}

fn to_int(x: f64) -> Result<i64> {
    let r = x.round();
    if (x - r).abs() > 1e-9 {
        return Err(TebeError::FitFailure(format!("indicial root {x} is not an integer")));
    }
    Ok(r as i64)
}

/// Roots of the Euler-type indicial equations: `r(r - 1) - c` at the
/// boundary end with the potential `-c/omega^2`, and `r(r - 1) + r - q` for
/// each diagonal potential `-q/psi^2` at the axis end.
pub fn indicial_roots_from(omega_coeff: f64, psi_coeffs: &[f64]) -> Result<IndicialRoots> {
    let omega_end = monic_quadratic(-1.0, -omega_coeff).iter().map(|&r| to_int(r)).collect::<Result<Vec<_>>>()?;
    let mut psi_end = Vec::new();
    for &q in psi_coeffs {
        for r in monic_quadratic(0.0, -q) {
            psi_end.push(to_int(r)?);
        }
    }
    psi_end.sort_unstable();
    Ok(IndicialRoots { omega_end, psi_end })
}

pub fn indicial_roots(k: u32) -> Result<IndicialRoots> {
    if k == 0 {
        return Err(TebeError::InvalidCharge(k));
    }
    let b = f64::from(k) + 1.0;
    // gamma sees no singular potential at the axis, delta sees b^2
    indicial_roots_from(2.0, &[0.0, b * b])
}

/// Leading coefficient of a potential entry near one end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitFit {
    pub end: String,
    pub component: String,
    /// `lim x^2 P(x)` with `x` the distance to the end.
    pub coefficient: f64,
    pub expected: f64,
    pub r_squared: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub fits: Vec<LimitFit>,
    /// Largest `x |ad(A_psi)|` near either end; tends to zero when the
    /// connection is regular.
    pub connection_scaled: f64,
    pub ok: bool,
}

/// Least squares `y = c / x^2 + d`; returns `(c, R^2)`.
fn fit_inverse_square(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let t: Vec<f64> = x.iter().map(|v| 1.0 / (v * v)).collect();
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let c = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (c, r2)
}

/// Samples the potential near both ends and fits the inverse-square
/// coefficients that determine the indicial roots.
pub fn coefficient_limits<R: Radial + ?Sized>(rad: &R) -> Result<LimitReport> {
    let b = rad.params().b();
    let xs: Vec<f64> = (0..12).map(|i| 1e-3 * 10f64.powf(i as f64 / 11.0)).collect();
    let mut fits = Vec::new();
    let mut conn = 0.0_f64;
    let mut sample = |at_axis: bool| -> Result<[Vec<f64>; 2]> {
        let mut g = Vec::new();
        let mut d = Vec::new();
        for &x in &xs {
            let psi = if at_axis { x } else { FRAC_PI_2 - x };
            let (c, _) = coefficients(rad, psi)?;
            let p = c.potential();
            g.push(p[(0, 0)]);
            d.push(p[(1, 1)]);
            conn = conn.max(x * c.conn.norm());
        }
        Ok([g, d])
    };
    let omega = sample(false)?;
    let axis = sample(true)?;
    for (end, data, expected) in [("omega", &omega, [-2.0, -2.0]), ("psi", &axis, [0.0, -b * b])] {
        for (k, name) in ["gamma", "delta"].iter().enumerate() {
            let (c, r2) = fit_inverse_square(&xs, &data[k]);
            let ok = if expected[k] == 0.0 {
                c.abs() < 0.05 * b * b
            } else {
                (c - expected[k]).abs() <= 0.05 * expected[k].abs() && r2 >= 0.99
            };
            fits.push(LimitFit {
                end: end.into(),
                component: (*name).into(),
                coefficient: c,
                expected: expected[k],
                r_squared: r2,
                ok,
            });
        }
    }
    let ok = fits.iter().all(|f| f.ok);
    Ok(LimitReport {
        fits,
        connection_scaled: conn,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::{solve_at, StepPolicy};
    use crate::interp::Untwisted;
    use crate::solver::SolverConfig;

    #[test]
    fn grid_shape() {
        let g = psi_grid(50, 1e-3, 2.0).unwrap();
        assert_eq!(g.len(), 52);
        assert!((g[0] - 1e-3).abs() < 1e-15 && (g[51] - (FRAC_PI_2 - 1e-3)).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        // clustered: end cells smaller than the middle one
        assert!(g[1] - g[0] < 0.5 * (g[26] - g[25]));
    }

    #[test]
    fn roots() {
        let r = indicial_roots(1).unwrap();
        assert_eq!(r.omega_end, vec![-1, 2]);
        assert_eq!(r.psi_end, vec![-2, 0, 0, 2]);
        assert_eq!(indicial_roots(2).unwrap().psi_end, vec![-3, 0, 0, 3]);
        assert_eq!(indicial_roots(5).unwrap().omega_end, vec![-1, 2]);
        assert!(indicial_roots(0).is_err());
    }

    #[test]
    fn untwisted_operator_is_symmetric_and_negative() {
        let rad = Untwisted::new(1);
        let op = assemble_phi(&rad, &psi_grid(100, DEFAULT_MARGIN, DEFAULT_CLUSTER).unwrap()).unwrap();
        assert!(op.max_violation < 1e-12);
        assert!(op.symmetry_defect() < 1e-12, "{}", op.symmetry_defect());
        let x: Vec<f64> = (0..2 * op.n()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let q = op.quadratic_form(&x);
        let t = op.six_terms(&x).unwrap();
        assert!(q < 0.0);
        assert!((q + t.iter().sum::<f64>()).abs() < 1e-10 * q.abs());
    }

    #[test]
    fn block_solves_match_dense() {
        let rad = Untwisted::new(2);
        let op = assemble_phi(&rad, &psi_grid(20, 1e-2, 1.0).unwrap()).unwrap();
        let rhs: Vec<f64> = (0..2 * op.n()).map(|i| (i as f64).sin()).collect();
        let x = op.solve(&rhs).unwrap();
        let back = op.apply(&x);
        assert!(back.iter().zip(&rhs).all(|(a, b)| (a - b).abs() < 1e-9 * (1.0 + b.abs())));
        let xt = op.solve_transpose(&rhs).unwrap();
        let dense = op.to_dense().transpose() * DVector::from_vec(xt);
        assert!(dense.iter().zip(&rhs).all(|(a, b)| (a - b).abs() < 1e-9 * (1.0 + b.abs())));
        // singular values against a dense SVD
        let w: Vec<f64> = op.weights.iter().flat_map(|w| [w.sqrt(), w.sqrt()]).collect();
        let mut a = op.to_dense();
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                a[(r, c)] *= w[r] / w[c];
            }
        }
        let mut sv: Vec<f64> = a.svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        let got = op.smallest_singular_values(3, 1).unwrap();
        for i in 0..3 {
            assert!((got[i] - sv[i]).abs() < 1e-8 * sv[i], "{i}: {} vs {}", got[i], sv[i]);
        }
    }

    #[test]
    fn twisted_limits_and_form() {
        let prof = solve_at(1, 0.3, &SolverConfig::default(), &StepPolicy::default()).unwrap();
        let rep = coefficient_limits(&prof).unwrap();
        assert!(rep.ok, "{rep:?}");
        let op = assemble_phi(&prof, &psi_grid(80, DEFAULT_MARGIN, DEFAULT_CLUSTER).unwrap()).unwrap();
        let x: Vec<f64> = (0..2 * op.n()).map(|i| ((i * 31) % 17) as f64 / 17.0 - 0.4).collect();
        let q = op.quadratic_form(&x);
        let t = op.six_terms(&x).unwrap();
        assert!((q + t.iter().sum::<f64>()).abs() < 1e-10 * q.abs());
    }
}
