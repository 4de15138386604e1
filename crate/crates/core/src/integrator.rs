//! Dormand–Prince 5(4) with Hairer's continuous extension.
//!
//! Works in either direction of time. A trajectory that leaves the
//! escape box (or turns non-finite) stops early and reports where.

use crate::error::{Result, TebeError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Components beyond this magnitude count as blow-up.
    pub escape: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 200_000,
            escape: 1e12,
        }
    }
}

impl Options {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i]))))
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub t_start: f64,
    pub y_start: [f64; N],
    pub segments: Vec<Segment<N>>,
    pub t_end: f64,
    pub y_end: [f64; N],
    /// Set when integration stopped early on blow-up.
    pub escaped_at: Option<f64>,
    pub rejected: usize,
}

impl<const N: usize> Trajectory<N> {
    pub fn completed(&self) -> bool {
        self.escaped_at.is_none()
    }

    fn forward(&self) -> bool {
        self.t_end >= self.t_start
    }

    /// Dense output; `t` must lie between `t_start` and `t_end`.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        let (lo, hi) = if self.forward() {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        };
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if t < lo - slack || t > hi + slack {
            return None;
        }
        if self.segments.is_empty() {
            return Some(self.y_start);
        }
        // segments are ordered along the direction of integration
        let idx = if self.forward() {
            self.segments.partition_point(|s| s.t1() < t)
        } else {
            self.segments.partition_point(|s| s.t1() > t)
        };
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        Some(seg.eval(t))
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn out_of_box<const N: usize>(y: &[f64; N], escape: f64) -> bool {
    y.iter().any(|x| !x.is_finite() || x.abs() > escape)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
pub fn integrate<const N: usize, F>(mut f: F, t0: f64, y0: [f64; N], t1: f64, opts: &Options) -> Result<Trajectory<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(TebeError::InvalidArgument("tolerances must be positive".into()));
    }
    if !t0.is_finite() || !t1.is_finite() || out_of_box(&y0, f64::INFINITY) {
        return Err(TebeError::InvalidArgument("non-finite initial data".into()));
    }
    let mut traj = Trajectory {
        t_start: t0,
        y_start: y0,
        segments: Vec::new(),
        t_end: t0,
        y_end: y0,
        escaped_at: None,
        rejected: 0,
    };
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(traj);
    }
    let dir = span.signum();

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    if out_of_box(&k1, f64::INFINITY) {
        traj.escaped_at = Some(t0);
        return Ok(traj);
    }
    let h_max = opts.h_max.min(span.abs());
    let mut h = opts.h_init.unwrap_or_else(|| initial_step(&mut f, t0, &y0, &k1, dir, opts)).abs().min(h_max) * dir;
    let h_min = 16.0 * f64::EPSILON * (t0.abs().max(t1.abs()) + 1.0);

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if steps >= opts.max_steps {
            return Err(TebeError::StepUnderflow { tau: t });
        }
        steps += 1;
        let remaining = t1 - t;
        let last = (h.abs() * 1.0001) >= remaining.abs();
        if last {
            h = remaining;
        }

        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if last { t1 } else { t + h };
        let k7 = f(t_new, &y1);

        let mut err2 = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            let r = e / sc;
            finite &= r.is_finite();
            err2 += r * r;
        }
        let err = (err2 / N as f64).sqrt();

        if !finite || out_of_box(&k7, f64::INFINITY) {
            // shrink hard; if that is impossible the solution has left the domain
            if h.abs() <= h_min {
                traj.escaped_at = Some(t);
                break;
            }
            h *= 0.1;
            traj.rejected += 1;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            let ydiff: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
            let r4: [f64; N] = std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]);
            let r5: [f64; N] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            traj.segments.push(Segment {
                t0: t,
                h: t_new - t,
                rcont: [y, ydiff, bspl, r4, r5],
            });
            t = t_new;
            y = y1;
            k1 = k7;
            traj.t_end = t;
            traj.y_end = y;
            if out_of_box(&y, opts.escape) {
                traj.escaped_at = Some(t);
                break;
            }
            if last {
                break;
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).abs().min(h_max) * dir;
            last_rejected = false;
        } else {
            traj.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            last_rejected = true;
            if h.abs() < h_min {
                return Err(TebeError::StepUnderflow { tau: t });
            }
        }
    }
    Ok(traj)
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], f0: &[f64; N], dir: f64, opts: &Options) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let sc: [f64; N] = std::array::from_fn(|i| opts.atol + opts.rtol * y0[i].abs());
    let norm = |v: &[f64; N]| (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y0, h0 * dir, &[(1.0, f0)]);
    let f1 = f(t0 + h0 * dir, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    if h1.is_finite() {
        (100.0 * h0).min(h1)
    } else {
        h0
    }
}
