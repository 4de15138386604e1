//! Second-order forward jets over the real coordinates `(x1, x2, y)` with
//! `z = x1 + i x2`. Used for exact chain-rule derivatives of the ansatz.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C;

pub const DIM: usize = 3;

/// Value, gradient and Hessian of a complex function of `(x1, x2, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: C,
    pub g: [C; DIM],
    pub h: [[C; DIM]; DIM],
}

/// Value and gradient only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet1 {
    pub v: C,
    pub g: [C; DIM],
}

const Z: C = C::new(0.0, 0.0);

impl Jet2 {
    pub fn constant(v: C) -> Self {
        Self {
            v,
            g: [Z; DIM],
            h: [[Z; DIM]; DIM],
        }
    }

    pub fn real(v: f64) -> Self {
        Self::constant(C::new(v, 0.0))
    }

    pub fn variable(v: f64, i: usize) -> Self {
        let mut j = Self::real(v);
        j.g[i] = C::new(1.0, 0.0);
        j
    }

    pub fn conj(&self) -> Self {
        Self {
            v: self.v.conj(),
            g: self.g.map(|x| x.conj()),
            h: self.h.map(|r| r.map(|x| x.conj())),
        }
    }

    pub fn scale(&self, s: C) -> Self {
        Self {
            v: self.v * s,
            g: self.g.map(|x| x * s),
            h: self.h.map(|r| r.map(|x| x * s)),
        }
    }

    /// `f(self)` given `f, f', f''` at the value.
    pub fn compose(&self, f0: C, f1: C, f2: C) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..DIM {
            out.g[i] = f1 * self.g[i];
            for j in 0..DIM {
                out.h[i][j] = f1 * self.h[i][j] + f2 * self.g[i] * self.g[j];
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let x = self.v;
        self.compose(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn recip(&self) -> Self {
        let x = self.v;
        self.compose(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.compose(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::real(1.0);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }

    pub fn first(&self) -> Jet1 {
        Jet1 { v: self.v, g: self.g }
    }

    /// Partial derivative along coordinate `i`, as a first-order jet.
    pub fn d(&self, i: usize) -> Jet1 {
        Jet1 {
            v: self.g[i],
            g: self.h[i],
        }
    }

    pub fn dz(&self) -> Jet1 {
        wirtinger(self.d(0), self.d(1), -1.0)
    }

    pub fn dzbar(&self) -> Jet1 {
        wirtinger(self.d(0), self.d(1), 1.0)
    }
}

/// `(d1 + s i d2) / 2`
fn wirtinger(d1: Jet1, d2: Jet1, s: f64) -> Jet1 {
    let f = C::new(0.0, s);
    (d1 + d2.scale(f)).scale(C::new(0.5, 0.0))
}

impl Jet1 {
    pub fn constant(v: C) -> Self {
        Self { v, g: [Z; DIM] }
    }

    pub fn scale(&self, s: C) -> Self {
        Self {
            v: self.v * s,
            g: self.g.map(|x| x * s),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            v: self.v.conj(),
            g: self.g.map(|x| x.conj()),
        }
    }

    pub fn d(&self, i: usize) -> C {
        self.g[i]
    }

    pub fn dz(&self) -> C {
        0.5 * (self.g[0] - C::i() * self.g[1])
    }

    pub fn dzbar(&self) -> C {
        0.5 * (self.g[0] + C::i() * self.g[1])
    }
}

macro_rules! linear_ops {
    ($t:ty, $($field:ident),*) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                let mut r = self;
                r.v += o.v;
                for i in 0..DIM {
                    r.g[i] += o.g[i];
                }
                $(for i in 0..DIM { for j in 0..DIM { r.$field[i][j] += o.$field[i][j]; } })*
                r
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                self + (-o)
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                self.scale(C::new(-1.0, 0.0))
            }
        }
    };
}

linear_ops!(Jet2, h);
linear_ops!(Jet1,);

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut r = Jet2::constant(self.v * o.v);
        for i in 0..DIM {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in 0..DIM {
                r.h[i][j] = self.h[i][j] * o.v + self.g[i] * o.g[j] + self.g[j] * o.g[i] + self.v * o.h[i][j];
            }
        }
        r
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, o: Jet1) -> Jet1 {
        let mut r = Jet1::constant(self.v * o.v);
        for i in 0..DIM {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        r
    }
}

/// 2x2 matrices of jets.
pub type JM2 = [[Jet2; 2]; 2];
pub type JM1 = [[Jet1; 2]; 2];

pub fn jm1_mul(a: &JM1, b: &JM1) -> JM1 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

pub fn jm2_first(a: &JM2) -> JM1 {
    a.map(|r| r.map(|x| x.first()))
}

pub fn jm2_map(a: &JM2, f: impl Fn(&Jet2) -> Jet1) -> JM1 {
    a.map(|r| r.map(|x| f(&x)))
}

pub fn jm1_map(a: &JM1, f: impl Fn(&Jet1) -> C) -> [[C; 2]; 2] {
    a.map(|r| r.map(|x| f(&x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn product_and_chain_rules() {
        // f = exp(x1 * y) / sqrt(x1^2 + x2^2)
        let (a, b, c) = (0.7, -0.4, 1.3);
        let x1 = Jet2::variable(a, 0);
        let x2 = Jet2::variable(b, 1);
        let y = Jet2::variable(c, 2);
        let f = (x1 * y).exp() * (x1 * x1 + x2 * x2).sqrt().recip();
        let eval = |a: f64, b: f64, c: f64| (a * c).exp() / (a * a + b * b).sqrt();
        let h = 1e-4;
        let fd_x1 = (eval(a + h, b, c) - eval(a - h, b, c)) / (2.0 * h);
        assert!(close(f.g[0], C::new(fd_x1, 0.0), 1e-7));
        let fd_x1y = (eval(a + h, b, c + h) - eval(a + h, b, c - h) - eval(a - h, b, c + h) + eval(a - h, b, c - h)) / (4.0 * h * h);
        assert!(close(f.h[0][2], C::new(fd_x1y, 0.0), 1e-6));
        assert!(close(f.h[0][2], f.h[2][0], 1e-14));
    }

    #[test]
    fn wirtinger_of_holomorphic() {
        // z^3: d/dz = 3 z^2, d/dzbar = 0
        let x1 = Jet2::variable(0.3, 0);
        let x2 = Jet2::variable(0.8, 1);
        let z = x1 + x2.scale(C::i());
        let f = z.powi(3);
        let zv = C::new(0.3, 0.8);
        assert!(close(f.dz().v, 3.0 * zv * zv, 1e-14));
        assert!(f.dzbar().v.norm() < 1e-14);
        // second derivative d/dzbar d/dz of |z|^2 = 1
        let m = z * z.conj();
        assert!(close(m.dz().dzbar(), C::new(1.0, 0.0), 1e-14));
    }

    #[test]
    fn log_of_exp_is_identity() {
        let x = Jet2::variable(0.9, 2);
        let f = x.exp().ln();
        assert!(close(f.v, C::new(0.9, 0.0), 1e-15));
        assert!(close(f.g[2], C::new(1.0, 0.0), 1e-15));
        assert!(f.h[2][2].norm() < 1e-14);
    }
}
