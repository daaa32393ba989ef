//! Second-order forward-mode jets.
//!
//! A `Jet<N>` carries a value together with its gradient and Hessian with
//! respect to `N` independent variables. Chart metrics and immersions are
//! written once against this type, so every first and second derivative used
//! downstream (Christoffel symbols, curvature, second fundamental forms) is
//! exact to rounding instead of finite-differenced.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
    pub h: [[f64; N]; N],
}

pub type Jet2 = Jet<2>;
pub type Jet3 = Jet<3>;

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            d: [0.0; N],
            h: [[0.0; N]; N],
        }
    }

    /// The `i`-th independent variable evaluated at `v`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.d[i] = 1.0;
        j
    }

    /// Compose with a scalar function given `f(v)`, `f'(v)`, `f''(v)`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..N {
            out.d[i] = f1 * self.d[i];
            for j in 0..N {
                out.h[i][j] = f1 * self.h[i][j] + f2 * self.d[i] * self.d[j];
            }
        }
        out
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn powi(self, n: i32) -> Self {
        let nf = n as f64;
        self.chain(
            self.v.powi(n),
            nf * self.v.powi(n - 1),
            nf * (nf - 1.0) * self.v.powi(n - 2),
        )
    }

    pub fn square(self) -> Self {
        self * self
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for i in 0..N {
            self.d[i] += rhs.d[i];
            for j in 0..N {
                self.h[i][j] += rhs.h[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::constant(self.v * rhs.v);
        for i in 0..N {
            out.d[i] = self.d[i] * rhs.v + self.v * rhs.d[i];
            for j in 0..N {
                out.h[i][j] = self.h[i][j] * rhs.v
                    + self.v * rhs.h[i][j]
                    + self.d[i] * rhs.d[j]
                    + rhs.d[i] * self.d[j];
            }
        }
        out
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.v *= rhs;
        for i in 0..N {
            self.d[i] *= rhs;
            for j in 0..N {
                self.h[i][j] *= rhs;
            }
        }
        self
    }
}

impl<const N: usize> Div<f64> for Jet<N> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const N: usize> Add<Jet<N>> for f64 {
    type Output = Jet<N>;
    fn add(self, rhs: Jet<N>) -> Jet<N> {
        rhs + self
    }
}

impl<const N: usize> Sub<Jet<N>> for f64 {
    type Output = Jet<N>;
    fn sub(self, rhs: Jet<N>) -> Jet<N> {
        -rhs + self
    }
}

impl<const N: usize> Mul<Jet<N>> for f64 {
    type Output = Jet<N>;
    fn mul(self, rhs: Jet<N>) -> Jet<N> {
        rhs * self
    }
}

impl<const N: usize> Div<Jet<N>> for f64 {
    type Output = Jet<N>;
    fn div(self, rhs: Jet<N>) -> Jet<N> {
        rhs.recip() * self
    }
}
