//! Second-order forward-mode differentiation in two variables.
//!
//! A [`Jet2`] carries a value together with its gradient and Hessian with
//! respect to the chart coordinates `(u, v)`. Arithmetic propagates the
//! derivatives exactly, which gives the metric's conformal factor, its
//! gradient (needed by the geodesic equation) and its Laplacian (needed by
//! the curvature) from a single evaluation.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub du: f64,
    pub dv: f64,
    pub duu: f64,
    pub duv: f64,
    pub dvv: f64,
}

impl Jet2 {
    pub const fn constant(v: f64) -> Self {
        Self {
            v,
            du: 0.0,
            dv: 0.0,
            duu: 0.0,
            duv: 0.0,
            dvv: 0.0,
        }
    }

    /// The coordinate functions `u` and `v` seeded at a point.
    pub fn variables(u: f64, v: f64) -> (Self, Self) {
        (
            Self {
                du: 1.0,
                ..Self::constant(u)
            },
            Self {
                dv: 1.0,
                ..Self::constant(v)
            },
        )
    }

    pub fn laplacian(&self) -> f64 {
        self.duu + self.dvv
    }

    /// Chain rule for a scalar function given its value and first two derivatives.
    pub fn compose(&self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            v: f,
            du: df * self.du,
            dv: df * self.dv,
            duu: d2f * self.du * self.du + df * self.duu,
            duv: d2f * self.du * self.dv + df * self.duv,
            dvv: d2f * self.dv * self.dv + df * self.dvv,
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let r = 1.0 / self.v;
        self.compose(self.v.ln(), r, -r * r)
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.compose(r, -r * r, 2.0 * r * r * r)
    }

    pub fn square(&self) -> Self {
        *self * *self
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            v: c * self.v,
            du: c * self.du,
            dv: c * self.dv,
            duu: c * self.duu,
            duv: c * self.duv,
            dvv: c * self.dvv,
        }
    }
}

impl Add for Jet2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            du: self.du + o.du,
            dv: self.dv + o.dv,
            duu: self.duu + o.duu,
            duv: self.duv + o.duv,
            dvv: self.dvv + o.dvv,
        }
    }
}

impl Add<f64> for Jet2 {
    type Output = Self;
    fn add(mut self, c: f64) -> Self {
        self.v += c;
        self
    }
}

impl Sub for Jet2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Sub<Jet2> for f64 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        (-o) + self
    }
}

impl Neg for Jet2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            du: self.du * o.v + self.v * o.du,
            dv: self.dv * o.v + self.v * o.dv,
            duu: self.duu * o.v + 2.0 * self.du * o.du + self.v * o.duu,
            duv: self.duv * o.v + self.du * o.dv + self.dv * o.du + self.v * o.duv,
            dvv: self.dvv * o.v + 2.0 * self.dv * o.dv + self.v * o.dvv,
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.scale(c)
    }
}

impl Div for Jet2 {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

/// Complex number whose real and imaginary parts are jets; used to push a
/// jet through a Möbius map.
#[derive(Debug, Clone, Copy)]
pub struct CJet2 {
    pub re: Jet2,
    pub im: Jet2,
}

impl CJet2 {
    pub fn from_c(re: f64, im: f64) -> Self {
        Self {
            re: Jet2::constant(re),
            im: Jet2::constant(im),
        }
    }

    pub fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    pub fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    pub fn div(self, o: Self) -> Self {
        let den = (o.re.square() + o.im.square()).recip();
        Self {
            re: (self.re * o.re + self.im * o.im) * den,
            im: (self.im * o.re - self.re * o.im) * den,
        }
    }
}
