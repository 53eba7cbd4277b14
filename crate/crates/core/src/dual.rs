//! Minimal forward-mode dual numbers over 3 space directions.
//!
//! `Dual3<f64>` carries a value and its gradient; nesting (`Dual3<Dual3<f64>>`)
//! yields exact second derivatives. Only the operations needed by the
//! closed-form scenario fields are provided.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar field the closed-form expressions are generic over.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn sqrt(self) -> Self;
    fn value(self) -> f64;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn value(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dual3<S> {
    pub re: S,
    pub d: [S; 3],
}

impl<S: Scalar> Dual3<S> {
    pub fn constant(re: S) -> Self {
        let zero = S::from_f64(0.0);
        Self { re, d: [zero, zero, zero] }
    }

    /// Independent variable along axis `axis`.
    pub fn variable(re: S, axis: usize) -> Self {
        let mut d = [S::from_f64(0.0); 3];
        d[axis] = S::from_f64(1.0);
        Self { re, d }
    }
}

impl<S: Scalar> Add for Dual3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]],
        }
    }
}

impl<S: Scalar> Sub for Dual3<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            re: self.re - o.re,
            d: [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]],
        }
    }
}

impl<S: Scalar> Mul for Dual3<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re,
            d: [
                self.d[0] * o.re + self.re * o.d[0],
                self.d[1] * o.re + self.re * o.d[1],
                self.d[2] * o.re + self.re * o.d[2],
            ],
        }
    }
}

impl<S: Scalar> Div for Dual3<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = S::from_f64(1.0) / o.re;
        let re = self.re * inv;
        Self {
            re,
            d: [
                (self.d[0] - re * o.d[0]) * inv,
                (self.d[1] - re * o.d[1]) * inv,
                (self.d[2] - re * o.d[2]) * inv,
            ],
        }
    }
}

impl<S: Scalar> Neg for Dual3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { re: -self.re, d: [-self.d[0], -self.d[1], -self.d[2]] }
    }
}

impl<S: Scalar> Scalar for Dual3<S> {
    fn from_f64(x: f64) -> Self {
        Self::constant(S::from_f64(x))
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        let half_inv = S::from_f64(0.5) / s;
        Self { re: s, d: [self.d[0] * half_inv, self.d[1] * half_inv, self.d[2] * half_inv] }
    }
    fn value(self) -> f64 {
        self.re.value()
    }
}

/// Value and gradient of `f` at `x`.
pub fn gradient<S: Scalar>(f: impl Fn([Dual3<S>; 3]) -> Dual3<S>, x: [S; 3]) -> (S, [S; 3]) {
    let out = f([
        Dual3::variable(x[0], 0),
        Dual3::variable(x[1], 1),
        Dual3::variable(x[2], 2),
    ]);
    (out.re, out.d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn radius<S: Scalar>(x: [S; 3]) -> S {
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    #[test]
    fn gradient_of_radius() {
        let (r, g) = gradient(|x| radius(x), [1.0, 2.0, 2.0]);
        assert_relative_eq!(r, 3.0);
        assert_relative_eq!(g[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g[2], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn nested_duals_give_hessian() {
        // f = x^2 y + 1/z; check one mixed and one pure second derivative.
        let f = |x: [Dual3<Dual3<f64>>; 3]| {
            x[0] * x[0] * x[1] + Dual3::from_f64(1.0) / x[2]
        };
        let x0 = [1.5, -0.5, 2.0];
        let outer = f([
            Dual3::variable(Dual3::variable(x0[0], 0), 0),
            Dual3::variable(Dual3::variable(x0[1], 1), 1),
            Dual3::variable(Dual3::variable(x0[2], 2), 2),
        ]);
        // d2f/dxdy = 2x, d2f/dz2 = 2/z^3.
        assert_relative_eq!(outer.d[0].d[1], 2.0 * x0[0], epsilon = 1e-14);
        assert_relative_eq!(outer.d[2].d[2], 2.0 / x0[2].powi(3), epsilon = 1e-14);
    }
}
