//! Closed-form values evaluated in exact rational arithmetic, so that finite
//! differences of them carry no roundoff.

use std::ops::{Add, Div, Mul, Sub};

use gridfluct::closed_form::{GraphKind, Parameter, Scalar, Scalars};
use num_rational::BigRational;
use num_traits::ToPrimitive;

pub trait Field: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    fn int(i: i64) -> Self;
}

impl Field for f64 {
    fn int(i: i64) -> Self {
        i as f64
    }
}

impl Field for BigRational {
    fn int(i: i64) -> Self {
        BigRational::from_integer(i.into())
    }
}

#[derive(Clone)]
pub struct Point<T> {
    pub n: T,
    pub gamma: T,
    pub eta: T,
    pub d: T,
    pub b2: T,
}

fn k<T: Field>(i: i64) -> T {
    T::int(i)
}

impl<T: Field> Point<T> {
    fn f(&self) -> T {
        k::<T>(2) * self.d.clone() * self.d.clone() + self.gamma.clone() * self.eta.clone() * self.n.clone()
    }

    fn h(&self) -> T {
        let nm1 = self.n.clone() - k(1);
        k::<T>(2) * self.d.clone() * self.d.clone() * (self.n.clone() + k(1))
            + self.gamma.clone() * self.eta.clone() * nm1.clone() * nm1
    }

    fn e(&self) -> T {
        k::<T>(2) * self.d.clone() * self.d.clone() + self.gamma.clone() * self.eta.clone()
    }

    pub fn value(&self, kind: GraphKind, scalar: Scalar) -> T {
        let (n, g, eta, d, b2) = (self.n.clone(), self.gamma.clone(), self.eta.clone(), self.d.clone(), self.b2.clone());
        let base = b2.clone() / (k::<T>(2) * d.clone() * eta.clone());
        let dn = d.clone() * n.clone();
        match (kind, scalar) {
            (GraphKind::Complete, Scalar::SourceFrequency) => {
                base - (n.clone() - k(1)) * g * b2 / (dn * self.f())
            }
            (GraphKind::Complete, Scalar::OtherFrequency) => g * b2 / (dn * self.f()),
            (GraphKind::Complete, Scalar::SourceLine) => b2 / (k::<T>(2) * d * g * n),
            (GraphKind::Complete, Scalar::OtherLine) => k(0),
            (GraphKind::Star, Scalar::SourceFrequency) => {
                base - g.clone() * b2.clone() / (dn.clone() * self.f())
                    - g.clone() * (n.clone() - k(2)) * b2.clone() / (dn.clone() * self.h())
                    - g.clone() * g * eta * (n - k(2)) * b2 / (dn * self.e() * self.f())
            }
            (GraphKind::Star, Scalar::OtherFrequency) => {
                g.clone() * b2.clone() / (dn.clone() * self.h()) + g.clone() * g * eta * b2 / (dn * self.e() * self.f())
            }
            (GraphKind::Star, Scalar::SourceLine) => {
                let c = k::<T>(2) * d.clone() * g.clone() * n.clone();
                let inner = k::<T>(2) * d.clone() * d + g * eta * (n.clone() + k(1));
                ((n.clone() - k(1)) / c.clone() - (n - k(2)) * inner / (c * self.h())) * b2
            }
            (GraphKind::Star, Scalar::OtherLine) => {
                let inner = k::<T>(2) * d.clone() * d.clone() + g.clone() * eta * (n.clone() + k(1));
                inner / (k::<T>(2) * d * g * n * self.h()) * b2
            }
        }
    }

    pub fn with(&self, parameter: Parameter, x: T) -> Self {
        let mut p = self.clone();
        match parameter {
            Parameter::Gamma => p.gamma = x,
            Parameter::Eta => p.eta = x,
            Parameter::N => p.n = x,
        }
        p
    }

    pub fn get(&self, parameter: Parameter) -> T {
        match parameter {
            Parameter::Gamma => self.gamma.clone(),
            Parameter::Eta => self.eta.clone(),
            Parameter::N => self.n.clone(),
        }
    }
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn point_f64(s: &Scalars, b2: f64) -> Point<f64> {
    Point { n: s.n, gamma: s.gamma, eta: s.eta, d: s.d, b2 }
}

pub fn point_exact(s: &Scalars, b2: f64) -> Point<BigRational> {
    Point { n: exact(s.n), gamma: exact(s.gamma), eta: exact(s.eta), d: exact(s.d), b2: exact(b2) }
}

/// Central difference of a closed-form value with step `rel_step·|x|`, computed exactly.
pub fn central_difference(s: &Scalars, b2: f64, kind: GraphKind, scalar: Scalar, parameter: Parameter, rel_step: f64) -> f64 {
    let p = point_exact(s, b2);
    let x = p.get(parameter);
    let h = exact(rel_step) * if x < BigRational::int(0) { BigRational::int(0) - x.clone() } else { x.clone() };
    let hi = p.with(parameter, x.clone() + h.clone()).value(kind, scalar);
    let lo = p.with(parameter, x - h.clone()).value(kind, scalar);
    ((hi - lo) / (BigRational::int(2) * h)).to_f64().expect("representable")
}
