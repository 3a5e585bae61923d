//! Exact rational arithmetic for the closed-form exponent formulas.
//!
//! The exponent tables compare against exact fractions, so the formulas are
//! evaluated over i128 rationals whenever the inputs are rational, with the
//! f64 route as the general fallback.

use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: i128,
    den: i128, // always > 0
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rational {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "rational with zero denominator");
        let s = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Rational { num: s * num / g, den: s * den / g }
    }

    pub const fn integer(n: i128) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn num(&self) -> i128 {
        self.num
    }

    pub fn den(&self) -> i128 {
        self.den
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    pub fn is_negative(&self) -> bool {
        self.num < 0
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn add(self, o: Self) -> Self {
        Rational::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn sub(self, o: Self) -> Self {
        Rational::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }

    pub fn mul(self, o: Self) -> Self {
        Rational::new(self.num * o.num, self.den * o.den)
    }

    pub fn div(self, o: Self) -> Self {
        assert!(o.num != 0, "rational division by zero");
        Rational::new(self.num * o.den, self.den * o.num)
    }

    pub fn neg(self) -> Self {
        Rational { num: -self.num, den: self.den }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_rational(other))
    }
}

impl Rational {
    pub fn cmp_rational(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Extended positive rational: either finite or the `+infinity` that the
/// convention `1/(x)_+ = infinity for x <= 0` produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedRational {
    Finite(Rational),
    Unbounded,
}

impl ExtendedRational {
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtendedRational::Finite(r) => r.to_f64(),
            ExtendedRational::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for ExtendedRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedRational::Finite(r) => write!(f, "{r}"),
            ExtendedRational::Unbounded => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_reduces() {
        let a = Rational::new(6, -4);
        assert_eq!(a, Rational::new(-3, 2));
        let b = Rational::new(1, 6).add(Rational::new(1, 3));
        assert_eq!(b, Rational::new(1, 2));
        assert_eq!(Rational::new(2, 7).mul(Rational::new(7, 2)), Rational::integer(1));
    }

    #[test]
    fn ordering() {
        assert!(Rational::new(2, 3) < Rational::new(3, 4));
        assert!(Rational::new(-1, 2) < Rational::integer(0));
    }
}
