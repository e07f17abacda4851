//! Exact rationals and Gaussian rationals.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// `(-1)^n` as a rational.
pub fn sign(n: i64) -> Q {
    if n.rem_euclid(2) == 0 {
        Q::one()
    } else {
        -Q::one()
    }
}

/// Parses `n` or `n/d`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).ok()?;
            let d = BigInt::from_str(d.trim()).ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Q::new(n, d))
            }
        }
        None => BigInt::from_str(s).ok().map(Q::from_integer),
    }
}

pub fn fmt_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Serde adapter storing a rational as the string `n/d`.
pub mod serde_q {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s:?}")))
    }
}

/// An element `re + i·im` of Q(i).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Gauss {
    #[serde(with = "serde_q")]
    pub re: Q,
    #[serde(with = "serde_q")]
    pub im: Q,
}

impl Gauss {
    pub fn new(re: Q, im: Q) -> Self {
        Gauss { re, im }
    }
    pub fn real(re: Q) -> Self {
        Gauss { re, im: Q::zero() }
    }
    pub fn imag(im: Q) -> Self {
        Gauss { re: Q::zero(), im }
    }
    pub fn zero() -> Self {
        Gauss::default()
    }
    pub fn one() -> Self {
        Gauss::real(Q::one())
    }
    pub fn i() -> Self {
        Gauss::imag(Q::one())
    }
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    pub fn conj(&self) -> Self {
        Gauss { re: self.re.clone(), im: -self.im.clone() }
    }
    pub fn scale(&self, s: &Q) -> Self {
        Gauss { re: &self.re * s, im: &self.im * s }
    }
}

impl From<Q> for Gauss {
    fn from(re: Q) -> Self {
        Gauss::real(re)
    }
}

impl Add for &Gauss {
    type Output = Gauss;
    fn add(self, o: &Gauss) -> Gauss {
        Gauss { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}
impl Add for Gauss {
    type Output = Gauss;
    fn add(self, o: Gauss) -> Gauss {
        &self + &o
    }
}
impl Sub for &Gauss {
    type Output = Gauss;
    fn sub(self, o: &Gauss) -> Gauss {
        Gauss { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}
impl Sub for Gauss {
    type Output = Gauss;
    fn sub(self, o: Gauss) -> Gauss {
        &self - &o
    }
}
impl Mul for &Gauss {
    type Output = Gauss;
    fn mul(self, o: &Gauss) -> Gauss {
        Gauss {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}
impl Mul for Gauss {
    type Output = Gauss;
    fn mul(self, o: Gauss) -> Gauss {
        &self * &o
    }
}
impl Neg for Gauss {
    type Output = Gauss;
    fn neg(self) -> Gauss {
        Gauss { re: -self.re, im: -self.im }
    }
}
impl Neg for &Gauss {
    type Output = Gauss;
    fn neg(self) -> Gauss {
        Gauss { re: -self.re.clone(), im: -self.im.clone() }
    }
}
impl AddAssign<&Gauss> for Gauss {
    fn add_assign(&mut self, o: &Gauss) {
        self.re += &o.re;
        self.im += &o.im;
    }
}
impl SubAssign<&Gauss> for Gauss {
    fn sub_assign(&mut self, o: &Gauss) {
        self.re -= &o.re;
        self.im -= &o.im;
    }
}

impl fmt::Display for Gauss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}i", self.im),
            (false, false) => {
                let op = if self.im.is_negative() { "-" } else { "+" };
                write!(f, "({}{}{}i)", self.re, op, self.im.abs())
            }
        }
    }
}

impl FromStr for Gauss {
    type Err = String;

    /// Accepts `a`, `bi`, `(a+bi)`, `(a-bi)` with rational parts.
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let bad = || format!("bad gaussian rational {s:?}");
        if let Some(body) = t.strip_suffix('i') {
            let split = body
                .char_indices()
                .skip(1)
                .filter(|&(k, c)| (c == '+' || c == '-') && !body[..k].ends_with('/'))
                .map(|(k, _)| k)
                .last();
            match split {
                Some(k) => {
                    let re = parse_q(&body[..k]).ok_or_else(bad)?;
                    let im_s = &body[k..];
                    let im_s = im_s.strip_prefix('+').unwrap_or(im_s);
                    let im = if im_s == "-" { -Q::one() } else { parse_q(im_s).ok_or_else(bad)? };
                    Ok(Gauss::new(re, im))
                }
                None => {
                    let im = match body {
                        "" | "+" => Q::one(),
                        "-" => -Q::one(),
                        b => parse_q(b).ok_or_else(bad)?,
                    };
                    Ok(Gauss::imag(im))
                }
            }
        } else {
            parse_q(t).map(Gauss::real).ok_or_else(bad)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_arith() {
        let a = Gauss::new(q(1), q(2));
        let b = Gauss::new(qf(1, 2), q(-1));
        assert_eq!(&a * &b, Gauss::new(qf(5, 2), q(0)));
        assert_eq!(&Gauss::i() * &Gauss::i(), Gauss::real(q(-1)));
        assert_eq!(a.conj().conj(), a);
    }

    #[test]
    fn gauss_roundtrip() {
        for g in [
            Gauss::new(q(3), qf(-1, 2)),
            Gauss::imag(q(-7)),
            Gauss::real(qf(2, 3)),
            Gauss::new(qf(-1, 3), q(4)),
        ] {
            let s = g.to_string();
            assert_eq!(s.parse::<Gauss>().unwrap(), g, "{s}");
        }
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_q("-3/6"), Some(qf(-1, 2)));
        assert_eq!(parse_q("5"), Some(q(5)));
        assert_eq!(parse_q("1/0"), None);
    }
}
