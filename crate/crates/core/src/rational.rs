//! Exact rational numbers over arbitrary-precision integers.
//!
//! Every rate, token level, time instant and duration in this crate is a
//! [`Rational`]. Values are always stored normalized (positive denominator,
//! coprime parts), so structural equality is numeric equality.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RationalError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("malformed rational literal `{0}`")]
    Malformed(String),
    #[error("empty value set")]
    EmptySet,
    #[error("value {0} is not strictly positive")]
    NotPositive(Rational),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

/// Builds `num/den`, normalized.
pub fn rat(num: i64, den: i64) -> Result<Rational, RationalError> {
    Rational::new(num, den)
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self, RationalError> {
        if den == 0 {
            return Err(RationalError::ZeroDenominator);
        }
        Ok(Rational(BigRational::new(num.into(), den.into())))
    }

    pub fn from_bigints(num: BigInt, den: BigInt) -> Result<Self, RationalError> {
        if den.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        Ok(Rational(BigRational::new(num, den)))
    }

    pub fn integer(value: i64) -> Self {
        Rational(BigRational::from_integer(value.into()))
    }

    pub fn from_big_integer(value: BigInt) -> Self {
        Rational(BigRational::from_integer(value))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn ceil(&self) -> BigInt {
        self.0.ceil().to_integer()
    }

    /// Fractional part in `[0, 1)`.
    pub fn fract(&self) -> Rational {
        self - &Rational::from_big_integer(self.floor())
    }

    pub fn abs(&self) -> Rational {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Rational {
        Rational(self.0.recip())
    }

    pub fn min(self, other: Rational) -> Rational {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Rational) -> Rational {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// The value as `u64` when it is a nonnegative integer that fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.is_integer() {
            self.numer().to_u64()
        } else {
            None
        }
    }

    pub fn to_i64_parts(&self) -> Option<(i64, i64)> {
        Some((self.numer().to_i64()?, self.denom().to_i64()?))
    }

    /// `true` when `self / other` is a (possibly negative) integer.
    pub fn is_multiple_of(&self, other: &Rational) -> bool {
        !other.is_zero() && (self / other).is_integer()
    }

    /// Decimal rendering with `places` digits, rounding half away from zero.
    pub fn to_decimal(&self, places: usize) -> String {
        let scale = BigInt::from(10u32).pow(places as u32);
        let scaled = &self.0 * BigRational::from_integer(scale.clone());
        let magnitude = scaled.abs();
        let rounded = (magnitude + BigRational::new(1.into(), 2.into()))
            .floor()
            .to_integer();
        let (int_part, frac_part) = rounded.div_rem(&scale);
        let sign = if self.is_negative() && !rounded.is_zero() {
            "-"
        } else {
            ""
        };
        if places == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{:0>width$}", frac_part, width = places)
        }
    }
}

/// Largest `g` such that every value is an integer multiple of `g`.
pub fn rat_gcd_set<'a, I>(values: I) -> Result<Rational, RationalError>
where
    I: IntoIterator<Item = &'a Rational>,
{
    let mut num: Option<BigInt> = None;
    let mut den = BigInt::one();
    for v in values {
        if !v.is_positive() {
            return Err(RationalError::NotPositive(v.clone()));
        }
        num = Some(match num {
            None => v.numer().clone(),
            Some(n) => n.gcd(v.numer()),
        });
        den = den.lcm(v.denom());
    }
    let num = num.ok_or(RationalError::EmptySet)?;
    Rational::from_bigints(num, den)
}

/// Smallest `L` such that `L / value` is a positive integer for every value.
pub fn rat_lcm_set<'a, I>(values: I) -> Result<Rational, RationalError>
where
    I: IntoIterator<Item = &'a Rational>,
{
    let mut num = BigInt::one();
    let mut den: Option<BigInt> = None;
    for v in values {
        if !v.is_positive() {
            return Err(RationalError::NotPositive(v.clone()));
        }
        num = num.lcm(v.numer());
        den = Some(match den {
            None => v.denom().clone(),
            Some(d) => d.gcd(v.denom()),
        });
    }
    let den = den.ok_or(RationalError::EmptySet)?;
    Rational::from_bigints(num, den)
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = RationalError;

    /// Accepts `p`, `-p`, `p/q`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || RationalError::Malformed(s.to_string());
        let parse_int = |t: &str, signed: bool| -> Result<BigInt, RationalError> {
            let digits = if signed {
                t.strip_prefix('-').unwrap_or(t)
            } else {
                t
            };
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            t.parse::<BigInt>().map_err(|_| malformed())
        };
        match s.split_once('/') {
            None => Ok(Rational::from_big_integer(parse_int(s, true)?)),
            Some((n, d)) => {
                let num = parse_int(n, true)?;
                let den = parse_int(d, false)?;
                Rational::from_bigints(num, den)
            }
        }
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::integer(v)
    }
}

impl From<u64> for Rational {
    fn from(v: u64) -> Self {
        Rational::from_big_integer(v.into())
    }
}

impl From<BigInt> for Rational {
    fn from(v: BigInt) -> Self {
        Rational::from_big_integer(v)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational($trait::$method(&self.0, &rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational($trait::$method(self.0, rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational($trait::$method(self.0, &rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational($trait::$method(&self.0, rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, v| acc + v)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, v| acc + v)
    }
}

// JSON form: {"num": n, "den": d, "decimal": "x.xx"}. Integers that do not
// fit in i64 are written as strings.
impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Rational", 3)?;
        match self.to_i64_parts() {
            Some((n, d)) => {
                st.serialize_field("num", &n)?;
                st.serialize_field("den", &d)?;
            }
            None => {
                st.serialize_field("num", &self.numer().to_string())?;
                st.serialize_field("den", &self.denom().to_string())?;
            }
        }
        st.serialize_field("decimal", &self.to_decimal(2))?;
        st.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntRepr {
    Int(i64),
    Text(String),
}

impl IntRepr {
    fn to_bigint(&self) -> Option<BigInt> {
        match self {
            IntRepr::Int(v) => Some(BigInt::from(*v)),
            IntRepr::Text(t) => t.parse().ok(),
        }
    }
}

#[derive(Deserialize)]
struct RationalRepr {
    num: IntRepr,
    den: IntRepr,
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = RationalRepr::deserialize(deserializer)?;
        let num = repr
            .num
            .to_bigint()
            .ok_or_else(|| de::Error::custom("bad numerator"))?;
        let den = repr
            .den
            .to_bigint()
            .ok_or_else(|| de::Error::custom("bad denominator"))?;
        Rational::from_bigints(num, den).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        rat(n, d).unwrap()
    }

    #[test]
    fn construction_normalizes() {
        assert_eq!(r(2, 4), r(1, 2));
        assert_eq!(r(-3, -6), r(1, 2));
        assert_eq!(r(3, -6).to_string(), "-1/2");
        assert_eq!(r(3, 50).to_string(), "3/50");
        assert_eq!(rat(1, 0), Err(RationalError::ZeroDenominator));
    }

    #[test]
    fn gcd_of_ingenuity_periods_and_phase_is_a_third() {
        let values = [r(2, 1), r(20, 1), r(100, 3), r(1, 1)];
        assert_eq!(rat_gcd_set(&values).unwrap(), r(1, 3));
        assert_eq!(rat_gcd_set(&[r(5, 1)]).unwrap(), r(5, 1));
    }

    // Scan k/lcm(dens) for k descending from min(value)*lcm and keep the
    // first candidate dividing everything.
    fn brute_gcd(values: &[(i64, i64)]) -> (i64, i64) {
        let lcm_den = values.iter().fold(1i64, |acc, &(_, d)| acc.lcm(&d));
        let min_scaled = values
            .iter()
            .map(|&(n, d)| n * (lcm_den / d))
            .min()
            .unwrap();
        for k in (1..=min_scaled).rev() {
            if values.iter().all(|&(n, d)| (n * (lcm_den / d)) % k == 0) {
                let g = k.gcd(&lcm_den);
                return (k / g, lcm_den / g);
            }
        }
        unreachable!()
    }

    // Multiply the largest value by 1, 2, 3, ... until all divide it.
    fn brute_lcm(values: &[(i64, i64)]) -> Rational {
        let rs: Vec<Rational> = values.iter().map(|&(n, d)| r(n, d)).collect();
        let base = rs.iter().max().unwrap().clone();
        for m in 1..10_000 {
            let cand = &base * Rational::integer(m);
            if rs.iter().all(|v| cand.is_multiple_of(v)) {
                return cand;
            }
        }
        unreachable!()
    }

    #[test]
    fn gcd_matches_brute_force_oracle() {
        assert_eq!(brute_gcd(&[(3, 4), (1, 2)]), (1, 4));
        assert_eq!(rat_gcd_set(&[r(3, 4), r(1, 2)]).unwrap(), r(1, 4));
    }

    #[test]
    fn lcm_matches_brute_force_oracle() {
        assert_eq!(brute_lcm(&[(2, 1), (20, 1), (100, 3)]), r(100, 1));
        assert_eq!(rat_lcm_set(&[r(2, 1), r(20, 1), r(100, 3)]).unwrap(), r(100, 1));
        assert_eq!(brute_lcm(&[(1, 2), (1, 3)]), r(1, 1));
        assert_eq!(rat_lcm_set(&[r(1, 2), r(1, 3)]).unwrap(), r(1, 1));
        assert_eq!(rat_lcm_set(&[r(7, 1)]).unwrap(), r(7, 1));
    }

    #[test]
    fn set_operations_reject_empty_and_nonpositive() {
        let empty: [Rational; 0] = [];
        assert_eq!(rat_gcd_set(&empty), Err(RationalError::EmptySet));
        assert_eq!(rat_lcm_set(&empty), Err(RationalError::EmptySet));
        assert!(matches!(
            rat_gcd_set(&[r(0, 1)]),
            Err(RationalError::NotPositive(_))
        ));
    }

    #[test]
    fn decimal_rendering_rounds_half_up() {
        assert_eq!(r(8, 15).to_decimal(2), "0.53");
        assert_eq!(r(28, 15).to_decimal(2), "1.87");
        assert_eq!(r(1, 8).to_decimal(2), "0.13");
        assert_eq!(r(-1, 8).to_decimal(2), "-0.13");
        assert_eq!(r(2, 1).to_decimal(2), "2.00");
        assert_eq!(r(52, 75).to_decimal(2), "0.69");
    }

    #[test]
    fn parse_literals() {
        assert_eq!("3/50".parse::<Rational>().unwrap(), r(3, 50));
        assert_eq!("-7".parse::<Rational>().unwrap(), r(-7, 1));
        assert_eq!("6/4".parse::<Rational>().unwrap(), r(3, 2));
        for bad in ["", "/", "1/", "a", "1/-2", "1.5", "--1", "1/0"] {
            assert!(bad.parse::<Rational>().is_err(), "{bad}");
        }
    }

    #[test]
    fn json_form_round_trips() {
        let v = r(-5054, 75);
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"num":-5054,"den":75,"decimal":"-67.39"}"#);
        let back: Rational = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn sum_of_n_copies_of_one_over_n_is_one() {
        for n in [1i64, 2, 3, 7, 97, 1000, 10_000] {
            let part = r(1, n);
            let total: Rational = std::iter::repeat_n(&part, n as usize).sum();
            assert_eq!(total, Rational::one(), "n = {n}");
        }
    }

    proptest! {
        #[test]
        fn scaling_both_parts_is_identity(a in -1000i64..1000, b in 1i64..1000, k in -50i64..50) {
            prop_assume!(k != 0);
            prop_assert_eq!(r(a, b), r(a * k, b * k));
        }

        #[test]
        fn gcd_and_lcm_divide_exactly(
            parts in proptest::collection::vec((1i64..200, 1i64..30), 1..6)
        ) {
            let values: Vec<Rational> = parts.iter().map(|&(n, d)| r(n, d)).collect();
            let g = rat_gcd_set(&values).unwrap();
            let l = rat_lcm_set(&values).unwrap();
            for v in &values {
                prop_assert!(v.is_multiple_of(&g));
                prop_assert!(l.is_multiple_of(v));
            }
            let (gn, gd) = brute_gcd(&parts);
            prop_assert_eq!(g, r(gn, gd));
        }

        #[test]
        fn arithmetic_is_exact(a in -500i64..500, b in 1i64..60, c in -500i64..500, d in 1i64..60) {
            let x = r(a, b);
            let y = r(c, d);
            prop_assert_eq!(&(&x + &y) - &y, x.clone());
            if !y.is_zero() {
                prop_assert_eq!(&(&x * &y) / &y, x.clone());
            }
            prop_assert_eq!(x < y, a * d < c * b);
        }
    }
}
