//! Exact rationals extended by `+∞`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use super::PlanError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum XRational {
    Finite(BigRational),
    Infinity,
}

impl XRational {
    pub fn int(n: i64) -> Self {
        XRational::Finite(BigRational::from_integer(n.into()))
    }

    pub fn ratio(num: i64, den: i64) -> Result<Self, PlanError> {
        if den == 0 {
            return Err(PlanError::DivisionByZero);
        }
        Ok(XRational::Finite(BigRational::new(num.into(), den.into())))
    }

    pub fn zero() -> Self {
        XRational::Finite(BigRational::zero())
    }

    pub fn one() -> Self {
        XRational::Finite(BigRational::one())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, XRational::Infinity)
    }

    pub fn finite(&self) -> Result<&BigRational, PlanError> {
        match self {
            XRational::Finite(r) => Ok(r),
            XRational::Infinity => Err(PlanError::NotFinite("expected a finite value, got inf".into())),
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            XRational::Finite(r) => r.is_positive(),
            XRational::Infinity => true,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            XRational::Finite(r) => ratio_to_f64(r),
            XRational::Infinity => f64::INFINITY,
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, PlanError> {
        match (self, other) {
            (XRational::Finite(a), XRational::Finite(b)) => Ok(XRational::Finite(a + b)),
            _ => Ok(XRational::Infinity),
        }
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, PlanError> {
        match (self, other) {
            (XRational::Finite(a), XRational::Finite(b)) => Ok(XRational::Finite(a - b)),
            (XRational::Infinity, XRational::Finite(_)) => Ok(XRational::Infinity),
            _ => Err(PlanError::Undefined(format!("{self} - {other}"))),
        }
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, PlanError> {
        match (self, other) {
            (XRational::Finite(a), XRational::Finite(b)) => Ok(XRational::Finite(a * b)),
            (XRational::Infinity, x) | (x, XRational::Infinity) => {
                if x.is_positive() {
                    Ok(XRational::Infinity)
                } else {
                    Err(PlanError::Undefined(format!("{self} * {other}")))
                }
            }
        }
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, PlanError> {
        match (self, other) {
            (_, XRational::Finite(b)) if b.is_zero() => Err(PlanError::DivisionByZero),
            (XRational::Finite(a), XRational::Finite(b)) => Ok(XRational::Finite(a / b)),
            (XRational::Finite(_), XRational::Infinity) => Ok(XRational::zero()),
            (XRational::Infinity, XRational::Finite(b)) if b.is_positive() => Ok(XRational::Infinity),
            _ => Err(PlanError::Undefined(format!("{self} / {other}"))),
        }
    }

    /// `t' = t/(t-1)` with `1' = ∞` and `∞' = 1`; undefined below 1.
    pub fn conj(&self) -> Result<Self, PlanError> {
        match self {
            XRational::Infinity => Ok(XRational::one()),
            XRational::Finite(t) => {
                let one = BigRational::one();
                match t.cmp(&one) {
                    Ordering::Less => Err(PlanError::InvalidConjugate(t.to_string())),
                    Ordering::Equal => Ok(XRational::Infinity),
                    Ordering::Greater => Ok(XRational::Finite(t / (t - one))),
                }
            }
        }
    }

    pub fn recip(&self) -> Result<Self, PlanError> {
        XRational::one().checked_div(self)
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Midpoint of two values; an infinite upper end is replaced by `lo + 1`.
    pub fn midpoint(lo: &Self, hi: &Self) -> Result<Self, PlanError> {
        let lo = lo.finite()?;
        let mid = match hi {
            XRational::Infinity => lo + BigRational::one(),
            XRational::Finite(h) => (lo + h) / BigRational::from_integer(2.into()),
        };
        Ok(XRational::Finite(mid))
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    // Scale so both parts fit comfortably before dividing.
    let (n, d) = (r.numer(), r.denom());
    let shift = n.bits().max(d.bits()).saturating_sub(1000);
    let n: f64 = (n >> shift).to_string().parse().unwrap_or(f64::NAN);
    let d: f64 = (d >> shift).to_string().parse().unwrap_or(f64::NAN);
    n / d
}

impl From<BigRational> for XRational {
    fn from(r: BigRational) -> Self {
        XRational::Finite(r)
    }
}

impl From<i64> for XRational {
    fn from(n: i64) -> Self {
        XRational::int(n)
    }
}

impl PartialOrd for XRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for XRational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (XRational::Finite(a), XRational::Finite(b)) => a.cmp(b),
            (XRational::Finite(_), XRational::Infinity) => Ordering::Less,
            (XRational::Infinity, XRational::Finite(_)) => Ordering::Greater,
            (XRational::Infinity, XRational::Infinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for XRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XRational::Infinity => f.write_str("inf"),
            XRational::Finite(r) if r.is_integer() => write!(f, "{}", r.numer()),
            XRational::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

/// Accepts `6/5`, `-3`, `0.125`, `1e-3`, `inf` and `∞`. Decimals are read
/// exactly, never through a float.
impl FromStr for XRational {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || PlanError::Parse(s.to_string());
        match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "∞" => return Ok(XRational::Infinity),
            "" => return Err(bad()),
            _ => {}
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(PlanError::DivisionByZero);
            }
            return Ok(XRational::Finite(BigRational::new(n, d)));
        }
        let (mantissa, exp) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (t, 0),
        };
        let (neg, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
        if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let all: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
        let ten = BigInt::from(10);
        let scale = exp - frac.len() as i32;
        let mut r = BigRational::from_integer(all);
        if scale >= 0 {
            r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
        } else {
            r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
        }
        Ok(XRational::Finite(if neg { -r } else { r }))
    }
}

impl Serialize for XRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        match self {
            XRational::Infinity => map.serialize_entry("tag", "infinity")?,
            XRational::Finite(r) => {
                map.serialize_entry("num", &r.numer().to_string())?;
                map.serialize_entry("den", &r.denom().to_string())?;
            }
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Tag { tag: String },
    Pair { num: String, den: String },
    Text(String),
}

impl<'de> Deserialize<'de> for XRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match Repr::deserialize(deserializer)? {
            Repr::Tag { tag } if tag == "infinity" => Ok(XRational::Infinity),
            Repr::Tag { tag } => Err(de::Error::custom(format!("unknown tag {tag}"))),
            Repr::Pair { num, den } => format!("{num}/{den}").parse().map_err(de::Error::custom),
            Repr::Text(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(s: &str) -> XRational {
        s.parse().unwrap()
    }

    #[test]
    fn parsing() {
        assert_eq!(x("6/5"), XRational::ratio(6, 5).unwrap());
        assert_eq!(x("0.125"), XRational::ratio(1, 8).unwrap());
        assert_eq!(x("-2.5e-1"), XRational::ratio(-1, 4).unwrap());
        assert_eq!(x("1e3"), XRational::int(1000));
        assert_eq!(x("∞"), XRational::Infinity);
        assert_eq!(x("inf"), XRational::Infinity);
        assert!("1/0".parse::<XRational>().is_err());
        assert!("abc".parse::<XRational>().is_err());
        assert!(".".parse::<XRational>().is_err());
        assert_eq!(x("4/6").to_string(), "2/3");
        assert_eq!(x("4/2").to_string(), "2");
    }

    #[test]
    fn infinity_rules() {
        let inf = XRational::Infinity;
        assert_eq!(x("3").checked_div(&inf).unwrap(), XRational::zero());
        assert_eq!(inf.checked_div(&x("3")).unwrap(), inf);
        assert_eq!(inf.conj().unwrap(), XRational::one());
        assert_eq!(XRational::one().conj().unwrap(), inf);
        assert!(inf.checked_sub(&inf).is_err());
        assert!(inf.checked_mul(&XRational::zero()).is_err());
        assert!(x("2").checked_div(&XRational::zero()).is_err());
        assert!(x("1/2").conj().is_err());
        assert!(x("1000000") < inf);
    }

    #[test]
    fn serde_round_trip() {
        for v in [x("6/5"), x("-3"), XRational::Infinity] {
            let s = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<XRational>(&s).unwrap(), v);
        }
        assert_eq!(serde_json::to_string(&x("6/5")).unwrap(), r#"{"num":"6","den":"5"}"#);
        assert_eq!(serde_json::to_string(&XRational::Infinity).unwrap(), r#"{"tag":"infinity"}"#);
    }

    proptest! {
        #[test]
        fn conjugation_is_an_involution(n in 1i64..10_000, d in 1i64..10_000) {
            let t = XRational::ratio(n + d, d).unwrap();
            prop_assert_eq!(t.conj().unwrap().conj().unwrap(), t);
        }

        #[test]
        fn conjugate_exponents_satisfy_holder_relation(n in 1i64..10_000, d in 1i64..10_000) {
            let t = XRational::ratio(n + d, d).unwrap();
            let sum = t.recip().unwrap().checked_add(&t.conj().unwrap().recip().unwrap()).unwrap();
            prop_assert_eq!(sum, XRational::one());
        }

        #[test]
        fn decimal_parsing_matches_fraction(n in -100_000i64..100_000) {
            let dec = format!("{}{}.{:03}", if n < 0 { "-" } else { "" }, n.abs() / 1000, n.abs() % 1000);
            prop_assert_eq!(x(&dec), XRational::ratio(n, 1000).unwrap());
        }
    }
}
