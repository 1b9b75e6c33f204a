//! Exact rational numbers: parsing, rendering and small numeric helpers.
//!
//! Every quantity in the crate is a [`Rat`]. Inputs are accepted either as
//! decimal strings (`"0.85"`, `"-2"`) or as fractions (`"17/20"`); outputs are
//! rendered as terminating decimals whenever the reduced denominator has only
//! the prime factors 2 and 5, and as `p/q` otherwise.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Rat = BigRational;

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"0.85"`, `"-.5"`, `"3"`, `"3/5"` into an exact rational.
pub fn parse_rat(text: &str) -> Result<Rat> {
    let s = text.trim();
    let bad = || Error::Parse(format!("invalid rational literal {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad())?;
        let d: BigInt = den.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rat::new(n, d));
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let value = Rat::new(numer, denom);
    Ok(if negative { -value } else { value })
}

/// Renders a rational exactly. Integers keep one fractional digit (`0.0`,
/// `1.0`) so scalar orbits print the way they are usually tabulated.
pub fn format_rat(value: &Rat) -> String {
    let denom = value.denom();
    let mut rest = denom.clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let mut twos = 0usize;
    let mut fives = 0usize;
    while rest.is_even() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", value.numer(), denom);
    }
    let places = twos.max(fives).max(1);
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = (value.abs() * Rat::from_integer(scale.clone())).to_integer();
    let (whole, frac) = scaled.div_rem(&scale);
    let mut frac = format!("{frac:0>places$}");
    while frac.len() > 1 && frac.ends_with('0') {
        frac.pop();
    }
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{whole}.{frac}")
}

pub fn format_vec(values: &[Rat]) -> String {
    let parts: Vec<String> = values.iter().map(format_rat).collect();
    format!("({})", parts.join(", "))
}

/// Rounds to the nearest integer, ties going to the even neighbour.
pub fn round_half_even(value: &Rat) -> BigInt {
    let floor = value.floor().to_integer();
    let frac = value - Rat::from_integer(floor.clone());
    let half = ratio(1, 2);
    if frac < half {
        floor
    } else if frac > half {
        floor + 1
    } else if floor.is_even() {
        floor
    } else {
        floor + 1
    }
}

/// Rounds to the nearest integer, ties going up.
pub fn round_half_up(value: &Rat) -> BigInt {
    (value + ratio(1, 2)).floor().to_integer()
}

/// Reduces into `[0, 1)`.
pub fn frac_part(value: &Rat) -> Rat {
    value - value.floor()
}

/// Deterministic 64-bit seed from a base seed and a byte tag.
pub fn derive_seed(base: u64, tag: &[u8]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(tag);
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derive_seed_indexed(base: u64, index: u64) -> u64 {
    derive_seed(base, &index.to_le_bytes())
}

/// Serde adapter storing a rational as its exact string form.
pub mod serde_rat {
    use super::{format_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rat, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rat(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rat, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_rat(&text).map_err(serde::de::Error::custom)
    }
}

pub mod serde_rat_opt {
    use super::{format_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<Rat>, serializer: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => serializer.serialize_some(&format_rat(v)),
            None => serializer.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<Rat>, D::Error> {
        Option::<String>::deserialize(deserializer)?
            .map(|text| parse_rat(&text).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub mod serde_rat_vec {
    use super::{format_rat, parse_rat, Rat};
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[Rat], serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&format_rat(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Rat>, D::Error> {
        Vec::<String>::deserialize(deserializer)?
            .iter()
            .map(|text| parse_rat(text).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_rat("0.85").unwrap(), ratio(85, 100));
        assert_eq!(parse_rat("-0.2").unwrap(), ratio(-1, 5));
        assert_eq!(parse_rat("3/5").unwrap(), ratio(3, 5));
        assert_eq!(parse_rat(" 2 ").unwrap(), int(2));
        assert_eq!(parse_rat(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rat("1.").unwrap(), int(1));
        for bad in ["", "-", ".", "abc", "1/0", "0.5.5", "1e-3", "0x10"] {
            assert!(parse_rat(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn formats_terminating_and_repeating() {
        assert_eq!(format_rat(&int(0)), "0.0");
        assert_eq!(format_rat(&int(1)), "1.0");
        assert_eq!(format_rat(&ratio(3, 5)), "0.6");
        assert_eq!(format_rat(&ratio(11, 20)), "0.55");
        assert_eq!(format_rat(&ratio(-1, 8)), "-0.125");
        assert_eq!(format_rat(&ratio(4, 3)), "4/3");
        assert_eq!(format_rat(&ratio(-2, 3)), "-2/3");
        assert_eq!(format_rat(&ratio(7, 2)), "3.5");
    }

    #[test]
    fn tie_breaking() {
        assert_eq!(round_half_even(&ratio(17, 2)), BigInt::from(8));
        assert_eq!(round_half_even(&ratio(19, 2)), BigInt::from(10));
        assert_eq!(round_half_even(&ratio(11, 2)), BigInt::from(6));
        assert_eq!(round_half_even(&ratio(-1, 2)), BigInt::from(0));
        assert_eq!(round_half_even(&ratio(-3, 2)), BigInt::from(-2));
        assert_eq!(round_half_even(&ratio(13, 10)), BigInt::from(1));
        assert_eq!(round_half_up(&ratio(17, 2)), BigInt::from(9));
        assert_eq!(round_half_up(&ratio(-1, 2)), BigInt::from(0));
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed_indexed(42, 0), derive_seed_indexed(42, 0));
        assert_ne!(derive_seed_indexed(42, 0), derive_seed_indexed(42, 1));
        assert_ne!(derive_seed_indexed(42, 0), derive_seed_indexed(43, 0));
    }

    proptest::proptest! {
        #[test]
        fn render_then_parse_is_identity(n in -100_000i64..100_000, d in 1i64..5_000) {
            let value = ratio(n, d);
            proptest::prop_assert_eq!(parse_rat(&format_rat(&value)).unwrap(), value);
        }
    }
}
