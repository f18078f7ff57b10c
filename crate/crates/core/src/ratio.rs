//! Non-negative rationals for rates, fractions and multipliers.

use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use alloc::string::{String, ToString};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative rational `num / den`, always stored in lowest terms.
///
/// Textual form is `"a/b"`, `"a"` or a plain decimal such as `"0.20"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: u64,
    den: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid ratio {0:?}")]
pub struct ParseRatioError(pub String);

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    /// Builds a reduced ratio. Returns `None` for a zero denominator or when
    /// the reduced terms do not fit in `u64`.
    pub fn new(num: u64, den: u64) -> Option<Ratio> {
        Self::from_u128(num as u128, den as u128)
    }

    fn from_u128(num: u128, den: u128) -> Option<Ratio> {
        if den == 0 {
            return None;
        }
        if num == 0 {
            return Some(Ratio::ZERO);
        }
        let g = gcd(num, den);
        let (n, d) = (num / g, den / g);
        Some(Ratio {
            num: u64::try_from(n).ok()?,
            den: u64::try_from(d).ok()?,
        })
    }

    pub const fn integer(n: u64) -> Ratio {
        Ratio { num: n, den: 1 }
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// `floor(self * x)`.
    pub fn mul_floor(self, x: u64) -> u64 {
        let v = (x as u128) * (self.num as u128) / (self.den as u128);
        u64::try_from(v).unwrap_or(u64::MAX)
    }

    /// `ceil(self * x)`.
    pub fn mul_ceil(self, x: u64) -> u64 {
        let p = (x as u128) * (self.num as u128);
        let v = p.div_ceil(self.den as u128);
        u64::try_from(v).unwrap_or(u64::MAX)
    }

    /// `floor(x / self)`; `None` when `self` is zero.
    pub fn div_floor(self, x: u64) -> Option<u64> {
        if self.num == 0 {
            return None;
        }
        let v = (x as u128) * (self.den as u128) / (self.num as u128);
        Some(u64::try_from(v).unwrap_or(u64::MAX))
    }

    pub fn checked_mul(self, other: Ratio) -> Option<Ratio> {
        Self::from_u128(
            self.num as u128 * other.num as u128,
            self.den as u128 * other.den as u128,
        )
    }

    pub fn checked_add(self, other: Ratio) -> Option<Ratio> {
        Self::from_u128(
            self.num as u128 * other.den as u128 + other.num as u128 * self.den as u128,
            self.den as u128 * other.den as u128,
        )
    }

    pub fn le_one(self) -> bool {
        self.num <= self.den
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::ZERO
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Ratio {
    type Err = ParseRatioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRatioError(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| err())?;
            let d: u64 = d.trim().parse().map_err(|_| err())?;
            return Ratio::new(n, d).ok_or_else(err);
        }
        if let Some((int, frac)) = t.split_once('.') {
            if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let int: u64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| err())?
            };
            let frac_v: u64 = frac.parse().map_err(|_| err())?;
            let scale = 10u128.pow(frac.len() as u32);
            let num = int as u128 * scale + frac_v as u128;
            return Ratio::from_u128(num, scale).ok_or_else(err);
        }
        let n: u64 = t.parse().map_err(|_| err())?;
        Ok(Ratio::integer(n))
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Ratio;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a ratio such as \"1/5\", \"0.2\" or a non-negative integer")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Ratio, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Ratio, E> {
                Ok(Ratio::integer(v))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Ratio, E> {
                u64::try_from(v)
                    .map(Ratio::integer)
                    .map_err(|_| E::custom("ratio must be non-negative"))
            }
        }
        d.deserialize_any(V)
    }
}

/// Formats `num / den` rounded half-up to four decimals, e.g. `"0.3333"`.
pub fn fixed4(num: u128, den: u128) -> String {
    if den == 0 {
        return String::from("0.0000");
    }
    let scaled = (num * 10_000 * 2 + den) / (den * 2);
    alloc::format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
}
