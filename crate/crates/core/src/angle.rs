//! Rational angles in R/Z (measured in turns) and their orbits under
//! multiplication by the degree.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A rational angle `num/den` in `[0, 1)`, always reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Angle {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Angle {
    /// Builds `num/den` reduced modulo 1.
    pub fn new(num: i64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidAngle("zero denominator".into()));
        }
        if den > (1 << 62) {
            return Err(Error::InvalidAngle(format!("denominator {den} too large")));
        }
        let num = num.rem_euclid(den as i64) as u64;
        let g = gcd(num, den).max(1);
        Ok(Angle {
            num: num / g,
            den: den / g,
        })
    }

    pub const fn zero() -> Self {
        Angle { num: 0, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `d·θ mod 1`.
    pub fn mul(&self, d: u64) -> Self {
        let n = (self.num as u128 * d as u128 % self.den as u128) as u64;
        let g = gcd(n, self.den).max(1);
        Angle {
            num: n / g,
            den: self.den / g,
        }
    }

    /// The fractional part of `d^k·θ`, computed exactly before rounding.
    pub fn scaled_frac(&self, d: u64, k: u32) -> f64 {
        let q = self.den as u128;
        let mut base = d as u128 % q;
        let mut e = k;
        let mut acc: u128 = 1 % q;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % q;
            }
            base = base * base % q;
            e >>= 1;
        }
        let n = acc * self.num as u128 % q;
        n as f64 / self.den as f64
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Angle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidAngle(format!("cannot parse angle {s:?}; expected \"p/q\""));
        match s.split_once('/') {
            Some((p, q)) => {
                let p: i64 = p.trim().parse().map_err(|_| bad())?;
                let q: u64 = q.trim().parse().map_err(|_| bad())?;
                Angle::new(p, q)
            }
            None => {
                let p: i64 = s.parse().map_err(|_| bad())?;
                Angle::new(p, 1)
            }
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Orbit of an angle under `θ ↦ dθ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TupleOrbit {
    pub preperiod: usize,
    pub period: usize,
    /// `θ, dθ, d²θ, …` up to (excluding) the first repetition.
    pub orbit: Vec<Angle>,
}

/// Computes preperiod, period and orbit of `θ` under d-tupling.
pub fn tuple_orbit(theta: Angle, d: u64) -> TupleOrbit {
    let mut seen: HashMap<Angle, usize> = HashMap::new();
    let mut orbit = Vec::new();
    let mut a = theta;
    loop {
        if let Some(&i) = seen.get(&a) {
            return TupleOrbit {
                preperiod: i,
                period: orbit.len() - i,
                orbit,
            };
        }
        seen.insert(a, orbit.len());
        orbit.push(a);
        a = a.mul(d);
    }
}

/// `x mod 1` in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Counterclockwise length of the arc from `start` to `end`, in `[0, 1)`.
#[inline]
pub fn arc_length(start: f64, end: f64) -> f64 {
    frac(end - start)
}

/// Whether `x` lies in the open counterclockwise arc from `start` to `end`.
/// An arc with `start == end` is empty.
#[inline]
pub fn arc_contains(start: f64, end: f64, x: f64) -> bool {
    let len = arc_length(start, end);
    let off = frac(x - start);
    off > 0.0 && off < len
}

/// Signed difference `a - b` reduced to `(-1/2, 1/2]`.
#[inline]
pub fn turn_diff(a: f64, b: f64) -> f64 {
    let t = frac(a - b);
    if t > 0.5 {
        t - 1.0
    } else {
        t
    }
}
