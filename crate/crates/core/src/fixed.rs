//! Four-decimal fixed-point values on the unit interval.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of scaled units in 1.0000.
pub const SCALE: u16 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedError {
    #[error("scaled value {0} exceeds {SCALE}")]
    OutOfRange(u32),
    #[error("real value {0} is outside [0, 1]")]
    RealOutOfRange(f64),
    #[error("cannot parse {0:?} as a 4-decimal unit value")]
    Parse(String),
}

/// A value in `[0, 1]` stored as an integer count of 1/10000ths.
///
/// All comparisons are exact integer comparisons, which is what the trust
/// update's equality branch relies on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Fixed4(u16);

impl Fixed4 {
    pub const ZERO: Fixed4 = Fixed4(0);
    pub const ONE: Fixed4 = Fixed4(SCALE);
    pub const HALF: Fixed4 = Fixed4(SCALE / 2);

    /// Builds a value from its scaled representation (`0..=10000`).
    pub fn from_scaled(scaled: u32) -> Result<Self, FixedError> {
        if scaled > SCALE as u32 {
            return Err(FixedError::OutOfRange(scaled));
        }
        Ok(Fixed4(scaled as u16))
    }

    /// Const constructor for literals; panics at compile time when out of range.
    pub const fn lit(scaled: u16) -> Self {
        assert!(scaled <= SCALE);
        Fixed4(scaled)
    }

    /// Quantizes a real in `[0, 1]` with round-half-up on the scaled value.
    pub fn from_f64(value: f64) -> Result<Self, FixedError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(FixedError::RealOutOfRange(value));
        }
        Ok(Fixed4((value * SCALE as f64 + 0.5).floor().min(SCALE as f64) as u16))
    }

    /// Clips to `[0, 1]` before quantizing. NaN maps to zero.
    pub fn saturating_from_f64(value: f64) -> Self {
        if value.is_nan() {
            return Fixed4::ZERO;
        }
        Fixed4::from_f64(value.clamp(0.0, 1.0)).expect("clamped")
    }

    pub const fn scaled(self) -> u16 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    /// `max(0, self - rhs)`
    pub fn saturating_sub(self, rhs: Fixed4) -> Fixed4 {
        Fixed4(self.0.saturating_sub(rhs.0))
    }

    /// `min(1, self + rhs)`
    pub fn saturating_add(self, rhs: Fixed4) -> Fixed4 {
        Fixed4((self.0 + rhs.0).min(SCALE))
    }

    /// Every representable value, ascending: 0.0000, 0.0001, ..., 1.0000.
    pub fn grid() -> impl DoubleEndedIterator<Item = Fixed4> + ExactSizeIterator {
        (0..=SCALE).map(Fixed4)
    }
}

impl TryFrom<u32> for Fixed4 {
    type Error = FixedError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Fixed4::from_scaled(value)
    }
}

impl From<Fixed4> for u32 {
    fn from(value: Fixed4) -> Self {
        value.0 as u32
    }
}

impl fmt::Display for Fixed4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:04}", self.0 / SCALE, self.0 % SCALE)
    }
}

impl FromStr for Fixed4 {
    type Err = FixedError;

    /// Accepts `1`, `0.5`, `0.1234`; more than four decimals is rejected
    /// rather than rounded.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FixedError::Parse(s.to_owned());
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() || int.len() > 1 || frac.len() > 4 {
            return Err(err());
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let int: u32 = int.parse().map_err(|_| err())?;
        let mut frac_scaled = 0u32;
        for (i, b) in frac.bytes().enumerate() {
            frac_scaled += (b - b'0') as u32 * 10u32.pow(3 - i as u32);
        }
        Fixed4::from_scaled(int * SCALE as u32 + frac_scaled).map_err(|_| err())
    }
}
