use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ChainError;
use crate::del::EmbeddingVector;
use crate::poi::Digest;
use crate::poi::wire::FieldWriter;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusParams {
    /// Problem-definition period, in ticks.
    pub t_p: u64,
    /// Competition period, in ticks.
    pub t_b: u64,
    /// Improvement margin δ.
    pub delta: f64,
    /// Reward shape parameter `a`.
    pub a: f64,
    /// Best distance before the first improvement.
    pub d_0: f64,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        Self {
            t_p: 4,
            t_b: 8,
            delta: 0.005,
            a: 3.0,
            d_0: 1.0,
        }
    }
}

impl ConsensusParams {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.t_p == 0 || self.t_b == 0 {
            return Err(ChainError::Contract("T_p and T_b must be at least 1 tick".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(ChainError::Contract(format!("delta={} must be non-negative", self.delta)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(ChainError::Contract(format!("reward shape a={} must be positive", self.a)));
        }
        if !(self.d_0 > 0.0 && self.d_0 <= 1.0) {
            return Err(ChainError::Contract(format!("d_0={} must lie in (0, 1]", self.d_0)));
        }
        Ok(())
    }

    pub(crate) fn write(&self, w: FieldWriter) -> FieldWriter {
        w.u64_field(self.t_p)
            .u64_field(self.t_b)
            .f64_field(self.delta)
            .f64_field(self.a)
            .f64_field(self.d_0)
    }
}

/// What a problem asks for: `m` test inputs, `C` output classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDefinition {
    pub id: String,
    /// Free-form description of the test inputs.
    pub input_spec: String,
    pub num_classes: u16,
    pub m: usize,
}

impl ProblemDefinition {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.num_classes < 2 || self.m < 1 {
            return Err(ChainError::Contract(format!(
                "problem needs C >= 2 and m >= 1, got C={} m={}",
                self.num_classes, self.m
            )));
        }
        Ok(())
    }

    pub(crate) fn write(&self, w: FieldWriter) -> FieldWriter {
        w.field(self.id.as_bytes())
            .field(self.input_spec.as_bytes())
            .field(&self.num_classes.to_be_bytes())
            .u64_field(self.m as u64)
    }
}

/// A published test set: references to the inputs and the DEL function,
/// and the embedding `y_t` of the hidden labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTuple {
    pub z_ref: Digest,
    pub f_ref: Digest,
    pub y_t: EmbeddingVector<f64>,
}

impl TestTuple {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.write(FieldWriter::new()).finish()
    }

    pub(crate) fn write(&self, w: FieldWriter) -> FieldWriter {
        w.field(&self.z_ref.0).field(&self.f_ref.0).f64s_field(self.y_t.values())
    }

    pub fn digest(&self) -> Digest {
        crate::poi::digest(&self.canonical_bytes())
    }
}

/// Token balance in units of 10⁻¹² tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TokenAmount(pub i128);

impl TokenAmount {
    pub const DECIMALS: u32 = 12;
    pub const UNIT: i128 = 1_000_000_000_000;
    pub const ZERO: TokenAmount = TokenAmount(0);

    /// Rounds `value · 10¹²` half-to-even.
    pub fn from_real(value: f64) -> Result<Self, ChainError> {
        let scaled = value * Self::UNIT as f64;
        if !scaled.is_finite() || scaled.abs() > i128::MAX as f64 / 2.0 {
            return Err(ChainError::Contract(format!("token amount {value} not representable")));
        }
        Ok(TokenAmount(scaled.round_ties_even() as i128))
    }

    pub fn to_real(self) -> f64 {
        self.0 as f64 / Self::UNIT as f64
    }

    pub fn units(self) -> i128 {
        self.0
    }
}

impl Add for TokenAmount {
    type Output = TokenAmount;

    fn add(self, rhs: TokenAmount) -> TokenAmount {
        TokenAmount(self.0 + rhs.0)
    }
}

impl AddAssign for TokenAmount {
    fn add_assign(&mut self, rhs: TokenAmount) {
        self.0 += rhs.0;
    }
}

impl fmt::Display for TokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let unit = Self::UNIT as u128;
        write!(f, "{sign}{}.{:012}", abs / unit, abs % unit)
    }
}

impl FromStr for TokenAmount {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ChainError::Contract(format!("malformed token amount {s:?}"));
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() || frac.len() > Self::DECIMALS as usize {
            return Err(bad());
        }
        let int: i128 = int.parse().map_err(|_| bad())?;
        let frac_units: i128 = if frac.is_empty() {
            0
        } else {
            let parsed: i128 = frac.parse().map_err(|_| bad())?;
            parsed * 10i128.pow(Self::DECIMALS - frac.len() as u32)
        };
        let v = int * Self::UNIT + frac_units;
        Ok(TokenAmount(if neg { -v } else { v }))
    }
}

impl Serialize for TokenAmount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TokenAmount {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
