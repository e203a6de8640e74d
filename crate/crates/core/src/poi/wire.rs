//! Length-prefixed field concatenation: each field is a big-endian `u32`
//! byte length followed by the bytes.

use super::PoiError;

#[derive(Debug, Default)]
pub(crate) struct FieldWriter {
    buf: Vec<u8>,
}

impl FieldWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, bytes: &[u8]) -> Self {
        let len = u32::try_from(bytes.len()).expect("field shorter than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn f64_field(self, v: f64) -> Self {
        self.field(&v.to_bits().to_be_bytes())
    }

    pub fn u64_field(self, v: u64) -> Self {
        self.field(&v.to_be_bytes())
    }

    pub fn f64s_field(self, values: &[f64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_bits().to_be_bytes()).collect();
        self.field(&bytes)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct FieldReader<'a> {
    rest: &'a [u8],
}

impl<'a> FieldReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { rest: bytes }
    }

    pub fn field(&mut self) -> Result<&'a [u8], PoiError> {
        if self.rest.len() < 4 {
            return Err(PoiError::Encoding("truncated length prefix".into()));
        }
        let (len, rest) = self.rest.split_at(4);
        let len = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
        if rest.len() < len {
            return Err(PoiError::Encoding(format!("field claims {len} bytes, {} remain", rest.len())));
        }
        let (field, rest) = rest.split_at(len);
        self.rest = rest;
        Ok(field)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], PoiError> {
        let f = self.field()?;
        f.try_into()
            .map_err(|_| PoiError::Encoding(format!("expected a {N}-byte field, got {}", f.len())))
    }

    pub fn tag(&mut self, expected: &[u8]) -> Result<(), PoiError> {
        let f = self.field()?;
        if f == expected {
            Ok(())
        } else {
            Err(PoiError::Encoding(format!(
                "unexpected type tag {:?}",
                String::from_utf8_lossy(f)
            )))
        }
    }

    pub fn f64(&mut self) -> Result<f64, PoiError> {
        Ok(f64::from_bits(u64::from_be_bytes(self.array::<8>()?)))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, PoiError> {
        let f = self.field()?;
        if f.len() % 8 != 0 {
            return Err(PoiError::Encoding(format!("float array of {} bytes", f.len())));
        }
        Ok(f.chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_be_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }

    pub fn finish(self) -> Result<(), PoiError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(PoiError::Encoding(format!("{} trailing bytes", self.rest.len())))
        }
    }
}

/// Serde helpers rendering fixed-size byte arrays as lowercase hex.
pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer, de::Error};

    pub fn serialize<S: Serializer, const N: usize>(v: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(D::Error::custom)?;
        bytes
            .try_into()
            .map_err(|b: Vec<u8>| D::Error::custom(format!("expected {N} bytes, got {}", b.len())))
    }
}
