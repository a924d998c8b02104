//! DKF1 field files: `"DKF1"`, then little-endian `u32` width, height and
//! channels, then `width * height * channels` little-endian `f32` values in
//! row-major, channel-interleaved order.

use dragkit_core::{Point2, VectorField};

use crate::error::{FormatError, Result};

pub const MAGIC: &[u8; 4] = b"DKF1";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub values: Vec<f32>,
}

impl FieldFile {
    pub fn new(width: u32, height: u32, channels: u32, values: Vec<f32>) -> Result<Self> {
        let expected = width as u64 * height as u64 * channels as u64;
        if values.len() as u64 != expected {
            return Err(FormatError::MalformedField(format!(
                "{} values for {width}x{height}x{channels}",
                values.len()
            )));
        }
        Ok(Self { width, height, channels, values })
    }

    /// Two channels `(dx, dy)` per cell, narrowed to `f32`.
    pub fn from_vector_field(field: &VectorField) -> Self {
        let values = field.vectors().iter().flat_map(|v| [v.x as f32, v.y as f32]).collect();
        Self { width: field.width() as u32, height: field.height() as u32, channels: 2, values }
    }

    pub fn to_vector_field(&self) -> Result<VectorField> {
        if self.channels != 2 {
            return Err(FormatError::MalformedField(format!("{} channels, expected 2", self.channels)));
        }
        let vectors = self
            .values
            .chunks_exact(2)
            .map(|v| Point2::new(v[0] as f64, v[1] as f64))
            .collect();
        Ok(VectorField::from_vectors(self.width as usize, self.height as usize, vectors)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 4);
        out.extend_from_slice(MAGIC);
        for v in [self.width, self.height, self.channels] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(FormatError::MalformedField("missing DKF1 header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let (width, height, channels) = (word(4), word(8), word(12));
        let payload = &bytes[HEADER_LEN..];
        let expected = width as u64 * height as u64 * channels as u64 * 4;
        if payload.len() as u64 != expected {
            return Err(FormatError::MalformedField(format!(
                "payload is {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { width, height, channels, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_little_endian() {
        let f = FieldFile::new(1, 1, 1, vec![1.0]).unwrap();
        assert_eq!(
            f.to_bytes(),
            [b'D', b'K', b'F', b'1', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f]
        );
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(FieldFile::new(2, 2, 2, vec![0.0; 7]).is_err());
        let mut bytes = FieldFile::new(1, 1, 2, vec![0.5, -0.5]).unwrap().to_bytes();
        bytes.pop();
        assert!(FieldFile::from_bytes(&bytes).is_err());
        assert!(FieldFile::from_bytes(b"DKF2\0\0\0\0\0\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn vector_field_round_trip() {
        let field = VectorField::from_vectors(2, 1, vec![Point2::new(-3.0, 0.0), Point2::new(0.25, 1.5)]).unwrap();
        let file = FieldFile::from_vector_field(&field);
        assert_eq!(file.values, vec![-3.0, 0.0, 0.25, 1.5]);
        assert_eq!(file.to_vector_field().unwrap(), field);
    }
}
