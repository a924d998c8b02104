//! 8-bit raster images: binary PGM (P5), PPM (P6) and PNG.

use std::io::Cursor;

use crate::error::{FormatError, Result};

/// Row-major 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Pnm,
    Png,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FormatError::UnsupportedImage("zero-sized image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(FormatError::UnsupportedImage(format!("{channels} channels")));
        }
        if data.len() != width * height * channels {
            return Err(FormatError::UnsupportedImage(format!(
                "{} bytes for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Mean over channels.
    pub fn luma(&self, x: usize, y: usize) -> u8 {
        let p = self.pixel(x, y);
        (p.iter().map(|&v| v as u32).sum::<u32>() / p.len() as u32) as u8
    }

    pub fn to_rgb(&self) -> Raster {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Raster { width: self.width, height: self.height, channels: 3, data }
    }

    /// File extension matching [`Raster::to_pnm`].
    pub fn pnm_extension(&self) -> &'static str {
        if self.channels == 1 {
            "pgm"
        } else {
            "ppm"
        }
    }

    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(if self.channels == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc
                .write_header()
                .map_err(|e| FormatError::UnsupportedImage(e.to_string()))?;
            writer
                .write_image_data(&self.data)
                .map_err(|e| FormatError::UnsupportedImage(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn encode(&self, format: RasterFormat) -> Result<Vec<u8>> {
        match format {
            RasterFormat::Pnm => Ok(self.to_pnm()),
            RasterFormat::Png => self.to_png(),
        }
    }

    /// Decodes PGM/PPM (P5/P6) or PNG, sniffed from the leading bytes.
    pub fn decode(bytes: &[u8]) -> Result<Raster> {
        match sniff(bytes)? {
            RasterFormat::Pnm => decode_pnm(bytes),
            RasterFormat::Png => decode_png(bytes),
        }
    }
}

pub fn sniff(bytes: &[u8]) -> Result<RasterFormat> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        Ok(RasterFormat::Png)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        Ok(RasterFormat::Pnm)
    } else {
        Err(FormatError::UnsupportedImage("expected a PGM, PPM or PNG image".into()))
    }
}

/// Width and height read from the header alone.
pub fn peek_dims(bytes: &[u8]) -> Result<(usize, usize)> {
    match sniff(bytes)? {
        RasterFormat::Pnm => {
            let h = parse_pnm_header(bytes)?;
            Ok((h.width, h.height))
        }
        RasterFormat::Png => {
            let decoder = png::Decoder::new(Cursor::new(bytes));
            let reader = decoder
                .read_info()
                .map_err(|e| FormatError::UnsupportedImage(e.to_string()))?;
            let info = reader.info();
            Ok((info.width as usize, info.height as usize))
        }
    }
}

struct PnmHeader {
    channels: usize,
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    let bad = |m: &str| FormatError::UnsupportedImage(format!("PNM header: {m}"));
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(bad("unknown magic")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("expected a number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("number out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing separator before raster"));
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit maxval is supported"));
    }
    Ok(PnmHeader { channels, width, height, maxval, data_start: pos + 1 })
}

fn decode_pnm(bytes: &[u8]) -> Result<Raster> {
    let h = parse_pnm_header(bytes)?;
    let n = h
        .width
        .checked_mul(h.height)
        .and_then(|v| v.checked_mul(h.channels))
        .ok_or_else(|| FormatError::UnsupportedImage("dimensions overflow".into()))?;
    let payload = bytes
        .get(h.data_start..h.data_start + n)
        .ok_or_else(|| FormatError::UnsupportedImage("truncated raster".into()))?;
    let data = if h.maxval == 255 {
        payload.to_vec()
    } else {
        payload
            .iter()
            .map(|&v| ((v.min(h.maxval as u8) as usize * 255 + h.maxval / 2) / h.maxval) as u8)
            .collect()
    };
    Raster::new(h.width, h.height, h.channels, data)
}

fn decode_png(bytes: &[u8]) -> Result<Raster> {
    let err = |e: png::DecodingError| FormatError::UnsupportedImage(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| FormatError::UnsupportedImage("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width as usize, info.height as usize);
    let data = match info.color_type {
        png::ColorType::Grayscale => buf,
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|p| p[0]).collect(),
        png::ColorType::Rgb => return Raster::new(w, h, 3, buf),
        png::ColorType::Rgba => {
            return Raster::new(w, h, 3, buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect())
        }
        png::ColorType::Indexed => {
            return Err(FormatError::UnsupportedImage("unexpanded palette PNG".into()))
        }
    };
    Raster::new(w, h, 1, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(channels: usize) -> Raster {
        let data = (0..4 * 3 * channels).map(|i| (i * 17 % 256) as u8).collect();
        Raster::new(4, 3, channels, data).unwrap()
    }

    #[test]
    fn pnm_round_trip() {
        for c in [1, 3] {
            let r = sample(c);
            assert_eq!(Raster::decode(&r.to_pnm()).unwrap(), r);
        }
    }

    #[test]
    fn png_round_trip() {
        for c in [1, 3] {
            let r = sample(c);
            assert_eq!(Raster::decode(&r.to_png().unwrap()).unwrap(), r);
            assert_eq!(peek_dims(&r.to_png().unwrap()).unwrap(), (4, 3));
        }
    }

    #[test]
    fn header_comments_and_maxval() {
        let bytes = b"P5\n# made by hand\n2 1\n# another\n15\n\x00\x0f";
        let r = Raster::decode(bytes).unwrap();
        assert_eq!(r.data(), &[0, 255]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Raster::decode(b"").is_err());
        assert!(Raster::decode(b"GIF89a").is_err());
        assert!(Raster::decode(b"P5 2 2 255\n\x00").is_err());
        assert!(Raster::decode(b"P5 2 2 65535\n").is_err());
    }
}
