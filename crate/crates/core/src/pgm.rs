//! Binary greymap (PGM P5) encoding with 8-bit samples.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `round(v * 255)` after clamping to `[0, 1]`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes raw 8-bit samples as a P5 file with a `255` maxval.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if width * height != pixels.len() || width == 0 || height == 0 {
        return Err(Error::shape(
            "encode_pgm",
            format!(
                "{width}x{height} needs {} samples, got {}",
                width * height,
                pixels.len()
            ),
        ));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

/// Encodes an `[H, W]` tensor with values in `[0, 1]`.
pub fn encode_image(img: &Tensor) -> Result<Vec<u8>> {
    let (h, w) = img.dims2("encode_image")?;
    let px: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    encode_pgm(w, h, &px)
}

/// Parsed P5 file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u8>,
}

impl Pgm {
    /// Pixels as an `[H, W]` tensor scaled by `1 / maxval`.
    pub fn to_tensor(&self) -> Result<Tensor> {
        let scale = self.maxval as f64;
        Tensor::new(
            vec![self.height, self.width],
            self.pixels.iter().map(|&b| b as f64 / scale).collect(),
        )
    }
}

/// Parses a P5 file with an 8-bit maxval. Header fields may be separated by
/// any whitespace and `#` comments.
pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::Format("PGM must start with the P5 magic".into()));
    }
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
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format(format!(
                "malformed PGM header near byte {start}"
            )));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::Format("PGM header value out of range".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format(
            "PGM header must end with a single whitespace byte".into(),
        ));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let pixels = &bytes[pos..];
    if pixels.len() != width * height {
        return Err(Error::Format(format!(
            "PGM payload size mismatch: expected {} bytes, got {}",
            width * height,
            pixels.len()
        )));
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        pixels: pixels.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_endpoints() {
        let img = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        let bytes = encode_image(&img).unwrap();
        assert!(bytes.starts_with(b"P5\n2 1\n255\n"));
        assert_eq!(&bytes[bytes.len() - 2..], &[0, 255]);
        let parsed = decode_pgm(&bytes).unwrap();
        assert_eq!((parsed.width, parsed.height), (2, 1));
    }

    #[test]
    fn header_comments_allowed() {
        let bytes = b"P5 # made by hand\n1 1\n255\n\x07";
        assert_eq!(decode_pgm(bytes).unwrap().pixels, vec![7]);
    }

    #[test]
    fn bad_files_rejected() {
        assert!(decode_pgm(b"P2\n1 1\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }
}
