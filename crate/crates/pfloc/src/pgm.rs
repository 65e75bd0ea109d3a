//! Binary PGM (P5) images with 8-bit samples.

use std::fs;
use std::path::Path;

use pfloc_core::segmentation::GrayImage;
use pfloc_core::BinaryMask;

use crate::error::{HarnessError, IoContext};

/// Encodes `img` as P5 with maxval 255.
pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.samples());
    out
}

/// 0 for background, 255 for positive pixels.
pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    encode(&GrayImage::from_mask(mask))
}

struct Header<'a> {
    rest: &'a [u8],
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        loop {
            match self.rest.first() {
                Some(b) if b.is_ascii_whitespace() => self.rest = &self.rest[1..],
                Some(b'#') => {
                    let end = self.rest.iter().position(|&b| b == b'\n').unwrap_or(self.rest.len());
                    self.rest = &self.rest[end..];
                }
                _ => return,
            }
        }
    }

    fn number(&mut self) -> Result<u32, String> {
        self.skip_space_and_comments();
        let len = self.rest.iter().take_while(|b| b.is_ascii_digit()).count();
        if len == 0 {
            return Err("expected a number in header".into());
        }
        let text = std::str::from_utf8(&self.rest[..len]).expect("ascii digits");
        self.rest = &self.rest[len..];
        text.parse().map_err(|_| format!("header value {text} out of range"))
    }
}

/// Decodes a P5 image. Samples with maxval other than 255 are rescaled to
/// 0-255 by rounding.
pub fn decode(bytes: &[u8]) -> Result<GrayImage, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (P5)".into());
    }
    let mut h = Header { rest: &bytes[2..] };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    match h.rest.first() {
        Some(b) if b.is_ascii_whitespace() => h.rest = &h.rest[1..],
        _ => return Err("missing whitespace after maxval".into()),
    }
    let n = width as usize * height as usize;
    if h.rest.len() < n {
        return Err(format!("expected {n} samples, found {}", h.rest.len()));
    }
    let raw = &h.rest[..n];
    let samples = if maxval == 255 {
        raw.to_vec()
    } else {
        raw.iter()
            .map(|&s| ((s.min(maxval as u8) as u32 * 255 + maxval / 2) / maxval) as u8)
            .collect()
    };
    GrayImage::new(width, height, samples).map_err(|e| e.to_string())
}

/// Non-zero samples are positive.
pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask, String> {
    let img = decode(bytes)?;
    let bits = img.samples().iter().map(|&s| s != 0).collect();
    Ok(BinaryMask::from_bits(img.width(), img.height(), bits).expect("sizes agree"))
}

pub fn read(path: &Path) -> Result<GrayImage, HarnessError> {
    let bytes = fs::read(path).at(path)?;
    decode(&bytes).map_err(|e| HarnessError::bad_data(path, e))
}

pub fn read_mask(path: &Path) -> Result<BinaryMask, HarnessError> {
    let bytes = fs::read(path).at(path)?;
    decode_mask(&bytes).map_err(|e| HarnessError::bad_data(path, e))
}

pub fn write(path: &Path, img: &GrayImage) -> Result<(), HarnessError> {
    fs::write(path, encode(img)).at(path)
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<(), HarnessError> {
    fs::write(path, encode_mask(mask)).at(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pfloc_core::Pixel;
    use proptest::prelude::*;

    #[test]
    fn mask_encoding_is_exact() {
        let mask = BinaryMask::from_pixels(3, 2, [Pixel::new(1, 0), Pixel::new(2, 1)]);
        let bytes = encode_mask(&mask);
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 255, 0, 0, 0, 255]);
        assert_eq!(decode_mask(&bytes).unwrap(), mask);
    }

    #[test]
    fn header_comments_and_small_maxval() {
        let bytes = b"P5 # made by hand\n2 1\n# another\n1\n\x00\x01";
        let img = decode(bytes).unwrap();
        assert_eq!(img.samples(), &[0, 255]);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(decode(b"P5\nx 1\n255\n\x00").is_err());
    }

    proptest! {
        #[test]
        fn gray_round_trip(w in 3u32..20, h in 3u32..20, seed in any::<u64>()) {
            let img = GrayImage::from_fn(w, h, |x, y| (seed.wrapping_mul(31).wrapping_add((x * 7 + y * 13) as u64) % 256) as u8);
            let back = decode(&encode(&img)).unwrap();
            prop_assert_eq!(back, img);
        }
    }
}
