//! Binary PPM (P6) / PGM (P5) reading and writing, maxval 255 only.

use std::fs;
use std::path::Path;

use super::{BinaryMask, Frame, FrameData};
use crate::error::{Error, Result};

fn header(magic: &str, w: usize, h: usize) -> Vec<u8> {
    format!("{magic}\n{w} {h}\n255\n").into_bytes()
}

/// Encodes an RGB8 frame as P6 or a GRAY8 frame as P5.
pub fn encode_pnm(frame: &Frame) -> Result<Vec<u8>> {
    let (magic, body) = match frame.data() {
        FrameData::Rgb8(d) => ("P6", d),
        FrameData::Gray8(d) => ("P5", d),
        FrameData::Hsv(_) => return Err(Error::invalid("HSV frames have no PNM encoding")),
    };
    let mut out = header(magic, frame.width(), frame.height());
    out.extend_from_slice(body);
    Ok(out)
}

pub fn encode_mask_pgm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = header("P5", mask.width(), mask.height());
    out.extend(mask.bits().iter().map(|&b| if b != 0 { 255u8 } else { 0 }));
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            let c = self.buf[self.pos];
            if c == b'#' {
                while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && !self.buf[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::invalid("truncated PNM header"));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .map_err(|_| Error::invalid("non-ASCII PNM header"))
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::invalid(format!("bad PNM header field {tok:?}")))
    }
}

/// Decodes P6 into RGB8 or P5 into GRAY8.
pub fn decode_pnm(buf: &[u8]) -> Result<Frame> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic = cur.token()?.to_owned();
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(Error::invalid(format!("unsupported PNM magic {other:?}"))),
    };
    let w = cur.number()?;
    let h = cur.number()?;
    let maxval = cur.number()?;
    if maxval != 255 {
        return Err(Error::invalid(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates header and raster
    let start = cur.pos + 1;
    let need = w * h * channels;
    if buf.len() < start + need {
        return Err(Error::invalid("truncated PNM raster"));
    }
    let body = buf[start..start + need].to_vec();
    if channels == 3 {
        Frame::from_rgb8(w, h, body)
    } else {
        Frame::from_gray8(w, h, body)
    }
}

pub fn decode_mask_pgm(buf: &[u8]) -> Result<BinaryMask> {
    let frame = decode_pnm(buf)?;
    let gray = frame.gray8()?;
    BinaryMask::from_bits(
        frame.width(),
        frame.height(),
        gray.iter().map(|&g| (g >= 128) as u8).collect(),
    )
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&buf)
}

pub fn write_pnm(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(frame)?).map_err(|e| Error::io(path, e))
}

pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask_pgm(&buf)
}

pub fn write_mask_pgm(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask_pgm(mask)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_bytes_are_exact() {
        let f = Frame::from_rgb8(2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let bytes = encode_pnm(&f).unwrap();
        assert_eq!(bytes, b"P6\n2 1\n255\n\x01\x02\x03\x04\x05\x06");
        assert_eq!(decode_pnm(&bytes).unwrap(), f);
    }

    #[test]
    fn mask_maps_one_to_255() {
        let m = BinaryMask::from_bits(3, 1, vec![0, 1, 0]).unwrap();
        let bytes = encode_mask_pgm(&m);
        assert_eq!(&bytes[bytes.len() - 3..], &[0, 255, 0]);
        assert_eq!(decode_mask_pgm(&bytes).unwrap(), m);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x00\xff";
        let f = decode_pnm(bytes).unwrap();
        assert_eq!(f.gray8().unwrap(), &[0, 255]);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        assert!(decode_pnm(b"P6\n2 2\n255\n\x00").is_err());
        assert!(decode_pnm(b"P3\n1 1\n255\n0 0 0").is_err());
    }
}
