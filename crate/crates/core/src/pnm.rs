//! Binary Netpbm I/O: 16-bit PGM (P5, maxval 65535, big-endian samples)
//! for label maps and 8-bit PPM (P6) for RGB images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, LabelGrid, RgbImage};

pub fn encode_pgm16(grid: &LabelGrid) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", grid.cols(), grid.rows());
    let mut out = Vec::with_capacity(header.len() + 2 * grid.len());
    out.extend_from_slice(header.as_bytes());
    for &v in grid.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<LabelGrid> {
    let (header, body) = parse_header(bytes, b"P5", "pgm")?;
    if header.maxval != 65535 {
        return Err(Error::format(
            "pgm",
            format!("expected maxval 65535, found {}", header.maxval),
        ));
    }
    let n = header.width * header.height;
    if body.len() != 2 * n {
        return Err(Error::format(
            "pgm",
            format!("expected {} sample bytes, found {}", 2 * n, body.len()),
        ));
    }
    let data = body
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok(Grid::from_vec(header.height, header.width, data).expect("length checked"))
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.cols(), image.rows());
    let mut out = Vec::with_capacity(header.len() + 3 * image.len());
    out.extend_from_slice(header.as_bytes());
    for px in image.as_slice() {
        out.extend_from_slice(px);
    }
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let (header, body) = parse_header(bytes, b"P6", "ppm")?;
    if header.maxval != 255 {
        return Err(Error::format(
            "ppm",
            format!("expected maxval 255, found {}", header.maxval),
        ));
    }
    let n = header.width * header.height;
    if body.len() != 3 * n {
        return Err(Error::format(
            "ppm",
            format!("expected {} sample bytes, found {}", 3 * n, body.len()),
        ));
    }
    let data = body.chunks_exact(3).map(|b| [b[0], b[1], b[2]]).collect();
    Ok(Grid::from_vec(header.height, header.width, data).expect("length checked"))
}

pub fn write_pgm16(path: &Path, grid: &LabelGrid) -> Result<()> {
    fs::write(path, encode_pgm16(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm16(path: &Path) -> Result<LabelGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm16(&bytes)
}

pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    fs::write(path, encode_ppm(image)).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
}

/// Parses `magic width height maxval` followed by exactly one whitespace byte.
/// `#` comments are allowed between header tokens.
fn parse_header<'a>(bytes: &'a [u8], magic: &[u8], ctx: &str) -> Result<(Header, &'a [u8])> {
    if !bytes.starts_with(magic) {
        return Err(Error::format(ctx, "bad magic number"));
    }
    let mut pos = magic.len();
    let mut fields = [0u64; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(ctx, "truncated header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::format(ctx, format!("header value `{text}` too large")))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(ctx, "missing whitespace after header"));
    }
    let [width, height, maxval] = fields;
    let header = Header {
        width: width as usize,
        height: height as usize,
        maxval: u32::try_from(maxval).map_err(|_| Error::format(ctx, "maxval too large"))?,
    };
    Ok((header, &bytes[pos + 1..]))
}
