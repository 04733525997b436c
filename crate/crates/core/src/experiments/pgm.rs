//! Binary PGM (P5) images. Magnitudes are stored as 16-bit samples scaled
//! to the full range; the scale is kept in a `# scale` header comment so
//! loading restores physical values.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{ComplexSignal, Shape, C64};

const MAX_PIXELS: usize = 1 << 26;

/// Writes `|x|` as a 16-bit PGM normalized so the largest magnitude maps
/// to 65535. 1D signals are written as a single row.
pub fn save_image(path: &Path, signal: &ComplexSignal) -> Result<()> {
    fs::write(path, encode(signal))?;
    Ok(())
}

pub fn encode(signal: &ComplexSignal) -> Vec<u8> {
    let (rows, cols) = signal.shape().rows_cols();
    let mags = signal.magnitudes();
    let scale = mags.iter().copied().fold(0.0, f64::max);
    let mut out = format!("P5\n# scale {scale:e}\n{cols} {rows}\n65535\n").into_bytes();
    for m in mags {
        let v = if scale > 0.0 {
            (m / scale * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Reads a P5 image as a real nonnegative signal. Pixel `p` maps to
/// `p/maxval·scale`, where `scale` comes from a `# scale` comment (1 when
/// absent). Single-row images load as 1D signals.
pub fn load_image(path: &Path) -> Result<ComplexSignal> {
    decode(&fs::read(path)?)
}

/// Loads a magnitude image and a phase image (pixel range mapped onto
/// `[0, 2π)`) into one complex signal.
pub fn load_complex_image(magnitude: &Path, phase: &Path) -> Result<ComplexSignal> {
    let mag = load_image(magnitude)?;
    let (raw, maxval) = decode_raw(&fs::read(phase)?)?;
    if raw.shape != mag.shape() {
        return Err(Error::Image("phase image shape differs from magnitude image".into()));
    }
    let data = mag
        .data()
        .iter()
        .zip(&raw.pixels)
        .map(|(m, &p)| C64::from_polar(m.re, 2.0 * std::f64::consts::PI * p as f64 / (maxval as f64 + 1.0)))
        .collect();
    ComplexSignal::new(mag.shape(), data)
}

struct RawImage {
    shape: Shape,
    pixels: Vec<u16>,
    scale: Option<f64>,
}

pub fn decode(bytes: &[u8]) -> Result<ComplexSignal> {
    let (raw, maxval) = decode_raw(bytes)?;
    let scale = raw.scale.unwrap_or(1.0);
    let values: Vec<f64> = raw.pixels.iter().map(|&p| p as f64 / maxval as f64 * scale).collect();
    ComplexSignal::from_real(raw.shape, &values)
}

fn decode_raw(bytes: &[u8]) -> Result<(RawImage, u32)> {
    let mut pos = 0;
    let mut scale = None;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(Error::Image("truncated header".into()));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
            if let Some(rest) = comment.trim().strip_prefix("scale") {
                scale = Some(
                    rest.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Image(format!("bad scale comment: {comment}")))?,
                );
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(Error::Image(format!("unsupported format {}", tokens[0])));
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|_| Error::Image(format!("bad {what}: {s}")))
    };
    let cols = parse(&tokens[1], "width")?;
    let rows = parse(&tokens[2], "height")?;
    let maxval = parse(&tokens[3], "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Image(format!("maxval {maxval} out of range")));
    }
    let count = rows
        .checked_mul(cols)
        .filter(|&c| c > 0 && c <= MAX_PIXELS)
        .ok_or_else(|| Error::Image(format!("image dimensions {cols}x{rows} out of range")))?;
    // Exactly one whitespace byte separates the header from the samples.
    pos += 1;
    let width = if maxval > 255 { 2 } else { 1 };
    let body = bytes
        .get(pos..pos + count * width)
        .ok_or_else(|| Error::Image("truncated pixel data".into()))?;
    let pixels = if width == 2 {
        body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        body.iter().map(|&b| b as u16).collect()
    };
    let shape = if rows == 1 { Shape::D1(cols) } else { Shape::D2(rows, cols) };
    Ok((RawImage { shape, pixels, scale }, maxval as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_pixel_extremes() {
        let x = ComplexSignal::from_real(Shape::D2(2, 2), &[0.0, 3.0, 0.0, 3.0]).unwrap();
        let bytes = encode(&x);
        let body = &bytes[bytes.len() - 8..];
        assert_eq!(body, &[0, 0, 0xff, 0xff, 0, 0, 0xff, 0xff]);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.shape(), Shape::D2(2, 2));
        assert!((back.data()[1].re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_image_round_trip() {
        let x = ComplexSignal::from_real(Shape::D2(3, 4), &[0.7; 12]).unwrap();
        let back = decode(&encode(&x)).unwrap();
        for z in back.data() {
            assert!((z.re - 0.7).abs() <= 0.7 / 65535.0);
        }
    }

    #[test]
    fn eight_bit_without_scale() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        let x = decode(&bytes).unwrap();
        assert_eq!(x.shape(), Shape::D1(2));
        assert_eq!(x.data()[1].re, 1.0);
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00").is_err());
    }
}
