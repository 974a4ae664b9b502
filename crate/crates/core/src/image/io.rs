//! PNG (via the `image` crate), PPM (P6) and PGM (P5) readers and writers.
//!
//! The netpbm writers emit a canonical header (`P6\n{w} {h}\n255\n`), so a
//! load → save round trip of a canonically written file is byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ColorSpace, ImageBuffer};

/// Loads a PNG, PPM or PGM image, detected from the file's magic bytes.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = fs::read(path)?;
    match bytes.get(..2) {
        Some(b"P6") | Some(b"P5") => decode_netpbm(&bytes, path),
        Some([0x89, b'P']) => decode_png(path),
        _ => Err(Error::image(
            Some(path),
            "unsupported format: expected PNG, PPM (P6) or PGM (P5)",
        )),
    }
}

/// Saves as PNG, PPM or PGM according to the file extension. PPM requires an
/// RGB buffer and PGM a grayscale one.
pub fn save_image(img: &ImageBuffer, path: &Path) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => encode_png(img, path),
        "ppm" => {
            if img.colorspace() != ColorSpace::Rgb {
                return Err(Error::image(Some(path), "PPM requires an RGB image"));
            }
            write_netpbm(img, path, b"P6")
        }
        "pgm" => {
            if img.colorspace() != ColorSpace::Gray {
                return Err(Error::image(Some(path), "PGM requires a grayscale image"));
            }
            write_netpbm(img, path, b"P5")
        }
        other => Err(Error::image(
            Some(path),
            format!("unsupported output extension {other:?}; use png, ppm or pgm"),
        )),
    }
}

fn decode_png(path: &Path) -> Result<ImageBuffer> {
    let dynimg = image::ImageReader::open(path)
        .map_err(|e| Error::image(Some(path), e.to_string()))?
        .decode()
        .map_err(|e| Error::image(Some(path), e.to_string()))?;
    use image::DynamicImage::*;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    match dynimg {
        ImageLuma8(buf) => ImageBuffer::new(w, h, 1, buf.into_raw()),
        ImageRgb8(buf) => ImageBuffer::new(w, h, 3, buf.into_raw()),
        ImageLumaA8(_) | ImageRgba8(_) => {
            ImageBuffer::new(w, h, 3, dynimg.into_rgb8().into_raw())
        }
        ImageLuma16(_) | ImageLumaA16(_) | ImageRgb16(_) | ImageRgba16(_) => {
            Err(Error::image(Some(path), "unsupported bit depth"))
        }
        _ => Err(Error::image(Some(path), "unsupported pixel format")),
    }
}

fn encode_png(img: &ImageBuffer, path: &Path) -> Result<()> {
    let color = match img.colorspace() {
        ColorSpace::Gray => image::ExtendedColorType::L8,
        ColorSpace::Rgb => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        color,
    )
    .map_err(|e| Error::image(Some(path), e.to_string()))
}

fn write_netpbm(img: &ImageBuffer, path: &Path, magic: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(img.data().len() + 32);
    out.extend_from_slice(magic);
    write!(out, "\n{} {}\n255\n", img.width(), img.height())?;
    out.extend_from_slice(img.data());
    fs::write(path, out)?;
    Ok(())
}

fn decode_netpbm(bytes: &[u8], path: &Path) -> Result<ImageBuffer> {
    let channels = match &bytes[..2] {
        b"P6" => 3,
        b"P5" => 1,
        _ => unreachable!("caller checked the magic"),
    };
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        *field = read_netpbm_int(bytes, &mut pos, path)?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::image(
            Some(path),
            format!("unsupported maxval {maxval}; only 8-bit (255) is handled"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::image(Some(path), "missing raster separator")),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::image(Some(path), "image dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::image(
            Some(path),
            format!(
                "truncated file: raster has {} of {} expected bytes",
                raster.len(),
                expected
            ),
        ));
    }
    if raster.len() > expected {
        return Err(Error::image(
            Some(path),
            format!("{} trailing bytes after raster", raster.len() - expected),
        ));
    }
    ImageBuffer::new(width, height, channels, raster.to_vec())
}

fn read_netpbm_int(bytes: &[u8], pos: &mut usize, path: &Path) -> Result<usize> {
    // skip whitespace and '#' comments
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::image(Some(path), "malformed header field"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::image(Some(path), "invalid header value"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn ppm_round_trip_is_byte_identical() {
        let dir = tempdir().unwrap();
        let img = ImageBuffer::new(3, 2, 3, (0..18).map(|v| v * 13).collect()).unwrap();
        let p1 = dir.path().join("a.ppm");
        save_image(&img, &p1).unwrap();
        let loaded = load_image(&p1).unwrap();
        let p2 = dir.path().join("b.ppm");
        save_image(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(loaded, img);
    }

    #[test]
    fn pgm_loads_as_single_channel() {
        let dir = tempdir().unwrap();
        let img = ImageBuffer::new(4, 2, 1, vec![9; 8]).unwrap();
        let p = dir.path().join("g.pgm");
        save_image(&img, &p).unwrap();
        let loaded = load_image(&p).unwrap();
        assert_eq!(loaded.channels(), 1);
        assert_eq!(loaded, img);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempdir().unwrap();
        let img = ImageBuffer::new(5, 4, 3, (0..60).map(|v| (v * 7 % 256) as u8).collect())
            .unwrap();
        let p = dir.path().join("x.png");
        save_image(&img, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn sixteen_bit_png_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("deep.png");
        let buf: image::ImageBuffer<image::Rgb<u16>, Vec<u16>> =
            image::ImageBuffer::from_pixel(2, 2, image::Rgb([1000u16, 2000, 3000]));
        buf.save(&p).unwrap();
        let err = load_image(&p).unwrap_err();
        assert!(err.to_string().contains("unsupported bit depth"), "{err}");
    }

    #[test]
    fn truncated_ppm_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("t.ppm");
        std::fs::write(&p, b"P6\n2 2\n255\nabc").unwrap();
        assert!(load_image(&p).unwrap_err().to_string().contains("truncated"));
    }

    #[test]
    fn ppm_comments_are_skipped() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.ppm");
        let mut bytes = b"P6\n# a comment\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        std::fs::write(&p, bytes).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
    }
}
