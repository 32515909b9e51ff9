//! Raster types and the small amount of image plumbing the pipeline needs:
//! binary Netpbm (P5/P6, maxval 255) decoding and encoding, BT.601 luma,
//! gray-to-RGB replication, cropping and nearest-neighbour resizing.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Axis-aligned rectangle in pixel coordinates. `x`/`y` are the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    /// Center point as real coordinates.
    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    /// True when the rectangle is non-empty and lies inside a `width` x `height` raster.
    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width as u64 && self.bottom() <= height as u64
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("rectangle {rect} is outside a {width}x{height} image")]
    OutOfBounds { rect: Rect, width: u32, height: u32 },
}

fn check_dims(width: u32, height: u32, channels: usize, len: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyDimensions { width, height });
    }
    let expected = width as usize * height as usize * channels;
    if len != expected {
        return Err(ImageError::BufferLength { expected, actual: len });
    }
    Ok(())
}

/// 8-bit single channel image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height, 1, data.len())?;
        Ok(GrayImage { width, height, data })
    }

    /// A `width` x `height` image where every pixel is `value`.
    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Result<Self, ImageError> {
        check_dims(width, height, 1, width as usize * height as usize)?;
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

/// 8-bit RGB image, row-major interleaved triples.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height, 3, data.len())?;
        Ok(RgbImage { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self, ImageError> {
        check_dims(width, height, 3, width as usize * height as usize * 3)?;
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }
}

impl fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

/// Result of decoding a Netpbm file: P5 yields gray, P6 yields RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodedImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl DecodedImage {
    pub fn width(&self) -> u32 {
        match self {
            DecodedImage::Gray(g) => g.width(),
            DecodedImage::Rgb(c) => c.width(),
        }
    }

    pub fn height(&self) -> u32 {
        match self {
            DecodedImage::Gray(g) => g.height(),
            DecodedImage::Rgb(c) => c.height(),
        }
    }

    /// Color view of the image; gray inputs are channel-replicated.
    pub fn into_rgb(self) -> RgbImage {
        match self {
            DecodedImage::Gray(g) => gray_to_rgb(&g),
            DecodedImage::Rgb(c) => c,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            DecodedImage::Gray(g) => encode_pgm(g),
            DecodedImage::Rgb(c) => encode_ppm(c),
        }
    }
}

/// Netpbm decode failure. Every variant carries the byte offset where decoding stopped.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetpbmError {
    #[error("byte {offset}: expected magic \"P5\" or \"P6\"")]
    BadMagic { offset: usize },
    #[error("byte {offset}: malformed header, {reason}")]
    MalformedHeader { offset: usize, reason: &'static str },
    #[error("byte {offset}: unsupported maxval {maxval}, only 255 is accepted")]
    UnsupportedMaxval { offset: usize, maxval: u64 },
    #[error("byte {offset}: pixel payload truncated, expected {expected} bytes, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    /// Skips whitespace and `#` comments (which run to the end of the line).
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Returns the parsed value and the offset of its first digit.
    fn number(&mut self, what: &'static str) -> Result<(u64, usize), NetpbmError> {
        let had_sep = self.pos;
        self.skip_separators();
        if self.pos == had_sep {
            return Err(NetpbmError::MalformedHeader {
                offset: self.pos,
                reason: "missing whitespace between header fields",
            });
        }
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as u64))
                .ok_or(NetpbmError::MalformedHeader { offset: start, reason: "numeric overflow" })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(NetpbmError::MalformedHeader { offset: start, reason: what });
        }
        Ok((value, start))
    }
}

/// Decodes binary PGM (P5) or PPM (P6) with maxval 255.
///
/// Header tokens may be separated by any whitespace and `#` comments; exactly
/// one whitespace byte separates maxval from the payload. Bytes after the
/// payload are ignored.
pub fn decode_netpbm(bytes: &[u8]) -> Result<DecodedImage, NetpbmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(NetpbmError::BadMagic { offset: 0 }),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let (width, _) = cur.number("expected image width")?;
    let (height, _) = cur.number("expected image height")?;
    if width == 0 || height == 0 || width > u32::MAX as u64 || height > u32::MAX as u64 {
        return Err(NetpbmError::MalformedHeader {
            offset: cur.pos,
            reason: "width and height must be between 1 and 2^32-1",
        });
    }
    let (maxval, maxval_offset) = cur.number("expected maxval")?;
    if maxval != 255 {
        return Err(NetpbmError::UnsupportedMaxval { offset: maxval_offset, maxval });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(NetpbmError::MalformedHeader {
                offset: cur.pos,
                reason: "expected a single whitespace byte after maxval",
            })
        }
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(NetpbmError::MalformedHeader { offset: cur.pos, reason: "image too large" })?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(NetpbmError::Truncated { offset: bytes.len(), expected, found: payload.len() });
    }
    let data = payload[..expected].to_vec();
    let (w, h) = (width as u32, height as u32);
    // Dimensions and length were validated above.
    Ok(if channels == 1 {
        DecodedImage::Gray(GrayImage { width: w, height: h, data })
    } else {
        DecodedImage::Rgb(RgbImage { width: w, height: h, data })
    })
}

fn encode_with(magic: &str, width: u32, height: u32, data: &[u8]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

/// Canonical binary PGM: `P5\n<w> <h>\n255\n` followed by the payload.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    encode_with("P5", img.width, img.height, &img.data)
}

/// Canonical binary PPM: `P6\n<w> <h>\n255\n` followed by the payload.
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    encode_with("P6", img.width, img.height, &img.data)
}

/// BT.601 luma with round-half-up: `round(0.299 R + 0.587 G + 0.114 B)`.
///
/// Computed in integer thousandths so the rounding is exact.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let weighted = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img.data.chunks_exact(3).map(|p| luma([p[0], p[1], p[2]])).collect();
    GrayImage { width: img.width, height: img.height, data }
}

pub fn gray_to_rgb(img: &GrayImage) -> RgbImage {
    let data = img.data.iter().flat_map(|&v| [v, v, v]).collect();
    RgbImage { width: img.width, height: img.height, data }
}

pub fn crop(img: &RgbImage, r: Rect) -> Result<RgbImage, ImageError> {
    if !r.fits_within(img.width, img.height) {
        return Err(ImageError::OutOfBounds { rect: r, width: img.width, height: img.height });
    }
    let stride = img.width as usize * 3;
    let mut data = Vec::with_capacity(r.area() as usize * 3);
    for row in r.y as usize..r.bottom() as usize {
        let start = row * stride + r.x as usize * 3;
        data.extend_from_slice(&img.data[start..start + r.w as usize * 3]);
    }
    Ok(RgbImage { width: r.w, height: r.h, data })
}

/// Nearest-neighbour resize: output `(i, j)` samples input
/// `(floor(i * in_w / w), floor(j * in_h / h))`.
pub fn resize_nearest(img: &RgbImage, width: u32, height: u32) -> Result<RgbImage, ImageError> {
    check_dims(width, height, 3, width as usize * height as usize * 3)?;
    let cols: Vec<usize> = (0..width as u64).map(|i| (i * img.width as u64 / width as u64) as usize).collect();
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for j in 0..height as u64 {
        let src_row = (j * img.height as u64 / height as u64) as usize;
        let row = &img.data[src_row * img.width as usize * 3..][..img.width as usize * 3];
        for &c in &cols {
            data.extend_from_slice(&row[c * 3..c * 3 + 3]);
        }
    }
    Ok(RgbImage { width, height, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_minimal_pgm() {
        let mut bytes = b"P5 2 2 255 ".to_vec();
        bytes.extend_from_slice(&[0, 64, 128, 255]);
        match decode_netpbm(&bytes).unwrap() {
            DecodedImage::Gray(g) => {
                assert_eq!((g.width(), g.height()), (2, 2));
                assert_eq!(g.data(), &[0, 64, 128, 255]);
            }
            other => panic!("expected gray, got {other:?}"),
        }
    }

    #[test]
    fn decodes_minimal_ppm() {
        let mut bytes = b"P6 1 1 255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0]);
        let img = decode_netpbm(&bytes).unwrap().into_rgb();
        assert_eq!(img.get(0, 0), [255, 0, 0]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n3 # width\n1\n# maxval next\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        let img = decode_netpbm(&bytes).unwrap();
        assert_eq!(img.width(), 3);
        assert_eq!(img.height(), 1);
    }

    #[test]
    fn header_errors_are_distinct_and_located() {
        assert_eq!(decode_netpbm(b"P3 1 1 255 \x00"), Err(NetpbmError::BadMagic { offset: 0 }));
        assert!(matches!(decode_netpbm(b"P5 x 1 255 \x00"), Err(NetpbmError::MalformedHeader { offset: 3, .. })));
        assert!(matches!(decode_netpbm(b"P5 0 1 255 \x00"), Err(NetpbmError::MalformedHeader { .. })));
        assert_eq!(
            decode_netpbm(b"P5 1 1 65535 \x00\x00"),
            Err(NetpbmError::UnsupportedMaxval { offset: 7, maxval: 65535 })
        );
        assert_eq!(
            decode_netpbm(b"P6 2 1 255\n\x01\x02\x03"),
            Err(NetpbmError::Truncated { offset: 14, expected: 6, found: 3 })
        );
        assert!(matches!(decode_netpbm(b"P5 1 1 255"), Err(NetpbmError::MalformedHeader { offset: 10, .. })));
    }

    #[test]
    fn luma_reference_points() {
        assert_eq!(luma([255, 255, 255]), 255);
        assert_eq!(luma([0, 0, 0]), 0);
        assert_eq!(luma([255, 0, 0]), 76);
        assert_eq!(luma([0, 255, 0]), 150);
        assert_eq!(luma([0, 0, 255]), 29);
    }

    #[test]
    fn gray_round_trip_is_exact_for_every_level() {
        for v in 0..=255u8 {
            assert_eq!(luma([v, v, v]), v);
        }
        let g = GrayImage::new(1, 1, vec![42]).unwrap();
        assert_eq!(gray_to_rgb(&g).get(0, 0), [42, 42, 42]);
    }

    #[test]
    fn zero_sized_images_are_rejected() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(RgbImage::new(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn crop_identity_and_single_pixel() {
        let img = RgbImage::from_fn(4, 3, |x, y| [x as u8, y as u8, (x * y) as u8]).unwrap();
        assert_eq!(crop(&img, Rect::new(0, 0, 4, 3)).unwrap(), img);
        let px = crop(&img, Rect::new(3, 2, 1, 1)).unwrap();
        assert_eq!(px.get(0, 0), img.get(3, 2));
        assert!(crop(&img, Rect::new(3, 2, 2, 1)).is_err());
        assert!(crop(&img, Rect::new(0, 0, 0, 1)).is_err());
    }

    #[test]
    fn resize_identity_and_upscale_blocks() {
        let img = RgbImage::from_fn(2, 2, |x, y| [(x + 2 * y) as u8; 3]).unwrap();
        assert_eq!(resize_nearest(&img, 2, 2).unwrap(), img);
        let up = resize_nearest(&img, 4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(up.get(x, y), img.get(x / 2, y / 2));
            }
        }
    }
}
