//! Grayscale image and mask files: PGM (P2/P5), 8/16-bit grayscale PNG and
//! single-channel PFM.

use std::cell::Cell;
use std::io::{BufRead, Cursor, Read, Seek, SeekFrom};
use std::path::Path;
use std::rc::Rc;

use crate::error::{PtaError, Result};
use crate::geometry::{BinaryMask, GrayImage, LabelMask, ProbabilityMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
    Pfm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "pgm" => Ok(ImageFormat::Pgm),
            "png" => Ok(ImageFormat::Png),
            "pfm" => Ok(ImageFormat::Pfm),
            _ => Err(PtaError::invalid(format!(
                "unsupported file extension for {}; expected .pgm, .png or .pfm",
                path.display()
            ))),
        }
    }

    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        match bytes {
            [b'P', b'2' | b'5', ..] => Some(ImageFormat::Pgm),
            [b'P', b'f' | b'F', ..] => Some(ImageFormat::Pfm),
            [0x89, b'P', b'N', b'G', ..] => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

/// Decoded single-channel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    /// Largest representable sample for integer formats; `None` for PFM.
    pub max_value: Option<u32>,
}

fn malformed(format: &'static str, offset: usize, message: impl Into<String>) -> PtaError {
    PtaError::Malformed {
        format,
        offset: offset as u64,
        message: message.into(),
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(malformed(self.format, start, format!("unexpected end of data, expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| malformed(self.format, start, format!("non-ASCII {what}")))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let start = self.pos;
        let tok = self.token(what)?;
        tok.parse()
            .map_err(|_| malformed(self.format, start, format!("invalid {what} {tok:?}")))
    }

    // Exactly one whitespace byte separates the header from binary data.
    fn single_space(&mut self) -> Result<()> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(malformed(self.format, self.pos, "expected whitespace before raster data")),
        }
    }
}

fn positive_dims(format: &'static str, offset: usize, width: usize, height: usize) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(malformed(format, offset, format!("image dimensions {width}x{height} are not positive")));
    }
    width
        .checked_mul(height)
        .ok_or_else(|| malformed(format, offset, "image dimensions overflow"))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Raster> {
    const F: &str = "PGM";
    let mut r = HeaderReader { bytes, pos: 0, format: F };
    let magic = r.token("magic number")?;
    let binary = match magic {
        "P5" => true,
        "P2" => false,
        _ => return Err(malformed(F, 0, format!("unknown magic {magic:?}"))),
    };
    let dims_at = r.pos;
    let width: usize = r.number("width")?;
    let height: usize = r.number("height")?;
    let n = positive_dims(F, dims_at, width, height)?;
    let max_at = r.pos;
    let maxval: u32 = r.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(F, max_at, format!("maxval {maxval} outside 1..=65535")));
    }
    let mut values = Vec::with_capacity(n);
    if binary {
        r.single_space()?;
        let bps = if maxval < 256 { 1 } else { 2 };
        let start = r.pos;
        let needed = n * bps;
        if bytes.len() < start + needed {
            return Err(malformed(
                F,
                bytes.len(),
                format!("truncated raster: expected {needed} bytes from offset {start}, found {}", bytes.len() - start),
            ));
        }
        let data = &bytes[start..start + needed];
        for (i, chunk) in data.chunks_exact(bps).enumerate() {
            let v = if bps == 1 { chunk[0] as u32 } else { u16::from_be_bytes([chunk[0], chunk[1]]) as u32 };
            if v > maxval {
                return Err(malformed(F, start + i * bps, format!("sample {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64);
        }
    } else {
        for _ in 0..n {
            let at = r.pos;
            let v: u32 = r.number("sample")?;
            if v > maxval {
                return Err(malformed(F, at, format!("sample {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64);
        }
    }
    Ok(Raster {
        width,
        height,
        values,
        max_value: Some(maxval),
    })
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Raster> {
    const F: &str = "PFM";
    let mut r = HeaderReader { bytes, pos: 0, format: F };
    match r.token("magic number")? {
        "Pf" => {}
        "PF" => return Err(malformed(F, 0, "three-channel PFM is not supported")),
        other => return Err(malformed(F, 0, format!("unknown magic {other:?}"))),
    }
    let dims_at = r.pos;
    let width: usize = r.number("width")?;
    let height: usize = r.number("height")?;
    let n = positive_dims(F, dims_at, width, height)?;
    let scale_at = r.pos;
    let scale: f64 = r.number("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(malformed(F, scale_at, "scale must be non-zero"));
    }
    r.single_space()?;
    let start = r.pos;
    let needed = n * 4;
    if bytes.len() < start + needed {
        return Err(malformed(
            F,
            bytes.len(),
            format!("truncated raster: expected {needed} bytes from offset {start}, found {}", bytes.len() - start),
        ));
    }
    let little = scale < 0.0;
    let mut values = vec![0.0; n];
    // rows are stored bottom to top
    for (i, chunk) in bytes[start..start + needed].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        if !v.is_finite() {
            return Err(malformed(F, start + 4 * i, "non-finite sample"));
        }
        let (row, col) = (i / width, i % width);
        values[(height - 1 - row) * width + col] = v as f64;
    }
    Ok(Raster {
        width,
        height,
        values,
        max_value: None,
    })
}

// Cursor that remembers the furthest byte handed to the PNG decoder, for error offsets.
struct TrackedCursor<'a> {
    inner: Cursor<&'a [u8]>,
    furthest: Rc<Cell<u64>>,
}

impl TrackedCursor<'_> {
    fn note(&self) {
        let pos = self.inner.position();
        if pos > self.furthest.get() {
            self.furthest.set(pos);
        }
    }
}

impl Read for TrackedCursor<'_> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.note();
        Ok(n)
    }
}

impl BufRead for TrackedCursor<'_> {
    fn fill_buf(&mut self) -> std::io::Result<&[u8]> {
        self.inner.fill_buf()
    }

    fn consume(&mut self, amt: usize) {
        self.inner.consume(amt);
        self.note();
    }
}

impl Seek for TrackedCursor<'_> {
    fn seek(&mut self, pos: SeekFrom) -> std::io::Result<u64> {
        let p = self.inner.seek(pos)?;
        self.note();
        Ok(p)
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<Raster> {
    const F: &str = "PNG";
    let furthest = Rc::new(Cell::new(0));
    let cursor = TrackedCursor {
        inner: Cursor::new(bytes),
        furthest: Rc::clone(&furthest),
    };
    let fail = |e: png::DecodingError| malformed(F, furthest.get() as usize, e.to_string());
    let mut reader = png::Decoder::new(cursor).read_info().map_err(fail)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(malformed(F, 0, format!("expected a grayscale image, found {:?}", info.color_type)));
    }
    let depth = info.bit_depth;
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| malformed(F, 0, "image too large"))?;
    let mut buf = vec![0u8; size];
    let out = reader.next_frame(&mut buf).map_err(fail)?;
    let n = positive_dims(F, 0, width, height)?;
    let (values, max_value): (Vec<f64>, u32) = match depth {
        png::BitDepth::Eight => (
            (0..height)
                .flat_map(|y| buf[y * out.line_size..y * out.line_size + width].iter().map(|&v| v as f64))
                .collect(),
            255,
        ),
        png::BitDepth::Sixteen => (
            (0..height)
                .flat_map(|y| {
                    buf[y * out.line_size..y * out.line_size + 2 * width]
                        .chunks_exact(2)
                        .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                })
                .collect(),
            65535,
        ),
        other => return Err(malformed(F, 0, format!("unsupported bit depth {other:?}; expected 8 or 16"))),
    };
    debug_assert_eq!(values.len(), n);
    Ok(Raster {
        width,
        height,
        values,
        max_value: Some(max_value),
    })
}

pub fn decode(bytes: &[u8], format: ImageFormat) -> Result<Raster> {
    match format {
        ImageFormat::Pgm => decode_pgm(bytes),
        ImageFormat::Png => decode_png(bytes),
        ImageFormat::Pfm => decode_pfm(bytes),
    }
}

/// Reads a raster, choosing the decoder from the file signature and falling back to the extension.
pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = std::fs::read(path)?;
    let format = match ImageFormat::sniff(&bytes) {
        Some(f) => f,
        None => ImageFormat::from_path(path)?,
    };
    decode(&bytes, format)
}

/// Intensities exactly as stored.
pub fn read_gray_image(path: &Path) -> Result<GrayImage> {
    let r = read_raster(path)?;
    GrayImage::new(r.width, r.height, r.values)
}

/// Integer samples are divided by the format maximum (255, 65535 or the PGM maxval);
/// PFM samples are used as-is and must already lie in `[0, 1]`.
pub fn read_probability_map(path: &Path) -> Result<ProbabilityMap> {
    let r = read_raster(path)?;
    let values = match r.max_value {
        Some(m) => r.values.iter().map(|v| v / m as f64).collect(),
        None => r.values,
    };
    ProbabilityMap::new(r.width, r.height, values)
}

/// Any non-zero sample is foreground.
pub fn read_binary_mask(path: &Path) -> Result<BinaryMask> {
    let r = read_raster(path)?;
    BinaryMask::new(r.width, r.height, r.values.iter().map(|&v| v != 0.0).collect())
}

pub fn read_label_mask(path: &Path) -> Result<LabelMask> {
    let r = read_raster(path)?;
    let labels = r
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.fract() == 0.0 && (0.0..=65535.0).contains(&v) {
                Ok(v as u16)
            } else {
                Err(PtaError::invalid(format!("label {v} at index {i} is not an integer in 0..=65535")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LabelMask::new(r.width, r.height, labels)
}

pub fn encode_pgm(width: usize, height: usize, samples: &[u16]) -> Vec<u8> {
    let maxval = if samples.iter().all(|&v| v <= 255) { 255 } else { 65535 };
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    for &v in samples {
        if maxval == 255 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

pub fn encode_png(width: usize, height: usize, samples: &[u16]) -> Result<Vec<u8>> {
    let sixteen = samples.iter().any(|&v| v > 255);
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(if sixteen { png::BitDepth::Sixteen } else { png::BitDepth::Eight });
        let mut writer = enc.write_header().map_err(|e| PtaError::Io(std::io::Error::other(e)))?;
        let data: Vec<u8> = if sixteen {
            samples.iter().flat_map(|v| v.to_be_bytes()).collect()
        } else {
            samples.iter().map(|&v| v as u8).collect()
        };
        writer
            .write_image_data(&data)
            .map_err(|e| PtaError::Io(std::io::Error::other(e)))?;
    }
    Ok(out)
}

pub fn encode_pfm(width: usize, height: usize, samples: &[f32]) -> Vec<u8> {
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    for row in (0..height).rev() {
        for v in &samples[row * width..(row + 1) * width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn integer_samples(values: &[f64]) -> Result<Vec<u16>> {
    values
        .iter()
        .map(|&v| {
            if v.fract() == 0.0 && (0.0..=65535.0).contains(&v) {
                Ok(v as u16)
            } else {
                Err(PtaError::invalid(format!(
                    "value {v} cannot be stored in an integer format; use .pfm"
                )))
            }
        })
        .collect()
}

fn write_samples(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let bytes = match ImageFormat::from_path(path)? {
        ImageFormat::Pgm => encode_pgm(width, height, &integer_samples(values)?),
        ImageFormat::Png => encode_png(width, height, &integer_samples(values)?)?,
        ImageFormat::Pfm => encode_pfm(width, height, &values.iter().map(|&v| v as f32).collect::<Vec<_>>()),
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Writes intensities; PGM/PNG need integers in `0..=65535`, PFM stores `f32`.
pub fn write_gray_image(path: &Path, image: &GrayImage) -> Result<()> {
    write_samples(path, image.width(), image.height(), image.values())
}

/// Foreground is written as 255.
pub fn write_binary_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let values: Vec<f64> = mask.bits().iter().map(|&b| if b { 255.0 } else { 0.0 }).collect();
    write_samples(path, mask.width(), mask.height(), &values)
}

pub fn write_label_mask(path: &Path, labels: &LabelMask) -> Result<()> {
    let values: Vec<f64> = labels.labels().iter().map(|&l| l as f64).collect();
    write_samples(path, labels.width(), labels.height(), &values)
}

pub fn write_probability_map(path: &Path, map: &ProbabilityMap) -> Result<()> {
    match ImageFormat::from_path(path)? {
        ImageFormat::Pfm => write_samples(path, map.width(), map.height(), map.probs()),
        _ => {
            let scaled: Vec<f64> = map.probs().iter().map(|p| (p * 65535.0).round()).collect();
            let bytes = match ImageFormat::from_path(path)? {
                ImageFormat::Png => encode_png(map.width(), map.height(), &integer_samples(&scaled)?)?,
                _ => {
                    // force a 16-bit PGM so the reader divides by 65535
                    let samples = integer_samples(&scaled)?;
                    let mut out = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
                    samples.iter().for_each(|v| out.extend_from_slice(&v.to_be_bytes()));
                    out
                }
            };
            std::fs::write(path, bytes)?;
            Ok(())
        }
    }
}
