//! Integer raster types and their TIFF/PNG encodings.
//!
//! Samples are held as `u16` regardless of depth; an 8-bit image simply never
//! exceeds 255. Every quantization in the crate goes through [`quantize`] so that
//! rounding is identical everywhere (nearest integer, ties away from zero).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{colortype, Compression, DeflateLevel, TiffEncoder};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl From<BitDepth> for u8 {
    fn from(d: BitDepth) -> u8 {
        d.bits()
    }
}

impl TryFrom<u8> for BitDepth {
    type Error = String;

    fn try_from(bits: u8) -> std::result::Result<Self, String> {
        BitDepth::from_bits(bits as u32).ok_or_else(|| format!("unsupported bit depth {bits}"))
    }
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    /// Largest representable code, `2^bits - 1`.
    pub fn max_code(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }
}

/// Rounds to the nearest integer (ties away from zero) and clamps into `0..=max_code`.
#[inline]
pub fn quantize(value: f64, max_code: u16) -> u16 {
    value.round().clamp(0.0, max_code as f64) as u16
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    depth: BitDepth,
    data: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, depth: BitDepth, data: Vec<u16>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::ImageMismatch(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > depth.max_code()) {
            return Err(Error::ImageMismatch(format!(
                "sample {v} exceeds {}-bit range",
                depth.bits()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            depth,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    pub fn get(&self, x: u32, y: u32) -> Option<u16> {
        (x < self.width && y < self.height)
            .then(|| self.data[y as usize * self.width as usize + x as usize])
    }

    /// Applies `f` to every sample; `f` must stay within the depth's code range.
    pub(crate) fn map(&self, f: impl Fn(u16) -> u16) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            depth: self.depth,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn save(&self, path: &Path, format: ImageFormat) -> Result<()> {
        save_image(&Raster::Gray(self.clone()), path, format)
    }
}

/// Interleaved RGB samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    depth: BitDepth,
    data: Vec<u16>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, depth: BitDepth, data: Vec<u16>) -> Result<Self> {
        if data.len() != 3 * width as usize * height as usize {
            return Err(Error::ImageMismatch(format!(
                "{} samples for a {width}x{height} RGB image",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > depth.max_code()) {
            return Err(Error::ImageMismatch(format!(
                "sample exceeds {}-bit range",
                depth.bits()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            depth,
            data,
        })
    }

    /// Interleaves three equally sized channels.
    pub fn from_channels(r: &GrayImage, g: &GrayImage, b: &GrayImage) -> Result<Self> {
        for other in [g, b] {
            if (other.width, other.height) != (r.width, r.height) {
                return Err(Error::ImageMismatch(format!(
                    "channel sizes {}x{} and {}x{} differ",
                    r.width, r.height, other.width, other.height
                )));
            }
            if other.depth != r.depth {
                return Err(Error::ImageMismatch(format!(
                    "channel depths {} and {} differ",
                    r.depth.bits(),
                    other.depth.bits()
                )));
            }
        }
        let mut data = Vec::with_capacity(r.data.len() * 3);
        for i in 0..r.data.len() {
            data.extend_from_slice(&[r.data[i], g.data[i], b.data[i]]);
        }
        Ok(RgbImage {
            width: r.width,
            height: r.height,
            depth: r.depth,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> Option<[u16; 3]> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = 3 * (y as usize * self.width as usize + x as usize);
        Some([self.data[i], self.data[i + 1], self.data[i + 2]])
    }

    /// Extracts channel `c` (0 = R, 1 = G, 2 = B).
    pub fn channel(&self, c: usize) -> GrayImage {
        assert!(c < 3, "channel index {c} out of range");
        GrayImage {
            width: self.width,
            height: self.height,
            depth: self.depth,
            data: self.data.iter().skip(c).step_by(3).copied().collect(),
        }
    }

    pub fn save(&self, path: &Path, format: ImageFormat) -> Result<()> {
        save_image(&Raster::Rgb(self.clone()), path, format)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Raster {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Raster {
    pub fn depth(&self) -> BitDepth {
        match self {
            Raster::Gray(g) => g.depth,
            Raster::Rgb(c) => c.depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    Tiff,
    TiffDeflate,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Tiff | ImageFormat::TiffDeflate => "tif",
            ImageFormat::Png => "png",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "tif" | "tiff" => Some(ImageFormat::Tiff),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

fn encode_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn decode_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn save_image(img: &Raster, path: &Path, format: ImageFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ImageFormat::Tiff | ImageFormat::TiffDeflate => {
            let compression = if format == ImageFormat::TiffDeflate {
                Compression::Deflate(DeflateLevel::Balanced)
            } else {
                Compression::Uncompressed
            };
            write_tiff(img, &mut out, compression).map_err(|e| encode_err(path, e))?;
        }
        ImageFormat::Png => write_png(img, &mut out).map_err(|e| encode_err(path, e))?,
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_tiff<W: Write + std::io::Seek>(
    img: &Raster,
    out: &mut W,
    compression: Compression,
) -> tiff::TiffResult<()> {
    let mut enc = TiffEncoder::new(out)?.with_compression(compression);
    match img {
        Raster::Gray(g) => match g.depth {
            BitDepth::Eight => {
                let bytes: Vec<u8> = g.data.iter().map(|&v| v as u8).collect();
                enc.write_image::<colortype::Gray8>(g.width, g.height, &bytes)
            }
            BitDepth::Sixteen => enc.write_image::<colortype::Gray16>(g.width, g.height, &g.data),
        },
        Raster::Rgb(c) => match c.depth {
            BitDepth::Eight => {
                let bytes: Vec<u8> = c.data.iter().map(|&v| v as u8).collect();
                enc.write_image::<colortype::RGB8>(c.width, c.height, &bytes)
            }
            BitDepth::Sixteen => enc.write_image::<colortype::RGB16>(c.width, c.height, &c.data),
        },
    }
}

fn write_png<W: Write>(img: &Raster, out: &mut W) -> image::ImageResult<()> {
    let enc = PngEncoder::new_with_quality(out, CompressionType::Fast, FilterType::Adaptive);
    let (w, h, depth, data, gray) = match img {
        Raster::Gray(g) => (g.width, g.height, g.depth, &g.data, true),
        Raster::Rgb(c) => (c.width, c.height, c.depth, &c.data, false),
    };
    match depth {
        BitDepth::Eight => {
            let bytes: Vec<u8> = data.iter().map(|&v| v as u8).collect();
            let ct = if gray {
                ExtendedColorType::L8
            } else {
                ExtendedColorType::Rgb8
            };
            enc.write_image(&bytes, w, h, ct)
        }
        BitDepth::Sixteen => {
            let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_ne_bytes()).collect();
            let ct = if gray {
                ExtendedColorType::L16
            } else {
                ExtendedColorType::Rgb16
            };
            enc.write_image(&bytes, w, h, ct)
        }
    }
}

/// Encodes an 8-bit grayscale image as PNG into memory.
pub fn encode_png(img: &Raster) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_png(img, &mut buf).map_err(|e| encode_err(Path::new("<memory>"), e))?;
    Ok(buf)
}

pub fn load_image(path: &Path) -> Result<Raster> {
    match ImageFormat::from_path(path) {
        Some(ImageFormat::Png) => load_png(path),
        Some(_) => load_tiff(path),
        None => Err(Error::UnsupportedFormat(format!(
            "unrecognized image extension: {}",
            path.display()
        ))),
    }
}

fn load_tiff(path: &Path) -> Result<Raster> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(|e| decode_err(path, e))?
        .with_limits(Limits::unlimited());
    let (width, height) = dec.dimensions().map_err(|e| decode_err(path, e))?;
    let color = dec.colortype().map_err(|e| decode_err(path, e))?;
    let unsupported = |found: String| Error::UnsupportedSource {
        path: path.to_path_buf(),
        found,
    };
    let (gray, depth) = match color {
        tiff::ColorType::Gray(8) => (true, BitDepth::Eight),
        tiff::ColorType::Gray(16) => (true, BitDepth::Sixteen),
        tiff::ColorType::RGB(8) => (false, BitDepth::Eight),
        tiff::ColorType::RGB(16) => (false, BitDepth::Sixteen),
        other => return Err(unsupported(format!("{other:?}"))),
    };
    let data: Vec<u16> = match dec.read_image().map_err(|e| decode_err(path, e))? {
        DecodingResult::U8(v) => v.into_iter().map(u16::from).collect(),
        DecodingResult::U16(v) => v,
        _ => return Err(unsupported("non-integer samples".into())),
    };
    if gray {
        GrayImage::new(width, height, depth, data).map(Raster::Gray)
    } else {
        RgbImage::new(width, height, depth, data).map(Raster::Rgb)
    }
}

fn load_png(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|e| decode_err(path, e))?;
    let (w, h) = (img.width(), img.height());
    match img {
        image::DynamicImage::ImageLuma8(b) => GrayImage::new(
            w,
            h,
            BitDepth::Eight,
            b.into_raw().into_iter().map(u16::from).collect(),
        )
        .map(Raster::Gray),
        image::DynamicImage::ImageLuma16(b) => {
            GrayImage::new(w, h, BitDepth::Sixteen, b.into_raw()).map(Raster::Gray)
        }
        image::DynamicImage::ImageRgb8(b) => RgbImage::new(
            w,
            h,
            BitDepth::Eight,
            b.into_raw().into_iter().map(u16::from).collect(),
        )
        .map(Raster::Rgb),
        image::DynamicImage::ImageRgb16(b) => {
            RgbImage::new(w, h, BitDepth::Sixteen, b.into_raw()).map(Raster::Rgb)
        }
        other => Err(Error::UnsupportedSource {
            path: path.to_path_buf(),
            found: format!("{:?}", other.color()),
        }),
    }
}

/// Writes a floating-point plane as a 64-bit IEEE TIFF (bit-exact).
pub fn save_f64_tiff(width: u32, height: u32, values: &[f64], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    TiffEncoder::new(&mut out)
        .and_then(|mut enc| enc.write_image::<colortype::Gray64Float>(width, height, values))
        .map_err(|e| encode_err(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_f64_tiff(path: &Path) -> Result<(u32, u32, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(|e| decode_err(path, e))?
        .with_limits(Limits::unlimited());
    let (w, h) = dec.dimensions().map_err(|e| decode_err(path, e))?;
    match dec.read_image().map_err(|e| decode_err(path, e))? {
        DecodingResult::F64(v) => Ok((w, h, v)),
        _ => Err(decode_err(path, "expected 64-bit float samples")),
    }
}
