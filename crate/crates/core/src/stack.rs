//! Co-registered multiband image stacks.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::raster::{load_image, quantize, BitDepth, Raster};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMeta {
    /// 1-based position in the manifest.
    pub band_id: usize,
    pub wavelength_nm: f64,
    pub illumination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub meta: BandMeta,
    samples: Vec<u16>,
}

impl Band {
    pub fn samples(&self) -> &[u16] {
        &self.samples
    }
}

/// Axis-aligned pixel rectangle `(x0, y0, width, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn new(x0: u32, y0: u32, width: u32, height: u32) -> Self {
        Rect {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x0 as u64 + self.width as u64 <= width as u64
            && self.y0 as u64 + self.height as u64 <= height as u64
    }

    /// `inner` is relative to `self`; returns it in `self`'s parent coordinates.
    pub fn compose(&self, inner: Rect) -> Rect {
        Rect::new(
            self.x0 + inner.x0,
            self.y0 + inner.y0,
            inner.width,
            inner.height,
        )
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.width, self.height)
    }
}

impl From<Rect> for String {
    fn from(r: Rect) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for Rect {
    type Error = Error;

    fn try_from(s: String) -> Result<Rect> {
        s.parse()
    }
}

impl FromStr for Rect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("invalid rectangle '{s}', expected x0,y0,w,h")))?;
        match parts[..] {
            [x0, y0, w, h] => Ok(Rect::new(x0, y0, w, h)),
            _ => Err(Error::Config(format!(
                "invalid rectangle '{s}', expected x0,y0,w,h"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeScope {
    /// Each band stretched independently to 0..=255.
    #[default]
    PerBand,
    /// One min/max shared by all bands.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralStack {
    width: u32,
    height: u32,
    bit_depth: BitDepth,
    source_bit_depth: BitDepth,
    bands: Vec<Band>,
    normalized: bool,
}

impl SpectralStack {
    /// Builds a stack from in-memory planes, checking every invariant.
    pub fn new(
        width: u32,
        height: u32,
        bit_depth: BitDepth,
        bands: Vec<(BandMeta, Vec<u16>)>,
    ) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidStack("no bands".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidStack(format!(
                "zero-sized plane {width}x{height}"
            )));
        }
        let mut ids = HashSet::new();
        let mut out = Vec::with_capacity(bands.len());
        for (meta, samples) in bands {
            if !ids.insert(meta.band_id) {
                return Err(Error::InvalidStack(format!(
                    "duplicate band id {}",
                    meta.band_id
                )));
            }
            if !(meta.wavelength_nm > 0.0) {
                return Err(Error::InvalidStack(format!(
                    "band {}: wavelength must be positive, got {}",
                    meta.band_id, meta.wavelength_nm
                )));
            }
            if samples.len() != width as usize * height as usize {
                return Err(Error::InvalidStack(format!(
                    "band {}: {} samples for a {width}x{height} plane",
                    meta.band_id,
                    samples.len()
                )));
            }
            if samples.iter().any(|&v| v > bit_depth.max_code()) {
                return Err(Error::InvalidStack(format!(
                    "band {}: sample exceeds {}-bit range",
                    meta.band_id,
                    bit_depth.bits()
                )));
            }
            out.push(Band { meta, samples });
        }
        Ok(SpectralStack {
            width,
            height,
            bit_depth,
            source_bit_depth: bit_depth,
            bands: out,
            normalized: false,
        })
    }

    /// Reads a manifest and every band it references.
    ///
    /// Image paths are resolved relative to the manifest's directory. The first
    /// band fixes the stack geometry and bit depth.
    pub fn load(manifest: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
        let entries = parse_manifest(&text)?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut bands = Vec::with_capacity(entries.len());
        let mut geometry: Option<(u32, u32, BitDepth)> = None;
        for entry in entries {
            let path = if entry.path.is_absolute() {
                entry.path.clone()
            } else {
                base.join(&entry.path)
            };
            let img = match load_image(&path)? {
                Raster::Gray(g) => g,
                Raster::Rgb(_) => {
                    return Err(Error::UnsupportedSource {
                        path,
                        found: "3-channel RGB".into(),
                    })
                }
            };
            let band_id = entry.meta.band_id;
            match geometry {
                None => geometry = Some((img.width(), img.height(), img.depth())),
                Some((w, h, depth)) => {
                    if (img.width(), img.height()) != (w, h) {
                        return Err(Error::DimensionMismatch {
                            band_id,
                            got_width: img.width(),
                            got_height: img.height(),
                            width: w,
                            height: h,
                        });
                    }
                    if img.depth() != depth {
                        return Err(Error::MixedBitDepth {
                            band_id,
                            got: img.depth().bits(),
                            expected: depth.bits(),
                        });
                    }
                }
            }
            bands.push((entry.meta, img.into_data()));
        }
        let (w, h, depth) = geometry.ok_or(Error::EmptyManifest)?;
        SpectralStack::new(w, h, depth, bands)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    /// Depth of the images the stack was built from (unchanged by normalization).
    pub fn source_bit_depth(&self) -> BitDepth {
        self.source_bit_depth
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn band_by_id(&self, band_id: usize) -> Result<&Band> {
        self.bands
            .iter()
            .find(|b| b.meta.band_id == band_id)
            .ok_or(Error::UnknownBand(band_id))
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }

    /// Spectral vector at `(x, y)` in band order.
    pub fn pixel_vector(&self, x: u32, y: u32) -> Result<Vec<f64>> {
        if !self.contains(x, y) {
            return Err(Error::PixelOutOfBounds {
                x,
                y,
                width: self.width,
                height: self.height,
            });
        }
        let idx = y as usize * self.width as usize + x as usize;
        Ok(self.bands.iter().map(|b| b.samples[idx] as f64).collect())
    }

    /// Linearly stretches samples to 0..=255 (see [`NormalizeScope`]).
    ///
    /// Constant bands become all-zero planes and are reported as warnings.
    pub fn normalize(&self, scope: NormalizeScope) -> Result<(SpectralStack, Vec<Warning>)> {
        if self.normalized {
            return Err(Error::AlreadyNormalized);
        }
        let global = self
            .bands
            .iter()
            .map(|b| min_max(&b.samples))
            .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)))
            .expect("stack has at least one band");
        let mut warnings = Vec::new();
        let bands = self
            .bands
            .iter()
            .map(|band| {
                let (lo, hi) = match scope {
                    NormalizeScope::PerBand => min_max(&band.samples),
                    NormalizeScope::Global => global,
                };
                let samples = if lo == hi {
                    warnings.push(Warning::ConstantBand {
                        band_id: band.meta.band_id,
                    });
                    vec![0; band.samples.len()]
                } else {
                    let span = (hi - lo) as f64;
                    band.samples
                        .iter()
                        .map(|&v| quantize(255.0 * (v - lo) as f64 / span, 255))
                        .collect()
                };
                Band {
                    meta: band.meta.clone(),
                    samples,
                }
            })
            .collect();
        Ok((
            SpectralStack {
                width: self.width,
                height: self.height,
                bit_depth: BitDepth::Eight,
                source_bit_depth: self.source_bit_depth,
                bands,
                normalized: true,
            },
            warnings,
        ))
    }

    pub fn crop(&self, rect: Rect) -> Result<SpectralStack> {
        if rect.area() == 0 {
            return Err(Error::EmptyRect(rect));
        }
        if !rect.fits_within(self.width, self.height) {
            return Err(Error::RectOutOfBounds {
                rect,
                width: self.width,
                height: self.height,
            });
        }
        let w = self.width as usize;
        let bands = self
            .bands
            .iter()
            .map(|band| {
                let mut samples = Vec::with_capacity(rect.area() as usize);
                for y in rect.y0..rect.y0 + rect.height {
                    let start = y as usize * w + rect.x0 as usize;
                    samples.extend_from_slice(&band.samples[start..start + rect.width as usize]);
                }
                Band {
                    meta: band.meta.clone(),
                    samples,
                }
            })
            .collect();
        Ok(SpectralStack {
            width: rect.width,
            height: rect.height,
            bit_depth: self.bit_depth,
            source_bit_depth: self.source_bit_depth,
            bands,
            normalized: self.normalized,
        })
    }

    /// Marks in-memory data as already normalized (used for synthetic stacks
    /// whose samples are generated in 0..=255).
    pub fn assume_normalized(mut self) -> Result<Self> {
        if self
            .bands
            .iter()
            .any(|b| b.samples.iter().any(|&v| v > 255))
        {
            return Err(Error::InvalidStack(
                "samples above 255 cannot be flagged normalized".into(),
            ));
        }
        self.bit_depth = BitDepth::Eight;
        self.normalized = true;
        Ok(self)
    }
}

fn min_max(samples: &[u16]) -> (u16, u16) {
    samples
        .iter()
        .fold((u16::MAX, 0), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub meta: BandMeta,
}

/// Parses `path,wavelength_nm,illumination[,filter]` lines; `#` starts a comment.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |message: String| Error::Manifest {
            line: line_no,
            message,
        };
        if !(3..=4).contains(&fields.len()) {
            return Err(err(format!(
                "expected path,wavelength_nm,illumination[,filter], got {} fields",
                fields.len()
            )));
        }
        if fields[0].is_empty() {
            return Err(err("empty path".into()));
        }
        let wavelength_nm: f64 = fields[1]
            .parse()
            .map_err(|_| err(format!("invalid wavelength '{}'", fields[1])))?;
        if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
            return Err(err(format!(
                "wavelength must be positive, got {wavelength_nm}"
            )));
        }
        let filter = fields
            .get(3)
            .filter(|f| !f.is_empty())
            .map(|f| f.to_string());
        entries.push(ManifestEntry {
            path: PathBuf::from(fields[0]),
            meta: BandMeta {
                band_id: entries.len() + 1,
                wavelength_nm,
                illumination: fields[2].to_string(),
                filter,
            },
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(entries)
}
