//! Seeded synthetic palimpsest pages for tests and benchmarks.
//!
//! A page carries four materials: bare parchment, erased undertext (a faint
//! absorber strongest in the ultraviolet), dark overtext, and pixels where both
//! inks overlap. Undertext runs in horizontal lines, overtext in vertical
//! columns. A smooth illumination field multiplies every band, and each
//! sample gets independent Gaussian noise.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{quantize, BitDepth, GrayImage, ImageFormat};
use crate::stack::{BandMeta, SpectralStack};
use crate::training::{names, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Material {
    Parchment = 0,
    Undertext = 1,
    Overtext = 2,
    Both = 3,
}

impl Material {
    pub const ALL: [Material; 4] = [
        Material::Parchment,
        Material::Undertext,
        Material::Overtext,
        Material::Both,
    ];

    pub fn class_name(self) -> &'static str {
        match self {
            Material::Parchment => names::PARCHMENT,
            Material::Undertext => names::UNDERWRITING,
            Material::Overtext => names::OVERWRITING,
            Material::Both => names::BOTH,
        }
    }

    fn from_code(code: u8) -> Material {
        Material::ALL[code as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub width: u32,
    pub height: u32,
    pub bands: usize,
    pub seed: u64,
    /// Noise standard deviation as a fraction of full scale.
    pub noise: f64,
}

impl SyntheticSpec {
    pub fn new(width: u32, height: u32, bands: usize, seed: u64) -> Self {
        SyntheticSpec {
            width,
            height,
            bands,
            seed,
            noise: 0.008,
        }
    }
}

/// Position of band `b` along the spectrum, 0 (UV) to 1 (IR).
fn spectral_position(b: usize, bands: usize) -> f64 {
    if bands == 1 {
        0.0
    } else {
        b as f64 / (bands - 1) as f64
    }
}

/// Reflectance of each material at spectral position `t`.
pub fn reflectance(material: Material, t: f64) -> f64 {
    let parchment = 0.55 + 0.30 * t;
    let under = parchment - (0.18 * (-t / 0.25).exp() + 0.02);
    let over = 0.12 + 0.05 * t;
    match material {
        Material::Parchment => parchment,
        Material::Undertext => under,
        Material::Overtext => over,
        Material::Both => over * under / parchment,
    }
}

fn illumination(x: u32, y: u32, width: u32, height: u32) -> f64 {
    let u = x as f64 / width as f64;
    let v = y as f64 / height as f64;
    1.0 + 0.12 * (u - 0.5) + 0.08 * (v - 0.5) + 0.05 * (std::f64::consts::TAU * (u + v)).sin()
}

/// Draws strokes of random glyphs along text lines.
///
/// `along` is the reading direction length, `across` the perpendicular one;
/// `set(a, c)` marks a pixel in those coordinates.
fn write_lines(
    rng: &mut ChaCha8Rng,
    along: u32,
    across: u32,
    line: u32,
    pitch: u32,
    offset: u32,
    mut set: impl FnMut(u32, u32),
) {
    let stroke = (line / 5).max(1);
    let mut c0 = offset;
    while c0 + line < across {
        let mut a = rng.random_range(0..line.max(2));
        while a + line < along {
            let glyph = rng.random_range(line / 2..=line).max(2);
            for _ in 0..rng.random_range(2..=3) {
                let (da, dc, wa, wc) = if rng.random_bool(0.5) {
                    (rng.random_range(0..glyph), 0, stroke, line)
                } else {
                    (0, rng.random_range(0..line), glyph, stroke)
                };
                for i in 0..wa {
                    for j in 0..wc {
                        let (pa, pc) = (a + da + i, c0 + dc + j);
                        if pa < along && pc < across {
                            set(pa, pc);
                        }
                    }
                }
            }
            a += glyph + rng.random_range(stroke..=2 * stroke);
            if rng.random_bool(0.15) {
                a += line;
            }
        }
        c0 += pitch;
    }
}

/// A generated page with its ground-truth material map.
#[derive(Debug, Clone)]
pub struct SyntheticPage {
    pub stack: SpectralStack,
    materials: Vec<u8>,
}

impl SyntheticPage {
    pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticPage> {
        let (w, h) = (spec.width, spec.height);
        let mut layout_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut materials = vec![0u8; w as usize * h as usize];

        let under_line = (h / 40).max(5);
        write_lines(
            &mut layout_rng,
            w,
            h,
            under_line,
            2 * under_line + under_line / 2,
            under_line / 2,
            |x, y| {
                materials[y as usize * w as usize + x as usize] |= 1;
            },
        );
        let over_line = (w / 25).max(6);
        write_lines(
            &mut layout_rng,
            h,
            w,
            over_line,
            3 * over_line,
            over_line,
            |y, x| {
                materials[y as usize * w as usize + x as usize] |= 2;
            },
        );

        let full = BitDepth::Sixteen.max_code();
        let scale = 60_000.0;
        let noise = Normal::new(0.0, spec.noise * scale).expect("finite noise");
        let gain: Vec<f64> = (0..h)
            .flat_map(|y| (0..w).map(move |x| illumination(x, y, w, h)))
            .collect();

        let bands: Vec<(BandMeta, Vec<u16>)> = (0..spec.bands)
            .into_par_iter()
            .map(|b| {
                let t = spectral_position(b, spec.bands);
                let levels = Material::ALL.map(|m| scale * reflectance(m, t));
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(b as u64 + 1);
                let samples = materials
                    .iter()
                    .zip(&gain)
                    .map(|(&m, &g)| quantize(g * levels[m as usize] + noise.sample(&mut rng), full))
                    .collect();
                let wavelength = 365.0 + 575.0 * t;
                let illumination = match wavelength {
                    w if w < 400.0 => "UV",
                    w if w > 700.0 => "IR",
                    _ => "visible",
                };
                let meta = BandMeta {
                    band_id: b + 1,
                    wavelength_nm: wavelength,
                    illumination: illumination.into(),
                    filter: None,
                };
                (meta, samples)
            })
            .collect();

        let stack = SpectralStack::new(w, h, BitDepth::Sixteen, bands)?;
        Ok(SyntheticPage { stack, materials })
    }

    pub fn material_at(&self, x: u32, y: u32) -> Material {
        Material::from_code(self.materials[y as usize * self.stack.width() as usize + x as usize])
    }

    pub fn count(&self, material: Material) -> usize {
        self.materials
            .iter()
            .filter(|&&m| m == material as u8)
            .count()
    }

    /// `n` distinct pixels of `material`, chosen uniformly by a seeded draw.
    pub fn sample(&self, material: Material, n: usize, seed: u64) -> Vec<(u32, u32)> {
        let w = self.stack.width() as usize;
        let pool: Vec<usize> = (0..self.materials.len())
            .filter(|&i| self.materials[i] == material as u8)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, pool.len(), n.min(pool.len()))
            .into_iter()
            .map(|k| ((pool[k] % w) as u32, (pool[k] / w) as u32))
            .collect()
    }

    /// Writes each band as `band_NN.tif` plus `manifest.csv` into `dir`;
    /// returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::from("# path,wavelength_nm,illumination\n");
        for band in self.stack.bands() {
            let name = format!("band_{:02}.tif", band.meta.band_id);
            let img = GrayImage::new(
                self.stack.width(),
                self.stack.height(),
                self.stack.bit_depth(),
                band.samples().to_vec(),
            )?;
            img.save(&dir.join(&name), ImageFormat::Tiff)?;
            manifest.push_str(&format!(
                "{name},{},{}\n",
                band.meta.wavelength_nm, band.meta.illumination
            ));
        }
        let path = dir.join("manifest.csv");
        fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// `n` annotated points for each of the four materials.
    pub fn training_set(&self, n: usize, seed: u64) -> TrainingSet {
        let mut ts = TrainingSet::new();
        for (i, m) in Material::ALL.into_iter().enumerate() {
            ts.declare_class(m.class_name());
            for (x, y) in self.sample(m, n, seed.wrapping_add(i as u64)) {
                ts.add_point(m.class_name(), x, y);
            }
        }
        ts
    }
}
