//! Turning floating-point score planes into viewable images.
//!
//! Three rescaling schemes map a plane linearly onto `0..=max_code`:
//! the plane's own min/max, the min/max of the training points' scores, or
//! nearest-rank percentiles with the tails clamped. Composites, pseudocolor,
//! double thresholding and polynomial contrast work on the quantized images.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimred::ProjectionModel;
use crate::error::{Error, Result, Warning};
use crate::raster::{quantize, BitDepth, GrayImage, RgbImage};
use crate::stack::SpectralStack;

/// One projected plane; all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePlane {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl ScorePlane {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} plane",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(ScorePlane {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> Option<f64> {
        (x < self.width && y < self.height)
            .then(|| self.values[y as usize * self.width as usize + x as usize])
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Tail fraction removed by percentile rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Percentile {
    #[serde(rename = "0.01")]
    P0_01,
    #[serde(rename = "0.1")]
    P0_1,
    #[serde(rename = "1")]
    P1,
    #[serde(rename = "5")]
    P5,
}

impl Percentile {
    pub const ALL: [Percentile; 4] = [
        Percentile::P0_01,
        Percentile::P0_1,
        Percentile::P1,
        Percentile::P5,
    ];

    pub fn percent(self) -> f64 {
        self.hundredths() as f64 / 100.0
    }

    /// The percentage in units of 0.01 %, for exact rank arithmetic.
    fn hundredths(self) -> u64 {
        match self {
            Percentile::P0_01 => 1,
            Percentile::P0_1 => 10,
            Percentile::P1 => 100,
            Percentile::P5 => 500,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Percentile::P0_01 => "0.01",
            Percentile::P0_1 => "0.1",
            Percentile::P1 => "1",
            Percentile::P5 => "5",
        }
    }
}

impl TryFrom<f64> for Percentile {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Percentile::ALL
            .into_iter()
            .find(|c| c.percent() == p)
            .ok_or(Error::InvalidPercentile(p))
    }
}

/// Which tails percentile rescaling clips.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tails {
    #[default]
    Both,
    Low,
    High,
}

/// Serialized as its filename tag (`full`, `train`, `p5`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum RenderMode {
    FullRange,
    TrainingRange,
    Percentile(Percentile),
}

impl RenderMode {
    /// Filename tag: `full`, `train`, `p5`, `p0.01`, ...
    pub fn tag(self) -> String {
        match self {
            RenderMode::FullRange => "full".into(),
            RenderMode::TrainingRange => "train".into(),
            RenderMode::Percentile(p) => format!("p{}", p.label()),
        }
    }
}

impl From<RenderMode> for String {
    fn from(m: RenderMode) -> String {
        m.tag()
    }
}

impl TryFrom<String> for RenderMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl std::str::FromStr for RenderMode {
    type Err = Error;

    /// Accepts `full`, `train`, or `p<percent>` (e.g. `p5`, `p0.01`).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full_range" => Ok(RenderMode::FullRange),
            "train" | "training_range" => Ok(RenderMode::TrainingRange),
            _ => {
                let p = s
                    .strip_prefix('p')
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown render mode '{s}'")))?;
                Ok(RenderMode::Percentile(Percentile::try_from(p)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub mode: RenderMode,
    pub depth: BitDepth,
    #[serde(default)]
    pub tails: Tails,
}

impl RenderSpec {
    pub fn new(mode: RenderMode, depth: BitDepth) -> Self {
        RenderSpec {
            mode,
            depth,
            tails: Tails::Both,
        }
    }
}

/// Maps `[lo, hi]` linearly onto `0..=max_code`, clamping outside values.
fn linear_map(
    plane: &ScorePlane,
    lo: f64,
    hi: f64,
    depth: BitDepth,
    degenerate: Warning,
) -> (GrayImage, Vec<Warning>) {
    let max = depth.max_code();
    if !(hi > lo) {
        let zeros = vec![0; plane.values.len()];
        let img = GrayImage::new(plane.width, plane.height, depth, zeros).expect("valid size");
        return (img, vec![degenerate]);
    }
    let span = hi - lo;
    let data: Vec<u16> = plane
        .values
        .par_iter()
        .map(|&v| quantize((v - lo) / span * max as f64, max))
        .collect();
    let img = GrayImage::new(plane.width, plane.height, depth, data).expect("codes in range");
    (img, Vec::new())
}

/// Plane minimum → 0, maximum → max code.
pub fn rescale_full(plane: &ScorePlane, depth: BitDepth) -> (GrayImage, Vec<Warning>) {
    let (lo, hi) = plane.min_max();
    linear_map(plane, lo, hi, depth, Warning::ConstantPlane)
}

/// Uses the span of the training points' scores on component `k`.
pub fn rescale_training_range(
    plane: &ScorePlane,
    model: &ProjectionModel,
    k: usize,
    depth: BitDepth,
) -> Result<(GrayImage, Vec<Warning>)> {
    let (lo, hi) = model.training_range(k)?;
    Ok(linear_map(
        plane,
        lo,
        hi,
        depth,
        Warning::DegenerateRange { lo, hi },
    ))
}

/// Nearest-rank percentile: the value at 1-based rank `ceil(q/100 · N)`.
fn nearest_rank(values: &mut [f64], hundredths: u64) -> f64 {
    let n = values.len() as u64;
    let rank = (hundredths * n).div_ceil(10_000).max(1);
    let idx = (rank - 1) as usize;
    let (_, v, _) = values.select_nth_unstable_by(idx, f64::total_cmp);
    *v
}

/// The clipping window used by [`rescale_percentile`].
pub fn percentile_window(plane: &ScorePlane, p: Percentile, tails: Tails) -> (f64, f64) {
    let mut scratch = plane.values.clone();
    let (min, max) = plane.min_max();
    let lo = match tails {
        Tails::Both | Tails::Low => nearest_rank(&mut scratch, p.hundredths()),
        Tails::High => min,
    };
    let hi = match tails {
        Tails::Both | Tails::High => nearest_rank(&mut scratch, 10_000 - p.hundredths()),
        Tails::Low => max,
    };
    (lo, hi)
}

/// Clamps below the p-th and above the (100−p)-th percentile, then maps linearly.
pub fn rescale_percentile(
    plane: &ScorePlane,
    p: Percentile,
    tails: Tails,
    depth: BitDepth,
) -> (GrayImage, Vec<Warning>) {
    let (lo, hi) = percentile_window(plane, p, tails);
    linear_map(plane, lo, hi, depth, Warning::DegenerateRange { lo, hi })
}

/// Renders component `k` according to `spec`.
pub fn render_plane(
    plane: &ScorePlane,
    spec: &RenderSpec,
    model: &ProjectionModel,
    k: usize,
) -> Result<(GrayImage, Vec<Warning>)> {
    match spec.mode {
        RenderMode::FullRange => Ok(rescale_full(plane, spec.depth)),
        RenderMode::TrainingRange => rescale_training_range(plane, model, k, spec.depth),
        RenderMode::Percentile(p) => Ok(rescale_percentile(plane, p, spec.tails, spec.depth)),
    }
}

/// Which rendered planes feed the R, G and B channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeRecipe {
    pub red: usize,
    pub green: usize,
    pub blue: usize,
    /// Two channels (0 = R, 1 = G, 2 = B) exchanged after assembly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap: Option<(usize, usize)>,
}

impl CompositeRecipe {
    pub fn new(red: usize, green: usize, blue: usize) -> Self {
        CompositeRecipe {
            red,
            green,
            blue,
            swap: None,
        }
    }

    pub fn with_swap(mut self, a: usize, b: usize) -> Self {
        self.swap = Some((a, b));
        self
    }

    /// `<run>_R<k>G<k>B<k>[_swapXY].<ext>`
    pub fn file_name(&self, run: &str, ext: &str) -> String {
        let mut name = format!("{run}_R{}G{}B{}", self.red, self.green, self.blue);
        if let Some((a, b)) = self.swap {
            name.push_str(&format!("_swap{a}{b}"));
        }
        format!("{name}.{ext}")
    }
}

pub fn compose_rgb(images: &[GrayImage], recipe: &CompositeRecipe) -> Result<RgbImage> {
    let pick = |index: usize| {
        images.get(index).ok_or(Error::PlaneIndex {
            index,
            count: images.len(),
        })
    };
    let mut channels = [pick(recipe.red)?, pick(recipe.green)?, pick(recipe.blue)?];
    if let Some((a, b)) = recipe.swap {
        if a > 2 || b > 2 {
            return Err(Error::Config(format!("invalid channel swap {a}{b}")));
        }
        channels.swap(a, b);
    }
    RgbImage::from_channels(channels[0], channels[1], channels[2])
}

/// R = `red_band`, G = B = `uv_band`: pixels where the two bands agree render gray.
pub fn pseudocolor(stack: &SpectralStack, red_band: usize, uv_band: usize) -> Result<RgbImage> {
    let red = stack.band_by_id(red_band)?;
    let uv = stack.band_by_id(uv_band)?;
    let mut data = Vec::with_capacity(3 * stack.pixel_count());
    for (&r, &u) in red.samples().iter().zip(uv.samples()) {
        data.extend_from_slice(&[r, u, u]);
    }
    RgbImage::new(stack.width(), stack.height(), stack.bit_depth(), data)
}

/// Whitens `v ≤ t1`, darkens `t1 < v ≤ t2` by `alpha`, leaves brighter pixels.
pub fn double_threshold(img: &GrayImage, t1: u16, t2: u16, alpha: f64) -> Result<GrayImage> {
    let max = img.depth().max_code();
    if t1 >= t2 || t2 > max {
        return Err(Error::InvalidThresholds { t1, t2, max });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(img.map(|v| {
        if v <= t1 {
            max
        } else if v <= t2 {
            quantize(alpha * v as f64, max)
        } else {
            v
        }
    }))
}

/// `v → round(max · (v / max)^order)` for order 2, 3 or 4.
pub fn enhance_polynomial(img: &GrayImage, order: u32) -> Result<GrayImage> {
    if !(2..=4).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    let max = img.depth().max_code();
    let m = max as f64;
    Ok(img.map(|v| quantize(m * (v as f64 / m).powi(order as i32), max)))
}
