use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use palimpsest_core::{
    BitDepth, CompositeRecipe, Error, Method, NormalizeScope, Rect, RenderMode, Tails,
};
use palimpsest_core::pipeline::EvalOn;
use palimpsest_core::ImageFormat;

#[derive(Debug, Parser)]
#[command(name = "palimpsest", version, about = "Spectral enhancement of palimpsest page images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a band manifest, report the stack, optionally write normalized bands.
    Ingest(IngestArgs),
    /// Fit a projection model and write it as JSON.
    Fit(FitArgs),
    /// Write floating-point score planes as 64-bit TIFF.
    Project(ProjectArgs),
    /// Render grayscale planes and composites from a fitted model.
    Render(RenderArgs),
    /// Fit, project, render and evaluate in one go.
    Run(RunArgs),
    /// Rank images by Davies-Bouldin index on underwriting/parchment points.
    Evaluate(EvaluateArgs),
    /// Double-threshold a grayscale image.
    Dt(DtArgs),
    /// Polynomial contrast stretch of a grayscale image.
    Contrast(ContrastArgs),
    /// Red band in R, ultraviolet band in G and B.
    Pseudocolor(PseudocolorArgs),
    /// Time the pipeline on a generated page.
    Bench(BenchArgs),
    /// Start the annotation service.
    Serve(ServeArgs),
}

fn serde_value<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<RenderMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_depth(s: &str) -> Result<BitDepth, String> {
    s.parse::<u32>()
        .ok()
        .and_then(BitDepth::from_bits)
        .ok_or_else(|| format!("bit depth must be 8 or 16, got '{s}'"))
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `R,G,B` or `R,G,B,swapXY` with X, Y channel numbers 0..=2.
pub fn parse_composite(s: &str) -> Result<CompositeRecipe, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || format!("composite must look like 'R,G,B' or 'R,G,B,swapXY', got '{s}'");
    if !(3..=4).contains(&parts.len()) {
        return Err(bad());
    }
    let plane = |p: &str| p.parse::<usize>().map_err(|_| bad());
    let recipe = CompositeRecipe::new(plane(parts[0])?, plane(parts[1])?, plane(parts[2])?);
    match parts.get(3) {
        None => Ok(recipe),
        Some(swap) => {
            let digits: Vec<usize> = swap
                .strip_prefix("swap")
                .ok_or_else(bad)?
                .chars()
                .map(|c| c.to_digit(10).map(|d| d as usize))
                .collect::<Option<_>>()
                .ok_or_else(bad)?;
            match digits[..] {
                [a, b] => Ok(recipe.with_swap(a, b)),
                _ => Err(bad()),
            }
        }
    }
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("size must look like WxH, got '{s}'"))?;
    let dim = |v: &str| {
        v.parse::<u32>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| format!("invalid dimension '{v}'"))
    };
    Ok((dim(w)?, dim(h)?))
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "PALIMPSEST_OUT", default_value = ".")]
    pub out: PathBuf,
}

/// Input selection shared by every command that reads a stack.
#[derive(Debug, Clone, Args)]
pub struct StackArgs {
    /// Band manifest (`path,wavelength_nm,illumination[,filter]` per line).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Region of interest as `x,y,w,h`.
    #[arg(long, value_parser = parse_rect)]
    pub crop: Option<Rect>,
    /// `per_band` or `global`.
    #[arg(long, value_parser = serde_value::<NormalizeScope>)]
    pub normalize: Option<NormalizeScope>,
}

/// Pipeline settings. Flags override values read from `--config`.
#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// TOML pipeline configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub stack: StackArgs,
    /// Training points (`class,x,y` CSV).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// cva, lda, pca or pca_unsupervised.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Number of components to keep.
    #[arg(short = 'k', long)]
    pub components: Option<usize>,
    /// Ridge factor added to the within-class scatter.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Rescale mode: full, train, or p<percent> (p0.01, p0.1, p1, p5). Repeatable.
    #[arg(long = "mode", value_parser = parse_mode)]
    pub modes: Vec<RenderMode>,
    /// Output bit depth, 8 or 16. Repeatable.
    #[arg(long = "depth", value_parser = parse_depth)]
    pub depths: Vec<BitDepth>,
    /// Percentile clipping tails: both, low or high.
    #[arg(long, value_parser = serde_value::<Tails>)]
    pub tails: Option<Tails>,
    /// png, tiff or tiff_deflate.
    #[arg(long, value_parser = serde_value::<ImageFormat>)]
    pub format: Option<ImageFormat>,
    /// Plane to write as grayscale (0-based). Repeatable; all when omitted.
    #[arg(long = "plane")]
    pub planes: Vec<usize>,
    /// Composite recipe `R,G,B[,swapXY]`. Repeatable.
    #[arg(long = "composite", value_parser = parse_composite)]
    pub composites: Vec<CompositeRecipe>,
    /// Evaluate the quantized green image or the raw score plane.
    #[arg(long, value_parser = serde_value::<EvalOn>)]
    pub eval_on: Option<EvalOn>,
    /// Output directory.
    #[arg(long, env = "PALIMPSEST_OUT")]
    pub out: Option<PathBuf>,
    /// Run name; prefixes every output file.
    #[arg(long)]
    pub run: Option<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub stack: StackArgs,
    /// Write the normalized bands and a manifest into this directory.
    #[arg(long)]
    pub write: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Use this model instead of fitting one.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Model written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Points file with `underwriting` and `parchment` classes.
    #[arg(long)]
    pub points: PathBuf,
    /// Images to rank. RGB images are judged on their green channel.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    /// Treat inputs as 64-bit score-plane TIFFs written by `project`.
    #[arg(long)]
    pub raw: bool,
    /// Also write the ranking as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DtArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub t1: u16,
    #[arg(long)]
    pub t2: u16,
    /// Darkening factor for values in (t1, t2].
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ContrastArgs {
    pub input: PathBuf,
    /// Polynomial order: 2, 3 or 4.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..=4))]
    pub order: u32,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PseudocolorArgs {
    #[command(flatten)]
    pub stack: StackArgs,
    /// Band id (1-based manifest order) for the red channel.
    #[arg(long)]
    pub red: usize,
    /// Band id for the green and blue channels.
    #[arg(long)]
    pub uv: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = parse_size, default_value = "2000x2000")]
    pub size: (u32, u32),
    #[arg(long, default_value_t = 23)]
    pub bands: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Points per class in the generated training set.
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[arg(long, value_parser = serde_value::<ImageFormat>, default_value = "png")]
    pub format: ImageFormat,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Static UI bundle to serve at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}
