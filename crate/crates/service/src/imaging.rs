use palimpsest_core::raster::quantize;
use palimpsest_core::{BitDepth, GrayImage};

/// Accepts `1`, `0.5`, `0.25`, `0.125` or `1/2`, `1/4`, `1/8`; returns the
/// block size.
pub fn parse_scale(s: &str) -> Option<u32> {
    match s.trim() {
        "1" | "1.0" | "1/1" => Some(1),
        "0.5" | ".5" | "1/2" => Some(2),
        "0.25" | ".25" | "1/4" => Some(4),
        "0.125" | ".125" | "1/8" => Some(8),
        _ => None,
    }
}

/// Averages `factor`×`factor` blocks; edge blocks average what they cover.
pub fn downsample(
    width: u32,
    height: u32,
    samples: &[u16],
    depth: BitDepth,
    factor: u32,
) -> GrayImage {
    let ow = width.div_ceil(factor);
    let oh = height.div_ceil(factor);
    let mut out = Vec::with_capacity(ow as usize * oh as usize);
    for by in 0..oh {
        for bx in 0..ow {
            let (mut sum, mut count) = (0u64, 0u64);
            for y in by * factor..((by + 1) * factor).min(height) {
                let row = y as usize * width as usize;
                for x in bx * factor..((bx + 1) * factor).min(width) {
                    sum += samples[row + x as usize] as u64;
                    count += 1;
                }
            }
            out.push(quantize(sum as f64 / count as f64, depth.max_code()));
        }
    }
    GrayImage::new(ow, oh, depth, out).expect("averages stay in range")
}
