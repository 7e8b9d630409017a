//! PNG rendering of scalar fields.
//!
//! Pixel `(x, y)` shows `alpha1 = x`, `alpha2` increasing upwards. Values are
//! mapped linearly from the field minimum to `min(cap, max)` through a fixed
//! five-stop colormap. Cells above the cap are light gray, masked cells black.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::scanner::ScalarField;
use crate::Result;

const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];
pub const CAPPED_COLOR: [u8; 3] = [211, 211, 211];
pub const MASKED_COLOR: [u8; 3] = [0, 0, 0];

/// Colormap lookup for `t` in `[0, 1]`.
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let x = t * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - k as f64;
    std::array::from_fn(|c| (STOPS[k][c] + f * (STOPS[k + 1][c] - STOPS[k][c])).round() as u8)
}

/// RGB pixels, top row first.
pub fn render(field: &ScalarField, cap: Option<f64>) -> Vec<u8> {
    let n = field.grid.n_points;
    let lo = field.min().unwrap_or(0.0);
    let hi = field.max().unwrap_or(1.0);
    let hi = cap.map_or(hi, |c| c.min(hi));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut px = Vec::with_capacity(n * n * 3);
    for row in 0..n {
        let j = n - 1 - row;
        for i in 0..n {
            let rgb = match field.get(i, j) {
                None => MASKED_COLOR,
                Some(v) if cap.is_some_and(|c| v > c) => CAPPED_COLOR,
                Some(v) => colormap((v - lo) / span),
            };
            px.extend_from_slice(&rgb);
        }
    }
    px
}

pub fn write_png(path: &Path, field: &ScalarField, cap: Option<f64>) -> Result<()> {
    let n = field.grid.n_points as u32;
    let mut enc = png::Encoder::new(BufWriter::new(File::create(path)?), n, n);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header()?;
    w.write_image_data(&render(field, cap))?;
    w.finish()?;
    Ok(())
}
