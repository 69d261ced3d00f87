//! Horizontal-stripe HSV histograms.

use image::RgbImage;

use crate::color::rgb_to_hsv;
use crate::error::{Error, Result};

pub const STRIPES: usize = 6;
pub const HUE_BINS: usize = 16;
pub const SAT_BINS: usize = 8;
pub const VAL_BINS: usize = 8;
pub const BLOCK: usize = HUE_BINS + SAT_BINS + VAL_BINS;
pub const FEATURE_DIM: usize = STRIPES * BLOCK;
/// Images are resampled to this size before binning.
pub const RESIZED: (u32, u32) = (128, 256);

/// Nearest-neighbour source index for each of `dst` output positions.
/// Mirror-symmetric: `map[dst-1-i] == src-1-map[i]`.
fn index_map(src: u32, dst: u32) -> Vec<u32> {
    let mut map = vec![0; dst as usize];
    for i in 0..dst.div_ceil(2) {
        let s = (((i as f64 + 0.5) * src as f64 / dst as f64) as u32).min(src - 1);
        map[i as usize] = s;
        map[(dst - 1 - i) as usize] = src - 1 - s;
    }
    map
}

pub fn bins_of(p: [u8; 3]) -> (usize, usize, usize) {
    let hsv = rgb_to_hsv(p.map(|c| c as f64 / 255.0));
    let h = ((hsv.h / 360.0 * HUE_BINS as f64) as usize).min(HUE_BINS - 1);
    let s = ((hsv.s * SAT_BINS as f64) as usize).min(SAT_BINS - 1);
    let v = ((hsv.v * VAL_BINS as f64) as usize).min(VAL_BINS - 1);
    (h, s, v)
}

pub fn stripe_of_row(y: u32) -> usize {
    (y as usize * STRIPES) / RESIZED.1 as usize
}

/// 192-dim descriptor: per stripe, hue, saturation and value histograms, each
/// carrying a third of the stripe's mass.
pub fn extract_features(img: &RgbImage) -> Result<Vec<f64>> {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Validation("cannot describe an empty image".into()));
    }
    let cols = index_map(w, RESIZED.0);
    let rows = index_map(h, RESIZED.1);
    let mut counts = [[0u32; BLOCK]; STRIPES];
    let mut npix = [0u32; STRIPES];
    for (y, &sy) in rows.iter().enumerate() {
        let stripe = stripe_of_row(y as u32);
        for &sx in &cols {
            let (hb, sb, vb) = bins_of(img.get_pixel(sx, sy).0);
            let c = &mut counts[stripe];
            c[hb] += 1;
            c[HUE_BINS + sb] += 1;
            c[HUE_BINS + SAT_BINS + vb] += 1;
            npix[stripe] += 1;
        }
    }
    let mut f = Vec::with_capacity(FEATURE_DIM);
    for (c, n) in counts.iter().zip(npix) {
        let denom = 3.0 * n as f64;
        f.extend(c.iter().map(|&k| if n == 0 { 0.0 } else { k as f64 / denom }));
    }
    Ok(f)
}
