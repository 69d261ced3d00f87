use serde::{Deserialize, Serialize};

/// Linear RGB triple with components in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rgb(pub [f64; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0.0, 0.0, 0.0]);
    pub const WHITE: Rgb = Rgb([1.0, 1.0, 1.0]);

    pub fn from_u8(p: [u8; 3]) -> Self {
        Rgb([p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
    }

    pub fn to_u8(self) -> [u8; 3] {
        self.0.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)
    }

    pub fn scale(self, k: f64) -> Self {
        Rgb(self.0.map(|c| c * k))
    }

    pub fn modulate(self, other: Rgb) -> Self {
        Rgb([
            self.0[0] * other.0[0],
            self.0[1] * other.0[1],
            self.0[2] * other.0[2],
        ])
    }

    pub fn lerp(self, other: Rgb, t: f64) -> Self {
        Rgb([
            self.0[0] + (other.0[0] - self.0[0]) * t,
            self.0[1] + (other.0[1] - self.0[1]) * t,
            self.0[2] + (other.0[2] - self.0[2]) * t,
        ])
    }

    pub fn to_hsv(self) -> Hsv {
        rgb_to_hsv(self.0)
    }
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> Hsv {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max <= 0.0 { 0.0 } else { delta / max };
    Hsv {
        h: h.rem_euclid(360.0),
        s,
        v: max,
    }
}

pub fn hsv_to_rgb(Hsv { h, s, v }: Hsv) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Rotates hue by `degrees`, optionally capping the value channel.
pub fn adjust_pixel(p: [u8; 3], hue_shift: f64, value_cap: Option<f64>) -> [u8; 3] {
    if hue_shift == 0.0 && value_cap.is_none() {
        return p;
    }
    let mut hsv = Rgb::from_u8(p).to_hsv();
    hsv.h += hue_shift;
    if let Some(cap) = value_cap {
        hsv.v = hsv.v.min(cap);
    }
    Rgb(hsv_to_rgb(hsv)).to_u8()
}

/// Rec. 601 luma of an 8-bit pixel, in `[0, 255]`.
pub fn luma(p: [u8; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_round_trip_primaries() {
        for (rgb, h) in [
            ([1.0, 0.0, 0.0], 0.0),
            ([0.0, 1.0, 0.0], 120.0),
            ([0.0, 0.0, 1.0], 240.0),
            ([1.0, 1.0, 0.0], 60.0),
        ] {
            let hsv = rgb_to_hsv(rgb);
            assert!((hsv.h - h).abs() < 1e-12);
            assert_eq!(hsv.s, 1.0);
            assert_eq!(hsv.v, 1.0);
            let back = hsv_to_rgb(hsv);
            for i in 0..3 {
                assert!((back[i] - rgb[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grey_has_zero_saturation() {
        let hsv = rgb_to_hsv([0.5, 0.5, 0.5]);
        assert_eq!(hsv.s, 0.0);
        assert_eq!(hsv.h, 0.0);
    }

    #[test]
    fn value_cap_darkens() {
        let p = adjust_pixel([250, 200, 10], 0.0, Some(0.25));
        assert!(p.iter().all(|&c| c as f64 <= 0.25 * 255.0 + 0.5));
    }
}
