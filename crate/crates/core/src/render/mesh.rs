use std::sync::Arc;

use image::RgbImage;

use crate::color::Rgb;
use crate::geom::{Aabb, Vec3};

/// What a pixel of a pedestrian shows; lets consumers mask clothing regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Part {
    Background = 0,
    Skin = 1,
    Hair = 2,
    Upper = 3,
    Lower = 4,
    Shoe = 5,
    Accessory = 6,
}

impl Part {
    pub fn is_clothing(self) -> bool {
        matches!(self, Part::Upper | Part::Lower)
    }

    pub fn from_u8(v: u8) -> Part {
        match v {
            1 => Part::Skin,
            2 => Part::Hair,
            3 => Part::Upper,
            4 => Part::Lower,
            5 => Part::Shoe,
            6 => Part::Accessory,
            _ => Part::Background,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Material {
    Solid(Rgb),
    /// Repeating texture; `uv` is in texels.
    Tile(Arc<RgbImage>),
    /// Two-color checker with square cells of `cell` uv units.
    Paving {
        a: Rgb,
        b: Rgb,
        cell: f64,
    },
}

impl Material {
    #[inline]
    pub fn albedo(&self, uv: [f64; 2]) -> Rgb {
        match self {
            Material::Solid(c) => *c,
            Material::Tile(img) => {
                let (w, h) = (img.width() as i64, img.height() as i64);
                let x = (uv[0].floor() as i64).rem_euclid(w) as u32;
                let y = (uv[1].floor() as i64).rem_euclid(h) as u32;
                Rgb::from_u8(img.get_pixel(x, y).0)
            }
            Material::Paving { a, b, cell } => {
                let i = (uv[0] / cell).floor() as i64 + (uv[1] / cell).floor() as i64;
                if i.rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Triangle {
    pub v: [Vec3; 3],
    pub uv: [[f64; 2]; 3],
    /// Outward unit normal.
    pub normal: Vec3,
    pub material: Arc<Material>,
    pub label: u32,
    pub part: Part,
    /// Skip when facing away from the camera (closed solids only).
    pub cull: bool,
}

/// Oriented box; `axes` are unit vectors, `half` the half extents along them.
#[derive(Debug, Clone)]
pub struct BoxPrim {
    pub center: Vec3,
    pub axes: [Vec3; 3],
    pub half: [f64; 3],
    pub material: Arc<Material>,
    pub label: u32,
    pub part: Part,
}

/// Meters per texel when mapping tiles onto boxes.
pub const TEXEL_METERS: f64 = 0.04;

impl BoxPrim {
    pub fn from_aabb(b: &Aabb, material: Arc<Material>, label: u32, part: Part) -> Self {
        Self {
            center: b.center(),
            axes: [Vec3::X, Vec3::Y, Vec3::Z],
            half: b.half_extents(),
            material,
            label,
            part,
        }
    }

    pub fn corner(&self, sx: f64, sy: f64, sz: f64) -> Vec3 {
        self.center
            + self.axes[0] * (sx * self.half[0])
            + self.axes[1] * (sy * self.half[1])
            + self.axes[2] * (sz * self.half[2])
    }

    /// Appends the 12 outward-facing triangles of the box.
    pub fn triangulate(&self, out: &mut Vec<Triangle>) {
        for axis in 0..3 {
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            for sign in [-1.0f64, 1.0] {
                let normal = self.axes[axis] * sign;
                // Face corners in (a, b) local coordinates, counter-clockwise seen from outside.
                let quad: [(f64, f64); 4] = if sign > 0.0 {
                    [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
                } else {
                    [(-1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (1.0, -1.0)]
                };
                let pts: Vec<(Vec3, [f64; 2])> = quad
                    .iter()
                    .map(|&(ca, cb)| {
                        let mut s = [0.0; 3];
                        s[axis] = sign;
                        s[a] = ca;
                        s[b] = cb;
                        let p = self.corner(s[0], s[1], s[2]);
                        let uv = [
                            (ca + 1.0) * self.half[a] / TEXEL_METERS,
                            (1.0 - cb) * self.half[b] / TEXEL_METERS,
                        ];
                        (p, uv)
                    })
                    .collect();
                for (i, j, k) in [(0, 1, 2), (0, 2, 3)] {
                    out.push(Triangle {
                        v: [pts[i].0, pts[j].0, pts[k].0],
                        uv: [pts[i].1, pts[j].1, pts[k].1],
                        normal,
                        material: self.material.clone(),
                        label: self.label,
                        part: self.part,
                        cull: true,
                    });
                }
            }
        }
    }
}

/// Double-sided quad with corners in order; `uv` per corner.
pub fn quad(
    corners: [Vec3; 4],
    uv: [[f64; 2]; 4],
    normal: Vec3,
    material: Arc<Material>,
    out: &mut Vec<Triangle>,
) {
    for (i, j, k) in [(0, 1, 2), (0, 2, 3)] {
        out.push(Triangle {
            v: [corners[i], corners[j], corners[k]],
            uv: [uv[i], uv[j], uv[k]],
            normal,
            material: material.clone(),
            label: 0,
            part: Part::Background,
            cull: false,
        });
    }
}
