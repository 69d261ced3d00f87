//! Triangle scan conversion with near-plane clipping.
//!
//! Coverage is decided at pixel centers with edge functions and a top-left
//! rule, so triangles sharing an edge never both cover a pixel on it. Depth is
//! the camera-space `z`, interpolated perspective-correctly together with the
//! texture coordinates.

use super::camera::Projector;
use crate::geom::Vec3;

/// Near clipping distance in meters.
pub const NEAR: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
pub struct ClipVertex {
    /// Camera-space position.
    pub pos: Vec3,
    pub uv: [f64; 2],
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Viewport {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Viewport {
    pub fn full(width: u32, height: u32) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }
}

/// One covered pixel.
#[derive(Debug, Clone, Copy)]
pub struct Fragment {
    pub x: u32,
    pub y: u32,
    pub depth: f64,
    pub uv: [f64; 2],
}

fn clip_near(tri: &[ClipVertex; 3], out: &mut Vec<ClipVertex>) {
    out.clear();
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.pos.z >= NEAR;
        let b_in = b.pos.z >= NEAR;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (NEAR - a.pos.z) / (b.pos.z - a.pos.z);
            let mut pos = a.pos.lerp(b.pos, t);
            pos.z = NEAR;
            out.push(ClipVertex {
                pos,
                uv: [
                    a.uv[0] + (b.uv[0] - a.uv[0]) * t,
                    a.uv[1] + (b.uv[1] - a.uv[1]) * t,
                ],
            });
        }
    }
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    inv_z: f64,
    u_over_z: f64,
    v_over_z: f64,
}

#[inline]
fn edge(a: &ScreenVertex, b: &ScreenVertex, px: f64, py: f64) -> f64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

#[inline]
fn owns_zero(a: &ScreenVertex, b: &ScreenVertex) -> bool {
    let dy = b.y - a.y;
    dy > 0.0 || (dy == 0.0 && b.x - a.x < 0.0)
}

/// Rasterizes a camera-space triangle, calling `emit` for every covered pixel
/// inside `viewport`.
pub fn rasterize_triangle(
    tri: &[ClipVertex; 3],
    proj: &Projector,
    viewport: Viewport,
    clip_buf: &mut Vec<ClipVertex>,
    mut emit: impl FnMut(Fragment),
) {
    if tri.iter().all(|v| v.pos.z < NEAR) {
        return;
    }
    clip_near(tri, clip_buf);
    if clip_buf.len() < 3 {
        return;
    }
    let screen: Vec<ScreenVertex> = clip_buf
        .iter()
        .map(|v| {
            let [x, y] = proj.project(v.pos);
            let inv_z = 1.0 / v.pos.z;
            ScreenVertex {
                x,
                y,
                inv_z,
                u_over_z: v.uv[0] * inv_z,
                v_over_z: v.uv[1] * inv_z,
            }
        })
        .collect();
    for k in 1..screen.len() - 1 {
        scan(&screen[0], &screen[k], &screen[k + 1], viewport, &mut emit);
    }
}

fn scan(
    v0: &ScreenVertex,
    v1: &ScreenVertex,
    v2: &ScreenVertex,
    vp: Viewport,
    emit: &mut impl FnMut(Fragment),
) {
    let mut area = edge(v0, v1, v2.x, v2.y);
    let (v1, v2) = if area < 0.0 {
        area = -area;
        (v2, v1)
    } else {
        (v1, v2)
    };
    if !(area > 0.0) || !area.is_finite() {
        return;
    }
    let min_x = v0.x.min(v1.x).min(v2.x);
    let max_x = v0.x.max(v1.x).max(v2.x);
    let min_y = v0.y.min(v1.y).min(v2.y);
    let max_y = v0.y.max(v1.y).max(v2.y);
    let x_start = ((min_x - 0.5).ceil().max(vp.x0 as f64)) as i64;
    let x_end = ((max_x - 0.5).floor().min(vp.x1 as f64 - 1.0)) as i64;
    let y_start = ((min_y - 0.5).ceil().max(vp.y0 as f64)) as i64;
    let y_end = ((max_y - 0.5).floor().min(vp.y1 as f64 - 1.0)) as i64;
    if x_start > x_end || y_start > y_end {
        return;
    }
    let own0 = owns_zero(v1, v2);
    let own1 = owns_zero(v2, v0);
    let own2 = owns_zero(v0, v1);
    let inv_area = 1.0 / area;
    for y in y_start..=y_end {
        let py = y as f64 + 0.5;
        for x in x_start..=x_end {
            let px = x as f64 + 0.5;
            let e0 = edge(v1, v2, px, py);
            let e1 = edge(v2, v0, px, py);
            let e2 = edge(v0, v1, px, py);
            let inside = (e0 > 0.0 || (e0 == 0.0 && own0))
                && (e1 > 0.0 || (e1 == 0.0 && own1))
                && (e2 > 0.0 || (e2 == 0.0 && own2));
            if !inside {
                continue;
            }
            let (l0, l1, l2) = (e0 * inv_area, e1 * inv_area, e2 * inv_area);
            let inv_z = l0 * v0.inv_z + l1 * v1.inv_z + l2 * v2.inv_z;
            let depth = 1.0 / inv_z;
            let u = (l0 * v0.u_over_z + l1 * v1.u_over_z + l2 * v2.u_over_z) * depth;
            let v = (l0 * v0.v_over_z + l1 * v1.v_over_z + l2 * v2.v_over_z) * depth;
            emit(Fragment {
                x: x as u32,
                y: y as u32,
                depth,
                uv: [u, v],
            });
        }
    }
}
