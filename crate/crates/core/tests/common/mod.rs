//! Independent oracles shared by the integration tests. Nothing here calls the
//! code it checks beyond building inputs.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use synthperson::geom::{Aabb, Vec3};
use synthperson::world::CameraSpec;

/// Inclusive `(x0, y0, x1, y1)` of every nonzero label, by scanning all pixels.
pub fn brute_bboxes(instance: &[u32], width: u32, height: u32) -> BTreeMap<u32, [u32; 4]> {
    let mut out: BTreeMap<u32, [u32; 4]> = BTreeMap::new();
    for y in 0..height {
        for x in 0..width {
            let l = instance[(y * width + x) as usize];
            if l == 0 {
                continue;
            }
            let b = out.entry(l).or_insert([x, y, x, y]);
            b[0] = b[0].min(x);
            b[1] = b[1].min(y);
            b[2] = b[2].max(x);
            b[3] = b[3].max(y);
        }
    }
    out
}

/// Pinhole ray through pixel center `(i + 0.5, j + 0.5)`, rebuilt from the
/// camera's yaw, pitch and fov. The direction has unit component along the
/// view axis, so the hit parameter is the camera-space depth.
pub fn pixel_ray(cam: &CameraSpec, i: u32, j: u32) -> (Vec3, Vec3) {
    let (yaw, pitch) = (cam.yaw.to_radians(), cam.pitch.to_radians());
    let fwd = Vec3::new(yaw.sin() * pitch.cos(), pitch.sin(), yaw.cos() * pitch.cos());
    let right = Vec3::new(yaw.cos(), 0.0, -yaw.sin());
    let up = fwd.cross(right);
    let [w, h] = cam.resolution;
    let f = 0.5 * h as f64 / (0.5 * cam.vertical_fov.to_radians()).tan();
    let x = (i as f64 + 0.5 - 0.5 * w as f64) / f;
    let y = (0.5 * h as f64 - (j as f64 + 0.5)) / f;
    (Vec3::from_array(cam.position), fwd + right * x + up * y)
}

/// Entry parameter of the ray into the box, by the slab method.
pub fn slab_hit(origin: Vec3, dir: Vec3, b: &Aabb) -> Option<f64> {
    let (o, d) = (origin.to_array(), dir.to_array());
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < b.min[a] || o[a] > b.max[a] {
                return None;
            }
            continue;
        }
        let (mut n, mut f) = ((b.min[a] - o[a]) / d[a], (b.max[a] - o[a]) / d[a]);
        if n > f {
            std::mem::swap(&mut n, &mut f);
        }
        t0 = t0.max(n);
        t1 = t1.min(f);
    }
    (t0 <= t1 && t0 > 0.0).then_some(t0)
}

/// Per-pixel label of the nearest box; equal depths go to the lower label.
pub fn raycast_labels(boxes: &[(Aabb, u32)], cam: &CameraSpec) -> Vec<u32> {
    let [w, h] = cam.resolution;
    let mut out = vec![0u32; (w * h) as usize];
    for j in 0..h {
        for i in 0..w {
            let (o, d) = pixel_ray(cam, i, j);
            let mut best: Option<(f64, u32)> = None;
            for (b, l) in boxes {
                if let Some(t) = slab_hit(o, d, b) {
                    let better = match best {
                        None => true,
                        Some((bt, bl)) => t < bt || (t == bt && *l < bl),
                    };
                    if better {
                        best = Some((t, *l));
                    }
                }
            }
            out[(j * w + i) as usize] = best.map_or(0, |(_, l)| l);
        }
    }
    out
}

/// A camera at distance 6 to 10 from the origin looking at it, and `n` boxes
/// with sides 0.2 to 1.5 within about 2 units of the origin, all
/// at least 3 units in front of the camera.
pub fn random_box_scene(rng: &mut impl Rng, max_side: u32) -> (CameraSpec, Vec<(Aabb, u32)>) {
    let w = rng.random_range(16..=max_side);
    let h = rng.random_range(16..=max_side);
    let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let el: f64 = rng.random_range(-0.6..0.2);
    let r: f64 = rng.random_range(6.0..10.0);
    let pos = [
        r * az.sin() * el.cos(),
        -r * el.sin() + 0.5,
        r * az.cos() * el.cos(),
    ];
    let cam = CameraSpec::looking_at(1, 0, pos, [0.0, 0.5, 0.0], rng.random_range(30.0..70.0), [w, h]);
    let n = rng.random_range(1..=8);
    let boxes = (0..n)
        .map(|k| {
            let c = [
                rng.random_range(-1.2..1.2),
                rng.random_range(-0.5..1.5),
                rng.random_range(-1.2..1.2),
            ];
            let e: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.75));
            let b = Aabb::new(
                [c[0] - e[0], c[1] - e[1], c[2] - e[2]],
                [c[0] + e[0], c[1] + e[1], c[2] + e[2]],
            );
            (b, k as u32 + 1)
        })
        .collect();
    (cam, boxes)
}

/// Euclidean distance written out longhand.
pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

/// mAP and CMC by direct counting: the rank of gallery item `j` is one plus the
/// number of valid items strictly closer, or equally close with a lower index.
/// Returns `(map, cmc, evaluated_queries)`.
pub fn brute_map(query: &[(Vec<f64>, u32, u32)], gallery: &[(Vec<f64>, u32, u32)]) -> (f64, Vec<f64>, usize) {
    let mut ap_sum = 0.0;
    let mut first_hits = vec![0usize; gallery.len()];
    let mut n = 0;
    for (qf, qid, qcam) in query {
        let valid: Vec<usize> = (0..gallery.len())
            .filter(|&j| !(gallery[j].1 == *qid && gallery[j].2 == *qcam))
            .collect();
        let d: Vec<f64> = gallery.iter().map(|g| l2(qf, &g.0)).collect();
        let rank = |j: usize| {
            1 + valid
                .iter()
                .filter(|&&o| d[o] < d[j] || (d[o] == d[j] && o < j))
                .count()
        };
        let rel: Vec<usize> = valid.iter().copied().filter(|&j| gallery[j].1 == *qid).collect();
        if rel.is_empty() {
            continue;
        }
        n += 1;
        let ranks: Vec<usize> = rel.iter().map(|&j| rank(j)).collect();
        let mut ap = 0.0;
        for &r in &ranks {
            let above = ranks.iter().filter(|&&o| o <= r).count();
            ap += above as f64 / r as f64;
        }
        ap_sum += ap / ranks.len() as f64;
        first_hits[*ranks.iter().min().unwrap() - 1] += 1;
    }
    let mut cmc = Vec::with_capacity(gallery.len());
    let mut acc = 0;
    for h in first_hits {
        acc += h;
        cmc.push(if n == 0 { 0.0 } else { acc as f64 / n as f64 });
    }
    (if n == 0 { 0.0 } else { ap_sum / n as f64 }, cmc, n)
}

/// A random retrieval instance with at most `max_gallery` gallery items and
/// features drawn from a small grid so that distance ties occur.
pub fn random_retrieval(
    rng: &mut impl Rng,
    max_gallery: usize,
) -> (Vec<(Vec<f64>, u32, u32)>, Vec<(Vec<f64>, u32, u32)>) {
    let dim = rng.random_range(1..=4);
    let ids = rng.random_range(1..=5u32);
    let cams = rng.random_range(1..=3u32);
    let item = |rng: &mut dyn rand::RngCore| {
        let f: Vec<f64> = (0..dim).map(|_| rng.random_range(0..4) as f64 * 0.5).collect();
        (f, rng.random_range(1..=ids), rng.random_range(1..=cams))
    };
    let nq = rng.random_range(1..=5);
    let ng = rng.random_range(1..=max_gallery);
    let q = (0..nq).map(|_| item(rng)).collect();
    let g = (0..ng).map(|_| item(rng)).collect();
    (q, g)
}
