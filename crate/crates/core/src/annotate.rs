//! Instance buffer to filtered, jittered person crops.

use std::collections::BTreeMap;

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::CroppedSample;
use crate::error::{Error, Result};
use crate::render::Frame;
use crate::rng::{self, Stream, StreamRng};

/// Inclusive pixel rectangle `(x0, y0)..=(x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bbox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Bbox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> u32 {
        self.x1 + 1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 + 1 - self.y0
    }

    pub fn is_degenerate(&self) -> bool {
        self.x1 < self.x0 || self.y1 < self.y0
    }

    pub fn contains(&self, other: &Bbox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceObservation {
    pub identity_id: u32,
    pub camera_id: u32,
    pub sim_time: f64,
    pub pixel_count: u64,
    pub bbox: Bbox,
    /// Unset until [`occlusion_ratio`] has been measured.
    pub visible_ratio: Option<f64>,
    pub touches_edge: bool,
}

/// One observation per distinct nonzero label of a raw instance buffer, in label order.
pub fn scan_instances(instance: &[u32], width: u32, height: u32) -> Vec<(u32, u64, Bbox, bool)> {
    let mut acc: BTreeMap<u32, (u64, Bbox)> = BTreeMap::new();
    for y in 0..height {
        let row = &instance[(y * width) as usize..((y + 1) * width) as usize];
        for (x, &l) in row.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let x = x as u32;
            acc.entry(l)
                .and_modify(|(n, b)| {
                    *n += 1;
                    b.x0 = b.x0.min(x);
                    b.x1 = b.x1.max(x);
                    b.y1 = y;
                })
                .or_insert((1, Bbox::new(x, y, x, y)));
        }
    }
    acc.into_iter()
        .map(|(l, (n, b))| {
            let edge = b.x0 == 0 || b.y0 == 0 || b.x1 == width - 1 || b.y1 == height - 1;
            (l, n, b, edge)
        })
        .collect()
}

pub fn extract_instances(frame: &Frame) -> Vec<InstanceObservation> {
    scan_instances(&frame.instance, frame.width(), frame.height())
        .into_iter()
        .map(
            |(identity_id, pixel_count, bbox, touches_edge)| InstanceObservation {
                identity_id,
                camera_id: frame.camera_id,
                sim_time: frame.sim_time,
                pixel_count,
                bbox,
                visible_ratio: None,
                touches_edge,
            },
        )
        .collect()
}

/// `full / isolated`, clamped to `[0, 1]`.
pub fn visible_ratio(full: u64, isolated: u64, identity_id: u32) -> Result<f64> {
    if isolated == 0 {
        return Err(Error::UndefinedVisibility(identity_id));
    }
    Ok((full as f64 / isolated as f64).clamp(0.0, 1.0))
}

pub fn occlusion_ratio(frame: &Frame, isolated: &Frame, identity_id: u32) -> Result<f64> {
    let count = |f: &Frame| f.instance.iter().filter(|&&l| l == identity_id).count() as u64;
    visible_ratio(count(frame), count(isolated), identity_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterPolicy {
    pub min_height_px: u32,
    pub min_visible_ratio: f64,
    pub reject_edge_touching: bool,
    /// Edge-touching boxes shorter than this are rejected.
    pub edge_height_px: u32,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            min_height_px: 40,
            min_visible_ratio: 0.5,
            reject_edge_touching: true,
            edge_height_px: 80,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.min_height_px == 0 || self.edge_height_px == 0 {
            return Err(Error::Config("filter heights must be positive".into()));
        }
        if !(self.min_visible_ratio > 0.0 && self.min_visible_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "min_visible_ratio {} outside (0, 1]",
                self.min_visible_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscardReason {
    Small,
    Edge,
    Occluded,
    /// Visibility was never measured.
    Unmeasured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Discard(DiscardReason),
}

pub fn apply_filter(obs: &InstanceObservation, policy: &FilterPolicy) -> FilterDecision {
    let h = obs.bbox.height();
    if h < policy.min_height_px {
        return FilterDecision::Discard(DiscardReason::Small);
    }
    if policy.reject_edge_touching && obs.touches_edge && h < policy.edge_height_px {
        return FilterDecision::Discard(DiscardReason::Edge);
    }
    match obs.visible_ratio {
        None => FilterDecision::Discard(DiscardReason::Unmeasured),
        Some(r) if r < policy.min_visible_ratio => FilterDecision::Discard(DiscardReason::Occluded),
        Some(_) => FilterDecision::Keep,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnlargeMode {
    /// Each side moves by an independent uniform draw in `[0, factor * d]`.
    #[default]
    Stochastic,
    /// Each side moves by exactly `factor * d`.
    Fixed,
}

/// Moves the sides outward by `draws[i] * factor * d` (left, right, top, bottom),
/// rounded to whole pixels and clamped to the image.
pub fn enlarge_with_draws(bbox: Bbox, factor: f64, draws: [f64; 4], bounds: (u32, u32)) -> Bbox {
    let (w, h) = (bbox.width() as f64, bbox.height() as f64);
    let mv = |u: f64, d: f64| (u.clamp(0.0, 1.0) * factor * d).round() as i64;
    let x0 = bbox.x0 as i64 - mv(draws[0], w);
    let x1 = bbox.x1 as i64 + mv(draws[1], w);
    let y0 = bbox.y0 as i64 - mv(draws[2], h);
    let y1 = bbox.y1 as i64 + mv(draws[3], h);
    Bbox {
        x0: x0.max(0) as u32,
        y0: y0.max(0) as u32,
        x1: x1.min(bounds.0 as i64 - 1) as u32,
        y1: y1.min(bounds.1 as i64 - 1) as u32,
    }
}

pub fn enlarge_bbox(
    bbox: Bbox,
    factor: f64,
    mode: EnlargeMode,
    rng: &mut StreamRng,
    bounds: (u32, u32),
) -> Bbox {
    let draws = match mode {
        EnlargeMode::Stochastic => [(); 4].map(|_| rng.random::<f64>()),
        EnlargeMode::Fixed => [1.0; 4],
    };
    enlarge_with_draws(bbox, factor, draws, bounds)
}

/// The enlargement stream of one observation; independent of processing order.
pub fn enlarge_rng(seed: u64, camera_id: u32, sim_time: f64, identity_id: u32) -> StreamRng {
    rng::stream(
        seed,
        Stream::Enlarge,
        &[camera_id as u64, sim_time.to_bits(), identity_id as u64],
    )
}

pub fn crop_image(rgb: &RgbImage, bbox: Bbox) -> RgbImage {
    image::imageops::crop_imm(rgb, bbox.x0, bbox.y0, bbox.width(), bbox.height()).to_image()
}

/// Crops `bbox` out of the frame. Degenerate boxes are skipped with a warning.
pub fn crop_sample(frame: &Frame, bbox: Bbox, obs: &InstanceObservation) -> Option<CroppedSample> {
    if bbox.is_degenerate() || bbox.x1 >= frame.width() || bbox.y1 >= frame.height() {
        log::warn!(
            "skipping crop of identity {} at camera {} t={}: bad box {:?}",
            obs.identity_id,
            obs.camera_id,
            obs.sim_time,
            bbox
        );
        return None;
    }
    Some(CroppedSample {
        rgb: crop_image(&frame.rgb, bbox),
        identity_id: obs.identity_id,
        camera_id: obs.camera_id,
        scene_id: frame.scene_id,
        sim_time: obs.sim_time,
        bbox,
        file_name: None,
    })
}

/// Observation table as JSON lines, for debugging.
pub fn observations_jsonl(obs: &[InstanceObservation]) -> String {
    obs.iter()
        .map(|o| serde_json::to_string(o).expect("observation serializes") + "\n")
        .collect()
}
