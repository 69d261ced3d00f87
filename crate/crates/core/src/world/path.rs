//! Pedestrian paths and the identity-to-scene capture schedule.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::anim::AnimationKind;
use super::scene::{SceneSpec, World};
use crate::error::{Error, Result};
use crate::geom::{Rect2, Vec3};
use crate::human::IdentitySpec;
use crate::render::Projector;
use crate::rng::{self, Stream, StreamRng};

pub const SPEED_RANGE: (f64, f64) = (0.6, 1.8);
/// Clearance kept between a path and any obstacle footprint.
pub const BODY_RADIUS: f64 = 0.35;
const PATH_ATTEMPTS: usize = 400;
const IDLE_PROBABILITY: f64 = 0.15;
/// Redraws allowed while looking for a path or idle spot the cameras can see.
const VIEW_ATTEMPTS: usize = 60;
/// A spot counts as observed when a standing person there spans at least this
/// fraction of some camera's image height, fully inside the frame.
const OBSERVED_HEIGHT_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    /// Ground points `(x, z)`.
    pub waypoints: Vec<[f64; 2]>,
    /// Meters per second.
    pub speed: f64,
    /// Closed loop: the last waypoint connects back to the first.
    #[serde(rename = "loop")]
    pub looped: bool,
}

impl PathSpec {
    pub fn validate(&self, scene: &SceneSpec) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::Validation("path needs at least two waypoints".into()));
        }
        if !(SPEED_RANGE.0..=SPEED_RANGE.1).contains(&self.speed) {
            return Err(Error::Validation(format!(
                "path speed {} out of range",
                self.speed
            )));
        }
        let ground = scene.ground();
        for &w in &self.waypoints {
            if !ground.contains(w) {
                return Err(Error::Validation(format!("waypoint {w:?} outside scene")));
            }
            if scene.obstacles.iter().any(|o| o.footprint(0.0).contains(w)) {
                return Err(Error::Validation(format!("waypoint {w:?} inside an obstacle")));
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.waypoints.len();
        let count = if self.looped { n } else { n - 1 };
        (0..count).map(move |i| (self.waypoints[i], self.waypoints[(i + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).sum()
    }

    fn locate(&self, s: f64) -> ([f64; 2], [f64; 2], f64) {
        let total = self.length();
        let mut s = if self.looped && total > 0.0 {
            s.rem_euclid(total)
        } else {
            s.clamp(0.0, total)
        };
        let mut last = None;
        for (a, b) in self.segments() {
            let l = dist(a, b);
            if s <= l && l > 0.0 {
                return (a, b, s / l);
            }
            s -= l;
            last = Some((a, b));
        }
        let (a, b) = last.unwrap_or((self.waypoints[0], self.waypoints[0]));
        (a, b, 1.0)
    }

    /// Ground position after walking `s` meters from the first waypoint.
    pub fn position_at(&self, s: f64) -> [f64; 2] {
        let (a, b, t) = self.locate(s);
        [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
    }

    /// Walking direction at arc length `s`, radians about +y (0 = +z).
    pub fn heading_at(&self, s: f64) -> f64 {
        let (a, b, _) = self.locate(s);
        (b[0] - a[0]).atan2(b[1] - a[1])
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

fn blocked(scene: &SceneSpec) -> Vec<Rect2> {
    scene.obstacles.iter().map(|o| o.footprint(BODY_RADIUS)).collect()
}

/// Whether a 1.8 m person standing at `p` is fully framed and large enough in any camera.
pub fn observed(cameras: &[Projector], p: [f64; 2]) -> bool {
    cameras.iter().any(|cam| {
        let feet = cam.to_camera(Vec3::new(p[0], 0.0, p[1]));
        let head = cam.to_camera(Vec3::new(p[0], 1.8, p[1]));
        if feet.z < 0.5 || head.z < 0.5 {
            return false;
        }
        let (f, h) = (cam.project(feet), cam.project(head));
        let margin = 4.0;
        let inside = |q: [f64; 2]| {
            q[0] >= margin
                && q[1] >= margin
                && q[0] <= cam.width as f64 - margin
                && q[1] <= cam.height as f64 - margin
        };
        inside(f) && inside(h) && (f[1] - h[1]) >= OBSERVED_HEIGHT_FRACTION * cam.height as f64
    })
}

/// As [`sample_path`], preferring paths whose waypoints are all observed by
/// `cameras`. Falls back to the last draw when none is found.
pub fn sample_observed_path(
    scene: &SceneSpec,
    cameras: &[Projector],
    rng: &mut StreamRng,
) -> Result<PathSpec> {
    let mut path = sample_path(scene, rng)?;
    for _ in 1..VIEW_ATTEMPTS {
        if cameras.is_empty() || path.waypoints.iter().all(|&w| observed(cameras, w)) {
            break;
        }
        path = sample_path(scene, rng)?;
    }
    Ok(path)
}

/// Random closed path inside the scene's walk zone that keeps clear of obstacles.
pub fn sample_path(scene: &SceneSpec, rng: &mut StreamRng) -> Result<PathSpec> {
    let zone = scene.walk_zone();
    let blocked = blocked(scene);
    for _ in 0..PATH_ATTEMPTS {
        let n = rng.random_range(3..=5usize);
        let waypoints: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                [
                    rng.random_range(zone.min[0]..=zone.max[0]),
                    rng.random_range(zone.min[1]..=zone.max[1]),
                ]
            })
            .collect();
        let path = PathSpec {
            waypoints,
            speed: rng.random_range(0.8..=1.6),
            looped: true,
        };
        if path.length() < 2.0 {
            continue;
        }
        let clear = path
            .segments()
            .all(|(a, b)| blocked.iter().all(|r| !r.intersects_segment(a, b)));
        if clear {
            return Ok(path);
        }
    }
    Err(Error::Config(format!(
        "no feasible obstacle-free path in scene {}",
        scene.scene_id
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Pedestrians sharing a scene at once.
    pub crowd: usize,
    /// Scenes each identity walks through, capped by the number of captured scenes.
    pub visits: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { crowd: 6, visits: 2 }
    }
}

/// One identity's stay in one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub identity_id: u32,
    pub scene_id: u32,
    pub slot: usize,
    pub path: PathSpec,
    pub animation: AnimationKind,
    pub start_phase: f64,
    /// Arc length along the path at which the visit starts.
    pub start_distance: f64,
    /// Facing for idle animations, radians.
    pub idle_heading: f64,
}

/// A group of visits that share a scene over one capture interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub index: usize,
    pub scene_id: u32,
    pub members: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub visits: BTreeMap<u32, Vec<Visit>>,
    pub slots: Vec<Slot>,
}

impl Assignment {
    pub fn slot_visits(&self, slot: &Slot) -> Vec<&Visit> {
        slot.members
            .iter()
            .filter_map(|id| {
                self.visits
                    .get(id)
                    .and_then(|vs| vs.iter().find(|v| v.slot == slot.index))
            })
            .collect()
    }
}

/// Assigns every identity to scenes, paths and animations.
///
/// Identities are shuffled once, then visit `k` of the flattened sequence goes
/// to captured scene `k mod S`, so each identity's visits land in distinct
/// scenes whenever `S >= 2`. Each scene's visitors are chunked into slots of
/// `crowd` pedestrians; slots are numbered round-robin across scenes.
pub fn assign_paths(
    identities: &[IdentitySpec],
    world: &World,
    params: &ScheduleParams,
    seed: u64,
) -> Result<Assignment> {
    if params.crowd == 0 || params.visits == 0 {
        return Err(Error::Validation("crowd and visits must be positive".into()));
    }
    let mut scenes = world.captured_scenes();
    if scenes.is_empty() {
        scenes = world.scenes.iter().map(|s| s.scene_id).collect();
    }
    if scenes.is_empty() {
        return Err(Error::Config("world has no scenes to walk in".into()));
    }
    let visits_per_id = params.visits.min(scenes.len());

    let mut order: Vec<u32> = identities.iter().map(|s| s.id).collect();
    order.sort_unstable();
    order.shuffle(&mut rng::stream(seed, Stream::Schedule, &[0]));

    let mut per_scene: BTreeMap<u32, Vec<(u32, usize)>> = BTreeMap::new();
    for (pos, &id) in order.iter().enumerate() {
        for v in 0..visits_per_id {
            let k = pos * visits_per_id + v;
            per_scene
                .entry(scenes[k % scenes.len()])
                .or_default()
                .push((id, v));
        }
    }

    let chunks: Vec<(u32, Vec<Vec<(u32, usize)>>)> = scenes
        .iter()
        .map(|sid| {
            let members = per_scene.remove(sid).unwrap_or_default();
            (*sid, members.chunks(params.crowd).map(|c| c.to_vec()).collect())
        })
        .collect();
    let rounds = chunks.iter().map(|(_, c)| c.len()).max().unwrap_or(0);

    let mut slots = Vec::new();
    let mut visits: BTreeMap<u32, Vec<Visit>> = BTreeMap::new();
    for r in 0..rounds {
        for (sid, scene_chunks) in &chunks {
            let Some(chunk) = scene_chunks.get(r) else {
                continue;
            };
            let index = slots.len();
            let scene = world.scene(*sid)?;
            let cams: Vec<Projector> = world
                .cameras_in(*sid)
                .map(Projector::new)
                .collect::<Result<_>>()?;
            for &(id, v) in chunk {
                let mut rng = rng::stream(seed, Stream::Path, &[id as u64, v as u64]);
                let path = sample_observed_path(scene, &cams, &mut rng)?;
                let animation = if rng.random_bool(IDLE_PROBABILITY) {
                    [AnimationKind::Idle1, AnimationKind::Idle2][rng.random_range(0..2)]
                } else {
                    AnimationKind::ALL[rng.random_range(0..4)]
                };
                let mut start_distance = rng.random_range(0.0..path.length());
                if !animation.is_walk() {
                    for _ in 1..VIEW_ATTEMPTS {
                        if cams.is_empty() || observed(&cams, path.position_at(start_distance)) {
                            break;
                        }
                        start_distance = rng.random_range(0.0..path.length());
                    }
                }
                visits.entry(id).or_default().push(Visit {
                    identity_id: id,
                    scene_id: *sid,
                    slot: index,
                    path,
                    animation,
                    start_phase: rng.random_range(0.0..1.0),
                    start_distance,
                    idle_heading: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                });
            }
            slots.push(Slot {
                index,
                scene_id: *sid,
                members: chunk.iter().map(|&(id, _)| id).collect(),
            });
        }
    }
    for vs in visits.values_mut() {
        vs.sort_by_key(|v| v.slot);
    }
    Ok(Assignment { visits, slots })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(len: f64) -> PathSpec {
        PathSpec {
            waypoints: vec![[0.0, 0.0], [len, 0.0]],
            speed: 1.0,
            looped: false,
        }
    }

    #[test]
    fn straight_path_positions() {
        let p = straight(10.0);
        assert_eq!(p.position_at(1.0), [1.0, 0.0]);
        assert_eq!(p.position_at(25.0), [10.0, 0.0]);
    }

    #[test]
    fn corner_crossing_splits_distance() {
        let p = PathSpec {
            waypoints: vec![[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]],
            speed: 1.0,
            looped: true,
        };
        assert_eq!(p.length(), 12.0);
        let q = p.position_at(5.0);
        assert!((q[0] - 3.0).abs() < 1e-12 && (q[1] - 2.0).abs() < 1e-12);
        // Past the far corner onto the closing hypotenuse.
        let q = p.position_at(9.5);
        assert!((q[0] - 1.5).abs() < 1e-12 && (q[1] - 2.0).abs() < 1e-12);
    }
}
