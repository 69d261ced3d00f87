use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Rect2, Vec3};

/// Cameras in outdoor scenes may not sit higher than this.
pub const MAX_OUTDOOR_CAMERA_HEIGHT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Outdoor,
    Indoor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_id: u32,
    pub name: String,
    pub kind: SceneKind,
    /// Ground rectangle `[0, w] × [0, d]` in meters (x and z).
    pub extent: [f64; 2],
    /// Ceiling height; required for indoor scenes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceiling: Option<f64>,
    #[serde(default)]
    pub obstacles: Vec<Aabb>,
    /// Where paths may run; defaults to the extent minus a one meter margin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk_zone: Option<Rect2>,
    pub ground_albedo: Rgb,
    /// Secondary ground color for the paving pattern.
    pub ground_accent: Rgb,
    pub wall_albedo: Rgb,
    /// Sky color for outdoor scenes at full intensity.
    pub sky: Rgb,
}

impl SceneSpec {
    pub fn ground(&self) -> Rect2 {
        Rect2 {
            min: [0.0, 0.0],
            max: self.extent,
        }
    }

    pub fn walk_zone(&self) -> Rect2 {
        self.walk_zone.unwrap_or(Rect2 {
            min: [1.0, 1.0],
            max: [self.extent[0] - 1.0, self.extent[1] - 1.0],
        })
    }

    /// Whether `p` lies in the scene volume.
    pub fn contains_point(&self, p: Vec3) -> bool {
        let top = self.ceiling.unwrap_or(MAX_OUTDOOR_CAMERA_HEIGHT);
        self.ground().contains([p.x, p.z]) && p.y > 0.0 && p.y <= top
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.scene_id;
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return Err(Error::Validation(format!("scene {id}: extent must be positive")));
        }
        if self.kind == SceneKind::Indoor && !self.ceiling.is_some_and(|c| c > 0.0) {
            return Err(Error::Validation(format!("indoor scene {id} needs a ceiling")));
        }
        let ground = self.ground();
        for (i, o) in self.obstacles.iter().enumerate() {
            let inside = o.is_valid()
                && o.min[1] >= 0.0
                && ground.contains([o.min[0], o.min[2]])
                && ground.contains([o.max[0], o.max[2]]);
            if !inside {
                return Err(Error::Validation(format!(
                    "scene {id}: obstacle {i} is degenerate or leaves the extent"
                )));
            }
        }
        let wz = self.walk_zone();
        if !(wz.min[0] < wz.max[0]
            && wz.min[1] < wz.max[1]
            && ground.contains(wz.min)
            && ground.contains(wz.max))
        {
            return Err(Error::Validation(format!("scene {id}: walk zone outside extent")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub camera_id: u32,
    pub scene_id: u32,
    pub position: [f64; 3],
    /// Degrees; 0 looks along +z, 90 along +x.
    pub yaw: f64,
    /// Degrees in `[-89, 0]`; negative looks down.
    pub pitch: f64,
    pub vertical_fov: f64,
    pub resolution: [u32; 2],
}

impl CameraSpec {
    /// Camera at `position` aimed at `target`.
    pub fn looking_at(
        camera_id: u32,
        scene_id: u32,
        position: [f64; 3],
        target: [f64; 3],
        vertical_fov: f64,
        resolution: [u32; 2],
    ) -> Self {
        let d = Vec3::from_array(target) - Vec3::from_array(position);
        let yaw = d.x.atan2(d.z).to_degrees();
        let pitch = d.y.atan2((d.x * d.x + d.z * d.z).sqrt()).to_degrees();
        Self {
            camera_id,
            scene_id,
            position,
            yaw,
            pitch,
            vertical_fov,
            resolution,
        }
    }

    pub fn validate_optics(&self) -> Result<()> {
        let id = self.camera_id;
        if !(self.vertical_fov > 20.0 && self.vertical_fov < 120.0) {
            return Err(Error::Validation(format!(
                "camera {id}: vertical fov {} outside (20, 120)",
                self.vertical_fov
            )));
        }
        if !(-89.0..=0.0).contains(&self.pitch) {
            return Err(Error::Validation(format!(
                "camera {id}: pitch {} outside [-89, 0]",
                self.pitch
            )));
        }
        if self.resolution[0] < 16 || self.resolution[1] < 16 {
            return Err(Error::Validation(format!(
                "camera {id}: resolution {:?} below 16x16",
                self.resolution
            )));
        }
        Ok(())
    }
}

/// Validated scene and camera network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub seed: u64,
    pub scenes: Vec<SceneSpec>,
    pub cameras: Vec<CameraSpec>,
}

impl World {
    pub fn scene(&self, scene_id: u32) -> Result<&SceneSpec> {
        self.scenes
            .iter()
            .find(|s| s.scene_id == scene_id)
            .ok_or(Error::Lookup {
                kind: "scene",
                id: scene_id as u64,
            })
    }

    pub fn camera(&self, camera_id: u32) -> Result<&CameraSpec> {
        self.cameras
            .iter()
            .find(|c| c.camera_id == camera_id)
            .ok_or(Error::Lookup {
                kind: "camera",
                id: camera_id as u64,
            })
    }

    pub fn cameras_in(&self, scene_id: u32) -> impl Iterator<Item = &CameraSpec> {
        self.cameras.iter().filter(move |c| c.scene_id == scene_id)
    }

    /// Scenes observed by at least one camera, in declaration order.
    pub fn captured_scenes(&self) -> Vec<u32> {
        self.scenes
            .iter()
            .map(|s| s.scene_id)
            .filter(|&id| self.cameras.iter().any(|c| c.scene_id == id))
            .collect()
    }
}

/// Validates geometry and cross references and assembles a [`World`].
pub fn build_world(scenes: Vec<SceneSpec>, cameras: Vec<CameraSpec>, seed: u64) -> Result<World> {
    let mut seen_scenes = BTreeSet::new();
    for s in &scenes {
        s.validate()?;
        if !seen_scenes.insert(s.scene_id) {
            return Err(Error::Validation(format!("duplicate scene id {}", s.scene_id)));
        }
    }

    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for c in &cameras {
        *counts.entry(c.camera_id).or_default() += 1;
    }
    let duplicates: Vec<u32> = counts.iter().filter(|(_, &n)| n > 1).map(|(&id, _)| id).collect();
    let dangling: Vec<String> = cameras
        .iter()
        .filter(|c| !seen_scenes.contains(&c.scene_id))
        .map(|c| format!("camera {} -> scene {}", c.camera_id, c.scene_id))
        .collect();
    if !duplicates.is_empty() || !dangling.is_empty() {
        let mut msg = Vec::new();
        if !duplicates.is_empty() {
            msg.push(format!("duplicate camera ids {duplicates:?}"));
        }
        if !dangling.is_empty() {
            msg.push(format!("dangling scene references [{}]", dangling.join(", ")));
        }
        return Err(Error::Validation(msg.join("; ")));
    }

    for c in &cameras {
        c.validate_optics()?;
        let scene = scenes.iter().find(|s| s.scene_id == c.scene_id).unwrap();
        if !scene.contains_point(Vec3::from_array(c.position)) {
            return Err(Error::Validation(format!(
                "camera {} at {:?} lies outside scene {}",
                c.camera_id, c.position, c.scene_id
            )));
        }
    }
    Ok(World {
        seed,
        scenes,
        cameras,
    })
}
