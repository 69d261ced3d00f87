//! Shipped scene and camera layouts.
//!
//! Four scenes (three outdoor, one indoor) carry 34 cameras: scene 1 has
//! cameras 1-6, scene 2 has 7-16, scene 3 has 17-22 and the indoor scene 4
//! has 23-34. Taking the first N cameras therefore grows the network one
//! scene at a time (6 → 1 scene, 16 → 2, 22 → 3, 28 and 34 → 4). The
//! `indoor6_extra` set adds cameras 35-40, mounted high in scene 4.
//!
//! Cameras sit 3-8 m up at the scene border and aim at torso height inside
//! the walk zone, 6-14 m away, with vertical fields of view of 50-75 degrees.

use super::scene::{CameraSpec, SceneKind, SceneSpec};
use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Rect2};

pub const DEFAULT_RESOLUTION: [u32; 2] = [512, 384];

fn rgb(r: u8, g: u8, b: u8) -> Rgb {
    Rgb::from_u8([r, g, b])
}

fn boxed(min: [f64; 3], max: [f64; 3]) -> Aabb {
    Aabb::new(min, max)
}

pub fn scene_catalog() -> Vec<SceneSpec> {
    vec![
        SceneSpec {
            scene_id: 1,
            name: "plaza".into(),
            kind: SceneKind::Outdoor,
            extent: [24.0, 18.0],
            ceiling: None,
            obstacles: vec![
                boxed([10.0, 0.0, 7.0], [12.5, 2.6, 9.5]),
                boxed([4.0, 0.0, 13.0], [5.5, 0.8, 14.5]),
                boxed([17.0, 0.0, 4.0], [19.0, 0.5, 4.6]),
                boxed([18.0, 0.0, 12.0], [18.6, 3.5, 12.6]),
            ],
            walk_zone: Some(Rect2 {
                min: [2.0, 2.0],
                max: [22.0, 16.0],
            }),
            ground_albedo: rgb(150, 146, 140),
            ground_accent: rgb(128, 124, 120),
            wall_albedo: rgb(170, 160, 150),
            sky: rgb(170, 200, 235),
        },
        SceneSpec {
            scene_id: 2,
            name: "street".into(),
            kind: SceneKind::Outdoor,
            extent: [30.0, 14.0],
            ceiling: None,
            obstacles: vec![
                boxed([8.0, 0.0, 1.0], [12.5, 2.2, 2.8]),
                boxed([20.0, 0.0, 10.5], [23.0, 2.5, 12.0]),
                boxed([15.0, 0.0, 6.5], [15.4, 1.0, 6.9]),
            ],
            walk_zone: Some(Rect2 {
                min: [1.5, 3.5],
                max: [28.5, 12.0],
            }),
            ground_albedo: rgb(95, 95, 100),
            ground_accent: rgb(120, 118, 112),
            wall_albedo: rgb(150, 120, 100),
            sky: rgb(185, 205, 225),
        },
        SceneSpec {
            scene_id: 3,
            name: "park".into(),
            kind: SceneKind::Outdoor,
            extent: [22.0, 22.0],
            ceiling: None,
            obstacles: vec![
                boxed([9.0, 0.0, 9.0], [13.0, 0.9, 13.0]),
                boxed([4.0, 0.0, 4.0], [4.4, 3.2, 4.4]),
                boxed([17.0, 0.0, 16.0], [17.4, 3.0, 16.4]),
                boxed([3.0, 0.0, 16.0], [7.0, 1.0, 16.8]),
            ],
            walk_zone: Some(Rect2 {
                min: [2.0, 2.0],
                max: [20.0, 20.0],
            }),
            ground_albedo: rgb(96, 128, 78),
            ground_accent: rgb(150, 135, 105),
            wall_albedo: rgb(120, 100, 80),
            sky: rgb(160, 195, 240),
        },
        SceneSpec {
            scene_id: 4,
            name: "mall".into(),
            kind: SceneKind::Indoor,
            extent: [20.0, 16.0],
            ceiling: Some(4.5),
            obstacles: vec![
                boxed([5.0, 0.0, 5.0], [5.6, 4.5, 5.6]),
                boxed([14.4, 0.0, 5.0], [15.0, 4.5, 5.6]),
                boxed([5.0, 0.0, 10.4], [5.6, 4.5, 11.0]),
                boxed([14.4, 0.0, 10.4], [15.0, 4.5, 11.0]),
                boxed([9.0, 0.0, 13.5], [11.0, 1.1, 15.0]),
            ],
            walk_zone: Some(Rect2 {
                min: [1.5, 1.5],
                max: [18.5, 12.5],
            }),
            ground_albedo: rgb(205, 200, 190),
            ground_accent: rgb(180, 172, 160),
            wall_albedo: rgb(225, 222, 212),
            sky: rgb(0, 0, 0),
        },
    ]
}

type Mount = (u32, u32, [f64; 3], [f64; 3], f64);

const MOUNTS: [Mount; 40] = [
    (1, 1, [1.0, 5.0, 1.0], [9.0, 0.9, 7.0], 60.0),
    (2, 1, [23.0, 4.5, 1.0], [14.0, 0.9, 7.0], 55.0),
    (3, 1, [23.0, 6.0, 17.0], [15.0, 0.9, 11.0], 60.0),
    (4, 1, [1.0, 3.5, 17.0], [8.0, 0.9, 11.0], 65.0),
    (5, 1, [12.0, 7.0, 0.5], [12.0, 0.9, 11.0], 50.0),
    (6, 1, [12.0, 3.0, 17.5], [12.0, 0.9, 5.0], 70.0),
    (7, 2, [1.0, 4.0, 1.0], [8.0, 0.9, 8.0], 60.0),
    (8, 2, [29.0, 4.0, 1.0], [22.0, 0.9, 8.0], 60.0),
    (9, 2, [1.0, 4.0, 13.0], [8.0, 0.9, 6.0], 60.0),
    (10, 2, [29.0, 4.0, 13.0], [22.0, 0.9, 6.0], 60.0),
    (11, 2, [10.0, 5.0, 0.5], [14.0, 0.9, 8.0], 60.0),
    (12, 2, [20.0, 5.0, 0.5], [16.0, 0.9, 8.0], 60.0),
    (13, 2, [10.0, 3.0, 13.5], [6.0, 0.9, 7.0], 65.0),
    (14, 2, [20.0, 3.0, 13.5], [24.0, 0.9, 7.0], 65.0),
    (15, 2, [15.0, 8.0, 0.5], [15.0, 0.9, 9.0], 55.0),
    (16, 2, [15.0, 2.8, 13.5], [15.0, 0.9, 5.0], 70.0),
    (17, 3, [1.0, 4.0, 1.0], [8.0, 0.9, 8.0], 60.0),
    (18, 3, [21.0, 4.0, 1.0], [14.0, 0.9, 8.0], 60.0),
    (19, 3, [21.0, 5.0, 21.0], [14.0, 0.9, 14.0], 60.0),
    (20, 3, [1.0, 5.0, 21.0], [8.0, 0.9, 14.0], 60.0),
    (21, 3, [11.0, 6.0, 0.5], [11.0, 0.9, 8.0], 55.0),
    (22, 3, [11.0, 3.5, 21.5], [11.0, 0.9, 15.0], 65.0),
    (23, 4, [0.5, 3.8, 0.5], [6.0, 0.9, 6.0], 65.0),
    (24, 4, [19.5, 3.8, 0.5], [14.0, 0.9, 6.0], 65.0),
    (25, 4, [19.5, 3.8, 15.5], [14.0, 0.9, 10.0], 65.0),
    (26, 4, [0.5, 3.8, 15.5], [6.0, 0.9, 10.0], 65.0),
    (27, 4, [10.0, 4.0, 0.5], [10.0, 0.9, 7.0], 60.0),
    (28, 4, [10.0, 3.5, 15.5], [10.0, 0.9, 9.0], 60.0),
    (29, 4, [0.5, 3.2, 8.0], [8.0, 0.9, 8.0], 60.0),
    (30, 4, [19.5, 3.2, 8.0], [12.0, 0.9, 8.0], 60.0),
    (31, 4, [5.0, 4.2, 0.5], [7.0, 0.9, 9.0], 60.0),
    (32, 4, [15.0, 4.2, 0.5], [13.0, 0.9, 9.0], 60.0),
    (33, 4, [5.0, 4.2, 15.5], [8.0, 0.9, 6.0], 60.0),
    (34, 4, [15.0, 4.2, 15.5], [12.0, 0.9, 6.0], 60.0),
    (35, 4, [3.0, 4.3, 3.0], [5.5, 0.9, 5.5], 75.0),
    (36, 4, [17.0, 4.3, 3.0], [14.5, 0.9, 5.5], 75.0),
    (37, 4, [3.0, 4.3, 13.0], [5.5, 0.9, 10.5], 75.0),
    (38, 4, [17.0, 4.3, 13.0], [14.5, 0.9, 10.5], 75.0),
    (39, 4, [10.0, 4.4, 3.0], [10.0, 0.9, 6.5], 75.0),
    (40, 4, [10.0, 4.4, 12.5], [10.0, 0.9, 9.0], 75.0),
];

pub fn camera_catalog(resolution: [u32; 2]) -> Vec<CameraSpec> {
    MOUNTS
        .iter()
        .map(|&(id, scene, pos, target, fov)| CameraSpec::looking_at(id, scene, pos, target, fov, resolution))
        .collect()
}

fn strip<'a>(name: &'a str, prefix: &str) -> &'a str {
    name.strip_prefix(prefix).unwrap_or(name)
}

/// Resolves a scene preset (`default4`, `outdoor3`, `plaza1`, optionally
/// prefixed `scenes.`).
pub fn scene_preset(name: &str) -> Result<Vec<SceneSpec>> {
    let all = scene_catalog();
    let ids: &[u32] = match strip(name, "scenes.") {
        "default4" => &[1, 2, 3, 4],
        "outdoor3" => &[1, 2, 3],
        "plaza1" => &[1],
        other => return Err(Error::Config(format!("unknown scene preset {other:?}"))),
    };
    Ok(all.into_iter().filter(|s| ids.contains(&s.scene_id)).collect())
}

/// Camera ids of a camera preset: `N` (first N of the 34-camera network),
/// `desk8`, `smoke2` or `indoor6_extra`, optionally prefixed `cameras.`.
pub fn camera_preset_ids(name: &str) -> Result<Vec<u32>> {
    let key = strip(name, "cameras.");
    match key {
        "desk8" => Ok(vec![1, 2, 7, 8, 17, 18, 23, 24]),
        "smoke2" => Ok(vec![1, 7]),
        "indoor6_extra" => Ok((35..=40).collect()),
        n => match n.parse::<u32>() {
            Ok(n) if (1..=34).contains(&n) => Ok((1..=n).collect()),
            _ => Err(Error::Config(format!("unknown camera preset {name:?}"))),
        },
    }
}

pub fn camera_preset(name: &str, resolution: [u32; 2]) -> Result<Vec<CameraSpec>> {
    let ids = camera_preset_ids(name)?;
    Ok(camera_catalog(resolution)
        .into_iter()
        .filter(|c| ids.contains(&c.camera_id))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::build_world;

    #[test]
    fn full_network_builds() {
        let w = build_world(
            scene_preset("scenes.default4").unwrap(),
            camera_preset("cameras.34", DEFAULT_RESOLUTION).unwrap(),
            0,
        )
        .unwrap();
        assert_eq!(w.scenes.len(), 4);
        assert_eq!(w.cameras.len(), 34);
        assert_eq!(w.scenes.iter().filter(|s| s.kind == SceneKind::Indoor).count(), 1);
    }

    #[test]
    fn camera_counts_grow_by_scene() {
        for (n, scenes) in [(6, 1), (16, 2), (22, 3), (28, 4), (34, 4)] {
            let cams = camera_preset(&n.to_string(), DEFAULT_RESOLUTION).unwrap();
            assert_eq!(cams.len(), n);
            let mut s: Vec<u32> = cams.iter().map(|c| c.scene_id).collect();
            s.dedup();
            assert_eq!(s.len(), scenes);
        }
    }

    #[test]
    fn extra_indoor_cameras_are_in_the_indoor_scene() {
        let cams = camera_preset("cameras.indoor6_extra", DEFAULT_RESOLUTION).unwrap();
        assert_eq!(cams.len(), 6);
        assert!(cams.iter().all(|c| c.scene_id == 4 && c.camera_id > 34));
        let mut all = camera_preset("34", DEFAULT_RESOLUTION).unwrap();
        all.extend(cams);
        build_world(scene_preset("default4").unwrap(), all, 0).unwrap();
    }

    #[test]
    fn unknown_presets_rejected() {
        assert!(scene_preset("moon").is_err());
        assert!(camera_preset_ids("cameras.35").is_err());
    }
}
