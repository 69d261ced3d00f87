//! Software rasterizer producing RGB frames with pixel-aligned instance buffers.

pub mod camera;
pub mod mesh;
pub mod raster;
pub mod rig;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use image::RgbImage;

use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::world::{CameraSpec, LightParams, SceneKind, SceneSpec, Walker, World, WorldState};
pub use camera::Projector;
pub use mesh::{BoxPrim, Material, Part, Triangle};
use raster::{rasterize_triangle, ClipVertex, Viewport};
pub use rig::{build_rig, Appearance, Cast, Placement};

/// Constant ambient term of the shading model.
pub const AMBIENT: f64 = 0.15;
/// Background of isolated renders.
pub const ISOLATED_BACKGROUND: [u8; 3] = [255, 0, 255];

fn sun_direction() -> Vec3 {
    Vec3::new(0.4, 0.7, 0.6).normalized()
}

/// One rendered camera image with its per-pixel annotations.
#[derive(Debug, Clone)]
pub struct Frame {
    pub camera_id: u32,
    pub scene_id: u32,
    pub sim_time: f64,
    pub rgb: RgbImage,
    /// 0 for background, otherwise the identity id that owns the pixel.
    pub instance: Vec<u32>,
    /// Camera-space depth of the visible surface, `+inf` where nothing was drawn.
    pub depth: Vec<f64>,
    /// [`Part`] code of the visible surface.
    pub part: Vec<u8>,
}

impl Frame {
    pub fn blank(
        camera_id: u32,
        scene_id: u32,
        sim_time: f64,
        width: u32,
        height: u32,
        clear: [u8; 3],
    ) -> Self {
        let n = width as usize * height as usize;
        Self {
            camera_id,
            scene_id,
            sim_time,
            rgb: RgbImage::from_pixel(width, height, image::Rgb(clear)),
            instance: vec![0; n],
            depth: vec![f64::INFINITY; n],
            part: vec![0; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.rgb.width()
    }

    pub fn height(&self) -> u32 {
        self.rgb.height()
    }

    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.instance[(y * self.width() + x) as usize]
    }

    /// Drops the depth buffer once annotation no longer needs it.
    pub fn drop_depth(&mut self) {
        self.depth = Vec::new();
    }

    /// Writes the RGB image as PNG and the instance buffer as a 16-bit PGM
    /// (labels above 65535 are written to a 32-bit binary `.u32` sidecar instead).
    pub fn dump(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let png = dir.join(format!("{stem}.png"));
        self.rgb.save(&png).map_err(|e| Error::image(&png, e))?;
        let max = self.instance.iter().copied().max().unwrap_or(0);
        if max <= u16::MAX as u32 {
            let path = dir.join(format!("{stem}_instance.pgm"));
            let mut bytes = format!("P5\n{} {}\n65535\n", self.width(), self.height()).into_bytes();
            for &l in &self.instance {
                bytes.extend_from_slice(&(l as u16).to_be_bytes());
            }
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        } else {
            let path = dir.join(format!("{stem}_instance.u32"));
            let bytes: Vec<u8> = self.instance.iter().flat_map(|l| l.to_le_bytes()).collect();
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Z-buffered draw of `tris` into `frame`. Equal depths go to the lower label.
pub fn draw_triangles(tris: &[Triangle], proj: &Projector, light: LightParams, frame: &mut Frame) {
    draw_impl::<true>(tris, proj, light, frame);
}

/// As [`draw_triangles`] but leaves the RGB image untouched.
pub fn draw_labels(tris: &[Triangle], proj: &Projector, frame: &mut Frame) {
    draw_impl::<false>(tris, proj, LightParams::NEUTRAL, frame);
}

fn draw_impl<const SHADE: bool>(tris: &[Triangle], proj: &Projector, light: LightParams, frame: &mut Frame) {
    let sun = sun_direction();
    let width = frame.width();
    let vp = Viewport::full(width, frame.height());
    let mut clip = Vec::with_capacity(4);
    let tint = Rgb(light.tint);
    for tri in tris {
        if tri.cull && tri.normal.dot(tri.v[0] - proj.position) >= 0.0 {
            continue;
        }
        let shade = (AMBIENT + (1.0 - AMBIENT) * tri.normal.dot(sun).max(0.0)) * light.intensity;
        let cv = [0, 1, 2].map(|i| ClipVertex {
            pos: proj.to_camera(tri.v[i]),
            uv: tri.uv[i],
        });
        let rgb = &mut frame.rgb;
        let depth = &mut frame.depth;
        let instance = &mut frame.instance;
        let part = &mut frame.part;
        rasterize_triangle(&cv, proj, vp, &mut clip, |f| {
            let idx = (f.y * width + f.x) as usize;
            let d = depth[idx];
            if f.depth < d || (f.depth == d && tri.label < instance[idx]) {
                depth[idx] = f.depth;
                instance[idx] = tri.label;
                part[idx] = tri.part as u8;
                if SHADE {
                    let c = tri.material.albedo(f.uv).scale(shade).modulate(tint);
                    rgb.put_pixel(f.x, f.y, image::Rgb(c.to_u8()));
                }
            }
        });
    }
}

/// Number of pixels covered by any of `tris`, ignoring depth.
pub fn coverage_count(tris: &[Triangle], proj: &Projector) -> u64 {
    let (w, h) = (proj.width, proj.height);
    let mut bits = vec![0u64; (w as usize * h as usize).div_ceil(64)];
    let mut clip = Vec::with_capacity(4);
    let mut count = 0u64;
    for tri in tris {
        if tri.cull && tri.normal.dot(tri.v[0] - proj.position) >= 0.0 {
            continue;
        }
        let cv = [0, 1, 2].map(|i| ClipVertex {
            pos: proj.to_camera(tri.v[i]),
            uv: tri.uv[i],
        });
        rasterize_triangle(&cv, proj, Viewport::full(w, h), &mut clip, |f| {
            let idx = (f.y * w + f.x) as usize;
            let (word, bit) = (idx / 64, idx % 64);
            if bits[word] & (1 << bit) == 0 {
                bits[word] |= 1 << bit;
                count += 1;
            }
        });
    }
    count
}

fn triangulate_boxes(boxes: &[BoxPrim]) -> Vec<Triangle> {
    let mut tris = Vec::with_capacity(boxes.len() * 12);
    for b in boxes {
        b.triangulate(&mut tris);
    }
    tris
}

/// Renders a bare list of boxes over a uniform background.
pub fn render_boxes(
    boxes: &[BoxPrim],
    camera: &CameraSpec,
    light: LightParams,
    background: [u8; 3],
) -> Result<Frame> {
    let proj = Projector::new(camera)?;
    let mut frame = Frame::blank(
        camera.camera_id,
        camera.scene_id,
        0.0,
        proj.width,
        proj.height,
        background,
    );
    draw_triangles(&triangulate_boxes(boxes), &proj, light, &mut frame);
    Ok(frame)
}

fn static_geometry(scene: &SceneSpec) -> Vec<Triangle> {
    let mut tris = Vec::new();
    let [w, d] = scene.extent;
    let paving = Arc::new(Material::Paving {
        a: scene.ground_albedo,
        b: scene.ground_accent,
        cell: 1.0,
    });
    let (g0, g1) = match scene.kind {
        SceneKind::Outdoor => ([-60.0, -60.0], [w + 60.0, d + 60.0]),
        SceneKind::Indoor => ([0.0, 0.0], [w, d]),
    };
    let floor = [
        Vec3::new(g0[0], 0.0, g0[1]),
        Vec3::new(g1[0], 0.0, g0[1]),
        Vec3::new(g1[0], 0.0, g1[1]),
        Vec3::new(g0[0], 0.0, g1[1]),
    ];
    mesh::quad(floor, floor.map(|p| [p.x, p.z]), Vec3::Y, paving, &mut tris);

    if let (SceneKind::Indoor, Some(top)) = (scene.kind, scene.ceiling) {
        let wall = Arc::new(Material::Solid(scene.wall_albedo));
        let ceiling = Arc::new(Material::Solid(scene.wall_albedo.scale(0.9)));
        let c = [
            Vec3::new(0.0, top, 0.0),
            Vec3::new(w, top, 0.0),
            Vec3::new(w, top, d),
            Vec3::new(0.0, top, d),
        ];
        mesh::quad(c, c.map(|p| [p.x, p.z]), -Vec3::Y, ceiling, &mut tris);
        let walls = [
            ([0.0, 0.0], [w, 0.0], Vec3::Z),
            ([w, 0.0], [w, d], -Vec3::X),
            ([w, d], [0.0, d], -Vec3::Z),
            ([0.0, d], [0.0, 0.0], Vec3::X),
        ];
        for (a, b, n) in walls {
            let q = [
                Vec3::new(a[0], 0.0, a[1]),
                Vec3::new(b[0], 0.0, b[1]),
                Vec3::new(b[0], top, b[1]),
                Vec3::new(a[0], top, a[1]),
            ];
            mesh::quad(q, [[0.0, 0.0]; 4], n, wall.clone(), &mut tris);
        }
    }

    for (i, o) in scene.obstacles.iter().enumerate() {
        let shade = 0.75 + 0.08 * (i % 4) as f64;
        let m = Arc::new(Material::Solid(scene.wall_albedo.scale(shade)));
        BoxPrim::from_aabb(o, m, 0, Part::Background).triangulate(&mut tris);
    }
    tris
}

/// Triangles of each pedestrian in a world state, built once and shared by all cameras.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub scene_id: u32,
    pub time: f64,
    pub walkers: Vec<(u32, Vec<Triangle>)>,
}

impl PreparedState {
    pub fn triangles_of(&self, identity_id: u32) -> Option<&[Triangle]> {
        self.walkers
            .iter()
            .find(|(id, _)| *id == identity_id)
            .map(|(_, t)| t.as_slice())
    }
}

/// Renderer bound to a world and a cast of identities.
pub struct Stage<'a> {
    world: &'a World,
    cast: &'a Cast,
    statics: HashMap<u32, Vec<Triangle>>,
}

impl<'a> Stage<'a> {
    pub fn new(world: &'a World, cast: &'a Cast) -> Self {
        let statics = world
            .scenes
            .iter()
            .map(|s| (s.scene_id, static_geometry(s)))
            .collect();
        Self { world, cast, statics }
    }

    pub fn world(&self) -> &World {
        self.world
    }

    fn walker_triangles(&self, w: &Walker) -> Result<Vec<Triangle>> {
        let app = self.cast.get(w.identity_id)?;
        let mut boxes = Vec::with_capacity(32);
        build_rig(
            app,
            &w.pose(),
            Placement {
                ground: w.position(),
                heading: w.heading(),
            },
            &mut boxes,
        );
        Ok(triangulate_boxes(&boxes))
    }

    pub fn prepare(&self, state: &WorldState) -> Result<PreparedState> {
        let walkers = state
            .walkers
            .iter()
            .map(|w| self.walker_triangles(w).map(|t| (w.identity_id, t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedState {
            scene_id: state.scene_id,
            time: state.time,
            walkers,
        })
    }

    fn check_camera(&self, scene_id: u32, camera: &CameraSpec) -> Result<Projector> {
        if camera.scene_id != scene_id || self.world.camera(camera.camera_id).is_err() {
            return Err(Error::Validation(format!(
                "camera {} does not belong to scene {scene_id} of this world",
                camera.camera_id
            )));
        }
        if camera.resolution[0] < 16 || camera.resolution[1] < 16 {
            return Err(Error::Validation(format!(
                "camera {} resolution below 16x16",
                camera.camera_id
            )));
        }
        Projector::new(camera)
    }

    pub fn render(&self, state: &WorldState, camera: &CameraSpec, light: LightParams) -> Result<Frame> {
        self.render_prepared(&self.prepare(state)?, camera, light)
    }

    pub fn render_prepared(
        &self,
        prepared: &PreparedState,
        camera: &CameraSpec,
        light: LightParams,
    ) -> Result<Frame> {
        let proj = self.check_camera(prepared.scene_id, camera)?;
        let scene = self.world.scene(prepared.scene_id)?;
        let clear = match scene.kind {
            SceneKind::Outdoor => scene.sky.scale(light.intensity).modulate(Rgb(light.tint)).to_u8(),
            SceneKind::Indoor => [0, 0, 0],
        };
        let mut frame = Frame::blank(
            camera.camera_id,
            prepared.scene_id,
            prepared.time,
            proj.width,
            proj.height,
            clear,
        );
        if let Some(st) = self.statics.get(&prepared.scene_id) {
            draw_triangles(st, &proj, light, &mut frame);
        }
        for (_, tris) in &prepared.walkers {
            draw_triangles(tris, &proj, light, &mut frame);
        }
        Ok(frame)
    }

    /// Instance, depth and part buffers only; the RGB image stays blank.
    pub fn render_labels(&self, prepared: &PreparedState, camera: &CameraSpec) -> Result<Frame> {
        let proj = self.check_camera(prepared.scene_id, camera)?;
        let mut frame = Frame::blank(
            camera.camera_id,
            prepared.scene_id,
            prepared.time,
            proj.width,
            proj.height,
            [0, 0, 0],
        );
        if let Some(st) = self.statics.get(&prepared.scene_id) {
            draw_labels(st, &proj, &mut frame);
        }
        for (_, tris) in &prepared.walkers {
            draw_labels(tris, &proj, &mut frame);
        }
        Ok(frame)
    }

    /// Renders one identity alone: no other pedestrians, no static geometry.
    pub fn render_isolated(
        &self,
        state: &WorldState,
        camera: &CameraSpec,
        identity_id: u32,
    ) -> Result<Frame> {
        let walker = state.walker(identity_id).ok_or(Error::Lookup {
            kind: "identity in scene",
            id: identity_id as u64,
        })?;
        let proj = self.check_camera(state.scene_id, camera)?;
        let mut frame = Frame::blank(
            camera.camera_id,
            state.scene_id,
            state.time,
            proj.width,
            proj.height,
            ISOLATED_BACKGROUND,
        );
        draw_triangles(
            &self.walker_triangles(walker)?,
            &proj,
            LightParams::NEUTRAL,
            &mut frame,
        );
        Ok(frame)
    }

    /// Pixel count of the isolated render of `identity_id`, without building a frame.
    pub fn isolated_pixel_count(
        &self,
        prepared: &PreparedState,
        camera: &CameraSpec,
        identity_id: u32,
    ) -> Result<u64> {
        let proj = self.check_camera(prepared.scene_id, camera)?;
        let tris = prepared.triangles_of(identity_id).ok_or(Error::Lookup {
            kind: "identity in scene",
            id: identity_id as u64,
        })?;
        Ok(coverage_count(tris, &proj))
    }
}

/// Front three-quarter view of one identity on a plain background, cropped to
/// its tight bounding box.
pub fn render_portrait(app: &Appearance, height_px: u32) -> Result<RgbImage> {
    let width_px = (height_px / 2).max(16);
    let camera = CameraSpec::looking_at(
        0,
        0,
        [0.0, 1.0, 4.5],
        [0.0, 0.9, 0.0],
        30.0,
        [width_px, height_px],
    );
    let proj = Projector::new(&camera)?;
    let mut boxes = Vec::new();
    let cycle = crate::world::AnimationCycle::new(crate::world::AnimationKind::Walk1);
    build_rig(
        app,
        &cycle.pose(0.25),
        Placement {
            ground: [0.0, 0.0],
            heading: 0.5,
        },
        &mut boxes,
    );
    let mut frame = Frame::blank(0, 0, 0.0, width_px, height_px, [128, 128, 128]);
    draw_triangles(
        &triangulate_boxes(&boxes),
        &proj,
        LightParams::NEUTRAL,
        &mut frame,
    );
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for y in 0..height_px {
        for x in 0..width_px {
            if frame.label(x, y) != 0 {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if x0 == u32::MAX {
        return Err(Error::Invariant(format!(
            "identity {} not visible in portrait",
            app.spec.id
        )));
    }
    Ok(image::imageops::crop_imm(&frame.rgb, x0, y0, x1 - x0 + 1, y1 - y0 + 1).to_image())
}

/// Convenience for oracle tests: an axis-aligned box with a solid color.
pub fn solid_box(b: &Aabb, color: [u8; 3], label: u32) -> BoxPrim {
    BoxPrim::from_aabb(
        b,
        Arc::new(Material::Solid(Rgb::from_u8(color))),
        label,
        Part::Accessory,
    )
}
