//! Box-rig pedestrians: body proportions, clothing layout and accessories.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::mesh::{BoxPrim, Material, Part};
use crate::color::{adjust_pixel, hsv_to_rgb, Hsv, Rgb};
use crate::error::{Error, Result};
use crate::geom::{yaw_basis, Vec3};
use crate::human::{rasterize_texture, AccessoryKind, ClothingKind, IdentitySpec, ImageStore};
use crate::rng::{self, Stream};
use crate::world::Pose;

/// Edge length of the clothing texture tiles, in texels.
pub const TILE_SIZE: u32 = 12;

const SKIN_PALETTE: [[u8; 3]; 8] = [
    [255, 224, 196],
    [241, 194, 160],
    [224, 172, 130],
    [198, 140, 100],
    [170, 115, 80],
    [141, 90, 60],
    [110, 70, 45],
    [80, 52, 35],
];

/// Everything the renderer needs to draw one identity.
#[derive(Debug, Clone)]
pub struct Appearance {
    pub spec: IdentitySpec,
    upper: Arc<Material>,
    lower: Arc<Material>,
    skin: Arc<Material>,
    hair: Arc<Material>,
    shoe: Arc<Material>,
    accessory: [Arc<Material>; 9],
    dark: Arc<Material>,
}

impl Appearance {
    pub fn new(spec: &IdentitySpec, store: &ImageStore) -> Result<Self> {
        let tile = |tex| -> Result<Arc<Material>> {
            let mut img = rasterize_texture(tex, store, TILE_SIZE, TILE_SIZE)?;
            let cap = match tex.tone {
                crate::human::Tone::Dark => Some(crate::human::texture::DARK_VALUE_CAP),
                crate::human::Tone::Normal => None,
            };
            for p in img.pixels_mut() {
                p.0 = adjust_pixel(p.0, spec.hue_shift, cap);
            }
            Ok(Arc::new(Material::Tile(Arc::new(img))))
        };
        let mut rng = rng::stream(spec.style_seed, Stream::Appearance, &[]);
        let solid = |c: Rgb| Arc::new(Material::Solid(c));
        let hair_v = rng.random_range(0.05..0.45);
        let hair = Rgb(hsv_to_rgb(Hsv {
            h: rng.random_range(15.0..40.0),
            s: rng.random_range(0.3..0.7),
            v: hair_v,
        }));
        let shoe =
            Rgb::from_u8([[30, 30, 30], [240, 240, 240], [90, 60, 40], [40, 40, 80]][rng.random_range(0..4)]);
        let accessory = std::array::from_fn(|_| {
            solid(Rgb(hsv_to_rgb(Hsv {
                h: rng.random_range(0.0..360.0),
                s: rng.random_range(0.2..0.9),
                v: rng.random_range(0.25..0.95),
            })))
        });
        Ok(Self {
            upper: tile(&spec.upper_texture)?,
            lower: tile(&spec.lower_texture)?,
            skin: solid(Rgb::from_u8(
                SKIN_PALETTE[spec.skin_tone as usize % SKIN_PALETTE.len()],
            )),
            hair: solid(hair),
            shoe: solid(shoe),
            accessory,
            dark: solid(Rgb::from_u8([25, 25, 28])),
            spec: spec.clone(),
        })
    }

    fn accessory_material(&self, kind: AccessoryKind) -> Arc<Material> {
        self.accessory[kind as usize].clone()
    }
}

/// Appearances of a whole cohort, keyed by identity id.
#[derive(Debug, Clone, Default)]
pub struct Cast {
    members: HashMap<u32, Arc<Appearance>>,
}

impl Cast {
    pub fn new(specs: &[IdentitySpec], store: &ImageStore) -> Result<Self> {
        let members = specs
            .par_iter()
            .map(|s| Appearance::new(s, store).map(|a| (s.id, Arc::new(a))))
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Self { members })
    }

    pub fn get(&self, id: u32) -> Result<&Arc<Appearance>> {
        self.members.get(&id).ok_or(Error::Lookup {
            kind: "identity",
            id: id as u64,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Body placement in the world.
#[derive(Debug, Clone, Copy)]
pub struct Placement {
    /// Ground position `(x, z)`.
    pub ground: [f64; 2],
    /// Facing, radians about +y (0 = +z).
    pub heading: f64,
}

struct RigBuilder<'a> {
    basis: [Vec3; 3],
    origin: Vec3,
    sway: f64,
    label: u32,
    out: &'a mut Vec<BoxPrim>,
}

impl RigBuilder<'_> {
    fn to_world(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.sway.sin_cos();
        let p = Vec3::new(p.x * c - p.y * s, p.x * s + p.y * c, p.z);
        self.origin + self.basis[0] * p.x + self.basis[1] * p.y + self.basis[2] * p.z
    }

    fn dir_to_world(&self, d: Vec3) -> Vec3 {
        let (s, c) = self.sway.sin_cos();
        let d = Vec3::new(d.x * c - d.y * s, d.x * s + d.y * c, d.z);
        self.basis[0] * d.x + self.basis[1] * d.y + self.basis[2] * d.z
    }

    /// Axis-aligned (in body space) box from `min` to `max`.
    fn block(&mut self, min: [f64; 3], max: [f64; 3], material: &Arc<Material>, part: Part) {
        let c = Vec3::new(
            0.5 * (min[0] + max[0]),
            0.5 * (min[1] + max[1]),
            0.5 * (min[2] + max[2]),
        );
        self.out.push(BoxPrim {
            center: self.to_world(c),
            axes: [
                self.dir_to_world(Vec3::X),
                self.dir_to_world(Vec3::Y),
                self.dir_to_world(Vec3::Z),
            ],
            half: [
                0.5 * (max[0] - min[0]),
                0.5 * (max[1] - min[1]),
                0.5 * (max[2] - min[2]),
            ],
            material: material.clone(),
            label: self.label,
            part,
        });
    }

    /// Segment hanging from `pivot` at `angle` (radians, positive swings forward).
    /// Returns the distal end in body space.
    fn limb(
        &mut self,
        pivot: Vec3,
        angle: f64,
        len: f64,
        width: f64,
        depth: f64,
        material: &Arc<Material>,
        part: Part,
    ) -> Vec3 {
        let d = Vec3::new(0.0, -angle.cos(), angle.sin());
        let center = pivot + d * (0.5 * len);
        let ay = -d;
        let az = Vec3::X.cross(ay);
        self.out.push(BoxPrim {
            center: self.to_world(center),
            axes: [
                self.dir_to_world(Vec3::X),
                self.dir_to_world(ay),
                self.dir_to_world(az),
            ],
            half: [0.5 * width, 0.5 * len, 0.5 * depth],
            material: material.clone(),
            label: self.label,
            part,
        });
        pivot + d * len
    }
}

/// Appends the boxes of one posed pedestrian.
pub fn build_rig(app: &Appearance, pose: &Pose, place: Placement, out: &mut Vec<BoxPrim>) {
    let spec = &app.spec;
    let h = spec.height;
    let g = 0.85 + 0.35 * spec.build;
    let mut rb = RigBuilder {
        basis: yaw_basis(place.heading),
        origin: Vec3::new(place.ground[0], pose.bob, place.ground[1]),
        sway: pose.sway,
        label: spec.id,
        out,
    };
    let kind = spec.clothing_kind;
    let (upper, lower, skin) = (&app.upper, &app.lower, &app.skin);

    // Legs.
    let hip_y = 0.53 * h;
    let leg_x = 0.055 * h * g;
    let upper_leg = 0.245 * h;
    let lower_leg = 0.285 * h;
    let (thigh_mat, thigh_part, shin_mat, shin_part) = match kind {
        ClothingKind::Shorts => (lower, Part::Lower, skin, Part::Skin),
        ClothingKind::Dress | ClothingKind::Skirt => (skin, Part::Skin, skin, Part::Skin),
        _ => (lower, Part::Lower, lower, Part::Lower),
    };
    for side in 0..2 {
        let sx = if side == 0 { -leg_x } else { leg_x };
        let knee = rb.limb(
            Vec3::new(sx, hip_y, 0.0),
            pose.hip[side],
            upper_leg,
            0.075 * h * g,
            0.08 * h * g,
            thigh_mat,
            thigh_part,
        );
        let ankle_angle = pose.hip[side] - pose.knee[side];
        let foot = rb.limb(
            knee,
            ankle_angle,
            lower_leg - 0.035 * h,
            0.06 * h * g,
            0.065 * h * g,
            shin_mat,
            shin_part,
        );
        let shoe = app.shoe.clone();
        rb.block(
            [foot.x - 0.034 * h * g, foot.y - 0.035 * h, foot.z - 0.04 * h],
            [foot.x + 0.034 * h * g, foot.y + 0.002 * h, foot.z + 0.07 * h],
            &shoe,
            Part::Shoe,
        );
    }

    // Pelvis, skirt and torso.
    let tw = 0.105 * h * g;
    let td = 0.06 * h * g;
    let bulk = if kind == ClothingKind::Jacket { 1.08 } else { 1.0 };
    match kind {
        ClothingKind::Dress => rb.block(
            [-1.1 * tw, 0.30 * h, -1.2 * td],
            [1.1 * tw, 0.57 * h, 1.2 * td],
            upper,
            Part::Upper,
        ),
        ClothingKind::Skirt => rb.block(
            [-1.1 * tw, 0.36 * h, -1.2 * td],
            [1.1 * tw, 0.57 * h, 1.2 * td],
            lower,
            Part::Lower,
        ),
        _ => rb.block(
            [-0.95 * tw, 0.49 * h, -0.9 * td],
            [0.95 * tw, 0.57 * h, 0.9 * td],
            lower,
            Part::Lower,
        ),
    }
    rb.block(
        [-tw * bulk, 0.555 * h, -td * bulk],
        [tw * bulk, 0.82 * h, td * bulk],
        upper,
        Part::Upper,
    );

    // Arms.
    let shoulder_y = 0.80 * h;
    let arm_x = (0.105 * h + 0.025 * h) * g * bulk;
    let (upper_arm_mat, upper_arm_part, fore_mat, fore_part) = match kind {
        ClothingKind::Jacket | ClothingKind::Trousers => (upper, Part::Upper, upper, Part::Upper),
        ClothingKind::Dress => (skin, Part::Skin, skin, Part::Skin),
        _ => (upper, Part::Upper, skin, Part::Skin),
    };
    let mut hands = [Vec3::ZERO; 2];
    for side in 0..2 {
        let sx = if side == 0 { -arm_x } else { arm_x };
        let elbow = rb.limb(
            Vec3::new(sx, shoulder_y, 0.0),
            pose.shoulder[side],
            0.17 * h,
            0.045 * h * g,
            0.05 * h * g,
            upper_arm_mat,
            upper_arm_part,
        );
        let fore_angle = pose.shoulder[side] + pose.elbow[side];
        let wrist = rb.limb(
            elbow,
            fore_angle,
            0.12 * h,
            0.038 * h * g,
            0.042 * h * g,
            fore_mat,
            fore_part,
        );
        hands[side] = rb.limb(
            wrist,
            fore_angle,
            0.045 * h,
            0.035 * h,
            0.03 * h,
            skin,
            Part::Skin,
        );
    }

    // Neck and head.
    rb.block(
        [-0.025 * h, 0.815 * h, -0.025 * h],
        [0.025 * h, 0.865 * h, 0.025 * h],
        skin,
        Part::Skin,
    );
    let (hx, hz) = (0.043 * h, 0.052 * h);
    rb.block([-hx, 0.86 * h, -hz], [hx, 0.995 * h, hz], skin, Part::Skin);
    let hair = app.hair.clone();
    rb.block(
        [-hx * 1.08, 0.955 * h, -hz * 1.1],
        [hx * 1.08, 1.0 * h, hz * 0.9],
        &hair,
        Part::Hair,
    );
    rb.block(
        [-hx * 1.08, 0.88 * h, -hz * 1.12],
        [hx * 1.08, 0.96 * h, -hz * 0.7],
        &hair,
        Part::Hair,
    );

    for &acc in &spec.accessories {
        let m = app.accessory_material(acc);
        match acc {
            AccessoryKind::Hat => {
                rb.block(
                    [-hx * 1.15, 0.975 * h, -hz * 1.15],
                    [hx * 1.15, 1.035 * h, hz * 1.15],
                    &m,
                    Part::Accessory,
                );
                rb.block(
                    [-hx * 1.1, 0.972 * h, hz],
                    [hx * 1.1, 0.982 * h, hz * 1.8],
                    &m,
                    Part::Accessory,
                );
            }
            AccessoryKind::Glasses => rb.block(
                [-hx * 1.02, 0.922 * h, hz],
                [hx * 1.02, 0.942 * h, hz + 0.012 * h],
                &app.dark,
                Part::Accessory,
            ),
            AccessoryKind::Mask => rb.block(
                [-hx * 0.85, 0.872 * h, hz],
                [hx * 0.85, 0.915 * h, hz + 0.01 * h],
                &m,
                Part::Accessory,
            ),
            AccessoryKind::Earphones => {
                for sx in [-1.0, 1.0] {
                    let x = sx * (hx + 0.008 * h);
                    rb.block(
                        [x - 0.009 * h, 0.91 * h, -0.012 * h],
                        [x + 0.009 * h, 0.935 * h, 0.012 * h],
                        &m,
                        Part::Accessory,
                    );
                }
            }
            AccessoryKind::Scarf => rb.block(
                [-0.06 * h, 0.80 * h, -0.045 * h],
                [0.06 * h, 0.86 * h, 0.05 * h],
                &m,
                Part::Accessory,
            ),
            AccessoryKind::Bag => rb.block(
                [arm_x + 0.02 * h, 0.47 * h, -0.07 * h],
                [arm_x + 0.05 * h, 0.58 * h, 0.06 * h],
                &m,
                Part::Accessory,
            ),
            AccessoryKind::Backpack => rb.block(
                [-0.09 * h * g, 0.57 * h, -td * bulk - 0.09 * h],
                [0.09 * h * g, 0.80 * h, -td * bulk],
                &m,
                Part::Accessory,
            ),
            AccessoryKind::Handbag => {
                let c = hands[0];
                rb.block(
                    [c.x - 0.02 * h, c.y - 0.11 * h, c.z - 0.06 * h],
                    [c.x + 0.02 * h, c.y - 0.02 * h, c.z + 0.06 * h],
                    &m,
                    Part::Accessory,
                );
            }
            AccessoryKind::Umbrella => {
                let c = hands[1];
                let top = 1.14 * h;
                rb.block(
                    [c.x - 0.006 * h, c.y, c.z - 0.006 * h],
                    [c.x + 0.006 * h, top, c.z + 0.006 * h],
                    &app.dark,
                    Part::Accessory,
                );
                let r = 0.28 * h;
                rb.block(
                    [c.x - r, top, c.z - r],
                    [c.x + r, top + 0.03 * h, c.z + r],
                    &m,
                    Part::Accessory,
                );
            }
        }
    }
}
