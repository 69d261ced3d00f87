use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::world::CameraSpec;

/// Pinhole projection for one camera. Camera space has `x` right, `y` up and
/// `z` along the view direction; pixel `(i, j)` has its center at
/// `(i + 0.5, j + 0.5)` with `j` growing downwards.
#[derive(Debug, Clone, Copy)]
pub struct Projector {
    pub position: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    /// Focal length in pixels.
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Projector {
    pub fn new(camera: &CameraSpec) -> Result<Self> {
        if !(camera.vertical_fov > 0.0 && camera.vertical_fov < 180.0) {
            return Err(Error::Validation(format!(
                "camera {}: degenerate vertical fov {}",
                camera.camera_id, camera.vertical_fov
            )));
        }
        let [w, h] = camera.resolution;
        if w == 0 || h == 0 {
            return Err(Error::Validation(format!(
                "camera {}: empty resolution",
                camera.camera_id
            )));
        }
        let (yaw, pitch) = (camera.yaw.to_radians(), camera.pitch.to_radians());
        let forward = Vec3::new(yaw.sin() * pitch.cos(), pitch.sin(), yaw.cos() * pitch.cos());
        let right = Vec3::new(yaw.cos(), 0.0, -yaw.sin());
        let up = forward.cross(right);
        let focal = 0.5 * h as f64 / (0.5 * camera.vertical_fov.to_radians()).tan();
        Ok(Self {
            position: Vec3::from_array(camera.position),
            right,
            up,
            forward,
            focal,
            cx: 0.5 * w as f64,
            cy: 0.5 * h as f64,
            width: w,
            height: h,
        })
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        let d = p - self.position;
        Vec3::new(d.dot(self.right), d.dot(self.up), d.dot(self.forward))
    }

    /// Screen position of a camera-space point with `z > 0`.
    pub fn project(&self, pc: Vec3) -> [f64; 2] {
        [
            self.cx + self.focal * pc.x / pc.z,
            self.cy - self.focal * pc.y / pc.z,
        ]
    }

    /// World-space direction of the ray through screen point `(sx, sy)`,
    /// scaled so its component along the view axis is 1.
    pub fn ray(&self, sx: f64, sy: f64) -> Vec3 {
        let x = (sx - self.cx) / self.focal;
        let y = (self.cy - sy) / self.focal;
        self.forward + self.right * x + self.up * y
    }
}
