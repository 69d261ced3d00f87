//! Scenes, camera networks, pedestrian motion and illumination.

pub mod anim;
pub mod light;
pub mod path;
pub mod presets;
pub mod scene;
pub mod state;

pub use anim::{AnimationCycle, AnimationKind, Pose};
pub use light::{IlluminationPreset, IlluminationSchedule, LightKey, LightParams};
pub use path::{assign_paths, sample_path, Assignment, PathSpec, ScheduleParams, Slot, Visit};
pub use scene::{build_world, CameraSpec, SceneKind, SceneSpec, World};
pub use state::{Walker, WorldState, DEFAULT_DT};
