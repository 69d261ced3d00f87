use serde::{Deserialize, Serialize};

use super::anim::{AnimationCycle, AnimationKind, Pose};
use super::path::{PathSpec, Visit};

/// Fixed simulation step per captured frame candidate, seconds.
pub const DEFAULT_DT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Walker {
    pub identity_id: u32,
    pub path: PathSpec,
    pub animation: AnimationKind,
    pub period: f64,
    /// Arc length travelled along the path.
    pub distance: f64,
    /// Animation phase in cycles.
    pub phase: f64,
    pub idle_heading: f64,
}

impl Walker {
    pub fn from_visit(v: &Visit) -> Self {
        Self {
            identity_id: v.identity_id,
            path: v.path.clone(),
            animation: v.animation,
            period: AnimationCycle::new(v.animation).period,
            distance: v.start_distance,
            phase: v.start_phase,
            idle_heading: v.idle_heading,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        self.path.position_at(self.distance)
    }

    pub fn heading(&self) -> f64 {
        if self.animation.is_walk() {
            self.path.heading_at(self.distance)
        } else {
            self.idle_heading
        }
    }

    pub fn pose(&self) -> Pose {
        AnimationCycle::new(self.animation).pose(self.phase)
    }
}

/// Snapshot of one scene's pedestrians at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub scene_id: u32,
    pub time: f64,
    pub walkers: Vec<Walker>,
}

impl WorldState {
    pub fn new(scene_id: u32, time: f64, walkers: Vec<Walker>) -> Self {
        Self {
            scene_id,
            time,
            walkers,
        }
    }

    pub fn walker(&self, identity_id: u32) -> Option<&Walker> {
        self.walkers.iter().find(|w| w.identity_id == identity_id)
    }

    /// Advances walking pedestrians `speed * dt` along their paths and every
    /// animation by `dt / period` cycles. Pedestrians may interpenetrate.
    pub fn step(&self, dt: f64) -> WorldState {
        assert!(dt > 0.0, "step requires dt > 0");
        let walkers = self
            .walkers
            .iter()
            .map(|w| {
                let mut w = w.clone();
                if w.animation.is_walk() {
                    w.distance += w.path.speed * dt;
                    let total = w.path.length();
                    if w.path.looped && total > 0.0 {
                        w.distance = w.distance.rem_euclid(total);
                    } else {
                        w.distance = w.distance.min(total);
                    }
                }
                w.phase = (w.phase + dt / w.period).rem_euclid(1.0);
                w
            })
            .collect();
        WorldState {
            scene_id: self.scene_id,
            time: self.time + dt,
            walkers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walker(path: PathSpec) -> Walker {
        Walker {
            identity_id: 1,
            path,
            animation: AnimationKind::Walk1,
            period: 1.1,
            distance: 0.0,
            phase: 0.0,
            idle_heading: 0.0,
        }
    }

    #[test]
    fn linear_advance() {
        let path = PathSpec {
            waypoints: vec![[0.0, 0.0], [10.0, 0.0]],
            speed: 1.0,
            looped: false,
        };
        let s = WorldState::new(1, 0.0, vec![walker(path)]).step(1.0);
        assert_eq!(s.walkers[0].position(), [1.0, 0.0]);
        assert_eq!(s.time, 1.0);
    }

    #[test]
    fn full_loop_returns_to_start() {
        let path = PathSpec {
            waypoints: vec![[1.0, 1.0], [5.0, 1.0], [5.0, 4.0]],
            speed: 1.0,
            looped: true,
        };
        let total = path.length();
        assert_eq!(total, 12.0);
        let s = WorldState::new(1, 0.0, vec![walker(path)]).step(total);
        assert_eq!(s.walkers[0].position(), [1.0, 1.0]);
    }

    #[test]
    fn idle_walkers_stay_put() {
        let path = PathSpec {
            waypoints: vec![[0.0, 0.0], [10.0, 0.0]],
            speed: 1.0,
            looped: true,
        };
        let mut w = walker(path);
        w.animation = AnimationKind::Idle2;
        w.period = 4.0;
        let s = WorldState::new(1, 0.0, vec![w]).step(0.25).step(0.25);
        assert_eq!(s.walkers[0].position(), [0.0, 0.0]);
        assert!((s.walkers[0].phase - 0.125).abs() < 1e-12);
    }
}
