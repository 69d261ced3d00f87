//! Cyclic limb-angle tables for the pedestrian rig.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnimationKind {
    Walk1,
    Walk2,
    Walk3,
    Walk4,
    Idle1,
    Idle2,
}

impl AnimationKind {
    pub const ALL: [AnimationKind; 6] = [
        AnimationKind::Walk1,
        AnimationKind::Walk2,
        AnimationKind::Walk3,
        AnimationKind::Walk4,
        AnimationKind::Idle1,
        AnimationKind::Idle2,
    ];

    pub fn is_walk(self) -> bool {
        !matches!(self, AnimationKind::Idle1 | AnimationKind::Idle2)
    }
}

/// Joint angles in radians (positive swings the distal segment forward) plus a
/// vertical body offset in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub shoulder: [f64; 2],
    pub elbow: [f64; 2],
    pub hip: [f64; 2],
    pub knee: [f64; 2],
    pub bob: f64,
    /// Sideways lean of the whole body, radians.
    pub sway: f64,
}

impl Pose {
    fn lerp(&self, o: &Pose, t: f64) -> Pose {
        let l = |a: f64, b: f64| a + (b - a) * t;
        let l2 = |a: [f64; 2], b: [f64; 2]| [l(a[0], b[0]), l(a[1], b[1])];
        Pose {
            shoulder: l2(self.shoulder, o.shoulder),
            elbow: l2(self.elbow, o.elbow),
            hip: l2(self.hip, o.hip),
            knee: l2(self.knee, o.knee),
            bob: l(self.bob, o.bob),
            sway: l(self.sway, o.sway),
        }
    }
}

/// Number of keyed poses per cycle.
pub const TABLE_LEN: usize = 32;
/// Phases are snapped to this grid before lookup so `pose(p) == pose(p + 1)` holds exactly.
const PHASE_GRID: f64 = 4096.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationCycle {
    pub kind: AnimationKind,
    /// Seconds per cycle.
    pub period: f64,
    pub table: Vec<Pose>,
}

impl AnimationCycle {
    pub fn new(kind: AnimationKind) -> Self {
        // (period, hip amplitude, knee amplitude, arm amplitude, bob)
        let (period, hip, knee, arm, bob) = match kind {
            AnimationKind::Walk1 => (1.10, 0.45, 0.70, 0.40, 0.030),
            AnimationKind::Walk2 => (1.00, 0.55, 0.85, 0.55, 0.040),
            AnimationKind::Walk3 => (1.25, 0.35, 0.55, 0.20, 0.020),
            AnimationKind::Walk4 => (0.90, 0.60, 0.95, 0.65, 0.045),
            AnimationKind::Idle1 => (3.00, 0.03, 0.02, 0.05, 0.005),
            AnimationKind::Idle2 => (4.00, 0.05, 0.04, 0.10, 0.008),
        };
        let table = (0..TABLE_LEN)
            .map(|i| {
                let a = TAU * i as f64 / TABLE_LEN as f64;
                let s = a.sin();
                if kind.is_walk() {
                    Pose {
                        shoulder: [-arm * s, arm * s],
                        elbow: [0.25 + 0.2 * (-s).max(0.0), 0.25 + 0.2 * s.max(0.0)],
                        hip: [hip * s, -hip * s],
                        knee: [-knee * (a + 0.6).sin().min(0.0), knee * (a + 0.6).sin().max(0.0)],
                        bob: bob * (2.0 * a).cos().abs(),
                        sway: 0.02 * s,
                    }
                } else {
                    Pose {
                        shoulder: [arm * s, arm * s * 0.5],
                        elbow: [0.1, 0.1 + arm * s.abs()],
                        hip: [hip * s, hip * s],
                        knee: [knee, knee],
                        bob,
                        sway: hip * s,
                    }
                }
            })
            .collect();
        Self { kind, period, table }
    }

    /// Pose at `phase` (cycles); only the fractional part matters.
    pub fn pose(&self, phase: f64) -> Pose {
        let n = self.table.len();
        let grid = (phase * PHASE_GRID).round() as i64;
        let q = grid.rem_euclid(PHASE_GRID as i64) as f64 / PHASE_GRID;
        let x = q * n as f64;
        let i = x.floor() as usize % n;
        let t = x - x.floor();
        self.table[i].lerp(&self.table[(i + 1) % n], t)
    }
}
