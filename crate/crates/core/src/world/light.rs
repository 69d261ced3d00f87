use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightParams {
    /// Sky intensity in `[0, 1]`.
    pub intensity: f64,
    /// Per-channel color temperature tint, components in `[0, 1]`.
    pub tint: [f64; 3],
}

impl LightParams {
    pub const NEUTRAL: LightParams = LightParams {
        intensity: 1.0,
        tint: [1.0, 1.0, 1.0],
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightKey {
    pub t: f64,
    pub intensity: f64,
    pub tint: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IlluminationPreset {
    Day,
    Night,
}

impl std::str::FromStr for IlluminationPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "day" => Ok(Self::Day),
            "night" => Ok(Self::Night),
            _ => Err(Error::Config(format!("unknown illumination preset {s:?}"))),
        }
    }
}

/// Piecewise-linear sky intensity and tint over the capture window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationSchedule {
    keys: Vec<LightKey>,
}

/// Upper bound on the mean intensity of the night preset.
pub const NIGHT_MEAN_CAP: f64 = 0.25;

impl IlluminationSchedule {
    pub fn new(mut keys: Vec<LightKey>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::Validation("illumination schedule needs keys".into()));
        }
        keys.sort_by(|a, b| a.t.total_cmp(&b.t));
        for k in &keys {
            if !(0.0..=1.0).contains(&k.intensity) || k.tint.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::Validation(format!("light key at t={} out of range", k.t)));
            }
        }
        Ok(Self { keys })
    }

    /// Keys at dawn, noon and dusk of `[0, window]` seconds.
    pub fn preset(preset: IlluminationPreset, window: f64) -> Self {
        let w = window.max(1.0);
        let keys = match preset {
            IlluminationPreset::Day => vec![
                LightKey {
                    t: 0.0,
                    intensity: 0.75,
                    tint: [1.0, 0.93, 0.84],
                },
                LightKey {
                    t: 0.5 * w,
                    intensity: 1.0,
                    tint: [1.0, 1.0, 1.0],
                },
                LightKey {
                    t: w,
                    intensity: 0.8,
                    tint: [1.0, 0.9, 0.8],
                },
            ],
            // Blue-shifted and dim; the window mean stays below NIGHT_MEAN_CAP.
            IlluminationPreset::Night => vec![
                LightKey {
                    t: 0.0,
                    intensity: 0.16,
                    tint: [0.62, 0.72, 1.0],
                },
                LightKey {
                    t: 0.5 * w,
                    intensity: 0.2,
                    tint: [0.6, 0.7, 1.0],
                },
                LightKey {
                    t: w,
                    intensity: 0.14,
                    tint: [0.62, 0.72, 1.0],
                },
            ],
        };
        Self { keys }
    }

    pub fn keys(&self) -> &[LightKey] {
        &self.keys
    }

    pub fn window(&self) -> (f64, f64) {
        (self.keys[0].t, self.keys[self.keys.len() - 1].t)
    }

    pub fn illumination_at(&self, t: f64) -> Result<LightParams> {
        let (lo, hi) = self.window();
        if !(lo..=hi).contains(&t) {
            return Err(Error::Range {
                what: "illumination time",
                value: t,
                lo,
                hi,
            });
        }
        let i = self.keys.partition_point(|k| k.t <= t);
        if i == 0 {
            let k = self.keys[0];
            return Ok(LightParams {
                intensity: k.intensity,
                tint: k.tint,
            });
        }
        if i >= self.keys.len() {
            let k = self.keys[self.keys.len() - 1];
            return Ok(LightParams {
                intensity: k.intensity,
                tint: k.tint,
            });
        }
        let (a, b) = (self.keys[i - 1], self.keys[i]);
        let s = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
        let l = |x: f64, y: f64| x + (y - x) * s;
        Ok(LightParams {
            intensity: l(a.intensity, b.intensity),
            tint: [
                l(a.tint[0], b.tint[0]),
                l(a.tint[1], b.tint[1]),
                l(a.tint[2], b.tint[2]),
            ],
        })
    }
}
