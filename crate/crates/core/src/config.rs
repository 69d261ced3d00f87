//! Synthesis configuration: named bases, corner presets and `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotate::{EnlargeMode, FilterPolicy};
use crate::dataset::ImageFormat;
use crate::error::{Error, Result};
use crate::human::{TextureMode, Tone};
use crate::world::presets::{camera_preset_ids, scene_preset, DEFAULT_RESOLUTION};
use crate::world::IlluminationPreset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    #[default]
    Normal,
    Black,
}

impl Palette {
    pub fn tone(self) -> Tone {
        match self {
            Palette::Normal => Tone::Normal,
            Palette::Black => Tone::Dark,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    pub count: usize,
    pub texture_mode: TextureMode,
    pub accessories: bool,
    pub hard_fraction: f64,
    pub palette: Palette,
    /// Directory of clothing photos; the built-in corpus is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub scenes: String,
    pub cameras: String,
    /// Further camera presets added on top of `cameras`.
    pub extra_cameras: Vec<String>,
    /// Pedestrians sharing a scene at once.
    pub crowd: usize,
    /// Scenes each identity walks through.
    pub visits: usize,
    pub resolution: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminationConfig {
    pub preset: IlluminationPreset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationConfig {
    pub min_height_px: u32,
    pub min_visible_ratio: f64,
    pub reject_edge_touching: bool,
    pub edge_height_px: u32,
    pub enlarge_mode: EnlargeMode,
    pub enlarge_factor: f64,
}

impl AnnotationConfig {
    pub fn policy(&self) -> FilterPolicy {
        FilterPolicy {
            min_height_px: self.min_height_px,
            min_visible_ratio: self.min_visible_ratio,
            reject_edge_touching: self.reject_edge_touching,
            edge_height_px: self.edge_height_px,
        }
    }
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        let p = FilterPolicy::default();
        Self {
            min_height_px: p.min_height_px,
            min_visible_ratio: p.min_visible_ratio,
            reject_edge_touching: p.reject_edge_touching,
            edge_height_px: p.edge_height_px,
            enlarge_mode: EnlargeMode::Stochastic,
            enlarge_factor: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureConfig {
    /// Simulation step between captured frames, seconds.
    pub dt: f64,
    /// Every slot runs at least this many steps.
    pub min_steps: usize,
    /// Slots stop here even if some member lacks candidates.
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionConfig {
    pub out_dir: String,
    pub per_id_budget: usize,
    pub format: ImageFormat,
    pub jpeg_quality: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub seed: u64,
    pub identities: IdentityConfig,
    pub world: WorldConfig,
    pub illumination: IlluminationConfig,
    pub annotation: AnnotationConfig,
    pub capture: CaptureConfig,
    pub emission: EmissionConfig,
}

pub const BASES: [&str; 3] = ["paper_full", "desk_full", "smoke"];
pub const CORNERS: [&str; 3] = ["indoor", "night", "black"];

/// A named base configuration.
pub fn base_config(name: &str) -> Result<SynthesisConfig> {
    let mut cfg = SynthesisConfig {
        seed: 0,
        identities: IdentityConfig {
            count: 3000,
            texture_mode: TextureMode::Real,
            accessories: true,
            hard_fraction: 0.5,
            palette: Palette::Normal,
            corpus: None,
        },
        world: WorldConfig {
            scenes: "default4".into(),
            cameras: "34".into(),
            extra_cameras: Vec::new(),
            crowd: 6,
            visits: 2,
            resolution: DEFAULT_RESOLUTION,
        },
        illumination: IlluminationConfig {
            preset: IlluminationPreset::Day,
        },
        annotation: AnnotationConfig::default(),
        capture: CaptureConfig {
            dt: 0.25,
            min_steps: 24,
            max_steps: 160,
        },
        emission: EmissionConfig {
            out_dir: "out".into(),
            per_id_budget: 40,
            format: ImageFormat::Png,
            jpeg_quality: 90,
        },
    };
    match name {
        "paper_full" => {}
        "desk_full" => {
            cfg.identities.count = 100;
            cfg.world.cameras = "desk8".into();
        }
        "smoke" => {
            cfg.identities.count = 2;
            cfg.world.cameras = "smoke2".into();
            cfg.capture.min_steps = 8;
            cfg.emission.per_id_budget = 4;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown base preset {other:?} (expected one of {BASES:?})"
            )))
        }
    }
    Ok(cfg)
}

/// Applies a corner-scenario preset. Corners touch disjoint sections, so they compose.
pub fn apply_corner(cfg: &mut SynthesisConfig, name: &str) -> Result<()> {
    match name {
        "indoor" => {
            if !cfg.world.extra_cameras.iter().any(|c| c == "indoor6_extra") {
                cfg.world.extra_cameras.push("indoor6_extra".into());
            }
        }
        "night" => cfg.illumination.preset = IlluminationPreset::Night,
        "black" => cfg.identities.palette = Palette::Black,
        other => {
            return Err(Error::Config(format!(
                "unknown corner preset {other:?} (expected one of {CORNERS:?})"
            )))
        }
    }
    Ok(())
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.identities.count == 0 {
            return bad("identities.count must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.identities.hard_fraction) {
            return bad(format!(
                "identities.hard_fraction {} outside [0, 1]",
                self.identities.hard_fraction
            ));
        }
        scene_preset(&self.world.scenes)?;
        camera_preset_ids(&self.world.cameras)?;
        for c in &self.world.extra_cameras {
            camera_preset_ids(c)?;
        }
        if self.world.crowd == 0 || self.world.visits == 0 {
            return bad("world.crowd and world.visits must be positive".into());
        }
        if self.world.resolution.iter().any(|&r| r < 16) {
            return bad("world.resolution must be at least 16x16".into());
        }
        self.annotation.policy().validate()?;
        if !(self.annotation.enlarge_factor >= 0.0 && self.annotation.enlarge_factor.is_finite()) {
            return bad("annotation.enlarge_factor must be a nonnegative number".into());
        }
        if !(self.capture.dt > 0.0 && self.capture.dt.is_finite()) {
            return bad("capture.dt must be positive".into());
        }
        if self.capture.max_steps == 0 || self.capture.min_steps > self.capture.max_steps {
            return bad("capture needs 0 < min_steps <= max_steps".into());
        }
        if self.emission.per_id_budget == 0 {
            return bad("emission.per_id_budget must be at least 1".into());
        }
        if !(1..=100).contains(&self.emission.jpeg_quality) {
            return bad("emission.jpeg_quality must be in 1..=100".into());
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.emission.out_dir)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let mut tree = toml::Value::try_from(&*self).expect("config serializes");
        apply_override(&mut tree, assignment)?;
        *self = from_tree(tree)?;
        Ok(())
    }
}

fn from_tree(tree: toml::Value) -> Result<SynthesisConfig> {
    tree.try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

/// Parses `dotted.key=value`, reading the value as TOML and falling back to a bare string.
pub fn apply_override(tree: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let path: Vec<&str> = key.trim().split('.').collect();
    let mut node = tree;
    for (i, part) in path.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {part:?} is not inside a section")))?;
        if i + 1 == path.len() {
            if !table.contains_key(*part) && *part != "corpus" {
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config section in {key:?}")))?;
    }
    Err(Error::Config(format!("empty override key in {assignment:?}")))
}

fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Where a configuration comes from before corners and overrides.
#[derive(Debug, Clone, Default)]
pub struct ConfigRequest {
    pub file: Option<PathBuf>,
    pub base: Option<String>,
    pub corners: Vec<String>,
    pub overrides: Vec<String>,
}

/// Resolves a configuration.
///
/// A TOML file may name a `base` and `corners`; its other keys are merged over
/// the base. A `header.json` from an earlier run is taken verbatim. Corners
/// are applied next, then overrides, then the result is validated.
pub fn resolve(req: &ConfigRequest) -> Result<SynthesisConfig> {
    let mut corners = Vec::new();
    let mut cfg = match &req.file {
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            let json = read_json_config(path)?;
            serde_json::from_value(json).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut table: toml::Table = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
            let file_base = match table.remove("base") {
                Some(toml::Value::String(s)) => Some(s),
                Some(_) => return Err(Error::Config("`base` must be a string".into())),
                None => None,
            };
            if let Some(c) = table.remove("corners") {
                let list = c
                    .as_array()
                    .ok_or_else(|| Error::Config("`corners` must be an array".into()))?;
                for v in list {
                    corners.push(
                        v.as_str()
                            .ok_or_else(|| Error::Config("corner names must be strings".into()))?
                            .to_string(),
                    );
                }
            }
            let base = req
                .base
                .clone()
                .or(file_base)
                .unwrap_or_else(|| "paper_full".into());
            let mut tree = toml::Value::try_from(base_config(&base)?).expect("config serializes");
            merge(&mut tree, toml::Value::Table(table));
            from_tree(tree)?
        }
        None => base_config(req.base.as_deref().unwrap_or("paper_full"))?,
    };
    corners.extend(req.corners.iter().cloned());
    for c in &corners {
        apply_corner(&mut cfg, c)?;
    }
    if !req.overrides.is_empty() {
        let mut tree = toml::Value::try_from(&cfg).expect("config serializes");
        for o in &req.overrides {
            apply_override(&mut tree, o)?;
        }
        cfg = from_tree(tree)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_json_config(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(match v.get_mut("config") {
        Some(c) => c.take(),
        None => v,
    })
}
