//! Clothing texture references, corpora and tile rasterization.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use image::RgbImage;
use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::color::{adjust_pixel, hsv_to_rgb, Hsv, Rgb};
use crate::error::{Error, Result};
use crate::rng::{self, Stream, StreamRng};

/// Where the pixels of a clothing texture come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextureMode {
    /// Patches of arbitrary, non-clothing images.
    Random,
    /// Procedural color patterns.
    Generated,
    /// Crops of real clothing photos.
    Real,
}

impl std::str::FromStr for TextureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(TextureMode::Random),
            "generated" => Ok(TextureMode::Generated),
            "real" => Ok(TextureMode::Real),
            _ => Err(Error::Config(format!("unknown texture mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tone {
    #[default]
    Normal,
    /// Value channel capped at [`DARK_VALUE_CAP`].
    Dark,
}

impl Tone {
    fn is_normal(&self) -> bool {
        *self == Tone::Normal
    }

    pub fn value_cap(self) -> Option<f64> {
        match self {
            Tone::Normal => None,
            Tone::Dark => Some(DARK_VALUE_CAP),
        }
    }
}

pub const DARK_VALUE_CAP: f64 = 0.22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    #[serde(rename = "solid")]
    Solid,
    #[serde(rename = "stripe-h")]
    StripeH,
    #[serde(rename = "stripe-v")]
    StripeV,
    #[serde(rename = "check")]
    Check,
    #[serde(rename = "dot")]
    Dot,
}

impl Pattern {
    pub const ALL: [Pattern; 5] = [
        Pattern::Solid,
        Pattern::StripeH,
        Pattern::StripeV,
        Pattern::Check,
        Pattern::Dot,
    ];

    /// Palette index of texel `(x, y)`. Every pattern has a period dividing 12
    /// for palettes of up to four colors.
    pub fn index_at(self, x: u32, y: u32, n: usize) -> usize {
        let n = n.max(1) as u32;
        let idx = match self {
            Pattern::Solid => 0,
            Pattern::StripeH => y % n,
            Pattern::StripeV => x % n,
            Pattern::Check => (x + y) % n,
            Pattern::Dot => {
                if n == 1 || x % 2 == 1 || y % 2 == 1 {
                    0
                } else {
                    1 + ((x / 2 + y / 2) % (n - 1))
                }
            }
        };
        idx as usize
    }
}

/// Inclusive-exclusive crop rectangle in source image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl CropRect {
    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= width && self.y + self.h <= height
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TextureSource {
    Patch { path: String, rect: CropRect },
    Procedural { palette: Vec<[u8; 3]>, pattern: Pattern },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextureRef {
    pub mode: TextureMode,
    pub source: TextureSource,
    #[serde(default, skip_serializing_if = "Tone::is_normal")]
    pub tone: Tone,
}

impl TextureRef {
    pub fn is_corpus_patch(&self) -> bool {
        matches!(self.source, TextureSource::Patch { .. })
    }
}

/// Which family of images a corpus holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Clothing,
    Universal,
}

#[derive(Debug, Clone)]
pub struct CorpusPatch {
    pub path: String,
    pub rect: CropRect,
}

/// Shared, lazily populated cache of corpus images keyed by path.
///
/// Paths starting with `builtin:` are generated in memory; everything else is
/// read from disk on first use.
#[derive(Default)]
pub struct ImageStore {
    images: RwLock<HashMap<String, Arc<RgbImage>>>,
}

impl fmt::Debug for ImageStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.images.read().map(|m| m.len()).unwrap_or(0);
        f.debug_struct("ImageStore").field("cached", &n).finish()
    }
}

impl ImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, path: String, img: RgbImage) {
        self.images.write().unwrap().insert(path, Arc::new(img));
    }

    pub fn get(&self, path: &str) -> Result<Arc<RgbImage>> {
        if let Some(img) = self.images.read().unwrap().get(path) {
            return Ok(img.clone());
        }
        if path.starts_with(BUILTIN_PREFIX) {
            let img =
                builtin_image(path).ok_or_else(|| Error::io(path, std::io::ErrorKind::NotFound.into()))?;
            let img = Arc::new(img);
            self.images.write().unwrap().insert(path.to_string(), img.clone());
            return Ok(img);
        }
        let img = load_rgb(Path::new(path))?;
        let img = Arc::new(img);
        self.images.write().unwrap().insert(path.to_string(), img.clone());
        Ok(img)
    }
}

fn load_rgb(path: &Path) -> Result<RgbImage> {
    if !path.exists() {
        return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
    }
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    Ok(img.to_rgb8())
}

/// An indexed set of image patches.
#[derive(Debug, Clone)]
pub struct TextureCorpus {
    pub kind: CorpusKind,
    patches: Vec<CorpusPatch>,
    /// Entries dropped at indexing time because they could not be read.
    skipped: Vec<String>,
}

const BUILTIN_PREFIX: &str = "builtin:";
const BUILTIN_CLOTHING_IMAGES: usize = 248;
const BUILTIN_UNIVERSAL_IMAGES: usize = 96;
const BUILTIN_IMAGE_SIZE: u32 = 48;
const BUILTIN_PATCH_SIZE: u32 = 24;
/// Fixed seed for the built-in corpora: they are data, not part of a run's randomness.
const BUILTIN_SEED: u64 = 0x5EED_C0DE;

impl TextureCorpus {
    pub fn from_patches(kind: CorpusKind, patches: Vec<CorpusPatch>) -> Self {
        Self {
            kind,
            patches,
            skipped: Vec::new(),
        }
    }

    pub fn empty(kind: CorpusKind) -> Self {
        Self::from_patches(kind, Vec::new())
    }

    /// In-memory stand-in for a clothing photo collection: 248 fabric-like
    /// images, two crops each.
    pub fn builtin(kind: CorpusKind) -> Self {
        let (family, count) = match kind {
            CorpusKind::Clothing => ("clothing", BUILTIN_CLOTHING_IMAGES),
            CorpusKind::Universal => ("universal", BUILTIN_UNIVERSAL_IMAGES),
        };
        let s = BUILTIN_PATCH_SIZE;
        let patches = (0..count)
            .flat_map(|i| {
                let path = format!("{BUILTIN_PREFIX}{family}/{i:04}");
                [
                    CorpusPatch {
                        path: path.clone(),
                        rect: CropRect {
                            x: 4,
                            y: 4,
                            w: s,
                            h: s,
                        },
                    },
                    CorpusPatch {
                        path,
                        rect: CropRect {
                            x: BUILTIN_IMAGE_SIZE - s - 4,
                            y: BUILTIN_IMAGE_SIZE - s - 4,
                            w: s,
                            h: s,
                        },
                    },
                ]
            })
            .collect();
        Self::from_patches(kind, patches)
    }

    /// Indexes a directory of images. With an `index.txt` (`path x y w h` per
    /// line, paths relative to `dir`), those rectangles are used; otherwise each
    /// image contributes its full frame. Unreadable entries are skipped.
    pub fn open(dir: &Path, kind: CorpusKind, store: &ImageStore) -> Result<Self> {
        let index = dir.join("index.txt");
        let mut candidates: Vec<(PathBuf, Option<CropRect>)> = Vec::new();
        if index.exists() {
            let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 5 {
                    return Err(Error::parse(
                        format!("{}:{}", index.display(), lineno + 1),
                        "expected `path x y w h`",
                    ));
                }
                let nums: Vec<u32> = parts[1..]
                    .iter()
                    .map(|p| p.parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(format!("{}:{}", index.display(), lineno + 1), e))?;
                candidates.push((
                    dir.join(parts[0]),
                    Some(CropRect {
                        x: nums[0],
                        y: nums[1],
                        w: nums[2],
                        h: nums[3],
                    }),
                ));
            }
        } else {
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
                        Some(ref e) if e == "png" || e == "jpg" || e == "jpeg"
                    )
                })
                .collect();
            files.sort();
            candidates.extend(files.into_iter().map(|p| (p, None)));
        }

        let mut patches = Vec::new();
        let mut skipped = Vec::new();
        for (path, rect) in candidates {
            let key = path.to_string_lossy().into_owned();
            match store.get(&key) {
                Ok(img) => {
                    let rect = rect.unwrap_or(CropRect {
                        x: 0,
                        y: 0,
                        w: img.width(),
                        h: img.height(),
                    });
                    if rect.fits(img.width(), img.height()) {
                        patches.push(CorpusPatch { path: key, rect });
                    } else {
                        warn!("corpus entry {key}: crop rect outside image, skipped");
                        skipped.push(key);
                    }
                }
                Err(e) => {
                    warn!("corpus entry {key}: {e}, skipped");
                    skipped.push(key);
                }
            }
        }
        Ok(Self {
            kind,
            patches,
            skipped,
        })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[CorpusPatch] {
        &self.patches
    }

    pub fn skipped(&self) -> &[String] {
        &self.skipped
    }

    fn position(&self, path: &str, rect: &CropRect) -> Option<usize> {
        self.patches
            .iter()
            .position(|p| p.path == path && p.rect == *rect)
    }
}

/// The two corpora a cohort can draw from.
#[derive(Debug, Clone)]
pub struct Corpora {
    pub clothing: TextureCorpus,
    pub universal: TextureCorpus,
}

impl Corpora {
    pub fn builtin() -> Self {
        Self {
            clothing: TextureCorpus::builtin(CorpusKind::Clothing),
            universal: TextureCorpus::builtin(CorpusKind::Universal),
        }
    }

    fn for_mode(&self, mode: TextureMode) -> Option<&TextureCorpus> {
        match mode {
            TextureMode::Real => Some(&self.clothing),
            TextureMode::Random => Some(&self.universal),
            TextureMode::Generated => None,
        }
    }
}

/// Clothing-like base colors for procedural palettes.
const GARMENT_HUES: [(f64, f64, f64); 12] = [
    (220.0, 0.55, 0.35), // navy
    (0.0, 0.0, 0.12),    // black
    (0.0, 0.0, 0.55),    // grey
    (0.0, 0.0, 0.92),    // white
    (212.0, 0.45, 0.62), // denim
    (40.0, 0.35, 0.72),  // khaki
    (355.0, 0.75, 0.70), // red
    (120.0, 0.45, 0.40), // green
    (28.0, 0.60, 0.45),  // brown
    (50.0, 0.75, 0.90),  // yellow
    (300.0, 0.35, 0.60), // mauve
    (190.0, 0.55, 0.75), // teal
];

fn random_palette(rng: &mut StreamRng, tone: Tone) -> Vec<[u8; 3]> {
    let n = rng.random_range(1..=4usize);
    (0..n)
        .map(|_| {
            let (h, s, v) = GARMENT_HUES[rng.random_range(0..GARMENT_HUES.len())];
            let mut hsv = Hsv {
                h: h + rng.random_range(-12.0..12.0),
                s: (s + rng.random_range(-0.15..0.15)).clamp(0.0, 1.0),
                v: (v + rng.random_range(-0.12..0.12)).clamp(0.05, 1.0),
            };
            if let Some(cap) = tone.value_cap() {
                hsv.v = hsv.v.min(cap);
            }
            Rgb(hsv_to_rgb(hsv)).to_u8()
        })
        .collect()
}

/// Draws one texture reference for `mode`.
///
/// Corpus-backed modes draw a patch uniformly from the entries that survived
/// indexing; a corpus with no usable entries is exhausted and reported as a
/// configuration error.
pub fn sample_texture(
    corpora: &Corpora,
    mode: TextureMode,
    tone: Tone,
    rng: &mut StreamRng,
) -> Result<TextureRef> {
    let source = match corpora.for_mode(mode) {
        None => {
            let palette = random_palette(rng, tone);
            let pattern = if palette.len() == 1 {
                Pattern::Solid
            } else {
                Pattern::ALL[rng.random_range(1..Pattern::ALL.len())]
            };
            TextureSource::Procedural { palette, pattern }
        }
        Some(corpus) => {
            if corpus.is_empty() {
                return Err(Error::Config(format!(
                    "{:?} corpus has no usable entries for {mode:?} textures",
                    corpus.kind
                )));
            }
            let p = &corpus.patches[rng.random_range(0..corpus.len())];
            TextureSource::Patch {
                path: p.path.clone(),
                rect: p.rect,
            }
        }
    };
    Ok(TextureRef { mode, source, tone })
}

/// A slightly different texture of the same kind: a shifted crop from the same
/// image (or the adjacent corpus entry), or one palette color nudged.
pub fn neighbor_texture(
    base: &TextureRef,
    corpora: &Corpora,
    store: &ImageStore,
    rng: &mut StreamRng,
) -> Result<TextureRef> {
    let source = match &base.source {
        TextureSource::Procedural { palette, pattern } => {
            let mut palette = palette.clone();
            let i = rng.random_range(0..palette.len());
            let before = palette[i];
            let cap = base.tone.value_cap();
            for _ in 0..16 {
                let mut hsv = Rgb::from_u8(before).to_hsv();
                hsv.h += rng.random_range(-20.0..20.0);
                hsv.s = (hsv.s + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0);
                hsv.v = (hsv.v + rng.random_range(-0.08..0.08)).clamp(0.02, cap.unwrap_or(1.0));
                palette[i] = Rgb(hsv_to_rgb(hsv)).to_u8();
                if palette[i] != before {
                    break;
                }
            }
            if palette[i] == before {
                palette[i] = [before[0] ^ 8, before[1], before[2]];
            }
            TextureSource::Procedural {
                palette,
                pattern: *pattern,
            }
        }
        TextureSource::Patch { path, rect } => {
            let img = store.get(path)?;
            let (iw, ih) = (img.width(), img.height());
            let mut shifted = None;
            for _ in 0..16 {
                let dx = rng.random_range(-4i64..=4);
                let dy = rng.random_range(-4i64..=4);
                let x = (rect.x as i64 + dx).clamp(0, (iw - rect.w) as i64) as u32;
                let y = (rect.y as i64 + dy).clamp(0, (ih - rect.h) as i64) as u32;
                let r = CropRect { x, y, ..*rect };
                if r != *rect {
                    shifted = Some(r);
                    break;
                }
            }
            match shifted {
                Some(rect) => TextureSource::Patch {
                    path: path.clone(),
                    rect,
                },
                None => {
                    // Crop already spans the whole image; use the next corpus entry.
                    let corpus = corpora
                        .for_mode(base.mode)
                        .ok_or_else(|| Error::Invariant("patch texture in generated mode".into()))?;
                    let i = corpus.position(path, rect).unwrap_or(0);
                    let p = &corpus.patches[(i + 1) % corpus.len()];
                    if p.path == *path && p.rect == *rect {
                        return Err(Error::Config(
                            "corpus too small to derive a neighboring patch".into(),
                        ));
                    }
                    TextureSource::Patch {
                        path: p.path.clone(),
                        rect: p.rect,
                    }
                }
            }
        }
    };
    Ok(TextureRef {
        mode: base.mode,
        source,
        tone: base.tone,
    })
}

/// Renders a texture reference into a `width × height` tile.
///
/// Procedural patterns are evaluated per texel and tile seamlessly whenever
/// both dimensions are multiples of 12; patches are resampled nearest-neighbor.
pub fn rasterize_texture(tex: &TextureRef, store: &ImageStore, width: u32, height: u32) -> Result<RgbImage> {
    if width == 0 || height == 0 {
        return Err(Error::Validation("texture tile dimensions must be >= 1".into()));
    }
    let cap = tex.tone.value_cap();
    let tile = match &tex.source {
        TextureSource::Procedural { palette, pattern } => {
            if palette.is_empty() {
                return Err(Error::Validation("procedural palette is empty".into()));
            }
            RgbImage::from_fn(width, height, |x, y| {
                image::Rgb(palette[pattern.index_at(x, y, palette.len())])
            })
        }
        TextureSource::Patch { path, rect } => {
            let img = store.get(path)?;
            if !rect.fits(img.width(), img.height()) {
                return Err(Error::Validation(format!(
                    "crop {rect:?} outside {path} ({}x{})",
                    img.width(),
                    img.height()
                )));
            }
            RgbImage::from_fn(width, height, |x, y| {
                let sx = rect.x + (x as u64 * rect.w as u64 / width as u64) as u32;
                let sy = rect.y + (y as u64 * rect.h as u64 / height as u64) as u32;
                *img.get_pixel(sx, sy)
            })
        }
    };
    Ok(match cap {
        None => tile,
        Some(c) => {
            let mut t = tile;
            for p in t.pixels_mut() {
                p.0 = adjust_pixel(p.0, 0.0, Some(c));
            }
            t
        }
    })
}

fn builtin_image(path: &str) -> Option<RgbImage> {
    let rest = path.strip_prefix(BUILTIN_PREFIX)?;
    let (family, idx) = rest.split_once('/')?;
    let idx: u64 = idx.parse().ok()?;
    match family {
        "clothing" if (idx as usize) < BUILTIN_CLOTHING_IMAGES => Some(fabric_image(idx)),
        "universal" if (idx as usize) < BUILTIN_UNIVERSAL_IMAGES => Some(scene_image(idx)),
        _ => None,
    }
}

fn hash_noise(idx: u64, x: u32, y: u32) -> f64 {
    let h = rng::mix64(idx ^ ((x as u64) << 32 | y as u64).wrapping_mul(0x2545_F491_4F6C_DD1D));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Fabric-like image: garment base color, a weave or print structure, fine noise.
fn fabric_image(idx: u64) -> RgbImage {
    let mut rng = rng::stream(BUILTIN_SEED, Stream::Corpus, &[0, idx]);
    let (h, s, v) = GARMENT_HUES[rng.random_range(0..GARMENT_HUES.len())];
    let base = Hsv {
        h: h + rng.random_range(-15.0..15.0),
        s: (s + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0),
        v: (v + rng.random_range(-0.1..0.1)).clamp(0.05, 1.0),
    };
    let (h2, s2, v2) = GARMENT_HUES[rng.random_range(0..GARMENT_HUES.len())];
    let accent = Rgb(hsv_to_rgb(Hsv { h: h2, s: s2, v: v2 }));
    let base = Rgb(hsv_to_rgb(base));
    let style = rng.random_range(0..6u32);
    let period = rng.random_range(4..12u32);
    let (cx, cy, r) = (
        rng.random_range(8.0..40.0),
        rng.random_range(8.0..40.0),
        rng.random_range(5.0..14.0),
    );
    RgbImage::from_fn(BUILTIN_IMAGE_SIZE, BUILTIN_IMAGE_SIZE, |x, y| {
        let n = hash_noise(idx, x, y) - 0.5;
        let weave = if (x + y) % 2 == 0 { 0.04 } else { -0.04 };
        let c = match style {
            0 => base,
            1 if (y / period) % 2 == 1 => base.lerp(accent, 0.8),
            2 if (x / period) % 2 == 1 => base.lerp(accent, 0.8),
            3 if (x / period + y / period) % 2 == 1 => base.lerp(accent, 0.6),
            4 if (x % period == 0) || (y % period == 0) => accent,
            5 if ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt() < r => accent,
            _ => base,
        };
        let k = 1.0 + weave + 0.12 * n;
        image::Rgb(c.scale(k).to_u8())
    })
}

/// Arbitrary-image stand-in: smooth gradients with saturated blobs.
fn scene_image(idx: u64) -> RgbImage {
    let mut rng = rng::stream(BUILTIN_SEED, Stream::Corpus, &[1, idx]);
    let rand_color = |rng: &mut StreamRng| {
        Rgb(hsv_to_rgb(Hsv {
            h: rng.random_range(0.0..360.0),
            s: rng.random_range(0.2..1.0),
            v: rng.random_range(0.2..1.0),
        }))
    };
    let top = rand_color(&mut rng);
    let bottom = rand_color(&mut rng);
    let blobs: Vec<(f64, f64, f64, Rgb)> = (0..rng.random_range(2..6))
        .map(|_| {
            (
                rng.random_range(0.0..48.0),
                rng.random_range(0.0..48.0),
                rng.random_range(3.0..16.0),
                rand_color(&mut rng),
            )
        })
        .collect();
    RgbImage::from_fn(BUILTIN_IMAGE_SIZE, BUILTIN_IMAGE_SIZE, |x, y| {
        let mut c = top.lerp(bottom, y as f64 / (BUILTIN_IMAGE_SIZE - 1) as f64);
        for &(bx, by, br, bc) in &blobs {
            if (x as f64 - bx).powi(2) + (y as f64 - by).powi(2) < br * br {
                c = bc;
            }
        }
        let n = hash_noise(idx ^ 0xABCD, x, y) - 0.5;
        image::Rgb(c.scale(1.0 + 0.2 * n).to_u8())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn procedural(palette: Vec<[u8; 3]>, pattern: Pattern) -> TextureRef {
        TextureRef {
            mode: TextureMode::Generated,
            source: TextureSource::Procedural { palette, pattern },
            tone: Tone::Normal,
        }
    }

    #[test]
    fn solid_tile_is_uniform() {
        let t = rasterize_texture(
            &procedural(vec![[255, 0, 0]], Pattern::Solid),
            &ImageStore::new(),
            7,
            5,
        )
        .unwrap();
        assert!(t.pixels().all(|p| p.0 == [255, 0, 0]));
    }

    #[test]
    fn horizontal_stripes_alternate_rows() {
        let a = [10, 20, 30];
        let b = [200, 100, 50];
        let t = rasterize_texture(
            &procedural(vec![a, b], Pattern::StripeH),
            &ImageStore::new(),
            8,
            8,
        )
        .unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let want = if y % 2 == 0 { a } else { b };
                assert_eq!(t.get_pixel(x, y).0, want, "({x},{y})");
            }
        }
    }

    #[test]
    fn one_pixel_tile_is_origin_color() {
        let store = ImageStore::new();
        let corpus = TextureCorpus::builtin(CorpusKind::Clothing);
        let p = &corpus.patches()[3];
        let patch = TextureRef {
            mode: TextureMode::Real,
            source: TextureSource::Patch {
                path: p.path.clone(),
                rect: p.rect,
            },
            tone: Tone::Normal,
        };
        let t = rasterize_texture(&patch, &store, 1, 1).unwrap();
        let src = store.get(&p.path).unwrap();
        assert_eq!(t.get_pixel(0, 0), src.get_pixel(p.rect.x, p.rect.y));

        for pattern in Pattern::ALL {
            let pal = vec![[1, 2, 3], [4, 5, 6], [7, 8, 9]];
            let t = rasterize_texture(&procedural(pal.clone(), pattern), &store, 1, 1).unwrap();
            assert_eq!(t.get_pixel(0, 0).0, pal[pattern.index_at(0, 0, 3)]);
        }
    }

    #[test]
    fn procedural_tiles_are_seamless_at_multiples_of_12() {
        for pattern in Pattern::ALL {
            for n in 1..=4 {
                let pal: Vec<[u8; 3]> = (0..n).map(|i| [i as u8 * 60, 0, 0]).collect();
                let t = rasterize_texture(&procedural(pal, pattern), &ImageStore::new(), 24, 12).unwrap();
                // Wrapping the tile continues the pattern: texel (x + w) equals texel x.
                for y in 0..12u32 {
                    for x in 0..24u32 {
                        let wrapped = pattern.index_at(x + 24, y + 12, n);
                        assert_eq!(t.get_pixel(x, y).0[0], wrapped as u8 * 60);
                    }
                }
            }
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let tex = TextureRef {
            mode: TextureMode::Real,
            source: TextureSource::Patch {
                path: "/nonexistent/shirt.png".into(),
                rect: CropRect {
                    x: 0,
                    y: 0,
                    w: 4,
                    h: 4,
                },
            },
            tone: Tone::Normal,
        };
        let err = rasterize_texture(&tex, &ImageStore::new(), 4, 4).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/shirt.png"));
    }

    #[test]
    fn generated_mode_uses_small_palettes() {
        let corpora = Corpora::builtin();
        let mut rng = rng::stream(1, Stream::Texture, &[0]);
        for _ in 0..200 {
            let t = sample_texture(&corpora, TextureMode::Generated, Tone::Normal, &mut rng).unwrap();
            match t.source {
                TextureSource::Procedural { palette, .. } => assert!((1..=4).contains(&palette.len())),
                _ => panic!("generated mode produced a patch"),
            }
        }
    }

    #[test]
    fn real_mode_with_singleton_corpus_returns_that_patch() {
        let patch = CorpusPatch {
            path: "builtin:clothing/0001".into(),
            rect: CropRect {
                x: 1,
                y: 2,
                w: 3,
                h: 4,
            },
        };
        let corpora = Corpora {
            clothing: TextureCorpus::from_patches(CorpusKind::Clothing, vec![patch.clone()]),
            universal: TextureCorpus::empty(CorpusKind::Universal),
        };
        let mut rng = rng::stream(1, Stream::Texture, &[0]);
        for _ in 0..10 {
            let t = sample_texture(&corpora, TextureMode::Real, Tone::Normal, &mut rng).unwrap();
            assert_eq!(
                t.source,
                TextureSource::Patch {
                    path: patch.path.clone(),
                    rect: patch.rect
                }
            );
        }
    }

    #[test]
    fn every_patch_is_drawn_from_a_hundred_entry_corpus() {
        let patches: Vec<CorpusPatch> = (0..100)
            .map(|i| CorpusPatch {
                path: format!("builtin:clothing/{i:04}"),
                rect: CropRect {
                    x: 0,
                    y: 0,
                    w: 8,
                    h: 8,
                },
            })
            .collect();
        let corpora = Corpora {
            clothing: TextureCorpus::from_patches(CorpusKind::Clothing, patches),
            universal: TextureCorpus::empty(CorpusKind::Universal),
        };
        let mut counts = HashMap::new();
        let mut rng = rng::stream(99, Stream::Texture, &[0]);
        for _ in 0..10_000 {
            let t = sample_texture(&corpora, TextureMode::Real, Tone::Normal, &mut rng).unwrap();
            if let TextureSource::Patch { path, .. } = t.source {
                *counts.entry(path).or_insert(0usize) += 1;
            }
        }
        assert_eq!(counts.len(), 100);
        assert!(counts.values().all(|&c| c >= 1));
    }

    #[test]
    fn empty_corpus_is_a_configuration_error() {
        let corpora = Corpora {
            clothing: TextureCorpus::empty(CorpusKind::Clothing),
            universal: TextureCorpus::empty(CorpusKind::Universal),
        };
        let mut rng = rng::stream(1, Stream::Texture, &[0]);
        assert!(matches!(
            sample_texture(&corpora, TextureMode::Real, Tone::Normal, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn directory_corpus_skips_unreadable_entries() {
        let dir = tempfile::tempdir().unwrap();
        RgbImage::from_pixel(16, 16, image::Rgb([9, 9, 9]))
            .save(dir.path().join("a.png"))
            .unwrap();
        std::fs::write(dir.path().join("b.png"), b"not a png").unwrap();
        std::fs::write(
            dir.path().join("index.txt"),
            "a.png 0 0 8 8\nb.png 0 0 8 8\na.png 10 10 8 8\n",
        )
        .unwrap();
        let store = ImageStore::new();
        let corpus = TextureCorpus::open(dir.path(), CorpusKind::Clothing, &store).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.skipped().len(), 2);
    }

    #[test]
    fn dark_tone_caps_value() {
        let mut tex = procedural(vec![[250, 250, 30], [20, 200, 250]], Pattern::Check);
        tex.tone = Tone::Dark;
        let t = rasterize_texture(&tex, &ImageStore::new(), 12, 12).unwrap();
        for p in t.pixels() {
            assert!(Rgb::from_u8(p.0).to_hsv().v <= DARK_VALUE_CAP + 0.5 / 255.0);
        }
    }
}
