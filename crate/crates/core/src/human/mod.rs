//! Parametric pedestrian identities.

pub mod texture;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream, StreamRng};
pub use texture::{
    neighbor_texture, rasterize_texture, sample_texture, Corpora, CorpusKind, CorpusPatch, CropRect,
    ImageStore, Pattern, TextureCorpus, TextureMode, TextureRef, TextureSource, Tone,
};

pub const HEIGHT_RANGE: (f64, f64) = (1.45, 1.95);
pub const SKIN_TONES: usize = 8;
pub const MAX_ACCESSORIES: usize = 3;
pub const ACCESSORY_PROBABILITY: f64 = 0.15;
pub const DEFAULT_GROUP_SIZE: usize = 5;
/// Largest hue offset a hard-group member may carry relative to its base.
pub const GROUP_HUE_JITTER: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClothingKind {
    Tshirt,
    Jacket,
    Dress,
    Shorts,
    Trousers,
    Skirt,
}

impl ClothingKind {
    pub const ALL: [ClothingKind; 6] = [
        ClothingKind::Tshirt,
        ClothingKind::Jacket,
        ClothingKind::Dress,
        ClothingKind::Shorts,
        ClothingKind::Trousers,
        ClothingKind::Skirt,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessoryKind {
    Mask,
    Glasses,
    Hat,
    Earphones,
    Scarf,
    Bag,
    Backpack,
    Handbag,
    Umbrella,
}

impl AccessoryKind {
    pub const ALL: [AccessoryKind; 9] = [
        AccessoryKind::Mask,
        AccessoryKind::Glasses,
        AccessoryKind::Hat,
        AccessoryKind::Earphones,
        AccessoryKind::Scarf,
        AccessoryKind::Bag,
        AccessoryKind::Backpack,
        AccessoryKind::Handbag,
        AccessoryKind::Umbrella,
    ];
}

/// Full parametric description of one pedestrian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySpec {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<u32>,
    /// Meters.
    pub height: f64,
    /// Limb and torso girth in `[0, 1]`.
    pub build: f64,
    pub skin_tone: u8,
    pub upper_texture: TextureRef,
    pub lower_texture: TextureRef,
    pub clothing_kind: ClothingKind,
    pub accessories: BTreeSet<AccessoryKind>,
    /// Degrees in `[-180, 180)`, applied to both clothing textures.
    pub hue_shift: f64,
    /// Seeds the secondary colors (hair, shoes, accessories). Shared within a hard group.
    pub style_seed: u64,
}

impl IdentitySpec {
    /// Checks the per-identity invariants.
    pub fn validate(&self) -> Result<()> {
        if self.id == 0 {
            return Err(Error::Validation("identity ids start at 1".into()));
        }
        if !(HEIGHT_RANGE.0..=HEIGHT_RANGE.1).contains(&self.height) {
            return Err(Error::Validation(format!(
                "identity {} height {} outside {:?}",
                self.id, self.height, HEIGHT_RANGE
            )));
        }
        if !(0.0..=1.0).contains(&self.build) {
            return Err(Error::Validation(format!(
                "identity {} build {} outside [0, 1]",
                self.id, self.build
            )));
        }
        if self.skin_tone as usize >= SKIN_TONES {
            return Err(Error::Validation(format!(
                "identity {} skin tone {} outside palette",
                self.id, self.skin_tone
            )));
        }
        if self.accessories.len() > MAX_ACCESSORIES {
            return Err(Error::Validation(format!(
                "identity {} carries {} accessories",
                self.id,
                self.accessories.len()
            )));
        }
        if !(-180.0..180.0).contains(&self.hue_shift) {
            return Err(Error::Validation(format!(
                "identity {} hue shift {} outside [-180, 180)",
                self.id, self.hue_shift
            )));
        }
        Ok(())
    }
}

/// Cohort-level knobs for [`generate_identities`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortParams {
    pub count: usize,
    pub texture_mode: TextureMode,
    pub accessories: bool,
    pub hard_fraction: f64,
    pub tone: Tone,
}

fn wrap_hue(h: f64) -> f64 {
    let w = (h + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360.
    if w >= 180.0 {
        -180.0
    } else {
        w
    }
}

fn random_accessories(rng: &mut StreamRng) -> BTreeSet<AccessoryKind> {
    let mut picked: Vec<AccessoryKind> = AccessoryKind::ALL
        .iter()
        .copied()
        .filter(|_| rng.random_bool(ACCESSORY_PROBABILITY))
        .collect();
    if picked.len() > MAX_ACCESSORIES {
        picked.shuffle(rng);
        picked.truncate(MAX_ACCESSORIES);
    }
    picked.into_iter().collect()
}

fn random_identity(
    id: u32,
    params: &CohortParams,
    corpora: &Corpora,
    rng: &mut StreamRng,
) -> Result<IdentitySpec> {
    let height = rng.random_range(HEIGHT_RANGE.0..=HEIGHT_RANGE.1);
    let build = rng.random_range(0.0..=1.0);
    let skin_tone = rng.random_range(0..SKIN_TONES as u8);
    let clothing_kind = ClothingKind::ALL[rng.random_range(0..ClothingKind::ALL.len())];
    let upper_texture = sample_texture(corpora, params.texture_mode, params.tone, rng)?;
    let lower_texture = sample_texture(corpora, params.texture_mode, params.tone, rng)?;
    let accessories = if params.accessories {
        random_accessories(rng)
    } else {
        BTreeSet::new()
    };
    // Large hue rotations on real photos look synthetic; keep them moderate.
    let hue_shift = match params.texture_mode {
        TextureMode::Generated => 0.0,
        _ => wrap_hue(rng.random_range(-30.0..30.0)),
    };
    Ok(IdentitySpec {
        id,
        group_id: None,
        height,
        build,
        skin_tone,
        upper_texture,
        lower_texture,
        clothing_kind,
        accessories,
        hue_shift,
        style_seed: rng.random(),
    })
}

/// Generates `params.count` identities with ids `1..=count`.
///
/// The first `5 * floor(hard_fraction * count / 5)` ids form hard groups of
/// five; the rest are independent draws. Each identity and each group draws
/// from its own keyed stream, so the result does not depend on scheduling.
pub fn generate_identities(
    params: &CohortParams,
    seed: u64,
    corpora: &Corpora,
    store: &ImageStore,
) -> Result<Vec<IdentitySpec>> {
    if !(0.0..=1.0).contains(&params.hard_fraction) {
        return Err(Error::Validation(format!(
            "hard_fraction {} outside [0, 1]",
            params.hard_fraction
        )));
    }
    match params.texture_mode {
        TextureMode::Real if corpora.clothing.is_empty() => {
            return Err(Error::Config(
                "real texture mode requires a non-empty clothing corpus".into(),
            ))
        }
        TextureMode::Random if corpora.universal.is_empty() => {
            return Err(Error::Config(
                "random texture mode requires a non-empty image corpus".into(),
            ))
        }
        _ => {}
    }
    let groups = (params.hard_fraction * params.count as f64 / DEFAULT_GROUP_SIZE as f64).floor() as usize;
    let grouped = groups * DEFAULT_GROUP_SIZE;

    let mut out: Vec<IdentitySpec> = (0..groups)
        .into_par_iter()
        .map(|g| {
            let first_id = (g * DEFAULT_GROUP_SIZE + 1) as u32;
            let mut rng = rng::stream(seed, Stream::Cohort, &[g as u64]);
            let mut base = random_identity(first_id, params, corpora, &mut rng)?;
            base.group_id = Some(g as u32 + 1);
            let group_seed = rng::derive_key(seed, Stream::HardGroup, &[g as u64]);
            make_hard_group_with(
                &base,
                DEFAULT_GROUP_SIZE,
                group_seed,
                params.accessories,
                corpora,
                store,
            )
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let singles = (grouped..params.count)
        .into_par_iter()
        .map(|i| {
            let id = (i + 1) as u32;
            let mut rng = rng::stream(seed, Stream::Identity, &[id as u64]);
            random_identity(id, params, corpora, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    out.extend(singles);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Accessories,
    Hue,
    Upper,
    Lower,
}

/// Builds `group_size` near-identical identities around `base`.
///
/// Members keep the base body and garment and each differ from the base in one
/// or two of {accessories, hue shift, upper texture, lower texture}. All members
/// vary within the same two slots, so any two members differ in at most two.
/// Member `k` gets id `base.id + k`; the group label is `base.group_id`, or
/// `base.id` when the base has none.
pub fn make_hard_group(
    base: &IdentitySpec,
    group_size: usize,
    seed: u64,
    corpora: &Corpora,
    store: &ImageStore,
) -> Result<Vec<IdentitySpec>> {
    make_hard_group_with(base, group_size, seed, true, corpora, store)
}

fn make_hard_group_with(
    base: &IdentitySpec,
    group_size: usize,
    seed: u64,
    allow_accessories: bool,
    corpora: &Corpora,
    store: &ImageStore,
) -> Result<Vec<IdentitySpec>> {
    if group_size < 2 {
        return Err(Error::Validation(format!(
            "hard group size {group_size} must be at least 2"
        )));
    }
    let mut rng = rng::stream(seed, Stream::HardGroup, &[base.id as u64]);
    let mut slots = vec![Slot::Hue, Slot::Upper, Slot::Lower];
    if allow_accessories {
        slots.push(Slot::Accessories);
    }
    slots.shuffle(&mut rng);
    let varying = [slots[0], slots[1]];

    // Per-slot option lists, base value first, all entries distinct.
    let per_slot = ((group_size + 1) as f64).sqrt().ceil().max(3.0) as usize;
    let mut options: Vec<Vec<IdentitySpec>> = Vec::new();
    for slot in varying {
        options.push(slot_options(base, slot, per_slot, corpora, store, &mut rng)?);
    }

    let mut combos: Vec<(usize, usize)> = (0..options[0].len())
        .flat_map(|a| (0..options[1].len()).map(move |b| (a, b)))
        .filter(|&c| c != (0, 0))
        .collect();
    if combos.len() < group_size {
        return Err(Error::Config(format!(
            "cannot derive {group_size} distinct members from the available variations"
        )));
    }
    combos.shuffle(&mut rng);

    let group_id = base.group_id.unwrap_or(base.id);
    Ok(combos[..group_size]
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let mut m = base.clone();
            apply_slot(&mut m, varying[0], &options[0][a]);
            apply_slot(&mut m, varying[1], &options[1][b]);
            m.id = base.id + k as u32;
            m.group_id = Some(group_id);
            m
        })
        .collect())
}

fn apply_slot(target: &mut IdentitySpec, slot: Slot, from: &IdentitySpec) {
    match slot {
        Slot::Accessories => target.accessories = from.accessories.clone(),
        Slot::Hue => target.hue_shift = from.hue_shift,
        Slot::Upper => target.upper_texture = from.upper_texture.clone(),
        Slot::Lower => target.lower_texture = from.lower_texture.clone(),
    }
}

fn slot_options(
    base: &IdentitySpec,
    slot: Slot,
    n: usize,
    corpora: &Corpora,
    store: &ImageStore,
    rng: &mut StreamRng,
) -> Result<Vec<IdentitySpec>> {
    let mut out = vec![base.clone()];
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 64 * n {
            break;
        }
        let mut v = base.clone();
        match slot {
            Slot::Hue => {
                let mag = rng.random_range(3.0..=GROUP_HUE_JITTER);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                v.hue_shift = wrap_hue(base.hue_shift + sign * mag);
            }
            Slot::Accessories => {
                let kind = AccessoryKind::ALL[rng.random_range(0..AccessoryKind::ALL.len())];
                if !v.accessories.remove(&kind) {
                    if v.accessories.len() >= MAX_ACCESSORIES {
                        continue;
                    }
                    v.accessories.insert(kind);
                }
            }
            Slot::Upper => {
                v.upper_texture = neighbor_texture(&base.upper_texture, corpora, store, rng)?;
            }
            Slot::Lower => {
                v.lower_texture = neighbor_texture(&base.lower_texture, corpora, store, rng)?;
            }
        }
        let fresh = out.iter().all(|o| match slot {
            Slot::Hue => o.hue_shift != v.hue_shift,
            Slot::Accessories => o.accessories != v.accessories,
            Slot::Upper => o.upper_texture != v.upper_texture,
            Slot::Lower => o.lower_texture != v.lower_texture,
        });
        if fresh {
            out.push(v);
        }
    }
    Ok(out)
}

/// Number of appearance fields (everything except `id` and `group_id`) in which
/// two specs differ.
pub fn appearance_diff(a: &IdentitySpec, b: &IdentitySpec) -> usize {
    [
        a.height != b.height,
        a.build != b.build,
        a.skin_tone != b.skin_tone,
        a.upper_texture != b.upper_texture,
        a.lower_texture != b.lower_texture,
        a.clothing_kind != b.clothing_kind,
        a.accessories != b.accessories,
        a.hue_shift != b.hue_shift,
        a.style_seed != b.style_seed,
    ]
    .iter()
    .filter(|&&d| d)
    .count()
}
