//! Knob-grid studies: synthesize one dataset per cell and score held-out-camera retrieval.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SynthesisConfig;
use crate::dataset::{read_manifest, DatasetManifest};
use crate::error::{Error, Result};
use crate::eval::{
    camera_normalize, evaluate, extract_features, fit_dimension_weights, split_query_gallery, Distance,
    EvalResult, Labeled,
};
use crate::human::TextureMode;
use crate::pipeline::synthesize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub name: String,
    pub ids: usize,
    /// Camera preset name.
    pub cameras: String,
    pub texture_mode: TextureMode,
    pub accessories: bool,
    pub hard_samples: bool,
    /// Scene preset override; the base config's scenes otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenes: Option<String>,
}

impl AblationCell {
    pub fn apply(&self, base: &SynthesisConfig, hard_fraction: f64) -> SynthesisConfig {
        let mut cfg = base.clone();
        cfg.identities.count = self.ids;
        cfg.identities.texture_mode = self.texture_mode;
        cfg.identities.accessories = self.accessories;
        cfg.identities.hard_fraction = if self.hard_samples { hard_fraction } else { 0.0 };
        cfg.world.cameras = self.cameras.clone();
        if let Some(s) = &self.scenes {
            cfg.world.scenes = s.clone();
        }
        cfg
    }
}

/// The knob combinations of the paper's direct-transfer ablation, with identity
/// counts multiplied by `id_scale` (at least 5 each).
pub fn tab2_grid(id_scale: f64) -> Vec<AblationCell> {
    let ids = |n: f64| ((n * id_scale).round() as usize).max(5);
    let cell = |ids: usize, cams: u32, mode: TextureMode, acc: bool, hard: bool| AblationCell {
        name: format!(
            "ids{ids}_cams{cams}_{}{}{}",
            format!("{mode:?}").to_lowercase(),
            if acc { "_acc" } else { "" },
            if hard { "_hard" } else { "" }
        ),
        ids,
        cameras: cams.to_string(),
        texture_mode: mode,
        accessories: acc,
        hard_samples: hard,
        scenes: None,
    };
    let base = ids(800.0);
    let mut grid = vec![
        cell(base, 6, TextureMode::Random, false, false),
        cell(base, 6, TextureMode::Generated, false, false),
        cell(base, 6, TextureMode::Real, false, false),
        cell(base, 6, TextureMode::Real, true, false),
        cell(base, 6, TextureMode::Real, true, true),
    ];
    for cams in [16, 22, 28, 34] {
        grid.push(cell(base, cams, TextureMode::Real, true, true));
    }
    for n in [1500.0, 2000.0, 3000.0] {
        grid.push(cell(ids(n), 34, TextureMode::Real, true, true));
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: AblationCell,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub images: usize,
    pub identities: usize,
    pub cameras: usize,
    pub rank1: f64,
    pub rank5: f64,
    pub map: f64,
    pub n_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<CellReport>,
}

impl AblationReport {
    /// Aligned plain-text table with one row per cell.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<34} {:>5} {:>5} {:<9} {:>3} {:>4} {:>7} {:>6} {:>6} {:>6}  status",
            "cell", "#IDs", "#Cams", "texture", "acc", "hard", "#images", "r1", "r5", "mAP"
        );
        for r in &self.rows {
            let c = &r.cell;
            let mark = |b: bool| if b { "x" } else { "-" };
            let status = match (&r.status, &r.reason) {
                (CellStatus::Ok, _) => "ok".to_string(),
                (CellStatus::Skipped, Some(why)) => format!("skipped: {why}"),
                (CellStatus::Skipped, None) => "skipped".to_string(),
            };
            let _ = writeln!(
                s,
                "{:<34} {:>5} {:>5} {:<9} {:>3} {:>4} {:>7} {:>6.3} {:>6.3} {:>6.3}  {}",
                c.name,
                c.ids,
                c.cameras,
                format!("{:?}", c.texture_mode).to_lowercase(),
                mark(c.accessories),
                mark(c.hard_samples),
                r.images,
                r.rank1,
                r.rank5,
                r.map,
                status
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).expect("report serializes") + "\n";
        std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
        let txt = dir.join("report.txt");
        std::fs::write(&txt, self.table()).map_err(|e| Error::io(&txt, e))
    }
}

/// Features of every image in a dataset, in manifest order.
pub fn dataset_features(root: &Path, manifest: &DatasetManifest) -> Result<Vec<Labeled>> {
    manifest
        .records
        .par_iter()
        .map(|r| {
            let path = root.join(&r.path);
            let img = image::open(&path).map_err(|e| Error::image(&path, e))?.to_rgb8();
            Ok(Labeled {
                feature: extract_features(&img)?,
                identity_id: r.identity_id,
                camera_id: r.camera_id,
            })
        })
        .collect()
}

/// Standardizes per camera, then scales each dimension by `sqrt(weight)`.
pub fn normalize_items(items: &mut [Labeled], weights: Option<&[f64]>) {
    let feats: Vec<Vec<f64>> = items.iter().map(|i| i.feature.clone()).collect();
    let cams: Vec<u32> = items.iter().map(|i| i.camera_id).collect();
    for (it, mut f) in items.iter_mut().zip(camera_normalize(&feats, &cams)) {
        if let Some(w) = weights {
            f.iter_mut().zip(w).for_each(|(x, w)| *x *= w.sqrt());
        }
        it.feature = f;
    }
}

/// Held-out-camera evaluation of one dataset.
///
/// Cameras alternate between a training half and a held-out half, and so do
/// identities (by rank). Dimension weights are fitted on training identities
/// in training cameras; retrieval runs among held-out identities in held-out cameras.
pub fn held_out_eval(items: &[Labeled], distance: Distance) -> Result<EvalResult> {
    let mut cams: Vec<u32> = items.iter().map(|i| i.camera_id).collect();
    cams.sort_unstable();
    cams.dedup();
    let mut ids: Vec<u32> = items.iter().map(|i| i.identity_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let train_cam = |c: u32| cams.binary_search(&c).map(|i| i % 2 == 0).unwrap_or(false);
    let train_id = |d: u32| ids.binary_search(&d).map(|i| i % 2 == 0).unwrap_or(false);

    let mut train: Vec<Labeled> = items
        .iter()
        .filter(|i| train_cam(i.camera_id) && train_id(i.identity_id))
        .cloned()
        .collect();
    let mut test: Vec<Labeled> = items
        .iter()
        .filter(|i| !train_cam(i.camera_id) && !train_id(i.identity_id))
        .cloned()
        .collect();
    normalize_items(&mut train, None);
    let weights = (!train.is_empty()).then(|| {
        let f: Vec<Vec<f64>> = train.iter().map(|i| i.feature.clone()).collect();
        let l: Vec<u32> = train.iter().map(|i| i.identity_id).collect();
        fit_dimension_weights(&f, &l)
    });
    normalize_items(&mut test, weights.as_deref());
    let held: Vec<u32> = cams.iter().copied().filter(|&c| !train_cam(c)).collect();
    let (q, g) = split_query_gallery(&test, &held, &held);
    evaluate(&q, &g, distance)
}

/// Synthesizes and scores every cell. Cells whose configuration is infeasible
/// are reported as skipped.
pub fn ablate(
    base: &SynthesisConfig,
    grid: &[AblationCell],
    out_root: &Path,
    distance: Distance,
) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(grid.len());
    for cell in grid {
        let mut cfg = cell.apply(base, base.identities.hard_fraction.max(0.5));
        let dir = out_root.join(&cell.name);
        cfg.emission.out_dir = dir.to_string_lossy().into_owned();
        let skipped = |why: String| CellReport {
            cell: cell.clone(),
            status: CellStatus::Skipped,
            reason: Some(why),
            images: 0,
            identities: 0,
            cameras: 0,
            rank1: 0.0,
            rank5: 0.0,
            map: 0.0,
            n_queries: 0,
        };
        if let Err(e) = cfg.validate() {
            rows.push(skipped(e.to_string()));
            continue;
        }
        log::info!("ablation cell {}", cell.name);
        let summary = match synthesize(&cfg) {
            Ok((_, s)) => s,
            Err(e) if matches!(e.root(), Error::Config(_) | Error::Validation(_)) => {
                rows.push(skipped(e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let manifest = read_manifest(&dir)?;
        let items = dataset_features(&dir, &manifest)?;
        let r = held_out_eval(&items, distance)?;
        rows.push(CellReport {
            cell: cell.clone(),
            status: CellStatus::Ok,
            reason: None,
            images: summary.stats.images,
            identities: summary.stats.identities,
            cameras: summary.stats.cameras,
            rank1: r.rank(1),
            rank5: r.rank(5),
            map: r.map,
            n_queries: r.n_queries,
        });
    }
    let report = AblationReport { rows };
    report.write(out_root)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_mirrors_knob_rows() {
        let g = tab2_grid(1.0);
        assert_eq!(g.len(), 12);
        let knobs: Vec<(TextureMode, bool, bool)> = g[..5]
            .iter()
            .map(|c| (c.texture_mode, c.accessories, c.hard_samples))
            .collect();
        assert_eq!(
            knobs,
            vec![
                (TextureMode::Random, false, false),
                (TextureMode::Generated, false, false),
                (TextureMode::Real, false, false),
                (TextureMode::Real, true, false),
                (TextureMode::Real, true, true),
            ]
        );
        let cams: Vec<&str> = g.iter().map(|c| c.cameras.as_str()).collect();
        assert_eq!(
            cams,
            ["6", "6", "6", "6", "6", "16", "22", "28", "34", "34", "34", "34"]
        );
        let ids: Vec<usize> = g.iter().map(|c| c.ids).collect();
        assert_eq!(
            ids,
            [800, 800, 800, 800, 800, 800, 800, 800, 800, 1500, 2000, 3000]
        );
        let names: std::collections::BTreeSet<&str> = g.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names.len(), 12);
    }

    #[test]
    fn scaled_grid_keeps_minimum() {
        assert!(tab2_grid(0.001).iter().all(|c| c.ids == 5));
    }
}
