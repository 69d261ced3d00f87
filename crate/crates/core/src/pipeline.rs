//! End-to-end synthesis: cohort, world, capture, annotation, selection, emission.
//!
//! Capture runs in two passes so memory stays bounded. The first pass renders
//! label buffers only and keeps candidate metadata; after per-identity
//! selection, the second pass re-simulates each slot, renders the frames that
//! were picked and writes the crops.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::{self, apply_filter, enlarge_bbox, enlarge_rng, Bbox, FilterDecision, FilterPolicy};
use crate::config::SynthesisConfig;
use crate::dataset::{
    self, DatasetManifest, DatasetStats, DatasetWriter, ManifestHeader, PlannedSample, SampleKey,
};
use crate::error::{Error, Result};
use crate::human::{
    generate_identities, CohortParams, Corpora, CorpusKind, IdentitySpec, ImageStore, TextureCorpus,
};
use crate::render::{Cast, Frame, PreparedState, Stage};
use crate::world::presets::{camera_preset, scene_preset};
use crate::world::{
    assign_paths, build_world, Assignment, CameraSpec, IlluminationSchedule, ScheduleParams, Walker, World,
    WorldState,
};

/// A kept observation, before its pixels exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub identity_id: u32,
    pub camera_id: u32,
    pub scene_id: u32,
    pub sim_time: f64,
    pub slot: usize,
    pub step: usize,
    pub tight: Bbox,
    pub bbox: Bbox,
}

impl SampleKey for Candidate {
    fn identity_id(&self) -> u32 {
        self.identity_id
    }
    fn camera_id(&self) -> u32 {
        self.camera_id
    }
    fn sim_time(&self) -> f64 {
        self.sim_time
    }
}

/// Outcome of the first pass over one slot.
#[derive(Debug, Clone, Default)]
pub struct SlotScan {
    pub candidates: Vec<Candidate>,
    pub steps: usize,
    pub frames: usize,
}

/// Everything derived from a configuration before any frame is rendered.
pub struct Plan {
    pub config: SynthesisConfig,
    pub world: World,
    pub identities: Vec<IdentitySpec>,
    pub assignment: Assignment,
    pub cast: Cast,
    pub schedule: IlluminationSchedule,
    pub store: ImageStore,
}

impl Plan {
    pub fn new(config: &SynthesisConfig) -> Result<Self> {
        config.validate().map_err(|e| e.in_stage("config"))?;
        let store = ImageStore::new();
        let clothing = match &config.identities.corpus {
            Some(dir) => TextureCorpus::open(Path::new(dir), CorpusKind::Clothing, &store)
                .map_err(|e| e.in_stage("human_factory"))?,
            None => TextureCorpus::builtin(CorpusKind::Clothing),
        };
        let corpora = Corpora {
            clothing,
            universal: TextureCorpus::builtin(CorpusKind::Universal),
        };
        let params = CohortParams {
            count: config.identities.count,
            texture_mode: config.identities.texture_mode,
            accessories: config.identities.accessories,
            hard_fraction: config.identities.hard_fraction,
            tone: config.identities.palette.tone(),
        };
        let identities = generate_identities(&params, config.seed, &corpora, &store)
            .map_err(|e| e.in_stage("human_factory"))?;

        let (world, assignment) =
            Self::build_world(config, &identities).map_err(|e| e.in_stage("scene_world"))?;
        let cast = Cast::new(&identities, &store).map_err(|e| e.in_stage("renderer"))?;
        let window =
            assignment.slots.len().max(1) as f64 * config.capture.max_steps as f64 * config.capture.dt;
        let schedule = IlluminationSchedule::preset(config.illumination.preset, window);
        Ok(Self {
            config: config.clone(),
            world,
            identities,
            assignment,
            cast,
            schedule,
            store,
        })
    }

    fn build_world(config: &SynthesisConfig, identities: &[IdentitySpec]) -> Result<(World, Assignment)> {
        let res = config.world.resolution;
        let mut cameras = camera_preset(&config.world.cameras, res)?;
        for extra in &config.world.extra_cameras {
            for c in camera_preset(extra, res)? {
                if !cameras.iter().any(|k| k.camera_id == c.camera_id) {
                    cameras.push(c);
                }
            }
        }
        cameras.sort_by_key(|c| c.camera_id);
        let world = build_world(scene_preset(&config.world.scenes)?, cameras, config.seed)?;
        let schedule_params = ScheduleParams {
            crowd: config.world.crowd,
            visits: config.world.visits,
        };
        let assignment = assign_paths(identities, &world, &schedule_params, config.seed)?;
        Ok((world, assignment))
    }

    pub fn stage(&self) -> Stage<'_> {
        Stage::new(&self.world, &self.cast)
    }

    /// Visits each identity actually makes.
    pub fn visits_per_identity(&self) -> usize {
        let scenes = self.world.captured_scenes().len().max(1);
        self.config.world.visits.min(scenes)
    }

    /// Candidates each member should collect in a slot before it may stop early.
    /// Every visit aims for the whole budget, so an identity still fills it
    /// when another of its visits stays out of view.
    pub fn slot_target(&self) -> usize {
        self.config.emission.per_id_budget
    }

    /// State of a slot at its first step. Slots occupy disjoint time windows.
    pub fn initial_state(&self, slot_index: usize) -> Result<WorldState> {
        let slot = self.assignment.slots.get(slot_index).ok_or(Error::Lookup {
            kind: "slot",
            id: slot_index as u64,
        })?;
        let walkers = self
            .assignment
            .slot_visits(slot)
            .into_iter()
            .map(Walker::from_visit)
            .collect();
        let t0 = slot_index as f64 * self.config.capture.max_steps as f64 * self.config.capture.dt;
        Ok(WorldState::new(slot.scene_id, t0, walkers))
    }

    fn cameras_of(&self, scene_id: u32) -> Vec<&CameraSpec> {
        self.world.cameras_in(scene_id).collect()
    }

    /// Steps through a slot, calling `f` with every prepared state until it returns false
    /// or `max_steps` is reached. Returns the number of steps taken.
    pub fn walk_slot(
        &self,
        stage: &Stage<'_>,
        slot_index: usize,
        mut f: impl FnMut(usize, &PreparedState) -> Result<bool>,
    ) -> Result<usize> {
        let mut state = self.initial_state(slot_index)?;
        for step in 0..self.config.capture.max_steps {
            if step > 0 {
                state = state.step(self.config.capture.dt);
            }
            if !f(step, &stage.prepare(&state)?)? {
                return Ok(step + 1);
            }
        }
        Ok(self.config.capture.max_steps)
    }

    /// Full RGB frames of a slot's first `steps` steps, one per camera in its scene.
    pub fn render_slot_frames(
        &self,
        stage: &Stage<'_>,
        slot_index: usize,
        steps: usize,
        mut f: impl FnMut(&Frame),
    ) -> Result<()> {
        let scene_id = self.assignment.slots[slot_index].scene_id;
        let cams = self.cameras_of(scene_id);
        self.walk_slot(stage, slot_index, |step, prepared| {
            let light = self.schedule.illumination_at(prepared.time)?;
            for cam in &cams {
                f(&stage.render_prepared(prepared, cam, light)?);
            }
            Ok(step + 1 < steps)
        })?;
        Ok(())
    }

    /// Annotates one label frame into kept candidates.
    pub fn annotate_frame(
        &self,
        stage: &Stage<'_>,
        prepared: &PreparedState,
        camera: &CameraSpec,
        frame: &Frame,
        slot: usize,
        step: usize,
    ) -> Result<Vec<Candidate>> {
        let policy: FilterPolicy = self.config.annotation.policy();
        let mut out = Vec::new();
        for mut obs in annotate::extract_instances(frame) {
            obs.visible_ratio = Some(1.0);
            if apply_filter(&obs, &policy) != FilterDecision::Keep {
                continue;
            }
            let iso = stage.isolated_pixel_count(prepared, camera, obs.identity_id)?;
            let ratio = annotate::visible_ratio(obs.pixel_count, iso, obs.identity_id)?;
            obs.visible_ratio = Some(ratio);
            if apply_filter(&obs, &policy) != FilterDecision::Keep {
                continue;
            }
            let mut rng = enlarge_rng(
                self.config.seed,
                camera.camera_id,
                frame.sim_time,
                obs.identity_id,
            );
            let bbox = enlarge_bbox(
                obs.bbox,
                self.config.annotation.enlarge_factor,
                self.config.annotation.enlarge_mode,
                &mut rng,
                (frame.width(), frame.height()),
            );
            out.push(Candidate {
                identity_id: obs.identity_id,
                camera_id: camera.camera_id,
                scene_id: frame.scene_id,
                sim_time: frame.sim_time,
                slot,
                step,
                tight: obs.bbox,
                bbox,
            });
        }
        Ok(out)
    }

    /// First pass over one slot: label renders and annotation, stopping once
    /// every member holds [`Plan::slot_target`] candidates and `min_steps` have run.
    pub fn scan_slot(&self, stage: &Stage<'_>, slot_index: usize) -> Result<SlotScan> {
        let slot = &self.assignment.slots[slot_index];
        let cams = self.cameras_of(slot.scene_id);
        let target = self.slot_target();
        let mut counts: BTreeMap<u32, usize> = slot.members.iter().map(|&m| (m, 0)).collect();
        let mut scan = SlotScan::default();
        scan.steps = self.walk_slot(stage, slot_index, |step, prepared| {
            for cam in &cams {
                let frame = stage.render_labels(prepared, cam)?;
                scan.frames += 1;
                for c in self.annotate_frame(stage, prepared, cam, &frame, slot_index, step)? {
                    *counts.entry(c.identity_id).or_default() += 1;
                    scan.candidates.push(c);
                }
            }
            let done = counts.values().all(|&n| n >= target);
            Ok(!(done && step + 1 >= self.config.capture.min_steps))
        })?;
        Ok(scan)
    }

    /// Second pass over one slot: renders the chosen frames and writes the crops.
    fn emit_slot(
        &self,
        stage: &Stage<'_>,
        slot_index: usize,
        picks: &[(usize, Candidate)],
        records: &[dataset::ManifestRecord],
        writer: &DatasetWriter,
    ) -> Result<()> {
        let last = picks.iter().map(|(_, c)| c.step).max().unwrap_or(0);
        let mut by_step: BTreeMap<usize, Vec<&(usize, Candidate)>> = BTreeMap::new();
        for p in picks {
            by_step.entry(p.1.step).or_default().push(p);
        }
        self.walk_slot(stage, slot_index, |step, prepared| {
            if let Some(list) = by_step.get(&step) {
                let light = self.schedule.illumination_at(prepared.time)?;
                let cams: BTreeSet<u32> = list.iter().map(|(_, c)| c.camera_id).collect();
                for cam_id in cams {
                    let cam = self.world.camera(cam_id)?;
                    let frame = stage.render_prepared(prepared, cam, light)?;
                    if frame.sim_time != list[0].1.sim_time {
                        return Err(Error::Invariant(format!(
                            "slot {slot_index} step {step} re-simulated to t={} instead of t={}",
                            frame.sim_time, list[0].1.sim_time
                        )));
                    }
                    for (ri, c) in list.iter().filter(|(_, c)| c.camera_id == cam_id) {
                        let crop = annotate::crop_image(&frame.rgb, c.bbox);
                        writer.write_image(&records[*ri], &crop)?;
                    }
                }
            }
            Ok(step < last)
        })?;
        Ok(())
    }
}

/// Summary of a finished synthesis run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub stats: DatasetStats,
    pub slots: usize,
    pub frames_scanned: usize,
    pub candidates: usize,
    pub dropped_identities: Vec<u32>,
}

/// Runs `f` on a pool of `threads` workers (`None` or 0: one per core).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Synthesizes a dataset into `config.emission.out_dir`.
pub fn synthesize(config: &SynthesisConfig) -> Result<(DatasetManifest, RunSummary)> {
    let plan = Plan::new(config)?;
    let stage = plan.stage();
    let n_slots = plan.assignment.slots.len();
    log::info!(
        "{} identities, {} cameras, {} slots",
        plan.identities.len(),
        plan.world.cameras.len(),
        n_slots
    );

    let scans: Vec<SlotScan> = (0..n_slots)
        .into_par_iter()
        .map(|k| plan.scan_slot(&stage, k))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("renderer/annotator"))?;
    let frames_scanned = scans.iter().map(|s| s.frames).sum();
    let all: Vec<Candidate> = scans.into_iter().flat_map(|s| s.candidates).collect();
    let n_candidates = all.len();

    let with_candidates: BTreeSet<u32> = all.iter().map(|c| c.identity_id).collect();
    let dropped: Vec<u32> = plan
        .identities
        .iter()
        .map(|s| s.id)
        .filter(|id| !with_candidates.contains(id))
        .collect();
    for id in &dropped {
        log::warn!("identity {id} has no surviving samples and is dropped");
    }

    let budget = config.emission.per_id_budget;
    let selected =
        dataset::select_per_identity(all, budget, config.seed).map_err(|e| e.in_stage("dataset_io"))?;
    let planned: Vec<PlannedSample> = selected
        .iter()
        .map(|c| PlannedSample {
            identity_id: c.identity_id,
            camera_id: c.camera_id,
            scene_id: c.scene_id,
            sim_time: c.sim_time,
            bbox: c.bbox,
        })
        .collect();
    let records = dataset::plan_records(&planned, config.emission.format);
    let index: BTreeMap<(u32, u32, u64), usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| ((r.identity_id, r.camera_id, r.sim_time.to_bits()), i))
        .collect();
    if index.len() != records.len() {
        return Err(Error::Invariant(
            "two samples share identity, camera and time".into(),
        ));
    }
    let mut per_slot: BTreeMap<usize, Vec<(usize, Candidate)>> = BTreeMap::new();
    for c in selected {
        let ri = index[&(c.identity_id, c.camera_id, c.sim_time.to_bits())];
        per_slot.entry(c.slot).or_default().push((ri, c));
    }

    let header = ManifestHeader::new(config.seed, config.to_json());
    let emit = || -> Result<(DatasetManifest, DatasetStats)> {
        let writer = DatasetWriter::create(
            &config.out_dir(),
            header,
            config.emission.format,
            config.emission.jpeg_quality,
        )?;
        let per_slot: Vec<(usize, Vec<(usize, Candidate)>)> = per_slot.into_iter().collect();
        per_slot
            .par_iter()
            .try_for_each(|(k, picks)| plan.emit_slot(&stage, *k, picks, &records, &writer))?;
        writer.finish(records)
    };
    let (manifest, stats) = emit().map_err(|e| e.in_stage("dataset_io"))?;

    if stats.max_per_identity() > budget {
        return Err(Error::Invariant(format!(
            "identity holds {} images, budget is {budget}",
            stats.max_per_identity()
        )));
    }
    let summary = RunSummary {
        stats,
        slots: n_slots,
        frames_scanned,
        candidates: n_candidates,
        dropped_identities: dropped,
    };
    Ok((manifest, summary))
}
