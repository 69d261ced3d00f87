//! Per-identity budgeting, on-disk layout, manifest and statistics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotate::Bbox;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub const GENERATOR_VERSION: &str = concat!("synthperson ", env!("CARGO_PKG_VERSION"));
pub const INCOMPLETE_MARKER: &str = ".incomplete";
pub const IMAGES_DIR: &str = "images";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const HEADER_FILE: &str = "header.json";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, Clone)]
pub struct CroppedSample {
    pub rgb: RgbImage,
    pub identity_id: u32,
    pub camera_id: u32,
    pub scene_id: u32,
    pub sim_time: f64,
    pub bbox: Bbox,
    /// Assigned at emission.
    pub file_name: Option<String>,
}

/// What [`select_per_identity`] needs to know about a candidate.
pub trait SampleKey {
    fn identity_id(&self) -> u32;
    fn camera_id(&self) -> u32;
    fn sim_time(&self) -> f64;
}

impl SampleKey for CroppedSample {
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

/// Keeps at most `budget` samples per identity.
///
/// Camera quotas are dealt round-robin, starting from a seed-dependent camera;
/// within a camera the picks are spread uniformly over time. The result is
/// ordered by (identity, camera, time).
pub fn select_per_identity<T: SampleKey>(samples: Vec<T>, budget: usize, seed: u64) -> Result<Vec<T>> {
    if budget == 0 {
        return Err(Error::Config("per-identity budget must be at least 1".into()));
    }
    let mut by_id: BTreeMap<u32, BTreeMap<u32, Vec<T>>> = BTreeMap::new();
    for s in samples {
        by_id
            .entry(s.identity_id())
            .or_default()
            .entry(s.camera_id())
            .or_default()
            .push(s);
    }
    let mut out = Vec::new();
    for (id, cams) in by_id {
        let mut cams: Vec<Vec<T>> = cams.into_values().collect();
        for c in &mut cams {
            c.sort_by(|a, b| a.sim_time().total_cmp(&b.sim_time()));
        }
        let mut quota = vec![0usize; cams.len()];
        let start = rng::stream(seed, Stream::Select, &[id as u64]).random_range(0..cams.len());
        let mut left = budget;
        while left > 0 {
            let mut progressed = false;
            for k in 0..cams.len() {
                let c = (start + k) % cams.len();
                if left > 0 && quota[c] < cams[c].len() {
                    quota[c] += 1;
                    left -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        for (c, q) in cams.into_iter().zip(quota) {
            let n = c.len();
            let picks: HashSet<usize> = (0..q)
                .map(|j| ((j as f64 + 0.5) * n as f64 / q as f64) as usize)
                .collect();
            debug_assert_eq!(picks.len(), q);
            out.extend(
                c.into_iter()
                    .enumerate()
                    .filter(|(i, _)| picks.contains(i))
                    .map(|(_, s)| s),
            );
        }
    }
    Ok(out)
}

pub fn format_name(identity_id: u32, camera_id: u32, scene_id: u32, seq: u32, ext: &str) -> String {
    format!("{identity_id:04}_c{camera_id}s{scene_id}_{seq:06}.{ext}")
}

/// Inverse of [`format_name`]: `(identity, camera, scene, seq)`.
pub fn parse_name(name: &str) -> Result<(u32, u32, u32, u32)> {
    let bad = || Error::parse("file name", format!("{name:?} does not match ID_cCsS_SEQ.ext"));
    let stem = name.rsplit_once('.').map(|(s, _)| s).ok_or_else(bad)?;
    let mut parts = stem.split('_');
    let (id, cs, seq) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), Some(c), None) => (a, b, c),
        _ => return Err(bad()),
    };
    let (cam, scene) = cs
        .strip_prefix('c')
        .and_then(|r| r.split_once('s'))
        .ok_or_else(bad)?;
    let num = |s: &str| -> Result<u32> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        s.parse().map_err(|_| bad())
    };
    Ok((num(id)?, num(cam)?, num(scene)?, num(seq)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Png,
    Jpeg,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpeg => "jpg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    /// Relative to the dataset root.
    pub path: String,
    pub identity_id: u32,
    pub camera_id: u32,
    pub scene_id: u32,
    pub sim_time: f64,
    pub bbox: [u32; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub seed: u64,
    pub config_hash: String,
    pub generator_version: String,
    /// Fully resolved configuration that produced the dataset.
    pub config: serde_json::Value,
}

impl ManifestHeader {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        Self {
            seed,
            config_hash: config_hash(&config),
            generator_version: GENERATOR_VERSION.to_string(),
            config,
        }
    }
}

/// Hex SHA-256 of the canonical (sorted-key, compact) JSON text.
pub fn config_hash(config: &serde_json::Value) -> String {
    let text = serde_json::to_string(config).expect("json value serializes");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn body(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub identities: usize,
    pub cameras: usize,
    pub scenes: usize,
    pub images: usize,
    pub per_camera: BTreeMap<u32, usize>,
    pub per_identity: BTreeMap<u32, usize>,
    pub per_scene: BTreeMap<u32, usize>,
}

impl DatasetStats {
    pub fn max_per_identity(&self) -> usize {
        self.per_identity.values().copied().max().unwrap_or(0)
    }
}

pub fn compute_stats(manifest: &DatasetManifest) -> Result<DatasetStats> {
    let mut seen = HashSet::new();
    let mut st = DatasetStats::default();
    for r in &manifest.records {
        if !seen.insert(r.path.as_str()) {
            return Err(Error::Integrity(format!("duplicate path {}", r.path)));
        }
        *st.per_camera.entry(r.camera_id).or_default() += 1;
        *st.per_identity.entry(r.identity_id).or_default() += 1;
        *st.per_scene.entry(r.scene_id).or_default() += 1;
    }
    st.identities = st.per_identity.len();
    st.cameras = st.per_camera.len();
    st.scenes = st.per_scene.len();
    st.images = manifest.records.len();
    Ok(st)
}

/// Metadata of a sample whose pixels will be written later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedSample {
    pub identity_id: u32,
    pub camera_id: u32,
    pub scene_id: u32,
    pub sim_time: f64,
    pub bbox: Bbox,
}

/// Assigns file names; `seq` counts each identity's samples in (camera, time) order.
/// Records come back ordered by (identity, camera, seq).
pub fn plan_records(samples: &[PlannedSample], format: ImageFormat) -> Vec<ManifestRecord> {
    let mut order: Vec<&PlannedSample> = samples.iter().collect();
    order.sort_by(|a, b| {
        (a.identity_id, a.camera_id)
            .cmp(&(b.identity_id, b.camera_id))
            .then(a.sim_time.total_cmp(&b.sim_time))
            .then(a.bbox.to_array().cmp(&b.bbox.to_array()))
    });
    let mut seq: BTreeMap<u32, u32> = BTreeMap::new();
    order
        .into_iter()
        .map(|s| {
            let n = seq.entry(s.identity_id).or_default();
            let name = format_name(s.identity_id, s.camera_id, s.scene_id, *n, format.extension());
            *n += 1;
            ManifestRecord {
                path: format!("{IMAGES_DIR}/{name}"),
                identity_id: s.identity_id,
                camera_id: s.camera_id,
                scene_id: s.scene_id,
                sim_time: s.sim_time,
                bbox: s.bbox.to_array(),
            }
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Streaming writer for one dataset directory.
///
/// A marker file exists from [`DatasetWriter::create`] until
/// [`DatasetWriter::finish`] succeeds, so interrupted runs are detectable.
pub struct DatasetWriter {
    root: PathBuf,
    header: ManifestHeader,
    format: ImageFormat,
    jpeg_quality: u8,
}

impl DatasetWriter {
    pub fn create(
        root: &Path,
        header: ManifestHeader,
        format: ImageFormat,
        jpeg_quality: u8,
    ) -> Result<Self> {
        let images = root.join(IMAGES_DIR);
        fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
        let marker = root.join(INCOMPLETE_MARKER);
        fs::write(&marker, b"").map_err(|e| Error::io(&marker, e))?;
        for f in [MANIFEST_FILE, HEADER_FILE, STATS_FILE] {
            let p = root.join(f);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            header,
            format,
            jpeg_quality,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_image(&self, record: &ManifestRecord, rgb: &RgbImage) -> Result<()> {
        let path = self.root.join(&record.path);
        match self.format {
            ImageFormat::Png => rgb.save(&path).map_err(|e| Error::image(&path, e)),
            ImageFormat::Jpeg => {
                let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut w = BufWriter::new(file);
                image::codecs::jpeg::JpegEncoder::new_with_quality(&mut w, self.jpeg_quality)
                    .encode_image(rgb)
                    .map_err(|e| Error::image(&path, e))
            }
        }
    }

    pub fn finish(self, records: Vec<ManifestRecord>) -> Result<(DatasetManifest, DatasetStats)> {
        let manifest = DatasetManifest {
            header: self.header,
            records,
        };
        let stats = compute_stats(&manifest)?;
        let path = self.root.join(MANIFEST_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(manifest.body().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        write_json(&self.root.join(HEADER_FILE), &manifest.header)?;
        write_json(&self.root.join(STATS_FILE), &stats)?;
        let marker = self.root.join(INCOMPLETE_MARKER);
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        Ok((manifest, stats))
    }
}

/// Writes in-memory samples as a dataset. File names are assigned here.
pub fn emit_dataset(
    samples: Vec<CroppedSample>,
    out_dir: &Path,
    header: ManifestHeader,
    format: ImageFormat,
) -> Result<DatasetManifest> {
    let planned: Vec<PlannedSample> = samples
        .iter()
        .map(|s| PlannedSample {
            identity_id: s.identity_id,
            camera_id: s.camera_id,
            scene_id: s.scene_id,
            sim_time: s.sim_time,
            bbox: s.bbox,
        })
        .collect();
    let records = plan_records(&planned, format);
    let mut by_key: BTreeMap<(u32, u32, u64, [u32; 4]), Vec<CroppedSample>> = BTreeMap::new();
    for s in samples {
        by_key
            .entry((
                s.identity_id,
                s.camera_id,
                s.sim_time.to_bits(),
                s.bbox.to_array(),
            ))
            .or_default()
            .push(s);
    }
    let mut paired = Vec::with_capacity(records.len());
    for r in &records {
        let key = (r.identity_id, r.camera_id, r.sim_time.to_bits(), r.bbox);
        let mut s = by_key
            .get_mut(&key)
            .and_then(|v| v.pop())
            .expect("every record has a sample");
        s.file_name = r.path.rsplit('/').next().map(str::to_string);
        paired.push((r, s));
    }
    let writer = DatasetWriter::create(out_dir, header, format, 90)?;
    paired
        .par_iter()
        .try_for_each(|(r, s)| writer.write_image(r, &s.rgb))?;
    Ok(writer.finish(records)?.0)
}

pub fn read_manifest(root: &Path) -> Result<DatasetManifest> {
    let marker = root.join(INCOMPLETE_MARKER);
    if marker.exists() {
        return Err(Error::Integrity(format!(
            "{} holds a partial dataset from an interrupted run",
            root.display()
        )));
    }
    let mp = root.join(MANIFEST_FILE);
    let file = fs::File::open(&mp).map_err(|e| Error::io(&mp, e))?;
    let hp = root.join(HEADER_FILE);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: ManifestHeader =
        serde_json::from_str(&text).map_err(|e| Error::parse("header.json", e.to_string()))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&mp, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::parse("manifest.jsonl", format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(DatasetManifest { header, records })
}

/// Checks that every record's file exists and that names decode to the record's labels.
pub fn verify_dataset(root: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut names = BTreeSet::new();
    for r in &manifest.records {
        if !root.join(&r.path).is_file() {
            return Err(Error::Integrity(format!("missing image {}", r.path)));
        }
        let name = r.path.rsplit('/').next().unwrap_or(&r.path);
        let (id, cam, scene, _) = parse_name(name)?;
        if (id, cam, scene) != (r.identity_id, r.camera_id, r.scene_id) {
            return Err(Error::Integrity(format!("name {name} disagrees with its record")));
        }
        if !names.insert(name) {
            return Err(Error::Integrity(format!("duplicate path {}", r.path)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    struct Cand(u32, u32, f64);

    impl SampleKey for Cand {
        fn identity_id(&self) -> u32 {
            self.0
        }
        fn camera_id(&self) -> u32 {
            self.1
        }
        fn sim_time(&self) -> f64 {
            self.2
        }
    }

    fn record(path: &str, id: u32, cam: u32, scene: u32) -> ManifestRecord {
        ManifestRecord {
            path: path.into(),
            identity_id: id,
            camera_id: cam,
            scene_id: scene,
            sim_time: 0.0,
            bbox: [0, 0, 1, 1],
        }
    }

    fn header() -> ManifestHeader {
        ManifestHeader::new(1, serde_json::json!({"a": 1}))
    }

    #[test]
    fn under_budget_keeps_all() {
        let c: Vec<Cand> = (0..10).map(|i| Cand(1, 1 + i % 3, i as f64)).collect();
        assert_eq!(select_per_identity(c, 40, 0).unwrap().len(), 10);
    }

    #[test]
    fn stratified_over_cameras() {
        let c: Vec<Cand> = (0..80).map(|i| Cand(5, 1 + i % 4, i as f64)).collect();
        let s = select_per_identity(c, 40, 3).unwrap();
        assert_eq!(s.len(), 40);
        for cam in 1..=4 {
            assert_eq!(s.iter().filter(|x| x.1 == cam).count(), 10);
        }
    }

    #[test]
    fn uneven_cameras_fill_budget() {
        let mut c: Vec<Cand> = (0..3).map(|i| Cand(1, 1, i as f64)).collect();
        c.extend((0..50).map(|i| Cand(1, 2, i as f64)));
        let s = select_per_identity(c, 40, 0).unwrap();
        assert_eq!(s.iter().filter(|x| x.1 == 1).count(), 3);
        assert_eq!(s.len(), 40);
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(select_per_identity(Vec::<Cand>::new(), 0, 0).is_err());
    }

    #[test]
    fn naming_grammar() {
        assert_eq!(format_name(7, 3, 2, 0, "png"), "0007_c3s2_000000.png");
        assert_eq!(parse_name("0007_c3s2_000000.png").unwrap(), (7, 3, 2, 0));
        assert_eq!(parse_name("12345_c40s4_000123.jpg").unwrap(), (12345, 40, 4, 123));
        for bad in [
            "0007_c3_000000.png",
            "x_c3s2_1.png",
            "0007c3s2.png",
            "0007_c3s2_000000",
        ] {
            assert!(parse_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn stats_hand_tally() {
        let m = DatasetManifest {
            header: header(),
            records: vec![
                record("a", 1, 1, 1),
                record("b", 1, 2, 1),
                record("c", 2, 2, 1),
                record("d", 3, 7, 2),
                record("e", 3, 7, 2),
            ],
        };
        let s = compute_stats(&m).unwrap();
        assert_eq!((s.identities, s.cameras, s.scenes, s.images), (3, 3, 2, 5));
        assert_eq!(s.per_camera[&7], 2);
        assert_eq!(s.per_identity[&1], 2);
        assert_eq!(s.per_scene[&1], 3);
        let empty = DatasetManifest {
            header: header(),
            records: vec![],
        };
        assert_eq!(compute_stats(&empty).unwrap(), DatasetStats::default());
        let dup = DatasetManifest {
            header: header(),
            records: vec![record("a", 1, 1, 1), record("a", 2, 1, 1)],
        };
        assert!(matches!(compute_stats(&dup), Err(Error::Integrity(_))));
    }

    #[test]
    fn emit_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let sample = CroppedSample {
            rgb: RgbImage::from_pixel(3, 4, image::Rgb([9, 8, 7])),
            identity_id: 7,
            camera_id: 3,
            scene_id: 2,
            sim_time: 1.5,
            bbox: Bbox::new(1, 2, 3, 5),
            file_name: None,
        };
        let m = emit_dataset(vec![sample], dir.path(), header(), ImageFormat::Png).unwrap();
        assert_eq!(m.records[0].path, "images/0007_c3s2_000000.png");
        assert!(!dir.path().join(INCOMPLETE_MARKER).exists());
        let back = read_manifest(dir.path()).unwrap();
        assert_eq!(back, m);
        verify_dataset(dir.path(), &back).unwrap();
        let img = image::open(dir.path().join(&m.records[0].path))
            .unwrap()
            .to_rgb8();
        assert_eq!(img.get_pixel(2, 3).0, [9, 8, 7]);
    }

    #[test]
    fn empty_emission_writes_header() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_dataset(vec![], dir.path(), header(), ImageFormat::Png).unwrap();
        assert!(m.records.is_empty());
        assert!(dir.path().join(HEADER_FILE).is_file());
        assert_eq!(fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap(), "");
    }

    #[test]
    fn interrupted_output_detected() {
        let dir = tempfile::tempdir().unwrap();
        let w = DatasetWriter::create(dir.path(), header(), ImageFormat::Png, 90).unwrap();
        drop(w);
        assert!(matches!(read_manifest(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn hash_is_key_order_independent() {
        let a: serde_json::Value = serde_json::from_str(r#"{"x":1,"y":{"b":2,"a":3}}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"y":{"a":3,"b":2},"x":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
