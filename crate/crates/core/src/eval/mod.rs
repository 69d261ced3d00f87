//! Cross-camera retrieval evaluation with classical appearance features.

pub mod features;

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
pub use features::{extract_features, FEATURE_DIM};

/// Variance floor of the per-camera standardization.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Standardizes every dimension within each camera group. Groups with fewer
/// than two members are left unchanged.
pub fn camera_normalize(features: &[Vec<f64>], cameras: &[u32]) -> Vec<Vec<f64>> {
    assert_eq!(features.len(), cameras.len());
    let mut out = features.to_vec();
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &c) in cameras.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    for idx in groups.values() {
        if idx.len() < 2 {
            continue;
        }
        let dim = features[idx[0]].len();
        let n = idx.len() as f64;
        for d in 0..dim {
            let mean = idx.iter().map(|&i| features[i][d]).sum::<f64>() / n;
            let var = idx.iter().map(|&i| (features[i][d] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.max(VARIANCE_FLOOR).sqrt();
            for &i in idx {
                out[i][d] = (features[i][d] - mean) / sd;
            }
        }
    }
    out
}

/// Per-dimension weights `between / within` identity variance, fitted on
/// labelled training features and normalized to mean 1.
pub fn fit_dimension_weights(features: &[Vec<f64>], labels: &[u32]) -> Vec<f64> {
    let Some(first) = features.first() else {
        return Vec::new();
    };
    let dim = first.len();
    let n = features.len() as f64;
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut w = vec![0.0; dim];
    for (d, wd) in w.iter_mut().enumerate() {
        let mean = features.iter().map(|f| f[d]).sum::<f64>() / n;
        let (mut between, mut within) = (0.0, 0.0);
        for idx in groups.values() {
            let m = idx.iter().map(|&i| features[i][d]).sum::<f64>() / idx.len() as f64;
            between += idx.len() as f64 * (m - mean).powi(2);
            within += idx.iter().map(|&i| (features[i][d] - m).powi(2)).sum::<f64>();
        }
        *wd = between / (within + VARIANCE_FLOOR * n);
    }
    let mean = w.iter().sum::<f64>() / dim as f64;
    if mean > 0.0 {
        w.iter_mut().for_each(|x| *x /= mean);
    } else {
        w.iter_mut().for_each(|x| *x = 1.0);
    }
    w
}

/// `P` identities with `K` sample indices each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub identities: Vec<u32>,
    /// `indices[i]` holds the `K` samples drawn for `identities[i]`.
    pub indices: Vec<Vec<usize>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One epoch of identity-balanced batches over samples labelled by `labels`.
///
/// Identities are shuffled and chunked by `p`; the last chunk is topped up with
/// other identities. Identities with fewer than `k` samples are drawn with
/// replacement.
pub fn balanced_batches(labels: &[u32], p: usize, k: usize, seed: u64) -> Result<Vec<Batch>> {
    if p == 0 || k == 0 {
        return Err(Error::Validation("P and K must be positive".into()));
    }
    let mut by_id: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_id.entry(l).or_default().push(i);
    }
    if p > by_id.len() {
        return Err(Error::Validation(format!(
            "P = {p} exceeds the {} identities available",
            by_id.len()
        )));
    }
    let mut rng = rng::stream(seed, Stream::Batch, &[p as u64, k as u64]);
    let mut ids: Vec<u32> = by_id.keys().copied().collect();
    ids.shuffle(&mut rng);
    let mut batches = Vec::with_capacity(ids.len().div_ceil(p));
    for chunk in ids.chunks(p) {
        let mut members = chunk.to_vec();
        if members.len() < p {
            let mut others: Vec<u32> = ids.iter().copied().filter(|i| !chunk.contains(i)).collect();
            others.shuffle(&mut rng);
            members.extend(others.into_iter().take(p - chunk.len()));
        }
        let indices = members
            .iter()
            .map(|id| {
                let pool = &by_id[id];
                if pool.len() >= k {
                    pool.choose_multiple(&mut rng, k).copied().collect()
                } else {
                    (0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect()
                }
            })
            .collect();
        batches.push(Batch {
            identities: members,
            indices,
        });
    }
    Ok(batches)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    L2,
    Cosine,
}

impl std::str::FromStr for Distance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" | "L2" => Ok(Distance::L2),
            "cosine" => Ok(Distance::Cosine),
            _ => Err(Error::Config(format!("unknown distance {s:?}"))),
        }
    }
}

impl Distance {
    pub fn between(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Distance::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    (1.0 - dot / (na * nb)).max(0.0)
                }
            }
        }
    }
}

/// A described image with its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeled {
    pub feature: Vec<f64>,
    pub identity_id: u32,
    pub camera_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// `cmc[k-1]` is the rank-k accuracy.
    pub cmc: Vec<f64>,
    pub map: f64,
    /// Queries that entered the averages.
    pub n_queries: usize,
    /// Queries without any valid gallery match.
    pub n_skipped: usize,
    pub protocol: String,
}

impl EvalResult {
    pub fn rank(&self, k: usize) -> f64 {
        if self.cmc.is_empty() {
            return 0.0;
        }
        self.cmc[(k.max(1) - 1).min(self.cmc.len() - 1)]
    }
}

/// Average precision of a ranked relevance list: mean over relevant positions
/// of the precision at that position.
pub fn average_precision(relevant: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in relevant.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Cross-camera retrieval. Gallery items sharing both identity and camera with
/// the query are ignored; distance ties go to the lower gallery index.
pub fn evaluate(query: &[Labeled], gallery: &[Labeled], distance: Distance) -> Result<EvalResult> {
    let dim = query.first().or(gallery.first()).map(|l| l.feature.len());
    if let Some(d) = dim {
        if query.iter().chain(gallery).any(|l| l.feature.len() != d) {
            return Err(Error::Validation("feature lengths differ".into()));
        }
    }
    let mut hits_at = vec![0usize; gallery.len()];
    let mut ap_sum = 0.0;
    let mut n_queries = 0;
    let mut n_skipped = 0;
    for q in query {
        let mut ranked: Vec<(f64, usize)> = gallery
            .iter()
            .enumerate()
            .filter(|(_, g)| !(g.identity_id == q.identity_id && g.camera_id == q.camera_id))
            .map(|(i, g)| (distance.between(&q.feature, &g.feature), i))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let relevant: Vec<bool> = ranked
            .iter()
            .map(|&(_, i)| gallery[i].identity_id == q.identity_id)
            .collect();
        let Some(ap) = average_precision(&relevant) else {
            n_skipped += 1;
            continue;
        };
        n_queries += 1;
        ap_sum += ap;
        let first = relevant.iter().position(|&r| r).expect("ap implies a hit");
        hits_at[first] += 1;
    }
    if n_skipped > 0 {
        log::warn!("{n_skipped} queries have no valid gallery match and were excluded");
    }
    let mut cmc = Vec::with_capacity(gallery.len());
    let mut acc = 0usize;
    for h in hits_at {
        acc += h;
        cmc.push(if n_queries == 0 {
            0.0
        } else {
            acc as f64 / n_queries as f64
        });
    }
    Ok(EvalResult {
        cmc,
        map: if n_queries == 0 {
            0.0
        } else {
            ap_sum / n_queries as f64
        },
        n_queries,
        n_skipped,
        protocol: format!("cross-camera, same-id same-camera excluded, {distance:?}"),
    })
}

/// Splits labelled images into queries (the first image of each identity in
/// each query camera) and the gallery (all other images in gallery cameras).
pub fn split_query_gallery(
    items: &[Labeled],
    query_cams: &[u32],
    gallery_cams: &[u32],
) -> (Vec<Labeled>, Vec<Labeled>) {
    let mut seen = std::collections::BTreeSet::new();
    let mut query = Vec::new();
    let mut gallery = Vec::new();
    for it in items {
        if query_cams.contains(&it.camera_id) && seen.insert((it.identity_id, it.camera_id)) {
            query.push(it.clone());
        } else if gallery_cams.contains(&it.camera_id) {
            gallery.push(it.clone());
        }
    }
    (query, gallery)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(f: Vec<f64>, id: u32, cam: u32) -> Labeled {
        Labeled {
            feature: f,
            identity_id: id,
            camera_id: cam,
        }
    }

    #[test]
    fn perfect_retrieval() {
        let q = [item(vec![0.0], 1, 1)];
        let g = [item(vec![0.1], 1, 2), item(vec![5.0], 2, 2)];
        let r = evaluate(&q, &g, Distance::L2).unwrap();
        assert_eq!(r.cmc[0], 1.0);
        assert_eq!(r.map, 1.0);
    }

    #[test]
    fn ap_two_relevant_of_five() {
        let ap = average_precision(&[true, false, true, false, false]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn same_camera_items_are_ignored() {
        let q = [item(vec![0.0], 1, 1)];
        let g = [
            item(vec![0.0], 1, 1),
            item(vec![1.0], 2, 2),
            item(vec![2.0], 1, 2),
        ];
        let r = evaluate(&q, &g, Distance::L2).unwrap();
        assert_eq!(r.cmc[0], 0.0);
        assert_eq!(r.cmc[1], 1.0);
        assert_eq!(r.map, 0.5);
    }

    #[test]
    fn unmatched_queries_excluded() {
        let q = [item(vec![0.0], 1, 1), item(vec![0.0], 9, 1)];
        let g = [item(vec![0.0], 1, 2)];
        let r = evaluate(&q, &g, Distance::Cosine).unwrap();
        assert_eq!((r.n_queries, r.n_skipped), (1, 1));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let q = [item(vec![0.0], 1, 1)];
        let g = [item(vec![1.0], 2, 2), item(vec![-1.0], 1, 2)];
        let r = evaluate(&q, &g, Distance::L2).unwrap();
        assert_eq!(r.cmc[0], 0.0);
        assert_eq!(r.map, 0.5);
    }

    #[test]
    fn degenerate_variance_maps_to_zero() {
        let f = vec![vec![3.0, 1.0], vec![3.0, 2.0]];
        let n = camera_normalize(&f, &[1, 1]);
        assert_eq!(n[0][0], 0.0);
        assert_eq!(n[1][0], 0.0);
        assert!((n[0][1] + 1.0).abs() < 1e-12 && (n[1][1] - 1.0).abs() < 1e-12);
        let single = camera_normalize(&f[..1], &[4]);
        assert_eq!(single[0], f[0]);
    }

    #[test]
    fn shifted_cameras_align_after_normalization() {
        // Camera 2 sees the camera-1 features plus a large constant shift.
        let base: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let mut feats = base.clone();
        feats.extend(base.iter().map(|f| vec![f[0] + 2.5, f[1] + 7.0]));
        let cams: Vec<u32> = (0..12).map(|i| if i < 6 { 1 } else { 2 }).collect();
        let ids: Vec<u32> = (0..12).map(|i| (i % 6) as u32).collect();
        let acc = |f: &[Vec<f64>]| {
            let items: Vec<Labeled> = f
                .iter()
                .zip(&ids)
                .zip(&cams)
                .map(|((f, &i), &c)| item(f.clone(), i, c))
                .collect();
            evaluate(&items[..6], &items[6..], Distance::L2).unwrap().cmc[0]
        };
        let before = acc(&feats);
        let after = acc(&camera_normalize(&feats, &cams));
        assert!(after >= before);
        assert_eq!(after, 1.0);
    }

    #[test]
    fn batches_cover_epoch() {
        let labels: Vec<u32> = (0..100)
            .flat_map(|i| std::iter::repeat_n(i, 1 + (i % 5) as usize))
            .collect();
        let b = balanced_batches(&labels, 10, 4, 7).unwrap();
        assert_eq!(b.len(), 10);
        let mut seen = std::collections::BTreeSet::new();
        for batch in &b {
            assert_eq!(batch.len(), 40);
            seen.extend(batch.identities.iter().copied());
        }
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn singleton_batches_and_errors() {
        let b = balanced_batches(&[4, 4, 9], 1, 1, 0).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|x| x.len() == 1));
        assert!(balanced_batches(&[1, 2], 3, 1, 0).is_err());
    }

    #[test]
    fn query_split_takes_first_per_camera() {
        let items = vec![
            item(vec![0.0], 1, 1),
            item(vec![1.0], 1, 1),
            item(vec![2.0], 1, 2),
            item(vec![3.0], 2, 3),
        ];
        let (q, g) = split_query_gallery(&items, &[1, 2], &[1, 2]);
        assert_eq!(q.len(), 2);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].feature, vec![1.0]);
    }
}
