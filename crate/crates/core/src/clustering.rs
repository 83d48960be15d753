//! Identity clustering of interacting prototypes across events.
//!
//! Each prototype is summarized by the normalized mean of its per-frame face
//! embeddings; prototypes are then grouped by average-linkage agglomerative
//! clustering on cosine distance, cut at a distance threshold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Prototype, PrototypeId};
use crate::scalar::Scalar;

pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.5;

/// Mean of the per-frame embeddings of `p`, L2-normalized.
pub fn prototype_descriptor<T: Scalar>(p: &Prototype) -> Result<Vec<T>> {
    let mut sum: Option<Vec<T>> = None;
    for face in p.faces() {
        let emb = face.embedding.as_ref().ok_or_else(|| Error::MissingEmbedding(p.id.to_string()))?;
        let acc = sum.get_or_insert_with(|| vec![T::zero(); emb.len()]);
        if acc.len() != emb.len() {
            return Err(Error::DimensionMismatch { expected: acc.len(), actual: emb.len() });
        }
        for (a, &v) in acc.iter_mut().zip(emb) {
            *a += T::of(v);
        }
    }
    let mut mean = sum.ok_or(Error::EmptyPrototype)?;
    let n = T::of(p.len() as f64);
    for v in &mut mean {
        *v /= n;
    }
    let norm = mean.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
    if !(norm > T::of(1e-12)) {
        return Err(Error::DegenerateDescriptor(p.id.to_string()));
    }
    for v in &mut mean {
        *v /= norm;
    }
    Ok(mean)
}

/// A partition of prototypes into identity clusters.
///
/// Clusters are ordered by their smallest member; members are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ClusterList", into = "ClusterList")]
pub struct ClusterSet {
    pub clusters: Vec<Vec<PrototypeId>>,
    pub assignment: BTreeMap<PrototypeId, usize>,
}

#[derive(Serialize, Deserialize)]
struct ClusterList {
    clusters: Vec<Vec<PrototypeId>>,
}

impl From<ClusterList> for ClusterSet {
    fn from(list: ClusterList) -> Self {
        ClusterSet::from_clusters(list.clusters)
    }
}

impl From<ClusterSet> for ClusterList {
    fn from(set: ClusterSet) -> Self {
        ClusterList { clusters: set.clusters }
    }
}

impl ClusterSet {
    pub fn from_clusters(clusters: Vec<Vec<PrototypeId>>) -> Self {
        let assignment = clusters
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |&id| (id, j)))
            .collect();
        Self { clusters, assignment }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, id: &PrototypeId) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    /// |c_j|.
    pub fn cardinality(&self, j: usize) -> usize {
        self.clusters.get(j).map_or(0, Vec::len)
    }

    /// Index of the largest cluster; ties go to the lower index.
    pub fn largest(&self) -> Option<usize> {
        (0..self.len()).rev().max_by_key(|&j| self.cardinality(j))
    }
}

/// Average-linkage clustering of precomputed unit descriptors on cosine distance.
///
/// Pairs are merged while their linkage distance is at most `distance_threshold`. The
/// input is sorted by id first, and among equally distant pairs the one whose members
/// have the lowest ids merges first, so the result does not depend on input order.
pub fn cluster_descriptors<T: Scalar>(items: &[(PrototypeId, Vec<T>)], distance_threshold: T) -> Result<ClusterSet> {
    if !(distance_threshold > T::zero()) {
        return Err(Error::InvalidArgument(format!("cluster threshold {distance_threshold} must be positive")));
    }
    let mut sorted: Vec<&(PrototypeId, Vec<T>)> = items.iter().collect();
    sorted.sort_by_key(|(id, _)| *id);
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument(format!("duplicate prototype {}", w[0].0)));
    }
    let n = sorted.len();
    if let Some((_, first)) = sorted.first() {
        if let Some((_, bad)) = sorted.iter().find(|(_, d)| d.len() != first.len()) {
            return Err(Error::DimensionMismatch { expected: first.len(), actual: bad.len() });
        }
    }

    let two = T::of(2.0);
    let mut dist = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let cos = sorted[i].1.iter().zip(&sorted[j].1).fold(T::zero(), |s, (&a, &b)| s + a * b);
            let d = (T::one() - cos).max(T::zero()).min(two);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    // slot i holds the cluster whose smallest member is sorted[i]
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    loop {
        let mut best: Option<(usize, usize, T)> = None;
        for a in 0..n {
            if members[a].is_none() {
                continue;
            }
            for b in (a + 1)..n {
                if members[b].is_none() {
                    continue;
                }
                let d = dist[a * n + b];
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((a, b, d));
                }
            }
        }
        let Some((a, b, d)) = best else { break };
        if d > distance_threshold {
            break;
        }
        let mb = members[b].take().expect("active slot");
        let (na, nb) = (
            T::of(members[a].as_ref().expect("active slot").len() as f64),
            T::of(mb.len() as f64),
        );
        for k in 0..n {
            if k == a || k == b || members[k].is_none() {
                continue;
            }
            let merged = (na * dist[a * n + k] + nb * dist[b * n + k]) / (na + nb);
            dist[a * n + k] = merged;
            dist[k * n + a] = merged;
        }
        let ma = members[a].as_mut().expect("active slot");
        ma.extend(mb);
        ma.sort_unstable();
    }

    let clusters = members
        .into_iter()
        .flatten()
        .map(|m| m.into_iter().map(|i| sorted[i].0).collect())
        .collect();
    Ok(ClusterSet::from_clusters(clusters))
}

/// Computes descriptors for `prototypes` and clusters them.
pub fn cluster_prototypes<T: Scalar>(prototypes: &[Prototype], distance_threshold: T) -> Result<ClusterSet> {
    if prototypes.is_empty() {
        return Err(Error::InvalidArgument("no prototypes to cluster".into()));
    }
    let items = prototypes
        .iter()
        .map(|p| Ok((p.id, prototype_descriptor::<T>(p)?)))
        .collect::<Result<Vec<_>>>()?;
    cluster_descriptors(&items, distance_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExpressionVector, FaceObservation, TimedFace};

    fn proto(id: u64, embeddings: &[&[f64]]) -> Prototype {
        Prototype {
            id: PrototypeId { event_id: id, track_id: 0 },
            observations: embeddings
                .iter()
                .enumerate()
                .map(|(i, e)| TimedFace {
                    frame_index: i as u64,
                    face: FaceObservation {
                        track_id: 0,
                        distance: 1.0,
                        yaw: 0.0,
                        pitch: 0.0,
                        roll: 0.0,
                        expression: ExpressionVector::uniform(),
                        embedding: Some(e.to_vec()),
                    },
                })
                .collect(),
            label: None,
        }
    }

    #[test]
    fn descriptor_cases() {
        let d: Vec<f64> = prototype_descriptor(&proto(0, &[&[3.0, 4.0], &[3.0, 4.0]])).unwrap();
        assert!((d[0] - 0.6).abs() < 1e-15 && (d[1] - 0.8).abs() < 1e-15);
        let opposite = proto(1, &[&[1.0, 0.0], &[-1.0, 0.0]]);
        assert!(matches!(prototype_descriptor::<f64>(&opposite), Err(Error::DegenerateDescriptor(_))));
        let mut missing = proto(2, &[&[1.0, 0.0]]);
        missing.observations[0].face.embedding = None;
        assert!(matches!(prototype_descriptor::<f64>(&missing), Err(Error::MissingEmbedding(_))));
    }

    #[test]
    fn forced_linkage_cases() {
        let single = cluster_prototypes::<f64>(&[proto(0, &[&[1.0, 0.0]])], 0.5).unwrap();
        assert_eq!(single.len(), 1);

        let same = [proto(0, &[&[1.0, 0.0]]), proto(1, &[&[1.0, 0.0]])];
        assert_eq!(cluster_prototypes::<f64>(&same, 0.1).unwrap().len(), 1);

        let orthogonal = [proto(0, &[&[1.0, 0.0]]), proto(1, &[&[0.0, 1.0]])];
        assert_eq!(cluster_prototypes::<f64>(&orthogonal, 0.5).unwrap().len(), 2);
    }

    #[test]
    fn serde_rebuilds_assignment() {
        let set = cluster_prototypes::<f64>(&[proto(0, &[&[1.0, 0.0]]), proto(1, &[&[0.0, 1.0]])], 0.5).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let back: ClusterSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.cluster_of(&PrototypeId { event_id: 1, track_id: 0 }), Some(1));
    }
}
