use super::ConceptError;

/// A precomputed name embedding. Only the direction matters for dedup.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ConceptError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(ConceptError::ZeroNorm);
        }
        Ok(Self { values, norm })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn cosine(&self, other: &Self) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot / (self.norm * other.norm)
    }
}

/// Concepts collapsed into one survivor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeGroup {
    /// Index of the lexicographically smallest name in the group.
    pub survivor: usize,
    /// Member indices, ascending.
    pub members: Vec<usize>,
}

/// Groups names whose embeddings are connected by cosine similarity at or
/// above `threshold` (single linkage). Groups come out ordered by their
/// smallest member index and together partition `0..names.len()`.
pub fn semantic_dedup<S: AsRef<str>>(
    names: &[S],
    vectors: &[EmbeddingVector],
    threshold: f64,
) -> Result<Vec<MergeGroup>, ConceptError> {
    if names.len() != vectors.len() {
        return Err(ConceptError::LengthMismatch {
            names: names.len(),
            vectors: vectors.len(),
        });
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(ConceptError::BadThreshold(threshold));
    }
    if let Some(first) = vectors.first() {
        let expected = first.dim();
        if let Some((index, v)) = vectors.iter().enumerate().find(|(_, v)| v.dim() != expected) {
            return Err(ConceptError::DimensionMismatch {
                index,
                expected,
                found: v.dim(),
            });
        }
    }

    let n = vectors.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if vectors[i].cosine(&vectors[j]) >= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: Vec<MergeGroup> = Vec::new();
    let mut slot_of_root = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = groups.len();
            groups.push(MergeGroup {
                survivor: i,
                members: Vec::new(),
            });
        }
        let group = &mut groups[slot_of_root[root]];
        group.members.push(i);
        if names[i].as_ref() < names[group.survivor].as_ref() {
            group.survivor = i;
        }
    }
    Ok(groups)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn identical_vectors_merge() {
        let groups = semantic_dedup(&["tv", "television"], &[v(&[1.0, 2.0]), v(&[1.0, 2.0])], 0.95)
            .unwrap();
        assert_eq!(groups, vec![MergeGroup { survivor: 1, members: vec![0, 1] }]);
    }

    #[test]
    fn orthogonal_vectors_stay_apart() {
        let groups = semantic_dedup(&["a", "b"], &[v(&[1.0, 0.0]), v(&[0.0, 1.0])], 0.95).unwrap();
        assert_eq!(groups.len(), 2);
    }

    /// Unit vectors in the plane at the given angles.
    fn planar(angles: &[f64]) -> Vec<EmbeddingVector> {
        angles.iter().map(|a| v(&[a.cos(), a.sin(), 0.0])).collect()
    }

    #[test]
    fn chain_is_merged_transitively() {
        // a-b cos 0.97, b-c cos 0.96, a-c below threshold; d, e far away.
        let ab = 0.97f64.acos();
        let bc = 0.96f64.acos();
        let mut vecs = planar(&[0.0, ab, ab + bc]);
        vecs.push(v(&[0.2, (1.0 - 0.04f64).sqrt(), 0.0]));
        vecs.push(v(&[0.0, 0.0, 1.0]));
        let names = ["colour", "color", "colr", "hue", "zebra"];

        // brute-force cosine table
        let mut table = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = vecs[i].values().iter().zip(vecs[j].values()).map(|(x, y)| x * y).sum();
                table[i][j] = dot;
            }
        }
        assert!((table[0][1] - 0.97).abs() < 1e-12);
        assert!((table[1][2] - 0.96).abs() < 1e-12);
        assert!(table[0][2] < 0.95);
        assert!(table[0][3] < 0.95 && table[1][3] < 0.95 && table[2][3] < 0.95);

        let groups = semantic_dedup(&names, &vecs, 0.95).unwrap();
        assert_eq!(
            groups,
            vec![
                MergeGroup { survivor: 1, members: vec![0, 1, 2] },
                MergeGroup { survivor: 3, members: vec![3] },
                MergeGroup { survivor: 4, members: vec![4] },
            ]
        );
    }

    #[test]
    fn dimension_mismatch_is_fatal() {
        let err = semantic_dedup(&["a", "b"], &[v(&[1.0, 0.0]), v(&[1.0, 0.0, 0.0])], 0.95)
            .unwrap_err();
        assert!(matches!(err, ConceptError::DimensionMismatch { index: 1, .. }));
        assert!(matches!(EmbeddingVector::new(vec![0.0, 0.0]), Err(ConceptError::ZeroNorm)));
        assert!(semantic_dedup(&["a"], &[v(&[1.0])], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn groups_partition_indices(
            raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..24),
            threshold in 0.5f64..1.0,
        ) {
            let vecs: Vec<_> = raw.into_iter()
                .filter_map(|mut x| { x[0] += 1.5; EmbeddingVector::new(x).ok() })
                .collect();
            let names: Vec<String> = (0..vecs.len()).map(|i| format!("n{:02}", (i * 7) % 23)).collect();
            let groups = semantic_dedup(&names, &vecs, threshold).unwrap();
            let mut seen: Vec<usize> = groups.iter().flat_map(|g| g.members.clone()).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..vecs.len()).collect::<Vec<_>>());
            for g in &groups {
                prop_assert!(g.members.contains(&g.survivor));
                for &m in &g.members {
                    prop_assert!(names[g.survivor] <= names[m]);
                }
            }
        }
    }
}
