//! Single-linkage clustering of a rollout batch by BLEU similarity and the
//! redundancy-density diversity reward derived from it.

use serde::{Deserialize, Serialize};

use super::bleu::{profile_similarity, BleuProfile};

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id per batch element; ids are numbered by first appearance.
    pub cluster_of: Vec<usize>,
    pub sizes: Vec<usize>,
    /// `|C_k| / G` for the cluster of each element.
    pub densities: Vec<f64>,
}

impl ClusterAssignment {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        let g = labels.len();
        let mut ids: Vec<usize> = Vec::new();
        let mut cluster_of = Vec::with_capacity(g);
        for &l in labels {
            let id = match ids.iter().position(|&x| x == l) {
                Some(i) => i,
                None => {
                    ids.push(l);
                    ids.len() - 1
                }
            };
            cluster_of.push(id);
        }
        let mut sizes = vec![0; ids.len()];
        for &c in &cluster_of {
            sizes[c] += 1;
        }
        let densities = cluster_of.iter().map(|&c| sizes[c] as f64 / g as f64).collect();
        Self {
            cluster_of,
            sizes,
            densities,
        }
    }
}

/// Connected components of the graph with an edge wherever the pairwise
/// similarity is at least `threshold`.
pub fn cluster_by_bleu(sources: &[&str], threshold: f64) -> ClusterAssignment {
    let profiles: Vec<BleuProfile> = sources.iter().map(|s| BleuProfile::from_source(s)).collect();
    let mut uf = UnionFind::new(sources.len());
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            if profile_similarity(&profiles[i], &profiles[j]) >= threshold {
                uf.union(i, j);
            }
        }
    }
    let labels: Vec<usize> = (0..sources.len()).map(|i| uf.find(i)).collect();
    ClusterAssignment::from_labels(&labels)
}

/// Negative min-max normalized density. When every density is equal the
/// theoretical bounds `[1/G, 1]` stand in for the empirical ones, so an
/// all-distinct batch scores 0 and an all-identical batch scores -1.
pub fn diversity_reward(densities: &[f64]) -> Vec<f64> {
    let g = densities.len();
    if g <= 1 {
        return vec![0.0; g];
    }
    let lo = densities.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = densities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (1.0 / g as f64, 1.0) };
    // + 0.0 turns -0.0 into 0.0
    densities.iter().map(|p| (-(p - lo) / (hi - lo) + 0.0).clamp(-1.0, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: &str = "param angle\nstep rotate $angle\nargs angle=90\nargs angle=180\nargs angle=270\nargs angle=15";
    const Y: &str = "param s\nstep pixelate $s\nstep invert\nstep grayscale\nargs s=4\nargs s=8\nargs s=16\nargs s=32";

    #[test]
    fn identical_sources_form_one_cluster() {
        let a = cluster_by_bleu(&[X, X, X, X], 0.25);
        assert_eq!(a.sizes, [4]);
        assert_eq!(a.densities, [1.0; 4]);
    }

    #[test]
    fn three_and_one() {
        let a = cluster_by_bleu(&[X, X, X, Y], 0.25);
        assert_eq!(a.cluster_of, [0, 0, 0, 1]);
        assert_eq!(a.sizes, [3, 1]);
        assert_eq!(a.densities, [0.75, 0.75, 0.75, 0.25]);
        assert_eq!(diversity_reward(&a.densities), [-1.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn degenerate_normalization() {
        assert_eq!(diversity_reward(&[0.25; 4]), [0.0; 4]);
        assert_eq!(diversity_reward(&[1.0; 4]), [-1.0; 4]);
        assert_eq!(diversity_reward(&[1.0]), [0.0]);
        assert!(diversity_reward(&[]).is_empty());
        for r in diversity_reward(&[0.25; 4]) {
            assert!(r.is_sign_positive());
        }
    }

    #[test]
    fn union_find_components() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1));
        assert!(uf.union(3, 4));
        assert!(!uf.union(1, 0));
        assert_eq!(uf.find(0), uf.find(1));
        assert_ne!(uf.find(1), uf.find(3));
        assert_eq!(uf.find(2), 2);
    }
}
