use serde::Serialize;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    /// Arithmetic mean of the members.
    pub value: f64,
    pub multiplicity: usize,
    /// Indices into the clustered input.
    pub members: Vec<usize>,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusteredSpectrum {
    pub clusters: Vec<Cluster>,
    pub tol: f64,
}

/// Greedy gap clustering of ascending values: a new cluster starts when the
/// gap to the previous value exceeds `tol`.
pub fn cluster(values: &[f64], tol: f64) -> ClusteredSpectrum {
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]), "values must be sorted");
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut start = 0;
    for i in 0..=values.len() {
        let split = i == values.len() || (i > start && values[i] - values[i - 1] > tol);
        if split && i > start {
            let members: Vec<usize> = (start..i).collect();
            let slice = &values[start..i];
            clusters.push(Cluster {
                value: slice.iter().sum::<f64>() / slice.len() as f64,
                multiplicity: slice.len(),
                members,
                spread: slice[slice.len() - 1] - slice[0],
            });
            start = i;
        }
    }
    ClusteredSpectrum { clusters, tol }
}

impl ClusteredSpectrum {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.clusters.iter().map(|c| c.multiplicity).sum()
    }

    /// Cluster whose representative is nearest `x`, if within `tol`.
    pub fn find(&self, x: f64, tol: f64) -> Option<&Cluster> {
        self.clusters
            .iter()
            .filter(|c| (c.value - x).abs() <= tol)
            .min_by(|a, b| (a.value - x).abs().total_cmp(&(b.value - x).abs()))
    }

    /// Multiplicity of the cluster within `tol` of `x`, zero if none.
    pub fn multiplicity_at(&self, x: f64, tol: f64) -> usize {
        self.find(x, tol).map_or(0, |c| c.multiplicity)
    }

    /// CSV with columns `index,value,multiplicity,spread`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value,multiplicity,spread\n");
        for (i, c) in self.clusters.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.17e},{},{:e}", c.value, c.multiplicity, c.spread);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn near_duplicates_merge() {
        let c = cluster(&[1.0, 1.0 + 1e-12, 5.0], 1e-9);
        assert_eq!(c.len(), 2);
        assert_eq!(c.clusters[0].multiplicity, 2);
        assert!((c.clusters[0].value - 1.0).abs() < 1e-12);
        assert_eq!(c.clusters[1].members, vec![2]);
    }

    #[test]
    fn empty_input() {
        assert!(cluster(&[], 1e-3).is_empty());
    }

    #[test]
    fn chained_values_form_one_cluster() {
        let c = cluster(&[0.0, 0.5, 1.0, 1.5], 0.6);
        assert_eq!(c.len(), 1);
        assert_eq!(c.clusters[0].spread, 1.5);
    }

    proptest! {
        #[test]
        fn conservation_and_gaps(mut v in proptest::collection::vec(-100.0f64..100.0, 0..60), tol in 1e-6f64..5.0) {
            v.sort_by(f64::total_cmp);
            let c = cluster(&v, tol);
            prop_assert_eq!(c.total_multiplicity(), v.len());
            for w in c.clusters.windows(2) {
                let last = v[*w[0].members.last().unwrap()];
                let first = v[w[1].members[0]];
                prop_assert!(first - last > tol);
            }
            for cl in &c.clusters {
                for pair in cl.members.windows(2) {
                    prop_assert!(v[pair[1]] - v[pair[0]] <= tol);
                }
            }
        }
    }
}
