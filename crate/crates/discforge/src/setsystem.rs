//! Finite set systems: a ground set `0..n` plus an ordered family of ranges
//! stored as one contiguous matrix of u64 words (one row per range), which
//! keeps symmetric-difference counting a straight XOR/popcount sweep.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::bits::{count_words, words_for, xor_count_words, BitSet};
use crate::error::{DiscError, Result};
use crate::rng::Rng;

#[derive(Clone)]
pub struct SetSystem {
    n: usize,
    words_per_range: usize,
    words: Vec<u64>,
    sizes: Vec<u32>,
    labels: Option<Vec<String>>,
}

impl SetSystem {
    pub fn new(n: usize) -> Self {
        SetSystem {
            n,
            words_per_range: words_for(n).max(1),
            words: Vec::new(),
            sizes: Vec::new(),
            labels: None,
        }
    }

    pub fn from_bitsets<I: IntoIterator<Item = BitSet>>(n: usize, ranges: I, dedupe: bool) -> Result<Self> {
        let mut sys = SetSystem::new(n);
        if dedupe {
            let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
            for b in ranges {
                if b.width() != n {
                    return Err(DiscError::WidthMismatch { left: b.width(), right: n });
                }
                if seen.insert(b.words().to_vec(), ()).is_none() {
                    sys.push(&b);
                }
            }
        } else {
            for b in ranges {
                if b.width() != n {
                    return Err(DiscError::WidthMismatch { left: b.width(), right: n });
                }
                sys.push(&b);
            }
        }
        Ok(sys)
    }

    pub fn push(&mut self, range: &BitSet) {
        debug_assert_eq!(range.width(), self.n);
        self.words.extend_from_slice(range.words());
        if range.words().is_empty() {
            // width 0 still occupies one (zero) word row for uniform stride
            self.words.push(0);
        }
        self.sizes.push(range.count() as u32);
    }

    pub fn set_labels(&mut self, labels: Vec<String>) {
        debug_assert_eq!(labels.len(), self.len());
        self.labels = Some(labels);
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[i].as_str())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Ground set of size zero only arises from degenerate projections.
    pub fn is_degenerate(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn range_words(&self, i: usize) -> &[u64] {
        let s = i * self.words_per_range;
        &self.words[s..s + self.words_per_range]
    }

    pub fn range(&self, i: usize) -> BitSet {
        if self.n == 0 {
            return BitSet::new(0);
        }
        BitSet::from_words(self.n, self.range_words(i).to_vec())
    }

    #[inline]
    pub fn size(&self, i: usize) -> usize {
        self.sizes[i] as usize
    }

    #[inline]
    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    #[inline]
    pub fn contains(&self, i: usize, element: usize) -> bool {
        debug_assert!(element < self.n);
        self.range_words(i)[element / 64] >> (element % 64) & 1 == 1
    }

    /// Hamming distance between ranges `i` and `j`.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> usize {
        xor_count_words(self.range_words(i), self.range_words(j))
    }

    #[inline]
    pub fn dist_to_words(&self, i: usize, other: &[u64]) -> usize {
        xor_count_words(self.range_words(i), other)
    }

    pub fn iter_ranges(&self) -> impl Iterator<Item = BitSet> + '_ {
        (0..self.len()).map(move |i| self.range(i))
    }

    /// Signed sum of `values` over the elements of range `i`.
    pub fn signed_sum(&self, i: usize, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let mut acc = 0.0;
        for e in self.range(i).iter_ones() {
            acc += values[e];
        }
        acc
    }

    /// Restriction and reindexing of the system onto the subset `keep` of the
    /// ground set. Traces are deduplicated; `old_to_new[r]` maps every
    /// original range to the trace it collapsed onto.
    pub fn project_detailed(&self, keep: &BitSet) -> Result<Projection> {
        if keep.width() != self.n {
            return Err(DiscError::WidthMismatch { left: keep.width(), right: self.n });
        }
        let elements: Vec<u32> = keep.iter_ones().map(|e| e as u32).collect();
        let m = elements.len();
        // Position of each kept element in the new ground set.
        let mut new_pos = vec![u32::MAX; self.n];
        for (p, &e) in elements.iter().enumerate() {
            new_pos[e as usize] = p as u32;
        }
        let mut sys = SetSystem::new(m);
        let mut seen: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut old_to_new = Vec::with_capacity(self.len());
        let mut new_to_old_first = Vec::new();
        for r in 0..self.len() {
            let mut trace = BitSet::new(m);
            for e in self.range(r).intersect(keep).iter_ones() {
                trace.insert(new_pos[e] as usize);
            }
            let key = trace.words().to_vec();
            let idx = match seen.get(&key) {
                Some(&idx) => idx,
                None => {
                    let idx = sys.len() as u32;
                    seen.insert(key, idx);
                    sys.push(&trace);
                    new_to_old_first.push(r as u32);
                    idx
                }
            };
            old_to_new.push(idx);
        }
        Ok(Projection { sys, elements, old_to_new, new_to_old_first })
    }

    pub fn project(&self, keep: &BitSet) -> Result<SetSystem> {
        Ok(self.project_detailed(keep)?.sys)
    }

    /// True when two ranges hold identical element sets.
    pub fn has_duplicate_ranges(&self) -> bool {
        let mut seen: std::collections::HashSet<&[u64]> =
            std::collections::HashSet::with_capacity(self.len());
        (0..self.len()).any(|r| !seen.insert(self.range_words(r)))
    }

    /// True when the listed ranges are pairwise further apart than `delta`.
    /// Vacuously true for fewer than two indices.
    pub fn is_delta_separated(&self, indices: &[u32], delta: f64) -> bool {
        for (a, &i) in indices.iter().enumerate() {
            for &j in &indices[a + 1..] {
                if (self.dist(i as usize, j as usize) as f64) <= delta {
                    return false;
                }
            }
        }
        true
    }

    /// Distinct-trace statistics on `trials` random m-point subsets of the
    /// ground set; keeps the profile with the most distinct traces (ties go
    /// to the earliest trial).
    pub fn measure_shatter(&self, m: usize, trials: usize, seed: u64) -> Result<ShatterProfile> {
        if m == 0 || m > self.n {
            return Err(DiscError::Precondition(format!(
                "subset size {m} must lie in 1..={}",
                self.n
            )));
        }
        if trials == 0 {
            return Err(DiscError::Precondition("need at least one trial".into()));
        }
        let profiles: Vec<ShatterProfile> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = Rng::derived(seed, &[0x7368_6174, t as u64]);
                let picked = rng.subset(self.n, m);
                self.profile_on_subset(&picked, m)
            })
            .collect();
        Ok(profiles
            .into_iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.total_projections
                    .cmp(&b.total_projections)
                    .then(ib.cmp(ia))
            })
            .map(|(_, p)| p)
            .expect("at least one trial"))
    }

    fn profile_on_subset(&self, picked: &[u32], m: usize) -> ShatterProfile {
        let mut mask = BitSet::new(self.n.max(1));
        for &e in picked {
            mask.insert(e as usize);
        }
        // Distinct traces keyed by the masked words; reindexing preserves
        // both distinctness and cardinality, so it is skipped.
        let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
        let mut size_hist = vec![0u64; m + 1];
        for r in 0..self.len() {
            let key: Vec<u64> = self
                .range_words(r)
                .iter()
                .zip(mask.words())
                .map(|(w, k)| w & k)
                .collect();
            if seen.insert(key.clone(), ()).is_none() {
                size_hist[count_words(&key)] += 1;
            }
        }
        let mut by_size = vec![0u64; m + 1];
        let mut acc = 0;
        for k in 0..=m {
            acc += size_hist[k];
            by_size[k] = acc;
        }
        ShatterProfile {
            m,
            total_projections: acc,
            by_size,
            fitted_d: 0.0,
            fitted_d1: 0.0,
            fitted_d2: 0.0,
        }
    }

    /// Log-log least-squares estimates of the trace-count growth exponents
    /// over a ladder of subset sizes. `d` comes from total counts vs m; the
    /// size-restricted exponent comes from the cumulative histogram at the
    /// largest m; the split satisfies d2 = d - d1 by construction. These are
    /// empirical fits at desk scale, not asymptotic statements.
    pub fn fit_exponents(&self, m_ladder: &[usize], trials: usize, seed: u64) -> Result<ExponentFit> {
        if m_ladder.len() < 2 {
            return Err(DiscError::Precondition("exponent fit needs at least two ladder points".into()));
        }
        let mut profiles = Vec::with_capacity(m_ladder.len());
        for (li, &m) in m_ladder.iter().enumerate() {
            profiles.push(self.measure_shatter(m, trials, seed ^ (li as u64) << 32)?);
        }
        let pts_m: Vec<(f64, f64)> = profiles
            .iter()
            .map(|p| ((p.m as f64).ln(), (p.total_projections.max(1) as f64).ln()))
            .collect();
        let d = least_squares_slope(&pts_m);
        let top = profiles.last().expect("nonempty ladder");
        let mut pts_k = Vec::new();
        let mut k = 2usize;
        while k <= top.m {
            if top.by_size[k] >= 1 {
                pts_k.push(((k as f64).ln(), (top.by_size[k] as f64).ln()));
            }
            k *= 2;
        }
        if pts_k.len() < 2 {
            return Err(DiscError::Precondition("size histogram too flat for exponent fit".into()));
        }
        let size_slope = least_squares_slope(&pts_k);
        let d1 = d - size_slope;
        let mut fitted = profiles;
        for p in &mut fitted {
            p.fitted_d = d;
            p.fitted_d1 = d1;
            p.fitted_d2 = d - d1;
        }
        Ok(ExponentFit { d, d1, d2: d - d1, profiles: fitted })
    }
}

impl std::fmt::Debug for SetSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SetSystem(n={}, ranges={})", self.n, self.len())
    }
}

/// Result of projecting a system onto a subset of its ground set.
pub struct Projection {
    pub sys: SetSystem,
    /// New ground position -> original element.
    pub elements: Vec<u32>,
    /// Original range -> deduplicated trace index.
    pub old_to_new: Vec<u32>,
    /// Trace index -> first original range that produced it.
    pub new_to_old_first: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct ShatterProfile {
    pub m: usize,
    pub total_projections: u64,
    /// Cumulative count of distinct traces with at most k elements, k = 0..=m.
    pub by_size: Vec<u64>,
    pub fitted_d: f64,
    pub fitted_d1: f64,
    pub fitted_d2: f64,
}

#[derive(Clone, Debug)]
pub struct ExponentFit {
    pub d: f64,
    pub d1: f64,
    pub d2: f64,
    pub profiles: Vec<ShatterProfile>,
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Size of the symmetric difference of two equal-width sets.
pub fn symmetric_difference_size(a: &BitSet, b: &BitSet) -> Result<usize> {
    if a.width() != b.width() {
        return Err(DiscError::WidthMismatch { left: a.width(), right: b.width() });
    }
    Ok(a.xor_count(b))
}

/// Range indices grouped by cardinality; bucket `s` holds the ranges of size
/// `s`. A candidate at distance at most `delta` from a member must sit within
/// `delta` buckets, which is what the greedy scans exploit.
pub fn bucket_by_size(sys: &SetSystem, indices: impl Iterator<Item = u32>) -> Vec<Vec<u32>> {
    let mut buckets = vec![Vec::new(); sys.n() + 1];
    for i in indices {
        buckets[sys.size(i as usize)].push(i);
    }
    buckets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomgen::{generate, InstanceKind, InstanceSpec};

    fn interval_system(n: usize) -> SetSystem {
        generate(&InstanceSpec::new(InstanceKind::Intervals1d, n, 0)).unwrap().sys
    }

    #[test]
    fn symmetric_difference_basic() {
        let a = BitSet::from_indices(8, &[0, 1, 2]);
        let b = BitSet::from_indices(8, &[2, 3]);
        assert_eq!(symmetric_difference_size(&a, &b).unwrap(), 3);
        assert_eq!(symmetric_difference_size(&a, &a).unwrap(), 0);
        let c = BitSet::new(9);
        assert!(symmetric_difference_size(&a, &c).is_err());
    }

    #[test]
    fn projection_collapses_traces() {
        // Intervals over four points, keep positions {0, 2}: the distinct
        // traces are {}, {0}, {2}, {0,2}.
        let sys = interval_system(4);
        let keep = BitSet::from_indices(4, &[0, 2]);
        let p = sys.project_detailed(&keep).unwrap();
        assert_eq!(p.sys.n(), 2);
        assert_eq!(p.sys.len(), 4);
        assert_eq!(p.old_to_new.len(), sys.len());
    }

    #[test]
    fn projection_on_full_ground_is_dedup() {
        let ranges = vec![
            BitSet::from_indices(5, &[0, 1]),
            BitSet::from_indices(5, &[0, 1]),
            BitSet::from_indices(5, &[2]),
        ];
        let sys = SetSystem::from_bitsets(5, ranges, false).unwrap();
        let p = sys.project(&BitSet::full(5)).unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn projection_onto_disjoint_subset_leaves_empty_trace() {
        let sys = SetSystem::from_bitsets(6, vec![BitSet::from_indices(6, &[1, 2])], false).unwrap();
        let p = sys.project(&BitSet::from_indices(6, &[3])).unwrap();
        assert_eq!(p.n(), 1);
        assert_eq!(p.len(), 1);
        assert_eq!(p.size(0), 0);
    }

    #[test]
    fn projection_of_empty_subset_is_degenerate() {
        let sys = interval_system(4);
        let p = sys.project(&BitSet::new(4)).unwrap();
        assert!(p.is_degenerate());
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn nested_projection_composes() {
        let sys = interval_system(12);
        let outer = BitSet::from_indices(12, &[1, 3, 4, 7, 9, 10]);
        let inner_orig = BitSet::from_indices(12, &[3, 7, 10]);
        let p1 = sys.project_detailed(&outer).unwrap();
        // Express the inner subset in the projected coordinates.
        let mut inner_reidx = BitSet::new(p1.sys.n());
        for (pos, &e) in p1.elements.iter().enumerate() {
            if inner_orig.contains(e as usize) {
                inner_reidx.insert(pos);
            }
        }
        let via_two = p1.sys.project(&inner_reidx).unwrap();
        let direct = sys.project(&inner_orig).unwrap();
        let mut a: Vec<Vec<u64>> = via_two.iter_ranges().map(|b| b.words().to_vec()).collect();
        let mut b: Vec<Vec<u64>> = direct.iter_ranges().map(|b| b.words().to_vec()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn interval_trace_count_is_exact() {
        // Any m-point subset of collinear points induces exactly
        // m(m+1)/2 + 1 interval traces, including the empty one.
        let sys = interval_system(8);
        let p = sys.measure_shatter(8, 4, 9).unwrap();
        assert_eq!(p.total_projections, 37);
        for m in [2usize, 3, 5, 7] {
            let p = sys.measure_shatter(m, 6, 13).unwrap();
            assert_eq!(p.total_projections, (m * (m + 1) / 2 + 1) as u64);
        }
    }

    #[test]
    fn single_point_subset_has_two_traces() {
        let sys = interval_system(6);
        let p = sys.measure_shatter(1, 8, 5).unwrap();
        assert_eq!(p.total_projections, 2);
        assert_eq!(p.by_size[0], 1);
        assert_eq!(p.by_size[1], 2);
    }

    #[test]
    fn halfplane_trace_count_obeys_quadratic_cap() {
        let inst = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 16, 3)).unwrap();
        let p = inst.sys.measure_shatter(16, 2, 1).unwrap();
        assert!(p.total_projections <= 16 * 15 + 2);
    }

    #[test]
    fn by_size_is_monotone_and_caps_at_total() {
        let sys = interval_system(16);
        let p = sys.measure_shatter(10, 5, 2).unwrap();
        assert!(p.by_size.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*p.by_size.last().unwrap(), p.total_projections);
    }

    #[test]
    fn shatter_rejects_degenerate_subset_sizes() {
        let sys = interval_system(8);
        assert!(sys.measure_shatter(0, 3, 1).is_err());
        assert!(sys.measure_shatter(9, 3, 1).is_err());
    }

    #[test]
    fn separation_test_matches_pairwise_distances() {
        let sys = SetSystem::from_bitsets(
            8,
            vec![
                BitSet::from_indices(8, &[0, 1, 2, 3]),
                BitSet::from_indices(8, &[4, 5, 6, 7]),
                BitSet::from_indices(8, &[0, 1, 2, 4]),
            ],
            false,
        )
        .unwrap();
        assert!(sys.is_delta_separated(&[0, 1], 7.0));
        assert!(!sys.is_delta_separated(&[0, 1], 8.0));
        assert!(!sys.is_delta_separated(&[0, 1, 2], 3.0));
        assert!(sys.is_delta_separated(&[0], 100.0));
    }

    #[test]
    fn exponent_fit_on_intervals_is_near_two_one_one() {
        let sys = interval_system(128);
        let fit = sys.fit_exponents(&[16, 32, 64, 128], 6, 17).unwrap();
        assert!((fit.d - 2.0).abs() < 0.25, "d = {}", fit.d);
        assert!((fit.d1 - 1.0).abs() < 0.35, "d1 = {}", fit.d1);
        assert!((fit.d2 - (fit.d - fit.d1)).abs() < 1e-9);
    }

    #[test]
    fn triangle_inequality_over_random_triples() {
        let mut rng = Rng::seeded(23);
        for _ in 0..1000 {
            let mk = |rng: &mut Rng| {
                let mut b = BitSet::new(96);
                for i in 0..96 {
                    if rng.below(2) == 1 {
                        b.insert(i);
                    }
                }
                b
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let ab = a.xor_count(&b);
            let bc = b.xor_count(&c);
            let ac = a.xor_count(&c);
            assert!(ac <= ab + bc);
            assert_eq!(ab, b.xor_count(&a));
        }
    }
}
