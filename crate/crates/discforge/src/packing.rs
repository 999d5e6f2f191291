//! Greedy separated packings, unit-distance graphs over range families, and
//! the weighted-edge sampling experiment that stress-tests the sparsity of
//! those graphs.

use std::collections::HashMap;

use serde::Serialize;

use crate::bits::BitSet;
use crate::error::{DiscError, Result};
use crate::rng::Rng;
use crate::setsystem::SetSystem;

#[derive(Clone, Debug)]
pub struct Packing {
    pub delta: f64,
    /// Indices into the source system, in greedy acceptance order.
    pub members: Vec<u32>,
    /// Inclusive cardinality window applied to candidates, if any.
    pub size_class: Option<(f64, f64)>,
}

/// Maximal family of pairwise more-than-delta-separated ranges, built by a
/// seeded greedy scan. Size is order-dependent; separation and maximality
/// (relative to the candidate pool) are not.
pub fn greedy_packing(
    sys: &SetSystem,
    delta: f64,
    order_seed: u64,
    size_class: Option<(f64, f64)>,
) -> Packing {
    let mut rng = Rng::derived(order_seed, &[0x7061_636b]);
    let order = rng.permutation(sys.len());
    // A conflict needs distance <= delta, hence cardinalities within
    // floor(delta) of each other; bucketing members by size prunes the scan.
    let window = delta.max(0.0).floor() as usize;
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); sys.n() + 1];
    let mut members = Vec::new();
    for &r in &order {
        let size = sys.size(r as usize);
        if let Some((lo, hi)) = size_class {
            let s = size as f64;
            if s < lo || s > hi {
                continue;
            }
        }
        let lo = size.saturating_sub(window);
        let hi = (size + window).min(sys.n());
        let mut conflict = false;
        'scan: for bucket in &buckets[lo..=hi] {
            for &m in bucket {
                if (sys.dist(r as usize, m as usize) as f64) <= delta {
                    conflict = true;
                    break 'scan;
                }
            }
        }
        if !conflict {
            buckets[size].push(r);
            members.push(r);
        }
    }
    Packing { delta, members, size_class }
}

/// True when every pool candidate outside the packing sits within delta of
/// some member (and members themselves are pairwise separated).
pub fn packing_is_maximal(sys: &SetSystem, packing: &Packing) -> bool {
    if !sys.is_delta_separated(&packing.members, packing.delta) {
        return false;
    }
    let member_set: std::collections::HashSet<u32> = packing.members.iter().copied().collect();
    for r in 0..sys.len() {
        if let Some((lo, hi)) = packing.size_class {
            let s = sys.size(r) as f64;
            if s < lo || s > hi {
                continue;
            }
        }
        if member_set.contains(&(r as u32)) {
            continue;
        }
        let covered = packing
            .members
            .iter()
            .any(|&m| (sys.dist(r, m as usize) as f64) <= packing.delta);
        if !covered {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug)]
pub struct WeightedUdGraph {
    pub vertices: Vec<(BitSet, u64)>,
    /// (u, v, weight) with weight = min of the endpoint weights.
    pub edges: Vec<(u32, u32, u64)>,
    pub total_edge_weight: u64,
}

impl WeightedUdGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Graph on distinct bitsets with edges exactly between pairs at Hamming
/// distance one. Distance-one pairs differ by one element, so only adjacent
/// cardinality buckets are compared.
pub fn build_ud_graph(ranges: &[BitSet], weights: Option<&[u64]>) -> Result<WeightedUdGraph> {
    if let Some(w) = weights {
        if w.len() != ranges.len() {
            return Err(DiscError::Precondition(format!(
                "{} weights for {} vertices",
                w.len(),
                ranges.len()
            )));
        }
    }
    let width = ranges.first().map(|b| b.width()).unwrap_or(0);
    let mut seen: HashMap<&[u64], ()> = HashMap::new();
    for (i, b) in ranges.iter().enumerate() {
        if b.width() != width {
            return Err(DiscError::WidthMismatch { left: b.width(), right: width });
        }
        if seen.insert(b.words(), ()).is_some() {
            return Err(DiscError::Precondition(format!(
                "duplicate vertex at position {i}"
            )));
        }
    }
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); width + 1];
    for (i, b) in ranges.iter().enumerate() {
        buckets[b.count()].push(i as u32);
    }
    let weight_of = |i: u32| weights.map(|w| w[i as usize]).unwrap_or(1);
    let mut edges = Vec::new();
    let mut total = 0u64;
    for s in 0..width {
        for &u in &buckets[s] {
            for &v in &buckets[s + 1] {
                if ranges[u as usize].xor_count(&ranges[v as usize]) == 1 {
                    let w = weight_of(u).min(weight_of(v));
                    edges.push((u, v, w));
                    total += w;
                }
            }
        }
    }
    let vertices = ranges
        .iter()
        .enumerate()
        .map(|(i, b)| (b.clone(), weight_of(i as u32)))
        .collect();
    Ok(WeightedUdGraph { vertices, edges, total_edge_weight: total })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub delta: f64,
    pub l: usize,
    pub p: f64,
    pub seed: u64,
    /// Packing size M.
    pub packing_size: usize,
    pub sample_size: usize,
    /// Distinct projected traces.
    pub vertex_count: usize,
    pub edge_count: usize,
    /// Total minimum-endpoint edge weight W.
    pub total_edge_weight: u64,
    /// Members whose sampled trace exceeds the overshoot threshold.
    pub overshoot_count: usize,
    pub overshoot_threshold: f64,
    pub d_assumed: usize,
    /// W <= 2 * d_assumed * M.
    pub weight_bound_ok: bool,
}

/// End-to-end experiment: build a packing of near-l ranges, sample each
/// ground element with probability p, project the packing onto the sample,
/// and measure the weighted unit-distance graph of the projection. The
/// overshoot statistic counts members whose sampled trace exceeds
/// 1.01e * l * p elements.
pub fn packing_experiment(
    sys: &SetSystem,
    delta: f64,
    l: usize,
    p: f64,
    seed: u64,
    d_assumed: usize,
) -> Result<ExperimentRecord> {
    if l < 1 || delta <= 0.0 {
        return Err(DiscError::Precondition(
            "experiment needs delta > 0 and l >= 1".into(),
        ));
    }
    let p = p.clamp(0.0, 1.0);
    let size_class = (l as f64 * 0.9, l as f64 * 1.1);
    let packing = greedy_packing(sys, delta, seed, Some(size_class));
    let m = packing.members.len();

    let mut rng = Rng::derived(seed, &[0x7361_6d70]);
    let mut sample = BitSet::new(sys.n().max(1));
    for e in 0..sys.n() {
        if rng.unit_f64() < p {
            sample.insert(e);
        }
    }
    let sample_size = sample.count();

    // Project members onto the sample, collapsing identical traces and
    // counting multiplicity as the trace weight.
    let mut index_of: HashMap<Vec<u64>, u32> = HashMap::new();
    let mut traces: Vec<BitSet> = Vec::new();
    let mut weights: Vec<u64> = Vec::new();
    let mut overshoot_count = 0usize;
    let threshold = 1.01 * std::f64::consts::E * l as f64 * p;
    for &r in &packing.members {
        let trace = sys.range(r as usize).intersect(&sample);
        if trace.count() as f64 > threshold {
            overshoot_count += 1;
        }
        match index_of.get(trace.words()) {
            Some(&i) => weights[i as usize] += 1,
            None => {
                index_of.insert(trace.words().to_vec(), traces.len() as u32);
                traces.push(trace);
                weights.push(1);
            }
        }
    }
    let graph = build_ud_graph(&traces, Some(&weights))?;
    let weight_bound_ok = graph.total_edge_weight <= 2 * d_assumed as u64 * m as u64;
    Ok(ExperimentRecord {
        n: sys.n(),
        delta,
        l,
        p,
        seed,
        packing_size: m,
        sample_size,
        vertex_count: graph.vertex_count(),
        edge_count: graph.edge_count(),
        total_edge_weight: graph.total_edge_weight,
        overshoot_count,
        overshoot_threshold: threshold,
        d_assumed,
        weight_bound_ok,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCell {
    pub delta: f64,
    pub l: usize,
    pub denominator: f64,
    pub packing_sizes: Vec<usize>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub d1: u32,
    pub d2: u32,
    pub cells: Vec<BoundCell>,
}

/// Measures packing sizes against the size-sensitive reference quantity
/// (n/delta)^d1 * (l/delta)^d2 over a (delta, l) grid and a set of greedy
/// order seeds. Ratios are reported, never asserted.
pub fn check_size_sensitive_bound(
    sys: &SetSystem,
    d1: u32,
    d2: u32,
    deltas: &[f64],
    ls: &[usize],
    seeds: &[u64],
) -> Result<BoundReport> {
    for &delta in deltas {
        if delta <= 0.0 {
            return Err(DiscError::Precondition("delta must be positive".into()));
        }
        for &l in ls {
            if (l as f64) < delta {
                return Err(DiscError::Precondition(format!(
                    "size target l = {l} below separation delta = {delta}"
                )));
            }
        }
    }
    if seeds.is_empty() {
        return Err(DiscError::Precondition("need at least one seed".into()));
    }
    let n = sys.n() as f64;
    let mut cells = Vec::new();
    for &delta in deltas {
        for &l in ls {
            let denominator = (n / delta).powi(d1 as i32) * (l as f64 / delta).powi(d2 as i32);
            let mut sizes = Vec::new();
            let mut ratios = Vec::new();
            for &seed in seeds {
                let size_class = (l as f64 * 0.9, l as f64 * 1.1);
                let p = greedy_packing(sys, delta, seed, Some(size_class));
                sizes.push(p.members.len());
                ratios.push(p.members.len() as f64 / denominator);
            }
            let max_ratio = ratios.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            cells.push(BoundCell { delta, l, denominator, packing_sizes: sizes, ratios, max_ratio });
        }
    }
    Ok(BoundReport { n: sys.n(), d1, d2, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomgen::{generate, InstanceKind, InstanceSpec};

    fn intervals(n: usize) -> SetSystem {
        generate(&InstanceSpec::new(InstanceKind::Intervals1d, n, 0)).unwrap().sys
    }

    #[test]
    fn packing_members_are_separated_and_maximal() {
        let sys = intervals(32);
        for seed in 0..5u64 {
            let p = greedy_packing(&sys, 4.0, seed, None);
            assert!(packing_is_maximal(&sys, &p));
        }
    }

    #[test]
    fn full_separation_leaves_single_member() {
        let sys = intervals(16);
        let p = greedy_packing(&sys, 16.0, 1, None);
        assert_eq!(p.members.len(), 1);
    }

    #[test]
    fn empty_candidate_pool_gives_empty_packing() {
        let sys = intervals(16);
        // No interval has size in [100, 110].
        let p = greedy_packing(&sys, 2.0, 1, Some((100.0, 110.0)));
        assert!(p.members.is_empty());
    }

    #[test]
    fn size_class_filters_candidates() {
        let sys = intervals(32);
        let p = greedy_packing(&sys, 2.0, 3, Some((7.2, 8.8)));
        assert!(!p.members.is_empty());
        for &m in &p.members {
            assert_eq!(sys.size(m as usize), 8);
        }
    }

    #[test]
    fn ud_graph_of_interval_family_matches_brute_force() {
        let sys = intervals(8);
        let ranges: Vec<BitSet> = sys.iter_ranges().collect();
        let g = build_ud_graph(&ranges, None).unwrap();
        let mut brute = 0;
        for i in 0..ranges.len() {
            for j in (i + 1)..ranges.len() {
                if ranges[i].xor_count(&ranges[j]) == 1 {
                    brute += 1;
                }
            }
        }
        assert_eq!(g.edge_count(), brute);
        // 2 shrink moves per interval of size >= 2, plus 8 empty-singleton
        // pairs: 2 * 28 + 8.
        assert_eq!(g.edge_count(), 64);
        assert!(g.edge_count() <= 2 * g.vertex_count());
    }

    #[test]
    fn ud_graph_rejects_duplicates_and_mixed_widths() {
        let a = BitSet::from_indices(8, &[1]);
        let b = BitSet::from_indices(8, &[1]);
        assert!(build_ud_graph(&[a.clone(), b], None).is_err());
        let c = BitSet::from_indices(9, &[1]);
        assert!(build_ud_graph(&[a, c], None).is_err());
    }

    #[test]
    fn ud_graph_weights_take_min_endpoint() {
        let verts = vec![
            BitSet::from_indices(4, &[0]),
            BitSet::from_indices(4, &[0, 1]),
            BitSet::from_indices(4, &[2]),
        ];
        let g = build_ud_graph(&verts, Some(&[5, 3, 9])).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges[0], (0, 1, 3));
        assert_eq!(g.total_edge_weight, 3);
    }

    #[test]
    fn experiment_weight_bound_holds_on_intervals() {
        let sys = intervals(64);
        for seed in 0..10u64 {
            let rec = packing_experiment(&sys, 8.0, 16, 0.5, seed, 2).unwrap();
            assert!(rec.weight_bound_ok, "seed {seed}: {rec:?}");
            assert!(rec.vertex_count <= rec.packing_size.max(1));
        }
    }

    #[test]
    fn experiment_with_full_sample_keeps_traces_identical() {
        let sys = intervals(64);
        let rec = packing_experiment(&sys, 8.0, 16, 1.0, 7, 2).unwrap();
        assert_eq!(rec.sample_size, 64);
        assert_eq!(rec.vertex_count, rec.packing_size);
    }

    #[test]
    fn experiment_with_empty_sample_collapses_to_a_point() {
        let sys = intervals(64);
        let rec = packing_experiment(&sys, 8.0, 16, 0.0, 7, 2).unwrap();
        assert_eq!(rec.sample_size, 0);
        assert!(rec.vertex_count <= 1);
        assert_eq!(rec.total_edge_weight, 0);
    }

    #[test]
    fn bound_report_covers_grid_and_rejects_bad_cells() {
        let sys = intervals(64);
        let rep = check_size_sensitive_bound(&sys, 1, 1, &[8.0], &[16], &[1, 2, 3]).unwrap();
        assert_eq!(rep.cells.len(), 1);
        assert_eq!(rep.cells[0].ratios.len(), 3);
        assert!(rep.cells[0].max_ratio > 0.0);
        assert!(check_size_sensitive_bound(&sys, 1, 1, &[8.0], &[4], &[1]).is_err());
    }
}
