//! Multi-scale chain decompositions: a ladder of separated subfamilies, one
//! nearest-member link per family set per level, and per-(class, level) cells
//! of symmetric-difference pieces whose signed sums telescope exactly back to
//! every original range.

use std::collections::HashMap;

use serde::Serialize;

use crate::bits::BitSet;
use crate::error::{DiscError, Result};
use crate::rng::Rng;
use crate::setsystem::SetSystem;

/// Sentinel parent position for the virtual empty set at level zero.
pub const ROOT: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct ChainDecomposition {
    n: usize,
    k: usize,
    /// families[j] holds range indices for level j; level 0 is empty (the
    /// virtual root), level k lists every range.
    families: Vec<Vec<u32>>,
    /// links[j][p] = position in families[j-1] nearest to families[j][p]
    /// (ties to the lowest position); ROOT when the parent level is 0.
    links: Vec<Vec<u32>>,
    link_dist: Vec<Vec<u32>>,
    /// Size class per range: 1 (largest sets) through k (smallest/empty).
    classes: Vec<u32>,
}

/// One (class, level) cell of the auxiliary family: the deduplicated nonempty
/// difference sets contributed by the distinct level-j chain nodes of class-i
/// ranges, with node-unit multiplicities.
#[derive(Clone, Debug)]
pub struct Cell {
    pub class_i: u32,
    pub level_j: u32,
    /// Distinct level-j nodes over all class-i chains.
    pub node_count: u32,
    /// Always 2 * node_count: one A and one B entry per node, empties included.
    pub raw_entries: u32,
    pub sets: Vec<BitSet>,
    pub mult: Vec<u32>,
    pub max_set_size: u32,
}

#[derive(Clone, Debug)]
pub struct AuxiliarySystem {
    /// All nonempty cell sets, width n, duplicates across cells preserved.
    pub sys: SetSystem,
    /// (class, level) of each auxiliary range.
    pub cell_of: Vec<(u32, u32)>,
    pub mult: Vec<u32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub class_i: u32,
    pub level_j: u32,
    pub node_count: u32,
    pub raw_entries: u32,
    pub distinct_nonempty: u32,
    pub max_set_size: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertiesAudit {
    /// max over ranges and levels of |S symdiff node| / (4n / 2^(j-1)).
    pub max_dist_ratio: f64,
    /// max over chain nodes of |node| / (4n / 2^(i-1)).
    pub max_node_size_ratio: f64,
    /// max over cells of max_set_size / (4n / 2^(j-1)).
    pub max_cell_set_ratio: f64,
    /// max over ranges of |chain sum - chi(S)| for a fixed random sign vector.
    pub reconstruction_ok: bool,
    pub cells_raw_count_ok: bool,
}

fn scale(n: usize, j: u32) -> f64 {
    n as f64 / 2f64.powi(j as i32)
}

/// Number of levels: halving scales from n down to below 1.
pub fn level_count(n: usize) -> usize {
    let mut k = 1usize;
    while scale(n, k as u32) > 1.0 {
        k += 1;
    }
    k
}

/// Size class of a set of the given cardinality: the smallest i with
/// |S| >= n/2^i, clamped to [1, k]; empty sets land in class k.
pub fn size_class_of(n: usize, k: usize, size: usize) -> u32 {
    for i in 1..=k as u32 {
        if size as f64 >= scale(n, i) {
            return i;
        }
    }
    k as u32
}

struct GreedyFamily {
    members: Vec<u32>,
    /// Position in members if accepted, else u32::MAX.
    accepted_pos: Vec<u32>,
    /// Witness member position within delta for rejected candidates.
    witness: Vec<u32>,
}

fn greedy_family(sys: &SetSystem, delta: f64, order: &[u32]) -> GreedyFamily {
    let window = delta.max(0.0).floor() as usize;
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); sys.n() + 1];
    let mut members = Vec::new();
    let mut accepted_pos = vec![u32::MAX; sys.len()];
    let mut witness = vec![u32::MAX; sys.len()];
    for &r in order {
        let size = sys.size(r as usize);
        let lo = size.saturating_sub(window);
        let hi = (size + window).min(sys.n());
        let mut hit = u32::MAX;
        'scan: for bucket in &buckets[lo..=hi] {
            for &pos in bucket {
                let m = members[pos as usize];
                if (sys.dist(r as usize, m as usize) as f64) <= delta {
                    hit = pos;
                    break 'scan;
                }
            }
        }
        if hit == u32::MAX {
            let pos = members.len() as u32;
            members.push(r);
            buckets[size].push(pos);
            accepted_pos[r as usize] = pos;
        } else {
            witness[r as usize] = hit;
        }
    }
    GreedyFamily { members, accepted_pos, witness }
}

impl ChainDecomposition {
    /// Builds the full ladder: level k holds every range, intermediate levels
    /// are greedy maximal families separated at scale n/2^j in a seeded scan
    /// order, and every family set is linked to its nearest member one level
    /// down.
    pub fn build(sys: &SetSystem, seed: u64) -> Result<Self> {
        if sys.n() < 2 {
            return Err(DiscError::Precondition(
                "chain decomposition needs a ground set of size >= 2".into(),
            ));
        }
        if sys.is_empty() {
            return Err(DiscError::Precondition("no ranges to decompose".into()));
        }
        let n = sys.n();
        let k = level_count(n);
        let mut families: Vec<Vec<u32>> = Vec::with_capacity(k + 1);
        families.push(Vec::new());
        let mut greedy: Vec<Option<GreedyFamily>> = vec![None];
        for j in 1..k {
            let mut rng = Rng::derived(seed, &[0x6368_6169, j as u64]);
            let order = rng.permutation(sys.len());
            let fam = greedy_family(sys, scale(n, j as u32), &order);
            families.push(fam.members.clone());
            greedy.push(Some(fam));
        }
        families.push((0..sys.len() as u32).collect());

        let classes: Vec<u32> = (0..sys.len())
            .map(|r| size_class_of(n, k, sys.size(r)))
            .collect();

        let mut links: Vec<Vec<u32>> = vec![Vec::new(); k + 1];
        let mut link_dist: Vec<Vec<u32>> = vec![Vec::new(); k + 1];
        for j in 1..=k {
            let parent_members = &families[j - 1];
            // Bucket parent positions by cardinality for pruned scans.
            let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
            for (pos, &m) in parent_members.iter().enumerate() {
                buckets[sys.size(m as usize)].push(pos as u32);
            }
            let fam = &families[j];
            let mut lk = Vec::with_capacity(fam.len());
            let mut ld = Vec::with_capacity(fam.len());
            for &r in fam {
                if j == 1 {
                    lk.push(ROOT);
                    ld.push(sys.size(r as usize) as u32);
                    continue;
                }
                let g = greedy[j - 1].as_ref().unwrap();
                if g.accepted_pos[r as usize] != u32::MAX {
                    lk.push(g.accepted_pos[r as usize]);
                    ld.push(0);
                    continue;
                }
                let w = g.witness[r as usize];
                debug_assert_ne!(w, u32::MAX, "rejected candidate without witness");
                let mut best_dist =
                    sys.dist(r as usize, parent_members[w as usize] as usize) as u32;
                let mut best_pos = w;
                let size = sys.size(r as usize);
                let mut diff = 0usize;
                while diff <= best_dist as usize {
                    let mut scan = |bucket: &Vec<u32>| {
                        for &pos in bucket {
                            let d = sys
                                .dist(r as usize, parent_members[pos as usize] as usize)
                                as u32;
                            if d < best_dist || (d == best_dist && pos < best_pos) {
                                best_dist = d;
                                best_pos = pos;
                            }
                        }
                    };
                    if diff <= size {
                        scan(&buckets[size - diff]);
                    }
                    if diff > 0 && size + diff <= n {
                        scan(&buckets[size + diff]);
                    }
                    diff += 1;
                }
                let guarantee = scale(n, j as u32 - 1);
                if best_dist as f64 > guarantee {
                    return Err(DiscError::Internal(format!(
                        "link at level {j} has distance {best_dist} > scale {guarantee}"
                    )));
                }
                lk.push(best_pos);
                ld.push(best_dist);
            }
            links[j] = lk;
            link_dist[j] = ld;
        }
        Ok(ChainDecomposition { n, k, families, links, link_dist, classes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn families(&self) -> &[Vec<u32>] {
        &self.families
    }

    pub fn class_of(&self, r: usize) -> u32 {
        self.classes[r]
    }

    pub fn link(&self, j: usize, pos: u32) -> u32 {
        self.links[j][pos as usize]
    }

    pub fn link_distance(&self, j: usize, pos: u32) -> u32 {
        self.link_dist[j][pos as usize]
    }

    fn node_set(&self, sys: &SetSystem, j: usize, pos: u32) -> BitSet {
        if j == 0 || pos == ROOT {
            BitSet::new(self.n)
        } else {
            sys.range(self.families[j][pos as usize] as usize)
        }
    }

    /// Chain of range r: (level, family position) pairs from level k down to
    /// level class-1, ending at the virtual root position for class-1 ranges.
    pub fn chain_positions(&self, r: usize) -> Vec<(u32, u32)> {
        let i = self.classes[r] as usize;
        let mut out = Vec::with_capacity(self.k - i + 2);
        let mut pos = r as u32;
        let mut j = self.k;
        out.push((j as u32, pos));
        while j + 1 > i {
            // descend from level j to j-1 while j >= i
            pos = self.links[j][pos as usize];
            j -= 1;
            out.push((j as u32, pos));
        }
        out
    }

    /// Difference pieces of the chain of range r, ascending by level: the
    /// root entry (F_{i-1}, empty) first, then (F_j minus F_{j-1},
    /// F_{j-1} minus F_j) for j = i..k. Signed sums over these telescope to
    /// the signed sum over r exactly, for any assignment of values.
    pub fn chain_diffs(&self, sys: &SetSystem, r: usize) -> Vec<(u32, BitSet, BitSet)> {
        let chain = self.chain_positions(r);
        let i = self.classes[r] as usize;
        let mut out = Vec::with_capacity(chain.len());
        // chain is ordered k down to i-1; walk it backwards.
        let bottom = chain[chain.len() - 1];
        debug_assert_eq!(bottom.0 as usize, i - 1);
        out.push((
            bottom.0,
            self.node_set(sys, bottom.0 as usize, bottom.1),
            BitSet::new(self.n),
        ));
        for w in chain.windows(2).rev() {
            let (j, pos) = w[0];
            let (pj, ppos) = w[1];
            debug_assert_eq!(pj + 1, j);
            let upper = self.node_set(sys, j as usize, pos);
            let lower = self.node_set(sys, pj as usize, ppos);
            out.push((j, upper.minus(&lower), lower.minus(&upper)));
        }
        out
    }

    /// Folds the chain diffs back together; equals range r by construction.
    pub fn reconstruct(&self, sys: &SetSystem, r: usize) -> BitSet {
        let mut cur = BitSet::new(self.n);
        for (_, a, b) in self.chain_diffs(sys, r) {
            cur = cur.union(&a).minus(&b);
        }
        cur
    }

    /// All (class, level) cells in ascending (i, j) order.
    pub fn cells(&self, sys: &SetSystem) -> Vec<Cell> {
        let mut by_class: Vec<Vec<u32>> = vec![Vec::new(); self.k + 1];
        for r in 0..sys.len() {
            by_class[self.classes[r] as usize].push(r as u32);
        }
        let mut cells = Vec::new();
        for i in 1..=self.k {
            if by_class[i].is_empty() {
                continue;
            }
            // Distinct node positions at the current level, starting from the
            // class members themselves at level k.
            let mut positions: Vec<u32> = by_class[i].clone();
            let mut j = self.k;
            loop {
                let mut cell = Cell {
                    class_i: i as u32,
                    level_j: j as u32,
                    node_count: positions.len() as u32,
                    raw_entries: 2 * positions.len() as u32,
                    sets: Vec::new(),
                    mult: Vec::new(),
                    max_set_size: 0,
                };
                let mut index_of: HashMap<Vec<u64>, u32> = HashMap::new();
                let mut push_entry = |cell: &mut Cell, set: BitSet| {
                    let c = set.count() as u32;
                    if c == 0 {
                        return;
                    }
                    cell.max_set_size = cell.max_set_size.max(c);
                    match index_of.get(set.words()) {
                        Some(&idx) => cell.mult[idx as usize] += 1,
                        None => {
                            index_of.insert(set.words().to_vec(), cell.sets.len() as u32);
                            cell.sets.push(set);
                            cell.mult.push(1);
                        }
                    }
                };
                if j + 1 == i {
                    // Root cell: each bottom node enters whole, paired with
                    // the empty set.
                    for &p in &positions {
                        push_entry(&mut cell, self.node_set(sys, j, p));
                        // B entry is empty by definition; counted in
                        // raw_entries, never materialized.
                    }
                } else {
                    for &p in &positions {
                        let q = self.links[j][p as usize];
                        let upper = self.node_set(sys, j, p);
                        let lower = self.node_set(sys, j - 1, q);
                        push_entry(&mut cell, upper.minus(&lower));
                        push_entry(&mut cell, lower.minus(&upper));
                    }
                }
                cells.push(cell);
                if j + 1 == i {
                    break;
                }
                let mut parents: Vec<u32> =
                    positions.iter().map(|&p| self.links[j][p as usize]).collect();
                parents.sort_unstable();
                parents.dedup();
                positions = parents;
                j -= 1;
            }
        }
        cells
    }

    /// Flattens all cells into one set system for coloring. Duplicate sets
    /// across cells stay separate ranges (their budgets differ); duplicates
    /// within a cell were already merged.
    pub fn auxiliary_system(&self, sys: &SetSystem) -> AuxiliarySystem {
        let cells = self.cells(sys);
        let mut bitsets = Vec::new();
        let mut cell_of = Vec::new();
        let mut mult = Vec::new();
        for cell in &cells {
            for (s, &m) in cell.sets.iter().zip(&cell.mult) {
                bitsets.push(s.clone());
                cell_of.push((cell.class_i, cell.level_j));
                mult.push(m);
            }
        }
        let aux = SetSystem::from_bitsets(self.n, bitsets.into_iter(), false)
            .expect("cell sets share the decomposition width");
        AuxiliarySystem { sys: aux, cell_of, mult }
    }

    pub fn cell_summaries(&self, sys: &SetSystem) -> Vec<CellSummary> {
        self.cells(sys)
            .iter()
            .map(|c| CellSummary {
                class_i: c.class_i,
                level_j: c.level_j,
                node_count: c.node_count,
                raw_entries: c.raw_entries,
                distinct_nonempty: c.sets.len() as u32,
                max_set_size: c.max_set_size,
            })
            .collect()
    }

    /// Checks the structural guarantees with constant 4: chain nodes stay
    /// within 4n/2^(j-1) of their range, class-i nodes have size at most
    /// 4n/2^(i-1), cell sets have size at most 4n/2^(j-1), every range
    /// reconstructs exactly, and raw cell counts double the node counts.
    pub fn audit_properties(&self, sys: &SetSystem, sign_seed: u64) -> PropertiesAudit {
        let mut max_dist_ratio = 0f64;
        let mut max_node_size_ratio = 0f64;
        let mut reconstruction_ok = true;
        let mut rng = Rng::derived(sign_seed, &[0x6175_6469]);
        let signs: Vec<i64> =
            (0..self.n).map(|_| if rng.below(2) == 0 { -1 } else { 1 }).collect();
        for r in 0..sys.len() {
            let i = self.classes[r];
            let class_cap = 4.0 * scale(self.n, i) * 2.0;
            let target = sys.range(r);
            let mut chain_sum = 0i64;
            for (j, pos) in self.chain_positions(r) {
                let node = self.node_set(sys, j as usize, pos);
                let cap = 4.0 * scale(self.n, j) * 2.0;
                max_dist_ratio =
                    max_dist_ratio.max(target.xor_count(&node) as f64 / cap);
                max_node_size_ratio =
                    max_node_size_ratio.max(node.count() as f64 / class_cap);
            }
            for (_, a, b) in self.chain_diffs(sys, r) {
                let sa: i64 = a.iter_ones().map(|e| signs[e]).sum();
                let sb: i64 = b.iter_ones().map(|e| signs[e]).sum();
                chain_sum += sa - sb;
            }
            let direct: i64 = target.iter_ones().map(|e| signs[e]).sum();
            if chain_sum != direct || self.reconstruct(sys, r) != target {
                reconstruction_ok = false;
            }
        }
        let mut max_cell_set_ratio = 0f64;
        let mut cells_raw_count_ok = true;
        for cell in self.cells(sys) {
            let cap = 4.0 * scale(self.n, cell.level_j) * 2.0;
            max_cell_set_ratio = max_cell_set_ratio.max(cell.max_set_size as f64 / cap);
            if cell.raw_entries != 2 * cell.node_count {
                cells_raw_count_ok = false;
            }
        }
        PropertiesAudit {
            max_dist_ratio,
            max_node_size_ratio,
            max_cell_set_ratio,
            reconstruction_ok,
            cells_raw_count_ok,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomgen::{generate, InstanceKind, InstanceSpec};
    use crate::packing::{greedy_packing, packing_is_maximal};

    fn intervals(n: usize) -> SetSystem {
        generate(&InstanceSpec::new(InstanceKind::Intervals1d, n, 0)).unwrap().sys
    }

    fn all_subsets(n: usize) -> SetSystem {
        let sets = (0u64..(1 << n)).map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|&b| mask >> b & 1 == 1).collect();
            BitSet::from_indices(n, &idx)
        });
        SetSystem::from_bitsets(n, sets, true).unwrap()
    }

    #[test]
    fn level_count_and_classes() {
        assert_eq!(level_count(64), 6);
        assert_eq!(level_count(48), 6);
        assert_eq!(level_count(2), 1);
        let (n, k) = (64, 6);
        assert_eq!(size_class_of(n, k, 64), 1);
        assert_eq!(size_class_of(n, k, 32), 1);
        assert_eq!(size_class_of(n, k, 31), 2);
        assert_eq!(size_class_of(n, k, 1), 6);
        assert_eq!(size_class_of(n, k, 0), 6);
    }

    #[test]
    fn families_are_separated_and_maximal() {
        let sys = intervals(64);
        let dec = ChainDecomposition::build(&sys, 11).unwrap();
        let k = dec.k();
        assert_eq!(dec.families()[0].len(), 0);
        assert_eq!(dec.families()[k].len(), sys.len());
        for j in 1..k {
            let fam = &dec.families()[j];
            let delta = 64.0 / 2f64.powi(j as i32);
            assert!(sys.is_delta_separated(fam, delta), "level {j} not separated");
            let covered = (0..sys.len()).all(|r| {
                fam.iter().any(|&m| (sys.dist(r, m as usize) as f64) <= delta)
            });
            assert!(covered, "level {j} not maximal");
        }
    }

    #[test]
    fn links_are_nearest_with_lowest_position_ties() {
        let sys = intervals(32);
        let dec = ChainDecomposition::build(&sys, 3).unwrap();
        for j in 2..=dec.k() {
            let parents = &dec.families()[j - 1];
            for (pos, &r) in dec.families()[j].iter().enumerate() {
                let mut best = (u32::MAX, u32::MAX);
                for (q, &m) in parents.iter().enumerate() {
                    let d = sys.dist(r as usize, m as usize) as u32;
                    if d < best.0 {
                        best = (d, q as u32);
                    }
                }
                assert_eq!(dec.link(j, pos as u32), best.1, "level {j} pos {pos}");
                assert_eq!(dec.link_distance(j, pos as u32), best.0);
            }
        }
    }

    #[test]
    fn reconstruction_is_exact_everywhere() {
        for sys in [
            intervals(64),
            generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 16, 5)).unwrap().sys,
        ] {
            let dec = ChainDecomposition::build(&sys, 7).unwrap();
            for r in 0..sys.len() {
                assert_eq!(dec.reconstruct(&sys, r), sys.range(r), "range {r}");
            }
        }
    }

    #[test]
    fn telescoping_matches_direct_signed_sums() {
        let sys = intervals(48);
        let dec = ChainDecomposition::build(&sys, 2).unwrap();
        for seed in 0..20u64 {
            let mut rng = Rng::derived(seed, &[99]);
            let signs: Vec<i64> =
                (0..48).map(|_| if rng.below(2) == 0 { -1 } else { 1 }).collect();
            for r in 0..sys.len() {
                let direct: i64 = sys.range(r).iter_ones().map(|e| signs[e]).sum();
                let mut total = 0i64;
                for (_, a, b) in dec.chain_diffs(&sys, r) {
                    let sa: i64 = a.iter_ones().map(|e| signs[e]).sum();
                    let sb: i64 = b.iter_ones().map(|e| signs[e]).sum();
                    total += sa - sb;
                }
                assert_eq!(total, direct, "seed {seed} range {r}");
            }
        }
    }

    #[test]
    fn structural_audit_passes_with_constant_four() {
        for (sys, tag) in [
            (intervals(64), "intervals"),
            (
                generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 32, 1)).unwrap().sys,
                "halfplanes",
            ),
        ] {
            let dec = ChainDecomposition::build(&sys, 5).unwrap();
            let audit = dec.audit_properties(&sys, 17);
            assert!(audit.max_dist_ratio <= 1.0, "{tag}: {audit:?}");
            assert!(audit.max_node_size_ratio <= 1.0, "{tag}: {audit:?}");
            assert!(audit.max_cell_set_ratio <= 1.0, "{tag}: {audit:?}");
            assert!(audit.reconstruction_ok && audit.cells_raw_count_ok, "{tag}");
        }
    }

    #[test]
    fn cells_count_nodes_and_drop_empties() {
        let sys = intervals(64);
        let dec = ChainDecomposition::build(&sys, 9).unwrap();
        let cells = dec.cells(&sys);
        assert!(!cells.is_empty());
        for cell in &cells {
            assert_eq!(cell.raw_entries, 2 * cell.node_count);
            assert_eq!(cell.sets.len(), cell.mult.len());
            let entries: u32 = cell.mult.iter().sum();
            assert!(entries <= cell.raw_entries);
            assert!(cell.level_j + 1 >= cell.class_i);
            for s in &cell.sets {
                assert!(!s.is_empty());
            }
        }
        // Level-k cells exist for every populated class.
        let classes: std::collections::HashSet<u32> =
            (0..sys.len()).map(|r| dec.class_of(r)).collect();
        for &i in &classes {
            assert!(cells
                .iter()
                .any(|c| c.class_i == i && c.level_j == dec.k() as u32));
        }
    }

    #[test]
    fn auxiliary_system_is_deterministic_and_nonempty() {
        let sys = intervals(64);
        let a = ChainDecomposition::build(&sys, 4).unwrap().auxiliary_system(&sys);
        let b = ChainDecomposition::build(&sys, 4).unwrap().auxiliary_system(&sys);
        assert_eq!(a.sys.len(), b.sys.len());
        for r in 0..a.sys.len() {
            assert_eq!(a.sys.range(r), b.sys.range(r));
            assert!(a.sys.size(r) > 0);
        }
        assert_eq!(a.cell_of, b.cell_of);
        assert_eq!(a.mult, b.mult);
    }

    #[test]
    fn hypercube_greedy_family_is_maximal_but_order_sized() {
        let sys = all_subsets(4);
        assert_eq!(sys.len(), 16);
        for seed in 0..8u64 {
            let p = greedy_packing(&sys, 1.0, seed, None);
            assert!(packing_is_maximal(&sys, &p), "seed {seed}");
            assert!(
                (4..=8).contains(&p.members.len()),
                "seed {seed}: size {}",
                p.members.len()
            );
        }
    }

    #[test]
    fn build_rejects_degenerate_inputs() {
        let sys = intervals(64);
        assert!(ChainDecomposition::build(&sys, 0).is_ok());
        let tiny = SetSystem::from_bitsets(1, std::iter::once(BitSet::new(1)), true).unwrap();
        assert!(ChainDecomposition::build(&tiny, 0).is_err());
        let empty = SetSystem::new(8);
        assert!(ChainDecomposition::build(&empty, 0).is_err());
    }
}
