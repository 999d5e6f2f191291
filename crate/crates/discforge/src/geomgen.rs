//! Seeded geometric instance generators plus a line-oriented file format.
//!
//! Points are sampled on the integer grid [0, 2^20) per axis and all side
//! tests are exact integer determinants, so instance construction never
//! touches floating point and reproduces bit-for-bit from (kind, n, seed).

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::bits::BitSet;
use crate::error::{DiscError, Result};
use crate::rng::Rng;
use crate::setsystem::SetSystem;

pub const GRID_BITS: u32 = 20;
const MAX_RETRIES: usize = 16;
/// Supporting-plane enumeration in 3d anchors on a fixed-size point prefix to
/// keep family sizes polynomial at desk scale.
pub const ANCHOR_CAP_3D: usize = 24;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum InstanceKind {
    Intervals1d,
    Halfplanes2d,
    Halfspaces3d,
    Rects2d,
    FromFile,
}

impl InstanceKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "intervals-1d" => InstanceKind::Intervals1d,
            "halfplanes-2d" => InstanceKind::Halfplanes2d,
            "halfspaces-3d" => InstanceKind::Halfspaces3d,
            "rects-2d" => InstanceKind::Rects2d,
            "from-file" => InstanceKind::FromFile,
            other => {
                return Err(DiscError::Parse {
                    line: 0,
                    msg: format!("unknown instance kind '{other}'"),
                })
            }
        })
    }

    pub fn geometric_kinds() -> [InstanceKind; 4] {
        [
            InstanceKind::Intervals1d,
            InstanceKind::Halfplanes2d,
            InstanceKind::Halfspaces3d,
            InstanceKind::Rects2d,
        ]
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InstanceKind::Intervals1d => "intervals-1d",
            InstanceKind::Halfplanes2d => "halfplanes-2d",
            InstanceKind::Halfspaces3d => "halfspaces-3d",
            InstanceKind::Rects2d => "rects-2d",
            InstanceKind::FromFile => "from-file",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    pub n: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
}

impl InstanceSpec {
    pub fn new(kind: InstanceKind, n: usize, seed: u64) -> Self {
        InstanceSpec { kind, n, seed, path: None }
    }

    pub fn from_file(path: PathBuf) -> Self {
        InstanceSpec { kind: InstanceKind::FromFile, n: 0, seed: 0, path: Some(path) }
    }
}

/// Trace-count growth exponents that hold for a generator family by
/// construction (total ~ m^d, size-bounded ~ m^d1 k^d2).
#[derive(Clone, Copy, Debug)]
pub struct KnownDims {
    pub d: u32,
    pub d1: u32,
    pub d2: u32,
}

pub struct Instance {
    pub sys: SetSystem,
    pub points2: Option<Vec<[i64; 2]>>,
    pub points3: Option<Vec<[i64; 3]>>,
    pub dims: Option<KnownDims>,
}

#[inline]
pub fn orient2d(p: [i64; 2], q: [i64; 2], r: [i64; 2]) -> i64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

#[inline]
pub fn orient3d(a: [i64; 3], b: [i64; 3], c: [i64; 3], d: [i64; 3]) -> i128 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    let m = |x: i64| x as i128;
    m(u[0]) * (m(v[1]) * m(w[2]) - m(v[2]) * m(w[1]))
        - m(u[1]) * (m(v[0]) * m(w[2]) - m(v[2]) * m(w[0]))
        + m(u[2]) * (m(v[0]) * m(w[1]) - m(v[1]) * m(w[0]))
}

pub fn generate(spec: &InstanceSpec) -> Result<Instance> {
    match spec.kind {
        InstanceKind::Intervals1d => {
            if spec.n < 1 {
                return Err(DiscError::Precondition("intervals-1d needs n >= 1".into()));
            }
            Ok(Instance {
                sys: interval_traces(spec.n)?,
                points2: None,
                points3: None,
                dims: Some(KnownDims { d: 2, d1: 1, d2: 1 }),
            })
        }
        InstanceKind::Halfplanes2d => {
            if spec.n < 2 {
                return Err(DiscError::Precondition("halfplanes-2d needs n >= 2".into()));
            }
            let pts = sample_points2(spec.n, spec.seed)?;
            Ok(Instance {
                sys: halfplane_traces(&pts)?,
                points2: Some(pts),
                points3: None,
                dims: Some(KnownDims { d: 2, d1: 1, d2: 1 }),
            })
        }
        InstanceKind::Halfspaces3d => {
            if spec.n < 2 {
                return Err(DiscError::Precondition("halfspaces-3d needs n >= 2".into()));
            }
            let pts = sample_points3(spec.n, spec.seed)?;
            Ok(Instance {
                sys: halfspace_traces(&pts)?,
                points2: None,
                points3: Some(pts),
                dims: Some(KnownDims { d: 3, d1: 1, d2: 2 }),
            })
        }
        InstanceKind::Rects2d => {
            if spec.n < 2 {
                return Err(DiscError::Precondition("rects-2d needs n >= 2".into()));
            }
            let pts = sample_points2_distinct_coords(spec.n, spec.seed)?;
            Ok(Instance {
                sys: rect_traces(&pts)?,
                points2: Some(pts),
                points3: None,
                dims: Some(KnownDims { d: 2, d1: 1, d2: 1 }),
            })
        }
        InstanceKind::FromFile => {
            let path = spec.path.as_ref().ok_or_else(|| {
                DiscError::Precondition("from-file requires a path".into())
            })?;
            Ok(Instance { sys: load(path)?, points2: None, points3: None, dims: None })
        }
    }
}

/// All interval traces on n collinear points: the empty set plus every
/// contiguous run [a, b]. Exactly n(n+1)/2 + 1 distinct ranges.
fn interval_traces(n: usize) -> Result<SetSystem> {
    let mut ranges = Vec::with_capacity(n * (n + 1) / 2 + 1);
    ranges.push(BitSet::new(n));
    for a in 0..n {
        let mut run = BitSet::new(n);
        for b in a..n {
            run.insert(b);
            ranges.push(run.clone());
        }
    }
    SetSystem::from_bitsets(n, ranges, true)
}

/// Full family of halfplane traces on points in general position. Every
/// trace is witnessed by a line through two points: the open side plus any
/// subset of the two boundary points (tiny rotations/translations realize
/// each of the four variants), together with the empty set and the whole
/// ground set.
fn halfplane_traces(pts: &[[i64; 2]]) -> Result<SetSystem> {
    let n = pts.len();
    let mut ranges = vec![BitSet::new(n), BitSet::full(n)];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut open_side = BitSet::new(n);
            for (r, p) in pts.iter().enumerate() {
                if orient2d(pts[i], pts[j], *p) > 0 {
                    open_side.insert(r);
                }
            }
            let mut with_i = open_side.clone();
            with_i.insert(i);
            let mut with_j = open_side.clone();
            with_j.insert(j);
            let mut with_both = with_i.clone();
            with_both.insert(j);
            ranges.push(open_side);
            ranges.push(with_i);
            ranges.push(with_j);
            ranges.push(with_both);
        }
    }
    SetSystem::from_bitsets(n, ranges, true)
}

/// Halfspace traces in 3d, anchored on supporting planes through triples of
/// the first `ANCHOR_CAP_3D` points (all n points are classified against each
/// plane). For n <= 3 every subset is realizable and emitted directly.
fn halfspace_traces(pts: &[[i64; 3]]) -> Result<SetSystem> {
    let n = pts.len();
    if n <= 3 {
        let mut ranges = Vec::new();
        for mask in 0..(1usize << n) {
            let mut b = BitSet::new(n);
            for (i, _) in pts.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    b.insert(i);
                }
            }
            ranges.push(b);
        }
        return SetSystem::from_bitsets(n, ranges, true);
    }
    let anchors = n.min(ANCHOR_CAP_3D);
    let mut ranges = vec![BitSet::new(n), BitSet::full(n)];
    for a in 0..anchors {
        for b in (a + 1)..anchors {
            for c in (b + 1)..anchors {
                let mut pos = BitSet::new(n);
                let mut neg = BitSet::new(n);
                for (r, p) in pts.iter().enumerate() {
                    let o = orient3d(pts[a], pts[b], pts[c], *p);
                    if o > 0 {
                        pos.insert(r);
                    } else if o < 0 {
                        neg.insert(r);
                    }
                }
                for side in [pos, neg] {
                    for mask in 0..8usize {
                        let mut v = side.clone();
                        if mask & 1 == 1 {
                            v.insert(a);
                        }
                        if mask & 2 == 2 {
                            v.insert(b);
                        }
                        if mask & 4 == 4 {
                            v.insert(c);
                        }
                        ranges.push(v);
                    }
                }
            }
        }
    }
    SetSystem::from_bitsets(n, ranges, true)
}

/// Axis-parallel rectangle traces spanned by point pairs (plus singleton
/// boxes, the empty set, and the whole cloud). Sound by construction: each
/// range equals the set of points inside its own bounding box.
fn rect_traces(pts: &[[i64; 2]]) -> Result<SetSystem> {
    let n = pts.len();
    let mut ranges = vec![BitSet::new(n), BitSet::full(n)];
    for i in 0..n {
        for j in i..n {
            let lo = [pts[i][0].min(pts[j][0]), pts[i][1].min(pts[j][1])];
            let hi = [pts[i][0].max(pts[j][0]), pts[i][1].max(pts[j][1])];
            let mut b = BitSet::new(n);
            for (r, p) in pts.iter().enumerate() {
                if p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1] {
                    b.insert(r);
                }
            }
            ranges.push(b);
        }
    }
    SetSystem::from_bitsets(n, ranges, true)
}

fn sample_points2(n: usize, seed: u64) -> Result<Vec<[i64; 2]>> {
    let grid = 1i64 << GRID_BITS;
    for retry in 0..MAX_RETRIES {
        let mut rng = Rng::derived(seed, &[0x3267_656e, retry as u64]);
        let pts: Vec<[i64; 2]> = (0..n)
            .map(|_| [rng.below(grid as u64) as i64, rng.below(grid as u64) as i64])
            .collect();
        if points_in_general_position_2d(&pts) {
            return Ok(pts);
        }
    }
    Err(DiscError::Generation(format!(
        "could not sample {n} points in general position after {MAX_RETRIES} retries"
    )))
}

fn sample_points3(n: usize, seed: u64) -> Result<Vec<[i64; 3]>> {
    let grid = 1i64 << GRID_BITS;
    for retry in 0..MAX_RETRIES {
        let mut rng = Rng::derived(seed, &[0x3367_656e, retry as u64]);
        let pts: Vec<[i64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.below(grid as u64) as i64,
                    rng.below(grid as u64) as i64,
                    rng.below(grid as u64) as i64,
                ]
            })
            .collect();
        if points_in_general_position_3d(&pts, n.min(ANCHOR_CAP_3D)) {
            return Ok(pts);
        }
    }
    Err(DiscError::Generation(format!(
        "could not sample {n} 3d points in general position after {MAX_RETRIES} retries"
    )))
}

fn sample_points2_distinct_coords(n: usize, seed: u64) -> Result<Vec<[i64; 2]>> {
    let grid = 1i64 << GRID_BITS;
    for retry in 0..MAX_RETRIES {
        let mut rng = Rng::derived(seed, &[0x7263_7473, retry as u64]);
        let pts: Vec<[i64; 2]> = (0..n)
            .map(|_| [rng.below(grid as u64) as i64, rng.below(grid as u64) as i64])
            .collect();
        let mut xs: Vec<i64> = pts.iter().map(|p| p[0]).collect();
        let mut ys: Vec<i64> = pts.iter().map(|p| p[1]).collect();
        xs.sort_unstable();
        ys.sort_unstable();
        let distinct = xs.windows(2).all(|w| w[0] != w[1]) && ys.windows(2).all(|w| w[0] != w[1]);
        if distinct {
            return Ok(pts);
        }
    }
    Err(DiscError::Generation(format!(
        "could not sample {n} points with distinct coordinates after {MAX_RETRIES} retries"
    )))
}

/// Distinct points, no three collinear. Slope-multiset check around each
/// pivot keeps this O(n^2 log n).
pub fn points_in_general_position_2d(pts: &[[i64; 2]]) -> bool {
    let mut seen = HashSet::new();
    for p in pts {
        if !seen.insert(*p) {
            return false;
        }
    }
    for (i, p) in pts.iter().enumerate() {
        let mut dirs: Vec<(i64, i64)> = Vec::with_capacity(pts.len() - 1);
        for (j, q) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let (mut dx, mut dy) = (q[0] - p[0], q[1] - p[1]);
            let g = gcd(dx.unsigned_abs(), dy.unsigned_abs()) as i64;
            dx /= g;
            dy /= g;
            if dx < 0 || (dx == 0 && dy < 0) {
                dx = -dx;
                dy = -dy;
            }
            dirs.push((dx, dy));
        }
        dirs.sort_unstable();
        if dirs.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
    }
    true
}

/// Distinct points and no further point coplanar with any anchor triple.
pub fn points_in_general_position_3d(pts: &[[i64; 3]], anchors: usize) -> bool {
    let mut seen = HashSet::new();
    for p in pts {
        if !seen.insert(*p) {
            return false;
        }
    }
    for a in 0..anchors {
        for b in (a + 1)..anchors {
            for c in (b + 1)..anchors {
                for (r, p) in pts.iter().enumerate() {
                    if r == a || r == b || r == c {
                        continue;
                    }
                    if orient3d(pts[a], pts[b], pts[c], *p) == 0 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn gcd(a: u64, b: u64) -> u64 {
    if a == 0 && b == 0 {
        return 1;
    }
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

pub struct TrimResult {
    pub sys: SetSystem,
    /// Indices into the input system, in the order they were kept.
    pub kept: Vec<u32>,
    pub degrees: Vec<u32>,
}

/// Greedy degree cap: scan ranges in seeded order and keep a range only if
/// it pushes no element's degree past `t`.
pub fn trim_to_degree(sys: &SetSystem, t: usize, seed: u64) -> Result<TrimResult> {
    if t == 0 {
        return Err(DiscError::Precondition("degree bound t must be >= 1".into()));
    }
    let mut rng = Rng::derived(seed, &[0x7472_696d]);
    let order = rng.permutation(sys.len());
    let mut degrees = vec![0u32; sys.n()];
    let mut kept = Vec::new();
    let mut out = SetSystem::new(sys.n());
    for &r in &order {
        let range = sys.range(r as usize);
        let fits = range.iter_ones().all(|e| (degrees[e] as usize) < t);
        if fits {
            for e in range.iter_ones() {
                degrees[e] += 1;
            }
            kept.push(r);
            out.push(&range);
        }
    }
    Ok(TrimResult { sys: out, kept, degrees })
}

pub fn verify_degree(sys: &SetSystem, t: usize) -> Result<()> {
    let mut degrees = vec![0usize; sys.n()];
    for r in 0..sys.len() {
        for e in sys.range(r).iter_ones() {
            degrees[e] += 1;
        }
    }
    for (e, &d) in degrees.iter().enumerate() {
        if d > t {
            return Err(DiscError::DegreeExceeded { element: e, degree: d, bound: t });
        }
    }
    Ok(())
}

/// Writes `n <n> m <m>` then one line per range of ascending 0-based element
/// indices (an empty range is an empty line).
pub fn save(sys: &SetSystem, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("n {} m {}\n", sys.n(), sys.len()));
    for r in 0..sys.len() {
        let idx: Vec<String> = sys.range(r).iter_ones().map(|e| e.to_string()).collect();
        out.push_str(&idx.join(" "));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Parses the format written by `save`. Lines whose first non-blank byte is
/// `#` are comments; a `#` later in a line starts a trailing comment. A line
/// left empty after comment stripping still counts as a range (the empty
/// one) until `m` ranges have been read; leftover blank lines are ignored.
pub fn load(path: &Path) -> Result<SetSystem> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut lines = reader.lines().enumerate();

    let (header_line_no, header) = loop {
        match lines.next() {
            Some((i, line)) => {
                let line = line?;
                match strip_comment(&line) {
                    Some(content) if !content.trim().is_empty() => break (i + 1, content),
                    _ => continue,
                }
            }
            None => {
                return Err(DiscError::Parse { line: 0, msg: "empty file".into() });
            }
        }
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "n" || toks[2] != "m" {
        return Err(DiscError::Parse {
            line: header_line_no,
            msg: format!("expected header 'n <n> m <m>', got '{}'", header.trim()),
        });
    }
    let n: usize = toks[1].parse().map_err(|_| DiscError::Parse {
        line: header_line_no,
        msg: format!("bad ground-set size '{}'", toks[1]),
    })?;
    let m: usize = toks[3].parse().map_err(|_| DiscError::Parse {
        line: header_line_no,
        msg: format!("bad range count '{}'", toks[3]),
    })?;

    let mut sys = SetSystem::new(n);
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line?;
        let content = match strip_comment(&line) {
            Some(c) => c,
            None => continue,
        };
        if sys.len() == m {
            if content.trim().is_empty() {
                continue;
            }
            return Err(DiscError::Parse {
                line: line_no,
                msg: format!("found extra content after {m} ranges"),
            });
        }
        let mut b = BitSet::new(n);
        for tok in content.split_whitespace() {
            let e: usize = tok.parse().map_err(|_| DiscError::Parse {
                line: line_no,
                msg: format!("bad element index '{tok}'"),
            })?;
            if e >= n {
                return Err(DiscError::IndexOutOfRange { line: line_no, index: e, n });
            }
            b.insert(e);
        }
        sys.push(&b);
    }
    if sys.len() != m {
        return Err(DiscError::Parse {
            line: 0,
            msg: format!("expected {m} ranges, found {}", sys.len()),
        });
    }
    Ok(sys)
}

/// None for whole-line comments, otherwise the line with any trailing
/// comment removed.
fn strip_comment(line: &str) -> Option<String> {
    let trimmed_start = line.trim_start();
    if trimmed_start.starts_with('#') {
        return None;
    }
    match line.find('#') {
        Some(pos) => Some(line[..pos].to_string()),
        None => Some(line.to_string()),
    }
}

pub fn save_points2(pts: &[[i64; 2]], path: &Path) -> Result<()> {
    let mut out = String::new();
    for p in pts {
        out.push_str(&format!("{} {}\n", p[0], p[1]));
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

pub fn save_points3(pts: &[[i64; 3]], path: &Path) -> Result<()> {
    let mut out = String::new();
    for p in pts {
        out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Independent re-verification that each range of a generated halfplane
/// instance is realizable by some directed line through two points (open
/// side plus any subset of the two boundary points).
pub fn halfplane_range_realizable(pts: &[[i64; 2]], range: &BitSet) -> bool {
    let n = pts.len();
    if range.is_empty() || range.count() == n {
        return true;
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut open_side = BitSet::new(n);
            for (r, p) in pts.iter().enumerate() {
                if orient2d(pts[i], pts[j], *p) > 0 {
                    open_side.insert(r);
                }
            }
            let mut stripped = range.clone();
            if stripped.contains(i) {
                stripped.remove(i);
            }
            if stripped.contains(j) {
                stripped.remove(j);
            }
            if stripped == open_side {
                return true;
            }
        }
    }
    false
}

pub fn halfspace_range_realizable(pts: &[[i64; 3]], range: &BitSet) -> bool {
    let n = pts.len();
    if range.is_empty() || range.count() == n {
        return true;
    }
    let anchors = n.min(ANCHOR_CAP_3D);
    for a in 0..anchors {
        for b in (a + 1)..anchors {
            for c in (b + 1)..anchors {
                for flip in [1i128, -1] {
                    let mut side = BitSet::new(n);
                    for (r, p) in pts.iter().enumerate() {
                        if orient3d(pts[a], pts[b], pts[c], *p) * flip > 0 {
                            side.insert(r);
                        }
                    }
                    let mut stripped = range.clone();
                    for v in [a, b, c] {
                        if stripped.contains(v) {
                            stripped.remove(v);
                        }
                    }
                    if stripped == side {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_count_matches_closed_form() {
        for n in 1..=64 {
            let inst = generate(&InstanceSpec::new(InstanceKind::Intervals1d, n, 0)).unwrap();
            assert_eq!(inst.sys.len(), n * (n + 1) / 2 + 1, "n = {n}");
        }
    }

    #[test]
    fn triangle_realizes_all_subsets() {
        let inst = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 3, 7)).unwrap();
        assert_eq!(inst.sys.len(), 8);
    }

    #[test]
    fn halfplane_family_size_is_quadratic_cap() {
        for seed in [1u64, 2, 3] {
            let inst = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 12, seed)).unwrap();
            assert!(inst.sys.len() <= 12 * 11 + 2);
            assert!(inst.sys.len() >= 2);
        }
    }

    #[test]
    fn halfplane_ranges_are_realizable() {
        for n in [8usize, 16] {
            let inst = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, n, 5)).unwrap();
            let pts = inst.points2.as_ref().unwrap();
            for r in 0..inst.sys.len() {
                assert!(
                    halfplane_range_realizable(pts, &inst.sys.range(r)),
                    "range {r} not realizable"
                );
            }
        }
    }

    #[test]
    fn halfspace_ranges_are_realizable() {
        let inst = generate(&InstanceSpec::new(InstanceKind::Halfspaces3d, 16, 11)).unwrap();
        let pts = inst.points3.as_ref().unwrap();
        for r in 0..inst.sys.len() {
            assert!(
                halfspace_range_realizable(pts, &inst.sys.range(r)),
                "range {r} not realizable"
            );
        }
    }

    #[test]
    fn rect_ranges_are_bbox_closed() {
        let inst = generate(&InstanceSpec::new(InstanceKind::Rects2d, 24, 3)).unwrap();
        let pts = inst.points2.as_ref().unwrap();
        for r in 0..inst.sys.len() {
            let range = inst.sys.range(r);
            if range.is_empty() {
                continue;
            }
            let members: Vec<usize> = range.iter_ones().collect();
            let lo = [
                members.iter().map(|&m| pts[m][0]).min().unwrap(),
                members.iter().map(|&m| pts[m][1]).min().unwrap(),
            ];
            let hi = [
                members.iter().map(|&m| pts[m][0]).max().unwrap(),
                members.iter().map(|&m| pts[m][1]).max().unwrap(),
            ];
            for (p_idx, p) in pts.iter().enumerate() {
                let inside =
                    p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1];
                assert_eq!(inside, range.contains(p_idx), "range {r}, point {p_idx}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 20, 9)).unwrap();
        let b = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 20, 9)).unwrap();
        assert_eq!(a.points2, b.points2);
        assert_eq!(a.sys.len(), b.sys.len());
        for r in 0..a.sys.len() {
            assert_eq!(a.sys.range_words(r), b.sys.range_words(r));
        }
        let c = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 20, 10)).unwrap();
        assert_ne!(a.points2, c.points2);
    }

    #[test]
    fn collinear_points_are_rejected_by_the_checker() {
        let pts = vec![[0i64, 0], [5, 5], [10, 10], [3, 7]];
        assert!(!points_in_general_position_2d(&pts));
        let ok = vec![[0i64, 0], [5, 1], [2, 9], [11, 4]];
        assert!(points_in_general_position_2d(&ok));
    }

    #[test]
    fn coplanar_points_are_rejected_by_the_checker() {
        let pts = vec![[0i64, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [3, 9, 17]];
        assert!(!points_in_general_position_3d(&pts, 5));
    }

    #[test]
    fn trim_respects_degree_and_keeps_conflict_free_ranges() {
        let ranges = vec![
            BitSet::from_indices(5, &[0, 1]),
            BitSet::from_indices(5, &[1, 2]),
            BitSet::from_indices(5, &[4]),
        ];
        let sys = SetSystem::from_bitsets(5, ranges, false).unwrap();
        for seed in 0..8u64 {
            let trim = trim_to_degree(&sys, 1, seed).unwrap();
            verify_degree(&trim.sys, 1).unwrap();
            // {0,1} and {1,2} collide on element 1: exactly one survives,
            // and the disjoint singleton {4} always survives.
            assert_eq!(trim.sys.len(), 2);
            assert!(trim.kept.contains(&2));
        }
    }

    #[test]
    fn trim_with_loose_bound_keeps_everything() {
        let inst = generate(&InstanceSpec::new(InstanceKind::Intervals1d, 10, 0)).unwrap();
        let max_deg = (0..inst.sys.n())
            .map(|e| (0..inst.sys.len()).filter(|&r| inst.sys.contains(r, e)).count())
            .max()
            .unwrap();
        let trim = trim_to_degree(&inst.sys, max_deg, 3).unwrap();
        assert_eq!(trim.sys.len(), inst.sys.len());
    }

    #[test]
    fn trimmed_halfplanes_pass_degree_audit() {
        let inst = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 64, 2)).unwrap();
        let trim = trim_to_degree(&inst.sys, 8, 5).unwrap();
        verify_degree(&trim.sys, 8).unwrap();
        assert!(verify_degree(&inst.sys, 8).is_err());
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.sets");
        let inst = generate(&InstanceSpec::new(InstanceKind::Halfplanes2d, 12, 4)).unwrap();
        save(&inst.sys, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.n(), inst.sys.n());
        assert_eq!(loaded.len(), inst.sys.len());
        for r in 0..loaded.len() {
            assert_eq!(loaded.range_words(r), inst.sys.range_words(r));
        }
        let path2 = dir.path().join("sys2.sets");
        save(&loaded, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn load_accepts_comments_and_empty_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.sets");
        std::fs::write(
            &path,
            "# header comment\nn 5 m 3\n0 2 4 # trailing note\n\n1 3\n",
        )
        .unwrap();
        let sys = load(&path).unwrap();
        assert_eq!(sys.len(), 3);
        assert_eq!(sys.range(0).to_indices(), vec![0, 2, 4]);
        assert!(sys.range(1).is_empty());
        assert_eq!(sys.range(2).to_indices(), vec![1, 3]);
    }

    #[test]
    fn load_reports_out_of_range_index_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.sets");
        std::fs::write(&path, "n 4 m 1\n0 4\n").unwrap();
        match load(&path) {
            Err(DiscError::IndexOutOfRange { line, index, n }) => {
                assert_eq!((line, index, n), (2, 4, 4));
            }
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_malformed_header_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = dir.path().join("h.sets");
        std::fs::write(&bad_header, "size 4 ranges 1\n0\n").unwrap();
        assert!(matches!(load(&bad_header), Err(DiscError::Parse { .. })));
        let short = dir.path().join("s.sets");
        std::fs::write(&short, "n 4 m 3\n0 1\n").unwrap();
        assert!(matches!(load(&short), Err(DiscError::Parse { .. })));
    }
}
