//! Constrained partial coloring by projected Gaussian random walk: fractional
//! values in [-1, 1] drift until half the active coordinates freeze, while
//! per-range movement budgets are enforced by projecting steps orthogonal to
//! saturated constraint rows and clamping steps at the budget walls.

use serde::Serialize;

use crate::error::{DiscError, Result};
use crate::rng::Rng;
use crate::setsystem::SetSystem;

#[derive(Clone, Debug)]
pub struct WalkParams {
    /// Step scale for the Gaussian increments.
    pub step_gamma: f64,
    /// Coordinates with |x| >= 1 - freeze_eps are frozen.
    pub freeze_eps: f64,
    /// Constraints saturate at |drift| >= delta - slack; the hard guarantee
    /// after a successful run is |drift| <= delta + slack.
    pub constraint_slack: f64,
    /// Exact drift resync and watch-list refresh cadence, in steps.
    pub sweep_every: usize,
    pub max_steps: usize,
    pub max_restarts: usize,
}

impl Default for WalkParams {
    fn default() -> Self {
        let step_gamma = 0.02f64;
        WalkParams {
            step_gamma,
            freeze_eps: 0.01,
            constraint_slack: 0.1,
            sweep_every: 64,
            max_steps: (64.0 / (step_gamma * step_gamma)) as usize,
            max_restarts: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ColorOutcome {
    pub x: Vec<f64>,
    pub frozen: Vec<bool>,
    /// Exact per-range movement sum(x) - sum(start), recomputed at the end.
    pub drift: Vec<f64>,
    pub saturated: Vec<bool>,
    pub n_active: usize,
    pub frozen_active: usize,
    pub steps: usize,
    pub restarts: usize,
    pub entropy_sum: f64,
    pub entropy_limit: f64,
}

/// One term per range: exp(-delta^2 / (16 |S|)). Ranges empty on the active
/// coordinates contribute 1 when their budget is zero and 0 otherwise (they
/// cannot drift, so any positive budget is vacuously safe).
pub fn entropy_term(active_size: usize, delta: f64) -> f64 {
    if active_size == 0 {
        if delta == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (-delta * delta / (16.0 * active_size as f64)).exp()
    }
}

pub fn entropy_sum(active_sizes: &[usize], deltas: &[f64], exempt: Option<&[bool]>) -> f64 {
    active_sizes
        .iter()
        .zip(deltas)
        .enumerate()
        .filter(|(r, _)| exempt.map(|e| !e[*r]).unwrap_or(true))
        .map(|(_, (&s, &d))| entropy_term(s, d))
        .sum()
}

/// Fails unless the non-exempt entropy terms sum to at most n_active / 16.
pub fn check_entropy_condition(
    active_sizes: &[usize],
    deltas: &[f64],
    n_active: usize,
    exempt: Option<&[bool]>,
) -> Result<(f64, f64)> {
    let sum = entropy_sum(active_sizes, deltas, exempt);
    let limit = n_active as f64 / 16.0;
    if sum > limit + 1e-12 {
        return Err(DiscError::EntropyViolated { sum, limit });
    }
    Ok((sum, limit))
}

struct Basis {
    rows: Vec<Vec<f64>>,
}

impl Basis {
    fn new() -> Self {
        Basis { rows: Vec::new() }
    }

    /// Twice-orthogonalized residual of v against the rows; appended and
    /// normalized unless it is numerically zero.
    fn append(&mut self, mut v: Vec<f64>) {
        for _ in 0..2 {
            for row in &self.rows {
                let dot: f64 = v.iter().zip(row).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(row) {
                    *a -= dot * b;
                }
            }
        }
        let norm2: f64 = v.iter().map(|a| a * a).sum();
        if norm2 > 1e-18 {
            let inv = norm2.sqrt().recip();
            for a in &mut v {
                *a *= inv;
            }
            self.rows.push(v);
        }
    }

    fn project_out(&self, v: &mut [f64]) {
        for row in &self.rows {
            let dot: f64 = v.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(row) {
                *a -= dot * b;
            }
        }
    }
}

fn masked_indicator(sys: &SetSystem, r: usize, frozen: &[bool]) -> Vec<f64> {
    let mut v = vec![0.0; sys.n()];
    for e in sys.range(r).iter_ones() {
        if !frozen[e] {
            v[e] = 1.0;
        }
    }
    v
}

struct Run<'a> {
    sys: &'a SetSystem,
    deltas: &'a [f64],
    params: &'a WalkParams,
    start: &'a [f64],
    x: Vec<f64>,
    frozen: Vec<bool>,
    saturated: Vec<bool>,
    drift: Vec<f64>,
    basis: Basis,
    watched: Vec<u32>,
    freezes_since_rebuild: usize,
    frozen_active: usize,
    needed: usize,
}

impl<'a> Run<'a> {
    fn exact_drift(&self, r: usize) -> f64 {
        self.sys.signed_sum(r, &self.x) - self.sys.signed_sum(r, self.start)
    }

    fn wall(&self, r: usize) -> f64 {
        self.deltas[r] - self.params.constraint_slack
    }

    fn rebuild_basis(&mut self) {
        self.basis = Basis::new();
        for r in 0..self.sys.len() {
            if self.saturated[r] {
                self.basis.append(masked_indicator(self.sys, r, &self.frozen));
            }
        }
        self.freezes_since_rebuild = 0;
    }

    fn saturate(&mut self, r: usize) {
        if !self.saturated[r] {
            self.saturated[r] = true;
            self.basis.append(masked_indicator(self.sys, r, &self.frozen));
        }
    }

    /// Exact drift resync; returns false when a constraint broke its hard cap.
    fn sweep(&mut self) -> bool {
        let gamma = self.params.step_gamma;
        let b = self.params.sweep_every as f64;
        for r in 0..self.sys.len() {
            self.drift[r] = self.exact_drift(r);
            if self.drift[r].abs() > self.deltas[r] + self.params.constraint_slack + 1e-9 {
                return false;
            }
            if !self.saturated[r] && self.drift[r].abs() >= self.wall(r) {
                self.saturate(r);
            }
        }
        self.watched.clear();
        for r in 0..self.sys.len() {
            if self.saturated[r] {
                continue;
            }
            let s_act = self
                .sys
                .range(r)
                .iter_ones()
                .filter(|&e| !self.frozen[e])
                .count();
            if s_act == 0 {
                continue;
            }
            let margin = 4.0 * gamma * (b * s_act as f64).sqrt();
            if self.drift[r].abs() >= self.wall(r) - margin {
                self.watched.push(r as u32);
            }
        }
        if self.freezes_since_rebuild > 32 {
            self.rebuild_basis();
        }
        true
    }

    /// Applies one projected Gaussian step. Returns the effective step norm.
    fn step(&mut self, rng: &mut Rng) -> f64 {
        let n = self.sys.n();
        let gamma = self.params.step_gamma;
        let mut g = vec![0.0f64; n];
        for e in 0..n {
            if !self.frozen[e] {
                g[e] = rng.gaussian();
            }
        }
        // Alternate projection and re-masking: basis rows may predate recent
        // freezes, so projecting can leak mass onto frozen coordinates.
        for _ in 0..3 {
            self.basis.project_out(&mut g);
            for e in 0..n {
                if self.frozen[e] {
                    g[e] = 0.0;
                }
            }
        }
        let mut raw: Vec<f64> = g.iter().map(|v| v * gamma).collect();
        let mut eff = vec![0.0f64; n];
        let mut tau_halvings = 0;
        let norm = loop {
            let mut eff_norm2 = 0.0;
            for e in 0..n {
                if self.frozen[e] {
                    eff[e] = 0.0;
                } else {
                    let nx = (self.x[e] + raw[e]).clamp(-1.0, 1.0);
                    eff[e] = nx - self.x[e];
                    eff_norm2 += eff[e] * eff[e];
                }
            }
            // Scale the whole step down so no watched constraint crosses its
            // budget: |drift + tau * inc| <= delta.
            let mut tau = 1.0f64;
            for &r in &self.watched {
                let r = r as usize;
                if self.saturated[r] {
                    continue;
                }
                let inc = self.sys.signed_sum(r, &eff);
                if inc.abs() < 1e-12 {
                    continue;
                }
                let headroom = if inc > 0.0 {
                    self.deltas[r] - self.drift[r]
                } else {
                    self.deltas[r] + self.drift[r]
                };
                if inc.abs() > headroom {
                    tau = tau.min((headroom / inc.abs()).max(0.0));
                }
            }
            if tau >= 1.0 {
                break eff_norm2.sqrt();
            }
            for v in &mut raw {
                *v *= tau;
            }
            tau_halvings += 1;
            if tau_halvings > 8 {
                // Give up on this step entirely.
                for v in &mut eff {
                    *v = 0.0;
                }
                break 0.0;
            }
        };
        // Commit the step and update watched drifts with the exact applied
        // increments.
        let mut new_saturations = Vec::new();
        for &r in &self.watched {
            let r = r as usize;
            if self.saturated[r] {
                continue;
            }
            let inc = self.sys.signed_sum(r, &eff);
            self.drift[r] += inc;
            if self.drift[r].abs() >= self.wall(r) {
                new_saturations.push(r);
            }
        }
        for e in 0..n {
            if eff[e] != 0.0 {
                self.x[e] += eff[e];
                if !self.frozen[e] && self.x[e].abs() >= 1.0 - self.params.freeze_eps {
                    self.x[e] = self.x[e].clamp(-1.0, 1.0);
                    self.frozen[e] = true;
                    self.frozen_active += 1;
                    self.freezes_since_rebuild += 1;
                }
            }
        }
        for r in new_saturations {
            self.saturate(r);
        }
        norm
    }
}

/// Runs the constrained walk until at least half of the active coordinates
/// freeze. `start` carries fractional values from earlier rounds; coordinates
/// already within the freeze band count as frozen from the outset. `exempt`
/// marks ranges excluded from the entropy precondition (structural zero-budget
/// constraints that hold by projection rather than by entropy accounting).
pub fn partial_color(
    sys: &SetSystem,
    deltas: &[f64],
    params: &WalkParams,
    seed: u64,
    start: Option<&[f64]>,
    exempt: Option<&[bool]>,
) -> Result<ColorOutcome> {
    let n = sys.n();
    if deltas.len() != sys.len() {
        return Err(DiscError::Precondition(format!(
            "{} budgets for {} ranges",
            deltas.len(),
            sys.len()
        )));
    }
    if deltas.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(DiscError::Precondition("budgets must be finite and >= 0".into()));
    }
    let zeros = vec![0.0; n];
    let start = start.unwrap_or(&zeros);
    if start.len() != n {
        return Err(DiscError::Precondition(format!(
            "start vector has {} coordinates for n = {n}",
            start.len()
        )));
    }
    if start.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
        return Err(DiscError::Precondition("start values must lie in [-1, 1]".into()));
    }
    let initial_frozen: Vec<bool> =
        start.iter().map(|v| v.abs() >= 1.0 - params.freeze_eps).collect();
    let n_active = initial_frozen.iter().filter(|f| !**f).count();
    let active_sizes: Vec<usize> = (0..sys.len())
        .map(|r| {
            sys.range(r)
                .iter_ones()
                .filter(|&e| !initial_frozen[e])
                .count()
        })
        .collect();
    let (entropy, limit) =
        check_entropy_condition(&active_sizes, deltas, n_active, exempt)?;
    let needed = n_active.div_ceil(2);

    let mut best_frozen = 0usize;
    for restart in 0..params.max_restarts {
        let mut run = Run {
            sys,
            deltas,
            params,
            start,
            x: start.to_vec(),
            frozen: initial_frozen.clone(),
            saturated: vec![false; sys.len()],
            drift: vec![0.0; sys.len()],
            basis: Basis::new(),
            watched: Vec::new(),
            freezes_since_rebuild: 0,
            frozen_active: 0,
            needed,
        };
        // Constraints whose wall is at or below zero are saturated from the
        // first step (this includes all zero-budget constraints).
        for r in 0..sys.len() {
            if run.wall(r) <= 0.0 {
                run.saturate(r);
            }
        }
        if !run.sweep() {
            continue;
        }
        let mut rng = Rng::derived(seed, &[0x776c_6b73, restart as u64]);
        let mut stalled = 0usize;
        let mut steps = 0usize;
        let mut failed = false;
        let stall_floor = 1e-9 * (n_active.max(1) as f64).sqrt();
        while run.frozen_active < run.needed {
            if steps >= params.max_steps {
                failed = true;
                break;
            }
            let norm = run.step(&mut rng);
            steps += 1;
            if norm < stall_floor {
                stalled += 1;
                if stalled >= 32 {
                    failed = true;
                    break;
                }
            } else {
                stalled = 0;
            }
            if steps % params.sweep_every == 0 && !run.sweep() {
                failed = true;
                break;
            }
        }
        best_frozen = best_frozen.max(run.frozen_active);
        if failed {
            continue;
        }
        // Final hard verification with exact drifts.
        let mut drift = vec![0.0; sys.len()];
        let mut ok = true;
        for r in 0..sys.len() {
            drift[r] = run.exact_drift(r);
            if drift[r].abs() > deltas[r] + params.constraint_slack + 1e-9 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        return Ok(ColorOutcome {
            x: run.x,
            frozen: run.frozen,
            drift,
            saturated: run.saturated,
            n_active,
            frozen_active: run.frozen_active,
            steps,
            restarts: restart,
            entropy_sum: entropy,
            entropy_limit: limit,
        });
    }
    Err(DiscError::WalkFailed {
        restarts: params.max_restarts,
        best_frozen,
        needed,
    })
}

#[derive(Clone, Debug)]
pub struct RoundPlan {
    pub deltas: Vec<f64>,
    pub exempt: Option<Vec<bool>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullColoring {
    pub signs: Vec<i8>,
    pub final_x: Vec<f64>,
    pub rounds: usize,
    pub per_round_frozen: Vec<usize>,
}

/// Iterates partial colorings until every coordinate freezes, then rounds the
/// fractional values to signs (ties toward +1). The planner receives the
/// round number, the per-range sizes restricted to active coordinates, and
/// the active coordinate count.
pub fn full_coloring(
    sys: &SetSystem,
    params: &WalkParams,
    seed: u64,
    mut planner: impl FnMut(usize, &[usize], usize) -> RoundPlan,
) -> Result<FullColoring> {
    let n = sys.n();
    let max_rounds = crate::chaining::level_count(n) + 8;
    let mut x = vec![0.0f64; n];
    let mut per_round_frozen = Vec::new();
    let mut rounds = 0usize;
    loop {
        let frozen: Vec<bool> = x.iter().map(|v| v.abs() >= 1.0 - params.freeze_eps).collect();
        let n_act = frozen.iter().filter(|f| !**f).count();
        if n_act == 0 {
            break;
        }
        if rounds >= max_rounds {
            return Err(DiscError::TooManyRounds { rounds });
        }
        let active_sizes: Vec<usize> = (0..sys.len())
            .map(|r| sys.range(r).iter_ones().filter(|&e| !frozen[e]).count())
            .collect();
        let plan = planner(rounds, &active_sizes, n_act);
        let outcome = partial_color(
            sys,
            &plan.deltas,
            params,
            seed.wrapping_add(rounds as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            Some(&x),
            plan.exempt.as_deref(),
        )?;
        per_round_frozen.push(outcome.frozen_active);
        x = outcome.x;
        rounds += 1;
    }
    let signs: Vec<i8> = x.iter().map(|v| if *v >= 0.0 { 1 } else { -1 }).collect();
    Ok(FullColoring { signs, final_x: x, rounds, per_round_frozen })
}

/// Budget schedule for plain low-discrepancy coloring: every nonempty range
/// gets sqrt(16 |S| ln(16 m / n_act)), which meets the entropy condition with
/// equality across m ranges.
pub fn uniform_entropy_budgets(active_sizes: &[usize], n_active: usize) -> Vec<f64> {
    let m = active_sizes.len().max(1) as f64;
    let n_act = n_active.max(1) as f64;
    let log = (16.0 * m / n_act).max(1.0_f64.exp()).ln();
    active_sizes
        .iter()
        .map(|&s| {
            if s == 0 {
                1.0
            } else {
                (16.0 * s as f64 * log).sqrt()
            }
        })
        .collect()
}

/// Signed sum of a range under an integer sign vector.
pub fn discrepancy_of(sys: &SetSystem, r: usize, signs: &[i8]) -> i64 {
    sys.range(r).iter_ones().map(|e| signs[e] as i64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitSet;
    use crate::geomgen::{generate, InstanceKind, InstanceSpec};

    fn intervals(n: usize) -> SetSystem {
        generate(&InstanceSpec::new(InstanceKind::Intervals1d, n, 0)).unwrap().sys
    }

    #[test]
    fn entropy_terms_follow_conventions() {
        assert_eq!(entropy_term(0, 0.0), 1.0);
        assert_eq!(entropy_term(0, 0.5), 0.0);
        let t = entropy_term(64, 32.0);
        assert!((t - (-1.0f64).exp()).abs() < 1e-12);
        // Sixteen ranges of size 64 with budget 32: sum is 16/e.
        let sizes = vec![64usize; 16];
        let deltas = vec![32.0; 16];
        let sum = entropy_sum(&sizes, &deltas, None);
        assert!((sum - 16.0 * (-1.0f64).exp()).abs() < 1e-9);
        assert!((sum - 5.886071).abs() < 1e-5);
        // All-zero budgets on nonempty ranges contribute 1 each.
        assert_eq!(entropy_sum(&[3, 7], &[0.0, 0.0], None), 2.0);
    }

    #[test]
    fn entropy_condition_rejects_overload() {
        // Two always-on terms against a limit of 16/16 = 1.
        let err = check_entropy_condition(&[4, 4], &[0.0, 0.0], 16, None);
        assert!(matches!(err, Err(DiscError::EntropyViolated { .. })));
        // Exempting one brings the sum to 1, within the limit.
        let ok = check_entropy_condition(&[4, 4], &[0.0, 0.0], 16, Some(&[true, false]));
        assert!(ok.is_ok());
    }

    #[test]
    fn zero_budget_whole_ground_set_stays_balanced() {
        let n = 64;
        let sys = SetSystem::from_bitsets(n, std::iter::once(BitSet::full(n)), true).unwrap();
        let params = WalkParams::default();
        let out = partial_color(&sys, &[0.0], &params, 5, None, None).unwrap();
        assert!(out.frozen_active >= 32);
        assert!(out.drift[0].abs() <= params.constraint_slack + 1e-9);
        let total: f64 = out.x.iter().sum();
        assert!(total.abs() <= params.constraint_slack + 1e-9);
    }

    #[test]
    fn disjoint_ranges_color_within_budgets() {
        let n = 64;
        let sets = (0..4).map(|i| {
            let idx: Vec<usize> = (i * 16..(i + 1) * 16).collect();
            BitSet::from_indices(n, &idx)
        });
        let sys = SetSystem::from_bitsets(n, sets, true).unwrap();
        let deltas = vec![4.0; 4];
        let params = WalkParams::default();
        let out = partial_color(&sys, &deltas, &params, 9, None, None).unwrap();
        assert!(out.frozen_active >= 32, "froze {}", out.frozen_active);
        for r in 0..4 {
            assert!(out.drift[r].abs() <= 4.0 + params.constraint_slack + 1e-9);
        }
        for e in 0..n {
            assert!(out.x[e].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn walk_is_deterministic() {
        let sys = intervals(32);
        let sizes: Vec<usize> = (0..sys.len()).map(|r| sys.size(r)).collect();
        let deltas = uniform_entropy_budgets(&sizes, 32);
        let params = WalkParams::default();
        let a = partial_color(&sys, &deltas, &params, 77, None, None).unwrap();
        let b = partial_color(&sys, &deltas, &params, 77, None, None).unwrap();
        assert_eq!(a.steps, b.steps);
        for (u, v) in a.x.iter().zip(&b.x) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn budgets_hold_on_interval_system() {
        let sys = intervals(64);
        let sizes: Vec<usize> = (0..sys.len()).map(|r| sys.size(r)).collect();
        let deltas = uniform_entropy_budgets(&sizes, 64);
        let params = WalkParams::default();
        for seed in [1u64, 2, 3] {
            let out = partial_color(&sys, &deltas, &params, seed, None, None).unwrap();
            assert!(out.frozen_active >= 32);
            for r in 0..sys.len() {
                assert!(
                    out.drift[r].abs() <= deltas[r] + params.constraint_slack + 1e-9,
                    "seed {seed} range {r}: {} > {}",
                    out.drift[r].abs(),
                    deltas[r]
                );
            }
        }
    }

    #[test]
    fn start_vector_resumes_previous_round() {
        let sys = intervals(32);
        let sizes: Vec<usize> = (0..sys.len()).map(|r| sys.size(r)).collect();
        let deltas = uniform_entropy_budgets(&sizes, 32);
        let params = WalkParams::default();
        let first = partial_color(&sys, &deltas, &params, 4, None, None).unwrap();
        let frozen: Vec<bool> =
            first.x.iter().map(|v| v.abs() >= 1.0 - params.freeze_eps).collect();
        let active_sizes: Vec<usize> = (0..sys.len())
            .map(|r| sys.range(r).iter_ones().filter(|&e| !frozen[e]).count())
            .collect();
        let n_act = frozen.iter().filter(|f| !**f).count();
        let deltas2 = uniform_entropy_budgets(&active_sizes, n_act);
        let second =
            partial_color(&sys, &deltas2, &params, 5, Some(&first.x), None).unwrap();
        // Frozen coordinates never move across rounds.
        for e in 0..32 {
            if frozen[e] {
                assert_eq!(first.x[e].to_bits(), second.x[e].to_bits());
            }
        }
        assert!(second.n_active < 32);
    }

    #[test]
    fn full_coloring_signs_everything() {
        let sys = intervals(64);
        let params = WalkParams::default();
        let out = full_coloring(&sys, &params, 3, |_, sizes, n_act| RoundPlan {
            deltas: uniform_entropy_budgets(sizes, n_act),
            exempt: None,
        })
        .unwrap();
        assert_eq!(out.signs.len(), 64);
        assert!(out.signs.iter().all(|s| *s == 1 || *s == -1));
        assert!(out.rounds >= 1);
        // Interval discrepancy under the schedule stays far below trivial.
        let worst = (0..sys.len())
            .map(|r| discrepancy_of(&sys, r, &out.signs).abs())
            .max()
            .unwrap();
        assert!(worst <= 40, "worst interval discrepancy {worst}");
        let again = full_coloring(&sys, &params, 3, |_, sizes, n_act| RoundPlan {
            deltas: uniform_entropy_budgets(sizes, n_act),
            exempt: None,
        })
        .unwrap();
        assert_eq!(out.signs, again.signs);
    }

    #[test]
    fn walk_reports_failure_when_budgets_unreachable() {
        let n = 16;
        let mut sets = Vec::new();
        for e in 0..n {
            sets.push(BitSet::from_indices(n, &[e]));
        }
        let sys = SetSystem::from_bitsets(n, sets.into_iter(), true).unwrap();
        // Budget 0 on every singleton pins every coordinate; nothing can
        // freeze. Entropy exemption keeps the precondition from rejecting it
        // first, so the walk itself must stall and fail.
        let deltas = vec![0.0; n];
        let exempt = vec![true; n];
        let mut params = WalkParams::default();
        params.max_restarts = 2;
        params.max_steps = 2000;
        let err = partial_color(&sys, &deltas, &params, 1, None, Some(&exempt));
        assert!(matches!(err, Err(DiscError::WalkFailed { .. })), "{err:?}");
    }
}
