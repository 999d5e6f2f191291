//! Command-line driver: every pipeline stage behind a subcommand, seeded
//! configs, and deterministic CSV/JSON artifacts (timestamps live in `.meta`
//! sidecars so identical reruns are byte-identical).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bits::BitSet;
use crate::chaining::ChainDecomposition;
use crate::criteria::{self, CriterionResult};
use crate::epsapprox::{
    build_sample, equivalence_grid, verify_relative_approx, RelApproxParams,
};
use crate::error::{DiscError, Result};
use crate::geomgen::{
    generate, load, save, save_points2, save_points3, trim_to_degree, Instance,
    InstanceKind, InstanceSpec, KnownDims,
};
use crate::packing::{greedy_packing, packing_experiment, packing_is_maximal};
use crate::partialcolor::WalkParams;
use crate::rng::mix;
use crate::sizesens::{color_beck_fiala, color_size_sensitive, ScheduleParams};

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
    Both,
}

impl OutFormat {
    fn wants_csv(self) -> bool {
        matches!(self, OutFormat::Csv | OutFormat::Both)
    }

    fn wants_json(self) -> bool {
        matches!(self, OutFormat::Json | OutFormat::Both)
    }

    fn parse_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutFormat::Csv),
            "json" => Ok(OutFormat::Json),
            "both" => Ok(OutFormat::Both),
            other => Err(DiscError::Parse {
                line: 0,
                msg: format!("unknown format '{other}' (csv|json|both)"),
            }),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "discforge",
    version,
    about = "Size-sensitive discrepancy toolkit: packings, chaining \
             decompositions, low-discrepancy colorings, and certified samples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Generate a set-system instance and save it
    Gen(GenArgs),
    /// Measure shatter-function growth and fit its exponents
    Shatter(ShatterArgs),
    /// Build a greedy separated packing (and optionally the sampling experiment)
    Pack(PackArgs),
    /// Build a chaining decomposition and audit its structural bounds
    Chain(ChainArgs),
    /// Color a system under the size-sensitive budget schedule
    Color(ColorArgs),
    /// Color a bounded-degree system with oversized ranges pinned to zero
    Beckfiala(BeckfialaArgs),
    /// Build a certified sample by iterated halving
    Sample(SampleArgs),
    /// Check a sample against the multiplicative/additive approximation bounds
    Verify(VerifyArgs),
    /// Run the full acceptance grid and print a pass/fail table
    Suite(SuiteArgs),
}

/// Flags shared by every subcommand. Resolution order: flag, then config
/// file, then (seed only) DISCFORGE_SEED, then the built-in default.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Instance family: intervals-1d | halfplanes-2d | halfspaces-3d | rects-2d | from-file
    #[arg(long)]
    pub kind: Option<String>,
    /// Ground-set size
    #[arg(long)]
    pub n: Option<usize>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Instance file (for --kind from-file)
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Flat key=value config file supplying defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Artifact format
    #[arg(long, value_enum)]
    pub format: Option<OutFormat>,
    /// Worker threads (0 = automatic)
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Budget-schedule constant overrides.
#[derive(Args, Debug, Default, Clone)]
pub struct ScheduleArgs {
    /// Leading budget constant
    #[arg(long = "A")]
    pub const_a: Option<f64>,
    /// Center-shift constant
    #[arg(long = "B")]
    pub const_b: Option<f64>,
}

/// Random-walk parameter overrides.
#[derive(Args, Debug, Default, Clone)]
pub struct WalkArgs {
    /// Step size of the coloring walk
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ShatterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Random subsets sampled per ladder point
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct PackArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Separation threshold (pairwise distance must exceed it)
    #[arg(long)]
    pub delta: Option<f64>,
    /// Size-class center: restricts candidates to sizes within 10% of l and
    /// triggers the sampling experiment
    #[arg(long)]
    pub l: Option<usize>,
    /// Element sampling probability of the experiment
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ChainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ColorArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Reuse one decomposition across rounds instead of re-decomposing
    #[arg(long)]
    pub single_dec: bool,
}

#[derive(Args, Debug, Default, Clone)]
pub struct BeckfialaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Degree bound: the instance is trimmed so every element lies in at most t ranges
    #[arg(long)]
    pub t: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Density offset of the normalized distance
    #[arg(long)]
    pub nu: Option<f64>,
    /// Distance budget each range must stay under
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Density threshold separating the multiplicative and additive branches
    #[arg(long)]
    pub eps: Option<f64>,
    /// Relative error budget
    #[arg(long = "delta-rel")]
    pub delta_rel: Option<f64>,
    /// Sample to check: element-index list file (one per line); built by
    /// halving when absent
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Density offset used when building the sample
    #[arg(long)]
    pub nu: Option<f64>,
    /// Distance budget used when building the sample
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SuiteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Run a single criterion instead of the full grid
    #[arg(long)]
    pub only: Option<u8>,
}

/// Resolved run context shared by all commands.
pub struct Ctx {
    pub kind: InstanceKind,
    pub n: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
    pub out: PathBuf,
    pub format: OutFormat,
    cfg: BTreeMap<String, String>,
}

fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| DiscError::Parse {
            line: i + 1,
            msg: format!("expected key=value, got '{line}'"),
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn cfg_get<T: FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v.parse::<T>().map(Some).map_err(|_| DiscError::Parse {
            line: 0,
            msg: format!("config key '{key}' has unparsable value '{v}'"),
        }),
    }
}

impl Ctx {
    pub fn resolve(common: &CommonArgs) -> Result<Ctx> {
        let cfg = match &common.config {
            Some(p) => load_config(p)?,
            None => BTreeMap::new(),
        };
        let kind_str = common
            .kind
            .clone()
            .or_else(|| cfg.get("kind").cloned())
            .unwrap_or_else(|| "intervals-1d".into());
        let kind = InstanceKind::parse(&kind_str)?;
        let n = match common.n {
            Some(n) => n,
            None => cfg_get(&cfg, "n")?.unwrap_or(64),
        };
        let seed = match common.seed {
            Some(s) => s,
            None => match cfg_get(&cfg, "seed")? {
                Some(s) => s,
                None => match std::env::var("DISCFORGE_SEED") {
                    Ok(v) => v.parse::<u64>().map_err(|_| DiscError::Parse {
                        line: 0,
                        msg: format!("DISCFORGE_SEED has unparsable value '{v}'"),
                    })?,
                    Err(_) => 0,
                },
            },
        };
        let path = common.path.clone().or_else(|| cfg.get("path").map(PathBuf::from));
        let out = common
            .out
            .clone()
            .or_else(|| cfg.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let format = match common.format {
            Some(f) => f,
            None => match cfg.get("format") {
                Some(s) => OutFormat::parse_str(s)?,
                None => OutFormat::Both,
            },
        };
        let jobs = match common.jobs {
            Some(j) => j,
            None => cfg_get(&cfg, "jobs")?.unwrap_or(0),
        };
        if jobs > 0 {
            // Best effort: the global pool can only be sized once per process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        }
        Ok(Ctx { kind, n, seed, path, out, format, cfg })
    }

    fn param_f64(&self, flag: Option<f64>, key: &str) -> Result<Option<f64>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => cfg_get(&self.cfg, key),
        }
    }

    fn param_usize(&self, flag: Option<usize>, key: &str) -> Result<Option<usize>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => cfg_get(&self.cfg, key),
        }
    }

    fn require_f64(&self, flag: Option<f64>, key: &str) -> Result<f64> {
        self.param_f64(flag, key)?.ok_or_else(|| DiscError::Parse {
            line: 0,
            msg: format!("missing required parameter --{key}"),
        })
    }

    fn require_usize(&self, flag: Option<usize>, key: &str) -> Result<usize> {
        self.param_usize(flag, key)?.ok_or_else(|| DiscError::Parse {
            line: 0,
            msg: format!("missing required parameter --{key}"),
        })
    }

    fn stem(&self, command: &str) -> String {
        format!("{}_{}_n{}_seed{}", command, self.kind, self.n, self.seed)
    }

    fn instance(&self) -> Result<Instance> {
        match self.kind {
            InstanceKind::FromFile => {
                let path = self.path.as_ref().ok_or_else(|| DiscError::Parse {
                    line: 0,
                    msg: "--kind from-file needs --path".into(),
                })?;
                Ok(Instance {
                    sys: load(path)?,
                    points2: None,
                    points3: None,
                    dims: None,
                })
            }
            _ => generate(&InstanceSpec {
                kind: self.kind,
                n: self.n,
                seed: self.seed,
                path: None,
            }),
        }
    }

    fn schedule_for(&self, inst: &Instance, sched: &ScheduleArgs) -> Result<ScheduleParams> {
        let dims = inst.dims.unwrap_or(KnownDims { d: 2, d1: 1, d2: 1 });
        let mut sp = ScheduleParams::new(
            inst.sys.n(),
            dims.d as f64,
            dims.d1 as f64,
            dims.d2 as f64,
        )?;
        let a = self.param_f64(sched.const_a, "A")?.unwrap_or(sp.a);
        let b = self.param_f64(sched.const_b, "B")?.unwrap_or(sp.b);
        sp = sp.with_constants(a, b);
        Ok(sp)
    }

    fn walk_for(&self, walk: &WalkArgs) -> Result<WalkParams> {
        let mut params = WalkParams::default();
        if let Some(g) = self.param_f64(walk.gamma, "gamma")? {
            if !(g > 0.0 && g < 1.0) {
                return Err(DiscError::Precondition(format!(
                    "gamma must lie in (0, 1), got {g}"
                )));
            }
            params.step_gamma = g;
            params.max_steps = (64.0 / (g * g)).ceil() as usize;
        }
        Ok(params)
    }

    fn write(&self, name: &str, content: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, content.as_bytes())?;
        Ok(path)
    }

    /// Timestamped sidecar; the only artifact allowed to differ between
    /// identical reruns.
    fn write_meta(&self, stem: &str, command: &str) -> Result<PathBuf> {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut meta = String::new();
        let _ = writeln!(meta, "created_unix {now}");
        let _ = writeln!(meta, "command {command}");
        let _ = writeln!(meta, "kind {}", self.kind);
        let _ = writeln!(meta, "n {}", self.n);
        let _ = writeln!(meta, "seed {}", self.seed);
        for (k, v) in &self.cfg {
            let _ = writeln!(meta, "config.{k} {v}");
        }
        self.write(&format!("{stem}.meta"), &meta)
    }
}

pub struct DispatchOutcome {
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
    /// Process exit code: 0 except for `suite` runs with failing criteria.
    pub exit_code: i32,
}

impl DispatchOutcome {
    fn new(summary: String, artifacts: Vec<PathBuf>) -> Self {
        DispatchOutcome { summary, artifacts, exit_code: 0 }
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| DiscError::Internal(format!("serialization failed: {e}")))
}

pub fn run_gen(args: &GenArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let inst = ctx.instance()?;
    let stem = ctx.stem("gen");
    let mut artifacts = Vec::new();
    fs::create_dir_all(&ctx.out)?;
    let sets_path = ctx.out.join(format!("{stem}.sets"));
    save(&inst.sys, &sets_path)?;
    artifacts.push(sets_path);
    if let Some(pts) = &inst.points2 {
        let p = ctx.out.join(format!("{stem}.pts"));
        save_points2(pts, &p)?;
        artifacts.push(p);
    }
    if let Some(pts) = &inst.points3 {
        let p = ctx.out.join(format!("{stem}.pts"));
        save_points3(pts, &p)?;
        artifacts.push(p);
    }
    artifacts.push(ctx.write_meta(&stem, "gen")?);
    Ok(DispatchOutcome::new(
        format!(
            "gen {} n={} seed={} ranges={}",
            ctx.kind,
            inst.sys.n(),
            ctx.seed,
            inst.sys.len()
        ),
        artifacts,
    ))
}

pub fn run_shatter(args: &ShatterArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let inst = ctx.instance()?;
    let n = inst.sys.n();
    if n < 4 {
        return Err(DiscError::Precondition(
            "shatter fitting needs a ground set of at least 4".into(),
        ));
    }
    let trials = ctx.param_usize(args.trials, "trials")?.unwrap_or(8);
    let mut ladder = Vec::new();
    let mut m = 2usize;
    while m < n {
        ladder.push(m);
        m *= 2;
    }
    ladder.push(n);
    let fit = inst.sys.fit_exponents(&ladder, trials, ctx.seed)?;
    let stem = ctx.stem("shatter");
    let mut artifacts = Vec::new();
    if ctx.format.wants_csv() {
        let mut csv = String::from("m,total_projections\n");
        for p in &fit.profiles {
            let _ = writeln!(csv, "{},{}", p.m, p.total_projections);
        }
        artifacts.push(ctx.write(&format!("{stem}.csv"), &csv)?);
    }
    if ctx.format.wants_json() {
        let ladder_json: Vec<serde_json::Value> = fit
            .profiles
            .iter()
            .map(|p| {
                serde_json::json!({
                    "m": p.m,
                    "total_projections": p.total_projections,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "n": n,
            "ranges": inst.sys.len(),
            "trials": trials,
            "fitted_d": fit.d,
            "fitted_d1": fit.d1,
            "fitted_d2": fit.d2,
            "ladder": ladder_json,
        });
        artifacts.push(ctx.write(&format!("{stem}.json"), &json_line(&doc)?)?);
    }
    artifacts.push(ctx.write_meta(&stem, "shatter")?);
    Ok(DispatchOutcome::new(
        format!(
            "shatter {} n={} d={:.3} d1={:.3} d2={:.3}",
            ctx.kind, n, fit.d, fit.d1, fit.d2
        ),
        artifacts,
    ))
}

pub fn run_pack(args: &PackArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let inst = ctx.instance()?;
    let delta = ctx.require_f64(args.delta, "delta")?;
    let l = ctx.param_usize(args.l, "l")?;
    let size_class = l.map(|l| (l as f64 * 0.9, l as f64 * 1.1));
    let packing = greedy_packing(&inst.sys, delta, ctx.seed, size_class);
    let maximal = packing_is_maximal(&inst.sys, &packing);
    let experiment = match l {
        Some(l) => {
            let p = ctx.param_f64(args.p, "p")?.unwrap_or(0.125);
            let d_assumed = inst.dims.map(|d| d.d as usize).unwrap_or(2);
            Some(packing_experiment(&inst.sys, delta, l, p, ctx.seed, d_assumed)?)
        }
        None => None,
    };
    let stem = ctx.stem("pack");
    let mut artifacts = Vec::new();
    if ctx.format.wants_csv() {
        let mut csv = String::from("member,range_id,size\n");
        for (i, &r) in packing.members.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", i, r, inst.sys.size(r as usize));
        }
        artifacts.push(ctx.write(&format!("{stem}.csv"), &csv)?);
    }
    if ctx.format.wants_json() {
        let doc = serde_json::json!({
            "n": inst.sys.n(),
            "ranges": inst.sys.len(),
            "delta": delta,
            "size_class_center": l,
            "members": packing.members.len(),
            "maximal": maximal,
            "member_ids": packing.members.clone(),
            "experiment": experiment,
        });
        artifacts.push(ctx.write(&format!("{stem}.json"), &json_line(&doc)?)?);
    }
    artifacts.push(ctx.write_meta(&stem, "pack")?);
    let mut summary = format!(
        "pack {} n={} delta={} members={} maximal={}",
        ctx.kind,
        inst.sys.n(),
        delta,
        packing.members.len(),
        maximal
    );
    if let Some(e) = &experiment {
        let _ = write!(
            summary,
            " W={} M={} bound_ok={}",
            e.total_edge_weight, e.packing_size, e.weight_bound_ok
        );
    }
    Ok(DispatchOutcome::new(summary, artifacts))
}

pub fn run_chain(args: &ChainArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let inst = ctx.instance()?;
    let dec = ChainDecomposition::build(&inst.sys, ctx.seed)?;
    let audit = dec.audit_properties(&inst.sys, mix(ctx.seed, 0x6175_6469));
    let cells = dec.cell_summaries(&inst.sys);
    let stem = ctx.stem("chain");
    let mut artifacts = Vec::new();
    if ctx.format.wants_csv() {
        let mut csv =
            String::from("class_i,level_j,node_count,raw_entries,distinct_nonempty,max_set_size\n");
        for c in &cells {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                c.class_i, c.level_j, c.node_count, c.raw_entries, c.distinct_nonempty, c.max_set_size
            );
        }
        artifacts.push(ctx.write(&format!("{stem}.csv"), &csv)?);
    }
    if ctx.format.wants_json() {
        let family_sizes: Vec<usize> =
            dec.families().iter().map(|f| f.len()).collect();
        let doc = serde_json::json!({
            "n": inst.sys.n(),
            "ranges": inst.sys.len(),
            "levels": dec.k(),
            "family_sizes": family_sizes,
            "audit": audit,
            "cells": cells,
        });
        artifacts.push(ctx.write(&format!("{stem}.json"), &json_line(&doc)?)?);
    }
    artifacts.push(ctx.write_meta(&stem, "chain")?);
    Ok(DispatchOutcome::new(
        format!(
            "chain {} n={} levels={} cells={} reconstruction_ok={} max_ratio={:.3}",
            ctx.kind,
            inst.sys.n(),
            dec.k(),
            cells.len(),
            audit.reconstruction_ok,
            audit
                .max_dist_ratio
                .max(audit.max_node_size_ratio)
                .max(audit.max_cell_set_ratio)
        ),
        artifacts,
    ))
}

pub fn run_color(args: &ColorArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let inst = ctx.instance()?;
    let sp = ctx.schedule_for(&inst, &args.schedule)?;
    let params = ctx.walk_for(&args.walk)?;
    let single = args.single_dec || ctx.cfg.get("single_dec").map(|v| v == "true").unwrap_or(false);
    let report = color_size_sensitive(&inst.sys, &sp, &params, ctx.seed, single)?;
    let stem = ctx.stem("color");
    let mut artifacts = Vec::new();
    if ctx.format.wants_csv() {
        let mut csv = String::from("range_id,size,i_class,disc,envelope,ratio\n");
        for a in &report.per_range {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                a.range, a.size, a.class_i, a.disc, a.envelope, a.ratio
            );
        }
        artifacts.push(ctx.write(&format!("{stem}.csv"), &csv)?);
    }
    if ctx.format.wants_json() {
        artifacts.push(ctx.write(&format!("{stem}.json"), &json_line(&report)?)?);
    }
    artifacts.push(ctx.write_meta(&stem, "color")?);
    Ok(DispatchOutcome::new(
        format!(
            "color {} n={} max_disc={} fitted_constant={:.4} A_final={:.2} rounds={}",
            ctx.kind,
            inst.sys.n(),
            report.max_disc,
            report.fitted_constant,
            report.a_final_max,
            report.rounds
        ),
        artifacts,
    ))
}

pub fn run_beckfiala(args: &BeckfialaArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let inst = ctx.instance()?;
    let t = ctx.require_usize(args.t, "t")?;
    let trim = trim_to_degree(&inst.sys, t, ctx.seed)?;
    let dims = inst.dims.unwrap_or(KnownDims { d: 2, d1: 1, d2: 1 });
    let mut sp =
        ScheduleParams::new(trim.sys.n(), dims.d as f64, 1.0, dims.d as f64 - 1.0)?;
    let a = ctx.param_f64(args.schedule.const_a, "A")?.unwrap_or(sp.a);
    let b = ctx.param_f64(args.schedule.const_b, "B")?.unwrap_or(sp.b);
    sp = sp.with_constants(a, b);
    let params = ctx.walk_for(&args.walk)?;
    let report = color_beck_fiala(&trim.sys, t, &sp, &params, ctx.seed)?;
    let stem = ctx.stem("beckfiala");
    let mut artifacts = Vec::new();
    if ctx.format.wants_csv() {
        let mut csv = String::from(
            "round,n_active,walk_ranges,zero_budget_ranges,a_final,frozen,steps,restarts\n",
        );
        for tr in &report.rounds_trace {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                tr.round,
                tr.n_active,
                tr.walk_ranges,
                tr.zero_budget_ranges,
                tr.a_final,
                tr.frozen,
                tr.steps,
                tr.restarts
            );
        }
        artifacts.push(ctx.write(&format!("{stem}.csv"), &csv)?);
    }
    if ctx.format.wants_json() {
        let doc = serde_json::json!({
            "kept_ranges": trim.sys.len(),
            "source_ranges": inst.sys.len(),
            "report": report,
        });
        artifacts.push(ctx.write(&format!("{stem}.json"), &json_line(&doc)?)?);
    }
    artifacts.push(ctx.write_meta(&stem, "beckfiala")?);
    Ok(DispatchOutcome::new(
        format!(
            "beckfiala {} n={} t={} kept={} max_small_disc={} big={} big_ok={} fitted_constant={:.4}",
            ctx.kind,
            trim.sys.n(),
            t,
            trim.sys.len(),
            report.max_small_disc,
            report.big_count,
            report.big_ok,
            report.fitted_constant
        ),
        artifacts,
    ))
}

pub fn run_sample(args: &SampleArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let inst = ctx.instance()?;
    let nu = ctx.param_f64(args.nu, "nu")?.unwrap_or(0.05);
    let alpha = ctx.param_f64(args.alpha, "alpha")?.unwrap_or(0.25);
    let sp = ctx.schedule_for(&inst, &args.schedule)?;
    let params = ctx.walk_for(&args.walk)?;
    let cert = build_sample(&inst.sys, nu, alpha, &sp, &params, ctx.seed)?;
    let stem = ctx.stem("sample");
    let mut artifacts = Vec::new();
    if ctx.format.wants_csv() {
        let mut csv = String::from("iteration,ground_size\n");
        for (i, s) in cert.per_iter_sizes.iter().enumerate() {
            let _ = writeln!(csv, "{i},{s}");
        }
        artifacts.push(ctx.write(&format!("{stem}.csv"), &csv)?);
    }
    if ctx.format.wants_json() {
        artifacts.push(ctx.write(&format!("{stem}.json"), &json_line(&cert)?)?);
    }
    let mut zlist = String::new();
    for e in cert.z.iter_ones() {
        let _ = writeln!(zlist, "{e}");
    }
    artifacts.push(ctx.write(&format!("{stem}.zlist"), &zlist)?);
    artifacts.push(ctx.write_meta(&stem, "sample")?);
    Ok(DispatchOutcome::new(
        format!(
            "sample {} n={} nu={} alpha={} z={} iterations={} worst_d_nu={:.4} degenerate={}",
            ctx.kind,
            inst.sys.n(),
            nu,
            alpha,
            cert.z_size,
            cert.iterations,
            cert.worst_d_nu,
            cert.degenerate
        ),
        artifacts,
    ))
}

fn load_zlist(path: &Path, n: usize) -> Result<BitSet> {
    let text = fs::read_to_string(path)?;
    let mut z = BitSet::new(n);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let e: usize = line.parse().map_err(|_| DiscError::Parse {
            line: i + 1,
            msg: format!("expected an element index, got '{line}'"),
        })?;
        if e >= n {
            return Err(DiscError::IndexOutOfRange { line: i + 1, index: e, n });
        }
        z.insert(e);
    }
    Ok(z)
}

pub fn run_verify(args: &VerifyArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let inst = ctx.instance()?;
    let eps = ctx.require_f64(args.eps, "eps")?;
    let delta_rel = ctx.require_f64(args.delta_rel, "delta-rel")?;
    let rp = RelApproxParams::new(eps, delta_rel)?;
    let nu = ctx.param_f64(args.nu, "nu")?.unwrap_or(eps);
    let alpha = ctx.param_f64(args.alpha, "alpha")?.unwrap_or(delta_rel);
    let zpath = args.z.clone().or_else(|| ctx.cfg.get("z").map(PathBuf::from));
    let z = match &zpath {
        Some(p) => load_zlist(p, inst.sys.n())?,
        None => {
            let sp = ctx.schedule_for(&inst, &args.schedule)?;
            let params = ctx.walk_for(&args.walk)?;
            build_sample(&inst.sys, nu, alpha, &sp, &params, ctx.seed)?.z
        }
    };
    let report = verify_relative_approx(&inst.sys, &z, &rp)?;
    let grid = equivalence_grid(&inst.sys, &z, nu, alpha)?;
    let stem = ctx.stem("verify");
    let mut artifacts = Vec::new();
    if ctx.format.wants_csv() {
        let mut csv = String::from("c1,c2,eps,delta_rel,ok,worst_slack\n");
        for c in &grid {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                c.c1, c.c2, c.eps, c.delta_rel, c.ok, c.worst_slack
            );
        }
        artifacts.push(ctx.write(&format!("{stem}.csv"), &csv)?);
    }
    if ctx.format.wants_json() {
        let doc = serde_json::json!({
            "n": inst.sys.n(),
            "z_size": z.count(),
            "eps": eps,
            "delta_rel": delta_rel,
            "report": report,
            "grid": grid,
        });
        artifacts.push(ctx.write(&format!("{stem}.json"), &json_line(&doc)?)?);
    }
    artifacts.push(ctx.write_meta(&stem, "verify")?);
    Ok(DispatchOutcome::new(
        format!(
            "verify {} n={} z={} eps={} delta_rel={} ok={} worst_slack={:.6}",
            ctx.kind,
            inst.sys.n(),
            z.count(),
            eps,
            delta_rel,
            report.ok,
            report.worst_slack
        ),
        artifacts,
    ))
}

pub fn run_suite(args: &SuiteArgs) -> Result<DispatchOutcome> {
    let ctx = Ctx::resolve(&args.common)?;
    let ids: Vec<u8> = match args.only.or(cfg_get(&ctx.cfg, "only")?) {
        Some(id) => vec![id],
        None => (1..=criteria::CRITERIA_COUNT as u8).collect(),
    };
    let mut results: Vec<CriterionResult> = Vec::new();
    for id in ids {
        let r = criteria::run_criterion(id)?;
        println!(
            "criterion {:>2}  {:<44}  {}  ({:.1}s)",
            r.id,
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.elapsed_secs
        );
        results.push(r);
    }
    let stem = format!("suite_all_n0_seed{}", ctx.seed);
    let mut artifacts = Vec::new();
    if ctx.format.wants_csv() {
        let mut csv = String::from("id,name,pass,details\n");
        for r in &results {
            let _ = writeln!(csv, "{},{},{},\"{}\"", r.id, r.name, r.pass, r.details);
        }
        artifacts.push(ctx.write(&format!("{stem}.csv"), &csv)?);
    }
    if ctx.format.wants_json() {
        artifacts.push(ctx.write(&format!("{stem}.json"), &json_line(&results)?)?);
    }
    artifacts.push(ctx.write_meta(&stem, "suite")?);
    let passed = results.iter().filter(|r| r.pass).count();
    let mut out = DispatchOutcome::new(
        format!("suite {passed}/{} criteria passed", results.len()),
        artifacts,
    );
    if passed < results.len() {
        out.exit_code = 1;
    }
    Ok(out)
}

pub fn dispatch(cmd: &Cmd) -> Result<DispatchOutcome> {
    match cmd {
        Cmd::Gen(a) => run_gen(a),
        Cmd::Shatter(a) => run_shatter(a),
        Cmd::Pack(a) => run_pack(a),
        Cmd::Chain(a) => run_chain(a),
        Cmd::Color(a) => run_color(a),
        Cmd::Beckfiala(a) => run_beckfiala(a),
        Cmd::Sample(a) => run_sample(a),
        Cmd::Verify(a) => run_verify(a),
        Cmd::Suite(a) => run_suite(a),
    }
}

/// Binary entry point: parses, dispatches, prints the one-line summary, and
/// maps failures onto exit codes (2 parse/config, 3 precondition, 4 runtime).
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.cmd) {
        Ok(out) => {
            println!("{}", out.summary);
            out.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
