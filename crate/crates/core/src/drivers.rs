//! Feasibility pipelines and the binary-search optimization drivers.
//!
//! A `≤T` or `≥T` query on an unrestricted instance is normalized to
//! threshold 1 and compressed. Machines faster than `r0` are large; without
//! large machines a single configuration ILP decides the query, otherwise
//! the balanced pipeline guesses `σ̃`, preassigns the balanced part on the
//! large machines and solves the residual. Restricted instances, idle caps
//! and envy queries are decided with per-type load windows directly.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;

use crate::balancing::{cmin_to_idle_cmax, imax_type, r0};
use crate::confilp::{
    solve_windows, BlockSpec, DemandRelation, LoadWindow, SolverLimits, WindowProblem,
};
use crate::error::{Error, Result};
use crate::model::{
    dot, verify_schedule, Configuration, FeasibilityQuery, HMSchedule, Instance, JobRelation,
    Objective, Relation, ScheduleEntry,
};
use crate::oracle;
use crate::rational::{ceil_u64, floor_u64, int, Rational};
use crate::reduction::{compress, lift_schedule, normalize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Method {
    /// Balanced pipeline when large machines exist, direct ILP otherwise.
    #[default]
    Auto,
    /// Always the balanced pipeline (degenerates to the ILP without large machines).
    Balanced,
    /// Always a single configuration ILP.
    ConfIlp,
    /// Brute force; small instances only.
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Balanced => "balanced",
            Method::ConfIlp => "confilp",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Method::Auto),
            "balanced" => Ok(Method::Balanced),
            "confilp" => Ok(Method::ConfIlp),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::Malformed(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SolveOptions {
    pub method: Method,
    pub limits: SolverLimits,
}

impl SolveOptions {
    pub fn with_method(method: Method) -> Self {
        SolveOptions {
            method,
            ..SolveOptions::default()
        }
    }
}

/// Which pipeline produced a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Path {
    DirectConfIlp,
    BalancedNoLarge,
    BalancedCase1,
    BalancedCase2,
    Windows,
    Oracle,
}

impl Path {
    pub fn name(self) -> &'static str {
        match self {
            Path::DirectConfIlp => "direct-confilp",
            Path::BalancedNoLarge => "balanced-no-large-machines",
            Path::BalancedCase1 => "balanced-case-1",
            Path::BalancedCase2 => "balanced-case-2",
            Path::Windows => "load-windows",
            Path::Oracle => "oracle",
        }
    }
}

/// Deterministic record of the work a solve did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub feasibility_calls: u64,
    pub direct_solves: u64,
    pub balanced_solves: u64,
    pub window_solves: u64,
    pub oracle_calls: u64,
    /// `σ̃` guesses that survived pruning.
    pub guesses: u64,
    /// Distinct residual problems among those guesses, by case.
    pub case_1_subproblems: u64,
    pub case_2_subproblems: u64,
    /// Pipeline that produced the returned schedule.
    pub path: Option<Path>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub objective: Objective,
    pub value: Rational,
    pub schedule: HMSchedule,
    pub method: Method,
    pub trace: Trace,
}

/// A candidate set `{k / denominator : 0 ≤ k ≤ max_numerator}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    pub types: (usize, usize),
    pub denominator: u128,
    pub max_numerator: u128,
}

impl Grid {
    pub fn contains(&self, v: &Rational) -> bool {
        let scaled = v * Rational::from_integer(BigInt::from(self.denominator));
        scaled.is_integer()
            && !scaled.numer().sign().eq(&num_bigint::Sign::Minus)
            && scaled.to_integer() <= BigInt::from(self.max_numerator)
    }
}

/// The value sets the binary searches draw from: per machine type `t`,
/// `{k/s_t : k ≤ s_t·p·n}` for `Cmax`/`Cmin`; per ordered type pair,
/// `{k/(s_t1·s_t2) : k ≤ pmax·s_t1·s_t2}` for `Cenvy`.
pub fn candidate_values(inst: &Instance, objective: Objective) -> Vec<Grid> {
    let total = inst.total_load() as u128;
    let types: Vec<usize> = inst.present_types().collect();
    match objective {
        Objective::Cmax | Objective::Cmin => types
            .iter()
            .map(|&t| Grid {
                types: (t, t),
                denominator: inst.s[t] as u128,
                max_numerator: inst.s[t] as u128 * total,
            })
            .collect(),
        Objective::Cenvy => {
            let pmax = inst.pmax() as u128;
            let mut out = Vec::new();
            for &a in &types {
                for &b in &types {
                    let den = inst.s[a] as u128 * inst.s[b] as u128;
                    out.push(Grid {
                        types: (a, b),
                        denominator: den,
                        max_numerator: pmax * den,
                    });
                }
            }
            out
        }
    }
}

/// How the balanced pipeline bounds machine loads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BalanceMode {
    /// `≤1`-feasibility, all jobs scheduled.
    Cmax,
    /// `κ`-idle `≤1`-feasibility of an `≤n` schedule (converted `Cmin`).
    Idle(u64),
}

fn checked_instance(inst: &Instance) -> Result<()> {
    inst.validate_shape()?;
    if let Some(t) = inst.present_types().find(|&t| inst.s[t] == 0) {
        return Err(Error::Malformed(format!("speed of machine type {t} is zero")));
    }
    Ok(())
}

/// Decides `q` on `inst` and returns a verified witness schedule.
pub fn feasibility(
    inst: &Instance,
    q: &FeasibilityQuery,
    opts: &SolveOptions,
) -> Result<Option<HMSchedule>> {
    feasibility_traced(inst, q, opts, &mut Trace::default())
}

pub fn feasibility_traced(
    inst: &Instance,
    q: &FeasibilityQuery,
    opts: &SolveOptions,
    trace: &mut Trace,
) -> Result<Option<HMSchedule>> {
    Ok(feasibility_with_path(inst, q, opts, trace)?.map(|(s, _)| s))
}

fn feasibility_with_path(
    inst: &Instance,
    q: &FeasibilityQuery,
    opts: &SolveOptions,
    trace: &mut Trace,
) -> Result<Option<(HMSchedule, Path)>> {
    // Zero speeds are fine here: such machines must stay empty.
    inst.validate_shape()?;
    if q.threshold < Rational::zero() {
        return Err(Error::Malformed("negative threshold".into()));
    }
    if q.job_relation == JobRelation::Ge {
        return Err(Error::Malformed(
            "solvers support job relations = and <= only".into(),
        ));
    }
    trace.feasibility_calls += 1;
    let found = match opts.method {
        Method::Oracle => {
            trace.oracle_calls += 1;
            oracle::brute_force_witness(inst, q, None)?.map(|s| (s, Path::Oracle))
        }
        _ if inst.restrict.is_some() || q.idle_cap.is_some() || q.job_relation != JobRelation::Eq => {
            trace.window_solves += 1;
            windows_feasibility(inst, q, &opts.limits)?.map(|s| (s, Path::Windows))
        }
        _ => pipeline_feasibility(inst, q, opts, trace)?,
    };
    if let Some((s, _)) = &found {
        let report = verify_schedule(inst, s, q)?;
        if !report.ok {
            return Err(Error::Internal(format!(
                "produced schedule fails verification: {:?}",
                report.violations
            )));
        }
    }
    Ok(found)
}

/// Per-type windows straight from the query, restrictions respected.
fn windows_feasibility(
    inst: &Instance,
    q: &FeasibilityQuery,
    limits: &SolverLimits,
) -> Result<Option<HMSchedule>> {
    let total = inst.total_load();
    let mut types = Vec::with_capacity(inst.tau());
    for t in 0..inst.tau() {
        let cap = &q.threshold * int(inst.s[t]);
        let (mut lo, hi) = match q.relation {
            Relation::Le => (0, Some(floor_u64(&cap).min(total))),
            Relation::Ge => (ceil_u64(&cap), None),
        };
        if let Some(k) = &q.idle_cap {
            lo = lo.max(ceil_u64(&(&cap - k)));
        }
        if inst.m[t] > 0 && (lo > total || hi.is_some_and(|h| h < lo)) {
            return Ok(None);
        }
        let hi = hi.map(|h| h.max(lo));
        types.push(BlockSpec {
            machines: inst.m[t],
            window: LoadWindow::new(lo, hi),
            allowed: inst.allowed_jobs(t),
        });
    }
    let problem = WindowProblem {
        p: inst.p.clone(),
        demand: inst.n.clone(),
        relation: match q.job_relation {
            JobRelation::Le => DemandRelation::AtMost,
            _ => DemandRelation::Exact,
        },
        types,
    };
    solve_windows(&problem, true, limits)
}

fn pipeline_feasibility(
    inst: &Instance,
    q: &FeasibilityQuery,
    opts: &SolveOptions,
    trace: &mut Trace,
) -> Result<Option<(HMSchedule, Path)>> {
    if q.relation == Relation::Le {
        // Capacity bound; saves the pipeline on hopeless thresholds.
        let cap = &q.threshold * Rational::from_integer(BigInt::from(inst.capacity()));
        if cap < int(inst.total_load()) {
            return Ok(None);
        }
    }
    let norm = normalize(inst, q.relation, &q.threshold);
    let (comp, cmap) = compress(&norm)?;
    let pmax = inst.pmax();
    let r0 = r0(inst.d(), pmax);
    let shift = match q.relation {
        Relation::Le => 0,
        Relation::Ge => pmax - 1,
    };
    let has_large = comp.present_types().any(|t| comp.s[t] + shift > r0);
    let balanced = match opts.method {
        Method::Balanced => true,
        Method::ConfIlp => false,
        _ => has_large,
    };
    let found = if balanced {
        trace.balanced_solves += 1;
        match q.relation {
            Relation::Le => balanced_feasibility(&comp, BalanceMode::Cmax, &opts.limits, trace)?,
            Relation::Ge => {
                let (conv, kappa) = cmin_to_idle_cmax(&comp);
                balanced_feasibility(&conv, BalanceMode::Idle(kappa), &opts.limits, trace)?
                    .map(|(s, path)| (complete_jobs(&s, &comp.n, &comp.p), path))
            }
        }
    } else {
        trace.direct_solves += 1;
        direct_feasibility(&comp, q.relation, &opts.limits)?.map(|s| (s, Path::DirectConfIlp))
    };
    match found {
        Some((s, path)) => Ok(Some((lift_schedule(&s, &cmap)?, path))),
        None => Ok(None),
    }
}

/// One configuration ILP on a threshold-1 instance.
fn direct_feasibility(
    inst: &Instance,
    rel: Relation,
    limits: &SolverLimits,
) -> Result<Option<HMSchedule>> {
    let types = (0..inst.tau())
        .map(|t| BlockSpec {
            machines: inst.m[t],
            window: match rel {
                Relation::Le => LoadWindow::at_most(inst.s[t]),
                Relation::Ge => LoadWindow::new(inst.s[t], None),
            },
            allowed: None,
        })
        .collect();
    let problem = WindowProblem {
        p: inst.p.clone(),
        demand: inst.n.clone(),
        relation: DemandRelation::Exact,
        types,
    };
    solve_windows(&problem, true, limits)
}

/// Adds the jobs an `≤n` schedule left out to one machine. Loads only grow,
/// so `≥`-feasibility is kept.
fn complete_jobs(sched: &HMSchedule, n: &[u64], p: &[u64]) -> HMSchedule {
    let used = crate::model::aggregate_jobs(sched, n.len());
    let missing: Vec<u64> = n.iter().zip(&used).map(|(a, b)| a - b).collect();
    if missing.iter().all(|&v| v == 0) {
        return sched.clone();
    }
    let mut entries = sched.canonical().entries;
    let first = entries.iter().position(|e| e.count > 0).expect("schedule has machines");
    let e = entries[first].clone();
    entries[first].count -= 1;
    entries.push(ScheduleEntry {
        machine_type: e.machine_type,
        config: e.config.add(&Configuration::new(missing, p)),
        count: 1,
    });
    HMSchedule::new(entries).canonical()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Subproblem {
    /// Full configurations for every large type (`2 + ceil(σ̃)`).
    Case1(Vec<Vec<u64>>),
    /// Preassigned `σ̄` per large type.
    Case2(Vec<Vec<u64>>),
}

/// Shared data of one balanced feasibility test.
struct Balancer<'a> {
    inst: &'a Instance,
    mode: BalanceMode,
    limits: &'a SolverLimits,
    large: Vec<usize>,
    small: Vec<usize>,
    r0: u64,
    /// `s_imax − r0`; `σ̃_t(j) = a_j + b_j + (s_t − r0)/scale · F_j`.
    scale: u64,
}

impl Balancer<'_> {
    fn pmax(&self) -> u64 {
        self.inst.pmax()
    }

    fn omega(&self, t: usize) -> u64 {
        self.inst.s[t] - self.r0
    }

    fn window(&self, speed: u64) -> LoadWindow {
        match self.mode {
            BalanceMode::Cmax => LoadWindow::at_most(speed),
            BalanceMode::Idle(k) => LoadWindow::bounded(speed.saturating_sub(k), speed),
        }
    }

    /// Enumerates the pruned guess space in a fixed order and maps each
    /// surviving guess to its residual problem. Every pruning rule is a
    /// property the guess derived from a feasible schedule satisfies.
    fn enumerate(&self) -> Result<(u64, Vec<Subproblem>)> {
        let d = self.inst.d();
        let mut a = vec![0u64; d];
        let mut b = vec![0u64; d];
        let mut f = vec![0u64; d];
        let mut count = 0u64;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        self.rec(0, &mut a, &mut b, &mut f, &mut count, &mut seen, &mut out)?;
        Ok((count, out))
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        &self,
        j: usize,
        a: &mut Vec<u64>,
        b: &mut Vec<u64>,
        f: &mut Vec<u64>,
        count: &mut u64,
        seen: &mut HashSet<Subproblem>,
        out: &mut Vec<Subproblem>,
    ) -> Result<()> {
        let inst = self.inst;
        let d = inst.d();
        if j == d {
            *count += 1;
            if *count > self.limits.max_guesses {
                return Err(Error::ResourceLimit(format!(
                    "more than {} balancing guesses",
                    self.limits.max_guesses
                )));
            }
            if let Some(sub) = self.subproblem(a, b, f) {
                if seen.insert(sub.clone()) {
                    out.push(sub);
                }
            }
            return Ok(());
        }
        let pmax = self.pmax();
        let pj = inst.p[j];
        let scale = self.scale as u128;
        let phase1_used: u64 = (0..j).map(|k| inst.p[k] * (a[k] + b[k])).sum();
        let f_used: u64 = (0..j).map(|k| inst.p[k] * f[k]).sum();
        let m_large: u128 = self.large.iter().map(|&t| inst.m[t] as u128).sum();
        for aj in 0..=pmax {
            if pj * aj + phase1_used > self.r0 {
                break;
            }
            let b_max = if aj < pmax { 0 } else { (self.r0 - phase1_used) / pj - aj };
            for bj in 0..=b_max {
                if phase1_used + pj * (aj + bj) > self.r0 {
                    break;
                }
                let f_max = if aj < pmax { 0 } else { (self.scale - f_used.min(self.scale)) / pj };
                for fj in 0..=f_max {
                    // Σ_t m_t σ̃_t(j) ≤ n_j, scaled by `scale`.
                    let used: u128 = m_large * (aj + bj) as u128 * scale
                        + self
                            .large
                            .iter()
                            .map(|&t| inst.m[t] as u128 * self.omega(t) as u128 * fj as u128)
                            .sum::<u128>();
                    if used > inst.n[j] as u128 * scale {
                        break;
                    }
                    a[j] = aj;
                    b[j] = bj;
                    f[j] = fj;
                    if self.loads_fit(j + 1, a, b, f) {
                        self.rec(j + 1, a, b, f, count, seen, out)?;
                    } else {
                        // Loads grow with `fj`.
                        a[j] = 0;
                        b[j] = 0;
                        f[j] = 0;
                        break;
                    }
                    a[j] = 0;
                    b[j] = 0;
                    f[j] = 0;
                }
            }
        }
        Ok(())
    }

    /// `p·σ̃_t ≤ s_t` on every large type for the first `upto` job types.
    fn loads_fit(&self, upto: usize, a: &[u64], b: &[u64], f: &[u64]) -> bool {
        let inst = self.inst;
        let scale = self.scale as u128;
        self.large.iter().all(|&t| {
            let load: u128 = (0..upto)
                .map(|j| {
                    inst.p[j] as u128
                        * ((a[j] + b[j]) as u128 * scale + self.omega(t) as u128 * f[j] as u128)
                })
                .sum();
            load <= inst.s[t] as u128 * scale
        })
    }

    fn subproblem(&self, a: &[u64], b: &[u64], f: &[u64]) -> Option<Subproblem> {
        let inst = self.inst;
        let d = inst.d();
        let scale = self.scale as u128;
        let psum: u64 = inst.p.iter().sum();
        let pf: u128 = (0..d).map(|j| inst.p[j] as u128 * f[j] as u128).sum();
        let scaled = |t: usize, j: usize| -> u128 {
            (a[j] + b[j]) as u128 * scale + self.omega(t) as u128 * f[j] as u128
        };
        if b.iter().all(|&v| v == 0) {
            match self.mode {
                // Area 2 may be partly empty: each large machine has room
                // for two extra jobs of every type above `σ̂`.
                BalanceMode::Cmax => {
                    let configs: Vec<Vec<u64>> = self
                        .large
                        .iter()
                        .map(|&t| (0..d).map(|j| 2 + scaled(t, j).div_ceil(scale) as u64).collect())
                        .collect();
                    let fits = self
                        .large
                        .iter()
                        .zip(&configs)
                        .all(|(&t, c)| dot(c, &inst.p) <= inst.s[t]);
                    fits.then_some(Subproblem::Case1(configs))
                }
                // Every large machine would idle by more than κ.
                BalanceMode::Idle(_) => None,
            }
        } else {
            // Some phase-1b job exists, so area 2 is full: on every large
            // type, p·σ̃² ≥ (s_t − r0) − Σp.
            let filled = self.large.iter().all(|&t| {
                let omega = self.omega(t) as u128;
                omega * pf + psum as u128 * scale >= omega * scale
            });
            if !filled {
                return None;
            }
            let cut = match self.mode {
                BalanceMode::Cmax => self.pmax(),
                BalanceMode::Idle(_) => 2 * self.pmax() - 1,
            };
            let pre: Vec<Vec<u64>> = self
                .large
                .iter()
                .map(|&t| {
                    (0..d)
                        .map(|j| ((scaled(t, j) / scale) as u64).saturating_sub(cut))
                        .collect()
                })
                .collect();
            Some(Subproblem::Case2(pre))
        }
    }

    /// Solves one residual problem; the schedule uses the instance's types.
    fn solve(&self, sub: &Subproblem) -> Result<Option<(HMSchedule, Path)>> {
        let inst = self.inst;
        let d = inst.d();
        match sub {
            Subproblem::Case1(configs) => {
                let mut x = vec![0u64; d];
                for (&t, c) in self.large.iter().zip(configs) {
                    for j in 0..d {
                        x[j] += inst.m[t] * c[j];
                    }
                }
                let demand: Vec<u64> = inst.n.iter().zip(&x).map(|(n, x)| n.saturating_sub(*x)).collect();
                let problem = WindowProblem {
                    p: inst.p.clone(),
                    demand,
                    relation: DemandRelation::Exact,
                    types: self
                        .small
                        .iter()
                        .map(|&t| BlockSpec {
                            machines: inst.m[t],
                            window: self.window(inst.s[t]),
                            allowed: None,
                        })
                        .collect(),
                };
                let Some(rest) = solve_windows(&problem, true, self.limits)? else {
                    return Ok(None);
                };
                // Large machines may hold more than needed; drop the surplus.
                let mut surplus: Vec<u64> = x.iter().zip(&inst.n).map(|(x, n)| x.saturating_sub(*n)).collect();
                let mut machines: Vec<(usize, Configuration)> = Vec::new();
                for (&t, c) in self.large.iter().zip(configs) {
                    for _ in 0..inst.m[t] {
                        let mut counts = c.clone();
                        for j in 0..d {
                            let k = surplus[j].min(counts[j]);
                            counts[j] -= k;
                            surplus[j] -= k;
                        }
                        machines.push((t, Configuration::new(counts, &inst.p)));
                    }
                }
                let mut entries = HMSchedule::from_machines(machines).entries;
                entries.extend(rest.entries.into_iter().map(|e| ScheduleEntry {
                    machine_type: self.small[e.machine_type],
                    ..e
                }));
                Ok(Some((HMSchedule::new(entries).canonical(), Path::BalancedCase1)))
            }
            Subproblem::Case2(pre) => {
                let mut demand = inst.n.clone();
                let mut types = Vec::new();
                for (&t, c) in self.large.iter().zip(pre) {
                    for j in 0..d {
                        let used = inst.m[t] * c[j];
                        if used > demand[j] {
                            return Ok(None);
                        }
                        demand[j] -= used;
                    }
                    let load = dot(c, &inst.p);
                    if load > inst.s[t] {
                        return Ok(None);
                    }
                    types.push(BlockSpec {
                        machines: inst.m[t],
                        window: self.window(inst.s[t] - load),
                        allowed: None,
                    });
                }
                for &t in &self.small {
                    types.push(BlockSpec {
                        machines: inst.m[t],
                        window: self.window(inst.s[t]),
                        allowed: None,
                    });
                }
                let problem = WindowProblem {
                    p: inst.p.clone(),
                    demand,
                    relation: match self.mode {
                        BalanceMode::Cmax => DemandRelation::Exact,
                        BalanceMode::Idle(_) => DemandRelation::AtMost,
                    },
                    types,
                };
                let Some(rest) = solve_windows(&problem, true, self.limits)? else {
                    return Ok(None);
                };
                let nl = self.large.len();
                let entries = rest
                    .entries
                    .into_iter()
                    .map(|e| {
                        if e.machine_type < nl {
                            let pre_cfg = Configuration::new(pre[e.machine_type].clone(), &inst.p);
                            ScheduleEntry {
                                machine_type: self.large[e.machine_type],
                                config: e.config.add(&pre_cfg),
                                count: e.count,
                            }
                        } else {
                            ScheduleEntry {
                                machine_type: self.small[e.machine_type - nl],
                                ..e
                            }
                        }
                    })
                    .collect();
                Ok(Some((HMSchedule::new(entries).canonical(), Path::BalancedCase2)))
            }
        }
    }
}

/// The balanced pipeline on a threshold-1, unrestricted instance (already
/// converted when `mode` is [`BalanceMode::Idle`]).
///
/// Guesses the three integral parts of `σ̃` (phase 1a, phase 1b and the floor
/// of the fastest machine's phase 2), preassigns `floor(σ̃) ∸ pmax` (or
/// `∸ (2pmax − 1)` in idle mode) on the large machines, and solves the
/// residual jointly with the small machines. Without phase-1b jobs and for
/// `Cmax`, large machines get `2 + ceil(σ̃)` and only the small machines are
/// solved. Guesses are tried concurrently; the first success in enumeration
/// order wins.
pub fn balanced_feasibility(
    inst: &Instance,
    mode: BalanceMode,
    limits: &SolverLimits,
    trace: &mut Trace,
) -> Result<Option<(HMSchedule, Path)>> {
    let d = inst.d();
    let pmax = inst.pmax();
    let r0 = r0(d, pmax);
    let large: Vec<usize> = inst.present_types().filter(|&t| inst.s[t] > r0).collect();
    let small: Vec<usize> = inst.present_types().filter(|&t| inst.s[t] <= r0).collect();
    let all_windows = |types: &[usize], b: &Balancer| -> Vec<BlockSpec> {
        types
            .iter()
            .map(|&t| BlockSpec {
                machines: inst.m[t],
                window: b.window(inst.s[t]),
                allowed: None,
            })
            .collect()
    };
    let imax = imax_type(&inst.s, &large.iter().fold(vec![0; inst.tau()], |mut m, &t| {
        m[t] = inst.m[t];
        m
    }));
    let balancer = Balancer {
        inst,
        mode,
        limits,
        scale: imax.map_or(1, |t| inst.s[t] - r0),
        large,
        small,
        r0,
    };
    if balancer.large.is_empty() {
        let problem = WindowProblem {
            p: inst.p.clone(),
            demand: inst.n.clone(),
            relation: match mode {
                BalanceMode::Cmax => DemandRelation::Exact,
                BalanceMode::Idle(_) => DemandRelation::AtMost,
            },
            types: all_windows(&balancer.small, &balancer),
        };
        return Ok(solve_windows(&problem, true, limits)?.map(|s| {
            let entries = s
                .entries
                .into_iter()
                .map(|e| ScheduleEntry {
                    machine_type: balancer.small[e.machine_type],
                    ..e
                })
                .collect();
            (HMSchedule::new(entries).canonical(), Path::BalancedNoLarge)
        }));
    }

    let (count, subs) = balancer.enumerate()?;
    trace.guesses += count;
    for s in &subs {
        match s {
            Subproblem::Case1(_) => trace.case_1_subproblems += 1,
            Subproblem::Case2(_) => trace.case_2_subproblems += 1,
        }
    }
    let found = subs
        .par_iter()
        .map(|s| balancer.solve(s))
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        });
    match found {
        None => Ok(None),
        Some(r) => r,
    }
}

/// Decides whether some schedule has all completion times within
/// `[C1 − E, C1]` for a `C1` on a machine's grid between the average
/// completion time and average + `E`. Exact: the largest completion time of
/// an envy-`E` schedule is such a `C1`.
pub fn envy_feasibility(
    inst: &Instance,
    envy: &Rational,
    opts: &SolveOptions,
    trace: &mut Trace,
) -> Result<Option<HMSchedule>> {
    checked_instance(inst)?;
    trace.feasibility_calls += 1;
    let total = inst.total_load();
    let avg = Rational::new(BigInt::from(total), BigInt::from(inst.capacity()));
    let mut c1s: Vec<Rational> = Vec::new();
    for t in inst.present_types() {
        let s = int(inst.s[t]);
        let lo = ceil_u64(&(&avg * &s));
        let hi = floor_u64(&((&avg + envy) * &s));
        for k in lo..=hi {
            c1s.push(int(k) / &s);
        }
    }
    c1s.sort();
    c1s.dedup();
    trace.window_solves += c1s.len() as u64;
    let limits = opts.limits;
    let found = c1s
        .par_iter()
        .map(|c1| {
            let low = c1 - envy;
            let mut types = Vec::with_capacity(inst.tau());
            for t in 0..inst.tau() {
                let s = int(inst.s[t]);
                let lo = if low > Rational::zero() { ceil_u64(&(&low * &s)) } else { 0 };
                // Loads never exceed p·n, so clamping keeps the verdict.
                let hi = floor_u64(&(c1 * &s)).min(total);
                if inst.m[t] > 0 && lo > hi {
                    return Ok(None);
                }
                types.push(BlockSpec {
                    machines: inst.m[t],
                    window: LoadWindow::bounded(lo.min(hi), hi),
                    allowed: inst.allowed_jobs(t),
                });
            }
            let problem = WindowProblem {
                p: inst.p.clone(),
                demand: inst.n.clone(),
                relation: DemandRelation::Exact,
                types,
            };
            solve_windows(&problem, true, &limits)
        })
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        });
    match found {
        None => Ok(None),
        Some(r) => r,
    }
}

fn ensure_solvable(inst: &Instance) -> Result<()> {
    checked_instance(inst)?;
    if inst.machine_count() == 0 {
        return Err(Error::Malformed("instance has no machines".into()));
    }
    if let Some(j) =
        (0..inst.d()).find(|&j| inst.n[j] > 0 && !inst.present_types().any(|t| inst.is_allowed(j, t)))
    {
        return Err(Error::NoFeasibleSchedule(format!(
            "job type {j} is not allowed on any machine"
        )));
    }
    Ok(())
}

fn certify(inst: &Instance, objective: Objective, value: &Rational, sched: &HMSchedule) -> Result<()> {
    let q = match objective {
        Objective::Cmax => FeasibilityQuery::makespan(value.clone()),
        Objective::Cmin => FeasibilityQuery::min_completion(value.clone()),
        Objective::Cenvy => FeasibilityQuery::makespan(verify_schedule(
            inst,
            sched,
            &FeasibilityQuery::makespan(Rational::zero()),
        )?
        .max_completion),
    };
    let report = verify_schedule(inst, sched, &q)?;
    if !report.ok || objective.value_of(&report) != *value {
        return Err(Error::Internal(format!(
            "result schedule does not certify {objective} = {value}: {:?}",
            report.violations
        )));
    }
    Ok(())
}

fn actual_value(inst: &Instance, objective: Objective, sched: &HMSchedule) -> Result<Rational> {
    let report = verify_schedule(inst, sched, &FeasibilityQuery::makespan(Rational::zero()))?;
    Ok(objective.value_of(&report))
}

type Found = (HMSchedule, Path);

/// Smallest `k ∈ [lo, hi]` with a feasible probe, given monotonicity; `hi`
/// is probed first so a hopeless range costs one probe.
fn lowest_feasible(
    lo: u64,
    hi: u64,
    mut probe: impl FnMut(u64) -> Result<Option<Found>>,
) -> Result<Option<Found>> {
    let Some(mut best) = probe(hi)? else {
        return Ok(None);
    };
    let (mut l, mut h) = (lo, hi);
    while l < h {
        let mid = l + (h - l) / 2;
        match probe(mid)? {
            Some(f) => {
                best = f;
                h = mid;
            }
            None => l = mid + 1,
        }
    }
    Ok(Some(best))
}

/// Largest `k ∈ [lo, hi]` with a feasible probe; `lo` is probed first.
fn highest_feasible(
    lo: u64,
    hi: u64,
    mut probe: impl FnMut(u64) -> Result<Option<Found>>,
) -> Result<Option<Found>> {
    let Some(mut best) = probe(lo)? else {
        return Ok(None);
    };
    let (mut l, mut h) = (lo, hi);
    while l < h {
        let mid = l + (h - l).div_ceil(2);
        match probe(mid)? {
            Some(f) => {
                best = f;
                l = mid;
            }
            None => h = mid - 1,
        }
    }
    Ok(Some(best))
}

fn oracle_result(inst: &Instance, objective: Objective) -> Result<SolveResult> {
    let (value, schedule) = oracle::brute_force(inst, objective)?;
    certify(inst, objective, &value, &schedule)?;
    Ok(SolveResult {
        objective,
        value,
        schedule,
        method: Method::Oracle,
        trace: Trace {
            oracle_calls: 1,
            path: Some(Path::Oracle),
            ..Trace::default()
        },
    })
}

fn finish(
    inst: &Instance,
    objective: Objective,
    opts: &SolveOptions,
    best: Option<(Rational, Found)>,
    trace: Trace,
) -> Result<SolveResult> {
    let (value, (schedule, path)) =
        best.ok_or_else(|| Error::Internal("search found no schedule".into()))?;
    certify(inst, objective, &value, &schedule)?;
    Ok(SolveResult {
        objective,
        value,
        schedule,
        method: opts.method,
        trace: Trace {
            path: Some(path),
            ..trace
        },
    })
}

/// Smallest feasible makespan, searched type by type over `k / s_t`.
pub fn minimize_makespan(inst: &Instance, opts: &SolveOptions) -> Result<SolveResult> {
    ensure_solvable(inst)?;
    if opts.method == Method::Oracle {
        return oracle_result(inst, Objective::Cmax);
    }
    let total = inst.total_load() as u128;
    let capacity = inst.capacity();
    let mut trace = Trace::default();
    let mut best: Option<(Rational, Found)> = None;
    for t in inst.present_types().collect::<Vec<_>>() {
        let s = inst.s[t] as u128;
        // OPT ≥ p·n / capacity, and OPT ≤ p·n since every speed is ≥ 1.
        let lo = (total * s).div_ceil(capacity) as u64;
        let mut hi = (total * s) as u64;
        if let Some((v, _)) = &best {
            // Largest k with k/s_t < best.
            hi = hi.min(ceil_u64(&(v * int(inst.s[t]))).saturating_sub(1));
            if ceil_u64(&(v * int(inst.s[t]))) == 0 {
                continue;
            }
        }
        if hi < lo {
            continue;
        }
        let speed = inst.s[t];
        let found = lowest_feasible(lo, hi, |k| {
            let q = FeasibilityQuery::makespan(Rational::new(BigInt::from(k), BigInt::from(speed)));
            feasibility_with_path(inst, &q, opts, &mut trace)
        })?;
        if let Some(f) = found {
            let v = actual_value(inst, Objective::Cmax, &f.0)?;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, f));
            }
        }
    }
    finish(inst, Objective::Cmax, opts, best, trace)
}

/// Largest feasible minimum completion time, searched over `k / s_t`.
pub fn maximize_min_completion(inst: &Instance, opts: &SolveOptions) -> Result<SolveResult> {
    ensure_solvable(inst)?;
    if opts.method == Method::Oracle {
        return oracle_result(inst, Objective::Cmin);
    }
    let total = inst.total_load() as u128;
    let capacity = inst.capacity();
    let mut trace = Trace::default();
    let mut best: Option<(Rational, Found)> = None;
    for t in inst.present_types().collect::<Vec<_>>() {
        let s = inst.s[t] as u128;
        // OPT ≤ p·n / capacity.
        let hi = (total * s / capacity) as u64;
        let lo = match &best {
            // Smallest k with k/s_t > best.
            Some((v, _)) => floor_u64(&(v * int(inst.s[t]))) + 1,
            None => 0,
        };
        if lo > hi {
            continue;
        }
        let speed = inst.s[t];
        let found = highest_feasible(lo, hi, |k| {
            let q = FeasibilityQuery::min_completion(Rational::new(
                BigInt::from(k),
                BigInt::from(speed),
            ));
            feasibility_with_path(inst, &q, opts, &mut trace)
        })?;
        if let Some(f) = found {
            let v = actual_value(inst, Objective::Cmin, &f.0)?;
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, f));
            }
        }
    }
    finish(inst, Objective::Cmin, opts, best, trace)
}

/// Smallest feasible envy, searched per ordered type pair over
/// `k / (s_t1 · s_t2)` below the best envy found so far.
pub fn minimize_envy(inst: &Instance, opts: &SolveOptions) -> Result<SolveResult> {
    ensure_solvable(inst)?;
    if opts.method == Method::Oracle {
        return oracle_result(inst, Objective::Cenvy);
    }
    let mut trace = Trace::default();
    let smin = inst.present_types().map(|t| inst.s[t]).min().expect("machines exist");
    // Every schedule has envy at most p·n / smin.
    let ceiling = Rational::new(BigInt::from(inst.total_load()), BigInt::from(smin));
    let first = envy_feasibility(inst, &ceiling, opts, &mut trace)?
        .ok_or_else(|| Error::Internal("no schedule at the trivial envy bound".into()))?;
    let mut best = (actual_value(inst, Objective::Cenvy, &first)?, (first, Path::Windows));
    let types: Vec<usize> = inst.present_types().collect();
    for &t1 in &types {
        for &t2 in &types {
            let den = inst.s[t1] as u128 * inst.s[t2] as u128;
            let den_q = Rational::from_integer(BigInt::from(den));
            let top = ceil_u64(&(&best.0 * &den_q));
            if top == 0 {
                continue;
            }
            let hi = top - 1;
            let found = lowest_feasible(0, hi, |k| {
                let e = Rational::new(BigInt::from(k), BigInt::from(den));
                Ok(envy_feasibility(inst, &e, opts, &mut trace)?.map(|s| (s, Path::Windows)))
            })?;
            if let Some(f) = found {
                let v = actual_value(inst, Objective::Cenvy, &f.0)?;
                if v < best.0 {
                    best = (v, f);
                }
            }
        }
    }
    finish(inst, Objective::Cenvy, opts, Some(best), trace)
}

/// `Cmax` or `Cmin` with a restriction matrix, via per-type windows.
pub fn solve_restricted(
    inst: &Instance,
    objective: Objective,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    if inst.restrict.is_none() {
        return Err(Error::Malformed("instance has no restriction matrix".into()));
    }
    match objective {
        Objective::Cmax => minimize_makespan(inst, opts),
        Objective::Cmin => maximize_min_completion(inst, opts),
        Objective::Cenvy => minimize_envy(inst, opts),
    }
}

/// Dispatches on the objective.
pub fn solve(inst: &Instance, objective: Objective, opts: &SolveOptions) -> Result<SolveResult> {
    match objective {
        Objective::Cmax => minimize_makespan(inst, opts),
        Objective::Cmin => maximize_min_completion(inst, opts),
        Objective::Cenvy => minimize_envy(inst, opts),
    }
}
