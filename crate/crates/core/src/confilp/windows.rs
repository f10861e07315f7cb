//! Per-type load windows, their reduction into small core windows plus
//! `delta`-sized blocks, and expansion of reduced solutions.

use std::collections::VecDeque;

use super::{solve_model, ConfIlpModel, DemandRelation, LoadWindow, SolveOutcome, SolverLimits};
use crate::error::{Error, Result};
use crate::model::{Configuration, HMSchedule, Instance};
use crate::reduction::{constants, reduce_window, ReducedWindow};

/// A group of `machines` identical machines sharing a load window and an
/// allowed-job mask (`None` allows everything).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockSpec {
    pub machines: u64,
    pub window: LoadWindow,
    pub allowed: Option<Vec<bool>>,
}

/// Find one configuration per machine, within its type's window, whose total
/// job usage stands in `relation` to `demand`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowProblem {
    pub p: Vec<u64>,
    pub demand: Vec<u64>,
    pub relation: DemandRelation,
    pub types: Vec<BlockSpec>,
}

/// Core window of one machine type plus the blocks split off it. `delta` is
/// the lcm of the job sizes the type may run (0 if it may run none).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowReduction {
    pub core: LoadWindow,
    pub blocks: ReducedWindow,
    pub delta: u64,
}

fn reduce_one(p: &[u64], window: LoadWindow, allowed: Option<&[bool]>) -> WindowReduction {
    let unchanged = WindowReduction {
        core: window,
        blocks: ReducedWindow::unchanged(window.lower, window.upper),
        delta: 0,
    };
    if window.is_empty() {
        return unchanged;
    }
    let sizes: Vec<u64> = p
        .iter()
        .enumerate()
        .filter(|&(j, _)| allowed.is_none_or(|a| a[j]))
        .map(|(_, &pj)| pj)
        .collect();
    if sizes.is_empty() {
        return unchanged;
    }
    let k = constants(&sizes);
    let Some((delta, _)) = k.small() else {
        return unchanged;
    };
    let blocks = reduce_window(window.lower, window.upper, &k);
    WindowReduction {
        core: LoadWindow::new(blocks.core_lower, blocks.core_upper),
        blocks,
        delta,
    }
}

/// Applies [`reduce_window`] to every type, with constants taken over the job
/// types that the machine type may run.
pub fn reduced_windows_for(inst: &Instance, raw: &[LoadWindow]) -> Result<Vec<WindowReduction>> {
    if raw.len() != inst.tau() {
        return Err(Error::Malformed(format!(
            "{} windows for {} machine types",
            raw.len(),
            inst.tau()
        )));
    }
    Ok((0..inst.tau())
        .map(|t| reduce_one(&inst.p, raw[t], inst.allowed_jobs(t).as_deref()))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum PieceKind {
    Exact,
    ExactUnbounded,
    Slack,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct PieceKey {
    allowed: Option<Vec<bool>>,
    delta: u64,
    kind: PieceKind,
}

type Pool = VecDeque<(Configuration, u64)>;

/// Removes `want` configurations from the front of `pool` and returns their sum.
fn take_sum(pool: &mut Pool, want: u64, d: usize) -> Option<Configuration> {
    let mut acc = Configuration::zero(d);
    let mut left = want;
    while left > 0 {
        let front = pool.front_mut()?;
        let k = left.min(front.1);
        for (a, c) in acc.counts.iter_mut().zip(&front.0.counts) {
            *a += c * k;
        }
        acc.load += front.0.load * k;
        front.1 -= k;
        left -= k;
        if front.1 == 0 {
            pool.pop_front();
        }
    }
    Some(acc)
}

/// Solves a window problem exactly. With `reduce`, windows are first split
/// into core windows plus shared `delta`-sized piece blocks, which keeps the
/// column count independent of the machine speeds.
///
/// The schedule's machine types are indices into `problem.types`.
pub fn solve_windows(
    problem: &WindowProblem,
    reduce: bool,
    limits: &SolverLimits,
) -> Result<Option<HMSchedule>> {
    let d = problem.p.len();
    let reductions: Vec<WindowReduction> = problem
        .types
        .iter()
        .map(|t| {
            if reduce {
                reduce_one(&problem.p, t.window, t.allowed.as_deref())
            } else {
                WindowReduction {
                    core: t.window,
                    blocks: ReducedWindow::unchanged(t.window.lower, t.window.upper),
                    delta: 0,
                }
            }
        })
        .collect();

    let mut specs: Vec<BlockSpec> = problem
        .types
        .iter()
        .zip(&reductions)
        .map(|(t, r)| BlockSpec {
            machines: t.machines,
            window: r.core,
            allowed: t.allowed.clone(),
        })
        .collect();
    let mut keys: Vec<PieceKey> = Vec::new();
    // per type: (exact block index, slack block index)
    let mut links: Vec<(Option<usize>, Option<usize>)> = Vec::with_capacity(problem.types.len());
    let mut add_piece = |key: PieceKey, machines: u64, specs: &mut Vec<BlockSpec>| -> Result<usize> {
        let idx = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                let window = match key.kind {
                    PieceKind::Exact => LoadWindow::bounded(key.delta, key.delta),
                    PieceKind::ExactUnbounded => LoadWindow::new(key.delta, None),
                    PieceKind::Slack => LoadWindow::at_most(key.delta),
                };
                specs.push(BlockSpec {
                    machines: 0,
                    window,
                    allowed: key.allowed.clone(),
                });
                keys.push(key);
                keys.len() - 1
            }
        };
        let spec = &mut specs[problem.types.len() + idx];
        spec.machines = spec
            .machines
            .checked_add(machines)
            .ok_or_else(|| Error::ResourceLimit("piece block count overflows".into()))?;
        Ok(problem.types.len() + idx)
    };
    for (t, r) in problem.types.iter().zip(&reductions) {
        let mut link = (None, None);
        if t.machines > 0 && r.blocks.exact_blocks > 0 {
            let kind = if r.core.upper.is_none() {
                PieceKind::ExactUnbounded
            } else {
                PieceKind::Exact
            };
            let key = PieceKey {
                allowed: t.allowed.clone(),
                delta: r.delta,
                kind,
            };
            let count = t.machines.checked_mul(r.blocks.exact_blocks).ok_or_else(|| {
                Error::ResourceLimit("piece block count overflows".into())
            })?;
            link.0 = Some(add_piece(key, count, &mut specs)?);
        }
        if t.machines > 0 && r.blocks.slack_blocks > 0 {
            let key = PieceKey {
                allowed: t.allowed.clone(),
                delta: r.delta,
                kind: PieceKind::Slack,
            };
            let count = t.machines.checked_mul(r.blocks.slack_blocks).ok_or_else(|| {
                Error::ResourceLimit("piece block count overflows".into())
            })?;
            link.1 = Some(add_piece(key, count, &mut specs)?);
        }
        links.push(link);
    }

    let model =
        ConfIlpModel::from_specs(&problem.p, &problem.demand, problem.relation, &specs, limits)?;
    let SolveOutcome::Feasible(reduced) = solve_model(&model, limits)? else {
        return Ok(None);
    };

    let mut pools: Vec<Pool> = vec![VecDeque::new(); specs.len()];
    for e in reduced.entries {
        pools[e.machine_type].push_back((e.config, e.count));
    }
    let broken = || Error::Internal("reduced solution does not expand".into());
    let mut machines: Vec<(usize, Configuration, u64)> = Vec::new();
    for (t, (spec, r)) in problem.types.iter().zip(&reductions).enumerate() {
        let (exact, slack) = links[t];
        if exact.is_none() && slack.is_none() {
            let mut left = spec.machines;
            while left > 0 {
                let front = pools[t].front_mut().ok_or_else(broken)?;
                let k = left.min(front.1);
                machines.push((t, front.0.clone(), k));
                front.1 -= k;
                left -= k;
                if front.1 == 0 {
                    pools[t].pop_front();
                }
            }
            continue;
        }
        for _ in 0..spec.machines {
            let mut cfg = take_sum(&mut pools[t], 1, d).ok_or_else(broken)?;
            if let Some(b) = exact {
                cfg = cfg.add(&take_sum(&mut pools[b], r.blocks.exact_blocks, d).ok_or_else(broken)?);
            }
            if let Some(b) = slack {
                cfg = cfg.add(&take_sum(&mut pools[b], r.blocks.slack_blocks, d).ok_or_else(broken)?);
            }
            machines.push((t, cfg, 1));
        }
    }
    if pools.iter().any(|p| !p.is_empty()) {
        return Err(broken());
    }
    let sched = HMSchedule::new(
        machines
            .into_iter()
            .map(|(machine_type, config, count)| crate::model::ScheduleEntry {
                machine_type,
                config,
                count,
            })
            .collect(),
    )
    .canonical();

    let raw = ConfIlpModel {
        p: problem.p.clone(),
        demand: problem.demand.clone(),
        relation: problem.relation,
        blocks: problem
            .types
            .iter()
            .map(|t| super::ModelBlock {
                machines: t.machines,
                window: t.window,
                allowed: t.allowed.clone(),
                columns: Vec::new(),
            })
            .collect(),
    };
    raw.check(&sched)
        .map_err(|e| Error::Internal(format!("expanded solution failed its check: {e}")))?;
    Ok(Some(sched))
}
