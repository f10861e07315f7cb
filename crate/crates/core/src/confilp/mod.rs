//! Configuration enumeration, configuration-ILP assembly and exact solving.

mod bnb;
mod dp;
mod windows;

pub use windows::{reduced_windows_for, solve_windows, BlockSpec, WindowProblem, WindowReduction};

use crate::error::{Error, Result};
use crate::model::{Configuration, HMSchedule, Instance, ScheduleEntry};

/// Admissible machine loads `[lower, upper]`; `upper = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LoadWindow {
    pub lower: u64,
    pub upper: Option<u64>,
}

impl LoadWindow {
    pub fn new(lower: u64, upper: Option<u64>) -> Self {
        LoadWindow { lower, upper }
    }

    pub fn bounded(lower: u64, upper: u64) -> Self {
        LoadWindow {
            lower,
            upper: Some(upper),
        }
    }

    pub fn at_most(upper: u64) -> Self {
        LoadWindow::bounded(0, upper)
    }

    pub fn contains(&self, load: u64) -> bool {
        load >= self.lower && self.upper.is_none_or(|u| load <= u)
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_some_and(|u| u < self.lower)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DemandRelation {
    /// Column usage must equal the demand vector.
    Exact,
    /// Column usage may stay below the demand vector.
    AtMost,
}

/// Caps that turn runaway solves into an explicit resource-limit outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverLimits {
    /// Largest demand-vector state space the DP solver will allocate.
    pub max_states: u64,
    /// Node budget of the branch-and-bound fallback.
    pub max_nodes: u64,
    /// Largest number of columns enumerated for a single block.
    pub max_columns: u64,
    /// Largest number of fractional-schedule guesses per feasibility test.
    pub max_guesses: u64,
}

pub const STATE_LIMIT_ENV: &str = "HMSCHED_STATE_LIMIT";
pub const NODE_LIMIT_ENV: &str = "HMSCHED_NODE_LIMIT";

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            max_states: 4_000_000,
            max_nodes: 20_000_000,
            max_columns: 2_000_000,
            max_guesses: 2_000_000,
        }
    }
}

impl SolverLimits {
    /// Defaults overridden by `HMSCHED_STATE_LIMIT` / `HMSCHED_NODE_LIMIT`.
    pub fn from_env() -> Self {
        let mut limits = SolverLimits::default();
        let read = |key: &str| std::env::var(key).ok().and_then(|v| v.trim().parse::<u64>().ok());
        if let Some(v) = read(STATE_LIMIT_ENV) {
            limits.max_states = v;
        }
        if let Some(v) = read(NODE_LIMIT_ENV) {
            limits.max_nodes = v;
        }
        limits
    }
}

/// All `c` with `0 ≤ c ≤ cap`, load in `window`, and `c_j = 0` for disallowed
/// `j`. The first coordinate varies fastest.
pub fn enumerate_configs(
    p: &[u64],
    cap: &[u64],
    window: LoadWindow,
    allowed: Option<&[bool]>,
) -> Vec<Configuration> {
    enumerate_configs_limited(p, cap, window, allowed, u64::MAX).expect("unlimited enumeration")
}

pub fn enumerate_configs_limited(
    p: &[u64],
    cap: &[u64],
    window: LoadWindow,
    allowed: Option<&[bool]>,
    limit: u64,
) -> Result<Vec<Configuration>> {
    let d = p.len();
    let mut out = Vec::new();
    if window.is_empty() {
        return Ok(out);
    }
    let bounds: Vec<u64> = (0..d)
        .map(|j| {
            if allowed.is_some_and(|a| !a[j]) {
                0
            } else {
                match window.upper {
                    Some(u) => cap[j].min(u / p[j]),
                    None => cap[j],
                }
            }
        })
        .collect();
    let mut counts = vec![0u64; d];
    fn rec(
        j: usize,
        load: u64,
        p: &[u64],
        bounds: &[u64],
        window: LoadWindow,
        counts: &mut Vec<u64>,
        out: &mut Vec<Configuration>,
        limit: u64,
    ) -> Result<()> {
        // Coordinates are fixed from the last one down to the first, so the
        // first coordinate ends up innermost.
        let mut c = 0;
        loop {
            if c > bounds[j] {
                break;
            }
            let l = load + c * p[j];
            if window.upper.is_some_and(|u| l > u) {
                break;
            }
            counts[j] = c;
            if j == 0 {
                if window.contains(l) {
                    if out.len() as u64 >= limit {
                        return Err(Error::ResourceLimit(format!(
                            "more than {limit} configurations in one block"
                        )));
                    }
                    out.push(Configuration {
                        counts: counts.clone(),
                        load: l,
                    });
                }
            } else {
                rec(j - 1, l, p, bounds, window, counts, out, limit)?;
            }
            c += 1;
        }
        counts[j] = 0;
        Ok(())
    }
    rec(d - 1, 0, p, &bounds, window, &mut counts, &mut out, limit)?;
    Ok(out)
}

/// One block of the configuration ILP: `machines` identical machines that
/// each pick a column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelBlock {
    pub machines: u64,
    pub window: LoadWindow,
    pub allowed: Option<Vec<bool>>,
    pub columns: Vec<Configuration>,
}

/// `Σ_t M_t x_t = demand` (or `≤`), `1ᵀ x_t = machines_t`, `x ≥ 0` integral.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfIlpModel {
    pub p: Vec<u64>,
    pub demand: Vec<u64>,
    pub relation: DemandRelation,
    pub blocks: Vec<ModelBlock>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    /// Machine types of the schedule are block indices.
    Feasible(HMSchedule),
    Infeasible,
}

impl SolveOutcome {
    pub fn into_schedule(self) -> Option<HMSchedule> {
        match self {
            SolveOutcome::Feasible(s) => Some(s),
            SolveOutcome::Infeasible => None,
        }
    }
}

impl ConfIlpModel {
    /// Builds one block per spec, with columns capped by the demand vector.
    pub fn from_specs(
        p: &[u64],
        demand: &[u64],
        relation: DemandRelation,
        specs: &[BlockSpec],
        limits: &SolverLimits,
    ) -> Result<Self> {
        let mut blocks = Vec::with_capacity(specs.len());
        for spec in specs {
            let columns = if spec.machines == 0 {
                Vec::new()
            } else {
                enumerate_configs_limited(
                    p,
                    demand,
                    spec.window,
                    spec.allowed.as_deref(),
                    limits.max_columns,
                )?
            };
            blocks.push(ModelBlock {
                machines: spec.machines,
                window: spec.window,
                allowed: spec.allowed.clone(),
                columns,
            });
        }
        Ok(ConfIlpModel {
            p: p.to_vec(),
            demand: demand.to_vec(),
            relation,
            blocks,
        })
    }

    /// Confirms that `sched` is a solution of this model.
    pub fn check(&self, sched: &HMSchedule) -> std::result::Result<(), String> {
        let d = self.p.len();
        let mut used = vec![0u64; self.blocks.len()];
        let mut usage = vec![0u64; d];
        for e in &sched.entries {
            let block = self
                .blocks
                .get(e.machine_type)
                .ok_or_else(|| format!("unknown block {}", e.machine_type))?;
            used[e.machine_type] += e.count;
            let load: u64 = e.config.counts.iter().zip(&self.p).map(|(c, p)| c * p).sum();
            if load != e.config.load || !block.window.contains(load) {
                return Err(format!(
                    "block {}: load {load} outside window {:?}",
                    e.machine_type, block.window
                ));
            }
            if let Some(allowed) = &block.allowed {
                if e.config.counts.iter().zip(allowed).any(|(&c, &a)| c > 0 && !a) {
                    return Err(format!("block {}: restricted job used", e.machine_type));
                }
            }
            for (u, c) in usage.iter_mut().zip(&e.config.counts) {
                *u += c * e.count;
            }
        }
        for (b, block) in self.blocks.iter().enumerate() {
            if used[b] != block.machines {
                return Err(format!(
                    "block {b}: {} machines used, {} required",
                    used[b], block.machines
                ));
            }
        }
        let ok = match self.relation {
            DemandRelation::Exact => usage == self.demand,
            DemandRelation::AtMost => usage.iter().zip(&self.demand).all(|(u, n)| u <= n),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("usage {usage:?} vs demand {:?}", self.demand))
        }
    }
}

/// One block per machine type with the given windows, restrictions applied,
/// demand `n`.
pub fn build_model(inst: &Instance, windows: &[LoadWindow]) -> Result<ConfIlpModel> {
    if windows.len() != inst.tau() {
        return Err(Error::Malformed(format!(
            "{} windows for {} machine types",
            windows.len(),
            inst.tau()
        )));
    }
    let specs: Vec<BlockSpec> = (0..inst.tau())
        .map(|t| BlockSpec {
            machines: inst.m[t],
            window: windows[t],
            allowed: inst.allowed_jobs(t),
        })
        .collect();
    ConfIlpModel::from_specs(
        &inst.p,
        &inst.n,
        DemandRelation::Exact,
        &specs,
        &SolverLimits::default(),
    )
}

/// Exact feasibility of the configuration ILP.
///
/// Dynamic programming over blocks with the remaining demand as state; falls
/// back to depth-first branch and bound when the state space exceeds
/// `limits.max_states`. Every feasible answer is checked against the model.
pub fn solve_model(model: &ConfIlpModel, limits: &SolverLimits) -> Result<SolveOutcome> {
    let solution = match dp::solve(model, limits) {
        Ok(sol) => sol,
        Err(dp::DpError::TooLarge) => bnb::solve(model, limits)?,
    };
    let Some(per_block) = solution else {
        return Ok(SolveOutcome::Infeasible);
    };
    let mut entries = Vec::new();
    for (b, cols) in per_block.into_iter().enumerate() {
        for (col, count) in cols {
            if count > 0 {
                entries.push(ScheduleEntry {
                    machine_type: b,
                    config: model.blocks[b].columns[col].clone(),
                    count,
                });
            }
        }
    }
    let sched = HMSchedule::new(entries).canonical();
    model
        .check(&sched)
        .map_err(|e| Error::Internal(format!("ConfILP solution failed its check: {e}")))?;
    Ok(SolveOutcome::Feasible(sched))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(cfgs: &[Configuration]) -> Vec<Vec<u64>> {
        cfgs.iter().map(|c| c.counts.clone()).collect()
    }

    #[test]
    fn enumeration_order_and_filter() {
        let all = enumerate_configs(&[2, 3], &[3, 2], LoadWindow::at_most(6), None);
        assert_eq!(
            counts(&all),
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![2, 0],
                vec![3, 0],
                vec![0, 1],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        let only_first =
            enumerate_configs(&[2, 3], &[3, 2], LoadWindow::at_most(6), Some(&[true, false]));
        assert_eq!(
            counts(&only_first),
            vec![vec![0, 0], vec![1, 0], vec![2, 0], vec![3, 0]]
        );
        let zero = enumerate_configs(&[2, 3], &[3, 2], LoadWindow::at_most(0), None);
        assert_eq!(counts(&zero), vec![vec![0, 0]]);
    }

    #[test]
    fn enumeration_matches_nested_loops() {
        let p = [2, 3, 5];
        let cap = [4, 3, 2];
        for (l, u) in [(0, 0), (3, 9), (5, 5), (7, 40), (0, 100)] {
            let got = enumerate_configs(&p, &cap, LoadWindow::bounded(l, u), None);
            let mut expect = 0;
            for a in 0..=cap[0] {
                for b in 0..=cap[1] {
                    for c in 0..=cap[2] {
                        let load = 2 * a + 3 * b + 5 * c;
                        if (l..=u).contains(&load) {
                            expect += 1;
                        }
                    }
                }
            }
            assert_eq!(got.len(), expect, "window ({l},{u})");
        }
    }

    fn three_machines_at(speeds: Vec<u64>) -> Instance {
        Instance {
            p: vec![1],
            n: vec![7],
            s: speeds,
            m: vec![1, 1, 1],
            restrict: None,
        }
    }

    #[test]
    fn three_machine_model_columns() {
        let inst = three_machines_at(vec![3, 2, 2]);
        let windows: Vec<_> = inst.s.iter().map(|&s| LoadWindow::at_most(s)).collect();
        let model = build_model(&inst, &windows).unwrap();
        let sizes: Vec<_> = model.blocks.iter().map(|b| b.columns.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let sol = solve_model(&model, &SolverLimits::default()).unwrap();
        let SolveOutcome::Feasible(s) = sol else {
            panic!("expected feasible")
        };
        let mut loads: Vec<u64> = s.entries.iter().map(|e| e.config.load).collect();
        loads.sort();
        assert_eq!(loads, vec![2, 2, 3]);
    }

    #[test]
    fn three_machine_model_infeasible_below_one_fifth() {
        let inst = three_machines_at(vec![2, 2, 1]);
        let windows: Vec<_> = inst.s.iter().map(|&s| LoadWindow::at_most(s)).collect();
        let model = build_model(&inst, &windows).unwrap();
        assert_eq!(
            solve_model(&model, &SolverLimits::default()).unwrap(),
            SolveOutcome::Infeasible
        );
    }

    #[test]
    fn empty_demand_and_zero_machines() {
        let inst = Instance {
            p: vec![2],
            n: vec![0],
            s: vec![3, 4],
            m: vec![2, 0],
            restrict: None,
        };
        let windows = vec![LoadWindow::at_most(3), LoadWindow::at_most(4)];
        let model = build_model(&inst, &windows).unwrap();
        let SolveOutcome::Feasible(s) = solve_model(&model, &SolverLimits::default()).unwrap() else {
            panic!()
        };
        assert_eq!(s.entries.len(), 1);
        assert!(s.entries[0].config.is_zero());

        let jobs = Instance {
            n: vec![1],
            m: vec![0, 0],
            ..inst
        };
        let model = build_model(&jobs, &windows).unwrap();
        assert_eq!(
            solve_model(&model, &SolverLimits::default()).unwrap(),
            SolveOutcome::Infeasible
        );
    }

    #[test]
    fn restricted_columns_use_allowed_jobs_only() {
        let inst = Instance {
            p: vec![1, 1],
            n: vec![2, 2],
            s: vec![2, 2],
            m: vec![1, 1],
            restrict: Some(vec![vec![true, false], vec![false, true]]),
        };
        let windows = vec![LoadWindow::at_most(2), LoadWindow::at_most(2)];
        let model = build_model(&inst, &windows).unwrap();
        assert!(model.blocks[0].columns.iter().all(|c| c.counts[1] == 0));
        assert!(model.blocks[1].columns.iter().all(|c| c.counts[0] == 0));
        assert!(matches!(
            solve_model(&model, &SolverLimits::default()).unwrap(),
            SolveOutcome::Feasible(_)
        ));
    }

    #[test]
    fn branch_and_bound_fallback_agrees_with_dp() {
        let limits = SolverLimits::default();
        let tiny = SolverLimits {
            max_states: 1,
            ..limits
        };
        let p = [2, 3, 5];
        for (n, windows, m) in [
            (vec![3, 2, 1], vec![(0, 6), (4, 9)], vec![2, 1]),
            (vec![4, 4, 0], vec![(5, 7), (0, 3)], vec![3, 1]),
            (vec![1, 1, 1], vec![(10, 10)], vec![1]),
            (vec![5, 0, 2], vec![(6, 8), (2, 4)], vec![2, 2]),
        ] {
            let specs: Vec<_> = windows
                .iter()
                .zip(&m)
                .map(|(&(l, u), &k)| BlockSpec {
                    machines: k,
                    window: LoadWindow::bounded(l, u),
                    allowed: None,
                })
                .collect();
            for rel in [DemandRelation::Exact, DemandRelation::AtMost] {
                let model = ConfIlpModel::from_specs(&p, &n, rel, &specs, &limits).unwrap();
                let a = solve_model(&model, &limits).unwrap();
                let b = solve_model(&model, &tiny).unwrap();
                assert_eq!(
                    matches!(a, SolveOutcome::Feasible(_)),
                    matches!(b, SolveOutcome::Feasible(_)),
                    "n={n:?} windows={windows:?} rel={rel:?}"
                );
            }
        }
    }

    #[test]
    fn node_limit_is_a_resource_limit() {
        let limits = SolverLimits {
            max_states: 1,
            max_nodes: 3,
            ..SolverLimits::default()
        };
        let specs = vec![BlockSpec {
            machines: 6,
            window: LoadWindow::bounded(0, 7),
            allowed: None,
        }];
        let model =
            ConfIlpModel::from_specs(&[2, 3], &[9, 5], DemandRelation::Exact, &specs, &limits)
                .unwrap();
        assert!(matches!(
            solve_model(&model, &limits),
            Err(Error::ResourceLimit(_))
        ));
    }
}
