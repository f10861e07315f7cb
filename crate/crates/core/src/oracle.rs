//! Brute-force ground truth and seeded instance generators.
//!
//! The oracles expand every machine individually and never use any of the
//! reductions, so they are independent of the solvers they check. Instances
//! outside the caps are refused with [`Error::OracleRefused`], never
//! approximated.

use std::cmp::Ordering;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    dot, Configuration, FeasibilityQuery, HMSchedule, Instance, JobRelation, Objective, Relation,
};
use crate::rational::{ceil_u64, floor_u64, int, Rational};

/// Most machines the oracles will expand.
pub const MAX_MACHINES: u64 = 6;
/// Largest demand state space `Π(n_j + 1)` for the dynamic programs.
pub const MAX_STATES: u64 = 6_000;
/// Largest number of complete assignments the plain recursion will visit.
pub const MAX_LEAVES: u128 = 3_000_000;

/// Completion time `num / den`; `den = 0` stands for +∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Frac {
    num: u64,
    den: u64,
}

impl Frac {
    const ZERO: Frac = Frac { num: 0, den: 1 };
    const INF: Frac = Frac { num: 1, den: 0 };

    fn new(num: u64, den: u64) -> Frac {
        debug_assert!(den > 0);
        Frac { num, den }
    }

    fn to_rational(self) -> Rational {
        Rational::new(BigInt::from(self.num), BigInt::from(self.den))
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.den, other.den) {
            (0, 0) => Ordering::Equal,
            (0, _) => Ordering::Greater,
            (_, 0) => Ordering::Less,
            _ => (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128)),
        }
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Machines one by one, and the demand state space.
struct Expanded {
    machines: Vec<usize>,
    radix: Vec<u64>,
    strides: Vec<usize>,
    states: usize,
}

impl Expanded {
    fn new(inst: &Instance) -> Result<Self> {
        inst.validate_shape()?;
        let count = inst.machine_count();
        if count > MAX_MACHINES {
            return Err(Error::OracleRefused(format!(
                "{count} machines exceed the cap of {MAX_MACHINES}"
            )));
        }
        let mut states: u64 = 1;
        let mut strides = Vec::new();
        for &nj in &inst.n {
            strides.push(states as usize);
            states = states
                .checked_mul(nj + 1)
                .filter(|&s| s <= MAX_STATES)
                .ok_or_else(|| {
                    Error::OracleRefused(format!("demand state space above {MAX_STATES}"))
                })?;
        }
        let machines = (0..inst.tau())
            .flat_map(|t| std::iter::repeat_n(t, inst.m[t] as usize))
            .collect();
        Ok(Expanded {
            machines,
            radix: inst.n.iter().map(|&v| v + 1).collect(),
            strides,
            states: states as usize,
        })
    }

    fn decode(&self, idx: usize) -> Vec<u64> {
        let mut rest = idx;
        self.radix
            .iter()
            .map(|&r| {
                let v = rest % r as usize;
                rest /= r as usize;
                v as u64
            })
            .collect()
    }

    fn encode(&self, x: &[u64]) -> usize {
        x.iter().zip(&self.strides).map(|(&v, &s)| v as usize * s).sum()
    }

    /// All `c ≤ n` a machine of type `t` may run.
    fn configs(&self, inst: &Instance, t: usize) -> Vec<(usize, Vec<u64>, u64)> {
        (0..self.states)
            .map(|i| (i, self.decode(i)))
            .filter(|(_, c)| c.iter().enumerate().all(|(j, &k)| k == 0 || inst.is_allowed(j, t)))
            .map(|(i, c)| {
                let load = dot(&c, &inst.p);
                (i, c, load)
            })
            .collect()
    }
}

fn fits(c: &[u64], x: &[u64]) -> bool {
    c.iter().zip(x).all(|(a, b)| a <= b)
}

fn unschedulable_job(inst: &Instance) -> Option<usize> {
    (0..inst.d()).find(|&j| inst.n[j] > 0 && !inst.present_types().any(|t| inst.is_allowed(j, t)))
}

fn combine(obj: Objective, v: Frac, rest: Frac) -> Frac {
    match obj {
        Objective::Cmax => v.max(rest),
        _ => v.min(rest),
    }
}

fn better(obj: Objective, a: Frac, b: Frac) -> bool {
    match obj {
        Objective::Cmax => a < b,
        _ => a > b,
    }
}

/// Exact optimum and an optimal schedule, by dynamic programming over the
/// individual machines with the remaining demand vector as state.
pub fn brute_force(inst: &Instance, objective: Objective) -> Result<(Rational, HMSchedule)> {
    let ex = Expanded::new(inst)?;
    if ex.machines.is_empty() {
        return Err(Error::Malformed("instance has no machines".into()));
    }
    if let Some(j) = unschedulable_job(inst) {
        return Err(Error::NoFeasibleSchedule(format!(
            "job type {j} is not allowed on any machine"
        )));
    }
    match objective {
        Objective::Cenvy => envy_dp(inst, &ex),
        _ => scalar_dp(inst, &ex, objective),
    }
}

fn scalar_dp(inst: &Instance, ex: &Expanded, obj: Objective) -> Result<(Rational, HMSchedule)> {
    let mm = ex.machines.len();
    let configs: Vec<_> = (0..inst.tau()).map(|t| ex.configs(inst, t)).collect();
    let identity = if obj == Objective::Cmax { Frac::ZERO } else { Frac::INF };
    let mut f: Vec<Vec<Option<Frac>>> = vec![vec![None; ex.states]; mm + 1];
    f[mm][0] = Some(identity);
    for i in (0..mm).rev() {
        let t = ex.machines[i];
        let s = inst.s[t];
        for x in 0..ex.states {
            let xd = ex.decode(x);
            let mut best: Option<Frac> = None;
            for (ci, c, load) in &configs[t] {
                if !fits(c, &xd) {
                    continue;
                }
                if let Some(rest) = f[i + 1][x - ci] {
                    let v = combine(obj, Frac::new(*load, s), rest);
                    if best.is_none_or(|b| better(obj, v, b)) {
                        best = Some(v);
                    }
                }
            }
            f[i][x] = best;
        }
    }
    let full = ex.states - 1;
    let value = f[0][full].ok_or_else(|| Error::NoFeasibleSchedule("no assignment".into()))?;
    let mut machines = Vec::with_capacity(mm);
    let mut x = full;
    for i in 0..mm {
        let t = ex.machines[i];
        let xd = ex.decode(x);
        let (ci, c, _) = configs[t]
            .iter()
            .find(|(ci, c, load)| {
                fits(c, &xd)
                    && f[i + 1][x - ci].is_some_and(|rest| {
                        combine(obj, Frac::new(*load, inst.s[t]), rest) == f[i][x].unwrap()
                    })
            })
            .expect("dp table is consistent");
        machines.push((t, Configuration::new(c.clone(), &inst.p)));
        x -= ci;
    }
    Ok((value.to_rational(), HMSchedule::from_machines(machines)))
}

/// Pareto front of (largest, smallest) completion time pairs.
type Front = Vec<(Frac, Frac)>;

fn push_front(front: &mut Front, cand: (Frac, Frac)) {
    if front.iter().any(|&(mx, mn)| mx <= cand.0 && mn >= cand.1) {
        return;
    }
    front.retain(|&(mx, mn)| !(cand.0 <= mx && cand.1 >= mn));
    front.push(cand);
}

fn envy_of(pair: (Frac, Frac)) -> Rational {
    pair.0.to_rational() - pair.1.to_rational()
}

fn envy_dp(inst: &Instance, ex: &Expanded) -> Result<(Rational, HMSchedule)> {
    let mm = ex.machines.len();
    let configs: Vec<_> = (0..inst.tau()).map(|t| ex.configs(inst, t)).collect();
    let mut f: Vec<Vec<Front>> = vec![vec![Vec::new(); ex.states]; mm + 1];
    f[mm][0] = vec![(Frac::ZERO, Frac::INF)];
    for i in (0..mm).rev() {
        let t = ex.machines[i];
        for x in 0..ex.states {
            let xd = ex.decode(x);
            let mut front = Vec::new();
            for (ci, c, load) in &configs[t] {
                if !fits(c, &xd) {
                    continue;
                }
                let v = Frac::new(*load, inst.s[t]);
                for &(mx, mn) in &f[i + 1][x - ci] {
                    push_front(&mut front, (v.max(mx), v.min(mn)));
                }
            }
            f[i][x] = front;
        }
    }
    let full = ex.states - 1;
    let target = f[0][full]
        .iter()
        .copied()
        .min_by(|a, b| envy_of(*a).cmp(&envy_of(*b)).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::NoFeasibleSchedule("no assignment".into()))?;
    let mut machines = Vec::with_capacity(mm);
    let mut x = full;
    for i in 0..mm {
        let t = ex.machines[i];
        let xd = ex.decode(x);
        let (ci, c, _) = configs[t]
            .iter()
            .find(|(ci, c, load)| {
                let v = Frac::new(*load, inst.s[t]);
                fits(c, &xd)
                    && v <= target.0
                    && v >= target.1
                    && f[i + 1][x - ci]
                        .iter()
                        .any(|&(mx, mn)| mx <= target.0 && mn >= target.1)
            })
            .expect("pareto table is consistent");
        machines.push((t, Configuration::new(c.clone(), &inst.p)));
        x -= ci;
    }
    Ok((envy_of(target), HMSchedule::from_machines(machines)))
}

/// Per-type admissible load range `[lo, hi]` for a feasibility query.
fn load_range(q: &FeasibilityQuery, speed: u64) -> (u64, Option<u64>) {
    let cap = &q.threshold * int(speed);
    let (mut lo, hi) = match q.relation {
        Relation::Le => (0, Some(floor_u64(&cap))),
        Relation::Ge => (ceil_u64(&cap), None),
    };
    if let Some(k) = &q.idle_cap {
        lo = lo.max(ceil_u64(&(&cap - k)));
    }
    (lo, hi)
}

/// Exhaustive feasibility for the query semantics of [`crate::verify_schedule`],
/// optionally with per-type lower bounds `floors[t]` on every machine's
/// configuration. Machines never receive more than `n_j` jobs of type `j`.
pub fn brute_force_witness(
    inst: &Instance,
    q: &FeasibilityQuery,
    floors: Option<&[Vec<u64>]>,
) -> Result<Option<HMSchedule>> {
    let ex = Expanded::new(inst)?;
    let mm = ex.machines.len();
    let configs: Vec<Vec<(usize, Vec<u64>, u64)>> = (0..inst.tau())
        .map(|t| {
            let (lo, hi) = load_range(q, inst.s[t]);
            ex.configs(inst, t)
                .into_iter()
                .filter(|(_, c, load)| {
                    *load >= lo
                        && hi.is_none_or(|h| *load <= h)
                        && floors.is_none_or(|f| fits(&f[t], c))
                })
                .collect()
        })
        .collect();
    let step = |x: usize, xd: &[u64], ci: usize, c: &[u64]| -> Option<usize> {
        match q.job_relation {
            JobRelation::Eq | JobRelation::Le => fits(c, xd).then(|| x - ci),
            JobRelation::Ge => {
                let r: Vec<u64> = xd.iter().zip(c).map(|(a, b)| a.saturating_sub(*b)).collect();
                Some(ex.encode(&r))
            }
        }
    };
    let mut reach: Vec<Vec<bool>> = vec![vec![false; ex.states]; mm + 1];
    reach[0][ex.states - 1] = true;
    for i in 0..mm {
        let t = ex.machines[i];
        for x in 0..ex.states {
            if !reach[i][x] {
                continue;
            }
            let xd = ex.decode(x);
            for (ci, c, _) in &configs[t] {
                if let Some(y) = step(x, &xd, *ci, c) {
                    reach[i + 1][y] = true;
                }
            }
        }
    }
    let end = match q.job_relation {
        JobRelation::Le => reach[mm].iter().position(|&b| b),
        _ => reach[mm][0].then_some(0),
    };
    let Some(mut x) = end else {
        return Ok(None);
    };
    let mut machines = Vec::with_capacity(mm);
    for i in (0..mm).rev() {
        let t = ex.machines[i];
        let (y, c) = (0..ex.states)
            .filter(|&y| reach[i][y])
            .find_map(|y| {
                let yd = ex.decode(y);
                configs[t]
                    .iter()
                    .find(|(ci, c, _)| step(y, &yd, *ci, c) == Some(x))
                    .map(|(_, c, _)| (y, c.clone()))
            })
            .expect("reachability table is consistent");
        machines.push((t, Configuration::new(c, &inst.p)));
        x = y;
    }
    Ok(Some(HMSchedule::from_machines(machines)))
}

pub fn brute_force_feasibility(
    inst: &Instance,
    q: &FeasibilityQuery,
    floors: Option<&[Vec<u64>]>,
) -> Result<bool> {
    Ok(brute_force_witness(inst, q, floors)?.is_some())
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Second, independent oracle: plain recursion over every assignment of
/// jobs to machines, without memoization.
pub fn brute_force_recursive(inst: &Instance, objective: Objective) -> Result<Rational> {
    inst.validate_shape()?;
    let count = inst.machine_count();
    if count == 0 {
        return Err(Error::Malformed("instance has no machines".into()));
    }
    if count > MAX_MACHINES {
        return Err(Error::OracleRefused(format!("{count} machines")));
    }
    let leaves = inst
        .n
        .iter()
        .map(|&nj| binomial(nj + count - 1, count - 1))
        .try_fold(1u128, |acc, b| acc.checked_mul(b).filter(|&v| v <= MAX_LEAVES));
    if leaves.is_none() {
        return Err(Error::OracleRefused("too many assignments".into()));
    }
    if let Some(j) = unschedulable_job(inst) {
        return Err(Error::NoFeasibleSchedule(format!(
            "job type {j} is not allowed on any machine"
        )));
    }
    let machines: Vec<usize> = (0..inst.tau())
        .flat_map(|t| std::iter::repeat_n(t, inst.m[t] as usize))
        .collect();

    struct Walk<'a> {
        inst: &'a Instance,
        machines: &'a [usize],
        objective: Objective,
        loads: Vec<u64>,
        remaining: Vec<u64>,
        best: Option<Rational>,
    }

    impl Walk<'_> {
        fn leaf(&mut self) {
            let comps: Vec<Frac> = self
                .machines
                .iter()
                .zip(&self.loads)
                .map(|(&t, &l)| Frac::new(l, self.inst.s[t]))
                .collect();
            let mx = *comps.iter().max().unwrap();
            let mn = *comps.iter().min().unwrap();
            let v = match self.objective {
                Objective::Cmax => mx.to_rational(),
                Objective::Cmin => mn.to_rational(),
                Objective::Cenvy => mx.to_rational() - mn.to_rational(),
            };
            let improves = match (&self.best, self.objective) {
                (None, _) => true,
                (Some(b), Objective::Cmin) => v > *b,
                (Some(b), _) => v < *b,
            };
            if improves {
                self.best = Some(v);
            }
        }

        fn go(&mut self, i: usize, j: usize) {
            let d = self.inst.d();
            if j == d {
                return self.go(i + 1, 0);
            }
            if i + 1 == self.machines.len() {
                // The last machine takes everything that is left.
                let t = self.machines[i];
                if (0..d).any(|k| self.remaining[k] > 0 && !self.inst.is_allowed(k, t)) {
                    return;
                }
                let load = dot(&self.remaining, &self.inst.p);
                self.loads[i] = load;
                self.leaf();
                self.loads[i] = 0;
                return;
            }
            let t = self.machines[i];
            let most = if self.inst.is_allowed(j, t) { self.remaining[j] } else { 0 };
            for k in 0..=most {
                self.remaining[j] -= k;
                self.loads[i] += k * self.inst.p[j];
                self.go(i, j + 1);
                self.loads[i] -= k * self.inst.p[j];
                self.remaining[j] += k;
            }
        }
    }

    let mut walk = Walk {
        inst,
        machines: &machines,
        objective,
        loads: vec![0; machines.len()],
        remaining: inst.n.clone(),
        best: None,
    };
    walk.go(0, 0);
    walk.best
        .ok_or_else(|| Error::NoFeasibleSchedule("no assignment".into()))
}

/// Ranges are inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GenParams {
    pub d_range: (usize, usize),
    pub pmax_range: (u64, u64),
    pub machine_count_range: (u64, u64),
    pub speed_range: (u64, u64),
    pub job_total_range: (u64, u64),
    pub restricted: bool,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            d_range: (1, 3),
            pmax_range: (1, 6),
            machine_count_range: (1, 5),
            speed_range: (1, 12),
            job_total_range: (0, 30),
            restricted: false,
            seed: 0,
        }
    }
}

/// Boundary regimes that the generators are biased towards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Defaults: any mix of machine sizes.
    Mixed,
    /// Two coprime-ish job sizes, few fast machines and much work, so that
    /// compressed machines exceed `r0` and the balanced pipeline engages.
    Large,
    /// Many slow machines, little work.
    Small,
    /// `pmax = 1`.
    UnitJobs,
    /// `d = 1`.
    SingleType,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::Mixed,
        Regime::Large,
        Regime::Small,
        Regime::UnitJobs,
        Regime::SingleType,
    ];
}

/// Job-size pairs whose lcm is large enough for compressed speeds to pass `r0`.
pub const LARGE_SIZE_SETS: [[u64; 2]; 5] = [[4, 5], [3, 4], [2, 5], [3, 5], [5, 6]];

impl GenParams {
    pub fn regime(regime: Regime, seed: u64) -> Self {
        let base = GenParams {
            seed,
            ..GenParams::default()
        };
        match regime {
            Regime::Mixed => base,
            Regime::Large => GenParams {
                d_range: (2, 2),
                pmax_range: (4, 6),
                machine_count_range: (1, 3),
                speed_range: (1, 9),
                job_total_range: (18, 30),
                ..base
            },
            Regime::Small => GenParams {
                machine_count_range: (3, 5),
                speed_range: (1, 4),
                job_total_range: (0, 12),
                ..base
            },
            Regime::UnitJobs => GenParams {
                pmax_range: (1, 1),
                ..base
            },
            Regime::SingleType => GenParams {
                d_range: (1, 1),
                ..base
            },
        }
    }
}

/// A reproducible instance: identical parameters give identical instances.
///
/// Machines draw speeds independently and equal speeds are merged into one
/// type. With `restricted`, every job type is allowed on at least one type.
pub fn generate(params: &GenParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let span = |rng: &mut ChaCha8Rng, (lo, hi): (u64, u64)| rng.gen_range(lo..=hi.max(lo));
    let d = rng.gen_range(params.d_range.0..=params.d_range.1.max(params.d_range.0));
    let pmax = span(&mut rng, params.pmax_range).max(1);

    let large_sizes = d == 2 && params.pmax_range.0 >= 4;
    let p: Vec<u64> = if large_sizes {
        let set = LARGE_SIZE_SETS
            .iter()
            .filter(|s| s[1] <= pmax.max(5))
            .collect::<Vec<_>>();
        let pick = set.choose(&mut rng).copied().unwrap_or(&LARGE_SIZE_SETS[0]);
        pick.to_vec()
    } else if pmax as usize >= d {
        let mut pool: Vec<u64> = (1..pmax).collect();
        pool.shuffle(&mut rng);
        let mut p: Vec<u64> = pool.into_iter().take(d - 1).collect();
        p.push(pmax);
        p.sort_unstable();
        p
    } else {
        let mut p: Vec<u64> = (0..d - 1).map(|_| rng.gen_range(1..=pmax)).collect();
        p.push(pmax);
        p.sort_unstable();
        p
    };

    let machines = span(&mut rng, params.machine_count_range).max(1);
    let mut s: Vec<u64> = Vec::new();
    let mut m: Vec<u64> = Vec::new();
    for _ in 0..machines {
        let speed = span(&mut rng, params.speed_range).max(1);
        match s.iter().position(|&v| v == speed) {
            Some(t) => m[t] += 1,
            None => {
                s.push(speed);
                m.push(1);
            }
        }
    }

    let total = span(&mut rng, params.job_total_range);
    let mut n = vec![0u64; d];
    for _ in 0..total {
        n[rng.gen_range(0..d)] += 1;
    }

    let restrict = params.restricted.then(|| {
        let tau = s.len();
        (0..d)
            .map(|_| {
                let mut row: Vec<bool> = (0..tau).map(|_| rng.gen_bool(0.6)).collect();
                if !row.iter().any(|&b| b) {
                    row[rng.gen_range(0..tau)] = true;
                }
                row
            })
            .collect()
    });
    Instance {
        p,
        n,
        s,
        m,
        restrict,
    }
}
