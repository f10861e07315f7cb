//! Instances, configurations, high-multiplicity schedules and certificate
//! verification.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{int, Rational};

/// A high-multiplicity instance: `d` job types with sizes `p` and
/// multiplicities `n`, `tau` machine types with speeds `s` and
/// multiplicities `m`.
///
/// `restrict[j][t]` is `true` when job type `j` may run on machine type `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instance {
    pub p: Vec<u64>,
    pub n: Vec<u64>,
    pub s: Vec<u64>,
    pub m: Vec<u64>,
    pub restrict: Option<Vec<Vec<bool>>>,
}

impl Instance {
    /// Builds and validates a user-facing instance (all sizes and speeds positive).
    pub fn new(
        p: Vec<u64>,
        n: Vec<u64>,
        s: Vec<u64>,
        m: Vec<u64>,
        restrict: Option<Vec<Vec<bool>>>,
    ) -> Result<Self> {
        let inst = Instance { p, n, s, m, restrict };
        inst.validate_shape()?;
        if let Some(t) = inst.s.iter().position(|&v| v == 0) {
            return Err(Error::Malformed(format!("speed of machine type {t} is zero")));
        }
        Ok(inst)
    }

    /// Same jobs and machine multiplicities, different speeds. Zero speeds are
    /// allowed here; normalization produces them for threshold 0.
    pub fn with_speeds(&self, s: Vec<u64>) -> Instance {
        debug_assert_eq!(s.len(), self.s.len());
        Instance { s, ..self.clone() }
    }

    pub fn validate_shape(&self) -> Result<()> {
        let d = self.p.len();
        let tau = self.s.len();
        if d == 0 {
            return Err(Error::Malformed("instance has no job types".into()));
        }
        if tau == 0 {
            return Err(Error::Malformed("instance has no machine types".into()));
        }
        if self.n.len() != d {
            return Err(Error::Malformed(format!(
                "n has {} entries, expected d = {d}",
                self.n.len()
            )));
        }
        if self.m.len() != tau {
            return Err(Error::Malformed(format!(
                "m has {} entries, expected tau = {tau}",
                self.m.len()
            )));
        }
        if let Some(j) = self.p.iter().position(|&v| v == 0) {
            return Err(Error::Malformed(format!("size of job type {j} is zero")));
        }
        if let Some(r) = &self.restrict {
            if r.len() != d || r.iter().any(|row| row.len() != tau) {
                return Err(Error::Malformed(format!(
                    "restriction matrix must be {d} x {tau}"
                )));
            }
        }
        let mut total: u64 = 0;
        for (&pj, &nj) in self.p.iter().zip(&self.n) {
            total = pj
                .checked_mul(nj)
                .and_then(|l| total.checked_add(l))
                .ok_or_else(|| Error::Malformed("total load overflows 64 bits".into()))?;
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.p.len()
    }

    pub fn tau(&self) -> usize {
        self.s.len()
    }

    pub fn pmax(&self) -> u64 {
        self.p.iter().copied().max().unwrap_or(1)
    }

    pub fn pmin(&self) -> u64 {
        self.p.iter().copied().min().unwrap_or(1)
    }

    /// `p·n`, the total processing volume.
    pub fn total_load(&self) -> u64 {
        dot(&self.p, &self.n)
    }

    /// `‖m‖₁`, the number of machines.
    pub fn machine_count(&self) -> u64 {
        self.m.iter().sum()
    }

    pub fn job_count(&self) -> u64 {
        self.n.iter().sum()
    }

    /// Speed of the fastest machine type that has at least one machine.
    pub fn smax(&self) -> u64 {
        self.present_types().map(|t| self.s[t]).max().unwrap_or(0)
    }

    /// Types with `m_t > 0`, in index order.
    pub fn present_types(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tau()).filter(move |&t| self.m[t] > 0)
    }

    pub fn is_allowed(&self, job: usize, machine_type: usize) -> bool {
        self.restrict.as_ref().is_none_or(|r| r[job][machine_type])
    }

    /// Allowed-job mask for a machine type, `None` when every job is allowed.
    pub fn allowed_jobs(&self, machine_type: usize) -> Option<Vec<bool>> {
        self.restrict
            .as_ref()
            .map(|r| r.iter().map(|row| row[machine_type]).collect())
    }

    /// Capacity `Σ s_t m_t`.
    pub fn capacity(&self) -> u128 {
        self.s
            .iter()
            .zip(&self.m)
            .map(|(&s, &m)| s as u128 * m as u128)
            .sum()
    }
}

pub fn dot(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Job multiplicities placed on a single machine, with their load `p·counts`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub counts: Vec<u64>,
    pub load: u64,
}

impl Configuration {
    pub fn new(counts: Vec<u64>, p: &[u64]) -> Self {
        let load = dot(&counts, p);
        Configuration { counts, load }
    }

    pub fn zero(d: usize) -> Self {
        Configuration {
            counts: vec![0; d],
            load: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Componentwise sum; loads add.
    pub fn add(&self, other: &Configuration) -> Configuration {
        Configuration {
            counts: self
                .counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
            load: self.load + other.load,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScheduleEntry {
    pub machine_type: usize,
    pub config: Configuration,
    pub count: u64,
}

/// A schedule in high-multiplicity encoding: how many machines of each type
/// run each configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct HMSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl HMSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Self {
        HMSchedule { entries }
    }

    /// Merges equal `(type, config)` pairs, drops zero counts and sorts by
    /// type then configuration.
    pub fn canonical(&self) -> HMSchedule {
        let mut merged: BTreeMap<(usize, Configuration), u64> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.count > 0) {
            *merged.entry((e.machine_type, e.config.clone())).or_default() += e.count;
        }
        HMSchedule {
            entries: merged
                .into_iter()
                .map(|((machine_type, config), count)| ScheduleEntry {
                    machine_type,
                    config,
                    count,
                })
                .collect(),
        }
    }

    /// Builds a canonical schedule from individual machine assignments.
    pub fn from_machines(machines: impl IntoIterator<Item = (usize, Configuration)>) -> Self {
        let entries = machines
            .into_iter()
            .map(|(machine_type, config)| ScheduleEntry {
                machine_type,
                config,
                count: 1,
            })
            .collect();
        HMSchedule { entries }.canonical()
    }

    /// Number of machines the schedule uses per type.
    pub fn machines_per_type(&self, tau: usize) -> Vec<u64> {
        let mut out = vec![0; tau];
        for e in &self.entries {
            if e.machine_type < tau {
                out[e.machine_type] += e.count;
            }
        }
        out
    }
}

/// `Σ count · config.counts` over all entries.
pub fn aggregate_jobs(sched: &HMSchedule, d: usize) -> Vec<u64> {
    let mut usage = vec![0u64; d];
    for e in &sched.entries {
        for (u, &c) in usage.iter_mut().zip(&e.config.counts) {
            *u += c * e.count;
        }
    }
    usage
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    /// Completion time at most the threshold.
    Le,
    /// Completion time at least the threshold.
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JobRelation {
    Eq,
    Le,
    Ge,
}

impl JobRelation {
    pub fn holds(self, usage: &[u64], n: &[u64]) -> bool {
        let cmp = |a: u64, b: u64| match self {
            JobRelation::Eq => a == b,
            JobRelation::Le => a <= b,
            JobRelation::Ge => a >= b,
        };
        usage.iter().zip(n).all(|(&a, &b)| cmp(a, b))
    }
}

impl fmt::Display for JobRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JobRelation::Eq => "=",
            JobRelation::Le => "<=",
            JobRelation::Ge => ">=",
        })
    }
}

/// Optimization objective over completion times `C_i = L_i / s_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Minimize the largest completion time.
    Cmax,
    /// Maximize the smallest completion time.
    Cmin,
    /// Minimize the largest minus the smallest completion time.
    Cenvy,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Cmax, Objective::Cmin, Objective::Cenvy];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Cmax => "cmax",
            Objective::Cmin => "cmin",
            Objective::Cenvy => "cenvy",
        }
    }

    /// The objective value of a schedule as reported by [`verify_schedule`].
    pub fn value_of(self, report: &VerificationReport) -> Rational {
        match self {
            Objective::Cmax => report.max_completion.clone(),
            Objective::Cmin => report.min_completion.clone(),
            Objective::Cenvy => report.envy(),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cmax" => Ok(Objective::Cmax),
            "cmin" => Ok(Objective::Cmin),
            "cenvy" => Ok(Objective::Cenvy),
            other => Err(Error::Malformed(format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibilityQuery {
    pub relation: Relation,
    pub threshold: Rational,
    /// Upper bound on every machine's idle load `T·s ∸ L`; used with [`Relation::Le`].
    pub idle_cap: Option<Rational>,
    pub job_relation: JobRelation,
}

impl FeasibilityQuery {
    pub fn makespan(threshold: Rational) -> Self {
        FeasibilityQuery {
            relation: Relation::Le,
            threshold,
            idle_cap: None,
            job_relation: JobRelation::Eq,
        }
    }

    pub fn min_completion(threshold: Rational) -> Self {
        FeasibilityQuery {
            relation: Relation::Ge,
            threshold,
            idle_cap: None,
            job_relation: JobRelation::Eq,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub ok: bool,
    pub max_completion: Rational,
    pub min_completion: Rational,
    pub max_idle_load: Rational,
    pub job_usage: Vec<u64>,
    pub violations: Vec<String>,
}

impl VerificationReport {
    /// `max_completion − min_completion`.
    pub fn envy(&self) -> Rational {
        &self.max_completion - &self.min_completion
    }
}

/// Checks a schedule against an instance and a feasibility query.
///
/// Structural problems (wrong machine counts, restricted jobs, stale loads)
/// are reported as violations; only dimension mismatches are errors.
pub fn verify_schedule(
    inst: &Instance,
    sched: &HMSchedule,
    q: &FeasibilityQuery,
) -> Result<VerificationReport> {
    let d = inst.d();
    let tau = inst.tau();
    for e in &sched.entries {
        if e.machine_type >= tau {
            return Err(Error::Malformed(format!(
                "schedule references machine type {} but tau = {tau}",
                e.machine_type
            )));
        }
        if e.config.counts.len() != d {
            return Err(Error::Malformed(format!(
                "configuration has {} entries, expected d = {d}",
                e.config.counts.len()
            )));
        }
    }

    let mut violations = Vec::new();
    let used = sched.machines_per_type(tau);
    for t in 0..tau {
        if used[t] != inst.m[t] {
            violations.push(format!(
                "machine type {t}: schedule uses {} machines, instance has {}",
                used[t], inst.m[t]
            ));
        }
    }

    let mut max_completion: Option<Rational> = None;
    let mut min_completion: Option<Rational> = None;
    let mut max_idle = Rational::zero();
    for e in sched.entries.iter().filter(|e| e.count > 0) {
        let t = e.machine_type;
        let load = dot(&e.config.counts, &inst.p);
        if load != e.config.load {
            violations.push(format!(
                "machine type {t}: configuration {:?} states load {} but has load {load}",
                e.config.counts, e.config.load
            ));
        }
        for (j, &c) in e.config.counts.iter().enumerate() {
            if c > 0 && !inst.is_allowed(j, t) {
                violations.push(format!(
                    "machine type {t}: job type {j} is not allowed but {c} are assigned"
                ));
            }
        }
        let speed = inst.s[t];
        let load_q = int(load);
        let capacity = &q.threshold * Rational::from_integer(BigInt::from(speed));
        if speed > 0 {
            let completion = Rational::new(BigInt::from(load), BigInt::from(speed));
            if max_completion.as_ref().is_none_or(|c| &completion > c) {
                max_completion = Some(completion.clone());
            }
            if min_completion.as_ref().is_none_or(|c| &completion < c) {
                min_completion = Some(completion);
            }
        } else if load > 0 {
            violations.push(format!("machine type {t} has speed 0 but load {load}"));
        } else {
            let zero = Rational::zero();
            if max_completion.is_none() {
                max_completion = Some(zero.clone());
            }
            if min_completion.as_ref().is_none_or(|c| &zero < c) {
                min_completion = Some(zero);
            }
        }
        match q.relation {
            Relation::Le if load_q > capacity => violations.push(format!(
                "machine type {t}: load {load} exceeds capacity {capacity}"
            )),
            Relation::Ge if load_q < capacity => violations.push(format!(
                "machine type {t}: load {load} below required {capacity}"
            )),
            _ => {}
        }
        let idle = if capacity > load_q {
            &capacity - &load_q
        } else {
            Rational::zero()
        };
        if let Some(cap) = &q.idle_cap {
            if &idle > cap {
                violations.push(format!(
                    "machine type {t}: idle load {idle} exceeds cap {cap}"
                ));
            }
        }
        if idle > max_idle {
            max_idle = idle;
        }
    }

    let job_usage = aggregate_jobs(sched, d);
    if !q.job_relation.holds(&job_usage, &inst.n) {
        violations.push(format!(
            "job usage {job_usage:?} does not satisfy {} n = {:?}",
            q.job_relation, inst.n
        ));
    }

    Ok(VerificationReport {
        ok: violations.is_empty(),
        max_completion: max_completion.unwrap_or_else(Rational::zero),
        min_completion: min_completion.unwrap_or_else(Rational::zero),
        max_idle_load: max_idle,
        job_usage,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn three_machines() -> Instance {
        Instance::new(vec![1], vec![7], vec![15, 13, 11], vec![1, 1, 1], None).unwrap()
    }

    fn three_machine_schedule() -> HMSchedule {
        let p = [1];
        HMSchedule::from_machines([
            (0, Configuration::new(vec![3], &p)),
            (1, Configuration::new(vec![3], &p)),
            (2, Configuration::new(vec![1], &p)),
        ])
    }

    #[test]
    fn three_machine_schedule_is_quarter_feasible() {
        let r = verify_schedule(&three_machines(), &three_machine_schedule(), &FeasibilityQuery::makespan(ratio(1, 4)))
            .unwrap();
        assert!(r.ok, "{:?}", r.violations);
        assert_eq!(r.max_completion, ratio(3, 13));
        assert_eq!(r.max_idle_load, ratio(7, 4));
        assert_eq!(r.min_completion, ratio(1, 11));
    }

    #[test]
    fn three_machine_schedule_fails_at_one_fifth() {
        let r = verify_schedule(&three_machines(), &three_machine_schedule(), &FeasibilityQuery::makespan(ratio(1, 5)))
            .unwrap();
        assert!(!r.ok);
        assert_eq!(r.max_completion, ratio(3, 13));
    }

    #[test]
    fn empty_schedule_without_jobs() {
        let inst = Instance::new(vec![2], vec![0], vec![3], vec![0], None).unwrap();
        let r = verify_schedule(&inst, &HMSchedule::default(), &FeasibilityQuery::makespan(int(0)))
            .unwrap();
        assert!(r.ok);
        assert_eq!(r.max_completion, int(0));
    }

    #[test]
    fn idle_cap_is_checked() {
        let mut q = FeasibilityQuery::makespan(ratio(1, 4));
        q.idle_cap = Some(ratio(3, 2));
        let r = verify_schedule(&three_machines(), &three_machine_schedule(), &q).unwrap();
        assert!(!r.ok);
        q.idle_cap = Some(ratio(7, 4));
        assert!(verify_schedule(&three_machines(), &three_machine_schedule(), &q).unwrap().ok);
    }

    #[test]
    fn restriction_and_counts_are_violations() {
        let mut inst = three_machines();
        inst.restrict = Some(vec![vec![true, false, true]]);
        let r = verify_schedule(&inst, &three_machine_schedule(), &FeasibilityQuery::makespan(int(1)))
            .unwrap();
        assert!(!r.ok);
        assert_eq!(r.violations.len(), 1);

        let short = HMSchedule::from_machines([(0, Configuration::new(vec![7], &[1]))]);
        let r = verify_schedule(&three_machines(), &short, &FeasibilityQuery::makespan(int(1))).unwrap();
        assert_eq!(r.violations.len(), 2);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let bad = HMSchedule::new(vec![ScheduleEntry {
            machine_type: 5,
            config: Configuration::zero(1),
            count: 1,
        }]);
        assert!(matches!(
            verify_schedule(&three_machines(), &bad, &FeasibilityQuery::makespan(int(1))),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn aggregate_examples() {
        let p = [1];
        let sched = HMSchedule::new(vec![
            ScheduleEntry {
                machine_type: 0,
                config: Configuration::new(vec![3], &p),
                count: 1,
            },
            ScheduleEntry {
                machine_type: 1,
                config: Configuration::new(vec![2], &p),
                count: 2,
            },
        ]);
        assert_eq!(aggregate_jobs(&sched, 1), vec![7]);
        assert_eq!(aggregate_jobs(&HMSchedule::default(), 2), vec![0, 0]);
        assert_eq!(aggregate_jobs(&three_machine_schedule(), 1), vec![7]);
    }

    #[test]
    fn verification_is_pure() {
        let q = FeasibilityQuery::makespan(ratio(1, 4));
        let a = verify_schedule(&three_machines(), &three_machine_schedule(), &q).unwrap();
        let b = verify_schedule(&three_machines(), &three_machine_schedule(), &q).unwrap();
        assert_eq!(a, b);
    }
}
