//! JSON documents read and written by the command-line tool.
//!
//! Every document is written with sorted, fixed field order and a trailing
//! newline, so equal inputs produce byte-identical files.

use std::fs;
use std::path::Path;

use hmsched::drivers::{SolveResult, Trace};
use hmsched::{
    format_rational, Configuration, Error, HMSchedule, Instance, Result, ScheduleEntry,
    VerificationReport,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub d: usize,
    pub tau: usize,
    pub p: Vec<u64>,
    pub n: Vec<u64>,
    pub s: Vec<u64>,
    pub m: Vec<u64>,
    /// `restrict[j][t]`: job type `j` may run on machine type `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restrict: Option<Vec<Vec<bool>>>,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance, name: Option<String>) -> Self {
        InstanceFile {
            name,
            d: inst.d(),
            tau: inst.tau(),
            p: inst.p.clone(),
            n: inst.n.clone(),
            s: inst.s.clone(),
            m: inst.m.clone(),
            restrict: inst.restrict.clone(),
        }
    }

    pub fn to_instance(&self) -> Result<Instance> {
        if self.p.len() != self.d || self.n.len() != self.d {
            return Err(Error::Malformed(format!(
                "d = {} but p has {} and n has {} entries",
                self.d,
                self.p.len(),
                self.n.len()
            )));
        }
        if self.s.len() != self.tau || self.m.len() != self.tau {
            return Err(Error::Malformed(format!(
                "tau = {} but s has {} and m has {} entries",
                self.tau,
                self.s.len(),
                self.m.len()
            )));
        }
        Instance::new(
            self.p.clone(),
            self.n.clone(),
            self.s.clone(),
            self.m.clone(),
            self.restrict.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub machine_type: usize,
    pub counts: Vec<u64>,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDoc {
    pub entries: Vec<EntryDoc>,
}

impl ScheduleDoc {
    pub fn from_schedule(sched: &HMSchedule) -> Self {
        ScheduleDoc {
            entries: sched
                .entries
                .iter()
                .map(|e| EntryDoc {
                    machine_type: e.machine_type,
                    counts: e.config.counts.clone(),
                    count: e.count,
                })
                .collect(),
        }
    }

    pub fn to_schedule(&self, p: &[u64]) -> Result<HMSchedule> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            if e.counts.len() != p.len() {
                return Err(Error::Malformed(format!(
                    "schedule entry has {} counts, instance has {} job types",
                    e.counts.len(),
                    p.len()
                )));
            }
            entries.push(ScheduleEntry {
                machine_type: e.machine_type,
                config: Configuration::new(e.counts.clone(), p),
                count: e.count,
            });
        }
        Ok(HMSchedule::new(entries))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceDoc {
    pub path: Option<&'static str>,
    pub feasibility_calls: u64,
    pub direct_solves: u64,
    pub balanced_solves: u64,
    pub window_solves: u64,
    pub oracle_calls: u64,
    pub guesses: u64,
    pub case_1_subproblems: u64,
    pub case_2_subproblems: u64,
}

impl From<&Trace> for TraceDoc {
    fn from(t: &Trace) -> Self {
        TraceDoc {
            path: t.path.map(|p| p.name()),
            feasibility_calls: t.feasibility_calls,
            direct_solves: t.direct_solves,
            balanced_solves: t.balanced_solves,
            window_solves: t.window_solves,
            oracle_calls: t.oracle_calls,
            guesses: t.guesses,
            case_1_subproblems: t.case_1_subproblems,
            case_2_subproblems: t.case_2_subproblems,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultDoc {
    pub objective: String,
    pub method: String,
    pub value: String,
    pub schedule: ScheduleDoc,
    pub trace: TraceDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl ResultDoc {
    pub fn new(r: &SolveResult, wall_time_ms: Option<f64>) -> Self {
        ResultDoc {
            objective: r.objective.name().to_string(),
            method: r.method.name().to_string(),
            value: format_rational(&r.value),
            schedule: ScheduleDoc::from_schedule(&r.schedule),
            trace: TraceDoc::from(&r.trace),
            wall_time_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportDoc {
    pub ok: bool,
    pub max_completion: String,
    pub min_completion: String,
    pub envy: String,
    pub max_idle_load: String,
    pub job_usage: Vec<u64>,
    pub violations: Vec<String>,
}

impl From<&VerificationReport> for ReportDoc {
    fn from(r: &VerificationReport) -> Self {
        ReportDoc {
            ok: r.ok,
            max_completion: format_rational(&r.max_completion),
            min_completion: format_rational(&r.min_completion),
            envy: format_rational(&r.envy()),
            max_idle_load: format_rational(&r.max_idle_load),
            job_usage: r.job_usage.clone(),
            violations: r.violations.clone(),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Malformed(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    text
}

/// Writes to `path`, or to stdout without one.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Error::Malformed(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    read_json::<InstanceFile>(path)?.to_instance()
}
