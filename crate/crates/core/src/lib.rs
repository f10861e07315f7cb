//! Exact solvers for high-multiplicity scheduling on uniform machines.
//!
//! Objectives: makespan (`Cmax`), minimum completion time (`Cmin`), envy
//! (`Cmax − Cmin`), and makespan / minimum completion under restricted
//! assignment. Every schedule a driver returns has been checked with
//! [`verify_schedule`].

pub mod balancing;
pub mod confilp;
pub mod drivers;
pub mod error;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod reduction;

pub use drivers::{solve, Method, SolveOptions, SolveResult, Trace};
pub use error::{Error, Result};
pub use model::{
    aggregate_jobs, verify_schedule, Configuration, FeasibilityQuery, HMSchedule, Instance,
    JobRelation, Objective, Relation, ScheduleEntry, VerificationReport,
};
pub use rational::{format_rational, parse_rational, Rational};
