//! `hmsched`: solve, check, generate and benchmark scheduling instances.

mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hmsched::confilp::SolverLimits;
use hmsched::drivers::{solve, Method, SolveOptions};
use hmsched::oracle::{brute_force, generate, GenParams, Regime};
use hmsched::rational::int;
use hmsched::{
    format_rational, parse_rational, verify_schedule, Error, FeasibilityQuery, Objective,
};

use crate::io::{
    emit, read_instance, read_json, to_json, InstanceFile, ReportDoc, ResultDoc, ScheduleDoc,
};

const EXIT_MALFORMED: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

#[derive(Parser)]
#[command(name = "hmsched", version, about = "Exact high-multiplicity scheduling on uniform machines")]
#[command(after_help = concat!(
    "Resource caps: HMSCHED_STATE_LIMIT (DP states, default 4000000) and ",
    "HMSCHED_NODE_LIMIT (branch-and-bound nodes, default 20000000).\n",
    "Exit codes: 0 ok, 1 malformed input, 2 no feasible schedule, 3 resource limit, ",
    "4 check failed, 5 internal error."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance for one objective and print the result document.
    Solve(SolveArgs),
    /// Verify a schedule against a claimed objective bound.
    Check(CheckArgs),
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve a batch of generated instances, optionally against the oracle.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Cmax,
    Cmin,
    Cenvy,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Cmax => Objective::Cmax,
            ObjectiveArg::Cmin => Objective::Cmin,
            ObjectiveArg::Cenvy => Objective::Cenvy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Balanced,
    Confilp,
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Balanced => Method::Balanced,
            MethodArg::Confilp => Method::ConfIlp,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Mixed,
    Large,
    Small,
    Unit,
    Single,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Mixed => Regime::Mixed,
            RegimeArg::Large => Regime::Large,
            RegimeArg::Small => Regime::Small,
            RegimeArg::Unit => Regime::UnitJobs,
            RegimeArg::Single => Regime::SingleType,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file.
    input: PathBuf,
    #[arg(long, value_enum)]
    objective: ObjectiveArg,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Write the result document here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Include wall time in the result document (otherwise it goes to stderr).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Instance file.
    instance: PathBuf,
    /// Schedule file: {"entries": [{"machine_type", "counts", "count"}]}.
    schedule: PathBuf,
    #[arg(long, value_enum)]
    objective: ObjectiveArg,
    /// Claimed value as num/den: an upper bound for cmax and cenvy, a lower
    /// bound for cmin.
    #[arg(long)]
    value: String,
}

/// Generator parameters; ranges are `lo-hi` or a single number and default
/// to the chosen regime.
#[derive(Args, Clone)]
struct GenParamArgs {
    #[arg(long, value_enum, default_value = "mixed")]
    regime: RegimeArg,
    #[arg(long)]
    job_types: Option<String>,
    #[arg(long)]
    pmax: Option<String>,
    #[arg(long)]
    machines: Option<String>,
    #[arg(long)]
    speeds: Option<String>,
    #[arg(long)]
    jobs: Option<String>,
    /// Add a random restriction matrix.
    #[arg(long)]
    restricted: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: GenParamArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances.
    #[arg(long, default_value_t = 20)]
    count: u64,
    #[command(flatten)]
    params: GenParamArgs,
    /// Objective to solve; all three when omitted.
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Compare every value with the brute-force oracle.
    #[arg(long)]
    oracle: bool,
    /// Print per-instance wall times.
    #[arg(long)]
    timing: bool,
}

fn parse_range<T: std::str::FromStr + Copy>(text: &str) -> Result<(T, T), Error> {
    let bad = || Error::Malformed(format!("bad range {text:?}, expected lo-hi or a number"));
    match text.split_once('-') {
        Some((a, b)) => Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
        None => {
            let v = text.trim().parse().map_err(|_| bad())?;
            Ok((v, v))
        }
    }
}

impl GenParamArgs {
    fn params(&self, seed: u64) -> Result<GenParams, Error> {
        let mut g = GenParams::regime(self.regime.into(), seed);
        if let Some(r) = &self.job_types {
            g.d_range = parse_range(r)?;
            if g.d_range.0 == 0 {
                return Err(Error::Malformed("instances need at least one job type".into()));
            }
        }
        if let Some(r) = &self.pmax {
            g.pmax_range = parse_range(r)?;
        }
        if let Some(r) = &self.machines {
            g.machine_count_range = parse_range(r)?;
        }
        if let Some(r) = &self.speeds {
            g.speed_range = parse_range(r)?;
        }
        if let Some(r) = &self.jobs {
            g.job_total_range = parse_range(r)?;
        }
        g.restricted = self.restricted;
        Ok(g)
    }
}

fn options(method: MethodArg) -> SolveOptions {
    SolveOptions {
        method: method.into(),
        limits: SolverLimits::from_env(),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Malformed(_) | Error::Domain(_) => EXIT_MALFORMED,
        Error::NoFeasibleSchedule(_) => EXIT_INFEASIBLE,
        Error::ResourceLimit(_) | Error::OracleRefused(_) => EXIT_RESOURCE,
        Error::Internal(_) => EXIT_INTERNAL,
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<u8, Error> {
    let inst = read_instance(&args.input)?;
    let start = Instant::now();
    let result = solve(&inst, args.objective.into(), &options(args.method))?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let doc = ResultDoc::new(&result, args.timing.then_some(ms));
    if !args.timing {
        eprintln!("wall time: {ms:.3} ms");
    }
    emit(&to_json(&doc), args.output.as_deref())?;
    Ok(0)
}

fn cmd_check(args: &CheckArgs) -> Result<u8, Error> {
    let inst = read_instance(&args.instance)?;
    let sched = read_json::<ScheduleDoc>(&args.schedule)?.to_schedule(&inst.p)?;
    let value = parse_rational(&args.value)?;
    let objective: Objective = args.objective.into();
    let q = match objective {
        Objective::Cmax => FeasibilityQuery::makespan(value.clone()),
        Objective::Cmin => FeasibilityQuery::min_completion(value.clone()),
        // Completion times are never negative, so only job counts are checked.
        Objective::Cenvy => FeasibilityQuery::min_completion(int(0)),
    };
    let mut report = verify_schedule(&inst, &sched, &q)?;
    if objective == Objective::Cenvy && report.envy() > value {
        report.ok = false;
        report.violations.push(format!(
            "envy {} exceeds {}",
            format_rational(&report.envy()),
            format_rational(&value)
        ));
    }
    print!("{}", to_json(&ReportDoc::from(&report)));
    Ok(if report.ok { 0 } else { EXIT_CHECK_FAILED })
}

fn cmd_gen(args: &GenArgs) -> Result<u8, Error> {
    let inst = generate(&args.params.params(args.seed)?);
    let doc = InstanceFile::from_instance(&inst, Some(format!("gen-{}", args.seed)));
    emit(&to_json(&doc), args.output.as_deref())?;
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<u8, Error> {
    let objectives: Vec<Objective> = match args.objective {
        Some(o) => vec![o.into()],
        None => Objective::ALL.to_vec(),
    };
    let opts = options(args.method);
    let (mut solved, mut matched, mut mismatched, mut refused) = (0u64, 0u64, 0u64, 0u64);
    for seed in args.seed..args.seed + args.count {
        let inst = generate(&args.params.params(seed)?);
        for &obj in &objectives {
            let start = Instant::now();
            let r = solve(&inst, obj, &opts)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            solved += 1;
            let mut line = format!(
                "seed={seed} objective={obj} value={} path={} guesses={}",
                format_rational(&r.value),
                r.trace.path.map_or("none", |p| p.name()),
                r.trace.guesses
            );
            if args.oracle {
                match brute_force(&inst, obj) {
                    Ok((v, _)) if v == r.value => {
                        matched += 1;
                        line.push_str(" oracle=match");
                    }
                    Ok((v, _)) => {
                        mismatched += 1;
                        line.push_str(&format!(" oracle=MISMATCH({})", format_rational(&v)));
                    }
                    Err(Error::OracleRefused(_)) => {
                        refused += 1;
                        line.push_str(" oracle=refused");
                    }
                    Err(e) => return Err(e),
                }
            }
            if args.timing {
                line.push_str(&format!(" ms={ms:.3}"));
            }
            println!("{line}");
        }
    }
    print!("solved={solved}");
    if args.oracle {
        print!(" matched={matched} mismatched={mismatched} refused={refused}");
    }
    println!();
    Ok(if mismatched > 0 { EXIT_CHECK_FAILED } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
