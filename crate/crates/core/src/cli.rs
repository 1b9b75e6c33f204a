//! Command-line front end. `dispatch` returns the process exit code:
//! 0 on success, 1 when a verification fails, 2 on configuration, parse or
//! I/O errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::dynamics::{displacement_profile, epsilon_fixed_point_search, iterate_orbit, EpsilonSearch, OrbitTrace};
use crate::error::{Error, Result};
use crate::exact::{derive_seed_indexed, format_rat, parse_rat, Rat};
use crate::operators::{
    check_idempotent, check_nonexpansive, max_deviation, perturbation_estimate, DiagnosticReport,
    Operator, OperatorSpec,
};
use crate::sampling::{Probe, Sampler};
use crate::scenarios::{build_pipeline, load_scenario, paper_case, run_scenario, RunReport, ScenarioConfig, PAPER_CASES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fixlab", version, about = "Exact experiments with nonexpansive maps and their coarsenings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file and check its expected block.
    Run {
        scenario: PathBuf,
        /// Write the orbit as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the full JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the built-in reference cases and print a verdict table.
    VerifyPaper {
        #[arg(long)]
        case: Option<String>,
    },
    /// Rerun a scenario over a list of parameter values.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values, decimal or p/q.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check one property of a scenario's pipeline on seeded samples.
    CheckOp {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        property: PropertyArg,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Sampler seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Upper bound for the deviation property.
        #[arg(long)]
        bound: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Translation amount of every translation stage.
    D,
    /// Step of every grid quantizer.
    Step,
    /// Radius of every perturbation stage.
    Delta,
    /// ε for the ε-fixed-point search; the pipeline is unchanged.
    Eps,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::D => "d",
            SweepParam::Step => "step",
            SweepParam::Delta => "delta",
            SweepParam::Eps => "eps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PropertyArg {
    Nonexpansive,
    Idempotent,
    Deviation,
    Perturbation,
}

/// Parses `args` (program name first) and runs the command on stdout/stderr.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_to(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn dispatch_to<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<bool> {
    match command {
        Command::Run { scenario, trace, report } => {
            let config = load_scenario(&scenario)?;
            let result = run_scenario(&config)?;
            if let Some(path) = trace {
                write_trace_csv(&result.trace, &path)?;
            }
            if let Some(path) = report {
                write_file(&path, &result.to_json())?;
            }
            emit(out, &render_run(&result))?;
            Ok(result.passed)
        }
        Command::VerifyPaper { case } => {
            let names: Vec<&str> = match &case {
                Some(name) => {
                    paper_case(name)?;
                    vec![name.as_str()]
                }
                None => PAPER_CASES.to_vec(),
            };
            let mut table = String::new();
            let _ = writeln!(table, "{:<28} {:<7} {:<7} detail", "case", "verdict", "checks");
            let mut all_passed = true;
            for name in names {
                let report = run_scenario(&paper_case(name)?)?;
                all_passed &= report.passed;
                let passed = report.checks.iter().filter(|c| c.passed).count();
                let detail = match report.failed_checks().next() {
                    Some(c) => format!("{}: expected {}, got {}", c.name, c.expected, c.actual),
                    None => report
                        .checks
                        .iter()
                        .map(|c| format!("{}={}", c.name, c.actual))
                        .collect::<Vec<_>>()
                        .join("; "),
                };
                let _ = writeln!(
                    table,
                    "{:<28} {:<7} {:<7} {}",
                    name,
                    verdict(report.passed),
                    format!("{passed}/{}", report.checks.len()),
                    detail
                );
            }
            let _ = writeln!(table, "overall: {}", verdict(all_passed));
            emit(out, &table)?;
            Ok(all_passed)
        }
        Command::Sweep { scenario, param, values, out: path } => {
            let config = load_scenario(&scenario)?;
            let values = values
                .iter()
                .map(|v| v.trim())
                .filter(|v| !v.is_empty())
                .map(parse_rat)
                .collect::<Result<Vec<_>>>()?;
            let table = sweep(&config, param, &values)?;
            write_file(&path, &table.to_csv())?;
            emit(
                out,
                &format!("sweep {} over {} values -> {}\n", param.name(), table.rows.len(), path.display()),
            )?;
            Ok(true)
        }
        Command::CheckOp { scenario, property, samples, seed, bound } => {
            let config = load_scenario(&scenario)?;
            let bound = bound.as_deref().map(parse_rat).transpose()?;
            let report = check_op(&config, property, samples, seed, bound.as_ref())?;
            emit(out, &format!("{}\n{}\n", report.operator, report.summary()))?;
            Ok(report.passed)
        }
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(trace: &OrbitTrace, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &trace.to_csv())
}

/// Human-readable run summary. Wall time appears here, never in the JSON.
pub fn render_run(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {} (seed {})", report.scenario, report.seed);
    let stages = if report.stages.is_empty() {
        "identity".to_string()
    } else {
        report.stages.join(" -> ")
    };
    let _ = writeln!(s, "pipeline: {stages}");
    let show = |v: Option<usize>| v.map_or_else(|| "none".into(), |v| v.to_string());
    let _ = writeln!(
        s,
        "orbit: {} steps from {}, preperiod {}, period {}, final {} ({:?})",
        report.orbit.steps,
        report.initial,
        show(report.orbit.preperiod),
        show(report.orbit.period),
        report.orbit.final_point,
        report.orbit.stop
    );
    for d in &report.diagnostics {
        let _ = writeln!(s, "stage {}: {}", d.stage, d.nonexpansive.summary());
    }
    if let Some(p) = &report.displacement {
        let _ = writeln!(
            s,
            "displacement [{}] over {} points: min {} at {}, max {} at {}",
            p.metric,
            p.points,
            format_rat(&p.min_value),
            p.min_witness,
            format_rat(&p.max_value),
            p.max_witness
        );
    }
    if let Some(g) = &report.geometry {
        let _ = writeln!(
            s,
            "geometry: diameter {}, radius <= {}",
            format_rat(&g.diameter),
            format_rat(&g.radius_estimate)
        );
    }
    if let Some(a) = &report.afpp {
        let max = a.max_distance.as_ref().map_or_else(|| "none".into(), format_rat);
        let _ = writeln!(s, "afpp: max distance {max} over {} trials (delta {})", a.trials, format_rat(&a.delta));
    }
    for c in &report.checks {
        let _ = writeln!(
            s,
            "check {}: {} (expected {}, got {})",
            c.name,
            verdict(c.passed),
            c.expected,
            c.actual
        );
    }
    let _ = writeln!(
        s,
        "result: {} in {:.3} ms",
        verdict(report.passed),
        report.wall_time.as_secs_f64() * 1e3
    );
    s
}

fn check_op(
    config: &ScenarioConfig,
    property: PropertyArg,
    samples: usize,
    seed: Option<u64>,
    bound: Option<&Rat>,
) -> Result<DiagnosticReport> {
    let op = build_pipeline(config)?;
    let sampler = Sampler::new(config.space.clone(), config.set.clone(), seed.unwrap_or(config.seed));
    let probe = Probe::seeded(sampler, samples);
    let metric = config.metric;
    match property {
        PropertyArg::Nonexpansive => check_nonexpansive(&op, &probe, metric, &[]),
        PropertyArg::Idempotent => check_idempotent(&op, &probe),
        PropertyArg::Deviation => max_deviation(&op, &probe, metric, bound),
        PropertyArg::Perturbation => {
            let (t, q) = op
                .split_last()
                .unwrap_or_else(|| (Operator::identity(op.space()), op.clone()));
            let delta = max_deviation(&q, &probe, metric, None)?
                .max_deviation
                .unwrap_or_default();
            perturbation_estimate(&t, &q, &probe, metric, &delta)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub row: usize,
    pub value: Rat,
    pub seed: u64,
    pub trace: OrbitTrace,
    pub min_displacement: Rat,
    pub max_displacement: Rat,
    pub eps_found: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "row,param,value,seed,steps,preperiod,period,final_point,min_displacement,max_displacement,eps_fixed_point\n",
        );
        let show = |v: Option<usize>| v.map_or_else(String::new, |v| v.to_string());
        for r in &self.rows {
            let final_point: Vec<String> = r.trace.last().values().iter().map(format_rat).collect();
            let eps = match r.eps_found {
                Some(true) => "found",
                Some(false) => "none",
                None => "",
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.row,
                self.param.name(),
                format_rat(&r.value),
                r.seed,
                r.trace.steps(),
                show(r.trace.preperiod()),
                show(r.trace.period()),
                final_point.join(" "),
                format_rat(&r.min_displacement),
                format_rat(&r.max_displacement),
                eps
            );
        }
        s
    }
}

/// Reruns `base` once per value. Row `i` uses seed
/// `derive_seed_indexed(base.seed, i)`, so rows are independent of each other.
pub fn sweep(base: &ScenarioConfig, param: SweepParam, values: &[Rat]) -> Result<SweepTable> {
    let applicable = param == SweepParam::Eps
        || base.pipeline.leaves().iter().any(|leaf| {
            matches!(
                (param, leaf),
                (SweepParam::D, OperatorSpec::Translation { .. })
                    | (SweepParam::Step, OperatorSpec::GridQuantizer { .. })
                    | (SweepParam::Delta, OperatorSpec::Perturbation { .. })
            )
        });
    if !applicable {
        return Err(Error::Config(format!(
            "pipeline has no stage with parameter `{}`",
            param.name()
        )));
    }
    let mut rows = Vec::with_capacity(values.len());
    for (row, value) in values.iter().enumerate() {
        let mut config = base.clone();
        config.seed = derive_seed_indexed(base.seed, row as u64);
        config.pipeline.for_each_leaf_mut(&mut |leaf| match (param, leaf) {
            (SweepParam::D, OperatorSpec::Translation { d }) => *d = value.clone(),
            (SweepParam::Step, OperatorSpec::GridQuantizer { step, .. }) => *step = value.clone(),
            (SweepParam::Delta, OperatorSpec::Perturbation { delta, .. }) => *delta = value.clone(),
            _ => {}
        });
        config.validate()?;
        let op = build_pipeline(&config)?;
        let trace = iterate_orbit(&op, &config.initial_point()?, config.max_steps, &config.stop, config.metric)?;
        let probe = config.displacement_probe();
        let profile = displacement_profile(&op, config.metric, &probe)?;
        let eps_found = if param == SweepParam::Eps {
            Some(matches!(
                epsilon_fixed_point_search(&op, config.metric, value, &probe)?,
                EpsilonSearch::Found { .. }
            ))
        } else {
            None
        };
        rows.push(SweepRow {
            row,
            value: value.clone(),
            seed: config.seed,
            trace,
            min_displacement: profile.min_value,
            max_displacement: profile.max_value,
            eps_found,
        });
    }
    Ok(SweepTable { param, rows })
}
