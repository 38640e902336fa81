use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bconf::branched_path::{
    default_test_functions, four_path_circle, jet_match_family, junctions, to_dot,
    validate_branched, BranchViolation, BranchedPath, BranchedPathJson, JetOptions,
};
use bconf::charts::{build_chart, LocallyFiniteConfiguration};
use bconf::config::ConfigurationJson;
use bconf::hausdorff::{EventRecord, TrajectoryJson};
use bconf::logistic::{bifurcation_diagram, AttractorOptions, DEFAULT_ORBIT_TOL, MAX_PERIOD_LIMIT};
use bconf::measure::{support_class, validate_constant_volume_path, GridFunction, Region};
use bconf::section::{
    branched_equilibrium_section, decompose_or_witness, interval_grid, Decomposition, SectionJson,
};
use bconf::{
    detect_stratum_events, hausdorff_distance, hausdorff_distance_indexed, AmbientSpace,
    Configuration, Metric, SpatialIndex,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

mod field;
mod sim;

#[derive(Parser, Debug)]
#[command(
    name = "bconf",
    about = "Branched configuration spaces: Hausdorff strata, charts, branched paths and sections",
    disable_version_flag = true
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Distance below which two points are the same point.
    #[arg(long, global = true)]
    tol_eq: Option<f64>,
    /// Largest displacement attributable to one merge or split.
    #[arg(long, global = true)]
    merge_tol: Option<f64>,
    /// Closure tolerance for periodic orbits.
    #[arg(long, global = true)]
    orbit_tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the main artifact here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Print version information as JSON.
    #[arg(long)]
    version: bool,
    /// Print the input and output formats as JSON.
    #[arg(long)]
    schema: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hausdorff distance between two configurations, or stratum events along a trajectory.
    Hausdorff(HausdorffArgs),
    /// Sticky-particle coalescence with merge event detection.
    Simulate(SimulateArgs),
    /// Chart radii around a configuration.
    Chart(ChartArgs),
    /// Validate a branched path and check jets at its junctions.
    BranchedPath(BranchedPathArgs),
    /// Logistic-map bifurcation diagram as CSV rows `A,x`.
    Bifurcate(BifurcateArgs),
    /// Equilibrium section of the logistic map over a parameter field.
    Section(SectionArgs),
    /// Constant-volume check for a sequence of grid functions.
    Measure(MeasureArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Jsonl,
    Csv,
    Dot,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Format::Json => "json",
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
            Format::Dot => "dot",
        };
        f.write_str(name)
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MetricArg {
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Manhattan => Metric::Manhattan,
            MetricArg::Chebyshev => Metric::Chebyshev,
        }
    }
}

#[derive(Args, Debug)]
struct HausdorffArgs {
    /// Configuration JSON files.
    files: Vec<PathBuf>,
    /// Trajectory JSON; prints merge and split events.
    #[arg(long, conflicts_with = "files")]
    trajectory: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    /// Use the grid index instead of the pairwise scan.
    #[arg(long)]
    indexed: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SimDemo {
    TwoParticleMerge,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    demo: Option<SimDemo>,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0.02)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pull: f64,
    #[arg(long, default_value_t = 0.3)]
    jitter: f64,
    /// Particles closer than this fuse.
    #[arg(long, default_value_t = 0.05)]
    radius: f64,
    /// Also write the sampled trajectory JSON here.
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ChartArgs {
    /// Configuration JSON file.
    input: Option<PathBuf>,
    /// Build around `N` uniform random points in the unit cube instead.
    #[arg(long, conflicts_with = "input")]
    random: Option<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PathDemo {
    PaperCircle,
}

#[derive(Args, Debug)]
struct BranchedPathArgs {
    /// Branched path JSON file.
    input: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "input")]
    demo: Option<PathDemo>,
    /// Sampling intervals per segment for the demo.
    #[arg(long, default_value_t = 256)]
    m: usize,
    /// Shift the outgoing segment of the demo by this much in y.
    #[arg(long)]
    perturb: Option<f64>,
    /// Highest derivative order of the jet check.
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 1e-4)]
    rel_tol: f64,
    /// Fail unless every jet check passes.
    #[arg(long)]
    require_jets: bool,
}

#[derive(Args, Debug)]
struct BifurcateArgs {
    #[arg(long, default_value_t = 2.5)]
    a_min: f64,
    #[arg(long, default_value_t = 4.0)]
    a_max: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = MAX_PERIOD_LIMIT)]
    max_period: usize,
}

#[derive(Args, Debug)]
struct SectionArgs {
    /// Parameter field in `x`, such as `2.5 + x`.
    #[arg(long, default_value = "2.5 + x")]
    field: String,
    #[arg(long, default_value_t = 101)]
    grid_n: usize,
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    #[arg(long, default_value_t = 1.0)]
    x_max: f64,
    #[arg(long, default_value_t = MAX_PERIOD_LIMIT)]
    max_period: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MeasureDemo {
    TranslatedBump,
    GrowingBump,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Directory of grid function frames, taken in file name order.
    dir: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "dir")]
    demo: Option<MeasureDemo>,
    /// Region as half-open index ranges per axis, `lo:hi,lo:hi`. Defaults to
    /// everything inside the outermost layer.
    #[arg(long)]
    region: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Parse(String),
    Validation(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn parse_err(e: impl fmt::Display) -> CliError {
    CliError::Parse(e.to_string())
}

fn invalid(e: impl fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

/// The artifact a subcommand produces, plus whether its check passed.
struct Outcome {
    text: String,
    failure: Option<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome {
            text,
            failure: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bconf: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let g = cli.global;
    for (name, v) in [
        ("tol-eq", g.tol_eq),
        ("merge-tol", g.merge_tol),
        ("orbit-tol", g.orbit_tol),
    ] {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Parse(format!(
                    "--{name} must be positive, got {v}"
                )));
            }
        }
    }
    let outcome = if g.version {
        Outcome::ok(pretty(&version_json()))
    } else if g.schema {
        Outcome::ok(pretty(&schema_json()))
    } else {
        match cli.command {
            None => return Err(CliError::Parse("no subcommand given; see --help".into())),
            Some(Command::Hausdorff(a)) => cmd_hausdorff(&g, a)?,
            Some(Command::Simulate(a)) => cmd_simulate(&g, a)?,
            Some(Command::Chart(a)) => cmd_chart(&g, a)?,
            Some(Command::BranchedPath(a)) => cmd_branched_path(&g, a)?,
            Some(Command::Bifurcate(a)) => cmd_bifurcate(&g, a)?,
            Some(Command::Section(a)) => cmd_section(&g, a)?,
            Some(Command::Measure(a)) => cmd_measure(&g, a)?,
        }
    };
    match &g.output {
        Some(path) => fs::write(path, &outcome.text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => io::stdout()
            .write_all(outcome.text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    match outcome.failure {
        Some(msg) => Err(CliError::Validation(msg)),
        None => Ok(()),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn format_or(g: &Global, default: Format, allowed: &[Format]) -> CliResult<Format> {
    let f = g.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(CliError::Parse(format!(
            "format `{f}` is not supported here"
        )))
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn space_for(g: &Global, dim: usize, metric: Metric) -> AmbientSpace {
    let space = AmbientSpace::euclidean(dim).with_metric(metric);
    match g.tol_eq {
        Some(t) => space.with_tol_eq(t),
        None => space,
    }
}

fn version_json() -> Value {
    json!({
        "name": "bconf",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommands": ["hausdorff", "simulate", "chart", "branched-path", "bifurcate", "section", "measure"],
        "formats": ["json", "jsonl", "csv", "dot"],
    })
}

fn schema_json() -> Value {
    let num_array = json!({"type": "array", "items": {"type": "number"}});
    let configuration = json!({
        "type": "object",
        "required": ["dim", "points"],
        "properties": {
            "dim": {"type": "integer", "minimum": 1},
            "points": {"type": "array", "items": num_array},
        },
    });
    json!({
        "configuration": configuration,
        "trajectory": {
            "type": "object",
            "required": ["times", "frames"],
            "properties": {
                "times": num_array,
                "frames": {"type": "array", "items": configuration},
            },
        },
        "event": {
            "type": "object",
            "required": ["t", "kind", "from", "to", "at"],
            "properties": {
                "t": {"type": "number"},
                "kind": {"enum": ["merge", "split"]},
                "from": {"type": "integer"},
                "to": {"type": "integer"},
                "at": {"type": "array", "items": num_array},
            },
        },
        "chart": {
            "type": "object",
            "required": ["base", "radii"],
            "properties": {"base": configuration, "radii": num_array},
        },
        "branched_path": {
            "type": "object",
            "required": ["stages"],
            "properties": {
                "stages": {"type": "array", "items": {"type": "array", "items": {
                    "type": "object",
                    "required": ["samples"],
                    "properties": {"samples": {"type": "array", "items": {
                        "type": "array",
                        "prefixItems": [{"type": "number"}, num_array],
                    }}},
                }}},
            },
        },
        "section": {
            "type": "object",
            "required": ["grid", "parameters", "fibers", "loci"],
            "properties": {
                "grid": {"type": "array", "items": num_array},
                "parameters": num_array,
                "fibers": {"type": "array", "items": {"anyOf": [num_array, {"type": "null"}]}},
                "loci": {"type": "array", "items": {
                    "type": "object",
                    "properties": {
                        "base_location": num_array,
                        "cardinality_before": {"type": "integer"},
                        "cardinality_after": {"type": "integer"},
                        "parameter_value": {"type": "number"},
                    },
                }},
            },
        },
        "grid_function": {
            "type": "object",
            "required": ["dims", "h", "origin", "values"],
            "properties": {
                "dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "h": {"type": "number"},
                "origin": num_array,
                "values": num_array,
            },
            "text_form": "lines `dims n1 .. nd`, `h s`, `origin o1 .. od`, then row-major values",
        },
        "bifurcation_csv": {"header": ["A", "x"]},
    })
}

fn load_configuration(g: &Global, path: &Path, metric: Metric) -> CliResult<Configuration> {
    let raw: ConfigurationJson = read_json(path)?;
    let space = space_for(g, raw.dim, metric);
    raw.into_configuration(&space)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn events_text(events: &[bconf::StratumEvent], format: Format) -> String {
    let records: Vec<EventRecord> = events.iter().map(EventRecord::from).collect();
    match format {
        Format::Jsonl => records
            .iter()
            .map(|r| serde_json::to_string(r).expect("event serializes") + "\n")
            .collect(),
        _ => pretty(&json!(records)),
    }
}

fn cmd_hausdorff(g: &Global, a: HausdorffArgs) -> CliResult<Outcome> {
    let metric = Metric::from(a.metric);
    if let Some(path) = &a.trajectory {
        let format = format_or(g, Format::Jsonl, &[Format::Jsonl, Format::Json])?;
        let raw: TrajectoryJson = read_json(path)?;
        let dim = raw.frames.first().map(|f| f.dim).unwrap_or(1);
        let frames = raw
            .into_frames(&space_for(g, dim, metric))
            .map_err(parse_err)?;
        let merge_tol = g
            .merge_tol
            .ok_or_else(|| CliError::Parse("--merge-tol is required with --trajectory".into()))?;
        let events = detect_stratum_events(metric, &frames, merge_tol).map_err(invalid)?;
        return Ok(Outcome::ok(events_text(&events, format)));
    }
    format_or(g, Format::Json, &[Format::Json])?;
    let [fa, fb] = a.files.as_slice() else {
        return Err(CliError::Parse(
            "expected two configuration files or --trajectory".into(),
        ));
    };
    let u = load_configuration(g, fa, metric)?;
    let v = load_configuration(g, fb, metric)?;
    let distance = if a.indexed {
        let iu = SpatialIndex::build(&u, metric);
        let iv = SpatialIndex::build(&v, metric);
        hausdorff_distance_indexed(&u, &v, &iu, &iv)
    } else {
        hausdorff_distance(metric, &u, &v)
    }
    .map_err(invalid)?;
    Ok(Outcome::ok(pretty(&json!({
        "distance": distance,
        "metric": metric,
        "cardinalities": [u.len(), v.len()],
    }))))
}

fn cmd_simulate(g: &Global, a: SimulateArgs) -> CliResult<Outcome> {
    let format = format_or(g, Format::Jsonl, &[Format::Jsonl, Format::Json])?;
    let (run, default_tol) = match a.demo {
        Some(SimDemo::TwoParticleMerge) => {
            let run = sim::two_particle_merge().map_err(invalid)?;
            let dt = 0.5;
            let tol = run.max_speed * dt;
            (run, tol)
        }
        None => {
            if a.n == 0 || a.dim == 0 || !(a.dt > 0.0) || !(a.radius >= 0.0) {
                return Err(CliError::Parse(
                    "need n ≥ 1, dim ≥ 1, dt > 0 and radius ≥ 0".into(),
                ));
            }
            let space = space_for(g, a.dim, Metric::Euclidean);
            if a.radius <= space.tol_eq {
                return Err(CliError::Parse(
                    "--radius must exceed the point tolerance".into(),
                ));
            }
            let params = sim::SimParams {
                n: a.n,
                dim: a.dim,
                steps: a.steps,
                dt: a.dt,
                pull: a.pull,
                jitter: a.jitter,
                radius: a.radius,
                seed: g.seed,
            };
            let run = sim::simulate(&space, &params).map_err(invalid)?;
            // each fusion moves a particle by at most `radius`, at most n − 1 times per step
            let tol = run.max_speed * a.dt + (a.n - 1) as f64 * a.radius;
            (run, tol)
        }
    };
    let merge_tol = g.merge_tol.unwrap_or(default_tol);
    let events =
        detect_stratum_events(Metric::Euclidean, &run.frames, merge_tol).map_err(invalid)?;
    let trajectory = TrajectoryJson::from_frames(&run.frames);
    if let Some(path) = &a.trajectory_out {
        fs::write(path, pretty(&json!(trajectory)))
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }

    let mut failure = None;
    if a.demo.is_some() {
        let origin =
            Configuration::from_rows(&AmbientSpace::euclidean(1), [[0.0]]).expect("origin");
        let merges_at_one =
            events.len() == 1 && events[0].time == 1.0 && events[0].kind == bconf::EventKind::Merge;
        let worst = run
            .frames
            .iter()
            .map(|(t, u)| {
                let d = hausdorff_distance(Metric::Euclidean, u, &origin).expect("same dimension");
                (d - (1.0 - t)).abs()
            })
            .fold(0.0, f64::max);
        if !merges_at_one {
            failure = Some(format!(
                "expected one merge at t = 1, found {} events",
                events.len()
            ));
        } else if worst > 1e-12 {
            failure = Some(format!(
                "distance to the origin deviates from 1 − t by {worst:e}"
            ));
        }
    }
    let text = match format {
        Format::Json => pretty(&json!({
            "merge_tol": merge_tol,
            "trajectory": trajectory,
            "events": events.iter().map(EventRecord::from).collect::<Vec<_>>(),
        })),
        _ => events_text(&events, format),
    };
    Ok(Outcome { text, failure })
}

fn cmd_chart(g: &Global, a: ChartArgs) -> CliResult<Outcome> {
    format_or(g, Format::Json, &[Format::Json])?;
    let u = match (&a.input, a.random) {
        (Some(path), _) => {
            let raw: ConfigurationJson = read_json(path)?;
            let space = space_for(g, raw.dim, Metric::Euclidean);
            let coords = raw.points.concat();
            LocallyFiniteConfiguration::new(&space, coords).map_err(invalid)?
        }
        (None, Some(n)) => {
            use rand::Rng;
            use rand_chacha::rand_core::SeedableRng;
            if a.dim == 0 {
                return Err(CliError::Parse("--dim must be positive".into()));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(g.seed);
            let coords = (0..n * a.dim).map(|_| rng.gen::<f64>()).collect();
            LocallyFiniteConfiguration::new(&space_for(g, a.dim, Metric::Euclidean), coords)
                .map_err(invalid)?
        }
        (None, None) => {
            return Err(CliError::Parse(
                "expected a configuration file or --random N".into(),
            ))
        }
    };
    let chart = build_chart(&u).map_err(invalid)?;
    let disjoint = chart.check_disjointness();
    let min_radius = chart.radii().iter().copied().fold(f64::INFINITY, f64::min);
    let text = pretty(&json!({
        "chart": chart.to_json(),
        "disjoint": disjoint,
        "min_radius": min_radius,
    }));
    let failure =
        (!disjoint || !(min_radius > 0.0)).then(|| "chart balls are not disjoint".to_string());
    Ok(Outcome { text, failure })
}

fn violation_json(v: &BranchViolation) -> Value {
    match v {
        BranchViolation::IncompatibleSegments {
            stage,
            first,
            second,
        } => json!({
            "kind": "incompatible_segments", "stage": stage, "first": first, "second": second,
        }),
        BranchViolation::EndpointGap { stage, gap } => json!({
            "kind": "endpoint_gap", "stage": stage, "gap": gap,
        }),
    }
}

fn cmd_branched_path(g: &Global, a: BranchedPathArgs) -> CliResult<Outcome> {
    let format = format_or(g, Format::Json, &[Format::Json, Format::Dot])?;
    let mut bp: BranchedPath = match (&a.input, a.demo) {
        (Some(path), _) => {
            let raw: BranchedPathJson = read_json(path)?;
            raw.into_path().map_err(parse_err)?
        }
        (None, Some(PathDemo::PaperCircle)) => four_path_circle(a.m).map_err(parse_err)?,
        (None, None) => {
            return Err(CliError::Parse(
                "expected a branched path file or --demo".into(),
            ))
        }
    };
    if let Some(shift) = a.perturb {
        let mut stages = bp.stages().to_vec();
        let last = stages.len() - 1;
        for seg in &mut stages[last] {
            let mut s = vec![0.0; seg.dim()];
            s[seg.dim() - 1] = shift;
            *seg = seg.translated(&s);
        }
        bp = BranchedPath::new(stages).map_err(parse_err)?;
    }
    let space = space_for(g, bp.dim(), Metric::Euclidean);
    let validation = validate_branched(&space, &bp).map_err(invalid)?;
    if format == Format::Dot {
        let text = to_dot(&space, &bp).map_err(invalid)?;
        let failure = validation.violation.as_ref().map(|v| format!("{v:?}"));
        return Ok(Outcome { text, failure });
    }
    let opts = JetOptions {
        order: a.order,
        rel_tol: a.rel_tol,
    };
    let mut jets = Vec::new();
    let mut all_pass = true;
    if validation.valid {
        let family = default_test_functions(bp.dim());
        for p in junctions(&space, &bp).map_err(invalid)? {
            for (name, r) in
                jet_match_family(&space, &bp, p.coords(), &family, opts).map_err(invalid)?
            {
                all_pass &= r.passed;
                jets.push(json!({
                    "junction": p.coords(),
                    "function": name,
                    "stage": r.stage,
                    "incoming": r.incoming,
                    "outgoing": r.outgoing,
                    "residuals": r.residuals,
                    "tolerance": r.tolerance,
                    "passed": r.passed,
                }));
            }
        }
    }
    let text = pretty(&json!({
        "valid": validation.valid,
        "violation": validation.violation.as_ref().map(violation_json),
        "jets": jets,
    }));
    let failure = match &validation.violation {
        Some(v) => Some(format!("not a branched path: {v:?}")),
        None if a.require_jets && !all_pass => Some("jet check failed at a junction".into()),
        None => None,
    };
    Ok(Outcome { text, failure })
}

fn attractor_opts(g: &Global, max_period: usize) -> AttractorOptions {
    AttractorOptions {
        max_period,
        orbit_tol: g.orbit_tol.unwrap_or(DEFAULT_ORBIT_TOL),
        ..AttractorOptions::default()
    }
}

fn cmd_bifurcate(g: &Global, a: BifurcateArgs) -> CliResult<Outcome> {
    format_or(g, Format::Csv, &[Format::Csv])?;
    let rows = bifurcation_diagram(a.a_min, a.a_max, a.steps, attractor_opts(g, a.max_period))
        .map_err(parse_err)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["A", "x"]).map_err(io_err)?;
    for (p, x) in rows {
        w.write_record([p.to_string(), x.to_string()])
            .map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(Outcome::ok(
        String::from_utf8(bytes).expect("csv output is utf-8"),
    ))
}

fn cmd_section(g: &Global, a: SectionArgs) -> CliResult<Outcome> {
    format_or(g, Format::Json, &[Format::Json])?;
    if a.grid_n == 0 {
        return Err(CliError::Parse("--grid-n must be positive".into()));
    }
    let field = field::Field::parse(&a.field).map_err(parse_err)?;
    let grid = interval_grid(a.x_min, a.x_max, a.grid_n - 1).map_err(parse_err)?;
    let section =
        branched_equilibrium_section(|x| field.eval(x), &grid, attractor_opts(g, a.max_period))
            .map_err(invalid)?;
    let mut runs = Vec::new();
    for (range, card) in section.sample.constant_runs() {
        let mut entry = json!({
            "start": range.start,
            "end": range.end,
            "cardinality": card,
        });
        if card.is_some() {
            entry["selections"] = match decompose_or_witness(&section.sample.slice(range))
                .map_err(invalid)?
            {
                Decomposition::Selections {
                    selections,
                    lipschitz_estimate,
                } => json!({"count": selections.len(), "lipschitz_estimate": lipschitz_estimate}),
                Decomposition::Witness(w) => json!({
                    "ambiguous_edge": [w.edge.0, w.edge.1],
                    "selection": w.selection,
                    "best": w.best,
                    "second": w.second,
                }),
            };
        }
        runs.push(entry);
    }
    let mut out = json!(SectionJson::from(&section));
    out["runs"] = json!(runs);
    Ok(Outcome::ok(pretty(&out)))
}

fn parse_region(spec: &str, dims: &[usize]) -> CliResult<Region> {
    let axes: Vec<&str> = spec.split(',').collect();
    if axes.len() != dims.len() {
        return Err(CliError::Parse(format!(
            "region has {} axes, grid has {}",
            axes.len(),
            dims.len()
        )));
    }
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for ax in axes {
        let (l, h) = ax
            .split_once(':')
            .ok_or_else(|| CliError::Parse(format!("bad region axis `{ax}`, expected lo:hi")))?;
        lo.push(l.trim().parse::<usize>().map_err(parse_err)?);
        hi.push(h.trim().parse::<usize>().map_err(parse_err)?);
    }
    Region::index_box(dims.to_vec(), &lo, &hi).map_err(parse_err)
}

fn square_frame(dims: &[usize], at: (usize, usize), cells: &[(usize, usize)]) -> GridFunction {
    let mut f = GridFunction::zeros(dims.to_vec(), 0.1).expect("valid grid");
    for &(i, j) in cells {
        f.set(&[at.0 + i, at.1 + j], 1.0);
    }
    f
}

fn measure_demo(demo: MeasureDemo) -> Vec<GridFunction> {
    let dims = [12, 12];
    let square = [(0, 0), (0, 1), (1, 0), (1, 1)];
    match demo {
        MeasureDemo::TranslatedBump => (0..5)
            .map(|k| square_frame(&dims, (3 + k, 3), &square))
            .collect(),
        MeasureDemo::GrowingBump => (0..6)
            .map(|k| {
                let mut f = square_frame(&dims, (4, 4), &square);
                if k >= 3 {
                    f.set(&[6, 4], 1.0);
                }
                f
            })
            .collect(),
    }
}

fn cmd_measure(g: &Global, a: MeasureArgs) -> CliResult<Outcome> {
    format_or(g, Format::Json, &[Format::Json])?;
    let (frames, region_spec) = match (&a.dir, a.demo) {
        (Some(dir), _) => {
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            paths.sort();
            let frames = paths
                .iter()
                .map(|p| {
                    GridFunction::read(p).map_err(|e| match e {
                        bconf::measure::MeasureError::Io(e) => {
                            CliError::Io(format!("{}: {e}", p.display()))
                        }
                        e => CliError::Parse(format!("{}: {e}", p.display())),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            (frames, a.region.clone())
        }
        (None, Some(demo)) => (
            measure_demo(demo),
            a.region.clone().or_else(|| Some("2:10,2:10".into())),
        ),
        (None, None) => {
            return Err(CliError::Parse(
                "expected a frame directory or --demo".into(),
            ))
        }
    };
    let first = frames
        .first()
        .ok_or_else(|| CliError::Parse("no frames found".into()))?;
    let region = match region_spec {
        Some(spec) => parse_region(&spec, first.dims())?,
        None => Region::interior(first.dims().to_vec()).map_err(parse_err)?,
    };
    let report = validate_constant_volume_path(&frames, &region).map_err(invalid)?;
    let mut components = Vec::new();
    for f in &frames {
        let s = support_class(f).map_err(invalid)?;
        components.push(s.volumes);
    }
    let text = pretty(&json!({
        "valid": report.valid,
        "first_violation": report.first_violation,
        "intervals": report.intervals,
        "excluded": report.excluded,
        "component_volumes": components,
    }));
    let failure = report
        .first_violation
        .map(|k| format!("support volume in the region changes at step {k}"));
    Ok(Outcome { text, failure })
}
