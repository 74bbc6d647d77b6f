//! `randers-lab`: command-line runner for Randers navigation experiments.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

use randers_lab::config::{ExperimentConfig, WindSpec};
use randers_lab::cw::{self, Isometry};
use randers_lab::geodesic::{self, GeodesicCurve};
use randers_lab::oracle::{self, GraphKey, NetGraph};
use randers_lab::randers::{self, NavigationData};
use randers_lab::space::Point;
use randers_lab::{acceptance, sampling, ConstantLengthFamily, Error, KillingField, SpaceDescriptor, VERSION};

use output::{Format, Report};

#[derive(Parser)]
#[command(name = "randers-lab", version, about = "Randers metrics from navigation data on Clifford-Wolf homogeneous spaces")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Space descriptor: path to a JSON file, or inline JSON.
    #[arg(long, global = true)]
    space: Option<String>,
    /// Wind spec: path to a JSON file, or inline JSON. Defaults to zero.
    #[arg(long, global = true)]
    wind: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance of the command's verdict.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for sampled checks.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Flow,
    Ode,
}

#[derive(Subcommand)]
enum Command {
    /// Navigation data to defining form (a, b) at a point, and back.
    Convert {
        #[arg(long)]
        point: Option<String>,
    },
    /// Finsler norm of a tangent vector.
    Norm {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        vector: Option<String>,
    },
    /// Finsler distance in both directions.
    Distance {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
    /// Unit-speed geodesic from a point in a direction.
    Geodesic {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        vector: Option<String>,
        #[arg(long)]
        time: Option<f64>,
        /// ODE step.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Number of output intervals.
        #[arg(long, default_value_t = 100)]
        intervals: usize,
    },
    /// Time-t flow of a Killing field (the wind by default).
    Flow {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        time: Option<f64>,
        #[arg(long)]
        field: Option<String>,
    },
    /// Clifford-Wolf displacement check of a flow; exit 0 iff CW.
    CwCheck {
        /// Field whose flow is checked; a random unit member of the
        /// constant-length family plus the wind by default.
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        time: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Oracle comparisons for the first samples.
        #[arg(long)]
        spot_checks: Option<usize>,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Direction exhaustion by the constant-length family; exit 0 iff pass.
    Exhaust {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        directions: Option<usize>,
    },
    /// CW flow carrying one point to another; exit 0 iff found.
    Connect {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
    /// Shortest-path oracle on a sampled graph.
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
    /// Runs the acceptance criteria; exit 0 iff all pass.
    Selftest {
        /// Comma-separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Subcommand)]
enum OracleAction {
    /// Builds a graph and writes it to the cache directory.
    Build {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Oracle distance between two points; reads the cache, never writes it.
    Query {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Half width of the sampling box for Euclidean factors.
    #[arg(long = "box")]
    half_width: Option<f64>,
}

const DEFAULT_NODES: usize = 20_000;
const DEFAULT_K: usize = 16;

/// Usage errors exit with 2, failed verdicts with 1.
enum Failure {
    Usage(String),
    Verdict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SearchFailed { .. }
            | Error::RootNotBracketed { .. }
            | Error::NoMatchingField { .. }
            | Error::GraphDisconnected { .. } => Failure::Verdict(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

/// Inline JSON if it starts with a bracket, otherwise a file path.
fn json_arg<T: serde::de::DeserializeOwned>(what: &str, arg: &str) -> Outcome<T> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Failure::Usage(format!("{what} {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{what}: {e}")))
}

/// `1,0,0` or `[1, 0, 0]`.
fn vector_arg(what: &str, arg: &str) -> Outcome<Vec<f64>> {
    arg.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Failure::Usage(format!("{what}: {e}"))))
        .collect()
}

fn set_vector(slot: &mut Option<Vec<f64>>, what: &str, arg: &Option<String>) -> Outcome {
    if let Some(a) = arg {
        *slot = Some(vector_arg(what, a)?);
    }
    Ok(())
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn resolve_config(common: &Common, command: &Command) -> Outcome<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let Some(space) = &common.space else {
                return usage("--space or --config is required");
            };
            let Some(seed) = common.seed else {
                return usage("--seed or --config is required");
            };
            ExperimentConfig::new(json_arg::<SpaceDescriptor>("space", space)?, WindSpec::default(), seed)
        }
    };
    if let (Some(space), Some(_)) = (&common.space, &common.config) {
        config.space = json_arg("space", space)?;
    }
    if let Some(wind) = &common.wind {
        config.wind = json_arg("wind", wind)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    set(&mut config.out, common.out.clone());
    set(&mut config.workers, common.workers);
    let p = &mut config.params;
    match command {
        Command::Convert { point } => set_vector(&mut p.point, "point", point)?,
        Command::Norm { point, vector } => {
            set_vector(&mut p.point, "point", point)?;
            set_vector(&mut p.vector, "vector", vector)?;
        }
        Command::Distance { point, to } | Command::Connect { point, to } => {
            set_vector(&mut p.point, "point", point)?;
            set_vector(&mut p.to, "to", to)?;
        }
        Command::Geodesic { point, vector, time, step, method, .. } => {
            set_vector(&mut p.point, "point", point)?;
            set_vector(&mut p.vector, "vector", vector)?;
            set(&mut p.time, *time);
            set(&mut p.step, *step);
            set(&mut p.method, method.map(|m| match m {
                Method::Flow => "flow".to_string(),
                Method::Ode => "ode".to_string(),
            }));
        }
        Command::Flow { point, time, field } => {
            set_vector(&mut p.point, "point", point)?;
            set(&mut p.time, *time);
            if let Some(f) = field {
                p.field = Some(json_arg("field", f)?);
            }
        }
        Command::CwCheck { field, time, samples, spot_checks, graph } => {
            if let Some(f) = field {
                p.field = Some(json_arg("field", f)?);
            }
            set(&mut p.time, *time);
            set(&mut p.spot_checks, *spot_checks);
            set_graph(p, graph);
            if let Some(n) = samples {
                config.samples.points = *n;
            }
            if let Some(t) = common.tol {
                config.tolerances.cw = t;
            }
        }
        Command::Exhaust { point, directions } => {
            set_vector(&mut p.point, "point", point)?;
            if let Some(n) = directions {
                config.samples.directions = *n;
            }
            if let Some(t) = common.tol {
                config.tolerances.exhaustion = t;
            }
        }
        Command::Oracle { action } => match action {
            OracleAction::Build { graph } => set_graph(p, graph),
            OracleAction::Query { graph, point, to } => {
                set_graph(p, graph);
                set_vector(&mut p.point, "point", point)?;
                set_vector(&mut p.to, "to", to)?;
            }
        },
        Command::Selftest { .. } => {}
    }
    if let (Command::Connect { .. }, Some(t)) = (command, common.tol) {
        config.tolerances.connect = t;
    }
    config.validate()?;
    Ok(config)
}

fn set_graph(p: &mut randers_lab::config::Params, graph: &GraphArgs) {
    set(&mut p.n_nodes, graph.nodes);
    set(&mut p.k, graph.k);
    set(&mut p.half_width, graph.half_width);
}

struct Context {
    config: ExperimentConfig,
    nav: NavigationData,
}

impl Context {
    fn space(&self) -> &SpaceDescriptor {
        self.nav.space()
    }

    fn point(&self, coords: &Option<Vec<f64>>, what: &str) -> Outcome<Point> {
        match coords {
            Some(c) => Ok(self.space().point(DVector::from_column_slice(c))?),
            None => usage(format!("--{what} is required")),
        }
    }

    /// The given point, or one drawn from the seed.
    fn point_or_sample(&self, coords: &Option<Vec<f64>>) -> Outcome<Point> {
        match coords {
            Some(_) => self.point(coords, "point"),
            None => Ok(self.space().sample_point(&mut sampling::stream(self.config.seed, 1))),
        }
    }

    fn vector(&self, x: &Point, what: &str) -> Outcome<DVector<f64>> {
        let Some(v) = &self.config.params.vector else {
            return usage(format!("--{what} is required"));
        };
        let v = DVector::from_column_slice(v);
        if v.len() != self.space().ambient_dim() {
            return usage(format!("{what} needs {} coordinates", self.space().ambient_dim()));
        }
        Ok(self.space().project(x, &v))
    }

    fn graph_key(&self) -> GraphKey {
        let p = &self.config.params;
        GraphKey::new(self.space(), p.n_nodes.unwrap_or(DEFAULT_NODES), p.k.unwrap_or(DEFAULT_K), self.config.seed)
            .with_box(p.half_width.unwrap_or(sampling::DEFAULT_BOX))
    }

    /// Cached graph if present, otherwise built in memory. Never writes.
    fn graph(&self) -> Outcome<(NetGraph, bool)> {
        let key = self.graph_key();
        if let Some(dir) = oracle::cache_dir() {
            if let Some(g) = NetGraph::load_cached(&dir, &key)? {
                return Ok((g, true));
            }
        }
        Ok((NetGraph::build(key)?, false))
    }

    fn report(&self, command: &str, result: Value) -> Report {
        Report::new(command, &self.config, result)
    }
}

fn coords(p: &Point) -> Value {
    json!(p.as_slice())
}

fn matrix(m: &nalgebra::DMatrix<f64>) -> Value {
    json!(m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn vector(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn field_json(field: &KillingField) -> Value {
    serde_json::to_value(WindSpec::from(field)).expect("field spec serialises")
}

fn convert(ctx: &Context) -> Outcome<Report> {
    let x = ctx.point(&ctx.config.params.point, "point")?;
    let frame = ctx.space().orthonormal_frame(&x);
    let comps = ctx.nav.components(&x, &frame);
    let df = randers::from_navigation(&comps)?;
    let back = randers::to_navigation(&df)?;
    let round_trip = (&back.h - &comps.h).amax().max((&back.w - &comps.w).amax());
    Ok(ctx.report(
        "convert",
        json!({
            "point": coords(&x),
            "frame": matrix(&frame),
            "h": matrix(&comps.h),
            "W": vector(&comps.w),
            "lambda": comps.lambda(),
            "a": matrix(&df.a),
            "b": vector(&df.b),
            "round_trip_error": round_trip,
        }),
    ))
}

fn norm(ctx: &Context) -> Outcome<Report> {
    let x = ctx.point(&ctx.config.params.point, "point")?;
    let y = ctx.vector(&x, "vector")?;
    Ok(ctx.report(
        "norm",
        json!({
            "point": coords(&x),
            "vector": vector(&y),
            "F": ctx.nav.norm(&x, &y),
            "F_reverse": ctx.nav.norm(&x, &-&y),
            "h_norm": ctx.space().norm(&y),
            "lambda": ctx.nav.lambda(&x),
        }),
    ))
}

fn distance(ctx: &Context) -> Outcome<Report> {
    let x = ctx.point(&ctx.config.params.point, "point")?;
    let y = ctx.point(&ctx.config.params.to, "to")?;
    Ok(ctx.report(
        "distance",
        json!({
            "from": coords(&x),
            "to": coords(&y),
            "distance": geodesic::f_distance(&ctx.nav, &x, &y)?,
            "reverse": geodesic::f_distance(&ctx.nav, &y, &x)?,
            "h_distance": ctx.space().distance(&x, &y),
        }),
    ))
}

fn geodesic_cmd(ctx: &Context, intervals: usize) -> Outcome<(Report, GeodesicCurve)> {
    let p = &ctx.config.params;
    let x = ctx.point(&p.point, "point")?;
    let y = ctx.vector(&x, "vector")?;
    let duration = p.time.unwrap_or(1.0);
    let method = p.method.as_deref().unwrap_or("flow");
    let curve = match method {
        "flow" => geodesic::f_geodesic_flowcurve(&ctx.nav, &x, &y, duration)?,
        "ode" => {
            let fy = ctx.nav.norm(&x, &y);
            if !(fy > 0.0) {
                return usage("vector must be non-zero");
            }
            geodesic::f_geodesic_ode(&ctx.nav, &x, &(&y / fy), duration, p.step.unwrap_or(1e-3))?
        }
        other => return usage(format!("unknown method {other}")),
    };
    let samples: Vec<Value> = curve
        .sample(&ctx.nav, intervals)
        .into_iter()
        .map(|(t, q)| json!({ "t": t, "point": coords(&q) }))
        .collect();
    let mut result = json!({
        "method": method,
        "start": coords(&x),
        "duration": curve.duration,
        "unit_speed": curve.unit_speed,
        "diverged": curve.diverged,
        "finsler_length": geodesic::finsler_length(&ctx.nav, &curve, curve.duration, 2 * intervals.max(1)),
        "minimality_horizon": geodesic::minimality_horizon(&ctx.nav),
        "samples": samples,
    });
    if let geodesic::GeodesicRepr::FlowCurve { field } = &curve.repr {
        result["field"] = field_json(field);
    }
    Ok((ctx.report("geodesic", result), curve))
}

fn flow(ctx: &Context) -> Outcome<Report> {
    let p = &ctx.config.params;
    let x = ctx.point(&p.point, "point")?;
    let t = p.time.unwrap_or(1.0);
    let field = match &p.field {
        Some(spec) => spec.to_field(ctx.space())?,
        None => ctx.nav.wind().clone(),
    };
    let y = field.flow(&x, t);
    Ok(ctx.report(
        "flow",
        json!({ "point": coords(&x), "time": t, "field": field_json(&field), "image": coords(&y) }),
    ))
}

fn cw_check(ctx: &Context) -> Outcome<(Report, bool, Vec<f64>)> {
    let p = &ctx.config.params;
    let field = match &p.field {
        Some(spec) => spec.to_field(ctx.space())?,
        None => {
            let family = ConstantLengthFamily::new(&ctx.nav)?;
            family.sample_member(&mut sampling::stream(ctx.config.seed, 2), 1.0).add(ctx.nav.wind())
        }
    };
    let t = p.time.unwrap_or(0.1);
    let isometry = Isometry::flow(&field, t);
    let tol = ctx.config.tolerances.cw;
    let mut report = cw::cw_displacement_check(&ctx.nav, &isometry, ctx.config.samples.points, tol, ctx.config.seed)?;
    let mut cached = None;
    if let Some(count) = p.spot_checks.filter(|&c| c > 0) {
        let (graph, from_cache) = ctx.graph()?;
        cw::spot_check(&mut report, &ctx.nav, &isometry, &graph.weigh(&ctx.nav)?, count)?;
        cached = Some(from_cache);
    }
    let displacements = report.table.iter().map(|s| s.displacement).collect();
    let cw_ok = report.cw;
    let mut result = serde_json::to_value(&report).expect("report serialises");
    result["field"] = field_json(&field);
    result["time"] = json!(t);
    result["small_time_threshold"] = threshold_json(cw::small_time_threshold(&ctx.nav, &field));
    if let Some(c) = cached {
        result["graph_from_cache"] = json!(c);
    }
    Ok((ctx.report("cw-check", result), cw_ok, displacements))
}

fn threshold_json(t: f64) -> Value {
    if t.is_finite() {
        json!(t)
    } else {
        json!("unbounded")
    }
}

fn exhaust(ctx: &Context) -> Outcome<(Report, bool)> {
    let x = ctx.point_or_sample(&ctx.config.params.point)?;
    let family = ConstantLengthFamily::new(&ctx.nav)?;
    let report = cw::direction_exhaustion_check(
        &ctx.nav,
        &x,
        &family,
        ctx.config.samples.directions,
        ctx.config.tolerances.exhaustion,
        ctx.config.seed,
    )?;
    let pass = report.pass;
    Ok((ctx.report("exhaust", serde_json::to_value(&report).expect("report serialises")), pass))
}

fn connect(ctx: &Context) -> Outcome<(Report, bool)> {
    let x0 = ctx.point(&ctx.config.params.point, "point")?;
    let x1 = ctx.point(&ctx.config.params.to, "to")?;
    let c = cw::cw_connect(&ctx.nav, &x0, &x1, ctx.config.seed)?;
    let check = cw::cw_displacement_check(&ctx.nav, &c.isometry(&ctx.nav), ctx.config.samples.points, ctx.config.tolerances.cw, ctx.config.seed)?;
    let pass = c.residual < ctx.config.tolerances.connect && check.cw;
    let result = json!({
        "from": coords(&x0),
        "to": coords(&x1),
        "time": c.time,
        "member": field_json(&c.member),
        "field": field_json(&c.field(&ctx.nav)),
        "residual": c.residual,
        "displacement": { "min": check.min, "max": check.max, "mean": check.mean, "spread": check.spread, "cw": check.cw },
        "pass": pass,
    });
    Ok((ctx.report("connect", result), pass))
}

fn oracle_build(ctx: &Context) -> Outcome<Report> {
    let Some(dir) = oracle::cache_dir().or_else(|| ctx.config.out.clone()) else {
        return usage(format!("set {} or --out for the graph cache", oracle::CACHE_ENV));
    };
    let graph = NetGraph::build(ctx.graph_key())?;
    let path = graph.save(&dir)?;
    Ok(ctx.report(
        "oracle-build",
        json!({
            "file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            "hash": graph.hash(),
            "nodes": graph.nodes().len(),
            "k_used": graph.k_used(),
            "edges": graph.edge_count(),
            "epsilon": graph.epsilon(),
            "connected": graph.is_connected(),
        }),
    ))
}

fn oracle_query(ctx: &Context) -> Outcome<Report> {
    let x = ctx.point(&ctx.config.params.point, "point")?;
    let y = ctx.point(&ctx.config.params.to, "to")?;
    let (graph, cached) = ctx.graph()?;
    let weighted = graph.weigh(&ctx.nav)?;
    let est = weighted.distance(&x, &y);
    let analytic = geodesic::f_distance(&ctx.nav, &x, &y)?;
    Ok(ctx.report(
        "oracle-query",
        json!({
            "from": coords(&x),
            "to": coords(&y),
            "estimate": est.estimate,
            "error_hint": est.error_hint,
            "analytic": analytic,
            "relative_error": (est.estimate - analytic) / analytic,
            "graph_hash": graph.hash(),
            "graph_from_cache": cached,
            "epsilon": graph.epsilon(),
        }),
    ))
}

fn selftest(common: &Common, only: &[u32]) -> Outcome<bool> {
    let ids: Vec<u32> = if only.is_empty() { acceptance::criteria().iter().map(|c| c.id).collect() } else { only.to_vec() };
    let mut outcomes = Vec::new();
    for id in ids {
        let Some(o) = acceptance::run(id) else {
            return usage(format!("no criterion {id}"));
        };
        println!("{}", o.line());
        outcomes.push(o);
    }
    let passed = outcomes.iter().all(|o| o.passed);
    if let Some(dir) = &common.out {
        let report = json!({ "command": "selftest", "version": VERSION, "passed": passed, "criteria": outcomes });
        output::write_file(dir, "selftest.json", &output::to_json(&report))?;
    }
    Ok(passed)
}

fn run(cli: Cli) -> Outcome<bool> {
    if let Command::Selftest { only } = &cli.command {
        return selftest(&cli.common, only);
    }
    let config = resolve_config(&cli.common, &cli.command)?;
    if let Some(n) = config.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("workers: {e}")))?;
    }
    let wind = config.wind.to_field(&config.space)?;
    let nav = NavigationData::new(wind)?;
    let ctx = Context { config, nav };
    let format = cli.common.format;
    let (report, pass, extra) = match &cli.command {
        Command::Convert { .. } => (convert(&ctx)?, true, None),
        Command::Norm { .. } => (norm(&ctx)?, true, None),
        Command::Distance { .. } => (distance(&ctx)?, true, None),
        Command::Geodesic { intervals, .. } => {
            let (report, curve) = geodesic_cmd(&ctx, *intervals)?;
            let extra = match format {
                Format::Csv => Some(output::curve_csv(&curve.sample(&ctx.nav, *intervals))),
                Format::Svg => Some(output::curve_svg(&curve.sample(&ctx.nav, *intervals))),
                Format::Json => None,
            };
            (report, !curve.diverged, extra)
        }
        Command::Flow { .. } => (flow(&ctx)?, true, None),
        Command::CwCheck { .. } => {
            let (report, ok, displacements) = cw_check(&ctx)?;
            let extra = match format {
                Format::Csv => Some(output::table_csv(&report.result)),
                Format::Svg => Some(output::histogram_svg(&displacements)),
                Format::Json => None,
            };
            (report, ok, extra)
        }
        Command::Exhaust { .. } => {
            let (report, ok) = exhaust(&ctx)?;
            let extra = match format {
                Format::Csv => Some(output::residuals_csv(&report.result)),
                _ => None,
            };
            (report, ok, extra)
        }
        Command::Connect { .. } => {
            let (report, ok) = connect(&ctx)?;
            (report, ok, None)
        }
        Command::Oracle { action: OracleAction::Build { .. } } => (oracle_build(&ctx)?, true, None),
        Command::Oracle { action: OracleAction::Query { .. } } => (oracle_query(&ctx)?, true, None),
        Command::Selftest { .. } => unreachable!("handled above"),
    };
    if extra.is_none() && format != Format::Json {
        return usage(format!("format {} is not available for {}", format.extension(), report.command));
    }
    output::emit(&report, extra.as_deref(), format, ctx.config.out.as_deref())?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Verdict(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
