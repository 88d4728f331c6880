use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ringmod::config::{FileConfig, RunConfig};
use ringmod::error::{HarnessError, Result};
use ringmod::plot::{self, Sweep};
use ringmod::{checks_csv, registry, run_selected};
use ringmod_core::bounds::{
    boundary_estimate, continuity_bounds, dominated_modulus_bound, eq1est_bounds, eq2est_bounds, holder_identity_check,
    infinity_check, is_divergence_type, modintbound_report, separation_bound, AngularField, BoundReport,
    DominatingFactor, Measured, Verdict,
};
use ringmod_core::dilatation::directional_sample;
use ringmod_core::geometry::parse_vector;
use ringmod_core::graph::{build_grid, modulus_connect, write_density_csv, GridOptions, Resolution, SolverOptions};
use ringmod_core::quadrature::QuadratureSpec;
use ringmod_core::special::{compute_a2, constants_for, psi2};
use ringmod_core::{MapSpec, Shape};
use serde_json::{json, Value};

/// Ring and semiring modulus estimates for maps with integrable dilatation.
#[derive(Parser, Debug)]
#[command(name = "ringmod", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Also write the JSON result to this file.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Write a CSV rendering of the result to this file.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads for `verify` [default: $RINGMOD_JOBS, else all cores].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Divide all tolerances by this factor (>= 1).
    #[arg(long = "tol-scale", global = true)]
    tol_scale: Option<f64>,
    /// TOML file with defaults for the flags above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Elliptic-integral based special functions and constants.
    Special {
        #[command(subcommand)]
        what: SpecialCmd,
    },
    /// Discrete modulus of a shape or of its image under a map.
    Modulus(ModulusArgs),
    /// Dilatation values of a map at a point.
    Dilatation {
        #[arg(long)]
        map: MapSpec,
        #[arg(long)]
        x: Coords,
        #[arg(long, default_value = "0,0")]
        x0: Coords,
    },
    /// Modulus bounds in terms of integrated dilatations.
    Bounds(BoundsArgs),
    /// Run registered verification scenarios.
    Verify {
        /// Only scenarios carrying this tag.
        #[arg(long)]
        filter: Option<String>,
        /// List scenarios instead of running them.
        #[arg(long)]
        list: bool,
        ids: Vec<String>,
    },
    /// Tabulate a function on a log-spaced grid.
    Sweep(SweepArgs),
}

#[derive(Subcommand, Debug)]
enum SpecialCmd {
    A2,
    Constants {
        #[arg(long)]
        n: usize,
    },
    Psi2 {
        #[arg(long)]
        t: f64,
    },
}

#[derive(Args, Debug)]
struct ModulusArgs {
    #[arg(long)]
    shape: Shape,
    #[arg(long)]
    map: Option<MapSpec>,
    #[arg(long, default_value = "32x128")]
    grid: Resolution,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Largest lattice offset used as an edge (0 = default).
    #[arg(long, default_value_t = 0)]
    stencil: usize,
    /// Write the admissible edge density to this CSV file.
    #[arg(long)]
    emit_density: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BoundKind {
    Eq1est,
    Eq2est,
    Modintbound,
    Domfac,
    Holder,
    Infinity,
    Continuity,
    Separation,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    kind: BoundKind,
    #[arg(long, default_value = "identity")]
    map: MapSpec,
    #[arg(long, default_value = "semiring:n=2,r=1,R=2.718281828459045")]
    shape: Shape,
    /// Slope of the linear dominating factor.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Bound on the exponential dilatation integral.
    #[arg(long = "M", default_value_t = 2.0)]
    big_m: f64,
    /// Radius scale of the dominated bounds.
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    /// Dimension for the map-free bounds.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Modulus of the curve family for `domfac`.
    #[arg(long, default_value_t = 10.0)]
    m: f64,
    /// Distance argument of `continuity` and `separation`.
    #[arg(long, default_value_t = 1e-3)]
    d: f64,
    /// Distance between the boundary continua for `continuity`.
    #[arg(long, default_value_t = 1.0)]
    dist: f64,
    /// Values of log R for `infinity`.
    #[arg(long, default_value = "5,10,25,50,100,200")]
    log_radii: Coords,
    /// Use the synthetic field 1 + log|x| for `infinity`.
    #[arg(long)]
    log_field: bool,
    /// Also solve for the image modulus on this grid (eq1est, eq2est, modintbound).
    #[arg(long)]
    solve: Option<Resolution>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SweepKind {
    A2,
    Continuity,
}

#[derive(Args, Debug)]
struct SweepArgs {
    kind: SweepKind,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long = "M", default_value_t = 2.0)]
    big_m: f64,
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    #[arg(long, default_value_t = 1.0)]
    dist: f64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Also draw the sweep as an SVG line chart.
    #[arg(long)]
    svg: Option<PathBuf>,
}

/// Comma-separated floats.
#[derive(Debug, Clone)]
struct Coords(Vec<f64>);

impl std::str::FromStr for Coords {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_vector(s).map(|v| Coords(v.iter().copied().collect())).map_err(|e| e.to_string())
    }
}

struct Settings {
    json: Option<PathBuf>,
    csv: Option<PathBuf>,
    jobs: Option<usize>,
    run: RunConfig,
}

impl Settings {
    fn resolve(g: &Global) -> Result<Self> {
        let file = match &g.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let env_jobs = match std::env::var("RINGMOD_JOBS") {
            Ok(v) if !v.trim().is_empty() => {
                Some(v.trim().parse::<usize>().map_err(|e| HarnessError::Config(format!("RINGMOD_JOBS={v:?}: {e}")))?)
            }
            _ => None,
        };
        Ok(Self {
            json: g.json.clone().or(file.json),
            csv: g.csv.clone().or(file.csv),
            jobs: g.jobs.or(file.jobs).or(env_jobs),
            run: RunConfig::new(g.tol_scale.or(file.tol_scale).unwrap_or(1.0))?,
        })
    }

    fn quad(&self) -> QuadratureSpec {
        QuadratureSpec { tol: self.run.tol(1e-8), ..QuadratureSpec::default() }
    }
}

/// Result of a subcommand: JSON, an optional CSV rendering and the exit code.
struct Output {
    json: Value,
    csv: Option<String>,
    code: u8,
}

impl Output {
    fn ok(json: Value) -> Self {
        Self { json, csv: None, code: 0 }
    }
}

fn scalars_csv(v: &Value) -> String {
    let mut s = String::from("key,value\n");
    if let Value::Object(map) = v {
        for (k, x) in map {
            match x {
                Value::Number(_) | Value::Bool(_) => s.push_str(&format!("{k},{x}\n")),
                Value::String(t) => s.push_str(&format!("{k},{t}\n")),
                _ => {}
            }
        }
    }
    s
}

fn special(what: &SpecialCmd) -> Result<Output> {
    let json = match *what {
        SpecialCmd::A2 => {
            let r = compute_a2();
            json!({
                "value": r.value,
                "argmax": r.argmax_t,
                "attained_at_boundary": r.attained_at_boundary,
                "method": "grid over t = 1 + exp(s), s in [-40, 40], refined by golden-section search",
            })
        }
        SpecialCmd::Constants { n } => {
            let mut v = serde_json::to_value(constants_for(n)?)?;
            v["method"] = json!(if n == 2 { "closed form" } else { "upper bound from lambda_n" });
            v
        }
        SpecialCmd::Psi2 { t } => json!({ "value": psi2(t)?, "method": "AGM elliptic integral" }),
    };
    Ok(Output::ok(json))
}

fn modulus(a: &ModulusArgs, s: &Settings) -> Result<Output> {
    let grid = GridOptions { stencil: a.stencil };
    let opts = SolverOptions { tol: s.run.tol(a.tol), ..SolverOptions::default() };
    let mut g = build_grid(&a.shape, a.grid, &grid)?;
    if let Some(m) = &a.map {
        g = g.image(m)?;
    }
    let est = modulus_connect(&g, &opts)?;
    if let Some(p) = &a.emit_density {
        let mut f = std::fs::File::create(p).map_err(|e| HarnessError::io(p, e))?;
        write_density_csv(&mut f, &g, &est.rho).map_err(|e| HarnessError::io(p, e))?;
    }
    let mut v = serde_json::to_value(&est)?;
    if a.map.is_none() {
        v["exact_m_gamma"] = json!(a.shape.gamma_family_modulus());
        v["exact_mo"] = json!(a.shape.exact_modulus());
    }
    Ok(Output::ok(v))
}

fn dilatation(map: &MapSpec, x: &[f64], x0: &[f64]) -> Result<Output> {
    let sample = directional_sample(map, &x.to_vec().into(), &x0.to_vec().into())?;
    Ok(Output::ok(serde_json::to_value(sample)?))
}

fn report_output(r: BoundReport) -> Result<Output> {
    let code = u8::from(r.verdict == Verdict::Violated);
    Ok(Output { json: serde_json::to_value(r)?, csv: None, code })
}

fn solved(a: &BoundsArgs, s: &Settings) -> Result<Option<(Measured, Measured)>> {
    let Some(res) = a.solve else { return Ok(None) };
    let opts = SolverOptions { tol: s.run.tol(1e-3), ..SolverOptions::default() };
    let g = build_grid(&a.shape, res, &GridOptions::default())?;
    let domain = modulus_connect(&g, &opts)?;
    let image = modulus_connect(&g.image(&a.map)?, &opts)?;
    // The domain solve calibrates the grid: its error relative to the exact
    // modulus cancels in the ratio.
    let rel = |e: &ringmod_core::graph::ModulusEstimate| (1.0 - e.lower / e.m_gamma).abs().max(opts.tol);
    let ratio = image.mo / domain.mo;
    let err = ratio * (rel(&image) + rel(&domain));
    let exact = a.shape.exact_modulus();
    Ok(Some((Measured::new(ratio, err), Measured::new(ratio * exact, err * exact))))
}

fn bounds(a: &BoundsArgs, s: &Settings) -> Result<Output> {
    let spec = s.quad();
    match a.kind {
        BoundKind::Eq1est => {
            let m = solved(a, s)?;
            report_output(eq1est_bounds(&a.map, &a.shape, &spec, m.map(|p| p.0))?)
        }
        BoundKind::Eq2est => {
            let m = solved(a, s)?;
            let exact = a.shape.exact_modulus();
            let diff = m.map(|(_, img)| Measured::new(exact - img.value, img.error));
            report_output(eq2est_bounds(&a.map, &a.shape, &spec, diff)?)
        }
        BoundKind::Modintbound => {
            let m = solved(a, s)?;
            report_output(modintbound_report(&a.map, &a.shape, &spec, m.map(|p| p.1))?)
        }
        BoundKind::Holder => {
            report_output(holder_identity_check(&a.map, a.shape.center(), a.shape.r0(), a.shape.r1(), &spec)?)
        }
        BoundKind::Infinity => {
            let field = if a.log_field { AngularField::LogRadius } else { AngularField::Map(a.map.clone()) };
            let n = a.map.fixed_dim().unwrap_or(a.n);
            Ok(Output::ok(serde_json::to_value(infinity_check(
                &field,
                n,
                a.r0,
                &a.log_radii.0.iter().map(|t| t.exp()).collect::<Vec<_>>(),
                &spec,
            )?)?))
        }
        BoundKind::Domfac => {
            let h = DominatingFactor::linear(a.gamma)?;
            let b = dominated_modulus_bound(a.m, a.big_m, a.r0, a.n, &h)?;
            let mut v = serde_json::to_value(b)?;
            v["divergence_type"] = serde_json::to_value(is_divergence_type(&h, a.n))?;
            v["factor"] = serde_json::to_value(&h)?;
            Ok(Output::ok(v))
        }
        BoundKind::Continuity => {
            let b = continuity_bounds(a.n, a.gamma, a.big_m, a.r0, a.dist, a.d)?;
            Ok(Output::ok(serde_json::to_value(b)?))
        }
        BoundKind::Separation => {
            let n = a.shape.dim();
            let mo = a.shape.exact_modulus();
            let mut v = json!({ "n": n, "mo": mo, "separation": separation_bound(mo, n)? });
            if let Ok(b) = boundary_estimate(mo, a.dist, n) {
                v["boundary_estimate"] = json!(b);
            }
            Ok(Output::ok(v))
        }
    }
}

fn verify(filter: Option<&str>, list: bool, ids: &[String], s: &Settings) -> Result<Output> {
    if list {
        let items: Vec<Value> = registry()
            .iter()
            .filter(|sc| filter.is_none_or(|t| sc.has_tag(t)))
            .map(|sc| json!({ "id": sc.id, "description": sc.description, "tags": sc.tags }))
            .collect();
        return Ok(Output::ok(Value::Array(items)));
    }
    let agg = run_selected(ids, filter, &s.run, s.jobs)?;
    Ok(Output { csv: Some(checks_csv(&agg)), code: agg.exit_code() as u8, json: serde_json::to_value(&agg)? })
}

fn sweep(a: &SweepArgs) -> Result<Output> {
    let sw: Sweep = match a.kind {
        SweepKind::A2 => plot::a2_sweep(a.from.unwrap_or(1.001), a.to.unwrap_or(1e3), a.points)?,
        SweepKind::Continuity => {
            let lo = a.from.unwrap_or(1e-12);
            let hi = a.to.unwrap_or(0.5 * a.r0);
            plot::continuity_sweep(a.n, a.gamma, a.big_m, a.r0, a.dist, lo, hi, a.points)?
        }
    };
    if let Some(p) = &a.svg {
        plot::write_file(p, &sw.to_svg())?;
    }
    Ok(Output { csv: Some(sw.to_csv()), code: 0, json: serde_json::to_value(&sw)? })
}

fn emit(out: &Output, s: &Settings) -> Result<()> {
    let text = serde_json::to_string_pretty(&out.json)?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(HarnessError::io(Path::new("<stdout>"), e)),
        _ => {}
    }
    if let Some(p) = &s.json {
        plot::write_file(p, &(text + "\n"))?;
    }
    if let Some(p) = &s.csv {
        let csv = out.csv.clone().unwrap_or_else(|| scalars_csv(&out.json));
        plot::write_file(Path::new(p), &csv)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8> {
    let s = Settings::resolve(&cli.global)?;
    let out = match &cli.command {
        Command::Special { what } => special(what)?,
        Command::Modulus(a) => modulus(a, &s)?,
        Command::Dilatation { map, x, x0 } => dilatation(map, &x.0, &x0.0)?,
        Command::Bounds(a) => bounds(a, &s)?,
        Command::Verify { filter, list, ids } => verify(filter.as_deref(), *list, ids, &s)?,
        Command::Sweep(a) => sweep(a)?,
    };
    emit(&out, &s)?;
    Ok(out.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
