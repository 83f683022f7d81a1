//! `varlp`: norms, weight constants, Rubio de Francia runs, extrapolation
//! plans and scenario verification from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use varlp::config::{PlanOutcome, PlanRequest, ScenarioConfig, PLAN_SCENARIOS};
use varlp::exponent::ExponentFunction;
use varlp::field::GridFunction;
use varlp::harness::{merge_csv, run_scenario};
use varlp::norm::{luxemburg_norm_with, modular, NormOptions};
use varlp::operators::{estimate_operator_norm, OperatorHandle};
use varlp::rdf::{default_norm_bound, rdf_iterate, RdfConfig};
use varlp::weights::{class_constant_trend, ClassConstantReport, WeightClass};
use varlp::{Error, Result};

#[derive(Parser)]
#[command(name = "varlp", version, about = "Weighted variable Lebesgue space toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Luxemburg norm of the config's function.
    Norm(NormArgs),
    /// Modular of f/lambda.
    Modular(ModularArgs),
    /// Class constant of the config's weight under refinement, as CSV rows.
    WeightConst(WeightArgs),
    /// Rubio de Francia iteration of the config's function.
    Rdf(RdfArgs),
    /// Exact extrapolation plan.
    Plan(PlanArgs),
    /// Run a scenario end to end.
    Verify(VerifyArgs),
    /// Merge report CSVs.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `grid.resolution`.
    #[arg(long)]
    resolution: Option<usize>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `tolerances.norm`.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    json: bool,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::from_path(&self.config)?;
        if let Some(n) = self.resolution {
            let g = cfg
                .grid
                .as_mut()
                .ok_or_else(|| Error::Config(vec!["grid: --resolution needs a [grid] section".into()]))?;
            g.resolution = n;
            g.grid()?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tolerance {
            cfg.tolerances.norm = t;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct NormArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ModularArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Ap,
    A1,
    Rh,
    Apq,
    Apvar,
}

#[derive(Args)]
struct WeightArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    class: ClassArg,
    /// `p` for A_p and A_p,q.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// `s` for RH_s.
    #[arg(long)]
    s: Option<f64>,
    /// Refinement levels.
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

#[derive(Args)]
struct RdfArgs {
    #[command(flatten)]
    common: Common,
    /// Bound B for the operator norm; estimated from probes when absent.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long, default_value_t = 20)]
    max_terms: usize,
}

#[derive(Args)]
struct PlanArgs {
    /// Plan request from a scenario file's [plan] section.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PLAN_SCENARIOS))]
    scenario: Option<String>,
    #[arg(long)]
    p0: Option<String>,
    #[arg(long)]
    q0: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    p_minus: Option<String>,
    #[arg(long)]
    p_plus: Option<String>,
    #[arg(long)]
    q_minus: Option<String>,
    #[arg(long)]
    q_plus: Option<String>,
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    beta1: Option<String>,
    #[arg(long)]
    p_star: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides `output.csv`.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Overrides `output.json`.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, short)]
    output: PathBuf,
}

fn print(json: bool, value: serde_json::Value, human: String) {
    if json {
        println!("{}", serde_json::to_string_pretty(&value).unwrap_or_default());
    } else {
        print!("{human}");
    }
}

fn function_and_exponent(cfg: &ScenarioConfig) -> Result<(GridFunction, ExponentFunction)> {
    let grid = cfg.grid.as_ref().ok_or_else(|| Error::Config(vec!["grid: missing".into()]))?.grid()?;
    let f = cfg.function.as_ref().ok_or_else(|| Error::Config(vec!["function: missing".into()]))?;
    let p = cfg.exponent_function()?.ok_or_else(|| Error::Config(vec!["exponent: missing".into()]))?;
    Ok((f.sample(&grid, &cfg.base_dir)?, p))
}

fn norm(args: &NormArgs) -> Result<i32> {
    let cfg = args.common.load()?;
    let (f, p) = function_and_exponent(&cfg)?;
    let opts = NormOptions { tolerance: cfg.tolerances.norm, ..NormOptions::default() };
    let r = luxemburg_norm_with(&f, &p, &opts)?;
    let human = format!(
        "seed        {}\nresolution  {}\nnorm        {}\niterations  {}\nbracket     {}\nmodular     {}\n",
        cfg.seed,
        f.grid().resolution(),
        r.value,
        r.bisection_iterations,
        r.bracket_width,
        r.modular_at_value
    );
    print(args.common.json, json!({ "seed": cfg.seed, "resolution": f.grid().resolution(), "result": r }), human);
    Ok(0)
}

fn modular_cmd(args: &ModularArgs) -> Result<i32> {
    let cfg = args.common.load()?;
    if args.lambda.is_nan() || args.lambda <= 0.0 {
        return Err(Error::InvalidScale(args.lambda));
    }
    let (f, p) = function_and_exponent(&cfg)?;
    let rho = modular(&f.scale(1.0 / args.lambda), &p)?;
    let human = format!("seed     {}\nlambda   {}\nmodular  {}\n", cfg.seed, args.lambda, rho);
    print(args.common.json, json!({ "seed": cfg.seed, "lambda": args.lambda, "modular": rho }), human);
    Ok(0)
}

fn weight_const(args: &WeightArgs) -> Result<i32> {
    let cfg = args.common.load()?;
    let grid = cfg.grid.as_ref().ok_or_else(|| Error::Config(vec!["grid: missing".into()]))?.grid()?;
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::InvalidClass(format!("--{name} is required for this class")))
    };
    let class = match args.class {
        ClassArg::Ap => WeightClass::Ap { p: need(args.p, "p")? },
        ClassArg::A1 => WeightClass::A1,
        ClassArg::Rh => WeightClass::ReverseHolder { s: need(args.s, "s")? },
        ClassArg::Apq => WeightClass::Apq { p: need(args.p, "p")?, q: need(args.q, "q")? },
        ClassArg::Apvar => WeightClass::ApVar {
            p: cfg.exponent_function()?.ok_or_else(|| Error::Config(vec!["exponent: needed for apvar".into()]))?,
        },
    };
    let report = class_constant_trend(&cfg.weight()?, &class, &grid, cfg.balls.class_policy, args.levels)?;
    if args.common.json {
        print(true, json!({ "seed": cfg.seed, "report": report }), String::new());
    } else {
        let mut w = csv::Writer::from_writer(std::io::stdout());
        w.write_record(std::iter::once("seed").chain(ClassConstantReport::CSV_HEADER))?;
        let seed = cfg.seed.to_string();
        for (res, est) in &report.trend {
            let row = ClassConstantReport { resolution: *res, estimate: *est, ..report.clone() };
            w.write_record(std::iter::once(seed.clone()).chain(row.csv_row()))?;
        }
        w.flush()?;
    }
    Ok(if report.verdict == varlp::Verdict::Diverging { 1 } else { 0 })
}

fn rdf(args: &RdfArgs) -> Result<i32> {
    let cfg = args.common.load()?;
    let (h, _) = function_and_exponent(&cfg)?;
    let op = cfg.operator_handle().unwrap_or_else(OperatorHandle::maximal);
    let bound = match args.bound {
        Some(b) => b,
        None => {
            let p = cfg.exponent_function()?.ok_or_else(|| Error::Config(vec!["exponent: missing".into()]))?;
            default_norm_bound(estimate_operator_norm(&op, &p, &cfg.weight()?, std::slice::from_ref(&h))?.estimate)
        }
    };
    let rc = RdfConfig { max_terms: args.max_terms, ..RdfConfig::new(bound) };
    let out = rdf_iterate(&h, &op, &rc)?;
    let mut human = format!("seed {}\nbound {}\nk  sup(term)\n", cfg.seed, out.bound);
    for (k, s) in out.term_sups.iter().enumerate() {
        human += &format!("{k:<3}{s}\n");
    }
    human += &format!("truncation {:?}\nsup(Rh) {}\n", out.truncation, out.value.sup_abs());
    let value = json!({
        "seed": cfg.seed,
        "bound": out.bound,
        "term_sups": out.term_sups,
        "truncation": out.truncation,
        "sup": out.value.sup_abs(),
    });
    print(args.common.json, value, human);
    Ok(0)
}

fn plan(args: &PlanArgs) -> Result<i32> {
    let (seed, request) = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let cfg = ScenarioConfig::from_path(path)?;
            let req = cfg.plan.ok_or_else(|| Error::Config(vec!["plan: missing section".into()]))?;
            (cfg.seed, req)
        }
        (None, Some(s)) => (
            0,
            PlanRequest {
                scenario: s.clone(),
                p0: args.p0.clone(),
                q0: args.q0.clone(),
                p: args.p.clone(),
                p_minus: args.p_minus.clone(),
                p_plus: args.p_plus.clone(),
                q_minus: args.q_minus.clone(),
                q_plus: args.q_plus.clone(),
                s: args.s.clone(),
                beta1: args.beta1.clone(),
                p_star: args.p_star.clone(),
                delta: args.delta.clone(),
                r: args.r.clone(),
                n: args.n,
                mode: args.mode.clone(),
            },
        ),
        (None, None) => return Err(Error::Config(vec!["plan: give --scenario or --config".into()])),
    };
    let outcome: PlanOutcome = request.run()?;
    let value = json!({ "seed": seed, "outcome": outcome });
    print(args.json, value, format!("seed               {seed}\n{}", outcome.table()));
    Ok(0)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap_or_default())?;
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<i32> {
    let cfg = args.common.load()?;
    let report = run_scenario(&cfg)?;
    let csv_path = args.csv.clone().or_else(|| cfg.output.csv.as_ref().map(|p| cfg.resolve(p)));
    if let Some(path) = &csv_path {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        report.write_csv(path)?;
    }
    let summary = report.summary_json();
    if let Some(path) = args.out_json.clone().or_else(|| cfg.output.json.as_ref().map(|p| cfg.resolve(p))) {
        write_json(&path, &summary)?;
    }
    let mut human = format!("scenario   {}\nseed       {}\n", report.scenario, report.seed);
    if let Some(plan) = &report.plan {
        human += &plan.table();
    }
    for c in &report.obligations {
        let trend: Vec<String> = c.trend.iter().map(|(n, v)| format!("{n}:{v:.6}")).collect();
        human += &format!("obligation {} [{}] {} {}\n", c.obligation, c.method, trend.join(" "), c.verdict);
    }
    if !report.trend.is_empty() {
        let trend: Vec<String> = report.trend.iter().map(|(n, v)| format!("{n}:{v}")).collect();
        human += &format!(
            "inequality {}\nbest       {}\ntrend      {}\nstability  {:?}\n",
            report.inequality,
            report.best_constant,
            trend.join(" "),
            report.stability
        );
    }
    for w in &report.warnings {
        human += &format!("warning: {w}\n");
    }
    print(args.common.json, summary, human);
    Ok(report.exit_code())
}

fn report(args: &ReportArgs) -> Result<i32> {
    let inputs: Vec<&Path> = args.inputs.iter().map(PathBuf::as_path).collect();
    let rows = merge_csv(&inputs, &args.output)?;
    println!("merged {rows} rows from {} files into {}", inputs.len(), args.output.display());
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Norm(a) => norm(a),
        Command::Modular(a) => modular_cmd(a),
        Command::WeightConst(a) => weight_const(a),
        Command::Rdf(a) => rdf(a),
        Command::Plan(a) => plan(a),
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(Error::Config(violations)) => {
            eprintln!("config error: {} violation(s)", violations.len());
            for v in violations {
                eprintln!("  {v}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
