use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ordermech::chain::solve_chain;
use ordermech::dist::{iron, Instance, DEFAULT_SAMPLES};
use ordermech::dmr::{solve_dmr, DmrError};
use ordermech::dual::DualSolution;
use ordermech::io::{self, parse_q, q_string, DualJson, InstanceJson, MechanismJson};
use ordermech::master::{generate, generate_chain_instance, random_line_spec, DualSpec, MasterError};
use ordermech::num::{to_f64, Q};
use ordermech::oracle::{discretize, solve_grid, Arithmetic, LpSolution, OracleError, LEVEL_CLUSTER};
use ordermech::poset::ItemPoset;
use ordermech::three::{recover, verify_chain_lower_bound, RecoveryPath, TopRule};
use ordermech::verify::{cs_check, ic_check, menu_complexity, revenue, CertificateReport, Mechanism};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ordermech", version, about = "Optimal mechanisms for buyers with ordered interests")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve an instance, routing by its shape unless --mode is given.
    Solve(SolveArgs),
    /// Write a generated instance with its dual.
    Generate(GenerateArgs),
    /// Check a mechanism for IC and, given a dual, complementary slackness.
    Verify(VerifyArgs),
    /// Solve the finite-type LP on a value grid.
    Oracle(OracleArgs),
    /// Write curve and allocation CSVs for plotting.
    Export(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Auto,
    Dmr,
    Chain,
    Three,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Arith {
    Auto,
    Rational,
    Float,
}

#[derive(Args, Clone)]
struct Common {
    /// CS tolerance; defaults to 1e-9 in rational mode and 1e-7 in float mode.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    arith: Arith,
    /// Grid size for the LP oracle.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    /// Dual solution, required for the three-item recovery.
    #[arg(long)]
    dual: Option<PathBuf>,
    /// Solve every instance in a directory; `<stem>.dual.json` siblings are used as duals.
    #[arg(long, conflicts_with = "instance")]
    batch: Option<PathBuf>,
    /// Result directory for --batch.
    #[arg(long, requires = "batch")]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct GenerateArgs {
    /// Star instance whose optimal mechanism needs this many chain points.
    #[arg(long, conflicts_with = "line")]
    chain: Option<usize>,
    /// Random line of this many items.
    #[arg(long)]
    line: Option<usize>,
    #[arg(long = "H", default_value = "16")]
    h: String,
    #[arg(long)]
    dual_out: Option<PathBuf>,
    /// Skeleton the instance was built from.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    mechanism: PathBuf,
    #[arg(long)]
    dual: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ExportArgs {
    instance: PathBuf,
    /// Also export allocation curves and the menu of this mechanism.
    #[arg(long)]
    mechanism: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Sub-samples per piece for curved revenue functions.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

/// Everything needed to reproduce a run, echoed into every output.
#[derive(Clone, Debug, Serialize)]
struct RunConfig {
    command: &'static str,
    mode: Option<Mode>,
    grid: usize,
    tol: String,
    seed: u64,
    arithmetic: Arith,
    inputs: Vec<String>,
    output: Option<String>,
}

impl RunConfig {
    fn new(command: &'static str, c: &Common, inputs: &[&Path]) -> anyhow::Result<Self> {
        let tol = match &c.tol {
            Some(t) => t.clone(),
            None if c.arith == Arith::Float => "1e-7".into(),
            None => "1e-9".into(),
        };
        parse_q(&tol).with_context(|| format!("--tol {tol}"))?;
        Ok(RunConfig {
            command,
            mode: None,
            grid: c.grid,
            tol,
            seed: c.seed,
            arithmetic: c.arith,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            output: c.out.as_ref().map(|p| p.display().to_string()),
        })
    }

    fn tol(&self) -> Q {
        parse_q(&self.tol).expect("checked in new")
    }

    fn oracle_arith(&self) -> Arithmetic {
        match self.arithmetic {
            Arith::Auto => Arithmetic::Auto,
            Arith::Rational => Arithmetic::Exact,
            Arith::Float => Arithmetic::Float,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    Size(anyhow::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(e) => write!(f, "invalid input: {e:#}"),
            Failure::Size(e) => write!(f, "size limit: {e:#}"),
        }
    }
}

/// Sorts library errors into the exit-code classes.
fn classify(e: anyhow::Error) -> Failure {
    let size = matches!(e.downcast_ref::<OracleError>(), Some(OracleError::SizeLimit(_)))
        || matches!(e.downcast_ref::<DmrError>(), Some(DmrError::TooManyItems(_)))
        || matches!(e.downcast_ref::<MasterError>(), Some(MasterError::ChainTooLong { .. }));
    if size {
        Failure::Size(e)
    } else {
        Failure::Invalid(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Status {
    Clean,
    Violations,
}

impl Status {
    fn of(clean: bool) -> Self {
        if clean {
            Status::Clean
        } else {
            Status::Violations
        }
    }
}

fn exit_code(r: &Result<Status, Failure>) -> u8 {
    match r {
        Ok(Status::Clean) => 0,
        Ok(Status::Violations) => 2,
        Err(Failure::Invalid(_)) => 3,
        Err(Failure::Size(_)) => 4,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

fn load_instance(p: &Path) -> anyhow::Result<Instance> {
    let j: InstanceJson = read_json(p)?;
    let (inst, warnings) = io::instance_from_json(&j).with_context(|| format!("instance {}", p.display()))?;
    for w in warnings {
        eprintln!("warning: {}: {w}", p.display());
    }
    Ok(inst)
}

fn load_dual(inst: &Instance, p: &Path) -> anyhow::Result<DualSolution> {
    let j: DualJson = read_json(p)?;
    let d = io::dual_from_json(inst, &j).with_context(|| format!("dual {}", p.display()))?;
    d.validate(inst).with_context(|| format!("dual {}", p.display()))?;
    Ok(d)
}

/// A bare mechanism, or a `solve` result that carries one under `mechanism`.
fn load_mechanism(inst: &Instance, p: &Path) -> anyhow::Result<Mechanism> {
    let mut v: Value = read_json(p)?;
    if let Some(inner) = v.get_mut("mechanism") {
        v = inner.take();
    }
    let mj: MechanismJson = serde_json::from_value(v).with_context(|| format!("parsing {}", p.display()))?;
    let mech = io::mechanism_from_json(&inst.poset, &mj).with_context(|| format!("mechanism {}", p.display()))?;
    anyhow::ensure!(mech.allocation.len() == inst.m(), "mechanism has the wrong number of items");
    Ok(mech)
}

fn write_out(path: Option<&Path>, v: &Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exact(x: &Q) -> Value {
    json!({ "exact": q_string(x), "value": to_f64(x) })
}

fn report_json(poset: &ItemPoset, r: &CertificateReport) -> Value {
    let label = |g: usize| poset.label(g).to_string();
    json!({
        "clean": r.is_clean(),
        "revenue": exact(&r.revenue),
        "dual_objective": exact(&r.dual_objective),
        "duality_gap": exact(&r.duality_gap),
        "cs_violations": r.cs_violations.iter().map(|v| json!({
            "condition": format!("{:?}", v.condition),
            "item": label(v.item),
            "other": v.other.map(label),
            "v": v.v,
            "magnitude": v.magnitude,
        })).collect::<Vec<_>>(),
        "ic_violations": r.ic_violations.iter().map(|v| json!({
            "worse": label(v.worse), "better": label(v.better), "v": v.v, "magnitude": v.magnitude,
        })).collect::<Vec<_>>(),
    })
}

fn menus_json(poset: &ItemPoset, m: &Mechanism) -> Value {
    let mut out = serde_json::Map::new();
    for (g, a) in m.allocation.iter().enumerate() {
        let rows: Vec<Value> = a.menu().iter().map(|(p, price)| json!({ "probability": q_string(p), "price": q_string(price) })).collect();
        out.insert(poset.label(g).to_string(), Value::Array(rows));
    }
    Value::Object(out)
}

fn mechanism_value(poset: &ItemPoset, m: &Mechanism) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(io::mechanism_to_json(poset, m))?)
}

fn dual_value(poset: &ItemPoset, d: &DualSolution) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(io::dual_to_json(poset, d))?)
}

/// Solver for an instance: DMR pricing when every marginal qualifies, the closed form on
/// out-degree at most one, star recovery when a dual is supplied, the LP otherwise.
fn route(inst: &Instance, has_dual: bool) -> Mode {
    if inst.is_dmr(&Q::default()) {
        Mode::Dmr
    } else if inst.poset.max_out_degree() <= 1 {
        Mode::Chain
    } else if has_dual && inst.poset.star().is_some() {
        Mode::Three
    } else {
        Mode::Oracle
    }
}

fn oracle_json(cfg: &RunConfig, inst: &Instance, sol: &LpSolution) -> Value {
    let labels = inst.poset.labels();
    let mc = sol.menu_complexity(LEVEL_CLUSTER);
    json!({
        "config": cfg,
        "route": "oracle",
        "objective": sol.objective,
        "exact_objective": sol.exact_objective.as_ref().map(q_string),
        "discretization_bound": sol.bound,
        "grid": sol.grid.iter().map(to_f64).collect::<Vec<_>>(),
        "allocations": labels.iter().cloned().zip(sol.allocations.iter().map(|a| json!(a))).collect::<serde_json::Map<_, _>>(),
        "payments": labels.iter().cloned().zip(sol.payments.iter().map(|p| json!(p))).collect::<serde_json::Map<_, _>>(),
        "cap_duals": labels.iter().cloned().zip(sol.cap_duals.iter().map(|p| json!(p))).collect::<serde_json::Map<_, _>>(),
        "ic_duals": sol.ic_duals.iter().map(|(&(w, b), v)| json!({
            "edge": [inst.poset.label(w), inst.poset.label(b)], "multipliers": v,
        })).collect::<Vec<_>>(),
        "menu_complexity": mc.total,
        "pivots": sol.pivots,
    })
}

fn solve_one(cfg: &RunConfig, inst: &Instance, mode: Mode, dual: Option<DualSolution>) -> anyhow::Result<(Status, Value)> {
    let mode = if mode == Mode::Auto { route(inst, dual.is_some()) } else { mode };
    let mut cfg = cfg.clone();
    cfg.mode = Some(mode);
    let tol = cfg.tol();
    let p = &inst.poset;
    match mode {
        Mode::Dmr => {
            let (pv, d) = solve_dmr(inst)?;
            let mech = Mechanism::posted_prices(&pv.prices);
            let rep = cs_check(inst, &mech, &d, &tol);
            let prices: serde_json::Map<_, _> = p.labels().iter().cloned().zip(pv.prices.iter().map(|x| json!(q_string(x)))).collect();
            Ok((Status::of(rep.is_clean()), json!({
                "config": cfg, "route": "dmr", "prices": prices, "revenue": exact(&rep.revenue),
                "certificate": dual_value(p, &d)?, "report": report_json(p, &rep),
            })))
        }
        Mode::Chain => {
            let sol = solve_chain(inst)?;
            let rep = cs_check(&sol.instance, &sol.mechanism, &sol.dual, &tol);
            Ok((Status::of(rep.is_clean()), json!({
                "config": cfg, "route": "chain", "menus": menus_json(p, &sol.mechanism),
                "menu_complexity": menu_complexity(&sol.mechanism).total,
                "revenue": exact(&rep.revenue), "mechanism": mechanism_value(p, &sol.mechanism)?,
                "dual": dual_value(p, &sol.dual)?, "report": report_json(p, &rep),
            })))
        }
        Mode::Three => {
            let d = dual.ok_or_else(|| anyhow::anyhow!("three-item recovery needs --dual"))?;
            let rec = recover(inst, &d, TopRule::Auto)?;
            let rep = cs_check(inst, &rec.mechanism, &d, &tol);
            let path = match &rec.path {
                RecoveryPath::CommonZero(x) => json!({ "common_zero": q_string(x) }),
                RecoveryPath::EmptyChain => json!("empty_chain"),
                RecoveryPath::Chain { top_at_reserve } => json!({ "chain": { "top_at_reserve": top_at_reserve } }),
            };
            let lower = verify_chain_lower_bound(inst, &d, &rec.mechanism).ok();
            Ok((Status::of(rep.is_clean()), json!({
                "config": cfg, "route": "three", "path": path, "menus": menus_json(p, &rec.mechanism),
                "menu_complexity": menu_complexity(&rec.mechanism).total, "distinct_chain_levels": lower,
                "revenue": exact(&rep.revenue), "mechanism": mechanism_value(p, &rec.mechanism)?,
                "report": report_json(p, &rep),
            })))
        }
        Mode::Oracle | Mode::Auto => {
            let sol = solve_grid(&discretize(inst, cfg.grid, &[])?, cfg.oracle_arith())?;
            Ok((Status::Clean, oracle_json(&cfg, inst, &sol)))
        }
    }
}

fn solve_file(cfg: &RunConfig, path: &Path, mode: Mode, dual: Option<&Path>) -> anyhow::Result<(Status, Value)> {
    let inst = load_instance(path)?;
    let d = dual.map(|p| load_dual(&inst, p)).transpose()?;
    solve_one(cfg, &inst, mode, d)
}

fn batch(cfg: &RunConfig, dir: &Path, out_dir: &Path, mode: Mode) -> Result<Status, Failure> {
    let inv = |e: anyhow::Error| Failure::Invalid(e);
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))
        .map_err(inv)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".dual.json"))
        .collect();
    files.sort();
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display())).map_err(inv)?;
    let results: Vec<(PathBuf, Result<Status, Failure>)> = files
        .par_iter()
        .map(|f| {
            let stem = f.file_stem().unwrap_or_default().to_string_lossy().to_string();
            let dual = f.with_file_name(format!("{stem}.dual.json"));
            let dual = dual.exists().then_some(dual);
            let mut c = cfg.clone();
            c.inputs = std::iter::once(f).chain(&dual).map(|p| p.display().to_string()).collect();
            let out = out_dir.join(format!("{stem}.out.json"));
            c.output = Some(out.display().to_string());
            let r = solve_file(&c, f, mode, dual.as_deref())
                .and_then(|(s, v)| write_out(Some(&out), &v).map(|_| s))
                .map_err(classify);
            (f.clone(), r)
        })
        .collect();
    let mut worst = Ok(Status::Clean);
    for (f, r) in results {
        let code = exit_code(&r);
        match &r {
            Err(e) => println!("{}: exit {code}: {e}", f.display()),
            Ok(_) => println!("{}: exit {code}", f.display()),
        }
        if code > exit_code(&worst) {
            worst = r;
        }
    }
    worst
}

fn run_solve(a: &SolveArgs) -> Result<Status, Failure> {
    let inputs: Vec<&Path> = a.instance.iter().chain(&a.dual).chain(&a.batch).map(|p| p.as_path()).collect();
    let cfg = RunConfig::new("solve", &a.common, &inputs).map_err(Failure::Invalid)?;
    if let Some(dir) = &a.batch {
        let out = a.out_dir.clone().unwrap_or_else(|| dir.join("out"));
        return batch(&cfg, dir, &out, a.mode);
    }
    let path = a.instance.as_deref().ok_or_else(|| Failure::Invalid(anyhow::anyhow!("need an instance file or --batch")))?;
    let (status, v) = solve_file(&cfg, path, a.mode, a.dual.as_deref()).map_err(classify)?;
    write_out(a.common.out.as_deref(), &v).map_err(Failure::Invalid)?;
    Ok(status)
}

fn truth_json(spec: &DualSpec, chain: Option<&[(Q, usize)]>) -> Value {
    let p = &spec.poset;
    let items: serde_json::Map<_, _> = spec
        .items
        .iter()
        .enumerate()
        .map(|(g, it)| {
            (p.label(g).to_string(), json!({
                "r_lo": q_string(&it.r_lo),
                "r_hi": q_string(&it.r_hi),
                "ironed_intervals": it.intervals.iter().map(|(a, b)| [q_string(a), q_string(b)]).collect::<Vec<_>>(),
            }))
        })
        .collect();
    json!({
        "H": q_string(&spec.h),
        "items": items,
        "flows": spec.flows.iter().map(|(&(w, b), pts)| json!({
            "edge": [p.label(w), p.label(b)], "points": pts.iter().map(q_string).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "chain": chain.map(|c| c.iter().map(|(x, g)| json!([q_string(x), p.label(*g)])).collect::<Vec<_>>()),
    })
}

fn run_generate(a: &GenerateArgs) -> Result<Status, Failure> {
    let cfg = RunConfig::new("generate", &a.common, &[]).map_err(Failure::Invalid)?;
    let h = parse_q(&a.h).context("--H").map_err(Failure::Invalid)?;
    let (inst, dual, truth) = match (a.chain, a.line) {
        (Some(m), _) => {
            let c = generate_chain_instance(m, &h).map_err(|e| classify(e.into()))?;
            let t = truth_json(&c.spec, Some(&c.chain.points));
            (c.instance, c.dual, t)
        }
        (None, Some(m)) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.common.seed);
            let spec = random_line_spec(m, &h, &mut rng);
            let (inst, dual) = generate(&spec).map_err(|e| classify(e.into()))?;
            (inst, dual, truth_json(&spec, None))
        }
        (None, None) => return Err(Failure::Invalid(anyhow::anyhow!("need --chain M or --line M"))),
    };
    let mut inst_json = serde_json::to_value(io::instance_to_json(&inst)).map_err(|e| Failure::Invalid(e.into()))?;
    inst_json["config"] = json!(cfg);
    let io = |r: anyhow::Result<()>| r.map_err(Failure::Invalid);
    io(write_out(a.common.out.as_deref(), &inst_json))?;
    if let Some(p) = &a.dual_out {
        io(write_out(Some(p), &dual_value(&inst.poset, &dual).map_err(Failure::Invalid)?))?;
    }
    if let Some(p) = &a.truth_out {
        io(write_out(Some(p), &truth))?;
    }
    Ok(Status::Clean)
}

fn run_verify(a: &VerifyArgs) -> Result<Status, Failure> {
    let inputs: Vec<&Path> = [&a.instance, &a.mechanism].into_iter().chain(&a.dual).map(|p| p.as_path()).collect();
    let cfg = RunConfig::new("verify", &a.common, &inputs).map_err(Failure::Invalid)?;
    let go = || -> anyhow::Result<(Status, Value)> {
        let inst = load_instance(&a.instance)?;
        let mech = load_mechanism(&inst, &a.mechanism)?;
        match &a.dual {
            Some(dp) => {
                let d = load_dual(&inst, dp)?;
                let rep = cs_check(&inst, &mech, &d, &cfg.tol());
                Ok((Status::of(rep.is_clean()), json!({ "config": cfg, "report": report_json(&inst.poset, &rep) })))
            }
            None => {
                let ic = ic_check(&inst, &mech);
                let labels = |g: usize| inst.poset.label(g).to_string();
                Ok((Status::of(ic.is_empty()), json!({
                    "config": cfg,
                    "report": {
                        "clean": ic.is_empty(),
                        "revenue": exact(&revenue(&inst, &mech)),
                        "ic_violations": ic.iter().map(|v| json!({
                            "worse": labels(v.worse), "better": labels(v.better), "v": v.v, "magnitude": v.magnitude,
                        })).collect::<Vec<_>>(),
                    }
                })))
            }
        }
    };
    let (status, v) = go().map_err(classify)?;
    write_out(a.common.out.as_deref(), &v).map_err(Failure::Invalid)?;
    Ok(status)
}

fn run_oracle(a: &OracleArgs) -> Result<Status, Failure> {
    let mut cfg = RunConfig::new("oracle", &a.common, &[a.instance.as_path()]).map_err(Failure::Invalid)?;
    cfg.mode = Some(Mode::Oracle);
    let inst = load_instance(&a.instance).map_err(classify)?;
    let sol = discretize(&inst, cfg.grid, &[])
        .and_then(|g| solve_grid(&g, cfg.oracle_arith()))
        .map_err(|e| classify(e.into()))?;
    write_out(a.common.out.as_deref(), &oracle_json(&cfg, &inst, &sol)).map_err(Failure::Invalid)?;
    Ok(Status::Clean)
}

fn run_export(a: &ExportArgs) -> Result<Status, Failure> {
    let go = || -> anyhow::Result<()> {
        let inst = load_instance(&a.instance)?;
        std::fs::create_dir_all(&a.out_dir)?;
        let write = |name: String, text: String| std::fs::write(a.out_dir.join(&name), text).with_context(|| name);
        for (g, md) in inst.marginals.iter().enumerate() {
            let label = inst.poset.label(g);
            let r = md.revenue_curve(a.samples);
            let ironed = iron(&r);
            write(format!("{label}_revenue.csv"), io::pwl_csv(&r, ("v", "revenue")))?;
            write(format!("{label}_ironed.csv"), io::pwl_csv(&ironed.hull, ("v", "ironed_revenue")))?;
            write(format!("{label}_cdf.csv"), io::pwl_csv(&md.cdf(a.samples), ("v", "cdf")))?;
        }
        let mut inputs = vec![a.instance.display().to_string()];
        if let Some(mp) = &a.mechanism {
            let mech = load_mechanism(&inst, mp)?;
            for (g, al) in mech.allocation.iter().enumerate() {
                write(format!("{}_allocation.csv", inst.poset.label(g)), io::pwl_csv(&al.as_pwl(&inst.h), ("v", "allocation")))?;
            }
            write("menu.csv".into(), io::menu_csv(&inst.poset, &mech))?;
            inputs.push(mp.display().to_string());
        }
        let cfg = json!({ "command": "export", "inputs": inputs, "samples": a.samples, "digits": 12 });
        write("config.json".into(), serde_json::to_string_pretty(&cfg)? + "\n")
    };
    go().map_err(classify)?;
    Ok(Status::Clean)
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(s) = std::env::var("ORDERMECH_THREADS") {
        let n: usize = s.parse().with_context(|| format!("ORDERMECH_THREADS={s}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = init_threads().map_err(Failure::Invalid).and_then(|_| match &cli.cmd {
        Cmd::Solve(a) => run_solve(a),
        Cmd::Generate(a) => run_generate(a),
        Cmd::Verify(a) => run_verify(a),
        Cmd::Oracle(a) => run_oracle(a),
        Cmd::Export(a) => run_export(a),
    });
    if let Err(e) = &r {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&r))
}
