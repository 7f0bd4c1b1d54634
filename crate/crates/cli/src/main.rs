use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use surfdeform::code::{validate_generators, validate_meas, Extent};
use surfdeform::deform::{baseline_ascs, deform_patch, remove_defects, DefectSet, DeformationResult, DeformationSchedule};
use surfdeform::distance::distance;
use surfdeform::instructions::{execute, InstructionRequest};
use surfdeform::layout::{
    block_probability, choose_delta_d, choose_distance, event_intensity, sample_defect_events, sample_layout_events,
    DefectEvent, DefectModel, EventsFile, Layout, LayoutKind, ProgramProfile, ScalingFit, LAYOUT_FORMAT,
};
use surfdeform::noise::{logical_error_rate, qubit_rates, yield_experiment};
use surfdeform::render::{layout_ascii, layout_svg, patch_ascii, patch_svg};
use surfdeform::router::{generate_tasks, mean_throughput, run_tasks, throughput_sweep, DeformCache, SeedRow, TasksFile};
use surfdeform::verifier::check_preservation;
use surfdeform::{build_rotated_code, CodePatch, Error, LatticeCoord};

const SCENARIO_FORMAT: &str = "surfdeform-scenario/1";

#[derive(Parser)]
#[command(name = "surfdeform", version, about = "Surface-code patch deformation around defects")]
struct Cli {
    /// Worker threads for seeds and trials (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a pristine rotated patch as JSON.
    Build {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Removes defects from a patch and optionally enlarges it back.
    Deform(DeformArgs),
    /// Prints the X and Z distances of a patch.
    Distance { patch: PathBuf },
    /// Chooses the enlargement budget for a distance and defect model.
    Layout(LayoutArgs),
    /// Samples Poisson defect events.
    SampleDefects(SampleArgs),
    /// Runs CNOT tasks on a layout; CSV columns: seed,steps,throughput.
    Throughput(ThroughputArgs),
    /// Monte-Carlo logical error rate; CSV columns: trials,failures,rate,lo,hi.
    Mc(McArgs),
    /// Fabrication yield against the no-enlargement baseline.
    Yield(YieldArgs),
    /// Checks that instructions preserve the logical state.
    Verify(VerifyArgs),
    /// Draws a patch or layout.
    Render(RenderArgs),
}

#[derive(Args)]
struct Seed {
    #[arg(long, env = "SURFDEFORM_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ModelArgs {
    /// Event rate per physical qubit (Hz).
    #[arg(long, default_value_t = 1.0 / 260.0)]
    rho: f64,
    /// Defect lifetime (s).
    #[arg(long = "T", default_value_t = 0.025)]
    duration: f64,
    /// Region span.
    #[arg(long = "D", default_value_t = 4)]
    span: usize,
    #[arg(long, default_value_t = 0.5)]
    p_defect: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<DefectModel<f64>, CliError> {
        Ok(DefectModel::new(self.rho, self.duration, self.span, self.p_defect)?)
    }
}

#[derive(Args)]
struct DeformArgs {
    patch: PathBuf,
    /// Defective sites in doubled coordinates, `r,c;r,c`.
    #[arg(long)]
    defects: String,
    /// Enlarge back to this distance after removal.
    #[arg(long)]
    target: Option<usize>,
    #[arg(long, default_value_t = 4)]
    delta_d: usize,
    /// Use the removal-only baseline instead.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    schedule: Option<PathBuf>,
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.01)]
    alpha_block: f64,
    /// Largest acceptable budget (defaults to `d`).
    #[arg(long)]
    max_delta_d: Option<usize>,
    /// Physical error rate, used to pick `d` when it is not given.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    cx_count: usize,
    #[arg(long, default_value_t = 0)]
    t_count: usize,
    #[arg(long, default_value_t = 0.01)]
    alpha_fail: f64,
    /// Number of logical patches; writes a layout when given with `--out`.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "ours")]
    kind: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Sample per patch of this layout file.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Sample over a `rows,cols` area of data cells instead.
    #[arg(long)]
    area: Option<String>,
    #[arg(long)]
    cycles: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    seed: Seed,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThroughputArgs {
    /// Layout kind (ours, q3de, revised-q3de, ls) or a layout file.
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Fixed event file; one row is produced.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[command(flatten)]
    seed: Seed,
    #[arg(long, default_value_t = 9)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    delta_d: usize,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 20)]
    n_tasks: usize,
    #[arg(long, default_value_t = 4)]
    cnots: usize,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    patch: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Untreated defective sites, `r,c;r,c`.
    #[arg(long)]
    untreated: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    p_defect: f64,
    #[command(flatten)]
    seed: Seed,
}

#[derive(Args)]
struct YieldArgs {
    #[arg(long, default_value_t = 35)]
    l: usize,
    #[arg(long, default_value_t = 20)]
    faulty: usize,
    #[arg(long, default_value_t = 27)]
    target: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[command(flatten)]
    seed: Seed,
}

#[derive(Args)]
struct VerifyArgs {
    patch: PathBuf,
    /// Instructions applied in order, e.g. `DataQ_RM Q(2,2)`.
    #[arg(long = "instruction", required = true)]
    instructions: Vec<String>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct RenderArgs {
    file: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    ascii: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ExperimentKind {
    Throughput,
    Yield,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayoutSpec {
    kind: String,
    n_logical: usize,
    d: usize,
    delta_d: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskSpec {
    n_tasks: usize,
    cnots: usize,
    #[serde(default)]
    radius: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeedSpec {
    start: u64,
    count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct YieldSpec {
    l: usize,
    faulty: usize,
    target: usize,
    samples: usize,
}

/// A batch experiment described in one file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Scenario {
    format: String,
    experiment: ExperimentKind,
    #[serde(default)]
    layout: Option<LayoutSpec>,
    #[serde(default)]
    model: Option<DefectModel<f64>>,
    #[serde(default)]
    tasks: Option<TaskSpec>,
    seeds: SeedSpec,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default, rename = "yield")]
    yield_spec: Option<YieldSpec>,
}

fn default_horizon() -> usize {
    2000
}

impl Scenario {
    fn parse(s: &str) -> Result<Scenario, CliError> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| CliError::input(format!("scenario: {e}")))?;
        if sc.format != SCENARIO_FORMAT {
            return Err(CliError::input(format!("expected format {SCENARIO_FORMAT}, found {:?}", sc.format)));
        }
        match sc.experiment {
            ExperimentKind::Throughput => {
                if sc.layout.is_none() || sc.tasks.is_none() {
                    return Err(CliError::input("throughput scenarios need `layout` and `tasks`"));
                }
            }
            ExperimentKind::Yield => {
                if sc.yield_spec.is_none() {
                    return Err(CliError::input("yield scenarios need `yield`"));
                }
            }
        }
        if let Some(m) = &sc.model {
            m.validate()?;
        }
        Ok(sc)
    }
}

#[derive(Debug)]
struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        CliError { code: 1, msg: msg.into() }
    }

    fn invariant(msg: impl Into<String>) -> Self {
        CliError { code: 3, msg: msg.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) | Error::BudgetExceeded | Error::CodeBroken(_) => 2,
            Error::Structural(_) | Error::DegenerateGauge | Error::Contradiction => 3,
            _ => 1,
        };
        CliError { code, msg: e.to_string() }
    }
}

type Res<T> = Result<T, CliError>;

/// Four significant digits, trailing zeros dropped.
fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (3 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Res<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_patch(path: &Path) -> Res<CodePatch> {
    Ok(CodePatch::from_json(&read(path)?)?)
}

fn parse_sites(s: &str) -> Res<DefectSet> {
    let mut set = DefectSet::new();
    for item in s.split(';').map(str::trim).filter(|x| !x.is_empty()) {
        let item = item.trim_start_matches("Q(").trim_start_matches('(').trim_end_matches(')');
        let (r, c) = item
            .split_once(',')
            .ok_or_else(|| CliError::input(format!("bad site `{item}`, expected r,c")))?;
        let r: i32 = r.trim().parse().map_err(|_| CliError::input(format!("bad row `{r}`")))?;
        let c: i32 = c.trim().parse().map_err(|_| CliError::input(format!("bad col `{c}`")))?;
        set.insert(LatticeCoord::new(r, c));
    }
    Ok(set)
}

fn check_patch(patch: &CodePatch) -> Res<()> {
    for report in [validate_generators(patch), validate_meas(patch)] {
        if !report.ok {
            return Err(CliError::invariant(format!("validator failed: {report:?}")));
        }
    }
    Ok(())
}

fn cmd_deform(a: &DeformArgs) -> Res<()> {
    let patch = load_patch(&a.patch)?;
    let defects = parse_sites(&a.defects)?;
    let res: DeformationResult = if a.baseline {
        baseline_ascs(&patch, &defects)?
    } else if let Some(t) = a.target {
        deform_patch(&patch, &defects, t, a.delta_d)?
    } else {
        remove_defects(&patch, &defects)?
    };
    check_patch(&res.patch)?;
    if let Some(p) = &a.schedule {
        write_out(Some(p), &res.schedule.to_string())?;
    }
    if let Some(p) = &a.out {
        write_out(Some(p), &res.patch.to_json())?;
    }
    let (dx, dz) = res.distance_after;
    println!("dX={dx}, dZ={dz}");
    eprintln!(
        "{} instructions, {} defects skipped, {} deferred{}",
        res.schedule.len(),
        res.skipped.len(),
        res.deferred_defects.len(),
        if res.budget_exceeded { ", budget exceeded" } else { "" }
    );
    Ok(())
}

fn cmd_layout(a: &LayoutArgs) -> Res<()> {
    let model = a.model.model()?;
    let kind = LayoutKind::parse(&a.kind)?;
    let profile = ProgramProfile {
        n_logical: a.n.unwrap_or(1),
        cx_count: a.cx_count,
        t_count: a.t_count,
        alpha_fail: a.alpha_fail,
        alpha_block: a.alpha_block,
    };
    profile.validate()?;
    let d = match (a.d, a.p) {
        (Some(d), _) => d,
        (None, Some(p)) => choose_distance(&profile, p, &ScalingFit::default())?,
        (None, None) => return Err(CliError::input("give --d or --p")),
    };
    let delta_d = choose_delta_d(d, &model, a.alpha_block)?;
    let cap = a.max_delta_d.unwrap_or(d);
    if delta_d > cap {
        return Err(Error::Infeasible(format!("delta_d={delta_d} exceeds the budget cap {cap}")).into());
    }
    let p_block = block_probability(d, delta_d, &model);
    println!("delta_d={delta_d}, p_block={}", sig4(p_block));
    eprintln!("d={d}, lambda={}", sig4(event_intensity(d, &model)));
    if let Some(out) = &a.out {
        let n = a.n.ok_or_else(|| CliError::input("--out needs --n"))?;
        let l = Layout::grid(n, d, delta_d, kind);
        write_out(Some(out), &l.to_json())?;
        eprintln!("{} physical qubits", l.physical_qubits());
    }
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Res<()> {
    let model = a.model.model()?;
    let events = match (&a.layout, &a.area) {
        (Some(p), None) => {
            let l = Layout::from_json(&read(p)?)?;
            sample_layout_events(&l, &model, a.cycles, a.seed.seed)
        }
        (None, Some(area)) => {
            let (h, w) = area
                .split_once(',')
                .and_then(|(h, w)| Some((h.trim().parse::<i32>().ok()?, w.trim().parse::<i32>().ok()?)))
                .filter(|(h, w)| *h > 0 && *w > 0)
                .ok_or_else(|| CliError::input(format!("bad area `{area}`, expected rows,cols")))?;
            let ext = Extent {
                top: 0,
                bottom: h - 1,
                left: 0,
                right: w - 1,
            };
            sample_defect_events(&model, a.cycles, &ext, a.seed.seed)
        }
        _ => return Err(CliError::input("give exactly one of --layout and --area")),
    };
    eprintln!("{} events", events.len());
    write_out(a.out.as_deref(), &EventsFile::new(events).to_json())
}

fn load_layout(spec: &str, n: usize, d: usize, delta_d: usize) -> Res<Layout> {
    match LayoutKind::parse(spec) {
        Ok(kind) => Ok(Layout::grid(n, d, delta_d, kind)),
        Err(_) if Path::new(spec).exists() => {
            let l = Layout::from_json(&read(Path::new(spec))?)?;
            if l.format != LAYOUT_FORMAT {
                return Err(CliError::input("not a layout file"));
            }
            Ok(l)
        }
        Err(e) => Err(e.into()),
    }
}

fn print_rows(rows: &[SeedRow]) {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "seed,steps,throughput");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.seed, r.report.steps_used, r.report.throughput);
    }
    eprintln!("mean throughput {}", sig4(mean_throughput(rows)));
}

fn cmd_throughput(a: &ThroughputArgs) -> Res<()> {
    if let Some(path) = &a.scenario {
        return run_scenario(&Scenario::parse(&read(path)?)?);
    }
    let spec = a.layout.as_deref().ok_or_else(|| CliError::input("give --layout or --scenario"))?;
    let tasks = match &a.tasks {
        Some(p) => Some(TasksFile::from_json(&read(p)?)?.tasks),
        None => None,
    };
    let n = a
        .n
        .or_else(|| tasks.as_ref().map(|t| t.iter().flatten().map(|r| r.control.max(r.target) + 1).max().unwrap_or(1)))
        .unwrap_or(16);
    let layout = load_layout(spec, n, a.d, a.delta_d)?;
    let tasks = match tasks {
        Some(t) => t,
        None => generate_tasks(&layout, a.n_tasks, a.cnots, a.radius, a.seed.seed)?,
    };
    TasksFile::new(tasks.clone()).validate(layout.n_logical)?;
    let cache = DeformCache::new(layout.d, layout.delta_d);
    let model = a.model.model()?;
    let rows = match &a.events {
        Some(p) => {
            let ev: Vec<DefectEvent> = EventsFile::from_json(&read(p)?)?.events;
            let report = run_tasks(&layout, &tasks, &ev, model.duration_cycles(), a.horizon, &cache);
            vec![SeedRow { seed: a.seed.seed, report }]
        }
        None => {
            let seeds: Vec<u64> = (a.seed.seed..a.seed.seed + a.seeds).collect();
            throughput_sweep(&layout, &tasks, &model, &seeds, a.horizon, &cache)
        }
    };
    print_rows(&rows);
    Ok(())
}

fn run_scenario(sc: &Scenario) -> Res<()> {
    let seeds: Vec<u64> = (sc.seeds.start..sc.seeds.start + sc.seeds.count).collect();
    match sc.experiment {
        ExperimentKind::Throughput => {
            let ls = sc.layout.as_ref().expect("validated");
            let ts = sc.tasks.as_ref().expect("validated");
            let layout = Layout::grid(ls.n_logical, ls.d, ls.delta_d, LayoutKind::parse(&ls.kind)?);
            let model = sc.model.unwrap_or_else(DefectModel::nominal);
            let tasks = generate_tasks(&layout, ts.n_tasks, ts.cnots, ts.radius, sc.seeds.start)?;
            let cache = DeformCache::new(layout.d, layout.delta_d);
            print_rows(&throughput_sweep(&layout, &tasks, &model, &seeds, sc.horizon, &cache));
        }
        ExperimentKind::Yield => {
            let y = sc.yield_spec.as_ref().expect("validated");
            println!("seed,surf_yield,ascs_yield");
            for s in seeds {
                let r = yield_experiment(y.l, y.faulty, y.target, y.samples, s)?;
                println!("{s},{},{}", r.surf_yield(), r.ascs_yield());
            }
        }
    }
    Ok(())
}

fn cmd_mc(a: &McArgs) -> Res<()> {
    if !(0.0..=1.0).contains(&a.p) {
        return Err(CliError::input("--p must lie in [0, 1]"));
    }
    let patch = load_patch(&a.patch)?;
    let untreated = match &a.untreated {
        Some(s) => parse_sites(s)?,
        None => DefectSet::new(),
    };
    let rates = qubit_rates(&patch, a.p, &untreated, a.p_defect);
    let est = logical_error_rate(&patch, &rates, a.trials, a.seed.seed)?;
    eprintln!(
        "p_L = {} [{}, {}] over {} trials{}",
        sig4(est.rate),
        sig4(est.lo),
        sig4(est.hi),
        est.trials,
        if est.exact { "" } else { " (greedy matching used)" }
    );
    println!("trials,failures,rate,lo,hi");
    println!("{},{},{},{},{}", est.trials, est.failures, est.rate, est.lo, est.hi);
    Ok(())
}

fn cmd_yield(a: &YieldArgs) -> Res<()> {
    let r = yield_experiment(a.l, a.faulty, a.target, a.samples, a.seed.seed)?;
    let ratio = if r.ascs_yield() > 0.0 { r.surf_yield() / r.ascs_yield() } else { f64::INFINITY };
    eprintln!(
        "l={} faulty={} target={}: surf {} ascs {} ratio {}",
        r.l,
        r.n_faulty,
        r.target,
        sig4(r.surf_yield()),
        sig4(r.ascs_yield()),
        sig4(ratio)
    );
    println!("samples,surf_successes,ascs_successes,surf_yield,ascs_yield");
    println!("{},{},{},{},{}", r.samples, r.surf_successes, r.ascs_successes, r.surf_yield(), r.ascs_yield());
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> Res<()> {
    let patch = load_patch(&a.patch)?;
    let mut current = patch.clone();
    let mut schedule = DeformationSchedule::new();
    for text in &a.instructions {
        let req: InstructionRequest = text.parse()?;
        let (next, ins) = execute(&current, &req)?;
        schedule.push(ins);
        current = next;
    }
    let report = check_preservation(&patch, &schedule, a.tol)?;
    println!("{report}");
    if report.ok {
        Ok(())
    } else {
        Err(CliError::invariant("logical state not preserved"))
    }
}

fn cmd_render(a: &RenderArgs) -> Res<()> {
    let text = read(&a.file)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::input(e.to_string()))?;
    let (svg, art) = if value.get("format").and_then(|f| f.as_str()) == Some(LAYOUT_FORMAT) {
        let l = Layout::from_json(&text)?;
        (layout_svg(&l), layout_ascii(&l))
    } else {
        let p = CodePatch::from_json(&text)?;
        (patch_svg(&p), patch_ascii(&p))
    };
    if let Some(path) = &a.svg {
        write_out(Some(path), &svg)?;
    }
    if a.ascii || a.svg.is_none() {
        print!("{art}");
    }
    Ok(())
}

fn run(cli: Cli) -> Res<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    match &cli.cmd {
        Command::Build { d, out } => write_out(out.as_deref(), &build_rotated_code(*d)?.to_json()),
        Command::Deform(a) => cmd_deform(a),
        Command::Distance { patch } => {
            let patch = load_patch(patch)?;
            check_patch(&patch)?;
            let (dx, dz) = distance(&patch)?;
            println!("dX={dx}, dZ={dz}");
            Ok(())
        }
        Command::Layout(a) => cmd_layout(a),
        Command::SampleDefects(a) => cmd_sample(a),
        Command::Throughput(a) => cmd_throughput(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Yield(a) => cmd_yield(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Render(a) => cmd_render(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
