use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use stackpick::bench::{self, BenchOptions, BenchReport, BenchTask, CorpusKind, CorpusSpec};
use stackpick::collapse::{run_removal_with, CollapseThresholds, RemovalOutcome};
use stackpick::fixtures;
use stackpick::physics::{SimConfig, World};
use stackpick::planners::{self, ActionPlan, Approach, ExecutionReport, PlanStats};
use stackpick::reconstruct::{ObservationSet, DEFAULT_SAMPLES};
use stackpick::render::{self, RenderSpec, TrajectoryWriter, View};
use stackpick::scene::{BoxId, Scene};
use stackpick::Error;

/// Exit statuses scripts can rely on.
mod exit {
    pub const VALIDATION_FAILED: u8 = 1;
    pub const BAD_INPUT: u8 = 2;
    pub const PLANNING_FAILED: u8 = 3;
}

#[derive(Parser)]
#[command(name = "stackpick", version, about = "Plan collapse-free box removals from a front view of a shelf")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truth scenes and their observations.
    Gen(GenArgs),
    /// Plan an extraction or a clearance from an observation.
    Plan(PlanArgs),
    /// Pull one box out of a scene and classify what happens.
    Simulate(SimulateArgs),
    /// Execute a plan on a ground-truth scene.
    Validate(ValidateArgs),
    /// Run both planners over a generated corpus.
    Bench(BenchArgs),
    /// Draw a trajectory dump as numbered SVG frames.
    Render(RenderArgs),
    /// Check that a file parses and satisfies its schema.
    Check(CheckArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON file of engine settings and collapse thresholds; omitted keys
    /// keep their defaults.
    #[arg(long, env = "STACKPICK_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the configured `rng_seed`.
    #[arg(long)]
    rng_seed: Option<u64>,
}

/// Shape of a `--config` file: engine fields at the top level, thresholds
/// under `thresholds`.
#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct ConfigFile {
    #[serde(flatten)]
    sim: SimConfig,
    thresholds: CollapseThresholds,
}

impl ConfigArgs {
    fn load(&self) -> Result<(SimConfig, CollapseThresholds), Error> {
        let mut file = match &self.config {
            Some(path) => serde_json::from_str::<ConfigFile>(&read(path)?)?,
            None => ConfigFile::default(),
        };
        if let Some(seed) = self.rng_seed {
            file.sim.rng_seed = seed;
        }
        file.sim.validate()?;
        file.thresholds.validate()?;
        Ok((file.sim, file.thresholds))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Structured,
    Unstructured,
}

impl From<KindArg> for CorpusKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Structured => CorpusKind::Structured,
            KindArg::Unstructured => CorpusKind::Unstructured,
        }
    }
}

/// `N` or `MIN..MAX`, both inclusive.
fn parse_count_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("`{s}` is not a positive range"));
    }
    Ok((lo, hi))
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long, value_enum, default_value = "unstructured")]
    kind: KindArg,
    #[arg(long, default_value_t = 1)]
    scenes: usize,
    /// Boxes per scene, `N` or `MIN..MAX`.
    #[arg(long, value_parser = parse_count_range)]
    boxes: Option<(usize, usize)>,
    /// Corpus seed; scene `i` is derived from it and `i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CorpusArgs {
    fn spec(&self) -> CorpusSpec {
        let mut spec = CorpusSpec::new(self.kind.into(), self.scenes, self.seed);
        if let Some((lo, hi)) = self.boxes {
            spec.boxes_per_scene = lo..=hi;
        }
        spec
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Write a shipped fixture instead of a generated corpus.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(fixtures::NAMES))]
    fixture: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Extract,
    Clear,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproachArg {
    Physics,
    Heuristic,
}

#[derive(Args)]
struct PlanArgs {
    /// Observation JSON.
    #[arg(long)]
    obs: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Required for `--task extract`, rejected for `--task clear`.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_enum, default_value = "physics")]
    approach: ApproachArg,
    /// Depth hypotheses per rollout.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Plan JSON destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record planning wall time in the plan file. Makes the file differ
    /// between runs.
    #[arg(long)]
    wall_clock: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Box to pull out.
    #[arg(long)]
    remove: String,
    /// Write a JSON-lines trajectory of every step here.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ValidateArgs {
    /// Ground-truth scene JSON.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchTaskArg {
    ExtractEveryBox,
    Clear,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum, default_value = "extract-every-box")]
    task: BenchTaskArg,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Per-run rows.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Full report including the summary.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    wall_clock: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    Front,
    Top,
}

#[derive(Args)]
struct RenderArgs {
    /// JSON-lines dump written by `simulate --trajectory`.
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "front")]
    view: ViewArg,
    /// Recorded steps per frame; 240 gives one frame per simulated second
    /// at the default timestep.
    #[arg(long, default_value_t = 24)]
    frame_stride: usize,
    /// Displacement from the first frame that marks a box collapsed, m.
    #[arg(long, default_value_t = CollapseThresholds::default().displacement)]
    collapse_displacement: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DocKind {
    Scene,
    Observation,
    Plan,
    Report,
    Outcome,
    Bench,
    Config,
    Trajectory,
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    /// Schema to check against; guessed from the contents when omitted.
    #[arg(long = "as", value_enum)]
    kind: Option<DocKind>,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => write(p, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn with_newline(mut s: String) -> String {
    s.push('\n');
    s
}

fn gen(args: &GenArgs) -> Result<u8, Error> {
    let (cfg, _) = args.config.load()?;
    fs::create_dir_all(&args.out)?;
    if let Some(name) = &args.fixture {
        let f = fixtures::by_name(name, &cfg)?;
        let obs = ObservationSet::from_scene(&f.scene);
        write(&args.out.join(format!("{name}.scene.json")), &with_newline(f.scene.to_json()))?;
        write(&args.out.join(format!("{name}.obs.json")), &with_newline(obs.to_json()))?;
        eprintln!(
            "wrote fixture `{name}` ({} boxes, target `{}`) to {}",
            f.scene.boxes.len(),
            f.target,
            args.out.display()
        );
        return Ok(0);
    }
    let spec = args.corpus.spec();
    spec.validate()?;
    let mut written = 0;
    for generated in bench::generate_corpus(&spec, &cfg) {
        let g = generated?;
        write(&args.out.join(format!("{}.scene.json", g.scene_id)), &with_newline(g.scene.to_json()))?;
        write(&args.out.join(format!("{}.obs.json", g.scene_id)), &with_newline(g.observation.to_json()))?;
        written += 1;
    }
    eprintln!("wrote {written} scene/observation pair(s) to {}", args.out.display());
    Ok(0)
}

fn print_plan_summary(plan: &ActionPlan, wall: f64) {
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "{} plan, {} action(s):", plan_label(plan), plan.len());
    for (i, a) in plan.actions.iter().enumerate() {
        let safety = match a.predicted_safe {
            Some(true) => "predicted safe",
            Some(false) => "predicted unsafe",
            None => "not simulated",
        };
        let _ = writeln!(err, "  {:>2}. {:<12} {safety}", i + 1, a.box_id.as_str());
    }
    let PlanStats { simulations_run, samples, .. } = &plan.stats;
    if plan.approach == Approach::Physics {
        let _ = writeln!(err, "simulations: {simulations_run} ({samples} sample(s) per rollout)");
    }
    let _ = writeln!(err, "planning wall time {wall:.2} s");
}

fn plan_label(plan: &ActionPlan) -> &'static str {
    match plan.approach {
        Approach::Physics => "physics-aware",
        Approach::Heuristic => "heuristic",
    }
}

fn plan(args: &PlanArgs) -> Result<u8, Error> {
    let (cfg, thresholds) = args.config.load()?;
    let obs = ObservationSet::from_json(&read(&args.obs)?)?;
    let target = match (args.task, &args.target) {
        (TaskArg::Extract, Some(t)) => Some(BoxId::new(t.as_str())),
        (TaskArg::Extract, None) => return Err(Error::InvalidInput("--task extract needs --target".into())),
        (TaskArg::Clear, Some(_)) => return Err(Error::InvalidInput("--task clear takes no --target".into())),
        (TaskArg::Clear, None) => None,
    };
    let started = Instant::now();
    let result = match (args.approach, &target) {
        (ApproachArg::Physics, Some(t)) => planners::plan_extraction_physics(&obs, t, &cfg, &thresholds, args.samples),
        (ApproachArg::Physics, None) => planners::plan_clearance_physics(&obs, &cfg, &thresholds, args.samples),
        (ApproachArg::Heuristic, Some(t)) => planners::plan_extraction_heuristic(&obs, t),
        (ApproachArg::Heuristic, None) => planners::plan_clearance_heuristic(&obs),
    };
    let wall = started.elapsed().as_secs_f64();
    let (mut plan, code) = match result {
        Ok(p) => (p, 0),
        // The partial plan is still worth having on disk.
        Err(Error::UnclearableResidue { remaining, partial }) => {
            eprintln!(
                "shelf could not be cleared; {} box(es) remain: {}",
                remaining.len(),
                remaining.iter().map(BoxId::as_str).collect::<Vec<_>>().join(", ")
            );
            (*partial, exit::PLANNING_FAILED)
        }
        Err(e) => return Err(e),
    };
    if args.wall_clock {
        plan.stats.planning_time_s = Some(wall);
    }
    emit(args.out.as_deref(), &with_newline(plan.to_json()))?;
    print_plan_summary(&plan, wall);
    Ok(code)
}

fn simulate(args: &SimulateArgs) -> Result<u8, Error> {
    let (cfg, thresholds) = args.config.load()?;
    let scene = Scene::from_json(&read(&args.scene)?)?;
    let id = BoxId::new(args.remove.as_str());
    let world = World::new(&scene, cfg)?;
    let outcome: RemovalOutcome = match &args.trajectory {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            let mut dump = TrajectoryWriter::new(BufWriter::new(file), &world.trajectory_header())?;
            dump.push(&world.frame())?;
            let mut failed = None;
            let (outcome, _) = run_removal_with(&world, &id, &thresholds, |w| {
                if failed.is_none() {
                    failed = dump.push(&w.frame()).err();
                }
            })?;
            if let Some(e) = failed {
                return Err(e);
            }
            dump.finish()?;
            outcome
        }
        None => run_removal_with(&world, &id, &thresholds, |_| {})?.0,
    };
    let json = serde_json::to_string_pretty(&outcome)?;
    emit(args.out.as_deref(), &with_newline(json))?;
    eprintln!(
        "removing `{id}`: {:?}{}",
        outcome.classification,
        if outcome.collapsed_boxes.is_empty() {
            String::new()
        } else {
            format!("; collapsed {}", outcome.collapsed_boxes.iter().map(BoxId::as_str).collect::<Vec<_>>().join(", "))
        }
    );
    Ok(0)
}

fn validate(args: &ValidateArgs) -> Result<u8, Error> {
    let (cfg, thresholds) = args.config.load()?;
    let scene = Scene::from_json(&read(&args.scene)?)?;
    let plan = ActionPlan::from_json(&read(&args.plan)?)?;
    let report: ExecutionReport = planners::validate_plan(&scene, &plan, &cfg, &thresholds)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(p) => {
            write(p, &with_newline(json.clone()))?;
            println!("{json}");
        }
        None => println!("{json}"),
    }
    if report.success {
        eprintln!("plan executed: {} box(es), est. {:.0} s", report.boxes_removed, report.estimated_time);
        Ok(0)
    } else {
        eprintln!(
            "plan failed at `{}` after {} pick(s); collapsed: {}",
            report.failed_action.as_ref().map_or("?", BoxId::as_str),
            report.boxes_removed,
            report.collapsed_during_execution.iter().map(BoxId::as_str).collect::<Vec<_>>().join(", ")
        );
        Ok(exit::VALIDATION_FAILED)
    }
}

fn print_bench_summary(r: &BenchReport, wall: f64) {
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "{} scene(s), {} sample(s) per rollout, {:.1} s", r.scenes, r.samples, wall);
    for (name, s) in [("physics-aware", &r.physics), ("heuristic", &r.heuristic)] {
        let _ = writeln!(
            err,
            "  {name:<14} success {:>5.1}% ({}/{})  avg removed {:.2}  avg est. time {:.1} s",
            100.0 * s.success_rate,
            s.successes,
            s.runs,
            s.avg_boxes_removed,
            s.avg_estimated_time_s
        );
    }
    let eff = r.efficiency_improvement_pct.map_or("n/a".to_string(), |e| format!("{e:.1}%"));
    let _ = writeln!(err, "  success delta {:+.1} pp, efficiency improvement {eff}", r.success_rate_delta_pp);
    if !r.errors.is_empty() {
        let _ = writeln!(err, "  {} scene error(s)", r.errors.len());
    }
}

fn bench(args: &BenchArgs) -> Result<u8, Error> {
    let (cfg, thresholds) = args.config.load()?;
    let task = match args.task {
        BenchTaskArg::ExtractEveryBox => BenchTask::ExtractEveryBox,
        BenchTaskArg::Clear => BenchTask::Clear,
    };
    let options = BenchOptions { wall_clock: args.wall_clock };
    let started = Instant::now();
    let report = bench::run_benchmark(&args.corpus.spec(), task, &cfg, &thresholds, args.samples, &options)?;
    let wall = started.elapsed().as_secs_f64();
    if let Some(p) = &args.csv {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        write(p, &String::from_utf8_lossy(&buf))?;
    }
    if let Some(p) = &args.json {
        write(p, &with_newline(report.to_json()))?;
    }
    if args.csv.is_none() && args.json.is_none() {
        report.write_csv(io::stdout().lock())?;
    }
    print_bench_summary(&report, wall);
    Ok(0)
}

fn render_cmd(args: &RenderArgs) -> Result<u8, Error> {
    let file = fs::File::open(&args.trajectory)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", args.trajectory.display())))?;
    let traj = render::read_trajectory(BufReader::new(file))?;
    let spec = RenderSpec {
        view: match args.view {
            ViewArg::Front => View::Front,
            ViewArg::Top => View::Top,
        },
        frame_stride: args.frame_stride,
        collapse_displacement: args.collapse_displacement,
        ..RenderSpec::default()
    };
    let frames = render::render_trajectory(&traj, &spec)?;
    fs::create_dir_all(&args.out)?;
    for (name, svg) in &frames {
        write(&args.out.join(name), svg)?;
    }
    if traj.truncated {
        eprintln!("trajectory ends in an incomplete line; rendered the {} complete step(s)", traj.frames.len());
    }
    eprintln!("wrote {} frame(s) to {}", frames.len(), args.out.display());
    Ok(0)
}

fn guess_kind(text: &str) -> Result<DocKind, Error> {
    let first = text.lines().next().unwrap_or("");
    let value: serde_json::Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(_) => {
            let head: serde_json::Value = serde_json::from_str(first)?;
            return if head.get("half_extents").is_some() {
                Ok(DocKind::Trajectory)
            } else {
                Err(Error::InvalidInput("not a JSON document or trajectory".into()))
            };
        }
    };
    let has = |k: &str| value.get(k).is_some();
    Ok(if has("rows") {
        DocKind::Bench
    } else if has("classification") {
        DocKind::Outcome
    } else if has("outcomes") {
        DocKind::Report
    } else if has("actions") {
        DocKind::Plan
    } else if has("half_extents") {
        DocKind::Trajectory
    } else if let Some(first_box) = value.get("boxes").and_then(|b| b.get(0)) {
        if first_box.get("half_extents").is_some() {
            DocKind::Scene
        } else {
            DocKind::Observation
        }
    } else if has("boxes") {
        DocKind::Scene
    } else {
        DocKind::Config
    })
}

fn check(args: &CheckArgs) -> Result<u8, Error> {
    let text = read(&args.file)?;
    let kind = match args.kind {
        Some(k) => k,
        None => guess_kind(&text)?,
    };
    let label = match kind {
        DocKind::Scene => {
            let scene = Scene::from_json(&text)?;
            scene.validate(SimConfig::default().contact_slop)?;
            "scene"
        }
        DocKind::Observation => {
            ObservationSet::from_json(&text)?.validate()?;
            "observation"
        }
        DocKind::Plan => {
            ActionPlan::from_json(&text)?;
            "plan"
        }
        DocKind::Report => {
            let r: ExecutionReport = serde_json::from_str(&text)?;
            if r.outcomes.len() > r.boxes_removed {
                return Err(Error::InvalidInput("report lists more outcomes than picks".into()));
            }
            "execution report"
        }
        DocKind::Outcome => {
            let o: RemovalOutcome = serde_json::from_str(&text)?;
            if o.first_collapsed.as_ref() != o.collapsed_boxes.first() {
                return Err(Error::InvalidInput("first_collapsed disagrees with collapsed_boxes".into()));
            }
            "removal outcome"
        }
        DocKind::Bench => {
            let r: BenchReport = serde_json::from_str(&text)?;
            for s in [&r.physics, &r.heuristic] {
                if !(0.0..=1.0).contains(&s.success_rate) {
                    return Err(Error::InvalidInput(format!("success rate {} outside [0, 1]", s.success_rate)));
                }
            }
            "bench report"
        }
        DocKind::Config => {
            let c: ConfigFile = serde_json::from_str(&text)?;
            c.sim.validate()?;
            c.thresholds.validate()?;
            "config"
        }
        DocKind::Trajectory => {
            let t = render::read_trajectory(text.as_bytes())?;
            if t.truncated {
                return Err(Error::InvalidInput(format!("trajectory truncated after {} frame(s)", t.frames.len())));
            }
            "trajectory"
        }
    };
    eprintln!("{}: valid {label}", args.file.display());
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::PlanNotFound { .. } | Error::UnclearableResidue { .. } => exit::PLANNING_FAILED,
        _ => exit::BAD_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Plan(a) => plan(a),
        Command::Simulate(a) => simulate(a),
        Command::Validate(a) => validate(a),
        Command::Bench(a) => bench(a),
        Command::Render(a) => render_cmd(a),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::PlanNotFound { trace, .. } = e.root() {
                for (prefix, id) in trace {
                    let prefix: Vec<&str> = prefix.iter().map(BoxId::as_str).collect();
                    eprintln!("  tried `{id}` after [{}]", prefix.join(", "));
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
