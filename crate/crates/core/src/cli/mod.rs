//! The `conspec` command line.
//!
//! Exit codes: 0 on success, 2 on usage or input errors, 3 when the solver
//! finds fewer feasible cuts than it needs. Every command that takes `--out`
//! also writes `<out>.manifest.json`, which `conspec replay` reruns.

mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::constraints::{
    from_labels, materialize, BetaPolicy, ConstraintList, ConstraintMatrix, SamplingStrategy,
};
use crate::error::{Error, Result};
use crate::eval::{
    ari, beta_sweep, beta_sweep_result, convergence_experiment, satisfaction_ratio, spectral_learning_baseline,
    ConvergenceConfig, SweepMetric,
};
use crate::graph::{build_laplacian, resolve_sigma, rbf_affinity, two_moons, AffinityGraph, PointCloud, Sigma};
use crate::io::{self, GraphFormat};
use crate::linalg::Tolerances;
use crate::solver::{csp_k_way, csp_two_way, jnr_samples, transfer_cut, JnrOrigin, KWayMode, Partition, TwoWaySplit};

pub use manifest::{FileRecord, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "conspec", version, about = "Constrained spectral clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Two-way constrained cut.
    Cluster(ClusterArgs),
    /// K-way constrained partition.
    Kway(KwayArgs),
    /// Cut a target graph using a source graph as soft constraints.
    Transfer(TransferArgs),
    /// Solve across a grid of β fractions; writes sweep CSV.
    SweepBeta(SweepBetaArgs),
    /// Mean ARI against ground truth per number of random constraints; writes sweep CSV.
    Converge(ConvergeArgs),
    /// Joint numerical range samples of L̄ and Q̄.
    Jnr(JnrArgs),
    /// Generate synthetic data.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Adjusted Rand index between two label files.
    EvalAri(EvalAriArgs),
    /// Spectral-learning baseline: constraints rewrite the affinity matrix.
    BaselineSl(BaselineSlArgs),
    /// Rerun a command from its manifest and check its outputs are bit-identical.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
struct GraphArgs {
    /// Input graph or point file.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "points-csv")]
    format: GraphFormat,
    /// The last column of a points-csv file is a class label.
    #[arg(long)]
    labeled: bool,
    /// RBF width for points-csv input: a positive number or `auto`.
    #[arg(long, default_value = "auto")]
    sigma: Sigma,
}

#[derive(Debug, Clone, Args)]
struct ConstraintArgs {
    /// `i j w` triples; `i i w` adds to the diagonal.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// One label or `?` per node; every labeled pair becomes a must-link or cannot-link.
    #[arg(long, conflicts_with = "constraints")]
    labels: Option<PathBuf>,
    /// β: a number, `auto`, `single` (exactly one feasible cut), or `frac:t` with t in (0, 1).
    #[arg(long, default_value = "auto")]
    beta: BetaPolicy,
}

#[derive(Debug, Clone, Args)]
struct ClusterArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    constraints: ConstraintArgs,
    /// How the indicator becomes labels: `sign` or `kmeans`.
    #[arg(long, default_value = "sign")]
    split: TwoWaySplit,
    /// Ground-truth labels; adds `ari` to the result.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct KwayArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    constraints: ConstraintArgs,
    #[arg(long)]
    k: usize,
    /// `embed`, `sign` or `wsign`.
    #[arg(long, default_value = "embed")]
    mode: KWayMode,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct TransferArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value = "dense-csv")]
    format: GraphFormat,
    #[arg(long, default_value = "auto")]
    sigma: Sigma,
    #[arg(long, default_value = "auto")]
    beta: BetaPolicy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct SweepBetaArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    constraints: Option<PathBuf>,
    #[arg(long, conflicts_with = "constraints")]
    labels: Option<PathBuf>,
    /// Comma-separated fractions in (0, 1).
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// `cost`, `purity` or `satisfied`.
    #[arg(long, default_value = "purity")]
    metric: SweepMetric,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Accepted for symmetry with other sweeps; a β sweep has one trial per point.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct ConvergeArgs {
    /// points-csv whose last column is the class label.
    #[arg(long)]
    points: PathBuf,
    #[arg(long, default_value = "auto")]
    sigma: Sigma,
    /// Comma-separated constraint counts.
    #[arg(long, value_delimiter = ',', required = true)]
    counts: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value = "frac:0.9")]
    beta: BetaPolicy,
    /// `uniform` or `misclustered`.
    #[arg(long, default_value = "uniform")]
    strategy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct JnrArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    constraints: ConstraintArgs,
    /// Omit the eigenvectors of L̄.
    #[arg(long)]
    cuts_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// Two interleaving half-circles; writes labeled points-csv.
    TwoMoons(TwoMoonsArgs),
}

#[derive(Debug, Clone, Args)]
struct TwoMoonsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Extra uniform points over the bounding box.
    #[arg(long, default_value_t = 0)]
    background: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct EvalAriArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct BaselineSlArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    constraints: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

/// Result file of `cluster`, `kway`, `transfer` and `baseline-sl`.
#[derive(Debug, Serialize)]
struct ResultJson {
    labels: Vec<usize>,
    indicator: Option<Vec<f64>>,
    eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenvalues: Option<Vec<f64>>,
    cost: Option<f64>,
    purity: Option<f64>,
    beta: Option<f64>,
    vol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    satisfied_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ari: Option<f64>,
    n_feasible: usize,
    filtered_complex: usize,
    filtered_nonpositive: usize,
}

impl ResultJson {
    fn new(p: &Partition, graph: &AffinityGraph, list: Option<&ConstraintList>, truth: Option<&[usize]>) -> Result<Self> {
        let first = p.cuts.first();
        let satisfied_ratio = match list {
            Some(l) if l.triples().iter().any(|t| t.2 != 0.0) => Some(satisfaction_ratio(&p.labels, l)?),
            _ => None,
        };
        Ok(Self {
            labels: p.labels.clone(),
            indicator: first.map(|c| c.u.iter().copied().collect()),
            eigenvalue: first.map(|c| c.lambda),
            eigenvalues: (p.cuts.len() > 1).then(|| p.cuts.iter().map(|c| c.lambda).collect()),
            cost: first.map(|c| c.cost),
            purity: first.map(|c| c.purity),
            beta: p.beta,
            vol: graph.vol(),
            satisfied_ratio,
            ari: truth.map(|t| ari(&p.labels, t)).transpose()?,
            n_feasible: p.diagnostics.n_feasible,
            filtered_complex: p.diagnostics.filtered_complex,
            filtered_nonpositive: p.diagnostics.filtered_nonpositive,
        })
    }
}

/// Per-invocation state: path resolution and what goes into the manifest.
struct Run {
    base: PathBuf,
    command: String,
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    config: serde_json::Map<String, serde_json::Value>,
}

impl Run {
    fn resolve(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    fn input(&mut self, p: &Path) -> PathBuf {
        self.inputs.push(p.to_path_buf());
        self.resolve(p)
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.config
            .insert(key.to_string(), serde_json::to_value(value).expect("config serializes"));
    }

    fn write(&mut self, out: &Path, contents: &[u8]) -> Result<()> {
        io::write_atomic(&self.resolve(out), contents)?;
        self.outputs.push(out.to_path_buf());
        Ok(())
    }

    fn write_json(&mut self, out: &Path, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("result serializes");
        text.push('\n');
        self.write(out, text.as_bytes())
    }

    fn finish(self, out: &Path) -> Result<()> {
        let record = |p: &PathBuf| -> Result<FileRecord> {
            Ok(FileRecord {
                path: p.clone(),
                sha256: FileRecord::of(&self.base.join(p))?.sha256,
            })
        };
        let manifest = RunManifest {
            command: self.command.clone(),
            argv: self.argv.clone(),
            cwd: self.base.clone(),
            inputs: self.inputs.iter().map(record).collect::<Result<_>>()?,
            config: serde_json::Value::Object(self.config.clone()),
            outputs: self.outputs.iter().map(record).collect::<Result<_>>()?,
        };
        manifest.write(&self.resolve(&RunManifest::path_for(out)))
    }

    fn load_graph(&mut self, args: &GraphArgs) -> Result<(AffinityGraph, Option<PointCloud>)> {
        let path = self.input(&args.graph);
        self.set("format", format!("{:?}", args.format));
        match args.format {
            GraphFormat::PointsCsv => {
                let points = io::read_points(&path, args.labeled)?;
                let sigma = resolve_sigma(&points, args.sigma)?;
                self.set("sigma", sigma);
                Ok((rbf_affinity(&points, Sigma::Fixed(sigma))?, Some(points)))
            }
            GraphFormat::EdgeList => Ok((build_laplacian(io::read_edge_list(&path)?)?, None)),
            GraphFormat::DenseCsv => Ok((build_laplacian(io::read_dense(&path)?)?, None)),
        }
    }

    fn load_constraints(
        &mut self,
        constraints: Option<&Path>,
        labels: Option<&Path>,
        graph: &AffinityGraph,
    ) -> Result<(ConstraintMatrix, Option<ConstraintList>)> {
        if let Some(p) = constraints {
            let path = self.input(p);
            let list = io::read_constraints(&path, graph.n())?;
            return Ok((materialize(&list, graph)?, Some(list)));
        }
        if let Some(p) = labels {
            let path = self.input(p);
            let cm = from_labels(&io::read_labels(&path)?, graph)?;
            let list = cm.to_list();
            return Ok((cm, Some(list)));
        }
        Ok((materialize(&ConstraintList::new(graph.n()), graph)?, None))
    }

    fn load_truth(&mut self, truth: Option<&Path>) -> Result<Option<Vec<usize>>> {
        truth.map(|p| io::read_full_labels(&self.input(p))).transpose()
    }
}

/// Parses `argv` (program name first), runs the command, and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let base = match std::env::current_dir() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot read the working directory: {e}");
            return 2;
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, base, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command, base: PathBuf, argv: Vec<String>) -> Result<()> {
    let name = argv.first().cloned().unwrap_or_default();
    let mut run = Run {
        base,
        command: name,
        argv,
        inputs: Vec::new(),
        outputs: Vec::new(),
        config: serde_json::Map::new(),
    };
    run.set("tolerances", Tolerances::default());
    match command {
        Command::Cluster(a) => cluster(run, a),
        Command::Kway(a) => kway(run, a),
        Command::Transfer(a) => transfer(run, a),
        Command::SweepBeta(a) => sweep(run, a),
        Command::Converge(a) => converge(run, a),
        Command::Jnr(a) => jnr(run, a),
        Command::Gen(GenCommand::TwoMoons(a)) => gen_two_moons(run, a),
        Command::EvalAri(a) => eval_ari(run, a),
        Command::BaselineSl(a) => baseline_sl(run, a),
        Command::Replay(a) => replay(&run.base, &a.manifest),
    }
}

fn cluster(mut run: Run, a: ClusterArgs) -> Result<()> {
    let (graph, _) = run.load_graph(&a.graph)?;
    let (cm, list) =
        run.load_constraints(a.constraints.constraints.as_deref(), a.constraints.labels.as_deref(), &graph)?;
    let truth = run.load_truth(a.truth.as_deref())?;
    let p = csp_two_way(&graph, &cm, a.constraints.beta)?.resplit(a.split)?;
    run.set("beta", p.beta);
    run.set("split", format!("{:?}", a.split));
    run.set("seed", a.seed);
    let result = ResultJson::new(&p, &graph, list.as_ref(), truth.as_deref())?;
    run.write_json(&a.out, &result)?;
    run.finish(&a.out)
}

fn kway(mut run: Run, a: KwayArgs) -> Result<()> {
    let (graph, _) = run.load_graph(&a.graph)?;
    let (cm, list) =
        run.load_constraints(a.constraints.constraints.as_deref(), a.constraints.labels.as_deref(), &graph)?;
    let truth = run.load_truth(a.truth.as_deref())?;
    let p = csp_k_way(&graph, &cm, a.constraints.beta, a.k, a.mode, a.seed)?;
    run.set("beta", p.beta);
    run.set("k", a.k);
    run.set("mode", format!("{:?}", a.mode));
    run.set("seed", a.seed);
    let result = ResultJson::new(&p, &graph, list.as_ref(), truth.as_deref())?;
    run.write_json(&a.out, &result)?;
    run.finish(&a.out)
}

fn load_plain_graph(run: &mut Run, path: &Path, format: GraphFormat, sigma: Sigma) -> Result<AffinityGraph> {
    let args = GraphArgs {
        graph: path.to_path_buf(),
        format,
        labeled: false,
        sigma,
    };
    Ok(run.load_graph(&args)?.0)
}

fn transfer(mut run: Run, a: TransferArgs) -> Result<()> {
    let source = load_plain_graph(&mut run, &a.source, a.format, a.sigma)?;
    let target = load_plain_graph(&mut run, &a.target, a.format, a.sigma)?;
    let t = transfer_cut(&target, &source, a.beta)?;
    run.set("beta", t.partition.beta);
    run.set("seed", a.seed);
    let result = ResultJson::new(&t.partition, &target, None, None)?;
    run.write_json(&a.out, &result)?;
    run.finish(&a.out)
}

fn sweep(mut run: Run, a: SweepBetaArgs) -> Result<()> {
    let (graph, _) = run.load_graph(&a.graph)?;
    let (cm, _) = run.load_constraints(a.constraints.as_deref(), a.labels.as_deref(), &graph)?;
    let rows = beta_sweep(&graph, &cm, &a.grid, a.k, a.seed)?;
    run.set("grid", &a.grid);
    run.set("k", a.k);
    run.set("metric", format!("{:?}", a.metric));
    run.set("seed", a.seed);
    run.set("betas", rows.iter().map(|r| r.beta).collect::<Vec<_>>());
    let csv = beta_sweep_result(&rows, a.metric).to_csv();
    run.write(&a.out, csv.as_bytes())?;
    run.finish(&a.out)
}

fn converge(mut run: Run, a: ConvergeArgs) -> Result<()> {
    let strategy = match a.strategy.as_str() {
        "uniform" => SamplingStrategy::Uniform,
        "misclustered" => SamplingStrategy::Misclustered,
        s => return Err(Error::InvalidInput(format!("unknown strategy `{s}` (expected uniform or misclustered)"))),
    };
    let points = io::read_points(&run.input(&a.points), true)?;
    let sigma = resolve_sigma(&points, a.sigma)?;
    let config = ConvergenceConfig {
        sigma: Sigma::Fixed(sigma),
        counts: a.counts.clone(),
        trials: a.trials,
        seed: a.seed,
        policy: a.beta,
        strategy,
        jobs: a.jobs,
    };
    let result = convergence_experiment(&points, &config)?;
    run.set("sigma", sigma);
    run.set("counts", &a.counts);
    run.set("trials", a.trials);
    run.set("beta", format!("{:?}", a.beta));
    run.set("strategy", &a.strategy);
    run.set("seed", a.seed);
    run.set("trial_seeds", &result.seeds);
    run.write(&a.out, result.to_csv().as_bytes())?;
    run.finish(&a.out)
}

fn jnr(mut run: Run, a: JnrArgs) -> Result<()> {
    let (graph, _) = run.load_graph(&a.graph)?;
    let (cm, _) =
        run.load_constraints(a.constraints.constraints.as_deref(), a.constraints.labels.as_deref(), &graph)?;
    let cuts = match csp_two_way(&graph, &cm, a.constraints.beta) {
        Ok(p) => crate::solver::feasible_set(&graph, &cm, p.beta.expect("constrained cut has β"))?.cuts,
        Err(Error::NoFeasibleCut { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let samples = jnr_samples(&graph, &cm, &cuts, !a.cuts_only)?;
    let rows: Vec<_> = samples
        .iter()
        .map(|s| {
            json!({
                "cost": s.cost_coord,
                "purity": s.purity_coord,
                "origin": match s.origin {
                    JnrOrigin::UnconstrainedEigvec => "eigvec",
                    JnrOrigin::FeasibleCut => "feasible",
                },
            })
        })
        .collect();
    run.write_json(&a.out, &rows)?;
    run.finish(&a.out)
}

fn gen_two_moons(mut run: Run, a: TwoMoonsArgs) -> Result<()> {
    let points = two_moons(a.n, a.noise, a.background, a.seed)?;
    run.set("n", a.n);
    run.set("noise", a.noise);
    run.set("background", a.background);
    run.set("seed", a.seed);
    let path = run.resolve(&a.out);
    io::write_points(&path, &points, true)?;
    run.outputs.push(a.out.clone());
    run.finish(&a.out)
}

fn eval_ari(mut run: Run, a: EvalAriArgs) -> Result<()> {
    let pred = io::read_full_labels(&run.input(&a.pred))?;
    let truth = io::read_full_labels(&run.input(&a.truth))?;
    let value = ari(&pred, &truth)?;
    println!("{value}");
    if let Some(out) = a.out {
        run.write_json(&out, &json!({ "ari": value }))?;
        run.finish(&out)?;
    }
    Ok(())
}

fn baseline_sl(mut run: Run, a: BaselineSlArgs) -> Result<()> {
    let (graph, _) = run.load_graph(&a.graph)?;
    let list = io::read_constraints(&run.input(&a.constraints), graph.n())?;
    let truth = run.load_truth(a.truth.as_deref())?;
    let p = spectral_learning_baseline(&graph, &list, a.k)?;
    run.set("k", a.k);
    let result = ResultJson::new(&p, &graph, Some(&list), truth.as_deref())?;
    run.write_json(&a.out, &result)?;
    run.finish(&a.out)
}

fn replay(base: &Path, manifest_path: &Path) -> Result<()> {
    let manifest = RunManifest::read(&base.join(manifest_path))?;
    manifest.check_inputs()?;
    let argv = std::iter::once("conspec".to_string()).chain(manifest.argv.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::InvalidInput(format!("manifest argv: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::InvalidInput("manifest records a replay".into()));
    }
    execute(cli.command, manifest.cwd.clone(), manifest.argv.clone())?;
    manifest.check_outputs()?;
    println!("replayed {}: {} output(s) identical", manifest.command, manifest.outputs.len());
    Ok(())
}
