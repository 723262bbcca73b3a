use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use hclocal::localsearch::init_tree_seed;
use hclocal::oracle;
use hclocal::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};

/// How to read a delimited feature table.
#[derive(Args, Debug, Clone, Default)]
pub struct TableArgs {
    /// 0-based column holding a class label, excluded from the features.
    #[arg(long)]
    pub label_column: Option<usize>,
    /// 0-based columns to ignore, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub drop_columns: Vec<usize>,
    /// The first line is data, not column names.
    #[arg(long)]
    pub no_header: bool,
    /// Field delimiter; sniffed from the first line when omitted.
    #[arg(long)]
    pub delimiter: Option<char>,
}

impl TableArgs {
    pub fn options(&self) -> CliResult<LoadOptions> {
        let delimiter = match self.delimiter {
            None => None,
            Some(c) if c.is_ascii() => Some(c as u8),
            Some(c) => return Err(CliError::usage(format!("delimiter {c:?} is not ASCII"))),
        };
        Ok(LoadOptions {
            delimiter,
            has_header: !self.no_header,
            label_column: self.label_column,
            drop_columns: self.drop_columns.clone(),
        })
    }
}

/// Attaches the path to I/O errors raised by the core library.
pub fn at_path<T>(path: &Path, result: hclocal::Result<T>) -> CliResult<T> {
    result.map_err(|e| match e {
        HcError::Io(source) => CliError::read(path, source),
        other => other.into(),
    })
}

pub fn read_dataset(path: &Path, options: &LoadOptions) -> CliResult<Dataset> {
    at_path(path, load_dataset(path, options))
}

pub fn read_matrix(path: &Path) -> CliResult<SimilarityMatrix> {
    at_path(path, SimilarityMatrix::load(path))
}

pub fn read_tree(path: &Path) -> CliResult<HcTree> {
    let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    Ok(HcTree::parse(text.trim())?)
}

/// Tree text given inline, or a path to a tree file.
fn tree_arg(arg: &str) -> CliResult<HcTree> {
    if arg.trim_start().starts_with('(') {
        Ok(HcTree::parse(arg.trim())?)
    } else {
        read_tree(Path::new(arg))
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::write(path, e))
}

fn write_tree(tree: &HcTree, path: &Path) -> CliResult<()> {
    write_text(path, &format!("{}\n", tree.to_canonical()))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => write_text(p, &format!("{text}\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    /// Delimited numeric data, one point per row.
    pub input: PathBuf,
    /// Destination of the binary similarity matrix.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Bandwidth: `auto`, `mean` or a positive number.
    #[arg(long, default_value = "auto")]
    pub sigma: Sigma,
    #[command(flatten)]
    pub table: TableArgs,
}

pub fn kernel(args: &KernelArgs) -> CliResult<()> {
    let data = read_dataset(&args.input, &args.table.options()?)?;
    let kernel = gaussian_similarity(&data, args.sigma)?;
    kernel.matrix.save(&args.output).map_err(|e| match e {
        HcError::Io(source) => CliError::write(&args.output, source),
        other => other.into(),
    })?;
    write_json(
        &json!({
            "n": kernel.matrix.n(),
            "dim": data.dim(),
            "sigma": kernel.sigma,
            "mean_distance": kernel.mean_distance,
            "total_weight": kernel.matrix.total_weight(),
            "output": args.output,
        }),
        None,
    )
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// average, single, complete or ward.
    #[arg(long)]
    pub linkage: LinkageKind,
    /// Precomputed similarity matrix.
    #[arg(long)]
    pub sim: Option<PathBuf>,
    /// Feature table. Required for ward; otherwise used to build the kernel
    /// when --sim is absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Kernel bandwidth when the similarities come from --data.
    #[arg(long, default_value = "auto")]
    pub sigma: Sigma,
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn build(args: &BuildArgs) -> CliResult<()> {
    if args.linkage.needs_features() && args.data.is_none() {
        return Err(CliError::usage(
            "ward linkage needs the feature table (--data); a similarity matrix is not enough",
        ));
    }
    let data = match &args.data {
        Some(path) => Some(read_dataset(path, &args.table.options()?)?),
        None => None,
    };
    let (w, sigma) = match (&args.sim, &data) {
        (Some(path), _) => (read_matrix(path)?, None),
        (None, Some(d)) => {
            let kernel = gaussian_similarity(d, args.sigma)?;
            (kernel.matrix, Some(kernel.sigma))
        }
        (None, None) => return Err(CliError::usage("pass --sim or --data")),
    };
    let tree = build_linkage(args.linkage, &w, data.as_ref())?;
    write_tree(&tree, &args.output)?;
    let s = score(&tree, &w)?;
    write_json(
        &json!({
            "linkage": args.linkage,
            "n": s.n,
            "sigma": sigma,
            "revenue": s.revenue,
            "cost": s.cost,
            "normalized": s.normalized_revenue,
            "output": args.output,
        }),
        None,
    )
}

#[derive(Args, Debug)]
pub struct RandomTreeArgs {
    /// Number of leaves.
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = "HC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn random_tree(args: &RandomTreeArgs) -> CliResult<()> {
    let tree = HcTree::random(args.n, args.seed)?;
    match &args.output {
        Some(path) => write_tree(&tree, path),
        None => {
            println!("{}", tree.to_canonical());
            Ok(())
        }
    }
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub sim: PathBuf,
    /// Starting tree: `random`, a similarity linkage (average, single,
    /// complete) or a tree file.
    #[arg(long, default_value = "random")]
    pub init: String,
    /// greedy or random.
    #[arg(long, default_value = "greedy")]
    pub variant: Variant,
    /// Base seed; run k uses seed + k.
    #[arg(long, env = "HC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Smallest gain counted as profitable.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Independent runs; more than one prints an aggregate report.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Use exact integer arithmetic on the weights times this denominator.
    #[arg(long)]
    pub exact: Option<u32>,
    /// Destination of the final tree.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Destination of the JSON report; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-step CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Keep every k-th point of the revenue trajectory in the report.
    #[arg(long)]
    pub log_every: Option<u64>,
}

enum Start {
    Random,
    Tree(HcTree),
}

fn start_tree(spec: &str, w: &SimilarityMatrix) -> CliResult<Start> {
    if spec.eq_ignore_ascii_case("random") {
        return Ok(Start::Random);
    }
    if let Ok(kind) = spec.parse::<LinkageKind>() {
        if kind.needs_features() {
            return Err(CliError::usage(
                "ward needs the feature table; build it first and pass the tree file",
            ));
        }
        return Ok(Start::Tree(build_linkage(kind, w, None)?));
    }
    let tree = read_tree(Path::new(spec))?;
    if tree.n() != w.n() {
        return Err(HcError::SizeMismatch {
            tree: tree.n(),
            matrix: w.n(),
        }
        .into());
    }
    Ok(Start::Tree(tree))
}

pub fn search_cmd(args: &SearchArgs) -> CliResult<()> {
    let w = read_matrix(&args.sim)?;
    let start = start_tree(&args.init, &w)?;
    let cfg = SearchConfig {
        variant: args.variant,
        seed: args.seed,
        max_steps: args.max_steps,
        tolerance: args.tolerance,
        log_every: args.log_every,
    };
    match args.exact {
        Some(denominator) => {
            let exact = IntegerWeights::from_scaled(&w, denominator)?;
            run_search(args, &exact, start, &cfg)
        }
        None => run_search(args, &w, start, &cfg),
    }
}

fn run_search<T: Weight, P: PairWeights<T> + Sync>(
    args: &SearchArgs,
    w: &P,
    start: Start,
    cfg: &SearchConfig,
) -> CliResult<()> {
    if args.runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    if args.runs > 1 {
        if args.output.is_some() || args.log.is_some() {
            return Err(CliError::usage(
                "--output and --log apply to a single run; drop them or use --runs 1",
            ));
        }
        let init = match start {
            Start::Random => InitTree::Random,
            Start::Tree(t) => InitTree::Fixed(t),
        };
        let report = multi_run(w, cfg, args.runs, &init)?;
        return write_json(&report, args.report.as_deref());
    }

    let tree = match start {
        Start::Random => HcTree::random(w.n(), init_tree_seed(args.seed))?,
        Start::Tree(t) => t,
    };
    let mut log = match &args.log {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::write(path, e))?;
            let mut out = BufWriter::new(file);
            writeln!(out, "{}", StepRecord::CSV_HEADER).map_err(|e| CliError::write(path, e))?;
            Some((path, out))
        }
        None => None,
    };
    let mut log_error = None;
    let (end, report) = search_logged(tree, w, cfg, |record| {
        if let Some((_, out)) = log.as_mut() {
            if log_error.is_none() {
                log_error = writeln!(out, "{}", record.to_csv_line()).err();
            }
        }
    })?;
    if let Some((path, mut out)) = log {
        if let Some(e) = log_error {
            return Err(CliError::write(path, e));
        }
        out.flush().map_err(|e| CliError::write(path, e))?;
    }
    if let Some(path) = &args.output {
        write_tree(&end, path)?;
    }
    write_json(&report, args.report.as_deref())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub sim: PathBuf,
    /// Tree file or inline tree text.
    #[arg(long)]
    pub tree: String,
    /// Aligned text instead of JSON.
    #[arg(long)]
    pub human: bool,
}

const DUALITY_TOLERANCE: f64 = 1e-9;

fn load_pair(sim: &Path, tree: &str) -> CliResult<(SimilarityMatrix, HcTree)> {
    let w = read_matrix(sim)?;
    let t = tree_arg(tree)?;
    if t.n() != w.n() {
        return Err(HcError::SizeMismatch {
            tree: t.n(),
            matrix: w.n(),
        }
        .into());
    }
    Ok((w, t))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), |v| format!("{v}"))
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let (w, t) = load_pair(&args.sim, &args.tree)?;
    let s = score(&t, &w)?;
    let duality_ok = s.duality_ok(DUALITY_TOLERANCE);
    if args.human {
        println!("n           {}", s.n);
        println!("revenue     {}", s.revenue);
        println!("cost        {}", s.cost);
        println!("normalized  {}", fmt_opt(s.normalized_revenue));
        println!("duality     {}", if duality_ok { "ok" } else { "VIOLATED" });
        return Ok(());
    }
    write_json(
        &json!({
            "n": s.n,
            "total_weight": s.total_weight,
            "revenue": s.revenue,
            "cost": s.cost,
            "normalized": s.normalized_revenue,
            "duality_ok": duality_ok,
        }),
        None,
    )
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub sim: PathBuf,
    /// Tree file or inline tree text.
    #[arg(long)]
    pub tree: String,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long)]
    pub human: bool,
}

pub fn check(args: &CheckArgs) -> CliResult<()> {
    if args.tolerance.is_nan() || args.tolerance < 0.0 {
        return Err(CliError::usage("--tolerance must be nonnegative"));
    }
    let (w, t) = load_pair(&args.sim, &args.tree)?;
    let table = WMatrix::build(&t, &w)?;
    let cert = certify(&t, &table, args.tolerance);
    let normalized = score(&t, &w)?.normalized_revenue;
    let margin = normalized.map(|r| r - 1.0 / 3.0);
    if args.human {
        println!(
            "locally optimal  {} ({} edges checked)",
            if cert.locally_optimal { "yes" } else { "no" },
            cert.edges_checked
        );
        println!("normalized       {}", fmt_opt(normalized));
        println!("margin over 1/3  {}", fmt_opt(margin));
        for v in &cert.violations {
            println!(
                "  improvable at x={} y={} {:?}: gain {}",
                v.x, v.y, v.variant, v.slack
            );
        }
        return Ok(());
    }
    write_json(
        &json!({
            "locally_optimal": cert.locally_optimal,
            "edges_checked": cert.edges_checked,
            "violations": cert.violations,
            "normalized": normalized,
            "margin": margin,
        }),
        None,
    )
}

/// Brute-force helpers for small instances.
#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// List every tree on n leaves.
    Enumerate {
        #[arg(long)]
        n: usize,
    },
    /// Exhaustive revenue maximum.
    Optimum {
        #[arg(long)]
        sim: PathBuf,
    },
    /// Interchange distance between two trees (text or files).
    Idist { a: String, b: String },
}

pub fn oracle_cmd(cmd: &OracleCommand) -> CliResult<()> {
    match cmd {
        OracleCommand::Enumerate { n } => {
            let space = oracle::enumerate_trees(*n)?;
            let stdout = std::io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            for text in &space.trees {
                writeln!(out, "{text}").map_err(|e| CliError::write("<stdout>", e))?;
            }
            out.flush().map_err(|e| CliError::write("<stdout>", e))
        }
        OracleCommand::Optimum { sim } => {
            let w = read_matrix(sim)?;
            let (tree, revenue) = oracle::exact_optimum(&w)?;
            let normalized = score(&tree, &w)?.normalized_revenue;
            write_json(
                &json!({
                    "tree": tree.to_canonical(),
                    "revenue": revenue,
                    "normalized": normalized,
                }),
                None,
            )
        }
        OracleCommand::Idist { a, b } => {
            let d = oracle::idist_exact(&tree_arg(a)?, &tree_arg(b)?)?;
            write_json(&json!({ "distance": d }), None)
        }
    }
}
