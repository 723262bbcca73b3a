//! Table-reproduction harness driven by a TOML config.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use hclocal::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::{read_dataset, write_text};
use crate::error::{CliError, CliResult};

pub const RECORDS_FILE: &str = "records.csv";
pub const SEARCH_TABLE_FILE: &str = "search_comparison.md";
pub const POST_TABLE_FILE: &str = "post_processing.md";
pub const SUMMARY_FILE: &str = "summary.json";
const INDICATIVE: &str = "indicative only";

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// TOML config; relative paths inside it resolve against its directory.
    pub config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Base seed used when the config does not set one.
    #[arg(long, env = "HC_SEED")]
    pub seed: Option<u64>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default = "default_runs")]
    runs: usize,
    seed: Option<u64>,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default)]
    kernel: RawKernel,
    #[serde(default)]
    variants: Vec<String>,
    #[serde(default)]
    baselines: Vec<String>,
    #[serde(default)]
    post_process: Vec<String>,
    #[serde(default)]
    datasets: Vec<RawDataset>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    #[serde(default = "default_sigma")]
    sigma: SigmaSetting,
}

impl Default for RawKernel {
    fn default() -> Self {
        RawKernel {
            sigma: default_sigma(),
        }
    }
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum SigmaSetting {
    Value(f64),
    Name(String),
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: String,
    path: PathBuf,
    label_column: Option<usize>,
    #[serde(default)]
    drop_columns: Vec<usize>,
    #[serde(default = "default_header")]
    header: bool,
    delimiter: Option<char>,
    #[serde(default)]
    indicative: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("bench-out")
}

fn default_runs() -> usize {
    10
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_sigma() -> SigmaSetting {
    SigmaSetting::Name("auto".into())
}

fn default_header() -> bool {
    true
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    pub options: LoadOptions,
    pub indicative: bool,
}

/// A validated bench configuration.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub output_dir: PathBuf,
    pub runs: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub sigma: Sigma,
    pub variants: Vec<Variant>,
    pub baselines: Vec<LinkageKind>,
    pub post_process: Vec<LinkageKind>,
    pub datasets: Vec<DatasetSpec>,
    /// SHA-256 of the config file bytes.
    pub hash: String,
}

impl BenchConfig {
    pub fn load(path: &Path, fallback_seed: Option<u64>) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::parse(&text, &base, fallback_seed).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(
        text: &str,
        base: &Path,
        fallback_seed: Option<u64>,
    ) -> std::result::Result<Self, String> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| e.message().to_string())?;
        if raw.datasets.is_empty() {
            return Err("the dataset list is empty".into());
        }
        if raw.runs == 0 {
            return Err("runs must be at least 1".into());
        }
        if !(raw.tolerance >= 0.0 && raw.tolerance.is_finite()) {
            return Err("tolerance must be a finite nonnegative number".into());
        }
        let sigma = match &raw.kernel.sigma {
            SigmaSetting::Value(v) => Sigma::Explicit(*v),
            SigmaSetting::Name(s) => s.parse::<Sigma>().map_err(|e| e.to_string())?,
        };
        if let Sigma::Explicit(v) = sigma {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("sigma must be positive, got {v}"));
            }
        }
        let variants = parse_all::<Variant>(&raw.variants)?;
        let baselines = parse_all::<LinkageKind>(&raw.baselines)?;
        let post_process = parse_all::<LinkageKind>(&raw.post_process)?;
        if variants.is_empty() && baselines.is_empty() && post_process.is_empty() {
            return Err("nothing to run: set variants, baselines or post_process".into());
        }

        let mut names = BTreeSet::new();
        let mut datasets = Vec::with_capacity(raw.datasets.len());
        for d in raw.datasets {
            if d.name.trim().is_empty() {
                return Err("dataset names must be nonempty".into());
            }
            if !names.insert(d.name.clone()) {
                return Err(format!("dataset {:?} is listed twice", d.name));
            }
            let path = base.join(&d.path);
            if !path.is_file() {
                return Err(format!(
                    "dataset {:?}: file {} does not exist",
                    d.name,
                    path.display()
                ));
            }
            let delimiter = match d.delimiter {
                None => None,
                Some(c) if c.is_ascii() => Some(c as u8),
                Some(c) => {
                    return Err(format!(
                        "dataset {:?}: delimiter {c:?} is not ASCII",
                        d.name
                    ))
                }
            };
            datasets.push(DatasetSpec {
                name: d.name,
                path,
                options: LoadOptions {
                    delimiter,
                    has_header: d.header,
                    label_column: d.label_column,
                    drop_columns: d.drop_columns,
                },
                indicative: d.indicative,
            });
        }

        Ok(BenchConfig {
            output_dir: base.join(raw.output_dir),
            runs: raw.runs,
            seed: raw.seed.or(fallback_seed).unwrap_or(0),
            tolerance: raw.tolerance,
            sigma,
            variants,
            baselines,
            post_process,
            datasets,
            hash: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }
}

fn parse_all<T: std::str::FromStr>(names: &[String]) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let mut out: Vec<T> = Vec::with_capacity(names.len());
    for name in names {
        out.push(name.parse().map_err(|e: T::Err| e.to_string())?);
    }
    Ok(out)
}

/// One cell sample: a single run of one method on one dataset.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub normalized: f64,
    /// Normalized revenue of the starting tree, for post-processing runs.
    pub initial_normalized: Option<f64>,
    pub steps: u64,
    pub wall_time_secs: f64,
    pub n: usize,
    pub sigma: f64,
    pub tolerance: f64,
    pub config_hash: String,
    pub indicative: bool,
}

fn post_method(kind: LinkageKind) -> String {
    format!("{kind}+greedy")
}

fn checked(value: Option<f64>, what: &str) -> CliResult<f64> {
    match value {
        Some(v) if (-1e-12..=1.0 + 1e-12).contains(&v) => Ok(v),
        Some(v) => {
            Err(HcError::Invariant(format!("{what}: normalized revenue {v} outside [0, 1]")).into())
        }
        None => Err(CliError::usage(format!(
            "{what}: normalized revenue is undefined (needs at least 3 points)"
        ))),
    }
}

/// Runs every configured cell on one dataset.
fn run_dataset(cfg: &BenchConfig, spec: &DatasetSpec) -> CliResult<(Vec<RunRecord>, f64)> {
    let data = read_dataset(&spec.path, &spec.options)?;
    let kernel = gaussian_similarity(&data, cfg.sigma)?;
    let w = &kernel.matrix;
    let record = |method: String,
                  seed: u64,
                  normalized: f64,
                  initial: Option<f64>,
                  steps: u64,
                  wall: f64| RunRecord {
        dataset: spec.name.clone(),
        method,
        seed,
        normalized,
        initial_normalized: initial,
        steps,
        wall_time_secs: wall,
        n: w.n(),
        sigma: kernel.sigma,
        tolerance: cfg.tolerance,
        config_hash: cfg.hash.clone(),
        indicative: spec.indicative,
    };
    let mut records = Vec::new();

    for &kind in &cfg.baselines {
        let clock = Instant::now();
        let tree = build_linkage(kind, w, Some(&data))?;
        let wall = clock.elapsed().as_secs_f64();
        let r = checked(score(&tree, w)?.normalized_revenue, &spec.name)?;
        records.push(record(kind.to_string(), cfg.seed, r, None, 0, wall));
    }

    for &variant in &cfg.variants {
        let search_cfg = SearchConfig {
            variant,
            seed: cfg.seed,
            max_steps: None,
            tolerance: cfg.tolerance,
            log_every: None,
        };
        let report = multi_run(w, &search_cfg, cfg.runs, &InitTree::Random)?;
        for run in report.runs {
            let r = checked(run.final_normalized, &spec.name)?;
            records.push(record(
                variant.to_string(),
                run.seed,
                r,
                run.initial_normalized,
                run.steps,
                run.wall_time_secs,
            ));
        }
    }

    for &kind in &cfg.post_process {
        let clock = Instant::now();
        let start = build_linkage(kind, w, Some(&data))?;
        let search_cfg = SearchConfig {
            tolerance: cfg.tolerance,
            ..SearchConfig::greedy()
        };
        let (_, report) = search(start, w, &search_cfg)?;
        let wall = clock.elapsed().as_secs_f64();
        let r = checked(report.final_normalized, &spec.name)?;
        records.push(record(
            post_method(kind),
            cfg.seed,
            r,
            report.initial_normalized,
            report.steps,
            wall,
        ));
    }
    Ok((records, kernel.sigma))
}

/// Appends records, writing the header only to a new or empty file.
fn append_records(path: &Path, records: &[RunRecord]) -> CliResult<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::write(path, e))?;
    let mut out = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    for r in records {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| CliError::write(path, e))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn cells<'a>(
    records: &'a [RunRecord],
    dataset: &'a str,
    method: &'a str,
) -> impl Iterator<Item = &'a RunRecord> + 'a {
    records
        .iter()
        .filter(move |r| r.dataset == dataset && r.method == method)
}

fn baseline_header(kind: LinkageKind) -> &'static str {
    match kind {
        LinkageKind::Average => "AL",
        LinkageKind::Single => "SL",
        LinkageKind::Complete => "CL",
        LinkageKind::Ward => "Ward",
    }
}

fn variant_header(variant: Variant) -> &'static str {
    match variant {
        Variant::Greedy => "GreedyLS",
        Variant::Random => "RandomLS",
    }
}

fn dataset_cell(spec: &DatasetSpec) -> String {
    if spec.indicative {
        format!("{} ({INDICATIVE})", spec.name)
    } else {
        spec.name.clone()
    }
}

fn dash(x: Option<String>) -> String {
    x.unwrap_or_else(|| "-".into())
}

fn table_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn sigma_label(sigma: Sigma) -> String {
    match sigma {
        Sigma::Auto => "auto".into(),
        Sigma::MeanDistance => "mean".into(),
        Sigma::Explicit(v) => v.to_string(),
    }
}

fn footer(cfg: &BenchConfig) -> String {
    let mut s = format!(
        "\nsigma: {}, tolerance: {:e}, runs: {}, seed: {}, config sha256: {}\n",
        sigma_label(cfg.sigma),
        cfg.tolerance,
        cfg.runs,
        cfg.seed,
        cfg.hash
    );
    if cfg.datasets.iter().any(|d| d.indicative) {
        s.push_str(&format!(
            "\nRows marked \"{INDICATIVE}\" use a stand-in sample and are not comparable cell by cell.\n"
        ));
    }
    s
}

/// Baselines and random-start searches: revenue average, maximum and mean steps.
pub fn render_search_table(cfg: &BenchConfig, records: &[RunRecord]) -> String {
    let mut header = vec!["Dataset".to_string()];
    header.extend(
        cfg.baselines
            .iter()
            .map(|&k| baseline_header(k).to_string()),
    );
    for &v in &cfg.variants {
        let name = variant_header(v);
        header.push(format!("{name} rev\\|avg"));
        header.push(format!("{name} rev\\|max"));
        header.push(format!("{name} inter#"));
    }
    let mut out = table_row(&header);
    out.push_str(&table_row(&vec!["---".to_string(); header.len()]));
    for spec in &cfg.datasets {
        let mut row = vec![dataset_cell(spec)];
        for &k in &cfg.baselines {
            let v = cells(records, &spec.name, k.as_str())
                .map(|r| r.normalized)
                .next();
            row.push(dash(v.map(|v| format!("{v:.4}"))));
        }
        for &variant in &cfg.variants {
            let rs: Vec<&RunRecord> = cells(records, &spec.name, variant.as_str()).collect();
            let avg = mean(rs.iter().map(|r| r.normalized));
            let max = rs.iter().map(|r| r.normalized).reduce(f64::max);
            let steps = mean(rs.iter().map(|r| r.steps as f64));
            row.push(dash(avg.map(|v| format!("{v:.4}"))));
            row.push(dash(max.map(|v| format!("{v:.4}"))));
            row.push(dash(steps.map(|v| format!("{v:.0}"))));
        }
        out.push_str(&table_row(&row));
    }
    out.push_str(&footer(cfg));
    out
}

/// Revenue increase from greedy post-processing of each linkage tree.
pub fn render_post_table(cfg: &BenchConfig, records: &[RunRecord]) -> String {
    let mut header = vec!["Dataset".to_string()];
    for &k in &cfg.post_process {
        header.push(format!("{k} increase (%)"));
        header.push(format!("{k} inter#"));
    }
    let mut out = table_row(&header);
    out.push_str(&table_row(&vec!["---".to_string(); header.len()]));
    for spec in &cfg.datasets {
        let mut row = vec![dataset_cell(spec)];
        for &k in &cfg.post_process {
            let method = post_method(k);
            let r = cells(records, &spec.name, &method).next();
            let pct = r.and_then(|r| {
                r.initial_normalized
                    .filter(|&a| a > 0.0)
                    .map(|a| 100.0 * (r.normalized - a) / a)
            });
            row.push(dash(pct.map(|v| format!("{v:.2}"))));
            row.push(dash(r.map(|r| r.steps.to_string())));
        }
        out.push_str(&table_row(&row));
    }
    out.push_str(&footer(cfg));
    out
}

#[derive(Serialize)]
struct DatasetSummary<'a> {
    name: &'a str,
    n: usize,
    sigma: f64,
    indicative: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: &'a str,
    runs: usize,
    seed: u64,
    tolerance: f64,
    datasets: Vec<DatasetSummary<'a>>,
    records: &'a [RunRecord],
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let mut cfg = BenchConfig::load(&args.config, args.seed)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::write(&cfg.output_dir, e))?;
    let records_path = cfg.output_dir.join(RECORDS_FILE);

    let mut all = Vec::new();
    let mut summaries = Vec::new();
    for spec in &cfg.datasets {
        let (records, sigma) = run_dataset(&cfg, spec)?;
        append_records(&records_path, &records)?;
        summaries.push(DatasetSummary {
            name: &spec.name,
            n: records.first().map_or(0, |r| r.n),
            sigma,
            indicative: spec.indicative,
        });
        eprintln!("{}: {} records", spec.name, records.len());
        all.extend(records);
    }

    let mut written = vec![records_path.clone()];
    if !cfg.baselines.is_empty() || !cfg.variants.is_empty() {
        let path = cfg.output_dir.join(SEARCH_TABLE_FILE);
        write_text(&path, &render_search_table(&cfg, &all))?;
        written.push(path);
    }
    if !cfg.post_process.is_empty() {
        let path = cfg.output_dir.join(POST_TABLE_FILE);
        write_text(&path, &render_post_table(&cfg, &all))?;
        written.push(path);
    }
    let summary_path = cfg.output_dir.join(SUMMARY_FILE);
    let summary = Summary {
        config_hash: &cfg.hash,
        runs: cfg.runs,
        seed: cfg.seed,
        tolerance: cfg.tolerance,
        datasets: summaries,
        records: &all,
    };
    write_text(
        &summary_path,
        &format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )?;
    written.push(summary_path);

    let mut listing = String::new();
    for p in written {
        let _ = writeln!(listing, "{}", p.display());
    }
    print!("{listing}");
    Ok(())
}
