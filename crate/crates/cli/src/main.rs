//! `phylomarkov` command-line front end.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use phylomarkov::analysis::{self, InfluenceBudget, NullEnsemble, Pipeline, Reduction};
use phylomarkov::distance::{distance_matrix, DistanceMatrix, Metric};
use phylomarkov::invariants::{edge_invariants, edge_invariants_exact, Aggregation};
use phylomarkov::markov::{
    empirical_tensor, ml_fit, pattern_tensor, simulate, FitConfig, GmmParams, DEFAULT_TENSOR_CAP,
};
use phylomarkov::matrix::{load_matrix, restrict_complete, CharacterMatrix, CompletenessPolicy};
use phylomarkov::reconstruct::{tree_from_distances, Method};
use phylomarkov::report::{self, real};
use phylomarkov::tree::{parse_newick, robinson_foulds, PhyloTree, RootAt, Split};
use serde::Serialize;
use sha2::{Digest, Sha256};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Global options that never change results and stay out of the config hash.
const PLUMBING: [&str; 3] = ["out", "threads", "config"];

#[derive(Parser, Serialize)]
#[command(
    name = "phylomarkov",
    version,
    about = "Tree reconstruction and Markov-model fit tests for binary character data"
)]
struct Cli {
    /// File of `key = value` defaults; flags on the command line take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Cmd {
    /// Pairwise distance matrix.
    Dist(DistArgs),
    /// Reconstruct a tree.
    Tree(TreeArgs),
    /// Fit a two-state Markov model on a fixed rooted topology.
    Mlfit(MlfitArgs),
    /// Simulate characters from a model.
    Simulate(SimulateArgs),
    /// Flattening-minor invariants of data or a model against trees.
    Invariants(InvariantArgs),
    /// z-scores of distances, splits or triples against a simulated null.
    Zscores(ZscoreArgs),
    /// Influence of cells on the reconstructed tree.
    Influence(InfluenceArgs),
    /// Topology frequencies under feature subsampling.
    Robustness(RobustnessArgs),
    /// Robinson–Foulds distance between two trees.
    Rf(RfArgs),
    /// Bipartition support across null-model reconstructions.
    Support(SupportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Serialize)]
struct DataArgs {
    /// Character matrix (.csv; .tsv or .tab for tab-separated).
    #[arg(long)]
    data: PathBuf,
    /// Taxon subset, one name per line.
    #[arg(long)]
    taxa: Option<PathBuf>,
    /// global | pairwise
    #[arg(long, default_value = "global")]
    policy: String,
}

#[derive(Args, Serialize)]
struct PipelineArgs {
    /// logdet | jaccard | lp | l<p>
    #[arg(long, default_value = "logdet")]
    metric: String,
    /// nj | upgma | covariance
    #[arg(long, default_value = "nj")]
    method: String,
}

#[derive(Args, Serialize)]
struct DistArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "logdet")]
    metric: String,
}

#[derive(Args, Serialize)]
struct TreeArgs {
    #[arg(long, conflicts_with = "distances")]
    data: Option<PathBuf>,
    /// Distance matrix CSV instead of characters.
    #[arg(long)]
    distances: Option<PathBuf>,
    #[arg(long)]
    taxa: Option<PathBuf>,
    #[arg(long, default_value = "global")]
    policy: String,
    #[command(flatten)]
    #[serde(flatten)]
    pipeline: PipelineArgs,
    /// Re-root at a leaf or at the clade `A,B,...`.
    #[arg(long)]
    reroot: Option<String>,
}

#[derive(Args, Serialize)]
struct MlfitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Newick topology; must be rooted and binary unless --root is given.
    #[arg(long)]
    tree: PathBuf,
    /// Root the topology at a leaf or clade first.
    #[arg(long)]
    root: Option<String>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 5000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Model file written by `mlfit`.
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    sites: usize,
}

#[derive(Args, Serialize)]
struct InvariantArgs {
    /// Candidate topology; repeat for several.
    #[arg(long = "tree", required = true)]
    trees: Vec<PathBuf>,
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    data: Option<PathBuf>,
    /// Use the model's exact pattern distribution.
    #[arg(long)]
    params: Option<PathBuf>,
    /// per-edge-max | per-edge-sum | global-sum
    #[arg(long, default_value = "per-edge-max")]
    aggregation: String,
    /// Also report exact rationals from the counts (data only).
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Serialize)]
struct NullArgs {
    /// Fitted null model.
    #[arg(long)]
    params: PathBuf,
    /// Sites per null trial (default: the observed complete feature count).
    #[arg(long)]
    sites_per_trial: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    total_sites: usize,
}

#[derive(Args, Serialize)]
struct ZscoreArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    null: NullArgs,
    /// pairs | splits | triples
    #[arg(long, default_value = "pairs")]
    kind: String,
    /// Partition `A,B|C,D,...` (splits); default: the model tree's splits.
    #[arg(long = "partition")]
    partitions: Vec<String>,
    /// Triple `A,B,C` (triples); default: every triple.
    #[arg(long = "triple")]
    triples: Vec<String>,
    #[arg(long, default_value_t = 100)]
    orderings: usize,
    /// mean | sum
    #[arg(long, default_value = "mean")]
    reduction: String,
}

#[derive(Args, Serialize)]
struct InfluenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Single cell; needs --feature as well.
    #[arg(long, requires = "feature")]
    taxon: Option<String>,
    #[arg(long, requires = "taxon")]
    feature: Option<String>,
    /// Enumerate exactly up to this many noise sets.
    #[arg(long, default_value_t = 1_000_000)]
    max_exact: u128,
    /// Monte Carlo draws above the exact limit.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
}

#[derive(Args, Serialize)]
struct RobustnessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 0.6)]
    fraction: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(Args, Serialize)]
struct RfArgs {
    first: PathBuf,
    second: PathBuf,
}

#[derive(Args, Serialize)]
struct SupportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    null: NullArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pipeline: PipelineArgs,
    /// Target split `A,B|C,D,...`; repeat for several.
    #[arg(long = "split", required = true)]
    splits: Vec<String>,
    /// Observed data, only to size the trials.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ReplayArgs {
    manifest: PathBuf,
}

/// Usage problems found after parsing; exit code 2 like clap's own.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(clap_err) = e.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return ExitCode::from(clap_err.exit_code() as u8);
            }
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(argv: Vec<OsString>) -> Result<()> {
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| {
            a.into_string()
                .map_err(|a| usage(format!("argument is not UTF-8: {a:?}")))
        })
        .collect::<Result<_>>()?;
    let merged = merge_config(&argv)?;
    let cli = Cli::try_parse_from(&merged)?;
    if let Some(n) = cli.threads {
        // Fails only if a pool already exists, as when replaying.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Cmd::Replay(r) = &cli.command {
        return replay(&r.manifest, &merged);
    }
    let mut out = Output::new(&cli, recorded_args(&merged))?;
    dispatch(&cli, &mut out)?;
    out.finish()
}

/// Position of the subcommand in `argv`, skipping global options and their values.
fn subcommand_index(argv: &[String]) -> Option<usize> {
    let names: BTreeSet<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if names.contains(a) {
            return Some(i);
        }
        let takes_value = ["--config", "--seed", "--out", "--threads"].contains(&a.as_str());
        i += if takes_value { 2 } else { 1 };
    }
    None
}

fn config_path(argv: &[String]) -> Option<String> {
    argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

/// Expand a `--config` file into flags placed before the user's own, dropping
/// any key the user also gave.
fn merge_config(argv: &[String]) -> Result<Vec<String>> {
    let Some(path) = config_path(argv) else {
        return Ok(argv.to_vec());
    };
    let Some(sub) = subcommand_index(argv) else {
        return Ok(argv.to_vec());
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let root = Cli::command();
    let cmd = root
        .find_subcommand(&argv[sub])
        .expect("index came from the subcommand list");
    let given: BTreeSet<String> = argv
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut injected = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{path}:{}: expected key = value", n + 1)))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if given.contains(&key) {
            continue;
        }
        let arg = cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| usage(format!("{path}:{}: unknown key `{key}` for `{}`", n + 1, argv[sub])))?;
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}"));
            injected.push(value.to_string());
        } else if value
            .parse::<bool>()
            .map_err(|_| usage(format!("{path}:{}: `{key}` takes true or false", n + 1)))?
        {
            injected.push(format!("--{key}"));
        }
    }
    let mut merged = vec![argv[0].clone(), argv[sub].clone()];
    merged.extend(injected);
    merged.extend(
        argv[1..]
            .iter()
            .enumerate()
            .filter(|(i, _)| i + 1 != sub)
            .map(|(_, a)| a.clone()),
    );
    Ok(merged)
}

/// The resolved arguments minus plumbing options, as stored in the manifest.
fn recorded_args(merged: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in &merged[1..] {
        if skip {
            skip = false;
            continue;
        }
        let name = a.strip_prefix("--").map(|s| s.split('=').next().unwrap_or(s));
        if name.is_some_and(|n| PLUMBING.contains(&n)) {
            skip = !a.contains('=');
            continue;
        }
        out.push(a.clone());
    }
    out
}

fn replay(manifest: &Path, merged: &[String]) -> Result<()> {
    let text = std::fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let json: serde_json::Value = serde_json::from_str(&text).context("manifest is not JSON")?;
    let args: Vec<String> = serde_json::from_value(json["args"].clone()).context("manifest has no `args` list")?;
    let mut argv = vec![merged[0].clone()];
    argv.extend(args);
    // Plumbing options given to `replay` carry over.
    let mut i = 1;
    while i < merged.len() {
        let a = &merged[i];
        if ["--out", "--threads"].contains(&a.as_str()) && i + 1 < merged.len() {
            argv.push(a.clone());
            argv.push(merged[i + 1].clone());
            i += 1;
        } else if a.starts_with("--out=") || a.starts_with("--threads=") {
            argv.push(a.clone());
        }
        i += 1;
    }
    run(argv.into_iter().map(OsString::from).collect())
}

/// Collects output files, stamps them, and writes the manifest.
struct Output {
    dir: PathBuf,
    command: String,
    args: Vec<String>,
    config: serde_json::Value,
    hash: String,
    seed: u64,
    files: Vec<(String, String)>,
}

impl Output {
    fn new(cli: &Cli, args: Vec<String>) -> Result<Self> {
        let config = serde_json::to_value(cli)?;
        let hash = hex::encode(Sha256::digest(config.to_string().as_bytes()));
        let command = config
            .get("command")
            .and_then(|c| c.as_object())
            .and_then(|c| c.keys().next().cloned())
            .unwrap_or_default();
        Ok(Output {
            dir: cli.out.clone(),
            command,
            args,
            config,
            hash,
            seed: cli.seed,
            files: Vec::new(),
        })
    }

    fn stamp(&self) -> String {
        format!("phylomarkov {VERSION} config={} seed={}", &self.hash[..16], self.seed)
    }

    fn write_file(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.files
            .push((name.to_string(), hex::encode(Sha256::digest(body.as_bytes()))));
        Ok(())
    }

    /// Table with a `#` header line.
    fn table(&mut self, name: &str, body: &str) -> Result<()> {
        self.write_file(name, &format!("# {}\n{body}", self.stamp()))
    }

    /// Newick with the header as a bracket comment.
    fn newick(&mut self, name: &str, tree: &PhyloTree) -> Result<()> {
        self.write_file(name, &format!("[{}]\n{}\n", self.stamp(), tree.to_newick()))
    }

    fn finish(self) -> Result<()> {
        let files: Vec<serde_json::Value> = self
            .files
            .iter()
            .map(|(f, h)| serde_json::json!({ "file": f, "sha256": h }))
            .collect();
        let manifest = serde_json::json!({
            "tool": "phylomarkov",
            "version": VERSION,
            "command": self.command,
            "args": self.args,
            "config": self.config,
            "config_hash": self.hash,
            "seed": self.seed,
            "outputs": files,
        });
        let path = self.dir.join("manifest.json");
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}

fn dispatch(cli: &Cli, out: &mut Output) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Cmd::Dist(a) => cmd_dist(a, out),
        Cmd::Tree(a) => cmd_tree(a, out),
        Cmd::Mlfit(a) => cmd_mlfit(a, seed, out),
        Cmd::Simulate(a) => cmd_simulate(a, seed, out),
        Cmd::Invariants(a) => cmd_invariants(a, out),
        Cmd::Zscores(a) => cmd_zscores(a, seed, out),
        Cmd::Influence(a) => cmd_influence(a, seed, out),
        Cmd::Robustness(a) => cmd_robustness(a, seed, out),
        Cmd::Rf(a) => cmd_rf(a, out),
        Cmd::Support(a) => cmd_support(a, seed, out),
        Cmd::Replay(_) => unreachable!("handled before dispatch"),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_taxa(path: &Path) -> Result<Vec<String>> {
    let taxa: Vec<String> = read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    if taxa.is_empty() {
        return Err(usage(format!("taxa file {} lists no taxa", path.display())));
    }
    Ok(taxa)
}

fn parse_or_usage<T: std::str::FromStr<Err = phylomarkov::Error>>(s: &str) -> Result<T> {
    s.parse().map_err(|e: phylomarkov::Error| usage(e.to_string()))
}

fn load(path: &Path) -> Result<CharacterMatrix> {
    Ok(load_matrix(path)?)
}

/// Matrix and taxon list from data arguments.
fn load_data(a: &DataArgs) -> Result<(CharacterMatrix, Vec<String>, CompletenessPolicy)> {
    let m = load(&a.data)?;
    let taxa = match &a.taxa {
        Some(p) => read_taxa(p)?,
        None => m.taxa().to_vec(),
    };
    Ok((m, taxa, parse_or_usage(&a.policy)?))
}

fn pipeline(p: &PipelineArgs, policy: CompletenessPolicy) -> Result<Pipeline> {
    Ok(Pipeline {
        metric: parse_or_usage::<Metric>(&p.metric)?,
        method: parse_or_usage::<Method>(&p.method)?,
        policy,
    })
}

fn parse_tree(path: &Path) -> Result<PhyloTree> {
    parse_newick(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn root_at(spec: &str) -> RootAt {
    if spec.contains(',') {
        RootAt::Clade(spec.split(',').map(|s| s.trim().to_string()).collect())
    } else {
        RootAt::Leaf(spec.trim().to_string())
    }
}

fn cmd_dist(a: &DistArgs, out: &mut Output) -> Result<()> {
    let (m, taxa, policy) = load_data(&a.data)?;
    let d = distance_matrix(&m, &taxa, parse_or_usage(&a.metric)?, policy)?;
    if let Some((x, y)) = d.first_non_finite() {
        bail!("distance between {x} and {y} is not finite");
    }
    out.table("distances.csv", &d.to_csv_string())
}

fn cmd_tree(a: &TreeArgs, out: &mut Output) -> Result<()> {
    let method: Method = parse_or_usage(&a.pipeline.method)?;
    let policy: CompletenessPolicy = parse_or_usage(&a.policy)?;
    let tree = match (&a.data, &a.distances) {
        (Some(data), None) => {
            let m = load(data)?;
            let taxa = match &a.taxa {
                Some(p) => read_taxa(p)?,
                None => m.taxa().to_vec(),
            };
            let p = pipeline(&a.pipeline, policy)?;
            phylomarkov::reconstruct::reconstruct(&m, &taxa, p.metric, method, policy)?
        }
        (None, Some(dist)) => {
            if method == Method::Covariance {
                return Err(usage("the covariance method needs --data"));
            }
            let mut d = DistanceMatrix::parse_csv(&read(dist)?)?;
            if let Some(p) = &a.taxa {
                d = d.select(&read_taxa(p)?)?;
            }
            tree_from_distances(&d, method)?
        }
        _ => return Err(usage("give exactly one of --data or --distances")),
    };
    let tree = match &a.reroot {
        Some(r) => tree.reroot(&root_at(r))?,
        None => tree,
    };
    println!("{}", tree.topology_newick());
    out.newick("tree.nwk", &tree)
}

fn cmd_mlfit(a: &MlfitArgs, seed: u64, out: &mut Output) -> Result<()> {
    let m = load(&a.data)?;
    let mut tree = parse_tree(&a.tree)?;
    if let Some(r) = &a.root {
        tree = tree.reroot(&root_at(r))?;
    }
    let leaves = tree.leaf_labels();
    let w = restrict_complete(&m, &leaves)?;
    let cfg = FitConfig {
        step: a.step,
        iterations: a.iterations,
        restarts: a.restarts,
        tolerance: a.tolerance,
        seed,
        ..FitConfig::default()
    };
    let fit = ml_fit(&tree.strip_lengths(), &w, &cfg)?;
    let mut csv = String::from("restart,initial_log_likelihood,final_log_likelihood,iterations,converged\n");
    for r in &fit.restarts {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.index,
            real(r.initial_log_likelihood),
            real(r.final_log_likelihood),
            r.iterations,
            r.converged
        );
    }
    println!(
        "log-likelihood {} over {} sites; gradient {:.2e}{}",
        real(fit.log_likelihood),
        w.n_features(),
        fit.gradient_norm,
        if fit.converged { "" } else { " (iteration cap reached)" }
    );
    out.write_file("params.gmm", &format!("# {}\n{}", out.stamp(), fit.params.to_text()))?;
    out.table("fit.csv", &csv)
}

fn load_params(path: &Path) -> Result<GmmParams> {
    GmmParams::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_simulate(a: &SimulateArgs, seed: u64, out: &mut Output) -> Result<()> {
    let p = load_params(&a.params)?;
    let m = simulate(&p, a.sites, seed)?;
    out.table("simulated.csv", &m.to_csv_string(false))
}

fn cmd_invariants(a: &InvariantArgs, out: &mut Output) -> Result<()> {
    let how: Aggregation = parse_or_usage(&a.aggregation)?;
    if a.exact && a.data.is_none() {
        return Err(usage("--exact needs --data"));
    }
    let mut summary = String::from("tree,phi_l1,phi_linf");
    if a.exact {
        summary.push_str(",phi_l1_exact,phi_linf_exact");
    }
    summary.push('\n');
    let mut edges = String::from("tree,split,l1,linf,rank2_distance\n");
    let model = a.params.as_deref().map(load_params).transpose()?;
    let data = a.data.as_deref().map(load).transpose()?;
    for path in &a.trees {
        let tree = parse_tree(path)?;
        let leaves = tree.leaf_labels();
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tree");
        let tensor = match (&model, &data) {
            (Some(p), _) => pattern_tensor(p, DEFAULT_TENSOR_CAP)?,
            (None, Some(m)) => empirical_tensor(&restrict_complete(m, &leaves)?, &leaves)?,
            (None, None) => unreachable!("clap requires one"),
        };
        let norms = edge_invariants(&tensor, &tree, how)?;
        let _ = write!(summary, "{name},{:.12},{:.12}", norms.phi_l1, norms.phi_linf);
        if a.exact {
            let (l1, linf) = edge_invariants_exact(&tensor, &tree, how)?;
            let _ = write!(summary, ",{l1},{linf}");
        }
        summary.push('\n');
        for e in &norms.edges {
            let _ = writeln!(
                edges,
                "{name},\"{}\",{:.12},{:.12},{:.12}",
                e.split, e.l1, e.linf, e.rank_distance
            );
        }
    }
    print!("{summary}");
    out.table("invariants.csv", &summary)?;
    out.table("invariant_edges.csv", &edges)
}

fn null_ensemble(a: &NullArgs, observed: Option<&CharacterMatrix>, seed: u64) -> Result<NullEnsemble> {
    let p = load_params(&a.params)?;
    let per_trial = match (a.sites_per_trial, observed) {
        (Some(n), _) => n,
        (None, Some(m)) => restrict_complete(m, p.leaf_names())?.n_features(),
        (None, None) => return Err(usage("give --sites-per-trial or --data")),
    };
    Ok(NullEnsemble::generate(&p, per_trial, a.total_sites, seed)?)
}

fn parse_split(s: &str) -> Result<Split> {
    Split::parse(s).map_err(|e| usage(format!("bad split `{s}`: {e}")))
}

fn cmd_zscores(a: &ZscoreArgs, seed: u64, out: &mut Output) -> Result<()> {
    let m = load(&a.data)?;
    let null = null_ensemble(&a.null, Some(&m), seed)?;
    let leaves = null.params.leaf_names().to_vec();
    let w = restrict_complete(&m, &leaves)?;
    match a.kind.as_str() {
        "pairs" => {
            let d = distance_matrix(&w, &leaves, Metric::Logdet, CompletenessPolicy::GlobalComplete)?;
            out.table(
                "zscores.csv",
                &report::pair_zscores_csv(&analysis::pairwise_zscores(&d, &null)?),
            )
        }
        "splits" => {
            let parts = if a.partitions.is_empty() {
                null.params.tree().splits().into_iter().collect()
            } else {
                a.partitions
                    .iter()
                    .map(|s| parse_split(s))
                    .collect::<Result<Vec<_>>>()?
            };
            out.table(
                "zscores.csv",
                &report::labelled_zscores_csv(&analysis::split_zscores(&w, &parts, &null)?),
            )
        }
        "triples" => {
            let triples: Vec<[String; 3]> = if a.triples.is_empty() {
                let n = leaves.len();
                (0..n)
                    .flat_map(|i| (i + 1..n).flat_map(move |j| (j + 1..n).map(move |k| (i, j, k))))
                    .map(|(i, j, k)| [leaves[i].clone(), leaves[j].clone(), leaves[k].clone()])
                    .collect()
            } else {
                a.triples
                    .iter()
                    .map(|t| {
                        let v: Vec<String> = t.split(',').map(|s| s.trim().to_string()).collect();
                        <[String; 3]>::try_from(v).map_err(|_| usage(format!("triple `{t}` needs three names")))
                    })
                    .collect::<Result<_>>()?
            };
            let reduction: Reduction = parse_or_usage(&a.reduction)?;
            let rows = analysis::triple_zscores(&w, &triples, &null, a.orderings, seed, reduction)?;
            out.table("zscores.csv", &report::labelled_zscores_csv(&rows))
        }
        other => Err(usage(format!("unknown kind `{other}` (pairs, splits, triples)"))),
    }
}

fn cmd_influence(a: &InfluenceArgs, seed: u64, out: &mut Output) -> Result<()> {
    let (m, taxa, policy) = load_data(&a.data)?;
    let m = m.select_taxa(&taxa)?;
    let p = pipeline(&a.pipeline, policy)?;
    let budget = InfluenceBudget {
        max_exact: a.max_exact,
        samples: a.samples,
        seed,
    };
    if let (Some(t), Some(f)) = (&a.taxon, &a.feature) {
        let r = analysis::influence(&m, t, f, a.k, p, &budget)?;
        let se = r.std_error.map(real).unwrap_or_default();
        let row = format!("{},{},{},{},{}", t, f, real(r.value), se, r.admissible_sets);
        println!("{row}");
        return out.table(
            "influence.csv",
            &format!("taxon,feature,influence,std_error,admissible_sets\n{row}\n"),
        );
    }
    let table = analysis::influence_table(&m, a.k, p, &budget)?;
    let sampled = table.iter().flatten().flatten().any(|r| r.std_error.is_some());
    out.table("influence.csv", &report::influence_csv(&m, &table))?;
    if sampled {
        let se: Vec<Vec<_>> = table
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| {
                        c.as_ref().map(|r| analysis::InfluenceResult {
                            value: r.std_error.unwrap_or(0.0),
                            ..r.clone()
                        })
                    })
                    .collect()
            })
            .collect();
        out.table("influence_std_error.csv", &report::influence_csv(&m, &se))?;
    }
    Ok(())
}

fn cmd_robustness(a: &RobustnessArgs, seed: u64, out: &mut Output) -> Result<()> {
    let (m, taxa, policy) = load_data(&a.data)?;
    let p = pipeline(&a.pipeline, policy)?;
    let r = analysis::robustness(&m, &taxa, a.fraction, a.trials, p, seed)?;
    if let Some((top, f)) = r.modal() {
        println!("{top} {}", real(f));
    }
    out.table("robustness.csv", &report::robustness_csv(&r))
}

fn cmd_rf(a: &RfArgs, out: &mut Output) -> Result<()> {
    let (rf, norm) = robinson_foulds(&parse_tree(&a.first)?, &parse_tree(&a.second)?)?;
    let row = report::rf_row(rf, norm);
    println!("{row}");
    out.table("rf.csv", &format!("rf,rf_normalized\n{row}\n"))
}

fn cmd_support(a: &SupportArgs, seed: u64, out: &mut Output) -> Result<()> {
    let observed = a.data.as_deref().map(load).transpose()?;
    let null = null_ensemble(&a.null, observed.as_ref(), seed)?;
    let p = pipeline(&a.pipeline, CompletenessPolicy::GlobalComplete)?;
    let targets = a.splits.iter().map(|s| parse_split(s)).collect::<Result<Vec<_>>>()?;
    let r = analysis::bipartition_support(&null, p, &targets)?;
    if r.n_valid == 0 {
        return Err(anyhow!("every null trial failed to reconstruct"));
    }
    out.table("support.csv", &report::support_csv(&r))
}
