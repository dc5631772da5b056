//! The `gaifman` command line.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::featurizer::{build_dataset, BuildOptions, Dataset, Featurizer, Transform};
use crate::graph::GaifmanGraph;
use crate::kb::{Fact, KnowledgeBase, ObjectId, TripleFormat};
use crate::logic::{default_feature_set, parse_with, FeatureSet, TargetQuery};
use crate::mlp::MlpModel;
use crate::pipeline::{
    bench, evaluate, train_all, write_bench_csv, Candidates, DegreeBaseline, Engine, EvalOptions,
    GaifmanConfig, KnownFacts, ModelBundle, RankMode, TieRule, TrainOptions,
};
use crate::sampler::{gen_neighs, SizeBound};

/// Exit code of a malformed command line.
pub const EXIT_USAGE: i32 = 1;
/// Exit code of invalid data, configuration or artifacts.
pub const EXIT_DATA: i32 = 2;

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

fn long_version() -> &'static str {
    Box::leak(
        format!(
            "{} ({} {}, {} build)",
            env!("CARGO_PKG_VERSION"),
            std::env::consts::ARCH,
            std::env::consts::OS,
            if cfg!(debug_assertions) {
                "debug"
            } else {
                "release"
            }
        )
        .into_boxed_str(),
    )
}

#[derive(Parser, Debug)]
#[command(name = "gaifman", version, long_version = long_version(), args_override_self = true)]
#[command(about = "Neighborhood-sampling relational models for knowledge-base completion")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Domain, schema and Gaifman-graph statistics.
    Stats(StatsArgs),
    /// Print the feature set (built-in or parsed from a file).
    Features(FeaturesArgs),
    /// Draw (r,k)-neighborhoods of a tuple, one JSON line each.
    Sample(SampleArgs),
    /// Build the labelled feature-vector dataset of one target query.
    BuildDataset(BuildDatasetArgs),
    /// Train one classifier per relation.
    Train(TrainArgs),
    /// Probability of one triple.
    Predict(PredictArgs),
    /// Entity-prediction evaluation on test triples.
    Eval(EvalArgs),
    /// Query answers per second for several size bounds.
    Bench(BenchArgs),
    /// Show the header of a dataset, model or bundle.
    #[command(alias = "dump")]
    Inspect(InspectArgs),
}

#[derive(Args, Debug, Clone)]
struct KbArgs {
    /// Fact file: `head<TAB>relation<TAB>tail` lines, or with --nary
    /// `relation<TAB>arg1<TAB>...`.
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    nary: bool,
}

impl KbArgs {
    fn format(&self) -> TripleFormat {
        if self.nary {
            TripleFormat::NAry
        } else {
            TripleFormat::Triples
        }
    }

    fn load(&self) -> anyhow::Result<KnowledgeBase> {
        let kb = KnowledgeBase::load_path(&self.kb, self.format())?;
        log::info!("loaded {}: {}", self.kb.display(), kb.stats());
        Ok(kb)
    }
}

/// Model-family options. Unset flags fall back to `--config`, then defaults.
#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// `key=value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Neighborhood radius.
    #[arg(long)]
    r: Option<usize>,
    /// Neighborhood size bound (a number or `inf`).
    #[arg(long)]
    k: Option<SizeBound>,
    /// Positive neighborhoods per tuple.
    #[arg(long)]
    w: Option<usize>,
    /// Corrupted tuples per positive tuple.
    #[arg(long)]
    neg: Option<usize>,
    /// Inference samples per answer.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated hidden layer widths.
    #[arg(long)]
    hidden: Option<String>,
    /// Feed raw grounding counts instead of log(1 + count).
    #[arg(long)]
    raw_counts: bool,
    /// Keep corrupted tuples even when they are known facts.
    #[arg(long)]
    allow_false_negatives: bool,
    /// Feature file (default: the built-in per-relation templates).
    #[arg(long)]
    features: Option<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self) -> anyhow::Result<GaifmanConfig> {
        let mut c = GaifmanConfig::default();
        if let Some(path) = &self.config {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            c.apply_text(&text)?;
        }
        if let Some(v) = self.r {
            c.radius = v;
        }
        if let Some(v) = self.k {
            c.bound = v;
        }
        if let Some(v) = self.w {
            c.w = v;
        }
        if let Some(v) = self.neg {
            c.w_neg = v;
        }
        if let Some(v) = self.n {
            c.n_infer = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.epochs {
            c.mlp.epochs = v;
        }
        if let Some(v) = &self.hidden {
            c.set("hidden", v)?;
        }
        if self.raw_counts {
            c.transform = Transform::None;
        }
        if self.allow_false_negatives {
            c.filter_known = false;
        }
        c.validate()?;
        log::info!(
            "resolved config: {}",
            c.to_text().trim_end().replace('\n', " ")
        );
        Ok(c)
    }

    fn feature_set(&self, kb: &KnowledgeBase) -> anyhow::Result<FeatureSet> {
        Ok(match &self.features {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                FeatureSet::parse_text(&text, Some(kb))
                    .with_context(|| format!("in {}", path.display()))?
            }
            None => default_feature_set(kb.relations())?,
        })
    }
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    kb: KbArgs,
    /// Radius for the largest-neighborhood statistic.
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Write the degree histogram CSV here instead of standard output.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    #[command(flatten)]
    kb: KbArgs,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Write the feature file here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    kb: KbArgs,
    /// Whitespace-separated object names.
    #[arg(long)]
    tuple: String,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct BuildDatasetArgs {
    #[command(flatten)]
    kb: KbArgs,
    /// Target query formula, e.g. `exists y . r1(s1, y) & r2(y, s2)`.
    #[arg(long, conflicts_with = "relation")]
    query: Option<String>,
    /// Shorthand for the query `relation(s1, s2)`.
    #[arg(long)]
    relation: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Also dump the dataset as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    kb: KbArgs,
    /// Bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated relations to train (default: all).
    #[arg(long)]
    relations: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct BundleArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Training KB the bundle was built from.
    #[arg(long)]
    kb: PathBuf,
    /// Inference samples per answer (default: the bundle's).
    #[arg(long)]
    n: Option<usize>,
    /// Size bound at inference (default: the bundle's).
    #[arg(long)]
    k: Option<SizeBound>,
    /// Seed of inference sampling (default: derived from the bundle seed).
    #[arg(long)]
    seed: Option<u64>,
}

struct Loaded {
    kb: KnowledgeBase,
    graph: GaifmanGraph,
    bundle: ModelBundle,
}

impl BundleArgs {
    fn load(&self) -> anyhow::Result<Loaded> {
        let bundle = ModelBundle::load(&self.bundle)?;
        let kb = KnowledgeBase::load_path(&self.kb, TripleFormat::Triples)?;
        let graph = GaifmanGraph::build(&kb);
        Ok(Loaded { kb, graph, bundle })
    }

    fn engine<'a>(&self, l: &'a Loaded) -> anyhow::Result<Engine<'a>> {
        let mut e = Engine::new(&l.kb, &l.graph, &l.bundle)?;
        if let Some(n) = self.n {
            if n == 0 {
                return Err(Error::InvalidConfig("n must be at least 1".into()).into());
            }
            e = e.with_samples(n);
        }
        if let Some(k) = self.k {
            e = e.with_bound(k);
        }
        if let Some(s) = self.seed {
            e = e.with_seed(s);
        }
        Ok(e)
    }
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    bundle: BundleArgs,
    /// `head relation tail`, whitespace separated.
    #[arg(long)]
    triple: String,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    bundle: BundleArgs,
    /// Test triples.
    #[arg(long)]
    test: PathBuf,
    /// Further known-true triples used for filtering (repeatable).
    #[arg(long)]
    known: Vec<PathBuf>,
    #[arg(long, default_value = "filtered")]
    mode: RankMode,
    /// `all`, `sample(m)` or `m`.
    #[arg(long, default_value = "all")]
    candidates: Candidates,
    #[arg(long, default_value = "average")]
    ties: TieRule,
    /// Seed of candidate subsampling.
    #[arg(long, default_value_t = 0)]
    candidate_seed: u64,
    /// Evaluate only the first this many test triples.
    #[arg(long)]
    limit: Option<usize>,
    /// Score with candidate degree instead of the bundle.
    #[arg(long)]
    baseline: bool,
    /// Write the report as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    bundle: BundleArgs,
    /// Query pairs, as triples.
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated size bounds.
    #[arg(long, default_value = "10,20,50")]
    ks: String,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// A dataset file, a model file or a bundle directory.
    path: PathBuf,
    /// For datasets: dump all records as CSV.
    #[arg(long)]
    csv: bool,
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = dispatch(cli.command, &mut out).and_then(|()| out.flush().map_err(Into::into));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::Stats(a) => stats(a, out),
        Command::Features(a) => features(a, out),
        Command::Sample(a) => sample(a, out),
        Command::BuildDataset(a) => build(a, out),
        Command::Train(a) => train(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Bench(a) => bench_cmd(a, out),
        Command::Inspect(a) => inspect(a, out),
    }
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let kb = a.kb.load()?;
    let graph = GaifmanGraph::build(&kb);
    let n = kb.num_objects().max(1) as f64;
    writeln!(out, "objects\t{}", kb.num_objects())?;
    writeln!(out, "relations\t{}", kb.num_relations())?;
    writeln!(out, "facts\t{}", kb.num_facts())?;
    writeln!(out, "gaifman_edges\t{}", graph.num_edges())?;
    writeln!(
        out,
        "mean_degree\t{:.4}",
        2.0 * graph.num_edges() as f64 / n
    )?;
    writeln!(
        out,
        "max_neighborhood_r{}\t{}",
        a.r,
        graph.max_r_neighborhood_size(a.r)
    )?;
    match a.histogram {
        Some(path) => graph.write_degree_histogram_csv(File::create(path)?)?,
        None => graph.write_degree_histogram_csv(out)?,
    }
    Ok(())
}

fn features(a: FeaturesArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let kb = a.kb.load()?;
    let set = ModelArgs {
        features: a.features,
        ..ModelArgs::default()
    }
    .feature_set(&kb)?;
    log::info!("{} feature(s), hash {}", set.len(), set.content_hash());
    match a.out {
        Some(path) => fs::write(path, set.to_text())?,
        None => out.write_all(set.to_text().as_bytes())?,
    }
    Ok(())
}

fn object(kb: &KnowledgeBase, name: &str) -> anyhow::Result<ObjectId> {
    kb.object_id(name)
        .ok_or_else(|| Error::UnknownObject(name.to_owned()).into())
}

fn sample(a: SampleArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let kb = a.kb.load()?;
    let config = a.model.resolve()?;
    let tuple: Vec<ObjectId> = a
        .tuple
        .split_whitespace()
        .map(|n| object(&kb, n))
        .collect::<anyhow::Result<_>>()?;
    if tuple.is_empty() {
        return Err(usage("--tuple needs at least one object"));
    }
    let graph = GaifmanGraph::build(&kb);
    let mut sampler = config.sampler();
    sampler.validate(tuple.len())?;
    sampler.seed = config.seed;
    for s in gen_neighs(&graph, &tuple, &sampler)? {
        let names = |ids: &[ObjectId]| -> Vec<String> {
            ids.iter().map(|&o| kb.object_name(o).to_owned()).collect()
        };
        let line = serde_json::json!({
            "tuple": names(&s.tuple),
            "label": s.label,
            "members": names(&s.members),
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn build(a: BuildDatasetArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let kb = a.kb.load()?;
    let config = a.model.resolve()?;
    let query = match (&a.query, &a.relation) {
        (Some(q), None) => TargetQuery::new(parse_with(q, Some(&kb))?)?,
        (None, Some(r)) => {
            if kb.relation_id(r).is_none() {
                return Err(Error::UnknownRelation(r.clone()).into());
            }
            TargetQuery::binary(r)
        }
        _ => return Err(usage("give exactly one of --query or --relation")),
    };
    let graph = GaifmanGraph::build(&kb);
    let phi = a.model.feature_set(&kb)?;
    let featurizer = Featurizer::new(&phi, &kb, query.arity(), config.transform)?;
    let options = BuildOptions {
        filter_known: config.filter_known,
        progress_every: 10_000,
    };
    let ds = build_dataset(
        &kb,
        &graph,
        &query,
        &featurizer,
        &config.sampler(),
        &options,
    )?;
    ds.save(&a.out)?;
    if let Some(csv) = a.csv {
        ds.write_csv(File::create(csv)?)?;
    }
    writeln!(
        out,
        "{}: {} positive, {} negative, {} features",
        a.out.display(),
        ds.meta.positives,
        ds.meta.negatives,
        ds.meta.dim
    )?;
    Ok(())
}

fn train(a: TrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let kb = a.kb.load()?;
    let config = a.model.resolve()?;
    let graph = GaifmanGraph::build(&kb);
    let phi = a.model.feature_set(&kb)?;
    let options = TrainOptions {
        relations: a.relations.map(|s| {
            s.split(',')
                .map(|r| r.trim().to_owned())
                .filter(|r| !r.is_empty())
                .collect()
        }),
        progress_every: 10_000,
    };
    let bundle = train_all(&kb, &graph, &phi, &config, &options)?;
    bundle.save(&a.out)?;
    writeln!(
        out,
        "{}: {} model(s), {} relation(s) skipped",
        a.out.display(),
        bundle.models.len(),
        bundle.skipped.len()
    )?;
    Ok(())
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let parts: Vec<&str> = a.triple.split_whitespace().collect();
    let [head, relation, tail] = parts[..] else {
        return Err(usage("--triple must be `head relation tail`"));
    };
    let loaded = a.bundle.load()?;
    let engine = a.bundle.engine(&loaded)?;
    let p = engine.query_prob_named(head, relation, tail)?;
    writeln!(out, "{p}")?;
    Ok(())
}

fn read_triples(kb: &KnowledgeBase, path: &Path) -> anyhow::Result<Vec<Fact>> {
    let (facts, skipped) = kb.resolve_path(path, TripleFormat::Triples)?;
    if skipped > 0 {
        log::warn!(
            "{}: {skipped} triple(s) mention symbols absent from the training KB",
            path.display()
        );
    }
    Ok(facts)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let loaded = a.bundle.load()?;
    let mut test = read_triples(&loaded.kb, &a.test)?;
    let mut extra = test.clone();
    for k in &a.known {
        extra.extend(read_triples(&loaded.kb, k)?);
    }
    if let Some(l) = a.limit {
        test.truncate(l);
    }
    let known = KnownFacts::new(&loaded.kb, &extra);
    let options = EvalOptions {
        mode: a.mode,
        candidates: a.candidates,
        ties: a.ties,
        seed: a.candidate_seed,
        progress_every: 1_000,
    };
    let report = if a.baseline {
        evaluate(
            &DegreeBaseline {
                graph: &loaded.graph,
            },
            &loaded.kb,
            &test,
            &known,
            &options,
        )?
    } else {
        let engine = a.bundle.engine(&loaded)?;
        evaluate(&engine, &loaded.kb, &test, &known, &options)?
    };
    report.write_table(&mut *out)?;
    if let Some(csv) = a.csv {
        report.write_csv(File::create(csv)?)?;
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let bounds: Vec<SizeBound> =
        a.ks.split(',')
            .map(|k| k.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|e: Error| usage(e.to_string()))?;
    let loaded = a.bundle.load()?;
    let mut test = read_triples(&loaded.kb, &a.test)?;
    if let Some(l) = a.limit {
        test.truncate(l);
    }
    let engine = a.bundle.engine(&loaded)?;
    let rows = bench(&engine, &test, &bounds)?;
    write_bench_csv(out, &rows)?;
    Ok(())
}

fn inspect(a: InspectArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if a.path.is_dir() {
        let manifest = a.path.join("manifest.txt");
        let text = fs::read_to_string(&manifest)
            .with_context(|| format!("reading {}", manifest.display()))?;
        out.write_all(text.as_bytes())?;
        return Ok(());
    }
    let mut first = String::new();
    File::open(&a.path)
        .with_context(|| format!("opening {}", a.path.display()))?
        .take(64)
        .read_to_string(&mut first)
        .ok();
    if first.starts_with("gaifman-dataset") {
        let ds = Dataset::load(&a.path)?;
        if a.csv {
            ds.write_csv(out)?;
        } else {
            let text = fs::read(&a.path)?;
            let end = text
                .windows(2)
                .position(|w| w == b"\n\n")
                .map_or(text.len(), |p| p + 1);
            out.write_all(&text[..end])?;
        }
    } else if first.starts_with("gaifman-mlp") {
        let model = MlpModel::load(&a.path)?;
        if a.csv {
            bail!(Usage("--csv applies to datasets only".into()));
        }
        let text = fs::read(&a.path)?;
        let end = text
            .windows(2)
            .position(|w| w == b"\n\n")
            .map_or(text.len(), |p| p + 1);
        out.write_all(&text[..end])?;
        writeln!(out, "# {} parameters", model.num_params())?;
    } else {
        return Err(Error::format(&a.path, "not a dataset, model or bundle").into());
    }
    Ok(())
}
