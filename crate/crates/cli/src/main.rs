use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use transnet::federation::{
    decode, decode_csv, encode_csv, local_site_compute, read_summary, write_summary, SourceSummary,
};
use transnet::harness::experiment::{run_experiment, summarize, write_outputs, RunOptions, DEFAULT_L_SWEEP};
use transnet::harness::metrics::Method;
use transnet::harness::realdata::{
    load_multilayer, parse_sweep, run_realdata, write_realdata_outputs, RealDataOptions,
};
use transnet::io::{read_edge_list, read_edge_pairs, read_labels, write_labels};
use transnet::netgen::{BinaryNetwork, ExperimentConfig, ReleasedLayer};
use transnet::privacy::{randomized_response, PrivacyParams};
use transnet::rng::derive_seed;
use transnet::spectral::EigenOrder;
use transnet::transnet::{Coordinator, LambdaChoice, PipelineConfig, DEFAULT_FOLDS, DEFAULT_LAMBDA_GRID};
use transnet::weighting::WeightingMode;
use transnet::Exec;

#[derive(Parser)]
#[command(
    name = "transnet",
    version,
    about = "Privacy-aware transfer learning for community detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo experiments on simulated multi-layer networks.
    Simulate(SimulateArgs),
    /// Evaluate on multi-layer data read from edge lists.
    Realdata(RealdataArgs),
    /// Cluster one released target network using released source networks.
    Run(RunArgs),
    /// Compute a source site's summary and write it as `summary_<l>.tns`.
    SummaryEncode(EncodeArgs),
    /// Print a `.tns` summary file.
    SummaryDecode(DecodeArgs),
}

/// Options shared by every pipeline-running subcommand.
#[derive(Args, Clone)]
struct PipelineArgs {
    /// `cv` or a fixed nonnegative value.
    #[arg(long, default_value = "cv")]
    lambda: String,
    /// Skip bias adjustment of the released networks (ablation).
    #[arg(long)]
    no_debias: bool,
    /// Rank eigenvalues algebraically instead of by magnitude.
    #[arg(long)]
    algebraic: bool,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

impl PipelineArgs {
    fn lambda(&self) -> Result<LambdaChoice> {
        if self.lambda.eq_ignore_ascii_case("cv") {
            return Ok(LambdaChoice::Cv {
                grid: DEFAULT_LAMBDA_GRID.to_vec(),
                folds: DEFAULT_FOLDS,
            });
        }
        let v: f64 = self
            .lambda
            .parse()
            .with_context(|| format!("--lambda expects `cv` or a number, got {:?}", self.lambda))?;
        if v.is_nan() || v < 0.0 {
            bail!("--lambda must be >= 0");
        }
        Ok(LambdaChoice::Fixed(v))
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn order(&self) -> EigenOrder {
        if self.algebraic {
            EigenOrder::Algebraic
        } else {
            EigenOrder::Magnitude
        }
    }

    fn run_options(&self, timing: bool) -> Result<RunOptions> {
        let mut opts = RunOptions {
            lambda: self.lambda()?,
            order: self.order(),
            debias: !self.no_debias,
            timing,
            exec: self.exec(),
            ..RunOptions::default()
        };
        opts.kmeans.restarts = self.restarts.max(1);
        Ok(opts)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    experiment: u8,
    #[arg(long, default_value_t = 1)]
    case: u8,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_value = "adaw,ew,dsc,ssc")]
    methods: Vec<Method>,
    /// Source counts to sweep.
    #[arg(long, value_delimiter = ',')]
    ls: Option<Vec<usize>>,
    /// TOML file overriding any field of the preset (n, k, b0, group_b, mu, q, q0, reps, seed).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record wall-clock seconds in metrics.csv (otherwise 0, keeping output reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct RealdataArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    /// Layer index used as the target; every layer in turn when omitted.
    #[arg(long)]
    target: Option<usize>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0.7:0.95:0.05")]
    q0: String,
    /// Fixed privacy level of each layer when used as a source.
    #[arg(long, value_delimiter = ',', required = true)]
    qs: Vec<f64>,
    /// Number of communities; defaults to the number of distinct labels.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = transnet::netgen::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "adaw,ew,ssc")]
    methods: Vec<Method>,
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weighting {
    Equal,
    Adaptive,
    Theoretical,
}

impl From<Weighting> for WeightingMode {
    fn from(w: Weighting) -> Self {
        match w {
            Weighting::Equal => WeightingMode::Equal,
            Weighting::Adaptive => WeightingMode::AdaptivePractical,
            Weighting::Theoretical => WeightingMode::AdaptiveTheoretical,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Released target network (edge list).
    #[arg(long)]
    target: PathBuf,
    /// Released source networks (edge lists) or site summaries (`.tns`).
    #[arg(long, value_delimiter = ',', default_value = "")]
    sources: Vec<PathBuf>,
    #[arg(long)]
    q0: f64,
    /// Privacy level per edge-list source; `.tns` summaries carry their own.
    #[arg(long, value_delimiter = ',')]
    qs: Vec<f64>,
    #[arg(long)]
    k: usize,
    /// Node count; inferred from the largest index when omitted.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = Weighting::Adaptive)]
    weighting: Weighting,
    /// Apply randomized response to the inputs first (for raw networks).
    #[arg(long)]
    perturb: bool,
    #[arg(long, default_value_t = transnet::netgen::DEFAULT_SEED)]
    seed: u64,
    /// Ground-truth labels; prints the misclassification rate on labeled nodes.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Write estimated labels here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EncodeArgs {
    /// Released network at this site (edge list).
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    q: f64,
    /// Defaults to `q`.
    #[arg(long)]
    q_prime: Option<f64>,
    #[arg(long)]
    k: usize,
    /// Source index written into the summary.
    #[arg(long)]
    l: usize,
    #[arg(long)]
    no_debias: bool,
    #[arg(long)]
    algebraic: bool,
    /// Also write a CSV dump next to the binary file.
    #[arg(long)]
    csv: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    file: PathBuf,
    /// Dump the full eigenspace as CSV.
    #[arg(long)]
    csv: bool,
}

fn load_config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::preset(args.experiment, args.case)?;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let overrides: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        let mut merged = toml::Table::try_from(&config)?;
        if let Some(key) = overrides.keys().find(|k| !merged.contains_key(*k)) {
            bail!("{}: unknown key `{key}`", path.display());
        }
        merged.extend(overrides);
        config = merged
            .try_into()
            .with_context(|| format!("invalid configuration in {}", path.display()))?;
    }
    if let Some(r) = args.reps {
        config.reps = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    Ok(config)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let config = load_config(&args)?;
    let sweep = args.ls.clone().unwrap_or_else(|| DEFAULT_L_SWEEP.to_vec());
    for &l in &sweep {
        config.with_l(l).validate()?;
    }
    let opts = args.pipeline.run_options(args.timing)?;
    info!(
        "experiment {} case {}: n={} K={} L={:?} reps={} seed={}",
        config.experiment, config.case, config.n, config.k, sweep, config.reps, config.seed
    );
    let outcomes = run_experiment(&config, &sweep, &args.methods, &opts)?;
    write_outputs(&outcomes, config.experiment, &args.out)?;
    let records: Vec<_> = outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect();
    for row in summarize(&records) {
        println!(
            "{:<15} L={:<3} misclass {:.4} ± {:.4}  proj_dist {:.4} ± {:.4}",
            row.method.name(),
            row.l,
            row.misclass_mean,
            row.misclass_se,
            row.proj_dist_mean,
            row.proj_dist_se
        );
    }
    info!("wrote {}", args.out.display());
    Ok(())
}

fn realdata(args: RealdataArgs) -> Result<()> {
    let data = load_multilayer(&args.layers, &args.labels)?;
    info!(
        "{} layers over {} nodes, {} labeled, {} communities",
        data.layers.len(),
        data.n(),
        data.labeled_count(),
        data.k
    );
    let opts = RealDataOptions {
        target: args.target,
        q0_sweep: parse_sweep(&args.q0)?,
        qs: args.qs,
        k: args.k.unwrap_or(data.k),
        reps: args.reps,
        seed: args.seed,
        methods: args.methods,
        run: args.pipeline.run_options(args.timing)?,
    };
    let records = run_realdata(&data, &opts)?;
    write_realdata_outputs(&records, &args.out)?;
    info!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn infer_n(paths: &[&Path]) -> Result<usize> {
    let mut n = 0;
    for p in paths {
        for (i, j) in read_edge_pairs(p)? {
            n = n.max(i.max(j) + 1);
        }
    }
    if n < 2 {
        bail!("cannot infer node count from the edge lists; pass --n");
    }
    Ok(n)
}

fn is_summary(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "tns")
}

fn run(args: RunArgs) -> Result<()> {
    let sources: Vec<&PathBuf> = args.sources.iter().filter(|p| !p.as_os_str().is_empty()).collect();
    let (summary_files, edge_files): (Vec<&PathBuf>, Vec<&PathBuf>) = sources.iter().partition(|p| is_summary(p));
    if edge_files.len() != args.qs.len() {
        bail!(
            "{} edge-list sources but {} values in --qs",
            edge_files.len(),
            args.qs.len()
        );
    }
    let n = match args.n {
        Some(n) => n,
        None => {
            let mut all: Vec<&Path> = vec![args.target.as_path()];
            all.extend(edge_files.iter().map(|p| p.as_path()));
            infer_n(&all)?
        }
    };
    let exec = args.pipeline.exec();
    let config = PipelineConfig {
        weighting: args.weighting.into(),
        lambda: args.pipeline.lambda()?,
        debias: !args.pipeline.no_debias,
        order: args.pipeline.order(),
        exec,
        kmeans: transnet::kmeans::KMeansConfig {
            restarts: args.pipeline.restarts.max(1),
            ..Default::default()
        },
        ..PipelineConfig::new(args.k, args.seed)
    };

    let release = |net: BinaryNetwork, params: PrivacyParams, l: usize| ReleasedLayer {
        network: if args.perturb {
            randomized_response(&net, params, derive_seed(args.seed, &[9, l as u64]))
        } else {
            net
        },
        params,
    };
    let target = release(read_edge_list(&args.target, n)?, PrivacyParams::symmetric(args.q0)?, 0);

    let mut summaries: Vec<SourceSummary> = Vec::new();
    for p in &summary_files {
        let s = read_summary(p)?;
        if s.n() != n {
            bail!("{}: summary has n={}, target has n={n}", p.display(), s.n());
        }
        summaries.push(s);
    }
    // edge-list sources are numbered after the ones that arrived as summaries
    let first_l = summaries.iter().map(|s| s.l).max().unwrap_or(0) + 1;
    let site_jobs: Vec<(usize, &PathBuf, f64)> = edge_files
        .iter()
        .zip(&args.qs)
        .enumerate()
        .map(|(i, (p, &q))| (first_l + i, *p, q))
        .collect();
    for r in exec.map(site_jobs, |(l, p, q)| -> Result<SourceSummary> {
        let layer = release(read_edge_list(p, n)?, PrivacyParams::symmetric(q)?, l);
        Ok(local_site_compute(
            &layer.network,
            layer.params,
            config.k,
            l,
            config.debias,
            config.order,
        )?)
    }) {
        summaries.push(r?);
    }

    let coordinator = Coordinator::new(&target, config.k, config.debias, config.order)?;
    let result = coordinator.run(&summaries, &config)?;
    eprint!("{}", result.diagnostics.render());
    if let Some(w) = &result.weights {
        let ws: Vec<String> = w.as_slice().iter().map(|x| format!("{x:.4}")).collect();
        eprintln!("weights: {}", ws.join(","));
    }
    eprintln!("lambda: {}", result.lambda_selected);
    if let Some(path) = &args.labels {
        let truth = read_labels(path)?;
        if truth.len() != n {
            bail!("{}: {} labels for {n} nodes", path.display(), truth.len());
        }
        let mut distinct: Vec<i64> = truth.iter().flatten().copied().collect();
        distinct.sort_unstable();
        distinct.dedup();
        let remapped: Vec<Option<usize>> = truth
            .iter()
            .map(|t| t.map(|v| distinct.binary_search(&v).expect("present")))
            .collect();
        let rate = transnet::harness::realdata::labeled_misclassification(&result.labels, &remapped, config.k);
        eprintln!("misclassification on labeled nodes: {rate:.4}");
    }
    match &args.out {
        Some(p) => write_labels(p, &result.labels)?,
        None => {
            for l in &result.labels {
                println!("{l}");
            }
        }
    }
    Ok(())
}

fn summary_encode(args: EncodeArgs) -> Result<()> {
    let n = match args.n {
        Some(n) => n,
        None => infer_n(&[args.edges.as_path()])?,
    };
    let net = read_edge_list(&args.edges, n)?;
    let params = PrivacyParams::new(args.q, args.q_prime.unwrap_or(args.q))?;
    let order = if args.algebraic {
        EigenOrder::Algebraic
    } else {
        EigenOrder::Magnitude
    };
    let summary = local_site_compute(&net, params, args.k, args.l, !args.no_debias, order)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = write_summary(&args.out, &summary)?;
    println!("{}", path.display());
    if args.csv {
        let csv_path = path.with_extension("csv");
        std::fs::write(&csv_path, encode_csv(&summary)).with_context(|| format!("writing {}", csv_path.display()))?;
        println!("{}", csv_path.display());
    }
    Ok(())
}

fn summary_decode(args: DecodeArgs) -> Result<()> {
    let bytes = std::fs::read(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let summary = if bytes.starts_with(b"format_version,") {
        decode_csv(std::str::from_utf8(&bytes)?)?
    } else {
        decode(&bytes).with_context(|| format!("decoding {}", args.file.display()))?
    };
    if args.csv {
        print!("{}", encode_csv(&summary));
    } else {
        println!("format_version: {}", summary.format_version);
        println!("source: {}", summary.l);
        println!("n: {}", summary.n());
        println!("k: {}", summary.k());
        println!("q: {}", summary.params.q());
        println!("q_prime: {}", summary.params.q_prime());
        println!("rho_hat: {}", summary.rho_hat);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Realdata(a) => realdata(a),
        Command::Run(a) => run(a),
        Command::SummaryEncode(a) => summary_encode(a),
        Command::SummaryDecode(a) => summary_decode(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
