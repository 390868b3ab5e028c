use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use flatgad::backend::{ExternalBackend, InContextBackend, InContextTask, KnnBackend, DEFAULT_K_NEIGHBORS};
use flatgad::error::{Error, Result};
use flatgad::eval::config::ExperimentConfig;
use flatgad::eval::experiment::{flatten, run_ablation, run_experiment, FlattenConfig, HopOrder};
use flatgad::eval::split::{generate_split, load_splits_file, DEFAULT_N_ANOMALIES, DEFAULT_N_LABELED};
use flatgad::eval::synth::{synthetic_dataset, InjectionConfig, SynthConfig};
use flatgad::graph::{FeatureMatrix, Graph, IdMap, LabelVector};
use flatgad::spectral::{EmbeddingOptions, DEFAULT_ZERO_TOL};
use flatgad::table::{AugmentedTable, FeatureGroups};

#[derive(Parser)]
#[command(name = "flatgad", version, about = "Graph anomaly detection by flattening graphs into tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flatten a graph and its node features into an augmented table (CSV).
    Flatten(FlattenArgs),
    /// Score the unlabeled rows of a table with an in-context backend.
    Score(ScoreArgs),
    /// Run a configured experiment and print its report.
    Bench(BenchArgs),
    /// Run the feature-group ablation ladder for a configured experiment.
    Ablate(BenchArgs),
    /// Write a synthetic dataset with injected anomalies.
    Synth(SynthArgs),
}

#[derive(Args)]
struct FlattenArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    edges: PathBuf,
    /// Node features as CSV, one row per node.
    #[arg(long)]
    features: PathBuf,
    /// Maps edge-list tokens to row indices (one token per line, line i = row i).
    #[arg(long)]
    id_map: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
    /// Number of Laplacian eigenvectors.
    #[arg(long, default_value_t = 16)]
    k: usize,
    /// Filter-bank order.
    #[arg(long = "order", short = 'C', default_value_t = 2)]
    order: usize,
    /// Comma-separated groups from raw,lap,char,nbr, or `all`.
    #[arg(long, default_value = "all")]
    mask: FeatureGroups,
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    zero_tol: f64,
    #[arg(long)]
    log_degree: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Knn,
    External,
}

#[derive(Args)]
struct ScoreArgs {
    /// Table produced by `flatten`.
    #[arg(long)]
    table: PathBuf,
    /// Node labels, one 0/1 per line; only labeled-set entries are read.
    #[arg(long)]
    labels: PathBuf,
    /// Fixed split file (labeled ids per line); otherwise a split is generated.
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Line of the split file, or the generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_N_LABELED)]
    n_labeled: usize,
    #[arg(long, default_value_t = DEFAULT_N_ANOMALIES)]
    n_anomalies: usize,
    #[arg(long, value_enum, default_value = "knn")]
    backend: BackendKind,
    #[arg(long, default_value_t = DEFAULT_K_NEIGHBORS)]
    k_neighbors: usize,
    /// External command template with {train_x} {train_y} {test_x} {out}.
    #[arg(long)]
    command: Option<String>,
    /// Seconds before an external call is killed.
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
    /// Output: `node score` per unlabeled node.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for edges.txt, features.csv, labels.txt.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    attach: usize,
    #[arg(long, default_value_t = 0.5)]
    homophily: f64,
    #[arg(long, default_value_t = 25)]
    contextual: usize,
    #[arg(long, default_value_t = 25)]
    structural: usize,
    #[arg(long, default_value_t = 5)]
    clique_size: usize,
    #[arg(long, default_value_t = 50)]
    candidate_pool: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn cmd_flatten(a: FlattenArgs) -> Result<()> {
    let x = FeatureMatrix::load_csv_file(&a.features)?;
    let g = match &a.id_map {
        Some(p) => {
            let f = File::open(p).map_err(|e| Error::io(p, e))?;
            let ids = IdMap::load(BufReader::new(f))?;
            let f = File::open(&a.edges).map_err(|e| Error::io(&a.edges, e))?;
            Graph::load_edge_list_mapped(BufReader::new(f), &ids)?
        }
        None => Graph::load_edge_list_file(&a.edges, x.nrows())?,
    };
    let cfg = FlattenConfig {
        embedding: EmbeddingOptions {
            zero_tol: a.zero_tol,
            ..EmbeddingOptions::new(a.k)
        },
        order: HopOrder::Fixed(a.order),
        mask: a.mask,
        standardize: a.standardize,
        log_degree: a.log_degree,
        ..FlattenConfig::default()
    };
    let table = flatten(&g, &x, &cfg, a.order)?;
    table.export(&a.out)?;
    eprintln!("wrote {} x {} table to {}", table.nrows(), table.ncols(), a.out.display());
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let table = AugmentedTable::import(&a.table)?;
    let labels = LabelVector::load_file(&a.labels)?;
    if labels.len() != table.nrows() {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: table.nrows(),
            found: labels.len(),
        });
    }
    let split = match &a.splits {
        Some(p) => {
            let all = load_splits_file(p, &labels)?;
            let n = all.len();
            all.into_iter()
                .nth(a.seed as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("split {} requested, file has {n}", a.seed)))?
        }
        None => generate_split(&labels, a.n_labeled, a.n_anomalies, a.seed)?,
    };
    let backend: Box<dyn InContextBackend> = match a.backend {
        BackendKind::Knn => Box::new(KnnBackend {
            k_neighbors: a.k_neighbors,
        }),
        BackendKind::External => {
            let command = a
                .command
                .ok_or_else(|| Error::InvalidArgument("--command is required for the external backend".into()))?;
            if a.timeout.is_nan() || a.timeout <= 0.0 {
                return Err(Error::InvalidArgument("--timeout must be positive".into()));
            }
            Box::new(ExternalBackend {
                timeout: Duration::from_secs_f64(a.timeout),
                ..ExternalBackend::new(command)
            })
        }
    };
    let task = InContextTask::from_table(&table, &split.labeled_ids, &split.labeled_y, &split.test_ids)?;
    let scores = backend.predict(&task)?;
    let mut w = create(&a.out)?;
    for (v, s) in split.test_ids.iter().zip(scores.as_slice()) {
        writeln!(w, "{v} {s:?}")?;
    }
    w.flush()?;
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<bool> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let ds = cfg.load_dataset()?;
    let splits = cfg.splits(&ds)?;
    let backend = cfg.backend.build();
    let report = run_experiment(&ds, &splits, &cfg.flatten, &cfg.eval, backend.as_ref())?;
    emit(&report.render(a.timings), a.out.as_deref())?;
    Ok(report.is_complete())
}

fn cmd_ablate(a: BenchArgs) -> Result<bool> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let ds = cfg.load_dataset()?;
    let splits = cfg.splits(&ds)?;
    let backend = cfg.backend.build();
    let reports = run_ablation(&ds, &splits, &cfg.flatten, &cfg.eval, backend.as_ref())?;
    let mut text = String::new();
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&format!("[{}]\n", r.mask));
        text.push_str(&r.render(a.timings));
    }
    emit(&text, a.out.as_deref())?;
    Ok(reports.iter().all(|r| r.is_complete()))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n: a.n,
        d: a.d,
        attach: a.attach,
        homophily: a.homophily,
        injection: InjectionConfig {
            n_contextual: a.contextual,
            n_structural: a.structural,
            clique_size: a.clique_size,
            candidate_pool: a.candidate_pool,
            seed: a.seed,
        },
    };
    let ds = synthetic_dataset(&cfg)?;
    ds.write_dir(&a.out)?;
    eprintln!(
        "wrote {} nodes, {} edges, {} anomalies to {}",
        ds.graph.node_count(),
        ds.graph.edge_count(),
        ds.labels.count_positive(),
        a.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Flatten(a) => cmd_flatten(a).map(|_| true),
        Command::Score(a) => cmd_score(a).map(|_| true),
        Command::Bench(a) => cmd_bench(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Synth(a) => cmd_synth(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        // report written, but some seeds failed
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
