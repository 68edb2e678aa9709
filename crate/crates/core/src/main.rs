use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cardgauge::cohort::{build_cohort, correlate, CorrelationReference};
use cardgauge::histogram::WordHistogram;
use cardgauge::ingest::hub::{fetch_corpus, FetchOptions, HubClient, HubConfig};
use cardgauge::ingest::{build_manifest, import_local_dir, load_manifest, CorpusSource, CorpusStore};
use cardgauge::mdparse::{export_tree, heading_paths, parse_toc, ExportFormat};
use cardgauge::pipeline::{
    corpus_histogram, per_file_histograms, rank_pairs, run_pipeline, CohortArtifact, RunConfig,
    Stage,
};
use cardgauge::report::{gap_report, score_card, Emit, EmitFormat};
use cardgauge::simmetrics::{
    compare_histograms, match_headings, CompareConfig, MatchThresholds, TocMetric,
};
use cardgauge::textprep::{load_stop_words, tokenize, FilterConfig, StopWordSource};

#[derive(Parser)]
#[command(
    name = "cardgauge",
    version,
    about = "Quantifies AI model-card documentation quality against reference templates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch model listings and README cards into a corpus store
    Fetch(FetchArgs),
    /// Run the token filtering pipeline over a file
    Tokens(TokensArgs),
    /// Extract the heading tree of a Markdown file
    Toc(TocArgs),
    /// Build a word histogram over a corpus or a single file
    Hist(HistArgs),
    /// Match one card's headings against a template's headings
    TocSim(TocSimArgs),
    /// Compare two saved histograms
    HistSim(HistSimArgs),
    /// Build a cohort from a corpus manifest
    Cohort(CohortArgs),
    /// Correlate reuse indicators with documentation similarity
    Correlate(CorrelateArgs),
    /// Emit the template-update suggestion report
    Suggest(SuggestArgs),
    /// Score a single card against a template
    Score(ScoreArgs),
    /// Run the staged end-to-end workflow
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct FilterFlags {
    /// `builtin` or a path to a one-word-per-line stop-word file
    #[arg(long, default_value = "builtin")]
    stopwords: String,
    /// Maximum occurrences of the letter x a token may carry
    #[arg(long = "max-x", default_value_t = 2)]
    max_x: usize,
    /// Keep the original casing
    #[arg(long)]
    no_lowercase: bool,
}

impl FilterFlags {
    fn to_config(&self) -> anyhow::Result<FilterConfig> {
        let stop_words = load_stop_words(&StopWordSource::parse(&self.stopwords))?;
        Ok(FilterConfig {
            stop_words,
            max_x_occurrences: self.max_x,
            lowercase: !self.no_lowercase,
            strip_markdown: true,
        })
    }
}

fn parse_thresholds(s: &str) -> anyhow::Result<MatchThresholds> {
    let (nlss, nld) = s
        .split_once(',')
        .with_context(|| format!("thresholds {s:?} must look like 25,50"))?;
    Ok(MatchThresholds {
        nlss_match: nlss.trim().parse().context("NLSS threshold")?,
        nld_match: nld.trim().parse().context("NLD threshold")?,
    })
}

#[derive(Args)]
struct FetchArgs {
    /// Listing endpoint URL ({page_size} placeholder supported)
    #[arg(long, conflicts_with = "local")]
    endpoint: Option<String>,
    /// Raw card URL template with a {model_id} placeholder
    #[arg(long = "card-url")]
    card_url: Option<String>,
    /// Import a pre-downloaded local tree instead of fetching
    #[arg(long)]
    local: Option<PathBuf>,
    /// Corpus store directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = cardgauge::ingest::DEFAULT_BATCH_COUNT)]
    batches: usize,
    #[arg(long = "cutoff-bytes", default_value_t = cardgauge::ingest::DEFAULT_SIZE_CUTOFF_BYTES)]
    cutoff_bytes: u64,
    #[arg(long = "pace-ms", default_value_t = 500)]
    pace_ms: u64,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long = "page-size", default_value_t = 500)]
    page_size: usize,
    /// Skip models already journaled with a terminal status
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct TokensArgs {
    file: PathBuf,
    #[command(flatten)]
    filter: FilterFlags,
}

#[derive(Args)]
struct TocArgs {
    file: PathBuf,
    /// dot | json
    #[arg(long, default_value = "dot")]
    format: String,
}

#[derive(Args)]
struct HistArgs {
    /// Corpus store directory (with a built manifest)
    #[arg(long, conflicts_with = "file")]
    corpus: Option<PathBuf>,
    /// Single file to histogram
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[command(flatten)]
    filter: FilterFlags,
}

#[derive(Args)]
struct TocSimArgs {
    #[arg(long)]
    card: PathBuf,
    #[arg(long)]
    template: PathBuf,
    /// nlss | nld
    #[arg(long, default_value = "nlss")]
    metric: String,
    /// NLSS and NLD match thresholds, e.g. 25,50
    #[arg(long, default_value = "25,50")]
    thresholds: String,
    /// Output format (json)
    #[arg(long, default_value = "json")]
    out: String,
}

#[derive(Args)]
struct HistSimArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    /// Output format (json)
    #[arg(long, default_value = "json")]
    out: String,
    /// Restrict cosine denominators to the common support
    #[arg(long)]
    cosine_common_support: bool,
    /// Add-one smoothing for the KL probabilities
    #[arg(long)]
    smooth: bool,
}

#[derive(Args)]
struct CohortArgs {
    /// Corpus store directory or its manifest.jsonl
    #[arg(long)]
    manifest: PathBuf,
    /// uniform | top | cluster
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 100_000)]
    step: usize,
    #[arg(long = "dl-th", default_value_t = 10_000_000)]
    dl_th: u64,
    #[arg(long = "likes-th", default_value_t = 4_000)]
    likes_th: u64,
    /// Cluster download range LO,HI (HI exclusive)
    #[arg(long, default_value = "1,100000")]
    range: String,
    #[arg(long = "per-bin", default_value_t = 20)]
    per_bin: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output cohort JSON path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Cohort JSON produced by `cardgauge cohort`
    #[arg(long)]
    cohort: PathBuf,
    /// zd-common | hf-all
    #[arg(long, default_value = "zd-common")]
    reference: String,
    #[arg(long = "zd-hist")]
    zd_hist: Option<PathBuf>,
    #[arg(long = "hf-hist")]
    hf_hist: PathBuf,
    /// Output format (json)
    #[arg(long, default_value = "json")]
    out: String,
    /// Also write download/common-word rank pairs as CSV
    #[arg(long = "rank-csv")]
    rank_csv: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterFlags,
}

#[derive(Args)]
struct SuggestArgs {
    #[arg(long)]
    zd: PathBuf,
    #[arg(long)]
    hf: PathBuf,
    #[arg(long = "top-k", default_value_t = 20)]
    top_k: usize,
    /// json | csv | markdown
    #[arg(long, default_value = "markdown")]
    format: String,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    card: PathBuf,
    /// Template Markdown whose headings anchor the TOC comparison
    #[arg(long = "zd-headings")]
    zd_headings: PathBuf,
    /// Template histogram TSV
    #[arg(long = "zd-hist")]
    zd_hist: PathBuf,
    #[arg(long, default_value = "25,50")]
    thresholds: String,
    /// json | csv | markdown
    #[arg(long, default_value = "json")]
    format: String,
    #[command(flatten)]
    filter: FilterFlags,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated stage subset (default: all stages)
    #[arg(long)]
    stages: Option<String>,
    #[arg(long = "local-dir")]
    local_dir: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long = "corpus-dir")]
    corpus_dir: Option<PathBuf>,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Print the effective configuration and exit
    #[arg(long = "print-config")]
    print_config: bool,
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn store_dir_of(manifest: &Path) -> PathBuf {
    if manifest.is_file() {
        manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    } else {
        manifest.to_path_buf()
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Fetch(args) => cmd_fetch(args),
        Command::Tokens(args) => cmd_tokens(args),
        Command::Toc(args) => cmd_toc(args),
        Command::Hist(args) => cmd_hist(args),
        Command::TocSim(args) => cmd_toc_sim(args),
        Command::HistSim(args) => cmd_hist_sim(args),
        Command::Cohort(args) => cmd_cohort(args),
        Command::Correlate(args) => cmd_correlate(args),
        Command::Suggest(args) => cmd_suggest(args),
        Command::Score(args) => cmd_score(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

fn cmd_fetch(args: FetchArgs) -> anyhow::Result<()> {
    let store = CorpusStore::create(&args.out)?;
    let manifest = if let Some(local) = &args.local {
        let imported = import_local_dir(local, &store, args.cutoff_bytes)?;
        eprintln!("imported {imported} records from {}", local.display());
        build_manifest(&args.out, args.batches, CorpusSource::LocalDir)?
    } else {
        let endpoint = args
            .endpoint
            .context("either --endpoint or --local is required")?;
        let card_url = args
            .card_url
            .context("--card-url is required with --endpoint")?;
        let mut hub = HubConfig::new(endpoint, card_url);
        hub.page_size = args.page_size;
        hub.pace_ms = args.pace_ms;
        hub.concurrency = args.workers;
        hub.token = std::env::var("CARDGAUGE_TOKEN").ok();
        let client = HubClient::new(hub)?;
        fetch_corpus(
            &client,
            &store,
            &FetchOptions {
                size_cutoff_bytes: args.cutoff_bytes,
                batch_count: args.batches,
                resume: args.resume,
            },
        )?
    };
    let counts = manifest.status_counts();
    eprintln!(
        "manifest: {} records (fetched {}, missing {}, oversize {}, error {})",
        manifest.records.len(),
        counts.fetched,
        counts.missing_card,
        counts.filtered_oversize,
        counts.error
    );
    Ok(())
}

fn cmd_tokens(args: TokensArgs) -> anyhow::Result<()> {
    let cfg = args.filter.to_config()?;
    let text = read_text(&args.file)?;
    let mut stdout = std::io::stdout().lock();
    use std::io::Write;
    for token in tokenize(&text, &cfg) {
        writeln!(stdout, "{token}")?;
    }
    Ok(())
}

fn cmd_toc(args: TocArgs) -> anyhow::Result<()> {
    let format = ExportFormat::parse(&args.format)?;
    let tree = parse_toc(&read_text(&args.file)?);
    println!("{}", export_tree(&tree, format)?.trim_end());
    Ok(())
}

fn cmd_hist(args: HistArgs) -> anyhow::Result<()> {
    let cfg = args.filter.to_config()?;
    let hist = match (&args.corpus, &args.file) {
        (Some(corpus), None) => {
            let manifest = load_manifest(corpus)?;
            corpus_histogram(&manifest, corpus, &cfg, args.workers)?
        }
        (None, Some(file)) => WordHistogram::from_tokens(
            tokenize(&read_text(file)?, &cfg),
            file.display().to_string(),
        ),
        _ => bail!("exactly one of --corpus or --file is required"),
    };
    hist.save(&args.out)?;
    eprintln!(
        "histogram: {} unique words, {} total, written to {}",
        hist.vocabulary_size(),
        hist.total(),
        args.out.display()
    );
    Ok(())
}

fn cmd_toc_sim(args: TocSimArgs) -> anyhow::Result<()> {
    if args.out != "json" {
        bail!("unsupported output format {:?} (expected json)", args.out);
    }
    let metric = TocMetric::parse(&args.metric)?;
    let th = parse_thresholds(&args.thresholds)?;
    let card_paths = heading_paths(&parse_toc(&read_text(&args.card)?));
    let template_paths = heading_paths(&parse_toc(&read_text(&args.template)?));
    let matches = match_headings(&card_paths, &template_paths, &th);
    let wanted = match metric {
        TocMetric::Nlss => cardgauge::simmetrics::MatchMetric::Nlss,
        TocMetric::Nld => cardgauge::simmetrics::MatchMetric::Nld,
    };
    let matched: Vec<_> = matches
        .iter()
        .filter(|m| m.matched_by.contains(&wanted))
        .collect();
    let body = serde_json::json!({
        "card": args.card,
        "template": args.template,
        "metric": metric,
        "thresholds": th,
        "match_count": matched.len(),
        "matches": matched,
    });
    println!("{}", serde_json::to_string_pretty(&body)?);
    Ok(())
}

fn cmd_hist_sim(args: HistSimArgs) -> anyhow::Result<()> {
    if args.out != "json" {
        bail!("unsupported output format {:?} (expected json)", args.out);
    }
    let left = WordHistogram::load(&args.left)?;
    let right = WordHistogram::load(&args.right)?;
    let cfg = CompareConfig {
        cosine_common_support_only: args.cosine_common_support,
        add_one_smoothing: args.smooth,
        ..CompareConfig::default()
    };
    let comparison = compare_histograms(&left, &right, &cfg)?;
    let body = serde_json::json!({
        "left": args.left,
        "right": args.right,
        "comparison": comparison,
    });
    println!("{}", serde_json::to_string_pretty(&body)?);
    Ok(())
}

fn cmd_cohort(args: CohortArgs) -> anyhow::Result<()> {
    let store_dir = store_dir_of(&args.manifest);
    let manifest = load_manifest(&store_dir)?;
    let spec = match args.kind.as_str() {
        "uniform" => cardgauge::cohort::CohortSpec::Uniform { step: args.step },
        "top" => cardgauge::cohort::CohortSpec::Top {
            download_threshold: args.dl_th,
            likes_threshold: args.likes_th,
        },
        "cluster" => {
            let (lo, hi) = args
                .range
                .split_once(',')
                .with_context(|| format!("range {:?} must look like LO,HI", args.range))?;
            cardgauge::cohort::CohortSpec::Cluster {
                lo: lo.trim().parse().context("range LO")?,
                hi: hi.trim().parse().context("range HI")?,
                samples_per_bin: args.per_bin,
                seed: args.seed,
            }
        }
        other => bail!("unknown cohort kind {other:?}"),
    };
    let cohort = build_cohort(&manifest, &spec)?;
    let artifact = CohortArtifact {
        corpus_root: store_dir,
        cohort,
    };
    let text = serde_json::to_string_pretty(&artifact)?;
    std::fs::write(&args.out, format!("{text}\n"))
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "cohort: {} members ({} documented) written to {}",
        artifact.cohort.members.len(),
        artifact.cohort.documented_members().len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_correlate(args: CorrelateArgs) -> anyhow::Result<()> {
    if args.out != "json" {
        bail!("unsupported output format {:?} (expected json)", args.out);
    }
    let artifact: CohortArtifact = serde_json::from_str(&read_text(&args.cohort)?)
        .with_context(|| format!("parsing {}", args.cohort.display()))?;
    let hf = WordHistogram::load(&args.hf_hist)?;
    let (reference_words, reference): (HashSet<String>, CorrelationReference) =
        match args.reference.as_str() {
            "zd-common" => {
                let zd_path = args
                    .zd_hist
                    .context("--zd-hist is required with --reference zd-common")?;
                let zd = WordHistogram::load(&zd_path)?;
                (
                    zd.words()
                        .filter(|w| hf.contains(w))
                        .map(str::to_string)
                        .collect(),
                    CorrelationReference::ZdCommonWords,
                )
            }
            "hf-all" => (
                hf.words().map(str::to_string).collect(),
                CorrelationReference::HfHistogram,
            ),
            other => bail!("unknown reference {other:?} (expected zd-common or hf-all)"),
        };
    let filter = args.filter.to_config()?;
    let per_file = per_file_histograms(&artifact, &filter)?;
    let result = correlate(&artifact.cohort, &reference_words, &per_file, reference)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    if let Some(csv_path) = args.rank_csv {
        let table = rank_pairs(&artifact.cohort, &reference_words, &per_file);
        std::fs::write(&csv_path, table.emit(EmitFormat::Csv)?)
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    Ok(())
}

fn cmd_suggest(args: SuggestArgs) -> anyhow::Result<()> {
    let format = EmitFormat::parse(&args.format)?;
    let zd = WordHistogram::load(&args.zd)?;
    let hf = WordHistogram::load(&args.hf)?;
    let report = gap_report(&zd, &hf, args.top_k)?;
    print!("{}", report.emit(format)?);
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> anyhow::Result<()> {
    let format = EmitFormat::parse(&args.format)?;
    let th = parse_thresholds(&args.thresholds)?;
    let filter = args.filter.to_config()?;
    let card_text = read_text(&args.card)?;
    let card_paths = heading_paths(&parse_toc(&card_text));
    let card_hist = WordHistogram::from_tokens(tokenize(&card_text, &filter), "card");
    let zd_paths = heading_paths(&parse_toc(&read_text(&args.zd_headings)?));
    let zd_hist = WordHistogram::load(&args.zd_hist)?;
    let score = score_card(
        args.card.display().to_string(),
        &card_paths,
        &card_hist,
        &zd_paths,
        &zd_hist,
        &th,
    );
    print!("{}", score.emit(format)?);
    if format == EmitFormat::Json {
        println!();
    }
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.local_dir {
        cfg.local_dir = Some(v);
    }
    if let Some(v) = args.endpoint {
        cfg.endpoint = Some(v);
    }
    if let Some(v) = args.corpus_dir {
        cfg.corpus_dir = v;
    }
    if let Some(v) = args.output_dir {
        cfg.output_dir = v;
    }
    if let Some(v) = args.template {
        cfg.template_path = Some(v);
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let stages: Vec<Stage> = match &args.stages {
        Some(list) => list
            .split(',')
            .map(|s| Stage::parse(s.trim()))
            .collect::<Result<_, _>>()?,
        None => Stage::ALL.to_vec(),
    };
    let reports = run_pipeline(&cfg, &stages)?;
    for report in reports {
        let status = if report.skipped { "skipped (unchanged)" } else { "done" };
        let outputs: Vec<String> = report
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        eprintln!("stage {}: {} {}", report.stage, status, outputs.join(" "));
    }
    Ok(())
}
