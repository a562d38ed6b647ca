use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgrepair::embedding::{traverse_r, Canonicalization, EmbeddingOptions, Traversal};
use kgrepair::evalkit::{self, BenchmarkSpec, GoldLabel};
use kgrepair::graph_store::read_tuples;
use kgrepair::pattern::{extract_pattern, size_bound, NeighborhoodRule};
use kgrepair::repair::{read_records, DecisionLine, RecordLine, RepairConfig, UnknownPolicy};
use kgrepair::stream::{integrate_aux, LabelMap, StreamConfig};
use kgrepair::validation::{PatternSource, Status, ValidationConfig, Validator};
use kgrepair::{GraphStore, Symbols};

/// Validate and repair relation labels of candidate knowledge-graph tuples.
#[derive(Parser, Debug)]
#[command(name = "kgrepair", version, about)]
struct Cli {
    /// Worker threads for the parallel phases (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the slice-by-slice repair loop and write decisions and the enhanced graph
    Enhance(EnhanceArgs),
    /// Classify tuples from a TSV file against a graph
    Validate {
        #[arg(long)]
        graph: PathBuf,
        /// head<TAB>relation<TAB>tail lines
        #[arg(long)]
        tuples: PathBuf,
        #[command(flatten)]
        validation: ValidationArgs,
    },
    /// Print the path embedding of one tuple's localized pattern
    Embed {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        tuple: TupleArgs,
        #[command(flatten)]
        validation: ValidationArgs,
    },
    /// Score candidate relations for an entity pair by pattern similarity
    PredictLinks {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        head: String,
        #[arg(long)]
        tail: String,
        /// Comma-separated labels; defaults to every label in the graph
        #[arg(long, value_delimiter = ',')]
        relations: Vec<String>,
        #[command(flatten)]
        validation: ValidationArgs,
    },
    /// Swap the Top-1 and Top-2 labels of a seeded fraction of records
    InjectErrors {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify labeled facts and score the valid/invalid calls
    DetectErrors {
        #[arg(long)]
        graph: PathBuf,
        /// head<TAB>relation<TAB>tail<TAB>1|0 lines
        #[arg(long)]
        facts: PathBuf,
        /// Count Unknown as a true prediction
        #[arg(long)]
        unknown_as_true: bool,
        #[command(flatten)]
        validation: ValidationArgs,
    },
    /// Print graph statistics
    Stats {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 2)]
        l: u32,
    },
    /// Score a decision log against gold labels
    Score {
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Write a synthetic benchmark (graph, predictions, gold, labeled facts)
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Semantics {
    Union,
    Intersection,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Direction {
    Plain,
    Marked,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Policy {
    Accept,
    Hold,
    Reject,
}

#[derive(Args, Debug, Clone)]
struct ValidationArgs {
    /// Pattern radius and walk length
    #[arg(long, default_value_t = 2)]
    l: u32,
    #[arg(long, default_value_t = 10)]
    sample_size: usize,
    /// Similarity must exceed this to count as support
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Minimum support count for a valid tuple
    #[arg(long, default_value_t = 1)]
    delta: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sort label sequences (off keeps walk order)
    #[arg(long, value_enum, default_value_t = Switch::On)]
    sort_paths: Switch,
    #[arg(long, default_value_t = 0)]
    edit_tolerance: usize,
    #[arg(long, value_enum, default_value_t = Semantics::Union)]
    semantics: Semantics,
    #[arg(long, value_enum, default_value_t = Direction::Plain)]
    direction: Direction,
    /// Skip the capped full scan when the sample finds too little support
    #[arg(long)]
    no_escalate: bool,
    #[arg(long, default_value_t = 200)]
    scan_cap: usize,
}

impl ValidationArgs {
    fn config(&self) -> ValidationConfig {
        let rule = match self.semantics {
            Semantics::Union => NeighborhoodRule::Union,
            Semantics::Intersection => NeighborhoodRule::Intersection,
        };
        eprintln!("neighborhood semantics: {}", rule.name());
        ValidationConfig {
            l: self.l,
            theta: self.theta,
            delta: self.delta,
            sample_size: self.sample_size,
            seed: self.seed,
            escalate_full_scan: !self.no_escalate,
            scan_cap: self.scan_cap,
            edit_tolerance: self.edit_tolerance,
            embedding: EmbeddingOptions {
                canonicalization: match self.sort_paths {
                    Switch::On => Canonicalization::Sorted,
                    Switch::Off => Canonicalization::Positional,
                },
                traversal: match self.direction {
                    Direction::Plain => Traversal::Undirected,
                    Direction::Marked => Traversal::DirectionMarked,
                },
            },
            rule,
        }
    }
}

#[derive(Args, Debug)]
struct TupleArgs {
    #[arg(long)]
    head: String,
    #[arg(long)]
    relation: String,
    #[arg(long)]
    tail: String,
}

#[derive(Args, Debug)]
struct EnhanceArgs {
    #[arg(long)]
    graph: PathBuf,
    /// JSON Lines prediction records
    #[arg(long)]
    predictions: PathBuf,
    #[command(flatten)]
    validation: ValidationArgs,
    /// Candidate labels ranked per record
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Minimum Top-1 probability for the initial instance
    #[arg(long = "p-th", default_value_t = 0.0)]
    p_th: f64,
    #[arg(long, default_value_t = 1000)]
    slice_size: usize,
    #[arg(long, value_enum, default_value_t = Policy::Hold)]
    unknown_policy: Policy,
    /// Retries for held records before they are left to an administrator
    #[arg(long, default_value_t = 3)]
    max_hold: u32,
    #[arg(long, requires = "label_map")]
    aux_graph: Option<PathBuf>,
    /// aux_label<TAB>target_label lines
    #[arg(long, requires = "aux_graph")]
    label_map: Option<PathBuf>,
    /// Decision log (stdout when omitted)
    #[arg(long)]
    out_decisions: Option<PathBuf>,
    #[arg(long)]
    out_graph: Option<PathBuf>,
    /// Per-slice metrics as JSON Lines
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    labels: usize,
    #[arg(long, default_value_t = 100)]
    facts_per_label: usize,
    #[arg(long, default_value_t = 5000)]
    records: usize,
    #[arg(long, default_value_t = 4)]
    candidates: usize,
    #[arg(long)]
    no_na: bool,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 1000)]
    detection_facts: usize,
    #[arg(long, default_value_t = 0.2)]
    true_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_graph(path: &Path) -> Result<GraphStore> {
    Ok(GraphStore::load(path, Symbols::new())?)
}

fn enhance(args: &EnhanceArgs) -> Result<()> {
    let mut g = load_graph(&args.graph)?;
    let sym = g.symbols().clone();
    let aux = match (&args.aux_graph, &args.label_map) {
        (Some(aux), Some(map)) => Some(integrate_aux(&sym, aux, &LabelMap::load(map)?)?),
        _ => None,
    };
    let cfg = StreamConfig {
        slice_size: args.slice_size,
        repair: RepairConfig {
            k: args.k,
            p_threshold: args.p_th,
            unknown_policy: match args.unknown_policy {
                Policy::Accept => UnknownPolicy::Accept,
                Policy::Hold => UnknownPolicy::Hold,
                Policy::Reject => UnknownPolicy::Reject,
            },
            max_hold_iterations: args.max_hold,
            validation: args.validation.config(),
        },
    };
    let records = read_records(&args.predictions, &sym)?;
    let out = kgrepair::stream::run(&mut g, records, &cfg, aux.as_ref())?;
    if out.malformed > 0 {
        log::warn!("{} malformed prediction records skipped", out.malformed);
    }

    let mut w = output(args.out_decisions.as_deref())?;
    for d in &out.decisions {
        serde_json::to_writer(&mut w, &DecisionLine::from_decision(d, &sym))?;
        writeln!(w)?;
    }
    w.flush()?;
    if let Some(path) = &args.out_graph {
        g.save(path)?;
    }
    if let Some(path) = &args.metrics {
        let mut w = output(Some(path))?;
        for s in &out.slices {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    log::info!(
        "{} decisions over {} slices, graph now has {} edges",
        out.decisions.len(),
        out.slices.len(),
        g.edge_count()
    );
    Ok(())
}

fn validate(graph: &Path, tuples: &Path, args: &ValidationArgs) -> Result<()> {
    let g = load_graph(graph)?;
    let sym = g.symbols().clone();
    let cfg = args.config();
    cfg.check()?;
    let validator = Validator::new(&g, &cfg);
    let mut w = output(None)?;
    for s in read_tuples(tuples, &sym)? {
        let report = validator.classify(&s)?;
        let (h, r, t) = sym.tuple_names(&s);
        let witnesses: Vec<_> = report
            .witnesses
            .iter()
            .map(|wt| {
                serde_json::json!({
                    "center": sym.display(&wt.center).to_string(),
                    "source": match wt.source {
                        PatternSource::Native => "native",
                        PatternSource::Auxiliary => "auxiliary",
                    },
                    "similarity": wt.similarity,
                })
            })
            .collect();
        let line = serde_json::json!({
            "head": &*h,
            "relation": &*r,
            "tail": &*t,
            "status": report.status.unwrap_or(Status::Unknown).as_str(),
            "support": report.support_count,
            "escalated": report.escalated,
            "heuristic": report.heuristic,
            "witnesses": witnesses,
        });
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn embed(graph: &Path, tuple: &TupleArgs, args: &ValidationArgs) -> Result<()> {
    let g = load_graph(graph)?;
    let cfg = args.config();
    cfg.check()?;
    if tuple.relation == kgrepair::graph_store::NA_STR {
        bail!("cannot embed a tuple labelled NA");
    }
    let s = g.symbols().tuple(&tuple.head, &tuple.relation, &tuple.tail);
    let p = extract_pattern(&g, s, cfg.l, cfg.rule)?;
    let m = traverse_r(&p, cfg.l, cfg.embedding)?;
    let mut w = output(None)?;
    for line in m.lines(g.symbols()) {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn predict_links(graph: &Path, head: &str, tail: &str, relations: &[String], args: &ValidationArgs) -> Result<()> {
    let g = load_graph(graph)?;
    let sym = g.symbols().clone();
    let cfg = args.config();
    cfg.check()?;
    let labels: Vec<_> = if relations.is_empty() {
        g.relations().collect()
    } else {
        relations.iter().map(|r| sym.relation(r)).filter(|r| !r.is_na()).collect()
    };
    let validator = Validator::new(&g, &cfg);
    let (h, t) = (sym.entity(head), sym.entity(tail));
    let mut scored = labels
        .into_iter()
        .map(|r| Ok((sym.relation_name(r), validator.predict_link(h, t, r)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut w = output(None)?;
    for (r, score) in scored {
        writeln!(w, "{r}\t{score:.6}")?;
    }
    w.flush()?;
    Ok(())
}

fn inject(predictions: &Path, rate: f64, seed: u64, out: Option<&Path>) -> Result<()> {
    let sym = Symbols::new();
    let records = read_records(predictions, &sym)?
        .into_iter()
        .collect::<kgrepair::Result<Vec<_>>>()?;
    let injected = evalkit::inject_errors(&records, rate, seed)?;
    let mut w = output(out)?;
    for r in &injected {
        serde_json::to_writer(&mut w, &RecordLine::from_record(r, &sym))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn detect(graph: &Path, facts: &Path, unknown_as_true: bool, args: &ValidationArgs) -> Result<()> {
    let g = load_graph(graph)?;
    let facts = evalkit::read_labeled_facts(facts, g.symbols())?;
    let out = evalkit::detect_errors(&g, &facts, &args.config(), unknown_as_true)?;
    println!("{}", serde_json::to_string(&out.report)?);
    Ok(())
}

fn stats(graph: &Path, l: u32) -> Result<()> {
    let g = load_graph(graph)?;
    let d = g.degree_stats();
    let report = serde_json::json!({
        "vertices": d.vertices,
        "edges": d.edges,
        "relations": g.relations().count(),
        "max_degree": d.max_degree,
        "l": l,
        "pattern_size_bound": size_bound(d.max_degree, l).to_string(),
    });
    println!("{report}");
    Ok(())
}

fn score(decisions: &Path, gold: &Path) -> Result<()> {
    let sym = Symbols::new();
    let text = std::fs::read_to_string(decisions).with_context(|| format!("cannot read {}", decisions.display()))?;
    let mut ds = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d: DecisionLine = serde_json::from_str(line).map_err(|e| kgrepair::Error::Format {
            path: decisions.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        ds.push(d.into_decision(&sym));
    }
    let gold = evalkit::read_gold(gold)?;
    println!("{}", serde_json::to_string(&evalkit::score(&ds, &gold, &sym)?)?);
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let spec = BenchmarkSpec {
        labels: args.labels,
        facts_per_label: args.facts_per_label,
        records: args.records,
        candidates: args.candidates,
        include_na: !args.no_na,
        density: args.density,
        detection_facts: args.detection_facts,
        true_fraction: args.true_fraction,
        seed: args.seed,
    };
    let b = evalkit::benchmark_generate(&spec)?;
    let sym = b.graph.symbols();
    std::fs::create_dir_all(&args.out_dir)?;
    b.graph.save(&args.out_dir.join("graph.tsv"))?;

    let mut w = output(Some(&args.out_dir.join("predictions.jsonl")))?;
    for r in &b.records {
        serde_json::to_writer(&mut w, &RecordLine::from_record(r, sym))?;
        writeln!(w)?;
    }
    w.flush()?;

    let mut w = output(Some(&args.out_dir.join("gold.jsonl")))?;
    for g in &b.gold {
        serde_json::to_writer(&mut w, g as &GoldLabel)?;
        writeln!(w)?;
    }
    w.flush()?;

    let mut w = output(Some(&args.out_dir.join("facts.tsv")))?;
    for (s, truth) in &b.facts {
        writeln!(w, "{}\t{}", sym.display(s), u8::from(*truth))?;
    }
    w.flush()?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Enhance(args) => enhance(&args),
        Command::Validate {
            graph,
            tuples,
            validation,
        } => validate(&graph, &tuples, &validation),
        Command::Embed {
            graph,
            tuple,
            validation,
        } => embed(&graph, &tuple, &validation),
        Command::PredictLinks {
            graph,
            head,
            tail,
            relations,
            validation,
        } => predict_links(&graph, &head, &tail, &relations, &validation),
        Command::InjectErrors {
            predictions,
            rate,
            seed,
            out,
        } => inject(&predictions, rate, seed, out.as_deref()),
        Command::DetectErrors {
            graph,
            facts,
            unknown_as_true,
            validation,
        } => detect(&graph, &facts, unknown_as_true, &validation),
        Command::Stats { graph, l } => stats(&graph, l),
        Command::Score { decisions, gold } => score(&decisions, &gold),
        Command::Generate(args) => generate(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let input_format = e
                .chain()
                .any(|c| c.downcast_ref::<kgrepair::Error>().is_some_and(kgrepair::Error::is_input_format));
            ExitCode::from(if input_format { 2 } else { 1 })
        }
    }
}
