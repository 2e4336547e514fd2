use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use lsca::container::{self, FittedModel, ModelManifest};
use lsca::corpus::{
    build_matrix, load_dataset_with_sides, subsample_categories, DatasetFormat,
    DocumentTermMatrix, DropReport, PreprocessConfig, Preprocessor, RawDocument,
};
use lsca::embed::{fit_ca, fit_lsa, Method};
use lsca::error::{Error, Result};
use lsca::eval::{write_per_query_ap_csv, Regime};
use lsca::harness::{
    default_alpha_grid, default_k_grid, parse_cells_csv, run_sweep, summarize,
    write_alpha_inertia_csv, write_cells_csv, write_coordinates_csv, write_map_vs_alpha_csv,
    write_map_vs_k_csv, write_summary_csv, EvalMethod, Manifest, SummaryMode, SweepConfig,
    SweepReport,
};
use lsca::retrieval::{rank, score, Metric};
use lsca::weighting::{apply_weighting, fit_weighting, SchemeTag};

#[derive(Parser)]
#[command(
    name = "lsca",
    version,
    about = "LSA and CA document retrieval: fit reduced spaces, project queries, sweep (k, alpha) grids under cross-validation"
)]
struct Cli {
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

/// Where documents come from: a previously ingested container or a raw
/// dataset processed on the fly.
#[derive(Args)]
struct SourceArgs {
    /// Previously ingested matrix container
    #[arg(long, conflicts_with_all = ["dataset", "format", "config"])]
    matrix: Option<PathBuf>,
    /// Dataset root (category/file tree or TSV)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// dirtree | tsv | tokens
    #[arg(long, default_value = "dirtree")]
    format: String,
    /// Preprocessing config (TOML or JSON)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset, preprocess it and store the count matrix
    Ingest {
        #[arg(long)]
        dataset: PathBuf,
        /// dirtree | tsv | tokens
        #[arg(long, default_value = "dirtree")]
        format: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Keep only these categories (comma separated)
        #[arg(long)]
        categories: Option<String>,
        /// Randomly keep this many documents of --categories
        #[arg(long, requires = "categories")]
        subsample: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one weighted embedding and store the model
    Fit {
        #[command(flatten)]
        source: SourceArgs,
        /// lsa | ca
        #[arg(long)]
        method: String,
        /// raw | nrowl1 | nrowl2 | tfidf
        #[arg(long, default_value = "raw")]
        scheme: String,
        /// Retained dimensions
        #[arg(long)]
        k: usize,
        /// Singular value exponent
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank the training documents against a query
    Query {
        #[arg(long)]
        model: PathBuf,
        /// Free text, preprocessed like the corpus
        #[arg(long)]
        text: Option<String>,
        /// Read the query text from a file
        #[arg(long, conflicts_with = "text")]
        file: Option<PathBuf>,
        /// euclidean | dot | cosine
        #[arg(long, default_value = "euclidean")]
        metric: String,
        /// Override the model's exponent
        #[arg(long)]
        alpha: Option<f64>,
        /// Rows to print (0 = all)
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Query id for TREC-style output
        #[arg(long, default_value = "q1")]
        id: String,
        /// Category for relevance marking; also reports the AP
        #[arg(long)]
        category: Option<String>,
        /// Emit `qid docid rank score` lines
        #[arg(long)]
        trec: bool,
    },
    /// Cross-validated MAP over the (k, alpha) grid
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        /// Comma separated: lsa, ca, termmatch, or `all`
        #[arg(long, default_value = "lsa,ca")]
        methods: String,
        /// Comma separated: raw, nrowl1, nrowl2, tfidf, or `all`
        #[arg(long, default_value = "raw")]
        schemes: String,
        /// Comma separated: euclidean, dot, cosine, or `all`
        #[arg(long, default_value = "euclidean")]
        metrics: String,
        /// E.g. `1..20,22..50:2,60..100:10`; defaults to the full grid
        #[arg(long = "k-grid")]
        k_grid: Option<String>,
        /// E.g. `-6..-2:0.5,-1.8..4:0.2,4.5..8:0.5`; defaults to the full grid
        #[arg(long = "alpha-grid")]
        alpha_grid: Option<String>,
        /// loocv | kfold:N | fixed:FRAC | predefined
        #[arg(long, default_value = "loocv")]
        splits: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for cells.csv, summary.csv, per_query.csv, manifest.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a cells.csv to the best cell per configuration
    Summarize {
        #[arg(long)]
        cells: PathBuf,
        /// joint | alpha:A | k:K
        #[arg(long, default_value = "joint")]
        mode: String,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit plot-ready CSVs from a sweep or a fitted model
    Plotdata {
        /// cells.csv from a sweep: writes map_vs_k.csv and map_vs_alpha.csv
        #[arg(long)]
        cells: Option<PathBuf>,
        /// Fitted model: writes coordinates.csv and alpha_inertia.csv
        #[arg(long)]
        model: Option<PathBuf>,
        /// Alpha slice for the MAP-vs-k curve
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the built-in 6x6 worked example
    Toy {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    if let Err(e) = run(cli.command) {
        let payload = serde_json::json!({
            "error": e.kind(),
            "message": e.to_string(),
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}

fn parse_format(s: &str) -> Result<DatasetFormat> {
    s.parse()
}

fn load_config(path: &Option<PathBuf>) -> Result<PreprocessConfig> {
    match path {
        Some(p) => PreprocessConfig::from_file(p),
        None => Ok(PreprocessConfig::default()),
    }
}

fn list_of<T>(s: &str, all: &[T]) -> Result<Vec<T>>
where
    T: std::str::FromStr<Err = Error> + Clone,
{
    if s.trim() == "all" {
        return Ok(all.to_vec());
    }
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse())
        .collect()
}

/// `1,2,3` or ranges `a..b` / `a..b:step`, comma separated.
fn parse_k_grid(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for piece in s.split(',').map(|p| p.trim()).filter(|p| !p.is_empty()) {
        match piece.split_once("..") {
            None => out.push(
                piece
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad k value `{piece}`")))?,
            ),
            Some((a, rest)) => {
                let (b, step) = match rest.split_once(':') {
                    None => (rest, "1"),
                    Some((b, s)) => (b, s),
                };
                let a: usize = a
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad k range start `{a}`")))?;
                let b: usize = b
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad k range end `{b}`")))?;
                let step: usize = step
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad k step `{step}`")))?;
                if step == 0 || b < a {
                    return Err(Error::InvalidInput(format!("bad k range `{piece}`")));
                }
                out.extend((a..=b).step_by(step));
            }
        }
    }
    Ok(out)
}

fn parse_alpha_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::InvalidInput(format!("bad alpha grid piece `{what}`"));
    let mut out = Vec::new();
    for piece in s.split(',').map(|p| p.trim()).filter(|p| !p.is_empty()) {
        // a range needs `..` with a digit on the right (to not split on
        // the dot of a negative decimal such as `-1.8`)
        match piece.find("..") {
            None => out.push(piece.parse().map_err(|_| bad(piece))?),
            Some(pos) => {
                let a: f64 = piece[..pos].parse().map_err(|_| bad(piece))?;
                let rest = &piece[pos + 2..];
                let (b, step): (f64, f64) = match rest.rsplit_once(':') {
                    None => (rest.parse().map_err(|_| bad(piece))?, 1.0),
                    Some((b, s)) => (
                        b.parse().map_err(|_| bad(piece))?,
                        s.parse().map_err(|_| bad(piece))?,
                    ),
                };
                if step <= 0.0 || b < a {
                    return Err(bad(piece));
                }
                let n = ((b - a) / step).round() as usize;
                for i in 0..=n {
                    let v = a + i as f64 * step;
                    if v <= b + 1e-9 {
                        out.push(v);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn parse_splits(s: &str, seed: u64, sides: Option<(Vec<usize>, Vec<usize>)>) -> Result<Regime> {
    let lower = s.to_ascii_lowercase();
    if lower == "loocv" {
        return Ok(Regime::Loocv);
    }
    if lower == "predefined" {
        let (train, validation) = sides.ok_or_else(|| {
            Error::InvalidSplit(
                "predefined splits need a dataset with train/ and test/ subdirectories".into(),
            )
        })?;
        return Ok(Regime::Predefined { train, validation });
    }
    if let Some(rest) = lower.strip_prefix("kfold:") {
        let folds: usize = rest
            .parse()
            .map_err(|_| Error::InvalidSplit(format!("bad fold count `{rest}`")))?;
        return Ok(Regime::KFold { folds, seed });
    }
    if let Some(rest) = lower.strip_prefix("fixed:") {
        let train_frac: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidSplit(format!("bad train fraction `{rest}`")))?;
        return Ok(Regime::Fixed { train_frac, seed });
    }
    Err(Error::InvalidSplit(format!(
        "unknown split regime `{s}` (expected loocv, kfold:N, fixed:FRAC, predefined)"
    )))
}

struct LoadedSource {
    matrix: DocumentTermMatrix,
    preprocess: PreprocessConfig,
    drop_report: Option<DropReport>,
    sides: Option<(Vec<usize>, Vec<usize>)>,
    dataset: Option<String>,
    format: Option<String>,
}

fn load_source(source: &SourceArgs) -> Result<LoadedSource> {
    match (&source.matrix, &source.dataset) {
        (Some(path), _) => {
            let (matrix, preprocess) = container::load_matrix(path)?;
            Ok(LoadedSource {
                matrix,
                preprocess,
                drop_report: None,
                sides: None,
                dataset: None,
                format: None,
            })
        }
        (None, Some(root)) => {
            let format = parse_format(&source.format)?;
            let preprocess = load_config(&source.config)?;
            let (docs, raw_sides) = load_dataset_with_sides(root, format)?;
            let pp = Preprocessor::new(preprocess.clone())?;
            let tokenized: Vec<_> = docs.iter().map(|d| pp.tokenize_doc(d)).collect();
            let (matrix, report) = build_matrix(&tokenized, preprocess.min_term_freq)?;
            // build_matrix may drop emptied documents, shifting indices;
            // remap the predefined sides through the surviving ids
            let sides = raw_sides.map(|(train, validation)| {
                let surviving: std::collections::HashMap<&str, usize> = matrix
                    .doc_ids()
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.as_str(), i))
                    .collect();
                let remap = |side: Vec<usize>| {
                    side.into_iter()
                        .filter_map(|i| surviving.get(docs[i].id.as_str()).copied())
                        .collect::<Vec<_>>()
                };
                (remap(train), remap(validation))
            });
            Ok(LoadedSource {
                matrix,
                preprocess,
                drop_report: Some(report),
                sides,
                dataset: Some(root.display().to_string()),
                format: Some(source.format.clone()),
            })
        }
        (None, None) => Err(Error::InvalidInput(
            "provide either --matrix or --dataset".into(),
        )),
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            dataset,
            format,
            config,
            categories,
            subsample,
            out,
        } => {
            let format = parse_format(&format)?;
            let preprocess = load_config(&config)?;
            let mut docs = lsca::corpus::load_dataset(&dataset, format)?;
            if let Some(cats) = categories {
                let wanted: Vec<String> =
                    cats.split(',').map(|c| c.trim().to_string()).collect();
                docs = match subsample {
                    Some(n) => subsample_categories(&docs, &wanted, n, preprocess.seed),
                    None => docs
                        .into_iter()
                        .filter(|d| wanted.contains(&d.category))
                        .collect::<Vec<RawDocument>>(),
                };
                if docs.is_empty() {
                    return Err(Error::EmptyDataset(
                        "no documents left after category selection".into(),
                    ));
                }
            }
            let pp = Preprocessor::new(preprocess.clone())?;
            let tokenized: Vec<_> = docs.iter().map(|d| pp.tokenize_doc(d)).collect();
            let (matrix, report) = build_matrix(&tokenized, preprocess.min_term_freq)?;
            container::save_matrix(&out, &matrix, &preprocess)?;
            let summary = serde_json::json!({
                "out": out.display().to_string(),
                "docs": matrix.n_docs(),
                "terms": matrix.n_terms(),
                "retained_tokens": report.retained_tokens,
                "dropped_docs": report.dropped_docs.len(),
                "dropped_terms": report.dropped_terms,
            });
            println!("{summary}");
            Ok(())
        }
        Command::Fit {
            source,
            method,
            scheme,
            k,
            alpha,
            out,
        } => {
            let loaded = load_source(&source)?;
            let method: Method = method.parse()?;
            let scheme: SchemeTag = scheme.parse()?;
            let fitted = fit_weighting(&loaded.matrix, scheme)?;
            let weighted = apply_weighting(&fitted, &loaded.matrix)?;
            let embedding = match method {
                Method::Lsa => fit_lsa(&weighted, k)?,
                Method::Ca => fit_ca(&weighted, k)?,
            }
            .set_alpha(alpha);
            let model = FittedModel {
                embedding,
                weighting: fitted,
                doc_ids: loaded.matrix.doc_ids().to_vec(),
                categories: loaded.matrix.categories().to_vec(),
                vocabulary: loaded.matrix.vocabulary().clone(),
                preprocess: loaded.preprocess,
            };
            container::save_model(&out, &model)?;
            let manifest = ModelManifest::of(&model);
            println!("{}", serde_json::to_string(&manifest).unwrap());
            Ok(())
        }
        Command::Query {
            model,
            text,
            file,
            metric,
            alpha,
            top,
            id,
            category,
            trec,
        } => {
            let model = container::load_model(&model)?;
            let metric: Metric = metric.parse()?;
            let text = match (text, file) {
                (Some(t), _) => t,
                (None, Some(f)) => fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?,
                (None, None) => {
                    return Err(Error::InvalidInput("provide --text or --file".into()))
                }
            };
            let pp = Preprocessor::new(model.preprocess.clone())?;
            let tokens = pp.process_text(&text);
            let (cols, vals) = model.count_row(&tokens);
            if cols.is_empty() {
                return Err(Error::InvalidInput(
                    "query has no terms in the model vocabulary".into(),
                ));
            }
            let weighted = model.weighting.weigh_row(&cols, &vals)?;
            let embedding = match alpha {
                Some(a) => model.embedding.set_alpha(a),
                None => model.embedding.clone(),
            };
            let point = embedding.project_query(&cols, &weighted)?;
            let docs = embedding.doc_coordinates();
            let scores = score(point.view(), docs.points.view(), metric)?;
            let qcat = category.as_deref().unwrap_or("");
            let list = rank(&id, &scores, metric, &model.doc_ids, &model.categories, qcat)?;
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            let shown = if top == 0 { list.entries.len() } else { top };
            if trec {
                for (pos, e) in list.entries.iter().take(shown).enumerate() {
                    writeln!(w, "{} {} {} {:.6}", list.query_id, e.doc_id, pos + 1, e.score)
                        .map_err(|e| Error::io("stdout", e))?;
                }
            } else {
                for (pos, e) in list.entries.iter().take(shown).enumerate() {
                    writeln!(
                        w,
                        "{}\t{:.6}\t{}\t{}",
                        pos + 1,
                        e.score,
                        e.doc_id,
                        model.categories[e.doc_index]
                    )
                    .map_err(|e| Error::io("stdout", e))?;
                }
            }
            if category.is_some() {
                let flags = list.relevance_flags();
                let total = list.total_relevant();
                let ap = lsca::eval::ap_from_flags(&flags, total);
                writeln!(w, "AP\t{ap:.6}").map_err(|e| Error::io("stdout", e))?;
            }
            Ok(())
        }
        Command::Sweep {
            source,
            methods,
            schemes,
            metrics,
            k_grid,
            alpha_grid,
            splits,
            seed,
            out,
        } => {
            let loaded = load_source(&source)?;
            let cfg = SweepConfig {
                methods: list_of(&methods, &EvalMethod::ALL)?,
                schemes: list_of(&schemes, &SchemeTag::ALL)?,
                metrics: list_of(&metrics, &Metric::ALL)?,
                k_grid: match k_grid {
                    Some(s) => parse_k_grid(&s)?,
                    None => default_k_grid(),
                },
                alpha_grid: match alpha_grid {
                    Some(s) => parse_alpha_grid(&s)?,
                    None => default_alpha_grid(),
                },
                regime: parse_splits(&splits, seed, loaded.sides)?,
                seed,
            };
            let mut report = run_sweep(&loaded.matrix, &cfg)?;
            report.manifest.dataset = loaded.dataset;
            report.manifest.format = loaded.format;
            report.manifest.preprocess = Some(loaded.preprocess);
            report.manifest.drop_report = loaded.drop_report;
            write_report(&out, &report)?;
            let done = serde_json::json!({
                "out": out.display().to_string(),
                "cells": report.cells.len(),
                "failures": report.manifest.failures.len(),
                "folds": report.manifest.n_folds,
            });
            println!("{done}");
            Ok(())
        }
        Command::Summarize { cells, mode, out } => {
            let text = fs::read_to_string(&cells).map_err(|e| Error::io(&cells, e))?;
            let report = SweepReport {
                cells: parse_cells_csv(&text)?,
                manifest: Manifest::default(),
                best_cell_queries: Vec::new(),
            };
            let mode = parse_summary_mode(&mode)?;
            let rows = summarize(&report, mode)?;
            let mut buf = Vec::new();
            write_summary_csv(&mut buf, &rows).map_err(|e| Error::io("summary", e))?;
            match out {
                Some(path) => write_out(&path, &buf)?,
                None => print!("{}", String::from_utf8_lossy(&buf)),
            }
            Ok(())
        }
        Command::Plotdata {
            cells,
            model,
            alpha,
            out,
        } => {
            if cells.is_none() && model.is_none() {
                return Err(Error::InvalidInput(
                    "provide --cells and/or --model".into(),
                ));
            }
            create_out_dir(&out)?;
            if let Some(path) = cells {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let parsed = parse_cells_csv(&text)?;
                let mut buf = Vec::new();
                write_map_vs_k_csv(&mut buf, &parsed, alpha)
                    .map_err(|e| Error::io("map_vs_k", e))?;
                write_out(&out.join("map_vs_k.csv"), &buf)?;
                let mut buf = Vec::new();
                write_map_vs_alpha_csv(&mut buf, &parsed)
                    .map_err(|e| Error::io("map_vs_alpha", e))?;
                write_out(&out.join("map_vs_alpha.csv"), &buf)?;
            }
            if let Some(path) = model {
                let model = container::load_model(&path)?;
                let mut buf = Vec::new();
                write_coordinates_csv(
                    &mut buf,
                    &model.embedding,
                    &model.doc_ids,
                    model.vocabulary.terms(),
                )
                .map_err(|e| Error::io("coordinates", e))?;
                write_out(&out.join("coordinates.csv"), &buf)?;
                let mut buf = Vec::new();
                write_alpha_inertia_csv(&mut buf, &model.embedding)
                    .map_err(|e| Error::io("alpha_inertia", e))?;
                write_out(&out.join("alpha_inertia.csv"), &buf)?;
            }
            Ok(())
        }
        Command::Toy { out } => {
            let report = lsca::toy::toy_report()?;
            match out {
                Some(path) => write_out(&path, report.as_bytes())?,
                None => print!("{report}"),
            }
            Ok(())
        }
    }
}

fn parse_summary_mode(s: &str) -> Result<SummaryMode> {
    let lower = s.to_ascii_lowercase();
    if lower == "joint" {
        return Ok(SummaryMode::JointOptimum);
    }
    if let Some(rest) = lower.strip_prefix("alpha:") {
        let a: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad alpha `{rest}`")))?;
        return Ok(SummaryMode::FixedAlpha(a));
    }
    if let Some(rest) = lower.strip_prefix("k:") {
        let k: usize = rest
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad k `{rest}`")))?;
        return Ok(SummaryMode::FixedK(k));
    }
    Err(Error::InvalidInput(format!(
        "unknown summary mode `{s}` (expected joint, alpha:A, k:K)"
    )))
}

fn write_report(dir: &Path, report: &SweepReport) -> Result<()> {
    create_out_dir(dir)?;
    let mut buf = Vec::new();
    write_cells_csv(&mut buf, &report.cells).map_err(|e| Error::io("cells", e))?;
    write_out(&dir.join("cells.csv"), &buf)?;

    if let Ok(rows) = summarize(report, SummaryMode::JointOptimum) {
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &rows).map_err(|e| Error::io("summary", e))?;
        write_out(&dir.join("summary.csv"), &buf)?;
    }

    let mut buf = Vec::new();
    write_per_query_ap_csv(&mut buf, &report.best_cell_queries)
        .map_err(|e| Error::io("per_query", e))?;
    write_out(&dir.join("per_query.csv"), &buf)?;

    let json = serde_json::to_string_pretty(&report.manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    write_out(&dir.join("manifest.json"), json.as_bytes())?;
    Ok(())
}
