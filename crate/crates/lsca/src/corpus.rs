//! Dataset ingestion: raw documents, the preprocessing pipeline, and
//! document-term matrix construction.
//!
//! Three on-disk layouts are supported:
//!
//! * `dir`: `root/<category>/<docid>.txt`, one file per document;
//! * `tsv`: one record per line, `id<TAB>category<TAB>text`;
//! * `tokenized-tsv`: `id<TAB>category<TAB>tok1 tok2 ...` for corpora that
//!   arrive pre-lemmatized.
//!
//! Everything is deterministic: directory entries are sorted, the
//! vocabulary is ordered lexicographically, and document order follows the
//! input order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseRowMatrix;

/// Compact English stopword list used when the config does not name a file.
const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords_en.txt");

/// Document body: plain text, or tokens for pre-tokenized corpora.
#[derive(Debug, Clone, PartialEq)]
pub enum DocContent {
    Text(String),
    Tokens(Vec<String>),
}

/// One ingested document before preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDocument {
    pub id: String,
    pub category: String,
    pub content: DocContent,
}

/// A document after preprocessing, ready for matrix construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedDocument {
    pub id: String,
    pub category: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    /// `root/<category>/<file>` tree.
    DirTree,
    /// `id<TAB>category<TAB>text` records.
    Tsv,
    /// `id<TAB>category<TAB>tok1 tok2 ...` records.
    TokenizedTsv,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dir" | "tree" | "dirtree" => Ok(DatasetFormat::DirTree),
            "tsv" => Ok(DatasetFormat::Tsv),
            "tokenized-tsv" | "tokenized_tsv" | "tokens" => Ok(DatasetFormat::TokenizedTsv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DatasetFormat::DirTree => "dir",
            DatasetFormat::Tsv => "tsv",
            DatasetFormat::TokenizedTsv => "tokenized-tsv",
        };
        f.write_str(s)
    }
}

/// Load a dataset directory (or file, for the TSV layouts).
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<RawDocument>> {
    let docs = match format {
        DatasetFormat::DirTree => load_dir_tree(path)?,
        DatasetFormat::Tsv => load_tsv(path, false)?,
        DatasetFormat::TokenizedTsv => load_tsv(path, true)?,
    };
    if docs.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    let mut seen = HashSet::new();
    for d in &docs {
        if d.category.is_empty() {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                detail: format!("document `{}` has an empty category", d.id),
            });
        }
        if !seen.insert(d.id.clone()) {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                detail: format!("duplicate document id `{}`", d.id),
            });
        }
    }
    Ok(docs)
}

/// Documents plus the dataset's own (train, validation) index split when
/// the layout defines one.
pub type DatasetWithSides = (Vec<RawDocument>, Option<(Vec<usize>, Vec<usize>)>);

/// Like [`load_dataset`], but if `root` holds exactly `train/` and `test/`
/// subtrees (the 20-Newsgroups layout), both sides are loaded and the
/// predefined train/validation index split is returned alongside.
pub fn load_dataset_with_sides(path: &Path, format: DatasetFormat) -> Result<DatasetWithSides> {
    if format == DatasetFormat::DirTree {
        let train_dir = path.join("train");
        let test_dir = path.join("test");
        if train_dir.is_dir() && test_dir.is_dir() {
            let mut docs = Vec::new();
            let train = load_dir_tree(&train_dir)?;
            for mut d in train {
                d.id = format!("train/{}", d.id);
                docs.push(d);
            }
            let n_train = docs.len();
            let test = load_dir_tree(&test_dir)?;
            for mut d in test {
                d.id = format!("test/{}", d.id);
                docs.push(d);
            }
            if docs.is_empty() {
                return Err(Error::EmptyDataset(path.display().to_string()));
            }
            let split = (
                (0..n_train).collect::<Vec<_>>(),
                (n_train..docs.len()).collect::<Vec<_>>(),
            );
            return Ok((docs, Some(split)));
        }
    }
    Ok((load_dataset(path, format)?, None))
}

fn load_dir_tree(root: &Path) -> Result<Vec<RawDocument>> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut categories: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    categories.sort();
    let mut docs = Vec::new();
    for cat_dir in &categories {
        let category = cat_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = fs::read_dir(cat_dir)
            .map_err(|e| Error::io(cat_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::EmptyCategory(category));
        }
        for f in files {
            let bytes = fs::read(&f).map_err(|e| Error::io(&f, e))?;
            let text = String::from_utf8_lossy(&bytes).into_owned();
            let stem = f
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            docs.push(RawDocument {
                id: format!("{category}/{stem}"),
                category: category.clone(),
                content: DocContent::Text(text),
            });
        }
    }
    Ok(docs)
}

fn load_tsv(path: &Path, tokenized: bool) -> Result<Vec<RawDocument>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (id, category, body) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::MalformedRecord {
                    path: path.to_path_buf(),
                    detail: format!("line {}: expected 3 tab-separated fields", lineno + 1),
                })
            }
        };
        let content = if tokenized {
            DocContent::Tokens(
                body.split_whitespace()
                    .map(|t| t.to_string())
                    .collect(),
            )
        } else {
            DocContent::Text(body.to_string())
        };
        docs.push(RawDocument {
            id: id.to_string(),
            category: category.to_string(),
            content,
        });
    }
    Ok(docs)
}

/// Deterministically draw `n` documents from the given categories.
/// Selected documents keep their original relative order.
pub fn subsample_categories(
    docs: &[RawDocument],
    categories: &[String],
    n: usize,
    seed: u64,
) -> Vec<RawDocument> {
    let wanted: HashSet<&str> = categories.iter().map(|s| s.as_str()).collect();
    let mut pool: Vec<usize> = docs
        .iter()
        .enumerate()
        .filter(|(_, d)| wanted.is_empty() || wanted.contains(d.category.as_str()))
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool.truncate(n);
    pool.sort_unstable();
    pool.into_iter().map(|i| docs[i].clone()).collect()
}

/// Preprocessing switches. Loaded from a TOML or JSON file; every stage can
/// be toggled independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub strip_punct: bool,
    pub strip_numbers: bool,
    pub remove_stopwords: bool,
    /// One word per line; when unset the built-in English list is used.
    pub stopword_path: Option<PathBuf>,
    pub lemmatize: bool,
    pub strip_headers: bool,
    pub min_term_freq: u32,
    pub seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            strip_punct: true,
            strip_numbers: true,
            remove_stopwords: true,
            stopword_path: None,
            lemmatize: false,
            strip_headers: false,
            min_term_freq: 10,
            seed: 0,
        }
    }
}

impl PreprocessConfig {
    /// Parse from a TOML (`.toml`) or JSON (anything else) file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        Ok(cfg)
    }
}

/// Pluggable per-token lemmatizer hook.
pub type Lemmatizer = Arc<dyn Fn(&str) -> String + Send + Sync>;

/// Applies the preprocessing pipeline. The lemmatizer defaults to the
/// identity; callers with a real lemmatizer install it via
/// [`Preprocessor::with_lemmatizer`].
#[derive(Clone)]
pub struct Preprocessor {
    config: PreprocessConfig,
    stopwords: HashSet<String>,
    lemmatizer: Option<Lemmatizer>,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig) -> Result<Self> {
        let stopwords = if config.remove_stopwords {
            match &config.stopword_path {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    text.lines()
                        .map(|l| l.trim().to_string())
                        .filter(|l| !l.is_empty())
                        .collect()
                }
                None => DEFAULT_STOPWORDS
                    .lines()
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .collect(),
            }
        } else {
            HashSet::new()
        };
        Ok(Preprocessor {
            config,
            stopwords,
            lemmatizer: None,
        })
    }

    pub fn with_lemmatizer(mut self, f: Lemmatizer) -> Self {
        self.lemmatizer = Some(f);
        self
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    /// Run the pipeline on one document.
    pub fn preprocess(&self, doc: &RawDocument) -> Vec<String> {
        match &doc.content {
            DocContent::Text(text) => self.process_text(text),
            DocContent::Tokens(tokens) => self.process_tokens(tokens),
        }
    }

    pub fn tokenize_doc(&self, doc: &RawDocument) -> TokenizedDocument {
        TokenizedDocument {
            id: doc.id.clone(),
            category: doc.category.clone(),
            tokens: self.preprocess(doc),
        }
    }

    /// Preprocess free query text with the same pipeline.
    pub fn process_text(&self, text: &str) -> Vec<String> {
        let cfg = &self.config;
        let body = if cfg.strip_headers {
            strip_header_block(text)
        } else {
            text
        };
        let mut cleaned = String::with_capacity(body.len());
        for ch in body.chars() {
            let ch = if cfg.lowercase {
                // to_lowercase may expand to several chars
                let mut it = ch.to_lowercase();
                let first = it.next().unwrap_or(ch);
                for extra in it {
                    cleaned.push(map_char(extra, cfg));
                }
                first
            } else {
                ch
            };
            cleaned.push(map_char(ch, cfg));
        }
        cleaned
            .split_whitespace()
            .filter(|t| !self.is_stopword(t))
            .map(|t| self.lemma(t))
            .filter(|t| !t.is_empty())
            .collect()
    }

    fn process_tokens(&self, tokens: &[String]) -> Vec<String> {
        let cfg = &self.config;
        tokens
            .iter()
            .map(|t| {
                let t = if cfg.lowercase {
                    t.to_lowercase()
                } else {
                    t.clone()
                };
                t.chars()
                    .filter(|&c| {
                        !(cfg.strip_punct && is_punct(c)) && !(cfg.strip_numbers && c.is_numeric())
                    })
                    .collect::<String>()
            })
            .filter(|t| !t.is_empty() && !self.is_stopword(t))
            .map(|t| self.lemma(&t))
            .filter(|t| !t.is_empty())
            .collect()
    }

    fn is_stopword(&self, t: &str) -> bool {
        self.config.remove_stopwords && self.stopwords.contains(t)
    }

    fn lemma(&self, t: &str) -> String {
        if self.config.lemmatize {
            if let Some(f) = &self.lemmatizer {
                return f(t);
            }
        }
        t.to_string()
    }
}

fn map_char(ch: char, cfg: &PreprocessConfig) -> char {
    let stripped = (cfg.strip_punct && is_punct(ch)) || (cfg.strip_numbers && ch.is_numeric());
    if stripped {
        ' '
    } else {
        ch
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Drop an RFC-822-ish header block (`Field: value` lines up to the first
/// blank line). Used for newsgroup messages.
fn strip_header_block(text: &str) -> &str {
    let first_line = text.lines().next().unwrap_or("");
    let looks_like_header = first_line
        .split_once(':')
        .is_some_and(|(name, _)| {
            !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-')
        });
    if !looks_like_header {
        return text;
    }
    match text.find("\n\n") {
        Some(pos) => &text[pos + 2..],
        None => text,
    }
}

/// Ordered vocabulary with per-term document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    doc_frequency: Vec<u32>,
}

impl Vocabulary {
    pub(crate) fn from_parts(terms: Vec<String>, doc_frequency: Vec<u32>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            terms,
            index,
            doc_frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, j: usize) -> &str {
        &self.terms[j]
    }

    pub fn position(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn doc_frequency(&self, j: usize) -> u32 {
        self.doc_frequency[j]
    }

    pub fn doc_frequencies(&self) -> &[u32] {
        &self.doc_frequency
    }

    /// Map a token multiset to a sparse count row over this vocabulary.
    /// Unknown tokens are ignored.
    pub fn count_row(&self, tokens: &[String]) -> (Vec<u32>, Vec<f64>) {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for t in tokens {
            if let Some(j) = self.position(t) {
                *counts.entry(j).or_insert(0.0) += 1.0;
            }
        }
        let mut cols: Vec<u32> = counts.keys().copied().collect();
        cols.sort_unstable();
        let vals = cols.iter().map(|c| counts[c]).collect();
        (cols, vals)
    }
}

/// Documents dropped or terms removed during matrix construction.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct DropReport {
    pub dropped_docs: Vec<String>,
    pub dropped_terms: usize,
    pub retained_terms: usize,
    pub retained_tokens: u64,
}

/// Sparse document-term count matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentTermMatrix {
    counts: SparseRowMatrix,
    doc_ids: Vec<String>,
    categories: Vec<String>,
    vocabulary: Vocabulary,
}

impl DocumentTermMatrix {
    pub fn counts(&self) -> &SparseRowMatrix {
        &self.counts
    }

    pub fn n_docs(&self) -> usize {
        self.counts.rows()
    }

    pub fn n_terms(&self) -> usize {
        self.counts.cols()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn count(&self, doc: usize, term: &str) -> f64 {
        match self.vocabulary.position(term) {
            Some(j) => {
                let (cols, vals) = self.counts.row(doc);
                match cols.binary_search(&j) {
                    Ok(p) => vals[p],
                    Err(_) => 0.0,
                }
            }
            None => 0.0,
        }
    }

    pub(crate) fn from_sparse_parts(
        counts: SparseRowMatrix,
        doc_ids: Vec<String>,
        categories: Vec<String>,
        vocabulary: Vocabulary,
    ) -> Result<Self> {
        validate_matrix(&counts)?;
        Ok(DocumentTermMatrix {
            counts,
            doc_ids,
            categories,
            vocabulary,
        })
    }

    /// Directly assemble a matrix from known counts (used by fixtures and
    /// tests). Columns keep the given order; document frequencies are
    /// computed from the rows.
    pub fn from_dense_counts(
        doc_ids: Vec<String>,
        categories: Vec<String>,
        terms: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let n = terms.len();
        let sparse_rows: Vec<Vec<(u32, f64)>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j as u32, *v))
                    .collect()
            })
            .collect();
        let counts = SparseRowMatrix::from_rows(n, sparse_rows)?;
        let df = counts.col_support();
        validate_matrix(&counts)?;
        Ok(DocumentTermMatrix {
            counts,
            doc_ids,
            categories,
            vocabulary: Vocabulary::from_parts(terms, df),
        })
    }

    /// Restrict to a subset of documents, dropping terms that lose all
    /// support. Returns the restricted matrix and the retained original
    /// column indices.
    pub fn restrict_rows(&self, keep: &[usize]) -> Result<(DocumentTermMatrix, Vec<u32>)> {
        let sub = self.counts.select_rows(keep)?;
        let (compact, kept_cols) = sub.drop_empty_columns();
        validate_matrix(&compact)?;
        let terms: Vec<String> = kept_cols
            .iter()
            .map(|&c| self.vocabulary.term(c as usize).to_string())
            .collect();
        let df = compact.col_support();
        let doc_ids = keep.iter().map(|&i| self.doc_ids[i].clone()).collect();
        let categories = keep.iter().map(|&i| self.categories[i].clone()).collect();
        Ok((
            DocumentTermMatrix {
                counts: compact,
                doc_ids,
                categories,
                vocabulary: Vocabulary::from_parts(terms, df),
            },
            kept_cols,
        ))
    }
}

fn validate_matrix(counts: &SparseRowMatrix) -> Result<()> {
    if counts.rows() == 0 || counts.cols() == 0 {
        return Err(Error::CorpusCollapse(
            "matrix has no rows or no columns".into(),
        ));
    }
    for (i, (cols, _)) in counts.iter_rows().enumerate() {
        if cols.is_empty() {
            return Err(Error::CorpusCollapse(format!("document row {i} is empty")));
        }
    }
    if counts.col_support().contains(&0) {
        return Err(Error::CorpusCollapse("matrix has an empty column".into()));
    }
    Ok(())
}

/// Build the count matrix. Terms whose total corpus frequency is below
/// `min_term_freq` are removed; documents emptied by that removal are
/// dropped and recorded in the report.
pub fn build_matrix(
    docs: &[TokenizedDocument],
    min_term_freq: u32,
) -> Result<(DocumentTermMatrix, DropReport)> {
    if docs.is_empty() {
        return Err(Error::EmptyDataset("no documents to build from".into()));
    }
    if min_term_freq < 1 {
        return Err(Error::InvalidInput("min_term_freq must be >= 1".into()));
    }

    let mut total_freq: HashMap<&str, u64> = HashMap::new();
    for d in docs {
        for t in &d.tokens {
            *total_freq.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut terms: Vec<String> = total_freq
        .iter()
        .filter(|(_, &f)| f >= min_term_freq as u64)
        .map(|(t, _)| t.to_string())
        .collect();
    terms.sort_unstable();
    let dropped_terms = total_freq.len() - terms.len();
    if terms.is_empty() {
        return Err(Error::CorpusCollapse(format!(
            "min_term_freq {min_term_freq} removed every term"
        )));
    }
    let index: HashMap<&str, u32> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i as u32))
        .collect();

    let mut rows = Vec::new();
    let mut doc_ids = Vec::new();
    let mut categories = Vec::new();
    let mut dropped_docs = Vec::new();
    let mut retained_tokens = 0u64;
    for d in docs {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for t in &d.tokens {
            if let Some(&j) = index.get(t.as_str()) {
                *counts.entry(j).or_insert(0.0) += 1.0;
            }
        }
        if counts.is_empty() {
            dropped_docs.push(d.id.clone());
            continue;
        }
        let mut cols: Vec<u32> = counts.keys().copied().collect();
        cols.sort_unstable();
        retained_tokens += cols.iter().map(|c| counts[c] as u64).sum::<u64>();
        rows.push(cols.iter().map(|&c| (c, counts[&c])).collect());
        doc_ids.push(d.id.clone());
        categories.push(d.category.clone());
    }
    if rows.is_empty() {
        return Err(Error::CorpusCollapse(format!(
            "min_term_freq {min_term_freq} left no usable documents"
        )));
    }
    let counts = SparseRowMatrix::from_rows(terms.len(), rows)?;
    validate_matrix(&counts)?;
    let df = counts.col_support();
    let report = DropReport {
        dropped_docs,
        dropped_terms,
        retained_terms: terms.len(),
        retained_tokens,
    };
    Ok((
        DocumentTermMatrix {
            counts,
            doc_ids,
            categories,
            vocabulary: Vocabulary::from_parts(terms, df),
        },
        report,
    ))
}
