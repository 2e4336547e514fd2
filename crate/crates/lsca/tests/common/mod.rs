#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use lsca::corpus::DocumentTermMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CATEGORIES: [&str; 5] = ["athletics", "business", "politics", "science", "weather"];

const FILLER: [&str; 10] = [
    "market", "garden", "window", "bridge", "forest", "engine", "bottle", "ladder", "candle",
    "mirror",
];

const TOPIC: [&str; 10] = [
    "anchor", "beacon", "copper", "damson", "ember", "falcon", "gravel", "hollow", "ingot",
    "juniper",
];

pub struct SyntheticCorpus {
    pub doc_ids: Vec<String>,
    pub categories: Vec<String>,
    pub terms: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Five-category corpus over ten shared filler terms plus ten terms per
/// category. Every document carries all ten of its own topic terms, a noisy
/// helping of fillers, and an occasional off-topic count so retrieval is
/// good but not perfect. Same seed, same corpus.
pub fn synthetic_corpus(n_docs: usize, seed: u64) -> SyntheticCorpus {
    assert!(n_docs >= 10, "need every filler column covered");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<String> = FILLER
        .iter()
        .map(|s| s.to_string())
        .chain(
            CATEGORIES
                .iter()
                .flat_map(|c| TOPIC.iter().map(move |t| format!("{c}{t}"))),
        )
        .collect();
    let mut doc_ids = Vec::with_capacity(n_docs);
    let mut categories = Vec::with_capacity(n_docs);
    let mut rows = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let cat = i % CATEGORIES.len();
        let mut row = vec![0.0; terms.len()];
        row[i % FILLER.len()] += 1.0;
        for v in row.iter_mut().take(FILLER.len()) {
            *v += rng.random_range(0..4) as f64;
        }
        for j in 0..TOPIC.len() {
            row[FILLER.len() + cat * TOPIC.len() + j] = 1.0 + rng.random_range(0..5) as f64;
        }
        if rng.random_range(0..5) == 0 {
            let other = (cat + 1 + rng.random_range(0..4)) % CATEGORIES.len();
            let j = rng.random_range(0..TOPIC.len());
            row[FILLER.len() + other * TOPIC.len() + j] += rng.random_range(1..3) as f64;
        }
        doc_ids.push(format!("{}{:03}", CATEGORIES[cat], i));
        categories.push(CATEGORIES[cat].to_string());
        rows.push(row);
    }
    SyntheticCorpus {
        doc_ids,
        categories,
        terms,
        rows,
    }
}

pub fn synthetic_matrix(n_docs: usize, seed: u64) -> DocumentTermMatrix {
    let c = synthetic_corpus(n_docs, seed);
    DocumentTermMatrix::from_dense_counts(c.doc_ids, c.categories, c.terms, &c.rows)
        .expect("synthetic counts are valid")
}

/// Lay the corpus out as one directory per category with one text file per
/// document, each term repeated count times.
pub fn write_dirtree(root: &Path, c: &SyntheticCorpus) {
    for i in 0..c.doc_ids.len() {
        let dir = root.join(&c.categories[i]);
        std::fs::create_dir_all(&dir).unwrap();
        let mut body = String::new();
        for (j, &v) in c.rows[i].iter().enumerate() {
            for _ in 0..v as usize {
                body.push_str(&c.terms[j]);
                body.push(' ');
            }
        }
        std::fs::write(dir.join(format!("{i:03}.txt")), body.trim_end()).unwrap();
    }
}

/// Dump the corpus in the pre-tokenized TSV format, each term repeated
/// count times.
pub fn write_tokens_tsv(path: &Path, c: &SyntheticCorpus) {
    let mut out = String::new();
    for i in 0..c.doc_ids.len() {
        write!(out, "{}\t{}", c.doc_ids[i], c.categories[i]).unwrap();
        let mut sep = '\t';
        for (j, &v) in c.rows[i].iter().enumerate() {
            for _ in 0..v as usize {
                out.push(sep);
                out.push_str(&c.terms[j]);
                sep = ' ';
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}
