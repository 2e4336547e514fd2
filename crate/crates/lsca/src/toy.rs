//! Built-in six-document, six-term fixture: four documents about cats, two
//! about cars, with `jaguar` straddling both senses. Small enough to check
//! every number by hand, rich enough to exercise the whole pipeline.

use std::fmt::Write as _;

use crate::corpus::{DocumentTermMatrix, TokenizedDocument};
use crate::embed::alpha_inertia;
use crate::error::Result;
use crate::svd::svd;

pub const TOY_TERMS: [&str; 6] = ["lion", "tiger", "cheetah", "jaguar", "porsche", "ferrari"];

pub const TOY_COUNTS: [[f64; 6]; 6] = [
    [2.0, 2.0, 1.0, 2.0, 0.0, 0.0],
    [2.0, 3.0, 3.0, 3.0, 0.0, 0.0],
    [1.0, 1.0, 1.0, 1.0, 0.0, 0.0],
    [2.0, 2.0, 2.0, 3.0, 1.0, 1.0],
    [0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
    [0.0, 0.0, 0.0, 2.0, 1.0, 2.0],
];

pub const TOY_CATEGORIES: [&str; 6] = ["cat", "cat", "cat", "mixed", "car", "car"];

/// The fixture as a count matrix, columns in the order of [`TOY_TERMS`].
pub fn toy_matrix() -> DocumentTermMatrix {
    let doc_ids = (1..=6).map(|i| format!("doc{i}")).collect();
    let categories = TOY_CATEGORIES.iter().map(|c| c.to_string()).collect();
    let terms = TOY_TERMS.iter().map(|t| t.to_string()).collect();
    let rows: Vec<Vec<f64>> = TOY_COUNTS.iter().map(|r| r.to_vec()).collect();
    DocumentTermMatrix::from_dense_counts(doc_ids, categories, terms, &rows)
        .expect("fixture counts are valid")
}

/// The fixture as token lists, for exercising matrix construction.
pub fn toy_documents() -> Vec<TokenizedDocument> {
    TOY_COUNTS
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut tokens = Vec::new();
            for (j, &c) in row.iter().enumerate() {
                for _ in 0..c as usize {
                    tokens.push(TOY_TERMS[j].to_string());
                }
            }
            TokenizedDocument {
                id: format!("doc{}", i + 1),
                category: TOY_CATEGORIES[i].to_string(),
                tokens,
            }
        })
        .collect()
}

/// Report the raw-count singular values and, for a range of weighting
/// exponents, the per-dimension powers and explained-inertia proportions.
pub fn toy_report() -> Result<String> {
    let m = toy_matrix();
    let f = svd(&m.counts().to_dense(), 6)?;
    let mut out = String::new();
    writeln!(out, "fixture: {} docs x {} terms", m.n_docs(), m.n_terms()).unwrap();
    write!(out, "singular values:").unwrap();
    for s in f.sigma() {
        write!(out, " {s:.3}").unwrap();
    }
    writeln!(out).unwrap();
    for alpha in [-0.5, 0.0, 0.5, 1.0, 1.5] {
        writeln!(out, "\nalpha = {alpha}").unwrap();
        let pow_a: Vec<f64> = f.sigma().iter().map(|s| s.powf(alpha)).collect();
        let pow_2a: Vec<f64> = f.sigma().iter().map(|s| s.powf(2.0 * alpha)).collect();
        let props = alpha_inertia(f.sigma(), alpha);
        write_row(&mut out, "sigma^a", &pow_a);
        write_row(&mut out, "sigma^2a", &pow_2a);
        write_row(&mut out, "proportion", &props);
    }
    Ok(out)
}

fn write_row(out: &mut String, label: &str, vals: &[f64]) {
    write!(out, "  {label:<10} :").unwrap();
    for v in vals {
        write!(out, " {v:.3}").unwrap();
    }
    writeln!(out).unwrap();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_matrix;

    #[test]
    fn matrix_matches_published_counts() {
        let m = toy_matrix();
        assert_eq!(m.n_docs(), 6);
        assert_eq!(m.n_terms(), 6);
        assert_eq!(m.count(0, "lion"), 2.0);
        assert_eq!(m.count(1, "cheetah"), 3.0);
        assert_eq!(m.count(3, "porsche"), 1.0);
        assert_eq!(m.count(4, "lion"), 0.0);
        assert_eq!(m.count(5, "ferrari"), 2.0);
        assert_eq!(m.counts().total(), 41.0);
    }

    #[test]
    fn token_reconstruction_reproduces_counts() {
        let docs = toy_documents();
        let (m, report) = build_matrix(&docs, 1).unwrap();
        assert!(report.dropped_docs.is_empty());
        assert_eq!(report.dropped_terms, 0);
        let reference = toy_matrix();
        // the built vocabulary is sorted, so compare count by count
        for i in 0..6 {
            for t in TOY_TERMS {
                assert_eq!(m.count(i, t), reference.count(i, t), "doc {i} term {t}");
            }
        }
        assert_eq!(m.doc_ids(), reference.doc_ids());
        assert_eq!(m.categories(), reference.categories());
    }

    #[test]
    fn report_carries_published_rows() {
        let report = toy_report().unwrap();
        assert!(report.contains("singular values: 8.425 3.261 0.988 0.574 0.272"));
        // proportions for alpha = 1 and alpha = -0.5
        assert!(report.contains("0.855 0.128 0.012 0.004 0.001"));
        assert!(report.contains("0.017 0.045 0.148 0.254 0.536"));
        // sigma^a row for alpha = 0.5
        assert!(report.contains("2.903 1.806 0.994 0.758 0.522"));
    }
}
