//! Query-against-corpus scoring and ranking.
//!
//! Euclidean distance ranks ascending; dot product and cosine rank
//! descending. Ties always resolve to the lower document index, so ranked
//! lists are fully deterministic.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Dot,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Dot, Metric::Cosine];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Dot => "dot",
            Metric::Cosine => "cosine",
        }
    }

    /// Whether lower scores rank earlier.
    pub fn ascending(&self) -> bool {
        matches!(self, Metric::Euclidean)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "euc" => Ok(Metric::Euclidean),
            "dot" => Ok(Metric::Dot),
            "cosine" | "cos" => Ok(Metric::Cosine),
            other => Err(Error::InvalidInput(format!(
                "unknown metric `{other}` (expected euclidean, dot, cosine)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub doc_index: usize,
    pub doc_id: String,
    pub score: f64,
    pub relevant: bool,
}

/// A full ordering of the training documents for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub metric: Metric,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn relevance_flags(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.relevant).collect()
    }

    pub fn total_relevant(&self) -> usize {
        self.entries.iter().filter(|e| e.relevant).count()
    }

    /// TREC-style run lines: `query_id doc_id rank score`.
    pub fn write_trec(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (pos, e) in self.entries.iter().enumerate() {
            writeln!(w, "{} {} {} {:.6}", self.query_id, e.doc_id, pos + 1, e.score)?;
        }
        Ok(())
    }
}

/// Score a query point against every document point.
pub fn score(query: ArrayView1<f64>, docs: ArrayView2<f64>, metric: Metric) -> Result<Vec<f64>> {
    if query.len() != docs.ncols() {
        return Err(Error::DimensionMismatch {
            expected: docs.ncols(),
            got: query.len(),
            context: "query dimensions vs document coordinates".into(),
        });
    }
    let m = docs.nrows();
    let mut out = Vec::with_capacity(m);
    match metric {
        Metric::Euclidean => {
            for i in 0..m {
                let row = docs.row(i);
                let mut acc = 0.0;
                for (q, d) in query.iter().zip(row.iter()) {
                    let diff = q - d;
                    acc += diff * diff;
                }
                out.push(acc.sqrt());
            }
        }
        Metric::Dot => {
            for i in 0..m {
                out.push(query.dot(&docs.row(i)));
            }
        }
        Metric::Cosine => {
            let qn = query.dot(&query).sqrt();
            for i in 0..m {
                let row = docs.row(i);
                let dn = row.dot(&row).sqrt();
                if qn == 0.0 || dn == 0.0 {
                    out.push(0.0);
                } else {
                    out.push(query.dot(&row) / (qn * dn));
                }
            }
        }
    }
    Ok(out)
}

/// Order document indices by score under the metric's direction. The sort
/// is stable, so equal scores keep ascending index order.
pub fn rank_indices(scores: &[f64], metric: Metric) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if metric.ascending() {
        idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    } else {
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    }
    idx
}

/// Build the full ranked list with relevance judgments. A document is
/// relevant when its category equals the query's category.
pub fn rank(
    query_id: &str,
    scores: &[f64],
    metric: Metric,
    doc_ids: &[String],
    categories: &[String],
    query_category: &str,
) -> Result<RankedList> {
    if scores.len() != doc_ids.len() || scores.len() != categories.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: doc_ids.len().min(categories.len()),
            context: "scores vs document labels".into(),
        });
    }
    let entries = rank_indices(scores, metric)
        .into_iter()
        .map(|i| RankedEntry {
            doc_index: i,
            doc_id: doc_ids[i].clone(),
            score: scores[i],
            relevant: categories[i] == query_category,
        })
        .collect();
    Ok(RankedList {
        query_id: query_id.to_string(),
        metric,
        entries,
    })
}
