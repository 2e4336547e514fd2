//! Term weighting. Four schemes:
//!
//! * `raw`: counts unchanged;
//! * `nrowl1`: each row divided by its sum;
//! * `nrowl2`: each row divided by its Euclidean norm;
//! * `tfidf`: counts times a global term weight `1 + log2(n_docs / df_j)`.
//!
//! A scheme is fitted on a training matrix and then applied to that matrix
//! and to query rows. The tfidf global weights are frozen at fit time, so
//! validation queries are weighted with training statistics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentTermMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::sparse::SparseRowMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeTag {
    Raw,
    NRowL1,
    NRowL2,
    Tfidf,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 4] = [
        SchemeTag::Raw,
        SchemeTag::NRowL1,
        SchemeTag::NRowL2,
        SchemeTag::Tfidf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeTag::Raw => "raw",
            SchemeTag::NRowL1 => "nrowl1",
            SchemeTag::NRowL2 => "nrowl2",
            SchemeTag::Tfidf => "tfidf",
        }
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(SchemeTag::Raw),
            "nrowl1" | "l1" => Ok(SchemeTag::NRowL1),
            "nrowl2" | "l2" => Ok(SchemeTag::NRowL2),
            "tfidf" => Ok(SchemeTag::Tfidf),
            other => Err(Error::InvalidInput(format!(
                "unknown weighting scheme `{other}` (expected raw, nrowl1, nrowl2, tfidf)"
            ))),
        }
    }
}

/// A fitted weighting scheme. For tfidf this holds the per-term global
/// weights; the row-normalizing schemes carry no state beyond the tag.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingScheme {
    tag: SchemeTag,
    /// Per-column multiplier, populated for tfidf only.
    global: Option<Vec<f64>>,
}

impl WeightingScheme {
    pub fn tag(&self) -> SchemeTag {
        self.tag
    }

    pub fn global_weights(&self) -> Option<&[f64]> {
        self.global.as_deref()
    }

    pub(crate) fn from_parts(tag: SchemeTag, global: Option<Vec<f64>>) -> Self {
        WeightingScheme { tag, global }
    }

    pub fn n_terms(&self) -> Option<usize> {
        self.global.as_ref().map(|g| g.len())
    }

    /// Weight one sparse count row. `cols` indexes the same vocabulary the
    /// scheme was fitted on. Produces exactly the values that
    /// [`apply_weighting`] would produce for an identical matrix row.
    pub fn weigh_row(&self, cols: &[u32], vals: &[f64]) -> Result<Vec<f64>> {
        match self.tag {
            SchemeTag::Raw => Ok(vals.to_vec()),
            SchemeTag::NRowL1 => {
                let sum: f64 = vals.iter().sum();
                if sum == 0.0 {
                    return Err(Error::ZeroRow {
                        row: 0,
                        scheme: self.tag.name().into(),
                        detail: "a zero sum".into(),
                    });
                }
                Ok(vals.iter().map(|v| v / sum).collect())
            }
            SchemeTag::NRowL2 => {
                let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::ZeroRow {
                        row: 0,
                        scheme: self.tag.name().into(),
                        detail: "a zero norm".into(),
                    });
                }
                Ok(vals.iter().map(|v| v / norm).collect())
            }
            SchemeTag::Tfidf => {
                let g = self.global.as_ref().ok_or_else(|| {
                    Error::InvalidInput("tfidf scheme is missing fitted weights".into())
                })?;
                let mut out = Vec::with_capacity(vals.len());
                for (&c, &v) in cols.iter().zip(vals) {
                    let gw = *g.get(c as usize).ok_or_else(|| Error::IndexOutOfBounds {
                        index: c as usize,
                        len: g.len(),
                        what: "tfidf global weights".into(),
                    })?;
                    out.push(v * gw);
                }
                Ok(out)
            }
        }
    }

    /// One `(term, df, g)` row per vocabulary term, for run manifests.
    /// `None` for the schemes without global statistics.
    pub fn global_stats(&self, vocabulary: &Vocabulary) -> Option<Vec<GlobalStat>> {
        let g = self.global.as_ref()?;
        Some(
            vocabulary
                .terms()
                .iter()
                .zip(vocabulary.doc_frequencies())
                .zip(g)
                .map(|((term, &df), &g)| GlobalStat {
                    term: term.clone(),
                    df,
                    g,
                })
                .collect(),
        )
    }
}

/// Fitted global weight of one term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStat {
    pub term: String,
    pub df: u32,
    pub g: f64,
}

/// Weighted counts plus the scheme that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMatrix {
    matrix: SparseRowMatrix,
    tag: SchemeTag,
}

impl WeightedMatrix {
    pub fn matrix(&self) -> &SparseRowMatrix {
        &self.matrix
    }

    pub fn tag(&self) -> SchemeTag {
        self.tag
    }
}

/// Fit a scheme on a training matrix. For tfidf the document frequencies
/// come from the matrix itself.
pub fn fit_weighting(matrix: &DocumentTermMatrix, tag: SchemeTag) -> Result<WeightingScheme> {
    let global = match tag {
        SchemeTag::Tfidf => {
            let n = matrix.n_docs() as f64;
            let g = matrix
                .vocabulary()
                .doc_frequencies()
                .iter()
                .map(|&df| {
                    if df == 0 {
                        Err(Error::InvalidInput(
                            "tfidf fit on a vocabulary with zero document frequency".into(),
                        ))
                    } else {
                        Ok(1.0 + (n / df as f64).log2())
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(g)
        }
        _ => None,
    };
    Ok(WeightingScheme::from_parts(tag, global))
}

/// Apply a fitted scheme to a count matrix.
pub fn apply_weighting(
    scheme: &WeightingScheme,
    matrix: &DocumentTermMatrix,
) -> Result<WeightedMatrix> {
    if let Some(n) = scheme.n_terms() {
        if n != matrix.n_terms() {
            return Err(Error::VocabularyMismatch(format!(
                "scheme fitted on {n} terms, matrix has {}",
                matrix.n_terms()
            )));
        }
    }
    let counts = matrix.counts();
    let weighted = match scheme.tag() {
        SchemeTag::Raw => counts.clone(),
        SchemeTag::NRowL1 => {
            let sums = counts.row_sums();
            check_nonzero(&sums, scheme.tag())?;
            counts.map_values(|i, _, v| v / sums[i])
        }
        SchemeTag::NRowL2 => {
            let norms: Vec<f64> = counts.row_sq_norms().iter().map(|s| s.sqrt()).collect();
            check_nonzero(&norms, scheme.tag())?;
            counts.map_values(|i, _, v| v / norms[i])
        }
        SchemeTag::Tfidf => {
            let g = scheme.global_weights().ok_or_else(|| {
                Error::InvalidInput("tfidf scheme is missing fitted weights".into())
            })?;
            counts.map_values(|_, j, v| v * g[j as usize])
        }
    };
    Ok(WeightedMatrix {
        matrix: weighted,
        tag: scheme.tag(),
    })
}

fn check_nonzero(scales: &[f64], tag: SchemeTag) -> Result<()> {
    for (i, &s) in scales.iter().enumerate() {
        if s == 0.0 {
            return Err(Error::ZeroRow {
                row: i,
                scheme: tag.name().into(),
                detail: "a zero total".into(),
            });
        }
    }
    Ok(())
}
