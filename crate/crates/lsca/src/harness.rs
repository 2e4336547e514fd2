//! Experiment orchestration: cross-validated MAP over the full
//! method x scheme x metric x (k, alpha) grid.
//!
//! Per fold and per (method, scheme) the training matrix is factorized
//! once at the largest requested k. Because truncation is a prefix slice
//! of that factorization, every smaller k is served from the same factors,
//! and each query is evaluated with one pass over the dimensions per
//! alpha, capturing running scores at every k in the grid.
//!
//! MAP pools the per-query average precisions of all folds. Failed
//! combinations are recorded per cell; clamped ranks are noted in the
//! manifest. Given a seed, the whole report is byte-reproducible.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentTermMatrix, DropReport, PreprocessConfig};
use crate::embed::{fit_ca, fit_lsa, Embedding, Method};
use crate::error::{Error, Result};
use crate::eval::{ap_from_flags, make_splits, Fold, PerQueryAp, Regime};
use crate::retrieval::{rank_indices, Metric};
use crate::weighting::{apply_weighting, fit_weighting, SchemeTag};

/// What produces the ranking: a reduction method or raw term matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMethod {
    Lsa,
    Ca,
    TermMatch,
}

impl EvalMethod {
    pub const ALL: [EvalMethod; 3] = [EvalMethod::Lsa, EvalMethod::Ca, EvalMethod::TermMatch];

    pub fn name(&self) -> &'static str {
        match self {
            EvalMethod::Lsa => "lsa",
            EvalMethod::Ca => "ca",
            EvalMethod::TermMatch => "termmatch",
        }
    }

    pub fn reduction(&self) -> Option<Method> {
        match self {
            EvalMethod::Lsa => Some(Method::Lsa),
            EvalMethod::Ca => Some(Method::Ca),
            EvalMethod::TermMatch => None,
        }
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lsa" => Ok(EvalMethod::Lsa),
            "ca" => Ok(EvalMethod::Ca),
            "termmatch" | "term-match" | "term_match" | "term" => Ok(EvalMethod::TermMatch),
            other => Err(Error::InvalidInput(format!(
                "unknown method `{other}` (expected lsa, ca, termmatch)"
            ))),
        }
    }
}

/// The dimension grid used throughout: 1..20 by 1, 22..50 by 2,
/// 60..100 by 10 (40 values).
pub fn default_k_grid() -> Vec<usize> {
    let mut grid: Vec<usize> = (1..=20).collect();
    grid.extend((22..=50).step_by(2));
    grid.extend((60..=100).step_by(10));
    grid
}

/// The exponent grid: -6..-2 by 0.5, -1.8..4 by 0.2, 4.5..8 by 0.5
/// (47 values, built in tenths to keep the values exact).
pub fn default_alpha_grid() -> Vec<f64> {
    let mut deci: Vec<i64> = (-60..=-20).step_by(5).collect();
    deci.extend((-18..=40).step_by(2));
    deci.extend((45..=80).step_by(5));
    deci.into_iter().map(|d| d as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub methods: Vec<EvalMethod>,
    pub schemes: Vec<SchemeTag>,
    pub metrics: Vec<Metric>,
    pub k_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub regime: Regime,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.schemes.is_empty() || self.metrics.is_empty() {
            return Err(Error::Config(
                "methods, schemes and metrics must be non-empty".into(),
            ));
        }
        if self.k_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::Config("k and alpha grids must be non-empty".into()));
        }
        if self.k_grid.contains(&0) {
            return Err(Error::Config("k grid values must be >= 1".into()));
        }
        Ok(())
    }
}

/// One grid point. Term-matching cells carry `k = 0` and `alpha = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: EvalMethod,
    pub scheme: SchemeTag,
    pub metric: Metric,
    pub k: usize,
    pub alpha: f64,
    pub map: f64,
    pub n_queries: usize,
    pub failed: Option<String>,
}

impl Cell {
    pub fn ok(&self) -> bool {
        self.failed.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub seed: u64,
    pub regime: String,
    pub n_docs: usize,
    pub n_terms: usize,
    pub n_folds: usize,
    pub methods: Vec<String>,
    pub schemes: Vec<String>,
    pub metrics: Vec<String>,
    pub k_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub clamp_warnings: Vec<String>,
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drop_report: Option<DropReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub cells: Vec<Cell>,
    pub manifest: Manifest,
    /// Per-query APs of the argmax cell of every (method, scheme, metric)
    /// group, for the per-query CSV.
    pub best_cell_queries: Vec<PerQueryAp>,
}

/// Run the full grid.
pub fn run_sweep(matrix: &DocumentTermMatrix, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let plan = make_splits(matrix.categories(), &cfg.regime)?;
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    let mut best_queries: Vec<PerQueryAp> = Vec::new();

    for &method in &cfg.methods {
        for &scheme in &cfg.schemes {
            match method.reduction() {
                Some(red) => {
                    match run_reduced_combo(matrix, cfg, &plan.folds, red, scheme) {
                        Ok(mut combo) => {
                            warnings.append(&mut combo.warnings);
                            let n = combo.n_queries;
                            for (mi, &metric) in cfg.metrics.iter().enumerate() {
                                let mut best: Option<(f64, usize)> = None;
                                for (ki, &k) in cfg.k_grid.iter().enumerate() {
                                    for (ai, &alpha) in cfg.alpha_grid.iter().enumerate() {
                                        let idx = combo.flat_index(mi, ki, ai);
                                        let sum: f64 =
                                            combo.per_query.iter().map(|q| q.aps[idx]).sum();
                                        let map = sum / n as f64;
                                        match best {
                                            Some((b, _)) if b >= map => {}
                                            _ => best = Some((map, idx)),
                                        }
                                        cells.push(Cell {
                                            method,
                                            scheme,
                                            metric,
                                            k,
                                            alpha,
                                            map,
                                            n_queries: n,
                                            failed: None,
                                        });
                                    }
                                }
                                if let Some((_, idx)) = best {
                                    for q in &combo.per_query {
                                        best_queries.push(PerQueryAp {
                                            fold: q.fold,
                                            query_id: q.query_id.clone(),
                                            ap: q.aps[idx],
                                        });
                                    }
                                }
                            }
                        }
                        Err(e) => {
                            let reason = e.to_string();
                            failures.push(format!("{method}/{scheme}: {reason}"));
                            for &metric in &cfg.metrics {
                                for &k in &cfg.k_grid {
                                    for &alpha in &cfg.alpha_grid {
                                        cells.push(Cell {
                                            method,
                                            scheme,
                                            metric,
                                            k,
                                            alpha,
                                            map: f64::NAN,
                                            n_queries: 0,
                                            failed: Some(reason.clone()),
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
                None => match run_term_match_combo(matrix, cfg, &plan.folds, scheme) {
                    Ok(combo) => {
                        let n = combo.n_queries;
                        for (mi, &metric) in cfg.metrics.iter().enumerate() {
                            let sum: f64 = combo.per_query.iter().map(|q| q.aps[mi]).sum();
                            cells.push(Cell {
                                method,
                                scheme,
                                metric,
                                k: 0,
                                alpha: 0.0,
                                map: sum / n as f64,
                                n_queries: n,
                                failed: None,
                            });
                            for q in &combo.per_query {
                                best_queries.push(PerQueryAp {
                                    fold: q.fold,
                                    query_id: q.query_id.clone(),
                                    ap: q.aps[mi],
                                });
                            }
                        }
                    }
                    Err(e) => {
                        let reason = e.to_string();
                        failures.push(format!("{method}/{scheme}: {reason}"));
                        for &metric in &cfg.metrics {
                            cells.push(Cell {
                                method,
                                scheme,
                                metric,
                                k: 0,
                                alpha: 0.0,
                                map: f64::NAN,
                                n_queries: 0,
                                failed: Some(reason.clone()),
                            });
                        }
                    }
                },
            }
        }
    }

    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        regime: cfg.regime.describe(),
        n_docs: matrix.n_docs(),
        n_terms: matrix.n_terms(),
        n_folds: plan.folds.len(),
        methods: cfg.methods.iter().map(|m| m.name().to_string()).collect(),
        schemes: cfg.schemes.iter().map(|s| s.name().to_string()).collect(),
        metrics: cfg.metrics.iter().map(|m| m.name().to_string()).collect(),
        k_grid: cfg.k_grid.clone(),
        alpha_grid: cfg.alpha_grid.clone(),
        clamp_warnings: warnings,
        failures,
        dataset: None,
        format: None,
        preprocess: None,
        drop_report: None,
    };
    Ok(SweepReport {
        cells,
        manifest,
        best_cell_queries: best_queries,
    })
}

/// Term matching alone: queries scored against the weighted matrix rows,
/// no reduction step.
pub fn run_term_match(
    matrix: &DocumentTermMatrix,
    schemes: &[SchemeTag],
    metrics: &[Metric],
    regime: &Regime,
    seed: u64,
) -> Result<SweepReport> {
    let cfg = SweepConfig {
        methods: vec![EvalMethod::TermMatch],
        schemes: schemes.to_vec(),
        metrics: metrics.to_vec(),
        k_grid: vec![1],
        alpha_grid: vec![1.0],
        regime: regime.clone(),
        seed,
    };
    run_sweep(matrix, &cfg)
}

struct QueryAps {
    fold: usize,
    query_id: String,
    aps: Vec<f64>,
}

struct ComboResult {
    per_query: Vec<QueryAps>,
    n_queries: usize,
    warnings: Vec<String>,
    n_k: usize,
    n_alpha: usize,
}

impl ComboResult {
    fn flat_index(&self, mi: usize, ki: usize, ai: usize) -> usize {
        (mi * self.n_k + ki) * self.n_alpha + ai
    }
}

/// Map a full-vocabulary sparse row onto the fold vocabulary given the
/// kept original column indices (ascending).
fn restrict_query(cols: &[u32], vals: &[f64], colmap: &[u32]) -> (Vec<u32>, Vec<f64>) {
    let mut qc = Vec::new();
    let mut qv = Vec::new();
    for (&c, &v) in cols.iter().zip(vals) {
        if let Ok(new) = colmap.binary_search(&c) {
            qc.push(new as u32);
            qv.push(v);
        }
    }
    (qc, qv)
}

fn fit_reduced(
    weighted: &crate::weighting::WeightedMatrix,
    method: Method,
    k: usize,
) -> Result<Embedding> {
    match method {
        Method::Lsa => fit_lsa(weighted, k),
        Method::Ca => fit_ca(weighted, k),
    }
}

fn run_reduced_combo(
    matrix: &DocumentTermMatrix,
    cfg: &SweepConfig,
    folds: &[Fold],
    method: Method,
    scheme: SchemeTag,
) -> Result<ComboResult> {
    let k_max = *cfg.k_grid.iter().max().unwrap();
    let n_k = cfg.k_grid.len();
    let n_alpha = cfg.alpha_grid.len();
    let n_metrics = cfg.metrics.len();
    let flat = n_metrics * n_k * n_alpha;

    let mut per_query = Vec::new();
    let mut warnings = Vec::new();

    for (fi, fold) in folds.iter().enumerate() {
        let (train, colmap) = matrix.restrict_rows(&fold.train)?;
        let fitted = fit_weighting(&train, scheme)?;
        let weighted = apply_weighting(&fitted, &train)?;
        let emb = fit_reduced(&weighted, method, k_max)?;
        if emb.clamped() {
            warnings.push(format!(
                "fold {fi} {}/{}: k clamped to rank {} (requested {})",
                method,
                scheme,
                emb.k(),
                k_max
            ));
        }
        let train_cats = train.categories();

        let fold_aps: Vec<Result<QueryAps>> = fold
            .validation
            .par_iter()
            .map(|&q| {
                let query_id = matrix.doc_ids()[q].clone();
                let (cols, vals) = matrix.counts().row(q);
                let (qc, qv) = restrict_query(cols, vals, &colmap);
                let mut aps = vec![0.0; flat];
                if qc.is_empty() {
                    // every training term of this query fell out of the
                    // fold vocabulary; the query cannot be answered
                    return Ok(QueryAps {
                        fold: fi,
                        query_id,
                        aps,
                    });
                }
                let qcat = &matrix.categories()[q];
                let relevant: Vec<bool> = train_cats.iter().map(|c| c == qcat).collect();
                let total_rel = relevant.iter().filter(|&&r| r).count();
                if total_rel > 0 {
                    let wq = fitted.weigh_row(&qc, &qv)?;
                    let qs = emb.query_standard(&qc, &wq)?;
                    grid_aps(
                        &emb,
                        qs.as_slice().unwrap(),
                        &relevant,
                        total_rel,
                        cfg,
                        &mut aps,
                        n_k,
                        n_alpha,
                    );
                }
                Ok(QueryAps {
                    fold: fi,
                    query_id,
                    aps,
                })
            })
            .collect();
        for qa in fold_aps {
            per_query.push(qa?);
        }
    }
    let n_queries = per_query.len();
    if n_queries == 0 {
        return Err(Error::InvalidSplit("no validation queries".into()));
    }
    Ok(ComboResult {
        per_query,
        n_queries,
        warnings,
        n_k,
        n_alpha,
    })
}

/// Evaluate one projected query over the whole (metric, k, alpha) grid.
///
/// For the exponent a, coordinates are standard coordinates scaled by
/// sigma^a, so with w_d = sigma_d^{2a}:
///   squared distance  = sum w_d (qs_d - ds_d)^2
///   dot product       = sum w_d qs_d ds_d
///   cosine            = dot / sqrt((sum w_d qs_d^2)(sum w_d ds_d^2))
/// One pass over the dimensions records all k checkpoints at once.
#[allow(clippy::too_many_arguments)]
fn grid_aps(
    emb: &Embedding,
    qs: &[f64],
    relevant: &[bool],
    total_rel: usize,
    cfg: &SweepConfig,
    aps: &mut [f64],
    n_k: usize,
    n_alpha: usize,
) {
    let dims = emb.k();
    let m = emb.n_docs();
    let ds = emb.doc_standard();
    let sigma = emb.sigma();
    // checkpoint[p] = dimensions used by k_grid[p], clamped to the rank
    let checkpoints: Vec<usize> = cfg.k_grid.iter().map(|&k| k.min(dims)).collect();

    let mut sq_dist = vec![0.0f64; m * n_k];
    let mut dot = vec![0.0f64; m * n_k];
    let mut doc_norm = vec![0.0f64; m * n_k];
    let mut q_norm = vec![0.0f64; n_k];
    let mut scores = vec![0.0f64; m];

    for (ai, &alpha) in cfg.alpha_grid.iter().enumerate() {
        let w: Vec<f64> = sigma.iter().map(|s| s.powf(2.0 * alpha)).collect();
        // running accumulators per document, snapshot at each checkpoint
        for i in 0..m {
            let row = ds.row(i);
            let row = row.as_slice().unwrap();
            let (mut acc_sq, mut acc_dot, mut acc_dn) = (0.0, 0.0, 0.0);
            let mut d = 0;
            for (p, &stop) in checkpoints.iter().enumerate() {
                while d < stop {
                    let diff = qs[d] - row[d];
                    acc_sq += w[d] * diff * diff;
                    acc_dot += w[d] * qs[d] * row[d];
                    acc_dn += w[d] * row[d] * row[d];
                    d += 1;
                }
                sq_dist[i * n_k + p] = acc_sq;
                dot[i * n_k + p] = acc_dot;
                doc_norm[i * n_k + p] = acc_dn;
            }
        }
        {
            let mut acc_qn = 0.0;
            let mut d = 0;
            for (p, &stop) in checkpoints.iter().enumerate() {
                while d < stop {
                    acc_qn += w[d] * qs[d] * qs[d];
                    d += 1;
                }
                q_norm[p] = acc_qn;
            }
        }
        for (mi, &metric) in cfg.metrics.iter().enumerate() {
            for p in 0..n_k {
                for i in 0..m {
                    scores[i] = match metric {
                        Metric::Euclidean => sq_dist[i * n_k + p],
                        Metric::Dot => dot[i * n_k + p],
                        Metric::Cosine => {
                            let denom = (q_norm[p] * doc_norm[i * n_k + p]).sqrt();
                            if denom == 0.0 {
                                0.0
                            } else {
                                dot[i * n_k + p] / denom
                            }
                        }
                    };
                }
                let order = rank_indices(&scores, metric);
                let flags: Vec<bool> = order.iter().map(|&i| relevant[i]).collect();
                let ap = ap_from_flags(&flags, total_rel);
                aps[(mi * n_k + p) * n_alpha + ai] = ap;
            }
        }
    }
}

fn run_term_match_combo(
    matrix: &DocumentTermMatrix,
    cfg: &SweepConfig,
    folds: &[Fold],
    scheme: SchemeTag,
) -> Result<ComboResult> {
    let n_metrics = cfg.metrics.len();
    let mut per_query = Vec::new();

    for (fi, fold) in folds.iter().enumerate() {
        let (train, colmap) = matrix.restrict_rows(&fold.train)?;
        let fitted = fit_weighting(&train, scheme)?;
        let weighted = apply_weighting(&fitted, &train)?;
        let dense = weighted.matrix().to_dense();
        let n_terms = train.n_terms();
        let train_cats = train.categories();

        let fold_aps: Vec<Result<QueryAps>> = fold
            .validation
            .par_iter()
            .map(|&q| {
                let query_id = matrix.doc_ids()[q].clone();
                let (cols, vals) = matrix.counts().row(q);
                let (qc, qv) = restrict_query(cols, vals, &colmap);
                let mut aps = vec![0.0; n_metrics];
                if qc.is_empty() {
                    return Ok(QueryAps {
                        fold: fi,
                        query_id,
                        aps,
                    });
                }
                let qcat = &matrix.categories()[q];
                let relevant: Vec<bool> = train_cats.iter().map(|c| c == qcat).collect();
                let total_rel = relevant.iter().filter(|&&r| r).count();
                if total_rel > 0 {
                    let wq = fitted.weigh_row(&qc, &qv)?;
                    let mut qdense = ndarray::Array1::<f64>::zeros(n_terms);
                    for (&c, &v) in qc.iter().zip(&wq) {
                        qdense[c as usize] = v;
                    }
                    for (mi, &metric) in cfg.metrics.iter().enumerate() {
                        let scores = crate::retrieval::score(qdense.view(), dense.view(), metric)?;
                        let order = rank_indices(&scores, metric);
                        let flags: Vec<bool> = order.iter().map(|&i| relevant[i]).collect();
                        aps[mi] = ap_from_flags(&flags, total_rel);
                    }
                }
                Ok(QueryAps {
                    fold: fi,
                    query_id,
                    aps,
                })
            })
            .collect();
        for qa in fold_aps {
            per_query.push(qa?);
        }
    }
    let n_queries = per_query.len();
    if n_queries == 0 {
        return Err(Error::InvalidSplit("no validation queries".into()));
    }
    Ok(ComboResult {
        per_query,
        n_queries,
        warnings: Vec::new(),
        n_k: 1,
        n_alpha: 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SummaryMode {
    /// Best k at one fixed alpha.
    FixedAlpha(f64),
    /// Best alpha at one fixed k.
    FixedK(usize),
    /// Best (k, alpha) jointly.
    JointOptimum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: EvalMethod,
    pub scheme: SchemeTag,
    pub metric: Metric,
    pub k: usize,
    pub alpha: f64,
    pub map: f64,
    pub n_queries: usize,
}

fn alpha_eq(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Reduce the cell table to one row per (method, scheme, metric) group.
/// Ties resolve to the smaller k, then the smaller alpha.
pub fn summarize(report: &SweepReport, mode: SummaryMode) -> Result<Vec<SummaryRow>> {
    let mut groups: Vec<(EvalMethod, SchemeTag, Metric)> = Vec::new();
    for c in &report.cells {
        let g = (c.method, c.scheme, c.metric);
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let mut rows = Vec::new();
    for (method, scheme, metric) in groups {
        let mut best: Option<&Cell> = None;
        for c in report.cells.iter().filter(|c| {
            c.method == method && c.scheme == scheme && c.metric == metric && c.ok()
        }) {
            // term matching has no grid; its single cell always qualifies
            let in_slice = c.method == EvalMethod::TermMatch
                || match mode {
                    SummaryMode::FixedAlpha(a) => alpha_eq(c.alpha, a),
                    SummaryMode::FixedK(k) => c.k == k,
                    SummaryMode::JointOptimum => true,
                };
            if !in_slice {
                continue;
            }
            best = Some(match best {
                None => c,
                Some(b) => {
                    if c.map > b.map
                        || (c.map == b.map && (c.k < b.k || (c.k == b.k && c.alpha < b.alpha)))
                    {
                        c
                    } else {
                        b
                    }
                }
            });
        }
        if let Some(c) = best {
            rows.push(SummaryRow {
                method,
                scheme,
                metric,
                k: c.k,
                alpha: c.alpha,
                map: c.map,
                n_queries: c.n_queries,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(
            "no cells match the requested summary slice".into(),
        ));
    }
    Ok(rows)
}

/// Exact decimal formatting: trailing zeros trimmed, `-0` normalized.
pub fn fmt_alpha(a: f64) -> String {
    let mut s = format!("{a:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn fmt_map(c: &Cell) -> String {
    if c.ok() {
        format!("{:.6}", c.map)
    } else {
        String::new()
    }
}

fn csv_safe(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

pub fn write_cells_csv(w: &mut impl Write, cells: &[Cell]) -> std::io::Result<()> {
    writeln!(w, "method,scheme,metric,k,alpha,map,n_queries,status")?;
    for c in cells {
        let status = match &c.failed {
            None => "ok".to_string(),
            Some(reason) => format!("failed: {}", csv_safe(reason)),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.method,
            c.scheme,
            c.metric,
            c.k,
            fmt_alpha(c.alpha),
            fmt_map(c),
            c.n_queries,
            status
        )?;
    }
    Ok(())
}

/// Parse a file produced by [`write_cells_csv`].
pub fn parse_cells_csv(text: &str) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(8, ',').collect();
        if fields.len() != 8 {
            return Err(Error::InvalidInput(format!(
                "cells csv line {}: expected 8 fields",
                lineno + 1
            )));
        }
        let bad = |what: &str| {
            Error::InvalidInput(format!("cells csv line {}: bad {what}", lineno + 1))
        };
        let failed = if fields[7] == "ok" {
            None
        } else {
            Some(
                fields[7]
                    .strip_prefix("failed: ")
                    .unwrap_or(fields[7])
                    .to_string(),
            )
        };
        out.push(Cell {
            method: fields[0].parse()?,
            scheme: fields[1].parse()?,
            metric: fields[2].parse()?,
            k: fields[3].parse().map_err(|_| bad("k"))?,
            alpha: fields[4].parse().map_err(|_| bad("alpha"))?,
            map: if fields[5].is_empty() {
                f64::NAN
            } else {
                fields[5].parse().map_err(|_| bad("map"))?
            },
            n_queries: fields[6].parse().map_err(|_| bad("n_queries"))?,
            failed,
        });
    }
    Ok(out)
}

pub fn write_summary_csv(w: &mut impl Write, rows: &[SummaryRow]) -> std::io::Result<()> {
    writeln!(w, "method,scheme,metric,k,alpha,map,n_queries")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{:.6},{}",
            r.method,
            r.scheme,
            r.metric,
            r.k,
            fmt_alpha(r.alpha),
            r.map,
            r.n_queries
        )?;
    }
    Ok(())
}

/// MAP-vs-k rows at one alpha, for plotting. Term-matching cells are
/// baselines without a k axis and are skipped.
pub fn write_map_vs_k_csv(
    w: &mut impl Write,
    cells: &[Cell],
    alpha: f64,
) -> std::io::Result<()> {
    writeln!(w, "method,scheme,metric,k,map")?;
    for c in cells {
        if c.method != EvalMethod::TermMatch && c.ok() && alpha_eq(c.alpha, alpha) {
            writeln!(
                w,
                "{},{},{},{},{:.6}",
                c.method, c.scheme, c.metric, c.k, c.map
            )?;
        }
    }
    Ok(())
}

/// MAP-vs-alpha rows for every k, long format.
pub fn write_map_vs_alpha_csv(w: &mut impl Write, cells: &[Cell]) -> std::io::Result<()> {
    writeln!(w, "method,scheme,metric,k,alpha,map")?;
    for c in cells {
        if c.method != EvalMethod::TermMatch && c.ok() {
            writeln!(
                w,
                "{},{},{},{},{},{:.6}",
                c.method,
                c.scheme,
                c.metric,
                c.k,
                fmt_alpha(c.alpha),
                c.map
            )?;
        }
    }
    Ok(())
}

/// Document and term coordinates of a fitted embedding, one labelled row
/// per point.
pub fn write_coordinates_csv(
    w: &mut impl Write,
    emb: &Embedding,
    doc_ids: &[String],
    terms: &[String],
) -> std::io::Result<()> {
    let k = emb.k();
    write!(w, "side,id")?;
    for d in 1..=k {
        write!(w, ",dim{d}")?;
    }
    writeln!(w)?;
    let docs = emb.doc_coordinates().points;
    for (i, id) in doc_ids.iter().enumerate() {
        write!(w, "doc,{}", csv_safe(id))?;
        for d in 0..k {
            write!(w, ",{:.6}", docs[[i, d]])?;
        }
        writeln!(w)?;
    }
    let tpts = emb.term_coordinates().points;
    for (j, t) in terms.iter().enumerate() {
        write!(w, "term,{}", csv_safe(t))?;
        for d in 0..k {
            write!(w, ",{:.6}", tpts[[j, d]])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Per-dimension singular values and alpha-inertia proportions at the
/// embedding's current alpha.
pub fn write_alpha_inertia_csv(w: &mut impl Write, emb: &Embedding) -> std::io::Result<()> {
    writeln!(w, "dim,sigma,proportion")?;
    let props = emb.alpha_inertia_proportions();
    for (d, (s, p)) in emb.sigma().iter().zip(props).enumerate() {
        writeln!(w, "{},{:.6},{:.6}", d + 1, s, p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{toy_matrix, TOY_COUNTS, TOY_TERMS};
    use approx::assert_abs_diff_eq;

    fn single_category_toy() -> DocumentTermMatrix {
        DocumentTermMatrix::from_dense_counts(
            (1..=6).map(|i| format!("doc{i}")).collect(),
            vec!["only".into(); 6],
            TOY_TERMS.iter().map(|t| t.to_string()).collect(),
            &TOY_COUNTS.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn small_cfg(methods: Vec<EvalMethod>, k_grid: Vec<usize>, alpha_grid: Vec<f64>) -> SweepConfig {
        SweepConfig {
            methods,
            schemes: vec![SchemeTag::Raw],
            metrics: vec![Metric::Euclidean],
            k_grid,
            alpha_grid,
            regime: Regime::Loocv,
            seed: 0,
        }
    }

    #[test]
    fn default_grids_match_design() {
        let k = default_k_grid();
        let a = default_alpha_grid();
        assert_eq!(k.len(), 40);
        assert_eq!(a.len(), 47);
        assert_eq!(k.len() * a.len(), 1880);
        assert_eq!(k.first(), Some(&1));
        assert_eq!(k[19], 20);
        assert_eq!(k[20], 22);
        assert_eq!(k.last(), Some(&100));
        assert_abs_diff_eq!(a[0], -6.0);
        assert_abs_diff_eq!(a[8], -2.0);
        assert_abs_diff_eq!(a[9], -1.8, epsilon = 1e-12);
        assert_abs_diff_eq!(a[38], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[39], 4.5);
        assert_abs_diff_eq!(*a.last().unwrap(), 8.0);
    }

    #[test]
    fn single_category_term_match_is_perfect() {
        let m = single_category_toy();
        let report = run_term_match(
            &m,
            &[SchemeTag::Raw],
            &[Metric::Euclidean],
            &Regime::Loocv,
            0,
        )
        .unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_abs_diff_eq!(report.cells[0].map, 1.0);
        assert_eq!(report.cells[0].n_queries, 6);
    }

    #[test]
    fn sweep_produces_every_requested_cell() {
        let m = toy_matrix();
        let cfg = SweepConfig {
            methods: vec![EvalMethod::Lsa, EvalMethod::Ca, EvalMethod::TermMatch],
            schemes: vec![SchemeTag::Raw, SchemeTag::Tfidf],
            metrics: vec![Metric::Euclidean, Metric::Cosine],
            k_grid: vec![1, 2, 3],
            alpha_grid: vec![0.0, 1.0],
            regime: Regime::Loocv,
            seed: 0,
        };
        let report = run_sweep(&m, &cfg).unwrap();
        // 2 reduced methods x 2 schemes x 2 metrics x 3 k x 2 alpha
        // + term matching: 2 schemes x 2 metrics
        assert_eq!(report.cells.len(), 48 + 4);
        for c in &report.cells {
            assert!(c.ok(), "unexpected failure: {:?}", c.failed);
            assert!((0.0..=1.0).contains(&c.map), "map out of range: {}", c.map);
            assert_eq!(c.n_queries, 6);
        }
        assert_eq!(report.manifest.n_folds, 6);
    }

    #[test]
    fn sweep_is_deterministic() {
        let m = toy_matrix();
        let cfg = small_cfg(vec![EvalMethod::Lsa, EvalMethod::Ca], vec![1, 2], vec![0.5, 1.0]);
        let a = run_sweep(&m, &cfg).unwrap();
        let b = run_sweep(&m, &cfg).unwrap();
        assert_eq!(a.cells, b.cells);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_cells_csv(&mut ca, &a.cells).unwrap();
        write_cells_csv(&mut cb, &b.cells).unwrap();
        assert_eq!(ca, cb, "cells csv must be byte-identical");
    }

    #[test]
    fn restricting_the_grid_restricts_the_report() {
        let m = toy_matrix();
        let full = run_sweep(
            &m,
            &small_cfg(vec![EvalMethod::Lsa], vec![1, 2, 4], vec![0.0, 1.0, 2.0]),
        )
        .unwrap();
        let sub = run_sweep(&m, &small_cfg(vec![EvalMethod::Lsa], vec![2], vec![1.0]))
            .unwrap();
        assert_eq!(sub.cells.len(), 1);
        let matching = full
            .cells
            .iter()
            .find(|c| c.k == 2 && alpha_eq(c.alpha, 1.0))
            .unwrap();
        assert_eq!(sub.cells[0].map, matching.map, "same cell, same value");
    }

    #[test]
    fn ks_beyond_rank_clamp_and_warn() {
        let m = toy_matrix();
        let report = run_sweep(
            &m,
            &small_cfg(vec![EvalMethod::Lsa], vec![4, 5, 60, 100], vec![1.0]),
        )
        .unwrap();
        assert!(
            !report.manifest.clamp_warnings.is_empty(),
            "k=100 on a rank-4 fold must warn"
        );
        // clamped cells collapse onto the rank: k=60 and k=100 agree
        let get = |k: usize| report.cells.iter().find(|c| c.k == k).unwrap().map;
        assert_eq!(get(60), get(100));
        assert_eq!(get(5), get(60), "rank is at most 5 on LOOCV toy folds");
    }

    #[test]
    fn unanswerable_queries_score_zero_but_run_completes() {
        // doc "z" holds a term nobody else has; its LOOCV query empties
        let m = DocumentTermMatrix::from_dense_counts(
            vec!["a".into(), "b".into(), "z".into()],
            vec!["m".into(), "m".into(), "m".into()],
            vec!["t1".into(), "t2".into(), "t3".into()],
            &[
                vec![2.0, 1.0, 0.0],
                vec![1.0, 2.0, 0.0],
                vec![0.0, 0.0, 3.0],
            ],
        )
        .unwrap();
        let report = run_term_match(
            &m,
            &[SchemeTag::Raw],
            &[Metric::Euclidean],
            &Regime::Loocv,
            0,
        )
        .unwrap();
        let cell = &report.cells[0];
        assert!(cell.ok());
        assert_eq!(cell.n_queries, 3);
        // queries a and b are perfect, z contributes 0
        assert_abs_diff_eq!(cell.map, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn summarize_modes_and_tie_breaks() {
        let mk = |k: usize, alpha: f64, map: f64| Cell {
            method: EvalMethod::Lsa,
            scheme: SchemeTag::Raw,
            metric: Metric::Euclidean,
            k,
            alpha,
            map,
            n_queries: 10,
            failed: None,
        };
        let report = SweepReport {
            cells: vec![
                mk(1, 0.0, 0.3),
                mk(1, 1.0, 0.5),
                mk(2, 0.0, 0.5),
                mk(2, 1.0, 0.4),
            ],
            manifest: Manifest::default(),
            best_cell_queries: Vec::new(),
        };
        let joint = summarize(&report, SummaryMode::JointOptimum).unwrap();
        assert_eq!(joint.len(), 1);
        // 0.5 twice: k=1 wins over k=2
        assert_eq!((joint[0].k, joint[0].alpha), (1, 1.0));

        let fixed_a = summarize(&report, SummaryMode::FixedAlpha(0.0)).unwrap();
        assert_eq!((fixed_a[0].k, fixed_a[0].map), (2, 0.5));

        let fixed_k = summarize(&report, SummaryMode::FixedK(2)).unwrap();
        assert_eq!((fixed_k[0].alpha, fixed_k[0].map), (0.0, 0.5));

        assert!(summarize(&report, SummaryMode::FixedK(9)).is_err());
    }

    #[test]
    fn summary_rows_equal_recomputed_argmax() {
        let m = toy_matrix();
        let cfg = SweepConfig {
            methods: vec![EvalMethod::Lsa, EvalMethod::Ca],
            schemes: vec![SchemeTag::Raw, SchemeTag::NRowL2],
            metrics: vec![Metric::Euclidean, Metric::Dot],
            k_grid: vec![1, 2, 3, 4],
            alpha_grid: vec![0.0, 0.5, 1.0],
            regime: Regime::Loocv,
            seed: 0,
        };
        let report = run_sweep(&m, &cfg).unwrap();
        let rows = summarize(&report, SummaryMode::JointOptimum).unwrap();
        assert_eq!(rows.len(), 8);
        for row in rows {
            let group: Vec<&Cell> = report
                .cells
                .iter()
                .filter(|c| {
                    c.method == row.method && c.scheme == row.scheme && c.metric == row.metric
                })
                .collect();
            let best = group.iter().map(|c| c.map).fold(f64::MIN, f64::max);
            assert_eq!(row.map, best);
            for c in &group {
                if c.map == best {
                    // the reported cell is the first in (k, alpha) order
                    assert!(
                        row.k < c.k || (row.k == c.k && row.alpha <= c.alpha),
                        "tie must break to smaller k then alpha"
                    );
                }
            }
        }
    }

    #[test]
    fn cells_csv_round_trips() {
        let m = toy_matrix();
        let cfg = small_cfg(vec![EvalMethod::Lsa, EvalMethod::TermMatch], vec![2], vec![-1.8, 1.0]);
        let report = run_sweep(&m, &cfg).unwrap();
        let mut buf = Vec::new();
        write_cells_csv(&mut buf, &report.cells).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,scheme,metric,k,alpha,map,n_queries,status\n"));
        assert!(text.contains(",-1.8,"));
        let parsed = parse_cells_csv(&text).unwrap();
        assert_eq!(parsed.len(), report.cells.len());
        for (p, c) in parsed.iter().zip(&report.cells) {
            assert_eq!(p.method, c.method);
            assert_eq!(p.k, c.k);
            assert_eq!(p.alpha, c.alpha);
            assert_abs_diff_eq!(p.map, c.map, epsilon = 1e-6);
        }
    }

    #[test]
    fn alpha_formatting_is_exact() {
        assert_eq!(fmt_alpha(1.0), "1");
        assert_eq!(fmt_alpha(-1.8), "-1.8");
        assert_eq!(fmt_alpha(0.0), "0");
        assert_eq!(fmt_alpha(4.5), "4.5");
        assert_eq!(fmt_alpha(0.25), "0.25");
        for a in default_alpha_grid() {
            let s = fmt_alpha(a);
            assert_eq!(s.parse::<f64>().unwrap(), a, "round trip for {a}");
        }
    }

    #[test]
    fn coordinate_dump_has_a_row_per_point() {
        let m = toy_matrix();
        let s = fit_weighting(&m, SchemeTag::Raw).unwrap();
        let w = apply_weighting(&s, &m).unwrap();
        let e = crate::embed::fit_ca(&w, 2).unwrap();
        let mut buf = Vec::new();
        write_coordinates_csv(&mut buf, &e, m.doc_ids(), m.vocabulary().terms()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 13, "header + 6 docs + 6 terms");
        assert_eq!(lines[0], "side,id,dim1,dim2");
        assert!(lines[1].starts_with("doc,doc1,"));
        assert!(lines[7].starts_with("term,lion,"));
    }

    #[test]
    fn alpha_inertia_dump_matches_published_row() {
        let m = toy_matrix();
        let s = fit_weighting(&m, SchemeTag::Raw).unwrap();
        let w = apply_weighting(&s, &m).unwrap();
        let e = crate::embed::fit_lsa(&w, 6).unwrap().set_alpha(1.5);
        let mut buf = Vec::new();
        write_alpha_inertia_csv(&mut buf, &e).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6, "header + 5 dimensions");
        let props: Vec<f64> = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        let want = [0.943, 0.055, 0.002, 0.000, 0.000];
        for (g, w) in props.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-3);
        }
    }

    #[test]
    fn map_vs_k_has_one_row_per_k() {
        let m = toy_matrix();
        let cfg = small_cfg(vec![EvalMethod::Lsa], vec![1, 2, 3, 4], vec![0.5, 1.0]);
        let report = run_sweep(&m, &cfg).unwrap();
        let mut buf = Vec::new();
        write_map_vs_k_csv(&mut buf, &report.cells, 1.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
        let mut buf2 = Vec::new();
        write_map_vs_alpha_csv(&mut buf2, &report.cells).unwrap();
        assert_eq!(String::from_utf8(buf2).unwrap().lines().count(), 1 + 8);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = SweepConfig {
            methods: vec![],
            schemes: vec![SchemeTag::Raw],
            metrics: vec![Metric::Euclidean],
            k_grid: vec![1],
            alpha_grid: vec![1.0],
            regime: Regime::Loocv,
            seed: 0,
        };
        assert!(cfg.validate().is_err());
        let mut cfg2 = cfg.clone();
        cfg2.methods = vec![EvalMethod::Lsa];
        cfg2.k_grid = vec![0];
        assert!(cfg2.validate().is_err());
    }
}
