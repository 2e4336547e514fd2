//! Binary persistence for count matrices and fitted models.
//!
//! One file format, little-endian throughout: a `LSCA` magic, a format
//! version, a payload kind byte, then length-prefixed sections. Models
//! additionally get a human-readable JSON sidecar (`<path>.json`) with
//! shapes, the exponent, and clamp information; the sidecar is
//! informational and never read back.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentTermMatrix, PreprocessConfig, Vocabulary};
use crate::embed::{Embedding, Method};
use crate::error::{Error, Result};
use crate::sparse::SparseRowMatrix;
use crate::svd::RANK_REL_TOL;
use crate::weighting::{SchemeTag, WeightingScheme};

const MAGIC: &[u8; 4] = b"LSCA";
const VERSION: u32 = 1;
const KIND_MATRIX: u8 = 1;
const KIND_MODEL: u8 = 2;

/// Everything needed to answer queries later: the embedding, the fitted
/// weighting (including tfidf global weights), labels, the vocabulary
/// and the preprocessing that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub embedding: Embedding,
    pub weighting: WeightingScheme,
    pub doc_ids: Vec<String>,
    pub categories: Vec<String>,
    pub vocabulary: Vocabulary,
    pub preprocess: PreprocessConfig,
}

impl FittedModel {
    /// Sparse count row of a tokenized query over the model vocabulary.
    /// Unknown tokens drop out.
    pub fn count_row(&self, tokens: &[String]) -> (Vec<u32>, Vec<f64>) {
        self.vocabulary.count_row(tokens)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub crate_version: String,
    pub method: String,
    pub scheme: String,
    pub k: usize,
    pub requested_k: usize,
    pub clamped: bool,
    pub alpha: f64,
    pub n_docs: usize,
    pub n_terms: usize,
    pub rank_rel_tol: f64,
}

impl ModelManifest {
    pub fn of(model: &FittedModel) -> ModelManifest {
        let e = &model.embedding;
        ModelManifest {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            method: e.method().name().to_string(),
            scheme: e.scheme().name().to_string(),
            k: e.k(),
            requested_k: e.requested_k(),
            clamped: e.clamped(),
            alpha: e.alpha(),
            n_docs: e.n_docs(),
            n_terms: e.n_terms(),
            rank_rel_tol: RANK_REL_TOL,
        }
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(kind: u8) -> Writer {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.push(kind);
        Writer { buf }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn str_list(&mut self, items: &[String]) {
        self.u64(items.len() as u64);
        for s in items {
            self.str(s);
        }
    }

    fn f64_slice(&mut self, items: &[f64]) {
        self.u64(items.len() as u64);
        for &v in items {
            self.f64(v);
        }
    }

    fn u32_slice(&mut self, items: &[u32]) {
        self.u64(items.len() as u64);
        for &v in items {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn opt_f64_slice(&mut self, items: Option<&[f64]>) {
        match items {
            None => self.u8(0),
            Some(s) => {
                self.u8(1);
                self.f64_slice(s);
            }
        }
    }

    fn matrix(&mut self, m: &Array2<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for &v in m.iter() {
            self.f64(v);
        }
    }

    fn sparse(&mut self, m: &SparseRowMatrix) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        for (cols, vals) in m.iter_rows() {
            self.u32_slice(cols);
            for &v in vals {
                self.f64(v);
            }
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, detail: impl Into<String>) -> Error {
        Error::Container {
            path: self.path.to_path_buf(),
            detail: detail.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(self.corrupt(format!(
                "truncated: wanted {n} bytes at offset {}, have {}",
                self.pos,
                self.data.len() - self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        // any honest length fits in the remaining bytes
        if v > self.data.len() as u64 {
            return Err(self.corrupt(format!("implausible {what} length {v}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.len("string")?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.corrupt("invalid utf-8 string"))
    }

    fn str_list(&mut self) -> Result<Vec<String>> {
        let n = self.len("list")?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.str()?);
        }
        Ok(out)
    }

    fn f64_slice(&mut self) -> Result<Vec<f64>> {
        let n = self.len("array")?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn u32_slice(&mut self) -> Result<Vec<u32>> {
        let n = self.len("array")?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.u32()?);
        }
        Ok(out)
    }

    fn opt_f64_slice(&mut self) -> Result<Option<Vec<f64>>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.f64_slice()?)),
            other => Err(self.corrupt(format!("bad option flag {other}"))),
        }
    }

    fn matrix(&mut self) -> Result<Array2<f64>> {
        let rows = self.len("matrix rows")?;
        let cols = self.len("matrix cols")?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| self.corrupt(format!("matrix shape: {e}")))
    }

    fn sparse(&mut self) -> Result<SparseRowMatrix> {
        let rows = self.len("sparse rows")?;
        let cols = self.len("sparse cols")?;
        let mut data = Vec::with_capacity(rows);
        for _ in 0..rows {
            let rc = self.u32_slice()?;
            let mut rv = Vec::with_capacity(rc.len());
            for _ in 0..rc.len() {
                rv.push(self.f64()?);
            }
            data.push(rc.into_iter().zip(rv).collect());
        }
        SparseRowMatrix::from_rows(cols, data)
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(self.corrupt(format!(
                "{} trailing bytes after payload",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn open(path: &Path, want_kind: u8) -> Result<Vec<u8>> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        data: &data,
        pos: 0,
        path,
    };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(r.corrupt("bad magic, not a container file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.corrupt(format!("unsupported format version {version}")));
    }
    let kind = r.u8()?;
    if kind != want_kind {
        return Err(r.corrupt(format!(
            "payload kind {kind}, expected {want_kind}"
        )));
    }
    let start = r.pos;
    let mut payload = data;
    payload.drain(..start);
    Ok(payload)
}

/// Persist a count matrix together with the preprocessing that produced
/// it, so downstream fits treat queries the same way.
pub fn save_matrix(
    path: impl AsRef<Path>,
    matrix: &DocumentTermMatrix,
    preprocess: &PreprocessConfig,
) -> Result<()> {
    let mut w = Writer::new(KIND_MATRIX);
    w.str_list(matrix.doc_ids());
    w.str_list(matrix.categories());
    w.str_list(matrix.vocabulary().terms());
    w.u32_slice(matrix.vocabulary().doc_frequencies());
    w.sparse(matrix.counts());
    let pp = serde_json::to_string(preprocess)
        .map_err(|e| Error::Config(format!("preprocess config serialization: {e}")))?;
    w.str(&pp);
    fs::write(path.as_ref(), &w.buf).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<(DocumentTermMatrix, PreprocessConfig)> {
    let path = path.as_ref();
    let payload = open(path, KIND_MATRIX)?;
    let mut r = Reader {
        data: &payload,
        pos: 0,
        path,
    };
    let doc_ids = r.str_list()?;
    let categories = r.str_list()?;
    let terms = r.str_list()?;
    let df = r.u32_slice()?;
    let counts = r.sparse()?;
    let pp_json = r.str()?;
    r.done()?;
    if categories.len() != doc_ids.len()
        || counts.rows() != doc_ids.len()
        || counts.cols() != terms.len()
        || df.len() != terms.len()
    {
        return Err(Error::Container {
            path: path.to_path_buf(),
            detail: "label, vocabulary and matrix shapes disagree".into(),
        });
    }
    let preprocess: PreprocessConfig = serde_json::from_str(&pp_json).map_err(|e| {
        Error::Container {
            path: path.to_path_buf(),
            detail: format!("preprocess section: {e}"),
        }
    })?;
    let matrix = DocumentTermMatrix::from_sparse_parts(
        counts,
        doc_ids,
        categories,
        Vocabulary::from_parts(terms, df),
    )?;
    Ok((matrix, preprocess))
}

pub fn save_model(path: impl AsRef<Path>, model: &FittedModel) -> Result<()> {
    let path = path.as_ref();
    let e = &model.embedding;
    let mut w = Writer::new(KIND_MODEL);
    w.u8(match e.method() {
        Method::Lsa => 0,
        Method::Ca => 1,
    });
    w.u8(match e.scheme() {
        SchemeTag::Raw => 0,
        SchemeTag::NRowL1 => 1,
        SchemeTag::NRowL2 => 2,
        SchemeTag::Tfidf => 3,
    });
    w.opt_f64_slice(model.weighting.global_weights());
    w.f64(e.alpha());
    w.u64(e.requested_k() as u64);
    w.f64_slice(e.sigma().as_slice().unwrap());
    w.matrix(e.doc_standard());
    w.matrix(e.term_standard());
    w.opt_f64_slice(e.row_mass().map(|m| m.as_slice().unwrap()));
    w.opt_f64_slice(e.col_mass().map(|m| m.as_slice().unwrap()));
    w.str_list(&model.doc_ids);
    w.str_list(&model.categories);
    w.str_list(model.vocabulary.terms());
    w.u32_slice(model.vocabulary.doc_frequencies());
    let pp = serde_json::to_string(&model.preprocess)
        .map_err(|e| Error::Config(format!("preprocess config serialization: {e}")))?;
    w.str(&pp);
    fs::write(path, &w.buf).map_err(|e| Error::io(path, e))?;

    let manifest = ModelManifest::of(model);
    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".json");
    PathBuf::from(os)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let path = path.as_ref();
    let payload = open(path, KIND_MODEL)?;
    let mut r = Reader {
        data: &payload,
        pos: 0,
        path,
    };
    let method = match r.u8()? {
        0 => Method::Lsa,
        1 => Method::Ca,
        other => return Err(r.corrupt(format!("bad method byte {other}"))),
    };
    let scheme = match r.u8()? {
        0 => SchemeTag::Raw,
        1 => SchemeTag::NRowL1,
        2 => SchemeTag::NRowL2,
        3 => SchemeTag::Tfidf,
        other => return Err(r.corrupt(format!("bad scheme byte {other}"))),
    };
    let global = r.opt_f64_slice()?;
    let alpha = r.f64()?;
    let requested_k = r.u64()? as usize;
    let sigma = r.f64_slice()?;
    let doc_std = r.matrix()?;
    let term_std = r.matrix()?;
    let row_mass = r.opt_f64_slice()?;
    let col_mass = r.opt_f64_slice()?;
    let doc_ids = r.str_list()?;
    let categories = r.str_list()?;
    let terms = r.str_list()?;
    let df = r.u32_slice()?;
    let pp_json = r.str()?;
    r.done()?;

    let k = sigma.len();
    let coherent = doc_std.ncols() == k
        && term_std.ncols() == k
        && doc_std.nrows() == doc_ids.len()
        && term_std.nrows() == terms.len()
        && categories.len() == doc_ids.len()
        && df.len() == terms.len()
        && row_mass.as_ref().is_none_or(|m| m.len() == doc_ids.len())
        && col_mass.as_ref().is_none_or(|m| m.len() == terms.len())
        && (method != Method::Ca || (row_mass.is_some() && col_mass.is_some()));
    if !coherent {
        return Err(Error::Container {
            path: path.to_path_buf(),
            detail: "model section shapes disagree".into(),
        });
    }
    if (scheme == SchemeTag::Tfidf) != global.is_some() {
        return Err(Error::Container {
            path: path.to_path_buf(),
            detail: "global weights present iff scheme is tfidf".into(),
        });
    }
    if let Some(g) = &global {
        if g.len() != terms.len() {
            return Err(Error::Container {
                path: path.to_path_buf(),
                detail: "global weight length vs vocabulary size".into(),
            });
        }
    }
    let preprocess: PreprocessConfig = serde_json::from_str(&pp_json).map_err(|e| {
        Error::Container {
            path: path.to_path_buf(),
            detail: format!("preprocess section: {e}"),
        }
    })?;

    let embedding = Embedding::from_parts(
        method,
        scheme,
        Array1::from_vec(sigma),
        doc_std,
        term_std,
        row_mass.map(Array1::from_vec),
        col_mass.map(Array1::from_vec),
        requested_k,
        alpha,
    );
    Ok(FittedModel {
        embedding,
        weighting: WeightingScheme::from_parts(scheme, global),
        doc_ids,
        categories,
        vocabulary: Vocabulary::from_parts(terms, df),
        preprocess,
    })
}
