//! Document and term embeddings.
//!
//! Both methods reduce a weighted count matrix through a truncated SVD and
//! expose coordinates per dimension scaled by `sigma^alpha`:
//!
//! * LSA decomposes the matrix directly; documents sit at `U_k S_k^a`,
//!   terms at `V_k S_k^a`.
//! * CA decomposes the standardized residuals of the matrix viewed as a
//!   contingency table; documents sit at `Phi_k S_k^a` and terms at
//!   `Gamma_k S_k^a`, where `Phi = D_r^{-1/2} U` and `Gamma = D_c^{-1/2} V`
//!   divide out row and column masses. Full-rank Euclidean distances
//!   between document points then equal chi-square distances between row
//!   profiles.
//!
//! Out-of-sample queries are folded in (`q V_k` for LSA, the query profile
//! times `Gamma_k` for CA) and rescaled by `sigma^{alpha-1}`, so a training
//! document re-entered as a query lands exactly on its training point at
//! every alpha.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svd::svd;
use crate::weighting::{SchemeTag, WeightedMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lsa,
    Ca,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Lsa, Method::Ca];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Lsa => "lsa",
            Method::Ca => "ca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lsa" => Ok(Method::Lsa),
            "ca" => Ok(Method::Ca),
            other => Err(Error::InvalidInput(format!(
                "unknown method `{other}` (expected lsa or ca)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Rows,
    Columns,
}

/// Points in the embedded space at a fixed exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinates {
    pub points: Array2<f64>,
    pub side: Side,
    pub method: Method,
    pub scheme: SchemeTag,
    pub alpha: f64,
}

/// A fitted reduction of one weighted matrix.
///
/// `doc_std` and `term_std` hold standard coordinates (`U`/`V` for LSA,
/// `Phi`/`Gamma` for CA); principal coordinates multiply dimension `d` by
/// `sigma_d^alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    method: Method,
    scheme: SchemeTag,
    sigma: Array1<f64>,
    doc_std: Array2<f64>,
    term_std: Array2<f64>,
    row_mass: Option<Array1<f64>>,
    col_mass: Option<Array1<f64>>,
    requested_k: usize,
    alpha: f64,
}

impl Embedding {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn scheme(&self) -> SchemeTag {
        self.scheme
    }

    /// Retained dimensions. May be lower than requested when the matrix
    /// rank gives out first.
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    pub fn requested_k(&self) -> usize {
        self.requested_k
    }

    pub fn clamped(&self) -> bool {
        self.k() < self.requested_k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> &Array1<f64> {
        &self.sigma
    }

    pub fn n_docs(&self) -> usize {
        self.doc_std.nrows()
    }

    pub fn n_terms(&self) -> usize {
        self.term_std.nrows()
    }

    pub fn doc_standard(&self) -> &Array2<f64> {
        &self.doc_std
    }

    pub fn term_standard(&self) -> &Array2<f64> {
        &self.term_std
    }

    pub fn row_mass(&self) -> Option<&Array1<f64>> {
        self.row_mass.as_ref()
    }

    pub fn col_mass(&self) -> Option<&Array1<f64>> {
        self.col_mass.as_ref()
    }

    /// Same embedding viewed under a different exponent.
    pub fn set_alpha(&self, alpha: f64) -> Embedding {
        let mut e = self.clone();
        e.alpha = alpha;
        e
    }

    fn sigma_pow(&self, exp: f64) -> Array1<f64> {
        self.sigma.mapv(|s| s.powf(exp))
    }

    pub fn doc_coordinates(&self) -> Coordinates {
        let scale = self.sigma_pow(self.alpha);
        Coordinates {
            points: &self.doc_std * &scale,
            side: Side::Rows,
            method: self.method,
            scheme: self.scheme,
            alpha: self.alpha,
        }
    }

    pub fn term_coordinates(&self) -> Coordinates {
        let scale = self.sigma_pow(self.alpha);
        Coordinates {
            points: &self.term_std * &scale,
            side: Side::Columns,
            method: self.method,
            scheme: self.scheme,
            alpha: self.alpha,
        }
    }

    /// Fold a weighted query row into the document space at the current
    /// exponent. `cols`/`vals` index this embedding's vocabulary.
    pub fn project_query(&self, cols: &[u32], vals: &[f64]) -> Result<Array1<f64>> {
        let fold = self.fold_in(cols, vals)?;
        let scale = self.sigma_pow(self.alpha - 1.0);
        Ok(fold * scale)
    }

    /// Fold a query and divide by sigma, yielding standard coordinates.
    /// Principal coordinates at any alpha are these times `sigma^alpha`.
    pub fn query_standard(&self, cols: &[u32], vals: &[f64]) -> Result<Array1<f64>> {
        let fold = self.fold_in(cols, vals)?;
        Ok(fold / &self.sigma)
    }

    /// The raw fold-in: `q V_k` (LSA) or the query profile times `Gamma_k`
    /// (CA). Lands in the same space as `sigma^1` document coordinates.
    fn fold_in(&self, cols: &[u32], vals: &[f64]) -> Result<Array1<f64>> {
        if cols.len() != vals.len() {
            return Err(Error::DimensionMismatch {
                expected: cols.len(),
                got: vals.len(),
                context: "query columns vs values".into(),
            });
        }
        let n = self.term_std.nrows();
        if let Some(&c) = cols.iter().max() {
            if c as usize >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c as usize + 1,
                    context: "query column index vs vocabulary size".into(),
                });
            }
        }
        let k = self.k();
        let mut fold = Array1::<f64>::zeros(k);
        match self.method {
            Method::Lsa => {
                if vals.iter().all(|&v| v == 0.0) {
                    return Err(Error::InvalidInput("cannot project an all-zero query".into()));
                }
                for (&c, &v) in cols.iter().zip(vals) {
                    let row = self.term_std.row(c as usize);
                    for d in 0..k {
                        fold[d] += v * row[d];
                    }
                }
            }
            Method::Ca => {
                let total: f64 = vals.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidInput(
                        "CA query must have a positive total".into(),
                    ));
                }
                for (&c, &v) in cols.iter().zip(vals) {
                    let row = self.term_std.row(c as usize);
                    let p = v / total;
                    for d in 0..k {
                        fold[d] += p * row[d];
                    }
                }
            }
        }
        Ok(fold)
    }

    /// Share of alpha-inertia per retained dimension.
    pub fn alpha_inertia_proportions(&self) -> Vec<f64> {
        alpha_inertia(&self.sigma, self.alpha)
    }

    /// Sum of squared retained singular values. For CA this is the
    /// explained part of the chi-square statistic over the table total.
    pub fn total_inertia(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum()
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        method: Method,
        scheme: SchemeTag,
        sigma: Array1<f64>,
        doc_std: Array2<f64>,
        term_std: Array2<f64>,
        row_mass: Option<Array1<f64>>,
        col_mass: Option<Array1<f64>>,
        requested_k: usize,
        alpha: f64,
    ) -> Embedding {
        Embedding {
            method,
            scheme,
            sigma,
            doc_std,
            term_std,
            row_mass,
            col_mass,
            requested_k,
            alpha,
        }
    }
}

/// Proportions `sigma^{2a} / sum(sigma^{2a})` per dimension.
pub fn alpha_inertia(sigma: &Array1<f64>, alpha: f64) -> Vec<f64> {
    let pows: Vec<f64> = sigma.iter().map(|s| s.powf(2.0 * alpha)).collect();
    let sum: f64 = pows.iter().sum();
    if sum == 0.0 {
        return vec![0.0; pows.len()];
    }
    pows.iter().map(|p| p / sum).collect()
}

/// Decompose the weighted matrix directly.
pub fn fit_lsa(w: &WeightedMatrix, k: usize) -> Result<Embedding> {
    let dense = w.matrix().to_dense();
    let (u, sigma, v) = svd(&dense, k)?.into_parts();
    Ok(Embedding {
        method: Method::Lsa,
        scheme: w.tag(),
        sigma,
        doc_std: u,
        term_std: v,
        row_mass: None,
        col_mass: None,
        requested_k: k,
        alpha: 1.0,
    })
}

/// Decompose the standardized residuals of the matrix read as a
/// contingency table.
pub fn fit_ca(w: &WeightedMatrix, k: usize) -> Result<Embedding> {
    let a = w.matrix();
    if a.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "CA requires a non-negative matrix".into(),
        ));
    }
    let total = a.total();
    if total <= 0.0 {
        return Err(Error::InvalidInput("CA requires a positive table total".into()));
    }
    let row_sums = a.row_sums();
    if let Some(i) = row_sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroRow {
            row: i,
            scheme: "ca".into(),
            detail: "a non-positive row sum".into(),
        });
    }
    let col_sums = a.col_sums();
    if col_sums.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidInput(
            "CA requires positive column sums".into(),
        ));
    }
    let r: Vec<f64> = row_sums.iter().map(|s| s / total).collect();
    let c: Vec<f64> = col_sums.iter().map(|s| s / total).collect();

    let (m, n) = (a.rows(), a.cols());
    let mut s_mat = Array2::<f64>::zeros((m, n));
    for i in 0..m {
        for j in 0..n {
            s_mat[[i, j]] = -r[i] * c[j];
        }
    }
    for (i, (cols, vals)) in a.iter_rows().enumerate() {
        for (&j, &v) in cols.iter().zip(vals) {
            s_mat[[i, j as usize]] += v / total;
        }
    }
    for i in 0..m {
        let ri = r[i].sqrt();
        for j in 0..n {
            s_mat[[i, j]] /= ri * c[j].sqrt();
        }
    }

    let (u, sigma, v) = svd(&s_mat, k)?.into_parts();
    let kk = sigma.len();
    let mut phi = u;
    for i in 0..m {
        let ri = r[i].sqrt();
        for d in 0..kk {
            phi[[i, d]] /= ri;
        }
    }
    let mut gamma = v;
    for j in 0..n {
        let cj = c[j].sqrt();
        for d in 0..kk {
            gamma[[j, d]] /= cj;
        }
    }
    Ok(Embedding {
        method: Method::Ca,
        scheme: w.tag(),
        sigma,
        doc_std: phi,
        term_std: gamma,
        row_mass: Some(Array1::from_vec(r)),
        col_mass: Some(Array1::from_vec(c)),
        requested_k: k,
        alpha: 1.0,
    })
}

/// Chi-square distance between the profiles of rows `i` and `l`:
/// `sqrt(sum_j (p_ij/r_i - p_lj/r_l)^2 / c_j)`.
pub fn chi2_distance(w: &WeightedMatrix, i: usize, l: usize) -> Result<f64> {
    let a = w.matrix();
    let m = a.rows();
    if i >= m || l >= m {
        return Err(Error::IndexOutOfBounds {
            index: i.max(l),
            len: m,
            what: "matrix rows".into(),
        });
    }
    let total = a.total();
    let row_sums = a.row_sums();
    if row_sums[i] <= 0.0 || row_sums[l] <= 0.0 {
        return Err(Error::ZeroRow {
            row: if row_sums[i] <= 0.0 { i } else { l },
            scheme: "chi2".into(),
            detail: "a non-positive row sum".into(),
        });
    }
    let col_sums = a.col_sums();
    let (ci, vi) = a.row(i);
    let (cl, vl) = a.row(l);
    let mut acc = 0.0;
    let (mut p, mut q) = (0, 0);
    while p < ci.len() || q < cl.len() {
        let (col, a_i, a_l) = match (ci.get(p), cl.get(q)) {
            (Some(&x), Some(&y)) if x == y => {
                let t = (x, vi[p], vl[q]);
                p += 1;
                q += 1;
                t
            }
            (Some(&x), Some(&y)) if x < y => {
                let t = (x, vi[p], 0.0);
                p += 1;
                t
            }
            (Some(_), Some(&y)) => {
                let t = (y, 0.0, vl[q]);
                q += 1;
                t
            }
            (Some(&x), None) => {
                let t = (x, vi[p], 0.0);
                p += 1;
                t
            }
            (None, Some(&y)) => {
                let t = (y, 0.0, vl[q]);
                q += 1;
                t
            }
            (None, None) => break,
        };
        let diff = a_i / row_sums[i] - a_l / row_sums[l];
        let cj = col_sums[col as usize] / total;
        acc += diff * diff / cj;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocumentTermMatrix;
    use crate::toy::toy_matrix;
    use crate::weighting::{apply_weighting, fit_weighting};
    use approx::assert_abs_diff_eq;

    fn toy_raw() -> WeightedMatrix {
        let m = toy_matrix();
        let s = fit_weighting(&m, SchemeTag::Raw).unwrap();
        apply_weighting(&s, &m).unwrap()
    }

    fn pairwise(points: &Array2<f64>, i: usize, l: usize) -> f64 {
        let d = &points.row(i) - &points.row(l);
        d.dot(&d).sqrt()
    }

    #[test]
    fn lsa_full_rank_preserves_row_distances() {
        let w = toy_raw();
        let e = fit_lsa(&w, 6).unwrap();
        assert_eq!(e.k(), 5);
        let coords = e.doc_coordinates().points;
        let dense = w.matrix().to_dense();
        for i in 0..6 {
            for l in 0..6 {
                assert_abs_diff_eq!(
                    pairwise(&coords, i, l),
                    pairwise(&dense, i, l),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn lsa_k2_document_geometry() {
        let w = toy_raw();
        let e = fit_lsa(&w, 2).unwrap();
        let coords = e.doc_coordinates().points;
        // cat documents load on dim 1 roughly with their size; car
        // documents dominate dim 2
        assert_abs_diff_eq!(coords[[0, 0]], 3.4622346699, epsilon = 1e-6);
        assert_abs_diff_eq!(coords[[1, 0]], 5.4410560356, epsilon = 1e-6);
        assert_abs_diff_eq!(coords[[5, 1]], 2.5365999710, epsilon = 1e-6);
    }

    #[test]
    fn lsa_k2_jaguar_is_furthest_term() {
        let w = toy_raw();
        let e = fit_lsa(&w, 2).unwrap();
        let t = e.term_coordinates().points;
        let norms: Vec<f64> = (0..6).map(|j| t.row(j).dot(&t.row(j)).sqrt()).collect();
        let jaguar = norms[3];
        for (j, n) in norms.iter().enumerate() {
            if j != 3 {
                assert!(jaguar > *n, "jaguar should beat term {j} ({n})");
            }
        }
        assert_abs_diff_eq!(jaguar, 5.2870374827, epsilon = 1e-6);
    }

    #[test]
    fn ca_singular_values_and_inertia() {
        let w = toy_raw();
        let e = fit_ca(&w, 6).unwrap();
        assert_eq!(e.k(), 4, "the trivial dimension must be absent");
        let expected = [0.6893827018, 0.1314940547, 0.1244743660, 0.0443995140];
        for (got, want) in e.sigma().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-8);
        }
        assert!(e.sigma()[0] < 1.0, "no trivial unit singular value");
        assert_abs_diff_eq!(e.total_inertia(), 0.5100043805, epsilon = 1e-8);
    }

    #[test]
    fn ca_masses_sum_to_one() {
        let w = toy_raw();
        let e = fit_ca(&w, 6).unwrap();
        let r = e.row_mass().unwrap();
        let c = e.col_mass().unwrap();
        assert_abs_diff_eq!(r.sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.sum(), 1.0, epsilon = 1e-12);
        assert!(r.iter().all(|&x| x > 0.0));
        assert!(c.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn ca_centroid_identities() {
        let w = toy_raw();
        let e = fit_ca(&w, 6).unwrap();
        let r = e.row_mass().unwrap();
        let c = e.col_mass().unwrap();
        for d in 0..e.k() {
            let row_bal: f64 = (0..6).map(|i| r[i] * e.doc_standard()[[i, d]]).sum();
            let col_bal: f64 = (0..6).map(|j| c[j] * e.term_standard()[[j, d]]).sum();
            assert_abs_diff_eq!(row_bal, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(col_bal, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn ca_transition_formulas() {
        let w = toy_raw();
        let e = fit_ca(&w, 6).unwrap();
        let dense = w.matrix().to_dense();
        let total = w.matrix().total();
        let p = &dense / total;
        let r = e.row_mass().unwrap();
        let c = e.col_mass().unwrap();
        // D_r^{-1} P Gamma = Phi Sigma
        let lhs = {
            let mut profiles = p.clone();
            for i in 0..6 {
                profiles.row_mut(i).mapv_inplace(|x| x / r[i]);
            }
            profiles.dot(e.term_standard())
        };
        let rhs = e.doc_coordinates().points;
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
        // D_c^{-1} P^T Phi = Gamma Sigma
        let lhs2 = {
            let mut profiles = p.t().to_owned();
            for j in 0..6 {
                profiles.row_mut(j).mapv_inplace(|x| x / c[j]);
            }
            profiles.dot(e.doc_standard())
        };
        let rhs2 = e.term_coordinates().points;
        for (a, b) in lhs2.iter().zip(rhs2.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn ca_full_rank_distances_are_chi2() {
        let w = toy_raw();
        let e = fit_ca(&w, 6).unwrap();
        let coords = e.doc_coordinates().points;
        for i in 0..6 {
            for l in 0..6 {
                let direct = chi2_distance(&w, i, l).unwrap();
                assert_abs_diff_eq!(pairwise(&coords, i, l), direct, epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(
            chi2_distance(&w, 4, 5).unwrap(),
            0.5511,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            chi2_distance(&w, 0, 1).unwrap(),
            0.4042932643,
            epsilon = 1e-8
        );
        assert_eq!(chi2_distance(&w, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn chi2_ignores_row_scale() {
        let mut rows: Vec<Vec<f64>> = crate::toy::TOY_COUNTS.iter().map(|r| r.to_vec()).collect();
        rows.push(rows[2].iter().map(|v| v * 3.0).collect());
        let m = DocumentTermMatrix::from_dense_counts(
            (0..7).map(|i| format!("d{i}")).collect(),
            vec!["c".into(); 7],
            crate::toy::TOY_TERMS.iter().map(|t| t.to_string()).collect(),
            &rows,
        )
        .unwrap();
        let s = fit_weighting(&m, SchemeTag::Raw).unwrap();
        let w = apply_weighting(&s, &m).unwrap();
        assert_abs_diff_eq!(chi2_distance(&w, 2, 6).unwrap(), 0.0, epsilon = 1e-12);
        // equal profiles land on the same CA point
        let e = fit_ca(&w, 7).unwrap();
        let coords = e.doc_coordinates().points;
        assert_abs_diff_eq!(pairwise(&coords, 2, 6), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn ca_k2_doc4_sits_between_clusters() {
        let w = toy_raw();
        let e = fit_ca(&w, 2).unwrap();
        let coords = e.doc_coordinates().points;
        assert_abs_diff_eq!(coords[[3, 0]], 0.0098235186, epsilon = 1e-6);
        assert_abs_diff_eq!(coords[[3, 1]], -0.0350202700, epsilon = 1e-6);
        let cat_max = (0..3).map(|i| coords[[i, 0]]).fold(f64::MIN, f64::max);
        let car_min = (4..6).map(|i| coords[[i, 0]]).fold(f64::MAX, f64::min);
        assert!(cat_max < coords[[3, 0]] && coords[[3, 0]] < car_min);
    }

    #[test]
    fn ca_k2_jaguar_sits_between_term_clusters() {
        let w = toy_raw();
        let e = fit_ca(&w, 2).unwrap();
        let t = e.term_coordinates().points;
        let jaguar = t[[3, 0]];
        assert_abs_diff_eq!(jaguar, 0.1305899692, epsilon = 1e-6);
        let cat_hi = (0..3).map(|j| t[[j, 0]]).fold(f64::MIN, f64::max);
        let car_lo = (4..6).map(|j| t[[j, 0]]).fold(f64::MAX, f64::min);
        assert!(cat_hi < jaguar && jaguar < car_lo);
    }

    #[test]
    fn independent_margins_have_zero_inertia() {
        let m = DocumentTermMatrix::from_dense_counts(
            vec!["d1".into(), "d2".into()],
            vec!["c".into(), "c".into()],
            vec!["a".into(), "b".into()],
            &[vec![1.0, 2.0], vec![2.0, 4.0]],
        )
        .unwrap();
        let s = fit_weighting(&m, SchemeTag::Raw).unwrap();
        let w = apply_weighting(&s, &m).unwrap();
        let e = fit_ca(&w, 2).unwrap();
        assert!(e.total_inertia() < 1e-12, "independence leaves no residual");
    }

    #[test]
    fn alpha_inertia_matches_published_rows() {
        let w = toy_raw();
        let e = fit_lsa(&w, 6).unwrap();
        let cases: [(f64, [f64; 5]); 5] = [
            (-0.5, [0.017, 0.045, 0.148, 0.254, 0.536]),
            (0.0, [0.2, 0.2, 0.2, 0.2, 0.2]),
            (0.5, [0.623, 0.241, 0.073, 0.042, 0.020]),
            (1.0, [0.855, 0.128, 0.012, 0.004, 0.001]),
            (1.5, [0.943, 0.055, 0.002, 0.000, 0.000]),
        ];
        for (alpha, want) in cases {
            let got = e.set_alpha(alpha).alpha_inertia_proportions();
            for (g, w) in got.iter().zip(want) {
                assert_abs_diff_eq!(*g, w, epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn set_alpha_one_is_the_standard_fit() {
        let w = toy_raw();
        for e in [fit_lsa(&w, 6).unwrap(), fit_ca(&w, 6).unwrap()] {
            let direct = e.doc_coordinates().points;
            let via = e.set_alpha(1.0).doc_coordinates().points;
            assert_eq!(direct, via);
        }
    }

    #[test]
    fn training_docs_project_onto_themselves() {
        let w = toy_raw();
        for fit in [fit_lsa, fit_ca] {
            let e = fit(&w, 6).unwrap();
            for alpha in [-0.5, 0.0, 0.5, 1.0, 1.5] {
                let ea = e.set_alpha(alpha);
                let coords = ea.doc_coordinates().points;
                for i in 0..6 {
                    let (cols, vals) = w.matrix().row(i);
                    let q = ea.project_query(cols, vals).unwrap();
                    for d in 0..ea.k() {
                        assert_abs_diff_eq!(q[d], coords[[i, d]], epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn ca_merged_query_is_mass_weighted_combination() {
        let w = toy_raw();
        let e = fit_ca(&w, 6).unwrap();
        let (c1, v1) = w.matrix().row(0);
        let (c2, v2) = w.matrix().row(1);
        // merge the two sparse rows
        let mut merged: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
        for (&c, &v) in c1.iter().zip(v1) {
            *merged.entry(c).or_insert(0.0) += v;
        }
        for (&c, &v) in c2.iter().zip(v2) {
            *merged.entry(c).or_insert(0.0) += v;
        }
        let mc: Vec<u32> = merged.keys().copied().collect();
        let mv: Vec<f64> = merged.values().copied().collect();
        let q = e.project_query(&mc, &mv).unwrap();

        let s1: f64 = v1.iter().sum();
        let s2: f64 = v2.iter().sum();
        let q1 = e.project_query(c1, v1).unwrap();
        let q2 = e.project_query(c2, v2).unwrap();
        let expect = (q1 * s1 + q2 * s2) / (s1 + s2);
        for d in 0..e.k() {
            assert_abs_diff_eq!(q[d], expect[d], epsilon = 1e-10);
        }
    }

    #[test]
    fn ca_fold_in_ignores_query_scale() {
        let w = toy_raw();
        let e = fit_ca(&w, 6).unwrap();
        let (cols, vals) = w.matrix().row(0);
        let scaled: Vec<f64> = vals.iter().map(|v| v * 7.0).collect();
        let a = e.project_query(cols, vals).unwrap();
        let b = e.project_query(cols, &scaled).unwrap();
        for d in 0..e.k() {
            assert_abs_diff_eq!(a[d], b[d], epsilon = 1e-10);
        }
    }

    #[test]
    fn query_standard_times_sigma_alpha_is_projection() {
        let w = toy_raw();
        for e in [fit_lsa(&w, 6).unwrap(), fit_ca(&w, 6).unwrap()] {
            let (cols, vals) = w.matrix().row(3);
            let std = e.query_standard(cols, vals).unwrap();
            for alpha in [-0.5, 0.0, 1.0, 2.0] {
                let ea = e.set_alpha(alpha);
                let direct = ea.project_query(cols, vals).unwrap();
                for d in 0..e.k() {
                    assert_abs_diff_eq!(
                        std[d] * e.sigma()[d].powf(alpha),
                        direct[d],
                        epsilon = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn repeated_fits_are_bitwise_identical() {
        let w = toy_raw();
        assert_eq!(fit_lsa(&w, 6).unwrap(), fit_lsa(&w, 6).unwrap());
        assert_eq!(fit_ca(&w, 6).unwrap(), fit_ca(&w, 6).unwrap());
    }

    #[test]
    fn rank_clamp_is_reported() {
        let w = toy_raw();
        let e = fit_lsa(&w, 50).unwrap();
        assert_eq!(e.k(), 5);
        assert_eq!(e.requested_k(), 50);
        assert!(e.clamped());
        let e2 = fit_lsa(&w, 3).unwrap();
        assert!(!e2.clamped());
    }

    #[test]
    fn projection_errors() {
        let w = toy_raw();
        let e = fit_lsa(&w, 3).unwrap();
        assert!(e.project_query(&[9], &[1.0]).is_err());
        assert!(e.project_query(&[], &[]).is_err());
        let eca = fit_ca(&w, 3).unwrap();
        assert!(eca.project_query(&[], &[]).is_err());
    }
}
