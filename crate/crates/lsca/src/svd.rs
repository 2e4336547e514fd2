//! Thin wrapper over LAPACK's divide-and-conquer SVD with a deterministic
//! sign convention and rank truncation.
//!
//! The full economy decomposition is always computed and then cut to the
//! requested rank. Because the cut is a pure prefix slice, factors obtained
//! at a larger rank and sliced down are bitwise identical to factors
//! requested at the smaller rank, which is what makes caching one
//! decomposition per training fold safe.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::error::{Error, Result};

/// Singular values at or below `RANK_REL_TOL * sigma_1` are treated as zero.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Truncated factors of `A = U diag(sigma) V^T`.
///
/// `u` is documents-by-rank, `v` is terms-by-rank, `sigma` is descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    u: Array2<f64>,
    sigma: Array1<f64>,
    v: Array2<f64>,
}

impl SvdFactors {
    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn sigma(&self) -> &Array1<f64> {
        &self.sigma
    }

    pub fn v(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
        (self.u, self.sigma, self.v)
    }

    /// Keep the leading `k` components. Slicing here equals computing the
    /// decomposition at rank `k` directly.
    pub fn truncate(&self, k: usize) -> SvdFactors {
        let k = k.min(self.rank());
        SvdFactors {
            u: self.u.slice(s![.., ..k]).to_owned(),
            sigma: self.sigma.slice(s![..k]).to_owned(),
            v: self.v.slice(s![.., ..k]).to_owned(),
        }
    }
}

/// Decompose `a`, keeping at most `max_rank` components and discarding
/// numerically zero singular values.
pub fn svd(a: &Array2<f64>, max_rank: usize) -> Result<SvdFactors> {
    if max_rank == 0 {
        return Err(Error::InvalidInput("svd rank must be >= 1".into()));
    }
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("svd input has a zero dimension".into()));
    }
    let (u_opt, sigma, vt_opt) = a
        .svddc(JobSvd::Some)
        .map_err(|e| Error::Svd(e.to_string()))?;
    let mut u = u_opt.ok_or_else(|| Error::Svd("left factor missing".into()))?;
    let vt = vt_opt.ok_or_else(|| Error::Svd("right factor missing".into()))?;

    let s1 = sigma.first().copied().unwrap_or(0.0);
    let cutoff = RANK_REL_TOL * s1;
    let rank = sigma.iter().take_while(|&&x| x > cutoff).count();
    let mut v = vt.t().to_owned();

    // Fix each component's sign so the entry of u with the largest
    // magnitude is positive; ties break on the lowest row index.
    for d in 0..rank {
        let col = u.column(d);
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, &x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if u[[best, d]] < 0.0 {
            u.column_mut(d).mapv_inplace(|x| -x);
            v.column_mut(d).mapv_inplace(|x| -x);
        }
    }

    let keep = rank.min(max_rank);
    Ok(SvdFactors {
        u: u.slice(s![.., ..keep]).to_owned(),
        sigma: sigma.slice(s![..keep]).to_owned(),
        v: v.slice(s![.., ..keep]).to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn toy_dense() -> Array2<f64> {
        crate::toy::toy_matrix().counts().to_dense()
    }

    #[test]
    fn toy_singular_values() {
        let f = svd(&toy_dense(), 6).unwrap();
        assert_eq!(f.rank(), 5, "one dependent direction collapses");
        let expected = [8.425239, 3.261191, 0.987979, 0.574286, 0.272146];
        for (got, want) in f.sigma().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
        for w in f.sigma().windows(2) {
            assert!(w[0] >= w[1], "singular values must descend");
        }
    }

    #[test]
    fn factors_are_orthonormal() {
        let f = svd(&toy_dense(), 6).unwrap();
        let utu = f.u().t().dot(f.u());
        let vtv = f.v().t().dot(f.v());
        for i in 0..f.rank() {
            for j in 0..f.rank() {
                let id = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(utu[[i, j]], id, epsilon = 1e-10);
                assert_abs_diff_eq!(vtv[[i, j]], id, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn full_rank_reconstructs_input() {
        let a = toy_dense();
        let f = svd(&a, 6).unwrap();
        let recon = f.u().dot(&Array2::from_diag(f.sigma())).dot(&f.v().t());
        for (x, y) in a.iter().zip(recon.iter()) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-8);
        }
    }

    #[test]
    fn sign_convention_pins_largest_entry_positive() {
        let f = svd(&toy_dense(), 6).unwrap();
        for d in 0..f.rank() {
            let col = f.u().column(d);
            let peak = col
                .iter()
                .cloned()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            assert!(peak > 0.0, "component {d} peak entry should be positive");
        }
    }

    #[test]
    fn truncation_equals_slicing() {
        let a = toy_dense();
        let full = svd(&a, 6).unwrap();
        let small = svd(&a, 2).unwrap();
        assert_eq!(small.u(), &full.truncate(2).u().view().to_owned());
        assert_eq!(small.sigma(), full.truncate(2).sigma());
        assert_eq!(small.v(), full.truncate(2).v());
    }

    #[test]
    fn repeated_calls_are_bitwise_identical() {
        let a = toy_dense();
        let f1 = svd(&a, 6).unwrap();
        let f2 = svd(&a, 6).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let a = Array2::<f64>::zeros((3, 4));
        let f = svd(&a, 3).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.u().dim(), (3, 0));
        assert_eq!(f.v().dim(), (4, 0));
    }

    #[test]
    fn non_square_shapes() {
        let tall = array![[1.0, 2.0], [0.5, 1.0], [3.0, 0.0], [0.0, 4.0]];
        let f = svd(&tall, 10).unwrap();
        assert_eq!(f.u().dim(), (4, 2));
        assert_eq!(f.v().dim(), (2, 2));

        let wide = tall.t().to_owned();
        let g = svd(&wide, 10).unwrap();
        assert_eq!(g.u().dim(), (2, 2));
        assert_eq!(g.v().dim(), (4, 2));
        for (a, b) in f.sigma().iter().zip(g.sigma().iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_request_above_content_is_clamped() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let f = svd(&a, 2).unwrap();
        assert_eq!(f.rank(), 1, "proportional rows leave one component");
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let a = Array2::<f64>::eye(3);
        let f = svd(&a, 3).unwrap();
        for s in f.sigma() {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let u = array![1.0, 2.0, 2.0];
        let v = array![3.0, 4.0];
        let mut a = Array2::<f64>::zeros((3, 2));
        for i in 0..3 {
            for j in 0..2 {
                a[[i, j]] = u[i] * v[j];
            }
        }
        let f = svd(&a, 2).unwrap();
        assert_eq!(f.rank(), 1);
        let norm_u = u.dot(&u).sqrt();
        let norm_v = v.dot(&v).sqrt();
        assert_abs_diff_eq!(f.sigma()[0], norm_u * norm_v, epsilon = 1e-10);
    }
}
