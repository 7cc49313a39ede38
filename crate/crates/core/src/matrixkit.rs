//! Dense complex matrix primitives: SVD, null-space bases, pseudo-inverse.
//!
//! Matrices are plain [`nalgebra::DMatrix`] values over [`Complex64`]. The SVD
//! is a one-sided Jacobi iteration, which stays accurate on the strongly
//! rank-deficient matrices that block diagonalization produces. This module
//! also pins down the conventions the rest of the crate relies on: descending
//! order with stable ties, a deterministic phase per singular pair, and the
//! numerical-rank threshold.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Thin SVD `a = u * diag(s) * vh`.
///
/// `u` is `rows × r`, `s` has length `r` and `vh` is `r × cols`, where
/// `r = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: CMat,
    pub s: Vec<f64>,
    pub vh: CMat,
}

impl SvdResult {
    /// Rebuilds `u * diag(s) * vh`.
    pub fn reconstruct(&self) -> CMat {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * &self.vh
    }

    /// Number of singular values above `rel_tol * s_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        if smax <= 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&s| s > rel_tol * smax).count()
    }
}

/// Default relative rank threshold for an `rows × cols` matrix.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    1e-10 * rows.max(cols).max(1) as f64
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds a matrix from row slices.
pub fn from_rows(rows: &[&[Complex64]]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    DMatrix::from_fn(r, cols, |i, j| rows[i][j])
}

/// Real diagonal matrix.
pub fn real_diag(d: &[f64]) -> CMat {
    let n = d.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { c(d[i], 0.0) } else { c(0.0, 0.0) })
}

pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_finite(a: &CMat) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch("matrix has non-finite entries".into()))
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD of a matrix with `rows >= cols`.
/// Returns `u` (`rows × cols`), unsorted singular values and `v^H`.
fn jacobi_tall(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (m, n) = a.shape();
    let mut g = a.clone();
    let mut v = CMat::identity(n, n);
    let eps = f64::EPSILON;
    // Columns below this norm are treated as exact zeros; rotating them only
    // amplifies rounding in denormal range.
    let floor = 1e-30 * fro_norm(a);
    let floor_sq = floor * floor;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, c(0.0, 0.0));
                for k in 0..m {
                    let (x, y) = (g[(k, p)], g[(k, q)]);
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let gabs = gamma.norm();
                if alpha <= floor_sq || beta <= floor_sq || gabs <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let ph = gamma / gabs;
                let zeta = (beta - alpha) / (2.0 * gabs);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let rot = |mat: &mut CMat| {
                    for k in 0..mat.nrows() {
                        let (x, y) = (mat[(k, p)], mat[(k, q)]);
                        mat[(k, p)] = x * cs - ph.conj() * y * sn;
                        mat[(k, q)] = ph * x * sn + y * cs;
                    }
                };
                rot(&mut g);
                rot(&mut v);
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..n)
        .map(|j| {
            let nrm = g.column(j).norm();
            if nrm > floor { nrm } else { 0.0 }
        })
        .collect();
    let mut u = CMat::zeros(m, n);
    let mut missing = Vec::new();
    for j in 0..n {
        if s[j] > floor && s[j] > 0.0 {
            u.set_column(j, &(g.column(j) / c(s[j], 0.0)));
        } else {
            missing.push(j);
        }
    }
    // Zero singular values leave their left vectors undetermined; complete
    // the basis with Gram-Schmidt over the coordinate axes.
    let mut axis = 0;
    for j in missing {
        while axis < m {
            let mut cand = CVec::zeros(m);
            cand[axis] = c(1.0, 0.0);
            axis += 1;
            for _ in 0..2 {
                for other in 0..n {
                    if other != j {
                        let col = u.column(other);
                        let proj = col.dotc(&cand);
                        cand -= col * proj;
                    }
                }
            }
            let nrm = cand.norm();
            if nrm > 0.5 {
                u.set_column(j, &(cand / c(nrm, 0.0)));
                break;
            }
        }
    }
    (u, s, v.adjoint())
}

/// Unsorted thin SVD of any non-empty matrix.
fn jacobi_svd(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    if a.nrows() >= a.ncols() {
        jacobi_tall(a)
    } else {
        let (u, s, vh) = jacobi_tall(&a.adjoint());
        (vh.adjoint(), s, u.adjoint())
    }
}

/// SVD with singular values sorted descending (stable on ties).
///
/// Each singular pair is rotated so that the largest-magnitude entry of the
/// left singular vector is real and positive (first such entry on ties).
pub fn svd(a: &CMat) -> Result<SvdResult> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    check_finite(a)?;
    let (u_raw, s_raw, vt_raw) = jacobi_svd(a);

    let r = s_raw.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| s_raw[j].partial_cmp(&s_raw[i]).expect("singular value is NaN"));

    let mut u = CMat::zeros(a.nrows(), r);
    let mut vh = CMat::zeros(r, a.ncols());
    let mut s = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        let ucol = u_raw.column(src);
        // Phase of the largest-magnitude entry; the pair (u, v^H) absorbs the
        // opposite rotations so the product is unchanged.
        let mut best = 0;
        let mut best_mag = -1.0;
        for (i, z) in ucol.iter().enumerate() {
            let m = z.norm();
            if m > best_mag * (1.0 + 1e-12) {
                best = i;
                best_mag = m;
            }
        }
        let rot = if best_mag > 0.0 {
            ucol[best].conj() / best_mag
        } else {
            c(1.0, 0.0)
        };
        u.set_column(dst, &(ucol * rot));
        vh.set_row(dst, &(vt_raw.row(src) * rot.conj()));
        s.push(s_raw[src]);
    }
    Ok(SvdResult { u, s, vh })
}

/// Orthonormal basis of the null space of `a`.
///
/// Singular values at or below `rel_tol * s_max` count as zero. A matrix with
/// no rows constrains nothing, so the identity basis is returned.
pub fn nullspace_basis(a: &CMat, rel_tol: f64) -> Result<CMat> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(CMat::identity(n, n));
    }
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    // A thin SVD of a wide matrix only returns the row space; padding with
    // zero rows up to square yields the full right basis.
    let work = if a.nrows() < n {
        let mut padded = CMat::zeros(n, n);
        padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let dec = svd(&work)?;
    let rank = dec.rank(rel_tol);
    let null_dim = n - rank;
    Ok(dec.vh.rows(rank, null_dim).adjoint())
}

/// Numerical rank with the default threshold.
pub fn rank(a: &CMat) -> Result<usize> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    Ok(svd(a)?.rank(default_rank_tol(a.nrows(), a.ncols())))
}

/// Moore-Penrose pseudo-inverse.
pub fn pseudo_inverse(a: &CMat) -> Result<CMat> {
    let dec = svd(a)?;
    let tol = default_rank_tol(a.nrows(), a.ncols());
    let smax = dec.s.first().copied().unwrap_or(0.0);
    let mut v = dec.vh.adjoint();
    for (j, &sj) in dec.s.iter().enumerate() {
        let inv = if smax > 0.0 && sj > tol * smax { 1.0 / sj } else { 0.0 };
        v.column_mut(j).scale_mut(inv);
    }
    Ok(v * dec.u.adjoint())
}

/// Element-wise product.
pub fn hadamard(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "hadamard of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

/// Vertical concatenation; all blocks must share the column count `cols`.
pub fn vstack(blocks: &[&CMat], cols: usize) -> Result<CMat> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        if b.ncols() != cols {
            return Err(Error::ShapeMismatch(format!(
                "vstack block has {} columns, expected {cols}",
                b.ncols()
            )));
        }
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(*b);
        r0 += b.nrows();
    }
    Ok(out)
}

/// Horizontal concatenation; all blocks must share the row count `rows`.
pub fn hstack(blocks: &[&CMat], rows: usize) -> Result<CMat> {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        if b.nrows() != rows {
            return Err(Error::ShapeMismatch(format!(
                "hstack block has {} rows, expected {rows}",
                b.nrows()
            )));
        }
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn max_abs(a: &CMat) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn svd_identity_and_diag() {
        let s = svd(&CMat::identity(3, 3)).unwrap();
        assert_eq!(s.s, vec![1.0, 1.0, 1.0]);

        let d = real_diag(&[1.0, 3.0, 2.0]);
        let s = svd(&d).unwrap();
        for (got, want) in s.s.iter().zip([3.0, 2.0, 1.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn svd_empty_is_error() {
        assert!(matches!(svd(&CMat::zeros(0, 3)), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn svd_reconstructs_random_8x5() {
        let a = randn(8, 5, &mut rng(1));
        let dec = svd(&a).unwrap();
        let err = fro_norm(&(&a - dec.reconstruct())) / fro_norm(&a);
        assert!(err < 1e-10, "err {err}");
        let uhu = dec.u.adjoint() * &dec.u;
        let vvh = &dec.vh * dec.vh.adjoint();
        assert!(max_abs(&(uhu - CMat::identity(5, 5))) < 1e-10);
        assert!(max_abs(&(vvh - CMat::identity(5, 5))) < 1e-10);
        assert!(dec.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_rank_deficient_products() {
        let mut r = rng(58);
        for _ in 0..20 {
            let a = randn(4, 2, &mut r) * randn(2, 8, &mut r);
            let q = svd(&randn(4, 4, &mut r)).unwrap().u;
            for m in [a.clone(), &q * &a, a.adjoint()] {
                let dec = svd(&m).unwrap();
                assert!(fro_norm(&(&m - dec.reconstruct())) < 1e-12 * fro_norm(&m));
                assert_eq!(dec.rank(1e-10), 2);
            }
            let s1 = svd(&a).unwrap().s;
            let s2 = svd(&(&q * &a)).unwrap().s;
            assert_relative_eq!(s1[0], s2[0], max_relative = 1e-12);
        }
    }

    #[test]
    fn svd_zero_matrix() {
        let dec = svd(&CMat::zeros(3, 2)).unwrap();
        assert_eq!(dec.s, vec![0.0, 0.0]);
        assert!(max_abs(&(dec.u.adjoint() * &dec.u - CMat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn svd_phase_convention() {
        let a = randn(6, 4, &mut rng(2));
        let dec = svd(&a).unwrap();
        for j in 0..dec.u.ncols() {
            let col = dec.u.column(j);
            let (idx, _) = col
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.norm().partial_cmp(&y.1.norm()).unwrap())
                .unwrap();
            assert!(col[idx].im.abs() < 1e-12 && col[idx].re > 0.0);
        }
    }

    #[test]
    fn nullspace_axis_aligned() {
        let a = from_rows(&[&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
        let n = nullspace_basis(&a, 1e-10).unwrap();
        assert_eq!(n.shape(), (2, 1));
        assert!(n[(0, 0)].norm() < 1e-14);
        assert_relative_eq!(n[(1, 0)].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nullspace_of_no_rows_is_identity() {
        let n = nullspace_basis(&CMat::zeros(0, 4), 1e-10).unwrap();
        assert_eq!(n, CMat::identity(4, 4));
    }

    #[test]
    fn nullspace_rank3_5x8() {
        let mut r = rng(3);
        let a = randn(5, 3, &mut r) * randn(3, 8, &mut r);
        let n = nullspace_basis(&a, default_rank_tol(5, 8)).unwrap();
        assert_eq!(n.shape(), (8, 5));
        assert!(fro_norm(&(&a * &n)) < 1e-9);
        let nhn = n.adjoint() * &n;
        assert!(max_abs(&(nhn - CMat::identity(5, 5))) < 1e-10);
    }

    #[test]
    fn pinv_simple_cases() {
        assert_eq!(pseudo_inverse(&CMat::identity(3, 3)).unwrap().shape(), (3, 3));
        let p = pseudo_inverse(&real_diag(&[2.0, 4.0])).unwrap();
        assert_relative_eq!(p[(0, 0)].re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[(1, 1)].re, 0.25, epsilon = 1e-14);
        assert!(p[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn pinv_full_column_rank_left_inverse() {
        let a = randn(6, 3, &mut rng(4));
        let p = pseudo_inverse(&a).unwrap();
        assert!(max_abs(&(&p * &a - CMat::identity(3, 3))) < 1e-9);
    }

    #[test]
    fn hadamard_cases() {
        let a = from_rows(&[&[c(1.0, 1.0), c(2.0, 0.0)]]);
        let b = from_rows(&[&[c(1.0, -1.0), c(3.0, 0.0)]]);
        let p = hadamard(&a, &b).unwrap();
        assert_eq!(p, from_rows(&[&[c(2.0, 0.0), c(6.0, 0.0)]]));
        let ones = CMat::from_element(1, 2, c(1.0, 0.0));
        assert_eq!(hadamard(&a, &ones).unwrap(), a);
        assert_eq!(hadamard(&a, &CMat::zeros(1, 2)).unwrap(), CMat::zeros(1, 2));
        assert!(hadamard(&a, &CMat::zeros(2, 1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn svd_invariants(seed in 0u64..10_000, rows in 1usize..9, cols in 1usize..9) {
            let a = randn(rows, cols, &mut rng(seed));
            let dec = svd(&a).unwrap();
            let k = rows.min(cols);
            prop_assert!(fro_norm(&(&a - dec.reconstruct())) <= 1e-9 * fro_norm(&a));
            prop_assert!(max_abs(&(dec.u.adjoint() * &dec.u - CMat::identity(k, k))) < 1e-10);
            prop_assert!(max_abs(&(&dec.vh * dec.vh.adjoint() - CMat::identity(k, k))) < 1e-10);
        }

        #[test]
        fn nullspace_rank_nullity(seed in 0u64..10_000, rows in 1usize..7, cols in 1usize..9, r in 1usize..5) {
            let mut g = rng(seed);
            let a = randn(rows, r, &mut g) * randn(r, cols, &mut g);
            let tol = default_rank_tol(rows, cols);
            let n = nullspace_basis(&a, tol).unwrap();
            let rk = rank(&a).unwrap();
            prop_assert_eq!(rk + n.ncols(), cols);
            let k = n.ncols();
            prop_assert!(max_abs(&(n.adjoint() * &n - CMat::identity(k, k))) < 1e-10);
            prop_assert!(fro_norm(&(&a * &n)) <= 1e-9 * fro_norm(&a).max(1.0));
        }

        #[test]
        fn pinv_penrose(seed in 0u64..10_000, rows in 1usize..8, cols in 1usize..8, r in 1usize..5) {
            let mut g = rng(seed);
            let a = randn(rows, r, &mut g) * randn(r, cols, &mut g);
            let p = pseudo_inverse(&a).unwrap();
            let na = fro_norm(&a);
            let np = fro_norm(&p);
            prop_assert!(fro_norm(&(&a * &p * &a - &a)) <= 1e-9 * na);
            prop_assert!(fro_norm(&(&p * &a * &p - &p)) <= 1e-9 * np);
            let ap = &a * &p;
            let pa = &p * &a;
            prop_assert!(fro_norm(&(ap.adjoint() - &ap)) <= 1e-9 * fro_norm(&ap));
            prop_assert!(fro_norm(&(pa.adjoint() - &pa)) <= 1e-9 * fro_norm(&pa));
        }
    }
}
