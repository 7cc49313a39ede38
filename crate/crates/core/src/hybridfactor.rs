//! Factorization of a digital beamformer into a unit-modulus RF matrix and
//! an unconstrained baseband matrix.
//!
//! Alternates a few Riemannian descent steps on the vectorized RF matrix
//! (fixed baseband) with the least-squares baseband for the new RF matrix.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrixkit::{fro_norm, pseudo_inverse, svd, CMat, CVec};
use crate::phaseopt::manifold::{descend, DescentOptions};
use crate::signalmodel::BeamformerSet;

/// Column-major vectorization.
pub fn vectorize(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn devectorize(x: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if x.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!("{} entries for a {rows}x{cols} matrix", x.len())));
    }
    Ok(CMat::from_column_slice(rows, cols, x.as_slice()))
}

/// Least-squares baseband `pinv(F_R) B`.
pub fn solve_baseband(f_rf: &CMat, b: &CMat) -> Result<CMat> {
    Ok(pseudo_inverse(f_rf)? * b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    pub max_alternations: usize,
    /// Stop once the relative residual change drops below this.
    pub rel_tol: f64,
    /// Manifold steps per alternation.
    pub inner_steps: usize,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self { max_alternations: 100, rel_tol: 1e-6, inner_steps: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct Factorization {
    pub f_rf: CMat,
    pub f_bb: CMat,
    /// `||B - F_R F_B||_F / ||B||_F`: initial value, then one per alternation.
    pub residuals: Vec<f64>,
}

impl Factorization {
    /// Alternations performed (`S_2`).
    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("at least the initial residual")
    }
}

/// Phase-copy start: column `j < cols(B)` takes the phases of `B[:, j]`;
/// zero entries and surplus columns get random phases.
fn initial_rf(b: &CMat, n_rf: usize, rng: &mut impl Rng) -> CMat {
    let scale = fro_norm(b);
    CMat::from_fn(b.nrows(), n_rf, |i, j| {
        let random = Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
        if j < b.ncols() {
            let z = b[(i, j)];
            if z.norm() > 1e-12 * scale {
                return z / z.norm();
            }
        }
        random
    })
}

/// Approximates `b` by `F_R F_B` with `n_rf` unit-modulus RF columns.
pub fn factor(b: &CMat, n_rf: usize, rng: &mut impl Rng, opts: &FactorOptions) -> Result<Factorization> {
    if b.nrows() == 0 || b.ncols() == 0 || n_rf == 0 {
        return Err(Error::EmptyMatrix);
    }
    let scale = fro_norm(b);
    if scale == 0.0 {
        return Err(Error::ZeroPower);
    }
    let bn = b / Complex64::new(scale, 0.0);
    let rows = b.nrows();
    let mut f_rf = initial_rf(&bn, n_rf, rng);
    let mut f_bb = solve_baseband(&f_rf, &bn)?;
    let resid = |fr: &CMat, fb: &CMat| fro_norm(&(&bn - fr * fb));
    let mut residuals = vec![resid(&f_rf, &f_bb)];
    let inner = DescentOptions { max_iters: opts.inner_steps, rel_tol: 0.0, ..Default::default() };
    for _ in 0..opts.max_alternations {
        let prev = *residuals.last().expect("non-empty");
        if prev <= 1e-14 {
            break;
        }
        let fb = f_bb.clone();
        let fbh = fb.adjoint();
        // Dividing by the Lipschitz constant 2 s_max(F_B)^2 makes the unit
        // initial step a 1/L gradient step.
        let lip = 2.0 * svd(&fb)?.s[0].powi(2);
        if lip == 0.0 {
            break;
        }
        let obj = |x: &CVec| {
            let fr = devectorize(x, rows, n_rf).expect("fixed shape");
            fro_norm(&(&bn - fr * &fb)).powi(2) / lip
        };
        let grad = |x: &CVec| {
            let fr = devectorize(x, rows, n_rf).expect("fixed shape");
            vectorize(&((&bn - fr * &fb) * &fbh * Complex64::new(-2.0 / lip, 0.0)))
        };
        let res = descend(vectorize(&f_rf), obj, grad, &inner)?;
        f_rf = devectorize(&res.x, rows, n_rf)?;
        f_bb = solve_baseband(&f_rf, &bn)?;
        let r = resid(&f_rf, &f_bb);
        residuals.push(r);
        if (prev - r) / prev < opts.rel_tol {
            break;
        }
    }
    Ok(Factorization { f_rf, f_bb: f_bb * Complex64::new(scale, 0.0), residuals })
}

/// Scales `f_bb` so that `||F_R F_B||_F^2 = p`.
pub fn normalize_power(f_rf: &CMat, f_bb: &CMat, p: f64) -> Result<CMat> {
    let n = fro_norm(&(f_rf * f_bb));
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroPower);
    }
    Ok(f_bb * Complex64::new(p.sqrt() / n, 0.0))
}

/// Receive-side factorization; no power normalization.
pub fn factor_receive(j_k: &CMat, m_ue: usize, rng: &mut impl Rng, opts: &FactorOptions) -> Result<Factorization> {
    factor(j_k, m_ue, rng, opts)
}

/// Hybrid version of a digital set plus the transmit-side `S_2`.
#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub set: BeamformerSet,
    pub tx_iterations: usize,
    pub tx_residual: f64,
    pub rx_residual_max: f64,
}

/// Factors the transmit precoder (then normalizes to `power_w`) and every
/// user's combiner. RNG stream `first_stream` of `seed` drives the transmit
/// side and stream `first_stream + 1 + k` user `k`; receive sides run in
/// parallel.
pub fn hybridize(
    digital: &BeamformerSet,
    m_bs: usize,
    m_ue: usize,
    power_w: f64,
    seed: u64,
    first_stream: u64,
    opts: &FactorOptions,
) -> Result<HybridOutcome> {
    let BeamformerSet::Digital { j, .. } = digital else {
        return Err(Error::Config("hybridize expects a digital beamformer set".into()));
    };
    let rng_for = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    };
    let tx = factor(&digital.transmit_matrix(), m_bs, &mut rng_for(first_stream), opts)?;
    let f_bb = normalize_power(&tx.f_rf, &tx.f_bb, power_w)?;
    let rx: Vec<Factorization> = j
        .par_iter()
        .enumerate()
        .map(|(k, jk)| factor_receive(jk, m_ue, &mut rng_for(first_stream + 1 + k as u64), opts))
        .collect::<Result<_>>()?;
    let rx_residual_max = rx.iter().map(Factorization::final_residual).fold(0.0, f64::max);
    let (w_rf, w_bb) = rx.into_iter().map(|f| (f.f_rf, f.f_bb)).unzip();
    let (tx_iterations, tx_residual) = (tx.iterations(), tx.final_residual());
    Ok(HybridOutcome {
        set: BeamformerSet::Hybrid { f_rf: tx.f_rf, f_bb, w_rf, w_bb },
        tx_iterations,
        tx_residual,
        rx_residual_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixkit::{c, testutil};
    use proptest::prelude::*;

    fn unit_modulus(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
    }

    #[test]
    fn vectorization_order() {
        let v = vectorize(&CMat::identity(2, 2));
        assert_eq!(v.as_slice(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let one = CMat::from_element(1, 1, c(2.0, -1.0));
        assert_eq!(devectorize(&vectorize(&one), 1, 1).unwrap(), one);
        let m = testutil::randn(2, 3, &mut testutil::rng(1));
        assert_eq!(devectorize(&vectorize(&m), 2, 3).unwrap(), m);
        assert_eq!(vectorize(&m)[1], m[(1, 0)]);
        assert!(devectorize(&vectorize(&m), 3, 3).is_err());
    }

    #[test]
    fn baseband_examples() {
        let mut r = testutil::rng(2);
        let q = crate::matrixkit::svd(&testutil::randn(6, 3, &mut r)).unwrap().u;
        let b = testutil::randn(6, 2, &mut r);
        let fb = solve_baseband(&q, &b).unwrap();
        assert!(fro_norm(&(&fb - q.adjoint() * &b)) < 1e-12);
        let inside = &q * testutil::randn(3, 2, &mut r);
        let fb = solve_baseband(&q, &inside).unwrap();
        assert!(fro_norm(&(&q * fb - &inside)) < 1e-12);
    }

    #[test]
    fn baseband_beats_random_alternatives() {
        let mut r = testutil::rng(3);
        let f_rf = unit_modulus(8, 4, &mut r);
        let b = testutil::randn(8, 3, &mut r);
        let best = fro_norm(&(&b - &f_rf * solve_baseband(&f_rf, &b).unwrap()));
        for _ in 0..100 {
            let alt = testutil::randn(4, 3, &mut r);
            assert!(best <= fro_norm(&(&b - &f_rf * alt)) + 1e-12);
        }
    }

    #[test]
    fn unit_modulus_self_factorization() {
        let mut r = testutil::rng(4);
        let b = unit_modulus(8, 3, &mut r);
        let f = factor(&b, 3, &mut r, &FactorOptions::default()).unwrap();
        assert!(f.final_residual() < 1e-12);
        assert_eq!(f.iterations(), 0);
    }

    #[test]
    fn power_normalization() {
        let mut r = testutil::rng(5);
        let fr = unit_modulus(6, 3, &mut r);
        let fb = testutil::randn(3, 2, &mut r);
        let p = fro_norm(&(&fr * &fb)).powi(2);
        let same = normalize_power(&fr, &fb, p).unwrap();
        assert!(fro_norm(&(&same - &fb)) < 1e-12 * fro_norm(&fb));
        let half = normalize_power(&fr, &fb, p / 4.0).unwrap();
        assert!(fro_norm(&(&half * c(2.0, 0.0) - &fb)) < 1e-12 * fro_norm(&fb));
        assert!(normalize_power(&fr, &CMat::zeros(3, 2), 1.0).is_err());
    }

    #[test]
    fn planted_factorization_recovered() {
        let mut r = testutil::rng(6);
        let fr = unit_modulus(16, 8, &mut r);
        let b = &fr * testutil::randn(8, 4, &mut r);
        let f = factor(&b, 8, &mut r, &FactorOptions::default()).unwrap();
        assert!(f.final_residual() < 1e-6, "{:?}", f.residuals);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn residual_monotone_and_modulus_kept(seed in 0u64..1000) {
            let mut r = testutil::rng(seed);
            let b = testutil::randn(10, 3, &mut r);
            let f = factor(&b, 4, &mut r, &FactorOptions::default()).unwrap();
            prop_assert!(f.residuals.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(f.f_rf.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            let p = normalize_power(&f.f_rf, &f.f_bb, 3.0).unwrap();
            let got = fro_norm(&(&f.f_rf * p)).powi(2);
            prop_assert!((got - 3.0).abs() < 1e-10 * 3.0);
        }
    }
}
