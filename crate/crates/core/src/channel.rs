//! Geometric mmWave channels through the IRS.
//!
//! The BS and users carry ULAs, the IRS a UPA lying in the y–z plane (normal
//! along +x). Each link is a sum of rank-one path terms; path 0 is the
//! line-of-sight path whose angles follow from the configured coordinates,
//! the remaining paths are NLOS with random angles.
//!
//! Angle conventions:
//! - BS ULA axis is x, so `sin r_D` is the x-component of the unit vector
//!   from BS to IRS.
//! - User ULA axis is y, so `sin r_A` is the y-component of the unit vector
//!   from the user to the IRS.
//! - For the IRS, a unit direction `u` maps to azimuth `atan2(u_y, u_x)` and
//!   elevation `asin(u_z)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{dbi_to_amplitude, SystemConfig};
use crate::error::{Error, Result};
use crate::matrixkit::{CMat, CVec};

/// One propagation path.
///
/// `theta`/`eta` are the IRS-side azimuth/elevation (arrival for BS→IRS,
/// departure for IRS→user); `r` is the far-end ULA angle (BS departure or
/// user arrival).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub theta: f64,
    pub eta: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Path indices sorted by descending gain magnitude (stable).
    pub fn order_by_gain(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.paths.len()).collect();
        idx.sort_by(|&a, &b| {
            self.paths[b]
                .gain
                .norm()
                .partial_cmp(&self.paths[a].gain.norm())
                .expect("finite gains")
        });
        idx
    }
}

/// One channel realization.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// `H^B`, shape `M × N^B`.
    pub h_bs_irs: CMat,
    /// `H^R_k`, shape `N^U × M` per user.
    pub h_irs_ue: Vec<CMat>,
    pub bs_paths: PathSet,
    pub user_paths: Vec<PathSet>,
    pub user_positions: Vec<[f64; 3]>,
}

/// IRS phase vector `nu` with unit-modulus entries `exp(-j phi_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(CVec);

impl PhaseVector {
    pub const MODULUS_TOL: f64 = 1e-12;

    /// Wraps `v` if every entry has unit modulus.
    pub fn new(v: CVec) -> Result<Self> {
        if let Some(m) = v
            .iter()
            .position(|z| (z.norm() - 1.0).abs() > Self::MODULUS_TOL || !z.re.is_finite())
        {
            return Err(Error::Config(format!("phase entry {m} is not unit modulus")));
        }
        Ok(Self(v))
    }

    /// Wraps without checking; callers guarantee unit modulus.
    pub(crate) fn new_unchecked(v: CVec) -> Self {
        Self(v)
    }

    /// `nu_m = exp(-j phi_m)`.
    pub fn from_phases(phi: &[f64]) -> Self {
        Self(DVector::from_iterator(
            phi.len(),
            phi.iter().map(|&p| Complex64::from_polar(1.0, -p)),
        ))
    }

    pub fn ones(m: usize) -> Self {
        Self(DVector::from_element(m, Complex64::new(1.0, 0.0)))
    }

    /// Uniform random phases on `[0, 2pi)`.
    pub fn random(m: usize, rng: &mut impl Rng) -> Self {
        let phi: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        Self::from_phases(&phi)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &CVec {
        &self.0
    }

    pub fn into_vector(self) -> CVec {
        self.0
    }

    /// Diagonal of `Phi`, i.e. `exp(j phi_m) = conj(nu_m)`.
    pub fn phi_diag(&self) -> CVec {
        self.0.map(|z| z.conj())
    }

    /// Largest `| |nu_m| - 1 |`.
    pub fn max_modulus_deviation(&self) -> f64 {
        self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// ULA steering vector.
pub fn ula_response(angle_r: f64, n: usize, d_over_lambda: f64) -> Result<CVec> {
    if n == 0 {
        return Err(Error::Config("ULA needs at least one antenna".into()));
    }
    let k = 2.0 * PI * d_over_lambda * angle_r.sin();
    let scale = 1.0 / (n as f64).sqrt();
    Ok(DVector::from_fn(n, |i, _| Complex64::from_polar(scale, k * i as f64)))
}

/// UPA steering vector with the vertical index varying fastest:
/// element `f1 * f_z + f2`.
pub fn upa_response(theta: f64, eta: f64, f_y: usize, f_z: usize, d_over_lambda: f64) -> Result<CVec> {
    if f_y == 0 || f_z == 0 {
        return Err(Error::Config("UPA dimensions must be at least 1".into()));
    }
    let ky = 2.0 * PI * d_over_lambda * eta.cos() * theta.sin();
    let kz = 2.0 * PI * d_over_lambda * eta.sin();
    let scale = 1.0 / ((f_y * f_z) as f64).sqrt();
    Ok(DVector::from_fn(f_y * f_z, |idx, _| {
        let (f1, f2) = (idx / f_z, idx % f_z);
        Complex64::from_polar(scale, ky * f1 as f64 + kz * f2 as f64)
    }))
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v).max(f64::MIN_POSITIVE);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// IRS azimuth/elevation of unit direction `u`.
fn irs_angles(u: [f64; 3]) -> (f64, f64) {
    (u[1].atan2(u[0]), u[2].clamp(-1.0, 1.0).asin())
}

/// LOS amplitude from the log-distance path loss.
fn los_amplitude(cfg: &SystemConfig, dist: f64) -> f64 {
    let pl_db = cfg.pathloss_ref_db + 10.0 * cfg.pathloss_exponent * dist.max(1e-3).log10();
    10f64.powf(-pl_db / 20.0)
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn complex_normal(rng: &mut impl Rng, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// LOS path from geometry followed by `count - 1` random NLOS paths.
fn draw_paths(
    cfg: &SystemConfig,
    count: usize,
    los: (f64, f64, f64),
    dist: f64,
    rng: &mut impl Rng,
) -> PathSet {
    let amp = los_amplitude(cfg, dist);
    let nlos_power = amp * amp * 10f64.powf(cfg.nlos_rel_db / 10.0);
    let mut paths = Vec::with_capacity(count);
    let phase = uniform(rng, 0.0, 2.0 * PI);
    paths.push(Path {
        gain: Complex64::from_polar(amp, phase),
        theta: los.0,
        eta: los.1,
        r: los.2,
    });
    for _ in 1..count {
        let theta = uniform(rng, -FRAC_PI_2, FRAC_PI_2);
        let eta = uniform(rng, -FRAC_PI_4, FRAC_PI_4);
        let r = uniform(rng, -FRAC_PI_2, FRAC_PI_2);
        let gain = complex_normal(rng, nlos_power);
        paths.push(Path { gain, theta, eta, r });
    }
    PathSet { paths }
}

/// BS→IRS channel `H^B` (`M × N^B`) and its paths.
pub fn gen_bs_irs(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<(CMat, PathSet)> {
    let to_irs = sub(cfg.irs_pos_m, cfg.bs_pos_m);
    let u_bs = unit(to_irs);
    let (theta, eta) = irs_angles(unit(sub(cfg.bs_pos_m, cfg.irs_pos_m)));
    let r = u_bs[0].clamp(-1.0, 1.0).asin();
    let paths = draw_paths(cfg, cfg.paths_y, (theta, eta, r), norm3(to_irs), rng);
    let h = bs_irs_from_paths(cfg, &paths)?;
    Ok((h, paths))
}

/// Rebuilds `H^B` from path data.
pub fn bs_irs_from_paths(cfg: &SystemConfig, paths: &PathSet) -> Result<CMat> {
    let m = cfg.n_irs;
    let scale = ((cfg.n_bs * m) as f64 / paths.len() as f64).sqrt();
    let mut h = CMat::zeros(m, cfg.n_bs);
    for p in &paths.paths {
        let a_irs = upa_response(p.theta, p.eta, cfg.f_y, cfg.f_z, cfg.d_over_lambda)?;
        let a_bs = ula_response(p.r, cfg.n_bs, cfg.d_over_lambda)?;
        h += a_irs * a_bs.adjoint() * (p.gain * scale);
    }
    Ok(h)
}

/// Uniform point in the horizontal disk around the user center.
pub fn draw_user_position(cfg: &SystemConfig, rng: &mut impl Rng) -> [f64; 3] {
    let rad = cfg.user_radius_m * rng.random::<f64>().sqrt();
    let ang = uniform(rng, 0.0, 2.0 * PI);
    let c = cfg.user_center_m;
    [c[0] + rad * ang.cos(), c[1] + rad * ang.sin(), c[2]]
}

/// IRS→user channel `H^R_k` (`N^U × M`) for a user at `user_pos`.
pub fn gen_irs_user(
    cfg: &SystemConfig,
    user_k: usize,
    user_pos: [f64; 3],
    rng: &mut impl Rng,
) -> Result<(CMat, PathSet)> {
    if user_k >= cfg.k_users {
        return Err(Error::IndexOutOfRange(format!(
            "user {user_k} with k_users = {}",
            cfg.k_users
        )));
    }
    let from_irs = sub(user_pos, cfg.irs_pos_m);
    let (theta, eta) = irs_angles(unit(from_irs));
    let u_ue = unit(sub(cfg.irs_pos_m, user_pos));
    let r = u_ue[1].clamp(-1.0, 1.0).asin();
    let paths = draw_paths(cfg, cfg.paths_l, (theta, eta, r), norm3(from_irs), rng);
    let h = irs_user_from_paths(cfg, &paths)?;
    Ok((h, paths))
}

/// Rebuilds `H^R_k` from path data.
pub fn irs_user_from_paths(cfg: &SystemConfig, paths: &PathSet) -> Result<CMat> {
    let m = cfg.n_irs;
    let scale = ((m * cfg.n_ue) as f64 / paths.len() as f64).sqrt();
    let mut h = CMat::zeros(cfg.n_ue, m);
    for p in &paths.paths {
        let a_ue = ula_response(p.r, cfg.n_ue, cfg.d_over_lambda)?;
        let a_irs = upa_response(p.theta, p.eta, cfg.f_y, cfg.f_z, cfg.d_over_lambda)?;
        h += a_ue * a_irs.adjoint() * (p.gain * scale);
    }
    Ok(h)
}

/// Draws a full realization: user positions, then `H^B`, then each `H^R_k`.
pub fn gen_channels(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<ChannelSet> {
    cfg.validate()?;
    let user_positions: Vec<[f64; 3]> =
        (0..cfg.k_users).map(|_| draw_user_position(cfg, rng)).collect();
    let (h_bs_irs, bs_paths) = gen_bs_irs(cfg, rng)?;
    let mut h_irs_ue = Vec::with_capacity(cfg.k_users);
    let mut user_paths = Vec::with_capacity(cfg.k_users);
    for (k, pos) in user_positions.iter().enumerate() {
        let (h, p) = gen_irs_user(cfg, k, *pos, rng)?;
        h_irs_ue.push(h);
        user_paths.push(p);
    }
    Ok(ChannelSet { h_bs_irs, h_irs_ue, bs_paths, user_paths, user_positions })
}

/// `H_k = G_t G_r H^R_k Phi H^B` with gains given in dBi.
pub fn effective_channel(
    h_bs: &CMat,
    h_ue_k: &CMat,
    nu: &PhaseVector,
    g_tx_dbi: f64,
    g_rx_dbi: f64,
) -> Result<CMat> {
    let m = nu.len();
    if h_ue_k.ncols() != m || h_bs.nrows() != m {
        return Err(Error::ShapeMismatch(format!(
            "H^R {:?}, Phi {m}x{m}, H^B {:?}",
            h_ue_k.shape(),
            h_bs.shape()
        )));
    }
    let gain = dbi_to_amplitude(g_tx_dbi) * dbi_to_amplitude(g_rx_dbi);
    let phi = nu.phi_diag();
    let mut left = h_ue_k.clone();
    for (j, p) in phi.iter().enumerate() {
        for z in left.column_mut(j).iter_mut() {
            *z *= p;
        }
    }
    Ok(left * h_bs * Complex64::new(gain, 0.0))
}

/// Effective channels of every user at `nu`.
pub fn effective_channels(cfg: &SystemConfig, ch: &ChannelSet, nu: &PhaseVector) -> Result<Vec<CMat>> {
    ch.h_irs_ue
        .iter()
        .map(|hr| effective_channel(&ch.h_bs_irs, hr, nu, cfg.g_tx_dbi, cfg.g_rx_dbi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixkit::{fro_norm, rank, testutil};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ula_trivial_cases() {
        let a = ula_response(0.0, 4, 0.5).unwrap();
        for z in a.iter() {
            assert_relative_eq!(z.re, 0.5, epsilon = 1e-15);
            assert!(z.im.abs() < 1e-15);
        }
        let b = ula_response(FRAC_PI_2, 2, 0.5).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_relative_eq!(b[0].re, s, epsilon = 1e-15);
        assert_relative_eq!(b[1].re, -s, epsilon = 1e-15);
        assert!(b[1].im.abs() < 1e-15);
        assert!(ula_response(0.3, 0, 0.5).is_err());
    }

    #[test]
    fn upa_trivial_cases() {
        let a = upa_response(0.0, 0.0, 3, 4, 0.5).unwrap();
        for z in a.iter() {
            assert_relative_eq!(z.re, 1.0 / 12f64.sqrt(), epsilon = 1e-15);
        }
        let one = upa_response(0.7, -0.2, 1, 1, 0.5).unwrap();
        assert_eq!(one.len(), 1);
        assert_relative_eq!(one[0].re, 1.0, epsilon = 1e-15);
        assert!(upa_response(0.0, 0.0, 0, 4, 0.5).is_err());
    }

    #[test]
    fn upa_vertical_index_fastest() {
        // Only elevation varies: entries along f2 change, entries along f1 repeat.
        let a = upa_response(0.0, 0.4, 2, 3, 0.5).unwrap();
        assert_relative_eq!((a[0] - a[3]).norm(), 0.0, epsilon = 1e-15);
        assert!((a[0] - a[1]).norm() > 1e-3);
    }

    proptest! {
        #[test]
        fn steering_vectors_unit_norm(r in -3.2f64..3.2, t in -3.2f64..3.2, n in 1usize..40, fy in 1usize..9, fz in 1usize..9) {
            let a = ula_response(r, n, 0.5).unwrap();
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
            let b = upa_response(r, t, fy, fz, 0.5).unwrap();
            prop_assert!((b.norm() - 1.0).abs() < 1e-12);
        }
    }

    fn single_path_cfg() -> SystemConfig {
        SystemConfig { paths_y: 1, paths_l: 1, ..Default::default() }
    }

    #[test]
    fn single_unit_path_norms() {
        let cfg = single_path_cfg();
        let unit_path = PathSet {
            paths: vec![Path { gain: Complex64::new(1.0, 0.0), theta: 0.3, eta: -0.1, r: 0.5 }],
        };
        let hb = bs_irs_from_paths(&cfg, &unit_path).unwrap();
        assert_relative_eq!(fro_norm(&hb), ((cfg.n_bs * cfg.n_irs) as f64).sqrt(), epsilon = 1e-9);
        assert_eq!(rank(&hb).unwrap(), 1);
        let hr = irs_user_from_paths(&cfg, &unit_path).unwrap();
        assert_relative_eq!(fro_norm(&hr), ((cfg.n_ue * cfg.n_irs) as f64).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn rank_bounded_by_path_count() {
        let cfg = SystemConfig { paths_y: 7, paths_l: 7, n_bs: 16, n_ue: 16, ..Default::default() };
        let ch = gen_channels(&cfg, &mut testutil::rng(5)).unwrap();
        assert!(rank(&ch.h_bs_irs).unwrap() <= 7);
        assert!(rank(&ch.h_irs_ue[0]).unwrap() <= 7);
        assert_eq!(ch.bs_paths.len(), 7);
        assert_eq!(ch.user_paths[2].len(), 7);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SystemConfig::default();
        let a = gen_channels(&cfg, &mut testutil::rng(11)).unwrap();
        let b = gen_channels(&cfg, &mut testutil::rng(11)).unwrap();
        assert_eq!(a.h_bs_irs, b.h_bs_irs);
        assert_eq!(a.h_irs_ue, b.h_irs_ue);
        assert_eq!(a.bs_paths, b.bs_paths);
    }

    #[test]
    fn nlos_angles_in_sampling_ranges() {
        let cfg = SystemConfig::default();
        let ch = gen_channels(&cfg, &mut testutil::rng(2)).unwrap();
        for p in ch.bs_paths.paths.iter().skip(1) {
            assert!(p.theta.abs() < FRAC_PI_2 && p.eta.abs() < FRAC_PI_4 && p.r.abs() < FRAC_PI_2);
        }
        let los = ch.bs_paths.paths[0];
        let nlos_max = ch.bs_paths.paths[1..].iter().map(|p| p.gain.norm()).fold(0.0, f64::max);
        assert!(los.gain.norm() > 0.0 && nlos_max.is_finite());
    }

    #[test]
    fn user_index_checked() {
        let cfg = SystemConfig::default();
        let mut r = testutil::rng(1);
        assert!(gen_irs_user(&cfg, cfg.k_users, [7.0, 148.0, 1.8], &mut r).is_err());
    }

    #[test]
    fn effective_channel_identity_phase() {
        let cfg = SystemConfig::default();
        let ch = gen_channels(&cfg, &mut testutil::rng(3)).unwrap();
        let nu = PhaseVector::ones(cfg.n_irs);
        let h = effective_channel(&ch.h_bs_irs, &ch.h_irs_ue[0], &nu, 0.0, 0.0).unwrap();
        let direct = &ch.h_irs_ue[0] * &ch.h_bs_irs;
        assert!(fro_norm(&(h - direct)) < 1e-12 * fro_norm(&ch.h_bs_irs).max(1e-30));
    }

    #[test]
    fn effective_channel_matches_triple_product() {
        let mut r = testutil::rng(8);
        let hb = testutil::randn(6, 4, &mut r);
        let hr = testutil::randn(3, 6, &mut r);
        let nu = PhaseVector::random(6, &mut r);
        let got = effective_channel(&hb, &hr, &nu, 3.0, 1.5).unwrap();
        let phi = CMat::from_diagonal(&nu.phi_diag());
        let g = dbi_to_amplitude(3.0) * dbi_to_amplitude(1.5);
        let want = (&hr * phi * &hb) * Complex64::new(g, 0.0);
        assert!(fro_norm(&(got - &want)) < 1e-12 * fro_norm(&want));
        assert!(effective_channel(&hb, &testutil::randn(3, 5, &mut r), &nu, 0.0, 0.0).is_err());
    }

    #[test]
    fn phase_vector_checks() {
        let nu = PhaseVector::from_phases(&[0.0, 1.0, 2.0]);
        assert!(nu.max_modulus_deviation() < 1e-15);
        assert_relative_eq!(nu.as_vector()[1].im, -(1.0f64).sin(), epsilon = 1e-15);
        let bad = DVector::from_vec(vec![Complex64::new(2.0, 0.0)]);
        assert!(PhaseVector::new(bad).is_err());
    }
}
