//! IRS phase optimization on the unit-modulus manifold.
//!
//! When the paths are paired stream by stream, the singular values of the
//! BD-projected channel are approximately `|g_ki * nu^H c_ki|`, where
//! `c_ki = conj(a_D) ∘ a_A` couples a user-side IRS departure to a BS-side
//! IRS arrival. Substituting this into the BD rate gives a smooth surrogate
//! in `nu`, which is minimized (as a negated rate) by Riemannian descent.

pub mod manifold;

use std::f64::consts::LN_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{upa_response, ChannelSet, Path, PhaseVector};
use crate::config::{PathPairing, SystemConfig};
use crate::error::{Error, Result};
use crate::matrixkit::CVec;
use crate::signalmodel::GroupAssignment;

pub use manifold::{descend, retract, tangent_project, DescentOptions, DescentResult, TraceRow};

/// Coupling data of one user.
#[derive(Debug, Clone)]
pub struct UserCoupling {
    /// `c^{ii}` for each stream.
    pub c_diag: Vec<CVec>,
    /// Complex path gain of each stream, scale constant included.
    pub gains: Vec<Complex64>,
    /// `b_i = P / (|H_h| H zeta sigma^2) * |gain_i|^2`.
    pub b: Vec<f64>,
    /// `(i, j, c^{ij})` for stream pairs `i != j`.
    pub c_off: Vec<(usize, usize, CVec)>,
}

#[derive(Debug, Clone)]
pub struct CouplingSet {
    pub users: Vec<UserCoupling>,
    pub groups: GroupAssignment,
    pub bw_hz: f64,
}

/// `conj(a_irs(departure)) ∘ a_irs(arrival)`.
pub fn coupling_vector(departure: &Path, arrival: &Path, cfg: &SystemConfig) -> Result<CVec> {
    let ad = upa_response(departure.theta, departure.eta, cfg.f_y, cfg.f_z, cfg.d_over_lambda)?;
    let aa = upa_response(arrival.theta, arrival.eta, cfg.f_y, cfg.f_z, cfg.d_over_lambda)?;
    Ok(ad.conjugate().component_mul(&aa))
}

/// Product of array normalizations and antenna gains that multiplies every
/// `beta * alpha * nu^H c` term of the effective channel.
pub fn path_scale(cfg: &SystemConfig) -> f64 {
    let m = cfg.n_irs as f64;
    cfg.antenna_gain() * m * ((cfg.n_bs * cfg.n_ue) as f64 / (cfg.paths_l * cfg.paths_y) as f64).sqrt()
}

/// Index pairs `(user path, BS path)` for each stream of a user in group `h`.
pub fn stream_pairs(cfg: &SystemConfig, ch: &ChannelSet, k: usize, h: usize) -> Result<Vec<(usize, usize)>> {
    let zeta = cfg.zeta;
    let user_order = ch.user_paths[k].order_by_gain();
    let bs_order = ch.bs_paths.order_by_gain();
    if user_order.len() < zeta {
        return Err(Error::NotEnoughPaths(format!(
            "user {k} has {} paths for {zeta} streams",
            user_order.len()
        )));
    }
    let offset = match cfg.path_pairing {
        PathPairing::GroupBlock => h * zeta,
        PathPairing::GainSorted => 0,
    };
    if bs_order.len() < offset + zeta {
        return Err(Error::NotEnoughPaths(format!(
            "BS-IRS link has {} paths, pairing needs {}",
            bs_order.len(),
            offset + zeta
        )));
    }
    Ok((0..zeta).map(|i| (user_order[i], bs_order[offset + i])).collect())
}

/// Coupling vectors, gains and `b_i` for every user.
pub fn coupling_vectors(cfg: &SystemConfig, ch: &ChannelSet) -> Result<CouplingSet> {
    let groups = cfg.groups()?;
    let scale = path_scale(cfg);
    let big_h = groups.num_groups() as f64;
    let mut users = Vec::with_capacity(groups.num_users());
    for k in 0..groups.num_users() {
        let h = groups.group_of(k)?;
        let pairs = stream_pairs(cfg, ch, k, h)?;
        let snr = cfg.power_w() / (groups.members(h).len() as f64 * big_h * cfg.zeta as f64 * cfg.noise_w());
        let up = &ch.user_paths[k].paths;
        let bp = &ch.bs_paths.paths;
        let mut c_diag = Vec::with_capacity(pairs.len());
        let mut gains = Vec::with_capacity(pairs.len());
        let mut b = Vec::with_capacity(pairs.len());
        for &(ui, bj) in &pairs {
            c_diag.push(coupling_vector(&up[ui], &bp[bj], cfg)?);
            let g = up[ui].gain * bp[bj].gain * scale;
            b.push(snr * g.norm_sqr());
            gains.push(g);
        }
        let mut c_off = Vec::new();
        for (i, &(ui, _)) in pairs.iter().enumerate() {
            for (j, &(_, bj)) in pairs.iter().enumerate() {
                if i != j {
                    c_off.push((i, j, coupling_vector(&up[ui], &bp[bj], cfg)?));
                }
            }
        }
        users.push(UserCoupling { c_diag, gains, b, c_off });
    }
    Ok(CouplingSet { users, groups, bw_hz: cfg.bw_hz })
}

/// `D_k(i,i) = gain_i * nu^H c^{ii}` per user.
pub fn sigma_approx(coupling: &CouplingSet, nu: &PhaseVector) -> Vec<Vec<Complex64>> {
    let v = nu.as_vector();
    coupling
        .users
        .iter()
        .map(|u| u.c_diag.iter().zip(&u.gains).map(|(c, g)| g * v.dotc(c)).collect())
        .collect()
}

/// Surrogate rate of each user in bit/s.
pub fn approx_user_rates(coupling: &CouplingSet, nu: &CVec) -> Vec<f64> {
    coupling
        .users
        .iter()
        .map(|u| {
            coupling.bw_hz
                * u.c_diag
                    .iter()
                    .zip(&u.b)
                    .map(|(c, b)| (1.0 + b * nu.dotc(c).norm_sqr()).log2())
                    .sum::<f64>()
        })
        .collect()
}

/// Lowest-rate member of each group (lowest index on ties).
pub fn bottlenecks(coupling: &CouplingSet, rates: &[f64]) -> Vec<usize> {
    coupling
        .groups
        .iter()
        .map(|g| {
            let mut best = g[0];
            for &k in &g[1..] {
                if rates[k] < rates[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn objective_raw(coupling: &CouplingSet, nu: &CVec) -> f64 {
    let rates = approx_user_rates(coupling, nu);
    -bottlenecks(coupling, &rates).iter().map(|&k| rates[k]).sum::<f64>()
}

fn grad_raw(coupling: &CouplingSet, nu: &CVec) -> CVec {
    let rates = approx_user_rates(coupling, nu);
    let mut g = CVec::zeros(nu.len());
    for k in bottlenecks(coupling, &rates) {
        let u = &coupling.users[k];
        for (c, &b) in u.c_diag.iter().zip(&u.b) {
            let proj = c.dotc(nu);
            let w = -coupling.bw_hz * 2.0 * b / (LN_2 * (1.0 + b * proj.norm_sqr()));
            g.axpy(proj * w, c, Complex64::new(1.0, 0.0));
        }
    }
    g
}

/// `f(nu) = -sum_h min_{k in h} W sum_i log2(1 + b_i |nu^H c^{ii}|^2)`, bit/s.
pub fn objective_f(coupling: &CouplingSet, nu: &PhaseVector) -> f64 {
    objective_raw(coupling, nu.as_vector())
}

/// Euclidean gradient of `f` (`df/dRe + j df/dIm`), taken through each
/// group's bottleneck user.
pub fn euclidean_grad(coupling: &CouplingSet, nu: &PhaseVector) -> CVec {
    grad_raw(coupling, nu.as_vector())
}

/// Outcome of the phase optimization.
#[derive(Debug, Clone)]
pub struct PhaseOptResult {
    pub nu: PhaseVector,
    /// `f` in bit/s.
    pub f: f64,
    /// Starting point plus one row per accepted step; `f_value` in bit/s.
    pub trace: Vec<TraceRow>,
}

impl PhaseOptResult {
    /// Accepted steps (`S_1`).
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Riemannian descent of `f` from `nu0`.
///
/// The line search runs on `f / |f(nu0)|`, so the unit initial step does not
/// depend on the SNR or bandwidth; trace values are reported in bit/s.
pub fn optimize_phases(coupling: &CouplingSet, nu0: &PhaseVector, opts: &DescentOptions) -> Result<PhaseOptResult> {
    let f0 = objective_raw(coupling, nu0.as_vector()).abs();
    let w = if f0 > 0.0 { f0 } else { coupling.bw_hz };
    let res = descend(
        nu0.as_vector().clone(),
        |x| objective_raw(coupling, x) / w,
        |x| grad_raw(coupling, x) / Complex64::new(w, 0.0),
        opts,
    )?;
    let trace = res
        .trace
        .iter()
        .map(|r| TraceRow { f_value: r.f_value * w, grad_norm: r.grad_norm * w, ..*r })
        .collect();
    Ok(PhaseOptResult { nu: PhaseVector::new_unchecked(res.x), f: res.f * w, trace })
}

/// Size of the ignored off-diagonal couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffDiagReport {
    pub max_abs: f64,
    /// Largest off-diagonal over the smallest diagonal of the same user.
    pub max_rel: f64,
    pub violations: usize,
}

/// `max_{i != j} |nu^H c^{ij}|` and how many exceed `tau`.
pub fn offdiag_diagnostic(coupling: &CouplingSet, nu: &PhaseVector, tau: f64) -> OffDiagReport {
    let v = nu.as_vector();
    let mut rep = OffDiagReport { max_abs: 0.0, max_rel: 0.0, violations: 0 };
    for u in &coupling.users {
        let dmin = u.c_diag.iter().map(|c| v.dotc(c).norm()).fold(f64::INFINITY, f64::min);
        for (_, _, c) in &u.c_off {
            let x = v.dotc(c).norm();
            rep.max_abs = rep.max_abs.max(x);
            rep.max_rel = rep.max_rel.max(x / dmin.max(f64::MIN_POSITIVE));
            if x > tau {
                rep.violations += 1;
            }
        }
    }
    rep
}
