//! Direct SINR and rate evaluation from raw beamformers.
//!
//! Nothing here assumes BD structure; the quantities are accumulated stream by
//! stream, so this module serves as the reference every other stage is
//! checked against.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::PhaseVector;
use crate::error::{Error, Result};
use crate::matrixkit::{fro_norm, CMat};

/// Disjoint, non-empty multicast groups covering users `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    groups: Vec<Vec<usize>>,
    user_group: Vec<usize>,
}

impl GroupAssignment {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        let k: usize = groups.iter().map(Vec::len).sum();
        let mut user_group = vec![usize::MAX; k];
        for (h, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::EmptyGroup(h));
            }
            for &u in g {
                if u >= k || user_group[u] != usize::MAX {
                    return Err(Error::Config(format!(
                        "groups must partition users 0..{k}; bad or repeated user {u}"
                    )));
                }
                user_group[u] = h;
            }
        }
        Ok(Self { groups, user_group })
    }

    /// Consecutive users fill group 0, then group 1, and so on.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut next = 0;
        let groups = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (next..next + s).collect();
                next += s;
                g
            })
            .collect();
        Self::new(groups)
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_group.len()
    }

    pub fn members(&self, h: usize) -> &[usize] {
        &self.groups[h]
    }

    pub fn group_of(&self, k: usize) -> Result<usize> {
        self.user_group
            .get(k)
            .copied()
            .ok_or_else(|| Error::IndexOutOfRange(format!("user {k} of {}", self.num_users())))
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.groups.iter().map(Vec::as_slice)
    }
}

/// Transmit and receive beamformers, either fully digital or hybrid.
#[derive(Debug, Clone)]
pub enum BeamformerSet {
    Digital {
        /// `B_h`, `N^B × zeta` per group.
        b: Vec<CMat>,
        /// `J_k`, `N^U × zeta` per user.
        j: Vec<CMat>,
    },
    Hybrid {
        /// `N^B × M^B`, unit-modulus entries.
        f_rf: CMat,
        /// `M^B × H zeta`, group blocks of `zeta` columns.
        f_bb: CMat,
        /// `N^U × M^U` per user.
        w_rf: Vec<CMat>,
        /// `M^U × zeta` per user.
        w_bb: Vec<CMat>,
    },
}

impl BeamformerSet {
    /// Composite `N^B × H zeta` precoder; group `h` owns columns
    /// `h*zeta .. (h+1)*zeta`.
    pub fn transmit_matrix(&self) -> CMat {
        match self {
            BeamformerSet::Digital { b, .. } => {
                let rows = b.first().map_or(0, CMat::nrows);
                let cols: usize = b.iter().map(CMat::ncols).sum();
                let mut t = CMat::zeros(rows, cols);
                let mut c0 = 0;
                for bh in b {
                    t.columns_mut(c0, bh.ncols()).copy_from(bh);
                    c0 += bh.ncols();
                }
                t
            }
            BeamformerSet::Hybrid { f_rf, f_bb, .. } => f_rf * f_bb,
        }
    }

    /// Composite `N^U × zeta` combiner of user `k`; column `i` receives stream `i`.
    pub fn receive(&self, k: usize) -> Result<CMat> {
        let oob = |n: usize| Error::IndexOutOfRange(format!("user {k} of {n}"));
        match self {
            BeamformerSet::Digital { j, .. } => j.get(k).cloned().ok_or_else(|| oob(j.len())),
            BeamformerSet::Hybrid { w_rf, w_bb, .. } => {
                let (r, b) = (w_rf.get(k).ok_or_else(|| oob(w_rf.len()))?, &w_bb[k]);
                Ok(r * b)
            }
        }
    }

    pub fn num_users(&self) -> usize {
        match self {
            BeamformerSet::Digital { j, .. } => j.len(),
            BeamformerSet::Hybrid { w_rf, .. } => w_rf.len(),
        }
    }

    pub fn is_hybrid(&self) -> bool {
        matches!(self, BeamformerSet::Hybrid { .. })
    }
}

/// Terms of one stream's SINR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StreamSinr {
    pub signal: f64,
    /// Other streams of the user's own group.
    pub intra: f64,
    /// Streams of all other groups.
    pub inter: f64,
    /// With bare `sigma^2` in the denominator.
    pub sinr: f64,
    /// With `sigma^2 * ||w||^2` in the denominator.
    pub sinr_physical: f64,
}

/// SINR of stream `i` at user `k`. `channels` are the effective `H_k`.
pub fn stream_sinr(
    bf: &BeamformerSet,
    channels: &[CMat],
    groups: &GroupAssignment,
    k: usize,
    i: usize,
    noise_w: f64,
) -> Result<StreamSinr> {
    let h = groups.group_of(k)?;
    let hk = channels
        .get(k)
        .ok_or_else(|| Error::IndexOutOfRange(format!("channel {k} of {}", channels.len())))?;
    let w_all = bf.receive(k)?;
    let t = bf.transmit_matrix();
    let zeta = w_all.ncols();
    if i >= zeta {
        return Err(Error::IndexOutOfRange(format!("stream {i} of {zeta}")));
    }
    if t.ncols() != zeta * groups.num_groups() || hk.ncols() != t.nrows() || hk.nrows() != w_all.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "W {:?}, H {:?}, F {:?}",
            w_all.shape(),
            hk.shape(),
            t.shape()
        )));
    }
    let w = w_all.column(i);
    let g = w.adjoint() * hk * &t;
    let own = h * zeta;
    let mut signal = 0.0;
    let mut intra = 0.0;
    let mut inter = 0.0;
    for (c, v) in g.iter().enumerate() {
        let p = v.norm_sqr();
        if c == own + i {
            signal = p;
        } else if (own..own + zeta).contains(&c) {
            intra += p;
        } else {
            inter += p;
        }
    }
    let w_pow = w.norm_squared();
    Ok(StreamSinr {
        signal,
        intra,
        inter,
        sinr: signal / (intra + inter + noise_w),
        sinr_physical: signal / (intra + inter + noise_w * w_pow),
    })
}

/// `W * sum_i log2(1 + xi_i)`.
pub fn user_rate(sinrs: &[f64], bw_hz: f64) -> f64 {
    bw_hz * sinrs.iter().map(|x| (1.0 + x.max(0.0)).log2()).sum::<f64>()
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    /// Indexed `[user][stream]`.
    pub streams: Vec<Vec<StreamSinr>>,
    pub user_rates: Vec<f64>,
    pub user_rates_physical: Vec<f64>,
    pub group_rates: Vec<f64>,
    pub sum_rate: f64,
    pub noise_w: f64,
}

impl RateReport {
    fn max_ratio(&self, f: impl Fn(&StreamSinr) -> f64) -> f64 {
        self.streams
            .iter()
            .flatten()
            .map(|s| if s.signal > 0.0 { f(s) / s.signal } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    /// Largest intra-group interference over signal, across all streams.
    pub fn max_intra_ratio(&self) -> f64 {
        self.max_ratio(|s| s.intra)
    }

    /// Largest inter-group interference over signal, across all streams.
    pub fn max_inter_ratio(&self) -> f64 {
        self.max_ratio(|s| s.inter)
    }
}

/// Per-stream SINRs, per-user rates, min-rate per group and their sum.
pub fn sum_rate(
    bf: &BeamformerSet,
    channels: &[CMat],
    groups: &GroupAssignment,
    noise_w: f64,
    bw_hz: f64,
) -> Result<RateReport> {
    let k_users = groups.num_users();
    if channels.len() != k_users || bf.num_users() != k_users {
        return Err(Error::ShapeMismatch(format!(
            "{} channels, {} combiners, {k_users} users",
            channels.len(),
            bf.num_users()
        )));
    }
    let mut streams = Vec::with_capacity(k_users);
    let mut user_rates = Vec::with_capacity(k_users);
    let mut user_rates_physical = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let zeta = bf.receive(k)?.ncols();
        let s: Vec<StreamSinr> = (0..zeta)
            .map(|i| stream_sinr(bf, channels, groups, k, i, noise_w))
            .collect::<Result<_>>()?;
        user_rates.push(user_rate(&s.iter().map(|x| x.sinr).collect::<Vec<_>>(), bw_hz));
        user_rates_physical.push(user_rate(
            &s.iter().map(|x| x.sinr_physical).collect::<Vec<_>>(),
            bw_hz,
        ));
        streams.push(s);
    }
    let group_rates: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|&k| user_rates[k]).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(RateReport {
        streams,
        user_rates,
        user_rates_physical,
        sum_rate: group_rates.iter().sum(),
        group_rates,
        noise_w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintReport {
    /// Max `| |x| - 1 |` over all RF entries (0 in digital mode).
    pub rf_modulus_dev: f64,
    /// Transmitted power over `P`.
    pub power_ratio: f64,
    pub phase_modulus_dev: f64,
}

impl ConstraintReport {
    pub fn is_compliant(&self, tol: f64) -> bool {
        self.rf_modulus_dev < tol && self.power_ratio <= 1.0 + tol && self.phase_modulus_dev < tol
    }
}

fn modulus_dev(m: &CMat) -> f64 {
    m.iter().map(|z: &Complex64| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
}

pub fn check_constraints(bf: &BeamformerSet, power_w: f64, nu: Option<&PhaseVector>) -> ConstraintReport {
    let rf_modulus_dev = match bf {
        BeamformerSet::Digital { .. } => 0.0,
        BeamformerSet::Hybrid { f_rf, w_rf, .. } => {
            w_rf.iter().map(modulus_dev).fold(modulus_dev(f_rf), f64::max)
        }
    };
    let t = bf.transmit_matrix();
    ConstraintReport {
        rf_modulus_dev,
        power_ratio: fro_norm(&t).powi(2) / power_w,
        phase_modulus_dev: nu.map_or(0.0, PhaseVector::max_modulus_deviation),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixkit::testutil;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent accumulation: explicit sums over antennas, no matrix products.
    fn naive_sinr(
        b: &[CMat],
        j: &[CMat],
        h: &[CMat],
        groups: &[Vec<usize>],
        k: usize,
        i: usize,
    ) -> (f64, f64, f64) {
        let gain = |w: &CMat, wi: usize, hk: &CMat, f: &CMat, fi: usize| -> f64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..hk.nrows() {
                for c in 0..hk.ncols() {
                    acc += w[(r, wi)].conj() * hk[(r, c)] * f[(c, fi)];
                }
            }
            acc.norm_sqr()
        };
        let own = groups.iter().position(|g| g.contains(&k)).unwrap();
        let sig = gain(&j[k], i, &h[k], &b[own], i);
        let mut intra = 0.0;
        for s in 0..b[own].ncols() {
            if s != i {
                intra += gain(&j[k], i, &h[k], &b[own], s);
            }
        }
        let mut inter = 0.0;
        for (g, bg) in b.iter().enumerate() {
            if g != own {
                for s in 0..bg.ncols() {
                    inter += gain(&j[k], i, &h[k], bg, s);
                }
            }
        }
        (sig, intra, inter)
    }

    fn random_instance(seed: u64, sizes: &[usize], zeta: usize) -> (Vec<CMat>, Vec<CMat>, Vec<CMat>, GroupAssignment) {
        let mut r = testutil::rng(seed);
        let k: usize = sizes.iter().sum();
        let b = (0..sizes.len()).map(|_| testutil::randn(6, zeta, &mut r)).collect();
        let j = (0..k).map(|_| testutil::randn(4, zeta, &mut r)).collect();
        let h = (0..k).map(|_| testutil::randn(4, 6, &mut r)).collect();
        (b, j, h, GroupAssignment::contiguous(sizes).unwrap())
    }

    #[test]
    fn groups_validate() {
        let g = GroupAssignment::contiguous(&[2, 1]).unwrap();
        assert_eq!(g.members(1), &[2]);
        assert_eq!(g.group_of(1).unwrap(), 0);
        assert!(g.group_of(3).is_err());
        assert!(GroupAssignment::new(vec![vec![0], vec![]]).is_err());
        assert!(GroupAssignment::new(vec![vec![0, 1], vec![1]]).is_err());
        assert!(GroupAssignment::new(vec![vec![1], vec![0]]).is_ok());
    }

    #[test]
    fn single_stream_sinr_is_snr() {
        let (b, j, h, g) = random_instance(1, &[1], 1);
        let bf = BeamformerSet::Digital { b: b.clone(), j: j.clone() };
        let s = stream_sinr(&bf, &h, &g, 0, 0, 0.5).unwrap();
        assert_eq!((s.intra, s.inter), (0.0, 0.0));
        assert_relative_eq!(s.sinr, s.signal / 0.5, max_relative = 1e-14);
    }

    #[test]
    fn zero_column_gives_zero_sinr() {
        let (mut b, j, h, g) = random_instance(2, &[2, 1], 2);
        b[0].column_mut(1).fill(Complex64::new(0.0, 0.0));
        let bf = BeamformerSet::Digital { b, j };
        assert_eq!(stream_sinr(&bf, &h, &g, 0, 1, 1.0).unwrap().sinr, 0.0);
        assert!(stream_sinr(&bf, &h, &g, 0, 2, 1.0).is_err());
        assert!(stream_sinr(&bf, &h, &g, 3, 0, 1.0).is_err());
    }

    #[test]
    fn rate_examples() {
        assert_eq!(user_rate(&[0.0, 0.0], 5.0), 0.0);
        assert_relative_eq!(user_rate(&[1.0], 1.0), 1.0);
        assert_relative_eq!(user_rate(&[3.0], 251.1886e6), 251.1886e6 * 2.0, max_relative = 1e-15);
    }

    #[test]
    fn sum_rate_singleton_groups_adds_user_rates() {
        let (b, j, h, g) = random_instance(3, &[1, 1, 1], 1);
        let bf = BeamformerSet::Digital { b, j };
        let rep = sum_rate(&bf, &h, &g, 0.1, 1.0).unwrap();
        assert_relative_eq!(rep.sum_rate, rep.user_rates.iter().sum::<f64>(), max_relative = 1e-14);
    }

    #[test]
    fn duplicate_users_give_equal_rate() {
        let (b, mut j, mut h, g) = random_instance(4, &[2, 1], 2);
        h[1] = h[0].clone();
        j[1] = j[0].clone();
        let bf = BeamformerSet::Digital { b, j };
        let rep = sum_rate(&bf, &h, &g, 0.1, 1.0).unwrap();
        assert_relative_eq!(rep.group_rates[0], rep.user_rates[0], max_relative = 1e-14);
        assert_relative_eq!(rep.user_rates[0], rep.user_rates[1], max_relative = 1e-14);
    }

    #[test]
    fn hybrid_receive_is_product() {
        let mut r = testutil::rng(5);
        let f_rf = testutil::randn(6, 4, &mut r);
        let f_bb = testutil::randn(4, 2, &mut r);
        let w_rf = vec![testutil::randn(4, 3, &mut r)];
        let w_bb = vec![testutil::randn(3, 2, &mut r)];
        let bf = BeamformerSet::Hybrid { f_rf: f_rf.clone(), f_bb: f_bb.clone(), w_rf: w_rf.clone(), w_bb: w_bb.clone() };
        assert_eq!(bf.transmit_matrix(), &f_rf * &f_bb);
        assert_eq!(bf.receive(0).unwrap(), &w_rf[0] * &w_bb[0]);
        assert!(bf.receive(1).is_err());
    }

    #[test]
    fn constraint_report_power_quadratic() {
        let (b, j, _, _) = random_instance(6, &[1, 1], 2);
        let bf = BeamformerSet::Digital { b: b.clone(), j: j.clone() };
        let r1 = check_constraints(&bf, 1.0, None);
        let b2: Vec<CMat> = b.iter().map(|x| x * Complex64::new(2.0, 0.0)).collect();
        let r2 = check_constraints(&BeamformerSet::Digital { b: b2, j }, 1.0, None);
        assert_relative_eq!(r2.power_ratio, 4.0 * r1.power_ratio, max_relative = 1e-12);
        assert_eq!(r1.rf_modulus_dev, 0.0);
    }

    #[test]
    fn removing_interferers_raises_sinr() {
        let (b, j, h, g) = random_instance(7, &[1, 2], 2);
        let before = sum_rate(&BeamformerSet::Digital { b: b.clone(), j: j.clone() }, &h, &g, 0.1, 1.0).unwrap();
        let mut b0 = b.clone();
        b0[1].fill(Complex64::new(0.0, 0.0));
        let after = sum_rate(&BeamformerSet::Digital { b: b0, j }, &h, &g, 0.1, 1.0).unwrap();
        assert!(after.streams[0][0].sinr > before.streams[0][0].sinr);
        assert!(after.streams[0][1].sinr > before.streams[0][1].sinr);
    }

    proptest! {
        #[test]
        fn matches_naive_accumulation(seed in 0u64..500, zeta in 1usize..3) {
            let sizes = [2usize, 1, 1];
            let (b, j, h, g) = random_instance(seed, &sizes, zeta);
            let groups: Vec<Vec<usize>> = g.iter().map(|x| x.to_vec()).collect();
            let bf = BeamformerSet::Digital { b: b.clone(), j: j.clone() };
            let noise = 0.3;
            let rep = sum_rate(&bf, &h, &g, noise, 2.0).unwrap();
            let mut want_groups = vec![f64::INFINITY; 3];
            for k in 0..4 {
                let mut rate = 0.0;
                for i in 0..zeta {
                    let (s, ia, ie) = naive_sinr(&b, &j, &h, &groups, k, i);
                    let got = rep.streams[k][i];
                    prop_assert!((got.signal - s).abs() <= 1e-10 * s.max(1.0));
                    prop_assert!((got.intra - ia).abs() <= 1e-10 * ia.max(1.0));
                    prop_assert!((got.inter - ie).abs() <= 1e-10 * ie.max(1.0));
                    rate += 2.0 * (1.0 + s / (ia + ie + noise)).log2();
                }
                let h_k = groups.iter().position(|x| x.contains(&k)).unwrap();
                want_groups[h_k] = f64::min(want_groups[h_k], rate);
            }
            let want: f64 = want_groups.iter().sum();
            prop_assert!((rep.sum_rate - want).abs() <= 1e-10 * want);
        }

        #[test]
        fn relabeling_within_group_invariant(seed in 0u64..200) {
            let (b, j, h, g) = random_instance(seed, &[2, 2], 1);
            let a = sum_rate(&BeamformerSet::Digital { b: b.clone(), j: j.clone() }, &h, &g, 0.2, 1.0).unwrap();
            let (mut j2, mut h2) = (j.clone(), h.clone());
            j2.swap(0, 1);
            h2.swap(0, 1);
            let c = sum_rate(&BeamformerSet::Digital { b, j: j2 }, &h2, &g, 0.2, 1.0).unwrap();
            prop_assert!((a.sum_rate - c.sum_rate).abs() <= 1e-12 * a.sum_rate.max(1.0));
        }
    }
}
