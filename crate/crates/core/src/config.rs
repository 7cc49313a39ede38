//! Scenario configuration, loadable from a flat JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signalmodel::GroupAssignment;

/// How the i-th user path is paired with a BS→IRS path when the diagonal
/// coupling vectors are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathPairing {
    /// Stream `i` of group `h` uses the BS path of rank `h * zeta + i`
    /// (both sets sorted by descending gain magnitude).
    GroupBlock,
    /// The i-th strongest user path pairs with the i-th strongest BS path.
    GainSorted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInit {
    Random,
    Ones,
}

/// All scalars of one scenario. Missing keys fall back to the desk-scale
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub n_bs: usize,
    pub n_ue: usize,
    pub m_bs: usize,
    pub m_ue: usize,
    pub n_irs: usize,
    pub f_y: usize,
    pub f_z: usize,
    pub k_users: usize,
    pub h_groups: usize,
    pub group_sizes: Vec<usize>,
    pub zeta: usize,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub bw_hz: f64,
    pub g_tx_dbi: f64,
    pub g_rx_dbi: f64,
    pub paths_y: usize,
    pub paths_l: usize,
    pub bs_pos_m: [f64; 3],
    pub irs_pos_m: [f64; 3],
    pub user_center_m: [f64; 3],
    pub user_radius_m: f64,
    pub seed: u64,
    pub d_over_lambda: f64,
    /// Free-space loss at 1 m (28 GHz).
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    /// Average NLOS path power relative to the LOS path.
    pub nlos_rel_db: f64,
    pub path_pairing: PathPairing,
    pub phase_init: PhaseInit,
    pub p_bs_static_dbm: f64,
    pub p_element_dbm: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_bs: 16,
            n_ue: 16,
            m_bs: 8,
            m_ue: 4,
            n_irs: 64,
            f_y: 8,
            f_z: 8,
            k_users: 4,
            h_groups: 2,
            group_sizes: vec![2, 2],
            zeta: 2,
            power_dbm: 40.0,
            noise_dbm: -90.0,
            bw_hz: 251.1886e6,
            g_tx_dbi: 24.5,
            g_rx_dbi: 0.0,
            paths_y: 8,
            paths_l: 2,
            bs_pos_m: [2.0, 0.0, 10.0],
            irs_pos_m: [0.0, 148.0, 10.0],
            user_center_m: [7.0, 148.0, 1.8],
            user_radius_m: 10.0,
            seed: 1,
            d_over_lambda: 0.5,
            pathloss_ref_db: 61.4,
            pathloss_exponent: 2.0,
            nlos_rel_db: -10.0,
            path_pairing: PathPairing::GroupBlock,
            phase_init: PhaseInit::Random,
            p_bs_static_dbm: 39.0,
            p_element_dbm: 10.0,
        }
    }
}

/// dBm to watts.
pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// dBi to a linear amplitude factor.
pub fn dbi_to_amplitude(dbi: f64) -> f64 {
    10f64.powf(dbi / 20.0)
}

impl SystemConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn power_w(&self) -> f64 {
        dbm_to_w(self.power_dbm)
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_w(self.noise_dbm)
    }

    /// `G_t * G_r` as an amplitude factor.
    pub fn antenna_gain(&self) -> f64 {
        dbi_to_amplitude(self.g_tx_dbi) * dbi_to_amplitude(self.g_rx_dbi)
    }

    /// Total streams sent by the BS.
    pub fn total_streams(&self) -> usize {
        self.h_groups * self.zeta
    }

    pub fn groups(&self) -> Result<GroupAssignment> {
        GroupAssignment::contiguous(&self.group_sizes)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        let counts = [
            ("n_bs", self.n_bs),
            ("n_ue", self.n_ue),
            ("m_bs", self.m_bs),
            ("m_ue", self.m_ue),
            ("f_y", self.f_y),
            ("f_z", self.f_z),
            ("k_users", self.k_users),
            ("h_groups", self.h_groups),
            ("zeta", self.zeta),
            ("paths_y", self.paths_y),
            ("paths_l", self.paths_l),
        ];
        for (name, v) in counts {
            if v == 0 {
                return err(format!("{name} must be at least 1"));
            }
        }
        if self.n_irs != self.f_y * self.f_z {
            return err(format!(
                "n_irs = {} but f_y * f_z = {}",
                self.n_irs,
                self.f_y * self.f_z
            ));
        }
        if self.group_sizes.len() != self.h_groups {
            return err(format!(
                "group_sizes has {} entries, h_groups = {}",
                self.group_sizes.len(),
                self.h_groups
            ));
        }
        if self.group_sizes.iter().any(|&g| g == 0) {
            return err("every group needs at least one user".into());
        }
        if self.group_sizes.iter().sum::<usize>() != self.k_users {
            return err(format!(
                "group sizes sum to {}, k_users = {}",
                self.group_sizes.iter().sum::<usize>(),
                self.k_users
            ));
        }
        if !(self.total_streams() <= self.m_bs && self.m_bs <= self.n_bs) {
            return err(format!(
                "need H*zeta <= m_bs <= n_bs, got {} <= {} <= {}",
                self.total_streams(),
                self.m_bs,
                self.n_bs
            ));
        }
        if !(self.zeta <= self.m_ue && self.m_ue <= self.n_ue) {
            return err(format!(
                "need zeta <= m_ue <= n_ue, got {} <= {} <= {}",
                self.zeta, self.m_ue, self.n_ue
            ));
        }
        let reals = [
            ("power_dbm", self.power_dbm),
            ("noise_dbm", self.noise_dbm),
            ("bw_hz", self.bw_hz),
            ("g_tx_dbi", self.g_tx_dbi),
            ("g_rx_dbi", self.g_rx_dbi),
            ("user_radius_m", self.user_radius_m),
            ("d_over_lambda", self.d_over_lambda),
            ("pathloss_ref_db", self.pathloss_ref_db),
            ("pathloss_exponent", self.pathloss_exponent),
            ("nlos_rel_db", self.nlos_rel_db),
            ("p_bs_static_dbm", self.p_bs_static_dbm),
            ("p_element_dbm", self.p_element_dbm),
        ];
        for (name, v) in reals {
            if !v.is_finite() {
                return err(format!("{name} must be finite"));
            }
        }
        if self.bw_hz <= 0.0 || self.user_radius_m < 0.0 || self.d_over_lambda <= 0.0 {
            return err("bw_hz and d_over_lambda must be positive, user_radius_m non-negative".into());
        }
        let pts = [self.bs_pos_m, self.irs_pos_m, self.user_center_m];
        if pts.iter().flatten().any(|v| !v.is_finite()) {
            return err("positions must be finite".into());
        }
        Ok(())
    }

    /// Copy with a different transmit power.
    pub fn with_power_dbm(&self, p: f64) -> Self {
        Self { power_dbm: p, ..self.clone() }
    }

    /// Copy with a square `side × side` IRS; `m` must be a perfect square.
    pub fn with_irs_elements(&self, m: usize) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if side * side != m || m == 0 {
            return Err(Error::Config(format!("IRS size {m} is not a perfect square")));
        }
        Ok(Self { n_irs: m, f_y: side, f_z: side, ..self.clone() })
    }

    pub fn with_streams(&self, zeta: usize) -> Self {
        Self { zeta, ..self.clone() }
    }

    /// Copy with `h` groups, each the size of the first configured group.
    pub fn with_groups(&self, h: usize) -> Self {
        let per = self.group_sizes.first().copied().unwrap_or(1);
        Self {
            h_groups: h,
            group_sizes: vec![per; h],
            k_users: per * h,
            ..self.clone()
        }
    }

    /// Copy with `n` antennas at both the BS and the users.
    pub fn with_antennas(&self, n: usize) -> Self {
        Self { n_bs: n, n_ue: n, ..self.clone() }
    }
}
