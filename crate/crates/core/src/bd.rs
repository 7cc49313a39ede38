//! Block-diagonalization beamformers and their closed-form rate.
//!
//! Group `h` transmits inside the null space of every other group's stacked
//! effective channel. Within that space each user's projected channel is
//! decomposed by SVD; the group precoder averages its members' leading right
//! singular vectors and each user combines with its leading left singular
//! vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrixkit::{fro_norm, nullspace_basis, svd, vstack, CMat};
use crate::signalmodel::{BeamformerSet, GroupAssignment};

/// Relative threshold below which a singular value of the stacked
/// other-group channel counts as zero.
pub const NULL_RANK_TOL: f64 = 1e-9;

/// Relative threshold (against `||H_k||_2`) for a projected stream to count
/// as usable.
pub const STREAM_RANK_TOL: f64 = 1e-9;

/// Which users' right singular vectors enter a group precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumMode {
    /// Members of the group only.
    #[default]
    Group,
    /// Every user, each projected into the group's null space. Users outside
    /// the group have (numerically) zero projected channels and contribute
    /// nothing once their rank-deficient directions are masked.
    AllUsers,
}

/// Per-group null spaces and per-user SVD pieces.
#[derive(Debug, Clone)]
pub struct BdDecomposition {
    /// `Ṽ_h`, `N^B × d_h` orthonormal columns.
    pub null_bases: Vec<CMat>,
    /// Leading `zeta` left singular vectors of `H_k Ṽ_h`, `N^U × zeta`.
    pub u: Vec<CMat>,
    /// Leading `zeta` singular values, descending.
    pub sigma: Vec<Vec<f64>>,
    /// Leading `zeta` right singular vectors, `d_h × zeta`.
    pub v: Vec<CMat>,
    pub groups: GroupAssignment,
    pub zeta: usize,
    /// Whether the null-space projection was applied.
    pub nulled: bool,
}

impl BdDecomposition {
    /// Power per stream, `P / (H zeta)`.
    pub fn stream_power(&self, power_w: f64) -> f64 {
        power_w / (self.groups.num_groups() * self.zeta) as f64
    }
}

/// Other groups' channels stacked in ascending user order.
pub fn stack_other_groups(channels: &[CMat], groups: &GroupAssignment, h: usize) -> Result<CMat> {
    if h >= groups.num_groups() {
        return Err(Error::IndexOutOfRange(format!("group {h} of {}", groups.num_groups())));
    }
    let cols = channels.first().map_or(0, CMat::ncols);
    let blocks: Vec<&CMat> = (0..groups.num_users())
        .filter(|&k| groups.group_of(k).map_or(false, |g| g != h))
        .map(|k| &channels[k])
        .collect();
    vstack(&blocks, cols)
}

/// Orthonormal basis of the null space of `h_tilde`.
pub fn null_projector(h_tilde: &CMat, n_bs: usize) -> Result<CMat> {
    if h_tilde.ncols() != n_bs {
        return Err(Error::ShapeMismatch(format!(
            "stacked channel has {} columns, expected {n_bs}",
            h_tilde.ncols()
        )));
    }
    let basis = nullspace_basis(h_tilde, NULL_RANK_TOL)?;
    if basis.ncols() == 0 {
        return Err(Error::BdInfeasible(format!(
            "stacked channel of other groups has full column rank {n_bs}"
        )));
    }
    Ok(basis)
}

fn spectral_norm(a: &CMat) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    Ok(svd(a)?.s[0])
}

fn decompose_inner(
    channels: &[CMat],
    groups: &GroupAssignment,
    zeta: usize,
    nulled: bool,
) -> Result<BdDecomposition> {
    if channels.len() != groups.num_users() {
        return Err(Error::ShapeMismatch(format!(
            "{} channels for {} users",
            channels.len(),
            groups.num_users()
        )));
    }
    let n_bs = channels.first().map_or(0, CMat::ncols);
    let mut null_bases = Vec::with_capacity(groups.num_groups());
    for h in 0..groups.num_groups() {
        let basis = if nulled {
            null_projector(&stack_other_groups(channels, groups, h)?, n_bs)?
        } else {
            CMat::identity(n_bs, n_bs)
        };
        if basis.ncols() < zeta {
            return Err(Error::BdInfeasible(format!(
                "group {h} null space has dimension {} < {zeta} streams",
                basis.ncols()
            )));
        }
        null_bases.push(basis);
    }
    let k_users = groups.num_users();
    let (mut u, mut sigma, mut v) = (
        Vec::with_capacity(k_users),
        Vec::with_capacity(k_users),
        Vec::with_capacity(k_users),
    );
    for (k, hk) in channels.iter().enumerate() {
        let h = groups.group_of(k)?;
        let projected = hk * &null_bases[h];
        let dec = svd(&projected)?;
        if dec.s.len() < zeta {
            return Err(Error::BdInfeasible(format!(
                "user {k} supports at most {} streams, {zeta} requested",
                dec.s.len()
            )));
        }
        let floor = STREAM_RANK_TOL * spectral_norm(hk)?;
        if dec.s[zeta - 1] <= floor {
            return Err(Error::BdInfeasible(format!(
                "user {k}: projected channel has fewer than {zeta} usable streams"
            )));
        }
        u.push(dec.u.columns(0, zeta).into_owned());
        sigma.push(dec.s[..zeta].to_vec());
        v.push(dec.vh.rows(0, zeta).adjoint());
    }
    Ok(BdDecomposition { null_bases, u, sigma, v, groups: groups.clone(), zeta, nulled })
}

/// Null spaces and projected SVDs for every group and user.
///
/// Fails with [`Error::BdInfeasible`] when a group's null space has fewer
/// than `zeta` dimensions or a user's projected channel has fewer than
/// `zeta` singular values above [`STREAM_RANK_TOL`].
pub fn decompose(channels: &[CMat], groups: &GroupAssignment, zeta: usize) -> Result<BdDecomposition> {
    decompose_inner(channels, groups, zeta, true)
}

/// Same construction with no null-space projection (plain per-user
/// eigen-beamforming). Inter-group interference is left in place.
pub fn decompose_unnulled(channels: &[CMat], groups: &GroupAssignment, zeta: usize) -> Result<BdDecomposition> {
    decompose_inner(channels, groups, zeta, false)
}

/// Digital beamformers plus the power actually produced before rescaling.
#[derive(Debug, Clone)]
pub struct BdBeamformers {
    pub set: BeamformerSet,
    /// `||B||_F^2 / P` before the global rescale to exactly `P`.
    pub pre_scale_power_ratio: f64,
}

/// Right singular vectors of `H_i Ṽ_h` restricted to directions with
/// non-negligible gain.
fn masked_right_vectors(hi: &CMat, basis: &CMat, zeta: usize) -> Result<CMat> {
    let projected = hi * basis;
    let dec = svd(&projected)?;
    let floor = STREAM_RANK_TOL * spectral_norm(hi)?;
    let mut v = dec.vh.rows(0, zeta.min(dec.s.len())).adjoint();
    for (j, &s) in dec.s.iter().take(zeta).enumerate() {
        if s <= floor {
            v.column_mut(j).fill(Complex64::new(0.0, 0.0));
        }
    }
    if v.ncols() < zeta {
        let mut padded = CMat::zeros(v.nrows(), zeta);
        padded.columns_mut(0, v.ncols()).copy_from(&v);
        v = padded;
    }
    Ok(v)
}

/// Group precoders `B_h` and combiners `J_k = U_k`, rescaled to total power `P`.
pub fn build_beamformers(
    decomp: &BdDecomposition,
    channels: &[CMat],
    power_w: f64,
    mode: SumMode,
) -> Result<BdBeamformers> {
    let groups = &decomp.groups;
    let zeta = decomp.zeta;
    let amp = decomp.stream_power(power_w).sqrt();
    let mut b = Vec::with_capacity(groups.num_groups());
    for (h, basis) in decomp.null_bases.iter().enumerate() {
        let members = groups.members(h);
        let mut acc = CMat::zeros(basis.ncols(), zeta);
        match mode {
            SumMode::Group => {
                for &k in members {
                    acc += &decomp.v[k];
                }
            }
            SumMode::AllUsers => {
                for (i, hi) in channels.iter().enumerate() {
                    acc += if members.contains(&i) {
                        decomp.v[i].clone()
                    } else {
                        masked_right_vectors(hi, basis, zeta)?
                    };
                }
            }
        }
        let scale = amp / (members.len() as f64).sqrt();
        b.push(basis * acc * Complex64::new(scale, 0.0));
    }
    let total: f64 = b.iter().map(|x| fro_norm(x).powi(2)).sum();
    if total <= 0.0 {
        return Err(Error::ZeroPower);
    }
    let fix = Complex64::new((power_w / total).sqrt(), 0.0);
    for bh in &mut b {
        *bh *= fix;
    }
    Ok(BdBeamformers {
        set: BeamformerSet::Digital { b, j: decomp.u.clone() },
        pre_scale_power_ratio: total / power_w,
    })
}

/// `W log2 det(I + P/(|H_h| H zeta sigma^2) Sigma_k^2)` per user.
pub fn bd_rate_closed_form(decomp: &BdDecomposition, power_w: f64, noise_w: f64, bw_hz: f64) -> Vec<f64> {
    let per_stream = decomp.stream_power(power_w);
    (0..decomp.groups.num_users())
        .map(|k| {
            let h = decomp.groups.group_of(k).expect("user index within decomposition");
            let g = per_stream / (decomp.groups.members(h).len() as f64 * noise_w);
            bw_hz * decomp.sigma[k].iter().map(|s| (1.0 + g * s * s).log2()).sum::<f64>()
        })
        .collect()
}

/// `sum_h min_{k in h}` of the closed-form rates.
pub fn bd_objective(decomp: &BdDecomposition, power_w: f64, noise_w: f64, bw_hz: f64) -> f64 {
    let rates = bd_rate_closed_form(decomp, power_w, noise_w, bw_hz);
    decomp
        .groups
        .iter()
        .map(|g| g.iter().map(|&k| rates[k]).fold(f64::INFINITY, f64::min))
        .sum()
}
