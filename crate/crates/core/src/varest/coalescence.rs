use super::pairs::mu0_normalized;
use super::{centered, resampling_correction, terminal_values, MeasureEstimate};
use crate::engine::{ParticleHistory, TerminalView};
use crate::error::{config, Error, Result};
use crate::stats::relative_weights;

/// `1 - W_{p-1}(e)` for every Eve index `e`, where `W_{p-1}(e)` is the share of
/// the time-`(p-1)` potential mass carried by family `e`. `None` at `p = 0`.
fn family_survival<S>(h: &ParticleHistory<S>, p: usize) -> Option<Vec<f64>> {
    if p == 0 {
        return None;
    }
    let w = relative_weights(h.log_potentials(p - 1));
    let mut mass = vec![0.0; h.counts()[0]];
    for (&e, &wk) in h.eves(p - 1).iter().zip(&w) {
        mass[e] += wk;
    }
    let total: f64 = mass.iter().sum();
    Some(mass.iter().map(|m| (total - m) / total).collect())
}

/// `Σ_{(i,j)} 1{T(i,j) = p} · f_p(E_p) · x_i y_j` for every `p`, where `T(i,j)` is the
/// most recent time at which the lineages of terminal particles `i` and `j`
/// coincide (`T = n` on the diagonal) and `f_p` is [`family_survival`].
///
/// Pairs whose lineages meet at time `p` are the pairs descending from one
/// time-`p` particle but from two different children of it, so the sum at `p`
/// is `Σ_k f(E_p^k) (m_p(k) m'_p(k) - Σ_{children c} m_{p+1}(c) m'_{p+1}(c))`
/// with `m_p(k)` the sum of `x` over terminal descendants of particle `k`.
fn coincidence_sums<S>(h: &ParticleHistory<S>, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = h.horizon();
    let mut out = vec![0.0; n + 1];
    let mut mx = x.to_vec();
    let mut my = y.to_vec();
    let survival = family_survival(h, n);
    out[n] = weighted_by_family(h.eves(n), survival.as_deref(), |k| mx[k] * my[k]);
    for p in (0..n).rev() {
        let np = h.counts()[p];
        let mut ax = vec![0.0; np];
        let mut ay = vec![0.0; np];
        let mut diag = vec![0.0; np];
        for (c, &a) in h.ancestors(p).iter().enumerate() {
            ax[a] += mx[c];
            ay[a] += my[c];
            diag[a] += mx[c] * my[c];
        }
        let survival = family_survival(h, p);
        out[p] = weighted_by_family(h.eves(p), survival.as_deref(), |k| ax[k] * ay[k] - diag[k]);
        mx = ax;
        my = ay;
    }
    out
}

fn weighted_by_family(eves: &[usize], survival: Option<&[f64]>, term: impl Fn(usize) -> f64) -> f64 {
    match survival {
        None => (0..eves.len()).map(term).sum(),
        Some(f) => eves.iter().enumerate().map(|(k, &e)| f[e] * term(k)).sum(),
    }
}

/// `μ_{e_p}^N(x ⊗ y) / γ_n^N(1)²` for `p = 0..=n`.
pub fn mu_e_normalized<S>(h: &ParticleHistory<S>, x: &[f64], y: &[f64]) -> Vec<f64> {
    let counts = h.counts();
    let n = h.horizon();
    let nn = counts[n] as f64;
    let all = resampling_correction(counts, n + 1);
    coincidence_sums(h, x, y)
        .into_iter()
        .enumerate()
        .map(|(p, s)| {
            let np = counts[p] as f64;
            // N_p · Π_{q≠p} N_q/(N_q-1)
            let factor = all * (np - 1.0);
            factor * s / (nn * nn)
        })
        .collect()
}

/// `μ_{e_p}^N(φ ⊗ φ)` for a single `p`.
pub fn compute_mu_ep<S>(h: &ParticleHistory<S>, p: usize, phi: impl Fn(&S) -> f64) -> Result<MeasureEstimate> {
    check_step(h, p)?;
    let values = terminal_values(h, phi)?;
    Ok(MeasureEstimate { normalized: mu_e_normalized(h, &values, &values)[p], log_gamma_one: h.log_gamma_one() })
}

/// `v_{p,n}^N = [μ_{e_p}^N - μ_{0_n}^N](φ⊗φ) / γ_n^N(1)²` for all `p` from terminal values.
pub(crate) fn vpn_from_values<S>(h: &ParticleHistory<S>, values: &[f64]) -> Vec<f64> {
    let mu0 = mu0_normalized(h.counts(), h.terminal_eves(), values, values);
    mu_e_normalized(h, values, values).into_iter().map(|m| m - mu0).collect()
}

/// `v_n^N = Σ_p c_p^{-1} v_{p,n}^N`.
pub(crate) fn vn_from_terms(h_weights: &[f64], vpn: &[f64]) -> f64 {
    h_weights.iter().zip(vpn).map(|(c, v)| v / c).sum()
}

pub fn compute_vpn<S>(h: &ParticleHistory<S>, p: usize, phi: impl Fn(&S) -> f64) -> Result<f64> {
    check_step(h, p)?;
    Ok(compute_vpn_all(h, phi)?[p])
}

pub fn compute_vpn_all<S>(h: &ParticleHistory<S>, phi: impl Fn(&S) -> f64) -> Result<Vec<f64>> {
    let values = terminal_values(h, phi)?;
    Ok(vpn_from_values(h, &values))
}

/// The asymptotic variance estimate `v_n^N(φ)` under the run's allocation weights.
pub fn compute_vn<S>(h: &ParticleHistory<S>, phi: impl Fn(&S) -> f64) -> Result<f64> {
    let vpn = compute_vpn_all(h, phi)?;
    Ok(vn_from_terms(&h.plan().weights, &vpn))
}

/// Asymptotic bias estimate for `η_n^N(φ)`:
/// `-Σ_{p<n} μ_{e_p}^N(1 ⊗ (φ - η_n^N(φ))) / γ_n^N(1)²`.
///
/// Defined for a constant particle number only.
pub fn bias_estimate<S>(h: &ParticleHistory<S>, phi: impl Fn(&S) -> f64) -> Result<f64> {
    if !h.plan().is_constant() {
        return Err(Error::Unsupported("the bias estimate requires a constant number of particles".into()));
    }
    Ok(bias_from_values(h, &terminal_values(h, phi)?))
}

pub(crate) fn bias_from_values<S>(h: &ParticleHistory<S>, values: &[f64]) -> f64 {
    let eta = crate::stats::mean(values);
    let ones = vec![1.0; values.len()];
    let mu = mu_e_normalized(h, &ones, &centered(values, eta));
    -mu[..h.horizon()].iter().sum::<f64>()
}

fn check_step<S>(h: &ParticleHistory<S>, p: usize) -> Result<()> {
    if p > h.horizon() {
        return config(format!("time index {p} exceeds the horizon {}", h.horizon()));
    }
    Ok(())
}
