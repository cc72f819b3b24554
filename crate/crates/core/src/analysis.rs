//! Closed-form rate machinery: linear combiners, the quantization-
//! distortion covariance approximation, SINDR in exact and approximate
//! form, the asymptotic bounds, the sum rate, and the ADC power model.

use crate::channel::ChannelRealization;
use crate::config::{CombinerMethod, SystemConfig};
use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Evaluation regimes appearing in sweep outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    /// Closed-form SINDR with the distortion-covariance approximation.
    #[serde(rename = "analytical-approx")]
    Analytical,
    /// Brute-force simulation of the quantized chain.
    #[serde(rename = "empirical")]
    Empirical,
    /// Unquantized reference (gamma = 0).
    #[serde(rename = "unquantized")]
    Unquantized,
    /// Limit of infinite oversampling ratio.
    #[serde(rename = "bound-osr-inf")]
    BoundOsrInf,
    /// Limit of infinite SNR.
    #[serde(rename = "bound-snr-inf")]
    BoundSnrInf,
    /// Limit of infinite SNR and OSR (interference-limited).
    #[serde(rename = "bound-total")]
    BoundTotal,
}

impl EvalMode {
    pub const ALL: [EvalMode; 6] = [
        EvalMode::Analytical,
        EvalMode::Empirical,
        EvalMode::Unquantized,
        EvalMode::BoundOsrInf,
        EvalMode::BoundSnrInf,
        EvalMode::BoundTotal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EvalMode::Analytical => "analytical-approx",
            EvalMode::Empirical => "empirical",
            EvalMode::Unquantized => "unquantized",
            EvalMode::BoundOsrInf => "bound-osr-inf",
            EvalMode::BoundSnrInf => "bound-snr-inf",
            EvalMode::BoundTotal => "bound-total",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EvalMode::ALL
            .into_iter()
            .find(|mode| mode.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown evaluation mode: {s:?}")))
    }
}

/// Per-subcarrier combining matrices G[k], k = 0..K-1.
#[derive(Debug, Clone)]
pub struct CombinerSet {
    matrices: Vec<DMatrix<C64>>,
    method: CombinerMethod,
}

impl CombinerSet {
    pub fn method(&self) -> CombinerMethod {
        self.method
    }

    pub fn matrices(&self) -> &[DMatrix<C64>] {
        &self.matrices
    }

    pub fn at(&self, k: usize) -> &DMatrix<C64> {
        &self.matrices[k]
    }

    pub fn active_subcarriers(&self) -> usize {
        self.matrices.len()
    }
}

/// Builds the combiner selected by `method`.
pub fn build_combiner(
    channel: &ChannelRealization,
    method: CombinerMethod,
) -> Result<CombinerSet> {
    match method {
        CombinerMethod::Mrc => mrc_combiner(channel),
        CombinerMethod::Zf => zf_combiner(channel),
    }
}

/// Maximum ratio combining with diagonal normalization:
/// `G[k] = H~[k] diag(H~[k]^H H~[k])^-1`, so `g_u[k]^H h~_u[k] = 1`.
pub fn mrc_combiner(channel: &ChannelRealization) -> Result<CombinerSet> {
    let k_active = channel.params().active_subcarriers;
    let mut matrices = Vec::with_capacity(k_active);
    for k in 0..k_active {
        let h = channel.freq_at(k);
        let mut g = h.clone();
        for u in 0..h.ncols() {
            let norm_sqr = h.column(u).norm_squared();
            if norm_sqr == 0.0 {
                return Err(Error::Singular {
                    subcarrier: k,
                    context: format!("user {u} has a zero channel column"),
                });
            }
            let inv = C64::new(1.0 / norm_sqr, 0.0);
            for row in 0..h.nrows() {
                g[(row, u)] = h[(row, u)] * inv;
            }
        }
        matrices.push(g);
    }
    Ok(CombinerSet { matrices, method: CombinerMethod::Mrc })
}

/// Zero-forcing combiner: `G[k] = H~[k] (H~[k]^H H~[k])^-1`, so
/// `G[k]^H H~[k] = I` whenever the channel has full column rank.
pub fn zf_combiner(channel: &ChannelRealization) -> Result<CombinerSet> {
    let k_active = channel.params().active_subcarriers;
    let mut matrices = Vec::with_capacity(k_active);
    for k in 0..k_active {
        let h = channel.freq_at(k);
        let gram = h.adjoint() * h;
        let inv = gram.try_inverse().ok_or_else(|| Error::Singular {
            subcarrier: k,
            context: "rank-deficient channel in ZF combiner".into(),
        })?;
        matrices.push(h * inv);
    }
    Ok(CombinerSet { matrices, method: CombinerMethod::Zf })
}

/// The subcarrier-independent diagonal approximation of the quantization-
/// distortion covariance:
/// `gamma (1-gamma) ((p/N_c) sum_(k<K) diag(H~ H~^H) + sigma_n^2 I)`,
/// returned as its diagonal (length M).
pub fn distortion_cov_approx(
    channel: &ChannelRealization,
    power: f64,
    noise_power: f64,
    gamma: f64,
) -> DVector<f64> {
    assert!((0.0..1.0).contains(&gamma));
    let beta = channel.params().osr as f64;
    channel
        .h_e()
        .map(|h| gamma * (1.0 - gamma) * (power * h / beta + noise_power))
}

/// Dense effective noise-plus-distortion covariance
/// `C_e_k = C_eta + alpha^2 sigma_n^2 I` built from the diagonal
/// approximation; convenience for the exact-form identity checks.
pub fn effective_noise_cov_approx(
    channel: &ChannelRealization,
    power: f64,
    noise_power: f64,
    gamma: f64,
) -> DMatrix<C64> {
    let diag = distortion_cov_approx(channel, power, noise_power, gamma);
    let alpha = 1.0 - gamma;
    let m = diag.len();
    DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            C64::new(diag[r] + alpha * alpha * noise_power, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// SINDR evaluation regime with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SindrMode {
    /// Closed-form approximation: effective covariance
    /// `gamma/((1-gamma) beta) H_e + 1/(rho (1-gamma)) I`.
    Approx { rho: f64, gamma: f64, beta: f64 },
    /// Unquantized reference (gamma = 0).
    Unquantized { rho: f64 },
    /// Oversampling-ratio limit: distortion vanishes, noise keeps the
    /// `1/(rho (1-gamma))` penalty.
    OsrInf { rho: f64, gamma: f64 },
    /// SNR limit: only the quantization distortion remains.
    SnrInf { gamma: f64, beta: f64 },
    /// Interference-limited upper bound; infinite for a single user.
    Total,
}

/// SINDR of user `u` on subcarrier `k` under the selected regime.
///
/// Returns `f64::INFINITY` only for `SindrMode::Total` with an empty
/// interference sum.
pub fn sindr(
    channel: &ChannelRealization,
    combiner: &CombinerSet,
    mode: SindrMode,
    u: usize,
    k: usize,
) -> f64 {
    let h = channel.freq_at(k);
    let g = combiner.at(k).column(u);
    let num = g.dotc(&h.column(u)).norm_sqr();
    let mut interference = 0.0;
    for j in 0..h.ncols() {
        if j != u {
            interference += g.dotc(&h.column(j)).norm_sqr();
        }
    }
    // Every regime is the same diagonal quadratic form
    // `sum_m |g_m|^2 (dg * h_e[m] + ng)` with regime-specific gains, so
    // coinciding regimes (e.g. gamma = 0 and the unquantized reference)
    // agree bit for bit.
    let (distortion_gain, noise_gain) = match mode {
        SindrMode::Approx { rho, gamma, beta } => {
            assert!(rho > 0.0 && (0.0..1.0).contains(&gamma) && beta >= 1.0);
            (gamma / ((1.0 - gamma) * beta), 1.0 / (rho * (1.0 - gamma)))
        }
        SindrMode::Unquantized { rho } => {
            assert!(rho > 0.0);
            (0.0, 1.0 / rho)
        }
        SindrMode::OsrInf { rho, gamma } => {
            assert!(rho > 0.0 && (0.0..1.0).contains(&gamma));
            (0.0, 1.0 / (rho * (1.0 - gamma)))
        }
        SindrMode::SnrInf { gamma, beta } => {
            assert!((0.0..1.0).contains(&gamma) && beta >= 1.0);
            (gamma / ((1.0 - gamma) * beta), 0.0)
        }
        SindrMode::Total => (0.0, 0.0),
    };
    let h_e = channel.h_e();
    let noise_distortion = g
        .iter()
        .enumerate()
        .map(|(m, gm)| gm.norm_sqr() * (distortion_gain * h_e[m] + noise_gain))
        .sum::<f64>();
    let denominator = interference + noise_distortion;
    if denominator == 0.0 {
        return f64::INFINITY;
    }
    num / denominator
}

/// Closed-form approximate SINDR (thin wrapper over [`sindr`]).
pub fn sindr_approx(
    channel: &ChannelRealization,
    combiner: &CombinerSet,
    rho: f64,
    gamma: f64,
    beta: f64,
    u: usize,
    k: usize,
) -> f64 {
    sindr(channel, combiner, SindrMode::Approx { rho, gamma, beta }, u, k)
}

/// Exact-form SINDR with an arbitrary supplied distortion covariance:
/// `p a^2 |g^H h_u|^2 / (p a^2 sum_(j!=u) |g^H h_j|^2 + g^H (C_eta + a^2 s^2 I) g)`.
///
/// This is the bridge between the empirical covariance estimator and the
/// rate formula. The covariance must be Hermitian positive semidefinite.
#[allow(clippy::too_many_arguments)]
pub fn sindr_exact_form(
    channel: &ChannelRealization,
    combiner: &CombinerSet,
    power: f64,
    noise_power: f64,
    distortion_cov: &DMatrix<C64>,
    alpha: f64,
    u: usize,
    k: usize,
) -> Result<f64> {
    validate_hermitian_psd(distortion_cov)?;
    let h = channel.freq_at(k);
    let g = combiner.at(k).column(u);
    let pa2 = power * alpha * alpha;
    let num = pa2 * g.dotc(&h.column(u)).norm_sqr();
    let mut interference = 0.0;
    for j in 0..h.ncols() {
        if j != u {
            interference += pa2 * g.dotc(&h.column(j)).norm_sqr();
        }
    }
    let cg = distortion_cov * g;
    let quad = g.dotc(&cg).re + alpha * alpha * noise_power * g.norm_squared();
    Ok(num / (interference + quad))
}

fn validate_hermitian_psd(cov: &DMatrix<C64>) -> Result<()> {
    if cov.nrows() != cov.ncols() {
        return Err(Error::InvalidCovariance(format!(
            "not square: {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let scale = cov.norm().max(f64::MIN_POSITIVE);
    let asym = (cov - cov.adjoint()).norm();
    if asym > 1e-8 * scale {
        return Err(Error::InvalidCovariance(format!(
            "not Hermitian: |C - C^H| = {asym:.3e}"
        )));
    }
    // Positive semidefiniteness up to a numerical floor on the smallest
    // eigenvalue.
    let eigenvalues = cov.clone().symmetric_eigen().eigenvalues;
    let min_eig = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-8 * scale {
        return Err(Error::InvalidCovariance(format!(
            "not positive semidefinite: min eigenvalue {min_eig:.3e}"
        )));
    }
    Ok(())
}

/// SINDR matrix (K x U) under one regime.
pub fn sindr_matrix(
    channel: &ChannelRealization,
    combiner: &CombinerSet,
    mode: SindrMode,
) -> DMatrix<f64> {
    let k_active = combiner.active_subcarriers();
    let users = channel.num_users();
    DMatrix::from_fn(k_active, users, |k, u| sindr(channel, combiner, mode, u, k))
}

/// Achievable sum rate `R = delta_f sum_(k,u) log2(1 + sindr)` in bits/s.
///
/// Refuses tables containing an infinite entry: bounds with infinite SINDR
/// are reported per subcarrier, never summed.
pub fn sum_rate(sindr_table: &DMatrix<f64>, subcarrier_spacing_hz: f64) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..sindr_table.nrows() {
        for u in 0..sindr_table.ncols() {
            let value = sindr_table[(k, u)];
            assert!(value >= 0.0, "SINDR must be nonnegative, got {value} at ({k},{u})");
            if value.is_infinite() {
                return Err(Error::UnboundedRate { subcarrier: k, user: u });
            }
            acc += (1.0 + value).log2();
        }
    }
    Ok(subcarrier_spacing_hz * acc)
}

/// ADC power model `kappa * f_s * 2^bits` in Watts.
pub fn adc_power(kappa_w: f64, sample_rate_hz: f64, bits: u32) -> f64 {
    assert!(kappa_w > 0.0 && sample_rate_hz > 0.0 && bits >= 1);
    kappa_w * sample_rate_hz * (1u64 << bits) as f64
}

/// Per-(user, subcarrier) SINDR values with the aggregate rate and the
/// provenance of the numbers.
#[derive(Debug, Clone)]
pub struct RateResult {
    /// K x U SINDR table.
    pub sindr: DMatrix<f64>,
    /// Aggregate rate in bits/s.
    pub sum_rate_bps: f64,
    pub mode: EvalMode,
    /// Scenario the table was computed for.
    pub config: SystemConfig,
}

impl RateResult {
    pub fn new(
        sindr: DMatrix<f64>,
        mode: EvalMode,
        config: SystemConfig,
    ) -> Result<Self> {
        let sum_rate_bps = sum_rate(&sindr, config.subcarrier_spacing_hz)?;
        Ok(Self { sindr, sum_rate_bps, mode, config })
    }

    /// Rate normalized by the signal bandwidth, bits/s/Hz.
    pub fn spectral_efficiency(&self) -> f64 {
        self.sum_rate_bps / self.config.bandwidth_hz()
    }
}
