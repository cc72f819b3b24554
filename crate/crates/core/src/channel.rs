//! Wideband multipath channel generation.
//!
//! A realization is built from per-(user, path) parameters: complex gain,
//! delay, and angle of arrival at a half-wavelength uniform linear array.
//! Delay taps are samples of the pulse-shaped continuous channel at the
//! operating sample rate; the per-subcarrier frequency responses are the
//! DFT of the taps across delay.

use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Static description of a channel scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_paths: usize,
    /// Maximum delay taps under Nyquist sampling (D0); the realized tap
    /// count is `osr * max_nyquist_taps`.
    pub max_nyquist_taps: usize,
    /// Oversampling ratio beta = N_c / K.
    pub osr: usize,
    pub active_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    /// Informational only; the discrete model is baseband.
    pub carrier_frequency_hz: f64,
    pub pulse_rolloff: f64,
    /// Symbol period of the pulse-shaping filter. Defaults to the operating
    /// sample period 1/(N_c * delta_f).
    pub pulse_period_s: f64,
}

impl ChannelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_antennas: usize,
        num_users: usize,
        num_paths: usize,
        max_nyquist_taps: usize,
        osr: usize,
        active_subcarriers: usize,
        subcarrier_spacing_hz: f64,
        carrier_frequency_hz: f64,
        pulse_rolloff: f64,
    ) -> Result<Self> {
        let params = Self {
            num_antennas,
            num_users,
            num_paths,
            max_nyquist_taps,
            osr,
            active_subcarriers,
            subcarrier_spacing_hz,
            carrier_frequency_hz,
            pulse_rolloff,
            pulse_period_s: 1.0
                / (osr as f64 * active_subcarriers as f64 * subcarrier_spacing_hz),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users < 1 || self.num_antennas < self.num_users {
            return Err(Error::InvalidConfig(format!(
                "need num_antennas >= num_users >= 1, got M={}, U={}",
                self.num_antennas, self.num_users
            )));
        }
        if self.num_paths < 1 {
            return Err(Error::InvalidConfig("num_paths must be >= 1".into()));
        }
        if self.osr < 1 {
            return Err(Error::InvalidConfig("osr must be an integer >= 1".into()));
        }
        if self.active_subcarriers < 1 {
            return Err(Error::InvalidConfig("active_subcarriers must be >= 1".into()));
        }
        if self.num_taps() > self.total_subcarriers() {
            return Err(Error::InvalidConfig(format!(
                "tap count D={} exceeds N_c={}",
                self.num_taps(),
                self.total_subcarriers()
            )));
        }
        if !(0.0..=1.0).contains(&self.pulse_rolloff) {
            return Err(Error::InvalidConfig("pulse_rolloff must be in [0, 1]".into()));
        }
        if self.subcarrier_spacing_hz <= 0.0 || self.pulse_period_s <= 0.0 {
            return Err(Error::InvalidConfig("spacing and pulse period must be positive".into()));
        }
        Ok(())
    }

    /// Overrides the pulse-shaping period (used to hold the continuous-time
    /// channel fixed while changing the sampling rate).
    pub fn with_pulse_period(mut self, period_s: f64) -> Self {
        self.pulse_period_s = period_s;
        self
    }

    /// Total subcarriers N_c = osr * K.
    pub fn total_subcarriers(&self) -> usize {
        self.osr * self.active_subcarriers
    }

    /// Delay taps D = osr * D0.
    pub fn num_taps(&self) -> usize {
        self.osr * self.max_nyquist_taps
    }

    /// Signal bandwidth B_w = K * delta_f.
    pub fn bandwidth_hz(&self) -> f64 {
        self.active_subcarriers as f64 * self.subcarrier_spacing_hz
    }

    /// ADC sampling rate f_s = N_c * delta_f.
    pub fn sample_rate_hz(&self) -> f64 {
        self.total_subcarriers() as f64 * self.subcarrier_spacing_hz
    }

    /// Sample period T_s = 1 / f_s.
    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz()
    }

    /// Maximum path delay D0 / B_w.
    pub fn max_delay_s(&self) -> f64 {
        self.max_nyquist_taps as f64 / self.bandwidth_hz()
    }

    /// Stable hash of the parameter set, for cache keys.
    pub fn content_hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("params serialize");
        fnv1a(json.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One propagation path of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub gain_re: f64,
    pub gain_im: f64,
    pub delay_s: f64,
    pub angle_rad: f64,
}

impl PathParams {
    pub fn gain(&self) -> C64 {
        C64::new(self.gain_re, self.gain_im)
    }
}

/// Steering vector of a half-wavelength uniform linear array:
/// `a(theta)_m = exp(-j pi m sin(theta)) / sqrt(M)`.
pub fn steering_vector(theta: f64, num_antennas: usize) -> DVector<C64> {
    assert!(num_antennas >= 1);
    let norm = 1.0 / (num_antennas as f64).sqrt();
    DVector::from_fn(num_antennas, |m, _| {
        let phase = -PI * m as f64 * theta.sin();
        C64::new(phase.cos(), phase.sin()) * norm
    })
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Raised-cosine pulse with symbol period `period` and the given roll-off.
///
/// At the roll-off singular points |t| = period/(2 rolloff) the analytic
/// limit (pi/4) sinc(1/(2 rolloff)) is returned.
pub fn pulse(t: f64, rolloff: f64, period: f64) -> f64 {
    assert!((0.0..=1.0).contains(&rolloff) && period > 0.0);
    let x = t / period;
    if rolloff == 0.0 {
        return sinc(x);
    }
    let den = 1.0 - (2.0 * rolloff * x) * (2.0 * rolloff * x);
    if den.abs() < 1e-9 {
        return PI / 4.0 * sinc(1.0 / (2.0 * rolloff));
    }
    sinc(x) * (PI * rolloff * x).cos() / den
}

/// A drawn channel: delay taps, frequency responses, and the average
/// in-band per-antenna power diagonal h_e.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    params: ChannelParams,
    /// Path parameters, indexed `[user][path]`.
    paths: Vec<Vec<PathParams>>,
    /// D matrices of shape M x U.
    taps: Vec<DMatrix<C64>>,
    /// N_c matrices of shape M x U.
    freq: Vec<DMatrix<C64>>,
    /// Diagonal of H_e: average over active subcarriers of
    /// sum_u |H~[k]_{m,u}|^2, length M.
    h_e: DVector<f64>,
}

/// Cache record: path parameters are enough to rebuild a realization
/// bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelCache {
    pub params: ChannelParams,
    pub seed: u64,
    pub paths: Vec<Vec<PathParams>>,
}

impl ChannelCache {
    /// Cache key combining the parameter hash and the seed.
    pub fn key(&self) -> String {
        format!("{:016x}-{:016x}", self.params.content_hash(), self.seed)
    }
}

impl ChannelRealization {
    /// Draws path parameters and assembles the realization.
    pub fn generate(params: &ChannelParams, rng: &mut ChaCha8Rng) -> Result<Self> {
        let paths = draw_paths(params, rng);
        Self::from_paths(params.clone(), paths)
    }

    /// Assembles taps, frequency responses, and h_e from given paths.
    ///
    /// Keeping path draws separate from assembly lets one realization be
    /// resampled at several oversampling ratios.
    pub fn from_paths(params: ChannelParams, paths: Vec<Vec<PathParams>>) -> Result<Self> {
        params.validate()?;
        if paths.len() != params.num_users
            || paths.iter().any(|per_user| per_user.len() != params.num_paths)
        {
            return Err(Error::Dimension(format!(
                "paths must be {} users x {} paths",
                params.num_users, params.num_paths
            )));
        }
        let taps = assemble_taps(&params, &paths);
        let (freq, h_e) =
            frequency_response(&taps, params.total_subcarriers(), params.active_subcarriers)?;
        Ok(Self { params, paths, taps, freq, h_e })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn paths(&self) -> &[Vec<PathParams>] {
        &self.paths
    }

    pub fn taps(&self) -> &[DMatrix<C64>] {
        &self.taps
    }

    /// Frequency responses H~[k], k = 0..N_c-1.
    pub fn freq(&self) -> &[DMatrix<C64>] {
        &self.freq
    }

    pub fn freq_at(&self, k: usize) -> &DMatrix<C64> {
        &self.freq[k]
    }

    pub fn h_e(&self) -> &DVector<f64> {
        &self.h_e
    }

    pub fn num_antennas(&self) -> usize {
        self.params.num_antennas
    }

    pub fn num_users(&self) -> usize {
        self.params.num_users
    }

    pub fn to_cache(&self, seed: u64) -> ChannelCache {
        ChannelCache { params: self.params.clone(), seed, paths: self.paths.clone() }
    }

    pub fn from_cache(cache: &ChannelCache) -> Result<Self> {
        Self::from_paths(cache.params.clone(), cache.paths.clone())
    }

    pub fn save_cache(&self, seed: u64, path: &std::path::Path) -> Result<()> {
        let cache = self.to_cache(seed);
        std::fs::write(path, serde_json::to_string(&cache)?)?;
        Ok(())
    }

    pub fn load_cache(path: &std::path::Path) -> Result<(Self, u64)> {
        let cache: ChannelCache = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok((Self::from_cache(&cache)?, cache.seed))
    }
}

/// Draws per-(user, path) gains ~ CN(0,1), delays ~ U[0, D0/B_w], and
/// angles ~ U[0, 2pi]. Draw order is fixed for reproducibility.
pub fn draw_paths(params: &ChannelParams, rng: &mut ChaCha8Rng) -> Vec<Vec<PathParams>> {
    let max_delay = params.max_delay_s();
    (0..params.num_users)
        .map(|_| {
            (0..params.num_paths)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let delay_s = rng.random::<f64>() * max_delay;
                    let angle_rad = rng.random::<f64>() * 2.0 * PI;
                    PathParams {
                        gain_re: re * std::f64::consts::FRAC_1_SQRT_2,
                        gain_im: im * std::f64::consts::FRAC_1_SQRT_2,
                        delay_s,
                        angle_rad,
                    }
                })
                .collect()
        })
        .collect()
}

fn assemble_taps(params: &ChannelParams, paths: &[Vec<PathParams>]) -> Vec<DMatrix<C64>> {
    let m = params.num_antennas;
    let u_count = params.num_users;
    let d_count = params.num_taps();
    let t_s = params.sample_period_s();
    let scale = (m as f64 / params.num_paths as f64).sqrt();

    // Steering vectors are delay-independent; compute once per (user, path).
    let steering: Vec<Vec<DVector<C64>>> = paths
        .iter()
        .map(|per_user| per_user.iter().map(|p| steering_vector(p.angle_rad, m)).collect())
        .collect();

    (0..d_count)
        .map(|d| {
            let mut tap = DMatrix::<C64>::zeros(m, u_count);
            for (u, per_user) in paths.iter().enumerate() {
                for (l, path) in per_user.iter().enumerate() {
                    let t = d as f64 * t_s - path.delay_s;
                    let weight = scale * pulse(t, params.pulse_rolloff, params.pulse_period_s);
                    if weight == 0.0 {
                        continue;
                    }
                    let coef = path.gain() * weight;
                    let a = &steering[u][l];
                    for row in 0..m {
                        tap[(row, u)] += coef * a[row];
                    }
                }
            }
            tap
        })
        .collect()
}

/// DFT of the delay taps per antenna-user pair, plus the h_e diagonal over
/// the first `active_subcarriers` bins.
pub fn frequency_response(
    taps: &[DMatrix<C64>],
    n_c: usize,
    active_subcarriers: usize,
) -> Result<(Vec<DMatrix<C64>>, DVector<f64>)> {
    let d_count = taps.len();
    if d_count > n_c {
        return Err(Error::Dimension(format!("D={d_count} exceeds N_c={n_c}")));
    }
    if active_subcarriers > n_c {
        return Err(Error::Dimension(format!("K={active_subcarriers} exceeds N_c={n_c}")));
    }
    let (m, u_count) = (taps[0].nrows(), taps[0].ncols());
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_c);

    let mut freq = vec![DMatrix::<C64>::zeros(m, u_count); n_c];
    let mut buffer = vec![C64::new(0.0, 0.0); n_c];
    for row in 0..m {
        for col in 0..u_count {
            buffer.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for (d, tap) in taps.iter().enumerate() {
                buffer[d] = tap[(row, col)];
            }
            fft.process(&mut buffer);
            for (k, value) in buffer.iter().enumerate() {
                freq[k][(row, col)] = *value;
            }
        }
    }

    let h_e = DVector::from_fn(m, |row, _| {
        let mut acc = 0.0;
        for response in freq.iter().take(active_subcarriers) {
            for col in 0..u_count {
                acc += response[(row, col)].norm_sqr();
            }
        }
        acc / active_subcarriers as f64
    });
    Ok((freq, h_e))
}
