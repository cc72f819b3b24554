//! One OFDM block end to end in the time domain: symbol generation, IDFT
//! modulation, circular channel convolution, AWGN, per-antenna ADC
//! quantization, DFT demodulation.
//!
//! The cyclic prefix is not simulated explicitly; circular convolution
//! realizes the block-circulant channel directly.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::str::FromStr;

/// Transmit-symbol distribution on the active subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolDistribution {
    /// Circularly symmetric complex Gaussian, matching the Bussgang
    /// assumptions behind the rate analysis.
    Gaussian,
    /// Unit-power QPSK, for sanity experiments.
    Qpsk,
}

impl FromStr for SymbolDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SymbolDistribution::Gaussian),
            "qpsk" => Ok(SymbolDistribution::Qpsk),
            other => Err(Error::UnknownDistribution(other.into())),
        }
    }
}

/// How the per-antenna quantizer scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgcMode {
    /// Scale from the exact per-antenna received variance
    /// `(p/N_c) sum_(k<K) sum_u |H~[k]_(m,u)|^2 + sigma_n^2`.
    Analytic,
    /// Scale from the sample variance of the block.
    Empirical,
}

/// All stages of one simulated OFDM block.
#[derive(Debug, Clone, Serialize)]
pub struct SignalBlock {
    /// U x N_c frequency symbols; zero on the null subcarriers.
    pub freq_symbols: Vec<Vec<C64>>,
    /// U x N_c time-domain transmit samples.
    pub time_symbols: Vec<Vec<C64>>,
    /// M x N_c noisy received samples.
    pub rx_time: Vec<Vec<C64>>,
    /// M x N_c quantized samples.
    pub rx_quantized: Vec<Vec<C64>>,
    /// M x N_c demodulated (frequency-domain) samples.
    pub rx_freq: Vec<Vec<C64>>,
    pub transmit_power: f64,
    pub noise_power: f64,
    /// Per-antenna complex received variance used by the AGC.
    pub agc_variances: Vec<f64>,
}

impl SignalBlock {
    /// Debug dump of all stages to a JSON file.
    pub fn dump_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

/// Unit-average-power symbols on the first `active` subcarriers, zeros on
/// the rest.
pub fn generate_symbols(
    num_users: usize,
    active: usize,
    total: usize,
    distribution: SymbolDistribution,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<C64>>> {
    if active > total {
        return Err(Error::Dimension(format!("K={active} exceeds N_c={total}")));
    }
    let rows = (0..num_users)
        .map(|_| {
            let mut row = vec![C64::new(0.0, 0.0); total];
            for slot in row.iter_mut().take(active) {
                *slot = match distribution {
                    SymbolDistribution::Gaussian => {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
                    }
                    SymbolDistribution::Qpsk => {
                        let bits = rng.random::<u32>();
                        let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                        let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                        C64::new(re, im)
                    }
                };
            }
            row
        })
        .collect();
    Ok(rows)
}

fn transform_rows(rows: &[Vec<C64>], inverse: bool) -> Vec<Vec<C64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let n = rows[0].len();
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let norm = 1.0 / (n as f64).sqrt();
    rows.iter()
        .map(|row| {
            let mut buf = row.clone();
            fft.process(&mut buf);
            buf.iter_mut().for_each(|v| *v *= norm);
            buf
        })
        .collect()
}

/// Time-domain transmit samples:
/// `s_u[n] = sqrt(p)/sqrt(N_c) * sum_k s~_u[k] e^(+j 2 pi n k / N_c)`.
pub fn modulate(freq_symbols: &[Vec<C64>], power: f64) -> Vec<Vec<C64>> {
    let amp = power.sqrt();
    let mut rows = transform_rows(freq_symbols, true);
    for row in &mut rows {
        row.iter_mut().for_each(|v| *v *= amp);
    }
    rows
}

/// Unitary forward DFT per row:
/// `z~[k] = 1/sqrt(N_c) * sum_n z[n] e^(-j 2 pi n k / N_c)`.
pub fn demodulate(rx: &[Vec<C64>]) -> Vec<Vec<C64>> {
    transform_rows(rx, false)
}

/// Circular convolution with the channel taps:
/// `r[n] = sum_d H[d] s[(n - d) mod N_c]`.
pub fn apply_channel(
    time_symbols: &[Vec<C64>],
    channel: &ChannelRealization,
) -> Result<Vec<Vec<C64>>> {
    let n_c = channel.params().total_subcarriers();
    let num_users = channel.num_users();
    let num_antennas = channel.num_antennas();
    if time_symbols.len() != num_users || time_symbols.iter().any(|row| row.len() != n_c) {
        return Err(Error::Dimension(format!(
            "expected {num_users} user rows of length {n_c}"
        )));
    }
    let mut rx = vec![vec![C64::new(0.0, 0.0); n_c]; num_antennas];
    for (d, tap) in channel.taps().iter().enumerate() {
        let shift = d % n_c;
        for (u, user_row) in time_symbols.iter().enumerate() {
            for (m, out) in rx.iter_mut().enumerate() {
                let coef = tap[(m, u)];
                if coef.norm_sqr() == 0.0 {
                    continue;
                }
                for (n, slot) in out.iter_mut().enumerate() {
                    let idx = (n + n_c - shift) % n_c;
                    *slot += coef * user_row[idx];
                }
            }
        }
    }
    Ok(rx)
}

/// Adds i.i.d. circularly symmetric complex Gaussian noise of total
/// variance `noise_power` per sample.
pub fn add_awgn(rx: &[Vec<C64>], noise_power: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<C64>> {
    assert!(noise_power >= 0.0);
    if noise_power == 0.0 {
        return rx.to_vec();
    }
    let component = (noise_power / 2.0).sqrt();
    rx.iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    v + C64::new(re * component, im * component)
                })
                .collect()
        })
        .collect()
}

/// Exact per-antenna received variances
/// `(p/N_c) sum_(k<K) sum_u |H~[k]_(m,u)|^2 + sigma_n^2`
/// (the diagonal of the lag-0 received covariance).
pub fn analytic_receive_variances(
    channel: &ChannelRealization,
    power: f64,
    noise_power: f64,
) -> Vec<f64> {
    let beta = channel.params().osr as f64;
    channel.h_e().iter().map(|&h| power * h / beta + noise_power).collect()
}

/// Quantizes each antenna stream with its AGC scale. `None` for the
/// quantizer selects the unquantized passthrough.
///
/// The real and imaginary parts share the scale; each real dimension is
/// divided by the per-component standard deviation `sqrt(variance/2)` so the
/// unit-variance codebook is matched to the signal.
pub fn quantize_receive(
    rx_time: &[Vec<C64>],
    quantizer: Option<&QuantizerSpec>,
    channel: &ChannelRealization,
    power: f64,
    noise_power: f64,
    agc: AgcMode,
) -> Result<(Vec<Vec<C64>>, Vec<f64>)> {
    let variances = match agc {
        AgcMode::Analytic => analytic_receive_variances(channel, power, noise_power),
        AgcMode::Empirical => rx_time
            .iter()
            .map(|row| row.iter().map(|v| v.norm_sqr()).sum::<f64>() / row.len().max(1) as f64)
            .collect(),
    };
    let spec = match quantizer {
        None => return Ok((rx_time.to_vec(), variances)),
        Some(spec) => spec,
    };
    let quantized = rx_time
        .iter()
        .zip(&variances)
        .map(|(row, &variance)| {
            if variance <= 0.0 {
                return Err(Error::DegenerateInput { variance });
            }
            let component_scale = (variance / 2.0).sqrt();
            Ok(spec.quantize_slice(row, component_scale))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((quantized, variances))
}

/// A configured block pipeline, reusable across blocks.
#[derive(Clone, Copy)]
pub struct BlockSim<'a> {
    pub channel: &'a ChannelRealization,
    pub quantizer: Option<&'a QuantizerSpec>,
    pub power: f64,
    pub noise_power: f64,
    pub distribution: SymbolDistribution,
    pub agc: AgcMode,
}

impl BlockSim<'_> {
    /// Runs one block: symbols -> IDFT -> channel -> AWGN -> ADC -> DFT.
    pub fn run(
        &self,
        symbol_rng: &mut ChaCha8Rng,
        noise_rng: &mut ChaCha8Rng,
    ) -> Result<SignalBlock> {
        let params = self.channel.params();
        let freq_symbols = generate_symbols(
            params.num_users,
            params.active_subcarriers,
            params.total_subcarriers(),
            self.distribution,
            symbol_rng,
        )?;
        let time_symbols = modulate(&freq_symbols, self.power);
        let noiseless = apply_channel(&time_symbols, self.channel)?;
        let rx_time = add_awgn(&noiseless, self.noise_power, noise_rng);
        let (rx_quantized, agc_variances) = quantize_receive(
            &rx_time,
            self.quantizer,
            self.channel,
            self.power,
            self.noise_power,
            self.agc,
        )?;
        let rx_freq = demodulate(&rx_quantized);
        Ok(SignalBlock {
            freq_symbols,
            time_symbols,
            rx_time,
            rx_quantized,
            rx_freq,
            transmit_power: self.power,
            noise_power: self.noise_power,
            agc_variances,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelParams, ChannelRealization, PathParams};
    use crate::quantizer::design_lloyd_max;
    use crate::rng::{stream, STREAM_CHANNEL, STREAM_NOISE, STREAM_SYMBOLS};

    fn random_chan(m: usize, u: usize, osr: usize, k: usize, seed: u64) -> ChannelRealization {
        let params = ChannelParams::new(m, u, 3, k / 4, osr, k, 10.0e6, 140.0e9, 0.5).unwrap();
        ChannelRealization::generate(&params, &mut stream(seed, &[STREAM_CHANNEL])).unwrap()
    }

    /// All-pass single-user channel: tap 0 is a column of ones, so
    /// H~[k] = 1 on every subcarrier.
    fn flat_unit_channel(m: usize, osr: usize, k: usize) -> ChannelRealization {
        let params = ChannelParams::new(m, 1, 1, 1, osr, k, 10.0e6, 140.0e9, 0.0).unwrap();
        // A single path with zero delay and broadside angle gives
        // sqrt(M) * a(0) = all-ones in tap 0.
        let paths = vec![vec![PathParams {
            gain_re: 1.0,
            gain_im: 0.0,
            delay_s: 0.0,
            angle_rad: 0.0,
        }]];
        ChannelRealization::from_paths(params, paths).unwrap()
    }

    #[test]
    fn null_subcarriers_are_exactly_zero() {
        let mut rng = stream(1, &[STREAM_SYMBOLS]);
        let symbols = generate_symbols(3, 8, 32, SymbolDistribution::Gaussian, &mut rng).unwrap();
        for row in &symbols {
            assert_eq!(row.len(), 32);
            assert!(row[8..].iter().all(|v| v.re == 0.0 && v.im == 0.0));
            assert!(row[..8].iter().all(|v| v.norm_sqr() > 0.0));
        }
    }

    #[test]
    fn gaussian_symbols_have_unit_power() {
        let mut rng = stream(2, &[STREAM_SYMBOLS]);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..200 {
            let symbols =
                generate_symbols(5, 100, 100, SymbolDistribution::Gaussian, &mut rng).unwrap();
            for row in &symbols {
                acc += row.iter().map(|v| v.norm_sqr()).sum::<f64>();
                count += row.len();
            }
        }
        let mean = acc / count as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean symbol power {mean}");
    }

    #[test]
    fn qpsk_symbols_live_on_the_constellation() {
        let mut rng = stream(3, &[STREAM_SYMBOLS]);
        let symbols = generate_symbols(2, 64, 64, SymbolDistribution::Qpsk, &mut rng).unwrap();
        for row in &symbols {
            for v in row {
                assert!((v.re.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
                assert!((v.im.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn distribution_tags_parse() {
        assert_eq!(
            "gaussian".parse::<SymbolDistribution>().unwrap(),
            SymbolDistribution::Gaussian
        );
        assert_eq!("QPSK".parse::<SymbolDistribution>().unwrap(), SymbolDistribution::Qpsk);
        assert!(matches!(
            "psk8".parse::<SymbolDistribution>(),
            Err(Error::UnknownDistribution(_))
        ));
    }

    #[test]
    fn modulate_zero_gives_zero() {
        let zeros = vec![vec![C64::new(0.0, 0.0); 16]; 2];
        let time = modulate(&zeros, 4.0);
        assert!(time.iter().flatten().all(|v| v.norm_sqr() == 0.0));
    }

    #[test]
    fn modulate_single_tone_is_constant_modulus() {
        let n_c = 16;
        let k0 = 3;
        let power = 2.5;
        let mut freq = vec![vec![C64::new(0.0, 0.0); n_c]];
        freq[0][k0] = C64::new(1.0, 0.0);
        let time = modulate(&freq, power);
        let expected_amp = (power / n_c as f64).sqrt();
        for (n, v) in time[0].iter().enumerate() {
            assert!((v.norm() - expected_amp).abs() < 1e-12);
            let phase = 2.0 * std::f64::consts::PI * (n * k0) as f64 / n_c as f64;
            let expected = C64::new(phase.cos(), phase.sin()) * expected_amp;
            assert!((v - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn modulate_preserves_scaled_energy() {
        let mut rng = stream(4, &[STREAM_SYMBOLS]);
        let freq = generate_symbols(2, 12, 16, SymbolDistribution::Gaussian, &mut rng).unwrap();
        let power = 3.0;
        let time = modulate(&freq, power);
        for (f_row, t_row) in freq.iter().zip(&time) {
            let e_f: f64 = f_row.iter().map(|v| v.norm_sqr()).sum();
            let e_t: f64 = t_row.iter().map(|v| v.norm_sqr()).sum();
            assert!((e_t - power * e_f).abs() < 1e-10 * power * e_f);
        }
    }

    #[test]
    fn identity_channel_passes_through() {
        let chan = flat_unit_channel(1, 1, 8);
        let mut rng = stream(5, &[STREAM_SYMBOLS]);
        let freq = generate_symbols(1, 8, 8, SymbolDistribution::Gaussian, &mut rng).unwrap();
        let time = modulate(&freq, 1.0);
        let rx = apply_channel(&time, &chan).unwrap();
        for (a, b) in rx[0].iter().zip(&time[0]) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_delay_tap_shifts_circularly() {
        let params = ChannelParams::new(1, 1, 1, 4, 1, 16, 10.0e6, 140.0e9, 0.0).unwrap();
        let paths = vec![vec![PathParams {
            gain_re: 1.0,
            gain_im: 0.0,
            delay_s: 2.0 * params.sample_period_s(),
            angle_rad: 0.0,
        }]];
        let chan = ChannelRealization::from_paths(params, paths).unwrap();
        let mut rng = stream(6, &[STREAM_SYMBOLS]);
        let freq = generate_symbols(1, 16, 16, SymbolDistribution::Gaussian, &mut rng).unwrap();
        let time = modulate(&freq, 1.0);
        let rx = apply_channel(&time, &chan).unwrap();
        for n in 0..16 {
            assert!((rx[0][n] - time[0][(n + 16 - 2) % 16]).norm() < 1e-12);
        }
    }

    #[test]
    fn time_domain_convolution_matches_per_subcarrier_multiply() {
        // Master regression of the signal model: the demodulated noiseless
        // chain equals sqrt(p) H~[k] s~[k] on every subcarrier.
        let chan = random_chan(4, 2, 2, 8, 901);
        let n_c = chan.params().total_subcarriers();
        let power = 1.7;
        let mut rng = stream(7, &[STREAM_SYMBOLS]);
        let freq = generate_symbols(2, 8, n_c, SymbolDistribution::Gaussian, &mut rng).unwrap();
        let time = modulate(&freq, power);
        let rx = apply_channel(&time, &chan).unwrap();
        let rx_freq = demodulate(&rx);
        let amp = power.sqrt();
        for k in 0..n_c {
            let h = chan.freq_at(k);
            let s = nalgebra::DVector::from_fn(2, |u, _| freq[u][k]);
            let expected = h * s * C64::new(amp, 0.0);
            for m in 0..4 {
                assert!(
                    (rx_freq[m][k] - expected[m]).norm() < 1e-10,
                    "subcarrier {k} antenna {m}"
                );
            }
        }
    }

    #[test]
    fn apply_channel_rejects_wrong_shapes() {
        let chan = random_chan(2, 2, 1, 8, 44);
        let bad = vec![vec![C64::new(0.0, 0.0); 8]; 1];
        assert!(matches!(apply_channel(&bad, &chan), Err(Error::Dimension(_))));
    }

    #[test]
    fn awgn_zero_variance_is_identity() {
        let rx = vec![vec![C64::new(1.0, -2.0); 8]; 2];
        let out = add_awgn(&rx, 0.0, &mut stream(8, &[STREAM_NOISE]));
        assert_eq!(out, rx);
    }

    #[test]
    fn awgn_sample_variance_matches() {
        let zeros = vec![vec![C64::new(0.0, 0.0); 1000]; 10];
        let mut total = 0.0;
        for trial in 0..100 {
            let noisy = add_awgn(&zeros, 1.0, &mut stream(9, &[STREAM_NOISE, trial]));
            total += noisy.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>();
        }
        let mean = total / (100.0 * 10.0 * 1000.0);
        assert!((mean - 1.0).abs() < 0.01, "noise variance {mean}");
    }

    #[test]
    fn awgn_is_reproducible() {
        let rx = vec![vec![C64::new(0.5, 0.5); 32]; 3];
        let a = add_awgn(&rx, 0.3, &mut stream(10, &[STREAM_NOISE, 1]));
        let b = add_awgn(&rx, 0.3, &mut stream(10, &[STREAM_NOISE, 1]));
        assert_eq!(a, b);
    }

    #[test]
    fn unquantized_mode_is_passthrough() {
        let chan = random_chan(3, 2, 1, 8, 77);
        let rx = vec![vec![C64::new(0.3, -0.8); 8]; 3];
        let (out, variances) =
            quantize_receive(&rx, None, &chan, 1.0, 0.1, AgcMode::Analytic).unwrap();
        assert_eq!(out, rx);
        assert_eq!(variances.len(), 3);
    }

    #[test]
    fn analytic_agc_variance_on_flat_unit_channel() {
        // Flat single-user unit channel: variance_m = p / beta + sigma_n^2.
        for osr in [1usize, 2, 4] {
            let chan = flat_unit_channel(3, osr, 8);
            let power = 2.0;
            let noise = 0.25;
            let variances = analytic_receive_variances(&chan, power, noise);
            for &v in &variances {
                let expected = power / osr as f64 + noise;
                assert!((v - expected).abs() < 1e-9, "osr {osr}: {v} vs {expected}");
            }
        }
    }

    #[test]
    fn one_bit_regression_slope_is_bussgang_alpha() {
        // Regressing the quantized stream on the received stream recovers
        // alpha = 2/pi for 1-bit ADCs under analytic AGC.
        let chan = random_chan(2, 2, 2, 16, 1234);
        let spec = design_lloyd_max(1).unwrap();
        let sim = BlockSim {
            channel: &chan,
            quantizer: Some(&spec),
            power: 1.0,
            noise_power: 0.1,
            distribution: SymbolDistribution::Gaussian,
            agc: AgcMode::Analytic,
        };
        let mut cross = [C64::new(0.0, 0.0); 2];
        let mut power_acc = [0.0f64; 2];
        for blk in 0..500 {
            let block = sim
                .run(&mut stream(3, &[STREAM_SYMBOLS, blk]), &mut stream(3, &[STREAM_NOISE, blk]))
                .unwrap();
            for m in 0..2 {
                for (z, r) in block.rx_quantized[m].iter().zip(&block.rx_time[m]) {
                    cross[m] += z * r.conj();
                    power_acc[m] += r.norm_sqr();
                }
            }
        }
        for m in 0..2 {
            let slope = cross[m].re / power_acc[m];
            let alpha = 2.0 / std::f64::consts::PI;
            assert!(
                (slope - alpha).abs() / alpha < 0.02,
                "antenna {m}: slope {slope} vs {alpha}"
            );
        }
    }

    #[test]
    fn empirical_agc_tracks_the_analytic_variance() {
        let chan = random_chan(3, 2, 2, 16, 4040);
        let sim = BlockSim {
            channel: &chan,
            quantizer: None,
            power: 1.0,
            noise_power: 0.2,
            distribution: SymbolDistribution::Gaussian,
            agc: AgcMode::Analytic,
        };
        let analytic = analytic_receive_variances(&chan, 1.0, 0.2);
        let mut empirical = vec![0.0f64; 3];
        let blocks = 400;
        for blk in 0..blocks {
            let block = sim
                .run(
                    &mut stream(4040, &[STREAM_SYMBOLS, blk]),
                    &mut stream(4040, &[STREAM_NOISE, blk]),
                )
                .unwrap();
            let (_, variances) =
                quantize_receive(&block.rx_time, None, &chan, 1.0, 0.2, AgcMode::Empirical)
                    .unwrap();
            for (acc, v) in empirical.iter_mut().zip(&variances) {
                *acc += v;
            }
        }
        for (m, acc) in empirical.iter().enumerate() {
            let mean = acc / blocks as f64;
            let rel = (mean - analytic[m]).abs() / analytic[m];
            assert!(rel < 0.05, "antenna {m}: empirical {mean} vs analytic {}", analytic[m]);
        }
    }

    #[test]
    fn degenerate_input_is_rejected() {
        let chan = flat_unit_channel(1, 1, 8);
        let spec = design_lloyd_max(2).unwrap();
        let rx = vec![vec![C64::new(0.0, 0.0); 8]];
        let err = quantize_receive(&rx, Some(&spec), &chan, 1.0, 0.0, AgcMode::Empirical);
        assert!(matches!(err, Err(Error::DegenerateInput { .. })));
    }

    #[test]
    fn demodulate_constant_concentrates_on_dc() {
        let rows = vec![vec![C64::new(0.7, -0.1); 32]];
        let freq = demodulate(&rows);
        assert!((freq[0][0] - C64::new(0.7, -0.1) * (32.0f64).sqrt()).norm() < 1e-12);
        assert!(freq[0][1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn transform_round_trip_is_identity() {
        let mut rng = stream(11, &[STREAM_SYMBOLS]);
        let rows = generate_symbols(2, 16, 16, SymbolDistribution::Gaussian, &mut rng).unwrap();
        let back = demodulate(&modulate(&rows, 1.0));
        for (a, b) in back.iter().flatten().zip(rows.iter().flatten()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unquantized_null_bins_carry_only_noise() {
        let chan = random_chan(3, 2, 4, 8, 3030);
        let n_c = chan.params().total_subcarriers();
        let sim = BlockSim {
            channel: &chan,
            quantizer: None,
            power: 1.0,
            noise_power: 0.0,
            distribution: SymbolDistribution::Gaussian,
            agc: AgcMode::Analytic,
        };
        let block = sim
            .run(&mut stream(12, &[STREAM_SYMBOLS]), &mut stream(12, &[STREAM_NOISE]))
            .unwrap();
        // Noiseless here, so the null bins must be numerically empty.
        for m in 0..3 {
            for k in 8..n_c {
                assert!(block.rx_freq[m][k].norm_sqr() < 1e-10, "bin {k}");
            }
        }
    }

    #[test]
    fn quantization_spreads_energy_onto_null_bins() {
        let chan = random_chan(3, 2, 4, 8, 3030);
        let n_c = chan.params().total_subcarriers();
        let spec = design_lloyd_max(2).unwrap();
        let sim = BlockSim {
            channel: &chan,
            quantizer: Some(&spec),
            power: 1.0,
            noise_power: 0.0,
            distribution: SymbolDistribution::Gaussian,
            agc: AgcMode::Analytic,
        };
        let block = sim
            .run(&mut stream(13, &[STREAM_SYMBOLS]), &mut stream(13, &[STREAM_NOISE]))
            .unwrap();
        let null_energy: f64 =
            (8..n_c).map(|k| (0..3).map(|m| block.rx_freq[m][k].norm_sqr()).sum::<f64>()).sum();
        assert!(null_energy > 1e-3, "distortion must appear out of band, got {null_energy}");
    }

    #[test]
    fn quantized_output_alphabet_is_the_codebook() {
        let chan = random_chan(2, 2, 2, 8, 99);
        let spec = design_lloyd_max(3).unwrap();
        let sim = BlockSim {
            channel: &chan,
            quantizer: Some(&spec),
            power: 1.0,
            noise_power: 0.05,
            distribution: SymbolDistribution::Gaussian,
            agc: AgcMode::Analytic,
        };
        let block = sim
            .run(&mut stream(14, &[STREAM_SYMBOLS]), &mut stream(14, &[STREAM_NOISE]))
            .unwrap();
        for (m, row) in block.rx_quantized.iter().enumerate() {
            let scale = (block.agc_variances[m] / 2.0).sqrt();
            for v in row {
                let near =
                    |x: f64| spec.codebook().iter().any(|&c| (x / scale - c).abs() < 1e-12);
                assert!(near(v.re) && near(v.im));
            }
        }
    }

    #[test]
    fn noise_in_frequency_domain_is_white_with_preserved_variance() {
        // On the null bins of the unquantized chain the demodulated samples
        // are exactly the transformed noise: same variance, uncorrelated
        // across bins.
        let chan = random_chan(2, 1, 2, 8, 505);
        let n_c = chan.params().total_subcarriers();
        let noise_power = 0.8;
        let sim = BlockSim {
            channel: &chan,
            quantizer: None,
            power: 1.0,
            noise_power,
            distribution: SymbolDistribution::Gaussian,
            agc: AgcMode::Analytic,
        };
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut cross = C64::new(0.0, 0.0);
        let mut blocks = 0usize;
        for blk in 0..2_000 {
            let block = sim
                .run(
                    &mut stream(15, &[STREAM_SYMBOLS, blk]),
                    &mut stream(15, &[STREAM_NOISE, blk]),
                )
                .unwrap();
            for m in 0..2 {
                for k in 8..n_c {
                    acc += block.rx_freq[m][k].norm_sqr();
                    count += 1;
                }
            }
            cross += block.rx_freq[0][9] * block.rx_freq[0][13].conj();
            blocks += 1;
        }
        let mean = acc / count as f64;
        assert!((mean - noise_power).abs() / noise_power < 0.02, "null-bin variance {mean}");
        let correlation = (cross / blocks as f64).norm() / noise_power;
        assert!(correlation < 0.05, "null bins should be uncorrelated: {correlation:.4}");
    }

    #[test]
    fn block_dump_contains_every_stage() {
        let chan = random_chan(2, 1, 2, 4, 88);
        let spec = design_lloyd_max(2).unwrap();
        let sim = BlockSim {
            channel: &chan,
            quantizer: Some(&spec),
            power: 1.0,
            noise_power: 0.1,
            distribution: SymbolDistribution::Gaussian,
            agc: AgcMode::Analytic,
        };
        let block = sim
            .run(&mut stream(88, &[STREAM_SYMBOLS]), &mut stream(88, &[STREAM_NOISE]))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("block.json");
        block.dump_json(&path).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for stage in ["freq_symbols", "time_symbols", "rx_time", "rx_quantized", "rx_freq"] {
            let rows = value[stage].as_array().unwrap();
            assert!(!rows.is_empty(), "{stage} missing");
            assert_eq!(rows[0].as_array().unwrap().len(), 8);
        }
        assert_eq!(value["agc_variances"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn blocks_are_reproducible_and_streams_independent() {
        let chan = random_chan(2, 2, 1, 8, 31);
        let sim = BlockSim {
            channel: &chan,
            quantizer: None,
            power: 1.0,
            noise_power: 0.1,
            distribution: SymbolDistribution::Gaussian,
            agc: AgcMode::Analytic,
        };
        let a = sim
            .run(&mut stream(16, &[STREAM_SYMBOLS, 0]), &mut stream(16, &[STREAM_NOISE, 0]))
            .unwrap();
        let b = sim
            .run(&mut stream(16, &[STREAM_SYMBOLS, 0]), &mut stream(16, &[STREAM_NOISE, 0]))
            .unwrap();
        assert_eq!(a.rx_freq, b.rx_freq);
        let c = sim
            .run(&mut stream(16, &[STREAM_SYMBOLS, 1]), &mut stream(16, &[STREAM_NOISE, 1]))
            .unwrap();
        assert_ne!(a.rx_freq, c.rx_freq);
    }
}
