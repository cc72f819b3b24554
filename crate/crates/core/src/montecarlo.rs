//! Brute-force oracles and experiment orchestration: empirical distortion
//! covariance, empirical SINDR, and deterministic parallel sweeps over
//! (SNR, resolution, OSR).

use crate::analysis::{
    build_combiner, sindr_matrix, CombinerSet, EvalMode, RateResult, SindrMode,
};
use crate::channel::{draw_paths, ChannelRealization};
use crate::config::{CombinerMethod, Resolution, SystemConfig};
use crate::error::{Error, Result};
use crate::ofdm::{demodulate, AgcMode, BlockSim, SymbolDistribution};
use crate::quantizer::{design_lloyd_max, QuantizerSpec};
use crate::rng::{stream, STREAM_CHANNEL, STREAM_NOISE, STREAM_SYMBOLS};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::time::Instant;

/// A full sweep specification: base scenario, axes, averaging depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub base: SystemConfig,
    pub snr_db_list: Vec<f64>,
    pub bits_list: Vec<Resolution>,
    pub osr_list: Vec<usize>,
    pub num_realizations: usize,
    pub blocks_per_realization: usize,
    pub combiner: CombinerMethod,
    pub modes: Vec<EvalMode>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db_list.is_empty()
            || self.bits_list.is_empty()
            || self.osr_list.is_empty()
            || self.modes.is_empty()
        {
            return Err(Error::InvalidConfig("sweep axes must be non-empty".into()));
        }
        if self.num_realizations < 1 || self.blocks_per_realization < 1 {
            return Err(Error::InvalidConfig("averaging depths must be >= 1".into()));
        }
        for &osr in &self.osr_list {
            let mut cfg = self.base.clone();
            cfg.osr = osr;
            cfg.validate()?;
        }
        Ok(())
    }

    /// Deterministic enumeration of the axis cross product.
    pub fn axis_points(&self) -> Vec<AxisPoint> {
        let mut points = Vec::new();
        for &snr_db in &self.snr_db_list {
            for &bits in &self.bits_list {
                for &osr in &self.osr_list {
                    for &mode in &self.modes {
                        points.push(AxisPoint { snr_db, bits, osr, mode });
                    }
                }
            }
        }
        points
    }

    /// System configuration at one axis point.
    pub fn config_at(&self, point: &AxisPoint) -> SystemConfig {
        let mut cfg = self.base.clone();
        cfg.snr_db = point.snr_db;
        cfg.resolution = point.bits;
        cfg.osr = point.osr;
        cfg
    }
}

/// One point of the sweep cross product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPoint {
    pub snr_db: f64,
    pub bits: Resolution,
    pub osr: usize,
    pub mode: EvalMode,
}

/// Aggregated result at one axis point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub bits: Resolution,
    pub beta: usize,
    pub mode: EvalMode,
    /// Mean sum rate over successful realizations; NaN if all failed.
    pub rate_bps: f64,
    /// Standard error over realization means; NaN if fewer than two.
    pub stderr_bps: f64,
    /// Number of successful realizations behind the mean.
    pub n_real: usize,
    pub n_blk: usize,
    /// Wall-clock seconds spent on this row (informational; not part of
    /// the CSV schema, so CSV output stays bit-reproducible).
    pub runtime_s: f64,
    /// First per-realization failure, if any.
    pub error: Option<String>,
}

/// Sweep output with full provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub plan: ExperimentPlan,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Stable CSV schema:
    /// `snr_db,bits,beta,mode,rate_bps,stderr_bps,n_real,n_blk`.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["snr_db", "bits", "beta", "mode", "rate_bps", "stderr_bps", "n_real", "n_blk"])?;
        for row in &self.rows {
            writer.write_record([
                format_f64(row.snr_db),
                row.bits.to_string(),
                row.beta.to_string(),
                row.mode.to_string(),
                format_f64(row.rate_bps),
                format_f64(row.stderr_bps),
                row.n_real.to_string(),
                row.n_blk.to_string(),
            ])?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn find(&self, snr_db: f64, bits: Resolution, beta: usize, mode: EvalMode) -> Option<&SweepRow> {
        self.rows.iter().find(|row| {
            row.snr_db == snr_db && row.bits == bits && row.beta == beta && row.mode == mode
        })
    }
}

/// Shortest-round-trip decimal formatting (same as the JSON encoder), so
/// CSV bytes are identical across runs and worker counts.
fn format_f64(value: f64) -> String {
    if value.is_nan() {
        "NaN".to_string()
    } else {
        let mut buf = ryu::Buffer::new();
        buf.format(value).to_string()
    }
}

/// Empirical per-subcarrier distortion covariances.
///
/// For each block the distortion is extracted with the analytic Bussgang
/// gain, `eta~[k] = z~[k] - alpha r~[k]`, and accumulated into one M x M
/// second-moment matrix per subcarrier (the distortion has zero mean).
/// This is the ground-truth oracle for the closed-form approximation.
pub fn estimate_distortion_cov_empirical(
    config: &SystemConfig,
    channel: &ChannelRealization,
    quantizer: Option<&QuantizerSpec>,
    n_blk: usize,
    symbol_rng: &mut rand_chacha::ChaCha8Rng,
    noise_rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<DMatrix<C64>>> {
    assert!(n_blk >= 50, "distortion covariance estimate needs >= 50 blocks");
    let n_c = channel.params().total_subcarriers();
    let m = channel.num_antennas();
    let alpha = quantizer.map_or(1.0, |q| q.alpha());
    let sim = BlockSim {
        channel,
        quantizer,
        power: config.transmit_power(),
        noise_power: config.noise_power(),
        distribution: SymbolDistribution::Gaussian,
        agc: AgcMode::Analytic,
    };
    let mut covs = vec![DMatrix::<C64>::zeros(m, m); n_c];
    let mut eta = DVector::<C64>::zeros(m);
    for _ in 0..n_blk {
        let block = sim.run(symbol_rng, noise_rng)?;
        let rx_freq_unquantized = demodulate(&block.rx_time);
        for k in 0..n_c {
            for row in 0..m {
                eta[row] = block.rx_freq[row][k] - rx_freq_unquantized[row][k] * alpha;
            }
            let cov = &mut covs[k];
            for r in 0..m {
                for c in 0..m {
                    cov[(r, c)] += eta[r] * eta[c].conj();
                }
            }
        }
    }
    let norm = C64::new(1.0 / n_blk as f64, 0.0);
    for cov in &mut covs {
        *cov *= norm;
    }
    Ok(covs)
}

/// Empirical SINDR per (subcarrier, user) from `n_blk` simulated blocks
/// with known symbols.
///
/// The effective desired gain is estimated as
/// `a_u[k] = E[x^_u[k] conj(s~_u[k])]` (unit symbol power), and the SINDR is
/// `|a|^2 / Var(x^ - a s~)`.
pub fn estimate_sindr_empirical(
    config: &SystemConfig,
    channel: &ChannelRealization,
    combiner: &CombinerSet,
    quantizer: Option<&QuantizerSpec>,
    n_blk: usize,
    symbol_rng: &mut rand_chacha::ChaCha8Rng,
    noise_rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    assert!(n_blk >= 100, "SINDR estimate needs >= 100 blocks");
    let k_active = channel.params().active_subcarriers;
    let users = channel.num_users();
    let m = channel.num_antennas();
    let sim = BlockSim {
        channel,
        quantizer,
        power: config.transmit_power(),
        noise_power: config.noise_power(),
        distribution: SymbolDistribution::Gaussian,
        agc: AgcMode::Analytic,
    };
    let mut cross = DMatrix::<C64>::zeros(k_active, users);
    let mut xhat_sq = DMatrix::<f64>::zeros(k_active, users);
    let mut sym_sq = DMatrix::<f64>::zeros(k_active, users);
    for _ in 0..n_blk {
        let block = sim.run(symbol_rng, noise_rng)?;
        for k in 0..k_active {
            let g = combiner.at(k);
            for u in 0..users {
                let mut xhat = C64::new(0.0, 0.0);
                for row in 0..m {
                    xhat += g[(row, u)].conj() * block.rx_freq[row][k];
                }
                let symbol = block.freq_symbols[u][k];
                cross[(k, u)] += xhat * symbol.conj();
                xhat_sq[(k, u)] += xhat.norm_sqr();
                sym_sq[(k, u)] += symbol.norm_sqr();
            }
        }
    }
    let n = n_blk as f64;
    let sindr = DMatrix::from_fn(k_active, users, |k, u| {
        let a = cross[(k, u)] / n;
        let residual_var =
            (xhat_sq[(k, u)] / n - 2.0 * a.norm_sqr() + a.norm_sqr() * sym_sq[(k, u)] / n)
                .max(f64::MIN_POSITIVE);
        a.norm_sqr() / residual_var
    });
    Ok(sindr)
}

/// Evaluates one (channel, combiner, axis point) to a rate table.
pub fn evaluate_point(
    plan: &ExperimentPlan,
    point: &AxisPoint,
    axis_index: usize,
    realization: usize,
    channel: &ChannelRealization,
    combiner: &CombinerSet,
    quantizers: &HashMap<u32, QuantizerSpec>,
) -> Result<RateResult> {
    let config = plan.config_at(point);
    let rho = config.rho();
    let gamma = match point.bits {
        Resolution::Unquantized => 0.0,
        Resolution::Bits(b) => quantizers
            .get(&b)
            .ok_or_else(|| Error::InvalidConfig(format!("no quantizer designed for {b} bits")))?
            .gamma(),
    };
    let beta = point.osr as f64;
    let sindr = match point.mode {
        EvalMode::Analytical => {
            sindr_matrix(channel, combiner, SindrMode::Approx { rho, gamma, beta })
        }
        EvalMode::Unquantized => sindr_matrix(channel, combiner, SindrMode::Unquantized { rho }),
        EvalMode::BoundOsrInf => {
            sindr_matrix(channel, combiner, SindrMode::OsrInf { rho, gamma })
        }
        EvalMode::BoundSnrInf => {
            sindr_matrix(channel, combiner, SindrMode::SnrInf { gamma, beta })
        }
        EvalMode::BoundTotal => sindr_matrix(channel, combiner, SindrMode::Total),
        EvalMode::Empirical => {
            let quantizer = match point.bits {
                Resolution::Unquantized => None,
                Resolution::Bits(b) => quantizers.get(&b),
            };
            let labels_sym = [STREAM_SYMBOLS, realization as u64, axis_index as u64];
            let labels_noise = [STREAM_NOISE, realization as u64, axis_index as u64];
            estimate_sindr_empirical(
                &config,
                channel,
                combiner,
                quantizer,
                plan.blocks_per_realization,
                &mut stream(plan.base.seed, &labels_sym),
                &mut stream(plan.base.seed, &labels_noise),
            )?
        }
    };
    RateResult::new(sindr, point.mode, config)
}

struct RealizationOutcome {
    /// Sum rate per axis point, or the failure message.
    rates: Vec<std::result::Result<f64, String>>,
}

/// Designs one quantizer per finite resolution on the bits axis.
pub fn design_quantizers(bits_list: &[Resolution]) -> Result<HashMap<u32, QuantizerSpec>> {
    let mut quantizers = HashMap::new();
    for bits in bits_list {
        if let Resolution::Bits(b) = bits {
            if !quantizers.contains_key(b) {
                quantizers.insert(*b, design_lloyd_max(*b)?);
            }
        }
    }
    Ok(quantizers)
}

fn run_realization(
    plan: &ExperimentPlan,
    realization: usize,
    quantizers: &HashMap<u32, QuantizerSpec>,
) -> Result<RealizationOutcome> {
    // Shared path parameters across every osr so oversampling comparisons
    // isolate the sampling effect.
    let base_params = {
        let mut cfg = plan.base.clone();
        cfg.osr = plan.osr_list[0];
        cfg.channel_params()?
    };
    let paths = draw_paths(
        &base_params,
        &mut stream(plan.base.seed, &[STREAM_CHANNEL, realization as u64]),
    );

    let mut channels: HashMap<usize, (ChannelRealization, CombinerSet)> = HashMap::new();
    for &osr in &plan.osr_list {
        if channels.contains_key(&osr) {
            continue;
        }
        let mut cfg = plan.base.clone();
        cfg.osr = osr;
        let channel = ChannelRealization::from_paths(cfg.channel_params()?, paths.clone())?;
        let combiner = build_combiner(&channel, plan.combiner)?;
        channels.insert(osr, (channel, combiner));
    }

    let rates = plan
        .axis_points()
        .iter()
        .enumerate()
        .map(|(axis_index, point)| {
            let (channel, combiner) = &channels[&point.osr];
            evaluate_point(plan, point, axis_index, realization, channel, combiner, quantizers)
                .map(|result| result.sum_rate_bps)
                .map_err(|e| e.to_string())
        })
        .collect();
    Ok(RealizationOutcome { rates })
}

/// Runs the full sweep: every axis point evaluated on every channel
/// realization, aggregated into means and standard errors.
///
/// Realizations execute in parallel; every random quantity comes from a
/// counter-derived stream, so the output is bit-identical for any worker
/// count.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<SweepTable> {
    plan.validate()?;
    let started = Instant::now();
    let quantizers = design_quantizers(&plan.bits_list)?;
    let outcomes: Vec<Result<RealizationOutcome>> = (0..plan.num_realizations)
        .into_par_iter()
        .map(|realization| run_realization(plan, realization, &quantizers))
        .collect();
    let mut realizations = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        realizations.push(outcome?);
    }
    let elapsed = started.elapsed().as_secs_f64();

    let points = plan.axis_points();
    let per_row_runtime = elapsed / points.len() as f64;
    let rows = points
        .iter()
        .enumerate()
        .map(|(axis_index, point)| {
            let mut values = Vec::with_capacity(realizations.len());
            let mut first_error = None;
            for outcome in &realizations {
                match &outcome.rates[axis_index] {
                    Ok(rate) => values.push(*rate),
                    Err(message) => {
                        if first_error.is_none() {
                            first_error = Some(message.clone());
                        }
                    }
                }
            }
            let n = values.len();
            let mean = if n == 0 {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / n as f64
            };
            let stderr = if n >= 2 {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (n as f64 - 1.0);
                (var / n as f64).sqrt()
            } else {
                f64::NAN
            };
            SweepRow {
                snr_db: point.snr_db,
                bits: point.bits,
                beta: point.osr,
                mode: point.mode,
                rate_bps: mean,
                stderr_bps: stderr,
                n_real: n,
                n_blk: plan.blocks_per_realization,
                runtime_s: per_row_runtime,
                error: first_error,
            }
        })
        .collect();
    Ok(SweepTable { plan: plan.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{mrc_combiner, sindr_approx, sindr_exact_form, sum_rate};

    fn desk_config(m: usize, u: usize, k: usize, osr: usize, bits: Resolution, snr_db: f64, seed: u64) -> SystemConfig {
        SystemConfig {
            num_antennas: m,
            num_users: u,
            active_subcarriers: k,
            osr,
            resolution: bits,
            snr_db,
            seed,
            ..SystemConfig::default()
        }
    }

    fn channel_for(config: &SystemConfig, realization: u64) -> ChannelRealization {
        let params = config.channel_params().unwrap();
        ChannelRealization::generate(
            &params,
            &mut stream(config.seed, &[STREAM_CHANNEL, realization]),
        )
        .unwrap()
    }

    #[test]
    fn unquantized_distortion_covariance_vanishes() {
        let config = desk_config(3, 2, 8, 2, Resolution::Unquantized, 0.0, 7);
        let channel = channel_for(&config, 0);
        let covs = estimate_distortion_cov_empirical(
            &config,
            &channel,
            None,
            60,
            &mut stream(7, &[STREAM_SYMBOLS, 0]),
            &mut stream(7, &[STREAM_NOISE, 0]),
        )
        .unwrap();
        for cov in &covs {
            assert!(cov.norm() < 1e-12);
        }
    }

    #[test]
    fn distortion_covariances_are_hermitian_psd() {
        let config = desk_config(3, 2, 8, 1, Resolution::Bits(2), 5.0, 8);
        let channel = channel_for(&config, 0);
        let spec = design_lloyd_max(2).unwrap();
        let covs = estimate_distortion_cov_empirical(
            &config,
            &channel,
            Some(&spec),
            100,
            &mut stream(8, &[STREAM_SYMBOLS, 0]),
            &mut stream(8, &[STREAM_NOISE, 0]),
        )
        .unwrap();
        for cov in &covs {
            assert!((cov - cov.adjoint()).norm() < 1e-10 * cov.norm());
            let shifted = cov.clone()
                + DMatrix::<C64>::identity(3, 3) * C64::new(1e-10 * cov.norm(), 0.0);
            assert!(nalgebra::linalg::Cholesky::new(shifted).is_some());
        }
    }

    #[test]
    fn distortion_cov_approx_matches_in_the_accurate_regime() {
        // b = 3, beta = 1, low SNR: the subcarrier-averaged empirical
        // distortion diagonal must sit within a few percent of the closed
        // form.
        let config = desk_config(4, 2, 16, 1, Resolution::Bits(3), -10.0, 9);
        let channel = channel_for(&config, 0);
        let spec = design_lloyd_max(3).unwrap();
        let covs = estimate_distortion_cov_empirical(
            &config,
            &channel,
            Some(&spec),
            600,
            &mut stream(9, &[STREAM_SYMBOLS, 0]),
            &mut stream(9, &[STREAM_NOISE, 0]),
        )
        .unwrap();
        let n_c = channel.params().total_subcarriers();
        let approx = crate::analysis::distortion_cov_approx(
            &channel,
            config.transmit_power(),
            config.noise_power(),
            spec.gamma(),
        );
        for m in 0..4 {
            let avg: f64 = covs.iter().map(|c| c[(m, m)].re).sum::<f64>() / n_c as f64;
            let rel = (avg - approx[m]).abs() / approx[m];
            assert!(rel < 0.10, "antenna {m}: empirical {avg} vs approx {} ({rel:.3})", approx[m]);
        }
    }

    #[test]
    fn per_subcarrier_gap_grows_in_the_optimistic_regime() {
        // The per-subcarrier structure error of the flat approximation is
        // larger at (b=1, beta=4, 20 dB) than at (b=3, beta=1, -10 dB).
        let gap = |bits: u32, osr: usize, snr_db: f64, seed: u64| -> f64 {
            let config = desk_config(4, 2, 16, osr, Resolution::Bits(bits), snr_db, seed);
            let channel = channel_for(&config, 0);
            let spec = design_lloyd_max(bits).unwrap();
            let covs = estimate_distortion_cov_empirical(
                &config,
                &channel,
                Some(&spec),
                400,
                &mut stream(seed, &[STREAM_SYMBOLS, 1]),
                &mut stream(seed, &[STREAM_NOISE, 1]),
            )
            .unwrap();
            let approx = crate::analysis::distortion_cov_approx(
                &channel,
                config.transmit_power(),
                config.noise_power(),
                spec.gamma(),
            );
            let mut acc = 0.0;
            let mut count = 0usize;
            for cov in &covs {
                for m in 0..4 {
                    acc += (cov[(m, m)].re - approx[m]).abs() / approx[m];
                    count += 1;
                }
            }
            acc / count as f64
        };
        let accurate = gap(3, 1, -10.0, 11);
        let optimistic = gap(1, 4, 20.0, 11);
        assert!(
            optimistic > accurate,
            "per-subcarrier gap should grow: {optimistic:.4} vs {accurate:.4}"
        );
    }

    #[test]
    fn empirical_sindr_matches_closed_form_unquantized() {
        let config = desk_config(6, 1, 8, 1, Resolution::Unquantized, 10.0, 13);
        let channel = channel_for(&config, 0);
        let combiner = mrc_combiner(&channel).unwrap();
        let sindr = estimate_sindr_empirical(
            &config,
            &channel,
            &combiner,
            None,
            800,
            &mut stream(13, &[STREAM_SYMBOLS, 0]),
            &mut stream(13, &[STREAM_NOISE, 0]),
        )
        .unwrap();
        let rho = config.rho();
        for k in 0..8 {
            let expected = rho * channel.freq_at(k).column(0).norm_squared();
            let got = sindr[(k, 0)];
            let rel = (got - expected).abs() / expected;
            assert!(rel < 0.20, "k={k}: empirical {got} vs {expected} ({rel:.3})");
        }
        let mean_rel: f64 = (0..8)
            .map(|k| {
                let expected = rho * channel.freq_at(k).column(0).norm_squared();
                (sindr[(k, 0)] - expected).abs() / expected
            })
            .sum::<f64>()
            / 8.0;
        assert!(mean_rel < 0.06, "mean relative gap {mean_rel:.3}");
    }

    #[test]
    fn twelve_bit_empirical_sindr_is_effectively_unquantized() {
        let config = desk_config(4, 2, 8, 1, Resolution::Bits(12), 0.0, 15);
        let channel = channel_for(&config, 0);
        let combiner = mrc_combiner(&channel).unwrap();
        let spec = design_lloyd_max(12).unwrap();
        let run = |quantizer: Option<&QuantizerSpec>| {
            estimate_sindr_empirical(
                &config,
                &channel,
                &combiner,
                quantizer,
                400,
                &mut stream(15, &[STREAM_SYMBOLS, 2]),
                &mut stream(15, &[STREAM_NOISE, 2]),
            )
            .unwrap()
        };
        let quantized = run(Some(&spec));
        let reference = run(None);
        for k in 0..8 {
            for u in 0..2 {
                let rel = (quantized[(k, u)] - reference[(k, u)]).abs() / reference[(k, u)];
                assert!(rel < 0.01, "k={k} u={u}: {rel:.4}");
            }
        }
    }

    #[test]
    fn oversampling_helps_one_bit_at_high_snr() {
        // The central oversampling effect, checked empirically: at 20 dB a
        // 1-bit system with beta = 4 beats beta = 1 on matched channels.
        let spec = design_lloyd_max(1).unwrap();
        let mut mean_rates = [0.0f64; 2];
        for realization in 0..3u64 {
            let base = desk_config(4, 2, 16, 1, Resolution::Bits(1), 20.0, 17);
            let params_b1 = base.channel_params().unwrap();
            let paths = draw_paths(&params_b1, &mut stream(17, &[STREAM_CHANNEL, realization]));
            for (slot, osr) in [1usize, 4].into_iter().enumerate() {
                let mut config = base.clone();
                config.osr = osr;
                let channel = ChannelRealization::from_paths(
                    config.channel_params().unwrap(),
                    paths.clone(),
                )
                .unwrap();
                let combiner = mrc_combiner(&channel).unwrap();
                let sindr = estimate_sindr_empirical(
                    &config,
                    &channel,
                    &combiner,
                    Some(&spec),
                    300,
                    &mut stream(17, &[STREAM_SYMBOLS, realization, slot as u64]),
                    &mut stream(17, &[STREAM_NOISE, realization, slot as u64]),
                )
                .unwrap();
                mean_rates[slot] += sum_rate(&sindr, config.subcarrier_spacing_hz).unwrap();
            }
        }
        assert!(
            mean_rates[1] > mean_rates[0],
            "beta=4 should beat beta=1: {mean_rates:?}"
        );
    }

    #[test]
    fn empirical_tracks_analytical_in_the_accurate_regime() {
        // b >= 3, beta <= 2, rho <= 0 dB: mean relative SINDR gap below 15%.
        let config = desk_config(4, 2, 16, 2, Resolution::Bits(3), 0.0, 19);
        let channel = channel_for(&config, 0);
        let combiner = mrc_combiner(&channel).unwrap();
        let spec = design_lloyd_max(3).unwrap();
        let empirical = estimate_sindr_empirical(
            &config,
            &channel,
            &combiner,
            Some(&spec),
            600,
            &mut stream(19, &[STREAM_SYMBOLS, 3]),
            &mut stream(19, &[STREAM_NOISE, 3]),
        )
        .unwrap();
        let mut acc = 0.0;
        for k in 0..16 {
            for u in 0..2 {
                let approx =
                    sindr_approx(&channel, &combiner, config.rho(), spec.gamma(), 2.0, u, k);
                acc += (empirical[(k, u)] - approx).abs() / approx;
            }
        }
        let mean_gap = acc / 32.0;
        assert!(mean_gap < 0.15, "mean relative gap {mean_gap:.3}");
    }

    #[test]
    fn sindr_approximation_gap_is_directional() {
        // Gap at (b=1, beta=4, 20 dB) exceeds the gap at (b=3, beta=1,
        // -10 dB) on matched channels.
        let gap = |bits: u32, osr: usize, snr_db: f64| -> f64 {
            let base = desk_config(4, 2, 16, osr, Resolution::Bits(bits), snr_db, 21);
            let params = {
                let mut cfg = base.clone();
                cfg.osr = 1;
                cfg.channel_params().unwrap()
            };
            let paths = draw_paths(&params, &mut stream(21, &[STREAM_CHANNEL, 5]));
            let channel =
                ChannelRealization::from_paths(base.channel_params().unwrap(), paths).unwrap();
            let combiner = mrc_combiner(&channel).unwrap();
            let spec = design_lloyd_max(bits).unwrap();
            let empirical = estimate_sindr_empirical(
                &base,
                &channel,
                &combiner,
                Some(&spec),
                500,
                &mut stream(21, &[STREAM_SYMBOLS, 4]),
                &mut stream(21, &[STREAM_NOISE, 4]),
            )
            .unwrap();
            let mut acc = 0.0;
            for k in 0..16 {
                for u in 0..2 {
                    let approx = sindr_approx(
                        &channel,
                        &combiner,
                        base.rho(),
                        spec.gamma(),
                        osr as f64,
                        u,
                        k,
                    );
                    acc += (empirical[(k, u)] - approx).abs() / approx;
                }
            }
            acc / 32.0
        };
        let accurate = gap(3, 1, -10.0);
        let optimistic = gap(1, 4, 20.0);
        assert!(optimistic > accurate, "{optimistic:.3} vs {accurate:.3}");
    }

    #[test]
    fn exact_form_with_empirical_covariance_is_below_the_approximation() {
        // At (b=1, beta=4, 20 dB) the approximation is optimistic: plugging
        // the measured covariance into the exact form lowers the SINDR.
        let config = desk_config(4, 2, 16, 4, Resolution::Bits(1), 20.0, 23);
        let channel = channel_for(&config, 0);
        let combiner = mrc_combiner(&channel).unwrap();
        let spec = design_lloyd_max(1).unwrap();
        let covs = estimate_distortion_cov_empirical(
            &config,
            &channel,
            Some(&spec),
            500,
            &mut stream(23, &[STREAM_SYMBOLS, 6]),
            &mut stream(23, &[STREAM_NOISE, 6]),
        )
        .unwrap();
        let mut exact_mean = 0.0;
        let mut approx_mean = 0.0;
        for (k, cov) in covs.iter().enumerate().take(16) {
            // Hermitize the sample covariance to remove accumulation
            // round-off before validation.
            let sym = (cov.clone() + cov.adjoint()) * C64::new(0.5, 0.0);
            for u in 0..2 {
                exact_mean += sindr_exact_form(
                    &channel,
                    &combiner,
                    config.transmit_power(),
                    config.noise_power(),
                    &sym,
                    spec.alpha(),
                    u,
                    k,
                )
                .unwrap();
                approx_mean +=
                    sindr_approx(&channel, &combiner, config.rho(), spec.gamma(), 4.0, u, k);
            }
        }
        assert!(
            exact_mean < approx_mean,
            "exact {exact_mean:.3} should be below approx {approx_mean:.3}"
        );
    }

    fn tiny_plan(modes: Vec<EvalMode>, bits: Vec<Resolution>, n_real: usize) -> ExperimentPlan {
        ExperimentPlan {
            base: desk_config(4, 2, 8, 1, Resolution::Bits(1), 10.0, 31),
            snr_db_list: vec![0.0, 10.0],
            bits_list: bits,
            osr_list: vec![1, 2],
            num_realizations: n_real,
            blocks_per_realization: 120,
            combiner: CombinerMethod::Mrc,
            modes,
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let plan = tiny_plan(
            vec![EvalMode::Analytical, EvalMode::Empirical],
            vec![Resolution::Bits(1)],
            3,
        );
        let a = run_experiment(&plan).unwrap().to_csv_string().unwrap();
        let b = run_experiment(&plan).unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn analytical_unquantized_axis_equals_unquantized_mode() {
        let plan = tiny_plan(
            vec![EvalMode::Analytical, EvalMode::Unquantized],
            vec![Resolution::Unquantized],
            2,
        );
        let table = run_experiment(&plan).unwrap();
        for &snr in &plan.snr_db_list {
            for &osr in &plan.osr_list {
                let a = table
                    .find(snr, Resolution::Unquantized, osr, EvalMode::Analytical)
                    .unwrap();
                let b = table
                    .find(snr, Resolution::Unquantized, osr, EvalMode::Unquantized)
                    .unwrap();
                assert_eq!(a.rate_bps.to_bits(), b.rate_bps.to_bits());
            }
        }
    }

    #[test]
    fn unbounded_rows_record_errors_without_aborting() {
        let mut plan = tiny_plan(
            vec![EvalMode::BoundTotal, EvalMode::Unquantized],
            vec![Resolution::Bits(1)],
            2,
        );
        plan.base.num_users = 1;
        plan.base.num_antennas = 4;
        let table = run_experiment(&plan).unwrap();
        for row in &table.rows {
            match row.mode {
                EvalMode::BoundTotal => {
                    assert_eq!(row.n_real, 0);
                    assert!(row.rate_bps.is_nan());
                    assert!(row.error.as_deref().unwrap_or("").contains("unbounded"));
                }
                _ => {
                    assert_eq!(row.n_real, 2);
                    assert!(row.rate_bps.is_finite());
                    assert!(row.error.is_none());
                }
            }
        }
    }

    #[test]
    fn standard_errors_shrink_with_realizations() {
        let rates = |n_real: usize| -> f64 {
            let mut plan = tiny_plan(vec![EvalMode::Analytical], vec![Resolution::Bits(1)], n_real);
            plan.snr_db_list = vec![10.0];
            plan.osr_list = vec![1];
            let table = run_experiment(&plan).unwrap();
            table.rows[0].stderr_bps
        };
        let se25 = rates(25);
        let se100 = rates(100);
        let se400 = rates(400);
        for (small, large, label) in [(se25, se100, "25->100"), (se100, se400, "100->400")] {
            let ratio = small / large;
            assert!(
                (2.0 / 1.5..2.0 * 1.5).contains(&ratio),
                "{label}: stderr ratio {ratio:.3}"
            );
        }
    }

    #[test]
    fn worker_count_does_not_change_the_table() {
        let plan = tiny_plan(
            vec![EvalMode::Analytical, EvalMode::Empirical],
            vec![Resolution::Bits(2)],
            4,
        );
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&plan).unwrap().to_csv_string().unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_experiment(&plan).unwrap().to_csv_string().unwrap());
        assert_eq!(single, many);
    }

    #[test]
    fn zero_forcing_sweeps_run_and_beat_mrc_at_high_snr() {
        // ZF removes the interference floor, so with enough antennas it
        // wins at high SNR on the analytical curves.
        let rate_with = |combiner: CombinerMethod| -> f64 {
            let plan = ExperimentPlan {
                base: desk_config(8, 3, 16, 1, Resolution::Bits(3), 20.0, 37),
                snr_db_list: vec![20.0],
                bits_list: vec![Resolution::Bits(3)],
                osr_list: vec![1],
                num_realizations: 20,
                blocks_per_realization: 100,
                combiner,
                modes: vec![EvalMode::Analytical],
            };
            run_experiment(&plan).unwrap().rows[0].rate_bps
        };
        let mrc = rate_with(CombinerMethod::Mrc);
        let zf = rate_with(CombinerMethod::Zf);
        assert!(zf.is_finite() && mrc.is_finite());
        assert!(zf > mrc, "ZF {zf:.3e} should beat MRC {mrc:.3e} at 20 dB");
    }

    #[test]
    fn plan_validation_rejects_empty_axes() {
        let mut plan = tiny_plan(vec![EvalMode::Analytical], vec![Resolution::Bits(1)], 1);
        plan.snr_db_list.clear();
        assert!(matches!(plan.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn csv_schema_is_stable() {
        let plan = tiny_plan(vec![EvalMode::Analytical], vec![Resolution::Bits(1)], 1);
        let table = run_experiment(&plan).unwrap();
        let csv = table.to_csv_string().unwrap();
        let header = csv.lines().next().unwrap();
        assert_eq!(header, "snr_db,bits,beta,mode,rate_bps,stderr_bps,n_real,n_blk");
        assert_eq!(csv.lines().count(), 1 + plan.axis_points().len());
    }
}
