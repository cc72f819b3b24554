//! Named experiments: the quantizer table, the three figure sweeps,
//! and the validation suite.

use crate::{Format, RunConfig};
use anyhow::{bail, Context, Result};
use qmimo::analysis::{adc_power, EvalMode};
use qmimo::config::{Resolution, SystemConfig};
use qmimo::montecarlo::{run_experiment, ExperimentPlan, SweepRow, SweepTable};
use qmimo::quantizer::design_lloyd_max;
use serde::Serialize;
use std::path::Path;

/// CSV table of the Gaussian-optimal quantizers: resolution, distortion
/// factor, Bussgang gain, and the codebook levels.
pub fn quantizer_table(max_bits: u32) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["bits", "gamma", "alpha", "codebook"])?;
    for bits in 1..=max_bits {
        let spec = design_lloyd_max(bits)?;
        let codebook = spec
            .codebook()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writer.write_record([
            bits.to_string(),
            spec.gamma().to_string(),
            spec.alpha().to_string(),
            codebook,
        ])?;
    }
    let bytes = writer.into_inner().context("flush quantizer table")?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One curve file written to disk.
#[derive(Debug, Serialize)]
struct CurveEntry {
    file: String,
    mode: EvalMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    bits: Option<Resolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    osr: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snr_db: Option<f64>,
    rows: usize,
}

#[derive(Debug, Serialize)]
struct AdcPowerEntry {
    bits: u32,
    osr: usize,
    power_w: f64,
}

/// Full provenance for a figure run: resolved plan, seed, file list, and
/// the ADC power of every (resolution, OSR) combination in the sweep.
#[derive(Debug, Serialize)]
struct Manifest {
    scenario: String,
    seed: u64,
    format: &'static str,
    /// Signal bandwidth B_w = K * delta_f; divides rate_bps into
    /// spectral efficiency.
    bandwidth_hz: f64,
    plan: ExperimentPlan,
    adc_power_w: Vec<AdcPowerEntry>,
    curves: Vec<CurveEntry>,
}

fn base_config(config: &RunConfig) -> SystemConfig {
    let defaults = SystemConfig::default();
    SystemConfig {
        num_antennas: config.antennas.unwrap_or(defaults.num_antennas),
        num_users: config.users.unwrap_or(defaults.num_users),
        active_subcarriers: config.subcarriers.unwrap_or(defaults.active_subcarriers),
        pulse_rolloff: config.rolloff.unwrap_or(defaults.pulse_rolloff),
        seed: config.seed,
        ..defaults
    }
}

fn adc_powers(plan: &ExperimentPlan) -> Vec<AdcPowerEntry> {
    let mut entries = Vec::new();
    for bits in &plan.bits_list {
        if let Resolution::Bits(b) = bits {
            for &osr in &plan.osr_list {
                let mut cfg = plan.base.clone();
                cfg.osr = osr;
                entries.push(AdcPowerEntry {
                    bits: *b,
                    osr,
                    power_w: adc_power(cfg.adc_kappa_w, cfg.sample_rate_hz(), *b),
                });
            }
        }
    }
    entries
}

/// A curve is a subset of sweep rows sharing a mode and fixed axes.
struct Curve {
    name: String,
    mode: EvalMode,
    bits: Option<Resolution>,
    osr: Option<usize>,
    snr_db: Option<f64>,
    rows: Vec<SweepRow>,
}

fn write_curve(
    out_dir: &Path,
    format: Format,
    table_plan: &ExperimentPlan,
    curve: &Curve,
) -> Result<CurveEntry> {
    let extension = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let file = format!("{}.{extension}", curve.name);
    let path = out_dir.join(&file);
    let subset = SweepTable { plan: table_plan.clone(), rows: curve.rows.clone() };
    match format {
        Format::Csv => std::fs::write(&path, subset.to_csv_string()?)?,
        Format::Json => std::fs::write(&path, subset.to_json_string()?)?,
    }
    Ok(CurveEntry {
        file,
        mode: curve.mode,
        bits: curve.bits,
        osr: curve.osr,
        snr_db: curve.snr_db,
        rows: curve.rows.len(),
    })
}

fn select_rows(
    table: &SweepTable,
    mode: EvalMode,
    bits: Option<Resolution>,
    osr: Option<usize>,
    snr_db: Option<f64>,
) -> Vec<SweepRow> {
    table
        .rows
        .iter()
        .filter(|row| {
            row.mode == mode
                && bits.is_none_or(|b| row.bits == b)
                && osr.is_none_or(|o| row.beta == o)
                && snr_db.is_none_or(|s| row.snr_db == s)
        })
        .cloned()
        .collect()
}

type CurveBuilder = fn(&SweepTable) -> Vec<Curve>;

pub fn run_figure(config: &RunConfig) -> Result<()> {
    let base = base_config(config);
    let default_snr: Vec<f64> = vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
    let out_dir = &config.out_dir;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let (tables, curves_of): (Vec<(ExperimentPlan, SweepTable)>, CurveBuilder) =
        match config.scenario.as_str() {
            "fig1" => {
                let plan = ExperimentPlan {
                    base: base.clone(),
                    snr_db_list: config.snr_db.clone().unwrap_or(default_snr),
                    bits_list: config.bits.clone().unwrap_or_else(|| {
                        vec![Resolution::Bits(1), Resolution::Bits(2), Resolution::Bits(3)]
                    }),
                    osr_list: config.osr.clone().unwrap_or_else(|| vec![1, 2, 4]),
                    num_realizations: config.realizations.unwrap_or(100),
                    blocks_per_realization: config.blocks.unwrap_or(200),
                    combiner: config.combiner,
                    modes: vec![
                        EvalMode::Analytical,
                        EvalMode::Unquantized,
                        EvalMode::BoundSnrInf,
                        EvalMode::BoundTotal,
                    ],
                };
                let table = run_experiment(&plan)?;
                (vec![(plan, table)], curves_fig1)
            }
            "fig2" => {
                // Equal-ADC-power configurations share the master seed, so
                // each realization compares the same physical paths.
                let mut tables = Vec::new();
                for (bits, osr) in [(1u32, 4usize), (2, 2), (3, 1)] {
                    let plan = ExperimentPlan {
                        base: base.clone(),
                        snr_db_list: config.snr_db.clone().unwrap_or_else(|| default_snr.clone()),
                        bits_list: vec![Resolution::Bits(bits)],
                        osr_list: vec![osr],
                        num_realizations: config.realizations.unwrap_or(100),
                        blocks_per_realization: config.blocks.unwrap_or(200),
                        combiner: config.combiner,
                        modes: vec![EvalMode::Analytical],
                    };
                    let table = run_experiment(&plan)?;
                    tables.push((plan, table));
                }
                (tables, curves_fig2)
            }
            "fig3" => {
                let plan = ExperimentPlan {
                    base: base.clone(),
                    snr_db_list: config.snr_db.clone().unwrap_or_else(|| vec![0.0, 10.0, 20.0]),
                    bits_list: config.bits.clone().unwrap_or_else(|| vec![Resolution::Bits(1)]),
                    osr_list: config.osr.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32]),
                    num_realizations: config.realizations.unwrap_or(100),
                    blocks_per_realization: config.blocks.unwrap_or(200),
                    combiner: config.combiner,
                    modes: vec![EvalMode::Analytical, EvalMode::BoundOsrInf],
                };
                let table = run_experiment(&plan)?;
                (vec![(plan, table)], curves_fig3)
            }
            other => bail!("not a figure scenario: {other}"),
        };

    let bandwidth_hz = base.bandwidth_hz();
    let mut entries = Vec::new();
    let mut powers = Vec::new();
    for (plan, table) in &tables {
        for curve in curves_of(table) {
            let entry = write_curve(out_dir, config.format, plan, &curve)?;
            println!("wrote {} ({} rows)", out_dir.join(&entry.file).display(), entry.rows);
            if let Some(last) = curve.rows.last() {
                if last.rate_bps.is_finite() {
                    println!(
                        "  {} b={} beta={} at {} dB: {:.4e} bit/s = {:.3} bit/s/Hz",
                        last.mode,
                        last.bits,
                        last.beta,
                        last.snr_db,
                        last.rate_bps,
                        last.rate_bps / bandwidth_hz
                    );
                }
            }
            entries.push(entry);
        }
        powers.extend(adc_powers(plan));
    }

    let manifest = Manifest {
        scenario: config.scenario.clone(),
        seed: config.seed,
        format: match config.format {
            Format::Csv => "csv",
            Format::Json => "json",
        },
        bandwidth_hz,
        plan: tables[0].0.clone(),
        adc_power_w: powers,
        curves: entries,
    };
    let manifest_path = out_dir.join(format!("{}_manifest.json", config.scenario));
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn curve_name(prefix: &str, mode: EvalMode, suffix: &str) -> String {
    if suffix.is_empty() {
        format!("{prefix}_{mode}")
    } else {
        format!("{prefix}_{mode}_{suffix}")
    }
}

fn curves_fig1(table: &SweepTable) -> Vec<Curve> {
    let plan = &table.plan;
    let mut curves = Vec::new();
    for &bits in &plan.bits_list {
        for &osr in &plan.osr_list {
            for mode in [EvalMode::Analytical, EvalMode::BoundSnrInf] {
                curves.push(Curve {
                    name: curve_name("fig1", mode, &format!("b{bits}_osr{osr}")),
                    mode,
                    bits: Some(bits),
                    osr: Some(osr),
                    snr_db: None,
                    rows: select_rows(table, mode, Some(bits), Some(osr), None),
                });
            }
        }
    }
    // The unquantized reference and the total bound do not depend on the
    // resolution; emit one curve each at the first axis values.
    let bits0 = plan.bits_list[0];
    let osr0 = plan.osr_list[0];
    curves.push(Curve {
        name: curve_name("fig1", EvalMode::Unquantized, ""),
        mode: EvalMode::Unquantized,
        bits: None,
        osr: Some(osr0),
        snr_db: None,
        rows: select_rows(table, EvalMode::Unquantized, Some(bits0), Some(osr0), None),
    });
    curves.push(Curve {
        name: curve_name("fig1", EvalMode::BoundTotal, ""),
        mode: EvalMode::BoundTotal,
        bits: None,
        osr: Some(osr0),
        snr_db: None,
        rows: select_rows(table, EvalMode::BoundTotal, Some(bits0), Some(osr0), None),
    });
    curves
}

fn curves_fig2(table: &SweepTable) -> Vec<Curve> {
    let plan = &table.plan;
    let bits = plan.bits_list[0];
    let osr = plan.osr_list[0];
    vec![Curve {
        name: curve_name("fig2", EvalMode::Analytical, &format!("b{bits}_osr{osr}")),
        mode: EvalMode::Analytical,
        bits: Some(bits),
        osr: Some(osr),
        snr_db: None,
        rows: select_rows(table, EvalMode::Analytical, Some(bits), Some(osr), None),
    }]
}

fn curves_fig3(table: &SweepTable) -> Vec<Curve> {
    let plan = &table.plan;
    let bits = plan.bits_list[0];
    let mut curves = Vec::new();
    for &snr in &plan.snr_db_list {
        for mode in [EvalMode::Analytical, EvalMode::BoundOsrInf] {
            curves.push(Curve {
                name: curve_name("fig3", mode, &format!("snr{snr}")),
                mode,
                bits: Some(bits),
                osr: None,
                snr_db: Some(snr),
                rows: select_rows(table, mode, Some(bits), None, Some(snr)),
            });
        }
    }
    curves
}

/// Report of one validation run.
#[derive(Debug, Serialize)]
struct ValidationReport {
    seed_note: String,
    passed: usize,
    failed: usize,
    criteria: Vec<qmimo::validation::CriterionReport>,
}

pub fn run_validate(config: &RunConfig) -> Result<i32> {
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let reports = qmimo::validation::run_all();
    let mut lines = Vec::new();
    for report in &reports {
        let line = report.line();
        println!("{line}");
        lines.push(line);
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    let passed = reports.len() - failed;
    let summary = format!("validation: {passed} passed, {failed} failed");
    println!("{summary}");
    lines.push(summary);

    let report = ValidationReport {
        seed_note: "criteria pin their own seeds and tolerances".to_string(),
        passed,
        failed,
        criteria: reports,
    };
    std::fs::write(
        config.out_dir.join("validate_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    std::fs::write(config.out_dir.join("validate_report.txt"), lines.join("\n") + "\n")?;
    Ok(if failed == 0 { 0 } else { 1 })
}
