//! Scenario configuration shared by the simulator, the analysis routines,
//! and the CLI. Field names carry explicit units (Hz, dB, W, s).

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// ADC resolution: a finite bit width, or the analytically unquantized
/// reference (gamma = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resolution {
    Bits(u32),
    Unquantized,
}

impl Resolution {
    pub fn is_unquantized(&self) -> bool {
        matches!(self, Resolution::Unquantized)
    }

    pub fn bits(&self) -> Option<u32> {
        match self {
            Resolution::Bits(b) => Some(*b),
            Resolution::Unquantized => None,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(b) => write!(f, "{b}"),
            Resolution::Unquantized => write!(f, "inf"),
        }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "INF" | "unquantized" => Ok(Resolution::Unquantized),
            other => other
                .parse::<u32>()
                .map(Resolution::Bits)
                .map_err(|_| Error::InvalidConfig(format!("bad resolution: {other:?}"))),
        }
    }
}

impl Serialize for Resolution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Resolution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Linear combiner selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerMethod {
    Mrc,
    Zf,
}

impl fmt::Display for CombinerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CombinerMethod::Mrc => write!(f, "mrc"),
            CombinerMethod::Zf => write!(f, "zf"),
        }
    }
}

impl FromStr for CombinerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mrc" => Ok(CombinerMethod::Mrc),
            "zf" => Ok(CombinerMethod::Zf),
            other => Err(Error::InvalidConfig(format!("unknown combiner: {other:?}"))),
        }
    }
}

/// All scenario parameters for one evaluation point.
///
/// The transmit power is fixed at 1; the AWGN power is derived from the SNR
/// (`sigma_n^2 = 10^(-snr_db/10)`), so only the ratio rho = p / sigma_n^2
/// is meaningful, matching the rate formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Base-station antennas M.
    pub num_antennas: usize,
    /// Single-antenna users U.
    pub num_users: usize,
    /// Data-bearing subcarriers K.
    pub active_subcarriers: usize,
    /// Oversampling ratio beta; total subcarriers N_c = beta * K.
    pub osr: usize,
    pub subcarrier_spacing_hz: f64,
    /// ADC resolution; "inf" selects the unquantized reference.
    pub resolution: Resolution,
    pub snr_db: f64,
    /// Multipath components per user L.
    pub num_paths: usize,
    /// Maximum Nyquist-rate delay taps D0; defaults to K / 4.
    #[serde(default)]
    pub max_nyquist_taps: Option<usize>,
    pub pulse_rolloff: f64,
    pub carrier_frequency_hz: f64,
    /// ADC power-model constant kappa in W per (Hz * 2^bits).
    pub adc_kappa_w: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_antennas: 64,
            num_users: 4,
            active_subcarriers: 128,
            osr: 1,
            subcarrier_spacing_hz: 10.0e6,
            resolution: Resolution::Bits(1),
            snr_db: 10.0,
            num_paths: 3,
            max_nyquist_taps: None,
            pulse_rolloff: 0.5,
            carrier_frequency_hz: 140.0e9,
            adc_kappa_w: 1.0e-12,
            seed: 42,
        }
    }
}

impl SystemConfig {
    /// Linear SNR rho = p / sigma_n^2.
    pub fn rho(&self) -> f64 {
        10.0f64.powf(self.snr_db / 10.0)
    }

    /// Average transmit power p (fixed reference).
    pub fn transmit_power(&self) -> f64 {
        1.0
    }

    /// Per-sample complex AWGN power sigma_n^2.
    pub fn noise_power(&self) -> f64 {
        self.transmit_power() / self.rho()
    }

    pub fn total_subcarriers(&self) -> usize {
        self.osr * self.active_subcarriers
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.active_subcarriers as f64 * self.subcarrier_spacing_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.total_subcarriers() as f64 * self.subcarrier_spacing_hz
    }

    /// D0, defaulting to K / 4.
    pub fn nyquist_taps(&self) -> usize {
        self.max_nyquist_taps.unwrap_or((self.active_subcarriers / 4).max(1))
    }

    pub fn channel_params(&self) -> Result<ChannelParams> {
        ChannelParams::new(
            self.num_antennas,
            self.num_users,
            self.num_paths,
            self.nyquist_taps(),
            self.osr,
            self.active_subcarriers,
            self.subcarrier_spacing_hz,
            self.carrier_frequency_hz,
            self.pulse_rolloff,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.channel_params().map(|_| ())?;
        if let Resolution::Bits(b) = self.resolution {
            if !(1..=crate::quantizer::MAX_BITS).contains(&b) {
                return Err(Error::InvalidConfig(format!("resolution {b} out of range")));
            }
        }
        if self.adc_kappa_w <= 0.0 {
            return Err(Error::InvalidConfig("adc_kappa_w must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_string_round_trip() {
        for r in [Resolution::Bits(1), Resolution::Bits(12), Resolution::Unquantized] {
            let s = r.to_string();
            assert_eq!(s.parse::<Resolution>().unwrap(), r);
        }
        assert!("abc".parse::<Resolution>().is_err());
    }

    #[test]
    fn default_config_is_valid_at_full_scale() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.total_subcarriers(), 128);
        assert_eq!(cfg.nyquist_taps(), 32);
        assert!((cfg.rho() - 10.0).abs() < 1e-12);
        assert!((cfg.noise_power() - 0.1).abs() < 1e-12);
        assert!((cfg.bandwidth_hz() - 1.28e9).abs() < 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let toml = r#"
            num_antennas = 8
            num_users = 2
            active_subcarriers = 32
            osr = 1
            subcarrier_spacing_hz = 1.0e7
            resolution = "3"
            snr_db = 0.0
            num_paths = 3
            pulse_rolloff = 0.5
            carrier_frequency_hz = 1.4e11
            adc_kappa_w = 1.0e-12
            seed = 1
            bogus_key = 5
        "#;
        let parsed: std::result::Result<SystemConfig, _> = toml::from_str(toml);
        assert!(parsed.is_err());
    }
}
