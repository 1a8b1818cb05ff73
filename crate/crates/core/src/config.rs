//! Scenario configuration, validation and the `key = value` file format.
//!
//! Times are carried in microseconds, sizes in bits and rates in bits/s.
//! Conversion to frame durations happens once, in
//! [`frame_durations`](crate::airtime::frame_durations).

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{CoexError, Result};
use crate::scalar::Scalar;

/// Bounds applied to arrival probabilities before they enter closed forms
/// that divide by `q` or `1 - q`. The exact endpoints `0` and `1` are routed
/// to dedicated limit branches instead.
pub const Q_CLAMP: f64 = 1e-9;

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize)]
#[serde(transparent)]
pub struct Probability<T>(T);

impl<T: Scalar> Probability<T> {
    pub fn new(value: T) -> Result<Self> {
        if value.is_finite() && value >= T::zero() && value <= T::one() {
            Ok(Probability(value))
        } else {
            Err(CoexError::invalid(
                "probability",
                format!("{value} is outside [0, 1]"),
            ))
        }
    }

    /// Clamps into `[0, 1]`; intended for values that are probabilities up
    /// to rounding error.
    pub fn saturating(value: T) -> Self {
        Probability(value.max(T::zero()).min(T::one()))
    }

    pub fn zero() -> Self {
        Probability(T::zero())
    }

    pub fn one() -> Self {
        Probability(T::one())
    }

    pub fn get(self) -> T {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(T::one() - self.0)
    }

    /// The value pulled into `[Q_CLAMP, 1 - Q_CLAMP]`.
    pub fn clamped_open(self) -> T {
        let eps = T::lit(Q_CLAMP);
        self.0.max(eps).min(T::one() - eps)
    }
}

/// Full coexistence scenario: `n_W` Wi-Fi APs and `n_C` cellular LBT base
/// stations on one channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoexConfig<T> {
    /// Number of Wi-Fi APs (`n_W`).
    pub n_wifi: usize,
    /// Number of cellular SCBSs (`n_C`).
    pub n_cell: usize,
    /// Per-transition packet availability of a Wi-Fi AP (`q_W`).
    pub q_wifi: T,
    /// Per-transition packet availability of an SCBS (`q_C`).
    pub q_cell: T,
    /// Minimum Wi-Fi contention window (`W0`).
    pub w0: usize,
    /// Maximum Wi-Fi backoff stage (`m`).
    pub max_stage: usize,
    /// Cellular contention window (`Z`).
    pub cw_cell: usize,
    /// Wi-Fi PHY rate, bits/s.
    pub rate_wifi: T,
    /// Cellular PHY rate, bits/s.
    pub rate_cell: T,
    /// Wi-Fi payload, bits.
    pub payload_wifi: T,
    /// Cellular payload, bits.
    pub payload_cell: T,
    pub phy_header_bits: T,
    pub mac_header_bits: T,
    pub ack_bits: T,
    pub sigma_us: T,
    pub sifs_us: T,
    pub difs_us: T,
    pub prop_delay_us: T,
}

impl<T: Scalar> Default for CoexConfig<T> {
    /// 802.11ac-style timing with two APs and one SCBS at equal rates.
    fn default() -> Self {
        CoexConfig {
            n_wifi: 2,
            n_cell: 1,
            q_wifi: T::lit(0.5),
            q_cell: T::lit(0.5),
            w0: 16,
            max_stage: 3,
            cw_cell: 16,
            rate_wifi: T::lit(1e8),
            rate_cell: T::lit(1e8),
            payload_wifi: T::lit(12000.0),
            payload_cell: T::lit(12000.0),
            phy_header_bits: T::lit(128.0),
            mac_header_bits: T::lit(272.0),
            ack_bits: T::lit(112.0),
            sigma_us: T::lit(9.0),
            sifs_us: T::lit(16.0),
            difs_us: T::lit(34.0),
            prop_delay_us: T::lit(0.1),
        }
    }
}

/// Config-file keys, in the order they are written.
pub const CONFIG_KEYS: [&str; 18] = [
    "n_W",
    "n_C",
    "q_W",
    "q_C",
    "W0",
    "m",
    "Z",
    "R_W",
    "R_C",
    "D_W",
    "D_C",
    "phy_header_bits",
    "mac_header_bits",
    "ack_bits",
    "sigma_us",
    "sifs_us",
    "difs_us",
    "prop_delay_us",
];

fn canonical_key(key: &str) -> Option<&'static str> {
    let wanted = key.trim().replace('-', "_");
    CONFIG_KEYS
        .iter()
        .copied()
        .find(|k| k.eq_ignore_ascii_case(&wanted))
}

fn parse_count(key: &str, value: &str) -> std::result::Result<usize, String> {
    let v = value.trim();
    if let Ok(n) = v.parse::<usize>() {
        return Ok(n);
    }
    // accept integral reals such as "16.0" or "1e1"
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64 => {
            Ok(x as usize)
        }
        _ => Err(format!("{key} expects a non-negative integer, got `{v}`")),
    }
}

fn parse_real<T: Scalar>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| format!("{key} expects a number, got `{}`", value.trim()))
}

impl<T: Scalar> CoexConfig<T> {
    /// Checks every field invariant and returns the config unchanged.
    pub fn validate(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }

    /// Borrowing form of [`validate`](Self::validate).
    pub fn check(&self) -> Result<()> {
        let prob = |field: &'static str, v: T| {
            if v.is_finite() && v >= T::zero() && v <= T::one() {
                Ok(())
            } else {
                Err(CoexError::invalid(field, format!("{v} is outside [0, 1]")))
            }
        };
        prob("q_W", self.q_wifi)?;
        prob("q_C", self.q_cell)?;
        if self.cw_cell < 2 {
            return Err(CoexError::invalid(
                "Z",
                format!(
                    "{} is below 2; the cellular closed forms divide by beta(Z-1)",
                    self.cw_cell
                ),
            ));
        }
        if self.w0 < 2 {
            return Err(CoexError::invalid("W0", format!("{} is below 2", self.w0)));
        }
        if self.max_stage > 30 {
            return Err(CoexError::invalid(
                "m",
                format!("{} backoff stages overflow the window size", self.max_stage),
            ));
        }
        if self.n_wifi + self.n_cell == 0 {
            return Err(CoexError::invalid("n_W", "n_W + n_C must be at least 1"));
        }
        let positive = [
            ("R_W", self.rate_wifi),
            ("R_C", self.rate_cell),
            ("D_W", self.payload_wifi),
            ("D_C", self.payload_cell),
            ("phy_header_bits", self.phy_header_bits),
            ("mac_header_bits", self.mac_header_bits),
            ("ack_bits", self.ack_bits),
            ("sigma_us", self.sigma_us),
            ("sifs_us", self.sifs_us),
            ("difs_us", self.difs_us),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(CoexError::invalid(field, format!("{v} must be positive")));
            }
        }
        if !(self.prop_delay_us.is_finite() && self.prop_delay_us >= T::zero()) {
            return Err(CoexError::invalid(
                "prop_delay_us",
                format!("{} must be non-negative", self.prop_delay_us),
            ));
        }
        Ok(())
    }

    /// Sets one field by its config-file key. Keys match case-insensitively
    /// and `-` is accepted for `_`, so `q-c` addresses `q_C`.
    pub fn set_field(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let key = canonical_key(key).ok_or_else(|| format!("unknown key `{}`", key.trim()))?;
        match key {
            "n_W" => self.n_wifi = parse_count(key, value)?,
            "n_C" => self.n_cell = parse_count(key, value)?,
            "W0" => self.w0 = parse_count(key, value)?,
            "m" => self.max_stage = parse_count(key, value)?,
            "Z" => self.cw_cell = parse_count(key, value)?,
            "q_W" => self.q_wifi = parse_real(key, value)?,
            "q_C" => self.q_cell = parse_real(key, value)?,
            "R_W" => self.rate_wifi = parse_real(key, value)?,
            "R_C" => self.rate_cell = parse_real(key, value)?,
            "D_W" => self.payload_wifi = parse_real(key, value)?,
            "D_C" => self.payload_cell = parse_real(key, value)?,
            "phy_header_bits" => self.phy_header_bits = parse_real(key, value)?,
            "mac_header_bits" => self.mac_header_bits = parse_real(key, value)?,
            "ack_bits" => self.ack_bits = parse_real(key, value)?,
            "sigma_us" => self.sigma_us = parse_real(key, value)?,
            "sifs_us" => self.sifs_us = parse_real(key, value)?,
            "difs_us" => self.difs_us = parse_real(key, value)?,
            "prop_delay_us" => self.prop_delay_us = parse_real(key, value)?,
            _ => unreachable!("canonical_key only yields known keys"),
        }
        Ok(())
    }

    /// Value of one field formatted for the config file.
    pub fn field_string(&self, key: &str) -> Option<String> {
        let s = match canonical_key(key)? {
            "n_W" => self.n_wifi.to_string(),
            "n_C" => self.n_cell.to_string(),
            "W0" => self.w0.to_string(),
            "m" => self.max_stage.to_string(),
            "Z" => self.cw_cell.to_string(),
            "q_W" => self.q_wifi.to_string(),
            "q_C" => self.q_cell.to_string(),
            "R_W" => self.rate_wifi.to_string(),
            "R_C" => self.rate_cell.to_string(),
            "D_W" => self.payload_wifi.to_string(),
            "D_C" => self.payload_cell.to_string(),
            "phy_header_bits" => self.phy_header_bits.to_string(),
            "mac_header_bits" => self.mac_header_bits.to_string(),
            "ack_bits" => self.ack_bits.to_string(),
            "sigma_us" => self.sigma_us.to_string(),
            "sifs_us" => self.sifs_us.to_string(),
            "difs_us" => self.difs_us.to_string(),
            "prop_delay_us" => self.prop_delay_us.to_string(),
            _ => unreachable!(),
        };
        Some(s)
    }

    /// Parses the flat `key = value` format on top of the defaults.
    ///
    /// `#` starts a comment. The result is validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CoexError::Parse {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set_field(key, value)
                .map_err(|message| CoexError::Parse {
                    line: idx + 1,
                    message,
                })?;
        }
        cfg.validate()
    }

    /// Writes every field in the config-file format.
    pub fn to_config_string(&self) -> String {
        let mut out = String::from("# lbt-coex scenario\n");
        for key in CONFIG_KEYS {
            let value = self.field_string(key).expect("known key");
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Copy with a different cellular contention window.
    pub fn with_cw(&self, z: usize) -> Self {
        CoexConfig {
            cw_cell: z,
            ..self.clone()
        }
    }
}
