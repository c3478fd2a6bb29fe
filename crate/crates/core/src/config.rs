//! Plain-text `key = value` configuration files.
//!
//! Files are parsed as flat TOML documents whose keys mirror the field names
//! of [`GlobalParams`]. The short symbolic names (`b`, `l`, `zeta`, ...) are
//! accepted as aliases. Comments start with `#`.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::GlobalParams;

pub fn parse_table(text: &str) -> Result<toml::Table> {
    Ok(text.parse::<toml::Table>()?)
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))
}

impl<T: Scalar + DeserializeOwned> GlobalParams<T> {
    /// Builds parameters from a parsed table; missing keys keep their defaults.
    pub fn from_table(table: toml::Table) -> Result<Self> {
        let params: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config_str(&read_text(path)?)
    }
}

impl<T: Scalar> GlobalParams<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: T| {
            if v >= T::zero() && v <= T::one() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        unit("fee_rate", self.fee_rate)?;
        unit("rebate_rate", self.rebate_rate)?;
        unit("operator_transfer_rate", self.operator_transfer_rate)?;
        unit("learning_rate", self.learning_rate)?;
        unit("discount", self.discount)?;
        unit("damping", self.damping)?;
        unit("exploration_start", self.exploration_start)?;
        unit("exploration_min", self.exploration_min)?;
        unit("exploration_decay", self.exploration_decay)?;
        unit("irl_discount", self.irl_discount)?;
        unit("irl_trace_discount", self.irl_trace_discount)?;
        if self.exploration_min > self.exploration_start {
            return Err(Error::Config(
                "exploration_min exceeds exploration_start".into(),
            ));
        }
        if self.price_floor <= T::lit(10.0) {
            return Err(Error::Config("price_floor must exceed 10".into()));
        }
        if self.half_life <= T::zero() {
            return Err(Error::Config("half_life must be positive".into()));
        }
        if self.reference_price <= T::zero() {
            return Err(Error::Config("reference_price must be positive".into()));
        }
        if self.state_buckets == 0 || self.recent_window == 0 {
            return Err(Error::Config(
                "state_buckets and recent_window must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Utility coefficients on the quality, reputation and price constructs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    #[serde(alias = "l")]
    pub utility_quality: f64,
    #[serde(alias = "o")]
    pub utility_reputation: f64,
    #[serde(alias = "u")]
    pub utility_price: f64,
}

impl UtilityWeights {
    pub fn apply<T: Scalar>(&self, params: &mut GlobalParams<T>) {
        params.utility_quality = T::lit(self.utility_quality);
        params.utility_reputation = T::lit(self.utility_reputation);
        params.utility_price = T::lit(self.utility_price);
    }

    /// Reads a weights file. Unrelated keys in the file are ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config_str(&read_text(path)?)
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Renders the `name = value` file, with optional extra lines prepended
    /// as comments.
    pub fn to_config_string(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "utility_quality = {}", self.utility_quality);
        let _ = writeln!(out, "utility_reputation = {}", self.utility_reputation);
        let _ = writeln!(out, "utility_price = {}", self.utility_price);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let p = GlobalParams::<f64>::from_config_str("n_providers = 50\nzeta = 0.9\n").unwrap();
        assert_eq!(p.n_providers, 50);
        assert_eq!(p.damping, 0.9);
        assert_eq!(p.n_buyers, 2000);
    }

    #[test]
    fn symbol_aliases() {
        let p = GlobalParams::<f64>::from_config_str("b = 30.0\nl = 0.2\nalpha = 0.3").unwrap();
        assert_eq!(p.cost_scale, 30.0);
        assert_eq!(p.utility_quality, 0.2);
        assert_eq!(p.learning_rate, 0.3);
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let err = GlobalParams::<f64>::from_config_str("n_provider = 5").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn out_of_range_rate_rejected() {
        assert!(GlobalParams::<f64>::from_config_str("fee_rate = 1.5").is_err());
        assert!(GlobalParams::<f64>::from_config_str("price_floor = 9.0").is_err());
    }

    #[test]
    fn weights_file_round_trip() {
        let w = UtilityWeights {
            utility_quality: 0.3157,
            utility_reputation: 0.6824,
            utility_price: 0.4548,
        };
        let text = w.to_config_string(&["fitted".to_string()]);
        assert_eq!(UtilityWeights::from_config_str(&text).unwrap(), w);
        let short = UtilityWeights::from_config_str("l = 0.1\no = 0.2\nu = 0.3\nextra = 1").unwrap();
        let mut p = GlobalParams::<f64>::default();
        short.apply(&mut p);
        assert_eq!((p.utility_quality, p.utility_reputation, p.utility_price), (0.1, 0.2, 0.3));
    }
}
