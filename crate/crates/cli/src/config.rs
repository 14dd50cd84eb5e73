use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tailhazard::ingest::SeriesFormat;
use tailhazard::BacktestConfig;

/// How the input file is interpreted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Price,
    #[default]
    Return,
    /// `index,tau,y` event CSV; embedded in a zero return series.
    Events,
}

impl InputFormat {
    pub fn series_format(self) -> Option<SeriesFormat> {
        match self {
            InputFormat::Price => Some(SeriesFormat::Price),
            InputFormat::Return => Some(SeriesFormat::Return),
            InputFormat::Events => None,
        }
    }
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "price" => Ok(InputFormat::Price),
            "return" => Ok(InputFormat::Return),
            "events" => Ok(InputFormat::Events),
            other => Err(format!("unknown input format `{other}` (expected price|return|events)")),
        }
    }
}

/// Everything a backtest run needs; read from `--config` and then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    pub output_dir: PathBuf,
    pub verbosity: u8,
    pub backtest: BacktestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: InputFormat::default(),
            output_dir: PathBuf::from("."),
            verbosity: 0,
            backtest: BacktestConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tailhazard::backtest::CopulaChoice;
    use tailhazard::events::Side;

    #[test]
    fn round_trips_losslessly() {
        let mut cfg = RunConfig { input: Some("data/r.csv".into()), format: InputFormat::Price, ..Default::default() };
        cfg.backtest.split = 0.1 + 0.2;
        cfg.backtest.copula_choice = CopulaChoice::Amh;
        cfg.backtest.quantiles.push(tailhazard::ExtremeSpec::new(0.1, Side::Negative).unwrap());
        cfg.backtest.qp_grid = Some(vec![0.0, 1.0 / 3.0, 1.0]);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"backtest": {"refit_every": 3}}"#).unwrap();
        assert_eq!(cfg.backtest.refit_every, 3);
        assert_eq!(cfg.output_dir, PathBuf::from("."));
        assert!(serde_json::from_str::<RunConfig>(r#"{"inptu": "x"}"#).is_err());
    }
}
