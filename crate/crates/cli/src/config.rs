//! Run configuration: JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cryptorisk::dist::JointModelSpec;
use cryptorisk::optimize::WeightBounds;
use cryptorisk::options::TiltScale;

/// One input price file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub id: String,
    pub path: PathBuf,
}

/// Risk-free input: a flat annual-percent yield or a `date,rate` CSV of
/// annual-percent yields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RiskFreeSpec {
    AnnualPercent(f64),
    Series { path: PathBuf },
}

impl Default for RiskFreeSpec {
    fn default() -> Self {
        RiskFreeSpec::AnnualPercent(0.0)
    }
}

/// Full pipeline configuration. Defaults mirror the study design:
/// alpha 0.01, 252-day window, 10,000 scenarios, multivariate t with
/// five degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub assets: Vec<AssetSpec>,
    #[serde(default)]
    pub benchmark: Option<AssetSpec>,
    #[serde(default)]
    pub risk_free: RiskFreeSpec,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_scenarios")]
    pub scenarios: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_model")]
    pub model: String,
    /// Model grid for the backtest command; `None` runs the full
    /// seven-model grid.
    #[serde(default)]
    pub backtest_models: Option<Vec<String>>,
    #[serde(default = "default_bounds")]
    pub bounds: WeightBounds,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Option maturities in trading days.
    #[serde(default = "default_maturities")]
    pub maturities: Vec<usize>,
    /// Strikes relative to the initial capital of 100.
    #[serde(default = "default_strike_grid")]
    pub strike_grid: Vec<f64>,
    /// Annual-percent rate used by the option pricer (6-month tenor).
    #[serde(default = "default_pricing_rate")]
    pub pricing_rate_annual_pct: f64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_tilt_scale")]
    pub tilt_scale: TiltScale,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Annualize the Sharpe and M2 rows of the ratio report.
    #[serde(default)]
    pub annualize: bool,
    /// Pre-fitted pricer inputs: JSON documents with `garch` and `nig`
    /// parameter blocks (the shape `price` itself emits). When set, the
    /// price command skips the portfolio pipeline and prices these.
    #[serde(default)]
    pub pricer_params: Option<Vec<PricerParamsSpec>>,
}

/// A labeled pre-fitted parameter document for the pricer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricerParamsSpec {
    pub label: String,
    pub path: PathBuf,
}

fn default_window() -> usize {
    252
}
fn default_alpha() -> f64 {
    0.01
}
fn default_scenarios() -> usize {
    10_000
}
fn default_seed() -> u64 {
    42
}
fn default_model() -> String {
    "mvt5".into()
}
fn default_bounds() -> WeightBounds {
    WeightBounds::default()
}
fn default_stride() -> usize {
    1
}
fn default_maturities() -> Vec<usize> {
    vec![21, 63, 126]
}
fn default_strike_grid() -> Vec<f64> {
    vec![0.7, 0.85, 1.0, 1.15, 1.3]
}
fn default_pricing_rate() -> f64 {
    2.0
}
fn default_n_paths() -> usize {
    10_000
}
fn default_tilt_scale() -> TiltScale {
    TiltScale::SqrtSigma
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.assets.is_empty() {
            bail!("config needs at least one asset");
        }
        for a in self.assets.iter().chain(&self.benchmark) {
            if !a.path.exists() {
                bail!("input file {} does not exist", a.path.display());
            }
        }
        if let RiskFreeSpec::Series { path } = &self.risk_free {
            if !path.exists() {
                bail!("risk-free file {} does not exist", path.display());
            }
        }
        if let Some(specs) = &self.pricer_params {
            for spec in specs {
                if !spec.path.exists() {
                    bail!("pricer params file {} does not exist", spec.path.display());
                }
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0,1), got {}", self.alpha);
        }
        parse_model(&self.model)?;
        if let Some(models) = &self.backtest_models {
            for m in models {
                parse_model(m)?;
            }
        }
        Ok(())
    }

    /// Stable short hash of the full configuration; changes iff any
    /// field changes.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex_prefix(&digest, 16)
    }

    /// Daily simple risk-free rate(s): annual percent / 252 / 100.
    pub fn daily_risk_free(&self, dates: &[chrono::NaiveDate]) -> Result<cryptorisk::risk::RiskFree> {
        match &self.risk_free {
            RiskFreeSpec::AnnualPercent(p) => {
                Ok(cryptorisk::risk::RiskFree::Scalar(p / 252.0 / 100.0))
            }
            RiskFreeSpec::Series { path } => {
                let mut reader = csv::ReaderBuilder::new()
                    .from_path(path)
                    .with_context(|| format!("reading risk-free file {}", path.display()))?;
                let mut by_date = std::collections::BTreeMap::new();
                for record in reader.records() {
                    let r = record?;
                    let date = chrono::NaiveDate::parse_from_str(
                        r.get(0).unwrap_or_default(),
                        "%Y-%m-%d",
                    )?;
                    let rate: f64 = r.get(1).unwrap_or_default().trim().parse()?;
                    by_date.insert(date, rate);
                }
                // Yields are levels: forward-fill onto the 7-day calendar.
                let mut series = Vec::with_capacity(dates.len());
                for d in dates {
                    let y = by_date
                        .range(..=d)
                        .next_back()
                        .map(|(_, &v)| v)
                        .ok_or_else(|| {
                            anyhow::anyhow!("no risk-free quote at or before {d}")
                        })?;
                    series.push(y / 252.0 / 100.0);
                }
                Ok(cryptorisk::risk::RiskFree::Series(series))
            }
        }
    }
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

/// Parses a model label: mvt5 / mvt6 / mvt7, mvg, tcopula0 / tcopula0.8 /
/// tcopula1.0, indep_gaussian, indep_student_t.
pub fn parse_model(name: &str) -> Result<JointModelSpec> {
    let name = name.trim();
    if let Some(rest) = name.strip_prefix("mvt") {
        let nu: f64 = rest.parse().with_context(|| format!("bad mvt label `{name}`"))?;
        if nu <= 4.0 {
            bail!("mvt degrees of freedom must exceed 4, got {nu}");
        }
        return Ok(JointModelSpec::Mvt { nu });
    }
    if let Some(rest) = name.strip_prefix("tcopula") {
        let bandwidth: f64 = rest
            .parse()
            .with_context(|| format!("bad tcopula label `{name}`"))?;
        if bandwidth < 0.0 {
            bail!("tcopula bandwidth must be >= 0, got {bandwidth}");
        }
        return Ok(JointModelSpec::TCopula { bandwidth, nu: 5.0 });
    }
    match name {
        "mvg" => Ok(JointModelSpec::Mvg),
        "indep_gaussian" => Ok(JointModelSpec::IndepGaussian),
        "indep_student_t" => Ok(JointModelSpec::IndepStudentT),
        _ => bail!("unknown model `{name}`"),
    }
}

/// The published seven-model backtest grid.
pub fn default_backtest_grid() -> Vec<String> {
    vec![
        "mvt5".into(),
        "mvt6".into(),
        "mvt7".into(),
        "mvg".into(),
        "tcopula0".into(),
        "tcopula0.8".into(),
        "tcopula1".into(),
    ]
}
