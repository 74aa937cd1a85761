//! Pipeline commands. Every command is a pure function of the input
//! files, the configuration and the seed; outputs carry the seed and the
//! config hash in a header comment so reruns are verifiable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use cryptorisk::backtest::{run_backtest, trace_to_csv, BacktestConfig, BacktestReport};
use cryptorisk::dist::nig::{fit_nig, nig_pdf, NigParams};
use cryptorisk::garch::{self, InnovationFamily};
use cryptorisk::marketdata::{align_panel, load_prices, log_returns, CsvFormat, PriceSeries, ReturnPanel};
use cryptorisk::optimize::{rolling_optimize, Objective, PortfolioTrack, RollingConfig};
use cryptorisk::options::{build_surface, PricerConfig};
use cryptorisk::risk::{self, RiskLevel};
use cryptorisk::rng::derive_seed;

use crate::config::{default_backtest_grid, parse_model, RunConfig};

/// Loaded market data: crypto price series, aligned panel (crypto columns
/// first, benchmark last when present) and the benchmark column index.
pub struct MarketData {
    pub series: Vec<PriceSeries>,
    pub panel: ReturnPanel,
    pub benchmark_idx: Option<usize>,
}

impl MarketData {
    /// Panel restricted to the crypto columns.
    pub fn crypto_panel(&self) -> ReturnPanel {
        match self.benchmark_idx {
            None => self.panel.clone(),
            Some(b) => {
                let keep: Vec<usize> = (0..self.panel.n_assets()).filter(|&i| i != b).collect();
                ReturnPanel {
                    assets: keep.iter().map(|&i| self.panel.assets[i].clone()).collect(),
                    dates: self.panel.dates.clone(),
                    returns: self
                        .panel
                        .returns
                        .iter()
                        .map(|row| keep.iter().map(|&i| row[i]).collect())
                        .collect(),
                }
            }
        }
    }

    pub fn benchmark_column(&self) -> Option<Vec<f64>> {
        self.benchmark_idx.map(|b| self.panel.column(b))
    }
}

pub fn load_market_data(config: &RunConfig) -> Result<MarketData> {
    let format = CsvFormat::default();
    let mut series = Vec::new();
    for a in &config.assets {
        series.push(load_prices(&a.path, &format, &a.id)?);
    }
    let benchmark = match &config.benchmark {
        Some(b) => Some(load_prices(&b.path, &format, &b.id)?),
        None => None,
    };
    let panel = align_panel(&series, benchmark.as_ref())?;
    let benchmark_idx = benchmark.as_ref().map(|_| panel.n_assets() - 1);
    if let Some(b) = benchmark {
        series.push(b);
    }
    Ok(MarketData {
        series,
        panel,
        benchmark_idx,
    })
}

fn header(config: &RunConfig) -> String {
    format!("# seed={} config_hash={}\n", config.seed, config.hash())
}

fn write_output(config: &RunConfig, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let path = config.out_dir.join(name);
    // JSON documents carry the seed and hash as fields; a comment line
    // would break parsers.
    let content = if name.ends_with(".json") {
        body.to_string()
    } else {
        format!("{}{}", header(config), body)
    };
    std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Loads and aligns the input files, exports the return panel and a
/// per-asset summary (mean/std of returns, maximum drawdown of prices).
pub fn cmd_ingest(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_market_data(config)?;

    let mut panel_csv = Vec::new();
    data.panel.to_csv(&mut panel_csv)?;
    let panel_path = write_output(config, "panel.csv", &String::from_utf8(panel_csv)?)?;

    let mut summary = String::from("stat");
    for s in &data.series {
        write!(summary, ",{}", s.asset_id)?;
    }
    summary.push('\n');
    let stats: Vec<(f64, f64, f64)> = data
        .series
        .iter()
        .map(|s| {
            let rets: Vec<f64> = log_returns(s)
                .map(|r| r.into_iter().map(|(_, v)| v).collect())
                .unwrap_or_default();
            let prices: Vec<f64> = s.observations().iter().map(|(_, p)| *p).collect();
            let mean = if rets.is_empty() { f64::NAN } else { cryptorisk::numerics::mean(&rets) };
            let sd = if rets.len() < 2 { f64::NAN } else { cryptorisk::numerics::std_dev(&rets) };
            (mean, sd, risk::mdd(&prices))
        })
        .collect();
    for (row, label) in [(0usize, "mean_return"), (1, "std_return"), (2, "mdd")] {
        summary.push_str(label);
        for (m, s, d) in &stats {
            let v = match row {
                0 => *m,
                1 => *s,
                _ => *d,
            };
            write!(summary, ",{v}")?;
        }
        summary.push('\n');
    }
    let summary_path = write_output(config, "summary.csv", &summary)?;
    Ok(vec![panel_path, summary_path])
}

/// Runs the backtest grid and writes the table-shaped report plus one
/// per-day trace per model.
pub fn cmd_backtest(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_market_data(config)?;
    let panel = data.crypto_panel();
    let labels = config
        .backtest_models
        .clone()
        .unwrap_or_else(default_backtest_grid);

    let mut outputs = Vec::new();
    let mut columns: Vec<(String, Option<BacktestReport>)> = Vec::new();
    for label in &labels {
        let spec = parse_model(label)?;
        let bt_config = BacktestConfig {
            window: config.window,
            scenarios: config.scenarios,
            level: RiskLevel::new(config.alpha)?,
            model: spec,
            weights: None,
            seed: derive_seed(config.seed, stable_label_key(label)),
            stride: config.stride,
        };
        match run_backtest(&panel, &bt_config) {
            Ok((report, trace)) => {
                let mut buf = Vec::new();
                trace_to_csv(&trace, &mut buf)?;
                outputs.push(write_output(
                    config,
                    &format!("trace_{}.csv", report.model),
                    &String::from_utf8(buf)?,
                )?);
                columns.push((label.clone(), Some(report)));
            }
            Err(e) => {
                // A failed model is marked in the report, not fatal to the grid.
                eprintln!("model {label} failed: {e}");
                columns.push((label.clone(), None));
            }
        }
    }

    let mut table = String::from("section,metric");
    for (label, _) in &columns {
        write!(table, ",{label}")?;
    }
    table.push('\n');
    let row = |table: &mut String, section: &str, metric: &str, f: &dyn Fn(&BacktestReport) -> String| {
        table.push_str(section);
        table.push(',');
        table.push_str(metric);
        for (_, rep) in &columns {
            match rep {
                Some(r) => {
                    table.push(',');
                    table.push_str(&f(r));
                }
                None => table.push_str(",failed"),
            }
        }
        table.push('\n');
    };
    for section in ["var", "cvar"] {
        let is_var = section == "var";
        row(&mut table, section, "observations", &|r| r.observations.to_string());
        row(&mut table, section, "failures", &move |r| {
            if is_var { r.failures_var } else { r.failures_cvar }.to_string()
        });
        row(&mut table, section, "expected", &move |r| {
            format!("{}", if is_var { r.expected_var } else { r.expected_cvar })
        });
        row(&mut table, section, "ratio", &move |r| {
            format!("{:.2}", if is_var { r.ratio_var } else { r.ratio_cvar })
        });
        row(&mut table, section, "missing", &|r| r.missing.to_string());
        row(&mut table, section, "traffic_light", &move |r| {
            if is_var { r.traffic_light_var } else { r.traffic_light_cvar }.to_string()
        });
        row(&mut table, section, "binomial_test", &move |r| {
            if is_var { r.binomial_var } else { r.binomial_cvar }.to_string()
        });
    }
    outputs.insert(0, write_output(config, "backtest.csv", &table)?);
    Ok(outputs)
}

/// Stable numeric key for deriving per-model seeds.
fn stable_label_key(label: &str) -> u64 {
    label.bytes().fold(1469598103934665603u64, |h, b| {
        (h ^ b as u64).wrapping_mul(1099511628211)
    })
}

fn rolling_cfg(config: &RunConfig) -> Result<RollingConfig> {
    Ok(RollingConfig {
        window: config.window,
        scenarios: config.scenarios,
        model: parse_model(&config.model)?,
        level: RiskLevel::new(config.alpha)?,
        bounds: config.bounds,
        seed: config.seed,
        stride: config.stride,
    })
}

/// Both optimal tracks on the crypto universe.
pub fn optimal_tracks(config: &RunConfig, panel: &ReturnPanel) -> Result<(PortfolioTrack, PortfolioTrack)> {
    let cfg = rolling_cfg(config)?;
    let min_var = rolling_optimize(panel, Objective::Variance, &cfg)?;
    let min_cvar = rolling_optimize(panel, Objective::Cvar, &cfg)?;
    Ok((min_var, min_cvar))
}

/// Rolling optimization of both portfolios plus the cumulative horse race.
pub fn cmd_optimize(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_market_data(config)?;
    let panel = data.crypto_panel();
    let (min_var, min_cvar) = optimal_tracks(config, &panel)?;

    let mut outputs = Vec::new();
    for (track, name) in [(&min_var, "track_min_variance.csv"), (&min_cvar, "track_min_cvar.csv")] {
        let mut buf = Vec::new();
        track.to_csv(&mut buf)?;
        outputs.push(write_output(config, name, &String::from_utf8(buf)?)?);
    }

    // Horse race: cumulative log returns of both portfolios, the equal
    // weight portfolio and the benchmark over the out-of-sample days.
    let mut race = String::from("date,min_cvar,min_variance,equal_weight");
    if data.benchmark_idx.is_some() {
        race.push_str(",benchmark");
    }
    race.push('\n');
    let bench = data.benchmark_column();
    let d = panel.n_assets() as f64;
    let mut cum_eq = 0.0;
    let mut cum_bench = 0.0;
    for (i, date) in min_var.dates.iter().enumerate() {
        let t = config.window + i;
        cum_eq += panel.returns[t].iter().sum::<f64>() / d;
        write!(
            race,
            "{date},{},{},{cum_eq}",
            min_cvar.cumulative[i], min_var.cumulative[i]
        )?;
        if let Some(b) = &bench {
            cum_bench += b[t];
            write!(race, ",{cum_bench}")?;
        }
        race.push('\n');
    }
    outputs.push(write_output(config, "horserace.csv", &race)?);
    Ok(outputs)
}



/// Equal-weight risk budgeting: in-sample table plus rolling out-of-sample
/// contributions, both for volatility and CVaR.
pub fn cmd_riskbudget(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_market_data(config)?;
    let panel = data.crypto_panel();
    let d = panel.n_assets();
    if panel.n_obs() <= config.window {
        anyhow::bail!(
            "panel has {} rows, need more than the window {}",
            panel.n_obs(),
            config.window
        );
    }
    let weights = vec![1.0 / d as f64; d];
    let level = RiskLevel::new(config.alpha)?;

    let contributions = |rows: &[Vec<f64>]| -> Result<(risk::RiskContributionReport, risk::RiskContributionReport)> {
        let cov = cov_rows(rows);
        let vol = risk::vol_risk_contributions(&weights, &cov)?;
        let cv = risk::cvar_risk_contributions(&weights, rows, level)?;
        Ok((vol, cv))
    };

    // In-sample block: the first `window` rows.
    let (vol, cv) = contributions(&panel.returns[..config.window])?;
    let mut table = String::from("method");
    for a in &panel.assets {
        write!(table, ",{a}")?;
    }
    table.push('\n');
    table.push_str(&vol.to_csv_rows("rc_vol"));
    table.push_str(&cv.to_csv_rows("rc_cvar"));
    let insample = write_output(config, "riskbudget_insample.csv", &table)?;

    // Rolling out-of-sample contributions on the trailing window.
    let mut rolling = String::from("date,measure");
    for a in &panel.assets {
        write!(rolling, ",{a}")?;
    }
    rolling.push('\n');
    for t in config.window..panel.n_obs() {
        let (vol, cv) = contributions(&panel.returns[t - config.window..t])?;
        write!(rolling, "{},vol", panel.dates[t])?;
        for v in &vol.per_asset {
            write!(rolling, ",{v:.6}")?;
        }
        rolling.push('\n');
        write!(rolling, "{},cvar", panel.dates[t])?;
        for v in &cv.per_asset {
            write!(rolling, ",{v:.6}")?;
        }
        rolling.push('\n');
    }
    let rolling_path = write_output(config, "riskbudget_rolling.csv", &rolling)?;
    Ok(vec![insample, rolling_path])
}

fn cov_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let m = cryptorisk::dist::mvt::sample_covariance(rows);
    (0..d).map(|i| (0..d).map(|j| m[(i, j)]).collect()).collect()
}

/// Risk-adjusted-return table over the out-of-sample window: MDD, Sharpe,
/// M2 and Rachev for both optimal portfolios and the benchmark.
pub fn cmd_ratios(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_market_data(config)?;
    let panel = data.crypto_panel();
    let (min_var, min_cvar) = optimal_tracks(config, &panel)?;
    let oos_dates = &panel.dates[config.window..];
    let rf = config.daily_risk_free(oos_dates)?;
    let bench: Option<Vec<f64>> = data
        .benchmark_column()
        .map(|col| col[config.window..].to_vec());
    let sigma_m = bench
        .as_ref()
        .map(|b| cryptorisk::numerics::std_dev(b))
        .unwrap_or(0.0);
    let level = RiskLevel::new(config.alpha)?;
    let ann_sharpe = if config.annualize { 252f64.sqrt() } else { 1.0 };
    let ann_rate = if config.annualize { 252.0 } else { 1.0 };

    let measure = |returns: &[f64]| -> Result<(f64, f64, f64, f64)> {
        // (mdd, sharpe, m2, rachev)
        let mut wealth = vec![1.0];
        for r in returns {
            wealth.push(wealth.last().unwrap() * r.exp());
        }
        let sharpe = risk::sharpe(returns, &rf)? * ann_sharpe;
        let m2 = sharpe * (sigma_m * ann_sharpe) + rf.mean(returns.len()) * ann_rate;
        let rachev = risk::rachev(returns, &rf, level, level)?;
        Ok((risk::mdd(&wealth), sharpe, m2, rachev))
    };

    type RatioRow = (f64, f64, f64, f64);
    let mut cols: Vec<(&str, RatioRow)> = vec![
        ("min_cvar", measure(&min_cvar.realized)?),
        ("min_variance", measure(&min_var.realized)?),
    ];
    if let Some(b) = &bench {
        cols.push(("benchmark", measure(b)?));
    }

    let mut table = String::from("measure");
    for (name, _) in &cols {
        write!(table, ",{name}")?;
    }
    table.push('\n');
    for (idx, label) in [(0usize, "mdd"), (1, "sharpe"), (2, "m2"), (3, "rachev")] {
        table.push_str(label);
        for (_, vals) in &cols {
            let v = match idx {
                0 => vals.0,
                1 => vals.1,
                2 => vals.2,
                _ => vals.3,
            };
            write!(table, ",{v:.4}")?;
        }
        table.push('\n');
    }
    Ok(vec![write_output(config, "ratios.csv", &table)?])
}

/// Kolmogorov-Smirnov distance between a sample and a fitted NIG,
/// via piecewise Simpson integration of the density.
fn nig_ks_statistic(sample: &[f64], p: &NigParams) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let span = xs[xs.len() - 1] - xs[0];
    let mut prev_x = xs[0] - 12.0 * span.max(1.0);
    let mut cdf = 0.0;
    let mut ks = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        // Simpson over [prev_x, x] in a few panels.
        let panels = 16;
        let h = (x - prev_x) / panels as f64;
        let mut acc = 0.0;
        for k in 0..panels {
            let a = prev_x + k as f64 * h;
            acc += h / 6.0
                * (nig_pdf(p, a) + 4.0 * nig_pdf(p, a + 0.5 * h) + nig_pdf(p, a + h));
        }
        cdf += acc;
        let ecdf_hi = (i + 1) as f64 / n;
        let ecdf_lo = i as f64 / n;
        ks = ks.max((cdf - ecdf_hi).abs()).max((cdf - ecdf_lo).abs());
        prev_x = x;
    }
    ks
}

/// The parameter document the price command reads and writes: the garch
/// and nig blocks follow those modules' JSON schemas.
#[derive(serde::Deserialize)]
struct PricerParamsDoc {
    garch: garch::GarchParams,
    nig: NigParams,
    #[serde(default)]
    initial_variance: Option<f64>,
}

/// Prices the option surfaces. By default fits ARMA-GARCH on each optimal
/// portfolio's realized returns and NIG on the filtered innovations; with
/// `pricer_params` configured, prices pre-fitted parameter documents
/// instead.
pub fn cmd_price(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut outputs = Vec::new();

    if let Some(specs) = &config.pricer_params {
        for (i, spec) in specs.iter().enumerate() {
            let text = std::fs::read_to_string(&spec.path)
                .with_context(|| format!("reading {}", spec.path.display()))?;
            let doc: PricerParamsDoc = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", spec.path.display()))?;
            price_surface(
                config,
                &mut outputs,
                &spec.label,
                200 + i as u64,
                &doc.garch,
                &doc.nig,
                doc.initial_variance,
                serde_json::json!({}),
            )?;
        }
        return Ok(outputs);
    }

    let data = load_market_data(config)?;
    let panel = data.crypto_panel();
    let (min_var, min_cvar) = optimal_tracks(config, &panel)?;
    for (track, label, seed_key) in [
        (&min_var, "min_variance", 101u64),
        (&min_cvar, "min_cvar", 102u64),
    ] {
        let fit = garch::fit_arma_garch_with_floor(&track.realized, InnovationFamily::Gaussian, 50)?;
        let nig = fit_nig(&fit.state.innovations)?;
        let ks = nig_ks_statistic(&fit.state.innovations, &nig);
        let forecast = garch::forecast_one_step(&fit.state);
        price_surface(
            config,
            &mut outputs,
            label,
            seed_key,
            &fit.state.params,
            &nig,
            Some(forecast.sigma_next * forecast.sigma_next),
            serde_json::json!({
                "nig_ks_statistic": ks,
                "warnings": fit.warnings,
            }),
        )?;
    }
    Ok(outputs)
}

#[allow(clippy::too_many_arguments)]
fn price_surface(
    config: &RunConfig,
    outputs: &mut Vec<PathBuf>,
    label: &str,
    seed_key: u64,
    garch_params: &garch::GarchParams,
    nig: &NigParams,
    initial_variance: Option<f64>,
    extra: serde_json::Value,
) -> Result<()> {
    let rate = config.pricing_rate_annual_pct / 252.0 / 100.0;
    let strikes: Vec<f64> = config.strike_grid.iter().map(|k| k * 100.0).collect();
    let pricer = PricerConfig {
        maturity_days: *config.maturities.iter().max().unwrap_or(&126),
        rate,
        n_paths: config.n_paths,
        initial_capital: 100.0,
        seed: derive_seed(config.seed, seed_key),
        tilt_scale: config.tilt_scale,
        initial_variance,
    };
    let surface = build_surface(garch_params, nig, &strikes, &config.maturities, &pricer)?;
    let mut buf = Vec::new();
    surface.to_csv(&mut buf)?;
    outputs.push(write_output(
        config,
        &format!("surface_{label}.csv"),
        &String::from_utf8(buf)?,
    )?);

    let mut params_doc = serde_json::json!({
        "portfolio": label,
        "garch": garch_params,
        "nig": nig,
        "initial_variance": initial_variance,
        "rate_daily": rate,
        "seed": config.seed,
        "config_hash": config.hash(),
    });
    if let serde_json::Value::Object(extra) = extra {
        params_doc.as_object_mut().unwrap().extend(extra);
    }
    outputs.push(write_output(
        config,
        &format!("pricer_params_{label}.json"),
        &format!("{}\n", serde_json::to_string_pretty(&params_doc)?),
    )?);
    Ok(())
}

/// Dispatch by command name; returns the written files.
pub fn run_command(name: &str, config: &RunConfig) -> Result<Vec<PathBuf>> {
    match name {
        "ingest" => cmd_ingest(config),
        "backtest" => cmd_backtest(config),
        "optimize" => cmd_optimize(config),
        "riskbudget" => cmd_riskbudget(config),
        "ratios" => cmd_ratios(config),
        "price" => cmd_price(config),
        other => anyhow::bail!("unknown command {other}"),
    }
}

/// Reads back an output file skipping the header comment line.
pub fn read_output_body(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n"))
}
