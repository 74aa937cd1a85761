//! Regenerates the bundled sample data set under data/sample/.
//!
//! Seven synthetic crypto assets on a 7-day calendar plus a weekday
//! benchmark and a weekday treasury-yield series, all driven by GARCH
//! dynamics with multivariate-t(5) joint innovations. Fully seeded, so
//! rerunning reproduces the committed files byte for byte.
//!
//! Run with: cargo run -p cryptorisk-cli --example gen_sample_data

use chrono::{Datelike, NaiveDate, Weekday};
use cryptorisk::dist::{sample_mvt, MvtParams};
use cryptorisk::garch::{GarchParams, InnovationFamily};

const SEED: u64 = 20190702;
const DAYS: usize = 707; // returns; prices have one more row

fn main() -> std::io::Result<()> {
    let assets = ["BTC", "ETH", "XRP", "LTC", "BCH", "EOS", "BNB"];
    let d = assets.len();

    // Equicorrelated joint innovations with t(5) tails, unit variance.
    let rho = 0.55;
    let sigma: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 0.6 } else { 0.6 * rho }).collect())
        .collect();
    let mvt = MvtParams {
        nu: 5.0,
        mu: vec![0.0; d],
        sigma,
    };
    let eps = sample_mvt(&mvt, DAYS + 300, SEED);

    // Per-asset GARCH parameter sets with crypto-scale daily volatility.
    let vols = [0.038, 0.050, 0.056, 0.052, 0.064, 0.066, 0.060];
    let drifts = [0.0009, 0.0005, 0.0001, 0.0003, -0.0002, 0.0002, 0.0012];
    let start = NaiveDate::from_ymd_opt(2017, 7, 25).unwrap();

    std::fs::create_dir_all("data/sample")?;
    for (j, asset) in assets.iter().enumerate() {
        let uncond = vols[j] * vols[j];
        let params = GarchParams {
            phi0: drifts[j],
            phi1: 0.05,
            theta1: -0.02,
            alpha0: uncond * 0.06,
            alpha1: 0.10,
            beta1: 0.84,
            family: InnovationFamily::Gaussian,
            nu: None,
        };
        let col: Vec<f64> = eps.iter().map(|row| row[j]).collect();
        let returns = cryptorisk::garch::simulate_series(&params, &col, DAYS + 300).unwrap();

        let mut out = String::from("date,close\n");
        let mut price = 50.0 * (j as f64 + 2.0);
        let mut date = start;
        out.push_str(&format!("{date},{price:.6}\n"));
        for r in returns.iter().skip(300) {
            price *= r.exp();
            date = date.succ_opt().unwrap();
            out.push_str(&format!("{date},{price:.6}\n"));
        }
        std::fs::write(format!("data/sample/{asset}.csv"), out)?;
    }

    // Benchmark: weekday-only low-volatility index.
    let bench_params = GarchParams {
        phi0: 0.0004,
        phi1: 0.0,
        theta1: 0.0,
        alpha0: 0.0001 * 0.0001 * 60.0,
        alpha1: 0.06,
        beta1: 0.90,
        family: InnovationFamily::Gaussian,
        nu: None,
    };
    let bench_eps = sample_mvt(
        &MvtParams {
            nu: 5.0,
            mu: vec![0.0],
            sigma: vec![vec![0.6]],
        },
        DAYS + 300,
        SEED + 1,
    );
    let col: Vec<f64> = bench_eps.iter().map(|row| row[0]).collect();
    let bench_returns =
        cryptorisk::garch::simulate_series(&bench_params, &col, DAYS + 300).unwrap();
    let mut out = String::from("date,close\n");
    let mut price = 246.0;
    let mut date = start;
    out.push_str(&format!("{date},{price:.6}\n"));
    for r in bench_returns.iter().skip(300) {
        date = date.succ_opt().unwrap();
        price *= r.exp();
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            continue; // closed; the day's move folds into the next close
        }
        out.push_str(&format!("{date},{price:.6}\n"));
    }
    std::fs::write("data/sample/SPY.csv", out)?;

    // Treasury yields: slow weekday random walk around 2.4 annual percent.
    let yield_eps = sample_mvt(
        &MvtParams {
            nu: 5.0,
            mu: vec![0.0],
            sigma: vec![vec![0.6]],
        },
        DAYS + 1,
        SEED + 2,
    );
    let mut out = String::from("date,rate\n");
    let mut level: f64 = 2.40;
    let mut date = start;
    for row in yield_eps.iter().take(DAYS + 1) {
        level = (level + 0.01 * row[0]).clamp(1.2, 3.6);
        if !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push_str(&format!("{date},{level:.4}\n"));
        }
        date = date.succ_opt().unwrap();
    }
    std::fs::write("data/sample/UST10Y.csv", out)?;

    println!("wrote data/sample/{{{},SPY,UST10Y}}.csv", assets.join(","));
    Ok(())
}
