//! Synthetic panel with the shape of a city-level transit study: 8 units
//! observed over 23 months, ridership as the dose, case counts as the outcome
//! and 10 confounders.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use longidose_core::gee::LinkFamily;
use longidose_core::panel::{write_panel_csv, PanelDataset, PanelSchema, Trajectory};
use longidose_core::resample::RngStream;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub const UNITS: usize = 8;
pub const MONTHS: usize = 23;
pub const CONFOUNDERS: usize = 10;

pub fn schema() -> PanelSchema {
    PanelSchema {
        unit_id: "city".into(),
        time: "month".into(),
        outcome: "cases".into(),
        dose: "ridership".into(),
        covariates: (1..=CONFOUNDERS).map(|j| format!("c{j}")).collect(),
    }
}

/// `effect` is the log-rate change per unit of log ridership. Covariates and
/// doses come from one stream and outcome noise from another, so panels with
/// different effects share every dose and confounder value.
pub fn application_panel(seed: u64, effect: f64) -> PanelDataset {
    let mut rng = RngStream::new(seed, 0).rng();
    let mut noise = RngStream::new(seed, 1).rng();
    let z = |r: &mut rand_chacha::ChaCha8Rng| r.sample::<f64, _>(StandardNormal);
    let trajectories = (0..UNITS)
        .map(|i| {
            let unit_effect = z(&mut rng);
            let levels: Vec<f64> = (0..CONFOUNDERS).map(|_| z(&mut rng)).collect();
            let mut doses = Vec::with_capacity(MONTHS);
            let mut outcomes = Vec::with_capacity(MONTHS);
            let mut covariates = Vec::with_capacity(MONTHS);
            for t in 0..MONTHS {
                let trend = t as f64 / MONTHS as f64;
                let c: Vec<f64> = (0..CONFOUNDERS)
                    .map(|j| {
                        if j >= 8 {
                            // time-invariant city characteristics
                            levels[j]
                        } else {
                            levels[j] + 0.5 * trend * (j as f64 - 3.5) / 3.5 + 0.5 * z(&mut rng)
                        }
                    })
                    .collect();
                let conf: f64 = c[..5].iter().sum::<f64>() * 0.1;
                let log_ridership = 12.0 + 0.4 * unit_effect + conf + 0.6 * z(&mut rng);
                let eta = 3.0 + effect * (log_ridership - 12.0) + 0.15 * c[0] - 0.1 * c[1] + 0.1 * c[8] + 0.2 * unit_effect;
                let y = Poisson::new(eta.exp()).expect("finite rate").sample(&mut noise);
                doses.push(log_ridership.exp());
                outcomes.push(y);
                covariates.push(c);
            }
            Trajectory::new(format!("city{}", i + 1), (1..=MONTHS as i64).collect(), outcomes, doses, covariates)
                .expect("valid trajectory")
        })
        .collect();
    PanelDataset::new(
        trajectories,
        LinkFamily::PoissonLog,
        (1..=CONFOUNDERS).map(|j| format!("c{j}")).collect(),
    )
    .expect("valid panel")
}

pub fn write_application_csv(dir: &Path, seed: u64, effect: f64) -> PathBuf {
    let path = dir.join(format!("panel_{seed}_{effect}.csv"));
    let file = std::fs::File::create(&path).unwrap();
    write_panel_csv(&application_panel(seed, effect), &schema(), file).unwrap();
    path
}

/// Run config for the application analysis: log dose, grid at the 2.5%, 50%
/// and 97.5% dose quantiles, 200 draws, 200 DP atoms.
pub fn application_config(method: &str, resampler: &str, family: &str, log1p_outcome: bool) -> String {
    let mut transforms = vec![r#"{"column": "dose", "transform": "log"}"#.to_string()];
    if log1p_outcome {
        transforms.push(r#"{"column": "outcome", "transform": "log1p"}"#.to_string());
    }
    let covs: Vec<String> = (1..=CONFOUNDERS).map(|j| format!("\"c{j}\"")).collect();
    format!(
        r#"{{
  "version": 1,
  "estimator": {{
    "method": "{method}",
    "resampler": "{resampler}",
    "family": "{family}",
    "n_draws": 200,
    "j_target": 200,
    "alpha": 5.0,
    "seed": 2024
  }},
  "data": {{
    "schema": {{"unit_id": "city", "time": "month", "outcome": "cases", "dose": "ridership", "covariates": [{}]}},
    "transforms": [{}],
    "dose_grid": {{"quantiles": [0.025, 0.5, 0.975]}}
  }}
}}
"#,
        covs.join(", "),
        transforms.join(", ")
    )
}

pub fn read_summary(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dose,mean,var,median,q025,q975"));
    lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}
