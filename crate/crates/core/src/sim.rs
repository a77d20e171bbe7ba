//! Simulation lab: the two longitudinal data-generating processes, their true
//! APO curves, and a replication harness reporting average estimate, average
//! posterior variance and credible-interval coverage.

use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dose_response::{posterior_apo, EstimatorConfig, Method};
use crate::error::{Error, Result};
use crate::fmt::fmt_num;
use crate::gee::LinkFamily;
use crate::panel::{apply_transform, Column, PanelDataset, Trajectory, Transform};
use crate::resample::{ResamplerKind, RngStream};

/// Draws used by the Example 2 truth oracle.
pub const ORACLE_DRAWS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    One,
    Two,
}

impl Example {
    pub fn family(self) -> LinkFamily {
        match self {
            Example::One => LinkFamily::GaussianIdentity,
            Example::Two => LinkFamily::PoissonLog,
        }
    }
}

/// How to read the second argument of `N(a, b)` in the covariate laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondParam {
    #[default]
    Variance,
    Sd,
}

impl SecondParam {
    fn sd(self, b: f64) -> f64 {
        match self {
            SecondParam::Variance => b.sqrt(),
            SecondParam::Sd => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub example: Example,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    #[serde(default)]
    pub second_param: SecondParam,
}

impl DgpSpec {
    pub fn new(example: Example, seed: u64) -> Self {
        DgpSpec {
            example,
            n: 100,
            k: 10,
            seed,
            second_param: SecondParam::Variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.k < 1 {
            return Err(Error::Config(format!("need n >= 2 and k >= 1, got n={} k={}", self.n, self.k)));
        }
        Ok(())
    }
}

/// Outcome coefficients of Example 2 on the log-mean scale. `x1` and `x2`
/// already include the division by 100.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example2Coefficients {
    pub intercept: f64,
    pub dose: f64,
    pub x1: f64,
    pub x2: f64,
    pub u: f64,
}

impl Default for Example2Coefficients {
    fn default() -> Self {
        Example2Coefficients {
            intercept: 1.0,
            dose: 0.2,
            x1: 0.005 / 100.0,
            x2: -0.002 / 100.0,
            u: 0.1,
        }
    }
}

const X1_LAW: (f64, f64) = (0.2, 0.1);
const X2_LAW: (f64, f64) = (1.0, 0.6);
const U_LAW: (f64, f64) = (0.2, 0.1);

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    mean + sd * rng.sample::<f64, _>(StandardNormal)
}

struct Confounders {
    x1: f64,
    x2: f64,
    u: f64,
    d: f64,
}

/// Per-unit `U`, then per-time `X1`, `X2`, and the dose.
fn unit_rows<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Vec<Confounders> {
    let sp = spec.second_param;
    let u = normal(rng, U_LAW.0, sp.sd(U_LAW.1));
    (0..spec.k)
        .map(|_| {
            let x1 = normal(rng, X1_LAW.0, sp.sd(X1_LAW.1));
            let x2 = normal(rng, X2_LAW.0, sp.sd(X2_LAW.1));
            let d = 1.0 + 4.0 * x1 + 2.0 * x2 + u + normal(rng, 0.0, 1.0);
            Confounders { x1, x2, u, d }
        })
        .collect()
}

fn assemble(trajectories: Vec<Trajectory>, family: LinkFamily) -> PanelDataset {
    PanelDataset::new(trajectories, family, vec!["x1".into(), "x2".into()])
        .expect("simulated panels are valid by construction")
}

fn trajectory(i: usize, rows: &[Confounders], y: Vec<f64>) -> Trajectory {
    Trajectory::new(
        format!("{}", i + 1),
        (1..=rows.len() as i64).collect(),
        y,
        rows.iter().map(|c| c.d).collect(),
        rows.iter().map(|c| vec![c.x1, c.x2]).collect(),
    )
    .expect("simulated trajectories are valid by construction")
}

/// Example 1 on the raw outcome scale, plus the number of non-positive
/// outcomes that were rejected and redrawn.
pub fn generate_example1_counted<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> (PanelDataset, usize) {
    let mut redraws = 0;
    let t = (0..spec.n)
        .map(|i| {
            let rows = unit_rows(spec, rng);
            let y = rows
                .iter()
                .map(|c| {
                    let mu = 20.0 * (c.d + c.x1 - 0.25 * c.x2 + 0.5 * c.u).exp();
                    loop {
                        let y = normal(rng, mu, 1.0);
                        if y > 0.0 {
                            break y;
                        }
                        redraws += 1;
                    }
                })
                .collect();
            trajectory(i, &rows, y)
        })
        .collect();
    (assemble(t, LinkFamily::GaussianIdentity), redraws)
}

pub fn generate_example1<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> PanelDataset {
    generate_example1_counted(spec, rng).0
}

pub fn generate_example2_with<R: Rng + ?Sized>(spec: &DgpSpec, coef: &Example2Coefficients, rng: &mut R) -> PanelDataset {
    let t = (0..spec.n)
        .map(|i| {
            let rows = unit_rows(spec, rng);
            let y = rows
                .iter()
                .map(|c| {
                    let eta = coef.intercept + coef.dose * c.d + coef.x1 * c.x1 + coef.x2 * c.x2 + coef.u * c.u;
                    let mu = eta.exp();
                    Poisson::new(mu).map_or(0.0, |p| p.sample(rng))
                })
                .collect();
            trajectory(i, &rows, y)
        })
        .collect();
    assemble(t, LinkFamily::PoissonLog)
}

pub fn generate_example2<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> PanelDataset {
    generate_example2_with(spec, &Example2Coefficients::default(), rng)
}

/// `E[log-scale mean of Y(d)] = log 20 + d + E[X1] - 0.25 E[X2] + 0.5 E[U]`.
pub fn true_apo_example1(d: f64) -> f64 {
    20f64.ln() + d + X1_LAW.0 - 0.25 * X2_LAW.0 + 0.5 * U_LAW.0
}

/// Monte-Carlo estimate of `E[exp(x1 X1 + x2 X2 + u U)]` over the covariate laws.
pub fn example2_confounder_factor(second_param: SecondParam, draws: usize, seed: u64) -> f64 {
    let coef = Example2Coefficients::default();
    let mut rng: ChaCha8Rng = RngStream::new(seed, 0).rng();
    let (s1, s2, su) = (second_param.sd(X1_LAW.1), second_param.sd(X2_LAW.1), second_param.sd(U_LAW.1));
    let mut acc = 0.0;
    for _ in 0..draws {
        let x1 = normal(&mut rng, X1_LAW.0, s1);
        let x2 = normal(&mut rng, X2_LAW.0, s2);
        let u = normal(&mut rng, U_LAW.0, su);
        acc += (coef.x1 * x1 + coef.x2 * x2 + coef.u * u).exp();
    }
    acc / draws as f64
}

const ORACLE_SEED: u64 = 0x0DD5_EED5;

fn oracle_factor(second_param: SecondParam) -> f64 {
    static VAR: OnceLock<f64> = OnceLock::new();
    static SD: OnceLock<f64> = OnceLock::new();
    let cell = match second_param {
        SecondParam::Variance => &VAR,
        SecondParam::Sd => &SD,
    };
    *cell.get_or_init(|| example2_confounder_factor(second_param, ORACLE_DRAWS, ORACLE_SEED))
}

/// `E[Y(d)]` on the count scale. The dose enters only through `exp(1 + 0.2 d)`,
/// so the confounder expectation is estimated once (10^7 draws) and reused.
pub fn true_apo_example2(d: f64, second_param: SecondParam) -> f64 {
    let coef = Example2Coefficients::default();
    (coef.intercept + coef.dose * d).exp() * oracle_factor(second_param)
}

pub fn true_apo(example: Example, d: f64, second_param: SecondParam) -> f64 {
    match example {
        Example::One => true_apo_example1(d),
        Example::Two => true_apo_example2(d, second_param),
    }
}

/// One simulated dataset as analysed: Example 1 outcomes are log transformed.
pub fn replicate_dataset(spec: &DgpSpec, r: usize) -> Result<PanelDataset> {
    let mut rng = RngStream::new(spec.seed, r as u64).rng();
    match spec.example {
        Example::One => apply_transform(&generate_example1(spec, &mut rng), &Column::Outcome, Transform::Log),
        Example::Two => Ok(generate_example2(spec, &mut rng)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
    pub covered: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimRow {
    pub dose: f64,
    pub truth: f64,
    pub av_est: f64,
    pub av_est_var: f64,
    pub coverage_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub method: Method,
    pub resampler: ResamplerKind,
    pub rows: Vec<SimRow>,
    pub replicates: usize,
    pub draws: usize,
    pub per_replicate: Vec<ReplicateResult>,
}

impl SimReport {
    pub fn row_at(&self, dose: f64) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.dose == dose)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "resampler", "dose", "truth", "av_est", "av_est_var", "coverage_pct", "R", "S"])?;
        for row in &self.rows {
            w.write_record([
                self.method.name().to_string(),
                self.resampler.name().to_string(),
                fmt_num(row.dose),
                fmt_num(row.truth),
                fmt_num(row.av_est),
                fmt_num(row.av_est_var),
                fmt_num(row.coverage_pct),
                self.replicates.to_string(),
                self.draws.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Seed of the posterior draws within replicate `r`, independent of the
/// stream that generated the replicate's data.
pub fn replicate_posterior_seed(spec: &DgpSpec, r: usize) -> u64 {
    RngStream::new(spec.seed, r as u64).substream(0).seed
}

/// Runs `replicates` independent datasets through [`posterior_apo`]. The
/// outcome family is taken from the example. Replicates run in parallel and
/// are aggregated in index order.
pub fn run_replications(spec: &DgpSpec, cfg: &EstimatorConfig, replicates: usize) -> Result<SimReport> {
    spec.validate()?;
    if replicates < 2 {
        return Err(Error::Config(format!("need at least 2 replicates, got {replicates}")));
    }
    let mut cfg = cfg.clone();
    cfg.family = spec.example.family();
    cfg.validate()?;
    let truth: Vec<f64> = cfg
        .dose_grid
        .iter()
        .map(|&d| true_apo(spec.example, d, spec.second_param))
        .collect();

    let results: Vec<Result<ReplicateResult>> = (1..=replicates)
        .into_par_iter()
        .map(|r| {
            let wrap = |e| Error::Replicate { replicate: r, source: Box::new(e) };
            let data = replicate_dataset(spec, r).map_err(wrap)?;
            let rcfg = EstimatorConfig {
                seed: replicate_posterior_seed(spec, r),
                ..cfg.clone()
            };
            let post = posterior_apo(&data, &rcfg).map_err(wrap)?;
            if post.summary.is_empty() {
                return Err(wrap(Error::InvalidData("fewer than 2 successful draws".into())));
            }
            Ok(ReplicateResult {
                replicate: r,
                means: post.summary.iter().map(|s| s.mean).collect(),
                vars: post.summary.iter().map(|s| s.var).collect(),
                covered: post
                    .summary
                    .iter()
                    .zip(&truth)
                    .map(|(s, &t)| s.q025 <= t && t <= s.q975)
                    .collect(),
            })
        })
        .collect();
    let per_replicate = results.into_iter().collect::<Result<Vec<_>>>()?;

    let rf = replicates as f64;
    let rows = cfg
        .dose_grid
        .iter()
        .enumerate()
        .map(|(g, &dose)| SimRow {
            dose,
            truth: truth[g],
            av_est: per_replicate.iter().map(|p| p.means[g]).sum::<f64>() / rf,
            av_est_var: per_replicate.iter().map(|p| p.vars[g]).sum::<f64>() / rf,
            coverage_pct: 100.0 * per_replicate.iter().filter(|p| p.covered[g]).count() as f64 / rf,
        })
        .collect();
    Ok(SimReport {
        method: cfg.method,
        resampler: cfg.resampler,
        rows,
        replicates,
        draws: cfg.n_draws,
        per_replicate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_shape_and_determinism() {
        let spec = DgpSpec::new(Example::One, 11);
        let a = generate_example1(&spec, &mut RngStream::new(11, 1).rng());
        let b = generate_example1(&spec, &mut RngStream::new(11, 1).rng());
        assert_eq!(a.n_rows(), 1000);
        assert_eq!(a.n_units(), 100);
        assert_eq!(a, b);
        assert!(a.pooled_rows().all(|r| r.y > 0.0));
    }

    #[test]
    fn example1_marginals() {
        let spec = DgpSpec { n: 10_000, k: 100, ..DgpSpec::new(Example::One, 3) };
        let data = generate_example1(&spec, &mut RngStream::new(3, 0).rng());
        let n = data.n_rows() as f64;
        let x1: f64 = data.pooled_rows().map(|r| r.x[0]).sum::<f64>() / n;
        let d: f64 = data.pooled_rows().map(|r| r.d).sum::<f64>() / n;
        assert!((x1 - 0.2).abs() < 0.002, "{x1}");
        assert!((d - 4.0).abs() < 0.04, "{d}");
    }

    #[test]
    fn example1_truth() {
        for (d, t) in [(3.0, 6.046), (4.0, 7.046), (5.0, 8.046)] {
            assert!((true_apo_example1(d) - t).abs() < 5e-4);
        }
    }

    #[test]
    fn example2_counts() {
        let spec = DgpSpec::new(Example::Two, 5);
        let data = generate_example2(&spec, &mut RngStream::new(5, 1).rng());
        assert!(data.pooled_rows().all(|r| r.y >= 0.0 && r.y.fract() == 0.0));
        assert_eq!(data.family(), LinkFamily::PoissonLog);
    }

    #[test]
    fn example2_intercept_only_mean() {
        let spec = DgpSpec { n: 10_000, k: 100, ..DgpSpec::new(Example::Two, 8) };
        let coef = Example2Coefficients { intercept: 1.0, dose: 0.0, x1: 0.0, x2: 0.0, u: 0.0 };
        let data = generate_example2_with(&spec, &coef, &mut RngStream::new(8, 0).rng());
        let m = data.pooled_rows().map(|r| r.y).sum::<f64>() / data.n_rows() as f64;
        assert!((m / std::f64::consts::E - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn confounder_factor_matches_lognormal_moment() {
        // 0.1 U with U ~ N(0.2, 0.1): exp(0.02 + 0.01 * 0.1 / 2); X terms are tiny
        let c = example2_confounder_factor(SecondParam::Variance, 200_000, 1);
        let exact = (0.1f64 * 0.2 + 0.5 * 0.01 * 0.1 + 0.00005 * 0.2 - 0.00002).exp();
        assert!((c - exact).abs() < 1e-3, "{c} {exact}");
    }

    #[test]
    fn small_replication_smoke() {
        let spec = DgpSpec { n: 12, k: 3, ..DgpSpec::new(Example::One, 2) };
        let cfg = EstimatorConfig { n_draws: 10, ..Default::default() };
        let rep = run_replications(&spec, &cfg, 2).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows.iter().all(|r| r.av_est.is_finite() && r.av_est_var.is_finite()));
        assert!(rep.rows.iter().all(|r| (0.0..=100.0).contains(&r.coverage_pct)));
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,resampler,dose,truth,av_est,av_est_var,coverage_pct,R,S\n"));
        assert_eq!(text.lines().count(), 4);
        assert!(run_replications(&spec, &cfg, 1).is_err());
    }
}
