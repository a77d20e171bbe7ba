//! COV and WOR dose-response estimators and the posterior loop that turns
//! resampling draws into average-potential-outcome (APO) samples.
//!
//! * COV: outcome GEE on `[1, d, spline(gps)]`; the APO at dose `d` averages
//!   predictions over the draw's rows with the GPS re-evaluated at `d` for
//!   each row's covariates.
//! * WOR: outcome GEE on `[1, spline(d)]` weighted by (stabilized) inverse
//!   GPS; the APO is the fitted marginal mean at `d`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gee::{dot, fit_gee, CorrelationKind, Design, GeeFit, LinkFamily};
use crate::gps::{fit_gps, GpsFit, GpsKind, MarginalDoseFit, TreatmentRows};
use crate::panel::PanelDataset;
use crate::resample::{draw_bb, draw_dp, Origin, ResampleDraw, ResamplerKind, RngStream};
use crate::spline::{build_basis, SplineBasis};
use crate::stats::{mean, quantile_sorted, variance};

/// Largest tolerated share of failed posterior draws.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Cov,
    Wor,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cov => "cov",
            Method::Wor => "wor",
        }
    }
}

impl ResamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            ResamplerKind::Bb => "bb",
            ResamplerKind::Dp => "dp",
        }
    }
}

/// Which atoms of a DP draw get outcomes regenerated from the base measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticOutcomes {
    /// Only atoms drawn from the base measure.
    #[default]
    Mixture,
    /// Every atom.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub method: Method,
    pub resampler: ResamplerKind,
    /// DP concentration.
    pub alpha: f64,
    /// Number of DP atoms (stick-breaking cap).
    pub j_target: usize,
    /// Stick-breaking truncation tolerance.
    pub epsilon: f64,
    pub n_draws: usize,
    pub seed: u64,
    pub spline_knots: usize,
    pub family: LinkFamily,
    pub correlation: CorrelationKind,
    pub dose_grid: Vec<f64>,
    pub gps_kind: GpsKind,
    pub stabilize: bool,
    /// Cap WOR weights at this quantile of the draw's weights; `None` keeps them raw.
    pub weight_truncation: Option<f64>,
    pub synthetic_outcomes: SyntheticOutcomes,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            method: Method::Cov,
            resampler: ResamplerKind::Bb,
            alpha: 5.0,
            j_target: 500,
            epsilon: 1e-8,
            n_draws: 500,
            seed: 1,
            spline_knots: 2,
            family: LinkFamily::GaussianIdentity,
            correlation: CorrelationKind::Independent,
            dose_grid: vec![3.0, 4.0, 5.0],
            gps_kind: GpsKind::Gee,
            stabilize: true,
            weight_truncation: None,
            synthetic_outcomes: SyntheticOutcomes::Mixture,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dose_grid.is_empty() {
            return bad("dose_grid is empty".into());
        }
        if self.dose_grid.iter().any(|d| !d.is_finite()) || self.dose_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("dose_grid must be strictly increasing: {:?}", self.dose_grid));
        }
        if self.n_draws == 0 {
            return bad("n_draws must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.j_target == 0 {
            return bad("j_target must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if let Some(q) = self.weight_truncation {
            if !(q > 0.5 && q <= 1.0) {
                return bad(format!("weight_truncation must lie in (0.5, 1], got {q}"));
            }
        }
        Ok(())
    }
}

/// The weighted rows of one resample draw, atom by atom. Units are atom
/// indices, so repeated copies of an observed trajectory are separate clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawData {
    pub p: usize,
    pub y: Vec<f64>,
    pub d: Vec<f64>,
    pub x: Vec<f64>,
    pub units: Vec<usize>,
    /// Atom weight repeated on each of the atom's rows (estimating equations).
    pub row_weight: Vec<f64>,
    /// Atom weight spread equally over the atom's rows (APO averaging).
    pub apo_weight: Vec<f64>,
    pub base_measure: Vec<bool>,
}

impl DrawData {
    pub fn from_draw(data: &PanelDataset, draw: &ResampleDraw) -> Result<Self> {
        if draw.atoms.len() != draw.weights.len() {
            return Err(Error::InvalidData("draw atoms and weights differ in length".into()));
        }
        let p = data.n_covariates();
        let trajectories = data.trajectories();
        let rows: usize = draw
            .atoms
            .iter()
            .map(|a| trajectories.get(a.source).map_or(0, |t| t.len()))
            .sum();
        let mut f = DrawData {
            p,
            y: Vec::with_capacity(rows),
            d: Vec::with_capacity(rows),
            x: Vec::with_capacity(rows * p),
            units: Vec::with_capacity(rows),
            row_weight: Vec::with_capacity(rows),
            apo_weight: Vec::with_capacity(rows),
            base_measure: Vec::with_capacity(rows),
        };
        for (j, (atom, &w)) in draw.atoms.iter().zip(&draw.weights).enumerate() {
            let t = trajectories
                .get(atom.source)
                .ok_or_else(|| Error::InvalidData(format!("atom source {} out of range", atom.source)))?;
            let k = t.len();
            f.y.extend_from_slice(&t.outcomes);
            f.d.extend_from_slice(&t.doses);
            f.x.extend_from_slice(&t.covariates);
            f.units.extend(std::iter::repeat_n(j, k));
            f.row_weight.extend(std::iter::repeat_n(w, k));
            f.apo_weight.extend(std::iter::repeat_n(w / k as f64, k));
            f.base_measure
                .extend(std::iter::repeat_n(atom.origin == Origin::BaseMeasure, k));
        }
        Ok(f)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn treatment(&self) -> TreatmentRows<'_> {
        TreatmentRows {
            d: &self.d,
            x: &self.x,
            p: self.p,
            units: &self.units,
        }
    }

    fn row_x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    fn positive_rows(&self) -> usize {
        self.row_weight.iter().filter(|&&w| w > 0.0).count()
    }

    /// Treatment mean of each row under `gps` (fixed part plus the row's
    /// predicted intercept).
    fn gps_means(&self, gps: &GpsFit) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| gps.mean(self.row_x(i), Some(self.units[i])))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoseResponseFit {
    pub method: Method,
    pub outcome_fit: GeeFit,
    pub gps_fit: GpsFit,
    /// Spline of the GPS (COV) or of the dose (WOR).
    pub spline: SplineBasis,
    /// Numerator of stabilized weights (WOR only).
    pub marginal: Option<MarginalDoseFit>,
}

fn require_rows(frame: &DrawData, basis: &SplineBasis) -> Result<()> {
    let need = basis.basis_dim() + 2;
    let have = frame.positive_rows();
    if have < need {
        return Err(Error::SingularDesign(format!(
            "{have} positively weighted rows, at least {need} required"
        )));
    }
    Ok(())
}

fn cov_design(frame: &DrawData, gps_values: &[f64], spline: &SplineBasis) -> Design {
    let cols = 2 + spline.design_dim();
    let mut design = Design::with_capacity(cols, frame.n_rows());
    for i in 0..frame.n_rows() {
        let slot = design.push_row_with(frame.y[i], frame.units[i]);
        slot[0] = 1.0;
        slot[1] = frame.d[i];
        spline.eval_design_into(gps_values[i], &mut slot[2..]);
    }
    design
}

pub fn fit_cov(frame: &DrawData, cfg: &EstimatorConfig) -> Result<DoseResponseFit> {
    let gps = fit_gps(&frame.treatment(), &frame.row_weight, cfg.gps_kind)?;
    fit_cov_with_gps(frame, cfg, gps)
}

/// The COV outcome design of a draw. It depends on the outcomes only through
/// the response column, so it is shared by the synthetic-outcome fit and the
/// final fit.
struct CovDesign {
    gps: GpsFit,
    spline: SplineBasis,
    design: Design,
}

impl CovDesign {
    fn new(frame: &DrawData, cfg: &EstimatorConfig, gps: GpsFit) -> Result<Self> {
        let means = frame.gps_means(&gps);
        let gps_values: Vec<f64> = frame
            .d
            .iter()
            .zip(&means)
            .map(|(&d, &m)| gps.density_given_mean(d, m))
            .collect();
        let spline = build_basis(&gps_values, cfg.spline_knots)?;
        require_rows(frame, &spline)?;
        let design = cov_design(frame, &gps_values, &spline);
        Ok(CovDesign { gps, spline, design })
    }

    fn fit(&self, frame: &DrawData, cfg: &EstimatorConfig) -> Result<DoseResponseFit> {
        let outcome_fit = fit_gee(&self.design, cfg.family, cfg.correlation, &frame.row_weight)?;
        Ok(DoseResponseFit {
            method: Method::Cov,
            outcome_fit,
            gps_fit: self.gps.clone(),
            spline: self.spline.clone(),
            marginal: None,
        })
    }
}

pub fn fit_cov_with_gps(frame: &DrawData, cfg: &EstimatorConfig, gps: GpsFit) -> Result<DoseResponseFit> {
    CovDesign::new(frame, cfg, gps)?.fit(frame, cfg)
}

pub fn fit_wor(frame: &DrawData, cfg: &EstimatorConfig) -> Result<DoseResponseFit> {
    let gps = fit_gps(&frame.treatment(), &frame.row_weight, cfg.gps_kind)?;
    fit_wor_with_gps(frame, cfg, gps)
}

/// Per-row inverse-GPS weights (stabilized by the marginal dose density
/// unless `cfg.stabilize` is off), optionally capped at a quantile.
pub fn wor_weights(frame: &DrawData, cfg: &EstimatorConfig, gps: &GpsFit, marg: &MarginalDoseFit) -> Vec<f64> {
    let means = frame.gps_means(gps);
    let mut w: Vec<f64> = frame
        .d
        .iter()
        .zip(&means)
        .map(|(&d, &m)| {
            let e = gps.density_given_mean(d, m);
            if cfg.stabilize {
                marg.density(d) / e
            } else {
                1.0 / e
            }
        })
        .collect();
    if let Some(q) = cfg.weight_truncation {
        let mut positive: Vec<f64> = w
            .iter()
            .zip(&frame.row_weight)
            .filter(|(_, &rw)| rw > 0.0)
            .map(|(&v, _)| v)
            .collect();
        if !positive.is_empty() {
            positive.sort_unstable_by(f64::total_cmp);
            let cap = quantile_sorted(&positive, q);
            for v in &mut w {
                *v = v.min(cap);
            }
        }
    }
    w
}

pub fn fit_wor_with_gps(frame: &DrawData, cfg: &EstimatorConfig, gps: GpsFit) -> Result<DoseResponseFit> {
    let marg = MarginalDoseFit::fit(&frame.d, &frame.row_weight);
    let ipw = wor_weights(frame, cfg, &gps, &marg);
    let combined: Vec<f64> = frame.row_weight.iter().zip(&ipw).map(|(a, b)| a * b).collect();
    let spline = build_basis(&frame.d, cfg.spline_knots)?;
    require_rows(frame, &spline)?;
    let mut design = Design::with_capacity(1 + spline.design_dim(), frame.n_rows());
    for i in 0..frame.n_rows() {
        let slot = design.push_row_with(frame.y[i], frame.units[i]);
        slot[0] = 1.0;
        spline.eval_design_into(frame.d[i], &mut slot[1..]);
    }
    let outcome_fit = fit_gee(&design, cfg.family, cfg.correlation, &combined)?;
    Ok(DoseResponseFit {
        method: Method::Wor,
        outcome_fit,
        gps_fit: gps,
        spline,
        marginal: Some(marg),
    })
}

pub fn fit_method(frame: &DrawData, cfg: &EstimatorConfig, gps: GpsFit) -> Result<DoseResponseFit> {
    match cfg.method {
        Method::Cov => fit_cov_with_gps(frame, cfg, gps),
        Method::Wor => fit_wor_with_gps(frame, cfg, gps),
    }
}

/// APO at each dose of `grid` for one fitted draw.
pub fn apo_curve(fit: &DoseResponseFit, grid: &[f64], frame: &DrawData) -> Vec<f64> {
    let xi = &fit.outcome_fit.xi;
    let family = fit.outcome_fit.family;
    let mut buf = vec![0.0; fit.spline.design_dim()];
    match fit.method {
        Method::Wor => grid
            .iter()
            .map(|&d| {
                fit.spline.eval_design_into(d, &mut buf);
                family.inverse_link(xi[0] + dot(&xi[1..], &buf))
            })
            .collect(),
        Method::Cov => {
            let means = frame.gps_means(&fit.gps_fit);
            let total_w: f64 = frame.apo_weight.iter().sum();
            grid.iter()
                .map(|&d| {
                    let base = xi[0] + xi[1] * d;
                    let mut acc = 0.0;
                    for (&m, &w) in means.iter().zip(&frame.apo_weight) {
                        if w == 0.0 {
                            continue;
                        }
                        let e = fit.gps_fit.density_given_mean(d, m);
                        fit.spline.eval_design_into(e, &mut buf);
                        acc += w * family.inverse_link(base + dot(&xi[2..], &buf));
                    }
                    acc / total_w
                })
                .collect()
        }
    }
}

pub fn apo_at(fit: &DoseResponseFit, d: f64, frame: &DrawData) -> f64 {
    apo_curve(fit, &[d], frame)[0]
}

/// Draws outcomes from the base measure around a preliminary COV fit:
/// `Normal(mu, 1)` for Gaussian outcomes, `Poisson(mu)` for counts.
#[derive(Debug, Clone)]
pub struct SyntheticOutcomeGenerator {
    pub fit: DoseResponseFit,
    pub family: LinkFamily,
}

impl SyntheticOutcomeGenerator {
    pub fn train(frame: &DrawData, cfg: &EstimatorConfig, gps: GpsFit) -> Result<Self> {
        Ok(SyntheticOutcomeGenerator {
            fit: fit_cov_with_gps(frame, cfg, gps)?,
            family: cfg.family,
        })
    }

    fn train_on(prepared: &CovDesign, frame: &DrawData, cfg: &EstimatorConfig) -> Result<Self> {
        Ok(SyntheticOutcomeGenerator {
            fit: prepared.fit(frame, cfg)?,
            family: cfg.family,
        })
    }

    /// Fitted mean at each row's observed dose and GPS.
    pub fn fitted_means(&self, frame: &DrawData) -> Vec<f64> {
        let gps = &self.fit.gps_fit;
        let xi = &self.fit.outcome_fit.xi;
        let means = frame.gps_means(gps);
        let mut buf = vec![0.0; self.fit.spline.design_dim()];
        (0..frame.n_rows())
            .map(|i| {
                let e = gps.density_given_mean(frame.d[i], means[i]);
                self.fit.spline.eval_design_into(e, &mut buf);
                self.family
                    .inverse_link(xi[0] + xi[1] * frame.d[i] + dot(&xi[2..], &buf))
            })
            .collect()
    }

    /// Replaces outcomes of the selected rows in place; returns how many changed.
    pub fn regenerate<R: Rng + ?Sized>(&self, frame: &mut DrawData, mode: SyntheticOutcomes, rng: &mut R) -> Result<usize> {
        let mu = self.fitted_means(frame);
        self.regenerate_from(&mu, frame, mode, rng)
    }

    fn regenerate_from<R: Rng + ?Sized>(
        &self,
        mu: &[f64],
        frame: &mut DrawData,
        mode: SyntheticOutcomes,
        rng: &mut R,
    ) -> Result<usize> {
        let mut changed = 0;
        for i in 0..frame.n_rows() {
            if mode == SyntheticOutcomes::Mixture && !frame.base_measure[i] {
                continue;
            }
            frame.y[i] = match self.family {
                LinkFamily::GaussianIdentity => mu[i] + rng.sample::<f64, _>(StandardNormal),
                LinkFamily::PoissonLog => Poisson::new(mu[i])
                    .map_err(|e| Error::InvalidData(format!("Poisson mean {}: {e}", mu[i])))?
                    .sample(rng),
            };
            changed += 1;
        }
        Ok(changed)
    }
}

/// Fits one draw end to end and returns its APO curve over `cfg.dose_grid`.
pub fn run_draw<R: Rng + ?Sized>(
    data: &PanelDataset,
    cfg: &EstimatorConfig,
    draw: &ResampleDraw,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut frame = DrawData::from_draw(data, draw)?;
    let gps = fit_gps(&frame.treatment(), &frame.row_weight, cfg.gps_kind)?;
    let regenerate = draw.kind == ResamplerKind::Dp
        && (cfg.synthetic_outcomes == SyntheticOutcomes::All || frame.base_measure.iter().any(|&b| b));
    if !regenerate {
        let fit = fit_method(&frame, cfg, gps)?;
        return Ok(apo_curve(&fit, &cfg.dose_grid, &frame));
    }
    let mut prepared = CovDesign::new(&frame, cfg, gps)?;
    let gen = SyntheticOutcomeGenerator::train_on(&prepared, &frame, cfg)?;
    let xi = &gen.fit.outcome_fit.xi;
    let mu: Vec<f64> = (0..prepared.design.n_rows())
        .map(|i| cfg.family.inverse_link(dot(xi, prepared.design.row(i))))
        .collect();
    gen.regenerate_from(&mu, &mut frame, cfg.synthetic_outcomes, rng)?;
    let fit = match cfg.method {
        Method::Cov => {
            prepared.design.set_response(&frame.y);
            prepared.fit(&frame, cfg)?
        }
        Method::Wor => fit_wor_with_gps(&frame, cfg, prepared.gps)?,
    };
    Ok(apo_curve(&fit, &cfg.dose_grid, &frame))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseSummary {
    pub dose: f64,
    pub mean: f64,
    pub var: f64,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawFailure {
    pub draw: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApoPosterior {
    pub dose_grid: Vec<f64>,
    /// One row per successful draw, one column per grid dose.
    pub samples: Vec<Vec<f64>>,
    /// Draw index `s` of each sample row.
    pub draw_ids: Vec<usize>,
    pub failures: Vec<DrawFailure>,
    pub method: Method,
    pub resampler: ResamplerKind,
    /// Empty when fewer than two draws succeeded.
    pub summary: Vec<DoseSummary>,
}

impl ApoPosterior {
    pub fn n_draws(&self) -> usize {
        self.samples.len() + self.failures.len()
    }

    pub fn column(&self, g: usize) -> Vec<f64> {
        self.samples.iter().map(|row| row[g]).collect()
    }
}

/// Mean, variance (`S - 1` denominator), median and the 2.5% / 97.5%
/// quantiles per dose. Quantiles interpolate linearly between order
/// statistics (`h = (S - 1) q`).
pub fn summarize_samples(dose_grid: &[f64], samples: &[Vec<f64>]) -> Result<Vec<DoseSummary>> {
    if samples.len() < 2 {
        return Err(Error::InvalidData(format!(
            "summaries need at least 2 samples, got {}",
            samples.len()
        )));
    }
    Ok(dose_grid
        .iter()
        .enumerate()
        .map(|(g, &dose)| {
            let mut col: Vec<f64> = samples.iter().map(|r| r[g]).collect();
            let m = mean(&col);
            let v = variance(&col);
            col.sort_unstable_by(f64::total_cmp);
            DoseSummary {
                dose,
                mean: m,
                var: v,
                median: quantile_sorted(&col, 0.5),
                q025: quantile_sorted(&col, 0.025),
                q975: quantile_sorted(&col, 0.975),
            }
        })
        .collect())
}

pub fn summarize(apo: &ApoPosterior) -> Result<Vec<DoseSummary>> {
    summarize_samples(&apo.dose_grid, &apo.samples)
}

/// The standard draw for `cfg.resampler`.
pub fn standard_draw(data: &PanelDataset, cfg: &EstimatorConfig, rng: &mut ChaCha8Rng) -> ResampleDraw {
    match cfg.resampler {
        ResamplerKind::Bb => draw_bb(data, rng),
        ResamplerKind::Dp => draw_dp(data, cfg.alpha, cfg.j_target, cfg.epsilon, rng),
    }
}

/// Posterior APO samples: draw `s` uses `RngStream(cfg.seed, s)` and results
/// are assembled in draw order, so output does not depend on thread count.
pub fn posterior_apo(data: &PanelDataset, cfg: &EstimatorConfig) -> Result<ApoPosterior> {
    posterior_apo_with(data, cfg, standard_draw)
}

/// [`posterior_apo`] with a caller-supplied draw generator.
pub fn posterior_apo_with<F>(data: &PanelDataset, cfg: &EstimatorConfig, sampler: F) -> Result<ApoPosterior>
where
    F: Fn(&PanelDataset, &EstimatorConfig, &mut ChaCha8Rng) -> ResampleDraw + Sync,
{
    cfg.validate()?;
    if data.family() != cfg.family {
        return Err(Error::Config(format!(
            "dataset family {:?} does not match configured family {:?}",
            data.family(),
            cfg.family
        )));
    }
    if data.n_units() < 2 {
        return Err(Error::InvalidData("posterior draws need at least 2 units".into()));
    }
    let results: Vec<Result<Vec<f64>>> = (0..cfg.n_draws)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngStream::new(cfg.seed, s as u64).rng();
            let draw = sampler(data, cfg, &mut rng);
            run_draw(data, cfg, &draw, &mut rng)
        })
        .collect();

    let mut samples = Vec::with_capacity(cfg.n_draws);
    let mut draw_ids = Vec::with_capacity(cfg.n_draws);
    let mut failures = Vec::new();
    for (s, r) in results.into_iter().enumerate() {
        match r {
            Ok(curve) if curve.iter().all(|v| v.is_finite()) => {
                samples.push(curve);
                draw_ids.push(s);
            }
            Ok(_) => failures.push(DrawFailure {
                draw: s,
                message: "non-finite APO".into(),
            }),
            Err(e) => failures.push(DrawFailure {
                draw: s,
                message: Error::Draw { draw: s, source: Box::new(e) }.to_string(),
            }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_SHARE * cfg.n_draws as f64 {
        let causes = failures
            .iter()
            .take(5)
            .map(|f| f.message.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::ExcessFailures {
            failed: failures.len(),
            total: cfg.n_draws,
            causes,
        });
    }
    for f in &failures {
        log::warn!("skipping {}", f.message);
    }
    let summary = summarize_samples(&cfg.dose_grid, &samples).unwrap_or_default();
    Ok(ApoPosterior {
        dose_grid: cfg.dose_grid.clone(),
        samples,
        draw_ids,
        failures,
        method: cfg.method,
        resampler: cfg.resampler,
        summary,
    })
}
