//! Generalized propensity scores for a continuous treatment: a Gaussian
//! density for the dose given covariates, optionally with a per-unit random
//! intercept, and the inverse-density weights built from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gee::{dot, fit_gee, CorrelationKind, Design, LinkFamily};
use crate::panel::PanelDataset;

pub const DENSITY_FLOOR: f64 = 1e-12;
pub const SIGMA2_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpsKind {
    #[default]
    Gee,
    RandomIntercept,
}

/// Borrowed treatment rows: dose, row-major covariates (`p` per row) and the
/// cluster index of each row.
#[derive(Debug, Clone, Copy)]
pub struct TreatmentRows<'a> {
    pub d: &'a [f64],
    pub x: &'a [f64],
    pub p: usize,
    pub units: &'a [usize],
}

impl TreatmentRows<'_> {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }
}

/// Owned treatment rows extracted from a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentFrame {
    pub d: Vec<f64>,
    pub x: Vec<f64>,
    pub p: usize,
    pub units: Vec<usize>,
}

impl TreatmentFrame {
    /// Pooled rows of `data` keeping the covariates at `columns`.
    pub fn from_panel(data: &PanelDataset, columns: &[usize]) -> Self {
        let n = data.n_rows();
        let mut f = TreatmentFrame {
            d: Vec::with_capacity(n),
            x: Vec::with_capacity(n * columns.len()),
            p: columns.len(),
            units: Vec::with_capacity(n),
        };
        for r in data.pooled_rows() {
            f.d.push(r.d);
            f.x.extend(columns.iter().map(|&c| r.x[c]));
            f.units.push(r.unit);
        }
        f
    }

    pub fn view(&self) -> TreatmentRows<'_> {
        TreatmentRows {
            d: &self.d,
            x: &self.x,
            p: self.p,
            units: &self.units,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomIntercept {
    pub tau2: f64,
    /// Predicted intercept per unit index; units absent from the fit get 0.
    pub blup: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpsFit {
    /// Intercept first, then one coefficient per covariate.
    pub gamma: Vec<f64>,
    pub sigma2: f64,
    pub random_intercept: Option<RandomIntercept>,
    pub kind: GpsKind,
}

impl GpsFit {
    pub fn mean(&self, x: &[f64], unit: Option<usize>) -> f64 {
        let fixed = self.gamma[0] + dot(&self.gamma[1..], x);
        fixed + self.blup(unit)
    }

    pub fn blup(&self, unit: Option<usize>) -> f64 {
        match (&self.random_intercept, unit) {
            (Some(ri), Some(u)) => ri.blup.get(u).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Floored Gaussian density of `d` around a precomputed treatment mean.
    #[inline]
    pub fn density_given_mean(&self, d: f64, mean: f64) -> f64 {
        normal_density(d, mean, self.sigma2)
    }
}

#[inline]
fn normal_density(d: f64, mean: f64, sigma2: f64) -> f64 {
    let z = d - mean;
    let v = (-0.5 * z * z / sigma2).exp() / (2.0 * PI * sigma2).sqrt();
    if v.is_finite() {
        v.max(DENSITY_FLOOR)
    } else {
        DENSITY_FLOOR
    }
}

pub fn gps_density(fit: &GpsFit, d: f64, x: &[f64], unit: Option<usize>) -> f64 {
    fit.density_given_mean(d, fit.mean(x, unit))
}

fn treatment_design(rows: &TreatmentRows<'_>) -> Design {
    let mut design = Design::with_capacity(rows.p + 1, rows.len());
    for i in 0..rows.len() {
        let slot = design.push_row_with(rows.d[i], rows.units[i]);
        slot[0] = 1.0;
        slot[1..].copy_from_slice(rows.row(i));
    }
    design
}

fn check_rows(rows: &TreatmentRows<'_>, weights: &[f64]) -> Result<()> {
    if weights.len() != rows.len() || rows.units.len() != rows.len() || rows.x.len() != rows.len() * rows.p {
        return Err(Error::InvalidData("treatment rows and weights disagree in length".into()));
    }
    if weights.iter().filter(|&&w| w > 0.0).count() < 2 {
        return Err(Error::InvalidData("GPS fit needs at least 2 positively weighted rows".into()));
    }
    Ok(())
}

fn weighted_residuals(rows: &TreatmentRows<'_>, gamma: &[f64]) -> Vec<f64> {
    (0..rows.len())
        .map(|i| rows.d[i] - gamma[0] - dot(&gamma[1..], rows.row(i)))
        .collect()
}

fn mean_square(resid: &[f64], weights: &[f64]) -> f64 {
    let (s, w) = resid
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(s, t), (r, w)| (s + w * r * r, t + w));
    s / w
}

/// Weighted Gaussian-identity GEE of dose on `[1, x]`; `sigma2` is the
/// weighted mean squared residual.
pub fn fit_gps_rows(rows: &TreatmentRows<'_>, weights: &[f64]) -> Result<GpsFit> {
    check_rows(rows, weights)?;
    let fit = fit_gee(
        &treatment_design(rows),
        LinkFamily::GaussianIdentity,
        CorrelationKind::Independent,
        weights,
    )?;
    let resid = weighted_residuals(rows, &fit.xi);
    Ok(GpsFit {
        sigma2: mean_square(&resid, weights).max(SIGMA2_FLOOR),
        gamma: fit.xi,
        random_intercept: None,
        kind: GpsKind::Gee,
    })
}

/// Fixed effects by pooled weighted least squares, then a weighted
/// between/within moment split of the residuals:
///
/// * `sigma2` = pooled within-unit variance,
/// * `tau2`   = between-unit variance of unit mean residuals minus the
///   expected `sigma2 / K_i` contribution, clipped at zero,
/// * `blup_i` = `tau2 / (tau2 + sigma2 / K_i)` times the unit mean residual.
pub fn fit_gps_random_intercept_rows(rows: &TreatmentRows<'_>, weights: &[f64]) -> Result<GpsFit> {
    check_rows(rows, weights)?;
    let base = fit_gps_rows(rows, weights)?;
    let resid = weighted_residuals(rows, &base.gamma);

    // (sum w, sum w r, count) per unit index, positively weighted rows only
    let n_slots = rows.units.iter().max().map_or(0, |m| m + 1);
    let mut slots: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); n_slots];
    for i in 0..rows.len() {
        let w = weights[i];
        if w > 0.0 {
            let e = &mut slots[rows.units[i]];
            e.0 += w;
            e.1 += w * resid[i];
            e.2 += 1;
        }
    }
    let stats: Vec<(usize, (f64, f64, usize))> =
        slots.iter().copied().enumerate().filter(|(_, s)| s.2 > 0).collect();
    if stats.len() < 2 {
        return Err(Error::Unidentifiable(format!(
            "{} unit(s) carry positive weight",
            stats.len()
        )));
    }
    let mut within = 0.0;
    for i in 0..rows.len() {
        let w = weights[i];
        if w > 0.0 {
            let (sw, swr, _) = slots[rows.units[i]];
            let r = resid[i] - swr / sw;
            within += w * r * r;
        }
    }
    // per-unit weight = mean row weight
    let (mut within_den, mut tw, mut twm, mut tw_inv_k) = (0.0, 0.0, 0.0, 0.0);
    for &(_, (sw, swr, k)) in &stats {
        let wbar = sw / k as f64;
        within_den += wbar * (k as f64 - 1.0);
        tw += wbar;
        twm += wbar * swr / sw;
        tw_inv_k += wbar / k as f64;
    }
    if within_den <= 0.0 {
        return Err(Error::Unidentifiable("no unit has more than one weighted row".into()));
    }
    let sigma2 = (within / within_den).max(SIGMA2_FLOOR);
    let grand = twm / tw;
    let between = stats
        .iter()
        .map(|&(_, (sw, swr, k))| {
            let dev = swr / sw - grand;
            (sw / k as f64) * dev * dev
        })
        .sum::<f64>()
        / tw;
    let tau2 = (between - sigma2 * tw_inv_k / tw).max(0.0);

    let mut blup = vec![0.0; n_slots];
    for &(u, (sw, swr, k)) in &stats {
        let shrink = if tau2 > 0.0 { tau2 / (tau2 + sigma2 / k as f64) } else { 0.0 };
        blup[u] = shrink * swr / sw;
    }
    Ok(GpsFit {
        gamma: base.gamma,
        sigma2,
        random_intercept: Some(RandomIntercept { tau2, blup }),
        kind: GpsKind::RandomIntercept,
    })
}

pub fn fit_gps(rows: &TreatmentRows<'_>, weights: &[f64], kind: GpsKind) -> Result<GpsFit> {
    match kind {
        GpsKind::Gee => fit_gps_rows(rows, weights),
        GpsKind::RandomIntercept => fit_gps_random_intercept_rows(rows, weights),
    }
}

pub fn fit_gps_gee(data: &PanelDataset, covariates: &[usize], weights: &[f64]) -> Result<GpsFit> {
    fit_gps_rows(&TreatmentFrame::from_panel(data, covariates).view(), weights)
}

pub fn fit_gps_random_intercept(
    data: &PanelDataset,
    covariates: &[usize],
    weights: &[f64],
) -> Result<GpsFit> {
    fit_gps_random_intercept_rows(&TreatmentFrame::from_panel(data, covariates).view(), weights)
}

/// Gaussian fit to the pooled dose distribution; numerator of stabilized weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalDoseFit {
    pub mu: f64,
    pub sigma2: f64,
}

impl MarginalDoseFit {
    pub fn fit(d: &[f64], weights: &[f64]) -> Self {
        let mu = crate::stats::weighted_mean(d, weights);
        let dev: Vec<f64> = d.iter().map(|v| v - mu).collect();
        MarginalDoseFit {
            mu,
            sigma2: mean_square(&dev, weights).max(SIGMA2_FLOOR),
        }
    }

    pub fn density(&self, d: f64) -> f64 {
        normal_density(d, self.mu, self.sigma2)
    }
}

/// Marginal dose density over the GPS: `f_marg(d) / e(d | x)`.
pub fn stabilized_weight(
    fit: &GpsFit,
    marg: &MarginalDoseFit,
    d: f64,
    x: &[f64],
    unit: Option<usize>,
) -> f64 {
    marg.density(d) / gps_density(fit, d, x, unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn frame_from(gen: impl Fn(&mut rand_chacha::ChaCha8Rng, usize) -> (f64, [f64; 2]), n: usize, k: usize, seed: u64) -> TreatmentFrame {
        let mut r = rng(seed);
        let mut f = TreatmentFrame { d: vec![], x: vec![], p: 2, units: vec![] };
        for u in 0..n {
            for _ in 0..k {
                let (d, x) = gen(&mut r, u);
                f.d.push(d);
                f.x.extend(x);
                f.units.push(u);
            }
        }
        f
    }

    #[test]
    fn perfect_fit_floors_sigma2() {
        let f = frame_from(
            |r, _| {
                let x = [r.random::<f64>(), r.random::<f64>()];
                (1.0 + 4.0 * x[0] + 2.0 * x[1], x)
            },
            10,
            3,
            1,
        );
        let w = vec![1.0; f.d.len()];
        let fit = fit_gps_rows(&f.view(), &w).unwrap();
        assert_eq!(fit.sigma2, SIGMA2_FLOOR);
        assert!((fit.gamma[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn independent_dose_has_null_slopes() {
        let f = frame_from(
            |r, _| {
                let x = [r.sample(StandardNormal), r.sample(StandardNormal)];
                (2.0 + r.sample::<f64, _>(StandardNormal), x)
            },
            10_000,
            1,
            2,
        );
        let w = vec![1.0; f.d.len()];
        let fit = fit_gps_rows(&f.view(), &w).unwrap();
        // slope SE = sigma / sqrt(n * var(x)) = 0.01
        for j in 1..3 {
            assert!(fit.gamma[j].abs() < 3.0 * 0.01, "{:?}", fit.gamma);
        }
        let w2: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        let fit2 = fit_gps_rows(&f.view(), &w2).unwrap();
        for (a, b) in fit.gamma.iter().zip(&fit2.gamma) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((fit.sigma2 - fit2.sigma2).abs() < 1e-12);
    }

    #[test]
    fn density_values() {
        let fit = GpsFit { gamma: vec![1.0, 0.0], sigma2: 1.0, random_intercept: None, kind: GpsKind::Gee };
        assert!((gps_density(&fit, 1.0, &[0.0], None) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert_eq!(gps_density(&fit, 11.0, &[0.0], None), DENSITY_FLOOR);
        let marg = MarginalDoseFit { mu: 1.0, sigma2: 1.0 };
        assert_eq!(stabilized_weight(&fit, &marg, 0.3, &[0.0], None), 1.0);
        let w = stabilized_weight(&fit, &marg, 11.0, &[0.0], None);
        assert_eq!(w, marg.density(11.0) / DENSITY_FLOOR);
    }

    #[test]
    fn density_integrates_to_one() {
        for sigma2 in [0.01, 1.0, 7.5] {
            let fit = GpsFit { gamma: vec![0.5, 2.0], sigma2, random_intercept: None, kind: GpsKind::Gee };
            let x = [0.3];
            let m = fit.mean(&x, None);
            let s = sigma2.sqrt();
            // composite Simpson over mean +- 8 sd
            let n = 4000;
            let (a, b) = (m - 8.0 * s, m + 8.0 * s);
            let h = (b - a) / n as f64;
            let mut acc = gps_density(&fit, a, &x, None) + gps_density(&fit, b, &x, None);
            for i in 1..n {
                let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += c * gps_density(&fit, a + i as f64 * h, &x, None);
            }
            let integral = acc * h / 3.0;
            assert!((integral - 1.0).abs() < 1e-3, "{integral}");
        }
    }

    #[test]
    fn random_intercept_equal_means_give_zero_blup() {
        // every unit has the same residual pattern, so unit means coincide
        let mut f = TreatmentFrame { d: vec![], x: vec![], p: 1, units: vec![] };
        for u in 0..5 {
            for (k, e) in [-0.5, 0.2, 0.3].iter().enumerate() {
                let x = k as f64;
                f.d.push(1.0 + 2.0 * x + e);
                f.x.push(x);
                f.units.push(u);
            }
        }
        let w = vec![1.0; f.d.len()];
        let fit = fit_gps_random_intercept_rows(&f.view(), &w).unwrap();
        let ri = fit.random_intercept.unwrap();
        assert_eq!(ri.tau2, 0.0);
        assert!(ri.blup.iter().all(|&b| b.abs() < 1e-12));
    }

    #[test]
    fn negative_between_variance_clips() {
        // unit means vary far less than sigma2 / K
        let mut f = TreatmentFrame { d: vec![], x: vec![], p: 0, units: vec![] };
        for u in 0..4 {
            let shift = 0.001 * u as f64;
            for e in [-3.0, 3.0] {
                f.d.push(shift + e);
                f.units.push(u);
            }
        }
        let w = vec![1.0; f.d.len()];
        let fit = fit_gps_random_intercept_rows(&f.view(), &w).unwrap();
        let ri = fit.random_intercept.unwrap();
        assert_eq!(ri.tau2, 0.0);
        assert!(ri.blup.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn single_unit_is_unidentifiable() {
        let f = TreatmentFrame { d: vec![1.0, 2.0, 4.0], x: vec![], p: 0, units: vec![0, 0, 0] };
        let err = fit_gps_random_intercept_rows(&f.view(), &[1.0; 3]).unwrap_err();
        assert!(matches!(err, Error::Unidentifiable(_)));
    }

    #[test]
    fn unseen_unit_gets_no_intercept() {
        let fit = GpsFit {
            gamma: vec![0.0],
            sigma2: 1.0,
            random_intercept: Some(RandomIntercept { tau2: 1.0, blup: vec![0.5] }),
            kind: GpsKind::RandomIntercept,
        };
        assert_eq!(fit.mean(&[], Some(0)), 0.5);
        assert_eq!(fit.mean(&[], Some(9)), 0.0);
        assert_eq!(fit.mean(&[], None), 0.0);
    }
}
