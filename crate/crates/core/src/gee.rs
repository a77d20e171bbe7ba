//! Weighted generalized estimating equations for Gaussian-identity and
//! Poisson-log marginal mean models.
//!
//! The estimating function solved here is
//!
//! ```text
//! U(xi) = sum_i D_i^T W_i^{1/2} R_i^{-1} W_i^{1/2} A_i^{-1/2} (y_i - mu_i)
//! ```
//!
//! where `D_i = A_i^{-1/2} diag(dmu/deta) X_i`, `A_i = diag(V(mu))`, `R_i` is the
//! working correlation of cluster `i` and `W_i` holds the per-row observation
//! weights. The dispersion is a common positive factor and is left out. Weights
//! enter linearly (probability weights), so the root does not depend on their
//! overall scale.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add_outer, solve_spd, symmetrize};

pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
/// Poisson fits abort once any positively weighted linear predictor exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFamily {
    #[default]
    GaussianIdentity,
    PoissonLog,
}

impl LinkFamily {
    #[inline]
    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            LinkFamily::GaussianIdentity => eta,
            LinkFamily::PoissonLog => eta.exp(),
        }
    }

    #[inline]
    pub fn variance(self, mu: f64) -> f64 {
        match self {
            LinkFamily::GaussianIdentity => 1.0,
            LinkFamily::PoissonLog => mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    #[default]
    Independent,
    Exchangeable,
}

/// Working correlation with its estimated parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkingCorrelation {
    Independent,
    Exchangeable { rho: f64 },
}

impl WorkingCorrelation {
    fn rho(self) -> f64 {
        match self {
            WorkingCorrelation::Independent => 0.0,
            WorkingCorrelation::Exchangeable { rho } => rho,
        }
    }
}

/// Row-major design: response, covariate row and cluster (unit) per row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Design {
    n_cols: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    units: Vec<usize>,
}

impl Design {
    pub fn with_capacity(n_cols: usize, rows: usize) -> Self {
        Design {
            n_cols,
            x: Vec::with_capacity(rows * n_cols),
            y: Vec::with_capacity(rows),
            units: Vec::with_capacity(rows),
        }
    }

    pub fn from_parts(x: Vec<f64>, n_cols: usize, y: Vec<f64>, units: Vec<usize>) -> Result<Self> {
        if n_cols == 0 || x.len() != y.len() * n_cols || units.len() != y.len() {
            return Err(Error::InvalidData(format!(
                "design shape mismatch: {} cells, {} responses, {} units, {n_cols} columns",
                x.len(),
                y.len(),
                units.len()
            )));
        }
        Ok(Design { n_cols, x, y, units })
    }

    pub fn push_row(&mut self, y: f64, x: &[f64], unit: usize) {
        debug_assert_eq!(x.len(), self.n_cols);
        self.x.extend_from_slice(x);
        self.y.push(y);
        self.units.push(unit);
    }

    /// Appends a row and returns its covariate slot for the caller to fill.
    pub(crate) fn push_row_with(&mut self, y: f64, unit: usize) -> &mut [f64] {
        let start = self.x.len();
        self.x.resize(start + self.n_cols, 0.0);
        self.y.push(y);
        self.units.push(unit);
        &mut self.x[start..]
    }

    pub(crate) fn set_response(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn units(&self) -> &[usize] {
        &self.units
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeeFit {
    pub xi: Vec<f64>,
    pub family: LinkFamily,
    pub corr: WorkingCorrelation,
    /// Weighted mean squared Pearson residual.
    pub dispersion: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the estimating function at `xi`, with the weights rescaled
    /// to sum to one so the value does not depend on the weight scale.
    pub ee_norm: f64,
}

impl GeeFit {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        dot(&self.xi, x)
    }
}

pub fn predict_mean(fit: &GeeFit, x: &[f64]) -> f64 {
    fit.family.inverse_link(fit.linear_predictor(x))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Positively weighted rows grouped by cluster, in order of first appearance.
fn clusters(design: &Design, weights: &[f64]) -> Vec<Vec<usize>> {
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, (&u, &w)) in design.units.iter().zip(weights).enumerate() {
        if w > 0.0 {
            let g = *index.entry(u).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(i);
        }
    }
    groups
}

struct Accumulator<'a> {
    design: &'a Design,
    family: LinkFamily,
    weights: &'a [f64],
    clusters: Option<Vec<Vec<usize>>>,
}

impl Accumulator<'_> {
    /// Adds the estimating function into `u` and, when given, its negative
    /// Jacobian (expected information) into `h`. With `guard`, fails on a
    /// linear predictor beyond [`DIVERGENCE_LIMIT`].
    fn run(
        &self,
        xi: &[f64],
        rho: f64,
        mut h: Option<&mut [f64]>,
        u: &mut [f64],
        guard: Option<usize>,
    ) -> Result<()> {
        let p = self.design.n_cols;
        u.fill(0.0);
        if let Some(h) = h.as_deref_mut() {
            h.fill(0.0);
        }
        // (w, g, r): weight, dmu/deta / sqrt(V), Pearson residual
        let row_terms = |i: usize| -> Result<(f64, f64, f64)> {
            let w = self.weights[i];
            let eta = dot(xi, self.design.row(i));
            if let Some(iterations) = guard {
                if !(eta.abs() <= DIVERGENCE_LIMIT) && self.family == LinkFamily::PoissonLog {
                    return Err(Error::Divergence {
                        iterations,
                        limit: DIVERGENCE_LIMIT,
                    });
                }
            }
            let y = self.design.y[i];
            Ok(match self.family {
                LinkFamily::GaussianIdentity => (w, 1.0, y - eta),
                LinkFamily::PoissonLog => {
                    let mu = eta.exp();
                    let s = mu.sqrt();
                    (w, s, (y - mu) / s)
                }
            })
        };

        match &self.clusters {
            Some(groups) => {
                let mut sg = vec![0.0; p];
                for g in groups {
                    let k = g.len() as f64;
                    let c = rho / (1.0 + (k - 1.0) * rho);
                    let f = 1.0 / (1.0 - rho);
                    sg.fill(0.0);
                    let mut sz = 0.0;
                    for &i in g {
                        let (w, g, r) = row_terms(i)?;
                        let (a, b) = (w.sqrt() * g, w.sqrt() * r);
                        let x = self.design.row(i);
                        for j in 0..p {
                            u[j] += f * a * b * x[j];
                            sg[j] += a * x[j];
                        }
                        sz += b;
                        if let Some(h) = h.as_deref_mut() {
                            add_outer(h, p, x, f * a * a);
                        }
                    }
                    for j in 0..p {
                        u[j] -= f * c * sg[j] * sz;
                    }
                    if let Some(h) = h.as_deref_mut() {
                        add_outer(h, p, &sg, -f * c);
                    }
                }
            }
            None => {
                for i in 0..self.design.n_rows() {
                    if self.weights[i] <= 0.0 {
                        continue;
                    }
                    let (w, g, r) = row_terms(i)?;
                    let x = self.design.row(i);
                    let wgr = w * g * r;
                    for j in 0..p {
                        u[j] += wgr * x[j];
                    }
                    if let Some(h) = h.as_deref_mut() {
                        add_outer(h, p, x, w * g * g);
                    }
                }
            }
        }
        if let Some(h) = h {
            symmetrize(h, p);
        }
        Ok(())
    }

    fn pearson(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.design.n_rows())
            .map(|i| {
                let mu = self.family.inverse_link(dot(xi, self.design.row(i)));
                (self.design.y[i] - mu) / self.family.variance(mu).sqrt()
            })
            .collect()
    }

    fn dispersion(&self, resid: &[f64]) -> f64 {
        let (s, tw) = resid
            .iter()
            .zip(self.weights)
            .filter(|(_, &w)| w > 0.0)
            .fold((0.0, 0.0), |(s, t), (r, &w)| (s + w * r * r, t + w));
        (s / tw).max(f64::MIN_POSITIVE)
    }

    /// Weighted moment estimator of the exchangeable correlation.
    fn rho(&self, resid: &[f64], phi: f64) -> f64 {
        let Some(groups) = &self.clusters else {
            return 0.0;
        };
        let kmax = groups.iter().map(Vec::len).max().unwrap_or(1);
        if kmax < 2 || phi <= f64::MIN_POSITIVE {
            return 0.0;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for g in groups {
            let k = g.len() as f64;
            if g.len() < 2 {
                continue;
            }
            let wbar = g.iter().map(|&i| self.weights[i]).sum::<f64>() / k;
            let s: f64 = g.iter().map(|&i| resid[i]).sum();
            let ss: f64 = g.iter().map(|&i| resid[i] * resid[i]).sum();
            num += wbar * 0.5 * (s * s - ss);
            den += wbar * 0.5 * k * (k - 1.0);
        }
        let lower = -1.0 / (kmax as f64 - 1.0) + 1e-6;
        (num / (phi * den)).clamp(lower, 0.999)
    }
}

fn check_weights(design: &Design, weights: &[f64]) -> Result<f64> {
    if weights.len() != design.n_rows() {
        return Err(Error::InvalidData(format!(
            "{} weights for {} rows",
            weights.len(),
            design.n_rows()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidData("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidData("at least one weight must be positive".into()));
    }
    Ok(total)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Clone, Copy)]
enum RhoMode {
    Independent,
    Fixed(f64),
    Estimated,
}

/// Solves the weighted estimating equation by Fisher scoring (IRLS). For an
/// exchangeable structure the correlation is re-estimated every sweep.
pub fn fit_gee(
    design: &Design,
    family: LinkFamily,
    corr: CorrelationKind,
    weights: &[f64],
) -> Result<GeeFit> {
    let mode = match corr {
        CorrelationKind::Independent => RhoMode::Independent,
        CorrelationKind::Exchangeable => RhoMode::Estimated,
    };
    fit_impl(design, family, mode, weights)
}

/// Like [`fit_gee`] but holds the working correlation fixed.
pub fn fit_gee_fixed(
    design: &Design,
    family: LinkFamily,
    corr: WorkingCorrelation,
    weights: &[f64],
) -> Result<GeeFit> {
    let mode = match corr {
        WorkingCorrelation::Independent => RhoMode::Independent,
        WorkingCorrelation::Exchangeable { rho } => RhoMode::Fixed(rho),
    };
    fit_impl(design, family, mode, weights)
}

fn fit_impl(design: &Design, family: LinkFamily, mode: RhoMode, weights: &[f64]) -> Result<GeeFit> {
    let total_w = check_weights(design, weights)?;
    let p = design.n_cols;
    let n_pos = weights.iter().filter(|&&w| w > 0.0).count();
    if n_pos < p {
        return Err(Error::SingularDesign(format!(
            "{n_pos} positively weighted rows for {p} coefficients"
        )));
    }
    let acc = Accumulator {
        design,
        family,
        weights,
        clusters: (!matches!(mode, RhoMode::Independent)).then(|| clusters(design, weights)),
    };
    let singular = || Error::SingularDesign("design is rank deficient on the positively weighted rows".into());

    // Starting values from one weighted least-squares pass on a working response.
    let mut h = vec![0.0; p * p];
    let mut xi = vec![0.0; p];
    let ybar = crate::stats::weighted_mean(&design.y, weights);
    for i in 0..design.n_rows() {
        let w = weights[i];
        if w <= 0.0 {
            continue;
        }
        let y = design.y[i];
        let (z, ww) = match family {
            LinkFamily::GaussianIdentity => (y, w),
            LinkFamily::PoissonLog => {
                let mu0 = 0.5 * (y + ybar);
                if !(mu0 > 0.0) {
                    return Err(Error::Divergence {
                        iterations: 0,
                        limit: DIVERGENCE_LIMIT,
                    });
                }
                (mu0.ln() + (y - mu0) / mu0, w * mu0)
            }
        };
        let x = design.row(i);
        for j in 0..p {
            xi[j] += ww * z * x[j];
        }
        add_outer(&mut h, p, x, ww);
    }
    symmetrize(&mut h, p);
    solve_spd(&mut h, p, &mut xi).ok_or_else(singular)?;

    let mut u = vec![0.0; p];
    let mut rho = match mode {
        RhoMode::Fixed(r) => r,
        _ => 0.0,
    };
    let mut iterations = 1;
    let mut converged =
        family == LinkFamily::GaussianIdentity && matches!(mode, RhoMode::Independent);
    if !converged {
        for it in 1..=MAX_ITERATIONS {
            iterations = it;
            if matches!(mode, RhoMode::Estimated) {
                let r = acc.pearson(&xi);
                rho = acc.rho(&r, acc.dispersion(&r));
            }
            acc.run(&xi, rho, Some(&mut h), &mut u, Some(it))?;
            let mut delta = u.clone();
            // Rank was verified by the starting pass, so a later collapse means
            // the Poisson weights mu are vanishing on part of the design.
            solve_spd(&mut h, p, &mut delta).ok_or_else(|| match family {
                LinkFamily::PoissonLog => Error::Divergence {
                    iterations: it,
                    limit: DIVERGENCE_LIMIT,
                },
                LinkFamily::GaussianIdentity => singular(),
            })?;
            for (c, d) in xi.iter_mut().zip(&delta) {
                *c += d;
            }
            if max_abs(&delta) < TOLERANCE {
                converged = true;
                break;
            }
        }
    }

    let resid = acc.pearson(&xi);
    let dispersion = acc.dispersion(&resid);
    acc.run(&xi, rho, None, &mut u, Some(iterations))?;
    let ee_norm = max_abs(&u) / total_w;
    let corr = match mode {
        RhoMode::Independent => WorkingCorrelation::Independent,
        _ => WorkingCorrelation::Exchangeable { rho },
    };
    Ok(GeeFit {
        xi,
        family,
        corr,
        dispersion,
        converged: converged && ee_norm < TOLERANCE,
        iterations,
        ee_norm,
    })
}

/// The weighted estimating function at a candidate `xi` (raw weight scale).
pub fn estimating_equation(
    xi: &[f64],
    design: &Design,
    family: LinkFamily,
    corr: WorkingCorrelation,
    weights: &[f64],
) -> Vec<f64> {
    let acc = Accumulator {
        design,
        family,
        weights,
        clusters: matches!(corr, WorkingCorrelation::Exchangeable { .. })
            .then(|| clusters(design, weights)),
    };
    let mut u = vec![0.0; design.n_cols];
    acc.run(xi, corr.rho(), None, &mut u, None)
        .expect("unguarded accumulation cannot fail");
    u
}
