//! Posterior resampling: flat-Dirichlet (Bayesian bootstrap) weights,
//! truncated stick-breaking weights, and Dirichlet-process draws of whole
//! trajectories.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::panel::PanelDataset;

/// Identifies an independent, reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A child stream keyed by `index`, independent of this stream's own draws.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_F42D_4C95_7F2D))),
            stream: index,
        }
    }
}

/// Uniform on the open interval (0, 1).
#[inline]
pub(crate) fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Dirichlet(1, ..., 1) weights as normalized unit-rate exponentials.
pub fn dirichlet_flat_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    assert!(n >= 1, "Dirichlet weights need n >= 1");
    let mut w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct StickWeights {
    /// Renormalized to sum to one.
    pub weights: Vec<f64>,
    pub alpha_n: f64,
    pub epsilon: f64,
    pub truncated_at: usize,
    /// Stick length left unbroken at truncation, `prod (1 - V_k)`.
    pub tail_mass: f64,
}

impl StickWeights {
    /// The un-normalized `p_j = V_j prod_{k<j} (1 - V_k)`.
    pub fn raw_weights(&self) -> Vec<f64> {
        let scale = 1.0 - self.tail_mass;
        self.weights.iter().map(|w| w * scale).collect()
    }
}

/// Stick-breaking with supplied break fractions `V_1, V_2, ...`. Stops at the
/// first `j` whose remaining stick falls below `epsilon`, or at `j_max`.
pub fn stick_breaking_from_fractions(
    fractions: impl IntoIterator<Item = f64>,
    alpha_n: f64,
    epsilon: f64,
    j_max: usize,
) -> StickWeights {
    let mut weights = Vec::with_capacity(j_max.min(4096));
    let mut remaining = 1.0;
    for v in fractions.into_iter().take(j_max) {
        weights.push(v * remaining);
        remaining *= 1.0 - v;
        if remaining < epsilon {
            break;
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    StickWeights {
        truncated_at: weights.len(),
        weights,
        alpha_n,
        epsilon,
        tail_mass: remaining,
    }
}

/// `V_j ~ Beta(1, alpha_n)` drawn by inverse CDF, `1 - u^(1/alpha_n)`.
pub fn stick_breaking<R: RngCore + ?Sized>(
    alpha_n: f64,
    epsilon: f64,
    j_max: usize,
    rng: &mut R,
) -> StickWeights {
    assert!(alpha_n > 0.0 && epsilon > 0.0 && j_max >= 1);
    let inv = 1.0 / alpha_n;
    let fractions = std::iter::repeat_with(|| 1.0 - open_unit(rng).powf(inv));
    stick_breaking_from_fractions(fractions, alpha_n, epsilon, j_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplerKind {
    #[default]
    Bb,
    Dp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Empirical,
    /// Covariates and doses copied from `source`; outcomes to be regenerated.
    BaseMeasure,
}

/// One trajectory atom of a draw: a copy of observed unit `source`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Atom {
    pub source: usize,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleDraw {
    pub atoms: Vec<Atom>,
    pub weights: Vec<f64>,
    pub stick: Option<StickWeights>,
    pub kind: ResamplerKind,
}

impl ResampleDraw {
    /// Observed trajectories in order with caller-supplied weights.
    pub fn with_weights(weights: Vec<f64>) -> Self {
        ResampleDraw {
            atoms: (0..weights.len())
                .map(|source| Atom { source, origin: Origin::Empirical })
                .collect(),
            weights,
            stick: None,
            kind: ResamplerKind::Bb,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn base_measure_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.origin == Origin::BaseMeasure).count()
    }
}

/// Bayesian bootstrap: every observed trajectory once, Dirichlet(1,...,1) weights.
pub fn draw_bb<R: Rng + ?Sized>(data: &PanelDataset, rng: &mut R) -> ResampleDraw {
    let weights = dirichlet_flat_weights(data.n_units(), rng);
    let mut d = ResampleDraw::with_weights(weights);
    d.kind = ResamplerKind::Bb;
    d
}

/// Truncated DP posterior draw. Each atom copies a uniformly chosen observed
/// trajectory; with probability `alpha / (alpha + n)` it is flagged as coming
/// from the base measure. Weights are stick-breaking with `alpha + n`; when the
/// stick is exhausted before `j_target` only that many atoms are drawn.
pub fn draw_dp<R: Rng + ?Sized>(
    data: &PanelDataset,
    alpha: f64,
    j_target: usize,
    epsilon: f64,
    rng: &mut R,
) -> ResampleDraw {
    let n = data.n_units();
    let alpha_n = alpha + n as f64;
    let stick = stick_breaking(alpha_n, epsilon, j_target, rng);
    let p_base = alpha / alpha_n;
    let atoms = (0..stick.weights.len())
        .map(|_| {
            let origin = if open_unit(rng) < p_base {
                Origin::BaseMeasure
            } else {
                Origin::Empirical
            };
            Atom {
                source: rng.random_range(0..n),
                origin,
            }
        })
        .collect();
    ResampleDraw {
        atoms,
        weights: stick.weights.clone(),
        stick: Some(stick),
        kind: ResamplerKind::Dp,
    }
}
