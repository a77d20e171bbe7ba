use longidose_core::dose_response::{
    fit_cov, posterior_apo, posterior_apo_with, DrawData, standard_draw, summarize_samples, EstimatorConfig, Method, SyntheticOutcomes,
};
use longidose_core::gee::LinkFamily;
use longidose_core::gps::GpsKind;
use longidose_core::panel::{PanelDataset, Trajectory};
use longidose_core::resample::{ResampleDraw, ResamplerKind, RngStream};
use longidose_core::sim::{replicate_dataset, true_apo_example1, DgpSpec, Example};
use longidose_core::Error;
use rand::Rng;
use rand_distr::StandardNormal;

/// Y = 2 + 0.5 d + x_effect * x + noise with d = 1 + conf * x + noise.
fn panel_with(n: usize, k: usize, conf: f64, x_effect: f64, seed: u64) -> PanelDataset {
    let mut rng = RngStream::new(seed, 0).rng();
    let t = (0..n)
        .map(|i| {
            let (mut y, mut d, mut x) = (vec![], vec![], vec![]);
            for _ in 0..k {
                let xv: f64 = rng.sample(StandardNormal);
                let dv = 1.0 + conf * xv + rng.sample::<f64, _>(StandardNormal);
                y.push(2.0 + 0.5 * dv + x_effect * xv + 0.5 * rng.sample::<f64, _>(StandardNormal));
                d.push(dv);
                x.push(vec![xv]);
            }
            Trajectory::new(format!("u{i}"), (1..=k as i64).collect(), y, d, x).unwrap()
        })
        .collect();
    PanelDataset::new(t, LinkFamily::GaussianIdentity, vec!["x".into()]).unwrap()
}

fn linear_panel(n: usize, k: usize, conf: f64, seed: u64) -> PanelDataset {
    panel_with(n, k, conf, 1.0, seed)
}

fn config(method: Method, resampler: ResamplerKind, grid: Vec<f64>, draws: usize) -> EstimatorConfig {
    EstimatorConfig { method, resampler, dose_grid: grid, n_draws: draws, ..EstimatorConfig::default() }
}

fn means(post: &longidose_core::dose_response::ApoPosterior) -> Vec<f64> {
    post.summary.iter().map(|s| s.mean).collect()
}

#[test]
fn linear_slope_recovered() {
    // dose depends on x, the outcome does not
    let data = panel_with(1000, 5, 0.8, 0.0, 1);
    let frame = DrawData::from_draw(&data, &ResampleDraw::with_weights(vec![1.0; 1000])).unwrap();
    let cfg = config(Method::Cov, ResamplerKind::Bb, vec![1.0], 1);
    let fit = fit_cov(&frame, &cfg).unwrap();
    assert!((fit.outcome_fit.xi[1] - 0.5).abs() < 0.03, "{:?}", fit.outcome_fit.xi);

    for method in [Method::Cov, Method::Wor] {
        let post = posterior_apo(&data, &config(method, ResamplerKind::Bb, vec![0.0, 1.0, 2.0], 40)).unwrap();
        let m = means(&post);
        let slope = (m[2] - m[0]) / 2.0;
        assert!((slope - 0.5).abs() < 0.05, "{method:?}: slope {slope}, curve {m:?}");
        assert!((m[1] - 2.5).abs() < 0.1, "{method:?}: {m:?}");
    }
}

#[test]
fn methods_agree_without_confounding() {
    let data = linear_panel(300, 5, 0.0, 2);
    let grid = vec![0.0, 1.0, 2.0];
    let cov = posterior_apo(&data, &config(Method::Cov, ResamplerKind::Bb, grid.clone(), 100)).unwrap();
    let wor = posterior_apo(&data, &config(Method::Wor, ResamplerKind::Bb, grid, 100)).unwrap();
    for (c, w) in cov.summary.iter().zip(&wor.summary) {
        let sd = c.var.max(w.var).sqrt();
        assert!((c.mean - w.mean).abs() < 2.0 * sd, "{c:?} vs {w:?}");
    }
}

fn map_outcomes(data: &PanelDataset, f: impl Fn(f64) -> f64) -> PanelDataset {
    let t = data
        .trajectories()
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.outcomes.iter_mut().for_each(|y| *y = f(*y));
            t
        })
        .collect();
    PanelDataset::new(t, data.family(), data.covariate_names().to_vec()).unwrap()
}

#[test]
fn wor_bb_is_affine_equivariant_in_the_outcome() {
    let data = linear_panel(80, 4, 0.7, 3);
    let (a, b) = (-3.0, 2.5);
    let shifted = map_outcomes(&data, |y| a + b * y);
    let cfg = config(Method::Wor, ResamplerKind::Bb, vec![0.0, 1.0, 2.0], 25);
    let p = posterior_apo(&data, &cfg).unwrap();
    let q = posterior_apo(&shifted, &cfg).unwrap();
    for (r, s) in p.samples.iter().zip(&q.samples) {
        for (u, v) in r.iter().zip(s) {
            assert!((a + b * u - v).abs() < 1e-8, "{u} -> {v}");
        }
    }
}

#[test]
fn equal_weights_collapse_the_posterior() {
    let data = linear_panel(60, 4, 0.7, 4);
    let n = data.n_units();
    for method in [Method::Cov, Method::Wor] {
        let cfg = config(method, ResamplerKind::Bb, vec![0.5, 1.5], 12);
        let post = posterior_apo_with(&data, &cfg, |_, _, _| ResampleDraw::with_weights(vec![1.0 / n as f64; n])).unwrap();
        assert_eq!(post.n_draws(), 12);
        for s in &post.summary {
            assert!(s.var.abs() < 1e-20, "{s:?}");
            assert_eq!(s.q025, s.q975);
        }
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let data = replicate_dataset(&DgpSpec::new(Example::One, 9), 1).unwrap();
    for (method, resampler) in [(Method::Cov, ResamplerKind::Dp), (Method::Wor, ResamplerKind::Bb)] {
        let mut cfg = config(method, resampler, vec![3.0, 4.0, 5.0], 16);
        cfg.gps_kind = GpsKind::RandomIntercept;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| posterior_apo(&data, &cfg).unwrap())
        };
        let (one, eight) = (run(1), run(8));
        assert_eq!(one.samples, eight.samples);
        assert_eq!(one.summary, eight.summary);
    }
}

/// Draws `s` with `s % every == 0` put all weight on a single unit.
fn sabotaged(every: usize) -> impl Fn(&PanelDataset, &EstimatorConfig, &mut rand_chacha::ChaCha8Rng) -> ResampleDraw + Sync {
    move |data, cfg, rng| {
        let draw = standard_draw(data, cfg, rng);
        let id = rng.get_stream() as usize;
        if id % every == 0 {
            let mut w = vec![0.0; data.n_units()];
            w[0] = 1.0;
            ResampleDraw::with_weights(w)
        } else {
            draw
        }
    }
}

#[test]
fn failed_draws_are_recorded_and_capped() {
    let data = linear_panel(40, 3, 0.5, 5);
    let cfg = config(Method::Cov, ResamplerKind::Bb, vec![1.0], 100);
    let post = posterior_apo_with(&data, &cfg, sabotaged(50)).unwrap();
    let failed: Vec<usize> = post.failures.iter().map(|f| f.draw).collect();
    assert_eq!(failed, vec![0, 50]);
    assert_eq!((post.samples.len(), post.n_draws()), (98, 100));
    assert!(!post.draw_ids.contains(&50));
    assert!(post.failures[0].message.contains("draw 0"));

    match posterior_apo_with(&data, &cfg, sabotaged(10)) {
        Err(Error::ExcessFailures { failed, total, .. }) => assert_eq!((failed, total), (10, 100)),
        other => panic!("expected ExcessFailures, got {other:?}"),
    }
}

#[test]
fn summary_quantiles_of_normal_samples() {
    let mut rng = RngStream::new(12, 0).rng();
    let samples: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.sample(StandardNormal)]).collect();
    let s = &summarize_samples(&[0.0], &samples).unwrap()[0];
    assert!((s.q025 + 1.96).abs() < 0.06, "{s:?}");
    assert!((s.q975 - 1.96).abs() < 0.06, "{s:?}");
    assert!(s.median.abs() < 0.04 && (s.var - 1.0).abs() < 0.05);
}

#[test]
fn example1_cov_near_truth_at_dose_3() {
    let data = replicate_dataset(&DgpSpec::new(Example::One, 2024), 1).unwrap();
    let post = posterior_apo(&data, &config(Method::Cov, ResamplerKind::Bb, vec![3.0], 500)).unwrap();
    let est = post.summary[0].mean;
    assert!((est - true_apo_example1(3.0)).abs() < 0.1, "{est} vs {}", true_apo_example1(3.0));
    assert!((true_apo_example1(3.0) - 6.046).abs() < 1e-3);
}

#[test]
fn dp_summaries_are_ordered() {
    let data = replicate_dataset(&DgpSpec::new(Example::Two, 77), 1).unwrap();
    for mode in [SyntheticOutcomes::Mixture, SyntheticOutcomes::All] {
        let mut cfg = config(Method::Wor, ResamplerKind::Dp, vec![3.0, 4.0, 5.0], 30);
        cfg.family = LinkFamily::PoissonLog;
        cfg.synthetic_outcomes = mode;
        let post = posterior_apo(&data, &cfg).unwrap();
        assert!(post.failures.is_empty());
        for s in &post.summary {
            assert!(s.q025 <= s.median && s.median <= s.q975 && s.q025 > 0.0, "{s:?}");
        }
    }
}
