mod common;

use amod_core::forecast::dist::{sigmoid, softplus};
use amod_core::forecast::metrics::{write_metric_table, METRIC_HEADER};
use amod_core::forecast::train::mean_nll;
use amod_core::forecast::{
    day_samples, evaluate, gcn_forward, lstm_step, mpiw, picp, train, Dataset, DistFamily, ForecastModel, ModelConfig,
    TrainConfig, ALL_FAMILIES,
};
use amod_core::ingest::{historical_moments, StdDivisor};
use amod_core::network::DemandTensor;
use ndarray::{array, s, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{head_cases, head_gradient_error, model_gradient_error, two_zone_model};

#[test]
fn likelihood_heads_match_finite_differences() {
    for family in ALL_FAMILIES {
        let e = head_gradient_error(family);
        assert!(e < 1e-4, "{family}: worst relative error {e:e}");
    }
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    for family in ALL_FAMILIES {
        let e = model_gradient_error(family);
        assert!(e < 1e-4, "{family}: worst relative error {e:e}");
    }
}

#[test]
fn forward_equals_composed_layers() {
    let model = two_zone_model(DistFamily::NegativeBinomial, 5);
    let lags = array![[3.0, 1.0], [0.0, 5.0]];
    let hist = array![[2.0, 2.5], [4.0, 1.0]];
    let w = &model.weights;
    let scale = model.config.input_scale;
    let mut h = Array2::zeros((2, 3));
    let mut c = Array2::zeros((2, 3));
    for t in 0..2 {
        let mut x = lags.slice(s![.., t..t + 1]).mapv(|v| v / scale);
        for layer in &w.gcn {
            x = gcn_forward(&x, &model.a_hat, layer).unwrap();
        }
        (h, c) = lstm_step(&x, &h, &c, &w.lstm).unwrap();
    }
    let raw = h.dot(&w.recent_w) + &w.recent_b + hist.mapv(|v| v / scale).dot(&w.hist_w) + &w.hist_b;
    let f = model.forward(&lags, &hist).unwrap();
    for i in 0..2 {
        for k in 0..2 {
            let theta = f.theta(i, k);
            let (m, r) = (raw[[i, 2 * k]], raw[[i, 2 * k + 1]]);
            assert!((theta[0] - softplus(m) - 1e-9).abs() < 1e-12);
            assert!((theta[1] - softplus(r) - 1e-9).abs() < 1e-12);
        }
    }
    // The ZIP head's first slot goes through the sigmoid.
    let zip = two_zone_model(DistFamily::ZeroInflatedPoisson, 5);
    let raw = zip.raw_outputs(&lags, &hist).unwrap();
    let theta = *zip.forward(&lags, &hist).unwrap().theta(1, 0);
    assert!((theta[0] - sigmoid(raw[[1, 0]])).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn forward_is_zone_permutation_equivariant(seed in any::<u64>()) {
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adj = Array2::<f64>::eye(n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.5) {
                    adj[[i, j]] = 1.0;
                    adj[[j, i]] = 1.0;
                }
            }
        }
        let deg: Vec<f64> = (0..n).map(|i| adj.row(i).sum()).collect();
        let a_hat = Array2::from_shape_fn((n, n), |(i, j)| adj[[i, j]] / (deg[i] * deg[j]).sqrt());
        let cfg = ModelConfig { family: DistFamily::Normal, lag: 3, hidden: 4, gcn_layers: 2, horizon: 2, input_scale: 5.0 };
        let model = ForecastModel::new(cfg.clone(), a_hat.clone(), seed).unwrap();
        let lags = Array2::from_shape_fn((n, 3), |_| rng.random_range(0..9) as f64);
        let hist = Array2::from_shape_fn((n, 2), |_| rng.random_range(0.0..9.0));
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted = ForecastModel {
            a_hat: Array2::from_shape_fn((n, n), |(i, j)| a_hat[[perm[i], perm[j]]]),
            ..model.clone()
        };
        let lags_p = Array2::from_shape_fn((n, 3), |(i, l)| lags[[perm[i], l]]);
        let hist_p = Array2::from_shape_fn((n, 2), |(i, h)| hist[[perm[i], h]]);
        let base = model.forward(&lags, &hist).unwrap();
        let moved = permuted.forward(&lags_p, &hist_p).unwrap();
        for (i, &from) in perm.iter().enumerate() {
            for h in 0..2 {
                let (a, b) = (base.theta(from, h), moved.theta(i, h));
                prop_assert!((a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn likelihoods_are_normalized() {
    for family in ALL_FAMILIES {
        for (theta, _) in head_cases(family) {
            let total = if family.is_discrete() {
                (0..2000).map(|k| (-family.nll(&theta, k as f64).unwrap()).exp()).sum::<f64>()
            } else {
                let (mu, sd) = (theta[0], theta[1]);
                let lo = if family == DistFamily::TruncatedNormal { 0.0 } else { mu - 12.0 * sd };
                let hi = mu.max(0.0) + 12.0 * sd;
                let steps = 200_000;
                let dx = (hi - lo) / steps as f64;
                // Trapezoid rule.
                (0..=steps)
                    .map(|s| {
                        let w = if s == 0 || s == steps { 0.5 } else { 1.0 };
                        w * (-family.nll(&theta, lo + s as f64 * dx).unwrap()).exp()
                    })
                    .sum::<f64>()
                    * dx
            };
            assert!((total - 1.0).abs() < 1e-3, "{family} {theta:?} integrates to {total}");
        }
    }
}

fn constant_days(value: u32, days: usize, intervals: usize) -> Vec<DemandTensor> {
    (0..days).map(|_| DemandTensor::from_rows(vec![vec![value; intervals]; 2]).unwrap()).collect()
}

#[test]
fn constant_demand_fits_its_mean() {
    let days = constant_days(6, 8, 12);
    let moments = historical_moments(&days, StdDivisor::Population).unwrap();
    let cfg = ModelConfig { family: DistFamily::Poisson, lag: 3, hidden: 4, gcn_layers: 1, horizon: 2, input_scale: 10.0 };
    let model = ForecastModel::new(cfg, array![[0.5, 0.5], [0.5, 0.5]], 3).unwrap();
    let samples: Vec<_> = days.iter().map(|d| day_samples(d, &moments, 3, 2)).collect();
    let data = Dataset::chronological(samples, 2);
    let tc = TrainConfig { epochs: 300, learning_rate: 0.05, patience: 300, ..TrainConfig::default() };
    let out = train(&model, &data, &tc).unwrap();
    let s = &data.validation[0][0];
    let f = out.model.forward(&s.lags, &s.hist).unwrap();
    for i in 0..2 {
        for h in 0..2 {
            let lambda = f.mean(i, h);
            assert!((lambda - 6.0).abs() <= 0.05 * 6.0, "fitted lambda {lambda}");
        }
    }
    let trace = &out.trace;
    assert!(trace.windows(2).all(|w| w[1].best_validation_nll <= w[0].best_validation_nll));
}

#[test]
fn zero_epochs_leave_the_model_alone() {
    let days = constant_days(2, 3, 8);
    let moments = historical_moments(&days, StdDivisor::Population).unwrap();
    let cfg = ModelConfig { family: DistFamily::NegativeBinomial, lag: 2, hidden: 3, gcn_layers: 1, horizon: 2, input_scale: 10.0 };
    let model = ForecastModel::new(cfg, array![[0.5, 0.5], [0.5, 0.5]], 9).unwrap();
    let data = Dataset::chronological(days.iter().map(|d| day_samples(d, &moments, 2, 2)).collect(), 1);
    let out = train(&model, &data, &TrainConfig { epochs: 0, ..TrainConfig::default() }).unwrap();
    assert_eq!(out.model, model);
    assert!(out.trace.is_empty() && out.best_epoch.is_none());
    assert!(mean_nll(&out.model, &data.validation).unwrap().is_finite());
}

#[test]
fn interval_metrics_examples() {
    assert_eq!(mpiw(&[(1.0, 3.0), (2.0, 6.0)]).unwrap(), 3.0);
    assert_eq!(picp(&[(1.0, 3.0), (6.0, 7.0)], &[2.0, 5.0]).unwrap(), 0.5);
}

#[test]
fn metric_table_has_the_five_reported_columns() {
    let report = evaluate(DistFamily::Poisson, &[[4.0, 0.0], [2.0, 0.0]], &[3.0, 0.0], 95.0).unwrap();
    let mut buf = Vec::new();
    write_metric_table(&[(DistFamily::Poisson, 95.0, report)], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,pi,nll,mae,mape,mpiw,picp"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), METRIC_HEADER.len());
    assert_eq!(&row[..2], &["poisson", "95"]);
    assert!(row[2..].iter().all(|v| v.parse::<f64>().is_ok()));
}
