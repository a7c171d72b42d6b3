use apst::eval::compare_with_baseline;
use apst::{
    approximate, find_neighbors, mean_absolute_error, mean_error_relative, predict, walk_forward_backtest,
    ApproxParams, BacktestReport, ForecastConfig, PriceSeries,
};
use proptest::prelude::*;

fn walk(steps: Vec<f64>) -> Vec<f64> {
    let mut x = 100.0;
    steps
        .into_iter()
        .map(|d| {
            x = (x + d).max(1.0);
            x
        })
        .collect()
}

fn config() -> impl Strategy<Value = ForecastConfig> {
    (1usize..5, 1usize..5, 1usize..3).prop_map(|(w, k, m)| ForecastConfig::new(w, k, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_are_non_negative_and_zero_only_on_exact_match(
        pairs in prop::collection::vec((1.0f64..500.0, 1.0f64..500.0), 1..40),
    ) {
        let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        let mae = mean_absolute_error(&p, &a).unwrap();
        let mer = mean_error_relative(&p, &a, mean).unwrap();
        prop_assert!(mae >= 0.0 && mer >= 0.0);
        prop_assert_eq!(mae == 0.0, p == a);
        prop_assert_eq!(mean_absolute_error(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(mean_error_relative(&a, &a, mean).unwrap(), 0.0);
    }

    #[test]
    fn prediction_is_deterministic(
        ap in prop::collection::vec(0.0f64..100.0, 20..150),
        cfg in config(),
    ) {
        prop_assert_eq!(predict(&ap, &cfg), predict(&ap, &cfg));
    }

    #[test]
    fn shifting_keeps_neighbours_and_shifts_forecast(
        ap in prop::collection::vec((0u16..2000).prop_map(|v| f64::from(v) / 8.0), 20..150),
        cfg in config(),
    ) {
        // Eighths below 256 keep every shifted difference exact.
        let shifted: Vec<f64> = ap.iter().map(|v| v + 64.0).collect();
        let a = predict(&ap, &cfg).unwrap();
        let b = predict(&shifted, &cfg).unwrap();
        let idx = |f: &apst::Forecast| f.neighbors_used.iter().map(|n| n.start_index).collect::<Vec<_>>();
        prop_assert_eq!(idx(&a), idx(&b));
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((y - (x + 64.0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn report_is_consistent(
        steps in prop::collection::vec(-2.0f64..2.0, 27 * 25..27 * 40),
        cfg in config(),
    ) {
        let series = PriceSeries::new(walk(steps)).unwrap();
        let report: BacktestReport =
            walk_forward_backtest(&series, ApproxParams::new(27, 3), cfg, 0.7).unwrap().report;
        prop_assert!(!report.steps.is_empty());
        let (p, a) = (report.predicted(), report.actual());
        let mer = mean_error_relative(&p, &a, report.period_mean).unwrap();
        let mae = mean_absolute_error(&p, &a).unwrap();
        prop_assert!((report.mer_percent - mer).abs() <= 1e-9 * mer.max(1e-300));
        prop_assert!((report.mae - mae).abs() <= 1e-9 * mae.max(1e-300));
        let mut last = 0;
        for step in &report.steps {
            prop_assert!(step.step_index > last);
            last = step.step_index;
            prop_assert_eq!(step.predicted.len(), cfg.horizon);
            prop_assert_eq!(step.actual.len(), cfg.horizon);
            for j in 0..cfg.horizon {
                prop_assert!((step.absolute_errors[j] - (step.predicted[j] - step.actual[j]).abs()).abs() <= 1e-12);
            }
        }
        let cmp = compare_with_baseline(&series, &report).unwrap();
        prop_assert_eq!(cmp.rows.len(), report.prediction_count);
        prop_assert_eq!(cmp.apst.mae, report.mae);
    }

    #[test]
    fn report_survives_json_round_trip(
        steps in prop::collection::vec(-2.0f64..2.0, 9 * 30..9 * 50),
        cfg in config(),
    ) {
        let series = PriceSeries::new(walk(steps)).unwrap();
        let report = walk_forward_backtest(&series, ApproxParams::new(9, 3), cfg, 0.6).unwrap().report;
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: BacktestReport = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, report);
    }
}

#[test]
fn approximated_windows_match_neighbour_successors() {
    let raw: Vec<f64> = (0..27 * 20).map(|i| 50.0 + ((i * 13) % 29) as f64).collect();
    let ap = approximate(&PriceSeries::new(raw).unwrap(), ApproxParams::new(27, 3)).unwrap();
    let cfg = ForecastConfig::new(3, 4, 2);
    let pattern = &ap.values()[ap.len() - 3..];
    for n in find_neighbors(ap.values(), pattern, &cfg).unwrap() {
        assert_eq!(n.successors, ap.values()[n.start_index + 3..n.start_index + 5]);
        assert!(n.start_index + 3 + 2 <= ap.len());
        assert!(n.start_index + 3 <= ap.len() - 3);
    }
}
