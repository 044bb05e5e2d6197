use flowcast::tuner::{
    grid_search, manual_run_prepared, prepare, tune_periods, CandidateTrainer, PipelineConfig,
};
use flowcast::{
    gen_periodic, lstm::TrainConfig, manual_run, optimized_lstm, ForestConfig, GridAxis, Matrix,
    PeriodSet, RawSeries, SupervisedSet, SynthSpec, WindowMode,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> PipelineConfig {
    PipelineConfig {
        train: TrainConfig {
            seq_len: 50,
            epochs: 15,
            hidden_dim: 6,
            learning_rate: 0.01,
            ..TrainConfig::default()
        },
        forest: ForestConfig {
            n_trees: 10,
            ..ForestConfig::default()
        },
        ..PipelineConfig::default()
    }
}

fn periods(values: &[usize]) -> PeriodSet {
    PeriodSet {
        periods: values.to_vec(),
        run_lengths: values.to_vec(),
    }
}

/// Returns a fixed RMSE per window size.
struct Schedule(Vec<(usize, f64)>);

impl CandidateTrainer for Schedule {
    type Model = (usize, f64);

    fn train_candidate(&self, _set: &SupervisedSet, n: usize) -> flowcast::Result<(usize, f64)> {
        Ok(*self.0.iter().find(|(k, _)| *k == n).unwrap())
    }

    fn score(model: &(usize, f64)) -> f64 {
        model.1
    }
}

proptest! {
    #[test]
    fn best_is_never_beaten_by_the_trace(rmses in prop::collection::vec(0.0f64..10.0, 1..=5)) {
        let (series, _) = gen_periodic(&SynthSpec::clean_sine(200, 20, 0)).unwrap();
        let prepared = prepare(&series, &small_config().forest, 0.95, 0).unwrap();
        let ns: Vec<usize> = (1..=rmses.len()).collect();
        let schedule = Schedule(ns.iter().copied().zip(rmses.iter().copied()).collect());
        let result = tune_periods(&prepared, periods(&ns), WindowMode::Block, &schedule).unwrap();
        prop_assert_eq!(result.trace.len(), ns.len());
        for entry in &result.trace {
            prop_assert!(result.best_rmse <= entry.test_rmse.unwrap());
        }
        let first_min = rmses.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(result.best_rmse, first_min);
        prop_assert_eq!(result.best_n, 1 + rmses.iter().position(|&r| r == first_min).unwrap());
    }
}

/// Covariate is white noise and the target repeats it three steps later, so a
/// window must span four rows to contain the value being predicted.
fn lagged_series(d: usize, seed: u64) -> RawSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rows: Vec<[f64; 2]> = (0..d)
        .map(|t| [x[t], if t >= 3 { x[t - 3] } else { 0.0 } + 0.01 * rng.random::<f64>()])
        .collect();
    RawSeries::new(
        Matrix::from_rows(&rows).unwrap(),
        vec!["x".into(), "y".into()],
        1,
    )
    .unwrap()
}

#[test]
fn picks_the_window_that_covers_the_lag() {
    let series = lagged_series(2400, 3);
    let config = small_config();
    let prepared = prepare(&series, &config.forest, 0.95, 11).unwrap();
    let trainer = flowcast::tuner::lstm_trainer(&config, 11);
    let tuned = tune_periods(&prepared, periods(&[2, 4, 8]), WindowMode::Block, &trainer).unwrap();

    // exhaustive oracle with the same seeds
    let scores: Vec<(usize, f64)> = [2, 4, 8]
        .iter()
        .map(|&n| (n, manual_run_prepared(&prepared, n, &config, 11).unwrap().trained.test_rmse))
        .collect();
    let oracle = scores.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(tuned.best_n, oracle.0, "{scores:?}");
    assert_eq!(tuned.best_rmse, oracle.1);
    assert_eq!(tuned.best_n, 4, "{scores:?}");
}

#[test]
fn manual_run_reproduces_the_tuned_model() {
    let (series, _) = gen_periodic(&SynthSpec::scenario(600, 20, 5)).unwrap();
    let config = small_config();
    let tuned = optimized_lstm(&series, &config, 5).unwrap();
    let (manual, selection) = manual_run(&series, tuned.best_n, &config, 5).unwrap();
    assert_eq!(manual.trained.test_rmse, tuned.best_rmse);
    assert_eq!(manual.trained.model, tuned.best.trained.model);
    assert_eq!(selection, tuned.selection);

    let again = optimized_lstm(&series, &config, 5).unwrap();
    let json = |r: &flowcast::TunedResult<flowcast::tuner::Fitted>| serde_json::to_string(&r.trace).unwrap();
    assert_eq!(json(&again), json(&tuned));
    let ns: Vec<usize> = tuned.trace.iter().map(|e| e.n).collect();
    let mut distinct = ns.clone();
    distinct.dedup();
    assert_eq!(ns, distinct);
}

#[test]
fn grids_emit_one_row_per_value() {
    let (series, _) = gen_periodic(&SynthSpec::scenario(240, 20, 1)).unwrap();
    let config = PipelineConfig {
        train: TrainConfig {
            epochs: 2,
            ..small_config().train
        },
        ..small_config()
    };
    let prepared = prepare(&series, &config.forest, 0.95, 1).unwrap();
    let seq = grid_search(&prepared, 3, &config, 1, GridAxis::SeqLen, &[10, 50, 100, 250, 500, 1000]).unwrap();
    assert_eq!(seq.len(), 6);
    let hidden = grid_search(&prepared, 3, &config, 1, GridAxis::Hidden, &[10, 20, 50, 100, 200]).unwrap();
    assert_eq!(hidden.len(), 5);
    assert!(hidden.iter().all(|r| r.test_rmse.is_finite() && r.axis == GridAxis::Hidden));
    assert_eq!(hidden.iter().map(|r| r.value).collect::<Vec<_>>(), vec![10, 20, 50, 100, 200]);
}
