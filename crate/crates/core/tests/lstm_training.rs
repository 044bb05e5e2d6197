use flowcast::lstm::{train_holdout, TrainConfig};
use flowcast::{data_transform, gen_periodic, SplitSpec, SynthSpec, WindowSpec};

#[test]
fn curves_stay_finite_and_close_on_periodic_data() {
    let (series, _) = gen_periodic(&SynthSpec::scenario(10_000, 20, 2)).unwrap();
    let set = data_transform(
        &series.values().select_columns(&[0, series.target_index()]),
        &["signal_1".into(), "target".into()],
        WindowSpec::block(10),
    )
    .unwrap();
    let config = TrainConfig {
        seq_len: 20,
        epochs: 40,
        hidden_dim: 8,
        learning_rate: 0.01,
        seed: 3,
        ..TrainConfig::default()
    };
    let (trained, holdout) = train_holdout(&set, &SplitSpec { seed: 1, ..SplitSpec::default() }, &config).unwrap();
    assert_eq!(trained.train_loss_curve.len(), 40);
    assert!(trained.train_loss_curve.iter().chain(&trained.test_loss_curve).all(|v| v.is_finite()));
    let (train_end, test_end) = (
        *trained.train_loss_curve.last().unwrap(),
        *trained.test_loss_curve.last().unwrap(),
    );
    assert!(
        (test_end - train_end).abs() <= 0.2 * train_end.max(test_end),
        "train {train_end} test {test_end}"
    );
    assert!(test_end < trained.test_loss_curve[0]);

    let first = trained.predict(&holdout.test).unwrap();
    assert_eq!(first, trained.predict(&holdout.test).unwrap());
    assert!(first.iter().all(|p| p.is_finite()));
}
