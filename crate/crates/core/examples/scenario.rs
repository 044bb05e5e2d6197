//! Plain versus tuned LSTM on the synthetic period-20 scenario.
//!
//! `cargo run --release -p flowcast --example scenario -- [seq_len] [hidden] [epochs] [lr]`

use std::time::Instant;

use flowcast::{compare, gen_periodic, lstm::TrainConfig, tuner::PipelineConfig, Method, SynthSpec};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).map_or(default, |s| s.parse().unwrap());
    let config = PipelineConfig {
        train: TrainConfig {
            seq_len: arg(0, 500.0) as usize,
            hidden_dim: arg(1, 100.0) as usize,
            epochs: arg(2, 50.0) as usize,
            learning_rate: arg(3, 1e-3),
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    };
    let total = Instant::now();
    for seed in 0..5 {
        let start = Instant::now();
        let (series, _) = gen_periodic(&SynthSpec::scenario(10_000, 20, seed)).unwrap();
        let report = compare(&series, &[Method::LstmPlain, Method::LstmTuned], &config, seed).unwrap();
        let plain = report.get(Method::LstmPlain).unwrap();
        let tuned = report.get(Method::LstmTuned).unwrap();
        println!(
            "seed {seed}: plain {:.4} tuned {:.4} (n={:?}) {:.1}s",
            plain.rmse,
            tuned.rmse,
            report.tuned_window,
            start.elapsed().as_secs_f64()
        );
    }
    println!("total {:.1}s", total.elapsed().as_secs_f64());
}
