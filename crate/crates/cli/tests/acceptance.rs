//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and fails if any criterion fails.
//!
//! `cargo test -p flowcast-cli --test acceptance -- --nocapture`

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use flowcast::evalkit::ReferenceResults;
use flowcast::importance::ImportanceEntry;
use flowcast::lstm::{backward, forward_sequence, sequence_loss, CellState, LstmModel};
use flowcast::period::smallest_periods;
use flowcast::tuner::{prepare, tune_periods, CandidateTrainer, PipelineConfig};
use flowcast::{
    compare, cycle, data_transform, gen_periodic, optimized_lstm, rmse, select_features,
    BoundedHeap, ForestConfig, ImportanceRanking, Matrix, Method, PeriodSet, SupervisedSet,
    SynthSpec, TrainConfig, WindowMode, WindowSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: impl Into<String>) -> Outcome {
    let detail = detail.into();
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1 -------------------------------------------------------------------------

fn reference_metadata() -> Outcome {
    let (series, _) = gen_periodic(&SynthSpec::scenario(400, 20, 0)).unwrap();
    let config = PipelineConfig {
        forest: ForestConfig {
            n_trees: 5,
            ..ForestConfig::default()
        },
        ..PipelineConfig::default()
    };
    let report = compare(&series, &[Method::Persistence], &config, 0).map_err(|e| e.to_string())?;
    let json = serde_json::to_value(&report).unwrap();
    let reference = &json["reference"];
    let expected = ReferenceResults::default();
    check(
        reference["random_forest_rmse"] == 40.21
            && reference["lstm_rmse"] == 19.87
            && reference["lstm_tuned_rmse"] == 9.13
            && reference["improvement_pct"] == 54.05
            && report.reference == expected,
        "reference figures for the original dataset carried as report metadata; synthetic oracle suite substituted",
    )
}

// 2, 3 ----------------------------------------------------------------------

struct Instance {
    model: LstmModel,
    window: Matrix,
    targets: Vec<f64>,
    init: CellState,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.random_range(1..=5);
    let hidden = rng.random_range(1..=8);
    let steps = rng.random_range(1..=10);
    let mut model = LstmModel::init(input, hidden, seed).unwrap();
    for block in model.params_mut() {
        for p in block.iter_mut() {
            *p += rng.random_range(-0.5..0.5);
        }
    }
    let window = Matrix::from_vec(
        steps,
        input,
        (0..steps * input).map(|_| rng.random_range(-1.5..1.5)).collect(),
    )
    .unwrap();
    Instance {
        model,
        window,
        targets: (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect(),
        init: CellState {
            cell: (0..hidden).map(|_| rng.random_range(-0.5..0.5)).collect(),
            hidden: (0..hidden).map(|_| rng.random_range(-0.5..0.5)).collect(),
        },
    }
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let instances = 25;
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for seed in 0..instances {
        let inst = instance(seed);
        let loss = |m: &LstmModel| {
            let out = forward_sequence(m, &inst.window, &inst.init).unwrap();
            sequence_loss(&out.predictions, &inst.targets)
        };
        let out = forward_sequence(&inst.model, &inst.window, &inst.init).unwrap();
        let (grads, _) = backward(&inst.model, &out, &inst.targets).unwrap();
        let blocks = inst.model.params().len();
        for b in 0..blocks {
            for k in 0..inst.model.params()[b].len() {
                let mut plus = inst.model.clone();
                plus.params_mut()[b][k] += step;
                let mut minus = inst.model.clone();
                minus.params_mut()[b][k] -= step;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
                let analytic = grads.0.params()[b][k];
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((analytic - numeric).abs() / denom);
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-4 && secs < 30.0,
        format!("{instances} instances, {checked} gradients, worst relative error {worst:.2e}, {secs:.2} s"),
    )
}

fn cell_identity() -> Outcome {
    let mut steps = 0;
    for seed in 100..120 {
        let inst = instance(seed);
        let out = forward_sequence(&inst.model, &inst.window, &inst.init).unwrap();
        for cache in &out.caches {
            for j in 0..inst.model.hidden_dim {
                let residual = cache.cell[j]
                    - (cache.forget[j] * cache.prev_cell[j] + cache.input[j] * cache.candidate[j]);
                if residual != 0.0 {
                    return Err(format!("seed {seed}: residual {residual:e}"));
                }
                for g in [cache.forget[j], cache.input[j], cache.output[j]] {
                    if !(g > 0.0 && g < 1.0) {
                        return Err(format!("seed {seed}: gate value {g}"));
                    }
                }
            }
            steps += 1;
        }
    }
    Ok(format!("{steps} forward steps, residual exactly 0, gates inside (0,1)"))
}

// 4 -------------------------------------------------------------------------

fn brute_force_runs(y: &[f64]) -> Vec<usize> {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Vec::new();
    }
    let scaled: Vec<f64> = y.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let above: Vec<bool> = scaled.iter().map(|v| v - mean > 0.0).collect();
    let mut lengths = Vec::new();
    for start in 0..above.len() {
        if !above[start] || (start > 0 && above[start - 1]) {
            continue;
        }
        let mut end = start;
        while end < above.len() && above[end] {
            end += 1;
        }
        if end < above.len() {
            lengths.push(end - start);
        }
    }
    lengths.sort_unstable();
    lengths.dedup();
    lengths.truncate(5);
    lengths
}

fn period_oracle() -> Outcome {
    for period in [8usize, 20, 50] {
        let p = period as f64;
        let y: Vec<f64> = (0..period * 10)
            .map(|t| (2.0 * PI * t as f64 / p + PI / p).sin())
            .collect();
        let found = cycle(&y).unwrap().periods;
        if found != vec![period / 2] {
            return Err(format!("sinusoid of period {period} gave {found:?}"));
        }
    }
    let mut heap = BoundedHeap::new(5);
    for v in [7, 3, 9, 3, 12, 5, 8, 2] {
        heap.push(v);
    }
    let stream = heap.into_sorted_vec();
    if stream != vec![2, 3, 5, 7, 8] || smallest_periods(&[7, 3, 9, 3, 12, 5, 8, 2]) != stream {
        return Err(format!("run-length stream gave {stream:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let len = rng.random_range(2..300);
        let y: Vec<f64> = if trial % 2 == 0 {
            (0..len).map(|_| rng.random_range(-5.0..5.0)).collect()
        } else {
            (0..len).map(|_| rng.random_range(0..4) as f64).collect()
        };
        let (got, want) = (cycle(&y).unwrap().periods, brute_force_runs(&y));
        if got != want {
            return Err(format!("random series {trial}: {got:?} vs brute force {want:?}"));
        }
    }
    Ok("periods 8/20/50 give 4/10/25; stream gives [2,3,5,7,8]; 1000 random series agree".into())
}

// 5 -------------------------------------------------------------------------

fn naive_window(rows: &[Vec<f64>], n: usize, mode: WindowMode) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = rows.len();
    let m = rows[0].len();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    match mode {
        WindowMode::Block => {
            for w in 0..d / n {
                let mut feats = Vec::new();
                for r in w * n..w * n + n {
                    for c in 0..m {
                        if r == w * n + n - 1 && c == m - 1 {
                            ys.push(rows[r][c]);
                        } else {
                            feats.push(rows[r][c]);
                        }
                    }
                }
                xs.push(feats);
            }
        }
        WindowMode::Slide => {
            for i in n..d {
                let mut feats: Vec<f64> = rows[i - n..i].iter().flatten().copied().collect();
                feats.extend_from_slice(&rows[i][..m - 1]);
                xs.push(feats);
                ys.push(rows[i][m - 1]);
            }
        }
    }
    (xs, ys)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn windowing_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut cases = 0;
    for d in 2..=50 {
        for m in 2..=6 {
            let rows: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..m).map(|_| rng.random_range(-1e3..1e3)).collect())
                .collect();
            let matrix = Matrix::from_rows(&rows).unwrap();
            let names: Vec<String> = (0..m).map(|c| format!("c{c}")).collect();
            for n in (1..).take_while(|n| 2 * n < d) {
                for mode in [WindowMode::Block, WindowMode::Slide] {
                    let set = data_transform(&matrix, &names, WindowSpec { n, mode }).unwrap();
                    let (xs, ys) = naive_window(&rows, n, mode);
                    let same = set.len() == xs.len()
                        && xs.iter().enumerate().all(|(r, x)| bits(set.x.row(r)) == bits(x))
                        && bits(&set.y) == bits(&ys);
                    if !same {
                        return Err(format!("mismatch at d={d} m'={m} n={n} {mode}"));
                    }
                    cases += 1;
                }
            }
        }
    }
    let rows: Vec<Vec<f64>> = (1..=6)
        .map(|i| (1..=3).map(|c| (10 * i + c) as f64).collect())
        .collect();
    let names: Vec<String> = vec!["a".into(), "b".into(), "y".into()];
    let set = data_transform(&Matrix::from_rows(&rows).unwrap(), &names, WindowSpec::block(3)).unwrap();
    let merged = set.len() == 2
        && set.x.row(0) == [11.0, 12.0, 13.0, 21.0, 22.0, 23.0, 31.0, 32.0]
        && set.y[0] == 33.0
        && set.x.row(1) == [41.0, 42.0, 43.0, 51.0, 52.0, 53.0, 61.0, 62.0]
        && set.y[1] == 63.0;
    check(
        merged,
        format!("{cases} (d, m', n, mode) cases bit-exact; 6x3 matrix with n=3 merges into 2 rows"),
    )
}

// 6 -------------------------------------------------------------------------

fn ranking(weights: &[f64]) -> ImportanceRanking {
    ImportanceRanking {
        entries: weights
            .iter()
            .enumerate()
            .map(|(column, &weight)| ImportanceEntry { column, weight })
            .collect(),
    }
}

fn selection_semantics() -> Outcome {
    let both = select_features(&ranking(&[0.6, 0.4]), 0.95).unwrap().selected;
    let first = select_features(&ranking(&[0.96, 0.04]), 0.95).unwrap().selected;
    if both != vec![0, 1] || first != vec![0] {
        return Err(format!("[0.6,0.4] -> {both:?}, [0.96,0.04] -> {first:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..2000 {
        let len = rng.random_range(1..12);
        let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.001..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        let k = select_features(&ranking(&w), 0.95).unwrap().selected.len();
        let prefix = |l: usize| w[..l].iter().sum::<f64>();
        let minimal = prefix(k - 1) <= 0.95 && (k == len || prefix(k) > 0.95);
        if !minimal {
            return Err(format!("trial {trial}: prefix of {k} is not minimal for {w:?}"));
        }
    }
    Ok("[0.6,0.4] keeps both, [0.96,0.04] keeps the first; 2000 random rankings give minimal prefixes".into())
}

// 7 -------------------------------------------------------------------------

fn tuning_benefit() -> Outcome {
    let start = Instant::now();
    let config = PipelineConfig::default();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..5 {
        let (series, _) = gen_periodic(&SynthSpec::scenario(10_000, 20, seed)).unwrap();
        let report = compare(&series, &[Method::LstmPlain, Method::LstmTuned], &config, seed)
            .map_err(|e| e.to_string())?;
        let plain = report.get(Method::LstmPlain).unwrap().rmse;
        let tuned = report.get(Method::LstmTuned).unwrap().rmse;
        if tuned <= plain {
            wins += 1;
        }
        lines.push(format!(
            "seed {seed}: plain {plain:.4} tuned {tuned:.4} (n={})",
            report.tuned_window.unwrap()
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        wins >= 4 && secs < 600.0,
        format!("tuned <= plain on {wins}/5 seeds in {secs:.0} s [{}]", lines.join("; ")),
    )
}

// 8 -------------------------------------------------------------------------

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

fn argmin() -> Outcome {
    let (series, _) = gen_periodic(&SynthSpec::clean_sine(400, 20, 0)).unwrap();
    let prepared = prepare(&series, &ForestConfig { n_trees: 5, ..ForestConfig::default() }, 0.95, 0).unwrap();
    // neither monotone in n nor minimal at either end
    let schedule = Schedule(vec![(2, 3.1), (4, 2.2), (5, 2.9), (7, 0.9), (9, 1.7)]);
    let periods = PeriodSet {
        periods: vec![2, 4, 5, 7, 9],
        run_lengths: vec![2, 4, 5, 7, 9],
    };
    let tuned = tune_periods(&prepared, periods, WindowMode::Block, &schedule).map_err(|e| e.to_string())?;
    check(
        tuned.best_n == 7 && tuned.best_rmse == 0.9 && tuned.best == (7, 0.9) && tuned.trace.len() == 5,
        format!("schedule [3.1, 2.2, 2.9, 0.9, 1.7] -> n={} rmse={}", tuned.best_n, tuned.best_rmse),
    )
}

// 9 -------------------------------------------------------------------------

fn run_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_flowcast"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    run_cli(&["synth", "--out", "s.csv", "--rows", "3000", "--seed", "7"], d)?;
    let tune = |suffix: &str| {
        let model = format!("model{suffix}.json");
        let trace = format!("trace{suffix}.json");
        run_cli(
            &[
                "tune", "--input", "s.csv", "--seed", "7", "--epochs", "5", "--hidden", "16",
                "--seq-len", "100", "--out-model", &model, "--out-trace", &trace,
            ],
            d,
        )
    };
    tune("-a")?;
    tune("-b")?;
    let read = |name: &str| std::fs::read(d.join(name)).unwrap();
    let model_same = read("model-a.json") == read("model-b.json");
    let trace_same = read("trace-a.json") == read("trace-b.json");
    check(
        model_same && trace_same,
        format!(
            "two `tune --seed 7` runs: model identical {model_same}, trace identical {trace_same} ({} model bytes)",
            read("model-a.json").len()
        ),
    )
}

// 10 ------------------------------------------------------------------------

fn rmse_units() -> Outcome {
    let a = rmse(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
    let t = [3.0, -1.0, 0.25, 8.0];
    let same = rmse(&t, &t).unwrap();
    let shifted: Vec<f64> = t.iter().map(|v| v + 2.0).collect();
    let offset = rmse(&shifted, &t).unwrap();
    check(
        (a - 2.5f64.sqrt()).abs() < 1e-12 && same == 0.0 && (offset - 2.0).abs() < 1e-12,
        format!("rmse([1,2],[0,0]) = {a:.15}, identity = {same}, offset-2 = {offset}"),
    )
}

// 11 ------------------------------------------------------------------------

fn linear_scaling() -> Outcome {
    let config = PipelineConfig {
        train: TrainConfig {
            seq_len: 100,
            epochs: 10,
            hidden_dim: 16,
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    };
    let (small, large) = (5_000, 10_000);
    // L must match at both sizes: take the first seed whose period sets agree
    let (seed, a, b) = (0..20)
        .find_map(|seed| {
            let a = gen_periodic(&SynthSpec::scenario(small, 20, seed)).unwrap().0;
            let b = gen_periodic(&SynthSpec::scenario(large, 20, seed)).unwrap().0;
            let same = cycle(&a.target()).unwrap().periods == cycle(&b.target()).unwrap().periods;
            same.then_some((seed, a, b))
        })
        .ok_or("no seed with equal period sets at both sizes")?;
    let periods = cycle(&a.target()).unwrap().periods;
    let time = |series: &flowcast::RawSeries| {
        (0..3)
            .map(|_| {
                let start = Instant::now();
                optimized_lstm(series, &config, seed).unwrap();
                start.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (ta, tb) = (time(&a), time(&b));
    let ratio = tb / ta;
    check(
        (1.6..=2.6).contains(&ratio),
        format!(
            "N={small}: {ta:.2} s, N={large}: {tb:.2} s, ratio {ratio:.2} (seed {seed}, periods {periods:?}, S=100 H=16 C=10)"
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("reference results carried as metadata", reference_metadata),
        ("BPTT gradients match finite differences", gradient_check),
        ("cell-state update identity and gate bounds", cell_identity),
        ("period detection oracle", period_oracle),
        ("windowing oracle", windowing_oracle),
        ("feature selection semantics", selection_semantics),
        ("tuned LSTM beats plain LSTM on the synthetic scenario", tuning_benefit),
        ("argmin over a non-monotone schedule", argmin),
        ("tune is byte-for-byte deterministic", determinism),
        ("rmse unit values", rmse_units),
        ("tune time scales linearly in N", linear_scaling),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        let (status, detail) = match run() {
            Ok(detail) => ("PASS", detail),
            Err(detail) => {
                failed.push(id);
                ("FAIL", detail)
            }
        };
        println!("criterion {id:>2}: {status} {name}: {detail}");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
