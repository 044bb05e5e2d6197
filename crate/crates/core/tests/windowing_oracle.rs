use flowcast::{data_transform, Matrix, WindowMode, WindowSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(m: usize) -> Vec<String> {
    (0..m).map(|c| format!("v{c}")).collect()
}

/// Straightforward index arithmetic over a `Vec<Vec<f64>>`.
fn naive(rows: &[Vec<f64>], n: usize, mode: WindowMode) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = rows.len();
    let m = rows[0].len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
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
                let mut feats = Vec::new();
                for row in &rows[i - n..i] {
                    feats.extend_from_slice(row);
                }
                feats.extend_from_slice(&rows[i][..m - 1]);
                xs.push(feats);
                ys.push(rows[i][m - 1]);
            }
        }
    }
    (xs, ys)
}

#[test]
fn matches_naive_transform_on_every_small_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    for d in 2..=50 {
        for m in 2..=6 {
            let rows: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..m).map(|_| rng.random_range(-1e3..1e3)).collect())
                .collect();
            let matrix = Matrix::from_rows(&rows).unwrap();
            for n in (1..).take_while(|n| 2 * n < d) {
                for mode in [WindowMode::Block, WindowMode::Slide] {
                    let set = data_transform(&matrix, &names(m), WindowSpec { n, mode }).unwrap();
                    let (xs, ys) = naive(&rows, n, mode);
                    assert_eq!(set.len(), xs.len(), "d={d} m={m} n={n} {mode}");
                    for (r, expected) in xs.iter().enumerate() {
                        let got: Vec<u64> = set.x.row(r).iter().map(|v| v.to_bits()).collect();
                        let want: Vec<u64> = expected.iter().map(|v| v.to_bits()).collect();
                        assert_eq!(got, want, "d={d} m={m} n={n} {mode} row {r}");
                    }
                    let got: Vec<u64> = set.y.iter().map(|v| v.to_bits()).collect();
                    let want: Vec<u64> = ys.iter().map(|v| v.to_bits()).collect();
                    assert_eq!(got, want);
                    assert_eq!(set.layout.len(), set.n_features());
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 2000);
}

#[test]
fn layout_points_at_the_copied_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (d, m) = (23, 4);
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect();
    let matrix = Matrix::from_rows(&rows).unwrap();
    for mode in [WindowMode::Block, WindowMode::Slide] {
        let set = data_transform(&matrix, &names(m), WindowSpec { n: 3, mode }).unwrap();
        for r in 0..set.len() {
            let t = set.target_rows[r] as i64;
            assert_eq!(set.y[r], rows[t as usize][m - 1]);
            for (k, slot) in set.layout.iter().enumerate() {
                let source = rows[(t + slot.offset) as usize][slot.column];
                assert_eq!(set.x.get(r, k).to_bits(), source.to_bits());
            }
        }
    }
}

#[test]
fn three_row_merge_of_a_six_by_three_matrix() {
    // rows r1..r6, with r_i = [i1, i2, i3]
    let rows: Vec<Vec<f64>> = (1..=6)
        .map(|i| (1..=3).map(|c| (10 * i + c) as f64).collect())
        .collect();
    let matrix = Matrix::from_rows(&rows).unwrap();
    let set = data_transform(&matrix, &names(3), WindowSpec::block(3)).unwrap();
    assert_eq!(set.len(), 2);
    assert_eq!(set.x.row(0), &[11.0, 12.0, 13.0, 21.0, 22.0, 23.0, 31.0, 32.0]);
    assert_eq!(set.y[0], 33.0);
    assert_eq!(set.x.row(1), &[41.0, 42.0, 43.0, 51.0, 52.0, 53.0, 61.0, 62.0]);
    assert_eq!(set.y[1], 63.0);
}
