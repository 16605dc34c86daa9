//! Generated benchmark tables.
//!
//! The shipped benchmarks mirror the shape of twelve real tuning tasks (space
//! size, direction, best value, and the grid position of the optimum) with
//! values drawn from a seeded landscape. They are stand-ins, not measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::manager::{Table, TableMeta};
use crate::model::{Dimension, Direction, Scalar, SearchSpace};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub name: &'static str,
    pub direction: Direction,
    pub metric: &'static str,
    pub dims: Vec<(&'static str, Vec<Scalar>)>,
    /// 1-based grid ordinal of the optimum.
    pub optimum_at: usize,
    pub best: f64,
    pub worst: f64,
    pub seed: u64,
}

fn ints(v: &[i64]) -> Vec<Scalar> {
    v.iter().map(|&i| Scalar::Int(i)).collect()
}

fn floats(v: &[f64]) -> Vec<Scalar> {
    v.iter().map(|&f| Scalar::Float(f)).collect()
}

fn strs(v: &[&str]) -> Vec<Scalar> {
    v.iter().map(|&s| Scalar::Str(s.to_string())).collect()
}

/// Values rounded to four decimals; every config but the optimum is
/// strictly worse than `best`.
pub fn generate(spec: &SyntheticSpec) -> Table {
    let space = SearchSpace::new(
        spec.dims
            .iter()
            .map(|(n, v)| Dimension::new(*n, v.clone()))
            .collect(),
    )
    .expect("synthetic dims are valid");
    let card = space.cardinality();
    assert!((1..=card).contains(&spec.optimum_at), "optimum outside the space");
    let opt = spec.optimum_at - 1;
    let opt_pos = space.positions_at(opt).expect("in range");
    let lens: Vec<usize> = space.dimensions().iter().map(|d| d.values.len()).collect();
    let range = (spec.best - spec.worst).abs();
    let sign = match spec.direction {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values = (0..card)
        .map(|n| {
            if n == opt {
                return round4(spec.best);
            }
            let pos = space.positions_at(n).expect("in range");
            let dist = pos
                .iter()
                .zip(&opt_pos)
                .zip(&lens)
                .map(|((&p, &o), &l)| p.abs_diff(o) as f64 / (l.max(2) - 1) as f64)
                .sum::<f64>()
                / lens.len() as f64;
            let u: f64 = rng.random();
            let q = 0.02 + 0.98 * (0.55 * dist + 0.45 * u);
            round4(spec.best - sign * q * range)
        })
        .collect();
    Table::new(
        TableMeta {
            name: spec.name.to_string(),
            direction: spec.direction,
            metric: spec.metric.to_string(),
            count: card,
        },
        space,
        values,
    )
    .expect("generated table is complete")
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// The twelve benchmark tables shipped under `data/benchmarks`.
pub fn shipped() -> Vec<SyntheticSpec> {
    use Direction::{Maximize, Minimize};
    let siren = || {
        vec![
            ("first_omega", ints(&[10, 20, 30, 40, 50])),
            ("hidden_omega", ints(&[10, 20, 30, 40, 50])),
        ]
    };
    vec![
        SyntheticSpec {
            name: "boston",
            direction: Maximize,
            metric: "r2",
            dims: vec![
                ("n-estimators", ints(&[100, 200, 300])),
                ("max-depth", vec![Scalar::Str("None".into()), Scalar::Int(10), Scalar::Int(20)]),
                ("min-samples-split", ints(&[2, 5, 10])),
                ("min-samples-leaf", ints(&[1, 2, 5])),
                ("max-features", strs(&["sqrt", "log2"])),
            ],
            optimum_at: 1,
            best: 0.841,
            worst: 0.70,
            seed: 1,
        },
        SyntheticSpec {
            name: "sentiment_lstm",
            direction: Maximize,
            metric: "accuracy",
            dims: vec![
                ("hidden_size", ints(&[32, 64, 128, 256])),
                ("learning_rate", floats(&[0.1, 0.01, 0.001, 0.0001, 0.00001])),
            ],
            optimum_at: 1,
            best: 0.96,
            worst: 0.50,
            seed: 2,
        },
        SyntheticSpec {
            name: "tensor_wheel",
            direction: Maximize,
            metric: "psnr",
            dims: vec![
                ("rank", ints(&[2, 3, 4, 5])),
                ("core_rank", ints(&[2, 3, 4, 5])),
                ("learning_rate", floats(&[0.1, 0.01, 0.001, 0.0001])),
            ],
            optimum_at: 30,
            best: 41.50,
            worst: 25.0,
            seed: 3,
        },
        SyntheticSpec {
            name: "siren_segment",
            direction: Maximize,
            metric: "psnr",
            dims: siren(),
            optimum_at: 20,
            best: 16.63,
            worst: 8.0,
            seed: 4,
        },
        SyntheticSpec {
            name: "siren_denoise",
            direction: Maximize,
            metric: "psnr",
            dims: siren(),
            optimum_at: 18,
            best: 24.78,
            worst: 15.0,
            seed: 5,
        },
        SyntheticSpec {
            name: "mae",
            direction: Maximize,
            metric: "top1",
            dims: vec![
                ("mask_ratio", floats(&[0.5, 0.6, 0.7, 0.75])),
                ("epochs", ints(&[100, 200, 400, 800, 1600])),
            ],
            optimum_at: 16,
            best: 85.0,
            worst: 80.0,
            seed: 6,
        },
        SyntheticSpec {
            name: "resnet",
            direction: Minimize,
            metric: "top1_error",
            dims: vec![
                ("depth", ints(&[18, 50, 101])),
                ("width", ints(&[1, 2, 4])),
                ("optimizer", strs(&["sgd"])),
                ("epochs", ints(&[90])),
            ],
            optimum_at: 9,
            best: 21.43,
            worst: 30.0,
            seed: 7,
        },
        SyntheticSpec {
            name: "lcbench",
            direction: Maximize,
            metric: "accuracy",
            dims: vec![
                ("batch_size", ints(&[16, 32, 64, 128, 256])),
                ("learning_rate", floats(&[0.1, 0.03, 0.01, 0.003, 0.001])),
                ("momentum", floats(&[0.1, 0.5, 0.9, 0.99])),
                ("weight_decay", floats(&[0.00001, 0.0001, 0.001, 0.01])),
                ("num_layers", ints(&[1, 2, 3, 4, 5])),
            ],
            optimum_at: 1300,
            best: 88.29,
            worst: 40.0,
            seed: 8,
        },
        SyntheticSpec {
            name: "nnunet_btcv",
            direction: Maximize,
            metric: "dice",
            dims: vec![
                (
                    "variant",
                    strs(&[
                        "v01", "v02", "v03", "v04", "v05", "v06", "v07", "v08", "v09", "v10",
                        "v11", "v12", "v13", "v14", "v15", "v16", "v17", "v18", "v19",
                    ]),
                ),
                ("optimizer", strs(&["sgd"])),
                ("epochs", ints(&[1000])),
                ("patch", strs(&["128x128x128"])),
                ("folds", ints(&[5])),
            ],
            optimum_at: 3,
            best: 85.04,
            worst: 75.0,
            seed: 9,
        },
        SyntheticSpec {
            name: "nnunet_brats",
            direction: Maximize,
            metric: "dice",
            dims: vec![
                ("learning_rate", floats(&[0.01, 0.005, 0.001])),
                ("batch_size", ints(&[2, 4, 8])),
                ("loss", strs(&["dice", "dice_ce"])),
            ],
            optimum_at: 12,
            best: 82.45,
            worst: 70.0,
            seed: 10,
        },
        SyntheticSpec {
            name: "graphsage",
            direction: Maximize,
            metric: "f1",
            dims: vec![
                ("hidden", ints(&[16, 32, 64, 128, 256])),
                ("learning_rate", floats(&[0.1, 0.05, 0.01, 0.005, 0.001])),
            ],
            optimum_at: 20,
            best: 89.28,
            worst: 60.0,
            seed: 11,
        },
        SyntheticSpec {
            name: "chagas",
            direction: Maximize,
            metric: "auc",
            dims: vec![
                ("hidden", ints(&[64, 128, 256, 512, 1024])),
                ("dropout", floats(&[0.1, 0.3, 0.5])),
                ("learning_rate", floats(&[0.001, 0.0001])),
                ("batch_size", ints(&[32])),
            ],
            optimum_at: 1,
            best: 0.754,
            worst: 0.50,
            seed: 12,
        },
    ]
}

/// A random table of at most `max_card` configs with 1 to 3 dimensions.
pub fn random_table(seed: u64, max_card: usize) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dims = rng.random_range(1..=3usize);
    let mut dims = Vec::new();
    let mut card = 1usize;
    for d in 0..n_dims {
        let room = (max_card / card).max(1);
        let k = rng.random_range(1..=room.min(8));
        card *= k;
        let values = (0..k as i64).map(Scalar::Int).collect();
        dims.push(Dimension::new(format!("d{d}"), values));
    }
    let space = SearchSpace::new(dims).expect("valid");
    let direction = if rng.random_bool(0.5) {
        Direction::Maximize
    } else {
        Direction::Minimize
    };
    // Coarse values so ties occur.
    let values = (0..card).map(|_| rng.random_range(0..20) as f64 / 4.0).collect();
    Table::new(
        TableMeta {
            name: format!("random_{seed}"),
            direction,
            metric: "value".into(),
            count: card,
        },
        space,
        values,
    )
    .expect("complete")
}

/// A 5x5 maximization table with a single smooth peak at (3, 1).
pub fn peaked_5x5() -> Table {
    let space = SearchSpace::new(vec![
        Dimension::new("x", (0..5).map(Scalar::Int).collect()),
        Dimension::new("y", (0..5).map(Scalar::Int).collect()),
    ])
    .expect("valid");
    let values = (0..25)
        .map(|n| {
            let (x, y) = ((n / 5) as f64, (n % 5) as f64);
            let d2 = (x - 3.0).powi(2) + (y - 1.0).powi(2);
            round4(100.0 * (-d2 / 4.0).exp())
        })
        .collect();
    Table::new(
        TableMeta {
            name: "peaked_5x5".into(),
            direction: Direction::Maximize,
            metric: "value".into(),
            count: 25,
        },
        space,
        values,
    )
    .expect("complete")
}
