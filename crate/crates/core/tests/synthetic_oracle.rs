//! Least-squares decoder oracle: at zero noise the synthetic task is
//! linearly solvable from the pooled features.

use dfan::data::{generate_synthetic, LabelSpace, SynthSpec};
use nalgebra::DMatrix;

fn least_squares_train_accuracy(spec: &SynthSpec) -> f64 {
    let data = generate_synthetic(spec).unwrap();
    let space = LabelSpace::new(&data.semantic, &data.split).unwrap();
    let recs = data.train.records();
    let (d, m) = (spec.dim, spec.attributes);

    let x = DMatrix::<f64>::from_fn(recs.len(), d, |i, k| recs[i].global.data()[k] as f64);
    let y = DMatrix::<f64>::from_fn(recs.len(), m, |i, j| {
        let row = data.semantic.row_of(recs[i].label).unwrap();
        data.semantic.row(row)[j] as f64
    });
    let decoder = x.clone().svd(true, true).solve(&y, 1e-10).unwrap();
    let decoded = &x * &decoder;

    let correct = recs
        .iter()
        .enumerate()
        .filter(|(i, rec)| {
            let best = space
                .seen_rows()
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    let score = |r: usize| -> f64 {
                        (0..m).map(|j| decoded[(*i, j)] * data.semantic.row(r)[j] as f64).sum()
                    };
                    score(a).total_cmp(&score(b))
                })
                .unwrap();
            space.class_id(best) == rec.label
        })
        .count();
    correct as f64 / recs.len() as f64
}

#[test]
fn noiseless_data_is_linearly_decodable() {
    for seed in [1, 7, 19] {
        let spec = SynthSpec {
            sigma: 0.0,
            seed,
            ..SynthSpec::default()
        };
        assert_eq!(least_squares_train_accuracy(&spec), 1.0, "seed {seed}");
    }
    let small = SynthSpec {
        seen_classes: 4,
        unseen_classes: 2,
        samples_per_class: 12,
        attributes: 5,
        regions: 3,
        dim: 6,
        sigma: 0.0,
        seed: 2,
    };
    assert_eq!(least_squares_train_accuracy(&small), 1.0);
}
