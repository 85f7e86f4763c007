use super::*;
use crate::data::{ClassSplit, FeatureDataset, FeatureRecord, Role, SemanticMatrix};
use crate::inference::CombineConfig;
use crate::model::{DfanParams, ModelConfig, Variant};
use crate::numeric::Tensor;

fn linear_only() -> Variant {
    Variant {
        bias_learner: false,
        ..Variant::default()
    }
}

/// Identity predictors so that with one region `â_l = z` and `â_g = p`.
fn identity_params(d: usize) -> DfanParams<f32> {
    let mut p = DfanParams::<f32>::init(ModelConfig::new(d, d), 0).unwrap();
    p.w_local.value = Tensor::identity(d);
    p.w_global.value = Tensor::identity(d);
    p
}

fn dataset(role: Role, rows: &[(u32, Vec<f32>)]) -> FeatureDataset {
    let d = rows[0].1.len();
    let records = rows
        .iter()
        .map(|(label, v)| FeatureRecord::new(Tensor::row(v.clone()), Tensor::row(v.clone()), *label).unwrap())
        .collect();
    FeatureDataset::new(role, 1, d, records).unwrap()
}

struct Toy {
    sm: SemanticMatrix,
    split: ClassSplit,
    seen: FeatureDataset,
    unseen: FeatureDataset,
}

impl Toy {
    fn ctx(&self) -> EvalContext<'_> {
        EvalContext {
            semantic: &self.sm,
            split: &self.split,
            test_seen: &self.seen,
            test_unseen: &self.unseen,
        }
    }
}

/// Class 0 seen, class 1 unseen, identity semantics.
fn two_class() -> Toy {
    Toy {
        sm: SemanticMatrix::new(Tensor::identity(2), vec![0, 1]).unwrap(),
        split: ClassSplit::new([0], [1]),
        seen: dataset(
            Role::TestSeen,
            &[(0, vec![0.9, 0.1]), (0, vec![0.3, 0.4]), (0, vec![0.7, 0.2])],
        ),
        unseen: dataset(Role::TestUnseen, &[(1, vec![0.6, 0.5]), (1, vec![0.2, 0.9])]),
    }
}

#[test]
fn perfect_scores_give_perfect_report() {
    let toy = Toy {
        sm: SemanticMatrix::new(Tensor::identity(3), vec![0, 1, 2]).unwrap(),
        split: ClassSplit::new([0, 1], [2]),
        seen: dataset(Role::TestSeen, &[(0, vec![1.0, 0.0, 0.0]), (1, vec![0.0, 1.0, 0.0])]),
        unseen: dataset(Role::TestUnseen, &[(2, vec![0.0, 0.0, 1.0])]),
    };
    let cfg = CombineConfig::new(0.5, 0.5, 0.0).unwrap();
    let r = evaluate(&identity_params(3), &linear_only(), &toy.ctx(), &cfg, 0.1, 3).unwrap();
    assert_eq!((r.czsl_acc, r.gzsl_u, r.gzsl_s, r.gzsl_h), (100.0, 100.0, 100.0, 100.0));
    assert_eq!(r.per_class.len(), 3);
    assert_eq!(r.config.seed, 3);
}

#[test]
fn hand_computed_two_class_report() {
    let toy = two_class();
    let params = identity_params(2);
    let cfg = CombineConfig::new(0.0, 1.0, 0.0).unwrap();
    let r = evaluate(&params, &linear_only(), &toy.ctx(), &cfg, 0.0, 0).unwrap();
    // unseen: (0.6, 0.5) loses to the seen class, (0.2, 0.9) wins
    assert_eq!(r.czsl_acc, 100.0);
    assert_eq!(r.gzsl_u, 50.0);
    assert!((r.gzsl_s - 200.0 / 3.0).abs() < 1e-9);
    assert!((r.gzsl_h - 400.0 / 7.0).abs() < 1e-9);

    // γ = 0.15 flips the first unseen sample; the seen set keeps 2 of 3
    let cfg = CombineConfig::new(0.0, 1.0, 0.15).unwrap();
    let r = evaluate(&params, &linear_only(), &toy.ctx(), &cfg, 0.0, 0).unwrap();
    assert_eq!(r.gzsl_u, 100.0);
    assert!((r.gzsl_s - 200.0 / 3.0).abs() < 1e-9);
    assert!((r.gzsl_h - 80.0).abs() < 1e-9);
}

#[test]
fn gamma_only_touches_gzsl() {
    let toy = two_class();
    let params = identity_params(2);
    let a = evaluate(&params, &linear_only(), &toy.ctx(), &CombineConfig::new(0.5, 0.5, 0.0).unwrap(), 0.0, 0).unwrap();
    let b = evaluate(
        &params,
        &linear_only(),
        &toy.ctx(),
        &CombineConfig::new(0.5, 0.5, f64::INFINITY).unwrap(),
        0.0,
        0,
    )
    .unwrap();
    assert_eq!(a.czsl_acc, b.czsl_acc);
    assert_eq!(b.gzsl_s, 0.0);
    assert_eq!(b.gzsl_u, 100.0);
}

#[test]
fn report_json_keys() {
    let toy = two_class();
    let cfg = CombineConfig::new(0.0, 1.0, 0.0).unwrap();
    let r = evaluate(&identity_params(2), &linear_only(), &toy.ctx(), &cfg, 0.0, 0).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["config", "czsl_acc", "gzsl_h", "gzsl_s", "gzsl_u", "per_class"]);
    for k in ["beta1", "beta2", "gamma", "lambda", "seed"] {
        assert!(v["config"].get(k).is_some(), "{k}");
    }
}

#[test]
fn wrong_role_or_missing_class_errors() {
    let toy = two_class();
    let cfg = CombineConfig::new(0.0, 1.0, 0.0).unwrap();
    let swapped = EvalContext {
        test_seen: &toy.unseen,
        test_unseen: &toy.seen,
        ..toy.ctx()
    };
    assert!(evaluate(&identity_params(2), &linear_only(), &swapped, &cfg, 0.0, 0).is_err());

    let sm = SemanticMatrix::new(Tensor::identity(2), vec![0, 1]).unwrap();
    let split = ClassSplit::new([0], [1]);
    let seen = dataset(Role::TestSeen, &[(0, vec![1.0, 0.0])]);
    let unseen = FeatureDataset::new(Role::TestUnseen, 1, 2, vec![]).unwrap();
    let ctx = EvalContext {
        semantic: &sm,
        split: &split,
        test_seen: &seen,
        test_unseen: &unseen,
    };
    let err = evaluate(&identity_params(2), &linear_only(), &ctx, &cfg, 0.0, 0).unwrap_err();
    assert!(matches!(err, crate::Error::Validation { class_id: 1, .. }));
}

fn random_predictions(toy: &Toy) -> HeadPredictions {
    let mut params = DfanParams::<f32>::init(ModelConfig::new(2, 2), 11).unwrap();
    params.w_local.value = Tensor::from_rows(&[vec![0.3, -0.2], vec![0.1, 0.8]]);
    HeadPredictions::compute(&params, &Variant::default(), &toy.seen, &toy.unseen).unwrap()
}

#[test]
fn sweep_single_point_matches_evaluate() {
    let toy = two_class();
    let preds = random_predictions(&toy);
    let base = CombineConfig::new(0.5, 0.5, 0.0).unwrap();
    let pts = sweep(&preds, &toy.sm, &toy.split, &base, SweepAxis::Gamma, &[0.2], 0.1, 4).unwrap();
    let direct = preds
        .report(&toy.sm, &toy.split, &CombineConfig { gamma: 0.2, ..base }, 0.1, 4)
        .unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].report, direct);
    assert!(sweep(&preds, &toy.sm, &toy.split, &base, SweepAxis::Gamma, &[], 0.1, 4).is_err());
}

#[test]
fn beta_zero_equals_zeroed_local_branch() {
    let toy = two_class();
    let preds = random_predictions(&toy);
    let base = CombineConfig::new(0.5, 0.5, 0.0).unwrap();
    let pts = sweep(&preds, &toy.sm, &toy.split, &base, SweepAxis::Beta, &[0.0], 0.0, 0).unwrap();
    let mut zeroed = preds.clone();
    for (_, out) in zeroed.seen.iter_mut().chain(zeroed.unseen.iter_mut()) {
        out.a_local.iter_mut().for_each(|v| *v = 0.0);
    }
    let expected = zeroed
        .report(&toy.sm, &toy.split, &CombineConfig { beta1: 0.0, beta2: 1.0, ..base }, 0.0, 0)
        .unwrap();
    assert_eq!(pts[0].report, expected);
}

#[test]
fn gamma_sweep_is_monotone() {
    let toy = two_class();
    let preds = random_predictions(&toy);
    let base = CombineConfig::new(0.5, 0.5, 0.0).unwrap();
    let grid = DEFAULT_GAMMA_GRID;
    let pts = sweep(&preds, &toy.sm, &toy.split, &base, SweepAxis::Gamma, &grid, 0.0, 0).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].report.gzsl_u >= w[0].report.gzsl_u);
        assert!(w[1].report.gzsl_s <= w[0].report.gzsl_s);
    }
    let csv = sweep_csv(SweepAxis::Gamma, &pts);
    assert!(csv.starts_with("gamma,U,S,H,acc\n"));
    assert_eq!(csv.lines().count(), grid.len() + 1);
}
