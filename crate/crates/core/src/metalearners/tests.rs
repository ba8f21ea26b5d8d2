use rand::Rng as _;

use super::*;
use crate::rng::stream;
use crate::testutil::synthetic;

fn spec(method: CateMethod, outcome: LearnerSpec) -> CateMethodSpec {
    CateMethodSpec::new("t", method, outcome).with_seed(3)
}

#[test]
fn two_model_is_difference_of_arm_models() {
    let data = synthetic(600, 1, |x| x[1]);
    let m = fit_cate(&spec(CateMethod::TwoModel, LearnerSpec::tree(3, 10)), &data).unwrap();
    for row in data.features().rows().take(50) {
        let (mu0, mu1) = m.arm_predictions(row).unwrap();
        assert_eq!(m.effect_row(row), mu1 - mu0);
    }
}

#[test]
fn x_learner_blends_the_two_effect_models() {
    let data = synthetic(600, 2, |x| x[1]);
    let m = fit_cate(
        &spec(
            CateMethod::XLearner {
                fixed_propensity: None,
            },
            LearnerSpec::linear(),
        ),
        &data,
    )
    .unwrap();
    for row in data.features().rows().take(50) {
        let p = m.x_learner_parts(row).unwrap();
        let want = p.g * p.tau0 + (1.0 - p.g) * p.tau1;
        assert!((m.effect_row(row) - want).abs() < 1e-12);
    }
}

#[test]
fn x_learner_with_zero_propensity_is_the_treated_effect_model() {
    let data = synthetic(600, 3, |x| 2.0 * x[2]);
    let m = fit_cate(
        &spec(
            CateMethod::XLearner {
                fixed_propensity: Some(0.0),
            },
            LearnerSpec::linear(),
        ),
        &data,
    )
    .unwrap();
    for row in data.features().rows().take(50) {
        let p = m.x_learner_parts(row).unwrap();
        assert_eq!(p.g, 0.0);
        assert_eq!(m.effect_row(row), p.tau1);
    }
}

#[test]
fn causal_tree_leaves_hold_both_arms() {
    let data = synthetic(1500, 4, |x| if x[1] > 0.0 { 3.0 } else { -1.0 });
    let min_leaf = 25;
    let m = fit_cate(
        &spec(
            CateMethod::CausalTree {
                max_depth: 5,
                min_leaf,
            },
            LearnerSpec::linear(),
        ),
        &data,
    )
    .unwrap();
    let tree = m.causal_tree().unwrap();
    assert!(tree.n_leaves() > 1);
    let mut counts = std::collections::BTreeMap::<usize, (usize, usize)>::new();
    for (i, row) in data.features().rows().enumerate() {
        let c = counts.entry(tree.leaf_index(row)).or_default();
        if data.treated()[i] {
            c.1 += 1;
        } else {
            c.0 += 1;
        }
    }
    for (leaf, (n0, n1)) in counts {
        assert!(n0 >= min_leaf && n1 >= min_leaf, "leaf {leaf}: {n0} control, {n1} treated");
    }
    // the first split finds the effect boundary
    let lo = tree.predict_row(&[0.0, -1.0, 0.0]);
    let hi = tree.predict_row(&[0.0, 1.0, 0.0]);
    assert!(hi - lo > 2.0, "{lo} {hi}");
}

#[test]
fn r_learner_does_not_lose_to_zero_effect() {
    let data = synthetic(800, 5, |x| 1.0 + x[0]);
    let m = fit_cate(
        &spec(CateMethod::RLearner, LearnerSpec::linear()).with_effect(LearnerSpec::linear()),
        &data,
    )
    .unwrap();
    let (fitted, zero) = m.r_objective(&data).unwrap();
    assert!(fitted <= zero + 1e-12, "{fitted} > {zero}");
    assert!(fitted < 0.8 * zero);
}

#[test]
fn zero_effect_is_estimated_near_zero() {
    let data = synthetic(3000, 6, |_| 0.0);
    for s in default_candidates(9) {
        let m = fit_cate(&s, &data).unwrap();
        let e = m.predict_effects(data.features()).unwrap();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        assert!(mean.abs() < 0.2, "{}: mean effect {mean}", s.name);
    }
}

#[test]
fn constant_effect_is_recovered_by_linear_estimators() {
    let data = synthetic(3000, 7, |_| 2.0);
    for method in [CateMethod::Direct, CateMethod::TwoModel] {
        let m = fit_cate(&spec(method, LearnerSpec::linear()), &data).unwrap();
        let e = m.predict_effects(data.features()).unwrap();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        assert!((mean - 2.0).abs() < 0.1, "{method:?}: {mean}");
    }
}

#[test]
fn direct_model_captures_linear_heterogeneity() {
    let data = synthetic(3000, 8, |x| 1.0 + 2.0 * x[1]);
    let m = fit_cate(&spec(CateMethod::Direct, LearnerSpec::linear()), &data).unwrap();
    let a = m.effect_row(&[0.0, 0.0, 0.0]);
    let b = m.effect_row(&[0.0, 1.0, 0.0]);
    assert!((a - 1.0).abs() < 0.1 && (b - a - 2.0).abs() < 0.1, "{a} {b}");
}

#[test]
fn permuted_treatment_labels_kill_the_effect() {
    let data = synthetic(3000, 10, |_| 3.0);
    let mut shuffled = data.clone();
    let mut rng = stream(11, 0);
    let t = &mut shuffled.data.treated;
    for i in (1..t.len()).rev() {
        let j = rng.random_range(0..=i);
        t.swap(i, j);
    }
    let m = fit_cate(&spec(CateMethod::TwoModel, LearnerSpec::linear()), &data).unwrap();
    let p = fit_cate(&spec(CateMethod::TwoModel, LearnerSpec::linear()), &shuffled).unwrap();
    let mean = |m: &CateModel| {
        let e = m.predict_effects(data.features()).unwrap();
        e.iter().sum::<f64>() / e.len() as f64
    };
    assert!((mean(&m) - 3.0).abs() < 0.15);
    assert!(mean(&p).abs() < 0.3, "{}", mean(&p));
}

#[test]
fn gate_and_dimension_checks() {
    let data = synthetic(600, 12, |_| 1.0);
    let m = fit_cate(&spec(CateMethod::Direct, LearnerSpec::linear()), &data).unwrap();
    assert!(matches!(m.predict_cate(&[0.0, 0.0, 0.0]).unwrap(), CateEstimate::Defined(_)));
    assert_eq!(m.predict_cate(&[40.0, 0.0, 0.0]).unwrap(), CateEstimate::Undefined);
    assert!(matches!(m.predict_cate(&[0.0]), Err(Error::Dimension { expected: 3, got: 1 })));
}

#[test]
fn single_arm_and_tiny_sets_rejected() {
    let data = synthetic(600, 13, |_| 1.0);
    let controls: Vec<usize> = (0..data.len()).filter(|&i| !data.treated()[i]).collect();
    let s = spec(CateMethod::TwoModel, LearnerSpec::linear());
    assert!(matches!(fit_cate(&s, &data.subset(&controls)), Err(Error::Degenerate(_))));
    let few: Vec<usize> = (0..20).collect();
    assert!(matches!(fit_cate(&s, &data.subset(&few)), Err(Error::Degenerate(_))));
}

#[test]
fn fits_are_deterministic() {
    let data = synthetic(800, 14, |x| x[0]);
    for s in default_candidates(5) {
        let a = fit_cate(&s, &data).unwrap();
        let b = fit_cate(&s, &data).unwrap();
        assert_eq!(a.predict_effects(data.features()).unwrap(), b.predict_effects(data.features()).unwrap());
    }
}

#[test]
fn spec_round_trips_through_json() {
    for s in default_candidates(1) {
        let j = serde_json::to_string(&s).unwrap();
        let back: CateMethodSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
