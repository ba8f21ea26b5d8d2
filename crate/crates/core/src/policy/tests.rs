use proptest::prelude::*;

use super::*;

const DOSAGES: [f64; 6] = [1.125, 1.375, 1.625, 1.875, 2.125, 2.375];

/// Noiseless target `x0 + dosage` fitted by least squares, so predictions
/// are exact.
fn exact_forward() -> ForwardModel {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        let x0 = (i % 17) as f64 - 8.0;
        let d = [0.0, 1.125, 1.375, 2.375][i % 4];
        rows.push(vec![x0, d]);
        y.push(x0 + d);
    }
    fit_forward_rows(rows, y, &LearnerSpec::linear(), 1).unwrap()
}

#[test]
fn cl_examples() {
    assert_eq!(recommend_cl(1, vec![Some(-1.0), Some(-0.5)], &DOSAGES).chosen_level, 0);
    let d = recommend_cl(1, vec![Some(2.0), Some(5.0)], &DOSAGES);
    assert_eq!((d.chosen_level, d.chosen_dosage), (2, 1.375));
    assert_eq!(recommend_cl(1, vec![Some(1.0), None], &DOSAGES).chosen_level, 1);
    assert_eq!(recommend_cl(1, vec![None, None], &DOSAGES).chosen_level, 0);
    assert_eq!(recommend_cl(1, vec![Some(0.0)], &DOSAGES).chosen_level, 0);
}

#[test]
fn cl_cvar_examples() {
    assert_eq!(recommend_cl_cvar(1, vec![Some(-0.1), Some(-3.0)], &DOSAGES).chosen_level, 0);
    assert_eq!(recommend_cl_cvar(1, vec![Some(0.2), Some(0.7)], &DOSAGES).chosen_level, 2);
    assert_eq!(recommend_cl_cvar(1, vec![Some(0.5), Some(0.5)], &DOSAGES).chosen_level, 1);
}

#[test]
fn forward_looking_examples() {
    let fm = exact_forward();
    // at level 2 the prediction is x0 + 1.375
    let up = recommend_cl_cvar(7, vec![Some(0.1), Some(0.9)], &DOSAGES);
    let x = [0.625];
    assert!((fm.predict(&x, 1.375).unwrap() - 2.0).abs() < 1e-9);
    let down = recommend_cl_cvar_fl(&up, 3.0, &fm, &x).unwrap();
    assert_eq!((down.chosen_level, down.criterion), (0, Criterion::ClCvarFl));
    assert_eq!(down.y_r, Some(3.0));
    let x = [1.125];
    let keep = recommend_cl_cvar_fl(&up, 1.0, &fm, &x).unwrap();
    assert_eq!(keep.chosen_level, 2);
    assert_eq!(keep.chosen_dosage, up.chosen_dosage);
    let none = recommend_cl_cvar(7, vec![Some(-1.0)], &DOSAGES);
    let d = recommend_cl_cvar_fl(&none, -100.0, &fm, &x).unwrap();
    assert_eq!((d.chosen_level, d.y_p_hat), (0, None));
    assert!(recommend_cl_cvar_fl(&recommend_cl(1, vec![], &DOSAGES), 0.0, &fm, &x).is_err());
}

#[test]
fn forward_looking_equality_downgrades() {
    let fm = exact_forward();
    let up = recommend_cl_cvar(7, vec![Some(1.0)], &DOSAGES);
    let x = [0.0];
    let y_p = fm.predict(&x, DOSAGES[0]).unwrap();
    assert_eq!(recommend_cl_cvar_fl(&up, y_p, &fm, &x).unwrap().chosen_level, 0);
}

#[test]
fn prediction_only_examples() {
    let fm = exact_forward();
    let dosages: Vec<Option<f64>> = DOSAGES.iter().map(|&d| Some(d)).collect();
    // x0 = 2 gives predictions 3.125 .. 4.375, all increasing in dosage
    let x = [2.0];
    assert_eq!(recommend_prediction_only(1, &fm, &x, &dosages, 5.0).unwrap().chosen_level, 0);
    let d = recommend_prediction_only(1, &fm, &x, &dosages, 4.0).unwrap();
    assert_eq!(d.chosen_level, 6);
    assert!((d.y_p_hat.unwrap() - 4.375).abs() < 1e-9);
    let only_first = [Some(1.125), None, None];
    assert_eq!(recommend_prediction_only(1, &fm, &x, &only_first, 3.0).unwrap().chosen_level, 1);
    assert_eq!(recommend_prediction_only(1, &fm, &x, &only_first, 3.2).unwrap().chosen_level, 0);
}

#[test]
fn forward_model_quality_extremes() {
    let fm = exact_forward();
    assert!(fm.rmse <= 1e-6 * fm.target_sd, "{} vs {}", fm.rmse, fm.target_sd);
    let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 1.0]).collect();
    let fm = fit_forward_rows(rows, vec![3.5; 50], &default_forward_learner(1), 2).unwrap();
    assert_eq!(fm.rmse, 0.0);
    assert_eq!(fm.relative_rmse(), 0.0);
    assert!(matches!(
        fit_forward_rows(vec![], vec![], &LearnerSpec::linear(), 1),
        Err(Error::Data(_))
    ));
    assert!(matches!(exact_forward().predict(&[1.0, 2.0], 1.0), Err(Error::Dimension { .. })));
}

#[test]
fn criterion_names_parse() {
    for c in Criterion::ALL {
        assert_eq!(c.flag().parse::<Criterion>().unwrap(), c);
        assert_eq!(c.code().parse::<Criterion>().unwrap(), c);
    }
    assert!(matches!("best".parse::<Criterion>(), Err(Error::Config(_))));
}

#[test]
fn decisions_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut a = recommend_cl(3, vec![Some(0.25), None, Some(-1.5)], &DOSAGES);
    let mut b = recommend_cl_cvar(4, vec![None, None, Some(2.0)], &DOSAGES);
    b.criterion = Criterion::ClCvarFl;
    b.y_r = Some(-0.1);
    b.y_p_hat = Some(1.0 / 3.0);
    a.chosen_dosage = 0.1 + 0.2;
    write_decisions(&[a.clone(), b.clone()], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("id,criterion,chosen_level,chosen_dosage,value_per_level_json,y_r,y_p_hat\n"));
    assert!(text.contains("\"[0.25,null,-1.5]\""));
    assert_eq!(read_decisions(&path).unwrap(), vec![a, b]);
}

fn level_values() -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(prop::option::of(-5.0f64..5.0), 0..7)
}

proptest! {
    #[test]
    fn chosen_level_is_control_or_defined(v in level_values()) {
        let d = recommend_cl(1, v.clone(), &DOSAGES);
        prop_assert!(d.chosen_level == 0 || v[d.chosen_level - 1].is_some());
    }

    #[test]
    fn shifting_every_option_keeps_the_choice(v in level_values(), c in -10.0f64..10.0) {
        // control sits at c after the shift; compare options by a plain argmax
        let mut best = (0usize, c);
        for (i, x) in v.iter().enumerate() {
            if let Some(x) = x {
                if x + c > best.1 {
                    best = (i + 1, x + c);
                }
            }
        }
        prop_assert_eq!(argmax_level(&v), best.0);
    }

    #[test]
    fn forward_looking_only_downgrades(v in level_values(), y_r in -12.0f64..12.0, x0 in -8.0f64..8.0) {
        let fm = exact_forward();
        let up = recommend_cl_cvar(1, v, &DOSAGES);
        let fl = recommend_cl_cvar_fl(&up, y_r, &fm, &[x0]).unwrap();
        prop_assert!(fl.chosen_level == 0 || fl.chosen_level == up.chosen_level);
    }
}
