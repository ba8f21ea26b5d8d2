use uplift_core::datagen::{generate_portfolio, load_portfolio, write_portfolio, GenConfig};
use uplift_core::treatments::discretize;

#[test]
fn unconfounded_assignment_matches_marginals() {
    for weights in [Vec::new(), vec![2.0, 1.0, 1.0, 0.5]] {
        let k = if weights.is_empty() { 6 } else { 3 };
        let cut_points: Vec<f64> = (1..k).map(|j| 1.0 + 1.5 * j as f64 / k as f64).collect();
        let cfg = GenConfig {
            n_customers: 20_000,
            k_levels: k,
            cut_points: cut_points.clone(),
            level_weights: weights,
            confounding_strength: 0.0,
            overlap_violation_fraction: 0.0,
            seed: 11,
            ..GenConfig::default()
        };
        let (recs, truth) = generate_portfolio(&cfg).unwrap();
        let dosages: Vec<f64> = recs.iter().map(|r| r.observed_dosage).collect();
        let part = discretize(&dosages, &cut_points).unwrap();
        let n = recs.len() as f64;
        let mut counts = vec![0usize; k + 1];
        for (d, row) in dosages.iter().zip(truth.rows()) {
            let level = part.assign_level(*d).unwrap();
            assert_eq!(level, row.assigned_level);
            counts[level] += 1;
        }
        for (j, p) in cfg.marginals().into_iter().enumerate() {
            let se = (p * (1.0 - p) / n).sqrt();
            let freq = counts[j] as f64 / n;
            assert!((freq - p).abs() <= 3.0 * se, "level {j}: {freq} vs {p} (se {se})");
        }
    }
}

#[test]
fn ten_thousand_records_write_ten_thousand_and_one_lines() {
    let cfg = GenConfig {
        n_customers: 10_000,
        seed: 5,
        ..GenConfig::default()
    };
    let (recs, _) = generate_portfolio(&cfg).unwrap();
    for r in &recs {
        assert!(r.validate().is_ok(), "record {} invalid", r.id);
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("portfolio.csv");
    write_portfolio(&recs, &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 10_001);
    assert_eq!(load_portfolio(&p).unwrap(), recs);
}

#[test]
fn outcome_is_the_assigned_potential_outcome() {
    let cfg = GenConfig {
        n_customers: 5_000,
        seed: 8,
        ..GenConfig::default()
    };
    let (recs, truth) = generate_portfolio(&cfg).unwrap();
    for r in &recs {
        let t = truth.get(r.id).unwrap();
        assert_eq!(r.ep_m6.to_bits(), t.outcome(t.assigned_level).to_bits());
    }
}
