mod common;

use std::time::Instant;

use glimpse::inference::{classify, classify_full, classify_random, classify_traced};
use glimpse::{generate_pointer_task, PointerTaskSpec};

#[test]
fn classify_matches_step_by_step_oracle() {
    let mut rng = common::rng(1);
    for i in 0..100 {
        let budget = 1 + i % 9;
        let b = common::random_bundle(&mut rng, 3, 3, 6, budget, 4);
        let img = common::random_image(&mut rng, 13, 11);
        let got = classify(&img, &b).unwrap();
        let (class, traj) = common::oracle_classify(&img, &b);
        assert_eq!(got.class, class);
        assert_eq!(&got.trajectory[..], &traj[..]);
        assert_eq!(got.phi_calls, budget);
    }
}

#[test]
fn trace_scores_match_oracle() {
    let mut rng = common::rng(2);
    let b = common::random_bundle(&mut rng, 2, 3, 4, 4, 2);
    let img = common::random_image(&mut rng, 9, 8);
    let r = classify_traced(&img, &b).unwrap();
    let trace = r.trace.unwrap();
    assert_eq!(trace.len(), 3);
    for (t, scores) in trace.iter().enumerate() {
        let x = common::oracle_aggregate(&img, 2, 3, 4, &r.trajectory[..t + 1]);
        let want = common::oracle_scores(&b.sub_policies()[t], &x);
        for (g, w) in scores.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn full_budget_agrees_everywhere() {
    let mut rng = common::rng(3);
    let b = common::random_bundle(&mut rng, 3, 3, 5, 9, 5);
    for _ in 0..50 {
        let img = common::random_image(&mut rng, 10, 10);
        let full = classify_full(&img, &b).unwrap();
        assert_eq!(classify(&img, &b).unwrap().class, full);
        assert_eq!(classify_random(&img, &b, 9, &mut rng).unwrap().class, full);
    }
}

#[test]
fn random_subsets_match_enumeration_on_two_by_two() {
    let mut rng = common::rng(4);
    let b = common::random_bundle(&mut rng, 2, 2, 4, 4, 3);
    let start = b.start_region();
    let others: Vec<usize> = (0..4).filter(|&r| r != start).collect();
    let images: Vec<_> = (0..6).map(|_| common::random_image(&mut rng, 8, 8)).collect();
    for budget in 1..=4 {
        let subsets = common::subsets(&others, budget - 1);
        for img in &images {
            let truth = classify_full(img, &b).unwrap();
            let mut correct = std::collections::BTreeMap::new();
            for s in &subsets {
                let mut traj = vec![start];
                traj.extend(s);
                let x = common::oracle_aggregate(img, 2, 2, 4, &traj);
                let class = common::oracle_argmax(&common::oracle_scores(b.f_theta(), &x), |_| true);
                correct.insert(s.clone(), class == truth);
            }
            let expected = correct.values().filter(|&&c| c).count() as f64 / subsets.len() as f64;
            let trials = 4000;
            let mut hits = 0;
            for _ in 0..trials {
                let r = classify_random(img, &b, budget, &mut rng).unwrap();
                assert_eq!(r.trajectory[0], start);
                let mut rest = r.trajectory[1..].to_vec();
                rest.sort();
                assert_eq!(r.class == truth, correct[&rest]);
                hits += (r.class == truth) as usize;
            }
            let se = (expected * (1.0 - expected) / trials as f64).sqrt();
            assert!((hits as f64 / trials as f64 - expected).abs() <= 4.0 * se + 1e-12);
        }
    }
}

#[test]
fn cheating_policy_solves_noiseless_task() {
    for n_targets in [1, 4] {
        let spec = PointerTaskSpec {
            noise_std: 0.0,
            n_targets,
            ..PointerTaskSpec::default()
        };
        let (train, test) = generate_pointer_task(&spec).unwrap();
        let b = common::cheating_bundle(&spec, 16);
        let correct = train
            .items()
            .iter()
            .chain(test.items())
            .filter(|(img, y)| classify(img, &b).unwrap().class == *y)
            .count();
        assert!(correct as f64 >= 0.99 * (train.len() + test.len()) as f64);
    }
}

#[test]
fn wall_time_grows_with_budget() {
    let mut rng = common::rng(5);
    let img = common::random_image(&mut rng, 64, 64);
    let mean_time = |budget: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let b = common::random_bundle(rng, 4, 4, 16, budget, 4);
        let t0 = Instant::now();
        for _ in 0..300 {
            std::hint::black_box(classify(&img, &b).unwrap());
        }
        t0.elapsed().as_secs_f64()
    };
    let t1 = mean_time(1, &mut rng);
    let t16 = mean_time(16, &mut rng);
    assert!(t16 >= t1 * 0.5, "B=1 {t1:.4}s, B=16 {t16:.4}s");
}
