//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with its measured numbers (run with `--nocapture` to see them).
//!
//! Criteria 1-4 are oracle-equivalence checks, 5-8 scaled-down statistical
//! reproductions on seeded synthetic systems, 9 an optional real-dataset
//! spot check (skipped unless the dataset is present), 10 byte determinism
//! of the full pipeline.

use std::time::Instant;

use perfband::baseline::LinearBaseline;
use perfband::bnn::{kl_gaussian, kl_laplace_mc};
use perfband::calibration::{default_levels, observed_frequency};
use perfband::dataset::{twise_sample, ConfigOption, OptionSchema, PerformanceDataset};
use perfband::ensemble::{train_ensemble, PredictOptions, TrainOptions};
use perfband::hpo::{
    run_bo, tune_depth_with, HpSpace, Hyperparams, BO_GROWTH_ITERS, BO_INIT_POINTS, EPOCH_CHOICES,
    LAPLACE_MAX, LAPLACE_MIN, LR_MAX, LR_MIN,
};
use perfband::metrics::{cal_score_from_curve, mape, welch_t_test, WelchDecision};
use perfband::net::{loss_and_gradient, LossSpec, NetworkTopology};
use perfband::seeds;
use perfband::stats::standard_normal;
use rand::Rng;

fn binary_schema(n: usize) -> OptionSchema {
    OptionSchema::new((0..n).map(|i| ConfigOption::binary(format!("o{i}"))).collect()).unwrap()
}

fn gen_rows(n: usize, options: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..options).map(|_| f64::from(rng.gen::<bool>())).collect())
        .collect()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    }
}

#[test]
fn criterion_1_gradient_correctness() {
    let t0 = Instant::now();
    let mut checked = 0usize;
    for case in 0..100u64 {
        let mut rng = seeds::rng_for(0xC1, case);
        let input = rng.gen_range(1..=4);
        let depth = rng.gen_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=8)).collect();
        let topo = NetworkTopology::new(input, hidden).unwrap();
        let loss_spec = if case % 2 == 0 { LossSpec::GaussianNll } else { LossSpec::SquaredError };
        let mut params: Vec<f64> =
            (0..topo.param_count()).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let batch = rng.gen_range(1..=6);
        let xs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..input).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect();
        let ys: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = loss_and_gradient(&topo, &params, &xs, &ys, loss_spec).unwrap();
        let h = 1e-5;
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + h;
            let (lp, _) = loss_and_gradient(&topo, &params, &xs, &ys, loss_spec).unwrap();
            params[i] = orig - h;
            let (lm, _) = loss_and_gradient(&topo, &params, &xs, &ys, loss_spec).unwrap();
            params[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let tol = 1e-4 * grad[i].abs().max(fd.abs()) + 1e-7;
            assert!(
                (grad[i] - fd).abs() <= tol,
                "criterion 1: FAIL — case {case} coordinate {i}: grad {} vs fd {}",
                grad[i],
                fd
            );
            checked += 1;
        }
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs() < 60, "criterion 1: FAIL — took {dt:?}, budget 1 min");
    println!(
        "criterion 1 (gradient correctness): PASS — {checked} coordinates across 100 networks \
         match central finite differences within 1e-4 rel / 1e-7 abs ({dt:?})"
    );
}

#[test]
fn criterion_2_kl_oracles() {
    let t0 = Instant::now();

    // closed-form Gaussian KL vs a 1e6-sample Monte-Carlo oracle
    for case in 0..20u64 {
        let mut rng = seeds::rng_for(0xC2, case);
        let dim = rng.gen_range(4..=10);
        let means: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let sds: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.3..2.0)).collect();
        let prior_sd: f64 = rng.gen_range(0.5..1.5);
        let closed = kl_gaussian(&means, &sds, prior_sd);

        // independent oracle: E_q[ln q(w) - ln N(w; 0, s0^2)]
        let s = 1_000_000usize;
        let mut total = 0.0;
        for _ in 0..s {
            for (&m, &sd) in means.iter().zip(&sds) {
                let eps = standard_normal(&mut rng);
                let w = m + sd * eps;
                let log_q = -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * eps * eps;
                let log_p = -0.5 * (2.0 * std::f64::consts::PI).ln()
                    - prior_sd.ln()
                    - 0.5 * w * w / (prior_sd * prior_sd);
                total += log_q - log_p;
            }
        }
        let mc = total / s as f64;
        assert!(
            (closed - mc).abs() <= 0.02 * mc.abs().max(0.05),
            "criterion 2: FAIL — case {case}: closed-form {closed} vs MC {mc}"
        );
    }

    // Laplace-prior MC KL at S = 1e5 within 3 standard errors of a 1e7 oracle
    for case in 0..3u64 {
        let mut rng = seeds::rng_for(0xC2B, case);
        let dim = 4;
        let means: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sds: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..1.0)).collect();
        let b: f64 = rng.gen_range(0.05..0.8);

        let est = kl_laplace_mc(&means, &sds, b, 100_000, &mut seeds::rng_for(0xE5, case));

        // oracle with per-draw variance tracking (independent formula)
        let s_oracle = 10_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..s_oracle {
            let mut term = 0.0;
            for (&m, &sd) in means.iter().zip(&sds) {
                let eps = standard_normal(&mut rng);
                let w = m + sd * eps;
                let log_q = -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * eps * eps;
                let log_p = -(2.0 * b).ln() - w.abs() / b;
                term += log_q - log_p;
            }
            sum += term;
            sumsq += term * term;
        }
        let oracle = sum / s_oracle as f64;
        let var = sumsq / s_oracle as f64 - oracle * oracle;
        let se_est = (var / 100_000.0).sqrt();
        assert!(
            (est - oracle).abs() <= 3.0 * se_est,
            "criterion 2: FAIL — case {case}: estimate {est} vs oracle {oracle} (3 SE = {})",
            3.0 * se_est
        );
    }

    let dt = t0.elapsed();
    assert!(dt.as_secs() < 120, "criterion 2: FAIL — took {dt:?}, budget 2 min");
    println!(
        "criterion 2 (KL oracles): PASS — Gaussian closed form within 2% of 1e6-sample MC on 20 \
         pairs; Laplace MC at 1e5 samples within 3 SE of the 1e7 oracle ({dt:?})"
    );
}

#[test]
fn criterion_3_metric_oracles() {
    let t0 = Instant::now();
    let mut rng = seeds::rng_for(0xC3, 0);

    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let preds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..50.0)).collect();
        let truths: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..50.0)).collect();
        // direct evaluation of the percentage-error formula
        let direct = preds
            .iter()
            .zip(&truths)
            .map(|(&p, &t)| (p - t).abs() / t)
            .sum::<f64>()
            / n as f64
            * 100.0;
        assert_eq!(mape(&preds, &truths).unwrap(), direct, "criterion 3: FAIL — mape mismatch");
    }

    for _ in 0..1000 {
        let m = rng.gen_range(1..=25);
        let mut levels: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..99.0)).collect();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        let alphas: Vec<f64> = (0..levels.len()).map(|_| rng.gen_range(0.0..100.0)).collect();
        let direct = levels
            .iter()
            .zip(&alphas)
            .map(|(&r, &a)| ((r - a) / 100.0) * ((r - a) / 100.0))
            .sum::<f64>()
            * 100.0;
        assert_eq!(
            cal_score_from_curve(&levels, &alphas, None).unwrap(),
            direct,
            "criterion 3: FAIL — cal mismatch"
        );
    }

    // fixed all-miss / all-cover values at the 19 standard levels
    let levels = default_levels();
    let all_miss = cal_score_from_curve(&levels, &[0.0; 19], None).unwrap();
    let all_cover = cal_score_from_curve(&levels, &[100.0; 19], None).unwrap();
    assert!((all_miss - 617.5).abs() < 1e-9, "criterion 3: FAIL — all-miss {all_miss}");
    assert!((all_cover - 617.5).abs() < 1e-9, "criterion 3: FAIL — all-cover {all_cover}");

    let dt = t0.elapsed();
    assert!(dt.as_secs() < 30, "criterion 3: FAIL — took {dt:?}, budget 30 s");
    println!(
        "criterion 3 (metric oracles): PASS — MAPE and cal match brute-force evaluation exactly \
         on 1000 instances each; all-miss and all-cover cal both 617.5 ({dt:?})"
    );
}

#[test]
fn criterion_4_covering_arrays() {
    let t0 = Instant::now();
    let mut cases = 0;
    for n in 1..=10usize {
        let schema = binary_schema(n);
        for t in 1..=3.min(n) {
            let sample = twise_sample(&schema, t, 0xC4 + n as u64).unwrap();
            assert!(
                sample.len() <= 1 << n,
                "criterion 4: FAIL — n={n} t={t}: {} configs exceed full enumeration",
                sample.len()
            );
            // exhaustive verification of every t-tuple
            let combos = combinations(n, t);
            for opts in &combos {
                for mask in 0..(1u32 << t) {
                    let hit = sample.iter().any(|cfg| {
                        opts.iter()
                            .enumerate()
                            .all(|(p, &o)| cfg[o] == f64::from((mask >> p) & 1))
                    });
                    assert!(hit, "criterion 4: FAIL — n={n} t={t}: tuple {opts:?} mask {mask} uncovered");
                }
            }
            cases += 1;
        }
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs() < 60, "criterion 4: FAIL — took {dt:?}, budget 1 min");
    println!(
        "criterion 4 (covering arrays): PASS — exhaustive t-tuple coverage verified for {cases} \
         (n, t) cases with n <= 10, sizes within full enumeration ({dt:?})"
    );
}

fn combinations(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(t);
    fn rec(start: usize, n: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, t, cur, out);
            cur.pop();
        }
    }
    rec(0, n, t, &mut cur, &mut out);
    out
}

/// Criterion 5/6 system: 3-term polynomial with 2-way interactions plus
/// heteroscedastic Gaussian noise, over 10 binary options.
fn twoway_system(rows: &[Vec<f64>], rng: &mut impl Rng) -> Vec<f64> {
    rows.iter()
        .map(|r| {
            let f = 25.0 + 40.0 * r[0] * r[1] + 30.0 * r[2] * r[3] - 20.0 * r[4] * r[5];
            let sd = 1.0 + 3.0 * r[6];
            f + sd * standard_normal(rng)
        })
        .collect()
}

/// One criterion-5/6 run: returns (cal_before, cal_after, alpha at 90).
fn calibration_run(seed: u64) -> (f64, f64, f64) {
    let levels = default_levels();
    let mut rng = seeds::rng_for(0x5EED + seed, 0);
    let train_rows = gen_rows(150, 10, &mut rng);
    let train_perf = twoway_system(&train_rows, &mut rng);
    let test_rows = gen_rows(1000, 10, &mut rng);
    let test_perf = twoway_system(&test_rows, &mut rng);
    let train = PerformanceDataset::new(binary_schema(10), train_rows, train_perf).unwrap();

    let hp = Hyperparams {
        depth: 2,
        epochs: 2000,
        base_lr: 0.02,
        neurons_per_layer: 20,
        laplace_scale: 0.1,
    };
    let em = train_ensemble(&train, &hp, &TrainOptions { seed, ..TrainOptions::default() })
        .expect("ensemble trains");

    let mut cal_iv: Vec<Vec<(f64, f64)>> = vec![Vec::new(); levels.len()];
    let mut raw_iv: Vec<Vec<(f64, f64)>> = vec![Vec::new(); levels.len()];
    for (r, x) in test_rows.iter().enumerate() {
        let popts = PredictOptions { samples: 300, seed: seeds::derive(seed, r as u64) };
        let ev = em.evaluate_row(x, &levels, &popts).unwrap();
        for j in 0..levels.len() {
            cal_iv[j].push(ev.calibrated[j]);
            raw_iv[j].push(ev.uncalibrated[j]);
        }
    }
    let alphas_after: Vec<f64> = cal_iv
        .iter()
        .map(|iv| observed_frequency(iv, &test_perf).unwrap())
        .collect();
    let alphas_before: Vec<f64> = raw_iv
        .iter()
        .map(|iv| observed_frequency(iv, &test_perf).unwrap())
        .collect();
    let cal_after = cal_score_from_curve(&levels, &alphas_after, None).unwrap();
    let cal_before = cal_score_from_curve(&levels, &alphas_before, None).unwrap();
    let alpha90 = alphas_after[levels.iter().position(|&l| l == 90.0).unwrap()];
    (cal_before, cal_after, alpha90)
}

#[test]
fn criterion_5_and_6_calibration_improvement_and_coverage() {
    let t0 = Instant::now();
    let mut ratios = Vec::new();
    let mut posts = Vec::new();
    let mut alpha90s = Vec::new();
    for seed in 0..5u64 {
        let (before, after, alpha90) = calibration_run(seed);
        println!(
            "  seed {seed}: cal before {before:.2}, after {after:.2} (ratio {:.3}), alpha(90) {alpha90:.1}",
            after / before
        );
        ratios.push(after / before);
        posts.push(after);
        alpha90s.push(alpha90);
    }
    let med_ratio = median(&ratios);
    let med_post = median(&posts);
    let med_alpha90 = median(&alpha90s);
    let dt = t0.elapsed();

    assert!(
        med_ratio <= 0.5,
        "criterion 5: FAIL — median post/pre cal ratio {med_ratio:.3} exceeds 0.5"
    );
    assert!(med_post <= 100.0, "criterion 5: FAIL — median post-cal score {med_post:.2} exceeds 100");
    assert!(dt.as_secs() < 15 * 60, "criterion 5: FAIL — took {dt:?}, budget 15 min");
    println!(
        "criterion 5 (calibration improvement): PASS — median cal ratio {med_ratio:.3} <= 0.5, \
         median post-calibration cal {med_post:.2} <= 100 over 5 seeds ({dt:?})"
    );

    assert!(
        (80.0..=98.0).contains(&med_alpha90),
        "criterion 6: FAIL — median alpha(90) {med_alpha90:.1} outside [80, 98]"
    );
    println!(
        "criterion 6 (coverage property): PASS — calibrated 90% intervals cover \
         {med_alpha90:.1}% of test truths (median over 5 seeds, bounds [80, 98])"
    );
}

/// Criterion 7 system: strong 3-way interactions over 10 binary options.
fn threeway_system(rows: &[Vec<f64>], rng: &mut impl Rng) -> Vec<f64> {
    rows.iter()
        .map(|r| {
            let f = 40.0 + 35.0 * r[0] * r[1] * r[2] + 28.0 * r[3] * r[4] * r[5]
                - 30.0 * r[1] * r[4] * r[6]
                + 8.0 * r[7];
            f + standard_normal(rng)
        })
        .collect()
}

#[test]
fn criterion_7_scalar_accuracy_ordering() {
    let t0 = Instant::now();
    let mut ens_mapes = Vec::new();
    let mut ols_mapes = Vec::new();
    for seed in 0..10u64 {
        let mut rng = seeds::rng_for(0xACC7 + seed, 0);
        let train_rows = gen_rows(250, 10, &mut rng);
        let train_perf = threeway_system(&train_rows, &mut rng);
        let test_rows = gen_rows(1000, 10, &mut rng);
        let test_perf = threeway_system(&test_rows, &mut rng);
        let train =
            PerformanceDataset::new(binary_schema(10), train_rows.clone(), train_perf.clone())
                .unwrap();

        let hp = Hyperparams {
            depth: 2,
            epochs: 2000,
            base_lr: 0.01,
            neurons_per_layer: 40,
            laplace_scale: 0.05,
        };
        let em = train_ensemble(&train, &hp, &TrainOptions { seed, ..TrainOptions::default() })
            .expect("ensemble trains");
        let ens_preds: Vec<f64> = test_rows
            .iter()
            .enumerate()
            .map(|(r, x)| {
                em.predict(x, &PredictOptions { samples: 300, seed: seeds::derive(seed, r as u64) })
                    .unwrap()
            })
            .collect();
        let ens = mape(&ens_preds, &test_perf).unwrap();

        let ols = LinearBaseline::fit(&train_rows, &train_perf, 0.0).unwrap();
        let ols_preds: Vec<f64> = test_rows.iter().map(|x| ols.predict(x)).collect();
        let ols_m = mape(&ols_preds, &test_perf).unwrap();
        println!("  seed {seed}: ensemble MAPE {ens:.2}, OLS MAPE {ols_m:.2} (ratio {:.3})", ens / ols_m);
        ens_mapes.push(ens);
        ols_mapes.push(ols_m);
    }
    let ratios: Vec<f64> = ens_mapes[..5]
        .iter()
        .zip(&ols_mapes[..5])
        .map(|(e, o)| e / o)
        .collect();
    let med_ratio = median(&ratios);
    let decision = welch_t_test(&ens_mapes, &ols_mapes, 0.05).unwrap();
    let dt = t0.elapsed();

    assert!(
        med_ratio <= 0.7,
        "criterion 7: FAIL — median MAPE ratio {med_ratio:.3} exceeds 0.7"
    );
    assert_eq!(
        decision,
        WelchDecision::ABetter,
        "criterion 7: FAIL — Welch test over 10 seeds did not favor the ensemble"
    );
    assert!(dt.as_secs() < 20 * 60, "criterion 7: FAIL — took {dt:?}, budget 20 min");
    println!(
        "criterion 7 (scalar-accuracy ordering): PASS — median ensemble/OLS MAPE ratio \
         {med_ratio:.3} <= 0.7 over 5 seeds; Welch test over 10 seeds favors the ensemble ({dt:?})"
    );
}

#[test]
fn criterion_8_bo_competence() {
    let t0 = Instant::now();
    let space = HpSpace::new(8);
    let objective = |hp: &Hyperparams| {
        let e = space.encode(hp).unwrap();
        3.0 * (e[2] - 0.35).powi(2)
            + 2.0 * (e[4] - 0.7).powi(2)
            + 0.5 * (e[1] - 0.5).powi(2)
            + 0.8 * (e[3] - 1.0).powi(2)
    };

    // true optimum and span by dense brute force over the mixed space
    let mut true_min = f64::INFINITY;
    let mut true_max = f64::NEG_INFINITY;
    for &epochs in &EPOCH_CHOICES {
        for &nm in &space.neuron_choices() {
            for i in 0..300 {
                for j in 0..300 {
                    let cand = Hyperparams {
                        depth: 1,
                        epochs,
                        base_lr: 10f64
                            .powf(-4.0 + 3.0 * i as f64 / 299.0)
                            .clamp(LR_MIN, LR_MAX),
                        neurons_per_layer: nm,
                        laplace_scale: 10f64
                            .powf(-4.0 + 4.0 * j as f64 / 299.0)
                            .clamp(LAPLACE_MIN, LAPLACE_MAX),
                    };
                    let v = objective(&cand);
                    true_min = true_min.min(v);
                    true_max = true_max.max(v);
                }
            }
        }
    }
    let span = true_max - true_min;

    let mut hits = 0;
    for seed in 0..10u64 {
        let mut obj = |hp: &Hyperparams, _s: u64| objective(hp);
        let records = run_bo(&space, 1, BO_INIT_POINTS, BO_GROWTH_ITERS, seed, &mut obj).unwrap();
        assert_eq!(records.len(), 16, "4 + 12 evaluations");
        let best = records.iter().map(|r| r.score).fold(f64::INFINITY, f64::min);
        if best <= true_min + 0.05 * span {
            hits += 1;
        }
        println!(
            "  seed {seed}: best {best:.5} vs optimum {true_min:.5} (span {span:.4}) {}",
            if best <= true_min + 0.05 * span { "hit" } else { "miss" }
        );
    }

    // scripted stopping-rule trace: best scores {10, 8, 9} select depth 2
    let mut scripted = |hp: &Hyperparams, _s: u64| match hp.depth {
        1 => 10.0,
        2 => 8.0,
        _ => 9.0,
    };
    let (depth, records) = tune_depth_with(&space, 0xC8, &mut scripted).unwrap();
    assert_eq!(depth, 2, "criterion 8: FAIL — scripted trace must select depth 2");
    assert_eq!(records.len(), 48, "criterion 8: FAIL — scripted trace must stop after depth 3");

    let dt = t0.elapsed();
    assert!(
        hits >= 8,
        "criterion 8: FAIL — BO reached within 5% of the optimum in only {hits}/10 seeds"
    );
    assert!(dt.as_secs() < 5 * 60, "criterion 8: FAIL — took {dt:?}, budget 5 min");
    println!(
        "criterion 8 (BO competence): PASS — within 5% of the surrogate optimum in {hits}/10 \
         seeds; layer-growth stopping rule selects depth 2 on the scripted {{10, 8, 9}} trace ({dt:?})"
    );
}

#[test]
fn criterion_9_real_data_spot_check() {
    let path = std::env::var("PERFBAND_LLVM_CSV").ok().map(std::path::PathBuf::from).or_else(|| {
        let local = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/llvm.csv");
        local.exists().then_some(local)
    });
    let Some(path) = path else {
        println!(
            "criterion 9 (real-data spot check): SKIP — LLVM dataset not present (set \
             PERFBAND_LLVM_CSV or place data/llvm.csv to enable)"
        );
        return;
    };
    let t0 = Instant::now();
    let ds = perfband::dataset::load_dataset(&path, "performance").expect("LLVM CSV loads");
    let picks = perfband::dataset::twise_sample_rows(&ds, 3, 0xC9).unwrap();
    let train = ds.subset(&picks);
    println!("  t=3 sample: {} of {} configurations", train.len(), ds.len());

    let (pre, _) = perfband::dataset::remove_collinear(&train, 1e-8).unwrap();
    let (depth, records) = perfband::hpo::tune_depth(&pre, 0xC9).unwrap();
    let (hp, _) = perfband::hpo::final_tune(&pre, depth, &records, 0xC9).unwrap();
    println!("  tuned: {hp:?}");

    let em = train_ensemble(&train, &hp, &TrainOptions { seed: 0xC9, ..TrainOptions::default() })
        .unwrap();
    let levels = default_levels();
    let mut preds = Vec::with_capacity(ds.len());
    let mut cal_iv: Vec<Vec<(f64, f64)>> = vec![Vec::new(); levels.len()];
    for (r, x) in ds.rows.iter().enumerate() {
        let popts = PredictOptions { samples: 300, seed: seeds::derive(0xC9, r as u64) };
        let ev = em.evaluate_row(x, &levels, &popts).unwrap();
        preds.push(ev.prediction);
        for j in 0..levels.len() {
            cal_iv[j].push(ev.calibrated[j]);
        }
    }
    let m = mape(&preds, &ds.performance).unwrap();
    let alphas: Vec<f64> = cal_iv
        .iter()
        .map(|iv| observed_frequency(iv, &ds.performance).unwrap())
        .collect();
    let cal = cal_score_from_curve(&levels, &alphas, None).unwrap();
    let dt = t0.elapsed();
    assert!(m <= 10.0, "criterion 9: FAIL — MAPE {m:.2} exceeds 10");
    assert!(cal <= 120.0, "criterion 9: FAIL — cal {cal:.2} exceeds 120");
    assert!(dt.as_secs() < 3600, "criterion 9: FAIL — took {dt:?}, budget 1 h");
    println!("criterion 9 (real-data spot check): PASS — MAPE {m:.2} <= 10, cal {cal:.2} <= 120 ({dt:?})");
}

#[test]
fn criterion_10_pipeline_determinism() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let train_csv = dir.path().join("train.csv");
    let mut rng = seeds::rng_for(0xC10, 0);
    let mut csv = String::from("a,b,c,d,performance\n");
    for _ in 0..18 {
        let x: Vec<f64> = (0..4).map(|_| f64::from(rng.gen::<bool>())).collect();
        let y = 30.0 + 20.0 * x[0] + 10.0 * x[1] + 5.0 * x[0] * x[1] - 4.0 * x[2]
            + rng.gen_range(-0.5..0.5);
        csv.push_str(&format!("{},{},{},{},{y}\n", x[0], x[1], x[2], x[3]));
    }
    std::fs::write(&train_csv, csv).unwrap();
    let input_csv = dir.path().join("in.csv");
    let mut input = String::from("a,b,c,d\n");
    for bits in 0..16u32 {
        input.push_str(&format!(
            "{},{},{},{}\n",
            bits & 1,
            (bits >> 1) & 1,
            (bits >> 2) & 1,
            (bits >> 3) & 1
        ));
    }
    std::fs::write(&input_csv, input).unwrap();

    let run_pipeline = |tag: &str| -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let trace = dir.path().join(format!("trace_{tag}.json"));
        let model = dir.path().join(format!("model_{tag}.json"));
        let pred = dir.path().join(format!("pred_{tag}.csv"));
        let bin = env!("CARGO_BIN_EXE_perfband");
        let run = |args: &[&str]| {
            let out = std::process::Command::new(bin).args(args).output().unwrap();
            assert!(
                out.status.success(),
                "criterion 10: FAIL — {:?}: {}",
                args,
                String::from_utf8_lossy(&out.stderr)
            );
        };
        run(&[
            "tune", "--train", train_csv.to_str().unwrap(), "--out", trace.to_str().unwrap(),
            "--seed", "17",
        ]);
        run(&[
            "train", "--train", train_csv.to_str().unwrap(), "--trace", trace.to_str().unwrap(),
            "--out", model.to_str().unwrap(), "--seed", "17", "--samples", "120",
        ]);
        run(&[
            "predict", "--model", model.to_str().unwrap(), "--input", input_csv.to_str().unwrap(),
            "--out", pred.to_str().unwrap(), "--levels", "50,90", "--samples", "120", "--seed",
            "17",
        ]);
        (
            std::fs::read(&trace).unwrap(),
            std::fs::read(&model).unwrap(),
            std::fs::read(&pred).unwrap(),
        )
    };

    let first = run_pipeline("a");
    let second = run_pipeline("b");
    assert_eq!(first.0, second.0, "criterion 10: FAIL — tuning traces differ");
    assert_eq!(first.1, second.1, "criterion 10: FAIL — model artifacts differ");
    assert_eq!(first.2, second.2, "criterion 10: FAIL — prediction files differ");
    let dt = t0.elapsed();
    assert!(dt.as_secs() < 15 * 60, "criterion 10: FAIL — took {dt:?}, budget 15 min");
    println!(
        "criterion 10 (pipeline determinism): PASS — tune, train and predict artifacts are \
         byte-identical across two seeded runs ({dt:?})"
    );
}
