//! Acceptance suite: one test per shipped acceptance criterion, named
//! `criterion_<n>_*` so `cargo test` prints exactly one pass/fail line per
//! criterion.
//!
//! Criteria 1-3 drive the compiled binary against the bundled dataset and
//! config and check the published artifacts. Criteria 4-9 check the numeric
//! kernels against independent oracles (pair counting, finite differences,
//! closed forms, and combinatorial fold laws).

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use prescreen_core::{
    adam_step, auc, gbt_split_gain, make_folds, Activation, AdamState, CvPlan, LayerSpec, Network,
    NetworkSpec, OptimizerKind,
};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_prescreen")
}

/// Workspace root (the directory holding `prescreen.toml` and `data/`).
fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).unwrap().to_path_buf()
}

/// Runs the binary from the workspace root and returns elapsed wall time.
fn run_in_root(args: &[&str]) -> Duration {
    let start = Instant::now();
    let output = Command::new(bin())
        .args(args)
        .current_dir(repo_root())
        .output()
        .expect("binary should run");
    let elapsed = start.elapsed();
    assert!(
        output.status.success(),
        "`prescreen {}` failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        args.join(" "),
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    elapsed
}

/// Parses a comma-separated artifact into (header, rows).
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().expect("csv header").split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

// ---------------------------------------------------------------------------
// Criterion 1: `describe` reproduces the reference summary table.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_describe_matches_reference_summary() {
    let out = tempfile::tempdir().unwrap();
    let out_arg = out.path().to_str().unwrap().to_string();
    let elapsed = run_in_root(&["describe", "--out", &out_arg]);

    let (header, rows) = read_csv(&out.path().join("describe.csv"));
    assert_eq!(header, ["feature", "mean", "std", "min", "max"]);
    let table: HashMap<String, Vec<f64>> = rows
        .into_iter()
        .map(|r| (r[0].clone(), r[1..].iter().map(|v| v.parse::<f64>().unwrap()).collect()))
        .collect();

    // (feature, mean, std, min, max), each to be matched within +-0.01.
    const REFERENCE: [(&str, f64, f64, f64, f64); 8] = [
        ("Age", 57.30, 16.11, 24.0, 89.0),
        ("BMI", 27.58, 5.02, 18.37, 38.58),
        ("Glucose", 97.79, 22.53, 60.0, 201.0),
        ("Insulin", 10.01, 10.07, 2.43, 58.46),
        ("HOMA", 2.69, 3.64, 0.47, 25.05),
        ("Leptin", 26.62, 19.18, 4.31, 90.28),
        ("Adiponectin", 10.18, 6.84, 1.66, 38.04),
        ("Resistin", 14.73, 12.39, 3.21, 82.10),
    ];
    for (name, mean, std, min, max) in REFERENCE {
        let got = table.get(name).unwrap_or_else(|| panic!("{name} missing from describe.csv"));
        for (label, want, have) in
            [("mean", mean, got[0]), ("std", std, got[1]), ("min", min, got[2]), ("max", max, got[3])]
        {
            assert!(
                (have - want).abs() <= 0.01 + 1e-12,
                "{name} {label}: got {have}, want {want} +- 0.01"
            );
        }
    }

    assert!(elapsed < Duration::from_secs(1), "describe took {elapsed:?}, budget 1s");
    println!("criterion 1: PASS (describe matches the reference summary within 0.01 in {elapsed:?})");
}

// ---------------------------------------------------------------------------
// Criterion 2: the default selection sweep ranks Age and Resistin in the top
// three and HOMA, BMI, RR_GBD_center, RR_GBD_lower in the bottom five.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_selection_sweep_ranks() {
    let out = tempfile::tempdir().unwrap();
    let out_arg = out.path().to_str().unwrap().to_string();
    let elapsed = run_in_root(&["select", "--out", &out_arg]);

    let (header, rows) = read_csv(&out.path().join("selection.csv"));
    assert_eq!(header[0], "feature");
    assert_eq!(header[1], "frequency");
    // Rows arrive ranked by selection frequency, highest first.
    let order: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(order.len(), 15, "expected all 15 features in selection.csv");
    let top3: HashSet<&str> = order[..3].iter().copied().collect();
    let bottom5: HashSet<&str> = order[order.len() - 5..].iter().copied().collect();

    for name in ["Age", "Resistin"] {
        assert!(top3.contains(name), "{name} not in top 3: {:?}", &order[..3]);
    }
    for name in ["HOMA", "BMI", "RR_GBD_center", "RR_GBD_lower"] {
        assert!(
            bottom5.contains(name),
            "{name} not in bottom 5: {:?}",
            &order[order.len() - 5..]
        );
    }

    assert!(elapsed < Duration::from_secs(600), "select took {elapsed:?}, budget 10min");
    println!("criterion 2: PASS (sweep ranking has the required head and tail in {elapsed:?})");
}

// ---------------------------------------------------------------------------
// Criterion 3: the default benchmark lands every model in its AUC band.
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_benchmark_auc_bands() {
    let out = tempfile::tempdir().unwrap();
    let out_arg = out.path().to_str().unwrap().to_string();
    let elapsed = run_in_root(&["bench", "--out", &out_arg]);

    let (header, rows) = read_csv(&out.path().join("bench_summary.csv"));
    assert_eq!(header, ["rank", "model", "mean", "std", "p2_5", "p97_5", "samples"]);
    let stats: HashMap<String, (f64, f64)> = rows
        .iter()
        .map(|r| (r[1].clone(), (r[2].parse::<f64>().unwrap(), r[3].parse::<f64>().unwrap())))
        .collect();
    assert_eq!(stats.len(), 8, "expected all eight models in bench_summary.csv");

    let (deep_mean, deep_std) = stats["deep_learning"];
    let (logit_mean, _) = stats["logistic_regression"];
    let (sgd_mean, _) = stats["stochastic_gradient"];
    let best_mean = stats.values().map(|&(m, _)| m).fold(f64::NEG_INFINITY, f64::max);
    let min_other_std = stats
        .iter()
        .filter(|(k, _)| k.as_str() != "deep_learning")
        .map(|(_, &(_, s))| s)
        .fold(f64::INFINITY, f64::min);

    assert!(
        (0.81..=0.93).contains(&deep_mean),
        "deep_learning mean AUC {deep_mean} outside [0.81, 0.93]"
    );
    assert!(
        (0.73..=0.89).contains(&logit_mean),
        "logistic_regression mean AUC {logit_mean} outside [0.73, 0.89]"
    );
    assert!(
        sgd_mean <= best_mean - 0.08,
        "stochastic_gradient mean {sgd_mean} not at least 0.08 below best {best_mean}"
    );
    assert!(
        deep_std <= min_other_std + 0.02,
        "deep_learning std {deep_std} exceeds min other std {min_other_std} + 0.02"
    );

    assert!(elapsed < Duration::from_secs(1800), "bench took {elapsed:?}, budget 30min");
    println!("criterion 3: PASS (AUC bands hold: deep {deep_mean:.3}, logistic {logit_mean:.3}, sgd {sgd_mean:.3}, in {elapsed:?})");
}

// ---------------------------------------------------------------------------
// Criterion 4: AUC equals the O(n^2) pair-counting oracle to 1e-12.
// ---------------------------------------------------------------------------

/// Literal definition: fraction of (positive, negative) pairs the score
/// orders correctly, ties counting one half.
fn auc_pair_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0_f64;
    let mut pairs = 0.0_f64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn criterion_4_auc_matches_pair_count_oracle() {
    let mut rng = StdRng::seed_from_u64(0xA0C);
    for case in 0..1000 {
        let n = rng.gen_range(2..=40);
        let mut labels: Vec<u8>;
        loop {
            labels = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
            if labels.contains(&0) && labels.contains(&1) {
                break;
            }
        }
        // Half the cases use a coarse discrete grid so ties actually occur.
        let scores: Vec<f64> = if case % 2 == 0 {
            (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()
        } else {
            (0..n).map(|_| f64::from(rng.gen_range(0..5)) * 0.25).collect()
        };
        let got = auc(&scores, &labels).expect("auc should accept both classes");
        let want = auc_pair_oracle(&scores, &labels);
        assert!(
            (got - want).abs() <= 1e-12,
            "case {case}: auc {got} vs oracle {want} (n = {n})"
        );
    }
    println!("criterion 4: PASS (AUC matches the pair-counting oracle to 1e-12 on 1000 cases)");
}

// ---------------------------------------------------------------------------
// Criterion 5: analytic gradients match central finite differences.
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_backprop_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(55);
    let activations = [Activation::Relu, Activation::Sigmoid, Activation::Tanh];
    let reg_grid = [0.0, 1e-3, 1e-2];
    for case in 0..100 {
        let input_dim = rng.gen_range(1..=4);
        let depth = rng.gen_range(1..=2);
        let hidden: Vec<LayerSpec> = (0..depth)
            .map(|_| LayerSpec {
                width: rng.gen_range(1..=4),
                activation: activations[rng.gen_range(0..3)],
                kernel_l1: reg_grid[rng.gen_range(0..3)],
                kernel_l2: reg_grid[rng.gen_range(0..3)],
                bias_l2: reg_grid[rng.gen_range(0..3)],
                activity_l2: reg_grid[rng.gen_range(0..3)],
            })
            .collect();
        let spec = NetworkSpec {
            input_dim,
            hidden,
            epochs: 1,
            batch_size: 1,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            seed: case,
        };
        let mut net = Network::new(spec).unwrap();
        net.initialize(&mut rng);

        let n_rows = rng.gen_range(1..=5);
        let x: Vec<f64> = (0..n_rows * input_dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let labels: Vec<u8> = (0..n_rows).map(|_| u8::from(rng.gen_bool(0.5))).collect();

        let grads = net.gradients(&x, &labels).unwrap();
        let params = net.params().to_vec();
        let h = 1e-6;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += h;
            net.set_params(plus).unwrap();
            let up = net.loss(&x, &labels).unwrap();
            let mut minus = params.clone();
            minus[i] -= h;
            net.set_params(minus).unwrap();
            let down = net.loss(&x, &labels).unwrap();
            net.set_params(params.clone()).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!(
                (grads[i] - fd).abs() <= 1e-4,
                "case {case}, param {i}: backprop {} vs finite difference {fd}",
                grads[i]
            );
        }
    }
    println!("criterion 5: PASS (backprop matches central differences to 1e-4 on 100 random nets)");
}

// ---------------------------------------------------------------------------
// Criterion 6: one Adam step reproduces the hand-computed update.
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_adam_first_step_hand_values() {
    let mut state = AdamState::new(3);
    let mut params = vec![0.5, -1.25, 2.0];
    let grads = vec![0.2, -0.4, 0.0];
    adam_step(&mut state, &mut params, &grads, 0.001).unwrap();

    // At t = 1 the bias corrections cancel exactly: m_hat = g, v_hat = g^2,
    // so p' = p - lr * g / (|g| + eps). Values below are that expression
    // evaluated by hand for lr = 0.001, eps = 1e-8.
    let expected = [0.49900000005_f64, -1.249000000025_f64, 2.0_f64];
    assert_eq!(state.t, 1);
    for i in 0..3 {
        assert!(
            (params[i] - expected[i]).abs() <= 1e-12,
            "param {i}: got {}, want {}",
            params[i],
            expected[i]
        );
        let m_want = 0.1 * grads[i];
        let v_want = 0.001 * grads[i] * grads[i];
        assert!((state.m[i] - m_want).abs() <= 1e-15, "m[{i}]");
        assert!((state.v[i] - v_want).abs() <= 1e-15, "v[{i}]");
    }
    println!("criterion 6: PASS (first Adam step matches hand values to 1e-12)");
}

// ---------------------------------------------------------------------------
// Criterion 7: bench output bytes do not depend on the run or worker count.
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_bench_bytes_stable_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    for file in ["coimbra.csv", "rr_age_gbd.csv", "rr_bmi_liu.csv"] {
        std::fs::copy(root.join("data").join(file), dir.path().join(file)).unwrap();
    }
    let config_path = dir.path().join("cfg.toml");
    let config = format!(
        r#"dataset = "{dir}/coimbra.csv"
age_risk_table = "{dir}/rr_age_gbd.csv"
bmi_risk_table = "{dir}/rr_bmi_liu.csv"
features = ["Age", "Glucose", "Resistin", "Leptin"]
model_kinds = [
    "svm",
    "neural_network",
    "logistic_regression",
    "xgboost_like",
    "random_forest",
    "naive_bayes",
    "stochastic_gradient",
]

[cv]
k = 4
repetitions = 3
seed = 99
"#,
        dir = dir.path().display()
    );
    std::fs::write(&config_path, config).unwrap();

    let mut summaries = Vec::new();
    for (label, workers) in [("first", "1"), ("repeat", "1"), ("parallel", "8")] {
        let out = dir.path().join(label);
        let output = Command::new(bin())
            .args([
                "bench",
                "--config",
                config_path.to_str().unwrap(),
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .expect("binary should run");
        assert!(
            output.status.success(),
            "bench ({label}) failed:\n{}",
            String::from_utf8_lossy(&output.stderr)
        );
        summaries.push(std::fs::read(out.join("bench_summary.csv")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1], "summary CSV changed between identical runs");
    assert_eq!(summaries[0], summaries[2], "summary CSV changed between --workers 1 and 8");
    println!("criterion 7: PASS (bench summary bytes identical across runs and worker counts)");
}

// ---------------------------------------------------------------------------
// Criterion 8: fold plans partition the rows and respect stratification.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_fold_plans_partition_and_stratify() {
    let mut rng = StdRng::seed_from_u64(88);
    for case in 0..500 {
        let n = rng.gen_range(10..=160);
        let k = rng.gen_range(2..=8.min(n));
        let plan = CvPlan {
            n,
            k,
            repetitions: rng.gen_range(1..=3),
            stratified: rng.gen_bool(0.5),
            seed: rng.gen(),
        };
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        labels[0] = 0;
        labels[1] = 1;
        let class_sizes =
            [labels.iter().filter(|&&l| l == 0).count(), labels.iter().filter(|&&l| l == 1).count()];

        let reps = make_folds(&plan, &labels).unwrap();
        assert_eq!(reps.len(), plan.repetitions, "case {case}: repetition count");
        for (r, splits) in reps.iter().enumerate() {
            assert_eq!(splits.len(), k, "case {case} rep {r}: fold count");
            let mut seen = vec![false; n];
            for (f, (train, test)) in splits.iter().enumerate() {
                // Test folds are disjoint across the repetition...
                for &row in test {
                    assert!(row < n, "case {case} rep {r} fold {f}: row {row} out of range");
                    assert!(!seen[row], "case {case} rep {r}: row {row} in two test folds");
                    seen[row] = true;
                }
                // ...and each split's train set is exactly the complement.
                assert_eq!(train.len() + test.len(), n, "case {case} rep {r} fold {f}: sizes");
                let test_set: HashSet<usize> = test.iter().copied().collect();
                assert!(
                    train.iter().all(|row| !test_set.contains(row)),
                    "case {case} rep {r} fold {f}: train/test overlap"
                );
                // Fold sizes stay within one of proportional.
                assert!(
                    (test.len() as f64 - n as f64 / k as f64).abs() < 1.0,
                    "case {case} rep {r} fold {f}: test size {} vs n/k {}",
                    test.len(),
                    n as f64 / k as f64
                );
                if plan.stratified {
                    for class in [0u8, 1u8] {
                        let in_fold = test.iter().filter(|&&row| labels[row] == class).count();
                        let proportional = class_sizes[class as usize] as f64 / k as f64;
                        assert!(
                            (in_fold as f64 - proportional).abs() < 1.0,
                            "case {case} rep {r} fold {f}: class {class} count {in_fold} vs proportional {proportional}"
                        );
                    }
                }
            }
            // ...and cover every row.
            assert!(seen.iter().all(|&s| s), "case {case} rep {r}: rows missing from test folds");
        }
    }
    println!("criterion 8: PASS (500 random fold plans partition, cover, and stratify)");
}

// ---------------------------------------------------------------------------
// Criterion 9: split gain matches its closed forms to 1e-12.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_split_gain_closed_forms() {
    let mut rng = StdRng::seed_from_u64(99);

    // An empty child contributes nothing: the gain is exactly -gamma.
    for _ in 0..200 {
        let g = rng.gen_range(-5.0..5.0);
        let h = rng.gen_range(0.1..5.0);
        let lambda = rng.gen_range(0.1..5.0);
        let gamma = rng.gen_range(-1.0..1.0);
        let gain = gbt_split_gain(g, h, 0.0, 0.0, lambda, gamma);
        assert!((gain - (-gamma)).abs() <= 1e-12, "empty child: {gain} vs {}", -gamma);
    }

    // With lambda = 0 and children sharing the parent's g/h ratio the split
    // scores exactly -gamma as well.
    for _ in 0..200 {
        let ratio = rng.gen_range(-3.0..3.0);
        let h_l = rng.gen_range(0.1..5.0);
        let h_r = rng.gen_range(0.1..5.0);
        let gamma = rng.gen_range(-1.0..1.0);
        let gain = gbt_split_gain(ratio * h_l, h_l, ratio * h_r, h_r, 0.0, gamma);
        assert!((gain - (-gamma)).abs() <= 1e-12, "proportional children: {gain} vs {}", -gamma);
    }

    // Hand-computed case: g_l = -2, h_l = 3, g_r = 1, h_r = 2, lambda = 1,
    // gamma = 0.5 gives 0.5 * (4/4 + 1/3 - 1/6) - 0.5 = 1/12.
    let hand = gbt_split_gain(-2.0, 3.0, 1.0, 2.0, 1.0, 0.5);
    assert!((hand - 1.0 / 12.0).abs() <= 1e-12, "hand case: {hand} vs {}", 1.0 / 12.0);

    // General random inputs against an independently written expression.
    for _ in 0..200 {
        let g_l = rng.gen_range(-5.0..5.0);
        let g_r = rng.gen_range(-5.0..5.0);
        let h_l = rng.gen_range(0.1..5.0);
        let h_r = rng.gen_range(0.1..5.0);
        let lambda = rng.gen_range(0.0..5.0);
        let gamma = rng.gen_range(-1.0..1.0);
        let want = 0.5
            * (g_l * g_l / (h_l + lambda) + g_r * g_r / (h_r + lambda)
                - (g_l + g_r) * (g_l + g_r) / (h_l + h_r + lambda))
            - gamma;
        let got = gbt_split_gain(g_l, h_l, g_r, h_r, lambda, gamma);
        assert!((got - want).abs() <= 1e-12, "random case: {got} vs {want}");
    }
    println!("criterion 9: PASS (split gain matches closed forms to 1e-12)");
}
