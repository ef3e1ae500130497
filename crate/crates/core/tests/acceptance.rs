//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured numbers. Heavy artifacts (the CS1
//! pipeline run, the CS2 adaptation, the CS3 training pair) are built once
//! and shared across criteria.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use batchrl::batch2batch::offline_phase;
use batchrl::config::Config;
use batchrl::eval::{evaluate, EvalReport};
use batchrl::nmpc::{nmpc_monte_carlo, solve_ocp, OcpProblem};
use batchrl::pipeline::{cmd_adapt_online, cmd_nmpc_eval, cmd_run_pipeline};
use batchrl::plants::cs1::ApproximateModel;
use batchrl::plants::{cs3_switch, CaseStudy3Plant, Cs3Params, PlantKind, PlantModel};
use batchrl::policy::{load_checkpoint, GaussianPolicy};
use batchrl::reinforce::{compute_baseline, deterministic_rollout, gradient_estimate, Trajectory};
use batchrl::rng::{draw_normal, stream};

fn verdict(criterion: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {criterion}: {tag} - {detail}");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn work_root() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("batchrl-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

// ---------------------------------------------------------------------------
// Shared artifacts

struct Cs1Run {
    dir: PathBuf,
    summary: serde_json::Value,
    config: Config,
}

/// Full CS1 pipeline at the pinned defaults: offline N=100 x K0=800 at
/// alpha=1e-2 on the approximate model, transfer freeze, online 4 x 25 at
/// alpha=1e-3 on the true plant, 100-episode final evaluation.
fn cs1_run() -> &'static Cs1Run {
    static RUN: OnceLock<Cs1Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = Config::default();
        assert_eq!(config.train.epochs, 100);
        assert_eq!(config.train.episodes, 800);
        assert_eq!(config.train.step_size, 1e-2);
        assert_eq!(config.b2b.online_epochs, 4);
        assert_eq!(config.b2b.online_episodes, 25);
        let dir = work_root().join("cs1-pipeline");
        let _ = std::fs::remove_dir_all(&dir);
        let summary = cmd_run_pipeline(&config, &dir).expect("cs1 pipeline");
        Cs1Run {
            dir,
            summary,
            config,
        }
    })
}

struct Cs2Run {
    summary: serde_json::Value,
}

/// CS2 online adaptation seeded by the same offline checkpoint.
fn cs2_run() -> &'static Cs2Run {
    static RUN: OnceLock<Cs2Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let cs1 = cs1_run();
        let mut config = Config::parse_str("plant = \"cs2\"").unwrap();
        config.seed = cs1.config.seed;
        let dir = work_root().join("cs2-adapt");
        let _ = std::fs::remove_dir_all(&dir);
        let theta0 = cs1.dir.join("checkpoints/theta0.txt");
        let summary = cmd_adapt_online(&config, Some(&theta0), &dir).expect("cs2 adaptation");
        Cs2Run { summary }
    })
}

struct NmpcBaselines {
    cs1: EvalReport,
    cs2: EvalReport,
}

fn nmpc_baselines() -> &'static NmpcBaselines {
    static RUN: OnceLock<NmpcBaselines> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = Config::default();
        let model = ApproximateModel::new(config.intervals, config.substeps);
        let settings = config.nlp_settings();
        let cs1_plant = config.build_plant(PlantKind::Cs1);
        let (cs1, _) =
            nmpc_monte_carlo(cs1_plant.as_ref(), &model, &settings, 100, config.seed).unwrap();
        let cs2_plant = config.build_plant(PlantKind::Cs2);
        let (cs2, _) =
            nmpc_monte_carlo(cs2_plant.as_ref(), &model, &settings, 100, config.seed).unwrap();
        NmpcBaselines { cs1, cs2 }
    })
}

struct Cs3Training {
    /// Per-epoch mean returns of the standard (penalized) training run.
    epoch_means: Vec<f64>,
    /// Mean total applied control variation over 100 evaluation episodes,
    /// penalty-trained vs penalty-free-trained.
    variation_with_penalty: f64,
    variation_without_penalty: f64,
}

fn cs3_training() -> &'static Cs3Training {
    static RUN: OnceLock<Cs3Training> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut config = Config::parse_str("plant = \"cs3\"").unwrap();
        config.seed = 1;
        assert_eq!(config.train.epochs, 100);
        assert_eq!(config.train.episodes, 500);

        let total_variation = |trajectories: &[Trajectory]| -> f64 {
            trajectories
                .iter()
                .map(|t| {
                    t.actions
                        .windows(2)
                        .map(|w| (w[1][0] - w[0][0]).abs() + (w[1][1] - w[0][1]).abs())
                        .sum::<f64>()
                })
                .sum::<f64>()
                / trajectories.len() as f64
        };

        let train_once = |penalized: bool| -> (Vec<f64>, f64) {
            let approx: Box<CaseStudy3Plant> = {
                let base =
                    CaseStudy3Plant::new(config.cs3, config.intervals, config.substeps, true)
                        .with_duration(config.cs3_duration_hours);
                Box::new(if penalized {
                    base
                } else {
                    base.without_du_penalty()
                })
            };
            let policy = GaussianPolicy::new(config.policy_config()).unwrap();
            let params = policy.init_params(config.seed);
            let mut means = Vec::new();
            let (theta, _) = offline_phase(
                &policy,
                approx.as_ref(),
                params,
                &config.b2b_config(),
                &config.train_config(),
                |r, _| means.push(r.report.mean),
            )
            .unwrap();
            let plant = config.build_plant(PlantKind::Cs3);
            let (_, trajectories) =
                evaluate(&policy, &theta, plant.as_ref(), 100, 1.0, 17).unwrap();
            (means, total_variation(&trajectories))
        };

        let (epoch_means, variation_with_penalty) = train_once(true);
        let (_, variation_without_penalty) = train_once(false);
        Cs3Training {
            epoch_means,
            variation_with_penalty,
            variation_without_penalty,
        }
    })
}

// ---------------------------------------------------------------------------
// 1. Offline CS1 reproduction

#[test]
fn criterion_01_offline_cs1_reproduction() {
    let run = cs1_run();
    let final_mean = run.summary["offline"]["final_mean_return"]
        .as_f64()
        .expect("offline mean recorded");
    verdict(
        "1 (offline CS1 reproduction)",
        (final_mean - 0.64).abs() <= 0.03,
        &format!("final offline epoch mean return {final_mean:.4}, target 0.64 +/- 0.03"),
    );
}

// ---------------------------------------------------------------------------
// 2. OCP cross-check

#[test]
fn criterion_02_ocp_cross_check() {
    let run = cs1_run();
    let model = ApproximateModel::new(run.config.intervals, run.config.substeps);
    let sol = solve_ocp(
        &OcpProblem {
            model: &model,
            start_interval: 0,
            current_state: vec![1.0, 0.0],
        },
        &run.config.nlp_settings(),
        &mut stream(run.config.seed, &[0x0c9]),
        None,
    )
    .unwrap();
    let (ck_config, theta0) = load_checkpoint(&run.dir.join("checkpoints/theta0.txt")).unwrap();
    let mut policy = GaussianPolicy::new(ck_config).unwrap();
    let noise_free = deterministic_rollout(&mut policy, &theta0, &model, 1.0)
        .unwrap()
        .ret;
    let ocp_ok = (sol.objective - 0.64).abs() <= 0.01;
    let gap_ok = (sol.objective - noise_free).abs() <= 0.03;
    verdict(
        "2 (OCP cross-check)",
        ocp_ok && gap_ok,
        &format!(
            "OCP objective {:.4} (target 0.64 +/- 0.01); policy noise-free return {:.4} (gap {:.4} <= 0.03)",
            sol.objective,
            noise_free,
            (sol.objective - noise_free).abs()
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Online adaptation

#[test]
fn criterion_03_online_adaptation() {
    let run = cs1_run();
    let means = run.summary["online"]["mean_return_per_epoch"]
        .as_array()
        .expect("per-epoch online means");
    assert_eq!(means.len(), 4);
    let last = means.last().unwrap().as_f64().unwrap();
    // Target 0.58; the initial condition is a modeling choice, so a
    // documented 0.05 slack band applies. The run summary must carry the
    // discrepancy note whenever the slack is used.
    let slack_floor = 0.58 - 0.05;
    let documented = !run.summary["notes"].as_array().unwrap().is_empty()
        && run.summary["online_targets"]["slack"].as_f64() == Some(0.05);
    let pass = last >= 0.58 || (last >= slack_floor && documented);
    verdict(
        "3 (online adaptation)",
        pass,
        &format!(
            "epoch-4 mean return over 25 episodes = {last:.4}; target >= 0.58, \
             accepted slack floor {slack_floor:.2} with summary documentation ({documented})"
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. RL vs NMPC ordering

#[test]
fn criterion_04_rl_vs_nmpc_ordering() {
    let rl_cs1 = cs1_run().summary["eval"]["mean"].as_f64().unwrap();
    let rl_cs2 = cs2_run().summary["eval"]["mean"].as_f64().unwrap();
    let nmpc = nmpc_baselines();
    let cs1_ok = rl_cs1 > nmpc.cs1.mean;
    let cs2_ok = rl_cs2 > nmpc.cs2.mean;
    verdict(
        "4 (RL >= NMPC ordering)",
        cs1_ok && cs2_ok,
        &format!(
            "cs1: adapted policy {rl_cs1:.4} vs NMPC {:.4} ({}); \
             cs2: adapted policy {rl_cs2:.4} vs NMPC {:.4} ({}) over 100 episodes each",
            nmpc.cs1.mean,
            if cs1_ok { "ok" } else { "inverted" },
            nmpc.cs2.mean,
            if cs2_ok { "ok" } else { "inverted" },
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. Estimator correctness on the analytic Gaussian bandit
//
// Policy u ~ N(mu, sigma^2) with fixed sigma and reward r(u) = -u^2, so
// E[J] = -(mu^2 + sigma^2) and dE[J]/dmu = -2 mu exactly.

const BANDIT_MU: f64 = 2.0;
const BANDIT_SIGMA: f64 = 0.5;

fn bandit_batch(k: usize, seed_tags: &[u64]) -> Vec<Trajectory> {
    let mut rng = stream(0xba0d17, seed_tags);
    (0..k)
        .map(|_| {
            let u = BANDIT_MU + BANDIT_SIGMA * draw_normal(&mut rng);
            let ret = -u * u;
            let score = (u - BANDIT_MU) / (BANDIT_SIGMA * BANDIT_SIGMA);
            Trajectory {
                states: vec![],
                actions: vec![],
                draws: vec![],
                rewards: vec![],
                ret,
                score_sum: vec![score],
                snapshot: 7,
            }
        })
        .collect()
}

#[test]
fn criterion_05_estimator_correctness() {
    // Large-sample gradient against the closed form.
    let trajectories = bandit_batch(100_000, &[0]);
    let returns: Vec<f64> = trajectories.iter().map(|t| t.ret).collect();
    let baseline = compute_baseline(&returns).unwrap();
    let grad = gradient_estimate(&trajectories, baseline).unwrap()[0];
    let truth = -2.0 * BANDIT_MU;
    let rel = (grad - truth).abs() / truth.abs();
    let grad_ok = rel <= 0.05;

    // Baseline variance reduction at K = 64 over 500 replicates: compare the
    // empirical variance of the per-episode gradient terms with and without
    // the baseline inside each replicate.
    let mut reduced = 0;
    let replicates = 500;
    for rep in 0..replicates {
        let batch = bandit_batch(64, &[1, rep]);
        let returns: Vec<f64> = batch.iter().map(|t| t.ret).collect();
        let b = compute_baseline(&returns).unwrap();
        let var = |terms: &[f64]| {
            let m = terms.iter().sum::<f64>() / terms.len() as f64;
            terms.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (terms.len() - 1) as f64
        };
        let with: Vec<f64> = batch.iter().map(|t| (t.ret - b) * t.score_sum[0]).collect();
        let without: Vec<f64> = batch.iter().map(|t| t.ret * t.score_sum[0]).collect();
        if var(&with) < var(&without) {
            reduced += 1;
        }
    }
    let reduction_ok = reduced as f64 >= 0.95 * replicates as f64;
    verdict(
        "5 (estimator correctness)",
        grad_ok && reduction_ok,
        &format!(
            "K=1e5 gradient {grad:.4} vs closed form {truth:.4} (rel err {rel:.4} <= 0.05); \
             baseline reduced variance in {reduced}/{replicates} replicates (need >= 475)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Autodiff suite

#[test]
fn criterion_06_autodiff_suite() {
    use batchrl::autodiff::Graph;
    use rand::RngExt;

    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for instance in 0..100u64 {
        // Random small tanh network: 2-4 inputs, 1-2 hidden layers.
        let mut cfg_rng = stream(0xad1f, &[instance]);
        let n_in = cfg_rng.random_range(2usize..5);
        let layers = cfg_rng.random_range(1usize..3);
        let width = cfg_rng.random_range(3usize..9);

        let mut g = Graph::new();
        let mut acts: Vec<_> = (0..n_in).map(|_| g.input()).collect();
        let mut n_params = 0;
        for l in 0..=layers {
            let (fan_in, fan_out) = (acts.len(), if l == layers { 1 } else { width });
            let mut next = Vec::new();
            for _ in 0..fan_out {
                let ws: Vec<_> = (0..fan_in).map(|_| g.param()).collect();
                let b = g.param();
                n_params += fan_in + 1;
                let z = g.dot(&ws, &acts);
                let zb = g.add(z, b);
                next.push(if l == layers { zb } else { g.tanh(zb) });
            }
            acts = next;
        }
        let out = acts[0];
        g.mark_output(out);

        let inputs: Vec<f64> = (0..n_in).map(|_| cfg_rng.random_range(-2.0..2.0)).collect();
        let params: Vec<f64> = (0..n_params)
            .map(|_| cfg_rng.random_range(-0.8..0.8))
            .collect();
        g.forward(&inputs, &params).unwrap();
        let ad = g.backward(0).unwrap();
        let h = 1e-6;
        let mut p = params.clone();
        for i in 0..n_params {
            p[i] = params[i] + h;
            let hi = g.forward(&inputs, &p).unwrap()[0];
            p[i] = params[i] - h;
            let lo = g.forward(&inputs, &p).unwrap()[0];
            p[i] = params[i];
            let fd = (hi - lo) / (2.0 * h);
            let diff = (ad[i] - fd).abs();
            let denom = ad[i].abs().max(fd.abs());
            if diff > 1e-8 {
                worst = worst.max(diff / denom);
                assert!(
                    diff / denom <= 1e-6,
                    "instance {instance} slot {i}: ad {} vs fd {fd}",
                    ad[i]
                );
            }
        }
        checked += 1;
    }
    verdict(
        "6 (autodiff suite)",
        checked >= 100,
        &format!("{checked} random network instantiations, worst relative error {worst:.2e} <= 1e-6"),
    );
}

// ---------------------------------------------------------------------------
// 7. Integrator suite

#[test]
fn criterion_07_integrator_suite() {
    use batchrl::plants::{euler_maruyama_step, rk4_step};

    let f: &dyn Fn(&[f64], &[f64], &mut [f64]) = &|y, _, out| out[0] = -y[0];
    let exact = (-1f64).exp();
    let coarse = (rk4_step(f, &[1.0], &[], 1.0, 8).unwrap()[0] - exact).abs();
    let fine = (rk4_step(f, &[1.0], &[], 1.0, 16).unwrap()[0] - exact).abs();
    let ratio = coarse / fine;
    let rk4_ok = (12.0..=20.0).contains(&ratio);

    let drift: &dyn Fn(&[f64], &[f64], &mut [f64]) = &|_, _, out| out[0] = 0.0;
    let g = 0.4;
    let diffusion: &dyn Fn(&[f64], &[f64], &mut [f64]) = &|_, _, out| out[0] = g;
    let dt = 0.2;
    let paths = 100_000;
    let mut rng = stream(0xe111, &[0]);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..paths {
        let x = euler_maruyama_step(drift, diffusion, &[0.0], &[], dt, 5, &mut rng).unwrap()[0];
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / paths as f64;
    let var = sum_sq / paths as f64 - mean * mean;
    let want = g * g * dt;
    let em_rel = (var - want).abs() / want;
    let em_ok = em_rel <= 0.05;

    verdict(
        "7 (integrator suite)",
        rk4_ok && em_ok,
        &format!(
            "RK4 halving ratio {ratio:.2} in [12, 20]; Euler-Maruyama variance {var:.5} \
             vs g^2 dt {want:.5} over 1e5 paths (rel err {em_rel:.4} <= 0.05)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Case study 3 substitute properties

#[test]
fn criterion_08a_cs3_training_trend() {
    let training = cs3_training();
    let means = &training.epoch_means;
    assert_eq!(means.len(), 100);
    let ma: Vec<f64> = means
        .windows(20)
        .map(|w| w.iter().sum::<f64>() / 20.0)
        .collect();
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    for w in ma.windows(2) {
        if w[1] < w[0] {
            violations += 1;
            worst = worst.max(w[0] - w[1]);
        }
    }
    verdict(
        "8a (CS3 nondecreasing 20-epoch moving average)",
        violations == 0,
        &format!(
            "moving average starts {:.4}, ends {:.4}, {} decreasing steps (worst dip {:.2e})",
            ma.first().unwrap(),
            ma.last().unwrap(),
            violations,
            worst
        ),
    );
}

#[test]
fn criterion_08b_cs3_switch_gating() {
    // Gate truth table plus the dynamic consequence: with nitrate pinned
    // above the threshold the product concentration never moves on the
    // noise-free model.
    let gate_ok = cs3_switch(400.0, 12.0)
        && !cs3_switch(600.0, 12.0)
        && !cs3_switch(400.0, 8.0)
        && cs3_switch(500.0, 10.0);
    // Over a 12-hour batch the biomass cannot reach the 10 g/L threshold, so
    // the gate stays shut at every substep no matter the controls.
    let plant =
        CaseStudy3Plant::new(Cs3Params::default(), 12, 20, true).with_duration(12.0);
    let mut rng = stream(3, &[0]);
    let mut x = vec![1.0, 400.0, 0.125];
    let mut biomass_below_threshold = true;
    for t in 0..plant.intervals {
        x = plant.step(&x, &[300.0, 40.0], t, &mut rng).unwrap().next;
        biomass_below_threshold &= x[0] < 10.0;
    }
    let constant_ok = x[2] == 0.125;
    verdict(
        "8b (CS3 switch gating)",
        gate_ok && biomass_below_threshold && constant_ok,
        &format!(
            "gate truth table ok; with the gate closed c_q stayed exactly {:.3}",
            x[2]
        ),
    );
}

#[test]
fn criterion_08c_cs3_du_penalty_ablation() {
    let training = cs3_training();
    verdict(
        "8c (CS3 control-move penalty ablation)",
        training.variation_with_penalty < training.variation_without_penalty,
        &format!(
            "mean total |du| over 100 episodes: {:.2} with penalty vs {:.2} without",
            training.variation_with_penalty, training.variation_without_penalty
        ),
    );
}

#[test]
fn criterion_08d_cs3_parameters_round_trip() {
    let config = Config::parse_str("plant = \"cs3\"").unwrap();
    let reparsed = Config::parse_str(&config.to_toml()).unwrap();
    let p = reparsed.cs3;
    let defaults = Cs3Params::default();
    let pass = p == defaults
        && p.u_m == 0.0572
        && p.u_d == 0.0
        && p.k_n == 393.1
        && p.y_nx == 504.1
        && p.k_m == 0.00016
        && p.k_d == 0.281
        && p.k_s == 178.9
        && p.k_i == 447.1
        && p.k_sq == 23.51
        && p.k_iq == 800.0
        && p.k_np == 16.89;
    verdict(
        "8d (CS3 kinetic parameters round-trip)",
        pass,
        "all eleven kinetic parameters survive config serialize/parse verbatim",
    );
}

// ---------------------------------------------------------------------------
// 9. Transfer-learning audit

#[test]
fn criterion_09_transfer_learning_audit() {
    let run = cs1_run();
    let episodes = run.summary["online"]["total_true_plant_episodes"]
        .as_u64()
        .unwrap();
    let budget_ok = episodes == 100;

    // Frozen layers (everything outside the trainable set {1, 2}) must be
    // bit-identical between the freeze point and every online checkpoint.
    let (config, theta0) = load_checkpoint(&run.dir.join("checkpoints/theta0.txt")).unwrap();
    let policy = GaussianPolicy::new(config).unwrap();
    let frozen_slots: Vec<usize> = {
        let slot = &policy.layer_slots()[0];
        slot.weights.clone().chain(slot.biases.clone()).collect()
    };
    let mut frozen_ok = true;
    let mut checked = 0;
    for name in ["online_ep0000", "online_ep0001", "online_ep0002", "online_ep0003", "final"] {
        let path = run.dir.join(format!("checkpoints/{name}.txt"));
        let (_, params) = load_checkpoint(&path).unwrap();
        for (net_a, net_b) in theta0.nets.iter().zip(&params.nets) {
            for &i in &frozen_slots {
                frozen_ok &= net_a.values[i].to_bits() == net_b.values[i].to_bits();
            }
        }
        checked += 1;
    }
    verdict(
        "9 (transfer-learning audit)",
        budget_ok && frozen_ok && checked == 5,
        &format!(
            "true-plant episodes = {episodes} (exactly 4 x 25 = 100); frozen first-layer \
             parameters bit-identical across all {checked} online checkpoints: {frozen_ok}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. Determinism

/// Reads a run directory into (path, bytes) pairs, dropping the wall-time
/// column from progress CSVs (the one timing field) and the manifest (which
/// carries a creation timestamp).
fn canonical_run_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn visit(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                visit(root, &path, out);
                continue;
            }
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            if rel == "manifest.json" {
                continue;
            }
            let mut bytes = std::fs::read(&path).unwrap();
            if rel.starts_with("progress_") {
                let text = String::from_utf8(bytes).unwrap();
                bytes = text
                    .lines()
                    .map(|line| {
                        let cut = line.rfind(',').unwrap();
                        &line[..cut]
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
                    .into_bytes();
            }
            out.push((rel, bytes));
        }
    }
    let mut out = Vec::new();
    visit(root, root, &mut out);
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let text = "seed = 9\nsubsteps = 10\n[train]\nepochs = 3\nepisodes = 40\n\
                [b2b]\nonline_epochs = 2\nonline_episodes = 4\n[eval]\nepisodes = 10\n";
    let config = Config::parse_str(text).unwrap();
    let dir_a = work_root().join("determinism-a");
    let dir_b = work_root().join("determinism-b");
    let _ = std::fs::remove_dir_all(&dir_a);
    let _ = std::fs::remove_dir_all(&dir_b);
    cmd_run_pipeline(&config, &dir_a).unwrap();
    cmd_run_pipeline(&config, &dir_b).unwrap();
    let a = canonical_run_bytes(&dir_a);
    let b = canonical_run_bytes(&dir_b);
    let same_names = a.iter().map(|(n, _)| n).eq(b.iter().map(|(n, _)| n));
    let mut mismatched = Vec::new();
    for ((name, bytes_a), (_, bytes_b)) in a.iter().zip(&b) {
        if bytes_a != bytes_b {
            mismatched.push(name.clone());
        }
    }
    verdict(
        "10 (determinism)",
        same_names && mismatched.is_empty(),
        &format!(
            "two pipeline runs produced {} artifacts; byte-identical checkpoints and CSVs \
             (wall-time column and manifest timestamp excluded); mismatches: {mismatched:?}",
            a.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// NMPC run-dir smoke check shared with the criterion-4 machinery: the CLI
// surface for the baseline must emit the same eval schema as policy runs.

#[test]
fn nmpc_eval_command_writes_the_shared_schema() {
    let mut config = Config::parse_str("plant = \"cs1\"").unwrap();
    config.eval.episodes = 3;
    config.nmpc.multistarts = 2;
    let dir = work_root().join("nmpc-schema");
    let _ = std::fs::remove_dir_all(&dir);
    let summary = cmd_nmpc_eval(&config, &dir).unwrap();
    assert!(summary["eval"]["mean"].is_f64());
    for file in ["eval/returns.csv", "eval/trajectories.csv", "eval/report.json", "manifest.json"] {
        assert!(dir.join(file).exists(), "{file} missing");
    }
}
