//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Every tolerance and budget is a constant
//! below.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shotwright::attributes::{sample_all_episodes, Episode, Scene, CLASS_COUNTS, NUM_ATTRIBUTES};
use shotwright::broadcast::{
    generate_scene, heuristic_edit, overlap_ratio, style_metrics, train_broadcast_actor, BroadcastConfig,
    StylePreset, ViewSequence,
};
use shotwright::evaluation::{evaluate, EvalReport, GreedyPredictor, SamplingPredictor};
use shotwright::policy::{actor_loss_var, advantages, critic_loss_var, rollout_batch, ActionRule, ActorNetwork};
use shotwright::representation::{apply_representation, ReprMode};
use shotwright::training::{
    generate_markov_dataset, init_networks, pretrain_supervised, seeded_rng, train_rl, MarkovConfig, SeedStream,
    TrainConfig,
};
use shotwright::ShotError;
use shotwright_nn::{grad_check, NnError};

const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_PERTURBATION: f64 = 1e-5;
const GRAD_COORDS_PER_PARAM: usize = 6;
const GRAD_BUDGET: Duration = Duration::from_secs(60);

const ADV_TRAJECTORIES: usize = 1000;
const ADV_TOL: f64 = 1e-12;

const CHANCE_EPISODES: usize = 50_000;
const CHANCE_ATTR_TOL: f64 = 0.01;
const CHANCE_ONE_ACC_MAX: f64 = 1e-4;
const CHANCE_RANK1: f64 = 0.20;
const CHANCE_TWO_RANK1: f64 = 0.05;
const CHANCE_RANK_TOL: f64 = 0.01;
const CHANCE_BUDGET: Duration = Duration::from_secs(300);

const LEARN_MIN_ACC: f64 = 0.95;
const LEARN_EPOCHS: usize = 50;
const LEARN_TRAIN_SCENES: usize = 200;
const LEARN_TEST_SCENES: usize = 50;
const LEARN_BUDGET: Duration = Duration::from_secs(300);

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const MIN_WINNING_SEEDS: usize = 4;
const RL_DETERMINISM: f64 = 0.95;
const RL_CONCENTRATION: f64 = 2.5;
const RL_TRAIN_SCENES: usize = 200;
const RL_TEST_SCENES: usize = 300;
const RL_BUDGET: Duration = Duration::from_secs(900);
const GTAD_LOW_CONCENTRATION: f64 = 0.5;

const BC_LENGTH: usize = 3000;
const BC_EVENT_RATE: f64 = 0.1;
const BC_TRAIN_SEED: u64 = 1;
const BC_TEST_SEEDS: [u64; 3] = [101, 102, 103];
const BC_MIN_OVERLAP: f64 = 0.9;
const BC_METRIC_TOL: f64 = 0.10;
/// Two presets count as distinct styles when their ground-truth edits of a
/// held-out scene agree on at most this fraction of steps.
const BC_MAX_CROSS_OVERLAP: f64 = 0.8;
const BC_BUDGET_PER_STYLE: Duration = Duration::from_secs(600);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn nn(e: ShotError) -> NnError {
    match e {
        ShotError::Nn(e) => e,
        other => panic!("unexpected error: {other}"),
    }
}

fn markov(seed: u64, scenes: usize, determinism: f64) -> Vec<Scene> {
    generate_markov_dataset(&MarkovConfig {
        scenes,
        shots_per_scene: 12,
        determinism,
        seed,
        concentration: None,
    })
    .unwrap()
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let data = markov(21, 2, 1.0);
    let eps = sample_all_episodes(&data, 1);
    let (actor, critic) = init_networks(21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let trs = rollout_batch(&actor, Some(&critic), &eps[..3], ActionRule::Sample, &mut rng).unwrap();
    let adv: Vec<[f64; NUM_ATTRIBUTES]> = trs.iter().flat_map(|t| t.advantages(0.95)).collect();

    let mut store = actor.store().clone();
    let a = grad_check(&mut store, GRAD_PERTURBATION, Some(GRAD_COORDS_PER_PARAM), &mut rng, |tape, s| {
        actor_loss_var(&actor, tape, s, &trs, &adv).map_err(nn)
    })
    .unwrap();
    let mut store = critic.store().clone();
    let c = grad_check(&mut store, GRAD_PERTURBATION, Some(GRAD_COORDS_PER_PARAM), &mut rng, |tape, s| {
        critic_loss_var(&critic, tape, s, &trs, 0.95).map_err(nn)
    })
    .unwrap();
    let elapsed = start.elapsed();
    outcome(
        a.max_relative_error < GRAD_REL_TOL && c.max_relative_error < GRAD_REL_TOL && elapsed < GRAD_BUDGET,
        format!(
            "actor max rel err {:.2e} over {} coords, critic {:.2e} over {} coords (< {GRAD_REL_TOL:e}), {:.1}s",
            a.max_relative_error,
            a.coordinates_checked,
            c.max_relative_error,
            c.coordinates_checked,
            elapsed.as_secs_f64()
        ),
    )
}

/// `sum_k gamma^(k-t) r_k + gamma^(T-t) V_T - V_t`, term by term.
fn direct_advantage(rewards: &[Vec<f64>], values: &[Vec<f64>], terminal: &[f64], gamma: f64, t: usize, c: usize) -> f64 {
    let steps = rewards.len();
    let mut g = 0.0;
    for k in t..steps {
        g += gamma.powi((k - t) as i32) * rewards[k][c];
    }
    g + gamma.powi((steps - t) as i32) * terminal[c] - values[t][c]
}

fn advantage_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..ADV_TRAJECTORIES {
        let steps = rng.random_range(1..=5);
        let gamma = rng.random_range(0.0..=1.0);
        let mut grid = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..NUM_ATTRIBUTES).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect()
        };
        let rewards = grid(steps);
        let values = grid(steps);
        let terminal = grid(1).remove(0);
        let fast = advantages(&rewards, &values, &terminal, gamma).unwrap();
        for (t, row) in fast.iter().enumerate() {
            for (c, a) in row.iter().enumerate() {
                worst = worst.max((a - direct_advantage(&rewards, &values, &terminal, gamma, t, c)).abs());
            }
        }
    }
    outcome(
        worst <= ADV_TOL,
        format!("max |recursion - direct| {worst:.2e} over {ADV_TRAJECTORIES} trajectories (<= {ADV_TOL:e})"),
    )
}

fn chance_level() -> Outcome {
    let start = Instant::now();
    let eps = sample_all_episodes(&markov(31, CHANCE_EPISODES / 4, 1.0), 1);
    assert_eq!(eps.len(), CHANCE_EPISODES);
    let (mut actor, _) = init_networks(31).unwrap();
    actor.zero_heads();
    let mut predictor = SamplingPredictor {
        policy: &actor,
        rng: ChaCha8Rng::seed_from_u64(32),
    };
    let report = evaluate(&eps, &mut predictor, &mut seeded_rng(31, SeedStream::Evaluation)).unwrap();
    let attr_err = (0..NUM_ATTRIBUTES)
        .map(|i| (report.per_attribute[i] - 1.0 / CLASS_COUNTS[i] as f64).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = attr_err <= CHANCE_ATTR_TOL
        && report.one_acc < CHANCE_ONE_ACC_MAX
        && (report.rank1 - CHANCE_RANK1).abs() <= CHANCE_RANK_TOL
        && (report.two_rank1 - CHANCE_TWO_RANK1).abs() <= CHANCE_RANK_TOL
        && elapsed < CHANCE_BUDGET;
    let accs: Vec<String> = report.per_attribute.iter().map(|a| format!("{:.3}", a)).collect();
    outcome(
        pass,
        format!(
            "Acc [{}], max |Acc - 1/C| {attr_err:.4}, 1-Acc {}, rank1 {:.4}, 2-rank1 {:.4} on {CHANCE_EPISODES} episodes, {:.1}s",
            accs.join(" "),
            report.one_acc,
            report.rank1,
            report.two_rank1,
            elapsed.as_secs_f64()
        ),
    )
}

fn learnability() -> Outcome {
    let start = Instant::now();
    let scenes = markov(41, LEARN_TRAIN_SCENES + LEARN_TEST_SCENES, 1.0);
    let train = sample_all_episodes(&scenes[..LEARN_TRAIN_SCENES], 1);
    let test = sample_all_episodes(&scenes[LEARN_TRAIN_SCENES..], 1);
    let config = TrainConfig {
        actor_lr: 1e-3,
        epochs: LEARN_EPOCHS,
        teacher_forcing: true,
        seed: 41,
        ..TrainConfig::default()
    };
    let (mut actor, _) = init_networks(config.seed).unwrap();
    let log = pretrain_supervised(&mut actor, &train, &config).unwrap();
    let report = evaluate(&test, &mut GreedyPredictor(&actor), &mut seeded_rng(41, SeedStream::Evaluation)).unwrap();
    let elapsed = start.elapsed();
    outcome(
        report.one_acc >= LEARN_MIN_ACC && elapsed < LEARN_BUDGET,
        format!(
            "held-out 1-Acc {:.4} (>= {LEARN_MIN_ACC}) after {LEARN_EPOCHS} epochs, loss {:.3} -> {:.4}, {:.1}s",
            report.one_acc,
            log.epoch_losses[0],
            log.epoch_losses[LEARN_EPOCHS - 1],
            elapsed.as_secs_f64()
        ),
    )
}

/// Pretrains, evaluates, fine-tunes with RL and evaluates again on held-out scenes.
fn supervised_then_rl(seed: u64, repr: ReprMode) -> (EvalReport, EvalReport) {
    let scenes = markov(seed, RL_TRAIN_SCENES + RL_TEST_SCENES, RL_DETERMINISM);
    let scenes = apply_representation(&scenes, repr, seed).unwrap();
    let train: Vec<Episode> = sample_all_episodes(&scenes[..RL_TRAIN_SCENES], 1);
    let test: Vec<Episode> = sample_all_episodes(&scenes[RL_TRAIN_SCENES..], 1);
    let pre = TrainConfig {
        actor_lr: 1e-3,
        critic_lr: 1e-3,
        epochs: 10,
        rl_iterations: 200,
        teacher_forcing: false,
        seed,
        repr,
        ..TrainConfig::default()
    };
    let (mut actor, mut critic) = init_networks(seed).unwrap();
    pretrain_supervised(&mut actor, &train, &pre).unwrap();
    let eval = |actor: &ActorNetwork| evaluate(&test, &mut GreedyPredictor(actor), &mut seeded_rng(seed, SeedStream::Evaluation)).unwrap();
    let before = eval(&actor);
    let rl = TrainConfig {
        actor_lr: 1e-4,
        ..pre
    };
    train_rl(&mut actor, &mut critic, &train, &rl).unwrap();
    (before, eval(&actor))
}

fn rl_improvement() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in SEEDS {
        let (sup, rl) = supervised_then_rl(seed, ReprMode::Synthetic { concentration: RL_CONCENTRATION });
        let win = rl.two_acc > sup.two_acc && rl.two_rank1 > sup.two_rank1;
        wins += usize::from(win);
        rows.push(format!(
            "seed {seed}: 2-Acc {:.4}->{:.4} 2-rank1 {:.4}->{:.4}{}",
            sup.two_acc,
            rl.two_acc,
            sup.two_rank1,
            rl.two_rank1,
            if win { "" } else { " (no gain)" }
        ));
    }
    let elapsed = start.elapsed();
    outcome(
        wins >= MIN_WINNING_SEEDS && elapsed < RL_BUDGET,
        format!(
            "{wins}/{} seeds improve both; {}; {:.1}s",
            SEEDS.len(),
            rows.join("; "),
            elapsed.as_secs_f64()
        ),
    )
}

fn gt_ad_dominance() -> Outcome {
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in SEEDS {
        let (_, one_hot) = supervised_then_rl(seed, ReprMode::OneHot);
        let (_, noisy) = supervised_then_rl(
            seed,
            ReprMode::Synthetic {
                concentration: GTAD_LOW_CONCENTRATION,
            },
        );
        let win = one_hot.one_acc > noisy.one_acc;
        wins += usize::from(win);
        rows.push(format!("seed {seed}: {:.4} vs {:.4}", one_hot.one_acc, noisy.one_acc));
    }
    outcome(
        wins >= MIN_WINNING_SEEDS,
        format!(
            "one-hot 1-Acc > synthetic(c={GTAD_LOW_CONCENTRATION}) 1-Acc in {wins}/{} seeds; {}",
            SEEDS.len(),
            rows.join("; ")
        ),
    )
}

fn within(value: f64, reference: f64, tol: f64) -> bool {
    (value - reference).abs() <= tol * reference.abs()
}

fn broadcast_imitation() -> Outcome {
    let presets = [StylePreset::Slides, StylePreset::Board, StylePreset::LongTakes];
    let train_scene = generate_scene(BC_TRAIN_SEED, BC_LENGTH, BC_EVENT_RATE).unwrap();
    let test_scenes: Vec<_> = BC_TEST_SEEDS
        .iter()
        .map(|&s| generate_scene(s, BC_LENGTH, BC_EVENT_RATE).unwrap())
        .collect();
    let mut pass = true;
    let mut rows = Vec::new();
    let mut truths: Vec<ViewSequence> = Vec::new();
    for preset in presets {
        let start = Instant::now();
        let omega = preset.params();
        let truth = heuristic_edit(&train_scene, &omega).unwrap();
        let config = BroadcastConfig {
            seed: BC_TRAIN_SEED,
            ..BroadcastConfig::default()
        };
        let (actor, _) = train_broadcast_actor(&train_scene, &truth, &config).unwrap();
        let mut worst_overlap: f64 = 1.0;
        let mut worst_lavg: f64 = 0.0;
        let mut worst_nsw: f64 = 0.0;
        let mut ok = true;
        for (k, scene) in test_scenes.iter().enumerate() {
            let gt = heuristic_edit(scene, &omega).unwrap();
            let learned = actor.edit(scene).unwrap();
            let overlap = overlap_ratio(&learned, &gt).unwrap();
            let (m_gt, m_l) = (style_metrics(&gt).unwrap(), style_metrics(&learned).unwrap());
            worst_overlap = worst_overlap.min(overlap);
            worst_lavg = worst_lavg.max((m_l.l_avg - m_gt.l_avg).abs() / m_gt.l_avg);
            worst_nsw = worst_nsw.max((m_l.n_sw as f64 - m_gt.n_sw as f64).abs() / m_gt.n_sw.max(1) as f64);
            ok &= overlap >= BC_MIN_OVERLAP
                && within(m_l.l_avg, m_gt.l_avg, BC_METRIC_TOL)
                && within(m_l.n_sw as f64, m_gt.n_sw as f64, BC_METRIC_TOL);
            if k == 0 {
                truths.push(gt);
            }
        }
        let elapsed = start.elapsed();
        ok &= elapsed < BC_BUDGET_PER_STYLE;
        pass &= ok;
        rows.push(format!(
            "{}: min overlap {worst_overlap:.3}, max L_avg dev {:.1}%, max N_sw dev {:.1}%, {:.1}s",
            preset.name(),
            100.0 * worst_lavg,
            100.0 * worst_nsw,
            elapsed.as_secs_f64()
        ));
    }
    let mut cross = Vec::new();
    for i in 0..truths.len() {
        for j in i + 1..truths.len() {
            let o = overlap_ratio(&truths[i], &truths[j]).unwrap();
            pass &= o <= BC_MAX_CROSS_OVERLAP;
            cross.push(format!("{}/{} {o:.3}", presets[i].name(), presets[j].name()));
        }
    }
    outcome(
        pass,
        format!(
            "{}; cross-style overlap {} (<= {BC_MAX_CROSS_OVERLAP})",
            rows.join("; "),
            cross.join(", ")
        ),
    )
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_shotwright"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

/// Every file under `dir` by relative path; manifests lose their duration.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let mut bytes = std::fs::read(&path).unwrap();
            if path.file_name().is_some_and(|n| n == "manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("duration_secs");
                // Input paths name the run directory itself.
                let text = v.to_string().replace(dir.to_str().unwrap(), "<run>");
                bytes = text.into_bytes();
            }
            out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), bytes);
        }
    }
    out
}

fn cli_pipeline(root: &Path) -> Vec<u8> {
    let p = |s: &str| root.join(s).to_str().unwrap().to_string();
    let (data, train, test) = (p("data"), p("data/dataset.tsv"), p("data/test.tsv"));
    let (pre, rl, ev) = (p("pre"), p("rl"), p("eval"));
    let (pre_ckpt, rl_ckpt) = (p("pre/model.ckpt"), p("rl/model.ckpt"));
    let repr = ["--repr", "synthetic", "--concentration", "2", "--seed", "9"];
    let mut stdout = Vec::new();
    stdout.extend(run_cli(&[
        "synth-data", "--scenes", "30", "--test-scenes", "10", "--seed", "9", "--determinism", "0.9", "--out", &data,
    ]));
    let mut args = vec!["pretrain", "--dataset", &train, "--out", &pre, "--epochs", "3", "--emit-csv"];
    args.extend(repr);
    stdout.extend(run_cli(&args));
    let mut args = vec!["train-rl", "--dataset", &train, "--ckpt", &pre_ckpt, "--out", &rl, "--rl-iterations", "5"];
    args.extend(repr);
    stdout.extend(run_cli(&args));
    let mut args = vec!["eval", "--dataset", &test, "--ckpt", &rl_ckpt, "--out", &ev, "--emit-csv"];
    args.extend(repr);
    stdout.extend(run_cli(&args));
    stdout.extend(run_cli(&[
        "broadcast-sim", "--preset", "long-takes", "-T", "300", "--seed", "9", "--test-scenes", "1", "--epochs", "3",
        "--rl-iterations", "3", "--emit-csv", "--out", &p("bc"),
    ]));
    stdout
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let (out_a, out_b) = (cli_pipeline(&a), cli_pipeline(&b));
    let (snap_a, snap_b) = (snapshot(&a), snapshot(&b));
    let differing: Vec<String> = snap_a
        .keys()
        .chain(snap_b.keys())
        .filter(|k| snap_a.get(*k) != snap_b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    outcome(
        differing.is_empty() && out_a == out_b && snap_a.len() >= 20,
        format!(
            "{} files compared across two runs, {} differ{}, stdout {}",
            snap_a.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) },
            if out_a == out_b { "identical" } else { "differs" }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient fidelity", gradient_fidelity),
        ("advantage oracle", advantage_oracle),
        ("chance-level metrics", chance_level),
        ("supervised learnability", learnability),
        ("RL improves two-step metrics", rl_improvement),
        ("one-hot context dominance", gt_ad_dominance),
        ("broadcast style imitation", broadcast_imitation),
        ("CLI determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
