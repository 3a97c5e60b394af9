use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use shotwright::attributes::{
    dataset_to_text, load_dataset, sample_all_episodes, AttributeTaxonomy, Episode, EPISODE_LEN,
};
use shotwright::broadcast::{
    generate_scene, heuristic_edit, overlap_ratio, style_metrics, train_broadcast_actor, BroadcastConfig,
    StyleMetrics, ViewSequence,
};
use shotwright::evaluation::{evaluate, EvalReport, GreedyPredictor};
use shotwright::representation::apply_representation;
use shotwright::training::{
    generate_markov_dataset, init_networks, load_checkpoint, pretrain_supervised, save_checkpoint, seeded_rng,
    MarkovConfig, SeedStream, TrainConfig,
};

use crate::manifest::ManifestBuilder;
use crate::{BroadcastArgs, ConfigArgs, EvalArgs, SynthArgs, TrainArgs};

pub const DATASET_FILE: &str = "dataset.tsv";
pub const TEST_DATASET_FILE: &str = "test.tsv";
pub const TAXONOMY_FILE: &str = "taxonomy.tsv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

fn create_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn synth_data(args: &SynthArgs) -> Result<()> {
    if args.shots < EPISODE_LEN && !args.allow_short {
        bail!(
            "--shots {} is below the {EPISODE_LEN}-shot episode minimum (pass --allow-short to write it anyway)",
            args.shots
        );
    }
    ensure!(args.scenes > 0, "--scenes must be positive");
    let all = generate_markov_dataset(&MarkovConfig {
        scenes: args.scenes + args.test_scenes,
        shots_per_scene: args.shots,
        determinism: args.determinism,
        seed: args.seed,
        concentration: args.concentration,
    })?;
    create_out_dir(&args.out)?;
    let mut m = ManifestBuilder::new("synth-data", args.seed);
    m.set("scenes", args.scenes)
        .set("test_scenes", args.test_scenes)
        .set("shots", args.shots)
        .set("determinism", args.determinism);
    if let Some(c) = args.concentration {
        m.set("concentration", c);
    }
    let (train, test) = all.split_at(args.scenes);
    m.write(&args.out, DATASET_FILE, &dataset_to_text(train))?;
    if !test.is_empty() {
        m.write(&args.out, TEST_DATASET_FILE, &dataset_to_text(test))?;
    }
    m.write(&args.out, TAXONOMY_FILE, &AttributeTaxonomy::default().to_text())?;
    m.finish(&args.out)
}

/// Config file, then flags in a fixed order.
fn resolve_config(args: &ConfigArgs) -> Result<TrainConfig> {
    let mut config = match &args.config {
        Some(path) => TrainConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => TrainConfig::default(),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    push("seed", args.seed.map(|v| v.to_string()));
    push("repr", args.repr.clone());
    push("concentration", args.concentration.map(|v| v.to_string()));
    push("gamma", args.gamma.map(|v| v.to_string()));
    push("epochs", args.epochs.map(|v| v.to_string()));
    push("rl_iterations", args.rl_iterations.map(|v| v.to_string()));
    push("actor_lr", args.actor_lr.map(|v| v.to_string()));
    push("critic_lr", args.critic_lr.map(|v| v.to_string()));
    push("batch_size", args.batch_size.map(|v| v.to_string()));
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{o}`"))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    config.apply_pairs(&pairs)?;
    config.validate()?;
    Ok(config)
}

/// Loads the dataset, applies the configured representation and cuts episodes.
fn load_episodes(dataset: &Path, args: &ConfigArgs, config: &TrainConfig, m: &mut ManifestBuilder) -> Result<Vec<Episode>> {
    let taxonomy = match &args.taxonomy {
        Some(path) => {
            m.input(path);
            AttributeTaxonomy::load(path).with_context(|| format!("reading taxonomy {}", path.display()))?
        }
        None => AttributeTaxonomy::default(),
    };
    m.input(dataset);
    let scenes =
        load_dataset(dataset, &taxonomy).with_context(|| format!("reading dataset {}", dataset.display()))?;
    let scenes = apply_representation(&scenes, config.repr, config.seed)?;
    let episodes = sample_all_episodes(&scenes, config.stride);
    ensure!(
        !episodes.is_empty(),
        "{} holds no scene with at least {EPISODE_LEN} shots",
        dataset.display()
    );
    Ok(episodes)
}

fn losses_text(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn pretrain(args: &TrainArgs) -> Result<()> {
    let config = resolve_config(&args.config)?;
    let mut m = ManifestBuilder::new("pretrain", config.seed);
    m.config(config.to_pairs());
    let episodes = load_episodes(&args.dataset, &args.config, &config, &mut m)?;
    let (mut actor, critic) = match &args.ckpt {
        Some(path) => {
            m.input(path);
            load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?
        }
        None => init_networks(config.seed)?,
    };
    let log = pretrain_supervised(&mut actor, &episodes, &config)?;
    ensure!(
        log.epoch_losses.iter().all(|l| l.is_finite()),
        "pretraining produced a non-finite loss"
    );
    create_out_dir(&args.out)?;
    save_checkpoint(&actor, &critic, args.out.join(CHECKPOINT_FILE))?;
    m.record_output(CHECKPOINT_FILE);
    let rows = || log.epoch_losses.iter().enumerate().map(|(e, l)| format!("{e} {l}"));
    m.write(&args.out, "pretrain_log.txt", &losses_text("epoch loss", rows()))?;
    if args.emit_csv {
        let csv = rows().map(|r| r.replace(' ', ","));
        m.write(&args.out, "pretrain_log.csv", &losses_text("epoch,loss", csv))?;
    }
    m.finish(&args.out)
}

pub fn train_rl(args: &TrainArgs) -> Result<()> {
    let config = resolve_config(&args.config)?;
    let Some(ckpt) = &args.ckpt else {
        bail!("train-rl needs --ckpt (a pretrained checkpoint)");
    };
    let mut m = ManifestBuilder::new("train-rl", config.seed);
    m.config(config.to_pairs());
    let episodes = load_episodes(&args.dataset, &args.config, &config, &mut m)?;
    m.input(ckpt);
    let (mut actor, mut critic) =
        load_checkpoint(ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
    let log = shotwright::training::train_rl(&mut actor, &mut critic, &episodes, &config)?;
    ensure!(
        log.iterations
            .iter()
            .all(|it| it.critic_loss.is_finite() && it.actor_loss.is_finite() && it.mean_total_reward.is_finite()),
        "RL training produced a non-finite loss"
    );
    create_out_dir(&args.out)?;
    save_checkpoint(&actor, &critic, args.out.join(CHECKPOINT_FILE))?;
    m.record_output(CHECKPOINT_FILE);
    let rows = || {
        log.iterations
            .iter()
            .enumerate()
            .map(|(i, it)| format!("{i} {} {} {}", it.mean_total_reward, it.critic_loss, it.actor_loss))
    };
    m.write(
        &args.out,
        "rl_log.txt",
        &losses_text("iteration mean_reward critic_loss actor_loss", rows()),
    )?;
    if args.emit_csv {
        let csv = rows().map(|r| r.replace(' ', ","));
        m.write(
            &args.out,
            "rl_log.csv",
            &losses_text("iteration,mean_reward,critic_loss,actor_loss", csv),
        )?;
    }
    m.finish(&args.out)
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let config = resolve_config(&args.config)?;
    let mut m = ManifestBuilder::new("eval", config.seed);
    m.config(config.to_pairs());
    let episodes = load_episodes(&args.dataset, &args.config, &config, &mut m)?;
    let (actor, _) = match &args.ckpt {
        Some(path) => {
            m.input(path);
            load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?
        }
        None => {
            m.set("random_init", true);
            init_networks(config.seed)?
        }
    };
    let mut rng = seeded_rng(config.seed, SeedStream::Evaluation);
    let report = evaluate(&episodes, &mut GreedyPredictor(&actor), &mut rng)?;
    report.check_finite()?;

    let taxonomy = AttributeTaxonomy::default();
    create_out_dir(&args.out)?;
    m.write(&args.out, "eval_report.txt", &report.to_kv_text(&taxonomy))?;
    m.write(&args.out, "eval_report.jsonl", &(report.to_json_line() + "\n"))?;
    if args.emit_csv {
        let csv = format!(
            "{}\n{}\n",
            EvalReport::csv_header(&taxonomy),
            report.csv_row(&args.label)
        );
        m.write(&args.out, "eval_report.csv", &csv)?;
    }
    println!("{}", EvalReport::table_header(&taxonomy));
    println!("{}", report.table_row(&args.label));
    m.finish(&args.out)
}

#[derive(Serialize)]
struct SequenceRecord<'a> {
    scene: &'a str,
    source: &'a str,
    steps: usize,
    l_avg: f64,
    l_max: usize,
    n_sw: usize,
    /// Agreement with the heuristic edit of the same scene.
    overlap: f64,
}

fn min_length_holds(seq: &ViewSequence, min: usize) -> bool {
    let v = seq.views();
    let mut run = 1;
    for k in 1..v.len() {
        if v[k] == v[k - 1] {
            run += 1;
        } else {
            if run < min {
                return false;
            }
            run = 1;
        }
    }
    true
}

pub fn broadcast_sim(args: &BroadcastArgs) -> Result<()> {
    ensure!(args.length > 0, "--length must be positive");
    let omega = args.preset.params();
    let mut config = BroadcastConfig {
        seed: args.seed,
        ..BroadcastConfig::default()
    };
    if let Some(e) = args.epochs {
        config.pretrain_epochs = e;
    }
    if let Some(r) = args.rl_iterations {
        config.rl_iterations = r;
    }
    let mut m = ManifestBuilder::new("broadcast-sim", args.seed);
    m.set("preset", args.preset)
        .set("length", args.length)
        .set("test_scenes", args.test_scenes)
        .set("event_rate", args.event_rate)
        .set("pretrain_epochs", config.pretrain_epochs)
        .set("rl_iterations", config.rl_iterations);
    create_out_dir(&args.out)?;

    let train_scene = generate_scene(args.seed, args.length, args.event_rate)?;
    let train_views = heuristic_edit(&train_scene, &omega)?;
    let (actor, log) = train_broadcast_actor(&train_scene, &train_views, &config)?;
    ensure!(
        log.pretrain_losses.iter().chain(&log.rl_mean_reward).all(|v| v.is_finite()),
        "broadcast training produced a non-finite value"
    );

    // Held-out scenes use the seeds after the training scene's.
    let mut scenes = vec![("train".to_string(), train_scene, train_views)];
    for k in 0..args.test_scenes {
        let scene = generate_scene(args.seed + 1 + k as u64, args.length, args.event_rate)?;
        let views = heuristic_edit(&scene, &omega)?;
        scenes.push((format!("test{k}"), scene, views));
    }

    let mut records: Vec<(String, &'static str, StyleMetrics, f64)> = Vec::new();
    for (name, scene, views) in &scenes {
        ensure!(
            min_length_holds(views, omega.min_shot_length),
            "heuristic edit of {name} breaks the minimum shot length"
        );
        let learned = actor.edit(scene)?;
        m.write(&args.out, &format!("{name}_scene.txt"), &scene.to_text())?;
        m.write(&args.out, &format!("{name}_views.txt"), &views.to_text())?;
        m.write(&args.out, &format!("{name}_learned.txt"), &learned.to_text())?;
        records.push((name.clone(), "heuristic", style_metrics(views)?, 1.0));
        records.push((name.clone(), "learned", style_metrics(&learned)?, overlap_ratio(&learned, views)?));
    }

    let mut text = String::new();
    let mut jsonl = String::new();
    let mut csv = String::from("scene,source,steps,l_avg,l_max,n_sw,overlap\n");
    for (name, source, sm, overlap) in &records {
        ensure!(sm.l_avg.is_finite() && overlap.is_finite(), "non-finite style metric for {name}");
        let _ = writeln!(text, "{name}.{source}.l_avg = {}", sm.l_avg);
        let _ = writeln!(text, "{name}.{source}.l_max = {}", sm.l_max);
        let _ = writeln!(text, "{name}.{source}.n_sw = {}", sm.n_sw);
        let _ = writeln!(text, "{name}.{source}.overlap = {overlap}");
        let rec = SequenceRecord {
            scene: name,
            source,
            steps: args.length,
            l_avg: sm.l_avg,
            l_max: sm.l_max,
            n_sw: sm.n_sw,
            overlap: *overlap,
        };
        jsonl.push_str(&serde_json::to_string(&rec)?);
        jsonl.push('\n');
        let _ = writeln!(
            csv,
            "{name},{source},{},{},{},{},{overlap}",
            args.length, sm.l_avg, sm.l_max, sm.n_sw
        );
    }
    m.write(&args.out, "style_report.txt", &text)?;
    m.write(&args.out, "style_report.jsonl", &jsonl)?;
    if args.emit_csv {
        m.write(&args.out, "style_report.csv", &csv)?;
    }
    for (name, source, sm, overlap) in &records {
        println!(
            "{name:<6} {source:<9} L_avg {:>8.2}  L_max {:>5}  N_sw {:>4}  overlap {:.3}",
            sm.l_avg, sm.l_max, sm.n_sw, overlap
        );
    }
    m.finish(&args.out)
}
