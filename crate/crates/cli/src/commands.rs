use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use inspire_core::experiment::{
    annotate_all, answer_fidelity, build_examples, evaluate, run_ablation, train as train_policy, AblationGrid,
    CellOutcome, RolloutConfig, WorldContext,
};
use inspire_core::io::write_atomic;
use inspire_core::labeler::{annotate_trajectory, PositionSource, VqaFormulation, ANNOTATED_FORMAT};
use inspire_core::policy::{gradcheck as run_gradcheck, TransformerWeights};
use inspire_core::sim::{
    generate_demonstrations, read_trajectories, write_jsonl, DatasetHeader, Trajectory, TRAJECTORY_FORMAT,
};
use serde_json::json;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
    #[error("threshold not met: {0}")]
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Threshold(_) => 3,
        }
    }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| runtime(anyhow::anyhow!("writing {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    write(path, text.as_bytes())
}

/// CSV with the effective config as a leading `#` comment line.
fn write_csv(path: &Path, config: &RunConfig, body: &str) -> Result<(), CliError> {
    let text = format!("# config={}\n{body}", config.echo());
    write(path, text.as_bytes())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn world(config: &RunConfig) -> Result<WorldContext, CliError> {
    let mut ctx = WorldContext::new(config.scene.world_size, config.scene.lexicon.clone()).map_err(runtime)?;
    ctx.rules = config.labels();
    Ok(ctx)
}

fn read_demos(path: &Path) -> Result<(DatasetHeader, Vec<Trajectory>), CliError> {
    let file = File::open(path).map_err(|e| runtime(anyhow::anyhow!("opening {}: {e}", path.display())))?;
    read_trajectories(BufReader::new(file)).map_err(|e| runtime(anyhow::anyhow!("reading {}: {e}", path.display())))
}

pub fn gen_data(config: &RunConfig, out: &Path, n: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let trajs = generate_demonstrations(n, &config.scene).map_err(runtime)?;
    let header = DatasetHeader { config: Some(config.echo()), ..DatasetHeader::new(TRAJECTORY_FORMAT) };
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &header, &trajs).map_err(runtime)?;
    write(out, &buf)?;
    let adjacent = trajs
        .iter()
        .filter(|t| {
            let first = t.steps.first().map_or(&t.final_scene, |s| &s.scene);
            match (first.beacon(), first.object(t.task.target_object_id)) {
                (Some(b), Some(o)) => b.position.chebyshev(o.position) == 1,
                _ => false,
            }
        })
        .count();
    let mean_len = trajs.iter().map(Trajectory::len).sum::<usize>() as f64 / n as f64;
    let summary = json!({
        "count": n,
        "mean_length": mean_len,
        "beacon_adjacency_rate": adjacent as f64 / n as f64,
    });
    println!("{summary}");
    Ok(())
}

pub fn annotate(
    config: &RunConfig,
    input: &Path,
    out: &Path,
    formulation: VqaFormulation,
    proxy: bool,
) -> Result<(), CliError> {
    let (in_header, trajs) = read_demos(input)?;
    let ctx = world(config)?;
    let source = if proxy { PositionSource::GraspProxy } else { PositionSource::GroundTruth };
    let mut annotated = Vec::with_capacity(trajs.len());
    let mut failures = Vec::new();
    for (i, t) in trajs.iter().enumerate() {
        match annotate_trajectory(t, formulation, &ctx.rules, &ctx.lexicon, source) {
            Ok(a) => annotated.push(a),
            // line 1 is the header
            Err(e) => failures.push(format!("line {}: {e}", i + 2)),
        }
    }
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("{}: {f}", input.display());
        }
        return Err(runtime(anyhow::anyhow!("{} of {} trajectories could not be annotated", failures.len(), trajs.len())));
    }
    let header = DatasetHeader {
        formulation: Some(formulation.to_string()),
        config: Some(json!({ "run": config.echo(), "proxy": proxy, "input": in_header.config })),
        ..DatasetHeader::new(ANNOTATED_FORMAT)
    };
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &header, &annotated).map_err(runtime)?;
    write(out, &buf)?;
    log::info!("annotated {} trajectories with {formulation}", annotated.len());
    Ok(())
}

pub fn train(config: &RunConfig, data: Option<&Path>, out: &Path, loss_csv: Option<&Path>) -> Result<(), CliError> {
    let tc = config.train_config();
    tc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ctx = world(config)?;
    let demos = match data {
        Some(p) => read_demos(p)?.1,
        None => generate_demonstrations(tc.num_trajectories, &tc.effective_scene()).map_err(runtime)?,
    };
    let annotated = annotate_all(&demos, tc.formulation, &ctx, PositionSource::GroundTruth).map_err(runtime)?;
    let examples = build_examples(&annotated, tc.formulation, tc.layout, tc.chunk, &ctx, tc.model.context_len)
        .map_err(runtime)?;
    log::info!("training on {} examples from {} trajectories", examples.len(), demos.len());
    let outcome = train_policy(&tc, &examples, ctx.vocab.len()).map_err(runtime)?;
    write(out, &outcome.weights.to_bytes())?;
    let sidecar = json!({
        "config": config.echo(),
        "model": outcome.weights.config,
        "parameters": outcome.weights.num_parameters(),
        "examples": outcome.examples,
        "steps_run": outcome.steps_run,
        "final": outcome.loss_curve.last(),
    });
    write_json(&with_suffix(out, ".json"), &sidecar)?;
    let csv_path = loss_csv.map_or_else(|| with_suffix(out, ".loss.csv"), Path::to_path_buf);
    write_csv(&csv_path, config, &outcome.loss_csv())?;
    if let Some(last) = outcome.loss_curve.last() {
        log::info!("final loss {:.4} token accuracy {:.4}", last.loss, last.accuracy);
    }
    Ok(())
}

pub fn eval(
    config: &RunConfig,
    checkpoint: &Path,
    out: &Path,
    min_success: Option<f64>,
    split: Option<&str>,
) -> Result<(), CliError> {
    config.eval.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(name) = split {
        if !config.eval.splits.iter().any(|s| s.name == name) {
            return Err(CliError::Usage(format!("no split named {name:?} in the eval config")));
        }
    }
    let ctx = world(config)?;
    let weights = TransformerWeights::load(checkpoint).map_err(runtime)?;
    if weights.config.vocab_size != ctx.vocab.len() {
        return Err(runtime(anyhow::anyhow!(
            "checkpoint vocabulary has {} entries, this world has {}",
            weights.config.vocab_size,
            ctx.vocab.len()
        )));
    }
    let tc = config.train_config();
    let rc = RolloutConfig {
        formulation: tc.formulation,
        layout: tc.layout,
        chunk: tc.chunk,
        max_steps: config.eval.max_steps,
    };
    let echo = json!({ "run": config.echo(), "checkpoint": checkpoint.display().to_string() });
    let (report, timing) =
        evaluate(&weights, &ctx, &config.eval, &tc.effective_scene(), rc, echo).map_err(runtime)?;
    let mut fidelity = None;
    if !tc.formulation.is_none() {
        let held_out = inspire_core::sim::SceneGenConfig {
            seed: inspire_core::experiment::split_seed(config.eval.seed, usize::MAX),
            ..tc.effective_scene()
        };
        let demos = generate_demonstrations(config.eval.trials.max(1), &held_out).map_err(runtime)?;
        fidelity = Some(
            answer_fidelity(&weights, &ctx, &demos, tc.formulation, tc.layout, config.eval.trials.max(1) * 5)
                .map_err(runtime)?,
        );
    }
    write_json(out, &json!({ "report": &report, "answer_fidelity": fidelity }))?;
    write_csv(&out.with_extension("csv"), config, &report.to_csv())?;
    write_json(&with_suffix(out, ".timing.json"), &json!({ "config": config.echo(), "timing": timing }))?;
    for s in &report.splits {
        println!(
            "{:<22} success {:>6.3} ({}/{})  mean steps {:>5.1}",
            s.name, s.success_rate, s.successes, s.trials, s.mean_steps
        );
    }
    if let Some(f) = fidelity {
        println!("answer fidelity {:.3} over {} answers", f.accuracy, f.answers_checked);
    }
    if let Some(threshold) = min_success {
        let below: Vec<String> = report
            .splits
            .iter()
            .filter(|s| split.is_none_or(|n| n == s.name) && s.success_rate < threshold)
            .map(|s| format!("{} {:.3} < {threshold}", s.name, s.success_rate))
            .collect();
        if !below.is_empty() {
            return Err(CliError::Threshold(below.join(", ")));
        }
    }
    Ok(())
}

pub fn ablate(config: &RunConfig, out_dir: &Path, seeds: Option<usize>, jobs: usize) -> Result<(), CliError> {
    let mut grid: AblationGrid = config.ablation.clone();
    if let Some(n) = seeds {
        if n == 0 {
            return Err(CliError::Usage("--seeds must be at least 1".into()));
        }
        grid.seeds = (0..n as u64).map(|i| config.seed().wrapping_add(i)).collect();
    }
    if grid.cells().is_empty() {
        return Err(CliError::Usage("ablation grid is empty".into()));
    }
    let base = config.train_config();
    base.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    config.eval.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ctx = world(config)?;
    let total = grid.cells().len();
    log::info!("running {total} cells on {} threads", jobs.max(1));
    let on_done = |c: &CellOutcome| match &c.error {
        None => log::info!("done {} {} seed {}", c.cell.formulation, c.cell.layout.name(), c.cell.seed),
        Some(e) => log::error!("failed {} {} seed {}: {e}", c.cell.formulation, c.cell.layout.name(), c.cell.seed),
    };
    let result = run_ablation(&grid, &base, &config.eval, &ctx, jobs.max(1), &on_done).map_err(runtime)?;
    write_json(&out_dir.join("ablation.json"), &json!({ "config": config.echo(), "grid": &grid, "result": &result }))?;
    write_csv(&out_dir.join("ablation.csv"), config, &result.to_csv())?;
    let table = format!("<!-- config={} -->\n\n{}", config.echo(), result.table());
    write(&out_dir.join("table.md"), table.as_bytes())?;
    println!("{}", result.table());
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        return Err(runtime(anyhow::anyhow!("{failed} of {total} cells failed")));
    }
    Ok(())
}

pub fn gradcheck(config: &RunConfig) -> Result<(), CliError> {
    let ctx = world(config)?;
    let model = inspire_core::policy::ModelConfig { vocab_size: ctx.vocab.len(), ..config.model };
    model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_gradcheck(model, config.gradcheck).map_err(runtime)?;
    for t in &report.tensors {
        println!("{:<24} rel err {:.3e}  ({} coords, {} kinked)", t.name, t.rel_err, t.coords, t.kinked);
    }
    let tol = config.gradcheck.tolerance;
    if report.passed {
        println!("max rel err {:.3e} < {tol:e}", report.max_rel_err);
        Ok(())
    } else {
        println!("max rel err {:.3e} >= {tol:e}", report.max_rel_err);
        Err(CliError::Threshold(format!("gradient check max relative error {:.3e}", report.max_rel_err)))
    }
}
