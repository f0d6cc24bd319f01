use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::labeler::{question_words, PositionSource, VqaFormulation};
use crate::prompting::PromptLayout;
use crate::sim::generate_demonstrations;

use super::data::{annotate_all, build_examples, WorldContext};
use super::eval::{evaluate, EvalReport, EvalSuite};
use super::rollout::RolloutConfig;
use super::train::{train, TrainConfig};
use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationGrid {
    pub formulations: Vec<VqaFormulation>,
    pub layouts: Vec<PromptLayout>,
    pub seeds: Vec<u64>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        Self { formulations: VqaFormulation::ALL.to_vec(), layouts: PromptLayout::ALL.to_vec(), seeds: vec![0, 1, 2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationCell {
    pub formulation: VqaFormulation,
    pub layout: PromptLayout,
    pub seed: u64,
}

impl AblationGrid {
    /// Every training run of the grid. The baseline has no question segment,
    /// so it runs once per seed under the first listed layout.
    pub fn cells(&self) -> Vec<AblationCell> {
        let mut out = Vec::new();
        for &formulation in &self.formulations {
            let layouts: &[PromptLayout] = if formulation.is_none() { &self.layouts[..1.min(self.layouts.len())] } else { &self.layouts };
            for &layout in layouts {
                for &seed in &self.seeds {
                    out.push(AblationCell { formulation, layout, seed });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub cell: AblationCell,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Seed-aggregated success rates of one (formulation, layout) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub formulation: VqaFormulation,
    pub layout: PromptLayout,
    pub setting: String,
    pub question: String,
    pub answer: String,
    pub seeds: usize,
    /// Per split: name, mean and standard error of the success rate in percent.
    pub splits: Vec<(String, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub cells: Vec<CellOutcome>,
    pub aggregate: Vec<AggregateRow>,
}

fn answer_alphabet(f: VqaFormulation) -> &'static str {
    match f {
        VqaFormulation::None => "-",
        VqaFormulation::Direction1D => "right/left/up/down/front/back",
        VqaFormulation::Direction3D => "[right,front,up]",
        VqaFormulation::Proximity => "far/middle/near",
        VqaFormulation::Location3D => "[1,-3,4]",
        VqaFormulation::Distance => "0-9",
    }
}

/// `"83.3±1.2"`.
pub fn format_mean_stderr(mean: f64, stderr: f64) -> String {
    format!("{mean:.1}±{stderr:.1}")
}

/// Mean and standard error (sample deviation over sqrt(n)) of successful cells.
pub fn aggregate(cells: &[CellOutcome]) -> Vec<AggregateRow> {
    let mut rows: Vec<AggregateRow> = Vec::new();
    let mut keys: Vec<(VqaFormulation, PromptLayout)> = Vec::new();
    for c in cells {
        let k = (c.cell.formulation, c.cell.layout);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for (formulation, layout) in keys {
        let reports: Vec<&EvalReport> = cells
            .iter()
            .filter(|c| c.cell.formulation == formulation && c.cell.layout == layout)
            .filter_map(|c| c.report.as_ref())
            .collect();
        let mut splits = Vec::new();
        if let Some(first) = reports.first() {
            for s in &first.splits {
                let xs: Vec<f64> =
                    reports.iter().filter_map(|r| r.split(&s.name)).map(|r| 100.0 * r.success_rate).collect();
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let stderr = if xs.len() > 1 {
                    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
                } else {
                    0.0
                };
                splits.push((s.name.clone(), mean, stderr));
            }
        }
        let question = question_words(formulation, "{o}").map_or_else(|| "-".to_string(), |w| w.join(" "));
        rows.push(AggregateRow {
            formulation,
            layout,
            setting: formulation.setting().to_string(),
            question,
            answer: answer_alphabet(formulation).to_string(),
            seeds: reports.len(),
            splits,
        });
    }
    rows
}

impl AblationResult {
    /// Markdown table: one row per formulation and layout, one column per split.
    pub fn table(&self) -> String {
        let split_names: Vec<String> = self
            .aggregate
            .iter()
            .find(|r| !r.splits.is_empty())
            .map(|r| r.splits.iter().map(|s| s.0.clone()).collect())
            .unwrap_or_default();
        let mut s = String::from("| Setting | Question | Answer | Layout | Seeds |");
        for n in &split_names {
            s.push_str(&format!(" {n} |"));
        }
        s.push_str("\n|---|---|---|---|---|");
        s.push_str(&"---|".repeat(split_names.len()));
        s.push('\n');
        for r in &self.aggregate {
            let layout = if r.formulation.is_none() { "-" } else { r.layout.name() };
            s.push_str(&format!("| {} | {} | {} | {} | {} |", r.setting, r.question, r.answer, layout, r.seeds));
            for (_, m, e) in &r.splits {
                s.push_str(&format!(" {} |", format_mean_stderr(*m, *e)));
            }
            s.push('\n');
        }
        s
    }

    /// One row per split and cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("formulation,layout,seed,split,trials,successes,success_rate,answer_accuracy,target_attention,beacon_attention,error\n");
        for c in &self.cells {
            let head = format!("{},{},{}", c.cell.formulation.name(), c.cell.layout.name(), c.cell.seed);
            match (&c.report, &c.error) {
                (Some(r), _) => {
                    for sp in &r.splits {
                        s.push_str(&format!(
                            "{head},{},{},{},{},{},{},{},\n",
                            sp.name,
                            sp.trials,
                            sp.successes,
                            sp.success_rate,
                            sp.answer_accuracy.map_or_else(String::new, |a| a.to_string()),
                            sp.target_attention,
                            sp.beacon_attention
                        ));
                    }
                }
                (None, e) => {
                    let msg = e.clone().unwrap_or_default().replace([',', '\n'], ";");
                    s.push_str(&format!("{head},,,,,,,,{msg}\n"));
                }
            }
        }
        s
    }
}

/// Trains and evaluates one cell.
pub fn run_cell(
    cell: AblationCell,
    base: &TrainConfig,
    suite: &EvalSuite,
    ctx: &WorldContext,
) -> Result<EvalReport, ExperimentError> {
    let config = TrainConfig { formulation: cell.formulation, layout: cell.layout, seed: cell.seed, ..base.clone() };
    let scene = config.effective_scene();
    let demos = generate_demonstrations(config.num_trajectories, &scene)?;
    let annotated = annotate_all(&demos, config.formulation, ctx, PositionSource::GroundTruth)?;
    let examples = build_examples(&annotated, config.formulation, config.layout, config.chunk, ctx, config.model.context_len)?;
    let outcome = train(&config, &examples, ctx.vocab.len())?;
    let echo = serde_json::json!({ "train": &config, "suite": suite });
    let rc = RolloutConfig { formulation: config.formulation, layout: config.layout, chunk: config.chunk, max_steps: suite.max_steps };
    let (report, _) = evaluate(&outcome.weights, ctx, suite, &scene, rc, echo)?;
    Ok(report)
}

/// Runs every cell on up to `jobs` threads. A failing cell is recorded and
/// the rest of the grid still runs. `on_done` sees each finished cell.
pub fn run_ablation(
    grid: &AblationGrid,
    base: &TrainConfig,
    suite: &EvalSuite,
    ctx: &WorldContext,
    jobs: usize,
    on_done: &(dyn Fn(&CellOutcome) + Sync),
) -> Result<AblationResult, ExperimentError> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(ExperimentError::InvalidConfig("ablation grid is empty".into()));
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellOutcome>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&cell) = cells.get(i) else { break };
                let outcome = match run_cell(cell, base, suite, ctx) {
                    Ok(report) => CellOutcome { cell, report: Some(report), error: None },
                    Err(e) => CellOutcome { cell, report: None, error: Some(e.to_string()) },
                };
                on_done(&outcome);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    let cells: Vec<CellOutcome> =
        results.into_inner().expect("workers joined").into_iter().map(|c| c.expect("every cell ran")).collect();
    let aggregate = aggregate(&cells);
    Ok(AblationResult { cells, aggregate })
}
