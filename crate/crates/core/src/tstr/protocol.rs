use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{generator_utility, importance_alignment, regression_metrics, utility_scores, RegressionMetrics};
use crate::dataset::{LabeledExample, Target};
use crate::error::{Error, Result};
use crate::predictors::{encode, targets};
use crate::predictors::{ModelSpec, Regressor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSettings {
    pub tasks: Vec<Target>,
    pub models: Vec<ModelSpec>,
    pub seed: u64,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        ProtocolSettings {
            tasks: Target::ALL.to_vec(),
            models: ModelSpec::default_roster(),
            seed: 0,
        }
    }
}

/// Same seed for the TRTR and TSTR fits of one (task, model) cell.
fn cell_seed(seed: u64, task: usize, model: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((task as u64) << 16) | model as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCell {
    pub task: Target,
    pub model: String,
    pub metrics: RegressionMetrics<f64>,
    pub importances: Vec<f64>,
}

/// Real-trained reference results, computed once and shared by every
/// generator under evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrtrBaseline {
    pub settings: ProtocolSettings,
    pub cells: Vec<BaselineCell>,
}

fn check_nonempty(name: &str, rows: &[LabeledExample]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty(format!("{name} split is empty")));
    }
    Ok(())
}

fn fit_cells(
    train: &[LabeledExample],
    test: &[LabeledExample],
    settings: &ProtocolSettings,
) -> Result<Vec<(RegressionMetrics<f64>, Vec<f64>)>> {
    check_nonempty("training", train)?;
    check_nonempty("test", test)?;
    if settings.tasks.is_empty() || settings.models.is_empty() {
        return Err(Error::InvalidInput("protocol needs at least one task and one model".into()));
    }
    let enc = encode::<f64>(train, None)?;
    let test_x = encode::<f64>(test, Some(&enc.encoding))?.x;
    let grid: Vec<(usize, usize)> = (0..settings.tasks.len())
        .flat_map(|t| (0..settings.models.len()).map(move |m| (t, m)))
        .collect();
    grid.par_iter()
        .map(|&(t, m)| {
            let task = settings.tasks[t];
            let y = targets::<f64>(train, task);
            let model = settings.models[m].fit(&enc.x, &y, cell_seed(settings.seed, t, m))?;
            let yhat = model.predict(&test_x)?;
            let metrics = regression_metrics(&targets::<f64>(test, task), &yhat)?;
            Ok((metrics, model.feature_importances().weights))
        })
        .collect()
}

pub fn trtr_baseline(
    real_train: &[LabeledExample],
    real_test: &[LabeledExample],
    settings: &ProtocolSettings,
) -> Result<TrtrBaseline> {
    let fitted = fit_cells(real_train, real_test, settings)?;
    let mut cells = Vec::with_capacity(fitted.len());
    let mut it = fitted.into_iter();
    for &task in &settings.tasks {
        for spec in &settings.models {
            let (metrics, importances) = it.next().expect("one result per cell");
            cells.push(BaselineCell {
                task,
                model: spec.name().to_string(),
                metrics,
                importances,
            });
        }
    }
    Ok(TrtrBaseline {
        settings: settings.clone(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    pub metrics_real: RegressionMetrics<f64>,
    pub metrics_syn: RegressionMetrics<f64>,
    pub u_rmse: f64,
    pub u_r2: Option<f64>,
    pub u_model: f64,
    pub alignment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: Target,
    /// Mean `u_model` over this task's models.
    pub u_generator: f64,
    pub models: Vec<ModelResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResult {
    pub generator: String,
    /// Unweighted mean of the per-task values.
    pub u_generator_mean: f64,
    pub tasks: Vec<TaskResult>,
}

impl GeneratorResult {
    pub fn all_u_model(&self) -> impl Iterator<Item = f64> + '_ {
        self.tasks.iter().flat_map(|t| t.models.iter().map(|m| m.u_model))
    }
}

/// TSTR evaluation of one synthetic training set against a cached baseline.
pub fn evaluate_generator(
    name: &str,
    baseline: &TrtrBaseline,
    syn_train: &[LabeledExample],
    real_test: &[LabeledExample],
) -> Result<GeneratorResult> {
    let settings = &baseline.settings;
    let fitted = fit_cells(syn_train, real_test, settings)?;
    let mut tasks = Vec::with_capacity(settings.tasks.len());
    for (t, &task) in settings.tasks.iter().enumerate() {
        let mut models = Vec::with_capacity(settings.models.len());
        for m in 0..settings.models.len() {
            let idx = t * settings.models.len() + m;
            let base = &baseline.cells[idx];
            let (metrics_syn, imp) = &fitted[idx];
            let u = utility_scores(&base.metrics, metrics_syn)?;
            models.push(ModelResult {
                model: base.model.clone(),
                metrics_real: base.metrics,
                metrics_syn: *metrics_syn,
                u_rmse: u.u_rmse,
                u_r2: u.u_r2,
                u_model: u.u_model,
                alignment: importance_alignment(&base.importances, imp)?,
            });
        }
        let per_model: Vec<f64> = models.iter().map(|m| m.u_model).collect();
        tasks.push(TaskResult {
            task,
            u_generator: generator_utility(&per_model)?,
            models,
        });
    }
    let per_task: Vec<f64> = tasks.iter().map(|t| t.u_generator).collect();
    Ok(GeneratorResult {
        generator: name.to_string(),
        u_generator_mean: generator_utility(&per_task)?,
        tasks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub seed: u64,
    pub generators: Vec<GeneratorResult>,
}

pub fn run_protocol(
    real_train: &[LabeledExample],
    synthetic: &[(&str, &[LabeledExample])],
    real_test: &[LabeledExample],
    settings: &ProtocolSettings,
) -> Result<UtilityReport> {
    if synthetic.is_empty() {
        return Err(Error::InvalidInput("no synthetic training sets given".into()));
    }
    let baseline = trtr_baseline(real_train, real_test, settings)?;
    let generators = synthetic
        .iter()
        .map(|(name, rows)| evaluate_generator(name, &baseline, rows, real_test))
        .collect::<Result<Vec<_>>>()?;
    Ok(UtilityReport {
        seed: settings.seed,
        generators,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

impl UtilityReport {
    pub fn write_json<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, self)?;
        Ok(())
    }

    pub fn read_json<R: std::io::Read>(source: R) -> Result<Self> {
        Ok(serde_json::from_reader(source)?)
    }

    /// One row per generator, task and model.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "generator",
            "task",
            "model",
            "rmse_real",
            "mae_real",
            "r2_real",
            "rmse_syn",
            "mae_syn",
            "r2_syn",
            "u_rmse",
            "u_r2",
            "u_model",
            "alignment",
            "u_generator_task",
        ])?;
        for g in &self.generators {
            for t in &g.tasks {
                for m in &t.models {
                    w.write_record([
                        g.generator.clone(),
                        t.task.name().to_string(),
                        m.model.clone(),
                        m.metrics_real.rmse.to_string(),
                        m.metrics_real.mae.to_string(),
                        cell(m.metrics_real.r2),
                        m.metrics_syn.rmse.to_string(),
                        m.metrics_syn.mae.to_string(),
                        cell(m.metrics_syn.r2),
                        m.u_rmse.to_string(),
                        cell(m.u_r2),
                        m.u_model.to_string(),
                        cell(m.alignment),
                        t.u_generator.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("writing utility CSV", e))?;
        Ok(())
    }
}

/// Copy of `examples` whose targets are replaced by independent normal draws
/// matching each target's mean and spread. Features are untouched.
pub fn noise_targets(examples: &[LabeledExample], seed: u64) -> Result<Vec<LabeledExample>> {
    check_nonempty("input", examples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = examples.to_vec();
    for task in Target::ALL {
        let ys: Vec<f64> = examples.iter().map(|e| task.of(e) as f64).collect();
        let sd = crate::stats::std_dev(&ys).max(1.0);
        let normal = Normal::new(crate::stats::mean(&ys), sd)
            .map_err(|e| Error::Numerical(format!("noise distribution: {e}")))?;
        for e in &mut out {
            task.set(e, normal.sample(&mut rng).round() as i64);
        }
    }
    Ok(out)
}
