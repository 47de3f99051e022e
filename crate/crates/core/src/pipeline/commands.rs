use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::config::{InputSource, RunConfig};
use crate::copula::{fit_copula, CopulaModel};
use crate::dataset::{
    label_records, parse_flight_records, read_labeled, split_train_test, synthesize_fixture, write_labeled,
    LabeledExample, ParseOutcome, Target,
};
use crate::error::{Error, Result};
use crate::fidelity::{fidelity_report, FidelityReport};
use crate::stats::{mean, std_dev};
use crate::table::Table;
use crate::tstr::{run_protocol, ProtocolSettings, UtilityReport};

pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_CSV: &str = "test.csv";
pub const REJECTS_LOG: &str = "rejects.log";
pub const SUMMARY_JSON: &str = "summary.json";
pub const MODEL_JSON: &str = "copula_model.json";
pub const SYNTHETIC_CSV: &str = "synthetic.csv";
pub const FIDELITY_JSON: &str = "fidelity.json";
pub const FIDELITY_CSV: &str = "fidelity.csv";
pub const UTILITY_JSON: &str = "utility.json";
pub const UTILITY_CSV: &str = "utility.csv";
pub const SCORECARD_JSON: &str = "scorecard.json";
pub const PLOT_FIDELITY_CSV: &str = "plot_fidelity.csv";
pub const PLOT_UTILITY_TASKS_CSV: &str = "plot_utility_by_task.csv";
pub const PLOT_UTILITY_MODELS_CSV: &str = "plot_utility_by_model.csv";

/// Generator label used for the copula output in utility reports.
pub const COPULA_GENERATOR: &str = "gaussian_copula";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_json_file<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n").map_err(|e| Error::io("writing JSON", e))
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

/// Fails with every absent file named, not just the first.
fn require(out: &Path, names: &[&str]) -> Result<Vec<PathBuf>> {
    let paths: Vec<PathBuf> = names.iter().map(|n| out.join(n)).collect();
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingInputs(missing));
    }
    Ok(paths)
}

fn read_examples(path: &Path) -> Result<Vec<LabeledExample>> {
    read_labeled(open(path)?)
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target: Target,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub records: usize,
    pub rejected: usize,
    pub unmatched: usize,
    pub labeled: usize,
    pub train: usize,
    pub test: usize,
    pub ratio: f64,
    pub seed: u64,
    /// Computed on the training split.
    pub targets: Vec<TargetSummary>,
}

fn load_records(input: &InputSource) -> Result<ParseOutcome> {
    match input {
        InputSource::Fixture { n, seed, profile } => Ok(ParseOutcome {
            records: synthesize_fixture(*n, *seed, profile),
            rejections: Vec::new(),
        }),
        InputSource::Csv { path, mapping } => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            if bytes.iter().all(u8::is_ascii_whitespace) {
                return Err(Error::Empty(format!("no valid records in {}", path.display())));
            }
            parse_flight_records(bytes.as_slice(), mapping)
        }
    }
}

/// Parses or synthesizes records, labels them and writes the split.
pub fn cmd_prepare(config: &RunConfig, out: &Path) -> Result<PrepareSummary> {
    let parsed = load_records(&config.input)?;
    let labeled = label_records(&parsed.records);
    if labeled.examples.is_empty() {
        return Err(Error::Empty("no valid records".into()));
    }
    let split = split_train_test(&labeled.examples, config.split.ratio, config.split.seed)?;
    ensure_dir(out)?;
    write_with(&out.join(TRAIN_CSV), |w| write_labeled(w, &split.train))?;
    write_with(&out.join(TEST_CSV), |w| write_labeled(w, &split.test))?;
    write_with(&out.join(REJECTS_LOG), |w| {
        w.write_all(parsed.rejection_log().as_bytes())
            .map_err(|e| Error::io("writing rejection log", e))
    })?;
    let targets = Target::ALL
        .iter()
        .map(|&target| {
            let ys: Vec<f64> = split.train.iter().map(|e| target.of(e) as f64).collect();
            TargetSummary {
                target,
                mean: mean(&ys),
                std: std_dev(&ys),
            }
        })
        .collect();
    let summary = PrepareSummary {
        records: parsed.records.len(),
        rejected: parsed.rejections.len(),
        unmatched: labeled.unmatched,
        labeled: labeled.examples.len(),
        train: split.train.len(),
        test: split.test.len(),
        ratio: config.split.ratio,
        seed: config.split.seed,
        targets,
    };
    write_json_file(&out.join(SUMMARY_JSON), &summary)?;
    info!("prepared {} train / {} test rows", summary.train, summary.test);
    Ok(summary)
}

/// Fits the copula on the training split, persists it and writes a sample.
pub fn cmd_fit_generate(config: &RunConfig, out: &Path) -> Result<usize> {
    let [train_path] = <[PathBuf; 1]>::try_from(require(out, &[TRAIN_CSV])?).expect("one path");
    let train = read_examples(&train_path)?;
    let model = fit_copula(&Table::from_examples(&train), &config.copula)?;
    write_with(&out.join(MODEL_JSON), |w| model.save(w))?;
    let n = config.generate.n_synthetic.unwrap_or(train.len());
    sample_to_csv(&model, n, config.generate.seed, &out.join(SYNTHETIC_CSV))?;
    info!("wrote {n} synthetic rows");
    Ok(n)
}

/// Draws `n` rows from a fitted model into a labeled CSV.
pub fn sample_to_csv(model: &CopulaModel, n: usize, seed: u64, path: &Path) -> Result<()> {
    let syn = model.sample(n, seed)?;
    write_with(path, |w| syn.table.write_labeled_csv(w))
}

pub fn load_model(path: &Path) -> Result<CopulaModel> {
    CopulaModel::load(open(path)?)
}

pub fn cmd_fidelity(config: &RunConfig, out: &Path) -> Result<FidelityReport> {
    let paths = require(out, &[TRAIN_CSV, SYNTHETIC_CSV])?;
    let real = Table::read_labeled_csv(open(&paths[0])?)?;
    let syn = Table::read_labeled_csv(open(&paths[1])?)?;
    let report = fidelity_report(&real, &syn, &config.fidelity)?;
    write_with(&out.join(FIDELITY_JSON), |w| report.write_json(w))?;
    write_with(&out.join(FIDELITY_CSV), |w| report.write_csv(w))?;
    Ok(report)
}

pub fn cmd_utility(config: &RunConfig, out: &Path) -> Result<UtilityReport> {
    let paths = require(out, &[TRAIN_CSV, TEST_CSV, SYNTHETIC_CSV])?;
    let train = read_examples(&paths[0])?;
    let test = read_examples(&paths[1])?;
    let syn = read_examples(&paths[2])?;
    let settings = ProtocolSettings {
        tasks: config.utility.tasks.clone(),
        models: config.utility.models.clone(),
        seed: config.utility.seed,
    };
    let report = run_protocol(&train, &[(COPULA_GENERATOR, &syn)], &test, &settings)?;
    write_with(&out.join(UTILITY_JSON), |w| report.write_json(w))?;
    write_with(&out.join(UTILITY_CSV), |w| report.write_csv(w))?;
    Ok(report)
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

/// Merges the fidelity and utility reports without recomputing anything and
/// writes plot-ready CSVs.
pub fn cmd_report(out: &Path) -> Result<Value> {
    let paths = require(out, &[FIDELITY_JSON, UTILITY_JSON])?;
    let fidelity: FidelityReport = serde_json::from_reader(open(&paths[0])?)?;
    let utility = UtilityReport::read_json(open(&paths[1])?)?;

    let mut generators = Map::new();
    for g in &utility.generators {
        let tasks: Map<String, Value> = g
            .tasks
            .iter()
            .map(|t| {
                let models: Map<String, Value> = t
                    .models
                    .iter()
                    .map(|m| {
                        let v = json!({
                            "u_model": m.u_model,
                            "u_rmse": m.u_rmse,
                            "u_r2": m.u_r2,
                            "alignment": m.alignment,
                        });
                        (m.model.clone(), v)
                    })
                    .collect();
                let v = json!({ "u_generator": t.u_generator, "models": models });
                (t.task.name().to_string(), v)
            })
            .collect();
        generators.insert(
            g.generator.clone(),
            json!({ "u_generator_mean": g.u_generator_mean, "tasks": tasks }),
        );
    }
    let scorecard = json!({
        "fidelity": serde_json::to_value(&fidelity)?,
        "utility": Value::Object(generators),
    });
    write_json_file(&out.join(SCORECARD_JSON), &scorecard)?;

    write_with(&out.join(PLOT_FIDELITY_CSV), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["metric", "value"])?;
        for (name, v) in fidelity.entries() {
            c.write_record([name.to_string(), num(v)])?;
        }
        c.flush().map_err(|e| Error::io("writing plot data", e))
    })?;
    write_with(&out.join(PLOT_UTILITY_TASKS_CSV), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["generator", "task", "u_generator"])?;
        for g in &utility.generators {
            for t in &g.tasks {
                c.write_record([g.generator.clone(), t.task.name().to_string(), t.u_generator.to_string()])?;
            }
            c.write_record([g.generator.clone(), "mean".to_string(), g.u_generator_mean.to_string()])?;
        }
        c.flush().map_err(|e| Error::io("writing plot data", e))
    })?;
    write_with(&out.join(PLOT_UTILITY_MODELS_CSV), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["generator", "task", "model", "u_model", "alignment"])?;
        for g in &utility.generators {
            for t in &g.tasks {
                for m in &t.models {
                    c.write_record([
                        g.generator.clone(),
                        t.task.name().to_string(),
                        m.model.clone(),
                        m.u_model.to_string(),
                        num(m.alignment),
                    ])?;
                }
            }
        }
        c.flush().map_err(|e| Error::io("writing plot data", e))
    })?;
    Ok(scorecard)
}
