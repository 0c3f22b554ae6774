//! Benchmark harness: suite definitions, per-task method runs, JSON config
//! and accuracy tables.
//!
//! Feature files live at `<features>/<dataset>/<domain>.mdaf`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::alignment::{
    evaluate_labels, fit, one_nn_labels, AlignmentConfig, Diagnostics, MuMode,
};
use crate::error::{Error, Result};
use crate::features::{load_binary, make_task, normalize, DaTask, NormalizeMode};
use crate::kernels::{Bandwidth, KernelChoice};
use crate::manifold::{gfk_kernel, gfk_transform, pca_subspace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dataset {
    OfficeCaltech10,
    Office31,
    OfficeHome,
}

const OFFICE_CALTECH10_TASKS: [(&str, &str); 12] = [
    ("C", "A"),
    ("C", "W"),
    ("C", "D"),
    ("A", "C"),
    ("A", "W"),
    ("A", "D"),
    ("W", "C"),
    ("W", "A"),
    ("W", "D"),
    ("D", "C"),
    ("D", "A"),
    ("D", "W"),
];

const OFFICE31_TASKS: [(&str, &str); 6] = [
    ("A", "W"),
    ("A", "D"),
    ("W", "A"),
    ("W", "D"),
    ("D", "A"),
    ("D", "W"),
];

const OFFICE_HOME_TASKS: [(&str, &str); 12] = [
    ("A", "C"),
    ("A", "P"),
    ("A", "R"),
    ("C", "A"),
    ("C", "P"),
    ("C", "R"),
    ("P", "A"),
    ("P", "C"),
    ("P", "R"),
    ("R", "A"),
    ("R", "C"),
    ("R", "P"),
];

impl Dataset {
    pub const ALL: [Dataset; 3] = [Self::OfficeCaltech10, Self::Office31, Self::OfficeHome];

    pub fn name(&self) -> &'static str {
        match self {
            Self::OfficeCaltech10 => "office-caltech10",
            Self::Office31 => "office31",
            Self::OfficeHome => "office-home",
        }
    }

    pub fn domains(&self) -> &'static [&'static str] {
        match self {
            Self::OfficeCaltech10 => &["A", "W", "D", "C"],
            Self::Office31 => &["A", "W", "D"],
            Self::OfficeHome => &["A", "C", "P", "R"],
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            Self::OfficeCaltech10 => 10,
            Self::Office31 => 31,
            Self::OfficeHome => 65,
        }
    }

    /// Tasks as `(source, target)` domain codes, in table order.
    pub fn tasks(&self) -> Vec<(String, String)> {
        let list: &[(&str, &str)] = match self {
            Self::OfficeCaltech10 => &OFFICE_CALTECH10_TASKS,
            Self::Office31 => &OFFICE31_TASKS,
            Self::OfficeHome => &OFFICE_HOME_TASKS,
        };
        list.iter()
            .map(|(s, t)| (s.to_string(), t.to_string()))
            .collect()
    }

    /// Published per-task accuracies (percent) of a method on fc-layer
    /// features, followed by the average, where available.
    pub fn published_accuracy(&self, method: Method) -> Option<&'static [f64]> {
        match (self, method) {
            (Self::OfficeCaltech10, Method::Mda) => Some(&[
                96.1, 94.9, 96.2, 94.2, 98.6, 100.0, 94.9, 96.3, 100.0, 94.2, 95.8, 98.6, 96.7,
            ]),
            (Self::OfficeCaltech10, Method::MedaIr) => Some(&[
                96.2, 95.9, 96.2, 95.2, 98.0, 96.8, 94.5, 96.2, 99.4, 93.8, 95.5, 98.6, 96.4,
            ]),
            (Self::Office31, Method::Mda) => Some(&[94.0, 92.6, 77.6, 99.2, 78.7, 96.9, 89.8]),
            (Self::Office31, Method::MedaIr) => {
                Some(&[90.8, 91.4, 74.6, 97.2, 75.4, 96.0, 87.5])
            }
            (Self::OfficeHome, Method::Mda) => Some(&[
                55.6, 80.4, 81.6, 70.2, 80.7, 80.8, 71.0, 55.6, 82.5, 73.5, 57.7, 83.9, 72.8,
            ]),
            (Self::OfficeHome, Method::MedaIr) => Some(&[
                52.9, 79.3, 78.9, 67.3, 78.8, 78.8, 68.2, 53.4, 79.8, 71.8, 56.3, 83.0, 70.7,
            ]),
            _ => None,
        }
    }
}

impl std::str::FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown dataset {s:?}")))
    }
}

impl std::fmt::Display for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Nearest source neighbour, no adaptation.
    Source1nn,
    /// Kernel ridge on source only (`lambda = rho = 0`).
    SrmOnly,
    /// Alignment on features mapped through the geodesic flow kernel.
    MedaIr,
    /// Alignment on the raw features.
    Mda,
}

impl Method {
    pub const ALL: [Method; 4] = [Self::Source1nn, Self::SrmOnly, Self::MedaIr, Self::Mda];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Source1nn => "source_1nn",
            Self::SrmOnly => "srm_only",
            Self::MedaIr => "meda_ir",
            Self::Mda => "mda",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Config

#[derive(Clone, Debug, PartialEq)]
pub struct HarnessConfig {
    pub alignment: AlignmentConfig,
    /// GFK subspace dimension for `meda_ir`.
    pub subspace_dim: usize,
    /// Applied to each domain independently after loading.
    pub normalize: NormalizeMode,
    pub methods: Vec<Method>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            alignment: AlignmentConfig::default(),
            subspace_dim: 20,
            normalize: NormalizeMode::Zscore,
            methods: Method::ALL.to_vec(),
        }
    }
}

const CONFIG_KEYS: [&str; 10] = [
    "lambda",
    "rho",
    "eta",
    "p",
    "iterations",
    "kernel",
    "mu",
    "subspace_dim",
    "normalize",
    "methods",
];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn as_f64(v: &Value, key: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| cfg_err(format!("{key}: expected a number, got {v}")))
}

fn as_count(v: &Value, key: &str) -> Result<usize> {
    v.as_u64()
        .and_then(|u| usize::try_from(u).ok())
        .ok_or_else(|| cfg_err(format!("{key}: expected a non-negative integer, got {v}")))
}

fn as_str<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| cfg_err(format!("{key}: expected a string, got {v}")))
}

fn as_object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| cfg_err(format!("{key}: expected an object, got {v}")))
}

fn parse_kernel(v: &Value, warnings: &mut Vec<String>) -> Result<KernelChoice> {
    let obj = as_object(v, "kernel")?;
    for k in obj.keys().filter(|k| !["kind", "gamma"].contains(&k.as_str())) {
        warnings.push(format!("unknown key kernel.{k}"));
    }
    let kind = obj
        .get("kind")
        .map(|k| as_str(k, "kernel.kind"))
        .transpose()?
        .unwrap_or("rbf");
    match kind {
        "linear" => Ok(KernelChoice::Linear),
        "rbf" => match obj.get("gamma") {
            None => Ok(KernelChoice::Rbf(Bandwidth::Median)),
            Some(Value::String(s)) if s == "median" => Ok(KernelChoice::Rbf(Bandwidth::Median)),
            Some(g) => {
                let gamma = as_f64(g, "kernel.gamma")?;
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(cfg_err(format!("kernel.gamma must be > 0, got {gamma}")));
                }
                Ok(KernelChoice::Rbf(Bandwidth::Fixed(gamma)))
            }
        },
        other => Err(cfg_err(format!("kernel.kind: unknown kernel {other:?}"))),
    }
}

fn parse_mu(v: &Value, warnings: &mut Vec<String>) -> Result<MuMode> {
    let obj = as_object(v, "mu")?;
    for k in obj.keys().filter(|k| !["mode", "value"].contains(&k.as_str())) {
        warnings.push(format!("unknown key mu.{k}"));
    }
    let mode = obj
        .get("mode")
        .map(|m| as_str(m, "mu.mode"))
        .transpose()?
        .unwrap_or("adaptive");
    match mode {
        "adaptive" => Ok(MuMode::Adaptive),
        "fixed" => {
            let value = obj
                .get("value")
                .ok_or_else(|| cfg_err("mu.value required for fixed mode"))?;
            Ok(MuMode::Fixed(as_f64(value, "mu.value")?))
        }
        other => Err(cfg_err(format!("mu.mode: unknown mode {other:?}"))),
    }
}

impl HarnessConfig {
    /// Parses JSON config text. Absent keys take defaults; unknown keys are
    /// returned as warnings; type errors and out-of-range values fail.
    pub fn parse(text: &str) -> Result<(Self, Vec<String>)> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| cfg_err(format!("invalid JSON: {e}")))?;
        let obj = as_object(&root, "config")?;
        let mut warnings: Vec<String> = obj
            .keys()
            .filter(|k| !CONFIG_KEYS.contains(&k.as_str()))
            .map(|k| format!("unknown key {k}"))
            .collect();

        let mut cfg = Self::default();
        let a = &mut cfg.alignment;
        if let Some(v) = obj.get("lambda") {
            a.lambda = as_f64(v, "lambda")?;
        }
        if let Some(v) = obj.get("rho") {
            a.rho = as_f64(v, "rho")?;
        }
        if let Some(v) = obj.get("eta") {
            a.eta = as_f64(v, "eta")?;
        }
        if let Some(v) = obj.get("p") {
            a.p = as_count(v, "p")?;
        }
        if let Some(v) = obj.get("iterations") {
            a.iterations = as_count(v, "iterations")?;
        }
        if let Some(v) = obj.get("kernel") {
            a.kernel = parse_kernel(v, &mut warnings)?;
        }
        if let Some(v) = obj.get("mu") {
            a.mu_mode = parse_mu(v, &mut warnings)?;
        }
        if let Some(v) = obj.get("subspace_dim") {
            cfg.subspace_dim = as_count(v, "subspace_dim")?;
        }
        if let Some(v) = obj.get("normalize") {
            cfg.normalize = as_str(v, "normalize")?
                .parse()
                .map_err(|e: Error| cfg_err(e.to_string()))?;
        }
        if let Some(v) = obj.get("methods") {
            let list = v
                .as_array()
                .ok_or_else(|| cfg_err(format!("methods: expected an array, got {v}")))?;
            cfg.methods = list
                .iter()
                .map(|m| {
                    as_str(m, "methods")?
                        .parse()
                        .map_err(|e: Error| cfg_err(e.to_string()))
                })
                .collect::<Result<_>>()?;
        }
        cfg.validate()?;
        Ok((cfg, warnings))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let (cfg, warnings) = Self::parse(text)?;
        for w in warnings {
            log::warn!("config: {w}");
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.alignment.validate()?;
        if self.subspace_dim == 0 {
            return Err(cfg_err("subspace_dim must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(cfg_err("methods must not be empty"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let a = &self.alignment;
        let kernel = match a.kernel {
            KernelChoice::Linear => json!({"kind": "linear"}),
            KernelChoice::Rbf(Bandwidth::Median) => json!({"kind": "rbf", "gamma": "median"}),
            KernelChoice::Rbf(Bandwidth::Fixed(g)) => json!({"kind": "rbf", "gamma": g}),
        };
        let mu = match a.mu_mode {
            MuMode::Adaptive => json!({"mode": "adaptive"}),
            MuMode::Fixed(v) => json!({"mode": "fixed", "value": v}),
        };
        let normalize = match self.normalize {
            NormalizeMode::None => "none",
            NormalizeMode::Zscore => "zscore",
            NormalizeMode::UnitLength => "unit_length",
        };
        json!({
            "lambda": a.lambda,
            "rho": a.rho,
            "eta": a.eta,
            "p": a.p,
            "iterations": a.iterations,
            "kernel": kernel,
            "mu": mu,
            "subspace_dim": self.subspace_dim,
            "normalize": normalize,
            "methods": self.methods.iter().map(Method::name).collect::<Vec<_>>(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_json()).expect("config serialises");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

// ---------------------------------------------------------------------------
// Suites and tasks

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteSpec {
    pub dataset: Dataset,
    pub tasks: Vec<(String, String)>,
    pub feature_dir: PathBuf,
    pub config: HarnessConfig,
}

impl SuiteSpec {
    pub fn new(dataset: Dataset, feature_dir: impl Into<PathBuf>, config: HarnessConfig) -> Self {
        Self {
            dataset,
            tasks: dataset.tasks(),
            feature_dir: feature_dir.into(),
            config,
        }
    }

    pub fn methods(&self) -> &[Method] {
        &self.config.methods
    }

    pub fn feature_path(&self, domain: &str) -> PathBuf {
        self.feature_dir
            .join(self.dataset.name())
            .join(format!("{domain}.mdaf"))
    }

    /// Every feature file referenced by the task list that does not exist.
    pub fn missing_files(&self) -> Vec<PathBuf> {
        let mut seen = Vec::new();
        for (s, t) in &self.tasks {
            for d in [s, t] {
                let p = self.feature_path(d);
                if !seen.contains(&p) {
                    seen.push(p);
                }
            }
        }
        seen.into_iter().filter(|p| !p.is_file()).collect()
    }

    pub fn load_task(&self, source: &str, target: &str) -> Result<DaTask> {
        let mode = self.config.normalize;
        let src = normalize(&load_binary(self.feature_path(source))?, mode);
        let tgt = normalize(&load_binary(self.feature_path(target))?, mode);
        make_task(src, tgt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutcome {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    /// Per-iteration diagnostics for the alignment methods.
    pub diagnostics: Option<Diagnostics>,
}

fn target_truth(task: &DaTask) -> Result<&[usize]> {
    task.target()
        .labels()
        .ok_or(Error::MissingLabels("target evaluation"))
}

fn outcome(task: &DaTask, predicted: &[usize], diagnostics: Option<Diagnostics>) -> Result<TaskOutcome> {
    let eval = evaluate_labels(predicted, target_truth(task)?, task.class_count())?;
    Ok(TaskOutcome {
        accuracy: eval.accuracy,
        confusion: eval.confusion,
        diagnostics,
    })
}

/// Runs one method on an in-memory task with labeled target.
pub fn run_method(task: &DaTask, method: Method, config: &HarnessConfig) -> Result<TaskOutcome> {
    target_truth(task)?;
    match method {
        Method::Source1nn => {
            let pred = one_nn_labels(task.source().x(), task.source_labels(), task.target().x())?;
            outcome(task, &pred, None)
        }
        Method::SrmOnly => {
            let cfg = AlignmentConfig {
                lambda: 0.0,
                rho: 0.0,
                iterations: 1,
                mu_mode: MuMode::Fixed(0.5),
                ..config.alignment.clone()
            };
            let model = fit(task, &cfg)?;
            outcome(task, model.target_labels(), Some(model.diagnostics().clone()))
        }
        Method::Mda => {
            let model = fit(task, &config.alignment)?;
            outcome(task, model.target_labels(), Some(model.diagnostics().clone()))
        }
        Method::MedaIr => {
            let mapped = gfk_task(task, config.subspace_dim)?;
            let model = fit(&mapped, &config.alignment)?;
            outcome(task, model.target_labels(), Some(model.diagnostics().clone()))
        }
    }
}

/// Maps both domains through the geodesic flow kernel between their PCA
/// subspaces. The subspace dimension is clamped to what both domains and
/// `2k <= d` allow.
pub fn gfk_task(task: &DaTask, subspace_dim: usize) -> Result<DaTask> {
    let (xs, xt) = (task.source().x(), task.target().x());
    let d = xs.ncols();
    let k = subspace_dim
        .min(d / 2)
        .min(xs.nrows())
        .min(xt.nrows());
    if k == 0 {
        return Err(Error::invalid(format!(
            "cannot build a GFK subspace (d={d}, n_s={}, n_t={})",
            xs.nrows(),
            xt.nrows()
        )));
    }
    if k < subspace_dim {
        log::info!("GFK subspace dimension clamped from {subspace_dim} to {k}");
    }
    let g = gfk_kernel(&pca_subspace(xs, k)?, &pca_subspace(xt, k)?)?;
    let source = task.source().with_features(gfk_transform(g.matrix(), xs)?)?;
    let target = task.target().with_features(gfk_transform(g.matrix(), xt)?)?;
    make_task(source, target)
}

/// Loads the two domains of `spec` and runs `method`.
pub fn run_task(spec: &SuiteSpec, source: &str, target: &str, method: Method) -> Result<TaskOutcome> {
    let missing: Vec<PathBuf> = [source, target]
        .iter()
        .map(|d| spec.feature_path(d))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    let task = spec.load_task(source, target)?;
    run_method(&task, method, &spec.config)
}

/// Runs every task for every configured method. Missing files abort before
/// any work starts. Up to `jobs` tasks run concurrently; the table is
/// ordered by the task list regardless.
pub fn run_suite(spec: &SuiteSpec, jobs: usize) -> Result<ResultTable> {
    let missing = spec.missing_files();
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    let run_one = |(s, t): &(String, String)| -> Result<Vec<f64>> {
        let task = spec.load_task(s, t)?;
        spec.methods()
            .iter()
            .map(|&m| {
                let out = run_method(&task, m, &spec.config)?;
                log::info!("{s}->{t} {m}: {:.1}", 100.0 * out.accuracy);
                Ok(out.accuracy)
            })
            .collect()
    };
    let per_task: Vec<Vec<f64>> = if jobs <= 1 {
        spec.tasks.iter().map(run_one).collect::<Result<_>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| spec.tasks.par_iter().map(run_one).collect::<Result<_>>())?
    };
    let accuracies = (0..spec.methods().len())
        .map(|m| per_task.iter().map(|row| row[m]).collect())
        .collect();
    Ok(ResultTable {
        dataset: spec.dataset,
        tasks: spec.tasks.clone(),
        methods: spec.methods().to_vec(),
        accuracies,
    })
}

// ---------------------------------------------------------------------------
// Result tables

/// Accuracy per method and task. Cells are shown as percentages with one
/// decimal; the average is the mean of the shown cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub dataset: Dataset,
    pub tasks: Vec<(String, String)>,
    pub methods: Vec<Method>,
    /// `accuracies[method][task]` as fractions in `[0, 1]`.
    pub accuracies: Vec<Vec<f64>>,
}

/// Percentage rounded to one decimal.
pub fn percent(accuracy: f64) -> f64 {
    (accuracy * 1000.0).round() / 10.0
}

impl ResultTable {
    pub fn task_labels(&self) -> Vec<String> {
        self.tasks.iter().map(|(s, t)| format!("{s}->{t}")).collect()
    }

    pub fn cells(&self, method_idx: usize) -> Vec<f64> {
        self.accuracies[method_idx].iter().map(|&a| percent(a)).collect()
    }

    pub fn average(&self, method_idx: usize) -> f64 {
        let cells = self.cells(method_idx);
        let mean = cells.iter().sum::<f64>() / cells.len() as f64;
        (mean * 10.0).round() / 10.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method");
        for label in self.task_labels() {
            out.push(',');
            out.push_str(&label);
        }
        out.push_str(",average\n");
        for (i, m) in self.methods.iter().enumerate() {
            out.push_str(m.name());
            for c in self.cells(i) {
                write!(out, ",{c:.1}").unwrap();
            }
            writeln!(out, ",{:.1}", self.average(i)).unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let labels = self.task_labels();
        let name_w = self
            .methods
            .iter()
            .map(|m| m.name().len())
            .max()
            .unwrap_or(6)
            .max(6);
        let col_w = labels.iter().map(String::len).max().unwrap_or(5).max(7);
        let mut out = format!("{:<name_w$}", self.dataset.name());
        for l in &labels {
            write!(out, " {l:>col_w$}").unwrap();
        }
        writeln!(out, " {:>col_w$}", "Average").unwrap();
        for (i, m) in self.methods.iter().enumerate() {
            write!(out, "{:<name_w$}", m.name()).unwrap();
            for c in self.cells(i) {
                write!(out, " {c:>col_w$.1}").unwrap();
            }
            writeln!(out, " {:>col_w$.1}", self.average(i)).unwrap();
        }
        out
    }
}
