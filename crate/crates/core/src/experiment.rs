//! Experiment configuration and the end-to-end pipeline stages shared by
//! the command-line front end and the integration tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::cam::{
    aligned_templates, compute_cam, noise_analysis, paired_ttest, prominence, spearman, window_mean_stats,
    ActivationMap, TTest, Template, Window,
};
use crate::dsp::detect_r_peaks;
use crate::error::{Error, Result};
use crate::eval::{
    independence_task, relevance_task, rep2label_task, AuxNetConfig, IndependenceReport, RelevanceReport,
    Rep2LabelReport,
};
use crate::events::{EventKind, EventList};
use crate::features::{concat_features, detect_rapid_eye_movements, detect_slow_waves, FeatureSet, FeatureVector, Standardizer};
use crate::io::FeatureTable;
use crate::matrix::Matrix;
use crate::model::{classification_metrics, train, Checkpoint, LambdaStrategy, Metrics, ModelConfig, ModelInputs, Network, TrainOutcome};
use crate::signal::{split_dataset, upsample_minority_indices, Dataset, SignalRecord, Split};
use crate::synth::{gen_ecg_like, gen_eeg_like, EcgSynthParams, EegSynthParams, GroundTruth, EOG_CHANNEL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    SynthEcg {
        n_records: usize,
        #[serde(default)]
        params: EcgSynthParams,
    },
    SynthEeg {
        n_records: usize,
        #[serde(default)]
        params: EegSynthParams,
    },
    Manifest {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub source: DataSource,
    pub classes: usize,
    /// Records are resampled to this rate when it differs.
    pub fs: Option<f64>,
    /// Train/val/test fractions.
    pub split: [f64; 3],
    pub stratify: bool,
    /// Minority/majority ratio to reach by duplicating training records.
    pub upsample_ratio: Option<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DataSource::SynthEcg {
                n_records: 800,
                params: EcgSynthParams::default(),
            },
            classes: 2,
            fs: None,
            split: [0.7, 0.15, 0.15],
            stratify: true,
            upsample_ratio: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkSource {
    /// Planted positions of a synthetic dataset.
    GroundTruth,
    #[default]
    Detected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CamConfig {
    pub landmark: EventKind,
    pub landmark_source: LandmarkSource,
    pub window: Window,
    /// Named sub-windows compared between models with paired t-tests.
    pub sub_windows: BTreeMap<String, Window>,
    pub intensities_ms: Vec<f64>,
    /// Class whose map is computed; records of that class are used.
    pub class: usize,
    pub split: Split,
    pub eog_channel: String,
}

impl Default for CamConfig {
    fn default() -> Self {
        Self {
            landmark: EventKind::RPeak,
            landmark_source: LandmarkSource::Detected,
            window: Window::ECG_TEMPLATE,
            sub_windows: BTreeMap::from([("p_wave".to_string(), Window::P_WAVE), ("qr".to_string(), Window::QR)]),
            intensities_ms: vec![0.0, 50.0, 100.0, 200.0],
            class: 1,
            split: Split::Test,
            eog_channel: EOG_CHANNEL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub probe: AuxNetConfig,
    pub folds: usize,
    /// Hand-engineered features the representation is tested against;
    /// empty means the model's own feature sets.
    pub probe_features: Vec<FeatureSet>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            probe: AuxNetConfig::default(),
            folds: 5,
            probe_features: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.0, 10.0, 100.0, 500.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// Feature sets concatenated into `f`.
    pub features: Vec<FeatureSet>,
    pub model: ModelConfig,
    /// Takes the place of `model.lambda` when given.
    pub lambda: Option<LambdaStrategy>,
    pub cam: CamConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
    /// Applied to every seeded stage.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            features: Vec::new(),
            model: ModelConfig::default(),
            lambda: None,
            cam: CamConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON document, applies `key.path=value` overrides and
    /// resolves derived fields.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolved()
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        Self::from_json_with_overrides(&crate::io::read_text(path)?, overrides)
    }

    /// Copies the shared seed and the λ section into the stages and sizes
    /// the model for the configured features.
    pub fn resolved(mut self) -> Result<Self> {
        let seed = self.seed;
        self.model.seed = seed;
        self.eval.probe.seed = seed;
        match &mut self.dataset.source {
            DataSource::SynthEcg { params, .. } => params.seed = seed,
            DataSource::SynthEeg { params, .. } => params.seed = seed,
            DataSource::Manifest { .. } => {}
        }
        if let Some(l) = self.lambda {
            self.model.lambda = l;
        }
        self.model.feature_dim = self.features.iter().map(|f| f.dim()).sum();
        self.model.classes = self.dataset.classes;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.model.lambda.validate()?;
        self.eval.probe.validate()?;
        self.cam.window.validate()?;
        let [a, b, c] = self.dataset.split;
        if [a, b, c].iter().any(|r| !(*r > 0.0)) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("dataset.split {:?} must be positive and sum to 1", self.dataset.split)));
        }
        if self.dataset.classes < 2 {
            return Err(Error::Config("dataset.classes must be at least 2".into()));
        }
        if self.model.feature_dim == 0 && !self.model.lambda.is_zero() {
            return Err(Error::Config("a non-zero lambda needs at least one feature set".into()));
        }
        if self.cam.class >= self.dataset.classes {
            return Err(Error::Config(format!("cam.class {} outside 0..{}", self.cam.class, self.dataset.classes)));
        }
        for (name, w) in &self.cam.sub_windows {
            if w.start_ms < self.cam.window.start_ms || w.end_ms > self.cam.window.end_ms || w.start_ms > w.end_ms {
                return Err(Error::Config(format!("cam.sub_windows.{name} lies outside cam.window")));
            }
        }
        if self.eval.folds < 2 {
            return Err(Error::Config("eval.folds must be at least 2".into()));
        }
        match &self.dataset.source {
            DataSource::SynthEcg { n_records, params } => {
                params.validate()?;
                if *n_records == 0 {
                    return Err(Error::Config("dataset.source.n_records must be positive".into()));
                }
            }
            DataSource::SynthEeg { n_records, params } => {
                params.validate()?;
                if *n_records == 0 {
                    return Err(Error::Config("dataset.source.n_records must be positive".into()));
                }
            }
            DataSource::Manifest { .. } => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn probe_feature_sets(&self) -> Vec<FeatureSet> {
        if self.eval.probe_features.is_empty() {
            self.features.clone()
        } else {
            self.eval.probe_features.clone()
        }
    }
}

/// Sets a dotted path inside a JSON document. The value is parsed as JSON
/// and falls back to a plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} has an empty segment")));
    }
    let mut node = doc;
    for p in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(Error::Config(format!("override {key:?}: {p} is not inside an object")));
        }
        node = node
            .as_object_mut()
            .expect("checked object")
            .entry(p.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override {key:?} does not address an object field")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Records split into train/val/test with their feature vectors.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    /// Planted landmarks by record id, for synthetic sources.
    pub truth: Option<BTreeMap<String, GroundTruth>>,
    /// Concatenated model features, one per record.
    pub features: Vec<FeatureVector>,
}

impl Prepared {
    pub fn ids(&self) -> Vec<String> {
        self.dataset.records.iter().map(|r| r.id.clone()).collect()
    }
}

/// Raw records of the configured source, before padding.
pub fn load_records(cfg: &ExperimentConfig, manifest: Option<&Path>) -> Result<(Vec<SignalRecord>, Option<Vec<GroundTruth>>)> {
    if let Some(path) = manifest {
        return Ok((crate::io::load_manifest(path, cfg.dataset.classes)?, None));
    }
    match &cfg.dataset.source {
        DataSource::SynthEcg { n_records, params } => {
            let ds = gen_ecg_like(*n_records, params)?;
            Ok((ds.records, Some(ds.truth)))
        }
        DataSource::SynthEeg { n_records, params } => {
            let ds = gen_eeg_like(*n_records, params)?;
            Ok((ds.records, Some(ds.truth)))
        }
        DataSource::Manifest { path } => Ok((crate::io::load_manifest(path, cfg.dataset.classes)?, None)),
    }
}

/// Resamples, pads to the model input length, splits, and extracts (or
/// reads) the model features.
pub fn prepare(
    cfg: &ExperimentConfig,
    manifest: Option<&Path>,
    truth_override: Option<Vec<GroundTruth>>,
    features_csv: Option<&Path>,
) -> Result<Prepared> {
    let (mut records, truth) = load_records(cfg, manifest)?;
    let truth = truth_override.or(truth);
    let n = cfg.model.input_len;
    for r in &mut records {
        if let Some(fs) = cfg.dataset.fs {
            r.resample_to(fs)?;
        }
        if r.samples.len() > n {
            return Err(Error::Data(format!(
                "record {} has {} samples, more than model.input_len {n}",
                r.id,
                r.samples.len()
            )));
        }
        r.zero_pad_to(n)?;
    }
    let [a, b, c] = cfg.dataset.split;
    let dataset = split_dataset(records, cfg.dataset.classes, (a, b, c), cfg.dataset.stratify, cfg.seed)?;
    let features = match features_csv {
        Some(p) => features_from_table(cfg, &dataset, &crate::io::read_features_csv(p)?)?,
        None => extract_features(&cfg.features, &dataset.records)?,
    };
    Ok(Prepared {
        dataset,
        truth: truth.map(|t| t.into_iter().map(|g| (g.record_id.clone(), g)).collect()),
        features,
    })
}

/// Concatenation of the given sets for every record.
pub fn extract_features(sets: &[FeatureSet], records: &[SignalRecord]) -> Result<Vec<FeatureVector>> {
    records
        .iter()
        .map(|r| {
            let mut acc = FeatureVector::empty(&r.id);
            for s in sets {
                acc = concat_features(&acc, &s.extract(r)?)?;
            }
            acc.validate()?;
            Ok(acc)
        })
        .collect()
}

fn features_from_table(cfg: &ExperimentConfig, dataset: &Dataset, table: &FeatureTable) -> Result<Vec<FeatureVector>> {
    let ids: Vec<String> = dataset.records.iter().map(|r| r.id.clone()).collect();
    let m = table.aligned(&ids)?;
    if m.cols != cfg.model.feature_dim {
        return Err(Error::Data(format!(
            "feature table has {} columns, the configured sets need {}",
            m.cols, cfg.model.feature_dim
        )));
    }
    let set_id = cfg.features.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("+");
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, id)| FeatureVector {
            record_id: id.clone(),
            values: m.row(i).to_vec(),
            names: table.names.clone(),
            set_id: set_id.clone(),
            imputed: false,
        })
        .collect())
}

fn feature_matrix(rows: &[FeatureVector]) -> Result<Matrix> {
    let d = rows.first().map(|r| r.dim()).unwrap_or(0);
    Matrix::from_vec(rows.len(), d, rows.iter().flat_map(|r| r.values.iter().copied()).collect())
}

/// Standardizer fitted on the training split of `rows`.
pub fn fit_standardizer(dataset: &Dataset, rows: &[FeatureVector]) -> Result<Standardizer> {
    let d = rows.first().map(|r| r.dim()).unwrap_or(0);
    if d == 0 {
        return Ok(Standardizer::identity(0));
    }
    let train: Vec<Vec<f64>> = dataset.indices(Split::Train).iter().map(|&i| rows[i].values.clone()).collect();
    Standardizer::fit(&train)
}

/// Every record as network input, features standardized. A
/// zero-width standardizer drops the features, so a model without
/// features can run on a dataset prepared for one with them.
pub fn model_inputs(prepared: &Prepared, standardizer: &Standardizer) -> Result<ModelInputs> {
    let recs = &prepared.dataset.records;
    let mut data = Vec::new();
    if standardizer.dim() > 0 {
        for f in &prepared.features {
            data.extend(standardizer.transform(&f.values)?);
        }
    }
    ModelInputs::new(
        recs.iter().map(|r| r.id.clone()).collect(),
        recs.iter().map(|r| r.samples.clone()).collect(),
        recs.iter().map(|r| r.original_len()).collect(),
        recs.iter().map(|r| r.label).collect(),
        Matrix::from_vec(recs.len(), standardizer.dim(), data)?,
    )
}

/// Trains the configured model on the training split, selecting on the
/// validation split.
pub fn train_model(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<TrainOutcome> {
    let standardizer = if cfg.model.feature_dim == 0 {
        Standardizer::identity(0)
    } else {
        let have = prepared.features.first().map(|f| f.dim()).unwrap_or(0);
        if have != cfg.model.feature_dim {
            return Err(Error::Config(format!(
                "prepared features have {have} columns, the model expects {}",
                cfg.model.feature_dim
            )));
        }
        fit_standardizer(&prepared.dataset, &prepared.features)?
    };
    let inputs = model_inputs(prepared, &standardizer)?;
    let mut train_idx = prepared.dataset.indices(Split::Train);
    if let Some(ratio) = cfg.dataset.upsample_ratio {
        let labels = prepared.dataset.labels(&train_idx);
        train_idx = upsample_minority_indices(&labels, ratio, cfg.seed)?
            .into_iter()
            .map(|j| train_idx[j])
            .collect();
    }
    let val_idx = prepared.dataset.indices(Split::Val);
    info!(
        "training on {} records ({} validation), feature dim {}, lambda {:?}",
        train_idx.len(),
        val_idx.len(),
        cfg.model.feature_dim,
        cfg.model.lambda
    );
    let network = Network::new(cfg.model.clone())?;
    train(&inputs.subset(&train_idx), &inputs.subset(&val_idx), network, standardizer)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Test-split classification of the model itself.
    pub main: Metrics,
    pub relevance: Option<RelevanceReport>,
    pub independence: Option<IndependenceReport>,
    pub rep2label: Rep2LabelReport,
}

/// Evaluation of one trained model as written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub model: String,
    pub config_hash: String,
    pub seed: u64,
    pub lambda: LambdaStrategy,
    pub features: Vec<FeatureSet>,
    pub best_epoch: usize,
    pub report: EvalReport,
}

pub const REPORT_CSV_HEADER: &str =
    "model,accuracy,f1,relevance_accuracy,relevance_f1,avg_r2,rep2label_accuracy,rep2label_p,seed,config_hash";

/// One row per model.
pub fn report_csv(runs: &[RunMetrics]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = format!("{REPORT_CSV_HEADER}\n");
    for r in runs {
        let rel = r.report.relevance.as_ref();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.model,
            r.report.main.accuracy,
            opt(r.report.main.f1_positive),
            opt(rel.map(|x| x.accuracy)),
            opt(rel.and_then(|x| x.f1)),
            opt(r.report.independence.as_ref().map(|x| x.avg_r2)),
            r.report.rep2label.accuracy,
            r.report.rep2label.p_chance,
            r.seed,
            r.config_hash
        ));
    }
    s
}

/// Latent representation of every record under a frozen checkpoint.
pub fn latent_matrix(prepared: &Prepared, ck: &Checkpoint) -> Result<(Matrix, Vec<usize>)> {
    let inputs = model_inputs(prepared, &ck.standardizer)?;
    let all: Vec<usize> = (0..inputs.len()).collect();
    let pred = ck.network.predict(&inputs, &all, false)?;
    let labels = pred.predicted_labels();
    Ok((pred.g, labels))
}

/// Test accuracy of the model plus the three probe tasks.
pub fn evaluate_checkpoint(cfg: &ExperimentConfig, prepared: &Prepared, ck: &Checkpoint) -> Result<EvalReport> {
    let ds = &prepared.dataset;
    let (g, predicted) = latent_matrix(prepared, ck)?;
    let test = ds.indices(Split::Test);
    let truth = ds.labels(&test);
    let main = classification_metrics(
        &truth,
        &test.iter().map(|&i| predicted[i]).collect::<Vec<_>>(),
        ck.network.config.classes,
        None,
    )?;
    let probe_sets = cfg.probe_feature_sets();
    let (relevance, independence) = if probe_sets.is_empty() {
        (None, None)
    } else {
        let f = feature_matrix(&extract_features(&probe_sets, &ds.records)?)?;
        let labels: Vec<usize> = ds.records.iter().map(|r| r.label).collect();
        (
            Some(relevance_task(&f, &labels, &ds.splits, ds.k, cfg.dataset.upsample_ratio, &cfg.eval.probe)?),
            Some(independence_task(&g, &f, &ds.splits, &cfg.eval.probe)?),
        )
    };
    let rep2label = rep2label_task(&g.select_rows(&test), &truth, ds.k, cfg.eval.folds, &cfg.eval.probe)?;
    Ok(EvalReport {
        main,
        relevance,
        independence,
        rep2label,
    })
}

/// Landmarks of one record on its input timeline.
pub fn landmarks(cfg: &ExperimentConfig, prepared: &Prepared, record: &SignalRecord) -> Result<EventList> {
    match cfg.cam.landmark_source {
        LandmarkSource::GroundTruth => {
            let truth = prepared
                .truth
                .as_ref()
                .ok_or_else(|| Error::Data("ground-truth landmarks requested but none are available".into()))?;
            truth
                .get(&record.id)
                .and_then(|g| g.of_kind(cfg.cam.landmark))
                .cloned()
                .ok_or_else(|| Error::Data(format!("record {}: no {} landmarks", record.id, cfg.cam.landmark.as_str())))
        }
        LandmarkSource::Detected => match cfg.cam.landmark {
            EventKind::RPeak => Ok(EventList {
                kind: EventKind::RPeak,
                indices: detect_r_peaks(&record.samples[..record.original_len()], record.fs)?,
            }),
            EventKind::SlowWave => detect_slow_waves(record),
            EventKind::Rem => detect_rapid_eye_movements(record, &cfg.cam.eog_channel),
            other => Err(Error::Config(format!(
                "{} landmarks cannot be detected; use ground_truth",
                other.as_str()
            ))),
        },
    }
}

/// Class activation maps of `cfg.cam.class` on the records of that class
/// in `cfg.cam.split`, plus their landmarks.
pub fn class_maps(cfg: &ExperimentConfig, prepared: &Prepared, ck: &Checkpoint) -> Result<(Vec<ActivationMap>, Vec<EventList>)> {
    let ds = &prepared.dataset;
    let idx: Vec<usize> = ds
        .indices(cfg.cam.split)
        .into_iter()
        .filter(|&i| ds.records[i].label == cfg.cam.class)
        .collect();
    if idx.is_empty() {
        return Err(Error::Data(format!(
            "no records of class {} in the {} split",
            cfg.cam.class,
            cfg.cam.split.as_str()
        )));
    }
    let inputs = model_inputs(prepared, &ck.standardizer)?;
    let pred = ck.network.predict(&inputs, &idx, true)?;
    let w = ck.network.fc_weights()?;
    let maps = pred.feature_maps.expect("maps were requested");
    let mut cams = Vec::with_capacity(idx.len());
    let mut events = Vec::with_capacity(idx.len());
    for (m, &i) in maps.iter().zip(&idx) {
        let r = &ds.records[i];
        cams.push(compute_cam(&r.id, m, &w, cfg.cam.class, ck.network.config.feature_dim, r.original_len())?);
        events.push(landmarks(cfg, prepared, r)?);
    }
    Ok((cams, events))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowComparison {
    pub window: String,
    pub a: String,
    pub b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub two_sided: TTest,
    /// Alternative: `a` exceeds `b`.
    pub one_sided: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamReport {
    pub templates: Vec<(String, Template)>,
    pub comparisons: Vec<WindowComparison>,
}

impl CamReport {
    /// Event bookkeeping per model.
    pub fn event_counts(&self) -> BTreeMap<String, (usize, usize)> {
        self.templates.iter().map(|(n, t)| (n.clone(), (t.n_events, t.skipped))).collect()
    }
}

/// Templates of every named model and paired window comparisons of each
/// later model against the first.
pub fn cam_report(cfg: &ExperimentConfig, prepared: &Prepared, models: &[(String, &Checkpoint)]) -> Result<CamReport> {
    let fs = prepared
        .dataset
        .records
        .first()
        .map(|r| r.fs)
        .ok_or_else(|| Error::Data("empty dataset".into()))?;
    let mut templates = Vec::new();
    for (name, ck) in models {
        let (maps, events) = class_maps(cfg, prepared, ck)?;
        templates.push((name.clone(), aligned_templates(&maps, &events, cfg.cam.window, fs)?));
    }
    let mut comparisons = Vec::new();
    if let Some(((base_name, base), rest)) = templates.split_first() {
        for (name, t) in rest {
            if t.n_events != base.n_events {
                return Err(Error::Data(format!(
                    "templates of {base_name} and {name} hold different events"
                )));
            }
            for (wname, w) in &cfg.cam.sub_windows {
                let a = window_mean_stats(t, *w)?;
                let b = window_mean_stats(base, *w)?;
                comparisons.push(WindowComparison {
                    window: wname.clone(),
                    a: name.clone(),
                    b: base_name.clone(),
                    mean_a: a.iter().sum::<f64>() / a.len() as f64,
                    mean_b: b.iter().sum::<f64>() / b.len() as f64,
                    two_sided: paired_ttest(&a, &b, false)?,
                    one_sided: paired_ttest(&a, &b, true)?,
                });
            }
        }
    }
    Ok(CamReport { templates, comparisons })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub intensities_ms: Vec<f64>,
    pub prominence: Vec<f64>,
    pub spearman: f64,
    pub non_increasing: bool,
    pub templates: Vec<Template>,
}

/// Template prominence under increasingly jittered landmarks.
pub fn noise_report(cfg: &ExperimentConfig, prepared: &Prepared, ck: &Checkpoint) -> Result<NoiseReport> {
    let (maps, events) = class_maps(cfg, prepared, ck)?;
    let fs = prepared.dataset.records[0].fs;
    let templates = noise_analysis(&maps, &events, cfg.cam.window, fs, &cfg.cam.intensities_ms, cfg.seed)?;
    let prom: Vec<f64> = templates.iter().map(|t| prominence(&t.mean_profile)).collect();
    let rho = if prom.len() >= 2 {
        spearman(&cfg.cam.intensities_ms, &prom)?
    } else {
        0.0
    };
    Ok(NoiseReport {
        intensities_ms: cfg.cam.intensities_ms.clone(),
        non_increasing: prom.windows(2).all(|w| w[1] <= w[0]),
        prominence: prom,
        spearman: rho,
        templates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub accuracy: f64,
    pub f1: Option<f64>,
    pub avg_r2: Option<f64>,
}

pub const SWEEP_CSV_HEADER: &str = "lambda,accuracy,f1,avg_r2";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", r.lambda, r.accuracy, opt(r.f1), opt(r.avg_r2)));
    }
    s
}

/// Trains and evaluates one fixed-λ model per entry.
pub fn lambda_sweep(cfg: &ExperimentConfig, prepared: &Prepared, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    if lambdas.len() < 2 {
        return Err(Error::Config("a lambda sweep needs at least two values".into()));
    }
    if cfg.model.feature_dim == 0 {
        return Err(Error::Config("a lambda sweep needs at least one feature set".into()));
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let mut c = cfg.clone();
            c.model.lambda = LambdaStrategy::Fixed { lambda };
            c.lambda = None;
            c.validate()?;
            let out = train_model(&c, prepared)?;
            if let Some(msg) = &out.aborted {
                return Err(Error::Numerical(format!("lambda {lambda}: {msg}")));
            }
            let report = evaluate_checkpoint(&c, prepared, &out.best)?;
            Ok(SweepRow {
                lambda,
                accuracy: report.main.accuracy,
                f1: report.main.f1_positive,
                avg_r2: report.independence.map(|i| i.avg_r2),
            })
        })
        .collect()
}
