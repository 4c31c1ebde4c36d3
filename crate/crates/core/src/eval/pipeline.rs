use alloc::vec::Vec;

use super::log::PredictionRecord;
use crate::datagen::{FraudType, TransactionRecord};
use crate::error::{Error, Result};
use crate::experts::{
    calibrate_anomaly_threshold, ExpertKind, train_params, AutoencoderConfig, AutoencoderExpert, LstmConfig, LstmExpert,
    RowBatch, SequenceBatch, SequenceExpert, ThresholdCalibration, TrainConfig, TrainReport, TransformerConfig,
    TransformerExpert, PREDICT_CHUNK,
};
use crate::moe::{
    combine, gate_forward, train_gate, ExpertSet, GateData, GateInput, GateParams, DEFAULT_ENTROPY_LAMBDA,
    EXPERT_COUNT,
};
use crate::numerics::Graph;
use crate::preprocess::{
    build_sequences, class_weights, derive_table, encode_categorical, fit_categorical, fold_split, minmax_apply,
    minmax_fit, smote_deficit, smote_oversample, stratified_group_kfold, stratified_kfold, CategoricalEncoding,
    FeatureFrame, RawTable, ScalerStats, SequenceWindow, DEFAULT_CARDINALITY_THRESHOLD, DEFAULT_SMOTE_K, NUMERIC_COLUMNS,
};
use crate::rng::{derive_seed, rng, shuffle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ExpertSizes {
    pub lstm_hidden: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn: usize,
    pub ae_hidden: usize,
    pub ae_bottleneck: usize,
}

impl Default for ExpertSizes {
    fn default() -> Self {
        ExpertSizes { lstm_hidden: 32, d_model: 32, heads: 4, ffn: 64, ae_hidden: 16, ae_bottleneck: 8 }
    }
}

/// Everything that shapes one cross-validation run apart from the data.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineSettings {
    /// Steps per sequence window.
    pub window: usize,
    /// Oldest same-card history a window may include.
    pub lookback_days: f64,
    pub entropy_window: usize,
    pub k_folds: usize,
    pub normalize: bool,
    pub smote: bool,
    /// Minority size after SMOTE as a fraction of the majority size.
    pub smote_ratio: f64,
    pub smote_k: usize,
    pub cardinality_threshold: usize,
    /// One in this many training cards is held out for early stopping,
    /// threshold calibration and gate training.
    pub holdout_folds: usize,
    /// Maximum windows scored per validation pass.
    pub validation_cap: usize,
    pub experts: ExpertSizes,
    pub expert_training: TrainConfig,
    pub autoencoder_training: TrainConfig,
    pub gate_training: TrainConfig,
    pub lambda: f64,
    pub gate_input: GateInput,
    pub decision_threshold: f64,
    pub seed: u64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            window: 10,
            lookback_days: 30.0,
            entropy_window: 20,
            k_folds: 5,
            normalize: true,
            smote: true,
            smote_ratio: 0.1,
            smote_k: DEFAULT_SMOTE_K,
            cardinality_threshold: DEFAULT_CARDINALITY_THRESHOLD,
            holdout_folds: 5,
            validation_cap: 1024,
            experts: ExpertSizes::default(),
            expert_training: TrainConfig {
                learning_rate: 3e-3,
                batches_per_epoch: Some(16),
                max_epochs: 30,
                patience: 4,
                ..TrainConfig::default()
            },
            autoencoder_training: TrainConfig {
                learning_rate: 3e-3,
                batches_per_epoch: Some(32),
                ..TrainConfig::default()
            },
            gate_training: TrainConfig { learning_rate: 1e-2, batches_per_epoch: Some(16), ..TrainConfig::default() },
            lambda: DEFAULT_ENTROPY_LAMBDA,
            gate_input: GateInput::Features,
            decision_threshold: 0.5,
            seed: 42,
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(alloc::string::String::from(m)));
        if self.window == 0 {
            return bad("window must be positive");
        }
        if !(self.lookback_days > 0.0 && self.lookback_days.is_finite()) {
            return bad("lookback_days must be positive");
        }
        if self.entropy_window == 0 {
            return bad("entropy_window must be positive");
        }
        if self.k_folds < 2 || self.holdout_folds < 2 {
            return bad("fold counts must be at least 2");
        }
        if !(self.smote_ratio > 0.0 && self.smote_ratio <= 1.0) {
            return bad("smote_ratio must lie in (0, 1]");
        }
        if self.smote_k == 0 {
            return bad("smote_k must be positive");
        }
        if self.validation_cap == 0 {
            return bad("validation_cap must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return bad("decision_threshold must lie in [0, 1]");
        }
        let e = &self.experts;
        if e.lstm_hidden == 0 || e.d_model == 0 || e.heads == 0 || e.ffn == 0 || e.ae_hidden == 0 || e.ae_bottleneck == 0 {
            return bad("expert sizes must be positive");
        }
        if e.d_model % e.heads != 0 {
            return bad("heads must divide d_model");
        }
        self.expert_training.validate()?;
        self.autoencoder_training.validate()?;
        self.gate_training.validate()
    }

    pub fn lookback_hours(&self) -> f64 {
        self.lookback_days * 24.0
    }
}

/// Derived table and fold assignment shared by every fold.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub table: RawTable,
    pub folds: Vec<usize>,
}

pub fn prepare(records: &[TransactionRecord], settings: &PipelineSettings) -> Result<PreparedData> {
    settings.validate()?;
    let table = derive_table(records, settings.lookback_hours(), settings.entropy_window)?;
    let folds = stratified_group_kfold(
        &table.meta.labels,
        &table.meta.cardholder_ids,
        settings.k_folds,
        derive_seed(settings.seed, STREAM_FOLDS),
    )?;
    Ok(PreparedData { table, folds })
}

const STREAM_FOLDS: u64 = 1;
const STREAM_FIT: u64 = 100;

/// Row indices handed to each fitting step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitAudit {
    pub encoding_rows: Vec<usize>,
    pub scaler_rows: Vec<usize>,
    pub smote_rows: Vec<usize>,
    pub class_weight_rows: Vec<usize>,
    pub expert_rows: Vec<usize>,
    pub autoencoder_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub calibration_rows: Vec<usize>,
    pub gate_rows: Vec<usize>,
}

impl FitAudit {
    /// Every row index any fitting step saw.
    pub fn all_rows(&self) -> impl Iterator<Item = usize> + '_ {
        [
            &self.encoding_rows,
            &self.scaler_rows,
            &self.smote_rows,
            &self.class_weight_rows,
            &self.expert_rows,
            &self.autoencoder_rows,
            &self.validation_rows,
            &self.calibration_rows,
            &self.gate_rows,
        ]
        .into_iter()
        .flatten()
        .copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingReports {
    pub lstm: TrainReport,
    pub transformer: TrainReport,
    pub autoencoder: TrainReport,
    pub gate: TrainReport,
}

/// Preprocessing state, experts and gate fitted on one training split.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub encoding: CategoricalEncoding,
    pub scaler: Option<ScalerStats>,
    pub experts: ExpertSet,
    pub gate: GateParams,
    pub calibration: ThresholdCalibration,
    pub class_weights: (f64, f64),
    pub synthetic_rows: usize,
    pub reports: TrainingReports,
}

impl FittedModel {
    /// Encode and scale a raw table with the fitted state.
    pub fn transform(&self, table: &RawTable) -> Result<FeatureFrame> {
        let frame = encode_categorical(table, &self.encoding)?;
        match &self.scaler {
            Some(s) => minmax_apply(s, &frame),
            None => Ok(frame),
        }
    }

    pub fn autoencoder(&self) -> Result<&AutoencoderExpert> {
        self.experts.autoencoder.as_ref().ok_or(Error::UntrainedExpert("autoencoder"))
    }
}

/// A fitted model plus the gates used for the ablation and entropy studies.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: FittedModel,
    /// Gate retrained without expert `i`, in expert order.
    pub ablation_gates: Vec<GateParams>,
    /// Gate retrained with no entropy term.
    pub unregularized_gate: GateParams,
    pub frame: FeatureFrame,
    pub windows: Vec<SequenceWindow>,
    pub audit: FitAudit,
    /// The experts as they stood before any gate was trained.
    pub frozen_experts: ExpertSet,
}

/// Expert-level scores for a set of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RowScores {
    pub rows: Vec<usize>,
    pub outputs: Vec<[f64; EXPERT_COUNT]>,
    pub ae_errors: Vec<f64>,
    pub gate_inputs: Vec<f64>,
    pub gate_width: usize,
}

impl RowScores {
    pub fn gate_input(&self, i: usize) -> &[f64] {
        &self.gate_inputs[i * self.gate_width..(i + 1) * self.gate_width]
    }

    pub fn gate_data(&self, labels: &[bool]) -> Result<GateData> {
        let targets = self.rows.iter().map(|&r| if labels[r] { 1.0 } else { 0.0 }).collect();
        GateData::new(self.gate_width, self.gate_inputs.clone(), self.outputs.clone(), targets)
    }
}

fn batch_of(frame: &FeatureFrame, windows: &[SequenceWindow], idx: impl IntoIterator<Item = usize>) -> Result<SequenceBatch> {
    let picked: Vec<&SequenceWindow> = idx.into_iter().map(|i| &windows[i]).collect();
    SequenceBatch::from_windows(frame, picked)
}

/// Run the experts over `rows` (window indices) in chunks.
pub fn score_rows(
    experts: &ExpertSet,
    gate_input: GateInput,
    frame: &FeatureFrame,
    windows: &[SequenceWindow],
    rows: &[usize],
) -> Result<RowScores> {
    let ae = experts.autoencoder.as_ref().ok_or(Error::UntrainedExpert("autoencoder"))?;
    let mut out = RowScores {
        rows: rows.to_vec(),
        outputs: Vec::with_capacity(rows.len()),
        ae_errors: Vec::with_capacity(rows.len()),
        gate_inputs: Vec::new(),
        gate_width: match gate_input {
            GateInput::Features => frame.width(),
            GateInput::ExpertOutputs => EXPERT_COUNT,
        },
    };
    for chunk in rows.chunks(PREDICT_CHUNK) {
        let batch = batch_of(frame, windows, chunk.iter().copied())?;
        let outputs = experts.outputs(&batch)?;
        let finals = RowBatch::new(batch.width, batch.final_rows(), batch.targets.clone())?;
        out.ae_errors.extend(ae.reconstruction_errors(&ae.view_rows(&finals)?)?);
        match gate_input {
            GateInput::Features => out.gate_inputs.extend(finals.data),
            GateInput::ExpertOutputs => out.gate_inputs.extend(outputs.iter().flatten()),
        }
        out.outputs.extend(outputs);
    }
    Ok(out)
}

/// Stratified subset of at most `cap` rows keeping every positive that fits.
fn capped(rows: &[usize], labels: &[bool], cap: usize, seed: u64) -> Vec<usize> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut r = rng(seed);
    let mut pos: Vec<usize> = rows.iter().copied().filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = rows.iter().copied().filter(|&i| !labels[i]).collect();
    shuffle(&mut pos, &mut r);
    shuffle(&mut neg, &mut r);
    pos.truncate(cap / 2);
    neg.truncate(cap - pos.len());
    let mut out: Vec<usize> = pos.into_iter().chain(neg).collect();
    out.sort_unstable();
    out
}

fn weights_for(targets: &[f64], cw: (f64, f64)) -> Vec<f64> {
    targets.iter().map(|&t| if t > 0.5 { cw.0 } else { cw.1 }).collect()
}

fn train_sequence_expert<E: SequenceExpert>(
    expert: &mut E,
    frame: &FeatureFrame,
    windows: &[SequenceWindow],
    train: &[usize],
    validation: &SequenceBatch,
    cw: (f64, f64),
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let val_weights = class_weights(&validation.targets.iter().map(|&t| t > 0.5).collect::<Vec<_>>())?;
    let val_w = weights_for(&validation.targets, val_weights);
    let probe_params = expert.params().to_vec();
    let mut params = probe_params;
    let this: &E = expert;
    let report = train_params(
        &mut params,
        train.len(),
        cfg,
        |g, p, idx| {
            let batch = batch_of(frame, windows, idx.iter().map(|&i| train[i]))?;
            let out = this.forward_graph(g, p, &batch)?;
            let w = weights_for(&batch.targets, cw);
            Ok(g.weighted_bce(out, batch.targets, w))
        },
        |p| {
            let mut total = 0.0;
            let mut start = 0;
            while start < validation.batch {
                let len = PREDICT_CHUNK.min(validation.batch - start);
                let chunk = validation.slice(start, len);
                let mut g = Graph::new();
                let vars: Vec<_> = p.iter().map(|t| g.constant(t.clone())).collect();
                let out = this.forward_graph(&mut g, &vars, &chunk)?;
                let loss = g.weighted_bce(out, chunk.targets.clone(), val_w[start..start + len].to_vec());
                total += g.value(loss).item() * len as f64;
                start += len;
            }
            Ok(total / validation.batch as f64)
        },
    )?;
    *expert.params_mut() = params;
    Ok(report)
}

fn train_autoencoder(
    ae: &mut AutoencoderExpert,
    train: &RowBatch,
    validation: &RowBatch,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let mut params = ae.params().to_vec();
    let probe = ae.clone();
    let report = train_params(
        &mut params,
        train.batch,
        cfg,
        |g, p, idx| probe.loss_graph(g, p, &train.select(idx)),
        |p| {
            let mut g = Graph::new();
            let vars: Vec<_> = p.iter().map(|t| g.constant(t.clone())).collect();
            let loss = probe.loss_graph(&mut g, &vars, validation)?;
            Ok(g.value(loss).item())
        },
    )?;
    *ae.params_mut() = params;
    Ok(report)
}

/// Frame columns the autoencoder reconstructs: the numeric behavioural
/// features, without one-hot indicators.
pub fn autoencoder_view(frame: &FeatureFrame) -> Vec<usize> {
    frame.columns.iter().enumerate().filter(|(_, c)| NUMERIC_COLUMNS.contains(&c.as_str())).map(|(i, _)| i).collect()
}

/// Split `rows` by card into (fit, holdout), stratified on the label.
fn inner_split(table: &RawTable, rows: &[usize], folds: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels: Vec<bool> = rows.iter().map(|&r| table.meta.labels[r]).collect();
    let groups: Vec<u64> = rows.iter().map(|&r| table.meta.cardholder_ids[r]).collect();
    let assign = stratified_group_kfold(&labels, &groups, folds, seed)?;
    let (fit, hold) = fold_split(&assign, 0);
    Ok((fit.into_iter().map(|i| rows[i]).collect(), hold.into_iter().map(|i| rows[i]).collect()))
}

/// Fit preprocessing, the three experts and the gate on `train_rows`.
pub fn fit_model(table: &RawTable, train_rows: &[usize], settings: &PipelineSettings, seed: u64) -> Result<FitOutcome> {
    settings.validate()?;
    if train_rows.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    let s = |stream| derive_seed(seed, stream);
    let labels = &table.meta.labels;
    let mut audit = FitAudit::default();

    let (fit_rows, holdout) = inner_split(table, train_rows, settings.holdout_folds, s(1))?;

    let encoding = fit_categorical(table, train_rows, settings.cardinality_threshold)?;
    audit.encoding_rows = train_rows.to_vec();
    let mut frame = encode_categorical(table, &encoding)?;
    let scaler = if settings.normalize {
        let stats = minmax_fit(&frame, train_rows)?;
        audit.scaler_rows = train_rows.to_vec();
        frame = minmax_apply(&stats, &frame)?;
        Some(stats)
    } else {
        None
    };
    let mut windows = build_sequences(&frame, settings.window, Some(settings.lookback_hours()));

    // SMOTE on the final-row features of the fitting split's positives
    let mut expert_rows = fit_rows.clone();
    let mut synthetic_rows = 0;
    if settings.smote {
        let minority: Vec<usize> = fit_rows.iter().copied().filter(|&r| labels[r]).collect();
        let majority = fit_rows.len() - minority.len();
        let deficit = smote_deficit(minority.len(), majority, settings.smote_ratio);
        if deficit > 0 {
            let samples = smote_oversample(&frame.gather(&minority), frame.width(), settings.smote_k, deficit, s(2))?;
            let types: Vec<FraudType> = samples.origins.iter().map(|o| table.meta.fraud_types[minority[o.base]]).collect();
            let start = frame.append_synthetic(&samples.data, true, &types)?;
            for i in 0..samples.len() {
                windows.push(SequenceWindow::single(&frame, start + i, settings.window));
                expert_rows.push(start + i);
            }
            synthetic_rows = samples.len();
        }
        audit.smote_rows = minority;
    }
    let expert_labels: Vec<bool> = expert_rows.iter().map(|&r| frame.meta.labels[r]).collect();
    let cw = class_weights(&expert_labels)?;
    audit.class_weight_rows = expert_rows.iter().copied().filter(|&r| r < table.rows()).collect();
    audit.expert_rows = audit.class_weight_rows.clone();

    let val_rows = capped(&holdout, labels, settings.validation_cap, s(3));
    audit.validation_rows = val_rows.clone();
    let validation = batch_of(&frame, &windows, val_rows.iter().copied())?;
    let d = frame.width();
    let sizes = settings.experts;

    let mut lstm = LstmExpert::new(LstmConfig { input_width: d, hidden: sizes.lstm_hidden }, s(10))?;
    let lstm_report = train_sequence_expert(
        &mut lstm,
        &frame,
        &windows,
        &expert_rows,
        &validation,
        cw,
        &TrainConfig { seed: s(11), ..settings.expert_training.clone() },
    )?;

    let mut transformer = TransformerExpert::new(
        TransformerConfig {
            input_width: d,
            window: settings.window,
            d_model: sizes.d_model,
            heads: sizes.heads,
            ffn: sizes.ffn,
        },
        s(20),
    )?;
    let transformer_report = train_sequence_expert(
        &mut transformer,
        &frame,
        &windows,
        &expert_rows,
        &validation,
        cw,
        &TrainConfig { seed: s(21), ..settings.expert_training.clone() },
    )?;

    let legit_fit: Vec<usize> = fit_rows.iter().copied().filter(|&r| !labels[r]).collect();
    let legit_hold: Vec<usize> = holdout.iter().copied().filter(|&r| !labels[r]).collect();
    let legit_hold = capped(&legit_hold, labels, settings.validation_cap, s(4));
    audit.autoencoder_rows = legit_fit.clone();
    let view = autoencoder_view(&frame);
    let ae_train = RowBatch::from_rows(&frame, &legit_fit)?.columns(&view)?;
    let ae_val = RowBatch::from_rows(&frame, &legit_hold)?.columns(&view)?;
    let ae_cfg =
        AutoencoderConfig { input_width: view.len(), hidden: sizes.ae_hidden, bottleneck: sizes.ae_bottleneck };
    let mut ae = AutoencoderExpert::new(ae_cfg, s(30))?.with_view(view)?;
    let ae_report =
        train_autoencoder(&mut ae, &ae_train, &ae_val, &TrainConfig { seed: s(31), ..settings.autoencoder_training.clone() })?;
    let hold_batch = RowBatch::from_rows(&frame, &holdout)?;
    let hold_errors = ae.reconstruction_errors(&ae.view_rows(&hold_batch)?)?;
    let hold_labels: Vec<bool> = holdout.iter().map(|&r| labels[r]).collect();
    let calibration = calibrate_anomaly_threshold(&hold_errors, &hold_labels)?;
    ae.set_threshold(calibration.tau)?;
    audit.calibration_rows = holdout.clone();

    let experts = ExpertSet { lstm: Some(lstm), transformer: Some(transformer), autoencoder: Some(ae) };
    let frozen_experts = experts.clone();

    // gate: trained on half of the holdout, early-stopped on the other half
    let gate_scores = score_rows(&experts, settings.gate_input, &frame, &windows, &holdout)?;
    let halves = stratified_kfold(&hold_labels, 2, s(5))?;
    let (a, b) = fold_split(&halves, 0);
    let gate_all = gate_scores.gate_data(labels)?;
    let (gate_train, gate_val) = (gate_all.select(&a), gate_all.select(&b));
    let gate_cw = class_weights(&a.iter().map(|&i| hold_labels[i]).collect::<Vec<_>>())?;
    audit.gate_rows = holdout.clone();
    let gate_cfg = TrainConfig { seed: s(40), ..settings.gate_training.clone() };
    let init = GateParams::zeros(gate_scores.gate_width, settings.gate_input, settings.lambda)?;
    let (gate, gate_report) = train_gate(init.clone(), &gate_train, &gate_val, &gate_cfg, gate_cw)?;
    let mut ablation_gates = Vec::with_capacity(EXPERT_COUNT);
    for kind in ExpertKind::ALL {
        ablation_gates.push(train_gate(init.clone().without(kind), &gate_train, &gate_val, &gate_cfg, gate_cw)?.0);
    }
    let unregularized_gate = train_gate(GateParams { lambda: 0.0, ..init }, &gate_train, &gate_val, &gate_cfg, gate_cw)?.0;

    let model = FittedModel {
        encoding,
        scaler,
        experts,
        gate,
        calibration,
        class_weights: cw,
        synthetic_rows,
        reports: TrainingReports {
            lstm: lstm_report,
            transformer: transformer_report,
            autoencoder: ae_report,
            gate: gate_report,
        },
    };
    Ok(FitOutcome { model, ablation_gates, unregularized_gate, frame, windows, audit, frozen_experts })
}

/// Prediction records for `rows` of a transformed frame.
pub fn predict_records(
    model: &FittedModel,
    extra_gates: Option<(&[GateParams], &GateParams)>,
    frame: &FeatureFrame,
    windows: &[SequenceWindow],
    rows: &[usize],
    fold: usize,
) -> Result<Vec<PredictionRecord>> {
    let scores = score_rows(&model.experts, model.gate.input, frame, windows, rows)?;
    let tau = model.calibration.tau;
    let meta = &frame.meta;
    let mut out = Vec::with_capacity(rows.len());
    for (i, &row) in rows.iter().enumerate() {
        let x = scores.gate_input(i);
        let e = scores.outputs[i];
        let g = gate_forward(x, &model.gate)?;
        let (ablation_y, g_unregularized) = match extra_gates {
            Some((ablation, unreg)) => {
                let mut ys = [0.0; EXPERT_COUNT];
                for (j, gate) in ablation.iter().enumerate() {
                    ys[j] = combine(&gate_forward(x, gate)?, &e);
                }
                (Some(ys), Some(gate_forward(x, unreg)?))
            }
            None => (None, None),
        };
        out.push(PredictionRecord {
            row,
            fold,
            label: meta.labels[row],
            fraud_type: meta.fraud_types[row],
            transaction_type: meta.transaction_types[row],
            y: combine(&g, &e),
            g,
            expert_outputs: e,
            ae_error: scores.ae_errors[i],
            ae_tau: tau,
            ablation_y,
            g_unregularized,
        });
    }
    Ok(out)
}

/// Outcome of one cross-validation fold.
#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: Vec<usize>,
    pub predictions: Vec<PredictionRecord>,
    pub model: FittedModel,
    pub audit: FitAudit,
    pub frozen_experts: ExpertSet,
}

pub fn run_fold(data: &PreparedData, fold: usize, settings: &PipelineSettings) -> Result<FoldResult> {
    if fold >= settings.k_folds {
        return Err(Error::invalid(alloc::format!("fold {fold} out of range")));
    }
    let (train, test) = fold_split(&data.folds, fold);
    let outcome = fit_model(&data.table, &train, settings, derive_seed(settings.seed, STREAM_FIT + fold as u64))?;
    let predictions = predict_records(
        &outcome.model,
        Some((&outcome.ablation_gates, &outcome.unregularized_gate)),
        &outcome.frame,
        &outcome.windows,
        &test,
        fold,
    )?;
    Ok(FoldResult {
        fold,
        train_rows: train.len(),
        test_rows: test,
        predictions,
        model: outcome.model,
        audit: outcome.audit,
        frozen_experts: outcome.frozen_experts,
    })
}

/// Fit on every row, then score the same rows with the fitted model.
pub fn fit_full(data: &PreparedData, settings: &PipelineSettings) -> Result<(FittedModel, Vec<PredictionRecord>)> {
    let rows: Vec<usize> = (0..data.table.rows()).collect();
    let outcome = fit_model(&data.table, &rows, settings, derive_seed(settings.seed, STREAM_FIT + 1000))?;
    let preds = score_table(&outcome.model, &data.table, settings)?;
    Ok((outcome.model, preds))
}

/// Score every row of a raw table with a fitted model.
pub fn score_table(model: &FittedModel, table: &RawTable, settings: &PipelineSettings) -> Result<Vec<PredictionRecord>> {
    let frame = model.transform(table)?;
    let windows = build_sequences(&frame, settings.window, Some(settings.lookback_hours()));
    let rows: Vec<usize> = (0..frame.rows()).collect();
    predict_records(model, None, &frame, &windows, &rows, 0)
}

