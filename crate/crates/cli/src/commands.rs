//! The five pipeline stages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use dqgp::classifier::{classify_stream, write_traces_csv, ClassificationReport, ConditionModel};
use dqgp::data::{
    self, load_trajectory, save_trajectory, DatasetManifest, ManifestEntry, Trajectory,
};
use dqgp::geometry::{d_mag, DualQuaternionPose, TangentVelocity};
use dqgp::gp::{self, GpError, GpModel, OUTPUT_DIMS};
use dqgp::kernels::JitterPolicy;
use nalgebra::DMatrix;

use crate::config::RunConfig;
use crate::{read_report, write_json, CliError, Workspace};

/// Which manifest entries went to training and which are held out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub train_k: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimSummary {
    pub sigma_f: f64,
    pub length_scale: f64,
    pub sigma_n: f64,
    pub lml: Option<f64>,
    /// Log marginal likelihood each optimizer start converged to.
    pub start_lml: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionTraining {
    pub label: String,
    pub n_train_trajectories: usize,
    pub n_training_pairs: usize,
    pub dims: Vec<DimSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: RunConfig,
    pub conditions: Vec<ConditionTraining>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryClassification {
    pub id: String,
    pub label: String,
    pub correct: bool,
    pub report: ClassificationReport,
}

/// Per-condition nomination statistics (sample standard deviations).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionNomination {
    pub label: String,
    pub n: usize,
    pub n_correct: usize,
    pub mean_step: f64,
    pub std_step: f64,
    pub mean_fraction: f64,
    pub std_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub config: RunConfig,
    pub n_total: usize,
    pub n_correct: usize,
    pub n_exhausted: usize,
    pub accuracy: f64,
    /// Mean over all test trajectories; an exhausted stream counts as 1.0.
    pub mean_nomination_fraction: f64,
    pub per_condition: Vec<ConditionNomination>,
    pub trajectories: Vec<TrajectoryClassification>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPrediction {
    pub id: String,
    pub label: String,
    /// Condition model used for prediction (nominated, or true label under
    /// oracle labels).
    pub used_label: String,
    pub start_step: usize,
    pub n_steps: usize,
    /// One-step velocity RMSE under the transformation magnitude.
    pub rmse: Option<f64>,
    /// Pose error of the rollout endpoint against the true final pose.
    pub final_error: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionRmse {
    pub label: String,
    pub n_trajectories: usize,
    pub n_steps: usize,
    /// Pooled over all post-nomination steps of the condition.
    pub rmse: f64,
    pub mean_trajectory_rmse: f64,
    pub std_trajectory_rmse: f64,
    pub mean_final_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictSummary {
    pub config: RunConfig,
    pub overall_rmse: f64,
    pub n_steps_total: usize,
    pub per_condition: Vec<ConditionRmse>,
    pub trajectories: Vec<TrajectoryPrediction>,
    /// Trajectories without a nomination (only possible without oracle labels).
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationAggregate {
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    pub n_exhausted: usize,
    pub mean_nomination_fraction: f64,
    pub per_condition: Vec<ConditionNomination>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionAggregate {
    pub overall_rmse: f64,
    pub n_steps_total: usize,
    pub per_condition: Vec<ConditionRmse>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub classification: ClassificationAggregate,
    pub prediction: PredictionAggregate,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn finite(value: f64) -> Option<f64> {
    value.is_finite().then_some(value)
}

/// Generates the synthetic dataset into `out/data` plus `out/manifest.json`.
pub fn cmd_synth(config: &RunConfig, out: &Path) -> Result<DatasetManifest, CliError> {
    let workspace = Workspace::new(out);
    let spec = config.synth_spec()?;
    let trajectories = data::synth::generate_synthetic(&spec)?;
    std::fs::create_dir_all(workspace.data_dir())?;

    let mut files = Vec::with_capacity(trajectories.len());
    for (index, trajectory) in trajectories.iter().enumerate() {
        let label = trajectory.label().expect("generator labels trajectories");
        let repetition = index % spec.repetitions;
        let relative = format!("data/{label}_{repetition:03}.csv");
        save_trajectory(trajectory, &workspace.root().join(&relative))?;
        files.push(ManifestEntry { path: relative, label: label.to_string(), steps: trajectory.len() });
    }
    let manifest = DatasetManifest { seed: Some(spec.seed), files };
    manifest.save_to(&workspace.manifest())?;
    println!(
        "synth: wrote {} trajectories over {} conditions to {}",
        manifest.files.len(),
        spec.conditions.len(),
        workspace.data_dir().display()
    );
    Ok(manifest)
}

/// Per-condition pose/velocity pairs for regression, stride-subsampled to
/// the configured budget.
fn training_pairs(
    trajectories: &[&Trajectory],
    config: &RunConfig,
) -> Result<(Vec<DualQuaternionPose>, DMatrix<f64>), CliError> {
    let mut pairs: Vec<(DualQuaternionPose, TangentVelocity)> = Vec::new();
    for trajectory in trajectories {
        pairs.extend(data::derive_velocities(trajectory, config.velocity_limit)?);
    }
    let selected = stride_subsample(&pairs, config.max_train_points);
    let inputs: Vec<DualQuaternionPose> = selected.iter().map(|(p, _)| *p).collect();
    let targets = DMatrix::from_fn(selected.len(), OUTPUT_DIMS, |i, j| selected[i].1.to_array()[j]);
    Ok((inputs, targets))
}

fn stride_subsample<T: Copy>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max || max == 0 {
        items.to_vec()
    } else {
        (0..max).map(|i| items[i * items.len() / max]).collect()
    }
}

/// Splits the dataset, fits one model per condition, and writes the models,
/// the split record, and the training report.
pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<TrainReport, CliError> {
    let workspace = Workspace::new(out);
    let manifest = DatasetManifest::load_from(&workspace.manifest())?;
    let labels: Vec<String> = manifest.files.iter().map(|f| f.label.clone()).collect();
    let (train_idx, test_idx) = data::split_indices(&labels, config.train_k, config.seed)?;
    let split_record = SplitRecord {
        seed: config.seed,
        train_k: config.train_k,
        train: train_idx.iter().map(|&i| manifest.files[i].path.clone()).collect(),
        test: test_idx.iter().map(|&i| manifest.files[i].path.clone()).collect(),
    };
    write_json(&workspace.split(), &split_record)?;

    let mut by_label: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
    for &index in &train_idx {
        let entry = &manifest.files[index];
        by_label.entry(entry.label.as_str()).or_default().push(entry);
    }

    std::fs::create_dir_all(workspace.models_dir())?;
    let fit_config = config.fit_config();
    let mut conditions = Vec::new();
    for (label, entries) in by_label {
        let trajectories: Vec<Trajectory> = entries
            .iter()
            .map(|entry| {
                load_trajectory(&workspace.root().join(&entry.path))
                    .map(|t| t.with_label(entry.label.clone()))
            })
            .collect::<Result<_, _>>()?;
        let refs: Vec<&Trajectory> = trajectories.iter().collect();
        let (inputs, targets) = training_pairs(&refs, config)?;
        let (model, fit_report) = GpModel::fit_with_report(&inputs, &targets, &fit_config)?;
        let model = model.named(label);
        model.save_to(&workspace.model(label))?;

        let dims: Vec<DimSummary> = fit_report
            .dims
            .iter()
            .map(|dim| DimSummary {
                sigma_f: dim.hp.sigma_f(),
                length_scale: dim.hp.length_scale(),
                sigma_n: dim.hp.sigma_n(),
                lml: finite(dim.lml),
                start_lml: dim.start_lml.iter().map(|&v| finite(v)).collect(),
            })
            .collect();
        for (index, dim) in dims.iter().enumerate() {
            println!(
                "train {label} dim {index}: sigma_f={:.5e} length_scale={:.4} sigma_n={:.5e} lml={}",
                dim.sigma_f,
                dim.length_scale,
                dim.sigma_n,
                dim.lml.map_or("-inf".into(), |v| format!("{v:.3}")),
            );
        }
        conditions.push(ConditionTraining {
            label: label.to_string(),
            n_train_trajectories: trajectories.len(),
            n_training_pairs: inputs.len(),
            dims,
        });
    }
    let report = TrainReport { config: config.clone(), conditions };
    write_json(&workspace.train_report(), &report)?;
    println!("train: wrote {} models to {}", report.conditions.len(), workspace.models_dir().display());
    Ok(report)
}

fn load_models(workspace: &Workspace) -> Result<Vec<GpModel>, CliError> {
    let dir = workspace.models_dir();
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|_| CliError::MissingReport(dir.clone()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Invalid(format!("no model files under {}", dir.display())));
    }
    paths
        .iter()
        .map(|path| GpModel::load_from(path, &JitterPolicy::default()).map_err(CliError::Gp))
        .collect()
}

struct TestSet {
    entries: Vec<ManifestEntry>,
}

fn load_test_set(workspace: &Workspace) -> Result<(SplitRecord, TestSet), CliError> {
    let split: SplitRecord = read_report(&workspace.split())?;
    let manifest = DatasetManifest::load_from(&workspace.manifest())?;
    let by_path: BTreeMap<&str, &ManifestEntry> =
        manifest.files.iter().map(|entry| (entry.path.as_str(), entry)).collect();
    let entries = split
        .test
        .iter()
        .map(|path| {
            by_path
                .get(path.as_str())
                .map(|&entry| entry.clone())
                .ok_or_else(|| CliError::Invalid(format!("split file {path} not in manifest")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((split, TestSet { entries }))
}

fn trajectory_id(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|stem| stem.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Builds the per-condition models from the training split and streams
/// every held-out trajectory through the classifier.
pub fn cmd_classify(config: &RunConfig, out: &Path) -> Result<ClassifySummary, CliError> {
    let workspace = Workspace::new(out);
    let models = load_models(&workspace)?;
    let (split, test_set) = load_test_set(&workspace)?;

    // Training trajectories per label, for the closest-pose references.
    let manifest = DatasetManifest::load_from(&workspace.manifest())?;
    let by_path: BTreeMap<&str, &ManifestEntry> =
        manifest.files.iter().map(|entry| (entry.path.as_str(), entry)).collect();
    let mut train_by_label: BTreeMap<String, Vec<Trajectory>> = BTreeMap::new();
    for path in &split.train {
        let entry = by_path
            .get(path.as_str())
            .ok_or_else(|| CliError::Invalid(format!("split file {path} not in manifest")))?;
        let trajectory =
            load_trajectory(&workspace.root().join(&entry.path))?.with_label(entry.label.clone());
        train_by_label.entry(entry.label.clone()).or_default().push(trajectory);
    }

    let conditions: Vec<ConditionModel> = models
        .into_iter()
        .map(|model| {
            let label = model.label().to_string();
            let trajectories = train_by_label
                .remove(&label)
                .ok_or_else(|| CliError::Invalid(format!("no training trajectories for {label}")))?;
            ConditionModel::new(label, trajectories, model).map_err(CliError::Classifier)
        })
        .collect::<Result<_, _>>()?;

    let classifier_config = config.classifier_config();
    let outcomes: Vec<TrajectoryClassification> = test_set
        .entries
        .par_iter()
        .map(|entry| -> Result<TrajectoryClassification, CliError> {
            let trajectory = load_trajectory(&workspace.root().join(&entry.path))?;
            let report = classify_stream(&trajectory, &conditions, &classifier_config)?;
            let correct = report.nominated.as_deref() == Some(entry.label.as_str());
            Ok(TrajectoryClassification {
                id: trajectory_id(&entry.path),
                label: entry.label.clone(),
                correct,
                report,
            })
        })
        .collect::<Result<_, _>>()?;

    std::fs::create_dir_all(workspace.traces_dir())?;
    for outcome in &outcomes {
        let path = workspace.traces_dir().join(format!("{}.csv", outcome.id));
        let file = std::fs::File::create(path)?;
        write_traces_csv(&outcome.report, file)?;
    }

    let n_total = outcomes.len();
    let n_correct = outcomes.iter().filter(|o| o.correct).count();
    let n_exhausted = outcomes.iter().filter(|o| o.report.nominated.is_none()).count();
    let fractions: Vec<f64> = outcomes
        .iter()
        .map(|o| o.report.nomination_fraction.unwrap_or(1.0))
        .collect();
    let mean_nomination_fraction = fractions.iter().sum::<f64>() / n_total.max(1) as f64;

    let mut grouped: BTreeMap<&str, Vec<&TrajectoryClassification>> = BTreeMap::new();
    for outcome in &outcomes {
        grouped.entry(outcome.label.as_str()).or_default().push(outcome);
    }
    let per_condition = grouped
        .into_iter()
        .map(|(label, group)| {
            let steps: Vec<f64> = group
                .iter()
                .filter_map(|o| o.report.nomination_step.map(|s| s as f64))
                .collect();
            let fractions: Vec<f64> = group
                .iter()
                .map(|o| o.report.nomination_fraction.unwrap_or(1.0))
                .collect();
            let mean_step = steps.iter().sum::<f64>() / steps.len().max(1) as f64;
            let mean_fraction = fractions.iter().sum::<f64>() / fractions.len().max(1) as f64;
            ConditionNomination {
                label: label.to_string(),
                n: group.len(),
                n_correct: group.iter().filter(|o| o.correct).count(),
                mean_step,
                std_step: sample_std(&steps, mean_step),
                mean_fraction,
                std_fraction: sample_std(&fractions, mean_fraction),
            }
        })
        .collect();

    let summary = ClassifySummary {
        config: config.clone(),
        n_total,
        n_correct,
        n_exhausted,
        accuracy: n_correct as f64 / n_total.max(1) as f64,
        mean_nomination_fraction,
        per_condition,
        trajectories: outcomes,
    };
    write_json(&workspace.classify_report(), &summary)?;
    println!(
        "classify: {}/{} correct ({:.1}%), mean nomination fraction {:.3}",
        summary.n_correct,
        summary.n_total,
        100.0 * summary.accuracy,
        summary.mean_nomination_fraction
    );
    Ok(summary)
}

/// One-step velocity predictions from the nomination step onward, compared
/// against the held-out ground truth, plus a rollout to the end of each
/// trajectory.
pub fn cmd_predict(config: &RunConfig, out: &Path) -> Result<PredictSummary, CliError> {
    let workspace = Workspace::new(out);
    let models = load_models(&workspace)?;
    let by_label: BTreeMap<String, GpModel> =
        models.into_iter().map(|m| (m.label().to_string(), m)).collect();
    let (_, test_set) = load_test_set(&workspace)?;

    // Nomination outcomes, unless oracle labels were requested.
    let nomination: BTreeMap<String, (Option<String>, usize)> = if config.oracle_labels {
        BTreeMap::new()
    } else {
        let classify: ClassifySummary = read_report(&workspace.classify_report())?;
        classify
            .trajectories
            .into_iter()
            .map(|t| (t.id, (t.report.nominated, t.report.nomination_step.unwrap_or(0))))
            .collect()
    };

    struct Work {
        entry: ManifestEntry,
        used_label: String,
        start_step: usize,
    }
    let mut work = Vec::new();
    let mut skipped = Vec::new();
    for entry in &test_set.entries {
        let id = trajectory_id(&entry.path);
        let (used_label, start_step) = if config.oracle_labels {
            (entry.label.clone(), 0)
        } else {
            match nomination.get(&id) {
                Some((Some(label), step)) => (label.clone(), *step),
                Some((None, _)) => {
                    skipped.push(id);
                    continue;
                }
                None => {
                    return Err(CliError::Invalid(format!(
                        "trajectory {id} missing from the classification report"
                    )))
                }
            }
        };
        work.push(Work { entry: entry.clone(), used_label, start_step });
    }

    let results: Vec<TrajectoryPrediction> = work
        .par_iter()
        .map(|item| -> Result<TrajectoryPrediction, CliError> {
            let model = by_label.get(&item.used_label).ok_or_else(|| {
                CliError::Invalid(format!("no model for condition {}", item.used_label))
            })?;
            let trajectory = load_trajectory(&workspace.root().join(&item.entry.path))?;
            let poses: Vec<DualQuaternionPose> = trajectory.poses().cloned().collect();
            let start = item.start_step.min(poses.len() - 1);

            let mut squared_sum = 0.0;
            let mut n_steps = 0usize;
            for step_index in start..poses.len() - 1 {
                let prediction = model.predict(&poses[step_index]);
                let advanced = gp::step(&poses[step_index], &prediction.mean);
                let error = d_mag(&advanced, &poses[step_index + 1]);
                squared_sum += error * error;
                n_steps += 1;
            }
            let rmse = (n_steps > 0).then(|| (squared_sum / n_steps as f64).sqrt());

            let remaining = poses.len() - 1 - start;
            let (final_error, diverged) = match model.rollout(&poses[start], remaining, config.workspace_bound) {
                Ok(rollout) => {
                    let end = rollout.poses.last().expect("rollout includes start");
                    (Some(d_mag(end, &poses[poses.len() - 1])), false)
                }
                Err(GpError::DivergenceDetected { .. }) => (None, true),
                Err(other) => return Err(CliError::Gp(other)),
            };

            Ok(TrajectoryPrediction {
                id: trajectory_id(&item.entry.path),
                label: item.entry.label.clone(),
                used_label: item.used_label.clone(),
                start_step: start,
                n_steps,
                rmse,
                final_error,
                diverged,
            })
        })
        .collect::<Result<_, _>>()?;

    // Pooled per-condition and overall errors need the raw squared sums.
    let mut pooled: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for result in &results {
        if let Some(rmse) = result.rmse {
            let slot = pooled.entry(result.label.as_str()).or_insert((0.0, 0));
            slot.0 += rmse * rmse * result.n_steps as f64;
            slot.1 += result.n_steps;
        }
    }
    let per_condition: Vec<ConditionRmse> = pooled
        .iter()
        .map(|(&label, &(squared_sum, n_steps))| {
            let group: Vec<&TrajectoryPrediction> =
                results.iter().filter(|r| r.label == label).collect();
            let trajectory_rmses: Vec<f64> = group.iter().filter_map(|r| r.rmse).collect();
            let mean_rmse =
                trajectory_rmses.iter().sum::<f64>() / trajectory_rmses.len().max(1) as f64;
            let finals: Vec<f64> = group.iter().filter_map(|r| r.final_error).collect();
            ConditionRmse {
                label: label.to_string(),
                n_trajectories: group.len(),
                n_steps,
                rmse: (squared_sum / n_steps.max(1) as f64).sqrt(),
                mean_trajectory_rmse: mean_rmse,
                std_trajectory_rmse: sample_std(&trajectory_rmses, mean_rmse),
                mean_final_error: (!finals.is_empty())
                    .then(|| finals.iter().sum::<f64>() / finals.len() as f64),
            }
        })
        .collect();
    let total_squared: f64 = pooled.values().map(|(s, _)| s).sum();
    let total_steps: usize = pooled.values().map(|(_, n)| n).sum();
    let overall_rmse = (total_squared / total_steps.max(1) as f64).sqrt();

    let summary = PredictSummary {
        config: config.clone(),
        overall_rmse,
        n_steps_total: total_steps,
        per_condition,
        trajectories: results,
        skipped,
    };
    write_json(&workspace.predict_report(), &summary)?;
    println!(
        "predict: overall one-step RMSE {:.4e} over {} steps across {} trajectories",
        summary.overall_rmse,
        summary.n_steps_total,
        summary.trajectories.len()
    );
    Ok(summary)
}

/// Merges the classification and prediction reports, applies the
/// configured thresholds, and writes `summary.json`. Returns whether every
/// check passed.
pub fn cmd_eval(config: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let workspace = Workspace::new(out);
    let classify: ClassifySummary = read_report(&workspace.classify_report())?;
    let predict: PredictSummary = read_report(&workspace.predict_report())?;

    let mut checks = vec![
        Check {
            name: "accuracy>=min_accuracy".into(),
            value: classify.accuracy,
            threshold: config.min_accuracy,
            pass: classify.accuracy >= config.min_accuracy,
        },
        Check {
            name: "mean_nomination_fraction<=max_nomination_fraction".into(),
            value: classify.mean_nomination_fraction,
            threshold: config.max_nomination_fraction,
            pass: classify.mean_nomination_fraction <= config.max_nomination_fraction,
        },
    ];
    if let Some(max_rmse) = config.max_overall_rmse {
        checks.push(Check {
            name: "overall_rmse<=max_overall_rmse".into(),
            value: predict.overall_rmse,
            threshold: max_rmse,
            pass: predict.overall_rmse <= max_rmse,
        });
    }
    let pass = checks.iter().all(|c| c.pass);

    let summary = Summary {
        config: config.clone(),
        classification: ClassificationAggregate {
            accuracy: classify.accuracy,
            n_correct: classify.n_correct,
            n_total: classify.n_total,
            n_exhausted: classify.n_exhausted,
            mean_nomination_fraction: classify.mean_nomination_fraction,
            per_condition: classify.per_condition,
        },
        prediction: PredictionAggregate {
            overall_rmse: predict.overall_rmse,
            n_steps_total: predict.n_steps_total,
            per_condition: predict.per_condition,
        },
        checks,
        pass,
    };
    write_json(&workspace.summary(), &summary)?;

    println!("evaluation summary");
    println!("  condition | n | correct | mean nomination % | one-step RMSE");
    for condition in &summary.classification.per_condition {
        let rmse = summary
            .prediction
            .per_condition
            .iter()
            .find(|c| c.label == condition.label)
            .map_or("-".to_string(), |c| format!("{:.3e}", c.rmse));
        println!(
            "  {:9} | {} | {:7} | {:5.1} +- {:4.1} | {}",
            condition.label,
            condition.n,
            condition.n_correct,
            100.0 * condition.mean_fraction,
            100.0 * condition.std_fraction,
            rmse
        );
    }
    println!(
        "  overall: accuracy {:.1}%, mean nomination fraction {:.3}, RMSE {:.4e}",
        100.0 * summary.classification.accuracy,
        summary.classification.mean_nomination_fraction,
        summary.prediction.overall_rmse
    );
    for check in &summary.checks {
        println!(
            "  check {}: value {:.4} vs threshold {:.4} -> {}",
            check.name,
            check.value,
            check.threshold,
            if check.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_subsample_even_coverage() {
        let items: Vec<usize> = (0..100).collect();
        let picked = stride_subsample(&items, 10);
        assert_eq!(picked, vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90]);
        assert_eq!(stride_subsample(&items, 200).len(), 100);
        // Strictly increasing, no duplicates.
        let picked = stride_subsample(&items, 33);
        for pair in picked.windows(2) {
            assert!(pair[1] > pair[0]);
        }
    }

    #[test]
    fn trajectory_id_strips_directory_and_extension() {
        assert_eq!(trajectory_id("data/b-l_007.csv"), "b-l_007");
        assert_eq!(trajectory_id("b-l_007.csv"), "b-l_007");
    }

    #[test]
    fn sample_std_matches_two_point_case() {
        // Sample standard deviation of {1, 3} is sqrt(2).
        let std = sample_std(&[1.0, 3.0], 2.0);
        assert!((std - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(sample_std(&[5.0], 5.0), 0.0);
    }
}
