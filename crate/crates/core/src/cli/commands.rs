use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    ClassifierArgs, ClassifierKind, CvArgs, EvalArgs, Experiment, FamilyArg, FitArgs, Filtering,
    Format, HypothesisArg, PredictArgs, PreprocessArgs, ScoreArgs, SynthArgs,
};
use crate::dataset::{fit_pca, read_table, standardize, LabeledDataset, PcaTransform, Scaler};
use crate::error::{Error, Result};
use crate::eval::{
    compare_methods, curves_to_json, multi_run_aggregate, write_curves_csv, CurveRecord,
    MethodScores, Orientation, RunScores,
};
use crate::models::{
    load_external_predictions, train_softmax_regression, write_predictions, Classifier,
    ClassifierOutput, KnnClassifier, SoftmaxConfig,
};
use crate::synth::{
    bayes_agreement_experiment, hausdorff_convergence_experiment, BayesConfig, ConvergenceConfig,
    Family, Hypothesis, KRule, SyntheticSpec,
};
use crate::trust::{
    cross_validate_alpha, default_alpha_grid, fit_trust_model, FilteringStrategy, ModelFile,
    TrustModel,
};

pub const SCORES_HEADER: [&str; 5] = ["index", "predicted", "trust_score", "one_nn_ratio", "confidence"];

/// Everything `score` needs: the trust model plus the label names and the
/// preprocessing fitted on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub scaler: Option<Scaler>,
    pub pca: Option<PcaTransform>,
    pub trust: ModelFile,
}

#[derive(Debug, Clone, Default)]
struct Preprocess {
    scaler: Option<Scaler>,
    pca: Option<PcaTransform>,
}

impl Preprocess {
    fn fit(ds: LabeledDataset, args: &PreprocessArgs) -> Result<(LabeledDataset, Self)> {
        let mut prep = Self::default();
        let mut ds = ds;
        if args.standardize {
            let (scaled, scaler) = standardize(&ds)?;
            ds = scaled;
            prep.scaler = Some(scaler);
        }
        if let Some(dims) = args.pca_dims {
            let pca = fit_pca(&ds, dims)?;
            ds = pca.apply(&ds)?;
            prep.pca = Some(pca);
        }
        Ok((ds, prep))
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = match &self.scaler {
            Some(s) => s.apply(x)?,
            None => x.to_owned(),
        };
        if let Some(pca) = &self.pca {
            out = pca.transform(out.view())?;
        }
        Ok(out)
    }
}

struct Training {
    data: LabeledDataset,
    feature_names: Vec<String>,
    prep: Preprocess,
}

fn load_training(path: &Path, prep: &PreprocessArgs) -> Result<Training> {
    let table = read_table(path, &prep.label_column)?;
    let feature_names = table.feature_names.clone();
    let raw = table.into_labeled(&prep.label_column)?;
    let (data, prep) = Preprocess::fit(raw, prep)?;
    Ok(Training {
        data,
        feature_names,
        prep,
    })
}

/// Test features in the training column order, preprocessed.
fn load_test(path: &Path, label_column: &str, feature_names: &[String], prep: &Preprocess) -> Result<Array2<f64>> {
    let table = read_table(path, label_column)?;
    if table.feature_names != feature_names {
        return Err(Error::ShapeMismatch(format!(
            "test columns {:?} differ from training columns {:?}",
            table.feature_names, feature_names
        )));
    }
    prep.apply(table.features.view())
}

fn label_names(ds: &LabeledDataset) -> Vec<String> {
    (0..ds.n_classes()).map(|l| ds.label_name(l)).collect()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile {
            path: path.to_path_buf(),
        },
        _ => Error::Io {
            path: path.to_path_buf(),
            source,
        },
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn classify(
    args: &ClassifierArgs,
    train: &LabeledDataset,
    x: ArrayView2<'_, f64>,
) -> Result<Vec<ClassifierOutput>> {
    match args.classifier {
        ClassifierKind::Softmax => {
            let config = SoftmaxConfig {
                learning_rate: args.learning_rate,
                epochs: args.epochs,
            };
            train_softmax_regression(train, config)?.predict_all(x)
        }
        ClassifierKind::Knn => KnnClassifier::new(train, args.knn_k)?.predict_all(x),
    }
}

pub(super) fn fit(args: &FitArgs) -> Result<Option<String>> {
    let strategy = match args.filtering {
        Filtering::None => FilteringStrategy::None,
        Filtering::Density => FilteringStrategy::Density,
        Filtering::Disagreement => FilteringStrategy::Disagreement {
            threshold: args.disagreement_threshold,
        },
    };
    let training = load_training(&args.train, &args.prep)?;
    let model = fit_trust_model(&training.data, args.alpha, args.k, strategy)?;
    let names = label_names(&training.data);
    let classes: Vec<_> = model
        .classes()
        .iter()
        .zip(&names)
        .map(|(c, name)| {
            json!({
                "label": name,
                "size": c.points.nrows(),
                "kept": c.kept.len(),
                "epsilon": c.density.as_ref().map(|d| d.epsilon),
                "warning": c.warning,
            })
        })
        .collect();
    let bundle = ModelBundle {
        label_names: names,
        feature_names: training.feature_names,
        scaler: training.prep.scaler,
        pca: training.prep.pca,
        trust: model.to_file(),
    };
    write_atomic(&args.out, serde_json::to_string(&bundle)?.as_bytes())?;
    let summary = json!({
        "alpha": model.alpha(),
        "k": model.k(),
        "filtering": model.strategy().name(),
        "dim": model.dim(),
        "classes": classes,
    });
    Ok(Some(summary.to_string()))
}

pub(super) fn predict(args: &PredictArgs) -> Result<Option<String>> {
    let training = load_training(&args.train, &args.prep)?;
    let x = load_test(&args.test, &args.prep.label_column, &training.feature_names, &training.prep)?;
    let preds = classify(&args.classifier, &training.data, x.view())?;
    let mut buf = Vec::new();
    write_predictions(&mut buf, &preds, &label_names(&training.data))?;
    write_atomic(&args.out, &buf)?;
    Ok(None)
}

/// `{:?}` keeps full precision and writes infinity as `inf`.
fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

pub(super) fn score(args: &ScoreArgs) -> Result<Option<String>> {
    let bundle: ModelBundle = serde_json::from_str(&read_text(&args.model)?)?;
    if bundle.label_names.len() != bundle.trust.classes.len() {
        return Err(Error::ModelFormat(format!(
            "{} label names for {} classes",
            bundle.label_names.len(),
            bundle.trust.classes.len()
        )));
    }
    let prep = Preprocess {
        scaler: bundle.scaler.clone(),
        pca: bundle.pca.clone(),
    };
    let model = TrustModel::from_file(bundle.trust)?;
    let x = load_test(&args.test, &args.label_column, &bundle.feature_names, &prep)?;
    let preds = load_external_predictions(&args.predictions, &bundle.label_names, Some(x.nrows()))?;

    let rows: Vec<(f64, f64)> = (0..x.nrows())
        .into_par_iter()
        .zip(preds.par_iter())
        .map(|(i, p)| {
            let row = x.row(i).to_vec();
            Ok((model.trust_score(&row, p.predicted)?.value, model.one_nn_ratio(&row)?))
        })
        .collect::<Result<_>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCORES_HEADER)?;
    for (i, (p, (trust, ratio))) in preds.iter().zip(rows).enumerate() {
        w.write_record([
            i.to_string(),
            bundle.label_names[p.predicted].clone(),
            fmt_float(trust),
            fmt_float(ratio),
            fmt_float(p.confidence),
        ])?;
    }
    let buf = w.into_inner().map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e.into_error(),
    })?;
    write_atomic(&args.out, &buf)?;
    Ok(None)
}

/// Predicted label names and per-method scores from one scores file.
struct ScoresFile {
    predicted: Vec<String>,
    trust: Vec<f64>,
    ratio: Vec<f64>,
    confidence: Vec<f64>,
}

fn read_scores(path: &Path) -> Result<ScoresFile> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::UnknownColumn {
            column: name.to_owned(),
            available: headers.clone(),
        })
    };
    let cols: Vec<usize> = SCORES_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut out = ScoresFile {
        predicted: Vec::new(),
        trust: Vec::new(),
        ratio: Vec::new(),
        confidence: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(cols[c]).unwrap_or("").trim();
        let number = |c: usize| -> Result<f64> {
            let raw = field(c);
            match raw.parse::<f64>() {
                Ok(v) if !v.is_nan() => Ok(v),
                _ => Err(Error::NonNumeric {
                    row,
                    column: SCORES_HEADER[c].to_owned(),
                    value: raw.to_owned(),
                }),
            }
        };
        if field(0) != row.to_string() {
            return Err(Error::ShapeMismatch(format!(
                "{}: row {row} has index {:?}; rows must be in test order",
                path.display(),
                field(0)
            )));
        }
        out.predicted.push(field(1).to_owned());
        out.trust.push(number(2)?);
        out.ratio.push(number(3)?);
        out.confidence.push(number(4)?);
    }
    Ok(out)
}

pub(super) fn eval(args: &EvalArgs) -> Result<Option<String>> {
    if args.test.len() != 1 && args.test.len() != args.scores.len() {
        return Err(Error::invalid(
            "test",
            format!(
                "give one test file or one per scores file ({} scores, {} tests)",
                args.scores.len(),
                args.test.len()
            ),
        ));
    }
    let mut runs = Vec::with_capacity(args.scores.len());
    for (i, scores_path) in args.scores.iter().enumerate() {
        let test_path = &args.test[if args.test.len() == 1 { 0 } else { i }];
        let table = read_table(test_path, &args.label_column)?;
        let Some(labels) = table.labels else {
            return Err(Error::UnknownColumn {
                column: args.label_column.clone(),
                available: table.feature_names,
            });
        };
        let scores = read_scores(scores_path)?;
        if scores.predicted.len() != labels.len() {
            return Err(Error::RowCountMismatch {
                expected: labels.len(),
                found: scores.predicted.len(),
            });
        }
        let correct = scores.predicted.iter().zip(&labels).map(|(p, l)| p == l).collect();
        runs.push(compare_methods(&RunScores {
            correct,
            methods: vec![
                MethodScores::new("trust_score", scores.trust, Orientation::HigherIsTrusted),
                MethodScores::new("one_nn_ratio", scores.ratio, Orientation::LowerIsTrusted),
                MethodScores::new("confidence", scores.confidence, Orientation::HigherIsTrusted),
            ],
        })?);
    }
    let records: Vec<CurveRecord> = if runs.len() == 1 {
        runs.pop().expect("one run").into_iter().map(CurveRecord::from).collect()
    } else {
        multi_run_aggregate(&runs)?
    };
    let bytes = match args.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_curves_csv(&mut buf, &records)?;
            buf
        }
        Format::Json => curves_to_json(&records)?.into_bytes(),
    };
    write_atomic(&args.out, &bytes)?;
    Ok(None)
}

pub(super) fn cv_alpha(args: &CvArgs) -> Result<Option<String>> {
    let training = load_training(&args.train, &args.prep)?;
    let grid = args.grid.clone().unwrap_or_else(default_alpha_grid);
    let classifier = args.classifier.clone();
    let provider = move |train: &LabeledDataset, x: ArrayView2<'_, f64>| classify(&classifier, train, x);
    let report = cross_validate_alpha(&training.data, &provider, &grid, args.k, args.folds, args.seed)?;
    write_atomic(&args.out, serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(Some(
        json!({ "chosen_alpha": report.chosen_alpha, "warnings": report.warnings }).to_string(),
    ))
}

fn synthetic_spec(args: &SynthArgs) -> Result<SyntheticSpec> {
    let mut spec = match &args.spec {
        Some(path) => serde_json::from_str(&read_text(path)?)?,
        None => match args.family {
            FamilyArg::Gaussian => SyntheticSpec::standard_gaussian_2d(0),
            FamilyArg::Annulus => SyntheticSpec {
                family: Family::UniformAnnulus {
                    inner: 1.0,
                    outer: 2.0,
                },
                seed: 0,
            },
            FamilyArg::Circle => SyntheticSpec::circle_with_noise(args.ambient_dim, args.eta, 0),
            FamilyArg::GaussianPair => SyntheticSpec::two_gaussians_1d(0.0, args.separation, 1.0, 0),
        },
    };
    spec.seed = args.seed;
    spec.validate()?;
    Ok(spec)
}

pub(super) fn synth_validate(args: &SynthArgs) -> Result<Option<String>> {
    let spec = synthetic_spec(args)?;
    let (json, summary) = match args.experiment {
        Experiment::Convergence => {
            let k_rule = match (args.k, args.k_exponent) {
                (Some(k), _) => KRule::Fixed { k },
                (None, Some(exponent)) => KRule::Power { exponent },
                (None, None) => KRule::Sqrt,
            };
            let config = ConvergenceConfig {
                alpha: args.alpha,
                k_rule,
                n_grid: args.n_grid.clone(),
                trials: args.trials,
                mesh_spacing: None,
            };
            let report = hausdorff_convergence_experiment(&spec, &config)?;
            let summary = json!({
                "n": config.n_grid,
                "median_hausdorff": report.medians(),
                "median_hausdorff_uncorrected": report.uncorrected_medians(),
            });
            (serde_json::to_string_pretty(&report)?, summary)
        }
        Experiment::Bayes => {
            let config = BayesConfig {
                gamma: args.gamma,
                alpha: args.alpha,
                k: args.k.unwrap_or(10),
                n: args.n,
                trials: args.trials,
                hypothesis: match args.hypothesis {
                    HypothesisArg::Constant => Hypothesis::Constant { label: 0 },
                    HypothesisArg::Bayes => Hypothesis::Bayes,
                },
            };
            let report = bayes_agreement_experiment(&spec, &config)?;
            let summary = json!({
                "median_low_disagreement": report.median_low_disagreement,
                "median_high_agreement": report.median_high_agreement,
            });
            (serde_json::to_string_pretty(&report)?, summary)
        }
    };
    write_atomic(&args.out, json.as_bytes())?;
    Ok(Some(summary.to_string()))
}
