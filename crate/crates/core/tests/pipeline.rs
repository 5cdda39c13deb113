use ndarray::ArrayView2;

use trustscore::dataset::{stratified_split, LabeledDataset};
use trustscore::density::knn_density;
use trustscore::eval::{compare_methods, MethodScores, Mode, Orientation, RunScores};
use trustscore::models::{Classifier, ClassifierOutput, KnnClassifier};
use trustscore::synth::{generate, Family, GaussianComponent, SyntheticSpec};
use trustscore::trust::{fit_trust_model, FilteringStrategy, TrustModel};

fn trust_scores(model: &TrustModel, x: ArrayView2<'_, f64>, preds: &[ClassifierOutput]) -> Vec<f64> {
    x.outer_iter()
        .zip(preds)
        .map(|(row, p)| model.trust_score(&row.to_vec(), p.predicted).unwrap().value)
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[test]
fn gaussian_density_at_origin() {
    let estimates: Vec<f64> = (0..10)
        .map(|seed| {
            let ds = generate(&SyntheticSpec::standard_gaussian_2d(100 + seed), 10_000).unwrap();
            knn_density(ds.features(), 100, &[0.0, 0.0], 2).unwrap()
        })
        .collect();
    let truth = 1.0 / (2.0 * std::f64::consts::PI);
    let m = median(estimates);
    assert!((m - truth).abs() <= 0.2 * truth, "median {m}, truth {truth}");
}

#[test]
fn separated_gaussians_give_perfect_curves() {
    let spec = SyntheticSpec {
        family: Family::GaussianMixture {
            components: [-5.0, 5.0]
                .iter()
                .map(|&m| GaussianComponent { mean: vec![m], std: 0.1, weight: 0.5 })
                .collect(),
        },
        seed: 2,
    };
    let ds = generate(&spec, 400).unwrap();
    let (train, test) = stratified_split(&ds, 0.5, 2).unwrap();
    let preds = KnnClassifier::new(&train, 10).unwrap().predict_all(test.features()).unwrap();
    let model = fit_trust_model(&train, 0.1, 10, FilteringStrategy::Density).unwrap();
    let correct: Vec<bool> = preds.iter().zip(test.labels()).map(|(p, &l)| p.predicted == l).collect();
    assert!(correct.iter().all(|&c| c));
    let curves = compare_methods(&RunScores {
        correct,
        methods: vec![
            MethodScores::new("trust_score", trust_scores(&model, test.features(), &preds), Orientation::HigherIsTrusted),
            MethodScores::new("confidence", preds.iter().map(|p| p.confidence).collect(), Orientation::HigherIsTrusted),
        ],
    })
    .unwrap();
    for c in curves.iter().filter(|c| c.mode == Mode::Trustworthy) {
        assert!(c.precisions.iter().all(|&p| p == 1.0), "{}", c.method);
    }
}

#[test]
fn trust_score_beats_one_nn_confidence_on_overlap() {
    let mut trust = Vec::new();
    let mut baseline = Vec::new();
    for seed in 0..20 {
        let ds = generate(&SyntheticSpec::two_gaussians_1d(-1.0, 1.0, 1.0, 300 + seed), 2000).unwrap();
        let (train, test) = stratified_split(&ds, 0.5, seed).unwrap();
        let preds = KnnClassifier::new(&train, 1).unwrap().predict_all(test.features()).unwrap();
        let model = fit_trust_model(&train, 0.0625, 10, FilteringStrategy::Density).unwrap();
        let correct = preds.iter().zip(test.labels()).map(|(p, &l)| p.predicted == l).collect();
        let curves = compare_methods(&RunScores {
            correct,
            methods: vec![
                MethodScores::new("trust_score", trust_scores(&model, test.features(), &preds), Orientation::HigherIsTrusted),
                MethodScores::new("confidence", preds.iter().map(|p| p.confidence).collect(), Orientation::HigherIsTrusted),
            ],
        })
        .unwrap();
        let mean_upper = |i: usize| curves[i].precisions[50..].iter().sum::<f64>() / 50.0;
        trust.push(mean_upper(0));
        baseline.push(mean_upper(2));
    }
    let (t, b) = (median(trust), median(baseline));
    assert!(t >= b, "trust {t} vs 1-NN confidence {b}");
}

#[test]
fn saved_model_scores_identically() {
    let ds = generate(&SyntheticSpec::circle_with_noise(3, 0.2, 5), 600).unwrap();
    let (train, test) = stratified_split(&ds, 0.3, 5).unwrap();
    for strategy in [
        FilteringStrategy::None,
        FilteringStrategy::Density,
        FilteringStrategy::Disagreement { threshold: 0.5 },
    ] {
        let model = fit_trust_model(&train, 0.2, 7, strategy).unwrap();
        let loaded = TrustModel::from_json(&model.to_json().unwrap()).unwrap();
        for x in test.features().outer_iter() {
            let x = x.to_vec();
            for label in 0..2 {
                assert_eq!(
                    model.trust_score(&x, label).unwrap().value.to_bits(),
                    loaded.trust_score(&x, label).unwrap().value.to_bits()
                );
            }
            assert_eq!(model.one_nn_ratio(&x).unwrap().to_bits(), loaded.one_nn_ratio(&x).unwrap().to_bits());
        }
    }
}

#[test]
fn small_class_clamps_k_with_warning() {
    let x = ndarray::array![[0.0], [0.5], [1.0], [1.5], [2.0], [9.0], [10.0]];
    let train = LabeledDataset::new(x, vec![0, 0, 0, 0, 0, 1, 1]).unwrap();
    let model = fit_trust_model(&train, 0.25, 10, FilteringStrategy::Density).unwrap();
    assert!(model.classes().iter().all(|c| c.warning.is_some()));
    let ratio = model.one_nn_ratio(&[5.0]).unwrap();
    assert_eq!(ratio, 3.0 / 4.0);
    assert_eq!(model.class_distances(&[5.0]).unwrap(), [3.0, 4.0]);
}
