//! Synthetic distributions with closed-form density level sets, used to
//! check level-set recovery and trust-score agreement with the Bayes rule
//! empirically.

mod experiments;
mod oracle;

pub use experiments::{
    bayes_agreement_experiment, hausdorff_convergence_experiment, BayesConfig, BayesReport,
    BayesTrial, ConvergenceConfig, ConvergenceReport, Hypothesis, KRule, Summary,
};
pub use oracle::{oracle_high_density_set, LevelSet, LevelSetOracle};

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Isotropic Gaussian component `N(mean, std² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub std: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Labels are component indices.
    GaussianMixture { components: Vec<GaussianComponent> },
    /// Uniform on `{x ∈ R² : inner ≤ |x| ≤ outer}`.
    UniformAnnulus { inner: f64, outer: f64 },
    /// `(1 − η)·F_M + η·F_E`: F_M lives on the circle of `radius` in the
    /// first two coordinates of `R^ambient_dim` with angular density
    /// `(1 + concentration·cos θ) / 2π`; F_E is uniform on the box
    /// `[−noise_half_width, noise_half_width]^ambient_dim`. Label 0 marks
    /// manifold draws and label 1 noise draws.
    CircleManifoldNoise {
        ambient_dim: usize,
        radius: f64,
        concentration: f64,
        eta: f64,
        noise_half_width: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub family: Family,
    /// Base seed; trials derive their own seeds from it.
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn standard_gaussian_2d(seed: u64) -> Self {
        Self {
            family: Family::GaussianMixture {
                components: vec![GaussianComponent {
                    mean: vec![0.0, 0.0],
                    std: 1.0,
                    weight: 1.0,
                }],
            },
            seed,
        }
    }

    /// Equal-weight, equal-variance pair of Gaussians in one dimension.
    pub fn two_gaussians_1d(mean0: f64, mean1: f64, std: f64, seed: u64) -> Self {
        Self {
            family: Family::GaussianMixture {
                components: [mean0, mean1]
                    .iter()
                    .map(|&m| GaussianComponent {
                        mean: vec![m],
                        std,
                        weight: 0.5,
                    })
                    .collect(),
            },
            seed,
        }
    }

    pub fn circle_with_noise(ambient_dim: usize, eta: f64, seed: u64) -> Self {
        Self {
            family: Family::CircleManifoldNoise {
                ambient_dim,
                radius: 1.0,
                concentration: 0.9,
                eta,
                noise_half_width: 2.0,
            },
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            family: self.family.clone(),
            seed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::GaussianMixture { .. } => "gaussian_mixture",
            Family::UniformAnnulus { .. } => "uniform_annulus",
            Family::CircleManifoldNoise { .. } => "circle_manifold_noise",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            Family::GaussianMixture { components } => components.first().map_or(0, |c| c.mean.len()),
            Family::UniformAnnulus { .. } => 2,
            Family::CircleManifoldNoise { ambient_dim, .. } => *ambient_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match &self.family {
            Family::GaussianMixture { components } => {
                if components.is_empty() {
                    return bad("mixture has no components".into());
                }
                let dim = components[0].mean.len();
                if dim == 0 {
                    return bad("component mean is empty".into());
                }
                for (i, c) in components.iter().enumerate() {
                    if c.mean.len() != dim {
                        return bad(format!("component {i} has dimension {}", c.mean.len()));
                    }
                    if !(c.std > 0.0 && c.std.is_finite()) || c.mean.iter().any(|v| !v.is_finite()) {
                        return bad(format!("component {i} has invalid mean or std"));
                    }
                    if c.weight.is_nan() || c.weight <= 0.0 {
                        return bad(format!("component {i} has nonpositive weight"));
                    }
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("weights sum to {total}, not 1"));
                }
            }
            Family::UniformAnnulus { inner, outer } => {
                if !(*inner >= 0.0 && inner < outer && outer.is_finite()) {
                    return bad(format!("annulus radii {inner}, {outer} invalid"));
                }
            }
            Family::CircleManifoldNoise {
                ambient_dim,
                radius,
                concentration,
                eta,
                noise_half_width,
            } => {
                if *ambient_dim < 2 {
                    return bad("ambient dimension must exceed the circle's dimension 1".into());
                }
                if !(*radius > 0.0 && *noise_half_width > 0.0) {
                    return bad("radius and noise box must be positive".into());
                }
                if !(0.0..1.0).contains(concentration) {
                    return bad(format!("concentration {concentration} not in [0, 1)"));
                }
                if !(0.0..1.0).contains(eta) {
                    return bad(format!("noise weight {eta} not in [0, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// Draws `n` i.i.d. points; deterministic in `spec.seed`.
pub fn generate(spec: &SyntheticSpec, n: usize) -> Result<LabeledDataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim();
    let mut x = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    match &spec.family {
        Family::GaussianMixture { components } => {
            for i in 0..n {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut c = components.len() - 1;
                for (j, comp) in components.iter().enumerate() {
                    acc += comp.weight;
                    if u < acc {
                        c = j;
                        break;
                    }
                }
                let comp = &components[c];
                for j in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x[[i, j]] = comp.mean[j] + comp.std * z;
                }
                labels.push(c);
            }
            let n_classes = components.len();
            return LabeledDataset::with_classes(x, labels, n_classes, None).map_err(|e| match e {
                Error::EmptyClass { class } => Error::InvalidSpec(format!(
                    "component {class} drew no samples out of {n}; increase n"
                )),
                e => e,
            });
        }
        Family::UniformAnnulus { inner, outer } => {
            for i in 0..n {
                let theta = rng.random_range(0.0..2.0 * PI);
                let r = rng.random_range(inner * inner..outer * outer).sqrt();
                x[[i, 0]] = r * theta.cos();
                x[[i, 1]] = r * theta.sin();
                labels.push(0);
            }
        }
        Family::CircleManifoldNoise {
            radius,
            concentration,
            eta,
            noise_half_width,
            ..
        } => {
            for i in 0..n {
                if rng.random::<f64>() < *eta {
                    for j in 0..dim {
                        x[[i, j]] = rng.random_range(-noise_half_width..*noise_half_width);
                    }
                    labels.push(1);
                } else {
                    // rejection sampling from (1 + κ cos θ) / (1 + κ)
                    let theta = loop {
                        let t = rng.random_range(-PI..PI);
                        let accept = (1.0 + concentration * t.cos()) / (1.0 + concentration);
                        if rng.random::<f64>() < accept {
                            break t;
                        }
                    };
                    x[[i, 0]] = radius * theta.cos();
                    x[[i, 1]] = radius * theta.sin();
                    labels.push(0);
                }
            }
        }
    }
    LabeledDataset::new(x, labels)
}

/// Bayes-optimal label for a Gaussian mixture: the component maximizing
/// `weight · density`, ties to the smallest index.
pub fn bayes_label(spec: &SyntheticSpec, x: &[f64]) -> Result<usize> {
    let Family::GaussianMixture { components } = &spec.family else {
        return Err(Error::InvalidSpec(
            "a closed-form Bayes rule needs a Gaussian mixture".into(),
        ));
    };
    let mut best = (0, f64::NEG_INFINITY);
    for (l, c) in components.iter().enumerate() {
        let sq: f64 = c.mean.iter().zip(x).map(|(m, v)| (v - m) * (v - m)).sum();
        let log_p = c.weight.ln() - c.mean.len() as f64 * c.std.ln() - sq / (2.0 * c.std * c.std);
        if log_p > best.1 {
            best = (l, log_p);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_sample_mean() {
        let ds = generate(&SyntheticSpec::standard_gaussian_2d(3), 10_000).unwrap();
        let mean = ds.features().mean_axis(ndarray::Axis(0)).unwrap();
        assert!(mean[0].abs() < 0.05 && mean[1].abs() < 0.05, "{mean}");
    }

    #[test]
    fn noiseless_circle_points_lie_on_circle() {
        let ds = generate(&SyntheticSpec::circle_with_noise(5, 0.0, 1), 2000).unwrap();
        for row in ds.features().outer_iter() {
            let r = (row[0] * row[0] + row[1] * row[1]).sqrt();
            assert!((r - 1.0).abs() <= 1e-12);
            assert!(row.iter().skip(2).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::circle_with_noise(4, 0.2, 17);
        assert_eq!(generate(&spec, 300).unwrap(), generate(&spec, 300).unwrap());
        let annulus = SyntheticSpec {
            family: Family::UniformAnnulus { inner: 1.0, outer: 2.0 },
            seed: 4,
        };
        let a = generate(&annulus, 500).unwrap();
        assert_eq!(a, generate(&annulus, 500).unwrap());
        for row in a.features().outer_iter() {
            let r = row[0].hypot(row[1]);
            assert!((1.0..=2.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SyntheticSpec::circle_with_noise(1, 0.1, 0);
        assert!(generate(&spec, 10).is_err());
        spec = SyntheticSpec::circle_with_noise(3, 1.0, 0);
        assert!(generate(&spec, 10).is_err());
        let spec = SyntheticSpec {
            family: Family::GaussianMixture {
                components: vec![GaussianComponent {
                    mean: vec![0.0],
                    std: 1.0,
                    weight: 0.7,
                }],
            },
            seed: 0,
        };
        assert!(matches!(generate(&spec, 10), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn bayes_rule_midpoint() {
        let spec = SyntheticSpec::two_gaussians_1d(0.0, 4.0, 1.0, 0);
        assert_eq!(bayes_label(&spec, &[1.9]).unwrap(), 0);
        assert_eq!(bayes_label(&spec, &[2.1]).unwrap(), 1);
    }
}
