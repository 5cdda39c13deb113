use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::manifold_oracle;
use super::{bayes_label, generate, oracle_high_density_set, Family, LevelSetOracle, SyntheticSpec};
use crate::density::estimate_high_density_set;
use crate::error::{Error, Result};
use crate::neighbor::NeighborIndex;
use crate::trust::{fit_trust_model, FilteringStrategy};

/// Maps a sample size to `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum KRule {
    /// `round(√n)`.
    Sqrt,
    Fixed { k: usize },
    /// `round(n^exponent)`.
    Power { exponent: f64 },
}

impl KRule {
    pub fn k(&self, n: usize) -> usize {
        let k = match *self {
            KRule::Sqrt => (n as f64).sqrt().round() as usize,
            KRule::Fixed { k } => k,
            KRule::Power { exponent } => (n as f64).powf(exponent).round() as usize,
        };
        k.clamp(1, n.max(1))
    }
}

/// Median and quartiles (linear interpolation between order statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            median: q(0.5),
            q1: q(0.25),
            q3: q(0.75),
        })
    }
}

/// splitmix64 over a base seed and two coordinates.
pub(crate) fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    mix(mix(mix(base) ^ a) ^ b.rotate_left(32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub alpha: f64,
    pub k_rule: KRule,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    /// Starting mesh spacing; refined until it is at most a tenth of the
    /// smallest observed distance. Defaults to a fortieth of the set's
    /// extent.
    pub mesh_spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub kept: Vec<usize>,
    pub distances: Vec<f64>,
    pub summary: Summary,
    /// Against the level set of the manifold density at the raw α
    /// (manifold family only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncorrected_distances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncorrected_summary: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub spec: SyntheticSpec,
    pub config: ConvergenceConfig,
    pub oracle: LevelSetOracle,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncorrected_oracle: Option<LevelSetOracle>,
    pub mesh_spacing: f64,
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceReport {
    pub fn medians(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.summary.median).collect()
    }

    pub fn uncorrected_medians(&self) -> Option<Vec<f64>> {
        self.points
            .iter()
            .map(|p| p.uncorrected_summary.map(|s| s.median))
            .collect()
    }
}

/// Kept points of one trial.
struct Trial {
    seed: u64,
    kept: Vec<f64>,
}

/// `d_H` between the oracle set and a point cloud: the estimate-to-set
/// direction is analytic, the set-to-estimate direction goes through the
/// mesh.
fn hausdorff_to_oracle(
    oracle: &LevelSetOracle,
    mesh: ndarray::ArrayView2<'_, f64>,
    points: &[f64],
    dim: usize,
) -> Result<f64> {
    let outward = points
        .chunks(dim)
        .map(|p| oracle.distance(p))
        .fold(0.0f64, f64::max);
    let cloud = NeighborIndex::build(
        ndarray::ArrayView2::from_shape((points.len() / dim, dim), points)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?,
    )?;
    let inward = cloud.directed_hausdorff(mesh)?;
    Ok(outward.max(inward))
}

fn extent(oracle: &LevelSetOracle) -> f64 {
    match &oracle.set {
        super::LevelSet::Ball { radius, .. } => *radius,
        super::LevelSet::Annulus { outer, .. } => *outer,
        super::LevelSet::Arc { radius, .. } => *radius,
    }
}

/// Runs the level-set estimator on fresh samples for every `n` in the grid
/// and reports `d_H` to the analytic level set.
pub fn hausdorff_convergence_experiment(
    spec: &SyntheticSpec,
    config: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    spec.validate()?;
    if config.trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if config.n_grid.is_empty() || config.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_grid", "must be nonempty and strictly increasing"));
    }
    if config.n_grid[0] < 2 {
        return Err(Error::invalid("n_grid", "sizes must be at least 2"));
    }
    let oracle = oracle_high_density_set(spec, config.alpha)?;
    let uncorrected = match spec.family {
        Family::CircleManifoldNoise { .. } => {
            Some(manifold_oracle(spec, config.alpha, config.alpha)?)
        }
        _ => None,
    };
    let dim = spec.dim();

    let jobs: Vec<(usize, usize)> = (0..config.n_grid.len())
        .flat_map(|g| (0..config.trials).map(move |t| (g, t)))
        .collect();
    let trials: Vec<Trial> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let n = config.n_grid[g];
            let seed = derive_seed(spec.seed, n as u64, t as u64);
            let ds = generate(&spec.with_seed(seed), n)?;
            let set = estimate_high_density_set(ds.features(), config.alpha, config.k_rule.k(n))?;
            let mut kept = Vec::with_capacity(set.kept_indices.len() * dim);
            for &i in &set.kept_indices {
                kept.extend(ds.row(i).iter());
            }
            Ok(Trial { seed, kept })
        })
        .collect::<Result<_>>()?;

    let mut spacing = config.mesh_spacing.unwrap_or(extent(&oracle) / 40.0);
    if spacing.is_nan() || spacing <= 0.0 {
        return Err(Error::invalid("mesh_spacing", "must be positive"));
    }
    let measure = |o: &LevelSetOracle, spacing: f64| -> Result<Vec<f64>> {
        let mesh = o.mesh(spacing)?;
        trials
            .iter()
            .map(|t| hausdorff_to_oracle(o, mesh.view(), &t.kept, dim))
            .collect()
    };
    let mut distances = measure(&oracle, spacing)?;
    for _ in 0..8 {
        let smallest = distances.iter().copied().fold(f64::INFINITY, f64::min);
        if smallest <= 0.0 || spacing <= smallest / 10.0 {
            break;
        }
        spacing = smallest / 10.0;
        distances = measure(&oracle, spacing)?;
    }
    let uncorrected_distances = match &uncorrected {
        Some(o) => Some(measure(o, spacing)?),
        None => None,
    };

    let points = config
        .n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let range = g * config.trials..(g + 1) * config.trials;
            let d = distances[range.clone()].to_vec();
            let u = uncorrected_distances.as_ref().map(|u| u[range.clone()].to_vec());
            ConvergencePoint {
                n,
                k: config.k_rule.k(n),
                seeds: trials[range.clone()].iter().map(|t| t.seed).collect(),
                kept: trials[range].iter().map(|t| t.kept.len() / dim).collect(),
                summary: Summary::of(&d).expect("trials > 0"),
                distances: d,
                uncorrected_summary: u.as_deref().and_then(Summary::of),
                uncorrected_distances: u,
            }
        })
        .collect();
    Ok(ConvergenceReport {
        spec: spec.clone(),
        config: config.clone(),
        oracle,
        uncorrected_oracle: uncorrected,
        mesh_spacing: spacing,
        points,
    })
}

/// Classifier whose trust scores are examined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hypothesis {
    /// Always predicts the given label.
    Constant { label: usize },
    /// The analytic Bayes rule.
    Bayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub k: usize,
    /// Training size; the same number of fresh test points is drawn.
    pub n: usize,
    pub trials: usize,
    pub hypothesis: Hypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesTrial {
    pub seed: u64,
    /// Test points with `ξ < 1 − γ`.
    pub low_count: usize,
    /// Among those, the fraction where the hypothesis disagrees with Bayes.
    pub low_disagreement: Option<f64>,
    /// Test points with `1/ξ < 1 − γ`.
    pub high_count: usize,
    /// Among those, the fraction where the hypothesis agrees with Bayes.
    pub high_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesReport {
    pub spec: SyntheticSpec,
    pub config: BayesConfig,
    pub trials: Vec<BayesTrial>,
    /// Medians over trials where the predicate selected any point.
    pub median_low_disagreement: Option<f64>,
    pub median_high_agreement: Option<f64>,
}

/// Checks that low trust scores flag disagreement with the Bayes rule and
/// high ones flag agreement.
pub fn bayes_agreement_experiment(spec: &SyntheticSpec, config: &BayesConfig) -> Result<BayesReport> {
    spec.validate()?;
    let Family::GaussianMixture { components } = &spec.family else {
        return Err(Error::InvalidSpec(
            "a closed-form Bayes rule needs a Gaussian mixture".into(),
        ));
    };
    if components.len() < 2 {
        return Err(Error::TooFewClasses {
            found: components.len(),
        });
    }
    if !(0.0..1.0).contains(&config.gamma) {
        return Err(Error::invalid("gamma", format!("{} is not in [0, 1)", config.gamma)));
    }
    if config.trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if let Hypothesis::Constant { label } = config.hypothesis {
        if label >= components.len() {
            return Err(Error::LabelOutOfRange {
                label,
                n_classes: components.len(),
            });
        }
    }
    let cut = 1.0 - config.gamma;

    let trials: Vec<BayesTrial> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(spec.seed, config.n as u64, t as u64);
            let train = generate(&spec.with_seed(seed), config.n)?;
            let test = generate(&spec.with_seed(derive_seed(seed, 1, 0)), config.n)?;
            let model = fit_trust_model(&train, config.alpha, config.k, FilteringStrategy::Density)?;
            let (mut low, mut low_dis, mut high, mut high_agree) = (0usize, 0usize, 0usize, 0usize);
            for x in test.features().outer_iter() {
                let x = x.as_slice().expect("contiguous row");
                let bayes = bayes_label(spec, x)?;
                let h = match config.hypothesis {
                    Hypothesis::Constant { label } => label,
                    Hypothesis::Bayes => bayes,
                };
                let xi = model.trust_score(x, h)?.value;
                if xi < cut {
                    low += 1;
                    low_dis += usize::from(h != bayes);
                }
                if 1.0 / xi < cut {
                    high += 1;
                    high_agree += usize::from(h == bayes);
                }
            }
            let frac = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
            Ok(BayesTrial {
                seed,
                low_count: low,
                low_disagreement: frac(low_dis, low),
                high_count: high,
                high_agreement: frac(high_agree, high),
            })
        })
        .collect::<Result<_>>()?;

    let median = |f: fn(&BayesTrial) -> Option<f64>| {
        let v: Vec<f64> = trials.iter().filter_map(f).collect();
        Summary::of(&v).map(|s| s.median)
    };
    Ok(BayesReport {
        spec: spec.clone(),
        config: config.clone(),
        median_low_disagreement: median(|t| t.low_disagreement),
        median_high_agreement: median(|t| t.high_agreement),
        trials,
    })
}
