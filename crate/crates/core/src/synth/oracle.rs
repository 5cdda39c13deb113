use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{Family, SyntheticSpec};
use crate::error::{Error, Result};

/// Analytic shape of a density level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum LevelSet {
    /// Closed ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Closed planar annulus centered at the origin.
    Annulus { inner: f64, outer: f64 },
    /// Arc `{(R cos θ, R sin θ, 0, …) : |θ| ≤ half_angle}`; a full circle
    /// when `half_angle = π`.
    Arc {
        radius: f64,
        half_angle: f64,
        ambient_dim: usize,
    },
}

/// `H_α(f) = {x : f(x) ≥ λ_α}` for a synthetic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetOracle {
    pub alpha: f64,
    /// Level actually applied to the density whose level set is returned.
    /// Differs from `alpha` for the noisy-manifold family, where it is
    /// `(α − η) / (1 − η)` applied to the manifold density.
    pub effective_alpha: f64,
    /// `λ_α`.
    pub level: f64,
    pub set: LevelSet,
}

/// Membership tolerance for lower-dimensional sets.
const ON_SET_TOL: f64 = 1e-9;
/// Refuse meshes beyond this many points.
const MAX_MESH_POINTS: usize = 20_000_000;

pub fn oracle_high_density_set(spec: &SyntheticSpec, alpha: f64) -> Result<LevelSetOracle> {
    spec.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1)")));
    }
    match &spec.family {
        Family::CircleManifoldNoise { eta, .. } => {
            let corrected = ((alpha - eta) / (1.0 - eta)).max(0.0);
            manifold_oracle(spec, alpha, corrected)
        }
        _ => direct_oracle(spec, alpha),
    }
}

/// Level set of the manifold density at `manifold_alpha`, ignoring noise.
pub(crate) fn manifold_oracle(
    spec: &SyntheticSpec,
    alpha: f64,
    manifold_alpha: f64,
) -> Result<LevelSetOracle> {
    let Family::CircleManifoldNoise {
        ambient_dim,
        radius,
        concentration,
        ..
    } = spec.family
    else {
        return Err(Error::InvalidSpec("not a manifold family".into()));
    };
    let half_angle = if concentration == 0.0 || manifold_alpha <= 0.0 {
        PI
    } else {
        arc_half_angle(concentration, manifold_alpha)
    };
    let level = if concentration == 0.0 || manifold_alpha <= 0.0 {
        (1.0 - concentration) / (2.0 * PI * radius)
    } else {
        (1.0 + concentration * half_angle.cos()) / (2.0 * PI * radius)
    };
    Ok(LevelSetOracle {
        alpha,
        effective_alpha: manifold_alpha,
        level,
        set: LevelSet::Arc {
            radius,
            half_angle,
            ambient_dim,
        },
    })
}

/// Solves `(θ + κ sin θ) / π = 1 − α` for `θ ∈ [0, π]` by bisection; the
/// left side is the mass of `|θ| ≤ θ` under `(1 + κ cos θ) / 2π`.
fn arc_half_angle(kappa: f64, alpha: f64) -> f64 {
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0f64, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (mid + kappa * mid.sin()) / PI < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn direct_oracle(spec: &SyntheticSpec, alpha: f64) -> Result<LevelSetOracle> {
    match &spec.family {
        Family::GaussianMixture { components } => {
            let [c] = components.as_slice() else {
                return Err(Error::InvalidSpec(
                    "level sets are closed-form only for a single Gaussian component".into(),
                ));
            };
            let d = c.mean.len();
            // |x − μ|² / σ² ~ χ²_d; the ball holding 1 − α of the mass
            let q = if d == 2 {
                -2.0 * alpha.ln()
            } else {
                ChiSquared::new(d as f64)
                    .map_err(|e| Error::InvalidSpec(e.to_string()))?
                    .inverse_cdf(1.0 - alpha)
            };
            let radius = c.std * q.sqrt();
            let level = (2.0 * PI * c.std * c.std).powf(-(d as f64) / 2.0) * (-q / 2.0).exp();
            Ok(LevelSetOracle {
                alpha,
                effective_alpha: alpha,
                level,
                set: LevelSet::Ball {
                    center: c.mean.clone(),
                    radius,
                },
            })
        }
        Family::UniformAnnulus { inner, outer } => Ok(LevelSetOracle {
            alpha,
            effective_alpha: alpha,
            level: 1.0 / (PI * (outer * outer - inner * inner)),
            set: LevelSet::Annulus {
                inner: *inner,
                outer: *outer,
            },
        }),
        Family::CircleManifoldNoise { .. } => unreachable!("handled by manifold_oracle"),
    }
}

impl LevelSetOracle {
    pub fn dim(&self) -> usize {
        match &self.set {
            LevelSet::Ball { center, .. } => center.len(),
            LevelSet::Annulus { .. } => 2,
            LevelSet::Arc { ambient_dim, .. } => *ambient_dim,
        }
    }

    /// Euclidean distance from `x` to the set (0 inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        match &self.set {
            LevelSet::Ball { center, radius } => {
                let r = center
                    .iter()
                    .zip(x)
                    .map(|(c, v)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                (r - radius).max(0.0)
            }
            LevelSet::Annulus { inner, outer } => {
                let r = x[0].hypot(x[1]);
                (inner - r).max(r - outer).max(0.0)
            }
            LevelSet::Arc {
                radius, half_angle, ..
            } => {
                let rest: f64 = x[2..].iter().map(|v| v * v).sum();
                let planar = x[0].hypot(x[1]);
                let phi = x[1].atan2(x[0]);
                let sq = if phi.abs() <= *half_angle {
                    (planar - radius) * (planar - radius) + rest
                } else {
                    let ey = radius * half_angle.sin() * phi.signum();
                    let ex = radius * half_angle.cos();
                    (x[0] - ex) * (x[0] - ex) + (x[1] - ey) * (x[1] - ey) + rest
                };
                sq.sqrt()
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self.set {
            LevelSet::Arc { .. } => self.distance(x) <= ON_SET_TOL,
            _ => self.distance(x) == 0.0,
        }
    }

    /// Deterministic point cloud covering the set: a grid of the interior
    /// with the given spacing plus points along the boundary.
    pub fn mesh(&self, spacing: f64) -> Result<Array2<f64>> {
        if spacing.is_nan() || spacing <= 0.0 {
            return Err(Error::invalid("spacing", "must be positive"));
        }
        let mut pts: Vec<Vec<f64>> = Vec::new();
        match &self.set {
            LevelSet::Ball { center, radius } => {
                let d = center.len();
                if d > 3 {
                    return Err(Error::InvalidSpec(format!(
                        "ball meshes are supported up to 3 dimensions, not {d}"
                    )));
                }
                let steps = (radius / spacing).ceil() as i64;
                let per_axis = (2 * steps + 1) as usize;
                if per_axis.saturating_pow(d as u32) > MAX_MESH_POINTS {
                    return Err(Error::invalid("spacing", "mesh would be too large"));
                }
                grid(d, steps, spacing, &mut |offset| {
                    let sq: f64 = offset.iter().map(|v| v * v).sum();
                    if sq <= radius * radius {
                        pts.push(offset.iter().zip(center).map(|(o, c)| o + c).collect());
                    }
                });
                for dir in sphere_directions(d, *radius, spacing) {
                    pts.push(dir.iter().zip(center).map(|(u, c)| c + radius * u).collect());
                }
            }
            LevelSet::Annulus { inner, outer } => {
                let steps = (outer / spacing).ceil() as i64;
                if ((2 * steps + 1) as usize).saturating_pow(2) > MAX_MESH_POINTS {
                    return Err(Error::invalid("spacing", "mesh would be too large"));
                }
                grid(2, steps, spacing, &mut |o| {
                    let r = o[0].hypot(o[1]);
                    if r >= *inner && r <= *outer {
                        pts.push(o.to_vec());
                    }
                });
                for r in [*inner, *outer] {
                    for u in sphere_directions(2, r, spacing) {
                        pts.push(vec![r * u[0], r * u[1]]);
                    }
                }
            }
            LevelSet::Arc {
                radius,
                half_angle,
                ambient_dim,
            } => {
                let length = 2.0 * half_angle * radius;
                let m = ((length / spacing).ceil() as usize).max(1);
                for i in 0..=m {
                    let t = -half_angle + 2.0 * half_angle * i as f64 / m as f64;
                    let mut p = vec![0.0; *ambient_dim];
                    p[0] = radius * t.cos();
                    p[1] = radius * t.sin();
                    pts.push(p);
                }
            }
        }
        let d = self.dim();
        let rows = pts.len();
        Array2::from_shape_vec((rows, d), pts.into_iter().flatten().collect())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))
    }
}

/// Calls `f` on every offset of the cube grid `{-steps..=steps}^d · spacing`.
fn grid(d: usize, steps: i64, spacing: f64, f: &mut dyn FnMut(&[f64])) {
    let mut idx = vec![-steps; d];
    let mut offset = vec![0.0; d];
    loop {
        for j in 0..d {
            offset[j] = idx[j] as f64 * spacing;
        }
        f(&offset);
        let mut j = 0;
        loop {
            if j == d {
                return;
            }
            idx[j] += 1;
            if idx[j] <= steps {
                break;
            }
            idx[j] = -steps;
            j += 1;
        }
    }
}

/// Unit directions covering a sphere of radius `r` with the given spacing.
fn sphere_directions(d: usize, r: f64, spacing: f64) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => {
            let m = ((2.0 * PI * r / spacing).ceil() as usize).max(4);
            (0..m)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / m as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        _ => {
            // Fibonacci sphere
            let m = ((4.0 * PI * r * r / (spacing * spacing)).ceil() as usize).max(8);
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![rho * t.cos(), rho * t.sin(), z]
                })
                .collect()
        }
    }
}
