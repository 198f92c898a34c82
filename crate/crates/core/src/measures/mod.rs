//! Periodic-point approximations of equilibrium measures, stable slices of
//! them, and the empirical checks built on top.

mod checks;
mod slice;

use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridIndex;
use crate::models::EndomorphismModel;
use crate::orbits::{fixed_points, stable_sums, PeriodicOrbitSet};
use crate::point::Point;
use crate::potential::Potential;
use crate::pressure::log_sum_exp;
use crate::stable::DEFAULT_HORIZON;

pub use checks::{
    absolute_continuity_diagnostic, bowen_ball_check, component_comparison_check, constant_to_one_check,
    geometric_check_on, geometric_probability_check, max_stable_dim_check, slice_survey, ACDiagnostic, AcConfig,
    BowenBallReport, BowenBallRow, ComponentCell, ComponentReport, ConstantToOneReport, DegreeClaim, GeometricVerdict,
    MaxDimEntry, MaxDimReport, SliceSampling, SliceSurvey, SurveyFit,
};
pub use slice::{
    dyadic_grid, ks_distance, pointwise_dimension_fit, slice_conditional, DimensionFit, SliceMeasure, MIN_SLICE_ATOMS,
};

/// Tolerance for identifying an image point with an atom.
const ATOM_MATCH_TOL: f64 = 1e-7;

/// Weighted periodic points of one period.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub n: usize,
    pub potential_tag: String,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    #[serde(skip)]
    index: OnceLock<GridIndex>,
}

impl AtomicMeasure {
    /// Atoms with weights proportional to `exp(S_n phi)`, given `S_n phi` per point.
    pub fn from_log_weights(n: usize, tag: String, points: Vec<Point>, log_weights: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() != log_weights.len() {
            return Err(Error::InvalidArgument("atoms and weights must be nonempty and aligned".into()));
        }
        let lse = log_sum_exp(log_weights);
        let weights = log_weights.par_iter().map(|l| (l - lse).exp()).collect();
        Ok(AtomicMeasure { n, potential_tag: tag, points, weights, index: OnceLock::new() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn index(&self) -> &GridIndex {
        self.index.get_or_init(|| GridIndex::build(&self.points, 4))
    }

    /// Index of the atom within `tol` of `p`, if any.
    pub fn find(&self, p: &Point, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        self.index().for_each_candidate(p, tol, |i| {
            let d = self.points[i].distance(p);
            if d < tol && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        });
        best.map(|(i, _)| i)
    }

    /// `forward[i]` is the atom `f(points[i])`.
    pub fn forward_map(&self, model: &EndomorphismModel) -> Result<Vec<usize>> {
        self.points
            .par_iter()
            .map(|p| {
                let q = model.apply(p);
                self.find(&q, ATOM_MATCH_TOL)
                    .ok_or_else(|| Error::InvalidArgument(format!("atom set not invariant at {p:?}")))
            })
            .collect()
    }

    pub fn sampler(&self) -> Result<WeightedIndex<f64>> {
        WeightedIndex::new(&self.weights).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, sampler: &WeightedIndex<f64>, rng: &mut R) -> usize {
        sampler.sample(rng)
    }
}

/// `mu~_n`: atoms `Fix(f^n)` weighted by `exp(S_n phi) / P(f, phi, n)`.
pub fn equilibrium_atoms(model: &EndomorphismModel, potential: &Potential, n: usize) -> Result<AtomicMeasure> {
    let set = fixed_points(model, n)?;
    atoms_from_orbits(model, potential, set)
}

pub fn atoms_from_orbits(
    model: &EndomorphismModel,
    potential: &Potential,
    set: PeriodicOrbitSet,
) -> Result<AtomicMeasure> {
    let n = set.n;
    let logs: Vec<f64> = if potential.needs_stable() {
        stable_sums(model, &set, DEFAULT_HORIZON)?.into_iter().map(|s| potential.combine(s, n)).collect()
    } else {
        vec![potential.combine(0.0, n); set.len()]
    };
    AtomicMeasure::from_log_weights(n, potential.to_string(), set.points, &logs)
}

/// Total weight of atoms within distance `rho` of `center`.
pub fn ball_mass(measure: &AtomicMeasure, center: &Point, rho: f64) -> f64 {
    let mut mass = 0.0;
    measure.index().for_each_candidate(center, rho, |i| {
        if measure.points[i].distance(center) < rho {
            mass += measure.weights[i];
        }
    });
    mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntMatrix2;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn linear() -> EndomorphismModel {
        EndomorphismModel::toral_linear(IntMatrix2::standard())
    }

    #[test]
    fn constant_potential_gives_uniform_weights() {
        let mu = equilibrium_atoms(&linear(), &Potential::constant(0.4), 4).unwrap();
        let w = 1.0 / mu.len() as f64;
        assert!(mu.weights.iter().all(|&x| (x - w).abs() < 1e-15));
        assert_abs_diff_eq!(mu.total_weight(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn linear_stable_measure_is_close_to_haar() {
        let mu = equilibrium_atoms(&linear(), &Potential::scaled_stable(1.0), 8).unwrap();
        let mut quarters = [0.0; 4];
        for (p, w) in mu.points.iter().zip(&mu.weights) {
            let q = (p.coord(0) >= 0.5) as usize * 2 + (p.coord(1) >= 0.5) as usize;
            quarters[q] += w;
        }
        for q in quarters {
            assert!((q - 0.25).abs() < 0.05, "{quarters:?}");
        }
        let mass = ball_mass(&mu, &Point::new(&[0.3, 0.6]), 0.1);
        assert!((mass - std::f64::consts::PI * 0.01).abs() < 0.01, "{mass}");
    }

    #[test]
    fn ball_mass_limits() {
        let mu = equilibrium_atoms(&linear(), &Potential::zero(), 5).unwrap();
        assert_abs_diff_eq!(ball_mass(&mu, &Point::new(&[0.1, 0.9]), 1.0), 1.0, epsilon = 1e-10);
        let p = mu.points[17];
        assert_eq!(ball_mass(&mu, &p, 1e-6), mu.weights[17]);
    }

    #[test]
    fn atoms_are_permuted_by_the_map() {
        let model = EndomorphismModel::toral_perturbed(IntMatrix2::standard(), 0.02).unwrap();
        let mu = equilibrium_atoms(&model, &Potential::stable(), 5).unwrap();
        let fwd = mu.forward_map(&model).unwrap();
        let mut seen = vec![false; fwd.len()];
        for &j in &fwd {
            assert!(!seen[j]);
            seen[j] = true;
        }
        let pushed: f64 = fwd.iter().map(|&j| mu.weights[j]).sum();
        assert_abs_diff_eq!(pushed, 1.0, epsilon = 1e-10);
        let worst =
            fwd.iter().enumerate().map(|(i, &j)| (mu.weights[i] / mu.weights[j]).ln().abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst:e}");
    }

    #[test]
    fn product_and_attractor_atoms_normalize() {
        let a = IntMatrix2::standard();
        let models = [
            EndomorphismModel::product_power_toral(3, a, 0.01).unwrap(),
            EndomorphismModel::product_attractor_circle(0.1).unwrap(),
        ];
        for m in &models {
            let mu = equilibrium_atoms(m, &Potential::scaled_stable(0.7), 3).unwrap();
            assert_abs_diff_eq!(mu.total_weight(), 1.0, epsilon = 1e-10);
            assert!(mu.weights.iter().all(|&w| w > 0.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ball_mass_is_monotone(x in 0.0..1.0f64, y in 0.0..1.0f64, r1 in 0.001..0.5f64, r2 in 0.001..0.5f64) {
            let mu = equilibrium_atoms(&linear(), &Potential::zero(), 5).unwrap();
            let c = Point::new(&[x, y]);
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(ball_mass(&mu, &c, lo) <= ball_mass(&mu, &c, hi) + 1e-15);
        }

        #[test]
        fn weights_normalize(t in -2.0..3.0f64, c in -5.0..5.0f64) {
            let model = EndomorphismModel::toral_perturbed(IntMatrix2::standard(), 0.01).unwrap();
            let mu = equilibrium_atoms(&model, &Potential::scaled_stable(t).plus(c), 3).unwrap();
            prop_assert!((mu.total_weight() - 1.0).abs() < 1e-10);
        }
    }
}
