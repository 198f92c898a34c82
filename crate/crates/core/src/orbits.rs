//! Periodic points and Birkhoff sums.
//!
//! Linear toral factors are solved exactly: the fixed points of `f_A^n` are the
//! points `(A^n - I)^{-1} k mod 1`, one per coset of `Z^2 / (A^n - I) Z^2`.
//! Perturbed factors continue each of these in the perturbation parameter by
//! multiple-shooting Newton steps.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::solve_on_torus;
use crate::models::{EndomorphismModel, TorusMap, EPS_STEP, MAX_PERTURBATION};
use crate::point::{wrap_diff, wrap_unit, Point};
use crate::potential::Potential;
use crate::stable::{stable_log_derivative, DEFAULT_HORIZON};
use crate::ATOM_BUDGET;

const SHOOTING_TOL: f64 = 1e-12;
const SHOOTING_ACCEPT: f64 = 1e-11;
const SHOOTING_MAX_ITER: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitMethod {
    ExactLattice,
    NewtonContinuation,
}

/// All fixed points of `f^n`, sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbitSet {
    pub n: usize,
    pub points: Vec<Point>,
    pub method: OrbitMethod,
}

impl PeriodicOrbitSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `next[i]` is the index of `f(points[i])`.
    pub fn successors(&self, model: &EndomorphismModel) -> Result<Vec<usize>> {
        let index = crate::grid::GridIndex::build(&self.points, 4);
        self.points
            .par_iter()
            .map(|p| {
                let q = model.apply(p);
                let mut best: Option<(usize, f64)> = None;
                index.for_each_candidate(&q, 1e-7, |j| {
                    let d = self.points[j].distance(&q);
                    if d < 1e-7 && best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                });
                best.map(|b| b.0).ok_or_else(|| Error::InvalidArgument(format!("image of {p:?} is not in the set")))
            })
            .collect()
    }

    /// Smallest torus distance between two distinct points of the set.
    pub fn min_pairwise_distance(&self) -> f64 {
        if self.points.len() < 2 {
            return f64::INFINITY;
        }
        let probe = 4.0 / (self.points.len() as f64).sqrt();
        let index = crate::grid::GridIndex::build(&self.points, 4);
        let best = self
            .points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut best = f64::INFINITY;
                index.for_each_candidate(p, probe, |j| {
                    if j != i {
                        best = best.min(p.distance(&self.points[j]));
                    }
                });
                best
            })
            .reduce(|| f64::INFINITY, f64::min);
        if best.is_finite() {
            best
        } else {
            // sparse sets: fall back to the full scan
            let mut best = f64::INFINITY;
            for i in 0..self.points.len() {
                for j in 0..i {
                    best = best.min(self.points[i].distance(&self.points[j]));
                }
            }
            best
        }
    }
}

/// `Sum_{i<n} phi(f^i x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffSum {
    pub value: f64,
    pub n: usize,
    pub base_point: Point,
}

/// Predicted `#Fix(f^n)` without enumerating.
pub fn predicted_count(model: &EndomorphismModel, n: usize) -> u128 {
    let n32 = n as u32;
    let circle = |k: u32| (k as u128).saturating_pow(n32).saturating_sub(1);
    match (model.torus(), model.circle_multiplier()) {
        (Some(t), Some(k)) => circle(k).saturating_mul(t.matrix().periodic_count(n32)),
        (Some(t), None) => t.matrix().periodic_count(n32),
        (None, Some(k)) => circle(k),
        (None, None) => unreachable!("every model has a torus or a circle factor"),
    }
}

/// Enumerate `Fix(f^n)` on the basic set.
pub fn fixed_points(model: &EndomorphismModel, n: usize) -> Result<PeriodicOrbitSet> {
    fixed_points_with_budget(model, n, ATOM_BUDGET)
}

pub fn fixed_points_with_budget(model: &EndomorphismModel, n: usize, budget: u128) -> Result<PeriodicOrbitSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let predicted = predicted_count(model, n);
    if predicted > budget {
        return Err(Error::BudgetExceeded { predicted, budget });
    }
    let circle: Vec<f64> = match model.circle_multiplier() {
        Some(k) => {
            let m = (k as u64).pow(n as u32) - 1;
            (0..m).map(|j| j as f64 / m as f64).collect()
        }
        None => Vec::new(),
    };
    let (torus_pts, method) = match model.torus() {
        Some(t) => torus_fixed_points(t, n)?,
        None => (Vec::new(), OrbitMethod::ExactLattice),
    };
    let mut points: Vec<Point> = match (model.torus(), model.circle_multiplier()) {
        (Some(_), Some(_)) => {
            circle.iter().flat_map(|&th| torus_pts.iter().map(move |w| Point::new(&[th, w[0], w[1]]))).collect()
        }
        (Some(_), None) => torus_pts.iter().map(|w| Point::new(w)).collect(),
        (None, Some(_)) => {
            let p_c = model.attracting_point().expect("attractor model");
            circle.iter().map(|&th| Point::new(&[p_c, th])).collect()
        }
        (None, None) => unreachable!(),
    };
    points.par_sort_unstable_by(|a, b| a.lex_cmp(b));
    Ok(PeriodicOrbitSet { n, points, method })
}

fn torus_fixed_points(torus: &TorusMap, n: usize) -> Result<(Vec<[f64; 2]>, OrbitMethod)> {
    let mut b = torus.matrix().pow(n as u32);
    b[0][0] -= 1;
    b[1][1] -= 1;
    let linear = solve_on_torus(&b, None);
    if torus.eps() == 0.0 {
        return Ok((linear, OrbitMethod::ExactLattice));
    }
    let base = torus.with_eps_unchecked(0.0);
    let out = linear
        .par_iter()
        .map(|w| continue_torus_orbit(&base, Vector2::new(w[0], w[1]), n, torus.eps()))
        .map(|r| r.map(|v| [wrap_unit(v[0]), wrap_unit(v[1])]))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, OrbitMethod::NewtonContinuation))
}

/// Continue a period-`n` point of the unperturbed model to perturbation size `eps_target`.
///
/// The model's own perturbation size is ignored; only its matrix is used. For product
/// models the circle coordinate of `seed` is carried over unchanged.
pub fn newton_continuation(model: &EndomorphismModel, seed: &Point, n: usize, eps_target: f64) -> Result<Point> {
    let torus = model.torus().ok_or_else(|| Error::InvalidArgument("continuation needs a toral factor".into()))?;
    if !(0.0..=MAX_PERTURBATION).contains(&eps_target) {
        return Err(Error::InvalidArgument(format!("eps_target {eps_target} out of range")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let off = model.torus_offset();
    let base = torus.with_eps_unchecked(0.0);
    let w = Vector2::new(seed.coord(off), seed.coord(off + 1));
    if eps_target == 0.0 {
        return Ok(*seed);
    }
    let v = continue_torus_orbit(&base, w, n, eps_target)?;
    let mut coords = seed.coords().to_vec();
    coords[off] = v[0];
    coords[off + 1] = v[1];
    Ok(Point::new(&coords))
}

fn wrap2(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(wrap_diff(v[0]), wrap_diff(v[1]))
}

fn continue_torus_orbit(base: &TorusMap, seed: Vector2<f64>, n: usize, eps_target: f64) -> Result<Vector2<f64>> {
    let mut orbit = Vec::with_capacity(n);
    let mut y = seed;
    for _ in 0..n {
        orbit.push(y);
        let z = base.apply_lift(&y);
        y = Vector2::new(wrap_unit(z[0]), wrap_unit(z[1]));
    }
    let steps = (eps_target / EPS_STEP).ceil().max(1.0) as usize;
    for s in 1..=steps {
        let eps = eps_target * s as f64 / steps as f64;
        let stage = base.with_eps_unchecked(eps);
        if !polish_orbit(&stage, &mut orbit) {
            return Err(Error::ContinuationFailure { seed: Point::new(seed.as_slice()), eps });
        }
    }
    Ok(orbit[0])
}

/// Multiple-shooting Newton on `f(y_i) = y_{i+1}` (indices mod n), in place.
///
/// The cyclic block system `D_i d_i - d_{i+1} = -G_i` is condensed to
/// `(I - M) d_0 = c` with `M = D_{n-1}...D_0`, then propagated forward.
fn polish_orbit(map: &TorusMap, orbit: &mut [Vector2<f64>]) -> bool {
    let n = orbit.len();
    let residuals = |orbit: &[Vector2<f64>]| -> Vec<Vector2<f64>> {
        (0..n).map(|i| wrap2(map.apply_lift(&orbit[i]) - orbit[(i + 1) % n])).collect()
    };
    let max_norm = |g: &[Vector2<f64>]| g.iter().map(|v| v.amax()).fold(0.0, f64::max);
    let mut g = residuals(orbit);
    for _ in 0..SHOOTING_MAX_ITER {
        let err = max_norm(&g);
        if err < SHOOTING_TOL {
            return true;
        }
        let jac: Vec<Matrix2<f64>> = orbit.iter().map(|y| map.jacobian(y)).collect();
        let mut c = Vector2::zeros();
        let mut m = Matrix2::identity();
        for i in 0..n {
            c = jac[i] * c + g[i];
            m = jac[i] * m;
        }
        let Some(d0) = (Matrix2::identity() - m).lu().solve(&c) else {
            return false;
        };
        let mut d = d0;
        let mut step = Vec::with_capacity(n);
        for i in 0..n {
            step.push(d);
            d = jac[i] * d + g[i];
        }
        // damp if the full step does not reduce the residual
        let mut lambda = 1.0;
        loop {
            let trial: Vec<Vector2<f64>> = orbit.iter().zip(&step).map(|(y, s)| y + lambda * s).collect();
            let tg = residuals(&trial);
            if max_norm(&tg) < err || lambda < 1e-3 {
                orbit.copy_from_slice(&trial);
                g = tg;
                break;
            }
            lambda *= 0.5;
        }
    }
    max_norm(&g) < SHOOTING_ACCEPT
}

/// Birkhoff sum of `potential` over the first `n` points of the orbit of `x`.
pub fn birkhoff_sum(model: &EndomorphismModel, potential: &Potential, x: &Point, n: usize) -> Result<BirkhoffSum> {
    birkhoff_sum_with_horizon(model, potential, x, n, DEFAULT_HORIZON)
}

pub fn birkhoff_sum_with_horizon(
    model: &EndomorphismModel,
    potential: &Potential,
    x: &Point,
    n: usize,
    horizon: usize,
) -> Result<BirkhoffSum> {
    let mut p = *x;
    let mut value = 0.0;
    for _ in 0..n {
        value += potential.evaluate(model, &p, horizon)?;
        p = model.apply(&p);
    }
    Ok(BirkhoffSum { value, n, base_point: *x })
}

/// `S_n Phi^s` at every point of a periodic set, in the set's order.
///
/// For a point of period `n` the sum is the log modulus of the contracting
/// eigenvalue of `Df^n(x)` restricted to the toral factor, since `E^s` is invariant.
/// Orbits are followed through the set itself, so every point of a cycle uses
/// the same Jacobians.
pub fn stable_sums(model: &EndomorphismModel, set: &PeriodicOrbitSet, horizon: usize) -> Result<Vec<f64>> {
    if model.is_linear() || model.attracting_point().is_some() {
        // constant along the basic set
        let phi = match set.points.first() {
            Some(p) => stable_log_derivative(model, p, horizon)?,
            None => return Ok(Vec::new()),
        };
        return Ok(vec![phi * set.n as f64; set.len()]);
    }
    let off = model.torus_offset();
    let next = set.successors(model)?;
    let jac: Vec<Matrix2<f64>> =
        set.points.par_iter().map(|p| model.differential(p).fixed_view::<2, 2>(off, off).into_owned()).collect();
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let mut m = Matrix2::identity();
            let mut det = 1.0;
            let mut j = i;
            for _ in 0..set.n {
                m = jac[j] * m;
                det *= jac[j].determinant();
                j = next[j];
            }
            contracting_eigenvalue(m.trace(), det)
                .map(|l| l.abs().ln())
                .ok_or(Error::DegenerateSingularValues { log_gap: 0.0 })
        })
        .collect()
}

/// Eigenvalue of smaller modulus of a real 2x2 matrix with real spectrum, from its
/// trace and determinant. The determinant is passed in because forming it from a
/// product with large entries cancels badly.
fn contracting_eigenvalue(tr: f64, det: f64) -> Option<f64> {
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 {
        return None;
    }
    let big = 0.5 * (tr + tr.signum() * disc.sqrt());
    Some(det / big)
}
