//! Conditional measures on stable segments, realized as tube projections.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AtomicMeasure;
use crate::error::{Error, Result};
use crate::models::EndomorphismModel;
use crate::point::Point;
use crate::stable::{stable_direction, StableDirection};

/// Fewest slice atoms a dimension fit accepts.
pub const MIN_SLICE_ATOMS: usize = 50;

/// Euler steps per half segment.
const EULER_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceMeasure {
    pub center: Point,
    pub direction: StableDirection,
    pub half_length: f64,
    pub tube_width: f64,
    /// Arc positions in `[-r, r]`, ascending.
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SliceMeasure {
    /// Sort by position and renormalize.
    pub fn from_parts(
        center: Point,
        direction: StableDirection,
        half_length: f64,
        tube_width: f64,
        mut atoms: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySlice(center));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let (positions, weights) = atoms.into_iter().map(|(s, w)| (s, w / total)).unzip();
        Ok(SliceMeasure { center, direction, half_length, tube_width, positions, weights })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.weights.iter().map(|w| {
                acc += w;
                acc
            }))
            .collect()
    }

    /// Mass of the open interval `(y - rho, y + rho)`.
    pub fn mass(&self, y: f64, rho: f64) -> f64 {
        self.mass_with(&self.cumulative(), y, rho)
    }

    fn mass_with(&self, cum: &[f64], y: f64, rho: f64) -> f64 {
        let lo = self.positions.partition_point(|&s| s <= y - rho);
        let hi = self.positions.partition_point(|&s| s < y + rho);
        if hi <= lo {
            0.0
        } else {
            cum[hi] - cum[lo]
        }
    }

    /// Kolmogorov-Smirnov distance to the uniform law on `[-r, r]`.
    pub fn ks_uniform(&self) -> f64 {
        let r = self.half_length;
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for (s, w) in self.positions.iter().zip(&self.weights) {
            let u = ((s + r) / (2.0 * r)).clamp(0.0, 1.0);
            worst = worst.max((u - acc).abs());
            acc += w;
            worst = worst.max((acc - u).abs());
        }
        worst
    }
}

/// Kolmogorov-Smirnov distance between two slice measures.
pub fn ks_distance(a: &SliceMeasure, b: &SliceMeasure) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut worst: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let sa = a.positions.get(i).copied().unwrap_or(f64::INFINITY);
        let sb = b.positions.get(j).copied().unwrap_or(f64::INFINITY);
        let s = sa.min(sb);
        while i < a.len() && a.positions[i] == s {
            fa += a.weights[i];
            i += 1;
        }
        while j < b.len() && b.positions[j] == s {
            fb += b.weights[j];
            j += 1;
        }
        worst = worst.max((fa - fb).abs());
    }
    worst
}

/// Polyline in lift coordinates relative to the slice center, with arc positions.
fn stable_segment(
    model: &EndomorphismModel,
    center: &Point,
    dir: &StableDirection,
    r: f64,
    horizon: usize,
) -> Result<(Vec<Vector3<f64>>, Vec<f64>)> {
    if model.exact_stable_direction().is_some() {
        return Ok((vec![-r * dir.vector, r * dir.vector], vec![-r, r]));
    }
    let h = r / EULER_STEPS as f64;
    let mut halves = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let mut offset = Vector3::zeros();
        let mut v = sign * dir.vector;
        let mut verts = Vec::with_capacity(EULER_STEPS);
        for _ in 0..EULER_STEPS {
            offset += h * v;
            verts.push(offset);
            let next = stable_direction(model, &center.translate(&offset), horizon)?.vector;
            v = if next.dot(&v) < 0.0 { -next } else { next };
        }
        halves.push(verts);
    }
    let back = halves.pop().unwrap();
    let fwd = halves.pop().unwrap();
    let mut verts: Vec<Vector3<f64>> = back.into_iter().rev().collect();
    verts.push(Vector3::zeros());
    verts.extend(fwd);
    let arcs = (0..verts.len()).map(|i| -r + i as f64 * h).collect();
    Ok((verts, arcs))
}

/// Project `d` onto the polyline; `None` if the foot lies beyond either end.
fn project(d: &Vector3<f64>, verts: &[Vector3<f64>], arcs: &[f64]) -> Option<(f64, f64)> {
    let last = verts.len() - 2;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=last {
        let a = verts[i];
        let seg = verts[i + 1] - a;
        let len2 = seg.norm_squared();
        let t = (d - a).dot(&seg) / len2;
        if (i == 0 && t < 0.0) || (i == last && t > 1.0) {
            continue;
        }
        let t = t.clamp(0.0, 1.0);
        let dist = (d - a - t * seg).norm();
        if best.is_none_or(|(bd, _)| dist < bd) {
            best = Some((dist, arcs[i] + t * (arcs[i + 1] - arcs[i])));
        }
    }
    best
}

/// Tube projection of `measure` onto the stable segment of half length `r` through `center`.
pub fn slice_conditional(
    measure: &AtomicMeasure,
    model: &EndomorphismModel,
    center: &Point,
    r: f64,
    w: f64,
    horizon: usize,
) -> Result<SliceMeasure> {
    if !(r > 0.0 && r < 0.45) || !(w > 0.0 && w < r) {
        return Err(Error::InvalidArgument(format!("need 0 < w < r < 0.45, got r={r}, w={w}")));
    }
    if horizon < 15 && model.exact_stable_direction().is_none() {
        return Err(Error::InvalidArgument("slice directions need horizon >= 15".into()));
    }
    let dir = stable_direction(model, center, horizon)?;
    let (verts, arcs) = stable_segment(model, center, &dir, r, horizon)?;
    let mut candidates = Vec::new();
    measure.index().for_each_candidate(center, r + w, |i| candidates.push(i));
    let atoms: Vec<(f64, f64)> = candidates
        .par_iter()
        .filter_map(|&i| {
            let p = &measure.points[i];
            let d = center.displacement_to(p);
            if d.norm() > r + w {
                return None;
            }
            let (dist, s) = project(&d, &verts, &arcs)?;
            (dist < w && s.abs() <= r).then_some((s, measure.weights[i]))
        })
        .collect();
    SliceMeasure::from_parts(*center, dir, r, w, atoms)
}

/// `r/4 * 2^-j` for `j = 0..levels`.
pub fn dyadic_grid(r: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|j| r / 4.0 * 0.5f64.powi(j as i32)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub slope: f64,
    pub intercept: f64,
    pub rho_grid: Vec<f64>,
    pub masses: Vec<f64>,
    pub r2: f64,
    pub spread_constant: f64,
}

/// Least-squares slope of `log mass` against `log rho` at arc position `y`.
///
/// Radii with zero mass are left out of the fit.
pub fn pointwise_dimension_fit(slice: &SliceMeasure, y: f64, rho_grid: &[f64]) -> Result<DimensionFit> {
    if slice.len() < MIN_SLICE_ATOMS {
        return Err(Error::InsufficientAtoms { found: slice.len(), required: MIN_SLICE_ATOMS });
    }
    if rho_grid.is_empty() || !rho_grid.iter().all(|&r| r > 0.0) || rho_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("rho grid must be positive and strictly decreasing".into()));
    }
    let cum = slice.cumulative();
    let masses: Vec<f64> = rho_grid.iter().map(|&rho| slice.mass_with(&cum, y, rho)).collect();
    let pts: Vec<(f64, f64)> =
        rho_grid.iter().zip(&masses).filter(|(_, &m)| m > 0.0).map(|(&rho, &m)| (rho.ln(), m.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientAtoms { found: pts.len(), required: 2 });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    let slope = if flat { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy <= f64::EPSILON * k { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    let scaled = rho_grid.iter().zip(&masses).filter(|(_, &m)| m > 0.0).map(|(&rho, &m)| m / rho.powf(slope));
    let (lo, hi) = scaled.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(DimensionFit { slope, intercept, rho_grid: rho_grid.to_vec(), masses, r2, spread_constant: hi / lo })
}
