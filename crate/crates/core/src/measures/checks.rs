//! Empirical checks on equilibrium measures and their stable slices.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::slice::{dyadic_grid, pointwise_dimension_fit, slice_conditional, DimensionFit, MIN_SLICE_ATOMS};
use super::{equilibrium_atoms, AtomicMeasure};
use crate::error::{Error, Result};
use crate::models::{EndomorphismModel, ModelSpec};
use crate::orbits::{birkhoff_sum, predicted_count};
use crate::point::Point;
use crate::potential::Potential;
use crate::pressure::bowen_root;
use crate::stable::{stable_birkhoff, DEFAULT_HORIZON};
use crate::ATOM_BUDGET;

/// How slices and points on them are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSampling {
    pub slices: usize,
    pub points_per_slice: usize,
    pub half_length: f64,
    /// Tube width is `half_length / width_divisor`.
    pub width_divisor: f64,
    pub levels: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SliceSampling {
    fn default() -> Self {
        SliceSampling {
            slices: 20,
            points_per_slice: 10,
            half_length: 0.2,
            width_divisor: 20.0,
            levels: 7,
            horizon: DEFAULT_HORIZON,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyFit {
    pub slice: usize,
    pub center: Point,
    pub y: f64,
    pub fit: DimensionFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSurvey {
    pub fits: Vec<SurveyFit>,
    pub slices_used: usize,
    pub slices_skipped: usize,
    pub median_slope: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Dimension fits at weighted-random points of weighted-random stable slices.
///
/// Slice centers are atoms drawn by weight; points `y` are slice atoms drawn by
/// weight among those at least the largest radius away from the slice ends.
/// Slices with fewer than the minimum atom count are redrawn, up to ten times
/// the requested number of attempts.
pub fn slice_survey(measure: &AtomicMeasure, model: &EndomorphismModel, cfg: &SliceSampling) -> Result<SliceSurvey> {
    let r = cfg.half_length;
    let w = r / cfg.width_divisor;
    let grid = dyadic_grid(r, cfg.levels);
    let reach = r - grid[0];
    let sampler = measure.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut fits = Vec::new();
    let (mut used, mut skipped) = (0, 0);
    for _ in 0..cfg.slices * 10 {
        if used == cfg.slices {
            break;
        }
        let center = measure.points[measure.sample(&sampler, &mut rng)];
        let slice = match slice_conditional(measure, model, &center, r, w, cfg.horizon) {
            Ok(s) if s.len() >= MIN_SLICE_ATOMS => s,
            Ok(_) | Err(Error::EmptySlice(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let eligible: Vec<usize> = (0..slice.len()).filter(|&i| slice.positions[i].abs() <= reach).collect();
        if eligible.is_empty() {
            skipped += 1;
            continue;
        }
        let picker = rand::distr::weighted::WeightedIndex::new(eligible.iter().map(|&i| slice.weights[i]))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for _ in 0..cfg.points_per_slice {
            let y = slice.positions[eligible[rand::distr::Distribution::sample(&picker, &mut rng)]];
            let fit = pointwise_dimension_fit(&slice, y, &grid)?;
            fits.push(SurveyFit { slice: used, center, y, fit });
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientAtoms { found: 0, required: MIN_SLICE_ATOMS });
    }
    let slopes: Vec<f64> = fits.iter().map(|f| f.fit.slope).collect();
    Ok(SliceSurvey { median_slope: median(&slopes), fits, slices_used: used, slices_skipped: skipped })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricVerdict {
    pub exponent: f64,
    pub c_hat: f64,
    pub threshold: f64,
    pub pass: bool,
    pub median_slope: f64,
    pub slopes: Vec<f64>,
    pub slices_used: usize,
    pub atom_order: usize,
}

/// `C_hat = max / min` of `mass(B(y, rho)) / rho^exponent` over a slice survey.
pub fn geometric_check_on(
    measure: &AtomicMeasure,
    model: &EndomorphismModel,
    exponent: f64,
    cfg: &SliceSampling,
    threshold: f64,
) -> Result<GeometricVerdict> {
    let survey = slice_survey(measure, model, cfg)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for f in &survey.fits {
        for (&rho, &m) in f.fit.rho_grid.iter().zip(&f.fit.masses) {
            if m > 0.0 {
                let v = m / rho.powf(exponent);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let c_hat = hi / lo;
    Ok(GeometricVerdict {
        exponent,
        c_hat,
        threshold,
        pass: c_hat < threshold,
        median_slope: survey.median_slope,
        slopes: survey.fits.iter().map(|f| f.fit.slope).collect(),
        slices_used: survey.slices_used,
        atom_order: measure.n,
    })
}

/// Geometric-probability check for the stable equilibrium measure `mu~_n` of `exponent * Phi^s`.
pub fn geometric_probability_check(
    model: &EndomorphismModel,
    n: usize,
    exponent: f64,
    cfg: &SliceSampling,
    threshold: f64,
) -> Result<GeometricVerdict> {
    let measure = equilibrium_atoms(model, &Potential::scaled_stable(exponent), n)?;
    geometric_check_on(&measure, model, exponent, cfg, threshold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenBallRow {
    pub n: usize,
    pub k: usize,
    pub ball_ratios: Vec<f64>,
    pub cylinder_ratios: Vec<f64>,
    pub skipped: usize,
}

impl BowenBallRow {
    pub fn order(&self) -> usize {
        self.n + self.k
    }

    fn extremes(&self) -> (f64, f64) {
        self.ball_ratios
            .iter()
            .chain(&self.cylinder_ratios)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenBallReport {
    pub exponent: f64,
    pub eps: f64,
    pub atom_order: usize,
    pub rows: Vec<BowenBallRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest factor between geometric-mean ball ratios at consecutive orders.
    pub max_step_factor: f64,
    pub pass: bool,
}

/// Atoms of `measure` in the Bowen ball `B_m(z, eps)`.
fn bowen_ball(
    measure: &AtomicMeasure,
    model: &EndomorphismModel,
    forward: &[usize],
    z: &Point,
    m: usize,
    eps: f64,
) -> Vec<usize> {
    let orbit: Vec<Point> = std::iter::successors(Some(*z), |p| Some(model.apply(p))).take(m).collect();
    let mut out = Vec::new();
    measure.index().for_each_candidate(z, eps, |i| {
        let mut j = i;
        for (step, target) in orbit.iter().enumerate() {
            if step > 0 {
                j = forward[j];
            }
            if measure.points[j].distance(target) >= eps {
                return;
            }
        }
        out.push(i);
    });
    out
}

fn push_forward(forward: &[usize], atoms: &[usize], steps: usize) -> Vec<usize> {
    atoms.iter().map(|&i| (0..steps).fold(i, |j, _| forward[j])).collect::<HashSet<_>>().into_iter().collect()
}

fn mass_of(measure: &AtomicMeasure, atoms: &[usize]) -> f64 {
    atoms.iter().map(|&i| measure.weights[i]).sum()
}

fn geo_mean(v: &[f64]) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

/// Compare `mu~_N(B_{n+k}(z, eps))` with `|Df_s^{n+k}(z)|^delta / d^{n+k}`, and the
/// mass of `f^n(B_{n+k}(z, eps))` with `d^n` times that, at atoms `z` drawn by weight.
///
/// Passes when every ratio lies in `[0.1, 10]`.
pub fn bowen_ball_check(
    measure: &AtomicMeasure,
    model: &EndomorphismModel,
    exponent: f64,
    splits: &[(usize, usize)],
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<BowenBallReport> {
    if splits.iter().any(|&(n, k)| n + k == 0) {
        return Err(Error::InvalidArgument("Bowen ball order must be at least 1".into()));
    }
    let max_order = splits.iter().map(|&(n, k)| n + k).max().unwrap_or(0);
    if measure.n < max_order + 4 {
        return Err(Error::InvalidArgument(format!(
            "atoms of order {} are too coarse for Bowen balls of order {max_order}",
            measure.n
        )));
    }
    let forward = measure.forward_map(model)?;
    let d = model.degree() as f64;
    let sampler = measure.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Point> = (0..samples).map(|_| measure.points[measure.sample(&sampler, &mut rng)]).collect();
    let mut rows = Vec::with_capacity(splits.len());
    for &(n, k) in splits {
        let m = n + k;
        let per_sample = centers
            .par_iter()
            .map(|z| -> Result<Option<(f64, f64)>> {
                let ball = bowen_ball(measure, model, &forward, z, m, eps);
                if ball.is_empty() {
                    return Ok(None);
                }
                let predicted = (exponent * stable_birkhoff(model, z, m, DEFAULT_HORIZON)?).exp() / d.powi(m as i32);
                let image = push_forward(&forward, &ball, n);
                let ball_ratio = mass_of(measure, &ball) / predicted;
                let cyl_ratio = mass_of(measure, &image) / (d.powi(n as i32) * predicted);
                Ok(Some((ball_ratio, cyl_ratio)))
            })
            .collect::<Result<Vec<_>>>()?;
        let skipped = per_sample.iter().filter(|r| r.is_none()).count();
        let (ball_ratios, cylinder_ratios) = per_sample.into_iter().flatten().unzip();
        rows.push(BowenBallRow { n, k, ball_ratios, cylinder_ratios, skipped });
    }
    if rows.iter().all(|r| r.ball_ratios.is_empty()) {
        return Err(Error::EmptyBall);
    }
    let (min_ratio, max_ratio) = rows
        .iter()
        .map(BowenBallRow::extremes)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
    let mut by_order: Vec<(usize, f64)> =
        rows.iter().filter(|r| !r.ball_ratios.is_empty()).map(|r| (r.order(), geo_mean(&r.ball_ratios))).collect();
    by_order.sort_by_key(|p| p.0);
    let max_step_factor = by_order
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1)
        .map(|w| (w[1].1 / w[0].1).max(w[0].1 / w[1].1))
        .fold(1.0, f64::max);
    let complete = rows.iter().all(|r| !r.ball_ratios.is_empty());
    Ok(BowenBallReport {
        exponent,
        eps,
        atom_order: measure.n,
        pass: complete && min_ratio >= 0.1 && max_ratio <= 10.0,
        rows,
        min_ratio,
        max_ratio,
        max_step_factor,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentCell {
    pub k: usize,
    pub m: usize,
    pub samples: usize,
    pub empty: usize,
    /// Geometric means over samples.
    pub empirical: f64,
    pub predicted: f64,
    pub quotient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub potential: String,
    pub pressure: f64,
    pub eps: f64,
    pub atom_order: usize,
    /// Whether the atom order is at least `k + m + 4` for every cell.
    pub order_sufficient: bool,
    pub cells: Vec<ComponentCell>,
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub pass: bool,
}

/// Walk `steps` random inverse branches back from `x`.
fn random_preimage<R: Rng>(model: &EndomorphismModel, x: &Point, steps: usize, rng: &mut R) -> Result<Point> {
    let mut p = *x;
    for _ in 0..steps {
        let pre = model.preimages(&p)?;
        p = pre[rng.random_range(0..pre.len())];
    }
    Ok(p)
}

/// Whether `q` lies in `f^m(B_m(y, eps))`, given the orbit `y, f(y), ..., f^{m-1}(y)`.
///
/// Pulls `q` back along the inverse branch that shadows the orbit. Periodic atoms are
/// permuted by `f`, so this cannot be read off atom images.
fn in_bowen_image(model: &EndomorphismModel, q: &Point, orbit: &[Point], eps: f64) -> Result<bool> {
    let mut z = *q;
    for target in orbit.iter().rev() {
        let pre = model.preimages(&z)?;
        let Some(best) = pre.into_iter().min_by(|a, b| a.distance(target).total_cmp(&b.distance(target))) else {
            return Ok(false);
        };
        if best.distance(target) >= eps {
            return Ok(false);
        }
        z = best;
    }
    Ok(true)
}

/// Compare `mu(A_1) / mu(A_2)` with `exp(S_k phi(y_1) - S_m phi(y_2) + (m - k) P(phi))`.
///
/// For a base atom `x`, `y_1` and `y_2` are random `k`-th and `m`-th preimages.
/// `A` is the overlap of `f^k(B_k(y_1, eps))` and `f^m(B_m(y_2, eps))`, `A_1` its
/// pull-back into `B_k(y_1, eps)` and `A_2` its pull-back into `B_m(y_2, eps)`.
/// Masses are taken over atoms; membership in `A` is decided geometrically. Samples with an empty component are counted and skipped.
#[allow(clippy::too_many_arguments)]
pub fn component_comparison_check(
    measure: &AtomicMeasure,
    model: &EndomorphismModel,
    potential: &Potential,
    pressure: f64,
    pairs: &[(usize, usize)],
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<ComponentReport> {
    if pairs.iter().any(|&(k, m)| k == 0 || m == 0) {
        return Err(Error::InvalidArgument("component orders must be positive".into()));
    }
    let forward = measure.forward_map(model)?;
    let sampler = measure.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(pairs.len());
    for &(k, m) in pairs {
        let mut draws = Vec::with_capacity(samples);
        for _ in 0..samples {
            let x = measure.points[measure.sample(&sampler, &mut rng)];
            let y1 = random_preimage(model, &x, k, &mut rng)?;
            let y2 = random_preimage(model, &x, m, &mut rng)?;
            draws.push((y1, y2));
        }
        let results = draws
            .par_iter()
            .map(|(y1, y2)| -> Result<Option<(f64, f64)>> {
                let b1 = bowen_ball(measure, model, &forward, y1, k, eps);
                let b2 = bowen_ball(measure, model, &forward, y2, m, eps);
                let orbit1: Vec<Point> = std::iter::successors(Some(*y1), |p| Some(model.apply(p))).take(k).collect();
                let orbit2: Vec<Point> = std::iter::successors(Some(*y2), |p| Some(model.apply(p))).take(m).collect();
                let mut a1 = Vec::new();
                for &i in &b1 {
                    let q = (0..k).fold(i, |j, _| forward[j]);
                    if in_bowen_image(model, &measure.points[q], &orbit2, eps)? {
                        a1.push(i);
                    }
                }
                let mut a2 = Vec::new();
                for &i in &b2 {
                    let q = (0..m).fold(i, |j, _| forward[j]);
                    if in_bowen_image(model, &measure.points[q], &orbit1, eps)? {
                        a2.push(i);
                    }
                }
                if a1.is_empty() || a2.is_empty() {
                    return Ok(None);
                }
                let empirical = mass_of(measure, &a1) / mass_of(measure, &a2);
                let s_k = birkhoff_sum(model, potential, y1, k)?.value;
                let s_m = birkhoff_sum(model, potential, y2, m)?.value;
                let predicted = (s_k - s_m + (m as f64 - k as f64) * pressure).exp();
                Ok(Some((empirical, predicted)))
            })
            .collect::<Result<Vec<_>>>()?;
        let empty = results.iter().filter(|r| r.is_none()).count();
        let (emp, pred): (Vec<f64>, Vec<f64>) = results.into_iter().flatten().unzip();
        if emp.is_empty() {
            return Err(Error::EmptyComponent("no sample produced nonempty components"));
        }
        let quotients: Vec<f64> = emp.iter().zip(&pred).map(|(e, p)| e / p).collect();
        cells.push(ComponentCell {
            k,
            m,
            samples,
            empty,
            empirical: geo_mean(&emp),
            predicted: geo_mean(&pred),
            quotient: geo_mean(&quotients),
        });
    }
    let min_quotient = cells.iter().map(|c| c.quotient).fold(f64::INFINITY, f64::min);
    let max_quotient = cells.iter().map(|c| c.quotient).fold(0.0, f64::max);
    let order_sufficient = pairs.iter().all(|&(k, m)| measure.n >= k + m + 4);
    Ok(ComponentReport {
        potential: potential.to_string(),
        pressure,
        eps,
        atom_order: measure.n,
        order_sufficient,
        pass: min_quotient >= 0.1 && max_quotient <= 10.0 && max_quotient / min_quotient < 10.0,
        cells,
        min_quotient,
        max_quotient,
    })
}

/// The degree formula stated for the product example next to the enumerated degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeClaim {
    pub stated_formula: String,
    pub stated: usize,
    pub enumerated: usize,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantToOneReport {
    pub samples: usize,
    /// `(preimage count, number of samples)`, ascending by count.
    pub histogram: Vec<(usize, usize)>,
    pub d: Option<usize>,
    pub pass: bool,
    pub degree_claim: Option<DegreeClaim>,
}

/// Count distinct preimages (merged at `1e-9`) of points drawn from the basic set.
pub fn constant_to_one_check(model: &EndomorphismModel, samples: usize, seed: u64) -> Result<ConstantToOneReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..samples).map(|_| model.sample_basic_set(&mut rng)).collect();
    let counts = points
        .par_iter()
        .map(|x| -> Result<usize> {
            let mut distinct: Vec<Point> = Vec::new();
            for y in model.preimages(x)? {
                if model.apply(&y).distance(x) < 1e-10 && distinct.iter().all(|q| q.distance(&y) >= 1e-9) {
                    distinct.push(y);
                }
            }
            Ok(distinct.len())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut histogram: Vec<(usize, usize)> = Vec::new();
    for c in counts {
        match histogram.iter_mut().find(|h| h.0 == c) {
            Some(h) => h.1 += 1,
            None => histogram.push((c, 1)),
        }
    }
    histogram.sort_unstable();
    let d = (histogram.len() == 1).then(|| histogram[0].0);
    let degree_claim = match model.spec() {
        ModelSpec::ProductPowerToral { k, a, .. } => d.map(|enumerated| {
            let stated = *k as usize + a.det().unsigned_abs() as usize;
            DegreeClaim { stated_formula: "k + |det A|".into(), stated, enumerated, consistent: stated == enumerated }
        }),
        _ => None,
    };
    Ok(ConstantToOneReport { samples, pass: d.is_some() && samples > 0, histogram, d, degree_claim })
}

/// Knobs shared by the diagnostics that need `delta^s` and a slice survey.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcConfig {
    pub n_max: usize,
    pub atom_order: usize,
    pub sampling: SliceSampling,
}

impl Default for AcConfig {
    fn default() -> Self {
        AcConfig { n_max: 8, atom_order: 8, sampling: SliceSampling::default() }
    }
}

/// Atom count the default slice surveys aim for.
const SURVEY_ATOMS: u128 = 250_000;

impl AcConfig {
    /// Defaults sized to the model: the largest orders up to 8 (pressure) and 12
    /// (atoms) whose periodic-point counts stay within budget.
    pub fn for_model(model: &EndomorphismModel) -> Self {
        let largest = |cap: usize, budget: u128| {
            (1..=cap).take_while(|&n| predicted_count(model, n) <= budget).last().unwrap_or(1)
        };
        AcConfig {
            n_max: largest(8, ATOM_BUDGET).max(3),
            atom_order: largest(12, SURVEY_ATOMS),
            sampling: SliceSampling::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ACDiagnostic {
    pub delta_s: f64,
    pub stable_dim_e: usize,
    pub is_repellor_verdict: bool,
    pub slice_ac_verdict: bool,
    pub median_slope: f64,
    pub slopes: Vec<f64>,
}

/// Repellor verdict `|delta^s - dim E^s| < 0.05` and slice verdict
/// `|median slope - dim E^s| < 0.1` for the stable equilibrium measure.
pub fn absolute_continuity_diagnostic(model: &EndomorphismModel, cfg: &AcConfig) -> Result<ACDiagnostic> {
    let root = bowen_root(model, cfg.n_max, model.degree())?;
    let measure = equilibrium_atoms(model, &Potential::scaled_stable(root.t_star), cfg.atom_order)?;
    let survey = slice_survey(&measure, model, &cfg.sampling)?;
    let dim_e = model.stable_dim();
    Ok(ACDiagnostic {
        delta_s: root.t_star,
        stable_dim_e: dim_e,
        is_repellor_verdict: (root.t_star - dim_e as f64).abs() < 0.05,
        slice_ac_verdict: (survey.median_slope - dim_e as f64).abs() < 0.1,
        median_slope: survey.median_slope,
        slopes: survey.fits.iter().map(|f| f.fit.slope).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxDimEntry {
    pub potential: String,
    pub median_slope: f64,
    pub below_delta: bool,
    pub below_ambient: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxDimReport {
    pub delta_s: f64,
    pub stable_measure_slope: f64,
    pub stable_measure_attains: bool,
    pub alternatives: Vec<MaxDimEntry>,
    pub pass: bool,
}

/// Slice slopes of alternative equilibrium measures against `delta^s`.
pub fn max_stable_dim_check(
    model: &EndomorphismModel,
    alternatives: &[Potential],
    cfg: &AcConfig,
) -> Result<MaxDimReport> {
    let root = bowen_root(model, cfg.n_max, model.degree())?;
    let delta = root.t_star;
    let ambient = model.stable_dim() as f64;
    let slope_of = |potential: &Potential| -> Result<f64> {
        let measure = equilibrium_atoms(model, potential, cfg.atom_order)?;
        Ok(slice_survey(&measure, model, &cfg.sampling)?.median_slope)
    };
    let stable_slope = slope_of(&Potential::scaled_stable(delta))?;
    let alternatives = alternatives
        .iter()
        .map(|p| {
            let s = slope_of(p)?;
            Ok(MaxDimEntry {
                potential: p.to_string(),
                median_slope: s,
                below_delta: s <= delta + 0.05,
                below_ambient: s <= ambient + 0.05,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let attains = (stable_slope - delta).abs() < 0.1;
    let pass = attains && alternatives.iter().all(|a| a.below_delta && a.below_ambient);
    Ok(MaxDimReport {
        delta_s: delta,
        stable_measure_slope: stable_slope,
        stable_measure_attains: attains,
        alternatives,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntMatrix2;

    fn linear() -> EndomorphismModel {
        EndomorphismModel::toral_linear(IntMatrix2::standard())
    }

    #[test]
    fn sized_configs() {
        let cfg = AcConfig::for_model(&linear());
        assert_eq!((cfg.n_max, cfg.atom_order), (8, 8));
        let cfg = AcConfig::for_model(&EndomorphismModel::product_attractor_circle(0.1).unwrap());
        assert_eq!((cfg.n_max, cfg.atom_order), (8, 12));
        let p = EndomorphismModel::product_power_toral(3, IntMatrix2::standard(), 0.01).unwrap();
        assert_eq!(AcConfig::for_model(&p).n_max, 6);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn constant_to_one_reports() {
        let r = constant_to_one_check(&linear(), 50, 1).unwrap();
        assert_eq!(r.d, Some(2));
        assert!(r.pass && r.degree_claim.is_none());
        let p = EndomorphismModel::product_power_toral(3, IntMatrix2::standard(), 0.01).unwrap();
        let r = constant_to_one_check(&p, 30, 2).unwrap();
        assert_eq!(r.d, Some(6));
        let claim = r.degree_claim.unwrap();
        assert_eq!(claim.stated, 5);
        assert!(!claim.consistent);
        let c = EndomorphismModel::product_attractor_circle(0.1).unwrap();
        assert_eq!(constant_to_one_check(&c, 30, 3).unwrap().d, Some(2));
    }

    #[test]
    fn symmetric_component_is_one() {
        let model = linear();
        let mu = equilibrium_atoms(&model, &Potential::stable(), 7).unwrap();
        // the stable potential is constant, so the prediction is exactly one when k = m
        let r = component_comparison_check(&mu, &model, &Potential::stable(), 2f64.ln(), &[(2, 2)], 0.2, 4, 5).unwrap();
        assert!((r.cells[0].predicted - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_component_masses_follow_the_jacobian() {
        // atoms of the linear map approximate Haar measure, so each inverse branch
        // of f^j carries 2^-j of the overlap
        let model = linear();
        let mu = equilibrium_atoms(&model, &Potential::stable(), 8).unwrap();
        let r = component_comparison_check(&mu, &model, &Potential::stable(), 2f64.ln(), &[(1, 2), (2, 1)], 0.2, 4, 9)
            .unwrap();
        assert_eq!(r.cells.iter().map(|c| c.empty).sum::<usize>(), 0);
        assert!((r.cells[0].empirical - 2.0).abs() < 0.05, "{r:?}");
        assert!((r.cells[1].empirical - 0.5).abs() < 0.0125, "{r:?}");
    }

    #[test]
    fn bowen_ball_rejects_degenerate_order() {
        let model = linear();
        let mu = equilibrium_atoms(&model, &Potential::stable(), 6).unwrap();
        assert!(bowen_ball_check(&mu, &model, 1.0, &[(0, 0)], 0.2, 3, 1).is_err());
        assert!(bowen_ball_check(&mu, &model, 1.0, &[(2, 2)], 0.2, 3, 1).is_err());
    }

    #[test]
    fn bowen_ball_linear_small() {
        let model = linear();
        let mu = equilibrium_atoms(&model, &Potential::stable(), 7).unwrap();
        let r = bowen_ball_check(&mu, &model, 1.0, &[(0, 1), (1, 1), (1, 2)], 0.2, 8, 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.max_step_factor < 5.0);
    }

    #[test]
    fn perturbed_slices_are_geometric_within_doubled_threshold() {
        let model = EndomorphismModel::toral_perturbed(IntMatrix2::standard(), 0.01).unwrap();
        let v = geometric_probability_check(&model, 8, 1.0, &SliceSampling::default(), 20.0).unwrap();
        assert!(v.pass, "{}", v.c_hat);
        assert!((v.median_slope - 1.0).abs() < 0.2);
    }

    #[test]
    fn dirac_survey_has_unit_constant() {
        let model = EndomorphismModel::product_attractor_circle(0.1).unwrap();
        let mu = equilibrium_atoms(&model, &Potential::zero(), 12).unwrap();
        let cfg = SliceSampling { slices: 4, points_per_slice: 3, ..SliceSampling::default() };
        let v = geometric_check_on(&mu, &model, 0.0, &cfg, 10.0).unwrap();
        assert_eq!(v.c_hat, 1.0);
        assert!(v.pass);
        assert_eq!(v.median_slope, 0.0);
    }
}
