//! Partition sums over periodic points, pressure estimates and Bowen's equation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::EndomorphismModel;
use crate::orbits::{fixed_points, stable_sums, PeriodicOrbitSet};
use crate::potential::Potential;
use crate::stable::DEFAULT_HORIZON;

/// `sum_{x in Fix(f^n)} exp(S_n phi(x))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSum {
    pub n: usize,
    pub value: f64,
    pub log_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureMethod {
    SlopeExtrapolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub value: f64,
    /// `(n, log Z_n / n)`.
    pub per_n: Vec<(usize, f64)>,
    /// `(n, log Z_n - log Z_{n-1})` for `n >= 2`.
    pub differences: Vec<(usize, f64)>,
    pub method: PressureMethod,
    pub uncertainty: f64,
    /// Spread of `log Z_n - n P` over the computed levels.
    pub growth_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenRoot {
    pub t_star: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    /// Every `(t, g(t))` evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
    /// Pressure estimate of `t_star * Phi^s`.
    pub pressure_at_root: PressureEstimate,
}

impl BowenRoot {
    /// Whether `g` decreases across every pair of evaluated points.
    pub fn is_monotone(&self) -> bool {
        let mut pts = self.evaluations.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.windows(2).all(|w| w[0].0 == w[1].0 || w[1].1 < w[0].1)
    }
}

/// Numerically stable `log sum exp(v)`; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.par_iter().copied().reduce(|| f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.par_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Periodic points and their stable Birkhoff sums for `n = 1..=n_max`.
///
/// Any potential `t Phi^s + c` is then a log-sum-exp over cached values.
#[derive(Clone, Debug)]
pub struct StableSpectrum {
    levels: Vec<Level>,
}

#[derive(Clone, Debug)]
struct Level {
    count: usize,
    /// Empty when no stable sums were requested.
    sums: Vec<f64>,
}

impl StableSpectrum {
    pub fn build(model: &EndomorphismModel, n_max: usize, with_stable: bool) -> Result<Self> {
        let mut levels = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let set = fixed_points(model, n)?;
            levels.push(Self::level(model, &set, with_stable)?);
        }
        Ok(StableSpectrum { levels })
    }

    fn level(model: &EndomorphismModel, set: &PeriodicOrbitSet, with_stable: bool) -> Result<Level> {
        let sums = if with_stable { stable_sums(model, set, DEFAULT_HORIZON)? } else { Vec::new() };
        Ok(Level { count: set.len(), sums })
    }

    pub fn n_max(&self) -> usize {
        self.levels.len()
    }

    pub fn count(&self, n: usize) -> usize {
        self.levels[n - 1].count
    }

    pub fn log_partition(&self, potential: &Potential, n: usize) -> Result<f64> {
        let level = self
            .levels
            .get(n.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidArgument(format!("level {n} not computed")))?;
        if !potential.needs_stable() {
            return Ok(potential.shift * n as f64 + (level.count as f64).ln());
        }
        if level.sums.len() != level.count {
            return Err(Error::InvalidArgument("stable sums were not cached".into()));
        }
        let logs: Vec<f64> = level.sums.iter().map(|&s| potential.combine(s, n)).collect();
        Ok(log_sum_exp(&logs))
    }

    pub fn pressure(&self, potential: &Potential) -> Result<PressureEstimate> {
        let n_max = self.n_max();
        if n_max < 3 {
            return Err(Error::InvalidArgument("pressure needs n_max >= 3".into()));
        }
        let logs = (1..=n_max).map(|n| self.log_partition(potential, n)).collect::<Result<Vec<_>>>()?;
        let per_n = logs.iter().enumerate().map(|(i, l)| (i + 1, l / (i + 1) as f64)).collect();
        let differences: Vec<(usize, f64)> = (1..n_max).map(|i| (i + 1, logs[i] - logs[i - 1])).collect();
        let value = differences[differences.len() - 1].1;
        let uncertainty = (value - differences[differences.len() - 2].1).abs();
        let offsets = logs.iter().enumerate().map(|(i, l)| l - (i + 1) as f64 * value);
        let (lo, hi) = offsets.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o), hi.max(o)));
        Ok(PressureEstimate {
            value,
            per_n,
            differences,
            method: PressureMethod::SlopeExtrapolation,
            uncertainty,
            growth_spread: hi - lo,
        })
    }

    /// Solve `P(t Phi^s) = log d` by bisection on `[0, 4]` to width `t_tol`.
    ///
    /// A sign of `g(t) = P(t Phi^s) - log d` is trusted only when `|g|` exceeds twice
    /// the pressure uncertainty. An endpoint inside that band still brackets; a
    /// midpoint inside it ends the search there.
    pub fn bowen_root(&self, d: usize, t_tol: f64) -> Result<BowenRoot> {
        if d == 0 {
            return Err(Error::InvalidArgument("degree must be positive".into()));
        }
        let log_d = (d as f64).ln();
        let mut evaluations = Vec::new();
        let mut g = |t: f64| -> Result<(f64, f64)> {
            let est = self.pressure(&Potential::scaled_stable(t))?;
            let v = est.value - log_d;
            evaluations.push((t, v));
            Ok((v, 2.0 * est.uncertainty))
        };
        let (mut lo, mut hi) = (0.0, 4.0);
        let (g_lo, band_lo) = g(lo)?;
        let (g_hi, band_hi) = g(hi)?;
        if g_lo < -band_lo || g_hi > band_hi {
            return Err(Error::NoSignChange { lo, hi, g_lo, g_hi });
        }
        let mut settled = None;
        while hi - lo > t_tol {
            let mid = 0.5 * (lo + hi);
            let (v, band) = g(mid)?;
            if v.abs() <= band {
                settled = Some(mid);
                break;
            }
            if v > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_star = settled.unwrap_or(0.5 * (lo + hi));
        let pressure_at_root = self.pressure(&Potential::scaled_stable(t_star))?;
        let residual = (pressure_at_root.value - log_d).abs();
        evaluations.push((t_star, pressure_at_root.value - log_d));
        Ok(BowenRoot { t_star, bracket: (lo, hi), residual, evaluations, pressure_at_root })
    }
}

pub fn partition_sum(model: &EndomorphismModel, potential: &Potential, n: usize) -> Result<PartitionSum> {
    let set = fixed_points(model, n)?;
    let log_value = if potential.needs_stable() {
        let sums = stable_sums(model, &set, DEFAULT_HORIZON)?;
        let logs: Vec<f64> = sums.iter().map(|&s| potential.combine(s, n)).collect();
        log_sum_exp(&logs)
    } else {
        potential.shift * n as f64 + (set.len() as f64).ln()
    };
    Ok(PartitionSum { n, value: log_value.exp(), log_value })
}

/// Pressure from successive log-differences of partition sums up to `n_max`.
pub fn pressure(model: &EndomorphismModel, potential: &Potential, n_max: usize) -> Result<PressureEstimate> {
    if n_max < 3 {
        return Err(Error::InvalidArgument("pressure needs n_max >= 3".into()));
    }
    StableSpectrum::build(model, n_max, potential.needs_stable())?.pressure(potential)
}

/// Root `t` of `P(t Phi^s) = log d`, to `1e-3` in `t`.
pub fn bowen_root(model: &EndomorphismModel, n_max: usize, d: usize) -> Result<BowenRoot> {
    if n_max < 3 {
        return Err(Error::InvalidArgument("pressure needs n_max >= 3".into()));
    }
    StableSpectrum::build(model, n_max, true)?.bowen_root(d, 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntMatrix2;
    use approx::assert_abs_diff_eq;

    fn linear() -> EndomorphismModel {
        EndomorphismModel::toral_linear(IntMatrix2::standard())
    }

    fn lambdas() -> (f64, f64) {
        ((5.0 - 17f64.sqrt()) / 2.0, (5.0 + 17f64.sqrt()) / 2.0)
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_abs_diff_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(log_sum_exp(&[-1000.0, -1000.0]), -1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_sum_exp(&[800.0, 0.0]), 800.0, epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn partition_sum_examples() {
        let m = linear();
        let z = partition_sum(&m, &Potential::zero(), 2).unwrap();
        assert_abs_diff_eq!(z.log_value, 16f64.ln(), epsilon = 1e-12);
        let c = partition_sum(&m, &Potential::constant(0.3), 3).unwrap();
        assert_abs_diff_eq!(c.log_value, 0.9 + 86f64.ln(), epsilon = 1e-12);
        let s = partition_sum(&m, &Potential::stable(), 1).unwrap();
        assert_abs_diff_eq!(s.log_value, (2.0 * lambdas().0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.log_value, -0.131375, epsilon = 1e-4);
    }

    #[test]
    fn linear_entropy() {
        let p = pressure(&linear(), &Potential::zero(), 8).unwrap();
        assert!((p.value - lambdas().1.ln()).abs() < 0.01, "{}", p.value);
        assert!(p.uncertainty < 0.01);
        assert!(p.growth_spread < 1.0);
        assert_eq!(p.per_n.len(), 8);
    }

    #[test]
    fn circle_doubling_entropy() {
        let m = EndomorphismModel::product_attractor_circle(0.1).unwrap();
        let p = pressure(&m, &Potential::zero(), 10).unwrap();
        assert!((p.value - 2f64.ln()).abs() < 0.005);
    }

    #[test]
    fn constant_shift_is_additive() {
        let spec =
            StableSpectrum::build(&EndomorphismModel::toral_perturbed(IntMatrix2::standard(), 0.01).unwrap(), 6, true)
                .unwrap();
        let base = spec.pressure(&Potential::scaled_stable(0.5)).unwrap();
        let shifted = spec.pressure(&Potential::scaled_stable(0.5).plus(0.37)).unwrap();
        assert!((shifted.value - base.value - 0.37).abs() <= 2.0 * base.uncertainty.max(1e-12));
    }

    #[test]
    fn bowen_root_linear() {
        let r = bowen_root(&linear(), 8, 2).unwrap();
        assert!((r.t_star - 1.0).abs() < 0.02, "{}", r.t_star);
        assert!(r.residual < 0.02);
        assert!(r.bracket.0 <= r.t_star && r.t_star <= r.bracket.1);
        let width = r.bracket.1 - r.bracket.0;
        assert!(width <= 1e-3 || r.residual <= 2.0 * r.pressure_at_root.uncertainty, "{width}");
        assert!(r.is_monotone());
    }

    #[test]
    fn bowen_root_attractor() {
        let m = EndomorphismModel::product_attractor_circle(0.1).unwrap();
        let r = bowen_root(&m, 10, 2).unwrap();
        assert!(r.t_star.abs() < 0.02, "{}", r.t_star);
    }

    #[test]
    fn bowen_root_closed_form_degree_one() {
        let (ls, lu) = lambdas();
        let spec = StableSpectrum::build(&linear(), 8, true).unwrap();
        let r = spec.bowen_root(1, 1e-4).unwrap();
        // the estimator carries the finite-n bias of the entropy estimate
        let lu_hat = spec.pressure(&Potential::zero()).unwrap().value;
        assert_abs_diff_eq!(r.t_star, lu_hat / -ls.ln(), epsilon = 1e-3);
        assert!((r.t_star - lu.ln() / -ls.ln()).abs() < 0.01);
        assert!((r.t_star - 1.8405).abs() < 0.01);
    }

    #[test]
    fn no_sign_change_is_reported() {
        let spec = StableSpectrum::build(&linear(), 4, true).unwrap();
        assert!(matches!(spec.bowen_root(1000, 1e-3), Err(Error::NoSignChange { .. })));
    }
}
