use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thermo_core::measures::{
    absolute_continuity_diagnostic, bowen_ball_check, component_comparison_check, constant_to_one_check,
    equilibrium_atoms, geometric_check_on, max_stable_dim_check, slice_survey, AcConfig, SliceSampling,
};
use thermo_core::orbits::{fixed_points, stable_sums};
use thermo_core::pressure::{pressure, StableSpectrum};
use thermo_core::stable::{prehistory_tree, rho_maximal, DEFAULT_HORIZON};
use thermo_core::{BowenRoot, EndomorphismModel, Potential};

use crate::args::{Command, Common, OrbitsAction, PotentialArg, SliceArgs};
use crate::config::load_model;
use crate::error::CliError;

const BOWEN_TOL: f64 = 1e-3;
const DEFAULT_SPLITS: [(usize, usize); 5] = [(0, 1), (1, 1), (1, 2), (2, 2), (2, 3)];

/// What a command produced: the report body and, for checks, whether it passed.
pub struct Outcome {
    pub result: Value,
    pub verified: Option<bool>,
}

impl Outcome {
    fn plain(result: impl Serialize) -> Result<Self, CliError> {
        Ok(Outcome { result: serde_json::to_value(result)?, verified: None })
    }

    fn check(result: impl Serialize, pass: bool) -> Result<Self, CliError> {
        Ok(Outcome { result: serde_json::to_value(result)?, verified: Some(pass) })
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pressure { .. } => "pressure",
            Command::StableDim { .. } => "stable-dim",
            Command::Atoms { .. } => "atoms",
            Command::SliceDim { .. } => "slice-dim",
            Command::VerifyGeometric { .. } => "verify-geometric",
            Command::CompareComponents { .. } => "compare-components",
            Command::PreimageCount { .. } => "preimage-count",
            Command::Prehist { .. } => "prehist",
            Command::VerifyTub { .. } => "verify-tub",
            Command::AcDiagnostic { .. } => "ac-diagnostic",
            Command::MaxDim { .. } => "max-dim",
            Command::Orbits { action: OrbitsAction::Dump { .. } } => "orbits dump",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Pressure { common, .. }
            | Command::StableDim { common, .. }
            | Command::Atoms { common, .. }
            | Command::SliceDim { common, .. }
            | Command::VerifyGeometric { common, .. }
            | Command::CompareComponents { common, .. }
            | Command::PreimageCount { common, .. }
            | Command::Prehist { common, .. }
            | Command::VerifyTub { common, .. }
            | Command::AcDiagnostic { common, .. }
            | Command::MaxDim { common, .. }
            | Command::Orbits { action: OrbitsAction::Dump { common, .. } } => common,
        }
    }
}

fn sampling(s: &SliceArgs, seed: u64) -> SliceSampling {
    SliceSampling {
        slices: s.slices,
        points_per_slice: s.points_per_slice,
        half_length: s.half_length,
        width_divisor: s.width_divisor,
        levels: s.levels,
        horizon: s.horizon,
        seed,
    }
}

fn sized(
    model: &EndomorphismModel,
    n_max: Option<usize>,
    atom_order: Option<usize>,
    slice: &SliceArgs,
    seed: u64,
) -> AcConfig {
    let auto = AcConfig::for_model(model);
    AcConfig {
        n_max: n_max.unwrap_or(auto.n_max),
        atom_order: atom_order.unwrap_or(auto.atom_order),
        sampling: sampling(slice, seed),
    }
}

fn root_order(model: &EndomorphismModel, n_max: Option<usize>) -> usize {
    n_max.unwrap_or_else(|| AcConfig::for_model(model).n_max)
}

fn stable_dimension(model: &EndomorphismModel, n_max: usize, tol: f64) -> Result<BowenRoot, CliError> {
    Ok(StableSpectrum::build(model, n_max, true)?.bowen_root(model.degree(), tol)?)
}

/// The exponent to use, computing the stable dimension when none is given.
fn exponent_or_root(
    model: &EndomorphismModel,
    given: Option<f64>,
    n_max: Option<usize>,
) -> Result<(f64, Option<BowenRoot>), CliError> {
    match given {
        Some(t) => Ok((t, None)),
        None => {
            let root = stable_dimension(model, root_order(model, n_max), BOWEN_TOL)?;
            Ok((root.t_star, Some(root)))
        }
    }
}

fn resolve(model: &EndomorphismModel, p: PotentialArg, n_max: Option<usize>) -> Result<Potential, CliError> {
    match p {
        PotentialArg::Fixed(p) => Ok(p),
        PotentialArg::Bowen => Ok(Potential::scaled_stable(exponent_or_root(model, None, n_max)?.0)),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn coord_headers(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("x{i}")).collect()
}

pub fn run(cmd: &Command) -> Result<(EndomorphismModel, Outcome), CliError> {
    let common = cmd.common();
    let model = load_model(&common.model)?;
    let seed = common.seed;
    let outcome = match cmd {
        Command::Pressure { potential, n_max, .. } => Outcome::plain(pressure(&model, potential, *n_max)?),
        Command::StableDim { n_max, tol, .. } => {
            let root = stable_dimension(&model, *n_max, *tol)?;
            let per_n = &root.pressure_at_root.per_n;
            Outcome::plain(json!({
                "t_star": root.t_star,
                "residual": root.residual,
                "bracket": root.bracket,
                "per_n": per_n,
                "d": model.degree(),
                "monotone": root.is_monotone(),
                "pressure_at_root": root.pressure_at_root,
                "evaluations": root.evaluations,
            }))
        }
        Command::Atoms { n, potential, n_max, out, .. } => {
            let potential = resolve(&model, *potential, *n_max)?;
            let mu = equilibrium_atoms(&model, &potential, *n)?;
            let mut w = csv_writer(out)?;
            let mut header = coord_headers(model.phase_dim());
            header.push("weight".into());
            w.write_record(&header)?;
            for (p, weight) in mu.points.iter().zip(&mu.weights) {
                let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
                row.push(weight.to_string());
                w.write_record(&row)?;
            }
            w.flush().map_err(|e| CliError::io(out, e))?;
            let max = mu.weights.iter().copied().fold(0.0, f64::max);
            let min = mu.weights.iter().copied().fold(f64::INFINITY, f64::min);
            Outcome::plain(json!({
                "n": n,
                "potential": potential.to_string(),
                "atoms": mu.len(),
                "total_weight": mu.total_weight(),
                "min_weight": min,
                "max_weight": max,
                "table": out,
            }))
        }
        Command::SliceDim { n, potential, n_max, slice, out, .. } => {
            let potential = resolve(&model, *potential, *n_max)?;
            let mu = equilibrium_atoms(&model, &potential, *n)?;
            let survey = slice_survey(&mu, &model, &sampling(slice, seed))?;
            if let Some(out) = out {
                let mut w = csv_writer(out)?;
                w.write_record(["slice", "y", "rho", "mass", "slope"])?;
                for f in &survey.fits {
                    for (rho, m) in f.fit.rho_grid.iter().zip(&f.fit.masses) {
                        w.write_record([
                            f.slice.to_string(),
                            f.y.to_string(),
                            rho.to_string(),
                            m.to_string(),
                            f.fit.slope.to_string(),
                        ])?;
                    }
                }
                w.flush().map_err(|e| CliError::io(out, e))?;
            }
            Outcome::plain(json!({
                "potential": potential.to_string(),
                "atom_order": n,
                "median_slope": survey.median_slope,
                "slices_used": survey.slices_used,
                "slices_skipped": survey.slices_skipped,
                "fits": survey.fits.iter().map(|f| json!({
                    "slice": f.slice,
                    "center": f.center,
                    "y": f.y,
                    "slope": f.fit.slope,
                    "r2": f.fit.r2,
                    "spread_constant": f.fit.spread_constant,
                })).collect::<Vec<_>>(),
            }))
        }
        Command::VerifyGeometric { n, exponent, n_max, threshold, slice, .. } => {
            let (exponent, root) = exponent_or_root(&model, *exponent, *n_max)?;
            let mu = equilibrium_atoms(&model, &Potential::scaled_stable(exponent), *n)?;
            // tolerances are calibrated on the exactly solvable models and doubled otherwise
            let scale = if model.has_exact_stable_direction() { 1.0 } else { 2.0 };
            let threshold = threshold.unwrap_or(10.0 * scale);
            let v = geometric_check_on(&mu, &model, exponent, &sampling(slice, seed), threshold)?;
            let slope_ok = (v.median_slope - exponent).abs() <= 0.1 * scale;
            let pass = v.pass && slope_ok;
            Outcome::check(
                json!({ "verdict": v, "slope_matches_exponent": slope_ok, "bowen_root": root.map(|r| r.t_star) }),
                pass,
            )
        }
        Command::CompareComponents { n, potential, n_max, pairs, eps, samples, .. } => {
            let pairs: Vec<(usize, usize)> = if pairs.is_empty() {
                (1..=4).flat_map(|k| (1..=4).map(move |m| (k, m))).collect()
            } else {
                pairs.clone()
            };
            let p = pressure(&model, potential, root_order(&model, *n_max))?;
            let mu = equilibrium_atoms(&model, potential, *n)?;
            let report = component_comparison_check(&mu, &model, potential, p.value, &pairs, *eps, *samples, seed)?;
            let pass = report.pass;
            Outcome::check(report, pass)
        }
        Command::PreimageCount { samples, .. } => {
            let report = constant_to_one_check(&model, *samples, seed)?;
            let pass = report.pass;
            Outcome::check(report, pass)
        }
        Command::Prehist { x, depth, rho, eps, horizon, out, .. } => {
            if x.dim() != model.phase_dim() {
                return Err(CliError::Usage(format!(
                    "--x has {} coordinates, the model needs {}",
                    x.dim(),
                    model.phase_dim()
                )));
            }
            let tree = prehistory_tree(&model, x, *depth)?;
            let cut = rho_maximal(&model, &tree, *rho, *eps, *horizon)?;
            let holds = cut.bracketing_holds();
            let text = serde_json::to_string_pretty(&json!({ "tree": tree, "rho_maximal": cut }))?;
            std::fs::write(out, text).map_err(|e| CliError::io(out, e))?;
            Outcome::check(
                json!({
                    "leaves": tree.leaf_count(),
                    "cutoffs": cut.cutoffs,
                    "branches": cut.entries.len(),
                    "bracketing_holds": holds,
                    "tree": out,
                }),
                holds,
            )
        }
        Command::VerifyTub { n, exponent, n_max, splits, eps, samples, .. } => {
            let splits = if splits.is_empty() { DEFAULT_SPLITS.to_vec() } else { splits.clone() };
            let (exponent, _) = exponent_or_root(&model, *exponent, *n_max)?;
            let mu = equilibrium_atoms(&model, &Potential::scaled_stable(exponent), *n)?;
            let report = bowen_ball_check(&mu, &model, exponent, &splits, *eps, *samples, seed)?;
            let pass = report.pass;
            Outcome::check(report, pass)
        }
        Command::AcDiagnostic { n_max, atom_order, slice, .. } => {
            let cfg = sized(&model, *n_max, *atom_order, slice, seed);
            Outcome::plain(json!({ "config": cfg, "diagnostic": absolute_continuity_diagnostic(&model, &cfg)? }))
        }
        Command::MaxDim { alternatives, n_max, atom_order, slice, .. } => {
            let cfg = sized(&model, *n_max, *atom_order, slice, seed);
            let report = max_stable_dim_check(&model, alternatives, &cfg)?;
            let pass = report.pass;
            Outcome::check(json!({ "config": cfg, "report": report }), pass)
        }
        Command::Orbits { action: OrbitsAction::Dump { n, potential, out, .. } } => {
            let set = fixed_points(&model, *n)?;
            let sums: Vec<f64> = if potential.needs_stable() {
                stable_sums(&model, &set, DEFAULT_HORIZON)?.into_iter().map(|s| potential.combine(s, *n)).collect()
            } else {
                vec![potential.combine(0.0, *n); set.len()]
            };
            let mut w = csv_writer(out)?;
            let mut header = coord_headers(model.phase_dim());
            header.push(format!("birkhoff_{potential}"));
            w.write_record(&header)?;
            for (p, s) in set.points.iter().zip(&sums) {
                let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
                row.push(s.to_string());
                w.write_record(&row)?;
            }
            w.flush().map_err(|e| CliError::io(out, e))?;
            Outcome::plain(json!({
                "n": n,
                "points": set.len(),
                "method": set.method,
                "min_pairwise_distance": set.min_pairwise_distance(),
                "table": out,
            }))
        }
    }?;
    Ok((model, outcome))
}
