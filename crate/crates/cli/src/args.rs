use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thermo_core::{Point, Potential};

#[derive(Parser, Debug)]
#[command(
    name = "thermo",
    version,
    about = "Pressure, stable dimension and equilibrium-measure checks for toral endomorphisms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Model config (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// A potential, or `bowen` for `t* Phi^s` with `t*` the stable dimension.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(into = "String")]
pub enum PotentialArg {
    Bowen,
    Fixed(Potential),
}

impl From<PotentialArg> for String {
    fn from(p: PotentialArg) -> String {
        match p {
            PotentialArg::Bowen => "bowen".into(),
            PotentialArg::Fixed(p) => p.to_string(),
        }
    }
}

fn parse_potential(s: &str) -> Result<PotentialArg, String> {
    if s == "bowen" {
        return Ok(PotentialArg::Bowen);
    }
    s.parse().map(PotentialArg::Fixed).map_err(|e: thermo_core::Error| e.to_string())
}

fn parse_fixed_potential(s: &str) -> Result<Potential, String> {
    s.parse().map_err(|e: thermo_core::Error| e.to_string())
}

fn parse_point(s: &str) -> Result<Point, String> {
    let coords = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("`{c}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if !(2..=3).contains(&coords.len()) || coords.iter().any(|c| !c.is_finite()) {
        return Err(format!("expected 2 or 3 finite coordinates, got `{s}`"));
    }
    Ok(Point::new(&coords))
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `a:b`, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(a)?, num(b)?))
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SliceArgs {
    #[arg(long, default_value_t = 20)]
    pub slices: usize,
    #[arg(long = "points", default_value_t = 10)]
    pub points_per_slice: usize,
    /// Half-length `r` of each stable segment.
    #[arg(long, default_value_t = 0.2)]
    pub half_length: f64,
    /// Tube width is `r / width_divisor`.
    #[arg(long, default_value_t = 20.0)]
    pub width_divisor: f64,
    /// Number of dyadic radii `r/4 * 2^-j`.
    #[arg(long, default_value_t = 7)]
    pub levels: usize,
    #[arg(long, default_value_t = 25)]
    pub horizon: usize,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Pressure of a potential from periodic-point sums.
    Pressure {
        #[command(flatten)]
        common: Common,
        /// `stable`, `zero`, `const:c`, `scaled:t` or `scaled:t+c`.
        #[arg(long, default_value = "stable", value_parser = parse_fixed_potential)]
        potential: Potential,
        #[arg(long = "nmax", default_value_t = 8)]
        n_max: usize,
    },
    /// Root of Bowen's equation `P(t Phi^s) = log d`.
    StableDim {
        #[command(flatten)]
        common: Common,
        #[arg(long = "nmax", default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Weighted periodic atoms of an equilibrium measure, as CSV.
    Atoms {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "bowen", value_parser = parse_potential)]
        potential: PotentialArg,
        /// Order for the stable-dimension solve; sized to the model by default.
        #[arg(long = "nmax")]
        n_max: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pointwise dimension fits on stable slices.
    SliceDim {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 9)]
        n: usize,
        #[arg(long, default_value = "bowen", value_parser = parse_potential)]
        potential: PotentialArg,
        /// Order for the stable-dimension solve; sized to the model by default.
        #[arg(long = "nmax")]
        n_max: Option<usize>,
        #[command(flatten)]
        slice: SliceArgs,
        /// Per-radius masses as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Uniform comparability of slice ball masses with `rho^delta`.
    VerifyGeometric {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 9)]
        n: usize,
        /// Defaults to the stable dimension.
        #[arg(long)]
        exponent: Option<f64>,
        /// Order for the stable-dimension solve; sized to the model by default.
        #[arg(long = "nmax")]
        n_max: Option<usize>,
        /// Bound on C_hat; 10, or 20 when the stable direction is approximated.
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        slice: SliceArgs,
    },
    /// Mass ratios of overlapping Bowen-ball components.
    CompareComponents {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value = "stable", value_parser = parse_fixed_potential)]
        potential: Potential,
        /// Order for the stable-dimension solve; sized to the model by default.
        #[arg(long = "nmax")]
        n_max: Option<usize>,
        /// `k:m` pairs; defaults to every pair in 1..=4.
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<(usize, usize)>,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[arg(long, default_value_t = 40)]
        samples: usize,
    },
    /// Preimage counts at points sampled from the basic set.
    PreimageCount {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Prehistory tree with rho-maximal cutoffs, as JSON.
    Prehist {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_point)]
        x: Point,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 25)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bowen-ball masses against `|Df_s^m|^delta / d^m`.
    VerifyTub {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        exponent: Option<f64>,
        /// Order for the stable-dimension solve; sized to the model by default.
        #[arg(long = "nmax")]
        n_max: Option<usize>,
        /// `n:k` splits of the order `m = n + k`.
        #[arg(long = "split", value_parser = parse_pair)]
        splits: Vec<(usize, usize)>,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[arg(long, default_value_t = 40)]
        samples: usize,
    },
    /// Repellor and slice verdicts for the stable equilibrium measure.
    AcDiagnostic {
        #[command(flatten)]
        common: Common,
        /// Order for the stable-dimension solve; sized to the model by default.
        #[arg(long = "nmax")]
        n_max: Option<usize>,
        /// Sized to the model by default.
        #[arg(long = "atom-order")]
        atom_order: Option<usize>,
        #[command(flatten)]
        slice: SliceArgs,
    },
    /// Slice dimensions of other equilibrium measures against the stable dimension.
    MaxDim {
        #[command(flatten)]
        common: Common,
        #[arg(long = "alternative", default_value = "zero", value_parser = parse_fixed_potential)]
        alternatives: Vec<Potential>,
        /// Order for the stable-dimension solve; sized to the model by default.
        #[arg(long = "nmax")]
        n_max: Option<usize>,
        /// Sized to the model by default.
        #[arg(long = "atom-order")]
        atom_order: Option<usize>,
        #[command(flatten)]
        slice: SliceArgs,
    },
    /// Periodic-orbit utilities.
    Orbits {
        #[command(subcommand)]
        action: OrbitsAction,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
pub enum OrbitsAction {
    /// Points of `Fix(f^n)` with a Birkhoff sum, as CSV.
    Dump {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "stable", value_parser = parse_fixed_potential)]
        potential: Potential,
        #[arg(long)]
        out: PathBuf,
    },
}
