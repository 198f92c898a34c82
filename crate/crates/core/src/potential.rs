//! Potentials of the form `t * Phi^s + c`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::EndomorphismModel;
use crate::point::Point;
use crate::stable::stable_log_derivative;

/// `phi = stable_weight * Phi^s + shift`, where `Phi^s = log |Df_s|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub stable_weight: f64,
    pub shift: f64,
}

impl Potential {
    pub const fn zero() -> Self {
        Potential { stable_weight: 0.0, shift: 0.0 }
    }

    pub const fn constant(c: f64) -> Self {
        Potential { stable_weight: 0.0, shift: c }
    }

    pub const fn stable() -> Self {
        Potential { stable_weight: 1.0, shift: 0.0 }
    }

    pub const fn scaled_stable(t: f64) -> Self {
        Potential { stable_weight: t, shift: 0.0 }
    }

    pub fn plus(self, c: f64) -> Self {
        Potential { shift: self.shift + c, ..self }
    }

    pub fn needs_stable(&self) -> bool {
        self.stable_weight != 0.0
    }

    pub fn evaluate(&self, model: &EndomorphismModel, x: &Point, horizon: usize) -> Result<f64> {
        let phi_s = if self.needs_stable() { stable_log_derivative(model, x, horizon)? } else { 0.0 };
        Ok(self.combine(phi_s, 1))
    }

    /// Birkhoff sum over `n` terms given the stable Birkhoff sum `S_n Phi^s`.
    #[inline]
    pub fn combine(&self, stable_sum: f64, n: usize) -> f64 {
        let s = if self.needs_stable() { self.stable_weight * stable_sum } else { 0.0 };
        s + self.shift * n as f64
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (w, c) = (self.stable_weight, self.shift);
        if w == 0.0 && c == 0.0 {
            write!(f, "zero")
        } else if w == 0.0 {
            write!(f, "const:{c}")
        } else if w == 1.0 && c == 0.0 {
            write!(f, "stable")
        } else if c == 0.0 {
            write!(f, "scaled:{w}")
        } else {
            write!(f, "scaled:{w}+{c}")
        }
    }
}

impl FromStr for Potential {
    type Err = Error;

    /// Accepts `zero`, `stable`, `const:<c>`, `scaled:<t>` and `scaled:<t>+<c>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognised potential `{s}`"));
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite());
        match s.trim() {
            "zero" => Ok(Potential::zero()),
            "stable" => Ok(Potential::stable()),
            other => {
                if let Some(c) = other.strip_prefix("const:") {
                    num(c).map(Potential::constant).ok_or_else(bad)
                } else if let Some(rest) = other.strip_prefix("scaled:") {
                    match rest.split_once('+') {
                        Some((t, c)) if !t.is_empty() => {
                            Ok(Potential { stable_weight: num(t).ok_or_else(bad)?, shift: num(c).ok_or_else(bad)? })
                        }
                        _ => num(rest).map(Potential::scaled_stable).ok_or_else(bad),
                    }
                } else {
                    Err(bad())
                }
            }
        }
    }
}
