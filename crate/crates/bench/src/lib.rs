//! Fixtures shared by the criterion benches.

use thermo_core::{EndomorphismModel, IntMatrix2};

pub fn linear() -> EndomorphismModel {
    EndomorphismModel::toral_linear(IntMatrix2::standard())
}

pub fn perturbed(eps: f64) -> EndomorphismModel {
    EndomorphismModel::toral_perturbed(IntMatrix2::standard(), eps).expect("admissible perturbation")
}

pub fn attractor() -> EndomorphismModel {
    EndomorphismModel::product_attractor_circle(0.1).expect("admissible parameter")
}
