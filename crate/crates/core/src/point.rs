//! Points of flat tori and circle products.
//!
//! Every coordinate is stored reduced to `[0, 1)`. Distances use the flat
//! torus metric: per coordinate the shorter of the two arcs, combined in the
//! Euclidean way.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Largest phase-space dimension handled by the built-in models.
pub const MAX_DIM: usize = 3;

/// Reduce a real number to `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduce a difference of coordinates to `[-1/2, 1/2)`.
#[inline]
pub fn wrap_diff(dx: f64) -> f64 {
    dx - (dx + 0.5).floor()
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    /// Build a point from raw coordinates, reducing each modulo 1.
    ///
    /// Panics if `coords` is empty or longer than [`MAX_DIM`].
    pub fn new(coords: &[f64]) -> Self {
        assert!(!coords.is_empty() && coords.len() <= MAX_DIM, "point dimension must be 1..={MAX_DIM}");
        let mut c = [0.0; MAX_DIM];
        for (slot, &x) in c.iter_mut().zip(coords) {
            *slot = wrap_unit(x);
        }
        Point { coords: c, dim: coords.len() as u8 }
    }

    /// Build a point from the first `dim` entries of a lifted vector.
    pub fn from_lift(v: &Vector3<f64>, dim: usize) -> Self {
        Point::new(&v.as_slice()[..dim])
    }

    pub fn origin(dim: usize) -> Self {
        Point::new(&[0.0; MAX_DIM][..dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// The representative of this point in `[0,1)^dim` as a vector, padded with zeros.
    #[inline]
    pub fn lift(&self) -> Vector3<f64> {
        Vector3::new(self.coords[0], self.coords[1], self.coords[2])
    }

    /// Shortest displacement `other - self` on the torus, each component in `[-1/2, 1/2)`.
    #[inline]
    pub fn displacement_to(&self, other: &Point) -> Vector3<f64> {
        debug_assert_eq!(self.dim, other.dim);
        let mut d = Vector3::zeros();
        for i in 0..self.dim() {
            d[i] = wrap_diff(other.coords[i] - self.coords[i]);
        }
        d
    }

    /// Flat torus distance.
    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        self.displacement_to(other).norm()
    }

    /// Translate by a tangent vector and reduce.
    #[inline]
    pub fn translate(&self, v: &Vector3<f64>) -> Point {
        Point::from_lift(&(self.lift() + v), self.dim())
    }

    /// Lexicographic order on coordinates; used for deterministic sorting.
    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        for i in 0..self.dim().min(other.dim()) {
            match self.coords[i].total_cmp(&other.coords[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim.cmp(&other.dim)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coords()).finish()
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.coords().to_vec()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(format!("point must have 1..={MAX_DIM} coordinates, got {}", v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err("point coordinates must be finite".into());
        }
        Ok(Point::new(&v))
    }
}
