//! Integer 2x2 matrices and the lattice arithmetic behind exact preimage and
//! periodic-point enumeration on the 2-torus.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An integer matrix inducing a hyperbolic, non-invertible endomorphism of the 2-torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 2]; 2]", into = "[[i64; 2]; 2]")]
pub struct IntMatrix2 {
    entries: [[i64; 2]; 2],
}

impl IntMatrix2 {
    /// Validate `entries` as a hyperbolic toral endomorphism: `|det| >= 2`, real
    /// eigenvalues, one inside and one outside the unit circle.
    pub fn new(entries: [[i64; 2]; 2]) -> Result<Self> {
        let m = IntMatrix2 { entries };
        let det = m.det();
        if det.abs() < 2 {
            return Err(Error::InvalidModel(format!(
                "|det A| = {} but a non-invertible torus map needs |det A| >= 2",
                det.abs()
            )));
        }
        let tr = m.trace() as f64;
        let disc = tr * tr - 4.0 * det as f64;
        if disc <= 0.0 {
            return Err(Error::InvalidModel("eigenvalues of A are not real and distinct".into()));
        }
        let (ls, lu) = m.eigenvalues();
        if !(ls.abs() < 1.0 && lu.abs() > 1.0) {
            return Err(Error::InvalidModel(format!(
                "A is not hyperbolic with one contracting direction (eigenvalues {ls}, {lu})"
            )));
        }
        Ok(m)
    }

    /// The matrix `[[3, 2], [2, 2]]` used throughout the examples.
    pub fn standard() -> Self {
        IntMatrix2::new([[3, 2], [2, 2]]).expect("standard matrix is hyperbolic")
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.entries
    }

    pub fn det(&self) -> i64 {
        det2(&self.entries)
    }

    pub fn trace(&self) -> i64 {
        self.entries[0][0] + self.entries[1][1]
    }

    /// Eigenvalues ordered as `(stable, unstable)` by modulus.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.trace() as f64;
        let det = self.det() as f64;
        let root = (tr * tr - 4.0 * det).sqrt();
        // avoid cancellation: compute the large root first
        let big = if tr >= 0.0 { (tr + root) / 2.0 } else { (tr - root) / 2.0 };
        let small = det / big;
        (small, big)
    }

    /// Unit eigenvector for the contracting eigenvalue, with a fixed sign convention
    /// (first non-negligible component positive).
    pub fn stable_eigenvector(&self) -> Vector2<f64> {
        let (ls, _) = self.eigenvalues();
        let [[a, b], [c, d]] = self.entries;
        let v = if b != 0 { Vector2::new(b as f64, ls - a as f64) } else { Vector2::new(ls - d as f64, c as f64) };
        canonical_sign(v.normalize())
    }

    pub fn to_f64(&self) -> Matrix2<f64> {
        let [[a, b], [c, d]] = self.entries;
        Matrix2::new(a as f64, b as f64, c as f64, d as f64)
    }

    /// `A^n` computed in exact integer arithmetic.
    pub fn pow(&self, n: u32) -> [[i128; 2]; 2] {
        let a = widen(&self.entries);
        let mut acc = [[1, 0], [0, 1]];
        for _ in 0..n {
            acc = mul_i128(&acc, &a);
        }
        acc
    }

    /// `|det(A^n - I)|`, the number of fixed points of `f_A^n`.
    pub fn periodic_count(&self, n: u32) -> u128 {
        let mut b = self.pow(n);
        b[0][0] -= 1;
        b[1][1] -= 1;
        det2_i128(&b).unsigned_abs()
    }
}

impl TryFrom<[[i64; 2]; 2]> for IntMatrix2 {
    type Error = Error;

    fn try_from(entries: [[i64; 2]; 2]) -> Result<Self> {
        IntMatrix2::new(entries)
    }
}

impl From<IntMatrix2> for [[i64; 2]; 2] {
    fn from(m: IntMatrix2) -> Self {
        m.entries
    }
}

fn canonical_sign(v: Vector2<f64>) -> Vector2<f64> {
    let lead = if v[0].abs() > 1e-12 { v[0] } else { v[1] };
    if lead < 0.0 {
        -v
    } else {
        v
    }
}

fn det2(m: &[[i64; 2]; 2]) -> i64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn det2_i128(m: &[[i128; 2]; 2]) -> i128 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn widen(m: &[[i64; 2]; 2]) -> [[i128; 2]; 2] {
    [[m[0][0] as i128, m[0][1] as i128], [m[1][0] as i128, m[1][1] as i128]]
}

fn mul_i128(x: &[[i128; 2]; 2], y: &[[i128; 2]; 2]) -> [[i128; 2]; 2] {
    [
        [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
        [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
    ]
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    // returns (g, x, y) with a x + b y = g >= 0
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Lower-triangular basis `[[a, 0], [b, c]]` (columns generate the lattice) of the
/// column lattice `M Z^2`, with `a, c > 0` and `0 <= b < c`.
pub fn hermite_lower(m: &[[i128; 2]; 2]) -> [[i128; 2]; 2] {
    let det = det2_i128(m);
    assert!(det != 0, "Hermite form of a singular matrix");
    let (p, q) = (m[0][0], m[0][1]);
    let (g, x, y) = ext_gcd(p, q);
    // column ops with unimodular U = [[x, -q/g], [y, p/g]]
    let col1 = (g, m[1][0] * x + m[1][1] * y);
    let col2_bottom = -m[1][0] * (q / g) + m[1][1] * (p / g);
    let c = col2_bottom.abs();
    let b = col1.1.rem_euclid(c);
    [[g, 0], [b, c]]
}

/// Representatives of `Z^2 / M Z^2`; there are exactly `|det M|` of them.
pub fn coset_representatives(m: &[[i128; 2]; 2]) -> Vec<[i128; 2]> {
    let h = hermite_lower(m);
    let (a, c) = (h[0][0], h[1][1]);
    let mut reps = Vec::with_capacity((a * c) as usize);
    for i in 0..a {
        for j in 0..c {
            reps.push([i, j]);
        }
    }
    reps
}

/// Solutions of `M y = k (mod Z^2)` reduced to `[0,1)^2`, one per coset representative
/// `k` of `Z^2 / M Z^2`, computed exactly as rationals before rounding to `f64`.
pub fn solve_on_torus(m: &[[i128; 2]; 2], offset: Option<[f64; 2]>) -> Vec<[f64; 2]> {
    let det = det2_i128(m);
    let adj = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
    let den = det.abs();
    let sign = det.signum();
    coset_representatives(m)
        .into_iter()
        .map(|k| {
            let mut y = [0.0; 2];
            for (i, yi) in y.iter_mut().enumerate() {
                let num = sign * (adj[i][0] * k[0] + adj[i][1] * k[1]);
                let r = num.rem_euclid(den);
                *yi = r as f64 / den as f64;
            }
            if let Some(off) = offset {
                // M^{-1} applied to the real offset, added to the rational part
                let inv = [
                    [adj[0][0] as f64 / det as f64, adj[0][1] as f64 / det as f64],
                    [adj[1][0] as f64 / det as f64, adj[1][1] as f64 / det as f64],
                ];
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi += inv[i][0] * off[0] + inv[i][1] * off[1];
                }
            }
            y
        })
        .collect()
}
