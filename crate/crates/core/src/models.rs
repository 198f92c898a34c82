//! Built-in endomorphisms: hyperbolic toral maps, their trigonometric
//! perturbations, and two product constructions with a circle factor.
//!
//! Maps are evaluated on the lift `R^n` and reduced modulo 1 at the end, so
//! inverse-branch bookkeeping never crosses a branch cut.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{solve_on_torus, IntMatrix2};
use crate::point::{wrap_unit, Point};

/// Largest perturbation size ever accepted.
pub const MAX_PERTURBATION: f64 = 0.05;

/// Homotopy step in the perturbation parameter used by preimage and orbit continuation.
pub const EPS_STEP: f64 = 0.005;

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-14;

/// Serializable description of a built-in model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `(z, w) -> (z^2 + c, 2w)` on a neighbourhood of `{p_c} x S^1`.
    ProductAttractorCircle { c: f64 },
    /// `w -> A w mod 1`.
    ToralLinear {
        #[serde(rename = "A")]
        a: IntMatrix2,
    },
    /// `w -> A w + eps g(w) mod 1` with the trigonometric perturbation `g`.
    ToralPerturbed {
        #[serde(rename = "A")]
        a: IntMatrix2,
        eps: f64,
    },
    /// `(theta, w) -> (k theta, A w + eps g(w)) mod 1`.
    ProductPowerToral {
        k: u32,
        #[serde(rename = "A")]
        a: IntMatrix2,
        #[serde(default)]
        eps: f64,
    },
}

/// The toral factor `w -> A w + eps g(w)` shared by three of the models.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusMap {
    a: IntMatrix2,
    a_f: Matrix2<f64>,
    a_inv: Matrix2<f64>,
    eps: f64,
}

impl TorusMap {
    fn new(a: IntMatrix2, eps: f64) -> Result<Self> {
        if !(0.0..=MAX_PERTURBATION).contains(&eps) || !eps.is_finite() {
            return Err(Error::InvalidModel(format!(
                "perturbation size {eps} outside the admissible range [0, {MAX_PERTURBATION}]"
            )));
        }
        let a_f = a.to_f64();
        let a_inv = a_f.try_inverse().expect("|det A| >= 2");
        let map = TorusMap { a, a_f, a_inv, eps };
        if eps > 0.0 {
            map.check_cones()?;
        }
        Ok(map)
    }

    pub fn matrix(&self) -> IntMatrix2 {
        self.a
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The same matrix with a different perturbation size, skipping the cone check.
    pub(crate) fn with_eps_unchecked(&self, eps: f64) -> TorusMap {
        TorusMap { eps, ..self.clone() }
    }

    #[inline]
    fn perturbation(w: &Vector2<f64>) -> Vector2<f64> {
        let u = w[0] + 5.0 * w[1];
        let v = w[0] - 2.0 * w[1];
        let s = (PI * v).sin();
        Vector2::new((2.0 * PI * u).sin(), (2.0 * PI * w[1]).cos() + s * s)
    }

    #[inline]
    fn perturbation_jacobian(w: &Vector2<f64>) -> Matrix2<f64> {
        let u = w[0] + 5.0 * w[1];
        let v = w[0] - 2.0 * w[1];
        let cu = (2.0 * PI * u).cos();
        let sv = (2.0 * PI * v).sin();
        let sw = (2.0 * PI * w[1]).sin();
        Matrix2::new(2.0 * PI * cu, 10.0 * PI * cu, PI * sv, -2.0 * PI * sw - 2.0 * PI * sv)
    }

    #[inline]
    pub fn apply_lift(&self, w: &Vector2<f64>) -> Vector2<f64> {
        let lin = self.a_f * w;
        if self.eps == 0.0 {
            lin
        } else {
            lin + self.eps * Self::perturbation(w)
        }
    }

    #[inline]
    pub fn jacobian(&self, w: &Vector2<f64>) -> Matrix2<f64> {
        if self.eps == 0.0 {
            self.a_f
        } else {
            self.a_f + self.eps * Self::perturbation_jacobian(w)
        }
    }

    /// All preimages of `x` in `[0,1)^2`, one per coset of `Z^2 / A Z^2`.
    ///
    /// Linear seeds are continued in the perturbation parameter with damped Newton
    /// refinement at each step.
    pub fn preimages(&self, x: [f64; 2]) -> Result<Vec<[f64; 2]>> {
        let seeds = solve_on_torus(&widen(&self.a.entries()), Some(x));
        if self.eps == 0.0 {
            return Ok(seeds.into_iter().map(|y| [wrap_unit(y[0]), wrap_unit(y[1])]).collect());
        }
        seeds
            .into_iter()
            .map(|y0| {
                // the seed solves A y = x + k for the integer vector k = A y0 - x
                let y0 = Vector2::new(y0[0], y0[1]);
                let xv = Vector2::new(x[0], x[1]);
                let target = xv + (self.a_f * y0 - xv).map(f64::round);
                let y = self.continue_preimage(y0, target)?;
                Ok([wrap_unit(y[0]), wrap_unit(y[1])])
            })
            .collect()
    }

    fn continue_preimage(&self, seed: Vector2<f64>, target: Vector2<f64>) -> Result<Vector2<f64>> {
        let steps = (self.eps / EPS_STEP).ceil().max(1.0) as usize;
        let mut y = seed;
        for s in 1..=steps {
            let eps = self.eps * s as f64 / steps as f64;
            let stage = self.with_eps_unchecked(eps);
            y = stage.newton_solve(y, target).ok_or_else(|| Error::NewtonDivergence {
                seed: Point::new(seed.as_slice()),
                iterations: NEWTON_MAX_ITER,
            })?;
        }
        Ok(y)
    }

    /// Solve `F(y) = target` for the lifted map by damped Newton iteration.
    fn newton_solve(&self, mut y: Vector2<f64>, target: Vector2<f64>) -> Option<Vector2<f64>> {
        let mut res = self.apply_lift(&y) - target;
        for _ in 0..NEWTON_MAX_ITER {
            let norm = res.norm();
            if norm < NEWTON_TOL {
                return Some(y);
            }
            let step = self.jacobian(&y).lu().solve(&res)?;
            let mut lambda = 1.0;
            loop {
                let trial = y - lambda * step;
                let trial_res = self.apply_lift(&trial) - target;
                if trial_res.norm() < norm || lambda < 1e-4 {
                    y = trial;
                    res = trial_res;
                    break;
                }
                lambda *= 0.5;
            }
        }
        (res.norm() < 1e-12).then_some(y)
    }

    /// Sampled cone-field check certifying that the perturbation keeps the map a
    /// hyperbolic local diffeomorphism.
    fn check_cones(&self) -> Result<()> {
        const GRID: usize = 96;
        let (_, lu) = self.a.eigenvalues();
        let es = self.a.stable_eigenvector();
        let eu = {
            let m = self.a_f - Matrix2::identity() * self.a.eigenvalues().0;
            // the unstable eigenvector spans the column space of A - lambda_s I
            let c = if m.column(0).norm() > m.column(1).norm() { m.column(0) } else { m.column(1) };
            c.normalize()
        };
        let angle_u = eu[1].atan2(eu[0]);
        // the unstable cone takes 0.69 of the angle between the eigenlines; the
        // stable cone is its complement
        let cone_angle = {
            let cos = es.dot(&eu).abs().min(1.0);
            0.69 * cos.acos().min(PI - cos.acos())
        };
        let det_a = self.a.det() as f64;
        let in_unstable_cone = |v: &Vector2<f64>| angle_to_line(v, &eu) < cone_angle;
        for i in 0..GRID {
            for j in 0..GRID {
                let w = Vector2::new(i as f64 / GRID as f64, j as f64 / GRID as f64);
                let df = self.jacobian(&w);
                let det = df.determinant();
                if det * det_a.signum() <= 1e-3 {
                    return Err(Error::InvalidModel(format!(
                        "eps = {} creates a fold: det Df = {det:.4} at {:?}",
                        self.eps,
                        w.as_slice()
                    )));
                }
                for t in 0..=8 {
                    let theta = angle_u - cone_angle + 2.0 * cone_angle * t as f64 / 8.0;
                    let v = Vector2::new(theta.cos(), theta.sin());
                    let image = df * v;
                    if !in_unstable_cone(&image) || image.norm() < 1.0 + 0.1 * (lu.abs() - 1.0) {
                        return Err(Error::InvalidModel(format!(
                            "eps = {} breaks the unstable cone at {:?}",
                            self.eps,
                            w.as_slice()
                        )));
                    }
                }
                // complementary cone: vectors mapped into it must contract
                for t in 0..=16 {
                    let theta = angle_u + cone_angle + (PI - 2.0 * cone_angle) * t as f64 / 16.0;
                    let v = Vector2::new(theta.cos(), theta.sin());
                    let image = df * v;
                    if !in_unstable_cone(&image) && image.norm() >= 1.0 {
                        return Err(Error::InvalidModel(format!(
                            "eps = {} breaks stable contraction at {:?}",
                            self.eps,
                            w.as_slice()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn angle_to_line(v: &Vector2<f64>, dir: &Vector2<f64>) -> f64 {
    let c = (v.dot(dir) / v.norm()).abs().min(1.0);
    c.acos()
}

fn widen(m: &[[i64; 2]; 2]) -> [[i128; 2]; 2] {
    [[m[0][0] as i128, m[0][1] as i128], [m[1][0] as i128, m[1][1] as i128]]
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    AttractorCircle { c: f64, p_c: f64 },
    Toral(TorusMap),
    PowerToral { k: u32, torus: TorusMap },
}

/// A validated endomorphism together with its degree on the basic set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct EndomorphismModel {
    spec: ModelSpec,
    kind: Kind,
    degree: usize,
}

impl TryFrom<ModelSpec> for EndomorphismModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        EndomorphismModel::new(spec)
    }
}

impl From<EndomorphismModel> for ModelSpec {
    fn from(m: EndomorphismModel) -> Self {
        m.spec
    }
}

impl EndomorphismModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let (kind, degree) = match &spec {
            ModelSpec::ProductAttractorCircle { c } => {
                let c = *c;
                if !(c > 0.0 && c < 0.2) {
                    return Err(Error::InvalidModel(format!("c = {c} must lie in (0, 0.2)")));
                }
                let p_c = (1.0 - (1.0 - 4.0 * c).sqrt()) / 2.0;
                (Kind::AttractorCircle { c, p_c }, 2)
            }
            ModelSpec::ToralLinear { a } => (Kind::Toral(TorusMap::new(*a, 0.0)?), a.det().unsigned_abs() as usize),
            ModelSpec::ToralPerturbed { a, eps } => {
                (Kind::Toral(TorusMap::new(*a, *eps)?), a.det().unsigned_abs() as usize)
            }
            ModelSpec::ProductPowerToral { k, a, eps } => {
                if !(2..=64).contains(k) {
                    return Err(Error::InvalidModel(format!("k = {k} must lie in 2..=64")));
                }
                let torus = TorusMap::new(*a, *eps)?;
                (Kind::PowerToral { k: *k, torus }, *k as usize * a.det().unsigned_abs() as usize)
            }
        };
        Ok(EndomorphismModel { spec, kind, degree })
    }

    pub fn toral_linear(a: IntMatrix2) -> Self {
        Self::new(ModelSpec::ToralLinear { a }).expect("validated matrix")
    }

    pub fn toral_perturbed(a: IntMatrix2, eps: f64) -> Result<Self> {
        Self::new(ModelSpec::ToralPerturbed { a, eps })
    }

    pub fn product_power_toral(k: u32, a: IntMatrix2, eps: f64) -> Result<Self> {
        Self::new(ModelSpec::ProductPowerToral { k, a, eps })
    }

    pub fn product_attractor_circle(c: f64) -> Result<Self> {
        Self::new(ModelSpec::ProductAttractorCircle { c })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Number of preimages of every point of the basic set.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn phase_dim(&self) -> usize {
        match self.kind {
            Kind::AttractorCircle { .. } | Kind::Toral(_) => 2,
            Kind::PowerToral { .. } => 3,
        }
    }

    /// Dimension of the stable bundle; one for every built-in model.
    pub fn stable_dim(&self) -> usize {
        1
    }

    /// The toral factor, when the model has one.
    pub fn torus(&self) -> Option<&TorusMap> {
        match &self.kind {
            Kind::Toral(t) | Kind::PowerToral { torus: t, .. } => Some(t),
            Kind::AttractorCircle { .. } => None,
        }
    }

    /// Index of the first toral coordinate in a point of this model.
    pub(crate) fn torus_offset(&self) -> usize {
        match self.kind {
            Kind::PowerToral { .. } => 1,
            _ => 0,
        }
    }

    /// Circle factor multiplier `k` for product models.
    pub fn circle_multiplier(&self) -> Option<u32> {
        match self.kind {
            Kind::PowerToral { k, .. } => Some(k),
            Kind::AttractorCircle { .. } => Some(2),
            Kind::Toral(_) => None,
        }
    }

    /// The attracting fixed point `p_c` for the attractor-circle product.
    pub fn attracting_point(&self) -> Option<f64> {
        match self.kind {
            Kind::AttractorCircle { p_c, .. } => Some(p_c),
            _ => None,
        }
    }

    /// True when the derivative is constant (no perturbation, no attractor factor).
    pub fn is_linear(&self) -> bool {
        match &self.kind {
            Kind::Toral(t) | Kind::PowerToral { torus: t, .. } => t.eps == 0.0,
            Kind::AttractorCircle { .. } => false,
        }
    }

    /// Evaluate the lifted map; coordinates beyond `phase_dim` are left at zero.
    #[inline]
    pub fn apply_lift(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match &self.kind {
            Kind::AttractorCircle { c, .. } => Vector3::new(x[0] * x[0] + c, 2.0 * x[1], 0.0),
            Kind::Toral(t) => {
                let w = t.apply_lift(&Vector2::new(x[0], x[1]));
                Vector3::new(w[0], w[1], 0.0)
            }
            Kind::PowerToral { k, torus } => {
                let w = torus.apply_lift(&Vector2::new(x[1], x[2]));
                Vector3::new(*k as f64 * x[0], w[0], w[1])
            }
        }
    }

    #[inline]
    pub fn apply(&self, x: &Point) -> Point {
        Point::from_lift(&self.apply_lift(&x.lift()), self.phase_dim())
    }

    /// `f^n(x)`.
    pub fn iterate(&self, x: &Point, n: usize) -> Point {
        (0..n).fold(*x, |p, _| self.apply(&p))
    }

    /// Jacobian of the lifted map, padded to 3x3 with zeros.
    #[inline]
    pub fn differential(&self, x: &Point) -> Matrix3<f64> {
        match &self.kind {
            Kind::AttractorCircle { .. } => Matrix3::new(2.0 * x.coord(0), 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0),
            Kind::Toral(t) => {
                let j = t.jacobian(&Vector2::new(x.coord(0), x.coord(1)));
                Matrix3::new(j[(0, 0)], j[(0, 1)], 0.0, j[(1, 0)], j[(1, 1)], 0.0, 0.0, 0.0, 0.0)
            }
            Kind::PowerToral { k, torus } => {
                let j = torus.jacobian(&Vector2::new(x.coord(1), x.coord(2)));
                Matrix3::new(*k as f64, 0.0, 0.0, 0.0, j[(0, 0)], j[(0, 1)], 0.0, j[(1, 0)], j[(1, 1)])
            }
        }
    }

    /// Preimages of `x` inside the basic set; exactly [`degree`](Self::degree) points.
    pub fn preimages(&self, x: &Point) -> Result<Vec<Point>> {
        match &self.kind {
            Kind::AttractorCircle { c, .. } => {
                let z = x.coord(0);
                if z < *c {
                    return Err(Error::OutsideBasin(*x));
                }
                let zp = (z - c).sqrt();
                let th = x.coord(1);
                Ok(vec![Point::new(&[zp, th / 2.0]), Point::new(&[zp, (th + 1.0) / 2.0])])
            }
            Kind::Toral(t) => Ok(t.preimages([x.coord(0), x.coord(1)])?.into_iter().map(|w| Point::new(&w)).collect()),
            Kind::PowerToral { k, torus } => {
                let ws = torus.preimages([x.coord(1), x.coord(2)])?;
                let mut out = Vec::with_capacity(*k as usize * ws.len());
                for j in 0..*k {
                    let th = (x.coord(0) + j as f64) / *k as f64;
                    out.extend(ws.iter().map(|w| Point::new(&[th, w[0], w[1]])));
                }
                Ok(out)
            }
        }
    }

    /// Draw a point of the basic set (uniform in the torus/circle coordinates).
    pub fn sample_basic_set<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            Kind::AttractorCircle { p_c, .. } => Point::new(&[*p_c, rng.random::<f64>()]),
            Kind::Toral(_) => Point::new(&[rng.random::<f64>(), rng.random::<f64>()]),
            Kind::PowerToral { .. } => Point::new(&[rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]),
        }
    }

    /// Whether the stable direction is known exactly, so slice checks carry no
    /// approximation error beyond the atoms themselves.
    pub fn has_exact_stable_direction(&self) -> bool {
        self.exact_stable_direction().is_some()
    }

    /// Exact stable direction for models with constant derivative on the basic set.
    pub(crate) fn exact_stable_direction(&self) -> Option<Vector3<f64>> {
        match &self.kind {
            Kind::AttractorCircle { .. } => Some(Vector3::new(1.0, 0.0, 0.0)),
            Kind::Toral(t) if t.eps == 0.0 => {
                let v = t.a.stable_eigenvector();
                Some(Vector3::new(v[0], v[1], 0.0))
            }
            Kind::PowerToral { torus, .. } if torus.eps == 0.0 => {
                let v = torus.a.stable_eigenvector();
                Some(Vector3::new(0.0, v[0], v[1]))
            }
            _ => None,
        }
    }
}
