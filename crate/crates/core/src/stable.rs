//! Stable directions, the stable potential `Phi^s = log |Df_s|`, finite
//! prehistory trees and rho-maximal prehistories.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::EndomorphismModel;
use crate::point::Point;

/// Default finite-time horizon for stable directions.
pub const DEFAULT_HORIZON: usize = 25;

/// Maximum number of leaves in a prehistory tree.
pub const TREE_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableDirection {
    pub at: Point,
    #[serde(with = "vec3")]
    pub vector: Vector3<f64>,
    pub horizon: usize,
}

mod vec3 {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let mut out = Vector3::zeros();
        for (slot, x) in out.iter_mut().zip(v) {
            *slot = x;
        }
        Ok(out)
    }
}

fn block_det(m: &Matrix3<f64>, dim: usize) -> f64 {
    match dim {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.determinant(),
    }
}

fn orthonormalize(vs: &mut [Vector3<f64>]) -> Vec<f64> {
    let mut norms = Vec::with_capacity(vs.len());
    for i in 0..vs.len() {
        for j in 0..i {
            let proj = vs[j].dot(&vs[i]);
            vs[i] -= proj * vs[j];
        }
        let n = vs[i].norm();
        norms.push(n);
        vs[i] /= n;
    }
    norms
}

/// Make the leading non-negligible component positive.
fn canonical(v: Vector3<f64>) -> Vector3<f64> {
    let lead = v.iter().copied().find(|c| c.abs() > 1e-9).unwrap_or(0.0);
    if lead < 0.0 {
        -v
    } else {
        v
    }
}

/// Most-contracted right singular vector of `Df^horizon(x)`.
///
/// The product is never formed: an orthonormal frame of `dim - 1` vectors is pushed
/// through the transposed Jacobians from the far end of the orbit, which converges
/// to the dominant right singular subspace; its orthogonal complement is returned.
/// Models with a constant stable direction return it exactly.
pub fn stable_direction(model: &EndomorphismModel, x: &Point, horizon: usize) -> Result<StableDirection> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if let Some(v) = model.exact_stable_direction() {
        return Ok(StableDirection { at: *x, vector: v, horizon });
    }
    let dim = model.phase_dim();
    let mut jacobians = Vec::with_capacity(horizon);
    let mut p = *x;
    let mut log_det = 0.0;
    for _ in 0..horizon {
        let d = model.differential(&p);
        log_det += block_det(&d, dim).abs().ln();
        jacobians.push(d);
        p = model.apply(&p);
    }
    let mut frame: Vec<Vector3<f64>> = match dim {
        2 => vec![Vector3::new(0.6, 0.8, 0.0)],
        _ => vec![Vector3::new(0.48, 0.6, 0.64), Vector3::new(-0.6, 0.64, 0.48)],
    };
    let mut log_sv = vec![0.0; frame.len()];
    for d in jacobians.iter().rev() {
        let dt = d.transpose();
        for v in frame.iter_mut() {
            *v = dt * *v;
        }
        for (acc, n) in log_sv.iter_mut().zip(orthonormalize(&mut frame)) {
            *acc += n.ln();
        }
    }
    let vector = match dim {
        2 => Vector3::new(-frame[0][1], frame[0][0], 0.0),
        _ => frame[0].cross(&frame[1]).normalize(),
    };
    let log_min = log_det - log_sv.iter().sum::<f64>();
    let log_gap = log_sv.last().copied().unwrap_or(0.0) - log_min;
    if log_gap.is_finite() && log_gap < 1e-8 {
        return Err(Error::DegenerateSingularValues { log_gap });
    }
    Ok(StableDirection { at: *x, vector: canonical(vector), horizon })
}

/// `log |Df(x) e^s_x|`, the stable potential at `x`.
pub fn stable_log_derivative(model: &EndomorphismModel, x: &Point, horizon: usize) -> Result<f64> {
    let dir = stable_direction(model, x, horizon)?;
    Ok(stable_log_derivative_along(model, x, &dir.vector))
}

#[inline]
pub(crate) fn stable_log_derivative_along(model: &EndomorphismModel, x: &Point, v: &Vector3<f64>) -> f64 {
    (model.differential(x) * v).norm().ln()
}

/// `S_n Phi^s(x) = log |Df_s^n(x)|`, summing `n` terms along the forward orbit.
pub fn stable_birkhoff(model: &EndomorphismModel, x: &Point, n: usize, horizon: usize) -> Result<f64> {
    let mut p = *x;
    let mut sum = 0.0;
    for _ in 0..n {
        sum += stable_log_derivative(model, &p, horizon)?;
        p = model.apply(&p);
    }
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub point: Point,
    /// Index of the image `f(point)` in the previous level.
    pub parent: usize,
}

/// All backward branches of length `depth` from `root`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrehistoryTree {
    pub root: Point,
    pub depth: usize,
    /// `levels[j]` holds the `j`-th preimages; `levels[0]` is the root alone.
    pub levels: Vec<Vec<TreeNode>>,
}

impl PrehistoryTree {
    pub fn leaf_count(&self) -> usize {
        self.levels.last().map_or(1, Vec::len)
    }

    /// The branch `(x, x_{-1}, ..., x_{-j})` ending at node `idx` of level `j`.
    pub fn branch(&self, level: usize, idx: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(level + 1);
        let mut i = idx;
        for j in (0..=level).rev() {
            let node = &self.levels[j][i];
            out.push(node.point);
            i = node.parent;
        }
        out.reverse();
        out
    }
}

pub fn prehistory_tree(model: &EndomorphismModel, x: &Point, depth: usize) -> Result<PrehistoryTree> {
    let d = model.degree() as u128;
    let leaves = d.checked_pow(depth as u32).unwrap_or(u128::MAX);
    if leaves > TREE_BUDGET as u128 {
        return Err(Error::BudgetExceeded { predicted: leaves, budget: TREE_BUDGET as u128 });
    }
    let mut levels = vec![vec![TreeNode { point: *x, parent: 0 }]];
    for _ in 0..depth {
        let prev = levels.last().expect("root level");
        let next: Vec<Vec<TreeNode>> = prev
            .par_iter()
            .enumerate()
            .map(|(i, node)| {
                Ok(model.preimages(&node.point)?.into_iter().map(|point| TreeNode { point, parent: i }).collect())
            })
            .collect::<Result<_>>()?;
        levels.push(next.into_iter().flatten().collect());
    }
    Ok(PrehistoryTree { root: *x, depth, levels })
}

/// One rho-maximal prehistory `(x, ..., x_{-p})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoMaximalEntry {
    /// Node index of `x_{-p}` within tree level `p`.
    pub node: usize,
    pub p: usize,
    /// `log |Df_s^p(x_{-p})|`.
    pub log_derivative: f64,
    /// `log |Df_s^{p-1}(x_{-p+1})|`.
    pub log_derivative_prev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoMaximalSet {
    pub x: Point,
    pub rho: f64,
    pub eps: f64,
    pub entries: Vec<RhoMaximalEntry>,
    /// Distinct cutoffs, sorted decreasingly.
    pub cutoffs: Vec<usize>,
}

impl RhoMaximalSet {
    /// `|Df_s^p(x_{-p})| eps < rho <= |Df_s^{p-1}(x_{-p+1})| eps` for every entry.
    pub fn bracketing_holds(&self) -> bool {
        let (lr, le) = (self.rho.ln(), self.eps.ln());
        self.entries.iter().all(|e| e.log_derivative + le < lr && lr <= e.log_derivative_prev + le)
    }
}

/// Stable potential at every node of the tree, level by level.
pub fn tree_stable_potential(
    model: &EndomorphismModel,
    tree: &PrehistoryTree,
    horizon: usize,
) -> Result<Vec<Vec<f64>>> {
    tree.levels
        .iter()
        .map(|level| level.par_iter().map(|n| stable_log_derivative(model, &n.point, horizon)).collect())
        .collect()
}

/// Cut every branch of `tree` at its rho-maximal length.
///
/// For a branch the cutoff is the least `p` with `|Df_s^p(x_{-p})| eps < rho`; an exact
/// tie `|Df_s^p(x_{-p})| eps = rho` is not a cutoff, so the larger `p` is taken.
pub fn rho_maximal(
    model: &EndomorphismModel,
    tree: &PrehistoryTree,
    rho: f64,
    eps: f64,
    horizon: usize,
) -> Result<RhoMaximalSet> {
    if !(rho > 0.0 && eps > 0.0 && rho < eps) {
        return Err(Error::InvalidArgument(format!("need 0 < rho < eps, got rho={rho}, eps={eps}")));
    }
    let phi = tree_stable_potential(model, tree, horizon)?;
    // same comparison as `bracketing_holds`, so ties resolve identically
    let (lr, le) = (rho.ln(), eps.ln());
    // cumulative log derivative at each node: sum of Phi^s over x_{-1}..x_{-j}
    let mut cumulative: Vec<Vec<f64>> = vec![vec![0.0]];
    for j in 1..tree.levels.len() {
        let prev = &cumulative[j - 1];
        let row = tree.levels[j].iter().zip(&phi[j]).map(|(node, f)| prev[node.parent] + f).collect();
        cumulative.push(row);
    }
    let mut entries = Vec::new();
    let mut seen = vec![Vec::new(); tree.levels.len()];
    for (j, level) in tree.levels.iter().enumerate() {
        seen[j] = vec![false; level.len()];
    }
    let leaves = tree.leaf_count();
    for leaf in 0..leaves {
        // walk from the root outwards along this leaf's branch
        let mut path = vec![leaf];
        for j in (1..=tree.depth).rev() {
            let parent = tree.levels[j][*path.last().unwrap()].parent;
            path.push(parent);
        }
        path.reverse(); // path[j] = node index at level j
        let cut = (1..=tree.depth).find(|&p| cumulative[p][path[p]] + le < lr);
        let Some(p) = cut else {
            let weakest = phi.iter().skip(1).flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let required = if weakest < 0.0 { ((lr - le) / weakest).ceil() as usize } else { usize::MAX };
            return Err(Error::DepthInsufficient { depth: tree.depth, required });
        };
        if !seen[p][path[p]] {
            seen[p][path[p]] = true;
            entries.push(RhoMaximalEntry {
                node: path[p],
                p,
                log_derivative: cumulative[p][path[p]],
                log_derivative_prev: cumulative[p - 1][path[p - 1]],
            });
        }
    }
    let mut cutoffs: Vec<usize> = entries.iter().map(|e| e.p).collect();
    cutoffs.sort_unstable_by(|a, b| b.cmp(a));
    cutoffs.dedup();
    Ok(RhoMaximalSet { x: tree.root, rho, eps, entries, cutoffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntMatrix2;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA_S: f64 = 0.438_447_187_191_169_7; // (5 - sqrt 17) / 2

    fn linear() -> EndomorphismModel {
        EndomorphismModel::toral_linear(IntMatrix2::standard())
    }

    fn perturbed(eps: f64) -> EndomorphismModel {
        EndomorphismModel::toral_perturbed(IntMatrix2::standard(), eps).unwrap()
    }

    fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0).acos()
    }

    #[test]
    fn linear_direction_is_contracting_eigenvector() {
        assert_abs_diff_eq!(LAMBDA_S, (5.0 - 17f64.sqrt()) / 2.0, epsilon = 1e-16);
        let v = Vector3::new(2.0, LAMBDA_S - 3.0, 0.0).normalize();
        for h in [1, 5, 25] {
            let d = stable_direction(&linear(), &Point::new(&[0.3, 0.7]), h).unwrap();
            assert!(angle(&d.vector, &v) < 1e-15);
            assert_abs_diff_eq!(d.vector.norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn general_method_agrees_with_exact_for_linear_maps() {
        // force the iterative path by using a tiny perturbation
        let m = perturbed(1e-12);
        let v = Vector3::new(2.0, LAMBDA_S - 3.0, 0.0).normalize();
        let d = stable_direction(&m, &Point::new(&[0.1, 0.2]), 25).unwrap();
        assert!(angle(&d.vector, &v) < 1e-9);
    }

    #[test]
    fn zero_perturbation_reduces_to_linear() {
        let x = Point::new(&[0.4, 0.9]);
        let a = stable_direction(&perturbed(0.0), &x, 10).unwrap();
        let b = stable_direction(&linear(), &x, 10).unwrap();
        assert_eq!(a.vector, b.vector);
    }

    #[test]
    fn horizon_convergence_under_perturbation() {
        let m = perturbed(0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = m.sample_basic_set(&mut rng);
            let a = stable_direction(&m, &x, 15).unwrap();
            let b = stable_direction(&m, &x, 25).unwrap();
            assert!(angle(&a.vector, &b.vector) < 1e-6);
        }
    }

    #[test]
    fn direction_is_invariant_under_derivative() {
        for m in [perturbed(0.01), perturbed(0.02)] {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            for _ in 0..50 {
                let x = m.sample_basic_set(&mut rng);
                let here = stable_direction(&m, &x, 25).unwrap().vector;
                let there = stable_direction(&m, &m.apply(&x), 25).unwrap().vector;
                let pushed = m.differential(&x) * here;
                assert!(angle(&pushed, &there) < 1e-6);
            }
        }
    }

    #[test]
    fn stable_potential_values() {
        let phi = stable_log_derivative(&linear(), &Point::new(&[0.2, 0.5]), 25).unwrap();
        assert_abs_diff_eq!(phi, LAMBDA_S.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(phi, -0.824_56, epsilon = 1e-4);

        let m = EndomorphismModel::product_attractor_circle(0.1).unwrap();
        let p_c = m.attracting_point().unwrap();
        let phi = stable_log_derivative(&m, &Point::new(&[p_c, 0.3]), 25).unwrap();
        assert_abs_diff_eq!(phi, (1.0 - 0.6f64.sqrt()).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(phi, -1.489_86, epsilon = 1e-4);

        let m = EndomorphismModel::product_power_toral(3, IntMatrix2::standard(), 0.01).unwrap();
        let d = stable_direction(&m, &Point::new(&[0.2, 0.3, 0.4]), 25).unwrap();
        assert!(d.vector[0].abs() < 1e-12, "stable direction must be toral");
    }

    #[test]
    fn stable_potential_cocycle() {
        let m = perturbed(0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let x = m.sample_basic_set(&mut rng);
            let v = stable_direction(&m, &x, 25).unwrap().vector;
            let two_step = (m.differential(&m.apply(&x)) * (m.differential(&x) * v)).norm().ln();
            let sum = stable_birkhoff(&m, &x, 2, 25).unwrap();
            assert_abs_diff_eq!(sum, two_step, epsilon = 1e-8);
        }
    }

    #[test]
    fn periodic_birkhoff_sum_is_log_stable_eigenvalue() {
        // independent route: eigenvalue of the derivative of f^n along a periodic orbit
        let m = perturbed(0.01);
        let set = crate::orbits::fixed_points(&m, 3).unwrap();
        for p in set.points.iter().step_by(7) {
            let mut jac = nalgebra::Matrix2::identity();
            let mut q = *p;
            for _ in 0..3 {
                let d = m.differential(&q);
                jac = nalgebra::Matrix2::new(d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]) * jac;
                q = m.apply(&q);
            }
            let ev = jac.eigenvalues().expect("real eigenvalues");
            let small = ev[0].abs().min(ev[1].abs());
            let s = stable_birkhoff(&m, p, 3, 25).unwrap();
            assert_abs_diff_eq!(s, small.ln(), epsilon = 1e-8);
        }
    }

    #[test]
    fn tree_sizes() {
        let t = prehistory_tree(&linear(), &Point::new(&[0.3, 0.7]), 3).unwrap();
        assert_eq!(t.leaf_count(), 8);
        let m = EndomorphismModel::product_power_toral(3, IntMatrix2::standard(), 0.0).unwrap();
        let t = prehistory_tree(&m, &Point::new(&[0.1, 0.3, 0.7]), 2).unwrap();
        assert_eq!(t.leaf_count(), 36);
        assert!(matches!(prehistory_tree(&linear(), &Point::new(&[0.3, 0.7]), 21), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn tree_branches_are_consistent() {
        let m = perturbed(0.01);
        let t = prehistory_tree(&m, &Point::new(&[0.3, 0.7]), 6).unwrap();
        for leaf in 0..t.leaf_count() {
            let b = t.branch(6, leaf);
            for j in 1..b.len() {
                assert!(m.apply(&b[j]).distance(&b[j - 1]) < 1e-10);
            }
        }
        // branching factor d at every node
        for j in 1..=6 {
            assert_eq!(t.levels[j].len(), 2 * t.levels[j - 1].len());
        }
    }

    #[test]
    fn rho_maximal_linear_cutoff() {
        let m = linear();
        let t = prehistory_tree(&m, &Point::new(&[0.3, 0.7]), 6).unwrap();
        let set = rho_maximal(&m, &t, 0.01, 0.1, 25).unwrap();
        assert_eq!(set.cutoffs, vec![3]);
        assert!(set.entries.iter().all(|e| e.p == 3));
        assert_eq!(set.entries.len(), 8);
        assert!(set.bracketing_holds());
        assert!(LAMBDA_S.powi(3) * 0.1 < 0.01 && 0.01 <= LAMBDA_S.powi(2) * 0.1);
    }

    #[test]
    fn rho_maximal_one_step_and_tie() {
        let m = linear();
        let t = prehistory_tree(&m, &Point::new(&[0.3, 0.7]), 4).unwrap();
        let phi = stable_log_derivative(&m, &Point::new(&[0.0, 0.0]), 25).unwrap();
        let eps = 0.1;
        // rho just above one contraction step: p = 1
        let rho = eps * phi.exp() * (1.0 + 1e-9);
        let set = rho_maximal(&m, &t, rho, eps, 25).unwrap();
        assert_eq!(set.cutoffs, vec![1]);
        // exact tie is not a cutoff; the next level is taken
        let rho = (phi + eps.ln()).exp();
        let set = rho_maximal(&m, &t, rho, eps, 25).unwrap();
        if phi + eps.ln() == rho.ln() {
            assert_eq!(set.cutoffs, vec![2]);
        }
        assert!(set.bracketing_holds());
    }

    #[test]
    fn rho_maximal_needs_depth() {
        let m = linear();
        let t = prehistory_tree(&m, &Point::new(&[0.3, 0.7]), 2).unwrap();
        match rho_maximal(&m, &t, 1e-4, 0.1, 25) {
            Err(Error::DepthInsufficient { depth, required }) => {
                assert_eq!(depth, 2);
                assert_eq!(required, 9); // ceil(log(1e-3) / log lambda_s)
            }
            other => panic!("expected DepthInsufficient, got {other:?}"),
        }
    }

    #[test]
    fn rho_maximal_perturbed_bracketing_and_comparability() {
        let m = perturbed(0.02);
        let t = prehistory_tree(&m, &Point::new(&[0.3, 0.7]), 12).unwrap();
        let phi = tree_stable_potential(&m, &t, 25).unwrap();
        let lambda_min = phi.iter().skip(1).flatten().fold(f64::INFINITY, |a, &b| a.min(b));
        let mut saw_multiple = false;
        for k in 0..30 {
            let rho = 0.1 * 10f64.powf(-0.05 * k as f64 - 0.3);
            let set = rho_maximal(&m, &t, rho, 0.1, 25).unwrap();
            assert!(set.bracketing_holds());
            saw_multiple |= set.cutoffs.len() >= 2;
            let logs: Vec<f64> = set.entries.iter().map(|e| e.log_derivative).collect();
            let spread = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - logs.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(spread <= -lambda_min + 1e-12);
        }
        assert!(saw_multiple, "variable stable potential should produce several cutoffs");
    }
}
