//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermo_core::measures::{
    absolute_continuity_diagnostic, bowen_ball_check, component_comparison_check, constant_to_one_check,
    equilibrium_atoms, geometric_check_on, max_stable_dim_check, AcConfig, SliceSampling,
};
use thermo_core::orbits::{birkhoff_sum, fixed_points, OrbitMethod};
use thermo_core::pressure::{bowen_root, pressure};
use thermo_core::stable::{prehistory_tree, rho_maximal, DEFAULT_HORIZON};
use thermo_core::{EndomorphismModel, IntMatrix2, Point, Potential};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn linear() -> EndomorphismModel {
    EndomorphismModel::toral_linear(IntMatrix2::standard())
}

fn perturbed(eps: f64) -> EndomorphismModel {
    EndomorphismModel::toral_perturbed(IntMatrix2::standard(), eps).unwrap()
}

fn attractor() -> EndomorphismModel {
    EndomorphismModel::product_attractor_circle(0.1).unwrap()
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    lo <= x && x <= hi
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_stable_dim_toral() -> Verdict {
    let start = Instant::now();
    let root = bowen_root(&linear(), 8, 2).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    verdict(
        within(root.t_star, 0.98, 1.02) && root.residual < 0.02 && t < Duration::from_secs(60),
        format!("t_star={:.4} residual={:.2e} time={:.1}s", root.t_star, root.residual, t.as_secs_f64()),
    )
}

fn c2_stable_dim_attractor() -> Verdict {
    let start = Instant::now();
    let root = bowen_root(&attractor(), 10, 2).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    verdict(
        within(root.t_star, -0.02, 0.02) && t < Duration::from_secs(30),
        format!("t_star={:.4} residual={:.2e} time={:.1}s", root.t_star, root.residual, t.as_secs_f64()),
    )
}

fn c3_pressure_oracle() -> Verdict {
    let toral = pressure(&linear(), &Potential::zero(), 8).map_err(|e| e.to_string())?;
    let circle = pressure(&attractor(), &Potential::zero(), 10).map_err(|e| e.to_string())?;
    let exact = ((5.0 + 17f64.sqrt()) / 2.0).ln();
    verdict(
        (toral.value - exact).abs() < 0.01 && (circle.value - 2f64.ln()).abs() < 0.005,
        format!("toral={:.5} (exact {exact:.5}) circle={:.5}", toral.value, circle.value),
    )
}

/// Fixed points of `A^n` by rounding `(A^n - I) x` at every point of a fine grid.
fn grid_scan_count(n: u32) -> usize {
    let p = IntMatrix2::standard().pow(n);
    let m = [[p[0][0] as f64 - 1.0, p[0][1] as f64], [p[1][0] as f64, p[1][1] as f64 - 1.0]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let row = m.iter().map(|r| r[0].abs() + r[1].abs()).fold(0.0, f64::max);
    // rounding recovers the lattice vector whenever row * h / 2 < 1/2
    let cells = (2.0 * row).ceil() as usize;
    let h = 1.0 / cells as f64;
    let mut found: Vec<(i64, i64)> = Vec::new();
    for i in 0..cells {
        for j in 0..cells {
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let k = [(m[0][0] * x + m[0][1] * y).round(), (m[1][0] * x + m[1][1] * y).round()];
            let px = inv[0][0] * k[0] + inv[0][1] * k[1];
            let py = inv[1][0] * k[0] + inv[1][1] * k[1];
            let key = (
                ((px.rem_euclid(1.0)) * 1e9).round() as i64 % 1_000_000_000,
                ((py.rem_euclid(1.0)) * 1e9).round() as i64 % 1_000_000_000,
            );
            if !found.contains(&key) {
                found.push(key);
            }
        }
    }
    found.len()
}

fn c4_fixed_point_counts() -> Verdict {
    let model = linear();
    let a = IntMatrix2::standard();
    let mut counts = Vec::new();
    let mut ok = true;
    for n in 1..=6u32 {
        let enumerated = fixed_points(&model, n as usize).map_err(|e| e.to_string())?.len();
        let tr = {
            let p = a.pow(n);
            p[0][0] + p[1][1]
        };
        let formula = (2i128.pow(n) - tr + 1).unsigned_abs() as usize;
        ok &= enumerated == formula;
        if n <= 3 {
            ok &= enumerated == grid_scan_count(n);
        }
        counts.push(enumerated);
    }
    verdict(ok, format!("counts={counts:?}, grid scan agrees for n<=3"))
}

fn c5_perturbed_constant_to_one() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for eps in [0.005, 0.01, 0.02] {
        let model = perturbed(eps);
        let r = constant_to_one_check(&model, 200, 11).map_err(|e| e.to_string())?;
        let set = fixed_points(&model, 2).map_err(|e| e.to_string())?;
        let sep = set.min_pairwise_distance();
        ok &= r.d == Some(2) && set.len() == 16 && sep > 1e-4 && set.method == OrbitMethod::NewtonContinuation;
        parts.push(format!("eps={eps}: d={:?} #Fix(f^2)={} min_sep={sep:.3}", r.d, set.len()));
    }
    verdict(ok, parts.join("; "))
}

fn c6_product_degree() -> Verdict {
    let model = EndomorphismModel::product_power_toral(3, IntMatrix2::standard(), 0.01).unwrap();
    let r = constant_to_one_check(&model, 200, 7).map_err(|e| e.to_string())?;
    let claim = r.degree_claim.as_ref().ok_or("no degree claim in report")?;
    verdict(
        r.d == Some(6) && !claim.consistent,
        format!("d={:?}, stated {} = {} flagged inconsistent", r.d, claim.stated_formula, claim.stated),
    )
}

fn c7_geometric() -> Verdict {
    let start = Instant::now();
    let cfg = SliceSampling::default();
    let model = linear();
    let delta = bowen_root(&model, 8, 2).map_err(|e| e.to_string())?.t_star;
    let mu = equilibrium_atoms(&model, &Potential::scaled_stable(delta), 9).map_err(|e| e.to_string())?;
    let v = geometric_check_on(&mu, &model, delta, &cfg, 10.0).map_err(|e| e.to_string())?;
    let model_c = attractor();
    let delta_c = bowen_root(&model_c, 10, 2).map_err(|e| e.to_string())?.t_star;
    let mu_c = equilibrium_atoms(&model_c, &Potential::scaled_stable(delta_c), 12).map_err(|e| e.to_string())?;
    let vc = geometric_check_on(&mu_c, &model_c, delta_c, &cfg, 10.0).map_err(|e| e.to_string())?;
    let dirac = vc.slopes.iter().all(|s| within(*s, -0.05, 0.05));
    let t = start.elapsed();
    verdict(
        v.c_hat < 10.0
            && within(v.median_slope, 0.9, 1.1)
            && v.slopes.len() == 200
            && dirac
            && t < Duration::from_secs(300),
        format!(
            "toral C_hat={:.3} median slope={:.4} ({} fits); attractor slopes in [{:.3}, {:.3}]; time={:.1}s",
            v.c_hat,
            v.median_slope,
            v.slopes.len(),
            vc.slopes.iter().copied().fold(f64::INFINITY, f64::min),
            vc.slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t.as_secs_f64()
        ),
    )
}

fn c8_bowen_ball() -> Verdict {
    let model = linear();
    let delta = bowen_root(&model, 8, 2).map_err(|e| e.to_string())?.t_star;
    let mu = equilibrium_atoms(&model, &Potential::scaled_stable(delta), 9).map_err(|e| e.to_string())?;
    let splits = [(0, 1), (1, 1), (1, 2), (2, 2), (2, 3)];
    let r = bowen_ball_check(&mu, &model, delta, &splits, 0.2, 30, 5).map_err(|e| e.to_string())?;
    verdict(r.pass, format!("orders 1..5, ratios in [{:.3}, {:.3}]", r.min_ratio, r.max_ratio))
}

fn c9_components() -> Verdict {
    let model = linear();
    let phi = Potential::stable();
    let p = pressure(&model, &phi, 8).map_err(|e| e.to_string())?.value;
    let mu = equilibrium_atoms(&model, &phi, 9).map_err(|e| e.to_string())?;
    let pairs: Vec<(usize, usize)> = (1..=4).flat_map(|k| (1..=4).map(move |m| (k, m))).collect();
    let r = component_comparison_check(&mu, &model, &phi, p, &pairs, 0.2, 8, 3).map_err(|e| e.to_string())?;
    verdict(
        r.pass,
        format!(
            "quotients in [{:.3}, {:.3}], max/min={:.1}, atom order {} (order sufficient: {})",
            r.min_quotient,
            r.max_quotient,
            r.max_quotient / r.min_quotient,
            r.atom_order,
            r.order_sufficient
        ),
    )
}

fn c10_absolute_continuity() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, model, expect) in
        [("toral", linear(), true), ("perturbed", perturbed(0.01), true), ("attractor", attractor(), false)]
    {
        let d = absolute_continuity_diagnostic(&model, &AcConfig::for_model(&model)).map_err(|e| e.to_string())?;
        ok &= d.is_repellor_verdict == expect;
        if expect {
            ok &= (d.median_slope - 1.0).abs() <= 0.1;
        }
        parts.push(format!(
            "{name}: delta={:.3} repellor={} slope={:.3}",
            d.delta_s, d.is_repellor_verdict, d.median_slope
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c11_max_dim() -> Verdict {
    let model = perturbed(0.01);
    let r =
        max_stable_dim_check(&model, &[Potential::zero()], &AcConfig::for_model(&model)).map_err(|e| e.to_string())?;
    let mme = &r.alternatives[0];
    verdict(mme.median_slope <= r.delta_s + 0.05, format!("MME slope={:.4}, delta={:.4}", mme.median_slope, r.delta_s))
}

fn c12_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let models = [
        perturbed(0.01),
        perturbed(0.02),
        EndomorphismModel::product_power_toral(3, IntMatrix2::standard(), 0.01).unwrap(),
    ];
    let phi = Potential::scaled_stable(0.7).plus(0.3);

    let mut cocycle: f64 = 0.0;
    let mut fd: f64 = 0.0;
    for model in &models {
        for _ in 0..10 {
            let x = model.sample_basic_set(&mut rng);
            let (n, m) = (rng.random_range(1..6), rng.random_range(1..6));
            let whole = birkhoff_sum(model, &phi, &x, n + m).map_err(|e| e.to_string())?.value;
            let head = birkhoff_sum(model, &phi, &x, n).map_err(|e| e.to_string())?.value;
            let tail = birkhoff_sum(model, &phi, &model.iterate(&x, n), m).map_err(|e| e.to_string())?.value;
            cocycle = cocycle.max((whole - head - tail).abs());

            let jac = model.differential(&x);
            let h = 1e-6;
            for j in 0..model.phase_dim() {
                let mut e = Vector3::zeros();
                e[j] = h;
                let col = (model.apply_lift(&(x.lift() + e)) - model.apply_lift(&(x.lift() - e))) / (2.0 * h);
                for i in 0..model.phase_dim() {
                    fd = fd.max((col[i] - jac[(i, j)]).abs());
                }
            }
        }
    }

    let mut norm: f64 = 0.0;
    for model in [linear(), perturbed(0.02), attractor()] {
        let mu = equilibrium_atoms(&model, &phi, 5).map_err(|e| e.to_string())?;
        norm = norm.max((mu.total_weight() - 1.0).abs());
    }

    let base = pressure(&perturbed(0.01), &Potential::stable(), 6).map_err(|e| e.to_string())?;
    let shifted = pressure(&perturbed(0.01), &Potential::stable().plus(0.4), 6).map_err(|e| e.to_string())?;
    let additivity = (shifted.value - base.value - 0.4).abs();
    let additivity_ok = additivity <= (2.0 * base.uncertainty.max(shifted.uncertainty)).max(1e-12);

    let mut branches = 0;
    let mut bracket_ok = true;
    for model in [linear(), perturbed(0.01)] {
        let x = Point::new(&[0.3, 0.7]);
        let tree = prehistory_tree(&model, &x, 8).map_err(|e| e.to_string())?;
        for rho in [0.01, 0.02, 0.05] {
            let set = rho_maximal(&model, &tree, rho, 0.1, DEFAULT_HORIZON).map_err(|e| e.to_string())?;
            branches += set.entries.len();
            bracket_ok &= set.bracketing_holds();
        }
    }

    verdict(
        cocycle < 1e-10 && norm < 1e-10 && additivity_ok && fd < 1e-5 && bracket_ok,
        format!(
            "cocycle {cocycle:.1e}, normalization {norm:.1e}, additivity {additivity:.1e}, derivative {fd:.1e}, bracketing on {branches} branches: {bracket_ok}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("stable dimension, toral example", c1_stable_dim_toral),
        ("stable dimension, attractor example", c2_stable_dim_attractor),
        ("pressure oracle", c3_pressure_oracle),
        ("fixed-point count oracle", c4_fixed_point_counts),
        ("constant-to-one under perturbation", c5_perturbed_constant_to_one),
        ("product degree", c6_product_degree),
        ("geometric conditional measures", c7_geometric),
        ("Bowen-ball estimate", c8_bowen_ball),
        ("component comparison", c9_components),
        ("absolute-continuity diagnostic", c10_absolute_continuity),
        ("maximal stable dimension", c11_max_dim),
        ("property suites", c12_properties),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
