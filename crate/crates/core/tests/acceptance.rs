//! Acceptance criteria 1-8. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use graphlog::cli::{execute, multi_solutions, parse_config, to_canonical_json};
use graphlog::exhaustion::{run_exhaustion, ExhaustionConfig};
use graphlog::functionals::{c_eps, GlobalProblem, LocalProblem, Problem};
use graphlog::graph::{
    ball, build_graph, gradient_pair, laplacian, Domain, Graph, GraphSpec, LatticeGenerator, VertexFunction,
};
use graphlog::solvers::{
    negative_endpoint, sign_normalized, solve_mountain_pass, solve_nehari, solve_newton, Solution, SolverConfig,
};
use graphlog::spaces::PotentialSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_graph, rel_err};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Verdict); 8] = [
        ("green-formulas", Some(Duration::from_secs(30)), green_formulas),
        ("f1-closed-form", None, f1_closed_form),
        ("z1-exhaustion-certificates", Some(Duration::from_secs(120)), z1_exhaustion),
        ("mountain-pass-geometry", None, mountain_pass_geometry),
        ("c-eps-certification", None, c_eps_certification),
        ("derivative-checks", None, derivative_checks),
        ("path5-multiplicity", Some(Duration::from_secs(300)), path5_multiplicity),
        ("symmetry-determinism", None, symmetry_and_determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let passed = outcome.passed && in_time;
        if !passed {
            failures += 1;
        }
        let budget_note = match budget {
            Some(b) if !in_time => format!(" (over budget of {}s)", b.as_secs()),
            _ => String::new(),
        };
        println!(
            "criterion {} {:<28} {} [{:.2}s{}] {}",
            i + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget_note,
            outcome.detail
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

// ---- 1 ----------------------------------------------------------------------------------

fn green_formulas() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_i: f64 = 0.0;
    let mut worst_ii: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=1000);
        let extra = rng.gen_range(0..=n);
        let g = random_graph(&mut rng, n, extra);

        let u = VertexFunction::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        let v = VertexFunction::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for x in 0..n {
            lhs += g.measure(x) * gradient_pair(&g, &u, &v, x).unwrap();
            rhs -= g.measure(x) * laplacian(&g, &u, x).unwrap() * v.get(x);
        }
        worst_i = worst_i.max(rel_err(lhs, rhs));

        let center = rng.gen_range(0..n);
        let k = rng.gen_range(1..=3);
        let d = ball(&g, center, k).unwrap();
        let mut u = VertexFunction::zeros(n);
        let mut v = VertexFunction::zeros(n);
        for &x in d.interior() {
            u.set(x, rng.gen_range(-1.0..1.0));
            v.set(x, rng.gen_range(-1.0..1.0));
        }
        let lhs: f64 = d
            .closure()
            .iter()
            .map(|&x| g.measure(x) * gradient_pair(&g, &u, &v, x).unwrap())
            .sum();
        let rhs: f64 = -d
            .interior()
            .iter()
            .map(|&x| g.measure(x) * laplacian(&g, &u, x).unwrap() * v.get(x))
            .sum::<f64>();
        worst_ii = worst_ii.max(rel_err(lhs, rhs));
    }
    verdict(
        worst_i <= 1e-12 && worst_ii <= 1e-12,
        format!("100 graphs, max rel error I {worst_i:.2e}, II {worst_ii:.2e}"),
    )
}

// ---- 2 ----------------------------------------------------------------------------------

fn f1_problem(g: &Graph, eps: f64) -> Problem<'_> {
    let d = Domain::new(g, [1]).unwrap();
    let h = PotentialSpec::constant(1.0).evaluate(g).unwrap();
    LocalProblem::new(g, d, h, eps).unwrap()
}

fn f1_closed_form() -> Verdict {
    // At the single interior vertex: 2u + u = u log u², so log u² = deg + h.
    let degree: f64 = 2.0;
    let h = 1.0;
    let root = (0.5 * (degree + h)).exp();
    let energy = 0.5 * root * root;

    let g = build_graph(&GraphSpec::Path(3)).unwrap();
    let p = f1_problem(&g, 0.5);
    let cfg = SolverConfig::default();
    let delta = VertexFunction::delta(3, 1, 1.0);
    let runs: Vec<(&str, Solution)> = vec![
        ("newton", solve_newton(&p, &delta.scaled(4.0), &cfg).unwrap()),
        ("nehari", solve_nehari(&p, &delta.scaled(3.0), &cfg).unwrap()),
        (
            "mountain-pass",
            solve_mountain_pass(&p, &negative_endpoint(&p, &delta).unwrap(), &cfg).unwrap(),
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, s) in &runs {
        let du = (s.u.get(1).abs() - root).abs();
        let de = (s.energy - energy).abs();
        ok &= du <= 1e-10 && de <= 1e-9;
        parts.push(format!("{name} du={du:.1e} dE={de:.1e}"));
    }
    let dt = (p.nehari_projection(&delta).unwrap() - root).abs();
    ok &= dt <= 1e-12;
    parts.push(format!("projection dt={dt:.1e}"));
    verdict(ok, parts.join(", "))
}

// ---- 3 ----------------------------------------------------------------------------------

/// `-Δu + hu - u log u²` on the interior `x = -(k-1)..=(k-1)` of `B_k ⊂ ℤ¹`,
/// zero Dirichlet data at `±k`.
fn z1_residual(u: &[f64], h: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            let log_term = if u[i] == 0.0 { 0.0 } else { u[i] * (u[i] * u[i]).ln() };
            2.0 * u[i] - left - right + h[i] * u[i] - log_term
        })
        .collect()
}

/// Independent ground state on `B_k ⊂ ℤ¹`: Nehari-projected gradient descent
/// followed by Newton with a tridiagonal (Thomas) solve.
fn z1_oracle(k: usize, h_of: impl Fn(f64) -> f64) -> Vec<f64> {
    let xs: Vec<f64> = (-(k as i64 - 1)..=(k as i64 - 1)).map(|x| x as f64).collect();
    let h: Vec<f64> = xs.iter().map(|&x| h_of(x)).collect();
    let n = xs.len();
    let q = |u: &[f64]| {
        let mut s = 0.0;
        for i in 0..=n {
            let a = if i > 0 { u[i - 1] } else { 0.0 };
            let b = if i < n { u[i] } else { 0.0 };
            s += (a - b) * (a - b);
        }
        s + u.iter().zip(&h).map(|(v, hh)| hh * v * v).sum::<f64>()
    };
    let logm = |u: &[f64]| u.iter().map(|&v| if v == 0.0 { 0.0 } else { v * v * (v * v).ln() }).sum::<f64>();
    let project = |u: &mut Vec<f64>| {
        let m: f64 = u.iter().map(|v| v * v).sum();
        let t = (0.5 * (q(u) - logm(u)) / m).exp();
        u.iter_mut().for_each(|v| *v *= t);
    };
    let mut u: Vec<f64> = xs.iter().map(|&x| (-x * x / 2.0).exp()).collect();
    project(&mut u);
    let step = 0.5 / (4.0 + h.iter().cloned().fold(0.0, f64::max));
    for _ in 0..20000 {
        let r = z1_residual(&u, &h);
        for (v, g) in u.iter_mut().zip(&r) {
            *v -= step * g;
        }
        project(&mut u);
    }
    for _ in 0..50 {
        let r = z1_residual(&u, &h);
        if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-13 {
            break;
        }
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let a = u[i].abs().max(1e-300);
                2.0 + h[i] - ((a * a).ln() + 2.0)
            })
            .collect();
        // Thomas algorithm for diag d, off-diagonals -1.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = -1.0 / diag[0];
        d[0] = -r[0] / diag[0];
        for i in 1..n {
            let m = diag[i] + c[i - 1];
            c[i] = -1.0 / m;
            d[i] = (-r[i] + d[i - 1]) / m;
        }
        let mut dx = vec![0.0; n];
        dx[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            dx[i] = d[i] - c[i] * dx[i + 1];
        }
        u.iter_mut().zip(&dx).for_each(|(v, s)| *v += s);
    }
    u
}

fn z1_exhaustion() -> Verdict {
    let cfg = ExhaustionConfig {
        k_from: 3,
        k_to: 12,
        window_radius: 3,
        tol_conv: 1e-8,
        ..ExhaustionConfig::default()
    };
    let solver = SolverConfig::default();
    let (trace, cand) = match run_exhaustion(
        &LatticeGenerator::new(1),
        &PotentialSpec::quadratic_shift(1.0),
        &cfg,
        &solver,
    ) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("exhaustion failed: {e}")),
    };
    let residual_ok = trace.steps.iter().all(|s| s.residual_norm <= 1e-10);
    let identity_ok = trace.steps.iter().all(|s| s.certificate.energy_identity_gap <= 1e-8);
    let floor_ok = trace.steps.iter().all(|s| s.certificate.nontriviality_ok);
    let bound_ok = trace.norms_bounded() && trace.window_bounded();
    let last_change = trace.steps.last().and_then(|s| s.window_change).unwrap_or(f64::INFINITY);
    let cauchy_ok = last_change < 1e-8 && trace.converged_at.is_some_and(|k| k <= 12);
    let candidate_ok = cand.nontrivial && cand.max_abs > 1.0 && cand.residual_interior <= 10.0 * solver.tol_residual;

    let oracle = z1_oracle(12, |x| x * x + 1.0);
    let g = LatticeGenerator::new(1).materialize(13);
    let oracle_gap = (-11i64..=11)
        .zip(&oracle)
        .map(|(x, o)| (cand.u_star.get(g.vertex(&x.to_string()).unwrap()).abs() - o).abs())
        .fold(0.0, f64::max);

    verdict(
        residual_ok && identity_ok && floor_ok && bound_ok && cauchy_ok && candidate_ok && oracle_gap <= 1e-8,
        format!(
            "residual {residual_ok}, identity {identity_ok}, floor {floor_ok}, bound {bound_ok} ({:.3e}), \
             converged_at {:?}, last window change {last_change:.1e}, oracle gap {oracle_gap:.1e}",
            trace.uniform_bound_used, trace.converged_at
        ),
    )
}

// ---- 4 ----------------------------------------------------------------------------------

fn mountain_pass_geometry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f1 = build_graph(&GraphSpec::Path(3)).unwrap();
    let z1 = LatticeGenerator::new(1).materialize(4);
    let z2 = LatticeGenerator::new(2).materialize(3);
    let rg = random_graph(&mut rng, 60, 30);
    let rh: Vec<(String, f64)> = rg.labels().iter().map(|l| (l.clone(), rng.gen_range(0.5..3.0))).collect();
    let rh_refs: Vec<(&str, f64)> = rh.iter().map(|(l, v)| (l.as_str(), *v)).collect();
    let cases: Vec<(&str, &Graph, Domain, PotentialSpec)> = vec![
        ("F1", &f1, Domain::new(&f1, [1]).unwrap(), PotentialSpec::constant(1.0)),
        ("Z1 B3", &z1, ball(&z1, z1.origin(), 3).unwrap(), PotentialSpec::constant(1.0)),
        ("Z2 B2", &z2, ball(&z2, z2.origin(), 2).unwrap(), PotentialSpec::quadratic_shift(1.0)),
        ("random B2", &rg, ball(&rg, 0, 2).unwrap(), PotentialSpec::table(&rh_refs)),
    ];
    let mut violations = 0;
    let mut samples = 0;
    let mut spike_bad = 0;
    for eps in [0.25, 0.5, 0.75] {
        for (_, g, d, spec) in &cases {
            let p = LocalProblem::new(g, d.clone(), spec.evaluate(g).unwrap(), eps).unwrap();
            let ledger = p.constants_ledger().unwrap();
            let r = ledger.mp_radius;
            for i in 0..500 {
                let raw = if i % 5 == 0 {
                    // sparse direction concentrated on one vertex
                    let slot = rng.gen_range(0..p.dim());
                    (0..p.dim()).map(|j| if j == slot { 1.0 } else { 0.0 }).collect::<Vec<_>>()
                } else {
                    (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()
                };
                let u = p.to_function(&raw);
                let norm = p.quadratic_form(&u).unwrap().sqrt();
                let u = u.scaled(r / norm);
                samples += 1;
                if p.energy(&u).unwrap() < 0.25 * r * r {
                    violations += 1;
                }
            }
            let center = if d.contains(g.origin()) { g.origin() } else { d.interior()[0] };
            let spike = VertexFunction::delta(g.len(), center, 1e3);
            if !(p.energy(&spike).unwrap() < 0.0) {
                spike_bad += 1;
            }
        }
    }
    verdict(
        violations == 0 && spike_bad == 0,
        format!("{samples} sphere samples, {violations} below r²/4, {spike_bad} spikes with I ≥ 0"),
    )
}

// ---- 5 ----------------------------------------------------------------------------------

fn c_eps_certification() -> Verdict {
    let n = 1_000_000;
    let mut ok = true;
    let mut tightest: f64 = 0.0;
    for i in 1..=9 {
        let eps = i as f64 / 10.0;
        let c = c_eps(eps).unwrap();
        let envelope = 2.0 / (std::f64::consts::E * eps);
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let t = 10f64.powf(-8.0 + 16.0 * j as f64 / (n - 1) as f64);
            let t2 = t * t;
            let ratio = t2 * t2.ln().abs() / (t.powf(2.0 - eps) + t.powf(2.0 + eps));
            worst = worst.max(ratio);
        }
        ok &= worst <= c && c <= envelope;
        tightest = tightest.max(worst / c);
    }
    verdict(ok, format!("9 exponents on a 10^6 grid, max sup/C_eps = {tightest:.6}"))
}

// ---- 6 ----------------------------------------------------------------------------------

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn derivative_checks() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_pair: f64 = 0.0;
    let mut worst_jac: f64 = 0.0;
    for case in 0..50 {
        let n = rng.gen_range(3..60);
        let g = random_graph(&mut rng, n, n / 2);
        let eps = rng.gen_range(0.1..0.9);
        let global = case % 2 == 1;
        let lo = if global { -0.9 } else { 0.2 };
        let h: Vec<(String, f64)> = g.labels().iter().map(|l| (l.clone(), rng.gen_range(lo..3.0))).collect();
        let refs: Vec<(&str, f64)> = h.iter().map(|(l, v)| (l.as_str(), *v)).collect();
        let potential = PotentialSpec::table(&refs).evaluate(&g).unwrap();
        let p = if global {
            GlobalProblem::new(&g, Domain::whole(&g), potential).unwrap()
        } else {
            let d = ball(&g, 0, rng.gen_range(1..=3)).unwrap();
            LocalProblem::new(&g, d, potential, eps).unwrap()
        };
        let uu: Vec<f64> = (0..p.dim())
            .map(|_| rng.gen_range(0.3..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let vv: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = p.to_function(&uu);
        let v = p.to_function(&vv);
        let step = 1e-5;
        let plus = u.axpy(step, &v);
        let minus = u.axpy(-step, &v);

        let analytic = p.energy_gradient_pairing(&u, &v).unwrap();
        let fd = (p.energy(&plus).unwrap() - p.energy(&minus).unwrap()) / (2.0 * step);
        worst_pair = worst_pair.max(rel_err(analytic, fd));

        let jv = p.jacobian(&u).unwrap().apply(&vv);
        let rp = p.residual(&plus).unwrap();
        let rm = p.residual(&minus).unwrap();
        let fd: Vec<f64> = p
            .domain()
            .interior()
            .iter()
            .map(|&x| (rp.get(x) - rm.get(x)) / (2.0 * step))
            .collect();
        let diff: Vec<f64> = jv.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst_jac = worst_jac.max(sup(&diff) / sup(&jv).max(sup(&fd)));
    }
    verdict(
        worst_pair <= 1e-6 && worst_jac <= 1e-6,
        format!("50 cases, max rel error pairing {worst_pair:.1e}, Jacobian {worst_jac:.1e}"),
    )
}

// ---- 7 ----------------------------------------------------------------------------------

const PATH5_H: [f64; 5] = [2.0, 2.0, -0.5, 2.0, 2.0];

fn path5_residual(u: &[f64; 5]) -> [f64; 5] {
    let mut r = [0.0; 5];
    for i in 0..5 {
        let mut lap = 0.0;
        if i > 0 {
            lap += u[i - 1] - u[i];
        }
        if i < 4 {
            lap += u[i + 1] - u[i];
        }
        let log_term = if u[i] == 0.0 { 0.0 } else { u[i] * (u[i] * u[i]).ln() };
        r[i] = -lap + PATH5_H[i] * u[i] - log_term;
    }
    r
}

fn path5_energy(u: &[f64; 5]) -> f64 {
    let grad: f64 = (0..4).map(|i| (u[i + 1] - u[i]).powi(2)).sum();
    let rest: f64 = (0..5)
        .map(|i| {
            let l = if u[i] == 0.0 { 0.0 } else { u[i] * u[i] * (u[i] * u[i]).ln() };
            (PATH5_H[i] + 1.0) * u[i] * u[i] - l
        })
        .sum();
    0.5 * (grad + rest)
}

fn norm_inf(r: &[f64; 5]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Dense Gaussian elimination with partial pivoting.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    for c in 0..5 {
        let p = (c..5).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-14 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..5 {
            let f = a[r][c] / a[c][c];
            for k in c..5 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 5];
    for r in (0..5).rev() {
        let s: f64 = (r + 1..5).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn oracle_newton(mut u: [f64; 5]) -> Option<[f64; 5]> {
    let mut r = path5_residual(&u);
    for _ in 0..300 {
        if norm_inf(&r) <= 1e-11 {
            return Some(u);
        }
        let mut jac = [[0.0; 5]; 5];
        for i in 0..5 {
            let a = u[i].abs().max(1e-150);
            let degree = if i == 0 || i == 4 { 1.0 } else { 2.0 };
            jac[i][i] = degree + PATH5_H[i] - ((a * a).ln() + 2.0);
            if i > 0 {
                jac[i][i - 1] = -1.0;
            }
            if i < 4 {
                jac[i][i + 1] = -1.0;
            }
        }
        let step = solve5(jac, r.map(|v| -v))?;
        let mut t = 1.0;
        loop {
            let mut trial = u;
            for i in 0..5 {
                trial[i] += t * step[i];
            }
            let rt = path5_residual(&trial);
            if norm_inf(&rt) < norm_inf(&r) {
                u = trial;
                r = rt;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return None;
            }
        }
    }
    None
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn same_solution(a: &[f64], b: &[f64]) -> bool {
    let a = sign_normalized(a);
    let b = sign_normalized(b);
    let scale = 1.0 + a.iter().map(|v| v * v).sum::<f64>().sqrt();
    l2(&a, &b) <= 1e-6 * scale
}

fn path5_multiplicity() -> Verdict {
    let g = build_graph(&GraphSpec::Path(5)).unwrap();
    let h = PotentialSpec::table(&[("v2", -0.5)]).with_default(2.0).evaluate(&g).unwrap();
    let p = GlobalProblem::new(&g, Domain::whole(&g), h).unwrap();
    let sols = multi_solutions(&p, 3, &SolverConfig::default()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut oracle: Vec<([f64; 5], f64)> = Vec::new();
    for _ in 0..10_000 {
        let scale = [1.0, 3.0, 6.0, 15.0][rng.gen_range(0..4)];
        let start: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-scale..scale));
        if let Some(u) = oracle_newton(start) {
            if u.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-6 {
                continue;
            }
            if !oracle.iter().any(|(o, _)| same_solution(o, &u)) {
                oracle.push((u, path5_energy(&u)));
            }
        }
    }
    oracle.sort_by(|a, b| a.1.total_cmp(&b.1));
    let oracle_levels: Vec<f64> = oracle.iter().map(|o| o.1).collect();

    let increasing = sols.windows(2).all(|w| w[0].energy < w[1].energy);
    let residual_ok = sols.iter().all(|s| s.residual_norm <= 1e-10);
    let distinct = sols
        .iter()
        .enumerate()
        .all(|(i, a)| sols[..i].iter().all(|b| !same_solution(a.u.values(), b.u.values())));
    let matched = sols
        .iter()
        .all(|s| oracle.iter().any(|(o, _)| same_solution(o, s.u.values())));
    let ground_ok = sols
        .first()
        .is_some_and(|s| (s.energy - oracle_levels[0]).abs() <= 1e-9 * (1.0 + oracle_levels[0].abs()));
    // Deflation removes both signs of a solution, so compare against the
    // distinct oracle levels in order.
    let mut levels: Vec<f64> = Vec::new();
    for &e in &oracle_levels {
        if levels.last().is_none_or(|l| (e - l).abs() > 1e-9 * (1.0 + e.abs())) {
            levels.push(e);
        }
    }
    let consecutive = sols.len() <= levels.len()
        && sols
            .iter()
            .zip(&levels)
            .all(|(s, l)| (s.energy - l).abs() <= 1e-9 * (1.0 + l.abs()));
    let energies: Vec<String> = sols.iter().map(|s| format!("{:.6}", s.energy)).collect();
    verdict(
        sols.len() >= 3 && increasing && residual_ok && distinct && matched && ground_ok && consecutive,
        format!(
            "{} deflated solutions (J = {}), oracle found {} classes, lowest J = {}, all matched {matched}, consecutive levels {consecutive}",
            sols.len(),
            energies.join(" < "),
            oracle.len(),
            oracle_levels.iter().take(5).map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// ---- 8 ----------------------------------------------------------------------------------

/// Interior values are exact negations; the zero extension is `+0.0` on
/// both sides.
fn bitwise_negated(p: &Problem<'_>, a: &VertexFunction, b: &VertexFunction) -> bool {
    (0..a.len()).all(|x| {
        if p.domain().contains(x) {
            (-a.get(x)).to_bits() == b.get(x).to_bits()
        } else {
            a.get(x) == 0.0 && b.get(x) == 0.0
        }
    })
}

fn symmetry_and_determinism() -> Verdict {
    let cfg = SolverConfig::default();
    let mut symmetric = 0;
    let mut total = 0;

    let f1 = build_graph(&GraphSpec::Path(3)).unwrap();
    let z1 = LatticeGenerator::new(1).materialize(4);
    let p5 = build_graph(&GraphSpec::Path(5)).unwrap();
    let problems: Vec<Problem<'_>> = vec![
        f1_problem(&f1, 0.5),
        LocalProblem::new(
            &z1,
            ball(&z1, z1.origin(), 3).unwrap(),
            PotentialSpec::constant(1.0).evaluate(&z1).unwrap(),
            0.5,
        )
        .unwrap(),
        GlobalProblem::new(
            &p5,
            Domain::whole(&p5),
            PotentialSpec::table(&[("v2", -0.5)]).with_default(2.0).evaluate(&p5).unwrap(),
        )
        .unwrap(),
    ];
    for p in &problems {
        let values: Vec<f64> = (0..p.dim()).map(|i| 1.0 + 0.5 * i as f64).collect();
        let start = p.to_function(&values);
        let endpoint = negative_endpoint(p, &start).unwrap();
        type Run = fn(&Problem<'_>, &VertexFunction, &SolverConfig) -> graphlog::Result<Solution>;
        let runs: [(Run, &VertexFunction); 3] = [
            (solve_newton, &start),
            (solve_nehari, &start),
            (solve_mountain_pass, &endpoint),
        ];
        for (run, u0) in runs {
            total += 1;
            let a = run(p, u0, &cfg);
            let b = run(p, &u0.neg(), &cfg);
            if let (Ok(a), Ok(b)) = (a, b) {
                if bitwise_negated(p, &a.u, &b.u) && a.energy.to_bits() == b.energy.to_bits() {
                    symmetric += 1;
                }
            }
        }
    }

    let render = |args: &[&str]| -> String {
        let cfg = parse_config(args).unwrap();
        to_canonical_json(&execute(&cfg).unwrap().report).unwrap()
    };
    let runs: [&[&str]; 3] = [
        &["multi", "--graph", "path5.json", "--potential", "h_path5.json", "--seed", "11"],
        &["solve-local", "--graph", "lattice:1", "--potential", "constant:1", "--k", "3"],
        &["exhaust", "--graph", "lattice:1", "--potential", "quadratic_shift:1", "--k-range", "2:5", "--window", "2"],
    ];
    let mut identical = 0;
    for args in runs {
        let first = render(args);
        let second = render(args);
        let mut seq: Vec<&str> = args.to_vec();
        seq.push("--sequential");
        let sequential = render(&seq);
        if first == second && first == sequential {
            identical += 1;
        }
    }
    verdict(
        symmetric == total && identical == runs.len(),
        format!(
            "{symmetric}/{total} solves sign-symmetric bit-for-bit, {identical}/{} reports byte-identical (repeat and sequential)",
            runs.len()
        ),
    )
}
