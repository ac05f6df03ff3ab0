//! Acceptance criteria, run in order with one PASS/FAIL line each.
//!
//! Built with `harness = false` so the verdict lines are always printed.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scintikit::decay::{self, Verdict};
use scintikit::kinetics::{cubic_coefficients, onsager_matrix, presets, scintillation_potential};
use scintikit::poisson::{apply_gauge, solve_poisson_charge};
use scintikit::rdd::{RddProblem, StepControl};
use scintikit::scenario::{self, compare_problems, Scenario};
use scintikit::trace::build_trace;
use scintikit::{ModelKind, RadialGrid};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bundled() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenarios_dir())
        .expect("scenarios directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
}

fn load(name: &str) -> Scenario {
    scenario::load_scenario(&scenarios_dir().join(name)).expect(name)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    match out {
        Ok(d) if elapsed <= limit => Ok(format!("{d}; {elapsed:.2?}")),
        Ok(d) => Err(format!("{d}; took {elapsed:.2?}, limit {limit:?}")),
        Err(d) => Err(format!("{d}; {elapsed:.2?}")),
    }
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", items.join(", "))
}

fn q(rng: &mut ChaCha8Rng) -> BigRational {
    BigRational::new(BigInt::from(rng.gen_range(1..=97)), BigInt::from(rng.gen_range(1..=31)))
}

/// Cubic tables of the electron/hole/exciton network against the
/// closed-form rates, in exact arithmetic.
fn recombination_coefficients() -> Outcome {
    timed(Duration::from_secs(1), || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut checked = 0;
        for _ in 0..20 {
            let k: [BigRational; 7] = std::array::from_fn(|_| q(&mut rng));
            let c: [BigRational; 3] = std::array::from_fn(|_| q(&mut rng));
            let t = cubic_coefficients(&presets::exciton_network(k.clone(), c.clone())).map_err(|e| e.to_string())?;
            let k = |h: usize| k[h - 1].clone();
            let c = |j: usize| c[j - 1].clone();
            let zero = BigRational::from_integer(0.into());
            // electrons and holes share one rate; every displayed term
            for s in [0, 1] {
                let expected = [
                    (t.constant(s), -k(1)),
                    (t.linear(s, 0), -(k(4) / c(1))),
                    (t.linear(s, 1), -(k(6) / c(2))),
                    (t.linear(s, 2), -(k(2) / c(3))),
                    (t.quadratic(s, 0, 1), (k(1) + k(2)) / (c(1) * c(2))),
                    (t.cubic(s, 0, 0, 1), k(4) / (c(1) * c(1) * c(2))),
                    (t.cubic(s, 0, 1, 1), k(6) / (c(1) * c(2) * c(2))),
                ];
                for (i, (got, want)) in expected.into_iter().enumerate() {
                    if got != want {
                        return Err(format!("species {s}, term {i}: {got} != {want}"));
                    }
                    checked += 1;
                }
                if t.quadratic(s, 0, 0) != zero || t.quadratic(s, 2, 2) != zero {
                    return Err(format!("species {s}: unexpected square term"));
                }
            }
            // excitons: the terms consistent with mechanisms 1-7
            let expected = [
                (t.constant(2), zero.clone()),
                (t.linear(2, 1), -(k(7) / c(2))),
                (t.linear(2, 2), k(2) / c(3)),
                (t.quadratic(2, 0, 2), k(5) / (c(1) * c(3))),
                (t.quadratic(2, 1, 2), k(7) / (c(2) * c(3))),
            ];
            for (i, (got, want)) in expected.into_iter().enumerate() {
                if got != want {
                    return Err(format!("exciton term {i}: {got} != {want}"));
                }
                checked += 1;
            }
            // the remaining exciton terms follow from mechanisms 3 and 5;
            // the closed form quoted alongside the network lists k3 on n1,
            // k2 - k3 on n1 n2 and no cubic term instead
            let derived = [
                (t.linear(2, 0), -(k(5) / c(1))),
                (t.quadratic(2, 0, 1), -(k(2) + k(3)) / (c(1) * c(2))),
                (t.cubic(2, 0, 1, 2), k(3) / (c(1) * c(2) * c(3))),
            ];
            for (i, (got, want)) in derived.into_iter().enumerate() {
                if got != want {
                    return Err(format!("derived exciton term {i}: {got} != {want}"));
                }
                checked += 1;
            }
            if t.linear(2, 0) == -(k(3) / c(1)) && k(3) != k(5) {
                return Err("n1 coefficient of the exciton rate matches k3".into());
            }
        }
        Ok(format!("{checked} exact coefficients over 20 draws"))
    })
}

fn onsager_error(net: &scintikit::ReactionNetwork64, n: &[f64]) -> Result<f64, String> {
    let h = onsager_matrix(net, n).map_err(|e| e.to_string())?;
    let s = scintillation_potential(net, n, 0.0, 1.0);
    let hs = h.mul_vec(&s);
    let r = net.recombination(n);
    // scale of the terms that cancel in r
    let scale = net
        .mechanisms()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (x, y) = net.monomial_ratios(i, n);
            let d = m.change().iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as f64;
            m.rate * (x + y) * d
        })
        .sum::<f64>();
    let norm = r.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(scale);
    Ok(hs.iter().zip(&r).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / norm)
}

/// `H(n) s(n) = r(n)` at zero potential on both reference networks.
fn onsager_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let net = presets::exciton_network(
            std::array::from_fn(|_| rng.gen_range(0.1..10.0)),
            std::array::from_fn(|_| rng.gen_range(0.1..10.0)),
        );
        let n: Vec<f64> = (0..3).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
        worst = worst.max(onsager_error(&net, &n)?);
        let net = presets::activator_network(
            std::array::from_fn(|_| rng.gen_range(0.1..10.0)),
            std::array::from_fn(|_| rng.gen_range(0.1..10.0)),
        );
        let n: Vec<f64> = (0..7).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
        worst = worst.max(onsager_error(&net, &n)?);
    }
    check(worst <= 1e-10, format!("2 x 1000 states, worst relative error {worst:.2e}"))
}

/// Uniform annihilation against `u = 1 / (1 + t)`.
fn kinetic_oracle() -> Outcome {
    timed(Duration::from_secs(1), || {
        let s = load("annihilation_k2.toml");
        let p = s.problem(ModelKind::Kinetic).map_err(|e| e.to_string())?;
        let init = p.state(0.0, s.initial_run_densities()).map_err(|e| e.to_string())?;
        let run = p.integrate(init, &s.outputs, &s.control).map_err(|e| e.to_string())?;
        let volume = p.grid().total_volume();
        let mut worst = 0.0f64;
        for rec in &run.records {
            let exact = 1.0 / (1.0 + rec.time);
            for total in p.species_totals(&rec.densities) {
                worst = worst.max((total / volume - exact).abs() / exact);
            }
        }
        let end = run.records.last().map_or(0.0, |r| r.time);
        check(
            worst <= 1e-6 && (end - 10.0).abs() < 1e-12,
            format!("{} records on [0, {end}], worst relative error {worst:.2e}", run.records.len()),
        )
    })
}

/// Net charge drift of every bundled scenario under every model.
fn conservation() -> Outcome {
    let mut worst = (0.0f64, String::new());
    let mut runs = 0;
    for path in bundled() {
        let s = scenario::load_scenario(&path).map_err(|e| e.to_string())?;
        for model in ModelKind::ALL {
            let p = s.problem(model).map_err(|e| e.to_string())?;
            let u0 = s.initial_run_densities();
            let init = p.state(0.0, u0.clone()).map_err(|e| format!("{} {model}: {e}", s.name()))?;
            let run = p
                .integrate(init, &s.outputs, &s.control)
                .map_err(|e| format!("{} {model}: {e}", s.name()))?;
            let q0 = p.total_charge(&u0);
            let gross = scintikit::poisson::gross_charge(p.grid(), p.network().charges(), &u0, 1.0);
            for rec in &run.records {
                let drift = (p.total_charge(&rec.densities) - q0).abs() / gross.max(f64::MIN_POSITIVE);
                if drift > worst.0 {
                    worst = (drift, format!("{} {model}", s.name()));
                }
            }
            runs += 1;
        }
    }
    check(
        worst.0 <= 1e-12,
        format!("{runs} runs, worst relative drift {:.2e} ({})", worst.0, worst.1),
    )
}

fn entropy_series(name: &str, model: ModelKind) -> Result<Vec<f64>, String> {
    let s = load(name);
    let p = s.problem(model).map_err(|e| e.to_string())?;
    let init = p.state(0.0, s.initial_run_densities()).map_err(|e| e.to_string())?;
    let eq = p.equilibrium(&init).map_err(|e| e.to_string())?;
    let run = p.integrate(init, &s.outputs, &s.control).map_err(|e| e.to_string())?;
    let trace = build_trace(&p, &eq, &run.records, f64::NAN).map_err(|e| e.to_string())?;
    Ok(trace.records.iter().map(|r| r.rel_entropy).collect())
}

/// Relative entropy never increases along the FULL_RDD and KINETIC
/// benchmarks.
fn entropy_monotone() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, model) in [
        ("full_rdd_k2.toml", ModelKind::FullRdd),
        ("annihilation_k2.toml", ModelKind::Kinetic),
    ] {
        let g = entropy_series(name, model)?;
        let tol = 1e-8 * g[0];
        let worst = g.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        ok &= worst <= tol && g[0] > 0.0;
        detail.push(format!("{model}: G0 {:.3e}, largest increase {worst:.2e}", g[0]));
    }
    check(ok, detail.join("; "))
}

/// Manufactured radial solution `cos(pi r / R)` on refined grids.
fn poisson_order() -> Outcome {
    use std::f64::consts::PI;
    timed(Duration::from_secs(5), || {
        let (radius, eps) = (1.5, 2.5);
        let mut errs = Vec::new();
        for cells in [100, 200, 400] {
            let g = RadialGrid::uniform(radius, cells).map_err(|e| e.to_string())?;
            let flux = |r: f64| -PI / radius * (PI * r / radius).sin();
            let (f, a) = (g.faces(), g.face_areas());
            let rho: Vec<f64> = (0..cells)
                .map(|i| -eps * (a[i + 1] * flux(f[i + 1]) - a[i] * flux(f[i])) / g.volumes()[i])
                .collect();
            let mut exact: Vec<f64> = g.centers().iter().map(|r| (PI * r / radius).cos()).collect();
            apply_gauge(&g, &mut exact).map_err(|e| e.to_string())?;
            let phi = solve_poisson_charge(&g, eps, &rho).map_err(|e| e.to_string())?;
            errs.push(phi.values.iter().zip(&exact).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())));
        }
        let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        check(
            orders.iter().all(|o| (1.9..=2.1).contains(o)),
            format!("errors {}, orders {orders:.3?}", sci(&errs)),
        )
    })
}

fn poincare_facts() -> Outcome {
    let mut ok = true;
    for i in 0..=20 {
        let r = 0.1 * 100f64.powf(i as f64 / 20.0);
        let g = RadialGrid::uniform(r, 4).map_err(|e| e.to_string())?;
        ok &= g.poincare_constant() <= (2.0 * r / std::f64::consts::PI).powi(2);
    }
    let unit = RadialGrid::uniform(0.5, 4).map_err(|e| e.to_string())?.poincare_constant();
    check(
        ok && (0.05..=0.1).contains(&unit),
        format!("bound holds for R in [0.1, 10]: {ok}; diameter 1 gives {unit:.5}"),
    )
}

/// Explicit decay estimate along the two-species FULL_RDD benchmark.
fn decay_estimate() -> Outcome {
    let s = load("full_rdd_k2.toml");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = scenario::run_scenario(&s, dir.path()).map_err(|e| e.to_string())?;
    let d = &report.decay;
    let c = d.constants.as_ref().ok_or("no decay constants")?;
    let est = d.estimate.as_ref().ok_or("estimate not evaluated")?;
    let fit = d.fit.as_ref().ok_or_else(|| format!("no fit: {:?}", d.fit_error))?;
    let fast = 1.0 / fit.tau_fast;
    check(
        est.holds && fast >= c.c1 && d.k0.is_some() && d.phi_inf_sup.is_some(),
        format!(
            "Phi {:.4}, C1 {:.4}, C2 {:.3}, {} records, worst LHS/RHS {:.3}, 1/tau_f {fast:.3}",
            d.phi_inf_sup.unwrap_or(f64::NAN),
            c.c1,
            c.c2,
            est.verdicts.len(),
            est.worst_ratio
        ),
    )
}

fn diffusive_bound() -> Outcome {
    timed(Duration::from_secs(10), || {
        let s = load("diffusive.toml");
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let report = scenario::run_scenario(&s, dir.path()).map_err(|e| e.to_string())?;
        let d = report.decay.diffusive.as_ref().ok_or("diffusive check not evaluated")?;
        let measured = d.l2_e_folding.ok_or("no e-folding time")?;
        check(
            measured <= d.bound * 1.05 && d.verdict == Verdict::Pass,
            format!(
                "e-folding {measured:.4} (L1 {:.4}) vs bound {:.4}",
                d.l1_e_folding.unwrap_or(f64::NAN),
                d.bound
            ),
        )
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.log10(), y.log10())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn degeneration_sweep(reduced: ModelKind, make: impl Fn(f64) -> (f64, f64, f64)) -> Result<(Vec<f64>, f64), String> {
    let sweep = [1e-4, 1e-6, 1e-8];
    let grid = RadialGrid::uniform(0.5, 24).map_err(|e| e.to_string())?;
    let outputs: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    let control = StepControl {
        rtol: 1e-8,
        atol: 1e-12,
        ..Default::default()
    };
    let u0: Vec<f64> = grid
        .centers()
        .iter()
        .flat_map(|r: &f64| {
            let g = 1.0 + 2.0 * (-(r / 0.15).powi(2)).exp();
            [g, g]
        })
        .collect();
    let mut dist = Vec::new();
    for &eps in &sweep {
        let (rate, d, m) = make(eps);
        let net = presets::pair_annihilation(rate, [1.0, 1.0]);
        let full = RddProblem::new(grid.clone(), net, ModelKind::FullRdd, d, m, vec![1.0, 0.5])
            .map_err(|e| e.to_string())?;
        let other = full.with_model(reduced).map_err(|e| e.to_string())?;
        let cmp = compare_problems(&[full, other], &u0, &outputs, &control).map_err(|e| e.to_string())?;
        dist.push(cmp.pairs[0].max);
    }
    let s = slope(&sweep, &dist);
    Ok((dist, s))
}

/// FULL_RDD approaches REACTION_DIFFUSION linearly in `m` and
/// DIFFUSION_DRIFT linearly in the rate scale `k`.
fn regime_degeneration() -> Outcome {
    let (dm, sm) = degeneration_sweep(ModelKind::ReactionDiffusion, |m| (1.0, 1.0, m))?;
    let (dk, sk) = degeneration_sweep(ModelKind::DiffusionDrift, |k| (k, 1.0, 1.0))?;
    check(
        (sm - 1.0).abs() <= 0.3 && (sk - 1.0).abs() <= 0.3,
        format!("vs RD in m: {}, slope {sm:.3}; vs DD in k: {}, slope {sk:.3}", sci(&dm), sci(&dk)),
    )
}

fn biexp_recovery() -> Outcome {
    let t: Vec<f64> = (0..120).map(|i| i as f64 * 48.0 / 119.0).collect();
    let truth = [2.0, 1.0, 0.5, 10.0];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut detail = Vec::new();
    let mut ok = true;
    for (noise, tol) in [(0.0, 0.01), (1e-3, 0.05)] {
        let y: Vec<f64> = t
            .iter()
            .map(|&s| {
                let v = truth[0] * (-s / truth[1]).exp() + truth[2] * (-s / truth[3]).exp();
                v * (1.0 + noise * rng.gen_range(-1.0..1.0))
            })
            .collect();
        let f = decay::fit_biexponential(&t, &y).map_err(|e| e.to_string())?;
        let got = [f.a_fast, f.tau_fast, f.a_slow, f.tau_slow];
        let worst = got.iter().zip(&truth).map(|(g, w)| (g - w).abs() / w).fold(0.0, f64::max);
        ok &= worst <= tol && !f.single;
        detail.push(format!("noise {noise}: worst relative error {worst:.2e}"));
    }
    check(ok, detail.join("; "))
}

fn cli_reproducible() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = scenarios_dir().join("full_rdd_k2.toml");
    let mut traces = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_scintikit"))
            .args(["run", "--seed", "11", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        traces.push(std::fs::read(out.join("trace.csv")).map_err(|e| e.to_string())?);
    }
    check(
        traces[0] == traces[1] && !traces[0].is_empty(),
        format!("two runs with seed 11, {} bytes each", traces[0].len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("recombination coefficients (exact)", recombination_coefficients),
        ("Onsager identity", onsager_identity),
        ("kinetic annihilation oracle", kinetic_oracle),
        ("charge conservation", conservation),
        ("relative entropy non-increasing", entropy_monotone),
        ("Poisson convergence order", poisson_order),
        ("Poincare constant", poincare_facts),
        ("decay estimate", decay_estimate),
        ("diffusive decay bound", diffusive_bound),
        ("regime degeneration", regime_degeneration),
        ("biexponential fit recovery", biexp_recovery),
        ("CLI reproducibility", cli_reproducible),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail}", i + 1);
    }
    if failed == 0 {
        println!("acceptance: all 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 12 criteria failed");
        ExitCode::FAILURE
    }
}
