//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use logconvex_core::certifier::{
    critical_mu_q, expand_radial_commutator, oracle_deviation, q, reproduce_reference_verdicts, RadialWeightParams,
};
use logconvex_core::constants::{
    check_functional_inequality, check_integrated_observability, check_spectral_inequality, empirical_fit,
    integrated_observability, observation_from_spectral, spectral_chain, spectral_exponent, spectral_from_observation,
    FunctionalInequality, ObservationReport,
};
use logconvex_core::domain_spectral::{build_interval_basis, build_radial_schrodinger_basis, Field, Grid, Region};
use logconvex_core::frequency_lab::{
    commutator_form, m_ell, three_time_interpolation, verify_differential_inequalities, FrequencyProbe,
};
use logconvex_core::heat_engine::{
    check_log_convexity, evolve, weighted_energy_monotone, HeatModel, SpectralState, XiWeight,
};
use logconvex_core::numerics::{fitted_order, random_coefficients, rng};
use logconvex_core::WeightSpec;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn line(len: f64, cells: usize) -> Arc<Grid> {
    Arc::new(Grid::interval(len, cells).unwrap())
}

/// Smooth bump on (c−w, c+w) times a seeded trigonometric polynomial.
fn bump_field(grid: &Arc<Grid>, seed: u64, c: f64, w: f64) -> Field {
    let mut r = rng(seed);
    let coef: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
    grid.sample(|x| {
        let s = (x[0] - c) / w;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let b = (1.0 - 1.0 / (1.0 - s * s)).exp();
        b * (1.5 + coef.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * s).sin()).sum::<f64>())
    })
}

fn l2(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn masked_l2(model: &HeatModel, s: &SpectralState, w: &[f64]) -> f64 {
    model.samples(s).iter().zip(w).map(|(u, w)| u * u * w).sum::<f64>().sqrt()
}

fn commutator_exact_weights() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut min_order = f64::INFINITY;
    for spec in [WeightSpec::heat_kernel(vec![0.45], 1.0, 0.2), WeightSpec::quadratic(vec![0.45], 1.0, 0.2)] {
        for seed in 0..5 {
            let cells = [1024usize, 2048, 4096];
            let errs: Vec<f64> = cells
                .iter()
                .map(|&c| {
                    let f = bump_field(&line(1.0, c), seed, 0.5, 0.3);
                    commutator_form(&f, &spec, 0.3, 0.0).unwrap().comparator_residual.abs()
                })
                .collect();
            let order = fitted_order(&cells.map(|c| 1.0 / c as f64), &errs);
            ensure(errs[0] <= 1e-4, || format!("{:?} seed {seed}: residual {} at 1024 cells", spec.family, errs[0]))?;
            ensure(order >= 1.9, || format!("{:?} seed {seed}: order {order} ({errs:?})", spec.family))?;
            worst = worst.max(errs[0]);
            min_order = min_order.min(order);
        }
    }
    Ok(format!("max residual {worst:.2e} at 1024 cells, min fitted order {min_order:.3}"))
}

fn key_formula_cross_check() -> Outcome {
    let g = line(1.0, 2048);
    let mut worst: f64 = 0.0;
    let families = [
        WeightSpec::heat_kernel(vec![0.45], 1.0, 0.2),
        WeightSpec::quadratic(vec![0.45], 1.0, 0.2),
        WeightSpec::radial_poly(vec![0.1], 1.0, 0.2, 0.25, 0.25, 1.0 / 81.0, 4.0 / 3.0),
    ];
    for seed in 0..50u64 {
        let spec = &families[seed as usize % 3];
        let mut r = rng(1000 + seed);
        let f = bump_field(&g, seed, r.gen_range(0.5..0.7), r.gen_range(0.2..0.3));
        let rep = commutator_form(&f, spec, r.gen_range(0.2..0.8), 0.0).map_err(|e| e.to_string())?;
        ensure(rep.formula_residual <= 1e-6, || format!("seed {seed} {:?}: {}", spec.family, rep.formula_residual))?;
        worst = worst.max(rep.formula_residual);
    }
    Ok(format!("50 fields, max relative deviation {worst:.2e}"))
}

fn certifier_regression() -> Outcome {
    let start = Instant::now();
    let rep = reproduce_reference_verdicts().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(rep.pass, || format!("{:?}", rep.verdicts))?;
    ensure(elapsed < 1.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("{} verdicts reproduced, {} exact checks, {elapsed:.3}s", rep.verdicts.len(), rep.exact_checks.len()))
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(4040);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = r.gen_range(3..8u32);
        let a = q(r.gen_range(1..60), 100);
        let b = q(r.gen_range(1..60), 100);
        let c = q(r.gen_range(1..60), 1000);
        let s = q(r.gen_range(12..24), 12);
        let mu = q(r.gen_range(0..24), 100) * critical_mu_q(n);
        let p = RadialWeightParams::new(n, a, b, c, s, mu, 1.0).map_err(|e| e.to_string())?;
        worst = worst.max(oracle_deviation(&expand_radial_commutator(&p).map_err(|e| e.to_string())?));
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let rep = reproduce_reference_verdicts().map_err(|e| e.to_string())?;
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("display_claims.json");
    let body = serde_json::json!({ "display_claims": rep.display_claims, "discrepancies": rep.discrepancies });
    std::fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).map_err(|e| e.to_string())?;
    Ok(format!(
        "500 tuples, max deviation {worst:e}; {} display discrepancies written to {}",
        rep.discrepancies.len(),
        path.display()
    ))
}

fn differential_suite() -> Outcome {
    let basis = Arc::new(build_interval_basis(1.0, 32).unwrap());
    let model = HeatModel::new(basis, line(1.0, 256)).unwrap();
    let (big_t, hbar) = (0.5, 0.1);
    let w = WeightSpec::quadratic(vec![0.4], big_t, hbar);
    let mut triples = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..100 {
        let u0 = model.state(random_coefficients(seed, 32)).unwrap();
        let probe = FrequencyProbe::new(&model, &u0, &w, None, 0.0).map_err(|e| e.to_string())?;
        let rep = verify_differential_inequalities(&probe, 8, 1e-6).map_err(|e| e.to_string())?;
        ensure(rep.pass(), || format!("seed {seed}: {:?} {:?}", rep.energy, rep.frequency))?;
        worst = worst.min(rep.energy.slack).min(rep.frequency.slack);
        let tt = &rep.trace.times;
        for i in 0..tt.len() {
            for j in i + 1..tt.len() {
                for k in j + 1..tt.len() {
                    let r = three_time_interpolation(&rep.trace, tt[i], tt[j], tt[k], big_t, hbar, 1e-10)
                        .map_err(|e| e.to_string())?;
                    ensure(r.pass, || format!("seed {seed} triple ({i},{j},{k}): {r:?}"))?;
                    triples += 1;
                }
            }
        }
    }
    // t3 = T, t2 = T − ℓħ, t1 = T − 2ℓħ with M = M_ℓ
    let mut r = rng(77);
    let (big_t, ell) = (0.3, 2.0);
    for seed in 0..100 {
        let hbar = r.gen_range(0.01..0.06);
        let w = WeightSpec::quadratic(vec![0.5], big_t, hbar);
        let u0 = model.state(random_coefficients(seed, 32)).unwrap();
        let probe = FrequencyProbe::new(&model, &u0, &w, None, 0.0).map_err(|e| e.to_string())?;
        let rep =
            three_time_interpolation(&probe, big_t - 2.0 * ell * hbar, big_t - ell * hbar, big_t, big_t, hbar, 1e-10)
                .map_err(|e| e.to_string())?;
        let m = rep.context["M"].as_f64().unwrap_or(f64::NAN);
        ensure(rep.pass && (m - m_ell(ell)).abs() < 1e-9, || format!("M_l triple seed {seed}: {rep:?}"))?;
        triples += 1;
    }
    Ok(format!("100 states, min relative slack {worst:.2e}, {triples} triples pass"))
}

fn spectral_inequality() -> Outcome {
    let jmax = 50;
    let grid = line(1.0, 4096);
    let basis = Arc::new(build_interval_basis(1.0, jmax).unwrap());
    let model = HeatModel::new(basis.clone(), grid.clone()).unwrap();
    let (x0, big_r, eps) = (0.5, 0.5, 0.5);
    let mut checks = 0;
    let mut min_slack = f64::INFINITY;
    for r in [0.1, 0.2, 0.4] {
        let chain = spectral_chain(r, big_r, eps).map_err(|e| e.to_string())?;
        let omega = grid.region_weights(&Region::Box { lo: vec![x0 - r], hi: vec![x0 + r] }, &[x0]).unwrap();
        for seed in 0..100u64 {
            let coeffs = random_coefficients(seed, jmax);
            for j in [1usize, 2, 5, 10, 20, 35, 50] {
                let lambda = basis.eigenvalues[j - 1];
                let exponent = spectral_exponent(&chain, lambda).map_err(|e| e.to_string())?;
                let rep =
                    check_spectral_inequality(&model, &coeffs, lambda, &omega, exponent).map_err(|e| e.to_string())?;
                ensure(rep.pass, || format!("r {r} seed {seed} j {j}: {rep:?}"))?;
                min_slack = min_slack.min(rep.slack);
                checks += 1;
            }
        }
        let e_c = chain.ln("spectral_exponent_coefficient_eps").unwrap();
        let bound = chain.ln("K_eps").unwrap() - eps * r.ln();
        ensure(e_c <= bound + 1e-12 * bound.abs(), || format!("r {r}: ln exponent {e_c} > ln K_eps r^-eps {bound}"))?;
    }
    Ok(format!("{checks} checks, min log-space slack {min_slack:.3e}; exponent within K_eps r^-eps sqrt(lambda)"))
}

fn observability_implication() -> Outcome {
    let jmax = 40;
    let grid = line(1.0, 2048);
    let basis = Arc::new(build_interval_basis(1.0, jmax).unwrap());
    let model = HeatModel::new(basis, grid.clone()).unwrap();
    let (x0, r) = (0.3, 0.1);
    let omega = grid.region_weights(&Region::Box { lo: vec![x0 - r], hi: vec![x0 + r] }, &[x0]).unwrap();
    let mut reports = vec![];
    let mut g = rng(9);
    for seed in 0..200u64 {
        let u0 = model.state(random_coefficients(10_000 + seed, jmax)).unwrap();
        let start = evolve(&u0, g.gen_range(0.0..0.2)).unwrap();
        let start = SpectralState::new(start.coeffs, start.basis, 0.0).unwrap();
        let t = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0][seed as usize % 6];
        let ut = evolve(&start, t).unwrap();
        reports.push(ObservationReport {
            t,
            lhs: l2(&ut.coeffs),
            obs: masked_l2(&model, &ut, &omega),
            total: l2(&start.coeffs),
        });
    }
    let fit = empirical_fit(&reports, r).map_err(|e| e.to_string())?;
    ensure(fit.feasible, || format!("fit infeasible: {fit:?}"))?;
    let mut runs = 0;
    for big_t in [0.1, 0.5, 1.0] {
        let obs = integrated_observability(fit.c, fit.k, fit.beta, 1.0, 2.0, big_t).map_err(|e| e.to_string())?;
        for seed in 0..100u64 {
            let u0 = model.state(random_coefficients(seed, jmax)).unwrap();
            let rep = check_integrated_observability(&model, &u0, &omega, big_t, obs.ln_constant, 64)
                .map_err(|e| e.to_string())?;
            ensure(rep.pass, || format!("T {big_t} seed {seed}: {rep:?}"))?;
            runs += 1;
        }
    }
    Ok(format!("fit c={:.3e} K={:.3e} beta={:.3}; {runs} runs pass", fit.c, fit.k, fit.beta))
}

fn lemma_a_round_trip() -> Outcome {
    let s = spectral_from_observation(2.0, 1.0, 0.5, 1.0, 2.0, 4.0).map_err(|e| e.to_string())?;
    let want = 2.0 * 4f64.exp();
    ensure(((s.constant - want) / want).abs() <= 1e-12, || format!("constant {} vs {want}", s.constant))?;
    ensure((s.t_opt - 0.5).abs() <= 1e-12, || format!("T_opt {}", s.t_opt))?;
    for d1 in [0.5, 1.0, 3.25] {
        let d = observation_from_spectral(d1, 1.0, 1.0, 0.5, 2.0, 0.7).map_err(|e| e.to_string())?;
        ensure(d.d3 == 2.0 * (1.0 + d1), || format!("D3 {} for D1 {d1}", d.d3))?;
    }
    Ok(format!("constant {:.15}, T_opt {}", s.constant, s.t_opt))
}

fn schrodinger_flow() -> Outcome {
    let mut errs = vec![];
    for cells in [128usize, 256, 512] {
        let g = Grid::radial(3, PI, cells).unwrap();
        let b = build_radial_schrodinger_basis(3, 0.0, PI, &g, 3).map_err(|e| e.to_string())?;
        errs.push(b.eigenvalues.iter().zip([1.0, 4.0, 9.0]).map(|(l, w)| ((l - w) / w).abs()).fold(0.0, f64::max));
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    ensure(ratios.iter().all(|r| (3.5..=4.5).contains(r)), || format!("errors {errs:?}"))?;
    let radius = (4.0f64 / 3.0).powf(1.5);
    let grid = Grid::radial(3, radius, 512).unwrap();
    let basis = Arc::new(build_radial_schrodinger_basis(3, 7.0 / 54.0, radius, &grid, 8).map_err(|e| e.to_string())?);
    let model = HeatModel::new(basis, Arc::new(grid)).unwrap();
    let xi = XiWeight { x0: Some(vec![0.0; 3]), big_t: 0.5, eps: 0.2 };
    for seed in 0..20 {
        let s = model.state(random_coefficients(seed, 8)).unwrap();
        let rep = weighted_energy_monotone(&model, &s, &xi, 10, 1e-8).map_err(|e| e.to_string())?;
        ensure(rep.pass, || format!("seed {seed}: {rep:?}"))?;
    }
    Ok(format!("eigenvalue error ratios {ratios:.3?}; 20 weighted-energy runs monotone"))
}

fn classical_facts() -> Outcome {
    let basis = Arc::new(build_interval_basis(1.0, 24).unwrap());
    let mut worst = f64::INFINITY;
    for seed in 0..200 {
        let s = SpectralState::new(random_coefficients(seed, 24), basis.clone(), 0.0).unwrap();
        let rep = check_log_convexity(&s, 0.2, 50, 1e-12).map_err(|e| e.to_string())?;
        ensure(rep.pass && rep.slack >= -1e-12, || format!("log-convexity seed {seed}: {rep:?}"))?;
        worst = worst.min(rep.slack);
        let mut prev = l2(&s.coeffs);
        for k in 1..=10 {
            let n = l2(&evolve(&s, 0.02 * k as f64).unwrap().coeffs);
            let slack = (prev - n) / prev;
            ensure(slack >= -1e-12, || format!("contraction seed {seed} step {k}: {slack}"))?;
            worst = worst.min(slack);
            prev = n;
        }
    }
    let sin = line(PI, 4096).sample(|x| x[0].sin());
    let nash = check_functional_inequality(FunctionalInequality::Nash, &sin, 1, 1e-12).map_err(|e| e.to_string())?;
    ensure(nash.pass, || format!("nash {nash:?}"))?;
    let rad = Arc::new(Grid::radial(3, 1.0, 2000).unwrap()).sample(|x| x[0] * (1.0 - x[0]));
    let hardy = check_functional_inequality(FunctionalInequality::Hardy { mu: 0.25 }, &rad, 3, 1e-12)
        .map_err(|e| e.to_string())?;
    ensure(hardy.pass && hardy.slack > 0.0, || format!("hardy {hardy:?}"))?;
    Ok(format!("min slack {worst:.2e}; nash slack {:.3}, hardy slack {:.3}", nash.slack, hardy.slack))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("commutator exact-equality weights", commutator_exact_weights),
        ("key-formula cross-check", key_formula_cross_check),
        ("certifier regression", certifier_regression),
        ("oracle equivalence", oracle_equivalence),
        ("differential-inequality suite", differential_suite),
        ("desk-scale spectral inequality", spectral_inequality),
        ("one-time to integrated observability", observability_implication),
        ("spectral/observation round trip", lemma_a_round_trip),
        ("Schrodinger flow", schrodinger_flow),
        ("classical facts", classical_facts),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
