//! One function per experiment; each returns an [`Outcome`] with named checks and a JSON payload.

use crate::config::RunConfig;
use crate::document::{check, Outcome, Verdict};
use anyhow::{bail, Result};
use logconvex_core::certifier::{
    certify_params, critical_mu_q, expand_radial_commutator, oracle_deviation, reproduce_reference_verdicts,
    search_parameters, DEFAULT_RESOLUTION,
};
use logconvex_core::constants::{
    admissible_hbar, check_functional_inequality, check_integrated_observability, check_spectral_inequality,
    empirical_fit, integrated_observability, localization_time, observation_from_spectral, spectral_chain,
    spectral_exponent, spectral_from_observation, FunctionalInequality, ObservationReport,
};
use logconvex_core::domain_spectral::build_basis;
use logconvex_core::frequency_lab::{
    three_time_interpolation, verify_differential_inequalities, FrequencyProbe, FrequencyTrace,
};
use logconvex_core::heat_engine::{check_log_convexity, evolve, trace, HeatModel, SpectralState};
use logconvex_core::numerics::random_coefficients;
use logconvex_core::weights::quadratic_gap;
use logconvex_core::Grid;
use serde_json::{json, Value};
use std::sync::Arc;

fn model(cfg: &RunConfig) -> Result<HeatModel> {
    let grid = Arc::new(cfg.domain.grid(cfg.grid)?);
    let basis = Arc::new(build_basis(&cfg.domain, &grid, cfg.modes)?);
    Ok(HeatModel::new(basis, grid)?)
}

fn states(cfg: &RunConfig, m: &HeatModel) -> Result<Vec<SpectralState>> {
    let count = m.basis.eigenvalues.len();
    (0..cfg.states as u64).map(|k| Ok(m.state(random_coefficients(cfg.seed + k, count))?)).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> logconvex_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn l2(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn omega_weights(m: &HeatModel) -> Result<&[f64]> {
    match &m.grid.omega_weights {
        Some(w) => Ok(w),
        None => bail!("this experiment needs an observation region omega"),
    }
}

fn masked_l2(m: &HeatModel, s: &SpectralState, w: &[f64]) -> f64 {
    m.samples(s).iter().zip(w).map(|(u, w)| u * u * w).sum::<f64>().sqrt()
}

pub fn basis(cfg: &RunConfig) -> Result<Outcome> {
    let m = model(cfg)?;
    Ok(Outcome::exploratory(json!({
        "domain": cfg.domain.kind,
        "count": m.basis.eigenvalues.len(),
        "normalization": m.basis.normalization,
        "eigenvalues": m.basis.eigenvalues,
        "grid_points": m.grid.len(),
    })))
}

pub fn evolve_trace(cfg: &RunConfig) -> Result<Outcome> {
    let m = model(cfg)?;
    let u0 = &states(cfg, &m)?[0];
    let tr = trace(&m, u0, &linspace(0.0, cfg.time.big_t, cfg.samples))?;
    let payload = json!({
        "samples": tr.times.len(),
        "l2_initial": tr.l2.first(),
        "l2_final": tr.l2.last(),
        "l2_nonincreasing": tr.l2.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
    });
    let csv = csv_bytes(|b| tr.write_csv(b))?;
    Ok(Outcome::exploratory(payload).with_csv("evolve.csv", csv))
}

pub fn logconvexity(cfg: &RunConfig) -> Result<Outcome> {
    let m = model(cfg)?;
    let us = states(cfg, &m)?;
    let mut checks = vec![];
    let mut reports = vec![];
    for (k, u0) in us.iter().enumerate() {
        let rep = check_log_convexity(u0, cfg.time.big_t, cfg.samples, cfg.tol)?;
        checks.push(check(format!("state {k}"), rep.pass));
        reports.push(rep);
    }
    let tr = trace(&m, &us[0], &linspace(0.0, cfg.time.big_t, cfg.samples))?;
    let csv = csv_bytes(|b| tr.write_csv(b))?;
    Ok(Outcome::checked(checks, json!({ "reports": reports })).with_csv("logconvexity.csv", csv))
}

pub fn diffineq(cfg: &RunConfig) -> Result<Outcome> {
    let m = model(cfg)?;
    let w = cfg.weight();
    let mut checks = vec![];
    let mut summary = vec![];
    let mut first: Option<FrequencyTrace> = None;
    for (k, u0) in states(cfg, &m)?.iter().enumerate() {
        let probe = FrequencyProbe::new(&m, u0, &w, None, cfg.domain.mu)?;
        let rep = verify_differential_inequalities(&probe, cfg.samples, cfg.tol)?;
        checks.push(check(format!("state {k}"), rep.pass()));
        summary.push(json!({ "energy": rep.energy, "frequency": rep.frequency, "truncated": rep.truncated }));
        first.get_or_insert(rep.trace);
    }
    let tr = first.unwrap_or_default();
    let csv = csv_bytes(|b| tr.write_csv(b))?;
    Ok(Outcome::checked(checks, json!({ "weight": w, "states": summary })).with_csv("diffineq.csv", csv))
}

pub fn interpolation(cfg: &RunConfig) -> Result<Outcome> {
    let m = model(cfg)?;
    let w = cfg.weight();
    let (big_t, hbar, ell) = (cfg.time.big_t, cfg.time.hbar, cfg.time.ell);
    let (t1, t2) = (big_t - 2.0 * ell * hbar, big_t - ell * hbar);
    if t1.is_nan() || t1 <= 0.0 {
        bail!("need T - 2 ell hbar > 0, got {t1}");
    }
    let mut checks = vec![];
    let mut reports = vec![];
    let mut csv = None;
    for (k, u0) in states(cfg, &m)?.iter().enumerate() {
        let probe = FrequencyProbe::new(&m, u0, &w, None, cfg.domain.mu)?;
        let rep = three_time_interpolation(&probe, t1, t2, big_t, big_t, hbar, cfg.tol)?;
        checks.push(check(format!("state {k}"), rep.pass));
        reports.push(rep);
        if csv.is_none() {
            let mut tr = FrequencyTrace::default();
            for t in linspace(t1, big_t, cfg.samples) {
                let s = probe.sample(t)?;
                tr.times.push(s.t);
                tr.f_norm_sq.push(s.f_norm_sq);
                tr.n.push(s.n);
                tr.rest_term.push(s.rest_term);
                tr.boundary_term.push(s.boundary_term);
            }
            csv = Some(csv_bytes(|b| tr.write_csv(b))?);
        }
    }
    let payload = json!({
        "t1": t1, "t2": t2, "t3": big_t,
        "M_l": logconvex_core::frequency_lab::m_ell(ell),
        "reports": reports,
    });
    Ok(Outcome::checked(checks, payload).with_csv("interpolation.csv", csv.unwrap_or_default()))
}

/// One-time observation reports at T·{1/10, 1/4, 1/2, 1} for every seeded state.
fn observation_reports(cfg: &RunConfig, m: &HeatModel) -> Result<Vec<ObservationReport>> {
    let w = omega_weights(m)?;
    let mut out = vec![];
    for u0 in states(cfg, m)? {
        for frac in [0.1, 0.25, 0.5, 1.0] {
            let t = frac * cfg.time.big_t;
            let ut = evolve(&u0, t)?;
            out.push(ObservationReport { t, lhs: l2(&ut.coeffs), obs: masked_l2(m, &ut, w), total: l2(&u0.coeffs) });
        }
    }
    Ok(out)
}

pub fn observation(cfg: &RunConfig) -> Result<Outcome> {
    let m = model(cfg)?;
    let reports = observation_reports(cfg, &m)?;
    let fit = empirical_fit(&reports, cfg.omega_radius()?)?;
    Ok(Outcome::checked(vec![check("fit feasible", fit.feasible)], json!({ "reports": reports.len(), "fit": fit })))
}

pub fn observability(cfg: &RunConfig) -> Result<Outcome> {
    let m = model(cfg)?;
    let fit = empirical_fit(&observation_reports(cfg, &m)?, cfg.omega_radius()?)?;
    let obs = integrated_observability(fit.c, fit.k, fit.beta, 1.0, 2.0, cfg.time.big_t)?;
    let w = omega_weights(&m)?;
    let mut checks = vec![check("fit feasible", fit.feasible)];
    let mut reports = vec![];
    // fresh seeds so the check does not reuse the fitted states
    let fresh = RunConfig { seed: cfg.seed + cfg.states as u64, ..cfg.clone() };
    for (k, u0) in states(&fresh, &m)?.iter().enumerate() {
        let rep = check_integrated_observability(&m, u0, w, cfg.time.big_t, obs.ln_constant, 64)?;
        checks.push(check(format!("state {k}"), rep.pass));
        reports.push(rep);
    }
    Ok(Outcome::checked(checks, json!({ "fit": fit, "observability": obs, "reports": reports })))
}

pub fn spectral(cfg: &RunConfig) -> Result<Outcome> {
    let m = model(cfg)?;
    let w = omega_weights(&m)?;
    let chain = spectral_chain(cfg.omega_radius()?, cfg.domain.max_distance_from_x0(), cfg.constants.eps)?;
    let ev = m.basis.eigenvalues.clone();
    let cuts: Vec<usize> = [1, 2, 5, 10, 20, 50].into_iter().filter(|&j| j <= ev.len()).collect();
    let mut checks = vec![];
    let mut reports = vec![];
    for k in 0..cfg.states as u64 {
        let coeffs = random_coefficients(cfg.seed + k, ev.len());
        let mut pass = true;
        for &j in &cuts {
            let rep = check_spectral_inequality(&m, &coeffs, ev[j - 1], w, spectral_exponent(&chain, ev[j - 1])?)?;
            pass &= rep.pass;
            reports.push(rep);
        }
        checks.push(check(format!("state {k}"), pass));
    }
    Ok(Outcome::checked(checks, json!({ "chain": chain, "reports": reports })))
}

pub fn functional(cfg: &RunConfig, hardy: bool) -> Result<Outcome> {
    let f = &cfg.functional;
    let (rep, field) = if hardy {
        let grid = Arc::new(Grid::radial(f.n, f.radius, cfg.grid)?);
        let mu = f.mu.unwrap_or(0.25 * (f.n as f64 - 2.0).powi(2));
        let r = f.radius;
        let v = grid.sample(|x| x[0] * (r - x[0]));
        (check_functional_inequality(FunctionalInequality::Hardy { mu }, &v, f.n, cfg.tol)?, "rho (R - rho)")
    } else {
        let len = cfg.domain.extents[0];
        if cfg.domain.kind != logconvex_core::DomainKind::Interval {
            bail!("the Nash check runs on an interval domain");
        }
        let grid = Arc::new(Grid::interval(len, cfg.grid)?);
        let v = grid.sample(|x| (std::f64::consts::PI * x[0] / len).sin());
        (check_functional_inequality(FunctionalInequality::Nash, &v, 1, cfg.tol)?, "sin(pi x / L)")
    };
    Ok(Outcome::checked(
        vec![check(if hardy { "hardy" } else { "nash" }, rep.pass)],
        json!({ "field": field, "report": rep }),
    ))
}

pub fn certify(cfg: &RunConfig, reference: bool) -> Result<Outcome> {
    if reference {
        let rep = reproduce_reference_verdicts()?;
        let checks = rep
            .verdicts
            .iter()
            .map(|v| check(v.config.clone(), v.expected_certified == v.observed_certified))
            .collect();
        return Ok(Outcome::checked(checks, serde_json::to_value(&rep)?));
    }
    let table = expand_radial_commutator(&cfg.certify)?;
    let cert = certify_params(&cfg.certify, DEFAULT_RESOLUTION)?;
    let payload = json!({
        "critical_mu": logconvex_core::certifier::fmt_q(&critical_mu_q(cfg.certify.n)),
        "oracle_deviation": oracle_deviation(&table),
        "table": table,
        "certificate": cert,
    });
    let checks = cert.groups.iter().map(|g| check(g.name.clone(), g.pass)).collect();
    Ok(Outcome { verdict: Verdict::from_pass(cert.certified), ..Outcome::checked(checks, payload) })
}

pub fn search(cfg: &RunConfig) -> Result<Outcome> {
    let res = search_parameters(&cfg.search)?;
    let found = !res.feasible.is_empty();
    Ok(Outcome::checked(vec![check("feasible tuple found", found)], serde_json::to_value(&res)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantsKind {
    SpectralChain,
    Observability,
    SpectralObservation,
    Localization,
}

impl ConstantsKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "theorem11" | "spectral-chain" => Self::SpectralChain,
            "lemma41" | "observability" => Self::Observability,
            "lemmaA" | "spectral-observation" => Self::SpectralObservation,
            "lemma22" | "localization" => Self::Localization,
            _ => return None,
        })
    }
}

pub fn constants(cfg: &RunConfig, kind: ConstantsKind) -> Result<Outcome> {
    let k = &cfg.constants;
    let payload: Value = match kind {
        ConstantsKind::SpectralChain => {
            let chain = spectral_chain(k.r, k.big_r, k.eps)?;
            json!({ "chain": chain, "spectral_exponent_at_lambda": spectral_exponent(&chain, k.lambda)?, "lambda": k.lambda })
        }
        ConstantsKind::Observability => {
            let o = integrated_observability(k.c, k.k, k.beta, k.gamma, k.p, k.big_t)?;
            json!({ "chain": o.chain, "z": o.z, "C_beta": o.c_beta, "ln_constant": o.ln_constant })
        }
        ConstantsKind::SpectralObservation => {
            let fwd = spectral_from_observation(k.c, k.k, k.beta, k.gamma, k.p, k.lambda)?;
            let conv = observation_from_spectral(k.d1, k.d2, k.gamma, k.beta, k.p, k.measure_omega)?;
            let mut chain = fwd.chain();
            chain.extend(conv.chain(k.d1, k.d2));
            json!({ "chain": chain, "forward": fwd, "converse": conv })
        }
        ConstantsKind::Localization => {
            let loc = localization_time(k.norm_u0_sq, k.norm_ut_ball_sq, k.radius, k.delta, k.big_t)?;
            let gap = admissible_hbar(loc.theta, k.ell, 0.0, quadratic_gap(k.delta, k.radius), k.delta, k.radius)?;
            let mut chain = loc.chain.clone();
            chain.extend(gap);
            json!({ "chain": chain, "theta": loc.theta, "epsilon_kernel": loc.epsilon })
        }
    };
    Ok(Outcome::exploratory(payload))
}
