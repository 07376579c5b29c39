//! Explicit constant chains: the localization time θ, the spectral and
//! observability chains built on M_ℓ, telescoping observability, the
//! spectral/observation equivalence in both directions, Hardy and Nash checks,
//! and empirical fitting of one-time observation constants.
//!
//! Large constants are carried as natural logarithms; `value` is only the
//! exponential when it is finite in f64.

use crate::domain_spectral::Field;
use crate::error::{invalid, LabError, Result};
use crate::frequency_lab::{field_norms, m_ell};
use crate::heat_engine::{evolve, HeatModel, SpectralState};
use crate::numerics::log_sum_exp;
use crate::report::{InequalityReport, WorstCase};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEntry {
    pub name: String,
    pub value: f64,
    pub ln_value: Option<f64>,
    pub formula: String,
    pub origin: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConstantChain {
    pub entries: Vec<ConstantEntry>,
}

impl ConstantChain {
    fn push(&mut self, name: &str, value: f64, formula: &str, origin: &str) {
        self.entries.push(ConstantEntry {
            name: name.into(),
            value,
            ln_value: None,
            formula: formula.into(),
            origin: origin.into(),
        });
    }

    fn push_ln(&mut self, name: &str, ln_value: f64, formula: &str, origin: &str) {
        self.entries.push(ConstantEntry {
            name: name.into(),
            value: ln_value.exp(),
            ln_value: Some(ln_value),
            formula: formula.into(),
            origin: origin.into(),
        });
    }

    pub fn entry(&self, name: &str) -> Option<&ConstantEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entry(name).map(|e| e.value)
    }

    /// Natural log of an entry, exact for entries stored in log form.
    pub fn ln(&self, name: &str) -> Option<f64> {
        self.entry(name).map(|e| e.ln_value.unwrap_or(e.value.ln()))
    }

    pub fn extend(&mut self, other: ConstantChain) {
        self.entries.extend(other.entries);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}

const ORIGIN_THETA: &str = "localization time from the integral maximum principle with a Gaussian weight";
const ORIGIN_GAP: &str = "admissible hbar from the weight gap between the inner ball and the outer annulus";
const ORIGIN_CHAIN: &str = "quadratic-weight interpolation with t3 = T, t2 = T - l hbar, t1 = T - 2 l hbar";
const ORIGIN_TELESCOPE: &str = "telescoping over T_m = T / z^m";
const ORIGIN_SPECTRAL: &str = "observation at one time applied to u0 = sum a_j e^(lambda_j T) e_j";
const ORIGIN_CONVERSE: &str = "spectral inequality plus high-frequency decay and Young's inequality";
const ORIGIN_HBAR: &str = "hbar chosen so the remainder equals half the left-hand side";

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("beta = {beta} must lie in (0, 1)")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must be positive")))
    }
}

fn check_p(p: f64) -> Result<()> {
    if (1.0..=2.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("p = {p} must lie in [1, 2]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationTime {
    pub theta: f64,
    /// Gaussian-width parameter of the maximum-principle weight; θ = δ·ϵ.
    pub epsilon: f64,
    pub inv_theta: f64,
    /// (1+δ)δR²/(2θ), the exponent bounding ‖u₀‖²/‖u(t)‖²_{B(1+δ)R} on [T−θ, T].
    pub bound_exponent: f64,
    pub chain: ConstantChain,
}

/// 1/θ = (2/(δR)²)·ln(2e^{R²(1+1/T)}·‖u₀‖²/‖u(T)‖²_{B_R}).
pub fn localization_time(
    norm_u0_sq: f64,
    norm_ut_ball_sq: f64,
    radius: f64,
    delta: f64,
    big_t: f64,
) -> Result<LocalizationTime> {
    check_positive("norm_u0_sq", norm_u0_sq)?;
    check_positive("norm_uT_ball_sq", norm_ut_ball_sq)?;
    check_positive("R", radius)?;
    check_positive("T", big_t)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta = {delta} must lie in (0, 1]")));
    }
    let ln_ratio = norm_u0_sq.ln() - norm_ut_ball_sq.ln();
    if ln_ratio < 0.0 {
        return Err(invalid("norm ratio below 1: the flow cannot increase the L2 norm"));
    }
    let ln_arg = std::f64::consts::LN_2 + radius * radius * (1.0 + 1.0 / big_t) + ln_ratio;
    let inv_theta = 2.0 / (delta * radius).powi(2) * ln_arg;
    let theta = 1.0 / inv_theta;
    if theta > 1.0f64.min(big_t / 2.0) * (1.0 + 1e-12) {
        return Err(LabError::InternalError(format!("theta = {theta} exceeds min(1, T/2)")));
    }
    let epsilon = theta / delta;
    let bound_exponent = (1.0 + delta) * delta * radius * radius / (2.0 * theta);
    let mut chain = ConstantChain::default();
    chain.push("theta", theta, "1/theta = 2/(delta R)^2 ln(2 e^(R^2(1+1/T)) |u0|^2/|u(T)|^2_B(x0,R))", ORIGIN_THETA);
    chain.push("epsilon_kernel", epsilon, "delta R^2 / (2 ln(...)) = theta/delta", ORIGIN_THETA);
    chain.push("C_delta_R", (1.0 + delta) * delta * radius * radius / 4.0, "(1+delta) delta R^2 / 4", ORIGIN_THETA);
    chain.push("bound_exponent", bound_exponent, "(1+delta) delta R^2 / (2 theta)", ORIGIN_THETA);
    Ok(LocalizationTime { theta, epsilon, inv_theta, bound_exponent, chain })
}

/// C_{(ℓ,φ)} = |min_inner φ − max_outer φ| / ((1+2ℓ)(1+δ)δR²) and ħ_max = θ·min(C_{(ℓ,φ)}, 1/(2ℓ)).
pub fn admissible_hbar(
    theta: f64,
    ell: f64,
    min_inner: f64,
    max_outer: f64,
    delta: f64,
    radius: f64,
) -> Result<ConstantChain> {
    check_positive("theta", theta)?;
    if !(ell > 1.0) {
        return Err(invalid("ell must exceed 1"));
    }
    if !(max_outer - min_inner < 0.0) {
        return Err(invalid("weight gap must be negative: max over the annulus below min over the inner ball"));
    }
    let c_ell_phi = (min_inner - max_outer).abs() / ((1.0 + 2.0 * ell) * (1.0 + delta) * delta * radius * radius);
    let c3 = c_ell_phi.min(1.0 / (2.0 * ell));
    let mut chain = ConstantChain::default();
    chain.push("C_l_phi", c_ell_phi, "|min_inner phi - max_outer phi| / ((1+2l)(1+delta) delta R^2)", ORIGIN_GAP);
    chain.push("C3", c3, "min(C_l_phi, 1/(2l))", ORIGIN_GAP);
    chain.push("hbar_max", theta * c3, "theta C3", ORIGIN_GAP);
    Ok(chain)
}

/// ln ℓ for ℓ = (R²/r²)^{1/(1−ε)}·(2^{2+ε}/(ε ln(3/2)))^{1/(1−ε)}.
pub fn ln_ell(r: f64, big_r: f64, eps: f64) -> f64 {
    let a = (2.0 + eps) * std::f64::consts::LN_2 - (eps * 1.5f64.ln()).ln();
    (2.0 * (big_r / r).ln() + a) / (1.0 - eps)
}

/// M_ℓ from ln ℓ without forming ℓ.
pub fn m_ell_from_ln(ln_ell: f64) -> f64 {
    if ln_ell < 30.0 {
        return m_ell(ln_ell.exp());
    }
    let inv = (-ln_ell).exp();
    let ln_l1 = ln_ell + inv.ln_1p();
    // (2ℓ+1)/(ℓ+1) = 2 − 1/(ℓ+1)
    let ratio = 2.0 - (-ln_l1).exp();
    ln_l1 / ratio.ln()
}

/// C_β = (1+β)/(β[(1+β)^{1/(2γ)} − 1]^γ).
pub fn c_beta(beta: f64, gamma: f64) -> f64 {
    (1.0 + beta) / (beta * ((1.0 + beta).powf(1.0 / (2.0 * gamma)) - 1.0).powf(gamma))
}

/// Terms whose supremum over r defines K_ε, each multiplied by r^ε, in log form.
fn k_eps_terms(r: f64, big_r: f64, eps: f64) -> [f64; 3] {
    let eps_c = eps / (2.0 + eps);
    let ln_l = ln_ell(r, big_r, eps_c);
    let m = m_ell_from_ln(ln_l);
    let ln_k = 2.0 * r.ln() + ln_l - 8f64.ln();
    let beta = 1.0 / (2.0 * (1.0 + m));
    let ln_re = eps * r.ln();
    [
        // spectral exponent per √λ: 4√((1+2M)K)
        ln_re + 4f64.ln() + 0.5 * ((1.0 + 2.0 * m).ln() + ln_k),
        // observability exponent per 1/T: 2K·C_β
        ln_re + 2f64.ln() + ln_k + c_beta(beta, 1.0).ln(),
        // observability prefactor c/K with c = 2
        2f64.ln() - ln_k,
    ]
}

/// ln K_ε = ln sup_{0<r<R} max(r^ε·4√((1+2M)K), r^ε·2KC_β, 2/K), with ℓ built at ε/(2+ε).
pub fn ln_k_epsilon(eps: f64, big_r: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("epsilon must lie in (0, 1)"));
    }
    check_positive("R", big_r)?;
    let f = |t: f64| {
        let r = big_r * (-t).exp();
        k_eps_terms(r, big_r, eps).into_iter().fold(f64::NEG_INFINITY, f64::max)
    };
    let t_max = 40.0 / eps + 40.0;
    let steps = 20_000usize;
    let dt = t_max / steps as f64;
    let (mut best_t, mut best) = (0.0, f(0.0));
    for k in 1..=steps {
        let t = k as f64 * dt;
        let v = f(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    // golden-section refinement around the best grid point
    let (mut lo, mut hi) = ((best_t - dt).max(0.0), best_t + dt);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    Ok(best.max(f(0.5 * (lo + hi))))
}

/// Spectral/observability chain for the quadratic weight Φ = −|x−x₀|²/(4(T−t+ħ)).
pub fn spectral_chain(r: f64, big_r: f64, eps: f64) -> Result<ConstantChain> {
    if !(r > 0.0 && r < big_r) {
        return Err(invalid("need 0 < r < R"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("epsilon must lie in (0, 1)"));
    }
    let ln_l = ln_ell(r, big_r, eps);
    let m = m_ell_from_ln(ln_l);
    let ln_k = 2.0 * r.ln() + ln_l - 8f64.ln();
    let beta = 1.0 / (2.0 * (1.0 + m));
    // R²(1+M)/(4(ℓ+1)) ≤ r²/8, compared in logs
    let chain_lhs = 2.0 * big_r.ln() + (1.0 + m).ln() - 4f64.ln() - (ln_l + (-ln_l).exp().ln_1p());
    let chain_rhs = 2.0 * r.ln() - 8f64.ln();
    if chain_lhs > chain_rhs + 1e-12 {
        return Err(LabError::InternalError(format!(
            "chain inequality fails: ln lhs {chain_lhs} > ln rhs {chain_rhs}"
        )));
    }
    let cb = c_beta(beta, 1.0);
    let mut c = ConstantChain::default();
    c.push("r", r, "observation radius", ORIGIN_CHAIN);
    c.push("R", big_r, "max |x - x0| over the domain", ORIGIN_CHAIN);
    c.push("epsilon", eps, "exponent parameter", ORIGIN_CHAIN);
    c.push_ln("l", ln_l, "(R^2/r^2)^(1/(1-eps)) (2^(2+eps)/(eps ln(3/2)))^(1/(1-eps))", ORIGIN_CHAIN);
    c.push("M_l", m, "ln(l+1) / ln((2l+1)/(l+1))", ORIGIN_CHAIN);
    c.push_ln("K", ln_k, "r^2 l / 8", ORIGIN_CHAIN);
    c.push("beta", beta, "1 / (2(1+M_l))", ORIGIN_CHAIN);
    c.push("c", 2.0, "2", ORIGIN_CHAIN);
    c.push("gamma", 1.0, "1", ORIGIN_CHAIN);
    c.push("p", 2.0, "2", ORIGIN_CHAIN);
    c.push_ln("chain_lhs", chain_lhs, "R^2 (1+M_l) / (4(l+1))", ORIGIN_CHAIN);
    c.push_ln("chain_rhs", chain_rhs, "r^2 / 8", ORIGIN_CHAIN);
    c.push_ln(
        "spectral_exponent_coefficient",
        4f64.ln() + 0.5 * ((1.0 + 2.0 * m).ln() + ln_k),
        "4 sqrt((1+2M_l) r^2 l / 8); exponent = coefficient * sqrt(lambda)",
        ORIGIN_CHAIN,
    );
    c.push("C_beta", cb, "(1+beta) / (beta (sqrt(1+beta) - 1))", ORIGIN_TELESCOPE);
    c.push_ln("observability_prefactor", 16f64.ln() - 2.0 * r.ln() - ln_l, "16 / (r^2 l)", ORIGIN_TELESCOPE);
    c.push_ln(
        "observability_exponent_coefficient",
        2.0 * r.ln() + ln_l + cb.ln() - 4f64.ln(),
        "r^2 l C_beta / 4; exponent = coefficient / T",
        ORIGIN_TELESCOPE,
    );
    c.push("C_beta_over_M_l_sq", cb / (m * m), "C_beta / M_l^2 (measured, unnamed constant)", ORIGIN_TELESCOPE);
    c.push("M_l_times_r_eps", m * r.powf(eps), "M_l r^eps (measured, unnamed constant)", ORIGIN_CHAIN);
    let eps_c = eps / (2.0 + eps);
    let ln_lc = ln_ell(r, big_r, eps_c);
    let mc = m_ell_from_ln(ln_lc);
    let ln_kc = 2.0 * r.ln() + ln_lc - 8f64.ln();
    c.push("epsilon_chain", eps_c, "eps / (2+eps): chain parameter for which sqrt(r^2 l) ~ r^(-eps/2)", ORIGIN_CHAIN);
    c.push_ln("l_eps", ln_lc, "l evaluated at epsilon_chain", ORIGIN_CHAIN);
    c.push("M_l_eps", mc, "M_l evaluated at l_eps", ORIGIN_CHAIN);
    c.push_ln(
        "spectral_exponent_coefficient_eps",
        4f64.ln() + 0.5 * ((1.0 + 2.0 * mc).ln() + ln_kc),
        "4 sqrt((1+2M) r^2 l_eps / 8)",
        ORIGIN_CHAIN,
    );
    c.push_ln(
        "K_eps",
        ln_k_epsilon(eps, big_r)?,
        "sup over 0<r<R of max(r^eps 4 sqrt((1+2M)K), r^eps 2 K C_beta, 2/K) with l at epsilon_chain",
        ORIGIN_CHAIN,
    );
    Ok(c)
}

/// λ-dependent exponent 4√(λ(1+2M_ℓ)K) of the spectral inequality.
pub fn spectral_exponent(chain: &ConstantChain, lambda: f64) -> Result<f64> {
    let ln_coef = chain.ln("spectral_exponent_coefficient").ok_or_else(|| invalid("chain has no spectral exponent"))?;
    Ok(ln_coef.exp() * lambda.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityConstants {
    pub z: f64,
    pub c_beta: f64,
    /// ln of (c/(z K^{1/γ}))·e^{(1+1/γ)KC_β/T^γ}.
    pub ln_constant: f64,
    pub chain: ConstantChain,
}

/// Telescoping constant turning a one-time observation into integrated observability.
pub fn integrated_observability(
    c: f64,
    k: f64,
    beta: f64,
    gamma: f64,
    p: f64,
    big_t: f64,
) -> Result<ObservabilityConstants> {
    check_beta(beta)?;
    check_positive("c", c)?;
    check_positive("K", k)?;
    check_positive("gamma", gamma)?;
    check_positive("T", big_t)?;
    check_p(p)?;
    let z = (1.0 + beta).powf(1.0 / (2.0 * gamma));
    let cb = c_beta(beta, gamma);
    let exponent = (1.0 + 1.0 / gamma) * k * cb / big_t.powf(gamma);
    let ln_pref = c.ln() - z.ln() - k.ln() / gamma;
    let ln_constant = ln_pref + exponent;
    let mut chain = ConstantChain::default();
    chain.push("z", z, "(1+beta)^(1/(2 gamma))", ORIGIN_TELESCOPE);
    chain.push("C_beta", cb, "(1+beta) / (beta ((1+beta)^(1/(2 gamma)) - 1)^gamma)", ORIGIN_TELESCOPE);
    chain.push("exponent", exponent, "(1+1/gamma) K C_beta / T^gamma", ORIGIN_TELESCOPE);
    chain.push_ln("prefactor", ln_pref, "c / (z K^(1/gamma))", ORIGIN_TELESCOPE);
    chain.push_ln("prefactor_without_z", ln_pref + z.ln(), "c / K^(1/gamma)", ORIGIN_TELESCOPE);
    chain.push_ln(
        "observability_constant",
        ln_constant,
        "c/(z K^(1/gamma)) exp((1+1/gamma) K C_beta / T^gamma)",
        ORIGIN_TELESCOPE,
    );
    Ok(ObservabilityConstants { z, c_beta: cb, ln_constant, chain })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralConstant {
    pub t_opt: f64,
    pub exponent: f64,
    /// ln of c·e^{exponent}.
    pub ln_constant: f64,
    pub constant: f64,
}

impl SpectralConstant {
    pub fn chain(&self) -> ConstantChain {
        let mut c = ConstantChain::default();
        c.push("T_opt", self.t_opt, "((beta/(1-beta)) K / lambda)^(1/(1+gamma))", ORIGIN_SPECTRAL);
        c.push(
            "spectral_exponent",
            self.exponent,
            "lambda^(gamma/(1+gamma)) 2 ((1-beta)/beta)^(gamma/(1+gamma)) K^(1/(1+gamma))",
            ORIGIN_SPECTRAL,
        );
        c.push_ln("spectral_constant", self.ln_constant, "c exp(spectral_exponent)", ORIGIN_SPECTRAL);
        c
    }
}

/// Spectral inequality √Σ|a_j|² ≤ c·e^{λ^{γ/(1+γ)}·2((1−β)/β)^{γ/(1+γ)}K^{1/(1+γ)}}‖Σa_je_j‖_{L^p(ω)}.
pub fn spectral_from_observation(
    c: f64,
    k: f64,
    beta: f64,
    gamma: f64,
    p: f64,
    lambda: f64,
) -> Result<SpectralConstant> {
    check_beta(beta)?;
    check_positive("c", c)?;
    check_positive("K", k)?;
    check_positive("gamma", gamma)?;
    check_positive("lambda", lambda)?;
    check_p(p)?;
    let q = gamma / (1.0 + gamma);
    let t_opt = (beta / (1.0 - beta) * k / lambda).powf(1.0 / (1.0 + gamma));
    let exponent = lambda.powf(q) * 2.0 * ((1.0 - beta) / beta).powf(q) * k.powf(1.0 / (1.0 + gamma));
    let ln_constant = c.ln() + exponent;
    Ok(SpectralConstant { t_opt, exponent, ln_constant, constant: ln_constant.exp() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConverseConstants {
    pub d3: f64,
    pub d4: f64,
    pub alpha: f64,
}

impl ConverseConstants {
    pub fn chain(&self, d1: f64, d2: f64) -> ConstantChain {
        let mut c = ConstantChain::default();
        c.push("D1", d1, "spectral prefactor", ORIGIN_CONVERSE);
        c.push("D2", d2, "spectral exponent coefficient", ORIGIN_CONVERSE);
        c.push("D3", self.d3, "2(1 + max(1, |omega|^(1/p-1/2)) D1)", ORIGIN_CONVERSE);
        c.push("D4", self.d4, "D2^(1+gamma) / (1-beta)^gamma", ORIGIN_CONVERSE);
        c.push("alpha", self.alpha, "gamma / (1+gamma)", ORIGIN_CONVERSE);
        c
    }
}

/// D₃ = 2(1 + max(1, |ω|^{1/p−1/2})D₁), D₄ = D₂^{1+γ}/(1−β)^γ.
pub fn observation_from_spectral(
    d1: f64,
    d2: f64,
    gamma: f64,
    beta: f64,
    p: f64,
    measure_omega: f64,
) -> Result<ConverseConstants> {
    check_beta(beta)?;
    check_positive("D1", d1)?;
    check_positive("D2", d2)?;
    check_positive("gamma", gamma)?;
    check_positive("|omega|", measure_omega)?;
    check_p(p)?;
    let factor = 1f64.max(measure_omega.powf(1.0 / p - 0.5));
    Ok(ConverseConstants {
        d3: 2.0 * (1.0 + factor * d1),
        d4: d2.powf(1.0 + gamma) / (1.0 - beta).powf(gamma),
        alpha: gamma / (1.0 + gamma),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalInequality {
    /// ∫μ|x|⁻²v² ≤ ∫|∇v|²
    Hardy { mu: f64 },
    /// ‖v‖₂ ≤ (e‖v‖₁)^{2/(2+n)}((1/(2√π))‖∇v‖₂)^{n/(2+n)}
    Nash,
}

pub fn check_functional_inequality(
    kind: FunctionalInequality,
    field: &Field,
    n: usize,
    tol: f64,
) -> Result<InequalityReport> {
    let anchor = vec![0.0; field.grid.dim];
    let norms = field_norms(field, &anchor)?;
    let nf = n as f64;
    let rep = match kind {
        FunctionalInequality::Hardy { mu } => InequalityReport::new(mu * norms.inverse_square, norms.grad_sq, tol)
            .with("kind", "hardy")
            .with("mu", mu)
            .with("critical_mu", 0.25 * (nf - 2.0).powi(2)),
        FunctionalInequality::Nash => {
            let lhs = norms.l2_sq.sqrt();
            let rhs = (std::f64::consts::E * norms.l1).powf(2.0 / (2.0 + nf))
                * (norms.grad_sq.sqrt() / (2.0 * std::f64::consts::PI.sqrt())).powf(nf / (2.0 + nf));
            InequalityReport::new(lhs, rhs, tol).with("kind", "nash")
        }
    };
    Ok(rep.with("n", n).with("grid_points", field.grid.len()))
}

/// One measured instance of ‖u(T)‖ ≤ (c e^{K/T}‖u(T)‖_ω)^β ‖u₀‖^{1−β}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationReport {
    pub t: f64,
    pub lhs: f64,
    pub obs: f64,
    pub total: f64,
}

impl ObservationReport {
    /// ln lhs − β(ln c + K/T + ln obs) − (1−β) ln total.
    pub fn log_violation(&self, ln_c: f64, k: f64, beta: f64) -> f64 {
        self.lhs.ln() - beta * (ln_c + k / self.t + self.obs.ln()) - (1.0 - beta) * self.total.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedConstants {
    pub c: f64,
    pub k: f64,
    pub beta: f64,
    pub max_violation: f64,
    pub residuals: Vec<f64>,
    /// False when no admissible (c, K, β) removes every violation; the fit is then a lower bound.
    pub feasible: bool,
    pub iterations: usize,
}

const FIT_PENALTY: f64 = 1e3;
const FIT_K_FLOOR: f64 = 1e-6;
const FIT_SWEEPS: usize = 4000;
/// |logit β| bound, keeping β in [1e−3, 1 − 1e−3].
const FIT_LOGIT_MAX: f64 = 6.9;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fits (c, K, β) by penalized coordinate descent on (ln c, K, logit β):
/// minimize mean slack + penalty·Σ violations⁺, then raise ln c to clear any residual violation.
pub fn empirical_fit(reports: &[ObservationReport], r: f64) -> Result<FittedConstants> {
    if reports.len() < 10 {
        return Err(invalid("empirical fit needs at least 10 reports"));
    }
    let mut ts: Vec<f64> = reports.iter().map(|x| x.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 3 {
        return Err(invalid("empirical fit needs reports at 3 or more distinct times"));
    }
    for rep in reports {
        if !(rep.t > 0.0 && rep.lhs > 0.0 && rep.obs > 0.0 && rep.total > 0.0) {
            return Err(invalid("reports need positive times and norms"));
        }
    }
    let objective = |x: &[f64; 3]| -> f64 {
        let (ln_c, k, beta) = (x[0], x[1].max(FIT_K_FLOOR), sigmoid(x[2]));
        let mut slack = 0.0;
        let mut penalty = 0.0;
        for rep in reports {
            let v = rep.log_violation(ln_c, k, beta);
            slack -= v;
            penalty += v.max(0.0);
        }
        slack / reports.len() as f64 + FIT_PENALTY * penalty
    };
    let mut x = [2f64.ln(), (r * r / 8.0).max(FIT_K_FLOOR), 0.0];
    let mut step = [1.0, (r * r / 8.0).max(0.1), 1.0];
    let mut best = objective(&x);
    let mut iterations = 0;
    while iterations < FIT_SWEEPS && step.iter().any(|s| *s > 1e-12) {
        iterations += 1;
        let mut improved = false;
        for i in 0..3 {
            for dir in [1.0, -1.0] {
                let mut y = x;
                y[i] += dir * step[i];
                y[1] = y[1].max(FIT_K_FLOOR);
                y[2] = y[2].clamp(-FIT_LOGIT_MAX, FIT_LOGIT_MAX);
                let v = objective(&y);
                if v < best {
                    best = v;
                    x = y;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in &mut step {
                *s *= 0.5;
            }
        }
    }
    let (mut ln_c, k, beta) = (x[0], x[1].max(FIT_K_FLOOR), sigmoid(x[2]));
    let worst = reports.iter().map(|rep| rep.log_violation(ln_c, k, beta)).fold(f64::NEG_INFINITY, f64::max);
    if worst > 0.0 {
        ln_c += worst / beta;
    }
    let residuals: Vec<f64> = reports.iter().map(|rep| rep.log_violation(ln_c, k, beta)).collect();
    let max_violation = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(FittedConstants {
        c: ln_c.exp(),
        k,
        beta,
        feasible: max_violation <= 1e-9,
        max_violation,
        residuals,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HbarSelection {
    pub inv_hbar: f64,
    /// ln of 2^{1+C₁/C₂}e^{2C₁ℓ/T}(‖u₀‖/‖u(T)‖)^{M+(1+M)C₁/C₂}.
    pub ln_factor_closed: f64,
    /// Same factor composed step by step from the choice of ħ.
    pub ln_factor_composed: f64,
    pub exponent: f64,
}

impl HbarSelection {
    pub fn chain(&self, c1: f64, c2: f64) -> ConstantChain {
        let mut c = ConstantChain::default();
        c.push("C1", c1, "gain constant", ORIGIN_HBAR);
        c.push("C2", c2, "remainder constant", ORIGIN_HBAR);
        c.push("inv_hbar", self.inv_hbar, "(ln 2 + 2 C2 l / T + (1+M) ln(|u0|/|u(T)|)) / C2", ORIGIN_HBAR);
        c.push("ratio_exponent", self.exponent, "M + (1+M) C1/C2", ORIGIN_HBAR);
        c.push_ln(
            "observation_factor",
            self.ln_factor_closed,
            "2^(1+C1/C2) e^(2 C1 l/T) (|u0|/|u(T)|)^(M+(1+M)C1/C2)",
            ORIGIN_HBAR,
        );
        c
    }
}

/// e^{C₂/ħ} := 2e^{2C₂ℓ/T}(‖u₀‖/‖u(T)‖)^{1+M} and the resulting bound on ‖u(T)‖/‖u(T)‖_ω.
pub fn hbar_selection(
    c1: f64,
    c2: f64,
    ell: f64,
    big_t: f64,
    m: f64,
    norm_u0: f64,
    norm_ut: f64,
) -> Result<HbarSelection> {
    for (name, v) in
        [("C1", c1), ("C2", c2), ("l", ell), ("T", big_t), ("M", m), ("|u0|", norm_u0), ("|u(T)|", norm_ut)]
    {
        check_positive(name, v)?;
    }
    let ln_ratio = norm_u0.ln() - norm_ut.ln();
    let inv_hbar = (std::f64::consts::LN_2 + 2.0 * c2 * ell / big_t + (1.0 + m) * ln_ratio) / c2;
    // ‖u(T)‖^{1+M} ≤ 2e^{C₁/ħ}‖u₀‖^M‖u(T)‖_ω, then divide by ‖u(T)‖^M
    let ln_factor_composed = std::f64::consts::LN_2 + c1 * inv_hbar + m * norm_u0.ln() - m * norm_ut.ln();
    let exponent = m + (1.0 + m) * c1 / c2;
    let ln_factor_closed = (1.0 + c1 / c2) * std::f64::consts::LN_2 + 2.0 * c1 * ell / big_t + exponent * ln_ratio;
    Ok(HbarSelection { inv_hbar, ln_factor_closed, ln_factor_composed, exponent })
}

fn masked_l2(model: &HeatModel, state: &SpectralState, w: &[f64]) -> f64 {
    model.samples(state).iter().zip(w).map(|(u, w)| u * u * w).sum::<f64>().sqrt()
}

/// Checks ‖u₀‖²/‖u(t)‖²_{B(1+δ)R} ≤ e^{(1+δ)δR²/(2θ)} at `samples` times in [T−θ, T] (log space).
#[allow(clippy::too_many_arguments)]
pub fn verify_localization_time(
    model: &HeatModel,
    u0: &SpectralState,
    ball_r: &[f64],
    ball_wide: &[f64],
    radius: f64,
    delta: f64,
    big_t: f64,
    samples: usize,
) -> Result<InequalityReport> {
    let n0 = u0.coeffs.iter().map(|a| a * a).sum::<f64>();
    let ut = evolve(u0, big_t)?;
    let loc = localization_time(n0, masked_l2(model, &ut, ball_r).powi(2), radius, delta, big_t)?;
    let mut worst = WorstCase::new(1e-12);
    for k in 0..=samples.max(1) {
        let t = big_t - loc.theta + loc.theta * k as f64 / samples.max(1) as f64;
        let lhs = n0.ln() - 2.0 * masked_l2(model, &evolve(u0, t)?, ball_wide).ln();
        worst.push(lhs, loc.bound_exponent, loc.bound_exponent - lhs);
    }
    Ok(worst.finish().with("theta", loc.theta).with("log_space", true))
}

/// ‖e^{TΔ}u₀‖ ≤ exp(ln_constant)·∫₀ᵀ‖u(t)‖_{L²(ω)}dt with composite Simpson in time (log space).
pub fn check_integrated_observability(
    model: &HeatModel,
    u0: &SpectralState,
    omega_weights: &[f64],
    big_t: f64,
    ln_constant: f64,
    panels: usize,
) -> Result<InequalityReport> {
    let m = 2 * panels.max(1);
    let h = big_t / m as f64;
    let mut integral = 0.0;
    for k in 0..=m {
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += w * masked_l2(model, &evolve(u0, k as f64 * h)?, omega_weights);
    }
    integral *= h / 3.0;
    let lhs = evolve(u0, big_t)?.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt().ln();
    let rhs = ln_constant + integral.ln();
    Ok(InequalityReport::new(lhs, rhs, 1e-12).with("T", big_t).with("log_space", true).with("integral", integral))
}

/// Σ_{λ_j≤λ}|a_j|² ≤ 4e^{exponent}∫_ω|Σa_je_j|² for the first modes with λ_j ≤ λ (log space).
pub fn check_spectral_inequality(
    model: &HeatModel,
    coeffs: &[f64],
    lambda: f64,
    omega_weights: &[f64],
    exponent: f64,
) -> Result<InequalityReport> {
    let ev = &model.basis.eigenvalues;
    let kept: Vec<f64> = coeffs.iter().zip(ev).map(|(a, l)| if *l <= lambda { *a } else { 0.0 }).collect();
    if kept.iter().all(|a| *a == 0.0) {
        return Err(invalid("no eigenvalue below lambda carries a coefficient"));
    }
    let mut padded = kept.clone();
    padded.resize(ev.len(), 0.0);
    let state = model.state(padded)?;
    let lhs = kept.iter().map(|a| a * a).sum::<f64>().ln();
    let rhs = log_sum_exp([4f64.ln() + exponent]) + 2.0 * masked_l2(model, &state, omega_weights).ln();
    Ok(InequalityReport::new(lhs, rhs, 1e-12).with("lambda", lambda).with("log_space", true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_spectral::{build_interval_basis, Grid, Region};
    use crate::numerics::{random_coefficients, rng};
    use proptest::prelude::*;
    use rand::Rng;
    use std::sync::Arc;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn theta_example() {
        let loc = localization_time(std::f64::consts::E, 1.0, 1.0, 1.0, 2.0).unwrap();
        let inv = 2.0 * (2f64.ln() + 1.5 + 1.0);
        assert!(rel(loc.inv_theta, inv) < 1e-14);
        assert!((loc.theta - 0.156_585).abs() < 1e-5);
        assert_eq!(loc.epsilon, loc.theta);
        let big = localization_time(1e200, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(big.theta < 0.01 * loc.theta);
        assert!(matches!(localization_time(0.5, 1.0, 1.0, 1.0, 2.0), Err(LabError::InvalidInput(_))));
    }

    #[test]
    fn theta_uses_delta_scaling() {
        let loc = localization_time(3.0, 1.0, 0.7, 0.5, 1.0).unwrap();
        assert!(rel(loc.theta, 0.5 * loc.epsilon) < 1e-15);
    }

    #[test]
    fn theta_decreases_with_ratio() {
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let th = localization_time(10f64.powi(k), 1.0, 0.4, 1.0, 1.0).unwrap().theta;
            assert!(th < prev);
            prev = th;
        }
    }

    #[test]
    fn ell_example_and_chain() {
        let c = spectral_chain(0.5, 1.0, 0.5).unwrap();
        let expect = 16.0 * (2f64.powf(2.5) / (0.5 * 1.5f64.ln())).powi(2);
        assert!(rel(c.get("l").unwrap(), expect) < 1e-12);
        assert!((c.get("l").unwrap() - 1.2457e4).abs() < 5.0);
        assert!(c.ln("chain_lhs").unwrap() <= c.ln("chain_rhs").unwrap());
        let beta = c.get("beta").unwrap();
        let m = c.get("M_l").unwrap();
        assert!(rel((1.0 - beta) / beta, 1.0 + 2.0 * m) < 1e-14);
    }

    #[test]
    fn m_ell_example_and_monotone() {
        assert!((m_ell(2.0) - 3f64.ln() / (5.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((m_ell(2.0) - 2.1507).abs() < 1e-4);
        let mut prev = 0.0;
        for k in 1..200 {
            let v = m_ell(1.0 + 0.37 * k as f64);
            assert!(v > prev);
            prev = v;
        }
        for ln_l in [31.0f64, 100.0, 700.0] {
            let direct = (ln_l + (-ln_l).exp().ln_1p()) / (2.0 - 1.0 / ln_l.exp()).ln();
            assert!(rel(m_ell_from_ln(ln_l), direct) < 1e-12);
        }
        assert!(rel(m_ell_from_ln(29.0), m_ell_from_ln(29.0 + 1e-9)) < 1e-8);
    }

    #[test]
    fn k_grows_as_r_shrinks() {
        let mut prev = 0.0;
        for r in [0.4, 0.2, 0.1, 0.05, 0.01] {
            let k = spectral_chain(r, 0.5, 0.5).unwrap().get("K").unwrap();
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn k_epsilon_dominates_chain_exponent() {
        for eps in [0.1, 0.5, 0.9] {
            let ln_ke = ln_k_epsilon(eps, 0.5).unwrap();
            for r in [0.4, 0.2, 0.1, 1e-3, 1e-8] {
                let terms = k_eps_terms(r, 0.5, eps);
                for t in terms {
                    assert!(t <= ln_ke + 1e-12, "eps {eps} r {r}: {t} > {ln_ke}");
                }
                let c = spectral_chain(r, 0.5, eps).unwrap();
                let e = c.ln("spectral_exponent_coefficient_eps").unwrap();
                assert!(e <= ln_ke - eps * r.ln() + 1e-12);
            }
        }
    }

    #[test]
    fn c_beta_example_and_blowup() {
        let o = integrated_observability(2.0, 1.0, 0.5, 1.0, 2.0, 1.0).unwrap();
        assert!((o.z - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((o.z - 1.2247).abs() < 1e-4);
        assert!(rel(o.c_beta, 1.5 / (0.5 * (1.5f64.sqrt() - 1.0))) < 1e-14);
        assert!((o.c_beta - 13.348).abs() < 1e-3);
        assert!(rel(o.chain.get("exponent").unwrap(), 2.0 * o.c_beta) < 1e-15);
        let mut prev = 0.0;
        for k in 1..12 {
            let cb = c_beta(0.5f64.powi(k), 1.0);
            assert!(cb > prev);
            prev = cb;
        }
        assert!(prev > 1e6);
        assert!(integrated_observability(2.0, 1.0, 1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn spectral_forward_example() {
        let s = spectral_from_observation(2.0, 1.0, 0.5, 1.0, 2.0, 4.0).unwrap();
        assert!((s.t_opt - 0.5).abs() < 1e-12);
        assert!(rel(s.constant, 2.0 * 4f64.exp()) < 1e-12);
        let near_one = spectral_from_observation(2.0, 1.0, 1.0 - 1e-12, 1.0, 2.0, 4.0).unwrap();
        assert!((near_one.constant - 2.0).abs() < 1e-4);
    }

    #[test]
    fn converse_examples() {
        let d = observation_from_spectral(1.0, 1.0, 1.0, 0.5, 2.0, 0.3).unwrap();
        assert_eq!(d.d3, 4.0);
        assert_eq!(d.d4, 2.0);
        let d1 = 0.37;
        assert_eq!(observation_from_spectral(d1, 1.0, 1.0, 0.5, 2.0, 7.0).unwrap().d3, 2.0 * (1.0 + d1));
        let small = observation_from_spectral(1.0, 1.0, 1.0, 0.5, 1.0, 4.0).unwrap();
        assert!(rel(small.d3, 2.0 * (1.0 + 2.0)) < 1e-15);
    }

    #[test]
    fn forward_converse_round_trip_is_finite() {
        let s = spectral_from_observation(2.0, 1.0, 0.5, 1.0, 2.0, 4.0).unwrap();
        // √Σ ≤ c e^{2√(λK(1−β)/β)}: D₁ = c, D₂ = 2√(K(1−β)/β) with γ = 1
        let d = observation_from_spectral(2.0, 2.0, 1.0, 0.5, 2.0, 1.0).unwrap();
        let again = spectral_from_observation(d.d3, d.d4, 0.5, 1.0, 2.0, 4.0).unwrap();
        for v in [s.constant, d.d3, d.d4, again.constant] {
            assert!(v.is_finite() && v > 0.0);
        }
    }

    #[test]
    fn sin_nash_example() {
        let g = Arc::new(Grid::interval(std::f64::consts::PI, 4096).unwrap());
        let f = g.sample(|x| x[0].sin());
        let rep = check_functional_inequality(FunctionalInequality::Nash, &f, 1, 1e-12).unwrap();
        assert!((rep.lhs - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-8);
        let expect = (2.0 * std::f64::consts::E).powf(2.0 / 3.0)
            * ((std::f64::consts::PI / 2.0).sqrt() / (2.0 * std::f64::consts::PI.sqrt())).powf(1.0 / 3.0);
        assert!((rep.rhs - expect).abs() < 1e-6);
        assert!((rep.rhs - 2.18).abs() < 0.01);
        assert!(rep.pass);
    }

    #[test]
    fn hardy_radial_example() {
        let g = Arc::new(Grid::radial(3, 1.0, 2000).unwrap());
        let f = g.sample(|x| x[0] * (1.0 - x[0]));
        let rep = check_functional_inequality(FunctionalInequality::Hardy { mu: 0.25 }, &f, 3, 1e-12).unwrap();
        assert!(rep.pass && rep.slack > 0.0, "{rep:?}");
        // v = ρ(1−ρ): ∫|∇v|² = 4π·2/15, ∫ρ⁻²v² = 4π/30
        assert!(rel(rep.rhs, 4.0 * std::f64::consts::PI * (1.0 / 3.0 - 1.0 + 4.0 / 5.0)) < 1e-6);
        assert!(rel(rep.lhs, 0.25 * 4.0 * std::f64::consts::PI / 30.0) < 1e-6);
    }

    #[test]
    fn synthetic_fit_reaches_zero_violation() {
        let mut r = rng(11);
        let (c, k, beta) = (2.0f64, 1.0f64, 0.5f64);
        let mut reports = vec![];
        for i in 0..30 {
            let t = [0.1, 0.5, 1.0][i % 3];
            let total: f64 = r.gen_range(1.0..3.0);
            let obs: f64 = r.gen_range(0.01..0.5);
            let lhs = (c * (k / t).exp() * obs).powf(beta) * total.powf(1.0 - beta);
            reports.push(ObservationReport { t, lhs, obs, total });
        }
        let fit = empirical_fit(&reports, 0.5).unwrap();
        assert!(fit.max_violation <= 1e-9 && fit.feasible);
        assert!(empirical_fit(&reports[..5], 0.5).is_err());
    }

    #[test]
    fn hbar_identity_holds_on_random_inputs() {
        let mut r = rng(5);
        for _ in 0..200 {
            let h = hbar_selection(
                r.gen_range(0.1..5.0),
                r.gen_range(0.1..5.0),
                r.gen_range(1.1..20.0),
                r.gen_range(0.1..3.0),
                r.gen_range(1.0..30.0),
                r.gen_range(1.0..1e3),
                r.gen_range(1e-3..1.0),
            )
            .unwrap();
            assert!(rel(h.ln_factor_composed, h.ln_factor_closed) < 1e-12);
        }
    }

    #[test]
    fn localization_bound_holds_on_simulated_run() {
        let grid = Arc::new(Grid::interval(1.0, 2000).unwrap());
        let basis = Arc::new(build_interval_basis(1.0, 40).unwrap());
        let model = HeatModel::new(basis, grid.clone()).unwrap();
        let (x0, radius, delta) = (0.5, 0.4, 1.0);
        let ball_r = grid.region_weights(&Region::Box { lo: vec![x0 - radius], hi: vec![x0 + radius] }, &[x0]).unwrap();
        let wide = (1.0 + delta) * radius;
        let ball_w = grid.region_weights(&Region::Box { lo: vec![x0 - wide], hi: vec![x0 + wide] }, &[x0]).unwrap();
        for seed in 0..10 {
            let u0 = model.state(random_coefficients(seed, 40)).unwrap();
            let rep = verify_localization_time(&model, &u0, &ball_r, &ball_w, radius, delta, 1.0, 40).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    /// Alternative arrangements of the closed forms.
    mod alt {
        pub fn c_beta(beta: f64, gamma: f64) -> f64 {
            let z = ((1.0 + beta).ln() / (2.0 * gamma)).exp();
            (1.0 / beta + 1.0) * (z - 1.0).powf(-gamma)
        }
        pub fn ell(r: f64, big_r: f64, eps: f64) -> f64 {
            (big_r * big_r * 2f64.powf(2.0 + eps) / (r * r * eps * (1.5f64).ln())).powf(1.0 / (1.0 - eps))
        }
        pub fn spectral(c: f64, k: f64, beta: f64, gamma: f64, lambda: f64) -> f64 {
            let t = (beta * k / ((1.0 - beta) * lambda)).powf(1.0 / (1.0 + gamma));
            c * (k / t.powf(gamma) + lambda * t * (1.0 - beta) / beta).exp()
        }
        pub fn inv_theta(ratio: f64, radius: f64, delta: f64, big_t: f64) -> f64 {
            (2.0 * ratio * (radius * radius * (big_t + 1.0) / big_t).exp()).ln() * 2.0
                / (delta * delta * radius * radius)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn formulas_match_alternative_arrangements(
            beta in 0.01f64..0.99, gamma in 0.2f64..3.0, k in 0.1f64..5.0, c in 0.5f64..5.0, lambda in 0.5f64..50.0,
            r in 0.05f64..0.45, eps in 0.05f64..0.95, ratio in 1.0f64..1e6, delta in 0.05f64..1.0, t in 0.1f64..5.0,
        ) {
            prop_assert!(rel(c_beta(beta, gamma), alt::c_beta(beta, gamma)) < 1e-12);
            let ch = spectral_chain(r, 0.5, eps).unwrap();
            let direct = alt::ell(r, 0.5, eps);
            if direct.is_finite() {
                prop_assert!(rel(ch.get("l").unwrap(), direct) < 1e-10);
            }
            let s = spectral_from_observation(c, k, beta, gamma, 2.0, lambda).unwrap();
            let a = alt::spectral(c, k, beta, gamma, lambda);
            if a.is_finite() {
                prop_assert!(rel(s.constant, a) < 1e-11);
            }
            let loc = localization_time(ratio, 1.0, 0.4, delta, t).unwrap();
            prop_assert!(rel(loc.inv_theta, alt::inv_theta(ratio, 0.4, delta, t)) < 1e-12);
        }
    }
}
