//! Heat (and radial Schrödinger) semigroup in eigen-coefficients.

use crate::domain_spectral::{region_weight_vector, EigenSystem, Field, Grid, RegionSel};
use crate::error::{invalid, LabError, Result};
use crate::numerics::{log_sum_exp, richardson_derivative};
use crate::report::{InequalityReport, WorstCase};
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub coeffs: Vec<f64>,
    pub basis: Arc<EigenSystem>,
    pub t: f64,
}

impl SpectralState {
    pub fn new(coeffs: Vec<f64>, basis: Arc<EigenSystem>, t: f64) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(invalid("coefficient count must match J_max of the eigen-system"));
        }
        if coeffs.iter().any(|a| !a.is_finite()) || !(t >= 0.0) {
            return Err(invalid("coefficients must be finite and t >= 0"));
        }
        Ok(Self { coeffs, basis, t })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|a| *a == 0.0)
    }

    /// ln ‖u(t)‖ for t ≥ self.t, evaluated without forming the state.
    pub fn ln_l2_at(&self, t: f64) -> f64 {
        let dt = t - self.t;
        0.5 * log_sum_exp(
            self.coeffs
                .iter()
                .zip(&self.basis.eigenvalues)
                .filter(|(a, _)| **a != 0.0)
                .map(|(a, l)| 2.0 * a.abs().ln() - 2.0 * l * dt),
        )
    }
}

pub fn evolve(state: &SpectralState, t: f64) -> Result<SpectralState> {
    if !(t >= state.t) {
        return Err(invalid(format!("backward evolution requested: {t} < {}", state.t)));
    }
    let dt = t - state.t;
    let coeffs = state.coeffs.iter().zip(&state.basis.eigenvalues).map(|(a, l)| a * (-l * dt).exp()).collect();
    Ok(SpectralState { coeffs, basis: state.basis.clone(), t })
}

/// Eigenbasis together with cached samples on a quadrature grid.
#[derive(Debug, Clone)]
pub struct HeatModel {
    pub basis: Arc<EigenSystem>,
    pub grid: Arc<Grid>,
    modes: Vec<Vec<f64>>,
}

impl HeatModel {
    pub fn new(basis: Arc<EigenSystem>, grid: Arc<Grid>) -> Result<Self> {
        let modes = basis.sample_all(&grid)?;
        Ok(Self { basis, grid, modes })
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn state(&self, coeffs: Vec<f64>) -> Result<SpectralState> {
        SpectralState::new(coeffs, self.basis.clone(), 0.0)
    }

    /// Grid samples of u = Σ a_j e_j.
    pub fn samples(&self, state: &SpectralState) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (a, mode) in state.coeffs.iter().zip(&self.modes) {
            if *a != 0.0 {
                for (o, m) in out.iter_mut().zip(mode) {
                    *o += a * m;
                }
            }
        }
        out
    }

    pub fn field(&self, state: &SpectralState) -> Field {
        Field { values: self.samples(state), grid: self.grid.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    L2,
    /// Quadratic form Σ λ_j a_j² of the generator.
    Form,
    LpMasked {
        p: u32,
        region: RegionSel,
    },
}

pub fn compute_norm(model: &HeatModel, state: &SpectralState, kind: &NormKind) -> Result<f64> {
    match kind {
        NormKind::L2 => Ok(state.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()),
        NormKind::Form => Ok(state.coeffs.iter().zip(&state.basis.eigenvalues).map(|(a, l)| l * a * a).sum()),
        NormKind::LpMasked { p, region } => {
            if *p != 1 && *p != 2 {
                return Err(LabError::Unsupported(format!("L^p norm with p = {p}; only p in {{1, 2}}")));
            }
            let w = region_weight_vector(&model.grid, region)?;
            let u = model.samples(state);
            let s: f64 = u.iter().zip(&w).map(|(v, w)| v.abs().powi(*p as i32) * w).sum();
            Ok(s.powf(1.0 / *p as f64))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub form: Vec<f64>,
    pub l2_omega: Vec<f64>,
    pub l1_omega: Vec<f64>,
}

impl EvolutionTrace {
    pub const HEADER: [&'static str; 5] = ["t", "l2", "form", "l2_omega", "l1_omega"];

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::HEADER)?;
        for k in 0..self.times.len() {
            wr.write_record(
                [self.times[k], self.l2[k], self.form[k], self.l2_omega[k], self.l1_omega[k]]
                    .iter()
                    .map(|v| format!("{v:.17e}")),
            )?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Samples the trace at `times` (strictly increasing, ≥ u0.t). Masked columns are NaN without ω.
pub fn trace(model: &HeatModel, u0: &SpectralState, times: &[f64]) -> Result<EvolutionTrace> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("trace times must be strictly increasing"));
    }
    let has_omega = model.grid.omega_weights.is_some();
    let mut tr = EvolutionTrace::default();
    for &t in times {
        let s = evolve(u0, t)?;
        tr.times.push(t);
        tr.l2.push(compute_norm(model, &s, &NormKind::L2)?);
        tr.form.push(compute_norm(model, &s, &NormKind::Form)?);
        if has_omega {
            tr.l2_omega.push(compute_norm(model, &s, &NormKind::LpMasked { p: 2, region: RegionSel::Omega })?);
            tr.l1_omega.push(compute_norm(model, &s, &NormKind::LpMasked { p: 1, region: RegionSel::Omega })?);
        } else {
            tr.l2_omega.push(f64::NAN);
            tr.l1_omega.push(f64::NAN);
        }
    }
    Ok(tr)
}

/// ‖e^{tΔ}u0‖ ≤ ‖e^{TΔ}u0‖^{t/T} ‖u0‖^{1−t/T} on `samples` equispaced times in [0, T].
///
/// Slack is relative: rhs/lhs − 1, evaluated in log space.
pub fn check_log_convexity(u0: &SpectralState, big_t: f64, samples: usize, tol: f64) -> Result<InequalityReport> {
    if u0.is_zero() || !(big_t > 0.0) || samples < 2 {
        return Err(invalid("log-convexity check needs u0 != 0, T > 0 and >= 2 samples"));
    }
    let (ln0, ln_t) = (u0.ln_l2_at(u0.t), u0.ln_l2_at(u0.t + big_t));
    let mut worst = WorstCase::new(tol);
    for k in 0..samples {
        let t = big_t * k as f64 / (samples - 1) as f64;
        let th = t / big_t;
        let lhs = u0.ln_l2_at(u0.t + t);
        let rhs = th * ln_t + (1.0 - th) * ln0;
        worst.push(lhs.exp(), rhs.exp(), (rhs - lhs).exp_m1());
    }
    Ok(worst.finish().with("T", big_t))
}

/// Empirical constant t·form(u(t)) / ‖u0‖² of the regularizing bound.
pub fn check_regularizing(u0: &SpectralState, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("regularizing ratio needs t > 0"));
    }
    let n0: f64 = u0.coeffs.iter().map(|a| a * a).sum();
    if n0 == 0.0 {
        return Err(LabError::UndefinedRatio("zero initial state".into()));
    }
    let form: f64 = u0.coeffs.iter().zip(&u0.basis.eigenvalues).map(|(a, l)| l * a * a * (-2.0 * l * t).exp()).sum();
    Ok(t * form / n0)
}

/// Weight ξ(x,t) = −|x−x0|²/(2(T−t+ϵ)); `None` anchor means ξ ≡ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct XiWeight {
    pub x0: Option<Vec<f64>>,
    pub big_t: f64,
    pub eps: f64,
}

impl XiWeight {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match &self.x0 {
            None => 0.0,
            Some(x0) => {
                let q: f64 = x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum();
                -q / (2.0 * (self.big_t - t + self.eps))
            }
        }
    }
}

/// ∫|u(t)|² e^{ξ(·,t)} on the model grid.
pub fn weighted_energy(model: &HeatModel, u0: &SpectralState, xi: &XiWeight, t: f64) -> Result<f64> {
    let s = evolve(u0, t)?;
    let u = model.samples(&s);
    let g = &model.grid;
    Ok((0..g.len())
        .map(|i| {
            let p = g.point(i);
            u[i] * u[i] * xi.eval(&p, t).exp() * g.weights[i]
        })
        .sum())
}

/// Checks that t ↦ ∫|u|² e^ξ is nonincreasing on interior sample times of (u0.t, T).
///
/// Slopes come from Richardson-extrapolated central differences with step 1e−4·T;
/// a slope passes when it is ≤ tol · E(t)/T.
pub fn weighted_energy_monotone(
    model: &HeatModel,
    u0: &SpectralState,
    xi: &XiWeight,
    samples: usize,
    tol: f64,
) -> Result<InequalityReport> {
    if !(xi.eps > 0.0) {
        return Err(invalid("weighted energy needs ϵ > 0"));
    }
    if samples == 0 || !(xi.big_t > u0.t) {
        return Err(invalid("need samples >= 1 and T > t0"));
    }
    let span = xi.big_t - u0.t;
    let h = 1e-4 * span;
    let mut worst = WorstCase::new(tol);
    for k in 0..samples {
        let t = u0.t + span * (k as f64 + 0.5) / samples as f64;
        let et = weighted_energy(model, u0, xi, t)?;
        // step never reaches below u0.t, so evaluation cannot fail inside the stencil
        let e = |s: f64| weighted_energy(model, u0, xi, s).unwrap_or(f64::NAN);
        let slope = richardson_derivative(e, t, h.min(t - u0.t));
        let scale = et.abs() / span;
        worst.push(slope, 0.0, if scale > 0.0 { -slope / scale } else { -slope });
    }
    Ok(worst.finish().with("T", xi.big_t).with("eps", xi.eps))
}
