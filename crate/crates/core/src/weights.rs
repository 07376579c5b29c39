//! Weight families Φ(x,t) and their closed-form derivative bundles.
//!
//! Separable families use Φ = φ(x)/Υ with Υ = T − t + ħ, so every time
//! derivative follows from φ: ∂tΦ = φ/Υ², ∂t²Φ = 2φ/Υ³, ∇∂tΦ = ∇φ/Υ².

use crate::error::{invalid, LabError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFamily {
    /// Φ = −|x−x0|²/(4Υ) − (n/2) ln Υ (the log term is optional).
    HeatKernel,
    /// φ = −|x−x0|²/4.
    Quadratic,
    /// φ = −a|x−x0|² + b|x−x0|^s − c.
    RadialPoly,
    /// Φ ≡ 0.
    Flat,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: WeightFamily,
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub big_t: f64,
    pub hbar: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    /// Dimension entering the heat-kernel log term; defaults to x0's length.
    #[serde(default)]
    pub n: usize,
    #[serde(default = "default_true")]
    pub include_log: bool,
}

fn default_s() -> f64 {
    1.0
}

impl WeightSpec {
    pub fn heat_kernel(x0: Vec<f64>, big_t: f64, hbar: f64) -> Self {
        let n = x0.len();
        Self { family: WeightFamily::HeatKernel, x0, big_t, hbar, a: 0.0, b: 0.0, c: 0.0, s: 1.0, n, include_log: true }
    }

    pub fn quadratic(x0: Vec<f64>, big_t: f64, hbar: f64) -> Self {
        Self { family: WeightFamily::Quadratic, ..Self::heat_kernel(x0, big_t, hbar) }
    }

    pub fn radial_poly(x0: Vec<f64>, big_t: f64, hbar: f64, a: f64, b: f64, c: f64, s: f64) -> Self {
        Self { family: WeightFamily::RadialPoly, a, b, c, s, ..Self::heat_kernel(x0, big_t, hbar) }
    }

    pub fn flat(dim: usize, big_t: f64, hbar: f64) -> Self {
        Self { family: WeightFamily::Flat, ..Self::heat_kernel(vec![0.0; dim], big_t, hbar) }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut w: WeightSpec = serde_json::from_str(text)?;
        if w.n == 0 {
            w.n = w.x0.len();
        }
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(invalid("hbar must be positive"));
        }
        if !self.big_t.is_finite() || self.big_t < 0.0 {
            return Err(invalid("T must be finite and nonnegative"));
        }
        match self.family {
            WeightFamily::RadialPoly => {
                if !(self.a > 0.0 && self.b > 0.0 && self.c > 0.0) {
                    return Err(invalid("radial_poly needs a, b, c > 0"));
                }
                if !(1.0..2.0).contains(&self.s) {
                    return Err(invalid("radial_poly needs 1 <= s < 2"));
                }
            }
            WeightFamily::HeatKernel if self.n == 0 => return Err(invalid("heat_kernel needs n >= 1")),
            _ => {}
        }
        Ok(())
    }

    pub fn upsilon(&self, t: f64) -> f64 {
        self.big_t - t + self.hbar
    }

    /// Spatial profile φ (separable families only).
    pub fn phi(&self, x: &[f64]) -> Option<f64> {
        let q = dist2(x, &self.x0);
        match self.family {
            WeightFamily::Quadratic => Some(-q / 4.0),
            WeightFamily::RadialPoly => Some(-self.a * q + self.b * q.sqrt().powf(self.s) - self.c),
            WeightFamily::Flat => Some(0.0),
            WeightFamily::HeatKernel => None,
        }
    }

    pub fn is_separable(&self) -> bool {
        self.family != WeightFamily::HeatKernel
    }
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum()
}

/// Pointwise derivative bundle. `hess` is row-major dim×dim.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStack {
    pub upsilon: f64,
    pub phi: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub lap: f64,
    pub bilap: f64,
    pub dt: f64,
    pub dtt: f64,
    pub grad_dt: Vec<f64>,
    pub eta: f64,
    /// μ/|x|² contribution already folded into η.
    pub potential: f64,
    /// μ x/|x|⁴, the vector whose ∇Φ-projection enters the Schrödinger commutator.
    pub potential_field: Vec<f64>,
}

impl WeightStack {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// ∇²Φ v.
    pub fn hess_apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.hess[i * d + j] * v[j]).sum()).collect()
    }

    pub fn grad_norm2(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum()
    }

    /// ∂tη = ½∂t²Φ + ½∇Φ·∇∂tΦ (the potential is time independent).
    pub fn dt_eta(&self) -> f64 {
        0.5 * self.dtt + 0.5 * dot(&self.grad, &self.grad_dt)
    }

    /// ∇η = ½∇∂tΦ + ½∇²Φ∇Φ − 2μx/|x|⁴.
    pub fn grad_eta(&self) -> Vec<f64> {
        let hg = self.hess_apply(&self.grad);
        (0..self.dim()).map(|i| 0.5 * self.grad_dt[i] + 0.5 * hg[i] - 2.0 * self.potential_field[i]).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Closed-form derivative bundle of `spec` at (x, t); μ enters only η (as μ/|x|²).
pub fn eval_weight_stack(spec: &WeightSpec, x: &[f64], t: f64, mu: f64) -> Result<WeightStack> {
    if t > spec.big_t {
        return Err(invalid(format!("weight evaluated past T: t = {t}")));
    }
    stack_unchecked(spec, x, t, mu)
}

/// Same as [`eval_weight_stack`] but only requires Υ > 0, so time stencils may straddle T.
pub(crate) fn stack_unchecked(spec: &WeightSpec, x: &[f64], t: f64, mu: f64) -> Result<WeightStack> {
    if x.len() != spec.x0.len() {
        return Err(invalid("point dimension does not match the weight anchor"));
    }
    let ups = spec.upsilon(t);
    if !(ups > 0.0) {
        return Err(invalid("Υ = T − t + ħ must be positive"));
    }
    let dim = x.len();
    let d: Vec<f64> = x.iter().zip(&spec.x0).map(|(a, b)| a - b).collect();
    let q = dot(&d, &d);
    let mut hess = vec![0.0; dim * dim];

    let (phi_t, grad, lap, bilap, dt, dtt, grad_dt) = match spec.family {
        WeightFamily::HeatKernel => {
            let n = spec.n as f64;
            let log = if spec.include_log { 1.0 } else { 0.0 };
            for i in 0..dim {
                hess[i * dim + i] = -1.0 / (2.0 * ups);
            }
            (
                -q / (4.0 * ups) - log * 0.5 * n * ups.ln(),
                d.iter().map(|v| -v / (2.0 * ups)).collect::<Vec<_>>(),
                -(dim as f64) / (2.0 * ups),
                0.0,
                -q / (4.0 * ups * ups) + log * 0.5 * n / ups,
                -q / (2.0 * ups.powi(3)) + log * 0.5 * n / (ups * ups),
                d.iter().map(|v| -v / (2.0 * ups * ups)).collect::<Vec<_>>(),
            )
        }
        _ => {
            let (phi, gphi, hphi, lphi, blphi) = separable_spatial(spec, &d, q)?;
            for (h, v) in hess.iter_mut().zip(&hphi) {
                *h = v / ups;
            }
            (
                phi / ups,
                gphi.iter().map(|g| g / ups).collect(),
                lphi / ups,
                blphi / ups,
                phi / (ups * ups),
                2.0 * phi / ups.powi(3),
                gphi.iter().map(|g| g / (ups * ups)).collect(),
            )
        }
    };

    let (potential, potential_field) = if mu != 0.0 {
        let r2 = dot(x, x);
        if r2 == 0.0 {
            return Err(LabError::SingularPoint("inverse-square potential at the origin".into()));
        }
        (mu / r2, x.iter().map(|v| mu * v / (r2 * r2)).collect())
    } else {
        (0.0, vec![0.0; dim])
    };
    let g2 = dot(&grad, &grad);
    let eta = 0.5 * dt + 0.25 * g2 + potential;
    Ok(WeightStack {
        upsilon: ups,
        phi: phi_t,
        grad,
        hess,
        lap,
        bilap,
        dt,
        dtt,
        grad_dt,
        eta,
        potential,
        potential_field,
    })
}

type Spatial = (f64, Vec<f64>, Vec<f64>, f64, f64);

/// φ, ∇φ, ∇²φ (row-major), Δφ, Δ²φ for the separable families.
fn separable_spatial(spec: &WeightSpec, d: &[f64], q: f64) -> Result<Spatial> {
    let dim = d.len();
    let mut hess = vec![0.0; dim * dim];
    match spec.family {
        WeightFamily::Flat => Ok((0.0, vec![0.0; dim], hess, 0.0, 0.0)),
        WeightFamily::Quadratic => {
            for i in 0..dim {
                hess[i * dim + i] = -0.5;
            }
            Ok((-q / 4.0, d.iter().map(|v| -v / 2.0).collect(), hess, -(dim as f64) / 2.0, 0.0))
        }
        WeightFamily::RadialPoly => {
            let rho = q.sqrt();
            if rho == 0.0 {
                return Err(LabError::SingularPoint("radial_poly derivatives at the anchor".into()));
            }
            let (a, b, c, s) = (spec.a, spec.b, spec.c, spec.s);
            let k = dim as f64;
            let w = -a * q + b * rho.powf(s) - c;
            let w1_over = -2.0 * a + b * s * rho.powf(s - 2.0);
            let w2 = -2.0 * a + b * s * (s - 1.0) * rho.powf(s - 2.0);
            for i in 0..dim {
                for j in 0..dim {
                    let radial = (w2 - w1_over) * d[i] * d[j] / q;
                    hess[i * dim + j] = radial + if i == j { w1_over } else { 0.0 };
                }
            }
            let lap = w2 + (k - 1.0) * w1_over;
            let bilap = b * s * (s + k - 2.0) * (s - 2.0) * (s + k - 4.0) * rho.powf(s - 4.0);
            Ok((w, d.iter().map(|v| w1_over * v).collect(), hess, lap, bilap))
        }
        WeightFamily::HeatKernel => unreachable!("heat kernel is not separable"),
    }
}

/// W(ρ) = −aρ² + bρ^s − c sampled on ρ > 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WProfile {
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    /// Positive root of W′, (bs/(2a))^{1/(2−s)}.
    pub critical_radius: Option<f64>,
    /// W′ < 0 at every sample with ρ ≥ 1 (vacuous when there is none).
    pub decreasing_from_one: bool,
    pub nonpositive: bool,
}

pub fn weight_profile_w(a: f64, b: f64, c: f64, s: f64, rho: &[f64]) -> Result<WProfile> {
    if rho.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("profile samples must be positive"));
    }
    let w: Vec<f64> = rho.iter().map(|r| -a * r * r + b * r.powf(s) - c).collect();
    let dw: Vec<f64> = rho.iter().map(|r| -2.0 * a * r + b * s * r.powf(s - 1.0)).collect();
    let critical_radius =
        if a > 0.0 && b * s > 0.0 && s < 2.0 { Some((b * s / (2.0 * a)).powf(1.0 / (2.0 - s))) } else { None };
    let decreasing_from_one = rho.iter().zip(&dw).filter(|(r, _)| **r >= 1.0).all(|(_, d)| *d < 0.0);
    let nonpositive = w.iter().all(|v| *v <= 0.0);
    Ok(WProfile { rho: rho.to_vec(), w, dw, critical_radius, decreasing_from_one, nonpositive })
}

/// max of φ = −¼|x−x0|² on the shell (1+3δ/2)R ≤ ρ ≤ R0 minus its min on the ball ρ ≤ (1+δ)R.
pub fn quadratic_gap(delta: f64, radius: f64) -> f64 {
    -0.25 * (1.0 + 1.5 * delta).powi(2) * radius * radius + 0.25 * (1.0 + delta).powi(2) * radius * radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng;
    use rand::Rng;

    fn families(dim: usize) -> Vec<WeightSpec> {
        let x0: Vec<f64> = (0..dim).map(|i| 0.3 + 0.1 * i as f64).collect();
        let mut hk_nolog = WeightSpec::heat_kernel(x0.clone(), 1.0, 0.2);
        hk_nolog.include_log = false;
        vec![
            WeightSpec::heat_kernel(x0.clone(), 1.0, 0.2),
            hk_nolog,
            WeightSpec::quadratic(x0.clone(), 1.0, 0.2),
            WeightSpec::radial_poly(x0, 1.0, 0.2, 0.25, 0.25, 1.0 / 81.0, 4.0 / 3.0),
        ]
    }

    fn phi_at(spec: &WeightSpec, x: &[f64], t: f64) -> f64 {
        eval_weight_stack(spec, x, t, 0.0).unwrap().phi
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn derivative_bundle_matches_finite_differences() {
        let mut r = rng(11);
        for dim in [1usize, 2, 3] {
            for spec in families(dim) {
                for _ in 0..20 {
                    let x: Vec<f64> = spec
                        .x0
                        .iter()
                        .map(|c| c + r.gen_range(0.2..0.8) * if r.gen_bool(0.5) { 1.0 } else { -1.0 })
                        .collect();
                    let t = r.gen_range(0.0..0.9);
                    let st = eval_weight_stack(&spec, &x, t, 0.0).unwrap();
                    let h = 1e-4;
                    let shift = |k: usize, dx: f64| {
                        let mut y = x.clone();
                        y[k] += dx;
                        y
                    };
                    for k in 0..dim {
                        let fd = (phi_at(&spec, &shift(k, h), t) - phi_at(&spec, &shift(k, -h), t)) / (2.0 * h);
                        assert!(rel(st.grad[k], fd) < 1e-6, "{:?} grad", spec.family);
                        let gdt = |y: &[f64]| eval_weight_stack(&spec, y, t, 0.0).unwrap().dt;
                        let fd = (gdt(&shift(k, h)) - gdt(&shift(k, -h))) / (2.0 * h);
                        assert!(rel(st.grad_dt[k], fd) < 1e-6, "{:?} grad dt", spec.family);
                        for l in 0..dim {
                            let gl = |y: &[f64]| eval_weight_stack(&spec, y, t, 0.0).unwrap().grad[l];
                            let fd = (gl(&shift(k, h)) - gl(&shift(k, -h))) / (2.0 * h);
                            assert!(rel(st.hess[k * dim + l], fd) < 1e-6, "{:?} hess", spec.family);
                        }
                    }
                    let lap_fd: f64 = (0..dim)
                        .map(|k| {
                            let g = |y: &[f64]| eval_weight_stack(&spec, y, t, 0.0).unwrap().grad[k];
                            (g(&shift(k, h)) - g(&shift(k, -h))) / (2.0 * h)
                        })
                        .sum();
                    assert!(rel(st.lap, lap_fd) < 1e-6);
                    let bilap_fd: f64 = (0..dim)
                        .map(|k| {
                            let l = |y: &[f64]| eval_weight_stack(&spec, y, t, 0.0).unwrap().lap;
                            (l(&shift(k, h)) - 2.0 * st.lap + l(&shift(k, -h))) / (h * h)
                        })
                        .sum();
                    assert!((st.bilap - bilap_fd).abs() < 1e-5 * st.bilap.abs().max(1.0), "{:?} bilap", spec.family);
                    let fd = (phi_at(&spec, &x, t + h) - phi_at(&spec, &x, t - h)) / (2.0 * h);
                    assert!(rel(st.dt, fd) < 1e-6);
                    let dtf = |s: f64| eval_weight_stack(&spec, &x, s, 0.0).unwrap().dt;
                    let fd = (dtf(t + h) - dtf(t - h)) / (2.0 * h);
                    assert!(rel(st.dtt, fd) < 1e-6);
                }
            }
        }
    }

    #[test]
    fn separable_time_identities() {
        let mut r = rng(3);
        for spec in families(2).into_iter().skip(2) {
            for _ in 0..20 {
                let x = vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
                let st = eval_weight_stack(&spec, &x, r.gen_range(0.0..1.0), 0.0).unwrap();
                assert!((st.dt * st.upsilon - st.phi).abs() <= 1e-14 * st.phi.abs().max(1e-300));
                for (gd, g) in st.grad_dt.iter().zip(&st.grad) {
                    assert!((gd * st.upsilon - g).abs() <= 1e-14 * g.abs().max(1e-300));
                }
                assert!((st.eta - (0.5 * st.dt + 0.25 * st.grad_norm2())).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn schrodinger_eta_carries_potential() {
        let spec = WeightSpec::quadratic(vec![0.0; 3], 1.0, 0.5);
        let x = [0.3, 0.4, 0.0];
        let a = eval_weight_stack(&spec, &x, 0.2, 0.0).unwrap();
        let b = eval_weight_stack(&spec, &x, 0.2, 0.1).unwrap();
        assert!((b.eta - a.eta - 0.1 / 0.25).abs() < 1e-14);
        assert!(matches!(eval_weight_stack(&spec, &[0.0; 3], 0.2, 0.1), Err(LabError::SingularPoint(_))));
    }

    #[test]
    fn quadratic_at_anchor() {
        let spec = WeightSpec::quadratic(vec![0.2, 0.7], 1.0, 0.5);
        let st = eval_weight_stack(&spec, &[0.2, 0.7], 0.4, 0.0).unwrap();
        assert!(st.grad.iter().all(|g| *g == 0.0));
        assert!((st.lap + 2.0 / (2.0 * st.upsilon)).abs() < 1e-15);
    }

    #[test]
    fn radial_poly_reference_value_and_singularity() {
        let spec = WeightSpec::radial_poly(vec![0.0; 3], 1.0, 1.0, 0.25, 0.25, 1.0 / 81.0, 4.0 / 3.0);
        assert!((spec.phi(&[1.0, 0.0, 0.0]).unwrap() + 1.0 / 81.0).abs() < 1e-15);
        assert!(matches!(eval_weight_stack(&spec, &[0.0; 3], 0.0, 0.0), Err(LabError::SingularPoint(_))));
    }

    #[test]
    fn profile_examples() {
        let p = weight_profile_w(0.25, 0.25, 1.0 / 81.0, 4.0 / 3.0, &[1e-12, 1.0, 1.5, 3.0]).unwrap();
        assert!((p.w[0] + 1.0 / 81.0).abs() < 1e-9);
        assert!((p.w[1] + 1.0 / 81.0).abs() < 1e-15);
        let rc = p.critical_radius.unwrap();
        assert!((rc - (2.0f64 / 3.0).powf(1.5)).abs() < 1e-15);
        let at = weight_profile_w(0.25, 0.25, 1.0 / 81.0, 4.0 / 3.0, &[rc]).unwrap();
        assert!(at.dw[0].abs() < 1e-15);
        assert!(p.decreasing_from_one);
        let rho: Vec<f64> = (1..4000).map(|k| k as f64 * 1e-3).collect();
        let q = weight_profile_w(0.25, 0.25, 1.0 / 16.0, 1.0, &rho).unwrap();
        assert!(q.nonpositive && q.decreasing_from_one);
        // vertex at ρ = ½ where W = 0
        assert!(q.w.iter().cloned().fold(f64::NEG_INFINITY, f64::max).abs() < 1e-12);
    }

    #[test]
    fn quadratic_gap_closed_form_and_sign() {
        for k in 1..=100 {
            let delta = k as f64 / 100.0;
            for radius in [0.3, 1.0, 2.5] {
                let r0 = (1.0 + 2.0 * delta) * radius;
                let phi = |rho: f64| -0.25 * rho * rho;
                let shell_max = (0..=200)
                    .map(|i| phi((1.0 + 1.5 * delta) * radius + (r0 - (1.0 + 1.5 * delta) * radius) * i as f64 / 200.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                let ball_min =
                    (0..=200).map(|i| phi((1.0 + delta) * radius * i as f64 / 200.0)).fold(f64::INFINITY, f64::min);
                let gap = quadratic_gap(delta, radius);
                assert!((shell_max - ball_min - gap).abs() < 1e-12);
                assert!(gap < 0.0);
            }
        }
    }

    #[test]
    fn spec_json_roundtrip_and_validation() {
        let text =
            r#"{"family":"radial_poly","x0":[0,0,0],"T":1.0,"hbar":0.1,"a":0.25,"b":0.25,"c":0.0123,"s":1.3333}"#;
        let w = WeightSpec::from_json(text).unwrap();
        assert_eq!(w.n, 3);
        assert!(WeightSpec::from_json(r#"{"family":"quadratic","x0":[0],"T":1,"hbar":0}"#).is_err());
        assert!(WeightSpec::from_json(r#"{"family":"radial_poly","x0":[0],"T":1,"hbar":1,"a":1,"b":1,"c":1,"s":2}"#)
            .is_err());
    }
}
