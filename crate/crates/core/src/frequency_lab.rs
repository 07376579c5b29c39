//! Conjugated fields f = χu·e^{Φ/2}, the operators S and A, the frequency
//! function and the commutator quadratic forms on interval, rectangle and
//! radial-ball grids.
//!
//! Derivatives are fourth-order finite differences (one-sided near Dirichlet
//! edges, even reflection at ρ = 0 for radial grids). Quadrature is Simpson on
//! vertex grids with an even number of cells, trapezoid otherwise, and the
//! midpoint rule with weight |S^{n−1}|ρ^{n−1} on radial grids.

use crate::domain_spectral::{unit_sphere_area, Field, Grid, GridKind};
use crate::error::{invalid, LabError, Result};
use crate::heat_engine::{evolve, HeatModel, SpectralState};
use crate::report::{InequalityReport, WorstCase};
use crate::weights::{dot, stack_unchecked, WeightSpec, WeightStack};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

pub const DEFAULT_TOL: f64 = 1e-6;

/// Radial C² bump: 1 up to `inner`, 0 from `outer`, quintic smoothstep between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner) {
            return Err(invalid("cutoff needs 0 < inner < outer"));
        }
        Ok(Self { inner, outer })
    }

    /// χ = 1 on |x−x0| ≤ (1+3δ/2)R, supported in |x−x0| ≤ R0.
    pub fn localization(delta: f64, radius: f64, r0: f64) -> Result<Self> {
        Self::new((1.0 + 1.5 * delta) * radius, r0)
    }

    /// (χ, χ′, χ″) as functions of the radius.
    pub fn profile(&self, rho: f64) -> (f64, f64, f64) {
        if rho <= self.inner {
            return (1.0, 0.0, 0.0);
        }
        if rho >= self.outer {
            return (0.0, 0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let s = (rho - self.inner) / w;
        let p = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let dp = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        let ddp = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        (1.0 - p, -dp / w, -ddp / (w * w))
    }
}

#[derive(Debug, Clone)]
enum Geometry {
    Line { h: f64 },
    Plane { hx: f64, hy: f64, nx1: usize, ny1: usize },
    Radial { n: usize, h: f64 },
}

/// Stencils, quadrature and sample coordinates of one grid.
#[derive(Debug, Clone)]
struct Disc {
    geom: Geometry,
    quad: Vec<f64>,
    points: Vec<Vec<f64>>,
    grid: Arc<Grid>,
}

const MIN_POINTS: usize = 6;

fn simpson_weights(cells: usize, h: f64) -> Vec<f64> {
    if cells % 2 == 1 {
        let mut w = vec![h; cells + 1];
        w[0] = 0.5 * h;
        w[cells] = 0.5 * h;
        return w;
    }
    (0..=cells)
        .map(|i| {
            let c = if i == 0 || i == cells {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

impl Disc {
    fn new(grid: Arc<Grid>) -> Result<Self> {
        let coarse = || invalid(format!("grid too coarse for the stencils (need {MIN_POINTS} points per axis)"));
        let (geom, quad) = match grid.kind {
            GridKind::Interval => {
                let cells = grid.cells();
                if cells + 1 < MIN_POINTS {
                    return Err(coarse());
                }
                let h = grid.spacing[0];
                (Geometry::Line { h }, simpson_weights(cells, h))
            }
            GridKind::Rectangle => {
                let (nx, ny) = (grid.axes[0].len() - 1, grid.axes[1].len() - 1);
                if nx + 1 < MIN_POINTS || ny + 1 < MIN_POINTS {
                    return Err(coarse());
                }
                let (hx, hy) = (grid.spacing[0], grid.spacing[1]);
                let (wx, wy) = (simpson_weights(nx, hx), simpson_weights(ny, hy));
                let quad = wx.iter().flat_map(|a| wy.iter().map(move |b| a * b)).collect();
                (Geometry::Plane { hx, hy, nx1: nx + 1, ny1: ny + 1 }, quad)
            }
            GridKind::Radial => {
                if grid.len() < MIN_POINTS {
                    return Err(coarse());
                }
                let (n, h) = (grid.dim, grid.spacing[0]);
                let area = unit_sphere_area(n);
                let quad = grid.axes[0].iter().map(|r| area * r.powi(n as i32 - 1) * h).collect();
                (Geometry::Radial { n, h }, quad)
            }
        };
        Ok(Self { geom, quad, points: grid.points(), grid })
    }

    fn len(&self) -> usize {
        self.quad.len()
    }

    fn components(&self) -> usize {
        match self.geom {
            Geometry::Plane { .. } => 2,
            _ => 1,
        }
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.quad).map(|((x, y), w)| x * y * w).sum()
    }

    fn integrate(&self, a: &[f64]) -> f64 {
        a.iter().zip(&self.quad).map(|(x, w)| x * w).sum()
    }

    /// Gradient components; radial grids return the single radial derivative.
    fn grad(&self, v: &[f64]) -> Vec<Vec<f64>> {
        match self.geom {
            Geometry::Line { h } => vec![d1(v, h, false)],
            Geometry::Radial { h, .. } => vec![d1(v, h, true)],
            Geometry::Plane { hx, hy, nx1, ny1 } => {
                let mut gx = vec![0.0; v.len()];
                let mut gy = vec![0.0; v.len()];
                for j in 0..ny1 {
                    let col: Vec<f64> = (0..nx1).map(|i| v[i * ny1 + j]).collect();
                    for (i, d) in d1(&col, hx, false).into_iter().enumerate() {
                        gx[i * ny1 + j] = d;
                    }
                }
                for i in 0..nx1 {
                    let row = &v[i * ny1..(i + 1) * ny1];
                    gy[i * ny1..(i + 1) * ny1].copy_from_slice(&d1(row, hy, false));
                }
                vec![gx, gy]
            }
        }
    }

    fn lap(&self, v: &[f64]) -> Vec<f64> {
        match self.geom {
            Geometry::Line { h } => d2(v, h, false),
            Geometry::Radial { n, h } => {
                let (dd, d) = (d2(v, h, true), d1(v, h, true));
                let rho = &self.grid.axes[0];
                (0..v.len()).map(|i| dd[i] + (n as f64 - 1.0) * d[i] / rho[i]).collect()
            }
            Geometry::Plane { hx, hy, nx1, ny1 } => {
                let mut out = vec![0.0; v.len()];
                for j in 0..ny1 {
                    let col: Vec<f64> = (0..nx1).map(|i| v[i * ny1 + j]).collect();
                    for (i, d) in d2(&col, hx, false).into_iter().enumerate() {
                        out[i * ny1 + j] += d;
                    }
                }
                for i in 0..nx1 {
                    for (j, d) in d2(&v[i * ny1..(i + 1) * ny1], hy, false).into_iter().enumerate() {
                        out[i * ny1 + j] += d;
                    }
                }
                out
            }
        }
    }

    /// ∫_∂ ∂_ν a · b dσ from the gradient of `a` and boundary samples of `b`.
    ///
    /// Radial grids use the outermost cell centre as the sphere sample.
    fn boundary(&self, grad_a: &[Vec<f64>], b: &[f64]) -> f64 {
        match self.geom {
            Geometry::Line { .. } => {
                let last = b.len() - 1;
                -grad_a[0][0] * b[0] + grad_a[0][last] * b[last]
            }
            Geometry::Radial { n, .. } => {
                let last = b.len() - 1;
                let r = self.grid.extents[0];
                unit_sphere_area(n) * r.powi(n as i32 - 1) * grad_a[0][last] * b[last]
            }
            Geometry::Plane { hx, hy, nx1, ny1 } => {
                let edge = |k: usize, m: usize, h: f64| if k == 0 || k == m - 1 { 0.5 * h } else { h };
                let mut s = 0.0;
                for j in 0..ny1 {
                    let (lo, hi) = (j, (nx1 - 1) * ny1 + j);
                    s += edge(j, ny1, hy) * (-grad_a[0][lo] * b[lo] + grad_a[0][hi] * b[hi]);
                }
                for i in 0..nx1 {
                    let (lo, hi) = (i * ny1, i * ny1 + ny1 - 1);
                    s += edge(i, nx1, hx) * (-grad_a[1][lo] * b[lo] + grad_a[1][hi] * b[hi]);
                }
                s
            }
        }
    }

    /// Weight-stack point for sample i (radial samples sit on the first axis).
    fn stacks(&self, weight: &WeightSpec, t: f64, mu: f64) -> Result<Vec<WeightStack>> {
        self.points.iter().map(|p| stack_unchecked(weight, p, t, mu)).collect()
    }

    fn check_weight(&self, weight: &WeightSpec) -> Result<()> {
        weight.validate()?;
        let dim = self.points[0].len();
        if weight.x0.len() != dim {
            return Err(LabError::InvalidGeometry(format!(
                "weight anchor has dimension {} but the grid has {dim}",
                weight.x0.len()
            )));
        }
        if matches!(self.geom, Geometry::Radial { .. }) && weight.x0.iter().any(|c| *c != 0.0) {
            return Err(LabError::InvalidGeometry("radial grids need the weight anchored at the origin".into()));
        }
        Ok(())
    }

    fn check_cutoff(&self, cutoff: &Cutoff, anchor: &[f64]) -> Result<()> {
        let room = match self.grid.kind {
            GridKind::Radial => self.grid.extents[0],
            _ => anchor.iter().zip(&self.grid.extents).map(|(c, l)| c.min(l - c)).fold(f64::INFINITY, f64::min),
        };
        if cutoff.outer > room {
            return Err(LabError::InvalidGeometry(format!(
                "cutoff support radius {} exceeds the room {room} around the anchor",
                cutoff.outer
            )));
        }
        Ok(())
    }

    fn radius_from(&self, i: usize, anchor: &[f64]) -> (f64, Vec<f64>) {
        let d: Vec<f64> = self.points[i].iter().zip(anchor).map(|(a, b)| a - b).collect();
        (dot(&d, &d).sqrt(), d)
    }
}

/// Fourth-order first derivative. `even_left` reflects about a half-cell origin.
fn d1(v: &[f64], h: f64, even_left: bool) -> Vec<f64> {
    let n = v.len();
    let c = 1.0 / (12.0 * h);
    let g = |k: isize| if k < 0 { v[(-k - 1) as usize] } else { v[k as usize] };
    (0..n)
        .map(|i| {
            if (i >= 2 || even_left) && i + 2 < n {
                let k = i as isize;
                c * (-g(k + 2) + 8.0 * g(k + 1) - 8.0 * g(k - 1) + g(k - 2))
            } else if i == 0 {
                c * (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4])
            } else if i == 1 {
                c * (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4])
            } else if i == n - 1 {
                -c * (-25.0 * v[n - 1] + 48.0 * v[n - 2] - 36.0 * v[n - 3] + 16.0 * v[n - 4] - 3.0 * v[n - 5])
            } else {
                -c * (-3.0 * v[n - 1] - 10.0 * v[n - 2] + 18.0 * v[n - 3] - 6.0 * v[n - 4] + v[n - 5])
            }
        })
        .collect()
}

/// Fourth-order second derivative with the same boundary treatment as [`d1`].
fn d2(v: &[f64], h: f64, even_left: bool) -> Vec<f64> {
    let n = v.len();
    let c = 1.0 / (12.0 * h * h);
    let g = |k: isize| if k < 0 { v[(-k - 1) as usize] } else { v[k as usize] };
    let edge0 = |w: &dyn Fn(usize) -> f64| {
        c * (45.0 * w(0) - 154.0 * w(1) + 214.0 * w(2) - 156.0 * w(3) + 61.0 * w(4) - 10.0 * w(5))
    };
    let edge1 =
        |w: &dyn Fn(usize) -> f64| c * (10.0 * w(0) - 15.0 * w(1) - 4.0 * w(2) + 14.0 * w(3) - 6.0 * w(4) + w(5));
    (0..n)
        .map(|i| {
            if (i >= 2 || even_left) && i + 2 < n {
                let k = i as isize;
                c * (-g(k + 2) + 16.0 * g(k + 1) - 30.0 * g(k) + 16.0 * g(k - 1) - g(k - 2))
            } else if i == 0 {
                edge0(&|k| v[k])
            } else if i == 1 {
                edge1(&|k| v[k])
            } else if i == n - 1 {
                edge0(&|k| v[n - 1 - k])
            } else {
                edge1(&|k| v[n - 1 - k])
            }
        })
        .collect()
}

fn check_field(f: &Field) -> Result<Disc> {
    if f.values.len() != f.grid.len() {
        return Err(invalid("field does not match its grid"));
    }
    Disc::new(f.grid.clone())
}

/// f = (χu)·e^{Φ/2}; χ is centred at the weight anchor.
pub fn assemble_f(u: &Field, weight: &WeightSpec, t: f64, cutoff: Option<&Cutoff>) -> Result<Field> {
    let disc = check_field(u)?;
    disc.check_weight(weight)?;
    if t > weight.big_t {
        return Err(invalid(format!("f assembled past T: t = {t}")));
    }
    if let Some(c) = cutoff {
        disc.check_cutoff(c, &weight.x0)?;
    }
    let st = disc.stacks(weight, t, 0.0)?;
    let values = (0..disc.len())
        .map(|i| {
            let chi = cutoff.map_or(1.0, |c| c.profile(disc.radius_from(i, &weight.x0).0).0);
            chi * u.values[i] * (0.5 * st[i].phi).exp()
        })
        .collect();
    Field::new(values, u.grid.clone())
}

/// g = −2∇χ·∇u − Δχ·u, the source term of z = χu.
pub fn cutoff_source(u: &Field, cutoff: &Cutoff, anchor: &[f64]) -> Result<Field> {
    let disc = check_field(u)?;
    disc.check_cutoff(cutoff, anchor)?;
    Ok(Field { values: source_values(&disc, &u.values, cutoff, anchor), grid: u.grid.clone() })
}

fn source_values(disc: &Disc, u: &[f64], cutoff: &Cutoff, anchor: &[f64]) -> Vec<f64> {
    let gu = disc.grad(u);
    let dim = disc.points[0].len() as f64;
    (0..disc.len())
        .map(|i| {
            let (rho, d) = disc.radius_from(i, anchor);
            let (_, c1, c2) = cutoff.profile(rho);
            if c1 == 0.0 && c2 == 0.0 {
                return 0.0;
            }
            let lap_chi = c2 + (dim - 1.0) * c1 / rho;
            let grad_dot = if matches!(disc.geom, Geometry::Radial { .. }) {
                c1 * gu[0][i]
            } else {
                (0..disc.components()).map(|k| c1 * d[k] / rho * gu[k][i]).sum()
            };
            -2.0 * grad_dot - lap_chi * u[i]
        })
        .collect()
}

struct Applied {
    grad_f: Vec<Vec<f64>>,
    sf: Vec<f64>,
    af: Vec<f64>,
}

fn grad_phi_dot(st: &WeightStack, g: &[Vec<f64>], i: usize) -> f64 {
    (0..g.len()).map(|k| st.grad[k] * g[k][i]).sum()
}

fn apply_raw(disc: &Disc, f: &[f64], st: &[WeightStack]) -> Applied {
    let grad_f = disc.grad(f);
    let lap = disc.lap(f);
    let sf = (0..f.len()).map(|i| lap[i] + st[i].eta * f[i]).collect();
    let af = (0..f.len()).map(|i| -grad_phi_dot(&st[i], &grad_f, i) - 0.5 * st[i].lap * f[i]).collect();
    Applied { grad_f, sf, af }
}

/// (Sf, Af) with Sf = Δf + ηf and Af = −∇Φ·∇f − ½ΔΦ·f.
pub fn apply_operators(f: &Field, weight: &WeightSpec, t: f64, mu: f64) -> Result<(Field, Field)> {
    let disc = check_field(f)?;
    disc.check_weight(weight)?;
    let st = disc.stacks(weight, t, mu)?;
    let a = apply_raw(&disc, &f.values, &st);
    Ok((Field { values: a.sf, grid: f.grid.clone() }, Field { values: a.af, grid: f.grid.clone() }))
}

/// ⟨f, g⟩₀ with the frequency-lab quadrature.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64> {
    let disc = check_field(f)?;
    if f.grid != g.grid {
        return Err(invalid("fields live on different grids"));
    }
    Ok(disc.inner(&f.values, &g.values))
}

/// Integral norms of a field with the frequency-lab stencils and quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldNorms {
    pub l1: f64,
    pub l2_sq: f64,
    pub grad_sq: f64,
    /// ∫|x − anchor|⁻² f²; infinite if f is nonzero at the anchor.
    pub inverse_square: f64,
}

pub fn field_norms(f: &Field, anchor: &[f64]) -> Result<FieldNorms> {
    let disc = check_field(f)?;
    if anchor.len() != f.grid.dim {
        return Err(invalid("anchor dimension does not match the grid"));
    }
    let v = &f.values;
    let g = disc.grad(v);
    let grad2: Vec<f64> = (0..v.len()).map(|i| g.iter().map(|c| c[i] * c[i]).sum()).collect();
    let inv: Vec<f64> = (0..v.len())
        .map(|i| {
            let (r, _) = disc.radius_from(i, anchor);
            match (r > 0.0, v[i] == 0.0) {
                (true, _) => v[i] * v[i] / (r * r),
                (false, true) => 0.0,
                (false, false) => f64::INFINITY,
            }
        })
        .collect();
    Ok(FieldNorms {
        l1: disc.integrate(&v.iter().map(|x| x.abs()).collect::<Vec<_>>()),
        l2_sq: disc.inner(v, v),
        grad_sq: disc.integrate(&grad2),
        inverse_square: disc.integrate(&inv),
    })
}

fn dirichlet_form(disc: &Disc, f: &[f64], grad_f: &[Vec<f64>], st: &[WeightStack]) -> f64 {
    let grad2: Vec<f64> = (0..f.len()).map(|i| grad_f.iter().map(|g| g[i] * g[i]).sum()).collect();
    let eta_f2: Vec<f64> = (0..f.len()).map(|i| st[i].eta * f[i] * f[i]).collect();
    disc.integrate(&grad2) - disc.integrate(&eta_f2)
}

/// N = (∫|∇f|² − ∫η f²)/‖f‖²; η carries μ/|x|².
pub fn frequency_n(f: &Field, weight: &WeightSpec, t: f64, mu: f64) -> Result<f64> {
    let disc = check_field(f)?;
    disc.check_weight(weight)?;
    let norm = disc.inner(&f.values, &f.values);
    if !(norm > 0.0) {
        return Err(LabError::Undefined("frequency of a zero field".into()));
    }
    let st = disc.stacks(weight, t, mu)?;
    Ok(dirichlet_form(&disc, &f.values, &disc.grad(&f.values), &st) / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub t: f64,
    pub upsilon: f64,
    /// −∫∂tη f² − 2⟨Sf, Af⟩ + ∫_∂ ∂_ν f·Af dσ by direct application.
    pub lhs: f64,
    /// −∫∂tη f² − ⟨S(Af) − A(Sf), f⟩; equals `lhs` for Dirichlet f.
    pub lhs_nested: f64,
    /// −2∫∇f·∇²Φ∇f + ½∫Δ²Φ f² − ∫(∂tη + ∇Φ·∇η) f².
    pub rhs_formula: f64,
    /// (1/Υ)⟨−Sf, f⟩₀.
    pub comparator: f64,
    pub boundary_term: f64,
    /// ⟨−Sf, f⟩₀.
    pub energy: f64,
    pub f_norm_sq: f64,
    pub formula_residual: f64,
    /// (lhs − comparator)/|⟨−Sf, f⟩|.
    pub comparator_residual: f64,
    pub tolerance: f64,
    pub formula_pass: bool,
    /// lhs ≤ comparator up to tolerance·‖f‖²·max(1, N)/Υ.
    pub sign_pass: bool,
}

impl CommutatorReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}

/// Direct and integrated evaluations of ⟨−(S′+[S,A])f, f⟩₀ against (1/Υ)⟨−Sf, f⟩₀.
pub fn commutator_form(f: &Field, weight: &WeightSpec, t: f64, mu: f64) -> Result<CommutatorReport> {
    commutator_form_tol(f, weight, t, mu, DEFAULT_TOL)
}

pub fn commutator_form_tol(f: &Field, weight: &WeightSpec, t: f64, mu: f64, tol: f64) -> Result<CommutatorReport> {
    let disc = check_field(f)?;
    disc.check_weight(weight)?;
    let fv = &f.values;
    let len = fv.len();
    let st = disc.stacks(weight, t, mu)?;
    let ups = weight.upsilon(t);

    let h = 1e-3 * ups;
    let eta_at = |s: f64| -> Result<Vec<f64>> { Ok(disc.stacks(weight, s, mu)?.into_iter().map(|w| w.eta).collect()) };
    let (p1, m1, p2, m2) = (eta_at(t + h)?, eta_at(t - h)?, eta_at(t + 0.5 * h)?, eta_at(t - 0.5 * h)?);
    let dt_eta: Vec<f64> = (0..len)
        .map(|i| {
            let dh = (p1[i] - m1[i]) / (2.0 * h);
            let dh2 = (p2[i] - m2[i]) / h;
            (4.0 * dh2 - dh) / 3.0
        })
        .collect();
    let dt_eta_f2: Vec<f64> = (0..len).map(|i| dt_eta[i] * fv[i] * fv[i]).collect();
    let s_prime = disc.integrate(&dt_eta_f2);

    let ap = apply_raw(&disc, fv, &st);
    let boundary = disc.boundary(&ap.grad_f, &ap.af);
    let lhs = -s_prime - 2.0 * disc.inner(&ap.sf, &ap.af) + boundary;

    let s_of_af = apply_raw(&disc, &ap.af, &st).sf;
    let a_of_sf = apply_raw(&disc, &ap.sf, &st).af;
    let comm: Vec<f64> = (0..len).map(|i| s_of_af[i] - a_of_sf[i]).collect();
    let lhs_nested = -s_prime - disc.inner(&comm, fv);

    let nc = disc.components();
    let integrand: Vec<f64> = (0..len)
        .map(|i| {
            let w = &st[i];
            let dim = w.dim();
            let mut quad = 0.0;
            for k in 0..nc {
                for l in 0..nc {
                    quad += ap.grad_f[k][i] * w.hess[k * dim + l] * ap.grad_f[l][i];
                }
            }
            let ge = w.grad_eta();
            -2.0 * quad + 0.5 * w.bilap * fv[i] * fv[i] - (w.dt_eta() + dot(&w.grad, &ge)) * fv[i] * fv[i]
        })
        .collect();
    let rhs_formula = disc.integrate(&integrand);

    let energy = dirichlet_form(&disc, fv, &ap.grad_f, &st);
    let comparator = energy / ups;
    let f_norm_sq = disc.inner(fv, fv);
    let scale = f_norm_sq * (energy / f_norm_sq.max(f64::MIN_POSITIVE)).abs().max(1.0) / ups;
    let formula_residual = (lhs - rhs_formula).abs() / lhs.abs().max(rhs_formula.abs()).max(f64::MIN_POSITIVE);
    let comparator_residual = (lhs - comparator) / energy.abs().max(f64::MIN_POSITIVE);
    Ok(CommutatorReport {
        t,
        upsilon: ups,
        lhs,
        lhs_nested,
        rhs_formula,
        comparator,
        boundary_term: boundary,
        energy,
        f_norm_sq,
        formula_residual,
        comparator_residual,
        tolerance: tol,
        formula_pass: formula_residual <= tol,
        sign_pass: lhs - comparator <= tol * scale,
    })
}

/// One time sample of the frequency diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySample {
    pub t: f64,
    pub f_norm_sq: f64,
    pub n: f64,
    /// ‖e^{Φ/2}g‖²/‖f‖².
    pub rest_term: f64,
    /// ∫_∂ ∂_ν f·Af dσ.
    pub boundary_term: f64,
}

/// Evaluates f(t) = χu(t)e^{Φ(t)/2} for a spectrally evolved u.
pub struct FrequencyProbe<'a> {
    model: &'a HeatModel,
    u0: &'a SpectralState,
    weight: &'a WeightSpec,
    cutoff: Option<Cutoff>,
    mu: f64,
    disc: Disc,
    chi: Vec<f64>,
}

impl<'a> FrequencyProbe<'a> {
    pub fn new(
        model: &'a HeatModel,
        u0: &'a SpectralState,
        weight: &'a WeightSpec,
        cutoff: Option<Cutoff>,
        mu: f64,
    ) -> Result<Self> {
        let disc = Disc::new(model.grid.clone())?;
        disc.check_weight(weight)?;
        if let Some(c) = &cutoff {
            disc.check_cutoff(c, &weight.x0)?;
        }
        if u0.is_zero() {
            return Err(invalid("frequency probe needs u0 != 0"));
        }
        let chi =
            (0..disc.len()).map(|i| cutoff.map_or(1.0, |c| c.profile(disc.radius_from(i, &weight.x0).0).0)).collect();
        Ok(Self { model, u0, weight, cutoff, mu, disc, chi })
    }

    pub fn sample(&self, t: f64) -> Result<FrequencySample> {
        let u = self.model.samples(&evolve(self.u0, t)?);
        let st = self.disc.stacks(self.weight, t, self.mu)?;
        let f: Vec<f64> = (0..u.len()).map(|i| self.chi[i] * u[i] * (0.5 * st[i].phi).exp()).collect();
        let f_norm_sq = self.disc.inner(&f, &f);
        let ap = apply_raw(&self.disc, &f, &st);
        let n = dirichlet_form(&self.disc, &f, &ap.grad_f, &st) / f_norm_sq;
        let boundary_term = self.disc.boundary(&ap.grad_f, &ap.af);
        let rest_term = match &self.cutoff {
            Some(c) => {
                let g = source_values(&self.disc, &u, c, &self.weight.x0);
                let eg: Vec<f64> = (0..u.len()).map(|i| g[i] * (0.5 * st[i].phi).exp()).collect();
                self.disc.inner(&eg, &eg) / f_norm_sq
            }
            None => 0.0,
        };
        Ok(FrequencySample { t, f_norm_sq, n, rest_term, boundary_term })
    }

    pub fn weight(&self) -> &WeightSpec {
        self.weight
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub times: Vec<f64>,
    pub f_norm_sq: Vec<f64>,
    pub n: Vec<f64>,
    pub rest_term: Vec<f64>,
    pub boundary_term: Vec<f64>,
}

impl FrequencyTrace {
    pub const HEADER: [&'static str; 5] = ["t", "f_norm_sq", "N", "rest_term", "boundary_term"];

    fn push(&mut self, s: &FrequencySample) {
        self.times.push(s.t);
        self.f_norm_sq.push(s.f_norm_sq);
        self.n.push(s.n);
        self.rest_term.push(s.rest_term);
        self.boundary_term.push(s.boundary_term);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::HEADER)?;
        for k in 0..self.len() {
            wr.write_record(
                [self.times[k], self.f_norm_sq[k], self.n[k], self.rest_term[k], self.boundary_term[k]]
                    .iter()
                    .map(|v| format!("{v:.17e}")),
            )?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentialReport {
    pub trace: FrequencyTrace,
    /// |½ d/dt‖f‖² + N‖f‖²| ≤ ‖e^{Φ/2}g‖‖f‖, slack relative to ‖f‖²·max(1, N).
    pub energy: InequalityReport,
    /// dN/dt ≤ N/Υ + rest, slack relative to max(1, N).
    pub frequency: InequalityReport,
    /// Largest |½ d/dt‖f‖² + N‖f‖²|/‖f‖² seen.
    pub max_energy_residual: f64,
    /// Set when ‖f‖² underflowed and later samples were dropped.
    pub truncated: bool,
}

impl DifferentialReport {
    pub fn pass(&self) -> bool {
        self.energy.pass && self.frequency.pass
    }
}

fn richardson_pair(probe: &FrequencyProbe, t: f64, h: f64) -> Result<(f64, f64)> {
    let s = [t + h, t - h, t + 0.5 * h, t - 0.5 * h].map(|x| probe.sample(x));
    let [p1, m1, p2, m2] = s;
    let (p1, m1, p2, m2) = (p1?, m1?, p2?, m2?);
    let rich = |a: f64, b: f64, c: f64, d: f64| (4.0 * (c - d) / h - (a - b) / (2.0 * h)) / 3.0;
    Ok((rich(p1.f_norm_sq, m1.f_norm_sq, p2.f_norm_sq, m2.f_norm_sq), rich(p1.n, m1.n, p2.n, m2.n)))
}

const UNDERFLOW: f64 = 1e-250;

/// Samples `sample_count` equispaced times in (u0.t, T] and checks both
/// differential inequalities at the interior samples.
pub fn verify_differential_inequalities(
    probe: &FrequencyProbe,
    sample_count: usize,
    tol: f64,
) -> Result<DifferentialReport> {
    if sample_count < 3 {
        return Err(invalid("need at least 3 samples"));
    }
    let weight = probe.weight();
    let (t0, big_t) = (probe.u0.t, weight.big_t);
    if !(big_t > t0) {
        return Err(invalid("the window end T must exceed the initial time"));
    }
    let dt = (big_t - t0) / sample_count as f64;
    let mut trace = FrequencyTrace::default();
    let mut truncated = false;
    for k in 1..=sample_count {
        let s = probe.sample(t0 + dt * k as f64)?;
        if !(s.f_norm_sq > UNDERFLOW) || !s.n.is_finite() {
            truncated = true;
            break;
        }
        trace.push(&s);
    }
    let mut energy = WorstCase::new(tol);
    let mut freq = WorstCase::new(tol);
    let mut max_res: f64 = 0.0;
    for k in 1..trace.len().saturating_sub(1) {
        let t = trace.times[k];
        let ups = weight.upsilon(t);
        let h = 1e-3 * dt.min(ups);
        let (d_norm, d_n) = richardson_pair(probe, t, h)?;
        let (fsq, n, rest) = (trace.f_norm_sq[k], trace.n[k], trace.rest_term[k]);
        let scale = n.abs().max(1.0);
        let lhs_i = (0.5 * d_norm + n * fsq).abs();
        let rhs_i = (rest * fsq).sqrt() * fsq.sqrt();
        max_res = max_res.max(lhs_i / fsq);
        energy.push(lhs_i / fsq, rhs_i / fsq, (rhs_i - lhs_i) / (fsq * scale));
        let rhs_ii = n / ups + rest;
        freq.push(d_n, rhs_ii, (rhs_ii - d_n) / scale);
    }
    Ok(DifferentialReport {
        trace,
        energy: energy.finish().with("relative_to", "f_norm_sq*max(1,N)"),
        frequency: freq.finish().with("relative_to", "max(1,N)"),
        max_energy_residual: max_res,
        truncated,
    })
}

/// M = ln((T−t2+ħ)/(T−t3+ħ)) / ln((T−t1+ħ)/(T−t2+ħ)).
pub fn interpolation_exponent(t1: f64, t2: f64, t3: f64, big_t: f64, hbar: f64) -> f64 {
    let u = |t: f64| big_t - t + hbar;
    (u(t2) / u(t3)).ln() / (u(t1) / u(t2)).ln()
}

/// M_ℓ = ln(ℓ+1)/ln((2ℓ+1)/(ℓ+1)).
pub fn m_ell(ell: f64) -> f64 {
    (ell + 1.0).ln() / ((2.0 * ell + 1.0) / (ell + 1.0)).ln()
}

/// Source of ‖f(t)‖² and integrals of the rest term r(t) = ‖e^{Φ/2}g‖²/‖f‖².
pub trait NormSource {
    fn norm_sq(&self, t: f64) -> Result<f64>;
    /// (∫_a^b r dt, ∫_a^b √r dt).
    fn rest_integrals(&self, a: f64, b: f64) -> Result<(f64, f64)>;
}

impl NormSource for FrequencyTrace {
    fn norm_sq(&self, t: f64) -> Result<f64> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|k| self.f_norm_sq[k])
            .ok_or_else(|| invalid(format!("time {t} is not a trace sample")))
    }

    fn rest_integrals(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let idx: Vec<usize> =
            (0..self.len()).filter(|&k| self.times[k] >= a - 1e-12 && self.times[k] <= b + 1e-12).collect();
        let ts: Vec<f64> = idx.iter().map(|&k| self.times[k]).collect();
        let r: Vec<f64> = idx.iter().map(|&k| self.rest_term[k]).collect();
        let sr: Vec<f64> = r.iter().map(|v| v.sqrt()).collect();
        Ok((crate::numerics::trapezoid(&ts, &r), crate::numerics::trapezoid(&ts, &sr)))
    }
}

const PROBE_PANELS: usize = 32;

impl NormSource for FrequencyProbe<'_> {
    fn norm_sq(&self, t: f64) -> Result<f64> {
        Ok(self.sample(t)?.f_norm_sq)
    }

    fn rest_integrals(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        if self.cutoff.is_none() {
            return Ok((0.0, 0.0));
        }
        let w = simpson_weights(PROBE_PANELS, (b - a) / PROBE_PANELS as f64);
        let mut acc = (0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            let r = self.sample(a + (b - a) * k as f64 / PROBE_PANELS as f64)?.rest_term;
            acc.0 += wk * r;
            acc.1 += wk * r.sqrt();
        }
        Ok(acc)
    }
}

/// Localization exponent D evaluated term by term as displayed.
pub fn localization_exponent(src: &impl NormSource, t1: f64, t2: f64, t3: f64, big_t: f64, hbar: f64) -> Result<f64> {
    let m = interpolation_exponent(t1, t2, t3, big_t, hbar);
    let (r12, s12) = src.rest_integrals(t1, t2)?;
    let (r23, s23) = src.rest_integrals(t2, t3)?;
    let inv_ups = ((big_t - t2 + hbar) / (big_t - t3 + hbar)).ln();
    Ok(m * ((t2 - t1) * r12 + s12) + inv_ups * r23 + s23)
}

/// (‖f(t2)‖²)^{1+M} ≤ (‖f(t1)‖²)^M ‖f(t3)‖² e^{2D}, compared in log space.
///
/// lhs/rhs hold logarithms; the slack is the relative gap rhs/lhs − 1.
pub fn three_time_interpolation(
    src: &impl NormSource,
    t1: f64,
    t2: f64,
    t3: f64,
    big_t: f64,
    hbar: f64,
    tol: f64,
) -> Result<InequalityReport> {
    if !(0.0 < t1 && t1 < t2 && t2 < t3 && t3 <= big_t) || !(hbar > 0.0) {
        return Err(invalid("three-time interpolation needs 0 < t1 < t2 < t3 <= T and hbar > 0"));
    }
    let m = interpolation_exponent(t1, t2, t3, big_t, hbar);
    let d = localization_exponent(src, t1, t2, t3, big_t, hbar)?;
    let (n1, n2, n3) = (src.norm_sq(t1)?, src.norm_sq(t2)?, src.norm_sq(t3)?);
    let lhs = (1.0 + m) * n2.ln();
    let rhs = m * n1.ln() + n3.ln() + 2.0 * d;
    Ok(InequalityReport::from_slack(lhs, rhs, (rhs - lhs).exp_m1(), tol)
        .with("M", m)
        .with("D", d)
        .with("log_space", true))
}
