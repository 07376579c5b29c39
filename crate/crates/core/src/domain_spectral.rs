//! Domains, quadrature grids and Dirichlet eigenbases.
//!
//! Intervals and rectangles use vertex grids with trapezoidal weights and
//! closed-form sine bases. The radial ball uses a cell-centred grid (nodes at
//! half-integer multiples of the spacing, so ρ = 0 is never sampled) with exact
//! shell volumes as weights, and a finite-volume discretisation of the s-wave
//! operator −Δ − μ/|x|² solved by Sturm bisection plus inverse iteration.

use crate::error::{invalid, LabError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

pub const DEFAULT_CELLS: usize = 1024;
pub const DEFAULT_JMAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Rectangle,
    RadialBall,
}

/// Observation subregion. Annuli are centred at the domain anchor unless `center` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Annulus {
        r0: f64,
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub n: usize,
    pub extents: Vec<f64>,
    #[serde(default)]
    pub x0: Vec<f64>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub omega: Vec<Region>,
}

impl DomainSpec {
    pub fn interval(length: f64) -> Self {
        Self {
            kind: DomainKind::Interval,
            n: 1,
            extents: vec![length],
            x0: vec![length / 2.0],
            mu: 0.0,
            omega: Vec::new(),
        }
    }

    pub fn rectangle(lx: f64, ly: f64) -> Self {
        Self {
            kind: DomainKind::Rectangle,
            n: 2,
            extents: vec![lx, ly],
            x0: vec![lx / 2.0, ly / 2.0],
            mu: 0.0,
            omega: Vec::new(),
        }
    }

    pub fn radial_ball(n: usize, radius: f64, mu: f64) -> Self {
        Self { kind: DomainKind::RadialBall, n, extents: vec![radius], x0: vec![0.0; n], mu, omega: Vec::new() }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_omega(mut self, omega: Vec<Region>) -> Self {
        self.omega = omega;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut spec: DomainSpec = serde_json::from_str(text)?;
        if spec.x0.is_empty() {
            spec.x0 = spec.default_x0();
        }
        spec.validate()?;
        Ok(spec)
    }

    fn default_x0(&self) -> Vec<f64> {
        match self.kind {
            DomainKind::RadialBall => vec![0.0; self.n],
            _ => self.extents.iter().map(|l| l / 2.0).collect(),
        }
    }

    /// Hardy-critical coefficient (n−2)²/4.
    pub fn critical_mu(&self) -> f64 {
        critical_mu(self.n)
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        match self.kind {
            DomainKind::Interval => self.extents[0],
            DomainKind::Rectangle => self.extents[0] * self.extents[1],
            DomainKind::RadialBall => unit_ball_volume(self.n) * self.extents[0].powi(self.n as i32),
        }
    }

    /// max |x − x0| over the closed domain.
    pub fn max_distance_from_x0(&self) -> f64 {
        match self.kind {
            DomainKind::Interval => {
                let x0 = self.x0[0];
                x0.abs().max((self.extents[0] - x0).abs())
            }
            DomainKind::Rectangle => {
                let mut best: f64 = 0.0;
                for &cx in &[0.0, self.extents[0]] {
                    for &cy in &[0.0, self.extents[1]] {
                        best = best.max(((cx - self.x0[0]).powi(2) + (cy - self.x0[1]).powi(2)).sqrt());
                    }
                }
                best
            }
            DomainKind::RadialBall => self.extents[0] + norm(&self.x0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.extents.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(invalid("all extents must be positive and finite"));
        }
        let axes = match self.kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
            DomainKind::RadialBall => 1,
        };
        if self.extents.len() != axes {
            return Err(invalid(format!("{:?} needs {axes} extent(s)", self.kind)));
        }
        match self.kind {
            DomainKind::Interval if self.n != 1 => return Err(invalid("interval requires n = 1")),
            DomainKind::Rectangle if self.n != 2 => return Err(invalid("rectangle requires n = 2")),
            DomainKind::RadialBall => {
                if self.n < 3 {
                    return Err(invalid("radial ball requires n >= 3"));
                }
                if self.mu >= self.critical_mu() {
                    return Err(LabError::SupercriticalRejected { mu: self.mu, critical: self.critical_mu() });
                }
            }
            _ => {
                if self.mu != 0.0 {
                    return Err(invalid("mu must be 0 outside the radial ball"));
                }
            }
        }
        if self.x0.len() != self.n {
            return Err(invalid("x0 dimension mismatch"));
        }
        for region in &self.omega {
            self.check_region(region)?;
        }
        Ok(())
    }

    fn check_region(&self, region: &Region) -> Result<()> {
        match region {
            Region::Box { lo, hi } => {
                if self.kind == DomainKind::RadialBall {
                    return Err(invalid("box regions are not available on the radial grid"));
                }
                if lo.len() != self.n || hi.len() != self.n {
                    return Err(invalid("box dimension mismatch"));
                }
                for k in 0..self.n {
                    if !(lo[k] < hi[k]) || lo[k] < 0.0 || hi[k] > self.extents[k] {
                        return Err(invalid("omega box must be nonempty and inside the domain"));
                    }
                }
            }
            Region::Annulus { r0, r, center } => {
                if !(*r0 >= 0.0 && r0 < r) {
                    return Err(invalid("annulus needs 0 <= r0 < r"));
                }
                let c = center.clone().unwrap_or_else(|| self.x0.clone());
                if c.len() != self.n {
                    return Err(invalid("annulus center dimension mismatch"));
                }
                let inside = match self.kind {
                    DomainKind::Interval => c[0] - r >= 0.0 && c[0] + r <= self.extents[0],
                    DomainKind::Rectangle => (0..2).all(|k| c[k] - r >= 0.0 && c[k] + r <= self.extents[k]),
                    DomainKind::RadialBall => norm(&c) == 0.0 && *r <= self.extents[0],
                };
                if !inside {
                    return Err(invalid("omega annulus must lie inside the domain"));
                }
            }
        }
        Ok(())
    }

    /// Default grid for this domain with `cells` cells per axis.
    pub fn grid(&self, cells: usize) -> Result<Grid> {
        self.validate()?;
        let mut grid = match self.kind {
            DomainKind::Interval => Grid::interval(self.extents[0], cells)?,
            DomainKind::Rectangle => Grid::rectangle(self.extents[0], self.extents[1], cells, cells)?,
            DomainKind::RadialBall => Grid::radial(self.n, self.extents[0], cells)?,
        };
        if !self.omega.is_empty() {
            let mut w = vec![0.0; grid.len()];
            let merged = merge_regions(self);
            for region in &merged {
                let rw = grid.region_weights(region, &self.x0)?;
                for (acc, v) in w.iter_mut().zip(rw) {
                    *acc += v;
                }
            }
            for (acc, full) in w.iter_mut().zip(&grid.weights) {
                *acc = acc.min(*full);
            }
            grid.omega_weights = Some(w);
        }
        Ok(grid)
    }
}

/// On the interval, overlapping boxes and annuli are merged into disjoint segments.
fn merge_regions(spec: &DomainSpec) -> Vec<Region> {
    if spec.kind != DomainKind::Interval {
        return spec.omega.clone();
    }
    let mut segs: Vec<(f64, f64)> = Vec::new();
    for region in &spec.omega {
        match region {
            Region::Box { lo, hi } => segs.push((lo[0], hi[0])),
            Region::Annulus { r0, r, center } => {
                let c = center.as_ref().map(|v| v[0]).unwrap_or(spec.x0[0]);
                if *r0 == 0.0 {
                    segs.push((c - r, c + r));
                } else {
                    segs.push((c - r, c - r0));
                    segs.push((c + r0, c + r));
                }
            }
        }
    }
    segs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in segs {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out.into_iter().map(|(a, b)| Region::Box { lo: vec![a], hi: vec![b] }).collect()
}

pub fn critical_mu(n: usize) -> f64 {
    let k = n as f64 - 2.0;
    k * k / 4.0
}

pub fn unit_ball_volume(n: usize) -> f64 {
    // V_n = π^{n/2} / Γ(n/2 + 1), via the recursion V_n = 2π/n V_{n−2}.
    let mut v = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
    while k <= n {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Interval,
    Rectangle,
    Radial,
}

/// Quadrature grid. Rectangle samples are stored x-major: index = i·(ny+1) + j.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub kind: GridKind,
    /// Ambient dimension (n of the ball for radial grids).
    pub dim: usize,
    pub axes: Vec<Vec<f64>>,
    pub spacing: Vec<f64>,
    pub extents: Vec<f64>,
    pub weights: Vec<f64>,
    pub omega_weights: Option<Vec<f64>>,
    /// True when nodes sit half a cell away from ρ = 0.
    pub origin_offset: bool,
}

impl Grid {
    pub fn interval(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || cells < 2 {
            return Err(invalid("interval grid needs length > 0 and >= 2 cells"));
        }
        let h = length / cells as f64;
        let nodes: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        Ok(Self {
            kind: GridKind::Interval,
            dim: 1,
            weights: trapezoid_weights(cells, h),
            axes: vec![nodes],
            spacing: vec![h],
            extents: vec![length],
            omega_weights: None,
            origin_offset: false,
        })
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) || nx < 2 || ny < 2 {
            return Err(invalid("rectangle grid needs positive extents and >= 2 cells per axis"));
        }
        let (hx, hy) = (lx / nx as f64, ly / ny as f64);
        let wx = trapezoid_weights(nx, hx);
        let wy = trapezoid_weights(ny, hy);
        let mut weights = Vec::with_capacity(wx.len() * wy.len());
        for a in &wx {
            for b in &wy {
                weights.push(a * b);
            }
        }
        Ok(Self {
            kind: GridKind::Rectangle,
            dim: 2,
            axes: vec![(0..=nx).map(|i| i as f64 * hx).collect(), (0..=ny).map(|j| j as f64 * hy).collect()],
            spacing: vec![hx, hy],
            extents: vec![lx, ly],
            weights,
            omega_weights: None,
            origin_offset: false,
        })
    }

    pub fn radial(n: usize, radius: f64, cells: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid("radial grid requires n >= 3"));
        }
        if !(radius > 0.0) || cells < 2 {
            return Err(invalid("radial grid needs radius > 0 and >= 2 cells"));
        }
        let h = radius / cells as f64;
        let nodes: Vec<f64> = (1..=cells).map(|i| (i as f64 - 0.5) * h).collect();
        let vb = unit_ball_volume(n);
        let weights = (1..=cells)
            .map(|i| {
                let (lo, hi) = ((i - 1) as f64 * h, i as f64 * h);
                vb * (hi.powi(n as i32) - lo.powi(n as i32))
            })
            .collect();
        Ok(Self {
            kind: GridKind::Radial,
            dim: n,
            axes: vec![nodes],
            spacing: vec![h],
            extents: vec![radius],
            weights,
            omega_weights: None,
            origin_offset: true,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn cells(&self) -> usize {
        match self.kind {
            GridKind::Radial => self.axes[0].len(),
            _ => self.axes[0].len() - 1,
        }
    }

    /// Coordinates of sample `idx`. Radial samples return (ρ, 0, …, 0).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        match self.kind {
            GridKind::Interval => vec![self.axes[0][idx]],
            GridKind::Rectangle => {
                let ny1 = self.axes[1].len();
                vec![self.axes[0][idx / ny1], self.axes[1][idx % ny1]]
            }
            GridKind::Radial => {
                let mut p = vec![0.0; self.dim];
                p[0] = self.axes[0][idx];
                p
            }
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Quadrature weights restricted to `region` (partial cells counted exactly where possible).
    pub fn region_weights(&self, region: &Region, anchor: &[f64]) -> Result<Vec<f64>> {
        match (self.kind, region) {
            (GridKind::Interval, Region::Box { lo, hi }) => Ok(self.hat_weights(lo[0], hi[0])),
            (GridKind::Interval, Region::Annulus { r0, r, center }) => {
                let c = center.as_ref().map(|v| v[0]).unwrap_or(anchor[0]);
                let mut w = self.hat_weights(c - r, c - r0);
                if *r0 > 0.0 {
                    for (a, b) in w.iter_mut().zip(self.hat_weights(c + r0, c + r)) {
                        *a += b;
                    }
                } else {
                    w = self.hat_weights(c - r, c + r);
                }
                Ok(w)
            }
            (GridKind::Rectangle, Region::Box { lo, hi }) => {
                let wx = hat_weights_axis(&self.axes[0], self.spacing[0], self.extents[0], lo[0], hi[0]);
                let wy = hat_weights_axis(&self.axes[1], self.spacing[1], self.extents[1], lo[1], hi[1]);
                let mut w = Vec::with_capacity(self.len());
                for a in &wx {
                    for b in &wy {
                        w.push(a * b);
                    }
                }
                Ok(w)
            }
            (GridKind::Rectangle, Region::Annulus { r0, r, center }) => {
                let c = center.clone().unwrap_or_else(|| anchor.to_vec());
                Ok((0..self.len())
                    .map(|i| {
                        let p = self.point(i);
                        let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
                        if d > *r0 && d < *r {
                            self.weights[i]
                        } else {
                            0.0
                        }
                    })
                    .collect())
            }
            (GridKind::Radial, Region::Annulus { r0, r, .. }) => {
                let h = self.spacing[0];
                let vb = unit_ball_volume(self.dim);
                let n = self.dim as i32;
                Ok((1..=self.len())
                    .map(|i| {
                        let lo = ((i - 1) as f64 * h).max(*r0);
                        let hi = (i as f64 * h).min(*r);
                        if hi > lo {
                            vb * (hi.powi(n) - lo.powi(n))
                        } else {
                            0.0
                        }
                    })
                    .collect())
            }
            (GridKind::Radial, Region::Box { .. }) => Err(invalid("box regions are not available on the radial grid")),
        }
    }

    fn hat_weights(&self, lo: f64, hi: f64) -> Vec<f64> {
        hat_weights_axis(&self.axes[0], self.spacing[0], self.extents[0], lo, hi)
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Field {
        let values = (0..self.len()).map(|i| f(&self.point(i))).collect();
        Field { values, grid: Arc::new(self.clone()) }
    }
}

fn trapezoid_weights(cells: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; cells + 1];
    w[0] = h / 2.0;
    w[cells] = h / 2.0;
    w
}

/// ∫ of each node's hat function over [lo, hi] ∩ [0, extent].
fn hat_weights_axis(nodes: &[f64], h: f64, extent: f64, lo: f64, hi: f64) -> Vec<f64> {
    let (lo, hi) = (lo.max(0.0), hi.min(extent));
    nodes
        .iter()
        .map(|&xi| {
            if hi <= lo {
                return 0.0;
            }
            let mut total = 0.0;
            // rising half on [xi − h, xi]
            let (p, q) = (lo.max(xi - h).max(0.0), hi.min(xi));
            if q > p {
                let xl = xi - h;
                total += ((q - xl).powi(2) - (p - xl).powi(2)) / (2.0 * h);
            }
            // falling half on [xi, xi + h]
            let (p, q) = (lo.max(xi), hi.min(xi + h).min(extent));
            if q > p {
                let xr = xi + h;
                total += ((xr - p).powi(2) - (xr - q).powi(2)) / (2.0 * h);
            }
            total
        })
        .collect()
}

/// Grid samples of a scalar function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub grid: Arc<Grid>,
}

impl Field {
    pub fn new(values: Vec<f64>, grid: Arc<Grid>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("field sample count does not match the grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field contains non-finite samples"));
        }
        Ok(Self { values, grid })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { values: self.values.iter().map(|&v| f(v)).collect(), grid: self.grid.clone() }
    }
}

/// Integration region selector.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionSel {
    All,
    Omega,
    Annulus {
        r0: f64,
        r: f64,
        center: Option<Vec<f64>>,
    },
    /// Per-sample multipliers in [0, 1] applied to the grid weights.
    Mask(Vec<f64>),
}

/// Composite quadrature of `field` over `region`.
pub fn integrate(field: &Field, region: &RegionSel) -> Result<f64> {
    let grid = &field.grid;
    if field.values.len() != grid.len() {
        return Err(invalid("field does not match its grid"));
    }
    let dot = |w: &[f64]| field.values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>();
    match region {
        RegionSel::All => Ok(dot(&grid.weights)),
        RegionSel::Omega => match &grid.omega_weights {
            Some(w) => Ok(dot(w)),
            None => Err(invalid("grid carries no observation region")),
        },
        RegionSel::Annulus { r0, r, center } => {
            let anchor = center.clone().unwrap_or_else(|| vec![0.0; grid.dim]);
            let w = grid.region_weights(&Region::Annulus { r0: *r0, r: *r, center: center.clone() }, &anchor)?;
            Ok(dot(&w))
        }
        RegionSel::Mask(mask) => {
            if mask.len() != grid.len() {
                return Err(invalid("mask length does not match the grid"));
            }
            Ok(field.values.iter().zip(mask).zip(&grid.weights).map(|((v, m), w)| v * m * w).sum())
        }
    }
}

/// Weights of a region selector, for callers that integrate many fields.
pub fn region_weight_vector(grid: &Grid, region: &RegionSel) -> Result<Vec<f64>> {
    match region {
        RegionSel::All => Ok(grid.weights.clone()),
        RegionSel::Omega => grid.omega_weights.clone().ok_or_else(|| invalid("grid carries no observation region")),
        RegionSel::Annulus { r0, r, center } => {
            let anchor = center.clone().unwrap_or_else(|| vec![0.0; grid.dim]);
            grid.region_weights(&Region::Annulus { r0: *r0, r: *r, center: center.clone() }, &anchor)
        }
        RegionSel::Mask(mask) => {
            if mask.len() != grid.len() {
                return Err(invalid("mask length does not match the grid"));
            }
            Ok(mask.iter().zip(&grid.weights).map(|(m, w)| m * w).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EigenRepr {
    Sine {
        length: f64,
        modes: Vec<usize>,
    },
    TensorSine {
        lx: f64,
        ly: f64,
        modes: Vec<(usize, usize)>,
    },
    /// Radial profiles u_j(ρ_i) on `grid`, orthonormal for the grid weights.
    Radial {
        n: usize,
        mu: f64,
        radius: f64,
        grid: Arc<Grid>,
        profiles: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub repr: EigenRepr,
    pub normalization: &'static str,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Pointwise value of e_j (0-based index) for analytic bases.
    pub fn eval(&self, j: usize, x: &[f64]) -> Result<f64> {
        match &self.repr {
            EigenRepr::Sine { length, modes } => {
                let k = modes[j] as f64;
                Ok((2.0 / length).sqrt() * (k * PI * x[0] / length).sin())
            }
            EigenRepr::TensorSine { lx, ly, modes } => {
                let (kx, ky) = (modes[j].0 as f64, modes[j].1 as f64);
                Ok(2.0 / (lx * ly).sqrt() * (kx * PI * x[0] / lx).sin() * (ky * PI * x[1] / ly).sin())
            }
            EigenRepr::Radial { .. } => {
                Err(LabError::Unsupported("pointwise evaluation of sampled radial profiles".into()))
            }
        }
    }

    /// Gradient of e_j for analytic bases.
    pub fn eval_grad(&self, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        match &self.repr {
            EigenRepr::Sine { length, modes } => {
                let k = modes[j] as f64 * PI / length;
                Ok(vec![(2.0 / length).sqrt() * k * (k * x[0]).cos()])
            }
            EigenRepr::TensorSine { lx, ly, modes } => {
                let (kx, ky) = (modes[j].0 as f64 * PI / lx, modes[j].1 as f64 * PI / ly);
                let c = 2.0 / (lx * ly).sqrt();
                Ok(vec![c * kx * (kx * x[0]).cos() * (ky * x[1]).sin(), c * ky * (kx * x[0]).sin() * (ky * x[1]).cos()])
            }
            EigenRepr::Radial { .. } => {
                Err(LabError::Unsupported("pointwise gradient of sampled radial profiles".into()))
            }
        }
    }

    /// Samples of every eigenfunction on `grid`: `out[j][i] = e_j(x_i)`.
    pub fn sample_all(&self, grid: &Grid) -> Result<Vec<Vec<f64>>> {
        match &self.repr {
            EigenRepr::Radial { grid: own, profiles, .. } => {
                if own.as_ref() != grid {
                    return Err(invalid("radial profiles live on their own grid"));
                }
                Ok(profiles.clone())
            }
            _ => {
                let pts = grid.points();
                (0..self.len()).map(|j| pts.iter().map(|p| self.eval(j, p)).collect()).collect()
            }
        }
    }

    /// Grid on which the basis is natively sampled (radial only).
    pub fn native_grid(&self) -> Option<Arc<Grid>> {
        match &self.repr {
            EigenRepr::Radial { grid, .. } => Some(grid.clone()),
            _ => None,
        }
    }
}

pub fn build_interval_basis(length: f64, jmax: usize) -> Result<EigenSystem> {
    if !(length > 0.0 && length.is_finite()) || jmax == 0 {
        return Err(invalid("interval basis needs L > 0 and J_max >= 1"));
    }
    let modes: Vec<usize> = (1..=jmax).collect();
    let eigenvalues = modes.iter().map(|&j| (j as f64 * PI / length).powi(2)).collect();
    Ok(EigenSystem { eigenvalues, repr: EigenRepr::Sine { length, modes }, normalization: "L2(0,L)" })
}

pub fn build_rectangle_basis(lx: f64, ly: f64, jmax: usize) -> Result<EigenSystem> {
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) || jmax == 0 {
        return Err(invalid("rectangle basis needs positive extents and J_max >= 1"));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(jmax * jmax);
    for jx in 1..=jmax {
        for jy in 1..=jmax {
            let lam = (jx as f64 * PI / lx).powi(2) + (jy as f64 * PI / ly).powi(2);
            pairs.push((lam, jx, jy));
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pairs.truncate(jmax);
    Ok(EigenSystem {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        repr: EigenRepr::TensorSine { lx, ly, modes: pairs.iter().map(|p| (p.1, p.2)).collect() },
        normalization: "L2((0,Lx)x(0,Ly))",
    })
}

/// Symmetric tridiagonal matrix (diagonal `d`, off-diagonal `e`).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.d.len() {
            let qq = if q.abs() < tiny { tiny } else { q };
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// k-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        (0..n)
            .map(|i| {
                let mut v = self.d[i] * x[i];
                if i > 0 {
                    v += self.e[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.e[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// Solve (T − σI) x = b with partial pivoting; exact zero pivots are nudged.
    pub fn shifted_solve(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let scale = self.gershgorin().1.abs().max(self.gershgorin().0.abs()).max(1.0);
        let nudge = f64::EPSILON * scale;
        let mut d: Vec<f64> = self.d.iter().map(|v| v - sigma).collect();
        let dl = self.e.clone();
        let mut du = self.e.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut x = b.to_vec();
        if n == 1 {
            let p = if d[0] == 0.0 { nudge } else { d[0] };
            return vec![x[0] / p];
        }
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = nudge;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                x[i + 1] -= fact * x[i];
                if i + 2 < n {
                    du2[i] = 0.0;
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
                let tb = x[i];
                x[i] = x[i + 1];
                x[i + 1] = tb - fact * x[i + 1];
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = nudge;
        }
        x[n - 1] /= d[n - 1];
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        x
    }

    /// Lowest `count` eigenpairs; eigenvectors are Euclidean-orthonormal.
    pub fn lowest_eigenpairs(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.d.len();
        if count > n {
            return Err(invalid("more eigenpairs requested than the matrix dimension"));
        }
        let (glo, ghi) = self.gershgorin();
        let scale = glo.abs().max(ghi.abs()).max(1.0);
        let mut values = Vec::with_capacity(count);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        for k in 0..count {
            let lam = self.eigenvalue(k);
            // deterministic, non-degenerate start vector
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 + k * 104729) % 97) as f64 / 97.0).collect();
            let mut residual = f64::INFINITY;
            for _ in 0..6 {
                x = self.shifted_solve(lam, &x);
                for v in &vectors {
                    let p: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi -= p * vi;
                    }
                }
                let nx = norm(&x);
                if !(nx.is_finite() && nx > 0.0) {
                    break;
                }
                for xi in x.iter_mut() {
                    *xi /= nx;
                }
                let tx = self.apply(&x);
                residual = tx.iter().zip(&x).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
                if residual <= 1e-10 * scale {
                    break;
                }
            }
            if !(residual <= 1e-8 * scale) {
                return Err(LabError::NumericalFailure {
                    message: format!("inverse iteration did not converge for eigenpair {k}"),
                    residual,
                });
            }
            // fix sign so that the first significant entry is positive
            if let Some(first) = x.iter().find(|v| v.abs() > 1e-12) {
                if *first < 0.0 {
                    for xi in x.iter_mut() {
                        *xi = -*xi;
                    }
                }
            }
            values.push(lam);
            vectors.push(x);
        }
        Ok((values, vectors))
    }
}

/// Finite-volume pieces of the radial operator on a cell-centred grid.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    pub n: usize,
    pub mu: f64,
    pub grid: Arc<Grid>,
    /// Symmetric stiffness matrix K (so that K u = λ W u).
    pub stiffness: SymTridiag,
}

impl RadialOperator {
    pub fn new(n: usize, mu: f64, grid: &Grid) -> Result<Self> {
        if grid.kind != GridKind::Radial || grid.dim != n {
            return Err(invalid("radial operator needs a radial grid of matching dimension"));
        }
        let cells = grid.len();
        let h = grid.spacing[0];
        let area = unit_sphere_area(n);
        let face = |i: usize| area * (i as f64 * h).powi(n as i32 - 1);
        let rho = &grid.axes[0];
        let mut d = vec![0.0; cells];
        let mut e = vec![0.0; cells - 1];
        for i in 0..cells {
            let inner = face(i) / h;
            let outer = if i + 1 < cells { face(i + 1) / h } else { 2.0 * face(cells) / h };
            d[i] = inner + outer - mu * grid.weights[i] / (rho[i] * rho[i]);
            if i + 1 < cells {
                e[i] = -face(i + 1) / h;
            }
        }
        Ok(Self { n, mu, grid: Arc::new(grid.clone()), stiffness: SymTridiag { d, e } })
    }

    /// W^{-1/2} K W^{-1/2}.
    pub fn symmetric_matrix(&self) -> SymTridiag {
        let w = &self.grid.weights;
        let d = self.stiffness.d.iter().zip(w).map(|(k, w)| k / w).collect();
        let e = self.stiffness.e.iter().enumerate().map(|(i, k)| k / (w[i] * w[i + 1]).sqrt()).collect();
        SymTridiag { d, e }
    }

    /// Discrete form Σ faces A(Δu)²/h + Dirichlet face − μ ∫ u²/ρ².
    pub fn discrete_form(&self, u: &[f64]) -> f64 {
        let k = self.stiffness.apply(u);
        k.iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// Independent second-order form: centred nodal gradients with the grid weights.
    pub fn nodal_form(&self, u: &[f64]) -> f64 {
        let cells = u.len();
        let h = self.grid.spacing[0];
        let rho = &self.grid.axes[0];
        let at = |i: isize| -> f64 {
            if i < 0 {
                u[(-i - 1) as usize]
            } else if i as usize >= cells {
                -u[2 * cells - 1 - i as usize]
            } else {
                u[i as usize]
            }
        };
        (0..cells)
            .map(|i| {
                let g = (at(i as isize + 1) - at(i as isize - 1)) / (2.0 * h);
                self.grid.weights[i] * (g * g - self.mu * u[i] * u[i] / (rho[i] * rho[i]))
            })
            .sum()
    }
}

pub fn build_radial_schrodinger_basis(n: usize, mu: f64, radius: f64, grid: &Grid, jmax: usize) -> Result<EigenSystem> {
    if n < 3 {
        return Err(invalid("radial Schrödinger basis needs n >= 3"));
    }
    let crit = critical_mu(n);
    if mu >= crit {
        return Err(LabError::SupercriticalRejected { mu, critical: crit });
    }
    if jmax == 0 {
        return Err(invalid("J_max must be >= 1"));
    }
    if !grid.origin_offset || grid.kind != GridKind::Radial {
        return Err(invalid("radial basis needs a grid that excludes ρ = 0"));
    }
    if (grid.extents[0] - radius).abs() > 1e-12 * radius {
        return Err(invalid("grid radius does not match R_ball"));
    }
    let op = RadialOperator::new(n, mu, grid)?;
    let m = op.symmetric_matrix();
    let (values, vectors) = m.lowest_eigenpairs(jmax)?;
    let profiles = vectors.iter().map(|y| y.iter().zip(&grid.weights).map(|(v, w)| v / w.sqrt()).collect()).collect();
    Ok(EigenSystem {
        eigenvalues: values,
        repr: EigenRepr::Radial { n, mu, radius, grid: Arc::new(grid.clone()), profiles },
        normalization: "L2(ball) with grid weights",
    })
}

/// Basis matching a domain spec on the given grid.
pub fn build_basis(spec: &DomainSpec, grid: &Grid, jmax: usize) -> Result<EigenSystem> {
    match spec.kind {
        DomainKind::Interval => build_interval_basis(spec.extents[0], jmax),
        DomainKind::Rectangle => build_rectangle_basis(spec.extents[0], spec.extents[1], jmax),
        DomainKind::RadialBall => build_radial_schrodinger_basis(spec.n, spec.mu, spec.extents[0], grid, jmax),
    }
}
