//! Run configuration: one JSON document whose defaults are echoed back into every report.

use anyhow::{bail, Context, Result};
use logconvex_core::certifier::{q, ParamAxis, RadialWeightParams, SearchSpec, Q};
use logconvex_core::{DomainSpec, Region, WeightSpec};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    /// Defaults to the quadratic weight anchored at the domain's x0.
    pub weight: Option<WeightSpec>,
    pub time: TimeWindow,
    pub seed: u64,
    /// Number of seeded initial states per check.
    pub states: usize,
    pub modes: usize,
    pub grid: usize,
    pub tol: f64,
    /// Time samples per trace.
    pub samples: usize,
    pub functional: FunctionalConfig,
    pub constants: ConstantsConfig,
    pub certify: RadialWeightParams,
    pub search: SearchSpec,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeWindow {
    #[serde(rename = "T")]
    pub big_t: f64,
    pub hbar: f64,
    pub ell: f64,
}

impl Default for TimeWindow {
    fn default() -> Self {
        Self { big_t: 0.5, hbar: 0.02, ell: 2.0 }
    }
}

/// Field and potential for the Hardy and Nash checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionalConfig {
    pub n: usize,
    pub radius: f64,
    /// Defaults to (n−2)²/4.
    pub mu: Option<f64>,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        Self { n: 3, radius: 1.0, mu: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub eps: f64,
    pub lambda: f64,
    pub c: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
    #[serde(rename = "T")]
    pub big_t: f64,
    pub d1: f64,
    pub d2: f64,
    pub measure_omega: f64,
    pub norm_u0_sq: f64,
    pub norm_ut_ball_sq: f64,
    pub radius: f64,
    pub delta: f64,
    pub ell: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            r: 0.5,
            big_r: 1.0,
            eps: 0.5,
            lambda: 4.0,
            c: 2.0,
            k: 1.0,
            beta: 0.5,
            gamma: 1.0,
            p: 2.0,
            big_t: 1.0,
            d1: 1.0,
            d2: 1.0,
            measure_omega: 0.2,
            norm_u0_sq: std::f64::consts::E,
            norm_ut_ball_sq: 1.0,
            radius: 1.0,
            delta: 1.0,
            ell: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Check run at every grid point.
    pub experiment: String,
    /// Axis name → values; axes: ell, hbar, T, seed, grid, modes, states.
    pub axes: BTreeMap<String, Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { experiment: "interpolation".into(), axes: BTreeMap::from([("ell".into(), vec![2.0, 4.0, 8.0])]) }
    }
}

fn s43_family() -> RadialWeightParams {
    let quarter = q(1, 4);
    RadialWeightParams::new(3, quarter.clone(), quarter, q(1, 81), q(4, 3), Q::zero(), (4.0f64 / 3.0).powf(1.5))
        .expect("reference parameters are admissible")
}

fn default_search() -> SearchSpec {
    SearchSpec {
        n: 3,
        mu: Q::zero(),
        r0: (4.0f64 / 3.0).powf(1.5),
        a: ParamAxis::Values { values: vec![q(1, 8), q(1, 4)] },
        b: ParamAxis::Values { values: vec![q(1, 8), q(1, 4)] },
        c: ParamAxis::Values { values: vec![q(1, 81), q(1, 16)] },
        s: ParamAxis::Values { values: vec![q(1, 1), q(4, 3)] },
        resolution: 1024,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let domain = DomainSpec::interval(1.0).with_omega(vec![Region::Box { lo: vec![0.4], hi: vec![0.6] }]);
        Self {
            domain,
            weight: None,
            time: TimeWindow::default(),
            seed: 0,
            states: 10,
            modes: 32,
            grid: 512,
            tol: 1e-6,
            samples: 8,
            functional: FunctionalConfig::default(),
            constants: ConstantsConfig::default(),
            certify: s43_family(),
            search: default_search(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: Self = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.states == 0 || self.modes == 0 || self.samples < 3 {
            bail!("states and modes must be positive and samples at least 3");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            bail!("tolerance must be positive");
        }
        let t = &self.time;
        if !(t.big_t > 0.0 && t.hbar > 0.0 && t.ell >= 1.0) {
            bail!("time window needs T > 0, hbar > 0 and ell >= 1");
        }
        Ok(())
    }

    /// The configured weight, or the quadratic weight at x0 over the configured window.
    pub fn weight(&self) -> WeightSpec {
        self.weight
            .clone()
            .unwrap_or_else(|| WeightSpec::quadratic(self.domain.x0.clone(), self.time.big_t, self.time.hbar))
    }

    /// Half-width of the first observation region.
    pub fn omega_radius(&self) -> Result<f64> {
        match self.domain.omega.first() {
            Some(Region::Box { lo, hi }) => Ok(0.5 * (hi[0] - lo[0])),
            Some(Region::Annulus { r, .. }) => Ok(*r),
            None => bail!("this experiment needs an observation region omega"),
        }
    }

    /// Applies one sweep axis value.
    pub fn set_axis(&mut self, axis: &str, v: f64) -> Result<()> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                bail!("axis {axis} needs a nonnegative integer, got {v}")
            }
        };
        match axis {
            "ell" => self.time.ell = v,
            "hbar" => self.time.hbar = v,
            "T" => self.time.big_t = v,
            "seed" => self.seed = as_count(v)? as u64,
            "grid" => self.grid = as_count(v)?,
            "modes" => self.modes = as_count(v)?,
            "states" => self.states = as_count(v)?,
            _ => bail!("unknown sweep axis `{axis}`"),
        }
        if let Some(w) = &mut self.weight {
            w.big_t = self.time.big_t;
            w.hbar = self.time.hbar;
        }
        Ok(())
    }
}
