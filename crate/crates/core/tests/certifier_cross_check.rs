//! The closed-form coefficient table predicts the numerical commutator gap on radial fields.

use logconvex_core::certifier::{expand_radial_commutator, q, to_f64, RadialWeightParams, Q};
use logconvex_core::frequency_lab::commutator_form;
use logconvex_core::numerics::rng;
use logconvex_core::{Grid, WeightSpec};
use num_traits::Zero;
use rand::Rng;
use std::sync::Arc;

struct Bump {
    c: f64,
    w: f64,
    coef: [f64; 3],
}

impl Bump {
    fn seeded(seed: u64) -> Self {
        let mut r = rng(seed);
        Bump { c: r.gen_range(0.8..1.1), w: r.gen_range(0.3..0.5), coef: [0; 3].map(|_| r.gen_range(-0.5..0.5)) }
    }

    fn eval(&self, rho: f64) -> f64 {
        let s = (rho - self.c) / self.w;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let poly = 1.0 + self.coef.iter().enumerate().map(|(k, a)| a * s.powi(k as i32 + 1)).sum::<f64>();
        (1.0 - 1.0 / (1.0 - s * s)).exp() * poly
    }

    fn deriv(&self, rho: f64) -> f64 {
        let h = 1e-5;
        (8.0 * (self.eval(rho + h) - self.eval(rho - h)) - (self.eval(rho + 2.0 * h) - self.eval(rho - 2.0 * h)))
            / (12.0 * h)
    }
}

/// Σ table coefficients × the matching radial integrals.
fn predicted_gap(params: &RadialWeightParams, grid: &Grid, f: &Bump, ups: f64) -> f64 {
    let table = expand_radial_commutator(params).unwrap();
    let s = to_f64(&params.s);
    let (gc, gr, gx, hm) =
        (to_f64(&table.grad_const), to_f64(&table.grad_radial), to_f64(&table.grad_x), to_f64(&table.hardy_mu));
    let mut total = 0.0;
    for i in 0..grid.len() {
        let rho = grid.point(i)[0];
        let (v, d) = (f.eval(rho), f.deriv(rho));
        let mut acc = (gc * d * d
            + gr * rho.powf(s - 2.0) * d * d
            + gx * rho.powf(s - 4.0) * rho * rho * d * d
            + hm * v * v / (rho * rho))
            / ups;
        for e in &table.zeroth {
            acc += to_f64(&e.coefficient) * rho.powf(to_f64(&e.power.exponent(&params.s))) * v * v
                / ups.powi(e.upsilon_power as i32);
        }
        total += acc * grid.weights[i];
    }
    total
}

fn check_family(n: u32, a: Q, b: Q, c: Q, s: Q, mu: Q) {
    let params = RadialWeightParams::new(n, a.clone(), b.clone(), c.clone(), s.clone(), mu.clone(), 2.0).unwrap();
    let grid = Arc::new(Grid::radial(n as usize, 2.0, 3200).unwrap());
    let weight =
        WeightSpec::radial_poly(vec![0.0; n as usize], 1.0, 0.5, to_f64(&a), to_f64(&b), to_f64(&c), to_f64(&s));
    for seed in 0..20 {
        let f = Bump::seeded(seed);
        let field = grid.sample(|x| f.eval(x[0]));
        let t = 0.1 + 0.04 * seed as f64;
        let rep = commutator_form(&field, &weight, t, to_f64(&mu)).unwrap();
        let want = predicted_gap(&params, &grid, &f, weight.upsilon(t));
        let got = rep.lhs - rep.comparator;
        let scale = rep.energy.abs() / rep.upsilon;
        assert!((got - want).abs() <= 1e-4 * scale, "n {n} seed {seed}: numeric {got} vs table {want} (scale {scale})");
    }
}

#[test]
fn s43_family_matches_numeric_gap() {
    check_family(3, q(1, 4), q(1, 4), q(1, 81), q(4, 3), Q::zero());
}

#[test]
fn s43_family_with_hardy_potential_matches_numeric_gap() {
    check_family(3, q(1, 4), q(1, 4), q(1, 81), q(4, 3), q(7, 54));
}

#[test]
fn s1_family_with_a_below_quarter_matches_numeric_gap() {
    check_family(4, q(1, 8), q(1, 3), q(1, 9), q(1, 1), q(1, 5));
}
