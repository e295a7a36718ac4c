//! Seeded generators and brute-force reference oracles shared by the
//! integration tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use siplb_core::cli::load_instance;
use siplb_core::globalopt::grid_axis;
use siplb_core::{BoxRegion, Expr, SipInstance, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All exponent vectors over `n` variables with total degree `1..=max_deg`.
fn monomials(n: usize, max_deg: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|m: Vec<u32>| {
                (0..=max_deg).map(move |e| {
                    let mut m = m.clone();
                    m.push(e);
                    m
                })
            })
            .filter(|m| m.iter().sum::<u32>() <= max_deg)
            .collect();
    }
    out.retain(|m| m.iter().sum::<u32>() > 0);
    out
}

fn coeff(rng: &mut ChaCha8Rng) -> f64 {
    (rng.gen_range(-1.0f64..1.0) * 100.0).round() / 100.0
}

/// Text of a random polynomial of degree at most `max_deg` in the given
/// variable names, with two-decimal coefficients in `[-1, 1]`.
pub fn random_poly(rng: &mut ChaCha8Rng, vars: &[String], max_deg: u32, terms: usize) -> String {
    let mut monos = monomials(vars.len(), max_deg);
    monos.shuffle(rng);
    let mut s = format!("{}", coeff(rng));
    for m in monos.into_iter().take(terms) {
        let c = coeff(rng);
        if c == 0.0 {
            continue;
        }
        s.push_str(if c < 0.0 { " - " } else { " + " });
        s.push_str(&format!("{}", c.abs()));
        for (v, &e) in vars.iter().zip(&m) {
            match e {
                0 => {}
                1 => s.push_str(&format!("*{v}")),
                _ => s.push_str(&format!("*{v}^{e}")),
            }
        }
    }
    s
}

pub fn names(prefix: char, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn random_bounds(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let lo = (rng.gen_range(-2.0f64..0.5) * 10.0).round() / 10.0;
            let w = (rng.gen_range(0.5f64..2.5) * 10.0).round() / 10.0;
            (lo, lo + w)
        })
        .collect()
}

/// Instance-file text for a random polynomial SIP. The constraint is shifted
/// so that the midpoint of `X` is (grid-)feasible with a small margin.
pub fn random_instance_text(seed: u64) -> String {
    let mut r = rng(seed);
    let nx = 1 + (seed % 2) as usize;
    let ny = 1 + ((seed / 2) % 2) as usize;
    let (xn, yn) = (names('x', nx), names('y', ny));
    let xb = random_bounds(&mut r, nx);
    let yb = random_bounds(&mut r, ny);
    let objective = random_poly(&mut r, &xn, 3, 4);
    let mut all = xn.clone();
    all.extend(yn.iter().cloned());
    let p = random_poly(&mut r, &all, 3, 6);

    let raw = SipInstance::new(
        "raw",
        siplb_core::parse("0").unwrap(),
        siplb_core::parse(&p).unwrap(),
        BoxRegion::from_bounds(&xb).unwrap(),
        BoxRegion::from_bounds(&yb).unwrap(),
    )
    .unwrap();
    let mid = raw.x_box().midpoint();
    let shift = grid_max_g(&raw, &mid, 51) + 0.05;
    let shift = (shift * 1000.0).ceil() / 1000.0;

    let mut text = format!("name rand{seed}\nxvars {nx}\nyvars {ny}\n");
    for (i, (lo, hi)) in xb.iter().enumerate() {
        text.push_str(&format!("xdom {} {lo} {hi}\n", i + 1));
    }
    for (j, (lo, hi)) in yb.iter().enumerate() {
        text.push_str(&format!("ydom {} {lo} {hi}\n", j + 1));
    }
    text.push_str(&format!("objective {objective}\n"));
    text.push_str(&format!("constraint ({p}) - {shift}\n"));
    text
}

pub fn random_instance(seed: u64) -> SipInstance {
    load_instance(&random_instance_text(seed)).expect("generated instance parses")
}

/// Calls `visit` on every point of the uniform grid with `n` points per
/// dimension; stops early when `visit` returns `false`.
pub fn for_each_grid_point(b: &BoxRegion, n: usize, mut visit: impl FnMut(&[f64]) -> bool) {
    let axes: Vec<Vec<f64>> = b.dims().iter().map(|iv| grid_axis(iv.lo(), iv.hi(), n)).collect();
    let mut idx = vec![0usize; axes.len()];
    let mut p: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        if !visit(&p) {
            return;
        }
        let mut d = 0;
        loop {
            if d == idx.len() {
                return;
            }
            idx[d] += 1;
            if idx[d] < n {
                p[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            p[d] = axes[d][0];
            d += 1;
        }
    }
}

/// Largest `g(x, y)` over the `y` grid.
pub fn grid_max_g(inst: &SipInstance, x: &[f64], n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_grid_point(inst.y_box(), n, |y| {
        if let Some(v) = inst.g(x, y) {
            best = best.max(v);
        }
        true
    });
    best
}

/// Brute-force SIP optimum: `x` grid points sorted by objective value, the
/// first one with `g(x, y) <= 0` on the whole `y` grid wins.
pub fn grid_sip_optimum(inst: &SipInstance, nx: usize, ny: usize) -> Option<(Vec<f64>, f64)> {
    let mut xs: Vec<(Vec<f64>, f64)> = Vec::new();
    for_each_grid_point(inst.x_box(), nx, |x| {
        if let Some(v) = inst.f(x) {
            xs.push((x.to_vec(), v));
        }
        true
    });
    xs.sort_by(|a, b| a.1.total_cmp(&b.1));
    xs.into_iter().find(|(x, _)| {
        let mut ok = true;
        for_each_grid_point(inst.y_box(), ny, |y| {
            ok = matches!(inst.g(x, y), Some(v) if v <= 0.0);
            ok
        });
        ok
    })
}

/// Random expression over `x1`, `x2` and `y1`. Divisions always have a
/// denominator bounded away from zero.
pub fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        return match rng.gen_range(0..4) {
            0 => Expr::constant((rng.gen_range(-3.0f64..3.0) * 100.0).round() / 100.0),
            1 => Expr::var(Var::x(1)),
            2 => Expr::var(Var::x(2)),
            _ => Expr::var(Var::y(1)),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..10) {
        0 => Expr::neg(random_expr(rng, d)),
        1 => Expr::add(random_expr(rng, d), random_expr(rng, d)),
        2 => Expr::sub(random_expr(rng, d), random_expr(rng, d)),
        3 | 4 => Expr::mul(random_expr(rng, d), random_expr(rng, d)),
        5 => {
            let den = Expr::add(Expr::constant(0.5), Expr::powi(random_expr(rng, d), 2));
            Expr::div(random_expr(rng, d), den)
        }
        6 => Expr::powi(random_expr(rng, d), rng.gen_range(0..5)),
        7 => Expr::Sin(Box::new(random_expr(rng, d))),
        8 => Expr::Cos(Box::new(random_expr(rng, d))),
        _ => Expr::Exp(Box::new(random_expr(rng, d.min(1)))),
    }
}
